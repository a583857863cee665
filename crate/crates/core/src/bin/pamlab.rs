//! Command-line front end. Usage errors exit with 2, runtime errors with 1.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use pamlab::config::ExperimentConfig;
use pamlab::experiments::{self, write_with_manifest, Manifest};
use pamlab::laws::LimitLaw;
use pamlab::potential::{PotentialField, ScalingBundle};
use pamlab::solver::{self, FkConfig, SolverConfig, SolverState, Strategy};
use pamlab::spectral::{self, FiniteSet, SpectralConfig};
use pamlab::variational::{top_k_scan, ScanConfig};
use pamlab::{Error, Result, Site};

#[derive(Parser)]
#[command(name = "pamlab", version, about = "Parabolic Anderson model with Pareto potential")]
struct Cli {
    /// Output directory; results and manifest.json are written there.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (default: available parallelism).
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Inspect the potential field.
    #[command(subcommand)]
    Potential(PotentialCmd),
    /// Certified search for the top maximizers of Φ_t.
    #[command(subcommand)]
    Phi(PhiCmd),
    /// Solve the heat equation with random potential up to time t.
    Solve(SolveArgs),
    /// Feynman–Kac Monte Carlo estimate of U(t).
    Fk(FkArgs),
    /// Principal eigenpair and decay certificate on a ball.
    #[command(subcommand)]
    Spectral(SpectralCmd),
    /// Ensemble experiments.
    #[command(subcommand)]
    Experiment(ExperimentCmd),
    /// Evaluate the limit laws.
    #[command(subcommand)]
    Densities(DensitiesCmd),
}

#[derive(Args, Clone, Serialize)]
struct FieldArgs {
    #[arg(long)]
    d: usize,
    #[arg(long)]
    alpha: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl FieldArgs {
    fn field(&self) -> Result<PotentialField> {
        PotentialField::pareto(self.seed, self.d, self.alpha)
    }
}

#[derive(Subcommand)]
enum PotentialCmd {
    /// ξ on the window [−radius, radius]^d as CSV z_1..z_d,xi.
    Dump {
        #[command(flatten)]
        field: FieldArgs,
        #[arg(long, default_value_t = 5)]
        radius: i64,
    },
}

#[derive(Subcommand)]
enum PhiCmd {
    /// Top k of Φ_t with a certified bound on missing a better site.
    Scan {
        #[command(flatten)]
        field: FieldArgs,
        #[arg(long)]
        t: f64,
        #[arg(long, default_value_t = 3)]
        k: usize,
        #[arg(long, default_value_t = 1e-6)]
        target_eps: f64,
    },
}

#[derive(Args, Serialize)]
struct SolveArgs {
    #[command(flatten)]
    field: FieldArgs,
    #[arg(long)]
    t: f64,
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    /// Initial box radius (default 2·r_t·g_t).
    #[arg(long)]
    radius: Option<usize>,
    /// Also write the solution snapshot (needs --out).
    #[arg(long)]
    snapshot: bool,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
enum StrategyKind {
    Direct,
    SitAt,
}

#[derive(Args, Serialize)]
struct FkArgs {
    #[command(flatten)]
    field: FieldArgs,
    #[arg(long)]
    t: f64,
    #[arg(long, default_value_t = 10_000)]
    samples: usize,
    #[arg(long, value_enum, default_value = "direct")]
    strategy: StrategyKind,
    /// Target site of the sit-at strategy, comma separated.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    z: Vec<i64>,
    #[arg(long, default_value_t = 0.5)]
    rho: f64,
    /// Seed of the walk sampler.
    #[arg(long, default_value_t = 0)]
    mc_seed: u64,
    #[arg(long, default_value_t = 0.1)]
    max_rel_stderr: f64,
}

#[derive(Subcommand)]
enum SpectralCmd {
    /// Eigenpair of Δ + ξ on the ℓ1 ball of the given radius at the origin.
    Check {
        #[command(flatten)]
        field: FieldArgs,
        #[arg(long, default_value_t = 3)]
        radius: u64,
        #[arg(long, default_value_t = 1e-11)]
        tol: f64,
    },
}

#[derive(Args)]
struct ExperimentArgs {
    /// TOML config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Rerun from a manifest.json written by an earlier run.
    #[arg(long, conflicts_with = "config")]
    manifest: Option<PathBuf>,
    /// Override one config key, e.g. --set solver_tol=1e-5 (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    #[arg(long)]
    seed_count: Option<u64>,
    #[arg(long, value_delimiter = ',')]
    t_grid: Option<Vec<f64>>,
}

#[derive(Subcommand)]
enum ExperimentCmd {
    /// Rescaled top maximizers over seeds, compared with the limit laws.
    LimitLaw(ExperimentArgs),
    /// Mass concentration at the top sites along a time grid.
    Localization(ExperimentArgs),
    /// Changes of the top site and how the mass moves between them.
    TwoCities(ExperimentArgs),
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
enum LawKind {
    /// P(Y ≤ y)
    Y,
    /// density of X¹
    X1,
    /// joint density of (X¹, X²)
    Joint,
    /// P(|X¹| ≤ r)
    Radial,
}

#[derive(Subcommand)]
enum DensitiesCmd {
    /// Evaluate one limit law at a point.
    Eval {
        #[arg(long, value_enum)]
        law: LawKind,
        #[arg(long)]
        d: usize,
        #[arg(long)]
        alpha: f64,
        /// Point x (comma separated), or y / r for the scalar laws.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        x: Vec<f64>,
        /// Second point of the joint density.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        x2: Vec<f64>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

/// Prints `value` as JSON, or writes it to `name` under `out` with a manifest.
fn emit(out: &Option<PathBuf>, command: &str, args: &impl Serialize, name: &str, value: &serde_json::Value) -> Result<()> {
    let bytes = serde_json::to_vec_pretty(value)?;
    match out {
        Some(dir) => write_with_manifest(dir, command, args, vec![(name, bytes)]),
        None => {
            let mut so = std::io::stdout().lock();
            so.write_all(&bytes)?;
            writeln!(so)?;
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    if let Some(w) = cli.workers {
        rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build_global()
            .map_err(|e| Error::Config(format!("workers: {e}")))?;
    }
    let out = cli.out;
    match cli.command {
        Command::Potential(PotentialCmd::Dump { field, radius }) => {
            let f = field.field()?;
            match &out {
                Some(dir) => {
                    let mut bytes = Vec::new();
                    f.dump_window(radius, &mut bytes)?;
                    let args = serde_json::json!({ "field": field, "radius": radius });
                    write_with_manifest(dir, "potential dump", &args, vec![("field.csv", bytes)])
                }
                None => f.dump_window(radius, std::io::stdout().lock()),
            }
        }
        Command::Phi(PhiCmd::Scan {
            field,
            t,
            k,
            target_eps,
        }) => {
            let cfg = ScanConfig {
                target_eps,
                ..ScanConfig::default()
            };
            let scan = top_k_scan(&field.field()?, t, k, &cfg)?;
            let args = serde_json::json!({ "field": field, "t": t, "k": k, "target_eps": target_eps });
            emit(&out, "phi scan", &args, "scan.json", &scan.to_json())
        }
        Command::Solve(a) => solve(&out, a),
        Command::Fk(a) => {
            let strategy = match a.strategy {
                StrategyKind::Direct => Strategy::Direct,
                StrategyKind::SitAt => {
                    if a.z.len() != a.field.d {
                        return Err(Error::Config(format!("z: need {} coordinates", a.field.d)));
                    }
                    Strategy::SitAt {
                        z: Site::new(a.z.clone()),
                        rho: a.rho,
                    }
                }
            };
            let cfg = FkConfig {
                seed: a.mc_seed,
                max_rel_stderr: a.max_rel_stderr,
                ..FkConfig::default()
            };
            let est = solver::fk_estimate(&a.field.field()?, a.t, a.samples, &strategy, &cfg)?;
            emit(&out, "fk", &a, "fk.json", &serde_json::to_value(est)?)
        }
        Command::Spectral(SpectralCmd::Check { field, radius, tol }) => {
            let f = field.field()?;
            let set = FiniteSet::ball(&Site::origin(field.d), radius);
            let res = spectral::principal_eigenpair(&f, &set, &SpectralConfig { tol, ..SpectralConfig::default() })?;
            let mut doc = res.to_json();
            doc["certificate"] = match spectral::decay_certificate(&res) {
                Ok(c) => serde_json::to_value(c)?,
                Err(e) => serde_json::Value::String(e.to_string()),
            };
            let args = serde_json::json!({ "field": field, "radius": radius, "tol": tol });
            emit(&out, "spectral check", &args, "spectral.json", &doc)
        }
        Command::Experiment(cmd) => experiment(&out, cli.workers, cmd),
        Command::Densities(DensitiesCmd::Eval { law, d, alpha, x, x2 }) => {
            let l = LimitLaw::new(d, alpha)?;
            let scalar = || -> Result<f64> {
                match x.as_slice() {
                    [v] => Ok(*v),
                    _ => Err(Error::Config("x: need a single value".into())),
                }
            };
            let v = match law {
                LawKind::Y => l.y_cdf(scalar()?)?,
                LawKind::Radial => l.radial_cdf(scalar()?),
                LawKind::X1 => l.x1_density(&x)?,
                LawKind::Joint => l.joint_density(&x, &x2)?,
            };
            println!("{v}");
            Ok(())
        }
    }
}

fn solve(out: &Option<PathBuf>, a: SolveArgs) -> Result<()> {
    let f = a.field.field()?;
    let bundle = ScalingBundle::new(a.field.d, a.field.alpha)?;
    let scan = top_k_scan(&f, a.t, 2, &ScanConfig::default())?;
    let radius = solver::radius_for_scans(
        std::slice::from_ref(&scan),
        a.radius.unwrap_or_else(|| solver::default_box_radius(&bundle, a.t)),
    );
    let cfg = SolverConfig {
        tol: a.tol,
        ..SolverConfig::default()
    };
    let state = solver::evolve(&f, SolverState::new(a.field.d, radius)?, a.t, &cfg)?;
    let rep = solver::localization_report(&state, &scan)?;
    let doc = serde_json::json!({
        "t": a.t,
        "log_u": rep.log_u,
        "r1": rep.r1,
        "r2": rep.r2,
        "z1": scan.site(0),
        "z2": scan.site(1),
        "argmax": rep.argmax_site,
        "argmax_in_top2": rep.argmax_in_top2,
        "boundary_frac": rep.boundary_mass_fraction,
        "box_radius": state.radius(),
        "steps": state.accepted_steps(),
        "error_estimate": state.error_estimate(),
    });
    match out {
        Some(dir) => {
            let mut files = vec![("report.json", serde_json::to_vec_pretty(&doc)?)];
            if a.snapshot {
                let mut snap = Vec::new();
                state.write_snapshot(&mut snap)?;
                files.push(("snapshot.csv", snap));
            }
            write_with_manifest(dir, "solve", &a, files)
        }
        None => {
            println!("{}", serde_json::to_string_pretty(&doc)?);
            Ok(())
        }
    }
}

fn resolve_config(args: &ExperimentArgs, out: &Option<PathBuf>, workers: Option<usize>) -> Result<ExperimentConfig> {
    let mut table = match (&args.config, &args.manifest) {
        (Some(p), _) => std::fs::read_to_string(p)?
            .parse::<toml::Table>()
            .map_err(|e| Error::Config(e.to_string()))?,
        (None, Some(p)) => Manifest::read(p)?.experiment_config()?.to_table(),
        (None, None) => toml::Table::new(),
    };
    let mut set = |k: &str, v: toml::Value| {
        table.insert(k.to_string(), v);
    };
    if let Some(d) = args.d {
        set("d", toml::Value::Integer(d as i64));
    }
    if let Some(a) = args.alpha {
        set("alpha", toml::Value::Float(a));
    }
    if let Some(s) = &args.seeds {
        set("seeds", toml::Value::Array(s.iter().map(|&x| toml::Value::Integer(x as i64)).collect()));
        table.remove("seed_count");
    }
    if let Some(n) = args.seed_count {
        table.insert("seed_count".into(), toml::Value::Integer(n as i64));
        table.remove("seeds");
    }
    if let Some(ts) = &args.t_grid {
        table.insert("t_grid".into(), toml::Value::Array(ts.iter().map(|&t| toml::Value::Float(t)).collect()));
    }
    if let Some(w) = workers {
        table.insert("workers".into(), toml::Value::Integer(w as i64));
    }
    for kv in &args.overrides {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("--set {kv}: expected KEY=VALUE")))?;
        let doc: toml::Table = format!("v = {v}")
            .parse()
            .or_else(|_| format!("v = \"{v}\"").parse())
            .map_err(|e: toml::de::Error| Error::Config(format!("--set {kv}: {e}")))?;
        table.insert(k.trim().to_string(), doc["v"].clone());
    }
    if let Some(dir) = out {
        table.insert("out".into(), toml::Value::String(dir.display().to_string()));
    }
    ExperimentConfig::from_table(table)
}

fn experiment(out: &Option<PathBuf>, workers: Option<usize>, cmd: ExperimentCmd) -> Result<()> {
    let (kind, args) = match &cmd {
        ExperimentCmd::LimitLaw(a) => ("limit-law", a),
        ExperimentCmd::Localization(a) => ("localization", a),
        ExperimentCmd::TwoCities(a) => ("two-cities", a),
    };
    let cfg = resolve_config(args, out, workers)?;
    let dir = PathBuf::from(cfg.out.clone().unwrap_or_else(|| format!("out/{kind}")));
    let dir: &Path = &dir;
    let summary = match cmd {
        ExperimentCmd::LimitLaw(_) => {
            let run = experiments::limit_law_experiment(&cfg)?;
            run.write(dir, &cfg)?;
            serde_json::to_value(&run.summary)?
        }
        ExperimentCmd::Localization(_) => {
            let ens = experiments::localization_experiment(&cfg)?;
            ens.write_localization(dir, &cfg)?;
            serde_json::to_value(ens.localization_summary())?
        }
        ExperimentCmd::TwoCities(_) => {
            let ens = experiments::two_cities_experiment(&cfg)?;
            ens.write_two_cities(dir, &cfg)?;
            serde_json::to_value(ens.two_cities_summary())?
        }
    };
    println!("{}", serde_json::to_string_pretty(&summary)?);
    eprintln!("wrote {}", dir.display());
    Ok(())
}
