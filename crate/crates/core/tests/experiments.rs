use pamlab::config::ExperimentConfig;
use pamlab::experiments::*;
use std::fs;
use std::path::Path;

fn cfg(text: &str) -> ExperimentConfig {
    ExperimentConfig::from_toml_str(text).unwrap()
}

fn header(path: &Path) -> String {
    fs::read_to_string(path).unwrap().lines().next().unwrap().to_string()
}

const LIMIT: &str = "d = 1\nalpha = 4.0\nseed_count = 24\nt_grid = [100.0, 1000.0]\n";
const SOLVE: &str = "d = 1\nalpha = 2.0\nseeds = [1, 2]\nt_grid = [5.0, 10.0]\n";

#[test]
fn limit_law_outputs_have_the_documented_schema() {
    let dir = tempfile::tempdir().unwrap();
    let c = cfg(LIMIT);
    limit_law_experiment(&c).unwrap().write(dir.path(), &c).unwrap();
    assert_eq!(
        header(&dir.path().join(RECORDS)),
        "seed,t,z1_scaled_1,z2_scaled_1,phi1_scaled,phi2_scaled,miss_bound"
    );
    let summary: serde_json::Value = serde_json::from_slice(&fs::read(dir.path().join(SUMMARY)).unwrap()).unwrap();
    for key in ["d", "alpha", "q", "theta", "x1_total_mass", "per_t", "failures"] {
        assert!(summary.get(key).is_some(), "{key}");
    }
    let per_t = summary["per_t"].as_array().unwrap();
    assert_eq!(per_t.len(), 2);
    for key in ["t", "n", "r_t", "a_t", "ks_phi", "ks_radius"] {
        assert!(per_t[0].get(key).is_some(), "{key}");
    }
    let parsed: LimitLawSummary = serde_json::from_value(summary).unwrap();
    assert_eq!(parsed.per_t[0].n, 24);
    let rows = csv::Reader::from_path(dir.path().join(RECORDS)).unwrap().records().count();
    assert_eq!(rows, 48);
}

#[test]
fn worker_count_does_not_change_results() {
    let one = cfg(&format!("{LIMIT}workers = 1\n"));
    let two = cfg(&format!("{LIMIT}workers = 2\n"));
    let (a, b) = (limit_law_experiment(&one).unwrap(), limit_law_experiment(&two).unwrap());
    assert_eq!(a.records_csv().unwrap(), b.records_csv().unwrap());
    assert_eq!(a.summary, b.summary);
}

#[test]
fn manifest_reruns_reproduce_the_artifacts() {
    let (d1, d2) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let c = cfg(LIMIT);
    limit_law_experiment(&c).unwrap().write(d1.path(), &c).unwrap();
    let manifest = Manifest::read(&d1.path().join(MANIFEST)).unwrap();
    assert_eq!(manifest.command, "experiment limit-law");
    let again = manifest.experiment_config().unwrap();
    assert_eq!(again, c);
    limit_law_experiment(&again).unwrap().write(d2.path(), &again).unwrap();
    for name in [RECORDS, SUMMARY] {
        let a = fs::read(d1.path().join(name)).unwrap();
        let b = fs::read(d2.path().join(name)).unwrap();
        assert_eq!(a, b, "{name}");
        assert_eq!(manifest.artifacts[name], sha256_hex(&a));
    }
}

#[test]
fn localization_and_two_cities_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let c = cfg(SOLVE);
    let ens = solver_ensemble(&c).unwrap();
    assert!(ens.failures.is_empty());
    ens.write_localization(&dir.path().join("loc"), &c).unwrap();
    ens.write_two_cities(&dir.path().join("tc"), &c).unwrap();
    assert_eq!(
        header(&dir.path().join("loc").join(RECORDS)),
        "seed,t,logU,r1,r2,argmax_in_top2,gap13_ratio,gap12_ratio,boundary_frac,phi1,sandwich"
    );
    assert_eq!(header(&dir.path().join("tc").join(RECORDS)), "seed,t,z1_1,z2_1,argmax_1,r1,r2,logU");
    assert_eq!(
        header(&dir.path().join("tc").join(TRANSITIONS)),
        "seed,t_before,t_after,old_1,new_1,split_before,split_after,r1_before,r1_after,\
         r2_before,r2_after,log_w2_before,log_w2_after,shares_mass"
    );
    // every numeric cell reads back as a float
    let mut rdr = csv::Reader::from_path(dir.path().join("tc").join(RECORDS)).unwrap();
    for row in rdr.records() {
        assert!(row.unwrap().iter().all(|c| c.parse::<f64>().is_ok()));
    }

    let recs = ens.records();
    assert_eq!(recs.len(), 4);
    // sorted by (t, seed)
    let keys: Vec<(f64, u64)> = recs.iter().map(|r| (r.t, r.seed)).collect();
    assert_eq!(keys, vec![(5.0, 1), (5.0, 2), (10.0, 1), (10.0, 2)]);
    let (lo, hi) = sandwich_bracket(1);
    for r in recs {
        assert!(r.r1 <= r.r2 && r.r2 <= 1.0 + 1e-12);
        assert!(r.sandwich >= lo && r.sandwich <= hi, "{r:?}");
    }
    let summary: serde_json::Value =
        serde_json::from_slice(&fs::read(dir.path().join("loc").join(SUMMARY)).unwrap()).unwrap();
    assert!(summary.get("per_t").is_some());
}

#[test]
fn config_errors_name_the_field() {
    let err = ExperimentConfig::from_toml_str("d = 1\nalpha = 0.5\nseeds = [1]\nt_grid = [10.0]\n").unwrap_err();
    assert!(err.to_string().contains("alpha"), "{err}");
    let err = ExperimentConfig::from_toml_str("d = 1\nalpha = 3.0\nseeds = [1]\nt_grid = [10.0]\nbogus = 1\n").unwrap_err();
    assert!(err.to_string().contains("bogus"), "{err}");
    let err = ExperimentConfig::from_toml_str("d = 1\nalpha = 3.0\nseeds = [1]\nt_grid = [10.0, 5.0]\n").unwrap_err();
    assert!(err.to_string().contains("t_grid"), "{err}");
}
