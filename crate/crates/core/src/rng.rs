//! Counter-based randomness: every lattice site gets its own uniform variate,
//! computed by hashing `(seed, coordinates)`. No state, so evaluation order
//! never matters and any worker can evaluate any site.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer.
#[inline(always)]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Maps 64 random bits to the open interval (0, 1) on a 2^-52 grid offset by
/// half a step, so both endpoints are excluded exactly.
#[inline(always)]
pub fn open_unit(bits: u64) -> f64 {
    ((bits >> 12) as f64 + 0.5) * (1.0 / (1u64 << 52) as f64)
}

/// Keyed hash from lattice coordinates to 64 random bits.
#[derive(Clone, Copy, Debug)]
pub struct SiteHasher {
    key: u64,
}

impl SiteHasher {
    pub fn new(seed: u64) -> Self {
        SiteHasher {
            key: mix64(seed ^ 0x5041_4D5F_4649_454C),
        }
    }

    #[inline(always)]
    pub fn bits(&self, coords: &[i64]) -> u64 {
        let mut h = self.key;
        for &c in coords {
            h = mix64(h.wrapping_add(GOLDEN) ^ c as u64);
        }
        mix64(h ^ coords.len() as u64)
    }

    #[inline(always)]
    pub fn uniform(&self, coords: &[i64]) -> f64 {
        open_unit(self.bits(coords))
    }
}

/// Independent stream for Monte Carlo batch `batch` of a run keyed by `seed`.
pub fn substream(seed: u64, batch: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(mix64(seed ^ 0x464B_5F53_5452_4D00));
    rng.set_stream(batch);
    rng
}
