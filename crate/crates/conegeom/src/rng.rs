//! Reproducible random streams and the samplers used by the Monte Carlo
//! cross-checks.
//!
//! Every stochastic routine draws from a ChaCha12 stream keyed by
//! `(seed, experiment, stream)`, so runs are reproducible bit for bit and
//! independent streams can be handed to independent sub-experiments without
//! coordination.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Gamma};

/// Derive a ChaCha12 stream from `(seed, experiment, stream)`.
///
/// The experiment label is FNV-1a hashed and the three inputs are whitened
/// through splitmix64 into the 256-bit key; distinct labels or stream ids
/// give statistically independent streams under the same user seed.
pub fn stream(seed: u64, experiment: &str, stream_id: u64) -> ChaCha12Rng {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in experiment.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    let mut key = [0u8; 32];
    let mut state = seed ^ h.rotate_left(17) ^ stream_id.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    for chunk in key.chunks_exact_mut(8) {
        state = splitmix64(&mut state);
        chunk.copy_from_slice(&state.to_le_bytes());
    }
    ChaCha12Rng::from_seed(key)
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// One draw from the generalized Gaussian density proportional to
/// exp(-|t|^r): |T| = G^(1/r) with G ~ Gamma(1/r, 1), sign symmetric.
pub fn gen_gaussian<R: Rng>(rng: &mut R, r: f64) -> f64 {
    let gamma = Gamma::new(1.0 / r, 1.0).expect("shape 1/r > 0");
    let g: f64 = gamma.sample(rng);
    let mag = g.powf(1.0 / r);
    if rng.gen::<bool>() {
        mag
    } else {
        -mag
    }
}

/// Direction on the unit l_r sphere distributed by the cone measure of the
/// l_r ball: independent generalized Gaussians, normalized in l_r.
pub fn lp_cone_direction<R: Rng>(rng: &mut R, n: usize, r: f64, out: &mut [f64]) {
    loop {
        let mut norm_r = 0.0;
        for x in out[..n].iter_mut() {
            *x = gen_gaussian(rng, r);
            norm_r += x.abs().powf(r);
        }
        let norm = norm_r.powf(1.0 / r);
        if norm > 0.0 && norm.is_finite() {
            for x in out[..n].iter_mut() {
                *x /= norm;
            }
            return;
        }
    }
}

/// Uniform point in the l_r ball: cone direction scaled by U^(1/n).
pub fn lp_uniform_point<R: Rng>(rng: &mut R, n: usize, r: f64, out: &mut [f64]) {
    lp_cone_direction(rng, n, r, out);
    let t: f64 = rng.gen::<f64>().powf(1.0 / n as f64);
    for x in out[..n].iter_mut() {
        *x *= t;
    }
}
