//! Counter-based random streams.
//!
//! Every stream is a ChaCha8 generator whose 256-bit key is expanded from
//! `(master seed, purpose)` with SplitMix64 and whose 64-bit stream id is the
//! job index (disorder realization, chain, multi-start, …). Streams therefore
//! do not depend on how many other streams were created or in which order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use rand_chacha::ChaCha8Rng as StreamRng;

/// What a stream is used for; distinct purposes never share a key.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Purpose {
    Disorder = 1,
    Chain = 2,
    Init = 3,
    Checkerboard = 4,
}

pub fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn stream(master: u64, purpose: Purpose, index: u64) -> ChaCha8Rng {
    let mut state = master ^ (purpose as u64).wrapping_mul(0xD1B5_4A32_D192_ED03);
    let mut seed = [0u8; 32];
    for chunk in seed.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    let mut rng = ChaCha8Rng::from_seed(seed);
    rng.set_stream(index);
    rng
}

/// Stream index of chain `chain` inside disorder realization `realization`.
pub fn chain_index(realization: u64, chain: u64) -> u64 {
    (realization << 20) | (chain & 0xF_FFFF)
}

/// Uniform in `(0, 1]`.
pub(crate) fn open_unit(bits: u64) -> f64 {
    ((bits >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Uniform in `[0, 1)`.
pub(crate) fn half_open_unit(bits: u64) -> f64 {
    (bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Box–Muller pair from two 64-bit words.
pub(crate) fn box_muller(a: u64, b: u64) -> (f64, f64) {
    let r = (-2.0 * open_unit(a).ln()).sqrt();
    let t = std::f64::consts::TAU * half_open_unit(b);
    (r * t.cos(), r * t.sin())
}
