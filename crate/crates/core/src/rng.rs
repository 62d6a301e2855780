//! Counter-based random streams.
//!
//! Every sampler in the crate takes its randomness from an explicitly passed
//! stream. A stream is ChaCha8 keyed by a 64-bit master seed with the 64-bit
//! ChaCha stream id set to the sample index, so stream `i` is a pure function
//! of `(master, i)` and streams never share keystream blocks. Parallel workers
//! can therefore draw sample `i` in any order and still reproduce a serial run.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The generator used for every stream.
pub type StreamRng = ChaCha8Rng;

/// Stream `index` of the family keyed by `master`.
pub fn stream(master: u64, index: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(index);
    rng
}

/// Derive an independent master key for a named sub-experiment.
///
/// Used to separate stream families (e.g. one per `k` or per `eps`) without
/// coordinating index ranges.
pub fn derive_master(master: u64, tag: u64) -> u64 {
    splitmix64(master ^ splitmix64(tag.wrapping_add(0x9e37_79b9_7f4a_7c15)))
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Uniform draw on `(0, 1]`, safe to pass to `ln`.
#[inline]
pub fn open_unit<R: rand::Rng + ?Sized>(rng: &mut R) -> f64 {
    1.0 - rng.random::<f64>()
}
