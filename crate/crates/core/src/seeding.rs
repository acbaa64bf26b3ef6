//! Deterministic RNG streams derived from one master seed.
//!
//! Every source of randomness in a run is a separate ChaCha stream of the
//! same master seed, so sensor i draws the same perturbation sequence no
//! matter how many sensors take part, and a run is reproducible bit-for-bit
//! from the master seed alone.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream carrying the initial received-phase offsets.
pub const STREAM_INIT_PHASES: u64 = 0;
/// Stream carrying the per-sensor drift-rate signs.
pub const STREAM_DRIFT: u64 = 1;
/// First perturbation stream; sensor i uses `STREAM_SENSOR_BASE + i`.
pub const STREAM_SENSOR_BASE: u64 = 2;

/// A ChaCha stream `stream_id` of the master seed.
pub fn stream(master_seed: u64, stream_id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(stream_id);
    rng
}

/// The perturbation stream owned by one sensor.
pub fn sensor_stream(master_seed: u64, sensor: usize) -> ChaCha8Rng {
    stream(master_seed, STREAM_SENSOR_BASE + sensor as u64)
}
