//! Deterministic, splittable randomness.
//!
//! Every source of randomness in a run is a ChaCha12 stream derived from a
//! single `u64` seed. Machine `i` draws from stream `i + 1` of the run seed
//! (stream 0 is reserved for signal construction), so the number of machines
//! can change without re-correlating the per-machine streams, and parallel
//! and serial execution see identical draws.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// RNG for machine `machine` (0-based) under `run_seed`.
pub fn machine_rng(run_seed: u64, machine: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(run_seed);
    rng.set_stream(machine + 1);
    rng
}

/// RNG for signal construction (random-sign draws) under a signal seed.
pub fn signal_rng(signal_seed: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(signal_seed);
    rng.set_stream(0);
    rng
}

/// Derive an independent run seed for one (cell, replicate) of a sweep.
///
/// Mixes the words through a fixed-key ChaCha instance so that nearby
/// indices do not produce correlated run seeds.
pub fn derive_seed(master: u64, cell: u64, replicate: u64) -> u64 {
    let mut key = [0u8; 32];
    key[0..8].copy_from_slice(&master.to_le_bytes());
    key[8..16].copy_from_slice(&cell.to_le_bytes());
    key[16..24].copy_from_slice(&replicate.to_le_bytes());
    key[24..32].copy_from_slice(&0x9e37_79b9_7f4a_7c15u64.to_le_bytes());
    let mut rng = ChaCha12Rng::from_seed(key);
    rand_chacha::rand_core::RngCore::next_u64(&mut rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn machine_streams_are_stable_and_distinct() {
        let a: f64 = machine_rng(7, 0).gen();
        let a2: f64 = machine_rng(7, 0).gen();
        let b: f64 = machine_rng(7, 1).gen();
        assert_eq!(a, a2);
        assert_ne!(a, b);
    }

    #[test]
    fn derived_seeds_differ_across_cells_and_reps() {
        let s = derive_seed(1, 0, 0);
        assert_ne!(s, derive_seed(1, 0, 1));
        assert_ne!(s, derive_seed(1, 1, 0));
        assert_eq!(s, derive_seed(1, 0, 0));
    }
}
