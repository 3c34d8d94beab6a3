//! Deterministic random streams.
//!
//! Every stream is a ChaCha20 generator (`rand_chacha::ChaCha20Rng`) keyed by a
//! 64-bit seed and positioned on a 64-bit stream id via `set_stream`. The seed
//! is expanded to the 256-bit key with the PCG32-based `seed_from_u64` defined
//! by `rand_core`, so a given `(seed, stream)` pair yields the same sequence on
//! every platform.
//!
//! Substreams are never derived by drawing from a parent stream, so the order
//! in which pipeline stages run cannot change what any other stage sees.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

/// Pipeline stages that own a private substream of a volume's seed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum Stage {
    Params = 0,
    B0Field = 1,
    KspaceNoise = 2,
    Undersampling = 3,
    Split = 4,
}

#[derive(Clone, Debug)]
pub struct SeededRng {
    seed: u64,
    stream: u64,
    inner: ChaCha20Rng,
}

impl SeededRng {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha20Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        Self {
            seed,
            stream,
            inner,
        }
    }

    /// Stream for `stage` of the case at `case_index`: the stage occupies the
    /// low 8 bits of the stream id, the case index the rest.
    pub fn for_case(seed: u64, case_index: u64, stage: Stage) -> Self {
        Self::new(seed, (case_index << 8) | stage as u64)
    }

    pub fn for_stage(seed: u64, stage: Stage) -> Self {
        Self::new(seed, stage as u64)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }
}

impl RngCore for SeededRng {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

/// SplitMix64 finalizer; used to derive independent 64-bit seeds from ids.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for the degradation stages of one case, derived from the global seed
/// and the case index without touching any stream.
pub fn case_seed(global_seed: u64, case_index: u64) -> u64 {
    mix64(global_seed ^ mix64(case_index))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_and_stream_reproduce() {
        let mut a = SeededRng::new(42, 7);
        let mut b = SeededRng::new(42, 7);
        for _ in 0..10_000 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn streams_differ() {
        let mut a = SeededRng::new(42, 0);
        let mut b = SeededRng::new(42, 1);
        let xa: Vec<u64> = (0..8).map(|_| a.next_u64()).collect();
        let xb: Vec<u64> = (0..8).map(|_| b.next_u64()).collect();
        assert_ne!(xa, xb);
    }

    #[test]
    fn golden_first_draw() {
        // Freezes the generator choice; a change here breaks dataset reproducibility.
        let mut r = SeededRng::new(0, 0);
        let first = r.next_u64();
        let mut again = SeededRng::new(0, 0);
        assert_eq!(first, again.next_u64());
        assert_eq!(first, GOLDEN_SEED0_STREAM0);
    }

    const GOLDEN_SEED0_STREAM0: u64 = 449_479_075_714_955_186;
}
