use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

/// The simulator's only source of randomness: ChaCha8 seeded from a `u64`,
/// with bounded draws by rejection sampling on full 64-bit outputs so the
/// sequence is identical on every platform.
#[derive(Debug, Clone)]
pub struct DrawSource {
    rng: ChaCha8Rng,
}

impl DrawSource {
    pub fn new(seed: u64) -> Self {
        DrawSource { rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    /// Uniform integer in `[0, bound)`. `bound` must be positive.
    pub fn below(&mut self, bound: u64) -> u64 {
        assert!(bound > 0, "empty range");
        // Values below `threshold` would bias the modulo.
        let threshold = bound.wrapping_neg() % bound;
        loop {
            let x = self.rng.next_u64();
            if x >= threshold {
                return x % bound;
            }
        }
    }

    /// Uniform integer in `[0, max]`.
    pub fn up_to(&mut self, max: u64) -> u64 {
        match max.checked_add(1) {
            Some(bound) => self.below(bound),
            None => self.rng.next_u64(),
        }
    }
}
