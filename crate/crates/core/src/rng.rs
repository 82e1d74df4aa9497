//! Counter-based random streams.
//!
//! Every random draw in a simulation is taken from a generator whose seed is
//! a hash of `(seed, replicate, particle label)`. Particle labels are hashes of
//! the genealogical path, so a particle draws the same offspring no matter
//! how the population around it was pruned, capped or scheduled.

use rand::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;

/// Generator handed to samplers.
pub type StreamRng = Xoshiro256PlusPlus;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A generator seeded directly from a 64-bit value, for standalone samplers.
pub fn seeded(seed: u64) -> StreamRng {
    StreamRng::seed_from_u64(mix64(seed ^ GOLDEN_GAMMA))
}

/// Hashed Ulam-Harris label of a particle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParticleId(pub u64);

impl ParticleId {
    pub const ROOT: ParticleId = ParticleId(0x0005_EED0_FA11_7EE5);

    #[inline]
    pub fn child(self, index: u64) -> ParticleId {
        ParticleId(mix64(
            self.0.rotate_left(17) ^ mix64(index.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA)),
        ))
    }
}

/// All randomness of one replicate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReplicateStream {
    seed: u64,
    replicate: u64,
    key: u64,
}

impl ReplicateStream {
    pub fn new(seed: u64, replicate: u64) -> Self {
        let key = mix64(seed ^ mix64(replicate.wrapping_add(GOLDEN_GAMMA)));
        Self {
            seed,
            replicate,
            key,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn replicate(&self) -> u64 {
        self.replicate
    }

    /// Generator owned by one particle (or one cohort of identical particles).
    #[inline]
    pub fn particle_rng(&self, particle: ParticleId) -> StreamRng {
        StreamRng::seed_from_u64(mix64(self.key ^ particle.0))
    }

    /// Generator for replicate-level draws that are not tied to a particle.
    pub fn auxiliary_rng(&self, tag: u64) -> StreamRng {
        StreamRng::seed_from_u64(mix64(self.key.rotate_left(29) ^ mix64(tag ^ GOLDEN_GAMMA)))
    }
}
