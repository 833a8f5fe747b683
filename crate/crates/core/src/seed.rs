//! Deterministic RNG streams.
//!
//! A [`Seed`] is a 64-bit value. Child streams are derived with
//! [`Seed::derive`], which mixes the parent seed and a child index through
//! SplitMix64. Generators are ChaCha8 seeded from the 64-bit value. Both
//! choices are part of the reproducibility contract: changing either changes
//! every experiment output.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Seed(pub u64);

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl Seed {
    /// Child stream `index` of this seed.
    pub fn derive(self, index: u64) -> Seed {
        Seed(splitmix64(self.0 ^ splitmix64(index.wrapping_add(1))))
    }

    /// `self.derive(i).derive(j)`.
    pub fn derive2(self, i: u64, j: u64) -> Seed {
        self.derive(i).derive(j)
    }

    pub fn rng(self) -> Rng {
        ChaCha8Rng::seed_from_u64(self.0)
    }
}

impl From<u64> for Seed {
    fn from(v: u64) -> Self {
        Seed(v)
    }
}
