//! Seeded, splittable random streams.
//!
//! A [`StreamSeed`] is a node in a tree of seeds. Children are derived by
//! hashing the parent seed with a label, so the stream handed to replicate
//! `i` of grid point `g` depends only on `(master, g, i)` and never on the
//! order in which work is scheduled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamSeed(u64);

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl StreamSeed {
    pub fn new(master: u64) -> Self {
        StreamSeed(splitmix64(master))
    }

    pub fn child(self, label: u64) -> Self {
        StreamSeed(splitmix64(self.0 ^ splitmix64(label.wrapping_add(0x632b_e59b_d9b4_e019))))
    }

    /// Shorthand for a two-level derivation, e.g. `(grid point, replicate)`.
    pub fn child2(self, a: u64, b: u64) -> Self {
        self.child(a).child(b)
    }

    pub fn rng(self) -> StreamRng {
        ChaCha8Rng::seed_from_u64(self.0)
    }

    pub fn raw(self) -> u64 {
        self.0
    }
}

/// Uniform draw on the open interval (0, 1).
#[inline]
pub fn open_unit<R: rand::Rng + ?Sized>(rng: &mut R) -> f64 {
    loop {
        // 53 random mantissa bits, shifted off zero by half an ulp.
        let u = ((rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64);
        if u > 0.0 && u < 1.0 {
            return u;
        }
    }
}
