//! Hierarchical, index-addressed random streams.
//!
//! A [`Stream`] is a 128-bit key derived from a root seed and a path of
//! indices. Children are pure functions of the parent key and an index, so
//! any replicate's generator can be rebuilt without touching the others.
//! This is what makes parallel runs bit-identical to serial ones.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Stream {
    key: [u64; 2],
}

impl Stream {
    pub fn root(seed: u64) -> Self {
        Self {
            key: [
                mix(seed ^ GOLDEN),
                mix(seed.wrapping_add(0x6A09_E667_F3BC_C908)),
            ],
        }
    }

    pub fn child(&self, index: u64) -> Self {
        let i = mix(index
            .wrapping_mul(GOLDEN)
            .wrapping_add(0x3C6E_F372_FE94_F82B));
        Self {
            key: [
                mix(self.key[0] ^ i),
                mix(self.key[1].wrapping_add(i.rotate_left(29)) ^ 0xA54F_F53A_5F1D_36F1),
            ],
        }
    }

    /// Child keyed by a label (FNV-1a hash of the bytes).
    pub fn child_labeled(&self, label: &str) -> Self {
        let mut h: u64 = 0xCBF2_9CE4_8422_2325;
        for b in label.bytes() {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x0000_0100_0000_01B3);
        }
        self.child(h)
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut seed = [0u8; 32];
        let words = [
            mix(self.key[0]),
            mix(self.key[1]),
            mix(self.key[0] ^ self.key[1].rotate_left(17)),
            mix(self.key[1].wrapping_add(self.key[0]) ^ GOLDEN),
        ];
        for (chunk, w) in seed.chunks_exact_mut(8).zip(words) {
            chunk.copy_from_slice(&w.to_le_bytes());
        }
        ChaCha8Rng::from_seed(seed)
    }
}
