//! Keyed random streams.
//!
//! Every random draw in the simulator comes from a stream derived from a
//! master seed and a key path (component tag, snapshot, entity ids). Two
//! streams with the same seed and key produce the same sequence no matter in
//! which order, or on which thread, they are created.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const TAG_GROUND_USERS: u64 = 0x01;
pub const TAG_SHADOW_GROUND: u64 = 0x02;
pub const TAG_SHADOW_AERIAL: u64 = 0x03;
pub const TAG_LOS_STATE: u64 = 0x04;
pub const TAG_FADING: u64 = 0x05;
pub const TAG_EGA: u64 = 0x06;
pub const TAG_PLANNING: u64 = 0x07;

/// Identifies one reproducible random stream.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RngStream {
    pub master_seed: u64,
    pub stream_key: Vec<u64>,
}

impl RngStream {
    pub fn new(master_seed: u64, stream_key: &[u64]) -> Self {
        Self {
            master_seed,
            stream_key: stream_key.to_vec(),
        }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        stream(self.master_seed, &self.stream_key)
    }
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Folds a key path into a 256-bit ChaCha seed.
pub fn derive_seed(master_seed: u64, key: &[u64]) -> [u8; 32] {
    let mut h = splitmix64(master_seed ^ 0x5EED_5EED_5EED_5EED);
    for (i, k) in key.iter().enumerate() {
        h = splitmix64(h ^ splitmix64(k.wrapping_add(i as u64 + 1)));
    }
    let mut seed = [0u8; 32];
    let mut s = h;
    for chunk in seed.chunks_exact_mut(8) {
        s = splitmix64(s);
        chunk.copy_from_slice(&s.to_le_bytes());
    }
    seed
}

pub fn stream(master_seed: u64, key: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::from_seed(derive_seed(master_seed, key))
}
