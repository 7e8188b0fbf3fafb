//! Stable seed derivation.
//!
//! Seeds are derived with FNV-1a over the parts followed by a splitmix64
//! finalizer, so derived streams are identical across platforms and
//! compiler versions.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// FNV-1a over a byte slice, continuing from `state`.
pub fn fnv1a(state: u64, bytes: &[u8]) -> u64 {
    bytes.iter().fold(state, |h, &b| (h ^ u64::from(b)).wrapping_mul(FNV_PRIME))
}

/// FNV-1a of a byte slice from the standard offset basis.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    fnv1a(FNV_OFFSET, bytes)
}

/// splitmix64 finalizer.
pub fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Something that can be folded into a derived seed.
pub trait SeedPart {
    fn feed(&self, state: u64) -> u64;
}

impl SeedPart for str {
    fn feed(&self, state: u64) -> u64 {
        // length prefix keeps ("ab","c") and ("a","bc") apart
        let state = fnv1a(state, &(self.len() as u64).to_le_bytes());
        fnv1a(state, self.as_bytes())
    }
}

impl SeedPart for &str {
    fn feed(&self, state: u64) -> u64 {
        (**self).feed(state)
    }
}

impl SeedPart for String {
    fn feed(&self, state: u64) -> u64 {
        self.as_str().feed(state)
    }
}

impl SeedPart for u64 {
    fn feed(&self, state: u64) -> u64 {
        fnv1a(state, &self.to_le_bytes())
    }
}

impl SeedPart for u32 {
    fn feed(&self, state: u64) -> u64 {
        u64::from(*self).feed(state)
    }
}

impl SeedPart for usize {
    fn feed(&self, state: u64) -> u64 {
        (*self as u64).feed(state)
    }
}

/// Derives a child seed from a base seed and a sequence of parts.
pub fn derive(base: u64, parts: &[&dyn SeedPart]) -> u64 {
    let mut state = base.feed(FNV_OFFSET);
    for part in parts {
        state = part.feed(state);
    }
    mix(state)
}

/// Deterministic RNG for a seed.
pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
