//! Small internal helpers shared across modules.

use std::hash::{BuildHasher, Hasher};

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// FNV-1a, 64-bit. Used both as the deterministic shuffle hash and as the
/// hasher for hot-path hash maps (we never hash untrusted keys, so the lack
/// of DoS resistance is fine and the speed win on short keys is real).
pub(crate) fn fnv1a(seed: u64, bytes: &[u8]) -> u64 {
    let mut h = seed;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

pub(crate) struct FnvHasher(u64);

impl Hasher for FnvHasher {
    fn write(&mut self, bytes: &[u8]) {
        self.0 = fnv1a(self.0, bytes);
    }

    fn finish(&self) -> u64 {
        self.0
    }
}

#[derive(Clone, Copy, Default)]
pub(crate) struct BuildFnv;

impl BuildHasher for BuildFnv {
    type Hasher = FnvHasher;

    fn build_hasher(&self) -> FnvHasher {
        FnvHasher(FNV_OFFSET)
    }
}

pub(crate) type FnvHashMap<K, V> = std::collections::HashMap<K, V, BuildFnv>;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fnv_matches_reference_vectors() {
        // Published FNV-1a test vectors (offset-basis seed).
        assert_eq!(fnv1a(FNV_OFFSET, b""), 0xcbf2_9ce4_8422_2325);
        assert_eq!(fnv1a(FNV_OFFSET, b"a"), 0xaf63_dc4c_8601_ec8c);
        assert_eq!(fnv1a(FNV_OFFSET, b"foobar"), 0x85944171f73967e8);
    }

    #[test]
    fn hashmap_with_fnv_behaves() {
        let mut m: FnvHashMap<Vec<u8>, u32> = FnvHashMap::default();
        m.insert(vec![1, 2, 3], 7);
        assert_eq!(m.get([1u8, 2, 3].as_slice()), Some(&7));
    }
}
