//! Symbol hashing. SHA-256 over the raw chunk bytes, no coordinates mixed in.

use sha2::{Digest as _, Sha256};

/// Hash output size `y` in bytes.
pub const HASH_BYTES: usize = 32;

pub type Digest = [u8; HASH_BYTES];

pub fn hash_symbol(bytes: &[u8]) -> Digest {
    Sha256::digest(bytes).into()
}

/// SHA-256 over the concatenation of `parts`.
pub fn hash_concat<'a>(parts: impl IntoIterator<Item = &'a [u8]>) -> Digest {
    let mut hasher = Sha256::new();
    for p in parts {
        hasher.update(p);
    }
    hasher.finalize().into()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_input_vector() {
        let expected = [
            0xe3, 0xb0, 0xc4, 0x42, 0x98, 0xfc, 0x1c, 0x14, 0x9a, 0xfb, 0xf4, 0xc8, 0x99, 0x6f, 0xb9, 0x24, 0x27, 0xae,
            0x41, 0xe4, 0x64, 0x9b, 0x93, 0x4c, 0xa4, 0x95, 0x99, 0x1b, 0x78, 0x52, 0xb8, 0x55,
        ];
        assert_eq!(hash_symbol(&[]), expected);
    }

    #[test]
    fn equal_and_distinct_inputs() {
        assert_eq!(hash_symbol(b"abc"), hash_symbol(b"abc"));
        let digests: std::collections::HashSet<_> = (0u16..512).map(|i| hash_symbol(&i.to_be_bytes())).collect();
        assert_eq!(digests.len(), 512);
        assert_eq!(hash_concat([&b"ab"[..], b"c"]), hash_symbol(b"abc"));
    }
}
