//! Canonical-serialization digests used to tie artifacts together.
//!
//! A digest is the SHA-256 of the compact JSON serialization of a value.
//! Struct fields serialize in declaration order, so the same value yields
//! the same digest on any platform.

use std::io::Read;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

/// Hex SHA-256 of the compact JSON form of `value`.
pub fn sha256_json<T: Serialize>(value: &T) -> String {
    let bytes = serde_json::to_vec(value).expect("value must serialize");
    sha256_bytes(&bytes)
}

/// Hex SHA-256 of a byte slice.
pub fn sha256_bytes(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    hex::encode(hasher.finalize())
}

/// Hex SHA-256 of a file's contents, streamed.
pub fn sha256_file(path: &Path) -> std::io::Result<String> {
    let mut file = std::fs::File::open(path)?;
    let mut hasher = Sha256::new();
    let mut buf = [0u8; 64 * 1024];
    loop {
        let n = file.read(&mut buf)?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex::encode(hasher.finalize()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digest_is_stable_for_equal_values() {
        #[derive(Serialize)]
        struct S {
            a: u32,
            b: String,
        }
        let x = S { a: 1, b: "x".into() };
        let y = S { a: 1, b: "x".into() };
        assert_eq!(sha256_json(&x), sha256_json(&y));
    }

    #[test]
    fn digest_differs_on_any_field_change() {
        #[derive(Serialize)]
        struct S {
            a: u32,
        }
        assert_ne!(sha256_json(&S { a: 1 }), sha256_json(&S { a: 2 }));
    }
}
