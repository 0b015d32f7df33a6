//! Short stable fingerprints for configs and checkpoints.

use serde::Serialize;
use sha2::{Digest, Sha256};

/// 12-hex-char SHA-256 prefix over the canonical JSON of `value`.
pub fn fingerprint<T: Serialize>(value: &T) -> String {
    let json = serde_json::to_string(value).unwrap_or_default();
    fingerprint_str(&json)
}

/// 12-hex-char SHA-256 prefix over raw text.
pub fn fingerprint_str(text: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(text.as_bytes());
    let digest = hasher.finalize();
    digest[..6].iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fingerprint_is_stable_and_input_sensitive() {
        assert_eq!(fingerprint_str("abc"), fingerprint_str("abc"));
        assert_ne!(fingerprint_str("abc"), fingerprint_str("abd"));
        assert_eq!(fingerprint_str("abc").len(), 12);
    }
}
