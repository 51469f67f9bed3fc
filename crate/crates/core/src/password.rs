//! Salted PBKDF2-SHA256 password digests.
//!
//! Stored form: `pbkdf2-sha256$<rounds>$<salt hex>$<digest hex>`.

use pbkdf2::pbkdf2_hmac;
use rand::RngCore;
use sha2::Sha256;

pub const DEFAULT_ROUNDS: u32 = 10_000;
const PREFIX: &str = "pbkdf2-sha256";

pub fn hash(password: &str) -> String {
    hash_with_rounds(password, DEFAULT_ROUNDS)
}

pub fn hash_with_rounds(password: &str, rounds: u32) -> String {
    let mut salt = [0u8; 16];
    rand::thread_rng().fill_bytes(&mut salt);
    format!(
        "{PREFIX}${rounds}${}${}",
        hex::encode(salt),
        hex::encode(derive(password, &salt, rounds))
    )
}

fn derive(password: &str, salt: &[u8], rounds: u32) -> [u8; 32] {
    let mut out = [0u8; 32];
    pbkdf2_hmac::<Sha256>(password.as_bytes(), salt, rounds, &mut out);
    out
}

/// Malformed digests never verify.
pub fn verify(password: &str, digest: &str) -> bool {
    let parts: Vec<&str> = digest.split('$').collect();
    let [PREFIX, rounds, salt, expected] = parts.as_slice() else {
        return false;
    };
    let (Ok(rounds), Ok(salt), Ok(expected)) =
        (rounds.parse::<u32>(), hex::decode(salt), hex::decode(expected))
    else {
        return false;
    };
    if rounds == 0 || expected.len() != 32 {
        return false;
    }
    let got = derive(password, &salt, rounds);
    // constant-time compare
    got.iter()
        .zip(&expected)
        .fold(0u8, |acc, (a, b)| acc | (a ^ b))
        == 0
}

/// SHA-256 hex of an opaque token, for storing reset tokens.
pub(crate) fn token_fingerprint(token: &str) -> String {
    use sha2::Digest;
    hex::encode(Sha256::digest(token.as_bytes()))
}

/// 128-bit random token, hex encoded.
pub(crate) fn random_token() -> String {
    let mut b = [0u8; 16];
    rand::thread_rng().fill_bytes(&mut b);
    hex::encode(b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let d = hash_with_rounds("wemooki", 50);
        assert!(verify("wemooki", &d));
        assert!(!verify("wemook", &d));
        assert_ne!(d, hash_with_rounds("wemooki", 50), "salted");
    }

    #[test]
    fn garbage_never_verifies() {
        assert!(!verify("x", "x"));
        assert!(!verify("x", "pbkdf2-sha256$0$00$00"));
        assert!(!verify("x", "md5$1$00$00"));
    }

    #[test]
    fn tokens_are_128_bit() {
        let t = random_token();
        assert_eq!(t.len(), 32);
        assert_ne!(t, random_token());
    }
}
