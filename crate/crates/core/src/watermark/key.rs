use std::fmt;
use std::path::Path;

use crate::error::{Error, Result};

pub const MIN_KEY_LEN: usize = 16;

const FNV_OFFSET_BASIS: u64 = 14695981039346656037;
const FNV_PRIME: u64 = 1099511628211;
const PART_SEPARATOR: u8 = 0x1F;

/// Secret parameter of the keyed hash.
///
/// Deliberately has no `Serialize` impl, and `Debug` never prints the bytes.
#[derive(Clone, PartialEq, Eq)]
pub struct WatermarkKey {
    secret: Vec<u8>,
}

impl WatermarkKey {
    pub fn new(secret: impl Into<Vec<u8>>) -> Result<Self> {
        let secret = secret.into();
        if secret.len() < MIN_KEY_LEN {
            return Err(Error::InvalidKey(format!(
                "key must be at least {MIN_KEY_LEN} bytes, got {}",
                secret.len()
            )));
        }
        Ok(WatermarkKey { secret })
    }

    pub fn from_hex(hex_str: &str) -> Result<Self> {
        let bytes = hex::decode(hex_str.trim())
            .map_err(|e| Error::InvalidKey(format!("not valid hex: {e}")))?;
        Self::new(bytes)
    }

    /// Reads a hex-encoded key from the named environment variable.
    pub fn from_env(var: &str) -> Result<Self> {
        let value = std::env::var(var)
            .map_err(|_| Error::InvalidKey(format!("environment variable {var} is not set")))?;
        Self::from_hex(&value)
    }

    /// Reads a hex-encoded key from a file (surrounding whitespace ignored).
    pub fn from_file(path: &Path) -> Result<Self> {
        let value = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_hex(&value)
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.secret
    }
}

impl fmt::Debug for WatermarkKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "WatermarkKey(<{} bytes redacted>)", self.secret.len())
    }
}

struct Fnv1a(u64);

impl Fnv1a {
    fn new() -> Self {
        Fnv1a(FNV_OFFSET_BASIS)
    }

    fn write(&mut self, bytes: &[u8]) {
        for &b in bytes {
            self.0 ^= u64::from(b);
            self.0 = self.0.wrapping_mul(FNV_PRIME);
        }
    }
}

/// FNV-1a 64 over `key`, then `0x1F` + lowercased UTF-8 bytes for each part.
pub fn keyed_hash64<S: AsRef<str>>(key: &WatermarkKey, parts: &[S]) -> u64 {
    let mut h = Fnv1a::new();
    h.write(&key.secret);
    for part in parts {
        h.write(&[PART_SEPARATOR]);
        h.write(part.as_ref().to_lowercase().as_bytes());
    }
    h.0
}
