//! JSON report envelope shared by the command line and the acceptance suite.

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::rng::RNG_ALGORITHM;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Hex SHA-256 of the compact JSON encoding of `config`.
pub fn config_hash(config: &impl Serialize) -> Result<String> {
    let bytes = serde_json::to_vec(config).map_err(|e| Error::Config(e.to_string()))?;
    Ok(Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect())
}

#[derive(Serialize)]
pub struct Report<'a, C: Serialize, R: Serialize> {
    pub kind: &'a str,
    pub version: &'a str,
    pub rng: &'a str,
    pub config_hash: String,
    pub config: &'a C,
    pub result: &'a R,
}

/// Pretty JSON of `{kind, version, rng, config_hash, config, result}`.
pub fn render(kind: &str, config: &impl Serialize, result: &impl Serialize) -> Result<String> {
    let report = Report { kind, version: VERSION, rng: RNG_ALGORITHM, config_hash: config_hash(config)?, config, result };
    serde_json::to_string_pretty(&report).map_err(|e| Error::Config(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_is_stable_and_sensitive() {
        let a = config_hash(&serde_json::json!({"seed": 1})).unwrap();
        assert_eq!(a, config_hash(&serde_json::json!({"seed": 1})).unwrap());
        assert_ne!(a, config_hash(&serde_json::json!({"seed": 2})).unwrap());
        assert_eq!(a.len(), 64);
        let r = render("dist", &1, &2.5).unwrap();
        assert!(r.contains("\"rng\"") && r.contains(VERSION));
    }
}
