//! Server configuration: a TOML file, then `EARSHOT_*` environment overrides.

use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use earshot_core::ScoringPolicy;
use serde::{Deserialize, Serialize};

use crate::service::ServiceConfig;
use crate::session::Limits;
use crate::{ProtocolError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServerConfig {
    pub http_addr: SocketAddr,
    pub device_addr: SocketAddr,
    pub store_path: PathBuf,
    /// Directory of browser assets served under `/`.
    pub static_dir: Option<PathBuf>,
    pub retry_limit: u32,
    pub code_attempts: u32,
    pub throttle_logins: usize,
    pub throttle_window_ms: i64,
    pub session_ttl_ms: i64,
    pub freshness_ms: i64,
    pub record_ms: u32,
    pub policy: Option<ScoringPolicy>,
}

impl Default for ServerConfig {
    fn default() -> Self {
        let limits = Limits::default();
        let svc = ServiceConfig::default();
        Self {
            http_addr: ([127, 0, 0, 1], 8080).into(),
            device_addr: ([127, 0, 0, 1], 8081).into(),
            store_path: PathBuf::from("earshot-store.jsonl"),
            static_dir: None,
            retry_limit: limits.retry_limit,
            code_attempts: limits.code_attempts,
            throttle_logins: limits.throttle_logins,
            throttle_window_ms: limits.throttle_window_ms,
            session_ttl_ms: limits.session_ttl_ms,
            freshness_ms: svc.freshness_ms,
            record_ms: svc.record_ms,
            policy: None,
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, v: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    v.parse()
        .map_err(|e| ProtocolError::Malformed(format!("{key}={v}: {e}")))
}

impl ServerConfig {
    /// Reads `path` if given, then applies the process environment.
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let mut cfg = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)?;
                Self::from_toml(&text)?
            }
            None => Self::default(),
        };
        cfg.apply_env(|k| std::env::var(k).ok())?;
        Ok(cfg)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| ProtocolError::Malformed(format!("config: {e}")))
    }

    /// Overrides fields from `EARSHOT_<FIELD>` variables looked up via `var`.
    pub fn apply_env(&mut self, var: impl Fn(&str) -> Option<String>) -> Result<()> {
        macro_rules! env {
            ($key:literal, $field:expr) => {
                if let Some(v) = var($key) {
                    $field = parse($key, &v)?;
                }
            };
        }
        env!("EARSHOT_HTTP_ADDR", self.http_addr);
        env!("EARSHOT_DEVICE_ADDR", self.device_addr);
        env!("EARSHOT_STORE_PATH", self.store_path);
        if let Some(v) = var("EARSHOT_STATIC_DIR") {
            self.static_dir = (!v.is_empty()).then(|| PathBuf::from(v));
        }
        env!("EARSHOT_RETRY_LIMIT", self.retry_limit);
        env!("EARSHOT_CODE_ATTEMPTS", self.code_attempts);
        env!("EARSHOT_THROTTLE_LOGINS", self.throttle_logins);
        env!("EARSHOT_THROTTLE_WINDOW_MS", self.throttle_window_ms);
        env!("EARSHOT_SESSION_TTL_MS", self.session_ttl_ms);
        env!("EARSHOT_FRESHNESS_MS", self.freshness_ms);
        env!("EARSHOT_RECORD_MS", self.record_ms);
        if let Some(v) = var("EARSHOT_POLICY") {
            let text = std::fs::read_to_string(&v)?;
            self.policy = Some(
                toml::from_str(&text)
                    .map_err(|e| ProtocolError::Malformed(format!("policy {v}: {e}")))?,
            );
        }
        Ok(())
    }

    pub fn service(&self) -> ServiceConfig {
        ServiceConfig {
            limits: Limits {
                retry_limit: self.retry_limit,
                code_attempts: self.code_attempts,
                throttle_logins: self.throttle_logins,
                throttle_window_ms: self.throttle_window_ms,
                session_ttl_ms: self.session_ttl_ms,
            },
            freshness_ms: self.freshness_ms,
            record_ms: self.record_ms,
            policy: self.policy,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashMap;

    #[test]
    fn defaults_match_service() {
        let cfg = ServerConfig::default();
        assert_eq!(cfg.service(), ServiceConfig::default());
    }

    #[test]
    fn toml_with_policy() {
        let cfg = ServerConfig::from_toml(
            r#"
            http_addr = "0.0.0.0:9000"
            retry_limit = 2

            [policy]
            tau_c = 0.2
            tau_db = 40.0
            ell_max_ms = 150.0
            band_low_hz = 50.0
            band_high_hz = 1000.0
            "#,
        )
        .unwrap();
        assert_eq!(cfg.http_addr.port(), 9000);
        assert_eq!(cfg.service().limits.retry_limit, 2);
        assert_eq!(cfg.policy.unwrap().band_set.high_center(), 1000.0);
        assert_eq!(cfg.throttle_logins, 5);
    }

    #[test]
    fn invalid_policy_and_unknown_keys_fail() {
        assert!(ServerConfig::from_toml("bogus = 1").is_err());
        let bad = "[policy]\ntau_c = 2.0\ntau_db = 40.0\nell_max_ms = 150.0\nband_low_hz = 50.0\nband_high_hz = 4000.0\n";
        assert!(ServerConfig::from_toml(bad).is_err());
    }

    #[test]
    fn environment_overrides_file() {
        let mut cfg = ServerConfig::from_toml("freshness_ms = 10000").unwrap();
        let env: HashMap<&str, &str> = [
            ("EARSHOT_FRESHNESS_MS", "5000"),
            ("EARSHOT_DEVICE_ADDR", "127.0.0.1:0"),
            ("EARSHOT_STATIC_DIR", "/srv/web"),
        ]
        .into();
        cfg.apply_env(|k| env.get(k).map(|v| v.to_string()))
            .unwrap();
        assert_eq!(cfg.freshness_ms, 5000);
        assert_eq!(cfg.device_addr.port(), 0);
        assert_eq!(cfg.static_dir, Some(PathBuf::from("/srv/web")));

        let bad: HashMap<&str, &str> = [("EARSHOT_RETRY_LIMIT", "many")].into();
        assert!(cfg
            .apply_env(|k| bad.get(k).map(|v| v.to_string()))
            .is_err());
    }
}
