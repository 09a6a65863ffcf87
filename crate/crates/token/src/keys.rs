//! On-disk device key and credentials.

use std::fs;
use std::path::Path;

use earshot_protocol::wire::{b64_decode, b64_encode};
use earshot_protocol::DeviceKeys;
use serde::{Deserialize, Serialize};

use crate::{Result, TokenError};

/// Everything the token needs to reconnect: who it is, its private key and
/// where the server listens.
#[derive(Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Credentials {
    pub username: String,
    /// Base64 of the 64-byte private key.
    pub secret_key: String,
    /// Base64 seed for fallback codes, as returned at enrollment.
    #[serde(default)]
    pub fallback_secret: Option<String>,
    /// Browser-facing base URL, e.g. `http://127.0.0.1:8080`.
    pub server_url: String,
    /// Device channel address, e.g. `127.0.0.1:8081`.
    pub device_addr: String,
}

impl std::fmt::Debug for Credentials {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Credentials")
            .field("username", &self.username)
            .field("server_url", &self.server_url)
            .field("device_addr", &self.device_addr)
            .finish_non_exhaustive()
    }
}

impl Credentials {
    pub fn new(username: &str, keys: &DeviceKeys, server_url: &str, device_addr: &str) -> Self {
        Self {
            username: username.into(),
            secret_key: b64_encode(&keys.to_secret_bytes()),
            fallback_secret: None,
            server_url: server_url.into(),
            device_addr: device_addr.into(),
        }
    }

    pub fn keys(&self) -> Result<DeviceKeys> {
        Ok(DeviceKeys::from_secret_bytes(&b64_decode(
            &self.secret_key,
        )?)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|source| TokenError::File {
            path: path.into(),
            source,
        })?;
        toml::from_str(&text).map_err(|e| TokenError::Config(format!("{}: {e}", path.display())))
    }

    /// Writes the file readable by the owner only.
    pub fn save(&self, path: &Path) -> Result<()> {
        let text = toml::to_string(self).map_err(|e| TokenError::Config(e.to_string()))?;
        let file_err = |source| TokenError::File {
            path: path.into(),
            source,
        };
        fs::write(path, text).map_err(file_err)?;
        #[cfg(unix)]
        {
            use std::os::unix::fs::PermissionsExt;
            fs::set_permissions(path, fs::Permissions::from_mode(0o600)).map_err(file_err)?;
        }
        Ok(())
    }
}
