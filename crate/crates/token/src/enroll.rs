//! One-time registration of the device key with the server.

use earshot_protocol::{BrowserClient, DeviceKeys};
use rand::{CryptoRng, RngCore};

use crate::keys::Credentials;
use crate::Result;

/// Generates a key pair, registers its public half under `username` and
/// returns credentials ready to save.
pub async fn enroll_with_server<R: RngCore + CryptoRng>(
    server_url: &str,
    device_addr: &str,
    username: &str,
    password: &str,
    rng: &mut R,
) -> Result<Credentials> {
    let keys = DeviceKeys::generate(rng);
    let client = BrowserClient::new(server_url);
    let fallback = client
        .enroll(username, password, &keys.public().to_base64())
        .await?;
    let mut creds = Credentials::new(username, &keys, server_url, device_addr);
    creds.fallback_secret = Some(fallback);
    Ok(creds)
}
