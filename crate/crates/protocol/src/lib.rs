//! Login service for ambient-audio second-factor authentication.
//!
//! The browser posts credentials over HTTP; on a password match the server
//! pushes a challenge to the user's enrolled phone over a persistent device
//! channel. Both devices record, the browser uploads its recording encrypted
//! for the phone, the server relays it untouched, and the phone returns a
//! signed verdict. Repeated rejections fall back to time-based codes.

pub mod channel;
pub mod client;
pub mod config;
pub mod crypto;
mod error;
pub mod http;
pub mod modelcheck;
pub mod payload;
pub mod service;
pub mod session;
pub mod store;
pub mod totp;
pub mod wire;

pub use channel::{serve_devices, DeviceRegistry};
pub use client::{BrowserClient, ClientError, LoginChallenge};
pub use config::ServerConfig;
pub use crypto::{DeviceKeys, DevicePublicKey, PasswordDigester};
pub use error::{ProtocolError, Result};
pub use payload::{decode_payload, encode_payload};
pub use service::{
    AuthService, Clock, ManualClock, MemoryPush, PushSink, ServiceConfig, SystemClock,
};
pub use session::{Limits, LoginSession, SessionState};
pub use store::{AttemptRecord, ClientMeta, Store, UserAccount};
pub use wire::{EncryptedSample, Message};

use std::net::SocketAddr;
use std::sync::Arc;

/// A running server: HTTP and device listeners on background tasks.
pub struct ServerHandle {
    pub http_addr: SocketAddr,
    pub device_addr: SocketAddr,
    pub service: Arc<AuthService>,
    pub registry: Arc<DeviceRegistry>,
    tasks: Vec<tokio::task::JoinHandle<()>>,
}

impl ServerHandle {
    pub fn base_url(&self) -> String {
        format!("http://{}", self.http_addr)
    }

    pub fn shutdown(self) {
        for t in &self.tasks {
            t.abort();
        }
    }
}

/// Binds both listeners and starts serving. `service_for` builds the
/// service around the device registry, which is its push channel.
pub async fn spawn_server(
    cfg: &ServerConfig,
    store: Arc<Store>,
    service_for: impl FnOnce(Arc<Store>, Arc<DeviceRegistry>) -> AuthService,
) -> std::io::Result<ServerHandle> {
    let registry = Arc::new(DeviceRegistry::default());
    let service = Arc::new(service_for(store, registry.clone()));
    let http_listener = tokio::net::TcpListener::bind(cfg.http_addr).await?;
    let device_listener = tokio::net::TcpListener::bind(cfg.device_addr).await?;
    let http_addr = http_listener.local_addr()?;
    let device_addr = device_listener.local_addr()?;
    let router = http::router(service.clone(), cfg.static_dir.clone());

    let sweeper = {
        let service = service.clone();
        tokio::spawn(async move {
            let mut tick = tokio::time::interval(std::time::Duration::from_secs(5));
            loop {
                tick.tick().await;
                service.sweep();
            }
        })
    };
    let http_task = tokio::spawn(async move {
        if let Err(e) = http::serve(http_listener, router).await {
            tracing::error!(error = %e, "http listener failed");
        }
    });
    let device_task = {
        let (service, registry) = (service.clone(), registry.clone());
        tokio::spawn(async move {
            if let Err(e) = serve_devices(device_listener, service, registry).await {
                tracing::error!(error = %e, "device listener failed");
            }
        })
    };
    Ok(ServerHandle {
        http_addr,
        device_addr,
        service,
        registry,
        tasks: vec![sweeper, http_task, device_task],
    })
}

/// Default service wiring for a config: system clock and the device registry.
pub fn default_service(
    cfg: &ServerConfig,
) -> impl FnOnce(Arc<Store>, Arc<DeviceRegistry>) -> AuthService + '_ {
    move |store, registry| AuthService::new(cfg.service(), store, Arc::new(SystemClock), registry)
}
