//! Persistent server↔phone connection carrying length-prefixed JSON frames.
//!
//! A device opens a TCP connection and greets with `HELLO`, signed by its
//! enrolled key. From then on the server pushes `CHALLENGE` and `SAMPLE`
//! messages down the connection and the device sends `VERDICT`, `SYNC_REQ`
//! and `BUSY` up it.

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use tokio::io::AsyncWriteExt;
use tokio::net::{TcpListener, TcpStream};
use tokio::sync::mpsc;

use crate::service::{AuthService, PushSink};
use crate::wire::{read_frame, write_frame, Message};
use crate::ProtocolError;

const HELLO_TIMEOUT: Duration = Duration::from_secs(10);

/// Connected devices by username. Pushing to a username without a live
/// connection fails.
#[derive(Debug, Default)]
pub struct DeviceRegistry {
    next_id: AtomicU64,
    devices: Mutex<HashMap<String, (u64, mpsc::UnboundedSender<Message>)>>,
}

impl DeviceRegistry {
    fn register(&self, username: &str, tx: mpsc::UnboundedSender<Message>) -> u64 {
        let id = self.next_id.fetch_add(1, Ordering::Relaxed);
        self.devices
            .lock()
            .unwrap()
            .insert(username.to_string(), (id, tx));
        id
    }

    fn unregister(&self, username: &str, id: u64) {
        let mut devices = self.devices.lock().unwrap();
        if devices.get(username).is_some_and(|(cur, _)| *cur == id) {
            devices.remove(username);
        }
    }

    pub fn is_connected(&self, username: &str) -> bool {
        self.devices
            .lock()
            .unwrap()
            .get(username)
            .is_some_and(|(_, tx)| !tx.is_closed())
    }
}

impl PushSink for DeviceRegistry {
    fn push(&self, username: &str, msg: Message) -> bool {
        self.devices
            .lock()
            .unwrap()
            .get(username)
            .is_some_and(|(_, tx)| tx.send(msg).is_ok())
    }
}

/// Accepts device connections until the listener fails.
pub async fn serve_devices(
    listener: TcpListener,
    service: Arc<AuthService>,
    registry: Arc<DeviceRegistry>,
) -> std::io::Result<()> {
    loop {
        let (stream, peer) = listener.accept().await?;
        let service = service.clone();
        let registry = registry.clone();
        tokio::spawn(async move {
            if let Err(e) = handle_device(stream, service, registry).await {
                tracing::debug!(%peer, error = %e, "device connection closed");
            }
        });
    }
}

async fn handle_device(
    stream: TcpStream,
    service: Arc<AuthService>,
    registry: Arc<DeviceRegistry>,
) -> Result<(), ProtocolError> {
    stream.set_nodelay(true)?;
    let (mut reader, mut writer) = stream.into_split();

    let hello = tokio::time::timeout(HELLO_TIMEOUT, read_frame(&mut reader))
        .await
        .map_err(|_| ProtocolError::Malformed("no HELLO".into()))??;
    let username = match hello {
        Some(Message::Hello {
            username,
            timestamp,
            signature,
        }) => match service.authenticate_device(&username, timestamp, &signature) {
            Ok(()) => username,
            Err(e) => {
                write_frame(&mut writer, &Message::error(&e)).await?;
                return Err(e);
            }
        },
        _ => {
            let e = ProtocolError::Malformed("expected HELLO".into());
            write_frame(&mut writer, &Message::error(&e)).await?;
            return Err(e);
        }
    };

    let (tx, mut rx) = mpsc::unbounded_channel();
    tx.send(Message::Ack).ok();
    let id = registry.register(&username, tx.clone());
    tracing::info!(username, "device connected");

    let writer_task = tokio::spawn(async move {
        while let Some(msg) = rx.recv().await {
            if write_frame(&mut writer, &msg).await.is_err() {
                break;
            }
        }
        writer.shutdown().await.ok();
    });

    let result = loop {
        let msg = match read_frame(&mut reader).await {
            Ok(Some(m)) => m,
            Ok(None) => break Ok(()),
            Err(e) => break Err(e),
        };
        let reply = match msg {
            Message::SyncReq { t1 } => service.sync(t1),
            Message::Verdict {
                session_id,
                accepted,
                reason,
                score,
                signature,
            } => match service.receive_verdict(
                Some(&username),
                &session_id,
                accepted,
                &reason,
                score,
                &signature,
            ) {
                Ok(_) => Message::Ack,
                Err(e) => Message::error(&e),
            },
            Message::Busy { session_id } => {
                service.device_busy(&username, &session_id);
                Message::Ack
            }
            other => Message::error(&ProtocolError::Malformed(format!(
                "unexpected {} on device channel",
                type_name(&other)
            ))),
        };
        if tx.send(reply).is_err() {
            break Ok(());
        }
    };

    registry.unregister(&username, id);
    drop(tx);
    writer_task.await.ok();
    tracing::info!(username, "device disconnected");
    result
}

fn type_name(m: &Message) -> String {
    serde_json::to_value(m)
        .ok()
        .and_then(|v| v.get("type").and_then(|t| t.as_str()).map(str::to_string))
        .unwrap_or_default()
}
