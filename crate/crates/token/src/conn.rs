//! Client end of the device channel.
//!
//! The server answers every device message in order (`SYNC_REQ` with
//! `SYNC_RESP`, `VERDICT` and `BUSY` with `ACK` or `ERROR`) and interleaves
//! its own pushes on the same stream. Replies are matched to requests
//! through a FIFO of waiters; pushes go to a separate queue.

use std::collections::VecDeque;
use std::sync::{Arc, Mutex};

use earshot_protocol::wire::{read_frame, write_frame};
use earshot_protocol::{DeviceKeys, Message};
use tokio::io::AsyncWriteExt;
use tokio::net::TcpStream;
use tokio::sync::{mpsc, oneshot};

use crate::clock::LocalClock;
use crate::{Result, TokenError};

/// Every message the token has written to the channel, in order.
pub type Transcript = Arc<Mutex<Vec<Message>>>;

type Waiters = Arc<Mutex<VecDeque<oneshot::Sender<Message>>>>;

#[derive(Clone)]
pub struct Connection {
    out: mpsc::UnboundedSender<Message>,
    waiters: Waiters,
    transcript: Transcript,
}

/// Server pushes: `CHALLENGE` and `SAMPLE`.
pub type Pushes = mpsc::UnboundedReceiver<Message>;

impl Connection {
    /// Connects and authenticates with a `HELLO` signed at the local time.
    pub async fn open(
        addr: &str,
        username: &str,
        keys: &DeviceKeys,
        clock: LocalClock,
    ) -> Result<(Self, Pushes)> {
        let stream = TcpStream::connect(addr).await?;
        stream.set_nodelay(true)?;
        let (mut reader, mut writer) = stream.into_split();
        let timestamp = clock.now_ms();
        let hello = Message::Hello {
            username: username.into(),
            timestamp,
            signature: keys.sign_hello(username, timestamp),
        };
        write_frame(&mut writer, &hello).await?;
        match read_frame(&mut reader).await? {
            Some(Message::Ack) => {}
            Some(Message::Error { code, message }) => {
                return Err(TokenError::Refused { code, message })
            }
            Some(other) => {
                return Err(TokenError::Config(format!(
                    "unexpected greeting reply {other:?}"
                )))
            }
            None => return Err(TokenError::Closed),
        }

        let transcript: Transcript = Arc::new(Mutex::new(vec![hello]));
        let waiters: Waiters = Arc::default();
        let (out, mut out_rx) = mpsc::unbounded_channel::<Message>();
        let (push_tx, push_rx) = mpsc::unbounded_channel();

        tokio::spawn(async move {
            while let Some(msg) = out_rx.recv().await {
                if write_frame(&mut writer, &msg).await.is_err() {
                    break;
                }
            }
            writer.shutdown().await.ok();
        });
        let reader_waiters = waiters.clone();
        tokio::spawn(async move {
            while let Ok(Some(msg)) = read_frame(&mut reader).await {
                match msg {
                    Message::Challenge { .. } | Message::Sample { .. } => {
                        push_tx.send(msg).ok();
                    }
                    reply => {
                        let waiter = reader_waiters.lock().unwrap().pop_front();
                        match waiter {
                            Some(w) => {
                                w.send(reply).ok();
                            }
                            None => tracing::warn!(?reply, "unsolicited reply"),
                        }
                    }
                }
            }
            reader_waiters.lock().unwrap().clear();
        });

        Ok((
            Self {
                out,
                waiters,
                transcript,
            },
            push_rx,
        ))
    }

    /// Sends `msg` and waits for the server's in-order reply.
    pub async fn request(&self, msg: Message) -> Result<Message> {
        let (tx, rx) = oneshot::channel();
        {
            let mut waiters = self.waiters.lock().unwrap();
            self.transcript.lock().unwrap().push(msg.clone());
            self.out.send(msg).map_err(|_| TokenError::Closed)?;
            waiters.push_back(tx);
        }
        rx.await.map_err(|_| TokenError::Closed)
    }

    pub fn transcript(&self) -> Transcript {
        self.transcript.clone()
    }
}
