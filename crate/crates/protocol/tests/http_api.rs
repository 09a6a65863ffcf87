//! Browser endpoints and the device channel against a live server.

use std::sync::Arc;
use std::time::Duration;

use earshot_core::AudioSample;
use earshot_protocol::wire::{read_frame, write_frame};
use earshot_protocol::{
    decode_payload, spawn_server, totp, AuthService, BrowserClient, DeviceKeys, Message,
    PasswordDigester, ServerConfig, ServerHandle, SessionState, Store, SystemClock,
};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use tokio::net::TcpStream;

fn config(static_dir: Option<std::path::PathBuf>) -> ServerConfig {
    ServerConfig {
        http_addr: "127.0.0.1:0".parse().unwrap(),
        device_addr: "127.0.0.1:0".parse().unwrap(),
        static_dir,
        ..Default::default()
    }
}

async fn start(store: Arc<Store>, static_dir: Option<std::path::PathBuf>) -> ServerHandle {
    let cfg = config(static_dir);
    spawn_server(&cfg, store, |store, registry| {
        AuthService::new(cfg.service(), store, Arc::new(SystemClock), registry)
            .with_digester(PasswordDigester::light())
    })
    .await
    .unwrap()
}

struct Device {
    stream: TcpStream,
}

impl Device {
    async fn connect(server: &ServerHandle, user: &str, keys: &DeviceKeys) -> Result<Self, String> {
        let mut stream = TcpStream::connect(server.device_addr).await.unwrap();
        let ts = server.service.now_ms();
        let hello = Message::Hello {
            username: user.into(),
            timestamp: ts,
            signature: keys.sign_hello(user, ts),
        };
        write_frame(&mut stream, &hello).await.unwrap();
        match read_frame(&mut stream).await.unwrap() {
            Some(Message::Ack) => Ok(Self { stream }),
            other => Err(format!("{other:?}")),
        }
    }

    async fn recv(&mut self) -> Message {
        tokio::time::timeout(Duration::from_secs(5), read_frame(&mut self.stream))
            .await
            .expect("push within timeout")
            .unwrap()
            .expect("open channel")
    }

    async fn send(&mut self, m: &Message) {
        write_frame(&mut self.stream, m).await.unwrap();
    }
}

fn keys(seed: u64) -> DeviceKeys {
    DeviceKeys::generate(&mut ChaCha20Rng::seed_from_u64(seed))
}

fn marker_recording(captured_at: i64) -> AudioSample {
    // A recognisable constant plateau: every sample is 0x1234 as i16.
    let v = 0x1234 as f64 / 32768.0;
    AudioSample::new(vec![v; 4410], 44_100, captured_at, "pc").unwrap()
}

#[tokio::test]
async fn enroll_and_pubkey_round_trip() {
    let server = start(Arc::new(Store::in_memory()), None).await;
    let client = BrowserClient::new(&server.base_url());
    let k = keys(1);
    let secret = client
        .enroll("alice", "pw", &k.public().to_base64())
        .await
        .unwrap();
    assert!(!secret.is_empty());
    let (status, body) = client.get_raw("/api/pubkey/alice").await.unwrap();
    assert_eq!(status, 200);
    let v: serde_json::Value = serde_json::from_slice(&body).unwrap();
    assert_eq!(v["phone_pubkey"], k.public().to_base64());

    let dup = client
        .enroll("alice", "pw", &k.public().to_base64())
        .await
        .unwrap_err();
    assert_eq!(dup.code(), Some("USERNAME_TAKEN"));
    let bad_key = client.enroll("bob", "pw", "AAAA").await.unwrap_err();
    assert_eq!(bad_key.code(), Some("INVALID_KEY"));
    server.shutdown();
}

#[tokio::test]
async fn full_login_over_the_device_channel() {
    let dir = tempfile::tempdir().unwrap();
    let store_path = dir.path().join("store.jsonl");
    let server = start(Arc::new(Store::open(&store_path).unwrap()), None).await;
    let client = BrowserClient::new(&server.base_url());
    let k = keys(2);
    client
        .enroll("alice", "pw", &k.public().to_base64())
        .await
        .unwrap();
    let mut device = Device::connect(&server, "alice", &k).await.unwrap();

    // Wrong password: generic failure and nothing pushed.
    let err = client.login("alice", "nope").await.unwrap_err();
    assert_eq!(err.code(), Some("BAD_CREDENTIALS"));

    let challenge = client.login("alice", "pw").await.unwrap();
    assert_eq!(challenge.record_ms, 3000);
    assert_eq!(challenge.phone_pubkey, k.public().to_base64());
    match device.recv().await {
        Message::Challenge {
            session_id,
            record_ms,
            freshness_ms,
            ..
        } => {
            assert_eq!(session_id, challenge.session_id);
            assert_eq!(record_ms, 3000);
            assert_eq!(freshness_ms, 30_000);
        }
        m => panic!("{m:?}"),
    }

    // Clock sync over HTTP and over the device channel.
    let offset = client.sync(4).await.unwrap();
    assert!(offset.offset_ms.abs() <= 5, "{offset:?}");
    device.send(&Message::SyncReq { t1: 42 }).await;
    assert!(matches!(
        device.recv().await,
        Message::SyncResp { t1: 42, .. }
    ));

    let mut rng = ChaCha20Rng::seed_from_u64(3);
    let recording = marker_recording(server.service.now_ms());
    client
        .upload(&challenge, &recording, &mut rng)
        .await
        .unwrap();
    let forwarded = match device.recv().await {
        Message::Sample { session_id, sample } => {
            assert_eq!(session_id, challenge.session_id);
            sample
        }
        m => panic!("{m:?}"),
    };
    let plain = k.open(&forwarded).unwrap();
    let decoded = decode_payload(&plain, "pc").unwrap();
    assert_eq!(decoded.captured_at(), recording.captured_at());
    assert_eq!(decoded.len(), recording.len());

    let again = client
        .upload(&challenge, &recording, &mut rng)
        .await
        .unwrap_err();
    assert_eq!(again.code(), Some("WRONG_STATE"));

    // A forged verdict is refused on the channel and changes nothing.
    let rogue = keys(99);
    let sid = challenge.session_id.clone();
    device
        .send(&Message::Verdict {
            session_id: sid.clone(),
            accepted: true,
            reason: "OK".into(),
            score: Some(0.9),
            signature: rogue.sign_verdict(&sid, true, "OK", Some(0.9)),
        })
        .await;
    assert!(matches!(device.recv().await, Message::Error { code, .. } if code == "BAD_SIGNATURE"));
    let (state, _) = client.result(&sid, None, 0).await.unwrap();
    assert_eq!(state, SessionState::AwaitingVerdict);

    let waiter = {
        let client = client.clone();
        let sid = sid.clone();
        tokio::spawn(async move {
            client
                .result(&sid, Some(SessionState::AwaitingVerdict), 5000)
                .await
        })
    };
    device
        .send(&Message::Verdict {
            session_id: sid.clone(),
            accepted: true,
            reason: "OK".into(),
            score: Some(0.9),
            signature: k.sign_verdict(&sid, true, "OK", Some(0.9)),
        })
        .await;
    assert_eq!(device.recv().await, Message::Ack);
    let (state, reason) = waiter.await.unwrap().unwrap();
    assert_eq!(state, SessionState::Accepted);
    assert_eq!(reason.as_deref(), Some("OK"));

    // The store holds accounts and attempts but never the recording.
    let stored = std::fs::read(&store_path).unwrap();
    let needle = [0x34u8, 0x12, 0x34, 0x12, 0x34, 0x12, 0x34, 0x12];
    assert!(!stored.windows(needle.len()).any(|w| w == needle));
    let b64_needle = earshot_protocol::wire::b64_encode(&[0x34, 0x12, 0x34, 0x12, 0x34, 0x12]);
    assert!(!String::from_utf8_lossy(&stored).contains(&b64_needle));
    assert!(
        !String::from_utf8_lossy(&stored).contains(&earshot_protocol::wire::b64_encode(
            &forwarded.ciphertext[..30]
        ))
    );
    let text = String::from_utf8(stored).unwrap();
    assert!(text.contains(r#""outcome":"ACCEPTED""#));
    assert!(text.contains(r#""outcome":"BAD_CREDENTIALS""#));
    server.shutdown();
}

#[tokio::test]
async fn fallback_code_when_device_offline() {
    let server = start(Arc::new(Store::in_memory()), None).await;
    let client = BrowserClient::new(&server.base_url());
    let k = keys(4);
    let secret = client
        .enroll("carol", "pw", &k.public().to_base64())
        .await
        .unwrap();
    let secret = earshot_protocol::wire::b64_decode(&secret).unwrap();
    let challenge = client.login("carol", "pw").await.unwrap();
    let (state, reason) = client.result(&challenge.session_id, None, 0).await.unwrap();
    assert_eq!(state, SessionState::FallbackCode);
    assert_eq!(reason.as_deref(), Some("DEVICE_UNREACHABLE"));

    let now = server.service.now_ms();
    let valid = totp::code_at(&secret, now);
    let wrong = format!("{:06}", (valid.parse::<u32>().unwrap() + 1) % 1_000_000);
    if !totp::verify(&secret, &wrong, now) {
        let e = client
            .fallback(&challenge.session_id, &wrong)
            .await
            .unwrap_err();
        assert_eq!(e.code(), Some("BAD_CODE"));
    }
    let state = client
        .fallback(&challenge.session_id, &valid)
        .await
        .unwrap();
    assert_eq!(state, SessionState::Accepted);
    server.shutdown();
}

#[tokio::test]
async fn device_hello_must_be_signed_by_the_enrolled_key() {
    let server = start(Arc::new(Store::in_memory()), None).await;
    let client = BrowserClient::new(&server.base_url());
    let k = keys(5);
    client
        .enroll("dave", "pw", &k.public().to_base64())
        .await
        .unwrap();
    let err = Device::connect(&server, "dave", &keys(6))
        .await
        .err()
        .unwrap();
    assert!(err.contains("BAD_SIGNATURE"), "{err}");
    assert!(!server.registry.is_connected("dave"));
    let _ok = Device::connect(&server, "dave", &k).await.unwrap();
    assert!(server.registry.is_connected("dave"));
    server.shutdown();
}

#[tokio::test]
async fn throttling_and_error_statuses() {
    let server = start(Arc::new(Store::in_memory()), None).await;
    let client = BrowserClient::new(&server.base_url());
    client
        .enroll("erin", "pw", &keys(7).public().to_base64())
        .await
        .unwrap();
    for _ in 0..5 {
        let _ = client.login("erin", "wrong").await;
    }
    let e = client.login("erin", "pw").await.unwrap_err();
    assert!(
        matches!(e, earshot_protocol::ClientError::Server { status: 429, ref code, .. } if code == "THROTTLED")
    );

    let e = client.result("no-such-session", None, 0).await.unwrap_err();
    assert!(matches!(
        e,
        earshot_protocol::ClientError::Server { status: 404, .. }
    ));

    let (status, body) = {
        let resp = reqwest::Client::new()
            .post(format!("{}/api/login", server.base_url()))
            .body("{not json")
            .send()
            .await
            .unwrap();
        (resp.status().as_u16(), resp.bytes().await.unwrap())
    };
    assert_eq!(status, 400);
    assert!(String::from_utf8_lossy(&body).contains("MALFORMED"));
    server.shutdown();
}

#[tokio::test]
async fn serves_static_assets() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("index.html"), "<html>login</html>").unwrap();
    std::fs::write(dir.path().join("app.js"), "console.log(1)").unwrap();
    let server = start(Arc::new(Store::in_memory()), Some(dir.path().to_path_buf())).await;
    let client = BrowserClient::new(&server.base_url());
    assert_eq!(
        client.get_raw("/").await.unwrap(),
        (200, b"<html>login</html>".to_vec())
    );
    assert_eq!(
        client.get_raw("/app.js").await.unwrap(),
        (200, b"console.log(1)".to_vec())
    );
    assert_eq!(client.get_raw("/missing.css").await.unwrap().0, 404);
    assert_eq!(
        client.get_raw("/api/health").await.unwrap(),
        (200, b"ok".to_vec())
    );
    server.shutdown();
}
