use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};
use earshot_core::ScoringPolicy;
use earshot_token::{enroll_with_server, AudioSource, Credentials, Token, TokenOptions};
use rand::rngs::OsRng;
use tracing_subscriber::EnvFilter;

/// Software token answering ambient-audio login challenges.
#[derive(Debug, Parser)]
#[command(name = "earshot-token", version)]
struct Cli {
    /// Credentials file written by `enroll`.
    #[arg(
        long,
        default_value = "earshot-token.toml",
        env = "EARSHOT_CREDENTIALS"
    )]
    credentials: PathBuf,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Generate a key pair and register it with the server.
    Enroll {
        #[arg(long)]
        username: String,
        #[arg(long, env = "EARSHOT_PASSWORD")]
        password: String,
        /// Browser-facing base URL of the server.
        #[arg(long, default_value = "http://127.0.0.1:8080")]
        server: String,
        /// Device channel address of the server.
        #[arg(long, default_value = "127.0.0.1:8081")]
        device_addr: String,
        /// Replace an existing credentials file.
        #[arg(long)]
        force: bool,
    },
    /// Connect to the server and answer challenges until disconnected.
    Run {
        /// Overrides the device channel address stored in the credentials.
        #[arg(long)]
        server: Option<String>,
        /// WAV file played as the phone's microphone input.
        #[arg(long, conflicts_with = "synthetic_seed")]
        fixture: Option<PathBuf>,
        /// Seeded noise as the phone's microphone input.
        #[arg(long)]
        synthetic_seed: Option<u64>,
        /// Scoring policy TOML overriding the server's.
        #[arg(long)]
        policy: Option<PathBuf>,
        /// Spend the recording duration in wall time.
        #[arg(long)]
        realtime: bool,
        #[arg(long, default_value_t = 8)]
        sync_rounds: usize,
    },
}

fn load_policy(path: &Path) -> anyhow::Result<ScoringPolicy> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

#[tokio::main]
async fn main() -> anyhow::Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(
            EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info")),
        )
        .init();
    let cli = Cli::parse();
    match cli.cmd {
        Cmd::Enroll {
            username,
            password,
            server,
            device_addr,
            force,
        } => {
            if cli.credentials.exists() && !force {
                bail!(
                    "{} exists; pass --force to replace it",
                    cli.credentials.display()
                );
            }
            let creds =
                enroll_with_server(&server, &device_addr, &username, &password, &mut OsRng).await?;
            creds.save(&cli.credentials)?;
            println!(
                "enrolled {username}; credentials in {}",
                cli.credentials.display()
            );
        }
        Cmd::Run {
            server,
            fixture,
            synthetic_seed,
            policy,
            realtime,
            sync_rounds,
        } => {
            let creds = Credentials::load(&cli.credentials)?;
            let source = match (fixture, synthetic_seed) {
                (Some(p), _) => AudioSource::fixture(&p)?,
                (None, Some(seed)) => AudioSource::Synthetic { seed },
                (None, None) => bail!("choose an audio source: --fixture or --synthetic-seed"),
            };
            let opts = TokenOptions {
                sync_rounds,
                realtime,
                policy_override: policy.as_deref().map(load_policy).transpose()?,
                ..TokenOptions::default()
            };
            let addr = server.unwrap_or_else(|| creds.device_addr.clone());
            let token = Token {
                username: creds.username.clone(),
                keys: creds.keys()?,
                source,
                opts,
            };
            let handle = token.start(&addr).await?;
            tracing::info!(addr, username = creds.username, "connected");
            handle.join().await;
            tracing::info!("server closed the channel");
        }
    }
    Ok(())
}
