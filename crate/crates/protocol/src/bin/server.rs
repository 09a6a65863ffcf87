use std::path::PathBuf;
use std::sync::Arc;

use anyhow::Context;
use clap::Parser;
use earshot_protocol::{default_service, spawn_server, ServerConfig, Store};

/// Login server: browser HTTP endpoints plus the phone device channel.
#[derive(Debug, Parser)]
#[command(name = "earshot-server", version)]
struct Args {
    /// TOML configuration file; `EARSHOT_*` environment variables override it.
    #[arg(long, env = "EARSHOT_CONFIG")]
    config: Option<PathBuf>,
    /// Print the effective configuration and exit.
    #[arg(long)]
    print_config: bool,
}

#[tokio::main]
async fn main() -> anyhow::Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
        )
        .init();
    let args = Args::parse();
    let cfg = ServerConfig::load(args.config.as_deref()).context("loading configuration")?;
    if args.print_config {
        println!("{}", toml::to_string_pretty(&cfg)?);
        return Ok(());
    }
    let store = Arc::new(
        Store::open(&cfg.store_path)
            .with_context(|| format!("opening store {}", cfg.store_path.display()))?,
    );
    let server = spawn_server(&cfg, store, default_service(&cfg)).await?;
    tracing::info!(http = %server.http_addr, device = %server.device_addr, "listening");
    tokio::signal::ctrl_c().await?;
    tracing::info!("shutting down");
    server.shutdown();
    Ok(())
}
