use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use registry_service::config::{build_app, generate_key_files, ServiceConfig, VERIFICATION_KEY_FILE};
use tracing_subscriber::EnvFilter;

#[derive(Parser)]
#[command(name = "registry-server", version, about = "Frontier model registry service")]
struct Args {
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand)]
enum Command {
    /// Serve the HTTP API (the default).
    Serve,
    /// Create the stamp signing key and its public verification key.
    Keygen {
        /// Defaults to MR_SIGNING_KEY, then <data dir>/signing_key.pem.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[tokio::main]
async fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info")))
        .init();
    let args = Args::parse();
    let config = match ServiceConfig::from_env() {
        Ok(c) => c,
        Err(e) => {
            eprintln!("configuration error: {e}");
            return ExitCode::from(2);
        }
    };
    match args.command.unwrap_or(Command::Serve) {
        Command::Keygen { out } => {
            let signing = out.unwrap_or_else(|| config.signing_key.clone());
            let verification = signing
                .parent()
                .map(|p| p.join(VERIFICATION_KEY_FILE))
                .unwrap_or_else(|| PathBuf::from(VERIFICATION_KEY_FILE));
            if let Some(parent) = signing.parent() {
                let _ = std::fs::create_dir_all(parent);
            }
            match generate_key_files(&signing, &verification) {
                Ok(_) => {
                    println!("wrote {} and {}", signing.display(), verification.display());
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("keygen failed: {e}");
                    ExitCode::FAILURE
                }
            }
        }
        Command::Serve => serve(config).await,
    }
}

async fn serve(config: ServiceConfig) -> ExitCode {
    let app = match build_app(&config) {
        Ok(app) => app,
        Err(e) => {
            tracing::error!(error = %e, "refusing to start");
            return ExitCode::FAILURE;
        }
    };
    let listener = match tokio::net::TcpListener::bind(config.bind).await {
        Ok(l) => l,
        Err(e) => {
            tracing::error!(error = %e, bind = %config.bind, "cannot bind");
            return ExitCode::FAILURE;
        }
    };
    tracing::info!(bind = %config.bind, data_dir = %config.data_dir.display(), "registry listening");
    let shutdown = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    match axum::serve(listener, registry_service::router(app))
        .with_graceful_shutdown(shutdown)
        .await
    {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            tracing::error!(error = %e, "server error");
            ExitCode::FAILURE
        }
    }
}
