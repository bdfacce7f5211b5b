use std::net::{IpAddr, SocketAddr};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use tandemlift::telemetry::import_log;
use tandemlift_service::cli::{self, CliError};
use tandemlift_service::live::LiveOptions;
use tandemlift_service::replay::ReplayOptions;
use tandemlift_service::{start_live, start_replay};

#[derive(Parser)]
#[command(name = "tandemlift", version, about = "Dual-quadrotor payload simulator")]
struct Args {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a scenario headless and write `<name>.csv` and `<name>.summary.json`.
    Run {
        /// Scenario TOML file or built-in name (hover, pulse, guidance).
        scenario: String,
        /// Override the control step in seconds.
        #[arg(long)]
        dt: Option<f64>,
        /// Output directory.
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Serve a live session over WebSocket at /ws.
    Serve {
        scenario: String,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: IpAddr,
        /// Broadcast every n-th control step.
        #[arg(long, default_value_t = 20)]
        decimate: usize,
    },
    /// Stream a recorded CSV log over WebSocket at /ws.
    Replay {
        log: PathBuf,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: IpAddr,
        /// Playback speed factor.
        #[arg(long, default_value_t = 1.0)]
        speed: f64,
        #[arg(long, default_value_t = 1)]
        decimate: usize,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let args = Args::parse();
    let result = match args.command {
        Cmd::Run { scenario, dt, out } => run(&scenario, dt, &out),
        Cmd::Serve {
            scenario,
            port,
            host,
            decimate,
        } => serve(&scenario, SocketAddr::new(host, port), decimate),
        Cmd::Replay {
            log,
            port,
            host,
            speed,
            decimate,
        } => replay(&log, SocketAddr::new(host, port), ReplayOptions { speed, decimate }),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(scenario: &str, dt: Option<f64>, out: &Path) -> Result<u8, CliError> {
    let artifacts = cli::run(scenario, dt, out)?;
    let s = &artifacts.summary.summary;
    println!("wrote {}", artifacts.csv.display());
    println!("wrote {}", artifacts.summary_path.display());
    println!(
        "{} steps, final position error [{:.2e}, {:.2e}, {:.2e}] m",
        s.steps, s.final_position_error[0], s.final_position_error[1], s.final_position_error[2]
    );
    if let Some(reason) = &s.aborted {
        eprintln!("run aborted: {reason}");
        return Ok(1);
    }
    Ok(0)
}

fn runtime() -> tokio::runtime::Runtime {
    tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .expect("tokio runtime")
}

fn serve(scenario: &str, addr: SocketAddr, decimate: usize) -> Result<u8, CliError> {
    let (name, cfg) = cli::resolve_scenario(scenario)?;
    let opts = LiveOptions {
        decimate,
        ..Default::default()
    };
    runtime().block_on(async {
        let handle = start_live(cfg, &name, opts, addr).await?;
        println!("serving `{name}` on ws://{}/ws", handle.addr);
        handle.run_until_interrupted().await;
        Ok(0)
    })
}

fn replay(log: &Path, addr: SocketAddr, opts: ReplayOptions) -> Result<u8, CliError> {
    let rows = import_log(log).map_err(CliError::Config)?;
    let name = log.file_stem().map_or("log".into(), |s| s.to_string_lossy().into_owned());
    runtime().block_on(async {
        let handle = start_replay(rows, &name, opts, addr).await?;
        println!("replaying `{}` on ws://{}/ws", log.display(), handle.addr);
        handle.run_until_interrupted().await;
        Ok(0)
    })
}
