mod server;

use std::fs::File;
use std::io::BufReader;
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use opotwin::analysis::io::{read_gain_points, read_noise_points};
use opotwin::analysis::{fit_shot_noise, fit_threshold, Report};
use opotwin::config::RunConfig;
use opotwin::runs::{self, RunError};
use opotwin::session::{replay, JournalEntry};

const EXIT_PRECONDITION: u8 = 2;
const EXIT_FAULT: u8 = 3;

#[derive(Parser)]
#[command(name = "opotwin", version, about = "Monolithic-OPO squeezed-light digital twin")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// TOML run configuration; built-in defaults when absent.
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured RNG seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides the configured output directory.
    #[arg(long, short, global = true)]
    out: Option<PathBuf>,
    /// Power transmission of an attenuator in the squeezed beam.
    #[arg(long, global = true)]
    filter: Option<f64>,
    /// Simulated seconds per wall-clock second for `serve`.
    #[arg(long, global = true)]
    time_factor: Option<f64>,
    /// Print reports as JSON instead of aligned text.
    #[arg(long, global = true)]
    json: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Seed gain against pump power with a threshold fit.
    GainCurve {
        /// Comma-separated pump powers in W.
        #[arg(long, value_delimiter = ',')]
        pumps: Option<Vec<f64>>,
    },
    /// Pump-off noise against LO power with a linear calibration fit.
    NoiseScan {
        /// Comma-separated LO powers in mW.
        #[arg(long, value_delimiter = ',')]
        lo: Option<Vec<f64>>,
    },
    /// Phase-swept squeezing record reduced to raw and corrected levels.
    SqueezeRun {
        /// Length of the squeezing record in simulated seconds.
        #[arg(long)]
        duration: Option<f64>,
        /// Pump power in W.
        #[arg(long)]
        pump: Option<f64>,
    },
    /// Fits a CSV of gain points (`pump_w,gain`) or noise points
    /// (`lo_mw,noise_dbm`), chosen by its header.
    Fit { file: PathBuf },
    /// Serves an operator session over newline-delimited JSON on TCP.
    Serve {
        #[arg(long, default_value = "127.0.0.1")]
        bind: String,
        #[arg(long, default_value_t = 7878)]
        port: u16,
        /// Append every received command line with its tick to this file.
        #[arg(long)]
        journal: Option<PathBuf>,
    },
    /// Replays a session journal and prints the outgoing messages.
    Replay {
        journal: PathBuf,
        /// Last tick to simulate; defaults to the last journaled tick.
        #[arg(long)]
        until_tick: Option<u64>,
    },
    /// Prints the effective configuration as TOML.
    Config,
}

enum Failure {
    Precondition(String),
    Fault(String),
}

impl From<RunError> for Failure {
    fn from(e: RunError) -> Self {
        if e.is_fault() {
            Failure::Fault(e.to_string())
        } else {
            Failure::Precondition(e.to_string())
        }
    }
}

fn pre(e: impl std::fmt::Display) -> Failure {
    Failure::Precondition(e.to_string())
}

fn load_config(g: &Global) -> Result<RunConfig, Failure> {
    let mut cfg = match &g.config {
        Some(p) => RunConfig::load(p).map_err(pre)?,
        None => RunConfig::default(),
    };
    if let Some(s) = g.seed {
        cfg.rng_seed = s;
    }
    if let Some(o) = &g.out {
        cfg.output_dir = o.clone();
    }
    if let Some(t) = g.filter {
        cfg.squeeze.filter_transmission = Some(t);
    }
    if let Some(f) = g.time_factor {
        cfg.session.time_factor = f;
    }
    cfg.validate().map_err(pre)?;
    Ok(cfg)
}

fn print_report(report: &Report, json: bool) {
    if json {
        println!("{}", serde_json::to_string_pretty(&report.to_json()).expect("report is JSON"));
    } else {
        print!("{}", report.to_text());
    }
}

fn fit_file(path: &Path) -> Result<Report, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| pre(format!("{}: {e}", path.display())))?;
    let header = text.lines().next().unwrap_or("").replace(' ', "");
    let mut r = Report::new();
    if header.starts_with("pump_w") {
        let pts = read_gain_points(text.as_bytes()).map_err(pre)?;
        let f = fit_threshold(&pts).map_err(pre)?;
        r.push("fit", "threshold")
            .push("points", pts.len())
            .push("p_th_w", f.p_th)
            .push("rms_residual", f.rms_residual);
    } else if header.starts_with("lo_mw") {
        let pts = read_noise_points(text.as_bytes()).map_err(pre)?;
        let f = fit_shot_noise(&pts).map_err(pre)?;
        let top = pts.iter().map(|p| p.lo_mw).fold(0.0, f64::max);
        r.push("fit", "shot_noise")
            .push("points", pts.len())
            .push("electronic_floor_dbm", f.offset_dbm)
            .push("shot_noise_mw_per_mw_lo", f.slope)
            .push("shot_noise_limited_up_to_mw", f.shot_noise_limited_up_to(&pts, 0.1))
            .push("max_residual_db", f.max_residual_db(&pts, top));
    } else {
        return Err(pre(format!(
            "{}: header must start with `pump_w` or `lo_mw`",
            path.display()
        )));
    }
    Ok(r)
}

fn run(cli: Cli) -> Result<(), Failure> {
    let cfg = load_config(&cli.global)?;
    let json = cli.global.json;
    let out = cfg.output_dir.clone();
    match cli.command {
        Command::GainCurve { pumps } => {
            let pumps = pumps.unwrap_or_else(|| cfg.gain_curve.pumps_w.clone());
            let r = runs::gain_curve(&cfg, &pumps)?;
            runs::write_gain_curve(&out, &r)?;
            print_report(&r.report(), json);
            if let Some(a) = &r.aborted {
                return Err(Failure::Fault(a.clone()));
            }
            r.fit.map_err(pre)?;
        }
        Command::NoiseScan { lo } => {
            let lo = lo.unwrap_or_else(|| cfg.noise_scan.lo_mw.clone());
            let r = runs::noise_scan(&cfg, &lo)?;
            runs::write_noise_scan(&out, &r)?;
            print_report(&r.report(), json);
            r.fit.map_err(pre)?;
        }
        Command::SqueezeRun { duration, pump } => {
            let mut s = cfg.squeeze;
            if let Some(d) = duration {
                s.duration_s = d;
            }
            if let Some(p) = pump {
                s.pump_w = p;
            }
            let r = runs::squeeze_run(&cfg, &s)?;
            runs::write_squeeze_run(&out, &r)?;
            print_report(&r.report(), json);
        }
        Command::Fit { file } => print_report(&fit_file(&file)?, json),
        Command::Serve { bind, port, journal } => {
            let listener = TcpListener::bind((bind.as_str(), port)).map_err(pre)?;
            let addr = listener.local_addr().map_err(pre)?;
            println!("listening on {addr}");
            let opts = server::ServeOptions {
                time_factor: cfg.session.time_factor,
                journal,
            };
            server::serve(&cfg, listener, opts).map_err(|e| Failure::Fault(e.to_string()))?;
        }
        Command::Replay { journal, until_tick } => {
            let f = File::open(&journal).map_err(|e| pre(format!("{}: {e}", journal.display())))?;
            let entries: Vec<JournalEntry> = std::io::BufRead::lines(BufReader::new(f))
                .filter(|l| l.as_ref().map_or(true, |s| !s.trim().is_empty()))
                .map(|l| {
                    let l = l.map_err(pre)?;
                    serde_json::from_str(&l).map_err(pre)
                })
                .collect::<Result<_, _>>()?;
            let until = until_tick.unwrap_or_else(|| entries.last().map_or(0, |e| e.tick));
            let msgs = replay(&cfg, &entries, until).map_err(pre)?;
            for m in msgs {
                println!("{}", m.to_line());
            }
        }
        Command::Config => print!("{}", cfg.to_toml()),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Precondition(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(EXIT_PRECONDITION)
        }
        Err(Failure::Fault(m)) => {
            eprintln!("simulation fault: {m}");
            ExitCode::from(EXIT_FAULT)
        }
    }
}
