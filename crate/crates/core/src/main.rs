//! Command-line front end: plan/tx/channel/rx stage runs, monolithic runs,
//! parameter sweeps, and PAPR measurement.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use nyqscm::bandplan::BandPlan;
use nyqscm::error::Error;
use nyqscm::harness::{
    self, aggregate_ber, preset, probe_channel_estimate, resolve_plan, run_link, LinkConfig,
    SweepAxis,
};
use nyqscm::metrics::LinkReport;
use nyqscm::sigkit::{measure_papr_complex, measure_papr_real, read_waveform, WaveformFile};
use nyqscm::txdsp::{FrameSpec, TruthRecord};

#[derive(Parser)]
#[command(
    name = "nyqscm",
    about = "Multi-rate Nyquist-SCM link simulator for C-band IM/DD fiber",
    version
)]
struct Cli {
    /// Configuration file (.toml or .json).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Shipped preset name (obtb-uniform, obtb-pcs, paper-50km-uniform,
    /// paper-50km-pcs, desk-scale-fast).
    #[arg(long, global = true)]
    preset: Option<String>,
    /// Seed override.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Probe the channel, estimate its response, and emit the band plan.
    Plan,
    /// Build the transmit waveform and truth records.
    Tx,
    /// Push a transmit waveform through the channel model.
    Channel(ChannelArgs),
    /// Recover a received waveform and score it.
    Rx(RxArgs),
    /// Full end-to-end run.
    Run,
    /// Sweep one axis over a value grid.
    Sweep(SweepArgs),
    /// Measure PAPR of the configured drive signal or a waveform file.
    Papr(PaprArgs),
}

#[derive(Args)]
struct ChannelArgs {
    /// Transmit waveform (defaults to <out>/tx.wvfm).
    #[arg(long)]
    input: Option<PathBuf>,
}

#[derive(Args)]
struct RxArgs {
    /// Received waveform (defaults to <out>/rx.wvfm).
    #[arg(long)]
    input: Option<PathBuf>,
    /// Transmit metadata (defaults to <out>/tx_meta.json).
    #[arg(long)]
    tx_meta: Option<PathBuf>,
    /// Channel metadata (defaults to <out>/channel_meta.json).
    #[arg(long)]
    channel_meta: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    /// Axis: rop_dbm | osnr_db | cspr_bias_v | drop_db.
    #[arg(long)]
    axis: String,
    /// Comma-separated grid values.
    #[arg(long)]
    values: String,
}

#[derive(Args)]
struct PaprArgs {
    /// Measure a waveform file instead of the configured drive signal.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long, default_value_t = 99.99)]
    percentile: f64,
}

/// Bundle written by `tx` and consumed by `rx`.
#[derive(Serialize, Deserialize)]
struct TxMeta {
    schema_version: u32,
    config_hash: String,
    seed: u64,
    plan: BandPlan,
    frames: Vec<FrameSpec>,
    truths: Vec<TruthRecord>,
    papr_db: f64,
}

#[derive(Serialize, Deserialize)]
struct ChannelMeta {
    schema_version: u32,
    cspr_db: f64,
}

fn load_config(cli: &Cli) -> Result<LinkConfig, Error> {
    let mut cfg = match (&cli.config, &cli.preset) {
        (Some(path), _) => LinkConfig::from_path(path)?,
        (None, Some(name)) => preset(name)?,
        (None, None) => {
            return Err(Error::config("pass --config <path> or --preset <name>"));
        }
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), Error> {
    std::fs::write(path, serde_json::to_string_pretty(value)?)?;
    Ok(())
}

/// Report plus enough context to reproduce it.
#[derive(Serialize)]
struct ReportFile<'a> {
    report: &'a LinkReport,
    config: &'a LinkConfig,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Usage problems exit 1 (clap would default to 2).
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config(_) | Error::Parameter(_) => ExitCode::from(1),
                _ => ExitCode::from(2),
            }
        }
    }
}

fn dispatch(cli: &Cli) -> Result<(), Error> {
    let cfg = load_config(cli)?;
    std::fs::create_dir_all(&cli.out)?;
    match &cli.command {
        Command::Plan => {
            let (plan, loading) = resolve_plan(&cfg)?;
            let path = cli.out.join("plan.json");
            std::fs::write(&path, plan.to_json())?;
            if let Some(loading) = loading {
                write_json(&cli.out.join("entropy_loading.json"), &loading)?;
            }
            if let Ok(est) = probe_channel_estimate(&cfg) {
                write_json(&cli.out.join("channel_estimate.json"), &est)?;
            }
            println!("{} bands -> {}", plan.bands.len(), path.display());
            for band in &plan.bands {
                println!(
                    "  band {}: {:.2} GBaud at {:.2} GHz, rolloff {}",
                    band.index,
                    band.baud_hz / 1e9,
                    band.f_center_hz / 1e9,
                    band.rolloff
                );
            }
            Ok(())
        }
        Command::Tx => {
            let (plan, _) = resolve_plan(&cfg)?;
            let frames = harness::frames_for_plan(&cfg, &plan)?;
            let tx = harness::build_tx(&cfg, &plan, &frames)?;
            nyqscm::sigkit::write_real(&cli.out.join("tx.wvfm"), &tx.drive)?;
            write_json(
                &cli.out.join("tx_meta.json"),
                &TxMeta {
                    schema_version: 1,
                    config_hash: cfg.hash(),
                    seed: cfg.seed,
                    plan: tx.plan,
                    frames: tx.frames,
                    truths: tx.truths,
                    papr_db: tx.papr_db,
                },
            )?;
            println!(
                "tx waveform: {} samples at {:.0} GSa/s, PAPR {:.2} dB",
                tx.drive.len(),
                tx.drive.sample_rate_hz() / 1e9,
                tx.papr_db
            );
            Ok(())
        }
        Command::Channel(args) => {
            let input = args.input.clone().unwrap_or_else(|| cli.out.join("tx.wvfm"));
            let drive = read_waveform(&input)?.into_real()?;
            let ch = harness::run_channel(&cfg, &drive)?;
            nyqscm::sigkit::write_real(&cli.out.join("rx.wvfm"), &ch.rx)?;
            write_json(
                &cli.out.join("channel_meta.json"),
                &ChannelMeta {
                    schema_version: 1,
                    cspr_db: ch.cspr_db,
                },
            )?;
            println!(
                "rx waveform: {} samples at {:.0} GSa/s, CSPR {:.2} dB",
                ch.rx.len(),
                ch.rx.sample_rate_hz() / 1e9,
                ch.cspr_db
            );
            Ok(())
        }
        Command::Rx(args) => {
            let input = args.input.clone().unwrap_or_else(|| cli.out.join("rx.wvfm"));
            let meta_path = args
                .tx_meta
                .clone()
                .unwrap_or_else(|| cli.out.join("tx_meta.json"));
            let ch_meta_path = args
                .channel_meta
                .clone()
                .unwrap_or_else(|| cli.out.join("channel_meta.json"));
            let rx_wave = read_waveform(&input)?.into_real()?;
            let meta: TxMeta = serde_json::from_str(&std::fs::read_to_string(&meta_path)?)?;
            let ch_meta: ChannelMeta =
                serde_json::from_str(&std::fs::read_to_string(&ch_meta_path)?)?;
            let report = harness::run_rx(
                &cfg,
                &meta.plan,
                &meta.frames,
                &meta.truths,
                &rx_wave,
                meta.papr_db,
                ch_meta.cspr_db,
            )?;
            write_json(
                &cli.out.join("report.json"),
                &ReportFile {
                    report: &report,
                    config: &cfg,
                },
            )?;
            print_report(&report);
            Ok(())
        }
        Command::Run => {
            let report = run_link(&cfg)?;
            write_json(
                &cli.out.join("report.json"),
                &ReportFile {
                    report: &report,
                    config: &cfg,
                },
            )?;
            print_report(&report);
            Ok(())
        }
        Command::Sweep(args) => {
            let axis = SweepAxis::parse(&args.axis)?;
            let values: Vec<f64> = args
                .values
                .split(',')
                .map(|v| {
                    v.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::config(format!("bad sweep value '{v}'")))
                })
                .collect::<Result<_, _>>()?;
            let result = harness::sweep(&cfg, axis, &values)?;
            std::fs::write(cli.out.join("sweep.csv"), result.to_csv())?;
            write_json(&cli.out.join("sweep.json"), &result)?;
            for point in &result.points {
                match &point.report {
                    Some(r) => println!(
                        "{} = {:>8.3}: aggregate BER {:.3e}, avg NGMI {:.4}",
                        result.axis,
                        point.value,
                        aggregate_ber(r),
                        r.aggregate.avg_ngmi
                    ),
                    None => println!(
                        "{} = {:>8.3}: failed ({})",
                        result.axis,
                        point.value,
                        point.error.as_deref().unwrap_or("unknown")
                    ),
                }
            }
            Ok(())
        }
        Command::Papr(args) => {
            let papr = match &args.input {
                Some(path) => match read_waveform(path)? {
                    WaveformFile::Real(w) => measure_papr_real(&w, args.percentile)?,
                    WaveformFile::Complex(w) => measure_papr_complex(&w, args.percentile)?,
                },
                None => {
                    let (plan, _) = resolve_plan(&cfg)?;
                    let frames = harness::frames_for_plan(&cfg, &plan)?;
                    let tx = harness::build_tx(&cfg, &plan, &frames)?;
                    measure_papr_real(&tx.drive, args.percentile)?
                }
            };
            println!("PAPR ({}th percentile): {papr:.3} dB", args.percentile);
            Ok(())
        }
    }
}

fn print_report(report: &LinkReport) {
    for band in &report.bands {
        println!(
            "band {}: {:>6.2} GBaud  m {:.2}  BER {:.3e}  NGMI {:.4}  MSE {:.1} dB  [{}{}]",
            band.i,
            band.baud_hz / 1e9,
            band.m,
            band.ber,
            band.ngmi,
            band.mse_db,
            if band.flags.ber_hd_ok { "hd " } else { "" },
            if band.flags.ber_sd_ok { "sd" } else { "" },
        );
    }
    let agg = &report.aggregate;
    println!(
        "aggregate: gross {:.3} Gb/s  net {:.3} Gb/s  avg NGMI {:.4}  OH {:.4}  PAPR {:.2} dB  CSPR {:.2} dB",
        agg.gross_bps / 1e9,
        agg.net_bps / 1e9,
        agg.avg_ngmi,
        agg.oh_pred,
        agg.papr_db,
        agg.cspr_db
    );
}
