use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use dprx::config::{parse_list, parse_precoder, parse_seed, ConfigError, Receiver, SimConfig};
use dprx::ldpc_check::run_ldpc_check;
use dprx::records::pooled;
use dprx::sweep::{run_sweep_with, RunOptions, WORKERS_ENV};
use dprx::tablefile::{dump_table, load_table};
use dprx::verify::{build_instance, run_verify, Instance};
use dprx_core::ldpc::{build_code, DecoderConfig};
use dprx_core::modem::PskAlphabet;
use dprx_core::precoder::{build_lookup_table, PrecoderSpec};

// Comma lists use a fully qualified `Vec` so clap parses them as one value
// instead of a repeated flag.

/// Coded multiuser MIMO downlink with discrete PSK precoding: BER sweeps,
/// lookup tables and diagnostics.
#[derive(Parser)]
#[command(name = "dprx", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte-Carlo BER sweep and write the CSV.
    Sweep(SweepArgs),
    /// Build a lookup table for a seeded channel and dump it, or check a dump.
    Table(TableArgs),
    /// Print symmetry, zero-mean and linear-model diagnostics for a seeded channel.
    Verify(InstanceArgs),
    /// Noiseless round trips and a binary-input AWGN ladder for an LDPC code.
    LdpcTest(LdpcArgs),
}

#[derive(Args)]
struct SweepArgs {
    /// Config file (`key = value` lines); built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Number of users.
    #[arg(long = "K")]
    users: Option<usize>,
    /// Number of base-station antennas.
    #[arg(long = "B")]
    antennas: Option<usize>,
    /// Data alphabet order.
    #[arg(long)]
    alpha_s: Option<usize>,
    /// Transmit alphabet order.
    #[arg(long)]
    alpha_x: Option<usize>,
    /// zf_phase or mmse_exhaustive.
    #[arg(long, value_parser = parse_precoder)]
    precoder: Option<PrecoderSpec>,
    /// Comma-separated subset of general_dpa, dpa_lm, awgn_common, uncoded_hard.
    #[arg(long, value_parser = parse_list::<Receiver>)]
    receivers: Option<::std::vec::Vec<Receiver>>,
    /// Comma-separated SNR grid in dB.
    #[arg(long, allow_hyphen_values = true, value_parser = parse_list::<f64>)]
    snr: Option<::std::vec::Vec<f64>>,
    /// Blocks per channel realization.
    #[arg(long)]
    blocks: Option<usize>,
    /// Number of channel realizations.
    #[arg(long)]
    channels: Option<usize>,
    /// Master seed (decimal or 0x hex).
    #[arg(long, value_parser = parse_seed)]
    seed: Option<u64>,
    /// Output CSV path.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Decoder iteration cap.
    #[arg(long)]
    max_iterations: Option<usize>,
    /// Add the log-determinant term to the general DPA metric.
    #[arg(long)]
    logdet_correction: bool,
    /// Fill wall_time_s (makes output non-reproducible).
    #[arg(long)]
    record_timing: bool,
    /// Worker threads.
    #[arg(long, env = WORKERS_ENV)]
    workers: Option<usize>,
}

#[derive(Args, Clone)]
struct InstanceArgs {
    #[arg(long = "K", default_value_t = 3)]
    users: usize,
    #[arg(long = "B", default_value_t = 6)]
    antennas: usize,
    #[arg(long, default_value_t = 4)]
    alpha_s: usize,
    #[arg(long, default_value_t = 4)]
    alpha_x: usize,
    #[arg(long, value_parser = parse_precoder, default_value = "mmse_exhaustive")]
    precoder: PrecoderSpec,
    /// Channel seed (decimal or 0x hex).
    #[arg(long, value_parser = parse_seed, default_value = "7")]
    seed: u64,
}

#[derive(Args)]
struct TableArgs {
    #[command(flatten)]
    instance: InstanceArgs,
    /// Write the dump here instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Load a dump, rebuild the table from its channel and compare.
    #[arg(long, conflicts_with = "output")]
    check: Option<PathBuf>,
}

#[derive(Args)]
struct LdpcArgs {
    #[arg(long, default_value_t = 2048)]
    n: usize,
    #[arg(long, default_value_t = 0.5)]
    rate: f64,
    #[arg(long, default_value_t = 3)]
    dv: usize,
    #[arg(long, value_parser = parse_seed, default_value = "1")]
    seed: u64,
    #[arg(long, default_value_t = 50)]
    max_iterations: usize,
    /// Noiseless round trips.
    #[arg(long, default_value_t = 1000)]
    roundtrips: u64,
    /// Comma-separated Eb/N0 points in dB for the BPSK/AWGN ladder.
    #[arg(long, allow_hyphen_values = true, value_parser = parse_list::<f64>, default_value = "1.5,2.5,3.5")]
    ladder: ::std::vec::Vec<f64>,
    /// Blocks per ladder point.
    #[arg(long, default_value_t = 500)]
    blocks: u64,
    /// Export the parity-check matrix in alist form.
    #[arg(long)]
    alist: Option<PathBuf>,
    #[arg(long, env = WORKERS_ENV)]
    workers: Option<usize>,
}

enum Failure {
    Usage(anyhow::Error),
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        if e.downcast_ref::<ConfigError>().is_some() {
            Failure::Usage(e)
        } else {
            Failure::Runtime(e)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Sweep(a) => sweep(a),
        Command::Table(a) => table(a),
        Command::Verify(a) => verify(a),
        Command::LdpcTest(a) => ldpc_test(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn sweep(a: SweepArgs) -> Result<(), Failure> {
    let mut cfg = match &a.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))
                .map_err(Failure::Usage)?;
            SimConfig::parse_unvalidated(&text)
                .with_context(|| format!("in {}", path.display()))
                .map_err(Failure::Usage)?
        }
        None => SimConfig::default(),
    };
    macro_rules! set {
        ($field:expr, $value:expr) => {
            if let Some(v) = $value {
                $field = v;
            }
        };
    }
    set!(cfg.users, a.users);
    set!(cfg.antennas, a.antennas);
    set!(cfg.alpha_s, a.alpha_s);
    set!(cfg.alpha_x, a.alpha_x);
    set!(cfg.precoder, a.precoder);
    set!(cfg.receivers, a.receivers);
    set!(cfg.snr_grid_db, a.snr);
    set!(cfg.blocks_per_channel, a.blocks);
    set!(cfg.n_channels, a.channels);
    set!(cfg.master_seed, a.seed);
    set!(cfg.output_path, a.output);
    set!(cfg.ldpc.max_iterations, a.max_iterations);
    cfg.logdet_correction |= a.logdet_correction;
    cfg.record_timing |= a.record_timing;
    cfg.normalize();
    cfg.validate().map_err(|e| Failure::Usage(e.into()))?;
    if a.workers == Some(0) {
        return Err(Failure::Usage(anyhow::anyhow!(
            "--workers must be at least 1"
        )));
    }

    let out = run_sweep_with(&cfg, &RunOptions { workers: a.workers })?;
    dprx::emit_csv(&out.records, &cfg.output_path)?;
    println!(
        "wrote {} rows to {}",
        out.records.len(),
        cfg.output_path.display()
    );
    for r in &cfg.receivers {
        for &snr in &cfg.snr_grid_db {
            if let Some((errors, bits)) = pooled(&out.records, r.id(), snr) {
                println!(
                    "{:<13} {:>6} dB  ber {:.4e}  ({errors}/{bits})",
                    r.id(),
                    snr,
                    errors as f64 / bits as f64
                );
            }
        }
    }
    Ok(())
}

fn instance(a: &InstanceArgs) -> Result<Instance, Failure> {
    for (name, order) in [("alpha-s", a.alpha_s), ("alpha-x", a.alpha_x)] {
        PskAlphabet::new(order).map_err(|e| Failure::Usage(anyhow::anyhow!("--{name}: {e}")))?;
    }
    if a.users == 0 || a.users > a.antennas {
        return Err(Failure::Usage(anyhow::anyhow!("need 1 <= K <= B")));
    }
    Ok(Instance {
        users: a.users,
        antennas: a.antennas,
        alpha_s: a.alpha_s,
        alpha_x: a.alpha_x,
        precoder: a.precoder,
        seed: a.seed,
    })
}

fn table(a: TableArgs) -> Result<(), Failure> {
    if let Some(path) = &a.check {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let (stored, h) = load_table(&text)?;
        let meta = stored.meta();
        let rebuilt = build_lookup_table(
            &h,
            meta.precoder,
            &PskAlphabet::new(meta.alpha_s).map_err(anyhow::Error::from)?,
            &PskAlphabet::new(meta.alpha_x).map_err(anyhow::Error::from)?,
        )
        .map_err(anyhow::Error::from)?;
        if rebuilt != stored {
            return Err(Failure::Runtime(anyhow::anyhow!(
                "stored table differs from the rebuilt one"
            )));
        }
        println!("table_check: ok");
        println!("keys: {}", stored.len());
        return Ok(());
    }
    let inst = instance(&a.instance)?;
    let (h, t) = build_instance(&inst).map_err(anyhow::Error::from)?;
    let text = dump_table(&t, &h);
    match &a.output {
        Some(path) => {
            std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn verify(a: InstanceArgs) -> Result<(), Failure> {
    let inst = instance(&a)?;
    let report = run_verify(&inst).map_err(anyhow::Error::from)?;
    print!("{report}");
    Ok(())
}

fn ldpc_test(a: LdpcArgs) -> Result<(), Failure> {
    if a.max_iterations == 0 {
        return Err(Failure::Usage(anyhow::anyhow!(
            "--max-iterations must be at least 1"
        )));
    }
    let code = build_code(a.n, a.rate, a.dv, a.seed).map_err(|e| Failure::Usage(e.into()))?;
    if let Some(path) = &a.alist {
        std::fs::write(path, dprx::alist::to_alist(&code))
            .with_context(|| format!("writing {}", path.display()))?;
    }
    let cfg = DecoderConfig {
        max_iterations: a.max_iterations,
        early_stop: true,
    };
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(w) = a.workers {
        pool = pool.num_threads(w);
    }
    let pool = pool.build().map_err(anyhow::Error::from)?;
    let report =
        pool.install(|| run_ldpc_check(&code, &cfg, a.roundtrips, &a.ladder, a.blocks, a.seed));
    let info = code.report();
    println!("n: {}", code.n());
    println!("k: {}", code.k());
    println!("checks: {}", code.checks());
    println!("rank: {}", code.rank());
    println!("rank_deficiency: {}", info.rank_deficiency);
    println!("four_cycles: {}", info.four_cycles);
    println!("roundtrips: {}", report.roundtrips);
    println!("roundtrip_failures: {}", report.roundtrip_failures);
    println!(
        "max_roundtrip_iterations: {}",
        report.max_roundtrip_iterations
    );
    for p in &report.ladder {
        println!(
            "ebn0_{}db: raw_ber {:.4e} decoded_ber {:.4e} bler {:.4e} converged {}/{} syndrome_mismatches {}",
            p.ebn0_db,
            p.raw_ber(),
            p.decoded_ber(),
            p.bler(),
            p.converged_blocks,
            p.blocks,
            p.syndrome_mismatches
        );
    }
    if report.roundtrip_failures > 0 {
        return Err(Failure::Runtime(anyhow::anyhow!(
            "noiseless round trips failed"
        )));
    }
    Ok(())
}
