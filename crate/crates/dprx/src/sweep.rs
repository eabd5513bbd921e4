//! Seeded Monte-Carlo BER sweeps.
//!
//! Work is split into `(channel, block)` units that run in parallel. Each
//! unit draws its data and noise from streams derived from the master seed
//! and the unit coordinates only, and per-unit counts are merged in a fixed
//! order, so results do not depend on the worker count. Data and noise
//! streams are shared by all receivers (common random numbers), which makes
//! receiver comparisons at one SNR point paired.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Instant;

use anyhow::{bail, Context};
use dprx_core::channel::{
    complex_gaussian, draw_channel, snr_to_noise_variance, ChannelMatrix, FadingConfig,
};
use dprx_core::demapper::{
    compute_lambda_eps, compute_lambda_xx, dpa_stats_from_view, h_eff_from_view, hard_detect,
    llr_awgn_baseline_into, llr_dpa_lm_into, llr_general_dpa_into, GeneralDpaStats,
    LinearModelParams, LogDetTerm, UserView,
};
use dprx_core::ldpc::{
    build_code, random_message, spa_decode_with, CodeReport, DecoderConfig, DecoderWorkspace,
    LdpcCode,
};
use dprx_core::modem::{BitPartition, GrayMap, PskAlphabet};
use dprx_core::precoder::{build_lookup_table, LookupTable};
use dprx_core::{Complex64, Error};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::config::{Receiver, SimConfig};
use crate::records::{ResultRecord, UserScope};

/// Environment variable overriding the number of worker threads.
pub const WORKERS_ENV: &str = "DPRX_WORKERS";
const MAX_CHANNEL_REDRAWS: u64 = 100;

mod domain {
    pub const CODE: u64 = 1;
    pub const CHANNEL: u64 = 2;
    pub const DATA: u64 = 3;
    pub const NOISE: u64 = 4;
    pub const UNCODED_DATA: u64 = 5;
    pub const UNCODED_NOISE: u64 = 6;
}

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of the stream identified by `(master, domain, coords...)`.
pub fn derive_seed(master: u64, domain: u64, coords: &[u64]) -> u64 {
    let mut h = mix(master ^ 0x9e37_79b9_7f4a_7c15);
    for &v in std::iter::once(&domain).chain(coords) {
        h = mix(h.wrapping_add(0x9e37_79b9_7f4a_7c15) ^ v);
    }
    h
}

fn stream(master: u64, domain: u64, coords: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, domain, coords))
}

/// How many expensive objects a sweep built; lets tests check that tables
/// and statistics are computed once and shared across blocks.
#[derive(Debug, Default)]
pub struct Counters {
    tables: AtomicUsize,
    dpa_stats: AtomicUsize,
    linear_models: AtomicUsize,
    channel_redraws: AtomicUsize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CounterSnapshot {
    pub tables: usize,
    pub dpa_stats: usize,
    pub linear_models: usize,
    pub channel_redraws: usize,
}

impl Counters {
    fn snapshot(&self) -> CounterSnapshot {
        CounterSnapshot {
            tables: self.tables.load(Ordering::Relaxed),
            dpa_stats: self.dpa_stats.load(Ordering::Relaxed),
            linear_models: self.linear_models.load(Ordering::Relaxed),
            channel_redraws: self.channel_redraws.load(Ordering::Relaxed),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepOutput {
    pub records: Vec<ResultRecord>,
    pub counters: CounterSnapshot,
    pub code: CodeReport,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    /// Worker threads; `None` reads [`WORKERS_ENV`] and falls back to the
    /// rayon default.
    pub workers: Option<usize>,
}

pub fn workers_from_env() -> anyhow::Result<Option<usize>> {
    match std::env::var(WORKERS_ENV) {
        Ok(v) => {
            let n: usize = v
                .trim()
                .parse()
                .with_context(|| format!("{WORKERS_ENV}=`{v}`"))?;
            if n == 0 {
                bail!("{WORKERS_ENV} must be at least 1");
            }
            Ok(Some(n))
        }
        Err(_) => Ok(None),
    }
}

struct UserSetup {
    zeta: Vec<Complex64>,
    stats: Vec<GeneralDpaStats>,
    models: Vec<LinearModelParams>,
}

struct ChannelSetup {
    users: Vec<UserSetup>,
    sigma_w_sq: Vec<f64>,
}

struct Link {
    data: PskAlphabet,
    gray: GrayMap,
    parts: BitPartition,
    code: LdpcCode,
    decoder: DecoderConfig,
    logdet: LogDetTerm,
}

/// Per-unit tallies indexed `[receiver][snr][user]`.
#[derive(Clone, Copy, Default)]
struct Tally {
    bit_errors: u64,
    block_errors: u64,
    nanos: u128,
}

pub fn run_sweep(cfg: &SimConfig) -> anyhow::Result<SweepOutput> {
    run_sweep_with(cfg, &RunOptions::default())
}

pub fn run_sweep_with(cfg: &SimConfig, opts: &RunOptions) -> anyhow::Result<SweepOutput> {
    cfg.validate()?;
    let workers = match opts.workers {
        Some(n) => Some(n),
        None => workers_from_env()?,
    };
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = workers {
        builder = builder.num_threads(n);
    }
    let pool = builder.build()?;
    pool.install(|| sweep(cfg))
}

fn sweep(cfg: &SimConfig) -> anyhow::Result<SweepOutput> {
    let counters = Counters::default();
    let data = PskAlphabet::new(cfg.alpha_s)?;
    let tx = PskAlphabet::new(cfg.alpha_x)?;
    let gray = GrayMap::new(&data);
    let parts = BitPartition::new(&data, &gray);
    let code = build_code(
        cfg.ldpc.n,
        cfg.ldpc.rate,
        cfg.ldpc.dv,
        derive_seed(cfg.master_seed, domain::CODE, &[]),
    )
    .context("building the LDPC code")?;
    let report = code.report();
    if report.four_cycles > 0 || report.rank_deficiency > 0 {
        log::info!("LDPC construction: {report:?}");
    }
    let link = Link {
        data,
        gray,
        parts,
        code,
        decoder: DecoderConfig {
            max_iterations: cfg.ldpc.max_iterations,
            early_stop: true,
        },
        logdet: if cfg.logdet_correction {
            LogDetTerm::Include
        } else {
            LogDetTerm::Omit
        },
    };

    let setups: Vec<ChannelSetup> = (0..cfg.n_channels)
        .into_par_iter()
        .map(|c| setup_channel(cfg, c, &link.data, &tx, &counters))
        .collect::<anyhow::Result<_>>()?;
    log::info!("{} channel realizations prepared", setups.len());

    let units: Vec<(usize, usize)> = (0..cfg.n_channels)
        .flat_map(|c| (0..cfg.blocks_per_channel).map(move |b| (c, b)))
        .collect();
    let tallies: Vec<Vec<Tally>> = units
        .par_iter()
        .map(|&(c, b)| simulate_unit(cfg, &link, &setups[c], c, b))
        .collect::<anyhow::Result<_>>()?;

    let records = collect_records(cfg, &link, &units, &tallies);
    Ok(SweepOutput {
        records,
        counters: counters.snapshot(),
        code: report,
    })
}

fn setup_channel(
    cfg: &SimConfig,
    c: usize,
    data: &PskAlphabet,
    tx: &PskAlphabet,
    counters: &Counters,
) -> anyhow::Result<ChannelSetup> {
    let mut attempt = 0;
    let (h, table): (ChannelMatrix, LookupTable) = loop {
        let seed = derive_seed(cfg.master_seed, domain::CHANNEL, &[c as u64, attempt]);
        let fading = FadingConfig::uniform(cfg.users, cfg.antennas, seed);
        let h = draw_channel(&fading, &mut ChaCha8Rng::seed_from_u64(seed))?;
        match build_lookup_table(&h, cfg.precoder, data, tx) {
            Ok(t) => {
                counters.tables.fetch_add(1, Ordering::Relaxed);
                break (h, t);
            }
            Err(Error::DegenerateChannel) if attempt + 1 < MAX_CHANNEL_REDRAWS => {
                log::warn!("channel {c}: degenerate draw {attempt}, redrawing");
                counters.channel_redraws.fetch_add(1, Ordering::Relaxed);
                attempt += 1;
            }
            Err(e) => {
                return Err(e).with_context(|| format!("channel {c}: building the lookup table"))
            }
        }
    };
    let sigma_w_sq: Vec<f64> = cfg
        .snr_grid_db
        .iter()
        .map(|&snr| snr_to_noise_variance(snr, cfg.antennas).sigma_w_sq)
        .collect();
    let lambda_xx = compute_lambda_xx(&table, tx)?;
    let mut users = Vec::with_capacity(cfg.users);
    for k in 0..cfg.users {
        let view = UserView::new(h.row(k), &table, data, tx, k)?;
        let h_eff = h_eff_from_view(&view, data);
        let lambda_eps_sq = compute_lambda_eps(h.row(k), &lambda_xx, h_eff, data.symbol_power())?;
        let mut stats = Vec::with_capacity(sigma_w_sq.len());
        let mut models = Vec::with_capacity(sigma_w_sq.len());
        for &s2 in &sigma_w_sq {
            stats.push(dpa_stats_from_view(&view, s2)?);
            counters.dpa_stats.fetch_add(1, Ordering::Relaxed);
            models.push(LinearModelParams::new(h_eff, lambda_eps_sq, s2));
            counters.linear_models.fetch_add(1, Ordering::Relaxed);
        }
        users.push(UserSetup {
            zeta: view.zeta().to_vec(),
            stats,
            models,
        });
    }
    Ok(ChannelSetup { users, sigma_w_sq })
}

/// Table key of time slot `t`: user 0 is the most significant digit.
fn slot_keys(symbols: &[Vec<usize>], alpha: usize) -> Vec<usize> {
    let slots = symbols[0].len();
    (0..slots)
        .map(|t| symbols.iter().fold(0, |key, s| key * alpha + s[t]))
        .collect()
}

fn simulate_unit(
    cfg: &SimConfig,
    link: &Link,
    setup: &ChannelSetup,
    c: usize,
    b: usize,
) -> anyhow::Result<Vec<Tally>> {
    let n_snr = cfg.snr_grid_db.len();
    let users = cfg.users;
    let mut tallies = vec![Tally::default(); cfg.receivers.len() * n_snr * users];
    let idx = |r: usize, i: usize, k: usize| (r * n_snr + i) * users + k;
    let coords = [c as u64, b as u64];
    let k_info = link.code.k();

    if cfg.receivers.iter().any(|r| r.is_coded()) {
        let mut rng = stream(cfg.master_seed, domain::DATA, &coords);
        let mut messages = Vec::with_capacity(users);
        let mut symbols = Vec::with_capacity(users);
        for _ in 0..users {
            let m = random_message(k_info, &mut rng);
            let word = link.code.encode(&m)?;
            symbols.push(link.gray.modulate(&word)?);
            messages.push(m);
        }
        let keys = slot_keys(&symbols, cfg.alpha_s);
        let bits = link.parts.bits();
        let mut llrs = vec![0.0; link.code.n()];
        let mut received = vec![Complex64::new(0.0, 0.0); keys.len()];
        let mut ws = DecoderWorkspace::default();
        for (i, &s2) in setup.sigma_w_sq.iter().enumerate() {
            let mut noise_rng = stream(
                cfg.master_seed,
                domain::NOISE,
                &[c as u64, b as u64, i as u64],
            );
            for (k, user) in setup.users.iter().enumerate() {
                for (z, &key) in received.iter_mut().zip(&keys) {
                    *z = user.zeta[key] + complex_gaussian(&mut noise_rng, s2);
                }
                for (r, &receiver) in cfg.receivers.iter().enumerate() {
                    if !receiver.is_coded() {
                        continue;
                    }
                    let start = cfg.record_timing.then(Instant::now);
                    for (t, &z) in received.iter().enumerate() {
                        let out = &mut llrs[t * bits..(t + 1) * bits];
                        match receiver {
                            Receiver::GeneralDpa => llr_general_dpa_into(
                                z,
                                &user.stats[i],
                                &link.parts,
                                link.logdet,
                                out,
                            ),
                            Receiver::DpaLm => {
                                llr_dpa_lm_into(z, &user.models[i], &link.data, &link.parts, out)
                            }
                            Receiver::AwgnCommon => llr_awgn_baseline_into(
                                z,
                                user.models[i].h_eff,
                                s2,
                                &link.data,
                                &link.parts,
                                out,
                            ),
                            Receiver::UncodedHard => unreachable!(),
                        }
                    }
                    let outcome = spa_decode_with(&link.code, &llrs, &link.decoder, &mut ws)?;
                    let errors = count_errors(&outcome.message, &messages[k]);
                    let tally = &mut tallies[idx(r, i, k)];
                    tally.bit_errors += errors;
                    tally.block_errors += u64::from(errors > 0);
                    if let Some(start) = start {
                        tally.nanos += start.elapsed().as_nanos();
                    }
                }
            }
        }
    }

    if let Some(r) = cfg
        .receivers
        .iter()
        .position(|&r| r == Receiver::UncodedHard)
    {
        let mut rng = stream(cfg.master_seed, domain::UNCODED_DATA, &coords);
        let messages: Vec<Vec<u8>> = (0..users)
            .map(|_| random_message(k_info, &mut rng))
            .collect();
        let symbols = messages
            .iter()
            .map(|m| link.gray.modulate(m))
            .collect::<Result<Vec<_>, _>>()?;
        let keys = slot_keys(&symbols, cfg.alpha_s);
        let mut detected = Vec::with_capacity(keys.len());
        let mut bits_out = Vec::with_capacity(k_info);
        for (i, &s2) in setup.sigma_w_sq.iter().enumerate() {
            let mut noise_rng = stream(
                cfg.master_seed,
                domain::UNCODED_NOISE,
                &[c as u64, b as u64, i as u64],
            );
            for (k, user) in setup.users.iter().enumerate() {
                let start = cfg.record_timing.then(Instant::now);
                detected.clear();
                for &key in &keys {
                    let z = user.zeta[key] + complex_gaussian(&mut noise_rng, s2);
                    detected.push(hard_detect(z, user.models[i].h_eff, &link.data)?);
                }
                bits_out.clear();
                link.gray.demodulate_into(&detected, &mut bits_out);
                let errors = count_errors(&bits_out, &messages[k]);
                let tally = &mut tallies[idx(r, i, k)];
                tally.bit_errors += errors;
                tally.block_errors += u64::from(errors > 0);
                if let Some(start) = start {
                    tally.nanos += start.elapsed().as_nanos();
                }
            }
        }
    }
    Ok(tallies)
}

fn count_errors(a: &[u8], b: &[u8]) -> u64 {
    a.iter().zip(b).filter(|(x, y)| x != y).count() as u64
}

fn collect_records(
    cfg: &SimConfig,
    link: &Link,
    units: &[(usize, usize)],
    tallies: &[Vec<Tally>],
) -> Vec<ResultRecord> {
    let n_snr = cfg.snr_grid_db.len();
    let users = cfg.users;
    let mut sums = vec![Tally::default(); cfg.n_channels * cfg.receivers.len() * n_snr * users];
    for (&(c, _), unit) in units.iter().zip(tallies) {
        let base = c * unit.len();
        for (acc, t) in sums[base..base + unit.len()].iter_mut().zip(unit) {
            acc.bit_errors += t.bit_errors;
            acc.block_errors += t.block_errors;
            acc.nanos += t.nanos;
        }
    }
    let blocks = cfg.blocks_per_channel as u64;
    let bits_per_block = link.code.k() as u64;
    let seconds = |nanos: u128| {
        if cfg.record_timing {
            nanos as f64 * 1e-9
        } else {
            0.0
        }
    };
    let mut records = Vec::new();
    for (r, receiver) in cfg.receivers.iter().enumerate() {
        for (i, &snr_db) in cfg.snr_grid_db.iter().enumerate() {
            for c in 0..cfg.n_channels {
                let base = c * cfg.receivers.len() * n_snr * users + (r * n_snr + i) * users;
                let per_user = &sums[base..base + users];
                let row = |user: UserScope, t: Tally, nblocks: u64| ResultRecord {
                    receiver: receiver.id().to_string(),
                    snr_db,
                    channel: c,
                    user,
                    bit_errors: t.bit_errors,
                    bits: nblocks * bits_per_block,
                    block_errors: t.block_errors,
                    blocks: nblocks,
                    wall_time_s: seconds(t.nanos),
                };
                let mut total = Tally::default();
                for (k, t) in per_user.iter().enumerate() {
                    records.push(row(UserScope::User(k), *t, blocks));
                    total.bit_errors += t.bit_errors;
                    total.block_errors += t.block_errors;
                    total.nanos += t.nanos;
                }
                records.push(row(UserScope::All, total, blocks * users as u64));
            }
        }
    }
    records
}
