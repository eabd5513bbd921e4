//! Regular LDPC codes: seeded construction, systematic encoding and
//! flooding sum-product decoding.
//!
//! Decoder inputs follow the demapper convention, positive LLR means bit 1.

use alloc::vec::Vec;

#[cfg(not(feature = "std"))]
use num_traits::Float;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};

use crate::{Error, Result};

/// Column-construction attempts that try to avoid 4-cycles before a column
/// is placed best-effort.
const COLUMN_RETRIES: usize = 32;
/// Whole-matrix restarts when the socket assignment gets stuck.
const CONSTRUCTION_RESTARTS: u64 = 64;
const TANH_CLIP: f64 = 1.0 - 1e-12;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LdpcCode {
    n: usize,
    k: usize,
    dv: usize,
    dc: usize,
    seed: u64,
    /// Variables of every check, CSR layout.
    check_ptr: Vec<usize>,
    check_vars: Vec<u32>,
    /// Edge indices (into `check_vars`) of every variable, CSR layout.
    var_ptr: Vec<usize>,
    var_edges: Vec<u32>,
    /// Codeword positions carrying the message, in message order.
    message_positions: Vec<usize>,
    /// Free columns that are not message positions; always zero. Non-empty
    /// only when the parity-check matrix is rank deficient.
    frozen_positions: Vec<usize>,
    /// `(position, bitset over message bits)` for every pivot column.
    parity_rules: Vec<(usize, Vec<u64>)>,
    four_cycles: usize,
    restarts: u64,
}

/// Construction metadata worth recording next to results.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CodeReport {
    pub four_cycles: usize,
    pub rank_deficiency: usize,
    pub restarts: u64,
}

/// Builds a regular `(dv, dc)` code of length `n` and rate `rate` with
/// `dc = dv n / (n - k)`. Deterministic in `seed`.
pub fn build_code(n: usize, rate: f64, dv: usize, seed: u64) -> Result<LdpcCode> {
    if n == 0 || !(rate > 0.0 && rate < 1.0) {
        return Err(Error::InvalidCode(
            "length must be positive and rate in (0, 1)",
        ));
    }
    let k_real = n as f64 * rate;
    let k = k_real.round() as usize;
    if (k_real - k as f64).abs() > 1e-9 || k == 0 || k >= n {
        return Err(Error::InvalidCode("n * rate must be an integer in 1..n"));
    }
    if dv < 2 {
        return Err(Error::InvalidCode("column degree must be at least 2"));
    }
    let m = n - k;
    if !(n * dv).is_multiple_of(m) {
        return Err(Error::InvalidCode(
            "column degree does not give an integral row degree",
        ));
    }
    let dc = n * dv / m;
    if dv > m || dc > n {
        return Err(Error::InvalidCode("degrees exceed the matrix dimensions"));
    }

    for restart in 0..CONSTRUCTION_RESTARTS {
        let stream = seed ^ restart.wrapping_mul(0x9e37_79b9_7f4a_7c15);
        if let Some((rows, four_cycles)) = place_edges(n, m, dv, dc, stream) {
            return Ok(finish(n, k, dv, dc, seed, rows, four_cycles, restart));
        }
    }
    Err(Error::InvalidCode("could not place a regular edge set"))
}

/// Column-by-column socket assignment. Each column takes `dv` distinct rows,
/// preferring rows with the most free sockets (random order within a
/// level) and skipping rows that would close a 4-cycle.
fn place_edges(
    n: usize,
    m: usize,
    dv: usize,
    dc: usize,
    stream: u64,
) -> Option<(Vec<Vec<u32>>, usize)> {
    let mut rng = construction_rng(stream);
    let mut rows: Vec<Vec<u32>> = alloc::vec![Vec::with_capacity(dc); m];
    // Rows adjacent (sharing a column) to each row, as sorted lists.
    let mut neighbours: Vec<Vec<u32>> = alloc::vec![Vec::new(); m];
    let mut order: Vec<u32> = (0..m as u32).collect();
    let mut four_cycles = 0;
    let mut chosen: Vec<u32> = Vec::with_capacity(dv);

    for col in 0..n {
        let mut placed = false;
        for _ in 0..COLUMN_RETRIES {
            order.shuffle(&mut rng);
            order.sort_by_key(|&r| core::cmp::Reverse(dc - rows[r as usize].len()));
            chosen.clear();
            for &r in &order {
                if rows[r as usize].len() >= dc {
                    break;
                }
                let creates_cycle = chosen
                    .iter()
                    .any(|&c| neighbours[r as usize].binary_search(&c).is_ok());
                if !creates_cycle {
                    chosen.push(r);
                    if chosen.len() == dv {
                        break;
                    }
                }
            }
            if chosen.len() == dv {
                placed = true;
                break;
            }
        }
        if !placed {
            // Best effort: the rows with the most free sockets.
            order.sort_by_key(|&r| core::cmp::Reverse(dc - rows[r as usize].len()));
            chosen.clear();
            chosen.extend(
                order
                    .iter()
                    .copied()
                    .filter(|&r| rows[r as usize].len() < dc)
                    .take(dv),
            );
            if chosen.len() < dv {
                return None;
            }
            for (i, &a) in chosen.iter().enumerate() {
                for &b in &chosen[i + 1..] {
                    if neighbours[a as usize].binary_search(&b).is_ok() {
                        four_cycles += 1;
                    }
                }
            }
        }
        for (i, &a) in chosen.iter().enumerate() {
            rows[a as usize].push(col as u32);
            for &b in chosen.iter().skip(i + 1) {
                insert_sorted(&mut neighbours[a as usize], b);
                insert_sorted(&mut neighbours[b as usize], a);
            }
        }
    }
    Some((rows, four_cycles))
}

fn insert_sorted(v: &mut Vec<u32>, x: u32) {
    if let Err(pos) = v.binary_search(&x) {
        v.insert(pos, x);
    }
}

fn construction_rng(seed: u64) -> rand::rngs::SmallRng {
    rand::rngs::SmallRng::seed_from_u64(seed)
}

#[allow(clippy::too_many_arguments)]
fn finish(
    n: usize,
    k: usize,
    dv: usize,
    dc: usize,
    seed: u64,
    rows: Vec<Vec<u32>>,
    four_cycles: usize,
    restarts: u64,
) -> LdpcCode {
    let m = rows.len();
    let mut check_ptr = Vec::with_capacity(m + 1);
    let mut check_vars = Vec::with_capacity(n * dv);
    check_ptr.push(0);
    for row in &rows {
        let mut sorted = row.clone();
        sorted.sort_unstable();
        check_vars.extend(sorted);
        check_ptr.push(check_vars.len());
    }
    let mut degree = alloc::vec![0usize; n];
    for &v in &check_vars {
        degree[v as usize] += 1;
    }
    let mut var_ptr = Vec::with_capacity(n + 1);
    var_ptr.push(0);
    for d in &degree {
        var_ptr.push(var_ptr.last().unwrap() + d);
    }
    let mut fill = var_ptr.clone();
    let mut var_edges = alloc::vec![0u32; check_vars.len()];
    for (e, &v) in check_vars.iter().enumerate() {
        var_edges[fill[v as usize]] = e as u32;
        fill[v as usize] += 1;
    }

    let (message_positions, frozen_positions, parity_rules) = systematic_form(n, k, &rows);
    LdpcCode {
        n,
        k,
        dv,
        dc,
        seed,
        check_ptr,
        check_vars,
        var_ptr,
        var_edges,
        message_positions,
        frozen_positions,
        parity_rules,
        four_cycles,
        restarts,
    }
}

/// Gauss-Jordan elimination of H over GF(2). Pivot columns carry parity;
/// the last `k` free columns carry the message and any other free columns
/// are frozen to zero.
#[allow(clippy::type_complexity)]
fn systematic_form(
    n: usize,
    k: usize,
    rows: &[Vec<u32>],
) -> (Vec<usize>, Vec<usize>, Vec<(usize, Vec<u64>)>) {
    let words = n.div_ceil(64);
    let mut dense: Vec<Vec<u64>> = rows
        .iter()
        .map(|row| {
            let mut bits = alloc::vec![0u64; words];
            for &v in row {
                bits[v as usize / 64] ^= 1 << (v % 64);
            }
            bits
        })
        .collect();
    let m = dense.len();
    let mut pivots: Vec<usize> = Vec::with_capacity(m);
    let mut rank = 0;
    for col in 0..n {
        if rank == m {
            break;
        }
        let (w, b) = (col / 64, col % 64);
        let Some(p) = (rank..m).find(|&r| dense[r][w] >> b & 1 == 1) else {
            continue;
        };
        dense.swap(rank, p);
        let pivot_row = dense[rank].clone();
        for (r, row) in dense.iter_mut().enumerate() {
            if r != rank && row[w] >> b & 1 == 1 {
                for (x, y) in row.iter_mut().zip(&pivot_row) {
                    *x ^= y;
                }
            }
        }
        pivots.push(col);
        rank += 1;
    }
    let mut is_pivot = alloc::vec![false; n];
    for &p in &pivots {
        is_pivot[p] = true;
    }
    let free: Vec<usize> = (0..n).filter(|&c| !is_pivot[c]).collect();
    let split = free.len() - k;
    let frozen = free[..split].to_vec();
    let message = free[split..].to_vec();

    let msg_words = k.div_ceil(64);
    let rules = pivots
        .iter()
        .enumerate()
        .map(|(r, &col)| {
            let mut mask = alloc::vec![0u64; msg_words];
            for (i, &pos) in message.iter().enumerate() {
                if dense[r][pos / 64] >> (pos % 64) & 1 == 1 {
                    mask[i / 64] |= 1 << (i % 64);
                }
            }
            (col, mask)
        })
        .collect();
    (message, frozen, rules)
}

impl LdpcCode {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn checks(&self) -> usize {
        self.check_ptr.len() - 1
    }

    pub fn column_degree(&self) -> usize {
        self.dv
    }

    pub fn row_degree(&self) -> usize {
        self.dc
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn report(&self) -> CodeReport {
        CodeReport {
            four_cycles: self.four_cycles,
            rank_deficiency: self.frozen_positions.len(),
            restarts: self.restarts,
        }
    }

    /// Rank of the parity-check matrix over GF(2).
    pub fn rank(&self) -> usize {
        self.parity_rules.len()
    }

    /// Rank once the frozen positions are included as unit checks; always
    /// `n - k`.
    pub fn effective_rank(&self) -> usize {
        self.parity_rules.len() + self.frozen_positions.len()
    }

    /// Positions frozen to zero to repair a rank-deficient matrix.
    pub fn frozen_positions(&self) -> &[usize] {
        &self.frozen_positions
    }

    /// Variable indices of check `c`, ascending.
    pub fn check(&self, c: usize) -> &[u32] {
        &self.check_vars[self.check_ptr[c]..self.check_ptr[c + 1]]
    }

    /// Check indices of variable `v`, ascending.
    pub fn variable(&self, v: usize) -> Vec<usize> {
        let mut out: Vec<usize> = self.var_edges[self.var_ptr[v]..self.var_ptr[v + 1]]
            .iter()
            .map(|&e| self.check_of_edge(e as usize))
            .collect();
        out.sort_unstable();
        out
    }

    fn check_of_edge(&self, e: usize) -> usize {
        self.check_ptr.partition_point(|&p| p <= e) - 1
    }

    pub fn message_positions(&self) -> &[usize] {
        &self.message_positions
    }

    /// Number of unsatisfied checks for a hard-decision word.
    pub fn syndrome_weight(&self, word: &[u8]) -> usize {
        (0..self.checks())
            .filter(|&c| {
                self.check(c)
                    .iter()
                    .fold(0u8, |acc, &v| acc ^ (word[v as usize] & 1))
                    == 1
            })
            .count()
    }

    /// Systematic encoding: message bits land on [`Self::message_positions`].
    pub fn encode(&self, message: &[u8]) -> Result<Vec<u8>> {
        if message.len() != self.k {
            return Err(Error::Dimension {
                expected: self.k,
                got: message.len(),
            });
        }
        let mut packed = alloc::vec![0u64; self.k.div_ceil(64)];
        for (i, &b) in message.iter().enumerate() {
            packed[i / 64] |= u64::from(b & 1) << (i % 64);
        }
        let mut word = alloc::vec![0u8; self.n];
        for (&pos, &b) in self.message_positions.iter().zip(message) {
            word[pos] = b & 1;
        }
        for (pos, mask) in &self.parity_rules {
            let ones: u32 = mask
                .iter()
                .zip(&packed)
                .map(|(a, b)| (a & b).count_ones())
                .sum();
            word[*pos] = (ones & 1) as u8;
        }
        Ok(word)
    }

    pub fn extract_message(&self, word: &[u8]) -> Vec<u8> {
        self.message_positions.iter().map(|&p| word[p]).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DecoderConfig {
    pub max_iterations: usize,
    /// Stop as soon as every check is satisfied.
    pub early_stop: bool,
}

impl Default for DecoderConfig {
    fn default() -> Self {
        Self {
            max_iterations: 50,
            early_stop: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecodeOutcome {
    pub message: Vec<u8>,
    pub codeword: Vec<u8>,
    pub iterations: usize,
    /// True iff every check is satisfied on exit.
    pub converged: bool,
    /// Checks that are violated or touch an undecided bit (posterior LLR
    /// exactly zero).
    pub unsatisfied_checks: usize,
}

/// Reusable message buffers for [`spa_decode_with`].
#[derive(Debug, Default, Clone)]
pub struct DecoderWorkspace {
    prior: Vec<f64>,
    v2c: Vec<f64>,
    c2v: Vec<f64>,
    posterior: Vec<f64>,
    scratch: Vec<f64>,
}

/// Flooding sum-product decoding with tanh-rule check updates.
pub fn spa_decode(code: &LdpcCode, llrs: &[f64], cfg: &DecoderConfig) -> Result<DecodeOutcome> {
    spa_decode_with(code, llrs, cfg, &mut DecoderWorkspace::default())
}

pub fn spa_decode_with(
    code: &LdpcCode,
    llrs: &[f64],
    cfg: &DecoderConfig,
    ws: &mut DecoderWorkspace,
) -> Result<DecodeOutcome> {
    if llrs.len() != code.n {
        return Err(Error::Dimension {
            expected: code.n,
            got: llrs.len(),
        });
    }
    if cfg.max_iterations == 0 {
        return Err(Error::InvalidCode("max_iterations must be at least 1"));
    }
    let edges = code.check_vars.len();
    // Internally log(P0 / P1), the usual sum-product orientation.
    ws.prior.clear();
    ws.prior.extend(llrs.iter().map(|l| -l));
    ws.v2c.clear();
    ws.v2c
        .extend(code.check_vars.iter().map(|&v| ws.prior[v as usize]));
    ws.c2v.clear();
    ws.c2v.resize(edges, 0.0);
    ws.posterior.clear();
    ws.posterior.resize(code.n, 0.0);

    let mut word = alloc::vec![0u8; code.n];
    let mut iterations = 0;
    let mut unsatisfied = code.checks();
    while iterations < cfg.max_iterations {
        iterations += 1;
        for c in 0..code.checks() {
            let range = code.check_ptr[c]..code.check_ptr[c + 1];
            check_update(&ws.v2c[range.clone()], &mut ws.c2v[range], &mut ws.scratch);
        }
        for (v, bit) in word.iter_mut().enumerate() {
            let es = &code.var_edges[code.var_ptr[v]..code.var_ptr[v + 1]];
            let total = ws.prior[v] + es.iter().map(|&e| ws.c2v[e as usize]).sum::<f64>();
            for &e in es {
                ws.v2c[e as usize] = total - ws.c2v[e as usize];
            }
            ws.posterior[v] = total;
            *bit = u8::from(total < 0.0);
        }
        unsatisfied = unsatisfied_checks(code, &word, &ws.posterior);
        if unsatisfied == 0 && cfg.early_stop {
            break;
        }
    }
    Ok(DecodeOutcome {
        message: code.extract_message(&word),
        codeword: word,
        iterations,
        converged: unsatisfied == 0,
        unsatisfied_checks: unsatisfied,
    })
}

fn unsatisfied_checks(code: &LdpcCode, word: &[u8], posterior: &[f64]) -> usize {
    (0..code.checks())
        .filter(|&c| {
            let vars = code.check(c);
            vars.iter().any(|&v| posterior[v as usize] == 0.0)
                || vars.iter().fold(0u8, |acc, &v| acc ^ word[v as usize]) == 1
        })
        .count()
}

/// `out_e = 2 atanh(prod_{f != e} tanh(in_f / 2))` using prefix and suffix
/// products so zero inputs need no division.
#[inline]
fn check_update(input: &[f64], out: &mut [f64], scratch: &mut Vec<f64>) {
    let d = input.len();
    scratch.clear();
    scratch.extend(
        input
            .iter()
            .map(|&l| (l / 2.0).tanh().clamp(-TANH_CLIP, TANH_CLIP)),
    );
    let mut prefix = 1.0;
    for (e, o) in out.iter_mut().enumerate() {
        *o = prefix;
        prefix *= scratch[e];
    }
    let mut suffix = 1.0;
    for e in (0..d).rev() {
        let p = (out[e] * suffix).clamp(-TANH_CLIP, TANH_CLIP);
        out[e] = 2.0 * p.atanh();
        suffix *= scratch[e];
    }
}

/// Draws a uniformly random message of `k` bits.
pub fn random_message<R: Rng + ?Sized>(k: usize, rng: &mut R) -> Vec<u8> {
    (0..k).map(|_| rng.random_range(0..2u8)).collect()
}
