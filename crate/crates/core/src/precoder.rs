//! Lookup-table precoders with a discrete PSK transmit alphabet.
//!
//! For one channel realization the base station tabulates the transmit
//! vector `x(s)` for every user-symbol vector `s`. Keys are K-digit base
//! `alpha_s` numbers with user 0 as the most significant digit; entries are
//! alphabet indices into the transmit PSK alphabet.

use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::channel::ChannelMatrix;
use crate::linalg::right_pseudo_inverse;
use crate::modem::PskAlphabet;
use crate::{key_digit, Complex64, Error, Result};

/// Largest transmit search space `alpha_x^B` the exhaustive precoder accepts.
pub const EXHAUSTIVE_BUDGET: u64 = 1 << 24;
/// Largest number of table keys `alpha_s^K`.
pub const TABLE_BUDGET: u64 = 1 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PrecoderSpec {
    /// Zero-forcing followed by per-antenna phase quantization.
    ZfPhase,
    /// Exhaustive search minimising `||s - g H x||^2` over the transmit
    /// alphabet and a real receive-side scale `g >= 0`.
    MmseExhaustive,
}

impl PrecoderSpec {
    pub fn as_str(&self) -> &'static str {
        match self {
            PrecoderSpec::ZfPhase => "zf_phase",
            PrecoderSpec::MmseExhaustive => "mmse_exhaustive",
        }
    }
}

impl fmt::Display for PrecoderSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PrecoderSpec {
    type Err = ();

    fn from_str(s: &str) -> core::result::Result<Self, ()> {
        match s {
            "zf_phase" => Ok(PrecoderSpec::ZfPhase),
            "mmse_exhaustive" => Ok(PrecoderSpec::MmseExhaustive),
            _ => Err(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TableMeta {
    pub users: usize,
    pub antennas: usize,
    pub alpha_s: usize,
    pub alpha_x: usize,
    pub precoder: PrecoderSpec,
    pub channel_fingerprint: u64,
}

impl TableMeta {
    pub fn keys(&self) -> usize {
        self.alpha_s.pow(self.users as u32)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LookupTable {
    meta: TableMeta,
    /// `keys * antennas` transmit alphabet indices.
    entries: Vec<u8>,
}

impl LookupTable {
    /// Assembles a table from raw parts, checking sizes and index ranges.
    pub fn from_parts(meta: TableMeta, entries: Vec<u8>) -> Result<Self> {
        if meta.users == 0 || meta.antennas == 0 {
            return Err(Error::TableMismatch("empty dimensions"));
        }
        for order in [meta.alpha_s, meta.alpha_x] {
            if !(2..=64).contains(&order) || !order.is_power_of_two() {
                return Err(Error::InvalidOrder(order));
            }
        }
        let keys = (meta.alpha_s as u64)
            .checked_pow(meta.users as u32)
            .unwrap_or(u64::MAX);
        if keys > TABLE_BUDGET {
            return Err(Error::SearchBudget(keys));
        }
        let expected = meta.keys() * meta.antennas;
        if entries.len() != expected {
            return Err(Error::Dimension {
                expected,
                got: entries.len(),
            });
        }
        if entries.iter().any(|&e| e as usize >= meta.alpha_x) {
            return Err(Error::TableMismatch("transmit index outside the alphabet"));
        }
        Ok(Self { meta, entries })
    }

    pub fn meta(&self) -> &TableMeta {
        &self.meta
    }

    pub fn len(&self) -> usize {
        self.meta.keys()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[u8] {
        &self.entries
    }

    /// Transmit alphabet indices for table key `key`.
    #[inline]
    pub fn entry(&self, key: usize) -> &[u8] {
        let b = self.meta.antennas;
        &self.entries[key * b..(key + 1) * b]
    }

    /// Symbol index of user `k` inside table key `key`.
    #[inline]
    pub fn user_symbol(&self, key: usize, k: usize) -> usize {
        key_digit(key, k, self.meta.users, self.meta.alpha_s)
    }

    /// Table key for per-user symbol indices.
    pub fn key_of(&self, symbols: &[usize]) -> usize {
        symbols
            .iter()
            .fold(0, |key, &s| key * self.meta.alpha_s + s)
    }

    pub fn transmit_vector(&self, key: usize, tx: &PskAlphabet) -> Vec<Complex64> {
        self.entry(key)
            .iter()
            .map(|&i| tx.symbol(i as usize))
            .collect()
    }

    /// `zeta(s) = h_row . x(s)` for every key, in key order.
    pub fn noiseless_receive(
        &self,
        h_row: &[Complex64],
        tx: &PskAlphabet,
    ) -> Result<Vec<Complex64>> {
        self.check_alphabets(None, tx)?;
        if h_row.len() != self.meta.antennas {
            return Err(Error::Dimension {
                expected: self.meta.antennas,
                got: h_row.len(),
            });
        }
        Ok((0..self.len())
            .map(|key| {
                self.entry(key)
                    .iter()
                    .zip(h_row)
                    .fold(Complex64::new(0.0, 0.0), |acc, (&i, h)| {
                        acc + h * tx.symbol(i as usize)
                    })
            })
            .collect())
    }

    pub(crate) fn check_alphabets(
        &self,
        data: Option<&PskAlphabet>,
        tx: &PskAlphabet,
    ) -> Result<()> {
        if let Some(s) = data {
            if s.order() != self.meta.alpha_s {
                return Err(Error::TableMismatch("data alphabet order"));
            }
        }
        if tx.order() != self.meta.alpha_x {
            return Err(Error::TableMismatch("transmit alphabet order"));
        }
        Ok(())
    }
}

/// Zero-forcing `u = H^H (H H^H)^{-1} s` followed by nearest-angle
/// quantization of every `u_b` onto the transmit alphabet.
pub fn zf_phase_precode(
    h: &ChannelMatrix,
    s: &[Complex64],
    tx: &PskAlphabet,
) -> Result<Vec<usize>> {
    ZfPhase::new(h)?.precode(s, tx)
}

/// The unquantized zero-forcing vector.
pub fn zero_forcing(h: &ChannelMatrix, s: &[Complex64]) -> Result<Vec<Complex64>> {
    ZfPhase::new(h)?.unquantized(s)
}

struct ZfPhase {
    users: usize,
    antennas: usize,
    pinv: Vec<Complex64>,
}

impl ZfPhase {
    fn new(h: &ChannelMatrix) -> Result<Self> {
        Ok(Self {
            users: h.users(),
            antennas: h.antennas(),
            pinv: right_pseudo_inverse(h)?,
        })
    }

    fn unquantized(&self, s: &[Complex64]) -> Result<Vec<Complex64>> {
        if s.len() != self.users {
            return Err(Error::Dimension {
                expected: self.users,
                got: s.len(),
            });
        }
        let k = self.users;
        Ok((0..self.antennas)
            .map(|b| {
                (0..k).fold(Complex64::new(0.0, 0.0), |acc, j| {
                    acc + self.pinv[b * k + j] * s[j]
                })
            })
            .collect())
    }

    fn precode(&self, s: &[Complex64], tx: &PskAlphabet) -> Result<Vec<usize>> {
        Ok(self
            .unquantized(s)?
            .into_iter()
            .map(|u| tx.nearest_by_angle(u))
            .collect())
    }
}

/// Exhaustive discrete MMSE precoding for a single symbol vector.
///
/// Maximises `max(Re((Hx)^H s), 0)^2 / ||Hx||^2` over all of `tx^B`; ties go
/// to the lexicographically smallest index vector (antenna 0 most
/// significant).
pub fn mmse_exhaustive_precode(
    h: &ChannelMatrix,
    s: &[Complex64],
    tx: &PskAlphabet,
) -> Result<Vec<usize>> {
    if s.len() != h.users() {
        return Err(Error::Dimension {
            expected: h.users(),
            got: s.len(),
        });
    }
    let search = MmseSearch::new(h, tx)?;
    let best = search.best_for(&[s]);
    Ok(search.digits(best[0]))
}

/// Objective of the exhaustive precoder for one candidate. Returns
/// `-inf` when `Hx = 0`.
pub fn mmse_objective(h: &ChannelMatrix, x: &[Complex64], s: &[Complex64]) -> f64 {
    let v: Vec<Complex64> = (0..h.users())
        .map(|k| crate::channel::dot(h.row(k), x))
        .collect();
    objective(&v, s)
}

#[inline]
fn objective(v: &[Complex64], s: &[Complex64]) -> f64 {
    let mut corr = 0.0;
    let mut energy = 0.0;
    for (a, b) in v.iter().zip(s) {
        corr += a.re * b.re + a.im * b.im;
        energy += a.re * a.re + a.im * a.im;
    }
    if energy == 0.0 {
        return f64::NEG_INFINITY;
    }
    let c = if corr > 0.0 { corr } else { 0.0 };
    c * c / energy
}

struct MmseSearch {
    users: usize,
    antennas: usize,
    alpha_x: usize,
    /// `H x` for every candidate, candidate-major.
    received: Vec<Complex64>,
}

impl MmseSearch {
    fn new(h: &ChannelMatrix, tx: &PskAlphabet) -> Result<Self> {
        let users = h.users();
        let antennas = h.antennas();
        let alpha_x = tx.order();
        let candidates = (alpha_x as u64)
            .checked_pow(antennas as u32)
            .unwrap_or(u64::MAX);
        if candidates > EXHAUSTIVE_BUDGET {
            return Err(Error::SearchBudget(candidates));
        }
        let candidates = candidates as usize;
        // Column contributions H[:, b] * x_j, indexed [b][j][k].
        let mut contrib = Vec::with_capacity(antennas * alpha_x * users);
        for b in 0..antennas {
            for j in 0..alpha_x {
                for k in 0..users {
                    contrib.push(h.get(k, b) * tx.symbol(j));
                }
            }
        }
        let mut received = Vec::with_capacity(candidates * users);
        let mut digits = alloc::vec![0usize; antennas];
        for _ in 0..candidates {
            for k in 0..users {
                let mut acc = Complex64::new(0.0, 0.0);
                for (b, &d) in digits.iter().enumerate() {
                    acc += contrib[(b * alpha_x + d) * users + k];
                }
                received.push(acc);
            }
            // odometer, last antenna fastest
            for d in digits.iter_mut().rev() {
                *d += 1;
                if *d < alpha_x {
                    break;
                }
                *d = 0;
            }
        }
        Ok(Self {
            users,
            antennas,
            alpha_x,
            received,
        })
    }

    /// Best candidate index for each symbol vector.
    fn best_for(&self, targets: &[&[Complex64]]) -> Vec<usize> {
        let mut best = alloc::vec![0usize; targets.len()];
        let mut best_value = alloc::vec![f64::NEG_INFINITY; targets.len()];
        for (c, v) in self.received.chunks_exact(self.users).enumerate() {
            for (t, s) in targets.iter().enumerate() {
                let value = objective(v, s);
                if value > best_value[t] {
                    best_value[t] = value;
                    best[t] = c;
                }
            }
        }
        best
    }

    fn digits(&self, candidate: usize) -> Vec<usize> {
        let mut out = alloc::vec![0usize; self.antennas];
        let mut c = candidate;
        for d in out.iter_mut().rev() {
            *d = c % self.alpha_x;
            c /= self.alpha_x;
        }
        out
    }
}

/// Builds the lookup table for every `s` in `data^K`. A pure function of its
/// inputs.
pub fn build_lookup_table(
    h: &ChannelMatrix,
    spec: PrecoderSpec,
    data: &PskAlphabet,
    tx: &PskAlphabet,
) -> Result<LookupTable> {
    let users = h.users();
    let antennas = h.antennas();
    let keys = (data.order() as u64)
        .checked_pow(users as u32)
        .unwrap_or(u64::MAX);
    if keys > TABLE_BUDGET {
        return Err(Error::SearchBudget(keys));
    }
    let meta = TableMeta {
        users,
        antennas,
        alpha_s: data.order(),
        alpha_x: tx.order(),
        precoder: spec,
        channel_fingerprint: h.fingerprint(),
    };
    let keys = keys as usize;
    let symbol_vector = |key: usize| -> Vec<Complex64> {
        (0..users)
            .map(|k| data.symbol(key_digit(key, k, users, data.order())))
            .collect()
    };
    let mut entries = Vec::with_capacity(keys * antennas);
    match spec {
        PrecoderSpec::ZfPhase => {
            let zf = ZfPhase::new(h)?;
            for key in 0..keys {
                let x = zf.precode(&symbol_vector(key), tx)?;
                entries.extend(x.into_iter().map(|i| i as u8));
            }
        }
        PrecoderSpec::MmseExhaustive => {
            let search = MmseSearch::new(h, tx)?;
            let vectors: Vec<Vec<Complex64>> = (0..keys).map(symbol_vector).collect();
            let refs: Vec<&[Complex64]> = vectors.iter().map(|v| v.as_slice()).collect();
            for best in search.best_for(&refs) {
                entries.extend(search.digits(best).into_iter().map(|i| i as u8));
            }
        }
    }
    LookupTable::from_parts(meta, entries)
}

#[derive(Debug, Clone, PartialEq)]
pub enum SymmetryReport {
    /// Rotations by the transmit alphabet's step do not map `S^K` onto itself.
    NotApplicable,
    Checked {
        max_deviation: f64,
        /// Table key and rotation step `m` of the largest deviation, if any.
        worst: Option<(usize, usize)>,
        violations: usize,
    },
}

impl SymmetryReport {
    pub fn max_deviation(&self) -> Option<f64> {
        match self {
            SymmetryReport::NotApplicable => None,
            SymmetryReport::Checked { max_deviation, .. } => Some(*max_deviation),
        }
    }
}

/// Checks `x(s e^{j phi}) = x(s) e^{j phi}` for every key and every
/// `phi = 2 pi m / alpha_x`, `m = 1..alpha_x`, by table lookup.
pub fn check_circular_symmetry(table: &LookupTable, tx: &PskAlphabet) -> SymmetryReport {
    let meta = table.meta();
    if meta.alpha_s != meta.alpha_x || tx.order() != meta.alpha_x {
        return SymmetryReport::NotApplicable;
    }
    let alpha = meta.alpha_s;
    let users = meta.users;
    let mut max_deviation = 0.0;
    let mut worst = None;
    let mut violations = 0;
    let mut digits = alloc::vec![0usize; users];
    for key in 0..table.len() {
        for (k, d) in digits.iter_mut().enumerate() {
            *d = key_digit(key, k, users, alpha);
        }
        let x = table.entry(key);
        for m in 1..alpha {
            let rotated_key = digits
                .iter()
                .fold(0, |acc, &d| acc * alpha + (d + m) % alpha);
            let xr = table.entry(rotated_key);
            let mut dev: f64 = 0.0;
            for (&a, &b) in x.iter().zip(xr) {
                let expected = tx.rotate_index(a as usize, m);
                if expected != b as usize {
                    dev = dev.max((tx.symbol(b as usize) - tx.symbol(expected)).norm());
                }
            }
            if dev > 0.0 {
                violations += 1;
                if dev > max_deviation {
                    max_deviation = dev;
                    worst = Some((key, m));
                }
            }
        }
    }
    SymmetryReport::Checked {
        max_deviation,
        worst,
        violations,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{draw_channel, FadingConfig};
    use core::f64::consts::PI;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn scalar(c: Complex64) -> ChannelMatrix {
        ChannelMatrix::from_rows(1, 1, alloc::vec![c]).unwrap()
    }

    fn random_channel(k: usize, b: usize, seed: u64) -> ChannelMatrix {
        draw_channel(
            &FadingConfig::uniform(k, b, seed),
            &mut ChaCha8Rng::seed_from_u64(seed),
        )
        .unwrap()
    }

    fn symbols(a: &PskAlphabet, idx: &[usize]) -> Vec<Complex64> {
        idx.iter().map(|&i| a.symbol(i)).collect()
    }

    #[test]
    fn zf_identity_channel_is_identity() {
        let a = PskAlphabet::new(4).unwrap();
        let h = scalar(Complex64::new(1.0, 0.0));
        for i in 0..4 {
            assert_eq!(
                zf_phase_precode(&h, &[a.symbol(i)], &a).unwrap(),
                alloc::vec![i]
            );
        }
    }

    #[test]
    fn zf_quantizer_picks_nearest_angle() {
        let a = PskAlphabet::new(4).unwrap();
        let h = scalar(Complex64::from_polar(1.0, PI / 16.0));
        let s = Complex64::from_polar(1.0, PI / 4.0);
        let u = zero_forcing(&h, &[s]).unwrap()[0];
        assert!((u.arg() - (PI / 4.0 - PI / 16.0)).abs() < 1e-12);
        // Enumerate the four candidates by angular distance.
        let dist = |x: Complex64| (x.conj() * u).arg().abs();
        let expect = (0..4)
            .min_by(|&p, &q| dist(a.symbol(p)).total_cmp(&dist(a.symbol(q))))
            .unwrap();
        let got = zf_phase_precode(&h, &[s], &a).unwrap()[0];
        assert_eq!(got, expect);
        assert!((a.symbol(got).arg() - PI / 4.0).abs() < 1e-12);
    }

    #[test]
    fn zf_inverts_the_channel_before_quantization() {
        let a = PskAlphabet::new(4).unwrap();
        let h = random_channel(2, 4, 4);
        let s = symbols(&a, &[1, 3]);
        let u = zero_forcing(&h, &s).unwrap();
        for k in 0..2 {
            let y = crate::channel::dot(h.row(k), &u);
            assert!((y - s[k]).norm() < 1e-10);
        }
    }

    #[test]
    fn zf_rejects_rank_deficient_channel() {
        let one = Complex64::new(1.0, 0.0);
        let h = ChannelMatrix::from_rows(2, 2, alloc::vec![one, one, one, one]).unwrap();
        let a = PskAlphabet::new(4).unwrap();
        assert_eq!(
            zf_phase_precode(&h, &[one, one], &a),
            Err(Error::DegenerateChannel)
        );
        assert_eq!(
            build_lookup_table(&h, PrecoderSpec::ZfPhase, &a, &a),
            Err(Error::DegenerateChannel)
        );
    }

    #[test]
    fn mmse_scalar_identity() {
        let a = PskAlphabet::new(4).unwrap();
        let h = scalar(Complex64::new(1.0, 0.0));
        for i in 0..4 {
            assert_eq!(
                mmse_exhaustive_precode(&h, &[a.symbol(i)], &a).unwrap(),
                alloc::vec![i]
            );
        }
    }

    fn brute_force(h: &ChannelMatrix, s: &[Complex64], tx: &PskAlphabet) -> (Vec<usize>, f64) {
        let b = h.antennas();
        let n = tx.order().pow(b as u32);
        let mut best = (Vec::new(), f64::NEG_INFINITY);
        for c in 0..n {
            let mut idx = alloc::vec![0; b];
            let mut r = c;
            for d in idx.iter_mut().rev() {
                *d = r % tx.order();
                r /= tx.order();
            }
            let x = symbols(tx, &idx);
            let v: Vec<Complex64> = (0..h.users())
                .map(|k| crate::channel::dot(h.row(k), &x))
                .collect();
            // min over real g >= 0 of ||s - g v||^2, computed directly
            let corr: f64 = v.iter().zip(s).map(|(p, q)| (p.conj() * q).re).sum();
            let energy: f64 = v.iter().map(|p| p.norm_sqr()).sum();
            let g = if energy > 0.0 {
                (corr / energy).max(0.0)
            } else {
                0.0
            };
            let resid: f64 = v.iter().zip(s).map(|(p, q)| (q - p * g).norm_sqr()).sum();
            let s_energy: f64 = s.iter().map(|q| q.norm_sqr()).sum();
            let value = s_energy - resid;
            if value > best.1 + 1e-12 {
                best = (idx, value);
            }
        }
        best
    }

    #[test]
    fn mmse_coherent_combining() {
        let a = PskAlphabet::new(4).unwrap();
        let one = Complex64::new(1.0, 0.0);
        let h = ChannelMatrix::from_rows(1, 2, alloc::vec![one, one]).unwrap();
        let s = Complex64::from_polar(1.0, PI / 4.0);
        let x = mmse_exhaustive_precode(&h, &[s], &a).unwrap();
        let (oracle, _) = brute_force(&h, &[s], &a);
        assert_eq!(x, oracle);
        for i in x {
            assert!((a.symbol(i).arg() - PI / 4.0).abs() < 1e-12);
        }
    }

    #[test]
    fn mmse_matches_full_enumeration() {
        let a = PskAlphabet::new(4).unwrap();
        for seed in 0..3 {
            let h = random_channel(3, 6, 100 + seed);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let idx: Vec<usize> = (0..3).map(|_| rng.random_range(0..4)).collect();
            let s = symbols(&a, &idx);
            let x = mmse_exhaustive_precode(&h, &s, &a).unwrap();
            let (oracle, best) = brute_force(&h, &s, &a);
            assert_eq!(x, oracle);
            let got = mmse_objective(&h, &symbols(&a, &x), &s);
            assert!((got - best).abs() < 1e-9);
        }
    }

    #[test]
    fn mmse_beats_random_candidates() {
        let tx = PskAlphabet::new(8).unwrap();
        let data = PskAlphabet::new(4).unwrap();
        let h = random_channel(3, 6, 77);
        let s = symbols(&data, &[0, 2, 3]);
        let x = mmse_exhaustive_precode(&h, &s, &tx).unwrap();
        let best = mmse_objective(&h, &symbols(&tx, &x), &s);
        let mut rng = ChaCha8Rng::seed_from_u64(78);
        for _ in 0..10_000 {
            let cand: Vec<Complex64> = (0..6).map(|_| tx.symbol(rng.random_range(0..8))).collect();
            assert!(best >= mmse_objective(&h, &cand, &s));
        }
    }

    #[test]
    fn mmse_budget_is_enforced() {
        let tx = PskAlphabet::new(64).unwrap();
        let h = random_channel(1, 5, 1);
        let s = [Complex64::new(1.0, 0.0)];
        assert_eq!(
            mmse_exhaustive_precode(&h, &s, &tx),
            Err(Error::SearchBudget(1 << 30))
        );
    }

    #[test]
    fn table_sizes_and_identity() {
        let a = PskAlphabet::new(4).unwrap();
        let h = random_channel(3, 6, 5);
        let t = build_lookup_table(&h, PrecoderSpec::ZfPhase, &a, &a).unwrap();
        assert_eq!(t.len(), 64);
        assert_eq!(t.entries().len(), 64 * 6);
        assert_eq!(t.meta().channel_fingerprint, h.fingerprint());

        let id = build_lookup_table(
            &scalar(Complex64::new(1.0, 0.0)),
            PrecoderSpec::MmseExhaustive,
            &a,
            &a,
        )
        .unwrap();
        for key in 0..4 {
            assert_eq!(id.entry(key), &[key as u8]);
        }
    }

    #[test]
    fn table_matches_standalone_precoders() {
        let a = PskAlphabet::new(4).unwrap();
        let h = random_channel(2, 3, 6);
        for spec in [PrecoderSpec::ZfPhase, PrecoderSpec::MmseExhaustive] {
            let t = build_lookup_table(&h, spec, &a, &a).unwrap();
            for key in 0..t.len() {
                let s: Vec<Complex64> = (0..2).map(|k| a.symbol(t.user_symbol(key, k))).collect();
                let x = match spec {
                    PrecoderSpec::ZfPhase => zf_phase_precode(&h, &s, &a).unwrap(),
                    PrecoderSpec::MmseExhaustive => mmse_exhaustive_precode(&h, &s, &a).unwrap(),
                };
                let stored: Vec<usize> = t.entry(key).iter().map(|&i| i as usize).collect();
                assert_eq!(stored, x, "{spec} key {key}");
            }
            assert_eq!(t, build_lookup_table(&h, spec, &a, &a).unwrap());
        }
    }

    #[test]
    fn key_layout_user_zero_most_significant() {
        let a = PskAlphabet::new(4).unwrap();
        let t =
            build_lookup_table(&random_channel(3, 3, 8), PrecoderSpec::ZfPhase, &a, &a).unwrap();
        assert_eq!(t.key_of(&[1, 2, 3]), 16 + 8 + 3);
        assert_eq!(t.user_symbol(27, 0), 1);
        assert_eq!(t.user_symbol(27, 1), 2);
        assert_eq!(t.user_symbol(27, 2), 3);
    }

    #[test]
    fn symmetry_of_identity_and_built_tables() {
        let a = PskAlphabet::new(4).unwrap();
        let id = build_lookup_table(
            &scalar(Complex64::new(1.0, 0.0)),
            PrecoderSpec::MmseExhaustive,
            &a,
            &a,
        )
        .unwrap();
        assert_eq!(check_circular_symmetry(&id, &a).max_deviation(), Some(0.0));
        for seed in 0..4 {
            let h = random_channel(3, 6, 40 + seed);
            for spec in [PrecoderSpec::ZfPhase, PrecoderSpec::MmseExhaustive] {
                let t = build_lookup_table(&h, spec, &a, &a).unwrap();
                let report = check_circular_symmetry(&t, &a);
                assert_eq!(
                    report.max_deviation(),
                    Some(0.0),
                    "{spec} seed {seed}: {report:?}"
                );
            }
        }
    }

    #[test]
    fn symmetry_not_applicable_for_mixed_alphabets() {
        let s = PskAlphabet::new(4).unwrap();
        let x = PskAlphabet::new(8).unwrap();
        let t =
            build_lookup_table(&random_channel(1, 2, 3), PrecoderSpec::ZfPhase, &s, &x).unwrap();
        assert_eq!(
            check_circular_symmetry(&t, &x),
            SymmetryReport::NotApplicable
        );
    }

    #[test]
    fn corrupted_entry_is_detected() {
        let a = PskAlphabet::new(4).unwrap();
        let h = random_channel(2, 3, 12);
        let t = build_lookup_table(&h, PrecoderSpec::MmseExhaustive, &a, &a).unwrap();
        let mut entries = t.entries().to_vec();
        let key = 5;
        // Negation is a half-turn rotation of the first antenna.
        entries[key * 3] = a.rotate_index(entries[key * 3] as usize, 2) as u8;
        let bad = LookupTable::from_parts(t.meta().clone(), entries).unwrap();
        match check_circular_symmetry(&bad, &a) {
            SymmetryReport::Checked {
                max_deviation,
                violations,
                ..
            } => {
                assert!((max_deviation - 2.0).abs() < 1e-12);
                // key 5 as source (3 rotations) and as target (3 rotations)
                assert_eq!(violations, 6);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn from_parts_validates() {
        let meta = TableMeta {
            users: 1,
            antennas: 2,
            alpha_s: 4,
            alpha_x: 4,
            precoder: PrecoderSpec::ZfPhase,
            channel_fingerprint: 0,
        };
        assert!(LookupTable::from_parts(meta.clone(), alloc::vec![0; 8]).is_ok());
        assert!(LookupTable::from_parts(meta.clone(), alloc::vec![0; 7]).is_err());
        assert!(LookupTable::from_parts(meta, alloc::vec![4; 8]).is_err());
    }

    #[test]
    fn noiseless_receive_matches_dot() {
        let a = PskAlphabet::new(4).unwrap();
        let h = random_channel(2, 3, 13);
        let t = build_lookup_table(&h, PrecoderSpec::ZfPhase, &a, &a).unwrap();
        let zeta = t.noiseless_receive(h.row(1), &a).unwrap();
        for key in 0..t.len() {
            let x = t.transmit_vector(key, &a);
            assert!((zeta[key] - crate::channel::dot(h.row(1), &x)).norm() < 1e-14);
        }
    }
}
