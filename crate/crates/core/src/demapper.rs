//! Receiver-side statistics and max-log LLRs for discrete-precoded PSK.
//!
//! Every statistic here is an exact finite sum over the lookup table: the
//! receiver treats the other users' symbols as uniform and enumerates them.
//!
//! LLR convention: positive values favour bit 1, i.e.
//! `L = log P(c = 1 | z) - log P(c = 0 | z)`. All LLRs are clamped to
//! `[-LLR_MAX, LLR_MAX]`.

use alloc::vec::Vec;
use core::ops::Deref;

#[cfg(not(feature = "std"))]
use num_traits::Float;
use rand::Rng;

use crate::channel::complex_gaussian;
use crate::modem::{BitPartition, PskAlphabet};
use crate::precoder::LookupTable;
use crate::{key_digit, Complex64, Error, Result};

pub const LLR_MAX: f64 = 64.0;
const DET_FLOOR: f64 = 1e-300;
const DISTORTION_TOLERANCE: f64 = 1e-9;

/// Noiseless receive values of one user, `zeta(s) = h_k x(s)` for every table
/// key, plus the bookkeeping needed to enumerate conditioning sets.
#[derive(Debug, Clone)]
pub struct UserView {
    zeta: Vec<Complex64>,
    user: usize,
    users: usize,
    alpha_s: usize,
}

impl UserView {
    pub fn new(
        h_row: &[Complex64],
        table: &LookupTable,
        data: &PskAlphabet,
        tx: &PskAlphabet,
        user: usize,
    ) -> Result<Self> {
        table.check_alphabets(Some(data), tx)?;
        let users = table.meta().users;
        if user >= users {
            return Err(Error::Dimension {
                expected: users,
                got: user,
            });
        }
        Ok(Self {
            zeta: table.noiseless_receive(h_row, tx)?,
            user,
            users,
            alpha_s: data.order(),
        })
    }

    pub fn zeta(&self) -> &[Complex64] {
        &self.zeta
    }

    #[inline]
    pub fn own_symbol(&self, key: usize) -> usize {
        key_digit(key, self.user, self.users, self.alpha_s)
    }

    /// Keys of the conditioning set for own symbol `s`, in increasing key
    /// order (interferers counted in base `alpha_s`).
    pub fn conditioning_keys(&self, s: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.zeta.len()).filter(move |&key| self.own_symbol(key) == s)
    }

    fn conditional_mean(&self, s: usize) -> Complex64 {
        let mut sum = Complex64::new(0.0, 0.0);
        let mut n = 0usize;
        for key in self.conditioning_keys(s) {
            sum += self.zeta[key];
            n += 1;
        }
        sum / n as f64
    }
}

/// Mean and covariance of the stacked real receive vector `[Re z, Im z]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymbolMoments {
    pub mean: [f64; 2],
    /// Variance of the real part.
    pub var_re: f64,
    /// Variance of the imaginary part.
    pub var_im: f64,
    /// Covariance between real and imaginary parts.
    pub cov_ri: f64,
}

impl SymbolMoments {
    pub fn covariance(&self) -> [[f64; 2]; 2] {
        [[self.var_re, self.cov_ri], [self.cov_ri, self.var_im]]
    }

    pub fn determinant(&self) -> f64 {
        self.var_re * self.var_im - self.cov_ri * self.cov_ri
    }
}

/// A 2-D Gaussian with its inverse covariance cached.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionalGaussian {
    pub moments: SymbolMoments,
    /// `[a, b, c]` for the symmetric inverse `[[a, b], [b, c]]`.
    inverse: [f64; 3],
    log_det: f64,
}

impl ConditionalGaussian {
    pub fn new(moments: SymbolMoments) -> Self {
        let det = moments.determinant().max(DET_FLOOR);
        Self {
            moments,
            inverse: [
                moments.var_im / det,
                -moments.cov_ri / det,
                moments.var_re / det,
            ],
            log_det: det.ln(),
        }
    }

    pub fn isotropic(mean: Complex64, variance_per_dim: f64) -> Self {
        Self::new(SymbolMoments {
            mean: [mean.re, mean.im],
            var_re: variance_per_dim,
            var_im: variance_per_dim,
            cov_ri: 0.0,
        })
    }

    /// Mahalanobis form `(z - mu)^T C^{-1} (z - mu)`.
    #[inline]
    pub fn quadratic_form(&self, z: Complex64) -> f64 {
        let dr = z.re - self.moments.mean[0];
        let di = z.im - self.moments.mean[1];
        let [a, b, c] = self.inverse;
        a * dr * dr + 2.0 * b * dr * di + c * di * di
    }

    pub fn inverse(&self) -> [[f64; 2]; 2] {
        let [a, b, c] = self.inverse;
        [[a, b], [b, c]]
    }

    pub fn log_det(&self) -> f64 {
        self.log_det
    }
}

/// Per-symbol conditional Gaussians of one user's received sample.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneralDpaStats {
    pub sigma_w_sq: f64,
    pub symbols: Vec<ConditionalGaussian>,
}

impl GeneralDpaStats {
    pub fn symbol(&self, s: usize) -> &ConditionalGaussian {
        &self.symbols[s]
    }
}

/// Exact conditional moments of `zeta` over the conditioning set of every
/// own symbol, without noise.
pub fn conditional_moments(view: &UserView) -> Vec<SymbolMoments> {
    (0..view.alpha_s)
        .map(|s| {
            let mean = view.conditional_mean(s);
            let (mut rr, mut ii, mut ri) = (0.0, 0.0, 0.0);
            let mut n = 0usize;
            for key in view.conditioning_keys(s) {
                let d = view.zeta[key] - mean;
                rr += d.re * d.re;
                ii += d.im * d.im;
                ri += d.re * d.im;
                n += 1;
            }
            let n = n as f64;
            SymbolMoments {
                mean: [mean.re, mean.im],
                var_re: rr / n,
                var_im: ii / n,
                cov_ri: ri / n,
            }
        })
        .collect()
}

/// General DPA statistics: conditional mean of `[Re z, Im z]` and its
/// covariance, with the noise contributing `sigma_w^2 / 2` per dimension.
pub fn compute_dpa_stats(
    h_row: &[Complex64],
    table: &LookupTable,
    data: &PskAlphabet,
    tx: &PskAlphabet,
    sigma_w_sq: f64,
    user: usize,
) -> Result<GeneralDpaStats> {
    let view = UserView::new(h_row, table, data, tx, user)?;
    dpa_stats_from_view(&view, sigma_w_sq)
}

pub fn dpa_stats_from_view(view: &UserView, sigma_w_sq: f64) -> Result<GeneralDpaStats> {
    if sigma_w_sq.is_nan() || sigma_w_sq <= 0.0 {
        return Err(Error::NonPositiveNoise);
    }
    let symbols = conditional_moments(view)
        .into_iter()
        .map(|mut m| {
            m.var_re += sigma_w_sq / 2.0;
            m.var_im += sigma_w_sq / 2.0;
            debug_assert!(m.determinant() > 0.0);
            debug_assert!(m.var_re + m.var_im >= sigma_w_sq);
            ConditionalGaussian::new(m)
        })
        .collect();
    Ok(GeneralDpaStats {
        sigma_w_sq,
        symbols,
    })
}

/// `h_eff = (1 / (alpha_s^K sigma_s^2)) sum_s conj(s_k) zeta(s)`.
pub fn compute_h_eff(
    h_row: &[Complex64],
    table: &LookupTable,
    data: &PskAlphabet,
    tx: &PskAlphabet,
    user: usize,
) -> Result<Complex64> {
    let view = UserView::new(h_row, table, data, tx, user)?;
    Ok(h_eff_from_view(&view, data))
}

pub fn h_eff_from_view(view: &UserView, data: &PskAlphabet) -> Complex64 {
    let sum = view
        .zeta
        .iter()
        .enumerate()
        .fold(Complex64::new(0.0, 0.0), |acc, (key, z)| {
            acc + data.symbol(view.own_symbol(key)).conj() * z
        });
    sum / (view.zeta.len() as f64 * data.symbol_power())
}

/// Mean squared error of the linear fit `zeta(s) ~ gamma s_k`, by direct
/// summation over the table.
pub fn linear_fit_mse(view: &UserView, data: &PskAlphabet, gamma: Complex64) -> f64 {
    let sum: f64 = view
        .zeta
        .iter()
        .enumerate()
        .map(|(key, z)| (z - gamma * data.symbol(view.own_symbol(key))).norm_sqr())
        .sum();
    sum / view.zeta.len() as f64
}

/// Transmit covariance `E{x x^H}` over uniform symbol vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct TransmitCovariance {
    antennas: usize,
    matrix: Vec<Complex64>,
}

impl TransmitCovariance {
    pub fn antennas(&self) -> usize {
        self.antennas
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.matrix[i * self.antennas + j]
    }

    /// `h Lambda h^H` for a row vector `h`.
    pub fn quadratic_form(&self, h_row: &[Complex64]) -> f64 {
        let b = self.antennas;
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 0..b {
            for j in 0..b {
                acc += h_row[i] * self.matrix[i * b + j] * h_row[j].conj();
            }
        }
        acc.re
    }
}

/// `Lambda_x = alpha_s^{-K} sum_s x(s) x(s)^H`.
pub fn compute_lambda_xx(table: &LookupTable, tx: &PskAlphabet) -> Result<TransmitCovariance> {
    table.check_alphabets(None, tx)?;
    let b = table.meta().antennas;
    let mut matrix = alloc::vec![Complex64::new(0.0, 0.0); b * b];
    for key in 0..table.len() {
        let entry = table.entry(key);
        for i in 0..b {
            let xi = tx.symbol(entry[i] as usize);
            for j in 0..b {
                matrix[i * b + j] += xi * tx.symbol(entry[j] as usize).conj();
            }
        }
    }
    let n = table.len() as f64;
    for (idx, v) in matrix.iter_mut().enumerate() {
        if idx % (b + 1) == 0 {
            // |x_b|^2 = 1 for every PSK entry
            *v = Complex64::new(1.0, 0.0);
        } else {
            *v /= n;
        }
    }
    Ok(TransmitCovariance {
        antennas: b,
        matrix,
    })
}

/// `lambda_eps^2 = h Lambda_x h^H - |h_eff|^2 sigma_s^2`. Values within
/// `-1e-9` are clamped to zero; anything lower means inconsistent inputs.
pub fn compute_lambda_eps(
    h_row: &[Complex64],
    lambda_xx: &TransmitCovariance,
    h_eff: Complex64,
    sigma_s_sq: f64,
) -> Result<f64> {
    if h_row.len() != lambda_xx.antennas() {
        return Err(Error::Dimension {
            expected: lambda_xx.antennas(),
            got: h_row.len(),
        });
    }
    let value = lambda_xx.quadratic_form(h_row) - h_eff.norm_sqr() * sigma_s_sq;
    if value < -DISTORTION_TOLERANCE {
        return Err(Error::NegativeDistortion(value));
    }
    Ok(value.max(0.0))
}

/// Scalar linear model `z = h_eff s + eps + w` of one user.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearModelParams {
    pub h_eff: Complex64,
    pub lambda_eps_sq: f64,
    pub sigma_eff_sq: f64,
}

impl LinearModelParams {
    pub fn new(h_eff: Complex64, lambda_eps_sq: f64, sigma_w_sq: f64) -> Self {
        Self {
            h_eff,
            lambda_eps_sq,
            sigma_eff_sq: lambda_eps_sq + sigma_w_sq,
        }
    }
}

pub fn linear_model(
    h_row: &[Complex64],
    table: &LookupTable,
    data: &PskAlphabet,
    tx: &PskAlphabet,
    sigma_w_sq: f64,
    user: usize,
) -> Result<LinearModelParams> {
    if sigma_w_sq.is_nan() || sigma_w_sq <= 0.0 {
        return Err(Error::NonPositiveNoise);
    }
    let h_eff = compute_h_eff(h_row, table, data, tx, user)?;
    let lambda_xx = compute_lambda_xx(table, tx)?;
    let lambda_eps_sq = compute_lambda_eps(h_row, &lambda_xx, h_eff, data.symbol_power())?;
    Ok(LinearModelParams::new(h_eff, lambda_eps_sq, sigma_w_sq))
}

/// M LLRs for one received sample, most significant bit first.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LlrVector(pub Vec<f64>);

impl Deref for LlrVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

#[inline]
fn clamp_llr(v: f64) -> f64 {
    v.clamp(-LLR_MAX, LLR_MAX)
}

/// Max-log LLRs from per-symbol metrics: `L_i = min_{S0} m - min_{S1} m`.
#[inline]
fn max_log(metrics: &[f64], parts: &BitPartition, out: &mut [f64]) {
    for (i, o) in out.iter_mut().enumerate() {
        let m0 = parts
            .zeros(i)
            .iter()
            .map(|&s| metrics[s])
            .fold(f64::INFINITY, f64::min);
        let m1 = parts
            .ones(i)
            .iter()
            .map(|&s| metrics[s])
            .fold(f64::INFINITY, f64::min);
        *o = clamp_llr(m0 - m1);
    }
}

/// Whether the General DPA metric carries the `ln det C` term of the
/// symbol-dependent Gaussian likelihood.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LogDetTerm {
    #[default]
    Omit,
    Include,
}

/// General DPA LLRs: `L_i = 1/2 min_{S0} Q(s) - 1/2 min_{S1} Q(s)` with
/// `Q(s)` the Mahalanobis distance of `[Re z, Im z]` to the conditional
/// Gaussian of symbol `s`.
pub fn llr_general_dpa(z: Complex64, stats: &GeneralDpaStats, parts: &BitPartition) -> LlrVector {
    let mut out = alloc::vec![0.0; parts.bits()];
    llr_general_dpa_into(z, stats, parts, LogDetTerm::Omit, &mut out);
    LlrVector(out)
}

pub fn llr_general_dpa_into(
    z: Complex64,
    stats: &GeneralDpaStats,
    parts: &BitPartition,
    log_det: LogDetTerm,
    out: &mut [f64],
) {
    let mut metrics = [0.0f64; 64];
    let metrics = &mut metrics[..stats.symbols.len()];
    for (m, g) in metrics.iter_mut().zip(&stats.symbols) {
        let q = g.quadratic_form(z);
        *m = 0.5
            * match log_det {
                LogDetTerm::Omit => q,
                LogDetTerm::Include => q + g.log_det(),
            };
    }
    max_log(metrics, parts, out);
}

fn llr_isotropic_into(
    z: Complex64,
    h_eff: Complex64,
    variance: f64,
    data: &PskAlphabet,
    parts: &BitPartition,
    out: &mut [f64],
) {
    let mut metrics = [0.0f64; 64];
    let metrics = &mut metrics[..data.order()];
    for (m, s) in metrics.iter_mut().zip(data.symbols()) {
        *m = (z - h_eff * s).norm_sqr() / variance;
    }
    max_log(metrics, parts, out);
}

/// DPA-LM LLRs: squared distances to `h_eff s`, scaled by `1 / sigma_eff^2`.
pub fn llr_dpa_lm(
    z: Complex64,
    params: &LinearModelParams,
    data: &PskAlphabet,
    parts: &BitPartition,
) -> LlrVector {
    let mut out = alloc::vec![0.0; parts.bits()];
    llr_dpa_lm_into(z, params, data, parts, &mut out);
    LlrVector(out)
}

pub fn llr_dpa_lm_into(
    z: Complex64,
    params: &LinearModelParams,
    data: &PskAlphabet,
    parts: &BitPartition,
    out: &mut [f64],
) {
    llr_isotropic_into(z, params.h_eff, params.sigma_eff_sq, data, parts, out);
}

/// Conventional AWGN LLRs: same metric as DPA-LM but scaled by the thermal
/// noise only, ignoring the precoding distortion.
pub fn llr_awgn_baseline(
    z: Complex64,
    h_eff: Complex64,
    sigma_w_sq: f64,
    data: &PskAlphabet,
    parts: &BitPartition,
) -> LlrVector {
    let mut out = alloc::vec![0.0; parts.bits()];
    llr_awgn_baseline_into(z, h_eff, sigma_w_sq, data, parts, &mut out);
    LlrVector(out)
}

pub fn llr_awgn_baseline_into(
    z: Complex64,
    h_eff: Complex64,
    sigma_w_sq: f64,
    data: &PskAlphabet,
    parts: &BitPartition,
    out: &mut [f64],
) {
    llr_isotropic_into(z, h_eff, sigma_w_sq, data, parts, out);
}

/// Nearest scaled constellation point; ties go to the lower index.
pub fn hard_detect(z: Complex64, h_eff: Complex64, data: &PskAlphabet) -> Result<usize> {
    if h_eff.norm_sqr() == 0.0 {
        return Err(Error::ZeroChannel);
    }
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, s) in data.symbols().iter().enumerate() {
        let d = (z - h_eff * s).norm_sqr();
        if d < best_d {
            best_d = d;
            best = i;
        }
    }
    Ok(best)
}

/// `|E{eps | s}| = |E{zeta | s} - h_eff s|` for every own symbol `s`.
pub fn verify_zero_mean_error(
    h_row: &[Complex64],
    table: &LookupTable,
    data: &PskAlphabet,
    tx: &PskAlphabet,
    user: usize,
) -> Result<Vec<f64>> {
    let view = UserView::new(h_row, table, data, tx, user)?;
    let h_eff = h_eff_from_view(&view, data);
    Ok((0..data.order())
        .map(|s| (view.conditional_mean(s) - h_eff * data.symbol(s)).norm())
        .collect())
}

/// Sample moments of one symbol's conditional distribution with the
/// standard error of every entry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampledMoments {
    pub moments: SymbolMoments,
    /// Standard errors of `[mean_re, mean_im, var_re, var_im, cov_ri]`.
    pub standard_errors: [f64; 5],
    pub samples: usize,
}

/// Monte-Carlo estimate of the conditional receive statistics: for every own
/// symbol, draws `n_samples` uniform interferer symbols, passes them through
/// the table and the channel, adds noise and accumulates moments.
#[allow(clippy::too_many_arguments)]
pub fn estimate_stats_monte_carlo<R: Rng + ?Sized>(
    h_row: &[Complex64],
    table: &LookupTable,
    data: &PskAlphabet,
    tx: &PskAlphabet,
    sigma_w_sq: f64,
    user: usize,
    n_samples: usize,
    rng: &mut R,
) -> Result<Vec<SampledMoments>> {
    if sigma_w_sq < 0.0 {
        return Err(Error::NonPositiveNoise);
    }
    if n_samples == 0 {
        return Err(Error::Dimension {
            expected: 1,
            got: 0,
        });
    }
    table.check_alphabets(Some(data), tx)?;
    let users = table.meta().users;
    let alpha = data.order();
    let mut digits = alloc::vec![0usize; users];
    let mut out = Vec::with_capacity(alpha);
    for s in 0..alpha {
        let mut re = Vec::with_capacity(n_samples);
        let mut im = Vec::with_capacity(n_samples);
        for _ in 0..n_samples {
            for (k, d) in digits.iter_mut().enumerate() {
                *d = if k == user {
                    s
                } else {
                    rng.random_range(0..alpha)
                };
            }
            let key = table.key_of(&digits);
            let x = table.entry(key);
            let mut z = x
                .iter()
                .zip(h_row)
                .fold(Complex64::new(0.0, 0.0), |acc, (&i, h)| {
                    acc + h * tx.symbol(i as usize)
                });
            if sigma_w_sq > 0.0 {
                z += complex_gaussian(rng, sigma_w_sq);
            }
            re.push(z.re);
            im.push(z.im);
        }
        out.push(sample_moments(&re, &im));
    }
    Ok(out)
}

fn sample_moments(re: &[f64], im: &[f64]) -> SampledMoments {
    let n = re.len() as f64;
    let mr = re.iter().sum::<f64>() / n;
    let mi = im.iter().sum::<f64>() / n;
    let (mut rr, mut ii, mut ri) = (0.0, 0.0, 0.0);
    let (mut rr2, mut ii2, mut ri2) = (0.0, 0.0, 0.0);
    for (a, b) in re.iter().zip(im) {
        let dr = a - mr;
        let di = b - mi;
        rr += dr * dr;
        ii += di * di;
        ri += dr * di;
        rr2 += dr.powi(4);
        ii2 += di.powi(4);
        ri2 += (dr * di).powi(2);
    }
    let (vr, vi, cri) = (rr / n, ii / n, ri / n);
    // Standard errors of sample means and of sample (co)variances from the
    // fourth central moments.
    let se = [
        (vr / n).sqrt(),
        (vi / n).sqrt(),
        ((rr2 / n - vr * vr).max(0.0) / n).sqrt(),
        ((ii2 / n - vi * vi).max(0.0) / n).sqrt(),
        ((ri2 / n - cri * cri).max(0.0) / n).sqrt(),
    ];
    SampledMoments {
        moments: SymbolMoments {
            mean: [mr, mi],
            var_re: vr,
            var_im: vi,
            cov_ri: cri,
        },
        standard_errors: se,
        samples: re.len(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{draw_channel, ChannelMatrix, FadingConfig};
    use crate::modem::GrayMap;
    use crate::precoder::{build_lookup_table, PrecoderSpec};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    struct Setup {
        h: ChannelMatrix,
        table: LookupTable,
        data: PskAlphabet,
        tx: PskAlphabet,
        parts: BitPartition,
    }

    fn setup(
        k: usize,
        b: usize,
        alpha_s: usize,
        alpha_x: usize,
        spec: PrecoderSpec,
        seed: u64,
    ) -> Setup {
        let data = PskAlphabet::new(alpha_s).unwrap();
        let tx = PskAlphabet::new(alpha_x).unwrap();
        let h = draw_channel(
            &FadingConfig::uniform(k, b, seed),
            &mut ChaCha8Rng::seed_from_u64(seed),
        )
        .unwrap();
        let table = build_lookup_table(&h, spec, &data, &tx).unwrap();
        let parts = BitPartition::new(&data, &GrayMap::new(&data));
        Setup {
            h,
            table,
            data,
            tx,
            parts,
        }
    }

    fn identity(c: Complex64) -> Setup {
        let a = PskAlphabet::new(4).unwrap();
        let h = ChannelMatrix::from_rows(1, 1, alloc::vec![Complex64::new(1.0, 0.0)]).unwrap();
        let table = build_lookup_table(&h, PrecoderSpec::MmseExhaustive, &a, &a).unwrap();
        let h = ChannelMatrix::from_rows(1, 1, alloc::vec![c]).unwrap();
        let parts = BitPartition::new(&a, &GrayMap::new(&a));
        Setup {
            h,
            table,
            data: a.clone(),
            tx: a,
            parts,
        }
    }

    #[test]
    fn single_user_stats_are_degenerate() {
        let st = identity(Complex64::new(0.7, -0.2));
        let stats = compute_dpa_stats(st.h.row(0), &st.table, &st.data, &st.tx, 0.4, 0).unwrap();
        for (s, g) in stats.symbols.iter().enumerate() {
            let zeta = st.h.get(0, 0) * st.data.symbol(s);
            assert!((g.moments.mean[0] - zeta.re).abs() < 1e-15);
            assert!((g.moments.mean[1] - zeta.im).abs() < 1e-15);
            assert_eq!(g.moments.var_re, 0.2);
            assert_eq!(g.moments.var_im, 0.2);
            assert_eq!(g.moments.cov_ri, 0.0);
        }
    }

    #[test]
    fn covariances_positive_definite() {
        for seed in 0..5 {
            let st = setup(3, 6, 4, 8, PrecoderSpec::MmseExhaustive, seed);
            for k in 0..3 {
                let stats =
                    compute_dpa_stats(st.h.row(k), &st.table, &st.data, &st.tx, 0.01, k).unwrap();
                for g in &stats.symbols {
                    assert!(g.moments.determinant() > 0.0);
                    assert!(g.moments.var_re + g.moments.var_im >= 0.01);
                }
            }
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let st = setup(2, 3, 4, 4, PrecoderSpec::ZfPhase, 1);
        assert_eq!(
            compute_dpa_stats(st.h.row(0), &st.table, &st.data, &st.tx, 0.0, 0),
            Err(Error::NonPositiveNoise)
        );
        let eight = PskAlphabet::new(8).unwrap();
        assert!(compute_dpa_stats(st.h.row(0), &st.table, &eight, &st.tx, 1.0, 0).is_err());
        assert!(compute_dpa_stats(st.h.row(0), &st.table, &st.data, &st.tx, 1.0, 2).is_err());
    }

    #[test]
    fn weighted_means_cancel_for_symmetric_tables() {
        let st = setup(3, 6, 4, 4, PrecoderSpec::MmseExhaustive, 3);
        for k in 0..3 {
            let stats =
                compute_dpa_stats(st.h.row(k), &st.table, &st.data, &st.tx, 0.1, k).unwrap();
            let (mut r, mut i) = (0.0, 0.0);
            for g in &stats.symbols {
                r += g.moments.mean[0] / 4.0;
                i += g.moments.mean[1] / 4.0;
            }
            assert!(r.abs() < 1e-12 && i.abs() < 1e-12);
        }
    }

    #[test]
    fn h_eff_scalar_cases() {
        let st = identity(Complex64::new(1.0, 0.0));
        let h_eff = compute_h_eff(st.h.row(0), &st.table, &st.data, &st.tx, 0).unwrap();
        assert!((h_eff - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        let c = Complex64::new(-0.4, 1.3);
        let st = identity(c);
        let h_eff = compute_h_eff(st.h.row(0), &st.table, &st.data, &st.tx, 0).unwrap();
        assert!((h_eff - c).norm() < 1e-15);
    }

    #[test]
    fn h_eff_minimises_linear_fit_error() {
        let st = setup(3, 6, 4, 4, PrecoderSpec::MmseExhaustive, 8);
        let view = UserView::new(st.h.row(1), &st.table, &st.data, &st.tx, 1).unwrap();
        let h_eff = h_eff_from_view(&view, &st.data);
        let best = linear_fit_mse(&view, &st.data, h_eff);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let radius = 2.0 * h_eff.norm();
        for _ in 0..10_000 {
            let r = radius * rng.random::<f64>().sqrt();
            let phi = 2.0 * core::f64::consts::PI * rng.random::<f64>();
            let gamma = h_eff + Complex64::from_polar(r, phi);
            assert!(best <= linear_fit_mse(&view, &st.data, gamma));
        }
    }

    #[test]
    fn lambda_xx_properties() {
        let st = identity(Complex64::new(1.0, 0.0));
        let l = compute_lambda_xx(&st.table, &st.tx).unwrap();
        assert_eq!(l.get(0, 0), Complex64::new(1.0, 0.0));

        let st = setup(2, 3, 4, 4, PrecoderSpec::ZfPhase, 4);
        let l = compute_lambda_xx(&st.table, &st.tx).unwrap();
        // naive double loop
        for i in 0..3 {
            for j in 0..3 {
                let mut acc = Complex64::new(0.0, 0.0);
                for key in 0..st.table.len() {
                    let x = st.table.transmit_vector(key, &st.tx);
                    acc += x[i] * x[j].conj();
                }
                acc /= st.table.len() as f64;
                assert!((l.get(i, j) - acc).norm() < 1e-12);
                assert!((l.get(i, j) - l.get(j, i).conj()).norm() < 1e-15);
            }
            assert_eq!(l.get(i, i), Complex64::new(1.0, 0.0));
        }
    }

    #[test]
    fn lambda_eps_matches_direct_sum_and_scales_quadratically() {
        let st = identity(Complex64::new(1.0, 0.0));
        let l = compute_lambda_xx(&st.table, &st.tx).unwrap();
        let h_eff = compute_h_eff(st.h.row(0), &st.table, &st.data, &st.tx, 0).unwrap();
        assert_eq!(
            compute_lambda_eps(st.h.row(0), &l, h_eff, 1.0).unwrap(),
            0.0
        );

        let st = setup(3, 6, 4, 8, PrecoderSpec::MmseExhaustive, 5);
        let l = compute_lambda_xx(&st.table, &st.tx).unwrap();
        for k in 0..3 {
            let view = UserView::new(st.h.row(k), &st.table, &st.data, &st.tx, k).unwrap();
            let h_eff = h_eff_from_view(&view, &st.data);
            let closed = compute_lambda_eps(st.h.row(k), &l, h_eff, 1.0).unwrap();
            let direct = linear_fit_mse(&view, &st.data, h_eff);
            assert!((closed - direct).abs() < 1e-10);
            assert!(closed > 0.0);

            let a = 2.5;
            let scaled: Vec<Complex64> = st.h.row(k).iter().map(|h| h * a).collect();
            let view2 = UserView::new(&scaled, &st.table, &st.data, &st.tx, k).unwrap();
            let h2 = h_eff_from_view(&view2, &st.data);
            let closed2 = compute_lambda_eps(&scaled, &l, h2, 1.0).unwrap();
            assert!((closed2 - a * a * closed).abs() < 1e-10);
        }
    }

    #[test]
    fn lambda_eps_rejects_inconsistent_inputs() {
        let st = identity(Complex64::new(1.0, 0.0));
        let l = compute_lambda_xx(&st.table, &st.tx).unwrap();
        assert!(matches!(
            compute_lambda_eps(st.h.row(0), &l, Complex64::new(2.0, 0.0), 1.0),
            Err(Error::NegativeDistortion(_))
        ));
    }

    #[test]
    fn general_llr_zero_at_midpoint_and_positive_at_ones() {
        let data = PskAlphabet::new(4).unwrap();
        let gray = GrayMap::new(&data);
        let parts = BitPartition::new(&data, &gray);
        let stats = GeneralDpaStats {
            sigma_w_sq: 0.2,
            symbols: data
                .symbols()
                .iter()
                .map(|s| ConditionalGaussian::isotropic(*s, 0.1))
                .collect(),
        };
        for bit in 0..2 {
            // nearest S0/S1 pair and its midpoint
            let mut pair = (0, 0, f64::INFINITY);
            for &a in parts.zeros(bit) {
                for &b in parts.ones(bit) {
                    let d = (data.symbol(a) - data.symbol(b)).norm();
                    if d < pair.2 {
                        pair = (a, b, d);
                    }
                }
            }
            let mid = (data.symbol(pair.0) + data.symbol(pair.1)) / 2.0;
            assert!(llr_general_dpa(mid, &stats, &parts)[bit].abs() < 1e-12);
            let one = parts.ones(bit)[0];
            assert!(llr_general_dpa(data.symbol(one), &stats, &parts)[bit] > 0.0);
            let zero = parts.zeros(bit)[0];
            assert!(llr_general_dpa(data.symbol(zero), &stats, &parts)[bit] < 0.0);
        }
    }

    #[test]
    fn general_llr_matches_naive_loop() {
        let st = setup(3, 6, 4, 4, PrecoderSpec::MmseExhaustive, 6);
        let stats = compute_dpa_stats(st.h.row(2), &st.table, &st.data, &st.tx, 0.3, 2).unwrap();
        let gray = GrayMap::new(&st.data);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let z = complex_gaussian(&mut rng, 4.0);
            let got = llr_general_dpa(z, &stats, &st.parts);
            for bit in 0..2 {
                let (mut m0, mut m1) = (f64::INFINITY, f64::INFINITY);
                for s in 0..4 {
                    let m = &stats.symbols[s].moments;
                    let det = m.var_re * m.var_im - m.cov_ri * m.cov_ri;
                    let inv = [
                        [m.var_im / det, -m.cov_ri / det],
                        [-m.cov_ri / det, m.var_re / det],
                    ];
                    let d = [z.re - m.mean[0], z.im - m.mean[1]];
                    let q = d[0] * (inv[0][0] * d[0] + inv[0][1] * d[1])
                        + d[1] * (inv[1][0] * d[0] + inv[1][1] * d[1]);
                    if gray.bit(s, bit) == 1 {
                        m1 = m1.min(q);
                    } else {
                        m0 = m0.min(q);
                    }
                }
                let expect = (0.5 * m0 - 0.5 * m1).clamp(-LLR_MAX, LLR_MAX);
                assert!((got[bit] - expect).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn log_det_term_shifts_metrics() {
        let data = PskAlphabet::new(4).unwrap();
        let parts = BitPartition::new(&data, &GrayMap::new(&data));
        let mut symbols: Vec<_> = data
            .symbols()
            .iter()
            .map(|s| ConditionalGaussian::isotropic(*s, 0.5))
            .collect();
        // Identical covariances: the log-det term cancels.
        let stats = GeneralDpaStats {
            sigma_w_sq: 1.0,
            symbols: symbols.clone(),
        };
        let z = Complex64::new(0.3, -0.1);
        let mut a = [0.0; 2];
        let mut b = [0.0; 2];
        llr_general_dpa_into(z, &stats, &parts, LogDetTerm::Omit, &mut a);
        llr_general_dpa_into(z, &stats, &parts, LogDetTerm::Include, &mut b);
        assert!((a[0] - b[0]).abs() < 1e-12 && (a[1] - b[1]).abs() < 1e-12);
        symbols[0] = ConditionalGaussian::isotropic(data.symbol(0), 2.0);
        let stats = GeneralDpaStats {
            sigma_w_sq: 1.0,
            symbols,
        };
        llr_general_dpa_into(data.symbol(0), &stats, &parts, LogDetTerm::Omit, &mut a);
        llr_general_dpa_into(data.symbol(0), &stats, &parts, LogDetTerm::Include, &mut b);
        assert!(a != b);
    }

    #[test]
    fn dpa_lm_examples() {
        let data = PskAlphabet::new(4).unwrap();
        let parts = BitPartition::new(&data, &GrayMap::new(&data));
        let params = LinearModelParams::new(Complex64::new(0.8, 0.3), 0.05, 0.1);
        for bit in 0..2 {
            let star = parts.ones(bit)[0];
            let z = params.h_eff * data.symbol(star);
            let min0 = parts
                .zeros(bit)
                .iter()
                .map(|&s| params.h_eff.norm_sqr() * (data.symbol(star) - data.symbol(s)).norm_sqr())
                .fold(f64::INFINITY, f64::min);
            let expect = (min0 / params.sigma_eff_sq).min(LLR_MAX);
            let got = llr_dpa_lm(z, &params, &data, &parts)[bit];
            assert!(got > 0.0);
            assert!((got - expect).abs() < 1e-12);
        }
        // z = 0 is equidistant from all points
        let l = llr_dpa_lm(Complex64::new(0.0, 0.0), &params, &data, &parts);
        assert!(l.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn dpa_lm_is_isotropic_general_dpa() {
        let data = PskAlphabet::new(8).unwrap();
        let parts = BitPartition::new(&data, &GrayMap::new(&data));
        let params = LinearModelParams::new(Complex64::new(1.1, -0.6), 0.2, 0.3);
        let stats = GeneralDpaStats {
            sigma_w_sq: 0.3,
            symbols: data
                .symbols()
                .iter()
                .map(|s| {
                    ConditionalGaussian::isotropic(params.h_eff * s, params.sigma_eff_sq / 2.0)
                })
                .collect(),
        };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let z = complex_gaussian(&mut rng, 3.0);
            let a = llr_general_dpa(z, &stats, &parts);
            let b = llr_dpa_lm(z, &params, &data, &parts);
            for (x, y) in a.iter().zip(b.iter()) {
                assert!((x - y).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn awgn_baseline_relations() {
        let data = PskAlphabet::new(4).unwrap();
        let parts = BitPartition::new(&data, &GrayMap::new(&data));
        let h_eff = Complex64::new(0.9, 0.4);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let exact = LinearModelParams::new(h_eff, 0.0, 0.5);
        let distorted = LinearModelParams::new(h_eff, 0.25, 0.5);
        let ratio = distorted.sigma_eff_sq / 0.5;
        for _ in 0..1000 {
            let z = complex_gaussian(&mut rng, 1.0);
            let awgn = llr_awgn_baseline(z, h_eff, 0.5, &data, &parts);
            assert_eq!(awgn, llr_dpa_lm(z, &exact, &data, &parts));
            let lm = llr_dpa_lm(z, &distorted, &data, &parts);
            for bit in 0..2 {
                if awgn[bit].abs() < LLR_MAX {
                    assert!(
                        (awgn[bit] - ratio * lm[bit]).abs() <= 1e-12 * awgn[bit].abs().max(1.0)
                    );
                }
                // naive recomputation
                let d = |s: usize| (z - h_eff * data.symbol(s)).norm_sqr();
                let m0 = parts
                    .zeros(bit)
                    .iter()
                    .map(|&s| d(s))
                    .fold(f64::INFINITY, f64::min);
                let m1 = parts
                    .ones(bit)
                    .iter()
                    .map(|&s| d(s))
                    .fold(f64::INFINITY, f64::min);
                assert!((awgn[bit] - ((m0 - m1) / 0.5).clamp(-LLR_MAX, LLR_MAX)).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn llrs_are_clamped() {
        let data = PskAlphabet::new(4).unwrap();
        let parts = BitPartition::new(&data, &GrayMap::new(&data));
        let l = llr_awgn_baseline(
            Complex64::new(50.0, 50.0),
            Complex64::new(1.0, 0.0),
            1e-6,
            &data,
            &parts,
        );
        assert!(l.iter().all(|v| v.abs() == LLR_MAX));
    }

    #[test]
    fn hard_detect_cases() {
        let data = PskAlphabet::new(4).unwrap();
        let h = Complex64::new(0.5, -1.5);
        for s in 0..4 {
            assert_eq!(hard_detect(h * data.symbol(s), h, &data).unwrap(), s);
        }
        assert_eq!(hard_detect(Complex64::new(0.0, 0.0), h, &data).unwrap(), 0);
        assert_eq!(
            hard_detect(Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0), &data),
            Err(Error::ZeroChannel)
        );
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..1000 {
            let z = complex_gaussian(&mut rng, 2.0);
            let brute = (0..4)
                .min_by(|&a, &b| {
                    (z - h * data.symbol(a))
                        .norm()
                        .total_cmp(&(z - h * data.symbol(b)).norm())
                })
                .unwrap();
            assert_eq!(hard_detect(z, h, &data).unwrap(), brute);
        }
    }

    #[test]
    fn zero_mean_error_cases() {
        let st = identity(Complex64::new(1.0, 0.0));
        let r = verify_zero_mean_error(st.h.row(0), &st.table, &st.data, &st.tx, 0).unwrap();
        // |s|^2 of the stored QPSK points is 1 up to one ulp
        assert!(r.iter().all(|&v| v < 1e-15), "{r:?}");

        let st = setup(3, 6, 4, 4, PrecoderSpec::MmseExhaustive, 10);
        for k in 0..3 {
            let r = verify_zero_mean_error(st.h.row(k), &st.table, &st.data, &st.tx, k).unwrap();
            assert!(r.iter().all(|&v| v < 1e-10), "{r:?}");
        }
    }

    #[test]
    fn monte_carlo_degenerate_cases() {
        let st = identity(Complex64::new(0.3, 0.9));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let one = estimate_stats_monte_carlo(
            st.h.row(0),
            &st.table,
            &st.data,
            &st.tx,
            0.0,
            0,
            1,
            &mut rng,
        )
        .unwrap();
        let many = estimate_stats_monte_carlo(
            st.h.row(0),
            &st.table,
            &st.data,
            &st.tx,
            0.0,
            0,
            10_000,
            &mut rng,
        )
        .unwrap();
        for s in 0..4 {
            let zeta = st.h.get(0, 0) * st.data.symbol(s);
            assert_eq!(one[s].moments.mean, [zeta.re, zeta.im]);
            assert!(many[s].moments.var_re.abs() < 1e-20);
            assert!(many[s].moments.var_im.abs() < 1e-20);
            assert!(many[s].moments.cov_ri.abs() < 1e-20);
        }
    }
}
