//! Diagnostics for one seeded channel instance: circular symmetry of the
//! table, zero-mean linear-model error, mean equivalence of the two
//! demappers and the closed-form distortion power.

use std::fmt;

use dprx_core::channel::{draw_channel, ChannelMatrix, FadingConfig};
use dprx_core::demapper::{
    compute_lambda_eps, compute_lambda_xx, conditional_moments, h_eff_from_view,
    verify_zero_mean_error, UserView,
};
use dprx_core::modem::PskAlphabet;
use dprx_core::precoder::{
    build_lookup_table, check_circular_symmetry, LookupTable, PrecoderSpec, SymmetryReport,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Instance {
    pub users: usize,
    pub antennas: usize,
    pub alpha_s: usize,
    pub alpha_x: usize,
    pub precoder: PrecoderSpec,
    pub seed: u64,
}

/// Unit-variance Rayleigh channel drawn from `seed`.
pub fn instance_channel(
    users: usize,
    antennas: usize,
    seed: u64,
) -> dprx_core::Result<ChannelMatrix> {
    draw_channel(
        &FadingConfig::uniform(users, antennas, seed),
        &mut ChaCha8Rng::seed_from_u64(seed),
    )
}

pub fn build_instance(inst: &Instance) -> dprx_core::Result<(ChannelMatrix, LookupTable)> {
    let h = instance_channel(inst.users, inst.antennas, inst.seed)?;
    let data = PskAlphabet::new(inst.alpha_s)?;
    let tx = PskAlphabet::new(inst.alpha_x)?;
    let table = build_lookup_table(&h, inst.precoder, &data, &tx)?;
    Ok((h, table))
}

#[derive(Debug, Clone, PartialEq)]
pub struct UserDiagnostics {
    pub h_eff: dprx_core::Complex64,
    pub lambda_eps_sq: f64,
    /// `|closed form - direct average of |zeta - h_eff s_k|^2|`.
    pub lambda_identity_error: f64,
    pub max_zero_mean_residual: f64,
    /// `max_s ||mu(s) - [Re h_eff s, Im h_eff s]||_inf`.
    pub mean_equivalence_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyReport {
    pub instance: Instance,
    pub channel_fingerprint: u64,
    pub symmetry: SymmetryReport,
    pub users: Vec<UserDiagnostics>,
}

impl VerifyReport {
    pub fn max_zero_mean_residual(&self) -> f64 {
        self.users
            .iter()
            .map(|u| u.max_zero_mean_residual)
            .fold(0.0, f64::max)
    }

    pub fn max_mean_equivalence_error(&self) -> f64 {
        self.users
            .iter()
            .map(|u| u.mean_equivalence_error)
            .fold(0.0, f64::max)
    }

    pub fn max_lambda_identity_error(&self) -> f64 {
        self.users
            .iter()
            .map(|u| u.lambda_identity_error)
            .fold(0.0, f64::max)
    }
}

pub fn run_verify(inst: &Instance) -> dprx_core::Result<VerifyReport> {
    let (h, table) = build_instance(inst)?;
    let data = PskAlphabet::new(inst.alpha_s)?;
    let tx = PskAlphabet::new(inst.alpha_x)?;
    let lambda_xx = compute_lambda_xx(&table, &tx)?;
    let mut users = Vec::with_capacity(inst.users);
    for k in 0..inst.users {
        let view = UserView::new(h.row(k), &table, &data, &tx, k)?;
        let h_eff = h_eff_from_view(&view, &data);
        let lambda_eps_sq = compute_lambda_eps(h.row(k), &lambda_xx, h_eff, data.symbol_power())?;
        let direct = view
            .zeta()
            .iter()
            .enumerate()
            .map(|(key, z)| (z - h_eff * data.symbol(view.own_symbol(key))).norm_sqr())
            .sum::<f64>()
            / view.zeta().len() as f64;
        let residuals = verify_zero_mean_error(h.row(k), &table, &data, &tx, k)?;
        let mean_equivalence_error = conditional_moments(&view)
            .iter()
            .enumerate()
            .map(|(s, m)| {
                let lin = h_eff * data.symbol(s);
                (m.mean[0] - lin.re).abs().max((m.mean[1] - lin.im).abs())
            })
            .fold(0.0, f64::max);
        users.push(UserDiagnostics {
            h_eff,
            lambda_eps_sq,
            lambda_identity_error: (lambda_eps_sq - direct).abs(),
            max_zero_mean_residual: residuals.into_iter().fold(0.0, f64::max),
            mean_equivalence_error,
        });
    }
    Ok(VerifyReport {
        instance: *inst,
        channel_fingerprint: h.fingerprint(),
        symmetry: check_circular_symmetry(&table, &tx),
        users,
    })
}

impl fmt::Display for VerifyReport {
    /// One `label: value` per line.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let i = &self.instance;
        writeln!(f, "seed: {}", i.seed)?;
        writeln!(f, "users: {}", i.users)?;
        writeln!(f, "antennas: {}", i.antennas)?;
        writeln!(f, "alpha_s: {}", i.alpha_s)?;
        writeln!(f, "alpha_x: {}", i.alpha_x)?;
        writeln!(f, "precoder: {}", i.precoder)?;
        writeln!(f, "channel_fingerprint: {:016x}", self.channel_fingerprint)?;
        match &self.symmetry {
            SymmetryReport::NotApplicable => {
                writeln!(f, "circular_symmetry: not_applicable")?;
                writeln!(f, "max_symmetry_deviation: n/a")?;
                writeln!(f, "symmetry_violations: n/a")?;
            }
            SymmetryReport::Checked {
                max_deviation,
                violations,
                ..
            } => {
                writeln!(
                    f,
                    "circular_symmetry: {}",
                    if *violations == 0 {
                        "holds"
                    } else {
                        "violated"
                    }
                )?;
                writeln!(f, "max_symmetry_deviation: {max_deviation:e}")?;
                writeln!(f, "symmetry_violations: {violations}")?;
            }
        }
        writeln!(
            f,
            "max_zero_mean_residual: {:e}",
            self.max_zero_mean_residual()
        )?;
        writeln!(
            f,
            "max_mean_equivalence_error: {:e}",
            self.max_mean_equivalence_error()
        )?;
        writeln!(
            f,
            "max_lambda_eps_identity_error: {:e}",
            self.max_lambda_identity_error()
        )?;
        for (k, u) in self.users.iter().enumerate() {
            writeln!(f, "user{k}_h_eff: {:e} {:e}", u.h_eff.re, u.h_eff.im)?;
            writeln!(f, "user{k}_lambda_eps_sq: {:e}", u.lambda_eps_sq)?;
        }
        Ok(())
    }
}
