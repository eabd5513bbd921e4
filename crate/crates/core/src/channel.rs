//! Block-fading channel generation, AWGN and SNR bookkeeping.

use alloc::vec::Vec;

#[cfg(not(feature = "std"))]
use num_traits::Float;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::{Complex64, Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct FadingConfig {
    pub users: usize,
    pub antennas: usize,
    /// Large-scale fading coefficient per user.
    pub beta: Vec<f64>,
    pub seed: u64,
}

impl FadingConfig {
    /// Unit large-scale fading for every user.
    pub fn uniform(users: usize, antennas: usize, seed: u64) -> Self {
        Self {
            users,
            antennas,
            beta: alloc::vec![1.0; users],
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.users == 0 {
            return Err(Error::InvalidChannelConfig("at least one user is required"));
        }
        if self.antennas < self.users {
            return Err(Error::InvalidChannelConfig(
                "antennas must be at least the user count",
            ));
        }
        if self.beta.len() != self.users {
            return Err(Error::InvalidChannelConfig(
                "one large-scale coefficient per user",
            ));
        }
        if self.beta.iter().any(|b| *b <= 0.0 || !b.is_finite()) {
            return Err(Error::InvalidChannelConfig(
                "large-scale coefficients must be positive",
            ));
        }
        Ok(())
    }
}

/// K x B complex channel, row-major (row k is the channel seen by user k).
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelMatrix {
    users: usize,
    antennas: usize,
    entries: Vec<Complex64>,
}

impl ChannelMatrix {
    pub fn from_rows(users: usize, antennas: usize, entries: Vec<Complex64>) -> Result<Self> {
        if entries.len() != users * antennas {
            return Err(Error::Dimension {
                expected: users * antennas,
                got: entries.len(),
            });
        }
        Ok(Self {
            users,
            antennas,
            entries,
        })
    }

    pub fn users(&self) -> usize {
        self.users
    }

    pub fn antennas(&self) -> usize {
        self.antennas
    }

    pub fn row(&self, k: usize) -> &[Complex64] {
        &self.entries[k * self.antennas..(k + 1) * self.antennas]
    }

    #[inline]
    pub fn get(&self, k: usize, b: usize) -> Complex64 {
        self.entries[k * self.antennas + b]
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }

    /// FNV-1a over the dimensions and the little-endian bytes of every entry.
    pub fn fingerprint(&self) -> u64 {
        let mut h = Fnv1a::default();
        h.write(&(self.users as u64).to_le_bytes());
        h.write(&(self.antennas as u64).to_le_bytes());
        for z in &self.entries {
            h.write(&z.re.to_bits().to_le_bytes());
            h.write(&z.im.to_bits().to_le_bytes());
        }
        h.finish()
    }

    fn has_zero_row(&self) -> bool {
        (0..self.users).any(|k| self.row(k).iter().all(|z| z.norm_sqr() == 0.0))
    }
}

pub(crate) struct Fnv1a(u64);

impl Default for Fnv1a {
    fn default() -> Self {
        Self(0xcbf2_9ce4_8422_2325)
    }
}

impl Fnv1a {
    pub(crate) fn write(&mut self, bytes: &[u8]) {
        for b in bytes {
            self.0 ^= u64::from(*b);
            self.0 = self.0.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }

    pub(crate) fn finish(&self) -> u64 {
        self.0
    }
}

/// Draws `CN(0, variance)`: real and imaginary parts each carry half the variance.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> Complex64 {
    let scale = (variance / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re * scale, im * scale)
}

/// Draws `h_{k,b} = g_{k,b} sqrt(beta_k)` with i.i.d. unit-variance
/// circularly symmetric Gaussian `g`. Deterministic in the stream position.
pub fn draw_channel<R: Rng + ?Sized>(cfg: &FadingConfig, rng: &mut R) -> Result<ChannelMatrix> {
    cfg.validate()?;
    loop {
        let mut entries = Vec::with_capacity(cfg.users * cfg.antennas);
        for k in 0..cfg.users {
            let amp = cfg.beta[k].sqrt();
            for _ in 0..cfg.antennas {
                entries.push(complex_gaussian(rng, 1.0) * amp);
            }
        }
        let h = ChannelMatrix {
            users: cfg.users,
            antennas: cfg.antennas,
            entries,
        };
        if !h.has_zero_row() {
            return Ok(h);
        }
    }
}

/// `z = h_row . x + noise` for one user and one channel use.
pub fn apply_channel(h_row: &[Complex64], x: &[Complex64], noise: Complex64) -> Result<Complex64> {
    if h_row.len() != x.len() {
        return Err(Error::Dimension {
            expected: h_row.len(),
            got: x.len(),
        });
    }
    Ok(dot(h_row, x) + noise)
}

#[inline]
pub(crate) fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter()
        .zip(b)
        .fold(Complex64::new(0.0, 0.0), |acc, (p, q)| acc + p * q)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    /// Per complex sample; each quadrature carries half.
    pub sigma_w_sq: f64,
}

impl NoiseModel {
    pub fn new(sigma_w_sq: f64) -> Result<Self> {
        if sigma_w_sq.is_nan() || sigma_w_sq <= 0.0 {
            return Err(Error::NonPositiveNoise);
        }
        Ok(Self { sigma_w_sq })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Complex64 {
        complex_gaussian(rng, self.sigma_w_sq)
    }
}

/// SNR is `||x||^2 / N0` with `||x||^2 = antennas` for unit-modulus transmit
/// entries, so `sigma_w^2 = antennas / 10^(snr_db / 10)`.
pub fn snr_to_noise_variance(snr_db: f64, antennas: usize) -> NoiseModel {
    NoiseModel {
        sigma_w_sq: antennas as f64 / 10f64.powf(snr_db / 10.0),
    }
}
