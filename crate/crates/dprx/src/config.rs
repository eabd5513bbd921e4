//! Sweep configuration and its flat `key = value` file format.
//!
//! ```text
//! # comment
//! K = 3
//! B = 6
//! alpha_s = 4
//! alpha_x = 4
//! precoder = mmse_exhaustive
//! receivers = general_dpa, dpa_lm, awgn_common, uncoded_hard
//! snr_grid_db = -10, -5, 0, 5, 10, 15, 20, 25, 30
//! blocks_per_channel = 200
//! n_channels = 3
//! ldpc_n = 2048
//! ldpc_rate = 0.5
//! ldpc_dv = 3
//! ldpc_max_iterations = 50
//! master_seed = 1
//! output_path = results/fig2.csv
//! ```
//!
//! Optional keys: `logdet_correction` (bool, default false) adds the
//! log-determinant term to the general DPA metric; `record_timing` (bool,
//! default false) fills `wall_time_s`, which otherwise stays 0 so that
//! output files are byte-reproducible.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use dprx_core::precoder::{PrecoderSpec, EXHAUSTIVE_BUDGET, TABLE_BUDGET};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("missing key `{0}`")]
    MissingKey(&'static str),
    #[error("invalid value for `{key}`: {msg}")]
    Value { key: &'static str, msg: String },
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Receiver {
    GeneralDpa,
    DpaLm,
    AwgnCommon,
    UncodedHard,
}

impl Receiver {
    pub const ALL: [Receiver; 4] = [
        Self::GeneralDpa,
        Self::DpaLm,
        Self::AwgnCommon,
        Self::UncodedHard,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Self::GeneralDpa => "general_dpa",
            Self::DpaLm => "dpa_lm",
            Self::AwgnCommon => "awgn_common",
            Self::UncodedHard => "uncoded_hard",
        }
    }

    pub fn is_coded(self) -> bool {
        self != Self::UncodedHard
    }
}

impl fmt::Display for Receiver {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Receiver {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Self::ALL
            .into_iter()
            .find(|r| r.id() == s)
            .ok_or_else(|| format!("unknown receiver `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LdpcParams {
    pub n: usize,
    pub rate: f64,
    pub dv: usize,
    pub max_iterations: usize,
}

impl Default for LdpcParams {
    fn default() -> Self {
        Self {
            n: 2048,
            rate: 0.5,
            dv: 3,
            max_iterations: 50,
        }
    }
}

impl LdpcParams {
    pub fn k(&self) -> usize {
        (self.n as f64 * self.rate).round() as usize
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub users: usize,
    pub antennas: usize,
    pub alpha_s: usize,
    pub alpha_x: usize,
    pub precoder: PrecoderSpec,
    /// Kept sorted and free of duplicates.
    pub receivers: Vec<Receiver>,
    pub snr_grid_db: Vec<f64>,
    pub blocks_per_channel: usize,
    pub n_channels: usize,
    pub ldpc: LdpcParams,
    pub master_seed: u64,
    pub output_path: PathBuf,
    pub logdet_correction: bool,
    pub record_timing: bool,
}

impl Default for SimConfig {
    /// Desk-scale version of the QPSK/QPSK experiment.
    fn default() -> Self {
        Self {
            users: 3,
            antennas: 6,
            alpha_s: 4,
            alpha_x: 4,
            precoder: PrecoderSpec::MmseExhaustive,
            receivers: Receiver::ALL.to_vec(),
            snr_grid_db: vec![-10.0, -5.0, 0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0],
            blocks_per_channel: 200,
            n_channels: 3,
            ldpc: LdpcParams::default(),
            master_seed: 1,
            output_path: PathBuf::from("results.csv"),
            logdet_correction: false,
            record_timing: false,
        }
    }
}

fn parse_num<T: FromStr>(key: &'static str, v: &str) -> Result<T, ConfigError>
where
    T::Err: fmt::Display,
{
    v.parse::<T>().map_err(|e| ConfigError::Value {
        key,
        msg: format!("`{v}`: {e}"),
    })
}

fn parse_bool(key: &'static str, v: &str) -> Result<bool, ConfigError> {
    match v {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(ConfigError::Value {
            key,
            msg: format!("`{v}` is not a boolean"),
        }),
    }
}

pub fn parse_seed(v: &str) -> Result<u64, String> {
    let parsed = match v.strip_prefix("0x").or_else(|| v.strip_prefix("0X")) {
        Some(hex) => u64::from_str_radix(hex, 16),
        None => v.parse(),
    };
    parsed.map_err(|e| format!("`{v}`: {e}"))
}

pub fn parse_list<T: FromStr>(v: &str) -> Result<Vec<T>, String>
where
    T::Err: fmt::Display,
{
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<T>().map_err(|e| format!("`{s}`: {e}")))
        .collect()
}

pub fn parse_precoder(v: &str) -> Result<PrecoderSpec, String> {
    v.parse()
        .map_err(|()| format!("unknown precoder `{v}` (zf_phase, mmse_exhaustive)"))
}

impl SimConfig {
    /// Reads and validates a config file.
    pub fn from_file(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| anyhow::anyhow!("reading {}: {e}", path.display()))?;
        Ok(Self::parse(&text)?)
    }

    /// Parses and validates a config file.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let cfg = Self::parse_unvalidated(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Parses a config file without range checks, so command-line overrides
    /// can be applied before validation. All keys except the optional
    /// booleans are required.
    pub fn parse_unvalidated(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = SimConfig::default();
        let mut seen: Vec<&'static str> = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(ConfigError::Syntax {
                    line: idx + 1,
                    msg: format!("expected `key = value`, got `{line}`"),
                });
            };
            let (key, value) = (key.trim(), value.trim());
            let key: &'static str = match key {
                "K" => {
                    cfg.users = parse_num("K", value)?;
                    "K"
                }
                "B" => {
                    cfg.antennas = parse_num("B", value)?;
                    "B"
                }
                "alpha_s" => {
                    cfg.alpha_s = parse_num("alpha_s", value)?;
                    "alpha_s"
                }
                "alpha_x" => {
                    cfg.alpha_x = parse_num("alpha_x", value)?;
                    "alpha_x"
                }
                "precoder" => {
                    cfg.precoder = parse_precoder(value).map_err(|msg| ConfigError::Value {
                        key: "precoder",
                        msg,
                    })?;
                    "precoder"
                }
                "receivers" => {
                    cfg.receivers = parse_list(value).map_err(|msg| ConfigError::Value {
                        key: "receivers",
                        msg,
                    })?;
                    "receivers"
                }
                "snr_grid_db" => {
                    cfg.snr_grid_db = parse_list(value).map_err(|msg| ConfigError::Value {
                        key: "snr_grid_db",
                        msg,
                    })?;
                    "snr_grid_db"
                }
                "blocks_per_channel" => {
                    cfg.blocks_per_channel = parse_num("blocks_per_channel", value)?;
                    "blocks_per_channel"
                }
                "n_channels" => {
                    cfg.n_channels = parse_num("n_channels", value)?;
                    "n_channels"
                }
                "ldpc_n" => {
                    cfg.ldpc.n = parse_num("ldpc_n", value)?;
                    "ldpc_n"
                }
                "ldpc_rate" => {
                    cfg.ldpc.rate = parse_num("ldpc_rate", value)?;
                    "ldpc_rate"
                }
                "ldpc_dv" => {
                    cfg.ldpc.dv = parse_num("ldpc_dv", value)?;
                    "ldpc_dv"
                }
                "ldpc_max_iterations" => {
                    cfg.ldpc.max_iterations = parse_num("ldpc_max_iterations", value)?;
                    "ldpc_max_iterations"
                }
                "master_seed" => {
                    cfg.master_seed = parse_seed(value).map_err(|msg| ConfigError::Value {
                        key: "master_seed",
                        msg,
                    })?;
                    "master_seed"
                }
                "output_path" => {
                    cfg.output_path = PathBuf::from(value);
                    "output_path"
                }
                "logdet_correction" => {
                    cfg.logdet_correction = parse_bool("logdet_correction", value)?;
                    "logdet_correction"
                }
                "record_timing" => {
                    cfg.record_timing = parse_bool("record_timing", value)?;
                    "record_timing"
                }
                other => return Err(ConfigError::UnknownKey(other.to_string())),
            };
            if seen.contains(&key) {
                return Err(ConfigError::Syntax {
                    line: idx + 1,
                    msg: format!("duplicate key `{key}`"),
                });
            }
            seen.push(key);
        }
        for required in REQUIRED_KEYS {
            if !seen.contains(&required) {
                return Err(ConfigError::MissingKey(required));
            }
        }
        cfg.normalize();
        Ok(cfg)
    }

    /// Sorts and deduplicates the receiver list.
    pub fn normalize(&mut self) {
        self.receivers.sort();
        self.receivers.dedup();
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |msg: String| Err(ConfigError::Invalid(msg));
        if self.users == 0 || self.users > self.antennas {
            return bad(format!(
                "need 1 <= K <= B, got K={} B={}",
                self.users, self.antennas
            ));
        }
        for (name, a) in [("alpha_s", self.alpha_s), ("alpha_x", self.alpha_x)] {
            if a < 2 || !a.is_power_of_two() {
                return bad(format!("{name}={a} is not a power of two >= 2"));
            }
        }
        if self.alpha_s > 64 {
            return bad(format!("alpha_s={} exceeds 64", self.alpha_s));
        }
        if self.alpha_x > 64 {
            return bad(format!("alpha_x={} exceeds 64", self.alpha_x));
        }
        let keys = (self.alpha_s as u64).checked_pow(self.users as u32);
        if keys.is_none_or(|k| k > TABLE_BUDGET) {
            return bad(format!(
                "alpha_s^K exceeds the table budget of {TABLE_BUDGET}"
            ));
        }
        if self.precoder == PrecoderSpec::MmseExhaustive {
            let space = (self.alpha_x as u64).checked_pow(self.antennas as u32);
            if space.is_none_or(|s| s > EXHAUSTIVE_BUDGET) {
                return bad(format!(
                    "alpha_x^B exceeds the exhaustive-search budget of {EXHAUSTIVE_BUDGET}"
                ));
            }
        }
        if self.receivers.is_empty() {
            return bad("no receivers selected".into());
        }
        if self.snr_grid_db.is_empty() {
            return bad("snr_grid_db is empty".into());
        }
        if self.snr_grid_db.iter().any(|s| !s.is_finite()) {
            return bad("snr_grid_db contains a non-finite value".into());
        }
        if self.blocks_per_channel == 0 || self.n_channels == 0 {
            return bad("blocks_per_channel and n_channels must be at least 1".into());
        }
        if self.ldpc.max_iterations == 0 {
            return bad("ldpc_max_iterations must be at least 1".into());
        }
        let bits = self.alpha_s.trailing_zeros() as usize;
        let k = self.ldpc.k();
        if !self.ldpc.n.is_multiple_of(bits) || !k.is_multiple_of(bits) {
            return bad(format!(
                "ldpc_n={} and its message length {k} must be multiples of log2(alpha_s)={bits}",
                self.ldpc.n
            ));
        }
        Ok(())
    }
}

const REQUIRED_KEYS: [&str; 15] = [
    "K",
    "B",
    "alpha_s",
    "alpha_x",
    "precoder",
    "receivers",
    "snr_grid_db",
    "blocks_per_channel",
    "n_channels",
    "ldpc_n",
    "ldpc_rate",
    "ldpc_dv",
    "ldpc_max_iterations",
    "master_seed",
    "output_path",
];

#[cfg(test)]
mod tests {
    use super::*;

    const FULL: &str = "\
# test
K = 3
B = 6
alpha_s = 4
alpha_x = 4
precoder = mmse_exhaustive
receivers = dpa_lm, general_dpa
snr_grid_db = 0, 10.5
blocks_per_channel = 2
n_channels = 1
ldpc_n = 2048
ldpc_rate = 0.5
ldpc_dv = 3
ldpc_max_iterations = 50
master_seed = 0x10   # hex works
output_path = out.csv
";

    #[test]
    fn parses_full_file() {
        let cfg = SimConfig::parse(FULL).unwrap();
        assert_eq!(cfg.users, 3);
        assert_eq!(cfg.receivers, vec![Receiver::GeneralDpa, Receiver::DpaLm]);
        assert_eq!(cfg.snr_grid_db, vec![0.0, 10.5]);
        assert_eq!(cfg.master_seed, 16);
        assert!(!cfg.record_timing);
    }

    #[test]
    fn rejects_unknown_missing_and_duplicate_keys() {
        assert!(matches!(
            SimConfig::parse(&format!("{FULL}colour = red\n")),
            Err(ConfigError::UnknownKey(_))
        ));
        assert!(matches!(
            SimConfig::parse(&FULL.replace("K = 3\n", "")),
            Err(ConfigError::MissingKey("K"))
        ));
        assert!(matches!(
            SimConfig::parse(&format!("{FULL}B = 6\n")),
            Err(ConfigError::Syntax { .. })
        ));
    }

    #[test]
    fn rejects_non_power_of_two_alphabet() {
        let err = SimConfig::parse(&FULL.replace("alpha_x = 4", "alpha_x = 3")).unwrap_err();
        assert!(err.to_string().contains("power of two"), "{err}");
    }

    #[test]
    fn rejects_more_users_than_antennas() {
        assert!(SimConfig::parse(&FULL.replace("K = 3", "K = 7")).is_err());
    }

    #[test]
    fn rejects_oversized_exhaustive_search() {
        let mut cfg = SimConfig {
            antennas: 16,
            alpha_x: 8,
            ..SimConfig::default()
        };
        assert!(cfg.validate().is_err());
        cfg.precoder = PrecoderSpec::ZfPhase;
        assert!(cfg.validate().is_ok());
    }
}
