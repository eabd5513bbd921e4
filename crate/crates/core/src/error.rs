use thiserror::Error;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("PSK order {0} must be a power of two in 2..=64")]
    InvalidOrder(usize),
    #[error("bit sequence length {len} is not a multiple of {bits_per_symbol}")]
    BitLength { len: usize, bits_per_symbol: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("invalid channel configuration: {0}")]
    InvalidChannelConfig(&'static str),
    #[error("channel is rank deficient")]
    DegenerateChannel,
    #[error("search space of {0} candidates exceeds the exhaustive budget")]
    SearchBudget(u64),
    #[error("lookup table does not match the alphabet or channel: {0}")]
    TableMismatch(&'static str),
    #[error("noise variance must be positive")]
    NonPositiveNoise,
    #[error("distortion power {0} is negative beyond tolerance")]
    NegativeDistortion(f64),
    #[error("effective channel is zero")]
    ZeroChannel,
    #[error("invalid LDPC parameters: {0}")]
    InvalidCode(&'static str),
}
