//! Link-level building blocks for coded multiuser MIMO downlink with
//! discrete PSK precoding.
//!
//! The crate is `no_std` (with `alloc`) so the numerical kernels can be
//! reused outside the simulator. Everything that touches files, threads or
//! the command line lives in the `dprx` crate.
//!
//! Module map:
//!
//! - [`modem`]: PSK alphabets, the Gray labelling and per-bit partitions.
//! - [`channel`]: block-fading Rayleigh channels, AWGN and SNR bookkeeping.
//! - [`precoder`]: lookup-table precoders with discrete transmit alphabets.
//! - [`demapper`]: conditional receive statistics, the linear model and the
//!   three max-log LLR strategies.
//! - [`ldpc`]: regular LDPC construction, systematic encoding and
//!   sum-product decoding.
#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod channel;
pub mod demapper;
mod error;
pub mod ldpc;
mod linalg;
pub mod modem;
pub mod precoder;

pub use error::{Error, Result};
pub use num_complex::Complex64;

/// Symbol-vector keys are K-digit base-alpha numbers; this is the digit of
/// user `k` (user 0 is the most significant digit).
#[inline]
pub(crate) fn key_digit(key: usize, k: usize, num_users: usize, alpha: usize) -> usize {
    let mut key = key;
    for _ in 0..(num_users - 1 - k) {
        key /= alpha;
    }
    key % alpha
}
