//! Simulation harness for coded multiuser MIMO downlink with discrete PSK
//! precoding: sweep configuration, seeded parallel Monte-Carlo runs, CSV
//! output, lookup-table and parity-check file formats, and per-instance
//! diagnostics. Numerical kernels live in `dprx-core`.

pub mod alist;
pub mod config;
pub mod ldpc_check;
pub mod records;
pub mod sweep;
pub mod tablefile;
pub mod verify;

pub use config::{Receiver, SimConfig};
pub use records::{emit_csv, read_csv, ResultRecord, UserScope};
pub use sweep::{run_sweep, run_sweep_with, RunOptions, SweepOutput};
