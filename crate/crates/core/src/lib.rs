//! Dense linear algebra on a deterministic, simulated distributed-memory grid.
//!
//! Matrices are spread over an `s × s` grid of simulated processors using one
//! of the classic distributions (column/row wrapped, blocked, scattered). The
//! factorizations in [`lu`], [`qr`] and [`jacobi`] only touch data a processor
//! owns, and every transfer between processors is charged to the
//! [`fabric::Fabric`] cost ledger under a `c0 + c1·w` message model. The
//! [`perf`] module holds the analytic speedup laws and a fitter for the
//! `αn³/s² + βn²/s + γn` execution-time model.

pub mod bench;
pub mod dense;
pub mod error;
pub mod fabric;
pub mod jacobi;
pub mod layout;
pub mod lu;
pub mod perf;
pub mod qr;

pub use dense::{DenseMatrix, MatrixKind, NormKind, PermutationVector};
pub use error::{Error, Result};
pub use fabric::{Coord, CostLedger, Fabric, GridConfig, PivotCandidate, Routing};
pub use layout::{DistMatrix, Layout, LayoutKind};
