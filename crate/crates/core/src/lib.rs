//! Control-oriented linear models of gas pipe networks.
//!
//! Single pipes are discretized into low-order ODEs, linearized around a
//! nominal point, assembled into composite elements (joints, branches, series
//! cascades, gains) and interconnected into a closed state-space model.

// Negated comparisons are used throughout so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod composite;
pub mod error;
pub mod friction;
pub mod gas;
pub mod interconnect;
pub mod label;
pub mod netspec;
pub mod numfmt;
pub mod pipe;
pub mod simulate;
pub mod statespace;
pub mod steady_state;

pub use error::{Diagnostic, Error, Result};
pub use gas::{GasProperties, OperatingPoint, PipeParams};
pub use label::{Quantity, Side, SignalLabel};
pub use statespace::StateSpaceModel;
