//! Voltage-balancing network design for series thyristor strings.
//!
//! Closed-form turn-on transients, a numerical reference integrator,
//! parameter sweeps and component selection.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytic;
pub mod error;
pub mod eseries;
pub mod oracle;
pub mod presets;
pub mod selector;
pub mod sweep;
pub mod types;
pub mod units;
pub mod verify;

pub use analytic::ClosedForm;
pub use error::{Error, Result};
pub use eseries::Snap;
pub use selector::{select_network, Constraint, DesignConstraints, DesignReport};
pub use types::{
    BalancingDesign, Channel, CircuitSpec, DeviceParams, Regime, ToleranceSpec, TransientReport,
    Waveform,
};
