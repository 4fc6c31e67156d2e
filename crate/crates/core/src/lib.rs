//! Simulation of the √iSWAP gate on two capacitively coupled transmons, with
//! readout modeling, calibration, and state and process tomography.

// `!(x > 0.0)` rejects NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod dynamics;
pub mod error;
pub mod experiment;
pub mod measurement;
pub mod numkernel;
pub mod state;
pub mod tomography;

pub use dynamics::{
    DeviceParams, NoiseModel, PulseEvent, PulseMode, PulseSequence, Qubit, SwapScan,
};
pub use error::{Error, Result};
pub use experiment::{Experiment, Gate, QptReport};
pub use measurement::{MeasurementModel, ProbVector, ShotRecord, Shots};
pub use numkernel::{ComplexMatrix, C64};
pub use state::DensityMatrix;
pub use tomography::{BasisTag, ChiMatrix, InputState, TomoSetting};
