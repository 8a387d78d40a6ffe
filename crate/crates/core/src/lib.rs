//! Core library: Gaussian-state dynamics, quantum-network probes, and the
//! trained linear readout used for entanglement estimation.

pub mod cv;
pub mod error;
pub mod estimator;
pub mod gaussian;
pub mod gie;
pub mod hybrid;
pub mod inputs;
pub mod observables;
pub mod ode;
pub mod pipeline;
pub mod qubit;
pub mod real;
pub mod rng;

pub use error::{Error, Result};
pub use real::{real, to_f64, Real};

/// Concrete `f64` aliases for the generic core types.
pub type Cm = gaussian::CovarianceMatrix<f64>;
pub type Mean = gaussian::MeanVector<f64>;
pub type Dynamics = gaussian::LinearDynamics<f64>;
pub type Dm = qubit::DensityMatrix<f64>;
pub type Observables = observables::ObservableVector<f64>;
pub type Readout = estimator::TrainedReadout<f64>;
