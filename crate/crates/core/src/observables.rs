//! Labeled observable vectors recorded from a quantum network.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::real::Real;

/// What was measured on a node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ObsKind {
    VarX,
    VarP,
    CovXP,
    Excitation,
    PauliX,
    PauliY,
    PauliZ,
}

/// Observable choice for a CV probe.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CvObservableSet {
    /// Two diagonal and one off-diagonal entry of each node's local CM.
    LocalCmTriple,
    /// Mean excitation number of each node.
    MeanExcitation,
}

/// Observable choice for a qubit probe.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QubitObservableSet {
    /// Pauli x, y, z expectation values of each QN qubit.
    PauliTriple,
    /// Mean excitation of each QN qubit.
    Excitation,
}

/// Per-entry provenance: node index, observable kind, readout time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObsLabel<T> {
    pub node: usize,
    pub kind: ObsKind,
    pub time: T,
}

/// Values plus matching labels, ordered by nondecreasing readout time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservableVector<T: Real> {
    values: DVector<T>,
    labels: Vec<ObsLabel<T>>,
}

impl<T: Real> ObservableVector<T> {
    pub fn new(values: DVector<T>, labels: Vec<ObsLabel<T>>) -> Result<Self> {
        if values.len() != labels.len() {
            return Err(Error::validation(
                "observable values and labels must have equal length",
            ));
        }
        if labels.windows(2).any(|w| w[1].time < w[0].time) {
            return Err(Error::validation(
                "observable readout times must be nondecreasing",
            ));
        }
        Ok(ObservableVector { values, labels })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.len() == 0
    }

    pub fn values(&self) -> &DVector<T> {
        &self.values
    }

    pub fn labels(&self) -> &[ObsLabel<T>] {
        &self.labels
    }

    pub fn with_values(&self, values: DVector<T>) -> Self {
        assert_eq!(values.len(), self.labels.len());
        ObservableVector {
            values,
            labels: self.labels.clone(),
        }
    }
}
