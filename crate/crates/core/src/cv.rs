//! Continuous-variable quantum network: random parameter sets, drift/diffusion
//! construction, and observable extraction after contact with an input state.
//!
//! Mode ordering is input-first: `(q1, r1, q2, r2, x1, p1, ..., xM, pM)` for
//! two input modes and `M` network nodes.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::{
    CovarianceMatrix, GaussianPropagator, LinearDynamics, QuadratureOrdering,
};
use crate::observables::{CvObservableSet, ObsKind, ObsLabel, ObservableVector};
use crate::real::{real, Real};

/// Interaction flavor of the network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReservoirVariant {
    /// Excitation-conserving couplings `a b† + b a†`.
    Standard,
    /// Standard couplings plus node-local two-photon pumps `P'(b² + b†²)`.
    TwoPhotonPump,
    /// Node-node couplings of position-position type `(b + b†)(b' + b'†)`.
    UltraStrong,
}

/// One random realization of the quantum network of Eq.-(1)-type dynamics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReservoirConfig<T: Real> {
    pub n_nodes: usize,
    /// Input detunings, length 2.
    pub delta: Vec<T>,
    /// Node detunings, length M.
    pub lambda: Vec<T>,
    /// Input-node couplings, 2 x M row-major.
    pub k: Vec<T>,
    /// Node-node couplings, M x M symmetric with zero diagonal, row-major.
    pub j: Vec<T>,
    /// Coherent pump strengths, length M.
    pub p: Vec<T>,
    /// Two-photon pump strengths, length M (zero unless the variant is active).
    pub p2: Vec<T>,
    /// Input loss rates, length 2.
    pub gamma: Vec<T>,
    /// Node loss rates, length M.
    pub kappa: Vec<T>,
    pub variant: ReservoirVariant,
    /// Overall frequency scale.
    pub gamma_scale: T,
    /// Seed used to draw this realization, when sampled.
    pub seed: Option<u64>,
}

pub const N_INPUTS: usize = 2;

impl<T: Real> ReservoirConfig<T> {
    pub fn validate(&self) -> Result<()> {
        let m = self.n_nodes;
        if m == 0 {
            return Err(Error::validation("network needs at least one node"));
        }
        let lens = [
            (self.delta.len(), N_INPUTS, "delta"),
            (self.lambda.len(), m, "lambda"),
            (self.k.len(), N_INPUTS * m, "k"),
            (self.j.len(), m * m, "j"),
            (self.p.len(), m, "p"),
            (self.p2.len(), m, "p2"),
            (self.gamma.len(), N_INPUTS, "gamma"),
            (self.kappa.len(), m, "kappa"),
        ];
        for (got, want, name) in lens {
            if got != want {
                return Err(Error::validation(format!(
                    "parameter array `{name}` has length {got}, expected {want}"
                )));
            }
        }
        if self
            .gamma
            .iter()
            .chain(self.kappa.iter())
            .any(|&r| r < T::zero())
        {
            return Err(Error::validation("loss rates must be nonnegative"));
        }
        for a in 0..m {
            if self.j[a * m + a] != T::zero() {
                return Err(Error::validation("J must have zero diagonal"));
            }
            for b in 0..a {
                if self.j[a * m + b] != self.j[b * m + a] {
                    return Err(Error::validation("J must be symmetric"));
                }
            }
        }
        if self.variant != ReservoirVariant::TwoPhotonPump
            && self.p2.iter().any(|&x| x != T::zero())
        {
            return Err(Error::validation(
                "two-photon strengths must be zero unless the variant is active",
            ));
        }
        Ok(())
    }

    #[inline]
    pub fn k_at(&self, n: usize, m: usize) -> T {
        self.k[n * self.n_nodes + m]
    }

    #[inline]
    pub fn j_at(&self, m: usize, mp: usize) -> T {
        self.j[m * self.n_nodes + mp]
    }

    pub fn n_modes(&self) -> usize {
        N_INPUTS + self.n_nodes
    }
}

/// Draw one network realization: `{Delta, Lambda, K, J, P}` uniform on
/// `[0, 1]`·scale, losses uniform on `[0, 0.1]`·scale, two-photon pumps
/// uniform on `[0, 0.1]`·scale when that variant is active.
pub fn sample_qn_params<T: Real, R: Rng>(
    n_nodes: usize,
    gamma_scale: T,
    variant: ReservoirVariant,
    rng: &mut R,
) -> ReservoirConfig<T> {
    assert!(n_nodes >= 1, "network needs at least one node");
    let mut draw = |scale: f64| -> T { real::<T>(rng.gen::<f64>() * scale) * gamma_scale };

    let delta: Vec<T> = (0..N_INPUTS).map(|_| draw(1.0)).collect();
    let lambda: Vec<T> = (0..n_nodes).map(|_| draw(1.0)).collect();
    let k: Vec<T> = (0..N_INPUTS * n_nodes).map(|_| draw(1.0)).collect();
    let mut j = vec![T::zero(); n_nodes * n_nodes];
    for m in 0..n_nodes {
        for mp in (m + 1)..n_nodes {
            let v = draw(1.0);
            j[m * n_nodes + mp] = v;
            j[mp * n_nodes + m] = v;
        }
    }
    let p: Vec<T> = (0..n_nodes).map(|_| draw(1.0)).collect();
    let gamma: Vec<T> = (0..N_INPUTS).map(|_| draw(0.1)).collect();
    let kappa: Vec<T> = (0..n_nodes).map(|_| draw(0.1)).collect();
    let p2: Vec<T> = if variant == ReservoirVariant::TwoPhotonPump {
        (0..n_nodes).map(|_| draw(0.1)).collect()
    } else {
        vec![T::zero(); n_nodes]
    };

    ReservoirConfig {
        n_nodes,
        delta,
        lambda,
        k,
        j,
        p,
        p2,
        gamma,
        kappa,
        variant,
        gamma_scale,
        seed: None,
    }
}

/// Assemble the joint drift/diffusion/drive for the `(2 + M)`-mode system.
pub fn build_dynamics<T: Real>(config: &ReservoirConfig<T>) -> Result<LinearDynamics<T>> {
    config.validate()?;
    let m_nodes = config.n_nodes;
    let dim = 2 * config.n_modes();
    let two = real::<T>(2.0);

    let q = |n: usize| 2 * n;
    let r = |n: usize| 2 * n + 1;
    let x = |m: usize| 2 * (N_INPUTS + m);
    let p = |m: usize| 2 * (N_INPUTS + m) + 1;

    let mut a = DMatrix::<T>::zeros(dim, dim);
    for n in 0..N_INPUTS {
        a[(q(n), q(n))] = -config.gamma[n];
        a[(q(n), r(n))] = config.delta[n];
        a[(r(n), q(n))] = -config.delta[n];
        a[(r(n), r(n))] = -config.gamma[n];
        for m in 0..m_nodes {
            a[(q(n), p(m))] = config.k_at(n, m);
            a[(r(n), x(m))] = -config.k_at(n, m);
        }
    }
    for m in 0..m_nodes {
        a[(x(m), x(m))] = -config.kappa[m];
        a[(x(m), p(m))] = config.lambda[m];
        a[(p(m), x(m))] = -config.lambda[m];
        a[(p(m), p(m))] = -config.kappa[m];
        for n in 0..N_INPUTS {
            a[(x(m), r(n))] = config.k_at(n, m);
            a[(p(m), q(n))] = -config.k_at(n, m);
        }
        for mp in 0..m_nodes {
            if mp == m {
                continue;
            }
            match config.variant {
                ReservoirVariant::Standard | ReservoirVariant::TwoPhotonPump => {
                    a[(x(m), p(mp))] += config.j_at(m, mp);
                    a[(p(m), x(mp))] += -config.j_at(m, mp);
                }
                ReservoirVariant::UltraStrong => {
                    // 2J x_m x_m' couples only into the momentum equations.
                    a[(p(m), x(mp))] += -two * config.j_at(m, mp);
                }
            }
        }
        if config.variant == ReservoirVariant::TwoPhotonPump {
            a[(x(m), p(m))] += -two * config.p2[m];
            a[(p(m), x(m))] += -two * config.p2[m];
        }
    }

    let mut d_diag = DVector::<T>::zeros(dim);
    for n in 0..N_INPUTS {
        d_diag[q(n)] = config.gamma[n];
        d_diag[r(n)] = config.gamma[n];
    }
    for m in 0..m_nodes {
        d_diag[x(m)] = config.kappa[m];
        d_diag[p(m)] = config.kappa[m];
    }

    let mut drive = DVector::<T>::zeros(dim);
    let sqrt2 = real::<T>(2.0).sqrt();
    for m in 0..m_nodes {
        drive[p(m)] = -sqrt2 * config.p[m];
    }

    LinearDynamics::new(a, DMatrix::from_diagonal(&d_diag), drive)
}

/// Precomputed probe of one network realization: joint propagators per
/// readout gap, reusable across many input states.
pub struct CvProbe<T: Real> {
    config: ReservoirConfig<T>,
    times: Vec<T>,
    set: CvObservableSet,
    /// One propagator per segment between consecutive readout times.
    segments: Vec<GaussianPropagator<T>>,
}

impl<T: Real> CvProbe<T> {
    pub fn new(
        config: ReservoirConfig<T>,
        readout_times: &[T],
        set: CvObservableSet,
    ) -> Result<Self> {
        if readout_times.is_empty() {
            return Err(Error::validation("at least one readout time is required"));
        }
        if readout_times.iter().any(|&t| t <= T::zero()) {
            return Err(Error::validation("readout times must be positive"));
        }
        if readout_times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::validation("readout times must be increasing"));
        }
        let dynamics = build_dynamics(&config)?;
        let mut segments = Vec::with_capacity(readout_times.len());
        let mut prev = T::zero();
        for &t in readout_times {
            segments.push(GaussianPropagator::new(&dynamics, t - prev)?);
            prev = t;
        }
        Ok(CvProbe {
            config,
            times: readout_times.to_vec(),
            set,
            segments,
        })
    }

    pub fn n_observables(&self) -> usize {
        let per_time = match self.set {
            CvObservableSet::LocalCmTriple => 3 * self.config.n_nodes,
            CvObservableSet::MeanExcitation => self.config.n_nodes,
        };
        per_time * self.times.len()
    }

    /// Contact the network with `v_in` (QN starts in vacuum, all means zero)
    /// and record the configured node observables at each readout time.
    pub fn observe(&self, v_in: &CovarianceMatrix<T>) -> Result<ObservableVector<T>> {
        if v_in.n_modes() != N_INPUTS {
            return Err(Error::validation("input state must have two modes"));
        }
        let vac = CovarianceMatrix::vacuum(self.config.n_nodes, QuadratureOrdering::Interleaved);
        let joint = v_in.block_diag(&vac, QuadratureOrdering::InputFirst);
        let mut v = joint.into_matrix();
        let mut u = DVector::<T>::zeros(2 * self.config.n_modes());

        let mut values = Vec::with_capacity(self.n_observables());
        let mut labels = Vec::with_capacity(self.n_observables());
        let half = real::<T>(0.5);
        for (seg, &t) in self.segments.iter().zip(&self.times) {
            let (v1, u1) = seg.apply(&v, &u);
            v = v1;
            u = u1;
            for m in 0..self.config.n_nodes {
                let xi = 2 * (N_INPUTS + m);
                let pi = xi + 1;
                match self.set {
                    CvObservableSet::LocalCmTriple => {
                        values.push(v[(xi, xi)]);
                        labels.push(ObsLabel { node: m, kind: ObsKind::VarX, time: t });
                        values.push(v[(pi, pi)]);
                        labels.push(ObsLabel { node: m, kind: ObsKind::VarP, time: t });
                        values.push(v[(xi, pi)]);
                        labels.push(ObsLabel { node: m, kind: ObsKind::CovXP, time: t });
                    }
                    CvObservableSet::MeanExcitation => {
                        let n = (v[(xi, xi)] + v[(pi, pi)] - T::one()) * half
                            + (u[xi] * u[xi] + u[pi] * u[pi]) * half;
                        values.push(n);
                        labels.push(ObsLabel { node: m, kind: ObsKind::Excitation, time: t });
                    }
                }
            }
        }
        ObservableVector::new(DVector::from_vec(values), labels)
    }
}

/// One-shot probe: build the propagators, contact with `v_in`, and read out.
pub fn run_probe<T: Real>(
    config: &ReservoirConfig<T>,
    v_in: &CovarianceMatrix<T>,
    readout_times: &[T],
    set: CvObservableSet,
) -> Result<ObservableVector<T>> {
    CvProbe::new(config.clone(), readout_times, set)?.observe(v_in)
}
