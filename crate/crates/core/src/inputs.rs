//! Random input-state generation for training and testing ensembles,
//! entangled and separable variants, for CV and qubit systems.

use nalgebra::{Complex, DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::{
    log_negativity, CovarianceMatrix, GaussianPropagator, LinearDynamics, ModeBipartition,
    QuadratureOrdering,
};
use crate::qubit::{negativity, DensityMatrix};
use crate::real::{real, Real};
use crate::rng::substream;

/// Entanglement below this threshold counts as separable for the generators.
pub const SEPARABILITY_TOL: f64 = 1e-9;

const MAX_REDRAWS: usize = 1000;

/// Drift of the two-mode preparation Hamiltonian: beam-splitter coupling `K`
/// plus local two-photon drives `P'_n (a_n^2 + a_n^†2)`.
fn input_drift<T: Real>(d1: T, d2: T, k: T, p1: T, p2: T) -> DMatrix<T> {
    let two = real::<T>(2.0);
    let mut a = DMatrix::zeros(4, 4);
    a[(0, 1)] = d1 - two * p1;
    a[(1, 0)] = -d1 - two * p1;
    a[(0, 3)] = k;
    a[(1, 2)] = -k;
    a[(2, 1)] = k;
    a[(3, 0)] = -k;
    a[(2, 3)] = d2 - two * p2;
    a[(3, 2)] = -d2 - two * p2;
    a
}

fn evolve_input<T: Real>(
    drift: DMatrix<T>,
    v0: &CovarianceMatrix<T>,
    tau0: T,
) -> Result<CovarianceMatrix<T>> {
    let dynamics = LinearDynamics::new(drift, DMatrix::zeros(4, 4), DVector::zeros(4))?;
    let prop = GaussianPropagator::new(&dynamics, tau0)?;
    let (v, _) = prop.apply(v0.matrix(), &DVector::zeros(4));
    CovarianceMatrix::new(v, QuadratureOrdering::Interleaved)
}

/// Generate one random two-mode input covariance matrix.
///
/// Entangled branch: unitary evolution from vacuum for `tau0 = pi / (2 Gamma)`
/// with `(D1, D2, K) in [0,1] Gamma` and `P'_{1,2} in [0, 0.3] Gamma`.
/// Separable branch: the same Hamiltonian family from a thermal state
/// `3/2 I` for `tau0 = 1 / (2 Gamma)`; draws whose log-negativity is not zero
/// are rejected and redrawn.
pub fn gen_cv_input<T: Real, R: Rng>(
    rng: &mut R,
    gamma_scale: T,
    separable: bool,
) -> Result<CovarianceMatrix<T>> {
    let part = ModeBipartition::two_mode();
    for _ in 0..MAX_REDRAWS {
        let mut draw = |scale: f64| -> T { real::<T>(rng.gen::<f64>() * scale) * gamma_scale };
        let drift = input_drift(draw(1.0), draw(1.0), draw(1.0), draw(0.3), draw(0.3));
        let (v0, tau0) = if separable {
            (
                CovarianceMatrix::thermal(2, T::one(), QuadratureOrdering::Interleaved),
                real::<T>(0.5) / gamma_scale,
            )
        } else {
            (
                CovarianceMatrix::vacuum(2, QuadratureOrdering::Interleaved),
                real::<T>(std::f64::consts::FRAC_PI_2) / gamma_scale,
            )
        };
        let v = evolve_input(drift, &v0, tau0)?;
        if !separable || log_negativity(&v, &part)? <= real(SEPARABILITY_TOL) {
            return Ok(v);
        }
    }
    Err(Error::Protocol(format!(
        "no separable CV input found in {MAX_REDRAWS} draws"
    )))
}

fn standard_normal<T: Real, R: Rng>(rng: &mut R) -> T {
    let x: f64 = StandardNormal.sample(rng);
    real::<T>(x)
}

/// Generate one random two-qubit input state from the Wishart-like
/// construction `rho = Z Z† / tr(Z Z†)` with `Z = B + B†`,
/// `B = 2 (u1 + i u2) - (1 + i) J`, `u1, u2` standard-normal 4x4 matrices and
/// `J` the all-ones matrix.
///
/// The separable branch destroys entanglement with a random projective
/// measurement on the first input qubit.
pub fn gen_qubit_input<T: Real, R: Rng>(rng: &mut R, separable: bool) -> Result<DensityMatrix<T>> {
    let two = real::<T>(2.0);
    let b = DMatrix::<Complex<T>>::from_fn(4, 4, |_, _| {
        // draw order fixed by the storage iteration order
        Complex::new(two * standard_normal(rng), T::zero())
    });
    let b2 = DMatrix::<Complex<T>>::from_fn(4, 4, |_, _| {
        Complex::new(T::zero(), two * standard_normal(rng))
    });
    let ones = Complex::new(T::one(), T::one());
    let b = b + b2 - DMatrix::from_element(4, 4, ones);
    let z = &b + b.adjoint();
    let zz = &z * z.adjoint();
    let tr: T = (0..4).map(|i| zz[(i, i)].re).fold(T::zero(), |a, c| a + c);
    let rho = zz / Complex::new(tr, T::zero());
    let rho = DensityMatrix::new(rho, vec![2, 2])?;
    if !separable {
        return Ok(rho);
    }

    // Haar-random pure state on the first qubit and its orthogonal complement.
    let a0 = Complex::new(standard_normal::<T, _>(rng), standard_normal::<T, _>(rng));
    let a1 = Complex::new(standard_normal::<T, _>(rng), standard_normal::<T, _>(rng));
    let norm = (a0.norm_sqr() + a1.norm_sqr()).sqrt();
    let (a0, a1) = (a0 / Complex::new(norm, T::zero()), a1 / Complex::new(norm, T::zero()));
    let mut psi = DMatrix::<Complex<T>>::zeros(2, 2);
    psi[(0, 0)] = a0 * a0.conj();
    psi[(0, 1)] = a0 * a1.conj();
    psi[(1, 0)] = a1 * a0.conj();
    psi[(1, 1)] = a1 * a1.conj();
    let id2 = DMatrix::<Complex<T>>::identity(2, 2);
    let pi1 = psi.kronecker(&id2);
    let pi2 = (&id2 - &psi).kronecker(&id2);
    let projected = &pi1 * rho.matrix() * &pi1 + &pi2 * rho.matrix() * &pi2;
    DensityMatrix::new(projected, vec![2, 2])
}

/// What an ensemble contains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnsembleKind {
    CvEntangled,
    CvSeparable,
    QubitRandom,
    QubitSeparable,
}

impl EnsembleKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "cv_entangled" => Ok(EnsembleKind::CvEntangled),
            "cv_separable" => Ok(EnsembleKind::CvSeparable),
            "qubit_random" => Ok(EnsembleKind::QubitRandom),
            "qubit_separable" => Ok(EnsembleKind::QubitSeparable),
            other => Err(Error::Parse(format!("unknown ensemble kind `{other}`"))),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            EnsembleKind::CvEntangled => "cv_entangled",
            EnsembleKind::CvSeparable => "cv_separable",
            EnsembleKind::QubitRandom => "qubit_random",
            EnsembleKind::QubitSeparable => "qubit_separable",
        }
    }

    pub fn is_cv(self) -> bool {
        matches!(self, EnsembleKind::CvEntangled | EnsembleKind::CvSeparable)
    }
}

/// One generated input state.
#[derive(Debug, Clone)]
pub enum StateData<T: Real> {
    Cv(CovarianceMatrix<T>),
    Qubit(DensityMatrix<T>),
}

impl<T: Real> StateData<T> {
    pub fn as_cv(&self) -> Option<&CovarianceMatrix<T>> {
        match self {
            StateData::Cv(v) => Some(v),
            _ => None,
        }
    }

    pub fn as_qubit(&self) -> Option<&DensityMatrix<T>> {
        match self {
            StateData::Qubit(r) => Some(r),
            _ => None,
        }
    }
}

/// A reproducible collection of input states with their true entanglement.
#[derive(Debug, Clone)]
pub struct InputEnsemble<T: Real> {
    pub kind: EnsembleKind,
    pub states: Vec<StateData<T>>,
    pub true_entanglement: Vec<T>,
    pub seed: u64,
}

/// Stream tag separating ensemble draws from other uses of a master seed.
pub const ENSEMBLE_STREAM: u64 = 0x454e53; // "ENS"

/// Generate `n` states deterministically; state `i` uses the substream
/// `(seed, [ENSEMBLE_STREAM, kind, i])` so ensembles parallelize cleanly.
pub fn generate_ensemble<T: Real>(
    kind: EnsembleKind,
    n: usize,
    seed: u64,
    gamma_scale: T,
) -> Result<InputEnsemble<T>> {
    let mut states = Vec::with_capacity(n);
    let mut ent = Vec::with_capacity(n);
    let part = ModeBipartition::two_mode();
    for i in 0..n {
        let mut rng = substream(seed, &[ENSEMBLE_STREAM, kind as u64, i as u64]);
        match kind {
            EnsembleKind::CvEntangled | EnsembleKind::CvSeparable => {
                let v = gen_cv_input(&mut rng, gamma_scale, kind == EnsembleKind::CvSeparable)?;
                ent.push(log_negativity(&v, &part)?);
                states.push(StateData::Cv(v));
            }
            EnsembleKind::QubitRandom | EnsembleKind::QubitSeparable => {
                let r = gen_qubit_input(&mut rng, kind == EnsembleKind::QubitSeparable)?;
                ent.push(negativity(&r, &[0])?);
                states.push(StateData::Qubit(r));
            }
        }
    }
    Ok(InputEnsemble {
        kind,
        states,
        true_entanglement: ent,
        seed,
    })
}

/// Manifest written next to the per-state CSV blocks of a saved ensemble.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnsembleManifest {
    pub kind: String,
    pub seed: u64,
    pub n_states: usize,
    pub gamma_scale: f64,
    pub true_entanglement: Vec<f64>,
    pub files: Vec<String>,
}

impl<T: Real> InputEnsemble<T> {
    /// Write per-state CSV blocks plus `manifest.json` into `dir`.
    pub fn save(&self, dir: &std::path::Path, gamma_scale: T) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let mut files = Vec::with_capacity(self.states.len());
        for (i, state) in self.states.iter().enumerate() {
            let name = format!("state_{i:04}.csv");
            let text = match state {
                StateData::Cv(v) => v.to_csv(),
                StateData::Qubit(r) => r.to_csv(),
            };
            std::fs::write(dir.join(&name), text)?;
            files.push(name);
        }
        let manifest = EnsembleManifest {
            kind: self.kind.as_str().to_string(),
            seed: self.seed,
            n_states: self.states.len(),
            gamma_scale: crate::real::to_f64(gamma_scale),
            true_entanglement: self.true_entanglement.iter().map(|&e| crate::real::to_f64(e)).collect(),
            files,
        };
        let text = serde_json::to_string_pretty(&manifest)
            .map_err(|e| Error::Parse(e.to_string()))?;
        std::fs::write(dir.join("manifest.json"), text)?;
        Ok(())
    }
}
