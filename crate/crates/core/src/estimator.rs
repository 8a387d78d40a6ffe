//! Measurement-noise injection, ridge-regression readout training, state
//! reconstruction, entanglement scoring, and error metrics.

use nalgebra::{Complex, DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::{log_negativity_raw, ModeBipartition};
use crate::observables::ObservableVector;
use crate::qubit::{negativity_raw, DensityMatrix};
use crate::real::{real, to_f64, Real};

/// Gaussian measurement error of strength `zeta`: each recorded observable is
/// perturbed by an independent draw with standard deviation `zeta / 2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel<T> {
    pub zeta: T,
}

impl<T: Real> NoiseModel<T> {
    pub fn new(zeta: T) -> Result<Self> {
        if zeta < T::zero() {
            return Err(Error::validation("noise strength must be nonnegative"));
        }
        Ok(NoiseModel { zeta })
    }

    pub fn none() -> Self {
        NoiseModel { zeta: T::zero() }
    }

    pub fn std(&self) -> T {
        self.zeta * real::<T>(0.5)
    }
}

/// Perturb every entry with a fresh Gaussian draw of std `zeta / 2`.
/// Labels are untouched.
pub fn add_measurement_noise<T: Real, R: Rng>(
    v: &ObservableVector<T>,
    noise: &NoiseModel<T>,
    rng: &mut R,
) -> ObservableVector<T> {
    if noise.zeta == T::zero() {
        return v.clone();
    }
    let normal = Normal::new(0.0f64, to_f64(noise.std())).expect("valid std");
    let values = v.values().map(|x| x + real::<T>(normal.sample(rng)));
    v.with_values(values)
}

/// Which state elements the readout reconstructs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetLayout {
    /// Upper triangle (row-major, diagonal included) of a 2N x 2N covariance
    /// matrix; `n_modes = 2` gives the 10 unique elements.
    CvUpperTriangle { n_modes: usize },
    /// The 15 real coefficients of the two-qubit generalized Bloch
    /// decomposition (sigma_i x 1, 1 x sigma_j, sigma_i x sigma_j).
    QubitBloch,
}

impl TargetLayout {
    pub fn len(&self) -> usize {
        match self {
            TargetLayout::CvUpperTriangle { n_modes } => {
                let d = 2 * n_modes;
                d * (d + 1) / 2
            }
            TargetLayout::QubitBloch => 15,
        }
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Upper-triangle target vector of a covariance matrix.
pub fn cv_targets<T: Real>(v: &DMatrix<T>) -> DVector<T> {
    let d = v.nrows();
    let mut out = Vec::with_capacity(d * (d + 1) / 2);
    for i in 0..d {
        for j in i..d {
            out.push(v[(i, j)]);
        }
    }
    DVector::from_vec(out)
}

/// Rebuild a symmetric matrix from its upper triangle.
pub fn cv_matrix_from_targets<T: Real>(targets: &DVector<T>, n_modes: usize) -> DMatrix<T> {
    let d = 2 * n_modes;
    assert_eq!(targets.len(), d * (d + 1) / 2);
    let mut m = DMatrix::zeros(d, d);
    let mut idx = 0;
    for i in 0..d {
        for j in i..d {
            m[(i, j)] = targets[idx];
            m[(j, i)] = targets[idx];
            idx += 1;
        }
    }
    m
}

fn pauli<T: Real>(which: usize) -> DMatrix<Complex<T>> {
    let zero = Complex::new(T::zero(), T::zero());
    let one = Complex::new(T::one(), T::zero());
    let i = Complex::new(T::zero(), T::one());
    match which {
        // sigma_z |e> = +|e> with basis order (g, e)
        1 => DMatrix::from_row_slice(2, 2, &[zero, one, one, zero]),
        2 => DMatrix::from_row_slice(2, 2, &[zero, -i, i, zero]),
        3 => DMatrix::from_row_slice(2, 2, &[-one, zero, zero, one]),
        _ => DMatrix::identity(2, 2),
    }
}

fn kron<T: Real>(a: &DMatrix<Complex<T>>, b: &DMatrix<Complex<T>>) -> DMatrix<Complex<T>> {
    a.kronecker(b)
}

/// Bloch coefficients of a two-qubit density matrix:
/// `t_{ab} = tr(rho sigma_a x sigma_b)` for `(a, b) != (0, 0)`, 15 values.
pub fn qubit_targets<T: Real>(rho: &DensityMatrix<T>) -> DVector<T> {
    let m = rho.matrix();
    let mut out = Vec::with_capacity(15);
    for a in 0..4 {
        for b in 0..4 {
            if a == 0 && b == 0 {
                continue;
            }
            let op = kron(&pauli::<T>(a), &pauli::<T>(b));
            let mut tr = T::zero();
            for i in 0..4 {
                for j in 0..4 {
                    tr += (m[(i, j)] * op[(j, i)]).re;
                }
            }
            out.push(tr);
        }
    }
    DVector::from_vec(out)
}

/// Hermitian unit-trace matrix from 15 Bloch coefficients (not projected to
/// positive semidefinite).
pub fn qubit_matrix_from_targets<T: Real>(targets: &DVector<T>) -> DMatrix<Complex<T>> {
    assert_eq!(targets.len(), 15);
    let quarter = Complex::new(real::<T>(0.25), T::zero());
    let mut rho = DMatrix::identity(4, 4) * quarter;
    let mut idx = 0;
    for a in 0..4 {
        for b in 0..4 {
            if a == 0 && b == 0 {
                continue;
            }
            let op = kron(&pauli::<T>(a), &pauli::<T>(b));
            let c = Complex::new(targets[idx] * real::<T>(0.25), T::zero());
            rho += op * c;
            idx += 1;
        }
    }
    rho
}

/// Trained linear readout: one ridge coefficient row per target element.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainedReadout<T: Real> {
    /// `n_targets x (n_observables + 1)`; column 0 is the intercept.
    pub betas: DMatrix<T>,
    pub target_layout: TargetLayout,
    pub ridge_lambda: T,
    pub n_observables: usize,
    /// Set when the design matrix was rank deficient at `lambda = 0` and the
    /// minimum-norm solution was returned.
    pub rank_deficient: bool,
}

/// Closed-form ridge regression `beta = (X^T X + lambda I)^{-1} X^T Y`,
/// solved through the SVD of `X` for numerical stability. `X` carries the
/// leading 1-column; `lambda = 0` on a rank-deficient design returns the
/// minimum-norm solution and sets the warning flag.
pub fn ridge_fit<T: Real>(
    x: &DMatrix<T>,
    y: &DMatrix<T>,
    lambda: T,
    layout: TargetLayout,
) -> Result<TrainedReadout<T>> {
    if x.nrows() == 0 || x.nrows() != y.nrows() {
        return Err(Error::validation(
            "design and target matrices must have matching, nonzero row counts",
        ));
    }
    if lambda < T::zero() {
        return Err(Error::validation("ridge parameter must be nonnegative"));
    }
    if y.ncols() != layout.len() {
        return Err(Error::validation(format!(
            "target layout expects {} columns, got {}",
            layout.len(),
            y.ncols()
        )));
    }
    let n_features = x.ncols();
    let svd = x
        .clone()
        .svd_unordered(true, true);
    let u = svd.u.as_ref().expect("svd with u");
    let v_t = svd.v_t.as_ref().expect("svd with v_t");
    let sigma = &svd.singular_values;

    let sigma_max = sigma.iter().cloned().fold(T::zero(), |a, b| a.max(b));
    let cutoff = sigma_max * real::<T>(1e-13);
    let mut rank_deficient = false;

    // beta = V diag(s / (s^2 + lambda)) U^T y, per target column
    let uty = u.transpose() * y;
    let mut scaled = uty;
    for (i, &s) in sigma.iter().enumerate() {
        let factor = if lambda == T::zero() {
            if s <= cutoff {
                rank_deficient = true;
                T::zero()
            } else {
                T::one() / s
            }
        } else {
            s / (s * s + lambda)
        };
        for c in 0..scaled.ncols() {
            scaled[(i, c)] *= factor;
        }
    }
    if lambda == T::zero() && (sigma.len() < n_features) {
        rank_deficient = true;
    }
    let beta_cols = v_t.transpose() * scaled; // (n_features x n_targets)
    let betas = beta_cols.transpose();

    Ok(TrainedReadout {
        betas,
        target_layout: layout,
        ridge_lambda: lambda,
        n_observables: n_features - 1,
        rank_deficient,
    })
}

/// Assemble the regression design matrix `[1, v_1; 1, v_2; ...]`.
pub fn design_matrix<T: Real>(rows: &[DVector<T>]) -> DMatrix<T> {
    let n = rows.len();
    let w = rows.first().map_or(0, |r| r.len());
    let mut x = DMatrix::zeros(n, w + 1);
    for (i, row) in rows.iter().enumerate() {
        x[(i, 0)] = T::one();
        x.view_mut((i, 1), (1, w)).tr_copy_from(row);
    }
    x
}

/// Which state family a reconstruction targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StateKind {
    Cv,
    Qubit,
}

/// Result of applying a trained readout to one observable vector.
#[derive(Debug, Clone)]
pub struct Reconstruction<T: Real> {
    pub elements: DVector<T>,
    pub entanglement: T,
    /// False when the reconstructed state violates physicality; the estimate
    /// is still computed from the symmetrized reconstruction.
    pub physical: bool,
}

/// Predict target elements for one observable vector and score entanglement.
pub fn reconstruct_and_score<T: Real>(
    readout: &TrainedReadout<T>,
    v: &ObservableVector<T>,
    kind: StateKind,
) -> Result<Reconstruction<T>> {
    if v.len() != readout.n_observables {
        return Err(Error::validation(format!(
            "readout expects {} observables, got {}",
            readout.n_observables,
            v.len()
        )));
    }
    let mut feat = DVector::zeros(v.len() + 1);
    feat[0] = T::one();
    feat.rows_mut(1, v.len()).copy_from(v.values());
    let elements = &readout.betas * feat;

    match (kind, readout.target_layout) {
        (StateKind::Cv, TargetLayout::CvUpperTriangle { n_modes }) => {
            let m = cv_matrix_from_targets(&elements, n_modes);
            let (e, report) = log_negativity_raw(&m, &ModeBipartition::two_mode())?;
            Ok(Reconstruction {
                elements,
                entanglement: e,
                physical: report.physical,
            })
        }
        (StateKind::Qubit, TargetLayout::QubitBloch) => {
            let rho = qubit_matrix_from_targets(&elements);
            let (e, min_eig) = negativity_raw(&rho, &[2, 2], 0)?;
            Ok(Reconstruction {
                elements,
                entanglement: e,
                physical: min_eig >= -real::<T>(1e-9),
            })
        }
        _ => Err(Error::validation(
            "state kind does not match the readout target layout",
        )),
    }
}

/// How the ridge parameter is chosen for a fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case")]
pub enum RidgePolicy<T> {
    /// Use the given parameter directly.
    Fixed { lambda: T },
    /// Pick the candidate minimizing target RMS on a held-out tail of the
    /// training rows, then refit on everything.
    ValidationGrid {
        candidates: Vec<T>,
        validation_fraction: T,
    },
}

impl<T: Real> RidgePolicy<T> {
    /// Noiseless default: exact minimum-norm least squares. A positive ridge
    /// parameter would bias the reconstruction by ~lambda/sigma_min^2, far
    /// above the interpolation floor of the noiseless pipelines.
    pub fn noiseless() -> Self {
        RidgePolicy::Fixed { lambda: T::zero() }
    }

    /// Grid `{1e-6 ... 1e-1}` selected on a 20% validation split.
    pub fn noisy() -> Self {
        RidgePolicy::ValidationGrid {
            candidates: [1e-6, 1e-5, 1e-4, 1e-3, 1e-2, 1e-1]
                .iter()
                .map(|&x| real(x))
                .collect(),
            validation_fraction: real(0.2),
        }
    }

    /// The spec default for a given noise level.
    pub fn default_for(zeta: T) -> Self {
        if zeta > T::zero() {
            RidgePolicy::noisy()
        } else {
            RidgePolicy::noiseless()
        }
    }
}

/// Fit under a policy; returns the readout and the lambda actually used.
pub fn fit_with_policy<T: Real>(
    x: &DMatrix<T>,
    y: &DMatrix<T>,
    policy: &RidgePolicy<T>,
    layout: TargetLayout,
) -> Result<TrainedReadout<T>> {
    match policy {
        RidgePolicy::Fixed { lambda } => ridge_fit(x, y, *lambda, layout),
        RidgePolicy::ValidationGrid {
            candidates,
            validation_fraction,
        } => {
            if candidates.is_empty() {
                return Err(Error::validation("empty ridge candidate grid"));
            }
            let n = x.nrows();
            let n_val = ((real::<T>(n as f64) * *validation_fraction)
                .to_usize()
                .unwrap_or(0))
            .clamp(1, n.saturating_sub(2));
            let n_fit = n - n_val;
            let x_fit = x.rows(0, n_fit).into_owned();
            let y_fit = y.rows(0, n_fit).into_owned();
            let x_val = x.rows(n_fit, n_val).into_owned();
            let y_val = y.rows(n_fit, n_val).into_owned();
            let mut best: Option<(T, T)> = None; // (score, lambda)
            for &lam in candidates {
                let fit = ridge_fit(&x_fit, &y_fit, lam, layout)?;
                let resid = &x_val * fit.betas.transpose() - &y_val;
                let score = resid.norm();
                if best.map_or(true, |(s, _)| score < s) {
                    best = Some((score, lam));
                }
            }
            let (_, lambda) = best.expect("nonempty grid");
            ridge_fit(x, y, lambda, layout)
        }
    }
}

/// RMS entanglement estimation error over a test set.
pub fn estimation_error<T: Real>(e_est: &[T], e_in: &[T]) -> Result<T> {
    if e_est.is_empty() || e_est.len() != e_in.len() {
        return Err(Error::validation(
            "estimation error needs matching nonempty lists",
        ));
    }
    let n = real::<T>(e_est.len() as f64);
    let sum = e_est
        .iter()
        .zip(e_in)
        .map(|(&a, &b)| (a - b) * (a - b))
        .fold(T::zero(), |acc, x| acc + x);
    Ok((sum / n).sqrt())
}

/// Standard-deviation error against one fixed true value (denominator N - 1).
pub fn std_estimation_error<T: Real>(e_est: &[T], e_in: T) -> Result<T> {
    if e_est.len() < 2 {
        return Err(Error::validation(
            "standard-deviation error needs at least two estimates",
        ));
    }
    let n = real::<T>((e_est.len() - 1) as f64);
    let sum = e_est
        .iter()
        .map(|&a| (a - e_in) * (a - e_in))
        .fold(T::zero(), |acc, x| acc + x);
    Ok((sum / n).sqrt())
}

/// Log-log least-squares slope with its standard error.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ScalingFit<T> {
    pub slope: T,
    pub stderr: T,
    pub intercept: T,
    pub n_points: usize,
}

/// Fit `log(error) = intercept + slope * log(n)`.
pub fn fit_error_scaling<T: Real>(points: &[(T, T)]) -> Result<ScalingFit<T>> {
    if points.len() < 3 {
        return Err(Error::validation("scaling fit needs at least three points"));
    }
    if points.iter().any(|&(n, e)| n <= T::zero() || e <= T::zero()) {
        return Err(Error::validation(
            "scaling fit needs strictly positive coordinates",
        ));
    }
    let n = real::<T>(points.len() as f64);
    let xs: Vec<T> = points.iter().map(|&(x, _)| x.ln()).collect();
    let ys: Vec<T> = points.iter().map(|&(_, y)| y.ln()).collect();
    let xbar = xs.iter().fold(T::zero(), |a, &b| a + b) / n;
    let ybar = ys.iter().fold(T::zero(), |a, &b| a + b) / n;
    let sxx = xs
        .iter()
        .map(|&x| (x - xbar) * (x - xbar))
        .fold(T::zero(), |a, b| a + b);
    if sxx == T::zero() {
        return Err(Error::validation("scaling fit needs distinct abscissae"));
    }
    let sxy = xs
        .iter()
        .zip(&ys)
        .map(|(&x, &y)| (x - xbar) * (y - ybar))
        .fold(T::zero(), |a, b| a + b);
    let slope = sxy / sxx;
    let intercept = ybar - slope * xbar;
    let ssr = xs
        .iter()
        .zip(&ys)
        .map(|(&x, &y)| {
            let r = y - (intercept + slope * x);
            r * r
        })
        .fold(T::zero(), |a, b| a + b);
    let dof = real::<T>((points.len() - 2) as f64);
    let stderr = if dof > T::zero() {
        (ssr / dof / sxx).sqrt()
    } else {
        T::zero()
    };
    Ok(ScalingFit {
        slope,
        stderr,
        intercept,
        n_points: points.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::observables::{ObsKind, ObsLabel};
    use crate::rng::substream;
    use approx::assert_relative_eq;

    fn obs(values: Vec<f64>) -> ObservableVector<f64> {
        let labels = (0..values.len())
            .map(|i| ObsLabel { node: i, kind: ObsKind::Excitation, time: 1.0 })
            .collect();
        ObservableVector::new(DVector::from_vec(values), labels).unwrap()
    }

    #[test]
    fn zero_noise_is_identity() {
        let v = obs(vec![1.0, 2.0, 3.0]);
        let mut rng = substream(1, &[0]);
        let w = add_measurement_noise(&v, &NoiseModel::none(), &mut rng);
        assert_eq!(v, w);
    }

    #[test]
    fn noise_statistics_match_half_zeta() {
        let v = obs(vec![0.5]);
        let noise = NoiseModel::new(1e-3).unwrap();
        let mut rng = substream(2, &[0]);
        let n = 100_000;
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        for _ in 0..n {
            let w = add_measurement_noise(&v, &noise, &mut rng);
            let d = w.values()[0] - 0.5;
            sum += d;
            sumsq += d * d;
        }
        let mean = sum / n as f64;
        let std = (sumsq / n as f64 - mean * mean).sqrt();
        assert!((std - 5e-4).abs() / 5e-4 < 0.02, "std {std}");
        // labels untouched
        let mut rng = substream(3, &[0]);
        let w = add_measurement_noise(&v, &noise, &mut rng);
        assert_eq!(w.labels(), v.labels());
    }

    fn tiny_layout(n: usize) -> TargetLayout {
        // reuse the CV layout machinery for scalar regression tests
        let _ = n;
        TargetLayout::CvUpperTriangle { n_modes: 2 }
    }

    #[test]
    fn ridge_hand_worked_examples() {
        // X = [[1,1],[1,2]], Y = [2,3]^T
        let x = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 2.0]);
        let y = DMatrix::from_column_slice(2, 1, &[2.0, 3.0]);
        // lambda = 0 -> exact solve beta = [1, 1]
        let layout = TargetLayout::CvUpperTriangle { n_modes: 2 };
        let _ = layout;
        let fit = ridge_fit_plain(&x, &y, 0.0);
        assert_relative_eq!(fit[(0, 0)], 1.0, max_relative = 1e-12);
        assert_relative_eq!(fit[(0, 1)], 1.0, max_relative = 1e-12);
        // lambda = 1: XtX = [[2,3],[3,5]], XtY = [5,8], beta = [2/3, 1]
        let fit = ridge_fit_plain(&x, &y, 1.0);
        assert_relative_eq!(fit[(0, 0)], 2.0 / 3.0, max_relative = 1e-12);
        assert_relative_eq!(fit[(0, 1)], 1.0, max_relative = 1e-12);
    }

    // Thin wrapper so the hand example is independent of the layout plumbing.
    fn ridge_fit_plain(x: &DMatrix<f64>, y: &DMatrix<f64>, lambda: f64) -> DMatrix<f64> {
        let svd = x.clone().svd_unordered(true, true);
        let u = svd.u.unwrap();
        let vt = svd.v_t.unwrap();
        let mut uty = u.transpose() * y;
        for (i, &s) in svd.singular_values.iter().enumerate() {
            let f = if lambda == 0.0 { 1.0 / s } else { s / (s * s + lambda) };
            for c in 0..uty.ncols() {
                uty[(i, c)] *= f;
            }
        }
        (vt.transpose() * uty).transpose()
    }

    #[test]
    fn ridge_norm_shrinks_with_lambda() {
        let mut rng = substream(5, &[0]);
        let x = DMatrix::from_fn(30, 6, |_, _| rng.gen::<f64>());
        let y = DMatrix::from_fn(30, 10, |_, _| rng.gen::<f64>());
        let layout = TargetLayout::CvUpperTriangle { n_modes: 2 };
        let mut last = f64::INFINITY;
        for lam in [0.0, 1e-3, 1e-1, 1.0, 100.0, 1e6] {
            let fit = ridge_fit(&x, &y, lam, layout).unwrap();
            let norm = fit.betas.norm();
            assert!(norm <= last * (1.0 + 1e-12), "norm not nonincreasing");
            last = norm;
        }
        // very large lambda drives beta to zero
        let fit = ridge_fit(&x, &y, 1e14, layout).unwrap();
        assert!(fit.betas.amax() < 1e-9);
    }

    #[test]
    fn rank_deficient_design_flags_min_norm() {
        // duplicate column -> singular X^T X
        let x = DMatrix::from_row_slice(3, 3, &[1.0, 2.0, 2.0, 1.0, 3.0, 3.0, 1.0, 5.0, 5.0]);
        let y = DMatrix::from_column_slice(3, 10, &vec![1.0; 30]);
        let layout = tiny_layout(10);
        let fit = ridge_fit(&x, &y, 0.0, layout).unwrap();
        assert!(fit.rank_deficient);
        // minimum-norm solution splits weight across the duplicated columns
        assert_relative_eq!(fit.betas[(0, 1)], fit.betas[(0, 2)], max_relative = 1e-10);

        let fit = ridge_fit(&x, &y, 1e-8, layout).unwrap();
        assert!(!fit.rank_deficient);
    }

    #[test]
    fn normal_equation_residuals_are_small() {
        let mut rng = substream(6, &[0]);
        for case in 0..20 {
            let n = 10 + (case % 5) * 7;
            let p = 3 + case % 6;
            let x = DMatrix::from_fn(n, p, |_, _| rng.gen::<f64>() * 2.0 - 1.0);
            let y = DMatrix::from_fn(n, 10, |_, _| rng.gen::<f64>() * 2.0 - 1.0);
            let lam = [0.0, 1e-6, 1e-2][case % 3];
            let fit = ridge_fit(&x, &y, lam, tiny_layout(10)).unwrap();
            let xtx = x.transpose() * &x + DMatrix::identity(p, p) * lam;
            let xty = x.transpose() * &y;
            let resid = &xtx * fit.betas.transpose() - &xty;
            let rel = resid.norm() / xty.norm();
            assert!(rel < 1e-8, "residual {rel} at case {case}");
        }
    }

    #[test]
    fn estimation_error_examples() {
        assert_eq!(estimation_error(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        let a = 0.3;
        let delta = estimation_error(&[1.0 + a, 1.0 - a], &[1.0, 1.0]).unwrap();
        assert_relative_eq!(delta, a, max_relative = 1e-12);
        let sd = std_estimation_error(&[1.0 + a, 1.0 - a], 1.0).unwrap();
        assert_relative_eq!(sd, a * 2.0f64.sqrt(), max_relative = 1e-12);
        // homogeneity
        let c = 3.7;
        let d2 = estimation_error(&[1.0 + c * a, 1.0 - c * a], &[1.0, 1.0]).unwrap();
        assert_relative_eq!(d2, c * delta, max_relative = 1e-12);
        assert!(estimation_error::<f64>(&[], &[]).is_err());
        assert!(std_estimation_error(&[1.0], 1.0).is_err());
    }

    #[test]
    fn scaling_fit_recovers_synthetic_slopes() {
        let pts: Vec<(f64, f64)> = (1..=8).map(|n| (n as f64, (n as f64).powf(-0.5))).collect();
        let fit = fit_error_scaling(&pts).unwrap();
        assert_relative_eq!(fit.slope, -0.5, epsilon = 1e-10);
        assert!(fit.stderr < 1e-10);

        let pts: Vec<(f64, f64)> = (1..=8).map(|n| (n as f64, 2.0 / n as f64)).collect();
        let fit = fit_error_scaling(&pts).unwrap();
        assert_relative_eq!(fit.slope, -1.0, epsilon = 1e-10);

        assert!(fit_error_scaling(&[(1.0, 1.0), (2.0, 0.5)]).is_err());
        assert!(fit_error_scaling(&[(1.0, 1.0), (2.0, -0.5), (3.0, 0.2)]).is_err());
    }
}
