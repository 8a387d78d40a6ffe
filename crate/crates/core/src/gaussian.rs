//! Gaussian-state representation, linear-dynamics propagation, and
//! entanglement measures for continuous-variable systems.
//!
//! Conventions: dimensionless quadratures with `[x, p] = i`, vacuum
//! covariance `1/2 * I`, mode-major interleaved ordering `(x1, p1, x2, p2, ...)`.
//! Logarithmic negativity uses the natural logarithm, so a two-mode squeezed
//! vacuum with squeezing `r` has `E = 2r`.

use nalgebra::{Complex, DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ode::{integrate_adaptive, AdaptiveOptions, OdeState};
use crate::real::{real, to_f64, Real};

/// Relative tolerance for symmetry of a covariance matrix.
pub const SYMMETRY_RTOL: f64 = 1e-12;
/// Absolute slack below 1/2 allowed for the minimum symplectic eigenvalue.
pub const PHYSICALITY_ATOL: f64 = 1e-9;

/// Quadrature ordering tag carried by covariance matrices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum QuadratureOrdering {
    /// Plain mode-major interleaving (x1, p1, x2, p2, ...).
    Interleaved,
    /// Input modes first (q1, r1, q2, r2), then QN nodes (x1, p1, ...).
    InputFirst,
}

impl QuadratureOrdering {
    pub fn as_str(self) -> &'static str {
        match self {
            QuadratureOrdering::Interleaved => "interleaved",
            QuadratureOrdering::InputFirst => "input_first",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "interleaved" => Ok(QuadratureOrdering::Interleaved),
            "input_first" => Ok(QuadratureOrdering::InputFirst),
            other => Err(Error::Parse(format!("unknown ordering `{other}`"))),
        }
    }
}

/// Symplectic form for `n_modes` modes: block-diagonal `[[0, 1], [-1, 0]]`.
pub fn symplectic_form<T: Real>(n_modes: usize) -> DMatrix<T> {
    assert!(n_modes >= 1, "symplectic form needs at least one mode");
    let mut omega = DMatrix::zeros(2 * n_modes, 2 * n_modes);
    for m in 0..n_modes {
        omega[(2 * m, 2 * m + 1)] = T::one();
        omega[(2 * m + 1, 2 * m)] = -T::one();
    }
    omega
}

/// Physicality verdict together with the diagnostic eigenvalue.
#[derive(Debug, Clone, Copy)]
pub struct PhysicalityReport<T> {
    pub physical: bool,
    pub min_symplectic_eigenvalue: T,
}

/// Moduli of the eigenvalues of `i Omega V`, one per mode, ascending.
///
/// For positive-definite `V` the spectrum is taken from the Hermitian matrix
/// `i L^T Omega L` (Cholesky `V = L L^T`), which shares the eigenvalues of
/// `i Omega V`; the symmetric eigensolver converges unconditionally, unlike a
/// general Schur iteration on `Omega V`. The 2N moduli are sorted and every
/// second one kept, which is robust against numerical splitting of the pairs.
/// Indefinite two-mode matrices (reconstructions) fall back to the
/// closed-form quartic `nu^4 - Dt nu^2 + det V = 0`.
fn symplectic_spectrum_raw<T: Real>(v: &DMatrix<T>) -> Result<Vec<T>> {
    let n_modes = v.nrows() / 2;
    if let Some(chol) = v.clone().cholesky() {
        let l = chol.l();
        let m = l.transpose() * symplectic_form::<T>(n_modes) * &l;
        let hermitian = DMatrix::<Complex<T>>::from_fn(m.nrows(), m.ncols(), |i, j| {
            Complex::new(T::zero(), m[(i, j)])
        });
        let mut moduli: Vec<T> = hermitian
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .map(|e| e.abs())
            .collect();
        moduli.sort_by(|a, b| a.partial_cmp(b).expect("non-finite symplectic modulus"));
        return Ok(moduli.into_iter().step_by(2).collect());
    }
    if n_modes == 2 {
        return Ok(two_mode_spectrum_quartic(v));
    }
    Err(Error::validation(
        "symplectic spectrum of an indefinite matrix is only supported for two modes",
    ))
}

/// Closed-form symplectic moduli of a symmetric 4x4 matrix via the
/// characteristic quartic of `i Omega V`. Valid for indefinite input; complex
/// roots are mapped to their moduli.
fn two_mode_spectrum_quartic<T: Real>(v: &DMatrix<T>) -> Vec<T> {
    let det2 = |a: T, b: T, c: T, d: T| a * d - b * c;
    let da = det2(v[(0, 0)], v[(0, 1)], v[(1, 0)], v[(1, 1)]);
    let db = det2(v[(2, 2)], v[(2, 3)], v[(3, 2)], v[(3, 3)]);
    let dc = det2(v[(0, 2)], v[(0, 3)], v[(1, 2)], v[(1, 3)]);
    let delta = da + db + real::<T>(2.0) * dc;
    let det_v = v.determinant();
    let half = real::<T>(0.5);
    let disc = delta * delta - real::<T>(4.0) * det_v;
    let mut nus = if disc >= T::zero() {
        let s = disc.sqrt();
        [
            ((delta - s) * half).abs().sqrt(),
            ((delta + s) * half).abs().sqrt(),
        ]
    } else {
        // complex-conjugate roots of equal modulus sqrt(det V)
        let m = det_v.abs().sqrt().sqrt();
        [m, m]
    };
    if nus[0] > nus[1] {
        nus.swap(0, 1);
    }
    nus.to_vec()
}

fn check_square_even<T: Real>(m: &DMatrix<T>) -> Result<usize> {
    if m.nrows() != m.ncols() {
        return Err(Error::validation(format!(
            "matrix must be square, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    if m.nrows() == 0 || m.nrows() % 2 != 0 {
        return Err(Error::validation(format!(
            "matrix side must be a positive even number, got {}",
            m.nrows()
        )));
    }
    Ok(m.nrows() / 2)
}

fn asymmetry<T: Real>(m: &DMatrix<T>) -> T {
    let mut worst = T::zero();
    let mut scale = T::one();
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
            scale = scale.max(m[(i, j)].abs());
        }
    }
    worst / scale
}

/// Check `V + (i/2) Omega >= 0` via the symplectic spectrum.
///
/// Never errors on a square symmetric input; asymmetric or odd-sized input
/// simply reports unphysical.
pub fn is_physical<T: Real>(m: &DMatrix<T>) -> PhysicalityReport<T> {
    if check_square_even(m).is_err() || asymmetry(m) > real(SYMMETRY_RTOL) {
        return PhysicalityReport {
            physical: false,
            min_symplectic_eigenvalue: real(f64::NAN),
        };
    }
    match symplectic_spectrum_raw(m) {
        Ok(spectrum) => {
            let min_nu = spectrum[0];
            PhysicalityReport {
                physical: min_nu >= real::<T>(0.5) - real(PHYSICALITY_ATOL),
                min_symplectic_eigenvalue: min_nu,
            }
        }
        // indefinite beyond two modes: certainly unphysical, no diagnostic
        Err(_) => PhysicalityReport {
            physical: false,
            min_symplectic_eigenvalue: real(f64::NAN),
        },
    }
}

/// Symmetric, physical covariance matrix of an `n_modes`-mode Gaussian state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovarianceMatrix<T: Real> {
    matrix: DMatrix<T>,
    ordering: QuadratureOrdering,
}

impl<T: Real> CovarianceMatrix<T> {
    /// Validate symmetry and physicality, then store the symmetrized matrix.
    pub fn new(matrix: DMatrix<T>, ordering: QuadratureOrdering) -> Result<Self> {
        check_square_even(&matrix)?;
        if asymmetry(&matrix) > real(SYMMETRY_RTOL) {
            return Err(Error::validation(format!(
                "covariance matrix asymmetric beyond tolerance: {:e}",
                to_f64(asymmetry(&matrix))
            )));
        }
        let sym = (&matrix + matrix.transpose()) * real::<T>(0.5);
        let report = is_physical(&sym);
        if !report.physical {
            return Err(Error::Unphysical {
                min_nu: to_f64(report.min_symplectic_eigenvalue),
            });
        }
        Ok(CovarianceMatrix { matrix: sym, ordering })
    }

    /// Vacuum state `1/2 * I`.
    pub fn vacuum(n_modes: usize, ordering: QuadratureOrdering) -> Self {
        CovarianceMatrix {
            matrix: DMatrix::identity(2 * n_modes, 2 * n_modes) * real::<T>(0.5),
            ordering,
        }
    }

    /// Thermal product state with per-mode variance `(1 + 2 nbar) / 2`.
    pub fn thermal(n_modes: usize, nbar: T, ordering: QuadratureOrdering) -> Self {
        let var = (T::one() + real::<T>(2.0) * nbar) * real::<T>(0.5);
        CovarianceMatrix {
            matrix: DMatrix::identity(2 * n_modes, 2 * n_modes) * var,
            ordering,
        }
    }

    pub fn n_modes(&self) -> usize {
        self.matrix.nrows() / 2
    }

    pub fn ordering(&self) -> QuadratureOrdering {
        self.ordering
    }

    pub fn matrix(&self) -> &DMatrix<T> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<T> {
        self.matrix
    }

    /// Joint state `blockdiag(self, other)`.
    pub fn block_diag(&self, other: &CovarianceMatrix<T>, ordering: QuadratureOrdering) -> Self {
        let n = self.matrix.nrows();
        let m = other.matrix.nrows();
        let mut out = DMatrix::zeros(n + m, n + m);
        out.view_mut((0, 0), (n, n)).copy_from(&self.matrix);
        out.view_mut((n, n), (m, m)).copy_from(&other.matrix);
        CovarianceMatrix { matrix: out, ordering }
    }

    /// Serialize as a CSV block with a one-line header.
    pub fn to_csv(&self) -> String {
        let mut out = format!("n_modes={},ordering={}\n", self.n_modes(), self.ordering.as_str());
        for i in 0..self.matrix.nrows() {
            let row: Vec<String> = (0..self.matrix.ncols())
                .map(|j| format!("{:.16e}", self.matrix[(i, j)]))
                .collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    /// Parse the CSV block produced by [`CovarianceMatrix::to_csv`].
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty covariance block".into()))?;
        let mut n_modes = None;
        let mut ordering = None;
        for field in header.split(',') {
            match field.trim().split_once('=') {
                Some(("n_modes", v)) => {
                    n_modes = Some(v.parse::<usize>().map_err(|e| Error::Parse(e.to_string()))?)
                }
                Some(("ordering", v)) => ordering = Some(QuadratureOrdering::parse(v)?),
                _ => return Err(Error::Parse(format!("bad header field `{field}`"))),
            }
        }
        let n_modes = n_modes.ok_or_else(|| Error::Parse("header missing n_modes".into()))?;
        let ordering = ordering.ok_or_else(|| Error::Parse("header missing ordering".into()))?;
        let dim = 2 * n_modes;
        let mut entries = Vec::with_capacity(dim * dim);
        for line in lines {
            for tok in line.split(',') {
                let x: f64 = tok.trim().parse().map_err(|_| {
                    Error::Parse(format!("bad covariance entry `{}`", tok.trim()))
                })?;
                entries.push(real::<T>(x));
            }
        }
        if entries.len() != dim * dim {
            return Err(Error::Parse(format!(
                "expected {} entries, found {}",
                dim * dim,
                entries.len()
            )));
        }
        CovarianceMatrix::new(DMatrix::from_row_slice(dim, dim, &entries), ordering)
    }
}

/// First moments of the quadratures, same ordering as the covariance matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanVector<T: Real>(DVector<T>);

impl<T: Real> MeanVector<T> {
    pub fn new(v: DVector<T>) -> Result<Self> {
        if v.len() % 2 != 0 {
            return Err(Error::validation("mean vector length must be even"));
        }
        Ok(MeanVector(v))
    }

    pub fn zeros(n_modes: usize) -> Self {
        MeanVector(DVector::zeros(2 * n_modes))
    }

    pub fn n_modes(&self) -> usize {
        self.0.len() / 2
    }

    pub fn vector(&self) -> &DVector<T> {
        &self.0
    }
}

/// Drift, diffusion, and deterministic drive of a linear Langevin system:
/// `du/dt = A u + drive`, `dV/dt = A V + V A^T + D`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearDynamics<T: Real> {
    pub drift: DMatrix<T>,
    pub diffusion: DMatrix<T>,
    pub drive: DVector<T>,
}

impl<T: Real> LinearDynamics<T> {
    pub fn new(drift: DMatrix<T>, diffusion: DMatrix<T>, drive: DVector<T>) -> Result<Self> {
        let n = check_square_even(&drift)?;
        if diffusion.nrows() != 2 * n || diffusion.ncols() != 2 * n || drive.len() != 2 * n {
            return Err(Error::validation(
                "drift, diffusion, and drive dimensions do not match",
            ));
        }
        if asymmetry_abs(&diffusion) > real(1e-10) {
            return Err(Error::validation("diffusion matrix must be symmetric"));
        }
        let eigs = diffusion.clone().symmetric_eigen().eigenvalues;
        let min = eigs.iter().cloned().fold(T::zero(), |a, b| a.min(b));
        let scale = eigs.iter().cloned().fold(T::one(), |a, b| a.max(b.abs()));
        if min < -real::<T>(1e-10) * scale {
            return Err(Error::validation(format!(
                "diffusion matrix must be positive semidefinite (min eigenvalue {:e})",
                to_f64(min)
            )));
        }
        Ok(LinearDynamics { drift, diffusion, drive })
    }

    pub fn n_modes(&self) -> usize {
        self.drift.nrows() / 2
    }
}

fn asymmetry_abs<T: Real>(m: &DMatrix<T>) -> T {
    let mut worst = T::zero();
    for i in 0..m.nrows() {
        for j in (i + 1)..m.ncols() {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

/// Joint (mean, covariance) state used by the adaptive integrator.
#[derive(Clone)]
struct GaussianOdeState<T: Real> {
    mean: DVector<T>,
    cov: DMatrix<T>,
}

impl<T: Real> OdeState<T> for GaussianOdeState<T> {
    fn set_zero(&mut self) {
        self.mean.fill(T::zero());
        self.cov.fill(T::zero());
    }
    fn copy_from(&mut self, src: &Self) {
        self.mean.copy_from(&src.mean);
        self.cov.copy_from(&src.cov);
    }
    fn axpy(&mut self, a: T, x: &Self) {
        OdeState::axpy(&mut self.mean, a, &x.mean);
        OdeState::axpy(&mut self.cov, a, &x.cov);
    }
    fn error_rms(&self, y0: &Self, y1: &Self, atol: T, rtol: T) -> T {
        let em = self.mean.error_rms(&y0.mean, &y1.mean, atol, rtol);
        let ec = self.cov.error_rms(&y0.cov, &y1.cov, atol, rtol);
        let nm = real::<T>(self.mean.len() as f64);
        let nc = real::<T>(self.cov.len() as f64);
        ((em * em * nm + ec * ec * nc) / (nm + nc)).sqrt()
    }
    fn is_finite(&self) -> bool {
        OdeState::is_finite(&self.mean) && OdeState::is_finite(&self.cov)
    }
}

/// Evolve `(V0, u0)` for a time `t` under `dyn` with the adaptive 5(4) method
/// at the default tolerances (`rtol = 1e-10`).
pub fn evolve_gaussian<T: Real>(
    dynamics: &LinearDynamics<T>,
    v0: &CovarianceMatrix<T>,
    u0: &MeanVector<T>,
    t: T,
) -> Result<(CovarianceMatrix<T>, MeanVector<T>)> {
    evolve_gaussian_with(dynamics, v0, u0, t, &AdaptiveOptions::default())
}

/// [`evolve_gaussian`] with explicit integrator options.
pub fn evolve_gaussian_with<T: Real>(
    dynamics: &LinearDynamics<T>,
    v0: &CovarianceMatrix<T>,
    u0: &MeanVector<T>,
    t: T,
    opts: &AdaptiveOptions<T>,
) -> Result<(CovarianceMatrix<T>, MeanVector<T>)> {
    if v0.n_modes() != dynamics.n_modes() || u0.n_modes() != dynamics.n_modes() {
        return Err(Error::validation(
            "state and dynamics mode counts do not match",
        ));
    }
    let a = &dynamics.drift;
    let at = dynamics.drift.transpose();
    let y0 = GaussianOdeState {
        mean: u0.vector().clone(),
        cov: v0.matrix().clone(),
    };
    let y = integrate_adaptive(
        |y: &GaussianOdeState<T>, dy: &mut GaussianOdeState<T>| {
            dy.mean = a * &y.mean + &dynamics.drive;
            dy.cov = a * &y.cov + &y.cov * &at + &dynamics.diffusion;
        },
        &y0,
        t,
        opts,
    )?;
    let v = CovarianceMatrix::new(y.cov, v0.ordering())?;
    Ok((v, MeanVector::new(y.mean)?))
}

/// Closed-form propagator for a fixed time step:
/// `V -> W V W^T + C`, `u -> W u + j`,
/// with `W = exp(A dt)`, `C = int_0^dt exp(A s) D exp(A^T s) ds` (computed by
/// the block-matrix exponential), and `j` the accumulated deterministic drive.
#[derive(Debug, Clone)]
pub struct GaussianPropagator<T: Real> {
    w: DMatrix<T>,
    c: DMatrix<T>,
    j: DVector<T>,
}

impl<T: Real> GaussianPropagator<T> {
    pub fn new(dynamics: &LinearDynamics<T>, dt: T) -> Result<Self> {
        if dt < T::zero() {
            return Err(Error::validation("propagator step must be nonnegative"));
        }
        let n = dynamics.drift.nrows();
        let a_dt = &dynamics.drift * dt;
        let w = a_dt.exp();

        // Van Loan block [[A, D], [0, -A^T]]: the top-right block of the
        // exponential, times W^T, is the diffusion integral.
        let mut aug = DMatrix::zeros(2 * n, 2 * n);
        aug.view_mut((0, 0), (n, n)).copy_from(&dynamics.drift);
        aug.view_mut((0, n), (n, n)).copy_from(&dynamics.diffusion);
        aug.view_mut((n, n), (n, n))
            .copy_from(&(-dynamics.drift.transpose()));
        let e = (aug * dt).exp();
        let g = e.view((0, n), (n, n)).into_owned();
        let c = &g * w.transpose();
        let c = (&c + c.transpose()) * real::<T>(0.5);

        let j = if dynamics.drive.iter().all(|x| x.is_zero()) {
            DVector::zeros(n)
        } else {
            // [[A, I], [0, 0]]: top-right block is int_0^dt exp(A (dt - s)) ds.
            let mut aug = DMatrix::zeros(2 * n, 2 * n);
            aug.view_mut((0, 0), (n, n)).copy_from(&dynamics.drift);
            aug.view_mut((0, n), (n, n))
                .copy_from(&DMatrix::identity(n, n));
            let e = (aug * dt).exp();
            e.view((0, n), (n, n)) * &dynamics.drive
        };
        if !(OdeState::is_finite(&w) && OdeState::is_finite(&c)) {
            return Err(Error::Divergence { t: to_f64(dt) });
        }
        Ok(GaussianPropagator { w, c, j })
    }

    pub fn apply(&self, v: &DMatrix<T>, u: &DVector<T>) -> (DMatrix<T>, DVector<T>) {
        let v1 = &self.w * v * self.w.transpose() + &self.c;
        let v1 = (&v1 + v1.transpose()) * real::<T>(0.5);
        let u1 = &self.w * u + &self.j;
        (v1, u1)
    }
}

/// Closed-form evolution through the matrix-exponential path.
pub fn evolve_gaussian_expm<T: Real>(
    dynamics: &LinearDynamics<T>,
    v0: &CovarianceMatrix<T>,
    u0: &MeanVector<T>,
    t: T,
) -> Result<(CovarianceMatrix<T>, MeanVector<T>)> {
    let prop = GaussianPropagator::new(dynamics, t)?;
    let (v, u) = prop.apply(v0.matrix(), u0.vector());
    Ok((CovarianceMatrix::new(v, v0.ordering())?, MeanVector::new(u)?))
}

/// Sorted symplectic eigenvalues of a symmetric positive-definite matrix.
pub fn symplectic_eigenvalues_of<T: Real>(m: &DMatrix<T>) -> Result<Vec<T>> {
    check_square_even(m)?;
    if asymmetry(m) > real(SYMMETRY_RTOL) {
        return Err(Error::validation(
            "symplectic eigenvalues need a symmetric matrix",
        ));
    }
    if m.clone().cholesky().is_none() {
        return Err(Error::validation(
            "symplectic eigenvalues need a positive-definite matrix",
        ));
    }
    symplectic_spectrum_raw(m)
}

/// Sorted symplectic eigenvalues of a covariance matrix.
pub fn symplectic_eigenvalues<T: Real>(v: &CovarianceMatrix<T>) -> Vec<T> {
    symplectic_spectrum_raw(v.matrix()).expect("physical covariance matrix has a symplectic spectrum")
}

/// Bipartition of modes for entanglement measures.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModeBipartition {
    party_a: Vec<usize>,
    n_modes: usize,
}

impl ModeBipartition {
    pub fn new(party_a: &[usize], n_modes: usize) -> Result<Self> {
        if party_a.is_empty() || party_a.len() >= n_modes {
            return Err(Error::validation(
                "bipartition must leave both parties nonempty",
            ));
        }
        let mut sorted = party_a.to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != party_a.len() {
            return Err(Error::validation("bipartition contains duplicate modes"));
        }
        if *sorted.last().unwrap() >= n_modes {
            return Err(Error::validation("bipartition mode index out of range"));
        }
        Ok(ModeBipartition { party_a: sorted, n_modes })
    }

    /// The 1|1 split of a two-mode system.
    pub fn two_mode() -> Self {
        ModeBipartition { party_a: vec![0], n_modes: 2 }
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn party_b(&self) -> Vec<usize> {
        (0..self.n_modes).filter(|m| !self.party_a.contains(m)).collect()
    }
}

/// Partial transpose: negate the momentum rows/columns of party B.
pub fn partial_transpose<T: Real>(m: &DMatrix<T>, partition: &ModeBipartition) -> DMatrix<T> {
    let mut p = DMatrix::identity(m.nrows(), m.ncols());
    for mode in partition.party_b() {
        p[(2 * mode + 1, 2 * mode + 1)] = -T::one();
    }
    &p * m * &p
}

/// Logarithmic negativity (natural log) of a raw symmetric matrix.
///
/// The spectrum of the partially transposed matrix is evaluated through the
/// eigenvalue-moduli route, which is defined even when the reconstruction is
/// not positive definite; the report carries the physicality of the input.
pub fn log_negativity_raw<T: Real>(
    m: &DMatrix<T>,
    partition: &ModeBipartition,
) -> Result<(T, PhysicalityReport<T>)> {
    let n = check_square_even(m)?;
    if n != partition.n_modes() {
        return Err(Error::validation(
            "bipartition does not cover the matrix modes",
        ));
    }
    let sym = (m + m.transpose()) * real::<T>(0.5);
    let report = is_physical(&sym);
    let pt = partial_transpose(&sym, partition);
    let spectrum = symplectic_spectrum_raw(&pt)?;
    let nu_min = spectrum[0];
    let e = (-(real::<T>(2.0) * nu_min).ln()).max(T::zero());
    Ok((e, report))
}

/// Logarithmic negativity of a physical covariance matrix.
pub fn log_negativity<T: Real>(
    v: &CovarianceMatrix<T>,
    partition: &ModeBipartition,
) -> Result<T> {
    let (e, report) = log_negativity_raw(v.matrix(), partition)?;
    if !report.physical {
        return Err(Error::Unphysical {
            min_nu: to_f64(report.min_symplectic_eigenvalue),
        });
    }
    Ok(e)
}

/// Two-mode squeezed vacuum covariance matrix with squeezing `r`.
pub fn two_mode_squeezed<T: Real>(r: T) -> CovarianceMatrix<T> {
    let c = (real::<T>(2.0) * r).cosh() * real::<T>(0.5);
    let s = (real::<T>(2.0) * r).sinh() * real::<T>(0.5);
    let mut m = DMatrix::zeros(4, 4);
    for i in 0..4 {
        m[(i, i)] = c;
    }
    m[(0, 2)] = s;
    m[(2, 0)] = s;
    m[(1, 3)] = -s;
    m[(3, 1)] = -s;
    CovarianceMatrix::new(m, QuadratureOrdering::Interleaved).expect("TMSV is physical")
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn vacuum2() -> CovarianceMatrix<f64> {
        CovarianceMatrix::vacuum(2, QuadratureOrdering::Interleaved)
    }

    #[test]
    fn symplectic_form_definition() {
        let o1 = symplectic_form::<f64>(1);
        assert_eq!(o1, DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]));

        let o2 = symplectic_form::<f64>(2);
        assert_eq!(o2.view((0, 0), (2, 2)).into_owned(), o1);
        assert_eq!(o2.view((2, 2), (2, 2)).into_owned(), o1);
        assert_eq!(o2[(0, 2)], 0.0);

        for n in 1..5 {
            let o = symplectic_form::<f64>(n);
            let id = DMatrix::<f64>::identity(2 * n, 2 * n);
            assert_relative_eq!(&o * o.transpose(), id.clone());
            assert_relative_eq!(&o * &o, -id);
        }
    }

    #[test]
    fn evolve_zero_generator_is_identity() {
        let dynamics = LinearDynamics::new(
            DMatrix::zeros(4, 4),
            DMatrix::zeros(4, 4),
            DVector::zeros(4),
        )
        .unwrap();
        let v0 = two_mode_squeezed(0.7);
        let u0 = MeanVector::zeros(2);
        let (v, u) = evolve_gaussian(&dynamics, &v0, &u0, 7.0).unwrap();
        assert_relative_eq!(v.matrix(), v0.matrix(), max_relative = 1e-12);
        assert_eq!(u.vector(), u0.vector());
    }

    #[test]
    fn evolve_pure_loss_closed_form() {
        // A = -I, D = I (gamma = 1): V(t) = exp(-2t) (V0 - I/2) + I/2.
        let dynamics = LinearDynamics::new(
            -DMatrix::identity(2, 2),
            DMatrix::identity(2, 2),
            DVector::zeros(2),
        )
        .unwrap();
        let v0 = CovarianceMatrix::new(
            DMatrix::identity(2, 2) * 1.5,
            QuadratureOrdering::Interleaved,
        )
        .unwrap();
        let (v, _) = evolve_gaussian(&dynamics, &v0, &MeanVector::zeros(1), 1.0).unwrap();
        let expected = (-2.0f64).exp() * 1.0 + 0.5;
        assert_relative_eq!(v.matrix()[(0, 0)], expected, max_relative = 1e-9);
        assert_relative_eq!(v.matrix()[(1, 1)], expected, max_relative = 1e-9);
        assert_relative_eq!(expected, 0.635335, max_relative = 1e-6);

        // Vacuum is the fixed point of loss to vacuum.
        let vac = CovarianceMatrix::vacuum(1, QuadratureOrdering::Interleaved);
        for t in [0.3, 1.0, 4.0] {
            let (v, _) = evolve_gaussian(&dynamics, &vac, &MeanVector::zeros(1), t).unwrap();
            assert_relative_eq!(v.matrix(), vac.matrix(), epsilon = 1e-10);
        }
    }

    #[test]
    fn expm_path_matches_adaptive_path() {
        let a = DMatrix::from_row_slice(
            4,
            4,
            &[
                -0.1, 0.9, 0.2, 0.0, -0.9, -0.1, 0.0, -0.2, 0.2, 0.0, -0.05, 1.3, 0.0, -0.2,
                -1.3, -0.05,
            ],
        );
        let d = DMatrix::from_diagonal(&DVector::from_vec(vec![0.1, 0.1, 0.05, 0.05]));
        let drive = DVector::from_vec(vec![0.0, -0.7, 0.0, -0.3]);
        let dynamics = LinearDynamics::new(a, d, drive).unwrap();
        let v0 = two_mode_squeezed(0.4);
        let u0 = MeanVector::zeros(2);
        let (v_a, u_a) = evolve_gaussian(&dynamics, &v0, &u0, 1.7).unwrap();
        let (v_e, u_e) = evolve_gaussian_expm(&dynamics, &v0, &u0, 1.7).unwrap();
        assert_relative_eq!(v_a.matrix(), v_e.matrix(), max_relative = 1e-8, epsilon = 1e-10);
        assert_relative_eq!(u_a.vector(), u_e.vector(), max_relative = 1e-8, epsilon = 1e-10);
    }

    #[test]
    fn evolution_composes() {
        let a = DMatrix::from_row_slice(2, 2, &[-0.2, 1.0, -1.0, -0.2]);
        let d = DMatrix::identity(2, 2) * 0.4;
        let dynamics = LinearDynamics::new(a, d, DVector::from_vec(vec![0.0, -1.0])).unwrap();
        let v0 = CovarianceMatrix::new(
            DMatrix::identity(2, 2) * 0.8,
            QuadratureOrdering::Interleaved,
        )
        .unwrap();
        let u0 = MeanVector::new(DVector::from_vec(vec![0.3, -0.1])).unwrap();
        let (v1, u1) = evolve_gaussian(&dynamics, &v0, &u0, 1.1).unwrap();
        let (v1b, u1b) = evolve_gaussian(&dynamics, &v1, &u1, 0.6).unwrap();
        let (v2, u2) = evolve_gaussian(&dynamics, &v0, &u0, 1.7).unwrap();
        assert_relative_eq!(v1b.matrix(), v2.matrix(), max_relative = 1e-9, epsilon = 1e-11);
        assert_relative_eq!(u1b.vector(), u2.vector(), max_relative = 1e-9, epsilon = 1e-11);
    }

    #[test]
    fn symplectic_eigenvalues_examples() {
        let vac = CovarianceMatrix::<f64>::vacuum(3, QuadratureOrdering::Interleaved);
        for nu in symplectic_eigenvalues(&vac) {
            assert_relative_eq!(nu, 0.5, max_relative = 1e-12);
        }

        let th = CovarianceMatrix::new(
            DMatrix::identity(2, 2) * 1.5,
            QuadratureOrdering::Interleaved,
        )
        .unwrap();
        assert_relative_eq!(symplectic_eigenvalues(&th)[0], 1.5, max_relative = 1e-12);

        let tmsv = two_mode_squeezed(1.0);
        let nus = symplectic_eigenvalues(&tmsv);
        assert_relative_eq!(nus[0], 0.5, max_relative = 1e-9);
        assert_relative_eq!(nus[1], 0.5, max_relative = 1e-9);
    }

    #[test]
    fn symplectic_eigenvalues_validation() {
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 0.3, -0.3, 1.0]);
        assert!(symplectic_eigenvalues_of(&bad).is_err());
        let not_pd = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert!(symplectic_eigenvalues_of(&not_pd).is_err());
    }

    #[test]
    fn log_negativity_examples() {
        let part = ModeBipartition::two_mode();
        assert_relative_eq!(log_negativity(&vacuum2(), &part).unwrap(), 0.0);

        let th = CovarianceMatrix::new(
            DMatrix::identity(4, 4) * 1.5,
            QuadratureOrdering::Interleaved,
        )
        .unwrap();
        assert_relative_eq!(log_negativity(&th, &part).unwrap(), 0.0);

        let tmsv = two_mode_squeezed(1.0);
        assert_relative_eq!(log_negativity(&tmsv, &part).unwrap(), 2.0, max_relative = 1e-9);
    }

    #[test]
    fn unphysical_input_reports_min_eigenvalue() {
        let m = DMatrix::<f64>::identity(2, 2) * 0.4;
        let report = is_physical(&m);
        assert!(!report.physical);
        assert_relative_eq!(report.min_symplectic_eigenvalue, 0.4, max_relative = 1e-12);

        assert!(is_physical(&(DMatrix::<f64>::identity(2, 2) * 0.5)).physical);

        let err = CovarianceMatrix::new(m, QuadratureOrdering::Interleaved).unwrap_err();
        match err {
            Error::Unphysical { min_nu } => assert_relative_eq!(min_nu, 0.4, max_relative = 1e-9),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn covariance_csv_round_trip() {
        let v = two_mode_squeezed(0.9);
        let text = v.to_csv();
        assert!(text.starts_with("n_modes=2,ordering=interleaved"));
        let back = CovarianceMatrix::<f64>::from_csv(&text).unwrap();
        assert_eq!(back.matrix(), v.matrix());
    }

    #[test]
    fn bipartition_validation() {
        assert!(ModeBipartition::new(&[0], 2).is_ok());
        assert!(ModeBipartition::new(&[], 2).is_err());
        assert!(ModeBipartition::new(&[0, 1], 2).is_err());
        assert!(ModeBipartition::new(&[3], 2).is_err());
        assert!(ModeBipartition::new(&[0, 0], 3).is_err());
    }
}
