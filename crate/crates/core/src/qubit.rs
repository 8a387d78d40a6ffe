//! Discrete-variable network: Lindblad evolution of input qubits coupled to a
//! qubit QN, Pauli/excitation readout, and negativity of density matrices.
//!
//! Basis convention: index 0 is the ground state `|g>`, the lowering operator
//! is `|g><e|`, and `sigma_z |e> = +|e>` so the ground state has `<sigma_z> = -1`.

use nalgebra::{Complex, DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::observables::{ObsKind, ObsLabel, ObservableVector, QubitObservableSet};
use crate::ode::{integrate_adaptive, AdaptiveOptions};
use crate::real::{real, to_f64, Real};

/// Largest supported QN size; the joint dimension is `2^(2 + Q)`.
pub const QN_QUBIT_CAP: usize = 8;

/// Tolerance on `|tr(rho) - 1|` after an evolution.
pub const TRACE_DRIFT_LIMIT: f64 = 1e-8;

type CMatrix<T> = DMatrix<Complex<T>>;

fn czero<T: Real>() -> Complex<T> {
    Complex::new(T::zero(), T::zero())
}

fn cre<T: Real>(x: T) -> Complex<T> {
    Complex::new(x, T::zero())
}

fn adjoint<T: Real>(m: &CMatrix<T>) -> CMatrix<T> {
    m.adjoint()
}

fn hermiticity_defect<T: Real>(m: &CMatrix<T>) -> T {
    let mut worst = T::zero();
    let mut scale = T::one();
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            let d = m[(i, j)] - m[(j, i)].conj();
            worst = worst.max((d.re * d.re + d.im * d.im).sqrt());
            let a = m[(i, j)];
            scale = scale.max((a.re * a.re + a.im * a.im).sqrt());
        }
    }
    worst / scale
}

/// Complex Hermitian unit-trace state over a tensor product of subsystems.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityMatrix<T: Real> {
    matrix: CMatrix<T>,
    subsystem_dims: Vec<usize>,
}

impl<T: Real> DensityMatrix<T> {
    pub fn new(matrix: CMatrix<T>, subsystem_dims: Vec<usize>) -> Result<Self> {
        let dim: usize = subsystem_dims.iter().product();
        if subsystem_dims.is_empty() || dim == 0 {
            return Err(Error::validation("subsystem dimensions must be nonempty"));
        }
        if matrix.nrows() != dim || matrix.ncols() != dim {
            return Err(Error::validation(format!(
                "matrix is {}x{}, subsystem dims give {}",
                matrix.nrows(),
                matrix.ncols(),
                dim
            )));
        }
        if hermiticity_defect(&matrix) > real(1e-12) {
            return Err(Error::validation("density matrix must be Hermitian"));
        }
        let tr: Complex<T> = (0..dim).map(|i| matrix[(i, i)]).fold(czero(), |a, b| a + b);
        if (tr.re - T::one()).abs() > real(1e-10) || tr.im.abs() > real(1e-10) {
            return Err(Error::validation(format!(
                "density matrix trace must be 1, got {:?}",
                (to_f64(tr.re), to_f64(tr.im))
            )));
        }
        let herm = (&matrix + adjoint(&matrix)) * cre(real::<T>(0.5));
        let eigs = herm.clone().symmetric_eigen().eigenvalues;
        let min = eigs.iter().cloned().fold(T::zero(), |a, b| a.min(b));
        if min < -real::<T>(1e-9) {
            return Err(Error::validation(format!(
                "density matrix has negative eigenvalue {:e}",
                to_f64(min)
            )));
        }
        Ok(DensityMatrix {
            matrix: herm,
            subsystem_dims,
        })
    }

    /// Pure state `|psi><psi|` (normalizes the vector).
    pub fn pure(psi: &DVector<Complex<T>>, subsystem_dims: Vec<usize>) -> Result<Self> {
        let norm = psi
            .iter()
            .map(|z| z.re * z.re + z.im * z.im)
            .fold(T::zero(), |a, b| a + b)
            .sqrt();
        if norm == T::zero() {
            return Err(Error::validation("state vector must be nonzero"));
        }
        let v = psi / cre(norm);
        let m = &v * adjoint(&DMatrix::from_column_slice(v.len(), 1, v.as_slice()));
        DensityMatrix::new(m, subsystem_dims)
    }

    /// All qubits in the ground state `|g...g>`.
    pub fn all_ground(n_qubits: usize) -> Self {
        let dim = 1usize << n_qubits;
        let mut m = CMatrix::zeros(dim, dim);
        m[(0, 0)] = cre(T::one());
        DensityMatrix {
            matrix: m,
            subsystem_dims: vec![2; n_qubits],
        }
    }

    pub fn matrix(&self) -> &CMatrix<T> {
        &self.matrix
    }

    pub fn subsystem_dims(&self) -> &[usize] {
        &self.subsystem_dims
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn purity(&self) -> T {
        let m2 = &self.matrix * &self.matrix;
        (0..self.dim()).map(|i| m2[(i, i)].re).fold(T::zero(), |a, b| a + b)
    }

    pub fn tensor(&self, other: &DensityMatrix<T>) -> DensityMatrix<T> {
        let m = self.matrix.kronecker(&other.matrix);
        let mut dims = self.subsystem_dims.clone();
        dims.extend_from_slice(&other.subsystem_dims);
        DensityMatrix {
            matrix: m,
            subsystem_dims: dims,
        }
    }

    /// Interleaved real/imag CSV block with a `dims=` header.
    pub fn to_csv(&self) -> String {
        let dims: Vec<String> = self.subsystem_dims.iter().map(|d| d.to_string()).collect();
        let mut out = format!("dims={}\n", dims.join(","));
        for i in 0..self.dim() {
            let row: Vec<String> = (0..self.dim())
                .flat_map(|j| {
                    let z = self.matrix[(i, j)];
                    [format!("{:.16e}", z.re), format!("{:.16e}", z.im)]
                })
                .collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty density-matrix block".into()))?;
        let dims_str = header
            .trim()
            .strip_prefix("dims=")
            .ok_or_else(|| Error::Parse("header must start with dims=".into()))?;
        let dims: Vec<usize> = dims_str
            .split(',')
            .map(|t| t.trim().parse().map_err(|_| Error::Parse("bad dim".into())))
            .collect::<Result<_>>()?;
        let dim: usize = dims.iter().product();
        let mut values = Vec::with_capacity(2 * dim * dim);
        for line in lines {
            for tok in line.split(',') {
                let x: f64 = tok
                    .trim()
                    .parse()
                    .map_err(|_| Error::Parse(format!("bad entry `{}`", tok.trim())))?;
                values.push(real::<T>(x));
            }
        }
        if values.len() != 2 * dim * dim {
            return Err(Error::Parse(format!(
                "expected {} numbers, found {}",
                2 * dim * dim,
                values.len()
            )));
        }
        let m = CMatrix::from_fn(dim, dim, |i, j| {
            Complex::new(values[2 * (i * dim + j)], values[2 * (i * dim + j) + 1])
        });
        DensityMatrix::new(m, dims)
    }
}

/// Mixed-radix index helpers for subsystem-wise operations.
fn decompose(mut idx: usize, dims: &[usize], out: &mut [usize]) {
    for k in (0..dims.len()).rev() {
        out[k] = idx % dims[k];
        idx /= dims[k];
    }
}

fn compose(parts: &[usize], dims: &[usize]) -> usize {
    let mut idx = 0;
    for k in 0..dims.len() {
        idx = idx * dims[k] + parts[k];
    }
    idx
}

/// Partial transpose over the listed subsystems.
pub fn partial_transpose_dm<T: Real>(
    m: &CMatrix<T>,
    dims: &[usize],
    party: &[usize],
) -> CMatrix<T> {
    let dim = m.nrows();
    let mut out = CMatrix::zeros(dim, dim);
    let mut bi = vec![0usize; dims.len()];
    let mut bj = vec![0usize; dims.len()];
    for i in 0..dim {
        for j in 0..dim {
            decompose(i, dims, &mut bi);
            decompose(j, dims, &mut bj);
            for &s in party {
                let t = bi[s];
                bi[s] = bj[s];
                bj[s] = t;
            }
            out[(compose(&bi, dims), compose(&bj, dims))] = m[(i, j)];
        }
    }
    out
}

/// Negativity and minimum eigenvalue of a raw Hermitian-symmetrized matrix.
///
/// Returns `(sum of |negative eigenvalues| of the partial transpose,
/// min eigenvalue of the input)`; usable on reconstructions that are not
/// positive semidefinite.
pub fn negativity_raw<T: Real>(
    m: &CMatrix<T>,
    dims: &[usize],
    transpose_subsystem: usize,
) -> Result<(T, T)> {
    let dim: usize = dims.iter().product();
    if m.nrows() != dim || m.ncols() != dim {
        return Err(Error::validation("matrix does not match subsystem dims"));
    }
    if transpose_subsystem >= dims.len() {
        return Err(Error::validation("partition subsystem out of range"));
    }
    let herm = (m + adjoint(m)) * cre(real::<T>(0.5));
    let own_eigs = herm.clone().symmetric_eigen().eigenvalues;
    let min_eig = own_eigs.iter().cloned().fold(T::zero(), |a, b| a.min(b));
    let pt = partial_transpose_dm(&herm, dims, &[transpose_subsystem]);
    let eigs = pt.symmetric_eigen().eigenvalues;
    let neg = eigs
        .iter()
        .filter(|&&e| e < T::zero())
        .fold(T::zero(), |a, &b| a - b);
    Ok((neg, min_eig))
}

/// Negativity of a state across `party_a | rest`.
pub fn negativity<T: Real>(rho: &DensityMatrix<T>, party_a: &[usize]) -> Result<T> {
    let n = rho.subsystem_dims().len();
    if party_a.is_empty() || party_a.len() >= n {
        return Err(Error::validation(
            "bipartition must leave both parties nonempty",
        ));
    }
    let mut seen = vec![false; n];
    for &s in party_a {
        if s >= n || seen[s] {
            return Err(Error::validation("invalid bipartition subsystem list"));
        }
        seen[s] = true;
    }
    let pt = partial_transpose_dm(rho.matrix(), rho.subsystem_dims(), party_a);
    let eigs = pt.symmetric_eigen().eigenvalues;
    Ok(eigs
        .iter()
        .filter(|&&e| e < T::zero())
        .fold(T::zero(), |a, &b| a - b))
}

/// General Lindblad right-hand side with dense collapse operators.
fn lindblad_rhs_dense<T: Real>(
    h: &CMatrix<T>,
    collapse: &[(CMatrix<T>, T)],
    rho: &CMatrix<T>,
) -> CMatrix<T> {
    let i = Complex::new(T::zero(), T::one());
    let hr = h * rho;
    let mut out = (&hr - adjoint(&hr)) * (-i);
    for (x, rate) in collapse {
        if *rate == T::zero() {
            continue;
        }
        let xr = x * rho;
        let xrx = &xr * adjoint(x);
        let xdx = adjoint(x) * x;
        let anti = &xdx * rho + rho * &xdx;
        out += (xrx - anti * cre(real::<T>(0.5))) * cre(*rate);
    }
    out
}

/// Integrate the Lindblad master equation
/// `drho/dt = -i [H, rho] + sum_k (rate_k / 2) (2 X rho X† - {X†X, rho})`
/// to time `t` at relative tolerance `1e-10`.
///
/// Note the rate convention: the generator carries `rate/2`, so a single
/// qubit decaying through `X = |g><e|` at rate `gamma` has
/// `rho_ee(t) = exp(-gamma t) rho_ee(0)`.
pub fn lindblad_evolve<T: Real>(
    h: &CMatrix<T>,
    collapse: &[(CMatrix<T>, T)],
    rho0: &DensityMatrix<T>,
    t: T,
) -> Result<DensityMatrix<T>> {
    lindblad_evolve_with(h, collapse, rho0, t, &AdaptiveOptions::default())
}

pub fn lindblad_evolve_with<T: Real>(
    h: &CMatrix<T>,
    collapse: &[(CMatrix<T>, T)],
    rho0: &DensityMatrix<T>,
    t: T,
    opts: &AdaptiveOptions<T>,
) -> Result<DensityMatrix<T>> {
    let dim = rho0.dim();
    if h.nrows() != dim || h.ncols() != dim {
        return Err(Error::validation("Hamiltonian dimension mismatch"));
    }
    if hermiticity_defect(h) > real(1e-12) {
        return Err(Error::validation("Hamiltonian must be Hermitian"));
    }
    for (x, rate) in collapse {
        if x.nrows() != dim || x.ncols() != dim {
            return Err(Error::validation("collapse operator dimension mismatch"));
        }
        if *rate < T::zero() {
            return Err(Error::validation("collapse rates must be nonnegative"));
        }
    }
    let rho = integrate_adaptive(
        |y: &CMatrix<T>, dy: &mut CMatrix<T>| {
            let r = lindblad_rhs_dense(h, collapse, y);
            dy.copy_from(&r);
        },
        rho0.matrix(),
        t,
        opts,
    )?;
    let tr: T = (0..dim).map(|i| rho[(i, i)].re).fold(T::zero(), |a, b| a + b);
    let drift = (tr - T::one()).abs();
    if drift > real(TRACE_DRIFT_LIMIT) {
        return Err(Error::TraceDrift {
            drift: to_f64(drift),
            limit: TRACE_DRIFT_LIMIT,
        });
    }
    DensityMatrix::new(rho, rho0.subsystem_dims().to_vec())
}

/// Random parameter set of the qubit network (same roles and ranges as the
/// CV reservoir, with lowering operators in place of annihilation operators).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QubitQnConfig<T: Real> {
    pub n_qubits: usize,
    pub delta: Vec<T>,
    pub lambda: Vec<T>,
    /// 2 x Q row-major input-node couplings.
    pub k: Vec<T>,
    /// Q x Q symmetric zero-diagonal node-node couplings.
    pub j: Vec<T>,
    pub p: Vec<T>,
    pub gamma: Vec<T>,
    pub kappa: Vec<T>,
    pub gamma_scale: T,
    pub seed: Option<u64>,
}

pub const N_INPUT_QUBITS: usize = 2;

impl<T: Real> QubitQnConfig<T> {
    pub fn validate(&self) -> Result<()> {
        let q = self.n_qubits;
        if q == 0 {
            return Err(Error::validation("network needs at least one qubit"));
        }
        if self.delta.len() != N_INPUT_QUBITS
            || self.lambda.len() != q
            || self.k.len() != N_INPUT_QUBITS * q
            || self.j.len() != q * q
            || self.p.len() != q
            || self.gamma.len() != N_INPUT_QUBITS
            || self.kappa.len() != q
        {
            return Err(Error::validation("parameter array lengths do not match"));
        }
        if self
            .gamma
            .iter()
            .chain(self.kappa.iter())
            .any(|&r| r < T::zero())
        {
            return Err(Error::validation("loss rates must be nonnegative"));
        }
        Ok(())
    }

    #[inline]
    pub fn k_at(&self, n: usize, m: usize) -> T {
        self.k[n * self.n_qubits + m]
    }

    #[inline]
    pub fn j_at(&self, m: usize, mp: usize) -> T {
        self.j[m * self.n_qubits + mp]
    }

    pub fn n_total(&self) -> usize {
        N_INPUT_QUBITS + self.n_qubits
    }
}

/// Draw one qubit-network realization: `{Delta, Lambda, K, J, P}` uniform on
/// `[0, 1]`·scale and losses uniform on `[0, 0.1]`·scale.
pub fn sample_qubit_params<T: Real, R: Rng>(
    n_qubits: usize,
    gamma_scale: T,
    rng: &mut R,
) -> QubitQnConfig<T> {
    assert!(n_qubits >= 1);
    let mut draw = |scale: f64| -> T { real::<T>(rng.gen::<f64>() * scale) * gamma_scale };
    let delta: Vec<T> = (0..N_INPUT_QUBITS).map(|_| draw(1.0)).collect();
    let lambda: Vec<T> = (0..n_qubits).map(|_| draw(1.0)).collect();
    let k: Vec<T> = (0..N_INPUT_QUBITS * n_qubits).map(|_| draw(1.0)).collect();
    let mut j = vec![T::zero(); n_qubits * n_qubits];
    for m in 0..n_qubits {
        for mp in (m + 1)..n_qubits {
            let v = draw(1.0);
            j[m * n_qubits + mp] = v;
            j[mp * n_qubits + m] = v;
        }
    }
    let p: Vec<T> = (0..n_qubits).map(|_| draw(1.0)).collect();
    let gamma: Vec<T> = (0..N_INPUT_QUBITS).map(|_| draw(0.1)).collect();
    let kappa: Vec<T> = (0..n_qubits).map(|_| draw(0.1)).collect();
    QubitQnConfig {
        n_qubits,
        delta,
        lambda,
        k,
        j,
        p,
        gamma,
        kappa,
        gamma_scale,
        seed: None,
    }
}

/// Bit of qubit `k` in the big-endian computational-basis index.
#[inline]
fn qubit_bit(k: usize, n_total: usize) -> usize {
    1usize << (n_total - 1 - k)
}

/// Dense Hamiltonian for the joint (2 + Q)-qubit system, filled through the
/// bit structure of the basis.
pub fn build_qubit_hamiltonian<T: Real>(config: &QubitQnConfig<T>) -> Result<CMatrix<T>> {
    config.validate()?;
    let q = config.n_qubits;
    let n_total = N_INPUT_QUBITS + q;
    let dim = 1usize << n_total;
    let mut h = CMatrix::<T>::zeros(dim, dim);

    // detunings: Delta_n |e><e| on inputs, Lambda_m on nodes
    for i in 0..dim {
        let mut diag = T::zero();
        for n in 0..N_INPUT_QUBITS {
            if i & qubit_bit(n, n_total) != 0 {
                diag += config.delta[n];
            }
        }
        for m in 0..q {
            if i & qubit_bit(N_INPUT_QUBITS + m, n_total) != 0 {
                diag += config.lambda[m];
            }
        }
        h[(i, i)] = cre(diag);
    }
    // coherent drives: P_m sigma_x on nodes
    for m in 0..q {
        let b = qubit_bit(N_INPUT_QUBITS + m, n_total);
        for i in 0..dim {
            h[(i ^ b, i)] += cre(config.p[m]);
        }
    }
    // excitation hopping K_{nm} and J_{mm'}
    let hop = |site_a: usize, site_b: usize, strength: T, h: &mut CMatrix<T>| {
        let ba = qubit_bit(site_a, n_total);
        let bb = qubit_bit(site_b, n_total);
        for i in 0..dim {
            if i & ba != 0 && i & bb == 0 {
                let jdx = i ^ ba ^ bb;
                h[(jdx, i)] += cre(strength);
                h[(i, jdx)] += cre(strength);
            }
        }
    };
    for n in 0..N_INPUT_QUBITS {
        for m in 0..q {
            hop(n, N_INPUT_QUBITS + m, config.k_at(n, m), &mut h);
        }
    }
    for m in 0..q {
        for mp in (m + 1)..q {
            hop(N_INPUT_QUBITS + m, N_INPUT_QUBITS + mp, config.j_at(m, mp), &mut h);
        }
    }
    Ok(h)
}

/// Bit-structured Lindblad kernel: the Hamiltonian is real and sparse in the
/// computational basis (diagonal detunings, sigma_x drives, two-site hops),
/// and dissipation is lowering-operator decay per site. Applying these terms
/// directly beats a dense complex matmul by more than an order of magnitude,
/// which is what makes the Q = 5 sweeps tractable.
struct LindbladKernel<T: Real> {
    dim: usize,
    /// Diagonal of H (detuning sums per basis state).
    diag: Vec<T>,
    /// sigma_x drives: (bit mask, strength).
    flips: Vec<(usize, T)>,
    /// Excitation hops: (bit a, bit b, strength).
    hops: Vec<(usize, usize, T)>,
    /// (bit mask, rate) per dissipating site.
    decay: Vec<(usize, T)>,
    /// dg[i] = sum of rates of excited sites in basis state i.
    dg: Vec<T>,
}

impl<T: Real> LindbladKernel<T> {
    fn new(config: &QubitQnConfig<T>) -> Result<Self> {
        config.validate()?;
        let q = config.n_qubits;
        let n_total = N_INPUT_QUBITS + q;
        let dim = 1usize << n_total;

        let mut diag = vec![T::zero(); dim];
        for (i, d) in diag.iter_mut().enumerate() {
            for n in 0..N_INPUT_QUBITS {
                if i & qubit_bit(n, n_total) != 0 {
                    *d += config.delta[n];
                }
            }
            for m in 0..q {
                if i & qubit_bit(N_INPUT_QUBITS + m, n_total) != 0 {
                    *d += config.lambda[m];
                }
            }
        }
        let flips: Vec<(usize, T)> = (0..q)
            .map(|m| (qubit_bit(N_INPUT_QUBITS + m, n_total), config.p[m]))
            .filter(|&(_, p)| p != T::zero())
            .collect();
        let mut hops = Vec::new();
        for n in 0..N_INPUT_QUBITS {
            for m in 0..q {
                if config.k_at(n, m) != T::zero() {
                    hops.push((
                        qubit_bit(n, n_total),
                        qubit_bit(N_INPUT_QUBITS + m, n_total),
                        config.k_at(n, m),
                    ));
                }
            }
        }
        for m in 0..q {
            for mp in (m + 1)..q {
                if config.j_at(m, mp) != T::zero() {
                    hops.push((
                        qubit_bit(N_INPUT_QUBITS + m, n_total),
                        qubit_bit(N_INPUT_QUBITS + mp, n_total),
                        config.j_at(m, mp),
                    ));
                }
            }
        }
        let mut decay = Vec::new();
        for n in 0..N_INPUT_QUBITS {
            decay.push((qubit_bit(n, n_total), config.gamma[n]));
        }
        for m in 0..q {
            decay.push((qubit_bit(N_INPUT_QUBITS + m, n_total), config.kappa[m]));
        }
        let mut dg = vec![T::zero(); dim];
        for (i, g) in dg.iter_mut().enumerate() {
            for &(bit, rate) in &decay {
                if i & bit != 0 {
                    *g += rate;
                }
            }
        }
        Ok(LindbladKernel {
            dim,
            diag,
            flips,
            hops,
            decay,
            dg,
        })
    }

    /// `hs[:, j] = H s[:, j]` through the sparse real structure.
    fn apply_h(&self, s: &[Complex<T>], hs: &mut [Complex<T>]) {
        let d = self.dim;
        for (s_col, hs_col) in s.chunks_exact(d).zip(hs.chunks_exact_mut(d)) {
            for i in 0..d {
                hs_col[i] = s_col[i] * cre(self.diag[i]);
            }
            for &(bit, p) in &self.flips {
                let pc = cre(p);
                for i in 0..d {
                    hs_col[i ^ bit] += s_col[i] * pc;
                }
            }
            for &(ba, bb, k) in &self.hops {
                let kc = cre(k);
                for i in 0..d {
                    if i & ba != 0 && i & bb == 0 {
                        let j = i ^ ba ^ bb;
                        hs_col[j] += s_col[i] * kc;
                        hs_col[i] += s_col[j] * kc;
                    }
                }
            }
        }
    }

    /// RHS for a stack `[rho_1 | rho_2 | ...]` of Hermitian blocks:
    /// `-i (H rho - (H rho)†)` plus lowering-operator dissipation.
    fn rhs_stacked(&self, s: &CMatrix<T>, out: &mut CMatrix<T>, scratch: &mut CMatrix<T>) {
        let d = self.dim;
        let blocks = s.ncols() / d;
        let half = real::<T>(0.5);

        self.apply_h(s.as_slice(), scratch.as_mut_slice());
        let hs = scratch.as_slice();
        let sd = s.as_slice();
        let od = out.as_mut_slice();

        for b in 0..blocks {
            let base = b * d * d;
            for col in 0..d {
                let cbase = base + col * d;
                for row in 0..d {
                    let v = hs[cbase + row] - hs[base + row * d + col].conj();
                    // -i v
                    od[cbase + row] = Complex::new(v.im, -v.re);
                }
            }
            // damping -(dg_i + dg_j)/2 rho_ij and refill sum_k rate X rho X†
            for col in 0..d {
                let cbase = base + col * d;
                let dg_col = self.dg[col];
                for row in 0..d {
                    let damp = (self.dg[row] + dg_col) * half;
                    od[cbase + row] -= sd[cbase + row] * cre(damp);
                }
            }
            for &(bit, rate) in &self.decay {
                if rate == T::zero() {
                    continue;
                }
                let rc = cre(rate);
                for col in 0..d {
                    if col & bit != 0 {
                        continue;
                    }
                    let src = base + (col | bit) * d;
                    let dst = base + col * d;
                    for row in 0..d {
                        if row & bit == 0 {
                            od[dst + row] += sd[src + (row | bit)] * rc;
                        }
                    }
                }
            }
        }
    }
}

fn observables_of_block<T: Real>(
    rho: &CMatrix<T>,
    block: usize,
    dim: usize,
    config: &QubitQnConfig<T>,
    set: QubitObservableSet,
    time: T,
    values: &mut Vec<T>,
    labels: &mut Vec<ObsLabel<T>>,
) {
    let q = config.n_qubits;
    let n_total = N_INPUT_QUBITS + q;
    let two = real::<T>(2.0);
    for m in 0..q {
        let bit = qubit_bit(N_INPUT_QUBITS + m, n_total);
        let mut sz = T::zero();
        let mut sx = T::zero();
        let mut sy = T::zero();
        for i in 0..dim {
            let d = rho[(i, block * dim + i)].re;
            sz += if i & bit != 0 { d } else { -d };
            if i & bit == 0 {
                let off = rho[(i, block * dim + (i | bit))];
                sx += two * off.re;
                sy -= two * off.im;
            }
        }
        match set {
            QubitObservableSet::PauliTriple => {
                values.push(sx);
                labels.push(ObsLabel { node: m, kind: ObsKind::PauliX, time });
                values.push(sy);
                labels.push(ObsLabel { node: m, kind: ObsKind::PauliY, time });
                values.push(sz);
                labels.push(ObsLabel { node: m, kind: ObsKind::PauliZ, time });
            }
            QubitObservableSet::Excitation => {
                values.push((T::one() + sz) * real::<T>(0.5));
                labels.push(ObsLabel { node: m, kind: ObsKind::Excitation, time });
            }
        }
    }
}

fn check_probe_inputs<T: Real>(
    config: &QubitQnConfig<T>,
    readout_times: &[T],
) -> Result<()> {
    config.validate()?;
    if config.n_qubits > QN_QUBIT_CAP {
        return Err(Error::Capacity {
            q: config.n_qubits,
            cap: QN_QUBIT_CAP,
        });
    }
    if readout_times.is_empty() {
        return Err(Error::validation("at least one readout time is required"));
    }
    if readout_times.iter().any(|&t| t <= T::zero()) {
        return Err(Error::validation("readout times must be positive"));
    }
    if readout_times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::validation("readout times must be increasing"));
    }
    Ok(())
}

/// Evolve `rho_in (x) |g...g>` under the qubit network and record the chosen
/// observables of every QN qubit at each readout time.
pub fn run_qubit_probe<T: Real>(
    config: &QubitQnConfig<T>,
    rho_in: &DensityMatrix<T>,
    readout_times: &[T],
    set: QubitObservableSet,
) -> Result<ObservableVector<T>> {
    check_probe_inputs(config, readout_times)?;
    if rho_in.subsystem_dims() != [2, 2] {
        return Err(Error::validation("input state must be two qubits"));
    }
    let kernel = LindbladKernel::new(config)?;
    let joint = rho_in.tensor(&DensityMatrix::all_ground(config.n_qubits));
    let mut rho = joint.matrix().clone();
    let dim = kernel.dim;
    let mut scratch = CMatrix::<T>::zeros(dim, dim);

    let mut values = Vec::new();
    let mut labels = Vec::new();
    let mut prev = T::zero();
    for &t in readout_times {
        rho = integrate_adaptive(
            |y: &CMatrix<T>, dy: &mut CMatrix<T>| kernel.rhs_stacked(y, dy, &mut scratch),
            &rho,
            t - prev,
            &AdaptiveOptions::default(),
        )?;
        prev = t;
        observables_of_block(&rho, 0, dim, config, set, t, &mut values, &mut labels);
    }
    let tr: T = (0..dim).map(|i| rho[(i, i)].re).fold(T::zero(), |a, b| a + b);
    if (tr - T::one()).abs() > real(TRACE_DRIFT_LIMIT) {
        return Err(Error::TraceDrift {
            drift: to_f64((tr - T::one()).abs()),
            limit: TRACE_DRIFT_LIMIT,
        });
    }
    ObservableVector::new(DVector::from_vec(values), labels)
}

/// Hermitian basis coordinates of a 4x4 matrix: diagonal entries, then the
/// real and imaginary parts of each upper off-diagonal entry.
fn hermitian_coords<T: Real>(m: &CMatrix<T>) -> DVector<T> {
    let mut out = Vec::with_capacity(16);
    for i in 0..4 {
        out.push(m[(i, i)].re);
    }
    for i in 0..4 {
        for j in (i + 1)..4 {
            out.push(m[(i, j)].re);
            out.push(m[(i, j)].im);
        }
    }
    DVector::from_vec(out)
}

fn hermitian_basis_element<T: Real>(idx: usize) -> CMatrix<T> {
    let mut m = CMatrix::<T>::zeros(4, 4);
    if idx < 4 {
        m[(idx, idx)] = cre(T::one());
        return m;
    }
    let mut k = 4;
    for i in 0..4 {
        for j in (i + 1)..4 {
            if idx == k {
                m[(i, j)] = cre(T::one());
                m[(j, i)] = cre(T::one());
                return m;
            }
            if idx == k + 1 {
                m[(i, j)] = Complex::new(T::zero(), T::one());
                m[(j, i)] = Complex::new(T::zero(), -T::one());
                return m;
            }
            k += 2;
        }
    }
    unreachable!("basis index out of range")
}

/// Precomputed linear response of one qubit-network realization.
///
/// Observables are linear in the input state, so evolving the 16 Hermitian
/// basis elements once yields the full map; repeated probes of the same
/// network then cost a 16-column contraction instead of a Lindblad solve.
pub struct QubitProbe<T: Real> {
    config: QubitQnConfig<T>,
    response: DMatrix<T>,
    labels: Vec<ObsLabel<T>>,
}

impl<T: Real> QubitProbe<T> {
    pub fn build(
        config: QubitQnConfig<T>,
        readout_times: &[T],
        set: QubitObservableSet,
    ) -> Result<Self> {
        check_probe_inputs(&config, readout_times)?;
        let kernel = LindbladKernel::new(&config)?;
        let dim = kernel.dim;
        let ground = DensityMatrix::<T>::all_ground(config.n_qubits);

        // horizontal stack of the 16 evolved basis embeddings
        let mut stack = CMatrix::<T>::zeros(dim, 16 * dim);
        for b in 0..16 {
            let embedded = hermitian_basis_element::<T>(b).kronecker(ground.matrix());
            stack.view_mut((0, b * dim), (dim, dim)).copy_from(&embedded);
        }

        let per_time = match set {
            QubitObservableSet::PauliTriple => 3 * config.n_qubits,
            QubitObservableSet::Excitation => config.n_qubits,
        };
        let n_obs = per_time * readout_times.len();
        let mut response = DMatrix::<T>::zeros(n_obs, 16);
        let mut labels: Vec<ObsLabel<T>> = Vec::new();

        let mut scratch = CMatrix::<T>::zeros(dim, 16 * dim);
        // The readout is trained on the map as integrated, so a looser
        // tolerance here does not limit estimation accuracy.
        let opts = AdaptiveOptions {
            rtol: crate::real::real(1e-8),
            atol: crate::real::real(1e-10),
            ..AdaptiveOptions::default()
        };
        let mut prev = T::zero();
        let mut row0 = 0usize;
        for &t in readout_times {
            stack = integrate_adaptive(
                |y: &CMatrix<T>, dy: &mut CMatrix<T>| kernel.rhs_stacked(y, dy, &mut scratch),
                &stack,
                t - prev,
                &opts,
            )?;
            prev = t;
            for b in 0..16 {
                let mut values = Vec::with_capacity(per_time);
                let mut labs = Vec::with_capacity(per_time);
                observables_of_block(&stack, b, dim, &config, set, t, &mut values, &mut labs);
                for (r, v) in values.into_iter().enumerate() {
                    response[(row0 + r, b)] = v;
                }
                if b == 0 {
                    labels.extend(labs);
                }
            }
            row0 += per_time;
        }
        Ok(QubitProbe { config, response, labels })
    }

    pub fn n_observables(&self) -> usize {
        self.response.nrows()
    }

    pub fn config(&self) -> &QubitQnConfig<T> {
        &self.config
    }

    pub fn observe(&self, rho_in: &DensityMatrix<T>) -> Result<ObservableVector<T>> {
        if rho_in.subsystem_dims() != [2, 2] {
            return Err(Error::validation("input state must be two qubits"));
        }
        let coords = hermitian_coords(rho_in.matrix());
        let values = &self.response * coords;
        ObservableVector::new(values, self.labels.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;
    use approx::assert_relative_eq;

    fn sigma_minus<T: Real>() -> CMatrix<T> {
        let mut m = CMatrix::zeros(2, 2);
        m[(0, 1)] = cre(T::one());
        m
    }

    fn excited<T: Real>() -> DensityMatrix<T> {
        let mut m = CMatrix::zeros(2, 2);
        m[(1, 1)] = cre(T::one());
        DensityMatrix::new(m, vec![2]).unwrap()
    }

    #[test]
    fn dark_state_is_stationary() {
        let ground = DensityMatrix::<f64>::all_ground(1);
        let h = CMatrix::<f64>::zeros(2, 2);
        let rho = lindblad_evolve(&h, &[(sigma_minus(), 1.0)], &ground, 2.0).unwrap();
        assert_relative_eq!(rho.matrix()[(0, 0)].re, 1.0, max_relative = 1e-10);
        assert!(rho.matrix()[(1, 1)].re.abs() < 1e-12);
    }

    #[test]
    fn single_qubit_decay_matches_closed_form() {
        let h = CMatrix::<f64>::zeros(2, 2);
        let rho = lindblad_evolve(&h, &[(sigma_minus(), 1.0)], &excited::<f64>(), 1.0).unwrap();
        assert_relative_eq!(rho.matrix()[(1, 1)].re, (-1.0f64).exp(), max_relative = 1e-9);
    }

    #[test]
    fn unitary_limit_preserves_purity() {
        // H = sigma_x, no dissipation
        let mut h = CMatrix::<f64>::zeros(2, 2);
        h[(0, 1)] = cre(1.0);
        h[(1, 0)] = cre(1.0);
        let psi = DVector::from_vec(vec![
            Complex::new(0.8, 0.0),
            Complex::new(0.36, 0.48),
        ]);
        let rho0 = DensityMatrix::pure(&psi, vec![2]).unwrap();
        let rho = lindblad_evolve(&h, &[], &rho0, 3.0).unwrap();
        assert_relative_eq!(rho.purity(), 1.0, max_relative = 1e-9);
    }

    fn bell_state<T: Real>() -> DensityMatrix<T> {
        // (|ge> + |eg>)/sqrt(2)
        let mut psi = DVector::from_element(4, czero::<T>());
        psi[1] = cre(T::one());
        psi[2] = cre(T::one());
        DensityMatrix::pure(&psi, vec![2, 2]).unwrap()
    }

    #[test]
    fn negativity_examples() {
        let ground = DensityMatrix::<f64>::all_ground(1);
        let prod = ground.tensor(&excited::<f64>());
        assert!(negativity(&prod, &[0]).unwrap() < 1e-12);

        assert_relative_eq!(negativity(&bell_state::<f64>(), &[0]).unwrap(), 0.5, max_relative = 1e-10);

        let mixed = DensityMatrix::new(
            CMatrix::<f64>::identity(4, 4) * cre(0.25),
            vec![2, 2],
        )
        .unwrap();
        assert!(negativity(&mixed, &[0]).unwrap() < 1e-12);

        assert!(negativity(&bell_state::<f64>(), &[]).is_err());
        assert!(negativity(&bell_state::<f64>(), &[0, 1]).is_err());
        assert!(negativity(&bell_state::<f64>(), &[5]).is_err());
    }

    #[test]
    fn negativity_invariant_under_local_unitaries() {
        // exp(-i theta sigma_x / 2) on each side, mixed with a phase
        let theta = 0.73f64;
        let c = (theta / 2.0).cos();
        let s = (theta / 2.0).sin();
        let u1 = CMatrix::from_row_slice(
            2,
            2,
            &[
                Complex::new(c, 0.0),
                Complex::new(0.0, -s),
                Complex::new(0.0, -s),
                Complex::new(c, 0.0),
            ],
        );
        let phi = 1.21f64;
        let u2 = CMatrix::from_row_slice(
            2,
            2,
            &[
                Complex::new(1.0, 0.0),
                Complex::new(0.0, 0.0),
                Complex::new(0.0, 0.0),
                Complex::new(phi.cos(), phi.sin()),
            ],
        );
        let u = u1.kronecker(&u2);
        let rho = bell_state::<f64>();
        let rotated = &u * rho.matrix() * adjoint(&u);
        let rot = DensityMatrix::new(rotated, vec![2, 2]).unwrap();
        assert_relative_eq!(
            negativity(&rot, &[0]).unwrap(),
            negativity(&rho, &[0]).unwrap(),
            max_relative = 1e-9
        );
    }

    #[test]
    fn decoupled_network_reads_ground_values() {
        let q = 3;
        let config = QubitQnConfig::<f64> {
            n_qubits: q,
            delta: vec![0.3, 0.4],
            lambda: vec![0.0; q],
            k: vec![0.0; 2 * q],
            j: vec![0.0; q * q],
            p: vec![0.0; q],
            gamma: vec![0.0; 2],
            kappa: vec![0.0; q],
            gamma_scale: 1.0,
            seed: None,
        };
        let rho_in = bell_state::<f64>();
        let obs = run_qubit_probe(
            &config,
            &rho_in,
            &[1.0, 2.0],
            QubitObservableSet::PauliTriple,
        )
        .unwrap();
        assert_eq!(obs.len(), 3 * q * 2);
        for (v, l) in obs.values().iter().zip(obs.labels()) {
            match l.kind {
                ObsKind::PauliZ => assert_relative_eq!(*v, -1.0, max_relative = 1e-9),
                _ => assert!(v.abs() < 1e-9),
            }
        }
        let exc = run_qubit_probe(&config, &rho_in, &[1.0], QubitObservableSet::Excitation)
            .unwrap();
        assert_eq!(exc.len(), q);
        for v in exc.values().iter() {
            assert!(v.abs() < 1e-9);
        }
    }

    #[test]
    fn capacity_cap_is_enforced() {
        let mut rng = substream(1, &[0]);
        let config = sample_qubit_params::<f64, _>(9, 1.0, &mut rng);
        let rho_in = bell_state::<f64>();
        match run_qubit_probe(&config, &rho_in, &[1.0], QubitObservableSet::Excitation) {
            Err(Error::Capacity { q, cap }) => {
                assert_eq!(q, 9);
                assert_eq!(cap, QN_QUBIT_CAP);
            }
            other => panic!("expected capacity error, got {other:?}"),
        }
    }

    #[test]
    fn response_map_matches_direct_probe() {
        let mut rng = substream(8, &[1]);
        let config = sample_qubit_params::<f64, _>(3, 1.0, &mut rng);
        let times = [std::f64::consts::FRAC_PI_2, std::f64::consts::PI];
        let probe = QubitProbe::build(config.clone(), &times, QubitObservableSet::PauliTriple)
            .unwrap();

        let mut rng = substream(9, &[2]);
        let rho_in = crate::inputs::gen_qubit_input::<f64, _>(&mut rng, false).unwrap();
        let via_map = probe.observe(&rho_in).unwrap();
        let direct =
            run_qubit_probe(&config, &rho_in, &times, QubitObservableSet::PauliTriple).unwrap();
        for i in 0..via_map.len() {
            assert_relative_eq!(
                via_map.values()[i],
                direct.values()[i],
                max_relative = 1e-5,
                epsilon = 1e-7
            );
        }
    }

    #[test]
    fn kernel_rhs_matches_dense_lindblad() {
        let mut rng = substream(4, &[7]);
        let config = sample_qubit_params::<f64, _>(2, 1.0, &mut rng);
        let kernel = LindbladKernel::new(&config).unwrap();
        let dim = kernel.dim;

        // dense operators for the same model
        let h = build_qubit_hamiltonian(&config).unwrap();
        let mut collapse = Vec::new();
        let n_total = N_INPUT_QUBITS + config.n_qubits;
        for site in 0..n_total {
            let rate = if site < 2 {
                config.gamma[site]
            } else {
                config.kappa[site - 2]
            };
            let mut x = CMatrix::<f64>::zeros(dim, dim);
            let bit = qubit_bit(site, n_total);
            for i in 0..dim {
                if i & bit != 0 {
                    x[(i ^ bit, i)] = cre(1.0);
                }
            }
            collapse.push((x, rate));
        }

        let mut rng2 = substream(5, &[8]);
        let rho = crate::inputs::gen_qubit_input::<f64, _>(&mut rng2, false)
            .unwrap()
            .tensor(&DensityMatrix::all_ground(config.n_qubits));
        let dense = lindblad_rhs_dense(&h, &collapse, rho.matrix());
        let mut fast = CMatrix::<f64>::zeros(dim, dim);
        let mut scratch = CMatrix::<f64>::zeros(dim, dim);
        kernel.rhs_stacked(rho.matrix(), &mut fast, &mut scratch);
        assert_relative_eq!(
            fast.map(|z| z.re),
            dense.map(|z| z.re),
            max_relative = 1e-12,
            epsilon = 1e-12
        );
        assert_relative_eq!(
            fast.map(|z| z.im),
            dense.map(|z| z.im),
            max_relative = 1e-12,
            epsilon = 1e-12
        );
    }

    #[test]
    fn density_matrix_csv_round_trip() {
        let rho = bell_state::<f64>();
        let text = rho.to_csv();
        assert!(text.starts_with("dims=2,2"));
        let back = DensityMatrix::<f64>::from_csv(&text).unwrap();
        assert_relative_eq!(
            back.matrix().map(|z| z.re),
            rho.matrix().map(|z| z.re),
            epsilon = 1e-15
        );
    }
}
