//! Gravity-induced-entanglement sensing: free gravitational phase of two
//! trapped masses, linearized optomechanical probe phase, separable-trained
//! estimation of the grown entanglement, and the direct-measurement baseline.
//!
//! All configuration is in SI units; the dynamics acts on dimensionless
//! quadratures `x = x_SI sqrt(m w / hbar)`, `p = p_SI / sqrt(hbar m w)`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{
    cv_matrix_from_targets, cv_targets, design_matrix, fit_with_policy, std_estimation_error,
    RidgePolicy, TargetLayout,
};
use crate::gaussian::{
    log_negativity, log_negativity_raw, CovarianceMatrix, GaussianPropagator, LinearDynamics,
    ModeBipartition, QuadratureOrdering,
};
use crate::real::{real, to_f64, Real};

pub const GRAVITATIONAL_CONSTANT: f64 = 6.674_30e-11; // m^3 kg^-1 s^-2
pub const HBAR: f64 = 1.054_571_817e-34; // J s
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0; // m / s
pub const BOLTZMANN: f64 = 1.380_649e-23; // J / K

/// Thermal occupancy of a bath at temperature `t_kelvin` for a mode at
/// angular frequency `omega`.
pub fn nbar_from_temperature<T: Real>(omega_rad_per_s: T, t_kelvin: T) -> T {
    let x = real::<T>(HBAR) * omega_rad_per_s / (real::<T>(BOLTZMANN) * t_kelvin);
    T::one() / (x.exp() - T::one())
}

/// How the effective cavity decay rates and detunings are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum DetuningMode<T> {
    /// Both cavities share the given effective rates.
    Fixed { kappa_hz: T, delta_hz: T },
    /// Drawn once per experiment, uniform on `[1, 2]` times the finesse-derived
    /// decay rate `pi c / (2 F L)`.
    Randomized,
}

/// Effective cavity rates of one experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeRates<T> {
    pub kappa_a: T,
    pub kappa_b: T,
    pub delta_a: T,
    pub delta_b: T,
}

/// Physical parameter bundle for the experiment (SI units).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GieConfig<T: Real> {
    pub mass_kg: T,
    /// Trap angular frequency; the quoted `0.1 Hz` enters the dynamics as
    /// an angular frequency.
    pub omega_rad_per_s: T,
    pub density_kg_per_m3: T,
    /// Defaults to twice the sphere radius when absent.
    pub separation_m: Option<T>,
    pub gamma_rad_per_s: T,
    pub squeezing_r0: T,
    /// Thermal occupancy of the masses and their bath.
    pub nbar: T,
    /// Training draws use `nbar` uniform on `(0, nbar_train_max]`.
    pub nbar_train_max: T,
    pub cavity_length_m: T,
    pub laser_wavelength_m: T,
    pub laser_power_w: T,
    pub finesse: T,
    pub detuning_mode: DetuningMode<T>,
    /// Free gravitational evolution time.
    pub tau0_s: T,
    /// Probe snapshot spacing; observables are read at `{1..multiplex} tau`.
    pub tau_s: T,
    pub multiplex: usize,
    /// Measurement-noise strength; each recorded element gets std `zeta / 2`.
    pub zeta: T,
    pub n_train: usize,
    pub n_test: usize,
    pub ridge: RidgePolicy<T>,
}

impl<T: Real> Default for GieConfig<T> {
    fn default() -> Self {
        GieConfig {
            mass_kg: real(1.0),
            omega_rad_per_s: real(0.1),
            density_kg_per_m3: real(22_590.0),
            separation_m: None,
            gamma_rad_per_s: real(1e-6),
            squeezing_r0: real(1.73),
            nbar: T::zero(),
            nbar_train_max: T::one(),
            cavity_length_m: real(25e-3),
            laser_wavelength_m: real(1064e-9),
            laser_power_w: real(50e-3),
            finesse: real(8e4),
            detuning_mode: DetuningMode::Randomized,
            tau0_s: T::one(),
            tau_s: real(1e-6),
            multiplex: 4,
            zeta: real(2e-2),
            n_train: 50,
            n_test: 100,
            ridge: RidgePolicy::noisy(),
        }
    }
}

impl<T: Real> GieConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if self.mass_kg <= T::zero()
            || self.omega_rad_per_s <= T::zero()
            || self.density_kg_per_m3 <= T::zero()
            || self.gamma_rad_per_s <= T::zero()
            || self.cavity_length_m <= T::zero()
            || self.laser_wavelength_m <= T::zero()
            || self.finesse <= T::zero()
            || self.tau_s <= T::zero()
        {
            return Err(Error::validation("all physical scales must be positive"));
        }
        if self.omega_rad_per_s / self.gamma_rad_per_s < real(100.0) {
            return Err(Error::validation(
                "mechanical quality requires omega / gamma >= 100",
            ));
        }
        if self.squeezing_r0 < T::zero() || self.nbar < T::zero() || self.zeta < T::zero() {
            return Err(Error::validation(
                "squeezing, occupancy, and noise must be nonnegative",
            ));
        }
        let eta = self.eta();
        if eta >= T::one() {
            return Err(Error::validation(format!(
                "gravitational expansion parameter eta = {:e} >= 1 (unstable regime)",
                to_f64(eta)
            )));
        }
        if self.multiplex == 0 {
            return Err(Error::validation("multiplex count must be at least 1"));
        }
        Ok(())
    }

    /// Sphere radius from mass and density.
    pub fn radius_m(&self) -> T {
        let four_pi = real::<T>(4.0 * std::f64::consts::PI);
        (real::<T>(3.0) * self.mass_kg / (four_pi * self.density_kg_per_m3))
            .powf(T::one() / real(3.0))
    }

    pub fn separation(&self) -> T {
        self.separation_m
            .unwrap_or_else(|| real::<T>(2.0) * self.radius_m())
    }

    /// Dimensionless gravitational coupling `2 G m / (w^2 L^3)`.
    pub fn eta(&self) -> T {
        let l = self.separation();
        real::<T>(2.0 * GRAVITATIONAL_CONSTANT) * self.mass_kg
            / (self.omega_rad_per_s * self.omega_rad_per_s * l * l * l)
    }

    /// Finesse-derived cavity decay rate `pi c / (2 F L)`.
    pub fn kappa_basis_hz(&self) -> T {
        real::<T>(std::f64::consts::PI * SPEED_OF_LIGHT)
            / (real::<T>(2.0) * self.finesse * self.cavity_length_m)
    }

    pub fn laser_angular_frequency(&self) -> T {
        real::<T>(2.0 * std::f64::consts::PI * SPEED_OF_LIGHT) / self.laser_wavelength_m
    }

    /// Bare optomechanical coupling `(w_cav / L_cav) sqrt(hbar / (m w))`.
    pub fn g0_hz(&self) -> T {
        self.laser_angular_frequency() / self.cavity_length_m
            * (real::<T>(HBAR) / (self.mass_kg * self.omega_rad_per_s)).sqrt()
    }

    pub fn with_nbar(&self, nbar: T) -> Self {
        let mut c = self.clone();
        c.nbar = nbar;
        c
    }
}

impl<T: Real> ProbeRates<T> {
    /// Resolve the configured detuning mode, drawing from `rng` if randomized.
    /// Draw order: `kappa_a, kappa_b, delta_a, delta_b`.
    pub fn resolve<R: Rng>(config: &GieConfig<T>, rng: &mut R) -> Self {
        match config.detuning_mode {
            DetuningMode::Fixed { kappa_hz, delta_hz } => ProbeRates {
                kappa_a: kappa_hz,
                kappa_b: kappa_hz,
                delta_a: delta_hz,
                delta_b: delta_hz,
            },
            DetuningMode::Randomized => {
                let basis = config.kappa_basis_hz();
                let mut draw = || -> T { real::<T>(1.0 + rng.gen::<f64>()) * basis };
                ProbeRates {
                    kappa_a: draw(),
                    kappa_b: draw(),
                    delta_a: draw(),
                    delta_b: draw(),
                }
            }
        }
    }
}

/// Free-phase drift of the two trapped masses, `(x_A, p_A, x_B, p_B)`.
pub fn mass_drift<T: Real>(omega: T, gamma: T, eta: T) -> DMatrix<T> {
    let mut a = DMatrix::zeros(4, 4);
    a[(0, 1)] = omega;
    a[(1, 0)] = -omega * (T::one() - eta);
    a[(1, 1)] = -gamma;
    a[(1, 2)] = -omega * eta;
    a[(2, 3)] = omega;
    a[(3, 0)] = -omega * eta;
    a[(3, 2)] = -omega * (T::one() - eta);
    a[(3, 3)] = -gamma;
    a
}

/// Free gravitational phase: drift with the `-w eta` cross coupling and
/// Brownian diffusion `gamma (2 nbar + 1)` on the momenta.
pub fn mass_phase_dynamics<T: Real>(config: &GieConfig<T>) -> Result<LinearDynamics<T>> {
    config.validate()?;
    let a = mass_drift(config.omega_rad_per_s, config.gamma_rad_per_s, config.eta());
    let heat =
        config.gamma_rad_per_s * (real::<T>(2.0) * config.nbar + T::one());
    let d = DMatrix::from_diagonal(&DVector::from_vec(vec![T::zero(), heat, T::zero(), heat]));
    LinearDynamics::new(a, d, DVector::zeros(4))
}

/// Squeezed local thermal state of the two masses:
/// `diag[e^{2 r0}, e^{-2 r0}, e^{2 r0}, e^{-2 r0}] (1 + 2 nbar) / 2`.
pub fn gie_initial_cm<T: Real>(r0: T, nbar: T) -> Result<CovarianceMatrix<T>> {
    if r0 < T::zero() || nbar < T::zero() {
        return Err(Error::validation("squeezing and occupancy must be nonnegative"));
    }
    let two = real::<T>(2.0);
    let hot = (T::one() + two * nbar) * real::<T>(0.5);
    let up = (two * r0).exp() * hot;
    let dn = (-two * r0).exp() * hot;
    CovarianceMatrix::new(
        DMatrix::from_diagonal(&DVector::from_vec(vec![up, dn, up, dn])),
        QuadratureOrdering::Interleaved,
    )
}

/// Steady-state quantities of the linearized probe phase.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ProbeSteadyState<T> {
    pub alpha_s: T,
    pub beta_s: T,
    pub x_as: T,
    pub x_bs: T,
    pub p_as: T,
    pub p_bs: T,
    /// Effective detunings (inputs of the linearized dynamics).
    pub delta_a: T,
    pub delta_b: T,
    /// Bare detunings consistent with the effective ones.
    pub delta_0a: T,
    pub delta_0b: T,
    pub g_a: T,
    pub g_b: T,
    pub g0: T,
    pub epsilon_a: T,
    pub epsilon_b: T,
    /// True when `w tau_total eta <= 1e-6`, justifying the dropped
    /// gravitational coupling during the probe.
    pub eta_neglect_ok: bool,
}

/// Linearized probe drift in `(x_A, p_A, x_B, p_B, x_a, p_a, x_b, p_b)`.
pub fn probe_drift<T: Real>(
    omega: T,
    gamma: T,
    g_a: T,
    g_b: T,
    kappa_a: T,
    delta_a: T,
    kappa_b: T,
    delta_b: T,
) -> DMatrix<T> {
    let mut a = DMatrix::zeros(8, 8);
    a[(0, 1)] = omega;
    a[(1, 0)] = -omega;
    a[(1, 1)] = -gamma;
    a[(1, 4)] = g_a;
    a[(2, 3)] = omega;
    a[(3, 2)] = -omega;
    a[(3, 3)] = -gamma;
    a[(3, 6)] = -g_b;
    a[(4, 4)] = -kappa_a;
    a[(4, 5)] = delta_a;
    a[(5, 0)] = g_a;
    a[(5, 4)] = -delta_a;
    a[(5, 5)] = -kappa_a;
    a[(6, 6)] = -kappa_b;
    a[(6, 7)] = delta_b;
    a[(7, 2)] = -g_b;
    a[(7, 6)] = -delta_b;
    a[(7, 7)] = -kappa_b;
    a
}

/// Build the linearized 8-mode probe dynamics and its steady state for the
/// resolved cavity rates.
pub fn probe_phase_dynamics<T: Real>(
    config: &GieConfig<T>,
    rates: &ProbeRates<T>,
) -> Result<(LinearDynamics<T>, ProbeSteadyState<T>)> {
    config.validate()?;
    let omega_l = config.laser_angular_frequency();
    let g0 = config.g0_hz();
    let two = real::<T>(2.0);
    let hbar = real::<T>(HBAR);

    let eps = |kappa: T| -> T {
        (two * config.laser_power_w * kappa / (hbar * omega_l)).sqrt()
    };
    let epsilon_a = eps(rates.kappa_a);
    let epsilon_b = eps(rates.kappa_b);
    let alpha_s =
        epsilon_a / (rates.kappa_a * rates.kappa_a + rates.delta_a * rates.delta_a).sqrt();
    let beta_s =
        epsilon_b / (rates.kappa_b * rates.kappa_b + rates.delta_b * rates.delta_b).sqrt();
    let x_as = g0 * alpha_s * alpha_s / config.omega_rad_per_s;
    let x_bs = -g0 * beta_s * beta_s / config.omega_rad_per_s;
    let g_a = g0 * alpha_s * two.sqrt();
    let g_b = g0 * beta_s * two.sqrt();

    let tau_total = config.tau_s * real::<T>(config.multiplex as f64);
    let eta_neglect_ok =
        config.omega_rad_per_s * tau_total * config.eta() <= real(1e-6);

    let steady = ProbeSteadyState {
        alpha_s,
        beta_s,
        x_as,
        x_bs,
        p_as: T::zero(),
        p_bs: T::zero(),
        delta_a: rates.delta_a,
        delta_b: rates.delta_b,
        delta_0a: rates.delta_a + g0 * x_as,
        delta_0b: rates.delta_b - g0 * x_bs,
        g_a,
        g_b,
        g0,
        epsilon_a,
        epsilon_b,
        eta_neglect_ok,
    };

    let a = probe_drift(
        config.omega_rad_per_s,
        config.gamma_rad_per_s,
        g_a,
        g_b,
        rates.kappa_a,
        rates.delta_a,
        rates.kappa_b,
        rates.delta_b,
    );
    let heat = config.gamma_rad_per_s * (two * config.nbar + T::one());
    let d = DMatrix::from_diagonal(&DVector::from_vec(vec![
        T::zero(),
        heat,
        T::zero(),
        heat,
        rates.kappa_a,
        rates.kappa_a,
        rates.kappa_b,
        rates.kappa_b,
    ]));
    Ok((LinearDynamics::new(a, d, DVector::zeros(8))?, steady))
}

/// Upper-triangle indices of the cavity block (modes 2 and 3 of the 8-dim
/// probe system).
fn cavity_block_targets<T: Real>(v: &DMatrix<T>) -> Vec<T> {
    let mut out = Vec::with_capacity(10);
    for i in 4..8 {
        for j in i..8 {
            out.push(v[(i, j)]);
        }
    }
    out
}

/// Flags accumulated during one experiment run.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct GieFlags {
    /// Training draws rejected by the separability guard.
    pub rejected_training_draws: usize,
    /// Reconstructions whose covariance matrix was unphysical.
    pub unphysical_reconstructions: usize,
    /// Gravitational coupling negligible over the probe window.
    pub eta_neglect_ok: bool,
}

/// Result of one full sensing experiment.
#[derive(Debug, Clone)]
pub struct GieOutcome<T: Real> {
    pub e_in: T,
    pub e_est: Vec<T>,
    pub delta_e: T,
    pub flags: GieFlags,
    pub lambda_used: T,
    pub rates: ProbeRates<T>,
    pub steady: ProbeSteadyState<T>,
}

struct FreePhase<T: Real> {
    prop: GaussianPropagator<T>,
}

impl<T: Real> FreePhase<T> {
    fn new(config: &GieConfig<T>) -> Result<Self> {
        let dynamics = mass_phase_dynamics(config)?;
        Ok(FreePhase {
            prop: GaussianPropagator::new(&dynamics, config.tau0_s)?,
        })
    }

    fn evolve(&self, config: &GieConfig<T>) -> Result<DMatrix<T>> {
        let v0 = gie_initial_cm(config.squeezing_r0, config.nbar)?;
        let (v, _) = self.prop.apply(v0.matrix(), &DVector::zeros(4));
        Ok(v)
    }
}

/// Noiseless cavity observables at `{1..T} tau`, starting the probe phase
/// from `blockdiag(v_mass, vacuum)`.
fn probe_observables<T: Real>(
    config: &GieConfig<T>,
    rates: &ProbeRates<T>,
) -> Result<(GaussianPropagator<T>, ProbeSteadyState<T>)> {
    let (dynamics, steady) = probe_phase_dynamics(config, rates)?;
    Ok((GaussianPropagator::new(&dynamics, config.tau_s)?, steady))
}

fn collect_cavity_elements<T: Real>(
    prop: &GaussianPropagator<T>,
    v_mass: &DMatrix<T>,
    multiplex: usize,
) -> Vec<T> {
    let mut v = DMatrix::zeros(8, 8);
    v.view_mut((0, 0), (4, 4)).copy_from(v_mass);
    for i in 4..8 {
        v[(i, i)] = real::<T>(0.5);
    }
    let mut u = DVector::zeros(8);
    let mut out = Vec::with_capacity(10 * multiplex);
    for _ in 0..multiplex {
        let (v1, u1) = prop.apply(&v, &u);
        v = v1;
        u = u1;
        out.extend(cavity_block_targets(&v));
    }
    out
}

fn add_noise<T: Real, R: Rng>(values: &[T], std: T, rng: &mut R) -> DVector<T> {
    if std == T::zero() {
        return DVector::from_vec(values.to_vec());
    }
    let normal = Normal::new(0.0f64, to_f64(std)).expect("valid std");
    DVector::from_iterator(
        values.len(),
        values.iter().map(|&v| v + real::<T>(normal.sample(rng))),
    )
}

const MAX_TRAIN_REDRAWS: usize = 1000;

/// Run the full experiment at one `tau0`: train a readout on random separable
/// thermal draws, test against the `nbar = 0` entangled state, and return the
/// standard-deviation error of the entanglement estimates.
///
/// Draw order on `rng`: cavity rates (if randomized), then per training draw
/// `nbar` followed by its observable noise, then per test instance its noise.
pub fn run_gie_experiment<T: Real, R: Rng>(
    config: &GieConfig<T>,
    rng: &mut R,
) -> Result<GieOutcome<T>> {
    config.validate()?;
    let part = ModeBipartition::two_mode();
    let rates = ProbeRates::resolve(config, rng);
    let noise_std = config.zeta * real::<T>(0.5);

    // test-side dynamics at nbar = 0
    let test_config = config.with_nbar(T::zero());
    let v_test = FreePhase::new(&test_config)?.evolve(&test_config)?;
    let e_in = log_negativity(
        &CovarianceMatrix::new(v_test.clone(), QuadratureOrdering::Interleaved)?,
        &part,
    )?;
    let (test_prop, steady) = probe_observables(&test_config, &rates)?;
    let clean_test = collect_cavity_elements(&test_prop, &v_test, config.multiplex);

    // training set: separable thermal draws
    let mut rows = Vec::with_capacity(config.n_train);
    let mut targets = Vec::with_capacity(config.n_train);
    let mut flags = GieFlags {
        eta_neglect_ok: steady.eta_neglect_ok,
        ..GieFlags::default()
    };
    for _ in 0..config.n_train {
        let mut accepted = None;
        for _ in 0..MAX_TRAIN_REDRAWS {
            let u: f64 = rng.gen();
            let nbar = (T::one() - real::<T>(u)) * config.nbar_train_max;
            let draw_config = config.with_nbar(nbar);
            let v_mass = FreePhase::new(&draw_config)?.evolve(&draw_config)?;
            let (e, _) = log_negativity_raw(&v_mass, &part)?;
            if e == T::zero() {
                accepted = Some((draw_config, v_mass));
                break;
            }
            flags.rejected_training_draws += 1;
        }
        let (draw_config, v_mass) = accepted.ok_or_else(|| {
            Error::Protocol(format!(
                "no separable training state found in {MAX_TRAIN_REDRAWS} draws; \
                 tau0 too long for the configured nbar range"
            ))
        })?;
        let (prop, _) = probe_observables(&draw_config, &rates)?;
        let clean = collect_cavity_elements(&prop, &v_mass, config.multiplex);
        rows.push(add_noise(&clean, noise_std, rng));
        targets.push(cv_targets(&v_mass));
    }

    let x = design_matrix(&rows);
    let mut y = DMatrix::zeros(config.n_train, 10);
    for (i, t) in targets.iter().enumerate() {
        y.view_mut((i, 0), (1, 10)).tr_copy_from(t);
    }
    let layout = TargetLayout::CvUpperTriangle { n_modes: 2 };
    let readout = fit_with_policy(&x, &y, &config.ridge, layout)?;

    // testing: fresh noise on the fixed clean observables
    let mut e_est = Vec::with_capacity(config.n_test);
    for _ in 0..config.n_test {
        let noisy = add_noise(&clean_test, noise_std, rng);
        let mut feat = DVector::zeros(noisy.len() + 1);
        feat[0] = T::one();
        feat.rows_mut(1, noisy.len()).copy_from(&noisy);
        let elements = &readout.betas * feat;
        let v_rec = cv_matrix_from_targets(&elements, 2);
        let (e, report) = log_negativity_raw(&v_rec, &part)?;
        if !report.physical {
            flags.unphysical_reconstructions += 1;
        }
        e_est.push(e);
    }
    let delta_e = std_estimation_error(&e_est, e_in)?;
    Ok(GieOutcome {
        e_in,
        e_est,
        delta_e,
        flags,
        lambda_used: readout.ridge_lambda,
        rates,
        steady,
    })
}

/// Baseline: add measurement noise of std `zeta_direct / 2` directly to the
/// unique elements of the true mass covariance matrix at `tau0`.
pub fn direct_measurement_baseline<T: Real, R: Rng>(
    config: &GieConfig<T>,
    zeta_direct: T,
    rng: &mut R,
) -> Result<GieOutcome<T>> {
    config.validate()?;
    let part = ModeBipartition::two_mode();
    let test_config = config.with_nbar(T::zero());
    let v_test = FreePhase::new(&test_config)?.evolve(&test_config)?;
    let e_in = log_negativity(
        &CovarianceMatrix::new(v_test.clone(), QuadratureOrdering::Interleaved)?,
        &part,
    )?;
    let clean = cv_targets(&v_test);
    let std = zeta_direct * real::<T>(0.5);
    let mut e_est = Vec::with_capacity(config.n_test);
    let mut flags = GieFlags::default();
    for _ in 0..config.n_test {
        let noisy = add_noise(clean.as_slice(), std, rng);
        let v_rec = cv_matrix_from_targets(&noisy, 2);
        let (e, report) = log_negativity_raw(&v_rec, &part)?;
        if !report.physical {
            flags.unphysical_reconstructions += 1;
        }
        e_est.push(e);
    }
    let delta_e = if zeta_direct == T::zero() {
        T::zero()
    } else {
        std_estimation_error(&e_est, e_in)?
    };
    Ok(GieOutcome {
        e_in,
        e_est,
        delta_e,
        flags,
        lambda_used: T::zero(),
        rates: ProbeRates {
            kappa_a: T::zero(),
            kappa_b: T::zero(),
            delta_a: T::zero(),
            delta_b: T::zero(),
        },
        steady: ProbeSteadyState {
            alpha_s: T::zero(),
            beta_s: T::zero(),
            x_as: T::zero(),
            x_bs: T::zero(),
            p_as: T::zero(),
            p_bs: T::zero(),
            delta_a: T::zero(),
            delta_b: T::zero(),
            delta_0a: T::zero(),
            delta_0b: T::zero(),
            g_a: T::zero(),
            g_b: T::zero(),
            g0: T::zero(),
            epsilon_a: T::zero(),
            epsilon_b: T::zero(),
            eta_neglect_ok: true,
        },
    })
}

/// True grown entanglement at `tau0` for the `nbar = 0` initial state.
pub fn true_entanglement_at<T: Real>(config: &GieConfig<T>, tau0: T) -> Result<T> {
    let mut c = config.with_nbar(T::zero());
    c.tau0_s = tau0;
    let v = FreePhase::new(&c)?.evolve(&c)?;
    log_negativity(
        &CovarianceMatrix::new(v, QuadratureOrdering::Interleaved)?,
        &ModeBipartition::two_mode(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::symplectic_eigenvalues_of;
    use crate::rng::substream;
    use approx::assert_relative_eq;

    #[test]
    fn geometry_matches_arithmetic_oracle() {
        let config = GieConfig::<f64>::default();
        // independent arithmetic: R = (3 m / 4 pi rho)^{1/3}
        let r = (3.0 * 1.0 / (4.0 * std::f64::consts::PI * 22_590.0)).powf(1.0 / 3.0);
        assert_relative_eq!(config.radius_m(), r, max_relative = 1e-12);
        assert!((r - 0.02197).abs() < 2e-4, "radius should be about 2.20 cm");
        let l = 2.0 * r;
        assert_relative_eq!(config.separation(), l, max_relative = 1e-12);
        assert!((l - 0.0439).abs() < 4e-4, "separation should be about 4.39 cm");
        let eta = 2.0 * GRAVITATIONAL_CONSTANT * 1.0 / (0.1 * 0.1 * l * l * l);
        assert_relative_eq!(config.eta(), eta, max_relative = 1e-12);
        assert!((eta - 1.58e-4).abs() < 1e-5, "eta should be about 1.58e-4, got {eta}");
    }

    #[test]
    fn cavity_rates_match_printed_values() {
        let config = GieConfig::<f64>::default();
        assert_relative_eq!(config.kappa_basis_hz(), 2.36e5, max_relative = 3e-3);
        assert_relative_eq!(config.g0_hz(), 2.3, max_relative = 1e-2);
    }

    #[test]
    fn mass_drift_matches_printed_matrix() {
        let (w, g, eta) = (0.7, 0.002, 0.3);
        let a = mass_drift(w, g, eta);
        #[rustfmt::skip]
        let expected = DMatrix::from_row_slice(4, 4, &[
            0.0,              w,    0.0,             0.0,
            -w * (1.0 - eta), -g,   -w * eta,        0.0,
            0.0,              0.0,  0.0,             w,
            -w * eta,         0.0,  -w * (1.0 - eta), -g,
        ]);
        assert_relative_eq!(a, expected, epsilon = 0.0);
    }

    #[test]
    fn probe_drift_matches_printed_matrix() {
        let (w, g, ga, gb, ka, da, kb, db) = (0.7, 0.01, 1.3, 0.9, 0.4, 0.6, 0.5, 0.8);
        let a = probe_drift(w, g, ga, gb, ka, da, kb, db);
        #[rustfmt::skip]
        let expected = DMatrix::from_row_slice(8, 8, &[
            0.0, w,   0.0, 0.0, 0.0, 0.0, 0.0, 0.0,
            -w,  -g,  0.0, 0.0, ga,  0.0, 0.0, 0.0,
            0.0, 0.0, 0.0, w,   0.0, 0.0, 0.0, 0.0,
            0.0, 0.0, -w,  -g,  0.0, 0.0, -gb, 0.0,
            0.0, 0.0, 0.0, 0.0, -ka, da,  0.0, 0.0,
            ga,  0.0, 0.0, 0.0, -da, -ka, 0.0, 0.0,
            0.0, 0.0, 0.0, 0.0, 0.0, 0.0, -kb, db,
            0.0, 0.0, -gb, 0.0, 0.0, 0.0, -db, -kb,
        ]);
        assert_relative_eq!(a, expected, epsilon = 0.0);
    }

    #[test]
    fn initial_cm_examples() {
        let vac = gie_initial_cm::<f64>(0.0, 0.0).unwrap();
        assert_relative_eq!(vac.matrix(), &(DMatrix::identity(4, 4) * 0.5), epsilon = 1e-15);

        let sq = gie_initial_cm::<f64>(1.73, 0.0).unwrap();
        assert_relative_eq!(sq.matrix()[(0, 0)], (3.46f64).exp() / 2.0, max_relative = 1e-12);
        assert_relative_eq!(sq.matrix()[(1, 1)], (-3.46f64).exp() / 2.0, max_relative = 1e-12);
        assert_relative_eq!(sq.matrix()[(2, 2)], (3.46f64).exp() / 2.0, max_relative = 1e-12);

        // product state has zero entanglement for any (r0, nbar)
        for (r0, nbar) in [(0.5, 0.0), (1.73, 0.3), (2.0, 2.0)] {
            let v = gie_initial_cm::<f64>(r0, nbar).unwrap();
            let e = log_negativity(&v, &ModeBipartition::two_mode()).unwrap();
            assert_eq!(e, 0.0);
        }
    }

    #[test]
    fn no_gravity_means_no_entanglement() {
        let mut config = GieConfig::<f64>::default();
        config.tau0_s = 5.0;
        // decoupled drift: eta = 0
        let a = mass_drift(config.omega_rad_per_s, config.gamma_rad_per_s, 0.0);
        let d = DMatrix::from_diagonal(&DVector::from_vec(vec![
            0.0,
            config.gamma_rad_per_s,
            0.0,
            config.gamma_rad_per_s,
        ]));
        let dynamics = LinearDynamics::new(a, d, DVector::zeros(4)).unwrap();
        let prop = GaussianPropagator::new(&dynamics, config.tau0_s).unwrap();
        let v0 = gie_initial_cm(config.squeezing_r0, 0.0).unwrap();
        let (v, _) = prop.apply(v0.matrix(), &DVector::zeros(4));
        // cross block stays zero and the state stays separable
        assert!(v.view((0, 2), (2, 2)).amax() < 1e-14);
        let (e, _) = log_negativity_raw(&v, &ModeBipartition::two_mode()).unwrap();
        assert_eq!(e, 0.0);
    }

    #[test]
    fn free_phase_is_symplectic_without_damping() {
        let config = GieConfig::<f64>::default();
        let a = mass_drift(config.omega_rad_per_s, 0.0, config.eta());
        let dynamics =
            LinearDynamics::new(a, DMatrix::zeros(4, 4), DVector::zeros(4)).unwrap();
        let prop = GaussianPropagator::new(&dynamics, 5.0).unwrap();
        let v0 = gie_initial_cm(1.73, 0.0).unwrap();
        let (v, _) = prop.apply(v0.matrix(), &DVector::zeros(4));
        for nu in symplectic_eigenvalues_of(&v).unwrap() {
            assert!((nu - 0.5).abs() < 1e-6, "symplectic eigenvalue {nu}");
        }
    }

    #[test]
    fn entanglement_grows_and_is_monotone() {
        let config = GieConfig::<f64>::default();
        let mut last = -1.0f64;
        for tau0 in [0.0, 0.5, 1.0, 2.0, 3.0, 4.0, 5.0] {
            let e = true_entanglement_at(&config, tau0).unwrap();
            assert!(
                e >= last - 1e-12,
                "E_in not nondecreasing at tau0 = {tau0}: {e} < {last}"
            );
            if tau0 >= 0.5 {
                assert!(e > 0.0, "expected entanglement at tau0 = {tau0}");
            }
            last = e;
        }
    }

    #[test]
    fn probe_steady_state_formulas() {
        let config = GieConfig::<f64>::default();
        let rates = ProbeRates {
            kappa_a: 2.36e5,
            kappa_b: 2.36e5,
            delta_a: 2.36e5,
            delta_b: 2.36e5,
        };
        let (dynamics, steady) = probe_phase_dynamics(&config, &rates).unwrap();
        let omega_l = 2.0 * std::f64::consts::PI * SPEED_OF_LIGHT / 1064e-9;
        let eps = (2.0 * 50e-3 * 2.36e5 / (HBAR * omega_l)).sqrt();
        assert_relative_eq!(steady.epsilon_a, eps, max_relative = 1e-12);
        assert_relative_eq!(
            steady.alpha_s,
            eps / (2.0f64 * 2.36e5 * 2.36e5).sqrt(),
            max_relative = 1e-12
        );
        assert_relative_eq!(
            steady.g_a,
            config.g0_hz() * steady.alpha_s * 2.0f64.sqrt(),
            max_relative = 1e-12
        );
        assert_relative_eq!(steady.delta_0a, 2.36e5 + config.g0_hz() * steady.x_as, max_relative = 1e-12);
        assert!(steady.x_bs < 0.0);
        assert!(steady.eta_neglect_ok);
        // drift carries the steady-state couplings
        assert_relative_eq!(dynamics.drift[(1, 4)], steady.g_a, max_relative = 1e-12);
        assert_relative_eq!(dynamics.drift[(3, 6)], -steady.g_b, max_relative = 1e-12);
    }

    #[test]
    fn probes_decouple_at_zero_laser_power() {
        let mut config = GieConfig::<f64>::default();
        config.laser_power_w = 0.0;
        let rates = ProbeRates {
            kappa_a: 2.36e5,
            kappa_b: 2.36e5,
            delta_a: 2.36e5,
            delta_b: 2.36e5,
        };
        let (dynamics, steady) = probe_phase_dynamics(&config, &rates).unwrap();
        assert_eq!(steady.g_a, 0.0);
        assert_eq!(steady.g_b, 0.0);
        let prop = GaussianPropagator::new(&dynamics, 1e-6).unwrap();
        let v_mass = gie_initial_cm(1.73, 0.0).unwrap();
        let mut v = DMatrix::zeros(8, 8);
        v.view_mut((0, 0), (4, 4)).copy_from(v_mass.matrix());
        for i in 4..8 {
            v[(i, i)] = 0.5;
        }
        let (v, _) = prop.apply(&v, &DVector::zeros(8));
        // cavity observables carry no mass information
        assert!(v.view((0, 4), (4, 4)).amax() < 1e-14);
    }

    #[test]
    fn separability_guard_rejects_entangled_draws() {
        // nbar forced to ~0 makes every training draw entangled at tau0 = 5 s
        let mut config = GieConfig::<f64>::default();
        config.tau0_s = 5.0;
        config.nbar_train_max = 1e-12;
        config.n_train = 2;
        config.n_test = 2;
        let mut rng = substream(1, &[0]);
        match run_gie_experiment(&config, &mut rng) {
            Err(Error::Protocol(msg)) => assert!(msg.contains("separable")),
            other => panic!("expected protocol error, got {:?}", other.map(|o| o.delta_e)),
        }
    }

    #[test]
    fn zero_direct_noise_gives_zero_error() {
        let mut config = GieConfig::<f64>::default();
        config.tau0_s = 1.0;
        config.n_test = 10;
        let mut rng = substream(2, &[0]);
        let out = direct_measurement_baseline(&config, 0.0, &mut rng).unwrap();
        assert_eq!(out.delta_e, 0.0);
        for &e in &out.e_est {
            assert_relative_eq!(e, out.e_in, max_relative = 1e-12);
        }
    }
}
