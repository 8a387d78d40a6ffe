//! Full train/test experiments: one reservoir realization probed by fresh
//! training and testing ensembles, ridge-fitted, and scored.
//!
//! Seed layout per realization `r` of a master seed `s`:
//! reservoir parameters from `(s, [r, CONFIG])`, training/testing ensembles
//! from the derived seeds `(s, [r, TRAIN_STATES]) / (s, [r, TEST_STATES])`,
//! and measurement noise from `(s, [r, TRAIN_NOISE, i]) / (s, [r, TEST_NOISE, i])`.
//! Every stream is independent of evaluation order.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::cv::{sample_qn_params, CvProbe, ReservoirVariant};
use crate::error::Result;
use crate::estimator::{
    add_measurement_noise, cv_targets, design_matrix, estimation_error, fit_with_policy,
    qubit_targets, reconstruct_and_score, NoiseModel, RidgePolicy, StateKind, TargetLayout,
};
use crate::hybrid::{sample_hybrid_params, HybridProbe};
use crate::inputs::{generate_ensemble, EnsembleKind, InputEnsemble};
use crate::observables::{CvObservableSet, ObservableVector, QubitObservableSet};
use crate::qubit::{sample_qubit_params, QubitProbe};
use crate::real::Real;
use crate::rng::{derive, substream};

pub const STREAM_CONFIG: u64 = 1;
pub const STREAM_TRAIN_STATES: u64 = 2;
pub const STREAM_TEST_STATES: u64 = 3;
pub const STREAM_TRAIN_NOISE: u64 = 4;
pub const STREAM_TEST_NOISE: u64 = 5;
pub const STREAM_GIE: u64 = 6;

/// One scored test instance.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct InstanceRecord<T> {
    pub index: usize,
    pub e_in: T,
    pub e_est: T,
    pub physical: bool,
}

/// Result of one realization's train/test cycle.
#[derive(Debug, Clone)]
pub struct ExperimentOutcome<T: Real> {
    pub delta_e: T,
    pub instances: Vec<InstanceRecord<T>>,
    pub lambda_used: T,
    pub rank_deficient: bool,
    pub n_observables: usize,
}

/// CV experiment parameters (one sweep point).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CvExperiment<T: Real> {
    pub n_nodes: usize,
    pub variant: ReservoirVariant,
    pub observable_set: CvObservableSet,
    pub readout_times: Vec<T>,
    pub gamma_scale: T,
    pub zeta: T,
    pub train_separable: bool,
    pub n_train: usize,
    pub n_test: usize,
    pub ridge: RidgePolicy<T>,
}

/// Qubit experiment parameters (one sweep point).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QubitExperiment<T: Real> {
    pub n_qubits: usize,
    pub observable_set: QubitObservableSet,
    pub readout_times: Vec<T>,
    pub gamma_scale: T,
    pub zeta: T,
    pub train_separable: bool,
    pub n_train: usize,
    pub n_test: usize,
    pub ridge: RidgePolicy<T>,
}

/// Hybrid experiment parameters (one sweep point).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HybridExperiment<T: Real> {
    pub multiplex: usize,
    pub fock_cutoff: usize,
    pub gamma_scale: T,
    pub zeta: T,
    pub n_train: usize,
    pub n_test: usize,
    pub ridge: RidgePolicy<T>,
}

struct NoisyRows<T: Real> {
    rows: Vec<DVector<T>>,
}

fn observe_all<T: Real, F>(
    ensemble: &InputEnsemble<T>,
    master: u64,
    realization: u64,
    noise_stream: u64,
    zeta: T,
    mut observe: F,
) -> Result<NoisyRows<T>>
where
    F: FnMut(&crate::inputs::StateData<T>) -> Result<ObservableVector<T>>,
{
    let noise = NoiseModel::new(zeta)?;
    let mut rows = Vec::with_capacity(ensemble.states.len());
    for (i, state) in ensemble.states.iter().enumerate() {
        let clean = observe(state)?;
        let mut rng = substream(master, &[realization, noise_stream, i as u64]);
        let noisy = add_measurement_noise(&clean, &noise, &mut rng);
        rows.push(noisy.values().clone());
    }
    Ok(NoisyRows { rows })
}

fn score_instances<T: Real>(
    readout: &crate::estimator::TrainedReadout<T>,
    test_rows: &NoisyRows<T>,
    labels_template: &ObservableVector<T>,
    truth: &[T],
    kind: StateKind,
) -> Result<(T, Vec<InstanceRecord<T>>)> {
    let mut instances = Vec::with_capacity(test_rows.rows.len());
    let mut e_est = Vec::with_capacity(test_rows.rows.len());
    for (i, row) in test_rows.rows.iter().enumerate() {
        let v = labels_template.with_values(row.clone());
        let rec = reconstruct_and_score(readout, &v, kind)?;
        e_est.push(rec.entanglement);
        instances.push(InstanceRecord {
            index: i,
            e_in: truth[i],
            e_est: rec.entanglement,
            physical: rec.physical,
        });
    }
    let delta_e = estimation_error(&e_est, truth)?;
    Ok((delta_e, instances))
}

fn fit_readout<T: Real>(
    rows: &[DVector<T>],
    targets: &[DVector<T>],
    ridge: &RidgePolicy<T>,
    layout: TargetLayout,
) -> Result<crate::estimator::TrainedReadout<T>> {
    let x = design_matrix(rows);
    let mut y = DMatrix::zeros(targets.len(), layout.len());
    for (i, t) in targets.iter().enumerate() {
        y.view_mut((i, 0), (1, t.len())).tr_copy_from(t);
    }
    fit_with_policy(&x, &y, ridge, layout)
}

/// Run one CV realization end to end.
pub fn run_cv_experiment<T: Real>(
    spec: &CvExperiment<T>,
    master: u64,
    realization: u64,
) -> Result<ExperimentOutcome<T>> {
    let mut config_rng = substream(master, &[realization, STREAM_CONFIG]);
    let mut config = sample_qn_params(
        spec.n_nodes,
        spec.gamma_scale,
        spec.variant,
        &mut config_rng,
    );
    config.seed = Some(master);
    let probe = CvProbe::new(config, &spec.readout_times, spec.observable_set)?;

    let train_kind = if spec.train_separable {
        EnsembleKind::CvSeparable
    } else {
        EnsembleKind::CvEntangled
    };
    let train = generate_ensemble::<T>(
        train_kind,
        spec.n_train,
        derive(master, &[realization, STREAM_TRAIN_STATES]),
        spec.gamma_scale,
    )?;
    let test = generate_ensemble::<T>(
        EnsembleKind::CvEntangled,
        spec.n_test,
        derive(master, &[realization, STREAM_TEST_STATES]),
        spec.gamma_scale,
    )?;

    let train_rows = observe_all(&train, master, realization, STREAM_TRAIN_NOISE, spec.zeta, |s| {
        probe.observe(s.as_cv().expect("cv ensemble"))
    })?;
    let test_rows = observe_all(&test, master, realization, STREAM_TEST_NOISE, spec.zeta, |s| {
        probe.observe(s.as_cv().expect("cv ensemble"))
    })?;

    let targets: Vec<DVector<T>> = train
        .states
        .iter()
        .map(|s| cv_targets(s.as_cv().expect("cv ensemble").matrix()))
        .collect();
    let layout = TargetLayout::CvUpperTriangle { n_modes: 2 };
    let readout = fit_readout(&train_rows.rows, &targets, &spec.ridge, layout)?;

    let template = probe.observe(test.states[0].as_cv().expect("cv ensemble"))?;
    let (delta_e, instances) = score_instances(
        &readout,
        &test_rows,
        &template,
        &test.true_entanglement,
        StateKind::Cv,
    )?;
    Ok(ExperimentOutcome {
        delta_e,
        instances,
        lambda_used: readout.ridge_lambda,
        rank_deficient: readout.rank_deficient,
        n_observables: readout.n_observables,
    })
}

/// Run one qubit realization end to end.
pub fn run_qubit_experiment<T: Real>(
    spec: &QubitExperiment<T>,
    master: u64,
    realization: u64,
) -> Result<ExperimentOutcome<T>> {
    let mut config_rng = substream(master, &[realization, STREAM_CONFIG]);
    let mut config = sample_qubit_params(spec.n_qubits, spec.gamma_scale, &mut config_rng);
    config.seed = Some(master);
    let probe = QubitProbe::build(config, &spec.readout_times, spec.observable_set)?;

    let train_kind = if spec.train_separable {
        EnsembleKind::QubitSeparable
    } else {
        EnsembleKind::QubitRandom
    };
    let train = generate_ensemble::<T>(
        train_kind,
        spec.n_train,
        derive(master, &[realization, STREAM_TRAIN_STATES]),
        spec.gamma_scale,
    )?;
    let test = generate_ensemble::<T>(
        EnsembleKind::QubitRandom,
        spec.n_test,
        derive(master, &[realization, STREAM_TEST_STATES]),
        spec.gamma_scale,
    )?;

    let train_rows = observe_all(&train, master, realization, STREAM_TRAIN_NOISE, spec.zeta, |s| {
        probe.observe(s.as_qubit().expect("qubit ensemble"))
    })?;
    let test_rows = observe_all(&test, master, realization, STREAM_TEST_NOISE, spec.zeta, |s| {
        probe.observe(s.as_qubit().expect("qubit ensemble"))
    })?;

    let targets: Vec<DVector<T>> = train
        .states
        .iter()
        .map(|s| qubit_targets(s.as_qubit().expect("qubit ensemble")))
        .collect();
    let readout = fit_readout(&train_rows.rows, &targets, &spec.ridge, TargetLayout::QubitBloch)?;

    let template = probe.observe(test.states[0].as_qubit().expect("qubit ensemble"))?;
    let (delta_e, instances) = score_instances(
        &readout,
        &test_rows,
        &template,
        &test.true_entanglement,
        StateKind::Qubit,
    )?;
    Ok(ExperimentOutcome {
        delta_e,
        instances,
        lambda_used: readout.ridge_lambda,
        rank_deficient: readout.rank_deficient,
        n_observables: readout.n_observables,
    })
}

/// Run one hybrid realization end to end.
pub fn run_hybrid_experiment<T: Real>(
    spec: &HybridExperiment<T>,
    master: u64,
    realization: u64,
) -> Result<ExperimentOutcome<T>> {
    let mut config_rng = substream(master, &[realization, STREAM_CONFIG]);
    let mut config = sample_hybrid_params(spec.gamma_scale, spec.fock_cutoff, &mut config_rng);
    config.seed = Some(master);
    let probe = HybridProbe::new(&config, spec.multiplex)?;

    let train = generate_ensemble::<T>(
        EnsembleKind::QubitRandom,
        spec.n_train,
        derive(master, &[realization, STREAM_TRAIN_STATES]),
        spec.gamma_scale,
    )?;
    let test = generate_ensemble::<T>(
        EnsembleKind::QubitRandom,
        spec.n_test,
        derive(master, &[realization, STREAM_TEST_STATES]),
        spec.gamma_scale,
    )?;

    let train_rows = observe_all(&train, master, realization, STREAM_TRAIN_NOISE, spec.zeta, |s| {
        probe.observe(s.as_qubit().expect("qubit ensemble"))
    })?;
    let test_rows = observe_all(&test, master, realization, STREAM_TEST_NOISE, spec.zeta, |s| {
        probe.observe(s.as_qubit().expect("qubit ensemble"))
    })?;

    let targets: Vec<DVector<T>> = train
        .states
        .iter()
        .map(|s| qubit_targets(s.as_qubit().expect("qubit ensemble")))
        .collect();
    let readout = fit_readout(&train_rows.rows, &targets, &spec.ridge, TargetLayout::QubitBloch)?;

    let template = probe.observe(test.states[0].as_qubit().expect("qubit ensemble"))?;
    let (delta_e, instances) = score_instances(
        &readout,
        &test_rows,
        &template,
        &test.true_entanglement,
        StateKind::Qubit,
    )?;
    Ok(ExperimentOutcome {
        delta_e,
        instances,
        lambda_used: readout.ridge_lambda,
        rank_deficient: readout.rank_deficient,
        n_observables: readout.n_observables,
    })
}
