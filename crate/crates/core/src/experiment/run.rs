//! Runners: one per experiment kind.

use rayon::prelude::*;
use serde::Serialize;

use super::analysis::{estimate_period, fit_at_frequency, wrap_phase, SinusoidFit};
use super::config::{Arm, ExperimentConfig, ExperimentKind, ScanPoint};
use crate::detection::{g2_estimate, run_trials, CountSummary, DetectionModel, DetectorSpec, G2Estimate, PublishedCounts};
use crate::elements::compose;
use crate::error::{Error, Result};
use crate::fock::Polarization;
use crate::interferometer::{
    complex, ebit_mode, EntangledPairNetwork, Stages, TwoColorInterferometer, DBAR_1, DBAR_2, DBAR_A, DBAR_B, D_1,
    D_2, D_A, D_B, K1, K1_BAR, K2, K2_BAR,
};
use crate::physics::quantum_efficiency;

/// Output-port detector order used by fringe records.
pub const FRINGE_DETECTORS: [&str; 4] = [D_A, D_B, DBAR_A, DBAR_B];

/// Measured conversion efficiencies shown next to the model curve, (GW/cm², QE).
pub const EXPERIMENT_QE_POINTS: [(f64, f64); 2] = [(200.0, 0.4), (1.0, 3e-3)];

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FringeRecord {
    pub index: usize,
    pub x_nm: f64,
    pub volts: f64,
    pub phi_rad: f64,
    pub psi_rad: f64,
    /// Firing probabilities in [`FRINGE_DETECTORS`] order.
    pub probabilities: [f64; 4],
    #[serde(skip_serializing_if = "Option::is_none")]
    pub counts: Option<[u64; 4]>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ChannelFit {
    /// Fit against Φ at unit frequency.
    pub fit: SinusoidFit,
    pub visibility: Option<f64>,
    /// Fringe period in mirror displacement, when the channel is lit.
    pub period_nm: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FringeAnalysis {
    /// `D_A` against Φ.
    pub ir: ChannelFit,
    /// `DBAR_A` against Φ.
    pub uv: ChannelFit,
    /// UV fringe phase minus IR fringe phase, wrapped to (−π, π].
    pub phase_offset_rad: Option<f64>,
    pub sampled_ir_visibility: Option<f64>,
    pub sampled_uv_visibility: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FringeScan {
    pub theta_rad: f64,
    pub qe: f64,
    pub lambda_bar_nm: f64,
    pub records: Vec<FringeRecord>,
    pub analysis: Option<FringeAnalysis>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HbtReport {
    pub method: String,
    pub pair: (String, String),
    pub phi_rad: f64,
    pub theta_rad: f64,
    pub singles_probability: (f64, f64),
    pub joint_probability: f64,
    /// P_AB/(P_A·P_B) from the exact state.
    pub analytic_g2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub counts: Option<CountSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub g2: Option<G2Estimate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub g2_undefined: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum QeSource {
    Model,
    Anchor,
    Experiment,
}

impl QeSource {
    pub fn as_str(&self) -> &'static str {
        match self {
            QeSource::Model => "model",
            QeSource::Anchor => "anchor",
            QeSource::Experiment => "experiment",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct QeRow {
    pub intensity_gw_cm2: f64,
    pub qe: f64,
    pub source: QeSource,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct QeCurve {
    pub rows: Vec<QeRow>,
    /// Effective nonlinearity after calibration.
    pub d2: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EbitSample {
    pub n_trials: u64,
    pub n_post_selected: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EbitReport {
    pub alpha: [f64; 2],
    pub beta: [f64; 2],
    pub theta_h_rad: f64,
    pub theta_v_rad: f64,
    pub pump_phase_rad: f64,
    pub post_selection_probability: f64,
    /// |α|²sin⁴θ_H + |β|²sin⁴θ_V.
    pub expected_post_selection_probability: f64,
    pub fidelity: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sampled: Option<EbitSample>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RunOutput {
    Fringes(FringeScan),
    SingleShot(FringeScan),
    Hbt(HbtReport),
    QeCurve(QeCurve),
    Ebit(EbitReport),
}

pub fn run(config: &ExperimentConfig) -> Result<RunOutput> {
    config.validate()?;
    Ok(match config.kind {
        ExperimentKind::Fringes => RunOutput::Fringes(run_fringe_scan(config)?),
        ExperimentKind::SingleShot => RunOutput::SingleShot(run_single_shot(config)?),
        ExperimentKind::HbtLinear | ExperimentKind::HbtNonlinear => RunOutput::Hbt(run_hbt(config)?),
        ExperimentKind::QeCurve => RunOutput::QeCurve(run_qe_curve(config)?),
        ExperimentKind::Ebit => RunOutput::Ebit(run_ebit(config)?),
    })
}

fn interferometer(config: &ExperimentConfig) -> Result<TwoColorInterferometer> {
    TwoColorInterferometer::new(config.lambda_nm, config.pump_wavelength_nm, config.effective_cutoff())
}

fn scan(config: &ExperimentConfig, points: &[ScanPoint]) -> Result<FringeScan> {
    let ifm = interferometer(config)?;
    let theta = config.theta()?;
    let detectors = config.detector_specs()?;
    // Only the arm phase moves during a scan: split the network around it.
    let mut input = ifm.prepare(&config.input_state())?;
    if config.input_splitter {
        input = ifm.splitter(K1, K2)?.apply(&input)?;
    }
    let tail = compose(&[
        ifm.converter(theta, config.pump_phase_rad)?,
        ifm.splitter(K1, K2)?,
        ifm.splitter(K1_BAR, K2_BAR)?,
    ])?;

    let records = points
        .par_iter()
        .enumerate()
        .map(|(index, pt)| {
            let out = tail.apply(&ifm.arm_phase(pt.phi_rad)?.apply(&input)?)?;
            let model = DetectionModel::new(&out, &detectors)?;
            let p = model.firing_probabilities();
            let order = |label| model.position(label);
            let mut probabilities = [0.0; 4];
            for (slot, label) in probabilities.iter_mut().zip(FRINGE_DETECTORS) {
                *slot = p[order(label)?];
            }
            let counts = if config.trials > 0 {
                let summary = run_trials(&model, &[], config.trials, config.seed, index as u64)?;
                let mut c = [0u64; 4];
                for (slot, label) in c.iter_mut().zip(FRINGE_DETECTORS) {
                    *slot = summary.single(label)?;
                }
                Some(c)
            } else {
                None
            };
            Ok(FringeRecord {
                index,
                x_nm: pt.x_nm,
                volts: pt.x_nm / config.piezo_nm_per_volt,
                phi_rad: pt.phi_rad,
                psi_rad: pt.phi_rad + config.pump_phase_rad,
                probabilities,
                counts,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(FringeScan {
        theta_rad: theta,
        qe: theta.sin().powi(2),
        lambda_bar_nm: ifm.lambda_bar_nm(),
        analysis: analyze(&records)?,
        records,
    })
}

const DARK_AMPLITUDE: f64 = 1e-12;

fn channel(records: &[FringeRecord], slot: usize) -> Result<ChannelFit> {
    let phi: Vec<f64> = records.iter().map(|r| r.phi_rad).collect();
    let x: Vec<f64> = records.iter().map(|r| r.x_nm).collect();
    let y: Vec<f64> = records.iter().map(|r| r.probabilities[slot]).collect();
    let fit = fit_at_frequency(&phi, &y, 1.0)?;
    let period_nm = if fit.amplitude > DARK_AMPLITUDE {
        Some(estimate_period(&x, &y)?)
    } else {
        None
    };
    Ok(ChannelFit {
        visibility: fit.visibility(),
        fit,
        period_nm,
    })
}

fn sampled_visibility(records: &[FringeRecord], slot: usize) -> Result<Option<f64>> {
    let phi: Vec<f64> = records.iter().map(|r| r.phi_rad).collect();
    let mut y = Vec::with_capacity(records.len());
    for r in records {
        match r.counts {
            Some(c) => y.push(c[slot] as f64),
            None => return Ok(None),
        }
    }
    Ok(fit_at_frequency(&phi, &y, 1.0)?.visibility())
}

/// Fits need a scan that spans distinct phases; shorter scans report none.
fn analyze(records: &[FringeRecord]) -> Result<Option<FringeAnalysis>> {
    if records.len() < 4 || records[records.len() - 1].x_nm <= records[0].x_nm {
        return Ok(None);
    }
    let ir = channel(records, 0)?;
    let uv = channel(records, 2)?;
    let phase_offset_rad = (ir.fit.amplitude > DARK_AMPLITUDE && uv.fit.amplitude > DARK_AMPLITUDE)
        .then(|| wrap_phase(uv.fit.phase_rad - ir.fit.phase_rad));
    Ok(Some(FringeAnalysis {
        sampled_ir_visibility: sampled_visibility(records, 0)?,
        sampled_uv_visibility: sampled_visibility(records, 2)?,
        ir,
        uv,
        phase_offset_rad,
    }))
}

pub fn run_fringe_scan(config: &ExperimentConfig) -> Result<FringeScan> {
    scan(config, &config.scan_points()?)
}

pub fn run_single_shot(config: &ExperimentConfig) -> Result<FringeScan> {
    let phi = config
        .phi_rad
        .ok_or_else(|| Error::config("missing required field `phi_rad`"))?;
    let per_nm = crate::physics::mirror_phase(1.0, config.lambda_nm);
    scan(config, &[ScanPoint { x_nm: phi / per_nm, phi_rad: phi }])
}

pub fn run_hbt(config: &ExperimentConfig) -> Result<HbtReport> {
    let hbt = config
        .hbt
        .as_ref()
        .ok_or_else(|| Error::config("missing required field `hbt`"))?;
    let (method, pair, output_splitters) = match config.kind {
        ExperimentKind::HbtLinear => match hbt.arm {
            Some(Arm::Ir) => ("linear_ir", (D_A, D_B), true),
            Some(Arm::Uv) => ("linear_uv", (DBAR_A, DBAR_B), true),
            None => return Err(Error::config("missing required field `hbt.arm`")),
        },
        ExperimentKind::HbtNonlinear => match hbt.pair.unwrap_or(1) {
            1 => ("nonlinear_pair1", (D_1, DBAR_1), false),
            2 => ("nonlinear_pair2", (D_2, DBAR_2), false),
            _ => return Err(Error::config("`hbt.pair` must be 1 or 2")),
        },
        other => return Err(Error::config(format!("kind `{}` is not an hbt run", other.as_str()))),
    };
    let ifm = interferometer(config)?;
    let theta = config.theta()?;
    let stages = Stages {
        input_splitter: config.input_splitter,
        phi: hbt.phi_rad,
        theta,
        pump_phase: config.pump_phase_rad,
        output_splitters,
    };
    let out = ifm.output_state(&config.input_state(), &stages)?;
    let model = DetectionModel::new(&out, &config.detector_specs()?)?;
    let (ia, ib) = (model.position(pair.0)?, model.position(pair.1)?);
    let p = model.firing_probabilities();
    let joint = model.joint_firing_probability(ia, ib);
    let denom = p[ia] * p[ib];
    let analytic_g2 = (denom > 1e-300).then(|| joint / denom);

    let (counts, g2, g2_undefined) = if config.trials > 0 {
        let pairs = [(pair.0.to_string(), pair.1.to_string())];
        let summary = run_trials(&model, &pairs, config.trials, config.seed, 0)?;
        match g2_estimate(&summary, pair) {
            Ok(g) => (Some(summary), Some(g), None),
            Err(Error::UndefinedEstimate(m)) => (Some(summary), None, Some(m)),
            Err(e) => return Err(e),
        }
    } else {
        (None, None, None)
    };
    Ok(HbtReport {
        method: method.into(),
        pair: (pair.0.into(), pair.1.into()),
        phi_rad: hbt.phi_rad,
        theta_rad: theta,
        singles_probability: (p[ia], p[ib]),
        joint_probability: joint,
        analytic_g2,
        counts,
        g2,
        g2_undefined,
    })
}

pub fn run_qe_curve(config: &ExperimentConfig) -> Result<QeCurve> {
    let q = config
        .qe_curve
        .as_ref()
        .ok_or_else(|| Error::config("missing required field `qe_curve`"))?;
    let crystal = config.crystal_params()?;
    let n = q.points;
    let h = if n > 1 {
        (q.intensity_stop_gw_cm2 - q.intensity_start_gw_cm2) / (n - 1) as f64
    } else {
        0.0
    };
    let mut rows = (0..n)
        .map(|i| {
            let intensity = q.intensity_start_gw_cm2 + h * i as f64;
            Ok(QeRow {
                intensity_gw_cm2: intensity,
                qe: quantum_efficiency(&config.pump(intensity), &crystal, config.lambda_nm)?,
                source: QeSource::Model,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    if let Some(c) = &config.crystal {
        if let (Some(qe), Some(i)) = (c.calibration_qe, c.calibration_intensity_gw_cm2) {
            rows.push(QeRow { intensity_gw_cm2: i, qe, source: QeSource::Anchor });
        }
    }
    rows.extend(EXPERIMENT_QE_POINTS.iter().map(|&(i, qe)| QeRow {
        intensity_gw_cm2: i,
        qe,
        source: QeSource::Experiment,
    }));
    Ok(QeCurve { rows, d2: crystal.d2 })
}

pub fn run_ebit(config: &ExperimentConfig) -> Result<EbitReport> {
    let e = config
        .ebit
        .as_ref()
        .ok_or_else(|| Error::config("missing required field `ebit`"))?;
    let theta_h = config.theta()?;
    let theta_v = e.theta_v_rad.unwrap_or(theta_h);
    let (alpha, beta) = (complex(e.alpha), complex(e.beta));
    let net = EntangledPairNetwork::new(config.lambda_nm, config.pump_wavelength_nm)?;
    let outcome = net.run(alpha, beta, theta_h, theta_v, config.pump_phase_rad)?;

    let sampled = if config.trials > 0 {
        let out = net
            .converter(theta_h, theta_v, config.pump_phase_rad)?
            .apply(&net.input(alpha, beta)?)?;
        let uv = |path, pol| ebit_mode(path, pol, true);
        let pols = [Polarization::H, Polarization::V];
        let detectors = [1u8, 2]
            .iter()
            .flat_map(|&path| pols.iter().map(move |&pol| uv(path, pol)))
            .map(|m| DetectorSpec::ideal(m.clone(), m))
            .collect::<Vec<_>>();
        let model = DetectionModel::new(&out, &detectors)?;
        let pairs: Vec<(String, String)> = pols
            .iter()
            .flat_map(|&p1| pols.iter().map(move |&p2| (uv(1, p1), uv(2, p2))))
            .collect();
        let summary = run_trials(&model, &pairs, config.trials, config.seed, 0)?;
        let n_post_selected = pairs
            .iter()
            .map(|(a, b)| summary.coincidence(a, b))
            .sum::<Result<u64>>()?;
        Some(EbitSample { n_trials: config.trials, n_post_selected })
    } else {
        None
    };
    Ok(EbitReport {
        alpha: e.alpha,
        beta: e.beta,
        theta_h_rad: theta_h,
        theta_v_rad: theta_v,
        pump_phase_rad: config.pump_phase_rad,
        post_selection_probability: outcome.post_selection_probability,
        expected_post_selection_probability: alpha.norm_sqr() * theta_h.sin().powi(4)
            + beta.norm_sqr() * theta_v.sin().powi(4),
        fidelity: outcome.fidelity,
        sampled,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReplayRow {
    pub label: String,
    pub estimate: G2Estimate,
    pub quoted_bound: Option<f64>,
}

pub fn replay_counts(records: &[PublishedCounts]) -> Result<Vec<ReplayRow>> {
    records
        .iter()
        .map(|r| {
            Ok(ReplayRow {
                label: r.label.into(),
                estimate: G2Estimate::from_counts(r.n_trials, r.n_a, r.n_b, r.n_c)?,
                quoted_bound: Some(r.quoted_bound),
            })
        })
        .collect()
}
