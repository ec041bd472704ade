//! Declarative experiment description, read from TOML.
//!
//! Units are carried in key names. A minimal fringe scan:
//!
//! ```toml
//! kind = "fringes"
//! lambda_nm = 876.1
//! pump_wavelength_nm = 795.0
//!
//! [converter]
//! qe = 0.5
//!
//! [scan]
//! x_start_nm = 0.0
//! x_stop_nm = 1300.0
//! points = 200
//! ```

use std::f64::consts::FRAC_PI_2;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::detection::DetectorSpec;
use crate::error::{Error, Result};
use crate::interferometer::{detector_mode, InputState, DBAR_1, DBAR_2, DBAR_A, DBAR_B, D_1, D_2, D_A, D_B};
use crate::physics::{
    calibrate_effective_nonlinearity, mixing_angle, mirror_phase, CrystalParams, EfficiencyConvention, PumpSpec,
    LIIO3_N_E_BAR, LIIO3_N_O,
};

pub const DEFAULT_PIEZO_NM_PER_VOLT: f64 = 0.7;
pub const DEFAULT_CUTOFF: u32 = 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Fringes,
    HbtLinear,
    HbtNonlinear,
    QeCurve,
    Ebit,
    SingleShot,
}

impl ExperimentKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ExperimentKind::Fringes => "fringes",
            ExperimentKind::HbtLinear => "hbt_linear",
            ExperimentKind::HbtNonlinear => "hbt_nonlinear",
            ExperimentKind::QeCurve => "qe_curve",
            ExperimentKind::Ebit => "ebit",
            ExperimentKind::SingleShot => "single_shot",
        }
    }
}

/// Exactly one of the three ways to set the converter strength.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConverterConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta_rad: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub qe: Option<f64>,
    /// Requires a `[crystal]` section.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pump_intensity_gw_cm2: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrystalConfig {
    #[serde(default = "default_length")]
    pub length_mm: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d2: Option<f64>,
    #[serde(default = "default_n_o")]
    pub n_o: f64,
    #[serde(default = "default_n_e_bar")]
    pub n_e_bar: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta_m_rad: Option<f64>,
    #[serde(default = "default_convention")]
    pub convention: EfficiencyConvention,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub calibration_qe: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub calibration_intensity_gw_cm2: Option<f64>,
}

fn default_length() -> f64 {
    1.0
}
fn default_n_o() -> f64 {
    LIIO3_N_O
}
fn default_n_e_bar() -> f64 {
    LIIO3_N_E_BAR
}
fn default_convention() -> EfficiencyConvention {
    EfficiencyConvention::Calibrated
}
fn default_piezo() -> f64 {
    DEFAULT_PIEZO_NM_PER_VOLT
}
fn default_cutoff() -> u32 {
    DEFAULT_CUTOFF
}
fn default_true() -> bool {
    true
}
fn default_efficiency() -> f64 {
    1.0
}
fn default_hbt_phase() -> f64 {
    FRAC_PI_2
}
fn is_default_cutoff(c: &u32) -> bool {
    *c == DEFAULT_CUTOFF
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorConfig {
    pub label: String,
    #[serde(default = "default_efficiency")]
    pub efficiency: f64,
    #[serde(default)]
    pub dark_count_probability: f64,
}

/// Scan axis: mirror displacement (primary) or arm phase, sampled either by
/// point count or by step.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_start_nm: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_stop_nm: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_step_nm: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi_start_rad: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi_stop_rad: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi_step_rad: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<u32>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arm {
    Ir,
    Uv,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HbtConfig {
    /// Output arm for the linear method.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub arm: Option<Arm>,
    /// Mode pair j for the nonlinear method.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pair: Option<u8>,
    #[serde(default = "default_hbt_phase")]
    pub phi_rad: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QeCurveConfig {
    pub intensity_start_gw_cm2: f64,
    pub intensity_stop_gw_cm2: f64,
    pub points: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EbitConfig {
    pub alpha: [f64; 2],
    pub beta: [f64; 2],
    /// Mixing angle of the V-polarization slab when it deliberately differs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta_v_rad: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub trials: u64,
    #[serde(default = "default_cutoff", skip_serializing_if = "is_default_cutoff")]
    pub cutoff: u32,
    pub lambda_nm: f64,
    pub pump_wavelength_nm: f64,
    #[serde(default)]
    pub pump_phase_rad: f64,
    #[serde(default = "default_piezo")]
    pub piezo_nm_per_volt: f64,
    #[serde(default)]
    pub uv_background_probability: f64,
    #[serde(default = "default_true")]
    pub input_splitter: bool,
    /// Arm phase Φ for `single_shot`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi_rad: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub converter: Option<ConverterConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub crystal: Option<CrystalConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input: Option<InputState>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub detectors: Vec<DetectorConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scan: Option<ScanConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hbt: Option<HbtConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub qe_curve: Option<QeCurveConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ebit: Option<EbitConfig>,
}

/// One scan point: mirror displacement and the arm phase it produces.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScanPoint {
    pub x_nm: f64,
    pub phi_rad: f64,
}

fn finite(name: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::config(format!("{name} must be finite, got {v}")))
    }
}

fn require<'a, T>(field: &str, v: &'a Option<T>) -> Result<&'a T> {
    v.as_ref()
        .ok_or_else(|| Error::config(format!("missing required field `{field}`")))
}

fn forbid<T>(kind: ExperimentKind, field: &str, v: &Option<T>) -> Result<()> {
    match v {
        Some(_) => Err(Error::config(format!(
            "field `{field}` is not used by kind `{}`",
            kind.as_str()
        ))),
        None => Ok(()),
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Re-reads the `config` echo stored in a run summary.
    pub fn from_summary_json(text: &str) -> Result<Self> {
        let mut v: serde_json::Value =
            serde_json::from_str(text).map_err(|e| Error::config(format!("summary: {e}")))?;
        let echo = v
            .get_mut("config")
            .map(serde_json::Value::take)
            .ok_or_else(|| Error::config("summary has no `config` entry"))?;
        let cfg: ExperimentConfig =
            serde_json::from_value(echo).map_err(|e| Error::config(format!("summary config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Encoding(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        use ExperimentKind::*;
        let k = self.kind;
        for (name, v) in [
            ("lambda_nm", self.lambda_nm),
            ("pump_wavelength_nm", self.pump_wavelength_nm),
            ("piezo_nm_per_volt", self.piezo_nm_per_volt),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config(format!("`{name}` must be positive, got {v}")));
            }
        }
        finite("pump_phase_rad", self.pump_phase_rad)?;
        if !(0.0..1.0).contains(&self.uv_background_probability) {
            return Err(Error::config("`uv_background_probability` must lie in [0, 1)"));
        }

        match k {
            Fringes | SingleShot | HbtLinear | HbtNonlinear => {
                require("converter", &self.converter)?;
                forbid(k, "qe_curve", &self.qe_curve)?;
                forbid(k, "ebit", &self.ebit)?;
            }
            QeCurve => {
                require("crystal", &self.crystal)?;
                require("qe_curve", &self.qe_curve)?;
                for (name, present) in [
                    ("converter", self.converter.is_some()),
                    ("input", self.input.is_some()),
                    ("detectors", !self.detectors.is_empty()),
                    ("scan", self.scan.is_some()),
                    ("hbt", self.hbt.is_some()),
                    ("ebit", self.ebit.is_some()),
                    ("phi_rad", self.phi_rad.is_some()),
                ] {
                    if present {
                        return Err(Error::config(format!("field `{name}` is not used by kind `qe_curve`")));
                    }
                }
            }
            Ebit => {
                require("converter", &self.converter)?;
                require("ebit", &self.ebit)?;
                forbid(k, "input", &self.input)?;
                forbid(k, "scan", &self.scan)?;
                forbid(k, "hbt", &self.hbt)?;
                forbid(k, "qe_curve", &self.qe_curve)?;
                forbid(k, "phi_rad", &self.phi_rad)?;
                if !self.detectors.is_empty() {
                    return Err(Error::config("field `detectors` is not used by kind `ebit`"));
                }
            }
        }
        match k {
            Fringes => {
                require("scan", &self.scan)?;
                forbid(k, "hbt", &self.hbt)?;
                forbid(k, "phi_rad", &self.phi_rad)?;
                self.scan_points()?;
            }
            SingleShot => {
                finite("phi_rad", *require("phi_rad", &self.phi_rad)?)?;
                forbid(k, "scan", &self.scan)?;
                forbid(k, "hbt", &self.hbt)?;
            }
            HbtLinear | HbtNonlinear => {
                let hbt = require("hbt", &self.hbt)?;
                forbid(k, "scan", &self.scan)?;
                forbid(k, "phi_rad", &self.phi_rad)?;
                finite("hbt.phi_rad", hbt.phi_rad)?;
                if k == HbtLinear {
                    require("hbt.arm", &hbt.arm)?;
                    forbid(k, "hbt.pair", &hbt.pair)?;
                } else {
                    forbid(k, "hbt.arm", &hbt.arm)?;
                    if !matches!(hbt.pair, None | Some(1) | Some(2)) {
                        return Err(Error::config("`hbt.pair` must be 1 or 2"));
                    }
                }
            }
            QeCurve => {
                let q = self.qe_curve.as_ref().expect("checked above");
                finite("qe_curve.intensity_start_gw_cm2", q.intensity_start_gw_cm2)?;
                finite("qe_curve.intensity_stop_gw_cm2", q.intensity_stop_gw_cm2)?;
                if q.intensity_start_gw_cm2 < 0.0 || q.intensity_stop_gw_cm2 < q.intensity_start_gw_cm2 {
                    return Err(Error::config("qe_curve intensities must satisfy 0 ≤ start ≤ stop"));
                }
                if q.points == 0 {
                    return Err(Error::config("`qe_curve.points` must be at least 1"));
                }
                self.crystal_params()?;
            }
            Ebit => {
                let e = self.ebit.as_ref().expect("checked above");
                let norm = e.alpha.iter().chain(&e.beta).map(|x| x * x).sum::<f64>();
                if !((norm - 1.0).abs() < 1e-9) {
                    return Err(Error::config(format!(
                        "ebit amplitudes must satisfy |α|² + |β|² = 1, got {norm}"
                    )));
                }
                if let Some(t) = e.theta_v_rad {
                    finite("ebit.theta_v_rad", t)?;
                }
            }
        }
        if k != QeCurve {
            self.theta()?;
            self.detector_specs()?;
        }
        Ok(())
    }

    pub fn pump(&self, intensity_gw_cm2: f64) -> PumpSpec {
        PumpSpec {
            wavelength_nm: self.pump_wavelength_nm,
            intensity_gw_cm2,
            phase_rad: self.pump_phase_rad,
        }
    }

    /// Crystal parameters, calibrated against the configured anchor if one is given.
    pub fn crystal_params(&self) -> Result<CrystalParams> {
        let c = require("crystal", &self.crystal)?;
        let base = CrystalParams {
            length_mm: c.length_mm,
            d2: c.d2,
            n_o: c.n_o,
            n_e_bar: c.n_e_bar,
            theta_m_rad: c.theta_m_rad,
            convention: c.convention,
        };
        match (c.calibration_qe, c.calibration_intensity_gw_cm2) {
            (Some(qe), Some(i)) => {
                if c.convention != EfficiencyConvention::Calibrated {
                    return Err(Error::config("calibration anchor given for an absolute-mode crystal"));
                }
                calibrate_effective_nonlinearity(qe, &self.pump(i), &base, self.lambda_nm)
                    .map_err(|e| Error::config(format!("crystal calibration: {e}")))
            }
            (None, None) => {
                if base.d2.is_none() {
                    return Err(Error::config(
                        "crystal needs `calibration_qe` and `calibration_intensity_gw_cm2`, or `d2`",
                    ));
                }
                Ok(base)
            }
            _ => Err(Error::config(
                "`calibration_qe` and `calibration_intensity_gw_cm2` must be given together",
            )),
        }
    }

    pub fn has_calibration_anchor(&self) -> bool {
        self.crystal
            .as_ref()
            .is_some_and(|c| c.calibration_qe.is_some() && c.calibration_intensity_gw_cm2.is_some())
    }

    /// Converter mixing angle θ (QE = sin²θ).
    pub fn theta(&self) -> Result<f64> {
        let c = require("converter", &self.converter)?;
        let set = [c.theta_rad.is_some(), c.qe.is_some(), c.pump_intensity_gw_cm2.is_some()]
            .iter()
            .filter(|&&b| b)
            .count();
        if set != 1 {
            return Err(Error::config(
                "converter needs exactly one of `theta_rad`, `qe`, `pump_intensity_gw_cm2`",
            ));
        }
        if let Some(t) = c.theta_rad {
            finite("converter.theta_rad", t)?;
            return Ok(t);
        }
        if let Some(q) = c.qe {
            if !(0.0..=1.0).contains(&q) {
                return Err(Error::config(format!("`converter.qe` must lie in [0, 1], got {q}")));
            }
            return Ok(q.sqrt().asin());
        }
        let i = c.pump_intensity_gw_cm2.expect("counted above");
        if !(i.is_finite() && i >= 0.0) {
            return Err(Error::config("`converter.pump_intensity_gw_cm2` must be non-negative"));
        }
        let crystal = self.crystal_params()?;
        mixing_angle(&self.pump(i), &crystal, self.lambda_nm).map_err(|e| match e {
            Error::Config(m) => Error::Config(m),
            other => Error::config(other.to_string()),
        })
    }

    fn allowed_detectors(&self) -> &'static [&'static str] {
        match self.kind {
            ExperimentKind::HbtNonlinear => &[D_1, DBAR_1, D_2, DBAR_2],
            ExperimentKind::Ebit | ExperimentKind::QeCurve => &[],
            _ => &[D_A, D_B, DBAR_A, DBAR_B],
        }
    }

    /// Full detector list for the kind: configured entries override ideal
    /// defaults, and the UV background folds into the UV dark-count rate.
    pub fn detector_specs(&self) -> Result<Vec<DetectorSpec>> {
        let allowed = self.allowed_detectors();
        let mut seen = std::collections::HashSet::new();
        for d in &self.detectors {
            if !allowed.contains(&d.label.as_str()) {
                return Err(Error::config(format!(
                    "unknown detector label {:?} for kind `{}` (expected one of {:?})",
                    d.label,
                    self.kind.as_str(),
                    allowed
                )));
            }
            if !seen.insert(d.label.as_str()) {
                return Err(Error::config(format!("detector {:?} configured twice", d.label)));
            }
        }
        allowed
            .iter()
            .map(|&label| {
                let mode = detector_mode(label).expect("allowed labels have modes");
                let (eff, mut dark) = self
                    .detectors
                    .iter()
                    .find(|d| d.label == label)
                    .map(|d| (d.efficiency, d.dark_count_probability))
                    .unwrap_or((1.0, 0.0));
                if mode.ends_with("bar") {
                    dark = 1.0 - (1.0 - dark) * (1.0 - self.uv_background_probability);
                }
                DetectorSpec::new(label, mode, eff, dark)
            })
            .collect()
    }

    pub fn input_state(&self) -> InputState {
        self.input.clone().unwrap_or(InputState::SinglePhoton)
    }

    /// Photon cutoff, raised if the requested Fock input needs more.
    pub fn effective_cutoff(&self) -> u32 {
        match &self.input {
            Some(InputState::Fock { occupation }) => self.cutoff.max(occupation[0] + occupation[1]),
            _ => self.cutoff,
        }
    }

    pub fn scan_points(&self) -> Result<Vec<ScanPoint>> {
        let s = require("scan", &self.scan)?;
        let x_axis = s.x_start_nm.is_some() || s.x_stop_nm.is_some() || s.x_step_nm.is_some();
        let phi_axis = s.phi_start_rad.is_some() || s.phi_stop_rad.is_some() || s.phi_step_rad.is_some();
        if x_axis == phi_axis {
            return Err(Error::config("scan needs either the x_*_nm keys or the phi_*_rad keys"));
        }
        let (start, stop, step, prefix) = if x_axis {
            (
                *require("scan.x_start_nm", &s.x_start_nm)?,
                *require("scan.x_stop_nm", &s.x_stop_nm)?,
                s.x_step_nm,
                "x",
            )
        } else {
            (
                *require("scan.phi_start_rad", &s.phi_start_rad)?,
                *require("scan.phi_stop_rad", &s.phi_stop_rad)?,
                s.phi_step_rad,
                "phi",
            )
        };
        finite("scan start", start)?;
        finite("scan stop", stop)?;
        if stop < start {
            return Err(Error::config("scan stop must not precede scan start"));
        }
        let values: Vec<f64> = match (s.points, step) {
            (Some(n), None) => {
                if n == 0 {
                    return Err(Error::config("`scan.points` must be at least 1"));
                }
                if n == 1 {
                    vec![start]
                } else {
                    let h = (stop - start) / (n - 1) as f64;
                    (0..n).map(|i| start + h * i as f64).collect()
                }
            }
            (None, Some(h)) => {
                if !(h.is_finite() && h > 0.0) {
                    return Err(Error::config(format!("`scan.{prefix}_step` must be positive")));
                }
                let n = ((stop - start) / h + 1e-9).floor() as u64 + 1;
                if n > 10_000_000 {
                    return Err(Error::config("scan has too many points"));
                }
                (0..n).map(|i| start + h * i as f64).collect()
            }
            _ => {
                return Err(Error::config(format!(
                    "scan needs exactly one of `points` and `{prefix}_step`"
                )))
            }
        };
        let per_nm = mirror_phase(1.0, self.lambda_nm);
        Ok(values
            .into_iter()
            .map(|v| {
                if x_axis {
                    ScanPoint { x_nm: v, phi_rad: mirror_phase(v, self.lambda_nm) }
                } else {
                    ScanPoint { x_nm: v / per_nm, phi_rad: v }
                }
            })
            .collect())
    }
}

pub fn parse_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::config(format!("cannot read {}: {e}", path.display())))?;
    ExperimentConfig::from_toml_str(&text).map_err(|e| match e {
        Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
        other => other,
    })
}
