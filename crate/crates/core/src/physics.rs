//! Scalar nonlinear-optics relations for the converter.

use std::f64::consts::PI;

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Vacuum permittivity, F/m.
pub const EPSILON_0: f64 = 8.854_187_812_8e-12;

/// Placeholder LiIO₃ ordinary index near 876 nm (literature value, only used in absolute mode).
pub const LIIO3_N_O: f64 = 1.86;
/// Placeholder LiIO₃ extraordinary index near 417 nm at the matching angle.
pub const LIIO3_N_E_BAR: f64 = 1.75;

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("{name} must be positive, got {v}")))
    }
}

/// λ̄ = (λ⁻¹ + λ_p⁻¹)⁻¹.
pub fn sum_frequency_wavelength(lambda_in_nm: f64, lambda_p_nm: f64) -> Result<f64> {
    positive("input wavelength", lambda_in_nm)?;
    positive("pump wavelength", lambda_p_nm)?;
    Ok(1.0 / (1.0 / lambda_in_nm + 1.0 / lambda_p_nm))
}

/// λ = (λ̄⁻¹ − λ_p⁻¹)⁻¹; requires λ̄ < λ_p for a positive result.
pub fn difference_frequency_wavelength(lambda_bar_nm: f64, lambda_p_nm: f64) -> Result<f64> {
    positive("up-converted wavelength", lambda_bar_nm)?;
    positive("pump wavelength", lambda_p_nm)?;
    if lambda_bar_nm >= lambda_p_nm {
        return Err(Error::domain(format!(
            "no positive difference-frequency wavelength for λ̄ = {lambda_bar_nm} nm ≥ λ_p = {lambda_p_nm} nm"
        )));
    }
    Ok(1.0 / (1.0 / lambda_bar_nm - 1.0 / lambda_p_nm))
}

/// Mutual arm phase from a mirror displacement: 2^{3/2}·π·X/λ.
pub fn mirror_phase(displacement_nm: f64, lambda_nm: f64) -> f64 {
    2.0f64.powf(1.5) * PI * displacement_nm / lambda_nm
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PumpSpec {
    pub wavelength_nm: f64,
    pub intensity_gw_cm2: f64,
    pub phase_rad: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EfficiencyConvention {
    /// Prefactor π/ε₀ and units folded into a fitted dimensionless `d2`.
    Calibrated,
    /// Literal SI evaluation: d2 in pm/V, I in GW/cm², lengths converted to metres.
    Absolute,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrystalParams {
    pub length_mm: f64,
    /// Effective nonlinearity; `None` until calibrated (calibrated mode) or supplied (absolute mode).
    pub d2: Option<f64>,
    pub n_o: f64,
    pub n_e_bar: f64,
    /// Phase-matching angle; informational, the indices already refer to it.
    pub theta_m_rad: Option<f64>,
    pub convention: EfficiencyConvention,
}

impl CrystalParams {
    /// 1 mm Type-I LiIO₃ slab with placeholder indices, not yet calibrated.
    pub fn liio3_1mm() -> Self {
        CrystalParams {
            length_mm: 1.0,
            d2: None,
            n_o: LIIO3_N_O,
            n_e_bar: LIIO3_N_E_BAR,
            theta_m_rad: None,
            convention: EfficiencyConvention::Calibrated,
        }
    }

    fn validate(&self) -> Result<()> {
        positive("crystal length", self.length_mm)?;
        if !(self.n_o >= 1.0 && self.n_e_bar >= 1.0) {
            return Err(Error::domain("refractive indices must be ≥ 1"));
        }
        Ok(())
    }

    /// √(I/(λ·λ_p·n°·n̄ᵉ)) in the units of the selected convention.
    fn intensity_factor(&self, pump: &PumpSpec, lambda_in_nm: f64) -> f64 {
        let n = self.n_o * self.n_e_bar;
        match self.convention {
            EfficiencyConvention::Calibrated => {
                (pump.intensity_gw_cm2 / (lambda_in_nm * pump.wavelength_nm * n)).sqrt()
            }
            EfficiencyConvention::Absolute => {
                let i_si = pump.intensity_gw_cm2 * 1e13;
                (i_si / (lambda_in_nm * 1e-9 * pump.wavelength_nm * 1e-9 * n)).sqrt()
            }
        }
    }

    fn length_times_d2(&self, d2: f64) -> f64 {
        match self.convention {
            EfficiencyConvention::Calibrated => d2 * self.length_mm,
            EfficiencyConvention::Absolute => (PI / EPSILON_0) * d2 * 1e-12 * self.length_mm * 1e-3,
        }
    }
}

/// Converter mixing angle θ for a given pump; QE = sin²θ.
pub fn mixing_angle(pump: &PumpSpec, crystal: &CrystalParams, lambda_in_nm: f64) -> Result<f64> {
    crystal.validate()?;
    positive("input wavelength", lambda_in_nm)?;
    positive("pump wavelength", pump.wavelength_nm)?;
    if !(pump.intensity_gw_cm2.is_finite() && pump.intensity_gw_cm2 >= 0.0) {
        return Err(Error::domain(format!(
            "pump intensity must be non-negative, got {}",
            pump.intensity_gw_cm2
        )));
    }
    let d2 = crystal.d2.ok_or_else(|| match crystal.convention {
        EfficiencyConvention::Calibrated => {
            Error::config("calibrated conversion efficiency needs a calibration anchor")
        }
        EfficiencyConvention::Absolute => Error::config("absolute conversion efficiency needs d2"),
    })?;
    Ok(crystal.length_times_d2(d2) * crystal.intensity_factor(pump, lambda_in_nm))
}

/// Up-conversion quantum efficiency for a plane-wave collinear interaction.
pub fn quantum_efficiency(pump: &PumpSpec, crystal: &CrystalParams, lambda_in_nm: f64) -> Result<f64> {
    Ok(mixing_angle(pump, crystal, lambda_in_nm)?.sin().powi(2))
}

/// Fixes the effective nonlinearity so that `quantum_efficiency` at the
/// reference pump equals `qe_ref` on the first sin² branch.
pub fn calibrate_effective_nonlinearity(
    qe_ref: f64,
    reference: &PumpSpec,
    crystal: &CrystalParams,
    lambda_in_nm: f64,
) -> Result<CrystalParams> {
    if !(qe_ref > 0.0 && qe_ref <= 1.0) {
        return Err(Error::domain(format!("reference QE must lie in (0, 1], got {qe_ref}")));
    }
    positive("reference intensity", reference.intensity_gw_cm2)?;
    positive("input wavelength", lambda_in_nm)?;
    positive("pump wavelength", reference.wavelength_nm)?;
    crystal.validate()?;
    let target = qe_ref.sqrt().asin();
    let per_unit_d2 = crystal.length_times_d2(1.0) * crystal.intensity_factor(reference, lambda_in_nm);
    Ok(CrystalParams {
        d2: Some(target / per_unit_d2),
        ..*crystal
    })
}

/// Wavelengths and refractive indices of the three interacting waves.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ThreeWave {
    pub lambda_in_nm: f64,
    pub n_in: f64,
    pub lambda_p_nm: f64,
    pub n_p: f64,
    pub lambda_out_nm: f64,
    pub n_out: f64,
}

impl ThreeWave {
    fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("input wavelength", self.lambda_in_nm),
            ("input index", self.n_in),
            ("pump wavelength", self.lambda_p_nm),
            ("pump index", self.n_p),
            ("output wavelength", self.lambda_out_nm),
            ("output index", self.n_out),
        ] {
            positive(name, v)?;
        }
        Ok(())
    }
}

/// Wavenumber 2πn/λ in µm⁻¹ for λ in nm.
pub fn wavenumber_per_um(lambda_nm: f64, n: f64) -> f64 {
    2.0 * PI * n / (lambda_nm * 1e-3)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhaseMatch {
    /// Unit direction of the momentum-conserving up-converted wavevector.
    pub direction: Vector2<f64>,
    /// |k_in + k_p| − 2πn̄/λ̄ in µm⁻¹; zero when perfectly phase matched.
    pub mismatch_per_um: f64,
}

/// Planar sum-frequency phase matching: k̄ = k_in + k_p.
pub fn pmc_emission(k_in_dir: Vector2<f64>, k_p_dir: Vector2<f64>, waves: &ThreeWave) -> Result<PhaseMatch> {
    for (name, d) in [("input", k_in_dir), ("pump", k_p_dir)] {
        if !((d.norm() - 1.0).abs() < 1e-9) {
            return Err(Error::domain(format!("{name} direction must be a unit vector")));
        }
    }
    waves.validate()?;
    let k_in = k_in_dir * wavenumber_per_um(waves.lambda_in_nm, waves.n_in);
    let k_p = k_p_dir * wavenumber_per_um(waves.lambda_p_nm, waves.n_p);
    let sum = k_in + k_p;
    let magnitude = sum.norm();
    let scale = k_in.norm().max(k_p.norm());
    if magnitude <= 1e-12 * scale {
        return Err(Error::DegenerateGeometry(
            "input and pump wavevectors cancel".to_string(),
        ));
    }
    Ok(PhaseMatch {
        direction: sum / magnitude,
        mismatch_per_um: magnitude - wavenumber_per_um(waves.lambda_out_nm, waves.n_out),
    })
}
