//! The two-wavelength Mach-Zehnder network and the entangled-pair network.
//!
//! Mode layout of [`TwoColorInterferometer`]: `k1`, `k2` at the input
//! wavelength λ and `k1bar`, `k2bar` at λ̄. The input splitter feeds
//! `k1`/`k2`, the mirror phase Φ sits on `k2`, the converter couples
//! `k_j ↔ k̄_j`, and the output splitters close the IR and UV
//! interferometers on the same mode labels.
//!
//! Detector convention: `D_A` watches the IR output port that is
//! constructive at Φ = 0 (mode `k2`), `D_B` the other one (`k1`);
//! `DBAR_A`/`DBAR_B` do the same on `k2bar`/`k1bar`. The pump phase Θ is
//! applied on the `k2 ↔ k2bar` conversion only: a common pump phase on both
//! pairs is a global phase of the UV qubit, so only the relative pump phase
//! is observable and it shifts the UV fringe by Θ.

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::detection::DetectorSpec;
use crate::elements::{beam_splitter, compose, frequency_converter, phase_shifter, ConversionPair, ConverterSpec};
use crate::error::{Error, Result};
use crate::fock::{
    build_basis, coherent_state, inner_product, pure_state, superpose, ElementUnitary, FockBasis,
    ModeSpec, Polarization, StateVector,
};
use crate::physics::sum_frequency_wavelength;

pub const K1: &str = "k1";
pub const K2: &str = "k2";
pub const K1_BAR: &str = "k1bar";
pub const K2_BAR: &str = "k2bar";

pub const D_A: &str = "D_A";
pub const D_B: &str = "D_B";
pub const DBAR_A: &str = "DBAR_A";
pub const DBAR_B: &str = "DBAR_B";
pub const D_1: &str = "D_1";
pub const D_2: &str = "D_2";
pub const DBAR_1: &str = "DBAR_1";
pub const DBAR_2: &str = "DBAR_2";

/// Mode watched by each named detector of the two-colour interferometer.
pub fn detector_mode(label: &str) -> Option<&'static str> {
    match label {
        D_A => Some(K2),
        D_B => Some(K1),
        DBAR_A => Some(K2_BAR),
        DBAR_B => Some(K1_BAR),
        D_1 => Some(K1),
        D_2 => Some(K2),
        DBAR_1 => Some(K1_BAR),
        DBAR_2 => Some(K2_BAR),
        _ => None,
    }
}

/// State injected into the input ports `k1`, `k2`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum InputState {
    /// One photon on `k1`.
    SinglePhoton,
    /// |n₁⟩|n₂⟩ on `k1`, `k2`.
    Fock { occupation: [u32; 2] },
    /// α|1,0⟩ + β|0,1⟩; complex numbers as `[re, im]`.
    Qubit { alpha: [f64; 2], beta: [f64; 2] },
    /// Truncated coherent state |γ⟩ on `k1`.
    Coherent { gamma: [f64; 2] },
}

pub(crate) fn complex(z: [f64; 2]) -> Complex64 {
    Complex64::new(z[0], z[1])
}

/// Stage settings for one evaluation of the interferometer.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Stages {
    pub input_splitter: bool,
    pub phi: f64,
    pub theta: f64,
    pub pump_phase: f64,
    /// Close the interferometers with the IR and UV output splitters.
    pub output_splitters: bool,
}

#[derive(Clone, Debug)]
pub struct TwoColorInterferometer {
    lambda_nm: f64,
    lambda_bar_nm: f64,
    basis: Arc<FockBasis>,
}

impl TwoColorInterferometer {
    pub fn new(lambda_nm: f64, lambda_p_nm: f64, cutoff: u32) -> Result<Self> {
        let lambda_bar_nm = sum_frequency_wavelength(lambda_nm, lambda_p_nm)?;
        let mode = |l: &str, w| ModeSpec::new(l, w, Polarization::None, l);
        let basis = build_basis(
            vec![
                mode(K1, lambda_nm)?,
                mode(K2, lambda_nm)?,
                mode(K1_BAR, lambda_bar_nm)?,
                mode(K2_BAR, lambda_bar_nm)?,
            ],
            cutoff,
        )?;
        Ok(TwoColorInterferometer {
            lambda_nm,
            lambda_bar_nm,
            basis,
        })
    }

    pub fn basis(&self) -> &Arc<FockBasis> {
        &self.basis
    }

    pub fn lambda_nm(&self) -> f64 {
        self.lambda_nm
    }

    pub fn lambda_bar_nm(&self) -> f64 {
        self.lambda_bar_nm
    }

    pub fn prepare(&self, input: &InputState) -> Result<StateVector> {
        let b = &self.basis;
        match input {
            InputState::SinglePhoton => pure_state(b, &[1, 0, 0, 0]),
            InputState::Fock { occupation } => pure_state(b, &[occupation[0], occupation[1], 0, 0]),
            InputState::Qubit { alpha, beta } => {
                let s10 = pure_state(b, &[1, 0, 0, 0])?;
                let s01 = pure_state(b, &[0, 1, 0, 0])?;
                superpose(&[(complex(*alpha), &s10), (complex(*beta), &s01)])
            }
            InputState::Coherent { gamma } => coherent_state(b, K1, complex(*gamma)),
        }
    }

    pub fn converter_spec(&self, theta: f64, pump_phase: f64) -> ConverterSpec {
        ConverterSpec {
            pairs: vec![
                ConversionPair { ir: K1.into(), uv: K1_BAR.into(), theta, pump_phase: 0.0 },
                ConversionPair { ir: K2.into(), uv: K2_BAR.into(), theta, pump_phase },
            ],
        }
    }

    pub fn converter(&self, theta: f64, pump_phase: f64) -> Result<ElementUnitary> {
        frequency_converter(&self.basis, &self.converter_spec(theta, pump_phase))
    }

    pub fn splitter(&self, a: &str, b: &str) -> Result<ElementUnitary> {
        beam_splitter(&self.basis, a, b, 0.5)
    }

    pub fn arm_phase(&self, phi: f64) -> Result<ElementUnitary> {
        phase_shifter(&self.basis, K2, phi)
    }

    /// Stage elements in application order, around a precomputed converter
    /// (the converter does not depend on Φ, so scans build it once).
    pub fn stage_elements(&self, stages: &Stages, converter: &ElementUnitary) -> Result<Vec<ElementUnitary>> {
        let mut chain = Vec::with_capacity(5);
        if stages.input_splitter {
            chain.push(self.splitter(K1, K2)?);
        }
        chain.push(self.arm_phase(stages.phi)?);
        chain.push(converter.clone());
        if stages.output_splitters {
            chain.push(self.splitter(K1, K2)?);
            chain.push(self.splitter(K1_BAR, K2_BAR)?);
        }
        Ok(chain)
    }

    pub fn network_with(&self, stages: &Stages, converter: &ElementUnitary) -> Result<ElementUnitary> {
        compose(&self.stage_elements(stages, converter)?)
    }

    pub fn network(&self, stages: &Stages) -> Result<ElementUnitary> {
        let conv = self.converter(stages.theta, stages.pump_phase)?;
        self.network_with(stages, &conv)
    }

    /// Propagates the input stage by stage (matrix-vector products only).
    pub fn output_state(&self, input: &InputState, stages: &Stages) -> Result<StateVector> {
        let conv = self.converter(stages.theta, stages.pump_phase)?;
        self.stage_elements(stages, &conv)?
            .iter()
            .try_fold(self.prepare(input)?, |s, e| e.apply(&s))
    }
}

/// Detectors on the four output ports of the closed interferometer.
pub fn output_port_detectors(ir: (f64, f64), uv: (f64, f64)) -> Result<Vec<DetectorSpec>> {
    Ok(vec![
        DetectorSpec::new(D_A, K2, ir.0, ir.1)?,
        DetectorSpec::new(D_B, K1, ir.0, ir.1)?,
        DetectorSpec::new(DBAR_A, K2_BAR, uv.0, uv.1)?,
        DetectorSpec::new(DBAR_B, K1_BAR, uv.0, uv.1)?,
    ])
}

/// Mode labels of the entangled-pair network: path × polarization × colour.
pub fn ebit_mode(path: u8, pol: Polarization, converted: bool) -> String {
    let p = match pol {
        Polarization::H => "H",
        Polarization::V => "V",
        Polarization::None => "",
    };
    if converted {
        format!("k{path}{p}bar")
    } else {
        format!("k{path}{p}")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EbitOutcome {
    pub post_selection_probability: f64,
    pub fidelity: f64,
}

/// Polarization-entangled pair α|HH⟩ + β|VV⟩ on paths `k1`, `k2`, converted
/// by two crossed Type-I slabs.
///
/// Each path/polarization mode pairs with its own UV mode. Type-I
/// conversion emits the orthogonal polarization, so the UV modes carry the
/// flipped polarization tag; logical labels follow the IR photon they came
/// from, and the target state is α|H̄H̄⟩ + β|V̄V̄⟩ in those labels.
#[derive(Clone, Debug)]
pub struct EntangledPairNetwork {
    basis: Arc<FockBasis>,
}

const POLS: [Polarization; 2] = [Polarization::H, Polarization::V];

impl EntangledPairNetwork {
    pub fn new(lambda_nm: f64, lambda_p_nm: f64) -> Result<Self> {
        let lambda_bar = sum_frequency_wavelength(lambda_nm, lambda_p_nm)?;
        let mut modes = Vec::with_capacity(8);
        for converted in [false, true] {
            for path in [1u8, 2] {
                for pol in POLS {
                    let (w, tag) = if converted {
                        let flipped = if pol == Polarization::H { Polarization::V } else { Polarization::H };
                        (lambda_bar, flipped)
                    } else {
                        (lambda_nm, pol)
                    };
                    let label = ebit_mode(path, pol, converted);
                    let path_tag = if converted { format!("k{path}bar") } else { format!("k{path}") };
                    modes.push(ModeSpec::new(label, w, tag, path_tag)?);
                }
            }
        }
        Ok(EntangledPairNetwork {
            basis: build_basis(modes, 2)?,
        })
    }

    pub fn basis(&self) -> &Arc<FockBasis> {
        &self.basis
    }

    fn pair_state(&self, alpha: Complex64, beta: Complex64, converted: bool) -> Result<StateVector> {
        let mut terms = Vec::with_capacity(2);
        for (amp, pol) in [(alpha, Polarization::H), (beta, Polarization::V)] {
            let mut occ = vec![0u32; self.basis.n_modes()];
            for path in [1u8, 2] {
                occ[self.basis.mode_index(&ebit_mode(path, pol, converted))?] = 1;
            }
            terms.push((amp, pure_state(&self.basis, &occ)?));
        }
        superpose(&[(terms[0].0, &terms[0].1), (terms[1].0, &terms[1].1)])
    }

    /// α|H⟩₁|H⟩₂ + β|V⟩₁|V⟩₂ at the input wavelength.
    pub fn input(&self, alpha: Complex64, beta: Complex64) -> Result<StateVector> {
        self.pair_state(alpha, beta, false)
    }

    /// The same amplitudes carried by the up-converted modes.
    pub fn target(&self, alpha: Complex64, beta: Complex64) -> Result<StateVector> {
        self.pair_state(alpha, beta, true)
    }

    /// Converters on all four IR modes; H pairs at `theta_h`, V pairs at `theta_v`.
    pub fn converter(&self, theta_h: f64, theta_v: f64, pump_phase: f64) -> Result<ElementUnitary> {
        let mut pairs = Vec::with_capacity(4);
        for path in [1u8, 2] {
            for (pol, theta) in [(Polarization::H, theta_h), (Polarization::V, theta_v)] {
                pairs.push(ConversionPair {
                    ir: ebit_mode(path, pol, false),
                    uv: ebit_mode(path, pol, true),
                    theta,
                    pump_phase,
                });
            }
        }
        frequency_converter(&self.basis, &ConverterSpec { pairs })
    }

    /// Projects onto "one UV photon on each path, nothing left in the IR".
    /// Returns the success probability and the unnormalized projection.
    pub fn post_select(&self, state: &StateVector) -> Result<(f64, nalgebra::DVector<Complex64>)> {
        let b = &self.basis;
        let uv = |path, pol| b.mode_index(&ebit_mode(path, pol, true));
        let (u1h, u1v, u2h, u2v) = (
            uv(1, Polarization::H)?,
            uv(1, Polarization::V)?,
            uv(2, Polarization::H)?,
            uv(2, Polarization::V)?,
        );
        let mut projected = state.amplitudes().clone();
        for (i, amp) in projected.iter_mut().enumerate() {
            let occ = b.state(i);
            let ir_empty = (0..b.n_modes())
                .filter(|&m| ![u1h, u1v, u2h, u2v].contains(&m))
                .all(|m| occ[m] == 0);
            let keep = ir_empty && occ[u1h] + occ[u1v] == 1 && occ[u2h] + occ[u2v] == 1;
            if !keep {
                *amp = Complex64::new(0.0, 0.0);
            }
        }
        Ok((projected.norm_squared(), projected))
    }

    pub fn run(&self, alpha: Complex64, beta: Complex64, theta_h: f64, theta_v: f64, pump_phase: f64) -> Result<EbitOutcome> {
        let input = self.input(alpha, beta)?;
        let out = self.converter(theta_h, theta_v, pump_phase)?.apply(&input)?;
        let (p, projected) = self.post_select(&out)?;
        if !(p > 1e-24) {
            return Err(Error::EmptyPostSelection(format!(
                "no amplitude survives post-selection on both photons converted (θ_H = {theta_h}, θ_V = {theta_v})"
            )));
        }
        let kept = StateVector::from_amplitudes(&self.basis, projected)?;
        let overlap = inner_product(&self.target(alpha, beta)?, &kept)?;
        Ok(EbitOutcome {
            post_selection_probability: p,
            fidelity: overlap.norm_sqr(),
        })
    }
}
