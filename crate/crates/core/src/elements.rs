//! Optical elements as dense unitaries on a truncated Fock basis.
//!
//! Linear elements (beam splitters, phase shifters) are lifted from their
//! single-photon mode transformation by expanding the transformed creation
//! operators. The frequency converter is the exponential of the pairwise
//! conversion Hamiltonian; [`matrix_exponential_oracle`] evaluates the same
//! exponential through an eigendecomposition and serves as ground truth.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{max_abs, ElementUnitary, FockBasis};
use crate::linalg::expm;

const HERMITIAN_TOL: f64 = 1e-12;

/// One (IR, UV) mode pair coupled by the converter.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConversionPair {
    pub ir: String,
    pub uv: String,
    /// Mixing angle; the single-photon conversion probability is sin²θ.
    pub theta: f64,
    /// Pump phase Θ seen by this pair.
    pub pump_phase: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConverterSpec {
    pub pairs: Vec<ConversionPair>,
}

impl ConverterSpec {
    /// All pairs share one mixing angle and one pump phase.
    pub fn uniform(pairs: &[(&str, &str)], theta: f64, pump_phase: f64) -> Self {
        ConverterSpec {
            pairs: pairs
                .iter()
                .map(|(ir, uv)| ConversionPair {
                    ir: (*ir).to_string(),
                    uv: (*uv).to_string(),
                    theta,
                    pump_phase,
                })
                .collect(),
        }
    }

    fn resolve(&self, basis: &FockBasis) -> Result<Vec<(usize, usize)>> {
        let mut seen = std::collections::HashSet::new();
        let mut out = Vec::with_capacity(self.pairs.len());
        for p in &self.pairs {
            if !p.theta.is_finite() || !p.pump_phase.is_finite() {
                return Err(Error::config(format!(
                    "converter pair ({}, {}) has a non-finite angle",
                    p.ir, p.uv
                )));
            }
            for label in [&p.ir, &p.uv] {
                if !seen.insert(label.clone()) {
                    return Err(Error::config(format!(
                        "mode {label:?} appears in more than one converter pair"
                    )));
                }
            }
            out.push((basis.mode_index(&p.ir)?, basis.mode_index(&p.uv)?));
        }
        Ok(out)
    }
}

/// Hermitian generator Σ_j w_j (e^{iΘ_j} ā_j† a_j + e^{−iΘ_j} a_j† ā_j).
///
/// Exponentiated as exp(−iθH) it reproduces the converter at angle θ.
#[derive(Clone, Debug)]
pub struct PairHamiltonian {
    basis: Arc<FockBasis>,
    matrix: DMatrix<Complex64>,
}

impl PairHamiltonian {
    /// Unit-weight generator over `pairs` with a common pump phase.
    pub fn new(basis: &Arc<FockBasis>, pairs: &[(&str, &str)], pump_phase: f64) -> Result<Self> {
        Self::from_converter(basis, &ConverterSpec::uniform(pairs, 1.0, pump_phase))
    }

    /// Generator with each pair weighted by its own θ, so that exp(−iH) is
    /// the converter described by `spec`.
    pub fn from_converter(basis: &Arc<FockBasis>, spec: &ConverterSpec) -> Result<Self> {
        let idx = spec.resolve(basis)?;
        let d = basis.dim();
        let mut h = DMatrix::<Complex64>::zeros(d, d);
        for (p, &(ir, uv)) in spec.pairs.iter().zip(&idx) {
            let coupling = Complex64::from_polar(p.theta, p.pump_phase);
            for col in 0..d {
                let occ = basis.state(col);
                let n_ir = occ[ir];
                if n_ir == 0 {
                    continue;
                }
                let n_uv = occ[uv];
                let mut target = occ.to_vec();
                target[ir] -= 1;
                target[uv] += 1;
                let row = basis
                    .index_of(&target)
                    .expect("pair conversion preserves the total photon number");
                let amp = (n_ir as f64).sqrt() * ((n_uv + 1) as f64).sqrt();
                h[(row, col)] += coupling * amp;
                h[(col, row)] += coupling.conj() * amp;
            }
        }
        Ok(PairHamiltonian {
            basis: Arc::clone(basis),
            matrix: h,
        })
    }

    pub fn from_matrix(basis: &Arc<FockBasis>, matrix: DMatrix<Complex64>) -> Result<Self> {
        if matrix.nrows() != basis.dim() || matrix.ncols() != basis.dim() {
            return Err(Error::domain("Hamiltonian shape does not match the basis"));
        }
        let skew = max_abs(&(&matrix - matrix.adjoint()));
        if !(skew < HERMITIAN_TOL) {
            return Err(Error::domain(format!(
                "Hamiltonian is not Hermitian: max|H − H†| = {skew:e}"
            )));
        }
        Ok(PairHamiltonian {
            basis: Arc::clone(basis),
            matrix,
        })
    }

    pub fn basis(&self) -> &Arc<FockBasis> {
        &self.basis
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }
}

/// Lifts two-mode transformations of creation operators on disjoint mode
/// pairs, a† → m₀₀ a† + m₁₀ b†, b† → m₀₁ a† + m₁₁ b†, to the full Fock basis.
fn lift_pairs(basis: &FockBasis, pairs: &[(usize, usize, [[Complex64; 2]; 2])]) -> DMatrix<Complex64> {
    let d = basis.dim();
    let cutoff = basis.cutoff() as usize;
    let mut fact = vec![1.0f64; cutoff + 1];
    for k in 1..=cutoff {
        fact[k] = fact[k - 1] * k as f64;
    }
    let binom = |n: u32, k: u32| fact[n as usize] / (fact[k as usize] * fact[(n - k) as usize]);

    let mut out = DMatrix::<Complex64>::zeros(d, d);
    for col in 0..d {
        let occ = basis.state(col);
        let mut terms = vec![(occ.to_vec(), Complex64::new(1.0, 0.0))];
        for &(a, b, m) in pairs {
            let (na, nb) = (occ[a], occ[b]);
            let total = na + nb;
            let norm_in = (fact[na as usize] * fact[nb as usize]).sqrt();
            let mut next = Vec::with_capacity(terms.len() * (total as usize + 1));
            for (target, amp) in &terms {
                for i in 0..=na {
                    let from_a = m[0][0].powu(i) * m[1][0].powu(na - i) * binom(na, i);
                    for j in 0..=nb {
                        let from_b = m[0][1].powu(j) * m[1][1].powu(nb - j) * binom(nb, j);
                        let k = i + j;
                        let norm_out = (fact[k as usize] * fact[(total - k) as usize]).sqrt();
                        let mut t = target.clone();
                        t[a] = k;
                        t[b] = total - k;
                        next.push((t, amp * from_a * from_b * (norm_out / norm_in)));
                    }
                }
            }
            terms = next;
        }
        for (target, amp) in terms {
            let row = basis.index_of(&target).expect("linear optics preserves photon number");
            out[(row, col)] += amp;
        }
    }
    out
}

/// Beam splitter with a → √T·a + i√(1−T)·b, b → i√(1−T)·a + √T·b.
pub fn beam_splitter(
    basis: &Arc<FockBasis>,
    mode_a: &str,
    mode_b: &str,
    transmissivity: f64,
) -> Result<ElementUnitary> {
    if !(0.0..=1.0).contains(&transmissivity) {
        return Err(Error::domain(format!(
            "transmissivity must lie in [0, 1], got {transmissivity}"
        )));
    }
    let a = basis.mode_index(mode_a)?;
    let b = basis.mode_index(mode_b)?;
    if a == b {
        return Err(Error::domain("beam splitter needs two distinct modes"));
    }
    let (ma, mb) = (&basis.modes()[a], &basis.modes()[b]);
    if !ma.same_frequency(mb) {
        return Err(Error::domain(format!(
            "beam splitter cannot mix {} nm and {} nm; frequency mixing needs a converter",
            ma.wavelength_nm, mb.wavelength_nm
        )));
    }
    if ma.polarization != mb.polarization {
        return Err(Error::domain("beam splitter modes differ in polarization"));
    }
    let t = Complex64::new(transmissivity.sqrt(), 0.0);
    let r = Complex64::new(0.0, (1.0 - transmissivity).sqrt());
    Ok(ElementUnitary::exact(basis, lift_pairs(basis, &[(a, b, [[t, r], [r, t]])])))
}

/// Multiplies each basis state by e^{i·n·φ}, n the occupation of `mode`.
pub fn phase_shifter(basis: &Arc<FockBasis>, mode: &str, phi: f64) -> Result<ElementUnitary> {
    let m = basis.mode_index(mode)?;
    let diag = DVector::from_iterator(
        basis.dim(),
        basis
            .states()
            .map(|occ| Complex64::from_polar(1.0, occ[m] as f64 * phi)),
    );
    Ok(ElementUnitary::exact(basis, DMatrix::from_diagonal(&diag)))
}

/// Pairwise frequency converter exp(−i Σ_j θ_j H_j).
///
/// On each pair the single-photon block is
/// |1,0⟩ → cosθ|1,0⟩ − i·e^{iΘ}·sinθ|0,1⟩ and
/// |0,1⟩ → −i·e^{−iΘ}·sinθ|1,0⟩ + cosθ|0,1⟩.
/// The generator is quadratic in the mode operators, so the Fock-space
/// unitary is the linear-optics lift of these blocks.
pub fn frequency_converter(basis: &Arc<FockBasis>, spec: &ConverterSpec) -> Result<ElementUnitary> {
    let idx = spec.resolve(basis)?;
    let blocks: Vec<_> = spec
        .pairs
        .iter()
        .zip(&idx)
        .map(|(p, &(ir, uv))| {
            let (s, c) = p.theta.sin_cos();
            let c = Complex64::new(c, 0.0);
            let to_uv = Complex64::new(0.0, -s) * Complex64::from_polar(1.0, p.pump_phase);
            let to_ir = Complex64::new(0.0, -s) * Complex64::from_polar(1.0, -p.pump_phase);
            (ir, uv, [[c, to_ir], [to_uv, c]])
        })
        .collect();
    Ok(ElementUnitary::exact(basis, lift_pairs(basis, &blocks)))
}

/// The same converter by exponentiating the Fock-space generator
/// (scaling and squaring of a Taylor series). Cost grows as dim³.
pub fn frequency_converter_expm(basis: &Arc<FockBasis>, spec: &ConverterSpec) -> Result<ElementUnitary> {
    let h = PairHamiltonian::from_converter(basis, spec)?;
    let generator = h.matrix.map(|z| z * Complex64::new(0.0, -1.0));
    ElementUnitary::new(basis, expm(&generator))
}

/// exp(−iθH) by Hermitian eigendecomposition, H = V·diag(λ)·V†.
pub fn matrix_exponential_oracle(h: &PairHamiltonian, theta: f64) -> Result<ElementUnitary> {
    let skew = max_abs(&(&h.matrix - h.matrix.adjoint()));
    if !(skew < HERMITIAN_TOL) {
        return Err(Error::domain(format!(
            "oracle needs a Hermitian input: max|H − H†| = {skew:e}"
        )));
    }
    let eig = SymmetricEigen::new(h.matrix.clone());
    let phases = DVector::from_iterator(
        eig.eigenvalues.len(),
        eig.eigenvalues.iter().map(|&l| Complex64::from_polar(1.0, -theta * l)),
    );
    let v = &eig.eigenvectors;
    let u = v * DMatrix::from_diagonal(&phases) * v.adjoint();
    ElementUnitary::new(&h.basis, u)
}

/// Product of `elements` in application order (first element acts first).
pub fn compose(elements: &[ElementUnitary]) -> Result<ElementUnitary> {
    let (first, rest) = elements
        .split_first()
        .ok_or_else(|| Error::domain("cannot compose an empty element list"))?;
    rest.iter().try_fold(first.clone(), |acc, e| acc.then(e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{build_basis, pure_state, vacuum, ModeSpec, Polarization};
    use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, FRAC_PI_4, PI};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn two_mode(cutoff: u32) -> Arc<FockBasis> {
        build_basis(
            vec![
                ModeSpec::new("a", 876.1, Polarization::None, "k1").unwrap(),
                ModeSpec::new("b", 876.1, Polarization::None, "k2").unwrap(),
            ],
            cutoff,
        )
        .unwrap()
    }

    fn pair_basis(cutoff: u32) -> Arc<FockBasis> {
        build_basis(
            vec![
                ModeSpec::new("k1", 876.1, Polarization::None, "k1").unwrap(),
                ModeSpec::new("k1bar", 416.8, Polarization::None, "k1bar").unwrap(),
            ],
            cutoff,
        )
        .unwrap()
    }

    #[test]
    fn beam_splitter_examples() {
        let b = two_mode(2);
        let id = beam_splitter(&b, "a", "b", 1.0).unwrap();
        assert!(id.max_abs_diff(&ElementUnitary::identity(&b)).unwrap() < 1e-15);

        let bs = beam_splitter(&b, "a", "b", 0.5).unwrap();
        let out = bs.apply(&pure_state(&b, &[1, 0]).unwrap()).unwrap();
        assert!((out.amplitude(&[1, 0]) - c(FRAC_1_SQRT_2, 0.0)).norm() < 1e-15);
        assert!((out.amplitude(&[0, 1]) - c(0.0, FRAC_1_SQRT_2)).norm() < 1e-15);

        let twice = bs.apply(&out).unwrap();
        assert!((twice.amplitude(&[0, 1]) - c(0.0, 1.0)).norm() < 1e-15);
        assert!(twice.amplitude(&[1, 0]).norm() < 1e-15);
    }

    #[test]
    fn beam_splitter_single_photon_block_is_exact() {
        let b = two_mode(2);
        for &t in &[0.0, 0.2, 0.5, 0.9, 1.0] {
            let bs = beam_splitter(&b, "a", "b", t).unwrap();
            let m = bs.matrix();
            let (i10, i01) = (b.index_of(&[1, 0]).unwrap(), b.index_of(&[0, 1]).unwrap());
            let tt = c(f64::sqrt(t), 0.0);
            let r = c(0.0, f64::sqrt(1.0 - t));
            assert_eq!(m[(i10, i10)], tt);
            assert_eq!(m[(i01, i10)], r);
            assert_eq!(m[(i10, i01)], r);
            assert_eq!(m[(i01, i01)], tt);
        }
    }

    #[test]
    fn hong_ou_mandel_dip() {
        // two photons on a balanced splitter never exit through separate ports
        let b = two_mode(2);
        let bs = beam_splitter(&b, "a", "b", 0.5).unwrap();
        let out = bs.apply(&pure_state(&b, &[1, 1]).unwrap()).unwrap();
        assert!(out.amplitude(&[1, 1]).norm() < 1e-15);
        assert!((out.amplitude(&[2, 0]).norm_sqr() - 0.5).abs() < 1e-14);
    }

    #[test]
    fn beam_splitter_rejects_mixed_wavelengths() {
        let b = pair_basis(1);
        assert!(matches!(beam_splitter(&b, "k1", "k1bar", 0.5), Err(Error::Domain(_))));
        let b = two_mode(1);
        assert!(matches!(beam_splitter(&b, "a", "b", 1.5), Err(Error::Domain(_))));
        assert!(matches!(beam_splitter(&b, "a", "zz", 0.5), Err(Error::Domain(_))));
    }

    #[test]
    fn phase_shifter_examples() {
        let b = two_mode(2);
        let p0 = phase_shifter(&b, "a", 0.0).unwrap();
        assert!(p0.max_abs_diff(&ElementUnitary::identity(&b)).unwrap() < 1e-15);

        let p = phase_shifter(&b, "a", PI).unwrap();
        let one = p.apply(&pure_state(&b, &[1, 0]).unwrap()).unwrap();
        assert!((one.amplitude(&[1, 0]) - c(-1.0, 0.0)).norm() < 1e-15);
        let two = p.apply(&pure_state(&b, &[2, 0]).unwrap()).unwrap();
        assert!((two.amplitude(&[2, 0]) - c(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn converter_examples() {
        let b = pair_basis(2);
        let zero = frequency_converter(&b, &ConverterSpec::uniform(&[("k1", "k1bar")], 0.0, 0.0)).unwrap();
        assert!(zero.max_abs_diff(&ElementUnitary::identity(&b)).unwrap() < 1e-15);

        let full = frequency_converter(&b, &ConverterSpec::uniform(&[("k1", "k1bar")], FRAC_PI_2, 0.0)).unwrap();
        let out = full.apply(&pure_state(&b, &[1, 0]).unwrap()).unwrap();
        assert!((out.amplitude(&[0, 1]) - c(0.0, -1.0)).norm() < 1e-14);
        assert!(out.amplitude(&[1, 0]).norm() < 1e-14);
    }

    #[test]
    fn converter_single_photon_block_with_pump_phase() {
        let b = pair_basis(1);
        let (theta, big_theta) = (0.37, 1.1);
        let u = frequency_converter(&b, &ConverterSpec::uniform(&[("k1", "k1bar")], theta, big_theta)).unwrap();
        let ir = u.apply(&pure_state(&b, &[1, 0]).unwrap()).unwrap();
        let uv = u.apply(&pure_state(&b, &[0, 1]).unwrap()).unwrap();
        let mi = c(0.0, -1.0);
        assert!((ir.amplitude(&[1, 0]) - theta.cos()).norm() < 1e-14);
        assert!((ir.amplitude(&[0, 1]) - mi * Complex64::from_polar(theta.sin(), big_theta)).norm() < 1e-14);
        assert!((uv.amplitude(&[1, 0]) - mi * Complex64::from_polar(theta.sin(), -big_theta)).norm() < 1e-14);
        assert!((uv.amplitude(&[0, 1]) - theta.cos()).norm() < 1e-14);
    }

    #[test]
    fn converter_two_photon_splitting_matches_oracle() {
        let b = pair_basis(2);
        let theta = FRAC_PI_4;
        let h = PairHamiltonian::new(&b, &[("k1", "k1bar")], 0.0).unwrap();
        let oracle = matrix_exponential_oracle(&h, theta).unwrap();
        let input = pure_state(&b, &[2, 0]).unwrap();
        let p_oracle = oracle.apply(&input).unwrap().amplitude(&[1, 1]).norm_sqr();
        let expect = 2.0 * theta.cos().powi(2) * theta.sin().powi(2);
        assert!((p_oracle - expect).abs() < 1e-12);
        assert!((p_oracle - 0.5).abs() < 1e-12);

        let u = frequency_converter(&b, &ConverterSpec::uniform(&[("k1", "k1bar")], theta, 0.0)).unwrap();
        let p = u.apply(&input).unwrap().amplitude(&[1, 1]).norm_sqr();
        assert!((p - p_oracle).abs() < 1e-12);
    }

    #[test]
    fn lift_agrees_with_exponential() {
        let b = build_basis(
            vec![
                ModeSpec::new("k1", 876.1, Polarization::None, "k1").unwrap(),
                ModeSpec::new("k2", 876.1, Polarization::None, "k2").unwrap(),
                ModeSpec::new("k1bar", 416.8, Polarization::None, "k1bar").unwrap(),
                ModeSpec::new("k2bar", 416.8, Polarization::None, "k2bar").unwrap(),
            ],
            3,
        )
        .unwrap();
        let spec = ConverterSpec {
            pairs: vec![
                ConversionPair { ir: "k1".into(), uv: "k1bar".into(), theta: 0.9, pump_phase: 0.3 },
                ConversionPair { ir: "k2".into(), uv: "k2bar".into(), theta: -2.1, pump_phase: 1.7 },
            ],
        };
        let e = frequency_converter(&b, &spec).unwrap();
        let l = frequency_converter_expm(&b, &spec).unwrap();
        assert!(e.max_abs_diff(&l).unwrap() < 1e-12);
        assert!(e.unitarity_defect() < 1e-12);
    }

    #[test]
    fn oracle_basics() {
        let b = pair_basis(2);
        let h = PairHamiltonian::new(&b, &[("k1", "k1bar")], 0.4).unwrap();
        let id = matrix_exponential_oracle(&h, 0.0).unwrap();
        assert!(id.max_abs_diff(&ElementUnitary::identity(&b)).unwrap() < 1e-12);

        let fwd = matrix_exponential_oracle(&h, 0.83).unwrap();
        let back = matrix_exponential_oracle(&h, -0.83).unwrap();
        let round = compose(&[fwd, back]).unwrap();
        assert!(round.max_abs_diff(&ElementUnitary::identity(&b)).unwrap() < 1e-10);

        let mut m = h.matrix().clone();
        m[(0, 1)] += c(0.5, 0.0);
        assert!(matches!(PairHamiltonian::from_matrix(&b, m), Err(Error::Domain(_))));
    }

    #[test]
    fn overlapping_pairs_rejected() {
        let b = pair_basis(1);
        let spec = ConverterSpec::uniform(&[("k1", "k1bar"), ("k1", "k1bar")], 0.3, 0.0);
        assert!(matches!(frequency_converter(&b, &spec), Err(Error::Config(_))));
    }

    #[test]
    fn conversion_probability_is_sin_squared() {
        let b = pair_basis(1);
        let input = pure_state(&b, &[1, 0]).unwrap();
        for k in 0..50 {
            let theta = -PI + 2.0 * PI * k as f64 / 49.0 * 1.5;
            let u = frequency_converter(&b, &ConverterSpec::uniform(&[("k1", "k1bar")], theta, 0.0)).unwrap();
            let p = u.apply(&input).unwrap().amplitude(&[0, 1]).norm_sqr();
            assert!((p - theta.sin().powi(2)).abs() < 1e-13, "theta={theta}");
        }
        let u = frequency_converter(&b, &ConverterSpec::uniform(&[("k1", "k1bar")], PI, 0.0)).unwrap();
        let m = u.matrix();
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                if i != j {
                    assert!(m[(i, j)].norm() < 1e-13);
                } else {
                    let occ: u32 = b.state(i).iter().sum();
                    let sign = if occ.is_multiple_of(2) { 1.0 } else { -1.0 };
                    assert!((m[(i, i)] - sign).norm() < 1e-13);
                }
            }
        }
    }

    #[test]
    fn vacuum_is_fixed() {
        let b = pair_basis(2);
        let u = frequency_converter(&b, &ConverterSpec::uniform(&[("k1", "k1bar")], 1.3, 0.5)).unwrap();
        let out = u.apply(&vacuum(&b)).unwrap();
        assert_eq!(out.amplitude(&[0, 0]), c(1.0, 0.0));
        assert_eq!(out.amplitudes().iter().filter(|a| a.norm() > 0.0).count(), 1);
    }

    #[test]
    fn compose_examples() {
        let b = two_mode(2);
        let id = ElementUnitary::identity(&b);
        let r = compose(&[id.clone(), id.clone()]).unwrap();
        assert!(r.max_abs_diff(&id).unwrap() == 0.0);

        let bs = beam_splitter(&b, "a", "b", 0.3).unwrap();
        let r = compose(&[bs.clone(), bs.adjoint()]).unwrap();
        assert!(r.max_abs_diff(&id).unwrap() < 1e-12);

        assert!(compose(&[]).is_err());

        // sequential applies equal one composed apply
        let ph = phase_shifter(&b, "b", 0.77).unwrap();
        let s = pure_state(&b, &[1, 1]).unwrap();
        let seq = ph.apply(&bs.apply(&s).unwrap()).unwrap();
        let once = compose(&[bs, ph]).unwrap().apply(&s).unwrap();
        assert!((seq.amplitudes() - once.amplitudes()).norm() < 1e-12);
    }
}
