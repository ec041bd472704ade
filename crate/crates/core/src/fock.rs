//! Truncated multimode Fock space.
//!
//! A [`FockBasis`] enumerates every occupation tuple whose total photon
//! number does not exceed a cutoff. States are graded by total photon number
//! and, within one grade, ordered with the first mode's occupation
//! descending, so the two-mode cutoff-2 basis reads `00, 10, 01, 20, 11, 02`.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Norm below which a superposition is treated as having cancelled out.
const ZERO_NORM: f64 = 1e-12;

/// Tolerance on ‖M†M − I‖_max for every constructed unitary.
pub const UNITARITY_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Polarization {
    H,
    V,
    None,
}

/// One optical mode: a wavelength, a polarization tag and a path tag.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModeSpec {
    pub label: String,
    pub wavelength_nm: f64,
    pub polarization: Polarization,
    pub path: String,
}

impl ModeSpec {
    pub fn new(
        label: impl Into<String>,
        wavelength_nm: f64,
        polarization: Polarization,
        path: impl Into<String>,
    ) -> Result<Self> {
        let label = label.into();
        if !(wavelength_nm.is_finite() && wavelength_nm > 0.0) {
            return Err(Error::domain(format!(
                "mode {label}: wavelength must be positive, got {wavelength_nm}"
            )));
        }
        Ok(ModeSpec {
            label,
            wavelength_nm,
            polarization,
            path: path.into(),
        })
    }

    /// Same wavelength to within relative 1e-12.
    pub fn same_frequency(&self, other: &ModeSpec) -> bool {
        let scale = self.wavelength_nm.abs().max(other.wavelength_nm.abs());
        (self.wavelength_nm - other.wavelength_nm).abs() <= 1e-12 * scale
    }
}

/// Ordered set of modes with unique labels.
#[derive(Clone, Debug)]
pub struct ModeRegistry {
    modes: Vec<ModeSpec>,
    index: HashMap<String, usize>,
}

impl ModeRegistry {
    pub fn new(modes: Vec<ModeSpec>) -> Result<Self> {
        let mut index = HashMap::with_capacity(modes.len());
        for (i, m) in modes.iter().enumerate() {
            if index.insert(m.label.clone(), i).is_some() {
                return Err(Error::config(format!("duplicate mode label {:?}", m.label)));
            }
        }
        Ok(ModeRegistry { modes, index })
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn modes(&self) -> &[ModeSpec] {
        &self.modes
    }

    pub fn position(&self, label: &str) -> Option<usize> {
        self.index.get(label).copied()
    }

    pub fn get(&self, label: &str) -> Option<&ModeSpec> {
        self.position(label).map(|i| &self.modes[i])
    }
}

impl PartialEq for ModeRegistry {
    fn eq(&self, other: &Self) -> bool {
        self.modes == other.modes
    }
}

#[derive(Debug)]
pub struct FockBasis {
    registry: ModeRegistry,
    cutoff: u32,
    states: Vec<Box<[u32]>>,
    lookup: HashMap<Box<[u32]>, usize>,
}

impl PartialEq for FockBasis {
    fn eq(&self, other: &Self) -> bool {
        self.cutoff == other.cutoff && self.registry == other.registry
    }
}

/// Enumerates all occupation tuples over `modes` with total photon number
/// at most `max_total_photons`.
pub fn build_basis(modes: Vec<ModeSpec>, max_total_photons: u32) -> Result<Arc<FockBasis>> {
    if modes.is_empty() {
        return Err(Error::config("a Fock basis needs at least one mode"));
    }
    let registry = ModeRegistry::new(modes)?;
    let n_modes = registry.len();

    let mut states = Vec::new();
    let mut current = vec![0u32; n_modes];
    for total in 0..=max_total_photons {
        compositions(0, total, &mut current, &mut states);
    }
    let lookup = states
        .iter()
        .enumerate()
        .map(|(i, s)| (s.clone(), i))
        .collect();

    Ok(Arc::new(FockBasis {
        registry,
        cutoff: max_total_photons,
        states,
        lookup,
    }))
}

fn compositions(pos: usize, remaining: u32, current: &mut [u32], out: &mut Vec<Box<[u32]>>) {
    if pos + 1 == current.len() {
        current[pos] = remaining;
        out.push(current.to_vec().into_boxed_slice());
        return;
    }
    for k in (0..=remaining).rev() {
        current[pos] = k;
        compositions(pos + 1, remaining - k, current, out);
    }
}

impl FockBasis {
    pub fn dim(&self) -> usize {
        self.states.len()
    }

    pub fn cutoff(&self) -> u32 {
        self.cutoff
    }

    pub fn modes(&self) -> &[ModeSpec] {
        self.registry.modes()
    }

    pub fn n_modes(&self) -> usize {
        self.registry.len()
    }

    pub fn mode(&self, label: &str) -> Result<&ModeSpec> {
        self.registry
            .get(label)
            .ok_or_else(|| Error::domain(format!("mode {label:?} is not in the basis")))
    }

    pub fn mode_index(&self, label: &str) -> Result<usize> {
        self.registry
            .position(label)
            .ok_or_else(|| Error::domain(format!("mode {label:?} is not in the basis")))
    }

    /// Occupation tuple of basis state `i`.
    pub fn state(&self, i: usize) -> &[u32] {
        &self.states[i]
    }

    pub fn states(&self) -> impl Iterator<Item = &[u32]> {
        self.states.iter().map(|s| &s[..])
    }

    pub fn index_of(&self, occupation: &[u32]) -> Option<usize> {
        self.lookup.get(occupation).copied()
    }

    fn check_occupation(&self, occupation: &[u32]) -> Result<usize> {
        if occupation.len() != self.n_modes() {
            return Err(Error::domain(format!(
                "occupation has {} entries, basis has {} modes",
                occupation.len(),
                self.n_modes()
            )));
        }
        self.index_of(occupation).ok_or_else(|| {
            Error::domain(format!(
                "occupation {occupation:?} exceeds the photon cutoff {}",
                self.cutoff
            ))
        })
    }
}

pub(crate) fn same_basis(a: &Arc<FockBasis>, b: &Arc<FockBasis>) -> bool {
    Arc::ptr_eq(a, b) || **a == **b
}

fn ensure_same_basis(a: &Arc<FockBasis>, b: &Arc<FockBasis>) -> Result<()> {
    if same_basis(a, b) {
        Ok(())
    } else {
        Err(Error::domain("operands live on different Fock bases"))
    }
}

/// Unit-norm pure state on a truncated basis.
#[derive(Clone, Debug)]
pub struct StateVector {
    basis: Arc<FockBasis>,
    amplitudes: DVector<Complex64>,
}

impl StateVector {
    /// Normalizes `amplitudes`; fails when they cancel to zero.
    pub fn from_amplitudes(basis: &Arc<FockBasis>, amplitudes: DVector<Complex64>) -> Result<Self> {
        if amplitudes.len() != basis.dim() {
            return Err(Error::domain(format!(
                "amplitude vector has length {}, basis dimension is {}",
                amplitudes.len(),
                basis.dim()
            )));
        }
        let norm = amplitudes.norm();
        if !(norm > ZERO_NORM) {
            return Err(Error::DegenerateInput(
                "superposition has zero norm".to_string(),
            ));
        }
        Ok(StateVector {
            basis: Arc::clone(basis),
            amplitudes: amplitudes.unscale(norm),
        })
    }

    pub fn basis(&self) -> &Arc<FockBasis> {
        &self.basis
    }

    pub fn amplitudes(&self) -> &DVector<Complex64> {
        &self.amplitudes
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.norm()
    }

    /// Amplitude on one occupation tuple (zero if outside the cutoff).
    pub fn amplitude(&self, occupation: &[u32]) -> Complex64 {
        self.basis
            .index_of(occupation)
            .map(|i| self.amplitudes[i])
            .unwrap_or_default()
    }

    /// |amplitude|² per basis state.
    pub fn probabilities(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }

    pub fn mean_occupation(&self, mode: &str) -> Result<f64> {
        let m = self.basis.mode_index(mode)?;
        Ok(self
            .amplitudes
            .iter()
            .enumerate()
            .map(|(i, a)| a.norm_sqr() * self.basis.state(i)[m] as f64)
            .sum())
    }
}

pub fn pure_state(basis: &Arc<FockBasis>, occupation: &[u32]) -> Result<StateVector> {
    let idx = basis.check_occupation(occupation)?;
    let mut amplitudes = DVector::zeros(basis.dim());
    amplitudes[idx] = Complex64::new(1.0, 0.0);
    Ok(StateVector {
        basis: Arc::clone(basis),
        amplitudes,
    })
}

pub fn vacuum(basis: &Arc<FockBasis>) -> StateVector {
    let zeros = vec![0; basis.n_modes()];
    pure_state(basis, &zeros).expect("vacuum is always inside the basis")
}

/// Normalized linear combination of states sharing one basis.
pub fn superpose(terms: &[(Complex64, &StateVector)]) -> Result<StateVector> {
    let (_, first) = terms
        .first()
        .ok_or_else(|| Error::DegenerateInput("empty superposition".to_string()))?;
    let basis = first.basis();
    let mut acc = DVector::zeros(basis.dim());
    for (c, s) in terms {
        ensure_same_basis(basis, s.basis())?;
        acc.axpy(*c, &s.amplitudes, Complex64::new(1.0, 0.0));
    }
    StateVector::from_amplitudes(basis, acc)
}

/// ⟨a|b⟩, conjugate-linear in `a`.
pub fn inner_product(a: &StateVector, b: &StateVector) -> Result<Complex64> {
    ensure_same_basis(a.basis(), b.basis())?;
    Ok(a.amplitudes.dotc(&b.amplitudes))
}

/// Coherent state e^{−|γ|²/2} Σ γⁿ/√n! |n⟩ on one mode, truncated to the
/// cutoff and renormalized; all other modes in vacuum.
pub fn coherent_state(basis: &Arc<FockBasis>, mode: &str, gamma: Complex64) -> Result<StateVector> {
    let m = basis.mode_index(mode)?;
    let mut amplitudes = DVector::zeros(basis.dim());
    let mut occ = vec![0u32; basis.n_modes()];
    let mut term = Complex64::new((-gamma.norm_sqr() / 2.0).exp(), 0.0);
    for n in 0..=basis.cutoff() {
        if n > 0 {
            term = term * gamma / (n as f64).sqrt();
        }
        occ[m] = n;
        let idx = basis.index_of(&occ).expect("single-mode occupation within cutoff");
        amplitudes[idx] = term;
    }
    StateVector::from_amplitudes(basis, amplitudes)
}

/// Marginal photon-number distribution of one mode.
pub fn mode_occupation_distribution(s: &StateVector, mode: &str) -> Result<BTreeMap<u32, f64>> {
    let m = s.basis.mode_index(mode)?;
    let mut dist = BTreeMap::new();
    for (i, a) in s.amplitudes.iter().enumerate() {
        *dist.entry(s.basis.state(i)[m]).or_insert(0.0) += a.norm_sqr();
    }
    Ok(dist)
}

/// Dense unitary acting on a [`FockBasis`].
#[derive(Clone, Debug)]
pub struct ElementUnitary {
    basis: Arc<FockBasis>,
    matrix: DMatrix<Complex64>,
}

impl ElementUnitary {
    /// Wraps `matrix`, rejecting anything that is not unitary to [`UNITARITY_TOL`].
    pub fn new(basis: &Arc<FockBasis>, matrix: DMatrix<Complex64>) -> Result<Self> {
        let d = basis.dim();
        if matrix.nrows() != d || matrix.ncols() != d {
            return Err(Error::domain(format!(
                "matrix is {}x{}, basis dimension is {d}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        let defect = unitarity_defect(&matrix);
        if !(defect < UNITARITY_TOL) {
            return Err(Error::domain(format!(
                "matrix is not unitary: max|M†M − I| = {defect:e}"
            )));
        }
        Ok(ElementUnitary {
            basis: Arc::clone(basis),
            matrix,
        })
    }

    /// Skips the O(dim³) unitarity check; for matrices unitary by construction.
    pub(crate) fn exact(basis: &Arc<FockBasis>, matrix: DMatrix<Complex64>) -> Self {
        debug_assert_eq!(matrix.nrows(), basis.dim());
        ElementUnitary {
            basis: Arc::clone(basis),
            matrix,
        }
    }

    pub fn identity(basis: &Arc<FockBasis>) -> Self {
        ElementUnitary {
            basis: Arc::clone(basis),
            matrix: DMatrix::identity(basis.dim(), basis.dim()),
        }
    }

    pub fn basis(&self) -> &Arc<FockBasis> {
        &self.basis
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn adjoint(&self) -> Self {
        ElementUnitary {
            basis: Arc::clone(&self.basis),
            matrix: self.matrix.adjoint(),
        }
    }

    pub fn unitarity_defect(&self) -> f64 {
        unitarity_defect(&self.matrix)
    }

    /// Largest entrywise difference to another unitary on the same basis.
    pub fn max_abs_diff(&self, other: &ElementUnitary) -> Result<f64> {
        ensure_same_basis(&self.basis, &other.basis)?;
        Ok(max_abs(&(&self.matrix - &other.matrix)))
    }

    pub fn apply(&self, s: &StateVector) -> Result<StateVector> {
        ensure_same_basis(&self.basis, s.basis())?;
        Ok(StateVector {
            basis: Arc::clone(&self.basis),
            amplitudes: &self.matrix * &s.amplitudes,
        })
    }

    /// `next · self`: apply `self` first, then `next`.
    pub(crate) fn then(&self, next: &ElementUnitary) -> Result<ElementUnitary> {
        ensure_same_basis(&self.basis, &next.basis)?;
        Ok(ElementUnitary {
            basis: Arc::clone(&self.basis),
            matrix: &next.matrix * &self.matrix,
        })
    }
}

pub(crate) fn max_abs(m: &DMatrix<Complex64>) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub(crate) fn unitarity_defect(m: &DMatrix<Complex64>) -> f64 {
    let n = m.nrows();
    max_abs(&(m.adjoint() * m - DMatrix::<Complex64>::identity(n, n)))
}

impl fmt::Display for StateVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (i, a) in self.amplitudes.iter().enumerate() {
            if a.norm() < 1e-12 {
                continue;
            }
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            let occ: Vec<String> = self.basis.state(i).iter().map(|n| n.to_string()).collect();
            write!(f, "({:.6}{:+.6}i)|{}⟩", a.re, a.im, occ.join(","))?;
        }
        if first {
            write!(f, "0")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_1_SQRT_2, PI};

    fn modes(n: usize) -> Vec<ModeSpec> {
        (0..n)
            .map(|i| ModeSpec::new(format!("k{}", i + 1), 876.1, Polarization::None, format!("k{}", i + 1)).unwrap())
            .collect()
    }

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn basis_enumeration() {
        let b = build_basis(modes(2), 1).unwrap();
        let states: Vec<Vec<u32>> = b.states().map(|s| s.to_vec()).collect();
        assert_eq!(states, vec![vec![0, 0], vec![1, 0], vec![0, 1]]);

        assert_eq!(build_basis(modes(4), 1).unwrap().dim(), 5);

        let b = build_basis(modes(2), 2).unwrap();
        let states: Vec<Vec<u32>> = b.states().map(|s| s.to_vec()).collect();
        assert_eq!(
            states,
            vec![vec![0, 0], vec![1, 0], vec![0, 1], vec![2, 0], vec![1, 1], vec![0, 2]]
        );
    }

    #[test]
    fn basis_dimension_is_binomial() {
        // C(m + n, n) states with at most n photons in m modes
        for m in 1..6usize {
            for n in 0..5u32 {
                let dim = build_basis(modes(m), n).unwrap().dim();
                let mut expect = 1usize;
                for k in 1..=n as usize {
                    expect = expect * (m + k) / k;
                }
                assert_eq!(dim, expect, "m={m} n={n}");
            }
        }
    }

    #[test]
    fn basis_is_deterministic() {
        let a = build_basis(modes(4), 3).unwrap();
        let b = build_basis(modes(4), 3).unwrap();
        assert!(a.states().eq(b.states()));
        assert_eq!(*a, *b);
    }

    #[test]
    fn duplicate_label_is_config_error() {
        let mut m = modes(2);
        m[1].label = "k1".into();
        assert!(matches!(build_basis(m, 1), Err(Error::Config(_))));
        assert!(matches!(build_basis(vec![], 1), Err(Error::Config(_))));
    }

    #[test]
    fn mode_rejects_bad_wavelength() {
        assert!(ModeSpec::new("x", 0.0, Polarization::H, "p").is_err());
        assert!(ModeSpec::new("x", f64::NAN, Polarization::H, "p").is_err());
    }

    #[test]
    fn pure_states() {
        let b = build_basis(modes(2), 1).unwrap();
        let s = pure_state(&b, &[1, 0]).unwrap();
        assert_eq!(s.amplitudes()[1], c(1.0, 0.0));
        let v = pure_state(&b, &[0, 0]).unwrap();
        assert_eq!(v.amplitudes()[0], c(1.0, 0.0));
        assert!(matches!(pure_state(&b, &[2, 0]), Err(Error::Domain(_))));
        assert!(matches!(pure_state(&b, &[1]), Err(Error::Domain(_))));
    }

    #[test]
    fn superposition_and_inner_products() {
        let b = build_basis(modes(2), 1).unwrap();
        let s10 = pure_state(&b, &[1, 0]).unwrap();
        let s01 = pure_state(&b, &[0, 1]).unwrap();
        let a = c(FRAC_1_SQRT_2, 0.0);
        let q = superpose(&[(a, &s10), (a, &s01)]).unwrap();
        assert!((q.norm() - 1.0).abs() < 1e-15);
        assert!((q.amplitude(&[1, 0]) - a).norm() < 1e-15);

        let r = superpose(&[(c(0.3, 0.0), &s10)]).unwrap();
        assert_eq!(r.amplitude(&[1, 0]), c(1.0, 0.0));

        assert!(matches!(
            superpose(&[(c(1.0, 0.0), &s10), (c(-1.0, 0.0), &s10)]),
            Err(Error::DegenerateInput(_))
        ));

        assert!((inner_product(&q, &q).unwrap() - c(1.0, 0.0)).norm() < 1e-15);
        assert_eq!(inner_product(&s10, &s01).unwrap(), c(0.0, 0.0));

        // ⟨qubit(0)|qubit(π)⟩ = ½(1 + e^{iπ}) = 0
        let q_pi = superpose(&[(a, &s10), (a * Complex64::from_polar(1.0, PI), &s01)]).unwrap();
        assert!(inner_product(&q, &q_pi).unwrap().norm() < 1e-15);
    }

    #[test]
    fn relative_phase_survives_normalization() {
        let b = build_basis(modes(2), 1).unwrap();
        let s10 = pure_state(&b, &[1, 0]).unwrap();
        let s01 = pure_state(&b, &[0, 1]).unwrap();
        let phi = 0.731;
        let q = superpose(&[(c(2.0, 0.0), &s10), (Complex64::from_polar(2.0, phi), &s01)]).unwrap();
        let ratio = q.amplitude(&[0, 1]) / q.amplitude(&[1, 0]);
        assert!((ratio.arg() - phi).abs() < 1e-15);
    }

    #[test]
    fn basis_mismatch_is_domain_error() {
        let b1 = build_basis(modes(2), 1).unwrap();
        let b2 = build_basis(modes(2), 2).unwrap();
        let s1 = pure_state(&b1, &[1, 0]).unwrap();
        let s2 = pure_state(&b2, &[1, 0]).unwrap();
        assert!(matches!(inner_product(&s1, &s2), Err(Error::Domain(_))));
        assert!(matches!(
            ElementUnitary::identity(&b1).apply(&s2),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn occupation_distribution() {
        let b = build_basis(modes(2), 1).unwrap();
        let s10 = pure_state(&b, &[1, 0]).unwrap();
        let d = mode_occupation_distribution(&s10, "k1").unwrap();
        assert_eq!(d.get(&1), Some(&1.0));
        let s01 = pure_state(&b, &[0, 1]).unwrap();
        let a = c(FRAC_1_SQRT_2, 0.0);
        let q = superpose(&[(a, &s10), (a, &s01)]).unwrap();
        let d = mode_occupation_distribution(&q, "k1").unwrap();
        assert!((d[&0] - 0.5).abs() < 1e-15 && (d[&1] - 0.5).abs() < 1e-15);
        assert!(matches!(
            mode_occupation_distribution(&q, "k9"),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn coherent_state_amplitudes() {
        let b = build_basis(modes(2), 4).unwrap();
        let g = c(0.3, 0.1);
        let s = coherent_state(&b, "k1", g).unwrap();
        // ratios of successive amplitudes are γ/√n regardless of renormalization
        for n in 1..=4u32 {
            let r = s.amplitude(&[n, 0]) / s.amplitude(&[n - 1, 0]);
            assert!((r - g / (n as f64).sqrt()).norm() < 1e-14);
        }
        assert!((s.norm() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn non_unitary_matrix_rejected() {
        let b = build_basis(modes(2), 1).unwrap();
        let m = DMatrix::from_element(3, 3, c(1.0, 0.0));
        assert!(matches!(ElementUnitary::new(&b, m), Err(Error::Domain(_))));
        let id = ElementUnitary::identity(&b);
        let s = pure_state(&b, &[0, 1]).unwrap();
        let out = id.apply(&s).unwrap();
        assert_eq!(out.amplitudes(), s.amplitudes());
    }
}
