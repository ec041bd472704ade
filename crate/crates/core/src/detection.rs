//! Threshold photodetection, coincidence counting and g²(0) estimation.
//!
//! A trial draws one joint photon-number outcome from the state's Born
//! distribution; every detector then clicks with probability
//! 1 − (1 − qe)ⁿ for the n photons on its mode, or through a dark count.
//! Trials are grouped in fixed-size chunks and chunk `c` of stream `s` draws
//! from ChaCha stream `(s << 32) | c` of the master seed, so counts do not
//! depend on how many threads run the chunks.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::StateVector;

pub const TRIAL_CHUNK: u64 = 8192;

const MAX_DETECTORS: usize = 64;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectorSpec {
    pub label: String,
    pub mode: String,
    pub efficiency: f64,
    pub dark_count_probability: f64,
}

impl DetectorSpec {
    pub fn new(label: impl Into<String>, mode: impl Into<String>, efficiency: f64, dark: f64) -> Result<Self> {
        let d = DetectorSpec {
            label: label.into(),
            mode: mode.into(),
            efficiency,
            dark_count_probability: dark,
        };
        d.validate()?;
        Ok(d)
    }

    /// Unit efficiency, no dark counts.
    pub fn ideal(label: impl Into<String>, mode: impl Into<String>) -> Self {
        DetectorSpec {
            label: label.into(),
            mode: mode.into(),
            efficiency: 1.0,
            dark_count_probability: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.efficiency) {
            return Err(Error::config(format!(
                "detector {}: efficiency must lie in [0, 1], got {}",
                self.label, self.efficiency
            )));
        }
        if !(0.0..1.0).contains(&self.dark_count_probability) {
            return Err(Error::config(format!(
                "detector {}: dark-count probability must lie in [0, 1), got {}",
                self.label, self.dark_count_probability
            )));
        }
        if self.label.is_empty() || self.label.contains('&') {
            return Err(Error::config(format!(
                "detector label {:?} must be non-empty and must not contain '&'",
                self.label
            )));
        }
        Ok(())
    }
}

/// Bit set of fired detectors, indexed by detector position.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct FiredSet(u64);

impl FiredSet {
    pub fn empty() -> Self {
        FiredSet(0)
    }

    pub fn insert(&mut self, i: usize) {
        self.0 |= 1 << i;
    }

    pub fn contains(&self, i: usize) -> bool {
        self.0 & (1 << i) != 0
    }

    pub fn is_empty(&self) -> bool {
        self.0 == 0
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        (0..MAX_DETECTORS).filter(move |&i| self.contains(i))
    }
}

/// Precomputed sampler for one state and one detector set.
#[derive(Clone, Debug)]
pub struct DetectionModel {
    detectors: Vec<DetectorSpec>,
    cumulative: Vec<f64>,
    /// Photons seen by each detector, per basis state (row-major, state × detector).
    photons: Vec<u32>,
}

impl DetectionModel {
    pub fn new(state: &StateVector, detectors: &[DetectorSpec]) -> Result<Self> {
        if detectors.len() > MAX_DETECTORS {
            return Err(Error::config(format!("at most {MAX_DETECTORS} detectors are supported")));
        }
        let basis = state.basis();
        let mut modes = HashSet::new();
        let mut labels = HashSet::new();
        let mut mode_idx = Vec::with_capacity(detectors.len());
        for d in detectors {
            d.validate()?;
            if !labels.insert(d.label.as_str()) {
                return Err(Error::config(format!("duplicate detector label {:?}", d.label)));
            }
            if !modes.insert(d.mode.as_str()) {
                return Err(Error::config(format!("more than one detector on mode {:?}", d.mode)));
            }
            mode_idx.push(basis.mode_index(&d.mode).map_err(|_| {
                Error::config(format!("detector {} watches unknown mode {:?}", d.label, d.mode))
            })?);
        }

        let mut cumulative = Vec::with_capacity(basis.dim());
        let mut acc = 0.0;
        for p in state.probabilities() {
            acc += p;
            cumulative.push(acc);
        }
        let photons = basis
            .states()
            .flat_map(|occ| mode_idx.iter().map(move |&m| occ[m]))
            .collect();
        Ok(DetectionModel {
            detectors: detectors.to_vec(),
            cumulative,
            photons,
        })
    }

    pub fn detectors(&self) -> &[DetectorSpec] {
        &self.detectors
    }

    pub fn labels(&self) -> Vec<String> {
        self.detectors.iter().map(|d| d.label.clone()).collect()
    }

    fn click_probability(&self, state_idx: usize, det: usize) -> f64 {
        let d = &self.detectors[det];
        let n = self.photons[state_idx * self.detectors.len() + det];
        1.0 - (1.0 - d.efficiency).powi(n as i32)
    }

    /// One trial. Always consumes 1 + 2·(number of detectors) uniforms.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> FiredSet {
        let total = *self.cumulative.last().expect("basis is never empty");
        let u = rng.gen::<f64>() * total;
        let idx = self
            .cumulative
            .partition_point(|&c| c <= u)
            .min(self.cumulative.len() - 1);
        let mut fired = FiredSet::empty();
        for (k, d) in self.detectors.iter().enumerate() {
            let photo = rng.gen::<f64>() < self.click_probability(idx, k);
            let dark = rng.gen::<f64>() < d.dark_count_probability;
            if photo || dark {
                fired.insert(k);
            }
        }
        fired
    }

    /// Exact per-detector click probability.
    pub fn firing_probabilities(&self) -> Vec<f64> {
        let mut prev = 0.0;
        let weights: Vec<f64> = self
            .cumulative
            .iter()
            .map(|&c| {
                let w = c - prev;
                prev = c;
                w
            })
            .collect();
        (0..self.detectors.len())
            .map(|k| {
                let dark = self.detectors[k].dark_count_probability;
                weights
                    .iter()
                    .enumerate()
                    .map(|(i, w)| w * (1.0 - (1.0 - self.click_probability(i, k)) * (1.0 - dark)))
                    .sum()
            })
            .collect()
    }

    /// Exact probability that detectors `a` and `b` both click in one trial.
    pub fn joint_firing_probability(&self, a: usize, b: usize) -> f64 {
        let (da, db) = (
            self.detectors[a].dark_count_probability,
            self.detectors[b].dark_count_probability,
        );
        let mut prev = 0.0;
        let mut total = 0.0;
        for (i, &c) in self.cumulative.iter().enumerate() {
            let w = c - prev;
            prev = c;
            let pa = 1.0 - (1.0 - self.click_probability(i, a)) * (1.0 - da);
            let pb = 1.0 - (1.0 - self.click_probability(i, b)) * (1.0 - db);
            total += w * pa * pb;
        }
        total
    }

    pub fn position(&self, label: &str) -> Result<usize> {
        self.detectors
            .iter()
            .position(|d| d.label == label)
            .ok_or_else(|| Error::config(format!("unknown detector label {label:?}")))
    }
}

/// Samples one trial and returns the labels of the detectors that fired.
pub fn sample_trial<R: Rng + ?Sized>(
    state: &StateVector,
    detectors: &[DetectorSpec],
    rng: &mut R,
) -> Result<BTreeSet<String>> {
    let model = DetectionModel::new(state, detectors)?;
    let fired = model.sample(rng);
    Ok(fired.iter().map(|i| detectors[i].label.clone()).collect())
}

pub fn pair_key(a: &str, b: &str) -> String {
    format!("{a}&{b}")
}

/// Singles and pairwise coincidences over `n_trials` trials.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountSummary {
    pub n_trials: u64,
    pub singles: BTreeMap<String, u64>,
    /// Keyed by `"A&B"`.
    pub coincidences: BTreeMap<String, u64>,
}

impl CountSummary {
    pub fn single(&self, label: &str) -> Result<u64> {
        self.singles
            .get(label)
            .copied()
            .ok_or_else(|| Error::config(format!("no singles recorded for {label:?}")))
    }

    pub fn coincidence(&self, a: &str, b: &str) -> Result<u64> {
        self.coincidences
            .get(&pair_key(a, b))
            .or_else(|| self.coincidences.get(&pair_key(b, a)))
            .copied()
            .ok_or_else(|| Error::config(format!("no coincidence pair ({a}, {b}) recorded")))
    }

    /// Flat (name, count) record: `N`, each detector label, each `A&B` pair.
    pub fn flat_record(&self) -> Vec<(String, u64)> {
        let mut out = vec![("N".to_string(), self.n_trials)];
        out.extend(self.singles.iter().map(|(k, v)| (k.clone(), *v)));
        out.extend(self.coincidences.iter().map(|(k, v)| (k.clone(), *v)));
        out
    }
}

/// Streaming tally used by the samplers; merging is commutative.
#[derive(Clone, Debug)]
struct CountAccumulator {
    n: u64,
    singles: Vec<u64>,
    coincidences: Vec<u64>,
}

impl CountAccumulator {
    fn new(n_detectors: usize, n_pairs: usize) -> Self {
        CountAccumulator {
            n: 0,
            singles: vec![0; n_detectors],
            coincidences: vec![0; n_pairs],
        }
    }

    fn record(&mut self, fired: FiredSet, pairs: &[(usize, usize)]) {
        self.n += 1;
        for i in fired.iter() {
            self.singles[i] += 1;
        }
        for (c, &(a, b)) in self.coincidences.iter_mut().zip(pairs) {
            if fired.contains(a) && fired.contains(b) {
                *c += 1;
            }
        }
    }

    fn merge(mut self, other: Self) -> Self {
        self.n += other.n;
        for (a, b) in self.singles.iter_mut().zip(other.singles) {
            *a += b;
        }
        for (a, b) in self.coincidences.iter_mut().zip(other.coincidences) {
            *a += b;
        }
        self
    }

    fn finish(self, labels: &[String], pairs: &[(usize, usize)]) -> CountSummary {
        CountSummary {
            n_trials: self.n,
            singles: labels.iter().cloned().zip(self.singles).collect(),
            coincidences: pairs
                .iter()
                .map(|&(a, b)| pair_key(&labels[a], &labels[b]))
                .zip(self.coincidences)
                .collect(),
        }
    }
}

fn resolve_pairs(labels: &[String], pairs: &[(String, String)]) -> Result<Vec<(usize, usize)>> {
    let find = |l: &str| {
        labels
            .iter()
            .position(|x| x == l)
            .ok_or_else(|| Error::config(format!("pair refers to unknown detector {l:?}")))
    };
    pairs.iter().map(|(a, b)| Ok((find(a)?, find(b)?))).collect()
}

/// Tallies recorded trial outcomes.
pub fn accumulate(labels: &[String], outcomes: &[FiredSet], pairs: &[(String, String)]) -> Result<CountSummary> {
    let idx = resolve_pairs(labels, pairs)?;
    let mut acc = CountAccumulator::new(labels.len(), idx.len());
    for &o in outcomes {
        if o.iter().any(|i| i >= labels.len()) {
            return Err(Error::config("outcome names a detector outside the label list"));
        }
        acc.record(o, &idx);
    }
    Ok(acc.finish(labels, &idx))
}

/// Runs `n_trials` independent trials on substream `stream` of `seed`.
pub fn run_trials(
    model: &DetectionModel,
    pairs: &[(String, String)],
    n_trials: u64,
    seed: u64,
    stream: u64,
) -> Result<CountSummary> {
    if stream >= 1 << 32 {
        return Err(Error::config("sampling stream index must fit in 32 bits"));
    }
    let labels = model.labels();
    let idx = resolve_pairs(&labels, pairs)?;
    let n_chunks = n_trials.div_ceil(TRIAL_CHUNK);
    let empty = || CountAccumulator::new(labels.len(), idx.len());
    let acc = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream((stream << 32) | c);
            let len = TRIAL_CHUNK.min(n_trials - c * TRIAL_CHUNK);
            let mut acc = empty();
            for _ in 0..len {
                acc.record(model.sample(&mut rng), &idx);
            }
            acc
        })
        .reduce(empty, CountAccumulator::merge);
    Ok(acc.finish(&labels, &idx))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct G2Estimate {
    pub n_trials: u64,
    pub n_a: u64,
    pub n_b: u64,
    pub n_c: u64,
    /// N_C·N/(N_A·N_B).
    pub point: f64,
    /// max(N_C, 1)·N/(N_A·N_B).
    pub upper_bound: f64,
}

impl G2Estimate {
    pub fn from_counts(n_trials: u64, n_a: u64, n_b: u64, n_c: u64) -> Result<Self> {
        if n_trials == 0 || n_a == 0 || n_b == 0 {
            return Err(Error::UndefinedEstimate(format!(
                "g2 needs N > 0 and non-zero singles (N = {n_trials}, N_A = {n_a}, N_B = {n_b})"
            )));
        }
        if n_a > n_trials || n_b > n_trials || n_c > n_a.min(n_b) {
            return Err(Error::domain(format!(
                "inconsistent counts: N = {n_trials}, N_A = {n_a}, N_B = {n_b}, N_C = {n_c}"
            )));
        }
        let scale = n_trials as f64 / (n_a as f64 * n_b as f64);
        Ok(G2Estimate {
            n_trials,
            n_a,
            n_b,
            n_c,
            point: n_c as f64 * scale,
            upper_bound: n_c.max(1) as f64 * scale,
        })
    }
}

/// Second-order correlation of one detector pair; the same estimator serves
/// same-wavelength pairs and IR/UV pairs across the converter.
pub fn g2_estimate(summary: &CountSummary, pair: (&str, &str)) -> Result<G2Estimate> {
    let n_a = summary.single(pair.0)?;
    let n_b = summary.single(pair.1)?;
    let n_c = summary.coincidence(pair.0, pair.1)?;
    G2Estimate::from_counts(summary.n_trials, n_a, n_b, n_c)
}

/// A published count set and the bound quoted alongside it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PublishedCounts {
    pub label: &'static str,
    pub n_trials: u64,
    pub n_a: u64,
    pub n_b: u64,
    pub n_c: u64,
    pub quoted_bound: f64,
}

pub const PUBLISHED_COUNTS: [PublishedCounts; 3] = [
    PublishedCounts {
        label: "linear_ir",
        n_trials: 100_000,
        n_a: 1015,
        n_b: 1223,
        n_c: 0,
        quoted_bound: 8.05e-2,
    },
    PublishedCounts {
        label: "linear_uv",
        n_trials: 100_000,
        n_a: 810,
        n_b: 830,
        n_c: 0,
        quoted_bound: 14.8e-2,
    },
    PublishedCounts {
        label: "nonlinear_pair1",
        n_trials: 100_000,
        n_a: 2636,
        n_b: 713,
        n_c: 0,
        quoted_bound: 5.3e-2,
    },
];

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{build_basis, pure_state, vacuum, ModeSpec, Polarization};
    use num_complex::Complex64;
    use std::sync::Arc;

    fn basis() -> Arc<crate::fock::FockBasis> {
        build_basis(
            vec![
                ModeSpec::new("a", 800.0, Polarization::None, "a").unwrap(),
                ModeSpec::new("b", 800.0, Polarization::None, "b").unwrap(),
            ],
            2,
        )
        .unwrap()
    }

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(11)
    }

    #[test]
    fn vacuum_never_fires() {
        let b = basis();
        let dets = [DetectorSpec::ideal("A", "a"), DetectorSpec::ideal("B", "b")];
        let mut r = rng();
        for _ in 0..1000 {
            assert!(sample_trial(&vacuum(&b), &dets, &mut r).unwrap().is_empty());
        }
    }

    #[test]
    fn unit_efficiency_always_fires() {
        let b = basis();
        let dets = [DetectorSpec::ideal("A", "a")];
        let s = pure_state(&b, &[1, 0]).unwrap();
        let mut r = rng();
        for _ in 0..1000 {
            let f = sample_trial(&s, &dets, &mut r).unwrap();
            assert!(f.contains("A") && f.len() == 1);
        }
    }

    #[test]
    fn partial_efficiency_fraction() {
        let b = basis();
        let dets = [DetectorSpec::new("A", "a", 0.3, 0.0).unwrap()];
        let s = pure_state(&b, &[1, 0]).unwrap();
        let model = DetectionModel::new(&s, &dets).unwrap();
        let c = run_trials(&model, &[], 100_000, 5, 0).unwrap();
        let frac = c.single("A").unwrap() as f64 / 1e5;
        assert!((frac - 0.3).abs() < 0.005, "{frac}");
    }

    #[test]
    fn dark_counts_add_clicks() {
        let b = basis();
        let dets = [DetectorSpec::new("A", "a", 1.0, 0.1).unwrap()];
        let model = DetectionModel::new(&vacuum(&b), &dets).unwrap();
        assert!((model.firing_probabilities()[0] - 0.1).abs() < 1e-15);
        let c = run_trials(&model, &[], 100_000, 9, 0).unwrap();
        let frac = c.single("A").unwrap() as f64 / 1e5;
        // 3σ binomial band
        assert!((frac - 0.1).abs() < 3.0 * (0.09f64 / 1e5).sqrt(), "{frac}");
    }

    #[test]
    fn detector_validation() {
        let b = basis();
        let s = vacuum(&b);
        let dup_mode = [DetectorSpec::ideal("A", "a"), DetectorSpec::ideal("B", "a")];
        assert!(matches!(DetectionModel::new(&s, &dup_mode), Err(Error::Config(_))));
        let dup_label = [DetectorSpec::ideal("A", "a"), DetectorSpec::ideal("A", "b")];
        assert!(matches!(DetectionModel::new(&s, &dup_label), Err(Error::Config(_))));
        assert!(DetectorSpec::new("A", "a", 1.2, 0.0).is_err());
        assert!(DetectorSpec::new("A", "a", 0.5, 1.0).is_err());
        assert!(DetectorSpec::new("A&B", "a", 0.5, 0.0).is_err());
    }

    #[test]
    fn accumulate_examples() {
        let labels = vec!["A".to_string(), "B".to_string()];
        let pairs = vec![("A".to_string(), "B".to_string())];
        let c = accumulate(&labels, &[], &pairs).unwrap();
        assert_eq!(c.n_trials, 0);
        assert!(c.singles.values().all(|&v| v == 0));
        assert_eq!(c.coincidence("A", "B").unwrap(), 0);

        let mut only_a = FiredSet::empty();
        only_a.insert(0);
        let c = accumulate(&labels, &vec![only_a; 50], &pairs).unwrap();
        assert_eq!(c.single("A").unwrap(), 50);
        assert_eq!(c.coincidence("A", "B").unwrap(), 0);

        let bad = vec![("A".to_string(), "Z".to_string())];
        assert!(matches!(accumulate(&labels, &[], &bad), Err(Error::Config(_))));
    }

    #[test]
    fn independent_coins_coincide_a_quarter_of_the_time() {
        let labels = vec!["A".to_string(), "B".to_string()];
        let pairs = vec![("A".to_string(), "B".to_string())];
        let mut r = rng();
        let outcomes: Vec<FiredSet> = (0..100_000)
            .map(|_| {
                let mut f = FiredSet::empty();
                if r.gen::<bool>() {
                    f.insert(0);
                }
                if r.gen::<bool>() {
                    f.insert(1);
                }
                f
            })
            .collect();
        let c = accumulate(&labels, &outcomes, &pairs).unwrap();
        let frac = c.coincidence("A", "B").unwrap() as f64 / 1e5;
        let sigma = (0.25f64 * 0.75 / 1e5).sqrt();
        assert!((frac - 0.25).abs() < 3.0 * sigma, "{frac}");
    }

    #[test]
    fn published_bounds() {
        for p in PUBLISHED_COUNTS {
            let g = G2Estimate::from_counts(p.n_trials, p.n_a, p.n_b, p.n_c).unwrap();
            assert_eq!(g.point, 0.0);
            let rel = (g.upper_bound - p.quoted_bound).abs() / p.quoted_bound;
            assert!(rel < 0.01, "{}: {} vs {}", p.label, g.upper_bound, p.quoted_bound);
        }
    }

    #[test]
    fn g2_errors() {
        assert!(matches!(G2Estimate::from_counts(0, 1, 1, 0), Err(Error::UndefinedEstimate(_))));
        assert!(matches!(G2Estimate::from_counts(10, 0, 1, 0), Err(Error::UndefinedEstimate(_))));
        assert!(matches!(G2Estimate::from_counts(10, 2, 2, 3), Err(Error::Domain(_))));
        let g = G2Estimate::from_counts(100, 10, 20, 2).unwrap();
        assert!((g.point - 1.0).abs() < 1e-15);
        assert_eq!(g.point, g.upper_bound);
    }

    #[test]
    fn counts_independent_of_thread_count() {
        let b = basis();
        let a = Complex64::new(0.5f64.sqrt(), 0.0);
        let s = crate::fock::superpose(&[
            (a, &pure_state(&b, &[1, 0]).unwrap()),
            (a, &pure_state(&b, &[1, 1]).unwrap()),
        ])
        .unwrap();
        let dets = [
            DetectorSpec::new("A", "a", 0.6, 0.01).unwrap(),
            DetectorSpec::new("B", "b", 0.4, 0.02).unwrap(),
        ];
        let model = DetectionModel::new(&s, &dets).unwrap();
        let pairs = vec![("A".to_string(), "B".to_string())];
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| run_trials(&model, &pairs, 50_000, 77, 3).unwrap())
        };
        assert_eq!(run(1), run(4));
        assert_ne!(run(1), run_trials(&model, &pairs, 50_000, 78, 3).unwrap());
    }

    #[test]
    fn joint_probability_matches_sampling() {
        let b = basis();
        let s = pure_state(&b, &[1, 1]).unwrap();
        let dets = [
            DetectorSpec::new("A", "a", 0.5, 0.0).unwrap(),
            DetectorSpec::new("B", "b", 0.5, 0.0).unwrap(),
        ];
        let model = DetectionModel::new(&s, &dets).unwrap();
        assert!((model.joint_firing_probability(0, 1) - 0.25).abs() < 1e-15);
        let pairs = vec![("A".to_string(), "B".to_string())];
        let c = run_trials(&model, &pairs, 100_000, 1, 0).unwrap();
        let frac = c.coincidence("A", "B").unwrap() as f64 / 1e5;
        assert!((frac - 0.25).abs() < 3.0 * (0.25f64 * 0.75 / 1e5).sqrt());
    }
}
