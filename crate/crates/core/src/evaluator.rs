//! Accuracy oracles and the cost model.
//!
//! [`SyntheticSupernet`] stands in for a weight-sharing super-network: it
//! reports `a * z* + b + eps`, where `z*` is a fixed ground-truth function of
//! the architecture and `eps` is a zero-mean Gaussian field that is constant
//! for one checkpoint and redrawn when the checkpoint advances.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::kendall_tau;
use crate::search_space::{Architecture, SearchSpaceSpec, DEFAULT_CHOICE_LABELS};
use crate::seeds;

/// Something that measures the accuracy of an architecture.
///
/// Repeated calls with unchanged state must return identical values.
pub trait Evaluator: Send + Sync {
    fn evaluate(&self, arch: &Architecture) -> f64;

    /// Advisory wall-clock cost of one call, in seconds.
    fn cost_seconds(&self) -> f64 {
        0.0
    }

    /// Moves to the next checkpoint. No-op for evaluators without one.
    fn advance_checkpoint(&mut self) {}
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthParams {
    pub base: f64,
    /// `L x O` additive utility per layer and choice.
    pub cell_utility: Vec<Vec<f64>>,
    /// Scale of the pairwise interaction terms.
    pub pair_strength: f64,
    pub interaction_seed: u64,
}

impl GroundTruthParams {
    /// Gaussian utilities with standard deviation `spread`; the pair strength
    /// is set so that interactions carry roughly `pair_fraction` of the
    /// variance of the additive part.
    pub fn random(spec: &SearchSpaceSpec, seed: u64, base: f64, spread: f64, pair_fraction: f64) -> Self {
        let l = spec.num_layers;
        let mut rng = seeds::stream(seed, "utility", 0);
        let normal = Normal::new(0.0, spread).expect("finite spread");
        let cell_utility = (0..l)
            .map(|_| (0..spec.choices_per_layer).map(|_| normal.sample(&mut rng)).collect())
            .collect();
        let pairs = (l * l.saturating_sub(1) / 2).max(1) as f64;
        Self {
            base,
            cell_utility,
            pair_strength: spread * (pair_fraction * l as f64 / pairs).sqrt(),
            interaction_seed: seeds::derive_seed(seed, "interaction", 0),
        }
    }
}

/// Precomputed ground-truth function `z*`.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    params: GroundTruthParams,
    layers: usize,
    choices: usize,
    pair_terms: Vec<f64>,
}

impl GroundTruth {
    pub fn new(params: GroundTruthParams) -> Result<Self> {
        let layers = params.cell_utility.len();
        let choices = params.cell_utility.first().map_or(0, Vec::len);
        if layers == 0 || choices == 0 || params.cell_utility.iter().any(|r| r.len() != choices) {
            return Err(Error::InvalidSpec("cell_utility must be a non-empty L x O table".into()));
        }
        let pair_terms = if params.pair_strength != 0.0 {
            let mut rng = seeds::rng_from(params.interaction_seed);
            let count = layers * layers.saturating_sub(1) / 2 * choices * choices;
            (0..count).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
        } else {
            Vec::new()
        };
        Ok(Self {
            params,
            layers,
            choices,
            pair_terms,
        })
    }

    pub fn params(&self) -> &GroundTruthParams {
        &self.params
    }

    /// `clamp(base + sum_l u[l][c_l] + gamma * sum_{l<l'} v[l,l'][c_l, c_l'], 0, 1)`.
    pub fn value(&self, arch: &Architecture) -> f64 {
        let c = arch.choices();
        debug_assert_eq!(c.len(), self.layers);
        let mut z = self.params.base;
        for (row, &choice) in self.params.cell_utility.iter().zip(c) {
            z += row[choice];
        }
        if !self.pair_terms.is_empty() {
            let block = self.choices * self.choices;
            let mut pair = 0usize;
            let mut inter = 0.0;
            for i in 0..self.layers {
                for j in i + 1..self.layers {
                    inter += self.pair_terms[pair * block + c[i] * self.choices + c[j]];
                    pair += 1;
                }
            }
            z += self.params.pair_strength * inter;
        }
        z.clamp(0.0, 1.0)
    }
}

/// Ground-truth accuracy of `arch`.
pub fn ground_truth(arch: &Architecture, truth: &GroundTruth) -> f64 {
    truth.value(arch)
}

#[derive(Debug, Clone)]
pub struct SyntheticSupernet {
    truth: GroundTruth,
    a: f64,
    b: f64,
    sigma: f64,
    checkpoint_seed: u64,
    overrides: BTreeMap<Architecture, f64>,
}

impl SyntheticSupernet {
    pub fn new(truth: GroundTruth, a: f64, b: f64, sigma: f64, checkpoint_seed: u64) -> Result<Self> {
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidSpec(format!("sigma must be non-negative, got {sigma}")));
        }
        Ok(Self {
            truth,
            a,
            b,
            sigma,
            checkpoint_seed,
            overrides: BTreeMap::new(),
        })
    }

    pub fn truth(&self) -> &GroundTruth {
        &self.truth
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn checkpoint_seed(&self) -> u64 {
        self.checkpoint_seed
    }

    pub fn with_sigma(mut self, sigma: f64) -> Self {
        self.sigma = sigma.max(0.0);
        self
    }

    /// Pins the noise of one architecture in the current checkpoint.
    pub fn with_noise_override(mut self, arch: Architecture, eps: f64) -> Self {
        self.overrides.insert(arch, eps);
        self
    }

    /// Standard-normal draw keyed by `(arch, checkpoint)`.
    fn unit_noise(&self, arch: &Architecture) -> f64 {
        let key = seeds::hash_words(
            self.checkpoint_seed,
            arch.choices().iter().map(|&c| c as u64),
        );
        seeds::rng_from(key).sample(StandardNormal)
    }

    pub fn epsilon(&self, arch: &Architecture) -> f64 {
        if let Some(&eps) = self.overrides.get(arch) {
            return eps;
        }
        if self.sigma == 0.0 {
            return 0.0;
        }
        self.sigma * self.unit_noise(arch)
    }

    /// The same super-network one checkpoint later: fresh noise field,
    /// identical truth, `a`, `b`, `sigma`.
    pub fn advanced(&self) -> Self {
        let mut next = self.clone();
        next.advance_checkpoint();
        next
    }
}

impl Evaluator for SyntheticSupernet {
    fn evaluate(&self, arch: &Architecture) -> f64 {
        (self.a * self.truth.value(arch) + self.b + self.epsilon(arch)).clamp(0.0, 1.0)
    }

    fn advance_checkpoint(&mut self) {
        self.checkpoint_seed = seeds::mix64(self.checkpoint_seed ^ 0xC4EC_4B01_u64);
        self.overrides.clear();
    }
}

/// Multiply-add counts of the stem/head and of every (layer, choice) cell.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostModel {
    pub fixed_cost: u64,
    pub cell_cost: Vec<Vec<u64>>,
}

impl CostModel {
    /// Synthetic table: 100M fixed, and per-layer costs that scale with the
    /// expansion ratio and the depthwise kernel area, so that the all-largest
    /// architecture costs about 600M and a typical one about 400M.
    pub fn bundled(spec: &SearchSpaceSpec) -> Self {
        let l = spec.num_layers;
        let o = spec.choices_per_layer;
        let per_layer = 500_000_000f64 / l as f64;
        let factors: Vec<f64> = if o == DEFAULT_CHOICE_LABELS.len() {
            let raw = |k: f64, e: f64| e * (1.0 + k * k / 40.0);
            let max = raw(7.0, 6.0);
            [(3.0, 3.0), (3.0, 6.0), (5.0, 3.0), (5.0, 6.0), (7.0, 3.0), (7.0, 6.0)]
                .iter()
                .map(|&(k, e)| raw(k, e) / max)
                .collect()
        } else {
            (0..o).map(|i| (i + 1) as f64 / o as f64).collect()
        };
        let row: Vec<u64> = factors.iter().map(|f| (per_layer * f).round() as u64).collect();
        Self {
            fixed_cost: 100_000_000,
            cell_cost: vec![row; l],
        }
    }

    pub fn validate(&self, spec: &SearchSpaceSpec) -> Result<()> {
        if self.cell_cost.len() != spec.num_layers
            || self.cell_cost.iter().any(|r| r.len() != spec.choices_per_layer)
        {
            return Err(Error::InvalidSpec(format!(
                "cost table must be {} x {}",
                spec.num_layers, spec.choices_per_layer
            )));
        }
        Ok(())
    }

    pub fn min_cost(&self) -> u64 {
        self.fixed_cost + self.cell_cost.iter().map(|r| r.iter().min().copied().unwrap_or(0)).sum::<u64>()
    }
}

/// Multiply-adds of `arch`: fixed cost plus its cells.
pub fn flops(arch: &Architecture, cost: &CostModel) -> u64 {
    cost.fixed_cost
        + arch
            .choices()
            .iter()
            .zip(&cost.cell_cost)
            .map(|(&c, row)| row[c])
            .sum::<u64>()
}

/// Kendall tau between the rankings of `archs` under the current checkpoint
/// and under the next one.
pub fn checkpoint_consistency(sim: &SyntheticSupernet, archs: &[Architecture]) -> Result<f64> {
    let next = sim.advanced();
    let now: Vec<f64> = archs.iter().map(|a| sim.evaluate(a)).collect();
    let later: Vec<f64> = archs.iter().map(|a| next.evaluate(a)).collect();
    kendall_tau(&now, &later)
}

/// Bisects `sigma` until the two-checkpoint tau over `archs` is within
/// `tolerance` of `target`.
pub fn calibrate_sigma(
    sim: &SyntheticSupernet,
    archs: &[Architecture],
    target: f64,
    tolerance: f64,
) -> Result<f64> {
    if !(0.0 < target && target < 1.0) {
        return Err(Error::InvalidSpec(format!("target tau must lie in (0, 1), got {target}")));
    }
    let tau_at = |sigma: f64| checkpoint_consistency(&sim.clone().with_sigma(sigma), archs);
    let truths: Vec<f64> = archs.iter().map(|a| sim.a * sim.truth.value(a)).collect();
    let mean = truths.iter().sum::<f64>() / truths.len().max(1) as f64;
    let sd = (truths.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / truths.len().max(1) as f64).sqrt();
    if sd == 0.0 {
        return Err(Error::ZeroVariance("ground truth is constant over the calibration set"));
    }

    let (mut lo, mut hi) = (0.0, sd);
    while tau_at(hi)? > target {
        lo = hi;
        hi *= 2.0;
    }
    let mut mid = 0.5 * (lo + hi);
    for _ in 0..60 {
        mid = 0.5 * (lo + hi);
        let tau = tau_at(mid)?;
        if (tau - target).abs() <= tolerance {
            break;
        }
        if tau > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(mid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::search_space::Subspace;

    fn spec(l: usize) -> SearchSpaceSpec {
        SearchSpaceSpec::new(l, 6).unwrap()
    }

    fn flat_truth(l: usize, base: f64) -> GroundTruthParams {
        GroundTruthParams {
            base,
            cell_utility: vec![vec![0.0; 6]; l],
            pair_strength: 0.0,
            interaction_seed: 0,
        }
    }

    fn all_archs(l: usize) -> Vec<Architecture> {
        let sub = Subspace::full(&spec(l)).unwrap();
        (0..sub.node_count() as usize)
            .map(|i| sub.materialize(&sub.assignment_of(i).unwrap()).unwrap())
            .collect()
    }

    #[test]
    fn flat_truth_is_constant() {
        let t = GroundTruth::new(flat_truth(3, 0.8)).unwrap();
        for a in all_archs(3) {
            assert_eq!(ground_truth(&a, &t), 0.8);
        }
    }

    #[test]
    fn utilities_are_additive() {
        let s = spec(4);
        let p = GroundTruthParams::random(&s, 3, 0.7, 0.01, 0.0);
        let mut bumped = p.clone();
        bumped.cell_utility[0][3] += 0.02;
        let (t0, t1) = (GroundTruth::new(p).unwrap(), GroundTruth::new(bumped).unwrap());
        for a in all_archs(4).iter().step_by(7) {
            let d = t1.value(a) - t0.value(a);
            if a.choices()[0] == 3 {
                assert!((d - 0.02).abs() < 1e-12);
            } else {
                assert_eq!(d, 0.0);
            }
        }
    }

    #[test]
    fn separable_argmax_is_per_cell_argmax() {
        let s = spec(4);
        for seed in 0..5 {
            let t = GroundTruth::new(GroundTruthParams::random(&s, seed, 0.7, 0.02, 0.0)).unwrap();
            let brute = all_archs(4)
                .into_iter()
                .max_by(|a, b| t.value(a).total_cmp(&t.value(b)))
                .unwrap();
            let per_cell: Vec<usize> = t
                .params()
                .cell_utility
                .iter()
                .map(|row| (0..6).max_by(|&i, &j| row[i].total_cmp(&row[j])).unwrap())
                .collect();
            assert_eq!(brute.choices(), per_cell.as_slice());
        }
    }

    fn supernet(sigma: f64) -> SyntheticSupernet {
        let s = spec(4);
        let t = GroundTruth::new(GroundTruthParams::random(&s, 1, 0.85, 0.01, 0.1)).unwrap();
        SyntheticSupernet::new(t, 0.95, 0.0025, sigma, 77).unwrap()
    }

    #[test]
    fn noiseless_evaluation_is_affine() {
        let sim = supernet(0.0);
        let archs = all_archs(4);
        for a in &archs {
            let z = sim.truth().value(a);
            assert_eq!(sim.evaluate(a), 0.95 * z + 0.0025);
        }
        let mut by_eval: Vec<usize> = (0..archs.len()).collect();
        let mut by_truth = by_eval.clone();
        by_eval.sort_by(|&i, &j| sim.evaluate(&archs[j]).total_cmp(&sim.evaluate(&archs[i])).then(i.cmp(&j)));
        by_truth.sort_by(|&i, &j| sim.truth().value(&archs[j]).total_cmp(&sim.truth().value(&archs[i])).then(i.cmp(&j)));
        assert_eq!(by_eval, by_truth);
        assert_eq!(sim.advanced().evaluate(&archs[5]), sim.evaluate(&archs[5]));
    }

    #[test]
    fn evaluation_is_deterministic_per_checkpoint() {
        let sim = supernet(0.01);
        let a = Architecture::from_choices(vec![1, 2, 3, 4]);
        assert_eq!(sim.evaluate(&a), sim.evaluate(&a));
        assert_ne!(sim.evaluate(&a), sim.advanced().evaluate(&a));
        assert_eq!(sim.advanced().checkpoint_seed(), sim.advanced().checkpoint_seed());
    }

    #[test]
    fn noise_is_zero_mean() {
        let sim = supernet(0.01);
        let n = 100_000;
        let mut rng = seeds::rng_from(5);
        let mean: f64 = (0..n)
            .map(|_| {
                let c: Vec<usize> = (0..19).map(|_| rng.random_range(0..6)).collect();
                sim.epsilon(&Architecture::from_choices(c))
            })
            .sum::<f64>()
            / n as f64;
        assert!(mean.abs() < 3.0 * 0.01 / (n as f64).sqrt(), "{mean}");
    }

    #[test]
    fn noise_fields_are_independent_across_checkpoints() {
        let sim = supernet(1.0);
        let next = sim.advanced();
        let archs = all_archs(6);
        let archs: Vec<_> = archs.into_iter().step_by(4).take(10_000).collect();
        let x: Vec<f64> = archs.iter().map(|a| sim.epsilon(a)).collect();
        let y: Vec<f64> = archs.iter().map(|a| next.epsilon(a)).collect();
        let r = crate::metrics::regression_score(&x, &y).unwrap().sqrt();
        assert!(r < 0.05, "{r}");
    }

    #[test]
    fn overrides_pin_noise() {
        let a = Architecture::from_choices(vec![0, 0, 0, 0]);
        let sim = supernet(0.01).with_noise_override(a.clone(), 0.05);
        assert_eq!(sim.epsilon(&a), 0.05);
        assert_ne!(sim.advanced().epsilon(&a), 0.05);
    }

    #[test]
    fn flops_examples() {
        let s = spec(19);
        let flat = CostModel {
            fixed_cost: 0,
            cell_cost: vec![vec![100; 6]; 19],
        };
        let a = Architecture::from_choices(vec![2; 19]);
        assert_eq!(flops(&a, &flat), 1_900);

        let bundled = CostModel::bundled(&s);
        bundled.validate(&s).unwrap();
        let max = flops(&Architecture::from_choices(vec![5; 19]), &bundled);
        assert!((590_000_000..=610_000_000).contains(&max), "{max}");
        let mut rng = seeds::rng_from(2);
        let mean = (0..2000)
            .map(|_| {
                let c: Vec<usize> = (0..19).map(|_| rng.random_range(0..6)).collect();
                flops(&Architecture::from_choices(c), &bundled) as f64
            })
            .sum::<f64>()
            / 2000.0;
        assert!((350e6..450e6).contains(&mean), "{mean}");

        let mut raised = bundled.clone();
        raised.cell_cost[4][2] += 1_000;
        for c in 0..6 {
            let a = Architecture::from_choices(vec![c; 19]);
            assert!(flops(&a, &raised) >= flops(&a, &bundled));
        }
    }

    #[test]
    fn calibration_hits_target() {
        let s = spec(6);
        let t = GroundTruth::new(GroundTruthParams::random(&s, 4, 0.85, 0.004, 0.1)).unwrap();
        let sim = SyntheticSupernet::new(t, 0.95, 0.0025, 0.0, 9).unwrap();
        let sub = Subspace::full(&s).unwrap();
        let archs: Vec<_> = sub
            .sample_uniform(3000, 1)
            .unwrap()
            .iter()
            .map(|a| sub.materialize(a).unwrap())
            .collect();
        let sigma = calibrate_sigma(&sim, &archs, 0.547, 0.005).unwrap();
        let tau = checkpoint_consistency(&sim.with_sigma(sigma), &archs).unwrap();
        assert!((tau - 0.547).abs() <= 0.005, "{tau}");
    }
}
