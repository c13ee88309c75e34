//! Round-based search: sample, fit the GCN, re-verify the top of its ranking,
//! and carry the best candidates forward as a super-cell.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::arch_graph::{build_graph, ArchGraph, Sample, SimilarityMode, DEFAULT_NODE_CAP};
use crate::error::{Error, Result};
use crate::evaluator::{flops, CostModel, Evaluator};
use crate::gcn::{self, GcnConfig, GcnModel};
use crate::metrics::{kendall_tau, regression_score};
use crate::report::{arch_text, fixed6, fixed6_opt};
use crate::search_space::{make_segment_plan, Architecture, SearchSpaceSpec, Subspace, SuperCell};
use crate::seeds::derive_seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchConfig {
    pub m_samples: usize,
    pub train_split: usize,
    pub top_pool: usize,
    pub k_preserve: usize,
    /// Segment sizes, in layer order.
    pub plan: Vec<usize>,
    pub similarity: SimilarityMode,
    pub gcn: GcnConfig,
    pub seed: u64,
    /// Multiply-add cap applied to the final selection.
    pub constraint_budget: Option<u64>,
    pub advance_checkpoint: bool,
    pub node_cap: usize,
    /// Store wall-clock seconds in reports. Off keeps reports reproducible.
    pub record_timings: bool,
    /// Starting architecture; `None` uses the default initial choice everywhere.
    #[serde(skip)]
    pub initial: Option<Architecture>,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            m_samples: 2000,
            train_split: 1800,
            top_pool: 100,
            k_preserve: 6,
            plan: vec![7, 6, 6],
            similarity: SimilarityMode::default(),
            gcn: GcnConfig::default(),
            seed: 0,
            constraint_budget: None,
            advance_checkpoint: false,
            node_cap: DEFAULT_NODE_CAP,
            record_timings: false,
            initial: None,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.m_samples < 2 {
            return Err(Error::InvalidSpec("m_samples must be at least 2".into()));
        }
        if self.train_split == 0 || self.train_split >= self.m_samples {
            return Err(Error::InvalidSpec(format!(
                "train_split must lie in [1, m_samples), got {} of {}",
                self.train_split, self.m_samples
            )));
        }
        if self.k_preserve == 0 || self.k_preserve > self.top_pool {
            return Err(Error::InvalidSpec(format!(
                "need 1 <= k_preserve <= top_pool, got {} and {}",
                self.k_preserve, self.top_pool
            )));
        }
        self.similarity.validate()?;
        self.gcn.validate()
    }

    /// Sample and training counts for a subspace of `nodes` architectures.
    fn split_for(&self, nodes: usize) -> (usize, usize) {
        let m = self.m_samples.min(nodes);
        if m == self.m_samples {
            return (m, self.train_split);
        }
        let train = (m * self.train_split / self.m_samples).clamp(1, m.saturating_sub(1).max(1));
        (m, train)
    }
}

/// One architecture of a subspace with its evaluated accuracy.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub node: usize,
    pub arch: Architecture,
    pub accuracy: f64,
}

/// Report form of a candidate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scored {
    pub node: usize,
    #[serde(with = "arch_text")]
    pub architecture: Architecture,
    #[serde(with = "fixed6")]
    pub accuracy: f64,
    #[serde(with = "fixed6_opt", default, skip_serializing_if = "Option::is_none")]
    pub predicted: Option<f64>,
}

impl Scored {
    fn new(c: &Candidate, predicted: Option<f64>) -> Self {
        Self {
            node: c.node,
            architecture: c.arch.clone(),
            accuracy: c.accuracy,
            predicted,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundReport {
    pub round: usize,
    pub free_positions: Vec<usize>,
    pub super_cell_positions: Vec<usize>,
    pub node_count: usize,
    pub samples: usize,
    pub train_count: usize,
    pub validation_count: usize,
    #[serde(with = "fixed6_opt")]
    pub tau_val: Option<f64>,
    #[serde(with = "fixed6_opt")]
    pub reg_score_val: Option<f64>,
    #[serde(with = "fixed6")]
    pub final_train_loss: f64,
    pub best_sampled: Scored,
    /// First entry of the GCN ranking, re-evaluated.
    pub gcn_top1: Scored,
    pub best_selected: Scored,
    pub preserved: Vec<Scored>,
    #[serde(with = "fixed6_opt", default, skip_serializing_if = "Option::is_none")]
    pub wall_seconds: Option<f64>,
}

/// Everything a round produces.
#[derive(Debug, Clone)]
pub struct RoundOutcome {
    pub preserved: Vec<Candidate>,
    pub report: RoundReport,
    pub graph: ArchGraph,
    pub model: GcnModel,
    pub predictions: Vec<f64>,
    pub losses: Vec<f64>,
}

/// Node indices ordered by descending score, ties to the lower index.
pub fn rank_desc(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order
}

fn evaluate_nodes<E: Evaluator + ?Sized>(
    subspace: &Subspace,
    nodes: &[usize],
    evaluator: &E,
) -> Result<Vec<Candidate>> {
    nodes
        .iter()
        .map(|&node| {
            let arch = subspace.materialize(&subspace.assignment_of(node)?)?;
            let accuracy = evaluator.evaluate(&arch);
            Ok(Candidate { node, arch, accuracy })
        })
        .collect()
}

fn sort_candidates(cands: &mut [Candidate]) {
    cands.sort_by(|a, b| b.accuracy.total_cmp(&a.accuracy).then(a.node.cmp(&b.node)));
}

/// Evaluates every candidate once and returns the best.
pub fn reverify<E: Evaluator + ?Sized>(candidates: &[Candidate], evaluator: &E) -> Result<Candidate> {
    let mut evaluated: Vec<Candidate> = candidates
        .iter()
        .map(|c| Candidate {
            accuracy: evaluator.evaluate(&c.arch),
            ..c.clone()
        })
        .collect();
    sort_candidates(&mut evaluated);
    evaluated.into_iter().next().ok_or(Error::EmptyCandidates)
}

fn held_out_stat(f: fn(&[f64], &[f64]) -> Result<f64>, pred: &[f64], target: &[f64]) -> Option<f64> {
    f(pred, target).ok()
}

/// One search round over `subspace`.
pub fn run_round<E: Evaluator + ?Sized>(
    subspace: &Subspace,
    evaluator: &E,
    config: &SearchConfig,
    round: usize,
) -> Result<RoundOutcome> {
    config.validate()?;
    let start = Instant::now();
    if subspace.node_count() > config.node_cap as u128 {
        return Err(Error::NodeCapExceeded {
            nodes: subspace.node_count(),
            cap: config.node_cap,
        });
    }
    let n = subspace.node_count() as usize;
    let (m, train_count) = config.split_for(n);

    let nodes = subspace.sample_nodes(m, derive_seed(config.seed, "sample", round as u64))?;
    let sampled = evaluate_nodes(subspace, &nodes, evaluator)?;

    let samples: Vec<Sample> = sampled
        .iter()
        .map(|c| Ok((subspace.assignment_of(c.node)?, c.accuracy)))
        .collect::<Result<_>>()?;
    let mut graph = build_graph(subspace, &config.similarity, Some(&samples), config.node_cap)?;
    graph.normalize();

    let labels: Vec<(usize, f64)> = sampled[..train_count].iter().map(|c| (c.node, c.accuracy)).collect();
    let gcn_config = GcnConfig {
        seed: derive_seed(config.seed, "gcn-init", round as u64),
        ..config.gcn.clone()
    };
    let training = gcn::train(&graph, &labels, &gcn_config)?;
    let predictions = gcn::predict(&graph, &training.model)?;

    let val = &sampled[train_count..];
    let val_pred: Vec<f64> = val.iter().map(|c| predictions[c.node]).collect();
    let val_acc: Vec<f64> = val.iter().map(|c| c.accuracy).collect();

    let best_sampled = sampled
        .iter()
        .min_by(|a, b| b.accuracy.total_cmp(&a.accuracy).then(a.node.cmp(&b.node)))
        .cloned()
        .ok_or(Error::EmptyCandidates)?;

    let pool_size = config.top_pool.min(n);
    let k = config.k_preserve.min(pool_size);
    let ranking = rank_desc(&predictions);
    let mut pool = evaluate_nodes(subspace, &ranking[..pool_size], evaluator)?;
    let gcn_top1 = pool[0].clone();
    sort_candidates(&mut pool);
    pool.truncate(k);

    let scored = |c: &Candidate| Scored::new(c, Some(predictions[c.node]));
    let report = RoundReport {
        round,
        free_positions: subspace.free_positions().to_vec(),
        super_cell_positions: subspace
            .super_cells()
            .iter()
            .flat_map(|c| c.positions().iter().copied())
            .collect(),
        node_count: n,
        samples: m,
        train_count,
        validation_count: m - train_count,
        tau_val: held_out_stat(kendall_tau, &val_pred, &val_acc),
        reg_score_val: held_out_stat(regression_score, &val_pred, &val_acc),
        final_train_loss: training.losses.last().copied().unwrap_or(f64::NAN),
        best_sampled: Scored::new(&best_sampled, Some(predictions[best_sampled.node])),
        gcn_top1: scored(&gcn_top1),
        best_selected: scored(&pool[0]),
        preserved: pool.iter().map(scored).collect(),
        wall_seconds: config.record_timings.then(|| start.elapsed().as_secs_f64()),
    };
    Ok(RoundOutcome {
        preserved: pool,
        report,
        graph,
        model: training.model,
        predictions,
        losses: training.losses,
    })
}

/// Best re-evaluated architecture among the `top_pool` highest-predicted
/// nodes whose cost fits `budget`.
pub fn constraint_select_ranked<E: Evaluator + ?Sized>(
    graph: &ArchGraph,
    predictions: &[f64],
    cost_model: &CostModel,
    budget: u64,
    evaluator: &E,
    top_pool: usize,
) -> Result<Candidate> {
    let subspace = graph.subspace();
    if predictions.len() != graph.num_nodes() {
        return Err(Error::LengthMismatch {
            left: predictions.len(),
            right: graph.num_nodes(),
        });
    }
    let mut min_cost = u64::MAX;
    let mut survivors = Vec::new();
    for node in rank_desc(predictions) {
        let arch = subspace.materialize(&subspace.assignment_of(node)?)?;
        let cost = flops(&arch, cost_model);
        min_cost = min_cost.min(cost);
        if cost <= budget && survivors.len() < top_pool {
            survivors.push(Candidate { node, arch, accuracy: f64::NAN });
        }
    }
    if survivors.is_empty() {
        return Err(Error::NoFeasibleArchitecture { budget, min_cost });
    }
    reverify(&survivors, evaluator)
}

pub fn constraint_select<E: Evaluator + ?Sized>(
    graph: &ArchGraph,
    model: &GcnModel,
    cost_model: &CostModel,
    budget: u64,
    evaluator: &E,
    top_pool: usize,
) -> Result<Candidate> {
    let predictions = gcn::predict(graph, model)?;
    constraint_select_ranked(graph, &predictions, cost_model, budget, evaluator, top_pool)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    #[serde(with = "arch_text")]
    pub architecture: Architecture,
    #[serde(with = "fixed6")]
    pub accuracy: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flops: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<u64>,
    #[serde(with = "crate::report::fixed6_vec")]
    pub tau_val: Vec<Option<f64>>,
    pub rounds: Vec<RoundReport>,
}

/// Runs every segment of the plan in order.
///
/// `observe` sees each round's full outcome before the next round starts.
pub fn run_search_with<E, F>(
    spec: &SearchSpaceSpec,
    evaluator: &mut E,
    config: &SearchConfig,
    cost_model: Option<&CostModel>,
    mut observe: F,
) -> Result<SearchResult>
where
    E: Evaluator + ?Sized,
    F: FnMut(&RoundOutcome) -> Result<()>,
{
    config.validate()?;
    let plan = make_segment_plan(spec, &config.plan)?;
    let mut current = match &config.initial {
        Some(a) => {
            a.check(spec)?;
            a.clone()
        }
        None => spec.default_initial(),
    };
    if let (Some(_), None) = (config.constraint_budget, cost_model) {
        return Err(Error::InvalidSpec("constraint_budget needs a cost model".into()));
    }

    let mut prior: Vec<usize> = Vec::new();
    let mut preserved: Vec<Candidate> = Vec::new();
    let mut rounds = Vec::with_capacity(plan.len());
    let mut final_pick = None;
    for (t, segment) in plan.segments().iter().enumerate() {
        if t > 0 && config.advance_checkpoint {
            evaluator.advance_checkpoint();
        }
        let step = || -> Result<(RoundOutcome, Candidate)> {
            let super_cells = if prior.is_empty() {
                Vec::new()
            } else {
                let candidates = preserved
                    .iter()
                    .map(|c| prior.iter().map(|&p| c.arch.choices()[p]).collect())
                    .collect();
                vec![SuperCell::new(prior.clone(), candidates)?]
            };
            let subspace = Subspace::around(spec, &current, segment, super_cells)?;
            let outcome = run_round(&subspace, &*evaluator, config, t)?;
            let pick = match (config.constraint_budget, cost_model) {
                (Some(budget), Some(costs)) if t + 1 == plan.len() => constraint_select_ranked(
                    &outcome.graph,
                    &outcome.predictions,
                    costs,
                    budget,
                    &*evaluator,
                    config.top_pool,
                )?,
                _ => outcome.preserved[0].clone(),
            };
            Ok((outcome, pick))
        };
        let (outcome, pick) = step().map_err(|e| e.in_round(t))?;
        observe(&outcome).map_err(|e| e.in_round(t))?;
        current = pick.arch.clone();
        prior.extend(segment);
        prior.sort_unstable();
        preserved = outcome.preserved;
        rounds.push(outcome.report);
        final_pick = Some(pick);
    }

    let pick = final_pick.ok_or_else(|| Error::InvalidSpec("empty segment plan".into()))?;
    Ok(SearchResult {
        flops: cost_model.map(|c| flops(&pick.arch, c)),
        budget: config.constraint_budget,
        architecture: pick.arch,
        accuracy: pick.accuracy,
        tau_val: rounds.iter().map(|r| r.tau_val).collect(),
        rounds,
    })
}

pub fn run_search<E: Evaluator + ?Sized>(
    spec: &SearchSpaceSpec,
    evaluator: &mut E,
    config: &SearchConfig,
    cost_model: Option<&CostModel>,
) -> Result<SearchResult> {
    run_search_with(spec, evaluator, config, cost_model, |_| Ok(()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluator::{GroundTruth, GroundTruthParams, SyntheticSupernet};

    fn tiny_gcn() -> GcnConfig {
        GcnConfig {
            hidden_dims: vec![16],
            epochs: 60,
            ..GcnConfig::default()
        }
    }

    fn supernet(spec: &SearchSpaceSpec, seed: u64, sigma: f64, pair_fraction: f64) -> SyntheticSupernet {
        let params = GroundTruthParams::random(spec, seed, 0.85, 0.004, pair_fraction);
        SyntheticSupernet::new(GroundTruth::new(params).unwrap(), 0.95, 0.0025, sigma, seed ^ 77).unwrap()
    }

    fn exhaustive_config(nodes: usize) -> SearchConfig {
        SearchConfig {
            m_samples: nodes,
            train_split: nodes - 100,
            top_pool: nodes,
            k_preserve: 6,
            plan: vec![4],
            gcn: tiny_gcn(),
            ..SearchConfig::default()
        }
    }

    fn brute_force_best(spec: &SearchSpaceSpec, sim: &SyntheticSupernet) -> Architecture {
        let sub = Subspace::full(spec).unwrap();
        let n = sub.node_count() as usize;
        let cands = evaluate_nodes(&sub, &(0..n).collect::<Vec<_>>(), sim).unwrap();
        let mut best = cands[0].clone();
        for c in cands {
            if c.accuracy > best.accuracy {
                best = c;
            }
        }
        best.arch
    }

    #[test]
    fn exhaustive_round_finds_argmax() {
        let spec = SearchSpaceSpec::new(4, 6).unwrap();
        let sim = supernet(&spec, 3, 0.0, 0.1);
        let sub = Subspace::full(&spec).unwrap();
        let out = run_round(&sub, &sim, &exhaustive_config(1296), 0).unwrap();
        assert_eq!(out.report.best_selected.architecture, brute_force_best(&spec, &sim));
        assert_eq!(out.preserved.len(), 6);
        assert_eq!(out.report.validation_count, 100);
        let distinct: std::collections::BTreeSet<_> = out.preserved.iter().map(|c| c.node).collect();
        assert_eq!(distinct.len(), 6);
    }

    #[test]
    fn reverify_properties() {
        let spec = SearchSpaceSpec::new(3, 3).unwrap();
        let sim = supernet(&spec, 1, 0.0, 0.0);
        let arch = Architecture::from_choices(vec![0, 1, 2]);
        let one = Candidate { node: 5, arch: arch.clone(), accuracy: 0.0 };
        let got = reverify(std::slice::from_ref(&one), &sim).unwrap();
        assert_eq!(got.arch, arch);
        assert_eq!(got.accuracy, sim.evaluate(&arch));
        assert!(matches!(reverify(&[], &sim), Err(Error::EmptyCandidates)));

        // Ties go to the lower node index.
        let twin = Candidate { node: 2, ..one.clone() };
        assert_eq!(reverify(&[one, twin], &sim).unwrap().node, 2);
    }

    #[test]
    fn reverify_overrides_a_lucky_candidate() {
        let spec = SearchSpaceSpec::new(4, 6).unwrap();
        let noisy = supernet(&spec, 9, 0.0, 0.1);
        let sub = Subspace::full(&spec).unwrap();
        let n = sub.node_count() as usize;
        let truth: Vec<f64> = (0..n)
            .map(|i| noisy.truth().value(&sub.materialize(&sub.assignment_of(i).unwrap()).unwrap()))
            .collect();
        let order = rank_desc(&truth);
        let (best, lucky) = (order[0], order[5]);
        let lucky_arch = sub.materialize(&sub.assignment_of(lucky).unwrap()).unwrap();
        // A large positive error lifts a mediocre node to the top of a noisy ranking.
        let noisy = noisy.with_noise_override(lucky_arch, 0.05);
        let pool: Vec<Candidate> = [lucky, best]
            .iter()
            .map(|&node| Candidate {
                node,
                arch: sub.materialize(&sub.assignment_of(node).unwrap()).unwrap(),
                accuracy: f64::NAN,
            })
            .collect();
        assert_eq!(reverify(&pool, &noisy).unwrap().node, lucky);
        let clean = noisy.advanced();
        assert_eq!(reverify(&pool, &clean).unwrap().node, best);
    }

    #[test]
    fn separable_search_picks_per_cell_argmax() {
        let spec = SearchSpaceSpec::new(4, 6).unwrap();
        let sim = supernet(&spec, 21, 0.0, 0.0);
        let config = SearchConfig {
            m_samples: 216,
            train_split: 200,
            top_pool: 216,
            k_preserve: 6,
            plan: vec![2, 2],
            gcn: tiny_gcn(),
            ..SearchConfig::default()
        };
        let mut eval = sim.clone();
        let result = run_search(&spec, &mut eval, &config, None).unwrap();
        let utility = &sim.truth().params().cell_utility;
        let expect: Vec<usize> = utility
            .iter()
            .map(|row| rank_desc(row)[0])
            .collect();
        assert_eq!(result.architecture.choices(), &expect[..]);
        assert_eq!(result.rounds.len(), 2);
        assert_eq!(result.rounds[1].super_cell_positions, vec![0, 1]);
        assert_eq!(result.rounds[1].node_count, 6 * 36);
    }

    #[test]
    fn nineteen_layer_plan_shapes() {
        let spec = SearchSpaceSpec::new(19, 6).unwrap();
        let sim = supernet(&spec, 2, 0.01, 0.1);
        let config = SearchConfig {
            m_samples: 60,
            train_split: 50,
            top_pool: 12,
            gcn: GcnConfig { hidden_dims: vec![8], epochs: 5, ..GcnConfig::default() },
            ..SearchConfig::default()
        };
        let mut seen = Vec::new();
        let mut eval = sim.clone();
        let result = run_search_with(&spec, &mut eval, &config, None, |o| {
            seen.push(o.graph.num_nodes());
            Ok(())
        })
        .unwrap();
        assert_eq!(seen, vec![279_936, 279_936, 279_936]);
        assert_eq!(result.rounds.len(), 3);
        for (t, r) in result.rounds.iter().enumerate() {
            assert_eq!(r.preserved.len(), 6);
            assert_eq!(r.validation_count, 10);
            // Finalized layers are never searched again.
            for earlier in &result.rounds[..t] {
                assert!(earlier.free_positions.iter().all(|p| !r.free_positions.contains(p)));
            }
            assert!(r.best_selected.accuracy >= r.gcn_top1.accuracy);
        }
        assert_eq!(result.rounds[2].free_positions, (13..19).collect::<Vec<_>>());
        assert_eq!(result.rounds[2].super_cell_positions, (0..13).collect::<Vec<_>>());
    }

    #[test]
    fn constraint_selection() {
        let spec = SearchSpaceSpec::new(4, 6).unwrap();
        let sim = supernet(&spec, 5, 0.0, 0.1);
        let costs = CostModel::bundled(&spec);
        let sub = Subspace::full(&spec).unwrap();
        let mut graph = build_graph(&sub, &SimilarityMode::default(), None, DEFAULT_NODE_CAP).unwrap();
        graph.normalize();
        let n = graph.num_nodes();
        let preds: Vec<f64> = (0..n).map(|i| (i % 17) as f64).collect();

        let all = evaluate_nodes(&sub, &(0..n).collect::<Vec<_>>(), &sim).unwrap();
        let budget = {
            let mut c: Vec<u64> = all.iter().map(|c| flops(&c.arch, &costs)).collect();
            c.sort_unstable();
            c[n / 3]
        };
        let got = constraint_select_ranked(&graph, &preds, &costs, budget, &sim, n).unwrap();
        assert!(flops(&got.arch, &costs) <= budget);
        let oracle = all
            .iter()
            .filter(|c| flops(&c.arch, &costs) <= budget)
            .max_by(|a, b| a.accuracy.total_cmp(&b.accuracy).then(b.node.cmp(&a.node)))
            .unwrap();
        assert_eq!(got.arch, oracle.arch);

        let unlimited = constraint_select_ranked(&graph, &preds, &costs, u64::MAX, &sim, 10).unwrap();
        let pool: Vec<Candidate> = rank_desc(&preds)[..10]
            .iter()
            .map(|&i| all[i].clone())
            .collect();
        assert_eq!(unlimited, reverify(&pool, &sim).unwrap());

        match constraint_select_ranked(&graph, &preds, &costs, costs.min_cost() - 1, &sim, n) {
            Err(Error::NoFeasibleArchitecture { min_cost, .. }) => assert_eq!(min_cost, costs.min_cost()),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn deterministic_and_validated() {
        let spec = SearchSpaceSpec::new(4, 6).unwrap();
        let sim = supernet(&spec, 8, 0.01, 0.1);
        let config = SearchConfig {
            m_samples: 100,
            train_split: 80,
            top_pool: 20,
            plan: vec![2, 2],
            gcn: tiny_gcn(),
            ..SearchConfig::default()
        };
        let a = run_search(&spec, &mut sim.clone(), &config, None).unwrap();
        let b = run_search(&spec, &mut sim.clone(), &config, None).unwrap();
        assert_eq!(
            crate::report::to_json(&a).unwrap(),
            crate::report::to_json(&b).unwrap()
        );

        let bad = SearchConfig { train_split: 100, ..config.clone() };
        assert!(run_search(&spec, &mut sim.clone(), &bad, None).is_err());
        let bad = SearchConfig { k_preserve: 30, ..config.clone() };
        assert!(bad.validate().is_err());
        let bad = SearchConfig { plan: vec![3, 2], ..config };
        assert!(matches!(
            run_search(&spec, &mut sim.clone(), &bad, None),
            Err(Error::PlanSizeMismatch { .. })
        ));
    }

    #[test]
    fn small_subspace_clamps_counts() {
        let config = SearchConfig::default();
        assert_eq!(config.split_for(10_000), (2000, 1800));
        assert_eq!(config.split_for(36), (36, 32));
        assert_eq!(config.split_for(2), (2, 1));
    }
}
