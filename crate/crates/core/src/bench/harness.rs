//! Accuracy-versus-budget runs over seeded synthetic sets.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{self, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::baselines::{baseline_select, checked_budget, BaselinePool, Strategy};
use super::classifier::{ClassifierConfig, LinearClassifier};
use super::synth::{generate, SyntheticSpec, SOURCE_DOMAIN};
use super::BenchError;
use crate::clustering::ClusterConfig;
use crate::dataio::{format_real, FeatureMatrix, Label, Role, RunConfig};
use crate::pairs::{pool_pairs, PairSource};
use crate::pipeline;
use crate::selection::ScoringConfig;
use crate::tinynet::{train_heads, HeadSide, TrainerConfig};
use crate::Error;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    /// Seeds `base_seed .. base_seed + seeds` are run.
    pub seeds: usize,
    pub base_seed: u64,
    pub alphas: Vec<f64>,
    pub strategies: Vec<Strategy>,
    /// Head training used inside the bench; smaller than the default run so a
    /// full sweep stays fast on one core.
    pub trainer: TrainerConfig,
    pub classifier: ClassifierConfig,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            seeds: 20,
            base_seed: 0,
            alphas: vec![20.0, 30.0, 50.0, 80.0],
            strategies: Strategy::ALL.to_vec(),
            trainer: TrainerConfig {
                epochs: 30,
                hidden_dim: 64,
                d_embed: 32,
                ..TrainerConfig::desk_scale()
            },
            classifier: ClassifierConfig::default(),
        }
    }
}

impl BenchConfig {
    pub fn validate(&self) -> Result<(), BenchError> {
        let bad = |m: String| Err(BenchError::InvalidConfig(m));
        if self.seeds < 1 {
            return bad("bench.seeds must be >= 1".into());
        }
        if self.alphas.is_empty() || self.strategies.is_empty() {
            return bad("bench.alphas and bench.strategies must be non-empty".into());
        }
        if let Some(a) = self
            .alphas
            .iter()
            .find(|a| !(a.is_finite() && **a > 0.0 && **a <= 100.0))
        {
            return bad(format!("bench alphas must lie in (0, 100], got {a}"));
        }
        self.trainer
            .validate()
            .or_else(|e| bad(format!("bench.trainer: {e}")))?;
        self.classifier.validate()
    }

    pub fn seed_values(&self) -> impl Iterator<Item = u64> + '_ {
        (0..self.seeds as u64).map(move |s| self.base_seed + s)
    }
}

/// One (strategy, alpha, seed) accuracy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRun {
    pub strategy: String,
    pub alpha: f64,
    pub seed: u64,
    pub accuracy: f64,
}

/// Mean and sample standard deviation over seeds for one (strategy, alpha).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchCell {
    pub strategy: String,
    pub alpha: f64,
    pub n: usize,
    pub mean: f64,
    pub std: f64,
}

impl BenchCell {
    pub fn std_error(&self) -> f64 {
        self.std / (self.n as f64).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchResult {
    /// Sorted by strategy, alpha, then seed.
    pub runs: Vec<BenchRun>,
    pub cells: Vec<BenchCell>,
}

impl BenchResult {
    pub fn from_runs(mut runs: Vec<BenchRun>) -> Self {
        runs.sort_by(|a, b| {
            a.strategy
                .cmp(&b.strategy)
                .then(a.alpha.total_cmp(&b.alpha))
                .then(a.seed.cmp(&b.seed))
        });
        let mut groups: BTreeMap<(String, u64), Vec<f64>> = BTreeMap::new();
        for r in &runs {
            groups
                .entry((r.strategy.clone(), r.alpha.to_bits()))
                .or_default()
                .push(r.accuracy);
        }
        let mut cells: Vec<BenchCell> = groups
            .into_iter()
            .map(|((strategy, bits), acc)| {
                let n = acc.len();
                let mean = acc.iter().sum::<f64>() / n as f64;
                let var = if n > 1 {
                    acc.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (n - 1) as f64
                } else {
                    0.0
                };
                BenchCell {
                    strategy,
                    alpha: f64::from_bits(bits),
                    n,
                    mean,
                    std: var.sqrt(),
                }
            })
            .collect();
        cells.sort_by(|a, b| a.strategy.cmp(&b.strategy).then(a.alpha.total_cmp(&b.alpha)));
        Self { runs, cells }
    }

    /// Accuracies of one cell, ordered by seed.
    pub fn accuracies(&self, strategy: &str, alpha: f64) -> Vec<(u64, f64)> {
        self.runs
            .iter()
            .filter(|r| r.strategy == strategy && r.alpha == alpha)
            .map(|r| (r.seed, r.accuracy))
            .collect()
    }

    pub fn cell(&self, strategy: &str, alpha: f64) -> Option<&BenchCell> {
        self.cells
            .iter()
            .find(|c| c.strategy == strategy && c.alpha == alpha)
    }

    pub fn write_runs_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "strategy,alpha,seed,accuracy")?;
        for r in &self.runs {
            writeln!(
                out,
                "{},{},{},{}",
                r.strategy,
                format_real(r.alpha),
                r.seed,
                format_real(r.accuracy)
            )?;
        }
        Ok(())
    }

    pub fn write_summary_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "strategy,alpha,mean,std")?;
        for c in &self.cells {
            writeln!(
                out,
                "{},{},{},{}",
                c.strategy,
                format_real(c.alpha),
                format_real(c.mean),
                format_real(c.std)
            )?;
        }
        Ok(())
    }

    /// Places where a strategy's mean accuracy drops between consecutive
    /// budgets by more than two combined standard errors.
    pub fn monotonicity_warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        for pair in self.cells.windows(2) {
            let (a, b) = (&pair[0], &pair[1]);
            if a.strategy != b.strategy {
                continue;
            }
            let slack = 2.0 * (a.std_error().powi(2) + b.std_error().powi(2)).sqrt();
            if b.mean < a.mean - slack {
                out.push(format!(
                    "{}: mean accuracy falls from {} at alpha {} to {} at alpha {}",
                    a.strategy,
                    format_real(a.mean),
                    format_real(a.alpha),
                    format_real(b.mean),
                    format_real(b.alpha)
                ));
            }
        }
        out
    }
}

/// Outcome of a one-sided paired sign test of `a > b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignTest {
    pub wins: usize,
    pub losses: usize,
    pub ties: usize,
    /// `P(X >= wins)` for `X ~ Binomial(wins + losses, 1/2)`.
    pub p_value: f64,
}

pub fn paired_sign_test(a: &[f64], b: &[f64]) -> SignTest {
    let wins = a.iter().zip(b).filter(|(x, y)| x > y).count();
    let losses = a.iter().zip(b).filter(|(x, y)| x < y).count();
    let ties = a.len().min(b.len()) - wins - losses;
    let n = wins + losses;
    let mut tail = 0.0;
    for k in wins..=n {
        tail += binomial(n, k);
    }
    SignTest {
        wins,
        losses,
        ties,
        p_value: tail / 2f64.powi(n as i32),
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Pool samples with their hidden labels, revealed on selection.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledPool {
    pub ids: Vec<String>,
    pub features: FeatureMatrix,
    pub labels: Vec<Label>,
}

/// Fine-tunes the source classifier on the selected pool samples and
/// reports accuracy on the target test rows.
pub fn evaluate(
    pretrained: &LinearClassifier,
    selected: &BTreeSet<String>,
    pool: &LabeledPool,
    test: (&FeatureMatrix, &[usize]),
    cfg: &ClassifierConfig,
) -> Result<f64, BenchError> {
    if selected.is_empty() {
        return Err(BenchError::EmptySelection);
    }
    let index: BTreeMap<&str, usize> = pool
        .ids
        .iter()
        .enumerate()
        .map(|(i, id)| (id.as_str(), i))
        .collect();
    let mut rows = Vec::with_capacity(selected.len());
    let mut labels = Vec::with_capacity(selected.len());
    for id in selected {
        let &i = index
            .get(id.as_str())
            .ok_or_else(|| BenchError::UnknownId(id.clone()))?;
        rows.push(i);
        labels.push(pool.labels[i].as_class());
    }
    let x = pool.features.select_rows(&rows)?;
    let tuned = pretrained.fine_tune(&x, &labels, cfg)?;
    tuned.accuracy(test.0, test.1)
}

/// Everything the bench needs from one generated data set.
struct SeedData {
    data: super::synth::SyntheticData,
    pool: LabeledPool,
    test_x: FeatureMatrix,
    test_y: Vec<usize>,
    clf: LinearClassifier,
}

fn prepare(spec: &SyntheticSpec, cfg: &ClassifierConfig) -> Result<SeedData, Error> {
    let data = generate(spec)?;
    let m = &data.manifest;
    let rows_of = |role| -> (Vec<usize>, Vec<&crate::dataio::SampleRecord>) {
        let recs: Vec<_> = m.with_role(role).collect();
        (recs.iter().map(|s| s.feature_row).collect(), recs)
    };
    let label_of = |s: &crate::dataio::SampleRecord| -> Result<usize, Error> {
        s.label
            .map(Label::as_class)
            .ok_or_else(|| BenchError::UnknownId(s.id.clone()).into())
    };
    let (src_rows, src) = rows_of(Role::Source);
    let src_y = src.iter().map(|s| label_of(s)).collect::<Result<Vec<_>, _>>()?;
    let clf = LinearClassifier::pretrain(&data.features.select_rows(&src_rows)?, &src_y, cfg)?;

    let (test_rows, test) = rows_of(Role::Test);
    let test_y = test.iter().map(|s| label_of(s)).collect::<Result<Vec<_>, _>>()?;
    let test_x = data.features.select_rows(&test_rows)?;

    let (pool_rows, pool) = rows_of(Role::Pool);
    let labels = pool
        .iter()
        .map(|s| {
            data.pool_labels
                .get(&s.id)
                .copied()
                .ok_or_else(|| BenchError::UnknownId(s.id.clone()))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let pool = LabeledPool {
        ids: pool.iter().map(|s| s.id.clone()).collect(),
        features: data.features.select_rows(&pool_rows)?,
        labels,
    };
    Ok(SeedData {
        data,
        pool,
        test_x,
        test_y,
        clf,
    })
}

/// Settings shared by every cell of a bench sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchSetup {
    pub synthetic: SyntheticSpec,
    pub clustering: ClusterConfig,
    pub scoring: ScoringConfig,
    pub embed_side: HeadSide,
    pub lambda: f64,
    pub bench: BenchConfig,
}

impl BenchSetup {
    pub fn from_run_config(cfg: &RunConfig) -> Self {
        Self {
            synthetic: cfg.synthetic.clone(),
            clustering: cfg.clustering,
            scoring: cfg.scoring,
            embed_side: cfg.embed_side,
            lambda: cfg.provider.lambda,
            bench: cfg.bench.clone(),
        }
    }
}

/// Pipeline selections for one seed, keyed by `(k, alpha bits)`.
fn adaptation_selections(
    setup: &BenchSetup,
    sd: &SeedData,
    seed: u64,
    ks: &[usize],
) -> Result<BTreeMap<(usize, u64), BTreeSet<String>>, Error> {
    let proxy = pipeline::fit_proxy(
        &sd.data.manifest,
        &sd.data.features,
        SOURCE_DOMAIN,
        setup.lambda,
    )?;
    let pairs = pool_pairs(&sd.data.manifest, &sd.data.features, PairSource::Provider(&proxy))?;
    let trainer = TrainerConfig {
        seed,
        ..setup.bench.trainer.clone()
    };
    let head = train_heads(&pairs, &trainer)?;
    let embeddings = pipeline::embed_pairs(&head, &pairs, setup.embed_side)?;
    let mut out = BTreeMap::new();
    for &k in ks {
        let cluster_cfg = ClusterConfig {
            k,
            seed,
            ..setup.clustering
        };
        let base = ScoringConfig {
            alpha_percent: 50.0,
            ..setup.scoring
        };
        let outcome = pipeline::score_pool(&pairs, embeddings.clone(), &cluster_cfg, &base)?;
        let by_rank = outcome.report.rows_by_rank();
        for &alpha in &setup.bench.alphas {
            let budget = checked_budget(alpha, pairs.len())?;
            let chosen = by_rank[..budget].iter().map(|r| r.id.clone()).collect();
            out.insert((k, alpha.to_bits()), chosen);
        }
    }
    Ok(out)
}

fn run_seed(setup: &BenchSetup, seed: u64, ks: &[usize]) -> Result<Vec<BenchRun>, Error> {
    let bench = &setup.bench;
    let sd = prepare(&setup.synthetic.with_seed(seed), &bench.classifier)?;
    let test = (&sd.test_x, sd.test_y.as_slice());
    let mut runs = Vec::new();
    let wants_pipeline = !ks.is_empty();
    let adaptation = if wants_pipeline {
        adaptation_selections(setup, &sd, seed, ks)?
    } else {
        BTreeMap::new()
    };
    let multi_k = ks.len() > 1;
    for &strategy in &bench.strategies {
        for &alpha in &bench.alphas {
            if strategy == Strategy::Adaptation {
                for &k in ks {
                    let chosen = &adaptation[&(k, alpha.to_bits())];
                    let name = if multi_k {
                        format!("adaptation_k{k}")
                    } else {
                        strategy.name().to_string()
                    };
                    let accuracy = evaluate(&sd.clf, chosen, &sd.pool, test, &bench.classifier)?;
                    runs.push(BenchRun {
                        strategy: name,
                        alpha,
                        seed,
                        accuracy,
                    });
                }
                continue;
            }
            let chosen = baseline_select(
                strategy,
                BaselinePool {
                    ids: &sd.pool.ids,
                    features: &sd.pool.features,
                },
                Some(&sd.clf),
                alpha,
                seed,
            )?;
            let accuracy = evaluate(&sd.clf, &chosen, &sd.pool, test, &bench.classifier)?;
            runs.push(BenchRun {
                strategy: strategy.name().to_string(),
                alpha,
                seed,
                accuracy,
            });
        }
    }
    Ok(runs)
}

/// Runs every configured (strategy, alpha, seed) cell. Seeds run in
/// parallel; the result does not depend on the thread count.
pub fn run_bench(setup: &BenchSetup) -> Result<BenchResult, Error> {
    setup.bench.validate()?;
    let ks = if setup.bench.strategies.contains(&Strategy::Adaptation) {
        vec![setup.clustering.k]
    } else {
        Vec::new()
    };
    sweep(setup, &ks)
}

/// Runs only the pipeline strategy for each cluster count in `ks`, labelled
/// `adaptation_k<k>`.
pub fn cluster_ablation(setup: &BenchSetup, ks: &[usize]) -> Result<BenchResult, Error> {
    let mut setup = setup.clone();
    setup.bench.strategies = vec![Strategy::Adaptation];
    setup.bench.validate()?;
    if ks.is_empty() {
        return Err(BenchError::InvalidConfig("cluster ablation needs at least one k".into()).into());
    }
    let mut ks = ks.to_vec();
    ks.sort_unstable();
    ks.dedup();
    if ks.len() == 1 {
        let mut r = sweep(&setup, &ks)?;
        for run in r.runs.iter_mut() {
            run.strategy = format!("adaptation_k{}", ks[0]);
        }
        return Ok(BenchResult::from_runs(r.runs));
    }
    sweep(&setup, &ks)
}

fn sweep(setup: &BenchSetup, ks: &[usize]) -> Result<BenchResult, Error> {
    let seeds: Vec<u64> = setup.bench.seed_values().collect();
    let per_seed = seeds
        .par_iter()
        .map(|&s| run_seed(setup, s, ks))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(BenchResult::from_runs(per_seed.into_iter().flatten().collect()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sign_test_tails() {
        let t = paired_sign_test(&[1.0; 5], &[0.0; 5]);
        assert_eq!((t.wins, t.losses, t.ties), (5, 0, 0));
        assert!((t.p_value - 1.0 / 32.0).abs() < 1e-15);
        let t = paired_sign_test(&[1.0, 0.0, 0.5], &[0.0, 1.0, 0.5]);
        assert_eq!((t.wins, t.losses, t.ties), (1, 1, 1));
        assert!((t.p_value - 0.75).abs() < 1e-15);
        // 15 of 20: sum_{k>=15} C(20,k) / 2^20 = 21700 / 1048576.
        let a: Vec<f64> = (0..20).map(|i| if i < 15 { 1.0 } else { 0.0 }).collect();
        let t = paired_sign_test(&a, &[0.5; 20]);
        assert!((t.p_value - 21700.0 / 1048576.0).abs() < 1e-15);
    }

    #[test]
    fn cells_aggregate_sorted() {
        let runs = vec![
            BenchRun { strategy: "b".into(), alpha: 20.0, seed: 1, accuracy: 0.5 },
            BenchRun { strategy: "a".into(), alpha: 30.0, seed: 0, accuracy: 1.0 },
            BenchRun { strategy: "b".into(), alpha: 20.0, seed: 0, accuracy: 0.7 },
        ];
        let r = BenchResult::from_runs(runs);
        assert_eq!(r.runs[0].strategy, "a");
        assert_eq!(r.runs[1].seed, 0);
        let c = r.cell("b", 20.0).unwrap();
        assert_eq!(c.n, 2);
        assert!((c.mean - 0.6).abs() < 1e-12);
        assert!((c.std - 0.02f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn evaluate_rejects_unknown_and_empty() {
        let x = FeatureMatrix::from_rows(&[[0.0, 1.0], [1.0, 0.0]], 2).unwrap();
        let clf = LinearClassifier::pretrain(&x, &[0, 1], &ClassifierConfig::default()).unwrap();
        let pool = LabeledPool {
            ids: vec!["a".into(), "b".into()],
            features: x.clone(),
            labels: vec![Label::Benign, Label::Malignant],
        };
        let test = (&x, [0usize, 1].as_slice());
        let cfg = ClassifierConfig::default();
        assert!(matches!(
            evaluate(&clf, &BTreeSet::from(["zz".to_string()]), &pool, test, &cfg),
            Err(BenchError::UnknownId(_))
        ));
        assert!(matches!(
            evaluate(&clf, &BTreeSet::new(), &pool, test, &cfg),
            Err(BenchError::EmptySelection)
        ));
        let all = BTreeSet::from(["a".to_string(), "b".to_string()]);
        assert_eq!(evaluate(&clf, &all, &pool, test, &cfg).unwrap(), 1.0);
    }
}
