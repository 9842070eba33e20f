//! Comparison acquisition strategies.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::classifier::LinearClassifier;
use super::BenchError;
use crate::dataio::FeatureMatrix;
use crate::selection::budget_count;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// The embedding, clustering and informativeness pipeline.
    Adaptation,
    Random,
    Margin,
    Entropy,
    FarthestFirst,
}

impl Strategy {
    pub const ALL: [Strategy; 5] = [
        Strategy::Adaptation,
        Strategy::Random,
        Strategy::Margin,
        Strategy::Entropy,
        Strategy::FarthestFirst,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Adaptation => "adaptation",
            Strategy::Random => "random",
            Strategy::Margin => "margin",
            Strategy::Entropy => "entropy",
            Strategy::FarthestFirst => "farthest_first",
        }
    }

    pub fn needs_classifier(self) -> bool {
        matches!(self, Strategy::Margin | Strategy::Entropy)
    }
}

impl std::fmt::Display for Strategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Strategy {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Strategy::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| BenchError::InvalidConfig(format!("unknown strategy {s:?}")))
    }
}

/// Unlabeled pool as seen by the baselines: ids with raw features.
#[derive(Debug, Clone, Copy)]
pub struct BaselinePool<'a> {
    pub ids: &'a [String],
    pub features: &'a FeatureMatrix,
}

/// Budget for `alpha` percent of `n`, rejecting budgets the pool cannot fill.
pub fn checked_budget(alpha_percent: f64, n: usize) -> Result<usize, BenchError> {
    if !(alpha_percent.is_finite() && alpha_percent > 0.0) {
        return Err(BenchError::InvalidConfig(format!(
            "alpha must be > 0, got {alpha_percent}"
        )));
    }
    let requested = (alpha_percent * n as f64 / 100.0 + 1e-9).floor() as usize;
    if requested > n || n == 0 {
        return Err(BenchError::BudgetExceedsPool {
            budget: requested.max(1),
            pool: n,
        });
    }
    Ok(budget_count(alpha_percent, n))
}

fn binary_entropy(p: f64) -> f64 {
    let h = |q: f64| if q > 0.0 { -q * q.ln() } else { 0.0 };
    h(p) + h(1.0 - p)
}

/// Takes the `budget` indices with the smallest key, ties by ascending id.
fn take_smallest(ids: &[String], keys: &[f64], budget: usize) -> BTreeSet<String> {
    let mut order: Vec<usize> = (0..ids.len()).collect();
    order.sort_by(|&a, &b| keys[a].total_cmp(&keys[b]).then_with(|| ids[a].cmp(&ids[b])));
    order[..budget].iter().map(|&i| ids[i].clone()).collect()
}

fn sq_dist(a: &[f32], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (*x as f64 - y).powi(2)).sum()
}

/// Greedy k-center: start at the sample farthest from the pool mean, then
/// repeatedly add the sample farthest from everything chosen so far. Ties go
/// to the lowest index.
pub fn farthest_first(features: &FeatureMatrix, budget: usize) -> Vec<usize> {
    let n = features.n_rows();
    if n == 0 || budget == 0 {
        return Vec::new();
    }
    let d = features.dim();
    let mut mean = vec![0.0; d];
    for row in features.rows() {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += *v as f64;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);

    let argmax = |dist: &[f64]| {
        let mut best = 0;
        for (i, &v) in dist.iter().enumerate() {
            if v > dist[best] {
                best = i;
            }
        }
        best
    };
    let to_mean: Vec<f64> = features.rows().map(|r| sq_dist(r, &mean)).collect();
    let mut chosen = vec![argmax(&to_mean)];
    let mut nearest = vec![f64::INFINITY; n];
    while chosen.len() < budget.min(n) {
        let last = features.row_f64(*chosen.last().expect("non-empty"));
        for (i, row) in features.rows().enumerate() {
            nearest[i] = nearest[i].min(sq_dist(row, &last));
        }
        for &c in &chosen {
            nearest[c] = f64::NEG_INFINITY;
        }
        chosen.push(argmax(&nearest));
    }
    chosen
}

/// Picks `max(1, floor(alpha/100 * N))` pool ids with a baseline strategy.
pub fn baseline_select(
    strategy: Strategy,
    pool: BaselinePool<'_>,
    classifier: Option<&LinearClassifier>,
    alpha_percent: f64,
    seed: u64,
) -> Result<BTreeSet<String>, BenchError> {
    let n = pool.ids.len();
    if pool.features.n_rows() != n {
        return Err(BenchError::Shape(format!(
            "{} ids but {} feature rows",
            n,
            pool.features.n_rows()
        )));
    }
    let budget = checked_budget(alpha_percent, n)?;
    let probs = || -> Result<Vec<f64>, BenchError> {
        let clf = classifier.ok_or(BenchError::MissingClassifier(strategy))?;
        Ok(pool.features.rows().map(|r| clf.probability(r)).collect())
    };
    match strategy {
        Strategy::Adaptation => Err(BenchError::InvalidConfig(
            "adaptation is not a baseline strategy".into(),
        )),
        Strategy::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(&mut rng);
            Ok(order[..budget].iter().map(|&i| pool.ids[i].clone()).collect())
        }
        Strategy::Margin => {
            let keys: Vec<f64> = probs()?.iter().map(|p| (2.0 * p - 1.0).abs()).collect();
            Ok(take_smallest(pool.ids, &keys, budget))
        }
        Strategy::Entropy => {
            let keys: Vec<f64> = probs()?.iter().map(|&p| -binary_entropy(p)).collect();
            Ok(take_smallest(pool.ids, &keys, budget))
        }
        Strategy::FarthestFirst => Ok(farthest_first(pool.features, budget)
            .into_iter()
            .map(|i| pool.ids[i].clone())
            .collect()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("s{i:02}")).collect()
    }

    #[test]
    fn farthest_first_collinear_extremes() {
        let x = FeatureMatrix::from_rows(&[[0.0, 0.0], [1.0, 0.0], [10.0, 0.0]], 2).unwrap();
        let picked = farthest_first(&x, 2);
        let set: BTreeSet<usize> = picked.into_iter().collect();
        assert_eq!(set, BTreeSet::from([0, 2]));
    }

    #[test]
    fn random_is_seeded() {
        let id = ids(30);
        let x = FeatureMatrix::from_rows(&vec![[0.0, 1.0]; 30], 2).unwrap();
        let pool = BaselinePool { ids: &id, features: &x };
        let a = baseline_select(Strategy::Random, pool, None, 20.0, 5).unwrap();
        assert_eq!(a, baseline_select(Strategy::Random, pool, None, 20.0, 5).unwrap());
        assert_eq!(a.len(), 6);
        assert_ne!(a, baseline_select(Strategy::Random, pool, None, 20.0, 6).unwrap());
    }

    #[test]
    fn budget_bounds() {
        let id = ids(10);
        let x = FeatureMatrix::from_rows(&[[0.0, 1.0]; 10], 2).unwrap();
        let pool = BaselinePool { ids: &id, features: &x };
        assert_eq!(
            baseline_select(Strategy::FarthestFirst, pool, None, 1.0, 0).unwrap().len(),
            1
        );
        assert_eq!(
            baseline_select(Strategy::FarthestFirst, pool, None, 100.0, 0).unwrap().len(),
            10
        );
        assert!(matches!(
            baseline_select(Strategy::Random, pool, None, 150.0, 0),
            Err(BenchError::BudgetExceedsPool { budget: 15, pool: 10 })
        ));
        assert!(matches!(
            baseline_select(Strategy::Margin, pool, None, 20.0, 0),
            Err(BenchError::MissingClassifier(Strategy::Margin))
        ));
        let empty = FeatureMatrix::empty(2).unwrap();
        assert!(matches!(
            baseline_select(
                Strategy::Random,
                BaselinePool { ids: &[], features: &empty },
                None,
                20.0,
                0
            ),
            Err(BenchError::BudgetExceedsPool { .. })
        ));
    }

    #[test]
    fn entropy_prefers_ambiguous() {
        use super::super::classifier::ClassifierConfig;
        let rows: Vec<[f64; 1]> = (0..20).map(|i| [i as f64]).collect();
        let x = FeatureMatrix::from_rows(&rows, 1).unwrap();
        let y: Vec<usize> = (0..20).map(|i| usize::from(i >= 10)).collect();
        let clf = LinearClassifier::pretrain(&x, &y, &ClassifierConfig::default()).unwrap();
        let id = ids(20);
        let pool = BaselinePool { ids: &id, features: &x };
        let picked = baseline_select(Strategy::Entropy, pool, Some(&clf), 10.0, 0).unwrap();
        // Oracle: the two rows whose probability is closest to one half.
        let mut by_gap: Vec<(f64, usize)> = (0..20)
            .map(|i| ((clf.probability(x.row(i)) - 0.5).abs(), i))
            .collect();
        by_gap.sort_by(|a, b| a.0.total_cmp(&b.0));
        let expect: BTreeSet<String> = by_gap[..2].iter().map(|&(_, i)| id[i].clone()).collect();
        assert_eq!(picked, expect);
        assert_eq!(
            picked,
            baseline_select(Strategy::Margin, pool, Some(&clf), 10.0, 0).unwrap()
        );
    }
}
