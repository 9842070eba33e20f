//! Dual-score informativeness and top-alpha% selection over the unlabeled
//! pool.
//!
//! Each sample gets an uncertainty score from its angles to the cluster
//! centroids (small when the sample sits between clusters) and a
//! representativeness score, the angle between the sample's embedding and
//! that of its reconstruction. They are combined as `I = u + omega * r` (or
//! the same combination of pool ranks) and the lowest `I` values are
//! selected in a single pass.

use std::collections::BTreeSet;
use std::io::{self, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clustering::{self, ClusterError, ClusterModel};
use crate::dataio::format_real;
use crate::geometry::{self, GeometryError, UnitEmbedding};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SelectionError {
    #[error("uncertainty needs at least 2 centroids, got {0}")]
    TooFewCentroids(usize),
    #[error("pool is empty")]
    EmptyPool,
    #[error("sample {0} has no reconstruction embedding")]
    UnpairedSample(String),
    #[error("invalid scoring config: {0}")]
    InvalidConfig(String),
    #[error("{0}")]
    Shape(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Cluster(#[from] ClusterError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UncertaintyMode {
    /// Smallest gap between any two centroid angles.
    #[default]
    PairwiseMin,
    /// Largest minus smallest centroid angle.
    Range,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CombineMode {
    /// `u + omega * r` on the scores themselves.
    #[default]
    Raw,
    /// `rank(u) + omega * rank(r)` with 0-based ascending average ranks.
    Rank,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScoringConfig {
    /// Weight on representativeness. Negative values prefer samples whose
    /// reconstruction diverges more.
    pub omega: f64,
    pub uncertainty_mode: UncertaintyMode,
    pub combine_mode: CombineMode,
    pub alpha_percent: f64,
}

impl Default for ScoringConfig {
    fn default() -> Self {
        Self {
            omega: 1.0,
            uncertainty_mode: UncertaintyMode::PairwiseMin,
            combine_mode: CombineMode::Raw,
            alpha_percent: 20.0,
        }
    }
}

impl ScoringConfig {
    pub fn validate(&self) -> Result<(), SelectionError> {
        if !(self.alpha_percent > 0.0 && self.alpha_percent < 100.0) {
            return Err(SelectionError::InvalidConfig(format!(
                "alpha_percent must lie in (0, 100), got {}",
                self.alpha_percent
            )));
        }
        if !self.omega.is_finite() {
            return Err(SelectionError::InvalidConfig(format!(
                "omega must be finite, got {}",
                self.omega
            )));
        }
        Ok(())
    }
}

/// `max(1, floor(alpha/100 * n))` for a nonempty pool.
pub fn budget_count(alpha_percent: f64, n: usize) -> usize {
    if n == 0 {
        return 0;
    }
    let raw = (alpha_percent * n as f64 / 100.0 + 1e-9).floor() as usize;
    raw.clamp(1, n)
}

pub fn uncertainty_score(thetas: &[f64], mode: UncertaintyMode) -> Result<f64, SelectionError> {
    if thetas.len() < 2 {
        return Err(SelectionError::TooFewCentroids(thetas.len()));
    }
    Ok(match mode {
        UncertaintyMode::PairwiseMin => {
            let mut sorted = thetas.to_vec();
            sorted.sort_by(f64::total_cmp);
            sorted
                .windows(2)
                .map(|w| w[1] - w[0])
                .fold(f64::INFINITY, f64::min)
        }
        UncertaintyMode::Range => {
            let max = thetas.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let min = thetas.iter().copied().fold(f64::INFINITY, f64::min);
            max - min
        }
    })
}

pub fn representativeness_score(
    z_u: &UnitEmbedding,
    z_r: &UnitEmbedding,
) -> Result<f64, SelectionError> {
    Ok(geometry::spherical_distance(z_u, z_r)?)
}

pub fn informativeness_raw(u: f64, r: f64, omega: f64) -> f64 {
    u + omega * r
}

/// 0-based ascending ranks; tied values share the mean of their positions.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        let avg = (start + end - 1) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = avg;
        }
        start = end;
    }
    ranks
}

/// Informativeness for a whole pool under either combine mode.
pub fn informativeness(u: &[f64], r: &[f64], cfg: &ScoringConfig) -> Vec<f64> {
    match cfg.combine_mode {
        CombineMode::Raw => u
            .iter()
            .zip(r)
            .map(|(&u, &r)| informativeness_raw(u, r, cfg.omega))
            .collect(),
        CombineMode::Rank => {
            let ru = average_ranks(u);
            let rr = average_ranks(r);
            ru.iter()
                .zip(&rr)
                .map(|(&a, &b)| informativeness_raw(a, b, cfg.omega))
                .collect()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionRow {
    pub id: String,
    pub domain: String,
    pub uncertainty: f64,
    pub representativeness: f64,
    pub informativeness: f64,
    /// 0 is the most informative.
    pub rank: usize,
    pub selected: bool,
}

/// Rows are kept in pool order; `rank` gives the sorted position.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionReport {
    pub rows: Vec<SelectionRow>,
    pub config: ScoringConfig,
    pub pool_size: usize,
}

impl SelectionReport {
    pub fn selected_ids(&self) -> BTreeSet<String> {
        self.rows
            .iter()
            .filter(|r| r.selected)
            .map(|r| r.id.clone())
            .collect()
    }

    pub fn n_selected(&self) -> usize {
        self.rows.iter().filter(|r| r.selected).count()
    }

    pub fn rows_by_rank(&self) -> Vec<&SelectionRow> {
        let mut rows: Vec<&SelectionRow> = self.rows.iter().collect();
        rows.sort_by_key(|r| r.rank);
        rows
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(
            out,
            "id,domain,uncertainty,representativeness,informativeness,rank,selected"
        )?;
        for r in self.rows_by_rank() {
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                r.id,
                r.domain,
                format_real(r.uncertainty),
                format_real(r.representativeness),
                format_real(r.informativeness),
                r.rank,
                r.selected
            )?;
        }
        Ok(())
    }
}

/// Pool samples with their embeddings and reconstruction embeddings.
#[derive(Debug, Clone, Copy)]
pub struct PoolView<'a> {
    pub ids: &'a [String],
    pub domains: &'a [String],
    pub embeddings: &'a [UnitEmbedding],
    pub reconstructions: &'a [UnitEmbedding],
}

/// Sorts by ascending informativeness (ties by ascending id) and flags the
/// first `budget_count(alpha, N)` samples.
pub fn rank_and_select(
    ids: &[String],
    informativeness: &[f64],
    alpha_percent: f64,
) -> (Vec<usize>, Vec<bool>) {
    let n = ids.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        informativeness[a]
            .total_cmp(&informativeness[b])
            .then_with(|| ids[a].cmp(&ids[b]))
    });
    let budget = budget_count(alpha_percent, n);
    let mut ranks = vec![0; n];
    let mut selected = vec![false; n];
    for (pos, &i) in order.iter().enumerate() {
        ranks[i] = pos;
        selected[i] = pos < budget;
    }
    (ranks, selected)
}

pub fn select(
    pool: PoolView<'_>,
    model: &ClusterModel,
    cfg: &ScoringConfig,
) -> Result<SelectionReport, SelectionError> {
    cfg.validate()?;
    let n = pool.ids.len();
    if n == 0 {
        return Err(SelectionError::EmptyPool);
    }
    if pool.domains.len() != n || pool.embeddings.len() != n {
        return Err(SelectionError::Shape(format!(
            "{} ids, {} domains, {} embeddings",
            n,
            pool.domains.len(),
            pool.embeddings.len()
        )));
    }
    if pool.reconstructions.len() != n {
        let missing = pool.ids[pool.reconstructions.len().min(n - 1)].clone();
        return Err(SelectionError::UnpairedSample(missing));
    }

    let mut u = Vec::with_capacity(n);
    let mut r = Vec::with_capacity(n);
    for (z, zr) in pool.embeddings.iter().zip(pool.reconstructions) {
        let thetas = clustering::angles_to_centroids(model, z)?;
        u.push(uncertainty_score(&thetas, cfg.uncertainty_mode)?);
        r.push(representativeness_score(z, zr)?);
    }
    let info = informativeness(&u, &r, cfg);
    let (ranks, selected) = rank_and_select(pool.ids, &info, cfg.alpha_percent);

    let rows = (0..n)
        .map(|i| SelectionRow {
            id: pool.ids[i].clone(),
            domain: pool.domains[i].clone(),
            uncertainty: u[i],
            representativeness: r[i],
            informativeness: info[i],
            rank: ranks[i],
            selected: selected[i],
        })
        .collect();
    Ok(SelectionReport {
        rows,
        config: *cfg,
        pool_size: n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    const THETAS: [f64; 4] = [0.2, 1.0, 1.4, 1.5];

    #[test]
    fn uncertainty_examples() {
        let pm = uncertainty_score(&THETAS, UncertaintyMode::PairwiseMin).unwrap();
        assert!((pm - 0.1).abs() < 1e-12);
        let range = uncertainty_score(&THETAS, UncertaintyMode::Range).unwrap();
        assert!((range - 1.3).abs() < 1e-12);
        for mode in [UncertaintyMode::PairwiseMin, UncertaintyMode::Range] {
            assert_eq!(uncertainty_score(&[0.7; 3], mode).unwrap(), 0.0);
        }
        assert_eq!(
            uncertainty_score(&[0.3], UncertaintyMode::Range),
            Err(SelectionError::TooFewCentroids(1))
        );
    }

    #[test]
    fn representativeness_examples() {
        let a = geometry::normalize(&[1.0, 0.0, 0.0]).unwrap();
        let b = geometry::normalize(&[0.0, 0.0, 2.0]).unwrap();
        assert!(representativeness_score(&a, &a).unwrap() < 1e-3);
        assert!((representativeness_score(&a, &b).unwrap() - FRAC_PI_2).abs() < 1e-12);
        assert_eq!(
            representativeness_score(&a, &b).unwrap(),
            representativeness_score(&b, &a).unwrap()
        );
    }

    #[test]
    fn informativeness_examples() {
        assert_eq!(informativeness_raw(0.37, 2.0, 0.0), 0.37);
        assert!((informativeness_raw(0.1, 0.5, 1.0) - 0.6).abs() < 1e-15);
        let cfg = ScoringConfig {
            combine_mode: CombineMode::Rank,
            ..Default::default()
        };
        assert_eq!(informativeness(&[0.1, 0.2], &[0.9, 0.3], &cfg), vec![1.0, 1.0]);
    }

    #[test]
    fn average_ranks_ties() {
        assert_eq!(
            average_ranks(&[3.0, 1.0, 3.0, 2.0]),
            vec![2.5, 0.0, 2.5, 1.0]
        );
    }

    #[test]
    fn budget_rule() {
        assert_eq!(budget_count(20.0, 10), 2);
        assert_eq!(budget_count(29.0, 100), 29);
        assert_eq!(budget_count(1.0, 10), 1);
        assert_eq!(budget_count(80.0, 7), 5);
        assert_eq!(budget_count(50.0, 0), 0);
    }

    #[test]
    fn tie_break_by_id() {
        let ids: Vec<String> = ["c", "a", "b"].iter().map(|s| s.to_string()).collect();
        let (ranks, sel) = rank_and_select(&ids, &[1.0, 1.0, 1.0], 50.0);
        assert_eq!(ranks, vec![2, 0, 1]);
        assert_eq!(sel, vec![false, true, false]);
    }

    #[test]
    fn config_validation() {
        for alpha in [0.0, 100.0, -5.0, f64::NAN] {
            let cfg = ScoringConfig {
                alpha_percent: alpha,
                ..Default::default()
            };
            assert!(cfg.validate().is_err());
        }
        for alpha in [20.0, 30.0, 50.0, 80.0] {
            let cfg = ScoringConfig {
                alpha_percent: alpha,
                ..Default::default()
            };
            assert!(cfg.validate().is_ok());
        }
    }
}
