//! Reconstruction providers and the cross-domain similarity statistics.
//!
//! The pipeline only needs a reconstruction feature vector per pool sample.
//! [`AffineProxy`] is a deterministic stand-in that blends each sample
//! towards a per-domain affine image of itself; real reconstructions enter
//! through paired rows of the feature file instead.

use std::collections::BTreeMap;
use std::io::{self, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataio::{format_real, FeatureMatrix};
use crate::geometry::{self, GeometryError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ReconError {
    #[error("no reconstruction map for domain {0:?}")]
    UnknownDomain(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("blend weight must lie in [0, 1], got {0}")]
    InvalidLambda(f64),
    #[error("feature set {0:?} is empty")]
    EmptySet(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Produces a reconstruction of a sample from its raw features.
pub trait ReconstructionProvider: Send + Sync {
    fn reconstruct(&self, features: &[f64], domain: &str) -> Result<Vec<f64>, ReconError>;
}

/// `x -> A x + b`; `A = None` means the identity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffineMap {
    pub matrix: Option<Vec<f64>>,
    pub offset: Vec<f64>,
}

impl AffineMap {
    pub fn identity(dim: usize) -> Self {
        Self {
            matrix: None,
            offset: vec![0.0; dim],
        }
    }

    pub fn translation(offset: Vec<f64>) -> Self {
        Self {
            matrix: None,
            offset,
        }
    }

    pub fn dim(&self) -> usize {
        self.offset.len()
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let d = self.dim();
        match &self.matrix {
            None => x.iter().zip(&self.offset).map(|(a, b)| a + b).collect(),
            Some(a) => (0..d)
                .map(|i| geometry::dot(&a[i * d..(i + 1) * d], x) + self.offset[i])
                .collect(),
        }
    }
}

/// `(1 - lambda) x + lambda (A_d x + b_d)` with one map per domain.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineProxy {
    dim: usize,
    lambda: f64,
    maps: BTreeMap<String, AffineMap>,
}

impl AffineProxy {
    pub fn new(dim: usize, lambda: f64) -> Result<Self, ReconError> {
        if !(0.0..=1.0).contains(&lambda) {
            return Err(ReconError::InvalidLambda(lambda));
        }
        Ok(Self {
            dim,
            lambda,
            maps: BTreeMap::new(),
        })
    }

    pub fn with_map(mut self, domain: impl Into<String>, map: AffineMap) -> Result<Self, ReconError> {
        if map.dim() != self.dim {
            return Err(ReconError::DimensionMismatch {
                expected: self.dim,
                got: map.dim(),
            });
        }
        if let Some(a) = &map.matrix {
            if a.len() != self.dim * self.dim {
                return Err(ReconError::DimensionMismatch {
                    expected: self.dim * self.dim,
                    got: a.len(),
                });
            }
        }
        self.maps.insert(domain.into(), map);
        Ok(self)
    }

    /// Translation maps that move each domain's feature mean onto the
    /// source mean. The source domain itself gets the identity.
    pub fn mean_matching(
        source_domain: &str,
        source: &FeatureMatrix,
        targets: &BTreeMap<String, FeatureMatrix>,
        lambda: f64,
    ) -> Result<Self, ReconError> {
        let source_mean = column_mean(source_domain, source)?;
        let mut proxy = Self::new(source.dim(), lambda)?
            .with_map(source_domain, AffineMap::identity(source.dim()))?;
        for (name, m) in targets {
            if m.dim() != source.dim() {
                return Err(ReconError::DimensionMismatch {
                    expected: source.dim(),
                    got: m.dim(),
                });
            }
            let mean = column_mean(name, m)?;
            let shift = source_mean.iter().zip(&mean).map(|(s, t)| s - t).collect();
            proxy = proxy.with_map(name.clone(), AffineMap::translation(shift))?;
        }
        Ok(proxy)
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn domains(&self) -> impl Iterator<Item = &str> {
        self.maps.keys().map(String::as_str)
    }
}

impl ReconstructionProvider for AffineProxy {
    fn reconstruct(&self, features: &[f64], domain: &str) -> Result<Vec<f64>, ReconError> {
        let map = self
            .maps
            .get(domain)
            .ok_or_else(|| ReconError::UnknownDomain(domain.to_string()))?;
        if features.len() != self.dim {
            return Err(ReconError::DimensionMismatch {
                expected: self.dim,
                got: features.len(),
            });
        }
        if self.lambda == 0.0 {
            return Ok(features.to_vec());
        }
        let mapped = map.apply(features);
        Ok(features
            .iter()
            .zip(mapped)
            .map(|(x, y)| (1.0 - self.lambda) * x + self.lambda * y)
            .collect())
    }
}

fn column_mean(name: &str, m: &FeatureMatrix) -> Result<Vec<f64>, ReconError> {
    if m.is_empty() {
        return Err(ReconError::EmptySet(name.to_string()));
    }
    let mut mean = vec![0.0; m.dim()];
    for row in m.rows() {
        for (acc, &x) in mean.iter_mut().zip(row) {
            *acc += x as f64;
        }
    }
    let n = m.n_rows() as f64;
    mean.iter_mut().for_each(|x| *x /= n);
    Ok(mean)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DomainStats {
    pub domain: String,
    pub n: usize,
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
    /// `|mean - source mean|`.
    pub bias: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DomainBiasReport {
    pub source: DomainStats,
    pub targets: Vec<DomainStats>,
    /// Raw `(domain, similarity)` samples, source first.
    pub similarities: Vec<(String, f64)>,
}

impl DomainBiasReport {
    pub fn target(&self, domain: &str) -> Option<&DomainStats> {
        self.targets.iter().find(|s| s.domain == domain)
    }

    pub fn write_similarities_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "domain,similarity")?;
        for (d, s) in &self.similarities {
            writeln!(out, "{},{}", d, format_real(*s))?;
        }
        Ok(())
    }
}

pub fn mean_bias(mean: f64, source_mean: f64) -> f64 {
    (mean - source_mean).abs()
}

/// Normalized mean of the normalized rows.
pub fn source_centroid(source: &FeatureMatrix) -> Result<geometry::UnitEmbedding, ReconError> {
    if source.is_empty() {
        return Err(ReconError::EmptySet("source".into()));
    }
    let mut sum = vec![0.0; source.dim()];
    for i in 0..source.n_rows() {
        let u = geometry::normalize(&source.row_f64(i))?;
        for (s, x) in sum.iter_mut().zip(u.as_slice()) {
            *s += x;
        }
    }
    Ok(geometry::normalize(&sum)?)
}

fn similarity_stats(
    domain: &str,
    m: &FeatureMatrix,
    centroid: &geometry::UnitEmbedding,
    out: &mut Vec<(String, f64)>,
) -> Result<(f64, f64, usize), ReconError> {
    if m.is_empty() {
        return Err(ReconError::EmptySet(domain.to_string()));
    }
    if m.dim() != centroid.dim() {
        return Err(ReconError::DimensionMismatch {
            expected: centroid.dim(),
            got: m.dim(),
        });
    }
    let sims = (0..m.n_rows())
        .map(|i| {
            let u = geometry::normalize(&m.row_f64(i))?;
            Ok(geometry::dot(u.as_slice(), centroid.as_slice()))
        })
        .collect::<Result<Vec<f64>, ReconError>>()?;
    let n = sims.len() as f64;
    let mean = sims.iter().sum::<f64>() / n;
    let var = sims.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / n;
    out.extend(sims.iter().map(|&s| (domain.to_string(), s)));
    Ok((mean, var.sqrt(), sims.len()))
}

/// Cosine similarity of every sample to the source centroid, summarized per
/// domain, with the bias of each domain's mean against the source mean.
pub fn domain_bias(
    source_domain: &str,
    source: &FeatureMatrix,
    targets: &BTreeMap<String, FeatureMatrix>,
) -> Result<DomainBiasReport, ReconError> {
    let centroid = source_centroid(source)?;
    let mut similarities = Vec::new();
    let (src_mean, src_std, src_n) =
        similarity_stats(source_domain, source, &centroid, &mut similarities)?;
    let mut stats = Vec::with_capacity(targets.len());
    for (name, m) in targets {
        let (mean, std, n) = similarity_stats(name, m, &centroid, &mut similarities)?;
        stats.push(DomainStats {
            domain: name.clone(),
            n,
            mean,
            std,
            bias: mean_bias(mean, src_mean),
        });
    }
    Ok(DomainBiasReport {
        source: DomainStats {
            domain: source_domain.to_string(),
            n: src_n,
            mean: src_mean,
            std: src_std,
            bias: 0.0,
        },
        targets: stats,
        similarities,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matrix(rows: &[&[f64]]) -> FeatureMatrix {
        FeatureMatrix::from_rows(rows, rows[0].len()).unwrap()
    }

    #[test]
    fn lambda_zero_is_identity() {
        let proxy = AffineProxy::new(3, 0.0)
            .unwrap()
            .with_map("t", AffineMap::translation(vec![5.0, -1.0, 2.0]))
            .unwrap();
        let x = [0.1, 0.2, 0.3];
        assert_eq!(proxy.reconstruct(&x, "t").unwrap(), x.to_vec());
    }

    #[test]
    fn identity_map_full_blend() {
        let proxy = AffineProxy::new(3, 1.0)
            .unwrap()
            .with_map(
                "t",
                AffineMap {
                    matrix: Some(vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]),
                    offset: vec![0.0; 3],
                },
            )
            .unwrap();
        let x = [0.1, -0.2, 0.3];
        assert_eq!(proxy.reconstruct(&x, "t").unwrap(), x.to_vec());
    }

    #[test]
    fn errors() {
        let proxy = AffineProxy::new(2, 0.5)
            .unwrap()
            .with_map("t", AffineMap::identity(2))
            .unwrap();
        assert_eq!(
            proxy.reconstruct(&[1.0, 2.0], "nope"),
            Err(ReconError::UnknownDomain("nope".into()))
        );
        assert!(matches!(
            proxy.reconstruct(&[1.0], "t"),
            Err(ReconError::DimensionMismatch { .. })
        ));
        assert_eq!(AffineProxy::new(2, 1.5), Err(ReconError::InvalidLambda(1.5)));
    }

    #[test]
    fn self_bias_is_zero() {
        let src = matrix(&[&[1.0, 0.2, 0.1], &[0.9, 0.4, 0.0], &[1.1, 0.1, 0.3]]);
        let mut targets = BTreeMap::new();
        targets.insert("copy".to_string(), src.clone());
        let report = domain_bias("src", &src, &targets).unwrap();
        assert!(report.target("copy").unwrap().bias < 1e-12);
        assert_eq!(report.source.bias, 0.0);
        assert_eq!(report.similarities.len(), 6);
    }

    #[test]
    fn empty_sets_rejected() {
        let src = matrix(&[&[1.0, 0.0]]);
        let mut targets = BTreeMap::new();
        targets.insert("t".to_string(), FeatureMatrix::empty(2).unwrap());
        assert_eq!(
            domain_bias("src", &src, &targets),
            Err(ReconError::EmptySet("t".into()))
        );
        assert!(matches!(
            domain_bias("src", &FeatureMatrix::empty(2).unwrap(), &BTreeMap::new()),
            Err(ReconError::EmptySet(_))
        ));
    }

    #[test]
    fn bias_column_arithmetic() {
        // Published pre-homogenization means: source 0.8744, target 0.8048.
        assert!((mean_bias(0.8048, 0.8744) - 0.0696).abs() < 1e-12);
        assert!((mean_bias(0.8409, 0.8744) - 0.0335).abs() < 1e-12);
    }
}
