//! Unit-hypersphere primitives: normalization, angular distance and the
//! scaled angular alignment loss with its analytic gradient.
//!
//! All arithmetic is `f64`. Cosine similarities are clamped to
//! `[-1 + eps, 1 - eps]` before `acos`, which keeps both the loss and its
//! derivative finite at the identical-pair optimum.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Norms at or below this are treated as the zero vector.
pub const ZERO_NORM: f64 = 1e-12;

/// Default clamp applied to cosine similarities before `acos`.
pub const DEFAULT_EPS_CLAMP: f64 = 1e-7;

/// Default ambient dimension of the embedding space.
pub const DEFAULT_D_EMBED: usize = 256;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("vector norm {norm:e} is too small to normalize")]
    ZeroVector { norm: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("embedding dimension must be at least 2, got {0}")]
    DimensionTooSmall(usize),
    #[error("empty batch")]
    EmptyBatch,
    #[error("expected a unit-norm vector, norm is {0}")]
    NotUnitNorm(f64),
    #[error("invalid loss config: {0}")]
    InvalidConfig(String),
}

/// An L2-normalized vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct UnitEmbedding(Vec<f64>);

impl UnitEmbedding {
    /// Wraps `values` without renormalizing. Fails if the norm is not 1
    /// within 1e-6 or the dimension is below 2.
    pub fn from_unit(values: Vec<f64>) -> Result<Self, GeometryError> {
        if values.len() < 2 {
            return Err(GeometryError::DimensionTooSmall(values.len()));
        }
        let n = l2_norm(&values);
        if (n - 1.0).abs() > 1e-6 {
            return Err(GeometryError::NotUnitNorm(n));
        }
        Ok(Self(values))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn dot(&self, other: &UnitEmbedding) -> Result<f64, GeometryError> {
        check_dims(self.dim(), other.dim())?;
        Ok(dot(&self.0, &other.0))
    }
}

impl AsRef<[f64]> for UnitEmbedding {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// Scale factor and clamp for [`angular_loss`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossConfig {
    pub m: f64,
    pub eps_clamp: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            m: 4.0,
            eps_clamp: DEFAULT_EPS_CLAMP,
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<(), GeometryError> {
        if !(self.m > 0.0 && self.m.is_finite()) {
            return Err(GeometryError::InvalidConfig(format!(
                "m must be positive, got {}",
                self.m
            )));
        }
        if !(self.eps_clamp > 0.0 && self.eps_clamp < 1e-3) {
            return Err(GeometryError::InvalidConfig(format!(
                "eps_clamp must lie in (0, 1e-3), got {}",
                self.eps_clamp
            )));
        }
        Ok(())
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn l2_norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

fn check_dims(expected: usize, got: usize) -> Result<(), GeometryError> {
    if expected != got {
        return Err(GeometryError::DimensionMismatch { expected, got });
    }
    Ok(())
}

/// Projects `v` onto the unit sphere.
pub fn normalize(v: &[f64]) -> Result<UnitEmbedding, GeometryError> {
    if v.len() < 2 {
        return Err(GeometryError::DimensionTooSmall(v.len()));
    }
    let norm = l2_norm(v);
    if !(norm > ZERO_NORM) {
        return Err(GeometryError::ZeroVector { norm });
    }
    Ok(UnitEmbedding(v.iter().map(|x| x / norm).collect()))
}

#[inline]
pub fn clamp_cosine(s: f64, eps_clamp: f64) -> f64 {
    s.clamp(-1.0 + eps_clamp, 1.0 - eps_clamp)
}

/// Angle between two unit vectors, in `[0, pi]`, using the default clamp.
pub fn spherical_distance(a: &UnitEmbedding, b: &UnitEmbedding) -> Result<f64, GeometryError> {
    spherical_distance_with(a, b, DEFAULT_EPS_CLAMP)
}

pub fn spherical_distance_with(
    a: &UnitEmbedding,
    b: &UnitEmbedding,
    eps_clamp: f64,
) -> Result<f64, GeometryError> {
    Ok(clamp_cosine(a.dot(b)?, eps_clamp).acos())
}

/// Mean over the batch of `(m * angle(f_i, g_i))^2`.
pub fn angular_loss(
    f_batch: &[UnitEmbedding],
    g_batch: &[UnitEmbedding],
    cfg: &LossConfig,
) -> Result<f64, GeometryError> {
    if f_batch.is_empty() || g_batch.is_empty() {
        return Err(GeometryError::EmptyBatch);
    }
    check_dims(f_batch.len(), g_batch.len())?;
    let mut total = 0.0;
    for (f, g) in f_batch.iter().zip(g_batch) {
        let theta = spherical_distance_with(f, g, cfg.eps_clamp)?;
        let scaled = cfg.m * theta;
        total += scaled * scaled;
    }
    Ok(total / f_batch.len() as f64)
}

/// Gradient of the single-pair loss `(m * acos(cos(f, g)))^2` with respect
/// to the *pre-normalization* vectors `f` and `g`.
///
/// Inside the clamp interval `dL/ds = -2 m^2 acos(s) / sqrt(1 - s^2)`; outside
/// it the clamp is flat and the gradient is exactly zero. The normalization
/// Jacobian `(I - u u^T) / |v|` maps the gradient of `s` into the tangent
/// space at each input.
pub fn angular_loss_grad(
    f: &[f64],
    g: &[f64],
    cfg: &LossConfig,
) -> Result<(Vec<f64>, Vec<f64>), GeometryError> {
    check_dims(f.len(), g.len())?;
    let fu = normalize(f)?;
    let gu = normalize(g)?;
    let f_norm = l2_norm(f);
    let g_norm = l2_norm(g);

    let raw_s = dot(fu.as_slice(), gu.as_slice());
    let s = clamp_cosine(raw_s, cfg.eps_clamp);
    if s != raw_s {
        return Ok((vec![0.0; f.len()], vec![0.0; g.len()]));
    }
    let dl_ds = -2.0 * cfg.m * cfg.m * s.acos() / (1.0 - s * s).sqrt();

    let grad_f = fu
        .as_slice()
        .iter()
        .zip(gu.as_slice())
        .map(|(fi, gi)| dl_ds * (gi - raw_s * fi) / f_norm)
        .collect();
    let grad_g = gu
        .as_slice()
        .iter()
        .zip(fu.as_slice())
        .map(|(gi, fi)| dl_ds * (fi - raw_s * gi) / g_norm)
        .collect();
    Ok((grad_f, grad_g))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn unit(v: &[f64]) -> UnitEmbedding {
        normalize(v).unwrap()
    }

    #[test]
    fn normalize_pythagorean() {
        let u = normalize(&[3.0, 4.0]).unwrap();
        assert!((u.as_slice()[0] - 0.6).abs() < 1e-15);
        assert!((u.as_slice()[1] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn normalize_idempotent_on_unit() {
        let u = unit(&[1.0, -2.0, 0.5]);
        let again = normalize(u.as_slice()).unwrap();
        for (a, b) in u.as_slice().iter().zip(again.as_slice()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn normalize_zero_vector() {
        assert!(matches!(
            normalize(&[0.0, 0.0]),
            Err(GeometryError::ZeroVector { .. })
        ));
        assert!(matches!(
            normalize(&[1.0]),
            Err(GeometryError::DimensionTooSmall(1))
        ));
    }

    #[test]
    fn distance_special_cases() {
        let a = unit(&[1.0, 0.0]);
        let b = unit(&[0.0, 1.0]);
        let neg = unit(&[-1.0, 0.0]);
        let same = spherical_distance(&a, &a).unwrap();
        assert!(same <= (1.0 - DEFAULT_EPS_CLAMP).acos() + 1e-15);
        assert!((spherical_distance(&a, &b).unwrap() - PI / 2.0).abs() < 1e-12);
        assert!((spherical_distance(&a, &neg).unwrap() - PI).abs() < 1e-3);
        let c = unit(&[1.0, 0.0, 0.0]);
        assert!(matches!(
            spherical_distance(&a, &c),
            Err(GeometryError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn loss_identities() {
        let cfg = LossConfig::default();
        let a = unit(&[1.0, 0.0]);
        let b = unit(&[0.0, 1.0]);
        let orth = angular_loss(std::slice::from_ref(&a), &[b], &cfg).unwrap();
        assert!((orth - 4.0 * PI * PI).abs() < 1e-9);

        let floor = (cfg.m * (1.0 - cfg.eps_clamp).acos()).powi(2);
        let same = angular_loss(std::slice::from_ref(&a), std::slice::from_ref(&a), &cfg).unwrap();
        assert!(same <= floor + 1e-15);

        assert_eq!(angular_loss(&[], &[], &cfg), Err(GeometryError::EmptyBatch));
        assert!(matches!(
            angular_loss(&[a.clone(), a.clone()], &[a], &cfg),
            Err(GeometryError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn grad_vanishes_at_identical_pair() {
        let v = [0.3, -1.2, 2.0, 0.7];
        let (gf, gg) = angular_loss_grad(&v, &v, &LossConfig::default()).unwrap();
        assert!(l2_norm(&gf) <= 1e-3);
        assert!(l2_norm(&gg) <= 1e-3);
    }

    #[test]
    fn grad_is_tangent() {
        let f = [0.3, -1.2, 2.0, 0.7];
        let g = [1.0, 0.2, -0.4, 0.9];
        let (gf, gg) = angular_loss_grad(&f, &g, &LossConfig::default()).unwrap();
        assert!(dot(&gf, &f).abs() < 1e-8);
        assert!(dot(&gg, &g).abs() < 1e-8);
    }

    #[test]
    fn loss_config_validation() {
        assert!(LossConfig::default().validate().is_ok());
        assert!(LossConfig { m: 0.0, ..Default::default() }.validate().is_err());
        assert!(LossConfig { eps_clamp: 1e-2, ..Default::default() }
            .validate()
            .is_err());
    }
}
