//! Seeded multi-domain synthetic feature sets.
//!
//! Every sample is `offset * 1 + domain_shift + class_sign * sep/2 * class_axis + noise`
//! with standard normal noise. The source domain has no shift; each target
//! domain is moved by `shift_magnitude` along its own direction, a
//! `shift_alignment` share of which lies along the class axis (with a
//! per-domain random sign). Targets are split 90/10 into an unlabeled
//! selection pool and a labeled test split.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::BenchError;
use crate::dataio::{FeatureMatrix, Label, Role, SampleManifest, SampleRecord};
use crate::geometry;
use crate::reconproxy::ReconstructionProvider;

pub const SOURCE_DOMAIN: &str = "source";
pub const TEST_FRACTION: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSpec {
    /// Number of target domains (the source domain is always added).
    pub n_domains: usize,
    pub samples_per_domain: usize,
    pub dim: usize,
    pub shift_magnitude: f64,
    /// Cosine between each target shift and the class axis, in `[0, 1]`.
    pub shift_alignment: f64,
    pub class_separation: f64,
    pub label_noise: f64,
    /// Common activation level added to every coordinate.
    pub feature_offset: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            n_domains: 3,
            samples_per_domain: 200,
            dim: 32,
            shift_magnitude: 3.0,
            shift_alignment: 0.5,
            class_separation: 3.0,
            label_noise: 0.05,
            feature_offset: 4.0,
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<(), BenchError> {
        let bad = |m: String| Err(BenchError::InvalidSpec(m));
        if self.n_domains < 1 || self.samples_per_domain < 1 || self.dim < 2 {
            return bad("n_domains, samples_per_domain must be >= 1 and dim >= 2".into());
        }
        if !(0.0..0.5).contains(&self.label_noise) {
            return bad(format!("label_noise must lie in [0, 0.5), got {}", self.label_noise));
        }
        if !(0.0..=1.0).contains(&self.shift_alignment) {
            return bad(format!(
                "shift_alignment must lie in [0, 1], got {}",
                self.shift_alignment
            ));
        }
        for (name, v) in [
            ("shift_magnitude", self.shift_magnitude),
            ("class_separation", self.class_separation),
            ("feature_offset", self.feature_offset),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return bad(format!("{name} must be finite and >= 0, got {v}"));
            }
        }
        Ok(())
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self {
            seed,
            ..self.clone()
        }
    }

    pub fn target_domains(&self) -> Vec<String> {
        (1..=self.n_domains).map(|i| format!("target{i}")).collect()
    }
}

/// Generated features and manifest. Pool labels are withheld from the
/// manifest and kept in `pool_labels` for simulated annotation.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticData {
    pub features: FeatureMatrix,
    pub manifest: SampleManifest,
    pub pool_labels: BTreeMap<String, Label>,
}

impl SyntheticData {
    /// Appends one reconstruction row per pool sample and records it as the
    /// sample's `recon_row`.
    pub fn attach_reconstructions(
        &mut self,
        provider: &dyn ReconstructionProvider,
    ) -> Result<(), BenchError> {
        let d = self.features.dim();
        let mut rows: Vec<Vec<f64>> = (0..self.features.n_rows())
            .map(|i| self.features.row_f64(i))
            .collect();
        for s in self.manifest.samples.iter_mut() {
            if s.role != Role::Pool {
                continue;
            }
            let r = provider.reconstruct(&rows[s.feature_row], &s.domain)?;
            s.recon_row = Some(rows.len());
            rows.push(r);
        }
        self.features = FeatureMatrix::from_rows(&rows, d)?;
        Ok(())
    }
}

fn random_unit(dim: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
        if let Ok(u) = geometry::normalize(&v) {
            return u.into_inner();
        }
    }
}

/// Unit vector whose cosine with the unit `axis` is `cos`.
fn mix_with_axis(axis: &[f64], cos: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    loop {
        let r = random_unit(axis.len(), rng);
        let along = geometry::dot(&r, axis);
        let ortho: Vec<f64> = r.iter().zip(axis).map(|(x, a)| x - along * a).collect();
        if let Ok(o) = geometry::normalize(&ortho) {
            let sin = (1.0 - cos * cos).max(0.0).sqrt();
            return axis
                .iter()
                .zip(o.as_slice())
                .map(|(a, o)| cos * a + sin * o)
                .collect();
        }
    }
}

pub fn generate(spec: &SyntheticSpec) -> Result<SyntheticData, BenchError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let d = spec.dim;
    let class_axis = random_unit(d, &mut rng);

    let mut domains = vec![(SOURCE_DOMAIN.to_string(), vec![0.0; d])];
    for name in spec.target_domains() {
        let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        let dir = mix_with_axis(&class_axis, spec.shift_alignment * sign, &mut rng);
        let shift = dir.iter().map(|x| x * spec.shift_magnitude).collect();
        domains.push((name, shift));
    }

    let mut rows = Vec::new();
    let mut samples = Vec::new();
    let mut pool_labels = BTreeMap::new();
    for (domain, shift) in &domains {
        let is_source = domain == SOURCE_DOMAIN;
        let n = spec.samples_per_domain;
        let n_test = if is_source {
            0
        } else {
            ((n as f64 * TEST_FRACTION).round() as usize).clamp(1, n.saturating_sub(1).max(1))
        };
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        let mut role_of = vec![Role::Pool; n];
        for &i in &order[..n_test.min(n)] {
            role_of[i] = Role::Test;
        }
        for (i, role) in role_of.into_iter().enumerate() {
            let malignant = rng.random_bool(0.5);
            let sign = if malignant { 1.0 } else { -1.0 };
            let x: Vec<f64> = (0..d)
                .map(|j| {
                    let noise: f64 = StandardNormal.sample(&mut rng);
                    spec.feature_offset
                        + shift[j]
                        + sign * 0.5 * spec.class_separation * class_axis[j]
                        + noise
                })
                .collect();
            let flipped = rng.random_bool(spec.label_noise);
            let label = if malignant != flipped {
                Label::Malignant
            } else {
                Label::Benign
            };
            let id = format!("{domain}-{i:04}");
            let role = if is_source { Role::Source } else { role };
            let shown = if role == Role::Pool {
                pool_labels.insert(id.clone(), label);
                None
            } else {
                Some(label)
            };
            samples.push(SampleRecord {
                id,
                domain: domain.clone(),
                role,
                feature_row: rows.len(),
                recon_row: None,
                label: shown,
            });
            rows.push(x);
        }
    }
    Ok(SyntheticData {
        features: FeatureMatrix::from_rows(&rows, d)?,
        manifest: SampleManifest::new(samples)?,
        pool_labels,
    })
}
