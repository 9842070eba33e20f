//! Original/reconstruction feature pairs for the unlabeled pool.

use crate::dataio::{FeatureMatrix, Role, SampleManifest};
use crate::reconproxy::ReconstructionProvider;
use crate::Error;

/// Row `i` of `originals` and row `i` of `reconstructions` belong to sample
/// `ids[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PairedFeatures {
    pub ids: Vec<String>,
    pub domains: Vec<String>,
    pub originals: FeatureMatrix,
    pub reconstructions: FeatureMatrix,
}

impl PairedFeatures {
    pub fn new(
        ids: Vec<String>,
        domains: Vec<String>,
        originals: FeatureMatrix,
        reconstructions: FeatureMatrix,
    ) -> Result<Self, Error> {
        let n = ids.len();
        if domains.len() != n || originals.n_rows() != n {
            return Err(Error::Shape(format!(
                "{} ids, {} domains, {} original rows",
                n,
                domains.len(),
                originals.n_rows()
            )));
        }
        if reconstructions.n_rows() != n {
            let missing = ids
                .get(reconstructions.n_rows())
                .cloned()
                .unwrap_or_default();
            return Err(Error::UnpairedSample(missing));
        }
        if originals.dim() != reconstructions.dim() {
            return Err(Error::Shape(format!(
                "original dim {} vs reconstruction dim {}",
                originals.dim(),
                reconstructions.dim()
            )));
        }
        Ok(Self {
            ids,
            domains,
            originals,
            reconstructions,
        })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.originals.dim()
    }

    /// Multiplies every raw feature (originals and reconstructions) by `c`.
    pub fn scaled(&self, c: f32) -> Self {
        let scale = |m: &FeatureMatrix| {
            let data = m.as_slice().iter().map(|x| x * c).collect();
            FeatureMatrix::new(m.n_rows(), m.dim(), data).expect("scaled matrix stays finite")
        };
        Self {
            ids: self.ids.clone(),
            domains: self.domains.clone(),
            originals: scale(&self.originals),
            reconstructions: scale(&self.reconstructions),
        }
    }

    /// Reorders samples so that new row `i` is old row `order[i]`.
    pub fn permuted(&self, order: &[usize]) -> Result<Self, Error> {
        Self::new(
            order.iter().map(|&i| self.ids[i].clone()).collect(),
            order.iter().map(|&i| self.domains[i].clone()).collect(),
            self.originals.select_rows(order)?,
            self.reconstructions.select_rows(order)?,
        )
    }
}

/// Where reconstruction features for pool samples come from.
pub enum PairSource<'a> {
    /// Paired rows referenced by each sample's `recon_row`.
    External,
    /// Computed on the fly from the original row.
    Provider(&'a dyn ReconstructionProvider),
}

/// Collects every `pool` sample of the manifest with its reconstruction.
pub fn pool_pairs(
    manifest: &SampleManifest,
    features: &FeatureMatrix,
    source: PairSource<'_>,
) -> Result<PairedFeatures, Error> {
    manifest.validate_rows(features.n_rows())?;
    let pool: Vec<_> = manifest
        .samples
        .iter()
        .filter(|s| s.role == Role::Pool)
        .collect();
    let mut ids = Vec::with_capacity(pool.len());
    let mut domains = Vec::with_capacity(pool.len());
    let mut orig_rows = Vec::with_capacity(pool.len());
    let mut recon = Vec::with_capacity(pool.len());
    for s in pool {
        let original = features.row_f64(s.feature_row);
        let r = match &source {
            PairSource::External => match s.recon_row {
                Some(row) => features.row_f64(row),
                None => return Err(Error::MissingReconPair(s.id.clone())),
            },
            PairSource::Provider(p) => p.reconstruct(&original, &s.domain)?,
        };
        ids.push(s.id.clone());
        domains.push(s.domain.clone());
        orig_rows.push(s.feature_row);
        recon.push(r);
    }
    let originals = features.select_rows(&orig_rows)?;
    let reconstructions = FeatureMatrix::from_rows(&recon, features.dim())?;
    PairedFeatures::new(ids, domains, originals, reconstructions)
}
