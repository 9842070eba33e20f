//! End-to-end pool scoring: proxy reconstructions, embedding, clustering and
//! ranking.

use std::collections::BTreeMap;

use crate::clustering::{self, ClusterConfig, ClusterModel};
use crate::dataio::{FeatureMatrix, Role, SampleManifest};
use crate::geometry::UnitEmbedding;
use crate::pairs::PairedFeatures;
use crate::reconproxy::AffineProxy;
use crate::selection::{self, PoolView, ScoringConfig, SelectionReport};
use crate::tinynet::{embed_all, HeadSide, TrainedHead};
use crate::Error;

/// Feature rows of every sample with `role`, grouped by domain.
pub fn rows_by_domain(
    manifest: &SampleManifest,
    features: &FeatureMatrix,
    role: Role,
) -> Result<BTreeMap<String, FeatureMatrix>, Error> {
    manifest.validate_rows(features.n_rows())?;
    let mut idx: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for s in manifest.with_role(role) {
        idx.entry(s.domain.clone()).or_default().push(s.feature_row);
    }
    idx.into_iter()
        .map(|(d, rows)| Ok((d, features.select_rows(&rows)?)))
        .collect()
}

/// Source rows: samples with role `source` in `source_domain`.
pub fn source_rows(
    manifest: &SampleManifest,
    features: &FeatureMatrix,
    source_domain: &str,
) -> Result<FeatureMatrix, Error> {
    rows_by_domain(manifest, features, Role::Source)?
        .remove(source_domain)
        .ok_or_else(|| Error::MissingSource(source_domain.to_string()))
}

/// Mean-matching proxy fitted on the source rows and each target domain's
/// pool rows.
pub fn fit_proxy(
    manifest: &SampleManifest,
    features: &FeatureMatrix,
    source_domain: &str,
    lambda: f64,
) -> Result<AffineProxy, Error> {
    let source = source_rows(manifest, features, source_domain)?;
    let mut targets = rows_by_domain(manifest, features, Role::Pool)?;
    targets.remove(source_domain);
    Ok(AffineProxy::mean_matching(
        source_domain,
        &source,
        &targets,
        lambda,
    )?)
}

/// Embeddings of the pool originals and reconstructions.
#[derive(Debug, Clone, PartialEq)]
pub struct PoolEmbeddings {
    pub originals: Vec<UnitEmbedding>,
    pub reconstructions: Vec<UnitEmbedding>,
}

pub fn embed_pairs(
    head: &TrainedHead,
    pairs: &PairedFeatures,
    side: HeadSide,
) -> Result<PoolEmbeddings, Error> {
    Ok(PoolEmbeddings {
        originals: embed_all(head, &pairs.originals, side)?,
        reconstructions: embed_all(head, &pairs.reconstructions, side)?,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionOutcome {
    pub embeddings: PoolEmbeddings,
    pub model: ClusterModel,
    pub report: SelectionReport,
}

/// Clusters the pool embeddings and ranks the pool.
pub fn score_pool(
    pairs: &PairedFeatures,
    embeddings: PoolEmbeddings,
    cluster_cfg: &ClusterConfig,
    scoring: &ScoringConfig,
) -> Result<SelectionOutcome, Error> {
    let model = clustering::fit(&embeddings.originals, cluster_cfg)?;
    let report = selection::select(
        PoolView {
            ids: &pairs.ids,
            domains: &pairs.domains,
            embeddings: &embeddings.originals,
            reconstructions: &embeddings.reconstructions,
        },
        &model,
        scoring,
    )?;
    Ok(SelectionOutcome {
        embeddings,
        model,
        report,
    })
}

/// Embeds with a trained head, then clusters and ranks.
pub fn select_pool(
    head: &TrainedHead,
    pairs: &PairedFeatures,
    side: HeadSide,
    cluster_cfg: &ClusterConfig,
    scoring: &ScoringConfig,
) -> Result<SelectionOutcome, Error> {
    let embeddings = embed_pairs(head, pairs, side)?;
    score_pool(pairs, embeddings, cluster_cfg, scoring)
}
