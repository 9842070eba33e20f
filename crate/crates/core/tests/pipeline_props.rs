use std::collections::BTreeMap;

use adaptation_core::bench::{
    generate, run_bench, BenchConfig, BenchSetup, ClassifierConfig, LinearClassifier, Strategy,
    SyntheticSpec, SOURCE_DOMAIN,
};
use adaptation_core::clustering::ClusterConfig;
use adaptation_core::dataio::{FeatureMatrix, Label, Role, RunConfig, SampleManifest};
use adaptation_core::pipeline::{fit_proxy, rows_by_domain, select_pool, source_rows};
use adaptation_core::reconproxy::domain_bias;
use adaptation_core::selection::ScoringConfig;
use adaptation_core::tinynet::{train_heads, HeadSide, TrainerConfig};
use adaptation_core::{pool_pairs, Error, PairSource, PairedFeatures};

fn small_trainer(seed: u64) -> TrainerConfig {
    TrainerConfig {
        epochs: 3,
        hidden_dim: 16,
        d_embed: 8,
        seed,
        ..TrainerConfig::desk_scale()
    }
}

fn proxy_pairs(features: &FeatureMatrix, manifest: &SampleManifest) -> PairedFeatures {
    let proxy = fit_proxy(manifest, features, SOURCE_DOMAIN, 1.0).unwrap();
    pool_pairs(manifest, features, PairSource::Provider(&proxy)).unwrap()
}

fn scaled(m: &FeatureMatrix, c: f32) -> FeatureMatrix {
    FeatureMatrix::new(m.n_rows(), m.dim(), m.as_slice().iter().map(|x| x * c).collect()).unwrap()
}

#[test]
fn rescaling_raw_features_keeps_selection() {
    for seed in 0..4u64 {
        let data = generate(&SyntheticSpec { seed, samples_per_domain: 80, ..Default::default() }).unwrap();
        let pairs = proxy_pairs(&data.features, &data.manifest);
        let head = train_heads(&pairs, &small_trainer(seed)).unwrap();
        let pick = |features: &FeatureMatrix| {
            let pairs = proxy_pairs(features, &data.manifest);
            select_pool(&head, &pairs, HeadSide::Student, &ClusterConfig::default(), &ScoringConfig::default())
                .unwrap()
                .report
                .selected_ids()
        };
        let base = pick(&data.features);
        for c in [0.5f32, 3.7, 1000.0] {
            assert_eq!(pick(&scaled(&data.features, c)), base, "seed {seed} scale {c}");
        }
    }
}

#[test]
fn external_provider_requires_recon_rows() {
    let data = generate(&SyntheticSpec { samples_per_domain: 20, ..Default::default() }).unwrap();
    let err = pool_pairs(&data.manifest, &data.features, PairSource::External).unwrap_err();
    assert!(matches!(err, Error::MissingReconPair(_)));

    let mut with = data.clone();
    let proxy = fit_proxy(&data.manifest, &data.features, SOURCE_DOMAIN, 1.0).unwrap();
    with.attach_reconstructions(&proxy).unwrap();
    let external = pool_pairs(&with.manifest, &with.features, PairSource::External).unwrap();
    let provided = pool_pairs(&data.manifest, &data.features, PairSource::Provider(&proxy)).unwrap();
    assert_eq!(external.ids, provided.ids);
    assert_eq!(external.reconstructions, provided.reconstructions);
}

#[test]
fn generator_is_deterministic_and_split() {
    let spec = SyntheticSpec { seed: 11, ..Default::default() };
    let a = generate(&spec).unwrap();
    assert_eq!(a.features, generate(&spec).unwrap().features);
    assert_eq!(a.manifest, generate(&spec).unwrap().manifest);
    for domain in spec.target_domains() {
        let test = a.manifest.samples.iter().filter(|s| s.domain == domain && s.role == Role::Test).count();
        assert_eq!(test, 20);
    }
    assert!(a.manifest.with_role(Role::Pool).all(|s| s.label.is_none()));
    assert!(a.manifest.with_role(Role::Test).all(|s| s.label.is_some()));
    assert_eq!(a.pool_labels.len(), a.manifest.with_role(Role::Pool).count());
}

fn biases(spec: &SyntheticSpec) -> Vec<(f64, f64, f64)> {
    let data = generate(spec).unwrap();
    let source = source_rows(&data.manifest, &data.features, SOURCE_DOMAIN).unwrap();
    let mut targets = rows_by_domain(&data.manifest, &data.features, Role::Pool).unwrap();
    targets.remove(SOURCE_DOMAIN);
    let report = domain_bias(SOURCE_DOMAIN, &source, &targets).unwrap();
    report
        .targets
        .iter()
        .map(|t| {
            let se = (t.std.powi(2) / t.n as f64 + report.source.std.powi(2) / report.source.n as f64).sqrt();
            (t.bias, se, t.mean)
        })
        .collect()
}

#[test]
fn zero_shift_has_no_bias() {
    for seed in 0..5u64 {
        let spec = SyntheticSpec { shift_magnitude: 0.0, seed, ..Default::default() };
        for (bias, se, _) in biases(&spec) {
            assert!(bias <= 3.0 * se, "seed {seed}: bias {bias} vs 3 se {}", 3.0 * se);
        }
    }
}

#[test]
fn separated_classes_are_learnable() {
    let spec = SyntheticSpec { class_separation: 8.0, label_noise: 0.0, shift_magnitude: 0.0, ..Default::default() };
    let data = generate(&spec).unwrap();
    let mut x = Vec::new();
    let mut y = Vec::new();
    for s in data.manifest.samples.iter().filter(|s| s.domain == SOURCE_DOMAIN) {
        x.push(data.features.row_f64(s.feature_row));
        y.push(s.label.unwrap().as_class());
    }
    let xs = FeatureMatrix::from_rows(&x, spec.dim).unwrap();
    let clf = LinearClassifier::pretrain(&xs, &y, &ClassifierConfig::default()).unwrap();
    let mut tx = Vec::new();
    let mut ty = Vec::new();
    for s in data.manifest.with_role(Role::Test) {
        tx.push(data.features.row_f64(s.feature_row));
        ty.push(s.label.unwrap().as_class());
    }
    let acc = clf.accuracy(&FeatureMatrix::from_rows(&tx, spec.dim).unwrap(), &ty).unwrap();
    assert!(acc >= 0.95, "accuracy {acc}");
}

fn tiny_bench(alphas: Vec<f64>, seeds: usize) -> BenchSetup {
    let mut cfg = RunConfig::default();
    cfg.synthetic.samples_per_domain = 60;
    cfg.bench = BenchConfig {
        seeds,
        alphas,
        trainer: small_trainer(0),
        ..BenchConfig::default()
    };
    BenchSetup::from_run_config(&cfg)
}

#[test]
fn bench_rows_and_full_budget() {
    let setup = tiny_bench(vec![20.0, 100.0], 3);
    let result = run_bench(&setup).unwrap();
    assert_eq!(result.runs.len(), Strategy::ALL.len() * 2 * 3);
    let mut csv = Vec::new();
    result.write_runs_csv(&mut csv).unwrap();
    assert_eq!(String::from_utf8(csv).unwrap().lines().count(), 1 + result.runs.len());

    // Labeling the whole pool gives every strategy the same training set.
    let mut full: BTreeMap<u64, Vec<f64>> = BTreeMap::new();
    for r in result.runs.iter().filter(|r| r.alpha == 100.0) {
        full.entry(r.seed).or_default().push(r.accuracy);
    }
    for accs in full.values() {
        assert!(accs.windows(2).all(|w| w[0] == w[1]), "{accs:?}");
    }
    assert!(result.runs.iter().all(|r| (0.0..=1.0).contains(&r.accuracy)));
    assert_eq!(run_bench(&setup).unwrap(), result);
}

#[test]
fn pool_labels_are_binary_classes() {
    let data = generate(&SyntheticSpec::default()).unwrap();
    let malignant = data.pool_labels.values().filter(|l| **l == Label::Malignant).count();
    let frac = malignant as f64 / data.pool_labels.len() as f64;
    assert!((0.35..0.65).contains(&frac), "{frac}");
}
