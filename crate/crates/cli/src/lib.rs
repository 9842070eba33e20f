//! Subcommand implementations behind the `adaptation` binary.
//!
//! Every command takes a fully resolved [`RunConfig`] and writes its
//! artifacts under `paths.output_dir`. Human-readable progress goes to the
//! supplied writer so tests can capture it.

use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use adaptation_core::bench::{self, BenchResult, BenchSetup};
use adaptation_core::dataio::{
    self, format_real, DataError, FeatureMatrix, ProviderKind, Role, RunConfig, SampleManifest,
};
use adaptation_core::pipeline::{self, SelectionOutcome};
use adaptation_core::reconproxy::{self, DomainBiasReport};
use adaptation_core::selection::{CombineMode, UncertaintyMode};
use adaptation_core::tinynet::{train_heads_with, HeadSide, TrainedHead};
use adaptation_core::{pool_pairs, Error, PairSource, PairedFeatures};
use thiserror::Error as ThisError;

pub const OUTPUT_DIR_ENV: &str = "ADAPT_OUTPUT_DIR";

#[derive(Debug, ThisError)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] Error),
    #[error("failed to build thread pool: {0}")]
    Threads(String),
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        CliError::Core(e.into())
    }
}

impl CliError {
    fn io(path: &Path, e: io::Error) -> Self {
        DataError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        }
        .into()
    }

    /// Process exit code; each error class has its own.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Threads(_) => 2,
            CliError::Core(e) => match e {
                Error::Data(DataError::InvalidConfig(_) | DataError::Parse(_)) => 2,
                Error::Data(DataError::Io { .. }) => 3,
                Error::Data(_) | Error::Shape(_) => 4,
                Error::MissingReconPair(_) | Error::UnpairedSample(_) => 5,
                Error::Train(_) => 6,
                Error::Cluster(_) => 7,
                Error::Selection(_) => 8,
                Error::Recon(_) | Error::MissingSource(_) => 9,
                Error::Bench(_) => 10,
                Error::Geometry(_) => 11,
            },
        }
    }
}

/// Command-line values that override individual config fields.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub output_dir: Option<PathBuf>,
    pub features: Option<PathBuf>,
    pub manifest: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub threads: Option<usize>,
    pub epochs: Option<usize>,
    pub learning_rate: Option<f64>,
    pub batch_size: Option<usize>,
    pub seed: Option<u64>,
    pub k: Option<usize>,
    pub omega: Option<f64>,
    pub alpha: Option<f64>,
    pub uncertainty_mode: Option<UncertaintyMode>,
    pub combine_mode: Option<CombineMode>,
    pub embed_side: Option<HeadSide>,
    pub provider: Option<ProviderKind>,
    pub lambda: Option<f64>,
    pub bench_seeds: Option<usize>,
    pub alphas: Option<Vec<f64>>,
}

impl Overrides {
    /// `seed` sets every seed in the config (trainer, clustering, synthetic
    /// data and bench base seed).
    pub fn apply(&self, cfg: &mut RunConfig) {
        macro_rules! set {
            ($src:expr => $dst:expr) => {
                if let Some(v) = $src.clone() {
                    $dst = v;
                }
            };
        }
        set!(self.output_dir => cfg.paths.output_dir);
        if self.features.is_some() {
            cfg.paths.features = self.features.clone();
        }
        if self.manifest.is_some() {
            cfg.paths.manifest = self.manifest.clone();
        }
        if self.checkpoint.is_some() {
            cfg.paths.checkpoint = self.checkpoint.clone();
        }
        if self.threads.is_some() {
            cfg.threads = self.threads;
        }
        set!(self.epochs => cfg.trainer.epochs);
        set!(self.learning_rate => cfg.trainer.learning_rate);
        set!(self.batch_size => cfg.trainer.batch_size);
        if let Some(s) = self.seed {
            cfg.trainer.seed = s;
            cfg.clustering.seed = s;
            cfg.synthetic.seed = s;
            cfg.bench.base_seed = s;
        }
        set!(self.k => cfg.clustering.k);
        set!(self.omega => cfg.scoring.omega);
        set!(self.alpha => cfg.scoring.alpha_percent);
        set!(self.uncertainty_mode => cfg.scoring.uncertainty_mode);
        set!(self.combine_mode => cfg.scoring.combine_mode);
        set!(self.embed_side => cfg.embed_side);
        set!(self.provider => cfg.provider.kind);
        set!(self.lambda => cfg.provider.lambda);
        set!(self.bench_seeds => cfg.bench.seeds);
        set!(self.alphas => cfg.bench.alphas);
    }
}

/// Defaults, then the config file, then the output-dir environment
/// variable, then flags. The result is validated.
pub fn resolve_config(
    config_path: Option<&Path>,
    env_output_dir: Option<PathBuf>,
    overrides: &Overrides,
) -> Result<RunConfig, CliError> {
    let mut cfg = match config_path {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| CliError::io(p, e))?;
            serde_json::from_str(&text).map_err(|e| DataError::Parse(e.to_string()))?
        }
        None => RunConfig::default(),
    };
    if let Some(dir) = env_output_dir {
        cfg.paths.output_dir = dir;
    }
    overrides.apply(&mut cfg);
    cfg.validate()?;
    Ok(cfg)
}

/// Runs `f` on a pool capped at `threads` workers (all cores if `None`).
pub fn with_threads<T: Send>(
    threads: Option<usize>,
    f: impl FnOnce() -> T + Send,
) -> Result<T, CliError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| CliError::Threads(e.to_string()))?;
    Ok(pool.install(f))
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

/// Creates `path` and hands a buffered writer to `write`.
fn write_file(
    path: &Path,
    write: impl FnOnce(&mut BufWriter<fs::File>) -> io::Result<()>,
) -> Result<(), CliError> {
    let file = fs::File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut w = BufWriter::new(file);
    write(&mut w)
        .and_then(|_| w.flush())
        .map_err(|e| CliError::io(path, e))
}

fn say(out: &mut dyn Write, line: impl AsRef<str>) -> Result<(), CliError> {
    writeln!(out, "{}", line.as_ref()).map_err(|e| CliError::io(Path::new("<stdout>"), e))
}

/// Feature matrix and manifest named in the config.
pub fn load_inputs(cfg: &RunConfig) -> Result<(FeatureMatrix, SampleManifest), CliError> {
    let (Some(fpath), Some(mpath)) = (&cfg.paths.features, &cfg.paths.manifest) else {
        return Err(CliError::Config(
            "paths.features and paths.manifest are required (run `gen` to create a synthetic set)"
                .into(),
        ));
    };
    let features = dataio::read_features(fpath)?;
    let manifest = dataio::load_manifest(mpath)?;
    manifest.validate_rows(features.n_rows())?;
    Ok((features, manifest))
}

/// Pool pairs from the configured reconstruction provider.
pub fn build_pairs(
    cfg: &RunConfig,
    features: &FeatureMatrix,
    manifest: &SampleManifest,
) -> Result<PairedFeatures, CliError> {
    let pairs = match cfg.provider.kind {
        ProviderKind::External => pool_pairs(manifest, features, PairSource::External)?,
        ProviderKind::Proxy => {
            let proxy = pipeline::fit_proxy(
                manifest,
                features,
                &cfg.provider.source_domain,
                cfg.provider.lambda,
            )?;
            pool_pairs(manifest, features, PairSource::Provider(&proxy))?
        }
    };
    Ok(pairs)
}

/// Writes a seeded synthetic set: `features.bin`, `manifest.json` and the
/// hidden pool labels in `pool_labels.json`. With `with_recon`, proxy
/// reconstructions are appended as `recon_row`s for the external provider.
pub fn cmd_gen(cfg: &RunConfig, with_recon: bool, out: &mut dyn Write) -> Result<(), CliError> {
    let mut data = bench::generate(&cfg.synthetic).map_err(Error::from)?;
    if with_recon {
        let proxy = pipeline::fit_proxy(
            &data.manifest,
            &data.features,
            bench::SOURCE_DOMAIN,
            cfg.provider.lambda,
        )?;
        data.attach_reconstructions(&proxy).map_err(Error::from)?;
    }
    let dir = &cfg.paths.output_dir;
    ensure_dir(dir)?;
    let fpath = dir.join("features.bin");
    let mpath = dir.join("manifest.json");
    let lpath = dir.join("pool_labels.json");
    dataio::write_features(&data.features, &fpath)?;
    dataio::save_manifest(&data.manifest, &mpath)?;
    let labels = serde_json::to_string_pretty(&data.pool_labels).expect("labels serialize");
    fs::write(&lpath, labels).map_err(|e| CliError::io(&lpath, e))?;
    say(
        out,
        format!(
            "wrote {} rows x {} features, {} samples ({} pool) to {}",
            data.features.n_rows(),
            data.features.dim(),
            data.manifest.samples.len(),
            data.pool_labels.len(),
            dir.display()
        ),
    )
}

/// Trains the heads on the pool pairs, prints `epoch,loss` lines and writes
/// the checkpoint.
pub fn cmd_train(cfg: &RunConfig, out: &mut dyn Write) -> Result<TrainedHead, CliError> {
    let (features, manifest) = load_inputs(cfg)?;
    let pairs = build_pairs(cfg, &features, &manifest)?;
    say(out, "epoch,loss")?;
    let mut io_err = None;
    let head = train_heads_with(&pairs, &cfg.trainer, |epoch, loss| {
        if io_err.is_none() {
            io_err = writeln!(out, "{},{}", epoch, format_real(loss)).err();
        }
    })
    .map_err(Error::from)?;
    if let Some(e) = io_err {
        return Err(CliError::io(Path::new("<stdout>"), e));
    }
    let ckpt = cfg.checkpoint_path();
    if let Some(parent) = ckpt.parent().filter(|p| !p.as_os_str().is_empty()) {
        ensure_dir(parent)?;
    }
    dataio::write_head_checkpoint(&head, &ckpt)?;
    Ok(head)
}

fn write_embeddings_csv<W: Write>(
    w: &mut W,
    pairs: &PairedFeatures,
    outcome: &SelectionOutcome,
) -> io::Result<()> {
    let dim = outcome.model.dim();
    write!(w, "id,domain,cluster")?;
    for j in 0..dim {
        write!(w, ",z{j}")?;
    }
    writeln!(w)?;
    for (i, z) in outcome.embeddings.originals.iter().enumerate() {
        write!(
            w,
            "{},{},{}",
            pairs.ids[i], pairs.domains[i], outcome.model.assignments[i]
        )?;
        for v in z.as_slice() {
            write!(w, ",{}", format_real(*v))?;
        }
        writeln!(w)?;
    }
    Ok(())
}

/// Embeds, clusters and ranks the pool with a trained head. Writes
/// `selection.csv`, `embeddings.csv` and `clusters.ckpt`.
pub fn cmd_select(cfg: &RunConfig, out: &mut dyn Write) -> Result<SelectionOutcome, CliError> {
    let head = dataio::read_head_checkpoint(cfg.checkpoint_path(), Some(cfg.trainer.d_embed))?;
    let (features, manifest) = load_inputs(cfg)?;
    let pairs = build_pairs(cfg, &features, &manifest)?;
    let outcome = pipeline::select_pool(
        &head,
        &pairs,
        cfg.embed_side,
        &cfg.clustering,
        &cfg.scoring,
    )?;
    let dir = &cfg.paths.output_dir;
    ensure_dir(dir)?;
    write_file(&dir.join("selection.csv"), |w| outcome.report.write_csv(w))?;
    write_file(&dir.join("embeddings.csv"), |w| {
        write_embeddings_csv(w, &pairs, &outcome)
    })?;
    dataio::write_cluster_checkpoint(&outcome.model, dir.join("clusters.ckpt"))?;
    say(
        out,
        format!(
            "selected {} of {} pool samples (alpha {}%) -> {}",
            outcome.report.n_selected(),
            outcome.report.pool_size,
            format_real(cfg.scoring.alpha_percent),
            dir.join("selection.csv").display()
        ),
    )?;
    Ok(outcome)
}

fn print_summary(result: &BenchResult, out: &mut dyn Write) -> Result<(), CliError> {
    say(out, format!("{:<16} {:>6} {:>10} {:>10}", "strategy", "alpha", "mean", "std"))?;
    for c in &result.cells {
        say(
            out,
            format!(
                "{:<16} {:>6} {:>10.4} {:>10.4}",
                c.strategy,
                format_real(c.alpha),
                c.mean,
                c.std
            ),
        )?;
    }
    for w in result.monotonicity_warnings() {
        say(out, format!("warning: {w}"))?;
    }
    Ok(())
}

/// Accuracy-versus-budget sweep. Writes `bench_runs.csv` and
/// `bench_summary.csv`; with `ablate_k`, also `ablation_runs.csv` and
/// `ablation_summary.csv` for the pipeline at each cluster count.
pub fn cmd_bench(
    cfg: &RunConfig,
    ablate_k: Option<&[usize]>,
    out: &mut dyn Write,
) -> Result<BenchResult, CliError> {
    let setup = BenchSetup::from_run_config(cfg);
    let result = bench::run_bench(&setup)?;
    let dir = &cfg.paths.output_dir;
    ensure_dir(dir)?;
    write_file(&dir.join("bench_runs.csv"), |w| result.write_runs_csv(w))?;
    write_file(&dir.join("bench_summary.csv"), |w| result.write_summary_csv(w))?;
    print_summary(&result, out)?;
    if let Some(ks) = ablate_k {
        let ablation = bench::cluster_ablation(&setup, ks)?;
        write_file(&dir.join("ablation_runs.csv"), |w| ablation.write_runs_csv(w))?;
        write_file(&dir.join("ablation_summary.csv"), |w| {
            ablation.write_summary_csv(w)
        })?;
        print_summary(&ablation, out)?;
    }
    Ok(result)
}

/// Domain-bias reports before and after proxy homogenization.
#[derive(Debug, Clone, PartialEq)]
pub struct BiasComparison {
    pub original: DomainBiasReport,
    pub homogenized: DomainBiasReport,
}

fn write_bias_csv<W: Write>(w: &mut W, cmp: &BiasComparison) -> io::Result<()> {
    writeln!(w, "domain,stage,n,mean,std,bias")?;
    for (stage, report) in [("original", &cmp.original), ("homogenized", &cmp.homogenized)] {
        for s in std::iter::once(&report.source).chain(&report.targets) {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                s.domain,
                stage,
                s.n,
                format_real(s.mean),
                format_real(s.std),
                format_real(s.bias)
            )?;
        }
    }
    Ok(())
}

/// Cosine-to-source-centroid statistics per domain, on the raw pool rows
/// and on their proxy reconstructions.
pub fn domain_bias_comparison(
    cfg: &RunConfig,
    features: &FeatureMatrix,
    manifest: &SampleManifest,
) -> Result<BiasComparison, CliError> {
    let src_name = &cfg.provider.source_domain;
    let source = pipeline::source_rows(manifest, features, src_name)?;
    let mut targets = pipeline::rows_by_domain(manifest, features, Role::Pool)?;
    targets.remove(src_name);
    let proxy = pipeline::fit_proxy(manifest, features, src_name, cfg.provider.lambda)?;
    let mut homogenized = std::collections::BTreeMap::new();
    for (name, m) in &targets {
        let rows = (0..m.n_rows())
            .map(|i| {
                use adaptation_core::reconproxy::ReconstructionProvider;
                proxy.reconstruct(&m.row_f64(i), name)
            })
            .collect::<Result<Vec<_>, _>>()
            .map_err(Error::from)?;
        homogenized.insert(name.clone(), FeatureMatrix::from_rows(&rows, m.dim())?);
    }
    let bias = |t| reconproxy::domain_bias(src_name, &source, t).map_err(Error::from);
    Ok(BiasComparison {
        original: bias(&targets)?,
        homogenized: bias(&homogenized)?,
    })
}

/// Writes `domain_bias.csv`, `similarities.csv` and
/// `similarities_homogenized.csv`. Uses the configured inputs when given,
/// otherwise the configured synthetic set.
pub fn cmd_analyze(cfg: &RunConfig, out: &mut dyn Write) -> Result<BiasComparison, CliError> {
    let (features, manifest) = if cfg.paths.features.is_some() || cfg.paths.manifest.is_some() {
        load_inputs(cfg)?
    } else {
        let data = bench::generate(&cfg.synthetic).map_err(Error::from)?;
        (data.features, data.manifest)
    };
    let cmp = domain_bias_comparison(cfg, &features, &manifest)?;
    let dir = &cfg.paths.output_dir;
    ensure_dir(dir)?;
    write_file(&dir.join("domain_bias.csv"), |w| write_bias_csv(w, &cmp))?;
    write_file(&dir.join("similarities.csv"), |w| {
        cmp.original.write_similarities_csv(w)
    })?;
    write_file(&dir.join("similarities_homogenized.csv"), |w| {
        cmp.homogenized.write_similarities_csv(w)
    })?;
    say(out, format!("{:<12} {:>12} {:>12}", "domain", "bias", "homogenized"))?;
    for (o, h) in cmp.original.targets.iter().zip(&cmp.homogenized.targets) {
        say(
            out,
            format!("{:<12} {:>12.4} {:>12.4}", o.domain, o.bias, h.bias),
        )?;
    }
    Ok(cmp)
}

/// Every config field with its default, shown by `--help`.
pub fn config_reference() -> String {
    let d = RunConfig::default();
    let t = &d.trainer;
    let b = &d.bench;
    let s = &d.synthetic;
    let alphas: Vec<String> = b.alphas.iter().map(|a| format_real(*a)).collect();
    let strategies: Vec<&str> = b.strategies.iter().map(|s| s.name()).collect();
    format!(
        "\
CONFIG FILE (JSON; every field optional, flags override the file):
  paths.features          feature file (ADAPTFV1)            [none]
  paths.manifest          sample manifest (JSON)             [none]
  paths.output_dir        artifact directory                 [{out}]  (env {env})
  paths.checkpoint        head checkpoint                    [<output_dir>/head.ckpt]
  trainer.epochs          training epochs                    [{epochs}]
  trainer.learning_rate   initial Adam learning rate         [{lr}]
  trainer.lr_floor        cosine-annealing floor             [{floor}]
  trainer.batch_size      pairs per step                     [{bs}]
  trainer.ema_momentum    teacher EMA momentum (1 = frozen)  [{ema}]
  trainer.seed            init and shuffle seed              [{tseed}]
  trainer.loss.m          angular scaling factor             [{m}]
  trainer.loss.eps_clamp  cosine clamp                       [{eps}]
  trainer.hidden_dim      head hidden width                  [{hid}]
  trainer.d_embed         embedding dimension                [{de}]
  clustering.k            spherical k-means clusters         [{k}]
  clustering.seed         k-means++ seed                     [{cseed}]
  clustering.max_iters    iteration cap                      [{iters}]
  clustering.tol          objective improvement to stop      [{tol}]
  scoring.omega           representativeness weight          [{omega}]
  scoring.uncertainty_mode  pairwise_min | range             [pairwise_min]
  scoring.combine_mode    raw | rank                         [raw]
  scoring.alpha_percent   annotation budget, % of pool       [{alpha}]
  embed_side              student | teacher                  [student]
  provider.kind           proxy | external                   [proxy]
  provider.lambda         proxy blend weight                 [{lambda}]
  provider.source_domain  labeled source domain name         [{src}]
  synthetic.n_domains     target domains                     [{nd}]
  synthetic.samples_per_domain                               [{spd}]
  synthetic.dim           feature dimension                  [{sdim}]
  synthetic.shift_magnitude  target mean shift               [{shift}]
  synthetic.shift_alignment  shift cosine with class axis    [{align}]
  synthetic.class_separation distance between class means    [{sep}]
  synthetic.label_noise   label flip rate                    [{noise}]
  synthetic.feature_offset  common activation level          [{offset}]
  synthetic.seed          generator seed                     [{sseed}]
  bench.seeds             paired seeds per cell              [{bseeds}]
  bench.base_seed         first seed                         [{bbase}]
  bench.alphas            budgets, % of pool                 [{alphas}]
  bench.strategies        compared strategies                [{strategies}]
  bench.trainer.*         head training inside the bench (same keys as trainer)
  bench.classifier.pretrain_iters  source pretraining steps  [{pre}]
  bench.classifier.finetune_iters  fine-tuning steps         [{ft}]
  bench.classifier.learning_rate   gradient step size        [{clr}]
  bench.classifier.l2     weight decay                       [{l2}]
  threads                 worker threads (results identical) [all cores]
",
        out = d.paths.output_dir.display(),
        env = OUTPUT_DIR_ENV,
        epochs = t.epochs,
        lr = format_real(t.learning_rate),
        floor = format_real(t.lr_floor),
        bs = t.batch_size,
        ema = format_real(t.ema_momentum),
        tseed = t.seed,
        m = format_real(t.loss.m),
        eps = format_real(t.loss.eps_clamp),
        hid = t.hidden_dim,
        de = t.d_embed,
        k = d.clustering.k,
        cseed = d.clustering.seed,
        iters = d.clustering.max_iters,
        tol = format_real(d.clustering.tol),
        omega = format_real(d.scoring.omega),
        alpha = format_real(d.scoring.alpha_percent),
        lambda = format_real(d.provider.lambda),
        src = d.provider.source_domain,
        nd = s.n_domains,
        spd = s.samples_per_domain,
        sdim = s.dim,
        shift = format_real(s.shift_magnitude),
        align = format_real(s.shift_alignment),
        sep = format_real(s.class_separation),
        noise = format_real(s.label_noise),
        offset = format_real(s.feature_offset),
        sseed = s.seed,
        bseeds = b.seeds,
        bbase = b.base_seed,
        alphas = alphas.join(","),
        strategies = strategies.join(","),
        pre = b.classifier.pretrain_iters,
        ft = b.classifier.finetune_iters,
        clr = format_real(b.classifier.learning_rate),
        l2 = format_real(b.classifier.l2),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn leaf_keys(v: &serde_json::Value, prefix: &str, out: &mut Vec<String>) {
        match v {
            serde_json::Value::Object(map) => {
                for (k, child) in map {
                    let key = if prefix.is_empty() {
                        k.clone()
                    } else {
                        format!("{prefix}.{k}")
                    };
                    leaf_keys(child, &key, out);
                }
            }
            _ => out.push(prefix.to_string()),
        }
    }

    #[test]
    fn reference_lists_every_field() {
        let json = serde_json::to_value(RunConfig::default()).unwrap();
        let mut keys = Vec::new();
        leaf_keys(&json, "", &mut keys);
        let text = config_reference();
        for key in keys {
            let key = key.replace("bench.trainer.", "trainer.");
            assert!(text.contains(&key), "missing {key}");
        }
    }

    #[test]
    fn overrides_win_over_file_and_env() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cfg.json");
        fs::write(&path, r#"{"scoring": {"alpha_percent": 30}, "clustering": {"k": 3}}"#).unwrap();
        let cfg = resolve_config(Some(&path), Some("env_out".into()), &Overrides::default()).unwrap();
        assert_eq!(cfg.scoring.alpha_percent, 30.0);
        assert_eq!(cfg.clustering.k, 3);
        assert_eq!(cfg.paths.output_dir, PathBuf::from("env_out"));
        let o = Overrides {
            alpha: Some(50.0),
            output_dir: Some("flag_out".into()),
            seed: Some(9),
            ..Default::default()
        };
        let cfg = resolve_config(Some(&path), Some("env_out".into()), &o).unwrap();
        assert_eq!(cfg.scoring.alpha_percent, 50.0);
        assert_eq!(cfg.paths.output_dir, PathBuf::from("flag_out"));
        assert_eq!((cfg.trainer.seed, cfg.clustering.seed, cfg.synthetic.seed), (9, 9, 9));
    }

    #[test]
    fn invalid_override_rejected_with_config_code() {
        let o = Overrides {
            alpha: Some(0.0),
            ..Default::default()
        };
        let err = resolve_config(None, None, &o).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn exit_codes_are_distinct_per_class() {
        use adaptation_core::bench::BenchError;
        use adaptation_core::clustering::ClusterError;
        use adaptation_core::selection::SelectionError;
        use adaptation_core::tinynet::TrainError;
        let errors: Vec<CliError> = vec![
            CliError::Config("x".into()),
            DataError::Io { path: "p".into(), message: "m".into() }.into(),
            DataError::BadMagic.into(),
            Error::MissingReconPair("a".into()).into(),
            Error::Train(TrainError::EmptyTrainingSet).into(),
            Error::Cluster(ClusterError::InvalidK).into(),
            Error::Selection(SelectionError::EmptyPool).into(),
            Error::MissingSource("s".into()).into(),
            Error::Bench(BenchError::EmptySelection).into(),
            Error::Geometry(adaptation_core::GeometryError::EmptyBatch).into(),
        ];
        let mut codes: Vec<i32> = errors.iter().map(|e| e.exit_code()).collect();
        assert!(codes.iter().all(|&c| c != 0));
        codes.sort_unstable();
        codes.dedup();
        assert_eq!(codes.len(), errors.len());
    }
}
