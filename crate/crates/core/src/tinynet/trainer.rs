use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::mlp::MlpParams;
use super::optim::{cosine_annealing, ema_update, Adam};
use crate::dataio::FeatureMatrix;
use crate::geometry::{self, GeometryError, LossConfig, UnitEmbedding, DEFAULT_D_EMBED};
use crate::pairs::PairedFeatures;

pub type EmbeddingSet = Vec<UnitEmbedding>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TrainError {
    #[error("invalid trainer config: {0}")]
    InvalidConfig(String),
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("non-finite loss at epoch {epoch}")]
    NonFiniteLoss { epoch: usize },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainerConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    /// Learning rate reached by cosine annealing at the final epoch.
    pub lr_floor: f64,
    pub batch_size: usize,
    /// 1.0 freezes the teacher at its initial copy of the student.
    pub ema_momentum: f64,
    pub seed: u64,
    pub loss: LossConfig,
    pub hidden_dim: usize,
    pub d_embed: usize,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        Self {
            epochs: 200,
            learning_rate: 1e-4,
            lr_floor: 0.0,
            batch_size: 32,
            ema_momentum: 0.99,
            seed: 0,
            loss: LossConfig::default(),
            hidden_dim: 512,
            d_embed: DEFAULT_D_EMBED,
        }
    }
}

impl TrainerConfig {
    /// Short-schedule settings for small synthetic pools: a 50-epoch run with
    /// a larger step, a nonzero annealing floor and a faster-tracking
    /// teacher. The module defaults barely move the loss in 50 epochs.
    pub fn desk_scale() -> Self {
        Self {
            epochs: 50,
            learning_rate: 1e-3,
            lr_floor: 1e-4,
            ema_momentum: 0.9,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |msg: String| Err(TrainError::InvalidConfig(msg));
        if self.epochs < 1 {
            return bad("epochs must be >= 1".into());
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning_rate must be positive, got {}", self.learning_rate));
        }
        if !(self.lr_floor >= 0.0 && self.lr_floor <= self.learning_rate) {
            return bad(format!(
                "lr_floor must lie in [0, learning_rate], got {}",
                self.lr_floor
            ));
        }
        if self.batch_size < 1 {
            return bad("batch_size must be >= 1".into());
        }
        if !(0.0..=1.0).contains(&self.ema_momentum) {
            return bad(format!("ema_momentum must lie in [0, 1], got {}", self.ema_momentum));
        }
        if self.hidden_dim < 1 {
            return bad("hidden_dim must be >= 1".into());
        }
        if self.d_embed < 2 {
            return bad(format!("d_embed must be >= 2, got {}", self.d_embed));
        }
        self.loss
            .validate()
            .map_err(|e| TrainError::InvalidConfig(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedHead {
    pub student: MlpParams,
    pub teacher: MlpParams,
    pub loss_history: Vec<f64>,
    pub config: TrainerConfig,
}

impl TrainedHead {
    pub fn input_dim(&self) -> usize {
        self.student.input_dim
    }

    pub fn d_embed(&self) -> usize {
        self.student.output_dim
    }

    pub fn params(&self, side: HeadSide) -> &MlpParams {
        match side {
            HeadSide::Student => &self.student,
            HeadSide::Teacher => &self.teacher,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HeadSide {
    #[default]
    Student,
    Teacher,
}

/// Teacher/student state. The teacher embeds originals, the student embeds
/// reconstructions; only the student receives gradients.
#[derive(Debug, Clone)]
pub struct Trainer {
    cfg: TrainerConfig,
    student: MlpParams,
    teacher: MlpParams,
    adam: Adam,
    rng: ChaCha8Rng,
    history: Vec<f64>,
}

impl Trainer {
    pub fn new(input_dim: usize, cfg: TrainerConfig) -> Result<Self, TrainError> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let student = MlpParams::init(input_dim, cfg.hidden_dim, cfg.d_embed, &mut rng);
        let teacher = student.clone();
        let adam = Adam::new(&student);
        Ok(Self {
            cfg,
            student,
            teacher,
            adam,
            rng,
            history: Vec::new(),
        })
    }

    pub fn student(&self) -> &MlpParams {
        &self.student
    }

    pub fn teacher(&self) -> &MlpParams {
        &self.teacher
    }

    pub fn config(&self) -> &TrainerConfig {
        &self.cfg
    }

    /// Embeddings and loss for one batch without updating anything.
    pub fn batch_loss(&self, pairs: &PairedFeatures, batch: &[usize]) -> Result<f64, TrainError> {
        let mut t = Vec::with_capacity(batch.len());
        let mut s = Vec::with_capacity(batch.len());
        for &i in batch {
            t.push(self.teacher.forward(&pairs.originals.row_f64(i))?);
            s.push(self.student.forward(&pairs.reconstructions.row_f64(i))?);
        }
        Ok(geometry::angular_loss(&t, &s, &self.cfg.loss)?)
    }

    /// One Adam step on `batch` followed by the EMA teacher update. Returns
    /// the batch loss measured before the step.
    pub fn step(
        &mut self,
        pairs: &PairedFeatures,
        batch: &[usize],
        lr: f64,
    ) -> Result<f64, TrainError> {
        if batch.is_empty() {
            return Err(TrainError::EmptyTrainingSet);
        }
        let mut teacher_emb = Vec::with_capacity(batch.len());
        let mut caches = Vec::with_capacity(batch.len());
        let mut student_emb = Vec::with_capacity(batch.len());
        for &i in batch {
            teacher_emb.push(self.teacher.forward(&pairs.originals.row_f64(i))?);
            let cache = self.student.forward_cached(&pairs.reconstructions.row_f64(i))?;
            student_emb.push(geometry::normalize(&cache.output_pre)?);
            caches.push(cache);
        }
        let loss = geometry::angular_loss(&teacher_emb, &student_emb, &self.cfg.loss)?;

        let mut grads = MlpParams::zeros(
            self.student.input_dim,
            self.student.hidden_dim,
            self.student.output_dim,
        );
        let scale = 1.0 / batch.len() as f64;
        for (t, cache) in teacher_emb.iter().zip(&caches) {
            let (_, d_out) =
                geometry::angular_loss_grad(t.as_slice(), &cache.output_pre, &self.cfg.loss)?;
            let d_out: Vec<f64> = d_out.into_iter().map(|g| g * scale).collect();
            self.student.backward(cache, &d_out, &mut grads);
        }
        self.adam.step(&mut self.student, &grads, lr);
        ema_update(&mut self.teacher, &self.student, self.cfg.ema_momentum);
        Ok(loss)
    }

    /// Shuffles, walks every batch once (last partial batch kept) and
    /// records the per-sample mean loss of the epoch.
    pub fn run_epoch(&mut self, pairs: &PairedFeatures, epoch: usize) -> Result<f64, TrainError> {
        if pairs.is_empty() {
            return Err(TrainError::EmptyTrainingSet);
        }
        let lr = cosine_annealing(
            self.cfg.learning_rate,
            self.cfg.lr_floor,
            epoch,
            self.cfg.epochs,
        );
        let mut order: Vec<usize> = (0..pairs.len()).collect();
        order.shuffle(&mut self.rng);
        let mut total = 0.0;
        for batch in order.chunks(self.cfg.batch_size) {
            let loss = self.step(pairs, batch, lr)?;
            if !loss.is_finite() {
                return Err(TrainError::NonFiniteLoss { epoch });
            }
            total += loss * batch.len() as f64;
        }
        if !self.student.is_finite() {
            return Err(TrainError::NonFiniteLoss { epoch });
        }
        let mean = total / pairs.len() as f64;
        self.history.push(mean);
        Ok(mean)
    }

    pub fn finish(self) -> TrainedHead {
        TrainedHead {
            student: self.student,
            teacher: self.teacher,
            loss_history: self.history,
            config: self.cfg,
        }
    }
}

/// Trains the student on the pool pairs and returns both heads.
pub fn train_heads(pairs: &PairedFeatures, cfg: &TrainerConfig) -> Result<TrainedHead, TrainError> {
    train_heads_with(pairs, cfg, |_, _| {})
}

/// As [`train_heads`], calling `on_epoch(epoch, loss)` after each epoch.
pub fn train_heads_with<F: FnMut(usize, f64)>(
    pairs: &PairedFeatures,
    cfg: &TrainerConfig,
    mut on_epoch: F,
) -> Result<TrainedHead, TrainError> {
    if pairs.is_empty() {
        return Err(TrainError::EmptyTrainingSet);
    }
    let mut trainer = Trainer::new(pairs.dim(), cfg.clone())?;
    for epoch in 0..cfg.epochs {
        let loss = trainer.run_epoch(pairs, epoch)?;
        on_epoch(epoch, loss);
    }
    Ok(trainer.finish())
}

/// Embeds every row with the chosen frozen head, preserving row order.
pub fn embed_all(
    head: &TrainedHead,
    features: &FeatureMatrix,
    side: HeadSide,
) -> Result<EmbeddingSet, TrainError> {
    let params = head.params(side);
    if !features.is_empty() && features.dim() != params.input_dim {
        return Err(GeometryError::DimensionMismatch {
            expected: params.input_dim,
            got: features.dim(),
        }
        .into());
    }
    (0..features.n_rows())
        .into_par_iter()
        .map(|i| params.forward(&features.row_f64(i)).map_err(TrainError::from))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_pairs(n: usize, d: usize, identical: bool) -> PairedFeatures {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        use rand::Rng;
        let orig: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..d).map(|_| rng.random_range(0.0..1.0)).collect())
            .collect();
        let recon: Vec<Vec<f64>> = if identical {
            orig.clone()
        } else {
            orig.iter()
                .map(|r| r.iter().map(|x| x + rng.random_range(-0.3..0.3)).collect())
                .collect()
        };
        PairedFeatures::new(
            (0..n).map(|i| format!("s{i:03}")).collect(),
            vec!["t".into(); n],
            FeatureMatrix::from_rows(&orig, d).unwrap(),
            FeatureMatrix::from_rows(&recon, d).unwrap(),
        )
        .unwrap()
    }

    fn small_cfg() -> TrainerConfig {
        TrainerConfig {
            epochs: 3,
            hidden_dim: 16,
            d_embed: 8,
            batch_size: 4,
            ..Default::default()
        }
    }

    #[test]
    fn zero_epochs_rejected() {
        let cfg = TrainerConfig {
            epochs: 0,
            ..small_cfg()
        };
        assert!(matches!(
            train_heads(&tiny_pairs(5, 4, false), &cfg),
            Err(TrainError::InvalidConfig(_))
        ));
    }

    #[test]
    fn identical_pairs_stay_at_floor() {
        let cfg = small_cfg();
        let floor = (cfg.loss.m * (1.0 - cfg.loss.eps_clamp).acos()).powi(2);
        let head = train_heads(&tiny_pairs(10, 4, true), &cfg).unwrap();
        assert_eq!(head.loss_history.len(), cfg.epochs);
        for l in head.loss_history {
            assert!(l <= floor * (1.0 + 1e-9), "{l} > {floor}");
        }
    }

    #[test]
    fn one_step_ema_contract() {
        let pairs = tiny_pairs(6, 4, false);
        let cfg = small_cfg();
        let mut trainer = Trainer::new(4, cfg.clone()).unwrap();
        let teacher0 = trainer.teacher().clone();
        assert_eq!(&teacher0, trainer.student());
        trainer.step(&pairs, &[0, 1, 2], 1e-3).unwrap();
        let student1 = trainer.student().clone();
        for (t1, (t0, s1)) in trainer
            .teacher()
            .tensors()
            .iter()
            .zip(teacher0.tensors().iter().zip(student1.tensors()))
        {
            for i in 0..t1.len() {
                let expect = cfg.ema_momentum * t0[i] + (1.0 - cfg.ema_momentum) * s1[i];
                assert!((t1[i] - expect).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn step_loss_equals_angular_loss() {
        let pairs = tiny_pairs(6, 4, false);
        let mut trainer = Trainer::new(4, small_cfg()).unwrap();
        let batch = [5, 2, 3];
        let expected = trainer.batch_loss(&pairs, &batch).unwrap();
        let got = trainer.step(&pairs, &batch, 1e-3).unwrap();
        assert_eq!(expected.to_bits(), got.to_bits());
    }

    #[test]
    fn deterministic_under_seed() {
        let pairs = tiny_pairs(9, 4, false);
        let a = train_heads(&pairs, &small_cfg()).unwrap();
        let b = train_heads(&pairs, &small_cfg()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn embed_all_edge_cases() {
        let pairs = tiny_pairs(4, 4, false);
        let head = train_heads(&pairs, &small_cfg()).unwrap();
        let empty = FeatureMatrix::empty(4).unwrap();
        assert!(embed_all(&head, &empty, HeadSide::Student).unwrap().is_empty());

        let row = pairs.originals.row(1).to_vec();
        let mut data = row.clone();
        data.extend_from_slice(&row);
        let dup = FeatureMatrix::new(2, 4, data).unwrap();
        let e = embed_all(&head, &dup, HeadSide::Student).unwrap();
        assert_eq!(e[0], e[1]);
        for z in &e {
            assert!((geometry::l2_norm(z.as_slice()) - 1.0).abs() < 1e-6);
        }

        let wrong = FeatureMatrix::new(1, 3, vec![1.0, 2.0, 3.0]).unwrap();
        assert!(embed_all(&head, &wrong, HeadSide::Teacher).is_err());
    }
}
