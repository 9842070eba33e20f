//! Projection head, optimizer and the teacher/student alignment trainer.

mod mlp;
mod optim;
mod trainer;

pub use mlp::{ForwardCache, MlpParams};
pub use optim::{cosine_annealing, ema_update, Adam, ADAM_BETA1, ADAM_BETA2, ADAM_EPS};
pub use trainer::{
    embed_all, train_heads, train_heads_with, EmbeddingSet, HeadSide, TrainError, TrainedHead,
    Trainer, TrainerConfig,
};
