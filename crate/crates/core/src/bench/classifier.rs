//! Binary logistic regression trained by full-batch gradient descent.

use serde::{Deserialize, Serialize};

use super::BenchError;
use crate::dataio::FeatureMatrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifierConfig {
    pub pretrain_iters: usize,
    pub finetune_iters: usize,
    pub learning_rate: f64,
    /// L2 penalty on the weights (not the bias).
    pub l2: f64,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        Self {
            pretrain_iters: 300,
            finetune_iters: 100,
            learning_rate: 0.5,
            l2: 1e-3,
        }
    }
}

impl ClassifierConfig {
    pub fn validate(&self) -> Result<(), BenchError> {
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(BenchError::InvalidConfig(format!(
                "classifier.learning_rate must be finite and > 0, got {}",
                self.learning_rate
            )));
        }
        if !(self.l2.is_finite() && self.l2 >= 0.0) {
            return Err(BenchError::InvalidConfig(format!(
                "classifier.l2 must be finite and >= 0, got {}",
                self.l2
            )));
        }
        Ok(())
    }
}

/// Logistic model over standardized inputs. The standardization statistics
/// are fixed at pretraining time and reused for fine-tuning.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearClassifier {
    pub weights: Vec<f64>,
    pub bias: f64,
    center: Vec<f64>,
    scale: Vec<f64>,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl LinearClassifier {
    /// Fits standardization statistics and weights on `x` (source data).
    pub fn pretrain(
        x: &FeatureMatrix,
        labels: &[usize],
        cfg: &ClassifierConfig,
    ) -> Result<Self, BenchError> {
        check_shapes(x, labels)?;
        let (n, d) = (x.n_rows(), x.dim());
        let mut center = vec![0.0; d];
        for i in 0..n {
            for (c, v) in center.iter_mut().zip(x.row(i)) {
                *c += *v as f64;
            }
        }
        center.iter_mut().for_each(|c| *c /= n as f64);
        let mut scale = vec![0.0; d];
        for i in 0..n {
            for ((s, v), c) in scale.iter_mut().zip(x.row(i)).zip(&center) {
                *s += (*v as f64 - c).powi(2);
            }
        }
        for s in scale.iter_mut() {
            let sd = (*s / n as f64).sqrt();
            *s = if sd > 1e-12 { sd } else { 1.0 };
        }
        let mut model = Self {
            weights: vec![0.0; d],
            bias: 0.0,
            center,
            scale,
        };
        model.descend(x, labels, cfg.pretrain_iters, cfg);
        Ok(model)
    }

    /// Continues training from the current weights on `x`.
    pub fn fine_tune(
        &self,
        x: &FeatureMatrix,
        labels: &[usize],
        cfg: &ClassifierConfig,
    ) -> Result<Self, BenchError> {
        check_shapes(x, labels)?;
        if x.dim() != self.weights.len() {
            return Err(BenchError::Shape(format!(
                "classifier expects dimension {}, got {}",
                self.weights.len(),
                x.dim()
            )));
        }
        let mut model = self.clone();
        model.descend(x, labels, cfg.finetune_iters, cfg);
        Ok(model)
    }

    fn standardize(&self, row: &[f32]) -> Vec<f64> {
        row.iter()
            .zip(self.center.iter().zip(&self.scale))
            .map(|(v, (c, s))| (*v as f64 - c) / s)
            .collect()
    }

    fn descend(&mut self, x: &FeatureMatrix, labels: &[usize], iters: usize, cfg: &ClassifierConfig) {
        let n = x.n_rows() as f64;
        let inputs: Vec<Vec<f64>> = x.rows().map(|r| self.standardize(r)).collect();
        for _ in 0..iters {
            let mut gw = vec![0.0; self.weights.len()];
            let mut gb = 0.0;
            for (row, &y) in inputs.iter().zip(labels) {
                let err = sigmoid(self.logit_std(row)) - y as f64;
                gb += err;
                for (g, v) in gw.iter_mut().zip(row) {
                    *g += err * v;
                }
            }
            for (w, g) in self.weights.iter_mut().zip(&gw) {
                *w -= cfg.learning_rate * (g / n + cfg.l2 * *w);
            }
            self.bias -= cfg.learning_rate * gb / n;
        }
    }

    fn logit_std(&self, z: &[f64]) -> f64 {
        self.bias + self.weights.iter().zip(z).map(|(w, v)| w * v).sum::<f64>()
    }

    /// Probability of class 1.
    pub fn probability(&self, row: &[f32]) -> f64 {
        sigmoid(self.logit_std(&self.standardize(row)))
    }

    pub fn predict(&self, row: &[f32]) -> usize {
        usize::from(self.probability(row) >= 0.5)
    }

    pub fn accuracy(&self, x: &FeatureMatrix, labels: &[usize]) -> Result<f64, BenchError> {
        check_shapes(x, labels)?;
        let hits = x
            .rows()
            .zip(labels)
            .filter(|(r, &y)| self.predict(r) == y)
            .count();
        Ok(hits as f64 / labels.len() as f64)
    }
}

fn check_shapes(x: &FeatureMatrix, labels: &[usize]) -> Result<(), BenchError> {
    if x.n_rows() == 0 {
        return Err(BenchError::EmptySelection);
    }
    if x.n_rows() != labels.len() {
        return Err(BenchError::Shape(format!(
            "{} rows but {} labels",
            x.n_rows(),
            labels.len()
        )));
    }
    Ok(())
}
