use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::geometry::{self, GeometryError, UnitEmbedding};

/// Two affine layers with a ReLU between them: `input -> hidden -> embed`.
///
/// Weights are row-major, `w1` is `hidden x input` and `w2` is
/// `embed x hidden`. Inputs are L2-normalized before the first layer so the
/// head only sees feature directions.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub output_dim: usize,
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

/// Intermediate activations kept for backpropagation.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    pub input_unit: Vec<f64>,
    pub hidden_pre: Vec<f64>,
    pub hidden: Vec<f64>,
    pub output_pre: Vec<f64>,
}

impl MlpParams {
    pub fn zeros(input_dim: usize, hidden_dim: usize, output_dim: usize) -> Self {
        Self {
            input_dim,
            hidden_dim,
            output_dim,
            w1: vec![0.0; hidden_dim * input_dim],
            b1: vec![0.0; hidden_dim],
            w2: vec![0.0; output_dim * hidden_dim],
            b2: vec![0.0; output_dim],
        }
    }

    /// Fan-in scaled normal initialization (He for the ReLU layer, LeCun for
    /// the output layer), zero biases.
    pub fn init<R: Rng + ?Sized>(
        input_dim: usize,
        hidden_dim: usize,
        output_dim: usize,
        rng: &mut R,
    ) -> Self {
        let mut p = Self::zeros(input_dim, hidden_dim, output_dim);
        let n1 = Normal::new(0.0, (2.0 / input_dim as f64).sqrt()).unwrap();
        let n2 = Normal::new(0.0, (1.0 / hidden_dim as f64).sqrt()).unwrap();
        p.w1.iter_mut().for_each(|w| *w = n1.sample(rng));
        p.w2.iter_mut().for_each(|w| *w = n2.sample(rng));
        p
    }

    pub fn same_shape(&self, other: &MlpParams) -> bool {
        self.input_dim == other.input_dim
            && self.hidden_dim == other.hidden_dim
            && self.output_dim == other.output_dim
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|x| x.is_finite()))
    }

    pub fn tensors(&self) -> [&Vec<f64>; 4] {
        [&self.w1, &self.b1, &self.w2, &self.b2]
    }

    pub fn tensors_mut(&mut self) -> [&mut Vec<f64>; 4] {
        [&mut self.w1, &mut self.b1, &mut self.w2, &mut self.b2]
    }

    pub fn n_params(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn fill_zero(&mut self) {
        for t in self.tensors_mut() {
            t.iter_mut().for_each(|x| *x = 0.0);
        }
    }

    pub fn forward(&self, features: &[f64]) -> Result<UnitEmbedding, GeometryError> {
        let cache = self.forward_cached(features)?;
        geometry::normalize(&cache.output_pre)
    }

    pub fn forward_cached(&self, features: &[f64]) -> Result<ForwardCache, GeometryError> {
        if features.len() != self.input_dim {
            return Err(GeometryError::DimensionMismatch {
                expected: self.input_dim,
                got: features.len(),
            });
        }
        let input_unit = geometry::normalize(features)?.into_inner();

        let mut hidden_pre = self.b1.clone();
        for (j, hp) in hidden_pre.iter_mut().enumerate() {
            let row = &self.w1[j * self.input_dim..(j + 1) * self.input_dim];
            *hp += geometry::dot(row, &input_unit);
        }
        let hidden: Vec<f64> = hidden_pre.iter().map(|&x| x.max(0.0)).collect();

        let mut output_pre = self.b2.clone();
        for (k, op) in output_pre.iter_mut().enumerate() {
            let row = &self.w2[k * self.hidden_dim..(k + 1) * self.hidden_dim];
            *op += geometry::dot(row, &hidden);
        }
        Ok(ForwardCache {
            input_unit,
            hidden_pre,
            hidden,
            output_pre,
        })
    }

    /// Accumulates parameter gradients into `grads` given the gradient of the
    /// loss with respect to the pre-normalization output.
    pub fn backward(&self, cache: &ForwardCache, d_output: &[f64], grads: &mut MlpParams) {
        debug_assert_eq!(d_output.len(), self.output_dim);
        let mut d_hidden = vec![0.0; self.hidden_dim];
        for (k, &g) in d_output.iter().enumerate() {
            if g == 0.0 {
                continue;
            }
            grads.b2[k] += g;
            let off = k * self.hidden_dim;
            let w_row = &self.w2[off..off + self.hidden_dim];
            let gw_row = &mut grads.w2[off..off + self.hidden_dim];
            for j in 0..self.hidden_dim {
                gw_row[j] += g * cache.hidden[j];
                d_hidden[j] += g * w_row[j];
            }
        }
        for (j, dh) in d_hidden.into_iter().enumerate() {
            if cache.hidden_pre[j] <= 0.0 {
                continue;
            }
            grads.b1[j] += dh;
            let off = j * self.input_dim;
            for (gw, x) in grads.w1[off..off + self.input_dim]
                .iter_mut()
                .zip(&cache.input_unit)
            {
                *gw += dh * x;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_params_give_zero_vector() {
        let p = MlpParams::zeros(3, 4, 2);
        assert!(matches!(
            p.forward(&[1.0, 2.0, 3.0]),
            Err(GeometryError::ZeroVector { .. })
        ));
    }

    #[test]
    fn identity_head_normalizes() {
        let d = 4;
        let mut p = MlpParams::zeros(d, d, d);
        for i in 0..d {
            p.w1[i * d + i] = 1.0;
            p.w2[i * d + i] = 1.0;
        }
        let v = [0.5, 2.0, 0.0, 1.5];
        let out = p.forward(&v).unwrap();
        let expect = geometry::normalize(&v).unwrap();
        for (a, b) in out.as_slice().iter().zip(expect.as_slice()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn seeded_output_is_unit() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let p = MlpParams::init(6, 16, 8, &mut rng);
        let x: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
        let out = p.forward(&x).unwrap();
        assert!((geometry::l2_norm(out.as_slice()) - 1.0).abs() < 1e-6);
        assert!(matches!(
            p.forward(&x[..5]),
            Err(GeometryError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn backward_matches_finite_differences() {
        // Scalar objective: c . output_pre, whose output gradient is c.
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut p = MlpParams::init(5, 7, 3, &mut rng);
        p.b1.iter_mut().for_each(|b| *b = rng.random_range(-0.1..0.1));
        let x: Vec<f64> = (0..5).map(|_| rng.random_range(-1.0..1.0)).collect();
        let c = [0.3, -1.1, 0.7];
        let objective = |p: &MlpParams| -> f64 {
            geometry::dot(&p.forward_cached(&x).unwrap().output_pre, &c)
        };
        let cache = p.forward_cached(&x).unwrap();
        let mut grads = MlpParams::zeros(5, 7, 3);
        p.backward(&cache, &c, &mut grads);

        let h = 1e-6;
        for t in 0..4 {
            for i in 0..p.tensors()[t].len() {
                let mut plus = p.clone();
                plus.tensors_mut()[t][i] += h;
                let mut minus = p.clone();
                minus.tensors_mut()[t][i] -= h;
                let fd = (objective(&plus) - objective(&minus)) / (2.0 * h);
                let an = grads.tensors()[t][i];
                assert!((fd - an).abs() < 1e-6, "tensor {t} idx {i}: {fd} vs {an}");
            }
        }
    }
}
