//! Adam and the cosine-annealing learning-rate schedule.

use super::mlp::MlpParams;

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct Adam {
    beta1: f64,
    beta2: f64,
    eps: f64,
    step: u64,
    first: MlpParams,
    second: MlpParams,
}

impl Adam {
    pub fn new(shape: &MlpParams) -> Self {
        let zeros = MlpParams::zeros(shape.input_dim, shape.hidden_dim, shape.output_dim);
        Self {
            beta1: ADAM_BETA1,
            beta2: ADAM_BETA2,
            eps: ADAM_EPS,
            step: 0,
            first: zeros.clone(),
            second: zeros,
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    pub fn step(&mut self, params: &mut MlpParams, grads: &MlpParams, lr: f64) {
        self.step += 1;
        let bc1 = 1.0 - self.beta1.powi(self.step as i32);
        let bc2 = 1.0 - self.beta2.powi(self.step as i32);
        let (b1, b2, eps) = (self.beta1, self.beta2, self.eps);
        let tensors = params
            .tensors_mut()
            .into_iter()
            .zip(grads.tensors())
            .zip(self.first.tensors_mut())
            .zip(self.second.tensors_mut());
        for (((p, g), m), v) in tensors {
            for i in 0..p.len() {
                m[i] = b1 * m[i] + (1.0 - b1) * g[i];
                v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                p[i] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
    }
}

/// Learning rate for `epoch` (0-based) out of `epochs`, annealed from `base`
/// at the first epoch to `floor` at the last.
pub fn cosine_annealing(base: f64, floor: f64, epoch: usize, epochs: usize) -> f64 {
    if epochs <= 1 {
        return base;
    }
    let progress = epoch.min(epochs - 1) as f64 / (epochs - 1) as f64;
    floor + 0.5 * (base - floor) * (1.0 + (std::f64::consts::PI * progress).cos())
}

/// `teacher <- momentum * teacher + (1 - momentum) * student`.
pub fn ema_update(teacher: &mut MlpParams, student: &MlpParams, momentum: f64) {
    for (t, s) in teacher.tensors_mut().into_iter().zip(student.tensors()) {
        for (ti, si) in t.iter_mut().zip(s) {
            *ti = momentum * *ti + (1.0 - momentum) * si;
        }
    }
}
