//! Adam with decoupled weight decay.

use ndarray::Array2;

use crate::model::ParamStore;

pub struct AdamW {
    beta1: f64,
    beta2: f64,
    eps: f64,
    weight_decay: f64,
    step: u64,
    m: Vec<Array2<f64>>,
    v: Vec<Array2<f64>>,
}

impl AdamW {
    pub fn new(params: &ParamStore, weight_decay: f64) -> AdamW {
        let m = (0..params.len())
            .map(|i| Array2::zeros(params.value(i).dim()))
            .collect();
        let v = (0..params.len())
            .map(|i| Array2::zeros(params.value(i).dim()))
            .collect();
        AdamW {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay,
            step: 0,
            m,
            v,
        }
    }

    /// Apply one update. Parameters without a gradient this step keep their
    /// moments untouched (their value still decays).
    pub fn step(&mut self, params: &mut ParamStore, grads: &[Option<Array2<f64>>], lr: f64) {
        self.step += 1;
        let bc1 = 1.0 - self.beta1.powi(self.step as i32);
        let bc2 = 1.0 - self.beta2.powi(self.step as i32);
        for i in 0..params.len() {
            let value = params.value_mut(i);
            if self.weight_decay > 0.0 {
                value.mapv_inplace(|x| x - lr * self.weight_decay * x);
            }
            let Some(grad) = &grads[i] else { continue };
            let m = &mut self.m[i];
            let v = &mut self.v[i];
            azip(m, grad, |m, g| *m = self.beta1 * *m + (1.0 - self.beta1) * g);
            azip(v, grad, |v, g| *v = self.beta2 * *v + (1.0 - self.beta2) * g * g);
            for ((x, m), v) in value.iter_mut().zip(m.iter()).zip(v.iter()) {
                let m_hat = m / bc1;
                let v_hat = v / bc2;
                *x -= lr * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
    }
}

fn azip(dst: &mut Array2<f64>, src: &Array2<f64>, mut f: impl FnMut(&mut f64, f64)) {
    for (d, &s) in dst.iter_mut().zip(src.iter()) {
        f(d, s);
    }
}

/// Scale gradients in place so their global L2 norm is at most `max_norm`.
pub fn clip_global_norm(grads: &mut [Option<Array2<f64>>], max_norm: f64) -> f64 {
    let mut sq = 0.0;
    for g in grads.iter().flatten() {
        sq += g.iter().map(|x| x * x).sum::<f64>();
    }
    let norm = sq.sqrt();
    if norm > max_norm && norm > 0.0 {
        let scale = max_norm / norm;
        for g in grads.iter_mut().flatten() {
            g.mapv_inplace(|x| x * scale);
        }
    }
    norm
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn clip_scales_to_max_norm() {
        let mut grads = vec![
            Some(Array2::from_elem((1, 2), 3.0)),
            None,
            Some(Array2::from_elem((1, 2), 4.0)),
        ];
        // norm = sqrt(2*9 + 2*16) = sqrt(50)
        let norm = clip_global_norm(&mut grads, 1.0);
        assert_abs_diff_eq!(norm, 50f64.sqrt(), epsilon = 1e-12);
        let mut sq = 0.0;
        for g in grads.iter().flatten() {
            sq += g.iter().map(|x| x * x).sum::<f64>();
        }
        assert_abs_diff_eq!(sq.sqrt(), 1.0, epsilon = 1e-12);
    }
}
