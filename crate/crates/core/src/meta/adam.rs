//! Adam optimizer for the outer loop.

use crate::tensor::Tensor;

#[derive(Clone, Debug)]
pub struct AdamState {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub step: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(lr: f64, sizes: &[usize]) -> Self {
        AdamState {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: sizes.iter().map(|&n| vec![0.0; n]).collect(),
            v: sizes.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }

    pub fn param_count(&self) -> usize {
        self.m.len()
    }

    /// One bias-corrected update; returns the new parameter values.
    pub fn update(&mut self, params: &[Tensor], grads: &[Tensor]) -> Vec<Tensor> {
        assert_eq!(params.len(), self.m.len(), "Adam state tracks {} tensors, got {}", self.m.len(), params.len());
        assert_eq!(params.len(), grads.len());
        self.step += 1;
        let b1t = 1.0 - self.beta1.powi(self.step as i32);
        let b2t = 1.0 - self.beta2.powi(self.step as i32);
        params
            .iter()
            .zip(grads)
            .enumerate()
            .map(|(i, (p, g))| {
                assert_eq!(p.numel(), self.m[i].len(), "accumulator {i} shape drifted");
                let mut out = p.data().to_vec();
                for (j, (&pv, &gv)) in p.data().iter().zip(g.data()).enumerate() {
                    let m = &mut self.m[i][j];
                    *m = self.beta1 * *m + (1.0 - self.beta1) * gv;
                    let v = &mut self.v[i][j];
                    *v = self.beta2 * *v + (1.0 - self.beta2) * gv * gv;
                    let m_hat = *m / b1t;
                    let v_hat = *v / b2t;
                    out[j] = pv - self.lr * m_hat / (v_hat.sqrt() + self.eps);
                }
                Tensor::from_vec(p.shape(), out)
            })
            .collect()
    }

    pub fn snapshot(&self) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        (self.m.clone(), self.v.clone())
    }

    pub fn restore(&mut self, step: u64, m: Vec<Vec<f64>>, v: Vec<Vec<f64>>) {
        self.step = step;
        self.m = m;
        self.v = v;
    }
}
