use ndarray::{Array2, Zip};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { learning_rate: 1e-4, beta1: 0.5, beta2: 0.999, epsilon: 1e-8 }
    }
}

#[derive(Debug, Clone)]
pub struct AdamState {
    pub config: AdamConfig,
    pub step: u64,
    m: Vec<Array2<f64>>,
    v: Vec<Array2<f64>>,
}

impl AdamState {
    pub fn new(config: AdamConfig, shapes: &[(usize, usize)]) -> Self {
        Self {
            config,
            step: 0,
            m: shapes.iter().map(|&s| Array2::zeros(s)).collect(),
            v: shapes.iter().map(|&s| Array2::zeros(s)).collect(),
        }
    }

    /// One bias-corrected Adam update, in place.
    pub fn update(&mut self, params: &mut [&mut Array2<f64>], grads: &[Array2<f64>]) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::Shape(format!(
                "adam: {} buffers, {} params, {} grads",
                self.m.len(),
                params.len(),
                grads.len()
            )));
        }
        for ((p, g), m) in params.iter().zip(grads).zip(&self.m) {
            if p.dim() != m.dim() || g.dim() != m.dim() {
                return Err(Error::Shape(format!("adam: param {:?}, grad {:?}, buffer {:?}", p.dim(), g.dim(), m.dim())));
            }
        }
        self.step += 1;
        let AdamConfig { learning_rate: lr, beta1: b1, beta2: b2, epsilon: eps } = self.config;
        let c1 = 1.0 - b1.powi(self.step as i32);
        let c2 = 1.0 - b2.powi(self.step as i32);
        for (((p, g), m), v) in params.iter_mut().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            Zip::from(&mut **p).and(g).and(m).and(v).for_each(|p, &g, m, v| {
                *m = b1 * *m + (1.0 - b1) * g;
                *v = b2 * *v + (1.0 - b2) * g * g;
                let mh = *m / c1;
                let vh = *v / c2;
                *p -= lr * mh / (vh.sqrt() + eps);
            });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn zero_gradient_leaves_params() {
        let mut p = array![[1.0, -2.0]];
        let mut s = AdamState::new(AdamConfig::default(), &[(1, 2)]);
        s.update(&mut [&mut p], &[Array2::zeros((1, 2))]).unwrap();
        assert_eq!(p, array![[1.0, -2.0]]);
    }

    #[test]
    fn first_step_by_hand() {
        // bias-corrected moments equal g and g^2, so the step is -lr * g / (|g| + eps)
        let cfg = AdamConfig { learning_rate: 0.1, beta1: 0.5, beta2: 0.999, epsilon: 1e-8 };
        let mut p = array![[1.0, 1.0, 1.0]];
        let g = array![[0.5, -3.0, 1e-3]];
        let mut s = AdamState::new(cfg, &[(1, 3)]);
        s.update(&mut [&mut p], std::slice::from_ref(&g)).unwrap();
        for j in 0..3 {
            let expected = 1.0 - 0.1 * g[[0, j]] / (g[[0, j]].abs() + 1e-8);
            assert!((p[[0, j]] - expected).abs() < 1e-14, "{j}: {} vs {expected}", p[[0, j]]);
        }
    }

    #[test]
    fn shape_mismatch() {
        let mut p = array![[1.0]];
        let mut s = AdamState::new(AdamConfig::default(), &[(1, 2)]);
        assert!(s.update(&mut [&mut p], &[array![[0.0]]]).is_err());
    }
}
