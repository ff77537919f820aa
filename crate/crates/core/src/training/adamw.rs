use crate::error::{Error, Result};

/// Adam with decoupled weight decay over a flat parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamW {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl AdamW {
    pub fn new(num_params: usize, weight_decay: f64) -> Self {
        AdamW {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay,
            m: vec![0.0; num_params],
            v: vec![0.0; num_params],
            t: 0,
        }
    }

    pub fn steps(&self) -> i32 {
        self.t
    }

    /// `theta <- theta - lr * (m_hat / (sqrt(v_hat) + eps) + lambda * theta)`.
    /// A non-finite gradient aborts the step and leaves all state untouched.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64], lr: f64) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::shape(format!(
                "optimizer holds {} moments, got {} parameters and {} gradients",
                self.m.len(),
                params.len(),
                grads.len()
            )));
        }
        if let Some(i) = grads.iter().position(|g| !g.is_finite()) {
            return Err(Error::NonFinite(format!(
                "gradient entry {i} is {} at step {}",
                grads[i],
                self.t + 1
            )));
        }
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        for (((p, &g), m), v) in params
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut())
            .zip(self.v.iter_mut())
        {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p -= lr * (m_hat / (v_hat.sqrt() + self.eps) + self.weight_decay * *p);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_without_decay_is_noop() {
        let mut opt = AdamW::new(3, 0.0);
        let mut p = vec![1.0, -2.0, 0.5];
        opt.step(&mut p, &[0.0; 3], 0.1).unwrap();
        assert_eq!(p, vec![1.0, -2.0, 0.5]);
    }

    #[test]
    fn single_scalar_step() {
        // m = 0.1 g, v = 0.001 g^2, m_hat = g, v_hat = g^2
        // theta = 1 - 0.01 * (0.5 / (0.5 + 1e-8) + 0.01 * 1)
        let mut opt = AdamW::new(1, 0.01);
        let mut p = vec![1.0];
        opt.step(&mut p, &[0.5], 0.01).unwrap();
        let expected = 1.0 - 0.01 * (0.5 / (0.5 + 1e-8) + 0.01);
        assert!((p[0] - expected).abs() < 1e-15);
    }

    #[test]
    fn pure_shrinkage() {
        let mut opt = AdamW::new(2, 0.1);
        let mut p = vec![2.0, -4.0];
        opt.step(&mut p, &[0.0, 0.0], 0.5).unwrap();
        assert_eq!(p, vec![2.0 * (1.0 - 0.05), -4.0 * (1.0 - 0.05)]);
    }

    #[test]
    fn non_finite_gradient_aborts() {
        let mut opt = AdamW::new(2, 0.0);
        let mut p = vec![1.0, 1.0];
        let err = opt.step(&mut p, &[0.1, f64::NAN], 0.1).unwrap_err();
        assert!(matches!(err, Error::NonFinite(_)));
        assert_eq!(p, vec![1.0, 1.0]);
        assert_eq!(opt.steps(), 0);
    }
}
