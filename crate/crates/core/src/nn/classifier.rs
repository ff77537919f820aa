use ndarray::{Array1, Array2, Axis};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::linear::Linear;
use super::params::{join, Parameters};
use crate::error::Result;

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// `sigmoid(W2 dropout(relu(W1 f + b1)) + b2)` with a hidden layer of half
/// the input width.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierHead {
    pub hidden: Linear,
    pub output: Linear,
    pub dropout: f64,
}

pub struct HeadCache {
    input: Array2<f64>,
    pre_activation: Array2<f64>,
    /// Dropout multipliers (0 or `1/(1-rate)`), all ones in eval mode.
    mask: Array1<f64>,
    activated: Array2<f64>,
    probs: Array1<f64>,
}

impl ClassifierHead {
    pub fn init(rng: &mut ChaCha8Rng, inputs: usize, classes: usize, dropout: f64) -> Self {
        let hidden = (inputs / 2).max(1);
        ClassifierHead {
            hidden: Linear::init(rng, inputs, hidden),
            output: Linear::init(rng, hidden, classes),
            dropout,
        }
    }

    pub fn zeros(inputs: usize, classes: usize) -> Self {
        let hidden = (inputs / 2).max(1);
        ClassifierHead {
            hidden: Linear::zeros(inputs, hidden),
            output: Linear::zeros(hidden, classes),
            dropout: 0.0,
        }
    }

    pub fn inputs(&self) -> usize {
        self.hidden.inputs()
    }

    pub fn classes(&self) -> usize {
        self.output.outputs()
    }

    /// Eval mode when `dropout_rng` is `None`; otherwise a fresh dropout
    /// mask is drawn from the generator.
    pub fn forward(
        &self,
        features: &Array1<f64>,
        dropout_rng: Option<&mut ChaCha8Rng>,
    ) -> Result<(Array1<f64>, HeadCache)> {
        let input = features.clone().insert_axis(Axis(0));
        let pre_activation = self.hidden.forward(&input)?;
        let width = pre_activation.ncols();
        let mask = match dropout_rng {
            Some(rng) if self.dropout > 0.0 => {
                let keep = 1.0 - self.dropout;
                Array1::from_shape_fn(width, |_| {
                    if rng.gen::<f64>() < keep {
                        1.0 / keep
                    } else {
                        0.0
                    }
                })
            }
            _ => Array1::ones(width),
        };
        let activated = pre_activation.mapv(|v| v.max(0.0)) * &mask;
        let logits = self.output.forward(&activated)?;
        let probs = logits.row(0).mapv(sigmoid);
        Ok((
            probs.clone(),
            HeadCache {
                input,
                pre_activation,
                mask,
                activated,
                probs,
            },
        ))
    }

    /// Backward from `dL/dp`; returns `dL/df`.
    pub fn backward(
        &self,
        cache: &HeadCache,
        dprobs: &Array1<f64>,
        grad: &mut ClassifierHead,
    ) -> Array1<f64> {
        let dlogits = (dprobs * &cache.probs.mapv(|p| p * (1.0 - p))).insert_axis(Axis(0));
        let dact = self
            .output
            .backward(&cache.activated, &dlogits, &mut grad.output);
        let relu_grad = cache.pre_activation.mapv(|v| if v > 0.0 { 1.0 } else { 0.0 });
        let dpre = dact * &relu_grad * &cache.mask;
        self.hidden
            .backward(&cache.input, &dpre, &mut grad.hidden)
            .index_axis_move(Axis(0), 0)
    }
}

impl Parameters for ClassifierHead {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &[usize], &[f64])) {
        self.hidden.visit(&join(prefix, "hidden"), f);
        self.output.visit(&join(prefix, "output"), f);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &[usize], &mut [f64])) {
        self.hidden.visit_mut(&join(prefix, "hidden"), f);
        self.output.visit_mut(&join(prefix, "output"), f);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::SeedableRng;

    #[test]
    fn zero_weights_give_half() {
        let head = ClassifierHead::zeros(6, 4);
        let (p, _) = head.forward(&Array1::from_elem(6, 3.0), None).unwrap();
        assert_eq!(p, Array1::from_elem(4, 0.5));
    }

    #[test]
    fn hand_set_two_input_head() {
        // hidden = relu([1, -1] . f + 0.5) with f = [2, 0.5] -> 2.0
        // logit = 0.75 * 2.0 - 0.25 = 1.25
        let head = ClassifierHead {
            hidden: Linear::new(array![[1.0, -1.0]], array![0.5]).unwrap(),
            output: Linear::new(array![[0.75]], array![-0.25]).unwrap(),
            dropout: 0.5,
        };
        let (p, _) = head.forward(&array![2.0, 0.5], None).unwrap();
        assert_eq!(p.len(), 1);
        assert!((p[0] - 1.0 / (1.0 + (-1.25f64).exp())).abs() < 1e-15);
    }

    #[test]
    fn dropout_modes() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let head = ClassifierHead::init(&mut rng, 16, 3, 0.5);
        let f = crate::nn::init::uniform1(&mut rng, 16, 1.0);
        let (a, _) = head.forward(&f, None).unwrap();
        let (b, _) = head.forward(&f, None).unwrap();
        assert_eq!(a, b);
        let (c, _) = head
            .forward(&f, Some(&mut ChaCha8Rng::seed_from_u64(9)))
            .unwrap();
        let (d, _) = head
            .forward(&f, Some(&mut ChaCha8Rng::seed_from_u64(9)))
            .unwrap();
        assert_eq!(c, d);
        assert_eq!(head.hidden.outputs(), 8);
    }
}
