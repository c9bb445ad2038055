use super::{argmax_first, BaseClassifier};
use crate::error::{ClassifierError, Error, Result};

/// Multinomial logistic regression: `logits = W x + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSoftmax {
    d: usize,
    num_classes: usize,
    /// Row-major `num_classes × d`.
    weights: Vec<f64>,
    bias: Vec<f64>,
}

impl LinearSoftmax {
    pub fn zeros(d: usize, num_classes: usize) -> Self {
        Self {
            d,
            num_classes,
            weights: vec![0.0; d * num_classes],
            bias: vec![0.0; num_classes],
        }
    }

    pub fn from_parts(d: usize, num_classes: usize, weights: Vec<f64>, bias: Vec<f64>) -> Result<Self> {
        if d == 0 || num_classes == 0 {
            return Err(Error::Argument(
                "linear model needs d ≥ 1 and at least one class".into(),
            ));
        }
        if weights.len() != d * num_classes || bias.len() != num_classes {
            return Err(Error::Argument(format!(
                "linear model {num_classes}×{d} needs {} weights and {num_classes} biases, got {} and {}",
                d * num_classes,
                weights.len(),
                bias.len()
            )));
        }
        Ok(Self {
            d,
            num_classes,
            weights,
            bias,
        })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub(crate) fn weights_mut(&mut self) -> (&mut [f64], &mut [f64]) {
        (&mut self.weights, &mut self.bias)
    }

    pub fn logits_into(&self, x: &[f64], out: &mut [f64]) {
        for (c, o) in out.iter_mut().enumerate() {
            let row = &self.weights[c * self.d..(c + 1) * self.d];
            *o = self.bias[c] + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
        }
    }

    pub fn logits(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.num_classes];
        self.logits_into(x, &mut out);
        out
    }
}

impl BaseClassifier for LinearSoftmax {
    fn num_classes(&self) -> usize {
        self.num_classes
    }

    fn predict_hard(&self, x: &[f64]) -> std::result::Result<usize, ClassifierError> {
        if x.len() != self.d {
            return Err(ClassifierError(format!(
                "linear model expects {} features, got {}",
                self.d,
                x.len()
            )));
        }
        // small fixed-size buffer avoids an allocation per evaluation
        let mut buf = [0.0f64; 16];
        if self.num_classes <= buf.len() {
            let out = &mut buf[..self.num_classes];
            self.logits_into(x, out);
            Ok(argmax_first(out))
        } else {
            Ok(argmax_first(&self.logits(x)))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_model_predicts_first_class() {
        let m = LinearSoftmax::zeros(3, 4);
        assert_eq!(m.predict_hard(&[0.1, 0.9, 0.5]).unwrap(), 0);
    }

    #[test]
    fn logits_and_prediction() {
        let m = LinearSoftmax::from_parts(2, 2, vec![1.0, 0.0, 0.0, 1.0], vec![0.0, 0.0]).unwrap();
        assert_eq!(m.logits(&[0.2, 0.7]), vec![0.2, 0.7]);
        assert_eq!(m.predict_hard(&[0.2, 0.7]).unwrap(), 1);
        assert_eq!(m.predict_hard(&[0.5, 0.5]).unwrap(), 0);
        assert!(m.predict_hard(&[0.5]).is_err());
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        assert!(LinearSoftmax::from_parts(2, 2, vec![0.0; 3], vec![0.0; 2]).is_err());
    }
}
