use crate::corpus::Label;
use crate::features::{SparseVector, Vocabulary};
use crate::scalar::{sigmoid, Scalar};

use super::{ModelError, PredictionScore};

/// Binary logistic regression over sparse ngram features.
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticRegressionModel<T> {
    pub weights: Vec<T>,
    pub bias: T,
    pub vocab: Vocabulary,
}

/// Gradient of the mean binary cross-entropy over a batch.
#[derive(Debug, Clone, PartialEq)]
pub struct LrGradients<T> {
    pub weights: Vec<T>,
    pub bias: T,
}

impl<T: Scalar> LrGradients<T> {
    pub fn zeros(dim: usize) -> Self {
        Self { weights: vec![T::zero(); dim], bias: T::zero() }
    }

    pub fn slices(&self) -> Vec<&[T]> {
        vec![&self.weights, std::slice::from_ref(&self.bias)]
    }
}

impl<T: Scalar> LogisticRegressionModel<T> {
    /// Zero-initialized model over `vocab`.
    pub fn new(vocab: Vocabulary) -> Self {
        Self { weights: vec![T::zero(); vocab.size()], bias: T::zero(), vocab }
    }

    pub fn from_parts(weights: Vec<T>, bias: T, vocab: Vocabulary) -> Result<Self, ModelError> {
        if weights.len() != vocab.size() {
            return Err(ModelError::Shape(format!("{} weights for a vocabulary of {}", weights.len(), vocab.size())));
        }
        Ok(Self { weights, bias, vocab })
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    fn check(&self, x: &SparseVector<T>) -> Result<(), ModelError> {
        match x.max_index() {
            Some(i) if i >= self.dim() => Err(ModelError::IndexOutOfRange { index: i, size: self.dim() }),
            _ => Ok(()),
        }
    }

    pub fn logit(&self, x: &SparseVector<T>) -> Result<T, ModelError> {
        self.check(x)?;
        Ok(x.dot(&self.weights) + self.bias)
    }

    /// p(unfair | x) = σ(w·x + b).
    pub fn predict(&self, x: &SparseVector<T>) -> Result<PredictionScore<T>, ModelError> {
        Ok(PredictionScore::new(sigmoid(self.logit(x)?)))
    }

    /// Adds `scale · (p − y) · [x; 1]` into `grads` and returns p.
    pub fn accumulate_gradient(
        &self,
        x: &SparseVector<T>,
        y: Label,
        scale: T,
        grads: &mut LrGradients<T>,
    ) -> Result<T, ModelError> {
        let p = sigmoid(self.logit(x)?);
        let residual = (p - y.target::<T>()) * scale;
        for (i, v) in x.iter() {
            grads.weights[i] += residual * v;
        }
        grads.bias += residual;
        Ok(p)
    }

    /// Mean-BCE gradient over the batch: mean of (p − y)·x and (p − y).
    pub fn gradients(&self, batch: &[(SparseVector<T>, Label)]) -> Result<LrGradients<T>, ModelError> {
        if batch.is_empty() {
            return Err(ModelError::EmptyBatch);
        }
        let scale = T::one() / T::from_count(batch.len());
        let mut grads = LrGradients::zeros(self.dim());
        for (x, y) in batch {
            self.accumulate_gradient(x, *y, scale, &mut grads)?;
        }
        Ok(grads)
    }

    pub fn param_slices(&self) -> Vec<&[T]> {
        vec![&self.weights, std::slice::from_ref(&self.bias)]
    }

    pub fn param_slices_mut(&mut self) -> Vec<&mut [T]> {
        vec![&mut self.weights, std::slice::from_mut(&mut self.bias)]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{build_vocabulary, NgramRange, VocabConfig, VocabMode};
    use crate::models::bce_loss;

    fn vocab(n: usize) -> Vocabulary {
        let words: Vec<String> = (0..n).map(|i| format!("w{i}")).collect();
        let cfg =
            VocabConfig { word_ngrams: NgramRange::new(vec![1]).unwrap(), min_count: 1, ..VocabConfig::default() };
        build_vocabulary([words.join(" ").as_str()], VocabMode::WordNgram, &cfg).unwrap()
    }

    #[test]
    fn prediction_examples() {
        let mut m = LogisticRegressionModel::<f64>::new(vocab(3));
        let x = SparseVector::from_pairs([(0, 0.6), (2, 0.8)]);
        assert_eq!(m.predict(&x).unwrap().p_unfair, 0.5);
        m.bias = 3f64.ln();
        assert!((m.predict(&SparseVector::empty()).unwrap().p_unfair - 0.75).abs() < 1e-15);
        m.bias = 2.0;
        assert!((m.predict(&SparseVector::empty()).unwrap().p_unfair - 0.880797).abs() < 1e-6);
        m.bias = 1e3;
        assert_eq!(m.predict(&x).unwrap().p_unfair, 1.0);
        m.bias = -1e3;
        assert_eq!(m.predict(&x).unwrap().p_unfair, 0.0);
    }

    #[test]
    fn out_of_range_index() {
        let m = LogisticRegressionModel::<f64>::new(vocab(2));
        let x = SparseVector::from_pairs([(5, 1.0)]);
        assert!(matches!(m.predict(&x), Err(ModelError::IndexOutOfRange { index: 5, size: 2 })));
    }

    #[test]
    fn unit_gradient_example() {
        let m = LogisticRegressionModel::<f64>::new(vocab(3));
        let g = m.gradients(&[(SparseVector::from_pairs([(1, 1.0)]), Label::Unfair)]).unwrap();
        assert_eq!(g.weights, [0.0, -0.5, 0.0]);
        assert_eq!(g.bias, -0.5);
        assert!(matches!(m.gradients(&[]), Err(ModelError::EmptyBatch)));
    }

    #[test]
    fn gradient_vanishes_at_optimum() {
        let mut m = LogisticRegressionModel::<f64>::new(vocab(2));
        m.bias = 40.0; // σ(40) rounds to exactly 1
        let x = SparseVector::from_pairs([(0, 1.0)]);
        assert_eq!(m.predict(&x).unwrap().p_unfair, 1.0);
        let g = m.gradients(&[(x, Label::Unfair)]).unwrap();
        assert!(g.weights.iter().all(|w| *w == 0.0) && g.bias == 0.0);
    }

    #[test]
    fn f32_instantiation() {
        let m = LogisticRegressionModel::<f32>::new(vocab(2));
        let x = SparseVector::from_pairs([(0, 1.0f32)]);
        let p = m.predict(&x).unwrap().p_unfair;
        assert_eq!(p, 0.5f32);
        assert!((bce_loss(p, Label::Fair) - std::f32::consts::LN_2).abs() < 1e-6);
    }
}
