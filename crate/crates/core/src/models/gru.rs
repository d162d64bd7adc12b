//! Bidirectional GRU sequence classifier with exact backpropagation through
//! time.
//!
//! Cell (reset applied before the candidate's recurrent product):
//!
//! ```text
//! z_t = σ(W_z e_t + U_z h_{t-1} + b_z)
//! r_t = σ(W_r e_t + U_r h_{t-1} + b_r)
//! c_t = tanh(W_h e_t + U_h (r_t ⊙ h_{t-1}) + b_h)
//! h_t = (1 − z_t) ⊙ h_{t-1} + z_t ⊙ c_t
//! ```
//!
//! One cell reads the tokens left to right, the other right to left, both
//! from h_0 = 0. Padding ids are skipped. The head is
//! `p = σ(w_out · [h_fwd ; h_bwd] + b_out)`.

use std::collections::BTreeMap;

use rand::Rng;

use crate::corpus::Label;
use crate::features::PAD_ID;
use crate::scalar::{sigmoid, Scalar};

use super::matrix::Matrix;
use super::{ModelError, PredictionScore};

const INIT_SCALE: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub struct GruCell<T> {
    pub w_z: Matrix<T>,
    pub w_r: Matrix<T>,
    pub w_h: Matrix<T>,
    pub u_z: Matrix<T>,
    pub u_r: Matrix<T>,
    pub u_h: Matrix<T>,
    pub b_z: Vec<T>,
    pub b_r: Vec<T>,
    pub b_h: Vec<T>,
}

pub(crate) const CELL_TENSORS: [&str; 9] = ["w_z", "w_r", "w_h", "u_z", "u_r", "u_h", "b_z", "b_r", "b_h"];

#[derive(Debug, Clone)]
struct Step<T> {
    id: usize,
    h_prev: Vec<T>,
    z: Vec<T>,
    r: Vec<T>,
    cand: Vec<T>,
    h: Vec<T>,
}

impl<T: Scalar> GruCell<T> {
    pub fn zeros(d_emb: usize, d_hid: usize) -> Self {
        Self {
            w_z: Matrix::zeros(d_hid, d_emb),
            w_r: Matrix::zeros(d_hid, d_emb),
            w_h: Matrix::zeros(d_hid, d_emb),
            u_z: Matrix::zeros(d_hid, d_hid),
            u_r: Matrix::zeros(d_hid, d_hid),
            u_h: Matrix::zeros(d_hid, d_hid),
            b_z: vec![T::zero(); d_hid],
            b_r: vec![T::zero(); d_hid],
            b_h: vec![T::zero(); d_hid],
        }
    }

    pub fn init<R: Rng>(d_emb: usize, d_hid: usize, scale: f64, rng: &mut R) -> Self {
        Self {
            w_z: Matrix::uniform(d_hid, d_emb, scale, rng),
            w_r: Matrix::uniform(d_hid, d_emb, scale, rng),
            w_h: Matrix::uniform(d_hid, d_emb, scale, rng),
            u_z: Matrix::uniform(d_hid, d_hid, scale, rng),
            u_r: Matrix::uniform(d_hid, d_hid, scale, rng),
            u_h: Matrix::uniform(d_hid, d_hid, scale, rng),
            ..Self::zeros(d_emb, d_hid)
        }
    }

    pub fn d_hid(&self) -> usize {
        self.b_z.len()
    }

    pub fn d_emb(&self) -> usize {
        self.w_z.cols()
    }

    pub fn shapes(&self) -> Vec<Vec<usize>> {
        let (e, h) = (self.d_emb(), self.d_hid());
        let mut s = vec![vec![h, e]; 3];
        s.extend(vec![vec![h, h]; 3]);
        s.extend(vec![vec![h]; 3]);
        s
    }

    pub fn slices(&self) -> Vec<&[T]> {
        vec![
            self.w_z.as_slice(),
            self.w_r.as_slice(),
            self.w_h.as_slice(),
            self.u_z.as_slice(),
            self.u_r.as_slice(),
            self.u_h.as_slice(),
            &self.b_z,
            &self.b_r,
            &self.b_h,
        ]
    }

    pub fn slices_mut(&mut self) -> Vec<&mut [T]> {
        vec![
            self.w_z.as_mut_slice(),
            self.w_r.as_mut_slice(),
            self.w_h.as_mut_slice(),
            self.u_z.as_mut_slice(),
            self.u_r.as_mut_slice(),
            self.u_h.as_mut_slice(),
            &mut self.b_z,
            &mut self.b_r,
            &mut self.b_h,
        ]
    }

    fn step(&self, id: usize, e: &[T], h_prev: Vec<T>) -> Step<T> {
        let mut z = self.b_z.clone();
        self.w_z.mul_vec_acc(e, &mut z);
        self.u_z.mul_vec_acc(&h_prev, &mut z);
        z.iter_mut().for_each(|v| *v = sigmoid(*v));

        let mut r = self.b_r.clone();
        self.w_r.mul_vec_acc(e, &mut r);
        self.u_r.mul_vec_acc(&h_prev, &mut r);
        r.iter_mut().for_each(|v| *v = sigmoid(*v));

        let gated: Vec<T> = r.iter().zip(&h_prev).map(|(a, b)| *a * *b).collect();
        let mut cand = self.b_h.clone();
        self.w_h.mul_vec_acc(e, &mut cand);
        self.u_h.mul_vec_acc(&gated, &mut cand);
        cand.iter_mut().for_each(|v| *v = v.tanh());

        let h = (0..h_prev.len()).map(|k| (T::one() - z[k]) * h_prev[k] + z[k] * cand[k]).collect();
        Step { id, h_prev, z, r, cand, h }
    }

    /// Backpropagates `dh` (∂L/∂h_t) through one step. Parameter gradients
    /// accumulate into `grads`; ∂L/∂e_t into `de`; returns ∂L/∂h_{t-1}.
    fn step_backward(&self, step: &Step<T>, e: &[T], dh: &[T], grads: &mut GruCell<T>, de: &mut [T]) -> Vec<T> {
        let d = dh.len();
        let one = T::one();
        let mut dh_prev: Vec<T> = (0..d).map(|k| dh[k] * (one - step.z[k])).collect();

        let da_h: Vec<T> = (0..d).map(|k| dh[k] * step.z[k] * (one - step.cand[k] * step.cand[k])).collect();
        let da_z: Vec<T> =
            (0..d).map(|k| dh[k] * (step.cand[k] - step.h_prev[k]) * step.z[k] * (one - step.z[k])).collect();

        let gated: Vec<T> = step.r.iter().zip(&step.h_prev).map(|(a, b)| *a * *b).collect();
        let mut d_gated = vec![T::zero(); d];
        self.u_h.tmul_vec_acc(&da_h, &mut d_gated);
        grads.w_h.add_outer(&da_h, e);
        grads.u_h.add_outer(&da_h, &gated);
        add_into(&mut grads.b_h, &da_h);
        self.w_h.tmul_vec_acc(&da_h, de);

        let da_r: Vec<T> = (0..d).map(|k| d_gated[k] * step.h_prev[k] * step.r[k] * (one - step.r[k])).collect();
        for k in 0..d {
            dh_prev[k] += d_gated[k] * step.r[k];
        }

        for (da, w, u, b, gw, gu) in [
            (&da_r, &self.w_r, &self.u_r, &mut grads.b_r, &mut grads.w_r, &mut grads.u_r),
            (&da_z, &self.w_z, &self.u_z, &mut grads.b_z, &mut grads.w_z, &mut grads.u_z),
        ] {
            gw.add_outer(da, e);
            gu.add_outer(da, &step.h_prev);
            add_into(b, da);
            w.tmul_vec_acc(da, de);
            u.tmul_vec_acc(da, &mut dh_prev);
        }
        dh_prev
    }

    fn run(&self, embedding: &Matrix<T>, ids: impl Iterator<Item = usize>) -> Vec<Step<T>> {
        let mut h = vec![T::zero(); self.d_hid()];
        let mut steps = Vec::new();
        for id in ids {
            let step = self.step(id, embedding.row(id), h);
            h = step.h.clone();
            steps.push(step);
        }
        steps
    }

    fn backprop(
        &self,
        embedding: &Matrix<T>,
        steps: &[Step<T>],
        mut dh: Vec<T>,
        grads: &mut GruCell<T>,
        rows: &mut BTreeMap<usize, Vec<T>>,
    ) {
        let d_emb = embedding.cols();
        for step in steps.iter().rev() {
            let de = rows.entry(step.id).or_insert_with(|| vec![T::zero(); d_emb]);
            dh = self.step_backward(step, embedding.row(step.id), &dh, grads, de);
        }
    }
}

fn add_into<T: Scalar>(dst: &mut [T], src: &[T]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += *s;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GruClassifier<T> {
    pub embedding: Matrix<T>,
    pub forward: GruCell<T>,
    pub backward: GruCell<T>,
    pub out_weights: Vec<T>,
    pub out_bias: T,
}

/// Activations saved by [`GruClassifier::forward`] for the backward pass.
#[derive(Debug, Clone)]
pub struct GruCache<T> {
    forward: Vec<Step<T>>,
    backward: Vec<Step<T>>,
    h_fwd: Vec<T>,
    h_bwd: Vec<T>,
    p: T,
    vocab_size: usize,
    d_emb: usize,
    d_hid: usize,
}

impl<T: Scalar> GruCache<T> {
    pub fn p_unfair(&self) -> T {
        self.p
    }
}

/// Exact gradients of one sequence's BCE loss. Embedding gradients are kept
/// per touched row; rows absent from the map are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct GruGradients<T> {
    pub embedding_rows: BTreeMap<usize, Vec<T>>,
    pub forward: GruCell<T>,
    pub backward: GruCell<T>,
    pub out_weights: Vec<T>,
    pub out_bias: T,
}

impl<T: Scalar> GruGradients<T> {
    /// Adds `scale ·` these gradients into a dense, model-shaped accumulator.
    pub fn add_scaled_to(&self, acc: &mut GruClassifier<T>, scale: T) {
        for (id, row) in &self.embedding_rows {
            for (a, g) in acc.embedding.row_mut(*id).iter_mut().zip(row) {
                *a += *g * scale;
            }
        }
        let mut dst = acc.param_slices_mut();
        for (d, s) in dst.iter_mut().skip(1).zip(self.dense_tail()) {
            for (a, g) in d.iter_mut().zip(s) {
                *a += *g * scale;
            }
        }
    }

    /// The gradient laid out like the model's parameters.
    pub fn to_dense(&self, template: &GruClassifier<T>) -> GruClassifier<T> {
        let mut dense = template.zeros_like();
        self.add_scaled_to(&mut dense, T::one());
        dense
    }

    fn dense_tail(&self) -> Vec<&[T]> {
        let mut v = self.forward.slices();
        v.extend(self.backward.slices());
        v.push(&self.out_weights);
        v.push(std::slice::from_ref(&self.out_bias));
        v
    }
}

impl<T: Scalar> GruClassifier<T> {
    pub fn zeros(vocab_size: usize, d_emb: usize, d_hid: usize) -> Self {
        Self {
            embedding: Matrix::zeros(vocab_size, d_emb),
            forward: GruCell::zeros(d_emb, d_hid),
            backward: GruCell::zeros(d_emb, d_hid),
            out_weights: vec![T::zero(); 2 * d_hid],
            out_bias: T::zero(),
        }
    }

    /// Weights uniform in [−0.1, 0.1], biases zero.
    pub fn init<R: Rng>(vocab_size: usize, d_emb: usize, d_hid: usize, rng: &mut R) -> Self {
        Self::init_scaled(vocab_size, d_emb, d_hid, INIT_SCALE, rng)
    }

    pub fn init_scaled<R: Rng>(vocab_size: usize, d_emb: usize, d_hid: usize, scale: f64, rng: &mut R) -> Self {
        let embedding = Matrix::uniform(vocab_size, d_emb, scale, rng);
        let forward = GruCell::init(d_emb, d_hid, scale, rng);
        let backward = GruCell::init(d_emb, d_hid, scale, rng);
        let out_weights = (0..2 * d_hid).map(|_| T::lit(rng.random_range(-scale..=scale))).collect();
        Self { embedding, forward, backward, out_weights, out_bias: T::zero() }
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.vocab_size(), self.d_emb(), self.d_hid())
    }

    pub fn vocab_size(&self) -> usize {
        self.embedding.rows()
    }

    pub fn d_emb(&self) -> usize {
        self.embedding.cols()
    }

    pub fn d_hid(&self) -> usize {
        self.forward.d_hid()
    }

    /// Checks that every tensor agrees with (vocab_size, d_emb, d_hid).
    pub fn validate(&self) -> Result<(), ModelError> {
        let (e, h) = (self.d_emb(), self.d_hid());
        let cells_ok = [&self.forward, &self.backward].iter().all(|c| {
            c.d_emb() == e
                && c.d_hid() == h
                && c.slices().iter().zip(c.shapes()).all(|(s, shape)| s.len() == shape.iter().product::<usize>())
        });
        if !cells_ok || self.out_weights.len() != 2 * h {
            return Err(ModelError::Shape(format!("GRU tensors disagree with d_emb={e}, d_hid={h}")));
        }
        if self.param_slices().iter().any(|s| s.iter().any(|v| !v.is_finite())) {
            return Err(ModelError::NonFinite);
        }
        Ok(())
    }

    pub fn tensor_names() -> Vec<String> {
        let mut names = vec!["embedding".to_string()];
        for dir in ["forward", "backward"] {
            names.extend(CELL_TENSORS.iter().map(|t| format!("{dir}.{t}")));
        }
        names.push("out_weights".into());
        names.push("out_bias".into());
        names
    }

    pub fn tensor_shapes(&self) -> Vec<Vec<usize>> {
        let mut shapes = vec![self.embedding.shape().to_vec()];
        shapes.extend(self.forward.shapes());
        shapes.extend(self.backward.shapes());
        shapes.push(vec![self.out_weights.len()]);
        shapes.push(vec![]);
        shapes
    }

    /// All parameters in [`Self::tensor_names`] order.
    pub fn param_slices(&self) -> Vec<&[T]> {
        let mut v = vec![self.embedding.as_slice()];
        v.extend(self.forward.slices());
        v.extend(self.backward.slices());
        v.push(&self.out_weights);
        v.push(std::slice::from_ref(&self.out_bias));
        v
    }

    pub fn param_slices_mut(&mut self) -> Vec<&mut [T]> {
        let mut v = vec![self.embedding.as_mut_slice()];
        v.extend(self.forward.slices_mut());
        v.extend(self.backward.slices_mut());
        v.push(&mut self.out_weights);
        v.push(std::slice::from_mut(&mut self.out_bias));
        v
    }

    /// Runs both directions over the non-padding ids.
    pub fn forward(&self, ids: &[usize]) -> Result<(PredictionScore<T>, GruCache<T>), ModelError> {
        let tokens: Vec<usize> = ids.iter().copied().filter(|&id| id != PAD_ID).collect();
        if tokens.is_empty() {
            return Err(ModelError::EmptySequence);
        }
        if let Some(&bad) = tokens.iter().find(|&&id| id >= self.vocab_size()) {
            return Err(ModelError::IndexOutOfRange { index: bad, size: self.vocab_size() });
        }
        let fwd = self.forward.run(&self.embedding, tokens.iter().copied());
        let bwd = self.backward.run(&self.embedding, tokens.iter().rev().copied());
        let h_fwd = fwd.last().map(|s| s.h.clone()).expect("nonempty");
        let h_bwd = bwd.last().map(|s| s.h.clone()).expect("nonempty");
        let d = self.d_hid();
        let logit = self.out_bias
            + self.out_weights[..d].iter().zip(&h_fwd).map(|(w, h)| *w * *h).sum::<T>()
            + self.out_weights[d..].iter().zip(&h_bwd).map(|(w, h)| *w * *h).sum::<T>();
        let p = sigmoid(logit);
        let cache = GruCache {
            forward: fwd,
            backward: bwd,
            h_fwd,
            h_bwd,
            p,
            vocab_size: self.vocab_size(),
            d_emb: self.d_emb(),
            d_hid: d,
        };
        Ok((PredictionScore::new(p), cache))
    }

    pub fn predict(&self, ids: &[usize]) -> Result<PredictionScore<T>, ModelError> {
        self.forward(ids).map(|(p, _)| p)
    }

    /// Gradients of `bce_loss(p, y)` for the sequence cached by
    /// [`Self::forward`].
    pub fn backward(&self, cache: &GruCache<T>, y: Label) -> Result<GruGradients<T>, ModelError> {
        if (cache.vocab_size, cache.d_emb, cache.d_hid) != (self.vocab_size(), self.d_emb(), self.d_hid()) {
            return Err(ModelError::CacheMismatch(format!(
                "cache dims (V={}, E={}, H={}) vs model (V={}, E={}, H={})",
                cache.vocab_size,
                cache.d_emb,
                cache.d_hid,
                self.vocab_size(),
                self.d_emb(),
                self.d_hid()
            )));
        }
        let d = self.d_hid();
        let dlogit = cache.p - y.target::<T>();
        let mut grads = GruGradients {
            embedding_rows: BTreeMap::new(),
            forward: GruCell::zeros(self.d_emb(), d),
            backward: GruCell::zeros(self.d_emb(), d),
            out_weights: cache.h_fwd.iter().chain(&cache.h_bwd).map(|h| *h * dlogit).collect(),
            out_bias: dlogit,
        };
        let dh_fwd: Vec<T> = self.out_weights[..d].iter().map(|w| *w * dlogit).collect();
        let dh_bwd: Vec<T> = self.out_weights[d..].iter().map(|w| *w * dlogit).collect();
        self.forward.backprop(&self.embedding, &cache.forward, dh_fwd, &mut grads.forward, &mut grads.embedding_rows);
        self.backward.backprop(
            &self.embedding,
            &cache.backward,
            dh_bwd,
            &mut grads.backward,
            &mut grads.embedding_rows,
        );
        Ok(grads)
    }
}
