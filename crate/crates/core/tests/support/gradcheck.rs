//! Central finite-difference oracles for the analytic gradients. Shared by
//! the core gradient tests and the acceptance suite.

use fairgate_core::features::{NgramRange, NgramTable, VocabMode, Vocabulary};
use fairgate_core::models::{bce_loss, GruClassifier, LogisticRegressionModel};
use fairgate_core::{seed, Label, SparseVector};
use rand::Rng;

pub const STEP: f64 = 1e-5;
/// Denominator floor so components that are zero on both sides compare as 0.
pub const REL_FLOOR: f64 = 1e-6;

pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

/// Worst relative error over every coordinate of `params`, comparing the
/// analytic gradient `grads` against central differences of `loss`.
fn worst_error<M>(
    model: &mut M,
    grads: &[Vec<f64>],
    slices_mut: impl Fn(&mut M) -> Vec<&mut [f64]>,
    loss: impl Fn(&M) -> f64,
) -> f64 {
    let mut worst = 0.0_f64;
    for (slot, g) in grads.iter().enumerate() {
        for (i, &analytic) in g.iter().enumerate() {
            let original = slices_mut(model)[slot][i];
            slices_mut(model)[slot][i] = original + STEP;
            let up = loss(model);
            slices_mut(model)[slot][i] = original - STEP;
            let down = loss(model);
            slices_mut(model)[slot][i] = original;
            worst = worst.max(rel_err(analytic, (up - down) / (2.0 * STEP)));
        }
    }
    worst
}

fn label<R: Rng>(rng: &mut R) -> Label {
    if rng.random_bool(0.5) {
        Label::Unfair
    } else {
        Label::Fair
    }
}

fn word_vocab(dim: usize) -> Vocabulary {
    let table =
        NgramTable::new(NgramRange::new(vec![1]).unwrap(), (0..dim).map(|i| format!("w{i}")).collect()).unwrap();
    Vocabulary::from_tables(VocabMode::WordNgram, Some(table), None).unwrap()
}

/// Random 8-dim logistic regression with a 4-example batch; returns the
/// worst relative error over all 9 parameters.
pub fn logistic_instance(seed_value: u64) -> f64 {
    const DIM: usize = 8;
    let mut rng = seed::rng(seed_value);
    let weights: Vec<f64> = (0..DIM).map(|_| rng.random_range(-1.0..1.0)).collect();
    let bias = rng.random_range(-0.5..0.5);
    let mut model = LogisticRegressionModel::from_parts(weights, bias, word_vocab(DIM)).unwrap();
    let batch: Vec<(SparseVector<f64>, Label)> = (0..4)
        .map(|_| {
            let mut pairs = Vec::new();
            for i in 0..DIM {
                if rng.random_bool(0.7) {
                    pairs.push((i, rng.random_range(-1.0..1.0)));
                }
            }
            (SparseVector::from_pairs(pairs), label(&mut rng))
        })
        .collect();
    let g = model.gradients(&batch).unwrap();
    let grads = vec![g.weights.clone(), vec![g.bias]];
    worst_error(
        &mut model,
        &grads,
        |m| m.param_slices_mut(),
        |m| batch.iter().map(|(x, y)| bce_loss(m.predict(x).unwrap().p_unfair, *y)).sum::<f64>() / batch.len() as f64,
    )
}

/// Random bidirectional GRU with the given sizes on one sequence of `len`
/// tokens (plus interleaved padding); returns the worst relative error over
/// every parameter, embedding table included.
pub fn gru_instance(seed_value: u64, d_emb: usize, d_hid: usize, len: usize) -> f64 {
    const VOCAB: usize = 7;
    let mut rng = seed::rng(seed_value);
    let mut model: GruClassifier<f64> = GruClassifier::init_scaled(VOCAB, d_emb, d_hid, 0.8, &mut rng);
    for b in model.param_slices_mut().into_iter().skip(1) {
        // move biases and the output layer off their zero init
        if b.len() <= 2 * d_hid {
            for v in b.iter_mut() {
                *v += rng.random_range(-0.3..0.3);
            }
        }
    }
    let mut ids: Vec<usize> = (0..len).map(|_| rng.random_range(1..VOCAB)).collect();
    ids.insert(rng.random_range(0..=ids.len()), 0);
    let y = label(&mut rng);
    let (_, cache) = model.forward(&ids).unwrap();
    let dense = model.backward(&cache, y).unwrap().to_dense(&model);
    let grads: Vec<Vec<f64>> = dense.param_slices().into_iter().map(<[f64]>::to_vec).collect();
    worst_error(&mut model, &grads, |m| m.param_slices_mut(), |m| bce_loss(m.predict(&ids).unwrap().p_unfair, y))
}
