//! Single-document JSON model files:
//! `{format_version, kind, market, config, vocabulary, parameters}` where
//! `parameters.tensors` holds named flat arrays with their shapes.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::features::Vocabulary;
use crate::scalar::Scalar;

use super::gru::GruClassifier;
use super::logistic::LogisticRegressionModel;
use super::matrix::Matrix;
use super::{ClassifierModel, ModelError, ModelKind, SequenceClassifier};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMetadata {
    pub format_version: u32,
    pub kind: ModelKind,
    pub market: String,
    /// Training configuration, stored verbatim.
    pub config: Value,
}

impl ModelMetadata {
    pub fn new(kind: ModelKind, market: impl Into<String>, config: Value) -> Self {
        Self { format_version: FORMAT_VERSION, kind, market: market.into(), config }
    }
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format_version: u32,
    kind: ModelKind,
    market: String,
    config: Value,
    vocabulary: Vocabulary,
    parameters: Parameters,
}

#[derive(Serialize, Deserialize)]
struct Parameters {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    max_len: Option<usize>,
    tensors: Vec<Tensor>,
}

#[derive(Serialize, Deserialize)]
struct Tensor {
    name: String,
    shape: Vec<usize>,
    data: Vec<f64>,
}

fn tensor<T: Scalar>(name: &str, shape: Vec<usize>, data: &[T]) -> Tensor {
    Tensor { name: name.to_string(), shape, data: data.iter().map(|v| v.to_f64_lossless()).collect() }
}

pub fn model_to_json<T: Scalar>(model: &ClassifierModel<T>, metadata: &ModelMetadata) -> Result<String, ModelError> {
    if metadata.kind != model.kind() {
        return Err(ModelError::Shape(format!(
            "metadata kind {} does not match model kind {}",
            metadata.kind,
            model.kind()
        )));
    }
    let (max_len, tensors) = match model {
        ClassifierModel::Linear { model, .. } => (
            None,
            vec![
                tensor("weights", vec![model.weights.len()], &model.weights),
                tensor("bias", vec![], std::slice::from_ref(&model.bias)),
            ],
        ),
        ClassifierModel::Recurrent(s) => (
            Some(s.max_len),
            GruClassifier::<T>::tensor_names()
                .iter()
                .zip(s.network.tensor_shapes())
                .zip(s.network.param_slices())
                .map(|((name, shape), data)| tensor(name, shape, data))
                .collect(),
        ),
    };
    let file = ModelFile {
        format_version: FORMAT_VERSION,
        kind: model.kind(),
        market: metadata.market.clone(),
        config: metadata.config.clone(),
        vocabulary: model.vocab().clone(),
        parameters: Parameters { max_len, tensors },
    };
    serde_json::to_string(&file).map_err(|e| ModelError::Corrupt(e.to_string()))
}

pub fn save_model<T: Scalar>(
    path: impl AsRef<Path>,
    model: &ClassifierModel<T>,
    metadata: &ModelMetadata,
) -> Result<(), ModelError> {
    fs::write(path, model_to_json(model, metadata)?)?;
    Ok(())
}

pub fn load_model<T: Scalar>(path: impl AsRef<Path>) -> Result<(ClassifierModel<T>, ModelMetadata), ModelError> {
    model_from_json(&fs::read_to_string(path)?)
}

pub fn model_from_json<T: Scalar>(body: &str) -> Result<(ClassifierModel<T>, ModelMetadata), ModelError> {
    let value: Value = serde_json::from_str(body).map_err(|e| ModelError::Corrupt(e.to_string()))?;
    let version = value
        .get("format_version")
        .and_then(Value::as_u64)
        .ok_or_else(|| ModelError::Corrupt("missing format_version".into()))?;
    if version != u64::from(FORMAT_VERSION) {
        return Err(ModelError::Version {
            found: u32::try_from(version).unwrap_or(u32::MAX),
            expected: FORMAT_VERSION,
        });
    }
    let file: ModelFile = serde_json::from_value(value).map_err(|e| ModelError::Corrupt(e.to_string()))?;
    if file.vocabulary.mode() != file.kind.vocab_mode() {
        return Err(ModelError::Shape(format!("{} model with a {:?} vocabulary", file.kind, file.vocabulary.mode())));
    }
    let mut tensors = TensorReader { tensors: file.parameters.tensors.into_iter() };
    let model = if file.kind.is_linear() {
        let weights = tensors.take("weights", None)?;
        let bias: T = tensors.take_scalar("bias")?;
        tensors.finish()?;
        if weights.iter().any(|v: &T| !v.is_finite()) || !bias.is_finite() {
            return Err(ModelError::NonFinite);
        }
        ClassifierModel::Linear {
            kind: file.kind,
            model: LogisticRegressionModel::from_parts(weights, bias, file.vocabulary)?,
        }
    } else {
        let max_len = file
            .parameters
            .max_len
            .filter(|&m| m > 0)
            .ok_or_else(|| ModelError::Corrupt("recurrent model without a positive max_len".into()))?;
        let network = read_gru(&mut tensors, file.vocabulary.size())?;
        tensors.finish()?;
        ClassifierModel::Recurrent(SequenceClassifier { network, vocab: file.vocabulary, max_len })
    };
    let metadata =
        ModelMetadata { format_version: FORMAT_VERSION, kind: file.kind, market: file.market, config: file.config };
    Ok((model, metadata))
}

fn read_gru<T: Scalar>(tensors: &mut TensorReader, vocab_size: usize) -> Result<GruClassifier<T>, ModelError> {
    let names = GruClassifier::<T>::tensor_names();
    let embedding = tensors.take_matrix(&names[0], Some(vocab_size))?;
    let d_emb = embedding.cols();
    // d_hid is read off the first recurrent matrix
    let probe = tensors.peek_shape().unwrap_or_default();
    let d_hid = probe.first().copied().unwrap_or(0);
    let mut model = GruClassifier::zeros(vocab_size, d_emb, d_hid);
    model.embedding = embedding;
    let shapes = model.tensor_shapes();
    {
        let mut slots = model.param_slices_mut();
        for (i, name) in names.iter().enumerate().skip(1) {
            let data: Vec<T> = tensors.take(name, Some(&shapes[i]))?;
            slots[i].copy_from_slice(&data);
        }
    }
    model.validate()?;
    Ok(model)
}

struct TensorReader {
    tensors: std::vec::IntoIter<Tensor>,
}

impl TensorReader {
    fn peek_shape(&self) -> Option<Vec<usize>> {
        self.tensors.as_slice().first().map(|t| t.shape.clone())
    }

    fn next(&mut self, name: &str) -> Result<Tensor, ModelError> {
        let t = self.tensors.next().ok_or_else(|| ModelError::Corrupt(format!("missing tensor `{name}`")))?;
        if t.name != name {
            return Err(ModelError::Corrupt(format!("expected tensor `{name}`, found `{}`", t.name)));
        }
        if t.data.len() != t.shape.iter().product::<usize>() {
            return Err(ModelError::Shape(format!(
                "tensor `{name}` has {} values for shape {:?}",
                t.data.len(),
                t.shape
            )));
        }
        Ok(t)
    }

    fn take<T: Scalar>(&mut self, name: &str, shape: Option<&[usize]>) -> Result<Vec<T>, ModelError> {
        let t = self.next(name)?;
        if let Some(expected) = shape {
            if t.shape != expected {
                return Err(ModelError::Shape(format!(
                    "tensor `{name}` has shape {:?}, expected {expected:?}",
                    t.shape
                )));
            }
        }
        Ok(t.data.into_iter().map(T::lit).collect())
    }

    fn take_scalar<T: Scalar>(&mut self, name: &str) -> Result<T, ModelError> {
        Ok(self.take(name, Some(&[]))?[0])
    }

    fn take_matrix<T: Scalar>(&mut self, name: &str, rows: Option<usize>) -> Result<Matrix<T>, ModelError> {
        let t = self.next(name)?;
        let [r, c] = t.shape[..] else {
            return Err(ModelError::Shape(format!("tensor `{name}` is not a matrix")));
        };
        if let Some(expected) = rows {
            if r != expected {
                return Err(ModelError::Shape(format!(
                    "tensor `{name}` has {r} rows but the vocabulary has {expected} entries"
                )));
            }
        }
        Matrix::from_vec(r, c, t.data.into_iter().map(T::lit).collect())
            .ok_or_else(|| ModelError::Shape(format!("tensor `{name}` size mismatch")))
    }

    fn finish(mut self) -> Result<(), ModelError> {
        match self.tensors.next() {
            Some(t) => Err(ModelError::Corrupt(format!("unexpected tensor `{}`", t.name))),
            None => Ok(()),
        }
    }
}
