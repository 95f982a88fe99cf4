//! Feedforward ReLU networks: representation, evaluation, serialization and
//! the input-layer surgery used by the perturbation encoders.
//!
//! A [`Network`] is an ordered list of dense affine layers. Hidden layers
//! normally use ReLU; the final layer is always affine-only. Identity
//! activations are also legal on hidden layers because the perturbation
//! encoders prepend an affine (identity-activated) input layer.
//!
//! All operations are pure; networks are immutable after construction and
//! safe to share across threads.

mod format;

pub use format::{load_network, load_network_str, save_network, save_network_string};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum NetworkError {
    #[error("malformed network document: {0}")]
    Malformed(String),
    /// `layer` is the 1-based position within the document's layer list.
    #[error("dimension mismatch at layer {layer}: expected {expected} input columns, found {found}")]
    DimensionMismatch {
        layer: usize,
        expected: usize,
        found: usize,
    },
    #[error("layer {layer}: bias length {biases} does not match weight row count {rows}")]
    BiasMismatch {
        layer: usize,
        rows: usize,
        biases: usize,
    },
    #[error("layer {layer}: ragged weight matrix")]
    RaggedMatrix { layer: usize },
    #[error("layer {layer}: unsupported activation {name:?} (expected \"relu\" or \"identity\")")]
    UnsupportedActivation { layer: usize, name: String },
    #[error("layer {layer}: weights and biases must be finite")]
    NonFinite { layer: usize },
    #[error("final layer must be affine-only (identity activation)")]
    FinalLayerNotAffine,
    #[error("network must contain at least one layer")]
    Empty,
    #[error("layer {layer}: weight matrix must have at least one row and one column")]
    EmptyLayer { layer: usize },
    #[error("class_labels has {labels} entries but the network has {outputs} outputs")]
    LabelCount { labels: usize, outputs: usize },
    #[error("input length {found} does not match network input dimension {expected}")]
    InputLength { expected: usize, found: usize },
    #[error("prepended layer has {found} rows but the network input dimension is {expected}")]
    PrependRows { expected: usize, found: usize },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// Per-layer activation. Hidden layers of a trained classifier use
/// [`Activation::Relu`]; encoder-prepended layers and output layers are
/// [`Activation::Identity`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    Relu,
    Identity,
}

/// Dense row-major matrix of `f64` weights; rows = output dimension,
/// cols = input dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    /// `data` is row-major and must have exactly `rows * cols` entries.
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "matrix data length");
        Matrix { rows, cols, data }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged matrix rows");
            data.extend_from_slice(row);
        }
        Matrix::new(r, c, data)
    }

    /// n-by-n identity.
    pub fn identity(n: usize) -> Self {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            data[i * n + i] = 1.0;
        }
        Matrix::new(n, n, data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// Matrix-vector product followed by a bias add: `self * x + bias`.
    /// Accumulates left to right in index order.
    pub fn affine(&self, x: &[f64], bias: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.cols);
        debug_assert_eq!(bias.len(), self.rows);
        (0..self.rows)
            .map(|r| {
                let mut acc = 0.0;
                for (w, v) in self.row(r).iter().zip(x) {
                    acc += w * v;
                }
                acc + bias[r]
            })
            .collect()
    }
}

/// One dense layer: `activation(weights * x + biases)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    weights: Matrix,
    biases: Vec<f64>,
    activation: Activation,
}

impl Layer {
    pub fn new(weights: Matrix, biases: Vec<f64>, activation: Activation) -> Self {
        assert_eq!(weights.rows(), biases.len(), "bias length");
        Layer {
            weights,
            biases,
            activation,
        }
    }

    pub fn weights(&self) -> &Matrix {
        &self.weights
    }

    pub fn biases(&self) -> &[f64] {
        &self.biases
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn out_dim(&self) -> usize {
        self.weights.rows()
    }

    pub fn in_dim(&self) -> usize {
        self.weights.cols()
    }

    fn all_finite(&self) -> bool {
        self.weights.data.iter().all(|w| w.is_finite())
            && self.biases.iter().all(|b| b.is_finite())
    }
}

/// A layered feedforward network. Immutable once constructed; every
/// constructor validates the dimension chain and the affine-only output
/// layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    input_dim: usize,
    layers: Vec<Layer>,
    class_labels: Option<Vec<String>>,
}

impl Network {
    pub fn new(
        input_dim: usize,
        layers: Vec<Layer>,
        class_labels: Option<Vec<String>>,
    ) -> Result<Self, NetworkError> {
        if layers.is_empty() {
            return Err(NetworkError::Empty);
        }
        let mut prev = input_dim;
        for (i, layer) in layers.iter().enumerate() {
            let pos = i + 1; // 1-based in error messages
            if layer.out_dim() == 0 || layer.in_dim() == 0 {
                return Err(NetworkError::EmptyLayer { layer: pos });
            }
            if layer.in_dim() != prev {
                return Err(NetworkError::DimensionMismatch {
                    layer: pos,
                    expected: prev,
                    found: layer.in_dim(),
                });
            }
            if !layer.all_finite() {
                return Err(NetworkError::NonFinite { layer: pos });
            }
            prev = layer.out_dim();
        }
        if layers.last().unwrap().activation() != Activation::Identity {
            return Err(NetworkError::FinalLayerNotAffine);
        }
        if let Some(labels) = &class_labels {
            if labels.len() != prev {
                return Err(NetworkError::LabelCount {
                    labels: labels.len(),
                    outputs: prev,
                });
            }
        }
        Ok(Network {
            input_dim,
            layers,
            class_labels,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().unwrap().out_dim()
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn class_labels(&self) -> Option<&[String]> {
        self.class_labels.as_deref()
    }

    /// Number of ReLU-activated neurons over all layers.
    pub fn relu_count(&self) -> usize {
        self.layers
            .iter()
            .filter(|l| l.activation() == Activation::Relu)
            .map(Layer::out_dim)
            .sum()
    }

    /// Forward pass. Hidden ReLU layers apply `max(0, x)` elementwise; the
    /// output layer is affine.
    pub fn evaluate(&self, input: &[f64]) -> Result<Vec<f64>, NetworkError> {
        if input.len() != self.input_dim {
            return Err(NetworkError::InputLength {
                expected: self.input_dim,
                found: input.len(),
            });
        }
        let mut values = input.to_vec();
        for layer in &self.layers {
            let mut pre = layer.weights.affine(&values, &layer.biases);
            if layer.activation == Activation::Relu {
                for v in &mut pre {
                    *v = v.max(0.0);
                }
            }
            values = pre;
        }
        Ok(values)
    }

    /// Predicted class: argmax of the output scores, ties broken by the
    /// lowest class index.
    pub fn classify(&self, input: &[f64]) -> Result<usize, NetworkError> {
        let out = self.evaluate(input)?;
        Ok(argmax_lowest(&out))
    }

    /// Returns a new network with an identity-activated affine layer in
    /// front: for all `z`, `new.evaluate(z) == self.evaluate(W z + b)` up to
    /// the usual floating-point composition.
    pub fn prepend_layer(&self, weights: Matrix, biases: Vec<f64>) -> Result<Self, NetworkError> {
        if weights.rows() != self.input_dim {
            return Err(NetworkError::PrependRows {
                expected: self.input_dim,
                found: weights.rows(),
            });
        }
        let new_input = weights.cols();
        let mut layers = Vec::with_capacity(self.layers.len() + 1);
        layers.push(Layer::new(weights, biases, Activation::Identity));
        layers.extend(self.layers.iter().cloned());
        Network::new(new_input, layers, self.class_labels.clone())
    }
}

/// Argmax with the lowest index winning ties.
pub fn argmax_lowest(values: &[f64]) -> usize {
    assert!(!values.is_empty());
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Axis-aligned box of network inputs; closed intervals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputBox {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

#[derive(Debug, Error)]
pub enum BoxError {
    #[error("lower and upper bounds have different lengths ({lower} vs {upper})")]
    LengthMismatch { lower: usize, upper: usize },
    #[error("lower bound exceeds upper bound at coordinate {index}")]
    Inverted { index: usize },
    #[error("box bounds must be finite")]
    NonFinite,
}

impl InputBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self, BoxError> {
        if lower.len() != upper.len() {
            return Err(BoxError::LengthMismatch {
                lower: lower.len(),
                upper: upper.len(),
            });
        }
        if lower.iter().chain(upper.iter()).any(|v| !v.is_finite()) {
            return Err(BoxError::NonFinite);
        }
        for (i, (lo, up)) in lower.iter().zip(&upper).enumerate() {
            if lo > up {
                return Err(BoxError::Inverted { index: i });
            }
        }
        Ok(InputBox { lower, upper })
    }

    /// Degenerate box holding exactly one point.
    pub fn point(x: &[f64]) -> Self {
        InputBox {
            lower: x.to_vec(),
            upper: x.to_vec(),
        }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn center(&self) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(l, u)| l + (u - l) / 2.0)
            .collect()
    }

    /// Closed membership test with zero tolerance.
    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(v, (l, u))| *v >= *l && *v <= *u)
    }

    /// True if `other` is contained in `self` (componentwise interval
    /// inclusion).
    pub fn contains_box(&self, other: &InputBox) -> bool {
        self.dim() == other.dim()
            && self
                .lower
                .iter()
                .zip(&other.lower)
                .all(|(outer, inner)| outer <= inner)
            && self
                .upper
                .iter()
                .zip(&other.upper)
                .all(|(outer, inner)| outer >= inner)
    }
}

/// Misclassification property: satisfied by an output vector `y` iff some
/// class other than the true one scores at least as high, `∃ j ≠ c: y_j ≥
/// y_c`. The closed inequality makes boundary ties count as
/// misclassification, so UNSAT is the strictly stronger verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputProperty {
    true_class: usize,
    num_classes: usize,
}

#[derive(Debug, Error)]
#[error("class index {true_class} out of range for {num_classes} classes (need num_classes >= 2)")]
pub struct PropertyError {
    pub true_class: usize,
    pub num_classes: usize,
}

impl OutputProperty {
    pub fn misclassification(true_class: usize, num_classes: usize) -> Result<Self, PropertyError> {
        if num_classes < 2 || true_class >= num_classes {
            return Err(PropertyError {
                true_class,
                num_classes,
            });
        }
        Ok(OutputProperty {
            true_class,
            num_classes,
        })
    }

    pub fn true_class(&self) -> usize {
        self.true_class
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn satisfied_by(&self, outputs: &[f64]) -> bool {
        debug_assert_eq!(outputs.len(), self.num_classes);
        let yc = outputs[self.true_class];
        outputs
            .iter()
            .enumerate()
            .any(|(j, yj)| j != self.true_class && *yj >= yc)
    }
}
