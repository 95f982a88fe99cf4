//! The network JSON document format.
//!
//! Weights and biases are serialized as decimal strings produced by Rust's
//! shortest-round-trip float formatting, so `save . load` is the identity on
//! documents and `load . save` is the identity on networks, bit for bit.
//! Loaders also accept plain JSON numbers for hand-written files.

use super::{Activation, Layer, Matrix, Network, NetworkError};
use serde::de::{self, Deserializer, Visitor};
use serde::ser::Serializer;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::Path;

/// An `f64` that serializes as a decimal string with full round-trip
/// precision.
#[derive(Debug, Clone, Copy, PartialEq)]
struct FloatRepr(f64);

impl Serialize for FloatRepr {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.0.to_string())
    }
}

impl<'de> Deserialize<'de> for FloatRepr {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct FloatVisitor;
        impl Visitor<'_> for FloatVisitor {
            type Value = FloatRepr;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a decimal string or a JSON number")
            }

            fn visit_str<E: de::Error>(self, s: &str) -> Result<FloatRepr, E> {
                let value: f64 = s
                    .trim()
                    .parse()
                    .map_err(|_| E::custom(format!("invalid decimal string {s:?}")))?;
                if !value.is_finite() {
                    return Err(E::custom(format!("non-finite value {s:?}")));
                }
                Ok(FloatRepr(value))
            }

            fn visit_f64<E: de::Error>(self, v: f64) -> Result<FloatRepr, E> {
                if !v.is_finite() {
                    return Err(E::custom("non-finite value"));
                }
                Ok(FloatRepr(v))
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> Result<FloatRepr, E> {
                Ok(FloatRepr(v as f64))
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> Result<FloatRepr, E> {
                Ok(FloatRepr(v as f64))
            }
        }
        deserializer.deserialize_any(FloatVisitor)
    }
}

#[derive(Serialize, Deserialize)]
struct LayerDoc {
    weights: Vec<Vec<FloatRepr>>,
    biases: Vec<FloatRepr>,
    activation: String,
}

#[derive(Serialize, Deserialize)]
struct NetworkDoc {
    input_dim: usize,
    layers: Vec<LayerDoc>,
    #[serde(skip_serializing_if = "Option::is_none")]
    class_labels: Option<Vec<String>>,
}

fn layer_from_doc(doc: LayerDoc, pos: usize) -> Result<Layer, NetworkError> {
    let rows = doc.weights.len();
    let cols = doc.weights.first().map_or(0, Vec::len);
    if doc.weights.iter().any(|row| row.len() != cols) {
        return Err(NetworkError::RaggedMatrix { layer: pos });
    }
    if doc.biases.len() != rows {
        return Err(NetworkError::BiasMismatch {
            layer: pos,
            rows,
            biases: doc.biases.len(),
        });
    }
    let activation = match doc.activation.as_str() {
        "relu" => Activation::Relu,
        "identity" => Activation::Identity,
        other => {
            return Err(NetworkError::UnsupportedActivation {
                layer: pos,
                name: other.to_string(),
            })
        }
    };
    let data: Vec<f64> = doc.weights.iter().flatten().map(|f| f.0).collect();
    let biases: Vec<f64> = doc.biases.iter().map(|f| f.0).collect();
    Ok(Layer::new(Matrix::new(rows, cols, data), biases, activation))
}

fn layer_to_doc(layer: &Layer) -> LayerDoc {
    LayerDoc {
        weights: (0..layer.out_dim())
            .map(|r| layer.weights().row(r).iter().map(|w| FloatRepr(*w)).collect())
            .collect(),
        biases: layer.biases().iter().map(|b| FloatRepr(*b)).collect(),
        activation: match layer.activation() {
            Activation::Relu => "relu".to_string(),
            Activation::Identity => "identity".to_string(),
        },
    }
}

/// Parses a network document from a JSON string.
pub fn load_network_str(json: &str) -> Result<Network, NetworkError> {
    let doc: NetworkDoc =
        serde_json::from_str(json).map_err(|e| NetworkError::Malformed(e.to_string()))?;
    let layers = doc
        .layers
        .into_iter()
        .enumerate()
        .map(|(i, l)| layer_from_doc(l, i + 1))
        .collect::<Result<Vec<_>, _>>()?;
    Network::new(doc.input_dim, layers, doc.class_labels)
}

/// Reads and parses a network document from a file.
pub fn load_network(path: impl AsRef<Path>) -> Result<Network, NetworkError> {
    let json = std::fs::read_to_string(path)?;
    load_network_str(&json)
}

/// Serializes a network to its canonical JSON document.
pub fn save_network_string(net: &Network) -> String {
    let doc = NetworkDoc {
        input_dim: net.input_dim(),
        layers: net.layers().iter().map(layer_to_doc).collect(),
        class_labels: net.class_labels().map(<[String]>::to_vec),
    };
    let mut out = serde_json::to_string_pretty(&doc).expect("network document serialization");
    out.push('\n');
    out
}

/// Writes the canonical JSON document to a file.
pub fn save_network(net: &Network, path: impl AsRef<Path>) -> Result<(), NetworkError> {
    std::fs::write(path, save_network_string(net))?;
    Ok(())
}
