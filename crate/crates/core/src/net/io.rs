//! JSON network files:
//!
//! ```json
//! {"layers": [{"weights": [[2.0]], "bias": [1.0], "activation": "relu"}]}
//! ```
//!
//! Floats are written in shortest round-trip form and parsed exactly, so a
//! save/load cycle reproduces every weight bit for bit.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ActivationKind, PwlNetwork};
use crate::error::{Error, Result};
use crate::linalg::Matrix;

#[derive(Serialize, Deserialize)]
struct NetworkFile {
    layers: Vec<LayerFile>,
}

#[derive(Serialize, Deserialize)]
struct LayerFile {
    weights: Vec<Vec<f64>>,
    bias: Vec<f64>,
    activation: String,
}

pub fn network_to_json(net: &PwlNetwork) -> String {
    let file = NetworkFile {
        layers: net
            .layers()
            .iter()
            .map(|l| LayerFile {
                weights: l.weights().to_rows(),
                bias: l.bias().to_vec(),
                activation: l.activation().name().to_string(),
            })
            .collect(),
    };
    serde_json::to_string_pretty(&file).expect("network serializes")
}

pub fn network_from_json(text: &str) -> Result<PwlNetwork> {
    let file: NetworkFile = serde_json::from_str(text)
        .map_err(|e| Error::Parse(format!("network file: {e}")))?;
    let raw = file
        .layers
        .into_iter()
        .enumerate()
        .map(|(i, l)| {
            let activation = ActivationKind::from_name(&l.activation).ok_or_else(|| {
                Error::Parse(format!(
                    "layers[{i}].activation: unknown activation {:?}",
                    l.activation
                ))
            })?;
            let weights = Matrix::from_rows(&l.weights).map_err(|_| Error::Validation {
                layer: i,
                message: "weights rows have unequal lengths".into(),
            })?;
            Ok((weights, l.bias, activation))
        })
        .collect::<Result<Vec<_>>>()?;
    PwlNetwork::from_raw_layers(raw)
}

pub fn save_network(net: &PwlNetwork, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, network_to_json(net))?;
    Ok(())
}

pub fn load_network(path: impl AsRef<Path>) -> Result<PwlNetwork> {
    network_from_json(&fs::read_to_string(path)?)
}
