//! JSON serialization of the conic model IR.
//!
//! The IR JSON is a direct serde rendering of [`ConicModel`]: every variable
//! (name, kind, structured role), the objective coordinate list, all linear
//! rows with sense and right-hand side, all cones as affine-map triples, and
//! the builder options. Floats use the shortest decimal form that parses back
//! to the identical bit pattern, so the roundtrip is lossless.

use std::fs;
use std::path::Path;

use crate::conic::ConicModel;

use super::{io_err, parse_err, IoError};

pub fn model_to_json(model: &ConicModel) -> String {
    let mut out = serde_json::to_string_pretty(model).expect("model serializes");
    out.push('\n');
    out
}

pub fn model_from_json(text: &str, origin: &Path) -> Result<ConicModel, IoError> {
    serde_json::from_str(text).map_err(|e| parse_err(origin, e.to_string()))
}

pub fn write_ir_json(model: &ConicModel, path: &Path) -> Result<(), IoError> {
    fs::write(path, model_to_json(model)).map_err(|e| io_err(path, e))
}

pub fn read_ir_json(path: &Path) -> Result<ConicModel, IoError> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    model_from_json(&text, path)
}
