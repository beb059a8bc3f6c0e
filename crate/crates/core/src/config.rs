//! JSON file form of a comparison constellation.
//!
//! ```json
//! {"n": 3, "m": 3, "w": "r", "g": "1", "lambda": "0", "h": "0", "tangency": "lower"}
//! ```
//!
//! Unknown fields are rejected, and every invalid field is reported, not
//! only the first.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::constellation::{Constellation, Tangency};
use crate::error::{Error, Result};
use crate::expr::RadialExpr;
use crate::model::ModelSpace;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstellationConfig {
    pub n: usize,
    pub m: usize,
    pub w: String,
    pub g: String,
    pub lambda: String,
    pub h: String,
    pub tangency: Tangency,
}

impl ConstellationConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn from_constellation(c: &Constellation) -> Self {
        ConstellationConfig {
            n: c.ambient_dim(),
            m: c.dim(),
            w: c.model().warping().to_string(),
            g: c.g().to_string(),
            lambda: c.lambda().to_string(),
            h: c.h().to_string(),
            tangency: c.tangency(),
        }
    }

    /// Parses every expression and checks the dimensions, collecting one
    /// diagnostic per bad field.
    pub fn build(&self) -> Result<Constellation> {
        let mut problems = Vec::new();
        let mut parse = |field: &str, text: &str| match RadialExpr::parse(text) {
            Ok(e) => Some(e),
            Err(e) => {
                problems.push(format!("field `{field}`: {e}"));
                None
            }
        };
        let w = parse("w", &self.w);
        let g = parse("g", &self.g);
        let lambda = parse("lambda", &self.lambda);
        let h = parse("h", &self.h);
        if self.m < 2 {
            problems.push(format!("field `m`: dimension must be at least 2, got {}", self.m));
        }
        if self.n < self.m {
            problems.push(format!("field `n`: ambient dimension {} is below m = {}", self.n, self.m));
        }
        match (w, g, lambda, h) {
            (Some(w), Some(g), Some(lambda), Some(h)) if problems.is_empty() => {
                let model = ModelSpace::new(self.m, w)?;
                Constellation::new(self.n, model, g, lambda, h, self.tangency)
            }
            _ => Err(Error::Config(problems.join("; "))),
        }
    }
}

/// Reads and builds a constellation from a JSON file.
pub fn load_constellation(path: impl AsRef<Path>) -> Result<Constellation> {
    ConstellationConfig::load(path)?.build()
}
