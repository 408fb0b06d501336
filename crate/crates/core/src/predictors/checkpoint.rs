//! Versioned text checkpoints. Values are stored as the hex bit patterns of
//! their `f64`s, so a save/load cycle is bit-exact.
//!
//! ```text
//! delmix-checkpoint v1
//! meta <key> <value>
//! param <name> <rows> <cols> <hex> <hex> ...
//! ```

use std::fmt::Write as _;

use super::PredictorError;
use crate::diffengine::{Matrix, ParamSet};

pub const MAGIC: &str = "delmix-checkpoint v1";

#[derive(Clone, Debug, PartialEq, Default)]
pub struct Checkpoint {
    pub meta: Vec<(String, String)>,
    pub params: ParamSet,
}

impl Checkpoint {
    pub fn meta(&self, key: &str) -> Option<&str> {
        self.meta.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn require(&self, key: &str) -> Result<&str, PredictorError> {
        self.meta(key).ok_or_else(|| PredictorError::Checkpoint(format!("missing meta `{key}`")))
    }

    pub fn parse_meta<T: std::str::FromStr>(&self, key: &str) -> Result<T, PredictorError> {
        let v = self.require(key)?;
        v.parse().map_err(|_| PredictorError::Checkpoint(format!("bad value `{v}` for `{key}`")))
    }

    pub fn set(&mut self, key: impl Into<String>, value: impl ToString) {
        self.meta.push((key.into(), value.to_string()));
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "{MAGIC}").unwrap();
        for (k, v) in &self.meta {
            writeln!(out, "meta {k} {v}").unwrap();
        }
        for (name, m) in self.params.iter() {
            write!(out, "param {name} {} {}", m.rows(), m.cols()).unwrap();
            for x in m.as_slice() {
                write!(out, " {:016x}", x.to_bits()).unwrap();
            }
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, PredictorError> {
        let err = |line: usize, msg: &str| PredictorError::Checkpoint(format!("line {line}: {msg}"));
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, MAGIC)) => {}
            _ => return Err(err(1, "not a delmix checkpoint (bad header)")),
        }
        let mut ck = Checkpoint::default();
        for (i, line) in lines {
            let n = i + 1;
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix("meta ") {
                let (k, v) = rest.split_once(' ').unwrap_or((rest, ""));
                ck.meta.push((k.to_string(), v.to_string()));
            } else if let Some(rest) = line.strip_prefix("param ") {
                let mut it = rest.split(' ');
                let name = it.next().ok_or_else(|| err(n, "missing name"))?;
                let rows: usize = it.next().and_then(|s| s.parse().ok()).ok_or_else(|| err(n, "bad rows"))?;
                let cols: usize = it.next().and_then(|s| s.parse().ok()).ok_or_else(|| err(n, "bad cols"))?;
                let data = it
                    .map(|h| u64::from_str_radix(h, 16).map(f64::from_bits).map_err(|_| err(n, "bad value")))
                    .collect::<Result<Vec<_>, _>>()?;
                if data.len() != rows * cols {
                    return Err(err(n, "value count does not match shape"));
                }
                ck.params.push(name, Matrix::from_vec(rows, cols, data));
            } else {
                return Err(err(n, "unrecognised record"));
            }
        }
        Ok(ck)
    }
}
