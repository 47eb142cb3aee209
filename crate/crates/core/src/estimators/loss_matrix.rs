//! Recorded loss evaluations read from CSV.
//!
//! ```text
//! m=3
//! 0.0,1.0,0.5
//! 0.25,0,1
//! ```
//!
//! Row `t` holds the losses of posterior draw `t` (draw-index order) on each
//! of the `m` examples. The matrix is both the sampler (draw `t` is row `t`)
//! and the oracle.

use std::io::Read;

use sha2::{Digest, Sha256};

use super::{LossOracle, PosteriorSampler};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct LossMatrix {
    m: usize,
    cells: Vec<f64>,
    digest: String,
    seed: u64,
}

impl LossMatrix {
    /// Parse and eagerly validate a loss matrix.
    ///
    /// Errors name the 1-based line and column of the first offending cell.
    pub fn parse(text: &str) -> Result<Self> {
        let digest = hex::encode(Sha256::digest(text.as_bytes()));
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let mut records = reader.records();

        let header = records
            .next()
            .ok_or_else(|| Error::Matrix("empty file, expected header `m=<int>`".into()))?
            .map_err(|e| Error::Matrix(e.to_string()))?;
        let m = match (header.len(), header.get(0).and_then(|h| h.strip_prefix("m="))) {
            (1, Some(v)) => v
                .trim()
                .parse::<usize>()
                .map_err(|_| Error::Matrix(format!("line 1: bad header value `{v}`")))?,
            _ => return Err(Error::Matrix("line 1: expected header `m=<int>`".into())),
        };
        if m == 0 {
            return Err(Error::Matrix("line 1: m must be at least 1".into()));
        }

        let mut cells = Vec::new();
        for record in records {
            let record = record.map_err(|e| Error::Matrix(e.to_string()))?;
            let line = record.position().map(|p| p.line()).unwrap_or(0);
            if record.len() == 1 && record.get(0) == Some("") {
                continue;
            }
            if record.len() != m {
                return Err(Error::Matrix(format!(
                    "line {line}: expected {m} columns, found {}",
                    record.len()
                )));
            }
            for (col, field) in record.iter().enumerate() {
                let value: f64 = field.parse().map_err(|_| {
                    Error::Matrix(format!("line {line}, column {}: not a number: `{field}`", col + 1))
                })?;
                if !(0.0..=1.0).contains(&value) {
                    return Err(Error::Matrix(format!(
                        "line {line}, column {}: value {field} outside [0, 1]",
                        col + 1
                    )));
                }
                cells.push(value);
            }
        }
        if cells.is_empty() {
            return Err(Error::Matrix("no loss rows".into()));
        }
        Ok(Self { m, cells, digest, seed: 0 })
    }

    pub fn from_reader<R: Read>(mut reader: R) -> std::io::Result<Result<Self>> {
        let mut text = String::new();
        reader.read_to_string(&mut text)?;
        Ok(Self::parse(&text))
    }

    /// Record the seed that generated the draws, for provenance.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn rows(&self) -> usize {
        self.cells.len() / self.m
    }

    /// SHA-256 of the file contents, hex encoded.
    pub fn digest(&self) -> &str {
        &self.digest
    }

    pub fn row(&self, t: usize) -> Option<&[f64]> {
        self.cells.get(t * self.m..(t + 1) * self.m)
    }

    /// Render in the on-disk format.
    pub fn to_csv(rows: &[Vec<f64>]) -> String {
        let m = rows.first().map_or(0, Vec::len);
        let mut out = format!("m={m}\n");
        for row in rows {
            let line: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
            out.push_str(&line.join(","));
            out.push('\n');
        }
        out
    }
}

impl PosteriorSampler for LossMatrix {
    type Hypothesis = u64;

    fn seed(&self) -> u64 {
        self.seed
    }

    fn draw(&self, t: u64) -> Result<u64> {
        if t < self.rows() as u64 {
            Ok(t)
        } else {
            Err(Error::Dimension(format!("draw {t} beyond the {} recorded rows", self.rows())))
        }
    }

    fn capacity(&self) -> Option<u64> {
        Some(self.rows() as u64)
    }
}

impl LossOracle<u64> for LossMatrix {
    fn loss(&self, row: &u64, example: usize) -> Result<f64> {
        self.row(*row as usize)
            .and_then(|r| r.get(example))
            .copied()
            .ok_or_else(|| Error::Dimension(format!("cell ({row}, {example}) out of range")))
    }
}
