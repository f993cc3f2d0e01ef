use serde::{Deserialize, Serialize};

use super::RatingEvent;
use crate::error::{Error, Result};
use crate::kernel::ContextVector;

/// Context code meaning "not recorded".
pub const UNKNOWN_CODE: i64 = -1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EncodingScheme {
    #[default]
    OneHot,
    NormalizedOrdinal,
}

/// Fitted state of one context column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnEncoding {
    pub name: String,
    /// Sorted distinct codes seen at fit time, `-1` included when present.
    pub categories: Vec<i64>,
    /// Range of known (non-`-1`) codes.
    pub min: i64,
    pub max: i64,
}

impl ColumnEncoding {
    fn width(&self, scheme: EncodingScheme) -> usize {
        match scheme {
            EncodingScheme::OneHot => self.categories.len(),
            EncodingScheme::NormalizedOrdinal => 1,
        }
    }
}

/// Maps raw context codes to the numeric context vector `c`.
///
/// One-hot gives each column a block with exactly one active entry; the
/// unknown code is its own category. Normalized-ordinal maps each column to
/// `(value - min) / (max - min)`, with unknown at 0.5 and single-valued
/// columns at 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextEncoder {
    scheme: EncodingScheme,
    columns: Vec<ColumnEncoding>,
    dim: usize,
}

impl ContextEncoder {
    pub fn fit(events: &[RatingEvent], names: Vec<String>, scheme: EncodingScheme) -> Result<Self> {
        if names.is_empty() {
            return Err(Error::Config("at least one context column is required".into()));
        }
        let mut columns = Vec::with_capacity(names.len());
        for (col, name) in names.into_iter().enumerate() {
            let mut categories: Vec<i64> = Vec::new();
            for ev in events {
                let code = *ev.context_attrs.get(col).ok_or(Error::Dimension {
                    expected: col + 1,
                    actual: ev.context_attrs.len(),
                })?;
                if let Err(pos) = categories.binary_search(&code) {
                    categories.insert(pos, code);
                }
            }
            let known = categories.iter().copied().filter(|&c| c != UNKNOWN_CODE);
            let min = known.clone().min().unwrap_or(0);
            let max = known.max().unwrap_or(0);
            columns.push(ColumnEncoding {
                name,
                categories,
                min,
                max,
            });
        }
        Ok(Self::from_columns(scheme, columns))
    }

    pub fn from_columns(scheme: EncodingScheme, columns: Vec<ColumnEncoding>) -> Self {
        let dim = columns.iter().map(|c| c.width(scheme)).sum();
        ContextEncoder {
            scheme,
            columns,
            dim,
        }
    }

    pub fn scheme(&self) -> EncodingScheme {
        self.scheme
    }

    pub fn columns(&self) -> &[ColumnEncoding] {
        &self.columns
    }

    /// Encoded dimension `d`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn encode(&self, attrs: &[i64]) -> Result<ContextVector> {
        if attrs.len() != self.columns.len() {
            return Err(Error::Dimension {
                expected: self.columns.len(),
                actual: attrs.len(),
            });
        }
        let mut out = Vec::with_capacity(self.dim);
        for (col, &code) in self.columns.iter().zip(attrs) {
            match self.scheme {
                EncodingScheme::OneHot => {
                    let pos = col.categories.binary_search(&code).map_err(|_| Error::Encoding {
                        column: col.name.clone(),
                        reason: format!("category {code} not seen when fitting"),
                    })?;
                    let start = out.len();
                    out.resize(start + col.categories.len(), 0.0);
                    out[start + pos] = 1.0;
                }
                EncodingScheme::NormalizedOrdinal => {
                    if code == UNKNOWN_CODE {
                        out.push(0.5);
                    } else if code < col.min || code > col.max {
                        return Err(Error::Encoding {
                            column: col.name.clone(),
                            reason: format!("value {code} outside fitted range [{}, {}]", col.min, col.max),
                        });
                    } else if col.max == col.min {
                        out.push(0.0);
                    } else {
                        out.push((code - col.min) as f64 / (col.max - col.min) as f64);
                    }
                }
            }
        }
        Ok(ContextVector(out))
    }
}
