//! Matrix literals: a nested array of `[re, im]` pairs, one inner array per row.
//!
//! ```text
//! [[[1, 0], [0, -1]],
//!  [[0, 1], [1,  0]]]
//! ```

use serde::de::{self, Deserializer};
use serde::ser::{SerializeSeq, Serializer};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{ComplexMatrix, C64};

#[derive(Debug, Error)]
pub enum LiteralError {
    #[error("line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
}

pub fn parse_matrix_literal(text: &str) -> Result<ComplexMatrix, LiteralError> {
    serde_json::from_str::<ComplexMatrix>(text).map_err(|e| LiteralError::Syntax {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })
}

pub(crate) fn rows_to_matrix(rows: Vec<Vec<[f64; 2]>>) -> Result<ComplexMatrix, String> {
    if rows.is_empty() {
        return Err("matrix literal has no rows".into());
    }
    let cols = rows[0].len();
    if cols == 0 {
        return Err("matrix literal row 0 is empty".into());
    }
    let mut data = Vec::with_capacity(rows.len() * cols);
    for (i, row) in rows.iter().enumerate() {
        if row.len() != cols {
            return Err(format!(
                "matrix literal row {i} has {} entries, expected {cols}",
                row.len()
            ));
        }
        for (j, [re, im]) in row.iter().enumerate() {
            if !re.is_finite() || !im.is_finite() {
                return Err(format!("matrix literal entry ({i},{j}) is not finite"));
            }
            data.push(C64::new(*re, *im));
        }
    }
    ComplexMatrix::from_row_major(rows.len(), cols, data).map_err(|e| e.to_string())
}

impl Serialize for ComplexMatrix {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut seq = serializer.serialize_seq(Some(self.rows()))?;
        for i in 0..self.rows() {
            let row: Vec<[f64; 2]> = self.row(i).iter().map(|z| [z.re, z.im]).collect();
            seq.serialize_element(&row)?;
        }
        seq.end()
    }
}

impl<'de> Deserialize<'de> for ComplexMatrix {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let rows = Vec::<Vec<[f64; 2]>>::deserialize(deserializer)?;
        rows_to_matrix(rows).map_err(de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_two_by_two() {
        let m = parse_matrix_literal("[[[1,0],[0,-1]],[[0,1],[1,0]]]").unwrap();
        assert_eq!(m.shape(), (2, 2));
        assert_eq!(m[(0, 1)], C64::new(0.0, -1.0));
        assert_eq!(m[(1, 0)], C64::new(0.0, 1.0));
    }

    #[test]
    fn round_trips_through_json() {
        let m = ComplexMatrix::from_fn(2, 3, |i, j| C64::new(i as f64, j as f64 * 0.5));
        let s = serde_json::to_string(&m).unwrap();
        assert_eq!(parse_matrix_literal(&s).unwrap(), m);
    }

    #[test]
    fn rejects_ragged_rows() {
        let err = parse_matrix_literal("[[[1,0],[0,0]],[[1,0]]]").unwrap_err();
        assert!(err.to_string().contains("row 1"));
    }

    #[test]
    fn rejects_empty_and_bad_pairs() {
        assert!(parse_matrix_literal("[]").is_err());
        assert!(parse_matrix_literal("[[]]").is_err());
        assert!(parse_matrix_literal("[[[1]]]").is_err());
        assert!(parse_matrix_literal("[[[1,2,3]]]").is_err());
        assert!(parse_matrix_literal("[[1,0]]").is_err());
    }
}
