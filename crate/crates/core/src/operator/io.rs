//! Operator description files.
//!
//! An operator is stored as a TOML document listing `n`, `k`, `l` and the
//! coefficient matrices `a` (one per spatial direction, in order) and `a0`,
//! row-major, every entry a `[re, im]` pair:
//!
//! ```toml
//! n = 2
//! k = 1
//! l = 2
//!
//! [[a]]
//! rows = [[[1.0, 0.0]], [[0.0, 0.0]]]
//!
//! [[a]]
//! rows = [[[0.0, 0.0]], [[1.0, 0.0]]]
//!
//! [a0]
//! rows = [[[0.0, 0.0]], [[0.0, 0.0]]]
//! ```
//!
//! Load/save round-trips are lossless: floats are emitted in the shortest
//! representation that parses back to the same bits.

use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{CMatrix, FirstOrderOperator};
use crate::error::{Error, Result};

#[derive(Debug, Serialize, Deserialize)]
struct MatrixDoc {
    /// l rows of k entries, each entry `[re, im]`.
    rows: Vec<Vec<[f64; 2]>>,
}

#[derive(Debug, Serialize, Deserialize)]
struct OperatorDoc {
    n: usize,
    k: usize,
    l: usize,
    a: Vec<MatrixDoc>,
    a0: MatrixDoc,
}

fn matrix_to_doc(m: &CMatrix) -> MatrixDoc {
    let rows = (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
        .collect();
    MatrixDoc { rows }
}

fn matrix_from_doc(doc: &MatrixDoc, l: usize, k: usize, name: &str) -> Result<CMatrix> {
    if doc.rows.len() != l {
        return Err(Error::Parse(format!(
            "matrix {name}: expected {l} rows, found {}",
            doc.rows.len()
        )));
    }
    let mut m = CMatrix::zeros(l, k);
    for (i, row) in doc.rows.iter().enumerate() {
        if row.len() != k {
            return Err(Error::Parse(format!(
                "matrix {name}, row {i}: expected {k} entries, found {}",
                row.len()
            )));
        }
        for (j, &[re, im]) in row.iter().enumerate() {
            m[(i, j)] = Complex64::new(re, im);
        }
    }
    Ok(m)
}

pub fn operator_to_toml(op: &FirstOrderOperator) -> String {
    let doc = OperatorDoc {
        n: op.dim(),
        k: op.components(),
        l: op.rows(),
        a: op.coefficients().iter().map(matrix_to_doc).collect(),
        a0: matrix_to_doc(op.zero_order()),
    };
    toml::to_string(&doc).expect("operator doc serializes")
}

pub fn operator_from_toml(text: &str) -> Result<FirstOrderOperator> {
    let doc: OperatorDoc = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    if doc.a.len() != doc.n {
        return Err(Error::Parse(format!(
            "expected {} coefficient matrices, found {}",
            doc.n,
            doc.a.len()
        )));
    }
    let a = doc
        .a
        .iter()
        .enumerate()
        .map(|(j, m)| matrix_from_doc(m, doc.l, doc.k, &format!("a_{}", j + 1)))
        .collect::<Result<Vec<_>>>()?;
    let a0 = matrix_from_doc(&doc.a0, doc.l, doc.k, "a0")?;
    FirstOrderOperator::new(a, a0)
}

pub fn save_operator(op: &FirstOrderOperator, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, operator_to_toml(op))?;
    Ok(())
}

pub fn load_operator(path: impl AsRef<Path>) -> Result<FirstOrderOperator> {
    let text = std::fs::read_to_string(path)?;
    operator_from_toml(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_lossless() {
        for op in [
            FirstOrderOperator::gradient(2),
            FirstOrderOperator::cauchy_riemann(),
            FirstOrderOperator::holonomic_6x3(),
        ] {
            let text = operator_to_toml(&op);
            let back = operator_from_toml(&text).unwrap();
            assert_eq!(op, back);
        }
    }

    #[test]
    fn round_trip_preserves_awkward_floats() {
        let a = vec![
            CMatrix::from_element(2, 1, Complex64::new(0.1 + 0.2, -1.0 / 3.0)),
            CMatrix::from_element(2, 1, Complex64::new(f64::MIN_POSITIVE, 1e300)),
        ];
        let op = FirstOrderOperator::new(a, CMatrix::zeros(2, 1)).unwrap();
        let back = operator_from_toml(&operator_to_toml(&op)).unwrap();
        assert_eq!(op, back);
    }

    #[test]
    fn rejects_shape_mismatch() {
        let text = r#"
n = 2
k = 1
l = 2
[[a]]
rows = [[[1.0, 0.0]], [[0.0, 0.0]]]
[[a]]
rows = [[[0.0, 0.0]]]
[a0]
rows = [[[0.0, 0.0]], [[0.0, 0.0]]]
"#;
        assert!(operator_from_toml(text).is_err());
    }
}
