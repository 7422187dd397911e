//! Dense row-major feature matrices and the elementary reductions shared by
//! every objective.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Continuous intermediate representation: an `L x D` matrix of 64-bit reals.
///
/// The shape is fixed at construction and every entry is finite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMatrix")]
pub struct FeatureMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

#[derive(Deserialize)]
struct RawMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl TryFrom<RawMatrix> for FeatureMatrix {
    type Error = Error;

    fn try_from(raw: RawMatrix) -> Result<Self> {
        FeatureMatrix::new(raw.rows, raw.cols, raw.data)
    }
}

impl FeatureMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::EmptyShape { rows, cols });
        }
        if data.len() != rows * cols {
            return Err(Error::DataLength {
                expected: rows * cols,
                got: data.len(),
            });
        }
        if !data.iter().all(|x| x.is_finite()) {
            return Err(Error::NonFinite {
                context: "feature matrix entries",
            });
        }
        Ok(FeatureMatrix { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "zero-sized matrix");
        FeatureMatrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::EmptyShape { rows: 0, cols: 0 });
        }
        let cols = rows[0].len();
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::DataLength {
                expected: cols,
                got: rows.iter().map(Vec::len).max().unwrap_or(0),
            });
        }
        Self::new(rows.len(), cols, rows.concat())
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        assert!(rows > 0 && cols > 0, "zero-sized matrix");
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        FeatureMatrix { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.cols)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Entrywise map. The shape is preserved; the caller is responsible for
    /// keeping entries finite.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> FeatureMatrix {
        FeatureMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn zip_map(&self, other: &FeatureMatrix, f: impl Fn(f64, f64) -> f64) -> Result<FeatureMatrix> {
        self.same_shape(other)?;
        Ok(FeatureMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn same_shape(&self, other: &FeatureMatrix) -> Result<()> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::ShapeMismatch {
                left_rows: self.rows,
                left_cols: self.cols,
                right_rows: other.rows,
                right_cols: other.cols,
            });
        }
        Ok(())
    }
}

/// Sum of squared entrywise differences (squared Frobenius distance).
pub fn frobenius_sq_dist(a: &FeatureMatrix, b: &FeatureMatrix) -> Result<f64> {
    a.same_shape(b)?;
    Ok(a.as_slice()
        .iter()
        .zip(b.as_slice())
        .map(|(&x, &y)| {
            let d = x - y;
            d * d
        })
        .sum())
}

/// Columnwise mean over rows.
pub fn average_rows(h: &FeatureMatrix) -> Vec<f64> {
    let l = h.rows() as f64;
    let mut out = vec![0.0; h.cols()];
    for row in h.iter_rows() {
        for (o, &x) in out.iter_mut().zip(row) {
            *o += x;
        }
    }
    for o in &mut out {
        *o /= l;
    }
    out
}

/// Columnwise maximum over rows.
pub fn max_rows(h: &FeatureMatrix) -> Vec<f64> {
    let mut out = h.row(0).to_vec();
    for row in h.iter_rows().skip(1) {
        for (o, &x) in out.iter_mut().zip(row) {
            if x > *o {
                *o = x;
            }
        }
    }
    out
}

/// Row index attaining the columnwise maximum; ties go to the lowest row.
pub(crate) fn argmax_rows(h: &FeatureMatrix) -> Vec<usize> {
    let mut best = vec![0usize; h.cols()];
    let mut val = h.row(0).to_vec();
    for (i, row) in h.iter_rows().enumerate().skip(1) {
        for j in 0..h.cols() {
            if row[j] > val[j] {
                val[j] = row[j];
                best[j] = i;
            }
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;
    use proptest::prelude::*;

    fn random_matrix(rng: &mut Rng, rows: usize, cols: usize) -> FeatureMatrix {
        FeatureMatrix::from_fn(rows, cols, |_, _| rng.normal())
    }

    #[test]
    fn construction_validates() {
        assert!(FeatureMatrix::new(0, 3, vec![]).is_err());
        assert!(FeatureMatrix::new(2, 2, vec![0.0; 3]).is_err());
        assert!(FeatureMatrix::new(1, 2, vec![f64::NAN, 0.0]).is_err());
        assert!(FeatureMatrix::new(1, 2, vec![f64::INFINITY, 0.0]).is_err());
        assert!(FeatureMatrix::new(2, 2, vec![0.0; 4]).is_ok());
    }

    #[test]
    fn frobenius_identical_matrices_is_zero() {
        let mut rng = Rng::new(3);
        let a = random_matrix(&mut rng, 4, 5);
        assert_eq!(frobenius_sq_dist(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn frobenius_unit_difference_counts_entries() {
        let a = FeatureMatrix::zeros(3, 4);
        let b = a.map(|_| 1.0);
        assert_eq!(frobenius_sq_dist(&a, &b).unwrap(), 12.0);
    }

    #[test]
    fn frobenius_against_bruteforce() {
        let mut rng = Rng::new(11);
        for _ in 0..50 {
            let a = random_matrix(&mut rng, 8, 16);
            let b = random_matrix(&mut rng, 8, 16);
            let mut expect = 0.0;
            for i in 0..8 {
                for j in 0..16 {
                    expect += (a.get(i, j) - b.get(i, j)).powi(2);
                }
            }
            let got = frobenius_sq_dist(&a, &b).unwrap();
            assert!((got - expect).abs() <= 1e-12 * expect.max(1.0));
        }
    }

    #[test]
    fn frobenius_shape_mismatch_errors() {
        let a = FeatureMatrix::zeros(2, 3);
        let b = FeatureMatrix::zeros(3, 2);
        assert!(matches!(
            frobenius_sq_dist(&a, &b),
            Err(Error::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn average_rows_single_row_is_identity() {
        let a = FeatureMatrix::from_rows(&[vec![1.0, -2.0, 3.5]]).unwrap();
        assert_eq!(average_rows(&a), vec![1.0, -2.0, 3.5]);
        assert_eq!(max_rows(&a), vec![1.0, -2.0, 3.5]);
    }

    #[test]
    fn max_rows_ties_go_to_lowest_row() {
        let a = FeatureMatrix::from_rows(&[vec![1.0, 5.0], vec![1.0, 7.0]]).unwrap();
        assert_eq!(argmax_rows(&a), vec![0, 1]);
    }

    #[test]
    fn aggregation_against_bruteforce() {
        let mut rng = Rng::new(17);
        let h = random_matrix(&mut rng, 6, 9);
        let avg = average_rows(&h);
        let max = max_rows(&h);
        for j in 0..9 {
            let col: Vec<f64> = (0..6).map(|i| h.get(i, j)).collect();
            let mean = col.iter().sum::<f64>() / 6.0;
            let mx = col.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            assert!((avg[j] - mean).abs() < 1e-12);
            assert_eq!(max[j], mx);
        }
    }

    #[test]
    fn serde_round_trip_is_bit_exact() {
        let mut rng = Rng::new(23);
        let a = random_matrix(&mut rng, 3, 7);
        let text = serde_json::to_string(&a).unwrap();
        let back: FeatureMatrix = serde_json::from_str(&text).unwrap();
        assert_eq!(a, back);
    }

    #[test]
    fn serde_rejects_invalid_payload() {
        let bad = r#"{"rows":2,"cols":2,"data":[1.0,2.0,3.0]}"#;
        assert!(serde_json::from_str::<FeatureMatrix>(bad).is_err());
    }

    proptest! {
        #[test]
        fn frobenius_is_symmetric_and_nonnegative(
            xs in proptest::collection::vec(-1e3f64..1e3, 12),
            ys in proptest::collection::vec(-1e3f64..1e3, 12),
        ) {
            let a = FeatureMatrix::new(3, 4, xs).unwrap();
            let b = FeatureMatrix::new(3, 4, ys).unwrap();
            let ab = frobenius_sq_dist(&a, &b).unwrap();
            let ba = frobenius_sq_dist(&b, &a).unwrap();
            prop_assert!(ab >= 0.0);
            prop_assert!((ab - ba).abs() <= 1e-9 * ab.max(1.0));
        }

        #[test]
        fn row_permutation_commutes_with_row_aggregations(
            xs in proptest::collection::vec(-1e2f64..1e2, 20),
            swap_a in 0usize..5,
            swap_b in 0usize..5,
        ) {
            let a = FeatureMatrix::new(5, 4, xs).unwrap();
            let mut rows: Vec<Vec<f64>> = a.iter_rows().map(|r| r.to_vec()).collect();
            rows.swap(swap_a, swap_b);
            let b = FeatureMatrix::from_rows(&rows).unwrap();
            let (av_a, av_b) = (average_rows(&a), average_rows(&b));
            for (x, y) in av_a.iter().zip(&av_b) {
                prop_assert!((x - y).abs() <= 1e-12 * x.abs().max(1.0));
            }
            prop_assert_eq!(max_rows(&a), max_rows(&b));
        }
    }
}
