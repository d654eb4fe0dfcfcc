//! Dense least squares by Householder QR with column pivoting.
//!
//! Columns are pivoted by largest remaining norm, so the diagonal of `R` is
//! non-increasing in magnitude and a relative cutoff on it reveals rank.

use crate::error::{Error, Result};

/// Relative pivot tolerance on `|R_kk| / |R_00|`.
pub const PIVOT_TOLERANCE: f64 = 1e-12;

/// Row-major design matrix with named columns.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            assert_eq!(r.len(), cols, "ragged matrix rows");
            data.extend_from_slice(r);
        }
        Matrix {
            rows: rows.len(),
            cols,
            data,
        }
    }

    /// Builds from a flat row-major buffer.
    pub fn from_flat(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols);
        Matrix { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn mul_vec(&self, beta: &[f64]) -> Vec<f64> {
        (0..self.rows).map(|i| crate::domain::dot(self.row(i), beta)).collect()
    }

    /// Scales row `i` by `w[i]`.
    pub fn scale_rows(&self, w: &[f64]) -> Matrix {
        let mut out = self.clone();
        for (i, wi) in w.iter().enumerate() {
            for v in &mut out.data[i * self.cols..(i + 1) * self.cols] {
                *v *= wi;
            }
        }
        out
    }

    /// `X' v`.
    pub fn tr_mul_vec(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for (i, vi) in v.iter().enumerate() {
            for (o, x) in out.iter_mut().zip(self.row(i)) {
                *o += x * vi;
            }
        }
        out
    }
}

/// Least-squares solution of `X b ≈ y`.
///
/// Fails with [`Error::RankDeficient`] naming the columns that fall below the
/// pivot tolerance; `names` must have one entry per column.
pub fn least_squares(x: &Matrix, y: &[f64], names: &[String]) -> Result<Vec<f64>> {
    let (m, p) = (x.rows, x.cols);
    assert_eq!(y.len(), m, "response length must match design rows");
    assert_eq!(names.len(), p, "one name per design column");
    if p == 0 {
        return Ok(Vec::new());
    }
    if m < p {
        return Err(Error::RankDeficient {
            columns: names.to_vec(),
        });
    }

    // column-major working copy
    let mut a: Vec<Vec<f64>> = (0..p).map(|j| (0..m).map(|i| x.get(i, j)).collect()).collect();
    let mut rhs = y.to_vec();
    let mut perm: Vec<usize> = (0..p).collect();
    let mut diag = vec![0.0; p];
    let mut r00 = 0.0;

    for k in 0..p {
        let (best, best_norm) = (k..p)
            .map(|j| (j, a[j][k..].iter().map(|v| v * v).sum::<f64>().sqrt()))
            .fold((k, -1.0), |acc, c| if c.1 > acc.1 { c } else { acc });
        a.swap(k, best);
        perm.swap(k, best);
        if k == 0 {
            r00 = best_norm;
        }
        if r00 == 0.0 || best_norm <= PIVOT_TOLERANCE * r00 {
            let mut columns: Vec<String> = perm[k..].iter().map(|&j| names[j].clone()).collect();
            columns.sort();
            return Err(Error::RankDeficient { columns });
        }

        // Householder vector in place of column k below the diagonal.
        let alpha = if a[k][k] > 0.0 { -best_norm } else { best_norm };
        let mut v: Vec<f64> = a[k][k..].to_vec();
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|t| t * t).sum();
        diag[k] = alpha;
        if vnorm2 > 0.0 {
            for col in a.iter_mut().skip(k + 1) {
                let s: f64 = v.iter().zip(&col[k..]).map(|(a, b)| a * b).sum::<f64>() * 2.0 / vnorm2;
                for (c, vi) in col[k..].iter_mut().zip(&v) {
                    *c -= s * vi;
                }
            }
            let s: f64 = v.iter().zip(&rhs[k..]).map(|(a, b)| a * b).sum::<f64>() * 2.0 / vnorm2;
            for (c, vi) in rhs[k..].iter_mut().zip(&v) {
                *c -= s * vi;
            }
        }
    }

    // back substitution on R b = Q'y
    let mut b = vec![0.0; p];
    for k in (0..p).rev() {
        let mut s = rhs[k];
        for j in k + 1..p {
            s -= a[j][k] * b[j];
        }
        b[k] = s / diag[k];
    }
    let mut out = vec![0.0; p];
    for (k, &j) in perm.iter().enumerate() {
        out[j] = b[k];
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(p: usize) -> Vec<String> {
        (0..p).map(|j| format!("c{j}")).collect()
    }

    #[test]
    fn exact_fit() {
        let x = Matrix::from_rows(&[vec![1.0, 0.0], vec![1.0, 1.0], vec![1.0, 2.0], vec![1.0, 3.0]]);
        let y = [1.0, 3.0, 5.0, 7.0];
        let b = least_squares(&x, &y, &names(2)).unwrap();
        assert!((b[0] - 1.0).abs() < 1e-12);
        assert!((b[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn collinear_columns_named() {
        let x = Matrix::from_rows(&[vec![1.0, 2.0, 0.3], vec![1.0, 2.0, 0.1], vec![1.0, 2.0, 0.7]]);
        let err = least_squares(&x, &[1.0, 2.0, 3.0], &names(3)).unwrap_err();
        match err {
            Error::RankDeficient { columns } => {
                assert_eq!(columns.len(), 1);
                assert!(columns[0] == "c0" || columns[0] == "c1");
            }
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn more_columns_than_rows() {
        let x = Matrix::from_rows(&[vec![1.0, 2.0, 3.0]]);
        assert!(least_squares(&x, &[1.0], &names(3)).is_err());
    }
}
