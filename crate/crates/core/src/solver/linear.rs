//! Sparse direct solve of the collocation system with max-abs equilibration.

use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};
use faer::Mat;

use crate::error::{Error, Result};

/// Coordinate-format accumulator for the square collocation matrix.
#[derive(Debug, Clone, Default)]
pub struct TripletMatrix {
    pub size: usize,
    pub entries: Vec<(usize, usize, f64)>,
}

impl TripletMatrix {
    pub fn new(size: usize) -> Self {
        Self { size, entries: Vec::with_capacity(size * 60) }
    }

    #[inline]
    pub fn add(&mut self, row: usize, col: usize, value: f64) {
        if value != 0.0 {
            self.entries.push((row, col, value));
        }
    }

    /// Dense `y = A x`.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.size];
        for &(r, c, v) in &self.entries {
            y[r] += v * x[c];
        }
        y
    }

    /// Row scaling factors `1 / max_j |A_ij|` (1 for empty rows).
    pub fn row_scales(&self) -> Vec<f64> {
        let mut m = vec![0.0f64; self.size];
        for &(r, _, v) in &self.entries {
            m[r] = m[r].max(v.abs());
        }
        m.into_iter().map(|x| if x > 0.0 { 1.0 / x } else { 1.0 }).collect()
    }

    /// Solves `A x = b` after row and column max-abs equilibration.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let n = self.size;
        let rs = self.row_scales();
        let mut cm = vec![0.0f64; n];
        for &(r, c, v) in &self.entries {
            cm[c] = cm[c].max((v * rs[r]).abs());
        }
        if let Some(c) = cm.iter().position(|&x| x == 0.0) {
            return Err(Error::SingularSystem(format!("unknown {c} has an empty column")));
        }
        let cs: Vec<f64> = cm.iter().map(|x| 1.0 / x).collect();
        let trip: Vec<Triplet<usize, usize, f64>> = self
            .entries
            .iter()
            .map(|&(r, c, v)| Triplet::new(r, c, v * rs[r] * cs[c]))
            .collect();
        let a = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &trip)
            .map_err(|e| Error::SingularSystem(format!("matrix assembly failed: {e:?}")))?;
        let lu = a
            .sp_lu()
            .map_err(|e| Error::SingularSystem(format!("LU factorization failed: {e:?}")))?;
        let rhs = Mat::<f64>::from_fn(n, 1, |i, _| b[i] * rs[i]);
        let y = lu.solve(&rhs);
        let x: Vec<f64> = (0..n).map(|i| y[(i, 0)] * cs[i]).collect();
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::SingularSystem("non-finite solution (matrix is numerically singular)".into()));
        }
        let res = self.mul_vec(&x);
        let worst = res
            .iter()
            .zip(b)
            .zip(&rs)
            .map(|((ax, bi), s)| ((ax - bi) * s).abs())
            .fold(0.0, f64::max);
        let xmax = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let bscale = b.iter().zip(&rs).fold(0.0f64, |m, (v, s)| m.max((v * s).abs()));
        if worst > 1e-6 * bscale.max(1e-300) && worst > 1e-14 * xmax {
            return Err(Error::SingularSystem(format!(
                "solution residual {worst:e} relative to right-hand side {bscale:e}; estimated ill-conditioning"
            )));
        }
        Ok(x)
    }
}
