//! Dense symmetric positive-definite solves.

/// Lower-triangular Cholesky factor stored as ragged rows, so that a new
/// row can be appended without touching existing ones.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Cholesky {
    rows: Vec<Vec<f64>>,
}

impl Cholesky {
    pub fn empty() -> Self {
        Cholesky { rows: Vec::new() }
    }

    /// Factors a full symmetric matrix given as rows.
    pub fn factor(a: &[Vec<f64>]) -> Option<Self> {
        let mut c = Cholesky::empty();
        for (i, row) in a.iter().enumerate() {
            c.push_row(&row[..=i])?;
        }
        Some(c)
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn truncate(&mut self, n: usize) {
        self.rows.truncate(n);
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    /// Extends the factor by one row/column. `a_row` holds the new
    /// matrix row up to and including the diagonal. Returns `None` and
    /// leaves the factor unchanged when the result is not positive definite.
    pub fn push_row(&mut self, a_row: &[f64]) -> Option<()> {
        let i = self.rows.len();
        debug_assert_eq!(a_row.len(), i + 1);
        let mut new = Vec::with_capacity(i + 1);
        for j in 0..i {
            let lj = &self.rows[j];
            let s: f64 = new.iter().zip(lj.iter()).map(|(a, b)| a * b).sum();
            new.push((a_row[j] - s) / lj[j]);
        }
        let d = a_row[i] - new.iter().map(|v| v * v).sum::<f64>();
        if !(d > 0.0) || !d.is_finite() {
            return None;
        }
        new.push(d.sqrt());
        self.rows.push(new);
        Some(())
    }

    /// Solves L z = b.
    pub fn forward(&self, b: &[f64]) -> Vec<f64> {
        let mut z = Vec::with_capacity(b.len());
        for (i, row) in self.rows.iter().enumerate() {
            let s: f64 = row[..i].iter().zip(&z).map(|(a, b)| a * b).sum();
            z.push((b[i] - s) / row[i]);
        }
        z
    }

    /// Solves Lᵀ x = z.
    pub fn backward(&self, z: &[f64]) -> Vec<f64> {
        let n = self.rows.len();
        let mut x = z.to_vec();
        for i in (0..n).rev() {
            x[i] /= self.rows[i][i];
            let xi = x[i];
            for (k, xk) in x.iter_mut().enumerate().take(i) {
                *xk -= self.rows[i][k] * xi;
            }
        }
        x
    }

    /// Solves (L Lᵀ) x = b.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        self.backward(&self.forward(b))
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_small_system() {
        let a = vec![vec![4.0, 2.0, 0.4], vec![2.0, 5.0, 1.0], vec![0.4, 1.0, 3.0]];
        let c = Cholesky::factor(&a).unwrap();
        for (i, r) in c.rows().iter().enumerate() {
            assert_eq!(r.len(), i + 1);
            assert!(r[i] > 0.0);
        }
        let x = c.solve(&[1.0, 2.0, 3.0]);
        for (row, b) in a.iter().zip([1.0, 2.0, 3.0]) {
            assert!((dot(row, &x) - b).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_indefinite() {
        assert!(Cholesky::factor(&[vec![1.0, 2.0], vec![2.0, 1.0]]).is_none());
        let mut c = Cholesky::factor(&[vec![1.0]]).unwrap();
        assert!(c.push_row(&[1.0, 1.0]).is_none());
        assert_eq!(c.len(), 1);
    }
}
