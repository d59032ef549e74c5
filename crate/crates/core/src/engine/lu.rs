//! Dense LU factorization with partial pivoting.
//!
//! The engine needs to know *which* unknown made a system singular so it can
//! name the offending node, which is why this is not delegated to a linear
//! algebra crate.

/// Row-major square matrix.
#[derive(Clone, Debug)]
pub struct DenseMatrix {
    n: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(n: usize) -> Self {
        DenseMatrix {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn add(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.n + c] += v;
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.n + c]
    }
}

/// Packed LU factors: unit lower triangle below the diagonal, upper on and above.
#[derive(Clone, Debug)]
pub struct LuFactors {
    n: usize,
    lu: Vec<f64>,
    perm: Vec<usize>,
}

/// Relative pivot size below which the system is treated as singular.
const PIVOT_TOLERANCE: f64 = 1e-13;

impl LuFactors {
    /// Factors `m`. On failure returns the column whose pivot vanished.
    pub fn factor(m: &DenseMatrix) -> Result<Self, usize> {
        let n = m.n;
        let mut lu = m.data.clone();
        let row_scale: Vec<f64> = (0..n)
            .map(|r| lu[r * n..(r + 1) * n].iter().fold(0.0_f64, |a, &b| a.max(b.abs())))
            .collect();
        let mut scale = row_scale.clone();
        let mut perm: Vec<usize> = (0..n).collect();

        for k in 0..n {
            let mut best = k;
            let mut best_val = 0.0;
            for r in k..n {
                let v = lu[r * n + k].abs();
                if v > best_val {
                    best_val = v;
                    best = r;
                }
            }
            if best_val == 0.0 || best_val <= PIVOT_TOLERANCE * scale[best] {
                return Err(k);
            }
            if best != k {
                for c in 0..n {
                    lu.swap(k * n + c, best * n + c);
                }
                perm.swap(k, best);
                scale.swap(k, best);
            }
            let pivot = lu[k * n + k];
            for r in (k + 1)..n {
                let f = lu[r * n + k] / pivot;
                if f == 0.0 {
                    continue;
                }
                lu[r * n + k] = f;
                for c in (k + 1)..n {
                    lu[r * n + c] -= f * lu[k * n + c];
                }
            }
        }
        Ok(LuFactors { n, lu, perm })
    }

    /// Solves `A x = b` in place of a fresh vector.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for r in 0..n {
            let row = &self.lu[r * n..r * n + r];
            let s: f64 = row.iter().zip(&x[..r]).map(|(a, b)| a * b).sum();
            x[r] -= s;
        }
        for r in (0..n).rev() {
            let row = &self.lu[r * n + r + 1..(r + 1) * n];
            let s: f64 = row.iter().zip(&x[r + 1..]).map(|(a, b)| a * b).sum();
            x[r] = (x[r] - s) / self.lu[r * n + r];
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_small_system() {
        // [[2,1,0],[1,3,1],[0,1,4]] x = [3,5,5] -> x = [1,1,1]
        let mut m = DenseMatrix::zeros(3);
        for (r, c, v) in [
            (0, 0, 2.0),
            (0, 1, 1.0),
            (1, 0, 1.0),
            (1, 1, 3.0),
            (1, 2, 1.0),
            (2, 1, 1.0),
            (2, 2, 4.0),
        ] {
            m.add(r, c, v);
        }
        let x = LuFactors::factor(&m).unwrap().solve(&[3.0, 5.0, 5.0]);
        for v in x {
            assert!((v - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn needs_pivoting() {
        let mut m = DenseMatrix::zeros(2);
        m.add(0, 1, 1.0);
        m.add(1, 0, 1.0);
        let x = LuFactors::factor(&m).unwrap().solve(&[2.0, 3.0]);
        assert_eq!(x, vec![3.0, 2.0]);
    }

    #[test]
    fn reports_singular_column() {
        let mut m = DenseMatrix::zeros(3);
        m.add(0, 0, 1.0);
        m.add(2, 2, 1.0);
        assert_eq!(LuFactors::factor(&m).unwrap_err(), 1);
    }

    #[test]
    fn tiny_but_regular_rows_are_accepted() {
        let mut m = DenseMatrix::zeros(2);
        m.add(0, 0, 1e3);
        m.add(1, 1, 1e-16);
        assert!(LuFactors::factor(&m).is_ok());
    }
}
