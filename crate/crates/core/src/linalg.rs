//! Small dense kernels (row-major storage).

/// Lower Cholesky factor `L` with `A = L L^T`, stored row-major in the lower
/// triangle. The strict upper triangle of the input is ignored.
#[derive(Debug, Clone)]
pub(crate) struct Cholesky {
    n: usize,
    l: Vec<f64>,
}

impl Cholesky {
    /// Factor `a` (n x n, row-major). Returns the failing pivot index when the
    /// matrix is not numerically positive definite.
    pub(crate) fn factor(mut a: Vec<f64>, n: usize) -> Result<Self, usize> {
        debug_assert_eq!(a.len(), n * n);
        for j in 0..n {
            let rest = &mut a[j * n..];
            let row_j = &mut rest[..n];
            let d = row_j[j] - row_j[..j].iter().map(|v| v * v).sum::<f64>();
            if !(d > 0.0 && d.is_finite()) {
                return Err(j);
            }
            row_j[j] = d.sqrt();
            let (row_j, below) = rest.split_at_mut(n);
            for i in 0..(n - j - 1) {
                let row_i = &mut below[i * n..i * n + n];
                let s: f64 = row_i[..j].iter().zip(&row_j[..j]).map(|(a, b)| a * b).sum();
                row_i[j] = (row_i[j] - s) / row_j[j];
            }
        }
        Ok(Self { n, l: a })
    }

    pub(crate) fn dim(&self) -> usize {
        self.n
    }

    /// Solve `A x = b` in place.
    pub(crate) fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.n;
        let l = &self.l;
        for i in 0..n {
            let row = &l[i * n..i * n + i];
            let s: f64 = row.iter().zip(&b[..i]).map(|(a, x)| a * x).sum();
            b[i] = (b[i] - s) / l[i * n + i];
        }
        for i in (0..n).rev() {
            let mut s = b[i];
            for k in (i + 1)..n {
                s -= l[k * n + i] * b[k];
            }
            b[i] = s / l[i * n + i];
        }
    }
}

pub(crate) fn matvec3(m: &[[f64; 3]; 3], v: &[f64; 3]) -> [f64; 3] {
    [
        m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
        m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
        m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2],
    ]
}
