//! Closed-form linear algebra for symmetric matrices of size 1 to 3.

use std::f64::consts::PI;

use crate::fiber_grid::MAX_DIM;

/// Symmetric `n×n` matrix stored densely in a 3×3 block.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymMat {
    pub n: usize,
    pub a: [[f64; MAX_DIM]; MAX_DIM],
}

impl SymMat {
    pub fn zeros(n: usize) -> Self {
        assert!((1..=MAX_DIM).contains(&n));
        SymMat {
            n,
            a: [[0.0; MAX_DIM]; MAX_DIM],
        }
    }

    pub fn diag(n: usize, d: &[f64]) -> Self {
        let mut m = SymMat::zeros(n);
        for i in 0..n {
            m.a[i][i] = d[i];
        }
        m
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.a[i][j]
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut m = *self;
        for row in m.a.iter_mut() {
            for v in row.iter_mut() {
                *v *= s;
            }
        }
        m
    }

    pub fn det(&self) -> f64 {
        let a = &self.a;
        match self.n {
            1 => a[0][0],
            2 => a[0][0] * a[1][1] - a[0][1] * a[1][0],
            _ => {
                a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1])
                    - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
                    + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0])
            }
        }
    }

    /// Adjugate formula; `None` when the determinant is zero or not finite.
    pub fn inverse(&self) -> Option<SymMat> {
        let d = self.det();
        if d == 0.0 || !d.is_finite() {
            return None;
        }
        let a = &self.a;
        let mut inv = SymMat::zeros(self.n);
        match self.n {
            1 => inv.a[0][0] = 1.0 / d,
            2 => {
                inv.a[0][0] = a[1][1] / d;
                inv.a[1][1] = a[0][0] / d;
                inv.a[0][1] = -a[0][1] / d;
                inv.a[1][0] = -a[1][0] / d;
            }
            _ => {
                for i in 0..3 {
                    for j in 0..3 {
                        let (r0, r1) = ((j + 1) % 3, (j + 2) % 3);
                        let (c0, c1) = ((i + 1) % 3, (i + 2) % 3);
                        inv.a[i][j] = (a[r0][c0] * a[r1][c1] - a[r0][c1] * a[r1][c0]) / d;
                    }
                }
            }
        }
        Some(inv)
    }

    pub fn mul_vec(&self, v: &[f64; MAX_DIM]) -> [f64; MAX_DIM] {
        let mut out = [0.0; MAX_DIM];
        for i in 0..self.n {
            out[i] = (0..self.n).map(|j| self.a[i][j] * v[j]).sum();
        }
        out
    }

    /// `vᵀ A w`.
    pub fn form(&self, v: &[f64; MAX_DIM], w: &[f64; MAX_DIM]) -> f64 {
        let aw = self.mul_vec(w);
        (0..self.n).map(|i| v[i] * aw[i]).sum()
    }

    /// Eigenvalues in ascending order (trigonometric solution for n = 3).
    pub fn eigenvalues(&self) -> Vec<f64> {
        let a = &self.a;
        match self.n {
            1 => vec![a[0][0]],
            2 => {
                let m = 0.5 * (a[0][0] + a[1][1]);
                let r = (0.25 * (a[0][0] - a[1][1]).powi(2) + a[0][1] * a[0][1]).sqrt();
                vec![m - r, m + r]
            }
            _ => {
                let p1 = a[0][1].powi(2) + a[0][2].powi(2) + a[1][2].powi(2);
                let q = (a[0][0] + a[1][1] + a[2][2]) / 3.0;
                if p1 == 0.0 {
                    let mut e = vec![a[0][0], a[1][1], a[2][2]];
                    e.sort_by(f64::total_cmp);
                    return e;
                }
                let p2 = (a[0][0] - q).powi(2)
                    + (a[1][1] - q).powi(2)
                    + (a[2][2] - q).powi(2)
                    + 2.0 * p1;
                let p = (p2 / 6.0).sqrt();
                let mut b = SymMat::zeros(3);
                for i in 0..3 {
                    for j in 0..3 {
                        b.a[i][j] = (a[i][j] - if i == j { q } else { 0.0 }) / p;
                    }
                }
                let r = (b.det() / 2.0).clamp(-1.0, 1.0);
                let phi = r.acos() / 3.0;
                let e1 = q + 2.0 * p * phi.cos();
                let e3 = q + 2.0 * p * (phi + 2.0 * PI / 3.0).cos();
                let e2 = 3.0 * q - e1 - e3;
                let mut e = vec![e1, e2, e3];
                e.sort_by(f64::total_cmp);
                e
            }
        }
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues()[0]
    }
}
