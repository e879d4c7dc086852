//! Restarted GMRES with right preconditioning.

use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GmresStats {
    pub iterations: usize,
    /// Final true residual relative to `‖b‖`.
    pub relative_residual: f64,
    pub converged: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Solves `A x = b` as `A M⁻¹ y = b`, `x = M⁻¹ y`.
pub fn gmres(
    mut apply: impl FnMut(&[f64]) -> Result<Vec<f64>>,
    precond: impl Fn(&[f64]) -> Vec<f64>,
    b: &[f64],
    restart: usize,
    rtol: f64,
    max_iters: usize,
) -> Result<(Vec<f64>, GmresStats)> {
    let len = b.len();
    let bnorm = norm(b);
    let mut x = vec![0.0; len];
    if bnorm == 0.0 {
        return Ok((
            x,
            GmresStats {
                iterations: 0,
                relative_residual: 0.0,
                converged: true,
            },
        ));
    }
    let restart = restart.max(1);
    let mut r = b.to_vec();
    let mut total = 0;
    let mut rel = 1.0;
    while total < max_iters {
        let beta = norm(&r);
        rel = beta / bnorm;
        if rel <= rtol {
            break;
        }
        let mut basis: Vec<Vec<f64>> = vec![r.iter().map(|v| v / beta).collect()];
        let mut hess: Vec<Vec<f64>> = Vec::new();
        let mut cs: Vec<f64> = Vec::new();
        let mut sn: Vec<f64> = Vec::new();
        let mut g = vec![beta];
        let mut k = 0;
        while k < restart && total < max_iters {
            let z = precond(&basis[k]);
            let mut w = apply(&z)?;
            total += 1;
            let mut col = vec![0.0; k + 2];
            for (i, v) in basis.iter().enumerate() {
                let h = dot(&w, v);
                col[i] = h;
                for (wj, vj) in w.iter_mut().zip(v) {
                    *wj -= h * vj;
                }
            }
            let wn = norm(&w);
            col[k + 1] = wn;
            for i in 0..k {
                let t = cs[i] * col[i] + sn[i] * col[i + 1];
                col[i + 1] = -sn[i] * col[i] + cs[i] * col[i + 1];
                col[i] = t;
            }
            let denom = col[k].hypot(col[k + 1]);
            let (c, s) = if denom == 0.0 {
                (1.0, 0.0)
            } else {
                (col[k] / denom, col[k + 1] / denom)
            };
            cs.push(c);
            sn.push(s);
            col[k] = denom;
            col[k + 1] = 0.0;
            g.push(-s * g[k]);
            g[k] *= c;
            hess.push(col);
            k += 1;
            let breakdown = wn <= 1e-14 * beta;
            if !breakdown {
                basis.push(w.iter().map(|v| v / wn).collect());
            }
            if g[k].abs() / bnorm <= rtol || breakdown {
                break;
            }
        }
        // back substitution on the k×k triangle
        let mut y = vec![0.0; k];
        for i in (0..k).rev() {
            let mut acc = g[i];
            for j in i + 1..k {
                acc -= hess[j][i] * y[j];
            }
            y[i] = if hess[i][i] != 0.0 {
                acc / hess[i][i]
            } else {
                0.0
            };
        }
        let mut comb = vec![0.0; len];
        for (yi, v) in y.iter().zip(&basis) {
            for (c, vj) in comb.iter_mut().zip(v) {
                *c += yi * vj;
            }
        }
        let dx = precond(&comb);
        for (xi, d) in x.iter_mut().zip(&dx) {
            *xi += d;
        }
        let ax = apply(&x)?;
        r = b.iter().zip(&ax).map(|(bi, a)| bi - a).collect();
        let new_rel = norm(&r) / bnorm;
        if new_rel >= rel * (1.0 - 1e-12) && new_rel > rtol {
            // stagnated restart cycle
            rel = new_rel;
            break;
        }
        rel = new_rel;
    }
    Ok((
        x,
        GmresStats {
            iterations: total,
            relative_residual: rel,
            converged: rel <= rtol,
        },
    ))
}
