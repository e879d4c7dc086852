//! Constant-coefficient operators diagonalized by the periodic FFT.

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::fiber_grid::FiberGrid;

/// Multiplier `1 / symbol(k)` applied in Fourier space.
pub struct SpectralSolve {
    resolution: Vec<usize>,
    strides: Vec<usize>,
    forward: Vec<Arc<dyn Fft<f64>>>,
    inverse: Vec<Arc<dyn Fft<f64>>>,
    symbol: Vec<f64>,
}

/// Symbol `(sin(2πk/m)/h)²` of `−D_i D_i` for the wide central difference.
pub fn wide_laplacian_symbol(k: usize, m: usize, h: f64) -> f64 {
    let s = (2.0 * std::f64::consts::PI * k as f64 / m as f64).sin() / h;
    s * s
}

impl SpectralSolve {
    /// `symbol(λ)` receives `λ_i(k) = (sin(2πk_i/m_i)/h_i)²` per axis and
    /// must not vanish.
    ///
    /// Modes whose wave index is `0` or `m_i/2` on every axis (other than
    /// the mean) are invisible to the wide central difference; they are
    /// mapped to zero.
    pub fn new(grid: &FiberGrid, symbol: impl Fn(&[f64]) -> f64) -> Self {
        let n = grid.dim();
        let resolution = grid.resolution().to_vec();
        let mut strides = vec![1usize; n];
        for a in (0..n.saturating_sub(1)).rev() {
            strides[a] = strides[a + 1] * resolution[a + 1];
        }
        let mut planner = FftPlanner::new();
        let forward = resolution
            .iter()
            .map(|&m| planner.plan_fft_forward(m))
            .collect();
        let inverse = resolution
            .iter()
            .map(|&m| planner.plan_fft_inverse(m))
            .collect();
        let mut values = Vec::with_capacity(grid.len());
        let mut lam = vec![0.0; n];
        for idx in 0..grid.len() {
            let multi = grid.multi_index(idx);
            for a in 0..n {
                lam[a] = wide_laplacian_symbol(multi[a], resolution[a], grid.spacing()[a]);
            }
            let decoupled = multi.iter().any(|&k| k != 0)
                && multi
                    .iter()
                    .zip(&resolution)
                    .all(|(&k, &m)| k == 0 || 2 * k == m);
            values.push(if decoupled {
                f64::INFINITY
            } else {
                symbol(&lam)
            });
        }
        SpectralSolve {
            resolution,
            strides,
            forward,
            inverse,
            symbol: values,
        }
    }

    fn transform(&self, data: &mut [Complex<f64>], plans: &[Arc<dyn Fft<f64>>]) {
        let len = data.len();
        for (a, plan) in plans.iter().enumerate() {
            let m = self.resolution[a];
            let stride = self.strides[a];
            let mut line = vec![Complex::new(0.0, 0.0); m];
            for start in 0..len {
                if !(start / stride).is_multiple_of(m) {
                    continue;
                }
                for (j, c) in line.iter_mut().enumerate() {
                    *c = data[start + j * stride];
                }
                plan.process(&mut line);
                for (j, c) in line.iter().enumerate() {
                    data[start + j * stride] = *c;
                }
            }
        }
    }

    pub fn apply(&self, r: &[f64]) -> Vec<f64> {
        let len = r.len();
        let mut data: Vec<Complex<f64>> = r.iter().map(|&v| Complex::new(v, 0.0)).collect();
        self.transform(&mut data, &self.forward);
        for (c, s) in data.iter_mut().zip(&self.symbol) {
            *c /= *s;
        }
        self.transform(&mut data, &self.inverse);
        data.iter().map(|c| c.re / len as f64).collect()
    }
}
