//! Periodic torus fiber with a diagonal, position-dependent metric and
//! second-order central-difference calculus.
//!
//! Nodes are stored in row-major order: axis 0 varies slowest and the last
//! axis fastest. Every stencil wraps periodically.

use std::f64::consts::PI;
use std::io::Write;
use std::ops::{Deref, DerefMut};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAX_DIM: usize = 3;
pub const MIN_RESOLUTION: usize = 8;

/// One diagonal entry `G_i(x)` of the fiber metric.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MetricCoeff {
    /// `G_i ≡ 1`.
    #[default]
    Flat,
    /// `G_i(x) = 1 + amplitude · cos(2π · wave · x_axis / L_axis)`.
    Cosine {
        amplitude: f64,
        axis: usize,
        wave: u32,
    },
}

impl MetricCoeff {
    pub fn eval(&self, x: &[f64], periods: &[f64]) -> f64 {
        match *self {
            MetricCoeff::Flat => 1.0,
            MetricCoeff::Cosine {
                amplitude,
                axis,
                wave,
            } => 1.0 + amplitude * (2.0 * PI * wave as f64 * x[axis] / periods[axis]).cos(),
        }
    }

    pub fn is_flat(&self) -> bool {
        match *self {
            MetricCoeff::Flat => true,
            MetricCoeff::Cosine { amplitude, .. } => amplitude == 0.0,
        }
    }
}

/// Scalar samples on the fiber nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField(pub Vec<f64>);

impl Deref for ScalarField {
    type Target = Vec<f64>;
    fn deref(&self) -> &Vec<f64> {
        &self.0
    }
}

impl DerefMut for ScalarField {
    fn deref_mut(&mut self) -> &mut Vec<f64> {
        &mut self.0
    }
}

impl From<Vec<f64>> for ScalarField {
    fn from(v: Vec<f64>) -> Self {
        ScalarField(v)
    }
}

impl ScalarField {
    pub fn constant(len: usize, value: f64) -> Self {
        ScalarField(vec![value; len])
    }

    pub fn max_abs(&self) -> f64 {
        self.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn min(&self) -> f64 {
        self.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn mean(&self) -> f64 {
        self.iter().sum::<f64>() / self.len() as f64
    }

    pub fn mean_abs(&self) -> f64 {
        self.iter().map(|v| v.abs()).sum::<f64>() / self.len() as f64
    }

    pub fn argmin(&self) -> usize {
        let mut best = 0;
        for (i, v) in self.iter().enumerate() {
            if *v < self[best] {
                best = i;
            }
        }
        best
    }

    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, v) in self.iter().enumerate() {
            if *v > self[best] {
                best = i;
            }
        }
        best
    }

    pub fn is_finite(&self) -> bool {
        self.iter().all(|v| v.is_finite())
    }

    /// Pointwise `self - other`.
    pub fn sub(&self, other: &ScalarField) -> ScalarField {
        assert_eq!(self.len(), other.len());
        ScalarField(self.iter().zip(other.iter()).map(|(a, b)| a - b).collect())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> ScalarField {
        ScalarField(self.iter().map(|&v| f(v)).collect())
    }
}

/// Contravariant vector samples; unused trailing components are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    pub dim: usize,
    pub data: Vec<[f64; MAX_DIM]>,
}

impl VectorField {
    pub fn zeros(dim: usize, len: usize) -> Self {
        VectorField {
            dim,
            data: vec![[0.0; MAX_DIM]; len],
        }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn component(&self, i: usize) -> ScalarField {
        ScalarField(self.data.iter().map(|v| v[i]).collect())
    }
}

/// Discrete `n`-torus `Π_i [0, L_i)` with `m_i` nodes per axis and diagonal
/// metric `g_F = diag(G_1, …, G_n)`.
#[derive(Debug, Clone)]
pub struct FiberGrid {
    dim: usize,
    periods: Vec<f64>,
    resolution: Vec<usize>,
    metric: Vec<MetricCoeff>,
    spacing: Vec<f64>,
    strides: Vec<usize>,
    len: usize,
    plus: Vec<Vec<usize>>,
    minus: Vec<Vec<usize>>,
    coeffs: Vec<[f64; MAX_DIM]>,
    sqrt_det: Vec<f64>,
}

impl FiberGrid {
    pub fn new(
        dim: usize,
        periods: Vec<f64>,
        resolution: Vec<usize>,
        metric: Vec<MetricCoeff>,
    ) -> Result<Self> {
        if !(1..=MAX_DIM).contains(&dim) {
            return Err(Error::Config(format!("fiber dimension {dim} not in 1..=3")));
        }
        if periods.len() != dim || resolution.len() != dim {
            return Err(Error::Config(format!(
                "fiber needs {dim} periods and resolutions, got {} and {}",
                periods.len(),
                resolution.len()
            )));
        }
        let metric = if metric.is_empty() {
            vec![MetricCoeff::Flat; dim]
        } else {
            metric
        };
        if metric.len() != dim {
            return Err(Error::Config(format!(
                "fiber needs {dim} metric coefficients, got {}",
                metric.len()
            )));
        }
        for (i, &l) in periods.iter().enumerate() {
            if !(l.is_finite() && l > 0.0) {
                return Err(Error::Config(format!(
                    "period {i} must be positive, got {l}"
                )));
            }
        }
        for (i, &m) in resolution.iter().enumerate() {
            if m < MIN_RESOLUTION {
                return Err(Error::Config(format!(
                    "resolution {i} must be at least {MIN_RESOLUTION}, got {m}"
                )));
            }
        }
        for c in &metric {
            if let MetricCoeff::Cosine {
                axis, amplitude, ..
            } = *c
            {
                if axis >= dim {
                    return Err(Error::Config(format!("metric axis {axis} out of range")));
                }
                if !(amplitude.abs() < 1.0) {
                    return Err(Error::Config(format!(
                        "metric amplitude {amplitude} would make g_F degenerate"
                    )));
                }
            }
        }

        let spacing: Vec<f64> = periods
            .iter()
            .zip(&resolution)
            .map(|(l, &m)| l / m as f64)
            .collect();
        let mut strides = vec![1usize; dim];
        for a in (0..dim.saturating_sub(1)).rev() {
            strides[a] = strides[a + 1] * resolution[a + 1];
        }
        let len: usize = resolution.iter().product();

        let mut plus = vec![vec![0usize; len]; dim];
        let mut minus = vec![vec![0usize; len]; dim];
        for idx in 0..len {
            for a in 0..dim {
                let m = resolution[a];
                let j = (idx / strides[a]) % m;
                let base = idx - j * strides[a];
                plus[a][idx] = base + ((j + 1) % m) * strides[a];
                minus[a][idx] = base + ((j + m - 1) % m) * strides[a];
            }
        }

        let mut grid = FiberGrid {
            dim,
            periods,
            resolution,
            metric,
            spacing,
            strides,
            len,
            plus,
            minus,
            coeffs: Vec::new(),
            sqrt_det: Vec::new(),
        };
        let mut coeffs = vec![[1.0; MAX_DIM]; len];
        let mut sqrt_det = vec![1.0; len];
        for idx in 0..len {
            let x = grid.coords(idx);
            let mut det = 1.0;
            for a in 0..dim {
                let g = grid.metric[a].eval(&x, &grid.periods);
                if !(g > 0.0) {
                    return Err(Error::Config(format!(
                        "metric coefficient G_{a} = {g} is not positive at {x:?}"
                    )));
                }
                coeffs[idx][a] = g;
                det *= g;
            }
            sqrt_det[idx] = det.sqrt();
        }
        grid.coeffs = coeffs;
        grid.sqrt_det = sqrt_det;
        Ok(grid)
    }

    /// Flat cubic torus with `m` nodes and period `period` on every axis.
    pub fn flat(dim: usize, period: f64, m: usize) -> Result<Self> {
        FiberGrid::new(
            dim,
            vec![period; dim],
            vec![m; dim],
            vec![MetricCoeff::Flat; dim],
        )
    }

    /// Same periods and metric at a different per-axis resolution.
    pub fn with_resolution(&self, resolution: Vec<usize>) -> Result<Self> {
        FiberGrid::new(
            self.dim,
            self.periods.clone(),
            resolution,
            self.metric.clone(),
        )
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn periods(&self) -> &[f64] {
        &self.periods
    }

    pub fn resolution(&self) -> &[usize] {
        &self.resolution
    }

    pub fn metric(&self) -> &[MetricCoeff] {
        &self.metric
    }

    pub fn spacing(&self) -> &[f64] {
        &self.spacing
    }

    pub fn max_spacing(&self) -> f64 {
        self.spacing.iter().copied().fold(0.0, f64::max)
    }

    pub fn is_flat(&self) -> bool {
        self.metric.iter().all(MetricCoeff::is_flat)
    }

    pub fn multi_index(&self, idx: usize) -> Vec<usize> {
        (0..self.dim)
            .map(|a| (idx / self.strides[a]) % self.resolution[a])
            .collect()
    }

    pub fn flat_index(&self, multi: &[usize]) -> usize {
        multi
            .iter()
            .zip(&self.strides)
            .zip(&self.resolution)
            .map(|((&j, &s), &m)| (j % m) * s)
            .sum()
    }

    /// Node coordinates padded with zeros to three components.
    pub fn coords(&self, idx: usize) -> [f64; MAX_DIM] {
        let mut x = [0.0; MAX_DIM];
        for a in 0..self.dim {
            x[a] = ((idx / self.strides[a]) % self.resolution[a]) as f64 * self.spacing[a];
        }
        x
    }

    pub fn neighbor(&self, idx: usize, axis: usize, forward: bool) -> usize {
        if forward {
            self.plus[axis][idx]
        } else {
            self.minus[axis][idx]
        }
    }

    /// `G_i` at every axis of a node.
    pub fn metric_at(&self, idx: usize) -> &[f64; MAX_DIM] {
        &self.coeffs[idx]
    }

    pub fn sqrt_det(&self) -> &[f64] {
        &self.sqrt_det
    }

    /// Midpoint quadrature weight `√det g_F · Π h_i` per node.
    pub fn weights(&self) -> Vec<f64> {
        let cell: f64 = self.spacing.iter().product();
        self.sqrt_det.iter().map(|s| s * cell).collect()
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing.iter().product()
    }

    pub fn integrate(&self, phi: &[f64]) -> f64 {
        let cell = self.cell_volume();
        phi.iter()
            .zip(&self.sqrt_det)
            .map(|(p, s)| p * s * cell)
            .sum()
    }

    pub fn sample(&self, f: impl Fn(&[f64]) -> f64) -> ScalarField {
        ScalarField(
            (0..self.len)
                .map(|i| f(&self.coords(i)[..self.dim]))
                .collect(),
        )
    }

    /// Central difference `D_i φ` at one node.
    #[inline]
    pub fn partial_at(&self, phi: &[f64], axis: usize, idx: usize) -> f64 {
        (phi[self.plus[axis][idx]] - phi[self.minus[axis][idx]]) / (2.0 * self.spacing[axis])
    }

    /// Central difference `D_i φ` along one axis.
    pub fn partial(&self, phi: &[f64], axis: usize) -> Vec<f64> {
        debug_assert_eq!(phi.len(), self.len);
        (0..self.len)
            .map(|i| self.partial_at(phi, axis, i))
            .collect()
    }

    /// All central differences `(D_1 φ, …, D_n φ)` per node (covariant).
    pub fn differential(&self, phi: &[f64]) -> Vec<[f64; MAX_DIM]> {
        debug_assert_eq!(phi.len(), self.len);
        (0..self.len)
            .map(|i| {
                let mut d = [0.0; MAX_DIM];
                for (a, da) in d.iter_mut().enumerate().take(self.dim) {
                    *da = self.partial_at(phi, a, i);
                }
                d
            })
            .collect()
    }

    /// `(∇^F φ)^i = G_i^{-1} D_i φ`.
    pub fn gradient(&self, phi: &[f64]) -> VectorField {
        let mut out = VectorField::zeros(self.dim, self.len);
        for (i, v) in out.data.iter_mut().enumerate() {
            let g = &self.coeffs[i];
            for a in 0..self.dim {
                v[a] = self.partial_at(phi, a, i) / g[a];
            }
        }
        out
    }

    /// Conservation-form divergence `(det g_F)^{-1/2} Σ_i D_i(√det g_F V^i)`.
    pub fn divergence(&self, v: &VectorField) -> ScalarField {
        assert_eq!(v.len(), self.len);
        let mut out = vec![0.0; self.len];
        let mut flux = vec![0.0; self.len];
        for a in 0..self.dim {
            for (i, f) in flux.iter_mut().enumerate() {
                *f = self.sqrt_det[i] * v.data[i][a];
            }
            for (i, o) in out.iter_mut().enumerate() {
                *o += self.partial_at(&flux, a, i);
            }
        }
        for (o, s) in out.iter_mut().zip(&self.sqrt_det) {
            *o /= s;
        }
        ScalarField(out)
    }

    pub fn laplacian(&self, phi: &[f64]) -> ScalarField {
        self.divergence(&self.gradient(phi))
    }

    /// Pointwise `g_F(V, W) = Σ_i G_i V^i W^i`.
    pub fn inner(&self, v: &VectorField, w: &VectorField) -> ScalarField {
        assert_eq!(v.len(), self.len);
        assert_eq!(w.len(), self.len);
        ScalarField(
            (0..self.len)
                .map(|i| {
                    let g = &self.coeffs[i];
                    (0..self.dim)
                        .map(|a| g[a] * v.data[i][a] * w.data[i][a])
                        .sum()
                })
                .collect(),
        )
    }

    pub fn norm2(&self, v: &VectorField) -> ScalarField {
        self.inner(v, v)
    }

    /// CSV rows `j_1,…,j_n,x_1,…,x_n,<columns…>`.
    pub fn write_csv<W: Write>(
        &self,
        mut out: W,
        columns: &[(&str, &[f64])],
    ) -> std::io::Result<()> {
        let axis_names = ["x", "y", "z"];
        let mut header: Vec<String> = (0..self.dim).map(|a| format!("j{a}")).collect();
        header.extend((0..self.dim).map(|a| axis_names[a].to_string()));
        header.extend(columns.iter().map(|(n, _)| n.to_string()));
        writeln!(out, "{}", header.join(","))?;
        for idx in 0..self.len {
            let mut row: Vec<String> = self
                .multi_index(idx)
                .into_iter()
                .map(|j| j.to_string())
                .collect();
            let x = self.coords(idx);
            row.extend((0..self.dim).map(|a| format!("{:.17e}", x[a])));
            row.extend(columns.iter().map(|(_, c)| format!("{:.17e}", c[idx])));
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }

    /// Whitespace-separated columns with a `#` header line.
    pub fn write_gnuplot<W: Write>(
        &self,
        mut out: W,
        columns: &[(&str, &[f64])],
    ) -> std::io::Result<()> {
        let axis_names = ["x", "y", "z"];
        let mut header: Vec<String> = (0..self.dim).map(|a| axis_names[a].to_string()).collect();
        header.extend(columns.iter().map(|(n, _)| n.to_string()));
        writeln!(out, "# {}", header.join(" "))?;
        for idx in 0..self.len {
            let x = self.coords(idx);
            let mut row: Vec<String> = (0..self.dim).map(|a| format!("{:.17e}", x[a])).collect();
            row.extend(columns.iter().map(|(_, c)| format!("{:.17e}", c[idx])));
            writeln!(out, "{}", row.join(" "))?;
            // blank line between scan rows for splot
            if self.dim >= 2 && (idx + 1) % self.resolution[self.dim - 1] == 0 {
                writeln!(out)?;
            }
        }
        Ok(())
    }
}

/// Row-major little-endian `f64` dump of a field.
pub fn write_binary<W: Write>(mut out: W, values: &[f64]) -> std::io::Result<()> {
    for v in values {
        out.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_binary(bytes: &[u8]) -> Result<Vec<f64>> {
    if !bytes.len().is_multiple_of(8) {
        return Err(Error::Config(format!(
            "binary field length {} is not a multiple of 8",
            bytes.len()
        )));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sine_1d(grid: &FiberGrid) -> ScalarField {
        let l = grid.periods()[0];
        grid.sample(|x| (2.0 * PI * x[0] / l).sin())
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(FiberGrid::flat(0, 1.0, 16).is_err());
        assert!(FiberGrid::flat(4, 1.0, 16).is_err());
        assert!(FiberGrid::flat(1, 1.0, 4).is_err());
        assert!(FiberGrid::flat(1, -1.0, 16).is_err());
        let bad = MetricCoeff::Cosine {
            amplitude: 1.2,
            axis: 0,
            wave: 1,
        };
        assert!(FiberGrid::new(1, vec![1.0], vec![16], vec![bad]).is_err());
    }

    #[test]
    fn constant_field_has_zero_gradient_and_laplacian() {
        let grid = FiberGrid::flat(2, 1.0, 16).unwrap();
        let c = ScalarField::constant(grid.len(), 3.25);
        let g = grid.gradient(&c);
        assert!(g.data.iter().all(|v| v.iter().all(|&x| x == 0.0)));
        assert!(grid.laplacian(&c).max_abs() == 0.0);
    }

    #[test]
    fn constant_vector_field_is_divergence_free() {
        let grid = FiberGrid::flat(3, 2.0, 8).unwrap();
        let mut v = VectorField::zeros(3, grid.len());
        for d in v.data.iter_mut() {
            *d = [0.3, -1.7, 2.2];
        }
        assert!(grid.divergence(&v).max_abs() < 1e-13);
    }

    #[test]
    fn sine_gradient_and_laplacian() {
        let l = 1.0;
        let grid = FiberGrid::flat(1, l, 128).unwrap();
        let phi = sine_1d(&grid);
        let k = 2.0 * PI / l;
        let h = grid.spacing()[0];
        let grad = grid.gradient(&phi);
        let lap = grid.laplacian(&phi);
        for i in 0..grid.len() {
            let x = grid.coords(i)[0];
            assert!((grad.data[i][0] - k * (k * x).cos()).abs() < 2.0 * k.powi(3) * h * h);
            assert!((lap[i] + k * k * (k * x).sin()).abs() < 2.0 * k.powi(4) * h * h);
        }
    }

    #[test]
    fn inner_and_norm() {
        let grid = FiberGrid::flat(2, 1.0, 8).unwrap();
        let zero = VectorField::zeros(2, grid.len());
        assert_eq!(grid.norm2(&zero).max_abs(), 0.0);
        let mut e1 = VectorField::zeros(2, grid.len());
        for d in e1.data.iter_mut() {
            d[0] = 1.0;
        }
        assert!(grid.norm2(&e1).iter().all(|&v| v == 1.0));
    }

    #[test]
    fn row_major_indexing_round_trips() {
        let grid = FiberGrid::new(
            3,
            vec![1.0, 2.0, 3.0],
            vec![8, 9, 10],
            vec![MetricCoeff::Flat; 3],
        )
        .unwrap();
        for idx in [0, 1, 17, 300, grid.len() - 1] {
            assert_eq!(grid.flat_index(&grid.multi_index(idx)), idx);
        }
        assert_eq!(grid.multi_index(1), vec![0, 0, 1]);
        let last = grid.multi_index(grid.len() - 1);
        assert_eq!(last, vec![7, 8, 9]);
        assert_eq!(grid.neighbor(0, 2, false), 9);
    }

    #[test]
    fn binary_round_trip() {
        let values = vec![1.0, -2.5, 1e-300, f64::MAX];
        let mut buf = Vec::new();
        write_binary(&mut buf, &values).unwrap();
        assert_eq!(buf.len(), 32);
        assert_eq!(read_binary(&buf).unwrap(), values);
        assert!(read_binary(&buf[..7]).is_err());
    }
}
