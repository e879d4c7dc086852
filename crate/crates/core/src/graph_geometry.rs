//! Geometry of spacelike graphs `Σ_u = {(u(p), p)}` in a twisted product.
//!
//! Quantities are evaluated per fiber node from the central differences
//! `D_i u` and the exact jet of `f` at `(u(p), p)`. The time Laplacian and
//! the mean curvature each have two independent discretizations: one written
//! with fiber operators and one from the coordinate Laplace–Beltrami formula
//! on the assembled induced metric.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fiber_grid::{FiberGrid, ScalarField, VectorField, MAX_DIM};
use crate::smallmat::SymMat;
use crate::twisted_spacetime::{Jet, SpacetimeModel};

/// Nodes with spacelike margin above this are flagged as ill-conditioned.
pub const ILL_CONDITIONED_MARGIN: f64 = 0.95;

/// Per-node first-order data of a spacelike graph.
#[derive(Debug, Clone)]
pub struct Kinematics {
    pub jets: Vec<Jet>,
    /// `D_i u`
    pub du: Vec<[f64; MAX_DIM]>,
    /// `|∇^F u|²_{g_F} = Σ_i (D_i u)² / G_i`
    pub grad_sq: Vec<f64>,
    /// `√(f² − |∇^F u|²)`
    pub s: Vec<f64>,
    pub mu: Vec<f64>,
    pub rho: Vec<f64>,
    pub cosh: Vec<f64>,
    pub sinh2: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SpacelikeReport {
    pub spacelike: bool,
    pub max_margin: f64,
    pub worst_node: usize,
    #[serde(skip)]
    pub margin: ScalarField,
    /// Smallest eigenvalue of the assembled induced metric per node.
    #[serde(skip)]
    pub min_eigenvalue: ScalarField,
    /// Positive definiteness of `g_u` agrees with `μ < 1` at every node.
    pub definiteness_consistent: bool,
}

#[derive(Debug, Clone)]
pub struct InducedMetric {
    pub g: Vec<SymMat>,
    pub det_direct: ScalarField,
    /// `ρ^{-2} f^{2n−4} det g_F`
    pub det_formula: ScalarField,
}

#[derive(Debug, Clone)]
pub struct UnitNormal {
    pub time: ScalarField,
    pub fiber: VectorField,
}

#[derive(Debug, Clone)]
pub struct Obstruction {
    /// Components in the graph coordinate frame.
    pub field: VectorField,
    /// Pointwise `g_u`-norm.
    pub norm: ScalarField,
    pub max_norm: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Prop7Report {
    pub dt_f_nonnegative: bool,
    pub dt_f_nonpositive: bool,
    pub case_i: bool,
    pub case_ii: bool,
    /// One hypothesis set holds on all of `Σ_u`, so `Σ_u` should be a slice.
    pub expects_slice: bool,
    pub constancy_defect: f64,
}

/// Per-node finite-difference check of the area gradient.
#[derive(Debug, Clone, Serialize)]
pub struct VariationalCheck {
    pub nodes: Vec<usize>,
    pub finite_difference: Vec<f64>,
    pub analytic: Vec<f64>,
    /// `max |FD − analytic| / max |analytic|` over the checked nodes.
    pub relative_defect: f64,
}

#[derive(Debug, Clone)]
pub struct GeometryReport {
    pub u: ScalarField,
    pub margin: ScalarField,
    pub rho: ScalarField,
    pub cosh: ScalarField,
    pub sinh2: ScalarField,
    pub mean_curvature: ScalarField,
    pub mean_curvature_oracle: ScalarField,
    pub laplacian_tau: ScalarField,
    pub laplacian_tau_oracle: ScalarField,
    pub det_direct: ScalarField,
    pub det_formula: ScalarField,
    pub area_element: ScalarField,
    pub obstruction: VectorField,
    pub obstruction_norm: ScalarField,
    pub ill_conditioned: Vec<usize>,
    pub area: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct FieldStats {
    pub min: f64,
    pub max: f64,
    pub max_abs: f64,
}

impl FieldStats {
    pub fn of(v: &[f64]) -> Self {
        FieldStats {
            min: v.iter().copied().fold(f64::INFINITY, f64::min),
            max: v.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            max_abs: v.iter().fold(0.0, |m, x| m.max(x.abs())),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GeometrySummary {
    pub nodes: usize,
    pub u: FieldStats,
    pub margin: FieldStats,
    pub rho: FieldStats,
    pub cosh: FieldStats,
    pub mean_curvature: FieldStats,
    pub mean_curvature_oracle: FieldStats,
    pub laplacian_tau: FieldStats,
    pub laplacian_tau_oracle: FieldStats,
    pub obstruction_norm: FieldStats,
    pub mean_curvature_two_path: f64,
    pub laplacian_tau_two_path: f64,
    pub area: f64,
    pub ill_conditioned_nodes: usize,
}

impl GeometryReport {
    pub fn summary(&self) -> GeometrySummary {
        GeometrySummary {
            nodes: self.u.len(),
            u: FieldStats::of(&self.u),
            margin: FieldStats::of(&self.margin),
            rho: FieldStats::of(&self.rho),
            cosh: FieldStats::of(&self.cosh),
            mean_curvature: FieldStats::of(&self.mean_curvature),
            mean_curvature_oracle: FieldStats::of(&self.mean_curvature_oracle),
            laplacian_tau: FieldStats::of(&self.laplacian_tau),
            laplacian_tau_oracle: FieldStats::of(&self.laplacian_tau_oracle),
            obstruction_norm: FieldStats::of(&self.obstruction_norm),
            mean_curvature_two_path: self
                .mean_curvature
                .sub(&self.mean_curvature_oracle)
                .max_abs(),
            laplacian_tau_two_path: self.laplacian_tau.sub(&self.laplacian_tau_oracle).max_abs(),
            area: self.area,
            ill_conditioned_nodes: self.ill_conditioned.len(),
        }
    }

    /// Column set used for CSV and gnuplot output.
    pub fn columns(&self) -> Vec<(&'static str, &[f64])> {
        vec![
            ("u", &self.u[..]),
            ("mu", &self.margin[..]),
            ("rho", &self.rho[..]),
            ("cosh_theta", &self.cosh[..]),
            ("H", &self.mean_curvature[..]),
            ("H_oracle", &self.mean_curvature_oracle[..]),
            ("lap_tau", &self.laplacian_tau[..]),
            ("lap_tau_oracle", &self.laplacian_tau_oracle[..]),
            ("obstruction_norm", &self.obstruction_norm[..]),
        ]
    }
}

/// Coordinate Laplace–Beltrami operator
/// `(det g)^{-1/2} Σ_i D_i(√det g · g^{ij} D_j h)` on a per-node metric.
pub fn coordinate_laplacian(grid: &FiberGrid, metric: &[SymMat], h: &[f64]) -> Result<ScalarField> {
    let n = grid.dim();
    let len = grid.len();
    if metric.len() != len || h.len() != len {
        return Err(Error::Config(
            "metric or field does not match the grid".into(),
        ));
    }
    let dh = grid.differential(h);
    let mut sqrt_det = vec![0.0; len];
    let mut flux = vec![[0.0; MAX_DIM]; len];
    for idx in 0..len {
        let det = metric[idx].det();
        if !(det > 0.0) {
            return Err(Error::Precondition(format!(
                "metric is degenerate at node {idx} (det = {det})"
            )));
        }
        let inv = metric[idx].inverse().expect("positive determinant");
        let sd = det.sqrt();
        sqrt_det[idx] = sd;
        let grad = inv.mul_vec(&dh[idx]);
        for a in 0..n {
            flux[idx][a] = sd * grad[a];
        }
    }
    let mut out = vec![0.0; len];
    let mut comp = vec![0.0; len];
    for a in 0..n {
        for (c, fl) in comp.iter_mut().zip(&flux) {
            *c = fl[a];
        }
        for (idx, o) in out.iter_mut().enumerate() {
            *o += grid.partial_at(&comp, a, idx);
        }
    }
    for (o, sd) in out.iter_mut().zip(&sqrt_det) {
        *o /= sd;
    }
    Ok(ScalarField(out))
}

/// A candidate graph `u` over the fiber of a model.
#[derive(Debug, Clone)]
pub struct GraphField<'m> {
    model: &'m SpacetimeModel,
    u: ScalarField,
}

impl<'m> GraphField<'m> {
    pub fn new(model: &'m SpacetimeModel, u: ScalarField) -> Result<Self> {
        if u.len() != model.fiber().len() {
            return Err(Error::Config(format!(
                "graph has {} values, fiber has {} nodes",
                u.len(),
                model.fiber().len()
            )));
        }
        for &v in u.iter() {
            if !v.is_finite() {
                return Err(Error::Config("graph values must be finite".into()));
            }
            model.check_time(v)?;
        }
        Ok(GraphField { model, u })
    }

    pub fn slice(model: &'m SpacetimeModel, t0: f64) -> Result<Self> {
        GraphField::new(model, ScalarField::constant(model.fiber().len(), t0))
    }

    pub fn model(&self) -> &'m SpacetimeModel {
        self.model
    }

    pub fn values(&self) -> &ScalarField {
        &self.u
    }

    pub fn into_values(self) -> ScalarField {
        self.u
    }

    fn grid(&self) -> &FiberGrid {
        self.model.fiber()
    }

    fn n(&self) -> usize {
        self.model.dim()
    }

    fn raw_kinematics(&self) -> (Vec<Jet>, Vec<[f64; MAX_DIM]>, Vec<f64>, Vec<f64>) {
        let grid = self.grid();
        let n = self.n();
        let du = grid.differential(&self.u);
        let jets: Vec<Jet> = (0..grid.len())
            .map(|i| self.model.jet_at(self.u[i], i))
            .collect();
        let mut grad_sq = vec![0.0; grid.len()];
        let mut mu = vec![0.0; grid.len()];
        for i in 0..grid.len() {
            let g = grid.metric_at(i);
            let q: f64 = (0..n).map(|a| du[i][a] * du[i][a] / g[a]).sum();
            grad_sq[i] = q;
            mu[i] = q.sqrt() / jets[i].f;
        }
        (jets, du, grad_sq, mu)
    }

    /// Spacelike margin `μ = |∇^F u| / f` with a definiteness cross-check of `g_u`.
    pub fn spacelike_check(&self) -> SpacelikeReport {
        let (jets, du, _, mu) = self.raw_kinematics();
        let grid = self.grid();
        let mut min_eig = vec![0.0; grid.len()];
        let mut consistent = true;
        for i in 0..grid.len() {
            let g = assemble_metric(self.n(), grid.metric_at(i), jets[i].f, &du[i]);
            min_eig[i] = g.min_eigenvalue();
            if (mu[i] < 1.0) != (min_eig[i] > 0.0) {
                consistent = false;
            }
        }
        let margin = ScalarField(mu);
        let worst = margin.argmax();
        SpacelikeReport {
            spacelike: margin[worst] < 1.0,
            max_margin: margin[worst],
            worst_node: worst,
            margin,
            min_eigenvalue: ScalarField(min_eig),
            definiteness_consistent: consistent,
        }
    }

    /// Kinematic data; errors with the worst node when `u` is not spacelike.
    pub fn kinematics(&self) -> Result<Kinematics> {
        let (jets, du, grad_sq, mu) = self.raw_kinematics();
        let worst = ScalarField(mu.clone()).argmax();
        if !(mu[worst] < 1.0) {
            let grid = self.grid();
            return Err(Error::NotSpacelike {
                node: grid.multi_index(worst),
                coords: grid.coords(worst)[..grid.dim()].to_vec(),
                margin: mu[worst],
            });
        }
        let len = jets.len();
        let mut s = vec![0.0; len];
        let mut rho = vec![0.0; len];
        let mut cosh = vec![0.0; len];
        let mut sinh2 = vec![0.0; len];
        for i in 0..len {
            let f = jets[i].f;
            s[i] = (f * f - grad_sq[i]).sqrt();
            rho[i] = 1.0 / (f * s[i]);
            cosh[i] = f * f * rho[i];
            sinh2[i] = f * f * rho[i] * rho[i] * grad_sq[i];
        }
        Ok(Kinematics {
            jets,
            du,
            grad_sq,
            s,
            mu,
            rho,
            cosh,
            sinh2,
        })
    }

    pub fn rho(&self) -> Result<ScalarField> {
        Ok(ScalarField(self.kinematics()?.rho))
    }

    /// `(cosh θ, sinh²θ)`.
    pub fn hyperbolic_angle(&self) -> Result<(ScalarField, ScalarField)> {
        let k = self.kinematics()?;
        Ok((ScalarField(k.cosh), ScalarField(k.sinh2)))
    }

    /// `g_u = −du ⊗ du + f² g_F` with two determinant evaluations.
    pub fn induced_metric(&self) -> Result<InducedMetric> {
        let k = self.kinematics()?;
        let grid = self.grid();
        let n = self.n();
        let mut g = Vec::with_capacity(grid.len());
        let mut det_direct = Vec::with_capacity(grid.len());
        let mut det_formula = Vec::with_capacity(grid.len());
        for i in 0..grid.len() {
            let f = k.jets[i].f;
            let m = assemble_metric(n, grid.metric_at(i), f, &k.du[i]);
            det_direct.push(m.det());
            let det_f = grid.sqrt_det()[i].powi(2);
            det_formula.push(f.powi(2 * n as i32 - 4) * det_f / (k.rho[i] * k.rho[i]));
            g.push(m);
        }
        Ok(InducedMetric {
            g,
            det_direct: ScalarField(det_direct),
            det_formula: ScalarField(det_formula),
        })
    }

    /// `(∇τ)^i = f² ρ² (∇^F u)^i`.
    pub fn grad_tau(&self) -> Result<VectorField> {
        let k = self.kinematics()?;
        Ok(grad_tau_from(self.grid(), &k))
    }

    /// Fiber-operator form
    /// `Δτ = ρ f^{2−n} g_F(∇^F(ρ f^n), ∇^F u) + ρ² f² Δ_F u`.
    pub fn laplacian_tau_fiber(&self) -> Result<ScalarField> {
        self.laplacian_tau_fiber_with(&self.grid().laplacian(&self.u))
    }

    /// [`GraphField::laplacian_tau_fiber`] with a supplied `Δ_F u`.
    pub fn laplacian_tau_fiber_with(&self, lap_u: &[f64]) -> Result<ScalarField> {
        let k = self.kinematics()?;
        let grid = self.grid();
        let n = self.n() as i32;
        let rho_fn: Vec<f64> = (0..grid.len())
            .map(|i| k.rho[i] * k.jets[i].f.powi(n))
            .collect();
        Ok(ScalarField(
            (0..grid.len())
                .map(|i| {
                    let g = grid.metric_at(i);
                    let f = k.jets[i].f;
                    let cross: f64 = (0..self.n())
                        .map(|a| grid.partial_at(&rho_fn, a, i) * k.du[i][a] / g[a])
                        .sum();
                    k.rho[i] * f.powi(2 - n) * cross + k.rho[i] * k.rho[i] * f * f * lap_u[i]
                })
                .collect(),
        ))
    }

    /// Coordinate Laplace–Beltrami of `u` on the assembled induced metric.
    pub fn laplacian_tau_oracle(&self) -> Result<ScalarField> {
        let metric = self.induced_metric()?;
        coordinate_laplacian(self.grid(), &metric.g, &self.u)
    }

    /// Mean curvature from the fiber-operator formula
    /// `nH = div_F(ρ∇^F u) + (n f²ρ + ρ|∇^F u|²) ∂_t log f + nρ Σ_i (∂_i f/f)(∇^F u)^i`,
    /// with `∂_i f` the fiber partial of `f` at fixed `t = u(p)`.
    pub fn mean_curvature(&self) -> Result<ScalarField> {
        let k = self.kinematics()?;
        Ok(mean_curvature_from(self.grid(), &k))
    }

    /// Mean curvature in divergence form
    /// `nH = f^{-n} div_F(ρ f^n ∇^F u) + ∂_t log f ((n−1)/(f²ρ) + f²ρ)`.
    ///
    /// Equal to [`GraphField::mean_curvature`] in the continuum; this
    /// discretization is the exact gradient of the discrete area.
    pub fn mean_curvature_divergence_form(&self) -> Result<ScalarField> {
        let k = self.kinematics()?;
        let grid = self.grid();
        let n = self.n();
        let mut flux = VectorField::zeros(n, grid.len());
        for i in 0..grid.len() {
            let g = grid.metric_at(i);
            let w = k.rho[i] * k.jets[i].f.powi(n as i32);
            for a in 0..n {
                flux.data[i][a] = w * k.du[i][a] / g[a];
            }
        }
        let div = grid.divergence(&flux);
        let nf = n as f64;
        Ok(ScalarField(
            (0..grid.len())
                .map(|i| {
                    let f = k.jets[i].f;
                    let c = f * f * k.rho[i];
                    (div[i] / f.powi(n as i32) + k.jets[i].dt_log() * ((nf - 1.0) / c + c)) / nf
                })
                .collect(),
        ))
    }

    /// `H = (Δτ + (n + sinh²θ) ∂_t log f) / (n cosh θ)` using the coordinate Laplacian.
    pub fn mean_curvature_via_laplacian(&self) -> Result<ScalarField> {
        let k = self.kinematics()?;
        let lap = self.laplacian_tau_oracle()?;
        let nf = self.n() as f64;
        Ok(ScalarField(
            (0..lap.len())
                .map(|i| (lap[i] + (nf + k.sinh2[i]) * k.jets[i].dt_log()) / (nf * k.cosh[i]))
                .collect(),
        ))
    }

    /// Future-directed unit normal: `N⁰ = f²ρ`, `N^i = ρ (∇^F u)^i`.
    pub fn unit_normal(&self) -> Result<UnitNormal> {
        let k = self.kinematics()?;
        Ok(unit_normal_from(self.grid(), &k))
    }

    /// `𝔛 = −(∂_t f) ∇τ + ∇(f ∘ x)` in graph coordinates.
    pub fn warped_obstruction(&self) -> Result<Obstruction> {
        let k = self.kinematics()?;
        let metric = self.induced_metric()?;
        let grid = self.grid();
        let n = self.n();
        let grad_tau = grad_tau_from(grid, &k);
        let mut field = VectorField::zeros(n, grid.len());
        let mut norm = vec![0.0; grid.len()];
        for i in 0..grid.len() {
            let j = &k.jets[i];
            let mut df = [0.0; MAX_DIM];
            for a in 0..n {
                df[a] = j.ft * k.du[i][a] + j.fx[a];
            }
            let inv = metric.g[i]
                .inverse()
                .expect("spacelike metric is invertible");
            let grad_f = inv.mul_vec(&df);
            let mut x = [0.0; MAX_DIM];
            for a in 0..n {
                x[a] = grad_f[a] - j.ft * grad_tau.data[i][a];
            }
            norm[i] = metric.g[i].form(&x, &x).max(0.0).sqrt();
            field.data[i] = x;
        }
        let norm = ScalarField(norm);
        let max_norm = norm.max_abs();
        Ok(Obstruction {
            field,
            norm,
            max_norm,
        })
    }

    /// Per-node area element `f^{n−1} √(f² − |∇^F u|²) √det g_F Π h_i`.
    pub fn area_elements(&self) -> Result<ScalarField> {
        let k = self.kinematics()?;
        let grid = self.grid();
        let cell = grid.cell_volume();
        let n = self.n() as i32;
        Ok(ScalarField(
            (0..grid.len())
                .map(|i| k.jets[i].f.powi(n - 1) * k.s[i] * grid.sqrt_det()[i] * cell)
                .collect(),
        ))
    }

    /// `Σ ρ^{-1} f^{n−2} √det g_F Π h_i`.
    pub fn area(&self) -> Result<f64> {
        Ok(self.area_elements()?.iter().sum())
    }

    /// `n H cosh θ √det g_u Π h_i` with `H` in divergence form.
    pub fn area_gradient(&self) -> Result<ScalarField> {
        let k = self.kinematics()?;
        let h = self.mean_curvature_divergence_form()?;
        let grid = self.grid();
        let cell = grid.cell_volume();
        let nf = self.n() as f64;
        let n = self.n() as i32;
        Ok(ScalarField(
            (0..grid.len())
                .map(|i| {
                    let f = k.jets[i].f;
                    let sqrt_det_gu = f.powi(n - 2) * grid.sqrt_det()[i] / k.rho[i];
                    nf * h[i] * k.cosh[i] * sqrt_det_gu * cell
                })
                .collect(),
        ))
    }

    /// Compares central finite differences of the area (step `delta`) at
    /// the given nodes against [`GraphField::area_gradient`].
    pub fn area_gradient_relation(&self, nodes: &[usize], delta: f64) -> Result<VariationalCheck> {
        let analytic_all = self.area_gradient()?;
        let grid = self.grid();
        let mut fd = Vec::with_capacity(nodes.len());
        let mut analytic = Vec::with_capacity(nodes.len());
        for &p in nodes {
            let mut touched = vec![p];
            for a in 0..grid.dim() {
                touched.push(grid.neighbor(p, a, true));
                touched.push(grid.neighbor(p, a, false));
            }
            touched.sort_unstable();
            touched.dedup();
            let mut u = self.u.0.clone();
            u[p] = self.u[p] + delta;
            let plus = self.local_area(&u, &touched)?;
            u[p] = self.u[p] - delta;
            let minus = self.local_area(&u, &touched)?;
            fd.push((plus - minus) / (2.0 * delta));
            analytic.push(analytic_all[p]);
        }
        let scale = analytic.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let err = fd
            .iter()
            .zip(&analytic)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        Ok(VariationalCheck {
            nodes: nodes.to_vec(),
            finite_difference: fd,
            analytic,
            relative_defect: if scale > 0.0 { err / scale } else { err },
        })
    }

    fn local_area(&self, u: &[f64], nodes: &[usize]) -> Result<f64> {
        let grid = self.grid();
        let n = self.n();
        let cell = grid.cell_volume();
        let mut total = 0.0;
        for &i in nodes {
            self.model.check_time(u[i])?;
            let j = self.model.jet_at(u[i], i);
            let g = grid.metric_at(i);
            let q: f64 = (0..n)
                .map(|a| grid.partial_at(u, a, i).powi(2) / g[a])
                .sum();
            let s2 = j.f * j.f - q;
            if !(s2 > 0.0) {
                return Err(Error::Precondition(format!(
                    "perturbed graph is not spacelike at node {i}"
                )));
            }
            total += j.f.powi(n as i32 - 1) * s2.sqrt() * grid.sqrt_det()[i] * cell;
        }
        Ok(total)
    }

    /// Evaluates both hypothesis sets of the slice rigidity criterion.
    pub fn prop7_condition(&self, tol: f64) -> Result<Prop7Report> {
        let k = self.kinematics()?;
        let h = self.mean_curvature()?;
        let mut nonneg = true;
        let mut nonpos = true;
        let mut ineq_ge = true;
        let mut ineq_le = true;
        for i in 0..h.len() {
            let j = &k.jets[i];
            nonneg &= j.ft >= -tol;
            nonpos &= j.ft <= tol;
            let bound = -j.dt_log() / k.cosh[i];
            ineq_ge &= h[i] >= bound - tol;
            ineq_le &= h[i] <= bound + tol;
        }
        let case_i = nonneg && ineq_ge;
        let case_ii = nonpos && ineq_le;
        Ok(Prop7Report {
            dt_f_nonnegative: nonneg,
            dt_f_nonpositive: nonpos,
            case_i,
            case_ii,
            expects_slice: case_i || case_ii,
            constancy_defect: self.u.max() - self.u.min(),
        })
    }

    pub fn report(&self) -> Result<GeometryReport> {
        let k = self.kinematics()?;
        let metric = self.induced_metric()?;
        let obstruction = self.warped_obstruction()?;
        let area_element = self.area_elements()?;
        let ill: Vec<usize> = (0..k.mu.len())
            .filter(|&i| k.mu[i] > ILL_CONDITIONED_MARGIN)
            .collect();
        Ok(GeometryReport {
            u: self.u.clone(),
            margin: ScalarField(k.mu.clone()),
            rho: ScalarField(k.rho.clone()),
            cosh: ScalarField(k.cosh.clone()),
            sinh2: ScalarField(k.sinh2.clone()),
            mean_curvature: mean_curvature_from(self.grid(), &k),
            mean_curvature_oracle: self.mean_curvature_via_laplacian()?,
            laplacian_tau: self.laplacian_tau_fiber()?,
            laplacian_tau_oracle: self.laplacian_tau_oracle()?,
            det_direct: metric.det_direct,
            det_formula: metric.det_formula,
            area: area_element.iter().sum(),
            area_element,
            obstruction: obstruction.field,
            obstruction_norm: obstruction.norm,
            ill_conditioned: ill,
        })
    }
}

/// `g_u = f² diag(G) − du duᵀ` at one node.
pub fn assemble_metric(n: usize, g_f: &[f64; MAX_DIM], f: f64, du: &[f64; MAX_DIM]) -> SymMat {
    let mut m = SymMat::zeros(n);
    for a in 0..n {
        for b in 0..n {
            m.a[a][b] = -du[a] * du[b];
        }
        m.a[a][a] += f * f * g_f[a];
    }
    m
}

fn grad_tau_from(grid: &FiberGrid, k: &Kinematics) -> VectorField {
    let n = grid.dim();
    let mut v = VectorField::zeros(n, grid.len());
    for i in 0..grid.len() {
        let g = grid.metric_at(i);
        let f = k.jets[i].f;
        let c = f * f * k.rho[i] * k.rho[i];
        for a in 0..n {
            v.data[i][a] = c * k.du[i][a] / g[a];
        }
    }
    v
}

fn unit_normal_from(grid: &FiberGrid, k: &Kinematics) -> UnitNormal {
    let n = grid.dim();
    let mut fiber = VectorField::zeros(n, grid.len());
    for i in 0..grid.len() {
        let g = grid.metric_at(i);
        for a in 0..n {
            fiber.data[i][a] = k.rho[i] * k.du[i][a] / g[a];
        }
    }
    UnitNormal {
        time: ScalarField(k.cosh.clone()),
        fiber,
    }
}

pub(crate) fn mean_curvature_from(grid: &FiberGrid, k: &Kinematics) -> ScalarField {
    let n = grid.dim();
    let nf = n as f64;
    let mut flux = VectorField::zeros(n, grid.len());
    for i in 0..grid.len() {
        let g = grid.metric_at(i);
        for a in 0..n {
            flux.data[i][a] = k.rho[i] * k.du[i][a] / g[a];
        }
    }
    let div = grid.divergence(&flux);
    ScalarField(
        (0..grid.len())
            .map(|i| {
                let j = &k.jets[i];
                let f = j.f;
                let g = grid.metric_at(i);
                let twist: f64 = (0..n).map(|a| j.dx_log(a) * k.du[i][a] / g[a]).sum();
                (div[i]
                    + (nf * f * f * k.rho[i] + k.rho[i] * k.grad_sq[i]) * j.dt_log()
                    + nf * k.rho[i] * twist)
                    / nf
            })
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fiber_grid::MetricCoeff;
    use crate::twisted_spacetime::{TimeProfile, TrigTerm, TwistedFunction};
    use std::f64::consts::PI;

    fn minkowski_1d(m: usize) -> SpacetimeModel {
        SpacetimeModel::new(
            (-2.0, 2.0),
            FiberGrid::flat(1, 1.0, m).unwrap(),
            TwistedFunction::PureTime {
                g: TimeProfile::Constant { c: 1.0 },
            },
        )
        .unwrap()
    }

    fn separable_2d(m: usize) -> SpacetimeModel {
        let fiber = FiberGrid::new(
            2,
            vec![1.0, 1.0],
            vec![m, m],
            vec![
                MetricCoeff::Cosine {
                    amplitude: 0.2,
                    axis: 0,
                    wave: 1,
                },
                MetricCoeff::Flat,
            ],
        )
        .unwrap();
        SpacetimeModel::new(
            (-1.5, 1.5),
            fiber,
            TwistedFunction::Separable {
                g: TimeProfile::Exp { lambda: 0.5 },
                epsilon: 0.1,
                s: vec![TrigTerm {
                    coeff: 1.0,
                    wave: vec![1, 1],
                    phase: 0.3,
                }],
            },
        )
        .unwrap()
    }

    fn wavy(model: &SpacetimeModel, amp: f64) -> ScalarField {
        model.fiber().sample(|x| {
            0.1 + amp
                * (2.0 * PI * x[0]).sin()
                * if x.len() > 1 {
                    (2.0 * PI * x[1]).cos()
                } else {
                    1.0
                }
        })
    }

    #[test]
    fn slice_kinematics() {
        let model = separable_2d(16);
        let u = GraphField::slice(&model, 0.4).unwrap();
        let (cosh, sinh2) = u.hyperbolic_angle().unwrap();
        assert!(cosh.iter().all(|&c| (c - 1.0).abs() < 1e-14));
        assert!(sinh2.iter().all(|&s| s == 0.0));
        let rho = u.rho().unwrap();
        for i in 0..rho.len() {
            let f = model.jet_at(0.4, i).f;
            assert!((rho[i] * f * f - 1.0).abs() < 1e-14);
        }
        assert!(u.laplacian_tau_fiber().unwrap().max_abs() == 0.0);
        assert!(u.laplacian_tau_oracle().unwrap().max_abs() == 0.0);
        assert!(u.grad_tau().unwrap().data.iter().all(|v| *v == [0.0; 3]));
    }

    #[test]
    fn half_gradient_node_values() {
        // f ≡ 1 with |u′|² = 1/2 at x = 0
        let model = minkowski_1d(4096);
        let a = 1.0 / (2.0f64.sqrt() * 2.0 * PI);
        let u = GraphField::new(
            &model,
            model.fiber().sample(|x| a * (2.0 * PI * x[0]).sin()),
        )
        .unwrap();
        let k = u.kinematics().unwrap();
        assert!((k.rho[0] - 2.0f64.sqrt()).abs() < 1e-5);
        assert!((k.cosh[0] - 2.0f64.sqrt()).abs() < 1e-5);
        let normal = u.unit_normal().unwrap();
        assert!((normal.time[0] - 2.0f64.sqrt()).abs() < 1e-5);
    }

    #[test]
    fn margin_threshold_and_definiteness() {
        let model = minkowski_1d(256);
        let l = 1.0;
        for (delta, expect) in [(1e-3, true), (-1e-3, false)] {
            let amp = (1.0 - delta) * l / (2.0 * PI);
            let u = GraphField::new(
                &model,
                model.fiber().sample(|x| amp * (2.0 * PI * x[0] / l).sin()),
            )
            .unwrap();
            let rep = u.spacelike_check();
            assert_eq!(rep.spacelike, expect);
            assert!(rep.definiteness_consistent);
            if !expect {
                assert!(rep.min_eigenvalue[rep.worst_node] <= 0.0);
                assert!(matches!(u.rho(), Err(Error::NotSpacelike { .. })));
            }
        }
    }

    #[test]
    fn induced_metric_in_one_dimension() {
        let model = minkowski_1d(64);
        let u = GraphField::new(&model, wavy(&model, 0.05)).unwrap();
        let m = u.induced_metric().unwrap();
        let du = model.fiber().partial(u.values(), 0);
        for i in 0..du.len() {
            assert!((m.det_direct[i] - (1.0 - du[i] * du[i])).abs() < 1e-15);
            assert!((m.det_direct[i] - m.det_formula[i]).abs() <= 1e-12 * m.det_direct[i]);
        }
        let gt = u.grad_tau().unwrap();
        for i in 0..du.len() {
            assert!((gt.data[i][0] - du[i] / (1.0 - du[i] * du[i])).abs() < 1e-14);
        }
    }

    #[test]
    fn out_of_interval_values_are_domain_errors() {
        let model = minkowski_1d(16);
        let mut u = ScalarField::constant(16, 0.0);
        u[3] = 2.0;
        assert!(matches!(
            GraphField::new(&model, u),
            Err(Error::Domain { .. })
        ));
    }

    #[test]
    fn slice_mean_curvature_equals_log_derivative() {
        let model = separable_2d(16);
        let g = GraphField::slice(&model, -0.3).unwrap();
        let h = g.mean_curvature().unwrap();
        let want = model.slice_mean_curvature(-0.3).unwrap();
        let hv = g.mean_curvature_via_laplacian().unwrap();
        let hc = g.mean_curvature_divergence_form().unwrap();
        for i in 0..h.len() {
            assert!((h[i] - want[i]).abs() <= 1e-14 * want[i].abs().max(1.0));
            assert!((hv[i] - want[i]).abs() <= 1e-14 * want[i].abs().max(1.0));
            assert!((hc[i] - want[i]).abs() <= 1e-14 * want[i].abs().max(1.0));
        }
    }

    #[test]
    fn minkowski_mean_curvature_is_classical_operator() {
        let model = minkowski_1d(128);
        let u = GraphField::new(&model, wavy(&model, 0.05)).unwrap();
        let h = u.mean_curvature().unwrap();
        let grid = model.fiber();
        let du = grid.partial(u.values(), 0);
        let w: Vec<f64> = du.iter().map(|d| d / (1.0 - d * d).sqrt()).collect();
        let classical = grid.partial(&w, 0);
        for i in 0..h.len() {
            assert!((h[i] - classical[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn unit_normal_identities() {
        let model = separable_2d(32);
        let u = GraphField::new(&model, wavy(&model, 0.04)).unwrap();
        let nrm = u.unit_normal().unwrap();
        let k = u.kinematics().unwrap();
        for i in 0..nrm.time.len() {
            let f = k.jets[i].f;
            let g = model.fiber().metric_at(i);
            let sp: f64 = (0..2).map(|a| g[a] * nrm.fiber.data[i][a].powi(2)).sum();
            assert!((-nrm.time[i].powi(2) + f * f * sp + 1.0).abs() < 1e-12);
            // ḡ(K, N) with K = f ∂_t
            assert!((-f * nrm.time[i] + f * k.cosh[i]).abs() < 1e-15);
        }
    }

    #[test]
    fn grw_obstruction_vanishes_and_traveling_does_not() {
        let fiber = FiberGrid::flat(2, 1.0, 16).unwrap();
        let model = SpacetimeModel::new(
            (-1.0, 1.0),
            fiber,
            TwistedFunction::PureTime {
                g: TimeProfile::Cosh,
            },
        )
        .unwrap();
        let u = GraphField::new(&model, wavy(&model, 0.05)).unwrap();
        assert!(u.warped_obstruction().unwrap().max_norm <= 1e-10);

        let trav = SpacetimeModel::new(
            (-1.0, 1.0),
            FiberGrid::flat(1, 1.0, 64).unwrap(),
            TwistedFunction::Traveling {
                amplitude: 0.5,
                period: 1.0,
            },
        )
        .unwrap();
        let s = GraphField::slice(&trav, 0.2).unwrap();
        let obs = s.warped_obstruction().unwrap();
        for i in 0..64 {
            let j = trav.jet_at(0.2, i);
            assert!((obs.norm[i] - j.fx[0].abs() / j.f).abs() <= 1e-12);
        }
        assert!(obs.max_norm > 0.01);
    }

    #[test]
    fn slice_area_derivative_in_exponential_model() {
        let model = SpacetimeModel::new(
            (-1.0, 1.0),
            FiberGrid::flat(2, 1.0, 8).unwrap(),
            TwistedFunction::PureTime {
                g: TimeProfile::Exp { lambda: 1.0 },
            },
        )
        .unwrap();
        let d = 1e-5;
        let a0 = GraphField::slice(&model, 0.2).unwrap().area().unwrap();
        let ap = GraphField::slice(&model, 0.2 + d).unwrap().area().unwrap();
        let am = GraphField::slice(&model, 0.2 - d).unwrap().area().unwrap();
        assert!(((ap - am) / (2.0 * d) - 2.0 * a0).abs() < 1e-8 * a0);
        let grad = GraphField::slice(&model, 0.2)
            .unwrap()
            .area_gradient()
            .unwrap();
        assert!((grad.iter().sum::<f64>() - 2.0 * a0).abs() < 1e-12 * a0);
    }

    #[test]
    fn prop7_on_expanding_slice() {
        let model = SpacetimeModel::new(
            (-1.0, 1.0),
            FiberGrid::flat(1, 1.0, 16).unwrap(),
            TwistedFunction::PureTime {
                g: TimeProfile::Exp { lambda: 1.0 },
            },
        )
        .unwrap();
        let r = GraphField::slice(&model, 0.1)
            .unwrap()
            .prop7_condition(1e-12)
            .unwrap();
        assert!(r.case_i && !r.case_ii && r.expects_slice);
        assert_eq!(r.constancy_defect, 0.0);

        let contracting = SpacetimeModel::new(
            (-1.0, 1.0),
            FiberGrid::flat(1, 1.0, 16).unwrap(),
            TwistedFunction::PureTime {
                g: TimeProfile::Exp { lambda: -1.0 },
            },
        )
        .unwrap();
        let r = GraphField::slice(&contracting, 0.1)
            .unwrap()
            .prop7_condition(1e-12)
            .unwrap();
        assert!(r.case_ii && !r.case_i);
    }
}
