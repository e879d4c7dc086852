//! Conformal rescalings `g → e^{2φ} g` of the spacetime metric and their
//! effect on graphs: mean curvature, umbilic slices and Laplacians.
//!
//! Every law is exposed as a defect between two independently computed
//! sides.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fiber_grid::{FiberGrid, ScalarField, MAX_DIM};
use crate::graph_geometry::{coordinate_laplacian, GraphField, Kinematics};
use crate::smallmat::SymMat;
use crate::twisted_spacetime::{trig_eval, SpacetimeModel, TrigTerm};

/// Default bound on the mean curvature of an input declared maximal.
pub const MAXIMAL_TOL: f64 = 1e-8;

/// Closed-form conformal exponent `φ(t, x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ConformalFactor {
    Constant {
        c: f64,
    },
    /// `φ = −log f`, so that `e^{2φ} ḡ = −α² dt² + g_F` with `α = 1/f`.
    StaticPicture,
    /// `φ = −p log f`.
    ScaledStatic {
        p: f64,
    },
    /// `φ = Σ c_k cos(2π k·x/L + φ_k)`, independent of `t`.
    FiberTrig {
        terms: Vec<TrigTerm>,
    },
}

/// `(φ, ∂_t φ, ∂_i φ)` at one spacetime point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FactorJet {
    pub phi: f64,
    pub dt: f64,
    pub dx: [f64; MAX_DIM],
}

impl ConformalFactor {
    pub fn jet(&self, model: &SpacetimeModel, t: f64, idx: usize) -> FactorJet {
        match self {
            ConformalFactor::Constant { c } => FactorJet {
                phi: *c,
                dt: 0.0,
                dx: [0.0; MAX_DIM],
            },
            ConformalFactor::StaticPicture => Self::scaled_static(model, t, idx, 1.0),
            ConformalFactor::ScaledStatic { p } => Self::scaled_static(model, t, idx, *p),
            ConformalFactor::FiberTrig { terms } => {
                let grid = model.fiber();
                let x = grid.coords(idx);
                let (v, d) = trig_eval(terms, &x[..grid.dim()], grid.periods());
                FactorJet {
                    phi: v,
                    dt: 0.0,
                    dx: d,
                }
            }
        }
    }

    fn scaled_static(model: &SpacetimeModel, t: f64, idx: usize, p: f64) -> FactorJet {
        let j = model.jet_at(t, idx);
        let mut dx = [0.0; MAX_DIM];
        for (a, d) in dx.iter_mut().enumerate() {
            *d = -p * j.dx_log(a);
        }
        FactorJet {
            phi: -p * j.f.ln(),
            dt: -p * j.dt_log(),
            dx,
        }
    }

    fn validate(&self, model: &SpacetimeModel) -> Result<()> {
        if let ConformalFactor::FiberTrig { terms } = self {
            for t in terms {
                if t.wave.len() != model.dim() {
                    return Err(Error::Config(format!(
                        "conformal trig term has {} wave numbers, fiber dimension is {}",
                        t.wave.len(),
                        model.dim()
                    )));
                }
            }
        }
        Ok(())
    }

    /// `φ(u(p), p)` at every node.
    pub fn composed(&self, graph: &GraphField) -> ScalarField {
        let model = graph.model();
        ScalarField(
            graph
                .values()
                .iter()
                .enumerate()
                .map(|(i, &t)| self.jet(model, t, i).phi)
                .collect(),
        )
    }
}

/// `dφ(N) = N⁰ ∂_t φ + Σ_i N^i ∂_i φ` per node.
fn dphi_normal(factor: &ConformalFactor, graph: &GraphField, k: &Kinematics) -> Vec<f64> {
    let model = graph.model();
    let grid = model.fiber();
    let u = graph.values();
    (0..grid.len())
        .map(|i| {
            let j = factor.jet(model, u[i], i);
            let g = grid.metric_at(i);
            let fiber: f64 = (0..grid.dim())
                .map(|a| k.rho[i] * k.du[i][a] / g[a] * j.dx[a])
                .sum();
            k.cosh[i] * j.dt + fiber
        })
        .collect()
}

/// Mean curvature `H₂ = e^{−φ}(H₁ + dφ(N₁))` of the graph in `e^{2φ} ḡ`.
pub fn transform_mean_curvature(
    graph: &GraphField,
    factor: &ConformalFactor,
) -> Result<ScalarField> {
    factor.validate(graph.model())?;
    let k = graph.kinematics()?;
    let h = graph.mean_curvature()?;
    let dn = dphi_normal(factor, graph, &k);
    let phi = factor.composed(graph);
    Ok(ScalarField(
        (0..h.len())
            .map(|i| (-phi[i]).exp() * (h[i] + dn[i]))
            .collect(),
    ))
}

/// Umbilic factor `λ₂ = e^{−φ}(−∂_t log f − ∂_t φ)` of the slice `{t = t₀}`
/// in `e^{2φ} ḡ`; the shape operator is `λ₂·Id`.
pub fn slice_shape_transform(
    model: &SpacetimeModel,
    t0: f64,
    factor: &ConformalFactor,
) -> Result<ScalarField> {
    model.check_time(t0)?;
    factor.validate(model)?;
    Ok(ScalarField(
        (0..model.fiber().len())
            .map(|i| {
                let j = factor.jet(model, t0, i);
                (-j.phi).exp() * (-model.jet_at(t0, i).dt_log() - j.dt)
            })
            .collect(),
    ))
}

/// Pointwise `Δ₂h − e^{−2φ}(Δ₁h + (n−2) g₁(∇φ, ∇h))` for `g₂ = e^{2φ} g₁`,
/// both Laplacians in coordinate form and `∇φ` from central differences of
/// the samples `phi`.
pub fn conformal_defect(
    grid: &FiberGrid,
    base: &[SymMat],
    phi: &[f64],
    h: &[f64],
) -> Result<ScalarField> {
    let n = grid.dim();
    let scaled: Vec<SymMat> = base
        .iter()
        .zip(phi)
        .map(|(g, p)| g.scaled((2.0 * p).exp()))
        .collect();
    let lap2 = coordinate_laplacian(grid, &scaled, h)?;
    let lap1 = coordinate_laplacian(grid, base, h)?;
    let dphi = grid.differential(phi);
    let dh = grid.differential(h);
    Ok(ScalarField(
        (0..grid.len())
            .map(|i| {
                let inv = base[i].inverse().expect("checked by coordinate_laplacian");
                let cross = inv.form(&dphi[i], &dh[i]);
                lap2[i] - (-2.0 * phi[i]).exp() * (lap1[i] + (n as f64 - 2.0) * cross)
            })
            .collect(),
    ))
}

/// Conformal Laplacian law on the induced metric of `graph` with exponent
/// `φ ∘ x` and test function `h`.
pub fn conformal_laplacian_check(
    h: &[f64],
    factor: &ConformalFactor,
    graph: &GraphField,
) -> Result<ScalarField> {
    factor.validate(graph.model())?;
    let metric = graph.induced_metric()?;
    let phi = factor.composed(graph);
    conformal_defect(graph.model().fiber(), &metric.g, &phi, h)
}

/// Defects of the static-picture relations for `α = 1/f`.
#[derive(Debug, Clone)]
pub struct StaticDefects {
    /// `Δ̃τ` against `α^{-2}((1 + cosh²θ)∂_t log α + nH̃α cosh θ − 2α cosh θ Ñ(log α))`.
    pub laplacian: ScalarField,
    /// `Δ̃τ` against `α^{-2}(Δτ + (n−2) g(∇ log α, ∇τ))`.
    pub rescaled: ScalarField,
    /// `g(∇ log α, ∇τ)` against `−∂_t log α + α cosh θ Ñ(log α)`.
    pub gradient_pairing: ScalarField,
}

pub fn static_laplacian_check(graph: &GraphField) -> Result<StaticDefects> {
    let model = graph.model();
    let grid = model.fiber();
    let n = grid.dim();
    let nf = n as f64;
    let k = graph.kinematics()?;
    let metric = graph.induced_metric()?;
    let u = graph.values();

    let log_alpha: Vec<f64> = k.jets.iter().map(|j| -j.f.ln()).collect();
    let static_metric: Vec<SymMat> = metric
        .g
        .iter()
        .zip(&k.jets)
        .map(|(g, j)| g.scaled(1.0 / (j.f * j.f)))
        .collect();
    let lap_static = coordinate_laplacian(grid, &static_metric, u)?;
    let lap = coordinate_laplacian(grid, &metric.g, u)?;
    let h_static = transform_mean_curvature(graph, &ConformalFactor::StaticPicture)?;

    let dla = grid.differential(&log_alpha);
    let du = &k.du;
    let mut laplacian = Vec::with_capacity(grid.len());
    let mut rescaled = Vec::with_capacity(grid.len());
    let mut pairing = Vec::with_capacity(grid.len());
    for i in 0..grid.len() {
        let j = &k.jets[i];
        let alpha = 1.0 / j.f;
        let dt_la = -j.dt_log();
        let g = grid.metric_at(i);
        let fiber: f64 = (0..n)
            .map(|a| -j.dx_log(a) * k.rho[i] * du[i][a] / g[a])
            .sum();
        let n_tilde = (k.cosh[i] * dt_la + fiber) / alpha;
        let inv = metric.g[i]
            .inverse()
            .expect("spacelike metric is invertible");
        let pair = inv.form(&dla[i], &du[i]);
        let a2 = alpha * alpha;

        laplacian.push(
            lap_static[i]
                - ((1.0 + k.cosh[i] * k.cosh[i]) * dt_la + nf * h_static[i] * alpha * k.cosh[i]
                    - 2.0 * alpha * k.cosh[i] * n_tilde)
                    / a2,
        );
        rescaled.push(lap_static[i] - (lap[i] + (nf - 2.0) * pair) / a2);
        pairing.push(pair - (-dt_la + alpha * k.cosh[i] * n_tilde));
    }
    Ok(StaticDefects {
        laplacian: ScalarField(laplacian),
        rescaled: ScalarField(rescaled),
        gradient_pairing: ScalarField(pairing),
    })
}

/// Exponent `p = 2/(n−2)` that removes the normal-derivative term.
pub fn lemma4_exponent(n: usize) -> Result<f64> {
    if n < 3 {
        return Err(Error::Precondition(format!(
            "the rescaling exponent needs fiber dimension at least 3, got {n}"
        )));
    }
    Ok(2.0 / (n as f64 - 2.0))
}

#[derive(Debug, Clone)]
pub struct Lemma4Defects {
    pub exponent: f64,
    /// `Δ̂τ − α^{−2n/(n−2)} sinh²θ ∂_t log α` with `ĝ = α^{2p+2} g_u`.
    pub direct: ScalarField,
    /// Conformal law from `g_u` to `α² g_u`.
    pub first_rescaling: ScalarField,
    /// Conformal law from `α² g_u` to `α^{2p+2} g_u`.
    pub second_rescaling: ScalarField,
}

/// Checks the rescaled Laplacian of a graph that is maximal in the static
/// picture `α² ḡ`, directly and as two chained conformal laws.
pub fn lemma4_check(graph: &GraphField, maximal_tol: f64) -> Result<Lemma4Defects> {
    let model = graph.model();
    let grid = model.fiber();
    let p = lemma4_exponent(grid.dim())?;
    let h_static = transform_mean_curvature(graph, &ConformalFactor::StaticPicture)?;
    if h_static.max_abs() > maximal_tol {
        return Err(Error::Precondition(format!(
            "graph is not maximal in the static picture: max |H| = {:.3e} > {maximal_tol:.1e}",
            h_static.max_abs()
        )));
    }
    let k = graph.kinematics()?;
    let metric = graph.induced_metric()?;
    let u = graph.values();
    let log_alpha: Vec<f64> = k.jets.iter().map(|j| -j.f.ln()).collect();
    let hat: Vec<SymMat> = metric
        .g
        .iter()
        .zip(&log_alpha)
        .map(|(g, la)| g.scaled(((2.0 * p + 2.0) * la).exp()))
        .collect();
    let lap_hat = coordinate_laplacian(grid, &hat, u)?;
    let direct = ScalarField(
        (0..grid.len())
            .map(|i| {
                let rhs =
                    (-(2.0 * p + 2.0) * log_alpha[i]).exp() * k.sinh2[i] * (-k.jets[i].dt_log());
                lap_hat[i] - rhs
            })
            .collect(),
    );
    let first_rescaling = conformal_defect(grid, &metric.g, &log_alpha, u)?;
    let tilde: Vec<SymMat> = metric
        .g
        .iter()
        .zip(&log_alpha)
        .map(|(g, la)| g.scaled((2.0 * la).exp()))
        .collect();
    let p_log_alpha: Vec<f64> = log_alpha.iter().map(|la| p * la).collect();
    let second_rescaling = conformal_defect(grid, &tilde, &p_log_alpha, u)?;
    Ok(Lemma4Defects {
        exponent: p,
        direct,
        first_rescaling,
        second_rescaling,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fiber_grid::FiberGrid;
    use crate::twisted_spacetime::{TimeProfile, TwistedFunction};
    use std::f64::consts::PI;

    fn separable(n: usize, m: usize) -> SpacetimeModel {
        SpacetimeModel::new(
            (-1.5, 1.5),
            FiberGrid::flat(n, 1.0, m).unwrap(),
            TwistedFunction::Separable {
                g: TimeProfile::Cosh,
                epsilon: 0.1,
                s: vec![TrigTerm {
                    coeff: 1.0,
                    wave: vec![1; n],
                    phase: 0.2,
                }],
            },
        )
        .unwrap()
    }

    fn bump(model: &SpacetimeModel) -> ScalarField {
        model
            .fiber()
            .sample(|x| 0.2 + 0.03 * (2.0 * PI * x.iter().sum::<f64>()).sin())
    }

    #[test]
    fn constant_factor_scales_mean_curvature() {
        let model = separable(2, 16);
        let g = GraphField::new(&model, bump(&model)).unwrap();
        let h = g.mean_curvature().unwrap();
        let h2 = transform_mean_curvature(&g, &ConformalFactor::Constant { c: 0.7 }).unwrap();
        for i in 0..h.len() {
            assert!((h2[i] - (-0.7f64).exp() * h[i]).abs() < 1e-15);
        }
    }

    #[test]
    fn slices_are_totally_geodesic_in_static_picture() {
        let model = separable(2, 16);
        let g = GraphField::slice(&model, 0.4).unwrap();
        let h2 = transform_mean_curvature(&g, &ConformalFactor::StaticPicture).unwrap();
        assert!(h2.max_abs() < 1e-15);
        let lam = slice_shape_transform(&model, 0.4, &ConformalFactor::StaticPicture).unwrap();
        assert!(lam.max_abs() == 0.0);
    }

    #[test]
    fn fiber_factor_scales_umbilic_factor() {
        let model = separable(1, 16);
        let terms = vec![TrigTerm {
            coeff: 0.3,
            wave: vec![2],
            phase: 0.0,
        }];
        let phi = ConformalFactor::FiberTrig {
            terms: terms.clone(),
        };
        let lam1 = model.slice_umbilicity(0.3).unwrap();
        let lam2 = slice_shape_transform(&model, 0.3, &phi).unwrap();
        for i in 0..lam1.len() {
            let x = model.fiber().coords(i);
            let (v, _) = trig_eval(&terms, &x[..1], model.fiber().periods());
            assert!((lam2[i] - (-v).exp() * lam1[i]).abs() < 1e-15);
        }
        assert!(slice_shape_transform(&model, 1.5, &phi).is_err());
    }

    #[test]
    fn zero_factor_and_dimension_two_are_exact() {
        let model = separable(2, 16);
        let g = GraphField::new(&model, bump(&model)).unwrap();
        let h = model
            .fiber()
            .sample(|x| (2.0 * PI * x[0]).cos() * (2.0 * PI * x[1]).sin());
        let zero =
            conformal_laplacian_check(&h, &ConformalFactor::Constant { c: 0.0 }, &g).unwrap();
        assert!(zero.max_abs() < 1e-12);
        let terms = vec![TrigTerm {
            coeff: 0.4,
            wave: vec![1, -1],
            phase: 0.1,
        }];
        let d = conformal_laplacian_check(&h, &ConformalFactor::FiberTrig { terms }, &g).unwrap();
        assert!(d.max_abs() < 1e-10);
    }

    #[test]
    fn static_defects_vanish_on_slices() {
        let model = separable(2, 16);
        let g = GraphField::slice(&model, -0.2).unwrap();
        let d = static_laplacian_check(&g).unwrap();
        assert!(d.laplacian.max_abs() < 1e-13);
        assert!(d.rescaled.max_abs() < 1e-13);
        assert!(d.gradient_pairing.max_abs() < 1e-13);
    }

    #[test]
    fn lemma4_exponent_and_slice() {
        assert_eq!(lemma4_exponent(3).unwrap(), 2.0);
        assert!(lemma4_exponent(2).is_err());
        let model = separable(3, 8);
        let g = GraphField::slice(&model, 0.5).unwrap();
        let d = lemma4_check(&g, MAXIMAL_TOL).unwrap();
        assert!(d.direct.max_abs() < 1e-13);
        let bumpy = GraphField::new(&model, bump(&model)).unwrap();
        assert!(matches!(
            lemma4_check(&bumpy, MAXIMAL_TOL),
            Err(Error::Precondition(_))
        ));
    }
}
