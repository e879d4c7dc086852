//! Identity suites and refinement studies.
//!
//! Each identity is a pointwise defect between two computations that agree
//! in the continuum. Exact identities hold to roundoff on every grid;
//! second-order identities are bounded by `C h²` with constants measured on
//! the seeded corpus, and their observed order is checked under refinement.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::conformal_lab::{conformal_laplacian_check, static_laplacian_check, ConformalFactor};
use crate::corpus::CorpusMember;
use crate::error::{Error, Result};
use crate::fiber_grid::{FiberGrid, ScalarField};
use crate::graph_geometry::GraphField;
use crate::twisted_spacetime::SpacetimeModel;

/// Pointwise bound for identities that hold exactly in the discretization.
pub const EXACT_TOL: f64 = 1e-10;
/// Minimum observed order for second-order identities.
pub const MIN_ORDER: f64 = 1.9;
/// Relative tolerance of the area gradient check.
pub const VARIATIONAL_TOL: f64 = 1e-5;
pub const VARIATIONAL_STEP: f64 = 1e-5;
pub const VARIATIONAL_NODES: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Identity {
    MeanCurvatureTwoPath,
    LaplacianTwoPath,
    ConformalLaplacian,
    StaticLaplacian,
    StaticRescaled,
    StaticPairing,
    ProductRule,
    VariationalGradient,
    UnitNormal,
    HyperbolicAngle,
    RhoDefinition,
    DeterminantTwoPath,
    GradientContraction,
    WarpedObstruction,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Accuracy {
    Exact,
    /// Bounded by `constant · h²`.
    SecondOrder {
        constant: f64,
    },
    Relative {
        tol: f64,
    },
}

impl Identity {
    pub const ALL: [Identity; 14] = [
        Identity::MeanCurvatureTwoPath,
        Identity::LaplacianTwoPath,
        Identity::ConformalLaplacian,
        Identity::StaticLaplacian,
        Identity::StaticRescaled,
        Identity::StaticPairing,
        Identity::ProductRule,
        Identity::VariationalGradient,
        Identity::UnitNormal,
        Identity::HyperbolicAngle,
        Identity::RhoDefinition,
        Identity::DeterminantTwoPath,
        Identity::GradientContraction,
        Identity::WarpedObstruction,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Identity::MeanCurvatureTwoPath => "mean_curvature_two_path",
            Identity::LaplacianTwoPath => "laplacian_two_path",
            Identity::ConformalLaplacian => "conformal_laplacian",
            Identity::StaticLaplacian => "static_laplacian",
            Identity::StaticRescaled => "static_rescaled",
            Identity::StaticPairing => "static_pairing",
            Identity::ProductRule => "product_rule",
            Identity::VariationalGradient => "variational_gradient",
            Identity::UnitNormal => "unit_normal",
            Identity::HyperbolicAngle => "hyperbolic_angle",
            Identity::RhoDefinition => "rho_definition",
            Identity::DeterminantTwoPath => "determinant_two_path",
            Identity::GradientContraction => "gradient_contraction",
            Identity::WarpedObstruction => "warped_obstruction",
        }
    }

    /// Accuracy class in fiber dimension `n`. Conformal laws lose their
    /// gradient term in dimension two and become exact.
    pub fn accuracy(self, n: usize) -> Accuracy {
        match self {
            Identity::MeanCurvatureTwoPath => Accuracy::SecondOrder { constant: 25.0 },
            Identity::LaplacianTwoPath => Accuracy::SecondOrder { constant: 20.0 },
            Identity::ConformalLaplacian | Identity::StaticRescaled if n == 2 => Accuracy::Exact,
            Identity::ConformalLaplacian => Accuracy::SecondOrder { constant: 1000.0 },
            Identity::StaticRescaled => Accuracy::SecondOrder { constant: 15.0 },
            Identity::StaticLaplacian => Accuracy::SecondOrder { constant: 50.0 },
            Identity::StaticPairing => Accuracy::SecondOrder { constant: 8.0 },
            Identity::ProductRule => Accuracy::SecondOrder { constant: 35.0 },
            Identity::VariationalGradient => Accuracy::Relative {
                tol: VARIATIONAL_TOL,
            },
            _ => Accuracy::Exact,
        }
    }

    pub fn threshold(self, grid: &FiberGrid) -> f64 {
        match self.accuracy(grid.dim()) {
            Accuracy::Exact => EXACT_TOL,
            Accuracy::SecondOrder { constant } => constant * grid.max_spacing().powi(2),
            Accuracy::Relative { tol } => tol,
        }
    }

    /// The obstruction vanishes only in warped products.
    pub fn applies(self, subject: &Subject) -> bool {
        match self {
            Identity::WarpedObstruction => subject.warped,
            _ => true,
        }
    }
}

/// Deliberate defects used as negative controls.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fault {
    #[default]
    None,
    /// Fiber Laplacian with a stray narrow leg on axis 0.
    LaplacianStencil,
}

fn fiber_laplacian(grid: &FiberGrid, u: &[f64], fault: Fault) -> ScalarField {
    let mut lap = grid.laplacian(u);
    if fault == Fault::LaplacianStencil {
        let h = grid.spacing()[0];
        for i in 0..grid.len() {
            let up = grid.neighbor(i, 0, true);
            let dn = grid.neighbor(i, 0, false);
            lap.0[i] += (u[up] - 2.0 * u[i] + u[dn]) / (h * h);
        }
    }
    lap
}

/// What one identity evaluation needs beyond the graph.
#[derive(Debug, Clone)]
pub struct Subject {
    pub label: String,
    pub conformal: ConformalFactor,
    pub warped: bool,
    pub seed: u64,
}

impl Subject {
    pub fn from_member(member: &CorpusMember, seed: u64) -> Self {
        Subject {
            label: format!("{}:{}", member.index, member.label),
            conformal: member.conformal.clone(),
            warped: member.is_grw(),
            seed: seed.wrapping_add(member.index as u64),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Defect {
    pub max: f64,
    pub mean: f64,
}

impl Defect {
    fn of(field: &[f64]) -> Self {
        let max = field.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mean = field.iter().map(|v| v.abs()).sum::<f64>() / field.len().max(1) as f64;
        Defect { max, mean }
    }

    fn merge(self, other: Defect) -> Defect {
        Defect {
            max: self.max.max(other.max),
            mean: self.mean.max(other.mean),
        }
    }
}

/// Pointwise defect of `identity` on `graph`; `probe` is the test function
/// for the conformal law.
pub fn evaluate(
    identity: Identity,
    graph: &GraphField,
    probe: &ScalarField,
    subject: &Subject,
    fault: Fault,
) -> Result<Defect> {
    let model = graph.model();
    let grid = model.fiber();
    let n = grid.dim();
    let u = graph.values();
    match identity {
        Identity::MeanCurvatureTwoPath => {
            let a = graph.mean_curvature()?;
            let b = graph.mean_curvature_via_laplacian()?;
            Ok(Defect::of(&a.sub(&b)))
        }
        Identity::LaplacianTwoPath => {
            let a = graph.laplacian_tau_fiber_with(&fiber_laplacian(grid, u, fault))?;
            let b = graph.laplacian_tau_oracle()?;
            Ok(Defect::of(&a.sub(&b)))
        }
        Identity::ConformalLaplacian => Ok(Defect::of(&conformal_laplacian_check(
            probe,
            &subject.conformal,
            graph,
        )?)),
        Identity::StaticLaplacian => Ok(Defect::of(&static_laplacian_check(graph)?.laplacian)),
        Identity::StaticRescaled => Ok(Defect::of(&static_laplacian_check(graph)?.rescaled)),
        Identity::StaticPairing => Ok(Defect::of(&static_laplacian_check(graph)?.gradient_pairing)),
        Identity::ProductRule => {
            let rho = graph.rho()?;
            let grad_u = grid.gradient(u);
            let mut flux = grad_u.clone();
            for (v, r) in flux.data.iter_mut().zip(rho.iter()) {
                for c in v.iter_mut() {
                    *c *= r;
                }
            }
            let lhs = grid.divergence(&flux);
            let cross = grid.inner(&grid.gradient(&rho), &grad_u);
            let lap = fiber_laplacian(grid, u, fault);
            let d: Vec<f64> = (0..grid.len())
                .map(|i| lhs[i] - cross[i] - rho[i] * lap[i])
                .collect();
            Ok(Defect::of(&d))
        }
        Identity::VariationalGradient => {
            let mut rng = ChaCha8Rng::seed_from_u64(subject.seed);
            let count = VARIATIONAL_NODES.min(grid.len());
            let nodes = sample(&mut rng, grid.len(), count).into_vec();
            let check = graph.area_gradient_relation(&nodes, VARIATIONAL_STEP)?;
            Ok(Defect {
                max: check.relative_defect,
                mean: check.relative_defect,
            })
        }
        Identity::UnitNormal => {
            let k = graph.kinematics()?;
            let normal = graph.unit_normal()?;
            let mut d = Vec::with_capacity(grid.len() * (n + 1));
            for i in 0..grid.len() {
                let f2 = k.jets[i].f.powi(2);
                let g = grid.metric_at(i);
                let nt = normal.time[i];
                let nf = &normal.fiber.data[i];
                let spatial: f64 = (0..n).map(|a| g[a] * nf[a] * nf[a]).sum();
                d.push(-nt * nt + f2 * spatial + 1.0);
                for a in 0..n {
                    d.push(-nt * k.du[i][a] + f2 * g[a] * nf[a]);
                }
            }
            Ok(Defect::of(&d))
        }
        Identity::HyperbolicAngle => {
            let (cosh, sinh2) = graph.hyperbolic_angle()?;
            let d: Vec<f64> = cosh
                .iter()
                .zip(sinh2.iter())
                .map(|(c, s)| c * c - s - 1.0)
                .collect();
            Ok(Defect::of(&d))
        }
        Identity::RhoDefinition => {
            let k = graph.kinematics()?;
            let d: Vec<f64> = (0..grid.len())
                .map(|i| {
                    let f = k.jets[i].f;
                    k.rho[i] * f * (f * f - k.grad_sq[i]).sqrt() - 1.0
                })
                .collect();
            Ok(Defect::of(&d))
        }
        Identity::DeterminantTwoPath => {
            let m = graph.induced_metric()?;
            let d: Vec<f64> = m
                .det_direct
                .iter()
                .zip(m.det_formula.iter())
                .map(|(a, b)| (a - b) / a)
                .collect();
            Ok(Defect::of(&d))
        }
        Identity::GradientContraction => {
            let k = graph.kinematics()?;
            let m = graph.induced_metric()?;
            let grad = graph.grad_tau()?;
            let normal = graph.unit_normal()?;
            let mut d = Vec::with_capacity(grid.len() * (n + 2));
            for i in 0..grid.len() {
                let v = &grad.data[i];
                d.push(m.g[i].form(v, v) - k.sinh2[i]);
                let inv = m.g[i].inverse().ok_or_else(|| {
                    Error::Precondition(format!("induced metric singular at node {i}"))
                })?;
                let direct = inv.mul_vec(&k.du[i]);
                for a in 0..n {
                    d.push(direct[a] - v[a]);
                }
                let g = grid.metric_at(i);
                let f2 = k.jets[i].f.powi(2);
                let nf = &normal.fiber.data[i];
                let fiber: f64 = (0..n).map(|a| f2 * g[a] * nf[a] * nf[a]).sum();
                d.push(fiber - k.sinh2[i]);
            }
            Ok(Defect::of(&d))
        }
        Identity::WarpedObstruction => {
            let x = graph.warped_obstruction()?;
            Ok(Defect::of(&x.norm))
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteRow {
    pub identity: Identity,
    pub accuracy: Accuracy,
    pub max_defect: f64,
    pub mean_defect: f64,
    /// Label of the subject with the largest defect.
    pub worst: String,
    pub grid: Vec<usize>,
    pub threshold: f64,
    pub subjects: usize,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport {
    pub rows: Vec<SuiteRow>,
    pub pass: bool,
}

impl SuiteReport {
    pub fn failures(&self) -> Vec<&'static str> {
        self.rows
            .iter()
            .filter(|r| !r.pass)
            .map(|r| r.identity.name())
            .collect()
    }
}

/// One graph on one spacetime, ready for identity evaluation.
pub struct Case {
    pub model: SpacetimeModel,
    pub u: ScalarField,
    pub probe: ScalarField,
    pub subject: Subject,
}

impl Case {
    pub fn from_member(member: &CorpusMember, m: usize, seed: u64) -> Result<Case> {
        let model = member.model(m)?;
        let u = member.graph.sample(model.fiber());
        let probe = member.probe.sample(model.fiber());
        Ok(Case {
            model,
            u,
            probe,
            subject: Subject::from_member(member, seed),
        })
    }

    pub fn evaluate(&self, identity: Identity, fault: Fault) -> Result<Option<Defect>> {
        if !identity.applies(&self.subject) {
            return Ok(None);
        }
        let graph = GraphField::new(&self.model, self.u.clone())?;
        evaluate(identity, &graph, &self.probe, &self.subject, fault).map(Some)
    }
}

/// Evaluates `identities` on every case and aggregates the worst defect.
pub fn run_suite(cases: &[Case], identities: &[Identity], fault: Fault) -> Result<SuiteReport> {
    let per_case: Vec<Vec<Option<Defect>>> = cases
        .par_iter()
        .map(|c| {
            identities
                .iter()
                .map(|&id| c.evaluate(id, fault))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::with_capacity(identities.len());
    for (k, &id) in identities.iter().enumerate() {
        let mut total: Option<Defect> = None;
        let mut worst = String::new();
        let mut count = 0;
        let mut threshold = f64::INFINITY;
        let mut grid = Vec::new();
        for (case, defects) in cases.iter().zip(&per_case) {
            let Some(d) = defects[k] else { continue };
            count += 1;
            let fiber = case.model.fiber();
            threshold = threshold.min(id.threshold(fiber));
            grid = fiber.resolution().to_vec();
            if total.is_none_or(|t| d.max > t.max) {
                worst = case.subject.label.clone();
            }
            total = Some(total.map_or(d, |t| t.merge(d)));
        }
        let total = total.unwrap_or(Defect {
            max: 0.0,
            mean: 0.0,
        });
        let pass = total.max.is_finite() && total.max <= threshold;
        let dim = cases.first().map_or(1, |c| c.model.dim());
        rows.push(SuiteRow {
            identity: id,
            accuracy: id.accuracy(dim),
            max_defect: total.max,
            mean_defect: total.mean,
            worst,
            grid,
            threshold,
            subjects: count,
            pass,
        });
    }
    let pass = rows.iter().all(|r| r.pass);
    Ok(SuiteReport { rows, pass })
}

/// Identity defects of one subject on a refinement ladder.
#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceRow {
    pub identity: Identity,
    pub subject: String,
    pub levels: Vec<usize>,
    pub defects: Vec<f64>,
    /// `log₂(d_m / d_{2m})` for consecutive levels.
    pub orders: Vec<f64>,
    /// `None` when the defect is at roundoff and the order is meaningless.
    pub asymptotic_order: Option<f64>,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceReport {
    pub rows: Vec<ConvergenceRow>,
    pub min_asymptotic_order: Option<f64>,
    pub pass: bool,
}

impl ConvergenceReport {
    /// Largest defect on the finest level over rows of `identity`.
    pub fn finest_defect(&self, identity: Identity) -> f64 {
        self.rows
            .iter()
            .filter(|r| r.identity == identity)
            .filter_map(|r| r.defects.last().copied())
            .fold(0.0, f64::max)
    }

    pub fn min_order(&self, identity: Identity) -> Option<f64> {
        self.rows
            .iter()
            .filter(|r| r.identity == identity)
            .filter_map(|r| r.asymptotic_order)
            .reduce(f64::min)
    }
}

fn check_levels(levels: &[usize]) -> Result<()> {
    if levels.len() < 2 {
        return Err(Error::Config(
            "a refinement study needs at least two levels".into(),
        ));
    }
    if levels.windows(2).any(|w| w[1] != 2 * w[0]) {
        return Err(Error::Config(format!(
            "refinement levels must double: {levels:?}"
        )));
    }
    Ok(())
}

/// Classifies a defect ladder: exact identities must stay at roundoff,
/// second-order ones must show the minimum order on the finest pair.
pub fn judge(accuracy: Accuracy, defects: &[f64]) -> (Vec<f64>, Option<f64>, bool) {
    let orders: Vec<f64> = defects.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    let finite = defects.iter().all(|d| d.is_finite());
    match accuracy {
        Accuracy::Exact => (
            orders,
            None,
            finite && defects.iter().all(|&d| d <= EXACT_TOL),
        ),
        Accuracy::Relative { tol } => (orders, None, finite && defects.iter().all(|&d| d <= tol)),
        Accuracy::SecondOrder { .. } => {
            let finest = *defects.last().unwrap_or(&f64::NAN);
            if finite && finest <= EXACT_TOL {
                return (orders, None, true);
            }
            let order = orders.last().copied();
            let pass = finite && order.is_some_and(|o| o >= MIN_ORDER);
            (orders, order, pass)
        }
    }
}

/// Refinement study over corpus members at doubling resolutions.
pub fn convergence_study(
    members: &[CorpusMember],
    identities: &[Identity],
    levels: &[usize],
    seed: u64,
) -> Result<ConvergenceReport> {
    let builders: Vec<_> = members
        .iter()
        .map(|member| move |m: usize| Case::from_member(member, m, seed))
        .collect();
    refinement_study(&builders, identities, levels)
}

/// Refinement study over arbitrary subjects; each builder produces the
/// case at a given per-axis resolution.
pub fn refinement_study<F>(
    builders: &[F],
    identities: &[Identity],
    levels: &[usize],
) -> Result<ConvergenceReport>
where
    F: Fn(usize) -> Result<Case> + Sync,
{
    check_levels(levels)?;
    let rows: Vec<Vec<ConvergenceRow>> = builders
        .par_iter()
        .map(|build| {
            let mut table = vec![Vec::with_capacity(levels.len()); identities.len()];
            let mut applicable = vec![true; identities.len()];
            let mut subject = String::new();
            let mut dim = 1;
            for &m in levels {
                let case = build(m)?;
                subject = case.subject.label.clone();
                dim = case.model.dim();
                for (k, &id) in identities.iter().enumerate() {
                    match case.evaluate(id, Fault::None)? {
                        Some(d) => table[k].push(d.max),
                        None => applicable[k] = false,
                    }
                }
            }
            Ok(identities
                .iter()
                .zip(table)
                .zip(applicable)
                .filter(|(_, ok)| *ok)
                .map(|((&id, defects), _)| {
                    let (orders, asymptotic_order, pass) = judge(id.accuracy(dim), &defects);
                    ConvergenceRow {
                        identity: id,
                        subject: subject.clone(),
                        levels: levels.to_vec(),
                        defects,
                        orders,
                        asymptotic_order,
                        pass,
                    }
                })
                .collect())
        })
        .collect::<Result<Vec<_>>>()?;
    let rows: Vec<ConvergenceRow> = rows.into_iter().flatten().collect();
    let min_asymptotic_order = rows
        .iter()
        .filter_map(|r| r.asymptotic_order)
        .reduce(f64::min);
    let pass = rows.iter().all(|r| r.pass);
    Ok(ConvergenceReport {
        rows,
        min_asymptotic_order,
        pass,
    })
}
