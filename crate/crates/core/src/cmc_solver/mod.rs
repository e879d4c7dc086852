//! Prescribed mean curvature solver `H[u] = H₀` on the closed fiber.
//!
//! Damped Jacobian-free Newton–Krylov with an FFT preconditioner, a
//! linearly implicit pseudo-transient fallback, interval bound certificates
//! and a drift diagnostic for runs that escape toward an interval endpoint.

pub mod krylov;
pub mod spectral;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fiber_grid::ScalarField;
use crate::graph_geometry::{mean_curvature_from, GeometrySummary, GraphField, Kinematics};
use crate::twisted_spacetime::{ExpansionTag, SpacetimeModel, TrigTerm};

use krylov::gmres;
use spectral::SpectralSolve;

/// Right-hand side of the mean curvature equation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum Target {
    /// `H = h0`.
    Constant { h0: f64 },
    /// `H = ḡ(N, ∇̄ log f)`: maximal in the static picture `f^{-2} ḡ`.
    Generalized,
}

impl Default for Target {
    fn default() -> Self {
        Target::Constant { h0: 0.0 }
    }
}

/// Starting graph for a solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Initializer {
    Constant {
        t: f64,
    },
    Trig {
        base: f64,
        terms: Vec<TrigTerm>,
    },
    /// `base` plus `modes` random trig terms with wave numbers up to
    /// `max_wave`, scaled so that `max |u − base| = amplitude`.
    RandomTrig {
        base: f64,
        amplitude: f64,
        #[serde(default = "default_modes")]
        modes: usize,
        #[serde(default = "default_max_wave")]
        max_wave: i32,
    },
}

fn default_modes() -> usize {
    3
}

fn default_max_wave() -> i32 {
    2
}

impl Initializer {
    pub fn realize(&self, model: &SpacetimeModel, seed: u64) -> Result<ScalarField> {
        let grid = model.fiber();
        let n = grid.dim();
        match self {
            Initializer::Constant { t } => Ok(ScalarField::constant(grid.len(), *t)),
            Initializer::Trig { base, terms } => {
                for t in terms {
                    if t.wave.len() != n {
                        return Err(Error::Config(format!(
                            "initializer trig term needs {n} wave numbers"
                        )));
                    }
                }
                Ok(grid.sample(|x| {
                    base + crate::twisted_spacetime::trig_eval(terms, x, grid.periods()).0
                }))
            }
            Initializer::RandomTrig {
                base,
                amplitude,
                modes,
                max_wave,
            } => {
                if *modes == 0 || *max_wave < 1 {
                    return Err(Error::Config(
                        "random initializer needs at least one mode and max_wave ≥ 1".into(),
                    ));
                }
                let terms = random_trig_terms(n, *modes, *max_wave, seed);
                let raw = grid
                    .sample(|x| crate::twisted_spacetime::trig_eval(&terms, x, grid.periods()).0);
                let peak = raw.max_abs();
                let scale = if peak > 0.0 { amplitude / peak } else { 0.0 };
                Ok(raw.map(|v| base + scale * v))
            }
        }
    }
}

/// Random trig terms with nonzero wave vectors, `|k_i| ≤ max_wave`.
pub fn random_trig_terms(dim: usize, modes: usize, max_wave: i32, seed: u64) -> Vec<TrigTerm> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..modes)
        .map(|_| {
            let wave = loop {
                let w: Vec<i32> = (0..dim)
                    .map(|_| rng.gen_range(-max_wave..=max_wave))
                    .collect();
                if w.iter().any(|&k| k != 0) {
                    break w;
                }
            };
            TrigTerm {
                coeff: rng.gen_range(-1.0..1.0),
                wave,
                phase: rng.gen_range(0.0..std::f64::consts::TAU),
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveConfig {
    pub target: Target,
    /// Bound on `‖H − H₀‖∞` for convergence.
    pub residual_tol: f64,
    /// Budget of outer iterations; each fallback engagement counts as one.
    pub max_newton_iters: usize,
    pub krylov_rtol: f64,
    pub krylov_max_iters: usize,
    pub krylov_restart: usize,
    pub backtrack_factor: f64,
    pub min_step: f64,
    pub spacelike_cap: f64,
    pub interval_margin: f64,
    /// Sweeps per fallback engagement.
    pub relax_sweeps: usize,
    /// Consecutive monotone fallback sweeps that signal drift.
    pub drift_window: usize,
    /// Skip the interval bound certificate and always iterate.
    pub skip_certificate: bool,
    pub certificate_samples: usize,
}

impl Default for SolveConfig {
    fn default() -> Self {
        SolveConfig {
            target: Target::default(),
            residual_tol: 1e-10,
            max_newton_iters: 50,
            krylov_rtol: 1e-8,
            krylov_max_iters: 500,
            krylov_restart: 30,
            backtrack_factor: 0.5,
            min_step: 1e-8,
            spacelike_cap: 0.99,
            interval_margin: 1e-6,
            relax_sweeps: 200,
            drift_window: 20,
            skip_certificate: false,
            certificate_samples: 256,
        }
    }
}

impl SolveConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("residual_tol", self.residual_tol),
            ("krylov_rtol", self.krylov_rtol),
            ("min_step", self.min_step),
            ("spacelike_cap", self.spacelike_cap),
            ("interval_margin", self.interval_margin),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.spacelike_cap < 1.0) {
            return Err(Error::Config("spacelike_cap must be below 1".into()));
        }
        if !(self.backtrack_factor > 0.0 && self.backtrack_factor < 1.0) {
            return Err(Error::Config("backtrack_factor must lie in (0, 1)".into()));
        }
        if self.krylov_max_iters == 0 || self.krylov_restart == 0 || self.drift_window < 2 {
            return Err(Error::Config(
                "krylov_max_iters, krylov_restart must be positive and drift_window ≥ 2".into(),
            ));
        }
        if self.certificate_samples < 2 {
            return Err(Error::Config(
                "certificate_samples must be at least 2".into(),
            ));
        }
        if let Target::Constant { h0 } = self.target {
            if !h0.is_finite() {
                return Err(Error::Config("target h0 must be finite".into()));
            }
        }
        Ok(())
    }
}

/// Interval bound certificate: `H₀` outside `[inf, sup]` of `∂_t log f`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundCertificate {
    pub h0: f64,
    pub inf_dt_log_f: f64,
    pub sup_dt_log_f: f64,
    pub inf_at_t: f64,
    pub inf_at_node: usize,
    pub sup_at_t: f64,
    pub sup_at_node: usize,
    /// Which extremum inequality a compact solution would violate.
    pub violated: String,
    pub scope: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DriftDiagnostic {
    /// `+1` toward `t_max`, `−1` toward `t_min`.
    pub direction: i32,
    pub mean_start: f64,
    pub mean_end: f64,
    pub sweeps: usize,
    pub residual: f64,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum Certificate {
    BoundCertificate(BoundCertificate),
    DriftDiagnostic(DriftDiagnostic),
}

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "tag", rename_all = "snake_case")]
#[allow(clippy::large_enum_variant)]
pub enum SolveOutcome {
    Converged {
        #[serde(skip)]
        u: ScalarField,
        /// `‖H − H₀‖∞` (or the generalized residual over `n`).
        residual: f64,
        /// Same residual with `H` from the coordinate-Laplacian path.
        oracle_residual: f64,
        iterations: usize,
        max_margin: f64,
        report: GeometrySummary,
    },
    NonExistenceCertificate(Certificate),
    NotConverged {
        #[serde(skip)]
        best_u: ScalarField,
        best_residual: f64,
        iterations: usize,
        diagnostics: String,
    },
}

impl SolveOutcome {
    pub fn tag(&self) -> &'static str {
        match self {
            SolveOutcome::Converged { .. } => "converged",
            SolveOutcome::NonExistenceCertificate(_) => "non_existence_certificate",
            SolveOutcome::NotConverged { .. } => "not_converged",
        }
    }

    pub fn is_converged(&self) -> bool {
        matches!(self, SolveOutcome::Converged { .. })
    }
}

/// One accepted iterate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterRecord {
    pub iter: usize,
    pub phase: &'static str,
    pub residual: f64,
    pub step: f64,
    pub max_margin: f64,
    pub u_mean: f64,
    pub u_min: f64,
    pub u_max: f64,
    pub area: f64,
    /// `(∂_t f)·H ≤ 0` at every node.
    pub sign_condition: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveResult {
    pub outcome: SolveOutcome,
    pub log: Vec<IterRecord>,
}

/// Residual `R(u)` with the per-node data the solver reuses.
struct Eval {
    r: Vec<f64>,
    kin: Kinematics,
    h: Vec<f64>,
    inf: f64,
    l2: f64,
    max_mu: f64,
}

fn evaluate(model: &SpacetimeModel, u: &[f64], target: Target) -> Result<Eval> {
    let graph = GraphField::new(model, ScalarField(u.to_vec()))?;
    let kin = graph.kinematics()?;
    let grid = model.fiber();
    let n = grid.dim();
    let nf = n as f64;
    let h = mean_curvature_from(grid, &kin).0;
    let r: Vec<f64> = match target {
        Target::Constant { h0 } => h.iter().map(|v| nf * (v - h0)).collect(),
        Target::Generalized => (0..grid.len())
            .map(|i| {
                let j = &kin.jets[i];
                let g = grid.metric_at(i);
                let fiber: f64 = (0..n).map(|a| j.dx_log(a) * kin.du[i][a] / g[a]).sum();
                nf * (h[i] - kin.cosh[i] * j.dt_log() - kin.rho[i] * fiber)
            })
            .collect(),
    };
    let inf = r.iter().fold(0.0f64, |m, v| m.max(v.abs())) / nf;
    let l2 = r.iter().map(|v| v * v).sum::<f64>().sqrt();
    let max_mu = kin.mu.iter().copied().fold(0.0, f64::max);
    Ok(Eval {
        r,
        kin,
        h,
        inf,
        l2,
        max_mu,
    })
}

/// `R(u) = n(H[u] − H₀)`, or `n(H − ḡ(N, ∇̄ log f))` for the generalized target.
pub fn residual(model: &SpacetimeModel, u: &ScalarField, target: Target) -> Result<ScalarField> {
    Ok(ScalarField(evaluate(model, u, target)?.r))
}

fn golden_extremum(mut lo: f64, mut hi: f64, f: impl Fn(f64) -> f64) -> (f64, f64) {
    // minimizes f on [lo, hi]
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut a = hi - ratio * (hi - lo);
    let mut b = lo + ratio * (hi - lo);
    let (mut fa, mut fb) = (f(a), f(b));
    for _ in 0..80 {
        if fa <= fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - ratio * (hi - lo);
            fa = f(a);
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + ratio * (hi - lo);
            fb = f(b);
        }
    }
    if fa <= fb {
        (a, fa)
    } else {
        (b, fb)
    }
}

/// Infimum and supremum of `∂_t log f` over the closed configured interval
/// and all fiber nodes, as `((inf, t, node), (sup, t, node))`.
pub fn dt_log_f_range(
    model: &SpacetimeModel,
    samples: usize,
) -> ((f64, f64, usize), (f64, f64, usize)) {
    let (a, b) = model.interval();
    let dt = (b - a) / (samples - 1) as f64;
    let ts: Vec<f64> = (0..samples).map(|k| a + dt * k as f64).collect();
    let mut lo = (f64::INFINITY, a, 0);
    let mut hi = (f64::NEG_INFINITY, a, 0);
    let mut lo_k = 0;
    let mut hi_k = 0;
    for idx in 0..model.fiber().len() {
        for (k, &t) in ts.iter().enumerate() {
            let v = model.jet_at(t, idx).dt_log();
            if v < lo.0 {
                lo = (v, t, idx);
                lo_k = k;
            }
            if v > hi.0 {
                hi = (v, t, idx);
                hi_k = k;
            }
        }
    }
    let bracket = |k: usize| (ts[k.saturating_sub(1)], ts[(k + 1).min(samples - 1)]);
    let (l0, l1) = bracket(lo_k);
    let (t_lo, v_lo) = golden_extremum(l0, l1, |t| model.jet_at(t, lo.2).dt_log());
    if v_lo < lo.0 {
        lo = (v_lo, t_lo, lo.2);
    }
    let (h0, h1) = bracket(hi_k);
    let (t_hi, v_hi) = golden_extremum(h0, h1, |t| -model.jet_at(t, hi.2).dt_log());
    if -v_hi > hi.0 {
        hi = (-v_hi, t_hi, hi.2);
    }
    (lo, hi)
}

/// Bound certificate when `H₀` lies outside the range of `∂_t log f`.
pub fn certificate_check(
    model: &SpacetimeModel,
    h0: f64,
    samples: usize,
) -> Option<BoundCertificate> {
    let (lo, hi) = dt_log_f_range(model, samples.max(2));
    let (a, b) = model.interval();
    let violated = if h0 < lo.0 {
        "lower: at the minimum of the height function H0 >= inf dt log f fails"
    } else if h0 > hi.0 {
        "upper: at the maximum of the height function H0 <= sup dt log f fails"
    } else {
        return None;
    };
    Some(BoundCertificate {
        h0,
        inf_dt_log_f: lo.0,
        sup_dt_log_f: hi.0,
        inf_at_t: lo.1,
        inf_at_node: lo.2,
        sup_at_t: hi.1,
        sup_at_node: hi.2,
        violated: violated.into(),
        scope: format!("bounds computed over the configured interval [{a}, {b}] only"),
    })
}

struct Solver<'a> {
    model: &'a SpacetimeModel,
    cfg: &'a SolveConfig,
    log: Vec<IterRecord>,
    relax_means: Vec<f64>,
    relax_residuals: Vec<f64>,
    dt_relax: f64,
}

impl<'a> Solver<'a> {
    fn admissible(&self, u: &[f64]) -> bool {
        let (a, b) = self.model.interval();
        let m = self.cfg.interval_margin;
        u.iter().all(|&v| v.is_finite() && v >= a + m && v <= b - m)
    }

    fn try_eval(&self, u: &[f64]) -> Option<Eval> {
        if !self.admissible(u) {
            return None;
        }
        let e = evaluate(self.model, u, self.cfg.target).ok()?;
        if e.max_mu > self.cfg.spacelike_cap {
            return None;
        }
        Some(e)
    }

    fn record(&mut self, phase: &'static str, u: &[f64], e: &Eval, step: f64) {
        let field = ScalarField(u.to_vec());
        let area = GraphField::new(self.model, field.clone())
            .and_then(|g| g.area())
            .unwrap_or(f64::NAN);
        let sign_condition = e.kin.jets.iter().zip(&e.h).all(|(j, h)| j.ft * h <= 1e-12);
        self.log.push(IterRecord {
            iter: self.log.len(),
            phase,
            residual: e.inf,
            step,
            max_margin: e.max_mu,
            u_mean: field.mean(),
            u_min: field.min(),
            u_max: field.max(),
            area,
            sign_condition,
        });
    }

    /// FFT preconditioner and whether the mean mode is (nearly) neutral.
    fn preconditioner(&self, u: &[f64], e: &Eval) -> (SpectralSolve, bool) {
        let grid = self.model.fiber();
        let n = grid.dim();
        let len = grid.len() as f64;
        let mut coef = [0.0; 3];
        for i in 0..grid.len() {
            let g = grid.metric_at(i);
            let f = e.kin.jets[i].f;
            let s2 = f * f - e.kin.grad_sq[i];
            for a in 0..n {
                coef[a] += e.kin.rho[i] / g[a] * (1.0 + e.kin.du[i][a].powi(2) / (g[a] * s2)) / len;
            }
        }
        // mean response of R to a constant shift
        let eps = 1e-6;
        let shift = |d: f64| -> Option<f64> {
            let v: Vec<f64> = u.iter().map(|x| x + d).collect();
            evaluate(self.model, &v, self.cfg.target)
                .ok()
                .map(|ev| ev.r.iter().sum::<f64>() / len)
        };
        let zeroth = match (shift(eps), shift(-eps)) {
            (Some(p), Some(m)) => (p - m) / (2.0 * eps),
            _ => 0.0,
        };
        let min_coef = coef[..n].iter().copied().fold(f64::INFINITY, f64::min);
        let min_wave = grid
            .periods()
            .iter()
            .map(|l| (2.0 * std::f64::consts::PI / l).powi(2))
            .fold(f64::INFINITY, f64::min);
        let floor = 0.05 * min_coef * min_wave;
        let neutral = zeroth.abs() < 0.2 * floor;
        let solve = SpectralSolve::new(grid, move |lam| {
            let mut s = 0.0;
            for a in 0..lam.len() {
                s += coef[a] * lam[a];
            }
            -s - zeroth.abs() - floor
        });
        (solve, neutral)
    }

    /// Newton step with backtracking; `None` when no admissible decrease exists.
    fn newton(&mut self, u: &[f64], e: &Eval) -> Option<(Vec<f64>, Eval, f64)> {
        let (pre, neutral) = self.preconditioner(u, e);
        let unorm = u.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let model = self.model;
        let target = self.cfg.target;
        let r0 = &e.r;
        let apply = |v: &[f64]| -> Result<Vec<f64>> {
            let vn = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            if vn == 0.0 {
                return Ok(vec![0.0; v.len()]);
            }
            let eps = f64::EPSILON.cbrt() * (1.0 + unorm) / vn;
            let plus: Vec<f64> = u.iter().zip(v).map(|(a, b)| a + eps * b).collect();
            let minus: Vec<f64> = u.iter().zip(v).map(|(a, b)| a - eps * b).collect();
            let rp = evaluate(model, &plus, target)?.r;
            let rm = evaluate(model, &minus, target)?.r;
            Ok(rp
                .iter()
                .zip(&rm)
                .map(|(p, m)| (p - m) / (2.0 * eps))
                .collect())
        };
        let rhs: Vec<f64> = r0.iter().map(|v| -v).collect();
        let (mut delta, _stats) = gmres(
            apply,
            |v| pre.apply(v),
            &rhs,
            self.cfg.krylov_restart,
            self.cfg.krylov_rtol,
            self.cfg.krylov_max_iters,
        )
        .ok()?;
        if neutral {
            // a neutral mean mode makes the step's mean arbitrary; keep the current height
            let mean = delta.iter().sum::<f64>() / delta.len() as f64;
            delta.iter_mut().for_each(|d| *d -= mean);
        }
        let mut lambda = 1.0;
        while lambda >= self.cfg.min_step {
            let trial: Vec<f64> = u.iter().zip(&delta).map(|(a, d)| a + lambda * d).collect();
            if let Some(et) = self.try_eval(&trial) {
                if et.l2 <= (1.0 - 1e-4 * lambda) * e.l2 {
                    return Some((trial, et, lambda));
                }
            }
            lambda *= self.cfg.backtrack_factor;
        }
        None
    }

    /// Sign of the mean-mode relaxation: `−1` when slice mean curvature
    /// increases with `t` at the current mean height.
    fn relax_sign(&self, u: &[f64]) -> f64 {
        let mean = u.iter().sum::<f64>() / u.len() as f64;
        let grid = self.model.fiber();
        let avg = (0..grid.len())
            .map(|i| self.model.jet_at(mean, i).dtt_log())
            .sum::<f64>()
            / grid.len() as f64;
        if avg > 0.0 {
            -1.0
        } else {
            1.0
        }
    }

    fn relax_step(&self, u: &[f64], e: &Eval, dt: f64) -> Vec<f64> {
        let grid = self.model.fiber();
        let n = grid.dim();
        let nf = n as f64;
        let len = grid.len() as f64;
        let v: Vec<f64> = (0..grid.len())
            .map(|i| e.kin.cosh[i] * e.r[i] / nf)
            .collect();
        let mean = v.iter().sum::<f64>() / len;
        let sigma = self.relax_sign(u);
        let rhs: Vec<f64> = v.iter().map(|x| x - mean + sigma * mean).collect();
        let mut coef = [0.0; 3];
        for i in 0..grid.len() {
            let g = grid.metric_at(i);
            let f = e.kin.jets[i].f;
            for a in 0..n {
                coef[a] += f * f * e.kin.rho[i] * e.kin.rho[i] / (nf * g[a]) / len;
            }
        }
        let solve = SpectralSolve::new(grid, move |lam| {
            1.0 + dt * (0..lam.len()).map(|a| coef[a] * lam[a]).sum::<f64>()
        });
        let d = solve.apply(&rhs);
        u.iter().zip(&d).map(|(a, b)| a + dt * b).collect()
    }

    /// One fallback engagement. Returns a drift certificate when detected.
    fn relax(&mut self, u: &mut Vec<f64>, e: &mut Eval) -> Option<DriftDiagnostic> {
        let start = e.inf;
        let tol = self.cfg.residual_tol;
        for _ in 0..self.cfg.relax_sweeps {
            if e.inf <= tol || e.inf <= 0.5 * start {
                break;
            }
            let mut accepted = None;
            for _ in 0..40 {
                let trial = self.relax_step(u, e, self.dt_relax);
                match self.try_eval(&trial) {
                    Some(et) if et.inf <= 1.5 * e.inf => {
                        accepted = Some((trial, et));
                        break;
                    }
                    _ => self.dt_relax *= 0.5,
                }
            }
            let Some((trial, et)) = accepted else {
                break;
            };
            let step = self.dt_relax;
            *u = trial;
            *e = et;
            self.dt_relax = (self.dt_relax * 1.2).min(1e3);
            self.record("relax", u, e, step);
            self.relax_means
                .push(u.iter().sum::<f64>() / u.len() as f64);
            self.relax_residuals.push(e.inf);
            if let Some(d) = self.drift() {
                return Some(d);
            }
        }
        None
    }

    fn drift(&self) -> Option<DriftDiagnostic> {
        let w = self.cfg.drift_window;
        let k = self.relax_means.len();
        if k < w + 1 {
            return None;
        }
        let means = &self.relax_means[k - w - 1..];
        let res = &self.relax_residuals[k - w - 1..];
        let up = means.windows(2).all(|p| p[1] > p[0]);
        let down = means.windows(2).all(|p| p[1] < p[0]);
        if !(up || down) {
            return None;
        }
        let tol = self.cfg.residual_tol;
        if res.iter().any(|&r| r <= 10.0 * tol) {
            return None;
        }
        if res[w] < 0.9 * res[0] {
            return None;
        }
        Some(DriftDiagnostic {
            direction: if up { 1 } else { -1 },
            mean_start: means[0],
            mean_end: means[w],
            sweeps: w,
            residual: res[w],
            note: "heuristic: mean height moved monotonically toward an interval endpoint without residual reduction".into(),
        })
    }
}

/// Solves `R(u) = 0` from `u0`.
pub fn solve(model: &SpacetimeModel, cfg: &SolveConfig, u0: &ScalarField) -> Result<SolveResult> {
    cfg.validate()?;
    let graph = GraphField::new(model, u0.clone())?;
    graph.kinematics()?;
    if let (false, Target::Constant { h0 }) = (cfg.skip_certificate, cfg.target) {
        if let Some(cert) = certificate_check(model, h0, cfg.certificate_samples) {
            return Ok(SolveResult {
                outcome: SolveOutcome::NonExistenceCertificate(Certificate::BoundCertificate(cert)),
                log: Vec::new(),
            });
        }
    }
    let mut solver = Solver {
        model,
        cfg,
        log: Vec::new(),
        relax_means: Vec::new(),
        relax_residuals: Vec::new(),
        dt_relax: 1e-2,
    };
    // steps never carry the modes the wide stencil cannot see, so start
    // without them too
    let mut u = SpectralSolve::new(model.fiber(), |_| 1.0).apply(u0);
    let mut e = evaluate(model, &u, cfg.target)?;
    solver.record("init", &u, &e, 0.0);
    let mut best = (e.inf, u.clone());
    let mut iterations = 0;
    let mut diagnostics = String::from("iteration budget exhausted");
    while e.inf > cfg.residual_tol && iterations < cfg.max_newton_iters {
        iterations += 1;
        let stalled = match solver.newton(&u, &e) {
            Some((un, en, lambda)) => {
                let ratio = en.l2 / e.l2;
                u = un;
                e = en;
                solver.record("newton", &u, &e, lambda);
                solver.relax_means.clear();
                solver.relax_residuals.clear();
                ratio > 0.99
            }
            None => true,
        };
        if e.inf < best.0 {
            best = (e.inf, u.clone());
        }
        if stalled && e.inf > cfg.residual_tol {
            if iterations >= cfg.max_newton_iters {
                break;
            }
            iterations += 1;
            if let Some(d) = solver.relax(&mut u, &mut e) {
                return Ok(SolveResult {
                    outcome: SolveOutcome::NonExistenceCertificate(Certificate::DriftDiagnostic(d)),
                    log: solver.log,
                });
            }
            if e.inf < best.0 {
                best = (e.inf, u.clone());
            }
            if solver.log.last().map(|r| r.phase) != Some("relax") {
                diagnostics = "newton and relaxation both stalled".into();
            }
        }
    }
    let log = solver.log;
    if e.inf <= cfg.residual_tol {
        let field = ScalarField(u);
        let graph = GraphField::new(model, field.clone())?;
        let report = graph.report()?.summary();
        let oracle = graph.mean_curvature_via_laplacian()?;
        let oracle_residual = match cfg.target {
            Target::Constant { h0 } => oracle.iter().fold(0.0f64, |m, h| m.max((h - h0).abs())),
            Target::Generalized => {
                let n = model.dim() as f64;
                let r = ScalarField(e.r.clone());
                let h = ScalarField(e.h.clone());
                // swap the fiber-form H for the oracle H inside R/n
                (0..r.len())
                    .map(|i| (r[i] / n - h[i] + oracle[i]).abs())
                    .fold(0.0, f64::max)
            }
        };
        return Ok(SolveResult {
            outcome: SolveOutcome::Converged {
                residual: e.inf,
                oracle_residual,
                iterations,
                max_margin: e.max_mu,
                report,
                u: field,
            },
            log,
        });
    }
    Ok(SolveResult {
        outcome: SolveOutcome::NotConverged {
            best_residual: best.0,
            best_u: ScalarField(best.1),
            iterations,
            diagnostics,
        },
        log,
    })
}

/// Rigidity verdicts for a converged maximal solve.
#[derive(Debug, Clone, Serialize)]
pub struct RigidityReport {
    /// `max u − min u`
    pub constancy_defect: f64,
    /// `max_x |∂_t f(ū, x)|`
    pub dt_f_at_mean: f64,
    /// `(∂_t f)·H ≤ 0` held on every logged iterate before convergence.
    pub sign_condition_all_iterates: bool,
    pub sign_condition_violations: usize,
    pub transition_time: Option<f64>,
    /// `|ū − t₀|` for transition models.
    pub transition_offset: Option<f64>,
}

pub fn rigidity_report(
    model: &SpacetimeModel,
    result: &SolveResult,
    target: Target,
) -> Result<RigidityReport> {
    let SolveOutcome::Converged { u, .. } = &result.outcome else {
        return Err(Error::Precondition(
            "rigidity report needs a converged outcome".into(),
        ));
    };
    if target != (Target::Constant { h0: 0.0 }) {
        return Err(Error::Precondition(
            "rigidity report needs a maximal (H0 = 0) solve".into(),
        ));
    }
    let mean = u.mean();
    let dt_f = (0..u.len())
        .map(|i| model.jet_at(mean, i).ft.abs())
        .fold(0.0, f64::max);
    let pre: Vec<&IterRecord> = result
        .log
        .iter()
        .take(result.log.len().saturating_sub(1))
        .collect();
    let violations = pre.iter().filter(|r| !r.sign_condition).count();
    let transition = match model.classify(64)?.tag {
        ExpansionTag::Transition { t0 } => Some(t0),
        _ => None,
    };
    Ok(RigidityReport {
        constancy_defect: u.max() - u.min(),
        dt_f_at_mean: dt_f,
        sign_condition_all_iterates: violations == 0,
        sign_condition_violations: violations,
        transition_time: transition,
        transition_offset: transition.map(|t0| (mean - t0).abs()),
    })
}
