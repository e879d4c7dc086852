//! Twisted product spacetimes `I ×_f F` with metric `−dt² + f(t,x)² g_F`.
//!
//! The twisting function comes from a closed-form catalog so that every
//! time derivative is exact.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fiber_grid::{FiberGrid, ScalarField, VectorField, MAX_DIM};

/// Tolerance below which a sampled `∂_t f` counts as zero.
pub const TOL_ZERO: f64 = 1e-12;
/// Threshold on `max |∇^F f|/f` for the warped (GRW) verdict.
pub const GRW_TOL: f64 = 1e-12;
const BISECTION_TOL: f64 = 1e-10;
const POSITIVITY_SAMPLES: usize = 65;

/// One-variable profile with value and first two derivatives.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TimeProfile {
    Constant {
        c: f64,
    },
    /// `a + b t`
    Linear {
        a: f64,
        b: f64,
    },
    /// `exp(λ t)`
    Exp {
        lambda: f64,
    },
    Cosh,
    Sech,
    /// `exp(−t²)`
    Gauss,
}

impl TimeProfile {
    /// `(g, g′, g″)` at `t`.
    pub fn eval(&self, t: f64) -> (f64, f64, f64) {
        match *self {
            TimeProfile::Constant { c } => (c, 0.0, 0.0),
            TimeProfile::Linear { a, b } => (a + b * t, b, 0.0),
            TimeProfile::Exp { lambda } => {
                let e = (lambda * t).exp();
                (e, lambda * e, lambda * lambda * e)
            }
            TimeProfile::Cosh => (t.cosh(), t.sinh(), t.cosh()),
            TimeProfile::Sech => {
                let s = 1.0 / t.cosh();
                let th = t.tanh();
                (s, -s * th, s * th * th - s * s * s)
            }
            TimeProfile::Gauss => {
                let e = (-t * t).exp();
                (e, -2.0 * t * e, (4.0 * t * t - 2.0) * e)
            }
        }
    }

    pub fn value(&self, t: f64) -> f64 {
        self.eval(t).0
    }
}

/// `coeff · cos(2π Σ_i wave_i x_i / L_i + phase)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrigTerm {
    pub coeff: f64,
    pub wave: Vec<i32>,
    #[serde(default)]
    pub phase: f64,
}

impl TrigTerm {
    fn angle(&self, x: &[f64], periods: &[f64]) -> f64 {
        let mut a = self.phase;
        for (i, k) in self.wave.iter().enumerate() {
            a += 2.0 * PI * *k as f64 * x[i] / periods[i];
        }
        a
    }
}

/// Value and coordinate partials of a trigonometric polynomial.
pub fn trig_eval(terms: &[TrigTerm], x: &[f64], periods: &[f64]) -> (f64, [f64; MAX_DIM]) {
    let mut v = 0.0;
    let mut d = [0.0; MAX_DIM];
    for term in terms {
        let a = term.angle(x, periods);
        v += term.coeff * a.cos();
        let s = a.sin();
        for (i, k) in term.wave.iter().enumerate() {
            d[i] -= term.coeff * 2.0 * PI * *k as f64 / periods[i] * s;
        }
    }
    (v, d)
}

/// Second coordinate partials `∂_i∂_j s` of a trigonometric polynomial.
pub fn trig_hessian(terms: &[TrigTerm], x: &[f64], periods: &[f64]) -> [[f64; MAX_DIM]; MAX_DIM] {
    let mut hess = [[0.0; MAX_DIM]; MAX_DIM];
    for term in terms {
        let c = term.coeff * term.angle(x, periods).cos();
        for (i, ki) in term.wave.iter().enumerate() {
            for (j, kj) in term.wave.iter().enumerate() {
                let wi = 2.0 * PI * *ki as f64 / periods[i];
                let wj = 2.0 * PI * *kj as f64 / periods[j];
                hess[i][j] -= c * wi * wj;
            }
        }
    }
    hess
}

fn check_terms(terms: &[TrigTerm], dim: usize) -> Result<()> {
    for t in terms {
        if t.wave.len() != dim {
            return Err(Error::Config(format!(
                "trig term has {} wave numbers, fiber dimension is {dim}",
                t.wave.len()
            )));
        }
        if !(t.coeff.is_finite() && t.phase.is_finite()) {
            return Err(Error::Config("trig term has non-finite parameters".into()));
        }
    }
    Ok(())
}

/// Closed-form twisting function `f(t, x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum TwistedFunction {
    /// `f = g(t)`
    PureTime { g: TimeProfile },
    /// `f = g(t) (1 + ε s(x))`
    Separable {
        g: TimeProfile,
        epsilon: f64,
        s: Vec<TrigTerm>,
    },
    /// `f = g(t) + ε s(x) q(t)`
    Additive {
        g: TimeProfile,
        q: TimeProfile,
        epsilon: f64,
        s: Vec<TrigTerm>,
    },
    /// `f = 1 + a sin(2π(t + x)/T)` on a one-dimensional fiber.
    Traveling { amplitude: f64, period: f64 },
}

/// `f` and its exact derivatives at one spacetime point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet {
    pub f: f64,
    pub ft: f64,
    pub ftt: f64,
    /// Coordinate partials `∂_i f` at fixed `t`.
    pub fx: [f64; MAX_DIM],
    /// Mixed partials `∂_t ∂_i f`.
    pub ftx: [f64; MAX_DIM],
}

impl Jet {
    pub fn dt_log(&self) -> f64 {
        self.ft / self.f
    }

    pub fn dtt_log(&self) -> f64 {
        self.ftt / self.f - (self.ft / self.f).powi(2)
    }

    pub fn dx_log(&self, i: usize) -> f64 {
        self.fx[i] / self.f
    }
}

impl TwistedFunction {
    pub fn validate(&self, fiber: &FiberGrid) -> Result<()> {
        let n = fiber.dim();
        match self {
            TwistedFunction::PureTime { .. } => Ok(()),
            TwistedFunction::Separable { epsilon, s, .. }
            | TwistedFunction::Additive { epsilon, s, .. } => {
                if !epsilon.is_finite() {
                    return Err(Error::Config("epsilon must be finite".into()));
                }
                check_terms(s, n)
            }
            TwistedFunction::Traveling { amplitude, period } => {
                if n != 1 {
                    return Err(Error::Config(
                        "traveling twist needs a one-dimensional fiber".into(),
                    ));
                }
                if !(amplitude.abs() < 1.0) {
                    return Err(Error::Config(format!(
                        "traveling amplitude {amplitude} must satisfy |a| < 1"
                    )));
                }
                if !(*period > 0.0) {
                    return Err(Error::Config("traveling period must be positive".into()));
                }
                let ratio = fiber.periods()[0] / period;
                if (ratio - ratio.round()).abs() > 1e-9 || ratio.round() < 1.0 {
                    return Err(Error::Config(format!(
                        "fiber period {} is not a multiple of traveling period {period}",
                        fiber.periods()[0]
                    )));
                }
                Ok(())
            }
        }
    }

    pub fn jet(&self, t: f64, x: &[f64], periods: &[f64]) -> Jet {
        match self {
            TwistedFunction::PureTime { g } => {
                let (v, d1, d2) = g.eval(t);
                Jet {
                    f: v,
                    ft: d1,
                    ftt: d2,
                    fx: [0.0; MAX_DIM],
                    ftx: [0.0; MAX_DIM],
                }
            }
            TwistedFunction::Separable { g, epsilon, s } => {
                let (v, d1, d2) = g.eval(t);
                let (sv, sd) = trig_eval(s, x, periods);
                let w = 1.0 + epsilon * sv;
                let mut fx = [0.0; MAX_DIM];
                let mut ftx = [0.0; MAX_DIM];
                for i in 0..MAX_DIM {
                    fx[i] = v * epsilon * sd[i];
                    ftx[i] = d1 * epsilon * sd[i];
                }
                Jet {
                    f: v * w,
                    ft: d1 * w,
                    ftt: d2 * w,
                    fx,
                    ftx,
                }
            }
            TwistedFunction::Additive { g, q, epsilon, s } => {
                let (v, d1, d2) = g.eval(t);
                let (qv, q1, q2) = q.eval(t);
                let (sv, sd) = trig_eval(s, x, periods);
                let es = epsilon * sv;
                let mut fx = [0.0; MAX_DIM];
                let mut ftx = [0.0; MAX_DIM];
                for i in 0..MAX_DIM {
                    fx[i] = epsilon * sd[i] * qv;
                    ftx[i] = epsilon * sd[i] * q1;
                }
                Jet {
                    f: v + es * qv,
                    ft: d1 + es * q1,
                    ftt: d2 + es * q2,
                    fx,
                    ftx,
                }
            }
            TwistedFunction::Traveling { amplitude, period } => {
                let w = 2.0 * PI / period;
                let th = w * (t + x[0]);
                let (s, c) = th.sin_cos();
                let ft = amplitude * w * c;
                let ftt = -amplitude * w * w * s;
                let mut fx = [0.0; MAX_DIM];
                let mut ftx = [0.0; MAX_DIM];
                fx[0] = ft;
                ftx[0] = ftt;
                Jet {
                    f: 1.0 + amplitude * s,
                    ft,
                    ftt,
                    fx,
                    ftx,
                }
            }
        }
    }

    /// True when `f` cannot depend on the fiber point.
    pub fn is_structurally_warped(&self) -> bool {
        match self {
            TwistedFunction::PureTime { .. } => true,
            TwistedFunction::Separable { epsilon, s, .. }
            | TwistedFunction::Additive { epsilon, s, .. } => {
                *epsilon == 0.0
                    || s.iter()
                        .all(|t| t.coeff == 0.0 || t.wave.iter().all(|&k| k == 0))
            }
            TwistedFunction::Traveling { amplitude, .. } => *amplitude == 0.0,
        }
    }
}

/// Time orientation of the spacetime as seen by the sign of `∂_t f`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "tag", rename_all = "snake_case")]
pub enum ExpansionTag {
    Expanding,
    Contracting,
    Transition { t0: f64 },
    Mixed,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExpansionEvidence {
    pub t_samples: usize,
    pub positive: usize,
    pub negative: usize,
    pub zero: usize,
    pub min_dt_f: f64,
    pub max_dt_f: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExpansionClass {
    #[serde(flatten)]
    pub tag: ExpansionTag,
    pub evidence: ExpansionEvidence,
}

/// `I ×_f F`: open time interval, fiber grid and twisting function.
#[derive(Debug, Clone)]
pub struct SpacetimeModel {
    interval: (f64, f64),
    fiber: FiberGrid,
    twist: TwistedFunction,
}

impl SpacetimeModel {
    pub fn new(interval: (f64, f64), fiber: FiberGrid, twist: TwistedFunction) -> Result<Self> {
        let (a, b) = interval;
        if !(a.is_finite() && b.is_finite() && a < b) {
            return Err(Error::Config(format!(
                "interval ({a}, {b}) must be finite with t_min < t_max"
            )));
        }
        twist.validate(&fiber)?;
        let model = SpacetimeModel {
            interval,
            fiber,
            twist,
        };
        for k in 0..POSITIVITY_SAMPLES {
            let t = a + (b - a) * k as f64 / (POSITIVITY_SAMPLES - 1) as f64;
            for idx in 0..model.fiber.len() {
                let j = model.jet_at(t, idx);
                if !(j.f > 0.0 && j.f.is_finite()) {
                    return Err(Error::Config(format!(
                        "twisting function is not positive at t = {t}, x = {:?} (f = {})",
                        &model.fiber.coords(idx)[..model.fiber.dim()],
                        j.f
                    )));
                }
            }
        }
        Ok(model)
    }

    pub fn interval(&self) -> (f64, f64) {
        self.interval
    }

    pub fn fiber(&self) -> &FiberGrid {
        &self.fiber
    }

    pub fn twist(&self) -> &TwistedFunction {
        &self.twist
    }

    pub fn dim(&self) -> usize {
        self.fiber.dim()
    }

    /// Same spacetime on a refined or coarsened fiber.
    pub fn with_fiber(&self, fiber: FiberGrid) -> Result<Self> {
        SpacetimeModel::new(self.interval, fiber, self.twist.clone())
    }

    pub fn contains(&self, t: f64) -> bool {
        t > self.interval.0 && t < self.interval.1
    }

    pub fn check_time(&self, t: f64) -> Result<()> {
        if self.contains(t) {
            Ok(())
        } else {
            Err(Error::Domain {
                what: "time".into(),
                value: t,
                lo: self.interval.0,
                hi: self.interval.1,
            })
        }
    }

    pub fn jet(&self, t: f64, x: &[f64]) -> Jet {
        self.twist.jet(t, x, self.fiber.periods())
    }

    /// Jet at time `t` over fiber node `idx`.
    pub fn jet_at(&self, t: f64, idx: usize) -> Jet {
        let x = self.fiber.coords(idx);
        self.twist
            .jet(t, &x[..self.fiber.dim()], self.fiber.periods())
    }

    /// Interior time lattice `t_min + (k+1)(t_max − t_min)/(N+1)`.
    pub fn time_lattice(&self, samples: usize) -> Vec<f64> {
        let (a, b) = self.interval;
        (0..samples)
            .map(|k| a + (b - a) * (k + 1) as f64 / (samples + 1) as f64)
            .collect()
    }

    pub fn classify(&self, t_samples: usize) -> Result<ExpansionClass> {
        if t_samples < 16 {
            return Err(Error::Config(format!(
                "classification needs at least 16 time samples, got {t_samples}"
            )));
        }
        let ts = self.time_lattice(t_samples);
        let nodes = self.fiber.len();
        let mut ev = ExpansionEvidence {
            t_samples,
            positive: 0,
            negative: 0,
            zero: 0,
            min_dt_f: f64::INFINITY,
            max_dt_f: f64::NEG_INFINITY,
        };
        // samples[node][k]
        let mut samples = vec![vec![0.0; t_samples]; nodes];
        for (idx, row) in samples.iter_mut().enumerate() {
            for (k, &t) in ts.iter().enumerate() {
                let v = self.jet_at(t, idx).ft;
                row[k] = v;
                ev.min_dt_f = ev.min_dt_f.min(v);
                ev.max_dt_f = ev.max_dt_f.max(v);
                if v > TOL_ZERO {
                    ev.positive += 1;
                } else if v < -TOL_ZERO {
                    ev.negative += 1;
                } else {
                    ev.zero += 1;
                }
            }
        }
        let tag = if ev.min_dt_f > TOL_ZERO {
            ExpansionTag::Expanding
        } else if ev.max_dt_f < -TOL_ZERO {
            ExpansionTag::Contracting
        } else {
            self.transition_time(&ts, &samples)
                .map(|t0| ExpansionTag::Transition { t0 })
                .unwrap_or(ExpansionTag::Mixed)
        };
        Ok(ExpansionClass { tag, evidence: ev })
    }

    /// Common root of `∂_t f` when every node shows a single `+ → −` change.
    fn transition_time(&self, ts: &[f64], samples: &[Vec<f64>]) -> Option<f64> {
        let mut roots = Vec::with_capacity(samples.len());
        for (idx, row) in samples.iter().enumerate() {
            let last_pos = row.iter().rposition(|&v| v > TOL_ZERO)?;
            let first_neg = row.iter().position(|&v| v < -TOL_ZERO)?;
            if first_neg <= last_pos {
                return None;
            }
            let (mut lo, mut hi) = (ts[last_pos], ts[first_neg]);
            while hi - lo > BISECTION_TOL {
                let mid = 0.5 * (lo + hi);
                if self.jet_at(mid, idx).ft > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            roots.push(0.5 * (lo + hi));
        }
        let lo = roots.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = roots.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if hi - lo > 10.0 * BISECTION_TOL {
            return None;
        }
        Some(roots[0])
    }

    /// `max |∇^F f|_{g_F} / f` over the interior time lattice and all nodes.
    pub fn warped_defect(&self, t_samples: usize) -> f64 {
        let mut worst: f64 = 0.0;
        let n = self.dim();
        for t in self.time_lattice(t_samples) {
            for idx in 0..self.fiber.len() {
                let j = self.jet_at(t, idx);
                let g = self.fiber.metric_at(idx);
                let q: f64 = (0..n).map(|i| j.fx[i] * j.fx[i] / g[i]).sum();
                worst = worst.max(q.sqrt() / j.f);
            }
        }
        worst
    }

    pub fn is_grw(&self) -> bool {
        self.warped_defect(32) <= GRW_TOL
    }

    /// `ω(V) = Σ_i ∂_i log f(t, ·) V^i`.
    pub fn torqued_one_form(&self, t: f64, v: &VectorField) -> Result<ScalarField> {
        self.check_time(t)?;
        if v.len() != self.fiber.len() {
            return Err(Error::Config(
                "vector field does not match the fiber".into(),
            ));
        }
        let n = self.dim();
        Ok(ScalarField(
            (0..self.fiber.len())
                .map(|idx| {
                    let j = self.jet_at(t, idx);
                    (0..n).map(|i| j.dx_log(i) * v.data[idx][i]).sum()
                })
                .collect(),
        ))
    }

    /// Mean curvature `∂_t log f(t₀, ·)` of the slice `{t = t₀}`.
    pub fn slice_mean_curvature(&self, t0: f64) -> Result<ScalarField> {
        self.check_time(t0)?;
        Ok(ScalarField(
            (0..self.fiber.len())
                .map(|idx| self.jet_at(t0, idx).dt_log())
                .collect(),
        ))
    }

    /// Umbilic factor `λ = −∂_t log f(t₀, ·)`; the slice shape operator is `λ·Id`.
    pub fn slice_umbilicity(&self, t0: f64) -> Result<ScalarField> {
        Ok(self.slice_mean_curvature(t0)?.map(|h| -h))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cos_term(k: i32) -> Vec<TrigTerm> {
        vec![TrigTerm {
            coeff: 1.0,
            wave: vec![k],
            phase: 0.0,
        }]
    }

    fn model_1d(twist: TwistedFunction, interval: (f64, f64)) -> SpacetimeModel {
        SpacetimeModel::new(interval, FiberGrid::flat(1, 1.0, 32).unwrap(), twist).unwrap()
    }

    #[test]
    fn sech_second_derivative() {
        let t: f64 = 0.7;
        let (_, _, d2) = TimeProfile::Sech.eval(t);
        let want = (t.cosh().powi(2) - 2.0) / t.cosh().powi(3);
        assert!((d2 - want).abs() < 1e-14);
    }

    #[test]
    fn exp_is_expanding_and_grw() {
        let m = model_1d(
            TwistedFunction::PureTime {
                g: TimeProfile::Exp { lambda: 1.0 },
            },
            (-1.0, 1.0),
        );
        assert_eq!(m.classify(16).unwrap().tag, ExpansionTag::Expanding);
        assert!(m.is_grw());
        let h = m.slice_mean_curvature(0.3).unwrap();
        assert!(h.iter().all(|&v| (v - 1.0).abs() < 1e-15));
    }

    #[test]
    fn gaussian_separable_is_transition_at_zero() {
        let m = model_1d(
            TwistedFunction::Separable {
                g: TimeProfile::Gauss,
                epsilon: 0.1,
                s: cos_term(1),
            },
            (-2.0, 2.0),
        );
        match m.classify(16).unwrap().tag {
            ExpansionTag::Transition { t0 } => assert!(t0.abs() <= 1e-10),
            other => panic!("expected transition, got {other:?}"),
        }
        assert!(!m.is_grw());
        assert!(m.slice_mean_curvature(0.0).unwrap().max_abs() == 0.0);
    }

    #[test]
    fn endpoints_are_outside_the_domain() {
        let m = model_1d(
            TwistedFunction::PureTime {
                g: TimeProfile::Cosh,
            },
            (-1.0, 1.0),
        );
        assert!(matches!(
            m.slice_mean_curvature(1.0),
            Err(Error::Domain { .. })
        ));
        assert!(m.slice_umbilicity(-1.0).is_err());
        assert!(m.slice_mean_curvature(0.999).is_ok());
    }

    #[test]
    fn traveling_needs_commensurate_period() {
        let fiber = FiberGrid::flat(1, 1.0, 16).unwrap();
        let bad = TwistedFunction::Traveling {
            amplitude: 0.5,
            period: 0.3,
        };
        assert!(SpacetimeModel::new((-1.0, 1.0), fiber.clone(), bad).is_err());
        let good = TwistedFunction::Traveling {
            amplitude: 0.5,
            period: 0.5,
        };
        assert!(SpacetimeModel::new((-1.0, 1.0), fiber, good).is_ok());
    }

    #[test]
    fn non_positive_twist_is_rejected() {
        let fiber = FiberGrid::flat(1, 1.0, 16).unwrap();
        let twist = TwistedFunction::Separable {
            g: TimeProfile::Cosh,
            epsilon: 1.5,
            s: cos_term(1),
        };
        assert!(SpacetimeModel::new((-1.0, 1.0), fiber, twist).is_err());
    }

    #[test]
    fn too_few_time_samples() {
        let m = model_1d(
            TwistedFunction::PureTime {
                g: TimeProfile::Cosh,
            },
            (-1.0, 1.0),
        );
        assert!(m.classify(15).is_err());
    }

    #[test]
    fn twist_config_round_trips_through_json() {
        let twist = TwistedFunction::Additive {
            g: TimeProfile::Cosh,
            q: TimeProfile::Linear { a: 1.0, b: 0.5 },
            epsilon: 0.2,
            s: cos_term(2),
        };
        let text = serde_json::to_string(&twist).unwrap();
        assert!(text.contains("\"family\":\"additive\""));
        let back: TwistedFunction = serde_json::from_str(&text).unwrap();
        assert_eq!(back, twist);
    }
}
