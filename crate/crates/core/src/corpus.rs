//! Seeded corpus of smooth spacelike graphs in assorted twisted products.
//!
//! Members are resolution independent: the spacetime and graph are closed
//! forms that can be sampled on any fiber grid, which is what refinement
//! studies need.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::conformal_lab::ConformalFactor;
use crate::error::{Error, Result};
use crate::fiber_grid::{FiberGrid, MetricCoeff, ScalarField};
use crate::twisted_spacetime::{trig_eval, SpacetimeModel, TimeProfile, TrigTerm, TwistedFunction};

pub const CORPUS_INTERVAL: (f64, f64) = (-1.5, 1.5);
const REFERENCE_NODES: [usize; 3] = [256, 64, 32];

/// `u(x) = base + Σ c_k cos(2π k·x/L + φ_k)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrigProfile {
    pub base: f64,
    pub terms: Vec<TrigTerm>,
}

impl TrigProfile {
    pub fn sample(&self, grid: &FiberGrid) -> ScalarField {
        grid.sample(|x| self.base + trig_eval(&self.terms, x, grid.periods()).0)
    }

    fn scaled(&self, s: f64) -> TrigProfile {
        TrigProfile {
            base: self.base,
            terms: self
                .terms
                .iter()
                .map(|t| TrigTerm {
                    coeff: t.coeff * s,
                    ..t.clone()
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CorpusMember {
    pub index: usize,
    pub label: String,
    pub interval: (f64, f64),
    pub periods: Vec<f64>,
    pub metric: Vec<MetricCoeff>,
    pub twist: TwistedFunction,
    pub graph: TrigProfile,
    /// Test function for Laplacian identities.
    pub probe: TrigProfile,
    pub conformal: ConformalFactor,
    /// Largest `|∇^F u| / f` of the exact profile on the reference lattice.
    pub margin: f64,
}

impl CorpusMember {
    pub fn dim(&self) -> usize {
        self.periods.len()
    }

    pub fn fiber(&self, m: usize) -> Result<FiberGrid> {
        FiberGrid::new(
            self.dim(),
            self.periods.clone(),
            vec![m; self.dim()],
            self.metric.clone(),
        )
    }

    pub fn model(&self, m: usize) -> Result<SpacetimeModel> {
        SpacetimeModel::new(self.interval, self.fiber(m)?, self.twist.clone())
    }

    pub fn is_grw(&self) -> bool {
        self.twist.is_structurally_warped()
    }

    pub fn is_separable(&self) -> bool {
        matches!(self.twist, TwistedFunction::Separable { .. })
    }
}

fn random_terms(rng: &mut ChaCha8Rng, dim: usize, count: usize, max_wave: i32) -> Vec<TrigTerm> {
    (0..count)
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
                coeff: rng.gen_range(0.3..1.0) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 },
                wave,
                phase: rng.gen_range(0.0..std::f64::consts::TAU),
            }
        })
        .collect()
}

/// Terms rescaled so the sum of absolute coefficients is `bound`.
fn bounded(mut terms: Vec<TrigTerm>, bound: f64) -> Vec<TrigTerm> {
    let total: f64 = terms.iter().map(|t| t.coeff.abs()).sum();
    for t in terms.iter_mut() {
        t.coeff *= bound / total;
    }
    terms
}

fn twist_for(kind: usize, dim: usize, rng: &mut ChaCha8Rng) -> (String, TwistedFunction) {
    let epsilon = rng.gen_range(0.05..0.1);
    let s = bounded(random_terms(rng, dim, 2, 1), 1.0);
    match kind % 5 {
        0 => (
            "separable-exp".into(),
            TwistedFunction::Separable {
                g: TimeProfile::Exp {
                    lambda: rng.gen_range(0.3..0.6),
                },
                epsilon,
                s,
            },
        ),
        1 => (
            "additive-cosh-gauss".into(),
            TwistedFunction::Additive {
                g: TimeProfile::Cosh,
                q: TimeProfile::Gauss,
                epsilon,
                s,
            },
        ),
        2 => (
            "pure-time-cosh".into(),
            TwistedFunction::PureTime {
                g: TimeProfile::Cosh,
            },
        ),
        3 => (
            "separable-gauss".into(),
            TwistedFunction::Separable {
                g: TimeProfile::Gauss,
                epsilon,
                s,
            },
        ),
        _ if dim == 1 => (
            "traveling".into(),
            TwistedFunction::Traveling {
                amplitude: rng.gen_range(0.15..0.3),
                period: 1.0,
            },
        ),
        _ => (
            "separable-sech".into(),
            TwistedFunction::Separable {
                g: TimeProfile::Sech,
                epsilon,
                s,
            },
        ),
    }
}

fn max_margin(model: &SpacetimeModel, profile: &TrigProfile) -> f64 {
    let grid = model.fiber();
    let n = grid.dim();
    let mut worst: f64 = 0.0;
    for idx in 0..grid.len() {
        let x = grid.coords(idx);
        let (v, d) = trig_eval(&profile.terms, &x[..n], grid.periods());
        let t = profile.base + v;
        let g = grid.metric_at(idx);
        let q: f64 = (0..n).map(|a| d[a] * d[a] / g[a]).sum();
        worst = worst.max(q.sqrt() / model.jet(t, &x[..n]).f);
    }
    worst
}

/// `size` members on an `dim`-dimensional unit torus, reproducible from `seed`.
pub fn corpus(dim: usize, size: usize, seed: u64) -> Result<Vec<CorpusMember>> {
    if !(1..=3).contains(&dim) {
        return Err(Error::Config(format!(
            "corpus dimension {dim} not in 1..=3"
        )));
    }
    let mut rng =
        ChaCha8Rng::seed_from_u64(seed ^ (dim as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    let mut members = Vec::with_capacity(size);
    for index in 0..size {
        let (label, twist) = twist_for(index, dim, &mut rng);
        let metric = if index % 2 == 1 {
            let mut m = vec![MetricCoeff::Flat; dim];
            m[0] = MetricCoeff::Cosine {
                amplitude: 0.2,
                axis: 0,
                wave: 1,
            };
            m
        } else {
            vec![MetricCoeff::Flat; dim]
        };
        let raw = TrigProfile {
            base: rng.gen_range(-0.3..0.3),
            terms: random_terms(&mut rng, dim, 3, 1),
        };
        let target = rng.gen_range(0.15..0.25);
        let probe = TrigProfile {
            base: 0.0,
            terms: bounded(random_terms(&mut rng, dim, 2, 1), 1.0),
        };
        let conformal = match index % 4 {
            0 => ConformalFactor::FiberTrig {
                terms: bounded(random_terms(&mut rng, dim, 2, 1), 0.3),
            },
            1 => ConformalFactor::StaticPicture,
            2 => ConformalFactor::ScaledStatic { p: 0.5 },
            _ => ConformalFactor::ScaledStatic { p: 2.0 },
        };
        let periods = vec![1.0; dim];
        let fiber = FiberGrid::new(
            dim,
            periods.clone(),
            vec![REFERENCE_NODES[dim - 1]; dim],
            metric.clone(),
        )?;
        let model = SpacetimeModel::new(CORPUS_INTERVAL, fiber, twist.clone())?;
        let mut graph = raw;
        for _ in 0..4 {
            let mu = max_margin(&model, &graph);
            graph = graph.scaled(target / mu);
        }
        let margin = max_margin(&model, &graph);
        members.push(CorpusMember {
            index,
            label,
            interval: CORPUS_INTERVAL,
            periods,
            metric,
            twist,
            graph,
            probe,
            conformal,
            margin,
        });
    }
    Ok(members)
}
