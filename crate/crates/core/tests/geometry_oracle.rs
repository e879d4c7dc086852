use std::f64::consts::PI;

use nalgebra::DMatrix;
use twistbench::corpus::corpus;
use twistbench::twisted_spacetime::ExpansionTag;
use twistbench::{
    Error, FiberGrid, GraphField, MetricCoeff, ScalarField, SpacetimeModel, TimeProfile, TrigTerm,
    TwistedFunction,
};

fn curved_model(m: usize) -> SpacetimeModel {
    let fiber = FiberGrid::new(
        2,
        vec![1.0, 2.0],
        vec![m, m],
        vec![
            MetricCoeff::Cosine {
                amplitude: 0.25,
                axis: 1,
                wave: 1,
            },
            MetricCoeff::Flat,
        ],
    )
    .unwrap();
    SpacetimeModel::new(
        (-1.5, 1.5),
        fiber,
        TwistedFunction::Additive {
            g: TimeProfile::Cosh,
            q: TimeProfile::Gauss,
            epsilon: 0.2,
            s: vec![TrigTerm {
                coeff: 1.0,
                wave: vec![1, 1],
                phase: 0.7,
            }],
        },
    )
    .unwrap()
}

fn wavy(model: &SpacetimeModel) -> ScalarField {
    model
        .fiber()
        .sample(|x| 0.1 + 0.03 * (2.0 * PI * x[0]).sin() * (PI * x[1]).cos())
}

/// Node-local assembly with nalgebra: `g_u = f² G − du duᵀ`, inverse and
/// determinant, then `(det)^{-1/2} Σ_i D_i(√det g^{ij} D_j u)` with its own
/// periodic index arithmetic.
fn nalgebra_laplacian(model: &SpacetimeModel, u: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let grid = model.fiber();
    let n = grid.dim();
    let res = grid.resolution().to_vec();
    let h = grid.spacing().to_vec();
    let shift = |idx: usize, axis: usize, step: isize| -> usize {
        let mut multi = grid.multi_index(idx);
        let m = res[axis] as isize;
        multi[axis] = ((multi[axis] as isize + step).rem_euclid(m)) as usize;
        grid.flat_index(&multi)
    };
    let d = |phi: &[f64], axis: usize, idx: usize| {
        (phi[shift(idx, axis, 1)] - phi[shift(idx, axis, -1)]) / (2.0 * h[axis])
    };
    let mut sqrt_det = vec![0.0; grid.len()];
    let mut flux = vec![vec![0.0; grid.len()]; n];
    let mut dets = vec![0.0; grid.len()];
    for i in 0..grid.len() {
        let x = grid.coords(i);
        let f = model.jet(u[i], &x[..n]).f;
        let du: Vec<f64> = (0..n).map(|a| d(u, a, i)).collect();
        let g = DMatrix::from_fn(n, n, |a, b| {
            let metric = grid.metric()[a].eval(&x[..n], grid.periods());
            let base = if a == b { f * f * metric } else { 0.0 };
            base - du[a] * du[b]
        });
        let det = g.determinant();
        let inv = g.try_inverse().unwrap();
        dets[i] = det;
        sqrt_det[i] = det.sqrt();
        for a in 0..n {
            flux[a][i] = sqrt_det[i] * (0..n).map(|b| inv[(a, b)] * du[b]).sum::<f64>();
        }
    }
    let lap = (0..grid.len())
        .map(|i| (0..n).map(|a| d(&flux[a], a, i)).sum::<f64>() / sqrt_det[i])
        .collect();
    (lap, dets)
}

#[test]
fn coordinate_laplacian_matches_independent_assembly() {
    let model = curved_model(24);
    let u = wavy(&model);
    let graph = GraphField::new(&model, u.clone()).unwrap();
    let (lap, dets) = nalgebra_laplacian(&model, &u);
    let ours = graph.laplacian_tau_oracle().unwrap();
    let metric = graph.induced_metric().unwrap();
    for i in 0..u.len() {
        assert!(
            (ours[i] - lap[i]).abs() <= 1e-10 * (1.0 + lap[i].abs()),
            "node {i}"
        );
        assert!((metric.det_direct[i] - dets[i]).abs() <= 1e-12 * dets[i]);
        assert!((metric.det_formula[i] - dets[i]).abs() <= 1e-10 * dets[i]);
    }
}

/// Minkowski line `f ≡ 1`, `u = a sin 2πx`:
/// `Δτ = (1 − u'²)^{-1/2} (u' (1 − u'²)^{-1/2})'` in closed form.
fn minkowski_closed_form(a: f64, x: f64) -> f64 {
    let k = 2.0 * PI;
    let up = a * k * (k * x).cos();
    let upp = -a * k * k * (k * x).sin();
    let s = 1.0 - up * up;
    upp / (s * s)
}

#[test]
fn time_laplacian_converges_to_closed_form() {
    let a = 0.05;
    let errors: Vec<f64> = [32, 64, 128]
        .iter()
        .map(|&m| {
            let model = SpacetimeModel::new(
                (-1.0, 1.0),
                FiberGrid::flat(1, 1.0, m).unwrap(),
                TwistedFunction::PureTime {
                    g: TimeProfile::Constant { c: 1.0 },
                },
            )
            .unwrap();
            let u = model.fiber().sample(|x| a * (2.0 * PI * x[0]).sin());
            let g = GraphField::new(&model, u).unwrap();
            let fiber_path = g.laplacian_tau_fiber().unwrap();
            let oracle = g.laplacian_tau_oracle().unwrap();
            (0..m)
                .map(|i| {
                    let exact = minkowski_closed_form(a, model.fiber().coords(i)[0]);
                    (fiber_path[i] - exact).abs().max((oracle[i] - exact).abs())
                })
                .fold(0.0, f64::max)
        })
        .collect();
    for w in errors.windows(2) {
        assert!((w[0] / w[1]).log2() >= 1.9, "{errors:?}");
    }
}

#[test]
fn two_mean_curvature_forms_agree_to_second_order() {
    let members = corpus(2, 3, 42).unwrap();
    for member in &members {
        let d: Vec<f64> = [32, 64, 128]
            .iter()
            .map(|&m| {
                let model = member.model(m).unwrap();
                let g = GraphField::new(&model, member.graph.sample(model.fiber())).unwrap();
                let a = g.mean_curvature().unwrap();
                let b = g.mean_curvature_divergence_form().unwrap();
                a.sub(&b).max_abs()
            })
            .collect();
        assert!((d[1] / d[2]).log2() >= 1.9, "{d:?}");
    }
}

#[test]
fn induced_metric_on_slices_and_lines() {
    let model = curved_model(16);
    let g = GraphField::slice(&model, 0.4).unwrap();
    let metric = g.induced_metric().unwrap();
    let grid = model.fiber();
    for i in 0..grid.len() {
        let f = model.jet_at(0.4, i).f;
        let expected = f.powi(4) * grid.sqrt_det()[i].powi(2);
        assert!((metric.det_direct[i] - expected).abs() < 1e-12 * expected);
    }
    let line = SpacetimeModel::new(
        (-1.0, 1.0),
        FiberGrid::flat(1, 1.0, 64).unwrap(),
        TwistedFunction::PureTime {
            g: TimeProfile::Constant { c: 1.0 },
        },
    )
    .unwrap();
    let u = line.fiber().sample(|x| 0.1 * (2.0 * PI * x[0]).cos());
    let g = GraphField::new(&line, u.clone()).unwrap();
    let metric = g.induced_metric().unwrap();
    let du = line.fiber().partial(&u, 0);
    for (det, d) in metric.det_direct.iter().zip(du.iter()) {
        assert!((det - (1.0 - d * d)).abs() < 1e-15);
    }
}

#[test]
fn non_spacelike_graph_names_worst_node() {
    let model = SpacetimeModel::new(
        (-1.0, 1.0),
        FiberGrid::flat(2, 1.0, 16).unwrap(),
        TwistedFunction::PureTime {
            g: TimeProfile::Cosh,
        },
    )
    .unwrap();
    let u = model.fiber().sample(|x| 0.4 * (2.0 * PI * x[0]).sin());
    let g = GraphField::new(&model, u).unwrap();
    let report = g.spacelike_check();
    assert!(!report.spacelike);
    match g.mean_curvature() {
        Err(Error::NotSpacelike {
            node,
            coords,
            margin,
        }) => {
            assert_eq!(margin, report.max_margin);
            assert_eq!(node, model.fiber().multi_index(report.worst_node));
            assert_eq!(coords.len(), 2);
            // steepest at x = 0 (row 0)
            assert_eq!(node[0], 0);
        }
        other => panic!("expected a spacelike error, got {other:?}"),
    }
}

#[test]
fn expansion_classes() {
    let fiber = FiberGrid::flat(1, 1.0, 16).unwrap();
    let exp = SpacetimeModel::new(
        (-1.0, 1.0),
        fiber.clone(),
        TwistedFunction::PureTime {
            g: TimeProfile::Exp { lambda: 1.0 },
        },
    )
    .unwrap();
    assert_eq!(exp.classify(64).unwrap().tag, ExpansionTag::Expanding);
    let transition = SpacetimeModel::new(
        (-2.0, 2.0),
        fiber,
        TwistedFunction::Separable {
            g: TimeProfile::Gauss,
            epsilon: 0.1,
            s: vec![TrigTerm {
                coeff: 1.0,
                wave: vec![1],
                phase: 0.0,
            }],
        },
    )
    .unwrap();
    match transition.classify(64).unwrap().tag {
        ExpansionTag::Transition { t0 } => assert!(t0.abs() <= 1e-10),
        other => panic!("{other:?}"),
    }
    let circle = FiberGrid::flat(1, 2.0 * PI, 32).unwrap();
    let mixed = SpacetimeModel::new(
        (-1.0, 1.0),
        circle,
        TwistedFunction::Traveling {
            amplitude: 0.5,
            period: 2.0 * PI,
        },
    )
    .unwrap();
    assert_eq!(mixed.classify(64).unwrap().tag, ExpansionTag::Mixed);
    assert!(!mixed.is_grw());
    // the tag is stable under refinement of the time lattice
    for samples in [64, 128, 256] {
        assert_eq!(mixed.classify(samples).unwrap().tag, ExpansionTag::Mixed);
        assert_eq!(exp.classify(samples).unwrap().tag, ExpansionTag::Expanding);
    }
}

#[test]
fn traveling_slice_mean_curvature_closed_form() {
    let (a, period) = (0.4, 0.5);
    let model = SpacetimeModel::new(
        (-1.0, 1.0),
        FiberGrid::flat(1, 1.0, 64).unwrap(),
        TwistedFunction::Traveling {
            amplitude: a,
            period,
        },
    )
    .unwrap();
    let h = model.slice_mean_curvature(0.0).unwrap();
    let lambda = model.slice_umbilicity(0.0).unwrap();
    for i in 0..64 {
        let x = model.fiber().coords(i)[0];
        let th = 2.0 * PI * x / period;
        let closed = a * (2.0 * PI / period) * th.cos() / (1.0 + a * th.sin());
        assert!((h[i] - closed).abs() < 1e-12);
        assert!((lambda[i] + closed).abs() < 1e-12);
    }
    assert!(model.slice_mean_curvature(1.0).is_err());
}
