use std::f64::consts::PI;

use twistbench::cmc_solver::{solve, Initializer, SolveConfig, SolveOutcome, Target};
use twistbench::conformal_lab::{
    conformal_laplacian_check, lemma4_check, static_laplacian_check, transform_mean_curvature,
    ConformalFactor, MAXIMAL_TOL,
};
use twistbench::{
    Error, FiberGrid, GraphField, SpacetimeModel, TimeProfile, TrigTerm, TwistedFunction,
};

fn model(dim: usize, m: usize) -> SpacetimeModel {
    SpacetimeModel::new(
        (-1.5, 1.5),
        FiberGrid::flat(dim, 1.0, m).unwrap(),
        TwistedFunction::Separable {
            g: TimeProfile::Cosh,
            epsilon: 0.1,
            s: vec![TrigTerm {
                coeff: 1.0,
                wave: vec![1; dim],
                phase: 0.3,
            }],
        },
    )
    .unwrap()
}

fn bump(model: &SpacetimeModel) -> twistbench::ScalarField {
    model
        .fiber()
        .sample(|x| 0.2 + 0.02 * x.iter().map(|v| (2.0 * PI * v).sin()).product::<f64>())
}

fn orders(d: &[f64]) -> Vec<f64> {
    d.windows(2).map(|w| (w[0] / w[1]).log2()).collect()
}

#[test]
fn conformal_law_is_second_order_in_three_dimensions() {
    let factor = ConformalFactor::FiberTrig {
        terms: vec![TrigTerm {
            coeff: 0.2,
            wave: vec![1, 0, 1],
            phase: 0.1,
        }],
    };
    let d: Vec<f64> = [32, 64]
        .iter()
        .map(|&m| {
            let model = model(3, m);
            let g = GraphField::new(&model, bump(&model)).unwrap();
            let h = model.fiber().sample(|x| (2.0 * PI * x[1]).cos());
            conformal_laplacian_check(&h, &factor, &g)
                .unwrap()
                .max_abs()
        })
        .collect();
    assert!(orders(&d)[0] >= 1.9, "{d:?}");
}

#[test]
fn conformal_law_is_exact_in_two_dimensions() {
    let model = model(2, 24);
    let g = GraphField::new(&model, bump(&model)).unwrap();
    let h = model.fiber().sample(|x| (2.0 * PI * x[0]).sin());
    for factor in [
        ConformalFactor::StaticPicture,
        ConformalFactor::ScaledStatic { p: 2.0 },
    ] {
        assert!(
            conformal_laplacian_check(&h, &factor, &g)
                .unwrap()
                .max_abs()
                < 1e-10
        );
    }
}

#[test]
fn static_relations_converge() {
    let d: Vec<f64> = [32, 64, 128]
        .iter()
        .map(|&m| {
            let model = model(2, m);
            let g = GraphField::new(&model, bump(&model)).unwrap();
            let s = static_laplacian_check(&g).unwrap();
            s.laplacian.max_abs().max(s.rescaled.max_abs())
        })
        .collect();
    assert!(orders(&d).iter().all(|&o| o >= 1.9), "{d:?}");
}

#[test]
fn rescaled_laplacian_on_a_static_maximal_graph() {
    let model = model(3, 12);
    let u0 = Initializer::RandomTrig {
        base: 0.2,
        amplitude: 0.03,
        modes: 2,
        max_wave: 1,
    }
    .realize(&model, 9)
    .unwrap();
    let cfg = SolveConfig {
        target: Target::Generalized,
        ..SolveConfig::default()
    };
    let SolveOutcome::Converged { u, .. } = solve(&model, &cfg, &u0).unwrap().outcome else {
        panic!("generalized solve did not converge");
    };
    // static picture: compact maximal graphs are slices
    assert!(u.max() - u.min() <= 1e-8, "{:e}", u.max() - u.min());
    let graph = GraphField::new(&model, u).unwrap();
    let h2 = transform_mean_curvature(&graph, &ConformalFactor::StaticPicture)
        .unwrap()
        .max_abs();
    assert!(h2 <= MAXIMAL_TOL, "{h2:e}");
    let d = lemma4_check(&graph, MAXIMAL_TOL).unwrap();
    assert_eq!(d.exponent, 2.0);
    for defect in [&d.direct, &d.first_rescaling, &d.second_rescaling] {
        assert!(defect.max_abs() < 1e-6, "{:e}", defect.max_abs());
    }
}

#[test]
fn rescaled_laplacian_preconditions() {
    let model3 = model(3, 8);
    let bumpy = GraphField::new(&model3, bump(&model3)).unwrap();
    assert!(matches!(
        lemma4_check(&bumpy, MAXIMAL_TOL),
        Err(Error::Precondition(_))
    ));
    let model2 = model(2, 8);
    let slice = GraphField::slice(&model2, 0.1).unwrap();
    assert!(matches!(
        lemma4_check(&slice, MAXIMAL_TOL),
        Err(Error::Precondition(_))
    ));
    let slice3 = GraphField::slice(&model3, 0.1).unwrap();
    let d = lemma4_check(&slice3, MAXIMAL_TOL).unwrap();
    assert!(d.direct.max_abs() < 1e-12);
}
