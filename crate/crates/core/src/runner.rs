//! Task drivers behind the command-line tool.
//!
//! Exit codes: 0 success, 1 configuration error, 2 constraint error
//! (non-spacelike graph, time outside the interval, failed precondition),
//! 3 non-existence certificate, 4 solve not converged or a verification
//! target missed.

use std::path::PathBuf;

use serde::Serialize;

use crate::cmc_solver::{random_trig_terms, rigidity_report, solve, SolveOutcome, Target};
use crate::config::{ExperimentConfig, Source, Task};
use crate::corpus::{corpus, TrigProfile};
use crate::error::{Error, Result};
use crate::graph_geometry::{GeometrySummary, GraphField, Prop7Report, SpacelikeReport};
use crate::output::{cell, Writer};
use crate::twisted_spacetime::{ExpansionClass, SpacetimeModel};
use crate::verification::{
    refinement_study, run_suite, Case, ConvergenceReport, Subject, SuiteReport,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_CONSTRAINT: i32 = 2;
pub const EXIT_NONEXISTENCE: i32 = 3;
pub const EXIT_UNMET: i32 = 4;

/// Name of the environment variable that caps worker threads (0 = auto).
pub const THREADS_ENV: &str = "TWISTBENCH_THREADS";

/// Exit code for an error raised before or during a task.
pub fn exit_code_for(err: &Error) -> i32 {
    match err {
        Error::Config(_) | Error::Json(_) | Error::Io(_) => EXIT_CONFIG,
        Error::Domain { .. } | Error::NotSpacelike { .. } | Error::Precondition(_) => {
            EXIT_CONSTRAINT
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub exit_code: i32,
    pub message: String,
    pub files: Vec<PathBuf>,
}

/// Configures the global thread pool from `TWISTBENCH_THREADS`.
pub fn init_threads() -> Result<()> {
    let threads = match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .map_err(|_| Error::Config(format!("{THREADS_ENV}={v:?} is not a thread count")))?,
        Err(_) => 0,
    };
    // a second initialization in the same process keeps the first pool
    let _ = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global();
    Ok(())
}

pub fn run(cfg: &ExperimentConfig) -> Result<RunOutcome> {
    cfg.validate()?;
    let mut writer = Writer::new(&cfg.output)?;
    let (exit_code, message) = match cfg.task {
        Task::Geometry => run_geometry(cfg, &mut writer)?,
        Task::Solve => run_solve(cfg, &mut writer)?,
        Task::Verify => run_verify(cfg, &mut writer)?,
        Task::Convergence => run_convergence(cfg, &mut writer)?,
    };
    writer.metadata(cfg.task.name(), cfg.seed, exit_code)?;
    Ok(RunOutcome {
        exit_code,
        message,
        files: writer.into_files(),
    })
}

fn initial_graph(
    cfg: &ExperimentConfig,
    model: &SpacetimeModel,
) -> Result<crate::fiber_grid::ScalarField> {
    cfg.initializer
        .as_ref()
        .ok_or_else(|| Error::Config("missing initializer".into()))?
        .realize(model, cfg.seed)
}

#[derive(Serialize)]
struct GeometryDocument<'a> {
    config: &'a ExperimentConfig,
    classification: ExpansionClass,
    warped: bool,
    spacelike: SpacelikeReport,
    summary: GeometrySummary,
    obstruction_max: f64,
    slice_rigidity: Prop7Report,
    ill_conditioned_nodes: Vec<Vec<usize>>,
}

pub fn run_geometry(cfg: &ExperimentConfig, out: &mut Writer) -> Result<(i32, String)> {
    let model = cfg.spacetime.build()?;
    let u = initial_graph(cfg, &model)?;
    let graph = GraphField::new(&model, u)?;
    let spacelike = graph.spacelike_check();
    let report = graph.report()?;
    let grid = model.fiber();
    let summary = report.summary();
    let doc = GeometryDocument {
        config: cfg,
        classification: model.classify(64)?,
        warped: model.is_grw(),
        spacelike,
        obstruction_max: report.obstruction_norm.max_abs(),
        slice_rigidity: graph.prop7_condition(1e-12)?,
        ill_conditioned_nodes: report
            .ill_conditioned
            .iter()
            .map(|&i| grid.multi_index(i))
            .collect(),
        summary: summary.clone(),
    };
    out.json("geometry.json", &doc)?;
    out.fields("geometry", grid, &report.columns())?;
    out.binary("u", &report.u)?;
    Ok((
        EXIT_OK,
        format!(
            "geometry: H in [{:.6e}, {:.6e}], max margin {:.4}, obstruction {:.3e}",
            summary.mean_curvature.min,
            summary.mean_curvature.max,
            summary.margin.max,
            doc.obstruction_max
        ),
    ))
}

#[derive(Serialize)]
struct SolveDocument<'a> {
    config: &'a ExperimentConfig,
    outcome: &'a SolveOutcome,
    #[serde(skip_serializing_if = "Option::is_none")]
    rigidity: Option<crate::cmc_solver::RigidityReport>,
}

pub fn run_solve(cfg: &ExperimentConfig, out: &mut Writer) -> Result<(i32, String)> {
    let model = cfg.spacetime.build()?;
    let u0 = initial_graph(cfg, &model)?;
    let result = solve(&model, &cfg.solve, &u0)?;
    let rigidity = match (&result.outcome, cfg.solve.target) {
        (SolveOutcome::Converged { .. }, Target::Constant { h0: 0.0 }) => {
            Some(rigidity_report(&model, &result, cfg.solve.target)?)
        }
        _ => None,
    };
    out.json_lines("iterations.jsonl", &result.log)?;
    out.json(
        "outcome.json",
        &SolveDocument {
            config: cfg,
            outcome: &result.outcome,
            rigidity,
        },
    )?;
    let field = match &result.outcome {
        SolveOutcome::Converged { u, .. } => Some(u),
        SolveOutcome::NotConverged { best_u, .. } => Some(best_u),
        SolveOutcome::NonExistenceCertificate(_) => None,
    };
    if let Some(u) = field {
        out.fields("solution", model.fiber(), &[("u", &u[..])])?;
        out.binary("solution", u)?;
    }
    let (code, detail) = match &result.outcome {
        SolveOutcome::Converged {
            residual,
            iterations,
            ..
        } => (
            EXIT_OK,
            format!("residual {residual:.3e} after {iterations} iterations"),
        ),
        SolveOutcome::NonExistenceCertificate(c) => (
            EXIT_NONEXISTENCE,
            serde_json::to_string(c).unwrap_or_default(),
        ),
        SolveOutcome::NotConverged {
            best_residual,
            diagnostics,
            ..
        } => (
            EXIT_UNMET,
            format!("best residual {best_residual:.3e}: {diagnostics}"),
        ),
    };
    Ok((code, format!("solve: {} ({detail})", result.outcome.tag())))
}

fn config_case(
    cfg: &ExperimentConfig,
    resolution: Option<usize>,
    conformal: &crate::conformal_lab::ConformalFactor,
) -> Result<Case> {
    let base = cfg.spacetime.build()?;
    let model = match resolution {
        Some(m) => base.with_fiber(base.fiber().with_resolution(vec![m; base.dim()])?)?,
        None => base,
    };
    let u = initial_graph(cfg, &model)?;
    let probe = TrigProfile {
        base: 0.0,
        terms: random_trig_terms(model.dim(), 2, 1, cfg.seed ^ 0x5eed),
    }
    .sample(model.fiber());
    let warped = model.is_grw();
    Ok(Case {
        model,
        u,
        probe,
        subject: Subject {
            label: "config".into(),
            conformal: conformal.clone(),
            warped,
            seed: cfg.seed,
        },
    })
}

#[derive(Serialize)]
struct VerifyDocument<'a> {
    config: &'a ExperimentConfig,
    report: &'a SuiteReport,
}

pub fn run_verify(cfg: &ExperimentConfig, out: &mut Writer) -> Result<(i32, String)> {
    let v = &cfg.verify;
    let cases = match v.source {
        Source::Corpus => {
            let fiber = &cfg.spacetime.fiber;
            corpus(fiber.dim, v.corpus_size, cfg.seed)?
                .iter()
                .map(|m| Case::from_member(m, fiber.resolution[0], cfg.seed))
                .collect::<Result<Vec<_>>>()?
        }
        Source::Config => vec![config_case(cfg, None, &v.conformal)?],
    };
    let report = run_suite(&cases, &v.identities, v.fault)?;
    out.json(
        "verify.json",
        &VerifyDocument {
            config: cfg,
            report: &report,
        },
    )?;
    let rows: Vec<Vec<String>> = report
        .rows
        .iter()
        .map(|r| {
            vec![
                r.identity.name().to_string(),
                cell(r.max_defect),
                cell(r.mean_defect),
                cell(r.threshold),
                r.subjects.to_string(),
                r.pass.to_string(),
            ]
        })
        .collect();
    out.table(
        "verify",
        &[
            "identity",
            "max_defect",
            "mean_defect",
            "threshold",
            "subjects",
            "pass",
        ],
        &rows,
    )?;
    let failures = report.failures();
    if failures.is_empty() {
        Ok((
            EXIT_OK,
            format!("verify: {} identities pass", report.rows.len()),
        ))
    } else {
        Ok((
            EXIT_UNMET,
            format!("verify: failed {}", failures.join(", ")),
        ))
    }
}

#[derive(Serialize)]
struct ConvergenceDocument<'a> {
    config: &'a ExperimentConfig,
    report: &'a ConvergenceReport,
}

pub fn run_convergence(cfg: &ExperimentConfig, out: &mut Writer) -> Result<(i32, String)> {
    let c = &cfg.convergence;
    let levels = cfg.levels();
    let report = match c.source {
        Source::Corpus => {
            let members = corpus(cfg.spacetime.fiber.dim, c.corpus_size, cfg.seed)?;
            let builders: Vec<_> = members
                .iter()
                .map(|member| move |m: usize| Case::from_member(member, m, cfg.seed))
                .collect();
            refinement_study(&builders, &c.quantities, &levels)?
        }
        Source::Config => {
            let build = |m: usize| config_case(cfg, Some(m), &c.conformal);
            refinement_study(&[build], &c.quantities, &levels)?
        }
    };
    out.json(
        "convergence.json",
        &ConvergenceDocument {
            config: cfg,
            report: &report,
        },
    )?;
    let mut header: Vec<String> = vec!["identity".into(), "subject".into()];
    header.extend(levels.iter().map(|m| format!("defect_{m}")));
    header.extend(
        levels
            .windows(2)
            .map(|w| format!("order_{}_{}", w[0], w[1])),
    );
    header.push("pass".into());
    let rows: Vec<Vec<String>> = report
        .rows
        .iter()
        .map(|r| {
            let mut row = vec![r.identity.name().to_string(), r.subject.clone()];
            row.extend(r.defects.iter().map(|&d| cell(d)));
            row.extend(r.orders.iter().map(|&o| cell(o)));
            row.push(r.pass.to_string());
            row
        })
        .collect();
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    out.table("convergence", &header, &rows)?;
    let order = report
        .min_asymptotic_order
        .map_or("n/a".to_string(), |o| format!("{o:.3}"));
    let code = if report.pass { EXIT_OK } else { EXIT_UNMET };
    let failed = report.rows.iter().filter(|r| !r.pass).count();
    Ok((
        code,
        format!(
            "convergence: {} rows, min order {order}, {failed} failing",
            report.rows.len()
        ),
    ))
}
