//! Mode dispatch and artifact writing.

use std::path::Path;
use std::time::Instant;

use serde_json::json;
use stefan_core::acceptance::{run_all, CriterionOutcome};
use stefan_core::coefficients::validate_assumptions;
use stefan_core::frame::reconstruct;
use stefan_core::solver::{run_ensemble, run_trajectory};
use stefan_core::{EnsembleStats, FixedFrameTrajectory, MovingFrameTrajectory, StefanSimilarity, TrajectoryStatus};

use crate::config::{ModeKind, OutputFormat, RunConfig};
use crate::error::CliError;
use crate::output::{num, Metadata, Writer};

const MOVING_FRAME_MARGIN: f64 = 0.25;

/// What a run produced.
#[derive(Debug)]
pub struct RunReport {
    pub lines: Vec<String>,
    pub files: Vec<std::path::PathBuf>,
    pub blowup: bool,
}

/// Runs the configured mode and writes its artifacts. A blow-up is an error
/// only when `mode.fail_on_blowup` is set, and then only after all files are written.
pub fn run(cfg: &RunConfig) -> Result<RunReport, CliError> {
    let start = Instant::now();
    let mut w = Writer::new(&cfg.output.dir)?;
    w.text("config.toml", &cfg.to_toml())?;
    let (lines, blowup) = match cfg.mode.kind {
        ModeKind::Single => single(cfg, &mut w, start)?,
        ModeKind::Ensemble => ensemble(cfg, &mut w, start)?,
        ModeKind::Validate => validate(cfg, &mut w, start)?,
        ModeKind::Benchmark => benchmark(Some(cfg), cfg.mode.workers, &mut w, start)?,
    };
    let report = RunReport { lines, files: w.written().to_vec(), blowup };
    if blowup && cfg.mode.fail_on_blowup {
        return Err(CliError::Blowup(report.lines.join("; ")));
    }
    Ok(report)
}

/// The acceptance suite without a config; files are written only when `out` is given.
pub fn bench(out: Option<&Path>, workers: usize) -> Result<RunReport, CliError> {
    let start = Instant::now();
    match out {
        Some(dir) => {
            let mut w = Writer::new(dir)?;
            let (lines, _) = benchmark(None, workers, &mut w, start)?;
            Ok(RunReport { lines, files: w.written().to_vec(), blowup: false })
        }
        None => {
            let outcomes = run_all(workers);
            Ok(RunReport { lines: outcomes.iter().map(|o| o.to_string()).collect(), files: Vec::new(), blowup: false })
        }
    }
}

fn status_line(status: &TrajectoryStatus, t_circ: Option<f64>) -> String {
    match status {
        TrajectoryStatus::Completed => "completed".to_string(),
        TrajectoryStatus::Blowup { t, graph_norm } => match t_circ {
            Some(tc) => format!("blow-up at t = {t} (graph norm {graph_norm:e}), boundary threshold crossed at t = {tc}"),
            None => format!("blow-up at t = {t} (graph norm {graph_norm:e})"),
        },
    }
}

fn trajectory_columns(exact: bool) -> Vec<String> {
    let mut c: Vec<String> =
        ["time", "xstar", "g1", "g2", "l2_norm", "graph_norm"].iter().map(|s| s.to_string()).collect();
    if exact {
        c.push("xstar_exact".into());
        c.push("rel_error".into());
    }
    c
}

fn trajectory_rows(traj: &FixedFrameTrajectory, ss: Option<&StefanSimilarity>) -> Vec<Vec<String>> {
    (0..traj.times.len())
        .map(|i| {
            let t = traj.times[i];
            let mut r = vec![
                num(t),
                num(traj.fronts[i]),
                num(traj.traces[i].g1),
                num(traj.traces[i].g2),
                num(traj.l2_norms[i]),
                num(traj.graph_norms[i]),
            ];
            if let Some(ss) = ss {
                let exact = ss.front(t);
                r.push(num(exact));
                r.push(num((traj.fronts[i] - exact).abs() / exact.abs()));
            }
            r
        })
        .collect()
}

fn profile_rows(traj: &FixedFrameTrajectory, second: bool) -> Vec<Vec<String>> {
    traj.states
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let step = traj.state_step(i).min(traj.times.len() - 1);
            let p = if second { &s.u2 } else { &s.u1 };
            std::iter::once(num(traj.times[step])).chain(p.values().iter().map(|&v| num(v))).collect()
        })
        .collect()
}

fn moving_rows(mf: &MovingFrameTrajectory) -> Vec<Vec<String>> {
    (0..mf.times.len())
        .map(|i| {
            [num(mf.times[i]), num(mf.fronts[i])]
                .into_iter()
                .chain(mf.profiles[i].values.iter().map(|&v| num(v)))
                .collect()
        })
        .collect()
}

fn single(cfg: &RunConfig, w: &mut Writer, start: Instant) -> Result<(Vec<String>, bool), CliError> {
    let mc = cfg.model()?;
    let kernel = cfg.kernel()?;
    let s0 = cfg.initial_state()?;
    let ss = cfg.similarity()?;
    let traj = run_trajectory(&cfg.solver_config(), &mc, &kernel, &s0)?;
    let mf = reconstruct(&traj, MOVING_FRAME_MARGIN)?;
    let meta = Metadata::for_config(cfg, start.elapsed().as_secs_f64());

    let t = traj.final_time();
    let x = traj.final_state.xstar;
    let mut summary = json!({
        "model": mc.name,
        "status": traj.status,
        "t_circ": traj.t_circ,
        "steps": traj.steps(),
        "final_time": t,
        "final_xstar": x,
    });
    let mut lines = vec![format!("{}: {}", mc.name, status_line(&traj.status, traj.t_circ))];
    lines.push(format!("x*({t}) = {x}"));
    if let Some(ss) = &ss {
        let exact = ss.front(t);
        let rel = (x - exact).abs() / exact.abs();
        summary["lambda"] = json!(ss.lambda);
        summary["final_xstar_exact"] = json!(exact);
        summary["final_rel_error"] = json!(rel);
        lines.push(format!("similarity front {exact} (lambda = {}), relative error {rel:e}", ss.lambda));
    }

    let grid = s0.grid();
    let xs: Vec<String> = grid.nodes().map(num).collect();
    let zs: Vec<String> = mf.profiles.first().map(|p| p.grid.nodes().map(num).collect()).unwrap_or_default();
    let head = |rest: &[String], first: &[&str]| -> Vec<String> {
        first.iter().map(|s| s.to_string()).chain(rest.iter().cloned()).collect()
    };
    match cfg.output.format {
        OutputFormat::Csv => {
            w.csv("trajectory.csv", &meta, &trajectory_columns(ss.is_some()), trajectory_rows(&traj, ss.as_ref()))?;
            w.csv("moving_frame.csv", &meta, &head(&zs, &["time", "xstar"]), moving_rows(&mf))?;
            if cfg.output.profiles {
                w.csv("profiles_u1.csv", &meta, &head(&xs, &["time"]), profile_rows(&traj, false))?;
                w.csv("profiles_u2.csv", &meta, &head(&xs, &["time"]), profile_rows(&traj, true))?;
            }
            w.json("summary.json", &meta, summary)?;
        }
        OutputFormat::Json => {
            let mut columns = json!({
                "time": traj.times,
                "xstar": traj.fronts,
                "g1": traj.traces.iter().map(|t| t.g1).collect::<Vec<_>>(),
                "g2": traj.traces.iter().map(|t| t.g2).collect::<Vec<_>>(),
                "l2_norm": traj.l2_norms,
                "graph_norm": traj.graph_norms,
            });
            if let Some(ss) = &ss {
                let exact: Vec<f64> = traj.times.iter().map(|&t| ss.front(t)).collect();
                let rel: Vec<f64> = exact.iter().zip(&traj.fronts).map(|(e, x)| (x - e).abs() / e.abs()).collect();
                columns["xstar_exact"] = json!(exact);
                columns["rel_error"] = json!(rel);
            }
            let mut body = json!({
                "summary": summary,
                "trajectory": columns,
                "moving_frame": {
                    "z": mf.profiles.first().map(|p| p.grid.nodes().collect::<Vec<_>>()).unwrap_or_default(),
                    "times": mf.times,
                    "fronts": mf.fronts,
                    "profiles": mf.profiles.iter().map(|p| p.values.clone()).collect::<Vec<_>>(),
                },
            });
            if cfg.output.profiles {
                body["profiles"] = json!({
                    "x": grid.nodes().collect::<Vec<_>>(),
                    "times": (0..traj.states.len()).map(|i| traj.times[traj.state_step(i).min(traj.times.len() - 1)]).collect::<Vec<_>>(),
                    "u1": traj.states.iter().map(|s| s.u1.values().to_vec()).collect::<Vec<_>>(),
                    "u2": traj.states.iter().map(|s| s.u2.values().to_vec()).collect::<Vec<_>>(),
                });
            }
            w.json("trajectory.json", &meta, body)?;
        }
    }
    Ok((lines, traj.status.is_blowup()))
}

fn ensemble_rows(stats: &EnsembleStats) -> Vec<Vec<String>> {
    (0..stats.times.len())
        .map(|i| {
            vec![
                num(stats.times[i]),
                stats.alive[i].to_string(),
                num(stats.mean_front[i]),
                num(stats.var_front[i]),
                num(stats.mean_g1[i]),
                num(stats.mean_g2[i]),
            ]
        })
        .collect()
}

fn path_rows(stats: &EnsembleStats) -> Vec<Vec<String>> {
    let opt = |v: Option<f64>| v.map(num).unwrap_or_default();
    stats
        .paths
        .iter()
        .map(|p| {
            vec![
                p.path.to_string(),
                if p.status.is_blowup() { "blowup" } else { "completed" }.to_string(),
                opt(p.status.blowup_time()),
                opt(p.t_circ),
                num(p.final_time),
                num(p.final_front),
            ]
        })
        .collect()
}

fn ensemble(cfg: &RunConfig, w: &mut Writer, start: Instant) -> Result<(Vec<String>, bool), CliError> {
    let mc = cfg.model()?;
    let kernel = cfg.kernel()?;
    let s0 = cfg.initial_state()?;
    let stats = run_ensemble(&cfg.solver_config(), &mc, &kernel, &s0, cfg.mode.n_paths, cfg.mode.workers)?;
    let meta = Metadata::for_config(cfg, start.elapsed().as_secs_f64());
    let last = stats.times.len() - 1;
    let lines = vec![
        format!("{}: {} paths, {} blow-ups (frequency {})", mc.name, stats.n_paths, stats.blowups, stats.blowup_frequency),
        format!(
            "at t = {}: {} alive, mean x* = {}, var x* = {}",
            stats.times[last], stats.alive[last], stats.mean_front[last], stats.var_front[last]
        ),
    ];
    match cfg.output.format {
        OutputFormat::Csv => {
            let cols = ["time", "alive", "mean_front", "var_front", "mean_g1", "mean_g2"].map(String::from);
            w.csv("ensemble.csv", &meta, &cols, ensemble_rows(&stats))?;
            let cols = ["path", "status", "blowup_time", "t_circ", "final_time", "final_front"].map(String::from);
            w.csv("paths.csv", &meta, &cols, path_rows(&stats))?;
            w.json(
                "ensemble_summary.json",
                &meta,
                json!({
                    "model": mc.name,
                    "n_paths": stats.n_paths,
                    "blowups": stats.blowups,
                    "blowup_frequency": stats.blowup_frequency,
                }),
            )?;
        }
        OutputFormat::Json => {
            w.json("ensemble.json", &meta, json!({ "model": mc.name, "stats": stats }))?;
        }
    }
    Ok((lines, stats.blowups > 0))
}

fn validate(cfg: &RunConfig, w: &mut Writer, start: Instant) -> Result<(Vec<String>, bool), CliError> {
    let mc = cfg.model_unvalidated()?;
    let report = validate_assumptions(&mc, &cfg.probe_box());
    let meta = Metadata::for_config(cfg, start.elapsed().as_secs_f64());
    let mut lines = vec![format!(
        "{}: {}",
        mc.name,
        if report.passed() { "no assumption violations found" } else { "assumption warnings" }
    )];
    lines.extend(report.lipschitz.iter().map(|l| format!("  Lipschitz {}: {:.4e}", l.name, l.constant)));
    lines.extend(report.warnings.iter().map(|m| format!("  warning: {m}")));
    w.json("validation.json", &meta, json!({ "model": mc.name, "passed": report.passed(), "report": report }))?;
    Ok((lines, false))
}

fn benchmark(
    cfg: Option<&RunConfig>,
    workers: usize,
    w: &mut Writer,
    start: Instant,
) -> Result<(Vec<String>, bool), CliError> {
    let outcomes: Vec<CriterionOutcome> = run_all(workers);
    let wall = start.elapsed().as_secs_f64();
    let meta = match cfg {
        Some(c) => Metadata::for_config(c, wall),
        None => Metadata::bare(wall),
    };
    let format = cfg.map(|c| c.output.format).unwrap_or_default();
    match format {
        OutputFormat::Csv => {
            let cols = ["id", "passed", "title", "detail", "seconds"].map(String::from);
            let quote = |s: &str| format!("\"{}\"", s.replace('"', "\"\""));
            let rows = outcomes.iter().map(|o| {
                vec![o.id.to_string(), o.passed.to_string(), quote(&o.title), quote(&o.detail), num(o.seconds)]
            });
            w.csv("acceptance.csv", &meta, &cols, rows)?;
        }
        OutputFormat::Json => w.json("acceptance.json", &meta, json!({ "criteria": outcomes }))?,
    }
    let passed = outcomes.iter().filter(|o| o.passed).count();
    let mut lines: Vec<String> = outcomes.iter().map(|o| o.to_string()).collect();
    lines.push(format!("{passed}/{} criteria passed", outcomes.len()));
    Ok((lines, false))
}
