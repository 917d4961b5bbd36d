//! Batch front-end: configuration, subcommand dispatch and artifact output.

pub mod config;
pub mod output;

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde_json::{json, Value};

use crate::analysis::bifurcation::{bifurcation_diagram_with, transitions};
use crate::analysis::lyapunov::lyapunov_max_with;
use crate::analysis::poincare::{poincare_section, SectionRule};
use crate::dynamics::{amplitude_scan, instability_threshold, integrate, IntegratorConfig, TimeSeries};
use crate::error::{Error, Result};
use crate::spectrum::{eigen_surface, ep_scan_with, EpScanOptions};
use crate::steady::steady_ramp;
pub use config::{RunConfig, Units};
use output::{num, OutputDir};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Command {
    Simulate,
    Steady,
    EpScan,
    EigenSurface,
    Bifurcation,
    Poincare,
    Lyapunov,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Steady => "steady",
            Command::EpScan => "ep-scan",
            Command::EigenSurface => "eigen-surface",
            Command::Bifurcation => "bifurcation",
            Command::Poincare => "poincare",
            Command::Lyapunov => "lyapunov",
        }
    }
}

/// Command-line overrides applied on top of the configuration file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub units: Option<Units>,
    pub threads: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub out_dir: PathBuf,
    pub files: Vec<String>,
    pub summary: Value,
}

/// Loads `config_path`, runs `command` and writes its artifacts plus
/// `manifest.json`.
pub fn run(command: Command, config_path: &Path, overrides: &Overrides) -> Result<RunOutcome> {
    let mut cfg = RunConfig::load(config_path)?;
    if let Some(u) = overrides.units {
        cfg.units = u;
    }
    let dir = overrides
        .out
        .clone()
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("."));
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(overrides.threads.unwrap_or(0))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    pool.install(|| run_config(command, &cfg, &dir))
}

/// Runs an already parsed configuration into `dir`.
pub fn run_config(command: Command, cfg: &RunConfig, dir: &Path) -> Result<RunOutcome> {
    cfg.validate()?;
    let started = Instant::now();
    let mut out = OutputDir::create(dir)?;
    let summary = match command {
        Command::Simulate => simulate(cfg, &mut out)?,
        Command::Steady => steady(cfg, &mut out)?,
        Command::EpScan => ep_scan_cmd(cfg, &mut out)?,
        Command::EigenSurface => eigen_surface_cmd(cfg, &mut out)?,
        Command::Bifurcation => bifurcation(cfg, &mut out)?,
        Command::Poincare => poincare(cfg, &mut out)?,
        Command::Lyapunov => lyapunov(cfg, &mut out)?,
    };
    let files = out.written().to_vec();
    let manifest = json!({
        "command": command.name(),
        "version": env!("CARGO_PKG_VERSION"),
        "config": cfg,
        "wall_time_seconds": started.elapsed().as_secs_f64(),
        "outputs": files,
        "summary": summary,
    });
    out.json("manifest.json", &manifest)?;
    Ok(RunOutcome { out_dir: dir.to_path_buf(), files, summary })
}

pub const TIMESERIES_HEADER: [&str; 13] = [
    "t", "re_alpha1", "im_alpha1", "re_alpha2", "im_alpha2", "re_beta1", "im_beta1", "re_beta2", "im_beta2", "x1",
    "x2", "n1", "n2",
];

fn timeseries_rows(ts: &TimeSeries) -> impl Iterator<Item = Vec<String>> + '_ {
    ts.t.iter().zip(&ts.states).map(|(t, s)| {
        let mut row = vec![num(*t)];
        row.extend(s.to_real().iter().map(|v| num(*v)));
        row.extend([num(s.x(0)), num(s.x(1)), num(s.photons(0)), num(s.photons(1))]);
        row
    })
}

fn simulate(cfg: &RunConfig, out: &mut OutputDir) -> Result<Value> {
    let ts = integrate(&cfg.resolved_params(), &cfg.initial(), &cfg.integrator)?;
    out.csv("timeseries.csv", &TIMESERIES_HEADER, timeseries_rows(&ts))?;
    Ok(json!({ "samples": ts.len() }))
}

fn steady(cfg: &RunConfig, out: &mut OutputDir) -> Result<Value> {
    let p = cfg.resolved_params();
    let grid = cfg.steady.alpha_grid.as_ref().map_or_else(|| vec![p.alpha_in], |g| g.values());
    let ramp = steady_ramp(&p, &grid)?;
    let header = [
        "alpha_in", "re_alpha1", "im_alpha1", "re_alpha2", "im_alpha2", "re_beta1", "im_beta1", "re_beta2",
        "im_beta2", "residual", "iterations", "converged",
    ];
    let converged = ramp.iter().filter(|s| s.converged).count();
    out.csv(
        "steady.csv",
        &header,
        grid.iter().zip(&ramp).map(|(a, ss)| {
            let mut row = vec![num(*a)];
            row.extend(ss.state().to_real().iter().map(|v| num(*v)));
            row.extend([num(ss.residual), ss.iterations.to_string(), ss.converged.to_string()]);
            row
        }),
    )?;
    Ok(json!({ "points": grid.len(), "converged": converged }))
}

fn ep_scan_cmd(cfg: &RunConfig, out: &mut OutputDir) -> Result<Value> {
    let p = cfg.resolved_params();
    let sec = &cfg.ep_scan;
    let grid = sec.alpha_grid.values();
    let opts = EpScanOptions { conjugation: sec.conjugation, refine_tol: sec.refine_tol };
    let report = ep_scan_with(&p, &grid, &opts)?;
    let header = [
        "alpha_in", "sigma_abs", "omega_plus", "omega_minus", "gamma_plus", "gamma_minus", "re_lambda_plus",
        "im_lambda_plus", "re_lambda_minus", "im_lambda_minus", "converged",
    ];
    out.csv(
        "ep_scan.csv",
        &header,
        report.points.iter().map(|pt| match pt.spectrum {
            Some(s) => vec![
                num(pt.alpha_in),
                num(s.sigma.norm()),
                num(s.omega_pm[0]),
                num(s.omega_pm[1]),
                num(s.gamma_pm[0]),
                num(s.gamma_pm[1]),
                num(s.lambda_plus.re),
                num(s.lambda_plus.im),
                num(s.lambda_minus.re),
                num(s.lambda_minus.im),
                "true".into(),
            ],
            None => {
                let mut row = vec![num(pt.alpha_in)];
                row.extend(std::iter::repeat_n(num(f64::NAN), 9));
                row.push("false".into());
                row
            }
        }),
    )?;
    let mut summary = json!({
        "alpha_ep": report.alpha_ep,
        "grid_alpha": report.grid_alpha,
        "grid_sigma_abs": report.grid_sigma_abs,
        "frequency_gap": report.frequency_gap(),
        "damping_gap": report.damping_gap(),
        "boundary_minimum": report.boundary_minimum,
    });
    if sec.amplitude_scan {
        let rows = amplitude_scan(&p, &grid, &cfg.initial(), &cfg.integrator)?;
        let header = [
            "alpha_in", "photon_mean1", "photon_mean2", "photon_max1", "photon_max2", "x_abs_mean1", "x_abs_mean2",
            "x_abs_max1", "x_abs_max2", "failure",
        ];
        out.csv(
            "amplitude_scan.csv",
            &header,
            rows.iter().map(|r| {
                let mut row = vec![num(r.alpha_in)];
                for pair in [r.photon_mean, r.photon_max, r.x_abs_mean, r.x_abs_max] {
                    row.extend(pair.iter().map(|v| num(*v)));
                }
                row.push(r.failure.clone().unwrap_or_default());
                row
            }),
        )?;
        summary["instability_threshold"] = json!(instability_threshold(&rows, sec.threshold_factor));
    }
    Ok(summary)
}

fn eigen_surface_cmd(cfg: &RunConfig, out: &mut OutputDir) -> Result<Value> {
    let p = cfg.resolved_params();
    let scale = cfg.units.eta_scale(&cfg.params);
    let eta_cfg = cfg.eigen_surface.eta_grid.values();
    let eta_abs: Vec<f64> = eta_cfg.iter().map(|e| e * scale).collect();
    let surface = eigen_surface(&p, &cfg.eigen_surface.alpha_grid.values(), &eta_abs)?;
    let header = [
        "eta", "eta_abs", "alpha_in", "omega_plus", "omega_minus", "gamma_plus", "gamma_minus", "sigma_abs",
        "discarded_imag", "converged",
    ];
    out.csv(
        "eigen_surface.csv",
        &header,
        surface.rows.iter().map(|r| {
            vec![
                num(r.eta / scale),
                num(r.eta),
                num(r.alpha_in),
                num(r.omega_plus),
                num(r.omega_minus),
                num(r.gamma_plus),
                num(r.gamma_minus),
                num(r.sigma_abs),
                num(r.discarded_imag),
                r.converged.to_string(),
            ]
        }),
    )?;
    out.csv(
        "ep_locus.csv",
        &["eta", "eta_abs", "alpha_ep", "sigma_abs", "boundary_minimum"],
        surface.locus.iter().map(|l| {
            vec![num(l.eta / scale), num(l.eta), num(l.alpha_ep), num(l.sigma_abs), l.boundary_minimum.to_string()]
        }),
    )?;
    Ok(json!({
        "rows": surface.rows.len(),
        "locus": surface.locus.iter().map(|l| json!({"eta": l.eta / scale, "alpha_ep": l.alpha_ep})).collect::<Vec<_>>(),
    }))
}

fn bifurcation(cfg: &RunConfig, out: &mut OutputDir) -> Result<Value> {
    let p = cfg.resolved_params();
    let scale = cfg.units.eta_scale(&cfg.params);
    let eta_abs: Vec<f64> = cfg.bifurcation.eta_grid.values().iter().map(|e| e * scale).collect();
    let rows = bifurcation_diagram_with(&p, &eta_abs, &cfg.initial(), &cfg.integrator, &cfg.bifurcation.options)?;
    out.csv(
        "bifurcation.csv",
        &["eta", "eta_abs", "extremum"],
        rows.iter()
            .flat_map(|r| r.extrema.iter().map(move |x| vec![num(r.eta / scale), num(r.eta), num(*x)])),
    )?;
    out.csv(
        "zones.csv",
        &["eta", "eta_abs", "label", "lambda_max", "lyapunov_converged", "spectral_peaks", "extrema", "failure"],
        rows.iter().map(|r| {
            vec![
                num(r.eta / scale),
                num(r.eta),
                if r.failure.is_some() { "failed".into() } else { r.label.as_str().into() },
                num(r.lambda_max),
                r.lyapunov_converged.to_string(),
                r.spectral_peaks.to_string(),
                r.extrema.len().to_string(),
                r.failure.clone().unwrap_or_default(),
            ]
        }),
    )?;
    let failed = rows.iter().filter(|r| r.failure.is_some()).count();
    let changes: Vec<String> =
        transitions(&rows).iter().map(|(a, b)| format!("{} -> {}", a.as_str(), b.as_str())).collect();
    Ok(json!({ "points": rows.len(), "failed": failed, "transitions": changes }))
}

/// State at the end of the transient part of the configured run.
fn post_transient_start(cfg: &RunConfig) -> Result<crate::FieldState> {
    let p = cfg.resolved_params();
    let t_cut = cfg.integrator.transient_cut() as f64 * cfg.integrator.sample_stride;
    if t_cut <= 0.0 {
        return Ok(cfg.initial());
    }
    let pre = IntegratorConfig { t_end: t_cut, sample_stride: t_cut, ..cfg.integrator };
    let ts = integrate(&p, &cfg.initial(), &pre)?;
    Ok(*ts.states.last().expect("integration yields at least one sample"))
}

fn poincare(cfg: &RunConfig, out: &mut OutputDir) -> Result<Value> {
    let p = cfg.resolved_params();
    let ts = integrate(&p, &cfg.initial(), &cfg.integrator)?.post_transient(cfg.integrator.transient_fraction);
    let rule = cfg.poincare.rule;
    let sec = poincare_section(&ts, &rule, p.omega_m)?;
    let header = match rule {
        SectionRule::Stroboscopic { .. } => ["x1", "x2"],
        SectionRule::Hyperplane => ["x1", "p1"],
    };
    out.csv("poincare.csv", &header, sec.points.iter().map(|q| vec![num(q[0]), num(q[1])]))?;
    Ok(json!({ "points": sec.points.len(), "spread": sec.spread(), "clusters": sec.clusters() }))
}

fn lyapunov(cfg: &RunConfig, out: &mut OutputDir) -> Result<Value> {
    let p = cfg.resolved_params();
    let start = post_transient_start(cfg)?;
    let est = lyapunov_max_with(&p, &start, &cfg.integrator, &cfg.lyapunov.options)?;
    out.csv(
        "lyapunov.csv",
        &["renormalizations", "t", "lambda"],
        est.trace_counts.iter().zip(&est.convergence_trace).map(|(k, l)| {
            vec![k.to_string(), num(*k as f64 * est.renorm_interval), num(*l)]
        }),
    )?;
    Ok(json!({
        "lambda_max": est.lambda_max,
        "converged": est.converged,
        "tail_spread": est.tail_spread,
        "n_renorms": est.n_renorms,
    }))
}
