//! Initial data, run orchestration and artifact output.

use std::f64::consts::PI;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use muhs_core::besov::{BesovIndex, DyadicCutoffs};
use muhs_core::characteristics::{
    global_existence_certificate, FlowHistory, FlowOptions, FlowTracker,
};
use muhs_core::dynamics::{run_observed, Parameters, RunControl, RunStatus, State, Trajectory};
use muhs_core::picard::{
    compare_to_direct, direct_on_mesh, run_iteration_observed, IterationConfig, IterationOutcome,
};
use muhs_core::spectral::{inverse_transform, PeriodicGrid, SpectralField, Spectrum};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{
    Coefficient, InitialSpec, Mode, NormRequest, PicardSettings, Preset, ScenarioConfig,
};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("invalid initial data: {0}")]
    Initial(String),
    #[error("integration failed: {0}")]
    Dynamics(#[from] muhs_core::dynamics::DynamicsError),
    #[error("picard iteration failed: {0}")]
    Picard(#[from] muhs_core::picard::PicardError),
    #[error("cannot write {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("cannot write csv {path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> ScenarioError + '_ {
    move |source| ScenarioError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn preset_fields(grid: &PeriodicGrid, preset: Preset) -> (SpectralField, SpectralField) {
    let tau = 2.0 * PI;
    match preset {
        Preset::Sine => (
            grid.sample(|x| (tau * x).sin()),
            grid.sample(|x| (tau * x).cos()),
        ),
        Preset::Global => (
            grid.sample(|x| 0.5 * (tau * x).cos()),
            grid.sample(|x| 1.0 + 0.5 * (tau * x).sin()),
        ),
        Preset::Muhs => (
            grid.sample(|x| -(tau * x).sin() + 0.8 * (2.0 * tau * x).sin()),
            grid.zeros(),
        ),
        Preset::Zero => (grid.zeros(), grid.zeros()),
    }
}

fn from_coefficients(
    grid: &PeriodicGrid,
    list: &[Coefficient],
) -> Result<SpectralField, ScenarioError> {
    let spectrum =
        Spectrum::from_modes(grid, list.iter().map(|c| (c.k, Complex64::new(c.re, c.im))))
            .map_err(|e| ScenarioError::Initial(e.to_string()))?;
    inverse_transform(&spectrum).map_err(|e| ScenarioError::Initial(e.to_string()))
}

/// Initial state for a validated configuration.
pub fn build_initial(config: &ScenarioConfig) -> Result<State, ScenarioError> {
    let grid = PeriodicGrid::new(config.n).map_err(|e| ScenarioError::Initial(e.to_string()))?;
    let (u, rho) = match &config.initial {
        InitialSpec::Preset(p) => preset_fields(&grid, *p),
        InitialSpec::Scaled { preset, scale } => {
            let (u, rho) = preset_fields(&grid, *preset);
            (u.scale(*scale), rho.scale(*scale))
        }
        InitialSpec::Coefficients { u, rho } => {
            (from_coefficients(&grid, u)?, from_coefficients(&grid, rho)?)
        }
    };
    Ok(State::new(
        u,
        rho,
        Parameters::new(config.gamma1, config.gamma2),
    )?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportStatus {
    Completed,
    WaveBreakingDetected,
    ResolutionExhausted,
    Failed,
}

impl ReportStatus {
    pub fn exit_code(self) -> i32 {
        match self {
            ReportStatus::Completed => 0,
            ReportStatus::WaveBreakingDetected => 2,
            ReportStatus::ResolutionExhausted => 3,
            ReportStatus::Failed => 5,
        }
    }
}

impl From<RunStatus> for ReportStatus {
    fn from(s: RunStatus) -> Self {
        match s {
            RunStatus::Completed => ReportStatus::Completed,
            RunStatus::WaveBreakingDetected => ReportStatus::WaveBreakingDetected,
            RunStatus::ResolutionExhausted => ReportStatus::ResolutionExhausted,
        }
    }
}

/// Summary of one scenario. Numeric fields are `None` when not computed or
/// not finite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub status: ReportStatus,
    pub t_final: Option<f64>,
    pub reason: String,
    pub mean_drift: Option<f64>,
    pub energy_drift: Option<f64>,
    pub a_drift: Option<f64>,
    pub max_utx_residual: Option<f64>,
    pub sup_bound_excess: Option<f64>,
    pub max_rho_identity_residual: Option<f64>,
    pub max_qx_discrepancy: Option<f64>,
    pub artifacts: Vec<String>,
}

impl RunReport {
    pub fn failed(reason: impl Into<String>) -> Self {
        Self {
            status: ReportStatus::Failed,
            t_final: None,
            reason: reason.into(),
            mean_drift: None,
            energy_drift: None,
            a_drift: None,
            max_utx_residual: None,
            sup_bound_excess: None,
            max_rho_identity_residual: None,
            max_qx_discrepancy: None,
            artifacts: Vec::new(),
        }
    }

    fn from_trajectory(traj: &Trajectory) -> Self {
        Self {
            status: traj.termination.status.into(),
            t_final: finite(traj.termination.t_final),
            reason: traj.termination.reason.clone(),
            mean_drift: finite(traj.mean_drift()),
            energy_drift: finite(traj.energy_drift()),
            a_drift: finite(traj.a_drift()),
            max_utx_residual: finite(traj.max_utx_residual()),
            sup_bound_excess: finite(traj.monitor.sup_bound_excess),
            max_rho_identity_residual: None,
            max_qx_discrepancy: None,
            artifacts: Vec::new(),
        }
    }
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

struct Artifacts<'a> {
    dir: &'a Path,
    written: Vec<String>,
}

impl<'a> Artifacts<'a> {
    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), ScenarioError> {
        let path = self.dir.join(name);
        let text = serde_json::to_string_pretty(value).expect("report types serialize");
        fs::write(&path, text + "\n").map_err(io_err(&path))?;
        self.written.push(name.to_string());
        Ok(())
    }

    fn csv<T: Serialize>(
        &mut self,
        name: &str,
        rows: impl IntoIterator<Item = T>,
    ) -> Result<(), ScenarioError> {
        let path = self.dir.join(name);
        let csv_err = |source| ScenarioError::Csv {
            path: path.clone(),
            source,
        };
        let mut w = csv::Writer::from_path(&path).map_err(csv_err)?;
        for row in rows {
            w.serialize(row).map_err(csv_err)?;
        }
        w.flush().map_err(io_err(&path))?;
        self.written.push(name.to_string());
        Ok(())
    }
}

#[derive(Debug, Serialize)]
struct FlowRow {
    t: f64,
    x_seed: f64,
    q: f64,
    qx_fd: f64,
    qx_formula: f64,
    rho_identity_value: f64,
}

#[derive(Debug, Serialize)]
struct CertificateOut {
    applicable: bool,
    min_identity: Option<f64>,
    max_identity_drift: Option<f64>,
    qx_lower_bound: Option<f64>,
    degraded: bool,
    reason: String,
}

#[derive(Debug, Serialize)]
struct PicardRow {
    n: usize,
    sup_l_n: f64,
    h_n: f64,
    ratio: Option<f64>,
    mu0_n: f64,
    error_vs_direct: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct PicardSummary {
    pub converged: bool,
    pub n_used: usize,
    #[serde(rename = "T_iter")]
    pub t_iter: f64,
    pub final_error: Option<f64>,
}

#[derive(Debug, Serialize)]
pub struct NormRow {
    pub name: String,
    pub s: f64,
    pub p: f64,
    pub r: f64,
    pub value: f64,
}

fn control(config: &ScenarioConfig) -> RunControl {
    RunControl {
        thresholds: config.thresholds(),
        ..RunControl::with_dt(config.dt)
    }
}

/// Dynamics run, optionally followed by the flow tracker.
pub fn run_direct(
    config: &ScenarioConfig,
    initial: &State,
    track_flow: bool,
) -> Result<(Trajectory, Option<FlowHistory>), ScenarioError> {
    let options = FlowOptions {
        checkpoint_every: config
            .checkpoint_every
            .unwrap_or(FlowOptions::default().checkpoint_every),
        ..FlowOptions::default()
    };
    let mut tracker: Option<FlowTracker> = None;
    let mut control = control(config);
    control.sample_every = usize::MAX;
    let traj = run_observed(initial, config.t_end, &control, |model, state| {
        if !track_flow {
            return;
        }
        match tracker.as_mut() {
            None => tracker = Some(FlowTracker::new(model, state, options)),
            Some(t) => t.advance(model, state),
        }
    })?;
    Ok((traj, tracker.map(FlowTracker::finish)))
}

/// Norm table of the initial data.
pub fn norm_table(initial: &State, requests: Option<&[NormRequest]>) -> Vec<NormRow> {
    let defaults = [
        NormRequest {
            s: 1.0,
            p: Some(2.0),
            r: Some(2.0),
        },
        NormRequest {
            s: 2.0,
            p: Some(2.0),
            r: Some(2.0),
        },
        NormRequest {
            s: 2.0,
            p: None,
            r: None,
        },
    ];
    let requests = requests.unwrap_or(&defaults);
    let cut = DyadicCutoffs::new();
    let mut rows = Vec::new();
    for (name, field) in [("u0", &initial.u), ("rho0", &initial.rho)] {
        for req in requests {
            let idx = BesovIndex::new(req.s, req.p(), req.r()).expect("validated index");
            rows.push(NormRow {
                name: name.to_string(),
                s: req.s,
                p: req.p(),
                r: req.r(),
                value: cut.besov_norm(field, idx),
            });
        }
    }
    rows
}

/// Picard iteration with adaptive horizon; every attempt is compared with a
/// direct solve on its own mesh.
pub fn run_picard(
    config: &ScenarioConfig,
    initial: &State,
    settings: PicardSettings,
) -> Result<(IterationOutcome, Vec<Option<f64>>), ScenarioError> {
    let mut cfg = IterationConfig::new(settings.n_max, settings.t_iter, initial.params);
    cfg.s = settings.s;
    let mut attempt = 0;
    loop {
        let mesh = cfg.mesh();
        let spacing = mesh[1] - mesh[0];
        let steps = (spacing / config.dt).ceil().max(1.0) as usize;
        let direct = direct_on_mesh(initial, &mesh, steps);
        let mut errors = Vec::new();
        let outcome = run_iteration_observed(&cfg, &initial.u, &initial.rho, |record| {
            errors.push(finite(compare_to_direct(record, &direct, cfg.s)));
        })?;
        if outcome.converged || attempt >= settings.max_halvings {
            return Ok((outcome, errors));
        }
        attempt += 1;
        cfg.t_iter *= 0.5;
    }
}

fn execute_inner(
    config: &ScenarioConfig,
    arts: &mut Artifacts,
) -> Result<RunReport, ScenarioError> {
    let initial = build_initial(config)?;
    arts.json("config.json", config)?;
    match config.mode {
        Mode::Direct | Mode::Flow => {
            let (traj, flow) = run_direct(config, &initial, config.mode == Mode::Flow)?;
            arts.csv("diagnostics.csv", &traj.diagnostics)?;
            arts.json("termination.json", &traj.termination)?;
            let mut report = RunReport::from_trajectory(&traj);
            if let Some(flow) = flow {
                let rows = flow.checkpoints.iter().flat_map(|c| {
                    let fd = c.map.qx_fd();
                    let formula = c.map.qx_formula();
                    (0..c.map.n()).map(move |j| FlowRow {
                        t: c.map.t,
                        x_seed: c.map.seeds[j],
                        q: c.map.q[j],
                        qx_fd: fd[j],
                        qx_formula: formula[j],
                        rho_identity_value: c.identity[j],
                    })
                });
                arts.csv("flow.csv", rows)?;
                let cert = global_existence_certificate(initial.params, &flow);
                arts.json(
                    "certificate.json",
                    &CertificateOut {
                        applicable: cert.applicable,
                        min_identity: cert.min_identity.and_then(finite),
                        max_identity_drift: cert.max_identity_drift.and_then(finite),
                        qx_lower_bound: cert.qx_lower_bound.and_then(finite),
                        degraded: cert.degraded,
                        reason: cert.reason,
                    },
                )?;
                report.max_rho_identity_residual = finite(flow.max_identity_residual());
                report.max_qx_discrepancy = finite(flow.max_qx_discrepancy());
            }
            Ok(report)
        }
        Mode::Picard => {
            let settings = config.picard.unwrap_or_default();
            let (outcome, errors) = run_picard(config, &initial, settings)?;
            let rows = outcome.rows.iter().map(|r| PicardRow {
                n: r.n,
                sup_l_n: r.sup_l_n,
                h_n: r.h_n,
                ratio: r.ratio,
                mu0_n: r.mu0_n,
                error_vs_direct: errors.get(r.n).copied().flatten(),
            });
            arts.csv("picard.csv", rows)?;
            let summary = PicardSummary {
                converged: outcome.converged,
                n_used: outcome.n_used(),
                t_iter: outcome.config.t_iter,
                final_error: errors.last().copied().flatten(),
            };
            arts.json("summary.json", &summary)?;
            let mut report = RunReport::failed("");
            report.status = ReportStatus::Completed;
            report.t_final = Some(outcome.config.t_iter);
            report.reason = match (&outcome.divergence, outcome.converged) {
                (Some(d), _) => d.clone(),
                (None, true) => format!("converged on T_iter = {}", outcome.config.t_iter),
                (None, false) => format!("ratio test failed on T_iter = {}", outcome.config.t_iter),
            };
            Ok(report)
        }
        Mode::Norms => {
            arts.csv("norms.csv", norm_table(&initial, config.norms.as_deref()))?;
            let mut report = RunReport::failed("");
            report.status = ReportStatus::Completed;
            report.reason = "norm table written".to_string();
            Ok(report)
        }
    }
}

/// Runs one scenario, writing its artifacts and `report.json` into `out`.
/// A report is returned (and written, when the directory is usable) even
/// when the run fails.
pub fn execute(config: &ScenarioConfig, out: &Path) -> RunReport {
    if let Err(e) = fs::create_dir_all(out) {
        return RunReport::failed(format!("cannot create {}: {e}", out.display()));
    }
    let mut arts = Artifacts {
        dir: out,
        written: Vec::new(),
    };
    let mut report = match execute_inner(config, &mut arts) {
        Ok(r) => r,
        Err(ScenarioError::Dynamics(e)) => {
            let mut r = RunReport::failed(e.to_string());
            if let muhs_core::dynamics::DynamicsError::NonFinite { last_good, .. } = &e {
                r.t_final = finite(last_good.t);
            }
            r
        }
        Err(e) => RunReport::failed(e.to_string()),
    };
    report.artifacts = arts.written.clone();
    report.artifacts.push("report.json".to_string());
    if let Err(e) = arts.json("report.json", &report) {
        report.status = ReportStatus::Failed;
        report.reason = format!("{}; {e}", report.reason);
    }
    report
}
