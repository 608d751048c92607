//! Pseudospectral evolution of the reformulated system
//!
//! ```text
//! u_t - (u + γ₁) u_x = P(D)(2μ₀u + ½u_x² + ½ρ²)
//! ρ_t - (u + 2γ₂) ρ_x = u_x ρ
//! ```
//!
//! with classical RK4 in time, 2/3-rule dealiasing of every quadratic
//! product, conserved-quantity bookkeeping and a wave-breaking monitor.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::besov::sobolev_norm;
use crate::spectral::{mean, Multiplier, PeriodicGrid, SpectralField, Spectrum};

/// `√3/6`, the constant of the a priori sup bound `‖u‖_∞ ≤ |μ₀| + (√3/6)μ₁`.
pub const SUP_BOUND_CONSTANT: f64 = 0.288_675_134_594_812_9;

#[derive(Debug, Error, Clone)]
pub enum DynamicsError {
    #[error("u and rho must share one grid ({0} vs {1} points)")]
    GridMismatch(usize, usize),
    #[error("time step must be positive, got {0}")]
    InvalidStep(f64),
    #[error("t_end = {t_end} must exceed the initial time {t0}")]
    InvalidHorizon { t0: f64, t_end: f64 },
    #[error("initial data contain non-finite values")]
    NonFiniteInitial,
    #[error("non-finite field values at t = {t}; last good state at t = {}", last_good.t)]
    NonFinite { t: f64, last_good: Box<State> },
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Parameters {
    pub gamma1: f64,
    pub gamma2: f64,
}

impl Parameters {
    pub fn new(gamma1: f64, gamma2: f64) -> Self {
        Self { gamma1, gamma2 }
    }

    /// The global-existence condition `γ₁ = 2γ₂`.
    pub fn is_balanced(&self) -> bool {
        (self.gamma1 - 2.0 * self.gamma2).abs() <= 1e-12 * (1.0 + self.gamma1.abs())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub u: SpectralField,
    pub rho: SpectralField,
    pub t: f64,
    pub params: Parameters,
}

impl State {
    pub fn new(
        u: SpectralField,
        rho: SpectralField,
        params: Parameters,
    ) -> Result<Self, DynamicsError> {
        if u.grid() != rho.grid() {
            return Err(DynamicsError::GridMismatch(u.grid().n(), rho.grid().n()));
        }
        Ok(Self {
            u,
            rho,
            t: 0.0,
            params,
        })
    }

    pub fn grid(&self) -> &PeriodicGrid {
        self.u.grid()
    }

    pub fn is_finite(&self) -> bool {
        self.t.is_finite() && self.u.is_finite() && self.rho.is_finite()
    }
}

/// `μ₀ = μ(u)`, `μ₁ = (∫ u_x² + ρ²)^{1/2}` and `a = 2μ₀² + ½μ₁²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConservedSet {
    pub mu0: f64,
    pub mu1: f64,
    pub a: f64,
}

impl ConservedSet {
    pub fn from_parts(mu0: f64, energy: f64) -> Self {
        let energy = energy.max(0.0);
        Self {
            mu0,
            mu1: energy.sqrt(),
            a: 2.0 * mu0 * mu0 + 0.5 * energy,
        }
    }

    /// `∫ u_x² + ρ² = μ₁²`.
    pub fn energy(&self) -> f64 {
        self.mu1 * self.mu1
    }

    /// Right-hand side of the sup bound on `u`.
    pub fn sup_bound(&self) -> f64 {
        self.mu0.abs() + SUP_BOUND_CONSTANT * self.mu1
    }
}

pub fn conserved(state: &State) -> ConservedSet {
    let ux = Multiplier::derivative(state.grid(), 1).apply(&state.u);
    let energy = mean(&ux.zip_with(&state.rho, |a, b| a * a + b * b));
    ConservedSet::from_parts(mean(&state.u), energy)
}

/// Evolution operator for one run: the grid multipliers plus the run
/// constants `μ₀` and `a`, frozen from the initial state.
#[derive(Debug, Clone)]
pub struct Model {
    grid: PeriodicGrid,
    params: Parameters,
    invariants: ConservedSet,
    d1: Multiplier,
    d2: Multiplier,
    pd_dealiased: Multiplier,
    dealias: Multiplier,
}

impl Model {
    pub fn new(initial: &State) -> Self {
        Self::with_invariants(initial.grid(), initial.params, conserved(initial))
    }

    pub fn with_invariants(
        grid: &PeriodicGrid,
        params: Parameters,
        invariants: ConservedSet,
    ) -> Self {
        let dealias = Multiplier::dealias(grid);
        Self {
            grid: grid.clone(),
            params,
            invariants,
            d1: Multiplier::derivative(grid, 1),
            d2: Multiplier::derivative(grid, 2),
            pd_dealiased: dealias.then(&Multiplier::pd(grid)),
            dealias,
        }
    }

    pub fn grid(&self) -> &PeriodicGrid {
        &self.grid
    }

    pub fn params(&self) -> Parameters {
        self.params
    }

    /// `(μ₀, μ₁, a)` of the initial state.
    pub fn invariants(&self) -> ConservedSet {
        self.invariants
    }

    /// `(u_t, ρ_t)` at the given state.
    pub fn rhs(&self, state: &State) -> (SpectralField, SpectralField) {
        let Parameters { gamma1, gamma2 } = self.params;
        let mu0 = self.invariants.mu0;
        let ux = self.d1.apply(&state.u);
        let rhox = self.d1.apply(&state.rho);
        let u = state.u.values();
        let rho = state.rho.values();
        let (ux_v, rhox_v) = (ux.values(), rhox.values());

        let n = u.len();
        let mut advect = Vec::with_capacity(n);
        let mut source = Vec::with_capacity(n);
        let mut density = Vec::with_capacity(n);
        for j in 0..n {
            advect.push((u[j] + gamma1) * ux_v[j]);
            source.push(2.0 * mu0 * u[j] + 0.5 * ux_v[j] * ux_v[j] + 0.5 * rho[j] * rho[j]);
            density.push((u[j] + 2.0 * gamma2) * rhox_v[j] + ux_v[j] * rho[j]);
        }
        let field = |v: Vec<f64>| SpectralField::from_values(&self.grid, v).expect("grid length");
        let advect = field(advect).spectrum();
        let source = field(source).spectrum();
        let density = field(density).spectrum();

        let du: Vec<Complex64> = advect
            .coefficients()
            .iter()
            .zip(source.coefficients())
            .enumerate()
            .map(|(k, (a, s))| a * self.dealias.factor(k) + s * self.pd_dealiased.factor(k))
            .collect();
        let du = Spectrum::from_coefficients(&self.grid, du).expect("grid length");
        (
            du.to_field(),
            self.dealias.apply_spectrum(&density).to_field(),
        )
    }

    /// One classical RK4 step.
    pub fn step(&self, state: &State, dt: f64) -> State {
        let stage = |base: &State, k: &(SpectralField, SpectralField), h: f64| State {
            u: base.u.axpy(h, &k.0),
            rho: base.rho.axpy(h, &k.1),
            t: base.t + h,
            params: base.params,
        };
        let k1 = self.rhs(state);
        let k2 = self.rhs(&stage(state, &k1, 0.5 * dt));
        let k3 = self.rhs(&stage(state, &k2, 0.5 * dt));
        let k4 = self.rhs(&stage(state, &k3, dt));
        let combine = |y: &SpectralField,
                       a: &SpectralField,
                       b: &SpectralField,
                       c: &SpectralField,
                       d: &SpectralField| {
            let mut out = y.values().to_vec();
            for (j, o) in out.iter_mut().enumerate() {
                *o += dt / 6.0
                    * (a.values()[j] + 2.0 * b.values()[j] + 2.0 * c.values()[j] + d.values()[j]);
            }
            SpectralField::from_values(y.grid(), out).expect("grid length")
        };
        State {
            u: combine(&state.u, &k1.0, &k2.0, &k3.0, &k4.0),
            rho: combine(&state.rho, &k1.1, &k2.1, &k3.1, &k4.1),
            t: state.t + dt,
            params: state.params,
        }
    }

    /// `‖∂ₓu_t − (−2μ₀u + ½u_x² + u u_xx − ½ρ² + γ₁u_xx + a)‖_∞` with `u_t`
    /// taken from [`Model::rhs`] and `μ₀`, `a` the run constants.
    pub fn utx_residual(&self, state: &State) -> f64 {
        self.utx_residual_with(state, self.invariants.a)
    }

    pub fn utx_residual_with(&self, state: &State, a: f64) -> f64 {
        let (du, _) = self.rhs(state);
        let lhs = self.d1.apply(&du);
        let ux = self.d1.apply(&state.u);
        let uxx = self.d2.apply(&state.u);
        let mu0 = self.invariants.mu0;
        let gamma1 = self.params.gamma1;
        (0..self.grid.n())
            .map(|j| {
                let u = state.u.values()[j];
                let r = state.rho.values()[j];
                let (ux, uxx) = (ux.values()[j], uxx.values()[j]);
                let expected =
                    -2.0 * mu0 * u + 0.5 * ux * ux + u * uxx - 0.5 * r * r + gamma1 * uxx + a;
                (lhs.values()[j] - expected).abs()
            })
            .fold(0.0, f64::max)
    }

    pub fn slope(&self, state: &State) -> SpectralField {
        self.d1.apply(&state.u)
    }

    /// Fraction of the `H¹ × L²` energy carried by the top half of the
    /// dealiased band, `n/6 < |β| ≤ n/3`. Grows when the grid stops
    /// resolving the solution.
    pub fn spectral_tail(&self, state: &State) -> f64 {
        let n = self.grid.n() as i64;
        let u = state.u.spectrum();
        let rho = state.rho.spectrum();
        let (mut tail, mut total) = (0.0, 0.0);
        for k in 0..self.grid.n() {
            let beta = self.grid.wavenumber(k);
            if beta == 0 {
                continue;
            }
            let w = 2.0 * PI * beta as f64;
            let e = w * w * u.coefficients()[k].norm_sqr() + rho.coefficients()[k].norm_sqr();
            total += e;
            if beta.abs() > n / 6 {
                tail += e;
            }
        }
        if total == 0.0 {
            0.0
        } else {
            tail / total
        }
    }
}

/// Stopping thresholds for [`run`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Thresholds {
    /// Wave breaking is declared once `sup_x u_x` exceeds this value.
    pub s_max: f64,
    /// Resolution is declared exhausted once the adaptive step falls below this.
    pub dt_min: f64,
    /// Optional cap on [`Model::spectral_tail`]; exceeding it also counts as
    /// exhausted resolution.
    pub max_tail_fraction: Option<f64>,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            s_max: 1e4,
            dt_min: 1e-10,
            max_tail_fraction: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Trigger {
    WaveBreaking,
    ResolutionExhausted,
}

/// Running slope statistics; decides when a run has left the smooth regime.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlowupMonitor {
    /// `max_x u_x` at the latest state.
    pub sup_ux: f64,
    /// `min_x u_x` at the latest state.
    pub inf_ux: f64,
    /// Largest `sup_ux` seen so far.
    pub peak_sup_ux: f64,
    /// `∫₀ᵗ ‖u_x(τ)‖_∞ dτ`, right-endpoint rule over the accepted steps.
    pub slope_integral: f64,
    /// Largest `‖u‖_∞ − (|μ₀| + (√3/6)μ₁)` seen so far.
    pub sup_bound_excess: f64,
    pub triggered: Option<(Trigger, String)>,
}

impl BlowupMonitor {
    pub fn start(model: &Model, state: &State) -> Self {
        let ux = model.slope(state);
        Self {
            sup_ux: ux.max(),
            inf_ux: ux.min(),
            peak_sup_ux: ux.max(),
            slope_integral: 0.0,
            sup_bound_excess: state.u.sup_norm() - model.invariants().sup_bound(),
            triggered: None,
        }
    }
}

/// Updates the monitor after an accepted step of size `dt` ending at `state`.
pub fn monitor(
    model: &Model,
    state: &State,
    prev: &BlowupMonitor,
    dt: f64,
    thresholds: &Thresholds,
) -> BlowupMonitor {
    let ux = model.slope(state);
    let (sup, inf) = (ux.max(), ux.min());
    let mut next = BlowupMonitor {
        sup_ux: sup,
        inf_ux: inf,
        peak_sup_ux: prev.peak_sup_ux.max(sup),
        slope_integral: prev.slope_integral + sup.abs().max(inf.abs()) * dt,
        sup_bound_excess: prev
            .sup_bound_excess
            .max(state.u.sup_norm() - model.invariants().sup_bound()),
        triggered: prev.triggered.clone(),
    };
    if next.triggered.is_none() {
        if sup > thresholds.s_max {
            next.triggered = Some((
                Trigger::WaveBreaking,
                format!(
                    "sup u_x = {sup:.6e} exceeded s_max = {:.3e} at t = {:.6}",
                    thresholds.s_max, state.t
                ),
            ));
        } else if dt < thresholds.dt_min {
            next.triggered = Some((
                Trigger::ResolutionExhausted,
                format!(
                    "time step {dt:.3e} fell below dt_min = {:.3e} at t = {:.6}",
                    thresholds.dt_min, state.t
                ),
            ));
        } else if let Some(cap) = thresholds.max_tail_fraction {
            let tail = model.spectral_tail(state);
            if tail > cap {
                next.triggered = Some((
                    Trigger::ResolutionExhausted,
                    format!(
                        "spectral tail {tail:.3e} exceeded {cap:.3e} at t = {:.6}",
                        state.t
                    ),
                ));
            }
        }
    }
    next
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunControl {
    /// Requested step; halved as often as the stability budget demands.
    pub dt: f64,
    /// Budget for `dt·(‖u‖_∞ + |γ₁| + 2|γ₂|)·2πn` and for `dt·‖u_x‖_∞`.
    pub cfl: f64,
    pub thresholds: Thresholds,
    /// Keep every k-th accepted state in the trajectory (the first and last
    /// states are always kept).
    pub sample_every: usize,
    /// Compute a diagnostics row every k-th accepted step.
    pub diagnostics_every: usize,
    /// Sobolev index of the `u` diagnostic norm; `ρ` uses `s − 1`.
    pub sobolev_index: f64,
}

impl Default for RunControl {
    fn default() -> Self {
        Self {
            dt: 1e-4,
            cfl: 0.5,
            thresholds: Thresholds::default(),
            sample_every: 1,
            diagnostics_every: 1,
            sobolev_index: 2.0,
        }
    }
}

impl RunControl {
    pub fn with_dt(dt: f64) -> Self {
        Self {
            dt,
            ..Self::default()
        }
    }
}

/// One row of the per-run diagnostics table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticRow {
    pub t: f64,
    pub mu0: f64,
    pub energy: f64,
    pub a: f64,
    pub sup_ux: f64,
    pub inf_ux: f64,
    pub slope_integral: f64,
    pub u_linf: f64,
    pub rho_linf: f64,
    pub utx_residual: f64,
    pub hs_norm_u: f64,
    pub hs_norm_rho: f64,
    pub dt: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Completed,
    WaveBreakingDetected,
    ResolutionExhausted,
}

impl From<Trigger> for RunStatus {
    fn from(t: Trigger) -> Self {
        match t {
            Trigger::WaveBreaking => RunStatus::WaveBreakingDetected,
            Trigger::ResolutionExhausted => RunStatus::ResolutionExhausted,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Termination {
    pub status: RunStatus,
    pub t_final: f64,
    pub reason: String,
    pub thresholds: Thresholds,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub invariants: ConservedSet,
    pub states: Vec<State>,
    pub diagnostics: Vec<DiagnosticRow>,
    pub monitor: BlowupMonitor,
    pub termination: Termination,
}

impl Trajectory {
    pub fn initial(&self) -> &State {
        &self.states[0]
    }

    pub fn last(&self) -> &State {
        self.states
            .last()
            .expect("trajectory holds the initial state")
    }

    /// Largest `|μ(u(t)) − μ₀|` over the diagnostics rows.
    pub fn mean_drift(&self) -> f64 {
        self.diagnostics
            .iter()
            .map(|r| (r.mu0 - self.invariants.mu0).abs())
            .fold(0.0, f64::max)
    }

    /// Largest relative drift of `∫ u_x² + ρ²`.
    pub fn energy_drift(&self) -> f64 {
        let e0 = self.invariants.energy();
        self.diagnostics
            .iter()
            .map(|r| relative(r.energy, e0))
            .fold(0.0, f64::max)
    }

    /// Largest relative drift of `a(t)`.
    pub fn a_drift(&self) -> f64 {
        self.diagnostics
            .iter()
            .map(|r| relative(r.a, self.invariants.a))
            .fold(0.0, f64::max)
    }

    pub fn max_utx_residual(&self) -> f64 {
        self.diagnostics
            .iter()
            .map(|r| r.utx_residual)
            .fold(0.0, f64::max)
    }
}

fn relative(value: f64, reference: f64) -> f64 {
    if reference == 0.0 {
        value.abs()
    } else {
        (value - reference).abs() / reference.abs()
    }
}

fn diagnostics_row(
    model: &Model,
    state: &State,
    mon: &BlowupMonitor,
    dt: f64,
    s: f64,
) -> DiagnosticRow {
    let c = conserved(state);
    DiagnosticRow {
        t: state.t,
        mu0: c.mu0,
        energy: c.energy(),
        a: c.a,
        sup_ux: mon.sup_ux,
        inf_ux: mon.inf_ux,
        slope_integral: mon.slope_integral,
        u_linf: state.u.sup_norm(),
        rho_linf: state.rho.sup_norm(),
        utx_residual: model.utx_residual(state),
        hs_norm_u: sobolev_norm(&state.u, s),
        hs_norm_rho: sobolev_norm(&state.rho, s - 1.0),
        dt,
    }
}

/// Largest admissible step `control.dt / 2^k` for the current state.
fn admissible_step(model: &Model, state: &State, mon: &BlowupMonitor, control: &RunControl) -> f64 {
    let Parameters { gamma1, gamma2 } = model.params();
    let speed = (state.u.sup_norm() + gamma1.abs() + 2.0 * gamma2.abs())
        * 2.0
        * PI
        * model.grid().n() as f64;
    let slope = mon.sup_ux.abs().max(mon.inf_ux.abs());
    let mut dt = control.dt;
    while dt >= control.thresholds.dt_min && (dt * speed > control.cfl || dt * slope > control.cfl)
    {
        dt *= 0.5;
    }
    dt
}

/// Integrates from `initial` to `t_end`.
pub fn run(initial: &State, t_end: f64, control: &RunControl) -> Result<Trajectory, DynamicsError> {
    run_observed(initial, t_end, control, |_, _| {})
}

/// As [`run`], calling `observer` with the initial state and every accepted
/// state.
pub fn run_observed(
    initial: &State,
    t_end: f64,
    control: &RunControl,
    mut observer: impl FnMut(&Model, &State),
) -> Result<Trajectory, DynamicsError> {
    if !(control.dt > 0.0) {
        return Err(DynamicsError::InvalidStep(control.dt));
    }
    if !(t_end > initial.t) {
        return Err(DynamicsError::InvalidHorizon {
            t0: initial.t,
            t_end,
        });
    }
    if !initial.is_finite() {
        return Err(DynamicsError::NonFiniteInitial);
    }
    let model = Model::new(initial);
    let s = control.sobolev_index;
    let mut mon = BlowupMonitor::start(&model, initial);
    let mut states = vec![initial.clone()];
    let mut diagnostics = vec![diagnostics_row(&model, initial, &mon, 0.0, s)];
    observer(&model, initial);

    let mut state = initial.clone();
    let mut steps = 0usize;
    let end_tol = 1e-12 * t_end.abs().max(1.0);
    let mut last_dt = 0.0;
    while state.t < t_end - end_tol && mon.triggered.is_none() {
        let mut dt = admissible_step(&model, &state, &mon, control);
        if dt < control.thresholds.dt_min {
            mon = monitor(&model, &state, &mon, dt, &control.thresholds);
            break;
        }
        if state.t + dt > t_end {
            dt = t_end - state.t;
        }
        let mut next = model.step(&state, dt);
        if t_end - next.t <= end_tol {
            next.t = t_end;
        }
        if !next.is_finite() {
            return Err(DynamicsError::NonFinite {
                t: next.t,
                last_good: Box::new(state),
            });
        }
        mon = monitor(&model, &next, &mon, dt, &control.thresholds);
        steps += 1;
        last_dt = dt;
        state = next;
        observer(&model, &state);
        let finished = state.t >= t_end - end_tol || mon.triggered.is_some();
        if finished || steps.is_multiple_of(control.diagnostics_every.max(1)) {
            diagnostics.push(diagnostics_row(&model, &state, &mon, dt, s));
        }
        if finished || steps.is_multiple_of(control.sample_every.max(1)) {
            states.push(state.clone());
        }
    }

    let (status, reason) = match &mon.triggered {
        Some((trigger, why)) => (RunStatus::from(*trigger), why.clone()),
        None => (
            RunStatus::Completed,
            format!("reached t_end = {t_end} in {steps} steps (last dt {last_dt:.3e})"),
        ),
    };
    Ok(Trajectory {
        invariants: model.invariants(),
        states,
        diagnostics,
        termination: Termination {
            status,
            t_final: state.t,
            reason,
            thresholds: control.thresholds,
        },
        monitor: mon,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize) -> PeriodicGrid {
        PeriodicGrid::new(n).unwrap()
    }

    fn sine_state(n: usize) -> State {
        let g = grid(n);
        State::new(
            g.sample(|x| (2.0 * PI * x).sin()),
            g.sample(|x| (2.0 * PI * x).cos()),
            Parameters::default(),
        )
        .unwrap()
    }

    fn max_diff(a: &SpectralField, b: &SpectralField) -> f64 {
        (a - b).sup_norm()
    }

    #[test]
    fn state_requires_shared_grid() {
        let err = State::new(grid(16).zeros(), grid(32).zeros(), Parameters::default());
        assert!(matches!(err, Err(DynamicsError::GridMismatch(16, 32))));
    }

    #[test]
    fn rhs_vanishes_on_constants() {
        let g = grid(32);
        let params = Parameters::new(0.3, -0.2);
        let s = State::new(g.constant(1.7), g.zeros(), params).unwrap();
        let (du, dr) = Model::new(&s).rhs(&s);
        assert!(du.sup_norm() < 1e-14 && dr.sup_norm() < 1e-14);
        let s = State::new(g.zeros(), g.constant(2.0), params).unwrap();
        let (du, dr) = Model::new(&s).rhs(&s);
        assert!(du.sup_norm() < 1e-14 && dr.sup_norm() < 1e-14);
    }

    #[test]
    fn rhs_single_mode() {
        // u u_x = π sin 4πx and P(D)(½u_x²) = P(D)(π² cos 4πx) = −(π/4) sin 4πx
        let g = grid(64);
        let s = State::new(
            g.sample(|x| (2.0 * PI * x).sin()),
            g.zeros(),
            Parameters::default(),
        )
        .unwrap();
        let (du, dr) = Model::new(&s).rhs(&s);
        let expected = g.sample(|x| 0.75 * PI * (4.0 * PI * x).sin());
        assert!(max_diff(&du, &expected) < 1e-12);
        assert!(dr.sup_norm() < 1e-15);
    }

    #[test]
    fn conserved_examples() {
        let c = conserved(&sine_state(64));
        assert!(c.mu0.abs() < 1e-16);
        assert!((c.energy() - (4.0 * PI * PI + 1.0) / 2.0).abs() < 1e-12);
        assert!((c.a - (4.0 * PI * PI + 1.0) / 4.0).abs() < 1e-12);

        let g = grid(32);
        let k = State::new(g.constant(-0.4), g.zeros(), Parameters::default()).unwrap();
        let c = conserved(&k);
        assert!((c.mu0 + 0.4).abs() < 1e-15);
        assert_eq!(c.mu1, 0.0);
        assert!((c.a - 2.0 * 0.16).abs() < 1e-14);
        assert_eq!(c.a, 2.0 * c.mu0 * c.mu0 + 0.5 * c.mu1 * c.mu1);
    }

    #[test]
    fn step_keeps_steady_state() {
        let g = grid(32);
        let s = State::new(g.constant(0.8), g.zeros(), Parameters::new(1.0, 0.5)).unwrap();
        let next = Model::new(&s).step(&s, 1e-3);
        assert!(max_diff(&next.u, &s.u) < 1e-15);
        assert!((next.t - 1e-3).abs() < 1e-18);
    }

    #[test]
    fn utx_residual_examples() {
        let g = grid(32);
        let s = State::new(g.constant(1.3), g.zeros(), Parameters::default()).unwrap();
        let model = Model::new(&s);
        assert!(model.utx_residual(&s) < 1e-12);

        let s = State::new(
            g.sample(|x| (2.0 * PI * x).sin()),
            g.zeros(),
            Parameters::default(),
        )
        .unwrap();
        let model = Model::new(&s);
        assert!(model.utx_residual(&s) < 1e-10);
        let shifted = model.utx_residual_with(&s, model.invariants().a + 1.0);
        assert!((shifted - 1.0).abs() < 1e-9);
    }

    #[test]
    fn monitor_examples() {
        let g = grid(64);
        let s = State::new(g.constant(0.5), g.zeros(), Parameters::default()).unwrap();
        let model = Model::new(&s);
        let m = monitor(
            &model,
            &s,
            &BlowupMonitor::start(&model, &s),
            0.1,
            &Thresholds::default(),
        );
        assert_eq!(m.sup_ux, 0.0);
        assert_eq!(m.slope_integral, 0.0);

        let s = sine_state(64);
        let model = Model::new(&s);
        let m = BlowupMonitor::start(&model, &s);
        assert!((m.sup_ux - 2.0 * PI).abs() < 1e-12);
        assert!((m.inf_ux + 2.0 * PI).abs() < 1e-12);
        let m = monitor(&model, &s, &m, 0.5, &Thresholds::default());
        assert!((m.slope_integral - PI).abs() < 1e-12);
    }

    #[test]
    fn monitor_triggers() {
        let s = sine_state(64);
        let model = Model::new(&s);
        let start = BlowupMonitor::start(&model, &s);
        let low = Thresholds {
            s_max: 5.0,
            ..Thresholds::default()
        };
        let m = monitor(&model, &s, &start, 1e-3, &low);
        assert_eq!(m.triggered.as_ref().unwrap().0, Trigger::WaveBreaking);
        let m = monitor(&model, &s, &start, 1e-12, &Thresholds::default());
        assert_eq!(
            m.triggered.as_ref().unwrap().0,
            Trigger::ResolutionExhausted
        );
    }

    #[test]
    fn run_validates_inputs() {
        let s = sine_state(32);
        assert!(matches!(
            run(&s, 1.0, &RunControl::with_dt(0.0)),
            Err(DynamicsError::InvalidStep(_))
        ));
        assert!(matches!(
            run(&s, 0.0, &RunControl::default()),
            Err(DynamicsError::InvalidHorizon { .. })
        ));
    }

    #[test]
    fn steady_run_completes_without_drift() {
        let g = grid(32);
        let s = State::new(g.constant(0.25), g.zeros(), Parameters::default()).unwrap();
        let traj = run(&s, 1.0, &RunControl::with_dt(0.01)).unwrap();
        assert_eq!(traj.termination.status, RunStatus::Completed);
        assert_eq!(traj.termination.t_final, 1.0);
        assert!(traj.mean_drift() < 1e-15);
        assert!(max_diff(&traj.last().u, &s.u) < 1e-15);
    }

    #[test]
    fn non_finite_data_is_reported() {
        let g = grid(32);
        let mut values = vec![0.0; 32];
        values[3] = f64::NAN;
        let s = State::new(
            SpectralField::from_values(&g, values).unwrap(),
            g.zeros(),
            Parameters::default(),
        )
        .unwrap();
        assert!(matches!(
            run(&s, 0.1, &RunControl::with_dt(0.01)),
            Err(DynamicsError::NonFiniteInitial)
        ));
    }
}
