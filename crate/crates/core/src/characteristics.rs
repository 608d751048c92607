//! The flow map `q_t = u(t, −q) + 2γ₂`, `q(0, x) = x`, its slope
//! `q_x = exp(−∫₀ᵗ u_x(s, −q) ds)` and the transport identity
//! `ρ(t, −q) q_x = ρ₀(−x)`.
//!
//! [`FlowTracker`] consumes the accepted states of a run one at a time, so
//! the flow can be followed without storing the whole trajectory. Between
//! two states the velocity is interpolated in time by cubic Hermite
//! interpolation using `u_t` from the model at both ends.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{Model, Parameters, State, Trajectory};
use crate::spectral::{Interpolant, SpectralField};

/// Identity tolerance used by the global-existence certificate.
pub const IDENTITY_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowOptions {
    /// Record a checkpoint every k-th accepted state (the first and last are
    /// always recorded).
    pub checkpoint_every: usize,
    /// Negative control: accumulate `+∫u_x` instead of `−∫u_x`.
    pub negate_slope: bool,
}

impl Default for FlowOptions {
    fn default() -> Self {
        Self {
            checkpoint_every: 100,
            negate_slope: false,
        }
    }
}

/// Flow map at one time. Seeds are the grid points `x_j = j/n` plus the
/// extra seed `x = 1` used for the periodicity check.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowMap {
    pub t: f64,
    pub seeds: Vec<f64>,
    pub q: Vec<f64>,
    /// `−∫₀ᵗ u_x(s, −q(s, x)) ds` per seed.
    pub exponent: Vec<f64>,
}

impl FlowMap {
    pub fn identity(n: usize) -> Self {
        let seeds: Vec<f64> = (0..=n).map(|j| j as f64 / n as f64).collect();
        Self {
            t: 0.0,
            q: seeds.clone(),
            exponent: vec![0.0; n + 1],
            seeds,
        }
    }

    /// Number of grid seeds (the extra seed at `x = 1` excluded).
    pub fn n(&self) -> usize {
        self.seeds.len() - 1
    }

    pub fn qx_formula(&self) -> Vec<f64> {
        self.exponent[..self.n()].iter().map(|e| e.exp()).collect()
    }

    /// Fourth-order centred differences of `q` over the seeds, extended by
    /// `q(x + 1) = q(x) + 1`.
    pub fn qx_fd(&self) -> Vec<f64> {
        let n = self.n() as i64;
        let h = 1.0 / n as f64;
        let at = |j: i64| {
            let wraps = j.div_euclid(n);
            self.q[j.rem_euclid(n) as usize] + wraps as f64
        };
        (0..n)
            .map(|j| (-at(j + 2) + 8.0 * at(j + 1) - 8.0 * at(j - 1) + at(j - 2)) / (12.0 * h))
            .collect()
    }

    /// `|q(t, 1) − q(t, 0) − 1|`.
    pub fn periodicity_defect(&self) -> f64 {
        (self.q[self.n()] - self.q[0] - 1.0).abs()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiffeoReport {
    pub t: f64,
    pub monotone: bool,
    pub min_increment: f64,
    pub min_qx_fd: f64,
    pub min_qx_formula: f64,
    pub max_discrepancy: f64,
    pub periodicity_defect: f64,
    pub passed: bool,
}

/// Monotonicity of `q`, positivity of both slopes and their agreement to
/// `tolerance`.
pub fn check_diffeo(flow: &FlowMap, tolerance: f64) -> DiffeoReport {
    let min_increment = flow
        .q
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::INFINITY, f64::min);
    let fd = flow.qx_fd();
    let formula = flow.qx_formula();
    let max_discrepancy = fd
        .iter()
        .zip(&formula)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let min_qx_fd = fd.iter().copied().fold(f64::INFINITY, f64::min);
    let min_qx_formula = formula.iter().copied().fold(f64::INFINITY, f64::min);
    let monotone = min_increment > 0.0;
    DiffeoReport {
        t: flow.t,
        monotone,
        min_increment,
        min_qx_fd,
        min_qx_formula,
        max_discrepancy,
        periodicity_defect: flow.periodicity_defect(),
        passed: monotone && min_qx_fd > 0.0 && min_qx_formula > 0.0 && max_discrepancy < tolerance,
    }
}

/// Which slope enters `ρ(t, −q) q_x`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlopeSource {
    Formula,
    FiniteDifference,
    /// Negative control: `q_x` replaced by 1.
    Unit,
}

/// `ρ(t, −q(t, x_j)) q_x(t, x_j)` per grid seed.
pub fn rho_identity_values(flow: &FlowMap, rho: &SpectralField, source: SlopeSource) -> Vec<f64> {
    let interp = rho.spectrum().interpolant();
    let qx = match source {
        SlopeSource::Formula => flow.qx_formula(),
        SlopeSource::FiniteDifference => flow.qx_fd(),
        SlopeSource::Unit => vec![1.0; flow.n()],
    };
    flow.q[..flow.n()]
        .iter()
        .zip(qx)
        .map(|(&q, qx)| interp.eval(-q) * qx)
        .collect()
}

/// `ρ₀(−x_j)` on the grid.
pub fn reflected(rho0: &SpectralField) -> Vec<f64> {
    let n = rho0.values().len();
    (0..n).map(|j| rho0.values()[(n - j) % n]).collect()
}

/// `max_j |ρ(t, −q) q_x − ρ₀(−x_j)|`.
pub fn rho_identity_residual(
    flow: &FlowMap,
    rho: &SpectralField,
    rho0: &SpectralField,
    source: SlopeSource,
) -> f64 {
    rho_identity_values(flow, rho, source)
        .iter()
        .zip(reflected(rho0))
        .map(|(v, r)| (v - r).abs())
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowCheckpoint {
    pub map: FlowMap,
    pub identity: Vec<f64>,
    pub rho_linf: f64,
}

/// Integrates the flow alongside a run.
#[derive(Debug, Clone)]
pub struct FlowTracker {
    options: FlowOptions,
    gamma2: f64,
    rho0: SpectralField,
    rho0_linf: f64,
    map: FlowMap,
    last: State,
    last_ut: SpectralField,
    last_interp: Interpolant,
    accepted: usize,
    peak_slope: f64,
    rho_bound_excess: f64,
    checkpoints: Vec<FlowCheckpoint>,
}

impl FlowTracker {
    pub fn new(model: &Model, initial: &State, options: FlowOptions) -> Self {
        let map = FlowMap::identity(initial.grid().n());
        let mut tracker = Self {
            options,
            gamma2: initial.params.gamma2,
            rho0: initial.rho.clone(),
            rho0_linf: initial.rho.sup_norm(),
            last_ut: model.rhs(initial).0,
            last_interp: initial.u.spectrum().interpolant(),
            last: initial.clone(),
            map,
            accepted: 0,
            peak_slope: model.slope(initial).max(),
            rho_bound_excess: 0.0,
            checkpoints: Vec::new(),
        };
        tracker.record();
        tracker
    }

    pub fn map(&self) -> &FlowMap {
        &self.map
    }

    fn record(&mut self) {
        let identity = rho_identity_values(&self.map, &self.last.rho, SlopeSource::Formula);
        self.checkpoints.push(FlowCheckpoint {
            map: self.map.clone(),
            identity,
            rho_linf: self.last.rho.sup_norm(),
        });
    }

    /// Advances the flow from the previous state to `state`.
    pub fn advance(&mut self, model: &Model, state: &State) {
        let h = state.t - self.last.t;
        if h <= 0.0 {
            return;
        }
        let ut = model.rhs(state).0;
        let interp = state.u.spectrum().interpolant();
        let mid = SpectralField::from_values(
            state.grid(),
            (0..state.grid().n())
                .map(|j| {
                    0.5 * (self.last.u.values()[j] + state.u.values()[j])
                        + h / 8.0 * (self.last_ut.values()[j] - ut.values()[j])
                })
                .collect(),
        )
        .expect("grid length")
        .spectrum()
        .interpolant();

        let sign = if self.options.negate_slope { 1.0 } else { -1.0 };
        let drift = 2.0 * self.gamma2;
        let field = |interp: &Interpolant, q: f64| {
            let (u, ux) = interp.eval_with_slope(-q);
            (u + drift, sign * ux)
        };
        let start = &self.last_interp;
        let (q, e): (Vec<f64>, Vec<f64>) = self
            .map
            .q
            .par_iter()
            .zip(self.map.exponent.par_iter())
            .map(|(&q, &e)| {
                let k1 = field(start, q);
                let k2 = field(&mid, q + 0.5 * h * k1.0);
                let k3 = field(&mid, q + 0.5 * h * k2.0);
                let k4 = field(&interp, q + h * k3.0);
                (
                    q + h / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0),
                    e + h / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1),
                )
            })
            .unzip();
        self.map.q = q;
        self.map.exponent = e;
        self.map.t = state.t;

        self.peak_slope = self.peak_slope.max(model.slope(state).max());
        let bound = (self.peak_slope * state.t).exp() * self.rho0_linf;
        self.rho_bound_excess = self.rho_bound_excess.max(state.rho.sup_norm() - bound);

        self.last = state.clone();
        self.last_ut = ut;
        self.last_interp = interp;
        self.accepted += 1;
        if self
            .accepted
            .is_multiple_of(self.options.checkpoint_every.max(1))
        {
            self.record();
        }
    }

    pub fn finish(mut self) -> FlowHistory {
        if self.checkpoints.last().map(|c| c.map.t) != Some(self.map.t) {
            self.record();
        }
        FlowHistory {
            gamma2: self.gamma2,
            rho0: self.rho0,
            checkpoints: self.checkpoints,
            peak_slope: self.peak_slope,
            rho_bound_excess: self.rho_bound_excess,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FlowHistory {
    pub gamma2: f64,
    pub rho0: SpectralField,
    pub checkpoints: Vec<FlowCheckpoint>,
    /// Running maximum `M` of `sup_x u_x`.
    pub peak_slope: f64,
    /// Largest `‖ρ(t)‖_∞ − e^{Mt}‖ρ₀‖_∞` over the accepted states.
    pub rho_bound_excess: f64,
}

impl FlowHistory {
    pub fn last(&self) -> &FlowCheckpoint {
        self.checkpoints
            .last()
            .expect("history holds the initial checkpoint")
    }

    pub fn diffeo_reports(&self, tolerance: f64) -> Vec<DiffeoReport> {
        self.checkpoints
            .iter()
            .map(|c| check_diffeo(&c.map, tolerance))
            .collect()
    }

    pub fn max_qx_discrepancy(&self) -> f64 {
        self.diffeo_reports(f64::INFINITY)
            .iter()
            .map(|r| r.max_discrepancy)
            .fold(0.0, f64::max)
    }

    pub fn min_qx(&self) -> f64 {
        self.diffeo_reports(f64::INFINITY)
            .iter()
            .map(|r| r.min_qx_fd.min(r.min_qx_formula))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn max_periodicity_defect(&self) -> f64 {
        self.checkpoints
            .iter()
            .map(|c| c.map.periodicity_defect())
            .fold(0.0, f64::max)
    }

    /// Largest `|ρ(t, −q) q_x − ρ₀(−x)|` over all checkpoints.
    pub fn max_identity_residual(&self) -> f64 {
        let reference = reflected(&self.rho0);
        self.checkpoints
            .iter()
            .flat_map(|c| {
                c.identity
                    .iter()
                    .zip(&reference)
                    .map(|(v, r)| (v - r).abs())
            })
            .fold(0.0, f64::max)
    }
}

/// Follows the flow along the stored states of a trajectory.
pub fn evolve_flow(trajectory: &Trajectory, options: FlowOptions) -> FlowHistory {
    let initial = trajectory.initial();
    let model = Model::with_invariants(initial.grid(), initial.params, trajectory.invariants);
    let mut tracker = FlowTracker::new(&model, initial, options);
    for state in &trajectory.states[1..] {
        tracker.advance(&model, state);
    }
    tracker.finish()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalCertificate {
    pub applicable: bool,
    pub reason: String,
    pub min_identity: Option<f64>,
    pub max_identity_drift: Option<f64>,
    pub qx_lower_bound: Option<f64>,
    pub degraded: bool,
}

/// Numerical witness of the no-breaking mechanism for `γ₁ = 2γ₂` and
/// `ρ₀` without zeros: `min |ρ(t, −q) q_x|` should stay at `min |ρ₀|`,
/// which keeps `q_x ≥ min |ρ₀| / ‖ρ(t)‖_∞` away from zero.
pub fn global_existence_certificate(
    params: Parameters,
    history: &FlowHistory,
) -> GlobalCertificate {
    let floor = history
        .rho0
        .values()
        .iter()
        .fold(f64::INFINITY, |m, v| m.min(v.abs()));
    let not_applicable = |reason: String| GlobalCertificate {
        applicable: false,
        reason,
        min_identity: None,
        max_identity_drift: None,
        qx_lower_bound: None,
        degraded: false,
    };
    if !params.is_balanced() {
        return not_applicable(format!(
            "gamma1 = {} differs from 2 gamma2 = {}",
            params.gamma1,
            2.0 * params.gamma2
        ));
    }
    if !(floor > 1e-12 * history.rho0.sup_norm().max(1.0)) {
        return not_applicable(format!(
            "rho0 vanishes somewhere (min |rho0| = {floor:.3e})"
        ));
    }

    let reference = reflected(&history.rho0);
    let mut min_identity = f64::INFINITY;
    let mut drift: f64 = 0.0;
    let mut qx_lower = f64::INFINITY;
    let mut qx_min = f64::INFINITY;
    for c in &history.checkpoints {
        for (v, r) in c.identity.iter().zip(&reference) {
            min_identity = min_identity.min(v.abs());
            drift = drift.max((v - r).abs());
        }
        qx_lower = qx_lower.min(floor / c.rho_linf);
        qx_min = qx_min.min(
            c.map
                .qx_formula()
                .iter()
                .copied()
                .fold(f64::INFINITY, f64::min),
        );
    }
    let degraded = (min_identity - floor).abs() > IDENTITY_TOLERANCE
        || qx_min < qx_lower * (1.0 - IDENTITY_TOLERANCE);
    GlobalCertificate {
        applicable: true,
        reason: if degraded {
            format!("identity minimum {min_identity:.6} vs min |rho0| = {floor:.6}")
        } else {
            "identity preserved".to_string()
        },
        min_identity: Some(min_identity),
        max_identity_drift: Some(drift),
        qx_lower_bound: Some(qx_lower),
        degraded,
    }
}
