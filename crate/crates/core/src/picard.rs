//! Successive approximations by linear transport solves:
//!
//! ```text
//! ∂ₜuⁿ⁺¹ − (uⁿ + γ₁) ∂ₓuⁿ⁺¹ = P(D)(2μ₀ⁿ⁺¹uⁿ + ½(∂ₓuⁿ)² + ½(ρⁿ)²)
//! ∂ₜρⁿ⁺¹ − (uⁿ + 2γ₂) ∂ₓρⁿ⁺¹ = ρⁿ ∂ₓuⁿ
//! uⁿ⁺¹(0) = Sₙ₊₁u₀,  ρⁿ⁺¹(0) = Sₙ₊₁ρ₀
//! ```
//!
//! starting from `u⁰ = ρ⁰ = 0`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::besov::{sobolev_norm, DyadicCutoffs};
use crate::dynamics::{run_observed, Parameters, RunControl, State};
use crate::spectral::{mean, Multiplier, PeriodicGrid, SpectralField};

/// Samples per horizon on the iterate time mesh.
pub const MESH_SAMPLES: usize = 128;
/// Ratio bound for `h_{n+1}/h_n` once `n ≥ RATIO_FROM`.
pub const RATIO_BOUND: f64 = 0.9;
pub const RATIO_FROM: usize = 4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PicardError {
    #[error("n_max must be at least 2, got {0}")]
    TooFewIterations(usize),
    #[error("T_iter must be positive, got {0}")]
    InvalidHorizon(f64),
    #[error("time series differ in mesh or grid")]
    MeshMismatch,
    #[error("data live on a different grid")]
    GridMismatch,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationConfig {
    pub n_max: usize,
    /// Sobolev index of the `u` norms; `ρ` is measured one index lower.
    pub s: f64,
    pub t_iter: f64,
    pub params: Parameters,
    pub mesh_samples: usize,
}

impl IterationConfig {
    pub fn new(n_max: usize, t_iter: f64, params: Parameters) -> Self {
        Self {
            n_max,
            s: 2.0,
            t_iter,
            params,
            mesh_samples: MESH_SAMPLES,
        }
    }

    fn validate(&self) -> Result<(), PicardError> {
        if self.n_max < 2 {
            return Err(PicardError::TooFewIterations(self.n_max));
        }
        if !(self.t_iter > 0.0) {
            return Err(PicardError::InvalidHorizon(self.t_iter));
        }
        Ok(())
    }

    pub fn mesh(&self) -> Vec<f64> {
        let m = self.mesh_samples.max(1);
        (0..=m).map(|k| self.t_iter * k as f64 / m as f64).collect()
    }
}

/// Fields sampled on a time mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    pub times: Vec<f64>,
    pub fields: Vec<SpectralField>,
}

impl TimeSeries {
    pub fn constant_in_time(times: &[f64], f: &SpectralField) -> Self {
        Self {
            times: times.to_vec(),
            fields: vec![f.clone(); times.len()],
        }
    }

    pub fn from_fn(times: &[f64], f: impl Fn(f64) -> SpectralField) -> Self {
        Self {
            times: times.to_vec(),
            fields: times.iter().map(|&t| f(t)).collect(),
        }
    }

    pub fn map(&self, f: impl Fn(&SpectralField) -> SpectralField) -> Self {
        Self {
            times: self.times.clone(),
            fields: self.fields.iter().map(f).collect(),
        }
    }

    fn compatible(&self, other: &Self) -> bool {
        self.times == other.times
            && self.fields.len() == self.times.len()
            && other.fields.len() == other.times.len()
            && self.fields.first().map(|f| f.grid()) == other.fields.first().map(|f| f.grid())
    }
}

/// Semi-Lagrangian solution of `∂ₜf − a ∂ₓf = g`, `f(0) = f0`.
///
/// On each mesh interval the characteristic `dX/dτ = −a(τ, X)` through every
/// grid point is traced back to the previous mesh time by RK4 with `a`
/// linear in time; the previous solution is evaluated spectrally at the
/// foot and the forcing integral along the path is integrated by the same
/// RK4.
pub fn transport_solve(
    coeff: &TimeSeries,
    forcing: &TimeSeries,
    f0: &SpectralField,
) -> Result<TimeSeries, PicardError> {
    if !coeff.compatible(forcing) || coeff.times.is_empty() {
        return Err(PicardError::MeshMismatch);
    }
    if coeff.fields[0].grid() != f0.grid() {
        return Err(PicardError::GridMismatch);
    }
    let grid = f0.grid().clone();
    let a: Vec<_> = coeff
        .fields
        .iter()
        .map(|f| f.spectrum().interpolant())
        .collect();
    let g: Vec<_> = forcing
        .fields
        .iter()
        .map(|f| f.spectrum().interpolant())
        .collect();
    let mut out = vec![f0.clone()];
    for m in 0..coeff.times.len() - 1 {
        let dt = coeff.times[m + 1] - coeff.times[m];
        let prev = out[m].spectrum().interpolant();
        // w is the weight of the later mesh time.
        let eval = |w: f64, x: f64| {
            (
                (1.0 - w) * a[m].eval(x) + w * a[m + 1].eval(x),
                (1.0 - w) * g[m].eval(x) + w * g[m + 1].eval(x),
            )
        };
        let values: Vec<f64> = (0..grid.n())
            .into_par_iter()
            .map(|j| {
                let x = grid.point(j);
                let k1 = eval(1.0, x);
                let k2 = eval(0.5, x + 0.5 * dt * k1.0);
                let k3 = eval(0.5, x + 0.5 * dt * k2.0);
                let k4 = eval(0.0, x + dt * k3.0);
                let foot = x + dt / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0);
                let integral = dt / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1);
                prev.eval(foot) + integral
            })
            .collect();
        out.push(SpectralField::from_values(&grid, values).expect("grid length"));
    }
    Ok(TimeSeries {
        times: coeff.times.clone(),
        fields: out,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterateRecord {
    pub n: usize,
    pub u: TimeSeries,
    pub rho: TimeSeries,
    /// `μ₀ⁿ`, the mean of the truncated data.
    pub mu0: f64,
    pub norms_u: Vec<f64>,
    pub norms_rho: Vec<f64>,
}

impl IterateRecord {
    fn new(n: usize, u: TimeSeries, rho: TimeSeries, mu0: f64, s: f64) -> Self {
        let norms_u = u.fields.iter().map(|f| sobolev_norm(f, s)).collect();
        let norms_rho = rho
            .fields
            .iter()
            .map(|f| sobolev_norm(f, s - 1.0))
            .collect();
        Self {
            n,
            u,
            rho,
            mu0,
            norms_u,
            norms_rho,
        }
    }

    /// The starting iterate `u⁰ = ρ⁰ = 0`.
    pub fn zero(grid: &PeriodicGrid, times: &[f64], s: f64) -> Self {
        let z = TimeSeries::constant_in_time(times, &grid.zeros());
        Self::new(0, z.clone(), z, 0.0, s)
    }

    /// `sup_t lⁿ(t)` with `lⁿ = ‖uⁿ‖_{H^s} + ‖ρⁿ‖_{H^{s−1}}`.
    pub fn sup_l(&self) -> f64 {
        self.norms_u
            .iter()
            .zip(&self.norms_rho)
            .map(|(a, b)| a + b)
            .fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.norms_u
            .iter()
            .chain(&self.norms_rho)
            .all(|v| v.is_finite())
    }
}

/// `sup_t ‖u − v‖_{H^{s−1}} + ‖ρ − σ‖_{H^{s−2}}` over a shared mesh.
pub fn distance(
    u: &TimeSeries,
    rho: &TimeSeries,
    v: &TimeSeries,
    sigma: &TimeSeries,
    s: f64,
) -> f64 {
    u.fields
        .iter()
        .zip(&v.fields)
        .zip(rho.fields.iter().zip(&sigma.fields))
        .map(|((a, b), (c, d))| sobolev_norm(&(a - b), s - 1.0) + sobolev_norm(&(c - d), s - 2.0))
        .fold(0.0, f64::max)
}

/// Produces iterate `n + 1` from iterate `n` and the untruncated data.
pub fn picard_step(
    prev: &IterateRecord,
    u0: &SpectralField,
    rho0: &SpectralField,
    cfg: &IterationConfig,
    cutoffs: &DyadicCutoffs,
) -> Result<IterateRecord, PicardError> {
    let grid = u0.grid().clone();
    let q = prev.n as i32 + 1;
    let u_start = cutoffs.low_pass(q, u0);
    let rho_start = cutoffs.low_pass(q, rho0);
    let mu0 = mean(&u_start);
    let Parameters { gamma1, gamma2 } = cfg.params;

    let d1 = Multiplier::derivative(&grid, 1);
    let dealias = Multiplier::dealias(&grid);
    let pd = dealias.then(&Multiplier::pd(&grid));
    let ux: Vec<SpectralField> = prev.u.fields.iter().map(|u| d1.apply(u)).collect();

    let coeff_u = prev.u.map(|u| u.map(|v| v + gamma1));
    let coeff_rho = prev.u.map(|u| u.map(|v| v + 2.0 * gamma2));
    let force_u = TimeSeries {
        times: prev.u.times.clone(),
        fields: (0..ux.len())
            .map(|k| {
                let (u, r, ux) = (&prev.u.fields[k], &prev.rho.fields[k], &ux[k]);
                let inner = SpectralField::from_values(
                    &grid,
                    (0..grid.n())
                        .map(|j| {
                            let (u, r, ux) = (u.values()[j], r.values()[j], ux.values()[j]);
                            2.0 * mu0 * u + 0.5 * ux * ux + 0.5 * r * r
                        })
                        .collect(),
                )
                .expect("grid length");
                pd.apply(&inner)
            })
            .collect(),
    };
    let force_rho = TimeSeries {
        times: prev.u.times.clone(),
        fields: (0..ux.len())
            .map(|k| dealias.apply(&(&prev.rho.fields[k] * &ux[k])))
            .collect(),
    };

    let (u, rho) = rayon::join(
        || transport_solve(&coeff_u, &force_u, &u_start),
        || transport_solve(&coeff_rho, &force_rho, &rho_start),
    );
    Ok(IterateRecord::new(prev.n + 1, u?, rho?, mu0, cfg.s))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationRow {
    pub n: usize,
    pub sup_l_n: f64,
    /// `h_n`, the distance between iterates `n + 1` and `n`.
    pub h_n: f64,
    /// `h_n / h_{n−1}`; absent for `n = 0` or when `h_{n−1}` is at noise level.
    pub ratio: Option<f64>,
    pub mu0_n: f64,
}

#[derive(Debug, Clone)]
pub struct IterationOutcome {
    pub config: IterationConfig,
    pub rows: Vec<IterationRow>,
    pub last: IterateRecord,
    pub divergence: Option<String>,
    pub converged: bool,
}

impl IterationOutcome {
    pub fn n_used(&self) -> usize {
        self.last.n
    }

    pub fn max_ratio_from(&self, n: usize) -> Option<f64> {
        self.rows
            .iter()
            .filter(|r| r.n >= n)
            .filter_map(|r| r.ratio)
            .reduce(f64::max)
    }
}

/// `h_n` values below this multiple of the largest norm envelope are treated
/// as converged to rounding level and excluded from the ratio test.
pub const NOISE_FLOOR: f64 = 1e-11;

/// Runs `n_max` Picard steps from the zero iterate.
pub fn run_iteration(
    cfg: &IterationConfig,
    u0: &SpectralField,
    rho0: &SpectralField,
) -> Result<IterationOutcome, PicardError> {
    run_iteration_observed(cfg, u0, rho0, |_| {})
}

/// As [`run_iteration`], handing every iterate (the zero iterate included)
/// to `observer` before it is dropped.
pub fn run_iteration_observed(
    cfg: &IterationConfig,
    u0: &SpectralField,
    rho0: &SpectralField,
    mut observer: impl FnMut(&IterateRecord),
) -> Result<IterationOutcome, PicardError> {
    cfg.validate()?;
    if u0.grid() != rho0.grid() {
        return Err(PicardError::GridMismatch);
    }
    let cutoffs = DyadicCutoffs::new();
    let times = cfg.mesh();
    let mut prev = IterateRecord::zero(u0.grid(), &times, cfg.s);
    observer(&prev);
    let mut rows: Vec<IterationRow> = Vec::with_capacity(cfg.n_max);
    let mut divergence = None;
    let mut scale: f64 = 0.0;
    for _ in 0..cfg.n_max {
        let next = picard_step(&prev, u0, rho0, cfg, &cutoffs)?;
        observer(&next);
        let h = distance(&next.u, &next.rho, &prev.u, &prev.rho, cfg.s);
        scale = scale.max(prev.sup_l()).max(next.sup_l());
        let floor = NOISE_FLOOR * scale.max(1.0);
        let ratio = rows
            .last()
            .filter(|r| r.h_n > floor && h.is_finite())
            .map(|r| h / r.h_n);
        rows.push(IterationRow {
            n: prev.n,
            sup_l_n: prev.sup_l(),
            h_n: h,
            ratio,
            mu0_n: prev.mu0,
        });
        if !next.is_finite() {
            divergence = Some(format!(
                "iterate {} is not finite; shrink T_iter = {}",
                next.n, cfg.t_iter
            ));
            prev = next;
            break;
        }
        if prev.n >= 1 && next.sup_l() > 2.0 * prev.sup_l() {
            divergence = Some(format!(
                "norm envelope doubled from {:.3e} to {:.3e} at n = {}; shrink T_iter = {}",
                prev.sup_l(),
                next.sup_l(),
                next.n,
                cfg.t_iter
            ));
            prev = next;
            break;
        }
        prev = next;
    }
    let ratios_ok = rows
        .iter()
        .filter(|r| r.n >= RATIO_FROM)
        .filter_map(|r| r.ratio)
        .all(|r| r <= RATIO_BOUND);
    Ok(IterationOutcome {
        config: *cfg,
        converged: divergence.is_none() && ratios_ok,
        rows,
        last: prev,
        divergence,
    })
}

/// Halves `cfg.t_iter` (at most `max_halvings` times) until the iteration
/// converges. Returns the last attempt either way.
pub fn run_adaptive(
    cfg: &IterationConfig,
    u0: &SpectralField,
    rho0: &SpectralField,
    max_halvings: usize,
) -> Result<IterationOutcome, PicardError> {
    let mut cfg = *cfg;
    let mut outcome = run_iteration(&cfg, u0, rho0)?;
    for _ in 0..max_halvings {
        if outcome.converged {
            break;
        }
        cfg.t_iter *= 0.5;
        outcome = run_iteration(&cfg, u0, rho0)?;
    }
    Ok(outcome)
}

/// Direct RK4 solution sampled on `times`, with steps that divide the mesh
/// spacing.
pub fn direct_on_mesh(initial: &State, times: &[f64], steps_per_interval: usize) -> Vec<State> {
    let t_end = *times.last().expect("non-empty mesh");
    let spacing = times.get(1).map_or(t_end, |t| t - times[0]);
    let control = RunControl {
        dt: spacing / steps_per_interval.max(1) as f64,
        diagnostics_every: usize::MAX,
        sample_every: usize::MAX,
        ..RunControl::default()
    };
    let mut out = Vec::with_capacity(times.len());
    let tol = 1e-9 * spacing;
    let _ = run_observed(initial, t_end, &control, |_, s| {
        if let Some(&t) = times.get(out.len()) {
            if (s.t - t).abs() <= tol {
                out.push(s.clone());
            }
        }
    });
    out
}

/// `sup` over the mesh of `‖uⁿ − u‖_{H^{s−1}} + ‖ρⁿ − ρ‖_{H^{s−2}}` against
/// direct states on the same mesh; infinite when the direct run stopped
/// short of the horizon.
pub fn compare_to_direct(record: &IterateRecord, direct: &[State], s: f64) -> f64 {
    if direct.len() < record.u.times.len() {
        return f64::INFINITY;
    }
    let du = TimeSeries {
        times: record.u.times.clone(),
        fields: direct
            .iter()
            .map(|d| d.u.clone())
            .take(record.u.times.len())
            .collect(),
    };
    let drho = TimeSeries {
        times: record.u.times.clone(),
        fields: direct
            .iter()
            .map(|d| d.rho.clone())
            .take(record.u.times.len())
            .collect(),
    };
    distance(&record.u, &record.rho, &du, &drho, s)
}
