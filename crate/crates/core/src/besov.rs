//! Littlewood–Paley blocks on the circle and the Besov / Sobolev norms built
//! from them.
//!
//! The cutoff pair is fixed: `χ` equals 1 on `|ξ| ≤ 3/4`, vanishes for
//! `|ξ| ≥ 4/3`, and decays in between through a smooth step obtained by
//! integrating the bump `exp(-1/(1-t²))`. The shell function is
//! `φ(ξ) = χ(ξ/2) - χ(ξ)`, so `χ + Σ_q φ(2^{-q}·)` telescopes to one.

use std::f64::consts::PI;

use num_complex::Complex64;
use thiserror::Error;

use crate::spectral::{Multiplier, PeriodicGrid, SpectralField};

const PLATEAU: f64 = 0.75;
const SUPPORT: f64 = 4.0 / 3.0;
const TABLE_CELLS: usize = 1024;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BesovError {
    #[error("integrability exponent p = {0} must lie in [1, inf]")]
    InvalidP(f64),
    #[error("summation exponent r = {0} must lie in [1, inf]")]
    InvalidR(f64),
    #[error("regularity s = {0} must be finite")]
    InvalidS(f64),
}

/// Regularity / integrability / summation triple `(s, p, r)`; `p` and `r`
/// may be `f64::INFINITY`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BesovIndex {
    pub s: f64,
    pub p: f64,
    pub r: f64,
}

impl BesovIndex {
    pub fn new(s: f64, p: f64, r: f64) -> Result<Self, BesovError> {
        if !s.is_finite() {
            return Err(BesovError::InvalidS(s));
        }
        if p.is_nan() || p < 1.0 {
            return Err(BesovError::InvalidP(p));
        }
        if r.is_nan() || r < 1.0 {
            return Err(BesovError::InvalidR(r));
        }
        Ok(Self { s, p, r })
    }

    /// `H^s = B^s_{2,2}`.
    pub fn sobolev(s: f64) -> Self {
        Self { s, p: 2.0, r: 2.0 }
    }
}

/// The `χ`/`φ` partition of unity.
#[derive(Debug, Clone)]
pub struct DyadicCutoffs {
    // cumulative integral of the bump at the table nodes, normalised to [0, 1]
    step: Vec<f64>,
    bump_norm: f64,
}

impl Default for DyadicCutoffs {
    fn default() -> Self {
        Self::new()
    }
}

fn bump(t: f64) -> f64 {
    if t.abs() >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - t * t)).exp()
    }
}

// 5-point Gauss–Legendre on [-1, 1]
const GL_NODES: [f64; 5] = [
    0.0,
    -0.538_469_310_105_683_1,
    0.538_469_310_105_683_1,
    -0.906_179_845_938_664,
    0.906_179_845_938_664,
];
const GL_WEIGHTS: [f64; 5] = [
    0.568_888_888_888_888_9,
    0.478_628_670_499_366_5,
    0.478_628_670_499_366_5,
    0.236_926_885_056_189_1,
    0.236_926_885_056_189_1,
];

fn integrate_bump(a: f64, b: f64) -> f64 {
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    GL_NODES
        .iter()
        .zip(GL_WEIGHTS)
        .map(|(x, w)| w * bump(mid + half * x))
        .sum::<f64>()
        * half
}

/// `make_cutoffs`: the fixed construction described in the module docs.
pub fn make_cutoffs() -> DyadicCutoffs {
    DyadicCutoffs::new()
}

impl DyadicCutoffs {
    pub fn new() -> Self {
        let h = 2.0 / TABLE_CELLS as f64;
        let mut cumulative = Vec::with_capacity(TABLE_CELLS + 1);
        let mut acc = 0.0;
        cumulative.push(0.0);
        for i in 0..TABLE_CELLS {
            let a = -1.0 + i as f64 * h;
            acc += integrate_bump(a, a + h);
            cumulative.push(acc);
        }
        let total = acc;
        let step = cumulative.into_iter().map(|c| c / total).collect();
        Self {
            step,
            bump_norm: total,
        }
    }

    /// Smooth step rising from 0 at `t = -1` to 1 at `t = 1`, evaluated by
    /// cubic Hermite interpolation of the tabulated integral with the exact
    /// derivative `bump / ∫bump`.
    fn smooth_step(&self, t: f64) -> f64 {
        if t <= -1.0 {
            return 0.0;
        }
        if t >= 1.0 {
            return 1.0;
        }
        let h = 2.0 / TABLE_CELLS as f64;
        let pos = (t + 1.0) / h;
        let i = (pos.floor() as usize).min(TABLE_CELLS - 1);
        let s = pos - i as f64;
        let x0 = -1.0 + i as f64 * h;
        let (y0, y1) = (self.step[i], self.step[i + 1]);
        let d0 = bump(x0) / self.bump_norm * h;
        let d1 = bump(x0 + h) / self.bump_norm * h;
        let s2 = s * s;
        let s3 = s2 * s;
        let v = (2.0 * s3 - 3.0 * s2 + 1.0) * y0
            + (s3 - 2.0 * s2 + s) * d0
            + (-2.0 * s3 + 3.0 * s2) * y1
            + (s3 - s2) * d1;
        v.clamp(0.0, 1.0)
    }

    /// Low-frequency cutoff, supported in `|ξ| ≤ 4/3`.
    pub fn chi(&self, xi: f64) -> f64 {
        let a = xi.abs();
        if a <= PLATEAU {
            1.0
        } else if a >= SUPPORT {
            0.0
        } else {
            let t = 2.0 * (a - PLATEAU) / (SUPPORT - PLATEAU) - 1.0;
            1.0 - self.smooth_step(t)
        }
    }

    /// Shell cutoff, supported in `3/4 ≤ |ξ| ≤ 8/3`.
    pub fn phi(&self, xi: f64) -> f64 {
        self.chi(0.5 * xi) - self.chi(xi)
    }

    /// Symbol of `Δ_q` at wavenumber `beta`.
    pub fn block_symbol(&self, q: i32, beta: i64) -> f64 {
        match q {
            q if q < -1 => 0.0,
            -1 => self.chi(beta as f64),
            q => self.phi(beta as f64 * (-q as f64).exp2()),
        }
    }

    /// Symbol of `S_q = Σ_{p ≤ q-1} Δ_p`, i.e. `χ(2^{-q}β)` after telescoping.
    pub fn low_pass_symbol(&self, q: i32, beta: i64) -> f64 {
        if q < 0 {
            0.0
        } else {
            self.chi(beta as f64 * (-q as f64).exp2())
        }
    }

    pub fn block(&self, q: i32, f: &SpectralField) -> SpectralField {
        self.real_multiplier(f, |beta| self.block_symbol(q, beta))
    }

    pub fn low_pass(&self, q: i32, f: &SpectralField) -> SpectralField {
        self.real_multiplier(f, |beta| self.low_pass_symbol(q, beta))
    }

    fn real_multiplier(&self, f: &SpectralField, symbol: impl Fn(i64) -> f64) -> SpectralField {
        Multiplier::from_symbol(f.grid(), "littlewood-paley", |beta| {
            Complex64::new(symbol(beta), 0.0)
        })
        .apply(f)
    }

    /// `‖Δ_q f‖_{L^p}` for `q = -1..=max_block_index`.
    pub fn block_norms(&self, f: &SpectralField, p: f64) -> Vec<f64> {
        (-1..=max_block_index(f.grid()))
            .map(|q| lp_norm(&self.block(q, f), p))
            .collect()
    }

    pub fn besov_norm(&self, f: &SpectralField, idx: BesovIndex) -> f64 {
        let weighted = self
            .block_norms(f, idx.p)
            .into_iter()
            .enumerate()
            .map(|(i, norm)| (idx.s * (i as f64 - 1.0)).exp2() * norm);
        if idx.r.is_infinite() {
            weighted.fold(0.0, f64::max)
        } else {
            weighted
                .map(|w| w.powf(idx.r))
                .sum::<f64>()
                .powf(1.0 / idx.r)
        }
    }
}

/// Highest dyadic block that can intersect the band `|β| ≤ n/2`.
pub fn max_block_index(grid: &PeriodicGrid) -> i32 {
    (grid.n() / 2).trailing_zeros() as i32 + 1
}

/// Grid quadrature of the `L^p(𝕊)` norm; `p = ∞` gives the grid maximum.
pub fn lp_norm(f: &SpectralField, p: f64) -> f64 {
    if p.is_infinite() {
        return f.sup_norm();
    }
    let n = f.values().len() as f64;
    if p == 2.0 {
        return (f.values().iter().map(|v| v * v).sum::<f64>() / n).sqrt();
    }
    (f.values().iter().map(|v| v.abs().powf(p)).sum::<f64>() / n).powf(1.0 / p)
}

/// `(Σ_β (1 + 4π²β²)^s |f̂_β|²)^{1/2}`.
pub fn sobolev_norm(f: &SpectralField, s: f64) -> f64 {
    let spectrum = f.spectrum();
    let grid = f.grid();
    spectrum
        .coefficients()
        .iter()
        .enumerate()
        .map(|(k, c)| {
            let w = 2.0 * PI * grid.wavenumber(k) as f64;
            (1.0 + w * w).powf(s) * c.norm_sqr()
        })
        .sum::<f64>()
        .sqrt()
}
