//! Periodic collocation grid on the unit circle, discrete Fourier
//! representation and the Fourier multipliers used by the system.
//!
//! Coefficients follow the convention `f(x) = Σ_β f̂_β e^{2πiβx}` with
//! `f̂_β = (1/n) Σ_j f(x_j) e^{-2πiβx_j}`, stored in FFT order: slot `k`
//! holds `β = k` for `k ≤ n/2` and `β = k - n` otherwise.

use std::f64::consts::PI;
use std::fmt;
use std::ops::{Add, Mul, Sub};
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use thiserror::Error;

/// Tolerance used to reject coefficient arrays that are not the spectrum of
/// a real function.
pub const SYMMETRY_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectralError {
    #[error("grid size {0} must be a power of two and at least 16")]
    InvalidGridSize(usize),
    #[error("expected {expected} samples, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("coefficients are not conjugate-symmetric (defect {defect:.3e} at beta = {beta})")]
    NotConjugateSymmetric { beta: i64, defect: f64 },
    #[error("fields live on different grids ({0} vs {1} points)")]
    GridMismatch(usize, usize),
    #[error("wavenumber {0} is outside the representable band")]
    ModeOutOfBand(i64),
}

/// Equispaced collocation points `x_j = j/n` on 𝕊 = ℝ/ℤ together with the
/// FFT plans for that size.
#[derive(Clone)]
pub struct PeriodicGrid {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for PeriodicGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PeriodicGrid").field("n", &self.n).finish()
    }
}

impl PartialEq for PeriodicGrid {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n
    }
}

impl PeriodicGrid {
    pub fn new(n: usize) -> Result<Self, SpectralError> {
        if n < 16 || !n.is_power_of_two() {
            return Err(SpectralError::InvalidGridSize(n));
        }
        let mut planner = FftPlanner::new();
        Ok(Self {
            n,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn spacing(&self) -> f64 {
        1.0 / self.n as f64
    }

    pub fn point(&self, j: usize) -> f64 {
        j as f64 / self.n as f64
    }

    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n).map(move |j| self.point(j))
    }

    /// Largest representable wavenumber, `n/2` (the Nyquist mode).
    pub fn nyquist(&self) -> i64 {
        (self.n / 2) as i64
    }

    /// Wavenumber held by FFT slot `k`.
    pub fn wavenumber(&self, k: usize) -> i64 {
        if k <= self.n / 2 {
            k as i64
        } else {
            k as i64 - self.n as i64
        }
    }

    /// FFT slot holding wavenumber `beta`, if representable.
    pub fn slot(&self, beta: i64) -> Option<usize> {
        let half = self.nyquist();
        if beta > -half && beta <= half {
            Some(beta.rem_euclid(self.n as i64) as usize)
        } else {
            None
        }
    }

    /// Samples `f` at the collocation points.
    pub fn sample(&self, f: impl Fn(f64) -> f64) -> SpectralField {
        SpectralField {
            grid: self.clone(),
            values: self.points().map(f).collect(),
        }
    }

    pub fn zeros(&self) -> SpectralField {
        self.constant(0.0)
    }

    pub fn constant(&self, c: f64) -> SpectralField {
        SpectralField {
            grid: self.clone(),
            values: vec![c; self.n],
        }
    }

    fn fft_forward(&self, buf: &mut [Complex64]) {
        self.forward.process(buf);
        let scale = 1.0 / self.n as f64;
        buf.iter_mut().for_each(|c| *c *= scale);
    }

    fn fft_inverse(&self, buf: &mut [Complex64]) {
        self.inverse.process(buf);
    }
}

/// A real 1-periodic function stored by its collocation values.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    grid: PeriodicGrid,
    values: Vec<f64>,
}

impl SpectralField {
    pub fn from_values(grid: &PeriodicGrid, values: Vec<f64>) -> Result<Self, SpectralError> {
        if values.len() != grid.n() {
            return Err(SpectralError::LengthMismatch {
                expected: grid.n(),
                got: values.len(),
            });
        }
        Ok(Self {
            grid: grid.clone(),
            values,
        })
    }

    pub fn grid(&self) -> &PeriodicGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            grid: self.grid.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        debug_assert_eq!(self.grid, other.grid);
        Self {
            grid: self.grid.clone(),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn scale(&self, c: f64) -> Self {
        self.map(|v| c * v)
    }

    /// `self + c * other`
    pub fn axpy(&self, c: f64, other: &Self) -> Self {
        self.zip_with(other, |a, b| a + c * b)
    }

    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Grid maximum of `|f|`.
    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn spectrum(&self) -> Spectrum {
        forward_transform(self)
    }
}

impl Add for &SpectralField {
    type Output = SpectralField;
    fn add(self, rhs: Self) -> SpectralField {
        self.zip_with(rhs, |a, b| a + b)
    }
}

impl Sub for &SpectralField {
    type Output = SpectralField;
    fn sub(self, rhs: Self) -> SpectralField {
        self.zip_with(rhs, |a, b| a - b)
    }
}

impl Mul for &SpectralField {
    type Output = SpectralField;
    fn mul(self, rhs: Self) -> SpectralField {
        self.zip_with(rhs, |a, b| a * b)
    }
}

/// Fourier coefficients of a field, in FFT order.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    grid: PeriodicGrid,
    coeffs: Vec<Complex64>,
}

impl Spectrum {
    pub fn from_coefficients(
        grid: &PeriodicGrid,
        coeffs: Vec<Complex64>,
    ) -> Result<Self, SpectralError> {
        if coeffs.len() != grid.n() {
            return Err(SpectralError::LengthMismatch {
                expected: grid.n(),
                got: coeffs.len(),
            });
        }
        Ok(Self {
            grid: grid.clone(),
            coeffs,
        })
    }

    /// Builds a spectrum from `(β, f̂_β)` pairs; unspecified modes are zero.
    pub fn from_modes(
        grid: &PeriodicGrid,
        modes: impl IntoIterator<Item = (i64, Complex64)>,
    ) -> Result<Self, SpectralError> {
        let mut coeffs = vec![Complex64::new(0.0, 0.0); grid.n()];
        for (beta, c) in modes {
            let k = grid.slot(beta).ok_or(SpectralError::ModeOutOfBand(beta))?;
            coeffs[k] = c;
        }
        Ok(Self {
            grid: grid.clone(),
            coeffs,
        })
    }

    pub fn grid(&self) -> &PeriodicGrid {
        &self.grid
    }

    pub fn coefficients(&self) -> &[Complex64] {
        &self.coeffs
    }

    /// Coefficient of wavenumber `beta`; zero outside the representable band.
    pub fn coefficient(&self, beta: i64) -> Complex64 {
        self.grid
            .slot(beta)
            .map_or(Complex64::new(0.0, 0.0), |k| self.coeffs[k])
    }

    /// Largest defect `|f̂_{-β} - conj(f̂_β)|`, with the self-conjugate modes
    /// β = 0 and β = n/2 required to be real.
    pub fn symmetry_defect(&self) -> (i64, f64) {
        let n = self.grid.n();
        let mut worst = (0, 0.0);
        for k in 0..=n / 2 {
            let mirror = (n - k) % n;
            let defect = (self.coeffs[mirror] - self.coeffs[k].conj()).norm();
            if defect > worst.1 {
                worst = (k as i64, defect);
            }
        }
        worst
    }

    pub fn map_modes(&self, f: impl Fn(i64, Complex64) -> Complex64) -> Self {
        Self {
            grid: self.grid.clone(),
            coeffs: self
                .coeffs
                .iter()
                .enumerate()
                .map(|(k, &c)| f(self.grid.wavenumber(k), c))
                .collect(),
        }
    }

    /// Inverse transform without the symmetry check; the imaginary parts are
    /// discarded.
    pub fn to_field(&self) -> SpectralField {
        let mut buf = self.coeffs.clone();
        self.grid.fft_inverse(&mut buf);
        SpectralField {
            grid: self.grid.clone(),
            values: buf.into_iter().map(|c| c.re).collect(),
        }
    }

    /// Band-limited interpolant for repeated off-grid evaluation.
    pub fn interpolant(&self) -> Interpolant {
        let half = self.grid.n() / 2;
        Interpolant {
            coeffs: self.coeffs[..=half].to_vec(),
        }
    }
}

pub fn forward_transform(f: &SpectralField) -> Spectrum {
    let mut buf: Vec<Complex64> = f.values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    f.grid.fft_forward(&mut buf);
    Spectrum {
        grid: f.grid.clone(),
        coeffs: buf,
    }
}

/// Inverse transform; rejects spectra that do not describe a real field.
pub fn inverse_transform(spectrum: &Spectrum) -> Result<SpectralField, SpectralError> {
    let (beta, defect) = spectrum.symmetry_defect();
    let scale = spectrum.coeffs.iter().fold(1.0_f64, |m, c| m.max(c.norm()));
    if defect > SYMMETRY_TOLERANCE * scale {
        return Err(SpectralError::NotConjugateSymmetric { beta, defect });
    }
    Ok(spectrum.to_field())
}

/// Spatial mean `μ(f) = ∫_𝕊 f dx`, i.e. the zero mode.
pub fn mean(f: &SpectralField) -> f64 {
    f.values.iter().sum::<f64>() / f.values.len() as f64
}

/// A Fourier multiplier tabulated on one grid.
#[derive(Debug, Clone)]
pub struct Multiplier {
    name: String,
    factors: Vec<Complex64>,
}

impl Multiplier {
    pub fn from_symbol(
        grid: &PeriodicGrid,
        name: impl Into<String>,
        symbol: impl Fn(i64) -> Complex64,
    ) -> Self {
        Self {
            name: name.into(),
            factors: (0..grid.n()).map(|k| symbol(grid.wavenumber(k))).collect(),
        }
    }

    /// `(2πiβ)^order`, with the Nyquist mode dropped for odd orders.
    pub fn derivative(grid: &PeriodicGrid, order: u32) -> Self {
        let nyquist = grid.nyquist();
        Self::from_symbol(grid, format!("d^{order}/dx^{order}"), |beta| {
            if order % 2 == 1 && beta == nyquist {
                Complex64::new(0.0, 0.0)
            } else {
                Complex64::new(0.0, 2.0 * PI * beta as f64).powu(order)
            }
        })
    }

    /// `(μ - ∂ₓ²)^{-1}`: symbol `1 / (δ(β) + 4π²β²)`.
    pub fn helmholtz_inverse(grid: &PeriodicGrid) -> Self {
        Self::from_symbol(grid, "(mu - d_xx)^-1", |beta| {
            Complex64::new(helmholtz_symbol(beta), 0.0)
        })
    }

    /// `P(D) = ∂ₓ(μ - ∂ₓ²)^{-1}`, built as the product of the two symbols so
    /// the composition identity holds factor by factor.
    pub fn pd(grid: &PeriodicGrid) -> Self {
        let d = Self::derivative(grid, 1);
        let h = Self::helmholtz_inverse(grid);
        Self {
            name: "P(D)".into(),
            factors: d
                .factors
                .iter()
                .zip(&h.factors)
                .map(|(a, b)| a * b)
                .collect(),
        }
    }

    /// 2/3-rule projection: keeps `|β| ≤ n/3`.
    pub fn dealias(grid: &PeriodicGrid) -> Self {
        let cutoff = grid.n() as i64 / 3;
        Self::from_symbol(grid, "dealias", |beta| {
            if beta.abs() <= cutoff {
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn factor(&self, slot: usize) -> Complex64 {
        self.factors[slot]
    }

    pub fn apply_spectrum(&self, spectrum: &Spectrum) -> Spectrum {
        Spectrum {
            grid: spectrum.grid.clone(),
            coeffs: spectrum
                .coeffs
                .iter()
                .zip(&self.factors)
                .map(|(c, m)| c * m)
                .collect(),
        }
    }

    pub fn apply(&self, f: &SpectralField) -> SpectralField {
        self.apply_spectrum(&f.spectrum()).to_field()
    }

    /// Composition `self ∘ other` as a single multiplier.
    pub fn then(&self, other: &Multiplier) -> Multiplier {
        Multiplier {
            name: format!("{} . {}", other.name, self.name),
            factors: self
                .factors
                .iter()
                .zip(&other.factors)
                .map(|(a, b)| a * b)
                .collect(),
        }
    }
}

fn helmholtz_symbol(beta: i64) -> f64 {
    if beta == 0 {
        1.0
    } else {
        let w = 2.0 * PI * beta as f64;
        1.0 / (w * w)
    }
}

pub fn derivative(f: &SpectralField, order: u32) -> SpectralField {
    assert!(order >= 1, "derivative order must be at least 1");
    Multiplier::derivative(f.grid(), order).apply(f)
}

pub fn apply_pd(f: &SpectralField) -> SpectralField {
    Multiplier::pd(f.grid()).apply(f)
}

pub fn helmholtz_inverse(f: &SpectralField) -> SpectralField {
    Multiplier::helmholtz_inverse(f.grid()).apply(f)
}

/// Exact evaluation of the band-limited interpolant at an arbitrary point.
pub fn evaluate_offgrid(f: &SpectralField, y: f64) -> f64 {
    f.spectrum().interpolant().eval(y)
}

/// Real trigonometric interpolant `Σ_{|β|<n/2} f̂_β e^{2πiβy} + f̂_{n/2} cos(πny)`.
///
/// Holds the coefficients for `β = 0..=n/2`; the negative modes follow from
/// conjugate symmetry.
#[derive(Debug, Clone)]
pub struct Interpolant {
    coeffs: Vec<Complex64>,
}

impl Interpolant {
    pub fn eval(&self, y: f64) -> f64 {
        self.eval_with_slope(y).0
    }

    /// Value and first derivative at `y`. The Nyquist mode contributes to the
    /// value only, matching the odd-derivative convention of [`Multiplier`].
    pub fn eval_with_slope(&self, y: f64) -> (f64, f64) {
        let half = self.coeffs.len() - 1;
        let theta = 2.0 * PI * y.rem_euclid(1.0);
        let z = Complex64::new(theta.cos(), theta.sin());
        let mut power = z;
        let mut value = self.coeffs[0].re;
        let mut slope = 0.0;
        for (beta, c) in self.coeffs.iter().enumerate().take(half).skip(1) {
            let term = c * power;
            value += 2.0 * term.re;
            // d/dy of 2 Re(c z^β) = 2 Re(2πiβ c z^β) = -4πβ Im(c z^β)
            slope -= 4.0 * PI * beta as f64 * term.im;
            power *= z;
        }
        value += self.coeffs[half].re * (half as f64 * theta).cos();
        (value, slope)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize) -> PeriodicGrid {
        PeriodicGrid::new(n).unwrap()
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    fn max_diff(a: &SpectralField, b: &SpectralField) -> f64 {
        a.values()
            .iter()
            .zip(b.values())
            .fold(0.0, |m, (x, y)| m.max((x - y).abs()))
    }

    #[test]
    fn rejects_bad_grid_sizes() {
        assert_eq!(
            PeriodicGrid::new(100).unwrap_err(),
            SpectralError::InvalidGridSize(100)
        );
        assert!(PeriodicGrid::new(8).is_err());
        assert!(PeriodicGrid::new(16).is_ok());
    }

    #[test]
    fn wavenumber_and_slot_are_inverse() {
        let g = grid(32);
        for k in 0..32 {
            assert_eq!(g.slot(g.wavenumber(k)), Some(k));
        }
        assert_eq!(g.wavenumber(16), 16);
        assert_eq!(g.wavenumber(17), -15);
        assert_eq!(g.slot(-16), None);
        assert_eq!(g.slot(17), None);
    }

    #[test]
    fn constant_transform() {
        let g = grid(32);
        let s = forward_transform(&g.constant(1.0));
        assert!(close(s.coefficient(0).re, 1.0, 1e-15));
        for beta in 1..=16 {
            assert!(s.coefficient(beta).norm() < 1e-15);
            assert!(s.coefficient(-beta).norm() < 1e-15);
        }
    }

    #[test]
    fn sine_transform() {
        let g = grid(32);
        let s = forward_transform(&g.sample(|x| (2.0 * PI * x).sin()));
        let expected = Complex64::new(0.0, -0.5); // 1/(2i)
        assert!((s.coefficient(1) - expected).norm() < 1e-15);
        assert!((s.coefficient(-1) + expected).norm() < 1e-15);
        for beta in 2..=16 {
            assert!(s.coefficient(beta).norm() < 1e-15);
        }
    }

    #[test]
    fn inverse_of_single_modes() {
        let g = grid(32);
        let c =
            inverse_transform(&Spectrum::from_modes(&g, [(0, Complex64::new(2.5, 0.0))]).unwrap())
                .unwrap();
        assert!(max_diff(&c, &g.constant(2.5)) < 1e-15);
        let half = Complex64::new(0.5, 0.0);
        let cos =
            inverse_transform(&Spectrum::from_modes(&g, [(1, half), (-1, half)]).unwrap()).unwrap();
        assert!(max_diff(&cos, &g.sample(|x| (2.0 * PI * x).cos())) < 1e-15);
    }

    #[test]
    fn inverse_rejects_asymmetric_coefficients() {
        let g = grid(32);
        let s = Spectrum::from_modes(&g, [(3, Complex64::new(1.0, 0.0))]).unwrap();
        match inverse_transform(&s) {
            Err(SpectralError::NotConjugateSymmetric { beta, .. }) => assert_eq!(beta.abs(), 3),
            other => panic!("expected symmetry error, got {other:?}"),
        }
        let imaginary_mean = Spectrum::from_modes(&g, [(0, Complex64::new(0.0, 1e-3))]).unwrap();
        assert!(inverse_transform(&imaginary_mean).is_err());
    }

    #[test]
    fn derivative_examples() {
        let g = grid(64);
        let d = derivative(&g.sample(|x| (2.0 * PI * x).sin()), 1);
        assert!(max_diff(&d, &g.sample(|x| 2.0 * PI * (2.0 * PI * x).cos())) < 1e-12);
        assert!(derivative(&g.constant(3.0), 1).sup_norm() < 1e-14);
        assert!(derivative(&g.constant(3.0), 4).sup_norm() < 1e-14);
        let d2 = derivative(&g.sample(|x| (4.0 * PI * x).cos()), 2);
        let expected = g.sample(|x| -16.0 * PI * PI * (4.0 * PI * x).cos());
        assert!(max_diff(&d2, &expected) < 1e-10);
    }

    #[test]
    fn odd_derivative_drops_nyquist() {
        let g = grid(16);
        // cos(16πx) is the Nyquist mode on 16 points
        let f = g.sample(|x| (16.0 * PI * x).cos());
        assert!(derivative(&f, 1).sup_norm() < 1e-12);
        assert!(derivative(&f, 2).sup_norm() > 1.0);
    }

    #[test]
    fn mean_examples() {
        let g = grid(32);
        assert!(close(mean(&g.constant(-1.25)), -1.25, 1e-15));
        assert!(mean(&g.sample(|x| (2.0 * PI * x).sin())).abs() < 1e-16);
        assert!(close(
            mean(&g.sample(|x| 2.0 + (4.0 * PI * x).cos())),
            2.0,
            1e-15
        ));
    }

    #[test]
    fn pd_of_constant_vanishes() {
        let g = grid(32);
        assert!(apply_pd(&g.constant(7.0)).sup_norm() < 1e-15);
    }

    #[test]
    fn pd_of_sine_matches_helmholtz_route() {
        // ∂ₓ(μ - ∂ₓ²)^{-1} sin(2πx) = ∂ₓ sin(2πx)/(4π²) = cos(2πx)/(2π)
        let g = grid(64);
        let p = apply_pd(&g.sample(|x| (2.0 * PI * x).sin()));
        assert!(max_diff(&p, &g.sample(|x| (2.0 * PI * x).cos() / (2.0 * PI))) < 1e-15);
    }

    #[test]
    fn helmholtz_examples() {
        let g = grid(64);
        assert!(max_diff(&helmholtz_inverse(&g.constant(1.0)), &g.constant(1.0)) < 1e-15);
        let h = helmholtz_inverse(&g.sample(|x| (2.0 * PI * x).cos()));
        let expected = g.sample(|x| (2.0 * PI * x).cos() / (4.0 * PI * PI));
        assert!(max_diff(&h, &expected) < 1e-15);
    }

    #[test]
    fn offgrid_examples() {
        let g = grid(32);
        let s = g.sample(|x| (2.0 * PI * x).sin());
        assert!(close(evaluate_offgrid(&s, 0.25), 1.0, 1e-14));
        let c = g.sample(|x| (2.0 * PI * x).cos());
        assert!(close(evaluate_offgrid(&c, 1.3), (2.6 * PI).cos(), 1e-14));
        assert!(close(evaluate_offgrid(&c, -0.7), (2.6 * PI).cos(), 1e-14));
    }

    #[test]
    fn offgrid_interpolates_grid_values_including_nyquist() {
        let g = grid(16);
        let f = g.sample(|x| 0.3 + (2.0 * PI * x).sin() + 0.2 * (16.0 * PI * x).cos());
        let interp = f.spectrum().interpolant();
        for (j, x) in g.points().enumerate() {
            assert!(close(interp.eval(x), f.values()[j], 1e-13));
        }
    }

    #[test]
    fn offgrid_slope_matches_spectral_derivative() {
        let g = grid(32);
        let f = g.sample(|x| (2.0 * PI * x).sin() + 0.5 * (6.0 * PI * x).cos());
        let interp = f.spectrum().interpolant();
        for y in [0.013, 0.4, 0.77] {
            let (_, slope) = interp.eval_with_slope(y);
            let exact = 2.0 * PI * (2.0 * PI * y).cos() - 3.0 * PI * (6.0 * PI * y).sin();
            assert!(close(slope, exact, 1e-12));
        }
    }
}
