#![allow(dead_code)]

use muhs_core::spectral::{PeriodicGrid, SpectralField, Spectrum};
use num_complex::Complex64;
use proptest::prelude::*;

/// Real trig polynomial with the given coefficients for `β = 1, 2, ...` and
/// mean `mean`.
pub fn trig_polynomial(grid: &PeriodicGrid, mean: f64, coeffs: &[(f64, f64)]) -> SpectralField {
    let mut modes = vec![(0, Complex64::new(mean, 0.0))];
    for (i, &(re, im)) in coeffs.iter().enumerate() {
        let beta = i as i64 + 1;
        modes.push((beta, Complex64::new(re, im)));
        modes.push((-beta, Complex64::new(re, -im)));
    }
    Spectrum::from_modes(grid, modes).unwrap().to_field()
}

/// Coefficients for `β = 1..=degree` with amplitudes decaying like `β^{-2}`.
pub fn coefficients(degree: usize) -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 1..=degree).prop_map(|v| {
        v.into_iter()
            .enumerate()
            .map(|(i, (a, b))| {
                let w = 1.0 / ((i + 1) * (i + 1)) as f64;
                (a * w, b * w)
            })
            .collect()
    })
}
