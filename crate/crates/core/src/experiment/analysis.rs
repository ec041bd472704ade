//! Sinusoid fits for fringe records.

use std::f64::consts::{PI, TAU};

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// y ≈ mean + amplitude·cos(ω·t + phase).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SinusoidFit {
    pub mean: f64,
    pub amplitude: f64,
    pub phase_rad: f64,
    /// Sum of squared residuals.
    pub residual: f64,
}

impl SinusoidFit {
    /// amplitude/mean; `None` for a dark channel.
    pub fn visibility(&self) -> Option<f64> {
        (self.mean > 1e-300).then(|| self.amplitude / self.mean)
    }
}

/// Linear least squares at a fixed angular frequency `omega`.
pub fn fit_at_frequency(t: &[f64], y: &[f64], omega: f64) -> Result<SinusoidFit> {
    if t.len() != y.len() {
        return Err(Error::domain("abscissa and ordinate lengths differ"));
    }
    if t.len() < 3 {
        return Err(Error::domain("a sinusoid fit needs at least three points"));
    }
    let mut ata = Matrix3::<f64>::zeros();
    let mut aty = Vector3::<f64>::zeros();
    for (&ti, &yi) in t.iter().zip(y) {
        let row = Vector3::new(1.0, (omega * ti).cos(), (omega * ti).sin());
        ata += row * row.transpose();
        aty += row * yi;
    }
    let c = ata
        .cholesky()
        .ok_or_else(|| Error::domain("sample points do not resolve the sinusoid"))?
        .solve(&aty);
    let residual = t
        .iter()
        .zip(y)
        .map(|(&ti, &yi)| {
            let r = yi - c[0] - c[1] * (omega * ti).cos() - c[2] * (omega * ti).sin();
            r * r
        })
        .sum();
    Ok(SinusoidFit {
        mean: c[0],
        amplitude: c[1].hypot(c[2]),
        phase_rad: (-c[2]).atan2(c[1]),
        residual,
    })
}

/// Period of the dominant sinusoid in (t, y): coarse search over a
/// frequency grid, then golden-section refinement of the fit residual.
pub fn estimate_period(t: &[f64], y: &[f64]) -> Result<f64> {
    if t.len() < 4 {
        return Err(Error::domain("period estimation needs at least four points"));
    }
    let span = t[t.len() - 1] - t[0];
    if !(span > 0.0) {
        return Err(Error::domain("sample abscissae must increase"));
    }
    let residual = |omega: f64| fit_at_frequency(t, y, omega).map(|f| f.residual).unwrap_or(f64::INFINITY);
    let n = t.len();
    // Coarse grid up to the Nyquist rate of the mean spacing, oversampled
    // fourfold; the projection residual ‖y‖² − cᵀAᵀy avoids a second pass.
    let omega_max = PI * (n - 1) as f64 / span;
    let omega_min = TAU / (4.0 * span);
    let steps = 4 * n;
    let h = (omega_max - omega_min) / steps as f64;
    let yy: f64 = y.iter().map(|v| v * v).sum();
    let coarse = |omega: f64| {
        let mut ata = Matrix3::<f64>::zeros();
        let mut aty = Vector3::<f64>::zeros();
        for (&ti, &yi) in t.iter().zip(y) {
            let (s, c) = (omega * ti).sin_cos();
            let row = Vector3::new(1.0, c, s);
            ata += row * row.transpose();
            aty += row * yi;
        }
        ata.cholesky()
            .map_or(f64::INFINITY, |ch| yy - ch.solve(&aty).dot(&aty))
    };
    let best = (0..=steps)
        .map(|k| omega_min + h * k as f64)
        .map(|w| (w, coarse(w)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(w, _)| w)
        .expect("grid is non-empty");

    let (mut a, mut b) = ((best - h).max(omega_min * 0.5), best + h);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (residual(c), residual(d));
    for _ in 0..200 {
        if (b - a) <= 1e-15 * best {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = residual(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = residual(d);
        }
    }
    Ok(TAU / (0.5 * (a + b)))
}

/// Index of the largest non-DC bin of the mean-removed DFT magnitude.
pub fn dft_peak_bin(y: &[f64]) -> Option<usize> {
    let n = y.len();
    if n < 4 {
        return None;
    }
    let mean = y.iter().sum::<f64>() / n as f64;
    (1..=n / 2)
        .map(|k| {
            let (mut re, mut im) = (0.0, 0.0);
            for (j, &v) in y.iter().enumerate() {
                let a = TAU * (k * j) as f64 / n as f64;
                re += (v - mean) * a.cos();
                im -= (v - mean) * a.sin();
            }
            (k, re * re + im * im)
        })
        .max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)))
        .map(|(k, _)| k)
}

/// Maps an angle to (−π, π].
pub fn wrap_phase(x: f64) -> f64 {
    let r = x.rem_euclid(TAU);
    if r > PI {
        r - TAU
    } else {
        r
    }
}
