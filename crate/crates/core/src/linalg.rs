use nalgebra::DMatrix;
use num_complex::Complex64;

const TAYLOR_TERMS: usize = 24;

fn norm_1(a: &DMatrix<Complex64>) -> f64 {
    a.column_iter()
        .map(|c| c.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// exp(A) by scaling and squaring with a truncated Taylor series.
///
/// The argument is scaled so that ‖A/2^s‖₁ ≤ 1/2, where 24 Taylor terms
/// are exact to double precision.
pub(crate) fn expm(a: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "expm needs a square matrix");
    let norm = norm_1(a);
    let squarings = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as i32
    } else {
        0
    };
    let scaled = a.scale(0.5f64.powi(squarings));

    let mut result = DMatrix::<Complex64>::identity(n, n);
    let mut term = DMatrix::<Complex64>::identity(n, n);
    for k in 1..=TAYLOR_TERMS {
        term = (&term * &scaled).unscale(k as f64);
        result += &term;
    }
    for _ in 0..squarings {
        result = &result * &result;
    }
    result
}
