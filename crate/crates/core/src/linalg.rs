//! Small 2x2 helpers. Matrix norms are spectral norms throughout.

use nalgebra::Matrix2;

/// Largest eigenvalue of a symmetric 2x2 matrix.
pub fn sym_max_eig(s: &Matrix2<f64>) -> f64 {
    let (a, b, d) = (s[(0, 0)], 0.5 * (s[(0, 1)] + s[(1, 0)]), s[(1, 1)]);
    0.5 * (a + d) + (0.25 * (a - d) * (a - d) + b * b).sqrt()
}

/// Spectral norm `|M|_2 = sqrt(lambda_max(M^T M))`.
pub fn spectral_norm(m: &Matrix2<f64>) -> f64 {
    sym_max_eig(&(m.transpose() * m)).max(0.0).sqrt()
}

pub fn to_rows(m: &Matrix2<f64>) -> [[f64; 2]; 2] {
    [[m[(0, 0)], m[(0, 1)]], [m[(1, 0)], m[(1, 1)]]]
}

pub fn from_rows(r: [[f64; 2]; 2]) -> Matrix2<f64> {
    Matrix2::new(r[0][0], r[0][1], r[1][0], r[1][1])
}

/// `ln(e^x + e^y)` without overflow.
pub fn log_add_exp(x: f64, y: f64) -> f64 {
    let (hi, lo) = if x > y { (x, y) } else { (y, x) };
    if lo == f64::NEG_INFINITY {
        return hi;
    }
    hi + (lo - hi).exp().ln_1p()
}
