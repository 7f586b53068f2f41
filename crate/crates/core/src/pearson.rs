//! Pearson correlation, the similarity score between function vectors.

use alloc::vec::Vec;
use core::fmt;

/// Centered norms below this are treated as zero variance.
pub const MIN_CENTERED_NORM: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SimilarityError {
    DimensionMismatch { left: usize, right: usize },
    ZeroVariance,
}

impl fmt::Display for SimilarityError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SimilarityError::DimensionMismatch { left, right } => {
                write!(f, "vector lengths differ: {left} vs {right}")
            }
            SimilarityError::ZeroVariance => f.write_str("vector has zero variance"),
        }
    }
}

impl core::error::Error for SimilarityError {}

struct Centered {
    cx: Vec<f64>,
    cy: Vec<f64>,
    nx: f64,
    ny: f64,
    r: f64,
}

fn centered(x: &[f64], y: &[f64]) -> Result<Centered, SimilarityError> {
    if x.len() != y.len() {
        return Err(SimilarityError::DimensionMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    if x.is_empty() {
        return Err(SimilarityError::ZeroVariance);
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let cx: Vec<f64> = x.iter().map(|v| v - mx).collect();
    let cy: Vec<f64> = y.iter().map(|v| v - my).collect();
    let sxx: f64 = cx.iter().map(|v| v * v).sum();
    let syy: f64 = cy.iter().map(|v| v * v).sum();
    let sxy: f64 = cx.iter().zip(&cy).map(|(a, b)| a * b).sum();
    let nx = libm::sqrt(sxx);
    let ny = libm::sqrt(syy);
    if !(nx >= MIN_CENTERED_NORM && ny >= MIN_CENTERED_NORM) {
        return Err(SimilarityError::ZeroVariance);
    }
    let r = (sxy / (nx * ny)).clamp(-1.0, 1.0);
    Ok(Centered { cx, cy, nx, ny, r })
}

/// `r = Σ(xᵢ−x̄)(yᵢ−ȳ) / sqrt(Σ(xᵢ−x̄)² · Σ(yᵢ−ȳ)²)`, clamped to `[−1, 1]`.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64, SimilarityError> {
    centered(x, y).map(|c| c.r)
}

/// Pearson score with its gradients `(r, ∂r/∂x, ∂r/∂y)`.
///
/// `∂r/∂x = c_y/(‖c_x‖‖c_y‖) − r·c_x/‖c_x‖²`, where `c` is the centered vector.
/// The centering Jacobian drops out because both terms already have zero mean.
pub fn pearson_with_grad(x: &[f64], y: &[f64]) -> Result<(f64, Vec<f64>, Vec<f64>), SimilarityError> {
    let c = centered(x, y)?;
    let nn = c.nx * c.ny;
    let dx =
        c.cx.iter()
            .zip(&c.cy)
            .map(|(a, b)| b / nn - c.r * a / (c.nx * c.nx))
            .collect();
    let dy =
        c.cx.iter()
            .zip(&c.cy)
            .map(|(a, b)| a / nn - c.r * b / (c.ny * c.ny))
            .collect();
    Ok((c.r, dx, dy))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn hand_examples() {
        assert!((pearson(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap() - 1.0).abs() < 1e-12);
        assert!((pearson(&[1.0, 2.0, 3.0], &[-1.0, -2.0, -3.0]).unwrap() + 1.0).abs() < 1e-12);
        // centered: (-1,0,1) and (-4/3,-1/3,5/3): Sxy = 3, Sxx = 2, Syy = 14/3,
        // r = 3 / sqrt(28/3) = 9 / (2 sqrt 21)
        let want = 9.0 / (2.0 * libm::sqrt(21.0));
        let r = pearson(&[1.0, 2.0, 3.0], &[1.0, 2.0, 4.0]).unwrap();
        assert!((r - want).abs() < 1e-15);
        assert!((r - 0.98198).abs() < 1e-5);
    }

    #[test]
    fn degenerate_inputs() {
        assert_eq!(
            pearson(&[5.0, 5.0, 5.0], &[1.0, 2.0, 3.0]),
            Err(SimilarityError::ZeroVariance)
        );
        assert_eq!(
            pearson(&[1.0, 2.0, 3.0], &[0.0; 3]),
            Err(SimilarityError::ZeroVariance)
        );
        assert_eq!(
            pearson(&[1.0, 2.0], &[1.0, 2.0, 3.0]),
            Err(SimilarityError::DimensionMismatch { left: 2, right: 3 })
        );
        assert_eq!(pearson(&[], &[]), Err(SimilarityError::ZeroVariance));
        assert_eq!(
            pearson(&[f64::NAN, 1.0], &[1.0, 2.0]),
            Err(SimilarityError::ZeroVariance)
        );
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let x = vec![0.3, -1.2, 2.5, 0.7, -0.4];
        let y = vec![1.1, 0.2, -0.9, 1.4, 0.05];
        let (_, dx, dy) = pearson_with_grad(&x, &y).unwrap();
        let eps = 1e-6;
        for i in 0..x.len() {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[i] += eps;
            xm[i] -= eps;
            let fd = (pearson(&xp, &y).unwrap() - pearson(&xm, &y).unwrap()) / (2.0 * eps);
            assert!((fd - dx[i]).abs() < 1e-8, "dx[{i}]");
            let mut yp = y.clone();
            let mut ym = y.clone();
            yp[i] += eps;
            ym[i] -= eps;
            let fd = (pearson(&x, &yp).unwrap() - pearson(&x, &ym).unwrap()) / (2.0 * eps);
            assert!((fd - dy[i]).abs() < 1e-8, "dy[{i}]");
        }
    }
}
