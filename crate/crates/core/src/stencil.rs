//! Fourth-order central finite-difference stencils.
//!
//! All derivative estimates in the library go through these two kernels so
//! that the truncation order is uniform: `O(h^4)` for both the first and the
//! second derivative.

use crate::error::Result;
use crate::scalar::Real;

/// First derivative, 4th order:
/// `(8 (f(h) - f(-h)) - (f(2h) - f(-2h))) / 12h`.
///
/// `f` is sampled at offsets from the expansion point. The paired grouping
/// matters: it makes the estimate an exact floating-point odd function of
/// the samples, so mirror-symmetric inputs produce exactly opposite
/// gradients (exchange-symmetric N-body runs rely on this).
pub fn d1_central4<R: Real, F>(mut f: F, h: R) -> Result<R>
where
    F: FnMut(R) -> Result<R>,
{
    let two = R::of(2.0);
    let eight = R::of(8.0);
    let twelve = R::of(12.0);
    let near = f(h)? - f(-h)?;
    let far = f(two * h)? - f(-(two * h))?;
    Ok((eight * near - far) / (twelve * h))
}

/// Second derivative, 4th order:
/// `(16 (f(h) + f(-h)) - (f(2h) + f(-2h)) - 30 f(0)) / 12h^2`.
///
/// Grouped in mirror pairs for the same reason as [`d1_central4`]: the
/// estimate is an exact floating-point even function of the samples.
pub fn d2_central4<R: Real, F>(mut f: F, h: R) -> Result<R>
where
    F: FnMut(R) -> Result<R>,
{
    let two = R::of(2.0);
    let sixteen = R::of(16.0);
    let thirty = R::of(30.0);
    let twelve = R::of(12.0);
    let near = f(h)? + f(-h)?;
    let far = f(two * h)? + f(-(two * h))?;
    let v = sixteen * near - far - thirty * f(R::zero())?;
    Ok(v / (twelve * h * h))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn first_derivative_of_cubic_is_exact() {
        // x^3 at x = 2: derivative 12; the stencil is exact on polynomials
        // up to degree 4.
        let f = |dx: f64| -> Result<f64> { Ok((2.0 + dx).powi(3)) };
        let d = d1_central4(f, 0.1).unwrap();
        assert_relative_eq!(d, 12.0, max_relative = 1e-12);
    }

    #[test]
    fn second_derivative_of_quartic_is_exact() {
        // x^4 at x = 1: second derivative 12.
        let f = |dx: f64| -> Result<f64> { Ok((1.0 + dx).powi(4)) };
        let d = d2_central4(f, 0.1).unwrap();
        assert_relative_eq!(d, 12.0, max_relative = 1e-11);
    }

    #[test]
    fn second_derivative_converges_at_fourth_order() {
        let exact = -(2.0f64).sin();
        let err = |h: f64| {
            let f = |dx: f64| -> Result<f64> { Ok((2.0 + dx).sin()) };
            (d2_central4(f, h).unwrap() - exact).abs()
        };
        let e1 = err(1e-1);
        let e2 = err(1e-2);
        let order = (e1 / e2).log10();
        assert!(order > 3.5, "observed order {order}");
    }
}
