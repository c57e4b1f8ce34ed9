//! Kolmogorov-Smirnov comparison of sampled positions against a model
//! position density, plus the inverse-CDF table used to draw the samples.

use pilotwave_core::{Error, Result};

/// Piecewise-linear CDF built from density samples at cell midpoints of a
/// uniform grid over `[x_min, x_max]`.
///
/// The same table serves two roles: inverting uniform draws into positions
/// distributed per the density, and evaluating the model CDF inside the KS
/// statistic. Midpoint integration keeps the table error at O(dx^2), far
/// below the KS resolution for the cell counts used here.
#[derive(Debug, Clone)]
pub struct CdfTable {
    x_min: f64,
    dx: f64,
    /// Cumulative mass at cell edges; `cum[0] = 0`, `cum[cells] = 1`.
    cum: Vec<f64>,
}

impl CdfTable {
    /// Builds the table from `density(x)` evaluated at cell midpoints.
    pub fn build(
        x_min: f64,
        x_max: f64,
        cells: usize,
        mut density: impl FnMut(f64) -> Result<f64>,
    ) -> Result<Self> {
        if !(x_max > x_min) || cells < 2 {
            return Err(Error::Config("density table needs x_max > x_min and >= 2 cells".into()));
        }
        let dx = (x_max - x_min) / cells as f64;
        let mut cum = Vec::with_capacity(cells + 1);
        cum.push(0.0);
        let mut total = 0.0;
        for j in 0..cells {
            let x = x_min + (j as f64 + 0.5) * dx;
            let rho = density(x)?;
            if !rho.is_finite() || rho < 0.0 {
                return Err(Error::Numerical(format!(
                    "density is not a finite non-negative number at x = {x}"
                )));
            }
            total += rho * dx;
            cum.push(total);
        }
        if !(total > 0.0) {
            return Err(Error::Numerical(
                "density integrates to zero over the sampling window".into(),
            ));
        }
        for c in &mut cum {
            *c /= total;
        }
        cum[cells] = 1.0;
        Ok(Self { x_min, dx, cum })
    }

    pub fn cells(&self) -> usize {
        self.cum.len() - 1
    }

    /// CDF value at `x`, clamped to `[0, 1]` outside the window.
    pub fn cdf(&self, x: f64) -> f64 {
        let s = (x - self.x_min) / self.dx;
        if s <= 0.0 {
            return 0.0;
        }
        let cells = self.cells();
        if s >= cells as f64 {
            return 1.0;
        }
        let j = (s as usize).min(cells - 1);
        let frac = s - j as f64;
        self.cum[j] + frac * (self.cum[j + 1] - self.cum[j])
    }

    /// Position whose CDF equals `u` (inverse transform sampling).
    pub fn invert(&self, u: f64) -> f64 {
        let cells = self.cells();
        let u = u.clamp(0.0, 1.0);
        // First edge with cum >= u; partition_point keeps this O(log n).
        let hi = self.cum.partition_point(|&c| c < u).min(cells);
        if hi == 0 {
            return self.x_min;
        }
        let j = hi - 1;
        let span = self.cum[hi] - self.cum[j];
        let frac = if span > 0.0 { (u - self.cum[j]) / span } else { 0.0 };
        self.x_min + (j as f64 + frac) * self.dx
    }
}

/// Two-sided KS distance between a sample and a continuous model CDF.
///
/// `samples` must be sorted ascending. Uses the exact one-sample form
/// `D = max_i max(F(x_i) - (i-1)/n, i/n - F(x_i))`.
pub fn ks_distance(sorted_samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let n = sorted_samples.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in sorted_samples.iter().enumerate() {
        let f = cdf(x);
        d = d.max(f - i as f64 / n).max((i + 1) as f64 / n - f);
    }
    d
}

/// 95% acceptance band for the one-sample KS statistic.
pub fn ks_band_95(n: usize) -> f64 {
    1.36 / (n as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ks_distance_matches_a_hand_computed_case() {
        // Samples {0.25, 0.75} against U[0,1]: the largest gap is 0.25,
        // attained on both sides of the first point.
        let d = ks_distance(&[0.25, 0.75], |x| x);
        assert!((d - 0.25).abs() < 1e-15, "{d}");
    }

    #[test]
    fn ks_distance_detects_a_shifted_sample() {
        let samples: Vec<f64> = (0..100).map(|i| 0.5 + 0.005 * i as f64).collect();
        let d = ks_distance(&samples, |x| x);
        assert!(d > 0.4, "{d}");
    }

    #[test]
    fn uniform_grid_samples_sit_tight_against_the_uniform_cdf() {
        let samples: Vec<f64> = (0..1000).map(|i| (i as f64 + 0.5) / 1000.0).collect();
        let d = ks_distance(&samples, |x| x);
        assert!(d <= 0.5e-3 + 1e-12, "{d}");
    }

    #[test]
    fn inverse_cdf_round_trips_through_the_table() {
        let table = CdfTable::build(-4.0, 4.0, 4096, |x| Ok((-x * x / 2.0).exp())).unwrap();
        for &u in &[0.01, 0.2, 0.5, 0.8, 0.99] {
            let x = table.invert(u);
            assert!((table.cdf(x) - u).abs() < 1e-9, "u={u} x={x}");
        }
        // The median of a centered gaussian is the center.
        assert!(table.invert(0.5).abs() < 1e-9);
    }

    #[test]
    fn table_cdf_tracks_the_gaussian_error_function() {
        let table = CdfTable::build(-8.0, 8.0, 8192, |x| Ok((-x * x / 2.0).exp())).unwrap();
        // erf via Abramowitz-Stegun 7.1.26 is accurate to 1.5e-7, enough to
        // check the table's O(dx^2) construction.
        let erf = |z: f64| {
            let s = z.signum();
            let z = z.abs();
            let t = 1.0 / (1.0 + 0.3275911 * z);
            let poly = t
                * (0.254829592
                    + t * (-0.284496736 + t * (1.421413741 + t * (-1.453152027 + t * 1.061405429))));
            s * (1.0 - poly * (-z * z).exp())
        };
        for &x in &[-2.0, -0.5, 0.0, 0.7, 1.9] {
            let exact = 0.5 * (1.0 + erf(x / std::f64::consts::SQRT_2));
            assert!((table.cdf(x) - exact).abs() < 1e-6, "x={x}");
        }
    }
}
