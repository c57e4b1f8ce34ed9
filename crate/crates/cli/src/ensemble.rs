//! Statistical check that positions sampled from the initial position
//! density and pushed along the guidance flow keep matching the evolving
//! density (equivariance).
//!
//! Samples are drawn by inverse-CDF from `|psi(t0, x)|^2`, advanced with
//! RK4 on `dx/dt = u(t, x)` where `u` is the guidance velocity of the
//! first-order theory, and compared against the model CDF of
//! `|psi(t, x)|^2` with a Kolmogorov-Smirnov test at each requested time.

use pilotwave_core::dynamics::guidance_velocity_nr;
use pilotwave_core::massfield::MassParams;
use pilotwave_core::wavefield::{Event, Wavefield, WavefieldProvider};
use pilotwave_core::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::ks::{ks_band_95, ks_distance, CdfTable};

pub struct EnsembleSetup<'a> {
    pub provider: &'a WavefieldProvider<f64>,
    pub params: &'a MassParams<f64>,
    pub t0: f64,
    pub n_samples: usize,
    pub seed: u64,
    pub comparison_times: Vec<f64>,
    pub x_min: f64,
    pub x_max: f64,
    pub cells: usize,
    /// Guidance-flow integration step.
    pub dt: f64,
}

#[derive(Debug, Serialize)]
pub struct TimeCheck {
    pub t: f64,
    pub ks_distance: f64,
    pub within_band: bool,
}

#[derive(Debug, Serialize)]
pub struct EnsembleReport {
    pub n_samples: usize,
    pub seed: u64,
    pub t0: f64,
    pub x_min: f64,
    pub x_max: f64,
    pub cells: usize,
    /// 95% KS acceptance band, `1.36 / sqrt(n)`.
    pub band: f64,
    pub times: Vec<TimeCheck>,
    pub all_within_band: bool,
}

/// One RK4 step of `dx/dt = u(t, x)`.
fn rk4_step(
    u: &impl Fn(f64, f64) -> Result<f64>,
    t: f64,
    x: f64,
    h: f64,
) -> Result<f64> {
    let k1 = u(t, x)?;
    let k2 = u(t + 0.5 * h, x + 0.5 * h * k1)?;
    let k3 = u(t + 0.5 * h, x + 0.5 * h * k2)?;
    let k4 = u(t + h, x + h * k3)?;
    Ok(x + h / 6.0 * (k1 + 2.0 * (k2 + k3) + k4))
}

/// Advances one sample through every comparison time, returning its
/// position at each.
fn flow_positions(
    u: &impl Fn(f64, f64) -> Result<f64>,
    t0: f64,
    x0: f64,
    times: &[f64],
    dt: f64,
) -> Result<Vec<f64>> {
    let mut t = t0;
    let mut x = x0;
    let mut out = Vec::with_capacity(times.len());
    for &tc in times {
        // Fixed steps, with one shortened final step to land exactly on tc.
        while t < tc {
            let h = dt.min(tc - t);
            if h <= f64::EPSILON * tc.abs().max(1.0) {
                break;
            }
            x = rk4_step(u, t, x, h)?;
            t += h;
        }
        t = tc;
        out.push(x);
    }
    Ok(out)
}

pub fn run_ensemble(setup: &EnsembleSetup) -> Result<EnsembleReport> {
    let times = &setup.comparison_times;
    if times.is_empty() {
        return Err(Error::Config("ensemble.comparison_times: must be non-empty".into()));
    }
    let mut sorted = times.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("times are finite"));
    if sorted != *times {
        return Err(Error::Config(
            "ensemble.comparison_times: must be sorted ascending".into(),
        ));
    }
    if times[0] < setup.t0 {
        return Err(Error::Config(
            "ensemble.comparison_times: must not precede the particle's t0".into(),
        ));
    }

    let provider = setup.provider;
    let density_at = |t: f64| {
        move |x: f64| {
            let a = provider.amplitude(Event::new(t, x))?;
            Ok(a * a)
        }
    };

    // Draws come from a single sequential stream so the sample set is a
    // pure function of (seed, n).
    let initial_table =
        CdfTable::build(setup.x_min, setup.x_max, setup.cells, density_at(setup.t0))?;
    let mut rng = ChaCha12Rng::seed_from_u64(setup.seed);
    let starts: Vec<f64> =
        (0..setup.n_samples).map(|_| initial_table.invert(rng.gen::<f64>())).collect();

    let params = setup.params;
    let u = |t: f64, x: f64| guidance_velocity_nr(provider, Event::new(t, x), params);

    // Index-ordered parallel map; the collected layout is deterministic.
    let tracks: Vec<Vec<f64>> = starts
        .par_iter()
        .map(|&x0| flow_positions(&u, setup.t0, x0, times, setup.dt))
        .collect::<Result<_>>()?;

    let band = ks_band_95(setup.n_samples);
    let mut checks = Vec::with_capacity(times.len());
    let mut all_ok = true;
    for (ti, &t) in times.iter().enumerate() {
        let mut positions: Vec<f64> = tracks.iter().map(|track| track[ti]).collect();
        positions.sort_by(|a, b| a.partial_cmp(b).expect("positions are finite"));
        let model = CdfTable::build(setup.x_min, setup.x_max, setup.cells, density_at(t))?;
        let d = ks_distance(&positions, |x| model.cdf(x));
        let ok = d <= band;
        all_ok &= ok;
        checks.push(TimeCheck { t, ks_distance: d, within_band: ok });
    }

    Ok(EnsembleReport {
        n_samples: setup.n_samples,
        seed: setup.seed,
        t0: setup.t0,
        x_min: setup.x_min,
        x_max: setup.x_max,
        cells: setup.cells,
        band,
        times: checks,
        all_within_band: all_ok,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use pilotwave_core::wavefield::GaussianPacket;

    fn packet_setup<'a>(
        provider: &'a WavefieldProvider<f64>,
        params: &'a MassParams<f64>,
        n: usize,
    ) -> EnsembleSetup<'a> {
        EnsembleSetup {
            provider,
            params,
            t0: 0.0,
            n_samples: n,
            seed: 7,
            comparison_times: vec![0.0, 0.4],
            x_min: -8.0,
            x_max: 8.0,
            cells: 1024,
            dt: 2e-3,
        }
    }

    #[test]
    fn free_packet_ensemble_stays_within_band_and_is_deterministic() {
        let provider = WavefieldProvider::Packet(
            GaussianPacket::new(0.0, 1.0, 0.0, 1.0, 1.0).unwrap(),
        );
        let params = MassParams::single(1.0, 1.0, 1.0).unwrap();
        let setup = packet_setup(&provider, &params, 400);
        let a = run_ensemble(&setup).unwrap();
        assert!(a.all_within_band, "ks = {:?}", a.times);
        let b = run_ensemble(&setup).unwrap();
        let ja = serde_json::to_string(&a).unwrap();
        let jb = serde_json::to_string(&b).unwrap();
        assert_eq!(ja, jb);
    }

    #[test]
    fn different_seeds_draw_different_samples() {
        let provider = WavefieldProvider::Packet(
            GaussianPacket::new(0.0, 1.0, 0.0, 1.0, 1.0).unwrap(),
        );
        let params = MassParams::single(1.0, 1.0, 1.0).unwrap();
        let mut setup = packet_setup(&provider, &params, 200);
        let a = run_ensemble(&setup).unwrap();
        setup.seed = 8;
        let b = run_ensemble(&setup).unwrap();
        assert_ne!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
    }

    #[test]
    fn unsorted_comparison_times_are_rejected() {
        let provider = WavefieldProvider::Packet(
            GaussianPacket::new(0.0, 1.0, 0.0, 1.0, 1.0).unwrap(),
        );
        let params = MassParams::single(1.0, 1.0, 1.0).unwrap();
        let mut setup = packet_setup(&provider, &params, 200);
        setup.comparison_times = vec![0.4, 0.1];
        assert!(matches!(run_ensemble(&setup), Err(Error::Config(_))));
    }
}
