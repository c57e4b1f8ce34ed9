//! Long-run accuracy of the two field solvers against closed forms: norm
//! conservation, stationary modes, packet spreading, and dispersion over a
//! full domain crossing.

use num_complex::Complex;
use pilotwave_core::wavefield::{
    kg_discrete_energy, solve_klein_gordon, solve_schrodinger, Boundary, Family, GridField,
    PlaneWaveMode, PlaneWaveSuperposition, SpacetimeGrid,
};

fn packet_initial(sigma: f64) -> impl Fn(f64) -> Complex<f64> {
    move |x: f64| Complex::new((-(x * x) / (4.0 * sigma * sigma)).exp(), 0.0)
}

/// Discrete standard deviation of the `|psi|^2` distribution on slice `i`.
fn slice_sigma(field: &GridField<f64>, i: usize) -> f64 {
    let grid = field.grid();
    let dx = grid.dx();
    let mut w = 0.0;
    let mut mean = 0.0;
    for (j, v) in field.slice(i).iter().enumerate() {
        let rho = v.norm_sqr() * dx;
        w += rho;
        mean += rho * grid.x_at(j);
    }
    mean /= w;
    let mut var = 0.0;
    for (j, v) in field.slice(i).iter().enumerate() {
        let d = grid.x_at(j) - mean;
        var += v.norm_sqr() * dx * d * d;
    }
    (var / w).sqrt()
}

#[test]
fn crank_nicolson_norm_drift_stays_below_1e8_over_1e4_steps() {
    let grid = SpacetimeGrid {
        t_min: 0.0,
        t_max: 1.0,
        n_t: 10_000,
        x_min: -16.0,
        x_max: 16.0,
        n_x: 128,
        boundary: Boundary::Periodic,
    };
    let field = solve_schrodinger(&grid, packet_initial(1.0), None, 1.0, 1.0).unwrap();
    let n0 = field.slice_norm(0);
    let mut worst = 0.0f64;
    for i in 0..=grid.n_t {
        worst = worst.max((field.slice_norm(i) - n0).abs() / n0);
    }
    assert!(worst <= 1e-8, "norm drift {worst}");
}

#[test]
fn box_eigenmode_amplitude_is_stationary_under_crank_nicolson() {
    // sin(x) on [0, pi] with pinned ends is an exact eigenvector of the
    // discrete Laplacian, so Crank-Nicolson multiplies it by a pure phase
    // and the amplitude pattern must survive to roundoff.
    let grid = SpacetimeGrid {
        t_min: 0.0,
        t_max: 1.0,
        n_t: 2000,
        x_min: 0.0,
        x_max: std::f64::consts::PI,
        n_x: 64,
        boundary: Boundary::Absorbing,
    };
    let field = solve_schrodinger(&grid, |x| Complex::new(x.sin(), 0.0), None, 1.0, 1.0).unwrap();
    let first = field.slice(0);
    let last = field.slice(grid.n_t);
    let mut worst = 0.0f64;
    for (a, b) in first.iter().zip(last) {
        worst = worst.max((a.norm() - b.norm()).abs());
    }
    assert!(worst <= 1e-10, "eigenmode amplitude drifted by {worst}");
}

#[test]
fn crank_nicolson_packet_width_follows_the_spreading_law() {
    // sigma(t) = sigma sqrt(1 + (hbar t / 2 m sigma^2)^2); at t = 1 with
    // sigma = m = hbar = 1 that is sqrt(1.25). Residual error is spatial
    // dispersion of the second-order Laplacian, well under 1e-4 at this
    // resolution.
    let sigma = 1.0;
    let grid = SpacetimeGrid {
        t_min: 0.0,
        t_max: 1.0,
        n_t: 2000,
        x_min: -16.0,
        x_max: 16.0,
        n_x: 512,
        boundary: Boundary::Periodic,
    };
    let field = solve_schrodinger(&grid, packet_initial(sigma), None, 1.0, 1.0).unwrap();
    for (i, t) in [(0usize, 0.0), (1000, 0.5), (2000, 1.0)] {
        let r = 0.5 * t / (sigma * sigma);
        let want = sigma * (1.0 + r * r).sqrt();
        let got = slice_sigma(&field, i);
        assert!(
            (got - want).abs() / want <= 1e-4,
            "width at t = {t}: got {got}, want {want}"
        );
    }
}

#[test]
fn klein_gordon_two_mode_matches_closed_form_over_a_full_crossing() {
    // dt = dx / 2 exactly (CFL number 0.5), one light-crossing of the
    // periodic domain. Pointwise error is dominated by the second-order
    // spatial dispersion of the k = 2 mode, a few times 1e-5 here.
    let tau = 2.0 * std::f64::consts::PI;
    let grid = SpacetimeGrid {
        t_min: 0.0,
        t_max: tau,
        n_t: 2048,
        x_min: 0.0,
        x_max: tau,
        n_x: 1024,
        boundary: Boundary::Periodic,
    };
    let waves = PlaneWaveSuperposition::new(
        Family::KleinGordon,
        vec![
            PlaneWaveMode { amp: Complex::new(1.0, 0.0), k: 1.0 },
            PlaneWaveMode { amp: Complex::new(0.0, 0.5), k: 2.0 },
        ],
        1.0,
        1.0,
        1.0,
    )
    .unwrap();
    let omega = [waves.omega(1.0), waves.omega(2.0)];
    let value = |t: f64, x: f64| -> Complex<f64> {
        let mut acc = Complex::new(0.0, 0.0);
        for (mode, om) in waves.modes.iter().zip(omega) {
            acc += mode.amp * Complex::new(0.0, mode.k * x - om * t).exp();
        }
        acc
    };
    let d_dt = |x: f64| -> Complex<f64> {
        let mut acc = Complex::new(0.0, 0.0);
        for (mode, om) in waves.modes.iter().zip(omega) {
            acc += mode.amp * Complex::new(0.0, -om) * Complex::new(0.0, mode.k * x).exp();
        }
        acc
    };
    let field = solve_klein_gordon(&grid, |x| value(0.0, x), d_dt, 1.0, 1.0, 1.0).unwrap();

    let mut worst = 0.0f64;
    for j in 0..grid.n_x {
        let x = grid.x_at(j);
        let got = field.slice(grid.n_t)[j];
        worst = worst.max((got - value(tau, x)).norm());
    }
    assert!(worst <= 1e-4, "pointwise error after one crossing: {worst}");

    let e0 = kg_discrete_energy(&field, 0, 1.0, 1.0, 1.0).unwrap();
    let mut drift = 0.0f64;
    for i in 0..grid.n_t {
        let e = kg_discrete_energy(&field, i, 1.0, 1.0, 1.0).unwrap();
        drift = drift.max((e - e0).abs() / e0);
    }
    assert!(drift <= 1e-12, "discrete energy drift {drift}");
}
