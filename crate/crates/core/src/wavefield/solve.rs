//! Grid-backed wavefields and the two reference evolvers that produce them.
//!
//! `solve_schrodinger` advances `i hbar dpsi/dt = -(hbar^2/2m) d^2psi/dx^2 + V psi`
//! with Crank-Nicolson (unconditionally stable, exactly unitary up to
//! roundoff). `solve_klein_gordon` advances
//! `c^-2 d^2psi/dt^2 = d^2psi/dx^2 - (mc/hbar)^2 psi` with a second-order
//! leapfrog under the CFL restriction `c dt <= dx`.

use std::io;

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use super::{Boundary, Event, SpacetimeGrid, Wavefield};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// A complex field stored on a [`SpacetimeGrid`], evaluated off-lattice by
/// cubic Lagrange interpolation in both coordinates (4th-order accurate in
/// `dx` and `dt`).
#[derive(Debug, Clone)]
pub struct GridField<R: Real> {
    grid: SpacetimeGrid<R>,
    n_points: usize,
    /// Slice-major storage: `data[i * n_points + j]` is slice `i`, node `j`.
    data: Vec<Complex<R>>,
    peak: R,
}

/// Spatial nodes stored per slice for a grid/boundary combination.
/// Periodic grids store `n_x` nodes (the right edge duplicates the left);
/// absorbing grids store `n_x + 1` nodes including both pinned edges.
pub fn stored_points<R: Real>(grid: &SpacetimeGrid<R>) -> usize {
    match grid.boundary {
        Boundary::Periodic => grid.n_x,
        Boundary::Absorbing => grid.n_x + 1,
    }
}

#[derive(Serialize, Deserialize)]
struct GridFieldRepr<R> {
    grid: SpacetimeGrid<R>,
    re: Vec<Vec<R>>,
    im: Vec<Vec<R>>,
}

impl<R: Real> GridField<R> {
    /// Builds a field from per-slice node values. Expects `n_t + 1` slices
    /// of [`stored_points`] values each, all finite.
    pub fn from_slices(grid: SpacetimeGrid<R>, slices: Vec<Vec<Complex<R>>>) -> Result<Self> {
        grid.validate()?;
        if grid.n_t < 3 {
            return Err(Error::Config(
                "grid field needs at least 4 time slices for interpolation".into(),
            ));
        }
        let n_points = stored_points(&grid);
        if slices.len() != grid.n_t + 1 {
            return Err(Error::Config(format!(
                "expected {} slices, got {}",
                grid.n_t + 1,
                slices.len()
            )));
        }
        let mut data = Vec::with_capacity((grid.n_t + 1) * n_points);
        let mut peak = R::zero();
        for (i, slice) in slices.iter().enumerate() {
            if slice.len() != n_points {
                return Err(Error::Config(format!(
                    "slice {i} has {} nodes, expected {n_points}",
                    slice.len()
                )));
            }
            for &v in slice {
                let n = v.norm();
                if !n.is_finite() {
                    return Err(Error::Numerical(format!("non-finite field value in slice {i}")));
                }
                if n > peak {
                    peak = n;
                }
                data.push(v);
            }
        }
        Ok(Self { grid, n_points, data, peak })
    }

    /// Samples a closed-form field onto the grid (mainly for tests).
    pub fn from_fn(
        grid: SpacetimeGrid<R>,
        mut f: impl FnMut(Event<R>) -> Complex<R>,
    ) -> Result<Self> {
        grid.validate()?;
        let n_points = stored_points(&grid);
        let mut slices = Vec::with_capacity(grid.n_t + 1);
        for i in 0..=grid.n_t {
            let t = grid.t_at(i);
            let mut row = Vec::with_capacity(n_points);
            for j in 0..n_points {
                row.push(f(Event::new(t, grid.x_at(j))));
            }
            slices.push(row);
        }
        Self::from_slices(grid, slices)
    }

    pub fn grid(&self) -> &SpacetimeGrid<R> {
        &self.grid
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    /// Maximum `|psi|` over all stored nodes.
    pub fn peak(&self) -> R {
        self.peak
    }

    /// Node values of time slice `i`.
    pub fn slice(&self, i: usize) -> &[Complex<R>] {
        &self.data[i * self.n_points..(i + 1) * self.n_points]
    }

    /// Discrete L2 norm `sqrt(sum_j |psi_j|^2 dx)` of slice `i`.
    pub fn slice_norm(&self, i: usize) -> R {
        let s: R = self.slice(i).iter().map(|v| v.norm_sqr()).sum();
        (s * self.grid.dx()).sqrt()
    }

    /// Writes the field as JSON (grid header plus per-slice re/im arrays).
    pub fn dump_json<W: io::Write>(&self, w: W) -> Result<()> {
        let mut re = Vec::with_capacity(self.grid.n_t + 1);
        let mut im = Vec::with_capacity(self.grid.n_t + 1);
        for i in 0..=self.grid.n_t {
            re.push(self.slice(i).iter().map(|v| v.re).collect());
            im.push(self.slice(i).iter().map(|v| v.im).collect());
        }
        let repr = GridFieldRepr { grid: self.grid, re, im };
        serde_json::to_writer(w, &repr)
            .map_err(|e| Error::Config(format!("grid field serialization failed: {e}")))
    }

    /// Reads a field previously written by [`GridField::dump_json`].
    pub fn load_json<Rd: io::Read>(r: Rd) -> Result<Self> {
        let repr: GridFieldRepr<R> = serde_json::from_reader(r)
            .map_err(|e| Error::Config(format!("grid field parse failed: {e}")))?;
        if repr.re.len() != repr.im.len() {
            return Err(Error::Config("grid field re/im slice counts differ".into()));
        }
        let slices = repr
            .re
            .iter()
            .zip(&repr.im)
            .enumerate()
            .map(|(i, (re, im))| {
                if re.len() != im.len() {
                    return Err(Error::Config(format!("slice {i} re/im lengths differ")));
                }
                Ok(re.iter().zip(im).map(|(&a, &b)| Complex::new(a, b)).collect())
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_slices(repr.grid, slices)
    }

    /// Maps a coordinate to (window base, local coordinate in node units)
    /// for a 4-node interpolation window over `n` nodes indexed 0..n-1.
    fn window(s: R, n: usize, what: &str) -> Result<(usize, R)> {
        let top = R::of((n - 1) as f64);
        let tol = R::of(1e-9) * top.max(R::one());
        if s < -tol || s > top + tol {
            return Err(Error::Domain(format!(
                "{what} coordinate {s} outside grid range [0, {top}] (node units)"
            )));
        }
        let s = s.max(R::zero()).min(top);
        let base = (s.floor().as_f64() as usize).saturating_sub(1).min(n - 4);
        Ok((base, s - R::of(base as f64)))
    }

    fn lagrange4(u: R) -> [R; 4] {
        let mut w = [R::zero(); 4];
        for (i, wi) in w.iter_mut().enumerate() {
            let mut num = R::one();
            let mut den = R::one();
            let pi = R::of(i as f64);
            for j in 0..4 {
                if i != j {
                    let pj = R::of(j as f64);
                    num = num * (u - pj);
                    den = den * (pi - pj);
                }
            }
            *wi = num / den;
        }
        w
    }
}

impl<R: Real> Wavefield<R> for GridField<R> {
    fn value(&self, e: Event<R>) -> Result<Complex<R>> {
        if !e.is_finite() {
            return Err(Error::Domain(format!("non-finite event ({}, {})", e.t, e.x)));
        }
        let n_slices = self.grid.n_t + 1;
        let st = (e.t - self.grid.t_min) / self.grid.dt();
        let (it0, ut) = Self::window(st, n_slices, "time")?;
        let wt = Self::lagrange4(ut);

        let nx = R::of(self.grid.n_x as f64);
        let mut sx = (e.x - self.grid.x_min) / self.grid.dx();
        let (nodes, wx) = match self.grid.boundary {
            Boundary::Periodic => {
                sx = sx % nx;
                if sx < R::zero() {
                    sx = sx + nx;
                }
                if sx >= nx {
                    sx = R::zero();
                }
                let j = sx.floor().as_f64() as usize;
                let j = j.min(self.grid.n_x - 1);
                let u = sx - R::of(j as f64) + R::one();
                let n = self.grid.n_x;
                let nodes = [(j + n - 1) % n, j, (j + 1) % n, (j + 2) % n];
                (nodes, Self::lagrange4(u))
            }
            Boundary::Absorbing => {
                let (jx0, ux) = Self::window(sx, self.n_points, "space")?;
                ([jx0, jx0 + 1, jx0 + 2, jx0 + 3], Self::lagrange4(ux))
            }
        };

        let mut acc = Complex::new(R::zero(), R::zero());
        for (a, &wta) in wt.iter().enumerate() {
            let slice = self.slice(it0 + a);
            let mut row = Complex::new(R::zero(), R::zero());
            for (b, &node) in nodes.iter().enumerate() {
                row = row + slice[node] * wx[b];
            }
            acc = acc + row * wta;
        }
        Ok(acc)
    }

    fn peak_scale(&self) -> R {
        self.peak
    }
}

/// Solves the tridiagonal system with constant off-diagonal `off` and the
/// given diagonal by the Thomas algorithm.
fn solve_tridiagonal<R: Real>(
    diag: &[Complex<R>],
    off: Complex<R>,
    rhs: &[Complex<R>],
) -> Result<Vec<Complex<R>>> {
    let n = diag.len();
    let mut c = vec![Complex::new(R::zero(), R::zero()); n];
    let mut d = vec![Complex::new(R::zero(), R::zero()); n];
    let mut pivot = diag[0];
    if pivot.norm() == R::zero() {
        return Err(Error::Numerical("tridiagonal solve hit a zero pivot".into()));
    }
    c[0] = off / pivot;
    d[0] = rhs[0] / pivot;
    for i in 1..n {
        pivot = diag[i] - off * c[i - 1];
        if pivot.norm() == R::zero() {
            return Err(Error::Numerical("tridiagonal solve hit a zero pivot".into()));
        }
        c[i] = off / pivot;
        d[i] = (rhs[i] - off * d[i - 1]) / pivot;
    }
    let mut x = d;
    for i in (0..n - 1).rev() {
        let next = x[i + 1];
        x[i] = x[i] - c[i] * next;
    }
    Ok(x)
}

/// Solves the cyclic tridiagonal system (constant off-diagonal `off`, which
/// also fills both corners) via the Sherman-Morrison rank-one update.
fn solve_cyclic_tridiagonal<R: Real>(
    diag: &[Complex<R>],
    off: Complex<R>,
    rhs: &[Complex<R>],
) -> Result<Vec<Complex<R>>> {
    let n = diag.len();
    if n < 3 {
        return Err(Error::Config("cyclic solve needs at least 3 unknowns".into()));
    }
    let gamma = -diag[0];
    if gamma.norm() == R::zero() {
        return Err(Error::Numerical("cyclic solve hit a zero pivot".into()));
    }
    let mut dmod = diag.to_vec();
    dmod[0] = diag[0] - gamma;
    dmod[n - 1] = diag[n - 1] - off * off / gamma;
    let y = solve_tridiagonal(&dmod, off, rhs)?;
    let mut u = vec![Complex::new(R::zero(), R::zero()); n];
    u[0] = gamma;
    u[n - 1] = off;
    let z = solve_tridiagonal(&dmod, off, &u)?;
    // v = e_0 + (off/gamma) e_{n-1}; x = y - z (v.y)/(1 + v.z).
    let vy = y[0] + off / gamma * y[n - 1];
    let vz = z[0] + off / gamma * z[n - 1];
    let denom = Complex::new(R::one(), R::zero()) + vz;
    if denom.norm() == R::zero() {
        return Err(Error::Numerical("cyclic solve correction is singular".into()));
    }
    let factor = vy / denom;
    Ok(y.iter().zip(&z).map(|(&yi, &zi)| yi - zi * factor).collect())
}

/// Evolves the free-or-potential Schroedinger equation by Crank-Nicolson.
///
/// `potential`, when given, holds `V(x_j)` on the stored nodes. The scheme
/// is exactly norm-preserving in exact arithmetic; observed drift is
/// roundoff. Accuracy is second order in both `dt` and `dx`.
pub fn solve_schrodinger<R: Real>(
    grid: &SpacetimeGrid<R>,
    initial: impl Fn(R) -> Complex<R>,
    potential: Option<&[R]>,
    m: R,
    hbar: R,
) -> Result<GridField<R>> {
    grid.validate()?;
    if !(m > R::zero()) || !(hbar > R::zero()) {
        return Err(Error::Config("solver requires m, hbar > 0".into()));
    }
    let n_points = stored_points(grid);
    if let Some(v) = potential {
        if v.len() != n_points {
            return Err(Error::Config(format!(
                "potential has {} samples, grid stores {n_points} nodes",
                v.len()
            )));
        }
    }
    let dx = grid.dx();
    let dt = grid.dt();
    let zero = Complex::new(R::zero(), R::zero());
    let one = Complex::new(R::one(), R::zero());
    // lambda = i hbar dt / (4 m dx^2); mu_j = i dt V_j / (2 hbar).
    let lambda = Complex::new(R::zero(), hbar * dt / (R::of(4.0) * m * dx * dx));
    let mu = |j: usize| -> Complex<R> {
        match potential {
            Some(v) => Complex::new(R::zero(), dt * v[j] / (R::of(2.0) * hbar)),
            None => zero,
        }
    };

    let mut current: Vec<Complex<R>> = (0..n_points).map(|j| initial(grid.x_at(j))).collect();
    let mut slices = Vec::with_capacity(grid.n_t + 1);

    match grid.boundary {
        Boundary::Periodic => {
            let diag: Vec<Complex<R>> =
                (0..n_points).map(|j| one + lambda * R::of(2.0) + mu(j)).collect();
            slices.push(current.clone());
            for _ in 0..grid.n_t {
                let rhs: Vec<Complex<R>> = (0..n_points)
                    .map(|j| {
                        let left = current[(j + n_points - 1) % n_points];
                        let right = current[(j + 1) % n_points];
                        (one - lambda * R::of(2.0) - mu(j)) * current[j] + lambda * (left + right)
                    })
                    .collect();
                current = solve_cyclic_tridiagonal(&diag, -lambda, &rhs)?;
                slices.push(current.clone());
            }
        }
        Boundary::Absorbing => {
            current[0] = zero;
            current[n_points - 1] = zero;
            let interior = n_points - 2;
            let diag: Vec<Complex<R>> =
                (1..=interior).map(|j| one + lambda * R::of(2.0) + mu(j)).collect();
            slices.push(current.clone());
            for _ in 0..grid.n_t {
                let rhs: Vec<Complex<R>> = (1..=interior)
                    .map(|j| {
                        (one - lambda * R::of(2.0) - mu(j)) * current[j]
                            + lambda * (current[j - 1] + current[j + 1])
                    })
                    .collect();
                let inner = solve_tridiagonal(&diag, -lambda, &rhs)?;
                current[1..=interior].copy_from_slice(&inner);
                slices.push(current.clone());
            }
        }
    }
    GridField::from_slices(*grid, slices)
}

/// Evolves the Klein-Gordon equation by leapfrog from `psi(0, x)` and
/// `dpsi/dt(0, x)`. Requires `c dt <= dx` (CFL); accuracy is second order
/// in both steps.
pub fn solve_klein_gordon<R: Real>(
    grid: &SpacetimeGrid<R>,
    initial: impl Fn(R) -> Complex<R>,
    initial_dt: impl Fn(R) -> Complex<R>,
    m: R,
    hbar: R,
    c: R,
) -> Result<GridField<R>> {
    grid.validate()?;
    if !(m > R::zero()) || !(hbar > R::zero()) || !(c > R::zero()) {
        return Err(Error::Config("solver requires m, hbar, c > 0".into()));
    }
    let dx = grid.dx();
    let dt = grid.dt();
    let cfl = c * dt / dx;
    if cfl > R::one() + R::of(1e-12) {
        return Err(Error::Config(format!(
            "leapfrog CFL violated: c dt / dx = {cfl} exceeds 1"
        )));
    }
    let n_points = stored_points(grid);
    let kappa = m * c / hbar;
    let kappa2 = kappa * kappa;
    let cdt2 = (c * dt) * (c * dt);
    let inv_dx2 = R::one() / (dx * dx);
    let absorbing = matches!(grid.boundary, Boundary::Absorbing);

    let lap = |field: &[Complex<R>], j: usize| -> Complex<R> {
        let (left, right) = if absorbing {
            (field[j - 1], field[j + 1])
        } else {
            (field[(j + n_points - 1) % n_points], field[(j + 1) % n_points])
        };
        (left + right - field[j] * R::of(2.0)) * inv_dx2
    };
    let range = if absorbing { 1..n_points - 1 } else { 0..n_points };

    let mut prev: Vec<Complex<R>> = (0..n_points).map(|j| initial(grid.x_at(j))).collect();
    if absorbing {
        let zero = Complex::new(R::zero(), R::zero());
        prev[0] = zero;
        prev[n_points - 1] = zero;
    }
    // Taylor start: psi^1 = psi^0 + dt dpsi^0 + (dt^2/2) c^2 (lap - kappa^2) psi^0.
    let mut current = prev.clone();
    for j in range.clone() {
        let accel = (lap(&prev, j) - prev[j] * kappa2) * cdt2;
        current[j] = prev[j] + initial_dt(grid.x_at(j)) * dt + accel * R::of(0.5);
    }

    let mut slices = Vec::with_capacity(grid.n_t + 1);
    slices.push(prev.clone());
    if grid.n_t >= 1 {
        slices.push(current.clone());
    }
    for _ in 2..=grid.n_t {
        let mut next = prev;
        for j in range.clone() {
            let accel = (lap(&current, j) - current[j] * kappa2) * cdt2;
            next[j] = current[j] * R::of(2.0) - next[j] + accel;
        }
        prev = current;
        current = next;
        slices.push(current.clone());
    }
    GridField::from_slices(*grid, slices)
}

/// Discrete leapfrog energy between slices `i` and `i + 1`:
/// `dx sum_j |Dt psi|^2 / c^2 + Re(Dx psi^{i+1} conj(Dx psi^i)) + kappa^2 Re(psi^{i+1} conj(psi^i))`
/// with forward differences. Exactly conserved by the leapfrog update, so
/// its drift measures only roundoff.
pub fn kg_discrete_energy<R: Real>(
    field: &GridField<R>,
    i: usize,
    m: R,
    hbar: R,
    c: R,
) -> Result<R> {
    if i + 1 > field.grid().n_t {
        return Err(Error::Config(format!(
            "energy needs slices {i} and {}, grid has {}",
            i + 1,
            field.grid().n_t + 1
        )));
    }
    let a = field.slice(i);
    let b = field.slice(i + 1);
    let n = field.n_points();
    let dx = field.grid().dx();
    let dt = field.grid().dt();
    let kappa = m * c / hbar;
    let periodic = matches!(field.grid().boundary, Boundary::Periodic);
    let mut sum = R::zero();
    for j in 0..n {
        let dtv = (b[j] - a[j]) / (c * dt);
        sum = sum + dtv.norm_sqr() + kappa * kappa * (b[j] * a[j].conj()).re;
        let jn = if periodic { (j + 1) % n } else { j + 1 };
        if jn < n || periodic {
            let da = (a[jn % n] - a[j]) / dx;
            let db = (b[jn % n] - b[j]) / dx;
            sum = sum + (db * da.conj()).re;
        }
    }
    Ok(sum * dx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wavefield::eval_amplitude;
    use crate::wavefield::GaussianPacket;

    fn mulberry(seed: &mut u64) -> f64 {
        // Small deterministic generator for solver spot checks.
        *seed = seed.wrapping_add(0x9e3779b97f4a7c15);
        let mut z = *seed;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        ((z ^ (z >> 31)) >> 11) as f64 / (1u64 << 53) as f64
    }

    fn random_complex(seed: &mut u64) -> Complex<f64> {
        Complex::new(mulberry(seed) - 0.5, mulberry(seed) - 0.5)
    }

    #[test]
    fn thomas_solver_inverts_explicit_matrix() {
        let n = 9;
        let mut seed = 7u64;
        let off = Complex::new(0.3, -0.2);
        let diag: Vec<Complex<f64>> =
            (0..n).map(|_| random_complex(&mut seed) + Complex::new(3.0, 0.0)).collect();
        let x_true: Vec<Complex<f64>> = (0..n).map(|_| random_complex(&mut seed)).collect();
        let rhs: Vec<Complex<f64>> = (0..n)
            .map(|i| {
                let mut v = diag[i] * x_true[i];
                if i > 0 {
                    v += off * x_true[i - 1];
                }
                if i + 1 < n {
                    v += off * x_true[i + 1];
                }
                v
            })
            .collect();
        let x = solve_tridiagonal(&diag, off, &rhs).unwrap();
        for (a, b) in x.iter().zip(&x_true) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn cyclic_solver_inverts_explicit_matrix() {
        let n = 8;
        let mut seed = 42u64;
        let off = Complex::new(-0.25, 0.4);
        let diag: Vec<Complex<f64>> =
            (0..n).map(|_| random_complex(&mut seed) + Complex::new(3.0, 0.0)).collect();
        let x_true: Vec<Complex<f64>> = (0..n).map(|_| random_complex(&mut seed)).collect();
        let rhs: Vec<Complex<f64>> = (0..n)
            .map(|i| {
                diag[i] * x_true[i]
                    + off * x_true[(i + n - 1) % n]
                    + off * x_true[(i + 1) % n]
            })
            .collect();
        let x = solve_cyclic_tridiagonal(&diag, off, &rhs).unwrap();
        for (a, b) in x.iter().zip(&x_true) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    fn periodic_grid(n_x: usize, n_t: usize, t_max: f64) -> SpacetimeGrid<f64> {
        SpacetimeGrid {
            t_min: 0.0,
            t_max,
            n_t,
            x_min: 0.0,
            x_max: 2.0 * std::f64::consts::PI,
            n_x,
            boundary: Boundary::Periodic,
        }
    }

    #[test]
    fn crank_nicolson_preserves_norm_with_potential() {
        let grid = periodic_grid(128, 200, 1.0);
        let potential: Vec<f64> = (0..128).map(|j| grid.x_at(j).cos()).collect();
        let field = solve_schrodinger(
            &grid,
            |x| Complex::new((-(x - 3.0) * (x - 3.0)).exp(), 0.0),
            Some(potential.as_slice()),
            1.0,
            1.0,
        )
        .unwrap();
        let n0 = field.slice_norm(0);
        let mut max_drift = 0.0f64;
        for i in 0..=grid.n_t {
            max_drift = max_drift.max((field.slice_norm(i) / n0 - 1.0).abs());
        }
        assert!(max_drift < 1e-12, "norm drift {max_drift}");
    }

    #[test]
    fn crank_nicolson_tracks_free_packet_closed_form() {
        let grid: SpacetimeGrid<f64> = SpacetimeGrid {
            t_min: 0.0,
            t_max: 1.0,
            n_t: 400,
            x_min: -15.0,
            x_max: 15.0,
            n_x: 512,
            boundary: Boundary::Absorbing,
        };
        let packet = GaussianPacket::new(0.0, 1.0, 0.5, 1.0, 1.0).unwrap();
        let provider = crate::wavefield::WavefieldProvider::Packet(packet);
        let field = solve_schrodinger(
            &grid,
            |x| provider.value(Event::new(0.0, x)).unwrap(),
            None,
            1.0,
            1.0,
        )
        .unwrap();
        let mut worst = 0.0f64;
        for &x in &[-1.0, 0.0, 0.4, 1.3] {
            let e = Event::new(1.0, x);
            let got = eval_amplitude(&field, e).unwrap();
            let want = packet.amplitude_exact(e);
            worst = worst.max((got - want).abs());
        }
        assert!(worst < 2e-3, "packet amplitude error {worst}");
    }

    #[test]
    fn leapfrog_tracks_plane_wave_phase() {
        let n_x = 64;
        let grid_probe = periodic_grid(n_x, 1, 1.0);
        let dx = grid_probe.dx();
        let dt = 0.5 * dx; // c = 1, CFL 0.5
        let n_t = (1.0 / dt).ceil() as usize;
        let grid = periodic_grid(n_x, n_t, n_t as f64 * dt);
        let k = 1.0;
        let omega = (k * k + 1.0f64).sqrt();
        let field = solve_klein_gordon(
            &grid,
            |x| Complex::from_polar(1.0, k * x),
            |x| Complex::from_polar(omega, k * x - std::f64::consts::FRAC_PI_2),
            1.0,
            1.0,
            1.0,
        )
        .unwrap();
        let mut worst = 0.0f64;
        let t_end = grid.t_at(grid.n_t);
        for j in [0, 10, 31] {
            let x = grid.x_at(j);
            let want = Complex::from_polar(1.0, k * x - omega * t_end);
            let got = field.slice(grid.n_t)[j];
            worst = worst.max((got - want).norm());
        }
        assert!(worst < 2e-3, "plane-wave error {worst}");
    }

    #[test]
    fn leapfrog_conserves_discrete_energy() {
        let n_x = 64;
        let grid_probe = periodic_grid(n_x, 1, 1.0);
        let dt = 0.5 * grid_probe.dx();
        let grid = periodic_grid(n_x, 500, 500.0 * dt);
        let k1 = 1.0;
        let k2 = 2.0;
        let (w1, w2) = ((k1 * k1 + 1.0f64).sqrt(), (k2 * k2 + 1.0f64).sqrt());
        let field = solve_klein_gordon(
            &grid,
            |x| Complex::from_polar(1.0, k1 * x) + Complex::from_polar(0.6, k2 * x),
            |x| {
                Complex::from_polar(w1, k1 * x - std::f64::consts::FRAC_PI_2)
                    + Complex::from_polar(0.6 * w2, k2 * x - std::f64::consts::FRAC_PI_2)
            },
            1.0,
            1.0,
            1.0,
        )
        .unwrap();
        let e0 = kg_discrete_energy(&field, 0, 1.0, 1.0, 1.0).unwrap();
        let mut drift = 0.0f64;
        for i in (0..grid.n_t).step_by(25) {
            let e = kg_discrete_energy(&field, i, 1.0, 1.0, 1.0).unwrap();
            drift = drift.max((e / e0 - 1.0).abs());
        }
        assert!(drift < 1e-12, "energy drift {drift}");
    }

    #[test]
    fn leapfrog_rejects_cfl_violation() {
        let grid = periodic_grid(64, 10, 10.0); // dt = 1 >> dx
        let err = solve_klein_gordon(
            &grid,
            |_| Complex::new(1.0, 0.0),
            |_| Complex::new(0.0, 0.0),
            1.0,
            1.0,
            1.0,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn interpolation_reproduces_smooth_field_off_nodes() {
        let grid = periodic_grid(128, 40, 1.0);
        let k = 1.0;
        let omega = 0.7;
        let f = |e: Event<f64>| Complex::from_polar(1.0, k * e.x - omega * e.t);
        let field = GridField::from_fn(grid, f).unwrap();
        let mut worst = 0.0f64;
        for &(t, x) in &[(0.013, 0.4), (0.5, 2.7), (0.987, 6.1), (0.3, -0.2), (0.7, 6.9)] {
            let got = field.value(Event::new(t, x)).unwrap();
            worst = worst.max((got - f(Event::new(t, x))).norm());
        }
        assert!(worst < 1e-4, "interpolation error {worst}");
    }

    #[test]
    fn interpolation_rejects_time_outside_range() {
        let grid = periodic_grid(16, 4, 1.0);
        let field = GridField::from_fn(grid, |_| Complex::new(1.0, 0.0)).unwrap();
        let err = field.value(Event::new(1.5, 0.0)).unwrap_err();
        assert!(matches!(err, Error::Domain(_)));
    }

    #[test]
    fn json_round_trip_preserves_values() {
        let grid = periodic_grid(16, 4, 1.0);
        let f = |e: Event<f64>| Complex::new((e.x + e.t).sin(), (e.x - e.t).cos());
        let field = GridField::from_fn(grid, f).unwrap();
        let mut buf = Vec::new();
        field.dump_json(&mut buf).unwrap();
        let loaded = GridField::<f64>::load_json(buf.as_slice()).unwrap();
        assert_eq!(field.n_points(), loaded.n_points());
        for i in 0..=grid.n_t {
            for (a, b) in field.slice(i).iter().zip(loaded.slice(i)) {
                assert_eq!(a, b);
            }
        }
        let e = Event::new(0.37, 1.234);
        assert_eq!(field.value(e).unwrap(), loaded.value(e).unwrap());
    }

    #[test]
    fn from_slices_rejects_non_finite_values() {
        let grid = periodic_grid(8, 3, 1.0);
        let mut slices = vec![vec![Complex::new(0.0, 0.0); 8]; 4];
        slices[2][3] = Complex::new(f64::NAN, 0.0);
        let err = GridField::from_slices(grid, slices).unwrap_err();
        assert!(matches!(err, Error::Numerical(_)));
    }
}
