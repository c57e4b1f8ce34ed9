//! Wavefunction providers and the finite-difference operators on them.
//!
//! A provider evaluates a complex scalar `psi(t, x)` on 1+1 spacetime.
//! Amplitude operators (`amp_laplacian`, `amp_dalembertian`) act on
//! `|psi|` directly, never on the complex field, because the mass field is
//! a functional of the amplitude alone. Phase-derived quantities use the
//! convention `S = hbar * arg(psi)` with the principal branch; derivative
//! helpers unwrap the branch locally between stencil points.
//!
//! Sign conventions (metric signature `(+,-)`):
//! `box = c^-2 d^2/dt^2 - d^2/dx^2`, raised flat gradients
//! `d^0 = c^-1 d/dt`, `d^1 = -d/dx`.

mod solve;

pub use solve::{kg_discrete_energy, solve_klein_gordon, solve_schrodinger, stored_points, GridField};

/// Complex scalar type used for wavefunction values, re-exported so
/// callers can build them without naming num-complex themselves.
pub use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::stencil::{d1_central4, d2_central4};

/// One point of 1+1 spacetime, coordinates `(t, x)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Event<R> {
    pub t: R,
    pub x: R,
}

impl<R: Real> Event<R> {
    pub fn new(t: R, x: R) -> Self {
        Self { t, x }
    }

    /// Event shifted by `dt` in coordinate time.
    pub fn shift_t(self, dt: R) -> Self {
        Self { t: self.t + dt, x: self.x }
    }

    /// Event shifted by `dx` in space.
    pub fn shift_x(self, dx: R) -> Self {
        Self { t: self.t, x: self.x + dx }
    }

    pub fn is_finite(self) -> bool {
        self.t.is_finite() && self.x.is_finite()
    }
}

/// Dispersion family a provider belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    /// `omega = hbar k^2 / 2m` (non-relativistic).
    Schrodinger,
    /// `omega = c sqrt(k^2 + (mc/hbar)^2)` (relativistic, on-shell).
    KleinGordon,
}

/// Uniform lattice over a rectangle of spacetime.
///
/// `n_x` spatial points at `x_min + j*dx` with `dx = (x_max - x_min)/n_x`;
/// `n_t` time steps of `dt = (t_max - t_min)/n_t`, i.e. `n_t + 1` stored
/// slices including both endpoints.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpacetimeGrid<R> {
    pub t_min: R,
    pub t_max: R,
    pub n_t: usize,
    pub x_min: R,
    pub x_max: R,
    pub n_x: usize,
    pub boundary: Boundary,
}

/// Spatial boundary treatment of grid fields.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    /// Field wraps around: `psi(x + L) = psi(x)`.
    Periodic,
    /// Field is pinned to zero at both edges.
    Absorbing,
}

impl<R: Real> SpacetimeGrid<R> {
    pub fn validate(&self) -> Result<()> {
        if self.n_x < 8 {
            return Err(Error::Config(format!("grid n_x = {} below minimum 8", self.n_x)));
        }
        if self.n_t < 1 {
            return Err(Error::Config("grid n_t must be at least 1".into()));
        }
        if !(self.x_max > self.x_min) {
            return Err(Error::Config("grid requires x_max > x_min".into()));
        }
        if !(self.t_max > self.t_min) {
            return Err(Error::Config("grid requires t_max > t_min".into()));
        }
        Ok(())
    }

    pub fn dx(&self) -> R {
        (self.x_max - self.x_min) / R::of(self.n_x as f64)
    }

    pub fn dt(&self) -> R {
        (self.t_max - self.t_min) / R::of(self.n_t as f64)
    }

    pub fn x_at(&self, j: usize) -> R {
        self.x_min + self.dx() * R::of(j as f64)
    }

    pub fn t_at(&self, i: usize) -> R {
        self.t_min + self.dt() * R::of(i as f64)
    }
}

/// One plane-wave mode `amp * exp(i (k x - omega t))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlaneWaveMode<R> {
    pub amp: Complex<R>,
    pub k: R,
}

/// Superposition of on-shell plane waves of one dispersion family.
#[derive(Debug, Clone, PartialEq)]
pub struct PlaneWaveSuperposition<R> {
    pub family: Family,
    pub modes: Vec<PlaneWaveMode<R>>,
    pub m: R,
    pub hbar: R,
    pub c: R,
}

impl<R: Real> PlaneWaveSuperposition<R> {
    pub fn new(family: Family, modes: Vec<PlaneWaveMode<R>>, m: R, hbar: R, c: R) -> Result<Self> {
        if modes.is_empty() {
            return Err(Error::Config("plane-wave superposition needs at least one mode".into()));
        }
        if !(m > R::zero()) || !(hbar > R::zero()) || !(c > R::zero()) {
            return Err(Error::Config("plane-wave superposition requires m, hbar, c > 0".into()));
        }
        Ok(Self { family, modes, m, hbar, c })
    }

    /// On-shell angular frequency of wavenumber `k`.
    pub fn omega(&self, k: R) -> R {
        match self.family {
            Family::Schrodinger => self.hbar * k * k / (R::of(2.0) * self.m),
            Family::KleinGordon => {
                let kappa = self.m * self.c / self.hbar;
                self.c * (k * k + kappa * kappa).sqrt()
            }
        }
    }

    fn value(&self, e: Event<R>) -> Complex<R> {
        let mut acc = Complex::new(R::zero(), R::zero());
        for mode in &self.modes {
            let phase = mode.k * e.x - self.omega(mode.k) * e.t;
            acc = acc + mode.amp * Complex::new(phase.cos(), phase.sin());
        }
        acc
    }
}

/// Free Schroedinger gaussian packet, peak-normalized at `t = 0`.
///
/// With `alpha(t) = sigma^2 + i hbar t / 2m` and `v_g = hbar k / m`:
/// `psi = sigma/sqrt(alpha) * exp(-(x - x_c - v_g t)^2 / 4 alpha)
///        * exp(i (k (x - x_c) - hbar k^2 t / 2m))`.
/// The amplitude spreads as `sigma(t) = sigma * sqrt(1 + (hbar t / 2m sigma^2)^2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianPacket<R> {
    pub center: R,
    pub sigma: R,
    pub carrier_k: R,
    pub m: R,
    pub hbar: R,
}

impl<R: Real> GaussianPacket<R> {
    pub fn new(center: R, sigma: R, carrier_k: R, m: R, hbar: R) -> Result<Self> {
        if !(sigma > R::zero()) || !(m > R::zero()) || !(hbar > R::zero()) {
            return Err(Error::Config("gaussian packet requires sigma, m, hbar > 0".into()));
        }
        Ok(Self { center, sigma, carrier_k, m, hbar })
    }

    fn alpha(&self, t: R) -> Complex<R> {
        Complex::new(self.sigma * self.sigma, self.hbar * t / (R::of(2.0) * self.m))
    }

    fn value(&self, e: Event<R>) -> Complex<R> {
        let two = R::of(2.0);
        let four = R::of(4.0);
        let alpha = self.alpha(e.t);
        let vg = self.hbar * self.carrier_k / self.m;
        let dx0 = e.x - self.center;
        let dxm = dx0 - vg * e.t;
        let omega = self.hbar * self.carrier_k * self.carrier_k / (two * self.m);
        let pref = Complex::new(self.sigma, R::zero()) / alpha.sqrt();
        let envelope = (-Complex::new(dxm * dxm, R::zero()) / (alpha * Complex::new(four, R::zero()))).exp();
        let carrier = Complex::new(R::zero(), self.carrier_k * dx0 - omega * e.t).exp();
        pref * envelope * carrier
    }

    /// Spread amplitude width at time `t` (closed form).
    pub fn sigma_at(&self, t: R) -> R {
        let r = self.hbar * t / (R::of(2.0) * self.m * self.sigma * self.sigma);
        self.sigma * (R::one() + r * r).sqrt()
    }

    /// Closed-form amplitude `|psi(t, x)|`.
    pub fn amplitude_exact(&self, e: Event<R>) -> R {
        let vg = self.hbar * self.carrier_k / self.m;
        let dxm = e.x - self.center - vg * e.t;
        let st = self.sigma_at(e.t);
        let four = R::of(4.0);
        // |sigma/sqrt(alpha)| = sqrt(sigma/st) since |alpha| = sigma * st.
        (self.sigma / st).sqrt() * (-(dxm * dxm) / (four * st * st)).exp()
    }
}

/// Spatial profile of a stationary mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Profile<R> {
    /// `exp(-(x - center)^2 / 4 sigma^2)`.
    Gaussian { center: R, sigma: R },
    /// `cos(k x)`.
    Cos { k: R },
    /// `sin(k x)`.
    Sin { k: R },
}

impl<R: Real> Profile<R> {
    pub fn eval(&self, x: R) -> R {
        match *self {
            Profile::Gaussian { center, sigma } => {
                let d = x - center;
                (-(d * d) / (R::of(4.0) * sigma * sigma)).exp()
            }
            Profile::Cos { k } => (k * x).cos(),
            Profile::Sin { k } => (k * x).sin(),
        }
    }
}

/// Stationary mode `amp * profile(x) * exp(-i omega t)`.
///
/// The amplitude `|psi| = |amp * profile(x)|` is time-independent; the phase
/// advances as `-omega t` where the profile is positive and jumps by pi
/// across profile sign changes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StaticMode<R> {
    pub profile: Profile<R>,
    pub amp: R,
    pub omega: R,
}

impl<R: Real> StaticMode<R> {
    pub fn new(profile: Profile<R>, amp: R, omega: R) -> Result<Self> {
        if !(amp > R::zero()) {
            return Err(Error::Config("static mode requires amp > 0".into()));
        }
        if let Profile::Gaussian { sigma, .. } = profile {
            if !(sigma > R::zero()) {
                return Err(Error::Config("gaussian profile requires sigma > 0".into()));
            }
        }
        Ok(Self { profile, amp, omega })
    }

    fn value(&self, e: Event<R>) -> Complex<R> {
        let p = self.amp * self.profile.eval(e.x);
        let ph = -self.omega * e.t;
        Complex::new(p * ph.cos(), p * ph.sin())
    }
}

/// A complex scalar field on 1+1 spacetime.
pub trait Wavefield<R: Real>: Send + Sync {
    /// Complex value at an event. Errors with [`Error::Domain`] outside the
    /// provider's domain (grid-backed fields only; closed forms are global).
    fn value(&self, e: Event<R>) -> Result<Complex<R>>;

    /// Amplitude `|psi|` at an event. The default takes the norm of
    /// [`Wavefield::value`]; providers with a closed-form amplitude should
    /// override it. The override matters numerically: `|exp(i theta)|`
    /// computed through the complex norm wobbles by an ulp with `theta`, and
    /// the second-difference stencils downstream divide that wobble by
    /// `h^2`. A closed form keeps time-independent amplitudes exactly
    /// time-independent.
    fn amplitude(&self, e: Event<R>) -> Result<R> {
        Ok(self.value(e)?.norm())
    }

    /// Scale of the peak amplitude, used to convert relative floors into
    /// absolute thresholds.
    fn peak_scale(&self) -> R;
}

/// The concrete provider kinds.
#[derive(Debug, Clone)]
pub enum WavefieldProvider<R: Real> {
    PlaneWaves(PlaneWaveSuperposition<R>),
    Packet(GaussianPacket<R>),
    Static(StaticMode<R>),
    Grid(GridField<R>),
}

impl<R: Real> Wavefield<R> for WavefieldProvider<R> {
    fn value(&self, e: Event<R>) -> Result<Complex<R>> {
        match self {
            WavefieldProvider::PlaneWaves(p) => Ok(p.value(e)),
            WavefieldProvider::Packet(p) => Ok(p.value(e)),
            WavefieldProvider::Static(p) => Ok(p.value(e)),
            WavefieldProvider::Grid(g) => g.value(e),
        }
    }

    fn amplitude(&self, e: Event<R>) -> Result<R> {
        match self {
            // A lone mode has constant amplitude; superpositions need the
            // complex sum.
            WavefieldProvider::PlaneWaves(p) if p.modes.len() == 1 => Ok(p.modes[0].amp.norm()),
            WavefieldProvider::PlaneWaves(p) => Ok(p.value(e).norm()),
            WavefieldProvider::Packet(p) => Ok(p.amplitude_exact(e)),
            WavefieldProvider::Static(p) => Ok((p.amp * p.profile.eval(e.x)).abs()),
            WavefieldProvider::Grid(g) => Ok(g.value(e)?.norm()),
        }
    }

    fn peak_scale(&self) -> R {
        match self {
            WavefieldProvider::PlaneWaves(p) => {
                p.modes.iter().map(|m| m.amp.norm()).fold(R::zero(), |a, b| a + b)
            }
            WavefieldProvider::Packet(_) => R::one(),
            WavefieldProvider::Static(p) => p.amp.abs(),
            WavefieldProvider::Grid(g) => g.peak(),
        }
    }
}

impl<R: Real> Wavefield<R> for &WavefieldProvider<R> {
    fn value(&self, e: Event<R>) -> Result<Complex<R>> {
        (**self).value(e)
    }
    fn amplitude(&self, e: Event<R>) -> Result<R> {
        (**self).amplitude(e)
    }
    fn peak_scale(&self) -> R {
        (**self).peak_scale()
    }
}

/// A value together with a node-proximity flag.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Flagged<R> {
    pub value: R,
    /// Some stencil sample sat below the amplitude floor.
    pub node_adjacent: bool,
}

/// Amplitude `|psi|` at an event. Exact to machine precision for closed
/// forms (see [`Wavefield::amplitude`]); interpolation error `O(dx^4)` and
/// `O(dt^4)` for grid fields.
pub fn eval_amplitude<R: Real, W: Wavefield<R>>(w: &W, e: Event<R>) -> Result<R> {
    w.amplitude(e)
}

/// Phase `S = hbar * arg(psi)`, principal branch `(-pi, pi]` scaled by hbar.
///
/// Errors with [`Error::Node`] when `|psi| < floor`; the phase is undefined
/// at amplitude nodes.
pub fn eval_phase<R: Real, W: Wavefield<R>>(w: &W, e: Event<R>, hbar: R, floor: R) -> Result<R> {
    let v = w.value(e)?;
    if v.norm() < floor {
        return Err(Error::Node(format!("|psi| = {} below floor {} at ({}, {})", v.norm(), floor, e.t, e.x)));
    }
    Ok(hbar * v.arg())
}

/// Lower-index phase gradient `(dS/dt, dS/dx)` via 4th-order central
/// differences with local branch unwrapping between adjacent stencil points.
pub fn phase_gradient<R: Real, W: Wavefield<R>>(
    w: &W,
    e: Event<R>,
    hbar: R,
    h: R,
    floor: R,
) -> Result<[R; 2]> {
    let dt = phase_d1(w, e, hbar, h, floor, true)?;
    let dx = phase_d1(w, e, hbar, h, floor, false)?;
    Ok([dt, dx])
}

/// First derivative of the unwrapped phase along one axis.
fn phase_d1<R: Real, W: Wavefield<R>>(
    w: &W,
    e: Event<R>,
    hbar: R,
    h: R,
    floor: R,
    along_t: bool,
) -> Result<R> {
    let mut vals = [Complex::new(R::zero(), R::zero()); 5];
    for (i, step) in (-2i32..=2).enumerate() {
        let off = h * R::of(step as f64);
        let ev = if along_t { e.shift_t(off) } else { e.shift_x(off) };
        let v = w.value(ev)?;
        if v.norm() < floor {
            return Err(Error::Node(format!(
                "|psi| below floor inside phase stencil at ({}, {})",
                ev.t, ev.x
            )));
        }
        vals[i] = v;
    }
    // Unwrap: successive differences arg(psi_{i+1} conj(psi_i)) stay on the
    // principal branch for small h; accumulate them around the center.
    let mut phases = [R::zero(); 5];
    phases[2] = vals[2].arg();
    for i in 3..5 {
        phases[i] = phases[i - 1] + (vals[i] * vals[i - 1].conj()).arg();
    }
    for i in (0..2).rev() {
        phases[i] = phases[i + 1] - (vals[i + 1] * vals[i].conj()).arg();
    }
    let twelve = R::of(12.0);
    let eight = R::of(8.0);
    let d = phases[0] - eight * phases[1] + eight * phases[3] - phases[4];
    Ok(hbar * d / (twelve * h))
}

/// Spatial Laplacian of the amplitude, `d^2|psi|/dx^2`, 4th-order stencil.
pub fn amp_laplacian<R: Real, W: Wavefield<R>>(w: &W, e: Event<R>, h: R) -> Result<R> {
    d2_central4(|dx| eval_amplitude(w, e.shift_x(dx)), h)
}

/// [`amp_laplacian`] with node-proximity flagging against `floor`.
pub fn amp_laplacian_flagged<R: Real, W: Wavefield<R>>(
    w: &W,
    e: Event<R>,
    h: R,
    floor: R,
) -> Result<Flagged<R>> {
    let mut node_adjacent = false;
    let value = d2_central4(
        |dx| {
            let a = eval_amplitude(w, e.shift_x(dx))?;
            if a < floor {
                node_adjacent = true;
            }
            Ok(a)
        },
        h,
    )?;
    Ok(Flagged { value, node_adjacent })
}

/// D'Alembertian of the amplitude, `box|psi| = c^-2 d^2|psi|/dt^2 - d^2|psi|/dx^2`,
/// 4th-order stencils along both axes. The result is flagged node-adjacent
/// when any stencil sample dips below `floor`; the value is still returned
/// (the discrete second derivative across an amplitude kink is meaningful
/// data for tachyon scans).
pub fn amp_dalembertian<R: Real, W: Wavefield<R>>(
    w: &W,
    e: Event<R>,
    h: R,
    c: R,
    floor: R,
) -> Result<Flagged<R>> {
    let mut node_adjacent = false;
    let mut sample = |ev: Event<R>| -> Result<R> {
        let a = eval_amplitude(w, ev)?;
        if a < floor {
            node_adjacent = true;
        }
        Ok(a)
    };
    let dtt = d2_central4(|dt| sample(e.shift_t(dt)), h)?;
    let dxx = d2_central4(|dx| sample(e.shift_x(dx)), h)?;
    Ok(Flagged { value: dtt / (c * c) - dxx, node_adjacent })
}

/// Residual of the current conservation law `d_mu(|psi|^2 d^mu S) = 0`,
/// i.e. `c^-2 d/dt(rho dS/dt) - d/dx(rho dS/dx)` with `rho = |psi|^2`.
///
/// Vanishes identically for exact solutions of the wave equations; the
/// returned value is the 4th-order stencil estimate of that identity.
pub fn continuity_residual<R: Real, W: Wavefield<R>>(
    w: &W,
    e: Event<R>,
    h: R,
    hbar: R,
    c: R,
    floor: R,
) -> Result<R> {
    let flux_t = |ev: Event<R>| -> Result<R> {
        let rho = eval_amplitude(w, ev)?.powi(2);
        Ok(rho * phase_d1(w, ev, hbar, h, floor, true)?)
    };
    let flux_x = |ev: Event<R>| -> Result<R> {
        let rho = eval_amplitude(w, ev)?.powi(2);
        Ok(rho * phase_d1(w, ev, hbar, h, floor, false)?)
    };
    let dt_part = d1_central4(|dt| flux_t(e.shift_t(dt)), h)?;
    let dx_part = d1_central4(|dx| flux_x(e.shift_x(dx)), h)?;
    Ok(dt_part / (c * c) - dx_part)
}

/// Product of single-particle wavefields: the closed-form many-body
/// amplitude `|Psi(e_1 .. e_N)| = prod_j |psi_j(e_j)|`.
#[derive(Debug, Clone)]
pub struct ProductWavefield<R: Real> {
    factors: Vec<WavefieldProvider<R>>,
}

impl<R: Real> ProductWavefield<R> {
    pub fn new(factors: Vec<WavefieldProvider<R>>) -> Result<Self> {
        if factors.is_empty() {
            return Err(Error::Config("product wavefield needs at least one factor".into()));
        }
        Ok(Self { factors })
    }

    pub fn factors(&self) -> &[WavefieldProvider<R>] {
        &self.factors
    }
}

/// A real amplitude over N-particle configurations `(e_1 .. e_N)`.
pub trait ManyBodyAmplitude<R: Real>: Send + Sync {
    fn n_particles(&self) -> usize;
    fn amplitude(&self, cfg: &[Event<R>]) -> Result<R>;
    fn peak_scale(&self) -> R;
}

impl<R: Real> ManyBodyAmplitude<R> for ProductWavefield<R> {
    fn n_particles(&self) -> usize {
        self.factors.len()
    }

    fn amplitude(&self, cfg: &[Event<R>]) -> Result<R> {
        if cfg.len() != self.factors.len() {
            return Err(Error::Config(format!(
                "configuration has {} events, wavefield has {} factors",
                cfg.len(),
                self.factors.len()
            )));
        }
        let mut a = R::one();
        for (f, &e) in self.factors.iter().zip(cfg) {
            a = a * eval_amplitude(f, e)?;
        }
        Ok(a)
    }

    fn peak_scale(&self) -> R {
        self.factors.iter().map(|f| f.peak_scale()).fold(R::one(), |a, b| a * b)
    }
}
