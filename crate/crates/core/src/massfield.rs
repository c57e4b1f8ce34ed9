//! The variable quantum mass built from a wavefunction amplitude.
//!
//! The central object is the exponential mass map
//!
//! ```text
//! M = m * exp( (hbar^2 / m^2 c^2) * box|psi| / |psi| )            (one body)
//! M = mu * exp( (hbar^2 / mu c^2) * sum_j (box_j|Psi| / |Psi|) / m_j )   (N bodies)
//! ```
//!
//! which stays strictly positive everywhere, unlike the additive
//! decomposition `M_std^2 = m^2 + (hbar^2/c^2) box|psi|/|psi|` that can turn
//! negative (a tachyonic region). [`tachyon_scan`] maps where the additive
//! form breaks down while the exponential form stays positive definite.
//!
//! Numerical guards: the exponent is clamped to `[-clamp_x, clamp_x]` and
//! evaluation inside `amp_floor * peak_scale` of an amplitude node either
//! errors (the ratio is singular at the node itself) or flags the sample as
//! node-adjacent (a stencil leg dipped below the floor).

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::stencil::{d1_central4, d2_central4};
use crate::wavefield::{
    amp_dalembertian, amp_laplacian_flagged, eval_amplitude, Event, Flagged, ManyBodyAmplitude,
    SpacetimeGrid, Wavefield, WavefieldProvider,
};

/// Physical constants and numerical guards for mass-field evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct MassParams<R> {
    pub hbar: R,
    pub c: R,
    /// Rest mass of the single particle, or [`Self::mu`] scale for N bodies.
    pub m: R,
    /// Per-particle rest masses for the many-body map (empty for one body).
    pub masses: Vec<R>,
    /// Mass scale `mu` of the many-body exponent (defaults to the mean of
    /// `masses`).
    pub mu: R,
    /// Exponent clamp: the raw exponent is limited to `[-clamp_x, clamp_x]`.
    pub clamp_x: R,
    /// Node floor relative to the provider's peak amplitude.
    pub amp_floor: R,
    /// Finite-difference step for the amplitude stencils.
    pub stencil_h: R,
}

impl<R: Real> MassParams<R> {
    /// One-body parameters with default guards (`clamp_x = 30`,
    /// `amp_floor = 1e-12`, `stencil_h = 1e-2`).
    pub fn single(m: R, hbar: R, c: R) -> Result<Self> {
        let p = Self {
            hbar,
            c,
            m,
            masses: Vec::new(),
            mu: m,
            clamp_x: R::of(30.0),
            amp_floor: R::of(1e-12),
            stencil_h: R::of(1e-2),
        };
        p.validate()?;
        Ok(p)
    }

    /// N-body parameters; `mu` defaults to the mean rest mass.
    pub fn many(masses: Vec<R>, hbar: R, c: R) -> Result<Self> {
        if masses.is_empty() {
            return Err(Error::Config("many-body mass params need at least one mass".into()));
        }
        let sum: R = masses.iter().copied().sum();
        let mu = sum / R::of(masses.len() as f64);
        let p = Self {
            hbar,
            c,
            m: mu,
            masses,
            mu,
            clamp_x: R::of(30.0),
            amp_floor: R::of(1e-12),
            stencil_h: R::of(1e-2),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_mu(mut self, mu: R) -> Result<Self> {
        self.mu = mu;
        self.validate()?;
        Ok(self)
    }

    pub fn with_clamp(mut self, clamp_x: R) -> Result<Self> {
        self.clamp_x = clamp_x;
        self.validate()?;
        Ok(self)
    }

    pub fn with_amp_floor(mut self, amp_floor: R) -> Result<Self> {
        self.amp_floor = amp_floor;
        self.validate()?;
        Ok(self)
    }

    pub fn with_stencil_h(mut self, stencil_h: R) -> Result<Self> {
        self.stencil_h = stencil_h;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.hbar > R::zero()) || !(self.c > R::zero()) {
            return Err(Error::Config("mass params require hbar, c > 0".into()));
        }
        if !(self.m > R::zero()) || !(self.mu > R::zero()) {
            return Err(Error::Config("mass params require m, mu > 0".into()));
        }
        if self.masses.iter().any(|&mi| !(mi > R::zero())) {
            return Err(Error::Config("every rest mass must be positive".into()));
        }
        if !(self.clamp_x > R::zero()) {
            return Err(Error::Config("exponent clamp must be positive".into()));
        }
        if !(self.amp_floor >= R::zero()) || !(self.amp_floor < R::one()) {
            return Err(Error::Config("amplitude floor must lie in [0, 1)".into()));
        }
        if !(self.stencil_h > R::zero()) {
            return Err(Error::Config("stencil step must be positive".into()));
        }
        Ok(())
    }

    /// Absolute amplitude floor for a given provider.
    pub fn floor_for<W: Wavefield<R>>(&self, w: &W) -> R {
        self.amp_floor * w.peak_scale()
    }
}

/// One mass evaluation with its guard flags.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MassSample<R> {
    /// The (clamped) mass value, always positive.
    pub value: R,
    /// Raw exponent before clamping.
    pub exponent_raw: R,
    /// The clamp was engaged.
    pub clamped: bool,
    /// Some amplitude sample in the stencil sat below the node floor.
    pub node_adjacent: bool,
}

/// Lower-index mass gradient `[c^-1 dM/dt, dM/dx]` with guard flags.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradSample<R> {
    pub lower: [R; 2],
    pub clamped: bool,
    pub node_adjacent: bool,
}

fn center_amplitude<R: Real, W: Wavefield<R>>(w: &W, e: Event<R>, floor: R) -> Result<R> {
    let a = eval_amplitude(w, e)?;
    if a < floor {
        return Err(Error::Node(format!(
            "|psi| = {a} below node floor {floor} at (t = {}, x = {})",
            e.t, e.x
        )));
    }
    Ok(a)
}

fn clamp_exponent<R: Real>(chi: R, params: &MassParams<R>, scale: R) -> MassSample<R> {
    let clamped = chi.abs() > params.clamp_x;
    let bounded = chi.max(-params.clamp_x).min(params.clamp_x);
    MassSample { value: scale * bounded.exp(), exponent_raw: chi, clamped, node_adjacent: false }
}

/// Non-relativistic quantum potential
/// `Q = -(hbar^2 / 2m) * (d^2|psi|/dx^2) / |psi|`.
pub fn quantum_potential_nr<R: Real, W: Wavefield<R>>(
    w: &W,
    e: Event<R>,
    params: &MassParams<R>,
) -> Result<R> {
    let floor = params.floor_for(w);
    let a = center_amplitude(w, e, floor)?;
    let lap = amp_laplacian_flagged(w, e, params.stencil_h, floor)?;
    Ok(-params.hbar * params.hbar / (R::of(2.0) * params.m) * lap.value / a)
}

/// One-body exponential mass
/// `M = m exp((hbar/mc)^2 box|psi| / |psi|)`.
pub fn mass_single<R: Real, W: Wavefield<R>>(
    w: &W,
    e: Event<R>,
    params: &MassParams<R>,
) -> Result<MassSample<R>> {
    let floor = params.floor_for(w);
    let a = center_amplitude(w, e, floor)?;
    let dal = amp_dalembertian(w, e, params.stencil_h, params.c, floor)?;
    let scale = params.hbar * params.hbar / (params.m * params.m * params.c * params.c);
    let chi = scale * dal.value / a;
    let mut sample = clamp_exponent(chi, params, params.m);
    sample.node_adjacent = dal.node_adjacent;
    Ok(sample)
}

/// Non-relativistic-limit mass
/// `M = m exp(-(hbar/mc)^2 (d^2|psi|/dx^2) / |psi|)`, i.e. the one-body map
/// with the d'Alembertian frozen to its static part. The exponent equals
/// `(2 / m c^2) Q` with `Q` the quantum potential.
pub fn mass_single_nr<R: Real, W: Wavefield<R>>(
    w: &W,
    e: Event<R>,
    params: &MassParams<R>,
) -> Result<MassSample<R>> {
    let floor = params.floor_for(w);
    let a = center_amplitude(w, e, floor)?;
    let lap = amp_laplacian_flagged(w, e, params.stencil_h, floor)?;
    let scale = params.hbar * params.hbar / (params.m * params.m * params.c * params.c);
    let chi = -scale * lap.value / a;
    let mut sample = clamp_exponent(chi, params, params.m);
    sample.node_adjacent = lap.node_adjacent;
    Ok(sample)
}

/// D'Alembertian of the N-body amplitude in the coordinates of particle
/// `j`, with node flagging.
fn config_dalembertian<R: Real, W: ManyBodyAmplitude<R> + ?Sized>(
    w: &W,
    cfg: &[Event<R>],
    j: usize,
    h: R,
    c: R,
    floor: R,
) -> Result<Flagged<R>> {
    let mut node_adjacent = false;
    let mut sample = |dt: R, dx: R| -> Result<R> {
        let mut shifted = cfg.to_vec();
        shifted[j].t = shifted[j].t + dt;
        shifted[j].x = shifted[j].x + dx;
        let a = w.amplitude(&shifted)?;
        if a < floor {
            node_adjacent = true;
        }
        Ok(a)
    };
    let dtt = d2_central4(|dt| sample(dt, R::zero()), h)?;
    let dxx = d2_central4(|dx| sample(R::zero(), dx), h)?;
    Ok(Flagged { value: dtt / (c * c) - dxx, node_adjacent })
}

/// N-body exponential mass
/// `M = mu exp((hbar^2 / mu c^2) sum_j (box_j|Psi| / |Psi|) / m_j)`.
///
/// With one particle and `mu = m` this reduces exactly to [`mass_single`].
pub fn mass_many<R: Real, W: ManyBodyAmplitude<R> + ?Sized>(
    w: &W,
    cfg: &[Event<R>],
    params: &MassParams<R>,
) -> Result<MassSample<R>> {
    let n = w.n_particles();
    if cfg.len() != n {
        return Err(Error::Config(format!(
            "configuration has {} events, amplitude expects {n}",
            cfg.len()
        )));
    }
    if params.masses.len() != n {
        return Err(Error::Config(format!(
            "params carry {} masses, amplitude expects {n}",
            params.masses.len()
        )));
    }
    let floor = params.amp_floor * w.peak_scale();
    let a = w.amplitude(cfg)?;
    if a < floor {
        return Err(Error::Node(format!(
            "|Psi| = {a} below node floor {floor} at the configuration"
        )));
    }
    let mut sum = R::zero();
    let mut node_adjacent = false;
    for (j, &mj) in params.masses.iter().enumerate() {
        let dal = config_dalembertian(w, cfg, j, params.stencil_h, params.c, floor)?;
        node_adjacent |= dal.node_adjacent;
        sum = sum + dal.value / (a * mj);
    }
    let chi = params.hbar * params.hbar / (params.mu * params.c * params.c) * sum;
    let mut sample = clamp_exponent(chi, params, params.mu);
    sample.node_adjacent = node_adjacent;
    Ok(sample)
}

/// Additive (standard) mass-squared decomposition
/// `M_std^2 = m^2 + (hbar/c)^2 box|psi| / |psi|`; negative values mark
/// tachyonic regions.
pub fn mass_sq_standard<R: Real, W: Wavefield<R>>(
    w: &W,
    e: Event<R>,
    params: &MassParams<R>,
) -> Result<Flagged<R>> {
    let floor = params.floor_for(w);
    let a = center_amplitude(w, e, floor)?;
    let dal = amp_dalembertian(w, e, params.stencil_h, params.c, floor)?;
    let h2c2 = params.hbar * params.hbar / (params.c * params.c);
    Ok(Flagged { value: params.m * params.m + h2c2 * dal.value / a, node_adjacent: dal.node_adjacent })
}

/// Lower-index gradient of the one-body exponential mass by 4th-order
/// differences of the clamped mass value. `h` is the differentiation step
/// (distinct from the amplitude stencil step inside each mass evaluation).
pub fn grad_mass<R: Real, W: Wavefield<R>>(
    w: &W,
    e: Event<R>,
    params: &MassParams<R>,
    h: R,
) -> Result<GradSample<R>> {
    let mut clamped = false;
    let mut node_adjacent = false;
    let mut value_at = |ev: Event<R>| -> Result<R> {
        let s = mass_single(w, ev, params)?;
        clamped |= s.clamped;
        node_adjacent |= s.node_adjacent;
        Ok(s.value)
    };
    let d_t = d1_central4(|dt| value_at(e.shift_t(dt)), h)?;
    let d_x = d1_central4(|dx| value_at(e.shift_x(dx)), h)?;
    Ok(GradSample { lower: [d_t / params.c, d_x], clamped, node_adjacent })
}

/// Lower-index gradient of the N-body mass in the coordinates of particle
/// `j`.
pub fn grad_mass_many<R: Real, W: ManyBodyAmplitude<R> + ?Sized>(
    w: &W,
    cfg: &[Event<R>],
    j: usize,
    params: &MassParams<R>,
    h: R,
) -> Result<GradSample<R>> {
    if j >= cfg.len() {
        return Err(Error::Config(format!("particle index {j} out of range {}", cfg.len())));
    }
    let mut clamped = false;
    let mut node_adjacent = false;
    let mut value_at = |dt: R, dx: R| -> Result<R> {
        let mut shifted = cfg.to_vec();
        shifted[j].t = shifted[j].t + dt;
        shifted[j].x = shifted[j].x + dx;
        let s = mass_many(w, &shifted, params)?;
        clamped |= s.clamped;
        node_adjacent |= s.node_adjacent;
        Ok(s.value)
    };
    let d_t = d1_central4(|dt| value_at(dt, R::zero()), h)?;
    let d_x = d1_central4(|dx| value_at(R::zero(), dx), h)?;
    Ok(GradSample { lower: [d_t / params.c, d_x], clamped, node_adjacent })
}

/// One flagged lattice point of a [`tachyon_scan`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TachyonPoint<R> {
    pub t: R,
    pub x: R,
    /// Additive-decomposition mass squared at the point (negative).
    pub mass_sq_std: R,
}

/// Summary of a lattice sweep comparing the two mass decompositions.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanReport<R> {
    pub n_evaluated: usize,
    /// Points where the additive mass squared is negative.
    pub tachyon_count: usize,
    pub clamped_count: usize,
    pub node_adjacent_count: usize,
    /// Points skipped because `|psi|` sat below the node floor.
    pub node_skipped: usize,
    pub min_mass_sq_std: R,
    pub max_mass_sq_std: R,
    pub min_mass_exp: R,
    pub max_mass_exp: R,
    /// The exponential mass stayed positive at every evaluated point.
    pub positive_definite: bool,
    /// Tachyonic points, capped at [`ScanReport::POINT_CAP`] entries.
    pub tachyon_points: Vec<TachyonPoint<R>>,
    pub points_truncated: bool,
}

impl<R> ScanReport<R> {
    pub const POINT_CAP: usize = 512;
}

/// Sweeps the grid lattice, evaluating both mass forms at every node where
/// the amplitude clears the node floor. The amplitude stencil step is the
/// scan's own `params.stencil_h`; set it near the lattice spacing `dx`.
/// Negative additive masses live in shrinking neighborhoods of amplitude
/// kinks, and a lattice point only detects one when its stencil actually
/// straddles the kink: a much smaller step leaves every stencil on one
/// smooth side and reports the point as ordinary.
pub fn tachyon_scan<R: Real, W: Wavefield<R>>(
    w: &W,
    grid: &SpacetimeGrid<R>,
    params: &MassParams<R>,
) -> Result<ScanReport<R>> {
    grid.validate()?;
    let floor = params.floor_for(w);
    let mut report = ScanReport {
        n_evaluated: 0,
        tachyon_count: 0,
        clamped_count: 0,
        node_adjacent_count: 0,
        node_skipped: 0,
        min_mass_sq_std: R::infinity(),
        max_mass_sq_std: R::neg_infinity(),
        min_mass_exp: R::infinity(),
        max_mass_exp: R::neg_infinity(),
        positive_definite: true,
        tachyon_points: Vec::new(),
        points_truncated: false,
    };
    let h2c2 = params.hbar * params.hbar / (params.c * params.c);
    let scale = h2c2 / (params.m * params.m);
    for i in 0..=grid.n_t {
        let t = grid.t_at(i);
        for j in 0..=grid.n_x {
            let x = grid.x_at(j);
            let e = Event::new(t, x);
            let a = eval_amplitude(w, e)?;
            if a < floor {
                report.node_skipped += 1;
                continue;
            }
            let dal = amp_dalembertian(w, e, params.stencil_h, params.c, floor)?;
            let ratio = dal.value / a;
            let msq = params.m * params.m + h2c2 * ratio;
            let exp_sample = clamp_exponent(scale * ratio, params, params.m);
            report.n_evaluated += 1;
            if dal.node_adjacent {
                report.node_adjacent_count += 1;
            }
            if exp_sample.clamped {
                report.clamped_count += 1;
            }
            report.min_mass_sq_std = report.min_mass_sq_std.min(msq);
            report.max_mass_sq_std = report.max_mass_sq_std.max(msq);
            report.min_mass_exp = report.min_mass_exp.min(exp_sample.value);
            report.max_mass_exp = report.max_mass_exp.max(exp_sample.value);
            if !(exp_sample.value > R::zero()) {
                report.positive_definite = false;
            }
            if msq < R::zero() {
                report.tachyon_count += 1;
                if report.tachyon_points.len() < ScanReport::<R>::POINT_CAP {
                    report.tachyon_points.push(TachyonPoint { t, x, mass_sq_std: msq });
                } else {
                    report.points_truncated = true;
                }
            }
        }
    }
    if report.n_evaluated == 0 {
        return Err(Error::Node("every lattice point sat below the node floor".into()));
    }
    Ok(report)
}

/// Comparison of the exponential mass against its first-order expansion and
/// against the additive decomposition, in the small-exponent regime.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FirstOrderReport<R> {
    /// Raw exponent `chi` at the probe event.
    pub chi: R,
    /// Exponential mass `m e^chi`.
    pub mass_exp: R,
    /// First-order expansion `m (1 + chi)`.
    pub mass_exp_linear: R,
    /// Additive-decomposition mass `m sqrt(1 + chi)`.
    pub mass_std: R,
    /// `(mass_exp - m) / (mass_std - m)`; tends to 2 as `chi -> 0`, i.e.
    /// the two decompositions deviate from the rest mass at different
    /// first-order rates.
    pub linear_term_ratio: R,
}

/// Expands both mass forms around the rest mass at `e`. Errors with
/// [`Error::OutOfRegime`] when `|chi| > 1` (the expansion is meaningless)
/// and with [`Error::Numerical`] when the additive form is already
/// tachyonic at the probe.
pub fn first_order_comparison<R: Real, W: Wavefield<R>>(
    w: &W,
    e: Event<R>,
    params: &MassParams<R>,
) -> Result<FirstOrderReport<R>> {
    let sample = mass_single(w, e, params)?;
    let chi = sample.exponent_raw;
    if chi.abs() > R::one() {
        return Err(Error::OutOfRegime(format!(
            "exponent chi = {chi} too large for a first-order comparison"
        )));
    }
    let one_plus = R::one() + chi;
    if !(one_plus > R::zero()) {
        return Err(Error::Numerical(format!(
            "additive mass squared m^2 (1 + chi) non-positive at chi = {chi}"
        )));
    }
    let m = params.m;
    let mass_exp = m * chi.exp();
    let mass_std = m * one_plus.sqrt();
    let denom = mass_std - m;
    let ratio = if denom == R::zero() { R::of(2.0) } else { (mass_exp - m) / denom };
    Ok(FirstOrderReport {
        chi,
        mass_exp,
        mass_exp_linear: m * (R::one() + chi),
        mass_std,
        linear_term_ratio: ratio,
    })
}

/// Spacetime-dependent mass the trajectory integrators consume.
pub trait MassField<R: Real>: Send + Sync {
    /// Rest mass `m` the field reduces to where the amplitude is flat.
    fn rest_mass(&self) -> R;
    fn c(&self) -> R;
    fn sample(&self, e: Event<R>) -> Result<MassSample<R>>;
    /// Lower-index gradient `[c^-1 dM/dt, dM/dx]`.
    fn grad(&self, e: Event<R>) -> Result<GradSample<R>>;
}

/// Mass field backed by a wavefunction provider via [`mass_single`].
#[derive(Debug, Clone)]
pub struct WavefieldMass<R: Real> {
    pub provider: Arc<WavefieldProvider<R>>,
    pub params: MassParams<R>,
    /// Step for the outer mass-gradient differences.
    pub grad_h: R,
}

impl<R: Real> WavefieldMass<R> {
    pub fn new(provider: Arc<WavefieldProvider<R>>, params: MassParams<R>) -> Result<Self> {
        params.validate()?;
        Ok(Self { provider, params, grad_h: R::of(1e-3) })
    }

    pub fn with_grad_h(mut self, grad_h: R) -> Result<Self> {
        if !(grad_h > R::zero()) {
            return Err(Error::Config("gradient step must be positive".into()));
        }
        self.grad_h = grad_h;
        Ok(self)
    }
}

impl<R: Real> MassField<R> for WavefieldMass<R> {
    fn rest_mass(&self) -> R {
        self.params.m
    }

    fn c(&self) -> R {
        self.params.c
    }

    fn sample(&self, e: Event<R>) -> Result<MassSample<R>> {
        mass_single(self.provider.as_ref(), e, &self.params)
    }

    fn grad(&self, e: Event<R>) -> Result<GradSample<R>> {
        grad_mass(self.provider.as_ref(), e, &self.params, self.grad_h)
    }
}

/// Closed-form mass field (for oracles and geometry checks).
pub struct AnalyticMass<R: Real> {
    rest_mass: R,
    c: R,
    f: Arc<dyn Fn(Event<R>) -> R + Send + Sync>,
    grad_h: R,
}

impl<R: Real> AnalyticMass<R> {
    pub fn new(
        rest_mass: R,
        c: R,
        f: impl Fn(Event<R>) -> R + Send + Sync + 'static,
    ) -> Result<Self> {
        if !(rest_mass > R::zero()) || !(c > R::zero()) {
            return Err(Error::Config("analytic mass requires m, c > 0".into()));
        }
        Ok(Self { rest_mass, c, f: Arc::new(f), grad_h: R::of(1e-4) })
    }

    pub fn with_grad_h(mut self, grad_h: R) -> Result<Self> {
        if !(grad_h > R::zero()) {
            return Err(Error::Config("gradient step must be positive".into()));
        }
        self.grad_h = grad_h;
        Ok(self)
    }
}

impl<R: Real> Clone for AnalyticMass<R> {
    fn clone(&self) -> Self {
        Self { rest_mass: self.rest_mass, c: self.c, f: Arc::clone(&self.f), grad_h: self.grad_h }
    }
}

impl<R: Real> fmt::Debug for AnalyticMass<R> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AnalyticMass")
            .field("rest_mass", &self.rest_mass)
            .field("c", &self.c)
            .field("grad_h", &self.grad_h)
            .finish_non_exhaustive()
    }
}

impl<R: Real> MassField<R> for AnalyticMass<R> {
    fn rest_mass(&self) -> R {
        self.rest_mass
    }

    fn c(&self) -> R {
        self.c
    }

    fn sample(&self, e: Event<R>) -> Result<MassSample<R>> {
        let value = (self.f)(e);
        if !(value > R::zero()) || !value.is_finite() {
            return Err(Error::Numerical(format!(
                "analytic mass {value} not positive and finite at (t = {}, x = {})",
                e.t, e.x
            )));
        }
        Ok(MassSample {
            value,
            exponent_raw: (value / self.rest_mass).ln(),
            clamped: false,
            node_adjacent: false,
        })
    }

    fn grad(&self, e: Event<R>) -> Result<GradSample<R>> {
        let d_t = d1_central4(|dt| Ok((self.f)(e.shift_t(dt))), self.grad_h)?;
        let d_x = d1_central4(|dx| Ok((self.f)(e.shift_x(dx))), self.grad_h)?;
        Ok(GradSample { lower: [d_t / self.c, d_x], clamped: false, node_adjacent: false })
    }
}
