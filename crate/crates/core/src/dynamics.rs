//! Trajectory states, integrators, and guidance initial conditions.
//!
//! Relativistic particles carry a two-velocity `v = (v^0, v^1)` with
//! `v^0 = c dt/dtau` and `v^1 = dx/dtau`, normalized on shell to
//! `v.v = (v^0)^2 - (v^1)^2 = c^2`. The equation of motion driven by a
//! spacetime-dependent mass `M` is
//!
//! ```text
//! a^mu = (1 / 2M) (c^2 d^mu M  -  v^mu (v.dM))
//! ```
//!
//! which is orthogonal to `v` on shell for any consistent gradient
//! estimate, so the recorded `vv_residual` isolates integrator error.
//! The N-body generalization couples every particle through the
//! configuration-space mass (see [`integrate_many`]).

use std::io;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::massfield::{
    mass_single_nr, quantum_potential_nr, MassField, MassParams, WavefieldMass,
};
use crate::scalar::Real;
use crate::stencil::d1_central4;
use crate::wavefield::{phase_gradient, Event, Wavefield, WavefieldProvider};

/// Relativistic particle state: an event, a two-velocity, and the proper
/// time accumulated so far.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParticleState<R> {
    pub position: Event<R>,
    /// `[v^0, v^1]` with `v^0 = c dt/dtau`, `v^1 = dx/dtau`.
    pub velocity: [R; 2],
    pub tau: R,
}

impl<R: Real> ParticleState<R> {
    /// A particle at rest: `v = (c, 0)`.
    pub fn at_rest(position: Event<R>, c: R) -> Self {
        Self { position, velocity: [c, R::zero()], tau: R::zero() }
    }

    /// From the spatial proper velocity `v^1 = dx/dtau`; `v^0` is fixed by
    /// the shell condition.
    pub fn from_spatial_velocity(position: Event<R>, v1: R, c: R) -> Self {
        Self { position, velocity: [(c * c + v1 * v1).sqrt(), v1], tau: R::zero() }
    }

    /// From the coordinate velocity `u = dx/dt`, which must satisfy
    /// `|u| < c`.
    pub fn from_coordinate_velocity(position: Event<R>, u: R, c: R) -> Result<Self> {
        if !(u.abs() < c) {
            return Err(Error::Init(format!("coordinate velocity |{u}| must be below c = {c}")));
        }
        let gamma = R::one() / (R::one() - u * u / (c * c)).sqrt();
        Ok(Self { position, velocity: [gamma * c, gamma * u], tau: R::zero() })
    }

    /// Rescales `v^0` so that `v.v = c^2` exactly.
    pub fn project_on_shell(&mut self, c: R) {
        self.velocity[0] = (c * c + self.velocity[1] * self.velocity[1]).sqrt();
    }

    /// Relative shell violation `(v.v - c^2) / c^2`.
    pub fn vv_residual(&self, c: R) -> R {
        let vv = self.velocity[0] * self.velocity[0] - self.velocity[1] * self.velocity[1];
        (vv - c * c) / (c * c)
    }

    pub fn is_finite(&self) -> bool {
        self.position.is_finite()
            && self.velocity[0].is_finite()
            && self.velocity[1].is_finite()
            && self.tau.is_finite()
    }
}

/// Guard flags accumulated while producing one trajectory row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RowFlags {
    /// A mass evaluation engaged the exponent clamp.
    pub clamped: bool,
    /// A stencil leg dipped below the amplitude node floor.
    pub node_adjacent: bool,
    /// The trajectory left the wavefield domain at this row.
    pub exited: bool,
}

impl RowFlags {
    /// Compact flag column: `c`, `n`, `x` concatenated in that order.
    pub fn code(&self) -> String {
        let mut s = String::new();
        if self.clamped {
            s.push('c');
        }
        if self.node_adjacent {
            s.push('n');
        }
        if self.exited {
            s.push('x');
        }
        s
    }
}

/// One recorded trajectory sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryRow<R> {
    pub step: usize,
    /// Proper time for relativistic runs, coordinate time for
    /// non-relativistic runs, affine parameter for geodesics.
    pub tau: R,
    pub t: R,
    pub x: R,
    pub v0: R,
    pub v1: R,
    /// Relative shell violation; geodesic records store
    /// `(g(w, w) - c^2) / c^2` here.
    pub vv_residual: R,
    /// Mass value along the trajectory (zero where not meaningful).
    pub mass: R,
    pub flags: RowFlags,
}

/// How an integration ended.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Outcome {
    /// All requested steps (or the stop time) were reached.
    Completed,
    /// The trajectory left the provider's domain at the given step.
    ExitedDomain { step: usize },
    /// The integration stopped early for the stated reason.
    Aborted { step: usize, reason: String },
}

/// A completed (possibly truncated) trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord<R> {
    pub rows: Vec<TrajectoryRow<R>>,
    pub outcome: Outcome,
    /// Rest energy proxy `M_0 c^2 / 2` frozen at launch (relativistic runs
    /// only).
    pub initial_energy: Option<R>,
}

impl<R: Real> TrajectoryRecord<R> {
    /// Energy proxy at row `i`: the launch value scaled by the current
    /// `v.v / c^2`, so its drift mirrors the shell residual exactly.
    pub fn energy_proxy_at(&self, i: usize) -> Option<R> {
        let e0 = self.initial_energy?;
        let row = self.rows.get(i)?;
        Some(e0 * (R::one() + row.vv_residual))
    }

    /// Largest absolute shell residual over all rows.
    pub fn max_vv_residual(&self) -> R {
        self.rows.iter().map(|r| r.vv_residual.abs()).fold(R::zero(), R::max)
    }

    /// Linear interpolation of `x` at coordinate time `t`. Requires the
    /// recorded `t` column to be strictly increasing.
    pub fn sample_x_at(&self, t: R) -> Result<R> {
        if self.rows.is_empty() {
            return Err(Error::Domain("trajectory record is empty".into()));
        }
        for pair in self.rows.windows(2) {
            if !(pair[1].t > pair[0].t) {
                return Err(Error::Numerical(format!(
                    "recorded coordinate time is not increasing near step {}",
                    pair[0].step
                )));
            }
        }
        let first = self.rows.first().unwrap();
        let last = self.rows.last().unwrap();
        let span = last.t - first.t;
        let tol = R::of(1e-9) * span.max(R::one());
        if t < first.t - tol || t > last.t + tol {
            return Err(Error::Domain(format!(
                "time {t} outside recorded range [{}, {}]",
                first.t, last.t
            )));
        }
        let t = t.max(first.t).min(last.t);
        for pair in self.rows.windows(2) {
            if t <= pair[1].t {
                let w = (t - pair[0].t) / (pair[1].t - pair[0].t);
                return Ok(pair[0].x + w * (pair[1].x - pair[0].x));
            }
        }
        Ok(last.x)
    }

    /// Writes the record as CSV with the fixed header
    /// `step,tau,t,x,v0,v1,vv_residual,mass,flags`.
    pub fn write_csv<W: io::Write>(&self, mut out: W) -> Result<()> {
        let io_err = |e: io::Error| Error::Config(format!("trajectory write failed: {e}"));
        writeln!(out, "step,tau,t,x,v0,v1,vv_residual,mass,flags").map_err(io_err)?;
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                r.step,
                r.tau,
                r.t,
                r.x,
                r.v0,
                r.v1,
                r.vv_residual,
                r.mass,
                r.flags.code()
            )
            .map_err(io_err)?;
        }
        Ok(())
    }
}

/// Step size and count for the fixed-step integrators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorOptions<R> {
    pub dtau: R,
    pub steps: usize,
    /// Rescale `v^0` back onto the shell after every step.
    pub renormalize: bool,
    /// Stop once coordinate time reaches this value.
    pub stop_at_t: Option<R>,
}

impl<R: Real> IntegratorOptions<R> {
    pub fn new(dtau: R, steps: usize) -> Result<Self> {
        if !(dtau > R::zero()) {
            return Err(Error::Config("integrator step must be positive".into()));
        }
        if steps == 0 {
            return Err(Error::Config("integrator needs at least one step".into()));
        }
        Ok(Self { dtau, steps, renormalize: false, stop_at_t: None })
    }

    pub fn with_renormalize(mut self, on: bool) -> Self {
        self.renormalize = on;
        self
    }

    pub fn with_stop_at_t(mut self, t: R) -> Self {
        self.stop_at_t = Some(t);
        self
    }
}

/// Acceleration sample with the flags gathered while computing it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AccelSample<R> {
    pub a: [R; 2],
    pub mass: R,
    pub clamped: bool,
    pub node_adjacent: bool,
}

/// One-body acceleration `a^mu = (c^2 d^mu M - v^mu (v.dM)) / 2M`.
///
/// Raised gradient components in flat coordinates: `d^0 = +d_0`,
/// `d^1 = -d_1` with `d_0 = c^-1 d/dt`.
pub fn accel_single<R: Real>(
    field: &dyn MassField<R>,
    e: Event<R>,
    v: [R; 2],
) -> Result<AccelSample<R>> {
    let c = field.c();
    let s = field.sample(e)?;
    let g = field.grad(e)?;
    let v_dot_dm = v[0] * g.lower[0] + v[1] * g.lower[1];
    let c2 = c * c;
    let inv_2m = R::one() / (R::of(2.0) * s.value);
    let a0 = inv_2m * (c2 * g.lower[0] - v[0] * v_dot_dm);
    let a1 = inv_2m * (-c2 * g.lower[1] - v[1] * v_dot_dm);
    Ok(AccelSample {
        a: [a0, a1],
        mass: s.value,
        clamped: s.clamped || g.clamped,
        node_adjacent: s.node_adjacent || g.node_adjacent,
    })
}

/// Classic fixed-step RK4 over a flat state vector.
pub(crate) fn rk4_vec<R: Real>(
    y: &[R],
    h: R,
    mut deriv: impl FnMut(&[R]) -> Result<Vec<R>>,
) -> Result<Vec<R>> {
    let n = y.len();
    let half = h * R::of(0.5);
    let k1 = deriv(y)?;
    let y2: Vec<R> = (0..n).map(|i| y[i] + half * k1[i]).collect();
    let k2 = deriv(&y2)?;
    let y3: Vec<R> = (0..n).map(|i| y[i] + half * k2[i]).collect();
    let k3 = deriv(&y3)?;
    let y4: Vec<R> = (0..n).map(|i| y[i] + h * k3[i]).collect();
    let k4 = deriv(&y4)?;
    let sixth = h / R::of(6.0);
    Ok((0..n)
        .map(|i| y[i] + sixth * (k1[i] + R::of(2.0) * (k2[i] + k3[i]) + k4[i]))
        .collect())
}

fn row_from_state<R: Real>(
    step: usize,
    state: &ParticleState<R>,
    c: R,
    mass: R,
    flags: RowFlags,
) -> TrajectoryRow<R> {
    TrajectoryRow {
        step,
        tau: state.tau,
        t: state.position.t,
        x: state.position.x,
        v0: state.velocity[0],
        v1: state.velocity[1],
        vv_residual: state.vv_residual(c),
        mass,
        flags,
    }
}

/// Integrates the one-body equation of motion in proper time with RK4.
///
/// Leaving the provider's domain truncates the record (outcome
/// [`Outcome::ExitedDomain`], last row flagged `x`); any other evaluation
/// failure or a non-finite state aborts with the reason recorded.
pub fn integrate_single<R: Real>(
    field: &dyn MassField<R>,
    initial: ParticleState<R>,
    opts: &IntegratorOptions<R>,
) -> Result<TrajectoryRecord<R>> {
    let c = field.c();
    let first = field.sample(initial.position)?;
    let initial_energy = R::of(0.5) * first.value * c * c;
    let mut rows = Vec::with_capacity(opts.steps + 1);
    rows.push(row_from_state(
        0,
        &initial,
        c,
        first.value,
        RowFlags { clamped: first.clamped, node_adjacent: first.node_adjacent, exited: false },
    ));

    let mut state = initial;
    let mut outcome = Outcome::Completed;
    'steps: for step in 0..opts.steps {
        if let Some(stop) = opts.stop_at_t {
            if state.position.t >= stop {
                break;
            }
        }
        let mut flags = RowFlags::default();
        let y = [state.position.t, state.position.x, state.velocity[0], state.velocity[1]];
        let stepped = rk4_vec(&y, opts.dtau, |y| {
            let e = Event::new(y[0], y[1]);
            let v = [y[2], y[3]];
            let acc = accel_single(field, e, v)?;
            flags.clamped |= acc.clamped;
            flags.node_adjacent |= acc.node_adjacent;
            Ok(vec![v[0] / c, v[1], acc.a[0], acc.a[1]])
        });
        let y = match stepped {
            Ok(y) => y,
            Err(Error::Domain(_)) => {
                outcome = Outcome::ExitedDomain { step };
                if let Some(last) = rows.last_mut() {
                    last.flags.exited = true;
                }
                break 'steps;
            }
            Err(e) => {
                outcome = Outcome::Aborted { step, reason: e.to_string() };
                break 'steps;
            }
        };
        state.position = Event::new(y[0], y[1]);
        state.velocity = [y[2], y[3]];
        state.tau = state.tau + opts.dtau;
        if opts.renormalize {
            state.project_on_shell(c);
        }
        if !state.is_finite() {
            outcome = Outcome::Aborted { step, reason: "state became non-finite".into() };
            break;
        }
        let (mass, clamped, node_adjacent) = match field.sample(state.position) {
            Ok(s) => (s.value, s.clamped, s.node_adjacent),
            Err(Error::Domain(_)) => {
                outcome = Outcome::ExitedDomain { step };
                if let Some(last) = rows.last_mut() {
                    last.flags.exited = true;
                }
                break 'steps;
            }
            Err(e) => {
                outcome = Outcome::Aborted { step, reason: e.to_string() };
                break 'steps;
            }
        };
        flags.clamped |= clamped;
        flags.node_adjacent |= node_adjacent;
        rows.push(row_from_state(step + 1, &state, c, mass, flags));
    }
    Ok(TrajectoryRecord { rows, outcome, initial_energy: Some(initial_energy) })
}

/// Relativistic guidance velocity from the phase gradient:
/// `p^mu = (-c^-1 dS/dt, dS/dx)` raised and future-directed, then
/// `v^mu = c p^mu / sqrt(p.p)` re-projected onto the shell.
///
/// A vanishing momentum yields the rest velocity; a spacelike momentum is
/// an [`Error::Init`].
pub fn guidance_velocity<R: Real, W: Wavefield<R>>(
    w: &W,
    e: Event<R>,
    hbar: R,
    c: R,
    h: R,
    floor: R,
) -> Result<[R; 2]> {
    let g = phase_gradient(w, e, hbar, h, floor)?;
    let mut p0 = -g[0] / c;
    let mut p1 = g[1];
    let scale = p0.abs().max(p1.abs());
    if scale < R::of(1e-12) * hbar.max(R::one()) {
        return Ok([c, R::zero()]);
    }
    if p0 < R::zero() {
        p0 = -p0;
        p1 = -p1;
    }
    let pp = p0 * p0 - p1 * p1;
    if !(pp > R::zero()) {
        return Err(Error::Init(format!(
            "phase gradient is spacelike at (t = {}, x = {}): p.p = {pp}",
            e.t, e.x
        )));
    }
    let norm = c / pp.sqrt();
    let v1 = p1 * norm;
    Ok([(c * c + v1 * v1).sqrt(), v1])
}

/// Non-relativistic guidance velocity `u = (dS/dx) / m`.
pub fn guidance_velocity_nr<R: Real, W: Wavefield<R>>(
    w: &W,
    e: Event<R>,
    params: &MassParams<R>,
) -> Result<R> {
    let floor = params.floor_for(w);
    let g = phase_gradient(w, e, params.hbar, params.stencil_h, floor)?;
    Ok(g[1] / params.m)
}

/// Non-relativistic quantum force per unit mass, computed along two routes
/// that are analytically identical:
///
/// * route A: `-(1/m) d/dx Q` with `Q` the quantum potential;
/// * route B: `-(c^2 / 2M) dM/dx` with `M` the non-relativistic mass map.
///
/// When `check_routes` is set the two are compared (tolerance `1e-6`
/// against the larger of one and the force scale) and a disagreement is an
/// [`Error::Numerical`]; route A is returned either way.
pub fn accel_nr<R: Real, W: Wavefield<R>>(
    w: &W,
    e: Event<R>,
    params: &MassParams<R>,
    check_routes: bool,
) -> Result<R> {
    let h = params.stencil_h;
    let route_a =
        -d1_central4(|dx| quantum_potential_nr(w, e.shift_x(dx), params), h)? / params.m;
    if check_routes {
        let mass_here = mass_single_nr(w, e, params)?.value;
        let dm = d1_central4(|dx| Ok(mass_single_nr(w, e.shift_x(dx), params)?.value), h)?;
        let route_b = -params.c * params.c / (R::of(2.0) * mass_here) * dm;
        let tol = R::of(1e-6) * route_a.abs().max(R::one());
        if (route_a - route_b).abs() > tol {
            return Err(Error::Numerical(format!(
                "quantum force routes disagree at (t = {}, x = {}): {route_a} vs {route_b}",
                e.t, e.x
            )));
        }
    }
    Ok(route_a)
}

/// Non-relativistic state: coordinate time, position, velocity `dx/dt`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NrState<R> {
    pub t: R,
    pub x: R,
    pub u: R,
}

/// Options for [`integrate_nr`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NrIntegratorOptions<R> {
    pub dt: R,
    pub steps: usize,
    /// Cross-check the two quantum-force routes at every stage.
    pub check_routes: bool,
}

impl<R: Real> NrIntegratorOptions<R> {
    pub fn new(dt: R, steps: usize) -> Result<Self> {
        if !(dt > R::zero()) {
            return Err(Error::Config("integrator step must be positive".into()));
        }
        if steps == 0 {
            return Err(Error::Config("integrator needs at least one step".into()));
        }
        Ok(Self { dt, steps, check_routes: true })
    }
}

/// Integrates `m d^2x/dt^2 = -d/dx (Q + V)` in coordinate time with RK4.
/// `classical_force` supplies `-(1/m) dV/dx` when a classical potential is
/// present. Rows store `tau = t`, `v0 = c`, `v1 = u`, a zero shell
/// residual, and the non-relativistic mass map in the mass column.
pub fn integrate_nr<R: Real, W: Wavefield<R>>(
    w: &W,
    params: &MassParams<R>,
    initial: NrState<R>,
    opts: &NrIntegratorOptions<R>,
    classical_force: Option<&dyn Fn(Event<R>) -> Result<R>>,
) -> Result<TrajectoryRecord<R>> {
    params.validate()?;
    let row_of = |step: usize, s: &NrState<R>, mass: R, flags: RowFlags| TrajectoryRow {
        step,
        tau: s.t,
        t: s.t,
        x: s.x,
        v0: params.c,
        v1: s.u,
        vv_residual: R::zero(),
        mass,
        flags,
    };
    let first = mass_single_nr(w, Event::new(initial.t, initial.x), params)?;
    let mut rows = Vec::with_capacity(opts.steps + 1);
    rows.push(row_of(
        0,
        &initial,
        first.value,
        RowFlags { clamped: first.clamped, node_adjacent: first.node_adjacent, exited: false },
    ));

    let mut state = initial;
    let mut outcome = Outcome::Completed;
    'steps: for step in 0..opts.steps {
        let y = [state.t, state.x, state.u];
        let stepped = rk4_vec(&y, opts.dt, |y| {
            let e = Event::new(y[0], y[1]);
            let mut a = accel_nr(w, e, params, opts.check_routes)?;
            if let Some(f) = classical_force {
                a = a + f(e)?;
            }
            Ok(vec![R::one(), y[2], a])
        });
        let y = match stepped {
            Ok(y) => y,
            Err(Error::Domain(_)) => {
                outcome = Outcome::ExitedDomain { step };
                if let Some(last) = rows.last_mut() {
                    last.flags.exited = true;
                }
                break 'steps;
            }
            Err(e) => {
                outcome = Outcome::Aborted { step, reason: e.to_string() };
                break 'steps;
            }
        };
        state = NrState { t: y[0], x: y[1], u: y[2] };
        if !(state.t.is_finite() && state.x.is_finite() && state.u.is_finite()) {
            outcome = Outcome::Aborted { step, reason: "state became non-finite".into() };
            break;
        }
        let (mass, flags) = match mass_single_nr(w, Event::new(state.t, state.x), params) {
            Ok(s) => (
                s.value,
                RowFlags { clamped: s.clamped, node_adjacent: s.node_adjacent, exited: false },
            ),
            Err(Error::Domain(_)) => {
                outcome = Outcome::ExitedDomain { step };
                if let Some(last) = rows.last_mut() {
                    last.flags.exited = true;
                }
                break 'steps;
            }
            Err(e) => {
                outcome = Outcome::Aborted { step, reason: e.to_string() };
                break 'steps;
            }
        };
        rows.push(row_of(step + 1, &state, mass, flags));
    }
    Ok(TrajectoryRecord { rows, outcome, initial_energy: None })
}

/// N-body acceleration of particle `i` driven by the configuration-space
/// mass `M(e_1 .. e_N)`:
///
/// ```text
/// a^{i mu} = (1/M) [ (N^2 c^2 / 2) d^{i mu} M
///                    - v^{i mu} sum_j (1 - delta_ij / 2) (v^j . d^j M) ]
/// ```
///
/// At N = 1 this reduces exactly to the one-body form.
pub fn accel_many<R: Real>(
    mass_of: &mut dyn FnMut(&[Event<R>]) -> Result<crate::massfield::MassSample<R>>,
    grad_of: &mut dyn FnMut(&[Event<R>], usize) -> Result<crate::massfield::GradSample<R>>,
    cfg: &[Event<R>],
    velocities: &[[R; 2]],
    c: R,
) -> Result<Vec<AccelSample<R>>> {
    let n = cfg.len();
    if velocities.len() != n {
        return Err(Error::Config("velocity count must match configuration size".into()));
    }
    let sample = mass_of(cfg)?;
    let mass = sample.value;
    let mut grads = Vec::with_capacity(n);
    let mut clamped = sample.clamped;
    let mut node_adjacent = sample.node_adjacent;
    for j in 0..n {
        let g = grad_of(cfg, j)?;
        clamped |= g.clamped;
        node_adjacent |= g.node_adjacent;
        grads.push(g.lower);
    }
    let dots: Vec<R> = (0..n)
        .map(|j| velocities[j][0] * grads[j][0] + velocities[j][1] * grads[j][1])
        .collect();
    let total: R = dots.iter().copied().sum();
    let n2c2_half = R::of((n * n) as f64) * c * c * R::of(0.5);
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let drag = total - R::of(0.5) * dots[i];
        let a0 = (n2c2_half * grads[i][0] - velocities[i][0] * drag) / mass;
        let a1 = (-n2c2_half * grads[i][1] - velocities[i][1] * drag) / mass;
        out.push(AccelSample { a: [a0, a1], mass, clamped, node_adjacent });
    }
    Ok(out)
}

/// Integrates N particles in lockstep proper time under the
/// configuration-space mass of a product (or otherwise entangled)
/// amplitude. Returns one record per particle; the shared mass value fills
/// every record's mass column.
pub fn integrate_many<R: Real>(
    amplitude: &dyn crate::wavefield::ManyBodyAmplitude<R>,
    params: &MassParams<R>,
    grad_h: R,
    initial: &[ParticleState<R>],
    opts: &IntegratorOptions<R>,
) -> Result<Vec<TrajectoryRecord<R>>> {
    params.validate()?;
    let n = initial.len();
    if n == 0 {
        return Err(Error::Config("many-body integration needs at least one particle".into()));
    }
    if amplitude.n_particles() != n || params.masses.len() != n {
        return Err(Error::Config(format!(
            "particle count mismatch: {} states, amplitude {}, masses {}",
            n,
            amplitude.n_particles(),
            params.masses.len()
        )));
    }
    if !(grad_h > R::zero()) {
        return Err(Error::Config("gradient step must be positive".into()));
    }
    let c = params.c;
    let cfg0: Vec<Event<R>> = initial.iter().map(|s| s.position).collect();
    let first = crate::massfield::mass_many(amplitude, &cfg0, params)?;
    let flags0 =
        RowFlags { clamped: first.clamped, node_adjacent: first.node_adjacent, exited: false };

    let mut states = initial.to_vec();
    let mut records: Vec<TrajectoryRecord<R>> = states
        .iter()
        .map(|s| TrajectoryRecord {
            rows: vec![row_from_state(0, s, c, first.value, flags0)],
            outcome: Outcome::Completed,
            initial_energy: None,
        })
        .collect();

    let mut y = Vec::with_capacity(4 * n);
    for s in &states {
        y.extend_from_slice(&[s.position.t, s.position.x, s.velocity[0], s.velocity[1]]);
    }

    let set_outcome = |records: &mut Vec<TrajectoryRecord<R>>, outcome: &Outcome| {
        for r in records.iter_mut() {
            r.outcome = outcome.clone();
            if matches!(outcome, Outcome::ExitedDomain { .. }) {
                if let Some(last) = r.rows.last_mut() {
                    last.flags.exited = true;
                }
            }
        }
    };

    'steps: for step in 0..opts.steps {
        let mut flags = RowFlags::default();
        let stepped = rk4_vec(&y, opts.dtau, |y| {
            let cfg: Vec<Event<R>> =
                (0..n).map(|i| Event::new(y[4 * i], y[4 * i + 1])).collect();
            let vels: Vec<[R; 2]> = (0..n).map(|i| [y[4 * i + 2], y[4 * i + 3]]).collect();
            let mut mass_of = |cfg: &[Event<R>]| crate::massfield::mass_many(amplitude, cfg, params);
            let mut grad_of = |cfg: &[Event<R>], j: usize| {
                crate::massfield::grad_mass_many(amplitude, cfg, j, params, grad_h)
            };
            let acc = accel_many(&mut mass_of, &mut grad_of, &cfg, &vels, c)?;
            let mut dy = Vec::with_capacity(4 * n);
            for (i, a) in acc.iter().enumerate() {
                flags.clamped |= a.clamped;
                flags.node_adjacent |= a.node_adjacent;
                dy.extend_from_slice(&[vels[i][0] / c, vels[i][1], a.a[0], a.a[1]]);
            }
            Ok(dy)
        });
        let new_y = match stepped {
            Ok(v) => v,
            Err(Error::Domain(_)) => {
                set_outcome(&mut records, &Outcome::ExitedDomain { step });
                break 'steps;
            }
            Err(e) => {
                set_outcome(&mut records, &Outcome::Aborted { step, reason: e.to_string() });
                break 'steps;
            }
        };
        y = new_y;
        for (i, s) in states.iter_mut().enumerate() {
            s.position = Event::new(y[4 * i], y[4 * i + 1]);
            s.velocity = [y[4 * i + 2], y[4 * i + 3]];
            s.tau = s.tau + opts.dtau;
            if opts.renormalize {
                s.project_on_shell(c);
                y[4 * i + 2] = s.velocity[0];
            }
        }
        if states.iter().any(|s| !s.is_finite()) {
            set_outcome(
                &mut records,
                &Outcome::Aborted { step, reason: "state became non-finite".into() },
            );
            break;
        }
        let cfg: Vec<Event<R>> = states.iter().map(|s| s.position).collect();
        let mass_now = match crate::massfield::mass_many(amplitude, &cfg, params) {
            Ok(s) => {
                flags.clamped |= s.clamped;
                flags.node_adjacent |= s.node_adjacent;
                s.value
            }
            Err(Error::Domain(_)) => {
                set_outcome(&mut records, &Outcome::ExitedDomain { step });
                break 'steps;
            }
            Err(e) => {
                set_outcome(&mut records, &Outcome::Aborted { step, reason: e.to_string() });
                break 'steps;
            }
        };
        for (i, r) in records.iter_mut().enumerate() {
            r.rows.push(row_from_state(step + 1, &states[i], c, mass_now, flags));
        }
    }
    Ok(records)
}

/// Setup of a relativistic-versus-non-relativistic trajectory comparison
/// across several light speeds.
#[derive(Debug, Clone, PartialEq)]
pub struct NonrelLimitSetup<R> {
    pub m: R,
    pub hbar: R,
    pub stencil_h: R,
    pub x0: R,
    /// Initial coordinate velocity shared by every run.
    pub u0: R,
    pub t_start: R,
    pub t_end: R,
    /// Coordinate times at which trajectories are compared.
    pub compare_times: Vec<R>,
    /// At least three light speeds, all positive.
    pub c_values: Vec<R>,
    pub dt_nr: R,
    pub dtau: R,
}

/// Result of [`nonrel_limit_deviation`].
#[derive(Debug, Clone, PartialEq)]
pub struct NonrelReport<R> {
    pub c_values: Vec<R>,
    /// `max_t |x_rel(t) - x_nr(t)|` per light speed.
    pub deviations: Vec<R>,
    /// Least-squares order `p` of `deviation ~ c^-p`, absent when the
    /// deviations are at roundoff.
    pub order_estimate: Option<R>,
    /// Every deviation sat at roundoff level (below `1e-12`).
    pub exact_match: bool,
}

fn lsq_slope<R: Real>(xs: &[R], ys: &[R]) -> R {
    let n = R::of(xs.len() as f64);
    let mx = xs.iter().copied().sum::<R>() / n;
    let my = ys.iter().copied().sum::<R>() / n;
    let mut num = R::zero();
    let mut den = R::zero();
    for (&x, &y) in xs.iter().zip(ys) {
        num = num + (x - mx) * (y - my);
        den = den + (x - mx) * (x - mx);
    }
    num / den
}

/// Runs one non-relativistic trajectory and one relativistic trajectory per
/// light speed from shared initial data, and fits the convergence order of
/// their deviation as `c` grows. The provider's amplitude must not depend
/// on `c` for the comparison to be meaningful.
pub fn nonrel_limit_deviation<R: Real>(
    provider: &Arc<WavefieldProvider<R>>,
    setup: &NonrelLimitSetup<R>,
) -> Result<NonrelReport<R>> {
    if setup.c_values.len() < 3 {
        return Err(Error::Comparison(format!(
            "need at least three light speeds, got {}",
            setup.c_values.len()
        )));
    }
    if setup.c_values.iter().any(|&c| !(c > R::zero())) {
        return Err(Error::Comparison("every light speed must be positive".into()));
    }
    if setup.compare_times.is_empty() {
        return Err(Error::Comparison("need at least one comparison time".into()));
    }
    if !(setup.t_end > setup.t_start) {
        return Err(Error::Comparison("comparison window must have positive length".into()));
    }
    for &t in &setup.compare_times {
        if t < setup.t_start || t > setup.t_end {
            return Err(Error::Comparison(format!(
                "comparison time {t} outside [{}, {}]",
                setup.t_start, setup.t_end
            )));
        }
    }

    let window = setup.t_end - setup.t_start;
    let nr_params = MassParams::single(setup.m, setup.hbar, R::one())?
        .with_stencil_h(setup.stencil_h)?;
    let nr_steps = (window / setup.dt_nr).as_f64().ceil() as usize + 1;
    let nr_opts = NrIntegratorOptions::new(setup.dt_nr, nr_steps)?;
    let nr_initial = NrState { t: setup.t_start, x: setup.x0, u: setup.u0 };
    let nr_record =
        integrate_nr(provider.as_ref(), &nr_params, nr_initial, &nr_opts, None)?;
    if nr_record.outcome != Outcome::Completed {
        return Err(Error::Comparison(format!(
            "non-relativistic reference run did not complete: {:?}",
            nr_record.outcome
        )));
    }

    let mut deviations = Vec::with_capacity(setup.c_values.len());
    for &c in &setup.c_values {
        let params = MassParams::single(setup.m, setup.hbar, c)?
            .with_stencil_h(setup.stencil_h)?;
        let field = WavefieldMass::new(Arc::clone(provider), params)?;
        let initial = ParticleState::from_coordinate_velocity(
            Event::new(setup.t_start, setup.x0),
            setup.u0,
            c,
        )?;
        // dt/dtau = gamma >= 1, so coordinate time advances at least as
        // fast as proper time; a small margin covers interpolation.
        let steps = (window / setup.dtau).as_f64().ceil() as usize + 4;
        let opts = IntegratorOptions::new(setup.dtau, steps)?.with_stop_at_t(setup.t_end);
        let record = integrate_single(&field, initial, &opts)?;
        if record.outcome != Outcome::Completed {
            return Err(Error::Comparison(format!(
                "relativistic run at c = {c} did not complete: {:?}",
                record.outcome
            )));
        }
        let mut worst = R::zero();
        for &t in &setup.compare_times {
            let d = (record.sample_x_at(t)? - nr_record.sample_x_at(t)?).abs();
            worst = worst.max(d);
        }
        deviations.push(worst);
    }

    let threshold = R::of(1e-12);
    let exact_match = deviations.iter().all(|&d| d <= threshold);
    let order_estimate = if exact_match {
        None
    } else {
        let xs: Vec<R> = setup.c_values.iter().map(|&c| c.ln()).collect();
        let ys: Vec<R> =
            deviations.iter().map(|&d| d.max(R::of(1e-300)).ln()).collect();
        Some(-lsq_slope(&xs, &ys))
    };
    Ok(NonrelReport {
        c_values: setup.c_values.clone(),
        deviations,
        order_estimate,
        exact_match,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::massfield::AnalyticMass;
    use crate::wavefield::{Family, GaussianPacket, PlaneWaveMode, PlaneWaveSuperposition, Profile, StaticMode};
    use approx::assert_relative_eq;
    use num_complex::Complex;
    use proptest::prelude::*;

    fn constant_mass(c: f64) -> AnalyticMass<f64> {
        AnalyticMass::new(1.0, c, |_| 1.0).unwrap()
    }

    fn gaussian_mass_provider(sigma: f64) -> Arc<WavefieldProvider<f64>> {
        Arc::new(WavefieldProvider::Static(
            StaticMode::new(Profile::Gaussian { center: 0.0, sigma }, 1.0, 1.0).unwrap(),
        ))
    }

    #[test]
    fn free_particle_moves_linearly() {
        let field = constant_mass(1.0);
        let initial = ParticleState::from_spatial_velocity(Event::new(0.0, 0.5), 0.75, 1.0);
        let opts = IntegratorOptions::new(1e-2, 100).unwrap();
        let rec = integrate_single(&field, initial, &opts).unwrap();
        assert_eq!(rec.outcome, Outcome::Completed);
        assert_eq!(rec.rows.len(), 101);
        let last = rec.rows.last().unwrap();
        let v0 = (1.0f64 + 0.75 * 0.75).sqrt();
        assert_relative_eq!(last.x, 0.5 + 0.75 * 1.0, max_relative = 1e-12);
        assert_relative_eq!(last.t, v0 * 1.0, max_relative = 1e-12);
        assert!(rec.max_vv_residual() < 1e-14);
    }

    #[test]
    fn particle_at_rest_in_constant_mass_stays_put() {
        let field = constant_mass(2.0);
        let initial = ParticleState::at_rest(Event::new(0.0, -1.0), 2.0);
        let opts = IntegratorOptions::new(1e-2, 50).unwrap();
        let rec = integrate_single(&field, initial, &opts).unwrap();
        let last = rec.rows.last().unwrap();
        assert_relative_eq!(last.x, -1.0, max_relative = 1e-14);
        // dt/dtau = v0/c = 1, so t equals the elapsed proper time.
        assert_relative_eq!(last.t, 0.5, max_relative = 1e-12);
    }

    #[test]
    fn shell_residual_stays_tiny_on_gaussian_mass_hill() {
        let provider = gaussian_mass_provider(0.7);
        let params = crate::massfield::MassParams::single(1.0, 1.0, 1.0).unwrap();
        let field = WavefieldMass::new(Arc::clone(&provider), params).unwrap();
        let initial = ParticleState::at_rest(Event::new(0.0, 1e-4), 1.0);
        let opts = IntegratorOptions::new(1e-3, 500).unwrap();
        let rec = integrate_single(&field, initial, &opts).unwrap();
        assert_eq!(rec.outcome, Outcome::Completed);
        assert!(rec.max_vv_residual() < 1e-10, "residual {}", rec.max_vv_residual());
        // The hill is repulsive: the particle slides away from the peak.
        assert!(rec.rows.last().unwrap().x > 1e-4);
    }

    #[test]
    fn shell_residual_shrinks_at_fourth_order_in_dtau() {
        let provider = gaussian_mass_provider(0.7);
        let params = crate::massfield::MassParams::single(1.0, 1.0, 1.0).unwrap();
        let field = WavefieldMass::new(Arc::clone(&provider), params).unwrap();
        let run = |dtau: f64, steps: usize| {
            let initial = ParticleState::at_rest(Event::new(0.0, 0.3), 1.0);
            let opts = IntegratorOptions::new(dtau, steps).unwrap();
            integrate_single(&field, initial, &opts).unwrap().max_vv_residual()
        };
        let coarse = run(4e-3, 250);
        let fine = run(2e-3, 500);
        let ratio = coarse / fine;
        assert!(
            (6.0..40.0).contains(&ratio),
            "expected roughly 16x shrink, got {coarse} / {fine} = {ratio}"
        );
    }

    #[test]
    fn energy_proxy_tracks_shell_residual() {
        let field = constant_mass(1.0);
        let initial = ParticleState::at_rest(Event::new(0.0, 0.0), 1.0);
        let opts = IntegratorOptions::new(1e-2, 10).unwrap();
        let rec = integrate_single(&field, initial, &opts).unwrap();
        assert_relative_eq!(rec.initial_energy.unwrap(), 0.5, max_relative = 1e-14);
        let e = rec.energy_proxy_at(10).unwrap();
        assert_relative_eq!(e, 0.5 * (1.0 + rec.rows[10].vv_residual), max_relative = 1e-15);
    }

    #[test]
    fn guidance_recovers_de_broglie_velocity() {
        // k = 0.75, omega = 1.25 (m = c = hbar = 1) moves at 0.6 c.
        let w = WavefieldProvider::PlaneWaves(
            PlaneWaveSuperposition::new(
                Family::KleinGordon,
                vec![PlaneWaveMode { amp: Complex::new(1.0, 0.0), k: 0.75 }],
                1.0,
                1.0,
                1.0,
            )
            .unwrap(),
        );
        let v = guidance_velocity(&w, Event::new(0.2, 0.4), 1.0, 1.0, 1e-3, 1e-12).unwrap();
        assert_relative_eq!(v[1], 0.75, max_relative = 1e-8);
        assert_relative_eq!(v[0], 1.25, max_relative = 1e-8);
        assert_relative_eq!(v[1] / v[0], 0.6, max_relative = 1e-8);
    }

    #[test]
    fn guidance_on_standing_wave_is_rest() {
        let w = WavefieldProvider::PlaneWaves(
            PlaneWaveSuperposition::new(
                Family::KleinGordon,
                vec![
                    PlaneWaveMode { amp: Complex::new(1.0, 0.0), k: 1.0 },
                    PlaneWaveMode { amp: Complex::new(1.0, 0.0), k: -1.0 },
                ],
                1.0,
                1.0,
                1.0,
            )
            .unwrap(),
        );
        let v: [f64; 2] = guidance_velocity(&w, Event::new(0.1, 0.3), 1.0, 1.0, 1e-3, 1e-12).unwrap();
        assert!(v[1].abs() < 1e-9, "standing wave should guide to rest, got {}", v[1]);
        assert_relative_eq!(v[0], 1.0, max_relative = 1e-9);
    }

    #[test]
    fn nr_guidance_recovers_carrier_velocity() {
        let w = WavefieldProvider::Packet(GaussianPacket::new(0.0, 1.0, 0.6, 1.0, 1.0).unwrap());
        let params = crate::massfield::MassParams::single(1.0, 1.0, 1.0)
            .unwrap()
            .with_stencil_h(1e-3)
            .unwrap();
        let u = guidance_velocity_nr(&w, Event::new(0.0, 0.0), &params).unwrap();
        assert_relative_eq!(u, 0.6, max_relative = 1e-8);
    }

    #[test]
    fn nr_spreading_packet_follows_closed_form_scaling() {
        // Free packet trajectories scale with the spreading width:
        // x(t) = x_c + v_g t + (x_0 - x_c) sigma(t)/sigma_0.
        let packet = GaussianPacket::new(0.0, 1.0, 0.0, 1.0, 1.0).unwrap();
        let w = WavefieldProvider::Packet(packet);
        let params = crate::massfield::MassParams::single(1.0, 1.0, 1.0).unwrap();
        let opts = NrIntegratorOptions::new(1e-3, 2000).unwrap();
        let rec = integrate_nr(&w, &params, NrState { t: 0.0, x: 0.8, u: 0.0 }, &opts, None)
            .unwrap();
        assert_eq!(rec.outcome, Outcome::Completed);
        let want = 0.8 * packet.sigma_at(2.0) / 1.0;
        let got = rec.rows.last().unwrap().x;
        assert_relative_eq!(got, want, max_relative = 1e-5);
    }

    #[test]
    fn nr_moving_packet_follows_closed_form() {
        let packet = GaussianPacket::new(0.0, 1.0, 0.4, 1.0, 1.0).unwrap();
        let w = WavefieldProvider::Packet(packet);
        let params = crate::massfield::MassParams::single(1.0, 1.0, 1.0).unwrap();
        let u0 = guidance_velocity_nr(&w, Event::new(0.0, 0.5), &params).unwrap();
        let opts = NrIntegratorOptions::new(1e-3, 1500).unwrap();
        let rec =
            integrate_nr(&w, &params, NrState { t: 0.0, x: 0.5, u: u0 }, &opts, None).unwrap();
        let t_end = 1.5;
        let want = 0.4 * t_end + 0.5 * packet.sigma_at(t_end);
        let got = rec.rows.last().unwrap().x;
        assert_relative_eq!(got, want, max_relative = 1e-5);
    }

    #[test]
    fn one_body_lockstep_matches_single_integration() {
        let provider = gaussian_mass_provider(1.0);
        let params = crate::massfield::MassParams::single(1.0, 1.0, 1.0).unwrap();
        let single_field =
            WavefieldMass::new(Arc::clone(&provider), params.clone()).unwrap();
        let initial = ParticleState::from_spatial_velocity(Event::new(0.0, 0.4), 0.2, 1.0);
        let opts = IntegratorOptions::new(1e-3, 300).unwrap();
        let single = integrate_single(&single_field, initial, &opts).unwrap();

        let prod = crate::wavefield::ProductWavefield::new(vec![(*provider).clone()]).unwrap();
        let many_params = crate::massfield::MassParams::many(vec![1.0], 1.0, 1.0).unwrap();
        let many = integrate_many(&prod, &many_params, 1e-3, &[initial], &opts).unwrap();
        assert_eq!(many.len(), 1);
        let a = single.rows.last().unwrap();
        let b = many[0].rows.last().unwrap();
        assert_relative_eq!(a.x, b.x, max_relative = 1e-9);
        assert_relative_eq!(a.v1, b.v1, epsilon = 1e-9);
    }

    #[test]
    fn mirror_symmetric_pair_stays_mirror_symmetric() {
        let g = |center: f64| {
            WavefieldProvider::Static(
                StaticMode::new(Profile::Gaussian { center, sigma: 1.0 }, 1.0, 1.0).unwrap(),
            )
        };
        let prod = crate::wavefield::ProductWavefield::new(vec![g(0.0), g(0.0)]).unwrap();
        let params = crate::massfield::MassParams::many(vec![1.0, 1.0], 1.0, 1.0).unwrap();
        let left = ParticleState::at_rest(Event::new(0.0, -0.5), 1.0);
        let right = ParticleState::at_rest(Event::new(0.0, 0.5), 1.0);
        let opts = IntegratorOptions::new(1e-3, 400).unwrap();
        let recs = integrate_many(&prod, &params, 1e-3, &[left, right], &opts).unwrap();
        for (a, b) in recs[0].rows.iter().zip(&recs[1].rows) {
            assert!((a.x + b.x).abs() < 1e-10, "asymmetry {} at step {}", a.x + b.x, a.step);
            assert!((a.v1 + b.v1).abs() < 1e-10);
        }
    }

    #[test]
    fn leaving_a_grid_domain_truncates_the_record() {
        use crate::wavefield::{Boundary, GridField, SpacetimeGrid};
        let grid = SpacetimeGrid {
            t_min: -0.2,
            t_max: 0.4,
            n_t: 60,
            x_min: -8.0,
            x_max: 8.0,
            n_x: 64,
            boundary: Boundary::Periodic,
        };
        // Flat amplitude: constant mass, so the particle coasts in t until
        // the slab runs out.
        let gf = GridField::from_fn(grid, |_| Complex::new(1.0, 0.0)).unwrap();
        let provider = Arc::new(WavefieldProvider::Grid(gf));
        let params = crate::massfield::MassParams::single(1.0, 1.0, 1.0)
            .unwrap()
            .with_stencil_h(5e-3)
            .unwrap();
        let field = WavefieldMass::new(provider, params).unwrap();
        let initial = ParticleState::at_rest(Event::new(0.0, 0.0), 1.0);
        let opts = IntegratorOptions::new(1e-2, 200).unwrap();
        let rec = integrate_single(&field, initial, &opts).unwrap();
        assert!(matches!(rec.outcome, Outcome::ExitedDomain { .. }));
        assert!(rec.rows.last().unwrap().flags.exited);
        assert!(rec.rows.len() < 201);
    }

    #[test]
    fn csv_output_has_fixed_header_and_flag_codes() {
        let rec = TrajectoryRecord {
            rows: vec![TrajectoryRow {
                step: 0,
                tau: 0.0,
                t: 0.0,
                x: 1.5,
                v0: 1.0,
                v1: 0.0,
                vv_residual: 0.0,
                mass: 1.0,
                flags: RowFlags { clamped: true, node_adjacent: false, exited: true },
            }],
            outcome: Outcome::Completed,
            initial_energy: None,
        };
        let mut buf = Vec::new();
        rec.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "step,tau,t,x,v0,v1,vv_residual,mass,flags");
        assert_eq!(lines.next().unwrap(), "0,0,0,1.5,1,0,0,1,cx");
    }

    #[test]
    fn stop_at_t_halts_after_crossing() {
        let field = constant_mass(1.0);
        let initial = ParticleState::at_rest(Event::new(0.0, 0.0), 1.0);
        let opts = IntegratorOptions::new(1e-2, 1000).unwrap().with_stop_at_t(0.5);
        let rec = integrate_single(&field, initial, &opts).unwrap();
        assert_eq!(rec.outcome, Outcome::Completed);
        let last = rec.rows.last().unwrap();
        assert!(last.t >= 0.5 && last.t < 0.52, "stopped at t = {}", last.t);
    }

    #[test]
    fn sample_x_at_interpolates_linearly() {
        let field = constant_mass(1.0);
        let initial = ParticleState::from_spatial_velocity(Event::new(0.0, 0.0), 0.3, 1.0);
        let opts = IntegratorOptions::new(1e-2, 100).unwrap();
        let rec = integrate_single(&field, initial, &opts).unwrap();
        // x(t) = v1/v0 * t for the free particle.
        let v0 = (1.0f64 + 0.09).sqrt();
        let x = rec.sample_x_at(0.5).unwrap();
        assert_relative_eq!(x, 0.3 / v0 * 0.5, max_relative = 1e-10);
        assert!(rec.sample_x_at(99.0).is_err());
    }

    #[test]
    fn nonrel_limit_order_is_quadratic_in_inverse_c() {
        let provider = gaussian_mass_provider(1.0);
        let setup = NonrelLimitSetup {
            m: 1.0,
            hbar: 1.0,
            stencil_h: 1e-2,
            x0: 0.4,
            u0: 0.1,
            t_start: 0.0,
            t_end: 2.0,
            compare_times: vec![1.0, 2.0],
            c_values: vec![10.0, 20.0, 40.0],
            dt_nr: 1e-3,
            dtau: 1e-3,
        };
        let report = nonrel_limit_deviation(&provider, &setup).unwrap();
        assert!(!report.exact_match);
        let p = report.order_estimate.unwrap();
        assert!((p - 2.0).abs() < 0.2, "order estimate {p}");
        assert!(report.deviations[0] > report.deviations[2]);
    }

    #[test]
    fn nonrel_comparison_requires_three_speeds() {
        let provider = gaussian_mass_provider(1.0);
        let setup = NonrelLimitSetup {
            m: 1.0,
            hbar: 1.0,
            stencil_h: 1e-2,
            x0: 0.2,
            u0: 0.0,
            t_start: 0.0,
            t_end: 1.0,
            compare_times: vec![1.0],
            c_values: vec![10.0, 20.0],
            dt_nr: 1e-2,
            dtau: 1e-2,
        };
        assert!(matches!(
            nonrel_limit_deviation(&provider, &setup),
            Err(Error::Comparison(_))
        ));
    }

    proptest! {
        #[test]
        fn coordinate_velocity_initialization_lands_on_shell(u in -0.99f64..0.99) {
            let s = ParticleState::from_coordinate_velocity(Event::new(0.0, 0.0), u, 1.0).unwrap();
            prop_assert!(s.vv_residual(1.0).abs() < 1e-12);
            // dx/dt = v1/v0 recovers u.
            prop_assert!((s.velocity[1] / s.velocity[0] - u).abs() < 1e-12);
        }

        #[test]
        fn superluminal_initialization_is_rejected(u in 1.0f64..5.0) {
            let r = ParticleState::from_coordinate_velocity(Event::new(0.0, 0.0), u, 1.0);
            prop_assert!(matches!(r, Err(Error::Init(_))));
        }
    }
}
