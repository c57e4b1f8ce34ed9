//! Static 1+1D metrics, Christoffel symbols, geodesics, and the conformal
//! rescaling that turns the mass-field force into free fall.
//!
//! Coordinates are `(x^0, x^1) = (ct, x)` with signature `(+,-)`, matching
//! the flat-space conventions in [`crate::dynamics`]: the same `[v^0, v^1]`
//! velocity pairs appear here, and `dt/dlambda = w^0 / c`.
//!
//! The key identity implemented and tested in this module: a particle
//! obeying the mass-field equation of motion in a base metric `g` follows,
//! as an unparametrized coordinate path, the affine geodesic of the
//! rescaled metric `g~ = (M/m) g`, with the affine parameter related by
//! `dlambda = sqrt(M/m) dtau` and the matched initial velocity
//! `w = v / sqrt(M/m)`.

pub mod expr;

use std::fmt;
use std::sync::Arc;

use crate::dynamics::{
    rk4_vec, AccelSample, IntegratorOptions, Outcome, ParticleState, RowFlags, TrajectoryRecord,
    TrajectoryRow,
};
use crate::error::{Error, Result};
use crate::massfield::{GradSample, MassField, MassSample};
use crate::scalar::Real;
use crate::stencil::d1_central4;
use crate::wavefield::Event;
use expr::Expr;

/// Christoffel symbols at one event, stored as `gamma[mu][nu][kappa]` and
/// symmetric in the lower index pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChristoffelSet<R> {
    pub gamma: [[[R; 2]; 2]; 2],
}

impl<R: Real> ChristoffelSet<R> {
    fn zero() -> Self {
        Self { gamma: [[[R::zero(); 2]; 2]; 2] }
    }

    /// Contraction `Gamma^mu_{nu kappa} w^nu w^kappa` for the geodesic
    /// equation.
    pub fn contract(&self, mu: usize, w: [R; 2]) -> R {
        let mut s = R::zero();
        for nu in 0..2 {
            for ka in 0..2 {
                s = s + self.gamma[mu][nu][ka] * w[nu] * w[ka];
            }
        }
        s
    }
}

/// A 1+1D spacetime metric with signature `(+,-)`.
#[derive(Clone)]
pub enum Metric<R: Real> {
    /// Flat `diag(1, -1)`.
    Minkowski,
    /// `ds^2 = f(x) (c dt)^2 - g(x) dx^2` with closed-form `f, g > 0`;
    /// Christoffels come from the stored symbolic derivatives.
    DiagonalStatic { f: Expr, f_dx: Expr, g: Expr, g_dx: Expr },
    /// Pointwise rescaling `omega2 * base`. Christoffels need the gradient
    /// of `ln(omega)`, estimated by central differences with step `grad_h`
    /// (`c` converts t-derivatives to x^0-derivatives).
    Conformal {
        base: Box<Metric<R>>,
        omega2: Arc<dyn Fn(Event<R>) -> Result<R> + Send + Sync>,
        grad_h: R,
        c: R,
    },
}

impl<R: Real> fmt::Debug for Metric<R> {
    fn fmt(&self, fm: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Metric::Minkowski => write!(fm, "Minkowski"),
            Metric::DiagonalStatic { f, g, .. } => {
                fm.debug_struct("DiagonalStatic").field("f", f).field("g", g).finish()
            }
            Metric::Conformal { base, grad_h, c, .. } => fm
                .debug_struct("Conformal")
                .field("base", base)
                .field("grad_h", grad_h)
                .field("c", c)
                .finish_non_exhaustive(),
        }
    }
}

impl<R: Real> Metric<R> {
    /// Parses the component functions of a static diagonal metric. Only
    /// the variable `x` is admitted, so time dependence is rejected here.
    pub fn diagonal_static(f_src: &str, g_src: &str) -> Result<Self> {
        let f = Expr::parse(f_src, &["x"])?;
        let g = Expr::parse(g_src, &["x"])?;
        let f_dx = f.derivative(0);
        let g_dx = g.derivative(0);
        Ok(Metric::DiagonalStatic { f, f_dx, g, g_dx })
    }

    /// Wraps `base` with a positive scalar factor field.
    pub fn conformal(
        base: Metric<R>,
        omega2: Arc<dyn Fn(Event<R>) -> Result<R> + Send + Sync>,
        grad_h: R,
        c: R,
    ) -> Result<Self> {
        if !(grad_h > R::zero()) {
            return Err(Error::Config("conformal gradient step must be positive".into()));
        }
        if !(c > R::zero()) {
            return Err(Error::Config("conformal metric requires c > 0".into()));
        }
        Ok(Metric::Conformal { base: Box::new(base), omega2, grad_h, c })
    }

    /// Lower-index components `g_{mu nu}` at `e`. A non-Lorentzian value
    /// (f, g, or the conformal factor not strictly positive) is reported
    /// as a numerical error.
    pub fn components(&self, e: Event<R>) -> Result<[[R; 2]; 2]> {
        match self {
            Metric::Minkowski => {
                Ok([[R::one(), R::zero()], [R::zero(), -R::one()]])
            }
            Metric::DiagonalStatic { f, g, .. } => {
                let fv = f.eval(&[e.x])?;
                let gv = g.eval(&[e.x])?;
                if !(fv > R::zero()) || !(gv > R::zero()) {
                    return Err(Error::Numerical(format!(
                        "metric signature violated at x = {}: f = {fv}, g = {gv}",
                        e.x
                    )));
                }
                Ok([[fv, R::zero()], [R::zero(), -gv]])
            }
            Metric::Conformal { base, omega2, .. } => {
                let o2 = omega2(e)?;
                if !(o2 > R::zero()) || !o2.is_finite() {
                    return Err(Error::Numerical(format!(
                        "conformal factor {o2} not positive at (t = {}, x = {})",
                        e.t, e.x
                    )));
                }
                let b = base.components(e)?;
                Ok([[o2 * b[0][0], o2 * b[0][1]], [o2 * b[1][0], o2 * b[1][1]]])
            }
        }
    }

    /// Upper-index components `g^{mu nu}` at `e`.
    pub fn inverse(&self, e: Event<R>) -> Result<[[R; 2]; 2]> {
        let g = self.components(e)?;
        let det = g[0][0] * g[1][1] - g[0][1] * g[1][0];
        if det == R::zero() || !det.is_finite() {
            return Err(Error::Numerical(format!(
                "metric is singular at (t = {}, x = {}): det = {det}",
                e.t, e.x
            )));
        }
        Ok([[g[1][1] / det, -g[0][1] / det], [-g[1][0] / det, g[0][0] / det]])
    }

    /// Christoffel symbols at `e`: exact symbolic values for closed-form
    /// metrics; for conformal metrics the base symbols plus the rescaling
    /// correction
    ///
    /// ```text
    /// delta^mu_nu l_ka + delta^mu_ka l_nu - g_{nu ka} g^{mu si} l_si,
    /// l = d ln(omega)
    /// ```
    ///
    /// with `l` estimated by 4th-order central differences of
    /// `ln(omega^2) / 2`.
    pub fn christoffels(&self, e: Event<R>) -> Result<ChristoffelSet<R>> {
        match self {
            Metric::Minkowski => Ok(ChristoffelSet::zero()),
            Metric::DiagonalStatic { f, f_dx, g, g_dx } => {
                let fv = f.eval(&[e.x])?;
                let gv = g.eval(&[e.x])?;
                if !(fv > R::zero()) || !(gv > R::zero()) {
                    return Err(Error::Numerical(format!(
                        "metric signature violated at x = {}: f = {fv}, g = {gv}",
                        e.x
                    )));
                }
                let fp = f_dx.eval(&[e.x])?;
                let gp = g_dx.eval(&[e.x])?;
                let two = R::of(2.0);
                let mut set = ChristoffelSet::zero();
                set.gamma[0][0][1] = fp / (two * fv);
                set.gamma[0][1][0] = set.gamma[0][0][1];
                set.gamma[1][0][0] = fp / (two * gv);
                set.gamma[1][1][1] = gp / (two * gv);
                Ok(set)
            }
            Metric::Conformal { base, omega2, grad_h, c } => {
                let mut set = base.christoffels(e)?;
                let g = base.components(e)?;
                let ginv = base.inverse(e)?;
                let log_factor = |ev: Event<R>| -> Result<R> {
                    let v = omega2(ev)?;
                    if !(v > R::zero()) || !v.is_finite() {
                        return Err(Error::Numerical(format!(
                            "conformal factor {v} not positive at (t = {}, x = {})",
                            ev.t, ev.x
                        )));
                    }
                    Ok(v.ln())
                };
                let half = R::of(0.5);
                let l = [
                    half * d1_central4(|dt| log_factor(e.shift_t(dt)), *grad_h)? / *c,
                    half * d1_central4(|dx| log_factor(e.shift_x(dx)), *grad_h)?,
                ];
                for mu in 0..2 {
                    let mut raised = R::zero();
                    for si in 0..2 {
                        raised = raised + ginv[mu][si] * l[si];
                    }
                    for nu in 0..2 {
                        for ka in 0..2 {
                            let mut corr = -g[nu][ka] * raised;
                            if mu == nu {
                                corr = corr + l[ka];
                            }
                            if mu == ka {
                                corr = corr + l[nu];
                            }
                            set.gamma[mu][nu][ka] = set.gamma[mu][nu][ka] + corr;
                        }
                    }
                }
                Ok(set)
            }
        }
    }

    /// The quadratic form `g(w, w)` at `e`.
    pub fn norm_sq(&self, e: Event<R>, w: [R; 2]) -> Result<R> {
        let g = self.components(e)?;
        Ok(g[0][0] * w[0] * w[0] + (g[0][1] + g[1][0]) * w[0] * w[1] + g[1][1] * w[1] * w[1])
    }

    /// The positive `w^0` that puts `(w^0, w1)` on the shell
    /// `g(w, w) = c^2` at `e`. Only diagonal metrics are supported (every
    /// metric constructible here is diagonal).
    pub fn on_shell_w0(&self, e: Event<R>, w1: R, c: R) -> Result<R> {
        let g = self.components(e)?;
        if g[0][1] != R::zero() || g[1][0] != R::zero() {
            return Err(Error::Config(
                "on-shell projection is only defined for diagonal metrics".into(),
            ));
        }
        let ratio = (c * c - g[1][1] * (w1 * w1)) / g[0][0];
        if !(ratio > R::zero()) {
            return Err(Error::Init(format!(
                "no timelike shell solution for w1 = {w1} at (t = {}, x = {})",
                e.t, e.x
            )));
        }
        Ok(ratio.sqrt())
    }
}

/// Curved-space one-body acceleration: the geodesic term plus the
/// mass-field force,
///
/// ```text
/// a^mu = -Gamma^mu_{nu ka} v^nu v^ka
///        + (c^2 g^{mu nu} d_nu M - v^mu (v.dM)) / 2M.
/// ```
///
/// With the Minkowski metric this reduces exactly to
/// [`crate::dynamics::accel_single`].
pub fn accel_curved<R: Real>(
    metric: &Metric<R>,
    field: &dyn MassField<R>,
    e: Event<R>,
    v: [R; 2],
) -> Result<AccelSample<R>> {
    let c = field.c();
    let s = field.sample(e)?;
    let gr = field.grad(e)?;
    let k = metric.christoffels(e)?;
    let ginv = metric.inverse(e)?;
    let v_dot_dm = v[0] * gr.lower[0] + v[1] * gr.lower[1];
    let c2 = c * c;
    let inv_2m = R::one() / (R::of(2.0) * s.value);
    let mut a = [R::zero(); 2];
    for (mu, slot) in a.iter_mut().enumerate() {
        let raised = ginv[mu][0] * gr.lower[0] + ginv[mu][1] * gr.lower[1];
        *slot = -k.contract(mu, v) + inv_2m * (c2 * raised - v[mu] * v_dot_dm);
    }
    Ok(AccelSample {
        a,
        mass: s.value,
        clamped: s.clamped || gr.clamped,
        node_adjacent: s.node_adjacent || gr.node_adjacent,
    })
}

/// N-body curved acceleration of particle `i`, evaluated at its own event:
///
/// ```text
/// a^{i mu} = -Gamma^mu_{nu ka}(e_i) v^{i nu} v^{i ka}
///            + (1/M) [ (N^2 c^2 / 2) g^{mu nu}(e_i) d^i_nu M
///                      - v^{i mu} sum_j (1 - delta_ij / 2) (v^j . d^j M) ]
/// ```
///
/// Minkowski reduces it to [`crate::dynamics::accel_many`], and N = 1 to
/// [`accel_curved`].
pub fn accel_many_curved<R: Real>(
    metric: &Metric<R>,
    mass_of: &mut dyn FnMut(&[Event<R>]) -> Result<MassSample<R>>,
    grad_of: &mut dyn FnMut(&[Event<R>], usize) -> Result<GradSample<R>>,
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
        let k = metric.christoffels(cfg[i])?;
        let ginv = metric.inverse(cfg[i])?;
        let drag = total - R::of(0.5) * dots[i];
        let mut a = [R::zero(); 2];
        for (mu, slot) in a.iter_mut().enumerate() {
            let raised = ginv[mu][0] * grads[i][0] + ginv[mu][1] * grads[i][1];
            *slot = -k.contract(mu, velocities[i])
                + (n2c2_half * raised - velocities[i][mu] * drag) / mass;
        }
        out.push(AccelSample { a, mass, clamped, node_adjacent });
    }
    Ok(out)
}

/// Residual of the shell/affine-normalization condition, relative:
/// `(g(w, w) - c^2) / c^2`.
fn norm_residual<R: Real>(metric: &Metric<R>, e: Event<R>, w: [R; 2], c: R) -> Result<R> {
    Ok((metric.norm_sq(e, w)? - c * c) / (c * c))
}

fn geodesic_row<R: Real>(
    step: usize,
    lambda: R,
    e: Event<R>,
    w: [R; 2],
    residual: R,
    mass: R,
    flags: RowFlags,
) -> TrajectoryRow<R> {
    TrajectoryRow {
        step,
        tau: lambda,
        t: e.t,
        x: e.x,
        v0: w[0],
        v1: w[1],
        vv_residual: residual,
        mass,
        flags,
    }
}

/// Integrates the affinely parametrized geodesic equation
/// `dw^mu/dlambda = -Gamma^mu_{nu ka} w^nu w^ka` with RK4.
///
/// `initial.velocity` should already satisfy `g(w, w) = c^2` at the start
/// (see [`Metric::on_shell_w0`]); the `vv_residual` column records the
/// relative drift of that normalization and the mass column is zero.
pub fn integrate_geodesic<R: Real>(
    metric: &Metric<R>,
    c: R,
    initial: ParticleState<R>,
    opts: &IntegratorOptions<R>,
) -> Result<TrajectoryRecord<R>> {
    let res0 = norm_residual(metric, initial.position, initial.velocity, c)?;
    let mut rows = Vec::with_capacity(opts.steps + 1);
    rows.push(geodesic_row(
        0,
        initial.tau,
        initial.position,
        initial.velocity,
        res0,
        R::zero(),
        RowFlags::default(),
    ));

    let mut state = initial;
    let mut outcome = Outcome::Completed;
    'steps: for step in 0..opts.steps {
        if let Some(stop) = opts.stop_at_t {
            if state.position.t >= stop {
                break;
            }
        }
        let y = [state.position.t, state.position.x, state.velocity[0], state.velocity[1]];
        let stepped = rk4_vec(&y, opts.dtau, |y| {
            let e = Event::new(y[0], y[1]);
            let w = [y[2], y[3]];
            let k = metric.christoffels(e)?;
            Ok(vec![w[0] / c, w[1], -k.contract(0, w), -k.contract(1, w)])
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
        if !state.is_finite() {
            outcome = Outcome::Aborted { step, reason: "state became non-finite".into() };
            break;
        }
        let post = (|| -> Result<R> {
            if opts.renormalize {
                state.velocity[0] = metric.on_shell_w0(state.position, state.velocity[1], c)?;
            }
            norm_residual(metric, state.position, state.velocity, c)
        })();
        let residual = match post {
            Ok(r) => r,
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
        rows.push(geodesic_row(
            step + 1,
            state.tau,
            state.position,
            state.velocity,
            residual,
            R::zero(),
            RowFlags::default(),
        ));
    }
    Ok(TrajectoryRecord { rows, outcome, initial_energy: None })
}

/// Integrates the curved-space one-body equation of motion ([`accel_curved`])
/// in proper time. With the Minkowski metric this reproduces
/// [`crate::dynamics::integrate_single`] row for row.
pub fn integrate_curved<R: Real>(
    metric: &Metric<R>,
    field: &dyn MassField<R>,
    initial: ParticleState<R>,
    opts: &IntegratorOptions<R>,
) -> Result<TrajectoryRecord<R>> {
    let c = field.c();
    let first = field.sample(initial.position)?;
    let initial_energy = R::of(0.5) * first.value * c * c;
    let res0 = norm_residual(metric, initial.position, initial.velocity, c)?;
    let mut rows = Vec::with_capacity(opts.steps + 1);
    rows.push(geodesic_row(
        0,
        initial.tau,
        initial.position,
        initial.velocity,
        res0,
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
            let acc = accel_curved(metric, field, e, v)?;
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
        if !state.is_finite() {
            outcome = Outcome::Aborted { step, reason: "state became non-finite".into() };
            break;
        }
        let row = (|| -> Result<TrajectoryRow<R>> {
            if opts.renormalize {
                state.velocity[0] = metric.on_shell_w0(state.position, state.velocity[1], c)?;
            }
            let s = field.sample(state.position)?;
            let residual = norm_residual(metric, state.position, state.velocity, c)?;
            let mut f = flags;
            f.clamped |= s.clamped;
            f.node_adjacent |= s.node_adjacent;
            Ok(geodesic_row(
                step + 1,
                state.tau,
                state.position,
                state.velocity,
                residual,
                s.value,
                f,
            ))
        })();
        match row {
            Ok(r) => rows.push(r),
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
        }
    }
    Ok(TrajectoryRecord { rows, outcome, initial_energy: Some(initial_energy) })
}

/// The rescaled metric `g~ = (M(t, x) / m) g`, with the mass field as the
/// live conformal factor.
pub fn conformal_metric<R: Real>(
    base: Metric<R>,
    field: Arc<dyn MassField<R>>,
    grad_h: R,
) -> Result<Metric<R>> {
    let m0 = field.rest_mass();
    let c = field.c();
    let factor = move |e: Event<R>| -> Result<R> { Ok(field.sample(e)?.value / m0) };
    Metric::conformal(base, Arc::new(factor), grad_h, c)
}

fn ensure_increasing_t<R: Real>(rec: &TrajectoryRecord<R>, which: &str) -> Result<()> {
    if rec.rows.is_empty() {
        return Err(Error::Comparison(format!("the {which} record has no rows")));
    }
    for pair in rec.rows.windows(2) {
        if !(pair[1].t > pair[0].t) {
            return Err(Error::Comparison(format!(
                "coordinate time is not strictly increasing in the {which} record near step {}",
                pair[0].step
            )));
        }
    }
    Ok(())
}

/// Largest `|x_A(t) - x_B(t)|` over the overlapping coordinate-time window,
/// sampled at the union of both records' time knots (linear interpolation
/// between rows). Both records must have strictly increasing `t`.
pub fn path_deviation<R: Real>(a: &TrajectoryRecord<R>, b: &TrajectoryRecord<R>) -> Result<R> {
    ensure_increasing_t(a, "first")?;
    ensure_increasing_t(b, "second")?;
    let a_lo = a.rows.first().unwrap().t;
    let a_hi = a.rows.last().unwrap().t;
    let b_lo = b.rows.first().unwrap().t;
    let b_hi = b.rows.last().unwrap().t;
    let lo = a_lo.max(b_lo);
    let hi = a_hi.min(b_hi);
    if !(hi >= lo) {
        return Err(Error::Comparison(format!(
            "records do not overlap in coordinate time: [{a_lo}, {a_hi}] vs [{b_lo}, {b_hi}]"
        )));
    }
    let mut knots: Vec<R> = a
        .rows
        .iter()
        .chain(b.rows.iter())
        .map(|r| r.t)
        .filter(|t| *t >= lo && *t <= hi)
        .collect();
    knots.push(lo);
    knots.push(hi);
    knots.sort_by(|p, q| p.partial_cmp(q).expect("recorded times are finite"));
    let mut dev = R::zero();
    for t in knots {
        let d = (a.sample_x_at(t)? - b.sample_x_at(t)?).abs();
        dev = dev.max(d);
    }
    Ok(dev)
}

/// Outcome of a conformal-equivalence run: the mass-field trajectory, the
/// matched geodesic of the rescaled metric, and their coordinate-path
/// deviation.
#[derive(Debug, Clone, PartialEq)]
pub struct ConformalComparison<R> {
    pub trajectory: TrajectoryRecord<R>,
    pub geodesic: TrajectoryRecord<R>,
    pub max_deviation: R,
}

/// Runs the mass-field equation of motion in the base metric and the
/// affine geodesic of `g~ = (M/m) base` from matched initial data
/// (`w = v / omega` at the start event, which lands exactly on the rescaled
/// shell), then measures the coordinate-path deviation.
///
/// The geodesic leg is given extra steps and a stop time so it always
/// covers the trajectory's coordinate-time span; `grad_h` is the stencil
/// step for the conformal `ln(omega)` gradient.
pub fn conformal_pair<R: Real>(
    field: Arc<dyn MassField<R>>,
    base: Metric<R>,
    initial: ParticleState<R>,
    opts: &IntegratorOptions<R>,
    grad_h: R,
) -> Result<ConformalComparison<R>> {
    let c = field.c();
    let trajectory = integrate_curved(&base, field.as_ref(), initial, opts)?;
    if trajectory.rows.len() < 2 {
        return Err(Error::Comparison(format!(
            "trajectory ended after {} row(s): {:?}",
            trajectory.rows.len(),
            trajectory.outcome
        )));
    }
    let t_end = trajectory.rows.last().unwrap().t;

    let omega0 = (field.sample(initial.position)?.value / field.rest_mass()).sqrt();
    let start = ParticleState {
        position: initial.position,
        velocity: [initial.velocity[0] / omega0, initial.velocity[1] / omega0],
        tau: R::zero(),
    };
    let rescaled = conformal_metric(base, field, grad_h)?;
    // dlambda = omega dtau, so the affine span per step differs from the
    // trajectory's; four-fold steps plus the stop time cover any factor
    // the smooth scenarios produce.
    let geo_opts = IntegratorOptions::new(opts.dtau, opts.steps * 4 + 8)?
        .with_renormalize(opts.renormalize)
        .with_stop_at_t(t_end);
    let geodesic = integrate_geodesic(&rescaled, c, start, &geo_opts)?;
    if geodesic.outcome != Outcome::Completed {
        return Err(Error::Comparison(format!(
            "geodesic leg did not complete: {:?}",
            geodesic.outcome
        )));
    }
    if geodesic.rows.last().unwrap().t < t_end {
        return Err(Error::Comparison(
            "geodesic leg ran out of steps before the trajectory's final time".into(),
        ));
    }
    let max_deviation = path_deviation(&trajectory, &geodesic)?;
    Ok(ConformalComparison { trajectory, geodesic, max_deviation })
}
