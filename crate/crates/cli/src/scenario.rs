//! Scenario files: the declarative JSON input shared by every subcommand,
//! and the builders that turn it into core types.
//!
//! Parsing is strict (unknown fields are rejected) and every semantic
//! validation error names the offending configuration path.

use std::fs::File;
use std::io::{BufReader, Read};
use std::path::Path;

use pilotwave_core::dynamics::ParticleState;
use pilotwave_core::geometry::expr::Expr;
use pilotwave_core::geometry::Metric;
use pilotwave_core::massfield::MassParams;
use pilotwave_core::wavefield::{
    solve_klein_gordon, solve_schrodinger, stored_points, Boundary, Event, Family, GaussianPacket,
    Complex, GridField, PlaneWaveMode, PlaneWaveSuperposition, ProductWavefield, Profile, SpacetimeGrid,
    StaticMode, Wavefield, WavefieldProvider,
};
use pilotwave_core::{Error, Result};
use serde::{Deserialize, Serialize};

fn one() -> f64 {
    1.0
}

fn default_out() -> String {
    "out".into()
}

fn default_scheme() -> String {
    "rk4".into()
}

fn default_cells() -> usize {
    2048
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub units: Units,
    pub wavefunction: WavefunctionSpec,
    pub particles: Vec<ParticleSpec>,
    #[serde(default)]
    pub massfield: MassfieldSpec,
    #[serde(default)]
    pub metric: MetricSpec,
    pub integrator: IntegratorSpec,
    #[serde(default)]
    pub outputs: OutputsSpec,
    /// Grid swept by `scan-tachyon`.
    #[serde(default)]
    pub scan: Option<ScanSpec>,
    /// Light-speed sweep consumed by `compare-nonrel`.
    #[serde(default)]
    pub nonrel: Option<NonrelSpec>,
    /// Sampling block consumed by `ensemble`.
    #[serde(default)]
    pub ensemble: Option<EnsembleSpec>,
}

#[derive(Debug, Clone, Copy, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct Units {
    #[serde(default = "one")]
    pub hbar: f64,
    #[serde(default = "one")]
    pub c: f64,
}

impl Default for Units {
    fn default() -> Self {
        Units { hbar: 1.0, c: 1.0 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WavefunctionSpec {
    PlaneWaveSuperposition(PlaneWavesSpec),
    GaussianPacket(PacketSpec),
    StaticMode(StaticModeSpec),
    SchrodingerSolved(SchrodingerSolvedSpec),
    KleinGordonSolved(KleinGordonSolvedSpec),
    GridFile(GridFileSpec),
    Product(ProductSpec),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlaneWavesSpec {
    pub family: FamilySpec,
    pub m: f64,
    pub modes: Vec<ModeSpec>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilySpec {
    Schrodinger,
    KleinGordon,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeSpec {
    #[serde(default)]
    pub re: f64,
    #[serde(default)]
    pub im: f64,
    pub k: f64,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PacketSpec {
    pub center: f64,
    pub sigma: f64,
    #[serde(default)]
    pub carrier_k: f64,
    pub m: f64,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StaticModeSpec {
    pub profile: ProfileSpec,
    #[serde(default = "one")]
    pub amp: f64,
    pub omega: f64,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum ProfileSpec {
    Gaussian { center: f64, sigma: f64 },
    Cos { k: f64 },
    Sin { k: f64 },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchrodingerSolvedSpec {
    pub grid: GridSpec,
    pub m: f64,
    pub initial: Box<WavefunctionSpec>,
    /// Potential `V(x)` in the expression grammar (literals, `x`, `+ - * /
    /// ^`, `exp`, `tanh`, `sin`, `cos`).
    #[serde(default)]
    pub potential: Option<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KleinGordonSolvedSpec {
    pub grid: GridSpec,
    pub m: f64,
    /// Restricted to a plane-wave superposition so the initial time
    /// derivative is exact.
    pub initial: Box<WavefunctionSpec>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridFileSpec {
    pub path: String,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProductSpec {
    pub factors: Vec<WavefunctionSpec>,
}

#[derive(Debug, Clone, Copy, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub t_min: f64,
    pub t_max: f64,
    pub n_t: usize,
    pub x_min: f64,
    pub x_max: f64,
    pub n_x: usize,
    pub boundary: BoundarySpec,
}

#[derive(Debug, Clone, Copy, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundarySpec {
    Periodic,
    Absorbing,
}

impl GridSpec {
    pub fn build(&self) -> SpacetimeGrid<f64> {
        SpacetimeGrid {
            t_min: self.t_min,
            t_max: self.t_max,
            n_t: self.n_t,
            x_min: self.x_min,
            x_max: self.x_max,
            n_x: self.n_x,
            boundary: match self.boundary {
                BoundarySpec::Periodic => Boundary::Periodic,
                BoundarySpec::Absorbing => Boundary::Absorbing,
            },
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParticleSpec {
    pub m: f64,
    pub x0: f64,
    #[serde(default)]
    pub t0: f64,
    #[serde(default)]
    pub v0: VelocitySpec,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(untagged)]
pub enum VelocitySpec {
    Named(NamedVelocity),
    /// Explicit 4-velocity components `[v0, v1]`.
    Pair([f64; 2]),
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NamedVelocity {
    Rest,
    Guidance,
}

impl Default for VelocitySpec {
    fn default() -> Self {
        VelocitySpec::Named(NamedVelocity::Rest)
    }
}

#[derive(Debug, Clone, Copy, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MassfieldSpec {
    /// Many-body mass scale; defaults to the mean rest mass.
    #[serde(default)]
    pub mu: Option<f64>,
    #[serde(default)]
    pub clamp: Option<f64>,
    #[serde(default)]
    pub amp_floor: Option<f64>,
    /// Amplitude stencil step. Defaults to 1e-2 for trajectories and to
    /// the lattice spacing for tachyon scans.
    #[serde(default)]
    pub stencil_h: Option<f64>,
    /// Mass-gradient stencil step (default 1e-3).
    #[serde(default)]
    pub grad_h: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum MetricSpec {
    Minkowski,
    DiagonalStatic { f: String, g: String },
}

impl Default for MetricSpec {
    fn default() -> Self {
        MetricSpec::Minkowski
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorSpec {
    pub dtau: f64,
    pub steps: usize,
    #[serde(default = "default_scheme")]
    pub scheme: String,
    #[serde(default)]
    pub renormalize: bool,
    #[serde(default)]
    pub dynamics: DynamicsSpec,
    /// Cross-check the two analytically equal quantum-force routes during
    /// non-relativistic runs. Defaults to on for closed-form wavefunctions
    /// and off for grid-backed ones, where interpolation error breaks the
    /// identity below any useful tolerance.
    #[serde(default)]
    pub check_routes: Option<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DynamicsSpec {
    #[default]
    Relativistic,
    Nonrelativistic,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputsSpec {
    #[serde(default)]
    pub format: FormatSpec,
    #[serde(default = "default_out")]
    pub path: String,
}

impl Default for OutputsSpec {
    fn default() -> Self {
        OutputsSpec { format: FormatSpec::Csv, path: default_out() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FormatSpec {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanSpec {
    pub grid: GridSpec,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NonrelSpec {
    pub c_values: Vec<f64>,
    pub t_end: f64,
    pub compare_times: Vec<f64>,
    /// Shared initial coordinate velocity.
    #[serde(default)]
    pub u0: f64,
    /// Step of the non-relativistic reference integration.
    pub dt: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleSpec {
    pub n_samples: usize,
    pub seed: u64,
    pub comparison_times: Vec<f64>,
    /// Sampling window for the position density.
    pub x_min: f64,
    pub x_max: f64,
    /// Density-table resolution.
    #[serde(default = "default_cells")]
    pub cells: usize,
}

fn config(msg: String) -> Error {
    Error::Config(msg)
}

impl Scenario {
    /// Parses and validates a scenario file. Parse errors carry the JSON
    /// path and line of the offending field.
    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path)
            .map_err(|e| config(format!("cannot open scenario {}: {e}", path.display())))?;
        let mut text = String::new();
        BufReader::new(file)
            .read_to_string(&mut text)
            .map_err(|e| config(format!("cannot read scenario {}: {e}", path.display())))?;
        let mut de = serde_json::Deserializer::from_str(&text);
        let scenario: Scenario = serde_path_to_error::deserialize(&mut de)
            .map_err(|e| config(format!("scenario {}: {e}", path.display())))?;
        scenario.validate()?;
        Ok(scenario)
    }

    fn validate(&self) -> Result<()> {
        if !(self.units.hbar > 0.0) || !(self.units.c > 0.0) {
            return Err(config("units: hbar and c must be positive".into()));
        }
        if self.particles.is_empty() {
            return Err(config("particles: at least one particle is required".into()));
        }
        for (i, p) in self.particles.iter().enumerate() {
            if !(p.m > 0.0) {
                return Err(config(format!("particles[{i}].m: must be positive")));
            }
            if !p.x0.is_finite() || !p.t0.is_finite() {
                return Err(config(format!("particles[{i}]: x0 and t0 must be finite")));
            }
            if let VelocitySpec::Pair(v) = p.v0 {
                if !v[0].is_finite() || !v[1].is_finite() || !(v[0] > 0.0) {
                    return Err(config(format!(
                        "particles[{i}].v0: explicit pair needs finite components and v0 > 0"
                    )));
                }
            }
        }
        if self.integrator.scheme != "rk4" {
            return Err(config(format!(
                "integrator.scheme: only \"rk4\" is supported, got {:?}",
                self.integrator.scheme
            )));
        }
        if !(self.integrator.dtau > 0.0) {
            return Err(config("integrator.dtau: must be positive".into()));
        }
        if self.integrator.steps == 0 {
            return Err(config("integrator.steps: must be at least 1".into()));
        }
        if let Some(mf) = self.massfield_bad_field() {
            return Err(config(format!("massfield.{mf}: must be positive")));
        }
        if let Some(e) = &self.ensemble {
            if e.n_samples < 100 {
                return Err(config("ensemble.n_samples: must be at least 100".into()));
            }
            if e.comparison_times.is_empty() {
                return Err(config("ensemble.comparison_times: must be non-empty".into()));
            }
            if !(e.x_max > e.x_min) {
                return Err(config("ensemble.x_max: must exceed ensemble.x_min".into()));
            }
            if e.cells < 16 {
                return Err(config("ensemble.cells: must be at least 16".into()));
            }
        }
        if let Some(n) = &self.nonrel {
            if n.c_values.len() < 3 {
                return Err(config("nonrel.c_values: the fit needs at least 3 light speeds".into()));
            }
            if n.c_values.iter().any(|&c| !(c > 0.0)) {
                return Err(config("nonrel.c_values: every light speed must be positive".into()));
            }
            if !(n.dt > 0.0) {
                return Err(config("nonrel.dt: must be positive".into()));
            }
            if n.compare_times.is_empty() {
                return Err(config("nonrel.compare_times: must be non-empty".into()));
            }
        }
        self.wavefunction.validate("wavefunction")?;
        Ok(())
    }

    fn massfield_bad_field(&self) -> Option<&'static str> {
        let mf = &self.massfield;
        if mf.mu.is_some_and(|v| !(v > 0.0)) {
            return Some("mu");
        }
        if mf.clamp.is_some_and(|v| !(v > 0.0)) {
            return Some("clamp");
        }
        if mf.amp_floor.is_some_and(|v| !(v >= 0.0 && v < 1.0)) {
            return Some("amp_floor");
        }
        if mf.stencil_h.is_some_and(|v| !(v > 0.0)) {
            return Some("stencil_h");
        }
        if mf.grad_h.is_some_and(|v| !(v > 0.0)) {
            return Some("grad_h");
        }
        None
    }

    /// Mass parameters for the scenario's particle set.
    pub fn mass_params(&self) -> Result<MassParams<f64>> {
        let u = self.units;
        let mut params = if self.particles.len() == 1 {
            MassParams::single(self.particles[0].m, u.hbar, u.c)?
        } else {
            MassParams::many(self.particles.iter().map(|p| p.m).collect(), u.hbar, u.c)?
        };
        let mf = &self.massfield;
        if let Some(mu) = mf.mu {
            params = params.with_mu(mu)?;
        }
        if let Some(clamp) = mf.clamp {
            params = params.with_clamp(clamp)?;
        }
        if let Some(floor) = mf.amp_floor {
            params = params.with_amp_floor(floor)?;
        }
        if let Some(h) = mf.stencil_h {
            params = params.with_stencil_h(h)?;
        }
        Ok(params)
    }

    /// Mass-gradient stencil step.
    pub fn grad_h(&self) -> f64 {
        self.massfield.grad_h.unwrap_or(1e-3)
    }

    pub fn metric(&self) -> Result<Metric<f64>> {
        match &self.metric {
            MetricSpec::Minkowski => Ok(Metric::Minkowski),
            MetricSpec::DiagonalStatic { f, g } => Metric::diagonal_static(f, g)
                .map_err(|e| config(format!("metric: {e}"))),
        }
    }

    pub fn is_flat(&self) -> bool {
        matches!(self.metric, MetricSpec::Minkowski)
    }

    /// The classical potential expression, when the wavefunction was solved
    /// on a grid with one. Non-relativistic trajectories need its gradient
    /// alongside the quantum force.
    pub fn potential_expr(&self) -> Result<Option<Expr>> {
        match &self.wavefunction {
            WavefunctionSpec::SchrodingerSolved(s) => match &s.potential {
                None => Ok(None),
                Some(src) => Expr::parse(src, &["x"])
                    .map(Some)
                    .map_err(|e| config(format!("wavefunction.potential: {e}"))),
            },
            _ => Ok(None),
        }
    }

    /// Builds the single-particle provider. Errors when the wavefunction is
    /// a many-body product.
    pub fn provider(&self) -> Result<WavefieldProvider<f64>> {
        match &self.wavefunction {
            WavefunctionSpec::Product(_) => Err(config(
                "wavefunction: this command needs a one-body wavefunction, not a product".into(),
            )),
            spec => build_provider(spec, self.units, "wavefunction"),
        }
    }

    /// Builds the N-body product amplitude; requires one factor per
    /// particle.
    pub fn product(&self) -> Result<ProductWavefield<f64>> {
        let WavefunctionSpec::Product(p) = &self.wavefunction else {
            return Err(config(
                "wavefunction: many-body runs need kind \"product\" with one factor per particle"
                    .into(),
            ));
        };
        if p.factors.len() != self.particles.len() {
            return Err(config(format!(
                "wavefunction.factors: {} factors for {} particles",
                p.factors.len(),
                self.particles.len()
            )));
        }
        let factors = p
            .factors
            .iter()
            .enumerate()
            .map(|(i, f)| build_provider(f, self.units, &format!("wavefunction.factors[{i}]")))
            .collect::<Result<Vec<_>>>()?;
        ProductWavefield::new(factors)
    }

    /// Initial relativistic state of particle `i` against an already built
    /// provider (used to resolve `"guidance"`).
    pub fn initial_state(
        &self,
        i: usize,
        provider: &WavefieldProvider<f64>,
        params: &MassParams<f64>,
        metric: &Metric<f64>,
    ) -> Result<ParticleState<f64>> {
        let p = &self.particles[i];
        let e = Event::new(p.t0, p.x0);
        let c = self.units.c;
        match p.v0 {
            VelocitySpec::Named(NamedVelocity::Rest) => {
                let w0 = metric.on_shell_w0(e, 0.0, c).map_err(|err| {
                    config(format!("particles[{i}].v0: rest state is not timelike here: {err}"))
                })?;
                Ok(ParticleState { position: e, velocity: [w0, 0.0], tau: 0.0 })
            }
            VelocitySpec::Named(NamedVelocity::Guidance) => {
                if !matches!(metric, Metric::Minkowski) {
                    return Err(config(format!(
                        "particles[{i}].v0: guidance initialization needs the flat metric"
                    )));
                }
                let floor = params.floor_for(provider);
                let v = pilotwave_core::dynamics::guidance_velocity(
                    provider,
                    e,
                    self.units.hbar,
                    c,
                    params.stencil_h,
                    floor,
                )?;
                Ok(ParticleState { position: e, velocity: v, tau: 0.0 })
            }
            VelocitySpec::Pair(v) => Ok(ParticleState { position: e, velocity: v, tau: 0.0 }),
        }
    }
}

impl WavefunctionSpec {
    fn validate(&self, path: &str) -> Result<()> {
        match self {
            WavefunctionSpec::PlaneWaveSuperposition(p) => {
                if p.modes.is_empty() {
                    return Err(config(format!("{path}.modes: need at least one mode")));
                }
                if !(p.m > 0.0) {
                    return Err(config(format!("{path}.m: must be positive")));
                }
            }
            WavefunctionSpec::GaussianPacket(p) => {
                if !(p.sigma > 0.0) || !(p.m > 0.0) {
                    return Err(config(format!("{path}: sigma and m must be positive")));
                }
            }
            WavefunctionSpec::StaticMode(s) => {
                if !(s.amp > 0.0) {
                    return Err(config(format!("{path}.amp: must be positive")));
                }
                if let ProfileSpec::Gaussian { sigma, .. } = s.profile {
                    if !(sigma > 0.0) {
                        return Err(config(format!("{path}.profile.sigma: must be positive")));
                    }
                }
            }
            WavefunctionSpec::SchrodingerSolved(s) => {
                if !(s.m > 0.0) {
                    return Err(config(format!("{path}.m: must be positive")));
                }
                s.initial.validate(&format!("{path}.initial"))?;
                if matches!(
                    *s.initial,
                    WavefunctionSpec::SchrodingerSolved(_)
                        | WavefunctionSpec::KleinGordonSolved(_)
                        | WavefunctionSpec::GridFile(_)
                        | WavefunctionSpec::Product(_)
                ) {
                    return Err(config(format!(
                        "{path}.initial: must be a closed-form wavefunction"
                    )));
                }
            }
            WavefunctionSpec::KleinGordonSolved(s) => {
                if !(s.m > 0.0) {
                    return Err(config(format!("{path}.m: must be positive")));
                }
                if !matches!(*s.initial, WavefunctionSpec::PlaneWaveSuperposition(_)) {
                    return Err(config(format!(
                        "{path}.initial: must be a plane-wave superposition (its time \
                         derivative is exact)"
                    )));
                }
                s.initial.validate(&format!("{path}.initial"))?;
            }
            WavefunctionSpec::GridFile(_) => {}
            WavefunctionSpec::Product(p) => {
                if p.factors.is_empty() {
                    return Err(config(format!("{path}.factors: need at least one factor")));
                }
                for (i, f) in p.factors.iter().enumerate() {
                    let fp = format!("{path}.factors[{i}]");
                    if matches!(f, WavefunctionSpec::Product(_)) {
                        return Err(config(format!("{fp}: products do not nest")));
                    }
                    f.validate(&fp)?;
                }
            }
        }
        Ok(())
    }

    /// True when this wavefunction block is known to describe a
    /// Schroedinger-family state (the ensemble command's precondition).
    pub fn is_schrodinger_family(&self) -> bool {
        match self {
            WavefunctionSpec::PlaneWaveSuperposition(p) => {
                matches!(p.family, FamilySpec::Schrodinger)
            }
            WavefunctionSpec::GaussianPacket(_)
            | WavefunctionSpec::StaticMode(_)
            | WavefunctionSpec::SchrodingerSolved(_)
            | WavefunctionSpec::GridFile(_) => true,
            WavefunctionSpec::KleinGordonSolved(_) | WavefunctionSpec::Product(_) => false,
        }
    }

    /// True when evaluations interpolate stored grid slices rather than a
    /// closed form.
    pub fn is_grid_backed(&self) -> bool {
        matches!(
            self,
            WavefunctionSpec::SchrodingerSolved(_)
                | WavefunctionSpec::KleinGordonSolved(_)
                | WavefunctionSpec::GridFile(_)
        )
    }
}

fn build_provider(
    spec: &WavefunctionSpec,
    units: Units,
    path: &str,
) -> Result<WavefieldProvider<f64>> {
    match spec {
        WavefunctionSpec::PlaneWaveSuperposition(p) => {
            let family = match p.family {
                FamilySpec::Schrodinger => Family::Schrodinger,
                FamilySpec::KleinGordon => Family::KleinGordon,
            };
            let modes = p
                .modes
                .iter()
                .map(|m| PlaneWaveMode { amp: Complex::new(m.re, m.im), k: m.k })
                .collect();
            Ok(WavefieldProvider::PlaneWaves(PlaneWaveSuperposition::new(
                family, modes, p.m, units.hbar, units.c,
            )?))
        }
        WavefunctionSpec::GaussianPacket(p) => Ok(WavefieldProvider::Packet(GaussianPacket::new(
            p.center, p.sigma, p.carrier_k, p.m, units.hbar,
        )?)),
        WavefunctionSpec::StaticMode(s) => {
            let profile = match s.profile {
                ProfileSpec::Gaussian { center, sigma } => Profile::Gaussian { center, sigma },
                ProfileSpec::Cos { k } => Profile::Cos { k },
                ProfileSpec::Sin { k } => Profile::Sin { k },
            };
            Ok(WavefieldProvider::Static(StaticMode::new(profile, s.amp, s.omega)?))
        }
        WavefunctionSpec::SchrodingerSolved(s) => {
            let grid = s.grid.build();
            let inner = build_provider(&s.initial, units, path)?;
            let potential = match &s.potential {
                None => None,
                Some(src) => {
                    let expr = Expr::parse(src, &["x"])
                        .map_err(|e| config(format!("{path}.potential: {e}")))?;
                    let mut v = Vec::with_capacity(stored_points(&grid));
                    for j in 0..stored_points(&grid) {
                        v.push(expr.eval(&[grid.x_at(j)])?);
                    }
                    Some(v)
                }
            };
            let t0 = grid.t_min;
            let field = solve_schrodinger(
                &grid,
                |x| inner.value(Event::new(t0, x)).expect("closed forms are global"),
                potential.as_deref(),
                s.m,
                units.hbar,
            )?;
            Ok(WavefieldProvider::Grid(field))
        }
        WavefunctionSpec::KleinGordonSolved(s) => {
            let WavefunctionSpec::PlaneWaveSuperposition(init) = &*s.initial else {
                return Err(config(format!(
                    "{path}.initial: must be a plane-wave superposition"
                )));
            };
            let grid = s.grid.build();
            let inner = build_provider(&s.initial, units, path)?;
            let family = match init.family {
                FamilySpec::Schrodinger => Family::Schrodinger,
                FamilySpec::KleinGordon => Family::KleinGordon,
            };
            let waves =
                PlaneWaveSuperposition::new(
                    family,
                    init.modes
                        .iter()
                        .map(|m| PlaneWaveMode {
                            amp: Complex::new(m.re, m.im),
                            k: m.k,
                        })
                        .collect(),
                    init.m,
                    units.hbar,
                    units.c,
                )?;
            let t0 = grid.t_min;
            let d_dt = move |x: f64| {
                let mut acc = Complex::new(0.0, 0.0);
                for mode in &waves.modes {
                    let om = waves.omega(mode.k);
                    let phase = Complex::new(0.0, mode.k * x - om * t0).exp();
                    acc += mode.amp * Complex::new(0.0, -om) * phase;
                }
                acc
            };
            let field = solve_klein_gordon(
                &grid,
                |x| inner.value(Event::new(t0, x)).expect("closed forms are global"),
                d_dt,
                s.m,
                units.hbar,
                units.c,
            )?;
            Ok(WavefieldProvider::Grid(field))
        }
        WavefunctionSpec::GridFile(g) => {
            let file = File::open(&g.path)
                .map_err(|e| config(format!("{path}.path: cannot open {}: {e}", g.path)))?;
            Ok(WavefieldProvider::Grid(GridField::load_json(BufReader::new(file))?))
        }
        WavefunctionSpec::Product(_) => Err(config(format!(
            "{path}: a product wavefunction only drives many-body runs"
        ))),
    }
}
