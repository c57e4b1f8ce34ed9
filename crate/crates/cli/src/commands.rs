//! The five subcommand drivers. Each takes a validated scenario plus the
//! command-line overrides and returns the process exit code for scientific
//! outcomes; configuration and numerical failures propagate as errors and
//! are mapped to exit codes by `main`.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use pilotwave_core::dynamics::{
    guidance_velocity_nr, integrate_many, integrate_nr, integrate_single, nonrel_limit_deviation,
    IntegratorOptions, NonrelLimitSetup, NrIntegratorOptions, NrState, Outcome, TrajectoryRecord,
};
use pilotwave_core::geometry::{conformal_pair, integrate_curved, Metric};
use pilotwave_core::massfield::{tachyon_scan, WavefieldMass};
use pilotwave_core::wavefield::Event;
use pilotwave_core::{Error, Result};
use serde::Serialize;
use serde_json::json;

use crate::ensemble::{run_ensemble, EnsembleSetup};
use crate::scenario::{
    DynamicsSpec, FormatSpec, GridSpec, NamedVelocity, Scenario, Units, VelocitySpec,
};

/// Values from the command line that override the scenario's own settings.
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub format: Option<FormatSpec>,
    pub seed: Option<u64>,
    pub tol: Option<f64>,
}

impl Overrides {
    fn out_dir(&self, s: &Scenario) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from(&s.outputs.path))
    }

    fn format(&self, s: &Scenario) -> FormatSpec {
        self.format.unwrap_or(s.outputs.format)
    }
}

fn create_out_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)
        .map_err(|e| Error::Config(format!("cannot create output directory {}: {e}", dir.display())))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let err = |e: String| Error::Config(format!("cannot write {}: {e}", path.display()));
    let file = File::create(path).map_err(|e| err(e.to_string()))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| err(e.to_string()))?;
    w.write_all(b"\n").map_err(|e| err(e.to_string()))?;
    w.flush().map_err(|e| err(e.to_string()))
}

fn outcome_json(o: &Outcome) -> serde_json::Value {
    match o {
        Outcome::Completed => json!("completed"),
        Outcome::ExitedDomain { step } => json!({"exited_domain": {"step": step}}),
        Outcome::Aborted { step, reason } => json!({"aborted": {"step": step, "reason": reason}}),
    }
}

fn outcome_text(o: &Outcome) -> String {
    match o {
        Outcome::Completed => "completed".into(),
        Outcome::ExitedDomain { step } => format!("exited domain at step {step}"),
        Outcome::Aborted { step, reason } => format!("aborted at step {step}: {reason}"),
    }
}

fn record_json(rec: &TrajectoryRecord<f64>) -> serde_json::Value {
    let rows: Vec<serde_json::Value> = rec
        .rows
        .iter()
        .map(|r| {
            json!({
                "step": r.step,
                "tau": r.tau,
                "t": r.t,
                "x": r.x,
                "v0": r.v0,
                "v1": r.v1,
                "vv_residual": r.vv_residual,
                "mass": r.mass,
                "flags": r.flags.code(),
            })
        })
        .collect();
    json!({"outcome": outcome_json(&rec.outcome), "rows": rows})
}

/// Writes one trajectory in the requested format and returns its path.
fn write_record(
    dir: &Path,
    stem: &str,
    rec: &TrajectoryRecord<f64>,
    format: FormatSpec,
) -> Result<PathBuf> {
    match format {
        FormatSpec::Csv => {
            let path = dir.join(format!("{stem}.csv"));
            let file = File::create(&path)
                .map_err(|e| Error::Config(format!("cannot write {}: {e}", path.display())))?;
            let mut w = BufWriter::new(file);
            rec.write_csv(&mut w)?;
            w.flush()
                .map_err(|e| Error::Config(format!("cannot write {}: {e}", path.display())))?;
            Ok(path)
        }
        FormatSpec::Json => {
            let path = dir.join(format!("{stem}.json"));
            write_json(&path, &record_json(rec))?;
            Ok(path)
        }
    }
}

#[derive(Serialize)]
struct RunSummary {
    command: &'static str,
    dynamics: &'static str,
    units: Units,
    n_particles: usize,
    max_vv_residual: f64,
    min_mass: f64,
    clamped_steps: usize,
    node_adjacent_steps: usize,
    outcomes: Vec<String>,
    /// Wall-clock time; the one summary field excluded from the
    /// byte-identity guarantee.
    runtime_seconds: f64,
}

fn summarize(records: &[TrajectoryRecord<f64>]) -> (f64, f64, usize, usize) {
    let mut max_vv = 0.0f64;
    let mut min_mass = f64::INFINITY;
    let mut clamped = 0usize;
    let mut node_adjacent = 0usize;
    for rec in records {
        max_vv = max_vv.max(rec.max_vv_residual());
        for row in &rec.rows {
            min_mass = min_mass.min(row.mass);
            clamped += row.flags.clamped as usize;
            node_adjacent += row.flags.node_adjacent as usize;
        }
    }
    (max_vv, min_mass, clamped, node_adjacent)
}

/// `pilotwave run`: integrate the scenario's particles and write
/// trajectories plus a summary.
pub fn cmd_run(s: &Scenario, ov: &Overrides) -> Result<i32> {
    let started = Instant::now();
    let dir = ov.out_dir(s);
    let format = ov.format(s);
    let opts = IntegratorOptions::new(s.integrator.dtau, s.integrator.steps)?
        .with_renormalize(s.integrator.renormalize);

    let (records, dynamics_label) = if s.integrator.dynamics == DynamicsSpec::Nonrelativistic {
        if s.particles.len() != 1 {
            return Err(Error::Config(
                "integrator.dynamics: non-relativistic runs take exactly one particle".into(),
            ));
        }
        if !s.is_flat() {
            return Err(Error::Config(
                "integrator.dynamics: non-relativistic runs need the flat metric".into(),
            ));
        }
        let provider = s.provider()?;
        let params = s.mass_params()?;
        let p = &s.particles[0];
        let u0 = match p.v0 {
            VelocitySpec::Named(NamedVelocity::Rest) => 0.0,
            VelocitySpec::Named(NamedVelocity::Guidance) => {
                guidance_velocity_nr(&provider, Event::new(p.t0, p.x0), &params)?
            }
            VelocitySpec::Pair([w0, w1]) => s.units.c * w1 / w0,
        };
        let mut nr_opts = NrIntegratorOptions::new(s.integrator.dtau, s.integrator.steps)?;
        nr_opts.check_routes =
            s.integrator.check_routes.unwrap_or(!s.wavefunction.is_grid_backed());
        // A solved-on-grid wavefunction may carry a classical potential; the
        // trajectory then needs -(1/m) dV/dx on top of the quantum force.
        let potential = s.potential_expr()?;
        let m = p.m;
        let h = s.grad_h();
        let classical = potential.map(|expr| {
            move |e: Event<f64>| -> Result<f64> {
                let plus = expr.eval(&[e.x + h])?;
                let minus = expr.eval(&[e.x - h])?;
                Ok(-(plus - minus) / (2.0 * h * m))
            }
        });
        let rec = integrate_nr(
            &provider,
            &params,
            NrState { t: p.t0, x: p.x0, u: u0 },
            &nr_opts,
            classical.as_ref().map(|f| f as &dyn Fn(Event<f64>) -> Result<f64>),
        )?;
        (vec![rec], "nonrelativistic")
    } else if s.particles.len() == 1 {
        let provider = Arc::new(s.provider()?);
        let params = s.mass_params()?;
        let metric = s.metric()?;
        let initial = s.initial_state(0, &provider, &params, &metric)?;
        let field = WavefieldMass::new(Arc::clone(&provider), params)?.with_grad_h(s.grad_h())?;
        let rec = if s.is_flat() {
            integrate_single(&field, initial, &opts)?
        } else {
            integrate_curved(&metric, &field, initial, &opts)?
        };
        (vec![rec], "relativistic")
    } else {
        if !s.is_flat() {
            return Err(Error::Config(
                "metric: many-body runs support only the flat metric".into(),
            ));
        }
        let product = s.product()?;
        let params = s.mass_params()?;
        let mut initial = Vec::with_capacity(s.particles.len());
        for i in 0..s.particles.len() {
            initial.push(s.initial_state(i, &product.factors()[i], &params, &Metric::Minkowski)?);
        }
        (integrate_many(&product, &params, s.grad_h(), &initial, &opts)?, "relativistic")
    };

    create_out_dir(&dir)?;
    let mut paths = Vec::new();
    if records.len() == 1 {
        paths.push(write_record(&dir, "trajectory", &records[0], format)?);
    } else {
        for (i, rec) in records.iter().enumerate() {
            paths.push(write_record(&dir, &format!("particle_{i}"), rec, format)?);
        }
    }

    let (max_vv, min_mass, clamped, node_adjacent) = summarize(&records);
    let summary = RunSummary {
        command: "run",
        dynamics: dynamics_label,
        units: s.units,
        n_particles: s.particles.len(),
        max_vv_residual: max_vv,
        min_mass,
        clamped_steps: clamped,
        node_adjacent_steps: node_adjacent,
        outcomes: records.iter().map(|r| outcome_text(&r.outcome)).collect(),
        runtime_seconds: started.elapsed().as_secs_f64(),
    };
    write_json(&dir.join("summary.json"), &summary)?;

    for (i, rec) in records.iter().enumerate() {
        if let Outcome::Aborted { step, reason } = &rec.outcome {
            let last = rec.rows.last();
            let at = last
                .map(|r| format!("last good state: step {} (t = {}, x = {})", r.step, r.t, r.x))
                .unwrap_or_else(|| "no completed steps".into());
            eprintln!(
                "run: particle {i} aborted at step {step}: {reason}; {at}; partial rows in {}",
                paths[i].display()
            );
            return Ok(3);
        }
    }
    println!(
        "run: {} particle(s), max |v.v - c^2| residual = {:.3e}, min mass = {:.6}, \
         {} clamped step(s); wrote {}",
        records.len(),
        max_vv,
        min_mass,
        clamped,
        dir.display()
    );
    Ok(0)
}

#[derive(Serialize)]
struct ScanOutput {
    command: &'static str,
    units: Units,
    grid: GridSpec,
    stencil_h: f64,
    scan: pilotwave_core::massfield::ScanReport<f64>,
}

/// `pilotwave scan-tachyon`: sweep the scan grid, count standard-map
/// tachyonic points, and confirm the exponent map stays positive.
pub fn cmd_scan_tachyon(s: &Scenario, ov: &Overrides) -> Result<i32> {
    let Some(scan) = &s.scan else {
        return Err(Error::Config("scan: scan-tachyon needs a scan block with a grid".into()));
    };
    let grid = scan.grid.build();
    let provider = s.provider()?;
    let mut params = s.mass_params()?;
    if s.massfield.stencil_h.is_none() {
        // Default the stencil to the lattice spacing so it straddles
        // amplitude kinks between nodes instead of stepping over them.
        params = params.with_stencil_h(grid.dx())?;
    }
    let report = tachyon_scan(&provider, &grid, &params)?;

    let dir = ov.out_dir(s);
    create_out_dir(&dir)?;
    let out = ScanOutput {
        command: "scan-tachyon",
        units: s.units,
        grid: scan.grid,
        stencil_h: params.stencil_h,
        scan: report,
    };
    write_json(&dir.join("tachyon_report.json"), &out)?;

    let r = &out.scan;
    println!(
        "scan-tachyon: {} point(s) evaluated, {} tachyonic under the standard map, \
         exponent-map mass in [{:.6e}, {:.6e}], positive definite: {}",
        r.n_evaluated, r.tachyon_count, r.min_mass_exp, r.max_mass_exp, r.positive_definite
    );
    Ok(if r.positive_definite { 0 } else { 1 })
}

#[derive(Serialize)]
struct ConformalReport {
    command: &'static str,
    units: Units,
    dtau: f64,
    steps: usize,
    grad_h: f64,
    tol: f64,
    max_deviation: f64,
    passed: bool,
}

/// `pilotwave compare-conformal`: run the mass-field equation of motion in
/// the flat base metric against the affine geodesic of the conformally
/// rescaled metric and compare coordinate paths.
pub fn cmd_compare_conformal(s: &Scenario, ov: &Overrides) -> Result<i32> {
    if s.particles.len() != 1 {
        return Err(Error::Config(
            "particles: compare-conformal takes exactly one particle".into(),
        ));
    }
    if !s.is_flat() {
        return Err(Error::Config(
            "metric: compare-conformal is defined against the flat base metric".into(),
        ));
    }
    let tol = ov.tol.unwrap_or(1e-6);
    if !(tol > 0.0) {
        return Err(Error::Config("--tol: must be positive".into()));
    }

    let provider = Arc::new(s.provider()?);
    let params = s.mass_params()?;
    let metric = s.metric()?;
    let initial = s.initial_state(0, &provider, &params, &metric)?;
    let field = WavefieldMass::new(provider, params)?.with_grad_h(s.grad_h())?;
    let opts = IntegratorOptions::new(s.integrator.dtau, s.integrator.steps)?
        .with_renormalize(s.integrator.renormalize);
    let cmp = conformal_pair(Arc::new(field), metric, initial, &opts, s.grad_h())?;

    let dir = ov.out_dir(s);
    let format = ov.format(s);
    create_out_dir(&dir)?;
    write_record(&dir, "trajectory", &cmp.trajectory, format)?;
    write_record(&dir, "geodesic", &cmp.geodesic, format)?;
    let passed = cmp.max_deviation <= tol;
    let report = ConformalReport {
        command: "compare-conformal",
        units: s.units,
        dtau: s.integrator.dtau,
        steps: s.integrator.steps,
        grad_h: s.grad_h(),
        tol,
        max_deviation: cmp.max_deviation,
        passed,
    };
    write_json(&dir.join("conformal_report.json"), &report)?;

    println!(
        "compare-conformal: max coordinate-path deviation = {:.3e} (tol {:.1e}): {}",
        cmp.max_deviation,
        tol,
        if passed { "PASS" } else { "FAIL" }
    );
    Ok(if passed { 0 } else { 1 })
}

#[derive(Serialize)]
struct NonrelOutput {
    command: &'static str,
    units: Units,
    c_values: Vec<f64>,
    /// `max_t |x_rel(t) - x_nr(t)|` per light speed.
    deviations: Vec<f64>,
    order_estimate: Option<f64>,
    exact_match: bool,
    order_band: [f64; 2],
    passed: bool,
}

/// `pilotwave compare-nonrel`: deviation of the relativistic trajectory
/// from the first-order reference across a light-speed sweep, with the
/// fitted decay order.
pub fn cmd_compare_nonrel(s: &Scenario, ov: &Overrides) -> Result<i32> {
    let Some(nr) = &s.nonrel else {
        return Err(Error::Config(
            "nonrel: compare-nonrel needs a nonrel block with c_values".into(),
        ));
    };
    if s.particles.len() != 1 {
        return Err(Error::Config("particles: compare-nonrel takes exactly one particle".into()));
    }
    if !s.is_flat() {
        return Err(Error::Config("metric: compare-nonrel is defined in the flat metric".into()));
    }
    let p = &s.particles[0];
    let provider = Arc::new(s.provider()?);
    let params = s.mass_params()?;
    let setup = NonrelLimitSetup {
        m: p.m,
        hbar: s.units.hbar,
        stencil_h: params.stencil_h,
        x0: p.x0,
        u0: nr.u0,
        t_start: p.t0,
        t_end: nr.t_end,
        compare_times: nr.compare_times.clone(),
        c_values: nr.c_values.clone(),
        dt_nr: nr.dt,
        dtau: s.integrator.dtau,
    };
    let report = nonrel_limit_deviation(&provider, &setup)?;

    let band = [1.8, 2.2];
    let passed = report.exact_match
        || report.order_estimate.is_some_and(|ord| ord >= band[0] && ord <= band[1]);
    let out = NonrelOutput {
        command: "compare-nonrel",
        units: s.units,
        c_values: report.c_values.clone(),
        deviations: report.deviations.clone(),
        order_estimate: report.order_estimate,
        exact_match: report.exact_match,
        order_band: band,
        passed,
    };
    let dir = ov.out_dir(s);
    create_out_dir(&dir)?;
    write_json(&dir.join("nonrel_report.json"), &out)?;

    for (c, d) in report.c_values.iter().zip(&report.deviations) {
        println!("compare-nonrel: c = {c:>8.3}  max deviation D = {d:.6e}");
    }
    match (report.exact_match, report.order_estimate) {
        (true, _) => println!("compare-nonrel: deviations at roundoff (exact match): PASS"),
        (false, Some(ord)) => println!(
            "compare-nonrel: fitted order p = {ord:.4} (band [{}, {}]): {}",
            band[0],
            band[1],
            if passed { "PASS" } else { "FAIL" }
        ),
        (false, None) => println!("compare-nonrel: no order estimate: FAIL"),
    }
    Ok(if passed { 0 } else { 1 })
}

/// `pilotwave ensemble`: equivariance check of sampled positions pushed
/// along the guidance flow.
pub fn cmd_ensemble(s: &Scenario, ov: &Overrides) -> Result<i32> {
    let Some(spec) = &s.ensemble else {
        return Err(Error::Config("ensemble: the ensemble command needs an ensemble block".into()));
    };
    if s.particles.len() != 1 {
        return Err(Error::Config("particles: ensemble runs take exactly one particle".into()));
    }
    if !s.wavefunction.is_schrodinger_family() {
        return Err(Error::Config(
            "wavefunction: ensemble runs need a Schrodinger-family wavefunction".into(),
        ));
    }
    let provider = s.provider()?;
    let params = s.mass_params()?;
    let setup = EnsembleSetup {
        provider: &provider,
        params: &params,
        t0: s.particles[0].t0,
        n_samples: spec.n_samples,
        seed: ov.seed.unwrap_or(spec.seed),
        comparison_times: spec.comparison_times.clone(),
        x_min: spec.x_min,
        x_max: spec.x_max,
        cells: spec.cells,
        dt: s.integrator.dtau,
    };
    let report = run_ensemble(&setup)?;

    let dir = ov.out_dir(s);
    create_out_dir(&dir)?;
    write_json(&dir.join("ensemble_report.json"), &report)?;

    for check in &report.times {
        println!(
            "ensemble: t = {:>8.4}  KS distance = {:.5} (band {:.5}): {}",
            check.t,
            check.ks_distance,
            report.band,
            if check.within_band { "PASS" } else { "FAIL" }
        );
    }
    println!(
        "ensemble: {} samples, seed {}: {}",
        report.n_samples,
        report.seed,
        if report.all_within_band { "PASS" } else { "FAIL" }
    );
    Ok(if report.all_within_band { 0 } else { 1 })
}
