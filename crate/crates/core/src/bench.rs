//! Rotating-bell verification suite.
//!
//! The bell `u_e(x, t) = exp(-r |x - x0(t)|^2 / (1 + 4 nu r t)) / (1 + 4 nu r t)`
//! solves `u_t + a . grad u - nu lap u = 0` for the rotation `a = (-y, x)`,
//! with `x0(t)` the rotated initial centre. Its normal derivative on the
//! unit circle is negligible for the default parameters.

use std::io::Write;
use std::sync::Arc;
use std::time::Instant;

use nalgebra::Point2;
use rayon::prelude::*;

use crate::characteristics::rotation_field;
use crate::error::{invalid, Result};
use crate::fem::FieldP1;
use crate::mesh::{build_disk_mesh, Mesh, PointLocator};
use crate::quadrature::nine_point_rule;
use crate::schemes::{DcgmDirichletOperator, SchemeConfig, SchemeKind, StepDiagnostics};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BellParams {
    pub x0: Point2<f64>,
    pub r: f64,
    pub nu: f64,
    pub t_final: f64,
    pub n_steps: usize,
}

impl BellParams {
    /// Defaults: centre (0.35, 0), r = 10, one full turn.
    pub fn new(nu: f64, n_steps: usize) -> Self {
        Self {
            x0: Point2::new(0.35, 0.0),
            r: 10.0,
            nu,
            t_final: 2.0 * std::f64::consts::PI,
            n_steps,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.r > 0.0) {
            return Err(invalid(format!("bell sharpness must be positive, got {}", self.r)));
        }
        if !(self.nu > 0.0) {
            return Err(invalid(format!("diffusion coefficient must be positive, got {}", self.nu)));
        }
        if !(self.t_final > 0.0) {
            return Err(invalid(format!("final time must be positive, got {}", self.t_final)));
        }
        if self.n_steps == 0 {
            return Err(invalid("need at least one time step"));
        }
        Ok(())
    }

    pub fn dt(&self) -> f64 {
        self.t_final / self.n_steps as f64
    }
}

/// Step count used for a mesh with `n` boundary vertices: 33, 66, 133
/// for n = 100, 200, 400.
pub fn default_steps(n_boundary: usize) -> usize {
    (n_boundary / 3).max(1)
}

/// Centre of the bell at time `t` (counterclockwise rotation).
pub fn bell_center(params: &BellParams, t: f64) -> Point2<f64> {
    let (s, c) = t.sin_cos();
    let p = params.x0;
    Point2::new(p.x * c - p.y * s, p.x * s + p.y * c)
}

pub fn exact_bell(params: &BellParams, x: &Point2<f64>, t: f64) -> f64 {
    let spread = 1.0 + 4.0 * params.nu * params.r * t;
    let d2 = (x - bell_center(params, t)).norm_squared();
    (-params.r * d2 / spread).exp() / spread
}

/// Indicator of the disc `(x - 0.3)^2 + y^2 < 0.15`.
pub fn indicator_datum(p: &Point2<f64>) -> f64 {
    if (p.x - 0.3).powi(2) + p.y * p.y < 0.15 {
        1.0
    } else {
        0.0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunReport {
    pub n_boundary: usize,
    pub vertices: usize,
    pub n_steps: usize,
    pub scheme: SchemeKind,
    pub nu: f64,
    pub dt: f64,
    /// Final-time statistics of the computed field.
    pub min: f64,
    pub max: f64,
    pub integral: f64,
    /// `None` when the run has no closed-form reference.
    pub l2_error: Option<f64>,
    pub initial_integral: f64,
    /// Largest `|int u^n - int u^0| / |int u^0|` over all steps.
    pub max_mass_drift: f64,
    /// Smallest coefficient seen at any step.
    pub min_over_run: f64,
    pub max_projected_fraction: f64,
    pub cfl_warning: bool,
    /// `||u^n||_{nu dt}` for n = 0..=n_steps.
    pub energy: Vec<f64>,
    pub steps: Vec<StepDiagnostics>,
    pub wall_time: f64,
}

impl RunReport {
    /// `(||u^n|| / ||u^{n-1}||)` for every step.
    pub fn growth_factors(&self) -> Vec<f64> {
        self.energy.windows(2).map(|w| w[1] / w[0]).collect()
    }

    pub fn write_diagnostics_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{}", StepDiagnostics::CSV_HEADER)?;
        for (i, d) in self.steps.iter().enumerate() {
            d.write_csv_row(i + 1, &mut w)?;
        }
        Ok(())
    }
}

/// Scheme settings shared by the bench runs; `nu` and `dt` come from
/// [`BellParams`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BenchSettings {
    pub scheme: SchemeConfig,
    /// The centered scheme is run with this many times more steps per turn.
    pub centered_step_factor: usize,
}

impl Default for BenchSettings {
    fn default() -> Self {
        Self {
            scheme: SchemeConfig::new(1e-4, 1.0).expect("valid defaults"),
            centered_step_factor: 1,
        }
    }
}

impl BenchSettings {
    fn config(&self, nu: f64, dt: f64) -> Result<SchemeConfig> {
        let cfg = SchemeConfig { nu, dt, ..self.scheme };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Runs `scheme` from `u0` for `params.n_steps` steps (times
/// `centered_step_factor` for the centered scheme), comparing with
/// `exact` at the final time when given.
pub fn run_from(
    mesh: &Arc<Mesh>,
    scheme: SchemeKind,
    params: &BellParams,
    settings: &BenchSettings,
    u0: FieldP1,
    exact: Option<&(dyn Fn(&Point2<f64>) -> f64 + Sync)>,
) -> Result<(FieldP1, RunReport)> {
    params.validate()?;
    let n_steps = if scheme == SchemeKind::Centered {
        params.n_steps * settings.centered_step_factor.max(1)
    } else {
        params.n_steps
    };
    let dt = params.t_final / n_steps as f64;
    let cfg = settings.config(params.nu, dt)?;
    let op = scheme.prepare(mesh, &rotation_field(), &cfg)?;
    drive(mesh, scheme, params.nu, n_steps, dt, u0, exact, |_, u| op.step(u))
}

#[allow(clippy::too_many_arguments)]
fn drive<S>(
    mesh: &Arc<Mesh>,
    scheme: SchemeKind,
    nu: f64,
    n_steps: usize,
    dt: f64,
    u0: FieldP1,
    exact: Option<&(dyn Fn(&Point2<f64>) -> f64 + Sync)>,
    mut step: S,
) -> Result<(FieldP1, RunReport)>
where
    S: FnMut(usize, &FieldP1) -> Result<(FieldP1, StepDiagnostics)>,
{
    let start = Instant::now();
    let initial_integral = u0.integral();
    let mut energy = Vec::with_capacity(n_steps + 1);
    energy.push(u0.nu_dt_norm(nu, dt).value);
    let mut steps = Vec::with_capacity(n_steps);
    let mut u = u0;
    let mut min_over_run = u.min_coeff();
    let mut max_mass_drift: f64 = 0.0;
    let mut cfl_warning = false;
    for n in 1..=n_steps {
        let (next, diag) = step(n, &u)?;
        energy.push(next.nu_dt_norm(nu, dt).value);
        min_over_run = min_over_run.min(diag.min);
        max_mass_drift = max_mass_drift.max((diag.mass - initial_integral).abs() / initial_integral.abs());
        cfl_warning |= diag.cfl_warning;
        steps.push(diag);
        u = next;
    }
    let l2_error = exact.map(|f| u.l2_error(|x| f(&x), &nine_point_rule()));
    let report = RunReport {
        n_boundary: mesh.boundary_edges().len(),
        vertices: mesh.vertex_count(),
        n_steps,
        scheme,
        nu,
        dt,
        min: u.min_coeff(),
        max: u.max_coeff(),
        integral: u.integral(),
        l2_error,
        initial_integral,
        max_mass_drift,
        min_over_run,
        max_projected_fraction: steps.iter().map(|d| d.projected_fraction).fold(0.0, f64::max),
        cfl_warning,
        energy,
        steps,
        wall_time: start.elapsed().as_secs_f64(),
    };
    Ok((u, report))
}

/// One turn of the bell with the Dirichlet variant of DCGM, boundary
/// values taken from the exact bell at each step.
pub fn run_bell_dirichlet(
    mesh: &Arc<Mesh>,
    params: &BellParams,
    settings: &BenchSettings,
    boundary_integral: bool,
) -> Result<(FieldP1, RunReport)> {
    params.validate()?;
    let p = *params;
    let dt = p.dt();
    let cfg = settings.config(p.nu, dt)?;
    let op = DcgmDirichletOperator::prepare(mesh.clone(), &rotation_field(), &cfg, boundary_integral)?;
    let boundary: Vec<Point2<f64>> = op.boundary_vertices().iter().map(|&v| mesh.vertex(v)).collect();
    let u0 = FieldP1::interpolate(mesh.clone(), |x| exact_bell(&p, &x, 0.0));
    let exact = move |x: &Point2<f64>| exact_bell(&p, x, p.t_final);
    drive(mesh, SchemeKind::Dcgm, p.nu, p.n_steps, dt, u0, Some(&exact), |n, u| {
        let t = n as f64 * dt;
        let g: Vec<f64> = boundary.iter().map(|x| exact_bell(&p, x, t)).collect();
        op.step(u, &g)
    })
}

/// One turn of the bell on an existing mesh.
pub fn run_bell(
    mesh: &Arc<Mesh>,
    scheme: SchemeKind,
    params: &BellParams,
    settings: &BenchSettings,
) -> Result<(FieldP1, RunReport)> {
    let p = *params;
    let u0 = FieldP1::interpolate(mesh.clone(), |x| exact_bell(&p, &x, 0.0));
    let exact = move |x: &Point2<f64>| exact_bell(&p, x, p.t_final);
    run_from(mesh, scheme, params, settings, u0, Some(&exact))
}

/// One turn of the bell on the disk mesh with `n_boundary` boundary vertices.
pub fn run_one_turn(
    n_boundary: usize,
    scheme: SchemeKind,
    params: &BellParams,
    settings: &BenchSettings,
) -> Result<RunReport> {
    let mesh = Arc::new(build_disk_mesh(n_boundary)?);
    Ok(run_bell(&mesh, scheme, params, settings)?.1)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceReport {
    pub runs: Vec<RunReport>,
    /// Nominal mesh size `2 pi / N` per run.
    pub h: Vec<f64>,
    /// Least-squares slope of `log(error)` against `log(h)`.
    pub order: f64,
}

/// Least-squares slope of `y` against `x`.
pub fn fit_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

/// Runs one turn per mesh size (step count `N / 3`) and fits the order
/// of the L2 error in `h`. Runs execute in parallel.
pub fn convergence_study(
    scheme: SchemeKind,
    sizes: &[usize],
    params: &BellParams,
    settings: &BenchSettings,
) -> Result<ConvergenceReport> {
    if sizes.len() < 3 {
        return Err(invalid(format!("a convergence study needs at least 3 mesh sizes, got {}", sizes.len())));
    }
    let runs = sizes
        .par_iter()
        .map(|&n| {
            let p = BellParams { n_steps: default_steps(n), ..*params };
            run_one_turn(n, scheme, &p, settings)
        })
        .collect::<Result<Vec<_>>>()?;
    let h: Vec<f64> = sizes.iter().map(|&n| 2.0 * std::f64::consts::PI / n as f64).collect();
    let log_h: Vec<f64> = h.iter().map(|v| v.ln()).collect();
    let log_e: Vec<f64> = runs.iter().map(|r| r.l2_error.unwrap_or(f64::NAN).ln()).collect();
    let order = fit_slope(&log_h, &log_e);
    Ok(ConvergenceReport { runs, h, order })
}

/// One DCGM turn from the indicator datum.
pub fn discontinuous_test(n_boundary: usize, nu: f64, settings: &BenchSettings) -> Result<(FieldP1, RunReport)> {
    let mesh = Arc::new(build_disk_mesh(n_boundary)?);
    let params = BellParams::new(nu, default_steps(n_boundary));
    let u0 = FieldP1::interpolate(mesh.clone(), |p| indicator_datum(&p));
    run_from(&mesh, SchemeKind::Dcgm, &params, settings, u0, None)
}

/// One DCGM turn of the bell started at (0.5, 0), which overlaps the
/// boundary.
pub fn boundary_crossing_test(n_boundary: usize, nu: f64, settings: &BenchSettings) -> Result<(FieldP1, RunReport)> {
    let mesh = Arc::new(build_disk_mesh(n_boundary)?);
    let params = BellParams { x0: Point2::new(0.5, 0.0), ..BellParams::new(nu, default_steps(n_boundary)) };
    run_bell(&mesh, SchemeKind::Dcgm, &params, settings)
}

/// Samples `u(x, 0)` at `n_samples` equispaced points of `[-1, 1]`.
/// Points outside the mesh (possible at the ends, since the mesh is a
/// polygon) are evaluated at their projection.
pub fn cross_section(field: &FieldP1, n_samples: usize) -> Vec<(f64, f64)> {
    let mut locator = PointLocator::new(field.mesh());
    (0..n_samples)
        .map(|i| {
            let x = if n_samples == 1 { 0.0 } else { -1.0 + 2.0 * i as f64 / (n_samples - 1) as f64 };
            let (loc, _) = locator.locate_or_project(&Point2::new(x, 0.0));
            (x, field.evaluate(&loc))
        })
        .collect()
}

/// Table rows `N,vertices,steps,min,max,integral,l2_error`.
pub fn write_table1<W: Write>(runs: &[RunReport], exact: Option<&RunReport>, mut w: W) -> Result<()> {
    writeln!(w, "N,vertices,steps,min,max,integral,l2_error")?;
    for r in runs {
        writeln!(
            w,
            "{},{},{},{:?},{:?},{:?},{:?}",
            r.n_boundary,
            r.vertices,
            r.n_steps,
            r.min,
            r.max,
            r.integral,
            r.l2_error.unwrap_or(f64::NAN)
        )?;
    }
    if let Some(e) = exact {
        writeln!(w, "exact,{},,{:?},{:?},{:?},0.0", e.vertices, e.min, e.max, e.integral)?;
    }
    Ok(())
}

/// Table rows `method,min,max,integral,l2_error`.
pub fn write_table2<W: Write>(exact: &ExactSummary, runs: &[RunReport], mut w: W) -> Result<()> {
    writeln!(w, "method,min,max,integral,l2_error")?;
    writeln!(w, "exact_interpolated,{:?},{:?},{:?},", exact.min, exact.max, exact.integral)?;
    for r in runs {
        writeln!(
            w,
            "{},{:?},{:?},{:?},{:?}",
            r.scheme.name(),
            r.min,
            r.max,
            r.integral,
            r.l2_error.unwrap_or(f64::NAN)
        )?;
    }
    Ok(())
}

pub fn write_convergence<W: Write>(study: &ConvergenceReport, mut w: W) -> Result<()> {
    writeln!(w, "N,vertices,h,l2_error")?;
    for (r, h) in study.runs.iter().zip(&study.h) {
        writeln!(w, "{},{},{:?},{:?}", r.n_boundary, r.vertices, h, r.l2_error.unwrap_or(f64::NAN))?;
    }
    writeln!(w, "# order,{:?}", study.order)?;
    Ok(())
}

/// Columns `x`, one per field, then `exact`.
pub fn write_cut<W: Write>(names: &[&str], sections: &[Vec<(f64, f64)>], exact: &[(f64, f64)], mut w: W) -> Result<()> {
    write!(w, "x")?;
    for n in names {
        write!(w, ",{n}")?;
    }
    writeln!(w, ",exact")?;
    for (i, &(x, e)) in exact.iter().enumerate() {
        write!(w, "{x:?}")?;
        for s in sections {
            write!(w, ",{:?}", s[i].1)?;
        }
        writeln!(w, ",{e:?}")?;
    }
    Ok(())
}

/// Statistics of the exact solution interpolated at the final time,
/// alongside its closed-form peak.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExactSummary {
    pub min: f64,
    pub max: f64,
    pub integral: f64,
    pub closed_form_max: f64,
}

pub fn exact_summary(mesh: &Arc<Mesh>, params: &BellParams) -> (FieldP1, ExactSummary) {
    let p = *params;
    let u = FieldP1::interpolate(mesh.clone(), |x| exact_bell(&p, &x, p.t_final));
    let summary = ExactSummary {
        min: u.min_coeff(),
        max: u.max_coeff(),
        integral: u.integral(),
        closed_form_max: 1.0 / (1.0 + 4.0 * p.nu * p.r * p.t_final),
    };
    (u, summary)
}
