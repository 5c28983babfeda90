//! Command-line driver: mesh generation, bell benchmarks and the Heston
//! run. Every subcommand writes its CSV files and a `manifest.txt` of
//! the full parameter set under `--out`.
//!
//! Exit codes: 0 on success, 2 on bad usage, 1 on runtime failure.
//! `DCGM_THREADS` sets the worker-thread count.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use nalgebra::Point2;
use rayon::prelude::*;

use crate::bench::{
    self, cross_section, default_steps, exact_bell, exact_summary, BellParams, BenchSettings, RunReport,
};
use crate::characteristics::TracerOrder;
use crate::error::{invalid, Result};
use crate::heston::{heston_run_with, HestonParams};
use crate::mesh::{build_disk_mesh, build_rect_mesh, save_mesh, Mesh};
use crate::quadrature::RuleKind;
use crate::schemes::{SchemeConfig, SchemeKind};

pub const THREADS_ENV: &str = "DCGM_THREADS";

// stdout writes that tolerate a closed pipe
macro_rules! say {
    ($($t:tt)*) => {{
        let _ = writeln!(std::io::stdout(), $($t)*);
    }};
}

#[derive(Parser, Debug)]
#[command(name = "dcgm", version, about = "Characteristic-Galerkin convection-diffusion solver and benchmarks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a disk or rectangle mesh.
    Mesh(MeshArgs),
    /// One turn of the rotating bell with one scheme.
    Bell(BellArgs),
    /// All schemes on one mesh, one turn each.
    Compare(CompareArgs),
    /// Error against mesh size for one scheme.
    Convergence(ConvergenceArgs),
    /// One DCGM turn from discontinuous data.
    Discont(DiscontArgs),
    /// Density of the Heston model and the put price.
    Heston(HestonArgs),
}

#[derive(Args, Debug, Clone)]
pub struct Output {
    /// Output directory (created if missing).
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Args, Debug, Clone)]
pub struct Numerics {
    /// Tracer order: 1 keeps the quadratic term, 0 drops it.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u8).range(0..=1))]
    pub sigma: u8,
    /// Quadrature for the characteristic right-hand side.
    #[arg(long, default_value = "ninepoint")]
    pub quadrature: RuleKind,
    /// Streamline-upwind parameter for SUPG.
    #[arg(long, default_value_t = 0.3)]
    pub supg_alpha: f64,
    /// Relative residual tolerance of the linear solvers.
    #[arg(long, default_value_t = 1e-12)]
    pub tol: f64,
    /// Step multiplier for the centered scheme.
    #[arg(long, default_value_t = 1)]
    pub centered_step_factor: usize,
}

impl Numerics {
    fn settings(&self) -> Result<BenchSettings> {
        let mut scheme = SchemeConfig::new(1e-4, 1.0)?
            .with_order(TracerOrder::from_sigma(self.sigma).expect("range-checked"))
            .with_quadrature(self.quadrature)
            .with_supg_alpha(self.supg_alpha);
        if !(self.tol > 0.0) {
            return Err(invalid(format!("solver tolerance must be positive, got {}", self.tol)));
        }
        scheme.solver.tolerance = self.tol;
        Ok(BenchSettings { scheme, centered_step_factor: self.centered_step_factor })
    }

    fn manifest(&self, m: &mut Manifest) {
        m.add("sigma", self.sigma);
        m.add("quadrature", format!("{:?}", self.quadrature));
        m.add("supg_alpha", self.supg_alpha);
        m.add("solver_tolerance", self.tol);
        m.add("centered_step_factor", self.centered_step_factor);
    }
}

#[derive(Args, Debug, Clone)]
pub struct BellShape {
    /// Bell sharpness.
    #[arg(long, default_value_t = 10.0)]
    pub r: f64,
    /// Initial centre `x,y`.
    #[arg(long, default_value = "0.35,0", value_parser = parse_point)]
    pub x0: Point2<f64>,
    /// Final time.
    #[arg(long = "t-final", default_value_t = 2.0 * std::f64::consts::PI)]
    pub t_final: f64,
}

impl BellShape {
    fn params(&self, nu: f64, n_steps: usize) -> BellParams {
        BellParams { x0: self.x0, r: self.r, nu, t_final: self.t_final, n_steps }
    }

    fn manifest(&self, m: &mut Manifest) {
        m.add("r", self.r);
        m.add("x0", format!("{:?},{:?}", self.x0.x, self.x0.y));
        m.add("t_final", self.t_final);
    }
}

#[derive(Args, Debug)]
pub struct MeshArgs {
    /// Boundary vertices of the unit-disk mesh.
    #[arg(long = "N", alias = "n", default_value_t = 200)]
    pub n: usize,
    /// Rectangle mesh `nx,ny` (vertices per side) instead of the disk.
    #[arg(long, value_parser = parse_pair)]
    pub rect: Option<(usize, usize)>,
    #[arg(long, default_value_t = 1.0)]
    pub x_max: f64,
    #[arg(long, default_value_t = 1.0)]
    pub y_max: f64,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Args, Debug)]
pub struct BellArgs {
    #[arg(long, default_value = "dcgm")]
    pub scheme: SchemeKind,
    #[arg(long = "N", alias = "n", default_value_t = 200)]
    pub n: usize,
    #[arg(long, default_value_t = 1e-4)]
    pub nu: f64,
    /// Time steps per turn (default N/3).
    #[arg(long)]
    pub steps: Option<usize>,
    /// Use the Dirichlet variant of DCGM with exact boundary values.
    #[arg(long)]
    pub dirichlet: bool,
    /// Drop the boundary integral of the Dirichlet variant.
    #[arg(long, requires = "dirichlet")]
    pub no_boundary_integral: bool,
    /// Samples of the y = 0 cross-section.
    #[arg(long, default_value_t = 401)]
    pub samples: usize,
    #[command(flatten)]
    pub shape: BellShape,
    #[command(flatten)]
    pub numerics: Numerics,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Args, Debug)]
pub struct CompareArgs {
    #[arg(long = "N", alias = "n", default_value_t = 200)]
    pub n: usize,
    #[arg(long, default_value_t = 0.01)]
    pub nu: f64,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long, value_delimiter = ',', default_value = "pcgm,dcgm,supg,centered")]
    pub schemes: Vec<SchemeKind>,
    #[arg(long, default_value_t = 401)]
    pub samples: usize,
    #[command(flatten)]
    pub shape: BellShape,
    #[command(flatten)]
    pub numerics: Numerics,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Args, Debug)]
pub struct ConvergenceArgs {
    #[arg(long, default_value = "dcgm")]
    pub scheme: SchemeKind,
    #[arg(long = "N", alias = "n", value_delimiter = ',', default_value = "100,200,400")]
    pub sizes: Vec<usize>,
    #[arg(long, default_value_t = 1e-4)]
    pub nu: f64,
    #[command(flatten)]
    pub shape: BellShape,
    #[command(flatten)]
    pub numerics: Numerics,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Args, Debug)]
pub struct DiscontArgs {
    #[arg(long = "N", alias = "n", default_value_t = 200)]
    pub n: usize,
    #[arg(long, default_value_t = 1e-4)]
    pub nu: f64,
    #[command(flatten)]
    pub numerics: Numerics,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Args, Debug)]
pub struct HestonArgs {
    #[arg(long, default_value_t = 150)]
    pub nx: usize,
    #[arg(long, default_value_t = 150)]
    pub ny: usize,
    #[arg(long, default_value_t = 1500)]
    pub steps: usize,
    /// Write a density snapshot every k steps (0 = final only).
    #[arg(long, default_value_t = 0)]
    pub snapshot_every: usize,
    #[arg(long, default_value_t = 0.03)]
    pub r: f64,
    #[arg(long, default_value_t = 2.0)]
    pub kappa: f64,
    #[arg(long, default_value_t = 0.1)]
    pub theta: f64,
    #[arg(long, default_value_t = 0.2)]
    pub lambda: f64,
    #[arg(long, default_value_t = -0.5, allow_hyphen_values = true)]
    pub rho: f64,
    #[arg(long, default_value_t = 50.0)]
    pub mu: f64,
    #[arg(long, default_value_t = 10.0)]
    pub sigma: f64,
    #[arg(long, default_value_t = 0.75)]
    pub mu_y: f64,
    #[arg(long, default_value_t = 0.1)]
    pub sigma_y: f64,
    #[arg(long, default_value_t = 75.0)]
    pub strike: f64,
    #[arg(long = "t-final", default_value_t = 10.0)]
    pub t_final: f64,
    #[arg(long, default_value_t = 200.0)]
    pub x_max: f64,
    #[arg(long, default_value_t = 2.0)]
    pub y_max: f64,
    /// Put `rho` on the off-diagonal of the diffusion matrix.
    #[arg(long)]
    pub offdiag_rho: bool,
    #[command(flatten)]
    pub output: Output,
}

fn parse_pair(s: &str) -> std::result::Result<(usize, usize), String> {
    let (a, b) = s.split_once(',').ok_or_else(|| format!("expected `nx,ny`, got `{s}`"))?;
    let parse = |t: &str| t.trim().parse::<usize>().map_err(|e| format!("`{t}`: {e}"));
    Ok((parse(a)?, parse(b)?))
}

fn parse_point(s: &str) -> std::result::Result<Point2<f64>, String> {
    let (a, b) = s.split_once(',').ok_or_else(|| format!("expected `x,y`, got `{s}`"))?;
    let parse = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("`{t}`: {e}"));
    Ok(Point2::new(parse(a)?, parse(b)?))
}

/// Ordered `key = value` lines.
#[derive(Default)]
struct Manifest(String);

impl Manifest {
    fn new(command: &str) -> Self {
        let mut m = Manifest::default();
        m.add("command", command);
        m.add("version", env!("CARGO_PKG_VERSION"));
        m
    }

    fn add(&mut self, key: &str, value: impl std::fmt::Debug) {
        let v = format!("{value:?}");
        let v = v.trim_matches('"');
        writeln!(self.0, "{key} = {v}").expect("writing to a String");
    }

    fn write(&self, dir: &Path) -> Result<()> {
        fs::write(dir.join("manifest.txt"), &self.0)?;
        Ok(())
    }
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn prepare_dir(out: &Path) -> Result<()> {
    fs::create_dir_all(out)?;
    Ok(())
}

fn steps_or_default(steps: Option<usize>, n: usize) -> Result<usize> {
    match steps {
        Some(0) => Err(invalid("--steps must be positive")),
        Some(s) => Ok(s),
        None => Ok(default_steps(n)),
    }
}

fn print_row(r: &RunReport) {
    say!(
        "{:<9} N={:<4} vertices={:<6} steps={:<4} min={:.6e} max={:.6} integral={:.6} l2_error={}",
        r.scheme.name(),
        r.n_boundary,
        r.vertices,
        r.n_steps,
        r.min,
        r.max,
        r.integral,
        r.l2_error.map_or("-".to_string(), |e| format!("{e:.6e}"))
    );
}

fn run_mesh(args: &MeshArgs) -> Result<()> {
    prepare_dir(&args.output.out)?;
    let mut m = Manifest::new("mesh");
    let mesh = match args.rect {
        Some((nx, ny)) => {
            m.add("kind", "rectangle");
            m.add("nx", nx);
            m.add("ny", ny);
            m.add("x_max", args.x_max);
            m.add("y_max", args.y_max);
            build_rect_mesh(nx, ny, args.x_max, args.y_max)?
        }
        None => {
            m.add("kind", "disk");
            m.add("N", args.n);
            build_disk_mesh(args.n)?
        }
    };
    save_mesh(&mesh, args.output.out.join("mesh.msh"))?;
    m.add("vertices", mesh.vertex_count());
    m.add("triangles", mesh.triangle_count());
    m.add("boundary_edges", mesh.boundary_edges().len());
    m.write(&args.output.out)?;
    say!(
        "mesh: {} vertices, {} triangles, {} boundary edges, h_max {:.4}",
        mesh.vertex_count(),
        mesh.triangle_count(),
        mesh.boundary_edges().len(),
        mesh.h_max()
    );
    Ok(())
}

fn run_bell_cmd(args: &BellArgs) -> Result<()> {
    let out = &args.output.out;
    prepare_dir(out)?;
    let settings = args.numerics.settings()?;
    let params = args.shape.params(args.nu, steps_or_default(args.steps, args.n)?);
    let mesh = Arc::new(build_disk_mesh(args.n)?);
    let (u, report) = if args.dirichlet {
        if args.scheme != SchemeKind::Dcgm {
            return Err(invalid("--dirichlet applies to the dcgm scheme only"));
        }
        bench::run_bell_dirichlet(&mesh, &params, &settings, !args.no_boundary_integral)?
    } else {
        bench::run_bell(&mesh, args.scheme, &params, &settings)?
    };
    print_row(&report);

    let mut m = Manifest::new("bell");
    m.add("scheme", args.scheme.name());
    m.add("N", args.n);
    m.add("nu", args.nu);
    m.add("steps", params.n_steps);
    m.add("dirichlet", args.dirichlet);
    m.add("boundary_integral", args.dirichlet && !args.no_boundary_integral);
    args.shape.manifest(&mut m);
    args.numerics.manifest(&mut m);

    let (_, exact) = exact_summary(&mesh, &params);
    bench::write_table1(std::slice::from_ref(&report), None, create(out, "table1.csv")?)?;
    report.write_diagnostics_csv(create(out, "diagnostics.csv")?)?;
    u.write_csv(create(out, "field.csv")?)?;
    let exact_cut = exact_cut(&params, args.samples);
    bench::write_cut(
        &[report.scheme.name()],
        &[cross_section(&u, args.samples)],
        &exact_cut,
        create(out, &format!("cut{}.csv", args.n))?,
    )?;
    m.add("exact_interpolated_max", exact.max);
    m.add("exact_closed_form_max", exact.closed_form_max);
    m.write(out)
}

fn exact_cut(params: &BellParams, samples: usize) -> Vec<(f64, f64)> {
    (0..samples)
        .map(|i| {
            let x = if samples == 1 { 0.0 } else { -1.0 + 2.0 * i as f64 / (samples - 1) as f64 };
            (x, exact_bell(params, &Point2::new(x, 0.0), params.t_final))
        })
        .collect()
}

fn run_compare(args: &CompareArgs) -> Result<()> {
    let out = &args.output.out;
    prepare_dir(out)?;
    if args.schemes.is_empty() {
        return Err(invalid("no schemes selected"));
    }
    let settings = args.numerics.settings()?;
    let params = args.shape.params(args.nu, steps_or_default(args.steps, args.n)?);
    let mesh = Arc::new(build_disk_mesh(args.n)?);
    let results = args
        .schemes
        .par_iter()
        .map(|&s| bench::run_bell(&mesh, s, &params, &settings))
        .collect::<Result<Vec<_>>>()?;
    let (_, exact) = exact_summary(&mesh, &params);
    say!(
        "{:<9} min={:.6e} max={:.6} integral={:.6} (closed-form peak {:.6})",
        "exact", exact.min, exact.max, exact.integral, exact.closed_form_max
    );
    let reports: Vec<RunReport> = results.iter().map(|(_, r)| r.clone()).collect();
    for r in &reports {
        print_row(r);
    }
    bench::write_table2(&exact, &reports, create(out, "table2.csv")?)?;
    let names: Vec<&str> = reports.iter().map(|r| r.scheme.name()).collect();
    let sections: Vec<_> = results.iter().map(|(u, _)| cross_section(u, args.samples)).collect();
    bench::write_cut(&names, &sections, &exact_cut(&params, args.samples), create(out, &format!("cut{}.csv", args.n))?)?;

    let mut m = Manifest::new("compare");
    m.add("schemes", names.join(","));
    m.add("N", args.n);
    m.add("nu", args.nu);
    m.add("steps", params.n_steps);
    args.shape.manifest(&mut m);
    args.numerics.manifest(&mut m);
    m.write(out)
}

fn run_convergence(args: &ConvergenceArgs) -> Result<()> {
    let out = &args.output.out;
    prepare_dir(out)?;
    let settings = args.numerics.settings()?;
    let params = args.shape.params(args.nu, 1);
    let study = bench::convergence_study(args.scheme, &args.sizes, &params, &settings)?;
    for r in &study.runs {
        print_row(r);
    }
    say!("fitted order in h: {:.3}", study.order);
    bench::write_convergence(&study, create(out, "convergence.csv")?)?;
    let finest = args.sizes.iter().copied().max().unwrap_or(0);
    let mesh: Arc<Mesh> = Arc::new(build_disk_mesh(finest)?);
    let (_, exact) = exact_summary(&mesh, &params);
    let exact_row = RunReport { min: exact.min, max: exact.max, integral: exact.integral, ..study.runs[0].clone() };
    let exact_row = RunReport { vertices: mesh.vertex_count(), ..exact_row };
    bench::write_table1(&study.runs, Some(&exact_row), create(out, "table1.csv")?)?;

    let mut m = Manifest::new("convergence");
    m.add("scheme", args.scheme.name());
    m.add("N", args.sizes.iter().map(|n| n.to_string()).collect::<Vec<_>>().join(","));
    m.add("steps", study.runs.iter().map(|r| r.n_steps.to_string()).collect::<Vec<_>>().join(","));
    m.add("nu", args.nu);
    args.shape.manifest(&mut m);
    args.numerics.manifest(&mut m);
    m.add("order", study.order);
    m.write(out)
}

fn run_discont(args: &DiscontArgs) -> Result<()> {
    let out = &args.output.out;
    prepare_dir(out)?;
    let settings = args.numerics.settings()?;
    let (u, report) = bench::discontinuous_test(args.n, args.nu, &settings)?;
    print_row(&report);
    say!(
        "initial integral {:.6}, max relative mass drift {:.3e}",
        report.initial_integral, report.max_mass_drift
    );
    report.write_diagnostics_csv(create(out, "diagnostics.csv")?)?;
    u.write_csv(create(out, "field.csv")?)?;
    let mut m = Manifest::new("discont");
    m.add("N", args.n);
    m.add("nu", report.nu);
    m.add("steps", report.n_steps);
    args.numerics.manifest(&mut m);
    m.write(out)
}

fn run_heston(args: &HestonArgs) -> Result<()> {
    let out = &args.output.out;
    prepare_dir(out)?;
    let params = HestonParams {
        r: args.r,
        kappa: args.kappa,
        theta: args.theta,
        lambda: args.lambda,
        rho: args.rho,
        mu: args.mu,
        sigma: args.sigma,
        mu_y: args.mu_y,
        sigma_y: args.sigma_y,
        strike: args.strike,
        t_final: args.t_final,
        x_max: args.x_max,
        y_max: args.y_max,
        offdiag_rho: args.offdiag_rho,
    };
    let every = args.snapshot_every;
    let result = heston_run_with(&params, args.nx, args.ny, args.steps, |step, u| {
        if every > 0 && step % every == 0 {
            u.write_csv(create(out, &format!("heston_u_{step:05}.csv"))?)?;
        }
        Ok(())
    })?;
    result.write_diag_csv(create(out, "heston_diag.csv")?)?;
    result.density.write_csv(create(out, "heston_u_final.csv")?)?;
    let min = result.history.iter().map(|s| s.min).fold(f64::INFINITY, f64::min);
    let drift = result.history.iter().map(|s| (s.mass - 1.0).abs()).fold(0.0, f64::max);
    say!("put price P_T = {:.6}", result.price);
    say!("max |mass - 1| = {drift:.3e}, min u = {min:.3e}");
    if result.negativity_warning {
        eprintln!("warning: density dipped below -1e-6 (min {min:.3e})");
    }
    if result.leakage_warning {
        eprintln!("warning: more than 1e-6 of the mass sits on the far boundary cells");
    }
    let mut m = Manifest::new("heston");
    for (k, v) in [
        ("r", params.r),
        ("kappa", params.kappa),
        ("theta", params.theta),
        ("lambda", params.lambda),
        ("rho", params.rho),
        ("mu", params.mu),
        ("sigma", params.sigma),
        ("mu_y", params.mu_y),
        ("sigma_y", params.sigma_y),
        ("strike", params.strike),
        ("t_final", params.t_final),
        ("x_max", params.x_max),
        ("y_max", params.y_max),
    ] {
        m.add(k, v);
    }
    m.add("offdiag_rho", params.offdiag_rho);
    m.add("nx", args.nx);
    m.add("ny", args.ny);
    m.add("steps", args.steps);
    m.add("snapshot_every", every);
    m.add("put_price", result.price);
    m.write(out)
}

/// Runs a parsed command.
pub fn execute(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Mesh(a) => run_mesh(a),
        Command::Bell(a) => run_bell_cmd(a),
        Command::Compare(a) => run_compare(a),
        Command::Convergence(a) => run_convergence(a),
        Command::Discont(a) => run_discont(a),
        Command::Heston(a) => run_heston(a),
    }
}

fn configure_threads() -> Result<()> {
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v
            .trim()
            .parse()
            .map_err(|_| invalid(format!("{THREADS_ENV} must be a positive integer, got `{v}`")))?;
        // a second call in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

/// Parses `args` (including the program name), runs, and returns the
/// process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    if let Err(e) = configure_threads().and_then(|_| execute(&cli)) {
        eprintln!("error: {e}");
        let _ = std::io::stderr().flush();
        return 1;
    }
    0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_pairs_and_points() {
        assert_eq!(parse_pair("60,40").unwrap(), (60, 40));
        assert!(parse_pair("60").is_err());
        assert_eq!(parse_point("0.5,-1").unwrap(), Point2::new(0.5, -1.0));
    }

    #[test]
    fn defaults_are_the_reference_experiments() {
        let cli = Cli::try_parse_from(["dcgm", "compare"]).unwrap();
        let Command::Compare(a) = cli.command else { panic!() };
        assert_eq!(a.n, 200);
        assert_eq!(a.nu, 0.01);
        assert_eq!(a.schemes.len(), 4);
        let cli = Cli::try_parse_from(["dcgm", "convergence"]).unwrap();
        let Command::Convergence(a) = cli.command else { panic!() };
        assert_eq!(a.sizes, vec![100, 200, 400]);
        assert_eq!(a.nu, 1e-4);
        let cli = Cli::try_parse_from(["dcgm", "heston"]).unwrap();
        let Command::Heston(a) = cli.command else { panic!() };
        assert_eq!((a.nx, a.ny, a.steps), (150, 150, 1500));
    }

    #[test]
    fn unknown_flags_are_usage_errors() {
        assert_eq!(main_with_args(["dcgm", "bell", "--bogus"]), 2);
        assert_eq!(main_with_args(["dcgm", "bell", "--scheme", "upwind"]), 2);
        assert_eq!(main_with_args(["dcgm"]), 2);
    }
}
