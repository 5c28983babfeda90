//! Forward Kolmogorov equation of the Heston model.
//!
//! For `dX = X (r dt + sqrt(Y) dW1)`, `dY = kappa (theta - Y) dt + lambda sqrt(Y) dW2`
//! the density `u(x, y, t)` satisfies
//!
//! `u_t + div(b u) - sum_ij d_i d_j (A_ij u / 2) = 0`,
//! `b = (r x, kappa (theta - y))`, `A = [[x^2 y, c lambda x y], [c lambda x y, lambda^2 y]]`
//!
//! with `c = 1` (as printed in the reference model) or `c = rho`.
//! Writing `(div A)_i = sum_j d_j A_ij`,
//!
//! `sum_ij d_i d_j (A_ij u) / 2 = div( (div A) u / 2 + D grad u )`, `D = A / 2`,
//!
//! so the equation is `u_t + div(b~ u) - div(D grad u) = 0` with
//! `b~ = b - (div A) / 2`. Here `div A = (2 x y + c lambda x, c lambda y + lambda^2)`:
//!
//! `b~_1 = x (r - y - c lambda / 2)`,
//! `b~_2 = kappa (theta - y) - (c lambda y + lambda^2) / 2`.
//!
//! The zero-flux condition `(b~ u - D grad u) . n = 0` on the truncated
//! rectangle is natural for this form, and DCGM keeps `int u = 1`.

use std::io::Write;
use std::sync::Arc;

use nalgebra::{Matrix2, Point2, Vector2};

use crate::characteristics::{build_traced_points, Direction, TracerOrder, VelocityField};
use crate::error::{invalid, Result};
use crate::fem::{assemble, assemble_mass, FieldP1};
use crate::linalg::{SolverOptions, SparseMatrix};
use crate::mesh::{build_rect_mesh, Mesh};
use crate::quadrature::{map_point, nine_point_rule, QuadratureRule};
use crate::schemes::DcgmOperator;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HestonParams {
    pub r: f64,
    pub kappa: f64,
    pub theta: f64,
    pub lambda: f64,
    pub rho: f64,
    /// Mean and standard deviation of `X_0`.
    pub mu: f64,
    pub sigma: f64,
    /// Mean and standard deviation of `Y_0`.
    pub mu_y: f64,
    pub sigma_y: f64,
    pub strike: f64,
    pub t_final: f64,
    pub x_max: f64,
    pub y_max: f64,
    /// Use `rho lambda x y` off the diagonal of `A` instead of `lambda x y`.
    pub offdiag_rho: bool,
}

impl Default for HestonParams {
    fn default() -> Self {
        Self {
            r: 0.03,
            kappa: 2.0,
            theta: 0.1,
            lambda: 0.2,
            rho: -0.5,
            mu: 50.0,
            sigma: 10.0,
            mu_y: 0.75,
            sigma_y: 0.1,
            strike: 75.0,
            t_final: 10.0,
            x_max: 200.0,
            y_max: 2.0,
            offdiag_rho: false,
        }
    }
}

impl HestonParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("r", self.r),
            ("kappa", self.kappa),
            ("theta", self.theta),
            ("lambda", self.lambda),
            ("sigma", self.sigma),
            ("sigma_y", self.sigma_y),
            ("strike", self.strike),
            ("t_final", self.t_final),
            ("x_max", self.x_max),
            ("y_max", self.y_max),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.rho.abs() <= 1.0) {
            return Err(invalid(format!("rho must lie in [-1, 1], got {}", self.rho)));
        }
        if !self.mu.is_finite() || !self.mu_y.is_finite() {
            return Err(invalid("initial means must be finite"));
        }
        Ok(())
    }

    fn offdiag_factor(&self) -> f64 {
        if self.offdiag_rho {
            self.rho
        } else {
            1.0
        }
    }
}

/// Diffusion tensor `D = A / 2` and effective drift `b~` of the
/// conservative form. Implements [`VelocityField`] for `b~`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HestonOperator {
    r: f64,
    kappa: f64,
    theta: f64,
    lambda: f64,
    c: f64,
}

pub fn heston_operator(params: &HestonParams) -> HestonOperator {
    HestonOperator {
        r: params.r,
        kappa: params.kappa,
        theta: params.theta,
        lambda: params.lambda,
        c: params.offdiag_factor(),
    }
}

impl HestonOperator {
    /// `A(x, y)`.
    pub fn covariance(&self, p: &Point2<f64>) -> Matrix2<f64> {
        let (x, y, l) = (p.x, p.y, self.lambda);
        let off = self.c * l * x * y;
        Matrix2::new(x * x * y, off, off, l * l * y)
    }

    pub fn diffusion(&self, p: &Point2<f64>) -> Matrix2<f64> {
        self.covariance(p) * 0.5
    }

    /// Drift `b` of the original equation.
    pub fn drift(&self, p: &Point2<f64>) -> Vector2<f64> {
        Vector2::new(self.r * p.x, self.kappa * (self.theta - p.y))
    }

    /// Row-wise divergence of `A`.
    pub fn covariance_divergence(&self, p: &Point2<f64>) -> Vector2<f64> {
        let (x, y, l, c) = (p.x, p.y, self.lambda, self.c);
        Vector2::new(2.0 * x * y + c * l * x, c * l * y + l * l)
    }
}

impl VelocityField for HestonOperator {
    fn value(&self, p: &Point2<f64>) -> Vector2<f64> {
        let (x, y, l, c) = (p.x, p.y, self.lambda, self.c);
        Vector2::new(
            x * (self.r - y - 0.5 * c * l),
            self.kappa * (self.theta - y) - 0.5 * (c * l * y + l * l),
        )
    }

    fn jacobian(&self, p: &Point2<f64>) -> Matrix2<f64> {
        let (x, y, l, c) = (p.x, p.y, self.lambda, self.c);
        // row i holds d/dx_i of (b~_1, b~_2)
        Matrix2::new(self.r - y - 0.5 * c * l, 0.0, -x, -self.kappa - 0.5 * c * l)
    }
}

/// `K_ij = sum_T sum_q w_q |T| grad phi_i . D(xi_q) grad phi_j`.
pub fn assemble_tensor_stiffness<F>(mesh: &Mesh, diffusion: F, rule: &QuadratureRule) -> SparseMatrix
where
    F: Fn(&Point2<f64>) -> Matrix2<f64> + Sync,
{
    assemble(mesh, |t| {
        let pts = mesh.triangle_points(t);
        let g = mesh.barycentric_gradients(t);
        let d: Matrix2<f64> = rule.iter().map(|(b, w)| diffusion(&map_point(&pts, b)) * w).sum::<Matrix2<f64>>() * mesh.area(t);
        let mut k = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                k[i][j] = g[i].dot(&(d * g[j]));
            }
        }
        k
    })
}

fn gaussian(x: f64, mean: f64, sd: f64) -> f64 {
    let z = (x - mean) / sd;
    (-0.5 * z * z).exp() / (sd * (2.0 * std::f64::consts::PI).sqrt())
}

/// Product Gaussian `G(x) G(y)` interpolated and scaled to unit mass.
pub fn initial_density(mesh: &Arc<Mesh>, params: &HestonParams) -> Result<FieldP1> {
    let u = FieldP1::interpolate(mesh.clone(), |p| {
        gaussian(p.x, params.mu, params.sigma) * gaussian(p.y, params.mu_y, params.sigma_y)
    });
    let mass = u.integral();
    if !(mass > 0.0) {
        return Err(invalid("initial density has no mass on the domain"));
    }
    let values = u.values().iter().map(|v| v / mass).collect();
    Ok(FieldP1::new(mesh.clone(), values))
}

/// `int (K - x)_+ u` with the nine-point rule.
pub fn put_price(u: &FieldP1, strike: f64) -> f64 {
    let mesh = u.mesh();
    let rule = nine_point_rule();
    let v = u.values();
    (0..mesh.triangle_count())
        .map(|t| {
            let pts = mesh.triangle_points(t);
            let tri = mesh.triangle(t);
            let local: f64 = rule
                .iter()
                .map(|(b, w)| {
                    let x = map_point(&pts, b).x;
                    let uh: f64 = (0..3).map(|k| v[tri[k]] * b[k]).sum();
                    w * (strike - x).max(0.0) * uh
                })
                .sum();
            local * mesh.area(t)
        })
        .sum()
}

/// `int x u`.
pub fn first_moment_x(u: &FieldP1) -> f64 {
    let mesh = u.mesh();
    let v = u.values();
    (0..mesh.triangle_count())
        .map(|t| {
            let pts = mesh.triangle_points(t);
            let tri = mesh.triangle(t);
            // exact for the quadratic x * u_h: mid-edge rule
            let local: f64 = crate::quadrature::midedge_rule()
                .iter()
                .map(|(b, w)| w * map_point(&pts, b).x * (0..3).map(|k| v[tri[k]] * b[k]).sum::<f64>())
                .sum();
            local * mesh.area(t)
        })
        .sum()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HestonStep {
    pub step: usize,
    pub time: f64,
    pub mass: f64,
    pub min: f64,
    pub max: f64,
    pub price: f64,
    /// Mass on triangles touching the far edges `x = x_max`, `y = y_max`.
    pub far_boundary_mass: f64,
    pub solver_iters: usize,
}

#[derive(Clone, Debug)]
pub struct HestonResult {
    pub density: FieldP1,
    pub history: Vec<HestonStep>,
    pub price: f64,
    /// Set when some step had `min u < -1e-6`.
    pub negativity_warning: bool,
    /// Set when the far-boundary mass exceeded `1e-6`.
    pub leakage_warning: bool,
}

impl HestonResult {
    pub const CSV_HEADER: &'static str = "step,time,mass,min,max,price,far_boundary_mass,solver_iters";

    pub fn write_diag_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{}", Self::CSV_HEADER)?;
        for s in &self.history {
            writeln!(
                w,
                "{},{:?},{:?},{:?},{:?},{:?},{:?},{}",
                s.step, s.time, s.mass, s.min, s.max, s.price, s.far_boundary_mass, s.solver_iters
            )?;
        }
        Ok(())
    }
}

fn far_boundary_triangles(mesh: &Mesh) -> Vec<usize> {
    let mut tris: Vec<usize> = mesh
        .boundary_edges()
        .iter()
        .filter(|e| e.label == 2 || e.label == 3)
        .map(|e| e.triangle)
        .collect();
    tris.sort_unstable();
    tris.dedup();
    tris
}

fn mass_on(u: &FieldP1, tris: &[usize]) -> f64 {
    let mesh = u.mesh();
    tris.iter()
        .map(|&t| {
            let tri = mesh.triangle(t);
            mesh.area(t) * (u.values()[tri[0]] + u.values()[tri[1]] + u.values()[tri[2]]) / 3.0
        })
        .sum()
}

/// DCGM solve on an `nx x ny` vertex grid of `[0, x_max] x [0, y_max]`
/// with `n_steps` steps of `t_final / n_steps`. `observe` sees every
/// state, including the initial one at step 0.
pub fn heston_run_with<O>(params: &HestonParams, nx: usize, ny: usize, n_steps: usize, mut observe: O) -> Result<HestonResult>
where
    O: FnMut(usize, &FieldP1) -> Result<()>,
{
    params.validate()?;
    if n_steps == 0 {
        return Err(invalid("need at least one time step"));
    }
    let mesh = Arc::new(build_rect_mesh(nx, ny, params.x_max, params.y_max)?);
    let dt = params.t_final / n_steps as f64;
    let op = heston_operator(params);
    let rule = nine_point_rule();
    let matrix = assemble_mass(&mesh).linear_combination(1.0, &assemble_tensor_stiffness(&mesh, |p| op.diffusion(p), &rule), dt);
    let traced = build_traced_points(&mesh, &op, &rule, dt, TracerOrder::Second, Direction::Forward);
    let stepper = DcgmOperator::from_parts(mesh.clone(), matrix, traced, SolverOptions::default())?;
    let far = far_boundary_triangles(&mesh);

    let mut u = initial_density(&mesh, params)?;
    observe(0, &u)?;
    let mut history = Vec::with_capacity(n_steps + 1);
    let record = |step: usize, u: &FieldP1, iters: usize| HestonStep {
        step,
        time: step as f64 * dt,
        mass: u.integral(),
        min: u.min_coeff(),
        max: u.max_coeff(),
        price: put_price(u, params.strike),
        far_boundary_mass: mass_on(u, &far),
        solver_iters: iters,
    };
    history.push(record(0, &u, 0));
    for step in 1..=n_steps {
        let (next, diag) = stepper.step(&u)?;
        u = next;
        history.push(record(step, &u, diag.solver.iterations));
        observe(step, &u)?;
    }
    let negativity_warning = history.iter().any(|s| s.min < -1e-6);
    let leakage_warning = history.iter().any(|s| s.far_boundary_mass > 1e-6);
    Ok(HestonResult {
        price: put_price(&u, params.strike),
        density: u,
        history,
        negativity_warning,
        leakage_warning,
    })
}

pub fn heston_run(params: &HestonParams, nx: usize, ny: usize, n_steps: usize) -> Result<HestonResult> {
    heston_run_with(params, nx, ny, n_steps, |_, _| Ok(()))
}
