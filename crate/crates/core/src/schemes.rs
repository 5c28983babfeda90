//! Time steppers for `u_t + a . grad u - nu lap u = 0` with homogeneous
//! Neumann conditions.
//!
//! * [`DcgmOperator`]: dual characteristic-Galerkin. Test functions are
//!   evaluated at forward-traced quadrature nodes; mass is conserved to
//!   solver tolerance for any velocity field.
//! * [`PcgmOperator`]: primal characteristic-Galerkin. The previous
//!   solution is evaluated at backward-traced nodes; not conservative.
//! * [`SupgOperator`]: implicit Euler with streamline-upwind test
//!   functions `w + alpha a . grad w`. With `alpha = 0` this is the
//!   centered scheme.
//! * [`DcgmDirichletOperator`]: experimental Dirichlet variant of DCGM.

use std::io::Write;
use std::str::FromStr;
use std::sync::Arc;

use crate::characteristics::{build_traced_points, Direction, TracedPoints, TracerOrder, VelocityField};
use crate::error::{invalid, Error, Result};
use crate::fem::{assemble, assemble_mass, assemble_stiffness, FieldP1};
use crate::linalg::{bicgstab_solve, cg_solve, SolveReport, SolverOptions, SparseMatrix};
use crate::mesh::Mesh;
use crate::quadrature::{map_point, midedge_rule, RuleKind};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SchemeConfig {
    pub nu: f64,
    pub dt: f64,
    pub order: TracerOrder,
    pub quadrature: RuleKind,
    pub supg_alpha: f64,
    pub solver: SolverOptions,
}

impl SchemeConfig {
    pub fn new(nu: f64, dt: f64) -> Result<Self> {
        let cfg = Self {
            nu,
            dt,
            order: TracerOrder::Second,
            quadrature: RuleKind::NinePoint,
            supg_alpha: 0.3,
            solver: SolverOptions::default(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_order(mut self, order: TracerOrder) -> Self {
        self.order = order;
        self
    }

    pub fn with_quadrature(mut self, q: RuleKind) -> Self {
        self.quadrature = q;
        self
    }

    pub fn with_supg_alpha(mut self, alpha: f64) -> Self {
        self.supg_alpha = alpha;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.nu > 0.0 && self.nu.is_finite()) {
            return Err(invalid(format!("diffusion coefficient must be positive, got {}", self.nu)));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(invalid(format!("time step must be positive, got {}", self.dt)));
        }
        if !self.supg_alpha.is_finite() || self.supg_alpha < 0.0 {
            return Err(invalid(format!("SUPG parameter must be non-negative, got {}", self.supg_alpha)));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepDiagnostics {
    pub mass: f64,
    pub min: f64,
    pub max: f64,
    pub solver: SolveReport,
    pub projected_fraction: f64,
    /// Set by the centered scheme when `dt` exceeds its stability guideline.
    pub cfl_warning: bool,
}

impl StepDiagnostics {
    fn new(u: &FieldP1, solver: SolveReport, projected_fraction: f64) -> Self {
        Self {
            mass: u.integral(),
            min: u.min_coeff(),
            max: u.max_coeff(),
            solver,
            projected_fraction,
            cfl_warning: false,
        }
    }

    pub const CSV_HEADER: &'static str = "step,mass,min,max,solver_iters,projected_fraction";

    pub fn write_csv_row<W: Write>(&self, step: usize, mut w: W) -> Result<()> {
        writeln!(
            w,
            "{step},{:?},{:?},{:?},{},{:?}",
            self.mass, self.min, self.max, self.solver.iterations, self.projected_fraction
        )?;
        Ok(())
    }
}

/// A scheme advancing a field by one time step.
pub trait Stepper {
    fn step(&self, u_prev: &FieldP1) -> Result<(FieldP1, StepDiagnostics)>;
    fn name(&self) -> &'static str;
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SchemeKind {
    Dcgm,
    Pcgm,
    Supg,
    Centered,
}

impl SchemeKind {
    pub const ALL: [SchemeKind; 4] = [SchemeKind::Pcgm, SchemeKind::Dcgm, SchemeKind::Supg, SchemeKind::Centered];

    pub fn name(self) -> &'static str {
        match self {
            SchemeKind::Dcgm => "DCGM",
            SchemeKind::Pcgm => "PCGM",
            SchemeKind::Supg => "SUPG",
            SchemeKind::Centered => "Centered",
        }
    }

    /// Builds the stepper for a time-independent velocity field.
    pub fn prepare<F: VelocityField + ?Sized>(
        self,
        mesh: &Arc<Mesh>,
        field: &F,
        config: &SchemeConfig,
    ) -> Result<Box<dyn Stepper + Send + Sync>> {
        Ok(match self {
            SchemeKind::Dcgm => Box::new(DcgmOperator::prepare(mesh.clone(), field, config)?),
            SchemeKind::Pcgm => Box::new(PcgmOperator::prepare(mesh.clone(), field, config)?),
            SchemeKind::Supg => Box::new(SupgOperator::prepare(mesh.clone(), field, config, config.supg_alpha)?),
            SchemeKind::Centered => Box::new(SupgOperator::centered(mesh.clone(), field, config)?),
        })
    }
}

impl FromStr for SchemeKind {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "dcgm" => Ok(SchemeKind::Dcgm),
            "pcgm" => Ok(SchemeKind::Pcgm),
            "supg" => Ok(SchemeKind::Supg),
            "centered" | "centred" => Ok(SchemeKind::Centered),
            _ => Err(format!("unknown scheme `{s}` (expected dcgm, pcgm, supg or centered)")),
        }
    }
}

impl std::fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

fn check_mesh(op_mesh: &Arc<Mesh>, u: &FieldP1) -> Result<()> {
    if Arc::ptr_eq(op_mesh, u.mesh()) || **op_mesh == **u.mesh() {
        Ok(())
    } else {
        Err(invalid("field lives on a different mesh than the operator"))
    }
}

fn solve_spd(matrix: &SparseMatrix, rhs: &[f64], guess: &[f64], opts: &SolverOptions) -> Result<(Vec<f64>, SolveReport)> {
    let (x, report) = cg_solve(matrix, rhs, Some(guess), opts);
    if report.converged {
        Ok((x, report))
    } else {
        Err(Error::SolverDiverged(report))
    }
}

/// `M + nu dt K`.
pub fn diffusion_matrix(mesh: &Mesh, nu_dt: f64) -> SparseMatrix {
    assemble_mass(mesh).linear_combination(1.0, &assemble_stiffness(mesh), nu_dt)
}

/// Dual characteristic-Galerkin operator: the SPD matrix and the traced
/// quadrature nodes, both reused across steps.
#[derive(Clone, Debug)]
pub struct DcgmOperator {
    mesh: Arc<Mesh>,
    matrix: SparseMatrix,
    traced: TracedPoints,
    solver: SolverOptions,
}

impl DcgmOperator {
    pub fn prepare<F: VelocityField + ?Sized>(mesh: Arc<Mesh>, field: &F, config: &SchemeConfig) -> Result<Self> {
        config.validate()?;
        let matrix = diffusion_matrix(&mesh, config.nu * config.dt);
        let traced = build_traced_points(
            &mesh,
            field,
            &config.quadrature.rule(),
            config.dt,
            config.order,
            Direction::Forward,
        );
        Ok(Self { mesh, matrix, traced, solver: config.solver })
    }

    /// Operator with a caller-supplied left-hand side, e.g. `M + dt K_D`
    /// for a variable diffusion tensor.
    pub fn from_parts(mesh: Arc<Mesh>, matrix: SparseMatrix, traced: TracedPoints, solver: SolverOptions) -> Result<Self> {
        if matrix.dim() != mesh.vertex_count() {
            return Err(invalid("matrix dimension does not match the mesh"));
        }
        if traced.direction != Direction::Forward {
            return Err(invalid("DCGM needs forward-traced nodes"));
        }
        Ok(Self { mesh, matrix, traced, solver })
    }

    pub fn matrix(&self) -> &SparseMatrix {
        &self.matrix
    }

    pub fn traced(&self) -> &TracedPoints {
        &self.traced
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    /// `rhs_j = sum_i w_i u_prev(xi_i) lambda_j(eta_i)`.
    pub fn rhs(&self, u_prev: &FieldP1) -> Vec<f64> {
        let mut rhs = vec![0.0; self.mesh.vertex_count()];
        for node in &self.traced.nodes {
            let value = u_prev.evaluate(&node.source) * node.weight;
            let tri = self.mesh.triangle(node.target.triangle);
            for k in 0..3 {
                rhs[tri[k]] += value * node.target.barycentric[k];
            }
        }
        rhs
    }

    pub fn step(&self, u_prev: &FieldP1) -> Result<(FieldP1, StepDiagnostics)> {
        check_mesh(&self.mesh, u_prev)?;
        let rhs = self.rhs(u_prev);
        let (x, report) = solve_spd(&self.matrix, &rhs, u_prev.values(), &self.solver)?;
        let u = FieldP1::new(self.mesh.clone(), x);
        let diag = StepDiagnostics::new(&u, report, self.traced.projected_fraction());
        Ok((u, diag))
    }
}

impl Stepper for DcgmOperator {
    fn step(&self, u_prev: &FieldP1) -> Result<(FieldP1, StepDiagnostics)> {
        DcgmOperator::step(self, u_prev)
    }

    fn name(&self) -> &'static str {
        "DCGM"
    }
}

/// Primal characteristic-Galerkin operator.
#[derive(Clone, Debug)]
pub struct PcgmOperator {
    mesh: Arc<Mesh>,
    matrix: SparseMatrix,
    traced: TracedPoints,
    solver: SolverOptions,
}

impl PcgmOperator {
    pub fn prepare<F: VelocityField + ?Sized>(mesh: Arc<Mesh>, field: &F, config: &SchemeConfig) -> Result<Self> {
        config.validate()?;
        let matrix = diffusion_matrix(&mesh, config.nu * config.dt);
        let traced = build_traced_points(
            &mesh,
            field,
            &config.quadrature.rule(),
            config.dt,
            config.order,
            Direction::Backward,
        );
        Ok(Self { mesh, matrix, traced, solver: config.solver })
    }

    /// `rhs_j = sum_i w_i u_prev(eta^-(xi_i)) phi_j(xi_i)`.
    pub fn rhs(&self, u_prev: &FieldP1) -> Vec<f64> {
        let mut rhs = vec![0.0; self.mesh.vertex_count()];
        for node in &self.traced.nodes {
            let value = u_prev.evaluate(&node.target) * node.weight;
            let tri = self.mesh.triangle(node.source.triangle);
            for k in 0..3 {
                rhs[tri[k]] += value * node.source.barycentric[k];
            }
        }
        rhs
    }

    pub fn step(&self, u_prev: &FieldP1) -> Result<(FieldP1, StepDiagnostics)> {
        check_mesh(&self.mesh, u_prev)?;
        let rhs = self.rhs(u_prev);
        let (x, report) = solve_spd(&self.matrix, &rhs, u_prev.values(), &self.solver)?;
        let u = FieldP1::new(self.mesh.clone(), x);
        let diag = StepDiagnostics::new(&u, report, self.traced.projected_fraction());
        Ok((u, diag))
    }
}

impl Stepper for PcgmOperator {
    fn step(&self, u_prev: &FieldP1) -> Result<(FieldP1, StepDiagnostics)> {
        PcgmOperator::step(self, u_prev)
    }

    fn name(&self) -> &'static str {
        "PCGM"
    }
}

/// Implicit Euler Galerkin scheme with streamline-upwind test functions:
///
/// `int (u/dt + a.grad u)(w + alpha a.grad w) + nu grad u . grad w
///  = int (u_prev/dt)(w + alpha a.grad w)`,
///
/// every term integrated with the mid-edge rule (exact here for P1
/// products and affine velocities).
#[derive(Clone, Debug)]
pub struct SupgOperator {
    mesh: Arc<Mesh>,
    lhs: SparseMatrix,
    rhs_matrix: SparseMatrix,
    solver: SolverOptions,
    alpha: f64,
    cfl_warning: bool,
}

impl SupgOperator {
    pub fn prepare<F: VelocityField + ?Sized>(mesh: Arc<Mesh>, field: &F, config: &SchemeConfig, alpha: f64) -> Result<Self> {
        config.validate()?;
        if !alpha.is_finite() || alpha < 0.0 {
            return Err(invalid(format!("SUPG parameter must be non-negative, got {alpha}")));
        }
        let rule = midedge_rule();
        let (dt, nu) = (config.dt, config.nu);
        let blocks = |t: usize, with_transport: bool| {
            let pts = mesh.triangle_points(t);
            let area = mesh.area(t);
            let g = mesh.barycentric_gradients(t);
            let mut block = [[0.0; 3]; 3];
            for (b, w) in rule.iter() {
                let a = field.value(&map_point(&pts, b));
                let ag: [f64; 3] = std::array::from_fn(|k| a.dot(&g[k]));
                for i in 0..3 {
                    let test = b[i] + alpha * ag[i];
                    for j in 0..3 {
                        let trial = if with_transport { b[j] / dt + ag[j] } else { b[j] / dt };
                        block[i][j] += w * area * trial * test;
                    }
                }
            }
            if with_transport {
                for i in 0..3 {
                    for j in 0..3 {
                        block[i][j] += nu * area * g[i].dot(&g[j]);
                    }
                }
            }
            block
        };
        let lhs = assemble(&mesh, |t| blocks(t, true));
        let rhs_matrix = assemble(&mesh, |t| blocks(t, false));
        let h = mesh.h_max();
        // stability guideline dt <= c(nu) h^2 with c(nu) = 1 / (2 nu)
        let cfl_warning = alpha == 0.0 && !field.is_zero() && dt > h * h / (2.0 * nu);
        Ok(Self { mesh, lhs, rhs_matrix, solver: config.solver, alpha, cfl_warning })
    }

    /// The scheme without upwinding (`alpha = 0`).
    pub fn centered<F: VelocityField + ?Sized>(mesh: Arc<Mesh>, field: &F, config: &SchemeConfig) -> Result<Self> {
        Self::prepare(mesh, field, config, 0.0)
    }

    pub fn lhs(&self) -> &SparseMatrix {
        &self.lhs
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn cfl_warning(&self) -> bool {
        self.cfl_warning
    }

    pub fn step(&self, u_prev: &FieldP1) -> Result<(FieldP1, StepDiagnostics)> {
        check_mesh(&self.mesh, u_prev)?;
        let rhs = self.rhs_matrix.mul_vec(u_prev.values());
        let (x, report) = bicgstab_solve(&self.lhs, &rhs, Some(u_prev.values()), &self.solver);
        if !report.converged {
            return Err(Error::SolverDiverged(report));
        }
        let u = FieldP1::new(self.mesh.clone(), x);
        let mut diag = StepDiagnostics::new(&u, report, 0.0);
        diag.cfl_warning = self.cfl_warning;
        Ok((u, diag))
    }
}

impl Stepper for SupgOperator {
    fn step(&self, u_prev: &FieldP1) -> Result<(FieldP1, StepDiagnostics)> {
        SupgOperator::step(self, u_prev)
    }

    fn name(&self) -> &'static str {
        if self.alpha == 0.0 {
            "Centered"
        } else {
            "SUPG"
        }
    }
}

/// One DCGM step built from scratch (no caching).
pub fn dcgm_step<F: VelocityField + ?Sized>(
    mesh: &Arc<Mesh>,
    field: &F,
    config: &SchemeConfig,
    u_prev: &FieldP1,
) -> Result<(FieldP1, StepDiagnostics)> {
    DcgmOperator::prepare(mesh.clone(), field, config)?.step(u_prev)
}

/// One PCGM step built from scratch.
pub fn pcgm_step<F: VelocityField + ?Sized>(
    mesh: &Arc<Mesh>,
    field: &F,
    config: &SchemeConfig,
    u_prev: &FieldP1,
) -> Result<(FieldP1, StepDiagnostics)> {
    PcgmOperator::prepare(mesh.clone(), field, config)?.step(u_prev)
}

/// One SUPG step with `config.supg_alpha`.
pub fn supg_step<F: VelocityField + ?Sized>(
    mesh: &Arc<Mesh>,
    field: &F,
    config: &SchemeConfig,
    u_prev: &FieldP1,
) -> Result<(FieldP1, StepDiagnostics)> {
    SupgOperator::prepare(mesh.clone(), field, config, config.supg_alpha)?.step(u_prev)
}

/// One centered (no upwinding) step.
pub fn centered_step<F: VelocityField + ?Sized>(
    mesh: &Arc<Mesh>,
    field: &F,
    config: &SchemeConfig,
    u_prev: &FieldP1,
) -> Result<(FieldP1, StepDiagnostics)> {
    SupgOperator::centered(mesh.clone(), field, config)?.step(u_prev)
}

/// Experimental DCGM variant with Dirichlet data on the whole boundary.
///
/// Left-hand side `M + nu dt K - dt int_Gamma (a.n) u w` (two-point Gauss
/// per boundary edge, switchable), boundary values imposed strongly.
/// Since every P1 test function vanishing on the boundary also vanishes
/// on each boundary edge, the boundary integral only touches constrained
/// rows and columns; with or without it the computed solution agrees to
/// solver tolerance.
#[derive(Clone, Debug)]
pub struct DcgmDirichletOperator {
    inner: DcgmOperator,
    constrained: SparseMatrix,
    full: SparseMatrix,
    boundary: Vec<usize>,
    is_boundary: Vec<bool>,
}

impl DcgmDirichletOperator {
    pub fn prepare<F: VelocityField + ?Sized>(
        mesh: Arc<Mesh>,
        field: &F,
        config: &SchemeConfig,
        boundary_integral: bool,
    ) -> Result<Self> {
        let inner = DcgmOperator::prepare(mesh.clone(), field, config)?;
        let full = if boundary_integral {
            let term = boundary_flux_matrix(&mesh, field);
            inner.matrix.linear_combination(1.0, &term, -config.dt)
        } else {
            inner.matrix.clone()
        };
        let boundary = mesh.boundary_vertices();
        let mut is_boundary = vec![false; mesh.vertex_count()];
        for &b in &boundary {
            is_boundary[b] = true;
        }
        let n = mesh.vertex_count();
        let triplets: Vec<_> = (0..n)
            .flat_map(|i| full.row(i).map(move |(j, v)| (i, j, v)))
            .filter(|&(i, j, _)| !is_boundary[i] && !is_boundary[j])
            .chain(boundary.iter().map(|&b| (b, b, 1.0)))
            .collect();
        let constrained = SparseMatrix::from_triplets(n, triplets)?;
        Ok(Self { inner, constrained, full, boundary, is_boundary })
    }

    pub fn boundary_vertices(&self) -> &[usize] {
        &self.boundary
    }

    /// `u_gamma` gives one value per entry of [`Self::boundary_vertices`].
    pub fn step(&self, u_prev: &FieldP1, u_gamma: &[f64]) -> Result<(FieldP1, StepDiagnostics)> {
        check_mesh(&self.inner.mesh, u_prev)?;
        if u_gamma.len() != self.boundary.len() {
            return Err(invalid(format!(
                "expected {} boundary values, got {}",
                self.boundary.len(),
                u_gamma.len()
            )));
        }
        let n = self.inner.mesh.vertex_count();
        let mut lift = vec![0.0; n];
        for (&b, &g) in self.boundary.iter().zip(u_gamma) {
            lift[b] = g;
        }
        let full_lift = self.full.mul_vec(&lift);
        let mut rhs = self.inner.rhs(u_prev);
        for i in 0..n {
            rhs[i] = if self.is_boundary[i] { lift[i] } else { rhs[i] - full_lift[i] };
        }
        let mut guess = u_prev.values().to_vec();
        for &b in &self.boundary {
            guess[b] = lift[b];
        }
        let (x, report) = solve_spd(&self.constrained, &rhs, &guess, &self.inner.solver)?;
        let u = FieldP1::new(self.inner.mesh.clone(), x);
        let diag = StepDiagnostics::new(&u, report, self.inner.traced.projected_fraction());
        Ok((u, diag))
    }
}

/// `B_ij = int_Gamma (a . n) phi_i phi_j`, two-point Gauss per edge.
pub fn boundary_flux_matrix<F: VelocityField + ?Sized>(mesh: &Mesh, field: &F) -> SparseMatrix {
    let g = 0.5 / 3f64.sqrt();
    let nodes = [0.5 - g, 0.5 + g];
    let mut triplets = Vec::with_capacity(4 * mesh.boundary_edges().len());
    for e in mesh.boundary_edges() {
        let [v0, v1] = e.vertices;
        let (p, q) = (mesh.vertex(v0), mesh.vertex(v1));
        let d = q - p;
        let len = d.norm();
        // domain on the left, so the outward normal points right
        let normal = nalgebra::Vector2::new(d.y, -d.x) / len;
        for s in nodes {
            let x = p + d * s;
            let an = field.value(&x).dot(&normal);
            let phi = [1.0 - s, s];
            let w = 0.5 * len;
            for (i, vi) in [v0, v1].into_iter().enumerate() {
                for (j, vj) in [v0, v1].into_iter().enumerate() {
                    triplets.push((vi, vj, w * an * phi[i] * phi[j]));
                }
            }
        }
    }
    SparseMatrix::from_triplets(mesh.vertex_count(), triplets).expect("mesh indices are in range")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::characteristics::{rotation_field, Uniform, Zero};
    use crate::mesh::{build_disk_mesh, build_rect_mesh};
    use nalgebra::Vector2;

    fn disk(n: usize) -> Arc<Mesh> {
        Arc::new(build_disk_mesh(n).unwrap())
    }

    fn bell(mesh: &Arc<Mesh>) -> FieldP1 {
        FieldP1::interpolate(mesh.clone(), |p| (-10.0 * ((p.x - 0.35).powi(2) + p.y * p.y)).exp())
    }

    #[test]
    fn nonpositive_nu_rejected() {
        assert!(SchemeConfig::new(0.0, 0.1).is_err());
        assert!(SchemeConfig::new(1e-3, 0.0).is_err());
        let mut cfg = SchemeConfig::new(1e-3, 0.1).unwrap();
        cfg.nu = -1.0;
        assert!(DcgmOperator::prepare(disk(20), &Zero, &cfg).is_err());
    }

    #[test]
    fn dcgm_matrix_with_unit_parameters_is_mass_plus_stiffness() {
        let mesh = disk(20);
        let cfg = SchemeConfig::new(1.0, 1.0).unwrap();
        let op = DcgmOperator::prepare(mesh.clone(), &Zero, &cfg).unwrap();
        let m = assemble_mass(&mesh);
        let k = assemble_stiffness(&mesh);
        let x: Vec<f64> = (0..mesh.vertex_count()).map(|i| (i as f64).cos()).collect();
        let lhs = op.matrix().mul_vec(&x);
        let mx = m.mul_vec(&x);
        let kx = k.mul_vec(&x);
        for i in 0..x.len() {
            assert!((lhs[i] - mx[i] - kx[i]).abs() < 1e-14);
        }
    }

    #[test]
    fn constants_are_fixed_points_of_nonconservative_schemes() {
        let mesh = disk(40);
        let cfg = SchemeConfig::new(1e-2, 2.0 * std::f64::consts::PI / 40.0).unwrap();
        let c = FieldP1::constant(mesh.clone(), 0.7);
        for kind in [SchemeKind::Pcgm, SchemeKind::Supg, SchemeKind::Centered] {
            let op = kind.prepare(&mesh, &rotation_field(), &cfg).unwrap();
            let (u, _) = op.step(&c).unwrap();
            for v in u.values() {
                assert!((v - 0.7).abs() < 1e-10, "{kind}: {v}");
            }
        }
    }

    #[test]
    fn dcgm_moves_constants_but_keeps_their_mass() {
        let mesh = disk(40);
        let cfg = SchemeConfig::new(1e-2, 2.0 * std::f64::consts::PI / 40.0).unwrap();
        let c = FieldP1::constant(mesh.clone(), 0.7);
        let (u, _) = dcgm_step(&mesh, &rotation_field(), &cfg, &c).unwrap();
        assert!((u.integral() - c.integral()).abs() < 1e-12);
        assert!(u.values().iter().all(|v| (v - 0.7).abs() < 0.05));
    }

    #[test]
    fn zero_velocity_keeps_constants() {
        let mesh = disk(30);
        let cfg = SchemeConfig::new(0.1, 0.05).unwrap();
        let c = FieldP1::constant(mesh.clone(), 2.0);
        let (u, _) = dcgm_step(&mesh, &Zero, &cfg, &c).unwrap();
        assert!(u.values().iter().all(|v| (v - 2.0).abs() < 1e-12));
        let (u, _) = pcgm_step(&mesh, &Zero, &cfg, &c).unwrap();
        assert!(u.values().iter().all(|v| (v - 2.0).abs() < 1e-12));
    }

    #[test]
    fn dcgm_single_step_conserves_mass() {
        let mesh = disk(100);
        let cfg = SchemeConfig::new(1e-4, 2.0 * std::f64::consts::PI / 33.0).unwrap();
        let u0 = bell(&mesh);
        let op = DcgmOperator::prepare(mesh.clone(), &rotation_field(), &cfg).unwrap();
        let rhs = op.rhs(&u0);
        let expected: f64 = op.traced().nodes.iter().map(|n| n.weight * u0.evaluate(&n.source)).sum();
        assert!((rhs.iter().sum::<f64>() - expected).abs() <= 1e-12 * expected);
        assert!((expected - u0.integral()).abs() <= 1e-12 * expected);
        let (u1, diag) = op.step(&u0).unwrap();
        assert!((u1.integral() - u0.integral()).abs() <= 1e-12 * u0.integral());
        assert_eq!(diag.mass, u1.integral());
    }

    #[test]
    fn supg_without_velocity_equals_centered() {
        let mesh = disk(30);
        let cfg = SchemeConfig::new(0.05, 0.1).unwrap();
        let u0 = bell(&mesh);
        let (a, _) = supg_step(&mesh, &Zero, &cfg.with_supg_alpha(0.7), &u0).unwrap();
        let (b, _) = centered_step(&mesh, &Zero, &cfg, &u0).unwrap();
        assert_eq!(a.values(), b.values());
        // ... and both are an implicit diffusion step
        let m = assemble_mass(&mesh);
        let lhs = diffusion_matrix(&mesh, cfg.nu * cfg.dt);
        let r = lhs.mul_vec(a.values());
        let mb = m.mul_vec(u0.values());
        for i in 0..r.len() {
            assert!((r[i] - mb[i]).abs() < 1e-10 * mb.iter().fold(0.0f64, |x, y| x.max(y.abs())));
        }
    }

    #[test]
    fn centered_flags_large_steps() {
        let mesh = disk(100);
        let cfg = SchemeConfig::new(0.1, 2.0 * std::f64::consts::PI / 33.0).unwrap();
        let op = SupgOperator::centered(mesh.clone(), &rotation_field(), &cfg).unwrap();
        assert!(op.cfl_warning());
        let small = SchemeConfig::new(0.1, 2.0 * std::f64::consts::PI / 3300.0).unwrap();
        let op = SupgOperator::centered(mesh, &rotation_field(), &small).unwrap();
        assert!(!op.cfl_warning());
    }

    #[test]
    fn pcgm_translates_interior_bump() {
        let mesh = Arc::new(build_rect_mesh(41, 41, 1.0, 1.0).unwrap());
        let h = mesh.h_max();
        let dt = 0.1;
        let cfg = SchemeConfig::new(1e-8, dt).unwrap();
        let shift = Vector2::new(0.1, 0.0);
        let f = |c: f64| move |p: nalgebra::Point2<f64>| (-60.0 * ((p.x - c).powi(2) + (p.y - 0.5).powi(2))).exp();
        let u0 = FieldP1::interpolate(mesh.clone(), f(0.4));
        let (u1, _) = pcgm_step(&mesh, &Uniform(shift / dt), &cfg, &u0).unwrap();
        let translated = FieldP1::interpolate(mesh.clone(), f(0.5));
        let diff: Vec<f64> = u1.values().iter().zip(translated.values()).map(|(a, b)| a - b).collect();
        let err = FieldP1::new(mesh.clone(), diff).l2_norm();
        assert!(err <= h, "error {err} vs h {h}");
    }

    #[test]
    fn dirichlet_variant_with_unit_data() {
        let mesh = disk(30);
        let cfg = SchemeConfig::new(0.01, 0.1).unwrap();
        for with_integral in [true, false] {
            let op = DcgmDirichletOperator::prepare(mesh.clone(), &Zero, &cfg, with_integral).unwrap();
            let ones = FieldP1::constant(mesh.clone(), 1.0);
            let g = vec![1.0; op.boundary_vertices().len()];
            let (u, _) = op.step(&ones, &g).unwrap();
            assert!(u.values().iter().all(|v| (v - 1.0).abs() < 1e-11));
        }
    }

    #[test]
    fn dirichlet_zero_data_does_not_create_mass() {
        let mesh = disk(60);
        let cfg = SchemeConfig::new(0.01, 2.0 * std::f64::consts::PI / 40.0).unwrap();
        let op = DcgmDirichletOperator::prepare(mesh.clone(), &rotation_field(), &cfg, true).unwrap();
        let g = vec![0.0; op.boundary_vertices().len()];
        let mut u = FieldP1::interpolate(mesh.clone(), |p| (-10.0 * ((p.x - 0.5).powi(2) + p.y * p.y)).exp());
        let mut mass = u.integral();
        for _ in 0..10 {
            let (next, _) = op.step(&u, &g).unwrap();
            assert!(next.integral() <= mass + 1e-12);
            mass = next.integral();
            u = next;
        }
    }

    #[test]
    fn dirichlet_boundary_integral_only_touches_constrained_rows() {
        let mesh = disk(40);
        let cfg = SchemeConfig::new(0.01, 0.1).unwrap();
        let field = Uniform(Vector2::new(0.5, 0.2));
        let a = DcgmDirichletOperator::prepare(mesh.clone(), &field, &cfg, true).unwrap();
        let b = DcgmDirichletOperator::prepare(mesh.clone(), &field, &cfg, false).unwrap();
        let u0 = bell(&mesh);
        let g: Vec<f64> = a.boundary_vertices().iter().map(|&v| mesh.vertex(v).x.max(0.0)).collect();
        let (ua, _) = a.step(&u0, &g).unwrap();
        let (ub, _) = b.step(&u0, &g).unwrap();
        for (x, y) in ua.values().iter().zip(ub.values()) {
            assert!((x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn boundary_flux_of_uniform_field_integrates_to_zero() {
        // closed boundary: int (a.n) = int div a = 0
        let mesh = build_rect_mesh(5, 4, 2.0, 1.0).unwrap();
        let b = boundary_flux_matrix(&mesh, &Uniform(Vector2::new(1.0, 2.0)));
        let ones = vec![1.0; mesh.vertex_count()];
        assert!(b.quadratic_form(&ones, &ones).abs() < 1e-14);
        // outflow through the right side (x = 2): length 1, a.n = 1
        let right: Vec<f64> = mesh.vertices().iter().map(|p| if p.x > 1.999 { 1.0 } else { 0.0 }).collect();
        assert!((b.quadratic_form(&right, &right) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn reusing_operator_matches_rebuilding() {
        let mesh = disk(40);
        let cfg = SchemeConfig::new(1e-4, 0.2).unwrap();
        let a = DcgmOperator::prepare(mesh.clone(), &rotation_field(), &cfg).unwrap();
        let b = DcgmOperator::prepare(mesh.clone(), &rotation_field(), &cfg).unwrap();
        assert_eq!(a.matrix(), b.matrix());
        assert_eq!(a.traced(), b.traced());
    }

    #[test]
    fn diagnostics_csv_row() {
        let d = StepDiagnostics {
            mass: 0.5,
            min: -1e-9,
            max: 1.0,
            solver: SolveReport { iterations: 7, relative_residual: 1e-13, converged: true },
            projected_fraction: 0.25,
            cfl_warning: false,
        };
        let mut out = Vec::new();
        d.write_csv_row(3, &mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "3,0.5,-1e-9,1.0,7,0.25\n");
    }
}
