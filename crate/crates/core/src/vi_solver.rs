//! Uzawa iteration for the discrete friction problem.
//!
//! The multiplier lives at the Gauss points of the Γ2 faces. Each step
//! solves the LDG system with the current multiplier on the right-hand side
//! and projects `λ + ρ g u` back onto `[−1, 1]` pointwise.

use crate::assembly::{assemble, AssembledSystem, LdgConfig};
use crate::dg_space::quadrature::EDGE_POINTS_PER_FACE;
use crate::dg_space::BrokenField;
use crate::error::{Error, Result};
use crate::linalg::{dot, norm2, quadratic_form, spmv, SpdFactor};
use crate::mesh::{Mesh, Point};

/// Friction multiplier: values at the Gauss points of the Γ2 faces, in the
/// order of `mesh.friction_faces()`, three per face.
#[derive(Debug, Clone, PartialEq)]
pub struct Multiplier {
    pub values: Vec<f64>,
    pub g: f64,
}

impl Multiplier {
    pub fn zeros(mesh: &Mesh, g: f64) -> Self {
        Self {
            values: vec![0.0; EDGE_POINTS_PER_FACE * mesh.friction_faces().len()],
            g,
        }
    }

    /// Samples `f` at the Γ2 Gauss points.
    pub fn sample(mesh: &Mesh, g: f64, f: impl Fn(Point) -> f64) -> Self {
        let values = mesh
            .friction_faces()
            .iter()
            .flat_map(|&e| mesh.face(e).quad.map(|q| f(q.x)))
            .collect();
        Self { values, g }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn face_values(&self, i: usize) -> &[f64] {
        &self.values[EDGE_POINTS_PER_FACE * i..EDGE_POINTS_PER_FACE * (i + 1)]
    }

    /// `‖λ‖_{L²(Γ2)}` by the face quadrature.
    pub fn l2_norm(&self, mesh: &Mesh) -> f64 {
        weighted_norm(&self.values, &gauss_weights(mesh))
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

fn gauss_weights(mesh: &Mesh) -> Vec<f64> {
    mesh.friction_faces()
        .iter()
        .flat_map(|&e| mesh.face(e).quad.map(|q| q.weight))
        .collect()
}

fn weighted_norm(v: &[f64], w: &[f64]) -> f64 {
    v.iter().zip(w).map(|(x, w)| w * x * x).sum::<f64>().sqrt()
}

#[derive(Debug, Clone)]
pub struct UzawaConfig {
    /// Step length; `None` selects `1 / (g² σ_max)` with `σ_max` the largest
    /// eigenvalue of `T A⁻¹ Tᵀ W`.
    pub rho: Option<f64>,
    pub tol: f64,
    pub tol_lin: f64,
    pub tol_c: f64,
    pub max_iter: usize,
    /// Starting multiplier (defaults to zero).
    pub initial: Option<Vec<f64>>,
}

impl Default for UzawaConfig {
    fn default() -> Self {
        Self {
            rho: None,
            tol: 1e-8,
            tol_lin: 1e-10,
            tol_c: 1e-7,
            max_iter: 10_000,
            initial: None,
        }
    }
}

impl UzawaConfig {
    pub fn validate(&self) -> Result<()> {
        let pos = |v: f64| v > 0.0 && v.is_finite();
        if let Some(r) = self.rho {
            if !pos(r) {
                return Err(Error::Config(format!("rho must be positive, got {r}")));
            }
        }
        if !pos(self.tol) || !pos(self.tol_lin) || !pos(self.tol_c) {
            return Err(Error::Config("tolerances must be positive".into()));
        }
        if self.max_iter == 0 {
            return Err(Error::Config("max_iter must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct VsolveReport {
    pub iterations: usize,
    /// `‖λ^{k+1} − λ^k‖_{L²(Γ2)}` at the last iteration.
    pub multiplier_increment: f64,
    /// `‖u^k − u^{k−1}‖_{1,h}` at the last iteration.
    pub primal_increment: f64,
    pub complementarity: f64,
    /// Relative residual of every inner solve.
    pub inner_residuals: Vec<f64>,
    /// `‖A u + G λ − F‖ / max(‖F‖, 1)` of the returned pair.
    pub kkt_residual: f64,
    pub rho: f64,
    /// Discrete energy `½ Au·u − F·u + ∫_{Γ2} g|u|` of every iterate.
    pub energy: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct ContactSolution {
    pub u: BrokenField,
    pub lambda: Multiplier,
    pub report: VsolveReport,
}

/// `max_q max(|λ|−1, 0) + |λ u − |u||` over the quadrature points, for trace values `u`.
pub fn complementarity_from_trace(trace: &[f64], lambda: &[f64]) -> f64 {
    trace
        .iter()
        .zip(lambda)
        .map(|(&u, &l)| (l.abs() - 1.0).max(0.0) + (l * u - u.abs()).abs())
        .fold(0.0, f64::max)
}

/// Pointwise complementarity residual of `(u_h, λ_h)` at the Γ2 Gauss points.
pub fn complementarity_residual(mesh: &Mesh, u: &BrokenField, lambda: &Multiplier) -> f64 {
    let trace: Vec<f64> = mesh
        .friction_faces()
        .iter()
        .flat_map(|&e| u.trace(mesh.face(e)))
        .collect();
    complementarity_from_trace(&trace, &lambda.values)
}

/// Discrete energy `½ Au·u − F·u + Σ_q g w_q |u(x_q)|`.
pub fn discrete_energy(system: &AssembledSystem, u: &[f64]) -> f64 {
    let tr = spmv(&system.trace, u);
    let j: f64 = tr.iter().zip(&system.weights).map(|(t, w)| w * t.abs()).sum();
    0.5 * quadratic_form(&system.stiffness, u) - dot(&system.load, u) + system.g * j
}

/// Largest eigenvalue of `T A⁻¹ Tᵀ W` by power iteration in the `W` inner product.
fn trace_operator_norm(system: &AssembledSystem, factor: &SpdFactor, tol_lin: f64) -> Result<f64> {
    let n = system.num_multiplier_points();
    if n == 0 {
        return Ok(1.0);
    }
    let w = &system.weights;
    let mut x: Vec<f64> = (0..n).map(|i| 1.0 + 0.1 * ((i * 7919) % 13) as f64).collect();
    let mut sigma = 0.0;
    for _ in 0..30 {
        let nx = weighted_norm(&x, w);
        x.iter_mut().for_each(|v| *v /= nx);
        let wx: Vec<f64> = x.iter().zip(w).map(|(a, b)| a * b).collect();
        let rhs = crate::linalg::spmv_transpose(&system.trace, &wx);
        let (y, _) = factor.solve(&rhs, tol_lin)?;
        let hx = spmv(&system.trace, &y);
        let next: f64 = hx.iter().zip(&wx).map(|(a, b)| a * b).sum();
        x = hx;
        if (next - sigma).abs() <= 1e-3 * next {
            sigma = next;
            break;
        }
        sigma = next;
    }
    Ok(sigma.max(f64::MIN_POSITIVE))
}

/// Uzawa iteration from `λ⁰` (zero unless configured otherwise).
///
/// Stops once the multiplier increment and the primal increment are below
/// `tol` and the pointwise complementarity residual is below `tol_c`.
pub fn uzawa_solve(system: &AssembledSystem, config: &UzawaConfig) -> Result<ContactSolution> {
    config.validate()?;
    let factor = SpdFactor::new(&system.stiffness)?;
    uzawa_solve_with(system, &factor, config)
}

/// Same as [`uzawa_solve`] with an existing factorization of the stiffness matrix.
pub fn uzawa_solve_with(
    system: &AssembledSystem,
    factor: &SpdFactor,
    config: &UzawaConfig,
) -> Result<ContactSolution> {
    config.validate()?;
    let g = system.g;
    let np = system.num_multiplier_points();
    let rho = match config.rho {
        Some(r) => r,
        None => 1.0 / (g * g * trace_operator_norm(system, factor, config.tol_lin)?),
    };
    let mut lambda = match &config.initial {
        Some(l) => {
            if l.len() != np {
                return Err(Error::Config(format!("initial multiplier has {} values, expected {np}", l.len())));
            }
            l.iter().map(|v| v.clamp(-1.0, 1.0)).collect()
        }
        None => vec![0.0; np],
    };
    let f_norm = norm2(&system.load).max(1.0);
    let mut u_prev = vec![0.0; system.ndof()];
    let mut report = VsolveReport {
        iterations: 0,
        multiplier_increment: f64::INFINITY,
        primal_increment: f64::INFINITY,
        complementarity: f64::INFINITY,
        inner_residuals: Vec::new(),
        kkt_residual: f64::INFINITY,
        rho,
        energy: Vec::new(),
    };

    for it in 1..=config.max_iter {
        let coupling = system.boundary_vector(&lambda);
        let rhs: Vec<f64> = system.load.iter().zip(&coupling).map(|(f, c)| f - c).collect();
        let (u, rel) = factor.solve(&rhs, config.tol_lin)?;
        report.inner_residuals.push(rel);
        report.energy.push(discrete_energy(system, &u));

        let tr = spmv(&system.trace, &u);
        let next: Vec<f64> = lambda
            .iter()
            .zip(&tr)
            .map(|(l, t)| (l + rho * g * t).clamp(-1.0, 1.0))
            .collect();
        let dl: Vec<f64> = next.iter().zip(&lambda).map(|(a, b)| a - b).collect();
        let du: Vec<f64> = u.iter().zip(&u_prev).map(|(a, b)| a - b).collect();
        report.iterations = it;
        report.multiplier_increment = weighted_norm(&dl, &system.weights);
        report.primal_increment = quadratic_form(&system.energy_matrix, &du).max(0.0).sqrt();
        report.complementarity = complementarity_from_trace(&tr, &lambda);

        if report.multiplier_increment <= config.tol
            && report.primal_increment <= config.tol
            && report.complementarity <= config.tol_c
        {
            let au = spmv(&system.stiffness, &u);
            let res: Vec<f64> = au
                .iter()
                .zip(&coupling)
                .zip(&system.load)
                .map(|((a, c), f)| a + c - f)
                .collect();
            report.kkt_residual = norm2(&res) / f_norm;
            return Ok(ContactSolution {
                u: BrokenField { coeffs: u },
                lambda: Multiplier { values: lambda, g },
                report,
            });
        }
        lambda = next;
        u_prev = u;
    }
    Err(Error::NonConvergence(Box::new(report)))
}

/// Assembles and solves the friction problem on `mesh`.
pub fn solve_contact(
    mesh: &Mesh,
    ldg: &LdgConfig,
    f: &dyn Fn(Point) -> f64,
    g: f64,
    config: &UzawaConfig,
) -> Result<(AssembledSystem, ContactSolution)> {
    let system = assemble(mesh, ldg, f, g)?;
    let sol = uzawa_solve(&system, config)?;
    Ok((system, sol))
}
