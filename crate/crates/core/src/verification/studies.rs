//! Convergence, effectivity, bridge and efficiency studies.

use std::fmt;

use rayon::prelude::*;

use crate::assembly::{AssembledSystem, LdgConfig};
use crate::dg_space::{element_h1_distance_sq, element_norms_sq, BrokenField};
use crate::error::{Error, Result};
use crate::estimator::{dual_norm, dual_norm_global, local_estimates, LocalEstimate};
use crate::linalg::SpdFactor;
use crate::mesh::{Mesh, Point};
use crate::vi_solver::{solve_contact, uzawa_solve_with, ContactSolution, Multiplier, UzawaConfig};

use super::averaging::jump_sums;
use super::benchmarks::{Benchmark, Exact, Reference};
use super::conforming::{assemble_conforming, solve_neumann, transfer_multiplier, ConformingSpace};

/// `η_tot / (‖u − u_h‖_{1,h} + |λ − λ_h|_{*,h})`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Effectivity {
    Value(f64),
    /// Zero error and zero estimator.
    ExactCoincidence,
    /// Zero error with a nonzero estimator.
    Infinite,
}

impl Effectivity {
    pub fn new(eta: f64, error: f64) -> Self {
        match (eta == 0.0, error == 0.0) {
            (true, true) => Effectivity::ExactCoincidence,
            (false, true) => Effectivity::Infinite,
            _ => Effectivity::Value(eta / error),
        }
    }

    pub fn value(self) -> Option<f64> {
        match self {
            Effectivity::Value(v) => Some(v),
            _ => None,
        }
    }
}

impl fmt::Display for Effectivity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Effectivity::Value(v) => write!(f, "{v:.16e}"),
            Effectivity::ExactCoincidence => f.write_str("exact"),
            Effectivity::Infinite => f.write_str("inf"),
        }
    }
}

/// One refinement level of a study.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyRow {
    pub level: usize,
    pub dofs: usize,
    pub eta_k_tot: f64,
    pub eta_dk_tot: f64,
    /// `‖u − u_h‖_{1,h}`, if a reference is available.
    pub error: Option<f64>,
    /// `|λ − λ_h|_{*,h}`, if a reference is available.
    pub dual_gap: Option<f64>,
    pub effectivity: Option<Effectivity>,
    pub bridge_ratio: Option<f64>,
    pub uzawa_iterations: usize,
}

impl StudyRow {
    pub fn eta_tot(&self) -> f64 {
        self.eta_k_tot.hypot(self.eta_dk_tot)
    }

    /// `(‖u − u_h‖_{1,h} + |λ − λ_h|_{*,h}) / η_tot`.
    pub fn reliability_ratio(&self) -> Option<f64> {
        Some((self.error? + self.dual_gap?) / self.eta_tot())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyReport {
    pub benchmark: String,
    pub rows: Vec<StudyRow>,
}

impl StudyReport {
    /// Observed rates `log2(x_l / x_{l+1})` between consecutive uniform levels.
    pub fn rates(&self, quantity: impl Fn(&StudyRow) -> Option<f64>) -> Vec<f64> {
        self.rows
            .windows(2)
            .filter_map(|w| Some((quantity(&w[0])? / quantity(&w[1])?).log2()))
            .collect()
    }
}

/// `max / min` of positive values.
pub fn spread(values: &[f64]) -> f64 {
    let hi = values.iter().copied().fold(f64::MIN, f64::max);
    let lo = values.iter().copied().fold(f64::MAX, f64::min);
    hi / lo
}

/// For each triangle of `fine`, the triangle of `coarse` containing its
/// centroid. `fine` must be nested in `coarse`.
pub fn locate_elements(coarse: &Mesh, fine: &Mesh) -> Result<Vec<usize>> {
    let grid = BucketGrid::new(coarse);
    (0..fine.num_elements())
        .into_par_iter()
        .map(|k| {
            let c = fine.centroid(k);
            grid.find(coarse, c)
                .ok_or_else(|| Error::Domain(format!("point ({}, {}) is outside the coarse mesh", c[0], c[1])))
        })
        .collect()
}

struct BucketGrid {
    origin: Point,
    cell: f64,
    dims: [usize; 2],
    buckets: Vec<Vec<usize>>,
}

impl BucketGrid {
    fn new(mesh: &Mesh) -> Self {
        let (mut lo, mut hi) = ([f64::MAX; 2], [f64::MIN; 2]);
        for v in mesh.vertices() {
            for d in 0..2 {
                lo[d] = lo[d].min(v[d]);
                hi[d] = hi[d].max(v[d]);
            }
        }
        let n = (mesh.num_elements() as f64).sqrt().ceil().max(1.0);
        let cell = ((hi[0] - lo[0]).max(hi[1] - lo[1]) / n).max(f64::MIN_POSITIVE);
        let dims = [0, 1].map(|d| ((hi[d] - lo[d]) / cell) as usize + 1);
        let mut buckets = vec![Vec::new(); dims[0] * dims[1]];
        let mut grid = Self { origin: lo, cell, dims, buckets: Vec::new() };
        for k in 0..mesh.num_elements() {
            let p = mesh.element_points(k);
            let (a, b) = (grid.index(min2(&p)), grid.index(max2(&p)));
            for i in a[0]..=b[0] {
                for j in a[1]..=b[1] {
                    buckets[i * dims[1] + j].push(k);
                }
            }
        }
        grid.buckets = buckets;
        grid
    }

    fn index(&self, x: Point) -> [usize; 2] {
        [0, 1].map(|d| (((x[d] - self.origin[d]) / self.cell).max(0.0) as usize).min(self.dims[d] - 1))
    }

    fn find(&self, mesh: &Mesh, x: Point) -> Option<usize> {
        let [i, j] = self.index(x);
        self.buckets[i * self.dims[1] + j]
            .iter()
            .copied()
            .find(|&k| mesh.barycentric(k, x).iter().all(|&b| b >= -1e-10))
    }
}

fn min2(p: &[Point; 3]) -> Point {
    [0, 1].map(|d| p[0][d].min(p[1][d]).min(p[2][d]))
}

fn max2(p: &[Point; 3]) -> Point {
    [0, 1].map(|d| p[0][d].max(p[1][d]).max(p[2][d]))
}

/// Re-interpolates `v` from `coarse` onto the nested mesh `fine`.
pub fn prolongate_located(coarse: &Mesh, v: &BrokenField, fine: &Mesh, owner: &[usize]) -> BrokenField {
    let coeffs = fine
        .elements()
        .iter()
        .zip(owner)
        .flat_map(|(el, &k)| el.vertices.map(|p| v.eval_at(coarse, k, fine.vertices()[p])))
        .collect();
    BrokenField { coeffs }
}

/// Conforming P1 discretization on a fine mesh, factored once.
pub struct FineProblem {
    pub mesh: Mesh,
    pub space: ConformingSpace,
    pub system: AssembledSystem,
    pub factor: SpdFactor,
}

impl FineProblem {
    pub fn new(mesh: Mesh, f: &dyn Fn(Point) -> f64, g: f64) -> Result<Self> {
        let (space, system) = assemble_conforming(&mesh, f, g)?;
        let factor = SpdFactor::new(&system.stiffness)?;
        Ok(Self { mesh, space, system, factor })
    }

    /// Solves the friction problem on the fine space.
    pub fn solve_friction(&self, config: &UzawaConfig) -> Result<ContactSolution> {
        uzawa_solve_with(&self.system, &self.factor, config)
    }

    /// Solves `−Δz + z = f`, `z = 0` on Γ1, `∂z/∂n = −gμ` on Γ2 with `μ`
    /// given as Gauss-point data on `coarse`.
    pub fn neumann(&self, coarse: &Mesh, mu: &[f64], tol_lin: f64) -> Result<BrokenField> {
        let data = transfer_multiplier(coarse, mu, &self.mesh)?;
        let z = solve_neumann(&self.system, &self.factor, &data, tol_lin)?;
        Ok(self.space.to_broken(&self.mesh, &z))
    }
}

/// Reference solution used to measure errors.
pub enum ReferenceSolution {
    Exact(Exact),
    Fine {
        problem: FineProblem,
        u: BrokenField,
        lambda: Vec<f64>,
        iterations: usize,
    },
}

impl ReferenceSolution {
    /// Reference for `bench` valid for meshes up to `finest_level` uniform
    /// refinements of its base mesh. `None` if the benchmark has none.
    pub fn for_benchmark(bench: &Benchmark, finest_level: usize, uzawa: &UzawaConfig) -> Result<Option<Self>> {
        match bench.reference {
            Reference::Exact => Ok(bench.exact.map(ReferenceSolution::Exact)),
            Reference::FineConforming { levels_finer } => {
                let problem = FineProblem::new(bench.mesh(finest_level + levels_finer)?, &bench.source(), bench.g)?;
                let sol = problem.solve_friction(uzawa)?;
                let u = problem.space.to_broken(&problem.mesh, &sol.u.coeffs);
                Ok(Some(ReferenceSolution::Fine {
                    problem,
                    u,
                    lambda: sol.lambda.values,
                    iterations: sol.report.iterations,
                }))
            }
            Reference::None => Ok(None),
        }
    }

    /// `‖u − u_h‖²_{1,K}` for every triangle `K` of `mesh`.
    pub fn element_errors_sq(&self, mesh: &Mesh, u_h: &BrokenField) -> Result<Vec<f64>> {
        match self {
            ReferenceSolution::Exact(ex) => Ok((0..mesh.num_elements())
                .into_par_iter()
                .map(|k| element_h1_distance_sq(mesh, u_h, ex, k))
                .collect()),
            ReferenceSolution::Fine { problem, u, .. } => {
                let owner = locate_elements(mesh, &problem.mesh)?;
                let d = prolongate_located(mesh, u_h, &problem.mesh, &owner).sub(u);
                let mut out = vec![0.0; mesh.num_elements()];
                for (k, &c) in owner.iter().enumerate() {
                    let (a, b) = element_norms_sq(&problem.mesh, &d, k);
                    out[c] += a + b;
                }
                Ok(out)
            }
        }
    }

    /// Reference multiplier at the Γ2 Gauss points of `mesh`.
    pub fn lambda_on(&self, mesh: &Mesh, g: f64) -> Result<Vec<f64>> {
        match self {
            ReferenceSolution::Exact(ex) => Ok(Multiplier::sample(mesh, g, ex.lambda).values),
            ReferenceSolution::Fine { problem, lambda, .. } => transfer_multiplier(&problem.mesh, lambda, mesh),
        }
    }
}

/// Errors of a discrete solution against a reference.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorMeasurement {
    pub element_errors_sq: Vec<f64>,
    pub error: f64,
    /// `λ − λ_h` at the Γ2 Gauss points.
    pub lambda_error: Vec<f64>,
    pub dual_gap: f64,
}

pub fn measure_error(mesh: &Mesh, sol: &ContactSolution, reference: &ReferenceSolution, g: f64) -> Result<ErrorMeasurement> {
    let element_errors_sq = reference.element_errors_sq(mesh, &sol.u)?;
    let error = element_errors_sq.iter().sum::<f64>().sqrt();
    let lambda_error: Vec<f64> = reference
        .lambda_on(mesh, g)?
        .iter()
        .zip(&sol.lambda.values)
        .map(|(a, b)| a - b)
        .collect();
    let dual_gap = dual_norm_global(mesh, g, &lambda_error);
    Ok(ErrorMeasurement {
        element_errors_sq,
        error,
        lambda_error,
        dual_gap,
    })
}

/// `(‖u − u_h‖_{1,h} + |λ − λ_h|_{*,h}) / (‖u_h − z‖_{1,h} + (Σ_{E_h^0} h_e^{-1}‖[u_h]‖²)^{1/2})`
/// with `z` the fine solution of the linear problem driven by `λ_h`.
/// Zero over zero is reported as 0.
pub fn bridge_ratio(mesh: &Mesh, sol: &ContactSolution, err: &ErrorMeasurement, fine: &FineProblem, tol_lin: f64) -> Result<f64> {
    let z = fine.neumann(mesh, &sol.lambda.values, tol_lin)?;
    let owner = locate_elements(mesh, &fine.mesh)?;
    let d = prolongate_located(mesh, &sol.u, &fine.mesh, &owner).sub(&z);
    let dz: f64 = (0..fine.mesh.num_elements())
        .map(|k| {
            let (a, b) = element_norms_sq(&fine.mesh, &d, k);
            a + b
        })
        .sum::<f64>()
        .sqrt();
    let rhs = dz + jump_sums(mesh, &sol.u).1.sqrt();
    let lhs = err.error + err.dual_gap;
    Ok(if lhs == 0.0 && rhs == 0.0 { 0.0 } else { lhs / rhs })
}

#[derive(Debug, Clone)]
pub struct StudyOptions {
    pub ldg: LdgConfig,
    pub uzawa: UzawaConfig,
    /// Measure the bridge ratio (needs a fine conforming solve per level).
    pub bridge: bool,
    /// Uniform levels between the finest study mesh and the fine meshes
    /// used for `z` and for reference solutions.
    pub fine_levels: usize,
}

impl Default for StudyOptions {
    fn default() -> Self {
        Self {
            ldg: LdgConfig::default(),
            uzawa: UzawaConfig::default(),
            bridge: false,
            fine_levels: 4,
        }
    }
}

/// Solution and measurements on one mesh.
#[derive(Debug)]
pub struct LevelResult {
    pub mesh: Mesh,
    pub solution: ContactSolution,
    pub estimates: LocalEstimate,
    pub errors: Option<ErrorMeasurement>,
    pub row: StudyRow,
}

/// Solves, estimates and measures on `mesh`.
pub fn evaluate_level(
    bench: &Benchmark,
    level: usize,
    mesh: Mesh,
    options: &StudyOptions,
    reference: Option<&ReferenceSolution>,
    bridge: Option<&FineProblem>,
) -> Result<LevelResult> {
    let (_, solution) = solve_contact(&mesh, &options.ldg, &bench.source(), bench.g, &options.uzawa)?;
    let estimates = local_estimates(&mesh, &solution.u, &solution.lambda, &bench.source(), bench.g);
    let errors = reference.map(|r| measure_error(&mesh, &solution, r, bench.g)).transpose()?;
    let bridge_ratio = match (bridge, &errors) {
        (Some(fine), Some(err)) => Some(bridge_ratio(&mesh, &solution, err, fine, options.uzawa.tol_lin)?),
        _ => None,
    };
    let row = StudyRow {
        level,
        dofs: 3 * mesh.num_elements(),
        eta_k_tot: estimates.eta_k_total(),
        eta_dk_tot: estimates.eta_dk_total(),
        error: errors.as_ref().map(|e| e.error),
        dual_gap: errors.as_ref().map(|e| e.dual_gap),
        effectivity: errors.as_ref().map(|e| Effectivity::new(estimates.total(), e.error + e.dual_gap)),
        bridge_ratio,
        uzawa_iterations: solution.report.iterations,
    };
    Ok(LevelResult {
        mesh,
        solution,
        estimates,
        errors,
        row,
    })
}

/// Uniform-refinement study over `levels` (numbers of uniform refinements
/// of the benchmark base mesh). Levels are processed in parallel.
pub fn uniform_study(bench: &Benchmark, levels: &[usize], options: &StudyOptions) -> Result<StudyReport> {
    let results = uniform_levels(bench, levels, options)?;
    Ok(StudyReport {
        benchmark: bench.id.to_string(),
        rows: results.into_iter().map(|r| r.row).collect(),
    })
}

/// Like [`uniform_study`] but keeps meshes, solutions and estimates.
pub fn uniform_levels(bench: &Benchmark, levels: &[usize], options: &StudyOptions) -> Result<Vec<LevelResult>> {
    let finest = levels.iter().copied().max().unwrap_or(0);
    let reference = ReferenceSolution::for_benchmark(bench, finest, &options.uzawa)?;
    let own_fine;
    let bridge = match (&reference, options.bridge) {
        (_, false) | (None, _) => None,
        (Some(ReferenceSolution::Fine { problem, .. }), true) => Some(problem),
        (Some(ReferenceSolution::Exact(_)), true) => {
            own_fine = FineProblem::new(bench.mesh(finest + options.fine_levels)?, &bench.source(), bench.g)?;
            Some(&own_fine)
        }
    };
    levels
        .par_iter()
        .map(|&l| evaluate_level(bench, l, bench.mesh(l)?, options, reference.as_ref(), bridge))
        .collect()
}

/// Per-element efficiency quotients
/// `η_K / (‖u − u_h‖_{1,ω_K} + Σ_{e ⊂ ∂K∩Γ2} |λ − λ_h|_{*,e} + h_K‖f − f̄‖_{ω_K} + Σ_{e ⊂ ∂K∩Γ2} h_e^{1/2}‖λ_h − λ̄_h‖_e)`.
/// Triangles with a vanishing denominator are skipped.
pub fn efficiency_quotients(mesh: &Mesh, level: &LevelResult, g: f64) -> Vec<f64> {
    let err = level.errors.as_ref().expect("efficiency needs a reference solution");
    let est = &level.estimates;
    let patches = mesh.patches();
    let mut gamma_faces: Vec<Vec<usize>> = vec![Vec::new(); mesh.num_elements()];
    for (i, &e) in mesh.friction_faces().iter().enumerate() {
        gamma_faces[mesh.face(e).plus].push(i);
    }
    (0..mesh.num_elements())
        .into_par_iter()
        .filter_map(|k| {
            let omega = &patches.element[k];
            let hk = mesh.element(k).diameter;
            let e_omega = omega.iter().map(|&j| err.element_errors_sq[j]).sum::<f64>().sqrt();
            let osc_f = hk * omega
                .iter()
                .map(|&j| (est.osc_f[j] / mesh.element(j).diameter).powi(2))
                .sum::<f64>()
                .sqrt();
            let edges: f64 = gamma_faces[k]
                .iter()
                .map(|&i| dual_norm(mesh, g, &err.lambda_error, &[i]) + est.osc_lambda[i])
                .sum();
            let den = e_omega + osc_f + edges;
            (den > 0.0).then(|| est.eta_k[k] / den)
        })
        .collect()
}

/// Nearest-rank percentile, `p ∈ (0, 100]`.
pub fn percentile(values: &[f64], p: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let rank = ((p / 100.0) * v.len() as f64).ceil() as usize;
    v[rank.clamp(1, v.len()) - 1]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::unit_square_bottom_friction;
    use crate::verification::benchmarks::BenchmarkId;

    #[test]
    fn effectivity_cases() {
        assert_eq!(Effectivity::new(0.0, 0.0), Effectivity::ExactCoincidence);
        assert_eq!(Effectivity::new(1.0, 0.0), Effectivity::Infinite);
        assert_eq!(Effectivity::new(1.0, 4.0).value(), Some(0.25));
        assert_eq!(Effectivity::ExactCoincidence.to_string(), "exact");
    }

    #[test]
    fn percentile_nearest_rank() {
        let v: Vec<f64> = (1..=100).map(f64::from).collect();
        assert_eq!(percentile(&v, 99.0), 99.0);
        assert_eq!(percentile(&v, 100.0), 100.0);
        assert_eq!(percentile(&[3.0], 50.0), 3.0);
    }

    #[test]
    fn locator_finds_parents() {
        let coarse = unit_square_bottom_friction(2).unwrap();
        let fine = coarse.refine_uniform().refine_uniform();
        let owner = locate_elements(&coarse, &fine).unwrap();
        let mid = coarse.refine_uniform();
        let composite: Vec<usize> = fine.parents().iter().map(|&p| mid.parents()[p]).collect();
        assert_eq!(owner, composite);
        let v = BrokenField::from_coeffs(&coarse, (0..24).map(|i| i as f64).collect());
        let p = prolongate_located(&coarse, &v, &fine, &owner);
        let direct = v.prolongate(&coarse, &mid).prolongate(&mid, &fine);
        for (a, b) in p.coeffs.iter().zip(&direct.coeffs) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn affine_study_is_an_exact_coincidence() {
        let b = Benchmark::get(BenchmarkId::Affine);
        let options = StudyOptions {
            bridge: true,
            fine_levels: 2,
            ..Default::default()
        };
        let r = uniform_study(&b, &[0, 1], &options).unwrap();
        for row in &r.rows {
            assert_eq!(row.eta_tot(), 0.0);
            assert_eq!(row.effectivity, Some(Effectivity::ExactCoincidence));
            assert_eq!(row.bridge_ratio, Some(0.0));
        }
    }

    #[test]
    fn stick_coarse_levels_behave() {
        let b = Benchmark::get(BenchmarkId::Stick);
        let options = StudyOptions {
            bridge: true,
            fine_levels: 2,
            ..Default::default()
        };
        let r = uniform_study(&b, &[0, 1], &options).unwrap();
        assert!(r.rows[1].error.unwrap() < r.rows[0].error.unwrap());
        assert!(r.rows.iter().all(|row| row.bridge_ratio.unwrap() > 0.0));
    }
}
