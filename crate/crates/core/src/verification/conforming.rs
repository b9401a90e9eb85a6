//! Conforming P1 solves on fine meshes, used as reference fields.
//!
//! The discrete system is packed into an [`AssembledSystem`] so the same
//! Uzawa iteration drives both the DG and the conforming friction problem.

use crate::assembly::AssembledSystem;
use crate::dg_space::quadrature::{EDGE_POINTS_PER_FACE, EDGE, TRIANGLE};
use crate::dg_space::BrokenField;
use crate::error::{Error, Result};
use crate::linalg::{SpdFactor, TripletBuilder};
use crate::mesh::{Mesh, Point};

/// Continuous P1 functions vanishing on Γ1.
#[derive(Debug, Clone)]
pub struct ConformingSpace {
    /// Unknown index of each vertex, `None` on Γ1.
    pub dof_of_vertex: Vec<Option<usize>>,
    pub ndof: usize,
}

impl ConformingSpace {
    pub fn new(mesh: &Mesh) -> Result<Self> {
        if !mesh.hanging_nodes().is_empty() {
            return Err(Error::InvalidMesh("conforming solves need a mesh without hanging nodes".into()));
        }
        let fixed = mesh.dirichlet_vertices();
        let mut ndof = 0;
        let dof_of_vertex = (0..mesh.vertices().len())
            .map(|v| {
                if fixed.contains(&v) {
                    None
                } else {
                    ndof += 1;
                    Some(ndof - 1)
                }
            })
            .collect();
        Ok(Self { dof_of_vertex, ndof })
    }

    fn dofs(&self, mesh: &Mesh, k: usize) -> [Option<usize>; 3] {
        mesh.element(k).vertices.map(|v| self.dof_of_vertex[v])
    }

    /// Element-wise copy of a conforming coefficient vector.
    pub fn to_broken(&self, mesh: &Mesh, x: &[f64]) -> BrokenField {
        let coeffs = mesh
            .elements()
            .iter()
            .flat_map(|el| el.vertices.map(|v| self.dof_of_vertex[v].map_or(0.0, |d| x[d])))
            .collect();
        BrokenField { coeffs }
    }
}

/// System of `a(u, v) + ∫_{Γ2} gλ v = (f, v)` on the conforming space.
pub fn assemble_conforming(mesh: &Mesh, f: &dyn Fn(Point) -> f64, g: f64) -> Result<(ConformingSpace, AssembledSystem)> {
    let space = ConformingSpace::new(mesh)?;
    let n = space.ndof;
    let mut a = TripletBuilder::with_capacity(n, n, 9 * mesh.num_elements());
    let mut load = vec![0.0; n];
    for k in 0..mesh.num_elements() {
        let el = mesh.element(k);
        let dofs = space.dofs(mesh, k);
        let gr = el.grad_bary;
        for i in 0..3 {
            let Some(di) = dofs[i] else { continue };
            for j in 0..3 {
                let Some(dj) = dofs[j] else { continue };
                let v = el.area * (gr[i][0] * gr[j][0] + gr[i][1] * gr[j][1])
                    + el.area / 12.0 * if i == j { 2.0 } else { 1.0 };
                a.add(di, dj, v);
            }
        }
        for (b, w) in TRIANGLE.iter() {
            let fx = w * el.area * f(mesh.point(k, b));
            for i in 0..3 {
                if let Some(di) = dofs[i] {
                    load[di] += fx * b[i];
                }
            }
        }
    }
    let stiffness = a.build();

    let ff = mesh.friction_faces();
    let np = EDGE_POINTS_PER_FACE * ff.len();
    let mut t = TripletBuilder::with_capacity(np, n, 3 * np);
    let mut gt = TripletBuilder::with_capacity(n, np, 3 * np);
    let mut weights = Vec::with_capacity(np);
    for (i, &e) in ff.iter().enumerate() {
        let face = mesh.face(e);
        let dofs = space.dofs(mesh, face.plus);
        for q in 0..EDGE_POINTS_PER_FACE {
            let row = EDGE_POINTS_PER_FACE * i + q;
            let w = face.quad[q].weight;
            weights.push(w);
            for j in 0..3 {
                if let Some(d) = dofs[j] {
                    let b = face.quad[q].bary_plus[j];
                    t.add(row, d, b);
                    gt.add(d, row, g * w * b);
                }
            }
        }
    }
    let system = AssembledSystem {
        energy_matrix: stiffness.clone(),
        stiffness,
        load,
        trace: t.build(),
        weights,
        g,
        boundary_coupling: gt.build(),
    };
    Ok((space, system))
}

/// Value at face parameter `t ∈ [0, 1]` of the quadratic through the three
/// Gauss-point values of a face.
///
/// Against P1 test functions the 3-point rule integrates this quadratic
/// exactly, so it is the function represented by Gauss-point multiplier data.
pub fn gauss_quadratic(values: &[f64], t: f64) -> f64 {
    let p = EDGE.points;
    (0..3)
        .map(|i| {
            let mut l = 1.0;
            for j in 0..3 {
                if j != i {
                    l *= (t - p[j]) / (p[i] - p[j]);
                }
            }
            values[i] * l
        })
        .sum()
}

/// Locates points of Γ2 on the Γ2 faces of a mesh.
pub struct FrictionLocator {
    /// `(friction index, start point, direction, squared length)`
    segments: Vec<(usize, Point, Point, f64)>,
}

impl FrictionLocator {
    pub fn new(mesh: &Mesh) -> Self {
        let segments = mesh
            .friction_faces()
            .iter()
            .enumerate()
            .map(|(i, &e)| {
                let f = mesh.face(e);
                let a = mesh.vertices()[f.vertices[0]];
                let b = mesh.vertices()[f.vertices[1]];
                let d = [b[0] - a[0], b[1] - a[1]];
                (i, a, d, d[0] * d[0] + d[1] * d[1])
            })
            .collect();
        Self { segments }
    }

    /// `(friction index, face parameter)` of the face containing `x`.
    pub fn locate(&self, x: Point) -> Option<(usize, f64)> {
        let tol = 1e-9;
        self.segments
            .iter()
            .filter_map(|&(i, a, d, l2)| {
                let r = [x[0] - a[0], x[1] - a[1]];
                let t = (r[0] * d[0] + r[1] * d[1]) / l2;
                let cross = (r[0] * d[1] - r[1] * d[0]).abs() / l2.sqrt();
                (cross <= tol * l2.sqrt().max(1.0) && (-tol..=1.0 + tol).contains(&t)).then_some((i, t.clamp(0.0, 1.0)))
            })
            .next()
    }

    /// Evaluates Gauss-point data of the located mesh at `x`.
    pub fn eval(&self, values: &[f64], x: Point) -> Option<f64> {
        let (i, t) = self.locate(x)?;
        Some(gauss_quadratic(&values[EDGE_POINTS_PER_FACE * i..EDGE_POINTS_PER_FACE * (i + 1)], t))
    }
}

/// Transfers Gauss-point data from the Γ2 faces of `from` to the Γ2
/// Gauss points of `to` through the face quadratics.
pub fn transfer_multiplier(from: &Mesh, values: &[f64], to: &Mesh) -> Result<Vec<f64>> {
    let loc = FrictionLocator::new(from);
    to.friction_faces()
        .iter()
        .flat_map(|&e| to.face(e).quad.map(|q| q.x))
        .map(|x| {
            loc.eval(values, x)
                .ok_or_else(|| Error::Domain(format!("point ({}, {}) is not on Γ2 of the source mesh", x[0], x[1])))
        })
        .collect()
}

/// Solves the linear auxiliary problem `−Δz + z = f`, `z = 0` on Γ1,
/// `∂z/∂n = −gμ` on Γ2 for Gauss-point data `mu` on `mesh`.
pub fn solve_neumann(system: &AssembledSystem, factor: &SpdFactor, mu: &[f64], tol_lin: f64) -> Result<Vec<f64>> {
    let c = system.boundary_vector(mu);
    let rhs: Vec<f64> = system.load.iter().zip(&c).map(|(f, c)| f - c).collect();
    Ok(factor.solve(&rhs, tol_lin)?.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dg_space::broken_h1_distance;
    use crate::mesh::unit_square_bottom_friction;
    use std::f64::consts::PI;

    #[test]
    fn quadratic_reproduces_gauss_values_and_quadratics() {
        let q = |t: f64| 1.0 - 2.0 * t + 3.0 * t * t;
        let vals: Vec<f64> = EDGE.points.iter().map(|&t| q(t)).collect();
        for t in [0.0, 0.2, 0.5, 0.93, 1.0] {
            assert!((gauss_quadratic(&vals, t) - q(t)).abs() < 1e-14);
        }
    }

    #[test]
    fn neumann_solve_converges_at_first_order() {
        // u = sin(πx) sin(πy) with ∂u/∂n = −π sin(πx) on y = 0, i.e. gμ = π sin(πx)
        let u = (
            |x: Point| (PI * x[0]).sin() * (PI * x[1]).sin(),
            |x: Point| [PI * (PI * x[0]).cos() * (PI * x[1]).sin(), PI * (PI * x[0]).sin() * (PI * x[1]).cos()],
        );
        let f = |x: Point| (2.0 * PI * PI + 1.0) * (PI * x[0]).sin() * (PI * x[1]).sin();
        let mut errs = Vec::new();
        for n in [8, 16, 32] {
            let m = unit_square_bottom_friction(n).unwrap();
            let (space, sys) = assemble_conforming(&m, &f, 1.0).unwrap();
            let mu: Vec<f64> = m
                .friction_faces()
                .iter()
                .flat_map(|&e| m.face(e).quad.map(|q| PI * (PI * q.x[0]).sin()))
                .collect();
            let fac = SpdFactor::new(&sys.stiffness).unwrap();
            let z = solve_neumann(&sys, &fac, &mu, 1e-12).unwrap();
            errs.push(broken_h1_distance(&m, &space.to_broken(&m, &z), &u));
        }
        for w in errs.windows(2) {
            let rate = (w[0] / w[1]).log2();
            assert!((rate - 1.0).abs() < 0.1, "rate {rate}");
        }
    }

    #[test]
    fn transfer_between_nested_boundaries() {
        let coarse = unit_square_bottom_friction(2).unwrap();
        let fine = coarse.refine_uniform().refine_uniform();
        let q = |x: Point| 0.5 - x[0] * x[0];
        // per-face quadratics reproduce a global quadratic
        let vals: Vec<f64> = coarse
            .friction_faces()
            .iter()
            .flat_map(|&e| coarse.face(e).quad.map(|p| q(p.x)))
            .collect();
        let moved = transfer_multiplier(&coarse, &vals, &fine).unwrap();
        let direct: Vec<f64> = fine
            .friction_faces()
            .iter()
            .flat_map(|&e| fine.face(e).quad.map(|p| q(p.x)))
            .collect();
        for (a, b) in moved.iter().zip(&direct) {
            assert!((a - b).abs() < 1e-14);
        }
        assert!(ConformingSpace::new(&coarse.refine(&[0])).is_err());
    }
}
