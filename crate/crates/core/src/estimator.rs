//! Residual a posteriori estimators for the discrete friction problem.
//!
//! For P1 solutions the interior residual is `R_K = f − u_h`. Edge residuals
//! are the normal-flux jump on interior faces and `∇u_h·n + gλ_h` on Γ2.
//! Per triangle:
//!
//! ```text
//! η_K²  = h_K²‖R_K‖²_K + ½ Σ_{e∈E(K)∩E_i} h_e‖R_e‖²_e + Σ_{e∈E(K)∩E_2} h_e‖R_e‖²_e
//! η_∂K² = ½ Σ_{e∈E(K)∩E_i} h_e⁻¹‖[u_h]‖²_e + Σ_{e∈E(K)∩E_1} h_e⁻¹‖[u_h]‖²_e
//! ```

use nalgebra::{Matrix3, Vector3};
use rayon::prelude::*;

use crate::assembly::element_h1_matrix;
use crate::dg_space::quadrature::{EDGE_POINTS_PER_FACE, TRIANGLE};
use crate::dg_space::BrokenField;
use crate::error::{Error, Result};
use crate::mesh::{FaceKind, Mesh, Point};
use crate::vi_solver::Multiplier;

#[derive(Debug, Clone, PartialEq)]
pub struct LocalEstimate {
    pub eta_k: Vec<f64>,
    pub eta_dk: Vec<f64>,
    /// `h_K‖f − f̄‖_K`
    pub osc_f: Vec<f64>,
    /// `h_e^{1/2}‖λ_h − λ̄_h‖_e`, one entry per Γ2 face in `mesh.friction_faces()` order.
    pub osc_lambda: Vec<f64>,
}

impl LocalEstimate {
    /// Marking indicator `η_K² + η_∂K²`.
    pub fn indicator(&self, k: usize) -> f64 {
        self.eta_k[k].powi(2) + self.eta_dk[k].powi(2)
    }

    pub fn indicators(&self) -> Vec<f64> {
        (0..self.eta_k.len()).map(|k| self.indicator(k)).collect()
    }

    /// `(Σ η_K²)^{1/2}`
    pub fn eta_k_total(&self) -> f64 {
        self.eta_k.iter().map(|e| e * e).sum::<f64>().sqrt()
    }

    /// `(Σ η_∂K²)^{1/2}`
    pub fn eta_dk_total(&self) -> f64 {
        self.eta_dk.iter().map(|e| e * e).sum::<f64>().sqrt()
    }

    /// `η_tot = (Σ η_K² + Σ η_∂K²)^{1/2}`
    pub fn total(&self) -> f64 {
        self.eta_k_total().hypot(self.eta_dk_total())
    }
}

/// `x ↦ f(x) − u_h(x)` on triangle `k` (`Δu_h = 0` for P1).
pub fn interior_residual<'a>(
    mesh: &'a Mesh,
    u: &'a BrokenField,
    f: &'a dyn Fn(Point) -> f64,
    k: usize,
) -> impl Fn(Point) -> f64 + 'a {
    move |x| f(x) - u.eval_at(mesh, k, x)
}

/// Position of a Γ2 face in `mesh.friction_faces()`.
pub fn friction_index(mesh: &Mesh, face: usize) -> Option<usize> {
    mesh.friction_faces().binary_search(&face).ok()
}

/// Edge residual at the quadrature points of face `e`.
///
/// Interior faces: `[∇u_h] = (∇u⁺ − ∇u⁻)·n`. Γ2 faces: `∇u_h·n + gλ_h`.
/// Γ1 faces carry no edge residual and are rejected.
pub fn edge_residual(
    mesh: &Mesh,
    u: &BrokenField,
    lambda: &Multiplier,
    g: f64,
    e: usize,
) -> Result<[f64; EDGE_POINTS_PER_FACE]> {
    let face = mesh.face(e);
    let n = face.normal;
    let flux = |k: usize| {
        let gr = u.gradient(mesh, k);
        gr[0] * n[0] + gr[1] * n[1]
    };
    match face.kind {
        FaceKind::Interior => {
            let j = flux(face.plus) - flux(face.minus.expect("interior face"));
            Ok([j; EDGE_POINTS_PER_FACE])
        }
        FaceKind::Friction => {
            let i = friction_index(mesh, e).expect("Γ2 face is listed");
            let lam = lambda.face_values(i);
            let fl = flux(face.plus);
            Ok(std::array::from_fn(|q| fl + g * lam[q]))
        }
        FaceKind::Dirichlet => Err(Error::Domain(format!(
            "face {e} lies on Γ1, which carries no edge residual"
        ))),
    }
}

fn squared_on_face(mesh: &Mesh, e: usize, values: &[f64; EDGE_POINTS_PER_FACE]) -> f64 {
    mesh.face(e)
        .quad
        .iter()
        .zip(values)
        .map(|(q, v)| q.weight * v * v)
        .sum()
}

fn jump_sq(mesh: &Mesh, u: &BrokenField, e: usize) -> f64 {
    squared_on_face(mesh, e, &u.scalar_jump(mesh, e))
}

fn residual_sq(mesh: &Mesh, u: &BrokenField, f: &dyn Fn(Point) -> f64, k: usize) -> f64 {
    let area = mesh.element(k).area;
    TRIANGLE
        .iter()
        .map(|(b, w)| {
            let r = f(mesh.point(k, b)) - u.eval(k, b);
            w * r * r
        })
        .sum::<f64>()
        * area
}

fn element_terms(
    mesh: &Mesh,
    u: &BrokenField,
    lambda: &Multiplier,
    f: &(dyn Fn(Point) -> f64 + Sync),
    g: f64,
    k: usize,
) -> (f64, f64) {
    let hk = mesh.element(k).diameter;
    let mut eta = hk * hk * residual_sq(mesh, u, f, k);
    let mut eta_d = 0.0;
    for &e in mesh.element_faces(k) {
        let face = mesh.face(e);
        let he = face.length;
        match face.kind {
            FaceKind::Interior => {
                let r = edge_residual(mesh, u, lambda, g, e).expect("interior");
                eta += 0.5 * he * squared_on_face(mesh, e, &r);
                eta_d += 0.5 / he * jump_sq(mesh, u, e);
            }
            FaceKind::Friction => {
                let r = edge_residual(mesh, u, lambda, g, e).expect("friction");
                eta += he * squared_on_face(mesh, e, &r);
            }
            FaceKind::Dirichlet => eta_d += jump_sq(mesh, u, e) / he,
        }
    }
    (eta, eta_d)
}

/// Local estimators, data oscillation and multiplier oscillation.
pub fn local_estimates(
    mesh: &Mesh,
    u: &BrokenField,
    lambda: &Multiplier,
    f: &(dyn Fn(Point) -> f64 + Sync),
    g: f64,
) -> LocalEstimate {
    let (eta_k, eta_dk): (Vec<f64>, Vec<f64>) = (0..mesh.num_elements())
        .into_par_iter()
        .map(|k| {
            let (a, b) = element_terms(mesh, u, lambda, f, g, k);
            (a.sqrt(), b.sqrt())
        })
        .unzip();
    LocalEstimate {
        eta_k,
        eta_dk,
        osc_f: data_oscillation(f, mesh),
        osc_lambda: multiplier_oscillation(mesh, lambda),
    }
}

/// `(η_K², η_∂K²)` accumulated by a loop over faces instead of triangles.
pub fn squared_estimates_by_faces(
    mesh: &Mesh,
    u: &BrokenField,
    lambda: &Multiplier,
    f: &dyn Fn(Point) -> f64,
    g: f64,
) -> (Vec<f64>, Vec<f64>) {
    let ne = mesh.num_elements();
    let mut eta: Vec<f64> = (0..ne)
        .map(|k| mesh.element(k).diameter.powi(2) * residual_sq(mesh, u, f, k))
        .collect();
    let mut eta_d = vec![0.0; ne];
    for (e, face) in mesh.faces().iter().enumerate() {
        let he = face.length;
        match face.kind {
            FaceKind::Interior => {
                let r = he * squared_on_face(mesh, e, &edge_residual(mesh, u, lambda, g, e).expect("interior"));
                let j = jump_sq(mesh, u, e) / he;
                for s in face.sides() {
                    eta[s.element] += 0.5 * r;
                    eta_d[s.element] += 0.5 * j;
                }
            }
            FaceKind::Friction => {
                eta[face.plus] += he * squared_on_face(mesh, e, &edge_residual(mesh, u, lambda, g, e).expect("friction"));
            }
            FaceKind::Dirichlet => eta_d[face.plus] += jump_sq(mesh, u, e) / he,
        }
    }
    (eta, eta_d)
}

/// Nodal moments `f^i = (f, φ_i)_K / (1, φ_i)_K` on triangle `k`.
pub fn oscillation_moments(mesh: &Mesh, f: &dyn Fn(Point) -> f64, k: usize) -> [f64; 3] {
    let area = mesh.element(k).area;
    let mut m = [0.0; 3];
    for (b, w) in TRIANGLE.iter() {
        let fx = w * area * f(mesh.point(k, b));
        for i in 0..3 {
            m[i] += fx * b[i];
        }
    }
    // (1, φ_i)_K = |K|/3
    m.map(|v| 3.0 * v / area)
}

/// `h_K‖f − f̄‖_K` per triangle.
pub fn data_oscillation(f: &(dyn Fn(Point) -> f64 + Sync), mesh: &Mesh) -> Vec<f64> {
    (0..mesh.num_elements())
        .into_par_iter()
        .map(|k| {
            let fi = oscillation_moments(mesh, f, k);
            let el = mesh.element(k);
            let sq: f64 = TRIANGLE
                .iter()
                .map(|(b, w)| {
                    let d = f(mesh.point(k, b)) - (fi[0] * b[0] + fi[1] * b[1] + fi[2] * b[2]);
                    w * d * d
                })
                .sum::<f64>()
                * el.area;
            el.diameter * sq.sqrt()
        })
        .collect()
}

/// `h_e^{1/2}‖λ_h − λ̄_h‖_e` with `λ̄_h` the face mean.
pub fn multiplier_oscillation(mesh: &Mesh, lambda: &Multiplier) -> Vec<f64> {
    mesh.friction_faces()
        .iter()
        .enumerate()
        .map(|(i, &e)| {
            let face = mesh.face(e);
            let lam = lambda.face_values(i);
            let mean: f64 = face.quad.iter().zip(lam).map(|(q, l)| q.weight * l).sum::<f64>() / face.length;
            let sq: f64 = face
                .quad
                .iter()
                .zip(lam)
                .map(|(q, l)| q.weight * (l - mean).powi(2))
                .sum();
            face.length.sqrt() * sq.sqrt()
        })
        .collect()
}

/// Discrete dual norm `|μ|_{*,γ,h} = ‖w‖_{1,h}` where `w` solves
/// `a_h(w, v) = ∫_γ g μ v` over the broken P1 space of `mesh`.
///
/// `mu` holds values at the Γ2 Gauss points (the [`Multiplier`] layout) and
/// `gamma` lists positions in `mesh.friction_faces()`. The broken form
/// decouples element by element, so only triangles adjacent to `gamma`
/// contribute; the result is the same for any patch containing them.
pub fn dual_norm(mesh: &Mesh, g: f64, mu: &[f64], gamma: &[usize]) -> f64 {
    assert_eq!(mu.len(), EDGE_POINTS_PER_FACE * mesh.friction_faces().len());
    let mut rhs: std::collections::BTreeMap<usize, [f64; 3]> = Default::default();
    for &i in gamma {
        let face = mesh.face(mesh.friction_faces()[i]);
        let b = rhs.entry(face.plus).or_insert([0.0; 3]);
        for q in 0..EDGE_POINTS_PER_FACE {
            let s = g * face.quad[q].weight * mu[EDGE_POINTS_PER_FACE * i + q];
            for j in 0..3 {
                b[j] += s * face.quad[q].bary_plus[j];
            }
        }
    }
    rhs.iter()
        .map(|(&k, b)| {
            let a = element_h1_matrix(mesh, k);
            let m = Matrix3::from_fn(|i, j| a[i][j]);
            let bv = Vector3::from_row_slice(b);
            let w = m.cholesky().expect("element H¹ matrix is SPD").solve(&bv);
            bv.dot(&w)
        })
        .sum::<f64>()
        .max(0.0)
        .sqrt()
}

/// Dual norm over all of Γ2.
pub fn dual_norm_global(mesh: &Mesh, g: f64, mu: &[f64]) -> f64 {
    let all: Vec<usize> = (0..mesh.friction_faces().len()).collect();
    dual_norm(mesh, g, mu, &all)
}
