//! Sparse assembly of the LDG bilinear form, its lifting operators, the
//! load vector and the coupling with the friction multiplier.
//!
//! Unknowns are broken P1 coefficients, `3K + j` for vertex `j` of triangle
//! `K`. The stabilization `(r0([u]) + l(β·[u]), r0([v]) + l(β·[v]))` is built
//! element by element from the lifted jump data and the analytic inverse of
//! the element mass matrix. [`build_liftings`] assembles the same operators
//! as global matrices, which gives an independent route to that term.

use crate::dg_space::quadrature::{EDGE, EDGE_POINTS_PER_FACE, TRIANGLE};
use crate::error::{Error, Result};
use crate::linalg::{spmv, SpMat, TripletBuilder};
use crate::mesh::{FaceKind, Mesh, Point};
use crate::vi_solver::Multiplier;

/// Penalty numbers `η_e` on `E_h^0`; the penalty weight is `η_e / h_e`.
#[derive(Debug, Clone, PartialEq)]
pub enum Penalty {
    Uniform(f64),
    /// One entry per face id (entries on Γ2 faces are ignored).
    PerFace(Vec<f64>),
}

/// Flux parameter `β` on interior faces.
#[derive(Debug, Clone, PartialEq)]
pub enum Beta {
    Uniform([f64; 2]),
    /// One entry per face id (entries on boundary faces are ignored).
    PerFace(Vec<[f64; 2]>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LdgConfig {
    pub penalty: Penalty,
    pub beta: Beta,
}

impl Default for LdgConfig {
    fn default() -> Self {
        Self {
            penalty: Penalty::Uniform(10.0),
            beta: Beta::Uniform([0.0, 0.0]),
        }
    }
}

impl LdgConfig {
    pub fn eta(&self, f: usize) -> f64 {
        match &self.penalty {
            Penalty::Uniform(e) => *e,
            Penalty::PerFace(v) => v[f],
        }
    }

    pub fn beta(&self, f: usize) -> [f64; 2] {
        match &self.beta {
            Beta::Uniform(b) => *b,
            Beta::PerFace(v) => v[f],
        }
    }

    pub fn validate(&self, mesh: &Mesh) -> Result<()> {
        let nf = mesh.faces().len();
        if let Penalty::PerFace(v) = &self.penalty {
            if v.len() != nf {
                return Err(Error::Config(format!("{} penalty values for {nf} faces", v.len())));
            }
        }
        if let Beta::PerFace(v) = &self.beta {
            if v.len() != nf {
                return Err(Error::Config(format!("{} beta values for {nf} faces", v.len())));
            }
            if v.iter().flatten().any(|b| !b.is_finite()) {
                return Err(Error::Config("beta must be finite".into()));
            }
        }
        if let Beta::Uniform(b) = &self.beta {
            if b.iter().any(|b| !b.is_finite()) {
                return Err(Error::Config("beta must be finite".into()));
            }
        }
        for f in 0..nf {
            if mesh.face(f).kind.not_on_friction() {
                let eta = self.eta(f);
                if !(eta > 0.0 && eta.is_finite()) {
                    return Err(Error::Config(format!("penalty on face {f} must be positive, got {eta}")));
                }
            }
        }
        Ok(())
    }
}

/// The seven terms of the form, grouped.
#[derive(Debug, Clone)]
pub struct FormParts {
    /// `∫ ∇_h u·∇_h v + u v`
    pub volume: SpMat,
    /// `−∫_{E0} [u]·{∇v} − ∫_{E0} {∇u}·[v]`
    pub consistency: SpMat,
    /// `−∫_{Ei} β·[u] [∇v] − ∫_{Ei} [∇u] β·[v]`
    pub beta_flux: SpMat,
    /// Lifted-jump inner product.
    pub stabilization: SpMat,
    /// `∫_{E0} η_e h_e⁻¹ [u]·[v]`
    pub penalty: SpMat,
}

impl FormParts {
    pub fn total(&self) -> SpMat {
        let parts = [
            &self.volume,
            &self.consistency,
            &self.beta_flux,
            &self.stabilization,
            &self.penalty,
        ];
        let n = self.volume.nrows();
        let mut b = TripletBuilder::with_capacity(n, n, parts.iter().map(|p| p.val().len()).sum());
        for p in parts {
            push_all(&mut b, p);
        }
        b.build()
    }
}

fn push_all(b: &mut TripletBuilder, m: &SpMat) {
    let (ptr, rows, vals) = (m.col_ptr(), m.row_idx(), m.val());
    for col in 0..m.ncols() {
        for idx in ptr[col]..ptr[col + 1] {
            b.add(rows[idx], col, vals[idx]);
        }
    }
}

/// Discrete system for the friction problem.
#[derive(Debug, Clone)]
pub struct AssembledSystem {
    /// Matrix of the LDG form.
    pub stiffness: SpMat,
    /// `(f, φ)` for every basis function.
    pub load: Vec<f64>,
    /// Point evaluation at the Γ2 quadrature points: row `3i + q` belongs to
    /// quadrature point `q` of `mesh.friction_faces()[i]`.
    pub trace: SpMat,
    /// Quadrature weights (including face length) of those points.
    pub weights: Vec<f64>,
    pub g: f64,
    /// `G = g Tᵀ W`, so that `G λ` represents `v ↦ ∫_{Γ2} g λ v`.
    pub boundary_coupling: SpMat,
    /// Block-diagonal matrix of the broken `H¹` inner product.
    pub energy_matrix: SpMat,
}

impl AssembledSystem {
    pub fn ndof(&self) -> usize {
        self.load.len()
    }

    pub fn num_multiplier_points(&self) -> usize {
        self.weights.len()
    }

    /// Load vector of `v ↦ ∫_{Γ2} g μ v` for Gauss-point values `μ`.
    pub fn boundary_vector(&self, mu: &[f64]) -> Vec<f64> {
        spmv(&self.boundary_coupling, mu)
    }
}

/// Element matrix of `∫ ∇φ_i·∇φ_j + φ_i φ_j`.
pub fn element_h1_matrix(mesh: &Mesh, k: usize) -> [[f64; 3]; 3] {
    let el = mesh.element(k);
    let g = el.grad_bary;
    std::array::from_fn(|i| {
        std::array::from_fn(|j| {
            let stiff = el.area * (g[i][0] * g[j][0] + g[i][1] * g[j][1]);
            let mass = el.area / 12.0 * if i == j { 2.0 } else { 1.0 };
            stiff + mass
        })
    })
}

/// Inverse of the P1 mass matrix `|K|/12 (1 + δ_ij)`.
pub fn element_mass_inverse(area: f64) -> [[f64; 3]; 3] {
    let s = 3.0 / area;
    std::array::from_fn(|i| std::array::from_fn(|j| if i == j { 3.0 * s } else { -s }))
}

fn volume_matrix(mesh: &Mesh) -> SpMat {
    let n = 3 * mesh.num_elements();
    let mut b = TripletBuilder::with_capacity(n, n, 9 * mesh.num_elements());
    for k in 0..mesh.num_elements() {
        let a = element_h1_matrix(mesh, k);
        for i in 0..3 {
            for j in 0..3 {
                b.add(3 * k + i, 3 * k + j, a[i][j]);
            }
        }
    }
    b.build()
}

/// Broken `H¹` inner-product matrix (block diagonal).
pub fn energy_matrix(mesh: &Mesh) -> SpMat {
    volume_matrix(mesh)
}

/// Assembles the form term by term.
pub fn assemble_form(mesh: &Mesh, config: &LdgConfig) -> Result<FormParts> {
    config.validate(mesh)?;
    let ne = mesh.num_elements();
    let n = 3 * ne;
    let mut cons = TripletBuilder::new(n, n);
    let mut bflux = TripletBuilder::new(n, n);
    let mut pen = TripletBuilder::new(n, n);

    for (f, face) in mesh.faces().iter().enumerate() {
        if !face.kind.not_on_friction() {
            continue;
        }
        let nrm = face.normal;
        let w_avg = face.average_weight();
        let eta_h = config.eta(f) / face.length;
        let beta = config.beta(f);
        let beta_n = beta[0] * nrm[0] + beta[1] * nrm[1];
        let sides: Vec<_> = face.sides().collect();
        for s in &sides {
            for t in &sides {
                let grad_t = mesh.element(t.element).grad_bary;
                for i in 0..3 {
                    for j in 0..3 {
                        // ∫_e φ_{s,i} φ_{t,j}
                        let mut phiphi = 0.0;
                        // ∫_e φ_{s,i}
                        let mut phi = 0.0;
                        for q in 0..EDGE_POINTS_PER_FACE {
                            let bs = face.bary(s, q);
                            let bt = face.bary(t, q);
                            let w = face.quad[q].weight;
                            phiphi += w * bs[i] * bt[j];
                            phi += w * bs[i];
                        }
                        let dn = nrm[0] * grad_t[j][0] + nrm[1] * grad_t[j][1];
                        let (a, b) = (3 * s.element + i, 3 * t.element + j);
                        // −∫ [φ_a]·{∇φ_b} and its transpose
                        let c = -phi * s.sign * w_avg * dn;
                        cons.add(b, a, c);
                        cons.add(a, b, c);
                        if face.is_interior() && beta_n != 0.0 {
                            // −∫ β·[φ_a] [∇φ_b]
                            let d = -phi * s.sign * beta_n * t.sign * dn;
                            bflux.add(b, a, d);
                            bflux.add(a, b, d);
                        }
                        pen.add(a, b, eta_h * s.sign * t.sign * phiphi);
                    }
                }
            }
        }
    }

    Ok(FormParts {
        volume: volume_matrix(mesh),
        consistency: cons.build(),
        beta_flux: bflux.build(),
        stabilization: stabilization_matrix(mesh, config),
        penalty: pen.build(),
    })
}

/// Lifted jump data on one triangle: for each trial dof, the six moments
/// `b_{(c,j)} = ∫ (r0 + l)(φ)·e_c φ_j` over the triangle.
fn element_lift_rows(mesh: &Mesh, config: &LdgConfig, k: usize) -> Vec<(usize, [f64; 6])> {
    let mut rows: Vec<(usize, [f64; 6])> = Vec::new();
    let mut add = |dof: usize, c: usize, j: usize, v: f64| {
        if let Some(r) = rows.iter_mut().find(|r| r.0 == dof) {
            r.1[3 * c + j] += v;
        } else {
            let mut a = [0.0; 6];
            a[3 * c + j] = v;
            rows.push((dof, a));
        }
    };
    for &f in mesh.element_faces(k) {
        let face = mesh.face(f);
        if !face.kind.not_on_friction() {
            continue;
        }
        let nrm = face.normal;
        let w_avg = face.average_weight();
        let beta = config.beta(f);
        let beta_n = beta[0] * nrm[0] + beta[1] * nrm[1];
        let t = face.sides().find(|s| s.element == k).expect("face of element");
        for s in face.sides() {
            for i in 0..3 {
                for j in 0..3 {
                    let mut m = 0.0;
                    for q in 0..EDGE_POINTS_PER_FACE {
                        m += face.quad[q].weight * face.bary(&s, q)[i] * face.bary(&t, q)[j];
                    }
                    for c in 0..2 {
                        // r0: −∫ [u]_c {w}; l: −∫ β·[u] [w]
                        let mut v = -m * s.sign * nrm[c] * w_avg;
                        if face.is_interior() {
                            v -= m * s.sign * beta_n * t.sign * nrm[c];
                        }
                        add(3 * s.element + i, c, j, v);
                    }
                }
            }
        }
    }
    rows
}

fn stabilization_matrix(mesh: &Mesh, config: &LdgConfig) -> SpMat {
    let n = 3 * mesh.num_elements();
    let mut b = TripletBuilder::new(n, n);
    for k in 0..mesh.num_elements() {
        let minv = element_mass_inverse(mesh.element(k).area);
        let rows = element_lift_rows(mesh, config, k);
        let lifted: Vec<[f64; 6]> = rows
            .iter()
            .map(|(_, r)| {
                let mut x = [0.0; 6];
                for c in 0..2 {
                    for i in 0..3 {
                        x[3 * c + i] = (0..3).map(|j| minv[i][j] * r[3 * c + j]).sum();
                    }
                }
                x
            })
            .collect();
        for (ra, (da, _)) in rows.iter().enumerate() {
            for (rb, (db, vb)) in rows.iter().enumerate() {
                let _ = rb;
                let v: f64 = (0..6).map(|m| lifted[ra][m] * vb[m]).sum();
                b.add(*da, *db, v);
            }
        }
    }
    b.build()
}

/// `(f, φ)` for every basis function, by the degree-4 rule.
pub fn load_vector(mesh: &Mesh, f: &dyn Fn(Point) -> f64) -> Vec<f64> {
    let mut out = vec![0.0; 3 * mesh.num_elements()];
    for k in 0..mesh.num_elements() {
        let area = mesh.element(k).area;
        for (b, w) in TRIANGLE.iter() {
            let fx = w * area * f(mesh.point(k, b));
            for j in 0..3 {
                out[3 * k + j] += fx * b[j];
            }
        }
    }
    out
}

/// Trace operator at the Γ2 quadrature points and the matching weights.
pub fn friction_trace(mesh: &Mesh) -> (SpMat, Vec<f64>) {
    let ff = mesh.friction_faces();
    let np = EDGE_POINTS_PER_FACE * ff.len();
    let mut t = TripletBuilder::with_capacity(np, 3 * mesh.num_elements(), 3 * np);
    let mut weights = Vec::with_capacity(np);
    for (i, &f) in ff.iter().enumerate() {
        let face = mesh.face(f);
        for q in 0..EDGE_POINTS_PER_FACE {
            for j in 0..3 {
                t.add(EDGE_POINTS_PER_FACE * i + q, 3 * face.plus + j, face.quad[q].bary_plus[j]);
            }
            weights.push(face.quad[q].weight);
        }
    }
    (t.build(), weights)
}

/// Assembles the full system for source `f` and friction bound `g`.
pub fn assemble(mesh: &Mesh, config: &LdgConfig, f: &dyn Fn(Point) -> f64, g: f64) -> Result<AssembledSystem> {
    if !(g > 0.0 && g.is_finite()) {
        return Err(Error::Config(format!("friction bound g must be positive, got {g}")));
    }
    let stiffness = assemble_form(mesh, config)?.total();
    let (trace, weights) = friction_trace(mesh);
    let mut gb = TripletBuilder::with_capacity(trace.ncols(), trace.nrows(), trace.val().len());
    let (ptr, rows, vals) = (trace.col_ptr(), trace.row_idx(), trace.val());
    for col in 0..trace.ncols() {
        for idx in ptr[col]..ptr[col + 1] {
            let r = rows[idx];
            gb.add(col, r, g * weights[r] * vals[idx]);
        }
    }
    Ok(AssembledSystem {
        stiffness,
        load: load_vector(mesh, f),
        boundary_coupling: gb.build(),
        trace,
        weights,
        g,
        energy_matrix: energy_matrix(mesh),
    })
}

/// Vector of `v ↦ ∫_{Γ2} g λ v` for a multiplier on `mesh`.
pub fn boundary_functional(mesh: &Mesh, g: f64, lambda: &Multiplier) -> Vec<f64> {
    let mut out = vec![0.0; 3 * mesh.num_elements()];
    for (i, &f) in mesh.friction_faces().iter().enumerate() {
        let face = mesh.face(f);
        for q in 0..EDGE_POINTS_PER_FACE {
            let s = g * face.quad[q].weight * lambda.values[EDGE_POINTS_PER_FACE * i + q];
            for j in 0..3 {
                out[3 * face.plus + j] += s * face.quad[q].bary_plus[j];
            }
        }
    }
    out
}

/// Lifting operators as global matrices.
///
/// Edge data on `E_h^0` are vector-valued P1 functions on each face, with
/// coefficient `4p + 2·node + comp` for face `e0_faces[p]`, where `node`
/// indexes `face.vertices`. Edge data on `E_h^i` are scalar P1, coefficient
/// `2p + node` for face `ei_faces[p]`. Vector fields use the
/// [`BrokenVectorField`](crate::dg_space::BrokenVectorField) layout.
#[derive(Debug, Clone)]
pub struct Liftings {
    pub e0_faces: Vec<usize>,
    pub ei_faces: Vec<usize>,
    /// `r0`: edge data on `E_h^0` → broken vector field.
    pub r0: SpMat,
    /// `l`: edge data on `E_h^i` → broken vector field.
    pub l: SpMat,
    /// `u ↦ [u]` sampled at the face endpoints.
    pub jump0: SpMat,
    /// `u ↦ β·[u]` sampled at the face endpoints of interior faces.
    pub jump_beta: SpMat,
    /// Mass matrix of the broken vector space.
    pub mass: SpMat,
}

/// P1 hat functions of the face parameter at quadrature point `q`.
fn face_hat(q: usize) -> [f64; 2] {
    let t = EDGE.points[q];
    [1.0 - t, t]
}

pub fn build_liftings(mesh: &Mesh, config: &LdgConfig) -> Result<Liftings> {
    config.validate(mesh)?;
    let ne = mesh.num_elements();
    let e0_faces: Vec<usize> = (0..mesh.faces().len())
        .filter(|&f| mesh.face(f).kind.not_on_friction())
        .collect();
    let ei_faces: Vec<usize> = mesh.faces_of_kind(FaceKind::Interior).collect();
    let mut ei_index = vec![usize::MAX; mesh.faces().len()];
    for (p, &f) in ei_faces.iter().enumerate() {
        ei_index[f] = p;
    }

    let mut r0 = TripletBuilder::new(6 * ne, 4 * e0_faces.len());
    let mut l = TripletBuilder::new(6 * ne, 2 * ei_faces.len());
    let mut j0 = TripletBuilder::new(4 * e0_faces.len(), 3 * ne);
    let mut jb = TripletBuilder::new(2 * ei_faces.len(), 3 * ne);
    let mut mass = TripletBuilder::new(6 * ne, 6 * ne);

    for k in 0..ne {
        let area = mesh.element(k).area;
        for c in 0..2 {
            for i in 0..3 {
                for j in 0..3 {
                    let m = area / 12.0 * if i == j { 2.0 } else { 1.0 };
                    mass.add(6 * k + 3 * c + i, 6 * k + 3 * c + j, m);
                }
            }
        }
    }

    for (p, &f) in e0_faces.iter().enumerate() {
        let face = mesh.face(f);
        let nrm = face.normal;
        let beta = config.beta(f);
        let beta_n = beta[0] * nrm[0] + beta[1] * nrm[1];
        let ends = face.vertices.map(|v| mesh.vertices()[v]);
        for t in face.sides() {
            let k = t.element;
            let minv = element_mass_inverse(mesh.element(k).area);
            // C_{(c,j),node} = −∫ μ_node φ_{K,j} (scaled per component below)
            let mut moments = [[0.0; 2]; 3];
            for q in 0..EDGE_POINTS_PER_FACE {
                let mu = face_hat(q);
                let b = face.bary(&t, q);
                for j in 0..3 {
                    for node in 0..2 {
                        moments[j][node] -= face.quad[q].weight * mu[node] * b[j];
                    }
                }
            }
            for i in 0..3 {
                for node in 0..2 {
                    let val: f64 = (0..3).map(|j| minv[i][j] * moments[j][node]).sum();
                    for c in 0..2 {
                        r0.add(6 * k + 3 * c + i, 4 * p + 2 * node + c, face.average_weight() * val);
                        if face.is_interior() {
                            l.add(6 * k + 3 * c + i, 2 * ei_index[f] + node, t.sign * nrm[c] * val);
                        }
                    }
                }
            }
            for (node, x) in ends.iter().enumerate() {
                let b = mesh.barycentric(k, *x);
                for i in 0..3 {
                    for c in 0..2 {
                        j0.add(4 * p + 2 * node + c, 3 * k + i, t.sign * b[i] * nrm[c]);
                    }
                    if face.is_interior() {
                        jb.add(2 * ei_index[f] + node, 3 * k + i, t.sign * b[i] * beta_n);
                    }
                }
            }
        }
    }

    Ok(Liftings {
        e0_faces,
        ei_faces,
        r0: r0.build(),
        l: l.build(),
        jump0: j0.build(),
        jump_beta: jb.build(),
        mass: mass.build(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dg_space::{BrokenField, BrokenVectorField};
    use crate::linalg::{dot, max_abs, max_asymmetry, quadratic_form, spmv_transpose, to_dense};
    use crate::mesh::{load_mesh, unit_square_bottom_friction};
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const SQUARE2: &str = "dgmesh 1\nvertices 4\n0 0\n1 0\n1 1\n0 1\ntriangles 2\n0 1 2\n0 2 3\nboundary 4\n0 1 G2\n1 2 G1\n2 3 G1\n3 0 G1\n";

    fn dense(m: &SpMat) -> DMatrix<f64> {
        let d = to_dense(m);
        DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| d[i][j])
    }

    fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    fn meshes() -> Vec<Mesh> {
        let sq = unit_square_bottom_friction(3).unwrap();
        vec![load_mesh(SQUARE2).unwrap(), sq.refine(&[2, 9]), crate::mesh::l_shape().unwrap()]
    }

    fn configs(mesh: &Mesh) -> Vec<LdgConfig> {
        let nf = mesh.faces().len();
        vec![
            LdgConfig::default(),
            LdgConfig {
                penalty: Penalty::PerFace((0..nf).map(|f| 1.0 + f as f64 * 0.25).collect()),
                beta: Beta::PerFace((0..nf).map(|f| [0.3 - 0.1 * f as f64, 0.5]).collect()),
            },
        ]
    }

    #[test]
    fn symmetric_and_positive_definite() {
        for m in meshes() {
            for cfg in configs(&m) {
                let a = assemble_form(&m, &cfg).unwrap().total();
                assert!(max_asymmetry(&a) <= 1e-12 * max_abs(&a));
                let eig = dense(&a).symmetric_eigen();
                let min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
                assert!(min > 0.0, "smallest eigenvalue {min}");
            }
        }
    }

    #[test]
    fn conforming_fields_see_only_the_volume_term() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for m in meshes() {
            let d = m.dirichlet_vertices();
            for cfg in configs(&m) {
                let parts = assemble_form(&m, &cfg).unwrap();
                let mut conforming = || {
                    let mut nodal: Vec<f64> = (0..m.vertices().len())
                        .map(|v| if d.contains(&v) { 0.0 } else { rng.random_range(-1.0..1.0) })
                        .collect();
                    // hanging nodes follow their coarse edge
                    for (&h, &(a, b)) in m.hanging_nodes() {
                        nodal[h] = 0.5 * (nodal[a] + nodal[b]);
                    }
                    crate::dg_space::NodalField { values: nodal }.to_broken(&m)
                };
                for _ in 0..5 {
                    let v = conforming();
                    let w = conforming();
                    let scale = quadratic_form(&parts.volume, &v.coeffs).sqrt() * quadratic_form(&parts.volume, &w.coeffs).sqrt();
                    for p in [&parts.consistency, &parts.beta_flux, &parts.stabilization, &parts.penalty] {
                        let b = dot(&w.coeffs, &spmv(p, &v.coeffs));
                        assert!(b.abs() <= 1e-12 * scale, "{b}");
                    }
                }
            }
        }
    }

    #[test]
    fn constant_one_sees_only_the_mass() {
        let m = unit_square_bottom_friction(4).unwrap();
        let a = assemble_form(&m, &LdgConfig::default()).unwrap();
        let one = BrokenField::interpolate(&m, |_| 1.0);
        assert!((quadratic_form(&a.volume, &one.coeffs) - 1.0).abs() < 1e-13);
        assert!((quadratic_form(&a.consistency, &one.coeffs)).abs() < 1e-13);
    }

    /// Dense oracle on the 2-triangle square, built from closed-form edge
    /// integrals instead of quadrature and from a 6×6 lifting solve.
    #[test]
    fn two_triangle_matrix_matches_dense_oracle() {
        let m = load_mesh(SQUARE2).unwrap();
        let a = dense(&assemble_form(&m, &LdgConfig::default()).unwrap().total());

        // basis φ_{K,j} = a + b x + c y from the vertex coordinates
        let tris = [[[0.0, 0.0], [1.0, 0.0], [1.0, 1.0]], [[0.0, 0.0], [1.0, 1.0], [0.0, 1.0]]];
        let coef = |k: usize, j: usize| -> [f64; 3] {
            let p = tris[k];
            let v = DMatrix::from_fn(3, 3, |r, c| if c == 0 { 1.0 } else { p[r][c - 1] });
            let inv = v.try_inverse().unwrap();
            [inv[(0, j)], inv[(1, j)], inv[(2, j)]]
        };
        let phi = |k: usize, j: usize, x: [f64; 2]| {
            let c = coef(k, j);
            c[0] + c[1] * x[0] + c[2] * x[1]
        };
        let grad = |k: usize, j: usize| {
            let c = coef(k, j);
            [c[1], c[2]]
        };
        // edges as (start, end, elements with outward sign, kind is E0)
        struct Edge {
            a: [f64; 2],
            b: [f64; 2],
            n: [f64; 2],
            sides: Vec<(usize, f64)>,
        }
        let s = 0.5f64.sqrt();
        let edges = [
            Edge { a: [0.0, 0.0], b: [1.0, 1.0], n: [-s, s], sides: vec![(0, 1.0), (1, -1.0)] },
            Edge { a: [1.0, 0.0], b: [1.0, 1.0], n: [1.0, 0.0], sides: vec![(0, 1.0)] },
            Edge { a: [1.0, 1.0], b: [0.0, 1.0], n: [0.0, 1.0], sides: vec![(1, 1.0)] },
            Edge { a: [0.0, 1.0], b: [0.0, 0.0], n: [-1.0, 0.0], sides: vec![(1, 1.0)] },
        ];
        // exact ∫_e p q for linear p, q via Simpson
        let int = |e: &Edge, f: &dyn Fn([f64; 2]) -> f64| {
            let len = (e.b[0] - e.a[0]).hypot(e.b[1] - e.a[1]);
            let mid = [0.5 * (e.a[0] + e.b[0]), 0.5 * (e.a[1] + e.b[1])];
            len / 6.0 * (f(e.a) + 4.0 * f(mid) + f(e.b))
        };
        let mut oracle = DMatrix::<f64>::zeros(6, 6);
        // volume
        for k in 0..2 {
            let area = 0.5;
            for i in 0..3 {
                for j in 0..3 {
                    let (gi, gj) = (grad(k, i), grad(k, j));
                    oracle[(3 * k + i, 3 * k + j)] +=
                        area * (gi[0] * gj[0] + gi[1] * gj[1]) + area / 12.0 * if i == j { 2.0 } else { 1.0 };
                }
            }
        }
        // consistency + penalty
        for e in &edges {
            let len = (e.b[0] - e.a[0]).hypot(e.b[1] - e.a[1]);
            let avg = 1.0 / e.sides.len() as f64;
            for &(ks, ss) in &e.sides {
                for &(kt, st) in &e.sides {
                    for i in 0..3 {
                        for j in 0..3 {
                            let gj = grad(kt, j);
                            let dn = gj[0] * e.n[0] + gj[1] * e.n[1];
                            let c = -int(e, &|x| phi(ks, i, x)) * ss * avg * dn;
                            oracle[(3 * kt + j, 3 * ks + i)] += c;
                            oracle[(3 * ks + i, 3 * kt + j)] += c;
                            oracle[(3 * ks + i, 3 * kt + j)] +=
                                10.0 / len * ss * st * int(e, &|x| phi(ks, i, x) * phi(kt, j, x));
                        }
                    }
                }
            }
        }
        // lifting: solve M r = b per element and dof
        for k in 0..2 {
            let mk = DMatrix::from_fn(3, 3, |i, j| 0.5 / 12.0 * if i == j { 2.0 } else { 1.0 });
            let mut lifted = vec![DMatrix::<f64>::zeros(3, 2); 6];
            for dof in 0..6 {
                let (ks, i) = (dof / 3, dof % 3);
                let mut rhs = DMatrix::<f64>::zeros(3, 2);
                for e in &edges {
                    let Some(&(_, sk)) = e.sides.iter().find(|s| s.0 == k) else { continue };
                    let _ = sk;
                    let Some(&(_, ss)) = e.sides.iter().find(|s| s.0 == ks) else { continue };
                    let avg = 1.0 / e.sides.len() as f64;
                    for j in 0..3 {
                        for c in 0..2 {
                            rhs[(j, c)] -= int(e, &|x| phi(ks, i, x) * phi(k, j, x)) * ss * e.n[c] * avg;
                        }
                    }
                }
                lifted[dof] = mk.clone().lu().solve(&rhs).unwrap();
            }
            for p in 0..6 {
                for q in 0..6 {
                    oracle[(p, q)] += (lifted[p].transpose() * &mk * &lifted[q]).trace();
                }
            }
        }
        let diff = (&a - &oracle).abs().max();
        assert!(diff < 1e-12, "max deviation {diff}\n{a}\n{oracle}");
    }

    #[test]
    fn lifting_adjoint_identities() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for m in meshes() {
            for cfg in configs(&m) {
                let lift = build_liftings(&m, &cfg).unwrap();
                for _ in 0..10 {
                    let q = random_vec(&mut rng, lift.r0.ncols());
                    let v = random_vec(&mut rng, lift.l.ncols());
                    let w = BrokenVectorField::from_coeffs(&m, random_vec(&mut rng, 6 * m.num_elements()));
                    let r = BrokenVectorField::from_coeffs(&m, spmv(&lift.r0, &q));
                    let lv = BrokenVectorField::from_coeffs(&m, spmv(&lift.l, &v));
                    // −∫_{E0} q·{w}
                    let mut rhs_r = 0.0;
                    for (p, &f) in lift.e0_faces.iter().enumerate() {
                        let face = m.face(f);
                        let tr = w.jump_average(&m, f);
                        for qp in 0..EDGE_POINTS_PER_FACE {
                            let mu = face_hat(qp);
                            let qv = [
                                mu[0] * q[4 * p] + mu[1] * q[4 * p + 2],
                                mu[0] * q[4 * p + 1] + mu[1] * q[4 * p + 3],
                            ];
                            rhs_r -= face.quad[qp].weight * (qv[0] * tr[qp].average[0] + qv[1] * tr[qp].average[1]);
                        }
                    }
                    // −∫_{Ei} v [w]
                    let mut rhs_l = 0.0;
                    for (p, &f) in lift.ei_faces.iter().enumerate() {
                        let face = m.face(f);
                        let tr = w.jump_average(&m, f);
                        for qp in 0..EDGE_POINTS_PER_FACE {
                            let mu = face_hat(qp);
                            rhs_l -= face.quad[qp].weight * (mu[0] * v[2 * p] + mu[1] * v[2 * p + 1]) * tr[qp].jump;
                        }
                    }
                    let lhs_r = r.l2_inner(&m, &w);
                    let lhs_l = lv.l2_inner(&m, &w);
                    assert!((lhs_r - rhs_r).abs() <= 1e-12 * (1.0 + rhs_r.abs()), "{lhs_r} {rhs_r}");
                    assert!((lhs_l - rhs_l).abs() <= 1e-12 * (1.0 + rhs_l.abs()), "{lhs_l} {rhs_l}");
                }
                let zero = spmv(&lift.r0, &vec![0.0; lift.r0.ncols()]);
                assert!(zero.iter().all(|&x| x == 0.0));
            }
        }
    }

    #[test]
    fn lifting_of_single_interior_face_touches_two_triangles() {
        let m = unit_square_bottom_friction(3).unwrap();
        let lift = build_liftings(&m, &LdgConfig::default()).unwrap();
        let p = lift.e0_faces.iter().position(|&f| m.face(f).is_interior()).unwrap();
        let mut q = vec![0.0; lift.r0.ncols()];
        q[4 * p] = 1.0;
        q[4 * p + 3] = -2.0;
        let r = spmv(&lift.r0, &q);
        let support: Vec<usize> = (0..m.num_elements())
            .filter(|&k| r[6 * k..6 * k + 6].iter().any(|&x| x != 0.0))
            .collect();
        let face = m.face(lift.e0_faces[p]);
        assert_eq!(support, vec![face.plus, face.minus.unwrap()]);
    }

    #[test]
    fn stabilization_routes_agree() {
        for m in meshes() {
            for cfg in configs(&m) {
                let parts = assemble_form(&m, &cfg).unwrap();
                let lift = build_liftings(&m, &cfg).unwrap();
                let op = dense(&lift.r0) * dense(&lift.jump0) + dense(&lift.l) * dense(&lift.jump_beta);
                let s = op.transpose() * dense(&lift.mass) * &op;
                let diff = (&s - dense(&parts.stabilization)).abs().max();
                assert!(diff < 1e-10 * s.abs().max().max(1.0), "{diff}");
            }
        }
    }

    #[test]
    fn stencil_is_within_two_layers() {
        let m = unit_square_bottom_friction(4).unwrap().refine(&[5]);
        let cfg = &configs(&m)[1];
        let a = assemble_form(&m, cfg).unwrap().total();
        let ne = m.num_elements();
        let mut adj = vec![std::collections::BTreeSet::new(); ne];
        for f in m.faces() {
            if let Some(mi) = f.minus {
                adj[f.plus].insert(mi);
                adj[mi].insert(f.plus);
            }
        }
        let d = to_dense(&a);
        for k in 0..ne {
            let mut near: std::collections::BTreeSet<usize> = [k].into();
            for _ in 0..2 {
                let next: Vec<usize> = near.iter().flat_map(|&j| adj[j].iter().copied()).collect();
                near.extend(next);
            }
            for col in 0..3 * ne {
                if d[3 * k][col] != 0.0 {
                    assert!(near.contains(&(col / 3)));
                }
            }
        }
    }

    #[test]
    fn boundary_functional_examples() {
        let m = unit_square_bottom_friction(16).unwrap();
        let g = 0.7;
        let sys = assemble(&m, &LdgConfig::default(), &|_| 0.0, g).unwrap();
        let one = BrokenField::interpolate(&m, |_| 1.0);
        let np = sys.num_multiplier_points();
        let zero = Multiplier::zeros(&m, g);
        assert!(boundary_functional(&m, g, &zero).iter().all(|&x| x == 0.0));
        let ones = Multiplier { values: vec![1.0; np], g };
        assert!((dot(&boundary_functional(&m, g, &ones), &one.coeffs) - g).abs() < 1e-14);
        let mut sin = Multiplier::zeros(&m, g);
        for (i, &f) in m.friction_faces().iter().enumerate() {
            for q in 0..3 {
                sin.values[3 * i + q] = (std::f64::consts::PI * m.face(f).quad[q].x[0]).sin();
            }
        }
        let v = dot(&boundary_functional(&m, g, &sin), &one.coeffs);
        assert!((v - g * 2.0 / std::f64::consts::PI).abs() < 1e-6);
        let via_system = dot(&sys.boundary_vector(&sin.values), &one.coeffs);
        assert!((via_system - v).abs() < 1e-14);
        // Gᵀ applied to 1 is g times the trace weights
        let gt = spmv_transpose(&sys.boundary_coupling, &one.coeffs);
        for (a, w) in gt.iter().zip(&sys.weights) {
            assert!((a - g * w).abs() < 1e-15);
        }
    }

    #[test]
    fn nonpositive_penalty_is_rejected() {
        let m = load_mesh(SQUARE2).unwrap();
        let cfg = LdgConfig { penalty: Penalty::Uniform(0.0), ..LdgConfig::default() };
        assert!(matches!(assemble_form(&m, &cfg), Err(Error::Config(_))));
        assert!(matches!(assemble(&m, &LdgConfig::default(), &|_| 1.0, -1.0), Err(Error::Config(_))));
    }
}
