//! Broken P1 spaces on a [`Mesh`]: element-wise linear scalar and vector
//! fields, quadrature, traces, jumps and averages, and broken norms.
//!
//! Fields store nodal values per element corner: the scalar coefficient of
//! vertex `j` of triangle `K` is `coeffs[3K + j]`; vector fields use
//! `coeffs[6K + 3c + j]` for component `c`.

pub mod quadrature;

use crate::mesh::{Face, Mesh, Point};
use quadrature::{EDGE_POINTS_PER_FACE, TRIANGLE};

/// Element-wise linear scalar field.
#[derive(Debug, Clone, PartialEq)]
pub struct BrokenField {
    pub coeffs: Vec<f64>,
}

/// Element-wise linear vector field.
#[derive(Debug, Clone, PartialEq)]
pub struct BrokenVectorField {
    pub coeffs: Vec<f64>,
}

/// Continuous P1 field given by vertex values.
#[derive(Debug, Clone, PartialEq)]
pub struct NodalField {
    pub values: Vec<f64>,
}

/// Jump and average of a scalar field at one face quadrature point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarTrace {
    /// `[v] = v⁺n⁺ + v⁻n⁻`, or `v n` on the boundary.
    pub jump: Point,
    /// `{v}`
    pub average: f64,
}

/// Jump and average of a vector field at one face quadrature point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VectorTrace {
    /// `[q] = q⁺·n⁺ + q⁻·n⁻`, or `q·n` on the boundary.
    pub jump: f64,
    pub average: Point,
}

#[inline]
fn combine(b: &[f64; 3], c: &[f64]) -> f64 {
    b[0] * c[0] + b[1] * c[1] + b[2] * c[2]
}

impl BrokenField {
    pub fn zeros(mesh: &Mesh) -> Self {
        Self {
            coeffs: vec![0.0; 3 * mesh.num_elements()],
        }
    }

    pub fn from_coeffs(mesh: &Mesh, coeffs: Vec<f64>) -> Self {
        assert_eq!(coeffs.len(), 3 * mesh.num_elements(), "coefficient table length");
        Self { coeffs }
    }

    /// Element-wise nodal interpolant of `f`.
    pub fn interpolate(mesh: &Mesh, f: impl Fn(Point) -> f64) -> Self {
        let coeffs = mesh
            .elements()
            .iter()
            .flat_map(|el| el.vertices.map(|v| f(mesh.vertices()[v])))
            .collect();
        Self { coeffs }
    }

    /// Field equal to `values[k]` on triangle `k`.
    pub fn piecewise_constant(values: &[f64]) -> Self {
        Self {
            coeffs: values.iter().flat_map(|&v| [v, v, v]).collect(),
        }
    }

    pub fn local(&self, k: usize) -> &[f64] {
        &self.coeffs[3 * k..3 * k + 3]
    }

    pub fn eval(&self, k: usize, bary: &[f64; 3]) -> f64 {
        combine(bary, self.local(k))
    }

    pub fn eval_at(&self, mesh: &Mesh, k: usize, x: Point) -> f64 {
        self.eval(k, &mesh.barycentric(k, x))
    }

    pub fn gradient(&self, mesh: &Mesh, k: usize) -> Point {
        let g = mesh.element(k).grad_bary;
        let c = self.local(k);
        [
            c[0] * g[0][0] + c[1] * g[1][0] + c[2] * g[2][0],
            c[0] * g[0][1] + c[1] * g[1][1] + c[2] * g[2][1],
        ]
    }

    /// Broken gradient as a vector field (constant on each triangle).
    pub fn broken_gradient(&self, mesh: &Mesh) -> BrokenVectorField {
        let mut coeffs = Vec::with_capacity(6 * mesh.num_elements());
        for k in 0..mesh.num_elements() {
            let g = self.gradient(mesh, k);
            coeffs.extend_from_slice(&[g[0], g[0], g[0], g[1], g[1], g[1]]);
        }
        BrokenVectorField { coeffs }
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self {
            coeffs: self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a - b).collect(),
        }
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            coeffs: self.coeffs.iter().map(|a| s * a).collect(),
        }
    }

    /// Jumps and averages at the quadrature points of face `f`.
    ///
    /// On a face with a hanging node the coarse neighbor is evaluated by
    /// linear extension at the fine face's points, which is exact for P1.
    pub fn jump_average(&self, mesh: &Mesh, f: usize) -> [ScalarTrace; EDGE_POINTS_PER_FACE] {
        let face = mesh.face(f);
        std::array::from_fn(|q| {
            let n = face.normal;
            let mut jump = 0.0;
            let mut average = 0.0;
            for side in face.sides() {
                let v = self.eval(side.element, &face.bary(&side, q));
                jump += side.sign * v;
                average += face.average_weight() * v;
            }
            ScalarTrace {
                jump: [jump * n[0], jump * n[1]],
                average,
            }
        })
    }

    /// Scalar jump `v⁺ − v⁻` (or `v` on the boundary) at the face quadrature
    /// points, so that `[v] = jump · n`.
    pub fn scalar_jump(&self, mesh: &Mesh, f: usize) -> [f64; EDGE_POINTS_PER_FACE] {
        let face = mesh.face(f);
        std::array::from_fn(|q| {
            face.sides()
                .map(|s| s.sign * self.eval(s.element, &face.bary(&s, q)))
                .sum()
        })
    }

    /// Trace from the `plus` triangle at the face quadrature points.
    pub fn trace(&self, face: &Face) -> [f64; EDGE_POINTS_PER_FACE] {
        std::array::from_fn(|q| self.eval(face.plus, &face.quad[q].bary_plus))
    }

    /// Re-interpolation onto a refinement of `coarse`, using the genealogy
    /// stored in `fine`. Exact for P1.
    pub fn prolongate(&self, coarse: &Mesh, fine: &Mesh) -> Self {
        assert_eq!(self.coeffs.len(), 3 * coarse.num_elements());
        let parents = fine.parents();
        let mut coeffs = Vec::with_capacity(3 * fine.num_elements());
        for (k, el) in fine.elements().iter().enumerate() {
            let p = parents[k];
            for &v in &el.vertices {
                coeffs.push(self.eval_at(coarse, p, fine.vertices()[v]));
            }
        }
        Self { coeffs }
    }
}

impl BrokenVectorField {
    pub fn zeros(mesh: &Mesh) -> Self {
        Self {
            coeffs: vec![0.0; 6 * mesh.num_elements()],
        }
    }

    pub fn from_coeffs(mesh: &Mesh, coeffs: Vec<f64>) -> Self {
        assert_eq!(coeffs.len(), 6 * mesh.num_elements(), "coefficient table length");
        Self { coeffs }
    }

    pub fn interpolate(mesh: &Mesh, f: impl Fn(Point) -> Point) -> Self {
        let mut coeffs = Vec::with_capacity(6 * mesh.num_elements());
        for el in mesh.elements() {
            let vals = el.vertices.map(|v| f(mesh.vertices()[v]));
            for c in 0..2 {
                coeffs.extend(vals.iter().map(|p| p[c]));
            }
        }
        Self { coeffs }
    }

    pub fn eval(&self, k: usize, bary: &[f64; 3]) -> Point {
        let c = &self.coeffs[6 * k..6 * k + 6];
        [combine(bary, &c[0..3]), combine(bary, &c[3..6])]
    }

    /// Jumps and averages at the quadrature points of face `f`.
    pub fn jump_average(&self, mesh: &Mesh, f: usize) -> [VectorTrace; EDGE_POINTS_PER_FACE] {
        let face = mesh.face(f);
        std::array::from_fn(|q| {
            let n = face.normal;
            let mut jump = 0.0;
            let mut average = [0.0; 2];
            for side in face.sides() {
                let v = self.eval(side.element, &face.bary(&side, q));
                jump += side.sign * (v[0] * n[0] + v[1] * n[1]);
                average[0] += face.average_weight() * v[0];
                average[1] += face.average_weight() * v[1];
            }
            VectorTrace { jump, average }
        })
    }

    /// `∫_Ω p·q` (exact for P1 × P1).
    pub fn l2_inner(&self, mesh: &Mesh, other: &Self) -> f64 {
        (0..mesh.num_elements())
            .map(|k| {
                let a = mesh.element(k).area;
                (0..2)
                    .map(|c| {
                        let x = &self.coeffs[6 * k + 3 * c..6 * k + 3 * c + 3];
                        let y = &other.coeffs[6 * k + 3 * c..6 * k + 3 * c + 3];
                        mass_form(a, x, y)
                    })
                    .sum::<f64>()
            })
            .sum()
    }
}

impl NodalField {
    pub fn to_broken(&self, mesh: &Mesh) -> BrokenField {
        let coeffs = mesh
            .elements()
            .iter()
            .flat_map(|el| el.vertices.map(|v| self.values[v]))
            .collect();
        BrokenField { coeffs }
    }
}

/// `xᵀ M_K y` with the exact P1 mass matrix `|K|/12 (1 + δ_ij)`.
#[inline]
pub fn mass_form(area: f64, x: &[f64], y: &[f64]) -> f64 {
    let s = (x[0] + x[1] + x[2]) * (y[0] + y[1] + y[2]);
    area / 12.0 * (s + x[0] * y[0] + x[1] * y[1] + x[2] * y[2])
}

/// `∫_K f` with the degree-4 rule.
pub fn integrate_element(mesh: &Mesh, k: usize, f: impl Fn(Point) -> f64) -> f64 {
    let area = mesh.element(k).area;
    TRIANGLE
        .iter()
        .map(|(b, w)| w * f(mesh.point(k, b)))
        .sum::<f64>()
        * area
}

/// `∫_e f` with the 3-point Gauss rule.
pub fn integrate_edge(mesh: &Mesh, f: usize, g: impl Fn(Point) -> f64) -> f64 {
    mesh.face(f).quad.iter().map(|q| q.weight * g(q.x)).sum()
}

/// Broken norms `(‖v‖_{0,h}, |v|_{1,h}, ‖v‖_{1,h})`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BrokenNorms {
    pub l2: f64,
    pub h1_semi: f64,
    pub h1: f64,
}

impl BrokenNorms {
    fn from_squares(l2: f64, semi: f64) -> Self {
        Self {
            l2: l2.sqrt(),
            h1_semi: semi.sqrt(),
            h1: (l2 + semi).sqrt(),
        }
    }
}

/// Squared L² norm and H¹ seminorm of `v` on triangle `k`.
pub fn element_norms_sq(mesh: &Mesh, v: &BrokenField, k: usize) -> (f64, f64) {
    let c = v.local(k);
    let g = v.gradient(mesh, k);
    let area = mesh.element(k).area;
    (mass_form(area, c, c), area * (g[0] * g[0] + g[1] * g[1]))
}

pub fn broken_norms(mesh: &Mesh, v: &BrokenField) -> BrokenNorms {
    broken_norms_on(mesh, v, 0..mesh.num_elements())
}

/// Broken norms restricted to a set of triangles.
pub fn broken_norms_on(
    mesh: &Mesh,
    v: &BrokenField,
    elements: impl IntoIterator<Item = usize>,
) -> BrokenNorms {
    let (mut l2, mut semi) = (0.0, 0.0);
    for k in elements {
        let (a, b) = element_norms_sq(mesh, v, k);
        l2 += a;
        semi += b;
    }
    BrokenNorms::from_squares(l2, semi)
}

/// Smooth function with its gradient, used as an exact solution.
pub trait ExactField: Sync {
    fn value(&self, x: Point) -> f64;
    fn gradient(&self, x: Point) -> Point;
}

impl<F, G> ExactField for (F, G)
where
    F: Fn(Point) -> f64 + Sync,
    G: Fn(Point) -> Point + Sync,
{
    fn value(&self, x: Point) -> f64 {
        (self.0)(x)
    }
    fn gradient(&self, x: Point) -> Point {
        (self.1)(x)
    }
}

/// Per-element squared `H¹` distance `‖u − v‖²_{1,K}` to a smooth field,
/// by the degree-4 rule.
pub fn element_h1_distance_sq(mesh: &Mesh, v: &BrokenField, u: &dyn ExactField, k: usize) -> f64 {
    let gv = v.gradient(mesh, k);
    let area = mesh.element(k).area;
    TRIANGLE
        .iter()
        .map(|(b, w)| {
            let x = mesh.point(k, b);
            let d = u.value(x) - v.eval(k, b);
            let gu = u.gradient(x);
            let (dx, dy) = (gu[0] - gv[0], gu[1] - gv[1]);
            w * (d * d + dx * dx + dy * dy)
        })
        .sum::<f64>()
        * area
}

/// `‖u − v‖_{1,h}` for a smooth `u`.
pub fn broken_h1_distance(mesh: &Mesh, v: &BrokenField, u: &dyn ExactField) -> f64 {
    (0..mesh.num_elements())
        .map(|k| element_h1_distance_sq(mesh, v, u, k))
        .sum::<f64>()
        .sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{load_mesh, unit_square_bottom_friction, FaceKind};

    const SQUARE2: &str = "dgmesh 1\nvertices 4\n0 0\n1 0\n1 1\n0 1\ntriangles 2\n0 1 2\n0 2 3\nboundary 4\n0 1 G2\n1 2 G1\n2 3 G1\n3 0 G1\n";
    const RIGHT: &str = "dgmesh 1\nvertices 3\n0 0\n1 0\n0 1\ntriangles 1\n0 1 2\nboundary 3\n0 1 G2\n1 2 G1\n2 0 G1\n";

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn continuous_field_has_zero_jumps() {
        let m = unit_square_bottom_friction(3).unwrap().refine(&[0, 5]);
        let v = BrokenField::interpolate(&m, |x| 1.0 + 2.0 * x[0] - x[1]);
        for f in 0..m.faces().len() {
            if m.face(f).kind != FaceKind::Interior {
                continue;
            }
            for (t, q) in v.jump_average(&m, f).iter().zip(&m.face(f).quad) {
                assert!(t.jump[0].abs() < 1e-14 && t.jump[1].abs() < 1e-14);
                assert!(close(t.average, 1.0 + 2.0 * q.x[0] - q.x[1], 1e-14));
            }
        }
    }

    #[test]
    fn indicator_field_jump_is_the_normal() {
        let m = load_mesh(SQUARE2).unwrap();
        let v = BrokenField::piecewise_constant(&[1.0, 0.0]);
        let diag = m.faces().iter().position(|f| f.is_interior()).unwrap();
        let n = m.face(diag).normal;
        for t in v.jump_average(&m, diag) {
            assert!(close(t.jump[0], n[0], 1e-15) && close(t.jump[1], n[1], 1e-15));
            assert!(close(t.average, 0.5, 1e-15));
        }
        // boundary convention
        let bottom = m.faces().iter().position(|f| f.kind == FaceKind::Friction).unwrap();
        for t in v.jump_average(&m, bottom) {
            assert_eq!(t.jump, [0.0, -1.0]);
            assert_eq!(t.average, 1.0);
        }
    }

    #[test]
    fn jump_of_x_against_2x_on_the_diagonal() {
        // K⁺ = (0,0),(1,0),(1,1) holds x, K⁻ = (0,0),(1,1),(0,1) holds 2x;
        // |[v]| = |x − 2x| = x at each point of the diagonal y = x.
        let m = load_mesh(SQUARE2).unwrap();
        let mut v = BrokenField::interpolate(&m, |x| x[0]);
        for c in &mut v.coeffs[3..6] {
            *c *= 2.0;
        }
        let diag = m.faces().iter().position(|f| f.is_interior()).unwrap();
        for (t, q) in v.jump_average(&m, diag).iter().zip(&m.face(diag).quad) {
            assert!(close(t.jump[0].hypot(t.jump[1]), q.x[0], 1e-15));
            assert!(close(t.average, 1.5 * q.x[0], 1e-15));
        }
    }

    #[test]
    fn vector_jump_of_the_normal_field() {
        let m = load_mesh(SQUARE2).unwrap();
        let diag = m.faces().iter().position(|f| f.is_interior()).unwrap();
        let n = m.face(diag).normal;
        let mut q = BrokenVectorField::zeros(&m);
        for j in 0..3 {
            q.coeffs[j] = n[0];
            q.coeffs[3 + j] = n[1];
        }
        for t in q.jump_average(&m, diag) {
            assert!(close(t.jump, 1.0, 1e-15));
            assert!(close(t.average[0], 0.5 * n[0], 1e-15));
        }
    }

    #[test]
    fn element_and_edge_integrals() {
        let m = load_mesh(RIGHT).unwrap();
        assert!(close(integrate_element(&m, 0, |_| 1.0), 0.5, 1e-15));
        assert!(close(integrate_element(&m, 0, |x| x[0] * x[0] * x[1] * x[1]), 1.0 / 180.0, 1e-15));
        let hyp = m.faces().iter().position(|f| f.vertices == [1, 2]).unwrap();
        assert!(close(integrate_edge(&m, hyp, |_| 1.0), 2f64.sqrt(), 1e-15));
        // ∫ x² along the hypotenuse x = 1 − t, t ∈ [0,1]: √2/3
        assert!(close(integrate_edge(&m, hyp, |x| x[0] * x[0]), 2f64.sqrt() / 3.0, 1e-15));
    }

    #[test]
    fn norms_of_simple_fields() {
        let m = unit_square_bottom_friction(4).unwrap().refine(&[3, 7]);
        let z = broken_norms(&m, &BrokenField::zeros(&m));
        assert_eq!((z.l2, z.h1_semi, z.h1), (0.0, 0.0, 0.0));
        let one = broken_norms(&m, &BrokenField::interpolate(&m, |_| 1.0));
        assert!(close(one.l2, 1.0, 1e-14) && one.h1_semi == 0.0 && close(one.h1, 1.0, 1e-14));
        let x = broken_norms(&m, &BrokenField::interpolate(&m, |p| p[0]));
        assert!(close(x.l2, 1.0 / 3f64.sqrt(), 1e-14));
        assert!(close(x.h1_semi, 1.0, 1e-14));
        assert!(close(x.h1 * x.h1, x.l2 * x.l2 + x.h1_semi * x.h1_semi, 1e-15));
    }

    #[test]
    fn prolongation_reproduces_the_field() {
        let m = unit_square_bottom_friction(2).unwrap();
        let mut v = BrokenField::zeros(&m);
        for (i, c) in v.coeffs.iter_mut().enumerate() {
            *c = ((i * 37) % 11) as f64 - 5.0;
        }
        let fine = m.refine(&[1, 2, 6]);
        let w = v.prolongate(&m, &fine);
        for (k, &p) in fine.parents().iter().enumerate() {
            for b in &TRIANGLE_POINTS_FOR_TEST {
                let x = fine.point(k, b);
                assert!(close(w.eval(k, b), v.eval_at(&m, p, x), 1e-13));
            }
        }
        let d = broken_norms(&fine, &w.sub(&w));
        assert_eq!(d.h1, 0.0);
        // norms agree because the spaces are nested
        assert!(close(broken_norms(&m, &v).h1, broken_norms(&fine, &w).h1, 1e-12));
    }

    const TRIANGLE_POINTS_FOR_TEST: [[f64; 3]; 3] = [[0.2, 0.3, 0.5], [1.0 / 3.0; 3], [0.7, 0.1, 0.2]];

    #[test]
    fn exact_distance_matches_closed_form() {
        let m = unit_square_bottom_friction(3).unwrap();
        let v = BrokenField::zeros(&m);
        let u = (|x: Point| x[0], |_: Point| [1.0, 0.0]);
        assert!(close(broken_h1_distance(&m, &v, &u), (1.0 / 3.0 + 1.0f64).sqrt(), 1e-14));
    }
}
