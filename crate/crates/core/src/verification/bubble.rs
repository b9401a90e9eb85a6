//! Element and edge bubbles and the constants of their norm equivalences
//! on P1 functions.
//!
//! With `φ_K = 27λ₁λ₂λ₃` and `τ_e = 4λ₂λ₃` (the edge opposite vertex 1):
//!
//! * `∫_K φ_K v² / ‖v‖²_K`, extreme values over `P1(K)`;
//! * `(‖φ_K v‖_K + h_K |φ_K v|_{1,K}) / ‖v‖_K`, maximum over `P1(K)`;
//! * `∫_e τ_e v² / ‖v‖²_e`, extreme values over `P1(e)`;
//! * `(h_e^{-1/2} ‖τ_e Ev‖_K + h_e^{1/2} |τ_e Ev|_{1,K}) / ‖v‖_e`, maximum
//!   over `P1(e)`.
//!
//! `Ev` extends `v` constantly along the median through vertex 1, i.e.
//! `E(aλ₂ + bλ₃) = a(λ₂ + λ₁/2) + b(λ₃ + λ₁/2)`. The quadratic ratios are
//! generalized eigenvalues; the sums of norms are maximized by dense
//! sampling of the unit sphere of the denominator.

use nalgebra::{DMatrix, DVector};
use std::f64::consts::PI;

use crate::mesh::Point;

/// `∫_K λ₁^a λ₂^b λ₃^c = 2|K| a! b! c! / (a + b + c + 2)!`.
pub fn bary_moment(area: f64, alpha: [u32; 3]) -> f64 {
    let fact = |n: u32| (1..=n).map(f64::from).product::<f64>();
    2.0 * area * fact(alpha[0]) * fact(alpha[1]) * fact(alpha[2]) / fact(alpha[0] + alpha[1] + alpha[2] + 2)
}

/// Gauss–Legendre nodes and weights on `[0, 1]`.
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    (0..n)
        .map(|i| {
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=n {
                    let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            (0.5 * (1.0 - x), 0.5 * w)
        })
        .collect()
}

/// Collapsed tensor Gauss rule on a triangle: barycentric points and
/// weights summing to 1. Exact for degree `2n − 2`.
pub fn triangle_rule(n: usize) -> Vec<([f64; 3], f64)> {
    let gl = gauss_legendre(n);
    let mut out = Vec::with_capacity(n * n);
    for &(s, ws) in &gl {
        for &(t, wt) in &gl {
            let l2 = s;
            let l3 = t * (1.0 - s);
            out.push(([1.0 - l2 - l3, l2, l3], 2.0 * ws * wt * (1.0 - s)));
        }
    }
    out
}

/// Triangle geometry for the bubble computations.
#[derive(Debug, Clone, Copy)]
struct Geometry {
    area: f64,
    diameter: f64,
    edge_length: f64,
    grad: [Point; 3],
}

impl Geometry {
    fn new(p: [Point; 3]) -> Self {
        let d = |a: Point, b: Point| ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
        let det = (p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]);
        assert!(det > 0.0, "triangle must be counter-clockwise");
        let grad = std::array::from_fn(|i| {
            let (b, c) = (p[(i + 1) % 3], p[(i + 2) % 3]);
            [(b[1] - c[1]) / det, (c[0] - b[0]) / det]
        });
        Self {
            area: 0.5 * det,
            diameter: d(p[0], p[1]).max(d(p[1], p[2])).max(d(p[2], p[0])),
            edge_length: d(p[1], p[2]),
            grad,
        }
    }
}

fn add(a: Point, b: Point, s: f64) -> Point {
    [a[0] + s * b[0], a[1] + s * b[1]]
}

fn element_bubble(l: &[f64; 3], g: &[Point; 3]) -> (f64, Point) {
    let v = 27.0 * l[0] * l[1] * l[2];
    let mut d = [0.0; 2];
    d = add(d, g[0], 27.0 * l[1] * l[2]);
    d = add(d, g[1], 27.0 * l[0] * l[2]);
    d = add(d, g[2], 27.0 * l[0] * l[1]);
    (v, d)
}

fn edge_bubble(l: &[f64; 3], g: &[Point; 3]) -> (f64, Point) {
    let v = 4.0 * l[1] * l[2];
    (v, add([4.0 * l[2] * g[1][0], 4.0 * l[2] * g[1][1]], g[2], 4.0 * l[1]))
}

/// Gram matrices `∫ w ψ_i ψ_j` and `∫ ∇(bψ_i)·∇(bψ_j)` for a bubble `b` and
/// a P1 basis `ψ` given by barycentric coefficient rows.
fn bubble_grams(
    geo: &Geometry,
    basis: &[[f64; 3]],
    bubble: impl Fn(&[f64; 3], &[Point; 3]) -> (f64, Point),
    power: i32,
) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = basis.len();
    let mut weighted = DMatrix::zeros(n, n);
    let mut grad = DMatrix::zeros(n, n);
    let dpsi: Vec<Point> = basis
        .iter()
        .map(|c| (0..3).fold([0.0; 2], |acc, i| add(acc, geo.grad[i], c[i])))
        .collect();
    for (l, w) in triangle_rule(10) {
        let (b, db) = bubble(&l, &geo.grad);
        let psi: Vec<f64> = basis.iter().map(|c| c[0] * l[0] + c[1] * l[1] + c[2] * l[2]).collect();
        let dprod: Vec<Point> = (0..n).map(|i| add([db[0] * psi[i], db[1] * psi[i]], dpsi[i], b)).collect();
        for i in 0..n {
            for j in 0..n {
                weighted[(i, j)] += w * geo.area * b.powi(power) * psi[i] * psi[j];
                grad[(i, j)] += w * geo.area * (dprod[i][0] * dprod[j][0] + dprod[i][1] * dprod[j][1]);
            }
        }
    }
    (weighted, grad)
}

/// `(min, max)` of `xᵀAx / xᵀBx` for SPD `B`.
pub fn generalized_extremes(a: &DMatrix<f64>, b: &DMatrix<f64>) -> (f64, f64) {
    let l = b.clone().cholesky().expect("SPD denominator").l();
    let li = l.clone().try_inverse().expect("invertible factor");
    let c = &li * a * li.transpose();
    let c = (&c + c.transpose()) * 0.5;
    let e = c.symmetric_eigen().eigenvalues;
    (e.min(), e.max())
}

/// Unit vectors covering the sphere in dimension 2 or 3.
fn sphere(dim: usize, n: usize) -> Vec<DVector<f64>> {
    match dim {
        2 => (0..n)
            .map(|i| {
                let t = PI * i as f64 / n as f64;
                DVector::from_vec(vec![t.cos(), t.sin()])
            })
            .collect(),
        3 => {
            let golden = PI * (3.0 - 5f64.sqrt());
            (0..n)
                .map(|i| {
                    let z = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
                    let r = (1.0 - z * z).sqrt();
                    let t = golden * i as f64;
                    DVector::from_vec(vec![r * t.cos(), r * t.sin(), z])
                })
                .collect()
        }
        _ => unreachable!("only P1 on triangles and edges"),
    }
}

/// `max sqrt(xᵀAx) + s·sqrt(xᵀBx)` over `xᵀMx = 1`, by sampling.
fn sampled_max(a: &DMatrix<f64>, s: f64, b: &DMatrix<f64>, m: &DMatrix<f64>, samples: usize) -> f64 {
    let l = m.clone().cholesky().expect("SPD mass").l();
    let lt_inv = l.transpose().try_inverse().expect("invertible factor");
    sphere(m.nrows(), samples)
        .into_iter()
        .map(|w| {
            let x = &lt_inv * w;
            let qa = (x.transpose() * a * &x)[(0, 0)].max(0.0).sqrt();
            let qb = (x.transpose() * b * &x)[(0, 0)].max(0.0).sqrt();
            qa + s * qb
        })
        .fold(0.0, f64::max)
}

/// Measured constants of the bubble equivalences on one triangle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BubbleConstants {
    /// Extremes of `∫ φ_K v² / ‖v‖²_K`.
    pub element_weight: (f64, f64),
    /// Maximum of `(‖φ_K v‖ + h_K |φ_K v|_1) / ‖v‖_K`.
    pub element_norm: f64,
    /// Extremes of `∫_e τ_e v² / ‖v‖²_e`.
    pub edge_weight: (f64, f64),
    /// Maximum of `(h_e^{-1/2} ‖τ_e Ev‖_K + h_e^{1/2} |τ_e Ev|_{1,K}) / ‖v‖_e`.
    pub edge_extension: f64,
}

impl BubbleConstants {
    pub fn values(&self) -> [f64; 6] {
        [
            self.element_weight.0,
            self.element_weight.1,
            self.element_norm,
            self.edge_weight.0,
            self.edge_weight.1,
            self.edge_extension,
        ]
    }

    pub fn all_positive_finite(&self) -> bool {
        self.values().iter().all(|v| v.is_finite() && *v > 0.0)
    }
}

/// Bubble constants on the triangle with counter-clockwise vertices `p`;
/// the edge bubble lives on the edge `p[1] p[2]`.
pub fn bubble_constants(p: [Point; 3]) -> BubbleConstants {
    let geo = Geometry::new(p);
    let p1 = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    let mass = DMatrix::from_fn(3, 3, |i, j| geo.area / 12.0 * if i == j { 2.0 } else { 1.0 });
    let (phi_w, _) = bubble_grams(&geo, &p1, element_bubble, 1);
    let (phi_sq, phi_grad) = bubble_grams(&geo, &p1, element_bubble, 2);
    let element_weight = generalized_extremes(&phi_w, &mass);
    let element_norm = sampled_max(&phi_sq, geo.diameter, &phi_grad, &mass, 20_000);

    let he = geo.edge_length;
    let edge_mass = DMatrix::from_fn(2, 2, |i, j| he / 6.0 * if i == j { 2.0 } else { 1.0 });
    // ∫_e 4λ₂λ₃ λ_i λ_j with the edge moments |e| a! b! / (a + b + 1)!
    let edge_tau = DMatrix::from_fn(2, 2, |i, j| 4.0 * he * if i == j { 6.0 / 120.0 } else { 4.0 / 120.0 });
    let edge_weight = generalized_extremes(&edge_tau, &edge_mass);
    let extension = [[0.5, 1.0, 0.0], [0.5, 0.0, 1.0]];
    let (tau_sq, tau_grad) = bubble_grams(&geo, &extension, edge_bubble, 2);
    let tau_sq = tau_sq / he;
    let edge_extension = sampled_max(&tau_sq, he.sqrt(), &tau_grad, &edge_mass, 4_000);

    BubbleConstants {
        element_weight,
        element_norm,
        edge_weight,
        edge_extension,
    }
}

/// `φ_K` at barycentric coordinates.
pub fn element_bubble_value(l: [f64; 3]) -> f64 {
    27.0 * l[0] * l[1] * l[2]
}

/// `τ_e` of the edge opposite vertex 1 at barycentric coordinates.
pub fn edge_bubble_value(l: [f64; 3]) -> f64 {
    4.0 * l[1] * l[2]
}

pub const REFERENCE_TRIANGLE: [Point; 3] = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dg_space::quadrature::EDGE;

    #[test]
    fn quadrature_matches_moment_table() {
        for a in 0..5 {
            for b in 0..5 {
                for c in 0..4 {
                    let exact = bary_moment(0.5, [a, b, c]);
                    let q: f64 = triangle_rule(10)
                        .iter()
                        .map(|(l, w)| 0.5 * w * l[0].powi(a as i32) * l[1].powi(b as i32) * l[2].powi(c as i32))
                        .sum();
                    assert!((q - exact).abs() < 1e-15, "{a}{b}{c}");
                }
            }
        }
        assert!((bary_moment(1.0, [1, 1, 1]) - 1.0 / 60.0).abs() < 1e-16);
    }

    #[test]
    fn bubble_mean_on_reference_triangle() {
        // ∫φ_K / |K| = 27 · 2 · 1/120
        let mean: f64 = triangle_rule(6).iter().map(|(l, w)| w * element_bubble_value(*l)).sum();
        assert!((mean - 27.0 / 60.0).abs() < 1e-15);
    }

    #[test]
    fn bubbles_vanish_on_the_boundary_and_peak_where_expected() {
        for &t in EDGE.points {
            for l in [[0.0, t, 1.0 - t], [t, 0.0, 1.0 - t], [t, 1.0 - t, 0.0]] {
                assert_eq!(element_bubble_value(l), 0.0);
            }
            assert_eq!(edge_bubble_value([1.0 - t, t, 0.0]), 0.0);
            assert_eq!(edge_bubble_value([1.0 - t, 0.0, t]), 0.0);
        }
        assert_eq!(edge_bubble_value([0.0, 0.5, 0.5]), 1.0);
        assert_eq!(element_bubble_value([1.0 / 3.0; 3]), 1.0);
        // mean of τ_e over its edge is 2/3, which the edge weight range must contain
        let c = bubble_constants(REFERENCE_TRIANGLE);
        let mean: f64 = gauss_legendre(4).iter().map(|(t, w)| w * 4.0 * t * (1.0 - t)).sum();
        assert!((mean - 2.0 / 3.0).abs() < 1e-15);
        assert!(c.edge_weight.0 <= mean && mean <= c.edge_weight.1 + 1e-14);
    }

    #[test]
    fn constants_are_positive_and_shape_stable() {
        let a = bubble_constants(REFERENCE_TRIANGLE);
        let b = bubble_constants([[0.0, 0.0], [1.0, 0.1], [0.45, 0.8]]);
        assert!(a.all_positive_finite() && b.all_positive_finite(), "{a:?} {b:?}");
        for (x, y) in a.values().iter().zip(b.values()) {
            assert!(x / y < 10.0 && y / x < 10.0, "{x} {y}");
        }
        // the weighted edge constants only depend on the edge
        assert!((a.edge_weight.0 - b.edge_weight.0).abs() < 1e-12);
        assert!((a.element_weight.1 - b.element_weight.1).abs() < 1e-12);
    }

    #[test]
    fn sampled_maximum_lies_between_eigen_bounds() {
        let geo = Geometry::new(REFERENCE_TRIANGLE);
        let p1 = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        let mass = DMatrix::from_fn(3, 3, |i, j| geo.area / 12.0 * if i == j { 2.0 } else { 1.0 });
        let (sq, grad) = bubble_grams(&geo, &p1, element_bubble, 2);
        let a = generalized_extremes(&sq, &mass).1.sqrt();
        let b = geo.diameter * generalized_extremes(&grad, &mass).1.sqrt();
        let c = bubble_constants(REFERENCE_TRIANGLE).element_norm;
        assert!(c >= 0.999 * a.max(b) && c <= a + b + 1e-12, "{a} {b} {c}");
        // 0 ≤ φ_K ≤ 1 and 0 ≤ τ_e ≤ 1
        let k = bubble_constants(REFERENCE_TRIANGLE);
        assert!(k.element_weight.1 <= 1.0 && k.edge_weight.1 <= 1.0);
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let r = gauss_legendre(5);
        for p in 0..10 {
            let q: f64 = r.iter().map(|(x, w)| w * x.powi(p)).sum();
            assert!((q - 1.0 / (p as f64 + 1.0)).abs() < 1e-15);
        }
    }
}
