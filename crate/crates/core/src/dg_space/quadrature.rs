//! Fixed quadrature rules. Weights are normalized to sum to one, so they are
//! scaled by the element area or the edge length at the call site.

/// A rule on the reference simplex: barycentric points (triangle) or
/// parameter values in `[0, 1]` (edge), with normalized weights.
#[derive(Debug, Clone, Copy)]
pub struct QuadratureRule<P: 'static> {
    pub points: &'static [P],
    pub weights: &'static [f64],
}

impl<P> QuadratureRule<P> {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&'static P, f64)> + '_ {
        self.points.iter().zip(self.weights.iter().copied())
    }
}

const A1: f64 = 0.445_948_490_915_964_9;
const B1: f64 = 1.0 - 2.0 * A1;
const A2: f64 = 0.091_576_213_509_770_74;
const B2: f64 = 1.0 - 2.0 * A2;
const W1: f64 = 0.223_381_589_678_011_47;
const W2: f64 = 0.109_951_743_655_321_87;

static TRIANGLE_POINTS: [[f64; 3]; 6] = [
    [A1, A1, B1],
    [A1, B1, A1],
    [B1, A1, A1],
    [A2, A2, B2],
    [A2, B2, A2],
    [B2, A2, A2],
];
static TRIANGLE_WEIGHTS: [f64; 6] = [W1, W1, W1, W2, W2, W2];

/// Symmetric 6-point rule, exact for polynomials of degree ≤ 4.
pub const TRIANGLE: QuadratureRule<[f64; 3]> = QuadratureRule {
    points: &TRIANGLE_POINTS,
    weights: &TRIANGLE_WEIGHTS,
};

// 0.5 ∓ sqrt(3/5)/2
const G: f64 = 0.387_298_334_620_741_7;
static EDGE_POINTS: [f64; 3] = [0.5 - G, 0.5, 0.5 + G];
static EDGE_WEIGHTS: [f64; 3] = [5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0];

/// 3-point Gauss–Legendre rule, exact for polynomials of degree ≤ 5.
pub const EDGE: QuadratureRule<f64> = QuadratureRule {
    points: &EDGE_POINTS,
    weights: &EDGE_WEIGHTS,
};

/// Number of quadrature points per edge.
pub const EDGE_POINTS_PER_FACE: usize = 3;
