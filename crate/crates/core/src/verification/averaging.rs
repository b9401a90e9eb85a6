//! Conforming averaging of broken P1 fields and the constants of the
//! averaging estimate `Σ_K ‖v − χ‖²_{i,K} ≤ C Σ_e h_e^{1−2i} ‖[v]‖²_e`.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dg_space::{element_norms_sq, BrokenField, NodalField};
use crate::mesh::{FaceKind, Mesh};

/// Continuous P1 field obtained by nodal averaging.
///
/// Γ1 nodes get 0. Every other regular node gets the mean of the values the
/// triangles having it as a vertex assign to it. A hanging node is the
/// midpoint of an unrefined edge, so its value follows from the endpoints;
/// endpoints always have smaller ids than the midpoint.
pub fn conforming_average(mesh: &Mesh, v: &BrokenField) -> NodalField {
    let nv = mesh.vertices().len();
    let mut sum = vec![0.0; nv];
    let mut count = vec![0usize; nv];
    for (k, el) in mesh.elements().iter().enumerate() {
        let c = v.local(k);
        for (j, &p) in el.vertices.iter().enumerate() {
            sum[p] += c[j];
            count[p] += 1;
        }
    }
    let fixed = mesh.dirichlet_vertices();
    let hanging = mesh.hanging_nodes();
    let mut values = vec![0.0; nv];
    for p in 0..nv {
        values[p] = if fixed.contains(&p) {
            0.0
        } else if let Some(&(a, b)) = hanging.get(&p) {
            0.5 * (values[a] + values[b])
        } else if count[p] > 0 {
            sum[p] / count[p] as f64
        } else {
            0.0
        };
    }
    NodalField { values }
}

/// `Σ_{e ∈ E_h^0} h_e^{1−2i} ‖[v]‖²_e` for `i = 0` and `i = 1`.
pub fn jump_sums(mesh: &Mesh, v: &BrokenField) -> (f64, f64) {
    let (mut s0, mut s1) = (0.0, 0.0);
    for (f, face) in mesh.faces().iter().enumerate() {
        if face.kind == FaceKind::Friction {
            continue;
        }
        let j = v.scalar_jump(mesh, f);
        let sq: f64 = face.quad.iter().zip(j).map(|(q, j)| q.weight * j * j).sum();
        s0 += face.length * sq;
        s1 += sq / face.length;
    }
    (s0, s1)
}

/// Empirical constants `(C_0, C_1)` of the averaging estimate for `v`,
/// with `‖·‖_{0,K}` the L² norm and `‖·‖_{1,K}` the H¹ seminorm.
/// Returns `(0, 0)` when `v` has no jumps.
pub fn lemma21_ratio(mesh: &Mesh, v: &BrokenField) -> (f64, f64) {
    let chi = conforming_average(mesh, v).to_broken(mesh);
    let d = v.sub(&chi);
    let (mut l0, mut l1) = (0.0, 0.0);
    for k in 0..mesh.num_elements() {
        let (a, b) = element_norms_sq(mesh, &d, k);
        l0 += a;
        l1 += b;
    }
    let (r0, r1) = jump_sums(mesh, v);
    let q = |l: f64, r: f64| if r > 0.0 { l / r } else { 0.0 };
    (q(l0, r0), q(l1, r1))
}

/// Largest ratios over random fields, per refinement level.
#[derive(Debug, Clone, PartialEq)]
pub struct AveragingStudy {
    /// `(max C_0, max C_1)` on the base mesh and each uniform refinement.
    pub levels: Vec<(f64, f64)>,
}

impl AveragingStudy {
    /// `max_l C_l / min_l C_l` for `i = 0` and `i = 1`.
    pub fn drift(&self) -> (f64, f64) {
        let d = |f: fn(&(f64, f64)) -> f64| {
            let hi = self.levels.iter().map(f).fold(f64::MIN, f64::max);
            let lo = self.levels.iter().map(f).fold(f64::MAX, f64::min);
            hi / lo
        };
        (d(|c| c.0), d(|c| c.1))
    }

    /// Largest constant on the refined levels relative to the base level,
    /// for `i = 0` and `i = 1`. Values `≤ 1` mean no growth under refinement.
    pub fn growth(&self) -> (f64, f64) {
        let g = |f: fn(&(f64, f64)) -> f64| {
            let base = f(&self.levels[0]);
            self.levels[1..].iter().map(f).fold(base, f64::max) / base
        };
        (g(|c| c.0), g(|c| c.1))
    }
}

/// Draws `samples` broken fields with coefficients uniform in `[−1, 1]` on
/// `base`, re-interpolates each on `levels − 1` uniform refinements and
/// records the largest ratios per level.
pub fn averaging_study(base: &Mesh, samples: usize, levels: usize, seed: u64) -> AveragingStudy {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let fields: Vec<BrokenField> = (0..samples)
        .map(|_| BrokenField::from_coeffs(base, (0..3 * base.num_elements()).map(|_| rng.random_range(-1.0..=1.0)).collect()))
        .collect();
    let mut mesh = base.clone();
    let mut current = fields;
    let mut out = Vec::with_capacity(levels);
    for l in 0..levels {
        if l > 0 {
            let fine = mesh.refine_uniform();
            current = current.iter().map(|v| v.prolongate(&mesh, &fine)).collect();
            mesh = fine;
        }
        let max = current
            .iter()
            .map(|v| lemma21_ratio(&mesh, v))
            .fold((0.0f64, 0.0f64), |a, r| (a.0.max(r.0), a.1.max(r.1)));
        out.push(max);
    }
    AveragingStudy { levels: out }
}

/// Exact constants `sup_v` of the two ratios over all broken P1 fields on
/// `mesh`, as the top generalized eigenvalues of the quadratic forms on the
/// complement of the jump-free fields (where both sides vanish). Dense, so
/// meant for meshes of a few hundred triangles.
pub fn averaging_supremum(mesh: &Mesh) -> (f64, f64) {
    let n = 3 * mesh.num_elements();
    let unit = |i: usize| {
        let mut c = vec![0.0; n];
        c[i] = 1.0;
        BrokenField::from_coeffs(mesh, c)
    };
    let defect = |v: &BrokenField| v.sub(&conforming_average(mesh, v).to_broken(mesh));
    let lhs = |d: &BrokenField| {
        (0..mesh.num_elements()).fold((0.0, 0.0), |s, k| {
            let (a, b) = element_norms_sq(mesh, d, k);
            (s.0 + a, s.1 + b)
        })
    };
    // χ is linear, so the forms follow from polarization on unit vectors
    let cols: Vec<BrokenField> = (0..n).map(|i| defect(&unit(i))).collect();
    let diag_l: Vec<(f64, f64)> = cols.iter().map(lhs).collect();
    let diag_r: Vec<(f64, f64)> = (0..n).map(|i| jump_sums(mesh, &unit(i))).collect();
    let mut forms = [DMatrix::<f64>::zeros(n, n), DMatrix::zeros(n, n), DMatrix::zeros(n, n), DMatrix::zeros(n, n)];
    for i in 0..n {
        for j in 0..=i {
            let (l, r) = if i == j {
                (diag_l[i], diag_r[i])
            } else {
                let sum = BrokenField::from_coeffs(mesh, cols[i].coeffs.iter().zip(&cols[j].coeffs).map(|(a, b)| a + b).collect());
                let mut u = vec![0.0; n];
                u[i] = 1.0;
                u[j] = 1.0;
                let (sl, sr) = (lhs(&sum), jump_sums(mesh, &BrokenField::from_coeffs(mesh, u)));
                (
                    (0.5 * (sl.0 - diag_l[i].0 - diag_l[j].0), 0.5 * (sl.1 - diag_l[i].1 - diag_l[j].1)),
                    (0.5 * (sr.0 - diag_r[i].0 - diag_r[j].0), 0.5 * (sr.1 - diag_r[i].1 - diag_r[j].1)),
                )
            };
            for (f, v) in forms.iter_mut().zip([l.0, l.1, r.0, r.1]) {
                f[(i, j)] = v;
                f[(j, i)] = v;
            }
        }
    }
    let top = |num: &DMatrix<f64>, den: &DMatrix<f64>| {
        let e = den.clone().symmetric_eigen();
        let cut = 1e-10 * e.eigenvalues.max();
        let keep: Vec<usize> = (0..n).filter(|&k| e.eigenvalues[k] > cut).collect();
        if keep.is_empty() {
            return 0.0;
        }
        let p = DMatrix::from_fn(n, keep.len(), |r, c| e.eigenvectors[(r, keep[c])] / e.eigenvalues[keep[c]].sqrt());
        (p.transpose() * num * &p).symmetric_eigen().eigenvalues.max()
    };
    (top(&forms[0], &forms[2]), top(&forms[1], &forms[3]))
}
