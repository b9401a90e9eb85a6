//! Dense reference computations for small meshes.

use nalgebra::{DMatrix, DVector};

use crate::assembly::{boundary_functional, energy_matrix};
use crate::linalg::to_dense;
use crate::mesh::Mesh;
use crate::vi_solver::Multiplier;

/// `sup_v (∫_Γ2 g μ v)² / ‖v‖²_{1,h}` over the broken P1 space, computed as
/// the top eigenvalue of `L⁻¹ b bᵀ L⁻ᵀ` with `A = L Lᵀ` the dense energy
/// matrix. Returns the square root, i.e. the dual norm.
pub fn dual_norm_rayleigh(mesh: &Mesh, g: f64, mu: &[f64]) -> f64 {
    let lam = Multiplier { values: mu.to_vec(), g };
    let b = boundary_functional(mesh, g, &lam);
    let n = b.len();
    let ad = to_dense(&energy_matrix(mesh));
    let a = DMatrix::from_fn(n, n, |i, j| ad[i][j]);
    let l = a.cholesky().expect("energy matrix is SPD").l();
    let linv = l.try_inverse().expect("Cholesky factor is invertible");
    let bv = DVector::from_vec(b);
    let sym = &linv * (&bv * bv.transpose()) * linv.transpose();
    sym.symmetric_eigen().eigenvalues.max().max(0.0).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimator::dual_norm_global;
    use crate::mesh::unit_square_bottom_friction;

    #[test]
    fn agrees_with_local_solves() {
        let m = unit_square_bottom_friction(2).unwrap();
        let np = 3 * m.friction_faces().len();
        let mu: Vec<f64> = (0..np).map(|i| ((i * 7 % 5) as f64 - 2.0) / 3.0).collect();
        let a = dual_norm_rayleigh(&m, 0.7, &mu);
        assert!(a > 0.0);
        assert!((a - dual_norm_global(&m, 0.7, &mu)).abs() < 1e-10);
    }
}
