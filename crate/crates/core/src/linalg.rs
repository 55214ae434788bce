//! Dense complex matrix helpers shared by the lattice and spectral layers.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;

/// Largest dimension accepted by the dense builders and solvers.
pub const MAX_DIM: usize = 4096;

pub fn max_abs(a: &CMatrix) -> f64 {
    a.iter().fold(0.0, |m, z| m.max(z.norm()))
}

pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    assert_eq!(a.shape(), b.shape());
    a.iter().zip(b.iter()).fold(0.0, |m, (x, y)| m.max((x - y).norm()))
}

/// `‖A − A*‖_max`.
pub fn hermiticity_defect(a: &CMatrix) -> f64 {
    let n = a.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((a[(i, j)] - a[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Whether every entry has an exactly zero imaginary part.
pub fn is_real(a: &CMatrix) -> bool {
    a.iter().all(|z| z.im == 0.0)
}

/// Eigenvalues of a Hermitian matrix (lower triangle trusted), ascending.
pub fn hermitian_eigenvalues(a: &CMatrix) -> Vec<f64> {
    let mut ev: Vec<f64> = if is_real(a) {
        let re = a.map(|z| z.re);
        SymmetricEigen::new(re).eigenvalues.iter().copied().collect()
    } else {
        SymmetricEigen::new(a.clone()).eigenvalues.iter().copied().collect()
    };
    ev.sort_by(f64::total_cmp);
    ev
}

/// Spectral norm.
pub fn op_norm(a: &CMatrix) -> f64 {
    if a.nrows() == 0 {
        return 0.0;
    }
    if hermiticity_defect(a) == 0.0 {
        let ev = hermitian_eigenvalues(a);
        return ev[0].abs().max(ev[ev.len() - 1].abs());
    }
    let gram = a.adjoint() * a;
    let ev = hermitian_eigenvalues(&gram);
    ev[ev.len() - 1].max(0.0).sqrt()
}

/// Normalized trace `tr(A)/n`.
pub fn normalized_trace(a: &CMatrix) -> C64 {
    let n = a.nrows();
    let s: C64 = (0..n).map(|i| a[(i, i)]).sum();
    s / n as f64
}
