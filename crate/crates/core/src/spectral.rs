//! Eigenanalysis and the state-theoretic layer.
//!
//! Gibbs weights are always formed from `e^{−β(λ − λ_min)}`: KMS ratios are
//! invariant under shifting `H`, and the shift keeps large `β` finite.

use std::collections::BTreeMap;
use std::f64::consts::TAU;

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use thiserror::Error;

use crate::expr::{Bindings, PotentialExpr};
use crate::lattice::{self, HermitianMatrix, LatticeError, LatticeParams};
use crate::linalg::{self, CMatrix, C64};
use crate::weyl::{Coeff, WeylElement};

/// Largest `q` accepted by [`butterfly_sweep`].
pub const BUTTERFLY_QMAX_CAP: usize = 64;
/// Default band-merge tolerance for [`gap_report`].
pub const DEFAULT_MERGE_TOL: f64 = 1e-6;

const RESIDUAL_TOL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum SpectralError {
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("eigendecomposition residual {residual:e} exceeds {bound:e}")]
    Inaccurate { residual: f64, bound: f64 },
    #[error("element support radius {radius} is not below q = {q}")]
    SupportTooLarge { radius: i64, q: usize },
}

/// Full Hermitian eigendecomposition, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct EigDecomp {
    pub eigenvalues: Vec<f64>,
    /// Orthonormal eigenvectors as columns.
    pub vectors: CMatrix,
    /// `‖AV − VΛ‖_max`.
    pub residual: f64,
    /// `‖V*V − I‖_max`.
    pub orthonormality: f64,
}

fn sorted_order(values: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    idx
}

fn real_decomp(a: &CMatrix) -> EigDecomp {
    let n = a.nrows();
    let re: DMatrix<f64> = a.map(|z| z.re);
    let eig = SymmetricEigen::new(re.clone());
    let order = sorted_order(eig.eigenvalues.as_slice());
    let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let v = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    let av = &re * &v;
    let residual = (0..n)
        .flat_map(|c| (0..n).map(move |r| (r, c)))
        .fold(0.0f64, |m, (r, c)| m.max((av[(r, c)] - v[(r, c)] * values[c]).abs()));
    let gram = v.transpose() * &v;
    let orthonormality = (0..n)
        .flat_map(|c| (0..n).map(move |r| (r, c)))
        .fold(0.0f64, |m, (r, c)| m.max((gram[(r, c)] - if r == c { 1.0 } else { 0.0 }).abs()));
    EigDecomp { eigenvalues: values, vectors: v.map(|x| C64::new(x, 0.0)), residual, orthonormality }
}

fn complex_decomp(a: &CMatrix) -> EigDecomp {
    let n = a.nrows();
    let eig = SymmetricEigen::new(a.clone());
    let order = sorted_order(eig.eigenvalues.as_slice());
    let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let v = CMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    let av = a * &v;
    let mut vl = v.clone();
    for (c, &l) in values.iter().enumerate() {
        vl.column_mut(c).scale_mut(l);
    }
    let residual = linalg::max_abs_diff(&av, &vl);
    let orthonormality = linalg::max_abs_diff(&(v.adjoint() * &v), &CMatrix::identity(n, n));
    EigDecomp { eigenvalues: values, vectors: v, residual, orthonormality }
}

/// Eigendecomposition meeting `residual <= 1e-10·max(1, ‖A‖_max)`.
pub fn eig_hermitian(a: &HermitianMatrix) -> Result<EigDecomp, SpectralError> {
    let m = a.matrix();
    let d = if linalg::is_real(m) { real_decomp(m) } else { complex_decomp(m) };
    let bound = RESIDUAL_TOL * linalg::max_abs(m).max(1.0);
    if d.residual > bound || d.orthonormality > RESIDUAL_TOL {
        return Err(SpectralError::Inaccurate { residual: d.residual.max(d.orthonormality), bound });
    }
    Ok(d)
}

impl EigDecomp {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn lambda_min(&self) -> f64 {
        self.eigenvalues[0]
    }

    /// `f(A) = V diag(f(λ)) V*`.
    pub fn apply_fn(&self, f: impl Fn(f64) -> C64) -> CMatrix {
        let mut scaled = self.vectors.clone();
        for (c, &l) in self.eigenvalues.iter().enumerate() {
            let s = f(l);
            scaled.column_mut(c).iter_mut().for_each(|z| *z *= s);
        }
        scaled * self.vectors.adjoint()
    }

    /// `e^{−ΔH}`.
    pub fn heat_kernel(&self, delta: f64) -> Result<CMatrix, SpectralError> {
        check_delta(delta)?;
        Ok(self.apply_fn(|l| C64::new((-delta * l).exp(), 0.0)))
    }

    /// `e^{−Δ(H − λ_min)}`, bounded by one in norm.
    pub fn shifted_heat_kernel(&self, delta: f64) -> Result<CMatrix, SpectralError> {
        check_delta(delta)?;
        let l0 = self.lambda_min();
        Ok(self.apply_fn(|l| C64::new((-delta * (l - l0)).exp(), 0.0)))
    }

    /// `e^{itH}`.
    pub fn propagator(&self, t: f64) -> CMatrix {
        self.apply_fn(|l| C64::from_polar(1.0, t * l))
    }
}

fn check_delta(delta: f64) -> Result<(), SpectralError> {
    if !(delta >= 0.0 && delta.is_finite()) {
        return Err(SpectralError::InvalidArgument(format!("Δ = {delta} must be nonnegative")));
    }
    Ok(())
}

/// `e^{−ΔH}`.
pub fn heat_kernel(h: &HermitianMatrix, delta: f64) -> Result<CMatrix, SpectralError> {
    check_delta(delta)?;
    eig_hermitian(h)?.heat_kernel(delta)
}

/// Sorted eigenvalues only.
pub fn eigenvalues(h: &HermitianMatrix) -> Vec<f64> {
    linalg::hermitian_eigenvalues(h.matrix())
}

/// Eigenvalues of `H = ½P_τ² + v(Q_τ)`.
pub fn spectrum(params: &LatticeParams, v: &PotentialExpr, bindings: &Bindings) -> Result<Vec<f64>, SpectralError> {
    Ok(eigenvalues(&lattice::build_hamiltonian(params, v, bindings)?))
}

/// Thermal state `ω_β(a) = tr(e^{−βH}a)/tr(e^{−βH})`.
#[derive(Debug, Clone)]
pub struct KmsState {
    beta: f64,
    /// `e^{−β(H − λ_min)}`, Hermitian with an exactly real diagonal.
    weight: CMatrix,
    partition: f64,
}

impl KmsState {
    pub fn new(decomp: &EigDecomp, beta: f64) -> Result<Self, SpectralError> {
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(SpectralError::InvalidArgument(format!("β = {beta} must be positive")));
        }
        let mut w = decomp.shifted_heat_kernel(beta)?;
        w = (&w + w.adjoint()) * C64::new(0.5, 0.0);
        for i in 0..w.nrows() {
            w[(i, i)].im = 0.0;
        }
        let partition = (0..w.nrows()).map(|i| w[(i, i)].re).sum();
        Ok(KmsState { beta, weight: w, partition })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn expect(&self, a: &CMatrix) -> C64 {
        let n = self.weight.nrows();
        let mut num = C64::new(0.0, 0.0);
        for i in 0..n {
            let mut row = C64::new(0.0, 0.0);
            for j in 0..n {
                row += self.weight[(i, j)] * a[(j, i)];
            }
            num += row;
        }
        num / self.partition
    }
}

pub fn kms_expectation(h: &HermitianMatrix, beta: f64, a: &CMatrix) -> Result<C64, SpectralError> {
    Ok(KmsState::new(&eig_hermitian(h)?, beta)?.expect(a))
}

/// `γ_t(a) = e^{itH} a e^{−itH}`.
pub fn heisenberg_evolve(h: &HermitianMatrix, a: &CMatrix, t: f64) -> Result<CMatrix, SpectralError> {
    Ok(evolve_with(&eig_hermitian(h)?, a, t))
}

pub fn evolve_with(decomp: &EigDecomp, a: &CMatrix, t: f64) -> CMatrix {
    let u = decomp.propagator(t);
    &u * a * u.adjoint()
}

/// Uniform `size × size` grid of boundary and offset phases.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PhaseGrid {
    pub size: usize,
}

impl Default for PhaseGrid {
    fn default() -> Self {
        PhaseGrid { size: 8 }
    }
}

impl PhaseGrid {
    pub fn cells(&self) -> Vec<(f64, f64)> {
        let s = self.size as f64;
        (0..self.size)
            .flat_map(|a| (0..self.size).map(move |b| (TAU * a as f64 / s, TAU * b as f64 / s)))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ButterflyRow {
    pub p: i64,
    pub q: usize,
    pub theta: f64,
    pub phi: f64,
    pub index: usize,
    pub eigenvalue: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ButterflyDataset {
    pub rows: Vec<ButterflyRow>,
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Reduced fractions `p/q` with `1 <= p <= q <= qmax`, ordered by `(q, p)`.
pub fn reduced_fractions(qmax: usize) -> Vec<(i64, usize)> {
    (1..=qmax)
        .flat_map(|q| (1..=q).filter(move |&p| gcd(p, q) == 1).map(move |p| (p as i64, q)))
        .collect()
}

/// Spectra of `H` at `α = 2πp/q` on `q` sites for every reduced `p/q`
/// and every phase cell. Rows come out in `(q, p, θ, φ, index)` order
/// regardless of scheduling.
pub fn butterfly_sweep(
    qmax: usize,
    v: &PotentialExpr,
    bindings: &Bindings,
    grid: PhaseGrid,
) -> Result<ButterflyDataset, SpectralError> {
    if qmax == 0 || qmax > BUTTERFLY_QMAX_CAP {
        return Err(SpectralError::InvalidArgument(format!("qmax = {qmax} outside 1..={BUTTERFLY_QMAX_CAP}")));
    }
    v.check_bound(bindings).map_err(LatticeError::from)?;
    let cells: Vec<(i64, usize, f64, f64)> = reduced_fractions(qmax)
        .into_iter()
        .flat_map(|(p, q)| grid.cells().into_iter().map(move |(t, f)| (p, q, t, f)))
        .collect();
    let chunks: Vec<Vec<ButterflyRow>> = cells
        .par_iter()
        .map(|&(p, q, theta, phi)| {
            let params = LatticeParams::commensurate(p, q, theta, phi)?;
            let ev = spectrum(&params, v, bindings)?;
            Ok(ev
                .into_iter()
                .enumerate()
                .map(|(index, eigenvalue)| ButterflyRow { p, q, theta, phi, index, eigenvalue })
                .collect())
        })
        .collect::<Result<_, SpectralError>>()?;
    Ok(ButterflyDataset { rows: chunks.into_iter().flatten().collect() })
}

/// Merged spectral bands for one `p/q`.
#[derive(Debug, Clone, PartialEq)]
pub struct BandReport {
    pub p: i64,
    pub q: usize,
    pub bands: Vec<(f64, f64)>,
}

impl BandReport {
    pub fn band_count(&self) -> usize {
        self.bands.len()
    }

    pub fn gaps(&self) -> Vec<f64> {
        self.bands.windows(2).map(|w| w[1].0 - w[0].1).collect()
    }

    pub fn total_bandwidth(&self) -> f64 {
        self.bands.iter().map(|(a, b)| b - a).sum()
    }
}

/// Per `(p, q)`: the hull of each eigenvalue branch over the phase grid,
/// merged when separated by at most `merge_tol`.
pub fn gap_report(dataset: &ButterflyDataset, merge_tol: f64) -> Vec<BandReport> {
    let mut hulls: BTreeMap<(usize, i64), BTreeMap<usize, (f64, f64)>> = BTreeMap::new();
    for r in &dataset.rows {
        let e = hulls.entry((r.q, r.p)).or_default().entry(r.index).or_insert((r.eigenvalue, r.eigenvalue));
        e.0 = e.0.min(r.eigenvalue);
        e.1 = e.1.max(r.eigenvalue);
    }
    hulls
        .into_iter()
        .map(|((q, p), branches)| {
            let mut iv: Vec<(f64, f64)> = branches.into_values().collect();
            iv.sort_by(|a, b| a.0.total_cmp(&b.0));
            let mut bands: Vec<(f64, f64)> = Vec::new();
            for (lo, hi) in iv {
                match bands.last_mut() {
                    Some(last) if lo <= last.1 + merge_tol => last.1 = last.1.max(hi),
                    _ => bands.push((lo, hi)),
                }
            }
            BandReport { p, q, bands }
        })
        .collect()
}

/// `cos(2τP) + cos(2τQ)` built from `S·S` and the doubled site angles.
pub fn harper_matrix(params: &LatticeParams) -> CMatrix {
    let s = lattice::build_shift(params).into_matrix();
    let s2 = &s * &s;
    let mut m = (&s2 + s2.adjoint()) * C64::new(0.5, 0.0);
    for j in 0..params.sites() {
        m[(j, j)] += (2.0 * params.site_angle(j)).cos();
    }
    m
}

/// `‖2τ²(P_τ² + Q_τ²) − (2 − cos 2τP − cos 2τQ)‖_max`.
pub fn harper_affine_residual(params: &LatticeParams) -> f64 {
    let n = params.sites();
    let p = lattice::build_momentum(params).into_matrix();
    let q = lattice::build_position_diag(params).into_matrix();
    let t2 = params.tau() * params.tau();
    let lhs = (&p * &p + &q * &q) * C64::new(2.0 * t2, 0.0);
    let rhs = CMatrix::identity(n, n) * C64::new(2.0, 0.0) - harper_matrix(params);
    linalg::max_abs_diff(&lhs, &rhs)
}

/// Family of commensurate representations `α = 2πp/q` on `q` sites over a
/// phase grid.
#[derive(Debug, Clone, Copy)]
pub struct TraceFamily {
    pub p: i64,
    pub q: usize,
    pub grid: PhaseGrid,
}

/// Phase-grid average of normalized matrix traces of `represent(a)`.
pub fn matrix_trace_state<C: Coeff>(a: &WeylElement<C>, family: &TraceFamily) -> Result<C64, SpectralError> {
    if let Some(radius) = a.support_radius() {
        if radius >= family.q as i64 {
            return Err(SpectralError::SupportTooLarge { radius, q: family.q });
        }
    }
    let cells = family.grid.cells();
    let mut acc = C64::new(0.0, 0.0);
    for &(theta, phi) in &cells {
        let params = LatticeParams::commensurate(family.p, family.q, theta, phi)?;
        acc += linalg::normalized_trace(&lattice::represent(a, &params)?);
    }
    Ok(acc / cells.len() as f64)
}
