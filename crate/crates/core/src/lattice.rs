//! Finite cyclic-lattice models of the discretized operators.
//!
//! Sites `j = 0..N` sit at `x_j = (j − ⌊N/2⌋)τ + s`; the offset enters only
//! through `φ = τs`. The shift `S` moves site `k−1` to `k` and picks up the
//! boundary phase `e^{iθ}` on the wrap-around. The clock is
//! `diag(e^{i(jα + φ − c)})` with `α = τ²` and `c = ⌊N/2⌋α`, so
//!
//! * `P_τ = (S − S*)/(2iτ)`,
//! * `Q_τ = diag(sin(jα + φ − c)/τ)`,
//! * `π(W(1,0)) = −iS`, `π(W(0,1)) = −i·clock`.
//!
//! In commensurate mode `α = 2πp/N`, clock and shift satisfy the exact
//! Weyl relation and the rotation algebra is represented faithfully on
//! its generators. Truncated mode takes an arbitrary `τ` and only supports
//! the physical operators.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use thiserror::Error;

use crate::expr::{Bindings, ExprError, PotentialExpr};
use crate::linalg::{self, CMatrix, C64, MAX_DIM};
use crate::weyl::{cocycle, d_element, Angle, Coeff, GroupPoint, WeylElement, WeylError};

const HERMITIAN_TOL: f64 = 1e-13;
const UNITARY_TOL: f64 = 1e-12;
const REAL_ANGLE_MATCH: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum LatticeError {
    #[error("invalid lattice parameters: {0}")]
    InvalidParams(String),
    #[error("commensurate mode required")]
    CommensurateRequired,
    #[error("dimension {0} exceeds the dense cap of {MAX_DIM}")]
    TooLarge(usize),
    #[error("matrix is not Hermitian (defect {0:e})")]
    NotHermitian(f64),
    #[error("matrix is not unitary (defect {0:e})")]
    NotUnitary(f64),
    #[error("element angle {element} does not match lattice angle {lattice}")]
    AngleMismatch { element: Angle, lattice: Angle },
    #[error("incompatible parameters: {0}")]
    Incompatible(String),
    #[error(transparent)]
    Weyl(#[from] WeylError),
    #[error("potential: {0}")]
    Expr(#[from] ExprError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Mode {
    /// `α = 2πp/N`.
    Commensurate { p: i64 },
    Truncated,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatticeParams {
    tau: f64,
    sites: usize,
    theta: f64,
    phi: f64,
    mode: Mode,
}

fn wrap_phase(name: &str, v: f64) -> Result<f64, LatticeError> {
    if !v.is_finite() {
        return Err(LatticeError::InvalidParams(format!("{name} = {v} is not finite")));
    }
    Ok(v.rem_euclid(TAU))
}

fn check_sites(sites: usize) -> Result<(), LatticeError> {
    if sites == 0 {
        return Err(LatticeError::InvalidParams("site count must be positive".into()));
    }
    if sites > MAX_DIM {
        return Err(LatticeError::TooLarge(sites));
    }
    Ok(())
}

impl LatticeParams {
    /// Commensurate lattice with `α = τ² = 2πp/N`.
    pub fn commensurate(p: i64, sites: usize, theta: f64, phi: f64) -> Result<Self, LatticeError> {
        check_sites(sites)?;
        if p < 1 {
            return Err(LatticeError::InvalidParams(format!("p = {p} must be positive")));
        }
        let tau = (TAU * p as f64 / sites as f64).sqrt();
        Ok(LatticeParams {
            tau,
            sites,
            theta: wrap_phase("theta", theta)?,
            phi: wrap_phase("phi", phi)?,
            mode: Mode::Commensurate { p },
        })
    }

    pub fn truncated(tau: f64, sites: usize, theta: f64, phi: f64) -> Result<Self, LatticeError> {
        check_sites(sites)?;
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(LatticeError::InvalidParams(format!("tau = {tau} must be positive")));
        }
        Ok(LatticeParams {
            tau,
            sites,
            theta: wrap_phase("theta", theta)?,
            phi: wrap_phase("phi", phi)?,
            mode: Mode::Truncated,
        })
    }

    pub fn with_phases(&self, theta: f64, phi: f64) -> Result<Self, LatticeError> {
        Ok(LatticeParams { theta: wrap_phase("theta", theta)?, phi: wrap_phase("phi", phi)?, ..*self })
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn is_commensurate(&self) -> bool {
        matches!(self.mode, Mode::Commensurate { .. })
    }

    pub fn alpha(&self) -> f64 {
        match self.mode {
            Mode::Commensurate { p } => TAU * p as f64 / self.sites as f64,
            Mode::Truncated => self.tau * self.tau,
        }
    }

    /// Rotation angle of the represented algebra (commensurate only).
    pub fn angle(&self) -> Option<Angle> {
        match self.mode {
            Mode::Commensurate { p } => Angle::rational(p, self.sites as i64).ok(),
            Mode::Truncated => None,
        }
    }

    fn require_commensurate(&self) -> Result<(i64, Angle), LatticeError> {
        match self.mode {
            Mode::Commensurate { p } => Ok((p, Angle::rational(p, self.sites as i64)?)),
            Mode::Truncated => Err(LatticeError::CommensurateRequired),
        }
    }

    pub fn center(&self) -> usize {
        self.sites / 2
    }

    /// `jα + φ − c`, reduced exactly by the lattice period in commensurate mode.
    pub fn site_angle(&self, j: usize) -> f64 {
        let rel = j as i64 - self.center() as i64;
        match self.mode {
            Mode::Commensurate { p } => {
                let n = self.sites as i64;
                TAU * (p * rel).rem_euclid(n) as f64 / n as f64 + self.phi
            }
            Mode::Truncated => rel as f64 * self.tau * self.tau + self.phi,
        }
    }

    /// Position values `q_j = sin(τ x_j)/τ`, the spectrum of `Q_τ`.
    pub fn position_values(&self) -> Vec<f64> {
        (0..self.sites).map(|j| self.site_angle(j).sin() / self.tau).collect()
    }

    /// The offset phase that aligns `Q_τ` with the Fourier image of `P_τ`
    /// when `p = 1`.
    pub fn aligned_phi(theta: f64, sites: usize) -> f64 {
        theta.rem_euclid(TAU) / sites as f64
    }
}

/// Dense complex Hermitian matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianMatrix(CMatrix);

impl HermitianMatrix {
    /// Validates Hermiticity to `1e-13` relative, then symmetrizes exactly.
    pub fn new(m: CMatrix) -> Result<Self, LatticeError> {
        if m.nrows() != m.ncols() {
            return Err(LatticeError::InvalidParams(format!("matrix is {}x{}", m.nrows(), m.ncols())));
        }
        if m.nrows() > MAX_DIM {
            return Err(LatticeError::TooLarge(m.nrows()));
        }
        if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(LatticeError::InvalidParams("non-finite matrix entry".into()));
        }
        let defect = linalg::hermiticity_defect(&m);
        if defect > HERMITIAN_TOL * linalg::max_abs(&m) {
            return Err(LatticeError::NotHermitian(defect));
        }
        let sym = (&m + m.adjoint()) * C64::new(0.5, 0.0);
        Ok(HermitianMatrix(sym))
    }

    pub fn from_real_diagonal(d: &[f64]) -> Result<Self, LatticeError> {
        let v: Vec<C64> = d.iter().map(|&x| C64::new(x, 0.0)).collect();
        Self::new(CMatrix::from_diagonal(&nalgebra::DVector::from_vec(v)))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }
}

/// Dense unitary matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitaryMatrix(CMatrix);

impl UnitaryMatrix {
    pub fn new(m: CMatrix) -> Result<Self, LatticeError> {
        if m.nrows() != m.ncols() {
            return Err(LatticeError::InvalidParams(format!("matrix is {}x{}", m.nrows(), m.ncols())));
        }
        let n = m.nrows();
        let defect = linalg::max_abs_diff(&(m.adjoint() * &m), &CMatrix::identity(n, n));
        if defect > UNITARY_TOL {
            return Err(LatticeError::NotUnitary(defect));
        }
        Ok(UnitaryMatrix(m))
    }

    fn from_monomial(m: &Monomial) -> Self {
        debug_assert!(m.is_unitary());
        UnitaryMatrix(m.to_dense())
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }
}

/// Generalized permutation matrix: row `k` holds `val[k]` at column `col[k]`.
#[derive(Debug, Clone)]
struct Monomial {
    col: Vec<usize>,
    val: Vec<C64>,
}

impl Monomial {
    fn identity(n: usize) -> Self {
        Monomial { col: (0..n).collect(), val: vec![C64::new(1.0, 0.0); n] }
    }

    fn shift(params: &LatticeParams) -> Self {
        let n = params.sites;
        let col = (0..n).map(|k| (k + n - 1) % n).collect();
        let val = (0..n)
            .map(|k| if k == 0 { Complex64::from_polar(1.0, params.theta) } else { C64::new(1.0, 0.0) })
            .collect();
        Monomial { col, val }
    }

    fn clock(params: &LatticeParams) -> Self {
        let n = params.sites;
        Monomial {
            col: (0..n).collect(),
            val: (0..n).map(|j| Complex64::from_polar(1.0, params.site_angle(j))).collect(),
        }
    }

    fn mul(&self, other: &Monomial) -> Monomial {
        let col = self.col.iter().map(|&c| other.col[c]).collect();
        let val = self.val.iter().zip(&self.col).map(|(v, &c)| v * other.val[c]).collect();
        Monomial { col, val }
    }

    fn adjoint(&self) -> Monomial {
        let n = self.col.len();
        let mut col = vec![0; n];
        let mut val = vec![C64::new(0.0, 0.0); n];
        for k in 0..n {
            col[self.col[k]] = k;
            val[self.col[k]] = self.val[k].conj();
        }
        Monomial { col, val }
    }

    fn scale(mut self, s: C64) -> Monomial {
        self.val.iter_mut().for_each(|v| *v *= s);
        self
    }

    fn pow(&self, e: i64) -> Monomial {
        let base = if e < 0 { self.adjoint() } else { self.clone() };
        (0..e.unsigned_abs()).fold(Monomial::identity(self.col.len()), |acc, _| acc.mul(&base))
    }

    fn is_unitary(&self) -> bool {
        let mut seen = vec![false; self.col.len()];
        self.col.iter().all(|&c| !std::mem::replace(&mut seen[c], true))
            && self.val.iter().all(|v| (v.norm() - 1.0).abs() < 1e-14)
    }

    fn add_into(&self, out: &mut CMatrix, coeff: C64) {
        for (k, (&c, v)) in self.col.iter().zip(&self.val).enumerate() {
            out[(k, c)] += coeff * v;
        }
    }

    fn to_dense(&self) -> CMatrix {
        let n = self.col.len();
        let mut m = CMatrix::zeros(n, n);
        self.add_into(&mut m, C64::new(1.0, 0.0));
        m
    }
}

/// The shift `S`: `S[k, k−1] = 1`, `S[0, N−1] = e^{iθ}`.
pub fn build_shift(params: &LatticeParams) -> UnitaryMatrix {
    UnitaryMatrix::from_monomial(&Monomial::shift(params))
}

/// The clock `diag(e^{i(jα + φ − c)})`.
pub fn build_clock(params: &LatticeParams) -> UnitaryMatrix {
    UnitaryMatrix::from_monomial(&Monomial::clock(params))
}

/// `Q_τ = diag(sin(jα + φ − c)/τ)`.
pub fn build_position_diag(params: &LatticeParams) -> HermitianMatrix {
    HermitianMatrix::from_real_diagonal(&params.position_values()).expect("real diagonal is Hermitian")
}

/// `P_τ = (S − S*)/(2iτ)`.
pub fn build_momentum(params: &LatticeParams) -> HermitianMatrix {
    let s = Monomial::shift(params);
    let mut m = CMatrix::zeros(params.sites, params.sites);
    let c = C64::new(0.0, -1.0 / (2.0 * params.tau));
    s.add_into(&mut m, c);
    s.adjoint().add_into(&mut m, -c);
    HermitianMatrix::new(m).expect("momentum is Hermitian by construction")
}

/// `½P_τ² = (2 − S² − S*²)/(8τ²)`, built from the shift structure.
pub fn build_kinetic(params: &LatticeParams) -> HermitianMatrix {
    let n = params.sites;
    let s2 = Monomial::shift(params).pow(2);
    let k = 1.0 / (8.0 * params.tau * params.tau);
    let mut m = CMatrix::identity(n, n) * C64::new(2.0 * k, 0.0);
    s2.add_into(&mut m, C64::new(-k, 0.0));
    s2.adjoint().add_into(&mut m, C64::new(-k, 0.0));
    HermitianMatrix::new(m).expect("kinetic term is Hermitian by construction")
}

/// `H = ½P_τ² + v(Q_τ)`.
pub fn build_hamiltonian(
    params: &LatticeParams,
    v: &PotentialExpr,
    bindings: &Bindings,
) -> Result<HermitianMatrix, LatticeError> {
    let pot = v.eval_all(&params.position_values(), bindings)?;
    let mut h = build_kinetic(params).into_matrix();
    for (j, p) in pot.into_iter().enumerate() {
        h[(j, j)] += p;
    }
    HermitianMatrix::new(h)
}

fn weyl_monomial(params: &LatticeParams, p: i64, x: GroupPoint) -> Monomial {
    let mi = C64::new(0.0, -1.0);
    let u = Monomial::shift(params).scale(mi);
    let v = Monomial::clock(params).scale(mi);
    // W(m,n) = e^{imnα/2} W(1,0)^m W(0,1)^n, with e^{imnα/2} = e^{iπ·pmn/N}
    let n = params.sites as i64;
    let e = (p as i128 * x.m as i128 * x.n as i128).rem_euclid(2 * n as i128) as f64;
    let phase = Complex64::from_polar(1.0, PI * e / n as f64);
    u.pow(x.m).mul(&v.pow(x.n)).scale(phase)
}

/// `π(W(x))` in the clock/shift model.
pub fn build_weyl_rep(params: &LatticeParams, x: GroupPoint) -> Result<CMatrix, LatticeError> {
    let (p, _) = params.require_commensurate()?;
    Ok(weyl_monomial(params, p, x).to_dense())
}

/// Linear extension `Σ c_x π(W(x))`.
pub fn represent<C: Coeff>(a: &WeylElement<C>, params: &LatticeParams) -> Result<CMatrix, LatticeError> {
    let (p, lattice) = params.require_commensurate()?;
    let matches = match (a.angle(), lattice) {
        (Angle::Real(r), l) => (r - l.radians()).abs() <= REAL_ANGLE_MATCH,
        (e, l) => e == l,
    };
    if !matches {
        return Err(LatticeError::AngleMismatch { element: a.angle(), lattice });
    }
    let n = params.sites;
    let mut out = CMatrix::zeros(n, n);
    for (x, c) in a.terms() {
        weyl_monomial(params, p, *x).add_into(&mut out, c.to_complex());
    }
    Ok(out)
}

/// Discrete Fourier matrix `F[j,k] = e^{i(2π(j−⌊N/2⌋) + θ)k/N}/√N`, which
/// diagonalizes the shift with eigenvalues ordered like the clock.
pub fn fourier_matrix(params: &LatticeParams) -> UnitaryMatrix {
    let n = params.sites;
    let h = params.center() as i64;
    let norm = 1.0 / (n as f64).sqrt();
    let f = CMatrix::from_fn(n, n, |j, k| {
        let r = ((j as i64 - h) * k as i64).rem_euclid(n as i64) as f64;
        let ang = (TAU * r + params.theta * k as f64) / n as f64;
        Complex64::from_polar(norm, ang)
    });
    UnitaryMatrix(f)
}

/// `‖F P_τ F* − Q_τ‖`. Requires `p = 1`; a misaligned `φ` yields a
/// nonzero residual rather than an error.
pub fn fourier_conjugacy_check(params: &LatticeParams) -> Result<f64, LatticeError> {
    match params.mode {
        Mode::Commensurate { p: 1 } => {}
        Mode::Commensurate { p } => {
            return Err(LatticeError::Incompatible(format!("Fourier conjugacy needs p = 1, got p = {p}")))
        }
        Mode::Truncated => return Err(LatticeError::CommensurateRequired),
    }
    let f = fourier_matrix(params).into_matrix();
    let p = build_momentum(params);
    let q = build_position_diag(params);
    let conj = &f * p.matrix() * f.adjoint();
    Ok(linalg::op_norm(&(conj - q.matrix())))
}

/// Matrix-level evidence that the lattice operators represent the
/// discretized relations.
#[derive(Debug, Clone, PartialEq)]
pub struct RepReport {
    pub angle: Angle,
    pub sites: usize,
    /// Max operator-norm residual of `D_xD_y = ω(x,y)D_{x+y} + ω(y,x)D_{x−y}`.
    pub relation: f64,
    /// `‖π(D(1,0)) − 2τP_τ‖`.
    pub momentum_identity: f64,
    /// `‖π(D(0,1)) − 2τQ_τ‖`.
    pub position_identity: f64,
    /// `‖π(W(0,1))π(W(1,0)) − e^{iα}π(W(1,0))π(W(0,1))‖`.
    pub commutation: f64,
    /// `max(0, max_x ‖π(D_x)‖ − 2)`.
    pub norm_excess: f64,
    pub relation_radius: i64,
    pub norm_radius: i64,
}

impl RepReport {
    pub fn worst(&self) -> f64 {
        [self.relation, self.momentum_identity, self.position_identity, self.commutation, self.norm_excess]
            .into_iter()
            .fold(0.0, f64::max)
    }

    pub fn passes(&self, tol: f64) -> bool {
        self.worst() <= tol
    }
}

/// Relation residuals over `|m|,|n| <= 3`, the two generator identities,
/// the commutation relation and the norm bound over `|m|,|n| <= 5`.
pub fn verify_rep(params: &LatticeParams) -> Result<RepReport, LatticeError> {
    verify_rep_with(params, 3, 5)
}

pub fn verify_rep_with(params: &LatticeParams, relation_radius: i64, norm_radius: i64) -> Result<RepReport, LatticeError> {
    let (_, angle) = params.require_commensurate()?;
    let dr = |x: GroupPoint| -> Result<CMatrix, LatticeError> {
        represent(&d_element::<C64>(x, angle)?, params)
    };

    let r = relation_radius;
    let span = 2 * r;
    let table: std::collections::HashMap<GroupPoint, CMatrix> =
        GroupPoint::square(span).map(|x| dr(x).map(|m| (x, m))).collect::<Result<_, _>>()?;
    let mut relation = 0.0f64;
    for x in GroupPoint::square(r) {
        for y in GroupPoint::square(r) {
            let lhs = &table[&x] * &table[&y];
            let rhs = &table[&(x + y)] * cocycle(x, y, &angle).value() + &table[&(x - y)] * cocycle(y, x, &angle).value();
            relation = relation.max(linalg::op_norm(&(lhs - rhs)));
        }
    }

    let two_tau = C64::new(2.0 * params.tau, 0.0);
    let momentum_identity =
        linalg::op_norm(&(dr(GroupPoint::new(1, 0))? - build_momentum(params).matrix() * two_tau));
    let position_identity =
        linalg::op_norm(&(dr(GroupPoint::new(0, 1))? - build_position_diag(params).matrix() * two_tau));

    let u = build_weyl_rep(params, GroupPoint::new(1, 0))?;
    let v = build_weyl_rep(params, GroupPoint::new(0, 1))?;
    let commutation =
        linalg::op_norm(&(&v * &u - &u * &v * Complex64::from_polar(1.0, angle.radians())));

    let mut norm_excess = 0.0f64;
    for x in GroupPoint::square(norm_radius) {
        norm_excess = norm_excess.max(linalg::op_norm(&dr(x)?) - 2.0);
    }

    Ok(RepReport {
        angle,
        sites: params.sites,
        relation,
        momentum_identity,
        position_identity,
        commutation,
        norm_excess,
        relation_radius,
        norm_radius,
    })
}
