//! The periodic position process of the Gibbs state.
//!
//! States are lattice sites; the value of site `j` is the `j`-th diagonal
//! entry of `Q_τ`. Every law here is a trace of an alternating product of
//! heat kernels and diagonal matrices, so all kernels must be entrywise
//! nonnegative. For the lattice Hamiltonians that is the case exactly when
//! `θ = 0` (otherwise the wrap-around entries of `S²` carry a phase).
//!
//! Kernels are shifted by `λ_min`; all ratios are unaffected.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::expr::{Bindings, ExprError, PotentialExpr};
use crate::lattice::{self, HermitianMatrix, LatticeError, LatticeParams};
use crate::linalg::CMatrix;
use crate::spectral::{self, EigDecomp, SpectralError};

/// Largest number of site tuples materialized by [`joint_distribution`].
pub const JOINT_BUDGET: usize = 1 << 16;

const KERNEL_TOL: f64 = 1e-12;
const TIME_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum ProcessError {
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error("function: {0}")]
    Expr(#[from] ExprError),
    #[error("invalid time grid: {0}")]
    InvalidGrid(String),
    #[error("heat kernel is not entrywise nonnegative (min real part {min:e}, max imaginary part {imag:e}); a zero boundary phase θ is required")]
    NotPositive { min: f64, imag: f64 },
    #[error("heat kernel has non-finite entries")]
    NonFinite,
    #[error("function {index} is negative ({value:e}) at site {site}")]
    NegativeFunction { index: usize, site: usize, value: f64 },
    #[error("{states} site tuples exceed the budget of {JOINT_BUDGET}")]
    Budget { states: u128 },
    #[error("time grid is not symmetric under t -> β - t")]
    AsymmetricGrid,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// `0 = t₀ < t₁ < … < t_n = β`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    times: Vec<f64>,
}

impl TimeGrid {
    pub fn new(times: Vec<f64>) -> Result<Self, ProcessError> {
        if times.len() < 2 {
            return Err(ProcessError::InvalidGrid("need at least t0 and t1".into()));
        }
        if times[0] != 0.0 {
            return Err(ProcessError::InvalidGrid(format!("t0 = {} must be 0", times[0])));
        }
        if !times.iter().all(|t| t.is_finite()) {
            return Err(ProcessError::InvalidGrid("non-finite time".into()));
        }
        if let Some(w) = times.windows(2).find(|w| w[1] <= w[0]) {
            return Err(ProcessError::InvalidGrid(format!("times not strictly increasing at {} -> {}", w[0], w[1])));
        }
        Ok(TimeGrid { times })
    }

    /// `t_i = βi/n`, with `t_n = β` exactly.
    pub fn uniform(beta: f64, n: usize) -> Result<Self, ProcessError> {
        if n == 0 || !(beta > 0.0 && beta.is_finite()) {
            return Err(ProcessError::InvalidGrid(format!("uniform grid needs β > 0 and n ≥ 1 (β = {beta}, n = {n})")));
        }
        let mut t: Vec<f64> = (0..=n).map(|i| beta * i as f64 / n as f64).collect();
        t[n] = beta;
        TimeGrid::new(t)
    }

    pub fn beta(&self) -> f64 {
        self.times[self.times.len() - 1]
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    /// Number of increments `n`.
    pub fn steps(&self) -> usize {
        self.times.len() - 1
    }

    pub fn increments(&self) -> Vec<f64> {
        self.times.windows(2).map(|w| w[1] - w[0]).collect()
    }

    pub fn is_symmetric(&self) -> bool {
        let beta = self.beta();
        self.times.iter().zip(self.times.iter().rev()).all(|(a, b)| (a + b - beta).abs() <= TIME_TOL * beta.max(1.0))
    }

    /// Index of the grid time within tolerance of `t`.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        let tol = TIME_TOL * self.beta().max(1.0);
        self.times.iter().position(|s| (s - t).abs() <= tol)
    }
}

/// A lattice Hamiltonian with its decomposition and site values.
#[derive(Debug, Clone)]
pub struct Model {
    params: LatticeParams,
    hamiltonian: HermitianMatrix,
    decomp: EigDecomp,
    values: Vec<f64>,
}

impl Model {
    pub fn new(params: LatticeParams, v: &PotentialExpr, bindings: &Bindings) -> Result<Self, ProcessError> {
        let h = lattice::build_hamiltonian(&params, v, bindings)?;
        Model::from_hamiltonian(params, h)
    }

    pub fn from_hamiltonian(params: LatticeParams, hamiltonian: HermitianMatrix) -> Result<Self, ProcessError> {
        if hamiltonian.dim() != params.sites() {
            return Err(ProcessError::InvalidArgument(format!(
                "Hamiltonian dimension {} does not match {} sites",
                hamiltonian.dim(),
                params.sites()
            )));
        }
        let decomp = spectral::eig_hermitian(&hamiltonian)?;
        Ok(Model { values: params.position_values(), params, hamiltonian, decomp })
    }

    pub fn params(&self) -> &LatticeParams {
        &self.params
    }

    pub fn hamiltonian(&self) -> &HermitianMatrix {
        &self.hamiltonian
    }

    pub fn decomp(&self) -> &EigDecomp {
        &self.decomp
    }

    pub fn sites(&self) -> usize {
        self.values.len()
    }

    /// Site values `q_j`.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn lambda_min(&self) -> f64 {
        self.decomp.lambda_min()
    }

    /// `e^{−Δ(H − λ_min)}` as a real matrix, checked nonnegative.
    pub fn kernel(&self, delta: f64) -> Result<DMatrix<f64>, ProcessError> {
        real_kernel(&self.decomp.shifted_heat_kernel(delta)?)
    }

    /// `tr e^{−β(H − λ_min)}`.
    pub fn shifted_partition(&self, beta: f64) -> Result<f64, ProcessError> {
        Ok(self.kernel(beta)?.trace())
    }

    /// Evaluate `f` on the site values, rejecting negative samples.
    pub fn site_function(&self, f: &PotentialExpr, bindings: &Bindings, index: usize) -> Result<Vec<f64>, ProcessError> {
        let out = f.eval_all(&self.values, bindings)?;
        if let Some((site, &value)) = out.iter().enumerate().find(|(_, &y)| y < 0.0) {
            return Err(ProcessError::NegativeFunction { index, site, value });
        }
        Ok(out)
    }
}

fn real_kernel(k: &CMatrix) -> Result<DMatrix<f64>, ProcessError> {
    let mut min = 0.0f64;
    let mut imag = 0.0f64;
    for z in k.iter() {
        if !(z.re.is_finite() && z.im.is_finite()) {
            return Err(ProcessError::NonFinite);
        }
        min = min.min(z.re);
        imag = imag.max(z.im.abs());
    }
    if min < -KERNEL_TOL || imag > KERNEL_TOL {
        return Err(ProcessError::NotPositive { min, imag });
    }
    Ok(k.map(|z| z.re))
}

/// Result of a positivity evaluation. `trace` uses shifted kernels, so
/// the unshifted trace is `trace·e^{−λ_min Σ Δᵢ}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PositivityReport {
    pub trace: f64,
    pub lambda_min: f64,
    pub total_time: f64,
    /// `N·Π max fᵢ`, an upper bound on `|trace|`.
    pub scale: f64,
}

impl PositivityReport {
    pub fn value(&self) -> f64 {
        self.trace * (-self.lambda_min * self.total_time).exp()
    }

    pub fn passes(&self, tol: f64) -> bool {
        self.trace >= -tol * self.scale.max(f64::MIN_POSITIVE)
    }
}

/// `tr(f₀(Q)e^{−Δ₁H}f₁(Q)…e^{−Δ_nH}f_n(Q))` for nonnegative `fᵢ`.
pub fn positivity_check(
    model: &Model,
    fs: &[PotentialExpr],
    bindings: &Bindings,
    durations: &[f64],
) -> Result<PositivityReport, ProcessError> {
    if fs.len() != durations.len() + 1 {
        return Err(ProcessError::InvalidArgument(format!(
            "{} functions for {} durations (need one more function than durations)",
            fs.len(),
            durations.len()
        )));
    }
    let n = model.sites();
    let samples: Vec<Vec<f64>> =
        fs.iter().enumerate().map(|(i, f)| model.site_function(f, bindings, i)).collect::<Result<_, _>>()?;
    let mut acc = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(&samples[0]));
    for (d, f) in durations.iter().zip(&samples[1..]) {
        let k = model.kernel(*d)?;
        acc = &acc * &k;
        for (mut col, &fc) in acc.column_iter_mut().zip(f.iter()) {
            col.scale_mut(fc);
        }
    }
    let scale = n as f64 * samples.iter().map(|f| f.iter().copied().fold(0.0, f64::max)).product::<f64>();
    Ok(PositivityReport { trace: acc.trace(), lambda_min: model.lambda_min(), total_time: durations.iter().sum(), scale })
}

/// Exact law of `(X_{t₁}, …, X_{t_n})` at site level.
#[derive(Debug, Clone)]
pub struct JointDist {
    grid: TimeGrid,
    sites: usize,
    /// Row-major over `(j₁, …, j_n)`, `j₁` slowest.
    probs: Vec<f64>,
    shifted_partition: f64,
    lambda_min: f64,
}

/// `P(j₁…j_n) = K_{Δ₁}[j_n, j₁] K_{Δ₂}[j₁, j₂] ⋯ K_{Δ_n}[j_{n−1}, j_n] / Z`.
pub fn joint_distribution(model: &Model, grid: &TimeGrid) -> Result<JointDist, ProcessError> {
    let n = grid.steps();
    let s = model.sites();
    let states = (s as u128).checked_pow(n as u32).unwrap_or(u128::MAX);
    if states > JOINT_BUDGET as u128 {
        return Err(ProcessError::Budget { states });
    }
    let kernels: Vec<DMatrix<f64>> = grid.increments().iter().map(|&d| model.kernel(d)).collect::<Result<_, _>>()?;
    let z = model.shifted_partition(grid.beta())?;
    let total = states as usize;
    let mut probs = Vec::with_capacity(total);
    let mut tuple = vec![0usize; n];
    for idx in 0..total {
        let mut r = idx;
        for k in (0..n).rev() {
            tuple[k] = r % s;
            r /= s;
        }
        let mut w = kernels[0][(tuple[n - 1], tuple[0])];
        for k in 1..n {
            w *= kernels[k][(tuple[k - 1], tuple[k])];
        }
        probs.push(w / z);
    }
    Ok(JointDist { grid: grid.clone(), sites: s, probs, shifted_partition: z, lambda_min: model.lambda_min() })
}

impl JointDist {
    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// `ln tr e^{−βH}`.
    pub fn log_partition(&self) -> f64 {
        self.shifted_partition.ln() - self.grid.beta() * self.lambda_min
    }

    pub fn index(&self, tuple: &[usize]) -> usize {
        tuple.iter().fold(0, |acc, &j| acc * self.sites + j)
    }

    pub fn tuple(&self, mut idx: usize) -> Vec<usize> {
        let n = self.grid.steps();
        let mut t = vec![0; n];
        for k in (0..n).rev() {
            t[k] = idx % self.sites;
            idx /= self.sites;
        }
        t
    }

    pub fn prob(&self, tuple: &[usize]) -> f64 {
        self.probs[self.index(tuple)]
    }

    pub fn total_mass(&self) -> f64 {
        self.probs.iter().sum()
    }

    pub fn min_entry(&self) -> f64 {
        self.probs.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Site law at `t_k`, `k ∈ 1..=n`.
    pub fn marginal(&self, k: usize) -> Vec<f64> {
        assert!(k >= 1 && k <= self.grid.steps(), "time index {k} out of range");
        let stride = self.sites.pow((self.grid.steps() - k) as u32);
        let mut m = vec![0.0; self.sites];
        for (idx, p) in self.probs.iter().enumerate() {
            m[(idx / stride) % self.sites] += p;
        }
        m
    }

    /// Law of the value at `t_k`, sites with values within `tol` merged.
    pub fn value_marginal(&self, k: usize, values: &[f64], tol: f64) -> Vec<(f64, f64)> {
        merge_by_value(&self.marginal(k), values, tol)
    }

    /// `E Πₖ fₖ(X_{t_k})` with `fₖ` given by site samples.
    pub fn expectation(&self, fs: &[Vec<f64>]) -> f64 {
        assert_eq!(fs.len(), self.grid.steps());
        let mut acc = 0.0;
        for (idx, p) in self.probs.iter().enumerate() {
            let t = self.tuple(idx);
            acc += p * t.iter().zip(fs).map(|(&j, f)| f[j]).product::<f64>();
        }
        acc
    }
}

/// Group a site law by value.
pub fn merge_by_value(probs: &[f64], values: &[f64], tol: f64) -> Vec<(f64, f64)> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut out: Vec<(f64, f64)> = Vec::new();
    for j in order {
        match out.last_mut() {
            Some(last) if (values[j] - last.0).abs() <= tol => last.1 += probs[j],
            _ => out.push((values[j], probs[j])),
        }
    }
    out
}

/// `E Π f(X_s)` over arbitrary times taken mod `β`, evaluated as an ordered
/// trace. Factors at equal times multiply.
pub fn multi_time_moment(model: &Model, beta: f64, factors: &[(f64, &[f64])]) -> Result<f64, ProcessError> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(ProcessError::InvalidArgument(format!("β = {beta} must be positive")));
    }
    let n = model.sites();
    let mut pts: Vec<(f64, &[f64])> = factors.iter().map(|&(t, f)| (wrap_time(t, beta), f)).collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut acc = DMatrix::<f64>::identity(n, n);
    let mut now = 0.0;
    for (t, f) in pts {
        if f.len() != n {
            return Err(ProcessError::InvalidArgument(format!("site function has {} entries for {n} sites", f.len())));
        }
        if t > now {
            acc = &acc * model.kernel(t - now)?;
            now = t;
        }
        for (mut col, &fc) in acc.column_iter_mut().zip(f.iter()) {
            col.scale_mut(fc);
        }
    }
    acc = &acc * model.kernel(beta - now)?;
    Ok(acc.trace() / model.shifted_partition(beta)?)
}

fn wrap_time(t: f64, beta: f64) -> f64 {
    let w = t.rem_euclid(beta);
    if (beta - w).abs() <= TIME_TOL * beta.max(1.0) {
        0.0
    } else {
        w
    }
}

/// `E(X_s X_t)`.
pub fn two_point(model: &Model, beta: f64, s: f64, t: f64) -> Result<f64, ProcessError> {
    let q = model.values();
    multi_time_moment(model, beta, &[(s, q), (t, q)])
}

#[derive(Debug, Clone, PartialEq)]
pub struct StationarityReport {
    pub shift: f64,
    /// `max |E(X_s X_t) − E(X_{s+h} X_{t+h})|` over grid pairs.
    pub max_discrepancy: f64,
    /// `E(X_0 X_t)` at each grid time.
    pub lag_profile: Vec<(f64, f64)>,
    /// `max |E(X_0 X_t) − E(X_0 X_{β−t})|` over grid times.
    pub reflection_discrepancy: f64,
}

pub fn stationarity_check(model: &Model, grid: &TimeGrid, shift: f64) -> Result<StationarityReport, ProcessError> {
    let beta = grid.beta();
    let times = &grid.times()[1..];
    let mut worst = 0.0f64;
    for (a, &s) in times.iter().enumerate() {
        for &t in &times[a..] {
            let base = two_point(model, beta, s, t)?;
            let moved = two_point(model, beta, s + shift, t + shift)?;
            worst = worst.max((base - moved).abs());
        }
    }
    let lag_profile: Vec<(f64, f64)> =
        grid.times().iter().map(|&t| Ok((t, two_point(model, beta, 0.0, t)?))).collect::<Result<_, ProcessError>>()?;
    let mut refl = 0.0f64;
    for &(t, e) in &lag_profile {
        refl = refl.max((e - two_point(model, beta, 0.0, beta - t)?).abs());
    }
    Ok(StationarityReport { shift, max_discrepancy: worst, lag_profile, reflection_discrepancy: refl })
}

/// `Π f(X_s)` for times in `[0, β/2]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CylinderFn {
    pub factors: Vec<(f64, Vec<f64>)>,
}

impl CylinderFn {
    pub fn constant() -> Self {
        CylinderFn { factors: Vec::new() }
    }

    /// `X_t^power`.
    pub fn monomial(model: &Model, t: f64, power: i32) -> Self {
        CylinderFn { factors: vec![(t, model.values().iter().map(|q| q.powi(power)).collect())] }
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        self.factors.iter().map(|(t, _)| *t)
    }
}

/// Smallest eigenvalue of the Gram matrix `E[Θ(Fᵢ) Fⱼ]`, `Θ` the reflection
/// `t ↦ β − t`.
pub fn reflection_positivity_check(model: &Model, grid: &TimeGrid, family: &[CylinderFn]) -> Result<f64, ProcessError> {
    if !grid.is_symmetric() {
        return Err(ProcessError::AsymmetricGrid);
    }
    let beta = grid.beta();
    for f in family {
        for t in f.times() {
            if grid.index_of(t).is_none() || t > beta / 2.0 + TIME_TOL * beta.max(1.0) || t < 0.0 {
                return Err(ProcessError::InvalidArgument(format!("cylinder time {t} is not a grid time in [0, β/2]")));
            }
        }
    }
    let m = family.len();
    let mut gram = DMatrix::<f64>::zeros(m, m);
    for i in 0..m {
        for j in 0..m {
            let mut factors: Vec<(f64, &[f64])> = Vec::new();
            factors.extend(family[i].factors.iter().map(|(t, f)| (beta - t, f.as_slice())));
            factors.extend(family[j].factors.iter().map(|(t, f)| (*t, f.as_slice())));
            gram[(i, j)] = multi_time_moment(model, beta, &factors)?;
        }
    }
    let sym = (&gram + gram.transpose()) * 0.5;
    if m == 0 {
        return Ok(f64::INFINITY);
    }
    Ok(SymmetricEigen::new(sym).eigenvalues.iter().copied().fold(f64::INFINITY, f64::min))
}

/// Sampled site paths on a grid; column `k` is time `t_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct PathBatch {
    pub seed: u64,
    pub times: Vec<f64>,
    pub site_values: Vec<f64>,
    pub sites: Vec<Vec<usize>>,
}

impl PathBatch {
    pub fn count(&self) -> usize {
        self.sites.len()
    }

    pub fn values(&self, path: usize) -> Vec<f64> {
        self.sites[path].iter().map(|&j| self.site_values[j]).collect()
    }

    pub fn is_periodic(&self) -> bool {
        self.sites.iter().all(|p| self.site_values[p[0]] == self.site_values[p[p.len() - 1]])
    }

    /// Empirical site law at `t_k`.
    pub fn empirical_marginal(&self, k: usize) -> Vec<f64> {
        let mut m = vec![0.0; self.site_values.len()];
        for p in &self.sites {
            m[p[k]] += 1.0;
        }
        let c = self.count() as f64;
        m.iter_mut().for_each(|x| *x /= c);
        m
    }

    /// Counts of `(j₁, …, j_n)`.
    pub fn tuple_counts(&self) -> std::collections::BTreeMap<Vec<usize>, usize> {
        let mut out = std::collections::BTreeMap::new();
        for p in &self.sites {
            *out.entry(p[1..].to_vec()).or_insert(0) += 1;
        }
        out
    }
}

/// Precomputed kernels for the cyclic chain.
struct Sampler {
    kernels: Vec<DMatrix<f64>>,
    /// `suffix[i] = K_{i+1} ⋯ K_n` (0-based kernels), `suffix[n] = I`.
    suffix: Vec<DMatrix<f64>>,
}

impl Sampler {
    fn new(model: &Model, grid: &TimeGrid) -> Result<Self, ProcessError> {
        let kernels: Vec<DMatrix<f64>> = grid
            .increments()
            .iter()
            .map(|&d| model.kernel(d).map(|k| k.map(|x| x.max(0.0))))
            .collect::<Result<_, _>>()?;
        let n = kernels.len();
        let s = model.sites();
        let mut suffix = vec![DMatrix::<f64>::identity(s, s); n + 1];
        for i in (0..n).rev() {
            suffix[i] = &kernels[i] * &suffix[i + 1];
        }
        if suffix.iter().any(|m| m.iter().any(|x| !x.is_finite())) {
            return Err(ProcessError::NonFinite);
        }
        Ok(Sampler { kernels, suffix })
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> Vec<usize> {
        let n = self.kernels.len();
        let s = self.suffix[0].nrows();
        let anchor = categorical(rng, (0..s).map(|j| self.suffix[0][(j, j)]));
        let mut path = Vec::with_capacity(n + 1);
        path.push(anchor);
        let mut prev = anchor;
        for i in 0..n - 1 {
            let k = &self.kernels[i];
            let r = &self.suffix[i + 1];
            let next = categorical(rng, (0..s).map(|j| k[(prev, j)] * r[(j, anchor)]));
            path.push(next);
            prev = next;
        }
        path.push(anchor);
        path
    }
}

fn categorical(rng: &mut ChaCha8Rng, weights: impl Iterator<Item = f64> + Clone) -> usize {
    let total: f64 = weights.clone().sum();
    let u: f64 = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut last = 0;
    for (j, w) in weights.enumerate() {
        if w > 0.0 {
            last = j;
            acc += w;
            if u < acc {
                return j;
            }
        }
    }
    last
}

/// Exact samples of the cyclic chain. Path `i` uses stream `i` of a
/// ChaCha8 generator keyed by `seed`, one draw per step.
pub fn sample_paths(model: &Model, grid: &TimeGrid, count: usize, seed: u64) -> Result<PathBatch, ProcessError> {
    if count == 0 {
        return Err(ProcessError::InvalidArgument("count must be at least 1".into()));
    }
    let sampler = Sampler::new(model, grid)?;
    let sites: Vec<Vec<usize>> = (0..count)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            sampler.draw(&mut rng)
        })
        .collect();
    Ok(PathBatch { seed, times: grid.times().to_vec(), site_values: model.values().to_vec(), sites })
}
