//! Command-line driver.
//!
//! Exit codes: 0 success, 1 failed verification or runtime error, 2 usage
//! error. Without `--out` the CSV goes to stdout; with it the CSV is written
//! atomically next to a `<out>.manifest` holding the resolved configuration.

pub mod config;
pub mod output;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::classical;
use crate::lattice::{self, LatticeParams};
use crate::linalg::{CMatrix, C64};
use crate::process::{self, Model, TimeGrid};
use crate::spectral::{self, KmsState, PhaseGrid, DEFAULT_MERGE_TOL};
use crate::weyl::{self, Cyclotomic, GroupPoint};

pub use config::{CommandKind, RunConfig};
use output::{fmt_float, SvgPlot, Table};

/// Paths drawn in the sample SVG.
const SVG_PATHS: usize = 16;
const MATRIX_TOL: f64 = 1e-12;
const NORM_TOL: f64 = 1e-10;
const FOURIER_TOL: f64 = 1e-10;

#[derive(Parser, Debug)]
#[command(name = "ccrlab", version, about = "Discretized CCR laboratory: lattice operators, spectra, KMS states and the periodic position process")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check the algebraic and matrix identities; exit 1 if any fails.
    Verify(Flags),
    /// Eigenvalues of H = P²/2 + v(Q).
    Spectrum(Flags),
    /// Spectra over all reduced p/q with q <= qmax and a phase grid.
    Butterfly(Flags),
    /// Thermal expectations of H, Q, Q² and P².
    Kms(Flags),
    /// Sample periodic paths of the position process.
    Sample(Flags),
    /// Integrate the classical oscillator x'' + x + g x³ = 0.
    Classical(Flags),
    /// Check that the Fourier matrix conjugates P onto Q.
    FourierCheck(Flags),
}

#[derive(Args, Debug, Default)]
struct Flags {
    /// Lattice spacing; selects truncated mode.
    #[arg(long)]
    tau: Option<String>,
    /// Numerator of α/2π in commensurate mode.
    #[arg(long)]
    p: Option<String>,
    /// Denominator of α/2π; the site count in commensurate mode.
    #[arg(long)]
    q: Option<String>,
    /// Number of lattice sites.
    #[arg(long)]
    sites: Option<String>,
    /// Boundary phase of the shift.
    #[arg(long, allow_hyphen_values = true)]
    theta: Option<String>,
    /// Offset phase of the clock.
    #[arg(long, allow_hyphen_values = true)]
    phi: Option<String>,
    /// Potential v(x), e.g. "x^2/2 + g*x^4/4".
    #[arg(long, allow_hyphen_values = true)]
    potential: Option<String>,
    /// Parameter binding NAME=VALUE; repeatable.
    #[arg(long = "param", allow_hyphen_values = true)]
    param: Vec<String>,
    /// Inverse temperature.
    #[arg(long)]
    beta: Option<String>,
    /// Number of time steps on [0, β].
    #[arg(long)]
    grid: Option<String>,
    /// Number of sampled paths.
    #[arg(long)]
    paths: Option<String>,
    /// Random seed.
    #[arg(long)]
    seed: Option<String>,
    /// Largest denominator in a butterfly sweep.
    #[arg(long)]
    qmax: Option<String>,
    /// Phase grid size per axis.
    #[arg(long = "phase-grid")]
    phase_grid: Option<String>,
    /// CSV output path.
    #[arg(long)]
    out: Option<String>,
    /// SVG output path.
    #[arg(long)]
    svg: Option<String>,
    /// Worker threads.
    #[arg(long)]
    threads: Option<String>,
    /// Initial position (classical).
    #[arg(long, allow_hyphen_values = true)]
    x0: Option<String>,
    /// Initial velocity (classical).
    #[arg(long, allow_hyphen_values = true)]
    v0: Option<String>,
    /// Time step (classical).
    #[arg(long)]
    dt: Option<String>,
    /// Number of steps (classical).
    #[arg(long)]
    steps: Option<String>,
    /// Config file of key=value lines; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
}

impl Flags {
    fn entries(&self) -> Vec<(String, String)> {
        let mut e = Vec::new();
        let single = [
            ("tau", &self.tau),
            ("p", &self.p),
            ("q", &self.q),
            ("sites", &self.sites),
            ("theta", &self.theta),
            ("phi", &self.phi),
            ("potential", &self.potential),
            ("beta", &self.beta),
            ("grid", &self.grid),
            ("paths", &self.paths),
            ("seed", &self.seed),
            ("qmax", &self.qmax),
            ("phase-grid", &self.phase_grid),
            ("out", &self.out),
            ("svg", &self.svg),
            ("threads", &self.threads),
            ("x0", &self.x0),
            ("v0", &self.v0),
            ("dt", &self.dt),
            ("steps", &self.steps),
        ];
        for (k, v) in single {
            if let Some(v) = v {
                e.push((k.to_string(), v.clone()));
            }
        }
        e.extend(self.param.iter().map(|v| ("param".to_string(), v.clone())));
        e
    }
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Runtime(String),
}

fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

enum Outcome {
    Passed,
    Failed,
}

/// Run with the process's stdout and stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    let mut err = std::io::stderr();
    run_with(args, &mut out, &mut err)
}

pub fn run_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let rendered = e.render().to_string();
            let _ = if code == 0 { write!(out, "{rendered}") } else { write!(err, "{rendered}") };
            return code;
        }
    };
    let (kind, flags) = match &cli.command {
        Command::Verify(f) => (CommandKind::Verify, f),
        Command::Spectrum(f) => (CommandKind::Spectrum, f),
        Command::Butterfly(f) => (CommandKind::Butterfly, f),
        Command::Kms(f) => (CommandKind::Kms, f),
        Command::Sample(f) => (CommandKind::Sample, f),
        Command::Classical(f) => (CommandKind::Classical, f),
        Command::FourierCheck(f) => (CommandKind::FourierCheck, f),
    };
    let mut buf: Vec<u8> = Vec::new();
    let result = resolve(kind, flags).and_then(|cfg| match cfg.threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(runtime)
            .and_then(|pool| pool.install(|| execute(&cfg, &mut buf))),
        None => execute(&cfg, &mut buf),
    });
    let _ = out.write_all(&buf);
    match result {
        Ok(Outcome::Passed) => 0,
        Ok(Outcome::Failed) => 1,
        Err(CliError::Usage(m)) => {
            let _ = writeln!(err, "error: {m}");
            2
        }
        Err(CliError::Runtime(m)) => {
            let _ = writeln!(err, "error: {m}");
            1
        }
    }
}

fn resolve(kind: CommandKind, flags: &Flags) -> Result<RunConfig, CliError> {
    let mut entries = Vec::new();
    if let Some(path) = &flags.config {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        entries = config::parse_config_text(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    }
    entries.extend(flags.entries());
    RunConfig::resolve(kind, &entries).map_err(CliError::Usage)
}

fn execute(cfg: &RunConfig, out: &mut dyn Write) -> Result<Outcome, CliError> {
    match cfg.command {
        CommandKind::Verify => cmd_verify(cfg, out),
        CommandKind::Spectrum => cmd_spectrum(cfg, out),
        CommandKind::Butterfly => cmd_butterfly(cfg, out),
        CommandKind::Kms => cmd_kms(cfg, out),
        CommandKind::Sample => cmd_sample(cfg, out),
        CommandKind::Classical => cmd_classical(cfg, out),
        CommandKind::FourierCheck => cmd_fourier(cfg, out),
    }
}

fn say(out: &mut dyn Write, s: impl std::fmt::Display) -> Result<(), CliError> {
    writeln!(out, "{s}").map_err(runtime)
}

/// Write the CSV (and manifest) to `--out`, or the CSV to stdout.
fn emit(cfg: &RunConfig, table: &Table, svg: Option<SvgPlot>, out: &mut dyn Write) -> Result<(), CliError> {
    let csv = table.to_csv().map_err(runtime)?;
    match &cfg.out {
        Some(path) => {
            output::write_atomic(path, &csv).map_err(runtime)?;
            output::write_atomic(&manifest_path(path), cfg.manifest().as_bytes()).map_err(runtime)?;
        }
        None => out.write_all(&csv).map_err(runtime)?,
    }
    if let (Some(path), Some(plot)) = (&cfg.svg, svg) {
        output::write_atomic(path, plot.render().as_bytes()).map_err(runtime)?;
    }
    Ok(())
}

fn manifest_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".manifest");
    PathBuf::from(s)
}

fn commensurate_params(cfg: &RunConfig, what: &str) -> Result<LatticeParams, CliError> {
    let p = cfg.lattice_params().map_err(CliError::Usage)?;
    if !p.is_commensurate() {
        return Err(CliError::Usage(format!("{what} requires commensurate mode (use --p/--q, not --tau)")));
    }
    Ok(p)
}

struct Check {
    name: &'static str,
    value: f64,
    tol: f64,
}

fn cmd_verify(cfg: &RunConfig, out: &mut dyn Write) -> Result<Outcome, CliError> {
    let params = commensurate_params(cfg, "verify")?;
    let angle = params.angle().expect("commensurate");
    let mut symbolic = 0.0f64;
    for x in GroupPoint::square(3) {
        for y in GroupPoint::square(3) {
            symbolic = symbolic.max(weyl::relation_residual::<Cyclotomic>(x, y, angle).map_err(runtime)?);
        }
    }
    let mut flip_failures = 0usize;
    for x in GroupPoint::square(3) {
        let d = weyl::d_element::<Cyclotomic>(x, angle).map_err(runtime)?;
        if !d.is_flip_fixed() || d.flip().flip() != d || d.adjoint() != d {
            flip_failures += 1;
        }
    }
    let rep = lattice::verify_rep(&params).map_err(runtime)?;
    let checks = [
        Check { name: "symbolic_relation", value: symbolic, tol: 0.0 },
        Check { name: "symbolic_flip", value: flip_failures as f64, tol: 0.0 },
        Check { name: "matrix_relation", value: rep.relation, tol: MATRIX_TOL },
        Check { name: "momentum_identity", value: rep.momentum_identity, tol: MATRIX_TOL },
        Check { name: "position_identity", value: rep.position_identity, tol: MATRIX_TOL },
        Check { name: "commutation", value: rep.commutation, tol: MATRIX_TOL },
        Check { name: "norm_excess", value: rep.norm_excess, tol: NORM_TOL },
    ];
    let mut table = Table::new(["check", "value", "tolerance", "pass"]);
    let mut all = true;
    let to_stdout = cfg.out.is_none();
    say(out, format!("verify: alpha = 2pi*{}, N = {}", angle_label(&params), params.sites()))?;
    for c in &checks {
        let pass = c.value <= c.tol;
        all &= pass;
        say(out, format!("  {:<18} {:>12.3e}  (tol {:.0e})  {}", c.name, c.value, c.tol, if pass { "ok" } else { "FAIL" }))?;
        table.push(vec![c.name.to_string(), fmt_float(c.value), fmt_float(c.tol), pass.to_string()]);
    }
    say(out, if all { "all checks passed" } else { "verification FAILED" })?;
    if !to_stdout {
        emit(cfg, &table, None, out)?;
    }
    Ok(if all { Outcome::Passed } else { Outcome::Failed })
}

fn angle_label(params: &LatticeParams) -> String {
    match params.angle() {
        Some(weyl::Angle::Rational { p, q }) => format!("{p}/{q}"),
        _ => format!("{}", params.alpha() / std::f64::consts::TAU),
    }
}

fn cmd_spectrum(cfg: &RunConfig, out: &mut dyn Write) -> Result<Outcome, CliError> {
    let params = cfg.lattice_params().map_err(CliError::Usage)?;
    let ev = spectral::spectrum(&params, &cfg.potential_expr(), &cfg.bindings()).map_err(runtime)?;
    let mut table = Table::new(["index", "eigenvalue"]);
    for (i, e) in ev.iter().enumerate() {
        table.push(vec![i.to_string(), fmt_float(*e)]);
    }
    if cfg.out.is_some() {
        say(out, format!("spectrum: N = {}, tau = {}, lambda_0 = {}", params.sites(), params.tau(), ev[0]))?;
    }
    let plot = SvgPlot {
        title: format!("spectrum, N = {}", params.sites()),
        xlabel: "index".into(),
        ylabel: "eigenvalue".into(),
        points: ev.iter().enumerate().map(|(i, &e)| (i as f64, e)).collect(),
        lines: Vec::new(),
    };
    emit(cfg, &table, Some(plot), out)?;
    Ok(Outcome::Passed)
}

fn cmd_butterfly(cfg: &RunConfig, out: &mut dyn Write) -> Result<Outcome, CliError> {
    if cfg.qmax > spectral::BUTTERFLY_QMAX_CAP {
        return Err(CliError::Usage(format!("--qmax must be at most {}", spectral::BUTTERFLY_QMAX_CAP)));
    }
    let grid = PhaseGrid { size: cfg.phase_grid };
    let ds = spectral::butterfly_sweep(cfg.qmax, &cfg.potential_expr(), &cfg.bindings(), grid).map_err(runtime)?;
    let mut table = Table::new(["p", "q", "alpha_over_2pi", "theta", "phi", "index", "eigenvalue"]);
    for r in &ds.rows {
        table.push(vec![
            r.p.to_string(),
            r.q.to_string(),
            fmt_float(r.p as f64 / r.q as f64),
            fmt_float(r.theta),
            fmt_float(r.phi),
            r.index.to_string(),
            fmt_float(r.eigenvalue),
        ]);
    }
    if cfg.out.is_some() {
        say(out, format!("butterfly: {} rows", ds.rows.len()))?;
        for b in spectral::gap_report(&ds, DEFAULT_MERGE_TOL) {
            say(out, format!("  p/q = {}/{}: {} band(s), total bandwidth {:.6}", b.p, b.q, b.band_count(), b.total_bandwidth()))?;
        }
    }
    let plot = SvgPlot {
        title: "butterfly".into(),
        xlabel: "alpha / 2pi".into(),
        ylabel: "eigenvalue".into(),
        points: ds.rows.iter().map(|r| (r.p as f64 / r.q as f64, r.eigenvalue)).collect(),
        lines: Vec::new(),
    };
    emit(cfg, &table, Some(plot), out)?;
    Ok(Outcome::Passed)
}

fn cmd_kms(cfg: &RunConfig, out: &mut dyn Write) -> Result<Outcome, CliError> {
    let params = cfg.lattice_params().map_err(CliError::Usage)?;
    let h = lattice::build_hamiltonian(&params, &cfg.potential_expr(), &cfg.bindings()).map_err(runtime)?;
    let decomp = spectral::eig_hermitian(&h).map_err(runtime)?;
    let state = KmsState::new(&decomp, cfg.beta).map_err(runtime)?;
    let q = lattice::build_position_diag(&params).into_matrix();
    let p = lattice::build_momentum(&params).into_matrix();
    let observables: [(&str, CMatrix); 5] = [
        ("identity", CMatrix::identity(params.sites(), params.sites())),
        ("H", h.matrix().clone()),
        ("Q", q.clone()),
        ("Q^2", &q * &q),
        ("P^2", &p * &p),
    ];
    let mut table = Table::new(["observable", "re", "im"]);
    for (name, a) in &observables {
        let w: C64 = state.expect(a);
        table.push(vec![name.to_string(), fmt_float(w.re), fmt_float(w.im)]);
        if cfg.out.is_some() {
            say(out, format!("  <{name}>_beta = {:.12}", w.re))?;
        }
    }
    emit(cfg, &table, None, out)?;
    Ok(Outcome::Passed)
}

fn cmd_sample(cfg: &RunConfig, out: &mut dyn Write) -> Result<Outcome, CliError> {
    let params = cfg.lattice_params().map_err(CliError::Usage)?;
    let grid = TimeGrid::uniform(cfg.beta, cfg.grid).map_err(|e| CliError::Usage(e.to_string()))?;
    let model = Model::new(params, &cfg.potential_expr(), &cfg.bindings()).map_err(runtime)?;
    let batch = process::sample_paths(&model, &grid, cfg.paths, cfg.seed).map_err(runtime)?;
    let mut table = Table::new((0..=grid.steps()).map(|k| format!("t{k}")));
    for i in 0..batch.count() {
        table.push(batch.values(i).into_iter().map(fmt_float).collect());
    }
    if cfg.out.is_some() {
        say(out, format!("sample: {} paths, {} steps, periodic = {}", batch.count(), grid.steps(), batch.is_periodic()))?;
    }
    let plot = SvgPlot {
        title: format!("sample paths, beta = {}", cfg.beta),
        xlabel: "t".into(),
        ylabel: "X_t".into(),
        points: Vec::new(),
        lines: (0..batch.count().min(SVG_PATHS))
            .map(|i| grid.times().iter().copied().zip(batch.values(i)).collect())
            .collect(),
    };
    emit(cfg, &table, Some(plot), out)?;
    Ok(Outcome::Passed)
}

fn cmd_classical(cfg: &RunConfig, out: &mut dyn Write) -> Result<Outcome, CliError> {
    let g = cfg.bindings.get("g").copied().unwrap_or(1.0);
    let traj = classical::integrate(g, cfg.x0, cfg.v0, cfg.dt, cfg.steps).map_err(runtime)?;
    let mut table = Table::new(["t", "x", "v", "E"]);
    for s in &traj {
        table.push(vec![fmt_float(s.t), fmt_float(s.x), fmt_float(s.v), fmt_float(classical::energy(s, g))]);
    }
    if cfg.out.is_some() {
        let e0 = classical::energy(&traj[0], g);
        let e1 = classical::energy(&traj[traj.len() - 1], g);
        say(out, format!("classical: g = {g}, {} steps, relative energy drift {:.3e}", cfg.steps, (e1 - e0).abs() / e0.abs().max(f64::MIN_POSITIVE)))?;
    }
    let plot = SvgPlot {
        title: format!("phase portrait, g = {g}"),
        xlabel: "x".into(),
        ylabel: "v".into(),
        points: Vec::new(),
        lines: vec![traj.iter().map(|s| (s.x, s.v)).collect()],
    };
    emit(cfg, &table, Some(plot), out)?;
    Ok(Outcome::Passed)
}

fn cmd_fourier(cfg: &RunConfig, out: &mut dyn Write) -> Result<Outcome, CliError> {
    let mut params = commensurate_params(cfg, "fourier-check")?;
    if cfg.phi.is_none() {
        params = params
            .with_phases(cfg.theta, LatticeParams::aligned_phi(params.theta(), params.sites()))
            .map_err(|e| CliError::Usage(e.to_string()))?;
    }
    let residual = lattice::fourier_conjugacy_check(&params).map_err(|e| CliError::Usage(e.to_string()))?;
    let pass = residual <= FOURIER_TOL;
    say(out, format!("fourier-check: N = {}, residual {:.3e}  {}", params.sites(), residual, if pass { "ok" } else { "FAIL" }))?;
    if cfg.out.is_some() {
        let mut table = Table::new(["sites", "theta", "phi", "residual", "pass"]);
        table.push(vec![
            params.sites().to_string(),
            fmt_float(params.theta()),
            fmt_float(params.phi()),
            fmt_float(residual),
            pass.to_string(),
        ]);
        emit(cfg, &table, None, out)?;
    }
    Ok(if pass { Outcome::Passed } else { Outcome::Failed })
}
