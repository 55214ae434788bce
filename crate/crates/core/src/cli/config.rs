//! Flat `key=value` configuration and its resolution into a [`RunConfig`].

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use crate::expr::{Bindings, PotentialExpr};
use crate::lattice::LatticeParams;

/// Keys accepted in config files; each matches a long flag.
pub const KEYS: &[&str] = &[
    "tau",
    "p",
    "q",
    "sites",
    "theta",
    "phi",
    "potential",
    "param",
    "beta",
    "grid",
    "paths",
    "seed",
    "qmax",
    "phase-grid",
    "out",
    "svg",
    "threads",
    "x0",
    "v0",
    "dt",
    "steps",
];

pub const DEFAULT_SITES: usize = 16;
pub const DEFAULT_POTENTIAL: &str = "x^2/2";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum CommandKind {
    Verify,
    Spectrum,
    Butterfly,
    Kms,
    Sample,
    Classical,
    FourierCheck,
}

impl CommandKind {
    pub fn name(self) -> &'static str {
        match self {
            CommandKind::Verify => "verify",
            CommandKind::Spectrum => "spectrum",
            CommandKind::Butterfly => "butterfly",
            CommandKind::Kms => "kms",
            CommandKind::Sample => "sample",
            CommandKind::Classical => "classical",
            CommandKind::FourierCheck => "fourier-check",
        }
    }
}

/// Parse `key=value` lines. Blank lines and `#` comments are skipped.
pub fn parse_config_text(text: &str) -> Result<Vec<(String, String)>, String> {
    let mut out = Vec::new();
    for (no, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| format!("line {}: expected key=value", no + 1))?;
        let k = k.trim();
        if !KEYS.contains(&k) {
            return Err(format!("line {}: unknown key '{k}'", no + 1));
        }
        out.push((k.to_string(), v.trim().to_string()));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub enum LatticeChoice {
    Commensurate { p: i64, sites: usize },
    Truncated { tau: f64, sites: usize },
}

/// Fully resolved and validated run configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: CommandKind,
    pub lattice: LatticeChoice,
    pub theta: f64,
    /// `None` means the command default (aligned for `fourier-check`, 0 otherwise).
    pub phi: Option<f64>,
    pub potential: String,
    pub bindings: BTreeMap<String, f64>,
    pub beta: f64,
    pub grid: usize,
    pub paths: usize,
    pub seed: u64,
    pub qmax: usize,
    pub phase_grid: usize,
    pub out: Option<PathBuf>,
    pub svg: Option<PathBuf>,
    pub threads: Option<usize>,
    pub x0: f64,
    pub v0: f64,
    pub dt: f64,
    pub steps: usize,
}

fn parse_num<T: FromStr>(key: &str, v: &str) -> Result<T, String> {
    v.parse().map_err(|_| format!("--{key}: cannot parse '{v}'"))
}

fn positive(key: &str, v: f64) -> Result<f64, String> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(format!("--{key} must be positive and finite, got {v}"))
    }
}

fn finite(key: &str, v: f64) -> Result<f64, String> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("--{key} must be finite, got {v}"))
    }
}

fn at_least_one(key: &str, v: usize) -> Result<usize, String> {
    if v >= 1 {
        Ok(v)
    } else {
        Err(format!("--{key} must be at least 1"))
    }
}

impl RunConfig {
    /// Resolve entries in order; later entries override earlier ones, except
    /// `param`, which overrides per parameter name.
    pub fn resolve(command: CommandKind, entries: &[(String, String)]) -> Result<Self, String> {
        let mut map: BTreeMap<&str, &str> = BTreeMap::new();
        let mut bindings = BTreeMap::new();
        for (k, v) in entries {
            if k == "param" {
                let (name, value) = v.split_once('=').ok_or_else(|| format!("--param expects NAME=VALUE, got '{v}'"))?;
                let name = name.trim();
                if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') || name == "x" {
                    return Err(format!("--param: invalid parameter name '{name}'"));
                }
                bindings.insert(name.to_string(), finite("param", parse_num("param", value.trim())?)?);
            } else {
                map.insert(k.as_str(), v.as_str());
            }
        }
        let get = |k: &str| map.get(k).copied();
        let f64_or = |k: &str, d: f64| -> Result<f64, String> { get(k).map_or(Ok(d), |v| parse_num(k, v)) };
        let usize_or = |k: &str, d: usize| -> Result<usize, String> { get(k).map_or(Ok(d), |v| parse_num(k, v)) };

        let sites: Option<usize> = get("sites").map(|v| parse_num("sites", v)).transpose()?;
        let q: Option<usize> = get("q").map(|v| parse_num("q", v)).transpose()?;
        let lattice = if let Some(tau) = get("tau") {
            if get("p").is_some() || q.is_some() {
                return Err("--tau selects truncated mode and cannot be combined with --p or --q".into());
            }
            let tau = positive("tau", parse_num("tau", tau)?)?;
            LatticeChoice::Truncated { tau, sites: at_least_one("sites", sites.unwrap_or(DEFAULT_SITES))? }
        } else {
            let p: i64 = get("p").map_or(Ok(1), |v| parse_num("p", v))?;
            if p < 1 {
                return Err(format!("--p must be at least 1, got {p}"));
            }
            let n = match (sites, q) {
                (Some(s), Some(q)) if s != q => {
                    return Err(format!("--sites {s} and --q {q} disagree; commensurate mode uses N = q"))
                }
                (Some(s), _) | (None, Some(s)) => s,
                (None, None) => DEFAULT_SITES,
            };
            LatticeChoice::Commensurate { p, sites: at_least_one("sites", n)? }
        };

        let potential = get("potential").unwrap_or(DEFAULT_POTENTIAL).to_string();
        let expr = PotentialExpr::parse(&potential).map_err(|e| format!("--potential: {e}"))?;
        let b: Bindings = bindings.iter().map(|(k, v)| (k.clone(), *v)).collect();
        if command != CommandKind::Classical && command != CommandKind::Verify {
            expr.check_bound(&b).map_err(|e| format!("--potential: {e}"))?;
        }

        let threads = get("threads").map(|v| parse_num("threads", v).and_then(|t| at_least_one("threads", t))).transpose()?;
        Ok(RunConfig {
            command,
            lattice,
            theta: finite("theta", f64_or("theta", 0.0)?)?,
            phi: get("phi").map(|v| parse_num("phi", v).and_then(|x| finite("phi", x))).transpose()?,
            potential,
            bindings,
            beta: positive("beta", f64_or("beta", 1.0)?)?,
            grid: at_least_one("grid", usize_or("grid", 8)?)?,
            paths: at_least_one("paths", usize_or("paths", 1000)?)?,
            seed: get("seed").map_or(Ok(0), |v| parse_num("seed", v))?,
            qmax: at_least_one("qmax", usize_or("qmax", 12)?)?,
            phase_grid: at_least_one("phase-grid", usize_or("phase-grid", 8)?)?,
            out: get("out").map(PathBuf::from),
            svg: get("svg").map(PathBuf::from),
            threads,
            x0: finite("x0", f64_or("x0", 1.0)?)?,
            v0: finite("v0", f64_or("v0", 0.0)?)?,
            dt: positive("dt", f64_or("dt", 1e-3)?)?,
            steps: at_least_one("steps", usize_or("steps", 10_000)?)?,
        })
    }

    pub fn potential_expr(&self) -> PotentialExpr {
        PotentialExpr::parse(&self.potential).expect("validated during resolution")
    }

    pub fn bindings(&self) -> Bindings {
        self.bindings.iter().map(|(k, v)| (k.clone(), *v)).collect()
    }

    pub fn sites(&self) -> usize {
        match self.lattice {
            LatticeChoice::Commensurate { sites, .. } | LatticeChoice::Truncated { sites, .. } => sites,
        }
    }

    pub fn lattice_params(&self) -> Result<LatticeParams, String> {
        let phi = self.phi.unwrap_or(0.0);
        let r = match self.lattice {
            LatticeChoice::Commensurate { p, sites } => LatticeParams::commensurate(p, sites, self.theta, phi),
            LatticeChoice::Truncated { tau, sites } => LatticeParams::truncated(tau, sites, self.theta, phi),
        };
        r.map_err(|e| e.to_string())
    }

    /// The resolved configuration as config-file text. `threads` is left out
    /// since it never affects output bytes.
    pub fn manifest(&self) -> String {
        let mut kv: Vec<(String, String)> = Vec::new();
        let mut push = |k: &str, v: String| kv.push((k.to_string(), v));
        match self.lattice {
            LatticeChoice::Commensurate { p, sites } => {
                push("p", p.to_string());
                push("sites", sites.to_string());
            }
            LatticeChoice::Truncated { tau, sites } => {
                push("tau", tau.to_string());
                push("sites", sites.to_string());
            }
        }
        push("theta", self.theta.to_string());
        if let Some(phi) = self.phi {
            push("phi", phi.to_string());
        }
        push("potential", self.potential.clone());
        for (k, v) in &self.bindings {
            push("param", format!("{k}={v}"));
        }
        push("beta", self.beta.to_string());
        push("grid", self.grid.to_string());
        push("paths", self.paths.to_string());
        push("seed", self.seed.to_string());
        push("qmax", self.qmax.to_string());
        push("phase-grid", self.phase_grid.to_string());
        if let Some(o) = &self.out {
            push("out", o.display().to_string());
        }
        if let Some(s) = &self.svg {
            push("svg", s.display().to_string());
        }
        push("x0", self.x0.to_string());
        push("v0", self.v0.to_string());
        push("dt", self.dt.to_string());
        push("steps", self.steps.to_string());
        let mut s = format!("# ccrlab {}\n", self.command.name());
        for (k, v) in kv {
            let _ = writeln!(s, "{k}={v}");
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entries(pairs: &[(&str, &str)]) -> Vec<(String, String)> {
        pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
    }

    #[test]
    fn config_text() {
        let e = parse_config_text("# comment\n\nbeta = 2\nparam=g=0.5\n").unwrap();
        assert_eq!(e, entries(&[("beta", "2"), ("param", "g=0.5")]));
        assert!(parse_config_text("nope=1").is_err());
        assert!(parse_config_text("beta").is_err());
    }

    #[test]
    fn later_entries_override() {
        let c = RunConfig::resolve(CommandKind::Kms, &entries(&[("beta", "2"), ("beta", "3")])).unwrap();
        assert_eq!(c.beta, 3.0);
    }

    #[test]
    fn lattice_resolution() {
        let c = RunConfig::resolve(CommandKind::Verify, &entries(&[("p", "3"), ("q", "7")])).unwrap();
        assert_eq!(c.lattice, LatticeChoice::Commensurate { p: 3, sites: 7 });
        assert!(RunConfig::resolve(CommandKind::Verify, &entries(&[("q", "7"), ("sites", "8")])).is_err());
        assert!(RunConfig::resolve(CommandKind::Spectrum, &entries(&[("tau", "0.5"), ("p", "2")])).is_err());
        let t = RunConfig::resolve(CommandKind::Spectrum, &entries(&[("tau", "0.5"), ("sites", "9")])).unwrap();
        assert_eq!(t.lattice, LatticeChoice::Truncated { tau: 0.5, sites: 9 });
    }

    #[test]
    fn unbound_parameter_is_usage_error() {
        assert!(RunConfig::resolve(CommandKind::Spectrum, &entries(&[("potential", "g*x^4")])).is_err());
        let c = RunConfig::resolve(CommandKind::Spectrum, &entries(&[("potential", "g*x^4"), ("param", "g=2")])).unwrap();
        assert_eq!(c.bindings["g"], 2.0);
    }

    #[test]
    fn manifest_round_trips() {
        let c = RunConfig::resolve(
            CommandKind::Sample,
            &entries(&[("beta", "0.1"), ("param", "g=1e-3"), ("threads", "3"), ("phi", "0.25")]),
        )
        .unwrap();
        let m = c.manifest();
        assert!(!m.contains("threads"));
        let again = RunConfig::resolve(CommandKind::Sample, &parse_config_text(&m).unwrap()).unwrap();
        assert_eq!(again, RunConfig { threads: None, ..c });
    }
}
