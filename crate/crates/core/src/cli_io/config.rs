//! TOML run configuration. Every section and key is optional; missing
//! values take the defaults of [`RunConfig::default`]. Unknown keys are
//! errors, and every violated constraint is reported at once.
//!
//! ```toml
//! [domain]
//! dim = 1
//! length_x = 1.0
//! convention = "neumann_cosine"   # or "paper_1d"
//! grid_points = 64
//! modes = 16
//!
//! [functionals]
//! p = "31/7"                      # number or "a/b"
//! ```

use std::fmt::Write as _;
use std::path::Path;

use toml::{Table, Value};

use crate::dynamics::{ModelParams, Scheme, SchemeConfig};
use crate::error::{Error, Result};
use crate::experiments::FixedPointConfig;
use crate::functionals::FunctionalConfig;
use crate::noise::NoiseSpec;
use crate::spectral_basis::{DomainSpec, EigenvalueConvention, SpectralBasis};

#[derive(Debug, Clone, PartialEq)]
pub struct InitialConfig {
    /// Relative amplitude of the activator perturbation.
    pub perturbation: f64,
    pub modes_perturbed: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub paths: usize,
    pub first_path: u64,
    pub picard: FixedPointConfig,
    pub uniqueness_delta: f64,
    pub stop_levels: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub domain: DomainSpec,
    pub modes: usize,
    pub params: ModelParams,
    pub scheme: SchemeConfig,
    pub noise: NoiseSpec,
    pub initial: InitialConfig,
    pub functionals: FunctionalConfig,
    pub experiment: ExperimentConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            domain: DomainSpec::interval(1.0, 64),
            modes: 16,
            params: ModelParams::desk(),
            scheme: SchemeConfig::default(),
            noise: NoiseSpec::with_default_gammas(1, 16, 0),
            initial: InitialConfig {
                perturbation: 0.01,
                modes_perturbed: 4,
            },
            functionals: FunctionalConfig::default_for(1),
            experiment: ExperimentConfig {
                paths: 200,
                first_path: 0,
                picard: FixedPointConfig::default(),
                uniqueness_delta: 1e-8,
                stop_levels: vec![1.0, 2.0, 4.0],
            },
        }
    }
}

/// A validated configuration with its non-fatal warnings.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedConfig {
    pub config: RunConfig,
    pub warnings: Vec<String>,
}

pub fn load_config(path: impl AsRef<Path>) -> Result<LoadedConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&text).map_err(|e| match e {
        Error::Config(msg) => Error::Config(format!("{}:\n{msg}", path.display())),
        other => other,
    })
}

const SECTIONS: [(&str, &[&str]); 7] = [
    ("domain", &["dim", "length_x", "length_y", "convention", "grid_points", "modes"]),
    ("model", &["r_u", "r_v", "kappa_u", "kappa_v", "mu_u", "mu_v", "sigma_u", "sigma_v"]),
    ("scheme", &["dt", "horizon", "scheme", "v_floor", "dealias", "reaction_cfl"]),
    ("noise", &["gamma1", "gamma2", "seed"]),
    ("initial", &["perturbation", "modes_perturbed"]),
    ("functionals", &["p", "rho", "stride"]),
    (
        "experiment",
        &[
            "paths",
            "first_path",
            "picard_max_iterations",
            "picard_tolerance",
            "picard_paths",
            "picard_bound_factor",
            "uniqueness_delta",
            "stop_levels",
        ],
    ),
];

struct Reader<'a> {
    source: &'a str,
    errors: Vec<String>,
}

impl Reader<'_> {
    fn line_of(&self, section: &str, key: &str) -> Option<usize> {
        let mut current = "";
        for (i, line) in self.source.lines().enumerate() {
            let t = line.trim();
            if let Some(h) = t.strip_prefix('[').and_then(|r| r.strip_suffix(']')) {
                current = h.trim();
            } else if current == section {
                if let Some(rest) = t.strip_prefix(key) {
                    if rest.trim_start().starts_with('=') {
                        return Some(i + 1);
                    }
                }
            }
        }
        None
    }

    fn err(&mut self, section: &str, key: &str, msg: String) {
        let at = match self.line_of(section, key) {
            Some(l) => format!("line {l}: "),
            None => String::new(),
        };
        self.errors.push(format!("{at}[{section}] {key}: {msg}"));
    }

    fn float(&mut self, t: &Table, section: &str, key: &str, slot: &mut f64) {
        match t.get(key) {
            None => {}
            Some(Value::Float(x)) => *slot = *x,
            Some(Value::Integer(i)) => *slot = *i as f64,
            Some(other) => self.err(section, key, format!("expected a number, got {}", other.type_str())),
        }
    }

    fn uint(&mut self, t: &Table, section: &str, key: &str, slot: &mut usize) {
        let mut x = *slot as u64;
        self.u64(t, section, key, &mut x);
        *slot = x as usize;
    }

    fn u64(&mut self, t: &Table, section: &str, key: &str, slot: &mut u64) {
        match t.get(key) {
            None => {}
            Some(Value::Integer(i)) if *i >= 0 => *slot = *i as u64,
            Some(Value::Integer(i)) => self.err(section, key, format!("must be nonnegative, got {i}")),
            Some(other) => self.err(section, key, format!("expected an integer, got {}", other.type_str())),
        }
    }

    fn boolean(&mut self, t: &Table, section: &str, key: &str, slot: &mut bool) {
        match t.get(key) {
            None => {}
            Some(Value::Boolean(b)) => *slot = *b,
            Some(other) => self.err(section, key, format!("expected a boolean, got {}", other.type_str())),
        }
    }

    fn string<'t>(&mut self, t: &'t Table, section: &str, key: &str) -> Option<&'t str> {
        match t.get(key) {
            None => None,
            Some(Value::String(s)) => Some(s),
            Some(other) => {
                self.err(section, key, format!("expected a string, got {}", other.type_str()));
                None
            }
        }
    }

    /// Integer or a `"0x..."` string, since TOML integers stop at `i64::MAX`.
    fn seed(&mut self, t: &Table, section: &str, key: &str, slot: &mut u64) {
        if let Some(Value::String(s)) = t.get(key) {
            let hex = s.strip_prefix("0x").or_else(|| s.strip_prefix("0X"));
            match hex.and_then(|h| u64::from_str_radix(&h.replace('_', ""), 16).ok()) {
                Some(x) => *slot = x,
                None => self.err(section, key, format!("expected an integer or \"0x...\" string, got {s:?}")),
            }
        } else {
            self.u64(t, section, key, slot);
        }
    }

    /// Number or `"a/b"`.
    fn ratio(&mut self, t: &Table, section: &str, key: &str, slot: &mut f64) {
        if let Some(Value::String(s)) = t.get(key) {
            match parse_ratio(s) {
                Some(x) => *slot = x,
                None => self.err(section, key, format!("expected a number or \"a/b\", got {s:?}")),
            }
        } else {
            self.float(t, section, key, slot);
        }
    }
}

fn parse_ratio(s: &str) -> Option<f64> {
    match s.split_once('/') {
        Some((a, b)) => {
            let (a, b) = (a.trim().parse::<f64>().ok()?, b.trim().parse::<f64>().ok()?);
            (b != 0.0).then_some(a / b)
        }
        None => s.trim().parse().ok(),
    }
}

fn line_col(source: &str, offset: usize) -> (usize, usize) {
    let before = &source[..offset.min(source.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, col)
}

pub fn parse_config(source: &str) -> Result<LoadedConfig> {
    let root: Table = source.parse().map_err(|e: toml::de::Error| {
        let at = e
            .span()
            .map(|s| {
                let (l, c) = line_col(source, s.start);
                format!("line {l}, column {c}: ")
            })
            .unwrap_or_default();
        Error::Config(format!("{at}{}", e.message()))
    })?;
    let mut r = Reader {
        source,
        errors: Vec::new(),
    };
    let empty = Table::new();
    let mut tables = std::collections::BTreeMap::new();
    for (name, value) in &root {
        match (SECTIONS.iter().find(|s| s.0 == name), value) {
            (Some((_, keys)), Value::Table(t)) => {
                for k in t.keys() {
                    if !keys.contains(&k.as_str()) {
                        r.err(name, k, format!("unknown key (expected one of {})", keys.join(", ")));
                    }
                }
                tables.insert(name.as_str(), t);
            }
            (Some(_), _) => r.errors.push(format!("[{name}] must be a table")),
            (None, _) => r.errors.push(format!("unknown section or key {name:?}")),
        }
    }
    let sec = |n: &str| *tables.get(n).unwrap_or(&&empty);
    let mut c = RunConfig::default();

    let t = sec("domain");
    let mut dim = c.domain.dim;
    r.uint(t, "domain", "dim", &mut dim);
    let mut lx = 1.0;
    let mut ly = 1.0;
    r.float(t, "domain", "length_x", &mut lx);
    r.float(t, "domain", "length_y", &mut ly);
    if dim == 1 && t.contains_key("length_y") {
        r.err("domain", "length_y", "only valid when dim = 2".into());
    }
    let mut convention = EigenvalueConvention::NeumannCosine;
    if let Some(s) = r.string(t, "domain", "convention") {
        match EigenvalueConvention::parse(s) {
            Some(cv) => convention = cv,
            None => r.err("domain", "convention", format!("expected \"neumann_cosine\" or \"paper_1d\", got {s:?}")),
        }
    }
    let mut n = c.domain.grid_points;
    r.uint(t, "domain", "grid_points", &mut n);
    r.uint(t, "domain", "modes", &mut c.modes);
    c.domain = DomainSpec {
        dim,
        lengths: if dim == 2 { vec![lx, ly] } else { vec![lx] },
        convention,
        grid_points: n,
    };

    let t = sec("model");
    let p = &mut c.params;
    for (key, slot) in [
        ("r_u", &mut p.r_u),
        ("r_v", &mut p.r_v),
        ("kappa_u", &mut p.kappa_u),
        ("kappa_v", &mut p.kappa_v),
        ("mu_u", &mut p.mu_u),
        ("mu_v", &mut p.mu_v),
        ("sigma_u", &mut p.sigma_u),
        ("sigma_v", &mut p.sigma_v),
    ] {
        r.float(t, "model", key, slot);
    }

    let t = sec("scheme");
    let s = &mut c.scheme;
    r.float(t, "scheme", "dt", &mut s.dt);
    r.float(t, "scheme", "horizon", &mut s.horizon);
    r.float(t, "scheme", "v_floor", &mut s.v_floor);
    r.float(t, "scheme", "reaction_cfl", &mut s.reaction_cfl);
    r.boolean(t, "scheme", "dealias", &mut s.dealias);
    if let Some(name) = r.string(t, "scheme", "scheme") {
        match Scheme::parse(name) {
            Some(k) => s.scheme = k,
            None => r.err("scheme", "scheme", format!("expected \"ito_imex\" or \"stratonovich_heun\", got {name:?}")),
        }
    }

    let t = sec("noise");
    c.noise = NoiseSpec::with_default_gammas(dim, c.modes, 0);
    r.float(t, "noise", "gamma1", &mut c.noise.gamma1);
    r.float(t, "noise", "gamma2", &mut c.noise.gamma2);
    r.seed(t, "noise", "seed", &mut c.noise.master_seed);

    let t = sec("initial");
    r.float(t, "initial", "perturbation", &mut c.initial.perturbation);
    r.uint(t, "initial", "modes_perturbed", &mut c.initial.modes_perturbed);

    let t = sec("functionals");
    c.functionals = FunctionalConfig::default_for(dim);
    r.ratio(t, "functionals", "p", &mut c.functionals.p);
    r.float(t, "functionals", "rho", &mut c.functionals.rho);
    r.uint(t, "functionals", "stride", &mut c.functionals.stride);

    let t = sec("experiment");
    let e = &mut c.experiment;
    r.uint(t, "experiment", "paths", &mut e.paths);
    r.u64(t, "experiment", "first_path", &mut e.first_path);
    r.uint(t, "experiment", "picard_max_iterations", &mut e.picard.max_iterations);
    r.float(t, "experiment", "picard_tolerance", &mut e.picard.tolerance);
    r.uint(t, "experiment", "picard_paths", &mut e.picard.ensemble_size);
    r.float(t, "experiment", "picard_bound_factor", &mut e.picard.bound_factor);
    r.float(t, "experiment", "uniqueness_delta", &mut e.uniqueness_delta);
    match t.get("stop_levels") {
        None => {}
        Some(Value::Array(a)) => {
            let levels: Option<Vec<f64>> = a
                .iter()
                .map(|v| match v {
                    Value::Float(x) => Some(*x),
                    Value::Integer(i) => Some(*i as f64),
                    _ => None,
                })
                .collect();
            match levels {
                Some(l) => e.stop_levels = l,
                None => r.err("experiment", "stop_levels", "expected an array of numbers".into()),
            }
        }
        Some(other) => r.err("experiment", "stop_levels", format!("expected an array, got {}", other.type_str())),
    }

    let mut errors = r.errors;
    let warnings = c.validate_into(&mut errors);
    if errors.is_empty() {
        Ok(LoadedConfig { config: c, warnings })
    } else {
        Err(Error::Config(errors.join("\n")))
    }
}

impl RunConfig {
    /// Appends hard errors to `errors` and returns warnings.
    fn validate_into(&self, errors: &mut Vec<String>) -> Vec<String> {
        let domain = self.domain.violations();
        let domain_ok = domain.is_empty();
        errors.extend(domain);
        if self.modes == 0 {
            errors.push("[domain] modes must be positive".into());
        } else if domain_ok {
            if let Err(e) = SpectralBasis::check_fits(&self.domain, self.modes) {
                errors.push(format!("[domain] {e}"));
            }
        }
        errors.extend(self.params.violations().into_iter().map(|m| format!("[model] {m}")));
        errors.extend(self.scheme.violations().into_iter().map(|m| format!("[scheme] {m}")));
        errors.extend(self.noise.violations().into_iter().map(|m| format!("[noise] {m}")));
        if !(self.initial.perturbation.is_finite() && self.initial.perturbation.abs() < 1.0) {
            errors.push(format!(
                "[initial] perturbation must lie in (-1, 1) to keep the activator positive, got {}",
                self.initial.perturbation
            ));
        }
        errors.extend(
            self.functionals
                .violations(self.domain.dim)
                .into_iter()
                .map(|m| format!("[functionals] {m}")),
        );
        let e = &self.experiment;
        if e.paths < 2 {
            errors.push(format!("[experiment] paths must be at least 2, got {}", e.paths));
        }
        errors.extend(e.picard.violations().into_iter().map(|m| format!("[experiment] {m}")));
        if !(e.uniqueness_delta >= 0.0 && e.uniqueness_delta.is_finite()) {
            errors.push(format!("[experiment] uniqueness_delta must be >= 0, got {}", e.uniqueness_delta));
        }
        let stop = crate::experiments::StoppingSpec {
            levels: e.stop_levels.clone(),
        };
        errors.extend(stop.violations().into_iter().map(|m| format!("[experiment] {m}")));
        self.noise
            .warnings(self.domain.dim)
            .into_iter()
            .map(|m| format!("[noise] {m}"))
            .collect()
    }

    pub fn validate(&self) -> Result<Vec<String>> {
        let mut errors = Vec::new();
        let warnings = self.validate_into(&mut errors);
        if errors.is_empty() {
            Ok(warnings)
        } else {
            Err(Error::Config(errors.join("\n")))
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.noise.master_seed = seed;
        self
    }

    /// Full configuration as TOML; parsing it back gives the same value.
    pub fn echo(&self) -> String {
        let mut s = String::new();
        let d = &self.domain;
        let _ = writeln!(s, "[domain]");
        let _ = writeln!(s, "dim = {}", d.dim);
        let _ = writeln!(s, "length_x = {:?}", d.lengths[0]);
        if d.dim == 2 {
            let _ = writeln!(s, "length_y = {:?}", d.lengths[1]);
        }
        let _ = writeln!(s, "convention = \"{}\"", d.convention.as_str());
        let _ = writeln!(s, "grid_points = {}", d.grid_points);
        let _ = writeln!(s, "modes = {}", self.modes);
        let _ = writeln!(s, "\n[model]");
        for (k, v) in self.params.named() {
            let _ = writeln!(s, "{k} = {v:?}");
        }
        let sc = &self.scheme;
        let _ = writeln!(s, "\n[scheme]");
        let _ = writeln!(s, "dt = {:?}", sc.dt);
        let _ = writeln!(s, "horizon = {:?}", sc.horizon);
        let _ = writeln!(s, "scheme = \"{}\"", sc.scheme.as_str());
        let _ = writeln!(s, "v_floor = {:?}", sc.v_floor);
        let _ = writeln!(s, "dealias = {}", sc.dealias);
        let _ = writeln!(s, "reaction_cfl = {:?}", sc.reaction_cfl);
        let _ = writeln!(s, "\n[noise]");
        let _ = writeln!(s, "gamma1 = {:?}", self.noise.gamma1);
        let _ = writeln!(s, "gamma2 = {:?}", self.noise.gamma2);
        let seed = self.noise.master_seed;
        if seed > i64::MAX as u64 {
            let _ = writeln!(s, "seed = \"{seed:#018x}\"");
        } else {
            let _ = writeln!(s, "seed = {seed}");
        }
        let _ = writeln!(s, "\n[initial]");
        let _ = writeln!(s, "perturbation = {:?}", self.initial.perturbation);
        let _ = writeln!(s, "modes_perturbed = {}", self.initial.modes_perturbed);
        let f = &self.functionals;
        let _ = writeln!(s, "\n[functionals]");
        let _ = writeln!(s, "p = {:?}", f.p);
        let _ = writeln!(s, "rho = {:?}", f.rho);
        let _ = writeln!(s, "stride = {}", f.stride);
        let e = &self.experiment;
        let _ = writeln!(s, "\n[experiment]");
        let _ = writeln!(s, "paths = {}", e.paths);
        let _ = writeln!(s, "first_path = {}", e.first_path);
        let _ = writeln!(s, "picard_max_iterations = {}", e.picard.max_iterations);
        let _ = writeln!(s, "picard_tolerance = {:?}", e.picard.tolerance);
        let _ = writeln!(s, "picard_paths = {}", e.picard.ensemble_size);
        let _ = writeln!(s, "picard_bound_factor = {:?}", e.picard.bound_factor);
        let _ = writeln!(s, "uniqueness_delta = {:?}", e.uniqueness_delta);
        let levels: Vec<String> = e.stop_levels.iter().map(|x| format!("{x:?}")).collect();
        let _ = writeln!(s, "stop_levels = [{}]", levels.join(", "));
        s
    }

    pub fn build_basis(&self) -> Result<SpectralBasis> {
        SpectralBasis::build(&self.domain, self.modes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_default_and_echo_is_stable() {
        let a = parse_config("").unwrap();
        assert_eq!(a.config, RunConfig::default());
        assert!(a.warnings.is_empty());
        let echo = a.config.echo();
        let b = parse_config(&echo).unwrap();
        assert_eq!(b.config, a.config);
        assert_eq!(b.config.echo(), echo);
    }

    #[test]
    fn small_gamma_warns() {
        let a = parse_config("[noise]\ngamma1 = 0.5\n").unwrap();
        assert_eq!(a.warnings.len(), 1);
        assert!(a.warnings[0].contains("gamma1"));
    }

    #[test]
    fn all_violations_reported() {
        let err = parse_config("[model]\nkappa_u = -1\nmu_v = 0.0\n\n[scheme]\ndt = 0.3\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("kappa_u must be strictly positive"));
        assert!(msg.contains("mu_v"));
        assert!(msg.contains("integer"));
    }

    #[test]
    fn unknown_key_has_line() {
        let err = parse_config("[model]\nr_u = 0.01\nkapa_u = 1.0\n").unwrap_err();
        assert!(err.to_string().contains("line 3: [model] kapa_u: unknown key"));
        let err = parse_config("[modle]\n").unwrap_err();
        assert!(err.to_string().contains("modle"));
    }

    #[test]
    fn syntax_error_has_line() {
        let err = parse_config("[model]\nr_u = = 1\n").unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
    }

    #[test]
    fn p_presets() {
        let a = parse_config("[functionals]\np = \"31/7\"\n").unwrap();
        assert_eq!(a.config.functionals.p, 31.0 / 7.0);
        let a = parse_config("[functionals]\np = 20\n").unwrap();
        assert_eq!(a.config.functionals.p, 20.0);
    }

    #[test]
    fn two_dimensional_defaults() {
        let a = parse_config("[domain]\ndim = 2\nlength_y = 2.0\ngrid_points = 32\nmodes = 10\n").unwrap();
        assert_eq!(a.config.noise.gamma1, 3.0);
        assert_eq!(a.config.functionals.rho, 1.1);
        assert_eq!(parse_config(&a.config.echo()).unwrap().config, a.config);
        assert!(parse_config("[domain]\nmodes = 40\ngrid_points = 64\n").is_err());
    }
}
