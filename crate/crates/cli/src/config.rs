//! `key = value` run configuration.
//!
//! One assignment per line, `#` starts a comment. Every key except `gamma`
//! and `t_end` has a default. `bump` may repeat; each occurrence adds one
//! term `weight v1 v2 v3 sigma [amplitude w1 w2 w3]` to a `bump_sum` initial
//! condition.

use std::collections::HashMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use landau_core::field::{Bump, LpExponent};
use landau_core::solver::{CollisionForm, CollisionIntegrator, Positivity, Splitting, TransportScheme};
use landau_core::SolverConfig;
use landau_verify::criteria::Suite;

#[derive(Clone, Debug, PartialEq)]
pub enum InitialData {
    /// `density·exp(−|v|²/temperature)`.
    Maxwellian {
        density: f64,
        temperature: f64,
    },
    BumpSum(Vec<Bump<f64>>),
    File(PathBuf),
}

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub solver: SolverConfig,
    pub n_v: usize,
    pub l_v: f64,
    /// 0 for a spatially homogeneous run.
    pub dim_x: usize,
    pub n_x: usize,
    pub l_x: f64,
    pub initial: InitialData,
    pub suite: Suite,
    pub output_dir: PathBuf,
    pub seed: u64,
    /// Worker threads; 0 lets the pool decide.
    pub threads: usize,
    /// Weight constant `C` and tolerance of `landau compare`.
    pub compare_c: f64,
    pub compare_tol: f64,
}

/// Every problem found in a configuration, one per entry.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfigErrors(pub Vec<String>);

impl fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str("\n")?;
            }
            write!(f, "{e}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigErrors {}

const KEYS: &[&str] = &[
    "gamma",
    "t_end",
    "dt",
    "splitting",
    "collision_form",
    "collision_integrator",
    "transport",
    "k_decay",
    "psi_threshold",
    "psi_p",
    "psi_tilde_ell",
    "mollify_eps",
    "positivity",
    "diag_every",
    "auto_halve",
    "holder_alpha",
    "holder_m",
    "holder_pairs",
    "d2v_extra_weight",
    "n_v",
    "l_v",
    "dim_x",
    "n_x",
    "l_x",
    "initial",
    "density",
    "temperature",
    "bump",
    "suite",
    "output_dir",
    "seed",
    "threads",
    "compare_c",
    "compare_tol",
];

struct Entries {
    map: HashMap<String, (usize, String)>,
    bumps: Vec<(usize, String)>,
    errors: Vec<String>,
}

impl Entries {
    fn take(&mut self, key: &str) -> Option<(usize, String)> {
        self.map.remove(key)
    }

    fn parsed<T: FromStr>(&mut self, key: &str) -> Option<T>
    where
        T::Err: fmt::Display,
    {
        let (line, raw) = self.take(key)?;
        match raw.parse::<T>() {
            Ok(v) => Some(v),
            Err(e) => {
                self.errors.push(format!("line {line}: {key} = {raw:?}: {e}"));
                None
            }
        }
    }

    fn choice<T: Copy>(&mut self, key: &str, options: &[(&str, T)]) -> Option<T> {
        let (line, raw) = self.take(key)?;
        match options.iter().find(|(name, _)| name.eq_ignore_ascii_case(&raw)) {
            Some((_, v)) => Some(*v),
            None => {
                let names: Vec<&str> = options.iter().map(|(n, _)| *n).collect();
                self.errors
                    .push(format!("line {line}: {key} = {raw:?}: expected one of {}", names.join(" | ")));
                None
            }
        }
    }
}

fn tokenize(text: &str) -> Entries {
    let mut e = Entries {
        map: HashMap::new(),
        bumps: Vec::new(),
        errors: Vec::new(),
    };
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            e.errors.push(format!("line {line_no}: expected `key = value`, got {line:?}"));
            continue;
        };
        let (k, v) = (k.trim().to_string(), v.trim().to_string());
        if !KEYS.contains(&k.as_str()) {
            e.errors.push(format!("line {line_no}: unknown key {k:?}"));
        } else if k == "bump" {
            e.bumps.push((line_no, v));
        } else if let Some((prev, _)) = e.map.get(&k) {
            e.errors.push(format!("line {line_no}: {k} already set on line {prev}"));
        } else {
            e.map.insert(k, (line_no, v));
        }
    }
    e
}

fn parse_bump(line: usize, raw: &str, errors: &mut Vec<String>) -> Option<Bump<f64>> {
    let nums: Result<Vec<f64>, _> = raw
        .split(|c: char| c.is_whitespace() || c == ',')
        .filter(|s| !s.is_empty())
        .map(str::parse)
        .collect();
    match nums {
        Ok(n) if n.len() == 5 || n.len() == 9 => {
            let mut b = Bump::new(n[0], [n[1], n[2], n[3]], n[4]);
            if n.len() == 9 {
                b.x_amplitude = n[5];
                b.x_wave = [n[6], n[7], n[8]];
            }
            if !(b.weight >= 0.0 && b.sigma > 0.0 && b.x_amplitude.abs() <= 1.0) {
                errors.push(format!("line {line}: bump needs weight >= 0, sigma > 0 and |amplitude| <= 1"));
                return None;
            }
            Some(b)
        }
        Ok(n) => {
            errors.push(format!("line {line}: bump takes 5 or 9 numbers, got {}", n.len()));
            None
        }
        Err(e) => {
            errors.push(format!("line {line}: bump = {raw:?}: {e}"));
            None
        }
    }
}

/// Parses and validates a configuration, collecting every violation.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigErrors> {
    let mut e = tokenize(text);
    let gamma = e.parsed::<f64>("gamma");
    let t_end = e.parsed::<f64>("t_end");
    if gamma.is_none() && !e.errors.iter().any(|m| m.contains("gamma =")) {
        e.errors.push("gamma is required".into());
    }
    if t_end.is_none() && !e.errors.iter().any(|m| m.contains("t_end =")) {
        e.errors.push("t_end is required".into());
    }
    let mut s = SolverConfig::new(gamma.unwrap_or(-1.0), t_end.unwrap_or(1.0));
    if let Some(v) = e.parsed("dt") {
        s.dt = v;
    }
    if let Some(v) = e.choice("splitting", &[("lie", Splitting::Lie), ("strang", Splitting::Strang)]) {
        s.splitting = v;
    }
    if let Some(v) = e.choice(
        "collision_form",
        &[
            ("divergence", CollisionForm::Divergence),
            ("nondivergence", CollisionForm::Nondivergence),
        ],
    ) {
        s.collision_form = v;
    }
    if let Some(v) = e.choice(
        "collision_integrator",
        &[
            ("explicit-euler", CollisionIntegrator::ExplicitEuler),
            ("semi-implicit-diffusion", CollisionIntegrator::SemiImplicit),
            ("heun", CollisionIntegrator::Heun),
        ],
    ) {
        s.integrator = v;
    }
    if let Some(v) = e.choice(
        "transport",
        &[("cubic", TransportScheme::CubicLagrange), ("spectral", TransportScheme::Spectral)],
    ) {
        s.transport = v;
    }
    if let Some(v) = e.parsed("k_decay") {
        s.k_decay = v;
    }
    if let Some(v) = e.parsed("psi_threshold") {
        s.psi_threshold = v;
    }
    if let Some((line, raw)) = e.take("psi_p") {
        if raw.eq_ignore_ascii_case("inf") {
            s.psi_p = Some(LpExponent::Infinity);
        } else {
            match raw.parse::<f64>() {
                Ok(p) => s.psi_p = Some(LpExponent::Finite(p)),
                Err(err) => e.errors.push(format!("line {line}: psi_p = {raw:?}: {err}")),
            }
        }
    }
    if let Some(v) = e.parsed("psi_tilde_ell") {
        s.psi_tilde_ell = Some(v);
    }
    if let Some(v) = e.parsed("mollify_eps") {
        s.mollify_eps = v;
    }
    if let Some(v) = e.choice("positivity", &[("clamp", Positivity::Clamp), ("off", Positivity::Off)]) {
        s.positivity = v;
    }
    if let Some(v) = e.parsed("diag_every") {
        s.diag_every = v;
    }
    if let Some(v) = e.parsed("auto_halve") {
        s.auto_halve = v;
    }
    if let Some(v) = e.parsed("holder_alpha") {
        s.diagnostics.holder_alpha = v;
    }
    if let Some(v) = e.parsed("holder_m") {
        s.diagnostics.holder_m = v;
    }
    if let Some(v) = e.parsed("holder_pairs") {
        s.diagnostics.holder_pairs = v;
    }
    if let Some(v) = e.parsed("d2v_extra_weight") {
        s.diagnostics.d2v_extra_weight = Some(v);
    }

    let n_v = e.parsed("n_v").unwrap_or(16usize);
    let l_v = e.parsed("l_v").unwrap_or(5.0f64);
    let dim_x = e.parsed("dim_x").unwrap_or(0usize);
    let n_x = e.parsed("n_x").unwrap_or(if dim_x == 0 { 1 } else { 16usize });
    let l_x = e.parsed("l_x").unwrap_or(2.0 * std::f64::consts::PI);
    let density = e.parsed("density").unwrap_or(1.0f64);
    let temperature = e.parsed("temperature").unwrap_or(1.0f64);
    let initial_raw = e.take("initial");
    let bump_lines = std::mem::take(&mut e.bumps);
    let initial = match initial_raw {
        None => Some(InitialData::Maxwellian { density, temperature }),
        Some((_, raw)) if raw == "maxwellian" => Some(InitialData::Maxwellian { density, temperature }),
        Some((line, raw)) if raw == "bump_sum" => {
            let bumps: Vec<_> = bump_lines.iter().filter_map(|(l, b)| parse_bump(*l, b, &mut e.errors)).collect();
            if bump_lines.is_empty() {
                e.errors
                    .push(format!("line {line}: initial = bump_sum needs at least one `bump` line"));
            }
            Some(InitialData::BumpSum(bumps))
        }
        Some((_, raw)) if raw.starts_with("file:") => Some(InitialData::File(PathBuf::from(&raw["file:".len()..]))),
        Some((line, raw)) => {
            e.errors.push(format!(
                "line {line}: initial = {raw:?}: expected maxwellian | bump_sum | file:<path>"
            ));
            None
        }
    };
    if !matches!(initial, Some(InitialData::BumpSum(_))) {
        for (line, _) in &bump_lines {
            e.errors.push(format!("line {line}: bump is only used with initial = bump_sum"));
        }
    }
    let suite = e.parsed("suite").unwrap_or(Suite::All);
    let output_dir = e
        .take("output_dir")
        .map_or_else(|| PathBuf::from("landau-out"), |(_, v)| PathBuf::from(v));
    let seed = e.parsed("seed").unwrap_or(0u64);
    let threads = e.parsed("threads").unwrap_or(0usize);
    let compare_c = e.parsed("compare_c").unwrap_or(1.0f64);
    let compare_tol = e.parsed("compare_tol").unwrap_or(0.0f64);

    if gamma.is_some() && t_end.is_some() {
        e.errors.extend(s.violations());
    }
    if n_v < 4 {
        e.errors.push(format!("n_v = {n_v} must be at least 4"));
    }
    if !(l_v > 0.0 && l_v.is_finite()) {
        e.errors.push(format!("l_v = {l_v} must be positive"));
    }
    if dim_x > 3 {
        e.errors.push(format!("dim_x = {dim_x} must be 0, 1, 2 or 3"));
    }
    if dim_x == 0 && n_x != 1 {
        e.errors.push(format!("n_x = {n_x} must be 1 when dim_x = 0"));
    }
    if dim_x > 0 && n_x < 4 {
        e.errors.push(format!("n_x = {n_x} must be at least 4"));
    }
    if !(l_x > 0.0 && l_x.is_finite()) {
        e.errors.push(format!("l_x = {l_x} must be positive"));
    }
    if !(density > 0.0 && temperature > 0.0) {
        e.errors
            .push(format!("density = {density} and temperature = {temperature} must be positive"));
    }
    if !(compare_c >= 0.0 && compare_tol >= 0.0) {
        e.errors
            .push(format!("compare_c = {compare_c} and compare_tol = {compare_tol} must be >= 0"));
    }
    s.diagnostics.seed = seed;

    if !e.errors.is_empty() {
        return Err(ConfigErrors(e.errors));
    }
    Ok(RunConfig {
        solver: s,
        n_v,
        l_v,
        dim_x,
        n_x,
        l_x,
        initial: initial.expect("checked above"),
        suite,
        output_dir,
        seed,
        threads,
        compare_c,
        compare_tol,
    })
}

impl RunConfig {
    /// Applies `LANDAU_SEED` and `LANDAU_THREADS` when set.
    pub fn apply_env(&mut self, seed: Option<&str>, threads: Option<&str>) -> Result<(), ConfigErrors> {
        let mut errors = Vec::new();
        if let Some(s) = seed {
            match s.trim().parse() {
                Ok(v) => {
                    self.seed = v;
                    self.solver.diagnostics.seed = v;
                }
                Err(e) => errors.push(format!("LANDAU_SEED = {s:?}: {e}")),
            }
        }
        if let Some(t) = threads {
            match t.trim().parse() {
                Ok(v) => self.threads = v,
                Err(e) => errors.push(format!("LANDAU_THREADS = {t:?}: {e}")),
            }
        }
        if errors.is_empty() {
            Ok(())
        } else {
            Err(ConfigErrors(errors))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_fills_defaults() {
        let c = parse_config("gamma = -1\nt_end = 0.1\n").unwrap();
        assert_eq!(c.solver.gamma, -1.0);
        assert_eq!(c.solver.t_end, 0.1);
        assert_eq!(c.solver.k_decay, 6.0);
        assert_eq!(
            c.initial,
            InitialData::Maxwellian {
                density: 1.0,
                temperature: 1.0
            }
        );
        assert_eq!(c.dim_x, 0);
        assert_eq!(c.n_x, 1);
    }

    #[test]
    fn comments_and_blank_lines_are_ignored() {
        let c = parse_config("# run\n\ngamma = -2   # Coulomb-like\nt_end=0.5\nsplitting = lie\n").unwrap();
        assert_eq!(c.solver.splitting, Splitting::Lie);
    }

    #[test]
    fn all_violations_are_listed() {
        let err = parse_config("gamma = 0.5\nt_end = 0.1\nfoo = 1\ndt = -1\nn_v = 2\n").unwrap_err();
        let text = err.to_string();
        assert!(text.contains("unknown key \"foo\""), "{text}");
        assert!(text.contains("gamma = 0.5 must lie in [-3, 0)"), "{text}");
        assert!(text.contains("dt = -1"), "{text}");
        assert!(text.contains("n_v = 2"), "{text}");
    }

    #[test]
    fn k_decay_must_exceed_the_threshold() {
        let err = parse_config("gamma = -1\nt_end = 0.1\nk_decay = 4\n").unwrap_err();
        assert!(err.to_string().contains("k_decay = 4 must exceed"), "{err}");
        // 15/(5 + γ) = 7.5 at γ = −3.
        assert!(parse_config("gamma = -3\nt_end = 0.1\nk_decay = 7\n").is_err());
        assert!(parse_config("gamma = -3\nt_end = 0.1\nk_decay = 7.6\n").is_ok());
    }

    #[test]
    fn gamma_and_t_end_are_required() {
        let err = parse_config("dt = 0.01\n").unwrap_err();
        assert!(err.0.contains(&"gamma is required".to_string()));
        assert!(err.0.contains(&"t_end is required".to_string()));
    }

    #[test]
    fn bump_sum_reads_repeated_lines() {
        let c =
            parse_config("gamma=-1\nt_end=1\ninitial = bump_sum\nbump = 1 0 0 0 0.8\nbump = 0.5, 1, 0, 0, 0.6, 0.2, 1, 0, 0\n").unwrap();
        let InitialData::BumpSum(b) = c.initial else { panic!() };
        assert_eq!(b.len(), 2);
        assert_eq!(b[1].x_amplitude, 0.2);
        assert!(parse_config("gamma=-1\nt_end=1\ninitial = bump_sum\n").is_err());
        assert!(parse_config("gamma=-1\nt_end=1\nbump = 1 0 0 0 1\n").is_err());
    }

    #[test]
    fn file_initial_data_and_enums() {
        let c =
            parse_config("gamma=-1\nt_end=1\ninitial = file:/tmp/f.bin\nsuite = kernel\ncollision_integrator = semi-implicit-diffusion\n")
                .unwrap();
        assert_eq!(c.initial, InitialData::File("/tmp/f.bin".into()));
        assert_eq!(c.suite, Suite::Kernel);
        assert_eq!(c.solver.integrator, CollisionIntegrator::SemiImplicit);
        assert!(parse_config("gamma=-1\nt_end=1\npositivity = maybe\n").is_err());
    }

    #[test]
    fn duplicate_keys_are_rejected() {
        assert!(parse_config("gamma=-1\ngamma=-2\nt_end=1\n").is_err());
    }

    #[test]
    fn environment_overrides() {
        let mut c = parse_config("gamma=-1\nt_end=1\nseed = 3\n").unwrap();
        c.apply_env(Some("11"), Some("2")).unwrap();
        assert_eq!((c.seed, c.solver.diagnostics.seed, c.threads), (11, 11, 2));
        assert!(c.apply_env(Some("x"), None).is_err());
    }
}
