//! Line-oriented `section.key = value` run configuration.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use serde::Serialize;
use ssprofile::shrinker::CandidateSpec;
use ssprofile::{BoundaryData, Mode, PhysicalParams, Regime};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    SolveExpander,
    VerifyResiduals,
    Scan,
    ShrinkerAudit,
    Constants,
}

impl Command {
    pub const ALL: [Command; 5] =
        [Command::SolveExpander, Command::VerifyResiduals, Command::Scan, Command::ShrinkerAudit, Command::Constants];

    pub fn name(self) -> &'static str {
        match self {
            Command::SolveExpander => "solve-expander",
            Command::VerifyResiduals => "verify-residuals",
            Command::Scan => "scan",
            Command::ShrinkerAudit => "shrinker-audit",
            Command::Constants => "constants",
        }
    }

    pub fn parse(s: &str) -> Option<Command> {
        Command::ALL.into_iter().find(|c| c.name() == s)
    }
}

/// Boundary data as written; unset temperature and norm exponent are resolved per parameter set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundarySpec {
    pub a: f64,
    pub delta: f64,
    pub p_delta: f64,
    pub theta0: Option<f64>,
    pub eps: Option<f64>,
}

impl BoundarySpec {
    /// Theta0 defaults to 1e-3 for alpha < 1 and to its forced value at alpha = 1; eps defaults to the
    /// point 3/4 of the way through its admissible interval for alpha < 1 and to 1/2 at alpha = 1.
    pub fn resolve(&self, params: &PhysicalParams) -> BoundaryData {
        let (theta0, eps) = match params.regime() {
            Regime::AlphaLtOne => (self.theta0.unwrap_or(1e-3), self.eps.unwrap_or(0.75 * (1.0 - params.alpha))),
            Regime::AlphaOne => {
                (self.theta0.unwrap_or_else(|| BoundaryData::forced_theta0(params, self.a)), self.eps.unwrap_or(0.5))
            }
        };
        BoundaryData { a_slope: self.a, delta: self.delta, p_delta: self.p_delta, theta0, eps_norm: eps }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridSpec {
    pub inner: usize,
    pub outer: usize,
    /// Defaults to 50/delta.
    pub r_max: Option<f64>,
    /// Defaults to 1e-4 delta.
    pub r_min: Option<f64>,
}

impl GridSpec {
    pub fn r_max(&self, delta: f64) -> f64 {
        self.r_max.unwrap_or(50.0 / delta)
    }

    pub fn r_min(&self, delta: f64) -> f64 {
        self.r_min.unwrap_or(1e-4 * delta)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Tolerances {
    pub picard: f64,
    pub max_iter: usize,
    pub ode: f64,
    pub smallness: f64,
    pub residual: f64,
    pub rate: f64,
}

/// Which verdicts decide the exit status.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Checks {
    pub smallness: bool,
    pub monitor: bool,
    pub residual: bool,
    pub asymptotics: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scale {
    Linear,
    Log,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanAxis {
    /// Full key of the scanned value, e.g. `boundary.a`.
    pub key: String,
    pub min: f64,
    pub max: f64,
    pub count: usize,
    pub scale: Scale,
}

impl ScanAxis {
    pub fn values(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.min];
        }
        let m = (self.count - 1) as f64;
        (0..self.count)
            .map(|i| {
                let t = i as f64 / m;
                match self.scale {
                    _ if i == 0 => self.min,
                    _ if i == self.count - 1 => self.max,
                    Scale::Linear => self.min + t * (self.max - self.min),
                    Scale::Log => (self.min.ln() + t * (self.max.ln() - self.min.ln())).exp(),
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CandidateKind {
    Zero,
    Family,
    File,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditSpec {
    pub candidate: CandidateKind,
    pub family: CandidateSpec,
    pub p_const: f64,
    pub eps: f64,
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub command: Command,
    pub params: PhysicalParams,
    pub boundary: BoundarySpec,
    pub grid: GridSpec,
    pub tol: Tolerances,
    pub checks: Checks,
    pub output_dir: PathBuf,
    pub input_profile: Option<PathBuf>,
    pub input_mode: Mode,
    pub scan: Vec<ScanAxis>,
    pub audit: AuditSpec,
}

const PHYSICS: [&str; 6] = ["physics.alpha", "physics.c_v", "physics.kappa", "physics.gas_r", "physics.mu0", "physics.lambda0"];

const KEYS: [&str; 39] = [
    "run.command",
    "physics.d",
    "physics.alpha",
    "physics.c_v",
    "physics.kappa",
    "physics.gas_r",
    "physics.mu0",
    "physics.lambda0",
    "boundary.a",
    "boundary.delta",
    "boundary.p_delta",
    "boundary.theta0",
    "boundary.eps",
    "grid.inner",
    "grid.outer",
    "grid.r_max",
    "grid.r_min",
    "tol.picard",
    "tol.max_iter",
    "tol.ode",
    "tol.smallness",
    "tol.residual",
    "tol.rate",
    "checks.smallness",
    "checks.monitor",
    "checks.residual",
    "checks.asymptotics",
    "output.dir",
    "input.profile",
    "input.mode",
    "audit.candidate",
    "audit.theta_amp",
    "audit.u_ratio",
    "audit.p_inf",
    "audit.p_power",
    "audit.p_scale",
    "audit.p_const",
    "audit.eps",
    "audit.threshold",
];

/// Keys a scan may vary.
pub const SCANNABLE: [&str; 11] = [
    "physics.alpha",
    "physics.c_v",
    "physics.kappa",
    "physics.gas_r",
    "physics.mu0",
    "physics.lambda0",
    "boundary.a",
    "boundary.delta",
    "boundary.p_delta",
    "boundary.theta0",
    "boundary.eps",
];

fn known(key: &str) -> bool {
    KEYS.contains(&key) || key.strip_prefix("scan.").is_some_and(|k| SCANNABLE.contains(&k))
}

#[derive(Debug, Clone)]
struct Entry {
    value: String,
    line: usize,
}

/// Splits the document into key/value entries. Override lines are numbered after the document.
fn tokenize(text: &str, overrides: &[(String, String)]) -> Result<BTreeMap<String, Entry>, CliError> {
    let mut map = BTreeMap::new();
    let n = text.lines().count();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = raw.split('#').next().unwrap().trim();
        if body.is_empty() {
            continue;
        }
        let (k, v) = body.split_once('=').ok_or_else(|| CliError::Parse { line, message: format!("expected `section.key = value`, found {body:?}") })?;
        let (k, v) = (k.trim(), v.trim());
        if !k.contains('.') || k.starts_with('.') || k.ends_with('.') {
            return Err(CliError::Parse { line, message: format!("key {k:?} is not of the form section.key") });
        }
        if v.is_empty() {
            return Err(CliError::Parse { line, message: format!("missing value for {k}") });
        }
        if !known(k) {
            return Err(CliError::Parse { line, message: format!("unknown key {k}") });
        }
        if map.insert(k.to_string(), Entry { value: v.to_string(), line }).is_some() {
            return Err(CliError::Parse { line, message: format!("duplicate key {k}") });
        }
    }
    for (j, (k, v)) in overrides.iter().enumerate() {
        let line = n + j + 1;
        if !known(k) {
            return Err(CliError::Parse { line, message: format!("unknown key {k} in override") });
        }
        map.insert(k.clone(), Entry { value: v.clone(), line });
    }
    Ok(map)
}

struct Fields {
    map: BTreeMap<String, Entry>,
}

impl Fields {
    fn raw(&self, key: &str) -> Option<&Entry> {
        self.map.get(key)
    }

    fn f64(&self, key: &str) -> Result<Option<f64>, CliError> {
        match self.raw(key) {
            None => Ok(None),
            Some(e) => e
                .value
                .parse::<f64>()
                .map(Some)
                .map_err(|_| CliError::Parse { line: e.line, message: format!("{key}: expected a number, found {:?}", e.value) }),
        }
    }

    fn usize(&self, key: &str) -> Result<Option<usize>, CliError> {
        match self.raw(key) {
            None => Ok(None),
            Some(e) => e
                .value
                .parse::<usize>()
                .map(Some)
                .map_err(|_| CliError::Parse { line: e.line, message: format!("{key}: expected a nonnegative integer, found {:?}", e.value) }),
        }
    }

    fn bool(&self, key: &str) -> Result<Option<bool>, CliError> {
        match self.raw(key) {
            None => Ok(None),
            Some(e) => match e.value.as_str() {
                "true" => Ok(Some(true)),
                "false" => Ok(Some(false)),
                v => Err(CliError::Parse { line: e.line, message: format!("{key}: expected true or false, found {v:?}") }),
            },
        }
    }

    fn str(&self, key: &str) -> Option<&str> {
        self.raw(key).map(|e| e.value.as_str())
    }

    fn required_f64(&self, key: &str) -> Result<f64, CliError> {
        self.f64(key)?.ok_or_else(|| invalid(key, "required"))
    }
}

fn invalid(field: &str, message: &str) -> CliError {
    CliError::Validation { field: field.to_string(), message: message.to_string() }
}

/// Maps a core validation message to the config key it concerns.
fn field_of(message: &str) -> &'static str {
    const MAP: [(&str, &str); 12] = [
        ("d ", "physics.d"),
        ("alpha", "physics.alpha"),
        ("mu0", "physics.mu0"),
        ("c_v", "physics.c_v"),
        ("kappa", "physics.kappa"),
        ("gas_r", "physics.gas_r"),
        ("lambda0", "physics.lambda0"),
        ("a_slope", "boundary.a"),
        ("delta", "boundary.delta"),
        ("p_delta", "boundary.p_delta"),
        ("theta0", "boundary.theta0"),
        ("eps_norm", "boundary.eps"),
    ];
    MAP.iter().find(|(p, _)| message.starts_with(p)).map(|(_, f)| *f).unwrap_or("config")
}

fn core_invalid(e: ssprofile::Error) -> CliError {
    match e {
        ssprofile::Error::InvalidArgument(m) => invalid(field_of(&m), &m),
        other => CliError::Core(other),
    }
}

/// Builds and validates the physical constants and boundary data of a parameter set.
pub fn validate_point(params: &PhysicalParams, boundary: &BoundarySpec) -> Result<BoundaryData, CliError> {
    params.validate().map_err(core_invalid)?;
    let bd = boundary.resolve(params);
    bd.validate(params).map_err(core_invalid)?;
    Ok(bd)
}

pub fn parse_config(text: &str) -> Result<RunConfig, CliError> {
    parse_config_with(text, &[])
}

/// Parses a document, then applies `section.key = value` overrides on top of it.
pub fn parse_config_with(text: &str, overrides: &[(String, String)]) -> Result<RunConfig, CliError> {
    let f = Fields { map: tokenize(text, overrides)? };
    let command = match f.raw("run.command") {
        None => Command::SolveExpander,
        Some(e) => Command::parse(&e.value).ok_or_else(|| CliError::Parse { line: e.line, message: format!("unknown command {:?}", e.value) })?,
    };
    let d = match f.raw("physics.d") {
        None => return Err(invalid("physics.d", "required")),
        Some(e) => e.value.parse::<u32>().map_err(|_| CliError::Parse { line: e.line, message: format!("physics.d: expected an integer, found {:?}", e.value) })?,
    };
    let params = PhysicalParams {
        d,
        alpha: f.required_f64("physics.alpha")?,
        c_v: f.required_f64("physics.c_v")?,
        kappa: f.required_f64("physics.kappa")?,
        gas_r: f.required_f64("physics.gas_r")?,
        mu0: f.required_f64("physics.mu0")?,
        lambda0: f.required_f64("physics.lambda0")?,
    };
    let boundary = BoundarySpec {
        a: f.f64("boundary.a")?.unwrap_or(1e-3),
        delta: f.f64("boundary.delta")?.unwrap_or(1e-2),
        p_delta: f.f64("boundary.p_delta")?.unwrap_or(1e-2),
        theta0: f.f64("boundary.theta0")?,
        eps: f.f64("boundary.eps")?,
    };
    validate_point(&params, &boundary)?;
    let grid = GridSpec {
        inner: f.usize("grid.inner")?.unwrap_or(256),
        outer: f.usize("grid.outer")?.unwrap_or(512),
        r_max: f.f64("grid.r_max")?,
        r_min: f.f64("grid.r_min")?,
    };
    if grid.inner < 8 {
        return Err(invalid("grid.inner", "must be at least 8"));
    }
    if grid.r_max(boundary.delta) <= boundary.delta {
        return Err(invalid("grid.r_max", "must exceed boundary.delta"));
    }
    if !(grid.r_min(boundary.delta) > 0.0 && grid.r_min(boundary.delta) < boundary.delta) {
        return Err(invalid("grid.r_min", "must lie in (0, boundary.delta)"));
    }
    let tol = Tolerances {
        picard: f.f64("tol.picard")?.unwrap_or(1e-15),
        max_iter: f.usize("tol.max_iter")?.unwrap_or(60),
        ode: f.f64("tol.ode")?.unwrap_or(1e-11),
        smallness: f.f64("tol.smallness")?.unwrap_or(ssprofile::expander::DEFAULT_SMALLNESS_THRESHOLD),
        residual: f.f64("tol.residual")?.unwrap_or(1e-5),
        rate: f.f64("tol.rate")?.unwrap_or(0.05),
    };
    for (name, v) in [("tol.picard", tol.picard), ("tol.ode", tol.ode), ("tol.smallness", tol.smallness), ("tol.residual", tol.residual), ("tol.rate", tol.rate)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(invalid(name, "must be positive"));
        }
    }
    if tol.max_iter == 0 {
        return Err(invalid("tol.max_iter", "must be at least 1"));
    }
    let checks = Checks {
        smallness: f.bool("checks.smallness")?.unwrap_or(false),
        monitor: f.bool("checks.monitor")?.unwrap_or(false),
        residual: f.bool("checks.residual")?.unwrap_or(true),
        asymptotics: f.bool("checks.asymptotics")?.unwrap_or(true),
    };
    let output_dir = PathBuf::from(f.str("output.dir").unwrap_or("out"));
    let input_profile = f.str("input.profile").map(PathBuf::from);
    let input_mode = match f.str("input.mode").unwrap_or("expander") {
        "expander" => Mode::Expander,
        "shrinker" => Mode::Shrinker,
        _ => return Err(invalid("input.mode", "must be expander or shrinker")),
    };
    let mut scan = Vec::new();
    for (k, e) in f.map.iter().filter(|(k, _)| k.starts_with("scan.")) {
        scan.push(parse_axis(&k["scan.".len()..], e)?);
    }
    let small = CandidateSpec::small();
    let audit = AuditSpec {
        candidate: match f.str("audit.candidate").unwrap_or("zero") {
            "zero" => CandidateKind::Zero,
            "family" => CandidateKind::Family,
            "file" => CandidateKind::File,
            _ => return Err(invalid("audit.candidate", "must be zero, family or file")),
        },
        family: CandidateSpec {
            theta_amp: f.f64("audit.theta_amp")?.unwrap_or(small.theta_amp),
            u_ratio: f.f64("audit.u_ratio")?.unwrap_or(small.u_ratio),
            p_inf: f.f64("audit.p_inf")?.unwrap_or(small.p_inf),
            p_power: f.f64("audit.p_power")?.unwrap_or(small.p_power),
            p_scale: f.f64("audit.p_scale")?.unwrap_or(small.p_scale),
        },
        p_const: f.f64("audit.p_const")?.unwrap_or(1e-4),
        eps: f.f64("audit.eps")?.unwrap_or(1.0),
        threshold: f.f64("audit.threshold")?.unwrap_or(ssprofile::shrinker::DEFAULT_AUDIT_THRESHOLD),
    };
    if !(audit.eps > 0.0) {
        return Err(invalid("audit.eps", "must be positive"));
    }
    if !(audit.p_const > 0.0) {
        return Err(invalid("audit.p_const", "must be positive"));
    }
    if !(audit.threshold > 0.0) {
        return Err(invalid("audit.threshold", "must be positive"));
    }
    if audit.candidate == CandidateKind::File && input_profile.is_none() {
        return Err(invalid("input.profile", "required when audit.candidate = file"));
    }
    Ok(RunConfig { command, params, boundary, grid, tol, checks, output_dir, input_profile, input_mode, scan, audit })
}

fn parse_axis(key: &str, e: &Entry) -> Result<ScanAxis, CliError> {
    let parts: Vec<&str> = e.value.split_whitespace().collect();
    let bad = |m: String| CliError::Parse { line: e.line, message: m };
    if !(3..=4).contains(&parts.len()) {
        return Err(bad(format!("scan.{key}: expected `min max count [linear|log]`")));
    }
    let num = |s: &str| s.parse::<f64>().map_err(|_| bad(format!("scan.{key}: bad number {s:?}")));
    let (min, max) = (num(parts[0])?, num(parts[1])?);
    let count = parts[2].parse::<usize>().map_err(|_| bad(format!("scan.{key}: bad count {:?}", parts[2])))?;
    let scale = match parts.get(3).copied().unwrap_or("linear") {
        "linear" => Scale::Linear,
        "log" => Scale::Log,
        s => return Err(bad(format!("scan.{key}: unknown scale {s:?}"))),
    };
    let field = format!("scan.{key}");
    if count < 1 {
        return Err(invalid(&field, "lattice count must be at least 1"));
    }
    if !(min.is_finite() && max.is_finite() && min <= max) {
        return Err(invalid(&field, "need finite min <= max"));
    }
    if scale == Scale::Log && min <= 0.0 {
        return Err(invalid(&field, "log scale needs a positive range"));
    }
    Ok(ScanAxis { key: key.to_string(), min, max, count, scale })
}

/// Canonical document: every key, fixed order, shortest round-trip number formatting.
pub fn emit_config(cfg: &RunConfig) -> String {
    let mut s = String::new();
    let mut kv = |k: &str, v: String| {
        let _ = writeln!(s, "{k} = {v}");
    };
    kv("run.command", cfg.command.name().to_string());
    let p = &cfg.params;
    kv("physics.d", p.d.to_string());
    for (k, v) in PHYSICS.iter().zip([p.alpha, p.c_v, p.kappa, p.gas_r, p.mu0, p.lambda0]) {
        kv(k, format!("{v:?}"));
    }
    let b = &cfg.boundary;
    kv("boundary.a", format!("{:?}", b.a));
    kv("boundary.delta", format!("{:?}", b.delta));
    kv("boundary.p_delta", format!("{:?}", b.p_delta));
    if let Some(t) = b.theta0 {
        kv("boundary.theta0", format!("{t:?}"));
    }
    if let Some(e) = b.eps {
        kv("boundary.eps", format!("{e:?}"));
    }
    kv("grid.inner", cfg.grid.inner.to_string());
    kv("grid.outer", cfg.grid.outer.to_string());
    if let Some(r) = cfg.grid.r_max {
        kv("grid.r_max", format!("{r:?}"));
    }
    if let Some(r) = cfg.grid.r_min {
        kv("grid.r_min", format!("{r:?}"));
    }
    let t = &cfg.tol;
    kv("tol.picard", format!("{:?}", t.picard));
    kv("tol.max_iter", t.max_iter.to_string());
    kv("tol.ode", format!("{:?}", t.ode));
    kv("tol.smallness", format!("{:?}", t.smallness));
    kv("tol.residual", format!("{:?}", t.residual));
    kv("tol.rate", format!("{:?}", t.rate));
    let c = &cfg.checks;
    kv("checks.smallness", c.smallness.to_string());
    kv("checks.monitor", c.monitor.to_string());
    kv("checks.residual", c.residual.to_string());
    kv("checks.asymptotics", c.asymptotics.to_string());
    kv("output.dir", cfg.output_dir.display().to_string());
    if let Some(path) = &cfg.input_profile {
        kv("input.profile", path.display().to_string());
    }
    kv("input.mode", if cfg.input_mode == Mode::Shrinker { "shrinker" } else { "expander" }.to_string());
    for a in &cfg.scan {
        let scale = if a.scale == Scale::Log { "log" } else { "linear" };
        kv(&format!("scan.{}", a.key), format!("{:?} {:?} {} {scale}", a.min, a.max, a.count));
    }
    let au = &cfg.audit;
    let cand = match au.candidate {
        CandidateKind::Zero => "zero",
        CandidateKind::Family => "family",
        CandidateKind::File => "file",
    };
    kv("audit.candidate", cand.to_string());
    kv("audit.theta_amp", format!("{:?}", au.family.theta_amp));
    kv("audit.u_ratio", format!("{:?}", au.family.u_ratio));
    kv("audit.p_inf", format!("{:?}", au.family.p_inf));
    kv("audit.p_power", format!("{:?}", au.family.p_power));
    kv("audit.p_scale", format!("{:?}", au.family.p_scale));
    kv("audit.p_const", format!("{:?}", au.p_const));
    kv("audit.eps", format!("{:?}", au.eps));
    kv("audit.threshold", format!("{:?}", au.threshold));
    s
}

/// Splits `--section.key=value` arguments out of an argument list.
pub fn split_overrides(args: impl IntoIterator<Item = String>) -> (Vec<String>, Vec<(String, String)>) {
    let mut rest = Vec::new();
    let mut over = Vec::new();
    for a in args {
        let kv = a.strip_prefix("--").and_then(|s| s.split_once('=')).filter(|(k, _)| k.contains('.'));
        match kv {
            Some((k, v)) => over.push((k.to_string(), v.to_string())),
            None => rest.push(a),
        }
    }
    (rest, over)
}
