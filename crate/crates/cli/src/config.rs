//! Run configuration: JSON in, validated structs out, canonical JSON back.

use std::f64::consts::PI;
use std::fmt;
use std::path::Path;

use modalray_core::dynamics::ShellMode;
use modalray_core::fronts::{FrontQuantity, DEFAULT_CAUSTIC_THRESHOLD};
use modalray_core::MediumModel;
use serde::{Deserialize, Deserializer, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};
use thiserror::Error;

pub const RING_FRONTS: &str = include_str!("../configs/ring_fronts.json");
pub const SECTOR_AMPLITUDE: &str = include_str!("../configs/sector_amplitude.json");
pub const SECTOR_TIME: &str = include_str!("../configs/sector_time.json");

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {message}")]
    Read { path: String, message: String },
    #[error("malformed config: {0}")]
    Parse(String),
    #[error("{path}: {message}")]
    Invalid { path: String, message: String },
}

fn invalid(path: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid { path: path.to_string(), message: message.into() }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub medium: MediumBlock,
    pub mode: ModeBlock,
    pub source: SourceBlock,
    pub run: RunBlock,
    pub output: OutputBlock,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            medium: MediumBlock::default(),
            mode: ModeBlock::default(),
            source: SourceBlock::default(),
            run: RunBlock::default(),
            output: OutputBlock::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MediumBlock {
    pub c_water: f64,
    pub c_bot: f64,
    pub h0: f64,
    pub grad_h: [f64; 2],
    /// One value or a list; every value gets its own fan.
    #[serde(deserialize_with = "one_or_many")]
    pub alpha: Vec<f64>,
}

impl Default for MediumBlock {
    fn default() -> Self {
        Self { c_water: 1500.0, c_bot: 1700.0, h0: 10.0, grad_h: [1e-3, 0.0], alpha: vec![0.0, 0.5, 1.0] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModeBlock {
    pub l: usize,
    /// Constant imaginary eigenvalue part entering the dissipation integral.
    pub lambda_tilde: f64,
}

impl Default for ModeBlock {
    fn default() -> Self {
        Self { l: 1, lambda_tilde: 0.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShellChoice {
    Strict,
    Literal,
}

impl From<ShellChoice> for ShellMode {
    fn from(s: ShellChoice) -> Self {
        match s {
            ShellChoice::Strict => ShellMode::Strict,
            ShellChoice::Literal => ShellMode::Literal,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Derivatives {
    Analytic,
    Fd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SourceBlock {
    pub mu1: Vec<f64>,
    pub mu2: AngleGrid,
    /// Carrier frequency at μ₁ = 0, Hz.
    pub freq0: f64,
    /// Frequency sweep per unit μ₁, Hz.
    pub dfreq: f64,
    pub radius: f64,
    pub shell_mode: ShellChoice,
    pub derivatives: Derivatives,
}

impl Default for SourceBlock {
    fn default() -> Self {
        Self {
            mu1: vec![0.0],
            mu2: AngleGrid::default(),
            freq0: 300.0,
            dfreq: 50.0,
            radius: 1.0,
            shell_mode: ShellChoice::Strict,
            derivatives: Derivatives::Analytic,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AngleGrid {
    pub count: usize,
    pub start: Angle,
    pub end: Angle,
    /// Include `end`; leave false for a closed ring.
    pub endpoint: bool,
}

impl Default for AngleGrid {
    fn default() -> Self {
        Self { count: 72, start: Angle::Expr("-pi".into()), end: Angle::Expr("pi".into()), endpoint: false }
    }
}

/// A number, or a multiple of π written like "pi", "-pi/2", "5pi/12".
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Angle {
    Value(f64),
    Expr(String),
}

impl Angle {
    pub fn radians(&self) -> Option<f64> {
        match self {
            Angle::Value(v) => Some(*v),
            Angle::Expr(s) => parse_pi_multiple(s),
        }
    }
}

fn parse_pi_multiple(text: &str) -> Option<f64> {
    let s: String = text.chars().filter(|c| !c.is_whitespace()).collect();
    let (num, den) = match s.split_once('/') {
        Some((n, d)) => (n, d.parse::<f64>().ok()?),
        None => (s.as_str(), 1.0),
    };
    let coeff = num.strip_suffix("pi")?;
    let coeff = coeff.strip_suffix('*').unwrap_or(coeff);
    let c = match coeff {
        "" | "+" => 1.0,
        "-" => -1.0,
        other => other.parse::<f64>().ok()?,
    };
    let v = c * PI / den;
    v.is_finite().then_some(v)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunBlock {
    pub tau_end: f64,
    pub step: f64,
    /// Sample points in 𝛕; unit spacing up to `tau_end` when omitted.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub checkpoints: Option<Vec<f64>>,
    pub caustic_threshold: f64,
    pub tensor: bool,
    pub cutoff_ratio: f64,
    pub tolerances: Tolerances,
}

impl Default for RunBlock {
    fn default() -> Self {
        Self {
            tau_end: 5.0,
            step: 1e-3,
            checkpoints: None,
            caustic_threshold: DEFAULT_CAUSTIC_THRESHOLD,
            tensor: false,
            cutoff_ratio: 1e-8,
            tolerances: Tolerances::default(),
        }
    }
}

/// Pass thresholds used by `verify`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub residual: f64,
    pub energy: f64,
    pub symplectic: f64,
    pub duality: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { residual: 1e-10, energy: 1e-8, symplectic: 1e-6, duality: 1e-3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputBlock {
    pub csv: String,
    /// `null` disables the figures.
    pub svg: Option<String>,
    /// Front quantities, by column name.
    pub quantities: Vec<String>,
    /// Levels for every front quantity; the checkpoints when omitted.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub front_levels: Option<Vec<f64>>,
    /// Enables the raw-time companion table, t = τ/(ε·c_bot).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
}

impl Default for OutputBlock {
    fn default() -> Self {
        Self {
            csv: "trace.csv".into(),
            svg: Some("fronts.svg".into()),
            quantities: vec!["tau_nat".into()],
            front_levels: None,
            epsilon: None,
        }
    }
}

fn one_or_many<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum OneOrMany {
        One(f64),
        Many(Vec<f64>),
    }
    Ok(match OneOrMany::deserialize(d)? {
        OneOrMany::One(v) => vec![v],
        OneOrMany::Many(v) => v,
    })
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        Self::load_with(path, &[])
    }

    pub fn load_with(path: &Path, overrides: &[String]) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::Read { path: path.display().to_string(), message: e.to_string() })?;
        Self::parse_with(&text, overrides)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        Self::parse_with(text, &[])
    }

    /// Parses `text`, applies `key=value` overrides, then validates.
    pub fn parse_with(text: &str, overrides: &[String]) -> Result<Self, ConfigError> {
        let mut value: Value = serde_json::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        for o in overrides {
            apply_override(&mut value, o)?;
        }
        let config: RunConfig = serde_path_to_error::deserialize(value).map_err(|e| {
            let path = e.path().to_string();
            invalid(&path, e.into_inner().to_string())
        })?;
        config.validate()?;
        Ok(config)
    }

    /// Pretty JSON with a trailing newline; stable for identical configs.
    pub fn canonical(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("config serializes");
        s.push('\n');
        s
    }

    pub fn sha256(&self) -> String {
        Sha256::digest(self.canonical().as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn medium(&self, alpha: f64) -> Result<MediumModel, ConfigError> {
        let m = &self.medium;
        MediumModel::new(m.c_water, m.c_bot, m.h0, m.grad_h, alpha).map_err(|e| invalid("medium", e.to_string()))
    }

    pub fn mu2_values(&self) -> Vec<f64> {
        let g = &self.source.mu2;
        let start = g.start.radians().unwrap_or(f64::NAN);
        let end = g.end.radians().unwrap_or(f64::NAN);
        modalray_core::fan::MuGrid::linspace(g.count, start, end, g.endpoint)
    }

    /// Positive, increasing, ending at `tau_end`.
    pub fn checkpoints(&self) -> Vec<f64> {
        let end = self.run.tau_end;
        let mut out = match &self.run.checkpoints {
            Some(c) => c.clone(),
            None => (1..).map(f64::from).take_while(|t| *t < end).collect(),
        };
        if out.last() != Some(&end) {
            out.push(end);
        }
        out
    }

    pub fn front_levels(&self) -> Vec<f64> {
        self.output.front_levels.clone().unwrap_or_else(|| self.checkpoints())
    }

    pub fn quantities(&self) -> Vec<FrontQuantity> {
        self.output.quantities.iter().filter_map(|q| FrontQuantity::parse(q)).collect()
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let m = &self.medium;
        positive("medium.c_water", m.c_water)?;
        positive("medium.c_bot", m.c_bot)?;
        if m.c_bot < m.c_water {
            return Err(invalid("medium.c_bot", format!("{} is below medium.c_water = {}", m.c_bot, m.c_water)));
        }
        positive("medium.h0", m.h0)?;
        if !m.grad_h.iter().all(|g| g.is_finite()) {
            return Err(invalid("medium.grad_h", "must be finite"));
        }
        if m.alpha.is_empty() {
            return Err(invalid("medium.alpha", "needs at least one value"));
        }
        for a in &m.alpha {
            if !(0.0..=1.0).contains(a) {
                return Err(invalid("medium.alpha", format!("{a} is outside [0, 1]")));
            }
        }
        if !self.mode.lambda_tilde.is_finite() {
            return Err(invalid("mode.lambda_tilde", "must be finite"));
        }

        let s = &self.source;
        if s.mu1.is_empty() {
            return Err(invalid("source.mu1", "needs at least one value"));
        }
        if !s.mu1.iter().all(|v| v.is_finite()) {
            return Err(invalid("source.mu1", "must be finite"));
        }
        if s.mu2.count == 0 {
            return Err(invalid("source.mu2.count", "must be at least 1"));
        }
        for (key, a) in [("source.mu2.start", &s.mu2.start), ("source.mu2.end", &s.mu2.end)] {
            match a.radians() {
                Some(v) if v.is_finite() => {}
                _ => return Err(invalid(key, format!("cannot read {a:?} as an angle"))),
            }
        }
        if !(s.freq0.is_finite() && s.dfreq.is_finite()) {
            return Err(invalid("source.freq0", "frequencies must be finite"));
        }
        for mu1 in &s.mu1 {
            if s.freq0 + s.dfreq * mu1 <= 0.0 {
                return Err(invalid("source.freq0", format!("frequency at mu1 = {mu1} is not positive")));
            }
        }
        positive("source.radius", s.radius)?;

        let r = &self.run;
        positive("run.tau_end", r.tau_end)?;
        positive("run.step", r.step)?;
        if let Some(c) = &r.checkpoints {
            if c.iter().any(|t| !(t.is_finite() && *t > 0.0 && *t <= r.tau_end)) {
                return Err(invalid("run.checkpoints", "must lie in (0, run.tau_end]"));
            }
            if c.windows(2).any(|w| w[1] <= w[0]) {
                return Err(invalid("run.checkpoints", "must be strictly increasing"));
            }
        }
        positive("run.caustic_threshold", r.caustic_threshold)?;
        if !(r.cutoff_ratio >= 0.0 && r.cutoff_ratio.is_finite()) {
            return Err(invalid("run.cutoff_ratio", "must be non-negative"));
        }
        let t = &r.tolerances;
        for (key, v) in [
            ("run.tolerances.residual", t.residual),
            ("run.tolerances.energy", t.energy),
            ("run.tolerances.symplectic", t.symplectic),
            ("run.tolerances.duality", t.duality),
        ] {
            positive(key, v)?;
        }

        let o = &self.output;
        if o.csv.is_empty() {
            return Err(invalid("output.csv", "must name a file"));
        }
        if o.svg.as_deref() == Some("") {
            return Err(invalid("output.svg", "must name a file"));
        }
        for (i, q) in o.quantities.iter().enumerate() {
            if FrontQuantity::parse(q).is_none() {
                return Err(invalid(
                    &format!("output.quantities[{i}]"),
                    format!("unknown quantity {q:?}; expected tau_nat, tau, phase, arclen, amplitude or T_diss"),
                ));
            }
        }
        if let Some(levels) = &o.front_levels {
            if !levels.iter().all(|v| v.is_finite()) {
                return Err(invalid("output.front_levels", "must be finite"));
            }
        }
        if let Some(eps) = o.epsilon {
            positive("output.epsilon", eps)?;
        }
        Ok(())
    }
}

fn positive(path: &str, v: f64) -> Result<(), ConfigError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(invalid(path, format!("must be positive, got {v}")))
    }
}

/// `a.b.c=value`; the value is read as JSON, falling back to a plain string.
pub fn apply_override(root: &mut Value, spec: &str) -> Result<(), ConfigError> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| ConfigError::Parse(format!("override {spec:?} is not key=value")))?;
    let key = key.trim();
    if key.is_empty() || key.split('.').any(str::is_empty) {
        return Err(ConfigError::Parse(format!("override key {key:?} is not a dot path")));
    }
    let value = serde_json::from_str(raw.trim()).unwrap_or_else(|_| Value::String(raw.trim().to_string()));
    let mut node = root;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let here = parts[..i].join(".");
        let obj = match node {
            Value::Object(map) => map,
            _ if i == 0 => return Err(ConfigError::Parse("config root is not an object".into())),
            _ => return Err(invalid(&here, "is not an object")),
        };
        if i + 1 == parts.len() {
            obj.insert(part.to_string(), value);
            return Ok(());
        }
        node = obj.entry(part.to_string()).or_insert_with(|| Value::Object(Default::default()));
    }
    unreachable!("a dot path has at least one part")
}

impl fmt::Display for Angle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Angle::Value(v) => write!(f, "{v}"),
            Angle::Expr(s) => f.write_str(s),
        }
    }
}
