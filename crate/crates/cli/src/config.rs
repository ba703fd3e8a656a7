//! The JSON run configuration shared by every subcommand.
//!
//! [`RunConfig::emit`] writes the canonical form (pretty JSON with every
//! defaulted field spelled out), so emit → parse → emit is byte-identical.
//! Relative file paths are resolved against the directory of the config
//! file and must exist when the config is parsed.

use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Errors found while reading a configuration.
#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("config line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("config field `{field}`: {message}")]
    Field { field: String, message: String },
}

fn field(field: impl Into<String>, message: impl Into<String>) -> ConfigError {
    ConfigError::Field {
        field: field.into(),
        message: message.into(),
    }
}

fn is_zero(x: &f64) -> bool {
    *x == 0.0
}

/// Everything a run needs; sections that a subcommand does not use may be
/// omitted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Seed for every sampled quantity; `--seed` overrides it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Primes are sieved below this bound; `--prime-ceiling` overrides it.
    pub prime_ceiling: u64,
    #[serde(default)]
    pub series: Vec<SeriesSpec>,
    #[serde(default)]
    pub targets: Vec<TargetSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<DomainSpec>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub budgets: Budgets,
    #[serde(default)]
    pub outputs: Outputs,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub order_estimate: Option<OrderEstimateSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub orthogonality: Option<OrthogonalitySpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steering: Option<SteeringSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shift: Option<ShiftSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verify: Option<VerifySpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plan: Option<PlanSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub zeros: Option<ZerosSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit: Option<FitSpec>,
}

/// L = L_1 · L_2 + L_3 with L_1 given by `euler`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeriesSpec {
    pub euler: EulerSpec,
    /// b(2), b(3), … of L_2 (b(1) = 1 is implicit).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub multiplier: Vec<Complex64>,
    #[serde(default, skip_serializing_if = "is_zero")]
    pub multiplier_tail: f64,
    /// d(1), d(2), … of L_3.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub additive: Vec<Complex64>,
    #[serde(default, skip_serializing_if = "is_zero")]
    pub additive_tail: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum EulerSpec {
    Zeta,
    ShiftedZeta {
        shift: f64,
    },
    /// χ(n) = values[n mod modulus].
    Character {
        modulus: u64,
        values: Vec<Complex64>,
    },
    /// Lines `p k re im`.
    File {
        path: PathBuf,
        rule: RuleSpec,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        majorant: Option<f64>,
    },
    /// c(p) = 0, so L_1 = 1.
    Zero,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RuleSpec {
    CompletelyMultiplicative,
    Table,
}

/// f(s) = constant + ∫ g(x) e^{-sx} dx over `support`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetSpec {
    #[serde(default)]
    pub constant: Complex64,
    #[serde(default = "unit_support")]
    pub support: [f64; 2],
    #[serde(default)]
    pub g: GSpec,
}

fn unit_support() -> [f64; 2] {
    [0.0, 1.0]
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum GSpec {
    #[default]
    Zero,
    Constant {
        value: Complex64,
        #[serde(default = "default_count")]
        count: usize,
    },
    /// Uniform samples including both support endpoints.
    Samples {
        values: Vec<Complex64>,
    },
}

fn default_count() -> usize {
    1025
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DomainSpec {
    Rectangle { sigma: [f64; 2], tau: [f64; 2], h: f64 },
    Disk { center: Complex64, radius: f64, h: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    pub epsilon: f64,
    /// Share of ε for the shift-to-twist transfer in `verify`; absent means
    /// ε/4.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon2: Option<f64>,
    /// Allowance added to the contraction ratio 1 − 1/(4n).
    pub slack: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            epsilon: 0.05,
            epsilon2: None,
            slack: 0.02,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Budgets {
    /// Shift search window [t_lo, t_max].
    pub t_lo: f64,
    pub t_max: f64,
    pub max_hits: usize,
    /// Density sampling over [0, density_t_max]; no sampling when
    /// `samples` is 0.
    pub density_t_max: f64,
    pub samples: u64,
    /// Zero search height.
    pub t_budget: f64,
    pub max_tiles: usize,
    /// Dirichlet-series cutoff for direct summation.
    pub cutoff: u64,
}

impl Default for Budgets {
    fn default() -> Self {
        Self {
            t_lo: 0.0,
            t_max: 1e5,
            max_hits: 10,
            density_t_max: 1e6,
            samples: 0,
            t_budget: 1e4,
            max_tiles: 10_000,
            cutoff: 2_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Outputs {
    /// Write `<command>.csv` next to the JSON report.
    pub csv: bool,
    /// `steer` writes the twist to `omega.txt`.
    pub omega: bool,
}

impl Default for Outputs {
    fn default() -> Self {
        Self { csv: true, omega: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrderEstimateSpec {
    /// Disjoint bands [lo, hi).
    pub bands: Vec<[u64; 2]>,
    #[serde(default = "default_power_tail_cutoff")]
    pub power_tail_cutoff: u64,
}

fn default_power_tail_cutoff() -> u64 {
    universality::series::DEFAULT_POWER_TAIL_CUTOFF
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrthogonalitySpec {
    /// Index pairs into `series`; empty means every pair i < j.
    #[serde(default)]
    pub pairs: Vec<[usize; 2]>,
    pub bands: Vec<BandSpec>,
}

/// The band [lower, lower^{1+xi}).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BandSpec {
    pub lower: u64,
    pub xi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SteeringSpec {
    pub delta: f64,
    #[serde(default = "default_nodes")]
    pub riemann_nodes: usize,
    #[serde(default)]
    pub mode: SumModeSpec,
    #[serde(default = "one")]
    pub lambda: f64,
    #[serde(default = "one")]
    pub big_lambda: f64,
    #[serde(default = "default_min_start")]
    pub min_start: u64,
    /// Prescribed twist values ω(p).
    #[serde(default)]
    pub pins: Vec<PinSpec>,
}

fn default_nodes() -> usize {
    4
}

fn one() -> f64 {
    1.0
}

fn default_min_start() -> u64 {
    1_000
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SumModeSpec {
    PrimeSum,
    #[default]
    LogEuler,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PinSpec {
    pub p: u64,
    pub value: Complex64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShiftSpec {
    pub targets: ShiftTargets,
}

/// The phases a_p that p^{it} should approach.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ShiftTargets {
    Fixed { values: Vec<PinSpec> },
    /// Seeded uniform phases on the listed primes.
    Random { primes: Vec<u64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifySpec {
    pub mode: VerifyMode,
    #[serde(default)]
    pub targets: TargetSource,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum VerifyMode {
    /// log L(1 + δs, ω) with ω read from a file (ω ≡ 1 without one).
    Omega {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        omega_file: Option<PathBuf>,
    },
    /// log L(1 + it + δs), optionally compared with a reference twist.
    Shift {
        t: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        reference_file: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TargetSource {
    /// The `targets` section.
    #[default]
    Config,
    /// log L itself, summed prime by prime up to the ceiling.
    Evaluator,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanSpec {
    pub t_window: f64,
    pub scan_step: f64,
    pub xi_min: f64,
    pub lambda: f64,
    pub big_lambda: f64,
}

impl Default for PlanSpec {
    fn default() -> Self {
        let d = universality::analytic::PlanConfig::default();
        Self {
            t_window: d.t_window,
            scan_step: d.scan_step,
            xi_min: d.xi_min,
            lambda: d.lambda,
            big_lambda: d.big_lambda,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ZerosSpec {
    /// Coefficients a_k of Σ a_k L_k, one per series.
    pub weights: Vec<Complex64>,
    pub re_lo: f64,
    pub re_hi: f64,
    #[serde(default)]
    pub t_lo: f64,
    #[serde(default = "default_margin")]
    pub margin: f64,
    #[serde(default = "default_initial_points")]
    pub initial_points: usize,
    #[serde(default = "default_max_points")]
    pub max_points: usize,
}

fn default_margin() -> f64 {
    universality::series::DEFAULT_MARGIN
}

fn default_initial_points() -> usize {
    universality::analytic::WindingControl::default().initial_points
}

fn default_max_points() -> usize {
    universality::analytic::WindingControl::default().max_points
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitSpec {
    pub samples: FitSamples,
    pub support: [f64; 2],
    pub nodes: usize,
    /// Largest acceptable residual.
    #[serde(default = "default_fit_tolerance")]
    pub tolerance: f64,
}

fn default_fit_tolerance() -> f64 {
    1e-3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FitSamples {
    /// Values of `targets[index]` on the grid of the domain.
    Target { index: usize },
    /// Lines `re(s) im(s) re(f) im(f)`.
    File { path: PathBuf },
}

impl RunConfig {
    /// Reads and validates a config file; relative paths are resolved
    /// against its directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    /// Parses config text and checks every field that can be checked
    /// without running the computation.
    pub fn parse(text: &str, base: &Path) -> Result<Self, ConfigError> {
        let config: RunConfig = serde_json::from_str(text).map_err(|e| ConfigError::Syntax {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        config.validate(base)?;
        Ok(config)
    }

    /// Canonical pretty JSON with a trailing newline.
    pub fn emit(&self) -> String {
        let mut out = serde_json::to_string_pretty(self).expect("config serialises");
        out.push('\n');
        out
    }

    /// `path` resolved against `base` unless absolute.
    pub fn resolve(base: &Path, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            base.join(path)
        }
    }

    fn validate(&self, base: &Path) -> Result<(), ConfigError> {
        let exists = |name: String, path: &Path| -> Result<(), ConfigError> {
            let full = Self::resolve(base, path);
            if full.is_file() {
                Ok(())
            } else {
                Err(field(name, format!("file {} does not exist", full.display())))
            }
        };
        if self.prime_ceiling < 3 {
            return Err(field("prime_ceiling", "must be at least 3"));
        }
        for (i, s) in self.series.iter().enumerate() {
            match &s.euler {
                EulerSpec::File { path, majorant, .. } => {
                    exists(format!("series[{i}].euler.path"), path)?;
                    if let Some(m) = majorant {
                        if !(m.is_finite() && *m >= 0.0) {
                            return Err(field(format!("series[{i}].euler.majorant"), "must be finite and non-negative"));
                        }
                    }
                }
                EulerSpec::Character { modulus, values } => {
                    if *modulus == 0 || values.len() as u64 != *modulus {
                        return Err(field(
                            format!("series[{i}].euler.values"),
                            format!("need exactly `modulus` = {modulus} values"),
                        ));
                    }
                }
                _ => {}
            }
            for (name, tail) in [("multiplier_tail", s.multiplier_tail), ("additive_tail", s.additive_tail)] {
                if !(tail.is_finite() && tail >= 0.0) {
                    return Err(field(format!("series[{i}].{name}"), "must be finite and non-negative"));
                }
            }
        }
        for (i, t) in self.targets.iter().enumerate() {
            let [a, b] = t.support;
            if !(0.0 <= a && a < b && b.is_finite()) {
                return Err(field(format!("targets[{i}].support"), "need 0 <= A < B"));
            }
            match &t.g {
                GSpec::Samples { values } if values.len() < 2 => {
                    return Err(field(format!("targets[{i}].g.values"), "need at least two samples"));
                }
                GSpec::Constant { count, .. } if *count < 2 => {
                    return Err(field(format!("targets[{i}].g.count"), "need at least two samples"));
                }
                _ => {}
            }
        }
        if let Some(d) = &self.domain {
            let h = match d {
                DomainSpec::Rectangle { h, .. } | DomainSpec::Disk { h, .. } => *h,
            };
            if !(h > 0.0) {
                return Err(field("domain.h", "must be positive"));
            }
        }
        let t = &self.tolerances;
        if !(t.epsilon > 0.0) {
            return Err(field("tolerances.epsilon", "must be positive"));
        }
        if let Some(e2) = t.epsilon2 {
            if !(e2 > 0.0 && e2 < t.epsilon) {
                return Err(field("tolerances.epsilon2", "must lie in (0, epsilon)"));
            }
        }
        if !(t.slack >= 0.0) {
            return Err(field("tolerances.slack", "must be non-negative"));
        }
        let b = &self.budgets;
        if !(b.t_lo <= b.t_max) {
            return Err(field("budgets.t_max", "must not be below budgets.t_lo"));
        }
        if b.cutoff < 2 {
            return Err(field("budgets.cutoff", "must be at least 2"));
        }
        if let Some(s) = &self.steering {
            if !(s.delta > 0.0) {
                return Err(field("steering.delta", "must be positive"));
            }
            for (i, pin) in s.pins.iter().enumerate() {
                if (pin.value.norm() - 1.0).abs() > 1e-12 {
                    return Err(field(format!("steering.pins[{i}].value"), "must have modulus 1"));
                }
            }
        }
        if let Some(v) = &self.verify {
            match &v.mode {
                VerifyMode::Omega { omega_file: Some(p) } => exists("verify.mode.omega_file".into(), p)?,
                VerifyMode::Shift {
                    reference_file: Some(p), ..
                } => exists("verify.mode.reference_file".into(), p)?,
                _ => {}
            }
        }
        if let Some(z) = &self.zeros {
            if z.weights.len() != self.series.len() {
                return Err(field("zeros.weights", "need one weight per series"));
            }
        }
        if let Some(f) = &self.fit {
            match &f.samples {
                FitSamples::File { path } => exists("fit.samples.path".into(), path)?,
                FitSamples::Target { index } if *index >= self.targets.len() => {
                    return Err(field("fit.samples.index", "no such target"));
                }
                _ => {}
            }
        }
        Ok(())
    }
}
