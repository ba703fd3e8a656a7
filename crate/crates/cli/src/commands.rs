//! One function per subcommand; each returns a report body and a status.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{anyhow, bail, Context, Result};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use universality::analytic::{
    plan_theorem1, verify_hybrid, zero_hunt, GridTarget, HybridCheck, HybridMode, PlanConfig, WindingControl,
    ZeroHuntConfig,
};
use universality::primes::{PrimeBand, Sieve};
use universality::series::{
    estimate_order, estimate_orthogonality, Bounded, CoefficientSource, CoefficientTable, DirichletCharacter, PowerRule,
    StandardTypeSeries,
};
use universality::shifts::{density_estimate, find_shift, max_deviation, ShiftSearch};
use universality::steering::{
    steer_function, BudgetLedger, LedgerItem, SteeringParams, SteeringProblem, SumMode, UnimodularAssignment,
};
use universality::targets::{fit_target, CompactDomain, LaplaceTarget};

use crate::config::{
    DomainSpec, EulerSpec, FitSamples, GSpec, RuleSpec, RunConfig, ShiftTargets, SumModeSpec, TargetSource, VerifyMode,
};

/// The subcommands.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CommandKind {
    OrderEstimate,
    Orthogonality,
    Steer,
    FindShift,
    Verify,
    PlanTh1,
    Zeros,
    FitTarget,
}

impl CommandKind {
    pub fn name(&self) -> &'static str {
        match self {
            CommandKind::OrderEstimate => "order-estimate",
            CommandKind::Orthogonality => "orthogonality",
            CommandKind::Steer => "steer",
            CommandKind::FindShift => "find-shift",
            CommandKind::Verify => "verify",
            CommandKind::PlanTh1 => "plan-th1",
            CommandKind::Zeros => "zeros",
            CommandKind::FitTarget => "fit-target",
        }
    }
}

/// Pass maps to exit code 0, inconclusive to 2.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Pass,
    Inconclusive,
}

/// What a subcommand produced, before it is written out.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub status: Status,
    pub ledger: Option<BudgetLedger>,
    pub slack: BTreeMap<String, Value>,
    pub result: Value,
    pub csv: Option<String>,
    /// Extra files (name, contents) written next to the report.
    pub files: Vec<(String, String)>,
}

/// A config together with the directory its relative paths refer to.
pub struct Run<'a> {
    pub config: &'a RunConfig,
    pub base: &'a Path,
}

impl Run<'_> {
    fn path(&self, p: &Path) -> PathBuf {
        RunConfig::resolve(self.base, p)
    }

    fn seed(&self) -> Result<u64> {
        self.config
            .seed
            .ok_or_else(|| anyhow!("this subcommand samples; set `seed` in the config or pass --seed"))
    }

    fn sieve(&self) -> Sieve {
        Sieve::new(self.config.prime_ceiling)
    }

    fn source(&self, i: usize) -> Result<CoefficientSource> {
        let spec = &self.config.series[i].euler;
        Ok(match spec {
            EulerSpec::Zeta => CoefficientSource::Zeta,
            EulerSpec::ShiftedZeta { shift } => CoefficientSource::ShiftedZeta { shift: *shift },
            EulerSpec::Character { modulus, values } => {
                CoefficientSource::Character(DirichletCharacter::from_table(*modulus, values.clone())?)
            }
            EulerSpec::File { path, rule, majorant } => {
                let rule = match rule {
                    RuleSpec::CompletelyMultiplicative => PowerRule::CompletelyMultiplicative,
                    RuleSpec::Table => PowerRule::Table,
                };
                CoefficientSource::Table(Arc::new(CoefficientTable::load(&self.path(path), rule, *majorant)?))
            }
            EulerSpec::Zero => CoefficientSource::zero(),
        })
    }

    fn sources(&self) -> Result<Vec<CoefficientSource>> {
        if self.config.series.is_empty() {
            bail!("config field `series`: at least one series is required");
        }
        (0..self.config.series.len()).map(|i| self.source(i)).collect()
    }

    /// Sources of pure Euler products; perturbed series are rejected.
    fn pure_sources(&self) -> Result<Vec<CoefficientSource>> {
        let sources = self.sources()?;
        for (i, s) in self.standard_series()?.iter().enumerate() {
            if !s.is_pure() {
                bail!("config field `series[{i}]`: this subcommand needs a pure Euler product; use plan-th1 for series with multiplier or additive parts");
            }
        }
        Ok(sources)
    }

    fn standard_series(&self) -> Result<Vec<StandardTypeSeries>> {
        self.config
            .series
            .iter()
            .enumerate()
            .map(|(i, s)| {
                StandardTypeSeries::pure(self.source(i)?)
                    .with_perturbations(s.multiplier.clone(), s.multiplier_tail, s.additive.clone(), s.additive_tail)
                    .map_err(Into::into)
            })
            .collect()
    }

    fn targets(&self) -> Result<Vec<LaplaceTarget>> {
        self.config
            .targets
            .iter()
            .enumerate()
            .map(|(i, t)| {
                let [a, b] = t.support;
                let target = match &t.g {
                    GSpec::Zero => LaplaceTarget::from_fn(t.constant, a, b, 2, |_| Complex64::new(0.0, 0.0)),
                    GSpec::Constant { value, count } => LaplaceTarget::from_fn(t.constant, a, b, *count, |_| *value),
                    GSpec::Samples { values } => LaplaceTarget::new(t.constant, a, b, values.clone()),
                };
                target.with_context(|| format!("config field `targets[{i}]`"))
            })
            .collect()
    }

    fn domain(&self) -> Result<CompactDomain> {
        let spec = self
            .config
            .domain
            .as_ref()
            .ok_or_else(|| anyhow!("config field `domain`: required by this subcommand"))?;
        let d = match spec {
            DomainSpec::Rectangle { sigma, tau, h } => CompactDomain::rectangle(sigma[0], sigma[1], tau[0], tau[1], *h),
            DomainSpec::Disk { center, radius, h } => CompactDomain::disk(*center, *radius, *h),
        };
        d.context("config field `domain`")
    }

    fn pins(&self) -> BTreeMap<u64, Complex64> {
        self.config
            .steering
            .as_ref()
            .map(|s| s.pins.iter().map(|p| (p.p, p.value)).collect())
            .unwrap_or_default()
    }
}

fn section<'a, T>(value: &'a Option<T>, name: &str) -> Result<&'a T> {
    value
        .as_ref()
        .ok_or_else(|| anyhow!("config field `{name}`: section required by this subcommand"))
}

fn slack(pairs: &[(&str, Value)]) -> BTreeMap<String, Value> {
    pairs.iter().map(|(k, v)| (k.to_string(), v.clone())).collect()
}

/// Ledger whose items carry their own thresholds.
fn ledger(epsilon: f64, items: Vec<(String, f64, f64)>) -> BudgetLedger {
    let items: Vec<LedgerItem> = items
        .into_iter()
        .map(|(name, value, threshold)| LedgerItem {
            name,
            value,
            threshold,
            within: value < threshold,
        })
        .collect();
    BudgetLedger {
        epsilon,
        sum: items.iter().map(|i| i.value).sum(),
        all_within: items.iter().all(|i| i.within),
        items,
    }
}

fn status(pass: bool) -> Status {
    if pass {
        Status::Pass
    } else {
        Status::Inconclusive
    }
}

pub fn run(kind: CommandKind, run: &Run<'_>) -> Result<Outcome> {
    match kind {
        CommandKind::OrderEstimate => order_estimate(run),
        CommandKind::Orthogonality => orthogonality(run),
        CommandKind::Steer => steer(run),
        CommandKind::FindShift => find_shift_command(run),
        CommandKind::Verify => verify(run),
        CommandKind::PlanTh1 => plan(run),
        CommandKind::Zeros => zeros(run),
        CommandKind::FitTarget => fit(run),
    }
}

fn order_estimate(run: &Run<'_>) -> Result<Outcome> {
    let spec = section(&run.config.order_estimate, "order_estimate")?;
    let sieve = run.sieve();
    let bands: Vec<PrimeBand> = spec
        .bands
        .iter()
        .enumerate()
        .map(|(i, [lo, hi])| PrimeBand::between(*lo, *hi).with_context(|| format!("config field `order_estimate.bands[{i}]`")))
        .collect::<Result<_>>()?;
    let mut results = Vec::new();
    let mut csv = String::from("series,lower,upper,exponent,first_moment,fourth_moment\n");
    let mut degenerate = false;
    for (i, source) in run.sources()?.iter().enumerate() {
        let est = estimate_order(&sieve, source, &bands, spec.power_tail_cutoff)?;
        degenerate |= est.degenerate;
        for b in &est.evidence {
            csv.push_str(&format!(
                "{i},{},{},{:?},{:?},{:?}\n",
                b.lower, b.upper, b.exponent, b.first_moment, b.fourth_moment
            ));
        }
        results.push(json!({ "series": i, "label": source.label(), "estimate": est }));
    }
    Ok(Outcome {
        status: status(!degenerate),
        ledger: None,
        slack: slack(&[("power_tail_cutoff", json!(spec.power_tail_cutoff))]),
        result: json!({ "orders": results }),
        csv: Some(csv),
        files: Vec::new(),
    })
}

fn orthogonality(run: &Run<'_>) -> Result<Outcome> {
    let spec = section(&run.config.orthogonality, "orthogonality")?;
    let sieve = run.sieve();
    let sources = run.sources()?;
    let pairs: Vec<[usize; 2]> = if spec.pairs.is_empty() {
        (0..sources.len())
            .flat_map(|i| (i + 1..sources.len()).map(move |j| [i, j]))
            .collect()
    } else {
        spec.pairs.clone()
    };
    if pairs.is_empty() {
        bail!("config field `orthogonality.pairs`: need two series or an explicit pair");
    }
    let bands: Vec<PrimeBand> = spec
        .bands
        .iter()
        .enumerate()
        .map(|(i, b)| PrimeBand::new(b.lower, b.xi).with_context(|| format!("config field `orthogonality.bands[{i}]`")))
        .collect::<Result<_>>()?;
    let mut results = Vec::new();
    let mut csv = String::from("a,b,lower,upper,re,im,magnitude,sieved_upper,continuation_radius\n");
    for (k, &[i, j]) in pairs.iter().enumerate() {
        if i >= sources.len() || j >= sources.len() {
            bail!("config field `orthogonality.pairs[{k}]`: series index out of range");
        }
        let profile = estimate_orthogonality(&sieve, &sources[i], &sources[j], &bands)?;
        for b in &profile.bands {
            csv.push_str(&format!(
                "{i},{j},{},{},{:?},{:?},{:?},{},{:?}\n",
                b.lower, b.upper, b.sum.re, b.sum.im, b.magnitude, b.sieved_upper, b.continuation_radius
            ));
        }
        results.push(json!({ "a": i, "b": j, "profile": profile }));
    }
    Ok(Outcome {
        status: Status::Pass,
        ledger: None,
        slack: slack(&[("density_continuation_above_ceiling", json!(true))]),
        result: json!({ "pairs": results }),
        csv: Some(csv),
        files: Vec::new(),
    })
}

fn steering_problem(run: &Run<'_>) -> Result<SteeringProblem> {
    let spec = section(&run.config.steering, "steering")?;
    Ok(SteeringProblem {
        sources: run.pure_sources()?,
        params: SteeringParams {
            lambda: spec.lambda,
            big_lambda: spec.big_lambda,
            slack: run.config.tolerances.slack,
            min_start: spec.min_start,
        },
        targets: run.targets()?,
        pins: run.pins(),
        delta: spec.delta,
        epsilon: run.config.tolerances.epsilon,
        domain: run.domain()?,
        riemann_nodes: spec.riemann_nodes,
        seed: run.seed()?,
        mode: match spec.mode {
            SumModeSpec::PrimeSum => SumMode::PrimeSum,
            SumModeSpec::LogEuler => SumMode::LogEuler,
        },
    })
}

fn steer(run: &Run<'_>) -> Result<Outcome> {
    let problem = steering_problem(run)?;
    let sieve = run.sieve();
    let out = steer_function(&sieve, &problem)?;
    // In log-Euler mode the twist is checked once more against log L itself.
    let verification = if problem.mode == SumMode::LogEuler {
        let mut check = HybridCheck::from_problem(&problem);
        check.transfer_budget = run.config.tolerances.epsilon2;
        Some(verify_hybrid(&sieve, &check, HybridMode::Omega(&out.omega))?)
    } else {
        None
    };
    let pass = out.pass && verification.as_ref().map_or(true, |v| v.pass);
    let mut csv = String::from("lower,upper,achieved_error,residual_before_rounding,residual_threshold,skipped\n");
    for b in &out.bands {
        csv.push_str(&format!(
            "{},{},{:?},{:?},{:?},{}\n",
            b.lower, b.upper, b.achieved_error, b.residual_before_rounding, b.residual_threshold, b.skipped
        ));
    }
    let mut files = Vec::new();
    if run.config.outputs.omega {
        files.push(("omega.txt".to_string(), out.omega.to_text()));
    }
    Ok(Outcome {
        status: status(pass),
        ledger: Some(out.ledger.clone()),
        slack: slack(&[
            ("contraction_slack", json!(problem.params.slack)),
            ("min_start", json!(problem.params.min_start)),
            ("item_share", json!(problem.epsilon / 9.0)),
            ("grid_slack", json!(out.grid_slack)),
            ("quadrature", json!(out.quadrature)),
            ("beyond_ceiling", json!(out.beyond_ceiling)),
            ("beyond_is_probabilistic", json!(out.beyond_is_probabilistic)),
        ]),
        result: json!({ "steering": out, "verification": verification }),
        csv: Some(csv),
        files,
    })
}

fn shift_targets(run: &Run<'_>) -> Result<BTreeMap<u64, Complex64>> {
    let spec = section(&run.config.shift, "shift")?;
    Ok(match &spec.targets {
        ShiftTargets::Fixed { values } => values.iter().map(|v| (v.p, v.value)).collect(),
        ShiftTargets::Random { primes } => {
            let mut rng = ChaCha8Rng::seed_from_u64(run.seed()?);
            primes
                .iter()
                .map(|&p| (p, Complex64::from_polar(1.0, std::f64::consts::TAU * rng.gen::<f64>())))
                .collect()
        }
    })
}

fn find_shift_command(run: &Run<'_>) -> Result<Outcome> {
    let targets = shift_targets(run)?;
    let b = &run.config.budgets;
    let epsilon = run.config.tolerances.epsilon;
    let window = find_shift(
        &targets,
        epsilon,
        &ShiftSearch {
            t_lo: b.t_lo,
            t_hi: b.t_max,
            max_hits: b.max_hits,
        },
    )?;
    let density = if b.samples > 0 {
        let seed = run.seed()?;
        Some(density_estimate(|t| max_deviation(&targets, t) < epsilon, b.density_t_max, b.samples, seed)?)
    } else {
        None
    };
    let best = window.hits.first().map_or(f64::INFINITY, |h| h.max_deviation);
    let targets_json: Vec<Value> = targets.iter().map(|(p, a)| json!({ "p": p, "value": a })).collect();
    Ok(Outcome {
        status: status(!window.hits.is_empty()),
        ledger: Some(ledger(epsilon, vec![("max_deviation".into(), best, epsilon)])),
        slack: slack(&[("step", json!(window.step)), ("guaranteed_margin", json!(epsilon / 2.0))]),
        csv: Some(window.to_csv()),
        result: json!({ "targets": targets_json, "window": window, "density": density }),
        files: Vec::new(),
    })
}

fn read_assignment(path: &Path) -> Result<UnimodularAssignment> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    UnimodularAssignment::from_text(&text).with_context(|| format!("parsing {}", path.display()))
}

/// log L on the grid summed prime by prime up to the ceiling. Its error
/// against the measured sums is identically zero between grid points, so
/// the grid-to-K slack is zero.
fn evaluator_targets(
    sieve: &Sieve,
    sources: &[CoefficientSource],
    domain: &CompactDomain,
    delta: f64,
    shift: f64,
    omega: &UnimodularAssignment,
) -> Result<Vec<GridTarget>> {
    sources
        .iter()
        .map(|source| {
            let values = domain
                .points()
                .iter()
                .map(|s| {
                    let w = Complex64::new(1.0, shift) + delta * s;
                    let value = sieve.sum_complex(2, sieve.ceiling(), |p| source.local_log(p, w, omega.value(p)))?;
                    Ok(Bounded { value, radius: 0.0 })
                })
                .collect::<Result<_>>()?;
            Ok(GridTarget {
                values,
                derivative_bound: 0.0,
            })
        })
        .collect()
}

fn verify(run: &Run<'_>) -> Result<Outcome> {
    let spec = section(&run.config.verify, "verify")?;
    let steering = section(&run.config.steering, "steering")?;
    let sieve = run.sieve();
    let sources = run.pure_sources()?;
    let domain = run.domain()?;
    let delta = steering.delta;
    let omega = match &spec.mode {
        VerifyMode::Omega { omega_file: Some(p) } => read_assignment(&run.path(p))?,
        _ => UnimodularAssignment::one(),
    };
    let reference = match &spec.mode {
        VerifyMode::Shift {
            reference_file: Some(p), ..
        } => Some(read_assignment(&run.path(p))?),
        _ => None,
    };
    let shift = match spec.mode {
        VerifyMode::Shift { t, .. } => t,
        VerifyMode::Omega { .. } => 0.0,
    };
    let targets = match spec.targets {
        TargetSource::Config => {
            let t = run.targets()?;
            t.iter().map(|t| GridTarget::from_laplace(t, &domain)).collect()
        }
        TargetSource::Evaluator => evaluator_targets(&sieve, &sources, &domain, delta, shift, &omega)?,
    };
    let check = HybridCheck {
        sources,
        targets,
        domain,
        delta,
        epsilon: run.config.tolerances.epsilon,
        pins: run.pins(),
        transfer_budget: run.config.tolerances.epsilon2,
    };
    let mode = match &spec.mode {
        VerifyMode::Omega { .. } => HybridMode::Omega(&omega),
        VerifyMode::Shift { t, .. } => HybridMode::Shift {
            t: *t,
            reference: reference.as_ref(),
        },
    };
    let report = verify_hybrid(&sieve, &check, mode)?;
    let mut csv = String::from("source,max_error\n");
    for (k, e) in report.errors.iter().enumerate() {
        csv.push_str(&format!("{k},{e:?}\n"));
    }
    Ok(Outcome {
        status: status(report.pass),
        ledger: Some(report.ledger.clone()),
        slack: slack(&[
            ("grid_slack", json!(report.grid_slack)),
            ("quadrature", json!(report.quadrature)),
            ("beyond_ceiling", json!(report.beyond_ceiling)),
            ("beyond_is_probabilistic", json!(report.beyond_is_probabilistic)),
            ("transfer_budget", json!(run.config.tolerances.epsilon2)),
        ]),
        result: json!({ "verification": report }),
        csv: Some(csv),
        files: Vec::new(),
    })
}

fn plan(run: &Run<'_>) -> Result<Outcome> {
    let spec = run.config.plan.unwrap_or_default();
    let epsilon = run.config.tolerances.epsilon;
    let config = PlanConfig {
        t_window: spec.t_window,
        scan_step: spec.scan_step,
        xi_min: spec.xi_min,
        epsilon,
        lambda: spec.lambda,
        big_lambda: spec.big_lambda,
    };
    let plan = plan_theorem1(&run.standard_series()?, &run.targets()?, &run.domain()?, &config)?;
    let items = plan
        .expansion
        .iter()
        .zip(&plan.expansion_threshold)
        .enumerate()
        .map(|(k, (e, t))| (format!("expansion_{k}"), *e, *t))
        .collect();
    let pass = plan.floor_ok.iter().all(|x| *x) && plan.expansion_ok.iter().all(|x| *x);
    Ok(Outcome {
        status: status(pass),
        ledger: Some(ledger(epsilon, items)),
        slack: slack(&[
            ("scan_step", json!(spec.scan_step)),
            ("xi_min", json!(spec.xi_min)),
            ("perturbation_share", json!(epsilon / 8.0)),
        ]),
        result: json!({ "plan": plan }),
        csv: None,
        files: Vec::new(),
    })
}

fn zeros(run: &Run<'_>) -> Result<Outcome> {
    let spec = section(&run.config.zeros, "zeros")?;
    let b = &run.config.budgets;
    let defaults = WindingControl::default();
    let config = ZeroHuntConfig {
        re_lo: spec.re_lo,
        re_hi: spec.re_hi,
        t_lo: spec.t_lo,
        t_budget: b.t_budget,
        cutoff: b.cutoff,
        margin: spec.margin,
        max_tiles: b.max_tiles,
        control: WindingControl {
            initial_points: spec.initial_points,
            max_points: spec.max_points,
            ..defaults
        },
    };
    let report = zero_hunt(&spec.weights, &run.standard_series()?, &config)?;
    let found = report.hits.iter().any(|h| h.confirmed);
    Ok(Outcome {
        status: status(found),
        ledger: None,
        slack: slack(&[
            ("tile_overlap", json!(0.1)),
            ("margin", json!(spec.margin)),
            ("min_modulus", json!(config.control.min_modulus)),
            ("relative_step", json!(config.control.relative_step)),
        ]),
        csv: Some(report.to_csv()),
        result: json!({ "zeros": report }),
        files: Vec::new(),
    })
}

fn read_samples(path: &Path) -> Result<Vec<(Complex64, Complex64)>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let body = line.trim();
        if body.is_empty() || body.starts_with('#') {
            continue;
        }
        let fields: Vec<f64> = body
            .split_whitespace()
            .map(str::parse)
            .collect::<Result<_, _>>()
            .map_err(|e| anyhow!("{}:{}: {e}", path.display(), i + 1))?;
        if fields.len() != 4 {
            bail!("{}:{}: expected `re(s) im(s) re(f) im(f)`", path.display(), i + 1);
        }
        out.push((Complex64::new(fields[0], fields[1]), Complex64::new(fields[2], fields[3])));
    }
    Ok(out)
}

fn fit(run: &Run<'_>) -> Result<Outcome> {
    let spec = section(&run.config.fit, "fit")?;
    let samples = match &spec.samples {
        FitSamples::Target { index } => {
            let target = &run.targets()?[*index];
            run.domain()?
                .points()
                .iter()
                .map(|s| (*s, target.laplace_eval(*s).value))
                .collect()
        }
        FitSamples::File { path } => read_samples(&run.path(path))?,
    };
    let [a, b] = spec.support;
    let result = fit_target(&samples, a, b, spec.nodes)?;
    let samples_g = result.target.samples();
    let mut csv = String::from("x,g_re,g_im\n");
    for (i, g) in samples_g.iter().enumerate() {
        let x = a + (b - a) * i as f64 / (samples_g.len() - 1) as f64;
        csv.push_str(&format!("{x:?},{:?},{:?}\n", g.re, g.im));
    }
    Ok(Outcome {
        status: status(result.residual_max < spec.tolerance),
        ledger: Some(ledger(
            spec.tolerance,
            vec![("residual_max".into(), result.residual_max, spec.tolerance)],
        )),
        slack: slack(&[("ridge", json!(1e-10)), ("condition_limit", json!(1e12))]),
        result: json!({ "fit": result, "samples": samples.len() }),
        csv: Some(csv),
        files: Vec::new(),
    })
}
