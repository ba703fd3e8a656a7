//! Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any
//! criterion fails.

use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::path::{Path, PathBuf};
use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;
use universality::analytic::{winding_number, Rect, WindingControl};
use universality::primes::{PrimeBand, Sieve, DEFAULT_CEILING};
use universality::series::{estimate_orthogonality, evaluate_dirichlet, CoefficientSource, StandardTypeSeries};
use universality::steering::{correction_step, steer_block, unimodular_round, SteeringParams, UnimodularAssignment};
use universality_cli::{execute, CommandKind, Overrides};

type Check = Result<String, String>;

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn scratch(name: &str) -> PathBuf {
    let dir = Path::new(env!("CARGO_TARGET_TMPDIR")).join("acceptance").join(name);
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

/// Runs a subcommand exactly as the `universality` binary does.
fn cli(command: CommandKind, config: &str, out: &Path) -> u8 {
    execute(command, &configs().join(config), &Overrides::default(), out)
}

fn report(out: &Path, command: &str) -> Value {
    let text = std::fs::read_to_string(out.join(format!("{command}.json"))).expect("report written");
    serde_json::from_str(&text).expect("report parses")
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn unit(theta: f64) -> Complex64 {
    Complex64::from_polar(1.0, theta)
}

fn rounding() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    for instance in 0..1000 {
        let m = rng.gen_range(1..=64);
        let n = rng.gen_range(1..=8);
        let x: Vec<Vec<Complex64>> = (0..m)
            .map(|_| (0..n).map(|_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect())
            .collect();
        let a: Vec<Complex64> = (0..m).map(|_| unit(rng.gen::<f64>() * TAU)).collect();
        let b = unimodular_round(&x, &a).map_err(|e| e.to_string())?;
        let deviation: f64 = (0..n)
            .map(|i| x.iter().zip(a.iter().zip(&b)).map(|(xj, (aj, bj))| (aj - bj) * xj[i]).sum::<Complex64>().norm_sqr())
            .sum();
        let bound = 4.0 * x.iter().flatten().map(|z| z.norm_sqr()).sum::<f64>();
        if deviation > bound {
            return Err(format!("instance {instance}: {deviation} > {bound}"));
        }
        worst = worst.max(deviation / bound);
    }
    Ok(format!("1000 instances, worst deviation / bound = {worst:.3}"))
}

fn contraction() -> Check {
    let sieve = Sieve::new(10_000_000);
    let all = [
        CoefficientSource::Zeta,
        CoefficientSource::ShiftedZeta { shift: 1.0 },
        CoefficientSource::ShiftedZeta { shift: 2.0 },
    ];
    let params = SteeringParams::default();
    let mut lines = Vec::new();
    for n in 1..=3 {
        let start = Instant::now();
        let v: Vec<Complex64> = (0..n).map(|k| Complex64::from_polar(0.3, 1.0 + 2.0 * k as f64)).collect();
        let step = correction_step(&sieve, &all[..n], &v, 10_000, &params).map_err(|e| e.to_string())?;
        let allowed = 1.0 - 1.0 / (4.0 * n as f64) + 0.02;
        let seconds = start.elapsed().as_secs_f64();
        let summary = format!(
            "n={n}: ratio {:.4} (allowed {allowed:.4}), log N0/log N {:.3} (bound {:.3} + 0.2), {seconds:.1}s",
            step.ratio, step.end_exponent, step.end_exponent_bound
        );
        if step.ratio > allowed || step.end_exponent > step.end_exponent_bound + 0.2 || seconds >= 60.0 {
            return Err(summary);
        }
        lines.push(summary);
    }
    Ok(lines.join("; "))
}

fn block() -> Check {
    let sieve = Sieve::new(100_000_000);
    let sources = [CoefficientSource::Zeta, CoefficientSource::ShiftedZeta { shift: 1.0 }];
    let targets = [Complex64::from_polar(0.044, 0.7), Complex64::from_polar(0.044, -2.1)];
    let out = steer_block(&sieve, &sources, &targets, 10_000, 1.0, 0.03, &SteeringParams::default(), &UnimodularAssignment::one())
        .map_err(|e| e.to_string())?;
    let summary = format!("block [{}, {}) error {:.4}", out.lower, out.upper, out.achieved_error);
    if out.achieved_error < 0.03 {
        Ok(summary)
    } else {
        Err(summary)
    }
}

fn end_to_end() -> Check {
    let out = scratch("end-to-end");
    let code = cli(CommandKind::Steer, "end-to-end.json", &out);
    let r = report(&out, "steer");
    let items = r["ledger"]["items"].as_array().map_or(0, |a| a.len());
    let verified = r["result"]["verification"]["pass"] == Value::Bool(true);
    let summary = format!(
        "exit {code}, {items} ledger items, total bound {}, verification pass {verified}",
        r["result"]["steering"]["total_bound"]
    );
    if code == 0 && items == 9 && verified {
        Ok(summary)
    } else {
        Err(summary)
    }
}

fn hybrid_shift() -> Check {
    let out = scratch("find-shift");
    let code = cli(CommandKind::FindShift, "find-shift.json", &out);
    let r = report(&out, "find-shift");
    let hits = r["result"]["window"]["hits"].as_array().cloned().unwrap_or_default();
    let first = hits.first().and_then(|h| h["t"].as_f64()).unwrap_or(f64::INFINITY);
    let density = &r["result"]["density"];
    let fraction = density["fraction"].as_f64().unwrap_or(0.0);
    let radius = density["radius"].as_f64().unwrap_or(f64::INFINITY);
    let summary = format!(
        "exit {code}, {} hits, first t = {first:.3}, density {fraction:.5} ± {radius:.5} over {} samples",
        hits.len(),
        density["samples"]
    );
    if code == 0 && first <= 1e5 && fraction - radius > 0.0 && density["samples"] == 1_000_000 {
        Ok(summary)
    } else {
        Err(summary)
    }
}

fn orthogonality_decay() -> Check {
    let sieve = Sieve::new(DEFAULT_CEILING);
    let bands = [PrimeBand::new(1_000, 1.0).unwrap(), PrimeBand::new(1_000_000, 1.0).unwrap()];
    let shifted = CoefficientSource::ShiftedZeta { shift: 1.0 };
    let profile = estimate_orthogonality(&sieve, &CoefficientSource::Zeta, &shifted, &bands).map_err(|e| e.to_string())?;
    let control =
        estimate_orthogonality(&sieve, &CoefficientSource::Zeta, &CoefficientSource::Zeta, &bands).map_err(|e| e.to_string())?;
    let (small, large) = (&profile.bands[0], &profile.bands[1]);
    let control_gap = control.bands.iter().map(|b| (b.magnitude - 2f64.ln()).abs()).fold(0.0, f64::max);
    let summary = format!(
        "|band sum| {:.4} at N=10^3, {:.4} ± {:.1e} at N=10^6 (ratio {:.3}, need ≤ 0.5); control within {control_gap:.4} of log 2",
        small.magnitude,
        large.magnitude,
        large.continuation_radius,
        large.magnitude / small.magnitude
    );
    if large.magnitude + large.continuation_radius <= 0.5 * small.magnitude && control_gap <= 0.05 {
        Ok(summary)
    } else {
        Err(summary)
    }
}

fn winding() -> Check {
    let control = WindingControl::default();
    let s0 = c(0.3, 0.2);
    let rect = Rect { re_lo: -1.0, re_hi: 1.0, im_lo: -1.0, im_hi: 1.5 };
    let zeta = StandardTypeSeries::pure(CoefficientSource::Zeta);
    let cases: Vec<(&str, i64, Box<dyn Fn(Complex64) -> universality::Result<Complex64>>, Rect)> = vec![
        ("s - s0", 1, Box::new(move |s| Ok(s - s0)), rect),
        ("(s - s0)^2", 2, Box::new(move |s| Ok((s - s0) * (s - s0))), rect),
        (
            "zeta on [1.5, 2.5] x [0, 10]",
            0,
            Box::new(move |s| Ok(evaluate_dirichlet(&zeta, s, 5_000, 0.05)?.value)),
            Rect { re_lo: 1.5, re_hi: 2.5, im_lo: 0.0, im_hi: 10.0 },
        ),
    ];
    let mut parts = Vec::new();
    for (name, expected, f, rect) in cases {
        let w = winding_number(f, &rect, &control).map_err(|e| format!("{name}: {e}"))?;
        let part = format!("{name} -> {} (residual {:.1e})", w.winding, w.residual);
        if w.winding != expected || w.residual >= 0.25 {
            return Err(part);
        }
        parts.push(part);
    }
    Ok(parts.join("; "))
}

const SUBCOMMANDS: [(CommandKind, &str); 10] = [
    (CommandKind::OrderEstimate, "order-estimate.json"),
    (CommandKind::Orthogonality, "orthogonality.json"),
    (CommandKind::Steer, "steer.json"),
    (CommandKind::Steer, "inadmissible.json"),
    (CommandKind::FindShift, "find-shift.json"),
    (CommandKind::Verify, "verify.json"),
    (CommandKind::PlanTh1, "plan-th1.json"),
    (CommandKind::Zeros, "zeros.json"),
    (CommandKind::Zeros, "zeros-zeta.json"),
    (CommandKind::FitTarget, "fit-target.json"),
];

fn files(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let path = e.unwrap().path();
            (path.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&path).unwrap())
        })
        .collect()
}

fn determinism(codes: &mut BTreeMap<String, u8>) -> Check {
    let mut compared = 0;
    for (command, config) in SUBCOMMANDS {
        let a = scratch(&format!("{config}-a"));
        let b = scratch(&format!("{config}-b"));
        let first = cli(command, config, &a);
        let second = cli(command, config, &b);
        codes.insert(config.to_string(), first);
        let (x, y) = (files(&a), files(&b));
        if first != second || x.is_empty() || x != y {
            return Err(format!("{} --config {config} differs between runs", command.name()));
        }
        compared += x.len();
    }
    Ok(format!("{} runs repeated, {compared} files byte-identical", SUBCOMMANDS.len()))
}

fn zero_hunt(codes: &BTreeMap<String, u8>) -> Check {
    let code = codes.get("zeros-zeta.json").copied();
    // The first determinism run of this config.
    let out = Path::new(env!("CARGO_TARGET_TMPDIR")).join("acceptance/zeros-zeta.json-a");
    let r = report(&out, "zeros");
    let z = &r["result"]["zeros"];
    let summary = format!(
        "exit {code:?}, status {}, {} winding tiles, {} hits, budget exhausted {}",
        r["status"],
        z["winding_tiles"],
        z["hits"].as_array().map_or(0, |h| h.len()),
        z["budget_exhausted"]
    );
    let hits_confirmed = z["hits"]
        .as_array()
        .is_some_and(|h| !h.is_empty() && h.iter().any(|t| t["confirmed"] == Value::Bool(true)));
    match code {
        Some(0) if hits_confirmed => Ok(summary),
        Some(2) => Ok(summary),
        _ => Err(summary),
    }
}

fn main() {
    let mut codes = BTreeMap::new();
    let mut failures = 0;
    let mut line = |number: usize, name: &str, check: &mut dyn FnMut() -> Check| {
        let start = Instant::now();
        let outcome = check();
        let seconds = start.elapsed().as_secs_f64();
        let (status, detail) = match outcome {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failures += 1;
                ("FAIL", d)
            }
        };
        println!("criterion {number} [{name}]: {status} in {seconds:.1}s: {detail}");
    };
    line(1, "rounding", &mut timed(rounding, 5.0));
    line(2, "contraction", &mut contraction);
    line(3, "block steering", &mut timed(block, 120.0));
    line(4, "end-to-end", &mut timed(end_to_end, 600.0));
    line(5, "hybrid shift", &mut timed(hybrid_shift, 300.0));
    line(6, "orthogonality decay", &mut timed(orthogonality_decay, 180.0));
    line(7, "winding", &mut timed(winding, 30.0));
    line(8, "determinism", &mut || determinism(&mut codes));
    line(9, "zero hunt", &mut || zero_hunt(&codes));
    if failures > 0 {
        println!("{failures} criteria failed");
        std::process::exit(1);
    }
}

/// Fails the check when it runs longer than `limit` seconds.
fn timed(check: fn() -> Check, limit: f64) -> impl FnMut() -> Check {
    move || {
        let start = Instant::now();
        let result = check()?;
        let seconds = start.elapsed().as_secs_f64();
        if seconds < limit {
            Ok(result)
        } else {
            Err(format!("{result}, but took {seconds:.1}s (limit {limit}s)"))
        }
    }
}
