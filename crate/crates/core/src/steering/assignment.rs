//! Completely multiplicative unimodular twists ω.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};

/// Tolerance on |ω(p)| = 1.
pub const UNIMODULAR_TOLERANCE: f64 = 1e-12;

/// Value of ω on primes without a stored value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "rule", rename_all = "kebab-case")]
pub enum DefaultRule {
    /// ω(p) = 1.
    One,
    /// ω(p) = e^{2πiθ_p} with θ_p drawn from a ChaCha stream keyed by
    /// (seed, p); the value depends only on the seed and the prime.
    SeededRandom { seed: u64 },
}

impl DefaultRule {
    pub fn value(&self, p: u64) -> Complex64 {
        match *self {
            DefaultRule::One => Complex64::new(1.0, 0.0),
            DefaultRule::SeededRandom { seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(p);
                let turn: f64 = rng.gen();
                Complex64::from_polar(1.0, std::f64::consts::TAU * turn)
            }
        }
    }
}

/// ω: primes → unit circle, stored values plus a default rule, extended
/// completely multiplicatively.
#[derive(Debug, Clone, PartialEq)]
pub struct UnimodularAssignment {
    pinned: BTreeMap<u64, Complex64>,
    default_rule: DefaultRule,
}

impl UnimodularAssignment {
    pub fn new(default_rule: DefaultRule) -> Self {
        Self {
            pinned: BTreeMap::new(),
            default_rule,
        }
    }

    /// ω ≡ 1.
    pub fn one() -> Self {
        Self::new(DefaultRule::One)
    }

    /// Seeded random phases on every prime.
    pub fn seeded(seed: u64) -> Self {
        Self::new(DefaultRule::SeededRandom { seed })
    }

    pub fn default_rule(&self) -> DefaultRule {
        self.default_rule
    }

    /// Stores ω(p). A prime keeps its first stored value: storing a
    /// different value later is an error.
    pub fn pin(&mut self, p: u64, value: Complex64) -> Result<()> {
        if ((value.norm() - 1.0).abs() > UNIMODULAR_TOLERANCE) || !value.re.is_finite() {
            return Err(Error::InvalidInput(format!(
                "omega({p}) = {value} is not unimodular"
            )));
        }
        match self.pinned.get(&p) {
            Some(existing) if *existing != value => Err(Error::InvalidInput(format!(
                "omega({p}) is already pinned to {existing}"
            ))),
            Some(_) => Ok(()),
            None => {
                self.pinned.insert(p, value);
                Ok(())
            }
        }
    }

    /// Stores many values; every prime must be new or unchanged.
    pub fn pin_all<I: IntoIterator<Item = (u64, Complex64)>>(&mut self, values: I) -> Result<()> {
        for (p, v) in values {
            self.pin(p, v)?;
        }
        Ok(())
    }

    pub fn is_pinned(&self, p: u64) -> bool {
        self.pinned.contains_key(&p)
    }

    pub fn pinned(&self) -> &BTreeMap<u64, Complex64> {
        &self.pinned
    }

    /// Stored values with `lo <= p < hi`.
    pub fn pinned_in(&self, lo: u64, hi: u64) -> impl Iterator<Item = (u64, Complex64)> + '_ {
        self.pinned.range(lo..hi.max(lo)).map(|(p, v)| (*p, *v))
    }

    #[inline]
    pub fn value(&self, p: u64) -> Complex64 {
        match self.pinned.get(&p) {
            Some(v) => *v,
            None => self.default_rule.value(p),
        }
    }

    /// ω(p^k) = ω(p)^k.
    pub fn power(&self, p: u64, k: u32) -> Complex64 {
        self.value(p).powu(k)
    }

    /// Text export: a header with the default rule, then `p re im` lines in
    /// ascending p. Floats use the shortest representation that parses back
    /// to the same bits.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        match self.default_rule {
            DefaultRule::One => out.push_str("# default_rule one\n"),
            DefaultRule::SeededRandom { seed } => {
                out.push_str("# default_rule seeded-random\n");
                let _ = writeln!(out, "# seed {seed}");
            }
        }
        for (p, v) in &self.pinned {
            let _ = writeln!(out, "{p} {:?} {:?}", v.re, v.im);
        }
        out
    }

    /// Parses [`UnimodularAssignment::to_text`] output.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut rule: Option<&str> = None;
        let mut seed: Option<u64> = None;
        let mut values = Vec::new();
        let mut last = 0u64;
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let body = raw.trim();
            if body.is_empty() {
                continue;
            }
            let bad = |msg: &str| Error::InvalidInput(format!("assignment line {line}: {msg}"));
            if let Some(header) = body.strip_prefix('#') {
                let fields: Vec<&str> = header.split_whitespace().collect();
                match fields.as_slice() {
                    ["default_rule", r] => rule = Some(r),
                    ["seed", s] => seed = Some(s.parse().map_err(|_| bad("bad seed"))?),
                    _ => {}
                }
                continue;
            }
            let fields: Vec<&str> = body.split_whitespace().collect();
            if fields.len() != 3 {
                return Err(bad("expected `p re im`"));
            }
            let p: u64 = fields[0].parse().map_err(|_| bad("bad prime"))?;
            let re: f64 = fields[1].parse().map_err(|_| bad("bad real part"))?;
            let im: f64 = fields[2].parse().map_err(|_| bad("bad imaginary part"))?;
            if p <= last {
                return Err(bad("primes must increase"));
            }
            last = p;
            values.push((p, Complex64::new(re, im)));
        }
        let default_rule = match (rule, seed) {
            (Some("one"), _) => DefaultRule::One,
            (Some("seeded-random"), Some(seed)) => DefaultRule::SeededRandom { seed },
            (Some("seeded-random"), None) => {
                return Err(Error::InvalidInput("seeded-random assignment without a seed".into()))
            }
            _ => return Err(Error::InvalidInput("assignment header lacks a default_rule".into())),
        };
        let mut out = Self::new(default_rule);
        out.pin_all(values)?;
        Ok(out)
    }
}
