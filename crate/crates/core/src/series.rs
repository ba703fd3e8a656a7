//! Coefficient sources, standard-type series and their evaluation.
//!
//! A [`CoefficientSource`] supplies the Euler-product coefficients c(p^k).
//! A [`StandardTypeSeries`] wraps a source together with a finite multiplier
//! series `L_2(s) = 1 + Σ b(n) n^{-s}` and an additive series
//! `L_3(s) = Σ d(n) n^{-s}`, so that `L = L_1 · L_2 + L_3`.
//!
//! Every evaluation returns a [`Bounded`] value: a finite truncation plus a
//! radius that bounds the discarded tail. Local factor logarithms use the
//! principal branch, and `log L_1` is always the sum of local logarithms.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::primes::{band_moment_sum, PrimeBand, Sieve};
use crate::steering::UnimodularAssignment;
use crate::summation::ComplexSum;

/// Default distance from the line Re(s) = 1 required by direct summation.
pub const DEFAULT_MARGIN: f64 = 0.05;

/// Largest modulus accepted for explicit character tables.
pub const MAX_CHARACTER_MODULUS: u64 = 10_000;

/// Depth limits for prime-power sums: k ≤ 40 and p^k ≤ 10^12.
pub const MAX_POWER_DEPTH: u32 = 40;
pub const MAX_PRIME_POWER: f64 = 1e12;

/// A value together with a bound on its truncation error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Bounded {
    pub value: Complex64,
    pub radius: f64,
}

impl Bounded {
    pub fn exact(value: Complex64) -> Self {
        Self { value, radius: 0.0 }
    }
}

/// A Dirichlet character given by its table of values on residues
/// `0..modulus`.
#[derive(Debug, Clone, PartialEq)]
pub struct DirichletCharacter {
    modulus: u64,
    values: Vec<Complex64>,
}

impl DirichletCharacter {
    /// Validates a character table: one entry per residue, each entry of
    /// modulus 0 or 1.
    pub fn from_table(modulus: u64, values: Vec<Complex64>) -> Result<Self> {
        if modulus == 0 || modulus > MAX_CHARACTER_MODULUS {
            return Err(Error::InvalidInput(format!(
                "character modulus must lie in 1..={MAX_CHARACTER_MODULUS}, got {modulus}"
            )));
        }
        if values.len() as u64 != modulus {
            return Err(Error::InvalidInput(format!(
                "character table has {} entries for modulus {modulus}",
                values.len()
            )));
        }
        for (r, v) in values.iter().enumerate() {
            let m = v.norm();
            if !(m < 1e-9 || (m - 1.0).abs() < 1e-9) {
                return Err(Error::InvalidInput(format!(
                    "character value at residue {r} has modulus {m}, expected 0 or 1"
                )));
            }
        }
        Ok(Self { modulus, values })
    }

    pub fn modulus(&self) -> u64 {
        self.modulus
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn at(&self, n: u64) -> Complex64 {
        self.values[(n % self.modulus) as usize]
    }
}

/// How a coefficient table extends to prime powers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PowerRule {
    /// c(p^k) = c(p)^k; the table lists only k = 1.
    CompletelyMultiplicative,
    /// Every listed prime carries c(p), …, c(p^K) for some K and
    /// c(p^k) = 0 beyond K.
    Table,
}

/// Coefficients read from a text file with lines `p k re im`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientTable {
    path: PathBuf,
    rule: PowerRule,
    majorant: Option<f64>,
    entries: BTreeMap<u64, Vec<Complex64>>,
}

fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2u64;
    while d * d <= n {
        if n % d == 0 {
            return false;
        }
        d += 1;
    }
    true
}

impl CoefficientTable {
    /// Parses table text. Blank lines and lines starting with `#` are
    /// ignored; the remaining lines must be sorted by (p, k).
    pub fn parse(
        text: &str,
        path: impl Into<PathBuf>,
        rule: PowerRule,
        majorant: Option<f64>,
    ) -> Result<Self> {
        let path = path.into();
        let fail = |line: usize, message: String| Error::CoefficientParse {
            path: path.clone(),
            line,
            message,
        };
        let mut entries: BTreeMap<u64, Vec<Complex64>> = BTreeMap::new();
        let mut last: Option<(u64, u32)> = None;
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let body = raw.trim();
            if body.is_empty() || body.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = body.split_whitespace().collect();
            if fields.len() != 4 {
                return Err(fail(line, format!("expected `p k re im`, found {} fields", fields.len())));
            }
            let p: u64 = fields[0]
                .parse()
                .map_err(|_| fail(line, format!("bad prime `{}`", fields[0])))?;
            let k: u32 = fields[1]
                .parse()
                .map_err(|_| fail(line, format!("bad exponent `{}`", fields[1])))?;
            let re: f64 = fields[2]
                .parse()
                .map_err(|_| fail(line, format!("bad real part `{}`", fields[2])))?;
            let im: f64 = fields[3]
                .parse()
                .map_err(|_| fail(line, format!("bad imaginary part `{}`", fields[3])))?;
            if !is_prime(p) {
                return Err(fail(line, format!("{p} is not prime")));
            }
            if k == 0 {
                return Err(fail(line, "exponent must be at least 1".into()));
            }
            if rule == PowerRule::CompletelyMultiplicative && k != 1 {
                return Err(fail(
                    line,
                    "completely multiplicative tables list only k = 1".into(),
                ));
            }
            let c = Complex64::new(re, im);
            if !(c.re.is_finite() && c.im.is_finite()) {
                return Err(fail(line, "coefficient is not finite".into()));
            }
            if c.norm() >= (p as f64).powi(k as i32) {
                return Err(fail(line, format!("|c({p}^{k})| must be below {p}^{k}")));
            }
            if let Some(prev) = last {
                if (p, k) <= prev {
                    return Err(fail(line, format!("entry ({p}, {k}) is out of order")));
                }
            }
            let list = entries.entry(p).or_default();
            if list.len() as u32 + 1 != k {
                return Err(fail(
                    line,
                    format!("c({p}^{k}) listed without c({p}^{})", k - 1),
                ));
            }
            list.push(c);
            last = Some((p, k));
        }
        if let Some(m) = majorant {
            if !(m.is_finite() && m >= 0.0) {
                return Err(Error::InvalidInput(format!("majorant must be finite and non-negative, got {m}")));
            }
        }
        Ok(Self {
            path,
            rule,
            majorant,
            entries,
        })
    }

    /// Reads and parses a table file.
    pub fn load(path: &Path, rule: PowerRule, majorant: Option<f64>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text, path, rule, majorant)
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn rule(&self) -> PowerRule {
        self.rule
    }

    pub fn majorant(&self) -> Option<f64> {
        self.majorant
    }

    /// Largest prime present in the table.
    pub fn max_prime(&self) -> Option<u64> {
        self.entries.keys().next_back().copied()
    }

    fn powers(&self, p: u64) -> Result<&[Complex64]> {
        self.entries
            .get(&p)
            .map(|v| v.as_slice())
            .ok_or(Error::MissingCoefficient { p, k: 1 })
    }
}

/// Supplier of Euler-product coefficients c(p^k).
#[derive(Debug, Clone, PartialEq)]
pub enum CoefficientSource {
    /// c(p^k) = 1.
    Zeta,
    /// ζ(s + ia): c(p^k) = p^{-ika}.
    ShiftedZeta { shift: f64 },
    /// c(p^k) = χ(p)^k.
    Character(DirichletCharacter),
    /// Coefficients read from a file.
    Table(Arc<CoefficientTable>),
}

impl CoefficientSource {
    /// The source with c(p) = 0 for every prime (its series is the constant 1).
    pub fn zero() -> Self {
        CoefficientSource::Character(DirichletCharacter {
            modulus: 1,
            values: vec![Complex64::new(0.0, 0.0)],
        })
    }

    /// Short human-readable label.
    pub fn label(&self) -> String {
        match self {
            CoefficientSource::Zeta => "zeta".into(),
            CoefficientSource::ShiftedZeta { shift } => format!("shifted-zeta({shift})"),
            CoefficientSource::Character(chi) => format!("character(mod {})", chi.modulus),
            CoefficientSource::Table(t) => format!("file({})", t.path.display()),
        }
    }

    /// c(p^k).
    pub fn coefficient(&self, p: u64, k: u32) -> Result<Complex64> {
        if k == 0 {
            return Ok(Complex64::new(1.0, 0.0));
        }
        match self {
            CoefficientSource::Zeta => Ok(Complex64::new(1.0, 0.0)),
            CoefficientSource::ShiftedZeta { shift } => {
                Ok(Complex64::from_polar(1.0, -(k as f64) * shift * (p as f64).ln()))
            }
            CoefficientSource::Character(chi) => Ok(chi.at(p).powu(k)),
            CoefficientSource::Table(t) => {
                let powers = t.powers(p).map_err(|_| Error::MissingCoefficient { p, k })?;
                match t.rule {
                    PowerRule::CompletelyMultiplicative => Ok(powers[0].powu(k)),
                    PowerRule::Table => Ok(powers
                        .get(k as usize - 1)
                        .copied()
                        .unwrap_or(Complex64::new(0.0, 0.0))),
                }
            }
        }
    }

    /// c(p).
    #[inline]
    pub fn prime_coefficient(&self, p: u64) -> Result<Complex64> {
        self.coefficient(p, 1)
    }

    fn is_completely_multiplicative(&self) -> bool {
        match self {
            CoefficientSource::Table(t) => t.rule == PowerRule::CompletelyMultiplicative,
            _ => true,
        }
    }

    /// Bound on |c(p)| (and on |a(n)| for the Dirichlet coefficients), used
    /// by the tail estimates. File sources need a declared majorant.
    pub fn majorant(&self) -> Result<f64> {
        match self {
            CoefficientSource::Zeta | CoefficientSource::ShiftedZeta { .. } => Ok(1.0),
            CoefficientSource::Character(chi) => Ok(chi
                .values
                .iter()
                .map(|v| v.norm())
                .fold(0.0, f64::max)
                .round()),
            CoefficientSource::Table(t) => t.majorant.ok_or_else(|| {
                Error::InvalidInput(format!(
                    "coefficient file {} needs a declared majorant for tail bounds",
                    t.path.display()
                ))
            }),
        }
    }

    /// The first term ω c(p) p^{-s} of the local logarithm.
    #[inline]
    pub fn linear_term(&self, p: u64, s: Complex64, omega: Complex64) -> Result<Complex64> {
        Ok(omega * self.prime_coefficient(p)? * p_pow_neg(p, s))
    }

    /// Principal logarithm of the twisted local factor
    /// F_p(s, ω) = Σ_k ω^k c(p^k) p^{-ks}.
    pub fn local_log(&self, p: u64, s: Complex64, omega: Complex64) -> Result<Complex64> {
        let x = p_pow_neg(p, s);
        if self.is_completely_multiplicative() {
            let z = omega * self.prime_coefficient(p)? * x;
            if z.norm() >= 1.0 - 1e-12 {
                return Err(Error::VanishingLocalFactor { p });
            }
            return Ok(neg_log_one_minus(z));
        }
        let w = self.table_factor_minus_one(p, x, omega)?;
        if w.norm() >= 1.0 {
            return Err(Error::VanishingLocalFactor { p });
        }
        Ok(log_one_plus(w))
    }

    /// Per-prime defect ω c(p) p^{-s} − log F_p(s, ω), of size O(p^{-2Re s}).
    pub fn local_defect(&self, p: u64, s: Complex64, omega: Complex64) -> Result<Complex64> {
        let x = p_pow_neg(p, s);
        if self.is_completely_multiplicative() {
            let z = omega * self.prime_coefficient(p)? * x;
            if z.norm() >= 1.0 - 1e-12 {
                return Err(Error::VanishingLocalFactor { p });
            }
            return Ok(-higher_log_terms(z));
        }
        let linear = omega * self.prime_coefficient(p)? * x;
        Ok(linear - self.local_log(p, s, omega)?)
    }

    fn table_factor_minus_one(&self, p: u64, x: Complex64, omega: Complex64) -> Result<Complex64> {
        let CoefficientSource::Table(t) = self else {
            unreachable!("only explicit tables lack closed-form factors")
        };
        let mut acc = Complex64::new(0.0, 0.0);
        let mut power = Complex64::new(1.0, 0.0);
        for &c in t.powers(p)? {
            power *= omega * x;
            acc += c * power;
        }
        Ok(acc)
    }

    /// Dirichlet coefficients a(1..=n_max); index 0 holds a(1) = 1.
    pub fn dirichlet_coefficients(&self, n_max: u64) -> Result<Vec<Complex64>> {
        let n_max = n_max as usize;
        let one = Complex64::new(1.0, 0.0);
        match self {
            CoefficientSource::Zeta => Ok(vec![one; n_max]),
            CoefficientSource::ShiftedZeta { shift } => Ok((1..=n_max)
                .map(|n| Complex64::from_polar(1.0, -shift * (n as f64).ln()))
                .collect()),
            CoefficientSource::Character(chi) => {
                let mut out: Vec<Complex64> = (1..=n_max as u64).map(|n| chi.at(n)).collect();
                if let Some(first) = out.first_mut() {
                    *first = one;
                }
                Ok(out)
            }
            CoefficientSource::Table(_) => {
                let spf = smallest_prime_factors(n_max);
                let mut a = vec![Complex64::new(0.0, 0.0); n_max + 1];
                if n_max >= 1 {
                    a[1] = one;
                }
                for n in 2..=n_max {
                    let p = spf[n] as usize;
                    let mut m = n;
                    let mut k = 0u32;
                    while m % p == 0 {
                        m /= p;
                        k += 1;
                    }
                    a[n] = a[m] * self.coefficient(p as u64, k)?;
                }
                a.remove(0);
                Ok(a)
            }
        }
    }
}

fn smallest_prime_factors(n: usize) -> Vec<u32> {
    let mut spf = vec![0u32; n + 1];
    for i in 2..=n {
        if spf[i] == 0 {
            let mut j = i;
            while j <= n {
                if spf[j] == 0 {
                    spf[j] = i as u32;
                }
                j += i;
            }
        }
    }
    spf
}

/// p^{-s}.
#[inline]
pub fn p_pow_neg(p: u64, s: Complex64) -> Complex64 {
    (-s * (p as f64).ln()).exp()
}

/// Σ_{k≥2} z^k / k for |z| < 1.
fn higher_log_terms(z: Complex64) -> Complex64 {
    if z.norm() < 0.25 {
        let mut power = z * z;
        let mut acc = Complex64::new(0.0, 0.0);
        let mut k = 2.0;
        while power.norm() > 1e-18 * acc.norm().max(1e-300) && k < 200.0 {
            acc += power / k;
            power *= z;
            k += 1.0;
        }
        acc
    } else {
        -(Complex64::new(1.0, 0.0) - z).ln() - z
    }
}

/// −log(1 − z), principal branch, accurate for small |z|.
pub fn neg_log_one_minus(z: Complex64) -> Complex64 {
    z + higher_log_terms(z)
}

/// log(1 + w), principal branch, accurate for small |w|.
fn log_one_plus(w: Complex64) -> Complex64 {
    -neg_log_one_minus(-w)
}

/// Standard-type series L = L_1 · L_2 + L_3.
#[derive(Debug, Clone, PartialEq)]
pub struct StandardTypeSeries {
    pub euler: CoefficientSource,
    /// b(2), b(3), …; b(1) = 1 is implicit.
    pub multiplier: Vec<Complex64>,
    /// d(1), d(2), ….
    pub additive: Vec<Complex64>,
    /// Declared bound on Σ_{n beyond the list} |b(n)|/n.
    pub multiplier_tail: f64,
    /// Declared bound on Σ_{n beyond the list} |d(n)|/n.
    pub additive_tail: f64,
    pub order: Option<OrderEstimate>,
}

impl StandardTypeSeries {
    /// The pure Euler product L = L_1.
    pub fn pure(euler: CoefficientSource) -> Self {
        Self {
            euler,
            multiplier: Vec::new(),
            additive: Vec::new(),
            multiplier_tail: 0.0,
            additive_tail: 0.0,
            order: None,
        }
    }

    /// Adds multiplier and additive parts after checking their majorants.
    pub fn with_perturbations(
        mut self,
        multiplier: Vec<Complex64>,
        multiplier_tail: f64,
        additive: Vec<Complex64>,
        additive_tail: f64,
    ) -> Result<Self> {
        let finite = |v: &[Complex64]| v.iter().all(|z| z.re.is_finite() && z.im.is_finite());
        if !finite(&multiplier) || !finite(&additive) {
            return Err(Error::InvalidInput("perturbation coefficients must be finite".into()));
        }
        for tail in [multiplier_tail, additive_tail] {
            if !(tail.is_finite() && tail >= 0.0) {
                return Err(Error::InvalidInput(format!("declared tail bound {tail} is not a finite non-negative number")));
            }
        }
        self.multiplier = multiplier;
        self.multiplier_tail = multiplier_tail;
        self.additive = additive;
        self.additive_tail = additive_tail;
        Ok(self)
    }

    pub fn is_pure(&self) -> bool {
        self.multiplier.iter().all(|b| *b == Complex64::new(0.0, 0.0))
            && self.additive.iter().all(|d| *d == Complex64::new(0.0, 0.0))
            && self.multiplier_tail == 0.0
            && self.additive_tail == 0.0
    }

    /// Σ|b(n)|/n over the stored list plus the declared tail.
    pub fn multiplier_majorant(&self) -> f64 {
        self.multiplier
            .iter()
            .enumerate()
            .map(|(i, b)| b.norm() / (i + 2) as f64)
            .sum::<f64>()
            + self.multiplier_tail
    }

    /// Σ|d(n)|/n over the stored list plus the declared tail.
    pub fn additive_majorant(&self) -> f64 {
        self.additive
            .iter()
            .enumerate()
            .map(|(i, d)| d.norm() / (i + 1) as f64)
            .sum::<f64>()
            + self.additive_tail
    }

    /// L_2(s) with the declared tail as radius (valid for Re(s) ≥ 1).
    pub fn multiplier_at(&self, s: Complex64) -> Bounded {
        let mut acc = ComplexSum::new();
        acc.add(Complex64::new(1.0, 0.0));
        for (i, b) in self.multiplier.iter().enumerate() {
            acc.add(*b * p_pow_neg(i as u64 + 2, s));
        }
        Bounded {
            value: acc.value(),
            radius: self.multiplier_tail,
        }
    }

    /// L_3(s) with the declared tail as radius (valid for Re(s) ≥ 1).
    pub fn additive_at(&self, s: Complex64) -> Bounded {
        let mut acc = ComplexSum::new();
        for (i, d) in self.additive.iter().enumerate() {
            acc.add(*d * p_pow_neg(i as u64 + 1, s));
        }
        Bounded {
            value: acc.value(),
            radius: self.additive_tail,
        }
    }
}

/// Direct summation of `L(s)` with a certified tail radius.
///
/// The Euler part is summed over n ≤ `cutoff`; the discarded tail is bounded
/// by `majorant · cutoff^{1-σ}/(σ-1)`.
pub fn evaluate_dirichlet(
    series: &StandardTypeSeries,
    s: Complex64,
    cutoff: u64,
    margin: f64,
) -> Result<Bounded> {
    if s.re < 1.0 + margin {
        return Err(Error::Divergent {
            re: s.re,
            required: 1.0 + margin,
        });
    }
    if cutoff < 2 {
        return Err(Error::InvalidInput(format!("cutoff must be at least 2, got {cutoff}")));
    }
    let coefficients = series.euler.dirichlet_coefficients(cutoff)?;
    let mut acc = ComplexSum::new();
    for (i, a) in coefficients.iter().enumerate() {
        if *a != Complex64::new(0.0, 0.0) {
            acc.add(*a * p_pow_neg(i as u64 + 1, s));
        }
    }
    let head = acc.value();
    let sigma = s.re;
    let tail = series.euler.majorant()? * (cutoff as f64).powf(1.0 - sigma) / (sigma - 1.0);
    let l2 = series.multiplier_at(s);
    let l3 = series.additive_at(s);
    let value = l2.value * head + l3.value;
    let radius = l2.value.norm() * tail + l2.radius * (head.norm() + tail) + l3.radius;
    Ok(Bounded { value, radius })
}

/// Upper bound for Σ_{n > x} μ n^{-σ} / (1 − μ x^{-σ}), used for the
/// prime tails of log L.
fn log_tail_bound(majorant: f64, x: f64, sigma: f64) -> f64 {
    if majorant == 0.0 {
        return 0.0;
    }
    let lead = majorant * x.powf(-sigma);
    if lead >= 1.0 {
        return f64::INFINITY;
    }
    majorant * x.powf(1.0 - sigma) / (sigma - 1.0) / (1.0 - lead)
}

/// Σ_{p ≤ cutoff} log F_p(s) with a tail estimate.
pub fn log_evaluate_euler(
    sieve: &Sieve,
    source: &CoefficientSource,
    s: Complex64,
    prime_cutoff: u64,
) -> Result<Bounded> {
    if s.re <= 1.0 {
        return Err(Error::Divergent {
            re: s.re,
            required: 1.0,
        });
    }
    let one = Complex64::new(1.0, 0.0);
    let value = sieve.sum_complex(2, prime_cutoff.saturating_add(1), |p| source.local_log(p, s, one))?;
    let x = prime_cutoff.max(1) as f64;
    Ok(Bounded {
        value,
        radius: log_tail_bound(source.majorant()?, x, s.re),
    })
}

/// Σ_{P_lo ≤ p < P_hi} ω(p) c(p) p^{-s}.
pub fn twisted_prime_sum(
    sieve: &Sieve,
    source: &CoefficientSource,
    omega: &UnimodularAssignment,
    s: Complex64,
    lo: u64,
    hi: u64,
) -> Result<Complex64> {
    if s.re < 1.0 {
        return Err(Error::Divergent {
            re: s.re,
            required: 1.0,
        });
    }
    sieve.sum_complex(lo, hi, |p| source.linear_term(p, s, omega.value(p)))
}

/// log E(s, ω) = Σ_p [ω(p) c(p) p^{-s} − log F_p(s, ω)], truncated at
/// `prime_cutoff`, with a bound on the remaining defects.
pub fn euler_tail_log(
    sieve: &Sieve,
    source: &CoefficientSource,
    omega: &UnimodularAssignment,
    s: Complex64,
    prime_cutoff: u64,
) -> Result<Bounded> {
    if s.re < 1.0 {
        return Err(Error::Divergent {
            re: s.re,
            required: 1.0,
        });
    }
    let value = sieve.sum_complex(2, prime_cutoff.saturating_add(1), |p| {
        source.local_defect(p, s, omega.value(p))
    })?;
    let mu = source.majorant()?;
    let x = prime_cutoff.max(1) as f64;
    let sigma = s.re;
    let lead = mu * x.powf(-sigma);
    let radius = if mu == 0.0 {
        0.0
    } else if lead >= 1.0 {
        f64::INFINITY
    } else {
        mu * mu * x.powf(1.0 - 2.0 * sigma) / ((2.0 * sigma - 1.0) * 2.0 * (1.0 - lead))
    };
    Ok(Bounded { value, radius })
}

/// Moment sums of one evidence band.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BandEvidence {
    pub lower: u64,
    pub upper: u64,
    pub exponent: f64,
    pub first_moment: f64,
    pub fourth_moment: f64,
}

/// Empirical order (λ, Λ) of a source on finitely many bands.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrderEstimate {
    pub lambda: f64,
    pub big_lambda: f64,
    pub evidence: Vec<BandEvidence>,
    /// Σ_{p ≤ cutoff} Σ_{2 ≤ k ≤ K} |c(p^k)| k log p / p^k.
    pub prime_power_tail: f64,
    pub prime_power_cutoff: u64,
    /// All band moments vanish.
    pub degenerate: bool,
}

/// Default prime cutoff for the prime-power tail.
pub const DEFAULT_POWER_TAIL_CUTOFF: u64 = 100_000;

/// Estimates (λ, Λ) from the first and fourth moments over `bands`.
pub fn estimate_order(
    sieve: &Sieve,
    source: &CoefficientSource,
    bands: &[PrimeBand],
    power_tail_cutoff: u64,
) -> Result<OrderEstimate> {
    if bands.len() < 2 {
        return Err(Error::InvalidInput("order estimation needs at least two bands".into()));
    }
    for (i, a) in bands.iter().enumerate() {
        if a.is_empty() {
            return Err(Error::InvalidInput(format!("evidence band {i} is empty")));
        }
        for b in &bands[i + 1..] {
            if !a.is_disjoint(b) {
                return Err(Error::InvalidInput(format!(
                    "evidence bands [{}, {}) and [{}, {}) overlap",
                    a.lower(),
                    a.upper(),
                    b.lower(),
                    b.upper()
                )));
            }
        }
    }
    let mut evidence = Vec::with_capacity(bands.len());
    for band in bands {
        evidence.push(BandEvidence {
            lower: band.lower(),
            upper: band.upper(),
            exponent: band.exponent(),
            first_moment: band_moment_sum(sieve, band, source, 1)?,
            fourth_moment: band_moment_sum(sieve, band, source, 4)?,
        });
    }
    let lambda = evidence
        .iter()
        .zip(bands)
        .map(|(e, b)| e.first_moment / b.log_width())
        .fold(f64::INFINITY, f64::min);
    let big_lambda = evidence
        .iter()
        .zip(bands)
        .map(|(e, b)| e.fourth_moment / b.log_width())
        .fold(0.0, f64::max);
    let prime_power_tail = sieve.sum_real(2, power_tail_cutoff.saturating_add(1), |p| {
        let pf = p as f64;
        let lp = pf.ln();
        let mut acc = 0.0;
        let mut k = 2u32;
        while k <= MAX_POWER_DEPTH && pf.powi(k as i32) <= MAX_PRIME_POWER {
            acc += source.coefficient(p, k)?.norm() * k as f64 * lp / pf.powi(k as i32);
            k += 1;
        }
        Ok(acc)
    })?;
    Ok(OrderEstimate {
        lambda,
        big_lambda,
        evidence,
        prime_power_tail,
        prime_power_cutoff: power_tail_cutoff,
        degenerate: big_lambda == 0.0,
    })
}

/// One band of an orthogonality profile.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrthogonalityBand {
    pub lower: u64,
    pub upper: u64,
    pub exponent: f64,
    pub sum: Complex64,
    pub magnitude: f64,
    /// End of the exactly sieved part (the band end unless it passes the
    /// sieve ceiling).
    pub sieved_upper: u64,
    /// Error radius of the density-integral continuation above the ceiling.
    pub continuation_radius: f64,
}

/// Band sums Σ a(p) conj(b(p)) / p with a trend summary.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrthogonalityProfile {
    pub bands: Vec<OrthogonalityBand>,
    /// Magnitude of each band relative to the first.
    pub ratios_to_first: Vec<f64>,
    /// Whether magnitudes never increase from band to band.
    pub non_increasing: bool,
}

/// Relative shift θ with a(p) conj(b(p)) = p^{-iθ}, when both sources are
/// shifted zetas.
fn smooth_shift(a: &CoefficientSource, b: &CoefficientSource) -> Option<f64> {
    let shift = |s: &CoefficientSource| match s {
        CoefficientSource::Zeta => Some(0.0),
        CoefficientSource::ShiftedZeta { shift } => Some(*shift),
        _ => None,
    };
    Some(shift(a)? - shift(b)?)
}

/// Explicit bound |π(x) − li(x)| ≤ 0.2795 x (log x)^{-3/4} exp(−√(log x / 6.455)),
/// valid for x ≥ 229.
fn pnt_error(x: f64) -> f64 {
    let l = x.ln();
    0.2795 * x / l.powf(0.75) * (-(l / 6.455).sqrt()).exp()
}

/// Σ_{x ≤ p < y} p^{-1-iθ} through the prime-number-theorem density
/// ∫ u^{-1} e^{-iθu} du (u = log t), with the error radius obtained from
/// [`pnt_error`] by partial summation.
fn density_continuation(theta: f64, x: f64, y: f64) -> (Complex64, f64) {
    let (a, b) = (x.ln(), y.ln());
    let steps = 20_000usize;
    let h = (b - a) / steps as f64;
    let mut acc = ComplexSum::new();
    let mut err = 0.0;
    let slope = (1.0 + theta * theta).sqrt();
    for i in 0..=steps {
        let u = a + h * i as f64;
        let w = if i == 0 || i == steps {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        acc.add(Complex64::from_polar(w / u, -theta * u));
        err += w * slope * (-u).exp() * pnt_error(u.exp());
    }
    let value = acc.value() * (h / 3.0);
    let radius = pnt_error(x) / x + pnt_error(y) / y + err * h / 3.0;
    (value, radius)
}

/// Per-band sums Σ_{N ≤ p < N^{1+ξ}} a(p) conj(b(p)) / p.
///
/// Bands reaching past the sieve ceiling are continued above it with the
/// prime-number-theorem density, which is only available for pairs of
/// (shifted) zeta sources; other sources report the range error.
pub fn estimate_orthogonality(
    sieve: &Sieve,
    a: &CoefficientSource,
    b: &CoefficientSource,
    bands: &[PrimeBand],
) -> Result<OrthogonalityProfile> {
    if bands.len() < 2 {
        return Err(Error::InvalidInput("orthogonality needs at least two bands".into()));
    }
    if bands.windows(2).any(|w| w[1].lower() <= w[0].lower()) {
        return Err(Error::InvalidInput("band lower endpoints must increase".into()));
    }
    let mut out = Vec::with_capacity(bands.len());
    for band in bands {
        let sieved_upper = band.upper().min(sieve.ceiling());
        let mut sum = if band.is_empty() {
            Complex64::new(0.0, 0.0)
        } else {
            sieve.sum_complex(band.lower(), sieved_upper, |p| {
                Ok(a.prime_coefficient(p)? * b.prime_coefficient(p)?.conj() / p as f64)
            })?
        };
        let mut continuation_radius = 0.0;
        if sieved_upper < band.upper() {
            let theta = smooth_shift(a, b).ok_or(Error::RangeTooLarge {
                hi: band.upper(),
                ceiling: sieve.ceiling(),
            })?;
            let (v, r) = density_continuation(theta, sieved_upper as f64, band.upper() as f64);
            sum += v;
            continuation_radius = r;
        }
        out.push(OrthogonalityBand {
            lower: band.lower(),
            upper: band.upper(),
            exponent: band.exponent(),
            sum,
            magnitude: sum.norm(),
            sieved_upper,
            continuation_radius,
        });
    }
    let first = out[0].magnitude;
    let ratios_to_first = out
        .iter()
        .map(|b| if first > 0.0 { b.magnitude / first } else { 0.0 })
        .collect();
    let non_increasing = out.windows(2).all(|w| w[1].magnitude <= w[0].magnitude);
    Ok(OrthogonalityProfile {
        bands: out,
        ratios_to_first,
        non_increasing,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn mod4() -> CoefficientSource {
        CoefficientSource::Character(
            DirichletCharacter::from_table(4, vec![c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(-1.0, 0.0)])
                .unwrap(),
        )
    }

    #[test]
    fn coefficient_examples() {
        assert_eq!(CoefficientSource::Zeta.coefficient(7, 3).unwrap(), c(1.0, 0.0));
        let shifted = CoefficientSource::ShiftedZeta { shift: 1.0 };
        let v = shifted.coefficient(2, 1).unwrap();
        assert!((v - Complex64::from_polar(1.0, -(2f64).ln())).norm() < 1e-15);
        assert_eq!(mod4().coefficient(3, 1).unwrap(), c(-1.0, 0.0));
    }

    #[test]
    fn constant_series_is_exactly_one() {
        let series = StandardTypeSeries::pure(CoefficientSource::zero());
        let v = evaluate_dirichlet(&series, c(2.0, 0.0), 1000, DEFAULT_MARGIN).unwrap();
        assert_eq!(v.value, c(1.0, 0.0));
        assert_eq!(v.radius, 0.0);
    }

    #[test]
    fn divergent_near_one() {
        let series = StandardTypeSeries::pure(CoefficientSource::Zeta);
        assert!(matches!(
            evaluate_dirichlet(&series, c(1.0, 0.0), 1000, DEFAULT_MARGIN),
            Err(Error::Divergent { .. })
        ));
    }

    #[test]
    fn local_log_small_argument() {
        let z = c(1e-9, -2e-9);
        let exact = z + z * z / 2.0 + z * z * z / 3.0;
        assert!((neg_log_one_minus(z) - exact).norm() < 1e-25);
    }

    #[test]
    fn table_parse_errors_carry_line_numbers() {
        let text = "# header\n2 1 0.5 0\n3 1 0.1 0\n2 1 0.2 0\n";
        let err = CoefficientTable::parse(text, "t.txt", PowerRule::CompletelyMultiplicative, None).unwrap_err();
        match err {
            Error::CoefficientParse { line, .. } => assert_eq!(line, 4),
            other => panic!("unexpected {other:?}"),
        }
        let err = CoefficientTable::parse("4 1 0 0\n", "t.txt", PowerRule::Table, None).unwrap_err();
        assert!(matches!(err, Error::CoefficientParse { line: 1, .. }));
        let err = CoefficientTable::parse("2 1 2.5 0\n", "t.txt", PowerRule::Table, None).unwrap_err();
        assert!(matches!(err, Error::CoefficientParse { line: 1, .. }));
    }

    #[test]
    fn table_source_lookup() {
        let text = "2 1 0.5 0\n2 2 0.25 0\n3 1 -1 0\n";
        let t = CoefficientTable::parse(text, "t.txt", PowerRule::Table, Some(1.0)).unwrap();
        let src = CoefficientSource::Table(Arc::new(t));
        assert_eq!(src.coefficient(2, 2).unwrap(), c(0.25, 0.0));
        assert_eq!(src.coefficient(2, 3).unwrap(), c(0.0, 0.0));
        assert!(matches!(src.coefficient(5, 1), Err(Error::MissingCoefficient { p: 5, k: 1 })));
        let a = src.dirichlet_coefficients(4).unwrap();
        assert_eq!(a, vec![c(1.0, 0.0), c(0.5, 0.0), c(-1.0, 0.0), c(0.25, 0.0)]);
        assert!(src.dirichlet_coefficients(5).is_err());
    }

    #[test]
    fn character_table_validation() {
        assert!(DirichletCharacter::from_table(3, vec![c(0.0, 0.0), c(1.0, 0.0)]).is_err());
        assert!(DirichletCharacter::from_table(2, vec![c(0.0, 0.0), c(0.5, 0.0)]).is_err());
    }
}
