//! One-dimensional commutative formal group laws and their n-series.
//!
//! The Honda and integral Morava laws are built over `Q[v, v^-1]` (from a
//! p-typical logarithm, resp. by the Lubin-Tate recursion), checked to be
//! p-integral, and only then reduced to their finite target rings.

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, Mutex, OnceLock};

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ring::{is_prime, Elem, Ring, RingDescriptor, RingElement};
use crate::series::{mul_components_into, BivariateSeries, GradedSeries, TrivariateSeries};

/// Default precision `K` for the truncated p-adic coefficients.
pub const DEFAULT_PADIC_PRECISION: u32 = 8;

/// Named formal group laws reachable from the command line.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum FglSpec {
    /// `x + y` over an ungraded base.
    Additive { ring: RingDescriptor },
    /// `x + y + b xy`; `b = 1` on an ungraded base, else `b` is the degree 2
    /// Laurent generator.
    Multiplicative { ring: RingDescriptor },
    /// Honda law of height `n` over `F_p[v, v^-1]`.
    Honda { p: u64, n: u32 },
    /// Lubin-Tate law with `[-p](u) = -pu + v u^(p^n)` over `Z/p^K[v, v^-1]`.
    IntegralMorava {
        p: u64,
        n: u32,
        #[serde(rename = "K")]
        precision: u32,
    },
}

fn parse_num<T: std::str::FromStr>(s: &str, name: &str) -> Result<T> {
    s.parse().map_err(|_| Error::UnknownFgl(name.to_string()))
}

fn check_prime(p: u64, name: &str) -> Result<()> {
    if is_prime(p) {
        Ok(())
    } else {
        Err(Error::UnknownFgl(format!("{name}: {p} is not prime")))
    }
}

impl FglSpec {
    /// Parse names such as `additive`, `hq`, `hfp:3`, `ku`, `ku:2:3`,
    /// `honda:2:1`, `integral-morava:2:1:8`. A missing `K` falls back to
    /// `default_precision`.
    pub fn parse(name: &str, default_precision: u32) -> Result<FglSpec> {
        let parts: Vec<&str> = name.trim().split(':').collect();
        let unknown = || Error::UnknownFgl(name.to_string());
        let spec = match parts.as_slice() {
            ["additive"] | ["hz"] => FglSpec::Additive {
                ring: RingDescriptor::Integers,
            },
            ["hq"] => FglSpec::Additive {
                ring: RingDescriptor::Rationals,
            },
            ["hfp", p] => {
                let p: u64 = parse_num(p, name)?;
                check_prime(p, name)?;
                FglSpec::Additive {
                    ring: RingDescriptor::zmod(p),
                }
            }
            ["multiplicative"] => FglSpec::Multiplicative {
                ring: RingDescriptor::Integers,
            },
            ["ku"] => FglSpec::Multiplicative {
                ring: RingDescriptor::laurent(RingDescriptor::Integers, "b", 2),
            },
            ["ku", p, k] => {
                let p: u64 = parse_num(p, name)?;
                let k: u32 = parse_num(k, name)?;
                check_prime(p, name)?;
                if k == 0 {
                    return Err(unknown());
                }
                let n = p
                    .checked_pow(k)
                    .ok_or_else(|| Error::UnknownFgl(format!("{name}: modulus too large")))?;
                FglSpec::Multiplicative {
                    ring: RingDescriptor::laurent(RingDescriptor::zmod(n), "b", 2),
                }
            }
            ["honda", p, n] => {
                let p: u64 = parse_num(p, name)?;
                let n: u32 = parse_num(n, name)?;
                check_prime(p, name)?;
                if n == 0 {
                    return Err(unknown());
                }
                FglSpec::Honda { p, n }
            }
            ["integral-morava", p, n, rest @ ..] if rest.len() <= 1 => {
                let p: u64 = parse_num(p, name)?;
                let n: u32 = parse_num(n, name)?;
                let precision = match rest {
                    [k] => parse_num(k, name)?,
                    _ => default_precision,
                };
                check_prime(p, name)?;
                if n == 0 || precision == 0 {
                    return Err(unknown());
                }
                FglSpec::IntegralMorava { p, n, precision }
            }
            _ => return Err(unknown()),
        };
        Ok(spec)
    }

    /// Canonical name; parses back to the same spec.
    pub fn name(&self) -> String {
        match self {
            FglSpec::Additive { ring } => match ring {
                RingDescriptor::Integers => "hz".to_string(),
                RingDescriptor::Rationals => "hq".to_string(),
                RingDescriptor::IntegersMod { n } => format!("hfp:{n}"),
                other => format!("additive over {other}"),
            },
            FglSpec::Multiplicative { ring } => match ring {
                RingDescriptor::Integers => "multiplicative".to_string(),
                RingDescriptor::Laurent { base, .. } => match base.as_ref() {
                    RingDescriptor::Integers => "ku".to_string(),
                    RingDescriptor::IntegersMod { n } => {
                        let (p, k) = crate::ring::factor(*n)[0];
                        format!("ku:{p}:{k}")
                    }
                    other => format!("multiplicative over {other}"),
                },
                other => format!("multiplicative over {other}"),
            },
            FglSpec::Honda { p, n } => format!("honda:{p}:{n}"),
            FglSpec::IntegralMorava { p, n, precision } => {
                format!("integral-morava:{p}:{n}:{precision}")
            }
        }
    }

    /// Coefficient ring of the law.
    pub fn ring_descriptor(&self) -> RingDescriptor {
        match self {
            FglSpec::Additive { ring } | FglSpec::Multiplicative { ring } => ring.clone(),
            FglSpec::Honda { p, n } => {
                RingDescriptor::laurent(RingDescriptor::zmod(*p), "v", height_degree(*p, *n))
            }
            FglSpec::IntegralMorava { p, n, precision } => RingDescriptor::laurent(
                RingDescriptor::padic(*p, *precision),
                "v",
                height_degree(*p, *n),
            ),
        }
    }

    /// The prime and height of a Honda or integral Morava law.
    pub fn prime_height(&self) -> Option<(u64, u32)> {
        match self {
            FglSpec::Honda { p, n } | FglSpec::IntegralMorava { p, n, .. } => Some((*p, *n)),
            _ => None,
        }
    }

    pub fn build(&self, order: usize) -> Result<FormalGroupLaw> {
        let ring = Ring::new(self.ring_descriptor())?;
        let mut law = match self {
            FglSpec::Additive { .. } => additive_fgl(&ring, order),
            FglSpec::Multiplicative { .. } => {
                let beta = if ring.is_graded() {
                    ring.gen_pow(1)?
                } else {
                    ring.one()
                };
                multiplicative_fgl(&ring, order, Some(&ring.element(beta)))?
            }
            FglSpec::Honda { p, n } => {
                let log = LogData::honda(*p, *n, order)?;
                fgl_from_log(&log, &ring, order)?
            }
            FglSpec::IntegralMorava { p, n, .. } => {
                let rational = catalog().rational_lubin_tate(*p, *n, order)?;
                reduce_law(&rational, &ring, FglDefinition::Spec(self.clone()))?
            }
        };
        law.definition = FglDefinition::Spec(self.clone());
        Ok(law)
    }
}

impl fmt::Display for FglSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

/// `2(p^n - 1)`, the degree of `v_n`.
pub fn height_degree(p: u64, n: u32) -> i64 {
    2 * (p.pow(n) as i64 - 1)
}

/// Defining data of a law, which is what gets serialized.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(untagged)]
pub enum FglDefinition {
    Spec(FglSpec),
    Custom {
        kind: String,
        ring: RingDescriptor,
        #[serde(skip_serializing_if = "Option::is_none")]
        beta: Option<serde_json::Value>,
        #[serde(skip_serializing_if = "Option::is_none")]
        series: Option<serde_json::Value>,
        #[serde(skip_serializing_if = "Option::is_none")]
        pi: Option<i64>,
    },
}

pub struct FormalGroupLaw {
    ring: Ring,
    law: BivariateSeries,
    order: usize,
    definition: FglDefinition,
    n_series_cache: Mutex<HashMap<i64, GradedSeries>>,
    inverse: OnceLock<GradedSeries>,
}

impl fmt::Debug for FormalGroupLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FormalGroupLaw")
            .field("definition", &self.definition)
            .field("order", &self.order)
            .finish()
    }
}

impl Clone for FormalGroupLaw {
    fn clone(&self) -> Self {
        FormalGroupLaw {
            ring: self.ring.clone(),
            law: self.law.clone(),
            order: self.order,
            definition: self.definition.clone(),
            n_series_cache: Mutex::new(self.n_series_cache.lock().expect("cache").clone()),
            inverse: self.inverse.clone(),
        }
    }
}

impl FormalGroupLaw {
    /// Wrap an arbitrary bivariate series without checking any axiom.
    pub fn from_law(law: BivariateSeries, kind: &str) -> FormalGroupLaw {
        let ring = law.ring().clone();
        FormalGroupLaw {
            definition: FglDefinition::Custom {
                kind: kind.to_string(),
                ring: ring.descriptor().clone(),
                beta: None,
                series: None,
                pi: None,
            },
            order: law.order(),
            ring,
            law,
            n_series_cache: Mutex::new(HashMap::new()),
            inverse: OnceLock::new(),
        }
    }

    pub fn ring(&self) -> &Ring {
        &self.ring
    }

    pub fn law(&self) -> &BivariateSeries {
        &self.law
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn definition(&self) -> &FglDefinition {
        &self.definition
    }

    pub fn name(&self) -> String {
        match &self.definition {
            FglDefinition::Spec(s) => s.name(),
            FglDefinition::Custom { kind, .. } => kind.clone(),
        }
    }

    pub fn spec(&self) -> Option<&FglSpec> {
        match &self.definition {
            FglDefinition::Spec(s) => Some(s),
            FglDefinition::Custom { .. } => None,
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "definition": self.definition,
            "N": self.order,
        })
    }

    /// `F(g(u), h(u))`.
    pub fn apply(&self, g: &GradedSeries, h: &GradedSeries) -> Result<GradedSeries> {
        self.law.compose(g, h)
    }

    /// The series `i(u)` with `F(u, i(u)) = 0`.
    pub fn formal_inverse(&self) -> GradedSeries {
        self.inverse.get_or_init(|| self.solve_inverse()).clone()
    }

    fn solve_inverse(&self) -> GradedSeries {
        let r = &self.ring;
        let n = self.order;
        let mut powers = LazyPowers::new(r, n);
        for d in 1..=n {
            let mut acc = Elem::default();
            for a in 0..=d {
                for b in 0..=(d - a) {
                    if (a, b) == (0, 1) {
                        continue;
                    }
                    let c = self.law.coeff_ref(a, b);
                    if c.is_zero() {
                        continue;
                    }
                    let pw = powers.get(b, d - a);
                    if !pw.is_zero() {
                        acc = r.add(&acc, &r.mul(c, &pw));
                    }
                }
            }
            powers.push(r.neg(&acc));
        }
        GradedSeries::from_coeffs(r, n, powers.into_base())
    }

    /// `[n](u)`, the n-fold formal sum of `u`; cached per law.
    pub fn n_series(&self, n: i64) -> Result<GradedSeries> {
        if let Some(s) = self.cached(n) {
            return Ok(s);
        }
        let out = if n < 0 {
            let pos = self.n_series(-n)?;
            pos.substitute(&self.formal_inverse())?
        } else if n == 0 {
            GradedSeries::zero(&self.ring, self.order)
        } else {
            let u = GradedSeries::variable(&self.ring, self.order);
            let start = {
                let cache = self.n_series_cache.lock().expect("cache");
                (1..n).rev().find(|k| cache.contains_key(k)).unwrap_or(0)
            };
            let mut cur = match start {
                0 => u.clone(),
                k => self.cached(k).expect("present"),
            };
            for k in start.max(1) + 1..=n {
                cur = self.apply(&cur, &u)?;
                if k < n && (k as u64).is_power_of_two() {
                    self.store(k, &cur);
                }
            }
            cur
        };
        self.store(n, &out);
        Ok(out)
    }

    fn cached(&self, n: i64) -> Option<GradedSeries> {
        self.n_series_cache.lock().expect("cache").get(&n).cloned()
    }

    fn store(&self, n: i64, s: &GradedSeries) {
        self.n_series_cache
            .lock()
            .expect("cache")
            .entry(n)
            .or_insert_with(|| s.clone());
    }
}

/// `x + y`.
pub fn additive_fgl(ring: &Ring, order: usize) -> FormalGroupLaw {
    let law = BivariateSeries::x(ring, order).add(&BivariateSeries::y(ring, order));
    let mut f = FormalGroupLaw::from_law(law, "additive");
    f.definition = FglDefinition::Spec(FglSpec::Additive {
        ring: ring.descriptor().clone(),
    });
    f
}

/// `x + y + beta xy`, with `beta = 1` by default.
pub fn multiplicative_fgl(
    ring: &Ring,
    order: usize,
    beta: Option<&RingElement>,
) -> Result<FormalGroupLaw> {
    let beta = match beta {
        Some(b) => {
            if &b.ring != ring {
                return Err(Error::RingMismatch {
                    left: ring.to_string(),
                    right: b.ring.to_string(),
                });
            }
            b.value.clone()
        }
        None => ring.one(),
    };
    if !ring.is_unit(&beta) {
        return Err(Error::NonUnitBeta);
    }
    if ring.is_graded() && ring.degree(&beta) != Some(2) {
        return Err(Error::NonUnitBeta);
    }
    let law = BivariateSeries::from_terms(
        ring,
        order,
        &[
            ((1, 0), ring.one()),
            ((0, 1), ring.one()),
            ((1, 1), beta.clone()),
        ],
    );
    let mut f = FormalGroupLaw::from_law(law, "multiplicative");
    f.definition = FglDefinition::Custom {
        kind: "multiplicative".to_string(),
        ring: ring.descriptor().clone(),
        beta: Some(ring.encode(&beta)),
        series: None,
        pi: None,
    };
    Ok(f)
}

/// A p-typical logarithm over `Q[v, v^-1]`: `sum_i v^((p^(ni)-1)/(p^n-1)) u^(p^(ni)) / p^i`.
#[derive(Clone, Debug)]
pub struct LogData {
    pub p: u64,
    pub n: u32,
    pub ring: Ring,
    pub log: GradedSeries,
}

impl LogData {
    pub fn honda(p: u64, n: u32, order: usize) -> Result<LogData> {
        if !is_prime(p) || n == 0 {
            return Err(Error::InvalidArgument(format!("honda log needs a prime and n >= 1, got p={p}, n={n}")));
        }
        let q = p.pow(n);
        let ring = Ring::new(RingDescriptor::laurent(RingDescriptor::Rationals, "v", height_degree(p, n)))?;
        let mut coeffs = vec![Elem::default(); order + 1];
        let mut i = 0u32;
        loop {
            let exp = q.checked_pow(i).filter(|e| *e as usize <= order);
            let Some(exp) = exp else { break };
            let vexp = ((exp - 1) / (q - 1)) as i64;
            let c = BigRational::new(BigInt::one(), BigInt::from(p).pow(i));
            coeffs[exp as usize] = ring.scalar_monomial(&c, vexp)?;
            i += 1;
        }
        let log = GradedSeries::from_coeffs(&ring, order, coeffs);
        Ok(LogData { p, n, ring, log })
    }
}

/// `exp(log x + log y)` over the rationals, checked p-integral and mapped
/// into `target`.
pub fn fgl_from_log(log: &LogData, target: &Ring, order: usize) -> Result<FormalGroupLaw> {
    let q = log.p.pow(log.n) as usize;
    if order < q {
        return Err(Error::PrecisionExhausted(format!(
            "truncation {order} is below p^n = {q}"
        )));
    }
    let rational = catalog().rational_honda(log, order)?;
    reduce_law(
        &rational,
        target,
        FglDefinition::Spec(FglSpec::Honda { p: log.p, n: log.n }),
    )
}

fn law_from_log(log: &LogData, order: usize) -> Result<BivariateSeries> {
    let r = &log.ring;
    let l = log.log.truncate(order);
    let exp = l.compositional_inverse()?;
    let sum = BivariateSeries::in_x(&l).add(&BivariateSeries::in_y(&l));
    // Horner in the exponential: exp(S) = S (e_1 + S (e_2 + ...)).
    let mut acc = BivariateSeries::zero(r, order);
    for k in (1..=order).rev() {
        let mut next = acc.mul(&sum);
        let c = exp.coeff(k);
        let comp0 = next.component(0).to_vec();
        next.set_component(0, vec![r.add(&comp0[0], c)]);
        acc = next;
    }
    let out = acc.mul(&sum);
    Ok(out)
}

/// The Lubin-Tate law for `f = pi u + ...` over a rational Laurent ring,
/// solved one homogeneous degree at a time from `f(F) = F(f(x), f(y))`.
pub fn lubin_tate_law(f: &GradedSeries, pi: i64) -> Result<BivariateSeries> {
    let r = f.ring();
    if !r.is_rational_base() {
        return Err(Error::InvalidArgument("Lubin-Tate recursion runs over a rational base".into()));
    }
    let p = pi.unsigned_abs();
    if !is_prime(p) {
        return Err(Error::InvalidArgument(format!("pi = {pi} is not plus or minus a prime")));
    }
    if !f.coeff(0).is_zero() || f.coeff(1) != &r.int(pi) {
        return Err(Error::InvalidArgument("f must be pi u modulo degree 2".into()));
    }
    let order = f.order();
    let pi_q = BigRational::from_integer(BigInt::from(pi));
    // f^i as coefficient vectors.
    let mut fpow: Vec<Vec<Elem>> = vec![GradedSeries::one(r, order).coeffs().to_vec()];
    for i in 1..=order {
        let next = crate::series::mul_coeffs(r, &fpow[i - 1], f.coeffs(), order);
        fpow.push(next);
    }
    let f_terms: Vec<(usize, Elem)> = f
        .coeffs()
        .iter()
        .enumerate()
        .skip(2)
        .filter(|(_, c)| !c.is_zero())
        .map(|(k, c)| (k, c.clone()))
        .collect();

    let mut law = BivariateSeries::x(r, order).add(&BivariateSeries::y(r, order));
    let mut powers = BivariatePowers::new(r, order);
    powers.push(law.component(1).to_vec());
    for d in 2..=order {
        // [F_{<d}(f(x), f(y))]_d
        let mut rhs = vec![Elem::default(); d + 1];
        for e in 1..d {
            for i in 0..=e {
                let c = law.coeff_ref(i, e - i);
                if c.is_zero() {
                    continue;
                }
                let j = e - i;
                for a in i..=(d - j) {
                    let fa = &fpow[i][a];
                    if fa.is_zero() {
                        continue;
                    }
                    let fb = &fpow[j][d - a];
                    if fb.is_zero() {
                        continue;
                    }
                    rhs[a] = r.add(&rhs[a], &r.mul(c, &r.mul(fa, fb)));
                }
            }
        }
        // [f(F_{<d})]_d without the linear term
        let mut lhs = vec![Elem::default(); d + 1];
        for (k, fk) in &f_terms {
            if *k > d {
                continue;
            }
            let comp = powers.get(*k, d);
            for (a, c) in comp.iter().enumerate() {
                if !c.is_zero() {
                    lhs[a] = r.add(&lhs[a], &r.mul(fk, c));
                }
            }
        }
        let denom = &pi_q - num_traits::pow(pi_q.clone(), d);
        let inv = r.rational(&denom.recip())?;
        let comp: Vec<Elem> = (0..=d)
            .map(|a| r.mul(&r.sub(&rhs[a], &lhs[a]), &inv))
            .collect();
        law.set_component(d, comp.clone());
        powers.push(comp);
    }
    Ok(law)
}

/// Build the Lubin-Tate law of `f` over its rational ring and reduce it to
/// `target` after checking p-integrality.
pub fn lubin_tate_fgl(f: &GradedSeries, pi: &RingElement, target: &Ring) -> Result<FormalGroupLaw> {
    let pi_int = pi
        .ring
        .lift_integer(&pi.value)
        .and_then(|b| i64::try_from(b).ok())
        .ok_or_else(|| Error::InvalidArgument("pi must be an integer".into()))?;
    let rational = lubin_tate_law(f, pi_int)?;
    let mut out = reduce_law(
        &rational,
        target,
        FglDefinition::Custom {
            kind: "lubin-tate".to_string(),
            ring: target.descriptor().clone(),
            beta: None,
            series: Some(f.to_json()),
            pi: Some(pi_int),
        },
    )?;
    out.order = f.order();
    Ok(out)
}

/// Check p-integrality of every coefficient and map into `target`.
fn reduce_law(rational: &BivariateSeries, target: &Ring, definition: FglDefinition) -> Result<FormalGroupLaw> {
    let primes = target.char_primes().to_vec();
    for ((i, j), c) in rational.terms() {
        for (_, q) in c.terms() {
            if primes.iter().any(|p| (q.denom() % BigInt::from(*p)).is_zero()) {
                return Err(Error::NonIntegralCoefficient(format!(
                    "{} at x^{i} y^{j}",
                    rational.ring().format(c)
                )));
            }
        }
    }
    let law = rational.map_ring(target)?;
    let mut out = FormalGroupLaw::from_law(law, "reduced");
    out.definition = definition;
    Ok(out)
}

/// Lazily filled table of coefficients of powers of a univariate series
/// whose coefficients are appended one at a time.
struct LazyPowers {
    ring: Ring,
    base: Vec<Elem>,
    table: Vec<Vec<Option<Elem>>>,
}

impl LazyPowers {
    fn new(ring: &Ring, order: usize) -> LazyPowers {
        LazyPowers {
            ring: ring.clone(),
            base: vec![Elem::default()],
            table: vec![vec![None; order + 1]; order + 1],
        }
    }

    fn push(&mut self, c: Elem) {
        self.base.push(c);
    }

    fn into_base(self) -> Vec<Elem> {
        self.base
    }

    /// Coefficient of `u^e` in `g^b`; needs `g_1 .. g_(e-b+1)` (all of them for `b = 1`).
    fn get(&mut self, b: usize, e: usize) -> Elem {
        if b == 0 {
            return if e == 0 { self.ring.one() } else { Elem::default() };
        }
        if b == 1 {
            return self.base[e].clone();
        }
        if e < b {
            return Elem::default();
        }
        if let Some(v) = &self.table[b][e] {
            return v.clone();
        }
        let mut acc = Elem::default();
        for j in 1..=(e + 1 - b) {
            let g = self.base[j].clone();
            if g.is_zero() {
                continue;
            }
            let rest = self.get(b - 1, e - j);
            if !rest.is_zero() {
                acc = self.ring.add(&acc, &self.ring.mul(&g, &rest));
            }
        }
        self.table[b][e] = Some(acc.clone());
        acc
    }
}

/// Homogeneous components of powers of a bivariate series without constant
/// term, filled as the components of the series become known.
struct BivariatePowers {
    ring: Ring,
    comps: Vec<Vec<Elem>>,
    table: HashMap<(usize, usize), Vec<Elem>>,
}

impl BivariatePowers {
    fn new(ring: &Ring, _order: usize) -> BivariatePowers {
        BivariatePowers {
            ring: ring.clone(),
            comps: vec![vec![Elem::default()]],
            table: HashMap::new(),
        }
    }

    fn push(&mut self, comp: Vec<Elem>) {
        self.comps.push(comp);
    }

    fn get(&mut self, m: usize, e: usize) -> Vec<Elem> {
        if m == 1 {
            return self.comps[e].clone();
        }
        if e < m {
            return vec![Elem::default(); e + 1];
        }
        if let Some(v) = self.table.get(&(m, e)) {
            return v.clone();
        }
        let mut acc = vec![Elem::default(); e + 1];
        for a in 1..=(e + 1 - m) {
            let left = self.comps[a].clone();
            let right = self.get(m - 1, e - a);
            mul_components_into(&self.ring, &left, &right, &mut acc);
        }
        self.table.insert((m, e), acc.clone());
        acc
    }
}

/// Which formal group law axiom fails first.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Axiom {
    Unitality,
    Commutativity,
    Associativity,
    Homogeneity,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum AxiomReport {
    Ok,
    Violated {
        axiom: Axiom,
        /// Exponents of the witness monomial in `x, y` (and `z`).
        monomial: Vec<usize>,
    },
}

impl AxiomReport {
    pub fn is_ok(&self) -> bool {
        matches!(self, AxiomReport::Ok)
    }
}

pub fn fgl_axiom_check(f: &FormalGroupLaw) -> AxiomReport {
    let law = f.law();
    let r = f.ring();
    let n = law.order();
    let violated = |axiom, monomial: Vec<usize>| AxiomReport::Violated { axiom, monomial };
    for i in 0..=n {
        let expected = if i == 1 { r.one() } else { Elem::default() };
        if law.coeff(i, 0) != expected {
            return violated(Axiom::Unitality, vec![i, 0]);
        }
        if law.coeff(0, i) != expected {
            return violated(Axiom::Unitality, vec![0, i]);
        }
    }
    for ((i, j), c) in law.terms() {
        if *c != law.coeff(j, i) {
            return violated(Axiom::Commutativity, vec![i, j]);
        }
    }
    if let Some(w) = associativity_witness(law) {
        return violated(Axiom::Associativity, w.to_vec());
    }
    if r.is_graded() {
        for ((i, j), c) in law.terms() {
            let expected = 2 * (i + j) as i64 - 2;
            if c.terms().iter().any(|(e, _)| e * r.generator_degree().unwrap_or(0) != expected) {
                return violated(Axiom::Homogeneity, vec![i, j]);
            }
        }
    }
    AxiomReport::Ok
}

/// First monomial where `F(F(x,y),z)` and `F(x,F(y,z))` differ.
fn associativity_witness(law: &BivariateSeries) -> Option<[usize; 3]> {
    let r = law.ring();
    let n = law.order();
    let mut powers: Vec<BivariateSeries> = vec![BivariateSeries::from_terms(r, n, &[((0, 0), r.one())])];
    for i in 1..=n {
        let next = powers[i - 1].mul(law);
        powers.push(next);
    }
    let mut left = TrivariateSeries::zero(r, n);
    let mut right = TrivariateSeries::zero(r, n);
    for ((i, j), c) in law.terms() {
        for ((a, b), g) in powers[i].terms() {
            if a + b + j <= n {
                left.add_term([a, b, j], &r.mul(c, g));
            }
        }
        for ((a, b), g) in powers[j].terms() {
            if i + a + b <= n {
                right.add_term([i, a, b], &r.mul(c, g));
            }
        }
    }
    left.first_difference(&right)
}

/// Session-wide cache of constructed laws, keyed by name and truncation.
pub struct Catalog {
    laws: Mutex<HashMap<(FglSpec, usize), Arc<FormalGroupLaw>>>,
    rational: Mutex<HashMap<(String, u64, u32, usize), Arc<BivariateSeries>>>,
}

pub fn catalog() -> &'static Catalog {
    static CATALOG: OnceLock<Catalog> = OnceLock::new();
    CATALOG.get_or_init(|| Catalog {
        laws: Mutex::new(HashMap::new()),
        rational: Mutex::new(HashMap::new()),
    })
}

impl Catalog {
    pub fn get(&self, spec: &FglSpec, order: usize) -> Result<Arc<FormalGroupLaw>> {
        let key = (spec.clone(), order);
        if let Some(f) = self.laws.lock().expect("catalog").get(&key) {
            return Ok(f.clone());
        }
        let built = Arc::new(spec.build(order)?);
        let mut laws = self.laws.lock().expect("catalog");
        Ok(laws.entry(key).or_insert(built).clone())
    }

    pub fn by_name(&self, name: &str, order: usize, default_precision: u32) -> Result<Arc<FormalGroupLaw>> {
        self.get(&FglSpec::parse(name, default_precision)?, order)
    }

    fn rational(
        &self,
        key: (String, u64, u32, usize),
        build: impl FnOnce() -> Result<BivariateSeries>,
    ) -> Result<Arc<BivariateSeries>> {
        if let Some(f) = self.rational.lock().expect("catalog").get(&key) {
            return Ok(f.clone());
        }
        let built = Arc::new(build()?);
        let mut map = self.rational.lock().expect("catalog");
        Ok(map.entry(key).or_insert(built).clone())
    }

    fn rational_honda(&self, log: &LogData, order: usize) -> Result<Arc<BivariateSeries>> {
        self.rational(("honda".into(), log.p, log.n, order), || law_from_log(log, order))
    }

    /// The rational Lubin-Tate law with `[-p](u) = -pu + v u^(p^n)`.
    pub fn rational_lubin_tate(&self, p: u64, n: u32, order: usize) -> Result<Arc<BivariateSeries>> {
        let q = p.pow(n) as usize;
        if order < q {
            return Err(Error::PrecisionExhausted(format!(
                "truncation {order} is below p^n = {q}"
            )));
        }
        self.rational(("lubin-tate".into(), p, n, order), || {
            let f = morava_endomorphism(p, n, order)?;
            lubin_tate_law(&f, -(p as i64))
        })
    }
}

/// `-pu + v u^(p^n)` over `Q[v, v^-1]`.
pub fn morava_endomorphism(p: u64, n: u32, order: usize) -> Result<GradedSeries> {
    let ring = Ring::new(RingDescriptor::laurent(RingDescriptor::Rationals, "v", height_degree(p, n)))?;
    let q = p.pow(n) as usize;
    let mut coeffs = vec![Elem::default(); order + 1];
    coeffs[1] = ring.int(-(p as i64));
    if q <= order {
        coeffs[q] = ring.gen_pow(1)?;
    }
    Ok(GradedSeries::from_coeffs(&ring, order, coeffs))
}

/// True when `k` is prime to `p`.
pub fn coprime(k: i64, p: u64) -> bool {
    BigInt::from(k).gcd(&BigInt::from(p)).is_one()
}
