//! Graded coefficient rings `R*` and exact arithmetic in them.
//!
//! Every ring in scope is one of `Z`, `Q`, `Z/n`, a truncated p-adic ring
//! `Z/p^K` standing in for `Z_p`, or a Laurent extension `B[g, g^-1]` of one
//! of those by a single generator of nonzero even degree.
//!
//! Elements ([`Elem`]) are plain values; the arithmetic lives on the [`Ring`]
//! handle, which knows how to canonicalize residues. [`RingElement`] pairs a
//! value with its ring for the checked, mismatch-detecting API.

use std::fmt;
use std::sync::Arc;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default bound on `|exponent|` of the Laurent generator.
pub const DEFAULT_EXPONENT_WINDOW: i64 = 64;

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum RingDescriptor {
    #[serde(rename = "integers")]
    Integers,
    #[serde(rename = "rationals")]
    Rationals,
    #[serde(rename = "zmod")]
    IntegersMod { n: u64 },
    /// `Z/p^K` as a finite-precision model of `Z_p`.
    #[serde(rename = "padic")]
    PAdicTruncated {
        p: u64,
        #[serde(rename = "K")]
        precision: u32,
    },
    #[serde(rename = "laurent")]
    Laurent {
        base: Box<RingDescriptor>,
        gen: String,
        deg: i64,
    },
}

impl RingDescriptor {
    pub fn zmod(n: u64) -> Self {
        RingDescriptor::IntegersMod { n }
    }

    pub fn padic(p: u64, precision: u32) -> Self {
        RingDescriptor::PAdicTruncated { p, precision }
    }

    pub fn laurent(base: RingDescriptor, gen: &str, deg: i64) -> Self {
        RingDescriptor::Laurent {
            base: Box::new(base),
            gen: gen.to_string(),
            deg,
        }
    }

    /// The coefficient ring under the Laurent generator (or `self`).
    pub fn base(&self) -> &RingDescriptor {
        match self {
            RingDescriptor::Laurent { base, .. } => base,
            other => other,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            RingDescriptor::Integers | RingDescriptor::Rationals => Ok(()),
            RingDescriptor::IntegersMod { n } => {
                if *n < 2 {
                    return Err(Error::InvalidDescriptor(format!("modulus {n} < 2")));
                }
                Ok(())
            }
            RingDescriptor::PAdicTruncated { p, precision } => {
                if !is_prime(*p) {
                    return Err(Error::InvalidDescriptor(format!("{p} is not prime")));
                }
                if *precision == 0 {
                    return Err(Error::InvalidDescriptor("p-adic precision must be >= 1".into()));
                }
                Ok(())
            }
            RingDescriptor::Laurent { base, gen, deg } => {
                if matches!(**base, RingDescriptor::Laurent { .. }) {
                    return Err(Error::InvalidDescriptor("nested Laurent extension".into()));
                }
                if gen.is_empty() {
                    return Err(Error::InvalidDescriptor("empty generator symbol".into()));
                }
                if *deg == 0 || deg % 2 != 0 {
                    return Err(Error::InvalidDescriptor(format!(
                        "generator degree {deg} must be even and nonzero"
                    )));
                }
                base.validate()
            }
        }
    }
}

impl fmt::Display for RingDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RingDescriptor::Integers => write!(f, "Z"),
            RingDescriptor::Rationals => write!(f, "Q"),
            RingDescriptor::IntegersMod { n } => write!(f, "Z/{n}"),
            RingDescriptor::PAdicTruncated { p, precision } => write!(f, "Z_{p} mod {p}^{precision}"),
            RingDescriptor::Laurent { base, gen, .. } => write!(f, "({base})[{gen},{gen}^-1]"),
        }
    }
}

#[derive(Clone, Debug)]
enum Base {
    Integers,
    Rationals,
    Modular { modulus: BigInt, primes: Vec<u64> },
}

#[derive(Clone, Debug)]
struct Generator {
    symbol: String,
    degree: i64,
}

#[derive(Debug)]
struct RingInner {
    desc: RingDescriptor,
    base: Base,
    generator: Option<Generator>,
    window: i64,
}

/// Handle to a constructed coefficient ring. Cheap to clone.
#[derive(Clone, Debug)]
pub struct Ring {
    inner: Arc<RingInner>,
}

impl PartialEq for Ring {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.inner, &other.inner)
            || (self.inner.desc == other.inner.desc && self.inner.window == other.inner.window)
    }
}

impl Eq for Ring {}

impl fmt::Display for Ring {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.inner.desc.fmt(f)
    }
}

/// A ring element as a finite sorted list of `(generator exponent, coefficient)`.
///
/// Base-ring elements only ever use exponent 0. Coefficients are canonical
/// (`0 <= r < n` for residues, integral for `Z`) and never zero.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct Elem {
    terms: Vec<(i64, BigRational)>,
}

impl Elem {
    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> &[(i64, BigRational)] {
        &self.terms
    }

    /// Coefficient at generator exponent `e` (zero if absent).
    pub fn coefficient(&self, e: i64) -> BigRational {
        self.terms
            .iter()
            .find(|(x, _)| *x == e)
            .map(|(_, c)| c.clone())
            .unwrap_or_else(BigRational::zero)
    }

    pub fn is_monomial(&self) -> bool {
        self.terms.len() == 1
    }
}

pub fn construct_ring(descriptor: RingDescriptor) -> Result<Ring> {
    Ring::new(descriptor)
}

impl Ring {
    pub fn new(desc: RingDescriptor) -> Result<Ring> {
        Ring::with_window(desc, DEFAULT_EXPONENT_WINDOW)
    }

    pub fn with_window(desc: RingDescriptor, window: i64) -> Result<Ring> {
        desc.validate()?;
        let base = match desc.base() {
            RingDescriptor::Integers => Base::Integers,
            RingDescriptor::Rationals => Base::Rationals,
            RingDescriptor::IntegersMod { n } => Base::Modular {
                modulus: BigInt::from(*n),
                primes: factor(*n).into_iter().map(|(p, _)| p).collect(),
            },
            RingDescriptor::PAdicTruncated { p, precision } => Base::Modular {
                modulus: BigInt::from(*p).pow(*precision),
                primes: vec![*p],
            },
            RingDescriptor::Laurent { .. } => unreachable!("validated"),
        };
        let generator = match &desc {
            RingDescriptor::Laurent { gen, deg, .. } => Some(Generator {
                symbol: gen.clone(),
                degree: *deg,
            }),
            _ => None,
        };
        Ok(Ring {
            inner: Arc::new(RingInner {
                desc,
                base,
                generator,
                window,
            }),
        })
    }

    pub fn integers() -> Ring {
        Ring::new(RingDescriptor::Integers).expect("valid")
    }

    pub fn rationals() -> Ring {
        Ring::new(RingDescriptor::Rationals).expect("valid")
    }

    pub fn descriptor(&self) -> &RingDescriptor {
        &self.inner.desc
    }

    pub fn window(&self) -> i64 {
        self.inner.window
    }

    pub fn is_graded(&self) -> bool {
        self.inner.generator.is_some()
    }

    pub fn generator_degree(&self) -> Option<i64> {
        self.inner.generator.as_ref().map(|g| g.degree)
    }

    pub fn generator_symbol(&self) -> Option<&str> {
        self.inner.generator.as_ref().map(|g| g.symbol.as_str())
    }

    /// The ring without its Laurent generator.
    pub fn base_ring(&self) -> Ring {
        if self.is_graded() {
            Ring::with_window(self.inner.desc.base().clone(), self.inner.window).expect("valid")
        } else {
            self.clone()
        }
    }

    /// Characteristic of the base: 0 for `Z` and `Q`, the modulus otherwise.
    pub fn characteristic(&self) -> BigInt {
        match &self.inner.base {
            Base::Modular { modulus, .. } => modulus.clone(),
            _ => BigInt::zero(),
        }
    }

    /// The primes dividing the characteristic (empty for `Z`, `Q`).
    pub fn char_primes(&self) -> &[u64] {
        match &self.inner.base {
            Base::Modular { primes, .. } => primes,
            _ => &[],
        }
    }

    pub fn is_rational_base(&self) -> bool {
        matches!(self.inner.base, Base::Rationals)
    }

    pub fn is_integer_base(&self) -> bool {
        matches!(self.inner.base, Base::Integers)
    }

    fn reduce(&self, c: BigRational) -> BigRational {
        match &self.inner.base {
            Base::Rationals => c,
            Base::Integers => {
                debug_assert!(c.is_integer(), "non-integral value in Z");
                c
            }
            Base::Modular { modulus, .. } => {
                if c.is_integer() {
                    BigRational::from_integer(c.numer().mod_floor(modulus))
                } else {
                    let inv = mod_inverse(c.denom(), modulus).expect("denominator invertible");
                    BigRational::from_integer((c.numer() * inv).mod_floor(modulus))
                }
            }
        }
    }

    fn from_terms(&self, mut terms: Vec<(i64, BigRational)>) -> Elem {
        terms.sort_by_key(|(e, _)| *e);
        let mut out: Vec<(i64, BigRational)> = Vec::with_capacity(terms.len());
        for (e, c) in terms {
            match out.last_mut() {
                Some((le, lc)) if *le == e => *lc += c,
                _ => out.push((e, c)),
            }
        }
        let terms = out
            .into_iter()
            .map(|(e, c)| (e, self.reduce(c)))
            .filter(|(_, c)| !c.is_zero())
            .collect();
        Elem { terms }
    }

    pub fn zero(&self) -> Elem {
        Elem::default()
    }

    pub fn one(&self) -> Elem {
        self.int(1)
    }

    pub fn int(&self, n: i64) -> Elem {
        self.integer(&BigInt::from(n))
    }

    pub fn integer(&self, n: &BigInt) -> Elem {
        self.from_terms(vec![(0, BigRational::from_integer(n.clone()))])
    }

    /// A rational scalar; fails when the denominator has no inverse here.
    pub fn rational(&self, q: &BigRational) -> Result<Elem> {
        self.scalar_monomial(q, 0)
    }

    /// `c * g^e`, where `g` is the Laurent generator (`e` must be 0 when ungraded).
    pub fn scalar_monomial(&self, c: &BigRational, e: i64) -> Result<Elem> {
        if e != 0 && !self.is_graded() {
            return Err(Error::InvalidArgument(format!("{self} has no Laurent generator")));
        }
        match &self.inner.base {
            Base::Integers if !c.is_integer() => {
                return Err(Error::NonIntegralElement(c.to_string()));
            }
            Base::Modular { modulus, .. } if !c.is_integer() && !c.denom().gcd(modulus).is_one() => {
                return Err(Error::NonIntegralElement(c.to_string()));
            }
            _ => {}
        }
        let elem = self.from_terms(vec![(e, c.clone())]);
        self.check_window(&elem)?;
        Ok(elem)
    }

    pub fn gen_pow(&self, e: i64) -> Result<Elem> {
        self.scalar_monomial(&BigRational::one(), e)
    }

    pub fn add(&self, a: &Elem, b: &Elem) -> Elem {
        if a.is_zero() {
            return b.clone();
        }
        if b.is_zero() {
            return a.clone();
        }
        let mut out = Vec::with_capacity(a.terms.len() + b.terms.len());
        let (mut i, mut j) = (0, 0);
        while i < a.terms.len() || j < b.terms.len() {
            let take_a = j >= b.terms.len() || (i < a.terms.len() && a.terms[i].0 < b.terms[j].0);
            let take_b = i >= a.terms.len() || (j < b.terms.len() && b.terms[j].0 < a.terms[i].0);
            if take_a {
                out.push(a.terms[i].clone());
                i += 1;
            } else if take_b {
                out.push(b.terms[j].clone());
                j += 1;
            } else {
                let c = self.reduce(&a.terms[i].1 + &b.terms[j].1);
                if !c.is_zero() {
                    out.push((a.terms[i].0, c));
                }
                i += 1;
                j += 1;
            }
        }
        Elem { terms: out }
    }

    pub fn neg(&self, a: &Elem) -> Elem {
        Elem {
            terms: a
                .terms
                .iter()
                .map(|(e, c)| (*e, self.reduce(-c)))
                .collect(),
        }
    }

    pub fn sub(&self, a: &Elem, b: &Elem) -> Elem {
        self.add(a, &self.neg(b))
    }

    pub fn mul(&self, a: &Elem, b: &Elem) -> Elem {
        if a.is_zero() || b.is_zero() {
            return Elem::default();
        }
        if a.terms.len() == 1 && b.terms.len() == 1 {
            let c = self.reduce(&a.terms[0].1 * &b.terms[0].1);
            if c.is_zero() {
                return Elem::default();
            }
            return Elem {
                terms: vec![(a.terms[0].0 + b.terms[0].0, c)],
            };
        }
        let mut terms = Vec::with_capacity(a.terms.len() * b.terms.len());
        for (ea, ca) in &a.terms {
            for (eb, cb) in &b.terms {
                terms.push((ea + eb, ca * cb));
            }
        }
        self.from_terms(terms)
    }

    /// Multiply by an integer.
    pub fn scale(&self, a: &Elem, k: &BigInt) -> Elem {
        if k.is_zero() {
            return Elem::default();
        }
        let factor = BigRational::from_integer(k.clone());
        Elem {
            terms: a
                .terms
                .iter()
                .map(|(e, c)| (*e, self.reduce(c * &factor)))
                .filter(|(_, c)| !c.is_zero())
                .collect(),
        }
    }

    pub fn pow(&self, a: &Elem, mut k: u32) -> Elem {
        let mut base = a.clone();
        let mut acc = self.one();
        while k > 0 {
            if k & 1 == 1 {
                acc = self.mul(&acc, &base);
            }
            k >>= 1;
            if k > 0 {
                base = self.mul(&base, &base);
            }
        }
        acc
    }

    pub fn is_one(&self, a: &Elem) -> bool {
        a.terms.len() == 1 && a.terms[0].0 == 0 && a.terms[0].1.is_one()
    }

    fn scalar_is_unit(&self, c: &BigRational) -> bool {
        match &self.inner.base {
            Base::Rationals => !c.is_zero(),
            Base::Integers => c.abs().is_one(),
            Base::Modular { modulus, .. } => c.numer().gcd(modulus).is_one(),
        }
    }

    fn scalar_is_nilpotent(&self, c: &BigRational) -> bool {
        match &self.inner.base {
            Base::Rationals | Base::Integers => c.is_zero(),
            Base::Modular { primes, .. } => primes
                .iter()
                .all(|q| (c.numer() % BigInt::from(*q)).is_zero()),
        }
    }

    /// Whether `a` has a multiplicative inverse.
    ///
    /// Over `Z/n` this is decided prime by prime: modulo each prime `q | n` the
    /// element must reduce to a single nonzero monomial of `F_q[g, g^-1]`.
    pub fn is_unit(&self, a: &Elem) -> bool {
        if a.is_zero() {
            return false;
        }
        match &self.inner.base {
            Base::Rationals | Base::Integers => {
                a.terms.len() == 1 && self.scalar_is_unit(&a.terms[0].1)
            }
            Base::Modular { primes, .. } => primes.iter().all(|q| {
                let q = BigInt::from(*q);
                a.terms
                    .iter()
                    .filter(|(_, c)| !(c.numer() % &q).is_zero())
                    .count()
                    == 1
            }),
        }
    }

    pub fn is_nilpotent(&self, a: &Elem) -> bool {
        a.terms.iter().all(|(_, c)| self.scalar_is_nilpotent(c))
    }

    /// Multiplicative inverse, when it exists and has the shape
    /// `c g^e (1 + nilpotent)`. Units over composite non-prime-power moduli
    /// without a single unit term are not inverted.
    pub fn inverse(&self, a: &Elem) -> Option<Elem> {
        if !self.is_unit(a) {
            return None;
        }
        let lead_idx = a.terms.iter().position(|(_, c)| self.scalar_is_unit(c))?;
        let (e, c) = &a.terms[lead_idx];
        let inv_c = match &self.inner.base {
            Base::Rationals | Base::Integers => c.recip(),
            Base::Modular { modulus, .. } => {
                BigRational::from_integer(mod_inverse(c.numer(), modulus)?)
            }
        };
        let lead_inv = self.from_terms(vec![(-e, inv_c)]);
        let rest = Elem {
            terms: a
                .terms
                .iter()
                .enumerate()
                .filter(|(i, _)| *i != lead_idx)
                .map(|(_, t)| t.clone())
                .collect(),
        };
        if rest.is_zero() {
            return Some(lead_inv);
        }
        if !self.is_nilpotent(&rest) {
            return None;
        }
        // a^-1 = lead^-1 * sum_i (-rest * lead^-1)^i, a finite sum.
        let x = self.neg(&self.mul(&rest, &lead_inv));
        let mut acc = self.one();
        let mut power = self.one();
        for _ in 0..4096 {
            power = self.mul(&power, &x);
            if power.is_zero() {
                return Some(self.mul(&acc, &lead_inv));
            }
            acc = self.add(&acc, &power);
        }
        None
    }

    /// Degree of a homogeneous nonzero element; `None` for zero or mixed.
    pub fn degree(&self, a: &Elem) -> Option<i64> {
        match a.terms.as_slice() {
            [(e, _)] => Some(e * self.generator_degree().unwrap_or(0)),
            _ => None,
        }
    }

    pub fn check_window(&self, a: &Elem) -> Result<()> {
        for (e, _) in &a.terms {
            if e.abs() > self.inner.window {
                return Err(Error::ExponentOverflow {
                    exponent: *e,
                    window: self.inner.window,
                });
            }
        }
        Ok(())
    }

    /// Smallest nonnegative integer representative when `a` is a base scalar.
    pub fn lift_integer(&self, a: &Elem) -> Option<BigInt> {
        match a.terms.as_slice() {
            [] => Some(BigInt::zero()),
            [(0, c)] if c.is_integer() => Some(c.numer().clone()),
            _ => None,
        }
    }

    pub fn format(&self, a: &Elem) -> String {
        if a.is_zero() {
            return "0".to_string();
        }
        let sym = self.generator_symbol().unwrap_or("g");
        let mut out = String::new();
        for (i, (e, c)) in a.terms.iter().enumerate() {
            let (neg, mag) = if c.is_negative() { (true, -c) } else { (false, c.clone()) };
            if i == 0 {
                if neg {
                    out.push('-');
                }
            } else {
                out.push_str(if neg { " - " } else { " + " });
            }
            let coeff = if mag.is_integer() {
                mag.numer().to_string()
            } else {
                format!("{}/{}", mag.numer(), mag.denom())
            };
            match *e {
                0 => out.push_str(&coeff),
                _ => {
                    if !mag.is_one() {
                        out.push_str(&coeff);
                    }
                    out.push_str(sym);
                    if *e != 1 {
                        out.push_str(&format!("^{e}"));
                    }
                }
            }
        }
        out
    }

    /// JSON encoding: base scalars as decimal strings (`"3"`, `"1/3"`),
    /// Laurent elements as `[[exponent, "coefficient"], ...]`.
    pub fn encode(&self, a: &Elem) -> serde_json::Value {
        fn scalar(c: &BigRational) -> serde_json::Value {
            if c.is_integer() {
                serde_json::Value::String(c.numer().to_string())
            } else {
                serde_json::Value::String(format!("{}/{}", c.numer(), c.denom()))
            }
        }
        if self.is_graded() {
            serde_json::Value::Array(
                a.terms
                    .iter()
                    .map(|(e, c)| serde_json::json!([e, scalar(c)]))
                    .collect(),
            )
        } else {
            scalar(&a.coefficient(0))
        }
    }

    pub fn decode(&self, v: &serde_json::Value) -> Result<Elem> {
        let bad = || Error::InvalidArgument(format!("cannot decode ring element {v}"));
        fn parse_scalar(v: &serde_json::Value) -> Option<BigRational> {
            match v {
                serde_json::Value::String(s) => parse_rational(s),
                serde_json::Value::Number(n) => n.as_i64().map(|i| BigRational::from_integer(i.into())),
                _ => None,
            }
        }
        if self.is_graded() {
            let arr = v.as_array().ok_or_else(bad)?;
            let mut acc = self.zero();
            for t in arr {
                let pair = t.as_array().filter(|p| p.len() == 2).ok_or_else(bad)?;
                let e = pair[0].as_i64().ok_or_else(bad)?;
                let c = parse_scalar(&pair[1]).ok_or_else(bad)?;
                acc = self.add(&acc, &self.scalar_monomial(&c, e)?);
            }
            Ok(acc)
        } else {
            let c = parse_scalar(v).ok_or_else(bad)?;
            self.rational(&c)
        }
    }

    pub fn element(&self, value: Elem) -> RingElement {
        RingElement {
            ring: self.clone(),
            value,
        }
    }
}

/// Parse `"a"` or `"a/b"` as an exact rational.
pub fn parse_rational(s: &str) -> Option<BigRational> {
    let s = s.trim();
    match s.split_once('/') {
        Some((n, d)) => {
            let n: BigInt = n.trim().parse().ok()?;
            let d: BigInt = d.trim().parse().ok()?;
            if d.is_zero() {
                return None;
            }
            Some(BigRational::new(n, d))
        }
        None => Some(BigRational::from_integer(s.parse().ok()?)),
    }
}

/// The canonical homomorphism `source -> target` applied to `a`.
///
/// Supported: `Z -> Z, Q, Z/n`; `Q -> Q`; `Q -> Z/n` for denominators prime to
/// `n`; `Z/n -> Z/m` for `m | n`; base rings into Laurent extensions of their
/// images; Laurent to Laurent coefficient-wise when generator degrees agree.
pub fn ring_map(source: &Ring, target: &Ring, a: &Elem) -> Result<Elem> {
    let no_map = || Error::NoCanonicalMap {
        from: source.to_string(),
        to: target.to_string(),
    };
    match (source.generator_degree(), target.generator_degree()) {
        (Some(ds), Some(dt)) if ds != dt => return Err(no_map()),
        (Some(_), None) => return Err(no_map()),
        _ => {}
    }
    let ok = match (&source.inner.base, &target.inner.base) {
        (Base::Integers, _) => true,
        (Base::Rationals, Base::Rationals) => true,
        (Base::Rationals, Base::Modular { .. }) => true,
        (Base::Modular { modulus: n, .. }, Base::Modular { modulus: m, .. }) => (n % m).is_zero(),
        _ => false,
    };
    if !ok {
        return Err(no_map());
    }
    let mut terms = Vec::with_capacity(a.terms.len());
    for (e, c) in &a.terms {
        if let Base::Modular { modulus, .. } = &target.inner.base {
            if !c.is_integer() && !c.denom().gcd(modulus).is_one() {
                return Err(Error::NonIntegralElement(source.format(a)));
            }
        }
        terms.push((*e, c.clone()));
    }
    let out = target.from_terms(terms);
    target.check_window(&out)?;
    Ok(out)
}

/// An element bundled with its ring, for checked arithmetic.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RingElement {
    pub ring: Ring,
    pub value: Elem,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RingOp {
    Add,
    Mul,
    Neg,
    Eq,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum RingOpResult {
    Element(RingElement),
    Bool(bool),
}

impl RingElement {
    fn same_ring(&self, other: &RingElement) -> Result<()> {
        if self.ring != other.ring {
            return Err(Error::RingMismatch {
                left: self.ring.to_string(),
                right: other.ring.to_string(),
            });
        }
        Ok(())
    }

    pub fn add(&self, other: &RingElement) -> Result<RingElement> {
        self.same_ring(other)?;
        let v = self.ring.add(&self.value, &other.value);
        Ok(self.ring.element(v))
    }

    pub fn mul(&self, other: &RingElement) -> Result<RingElement> {
        self.same_ring(other)?;
        let v = self.ring.mul(&self.value, &other.value);
        self.ring.check_window(&v)?;
        Ok(self.ring.element(v))
    }

    pub fn neg(&self) -> RingElement {
        self.ring.element(self.ring.neg(&self.value))
    }

    pub fn structurally_equal(&self, other: &RingElement) -> Result<bool> {
        self.same_ring(other)?;
        Ok(self.value == other.value)
    }

    pub fn is_unit(&self) -> bool {
        self.ring.is_unit(&self.value)
    }

    pub fn is_nilpotent(&self) -> bool {
        self.ring.is_nilpotent(&self.value)
    }

    pub fn map_to(&self, target: &Ring) -> Result<RingElement> {
        Ok(target.element(ring_map(&self.ring, target, &self.value)?))
    }
}

impl fmt::Display for RingElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.ring.format(&self.value))
    }
}

/// `op(a, b)`; `Neg` ignores `b` but still checks that it lives in the same ring.
pub fn ring_arithmetic(op: RingOp, a: &RingElement, b: &RingElement) -> Result<RingOpResult> {
    a.same_ring(b)?;
    Ok(match op {
        RingOp::Add => RingOpResult::Element(a.add(b)?),
        RingOp::Mul => RingOpResult::Element(a.mul(b)?),
        RingOp::Neg => RingOpResult::Element(a.neg()),
        RingOp::Eq => RingOpResult::Bool(a.structurally_equal(b)?),
    })
}

pub fn mod_inverse(a: &BigInt, modulus: &BigInt) -> Option<BigInt> {
    let a = a.mod_floor(modulus);
    let egcd = a.extended_gcd(modulus);
    if !egcd.gcd.is_one() {
        return None;
    }
    Some(egcd.x.mod_floor(modulus))
}

pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2u64;
    while d.saturating_mul(d) <= n {
        if n.is_multiple_of(d) {
            return false;
        }
        d += 1;
    }
    true
}

/// Prime factorization by trial division, ascending.
pub fn factor(mut n: u64) -> Vec<(u64, u32)> {
    let mut out = Vec::new();
    let mut d = 2u64;
    while d.saturating_mul(d) <= n {
        let mut e = 0;
        while n.is_multiple_of(d) {
            n /= d;
            e += 1;
        }
        if e > 0 {
            out.push((d, e));
        }
        d += 1;
    }
    if n > 1 {
        out.push((n, 1));
    }
    out
}

/// `v_p(n)` for `n > 0`.
pub fn p_valuation(mut n: u64, p: u64) -> u32 {
    let mut v = 0;
    while n > 0 && n.is_multiple_of(p) {
        n /= p;
        v += 1;
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn zmod(n: u64) -> Ring {
        Ring::new(RingDescriptor::zmod(n)).unwrap()
    }

    fn f2v() -> Ring {
        Ring::new(RingDescriptor::laurent(RingDescriptor::zmod(2), "v", 2)).unwrap()
    }

    #[test]
    fn descriptor_validation() {
        assert!(matches!(
            Ring::new(RingDescriptor::zmod(1)),
            Err(Error::InvalidDescriptor(_))
        ));
        assert!(matches!(
            Ring::new(RingDescriptor::padic(4, 3)),
            Err(Error::InvalidDescriptor(_))
        ));
        let nested = RingDescriptor::laurent(
            RingDescriptor::laurent(RingDescriptor::Integers, "v", 2),
            "w",
            2,
        );
        assert!(matches!(Ring::new(nested), Err(Error::InvalidDescriptor(_))));
        assert!(Ring::new(RingDescriptor::laurent(RingDescriptor::Integers, "b", 3)).is_err());
    }

    #[test]
    fn residues_are_canonical() {
        let r = zmod(8);
        assert_eq!(r.int(-1), r.int(7));
        assert_eq!(r.add(&r.int(3), &r.int(6)), r.int(1));
        assert!(r.mul(&r.int(2), &r.int(4)).is_zero());
    }

    #[test]
    fn laurent_generator_inverse() {
        let r = f2v();
        let v = r.gen_pow(1).unwrap();
        let vinv = r.gen_pow(-1).unwrap();
        assert!(r.is_one(&r.mul(&v, &vinv)));
        assert!(r.is_unit(&v));
        assert_eq!(r.degree(&v), Some(2));
    }

    #[test]
    fn units_and_nilpotents() {
        let r = zmod(8);
        assert!(r.is_unit(&r.int(3)));
        assert!(!r.is_unit(&r.int(2)));
        assert!(r.is_nilpotent(&r.int(2)));
        assert!(!r.is_nilpotent(&r.int(3)));
        let z = Ring::integers();
        assert!(!z.is_unit(&z.int(2)));
        assert!(z.is_unit(&z.int(-1)));
        assert!(!z.is_unit(&z.zero()));
        let p = Ring::new(RingDescriptor::padic(3, 4)).unwrap();
        assert!(p.is_nilpotent(&p.int(3)));
        let q = Ring::rationals();
        assert!(!q.is_nilpotent(&q.int(5)));
    }

    #[test]
    fn laurent_units_over_z_are_signed_monomials() {
        let r = Ring::new(RingDescriptor::laurent(RingDescriptor::Integers, "b", 2)).unwrap();
        let b = r.gen_pow(3).unwrap();
        assert!(r.is_unit(&r.neg(&b)));
        assert!(!r.is_unit(&r.scale(&b, &BigInt::from(2))));
        assert!(!r.is_unit(&r.add(&b, &r.one())));
    }

    #[test]
    fn laurent_unit_plus_nilpotent_inverts() {
        let r = Ring::new(RingDescriptor::laurent(RingDescriptor::padic(2, 3), "v", 2)).unwrap();
        let a = r.add(&r.gen_pow(1).unwrap(), &r.scale(&r.gen_pow(2).unwrap(), &BigInt::from(2)));
        assert!(r.is_unit(&a));
        let inv = r.inverse(&a).unwrap();
        assert!(r.is_one(&r.mul(&a, &inv)));
    }

    #[test]
    fn ring_maps() {
        let z = Ring::integers();
        let q = Ring::rationals();
        let z8 = zmod(8);
        assert_eq!(ring_map(&z, &z8, &z.int(10)).unwrap(), z8.int(2));
        let third = q.rational(&BigRational::new(1.into(), 3.into())).unwrap();
        assert_eq!(ring_map(&q, &z8, &third).unwrap(), z8.int(3));
        let half = q.rational(&BigRational::new(1.into(), 2.into())).unwrap();
        assert!(matches!(ring_map(&q, &z8, &half), Err(Error::NonIntegralElement(_))));
        assert!(matches!(ring_map(&z8, &zmod(3), &z8.int(1)), Err(Error::NoCanonicalMap { .. })));
        let p = Ring::new(RingDescriptor::padic(2, 5)).unwrap();
        assert_eq!(ring_map(&p, &z8, &p.int(13)).unwrap(), z8.int(5));
    }

    #[test]
    fn mismatched_rings_are_rejected() {
        let a = zmod(8).element(zmod(8).int(3));
        let b = zmod(9).element(zmod(9).int(3));
        assert!(matches!(a.add(&b), Err(Error::RingMismatch { .. })));
        assert!(matches!(
            ring_arithmetic(RingOp::Eq, &a, &b),
            Err(Error::RingMismatch { .. })
        ));
    }

    #[test]
    fn exponent_window_overflow_is_an_error() {
        let r = Ring::with_window(RingDescriptor::laurent(RingDescriptor::Integers, "v", 2), 4).unwrap();
        assert!(matches!(r.gen_pow(5), Err(Error::ExponentOverflow { .. })));
        let a = r.element(r.gen_pow(3).unwrap());
        assert!(matches!(a.mul(&a), Err(Error::ExponentOverflow { .. })));
    }

    #[test]
    fn json_roundtrip_of_descriptor_and_element() {
        let d = RingDescriptor::laurent(RingDescriptor::zmod(2), "v", 2);
        let s = serde_json::to_string(&d).unwrap();
        assert_eq!(s, r#"{"kind":"laurent","base":{"kind":"zmod","n":2},"gen":"v","deg":2}"#);
        let back: RingDescriptor = serde_json::from_str(&s).unwrap();
        assert_eq!(back, d);
        let r = Ring::new(d).unwrap();
        let a = r.add(&r.gen_pow(-2).unwrap(), &r.gen_pow(3).unwrap());
        assert_eq!(r.decode(&r.encode(&a)).unwrap(), a);
    }

    fn gcd_u64(a: u64, b: u64) -> u64 {
        if b == 0 { a } else { gcd_u64(b, a % b) }
    }

    fn radical(n: u64) -> u64 {
        factor(n).into_iter().map(|(p, _)| p).product()
    }

    proptest! {
        #[test]
        fn zmod_unit_and_nilpotent_characterization(n in 2u64..200, a in 0u64..1000) {
            let r = zmod(n);
            let x = r.int(a as i64);
            let lift = a % n;
            prop_assert_eq!(r.is_unit(&x), gcd_u64(lift, n) == 1);
            prop_assert_eq!(r.is_nilpotent(&x), lift % radical(n) == 0);
        }

        #[test]
        fn reduction_is_a_ring_homomorphism(a in -500i64..500, b in -500i64..500, k in 1u32..4) {
            let z = Ring::integers();
            let p = Ring::new(RingDescriptor::padic(3, 4)).unwrap();
            let t = zmod(3u64.pow(k));
            let (za, zb) = (z.int(a), z.int(b));
            // Z -> Z/3^4 -> Z/3^k
            let pa = ring_map(&z, &p, &za).unwrap();
            let pb = ring_map(&z, &p, &zb).unwrap();
            prop_assert_eq!(ring_map(&p, &t, &p.add(&pa, &pb)).unwrap(),
                t.add(&ring_map(&p, &t, &pa).unwrap(), &ring_map(&p, &t, &pb).unwrap()));
            prop_assert_eq!(ring_map(&p, &t, &p.mul(&pa, &pb)).unwrap(),
                t.mul(&ring_map(&p, &t, &pa).unwrap(), &ring_map(&p, &t, &pb).unwrap()));
            prop_assert_eq!(ring_map(&z, &p, &z.add(&za, &zb)).unwrap(), p.add(&pa, &pb));
            prop_assert!(t.is_one(&ring_map(&p, &t, &p.one()).unwrap()));
        }

        #[test]
        fn laurent_degree_is_additive(e1 in -10i64..10, e2 in -10i64..10, c1 in 1i64..7, c2 in 1i64..7) {
            let r = Ring::new(RingDescriptor::laurent(RingDescriptor::zmod(7), "v", 4)).unwrap();
            let a = r.scalar_monomial(&BigRational::from_integer(c1.into()), e1).unwrap();
            let b = r.scalar_monomial(&BigRational::from_integer(c2.into()), e2).unwrap();
            let prod = r.mul(&a, &b);
            prop_assert_eq!(r.degree(&prod), Some(r.degree(&a).unwrap() + r.degree(&b).unwrap()));
        }

        #[test]
        fn rational_to_zmod_is_multiplicative(n1 in -50i64..50, d1 in 1i64..30, n2 in -50i64..50, d2 in 1i64..30) {
            let q = Ring::rationals();
            let t = zmod(25);
            prop_assume!(d1 % 5 != 0 && d2 % 5 != 0);
            let a = q.rational(&BigRational::new(n1.into(), d1.into())).unwrap();
            let b = q.rational(&BigRational::new(n2.into(), d2.into())).unwrap();
            prop_assert_eq!(ring_map(&q, &t, &q.mul(&a, &b)).unwrap(),
                t.mul(&ring_map(&q, &t, &a).unwrap(), &ring_map(&q, &t, &b).unwrap()));
            prop_assert_eq!(ring_map(&q, &t, &q.add(&a, &b)).unwrap(),
                t.add(&ring_map(&q, &t, &a).unwrap(), &ring_map(&q, &t, &b).unwrap()));
        }
    }
}
