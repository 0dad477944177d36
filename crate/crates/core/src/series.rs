//! Truncated power series in the orientation class `u` over a coefficient ring.
//!
//! A [`GradedSeries`] stores `a_0, ..., a_N` and is valid modulo `u^(N+1)`.
//! Binary operations truncate to the smaller order of their operands.
//! Bivariate series are stored by homogeneous component so that products
//! of series with large valuation skip everything past the truncation.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::ring::{Elem, Ring};

/// Truncation order used when a caller does not choose one.
pub const DEFAULT_TRUNCATION: usize = 32;

#[derive(Clone, Debug)]
pub struct GradedSeries {
    ring: Ring,
    order: usize,
    coeffs: Vec<Elem>,
    variable_degree: i64,
    homogeneous_degree: Option<i64>,
}

impl PartialEq for GradedSeries {
    fn eq(&self, other: &Self) -> bool {
        self.ring == other.ring
            && self.order == other.order
            && self.variable_degree == other.variable_degree
            && self.coeffs == other.coeffs
    }
}

impl Eq for GradedSeries {}

/// Where the first unit coefficient sits, and what lies below it.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct UnitProfile {
    /// Minimal `i <= N` with `a_i` a unit.
    pub valuation: Option<usize>,
    pub pivot_is_unit: bool,
    /// All `a_j` with `j < i` (all `a_j`, `j <= N`, without a pivot) are nilpotent.
    pub below_all_nilpotent: bool,
    pub truncation: usize,
}

impl UnitProfile {
    /// `f = u^i * unit * (1 + nilpotent)`: a unit once `u` is inverted and
    /// the localization is completed.
    pub fn certifies_unit(&self) -> bool {
        self.pivot_is_unit && self.below_all_nilpotent
    }
}

impl GradedSeries {
    pub fn from_coeffs(ring: &Ring, order: usize, mut coeffs: Vec<Elem>) -> GradedSeries {
        coeffs.resize(order + 1, Elem::default());
        let mut s = GradedSeries {
            ring: ring.clone(),
            order,
            coeffs,
            variable_degree: -2,
            homogeneous_degree: None,
        };
        s.homogeneous_degree = s.detect_degree();
        s
    }

    pub fn from_ints(ring: &Ring, order: usize, coeffs: &[i64]) -> GradedSeries {
        let coeffs = coeffs.iter().map(|c| ring.int(*c)).collect();
        GradedSeries::from_coeffs(ring, order, coeffs)
    }

    pub fn zero(ring: &Ring, order: usize) -> GradedSeries {
        GradedSeries::from_coeffs(ring, order, Vec::new())
    }

    pub fn constant(ring: &Ring, order: usize, c: Elem) -> GradedSeries {
        GradedSeries::from_coeffs(ring, order, vec![c])
    }

    pub fn one(ring: &Ring, order: usize) -> GradedSeries {
        GradedSeries::constant(ring, order, ring.one())
    }

    /// The orientation class `u`.
    pub fn variable(ring: &Ring, order: usize) -> GradedSeries {
        GradedSeries::monomial(ring, order, ring.one(), 1)
    }

    pub fn monomial(ring: &Ring, order: usize, c: Elem, power: usize) -> GradedSeries {
        let mut coeffs = vec![Elem::default(); order + 1];
        if power <= order {
            coeffs[power] = c;
        }
        GradedSeries::from_coeffs(ring, order, coeffs)
    }

    pub fn ring(&self) -> &Ring {
        &self.ring
    }

    /// Truncation order `N`: the series is known modulo `u^(N+1)`.
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn coeffs(&self) -> &[Elem] {
        &self.coeffs
    }

    pub fn coeff(&self, j: usize) -> &Elem {
        &self.coeffs[j]
    }

    pub fn variable_degree(&self) -> i64 {
        self.variable_degree
    }

    pub fn homogeneous_degree(&self) -> Option<i64> {
        self.homogeneous_degree
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(Elem::is_zero)
    }

    /// Index of the lowest nonzero coefficient.
    pub fn valuation(&self) -> Option<usize> {
        self.coeffs.iter().position(|c| !c.is_zero())
    }

    fn detect_degree(&self) -> Option<i64> {
        let mut degree = None;
        for (j, c) in self.coeffs.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            let d = self.ring.degree(c)? + j as i64 * self.variable_degree;
            match degree {
                None => degree = Some(d),
                Some(prev) if prev != d => return None,
                _ => {}
            }
        }
        degree
    }

    /// Drop coefficients past `order` (no-op if already shorter).
    pub fn truncate(&self, order: usize) -> GradedSeries {
        if order >= self.order {
            return self.clone();
        }
        GradedSeries::from_coeffs(&self.ring, order, self.coeffs[..=order].to_vec())
    }

    fn check_ring(&self, other: &GradedSeries) -> Result<()> {
        if self.ring != other.ring || self.variable_degree != other.variable_degree {
            return Err(Error::RingMismatch {
                left: self.ring.to_string(),
                right: other.ring.to_string(),
            });
        }
        Ok(())
    }

    fn check_window(&self) -> Result<()> {
        self.coeffs.iter().try_for_each(|c| self.ring.check_window(c))
    }

    pub fn add(&self, other: &GradedSeries) -> Result<GradedSeries> {
        self.check_ring(other)?;
        if let (Some(a), Some(b)) = (self.homogeneous_degree, other.homogeneous_degree) {
            if a != b {
                return Err(Error::DegreeMismatch { left: a, right: b });
            }
        }
        Ok(self.add_raw(other))
    }

    pub(crate) fn add_raw(&self, other: &GradedSeries) -> GradedSeries {
        let order = self.order.min(other.order);
        let coeffs = (0..=order)
            .map(|j| self.ring.add(&self.coeffs[j], &other.coeffs[j]))
            .collect();
        GradedSeries::from_coeffs(&self.ring, order, coeffs)
    }

    pub fn neg(&self) -> GradedSeries {
        let coeffs = self.coeffs.iter().map(|c| self.ring.neg(c)).collect();
        GradedSeries::from_coeffs(&self.ring, self.order, coeffs)
    }

    pub fn sub(&self, other: &GradedSeries) -> Result<GradedSeries> {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &GradedSeries) -> Result<GradedSeries> {
        self.check_ring(other)?;
        let out = self.mul_raw(other);
        out.check_window()?;
        Ok(out)
    }

    pub(crate) fn mul_raw(&self, other: &GradedSeries) -> GradedSeries {
        let order = self.order.min(other.order);
        let coeffs = mul_coeffs(&self.ring, &self.coeffs, &other.coeffs, order);
        GradedSeries::from_coeffs(&self.ring, order, coeffs)
    }

    pub fn scalar_mul(&self, c: &Elem) -> Result<GradedSeries> {
        let coeffs: Vec<Elem> = self.coeffs.iter().map(|a| self.ring.mul(a, c)).collect();
        let out = GradedSeries::from_coeffs(&self.ring, self.order, coeffs);
        out.check_window()?;
        Ok(out)
    }

    /// `self(g(u))`, truncated at `min(N_f, N_g)`.
    pub fn substitute(&self, g: &GradedSeries) -> Result<GradedSeries> {
        self.check_ring(g)?;
        if !g.coeffs[0].is_zero() {
            return Err(Error::NonzeroConstantTerm);
        }
        let out = self.substitute_raw(g);
        out.check_window()?;
        Ok(out)
    }

    pub(crate) fn substitute_raw(&self, g: &GradedSeries) -> GradedSeries {
        let order = self.order.min(g.order);
        let mut acc = vec![Elem::default(); order + 1];
        acc[0] = self.coeffs[order].clone();
        for j in (0..order).rev() {
            acc = mul_coeffs(&self.ring, &acc, &g.coeffs, order);
            acc[0] = self.ring.add(&acc[0], &self.coeffs[j]);
        }
        GradedSeries::from_coeffs(&self.ring, order, acc)
    }

    /// Multiplicative inverse; requires a unit constant term.
    pub fn invert(&self) -> Result<GradedSeries> {
        let a0_inv = self
            .ring
            .inverse(&self.coeffs[0])
            .ok_or(Error::NonUnitConstantTerm)?;
        let r = &self.ring;
        let mut c: Vec<Elem> = Vec::with_capacity(self.order + 1);
        c.push(a0_inv.clone());
        for n in 1..=self.order {
            let mut s = Elem::default();
            for k in 1..=n {
                if !self.coeffs[k].is_zero() && !c[n - k].is_zero() {
                    s = r.add(&s, &r.mul(&self.coeffs[k], &c[n - k]));
                }
            }
            c.push(r.neg(&r.mul(&s, &a0_inv)));
        }
        let out = GradedSeries::from_coeffs(r, self.order, c);
        out.check_window()?;
        Ok(out)
    }

    /// `q` with `self = divisor * q`, by peeling the lowest nonzero
    /// coefficient of the divisor. The quotient is valid to order
    /// `min(N_f, N_g) - v(g)`.
    pub fn exact_divide(&self, divisor: &GradedSeries) -> Result<GradedSeries> {
        self.check_ring(divisor)?;
        let r = &self.ring;
        let s = divisor.valuation().ok_or(Error::NotDivisible)?;
        let pivot = &divisor.coeffs[s];
        if r.is_zero_divisor(pivot) {
            return Err(Error::ZeroDivisorPivot);
        }
        let top = self.order.min(divisor.order);
        if s > top {
            return Err(Error::NotDivisible);
        }
        if self.coeffs[..s].iter().any(|c| !c.is_zero()) {
            return Err(Error::NotDivisible);
        }
        let order = top - s;
        let mut q: Vec<Elem> = Vec::with_capacity(order + 1);
        for k in 0..=order {
            let mut rem = self.coeffs[k + s].clone();
            for i in 1..=k {
                let g = &divisor.coeffs[s + i];
                if !g.is_zero() && !q[k - i].is_zero() {
                    rem = r.sub(&rem, &r.mul(g, &q[k - i]));
                }
            }
            q.push(r.exact_div(&rem, pivot).ok_or(Error::NotDivisible)?);
        }
        let out = GradedSeries::from_coeffs(r, order, q);
        out.check_window()?;
        Ok(out)
    }

    pub fn unit_profile(&self) -> UnitProfile {
        let r = &self.ring;
        let valuation = self.coeffs.iter().position(|c| r.is_unit(c));
        let below = match valuation {
            Some(i) => &self.coeffs[..i],
            None => &self.coeffs[..],
        };
        UnitProfile {
            valuation,
            pivot_is_unit: valuation.is_some(),
            below_all_nilpotent: below.iter().all(|c| r.is_nilpotent(c)),
            truncation: self.order,
        }
    }

    /// Series reversion `g` with `g(f(u)) = u`; requires `a_0 = 0`, `a_1` a unit.
    pub fn compositional_inverse(&self) -> Result<GradedSeries> {
        let r = &self.ring;
        if !self.coeffs[0].is_zero() {
            return Err(Error::NonzeroConstantTerm);
        }
        let n = self.order;
        let a1_inv = r.inverse(&self.coeffs[1]).ok_or(Error::NonUnitConstantTerm)?;
        // powers[k] = f^k truncated at n
        let mut powers: Vec<Vec<Elem>> = vec![Vec::new(), self.coeffs.clone()];
        for k in 2..=n {
            let next = mul_coeffs(r, &powers[k - 1], &self.coeffs, n);
            powers.push(next);
        }
        let mut e = vec![Elem::default(); n + 1];
        if n >= 1 {
            e[1] = a1_inv.clone();
        }
        for d in 2..=n {
            let mut s = Elem::default();
            for (k, ek) in e.iter().enumerate().take(d).skip(1) {
                if !ek.is_zero() && !powers[k][d].is_zero() {
                    s = r.add(&s, &r.mul(ek, &powers[k][d]));
                }
            }
            let lead_inv = r.pow(&a1_inv, d as u32);
            e[d] = r.neg(&r.mul(&s, &lead_inv));
        }
        Ok(GradedSeries::from_coeffs(r, n, e))
    }

    /// Map every coefficient along the canonical ring map.
    pub fn map_ring(&self, target: &Ring) -> Result<GradedSeries> {
        let coeffs = self
            .coeffs
            .iter()
            .map(|c| crate::ring::ring_map(&self.ring, target, c))
            .collect::<Result<Vec<_>>>()?;
        Ok(GradedSeries::from_coeffs(target, self.order, coeffs))
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "N": self.order,
            "coeffs": self.coeffs.iter().map(|c| self.ring.encode(c)).collect::<Vec<_>>(),
        })
    }

    pub fn from_json(ring: &Ring, v: &serde_json::Value) -> Result<GradedSeries> {
        let bad = || Error::InvalidArgument(format!("malformed series JSON {v}"));
        let order = v.get("N").and_then(|n| n.as_u64()).ok_or_else(bad)? as usize;
        let arr = v.get("coeffs").and_then(|c| c.as_array()).ok_or_else(bad)?;
        if arr.len() > order + 1 {
            return Err(bad());
        }
        let coeffs = arr.iter().map(|c| ring.decode(c)).collect::<Result<Vec<_>>>()?;
        Ok(GradedSeries::from_coeffs(ring, order, coeffs))
    }
}

impl fmt::Display for GradedSeries {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts: Vec<String> = Vec::new();
        for (j, c) in self.coeffs.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            let mut coef = self.ring.format(c);
            if c.terms().len() > 1 {
                coef = format!("({coef})");
            }
            let var = match j {
                0 => String::new(),
                1 => "u".to_string(),
                _ => format!("u^{j}"),
            };
            let term = if j == 0 {
                coef
            } else if coef == "1" {
                var
            } else if coef == "-1" {
                format!("-{var}")
            } else if coef.ends_with(|ch: char| ch.is_ascii_digit()) {
                format!("{coef}{var}")
            } else {
                format!("{coef}*{var}")
            };
            parts.push(term);
        }
        if parts.is_empty() {
            parts.push("0".to_string());
        }
        let body = parts.join(" + ").replace("+ -", "- ");
        write!(f, "{body} + O(u^{})", self.order + 1)
    }
}

/// Truncated product of coefficient vectors, result has length `order + 1`.
pub(crate) fn mul_coeffs(ring: &Ring, a: &[Elem], b: &[Elem], order: usize) -> Vec<Elem> {
    let mut out = vec![Elem::default(); order + 1];
    for (i, ai) in a.iter().enumerate().take(order + 1) {
        if ai.is_zero() {
            continue;
        }
        for (j, bj) in b.iter().enumerate().take(order + 1 - i) {
            if bj.is_zero() {
                continue;
            }
            out[i + j] = ring.add(&out[i + j], &ring.mul(ai, bj));
        }
    }
    out
}

impl Ring {
    /// `a` is a zero divisor of `R*`. For `Z/n`-based rings this is the
    /// McCoy criterion: some nonzero constant kills every coefficient.
    pub fn is_zero_divisor(&self, a: &Elem) -> bool {
        if a.is_zero() {
            return true;
        }
        let n = self.characteristic();
        if n.is_zero() {
            return false;
        }
        let mut g = n.clone();
        for (_, c) in a.terms() {
            g = g.gcd(c.numer());
        }
        !g.is_one()
    }

    /// `a / b` when `b` divides `a` exactly in `R*`.
    pub fn exact_div(&self, a: &Elem, b: &Elem) -> Option<Elem> {
        if a.is_zero() {
            return Some(Elem::default());
        }
        if let Some(inv) = self.inverse(b) {
            return Some(self.mul(a, &inv));
        }
        // Laurent long division from the top term; the divisor's top
        // coefficient must divide every quotient step exactly.
        let (eb, cb) = b.terms().last()?.clone();
        let min_q = a.terms().first()?.0 - b.terms().first()?.0;
        let mut rem = a.clone();
        let mut quotient = Elem::default();
        while let Some((er, cr)) = rem.terms().last().cloned() {
            let shift = er - eb;
            if shift < min_q {
                return None;
            }
            let c = self.scalar_exact_div(&cr, &cb)?;
            let term = self.scalar_monomial(&c, shift).ok()?;
            quotient = self.add(&quotient, &term);
            rem = self.sub(&rem, &self.mul(&term, b));
        }
        Some(quotient)
    }

    fn scalar_exact_div(
        &self,
        a: &num_rational::BigRational,
        b: &num_rational::BigRational,
    ) -> Option<num_rational::BigRational> {
        if self.is_rational_base() {
            return Some(a / b);
        }
        let n = self.characteristic();
        if n.is_zero() {
            let (q, r) = a.numer().div_rem(b.numer());
            return r.is_zero().then(|| num_rational::BigRational::from_integer(q));
        }
        let inv = crate::ring::mod_inverse(b.numer(), &n)?;
        Some(num_rational::BigRational::from_integer((a.numer() * inv).mod_floor(&n)))
    }
}

/// Power series in `x, y` truncated by total degree, stored by homogeneous
/// component: `comps[e][i]` is the coefficient of `x^i y^(e-i)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BivariateSeries {
    ring: Ring,
    order: usize,
    comps: Vec<Vec<Elem>>,
}

impl BivariateSeries {
    pub fn zero(ring: &Ring, order: usize) -> BivariateSeries {
        BivariateSeries {
            ring: ring.clone(),
            order,
            comps: (0..=order).map(|e| vec![Elem::default(); e + 1]).collect(),
        }
    }

    /// Build from `(i, j) -> c` (coefficient of `x^i y^j`); keys past the
    /// truncation are dropped.
    pub fn from_terms(ring: &Ring, order: usize, terms: &[((usize, usize), Elem)]) -> BivariateSeries {
        let mut s = BivariateSeries::zero(ring, order);
        for ((i, j), c) in terms {
            if i + j <= order {
                let e = i + j;
                s.comps[e][*i] = ring.add(&s.comps[e][*i], c);
            }
        }
        s
    }

    pub fn x(ring: &Ring, order: usize) -> BivariateSeries {
        BivariateSeries::from_terms(ring, order, &[((1, 0), ring.one())])
    }

    pub fn y(ring: &Ring, order: usize) -> BivariateSeries {
        BivariateSeries::from_terms(ring, order, &[((0, 1), ring.one())])
    }

    /// `f(x)` viewed as a bivariate series.
    pub fn in_x(f: &GradedSeries) -> BivariateSeries {
        let terms: Vec<_> = f
            .coeffs()
            .iter()
            .enumerate()
            .map(|(i, c)| ((i, 0), c.clone()))
            .collect();
        BivariateSeries::from_terms(f.ring(), f.order(), &terms)
    }

    pub fn in_y(f: &GradedSeries) -> BivariateSeries {
        let terms: Vec<_> = f
            .coeffs()
            .iter()
            .enumerate()
            .map(|(j, c)| ((0, j), c.clone()))
            .collect();
        BivariateSeries::from_terms(f.ring(), f.order(), &terms)
    }

    pub fn ring(&self) -> &Ring {
        &self.ring
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn coeff(&self, i: usize, j: usize) -> Elem {
        if i + j > self.order {
            return Elem::default();
        }
        self.comps[i + j][i].clone()
    }

    pub(crate) fn coeff_ref(&self, i: usize, j: usize) -> &Elem {
        &self.comps[i + j][i]
    }

    /// Homogeneous component of total degree `e`, indexed by the x-exponent.
    pub fn component(&self, e: usize) -> &[Elem] {
        &self.comps[e]
    }

    pub(crate) fn set_component(&mut self, e: usize, comp: Vec<Elem>) {
        debug_assert_eq!(comp.len(), e + 1);
        self.comps[e] = comp;
    }

    /// Nonzero terms `((i, j), c)` by total degree, then x-exponent.
    pub fn terms(&self) -> impl Iterator<Item = ((usize, usize), &Elem)> + '_ {
        self.comps.iter().enumerate().flat_map(|(e, comp)| {
            comp.iter()
                .enumerate()
                .filter(|(_, c)| !c.is_zero())
                .map(move |(i, c)| ((i, e - i), c))
        })
    }

    pub fn add(&self, other: &BivariateSeries) -> BivariateSeries {
        let order = self.order.min(other.order);
        let comps = (0..=order)
            .map(|e| {
                (0..=e)
                    .map(|i| self.ring.add(&self.comps[e][i], &other.comps[e][i]))
                    .collect()
            })
            .collect();
        BivariateSeries {
            ring: self.ring.clone(),
            order,
            comps,
        }
    }

    pub fn sub(&self, other: &BivariateSeries) -> BivariateSeries {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> BivariateSeries {
        let comps = self
            .comps
            .iter()
            .map(|c| c.iter().map(|a| self.ring.neg(a)).collect())
            .collect();
        BivariateSeries {
            ring: self.ring.clone(),
            order: self.order,
            comps,
        }
    }

    pub fn scale(&self, c: &Elem) -> BivariateSeries {
        let comps = self
            .comps
            .iter()
            .map(|comp| comp.iter().map(|a| self.ring.mul(a, c)).collect())
            .collect();
        BivariateSeries {
            ring: self.ring.clone(),
            order: self.order,
            comps,
        }
    }

    pub fn mul(&self, other: &BivariateSeries) -> BivariateSeries {
        let order = self.order.min(other.order);
        let r = &self.ring;
        let mut out = BivariateSeries::zero(r, order);
        for ea in 0..=order {
            if self.comps[ea].iter().all(Elem::is_zero) {
                continue;
            }
            for eb in 0..=(order - ea) {
                if other.comps[eb].iter().all(Elem::is_zero) {
                    continue;
                }
                let target = &mut out.comps[ea + eb];
                mul_components_into(r, &self.comps[ea], &other.comps[eb], target);
            }
        }
        out
    }

    /// Swap the roles of `x` and `y`.
    pub fn swap(&self) -> BivariateSeries {
        let comps = self
            .comps
            .iter()
            .map(|c| c.iter().rev().cloned().collect())
            .collect();
        BivariateSeries {
            ring: self.ring.clone(),
            order: self.order,
            comps,
        }
    }

    /// `F(g(u), h(u))` for `g`, `h` without constant term.
    pub fn compose(&self, g: &GradedSeries, h: &GradedSeries) -> Result<GradedSeries> {
        if !g.coeff(0).is_zero() || !h.coeff(0).is_zero() {
            return Err(Error::NonzeroConstantTerm);
        }
        let r = &self.ring;
        let order = self.order.min(g.order()).min(h.order());
        let h_is_u = (0..=order).all(|j| {
            let c = h.coeff(j);
            if j == 1 { r.is_one(c) } else { c.is_zero() }
        });
        // rows[i] = sum_j c_ij h^j
        let rows: Vec<Vec<Elem>> = if h_is_u {
            (0..=order)
                .map(|i| {
                    let mut row = vec![Elem::default(); order + 1];
                    for (j, slot) in row.iter_mut().enumerate().take(order + 1 - i) {
                        *slot = self.comps[i + j][i].clone();
                    }
                    row
                })
                .collect()
        } else {
            let mut hp: Vec<Vec<Elem>> = vec![GradedSeries::one(r, order).coeffs().to_vec()];
            for j in 1..=order {
                let next = mul_coeffs(r, &hp[j - 1], &h.coeffs()[..=order], order);
                hp.push(next);
            }
            (0..=order)
                .map(|i| {
                    let mut row = vec![Elem::default(); order + 1];
                    for (j, hj) in hp.iter().enumerate().take(order + 1 - i) {
                        let c = &self.comps[i + j][i];
                        if c.is_zero() {
                            continue;
                        }
                        for (k, hk) in hj.iter().enumerate() {
                            if !hk.is_zero() {
                                row[k] = r.add(&row[k], &r.mul(c, hk));
                            }
                        }
                    }
                    row
                })
                .collect()
        };
        let gc = &g.coeffs()[..=order];
        let mut acc = rows[order].clone();
        for i in (0..order).rev() {
            acc = mul_coeffs(r, &acc, gc, order);
            for (k, v) in rows[i].iter().enumerate() {
                if !v.is_zero() {
                    acc[k] = r.add(&acc[k], v);
                }
            }
        }
        let out = GradedSeries::from_coeffs(r, order, acc);
        out.check_window()?;
        Ok(out)
    }

    pub fn map_ring(&self, target: &Ring) -> Result<BivariateSeries> {
        let comps = self
            .comps
            .iter()
            .map(|comp| {
                comp.iter()
                    .map(|c| crate::ring::ring_map(&self.ring, target, c))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(BivariateSeries {
            ring: target.clone(),
            order: self.order,
            comps,
        })
    }

    pub fn check_window(&self) -> Result<()> {
        self.comps
            .iter()
            .flatten()
            .try_for_each(|c| self.ring.check_window(c))
    }
}

/// `target += a * b` for homogeneous components of bivariate series.
pub(crate) fn mul_components_into(ring: &Ring, a: &[Elem], b: &[Elem], target: &mut [Elem]) {
    for (i, ai) in a.iter().enumerate() {
        if ai.is_zero() {
            continue;
        }
        for (j, bj) in b.iter().enumerate() {
            if bj.is_zero() {
                continue;
            }
            target[i + j] = ring.add(&target[i + j], &ring.mul(ai, bj));
        }
    }
}

/// Sparse series in `x, y, z` truncated by total degree; used to compare the
/// two sides of the associativity axiom.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TrivariateSeries {
    ring: Ring,
    order: usize,
    terms: BTreeMap<(usize, [usize; 3]), Elem>,
}

impl TrivariateSeries {
    pub fn zero(ring: &Ring, order: usize) -> TrivariateSeries {
        TrivariateSeries {
            ring: ring.clone(),
            order,
            terms: BTreeMap::new(),
        }
    }

    pub fn add_term(&mut self, exps: [usize; 3], c: &Elem) {
        let total = exps.iter().sum::<usize>();
        if total > self.order || c.is_zero() {
            return;
        }
        let key = (total, exps);
        let v = match self.terms.get(&key) {
            Some(prev) => self.ring.add(prev, c),
            None => c.clone(),
        };
        if v.is_zero() {
            self.terms.remove(&key);
        } else {
            self.terms.insert(key, v);
        }
    }

    pub fn coeff(&self, exps: [usize; 3]) -> Elem {
        let total = exps.iter().sum::<usize>();
        self.terms.get(&(total, exps)).cloned().unwrap_or_default()
    }

    /// Exponents of the first monomial (by total degree, then lexicographic)
    /// where the two series differ.
    pub fn first_difference(&self, other: &TrivariateSeries) -> Option<[usize; 3]> {
        let mut keys: Vec<&(usize, [usize; 3])> =
            self.terms.keys().chain(other.terms.keys()).collect();
        keys.sort();
        keys.dedup();
        keys.into_iter()
            .find(|k| self.terms.get(k) != other.terms.get(k))
            .map(|k| k.1)
    }
}

/// Binomial coefficient as an exact integer.
pub fn binomial(n: u64, k: u64) -> BigInt {
    if k > n {
        return BigInt::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigInt::one();
    for i in 0..k {
        acc = acc * BigInt::from(n - i) / BigInt::from(i + 1);
    }
    acc
}
