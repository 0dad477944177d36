//! Algebraic model of the action-filtered equivariant tower of a Liouville
//! manifold: a constant block carrying the homology of `M` plus one local
//! block per Reeb orbit below the slope. Also the pipelines that read
//! `H_*(M; Z)` and `KU_*(M)` back off completed Tate values.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::fgl::{catalog, FglSpec, FormalGroupLaw};
use crate::ring::{factor, is_prime, parse_rational, RingDescriptor};
use crate::tate::{
    orbit_local_module, tate_of_module, tate_of_tower, CoefficientModule, CyclicSummand, FglModule,
    ModuleSummand, ModuleTower, Parity, TateValue,
};

/// An exact rational read from JSON as an integer, a decimal, or `"a/b"`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Exact(pub BigRational);

impl Exact {
    pub fn integer(n: i64) -> Exact {
        Exact(BigRational::from_integer(BigInt::from(n)))
    }
}

impl fmt::Display for Exact {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_integer() {
            write!(f, "{}", self.0.numer())
        } else {
            write!(f, "{}/{}", self.0.numer(), self.0.denom())
        }
    }
}

impl Serialize for Exact {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self.0.is_integer().then(|| self.0.numer().to_i64()).flatten() {
            Some(n) => s.serialize_i64(n),
            None => s.serialize_str(&self.to_string()),
        }
    }
}

impl<'de> Deserialize<'de> for Exact {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Exact, D::Error> {
        let v = serde_json::Value::deserialize(d)?;
        parse_exact(&v)
            .map(Exact)
            .ok_or_else(|| serde::de::Error::custom(format!("not an exact rational: {v}")))
    }
}

fn parse_exact(v: &serde_json::Value) -> Option<BigRational> {
    match v {
        serde_json::Value::Number(n) => match n.as_i64() {
            Some(i) => Some(BigRational::from_integer(BigInt::from(i))),
            None => parse_decimal(&n.to_string()),
        },
        serde_json::Value::String(s) => parse_rational(s).or_else(|| parse_decimal(s)),
        _ => None,
    }
}

fn parse_decimal(s: &str) -> Option<BigRational> {
    let s = s.trim();
    let (mantissa, exp) = match s.find(['e', 'E']) {
        Some(i) => (&s[..i], s[i + 1..].parse::<i32>().ok()?),
        None => (s, 0),
    };
    let (int, frac) = mantissa.split_once('.').unwrap_or((mantissa, ""));
    let digits: BigInt = format!("{int}{frac}").parse().ok()?;
    let scale = exp - frac.len() as i32;
    let ten = BigRational::from_integer(BigInt::from(10));
    Some(BigRational::from_integer(digits) * ten_pow(&ten, scale))
}

fn ten_pow(ten: &BigRational, e: i32) -> BigRational {
    let p = num_traits::pow::pow(ten.clone(), e.unsigned_abs() as usize);
    if e < 0 {
        p.recip()
    } else {
        p
    }
}

/// `(p, l, multiplicity)`: that many copies of `Z/p^l`.
pub type Torsion = (u64, u32, u32);

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HomologyDegree {
    pub degree: u32,
    #[serde(default)]
    pub free: u32,
    #[serde(default)]
    pub torsion: Vec<Torsion>,
}

/// A graded finitely generated abelian group, one entry per degree.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Homology(pub Vec<HomologyDegree>);

impl Homology {
    /// Merged, sorted, with empty degrees dropped.
    pub fn canonical(&self) -> Homology {
        let mut free: BTreeMap<u32, u32> = BTreeMap::new();
        let mut tors: BTreeMap<(u32, u64, u32), u32> = BTreeMap::new();
        for h in &self.0 {
            *free.entry(h.degree).or_default() += h.free;
            for &(p, l, mult) in &h.torsion {
                *tors.entry((h.degree, p, l)).or_default() += mult;
            }
        }
        Homology::from_parts(&free, &tors)
    }

    fn from_parts(free: &BTreeMap<u32, u32>, tors: &BTreeMap<(u32, u64, u32), u32>) -> Homology {
        let mut degrees: Vec<u32> = free.iter().filter(|(_, r)| **r > 0).map(|(d, _)| *d).collect();
        degrees.extend(tors.iter().filter(|(_, m)| **m > 0).map(|((d, _, _), _)| *d));
        degrees.sort_unstable();
        degrees.dedup();
        Homology(
            degrees
                .into_iter()
                .map(|d| HomologyDegree {
                    degree: d,
                    free: free.get(&d).copied().unwrap_or(0),
                    torsion: tors
                        .range((d, 0, 0)..=(d, u64::MAX, u32::MAX))
                        .filter(|(_, m)| **m > 0)
                        .map(|(&(_, p, l), &m)| (p, l, m))
                        .collect(),
                })
                .collect(),
        )
    }

    pub fn free_ranks(&self) -> BTreeMap<u32, u32> {
        let mut out = BTreeMap::new();
        for h in &self.canonical().0 {
            if h.free > 0 {
                out.insert(h.degree, h.free);
            }
        }
        out
    }

    /// The part of the group that is free or `p`-primary.
    pub fn p_local(&self, p: u64) -> Homology {
        let h = Homology(
            self.0
                .iter()
                .map(|d| HomologyDegree {
                    degree: d.degree,
                    free: d.free,
                    torsion: d.torsion.iter().filter(|t| t.0 == p).copied().collect(),
                })
                .collect(),
        );
        h.canonical()
    }

    pub fn is_zero(&self) -> bool {
        self.canonical().0.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrbitDatum {
    pub length: Exact,
    pub multiplicity: u32,
    pub parity: Parity,
    /// Degree shift of the orbit block.
    #[serde(default, skip_serializing_if = "is_zero_shift")]
    pub shift: i64,
}

fn is_zero_shift(s: &i64) -> bool {
    *s == 0
}

impl OrbitDatum {
    pub fn new(length: Exact, multiplicity: u32, parity: Parity) -> OrbitDatum {
        OrbitDatum {
            length,
            multiplicity,
            parity,
            shift: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifoldModel {
    pub dim: u32,
    #[serde(default)]
    pub weinstein: bool,
    pub homology: Homology,
    #[serde(default)]
    pub orbits: Vec<OrbitDatum>,
    #[serde(default)]
    pub slopes: Vec<Exact>,
}

impl ManifoldModel {
    pub fn from_json(text: &str) -> Result<ManifoldModel> {
        let m: ManifoldModel =
            serde_json::from_str(text).map_err(|e| Error::InvalidModel(e.to_string()))?;
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidModel(msg));
        if self.dim % 2 == 1 {
            return bad(format!("dimension {} is odd", self.dim));
        }
        let half = self.dim / 2;
        for h in &self.homology.0 {
            if h.degree > self.dim {
                return bad(format!("homology degree {} exceeds dimension {}", h.degree, self.dim));
            }
            if self.weinstein && h.degree > half && (h.free > 0 || !h.torsion.is_empty()) {
                return bad(format!("Weinstein model has homology in degree {} > {half}", h.degree));
            }
            for &(p, l, mult) in &h.torsion {
                if !is_prime(p) {
                    return bad(format!("torsion prime {p} is not prime"));
                }
                if l == 0 || mult == 0 {
                    return bad("torsion exponents and multiplicities must be positive".into());
                }
                if p.checked_pow(l).is_none() {
                    return bad(format!("torsion order {p}^{l} is too large"));
                }
                if self.weinstein && h.degree == half {
                    return bad(format!("Weinstein model has torsion in the middle degree {half}"));
                }
            }
        }
        validate_orbits(&self.orbits, &self.slopes)
    }

    /// The slopes, or a single slope above every orbit when none are given.
    pub fn effective_slopes(&self) -> Vec<Exact> {
        if !self.slopes.is_empty() {
            return self.slopes.clone();
        }
        let top = self
            .orbits
            .iter()
            .map(|o| o.length.0.clone())
            .max()
            .unwrap_or_else(BigRational::zero);
        vec![Exact(top + BigRational::one())]
    }
}

fn validate_orbits(orbits: &[OrbitDatum], slopes: &[Exact]) -> Result<()> {
    let mut lengths = Vec::new();
    for o in orbits {
        if !o.length.0.is_positive() {
            return Err(Error::NonpositiveLength);
        }
        if o.multiplicity == 0 {
            return Err(Error::InvalidModel("orbit multiplicity must be positive".into()));
        }
        if o.parity == Parity::Bad && o.multiplicity % 2 == 1 {
            return Err(Error::BadOrbitOddMultiplicity(o.multiplicity));
        }
        lengths.push(&o.length);
    }
    lengths.sort();
    if lengths.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::InvalidModel("orbit lengths must be distinct".into()));
    }
    if slopes.iter().any(|a| !a.0.is_positive()) {
        return Err(Error::InvalidModel("slopes must be positive".into()));
    }
    if slopes.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidModel("slopes must be strictly increasing".into()));
    }
    if let Some(a) = slopes.iter().find(|a| lengths.contains(a)) {
        return Err(Error::SlopeHitsOrbitLength(a.to_string()));
    }
    Ok(())
}

/// `l^2/2 + l`.
pub fn orbit_action(length: &BigRational) -> Result<BigRational> {
    if !length.is_positive() {
        return Err(Error::NonpositiveLength);
    }
    let two = BigRational::from_integer(BigInt::from(2));
    Ok(length * length / two + length)
}

/// `2(p^m - 1)`, the period of `K(m)` at `p`.
pub fn morava_period(p: u64, height: u32) -> i64 {
    crate::fgl::height_degree(p, height)
}

/// `2(p^m - 1) > dim`, or `4(p^m - 1) > dim` for Weinstein manifolds.
pub fn degeneration_holds(p: u64, height: u32, dim: u32, weinstein: bool) -> bool {
    let period = morava_period(p, height);
    let bound = if weinstein { 2 * period } else { period };
    bound > dim as i64
}

pub fn check_degeneration(p: u64, height: u32, dim: u32, weinstein: bool) -> Result<()> {
    if degeneration_holds(p, height, dim, weinstein) {
        Ok(())
    } else {
        Err(Error::DegenerationHypothesisFails {
            period: morava_period(p, height),
            dim,
            weinstein,
        })
    }
}

/// Smallest height at which the Atiyah-Hirzebruch argument applies.
pub fn minimal_height(p: u64, dim: u32, weinstein: bool) -> u32 {
    (1..).find(|&m| degeneration_holds(p, m, dim, weinstein)).expect("exists")
}

/// `H_*(M; B)` for the base `B` of `ring`, by universal coefficients. Free
/// ranks stay free `R*`-summands; `Z/p^l` over `Z/n` gives `Z/gcd(p^l, n)`
/// in degrees `d` and `d + 1`.
pub fn coefficient_homology(h: &Homology, ring: &RingDescriptor) -> CoefficientModule {
    let n = match ring.base() {
        RingDescriptor::IntegersMod { n } => Some(*n),
        RingDescriptor::PAdicTruncated { p, precision } => p.checked_pow(*precision),
        _ => None,
    };
    let rational = matches!(ring.base(), RingDescriptor::Rationals);
    let mut out = Vec::new();
    for d in &h.canonical().0 {
        let deg = d.degree as i64;
        out.extend(std::iter::repeat_n(CyclicSummand::new(0, deg), d.free as usize));
        if rational {
            continue;
        }
        for &(p, l, mult) in &d.torsion {
            let order = p.pow(l);
            match n {
                None => out.extend(std::iter::repeat_n(CyclicSummand::new(order, deg), mult as usize)),
                Some(n) => {
                    let g = gcd(order, n);
                    if g > 1 {
                        for _ in 0..mult {
                            out.push(CyclicSummand::new(g, deg));
                            out.push(CyclicSummand::new(g, deg + 1));
                        }
                    }
                }
            }
        }
    }
    CoefficientModule { summands: out }.canonical()
}

fn gcd(a: u64, b: u64) -> u64 {
    num_integer::gcd(a, b)
}

/// `H_*(M; K_{p^k}(m)*)`: free rank gives `Z/p^k` in degree `d`, a `Z/p^l`
/// gives `Z/p^min(l,k)` in degrees `d` and `d + 1`, all degrees taken
/// modulo `2(p^m - 1)`.
pub fn regrade_poincare(m: &ManifoldModel, p: u64, k: u32, height: u32) -> Result<CoefficientModule> {
    check_degeneration(p, height, m.dim, m.weinstein)?;
    let period = morava_period(p, height);
    let pk = p.pow(k);
    let mut out = Vec::new();
    for d in &m.homology.canonical().0 {
        let deg = d.degree as i64;
        for _ in 0..d.free {
            out.push(CyclicSummand::new(pk, deg.rem_euclid(period)));
        }
        for &(q, l, mult) in &d.torsion {
            if q != p {
                continue;
            }
            let order = p.pow(l.min(k));
            for _ in 0..mult {
                out.push(CyclicSummand::new(order, deg.rem_euclid(period)));
                out.push(CyclicSummand::new(order, (deg + 1).rem_euclid(period)));
            }
        }
    }
    Ok(CoefficientModule { summands: out }.canonical())
}

/// The slope-indexed tower: level `i` holds the constant block and a block
/// for every orbit shorter than the `i`-th slope.
#[derive(Clone, Debug)]
pub struct SymplecticTower {
    pub manifold: ManifoldModel,
    pub slopes: Vec<Exact>,
    pub orbits: Vec<OrbitDatum>,
    pub tower: ModuleTower,
}

impl SymplecticTower {
    /// Indices (into `orbits`) of the orbit blocks present at each level.
    pub fn level_orbits(&self) -> Vec<Vec<usize>> {
        self.slopes
            .iter()
            .map(|a| {
                let mut idx: Vec<usize> = (0..self.orbits.len()).filter(|&i| self.orbits[i].length < *a).collect();
                idx.sort_by(|&x, &y| self.orbits[x].length.cmp(&self.orbits[y].length));
                idx
            })
            .collect()
    }

    pub fn constant_block(&self) -> FglModule {
        let level = &self.tower.levels()[0];
        FglModule {
            fgl: level.fgl.clone(),
            summands: level.summands.iter().filter(|s| s.constant).cloned().collect(),
        }
    }
}

pub fn build_sh_tower(
    m: &ManifoldModel,
    orbits: &[OrbitDatum],
    slopes: &[Exact],
    f: &Arc<FormalGroupLaw>,
) -> Result<SymplecticTower> {
    let constant = coefficient_homology(&m.homology, f.ring().descriptor());
    build_tower_with_constant(m, constant, orbits, slopes, f)
}

fn build_tower_with_constant(
    m: &ManifoldModel,
    constant: CoefficientModule,
    orbits: &[OrbitDatum],
    slopes: &[Exact],
    f: &Arc<FormalGroupLaw>,
) -> Result<SymplecticTower> {
    validate_orbits(orbits, slopes)?;
    if slopes.is_empty() {
        return Err(Error::InvalidModel("at least one slope is needed".into()));
    }
    let mut sorted: Vec<OrbitDatum> = orbits.to_vec();
    sorted.sort_by(|a, b| a.length.cmp(&b.length));
    let blocks = sorted
        .iter()
        .map(|o| {
            let module = orbit_local_module(f, o.multiplicity, o.parity)?;
            Ok(module.summands[0].clone().shifted(o.shift))
        })
        .collect::<Result<Vec<ModuleSummand>>>()?;
    let constant = ModuleSummand::free(constant).tagged_constant();
    let mut levels = Vec::new();
    for a in slopes {
        let count = sorted.iter().take_while(|o| o.length < *a).count();
        let mut summands = vec![constant.clone()];
        summands.extend(blocks[..count].iter().cloned());
        levels.push(FglModule::new(f, summands)?);
    }
    let maps = levels[..levels.len() - 1]
        .iter()
        .map(|l| (0..l.summands.len()).map(Some).collect())
        .collect();
    Ok(SymplecticTower {
        manifold: m.clone(),
        slopes: slopes.to_vec(),
        orbits: sorted,
        tower: ModuleTower::new(levels, maps)?,
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ShTate {
    #[serde(flatten)]
    pub value: TateValue,
    pub stabilization_level: usize,
    /// The tower's value equals that of the constant block alone.
    pub theorem_check: bool,
}

pub fn sh_tate(t: &SymplecticTower, m_max: u32) -> Result<ShTate> {
    let limit = tate_of_tower(&t.tower, m_max)?;
    let constant = tate_of_module(&t.constant_block(), m_max)?;
    Ok(ShTate {
        theorem_check: limit.value == constant,
        value: limit.value,
        stabilization_level: limit.stabilization_level,
    })
}

/// `sh_tate` of a model using its own orbits and slopes.
pub fn model_sh_tate(m: &ManifoldModel, f: &Arc<FormalGroupLaw>, m_max: u32) -> Result<ShTate> {
    let t = build_sh_tower(m, &m.orbits, &m.effective_slopes(), f)?;
    sh_tate(&t, m_max)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MoravaLevel {
    pub k: u32,
    pub value: TateValue,
}

/// Completed Tate values for `K_{p^k}(m)`, one per `k`, through the
/// regraded constant block. The model's orbits ride along and must die.
pub fn morava_tate_tower(
    m: &ManifoldModel,
    p: u64,
    height: u32,
    ks: &[u32],
    order: usize,
    m_max: u32,
) -> Result<Vec<MoravaLevel>> {
    check_degeneration(p, height, m.dim, m.weinstein)?;
    ks.iter()
        .map(|&k| {
            let spec = FglSpec::IntegralMorava {
                p,
                n: height,
                precision: k,
            };
            let f = catalog().get(&spec, order)?;
            let constant = regrade_poincare(m, p, k, height)?;
            let t = build_tower_with_constant(m, constant, &m.orbits, &m.effective_slopes(), &f)?;
            let sh = sh_tate(&t, m_max)?;
            if !sh.theorem_check {
                return Err(Error::InconsistentPattern(format!("orbit blocks survived at k = {k}")));
            }
            Ok(MoravaLevel { k, value: sh.value })
        })
        .collect()
}

fn summand_counts(v: &TateValue) -> BTreeMap<(i64, u64), u32> {
    let mut out = BTreeMap::new();
    for s in v.summands() {
        *out.entry((s.degree, s.order)).or_default() += 1;
    }
    out
}

/// Invert the universal-coefficient pattern of a `K_{p^k}(m)` tower.
///
/// The top level determines everything: order `p^K` summands are free
/// ranks, and a `Z/p^l` in degree `d` shows up in `d` and `d + 1`, solved
/// upward from degree 0. Every level is then replayed forward and must match.
/// Torsion of exponent at least `K` is indistinguishable from free rank
/// here; pass the free ranks to [`recover_p_local_with_ranks`] to detect it.
pub fn recover_p_local(levels: &[MoravaLevel], p: u64, height: u32, dim: u32) -> Result<Homology> {
    recover_p_local_with_ranks(levels, p, height, dim, None)
}

pub fn recover_p_local_with_ranks(
    levels: &[MoravaLevel],
    p: u64,
    height: u32,
    dim: u32,
    ranks: Option<&BTreeMap<u32, u32>>,
) -> Result<Homology> {
    let mut levels = levels.to_vec();
    levels.sort_by_key(|l| l.k);
    if levels.len() < 2 || levels.windows(2).any(|w| w[0].k == w[1].k) {
        return Err(Error::NonStabilizing(format!(
            "need at least two distinct levels at p = {p}, got {}",
            levels.len()
        )));
    }
    let (prev, top) = (&levels[levels.len() - 2], &levels[levels.len() - 1]);
    if top.k != prev.k + 1 {
        return Err(Error::NonStabilizing(format!(
            "top levels k = {} and k = {} are not consecutive",
            prev.k, top.k
        )));
    }
    let period = morava_period(p, height);
    let kmax = top.k;
    let pk = p
        .checked_pow(kmax)
        .ok_or_else(|| Error::InvalidArgument(format!("p^k = {p}^{kmax} is too large")))?;
    let exponent_of = |order: u64| -> Option<u32> {
        let mut e = 0;
        let mut o = order;
        while o > 1 && o.is_multiple_of(p) {
            o /= p;
            e += 1;
        }
        (o == 1 && e > 0).then_some(e)
    };
    let mut free: BTreeMap<u32, u32> = BTreeMap::new();
    // counts[l][d]: number of order p^l summands in degree d at the top level
    let mut counts: BTreeMap<u32, BTreeMap<i64, i64>> = BTreeMap::new();
    for ((d, order), c) in summand_counts(&top.value) {
        if !(0..period).contains(&d) {
            return Err(Error::InconsistentPattern(format!("degree {d} outside [0, {period})")));
        }
        let Some(l) = exponent_of(order) else {
            return Err(Error::InconsistentPattern(format!("order {order} is not a power of {p}")));
        };
        if order == pk {
            *free.entry(d as u32).or_default() += c;
        } else if l > kmax {
            return Err(Error::InconsistentPattern(format!("order {order} exceeds p^{kmax}")));
        } else {
            *counts.entry(l).or_default().entry(d).or_default() += c as i64;
        }
    }
    let unstable = |d: u32| {
        Error::NonStabilizing(format!(
            "order {p}^{kmax} summands in degree {d} exceed the free rank: torsion of exponent >= {kmax}, extend the tower"
        ))
    };
    match ranks {
        Some(ranks) => {
            for (&d, &c) in &free {
                let r = ranks.get(&d).copied().unwrap_or(0);
                if c > r {
                    return Err(unstable(d));
                }
            }
            if let Some((&d, _)) = ranks.iter().find(|(d, r)| free.get(d).copied().unwrap_or(0) < **r) {
                return Err(Error::InconsistentPattern(format!("too few order {p}^{kmax} summands in degree {d}")));
            }
        }
        None => {
            if let Some((&d, _)) = free.iter().find(|(d, _)| **d > dim) {
                return Err(unstable(d));
            }
        }
    }
    let mut tors: BTreeMap<(u32, u64, u32), u32> = BTreeMap::new();
    for (l, by_degree) in &counts {
        let mut below = 0i64;
        for d in 0..period {
            let here = by_degree.get(&d).copied().unwrap_or(0) - below;
            if here < 0 {
                return Err(Error::InconsistentPattern(format!(
                    "Z/{p}^{l} in degree {d} has no partner in degree {}",
                    d - 1
                )));
            }
            if here > 0 && d > dim as i64 {
                return Err(Error::InconsistentPattern(format!(
                    "Z/{p}^{l} in degree {d} has no partner in degree {}",
                    d + 1
                )));
            }
            if here > 0 {
                tors.insert((d as u32, p, *l), here as u32);
            }
            below = here;
        }
    }
    let recovered = Homology::from_parts(&free, &tors);
    let probe = ManifoldModel {
        dim,
        weinstein: false,
        homology: recovered.clone(),
        orbits: Vec::new(),
        slopes: Vec::new(),
    };
    for level in &levels {
        let expected = regrade_poincare_unchecked(&probe, p, level.k, height);
        let observed = summand_counts(&level.value);
        let mut want = BTreeMap::new();
        for s in &expected.summands {
            *want.entry((s.degree, s.order)).or_default() += 1u32;
        }
        if want != observed {
            return Err(Error::InconsistentPattern(format!(
                "level k = {} does not match the group recovered from k = {kmax}",
                level.k
            )));
        }
    }
    Ok(recovered)
}

fn regrade_poincare_unchecked(m: &ManifoldModel, p: u64, k: u32, height: u32) -> CoefficientModule {
    let mut probe = m.clone();
    probe.dim = 0;
    probe.weinstein = false;
    regrade_poincare(&probe, p, k, height).expect("degeneration holds for dim 0")
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrimeTower {
    pub p: u64,
    pub height: u32,
    pub levels: Vec<MoravaLevel>,
}

/// What the recovery pipeline is allowed to see: Tate values only.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlindedData {
    pub dim: u32,
    pub rational: TateValue,
    pub primes: Vec<PrimeTower>,
}

/// Forward pipeline: the rational Tate value and `K_{p^k}(m)` towers for
/// `k = 1..=kmax` at each listed prime.
pub fn blind(m: &ManifoldModel, primes: &[u64], kmax: u32, order: usize, m_max: u32) -> Result<BlindedData> {
    m.validate()?;
    let hq = catalog().get(&FglSpec::Additive { ring: RingDescriptor::Rationals }, order)?;
    let rational = model_sh_tate(m, &hq, m_max)?.value;
    let ks: Vec<u32> = (1..=kmax).collect();
    let primes = primes
        .iter()
        .map(|&p| {
            if !is_prime(p) {
                return Err(Error::InvalidArgument(format!("{p} is not prime")));
            }
            let height = minimal_height(p, m.dim, m.weinstein);
            Ok(PrimeTower {
                p,
                height,
                levels: morava_tate_tower(m, p, height, &ks, order, m_max)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BlindedData {
        dim: m.dim,
        rational,
        primes,
    })
}

/// Free ranks from the rational value, `p`-torsion from each prime's tower.
pub fn recover_integral_homology(data: &BlindedData) -> Result<Homology> {
    let mut free: BTreeMap<u32, u32> = BTreeMap::new();
    for s in data.rational.summands() {
        if s.order != 0 || s.degree < 0 || s.degree > data.dim as i64 {
            return Err(Error::InconsistentPattern(format!(
                "rational value has summand of order {} in degree {}",
                s.order, s.degree
            )));
        }
        *free.entry(s.degree as u32).or_default() += 1;
    }
    let mut tors: BTreeMap<(u32, u64, u32), u32> = BTreeMap::new();
    for t in &data.primes {
        let local = recover_p_local_with_ranks(&t.levels, t.p, t.height, data.dim, Some(&free))?;
        for d in &local.0 {
            for &(p, l, m) in &d.torsion {
                *tors.entry((d.degree, p, l)).or_default() += m;
            }
        }
    }
    Ok(Homology::from_parts(&free, &tors))
}

/// A finitely generated abelian group `Z^free + torsion`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AbelianGroup {
    #[serde(default)]
    pub free: u32,
    #[serde(default)]
    pub torsion: Vec<Torsion>,
}

impl AbelianGroup {
    /// Primary decomposition, sorted and merged.
    pub fn canonical(&self) -> AbelianGroup {
        let mut tors: BTreeMap<(u64, u32), u32> = BTreeMap::new();
        for &(p, l, m) in &self.torsion {
            if m > 0 && l > 0 {
                *tors.entry((p, l)).or_default() += m;
            }
        }
        AbelianGroup {
            free: self.free,
            torsion: tors.into_iter().map(|((p, l), m)| (p, l, m)).collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for &(p, l, m) in &self.torsion {
            if !is_prime(p) || l == 0 || m == 0 || p.checked_pow(l).is_none() {
                return Err(Error::InvalidModel(format!("bad torsion entry [{p}, {l}, {m}]")));
            }
        }
        Ok(())
    }

    fn cyclic_orders(&self) -> Vec<u64> {
        self.canonical()
            .torsion
            .iter()
            .flat_map(|&(p, l, m)| std::iter::repeat_n(p.pow(l), m as usize))
            .collect()
    }
}

/// `A^ = lim A/nA`: free ranks become `Z^`, finite parts are unchanged.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompletedGroup {
    pub zhat_rank: u32,
    pub torsion: Vec<Torsion>,
}

pub fn completion_of_fg_group(g: &AbelianGroup) -> CompletedGroup {
    let c = g.canonical();
    CompletedGroup {
        zhat_rank: c.free,
        torsion: c.torsion,
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CompletedPiece {
    /// The profinite integers.
    Zhat,
    /// An uncompleted `Z`; never produced, rejected on input.
    Z,
    Cyclic { order: u64 },
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CompletedSummand {
    pub degree: i64,
    #[serde(flatten)]
    pub piece: CompletedPiece,
}

/// Completed Tate value for `KU`, 2-periodic: summands in degrees 0 and 1.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompletedKuModule {
    pub summands: Vec<CompletedSummand>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KuGroups {
    pub ku0: AbelianGroup,
    pub ku1: AbelianGroup,
}

impl KuGroups {
    pub fn canonical(&self) -> KuGroups {
        KuGroups {
            ku0: self.ku0.canonical(),
            ku1: self.ku1.canonical(),
        }
    }
}

/// `(KU_0 + KU_1)^((b^-1 u))`, recorded by parity.
pub fn ku_completed_tate(groups: &KuGroups) -> CompletedKuModule {
    let mut summands = Vec::new();
    for (degree, g) in [(0i64, &groups.ku0), (1, &groups.ku1)] {
        let c = completion_of_fg_group(g);
        for _ in 0..c.zhat_rank {
            summands.push(CompletedSummand { degree, piece: CompletedPiece::Zhat });
        }
        for order in g.cyclic_orders() {
            summands.push(CompletedSummand { degree, piece: CompletedPiece::Cyclic { order } });
        }
    }
    summands.sort();
    CompletedKuModule { summands }
}

/// Read `KU_0`, `KU_1` back: `Z^` summands give the free rank, finite
/// cyclic summands the torsion.
pub fn recover_ku(module: &CompletedKuModule) -> Result<KuGroups> {
    let mut groups = [AbelianGroup::default(), AbelianGroup::default()];
    for s in &module.summands {
        let g = match s.degree {
            0 => &mut groups[0],
            1 => &mut groups[1],
            d => return Err(Error::MalformedCompletedModule(format!("degree {d} is not 0 or 1"))),
        };
        match s.piece {
            CompletedPiece::Zhat => g.free += 1,
            CompletedPiece::Z => {
                return Err(Error::MalformedCompletedModule(
                    "free summand is not profinitely completed".into(),
                ))
            }
            CompletedPiece::Cyclic { order } => {
                if order < 2 {
                    return Err(Error::MalformedCompletedModule(format!("cyclic order {order}")));
                }
                for (p, l) in factor(order) {
                    g.torsion.push((p, l, 1));
                }
            }
        }
    }
    let [ku0, ku1] = groups;
    Ok(KuGroups { ku0, ku1 }.canonical())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fgl::DEFAULT_PADIC_PRECISION;
    use proptest::prelude::*;

    fn model(json: &str) -> ManifoldModel {
        ManifoldModel::from_json(json).unwrap()
    }

    fn law(name: &str) -> Arc<FormalGroupLaw> {
        catalog().by_name(name, 24, DEFAULT_PADIC_PRECISION).unwrap()
    }

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    #[test]
    fn orbit_action_examples() {
        assert_eq!(orbit_action(&q(2, 1)).unwrap(), q(4, 1));
        assert_eq!(orbit_action(&q(1, 1)).unwrap(), q(3, 2));
        assert!(matches!(orbit_action(&q(0, 1)), Err(Error::NonpositiveLength)));
    }

    #[test]
    fn exact_lengths_parse() {
        let o: OrbitDatum = serde_json::from_str(r#"{"length":"3/2","multiplicity":2,"parity":"bad"}"#).unwrap();
        assert_eq!(o.length.0, q(3, 2));
        let o: OrbitDatum = serde_json::from_str(r#"{"length":1.25,"multiplicity":1,"parity":"good"}"#).unwrap();
        assert_eq!(o.length.0, q(5, 4));
        assert_eq!(serde_json::to_string(&Exact(q(3, 2))).unwrap(), r#""3/2""#);
        assert_eq!(serde_json::to_string(&Exact::integer(4)).unwrap(), "4");
    }

    #[test]
    fn model_validation() {
        assert!(matches!(
            ManifoldModel::from_json(r#"{"dim":3,"homology":[]}"#),
            Err(Error::InvalidModel(_))
        ));
        assert!(matches!(
            ManifoldModel::from_json(r#"{"dim":4,"homology":[{"degree":5,"free":1}]}"#),
            Err(Error::InvalidModel(_))
        ));
        assert!(matches!(
            ManifoldModel::from_json(r#"{"dim":4,"homology":[{"degree":1,"torsion":[[4,1,1]]}]}"#),
            Err(Error::InvalidModel(_))
        ));
        assert!(matches!(
            ManifoldModel::from_json(r#"{"dim":4,"homology":[],"orbits":[{"length":1,"multiplicity":1,"parity":"good"}],"slopes":[1]}"#),
            Err(Error::SlopeHitsOrbitLength(_))
        ));
        assert!(matches!(
            ManifoldModel::from_json(r#"{"dim":4,"homology":[],"orbits":[{"length":1,"multiplicity":3,"parity":"bad"}]}"#),
            Err(Error::BadOrbitOddMultiplicity(3))
        ));
        assert!(matches!(
            ManifoldModel::from_json(r#"{"dim":4,"homology":[],"extra":1}"#),
            Err(Error::InvalidModel(_))
        ));
        assert!(matches!(
            ManifoldModel::from_json(r#"{"dim":4,"weinstein":true,"homology":[{"degree":2,"torsion":[[2,1,1]]}]}"#),
            Err(Error::InvalidModel(_))
        ));
    }

    #[test]
    fn regrade_examples() {
        let point = model(r#"{"dim":0,"homology":[{"degree":0,"free":1}]}"#);
        assert_eq!(regrade_poincare(&point, 2, 1, 1).unwrap().summands, vec![CyclicSummand::new(2, 0)]);
        let m = model(r#"{"dim":6,"homology":[{"degree":1,"torsion":[[2,2,1]]}]}"#);
        assert_eq!(
            regrade_poincare(&m, 2, 1, 3).unwrap().summands,
            vec![CyclicSummand::new(2, 1), CyclicSummand::new(2, 2)]
        );
        assert!(matches!(
            regrade_poincare(&m, 2, 1, 1),
            Err(Error::DegenerationHypothesisFails { period: 2, dim: 6, weinstein: false })
        ));
    }

    #[test]
    fn degeneration_boundaries() {
        assert!(!degeneration_holds(2, 2, 6, false));
        assert!(degeneration_holds(2, 2, 6, true));
        assert!(degeneration_holds(2, 3, 8, false));
        assert!(!degeneration_holds(5, 1, 8, false));
        assert!(degeneration_holds(5, 1, 8, true));
        assert_eq!(minimal_height(2, 8, false), 3);
        assert_eq!(minimal_height(5, 8, false), 2);
        assert_eq!(minimal_height(3, 4, false), 2);
        assert_eq!(minimal_height(3, 2, false), 1);
    }

    #[test]
    fn tower_levels_follow_slopes() {
        let m = model(
            r#"{"dim":2,"homology":[{"degree":0,"free":1}],
                "orbits":[{"length":1,"multiplicity":1,"parity":"good"},{"length":3,"multiplicity":3,"parity":"good"}],
                "slopes":[2,4]}"#,
        );
        let t = build_sh_tower(&m, &m.orbits, &m.slopes, &law("hz")).unwrap();
        assert_eq!(t.tower.levels()[0].summands.len(), 2);
        assert_eq!(t.tower.levels()[1].summands.len(), 3);
        assert_eq!(t.level_orbits(), vec![vec![0], vec![0, 1]]);
        let empty = model(r#"{"dim":2,"homology":[{"degree":0,"free":1}]}"#);
        let t = build_sh_tower(&empty, &[], &[Exact::integer(1)], &law("hz")).unwrap();
        assert_eq!(t.tower.levels().len(), 1);
        assert_eq!(t.tower.levels()[0].summands.len(), 1);
    }

    #[test]
    fn sh_tate_examples() {
        let m = model(
            r#"{"dim":4,"homology":[{"degree":0,"free":1},{"degree":1,"torsion":[[2,1,1]]},{"degree":2,"free":2}],
                "orbits":[{"length":1,"multiplicity":2,"parity":"bad"},{"length":"5/2","multiplicity":3,"parity":"good"}],
                "slopes":[2,3,4]}"#,
        );
        let hf = model_sh_tate(&m, &law("hfp:2"), 24).unwrap();
        assert!(hf.value.is_zero() && hf.theorem_check);
        let hz = model_sh_tate(&m, &law("hz"), 24).unwrap();
        let hq = model_sh_tate(&m, &law("hq"), 24).unwrap();
        assert_eq!(hz, hq);
        assert_eq!(
            hz.value.summands(),
            &[CyclicSummand::new(0, 0), CyclicSummand::new(0, 2), CyclicSummand::new(0, 2)]
        );
        let k1 = model_sh_tate(&m, &law("honda:2:1"), 24).unwrap();
        assert!(k1.theorem_check);
        // period 2: degrees 0, 1 (from Z/2 in degree 1 -> 1, 2), 2
        assert_eq!(
            k1.value.summands(),
            &[CyclicSummand::new(2, 0), CyclicSummand::new(2, 0), CyclicSummand::new(2, 0), CyclicSummand::new(2, 0), CyclicSummand::new(2, 1)]
        );
    }

    #[test]
    fn morava_tower_patterns() {
        let m = model(r#"{"dim":2,"homology":[{"degree":0,"free":1},{"degree":1,"torsion":[[2,2,1]]}]}"#);
        let levels = morava_tate_tower(&m, 2, 2, &[1, 2, 3], 24, 24).unwrap();
        assert_eq!(levels[0].value.summands(), &[CyclicSummand::new(2, 0), CyclicSummand::new(2, 1), CyclicSummand::new(2, 2)]);
        assert_eq!(levels[2].value.summands(), &[CyclicSummand::new(8, 0), CyclicSummand::new(4, 1), CyclicSummand::new(4, 2)]);
    }

    #[test]
    fn p_local_recovery() {
        let m = model(r#"{"dim":2,"homology":[{"degree":0,"free":1},{"degree":1,"torsion":[[2,2,1],[2,1,1]]}]}"#);
        let levels = morava_tate_tower(&m, 2, 2, &[1, 2, 3, 4], 24, 24).unwrap();
        assert_eq!(recover_p_local(&levels, 2, 2, 2).unwrap(), m.homology.canonical());

        let zero: Vec<MoravaLevel> = (1..=3).map(|k| MoravaLevel { k, value: TateValue::Zero }).collect();
        assert!(recover_p_local(&zero, 2, 2, 2).unwrap().is_zero());

        let mut corrupt = levels.clone();
        if let TateValue::LaurentModule { summands, .. } = &mut corrupt[3].value {
            summands.retain(|s| !(s.order == 2 && s.degree == 2));
        }
        assert!(matches!(recover_p_local(&corrupt, 2, 2, 2), Err(Error::InconsistentPattern(_))));
        assert!(matches!(recover_p_local(&levels[..1], 2, 2, 2), Err(Error::NonStabilizing(_))));
    }

    #[test]
    fn large_exponents_need_a_longer_tower() {
        let m = model(r#"{"dim":2,"homology":[{"degree":0,"free":1},{"degree":1,"torsion":[[3,3,1]]}]}"#);
        let data = blind(&m, &[3], 3, 24, 24).unwrap();
        assert!(matches!(recover_integral_homology(&data), Err(Error::NonStabilizing(_))));
        let data = blind(&m, &[3], 4, 24, 24).unwrap();
        assert_eq!(recover_integral_homology(&data).unwrap(), m.homology.canonical());
        let top = model(r#"{"dim":2,"homology":[{"degree":2,"torsion":[[2,2,1]]}]}"#);
        let levels = morava_tate_tower(&top, 2, 2, &[1, 2], 24, 24).unwrap();
        assert!(matches!(recover_p_local(&levels, 2, 2, 2), Err(Error::NonStabilizing(_))));
    }

    #[test]
    fn integral_recovery_examples() {
        let m = model(
            r#"{"dim":4,"homology":[{"degree":0,"free":1},{"degree":1,"torsion":[[2,1,1],[3,2,1]]},{"degree":2,"free":2}]}"#,
        );
        let data = blind(&m, &[2, 3], 4, 24, 24).unwrap();
        assert_eq!(recover_integral_homology(&data).unwrap(), m.homology.canonical());
        let sphere = model(r#"{"dim":4,"homology":[{"degree":0,"free":1},{"degree":4,"free":1}]}"#);
        let data = blind(&sphere, &[], 4, 24, 24).unwrap();
        assert_eq!(recover_integral_homology(&data).unwrap(), sphere.homology.canonical());
    }

    #[test]
    fn completion_examples() {
        let z = AbelianGroup { free: 1, torsion: vec![] };
        assert_eq!(completion_of_fg_group(&z), CompletedGroup { zhat_rank: 1, torsion: vec![] });
        let g = AbelianGroup { free: 2, torsion: vec![(2, 1, 1)] };
        assert_eq!(completion_of_fg_group(&g), CompletedGroup { zhat_rank: 2, torsion: vec![(2, 1, 1)] });
        let groups = KuGroups {
            ku0: AbelianGroup { free: 2, torsion: vec![(3, 1, 1)] },
            ku1: AbelianGroup { free: 1, torsion: vec![] },
        };
        assert_eq!(recover_ku(&ku_completed_tate(&groups)).unwrap(), groups.canonical());
        assert_eq!(recover_ku(&CompletedKuModule::default()).unwrap(), KuGroups::default());
        let bad = CompletedKuModule { summands: vec![CompletedSummand { degree: 0, piece: CompletedPiece::Z }] };
        assert!(matches!(recover_ku(&bad), Err(Error::MalformedCompletedModule(_))));
        let bad = CompletedKuModule { summands: vec![CompletedSummand { degree: 2, piece: CompletedPiece::Zhat }] };
        assert!(matches!(recover_ku(&bad), Err(Error::MalformedCompletedModule(_))));
        // Z/12 is read back as its primary parts
        let m = CompletedKuModule { summands: vec![CompletedSummand { degree: 0, piece: CompletedPiece::Cyclic { order: 12 } }] };
        assert_eq!(recover_ku(&m).unwrap().ku0.torsion, vec![(2, 2, 1), (3, 1, 1)]);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn action_is_increasing(a in 1i64..1000, b in 1i64..1000, d in 1i64..50) {
            prop_assume!(a != b);
            let (x, y) = (q(a, d), q(b, d));
            prop_assert_eq!(x < y, orbit_action(&x).unwrap() < orbit_action(&y).unwrap());
        }

        #[test]
        fn level_membership_is_monotone(lens in proptest::collection::btree_set(1i64..40, 0..6), slopes in proptest::collection::btree_set(1i64..40, 1..5)) {
            let orbits: Vec<OrbitDatum> = lens.iter().map(|&l| OrbitDatum::new(Exact(q(2 * l + 1, 2)), 1, Parity::Good)).collect();
            let slopes: Vec<Exact> = slopes.iter().map(|&a| Exact::integer(a)).collect();
            let m = model(r#"{"dim":2,"homology":[{"degree":0,"free":1}]}"#);
            let t = build_sh_tower(&m, &orbits, &slopes, &law("hz")).unwrap();
            let lv = t.level_orbits();
            for w in lv.windows(2) {
                prop_assert!(w[0].iter().all(|i| w[1].contains(i)));
            }
        }
    }
}
