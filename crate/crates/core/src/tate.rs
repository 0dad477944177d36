//! Modules over `R*[[u]]` built from cyclic summands, and the completed Tate
//! functor: invert every `[m](u)`, complete, and take the limit over a tower.

use std::collections::BTreeSet;
use std::sync::Arc;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fgl::{FglDefinition, FglSpec, FormalGroupLaw};
use crate::ring::{factor, Ring, RingDescriptor};
use crate::series::GradedSeries;

/// Default bound on the multiples `m` in `[m](u)` that get inverted.
pub const DEFAULT_M_MAX: u32 = 24;

/// A cyclic summand `R*/(order)` placed in `degree`; order 0 means free.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CyclicSummand {
    pub order: u64,
    pub degree: i64,
}

impl CyclicSummand {
    pub fn new(order: u64, degree: i64) -> CyclicSummand {
        CyclicSummand { order, degree }
    }
}

/// A finitely generated graded `R*`-module as a list of cyclic summands.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoefficientModule {
    pub summands: Vec<CyclicSummand>,
}

impl CoefficientModule {
    /// `R*` in degree 0.
    pub fn unit() -> CoefficientModule {
        CoefficientModule::free(1, 0)
    }

    pub fn free(rank: usize, degree: i64) -> CoefficientModule {
        CoefficientModule {
            summands: vec![CyclicSummand::new(0, degree); rank],
        }
    }

    pub fn canonical(mut self) -> CoefficientModule {
        self.summands.sort_by_key(|s| (s.degree, s.order));
        self
    }
}

/// `cofactor * relator = [multiple](u)`: the relator divides an element of
/// the multiplicative set, so the cyclic module dies after localization.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Annihilator {
    pub multiple: u32,
    pub cofactor: GradedSeries,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SummandKind {
    Free,
    Cyclic {
        relator: GradedSeries,
        witness: Option<Annihilator>,
        /// The relator is a zero divisor in `R*[[u]]`, so the two-term
        /// presentation need not compute the cohomology.
        zero_divisor: bool,
    },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ModuleSummand {
    pub kind: SummandKind,
    pub coefficients: CoefficientModule,
    pub degree_shift: i64,
    /// Marks the constant block of a tower.
    pub constant: bool,
}

impl ModuleSummand {
    pub fn free(coefficients: CoefficientModule) -> ModuleSummand {
        ModuleSummand {
            kind: SummandKind::Free,
            coefficients,
            degree_shift: 0,
            constant: false,
        }
    }

    pub fn shifted(mut self, shift: i64) -> ModuleSummand {
        self.degree_shift = shift;
        self
    }

    pub fn tagged_constant(mut self) -> ModuleSummand {
        self.constant = true;
        self
    }
}

/// A direct sum of shifted cyclic `R*[[u]]`-modules.
#[derive(Clone, Debug)]
pub struct FglModule {
    pub fgl: Arc<FormalGroupLaw>,
    pub summands: Vec<ModuleSummand>,
}

impl PartialEq for FglModule {
    fn eq(&self, other: &Self) -> bool {
        (Arc::ptr_eq(&self.fgl, &other.fgl) || self.fgl.definition() == other.fgl.definition())
            && self.summands == other.summands
    }
}

impl FglModule {
    pub fn new(fgl: &Arc<FormalGroupLaw>, summands: Vec<ModuleSummand>) -> Result<FglModule> {
        for s in &summands {
            if let SummandKind::Cyclic { relator, .. } = &s.kind {
                if relator.ring() != fgl.ring() {
                    return Err(Error::RingMismatch {
                        left: fgl.ring().to_string(),
                        right: relator.ring().to_string(),
                    });
                }
            }
        }
        Ok(FglModule {
            fgl: fgl.clone(),
            summands,
        })
    }

    pub fn empty(fgl: &Arc<FormalGroupLaw>) -> FglModule {
        FglModule {
            fgl: fgl.clone(),
            summands: Vec::new(),
        }
    }

    pub fn with(mut self, summand: ModuleSummand) -> FglModule {
        self.summands.push(summand);
        self
    }
}

/// `[1](u), ..., [m_max](u)`.
pub fn mult_set(f: &FormalGroupLaw, m_max: u32) -> Result<Vec<GradedSeries>> {
    (1..=m_max as i64).map(|m| f.n_series(m)).collect()
}

/// What inverting `[m](u)` does to the coefficients.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "class", rename_all = "snake_case")]
pub enum Localization {
    /// `[m](u) = u^valuation * unit` after inverting `u` and completing.
    UnitAfterU { valuation: u64 },
    /// The lowest non-nilpotent coefficient is `c` times a unit; `c` must be
    /// inverted as well.
    NeedsCoefficientInversion { c: u64 },
    Zero,
    Unknown,
}

/// Classification of `[m](u)` for `m = 1..=m_max`.
pub fn localization_behavior(f: &FormalGroupLaw, m_max: u32) -> Result<Vec<Localization>> {
    let r = f.ring();
    let linear = match f.definition() {
        FglDefinition::Spec(spec) => matches!(spec, FglSpec::Additive { .. }),
        FglDefinition::Custom { kind, .. } => kind == "additive",
    };
    let mut out: Vec<Localization> = Vec::with_capacity(m_max as usize);
    for m in 1..=m_max {
        let s = f.n_series(m as i64)?;
        let prof = s.unit_profile();
        if prof.certifies_unit() {
            out.push(Localization::UnitAfterU {
                valuation: prof.valuation.expect("pivot") as u64,
            });
            continue;
        }
        // [ab](u) = [a]([b](u)): valuations multiply.
        let composite = (2..m).filter(|a| m % a == 0).find_map(|a| {
            match (&out[a as usize - 1], &out[(m / a) as usize - 1]) {
                (
                    Localization::UnitAfterU { valuation: va },
                    Localization::UnitAfterU { valuation: vb },
                ) => Some(va * vb),
                _ => None,
            }
        });
        if let Some(valuation) = composite {
            out.push(Localization::UnitAfterU { valuation });
            continue;
        }
        let class = match s.coeffs().iter().find(|c| !r.is_nilpotent(c)) {
            Some(c) => match content_up_to_unit(r, c) {
                Some(content) => Localization::NeedsCoefficientInversion { c: content },
                None => Localization::Unknown,
            },
            None if s.is_zero() && linear => Localization::Zero,
            None => Localization::Unknown,
        };
        out.push(class);
    }
    Ok(out)
}

/// For `a = c * unit` with `c` a positive integer, returns `c`.
fn content_up_to_unit(r: &Ring, a: &crate::ring::Elem) -> Option<u64> {
    if !a.is_monomial() || r.is_rational_base() {
        return None;
    }
    let (_, t) = &a.terms()[0];
    let t = t.numer().abs();
    let n = r.characteristic();
    let c = if n.is_zero() { t } else { t.gcd(&n) };
    c.to_u64()
}

/// `R*(BC_k) = R*[[u]]/([k](u))`.
pub fn bc_k_presentation(f: &Arc<FormalGroupLaw>, k: u32) -> Result<FglModule> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    let relator = f.n_series(k as i64)?;
    let one = GradedSeries::one(f.ring(), relator.order());
    let summand = cyclic_summand(relator, Some(Annihilator { multiple: k, cofactor: one }));
    FglModule::new(f, vec![summand])
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    Good,
    Bad,
}

/// Local equivariant module of a `k`-fold covered orbit: `R*[[u]]/([k](u))`
/// when good, `R*[[u]]/([k](u)/[k/2](u))` when bad.
pub fn orbit_local_module(f: &Arc<FormalGroupLaw>, k: u32, parity: Parity) -> Result<FglModule> {
    if k == 0 {
        return Err(Error::InvalidArgument("multiplicity must be at least 1".into()));
    }
    let summand = match parity {
        Parity::Good => {
            let relator = f.n_series(k as i64)?;
            let one = GradedSeries::one(f.ring(), relator.order());
            cyclic_summand(relator, Some(Annihilator { multiple: k, cofactor: one }))
        }
        Parity::Bad => {
            if k % 2 == 1 {
                return Err(Error::BadOrbitOddMultiplicity(k));
            }
            let full = f.n_series(k as i64)?;
            let half = f.n_series((k / 2) as i64)?;
            let relator = match full.exact_divide(&half) {
                Ok(q) => q,
                Err(Error::ZeroDivisorPivot | Error::NotDivisible) => {
                    // [k] = [2]([k/2]) = [k/2] * h([k/2]) with h(w) = [2](w)/w.
                    let w = GradedSeries::variable(f.ring(), full.order());
                    let h = f.n_series(2)?.exact_divide(&w)?;
                    h.substitute(&half)?
                }
                Err(e) => return Err(e),
            };
            cyclic_summand(relator, Some(Annihilator { multiple: k, cofactor: half }))
        }
    };
    FglModule::new(f, vec![summand])
}

fn cyclic_summand(relator: GradedSeries, witness: Option<Annihilator>) -> ModuleSummand {
    let zero_divisor = series_is_zero_divisor(&relator);
    ModuleSummand {
        kind: SummandKind::Cyclic {
            relator,
            witness,
            zero_divisor,
        },
        coefficients: CoefficientModule::unit(),
        degree_shift: 0,
        constant: false,
    }
}

/// Some nonzero constant kills the series (or it vanishes).
pub fn series_is_zero_divisor(s: &GradedSeries) -> bool {
    if s.is_zero() {
        return true;
    }
    let n = s.ring().characteristic();
    if n.is_zero() {
        return false;
    }
    let mut g = n;
    for c in s.coeffs() {
        for (_, t) in c.terms() {
            g = g.gcd(t.numer());
        }
    }
    g != BigInt::from(1)
}

/// Precision record carried by every nonzero Tate value.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Precision {
    #[serde(rename = "N")]
    pub truncation: usize,
    #[serde(rename = "K")]
    pub padic: Option<u32>,
    pub m_max: u32,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TateValue {
    Zero,
    LaurentModule {
        /// Coefficient ring after localization, before adjoining `u^-1`.
        base: RingDescriptor,
        summands: Vec<CyclicSummand>,
        precision: Precision,
    },
}

impl TateValue {
    pub fn is_zero(&self) -> bool {
        matches!(self, TateValue::Zero)
    }

    pub fn summands(&self) -> &[CyclicSummand] {
        match self {
            TateValue::Zero => &[],
            TateValue::LaurentModule { summands, .. } => summands,
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("serializable")
    }
}

/// How localizing at the multiplicative set acts on coefficient summands.
#[derive(Clone, Debug)]
enum Transform {
    /// The localized ring is zero.
    Kill,
    Keep { base: Ring, rational: bool },
}

impl Transform {
    fn apply(&self, s: &CyclicSummand, shift: i64) -> Option<CyclicSummand> {
        let Transform::Keep { base, rational } = self else {
            return None;
        };
        let order = if *rational {
            if s.order != 0 {
                return None;
            }
            0
        } else {
            let n = base.characteristic();
            if n.is_zero() {
                s.order
            } else {
                let g = BigInt::from(s.order).gcd(&n).to_u64().expect("small modulus");
                if g == 1 {
                    return None;
                }
                g
            }
        };
        if order == 1 {
            return None;
        }
        let mut degree = s.degree + shift;
        if let Some(period) = base.generator_degree() {
            degree = degree.rem_euclid(period.abs());
        }
        Some(CyclicSummand { order, degree })
    }
}

fn localization_transform(f: &FormalGroupLaw, m_max: u32) -> Result<Transform> {
    let classes = localization_behavior(f, m_max)?;
    if classes.contains(&Localization::Zero) {
        return Ok(Transform::Kill);
    }
    if let Some(m) = classes.iter().position(|c| *c == Localization::Unknown) {
        return Err(Error::UnknownLocalization {
            multiple: m as u32 + 1,
            truncation: f.order(),
        });
    }
    let ring = f.ring();
    let mut inverted: BTreeSet<u64> = BTreeSet::new();
    for c in &classes {
        if let Localization::NeedsCoefficientInversion { c } = c {
            inverted.extend(factor(*c).into_iter().map(|(p, _)| p));
        }
    }
    if inverted.is_empty() {
        return Ok(Transform::Keep {
            base: ring.clone(),
            rational: ring.is_rational_base(),
        });
    }
    let replace_base = |base: RingDescriptor| -> Result<Ring> {
        let desc = match ring.descriptor() {
            RingDescriptor::Laurent { gen, deg, .. } => RingDescriptor::laurent(base, gen, *deg),
            _ => base,
        };
        Ring::new(desc)
    };
    if ring.is_integer_base() {
        return Ok(Transform::Keep {
            base: replace_base(RingDescriptor::Rationals)?,
            rational: true,
        });
    }
    let mut n = ring.characteristic().to_u64().expect("small modulus");
    for p in &inverted {
        while n.is_multiple_of(*p) {
            n /= p;
        }
    }
    if n == 1 {
        return Ok(Transform::Kill);
    }
    Ok(Transform::Keep {
        base: replace_base(RingDescriptor::zmod(n))?,
        rational: false,
    })
}

fn precision_of(f: &FormalGroupLaw, m_max: u32) -> Precision {
    let padic = match f.spec() {
        Some(FglSpec::IntegralMorava { precision, .. }) => Some(*precision),
        _ => match f.ring().descriptor().base() {
            RingDescriptor::PAdicTruncated { precision, .. } => Some(*precision),
            _ => None,
        },
    };
    Precision {
        truncation: f.order(),
        padic,
        m_max,
    }
}

/// Completed localization of one module, summand by summand.
struct Evaluator<'a> {
    fgl: &'a FormalGroupLaw,
    m_max: u32,
    transform: Option<Transform>,
}

impl<'a> Evaluator<'a> {
    fn new(fgl: &'a FormalGroupLaw, m_max: u32) -> Evaluator<'a> {
        Evaluator {
            fgl,
            m_max,
            transform: None,
        }
    }

    fn transform(&mut self) -> Result<Transform> {
        if self.transform.is_none() {
            self.transform = Some(localization_transform(self.fgl, self.m_max)?);
        }
        Ok(self.transform.clone().expect("set"))
    }

    fn annihilated(&self, relator: &GradedSeries, witness: &Option<Annihilator>) -> Result<bool> {
        if let Some(w) = witness {
            let target = self.fgl.n_series(w.multiple as i64)?;
            let prod = relator.mul(&w.cofactor)?;
            if prod == target.truncate(prod.order()) {
                return Ok(true);
            }
        }
        for m in 1..=self.m_max as i64 {
            if self.fgl.n_series(m)?.exact_divide(relator).is_ok() {
                return Ok(true);
            }
        }
        Ok(false)
    }

    /// Surviving coefficient summands contributed by `s`.
    fn contribution(&mut self, s: &ModuleSummand) -> Result<Vec<CyclicSummand>> {
        if let SummandKind::Cyclic { relator, witness, .. } = &s.kind {
            if relator.is_zero() {
                // vanishing to the truncation order is not vanishing
                let class = match witness {
                    Some(w) => localization_behavior(self.fgl, w.multiple)?.pop(),
                    None => None,
                };
                match class {
                    Some(Localization::UnitAfterU { .. }) => return Ok(Vec::new()),
                    Some(Localization::Zero) | None => {}
                    Some(_) => {
                        return Err(Error::UnknownLocalization {
                            multiple: self.m_max,
                            truncation: self.fgl.order(),
                        })
                    }
                }
            } else {
                if self.annihilated(relator, witness)? {
                    return Ok(Vec::new());
                }
                return Err(Error::UnknownLocalization {
                    multiple: self.m_max,
                    truncation: self.fgl.order(),
                });
            }
        }
        let t = self.transform()?;
        Ok(s.coefficients
            .summands
            .iter()
            .filter_map(|c| t.apply(c, s.degree_shift))
            .collect())
    }

    fn assemble(&mut self, mut summands: Vec<CyclicSummand>) -> Result<TateValue> {
        if summands.is_empty() {
            return Ok(TateValue::Zero);
        }
        summands.sort_by_key(|s| (s.degree, s.order));
        let base = match self.transform()? {
            Transform::Keep { base, .. } => base,
            Transform::Kill => return Ok(TateValue::Zero),
        };
        Ok(TateValue::LaurentModule {
            base: base.descriptor().clone(),
            summands,
            precision: precision_of(self.fgl, self.m_max),
        })
    }
}

/// Completed Tate value of a module: cyclic summands annihilated by some
/// `[m](u)` die; free summands follow the localization of the coefficients.
pub fn tate_of_module(module: &FglModule, m_max: u32) -> Result<TateValue> {
    let mut ev = Evaluator::new(&module.fgl, m_max);
    let mut all = Vec::new();
    for s in &module.summands {
        all.extend(ev.contribution(s)?);
    }
    ev.assemble(all)
}

/// Levels of `R*[[u]]`-modules with summand matchings `maps[i][j]`: the
/// image in level `i + 1` of summand `j` of level `i` (`None`: maps to zero).
#[derive(Clone, Debug)]
pub struct ModuleTower {
    levels: Vec<FglModule>,
    maps: Vec<Vec<Option<usize>>>,
}

/// Limit value of a tower and the (1-based) level from which it is constant.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TowerTate {
    pub value: TateValue,
    pub stabilization_level: usize,
}

impl ModuleTower {
    pub fn new(levels: Vec<FglModule>, maps: Vec<Vec<Option<usize>>>) -> Result<ModuleTower> {
        let bad = |msg: String| Err(Error::InvalidTower(msg));
        if levels.is_empty() {
            return bad("a tower needs at least one level".into());
        }
        if maps.len() + 1 != levels.len() {
            return bad(format!("{} levels need {} maps, got {}", levels.len(), levels.len() - 1, maps.len()));
        }
        let fgl = &levels[0].fgl;
        for (i, level) in levels.iter().enumerate() {
            if !Arc::ptr_eq(&level.fgl, fgl) && level.fgl.definition() != fgl.definition() {
                return bad(format!("level {} uses a different formal group law", i + 1));
            }
        }
        let tagged = levels.iter().any(|l| l.summands.iter().any(|s| s.constant));
        if tagged && levels.iter().any(|l| !l.summands.iter().any(|s| s.constant)) {
            return bad("the constant block must be present at every level".into());
        }
        for (i, map) in maps.iter().enumerate() {
            let (src, dst) = (&levels[i], &levels[i + 1]);
            if map.len() != src.summands.len() {
                return bad(format!("map {} has {} entries for {} summands", i + 1, map.len(), src.summands.len()));
            }
            let mut seen = BTreeSet::new();
            for (j, t) in map.iter().enumerate() {
                let s = &src.summands[j];
                match t {
                    Some(t) => {
                        let Some(target) = dst.summands.get(*t) else {
                            return bad(format!("map {} points past level {}", i + 1, i + 2));
                        };
                        if !seen.insert(*t) {
                            return bad(format!("map {} is not injective", i + 1));
                        }
                        if target != s {
                            return bad(format!("map {} matches non-isomorphic summands", i + 1));
                        }
                    }
                    None if s.constant => {
                        return bad(format!("constant block unmatched at level {}", i + 1));
                    }
                    None => {}
                }
            }
        }
        Ok(ModuleTower { levels, maps })
    }

    /// `len` copies of `module` joined by identity maps.
    pub fn constant(module: &FglModule, len: usize) -> Result<ModuleTower> {
        let id: Vec<Option<usize>> = (0..module.summands.len()).map(Some).collect();
        ModuleTower::new(vec![module.clone(); len.max(1)], vec![id; len.max(1) - 1])
    }

    pub fn levels(&self) -> &[FglModule] {
        &self.levels
    }

    pub fn maps(&self) -> &[Vec<Option<usize>>] {
        &self.maps
    }

    /// The subtower on the given (0-based, increasing) levels, with composed maps.
    pub fn subtower(&self, keep: &[usize]) -> Result<ModuleTower> {
        if keep.is_empty() || keep.windows(2).any(|w| w[0] >= w[1]) || *keep.last().expect("nonempty") >= self.levels.len() {
            return Err(Error::InvalidTower("levels to keep must be increasing and in range".into()));
        }
        let levels = keep.iter().map(|&i| self.levels[i].clone()).collect();
        let maps = keep
            .windows(2)
            .map(|w| {
                (0..self.levels[w[0]].summands.len())
                    .map(|j| (w[0]..w[1]).try_fold(j, |cur, i| self.maps[i][cur]))
                    .collect()
            })
            .collect();
        ModuleTower::new(levels, maps)
    }
}

/// Limit of the levelwise Tate values along the tower. The limit exists when
/// the matchings restricted to surviving summands are bijections from some
/// level on, which must happen by the last transition.
pub fn tate_of_tower(t: &ModuleTower, m_max: u32) -> Result<TowerTate> {
    let fgl = &t.levels[0].fgl;
    let mut ev = Evaluator::new(fgl, m_max);
    let contributions: Vec<Vec<Vec<CyclicSummand>>> = t
        .levels
        .iter()
        .map(|l| l.summands.iter().map(|s| ev.contribution(s)).collect::<Result<Vec<_>>>())
        .collect::<Result<Vec<_>>>()?;
    let live = |i: usize, j: usize| !contributions[i][j].is_empty();
    let bijective = |i: usize| {
        let map = &t.maps[i];
        let mut hit = BTreeSet::new();
        for (j, target) in map.iter().enumerate() {
            if !live(i, j) {
                continue;
            }
            match target {
                Some(tj) if live(i + 1, *tj) => {
                    hit.insert(*tj);
                }
                _ => return false,
            }
        }
        (0..t.levels[i + 1].summands.len()).all(|k| !live(i + 1, k) || hit.contains(&k))
    };
    let transitions = t.maps.len();
    let mut start = transitions;
    while start > 0 && bijective(start - 1) {
        start -= 1;
    }
    if transitions > 0 && start == transitions {
        return Err(Error::NonStabilizingTower);
    }
    let last = contributions.last().expect("nonempty").concat();
    Ok(TowerTate {
        value: ev.assemble(last)?,
        stabilization_level: start + 1,
    })
}
