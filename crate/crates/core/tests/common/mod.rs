#![allow(dead_code)]

use std::collections::BTreeSet;
use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::BigRational;
use rand::Rng;
use tate_core::fgl::{catalog, FormalGroupLaw, DEFAULT_PADIC_PRECISION};
use tate_core::floer::{Exact, HomologyDegree, KuGroups, AbelianGroup};
use tate_core::{Homology, ManifoldModel, OrbitDatum, Parity};

pub const TRUNCATION: usize = 24;
pub const M_MAX: u32 = 24;

pub const LAWS: &[&str] = &[
    "hz",
    "hq",
    "hfp:2",
    "hfp:3",
    "hfp:5",
    "multiplicative",
    "ku",
    "ku:2:3",
    "ku:3:2",
    "honda:2:1",
    "honda:2:2",
    "honda:3:1",
    "honda:5:1",
    "integral-morava:2:1",
    "integral-morava:3:1",
    "integral-morava:2:2",
];

pub fn law(name: &str) -> Arc<FormalGroupLaw> {
    catalog().by_name(name, TRUNCATION, DEFAULT_PADIC_PRECISION).unwrap()
}

pub fn half(n: i64) -> Exact {
    Exact(BigRational::new(BigInt::from(2 * n + 1), BigInt::from(2)))
}

pub fn random_homology<R: Rng>(rng: &mut R, dim: u32, weinstein: bool, primes: &[u64]) -> Homology {
    let top = if weinstein { dim / 2 } else { dim };
    let mut degrees = Vec::new();
    for d in 0..=top {
        let free = if rng.gen_bool(0.6) { rng.gen_range(0..=4) } else { 0 };
        let mut torsion = Vec::new();
        let middle = weinstein && d == dim / 2;
        if !middle && !primes.is_empty() {
            for _ in 0..rng.gen_range(0..=2) {
                let p = primes[rng.gen_range(0..primes.len())];
                torsion.push((p, rng.gen_range(1..=3), rng.gen_range(1..=2)));
            }
        }
        degrees.push(HomologyDegree { degree: d, free, torsion });
    }
    Homology(degrees)
}

/// Orbits at half-integer lengths, so integer slopes never collide with them.
pub fn random_orbits<R: Rng>(rng: &mut R, count: usize, avoid: &BTreeSet<i64>) -> Vec<OrbitDatum> {
    let mut used = avoid.clone();
    let mut out = Vec::new();
    while out.len() < count {
        let l = rng.gen_range(0..16);
        if !used.insert(l) {
            continue;
        }
        let k = rng.gen_range(1..=12);
        let parity = if k % 2 == 0 && rng.gen_bool(0.4) { Parity::Bad } else { Parity::Good };
        let mut o = OrbitDatum::new(half(l), k, parity);
        o.shift = rng.gen_range(-3..=3);
        out.push(o);
    }
    out
}

pub fn random_slopes<R: Rng>(rng: &mut R) -> Vec<Exact> {
    let mut s: BTreeSet<i64> = BTreeSet::new();
    for _ in 0..rng.gen_range(1..=4) {
        s.insert(rng.gen_range(1..=17));
    }
    s.into_iter().map(Exact::integer).collect()
}

pub fn random_model<R: Rng>(rng: &mut R, max_dim: u32, primes: &[u64]) -> ManifoldModel {
    let dim = 2 * rng.gen_range(0..=max_dim / 2);
    let weinstein = rng.gen_bool(0.3);
    let homology = random_homology(rng, dim, weinstein, primes);
    let count = rng.gen_range(0..=4);
    let orbits = random_orbits(rng, count, &BTreeSet::new());
    let slopes = random_slopes(rng);
    let m = ManifoldModel {
        dim,
        weinstein,
        homology,
        orbits,
        slopes,
    };
    m.validate().unwrap();
    m
}

pub fn random_group<R: Rng>(rng: &mut R) -> AbelianGroup {
    let primes = [2u64, 3, 5, 7];
    AbelianGroup {
        free: rng.gen_range(0..=4),
        torsion: (0..rng.gen_range(0..=3))
            .map(|_| (primes[rng.gen_range(0..4)], rng.gen_range(1..=3), rng.gen_range(1..=2)))
            .collect(),
    }
}

pub fn random_ku<R: Rng>(rng: &mut R) -> KuGroups {
    KuGroups {
        ku0: random_group(rng),
        ku1: random_group(rng),
    }
}
