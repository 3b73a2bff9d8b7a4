//! Collectionwise δ-independence of set families, with and without
//! complements, and a randomized search for a half-measure set whose images
//! under a map are almost independent.
//!
//! Scans run over packed bitsets. For a subset of `p` members the deviation
//! `|mu(⋂) - ∏ mu|` is kept as an integer numerator over `N^c`, so all
//! comparisons are exact integer comparisons.

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::{CellSet, GridMap, GridSpace};
use crate::rational::{self, Rational};
use crate::rng;

/// Upper limit on intersections evaluated by a single scan.
pub const SCAN_BUDGET: u128 = 1 << 24;

/// Indexed sets on one space, e.g. the images `S^m A`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SetFamily {
    space: GridSpace,
    members: Vec<(i64, CellSet)>,
}

impl SetFamily {
    pub fn new(space: GridSpace, members: Vec<(i64, CellSet)>) -> Result<Self> {
        let mut seen = std::collections::BTreeSet::new();
        for (index, set) in &members {
            space.ensure_same(&set.space())?;
            if !seen.insert(*index) {
                return Err(Error::DuplicateIndex(*index));
            }
        }
        Ok(SetFamily { space, members })
    }

    /// `{S^m A : |m| <= window}`, indexed by `m`.
    pub fn orbit(map: &GridMap, seed: &CellSet, window: u32) -> Result<Self> {
        let w = window as i64;
        let members = (-w..=w).map(|m| Ok((m, map.apply_power(m, seed)?))).collect::<Result<Vec<_>>>()?;
        SetFamily::new(map.space(), members)
    }

    pub fn space(&self) -> GridSpace {
        self.space
    }

    pub fn members(&self) -> &[(i64, CellSet)] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    fn member(&self, index: i64) -> Option<&CellSet> {
        self.members.iter().find(|(i, _)| *i == index).map(|(_, s)| s)
    }
}

/// One factor of an intersection: `E_index` or its complement.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Literal {
    pub index: i64,
    pub complemented: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndependenceReport {
    #[serde(with = "rational::as_str")]
    pub deviation: Rational,
    pub witness: Vec<Literal>,
    pub cardinality_bound: usize,
}

impl IndependenceReport {
    /// Recomputes `|mu(⋂ witness) - ∏ mu|` with plain set operations.
    pub fn recompute(&self, family: &SetFamily) -> Result<Rational> {
        if self.witness.is_empty() {
            return Ok(Rational::zero());
        }
        let mut inter = CellSet::full(family.space);
        let mut product = Rational::one();
        for lit in &self.witness {
            let set = family
                .member(lit.index)
                .ok_or_else(|| Error::InvalidArgument(format!("witness index {} not in family", lit.index)))?;
            let factor = if lit.complemented { set.complement() } else { set.clone() };
            product *= factor.measure();
            inter = inter.intersection(&factor)?;
        }
        Ok((inter.measure() - product).abs())
    }
}

fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

fn scan_size(n: usize, c: usize, complements: bool) -> u128 {
    (2..=c.min(n))
        .map(|p| binomial(n, p).saturating_mul(if complements { 1u128 << p } else { 1 }))
        .fold(0u128, u128::saturating_add)
}

struct Scanner<'a> {
    family: &'a SetFamily,
    masks: Vec<[Vec<u64>; 2]>,
    counts: Vec<[u64; 2]>,
    n_pow: Vec<BigInt>,
    cardinality: usize,
    complements: bool,
    best: BigInt,
    best_witness: Vec<Literal>,
}

impl<'a> Scanner<'a> {
    fn new(family: &'a SetFamily, cardinality: usize, complements: bool) -> Self {
        let n = family.space.resolution();
        let words = n.div_ceil(64);
        let tail = if n % 64 == 0 { u64::MAX } else { (1u64 << (n % 64)) - 1 };
        let mut masks = Vec::with_capacity(family.len());
        let mut counts = Vec::with_capacity(family.len());
        for (_, set) in &family.members {
            let mut plain = vec![0u64; words];
            for &c in set.cells() {
                plain[c / 64] |= 1 << (c % 64);
            }
            let mut comp: Vec<u64> = plain.iter().map(|w| !w).collect();
            if let Some(last) = comp.last_mut() {
                *last &= tail;
            }
            counts.push([set.len() as u64, (n - set.len()) as u64]);
            masks.push([plain, comp]);
        }
        let base = BigInt::from(n);
        let mut n_pow = vec![BigInt::one()];
        for p in 1..=cardinality {
            let next = &n_pow[p - 1] * &base;
            n_pow.push(next);
        }
        Scanner {
            family,
            masks,
            counts,
            n_pow,
            cardinality,
            complements,
            best: BigInt::zero(),
            best_witness: Vec::new(),
        }
    }

    fn run(mut self) -> IndependenceReport {
        let full = vec![u64::MAX; self.masks.first().map_or(0, |m| m[0].len())];
        let mut literals = Vec::with_capacity(self.cardinality);
        self.visit(0, &full, BigInt::one(), &mut literals);
        IndependenceReport {
            deviation: Rational::new(self.best, self.n_pow[self.cardinality].clone()),
            witness: self.best_witness,
            cardinality_bound: self.cardinality,
        }
    }

    fn visit(&mut self, start: usize, current: &[u64], product: BigInt, literals: &mut Vec<Literal>) {
        let depth = literals.len() + 1;
        let polarities: &[usize] = if self.complements { &[0, 1] } else { &[0] };
        for j in start..self.masks.len() {
            for &pol in polarities {
                let next: Vec<u64> = current.iter().zip(&self.masks[j][pol]).map(|(a, b)| a & b).collect();
                let count: u64 = next.iter().map(|w| u64::from(w.count_ones())).sum();
                let next_product = &product * BigInt::from(self.counts[j][pol]);
                literals.push(Literal { index: self.family.members[j].0, complemented: pol == 1 });
                if depth >= 2 {
                    // |count/N - prod/N^p| scaled to the common denominator N^c
                    let numer = (BigInt::from(count) * &self.n_pow[depth - 1] - &next_product).abs()
                        * &self.n_pow[self.cardinality - depth];
                    if numer > self.best {
                        self.best = numer;
                        self.best_witness = literals.clone();
                    }
                }
                if depth < self.cardinality {
                    self.visit(j + 1, &next, next_product, literals);
                }
                literals.pop();
            }
        }
    }
}

fn scan(family: &SetFamily, cardinality: usize, complements: bool) -> Result<IndependenceReport> {
    if cardinality == 0 {
        return Err(Error::InvalidCardinality);
    }
    let needed = scan_size(family.len(), cardinality, complements);
    if needed > SCAN_BUDGET {
        return Err(Error::ScanBudgetExceeded { needed, budget: SCAN_BUDGET });
    }
    Ok(Scanner::new(family, cardinality, complements).run())
}

/// Worst `|mu(E_{m1} ∩ ... ∩ E_{mp}) - ∏ mu(E_{mi})|` over distinct members, `2 <= p <= c`.
pub fn delta_deviation(family: &SetFamily, cardinality: usize) -> Result<IndependenceReport> {
    scan(family, cardinality, false)
}

/// As [`delta_deviation`], with every member of each intersection allowed
/// to appear complemented.
pub fn well_deviation(family: &SetFamily, cardinality: usize) -> Result<IndependenceReport> {
    scan(family, cardinality, true)
}

/// Outcome of checking `well ≤ c · δ`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LemmaAudit {
    pub holds: bool,
    pub cardinality: usize,
    pub delta: IndependenceReport,
    pub well: IndependenceReport,
    #[serde(with = "rational::as_str")]
    pub bound: Rational,
    /// `well / (c·δ)`, absent when `δ = 0`.
    #[serde(with = "rational::opt_as_str")]
    pub ratio: Option<Rational>,
}

/// Checks that every subcollection of at most `c` members is well
/// `c·δ`-independent, where `δ` is the plain deviation of the family.
///
/// The well scan of the whole family already ranges over every subcollection
/// of size at most `c`, so its maximum decides the check; the report's
/// witness names the worst subcollection and complement pattern.
pub fn lemma_cdelta_check(family: &SetFamily, cardinality: usize) -> Result<LemmaAudit> {
    let delta = delta_deviation(family, cardinality)?;
    let well = well_deviation(family, cardinality)?;
    let bound = &delta.deviation * rational::integer(cardinality as i64);
    let ratio = (!bound.is_zero()).then(|| &well.deviation / &bound);
    Ok(LemmaAudit { holds: well.deviation <= bound, cardinality, delta, well, bound, ratio })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchOutcome {
    pub set: CellSet,
    pub report: IndependenceReport,
    pub success: bool,
    pub trials_used: u64,
    pub best_trial: u64,
    pub window: u32,
    #[serde(with = "rational::as_str")]
    pub target: Rational,
}

/// Random-union search for `A` with `mu(A) = 1/2` whose images
/// `{S^m A : |m| <= window}` are well independent up to `cardinality`
/// (default `2·window + 1`) with deviation below `target`.
///
/// Trial `t` draws a uniform `N/2`-subset from [`rng::stream`]`(seed, t)`.
/// The search stops at the first success; otherwise it returns the best
/// candidate with `success = false`. Ties keep the earliest trial.
pub fn find_half_measure_independent_set(
    map: &GridMap,
    window: u32,
    cardinality: Option<usize>,
    target: &Rational,
    seed: u64,
    trials: u64,
) -> Result<SearchOutcome> {
    let n = map.space().resolution();
    if n % 2 != 0 {
        return Err(Error::HalfMeasureUnattainable(n));
    }
    if window == 0 || trials == 0 {
        return Err(Error::InvalidArgument("window and trials must be >= 1".into()));
    }
    let cardinality = cardinality.unwrap_or(2 * window as usize + 1);
    let mut best: Option<(CellSet, IndependenceReport, u64)> = None;
    for trial in 0..trials {
        let mut stream = rng::stream(seed, trial);
        let set = CellSet::new(map.space(), rng::subset(&mut stream, n, n / 2))?;
        let report = well_deviation(&SetFamily::orbit(map, &set, window)?, cardinality)?;
        let success = &report.deviation < target;
        let better = best.as_ref().is_none_or(|(_, b, _)| report.deviation < b.deviation);
        if better {
            best = Some((set, report, trial));
        }
        if success {
            let (set, report, best_trial) = best.expect("just stored");
            return Ok(SearchOutcome {
                set,
                report,
                success: true,
                trials_used: trial + 1,
                best_trial,
                window,
                target: target.clone(),
            });
        }
    }
    let (set, report, best_trial) = best.expect("at least one trial");
    Ok(SearchOutcome { set, report, success: false, trials_used: trials, best_trial, window, target: target.clone() })
}
