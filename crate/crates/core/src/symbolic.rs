//! Cylinder calculus for the fair-coin Bernoulli shift on `{0,1}^Z`.
//!
//! Shift convention: `T^m` moves a constraint at coordinate `i` to `i + m`,
//! so `T^i D_b = {x : x_i = b}` and the rank-`k` atom with pattern
//! `(b_{-k}, ..., b_k)` is `⋂ T^i D_{b_i}`. Atoms of rank `k` are indexed
//! lexicographically with `b_{-k}` as the most significant bit.
//!
//! Measures on this side are always exact and never discretized.

use std::collections::{BTreeMap, BTreeSet};

use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::{CellSet, GridSpace};
use crate::rational::{from_count, inv_pow2, Rational};

/// Finitely many coordinate constraints, or the empty set after a
/// contradictory merge.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Cylinder {
    Empty,
    Constrained(BTreeMap<i64, u8>),
}

impl Cylinder {
    /// The whole space.
    pub fn full() -> Self {
        Cylinder::Constrained(BTreeMap::new())
    }

    /// `T^coord D_symbol = {x : x_coord = symbol}`.
    pub fn digit(coord: i64, symbol: u8) -> Result<Self> {
        Cylinder::from_pairs([(coord, symbol)])
    }

    /// Contradictory pairs collapse to [`Cylinder::Empty`].
    pub fn from_pairs(pairs: impl IntoIterator<Item = (i64, u8)>) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (coord, symbol) in pairs {
            if symbol > 1 {
                return Err(Error::InvalidSymbol(symbol));
            }
            if let Some(prev) = map.insert(coord, symbol) {
                if prev != symbol {
                    return Ok(Cylinder::Empty);
                }
            }
        }
        Ok(Cylinder::Constrained(map))
    }

    /// Atom `index` of rank `k`.
    pub fn atom(k: u32, index: usize) -> Result<Self> {
        let pattern = atom_pattern(k, index)?;
        Cylinder::from_pairs((-(k as i64)..=k as i64).zip(pattern))
    }

    pub fn constraints(&self) -> Option<&BTreeMap<i64, u8>> {
        match self {
            Cylinder::Empty => None,
            Cylinder::Constrained(map) => Some(map),
        }
    }

    pub fn is_empty(&self) -> bool {
        matches!(self, Cylinder::Empty)
    }

    pub fn measure(&self) -> Rational {
        match self {
            Cylinder::Empty => Rational::zero(),
            Cylinder::Constrained(map) => inv_pow2(map.len() as u32),
        }
    }

    /// `T^m C`.
    pub fn shift(&self, m: i64) -> Cylinder {
        match self {
            Cylinder::Empty => Cylinder::Empty,
            Cylinder::Constrained(map) => Cylinder::Constrained(map.iter().map(|(&i, &b)| (i + m, b)).collect()),
        }
    }

    pub fn intersect(&self, other: &Cylinder) -> Cylinder {
        match (self, other) {
            (Cylinder::Constrained(a), Cylinder::Constrained(b)) => {
                let mut merged = a.clone();
                for (&coord, &symbol) in b {
                    if let Some(&prev) = merged.get(&coord) {
                        if prev != symbol {
                            return Cylinder::Empty;
                        }
                    }
                    merged.insert(coord, symbol);
                }
                Cylinder::Constrained(merged)
            }
            _ => Cylinder::Empty,
        }
    }

    /// Smallest `r` with every constraint inside `-r..=r`.
    pub fn radius(&self) -> u32 {
        self.constraints()
            .map(|m| m.keys().map(|c| c.unsigned_abs() as u32).max().unwrap_or(0))
            .unwrap_or(0)
    }
}

impl Serialize for Cylinder {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            Cylinder::Empty => serializer.serialize_none(),
            Cylinder::Constrained(map) => {
                let keyed: BTreeMap<String, u8> = map.iter().map(|(c, b)| (c.to_string(), *b)).collect();
                keyed.serialize(serializer)
            }
        }
    }
}

impl<'de> Deserialize<'de> for Cylinder {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        use serde::de::Error as _;
        let keyed = Option::<BTreeMap<String, u8>>::deserialize(deserializer)?;
        let Some(keyed) = keyed else { return Ok(Cylinder::Empty) };
        let mut pairs = Vec::with_capacity(keyed.len());
        for (coord, symbol) in keyed {
            let coord: i64 = coord.parse().map_err(D::Error::custom)?;
            pairs.push((coord, symbol));
        }
        Cylinder::from_pairs(pairs).map_err(D::Error::custom)
    }
}

pub fn shift_cylinder(cylinder: &Cylinder, m: i64) -> Cylinder {
    cylinder.shift(m)
}

/// Exact `mu(C1 ∩ C2)`.
pub fn merge_measure(a: &Cylinder, b: &Cylinder) -> Rational {
    a.intersect(b).measure()
}

/// The fair-coin shift on `{0,1}^Z`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BernoulliShift;

impl BernoulliShift {
    pub fn symbol_probabilities(&self) -> [Rational; 2] {
        [inv_pow2(1), inv_pow2(1)]
    }

    /// `mu(T^m B_u ∩ B_v)` for rank-`k` atoms.
    pub fn atom_correlation(&self, k: u32, m: i64, u: usize, v: usize) -> Result<Rational> {
        Ok(merge_measure(&Cylinder::atom(k, u)?.shift(m), &Cylinder::atom(k, v)?))
    }

    /// `mu(T^m A ∩ B)` for atom unions, summed over atom pairs.
    pub fn correlation(&self, m: i64, a: &AtomUnion, b: &AtomUnion) -> Rational {
        let ka = a.cylinders();
        let kb = b.cylinders();
        let mut total = Rational::zero();
        for ca in &ka {
            let shifted = ca.shift(m);
            for cb in &kb {
                total += merge_measure(&shifted, cb);
            }
        }
        total
    }
}

pub fn atom_count(k: u32) -> usize {
    1usize << (2 * k + 1)
}

/// Pattern `(b_{-k}, ..., b_k)` of atom `index`.
pub fn atom_pattern(k: u32, index: usize) -> Result<Vec<u8>> {
    let width = 2 * k + 1;
    if index >= atom_count(k) {
        return Err(Error::AtomOutOfRange { index, rank: k });
    }
    Ok((0..width).map(|j| ((index >> (width - 1 - j)) & 1) as u8).collect())
}

/// Pattern as a bit string, e.g. `"010"`.
pub fn atom_label(k: u32, index: usize) -> String {
    atom_pattern(k, index)
        .map(|p| p.iter().map(|b| char::from(b'0' + b)).collect())
        .unwrap_or_default()
}

/// Atoms of `⋁_{|i|<=k} T^i ξ` in canonical order.
pub fn atoms(k: u32) -> Vec<Cylinder> {
    (0..atom_count(k)).map(|t| Cylinder::atom(k, t).expect("index in range")).collect()
}

/// A set measurable with respect to the rank-`rank` atom partition.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AtomUnion {
    rank: u32,
    atoms: BTreeSet<usize>,
}

impl AtomUnion {
    pub fn new(rank: u32, atoms: impl IntoIterator<Item = usize>) -> Result<Self> {
        let atoms: BTreeSet<usize> = atoms.into_iter().collect();
        if let Some(&last) = atoms.iter().next_back() {
            if last >= atom_count(rank) {
                return Err(Error::AtomOutOfRange { index: last, rank });
            }
        }
        Ok(AtomUnion { rank, atoms })
    }

    pub fn empty(rank: u32) -> Self {
        AtomUnion { rank, atoms: BTreeSet::new() }
    }

    pub fn single(rank: u32, index: usize) -> Result<Self> {
        AtomUnion::new(rank, [index])
    }

    /// Union of cylinders, each of which must live inside the rank window.
    pub fn from_cylinders(rank: u32, cylinders: &[Cylinder]) -> Result<Self> {
        let mut atoms = BTreeSet::new();
        for cyl in cylinders {
            let Some(constraints) = cyl.constraints() else { continue };
            if let Some((&coord, _)) = constraints.iter().find(|(c, _)| c.unsigned_abs() > rank as u64) {
                return Err(Error::OutsideWindow { coord, rank });
            }
            for t in 0..atom_count(rank) {
                let pattern = atom_pattern(rank, t)?;
                let inside = constraints.iter().all(|(&c, &b)| pattern[(c + rank as i64) as usize] == b);
                if inside {
                    atoms.insert(t);
                }
            }
        }
        Ok(AtomUnion { rank, atoms })
    }

    /// Like [`AtomUnion::from_cylinders`] at the smallest rank that holds every cylinder.
    pub fn from_cylinders_auto(cylinders: &[Cylinder]) -> Result<Self> {
        let rank = cylinders.iter().map(Cylinder::radius).max().unwrap_or(0);
        AtomUnion::from_cylinders(rank, cylinders)
    }

    pub fn rank(&self) -> u32 {
        self.rank
    }

    pub fn atoms(&self) -> &BTreeSet<usize> {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn measure(&self) -> Rational {
        from_count(self.atoms.len(), atom_count(self.rank))
    }

    pub fn cylinders(&self) -> Vec<Cylinder> {
        self.atoms.iter().map(|&t| Cylinder::atom(self.rank, t).expect("validated index")).collect()
    }

    /// Same set expressed at a finer rank.
    pub fn lift(&self, rank: u32) -> Result<AtomUnion> {
        if rank < self.rank {
            return Err(Error::RankTooHigh { target: self.rank, rank });
        }
        AtomUnion::from_cylinders(rank, &self.cylinders())
    }

    /// `mu(A △ B)` exactly, at the finer of the two ranks.
    pub fn symmetric_difference_measure(&self, other: &AtomUnion) -> Result<Rational> {
        let rank = self.rank.max(other.rank);
        let (a, b) = (self.lift(rank)?, other.lift(rank)?);
        Ok(from_count(a.atoms.symmetric_difference(&b.atoms).count(), atom_count(rank)))
    }
}

/// Best rank-`k` approximation of `set` by majority rule, with its error.
///
/// An atom `a` of rank `k` is kept iff `mu(set ∩ a) > mu(a)/2`; exact
/// half-ties are dropped. The result minimizes `mu(set △ Ã)` over rank-`k`
/// measurable sets.
pub fn best_cylinder_approximation(set: &AtomUnion, k: u32) -> Result<(AtomUnion, Rational)> {
    if k > set.rank {
        return Err(Error::RankTooHigh { target: k, rank: set.rank });
    }
    // a rank-K atom restricts to the rank-k atom given by its middle 2k+1 bits
    let drop = set.rank - k;
    let inner_mask = atom_count(k) - 1;
    let sub_atoms = 1usize << (2 * drop);
    let mut hits = vec![0usize; atom_count(k)];
    for &t in &set.atoms {
        hits[(t >> drop) & inner_mask] += 1;
    }
    let mut kept = BTreeSet::new();
    let mut error_atoms = 0;
    for (a, &h) in hits.iter().enumerate() {
        if 2 * h > sub_atoms {
            kept.insert(a);
            error_atoms += sub_atoms - h;
        } else {
            error_atoms += h;
        }
    }
    Ok((AtomUnion { rank: k, atoms: kept }, from_count(error_atoms, atom_count(set.rank))))
}

/// Realization of the symbolic side on a grid of `2^L` cells.
///
/// Reading a cell index from its most significant bit, the first `2r+1` bits
/// carry coordinates `-r..=r` in order and the remaining bits carry
/// `-(r+1), r+1, -(r+2), r+2, ...`. Rank-`r` atoms are therefore the
/// consecutive blocks of `N / 2^(2r+1)` cells, in canonical atom order.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BlockLayout {
    space: GridSpace,
    rank: u32,
}

impl BlockLayout {
    pub fn new(space: GridSpace, rank: u32) -> Result<Self> {
        if space.log2() < 2 * rank + 1 {
            return Err(Error::AtomsUnrealizable { log2: space.log2(), rank });
        }
        Ok(BlockLayout { space, rank })
    }

    pub fn space(&self) -> GridSpace {
        self.space
    }

    pub fn rank(&self) -> u32 {
        self.rank
    }

    pub fn block_size(&self) -> usize {
        self.space.resolution() >> (2 * self.rank + 1)
    }

    pub fn block_index(&self, cell: usize) -> usize {
        cell / self.block_size()
    }

    pub fn block(&self, t: usize) -> CellSet {
        let s = self.block_size();
        CellSet::interval(self.space, t * s, (t + 1) * s).expect("block inside the grid")
    }

    pub fn blocks(&self) -> Vec<CellSet> {
        (0..atom_count(self.rank)).map(|t| self.block(t)).collect()
    }

    /// Coordinate carried by bit `j`, counted from the most significant bit.
    pub fn coordinate_of_bit(&self, j: u32) -> i64 {
        let r = self.rank as i64;
        let j = j as i64;
        if j <= 2 * r {
            j - r
        } else {
            let extra = j - 2 * r - 1;
            let dist = r + 1 + extra / 2;
            if extra % 2 == 0 {
                -dist
            } else {
                dist
            }
        }
    }

    /// Largest rank whose whole window is carried by the cell bits.
    pub fn max_rank(&self) -> u32 {
        (self.space.log2() - 1) / 2
    }

    /// Value of coordinate `coord` at `cell`, if carried.
    pub fn symbol_at(&self, cell: usize, coord: i64) -> Option<u8> {
        let bits = self.space.log2();
        let j = self.bit_of_coordinate(coord)?;
        Some(((cell >> (bits - 1 - j)) & 1) as u8)
    }

    fn bit_of_coordinate(&self, coord: i64) -> Option<u32> {
        let r = self.rank as i64;
        let j = if coord.abs() <= r {
            coord + r
        } else {
            let dist = coord.abs();
            2 * r + 1 + 2 * (dist - r - 1) + i64::from(coord > 0)
        };
        (j < self.space.log2() as i64).then_some(j as u32)
    }

    pub fn realize_cylinder(&self, cylinder: &Cylinder) -> Result<CellSet> {
        let Some(constraints) = cylinder.constraints() else {
            return Ok(CellSet::empty(self.space));
        };
        let mut bits = Vec::with_capacity(constraints.len());
        for (&coord, &symbol) in constraints {
            let j = self
                .bit_of_coordinate(coord)
                .ok_or(Error::OutsideWindow { coord, rank: self.max_rank() })?;
            bits.push((self.space.log2() - 1 - j, symbol as usize));
        }
        let cells = (0..self.space.resolution()).filter(|&c| bits.iter().all(|&(shift, b)| (c >> shift) & 1 == b));
        CellSet::new(self.space, cells.collect())
    }

    pub fn realize(&self, set: &AtomUnion) -> Result<CellSet> {
        if set.rank() > self.max_rank() {
            return Err(Error::AtomsUnrealizable { log2: self.space.log2(), rank: set.rank() });
        }
        let k = set.rank() as i64;
        let shifts: Vec<u32> = (-k..=k)
            .map(|c| self.space.log2() - 1 - self.bit_of_coordinate(c).expect("rank within max_rank"))
            .collect();
        let cells = (0..self.space.resolution()).filter(|&c| {
            let index = shifts.iter().fold(0usize, |acc, &s| (acc << 1) | ((c >> s) & 1));
            set.atoms().contains(&index)
        });
        CellSet::new(self.space, cells.collect())
    }

    pub fn realize_all(&self, sets: &[AtomUnion]) -> Result<Vec<CellSet>> {
        sets.iter().map(|s| self.realize(s)).collect()
    }
}
