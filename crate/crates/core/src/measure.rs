//! Finite measure spaces: a grid of `N` equal cells, cell sets, and cell
//! permutations standing in for invertible measure-preserving maps.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rational::{from_count, Rational};

pub const MAX_LOG2: u32 = 26;

/// `N = 2^log2` cells, each of measure `1/N`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "SpaceRepr", into = "SpaceRepr")]
pub struct GridSpace {
    log2: u32,
}

#[derive(Serialize, Deserialize)]
struct SpaceRepr {
    resolution: usize,
}

impl TryFrom<SpaceRepr> for GridSpace {
    type Error = Error;
    fn try_from(repr: SpaceRepr) -> Result<Self> {
        GridSpace::new(repr.resolution)
    }
}

impl From<GridSpace> for SpaceRepr {
    fn from(space: GridSpace) -> Self {
        SpaceRepr { resolution: space.resolution() }
    }
}

impl fmt::Debug for GridSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "GridSpace(2^{})", self.log2)
    }
}

impl GridSpace {
    pub fn new(resolution: usize) -> Result<Self> {
        if resolution < 2 || !resolution.is_power_of_two() || resolution.trailing_zeros() > MAX_LOG2 {
            return Err(Error::InvalidResolution(resolution));
        }
        Ok(GridSpace { log2: resolution.trailing_zeros() })
    }

    pub fn with_log2(log2: u32) -> Result<Self> {
        if log2 == 0 || log2 > MAX_LOG2 {
            return Err(Error::InvalidResolution(1usize.checked_shl(log2).unwrap_or(0)));
        }
        Ok(GridSpace { log2 })
    }

    pub fn resolution(&self) -> usize {
        1 << self.log2
    }

    pub fn log2(&self) -> u32 {
        self.log2
    }

    pub fn cell_measure(&self) -> Rational {
        from_count(1, self.resolution())
    }

    pub fn measure_of(&self, count: usize) -> Rational {
        from_count(count, self.resolution())
    }

    pub fn ensure_same(&self, other: &GridSpace) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::SpaceMismatch { left: self.resolution(), right: other.resolution() })
        }
    }
}

/// A measurable set: strictly increasing cell indices.
#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "CellSetRepr", into = "CellSetRepr")]
pub struct CellSet {
    space: GridSpace,
    cells: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct CellSetRepr {
    resolution: usize,
    cells: Vec<usize>,
}

impl TryFrom<CellSetRepr> for CellSet {
    type Error = Error;
    fn try_from(repr: CellSetRepr) -> Result<Self> {
        CellSet::new(GridSpace::new(repr.resolution)?, repr.cells)
    }
}

impl From<CellSet> for CellSetRepr {
    fn from(set: CellSet) -> Self {
        CellSetRepr { resolution: set.space.resolution(), cells: set.cells }
    }
}

impl fmt::Debug for CellSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CellSet(N={}, {:?})", self.space.resolution(), self.cells)
    }
}

impl CellSet {
    /// Takes already strictly sorted indices.
    pub fn new(space: GridSpace, cells: Vec<usize>) -> Result<Self> {
        if cells.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::UnsortedCells);
        }
        if let Some(&last) = cells.last() {
            if last >= space.resolution() {
                return Err(Error::CellOutOfRange { cell: last, resolution: space.resolution() });
            }
        }
        Ok(CellSet { space, cells })
    }

    /// Sorts and deduplicates arbitrary indices.
    pub fn from_cells(space: GridSpace, cells: impl IntoIterator<Item = usize>) -> Result<Self> {
        let mut cells: Vec<usize> = cells.into_iter().collect();
        cells.sort_unstable();
        cells.dedup();
        CellSet::new(space, cells)
    }

    pub fn empty(space: GridSpace) -> Self {
        CellSet { space, cells: Vec::new() }
    }

    pub fn full(space: GridSpace) -> Self {
        CellSet { space, cells: (0..space.resolution()).collect() }
    }

    /// Cells `start..end`.
    pub fn interval(space: GridSpace, start: usize, end: usize) -> Result<Self> {
        CellSet::new(space, (start..end).collect())
    }

    /// Membership indicator, `mask[c]` true iff `c` in the set.
    pub fn from_mask(space: GridSpace, mask: &[bool]) -> Result<Self> {
        if mask.len() != space.resolution() {
            return Err(Error::InvalidArgument(format!(
                "mask length {} differs from resolution {}",
                mask.len(),
                space.resolution()
            )));
        }
        Ok(CellSet { space, cells: mask.iter().enumerate().filter(|(_, &m)| m).map(|(c, _)| c).collect() })
    }

    pub fn space(&self) -> GridSpace {
        self.space
    }

    pub fn cells(&self) -> &[usize] {
        &self.cells
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn contains(&self, cell: usize) -> bool {
        self.cells.binary_search(&cell).is_ok()
    }

    pub fn measure(&self) -> Rational {
        self.space.measure_of(self.cells.len())
    }

    pub fn to_mask(&self) -> Vec<bool> {
        let mut mask = vec![false; self.space.resolution()];
        for &c in &self.cells {
            mask[c] = true;
        }
        mask
    }

    pub fn union(&self, other: &CellSet) -> Result<CellSet> {
        self.merge(other, |a, b| a || b)
    }

    pub fn intersection(&self, other: &CellSet) -> Result<CellSet> {
        self.merge(other, |a, b| a && b)
    }

    pub fn difference(&self, other: &CellSet) -> Result<CellSet> {
        self.merge(other, |a, b| a && !b)
    }

    pub fn symmetric_difference(&self, other: &CellSet) -> Result<CellSet> {
        self.merge(other, |a, b| a != b)
    }

    pub fn complement(&self) -> CellSet {
        let mut out = Vec::with_capacity(self.space.resolution() - self.cells.len());
        let mut it = self.cells.iter().peekable();
        for c in 0..self.space.resolution() {
            if it.peek() == Some(&&c) {
                it.next();
            } else {
                out.push(c);
            }
        }
        CellSet { space: self.space, cells: out }
    }

    pub fn intersection_count(&self, other: &CellSet) -> Result<usize> {
        self.space.ensure_same(&other.space)?;
        let (mut i, mut j, mut n) = (0, 0, 0);
        while i < self.cells.len() && j < other.cells.len() {
            match self.cells[i].cmp(&other.cells[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    n += 1;
                    i += 1;
                    j += 1;
                }
            }
        }
        Ok(n)
    }

    pub fn symmetric_difference_measure(&self, other: &CellSet) -> Result<Rational> {
        let common = self.intersection_count(other)?;
        Ok(self.space.measure_of(self.len() + other.len() - 2 * common))
    }

    pub fn is_subset(&self, other: &CellSet) -> Result<bool> {
        Ok(self.intersection_count(other)? == self.len())
    }

    fn merge(&self, other: &CellSet, keep: impl Fn(bool, bool) -> bool) -> Result<CellSet> {
        self.space.ensure_same(&other.space)?;
        let (a, b) = (&self.cells, &other.cells);
        let mut out = Vec::with_capacity(a.len() + b.len());
        let (mut i, mut j) = (0, 0);
        while i < a.len() || j < b.len() {
            let (cell, in_a, in_b) = match (a.get(i), b.get(j)) {
                (Some(&x), Some(&y)) if x == y => (x, true, true),
                (Some(&x), Some(&y)) if x < y => (x, true, false),
                (Some(_), Some(&y)) => (y, false, true),
                (Some(&x), None) => (x, true, false),
                (None, Some(&y)) => (y, false, true),
                (None, None) => unreachable!(),
            };
            if in_a {
                i += 1;
            }
            if in_b {
                j += 1;
            }
            if keep(in_a, in_b) {
                out.push(cell);
            }
        }
        Ok(CellSet { space: self.space, cells: out })
    }
}

/// A bijection of the cells, with its inverse and cycle decomposition cached.
#[derive(Clone, Serialize, Deserialize)]
#[serde(try_from = "MapRepr", into = "MapRepr")]
pub struct GridMap {
    space: GridSpace,
    forward: Vec<usize>,
    inverse: Vec<usize>,
    // cycle id and position within that cycle, per cell
    cycle_of: Vec<usize>,
    position: Vec<usize>,
    cycles: Vec<Vec<usize>>,
}

#[derive(Serialize, Deserialize)]
struct MapRepr {
    resolution: usize,
    forward: Vec<usize>,
}

impl TryFrom<MapRepr> for GridMap {
    type Error = Error;
    fn try_from(repr: MapRepr) -> Result<Self> {
        GridMap::new(GridSpace::new(repr.resolution)?, repr.forward)
    }
}

impl From<GridMap> for MapRepr {
    fn from(map: GridMap) -> Self {
        MapRepr { resolution: map.space.resolution(), forward: map.forward }
    }
}

impl PartialEq for GridMap {
    fn eq(&self, other: &Self) -> bool {
        self.space == other.space && self.forward == other.forward
    }
}

impl Eq for GridMap {}

impl fmt::Debug for GridMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GridMap")
            .field("resolution", &self.space.resolution())
            .field("cycles", &self.cycles.len())
            .finish()
    }
}

impl GridMap {
    pub fn new(space: GridSpace, forward: Vec<usize>) -> Result<Self> {
        let n = space.resolution();
        if forward.len() != n {
            return Err(Error::NotAPermutation(n));
        }
        let mut inverse = vec![usize::MAX; n];
        for (x, &y) in forward.iter().enumerate() {
            if y >= n || inverse[y] != usize::MAX {
                return Err(Error::NotAPermutation(n));
            }
            inverse[y] = x;
        }
        let mut cycle_of = vec![usize::MAX; n];
        let mut position = vec![0; n];
        let mut cycles = Vec::new();
        for start in 0..n {
            if cycle_of[start] != usize::MAX {
                continue;
            }
            let id = cycles.len();
            let mut cycle = Vec::new();
            let mut x = start;
            loop {
                cycle_of[x] = id;
                position[x] = cycle.len();
                cycle.push(x);
                x = forward[x];
                if x == start {
                    break;
                }
            }
            cycles.push(cycle);
        }
        Ok(GridMap { space, forward, inverse, cycle_of, position, cycles })
    }

    pub fn from_fn(space: GridSpace, f: impl Fn(usize) -> usize) -> Result<Self> {
        GridMap::new(space, (0..space.resolution()).map(f).collect())
    }

    pub fn identity(space: GridSpace) -> Self {
        GridMap::from_fn(space, |x| x).expect("identity is a bijection")
    }

    /// `x -> x + 1 mod N`.
    pub fn cyclic_shift(space: GridSpace) -> Self {
        let n = space.resolution();
        GridMap::from_fn(space, |x| (x + 1) % n).expect("rotation is a bijection")
    }

    /// `x -> bitrev(x + 1 mod N)`.
    pub fn bit_reversal_increment(space: GridSpace) -> Self {
        let (n, bits) = (space.resolution(), space.log2());
        GridMap::from_fn(space, |x| reverse_bits((x + 1) % n, bits)).expect("composition of bijections")
    }

    /// Dyadic odometer: add one with carry propagating from the most
    /// significant bit downwards, i.e. `bitrev(bitrev(x) + 1)`.
    pub fn odometer(space: GridSpace) -> Self {
        let (n, bits) = (space.resolution(), space.log2());
        GridMap::from_fn(space, |x| reverse_bits((reverse_bits(x, bits) + 1) % n, bits))
            .expect("conjugate of a rotation")
    }

    /// Deterministic hash-style scrambler: three rounds of odd multiplication,
    /// additive constant, and xor-shift, all modulo `N`.
    pub fn hash_scrambler(space: GridSpace) -> Self {
        let bits = space.log2();
        let mask = (space.resolution() - 1) as u64;
        let shift = bits.div_ceil(2).max(1);
        let round = |x: u64, mul: u64, add: u64| {
            let x = x.wrapping_mul(mul).wrapping_add(add) & mask;
            (x ^ (x >> shift)) & mask
        };
        GridMap::from_fn(space, |x| {
            let mut v = x as u64;
            v = round(v, 0x9E37_79B9_7F4A_7C15, 0x632B_E59B_D9B4_E019);
            v = round(v, 0xBF58_476D_1CE4_E5B9, 0x94D0_49BB_1331_11EB);
            v = round(v, 0xD6E8_FEB8_6659_FD93, 0x2545_F491_4F6C_DD1D);
            v as usize
        })
        .expect("each round is a bijection modulo 2^bits")
    }

    /// Uniformly random permutation drawn from `rng`.
    pub fn random(space: GridSpace, rng: &mut impl rand_chacha::rand_core::RngCore) -> Self {
        GridMap::new(space, crate::rng::permutation(rng, space.resolution())).expect("shuffle is a bijection")
    }

    /// Swaps the images of cells `a` and `b` (`self` composed with a transposition).
    pub fn with_transposition(&self, a: usize, b: usize) -> Result<Self> {
        let n = self.space.resolution();
        for c in [a, b] {
            if c >= n {
                return Err(Error::CellOutOfRange { cell: c, resolution: n });
            }
        }
        let mut forward = self.forward.clone();
        forward.swap(a, b);
        GridMap::new(self.space, forward)
    }

    pub fn space(&self) -> GridSpace {
        self.space
    }

    pub fn forward(&self) -> &[usize] {
        &self.forward
    }

    pub fn image(&self, x: usize) -> usize {
        self.forward[x]
    }

    pub fn preimage(&self, y: usize) -> usize {
        self.inverse[y]
    }

    /// `P^n(x)` in O(1) through the cycle tables.
    pub fn power_of_cell(&self, x: usize, n: i64) -> usize {
        let cycle = &self.cycles[self.cycle_of[x]];
        let len = cycle.len() as i64;
        let pos = (self.position[x] as i64 + n).rem_euclid(len);
        cycle[pos as usize]
    }

    pub fn apply(&self, set: &CellSet) -> Result<CellSet> {
        self.apply_power(1, set)
    }

    /// `P^n(A)`; negative `n` uses the inverse.
    pub fn apply_power(&self, n: i64, set: &CellSet) -> Result<CellSet> {
        self.space.ensure_same(&set.space())?;
        let mut cells: Vec<usize> = set.cells().iter().map(|&x| self.power_of_cell(x, n)).collect();
        cells.sort_unstable();
        Ok(CellSet { space: self.space, cells })
    }

    /// Exact `mu(P^n A ∩ B)`.
    pub fn correlation(&self, n: i64, a: &CellSet, b: &CellSet) -> Result<Rational> {
        Ok(self.space.measure_of(self.correlation_count(n, a, b)?))
    }

    /// Number of cells in `P^n A ∩ B`.
    pub fn correlation_count(&self, n: i64, a: &CellSet, b: &CellSet) -> Result<usize> {
        self.space.ensure_same(&a.space())?;
        self.space.ensure_same(&b.space())?;
        Ok(a.cells().iter().filter(|&&x| b.contains(self.power_of_cell(x, n))).count())
    }

    pub fn inverse_map(&self) -> GridMap {
        GridMap::new(self.space, self.inverse.clone()).expect("inverse of a bijection")
    }

    /// `self ∘ other`: first `other`, then `self`.
    pub fn compose(&self, other: &GridMap) -> Result<GridMap> {
        self.space.ensure_same(&other.space)?;
        GridMap::new(self.space, other.forward.iter().map(|&x| self.forward[x]).collect())
    }

    pub fn power_map(&self, n: i64) -> GridMap {
        GridMap::from_fn(self.space, |x| self.power_of_cell(x, n)).expect("power of a bijection")
    }

    pub fn cycles(&self) -> &[Vec<usize>] {
        &self.cycles
    }

    /// Sorted cycle lengths.
    pub fn cycle_type(&self) -> Vec<usize> {
        let mut lengths: Vec<usize> = self.cycles.iter().map(Vec::len).collect();
        lengths.sort_unstable();
        lengths
    }

    pub fn shortest_cycle(&self) -> usize {
        self.cycles.iter().map(Vec::len).min().unwrap_or(0)
    }
}

pub fn reverse_bits(x: usize, bits: u32) -> usize {
    if bits == 0 {
        return 0;
    }
    x.reverse_bits() >> (usize::BITS - bits)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::ratio;
    use crate::rng;
    use proptest::prelude::*;

    fn space(n: usize) -> GridSpace {
        GridSpace::new(n).unwrap()
    }

    fn set(n: usize, cells: &[usize]) -> CellSet {
        CellSet::from_cells(space(n), cells.iter().copied()).unwrap()
    }

    #[test]
    fn resolution_must_be_power_of_two() {
        assert!(GridSpace::new(0).is_err());
        assert!(GridSpace::new(1).is_err());
        assert!(GridSpace::new(12).is_err());
        let s = space(8);
        assert_eq!(s.cell_measure() * crate::rational::integer(8), crate::rational::integer(1));
    }

    #[test]
    fn set_ops_examples() {
        let (a, b) = (set(4, &[0, 1]), set(4, &[1, 2]));
        assert_eq!(a.symmetric_difference(&b).unwrap().measure(), ratio(1, 2));
        assert_eq!(CellSet::full(space(4)).complement().measure(), ratio(0, 1));
        let (even, odd) = (set(8, &[0, 2, 4, 6]), set(8, &[1, 3, 5, 7]));
        assert_eq!(even.intersection(&odd).unwrap().measure(), ratio(0, 1));
        assert_eq!(even.union(&odd).unwrap().measure(), ratio(1, 1));
        assert_eq!(even.complement(), odd);
    }

    #[test]
    fn mismatched_spaces_are_rejected() {
        let err = set(4, &[0]).union(&set(8, &[0])).unwrap_err();
        assert!(matches!(err, Error::SpaceMismatch { left: 4, right: 8 }));
    }

    #[test]
    fn cells_validated() {
        assert!(CellSet::new(space(4), vec![1, 1]).is_err());
        assert!(CellSet::new(space(4), vec![2, 1]).is_err());
        assert!(CellSet::new(space(4), vec![4]).is_err());
        assert!(GridMap::new(space(4), vec![0, 0, 1, 2]).is_err());
        assert!(GridMap::new(space(4), vec![0, 1, 2]).is_err());
    }

    #[test]
    fn apply_power_examples() {
        let id = GridMap::identity(space(16));
        let a = set(16, &[1, 5, 9]);
        assert_eq!(id.apply_power(5, &a).unwrap(), a);
        let c = GridMap::cyclic_shift(space(4));
        assert_eq!(c.apply_power(2, &set(4, &[0])).unwrap(), set(4, &[2]));
        assert_eq!(c.apply_power(-1, &set(4, &[0])).unwrap(), set(4, &[3]));
    }

    #[test]
    fn correlation_examples() {
        let id = GridMap::identity(space(8));
        let (a, b) = (set(8, &[0, 1, 2]), set(8, &[2, 3]));
        assert_eq!(id.correlation(7, &a, &b).unwrap(), a.intersection(&b).unwrap().measure());
        let c = GridMap::cyclic_shift(space(4));
        assert_eq!(c.correlation(2, &set(4, &[0]), &set(4, &[2])).unwrap(), ratio(1, 4));
    }

    #[test]
    fn scrambler_correlation_matches_brute_force() {
        let s = space(1 << 12);
        let map = GridMap::bit_reversal_increment(s);
        let first_half = CellSet::interval(s, 0, 1 << 11).unwrap();
        let even = CellSet::from_cells(s, (0..1 << 12).step_by(2)).unwrap();
        // brute force: walk every cell once through the raw forward table
        let mut count = 0;
        for x in 0..(1 << 12) {
            if x < (1 << 11) && map.forward()[x] % 2 == 0 {
                count += 1;
            }
        }
        assert_eq!(map.correlation(1, &first_half, &even).unwrap(), from_count(count, 1 << 12));
    }

    #[test]
    fn named_maps_are_bijections_with_expected_structure() {
        let s = space(1 << 6);
        assert_eq!(GridMap::cyclic_shift(s).cycle_type(), vec![64]);
        assert_eq!(GridMap::odometer(s).cycle_type(), vec![64]);
        let h = GridMap::hash_scrambler(s);
        assert_eq!(h.cycle_type().iter().sum::<usize>(), 64);
        assert_eq!(GridMap::identity(s).shortest_cycle(), 1);
    }

    #[test]
    fn serde_shape() {
        let m = GridMap::cyclic_shift(space(4));
        let json = serde_json::to_string(&m).unwrap();
        assert_eq!(json, r#"{"resolution":4,"forward":[1,2,3,0]}"#);
        let back: GridMap = serde_json::from_str(&json).unwrap();
        assert_eq!(back, m);
        let bad: std::result::Result<CellSet, _> = serde_json::from_str(r#"{"resolution":4,"cells":[3,1]}"#);
        assert!(bad.is_err());
    }

    fn arb_instance(max_log2: u32) -> impl Strategy<Value = (GridMap, CellSet, CellSet)> {
        (1..=max_log2, any::<u64>()).prop_map(|(log2, seed)| {
            let s = GridSpace::with_log2(log2).unwrap();
            let mut r = rng::stream(seed, 0);
            let map = GridMap::random(s, &mut r);
            let n = s.resolution();
            let ka = rng::below(&mut r, n as u64 + 1) as usize;
            let kb = rng::below(&mut r, n as u64 + 1) as usize;
            let a = CellSet::new(s, rng::subset(&mut r, n, ka)).unwrap();
            let b = CellSet::new(s, rng::subset(&mut r, n, kb)).unwrap();
            (map, a, b)
        })
    }

    proptest! {
        #[test]
        fn images_preserve_measure((map, a, _b) in arb_instance(8), n in -20i64..20) {
            prop_assert_eq!(map.apply_power(n, &a).unwrap().measure(), a.measure());
            prop_assert_eq!(map.apply_power(-n, &map.apply_power(n, &a).unwrap()).unwrap(), a);
        }

        #[test]
        fn cycle_power_matches_repeated_application((map, a, _b) in arb_instance(10), n in -16i64..=16) {
            let step = if n >= 0 { map.clone() } else { map.inverse_map() };
            let mut cur = a.clone();
            for _ in 0..n.unsigned_abs() {
                cur = step.apply(&cur).unwrap();
            }
            prop_assert_eq!(map.apply_power(n, &a).unwrap(), cur);
        }

        #[test]
        fn correlation_reversal((map, a, b) in arb_instance(8), n in -8i64..=8) {
            let inv = map.inverse_map();
            let lhs = map.correlation(n, &a, &b).unwrap();
            prop_assert_eq!(&lhs, &inv.correlation(-n, &a, &b).unwrap());
            // mu(P^n A ∩ B) = mu(A ∩ P^-n B)
            prop_assert_eq!(&lhs, &map.correlation(-n, &b, &a).unwrap());
        }

        #[test]
        fn symmetric_difference_identity((_m, a, b) in arb_instance(8)) {
            let lhs = a.symmetric_difference(&b).unwrap().measure();
            let rhs = a.union(&b).unwrap().measure() - a.intersection(&b).unwrap().measure();
            prop_assert_eq!(&lhs, &rhs);
            prop_assert_eq!(lhs, a.symmetric_difference_measure(&b).unwrap());
        }
    }
}
