//! Rokhlin towers on the grid: greedy construction, approximation of sets
//! by unions of levels, the rank-one test `R(j, k)`, the openness
//! certificate for perturbations, and a windowed partial-rigidity estimate.

use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::{CellSet, GridMap};
use crate::rational::{self, format_rational, integer, Rational};
use crate::rng;

/// A tower `E, PE, …, P^(n-1)E` of pairwise disjoint levels and the
/// remainder `D`, together partitioning the space.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "TowerRepr", into = "TowerRepr")]
pub struct Tower {
    map: GridMap,
    height: usize,
    levels: Vec<CellSet>,
    remainder: CellSet,
}

#[derive(Serialize, Deserialize)]
struct TowerRepr {
    map: GridMap,
    height: usize,
    base: CellSet,
}

impl TryFrom<TowerRepr> for Tower {
    type Error = Error;

    fn try_from(repr: TowerRepr) -> Result<Self> {
        Tower::from_base(&repr.map, repr.base, repr.height)
    }
}

impl From<Tower> for TowerRepr {
    fn from(tower: Tower) -> Self {
        let base = tower.base().clone();
        TowerRepr { map: tower.map, height: tower.height, base }
    }
}

impl Tower {
    /// Builds the levels over `base` and checks the tower invariants.
    pub fn from_base(map: &GridMap, base: CellSet, height: usize) -> Result<Self> {
        if height == 0 {
            return Err(Error::InvalidArgument("tower height must be at least 1".into()));
        }
        let space = map.space();
        space.ensure_same(&base.space())?;
        let mut claimed = vec![false; space.resolution()];
        let mut levels = Vec::with_capacity(height);
        let mut level = base;
        for i in 0..height {
            for &x in level.cells() {
                if std::mem::replace(&mut claimed[x], true) {
                    return Err(Error::TowerInvariant(format!("cell {x} lies in two levels (level {i})")));
                }
            }
            let next = map.apply(&level)?;
            levels.push(level);
            level = next;
        }
        let remainder = CellSet::new(space, (0..space.resolution()).filter(|&x| !claimed[x]).collect())?;
        Ok(Tower { map: map.clone(), height, levels, remainder })
    }

    pub fn map(&self) -> &GridMap {
        &self.map
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn base(&self) -> &CellSet {
        &self.levels[0]
    }

    pub fn levels(&self) -> &[CellSet] {
        &self.levels
    }

    pub fn remainder(&self) -> &CellSet {
        &self.remainder
    }

    /// An empty base: the tower approximates nothing but `∅`.
    pub fn is_degenerate(&self) -> bool {
        self.base().is_empty()
    }

    /// `level_of[x]`, `None` on the remainder.
    pub fn level_index(&self) -> Vec<Option<usize>> {
        let mut index = vec![None; self.map.space().resolution()];
        for (i, level) in self.levels.iter().enumerate() {
            for &x in level.cells() {
                index[x] = Some(i);
            }
        }
        index
    }

    /// Union of the levels whose indices are set in `chosen`.
    pub fn union_of(&self, chosen: &[bool]) -> Result<CellSet> {
        let cells = self
            .levels
            .iter()
            .zip(chosen)
            .filter(|(_, &keep)| keep)
            .flat_map(|(level, _)| level.cells().iter().copied());
        CellSet::from_cells(self.map.space(), cells)
    }
}

/// Greedy base: scanning cells upward, `x` joins the base when
/// `x, Px, …, P^(n-1)x` are all still unclaimed.
pub fn build_tower(p: &GridMap, height: usize) -> Result<Tower> {
    if height == 0 {
        return Err(Error::InvalidArgument("tower height must be at least 1".into()));
    }
    let n = p.space().resolution();
    let mut claimed = vec![false; n];
    let mut base = Vec::new();
    let mut orbit = Vec::with_capacity(height);
    for x in 0..n {
        orbit.clear();
        let mut y = x;
        for _ in 0..height {
            if claimed[y] || orbit.contains(&y) {
                break;
            }
            orbit.push(y);
            y = p.image(y);
        }
        if orbit.len() == height {
            for &y in &orbit {
                claimed[y] = true;
            }
            base.push(x);
        }
    }
    Tower::from_base(p, CellSet::new(p.space(), base)?, height)
}

/// Majority rule: level `L` joins `B` when `mu(A ∩ L) > mu(L)/2`. Among all
/// unions of levels this minimizes `mu(A △ B)`.
pub fn approximation_accuracy(tower: &Tower, a: &CellSet) -> Result<(CellSet, Rational)> {
    let chosen = majority_levels(tower, a)?;
    let b = tower.union_of(&chosen)?;
    let accuracy = a.symmetric_difference_measure(&b)?;
    Ok((b, accuracy))
}

fn majority_levels(tower: &Tower, a: &CellSet) -> Result<Vec<bool>> {
    tower
        .levels()
        .iter()
        .map(|level| Ok(2 * a.intersection_count(level)? > level.len()))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankOneResult {
    /// Tower minimizing the worst accuracy; the first such height wins ties.
    pub tower: Tower,
    /// `accuracy_a = max_i mu(A_i △ B_i)` for that tower.
    #[serde(with = "rational::as_str")]
    pub accuracy_a: Rational,
    #[serde(with = "rational::vec_as_str")]
    pub accuracies: Vec<Rational>,
    pub k: u64,
    /// True when `accuracy_a < 1/k`; false only means none was found.
    pub verdict: bool,
}

pub fn rank_one_membership(p: &GridMap, sets: &[CellSet], k: u64, heights: &[usize]) -> Result<RankOneResult> {
    if heights.is_empty() {
        return Err(Error::InvalidArgument("empty height budget".into()));
    }
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    let mut best: Option<(Tower, Vec<Rational>, Rational)> = None;
    for &height in heights {
        let tower = build_tower(p, height)?;
        let accuracies =
            sets.iter().map(|a| Ok(approximation_accuracy(&tower, a)?.1)).collect::<Result<Vec<_>>>()?;
        let worst = accuracies.iter().max().cloned().unwrap_or_else(Rational::zero);
        if best.as_ref().map_or(true, |(_, _, b)| worst < *b) {
            best = Some((tower, accuracies, worst));
        }
    }
    let (tower, accuracies, accuracy_a) = best.expect("nonempty budget");
    let verdict = accuracy_a < Rational::new(1.into(), k.into());
    Ok(RankOneResult { tower, accuracy_a, accuracies, k, verdict })
}

/// `Ẽ = E ∖ (VE ∪ … ∪ V^(n-1)E)`; its first `n` images under `V` are
/// pairwise disjoint.
pub fn shrink_base(v: &GridMap, base: &CellSet, height: usize) -> Result<CellSet> {
    if height < 2 {
        return Err(Error::InvalidArgument("shrink_base needs height at least 2".into()));
    }
    v.space().ensure_same(&base.space())?;
    let mut hit = vec![false; v.space().resolution()];
    for &x in base.cells() {
        let mut y = x;
        for _ in 1..height {
            y = v.image(y);
            hit[y] = true;
        }
    }
    let shrunk = CellSet::new(v.space(), base.cells().iter().copied().filter(|&x| !hit[x]).collect())?;
    // asserted, not assumed: the images form a tower for V
    Tower::from_base(v, shrunk.clone(), height)?;
    Ok(shrunk)
}

/// One inequality of the openness chain.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainEntry {
    pub name: String,
    #[serde(with = "rational::as_str")]
    pub value: Rational,
    #[serde(with = "rational::as_str")]
    pub bound: Rational,
    /// `value < bound` rather than `value <= bound`.
    pub strict: bool,
    pub holds: bool,
}

impl ChainEntry {
    fn new(name: &str, value: Rational, bound: Rational, strict: bool) -> Self {
        let holds = if strict { value < bound } else { value <= bound };
        ChainEntry { name: name.to_string(), value, bound, strict, holds }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpennessCertificate {
    pub j: usize,
    pub k: u64,
    pub tower: Tower,
    /// Worst accuracy of the `S`-tower on the sets.
    #[serde(with = "rational::as_str")]
    pub accuracy_a: Rational,
    /// `(1/n²)(1/k - accuracy_a)`
    #[serde(with = "rational::as_str")]
    pub b: Rational,
    /// Largest `|mu(V^m L_i ∩ L_j) - mu(S^m L_i ∩ L_j)|` over levels and `|m| <= window`.
    #[serde(with = "rational::as_str")]
    pub b_eff: Rational,
    pub window: u32,
    pub perturbed: GridMap,
    pub shrunk_base: CellSet,
    /// Worst accuracy of the `V`-tower over `Ẽ` on the sets.
    #[serde(with = "rational::as_str")]
    pub final_accuracy: Rational,
    pub chain: Vec<ChainEntry>,
    pub b_eff_within_b: bool,
    pub chain_holds: bool,
    /// `final_accuracy < 1/k`.
    pub pass: bool,
}

pub fn openness_certificate(
    s: &GridMap,
    tower: &Tower,
    k: u64,
    sets: &[CellSet],
    v: &GridMap,
    window: u32,
) -> Result<OpennessCertificate> {
    if tower.map() != s {
        return Err(Error::InvalidArgument("tower is not built on S".into()));
    }
    s.space().ensure_same(&v.space())?;
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    let inv_k = Rational::new(1.into(), k.into());
    let approximations =
        sets.iter().map(|a| approximation_accuracy(tower, a)).collect::<Result<Vec<_>>>()?;
    let accuracy_a = approximations.iter().map(|(_, acc)| acc.clone()).max().unwrap_or_else(Rational::zero);
    if accuracy_a >= inv_k {
        return Err(Error::AccuracyPrecondition { a: format_rational(&accuracy_a), k });
    }
    let n = tower.height();
    let n_r = integer(n as i64);
    let b = (&inv_k - &accuracy_a) / (&n_r * &n_r);
    let b_eff = level_deviation(s, v, tower, window);

    let shrunk_base = if n >= 2 { shrink_base(v, tower.base(), n)? } else { tower.base().clone() };
    let v_tower = Tower::from_base(v, shrunk_base.clone(), n)?;

    let base_difference = tower.base().symmetric_difference_measure(&shrunk_base)?;
    let level_difference = tower
        .levels()
        .iter()
        .zip(v_tower.levels())
        .map(|(l, m)| l.symmetric_difference_measure(m))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .max()
        .unwrap_or_else(Rational::zero);
    let mut union_difference = Rational::zero();
    let mut final_accuracy = Rational::zero();
    for (a, (b_set, _)) in sets.iter().zip(&approximations) {
        let chosen = majority_levels(tower, a)?;
        let moved = v_tower.union_of(&chosen)?;
        union_difference = union_difference.max(b_set.symmetric_difference_measure(&moved)?);
        final_accuracy = final_accuracy.max(approximation_accuracy(&v_tower, a)?.1);
    }

    let n_minus = |d: i64| integer((n as i64 - d).max(0));
    let chain = vec![
        ChainEntry::new("base_difference", base_difference, n_minus(2) * &b_eff, false),
        ChainEntry::new("level_difference", level_difference, n_minus(1) * &b_eff, false),
        ChainEntry::new("union_difference", union_difference, &n_r * n_minus(1) * &b_eff, false),
        ChainEntry::new("final_accuracy", final_accuracy.clone(), inv_k.clone(), true),
    ];
    let chain_holds = chain.iter().all(|e| e.holds);
    Ok(OpennessCertificate {
        j: sets.len(),
        k,
        tower: tower.clone(),
        b_eff_within_b: b_eff <= b,
        accuracy_a,
        b,
        b_eff,
        window,
        perturbed: v.clone(),
        shrunk_base,
        pass: final_accuracy < inv_k,
        final_accuracy,
        chain,
        chain_holds,
    })
}

/// Level-wise neighborhood deviation of `v` from `s` over the tower levels.
pub fn level_deviation(s: &GridMap, v: &GridMap, tower: &Tower, window: u32) -> Rational {
    let n = tower.height();
    let index = tower.level_index();
    let w = window as i64;
    let mut worst = 0usize;
    for m in -w..=w {
        let mut counts = vec![0i64; n * n];
        for (i, level) in tower.levels().iter().enumerate() {
            for &x in level.cells() {
                if let Some(j) = index[s.power_of_cell(x, m)] {
                    counts[i * n + j] += 1;
                }
                if let Some(j) = index[v.power_of_cell(x, m)] {
                    counts[i * n + j] -= 1;
                }
            }
        }
        worst = worst.max(counts.iter().map(|c| c.unsigned_abs() as usize).max().unwrap_or(0));
    }
    s.space().measure_of(worst)
}

/// `S ∘ τ_1 ∘ … ∘ τ_r` for `swaps` transpositions of distinct cells drawn
/// from stream `(seed, 0)`.
pub fn perturb(s: &GridMap, seed: u64, swaps: usize) -> Result<GridMap> {
    let n = s.space().resolution() as u64;
    if n < 2 {
        return Err(Error::InvalidArgument("cannot perturb a one-cell space".into()));
    }
    let mut rng = rng::stream(seed, 0);
    let mut v = s.clone();
    for _ in 0..swaps {
        let a = rng::below(&mut rng, n) as usize;
        let b = (a + 1 + rng::below(&mut rng, n - 1) as usize) % n as usize;
        v = v.with_transposition(a, b)?;
    }
    Ok(v)
}

/// `max_{1<=i<=W} mu(A ∩ P^i A) / mu(A)`: a windowed surrogate for the
/// limsup in the rigidity coefficient (`rigidity_a`), not a decision procedure.
pub fn partial_rigidity_estimate(p: &GridMap, a: &CellSet, window: u32) -> Result<Rational> {
    if a.is_empty() {
        return Err(Error::ZeroMeasure);
    }
    if window == 0 {
        return Err(Error::InvalidArgument("window must be at least 1".into()));
    }
    p.space().ensure_same(&a.space())?;
    let mask = a.to_mask();
    let best = (1..=window as i64)
        .map(|i| a.cells().iter().filter(|&&x| mask[p.power_of_cell(x, i)]).count())
        .max()
        .unwrap_or(0);
    Ok(rational::from_count(best, a.len()))
}

/// `a + n(n-1)·b_eff`, the right end of the openness chain.
pub fn chain_total(cert: &OpennessCertificate) -> Rational {
    let n = integer(cert.tower.height() as i64);
    &cert.accuracy_a + &n * (&n - Rational::one()) * &cert.b_eff
}
