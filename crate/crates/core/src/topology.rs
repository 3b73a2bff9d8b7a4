//! Weak and leash metrics, the neighborhood base `U(T, q, ε)`, and the two
//! refinement steps that shrink a neighborhood of the Bernoulli shift to one
//! described by cylinder atoms.
//!
//! Quantifiers over all powers are truncated to `|n| <= W`; every
//! neighborhood carries its window.

use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::{CellSet, GridMap, GridSpace};
use crate::rational::{self, abs_diff, format_rational, inv_pow2, Rational};
use crate::symbolic::{atom_count, best_cylinder_approximation, AtomUnion, BernoulliShift, BlockLayout};

/// Finite prefix of a generating collection; set `i` (1-indexed) has weight `2^-i`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Basis {
    sets: Vec<CellSet>,
}

impl Basis {
    pub fn new(sets: Vec<CellSet>) -> Result<Self> {
        let Some(first) = sets.first() else {
            return Err(Error::InvalidArgument("basis must be nonempty".into()));
        };
        for s in &sets {
            first.space().ensure_same(&s.space())?;
        }
        Ok(Basis { sets })
    }

    /// The first `count` dyadic intervals: both halves, then the four
    /// quarters, and so on.
    pub fn dyadic(space: GridSpace, count: usize) -> Result<Self> {
        let mut sets = Vec::with_capacity(count);
        'levels: for level in 1..=space.log2() {
            let width = space.resolution() >> level;
            for i in 0..(1usize << level) {
                if sets.len() == count {
                    break 'levels;
                }
                sets.push(CellSet::interval(space, i * width, (i + 1) * width)?);
            }
        }
        if sets.len() < count {
            return Err(Error::InvalidArgument(format!("only {} dyadic intervals exist", sets.len())));
        }
        Basis::new(sets)
    }

    pub fn sets(&self) -> &[CellSet] {
        &self.sets
    }

    pub fn space(&self) -> GridSpace {
        self.sets[0].space()
    }

    /// Weight of the set at 0-based position `i`.
    pub fn weight(&self, i: usize) -> Rational {
        inv_pow2(i as u32 + 1)
    }

    /// Bound on the weight mass dropped by truncating the collection.
    pub fn tail_bound(&self) -> Rational {
        inv_pow2(self.sets.len() as u32)
    }
}

fn check_spaces(p: &GridMap, r: &GridMap, basis: &Basis) -> Result<()> {
    p.space().ensure_same(&r.space())?;
    p.space().ensure_same(&basis.space())
}

/// `d(P,R) = Σ 2^-i (mu(P A_i △ R A_i) + mu(P^-1 A_i △ R^-1 A_i))`.
pub fn metric_d(p: &GridMap, r: &GridMap, basis: &Basis) -> Result<Rational> {
    check_spaces(p, r, basis)?;
    let mut total = Rational::zero();
    for (i, a) in basis.sets().iter().enumerate() {
        let fwd = p.apply_power(1, a)?.symmetric_difference_measure(&r.apply_power(1, a)?)?;
        let bwd = p.apply_power(-1, a)?.symmetric_difference_measure(&r.apply_power(-1, a)?)?;
        total += basis.weight(i) * (fwd + bwd);
    }
    Ok(total)
}

fn metric_a_power(p: &GridMap, r: &GridMap, basis: &Basis, n: i64) -> Result<Rational> {
    let mut total = Rational::zero();
    for (i, ai) in basis.sets().iter().enumerate() {
        let (pi, ri) = (p.apply_power(n, ai)?, r.apply_power(n, ai)?);
        for (j, aj) in basis.sets().iter().enumerate() {
            let dev = abs_diff(&pi.intersection(aj)?.measure(), &ri.intersection(aj)?.measure());
            total += basis.weight(i) * basis.weight(j) * dev;
        }
    }
    Ok(total)
}

/// `a(P,R) = Σ 2^-(i+j) |mu(P A_i ∩ A_j) - mu(R A_i ∩ A_j)|`.
pub fn metric_a(p: &GridMap, r: &GridMap, basis: &Basis) -> Result<Rational> {
    check_spaces(p, r, basis)?;
    metric_a_power(p, r, basis, 1)
}

/// `τ_W(P,R) = d(P,R) + max_{|n|<=W} a(P^n, R^n)`.
pub fn metric_tau(p: &GridMap, r: &GridMap, basis: &Basis, window: u32) -> Result<Rational> {
    if window == 0 {
        return Err(Error::InvalidArgument("window must be >= 1".into()));
    }
    let d = metric_d(p, r, basis)?;
    let mut sup = Rational::zero();
    for n in -(window as i64)..=window as i64 {
        sup = sup.max(metric_a_power(p, r, basis, n)?);
    }
    Ok(d + sup)
}

/// One CSV row of the `metrics` subcommand.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MetricRow {
    pub d: Rational,
    pub a: Rational,
    pub tau: Rational,
    pub window: u32,
}

impl MetricRow {
    pub fn compute(p: &GridMap, r: &GridMap, basis: &Basis, window: u32) -> Result<Self> {
        Ok(MetricRow {
            d: metric_d(p, r, basis)?,
            a: metric_a(p, r, basis)?,
            tau: metric_tau(p, r, basis, window)?,
            window,
        })
    }

    pub const CSV_HEADER: &'static str = "d,a,tau_W,W";

    pub fn to_csv(&self) -> String {
        format!("{},{},{},{}", format_rational(&self.d), format_rational(&self.a), format_rational(&self.tau), self.window)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Center {
    Grid(GridMap),
    Bernoulli(BernoulliShift),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SetCollection {
    Cells(Vec<CellSet>),
    Symbolic(Vec<AtomUnion>),
}

impl SetCollection {
    pub fn len(&self) -> usize {
        match self {
            SetCollection::Cells(v) => v.len(),
            SetCollection::Symbolic(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// `U(center, q, ε)` with powers truncated to `|n| <= window`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NeighborhoodSpec {
    center: Center,
    q: SetCollection,
    epsilon: Rational,
    window: u32,
}

impl NeighborhoodSpec {
    pub fn new(center: Center, q: SetCollection, epsilon: Rational, window: u32) -> Result<Self> {
        if !rational::is_positive(&epsilon) {
            return Err(Error::InvalidNeighborhood("epsilon must be positive"));
        }
        if window == 0 {
            return Err(Error::InvalidNeighborhood("window must be >= 1"));
        }
        if q.is_empty() {
            return Err(Error::InvalidNeighborhood("q must be nonempty"));
        }
        match (&center, &q) {
            (Center::Grid(map), SetCollection::Cells(sets)) => {
                for s in sets {
                    map.space().ensure_same(&s.space())?;
                }
            }
            (Center::Bernoulli(_), SetCollection::Symbolic(_)) => {}
            _ => return Err(Error::InvalidNeighborhood("q must use the center's set representation")),
        }
        Ok(NeighborhoodSpec { center, q, epsilon, window })
    }

    pub fn center(&self) -> &Center {
        &self.center
    }

    pub fn q(&self) -> &SetCollection {
        &self.q
    }

    pub fn epsilon(&self) -> &Rational {
        &self.epsilon
    }

    pub fn window(&self) -> u32 {
        self.window
    }

    /// `mu_center(T^n A_i ∩ A_j)` for every `n` in the window, indexed `[n + W][i][j]`.
    fn center_table(&self) -> Result<Vec<Vec<Vec<Rational>>>> {
        let w = self.window as i64;
        match (&self.center, &self.q) {
            (Center::Grid(map), SetCollection::Cells(sets)) => {
                (-w..=w).map(|n| grid_table(map, n, sets)).collect()
            }
            (Center::Bernoulli(shift), SetCollection::Symbolic(sets)) => Ok((-w..=w)
                .map(|n| {
                    sets.iter()
                        .map(|a| sets.iter().map(|b| shift.correlation(n, a, b)).collect())
                        .collect()
                })
                .collect()),
            _ => unreachable!("validated in new"),
        }
    }
}

fn grid_table(map: &GridMap, n: i64, sets: &[CellSet]) -> Result<Vec<Vec<Rational>>> {
    let space = map.space();
    let masks: Vec<Vec<bool>> = sets.iter().map(CellSet::to_mask).collect();
    sets.iter()
        .map(|a| {
            map.space().ensure_same(&a.space())?;
            let image: Vec<usize> = a.cells().iter().map(|&x| map.power_of_cell(x, n)).collect();
            Ok(masks
                .iter()
                .map(|mask| space.measure_of(image.iter().filter(|&&y| mask[y]).count()))
                .collect())
        })
        .collect()
}

/// The map tested for membership.
#[derive(Clone, Copy, Debug)]
pub enum Candidate<'a> {
    Grid(&'a GridMap),
    Bernoulli,
}

/// Power and ordered pair `(A, B)` attaining a deviation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Witness {
    pub power: i64,
    pub a: usize,
    pub b: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Membership {
    pub inside: bool,
    #[serde(with = "rational::as_str")]
    pub worst: Rational,
    pub witness: Witness,
}

/// Checks `|mu(T^n A ∩ B) - mu(R^n A' ∩ B')| < ε` for all `|n| <= W` and all
/// ordered pairs from `q`, where `A'` is `A` itself or its image under `bridge`.
///
/// The maximum is reported with ties broken by the smallest `(n, A, B)`.
pub fn neighborhood_contains(
    spec: &NeighborhoodSpec,
    candidate: Candidate<'_>,
    bridge: Option<&[CellSet]>,
) -> Result<Membership> {
    let center = spec.center_table()?;
    let w = spec.window as i64;
    let candidate_table: Vec<Vec<Vec<Rational>>> = match (candidate, &spec.center, &spec.q) {
        (Candidate::Bernoulli, Center::Bernoulli(_), _) => center.clone(),
        (Candidate::Grid(map), Center::Grid(_), SetCollection::Cells(sets)) => {
            let sets = bridge.unwrap_or(sets);
            check_bridge(spec.q.len(), sets)?;
            (-w..=w).map(|n| grid_table(map, n, sets)).collect::<Result<_>>()?
        }
        (Candidate::Grid(map), Center::Bernoulli(_), _) => {
            let sets = bridge.ok_or(Error::MissingBridge)?;
            check_bridge(spec.q.len(), sets)?;
            (-w..=w).map(|n| grid_table(map, n, sets)).collect::<Result<_>>()?
        }
        (Candidate::Bernoulli, Center::Grid(_), _) => return Err(Error::RepresentationMismatch),
        (Candidate::Grid(_), Center::Grid(_), SetCollection::Symbolic(_)) => unreachable!("validated in new"),
    };
    let mut worst = Rational::zero();
    let mut witness = Witness { power: -w, a: 0, b: 0 };
    for (ni, (c_rows, r_rows)) in center.iter().zip(&candidate_table).enumerate() {
        for (i, (c_row, r_row)) in c_rows.iter().zip(r_rows).enumerate() {
            for (j, (c, r)) in c_row.iter().zip(r_row).enumerate() {
                let dev = abs_diff(c, r);
                if dev > worst {
                    worst = dev;
                    witness = Witness { power: ni as i64 - w, a: i, b: j };
                }
            }
        }
    }
    Ok(Membership { inside: worst < spec.epsilon, worst, witness })
}

fn check_bridge(expected: usize, sets: &[CellSet]) -> Result<()> {
    if sets.len() != expected {
        return Err(Error::BridgeLength { expected, got: sets.len() });
    }
    Ok(())
}

/// Output of the first refinement step.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RefinedCollection {
    pub sets: Vec<AtomUnion>,
    pub ranks: Vec<u32>,
    pub rank: u32,
    #[serde(with = "rational::vec_as_str")]
    pub precisions: Vec<Rational>,
}

/// Replaces each `A_j` by its majority-rule approximation at the smallest
/// rank `k_j <= max_rank` with `mu(Ã_j △ A_j) < ε/5`; `k = max k_j`.
pub fn refine_step_one(q: &[AtomUnion], epsilon: &Rational, max_rank: u32) -> Result<RefinedCollection> {
    if !rational::is_positive(epsilon) {
        return Err(Error::InvalidArgument("epsilon must be positive".into()));
    }
    let target = epsilon / rational::integer(5);
    let mut out = RefinedCollection { sets: Vec::new(), ranks: Vec::new(), rank: 0, precisions: Vec::new() };
    for (index, set) in q.iter().enumerate() {
        let mut best: Option<Rational> = None;
        let mut found = None;
        for k in 0..=max_rank.min(set.rank()) {
            let (approx, err) = best_cylinder_approximation(set, k)?;
            if err < target {
                found = Some((k, approx, err));
                break;
            }
            best = Some(err);
        }
        // a set of rank above max_rank cannot be represented exactly; the loop above covers it
        let Some((k, approx, err)) = found else {
            return Err(Error::PrecisionUnattainable {
                index,
                max_rank,
                best: best.map(|b| format_rational(&b)).unwrap_or_default(),
            });
        };
        out.rank = out.rank.max(k);
        out.sets.push(approx);
        out.ranks.push(k);
        out.precisions.push(err);
    }
    Ok(out)
}

/// `ε / (5 · 2^(4k+2))`.
pub fn atom_radius(k: u32, epsilon: &Rational) -> Rational {
    epsilon * inv_pow2(4 * k + 2) / rational::integer(5)
}

/// `U(T, q̂, ε/(5·2^(4k+2)))` with `q̂ = atoms(k)`.
pub fn refine_step_two(k: u32, epsilon: &Rational, window: u32) -> Result<NeighborhoodSpec> {
    let q = (0..atom_count(k)).map(|t| AtomUnion::single(k, t)).collect::<Result<Vec<_>>>()?;
    NeighborhoodSpec::new(Center::Bernoulli(BernoulliShift), SetCollection::Symbolic(q), atom_radius(k, epsilon), window)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AuditLevel {
    /// `U(T, q̂, ε/(5·2^(4k+2))) ⊂ U(T, q̃, ε/5)`.
    AtomsToRefined,
    /// `U(T, q̃, ε/5) ⊂ U(T, q, ε)`.
    RefinedToOriginal,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContainmentRecord {
    pub level: AuditLevel,
    pub fine: Membership,
    pub coarse: Membership,
}

impl ContainmentRecord {
    pub fn implication_holds(&self) -> bool {
        !self.fine.inside || self.coarse.inside
    }
}

/// The three nested neighborhoods of the Bernoulli shift built from `(q, ε)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RefinementChain {
    original: Vec<AtomUnion>,
    epsilon: Rational,
    window: u32,
    refined: RefinedCollection,
}

impl RefinementChain {
    pub fn new(q: Vec<AtomUnion>, epsilon: Rational, max_rank: u32, window: u32) -> Result<Self> {
        let refined = refine_step_one(&q, &epsilon, max_rank)?;
        Ok(RefinementChain { original: q, epsilon, window, refined })
    }

    pub fn rank(&self) -> u32 {
        self.refined.rank
    }

    pub fn refined(&self) -> &RefinedCollection {
        &self.refined
    }

    pub fn original(&self) -> &[AtomUnion] {
        &self.original
    }

    pub fn epsilon(&self) -> &Rational {
        &self.epsilon
    }

    pub fn window(&self) -> u32 {
        self.window
    }

    pub fn original_spec(&self) -> Result<NeighborhoodSpec> {
        NeighborhoodSpec::new(
            Center::Bernoulli(BernoulliShift),
            SetCollection::Symbolic(self.original.clone()),
            self.epsilon.clone(),
            self.window,
        )
    }

    pub fn refined_spec(&self) -> Result<NeighborhoodSpec> {
        NeighborhoodSpec::new(
            Center::Bernoulli(BernoulliShift),
            SetCollection::Symbolic(self.refined.sets.clone()),
            &self.epsilon / rational::integer(5),
            self.window,
        )
    }

    pub fn atoms_spec(&self) -> Result<NeighborhoodSpec> {
        refine_step_two(self.rank(), &self.epsilon, self.window)
    }

    /// Grid realization of the symbolic side used to bridge to `map`.
    pub fn layout(&self, space: GridSpace) -> Result<BlockLayout> {
        let layout = BlockLayout::new(space, self.rank())?;
        if let Some(r) = self.original.iter().map(AtomUnion::rank).max() {
            if r > layout.max_rank() {
                return Err(Error::AtomsUnrealizable { log2: space.log2(), rank: r });
            }
        }
        Ok(layout)
    }

    fn membership(&self, spec: &NeighborhoodSpec, map: &GridMap, layout: &BlockLayout) -> Result<Membership> {
        let SetCollection::Symbolic(sets) = spec.q() else { unreachable!("chain specs are symbolic") };
        let bridge = layout.realize_all(sets)?;
        neighborhood_contains(spec, Candidate::Grid(map), Some(&bridge))
    }

    /// Membership of `map` at the finer and coarser level; a violated
    /// implication is an error.
    pub fn audit(&self, level: AuditLevel, map: &GridMap) -> Result<ContainmentRecord> {
        let layout = self.layout(map.space())?;
        let (fine, coarse) = match level {
            AuditLevel::AtomsToRefined => (self.atoms_spec()?, self.refined_spec()?),
            AuditLevel::RefinedToOriginal => (self.refined_spec()?, self.original_spec()?),
        };
        let record = ContainmentRecord {
            level,
            fine: self.membership(&fine, map, &layout)?,
            coarse: self.membership(&coarse, map, &layout)?,
        };
        if !record.implication_holds() {
            return Err(Error::ContainmentViolated {
                level: format!("{level:?}"),
                fine: format_rational(&record.fine.worst),
                coarse: format_rational(&record.coarse.worst),
            });
        }
        Ok(record)
    }

    pub fn audit_both(&self, map: &GridMap) -> Result<[ContainmentRecord; 2]> {
        Ok([self.audit(AuditLevel::AtomsToRefined, map)?, self.audit(AuditLevel::RefinedToOriginal, map)?])
    }
}

/// `Σ_{i,j} 2^-(i+j)` over the basis, an upper bound for `a`.
pub fn weight_mass(basis: &Basis) -> Rational {
    let single: Rational = (0..basis.sets().len()).map(|i| basis.weight(i)).sum();
    &single * &single
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::ratio;
    use crate::rng;
    use crate::symbolic::Cylinder;

    fn space(n: usize) -> GridSpace {
        GridSpace::new(n).unwrap()
    }

    fn random_map(log2: u32, seed: u64) -> GridMap {
        GridMap::random(GridSpace::with_log2(log2).unwrap(), &mut rng::stream(seed, 0))
    }

    #[test]
    fn metric_examples() {
        let s = space(4);
        let basis = Basis::new(vec![CellSet::from_cells(s, [0, 1]).unwrap()]).unwrap();
        let (id, shift) = (GridMap::identity(s), GridMap::cyclic_shift(s));
        assert_eq!(metric_d(&id, &id, &basis).unwrap(), ratio(0, 1));
        assert_eq!(metric_d(&id, &shift, &basis).unwrap(), ratio(1, 2));
        assert_eq!(metric_a(&id, &id, &basis).unwrap(), ratio(0, 1));
        assert_eq!(metric_a(&id, &shift, &basis).unwrap(), ratio(1, 16));
        assert_eq!(metric_tau(&shift, &shift, &basis, 3).unwrap(), ratio(0, 1));
    }

    #[test]
    fn metrics_are_pseudometrics() {
        for seed in 0..12 {
            let (p, q, r) = (random_map(6, seed), random_map(6, seed + 100), random_map(6, seed + 200));
            let basis = Basis::dyadic(p.space(), 6).unwrap();
            for metric in [metric_d, metric_a] {
                let (pq, qr, pr) =
                    (metric(&p, &q, &basis).unwrap(), metric(&q, &r, &basis).unwrap(), metric(&p, &r, &basis).unwrap());
                assert!(pq >= Rational::zero());
                assert_eq!(pq, metric(&q, &p, &basis).unwrap());
                assert!(pr <= &pq + &qr);
            }
            let tau = |a: &GridMap, b: &GridMap| metric_tau(a, b, &basis, 3).unwrap();
            assert_eq!(tau(&p, &q), tau(&q, &p));
            assert!(tau(&p, &r) <= tau(&p, &q) + tau(&q, &r));
            assert!(tau(&p, &q) >= metric_d(&p, &q, &basis).unwrap());
            let windows: Vec<Rational> = [1, 4, 16].iter().map(|&w| metric_tau(&p, &q, &basis, w).unwrap()).collect();
            assert!(windows.windows(2).all(|w| w[0] <= w[1]));
            assert!(metric_a(&p, &q, &basis).unwrap() <= weight_mass(&basis));
            assert!(weight_mass(&basis) <= ratio(1, 1));
        }
    }

    #[test]
    fn dyadic_basis_layout() {
        let basis = Basis::dyadic(space(8), 6).unwrap();
        let lens: Vec<usize> = basis.sets().iter().map(CellSet::len).collect();
        assert_eq!(lens, vec![4, 4, 2, 2, 2, 2]);
        assert_eq!(basis.tail_bound(), ratio(1, 64));
        assert!(Basis::dyadic(space(4), 7).is_err());
    }

    #[test]
    fn neighborhood_of_grid_center() {
        let s = space(16);
        let map = random_map(4, 5);
        let q = vec![CellSet::interval(s, 0, 8).unwrap(), CellSet::interval(s, 4, 12).unwrap()];
        let spec =
            NeighborhoodSpec::new(Center::Grid(map.clone()), SetCollection::Cells(q.clone()), ratio(1, 100), 3).unwrap();
        let same = neighborhood_contains(&spec, Candidate::Grid(&map), None).unwrap();
        assert!(same.inside);
        assert_eq!(same.worst, ratio(0, 1));

        let other = GridMap::cyclic_shift(s);
        let loose = NeighborhoodSpec::new(Center::Grid(map.clone()), SetCollection::Cells(q.clone()), ratio(2, 1), 3).unwrap();
        assert!(neighborhood_contains(&loose, Candidate::Grid(&other), None).unwrap().inside);
        let m = neighborhood_contains(&spec, Candidate::Grid(&other), None).unwrap();
        // the witness reproduces the worst deviation
        let Witness { power, a, b } = m.witness;
        let dev = abs_diff(&map.correlation(power, &q[a], &q[b]).unwrap(), &other.correlation(power, &q[a], &q[b]).unwrap());
        assert_eq!(dev, m.worst);
    }

    #[test]
    fn zero_and_huge_epsilon() {
        assert!(NeighborhoodSpec::new(
            Center::Bernoulli(BernoulliShift),
            SetCollection::Symbolic(vec![AtomUnion::single(0, 0).unwrap()]),
            ratio(0, 1),
            1
        )
        .is_err());
        let spec = refine_step_two(0, &ratio(40, 1), 2).unwrap();
        let map = random_map(6, 1);
        let layout = BlockLayout::new(map.space(), 0).unwrap();
        let bridge = layout.blocks();
        assert!(neighborhood_contains(&spec, Candidate::Grid(&map), Some(&bridge)).unwrap().inside);
        assert!(matches!(neighborhood_contains(&spec, Candidate::Grid(&map), None), Err(Error::MissingBridge)));
        let same = neighborhood_contains(&spec, Candidate::Bernoulli, None).unwrap();
        assert_eq!(same.worst, ratio(0, 1));
    }

    #[test]
    fn step_two_radii() {
        let r0 = refine_step_two(0, &ratio(1, 1), 1).unwrap();
        assert_eq!(r0.epsilon(), &ratio(1, 20));
        assert_eq!(r0.q().len(), 2);
        let r1 = refine_step_two(1, &ratio(1, 2), 1).unwrap();
        assert_eq!(r1.epsilon(), &ratio(1, 640));
        assert_eq!(r1.q().len(), 8);
        assert_eq!(refine_step_two(2, &ratio(1, 1), 1).unwrap().epsilon(), &ratio(1, 5120));
    }

    #[test]
    fn step_one_examples() {
        // genuinely rank-1 sets: rank-0 error 1/8 is not below 1/10
        let q = vec![AtomUnion::single(1, 0b010).unwrap(), AtomUnion::new(1, [0, 7]).unwrap()];
        let out = refine_step_one(&q, &ratio(1, 2), 2).unwrap();
        assert_eq!(out.sets, q);
        assert_eq!(out.rank, 1);
        assert!(out.precisions.iter().all(|p| p.is_zero()));

        let atom = AtomUnion::single(2, 5).unwrap();
        let out = refine_step_one(&[atom], &ratio(1, 1), 2).unwrap();
        assert!(out.precisions[0] <= ratio(1, 32));
        assert!(out.precisions[0] < ratio(1, 5));
        assert!(out.sets[0].is_empty());
        assert_eq!(out.rank, 0);
    }

    #[test]
    fn step_one_rejects_unattainable_precision() {
        // error exactly eps/5 at every rank up to K = 0: strict inequality fails
        let set = AtomUnion::single(1, 0).unwrap();
        let err = refine_step_one(&[set], &ratio(5, 8), 0).unwrap_err();
        assert!(matches!(err, Error::PrecisionUnattainable { index: 0, max_rank: 0, .. }));
    }

    #[test]
    fn containment_center_and_random_maps() {
        let d0 = AtomUnion::from_cylinders(0, &[Cylinder::digit(0, 0).unwrap()]).unwrap();
        let q = vec![d0, AtomUnion::new(1, [1, 2, 6]).unwrap()];
        let chain = RefinementChain::new(q, ratio(1, 1), 1, 4).unwrap();
        assert_eq!(chain.rank(), 1);
        for seed in 0..40 {
            let map = random_map(10, seed);
            let [a, b] = chain.audit_both(&map).unwrap();
            assert!(a.implication_holds() && b.implication_holds());
        }
    }
}
