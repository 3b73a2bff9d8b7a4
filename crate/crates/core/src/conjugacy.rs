//! Building a conjugate `V = Q⁻¹ S Q` of a grid map `S` that lies in a
//! cylinder neighborhood of the Bernoulli shift, and certifying it exactly.
//!
//! The `X` grid realizes the rank-`k` atoms as consecutive cell blocks
//! (see [`BlockLayout`]). On `Y`, the half-measure set `A` and its images
//! under `S` cut out the matching atoms `⋂ S^i F_{b_i}` with `F_0 = A`,
//! `F_1 = Y ∖ A`. `Q` sends each block onto its atom as far as cardinalities
//! allow, and every deviation `|mu(V^m B_u ∩ B_v) - mu(T^m B_u ∩ B_v)|` is
//! then bounded by the achieved independence deviation plus twice the
//! achieved gap.

use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::independence::{find_half_measure_independent_set, SearchOutcome};
use crate::measure::{CellSet, GridMap};
use crate::rational::{self, abs_diff, format_rational, integer, inv_pow2, Rational};
use crate::symbolic::{atom_count, atom_label, AtomUnion, BernoulliShift, BlockLayout};
use crate::topology::{
    neighborhood_contains, Candidate, ContainmentRecord, Membership, RefinedCollection, RefinementChain,
};

/// The constant chain `ε → ε/5 → ε/(5·2^(4k+2)) → g → δ`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BudgetLedger {
    #[serde(with = "rational::as_str")]
    pub epsilon: Rational,
    pub k: u32,
    /// `ε/5`
    #[serde(with = "rational::as_str")]
    pub eps1: Rational,
    /// `ε/(5·2^(4k+2))`
    #[serde(with = "rational::as_str")]
    pub eps2: Rational,
    /// `ε/(15·2^(4k+2))`
    #[serde(with = "rational::as_str")]
    pub gap_bound: Rational,
    /// `g/(4k+2)`
    #[serde(with = "rational::as_str")]
    pub delta: Rational,
}

impl BudgetLedger {
    pub fn new(epsilon: Rational, k: u32) -> Result<Self> {
        if !rational::is_positive(&epsilon) {
            return Err(Error::InvalidArgument("epsilon must be positive".into()));
        }
        let scale = inv_pow2(4 * k + 2);
        let eps1 = &epsilon / integer(5);
        let eps2 = &epsilon * &scale / integer(5);
        let gap_bound = &epsilon * &scale / integer(15);
        let delta = &gap_bound / integer(4 * k as i64 + 2);
        Ok(BudgetLedger { epsilon, k, eps1, eps2, gap_bound, delta })
    }

    /// Cardinality of the intersections in the estimate, `4k + 2`.
    pub fn cardinality(&self) -> usize {
        4 * self.k as usize + 2
    }

    /// Well-independence level the images must reach: `(4k+2)·δ = g`.
    pub fn well_target(&self) -> Rational {
        &self.delta * integer(self.cardinality() as i64)
    }

    /// Each identity, recomputed from `ε` and `k` alone.
    pub fn identities(&self) -> [(&'static str, bool); 5] {
        let denom = integer(5) * rational::Rational::from_integer(rational::pow2(4 * self.k + 2));
        let g = &self.gap_bound;
        [
            ("eps1 = eps/5", self.eps1 == &self.epsilon / integer(5)),
            ("eps2 = eps/(5*2^(4k+2))", self.eps2 == &self.epsilon / &denom),
            ("g = eps/(15*2^(4k+2)) = eps2/3", *g == &self.epsilon / (&denom * integer(3)) && *g == &self.eps2 / integer(3)),
            ("delta = g/(4k+2)", &self.delta * integer(4 * self.k as i64 + 2) == *g),
            ("g + 2g = eps2", g + g * integer(2) == self.eps2),
        ]
    }

    pub fn holds(&self) -> bool {
        self.identities().iter().all(|(_, ok)| *ok)
    }
}

/// Atoms of `⋁_{|i|<=k} S^i η` in canonical order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EtaAtoms {
    pub k: u32,
    pub atoms: Vec<CellSet>,
    /// `max_t |mu(atom_t) - 2^-(2k+1)|`
    pub max_skew: Rational,
}

pub fn build_eta_atoms(s: &GridMap, a: &CellSet, k: u32) -> Result<EtaAtoms> {
    let space = s.space();
    space.ensure_same(&a.space())?;
    let n = space.resolution();
    if 2 * a.len() != n {
        return Err(Error::NotHalfMeasure(a.len(), n));
    }
    let in_a = a.to_mask();
    let ks = k as i64;
    let mut members = vec![Vec::new(); atom_count(k)];
    for y in 0..n {
        // y ∈ S^i F_b  iff  S^-i y ∈ F_b; b = 0 on A
        let index = (-ks..=ks).fold(0usize, |acc, i| (acc << 1) | usize::from(!in_a[s.power_of_cell(y, -i)]));
        members[index].push(y);
    }
    let ideal = inv_pow2(2 * k + 1);
    let atoms: Vec<CellSet> = members.into_iter().map(|cells| CellSet::new(space, cells)).collect::<Result<_>>()?;
    let max_skew = atoms.iter().map(|c| abs_diff(&c.measure(), &ideal)).max().unwrap_or_else(Rational::zero);
    Ok(EtaAtoms { k, atoms, max_skew })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConjugatingMap {
    /// Cell bijection from the `X` grid to the `Y` grid.
    pub q: GridMap,
    /// `mu(Q(block_t) △ atom_t)` per atom.
    pub gaps: Vec<Rational>,
    pub achieved_gap: Rational,
}

/// Matches block `t` with atom `t` cell by cell, then pairs the leftover
/// `X` cells with the leftover `Y` cells, both taken in ascending atom
/// order and ascending cell order.
pub fn build_q(layout: &BlockLayout, eta: &[CellSet]) -> Result<ConjugatingMap> {
    let space = layout.space();
    if eta.len() != atom_count(layout.rank()) {
        return Err(Error::InvalidArgument(format!(
            "expected {} eta atoms, got {}",
            atom_count(layout.rank()),
            eta.len()
        )));
    }
    for atom in eta {
        space.ensure_same(&atom.space())?;
    }
    let mut forward = vec![usize::MAX; space.resolution()];
    let (mut spare_x, mut spare_y) = (Vec::new(), Vec::new());
    for (t, atom) in eta.iter().enumerate() {
        let block = layout.block(t);
        let matched = block.len().min(atom.len());
        for (&x, &y) in block.cells().iter().zip(atom.cells()) {
            forward[x] = y;
        }
        spare_x.extend_from_slice(&block.cells()[matched..]);
        spare_y.extend_from_slice(&atom.cells()[matched..]);
    }
    if spare_x.len() != spare_y.len() {
        return Err(Error::InvalidArgument("eta atoms do not partition the space".into()));
    }
    for (x, y) in spare_x.into_iter().zip(spare_y) {
        forward[x] = y;
    }
    let q = GridMap::new(space, forward).map_err(|_| Error::InvalidArgument("eta atoms overlap".into()))?;
    let gaps = eta
        .iter()
        .enumerate()
        .map(|(t, atom)| q.apply(&layout.block(t))?.symmetric_difference_measure(atom))
        .collect::<Result<Vec<_>>>()?;
    let achieved_gap = gaps.iter().max().cloned().unwrap_or_else(Rational::zero);
    Ok(ConjugatingMap { q, gaps, achieved_gap })
}

/// [`build_q`], failing when the achieved gap is not below `g_target`.
pub fn build_q_checked(layout: &BlockLayout, eta: &[CellSet], g_target: &Rational) -> Result<ConjugatingMap> {
    let built = build_q(layout, eta)?;
    if &built.achieved_gap >= g_target {
        return Err(Error::GapUnattainable {
            achieved: format_rational(&built.achieved_gap),
            target: format_rational(g_target),
        });
    }
    Ok(built)
}

/// `V = Q⁻¹ ∘ S ∘ Q`.
pub fn conjugate(q: &GridMap, s: &GridMap) -> Result<GridMap> {
    q.inverse_map().compose(&s.compose(q)?)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeviationRow {
    pub u: String,
    pub v: String,
    pub m: i64,
    #[serde(with = "rational::as_str")]
    pub t_side: Rational,
    #[serde(with = "rational::as_str")]
    pub v_side: Rational,
    #[serde(with = "rational::as_str")]
    pub deviation: Rational,
}

impl DeviationRow {
    pub const CSV_HEADER: &'static str = "u,v,m,t_side,v_side,deviation";

    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.u,
            self.v,
            self.m,
            format_rational(&self.t_side),
            format_rational(&self.v_side),
            format_rational(&self.deviation)
        )
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConjugacyCertificate {
    pub ledger: BudgetLedger,
    pub window: u32,
    #[serde(with = "rational::as_str")]
    pub achieved_delta: Rational,
    #[serde(with = "rational::as_str")]
    pub achieved_gap: Rational,
    pub deviations: Vec<DeviationRow>,
    #[serde(with = "rational::as_str")]
    pub max_deviation: Rational,
    /// `achieved_delta + 2·achieved_gap`
    #[serde(with = "rational::as_str")]
    pub bound: Rational,
    pub bound_holds: bool,
    /// `achieved_delta < g` and `achieved_gap < g`, under which the
    /// maximum must fall below `eps2`.
    pub hypotheses_hold: bool,
    pub pass: bool,
}

/// Fills the `(u, v, m)` table for `|m| <= window`: the `T` side from the
/// cylinder calculus, the `V` side by counting cells of `V^m(block_u) ∩ block_v`.
pub fn verify_certificate(
    shift: &BernoulliShift,
    v: &GridMap,
    layout: &BlockLayout,
    window: u32,
    ledger: &BudgetLedger,
    achieved_delta: &Rational,
    achieved_gap: &Rational,
) -> Result<ConjugacyCertificate> {
    layout.space().ensure_same(&v.space())?;
    let k = layout.rank();
    if k != ledger.k {
        return Err(Error::InvalidArgument(format!("layout rank {k} differs from ledger rank {}", ledger.k)));
    }
    let atoms = atom_count(k);
    let n = v.space().resolution();
    let w = window as i64;
    let mut table = vec![vec![vec![0usize; atoms]; atoms]; (2 * w + 1) as usize];
    for (mi, m) in (-w..=w).enumerate() {
        for x in 0..n {
            table[mi][layout.block_index(x)][layout.block_index(v.power_of_cell(x, m))] += 1;
        }
    }
    let mut deviations = Vec::with_capacity(atoms * atoms * table.len());
    for u in 0..atoms {
        for t in 0..atoms {
            for (mi, m) in (-w..=w).enumerate() {
                let t_side = shift.atom_correlation(k, m, u, t)?;
                let v_side = v.space().measure_of(table[mi][u][t]);
                let deviation = abs_diff(&t_side, &v_side);
                deviations.push(DeviationRow { u: atom_label(k, u), v: atom_label(k, t), m, t_side, v_side, deviation });
            }
        }
    }
    let max_deviation = deviations.iter().map(|r| r.deviation.clone()).max().unwrap_or_else(Rational::zero);
    let bound = achieved_delta + achieved_gap * integer(2);
    let bound_holds = deviations.iter().all(|r| r.deviation <= bound);
    let hypotheses_hold = achieved_delta < &ledger.gap_bound && achieved_gap < &ledger.gap_bound;
    let pass = bound_holds && max_deviation < ledger.eps2;
    Ok(ConjugacyCertificate {
        ledger: ledger.clone(),
        window,
        achieved_delta: achieved_delta.clone(),
        achieved_gap: achieved_gap.clone(),
        deviations,
        max_deviation,
        bound,
        bound_holds,
        hypotheses_hold,
        pass,
    })
}

/// Inputs of [`certify_conjugate`].
#[derive(Clone, Debug)]
pub struct ConjugacyParams {
    pub k: u32,
    pub epsilon: Rational,
    pub window: u32,
    /// Independence window; at least `k + window`.
    pub independence_window: u32,
    pub seed: u64,
    pub trials: u64,
}

/// Every artifact of one conjugate construction.
#[derive(Clone, Debug)]
pub struct ConjugacyRun {
    pub ledger: BudgetLedger,
    pub search: SearchOutcome,
    pub eta: EtaAtoms,
    pub conjugator: ConjugatingMap,
    pub v: GridMap,
    pub certificate: ConjugacyCertificate,
}

/// Search for `A`, build the `η` atoms, `Q`, and `V`, then certify `V`
/// against `U(T, atoms(k), eps2)`.
///
/// A failed independence search or an oversized gap does not abort: the
/// certificate is stated with the achieved constants and `pass` is decided
/// against `eps2`.
pub fn certify_conjugate(s: &GridMap, params: &ConjugacyParams) -> Result<ConjugacyRun> {
    if params.independence_window < params.k + params.window {
        return Err(Error::InvalidArgument(format!(
            "independence window {} below k + W = {}",
            params.independence_window,
            params.k + params.window
        )));
    }
    let ledger = BudgetLedger::new(params.epsilon.clone(), params.k)?;
    let layout = BlockLayout::new(s.space(), params.k)?;
    let search = find_half_measure_independent_set(
        s,
        params.independence_window,
        Some(ledger.cardinality()),
        &ledger.well_target(),
        params.seed,
        params.trials,
    )?;
    let eta = build_eta_atoms(s, &search.set, params.k)?;
    let conjugator = build_q(&layout, &eta.atoms)?;
    let v = conjugate(&conjugator.q, s)?;
    let certificate = verify_certificate(
        &BernoulliShift,
        &v,
        &layout,
        params.window,
        &ledger,
        &search.report.deviation,
        &conjugator.achieved_gap,
    )?;
    Ok(ConjugacyRun { ledger, search, eta, conjugator, v, certificate })
}

/// Full run: refinement of `(q, ε)`, conjugate construction at the refined
/// rank, direct membership of `V` in `U(T, q, ε)`, and the containment audits.
#[derive(Clone, Debug)]
pub struct ConjugacyDemo {
    pub chain: RefinementChain,
    pub conjugacy: ConjugacyRun,
    pub direct: Membership,
    pub audits: [ContainmentRecord; 2],
    /// `V ∈ U(T, q, ε)` over the window.
    pub verdict: bool,
    /// A passing certificate implies the verdict.
    pub consistent: bool,
}

impl ConjugacyDemo {
    pub fn refined(&self) -> &RefinedCollection {
        self.chain.refined()
    }
}

pub fn conjugacy_demo(
    s: &GridMap,
    q: Vec<AtomUnion>,
    epsilon: Rational,
    window: u32,
    max_rank: u32,
    independence_window: Option<u32>,
    seed: u64,
    trials: u64,
) -> Result<ConjugacyDemo> {
    let chain = RefinementChain::new(q, epsilon.clone(), max_rank, window)?;
    let k = chain.rank();
    let params = ConjugacyParams {
        k,
        epsilon,
        window,
        independence_window: independence_window.unwrap_or(k + window).max(k + window),
        seed,
        trials,
    };
    let conjugacy = certify_conjugate(s, &params)?;
    let layout = chain.layout(s.space())?;
    let bridge = layout.realize_all(chain.original())?;
    let direct = neighborhood_contains(&chain.original_spec()?, Candidate::Grid(&conjugacy.v), Some(&bridge))?;
    let audits = chain.audit_both(&conjugacy.v)?;
    let verdict = direct.inside;
    let consistent = !conjugacy.certificate.pass || verdict;
    Ok(ConjugacyDemo { chain, conjugacy, direct, audits, verdict, consistent })
}
