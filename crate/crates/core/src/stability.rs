//! Intensional stability of concepts.
//!
//! The stability of a concept with extent `A` and intent `B` is the share of
//! subsets `C ⊆ A` whose derivation is still `B`. Three routes are offered:
//!
//! * brute force over all `2^|A|` subsets, testing the derived intent;
//! * an exact dynamic programme over a finished lattice: every subset of
//!   `A` closes to exactly one concept below or at `A`, so the count for `A`
//!   is `2^|A|` minus the counts of all strictly smaller concepts;
//! * the `Δ`-bounds on the logarithmic scale, which only need the direct
//!   descendants of a concept.
//!
//! Counts are kept in arbitrary precision; `|A|` is unbounded.

use std::cmp::Ordering;
use std::fmt;

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::bitset::BitSet;
use crate::error::{Error, Result};
use crate::lattice::{Concept, GaloisConnection, Lattice};

/// Default largest extent the brute-force route will enumerate.
pub const DEFAULT_BRUTE_FORCE_CAP: usize = 20;

/// Hard ceiling for the brute-force route (subset masks are `u64`).
pub const MAX_BRUTE_FORCE_CAP: usize = 63;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StabilityMethod {
    BruteForce,
    LatticeDp,
    Bounds,
}

impl fmt::Display for StabilityMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StabilityMethod::BruteForce => "brute-force",
            StabilityMethod::LatticeDp => "lattice-dp",
            StabilityMethod::Bounds => "bounds",
        })
    }
}

/// `−log2(1 − Stab)`. Stability 1 maps to `+∞`, which orders above every
/// finite value and serializes as the string `"inf"`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LStab(f64);

impl LStab {
    pub const INFINITE: LStab = LStab(f64::INFINITY);

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn is_infinite(self) -> bool {
        self.0.is_infinite()
    }
}

impl Eq for LStab {}

impl Ord for LStab {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

impl PartialOrd for LStab {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for LStab {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_infinite() {
            f.write_str("inf")
        } else {
            write!(f, "{}", self.0)
        }
    }
}

impl Serialize for LStab {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        if self.is_infinite() {
            serializer.serialize_str("inf")
        } else {
            serializer.serialize_f64(self.0)
        }
    }
}

impl<'de> Deserialize<'de> for LStab {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(f64),
            Text(String),
        }
        match Repr::deserialize(deserializer)? {
            Repr::Num(v) if v >= 0.0 => Ok(LStab(v)),
            Repr::Num(v) => Err(serde::de::Error::custom(format!("negative LStab {v}"))),
            Repr::Text(s) if s == "inf" => Ok(LStab::INFINITE),
            Repr::Text(s) => Err(serde::de::Error::custom(format!("unexpected LStab `{s}`"))),
        }
    }
}

/// Logarithmic stability of a stability value in `[0, 1]`.
pub fn lstab(stab: f64) -> Result<LStab> {
    if !(0.0..=1.0).contains(&stab) {
        return Err(Error::input(format!("stability {stab} outside [0, 1]")));
    }
    if stab == 1.0 {
        return Ok(LStab::INFINITE);
    }
    // -log2(1) is -0.0
    Ok(LStab(-(1.0 - stab).log2() + 0.0))
}

/// The three-part bound chain on LStab from the direct descendants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LStabBounds {
    /// `Δ_min − log2(|M|)`
    pub lower: f64,
    /// `−log2 Σ_d 2^(−Δ(c, d))`
    pub mid: f64,
    /// `Δ_min`
    pub upper: f64,
    /// `Δ_min − log2(|DD(c)|)`; auxiliary, never weaker than `lower`.
    pub lower_by_descendants: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityScore {
    pub method: StabilityMethod,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stab: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lstab: Option<LStab>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bounds: Option<LStabBounds>,
}

impl StabilityScore {
    fn certain(method: StabilityMethod) -> Self {
        StabilityScore {
            method,
            stab: Some(1.0),
            lstab: Some(LStab::INFINITE),
            bounds: None,
        }
    }
}

/// Exact stability `qualifying / 2^extent_size`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExactStability {
    pub qualifying: BigUint,
    pub extent_size: usize,
}

impl ExactStability {
    pub fn stab(&self) -> f64 {
        if self.qualifying.is_zero() {
            return 0.0;
        }
        (log2_big(&self.qualifying) - self.extent_size as f64).exp2().min(1.0)
    }

    /// `|A| − log2(2^|A| − q)`, computed on the exact complement.
    pub fn lstab(&self) -> LStab {
        let total = BigUint::one() << self.extent_size;
        if self.qualifying >= total {
            return LStab::INFINITE;
        }
        let rest = total - &self.qualifying;
        LStab((self.extent_size as f64 - log2_big(&rest)).max(0.0))
    }

    pub fn score(&self, method: StabilityMethod) -> StabilityScore {
        StabilityScore {
            method,
            stab: Some(self.stab()),
            lstab: Some(self.lstab()),
            bounds: None,
        }
    }
}

fn log2_big(x: &BigUint) -> f64 {
    let bits = x.bits();
    if bits <= 64 {
        return x.to_u64().map_or(f64::NAN, |v| (v as f64).log2());
    }
    let shift = bits - 64;
    let top = (x >> shift).to_u64().map_or(f64::NAN, |v| v as f64);
    top.log2() + shift as f64
}

/// Number of subsets `C ⊆ extent` whose derived intent equals the concept's
/// intent, by exhaustive enumeration.
pub fn count_qualifying_subsets<C: GaloisConnection>(
    conn: &C,
    concept: &Concept<C::Intent>,
    cap: usize,
) -> Result<BigUint> {
    let members = concept.extent.to_vec();
    let limit = cap.min(MAX_BRUTE_FORCE_CAP);
    if members.len() > limit {
        return Err(Error::Capacity {
            what: format!("brute-force stability over an extent of {} objects", members.len()),
            limit,
        });
    }
    let n = conn.object_count();
    let mut count = 0u64;
    for mask in 0..(1u64 << members.len()) {
        let subset = BitSet::from_indices(
            n,
            members
                .iter()
                .enumerate()
                .filter(|(i, _)| mask >> i & 1 == 1)
                .map(|(_, &g)| g),
        );
        if conn.derive_intent(&subset) == concept.intent {
            count += 1;
        }
    }
    Ok(BigUint::from(count))
}

pub fn stability_bruteforce<C: GaloisConnection>(
    conn: &C,
    concept: &Concept<C::Intent>,
    cap: usize,
) -> Result<StabilityScore> {
    let exact = ExactStability {
        qualifying: count_qualifying_subsets(conn, concept, cap)?,
        extent_size: concept.extent.len(),
    };
    Ok(exact.score(StabilityMethod::BruteForce))
}

/// Brute-force scores for every concept of a lattice.
pub fn stability_bruteforce_all<C: GaloisConnection>(
    conn: &C,
    lattice: &Lattice<C::Intent>,
    cap: usize,
) -> Result<Vec<StabilityScore>> {
    lattice
        .concepts()
        .par_iter()
        .map(|c| stability_bruteforce(conn, c, cap))
        .collect()
}

/// Exact qualifying-subset counts for every concept, from the lattice alone.
///
/// Concepts are processed by increasing extent size; those of equal size
/// are independent and run in parallel.
pub fn qualifying_counts<I: Sync>(lattice: &Lattice<I>) -> Vec<BigUint> {
    let concepts = lattice.concepts();
    let mut counts = vec![BigUint::zero(); concepts.len()];
    // Sorted by descending extent size: walk groups from the end.
    let mut end = concepts.len();
    while end > 0 {
        let size = concepts[end - 1].extent.len();
        let mut start = end - 1;
        while start > 0 && concepts[start - 1].extent.len() == size {
            start -= 1;
        }
        let level: Vec<BigUint> = (start..end)
            .into_par_iter()
            .map(|i| {
                let extent = &concepts[i].extent;
                let below: BigUint = (end..concepts.len())
                    .filter(|&j| concepts[j].extent.is_subset(extent))
                    .map(|j| &counts[j])
                    .sum();
                (BigUint::one() << size) - below
            })
            .collect();
        for (i, q) in (start..end).zip(level) {
            counts[i] = q;
        }
        end = start;
    }
    counts
}

pub fn exact_stabilities<I: Sync>(lattice: &Lattice<I>) -> Vec<ExactStability> {
    qualifying_counts(lattice)
        .into_iter()
        .zip(lattice.concepts())
        .map(|(qualifying, c)| ExactStability {
            qualifying,
            extent_size: c.extent.len(),
        })
        .collect()
}

pub fn stability_lattice_dp<I: Sync>(lattice: &Lattice<I>) -> Vec<StabilityScore> {
    exact_stabilities(lattice)
        .iter()
        .map(|e| e.score(StabilityMethod::LatticeDp))
        .collect()
}

/// Bound chain `Δ_min − log2|M| ≤ −log2 Σ 2^(−Δ) ≤ LStab ≤ Δ_min` for one
/// concept, where `Δ(c, d)` is the extent-size difference to a direct
/// descendant `d`. A concept without descendants (the bottom) has
/// stability 1 and no bounds.
pub fn lstab_bounds<I>(lattice: &Lattice<I>, index: usize, attribute_count: usize) -> Result<StabilityScore> {
    let concept = lattice.concept(index)?;
    let children = lattice.direct_descendants(index)?;
    if children.is_empty() {
        return Ok(StabilityScore::certain(StabilityMethod::Bounds));
    }
    if attribute_count == 0 {
        return Err(Error::input("stability bounds need a positive attribute count"));
    }
    let size = concept.extent.len();
    let deltas: Vec<usize> = children
        .iter()
        .map(|&d| size - lattice.concepts()[d].extent.len())
        .collect();
    if deltas.contains(&0) {
        return Err(Error::input(format!(
            "cover edge below concept {index} has equal extents"
        )));
    }
    let delta_min = *deltas.iter().min().expect("non-empty") as f64;
    let tail: f64 = deltas.iter().map(|&d| (delta_min - d as f64).exp2()).sum();
    let upper = delta_min;
    let mid = delta_min - tail.log2();
    Ok(StabilityScore {
        method: StabilityMethod::Bounds,
        stab: None,
        lstab: None,
        bounds: Some(LStabBounds {
            lower: delta_min - (attribute_count as f64).log2(),
            mid,
            upper,
            lower_by_descendants: delta_min - (children.len() as f64).log2(),
        }),
    })
}

pub fn lstab_bounds_all<I: Sync>(lattice: &Lattice<I>, attribute_count: usize) -> Result<Vec<StabilityScore>> {
    (0..lattice.len())
        .map(|i| lstab_bounds(lattice, i, attribute_count))
        .collect()
}

/// Which bound gates a bounds-only score in [`filter_concepts`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundPolicy {
    #[default]
    Upper,
    Mid,
    Lower,
}

/// Relative support `|extent| / |G|`.
pub fn support<I>(lattice: &Lattice<I>, index: usize) -> f64 {
    let n = lattice.object_count();
    if n == 0 {
        return 1.0;
    }
    lattice.concepts()[index].extent.len() as f64 / n as f64
}

/// LStab value used to gate a score under `policy`.
pub fn gating_lstab(score: &StabilityScore, policy: BoundPolicy) -> Option<f64> {
    match (score.lstab, score.bounds) {
        (Some(l), _) => Some(l.value()),
        (None, Some(b)) => Some(match policy {
            BoundPolicy::Upper => b.upper,
            BoundPolicy::Mid => b.mid,
            BoundPolicy::Lower => b.lower,
        }),
        (None, None) => None,
    }
}

/// Concepts whose relative support is at least `min_support` and whose
/// stability (or the bound chosen by `policy`) reaches `min_lstab`.
pub fn filter_concepts<I>(
    lattice: &Lattice<I>,
    scores: &[StabilityScore],
    min_support: f64,
    min_lstab: f64,
    policy: BoundPolicy,
) -> Result<Vec<usize>> {
    if scores.len() != lattice.len() {
        return Err(Error::input(format!(
            "{} scores for {} concepts",
            scores.len(),
            lattice.len()
        )));
    }
    if !(0.0..=1.0).contains(&min_support) {
        return Err(Error::input(format!("min_support {min_support} outside [0, 1]")));
    }
    if min_lstab.is_nan() || min_lstab < 0.0 {
        return Err(Error::input(format!("min_lstab {min_lstab} must be non-negative")));
    }
    Ok((0..lattice.len())
        .filter(|&i| support(lattice, i) >= min_support)
        .filter(|&i| gating_lstab(&scores[i], policy).is_some_and(|l| l >= min_lstab))
        .collect())
}

/// One row of the score export.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRecord {
    pub extent_size: usize,
    pub support: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stab: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lstab: Option<LStab>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lower: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mid: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub upper: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lower_by_descendants: Option<f64>,
    pub method: StabilityMethod,
}

pub fn score_records<I>(lattice: &Lattice<I>, scores: &[StabilityScore]) -> Vec<ScoreRecord> {
    scores
        .iter()
        .enumerate()
        .map(|(i, s)| ScoreRecord {
            extent_size: lattice.concepts()[i].extent.len(),
            support: support(lattice, i),
            stab: s.stab,
            lstab: s.lstab,
            lower: s.bounds.map(|b| b.lower),
            mid: s.bounds.map(|b| b.mid),
            upper: s.bounds.map(|b| b.upper),
            lower_by_descendants: s.bounds.map(|b| b.lower_by_descendants),
            method: s.method,
        })
        .collect()
}
