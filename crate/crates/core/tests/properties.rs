use std::collections::BTreeSet;

use num_bigint::BigUint;
use proptest::prelude::*;

use spindle_fca::context::{correlation_prune, information_gain_rank, NumericContext};
use spindle_fca::pattern::{interval_meet, subsumes};
use spindle_fca::signal::{dominant_frequency, feature_row, Band, FeatureConfig, SPINDLE_BAND};
use spindle_fca::stability::{count_qualifying_subsets, lstab_bounds, qualifying_counts};
use spindle_fca::{
    BitSet, FormalContext, GaloisConnection, Interval, IntervalDescription, IntervalPatternStructure, Lattice,
    PatternIntent,
};

// ---------------------------------------------------------------------------
// naive oracles

fn matrix_context(m: &[Vec<bool>]) -> FormalContext {
    let attrs = m.first().map_or(0, Vec::len);
    FormalContext::from_matrix(
        (0..m.len()).map(|g| format!("g{g}")).collect(),
        (0..attrs).map(|a| format!("m{a}")).collect(),
        m,
    )
    .unwrap()
}

fn members(mask: u32, n: usize) -> Vec<usize> {
    (0..n).filter(|g| mask >> g & 1 == 1).collect()
}

/// Closure of an object set straight from the incidence matrix.
fn naive_close(m: &[Vec<bool>], objs: &[usize]) -> Vec<usize> {
    let attrs = m.first().map_or(0, Vec::len);
    let common: Vec<usize> = (0..attrs).filter(|&a| objs.iter().all(|&g| m[g][a])).collect();
    (0..m.len()).filter(|&g| common.iter().all(|&a| m[g][a])).collect()
}

/// Closure under interval hulls; the empty set is closed.
fn naive_interval_close(rows: &[Vec<(f64, f64)>], objs: &[usize]) -> Vec<usize> {
    if objs.is_empty() {
        return Vec::new();
    }
    let width = rows[0].len();
    let hull: Vec<(f64, f64)> = (0..width)
        .map(|j| {
            let lo = objs.iter().map(|&g| rows[g][j].0).fold(f64::INFINITY, f64::min);
            let hi = objs.iter().map(|&g| rows[g][j].1).fold(f64::NEG_INFINITY, f64::max);
            (lo, hi)
        })
        .collect();
    (0..rows.len())
        .filter(|&g| (0..width).all(|j| hull[j].0 <= rows[g][j].0 && rows[g][j].1 <= hull[j].1))
        .collect()
}

fn closed_family(n: usize, close: impl Fn(&[usize]) -> Vec<usize>) -> BTreeSet<Vec<usize>> {
    (0..1u32 << n).map(|mask| close(&members(mask, n))).collect()
}

fn extents<I>(l: &Lattice<I>) -> Vec<Vec<usize>> {
    l.concepts().iter().map(|c| c.extent.to_vec()).collect()
}

fn is_sub(a: &[usize], b: &[usize]) -> bool {
    a.iter().all(|x| b.contains(x))
}

/// Cover pairs (upper, lower) as the transitive reduction of ⊊.
fn naive_covers(family: &[Vec<usize>]) -> BTreeSet<(Vec<usize>, Vec<usize>)> {
    let mut out = BTreeSet::new();
    for p in family {
        for c in family {
            if c.len() < p.len() && is_sub(c, p) {
                let between = family
                    .iter()
                    .any(|e| e.len() > c.len() && e.len() < p.len() && is_sub(c, e) && is_sub(e, p));
                if !between {
                    out.insert((p.clone(), c.clone()));
                }
            }
        }
    }
    out
}

fn interval_structure(rows: &[Vec<(f64, f64)>]) -> IntervalPatternStructure {
    IntervalPatternStructure::new(
        (0..rows.len()).map(|g| format!("g{g}")).collect(),
        (0..rows[0].len()).map(|j| format!("x{j}")).collect(),
        rows.iter()
            .map(|r| IntervalDescription::new(r.iter().map(|&(l, h)| Interval::new(l, h).unwrap()).collect()))
            .collect(),
    )
    .unwrap()
}

// ---------------------------------------------------------------------------
// strategies

fn binary_matrix(max_g: usize, max_m: usize) -> impl Strategy<Value = Vec<Vec<bool>>> {
    (1..=max_g, 1..=max_m).prop_flat_map(|(g, m)| {
        proptest::collection::vec(proptest::collection::vec(proptest::bool::weighted(0.5), m), g)
    })
}

fn interval_rows(max_g: usize, max_m: usize) -> impl Strategy<Value = Vec<Vec<(f64, f64)>>> {
    (1..=max_g, 1..=max_m).prop_flat_map(|(g, m)| {
        proptest::collection::vec(
            proptest::collection::vec((0..5i32, 0..3i32).prop_map(|(lo, w)| (lo as f64, (lo + w) as f64)), m),
            g,
        )
    })
}

fn subset_of(n: usize) -> impl Strategy<Value = Vec<usize>> {
    proptest::collection::vec(proptest::bool::ANY, n)
        .prop_map(|bits| bits.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i).collect())
}

fn set(n: usize, v: &[usize]) -> BitSet {
    BitSet::from_indices(n, v.iter().copied())
}

// ---------------------------------------------------------------------------
// binary contexts

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn galois_laws_binary((m, a, b) in binary_matrix(10, 8).prop_flat_map(|m| {
        let n = m.len();
        (Just(m), subset_of(n), subset_of(n))
    })) {
        let ctx = matrix_context(&m);
        let n = m.len();
        let (a, b) = (set(n, &a), set(n, &b));
        let (da, db) = (ctx.derive_attributes(&a).unwrap(), ctx.derive_attributes(&b).unwrap());
        // antitone
        if a.is_subset(&b) {
            prop_assert!(db.is_subset(&da));
        }
        // extensive, idempotent
        let ca = ctx.closure(&a).unwrap();
        prop_assert!(a.is_subset(&ca));
        prop_assert_eq!(ctx.closure(&ca).unwrap(), ca.clone());
        prop_assert_eq!(ctx.derive_attributes(&ca).unwrap(), da.clone());
        // adjunction: A ⊆ B' iff B ⊆ A' (B read as an object set mapped through its intent)
        let attrs = db.clone();
        prop_assert_eq!(a.is_subset(&ctx.derive_objects(&attrs).unwrap()), attrs.is_subset(&da));
        prop_assert_eq!(ca.to_vec(), naive_close(&m, &a.to_vec()));
    }

    #[test]
    fn lattice_matches_bruteforce_closures(m in binary_matrix(12, 8)) {
        let ctx = matrix_context(&m);
        let lattice = ctx.build_lattice().unwrap();
        let got = extents(&lattice);
        let want = closed_family(m.len(), |s| naive_close(&m, s));
        prop_assert_eq!(got.iter().cloned().collect::<BTreeSet<_>>(), want);
        prop_assert_eq!(got.len(), lattice.len(), "duplicate extents");
        for c in lattice.concepts() {
            prop_assert!(ctx.is_concept(c));
        }
        // ordering: size descending, then lexicographic
        for w in got.windows(2) {
            prop_assert!(w[0].len() > w[1].len() || (w[0].len() == w[1].len() && w[0] < w[1]));
        }
    }

    #[test]
    fn covers_are_transitive_reduction(m in binary_matrix(9, 6)) {
        let lattice = matrix_context(&m).build_lattice().unwrap();
        let ext = extents(&lattice);
        let got: BTreeSet<_> = lattice.covers().iter().map(|&(p, c)| (ext[p].clone(), ext[c].clone())).collect();
        prop_assert_eq!(got, naive_covers(&ext));
    }

    #[test]
    fn meets_and_joins_are_unique(m in binary_matrix(8, 6)) {
        let lattice = matrix_context(&m).build_lattice().unwrap();
        let ext = extents(&lattice);
        for a in &ext {
            for b in &ext {
                let meet: Vec<usize> = a.iter().copied().filter(|x| b.contains(x)).collect();
                prop_assert!(ext.contains(&meet), "meet not closed");
                let uppers: Vec<&Vec<usize>> = ext.iter().filter(|e| is_sub(a, e) && is_sub(b, e)).collect();
                let minimal: Vec<&&Vec<usize>> = uppers
                    .iter()
                    .filter(|e| !uppers.iter().any(|f| f.len() < e.len() && is_sub(f, e)))
                    .collect();
                prop_assert_eq!(minimal.len(), 1, "join not unique");
            }
        }
    }
}

// ---------------------------------------------------------------------------
// interval pattern structures

fn desc_strategy(width: usize) -> impl Strategy<Value = IntervalDescription> {
    proptest::collection::vec((-5.0..5.0f64, 0.0..3.0f64), width)
        .prop_map(|v| IntervalDescription::new(v.into_iter().map(|(l, w)| Interval::new(l, l + w).unwrap()).collect()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn meet_is_a_semilattice_operation(
        (a, b, c) in (1..4usize).prop_flat_map(|w| (desc_strategy(w), desc_strategy(w), desc_strategy(w)))
    ) {
        let ab = interval_meet(&a, &b).unwrap();
        prop_assert_eq!(interval_meet(&a, &a).unwrap(), a.clone());
        prop_assert_eq!(&ab, &interval_meet(&b, &a).unwrap());
        prop_assert_eq!(
            interval_meet(&ab, &c).unwrap(),
            interval_meet(&a, &interval_meet(&b, &c).unwrap()).unwrap()
        );
        // the meet is the most specific common generalisation
        prop_assert!(subsumes(&ab, &a).unwrap() && subsumes(&ab, &b).unwrap());
        prop_assert_eq!(subsumes(&a, &b).unwrap(), interval_meet(&a, &b).unwrap() == a);
    }

    #[test]
    fn galois_laws_interval((rows, a, b) in interval_rows(8, 3).prop_flat_map(|r| {
        let n = r.len();
        (Just(r), subset_of(n), subset_of(n))
    })) {
        let ps = interval_structure(&rows);
        let n = rows.len();
        let (a, b) = (set(n, &a), set(n, &b));
        let (da, db) = (ps.derive_intent(&a), ps.derive_intent(&b));
        let ca = ps.close(&a);
        prop_assert!(a.is_subset(&ca));
        prop_assert_eq!(ps.close(&ca), ca.clone());
        prop_assert_eq!(ca.to_vec(), naive_interval_close(&rows, &a.to_vec()));
        if a.is_subset(&b) && !a.is_empty() {
            // larger extent, more general description
            let (PatternIntent::Hull(x), PatternIntent::Hull(y)) = (&da, &db) else {
                panic!("non-empty sets have hull intents")
            };
            prop_assert!(subsumes(y, x).unwrap());
        }
        prop_assert_eq!(ps.derive_extent(&db), ps.close(&b));
    }

    #[test]
    fn pattern_lattice_matches_bruteforce(rows in interval_rows(10, 4)) {
        let ps = interval_structure(&rows);
        let lattice = ps.build_pattern_lattice().unwrap();
        let got = extents(&lattice);
        let want = closed_family(rows.len(), |s| naive_interval_close(&rows, s));
        prop_assert_eq!(got.iter().cloned().collect::<BTreeSet<_>>(), want);
        prop_assert_eq!(got.len(), lattice.len());
        prop_assert_eq!(lattice.concepts().last().unwrap().intent.clone(), PatternIntent::Bottom);
        let covers: BTreeSet<_> = lattice.covers().iter().map(|&(p, c)| (got[p].clone(), got[c].clone())).collect();
        prop_assert_eq!(covers, naive_covers(&got));
    }
}

// ---------------------------------------------------------------------------
// stability

fn check_stability<C: GaloisConnection>(
    conn: &C,
    lattice: &Lattice<C::Intent>,
    attribute_count: usize,
) -> Result<(), TestCaseError> {
    let q = qualifying_counts(lattice);
    let n = lattice.object_count();
    let total: BigUint = q.iter().sum();
    prop_assert_eq!(total, BigUint::from(1u8) << n);
    for (i, c) in lattice.concepts().iter().enumerate() {
        prop_assert_eq!(&count_qualifying_subsets(conn, c, 20).unwrap(), &q[i]);
        if lattice.direct_descendants(i).unwrap().is_empty() {
            continue;
        }
        let bounds = lstab_bounds(lattice, i, attribute_count).unwrap().bounds.unwrap();
        let size = c.extent.len() as i32;
        let stab = q[i].to_string().parse::<f64>().unwrap() / 2f64.powi(size);
        if stab >= 1.0 {
            continue;
        }
        let lstab = -(1.0 - stab).log2();
        let tol = 1e-9;
        prop_assert!(bounds.lower <= bounds.mid + tol, "{bounds:?}");
        prop_assert!(bounds.mid <= lstab + tol, "{bounds:?} vs {lstab}");
        prop_assert!(lstab <= bounds.upper + tol, "{bounds:?} vs {lstab}");
        prop_assert!(bounds.lower <= bounds.lower_by_descendants + tol);
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn binary_stability_dp_bruteforce_and_bounds(m in binary_matrix(9, 6)) {
        let ctx = matrix_context(&m);
        let lattice = ctx.build_lattice().unwrap();
        check_stability(&ctx, &lattice, m[0].len())?;
    }

    #[test]
    fn interval_stability_dp_bruteforce_and_bounds(rows in interval_rows(8, 3)) {
        let ps = interval_structure(&rows);
        let lattice = ps.build_pattern_lattice().unwrap();
        check_stability(&ps, &lattice, ps.boundary_attribute_count())?;
    }
}

// ---------------------------------------------------------------------------
// signal features

fn rel_eq(a: f64, b: f64, tol: f64) -> bool {
    a == b || (a - b).abs() <= tol * a.abs().max(b.abs())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn features_scale_linearly(
        signal in proptest::collection::vec(-100.0..100.0f64, 32..300),
        k in 0.1..10.0f64,
        detrend in proptest::bool::ANY,
    ) {
        let cfg = FeatureConfig { detrend, ..FeatureConfig::default() };
        let scaled: Vec<f64> = signal.iter().map(|x| k * x).collect();
        let a = feature_row(&signal, 200.0, &cfg).unwrap();
        let b = feature_row(&scaled, 200.0, &cfg).unwrap();
        prop_assert!(rel_eq(b.mean_amplitude, k * a.mean_amplitude, 1e-9));
        prop_assert!(rel_eq(b.max_amplitude, k * a.max_amplitude, 1e-9));
        prop_assert!(rel_eq(b.mean_frequency, a.mean_frequency, 1e-9));
        prop_assert_eq!(b.dominant_frequency, a.dominant_frequency);
        prop_assert!(rel_eq(b.amp_freq_ratio, k * a.amp_freq_ratio, 1e-9));
        for (x, y) in a.bandpowers.iter().zip(&b.bandpowers) {
            prop_assert!((y - k * k * x).abs() <= 1e-9 * (k * k * x).abs().max(1e-300) + 1e-12, "{x} {y}");
        }
    }

    #[test]
    fn dominant_frequency_ignores_out_of_band_tones(
        f0 in 7u32..=13,
        amp in 10.0..50.0f64,
        out_freq in prop_oneof![Just(1u32), 20u32..100],
        out_rel in 0.0..0.5f64,
        phases in (0.0..std::f64::consts::TAU, 0.0..std::f64::consts::TAU),
    ) {
        let (fs, n) = (256.0, 256);
        let tone = |f: u32, a: f64, p: f64| (0..n).map(move |i| a * (2.0 * std::f64::consts::PI * f as f64 * i as f64 / fs + p).sin());
        let clean: Vec<f64> = tone(f0, amp, phases.0).collect();
        let mixed: Vec<f64> = clean.iter().zip(tone(out_freq, amp * out_rel, phases.1)).map(|(a, b)| a + b).collect();
        let d_clean = dominant_frequency(&clean, fs, SPINDLE_BAND).unwrap();
        prop_assert_eq!(d_clean, f0 as f64);
        prop_assert_eq!(dominant_frequency(&mixed, fs, SPINDLE_BAND).unwrap(), d_clean);
    }
}

#[test]
fn dominant_frequency_rejects_band_above_nyquist() {
    let x = vec![1.0; 64];
    assert!(dominant_frequency(&x, 20.0, Band::new(6.0, 14.0)).is_err());
}

// ---------------------------------------------------------------------------
// attribute selection

fn numeric_context(cols: &[Vec<f64>]) -> NumericContext {
    let n = cols[0].len();
    NumericContext::new(
        (0..n).map(|i| format!("o{i}")).collect(),
        (0..cols.len()).map(|j| format!("a{j}[u]")).collect(),
        (0..n).map(|i| cols.iter().map(|c| c[i]).collect()).collect(),
    )
    .unwrap()
}

fn columns() -> impl Strategy<Value = Vec<Vec<f64>>> {
    (2..12usize, 1..8usize).prop_flat_map(|(n, m)| {
        proptest::collection::vec(
            prop_oneof![
                proptest::collection::vec(-10.0..10.0f64, n),
                // small integer grid: constants and exact duplicates are likely
                proptest::collection::vec((0..3i32).prop_map(f64::from), n),
            ],
            m,
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn pruning_is_idempotent_and_order_preserving(cols in columns(), threshold in 0.5..=1.0f64) {
        let ctx = numeric_context(&cols);
        let (once, report) = correlation_prune(&ctx, threshold).unwrap();
        let (twice, again) = correlation_prune(&once, threshold).unwrap();
        prop_assert_eq!(&twice, &once);
        prop_assert!(again.dropped.is_empty());
        // retained attributes form a subsequence of the input
        let mut it = ctx.attributes().iter();
        for a in once.attributes() {
            prop_assert!(it.any(|b| b == a));
        }
        prop_assert_eq!(report.retained.len() + report.dropped.len(), ctx.attributes().len());
    }

    #[test]
    fn information_gain_is_bounded_by_label_entropy(
        (cols, labels) in columns().prop_flat_map(|c| {
            let n = c[0].len();
            (Just(c), proptest::collection::vec(0..3u8, n))
        }),
        bins in 2..8usize,
    ) {
        let ctx = numeric_context(&cols);
        let labels: Vec<String> = labels.iter().map(|l| l.to_string()).collect();
        let n = labels.len() as f64;
        let h: f64 = (0..3u8)
            .map(|c| labels.iter().filter(|l| **l == c.to_string()).count() as f64 / n)
            .filter(|&p| p > 0.0)
            .map(|p| -p * p.log2())
            .sum();
        let ranked = information_gain_rank(&ctx, &labels, bins).unwrap();
        prop_assert_eq!(ranked.len(), ctx.attributes().len());
        for w in ranked.windows(2) {
            prop_assert!(w[0].ig >= w[1].ig);
        }
        for r in &ranked {
            prop_assert!(r.ig >= 0.0 && r.ig <= h + 1e-12, "{} outside [0, {h}]", r.ig);
        }
    }
}
