//! Concept lattice construction shared by binary contexts and pattern
//! structures.
//!
//! Both kinds of data expose a Galois connection between object sets and
//! some intent type. Closed extents are enumerated with Close-by-One over
//! object indices; the cover relation is then recovered from the finished
//! concept set by counting, for each concept, how many single-object
//! extensions close to the same upper neighbour.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::sync::atomic::{AtomicUsize, Ordering};

use rayon::prelude::*;

use crate::bitset::BitSet;
use crate::error::{Error, Result};

/// Default upper limit on the number of concepts a build may produce.
pub const DEFAULT_CONCEPT_CAP: usize = 10_000_000;

/// A Galois connection between subsets of objects and intents.
pub trait GaloisConnection: Sync {
    type Intent: Clone + PartialEq + Send + Sync;

    fn object_count(&self) -> usize;

    /// Common intent of every object in `extent`.
    fn derive_intent(&self, extent: &BitSet) -> Self::Intent;

    /// All objects whose own intent is at least as specific as `intent`.
    fn derive_extent(&self, intent: &Self::Intent) -> BitSet;

    fn close(&self, extent: &BitSet) -> BitSet {
        self.derive_extent(&self.derive_intent(extent))
    }
}

/// An (extent, intent) pair closed under its Galois connection.
#[derive(Debug, Clone, PartialEq)]
pub struct Concept<I = BitSet> {
    pub extent: BitSet,
    pub intent: I,
}

#[derive(Debug, Clone, Copy)]
pub struct BuildOptions {
    pub concept_cap: usize,
    /// Enumerate top-level Close-by-One branches on the rayon pool.
    pub parallel: bool,
}

impl Default for BuildOptions {
    fn default() -> Self {
        BuildOptions {
            concept_cap: DEFAULT_CONCEPT_CAP,
            parallel: true,
        }
    }
}

/// All concepts of a Galois connection plus the cover relation.
///
/// Concepts are ordered by extent size (descending), then lexicographically
/// by extent, so the top concept is always at index 0 and the bottom at the
/// last index.
#[derive(Debug, Clone)]
pub struct Lattice<I> {
    concepts: Vec<Concept<I>>,
    covers: Vec<(usize, usize)>,
    children: Vec<Vec<usize>>,
    parents: Vec<Vec<usize>>,
    object_count: usize,
}

impl<I: Clone + PartialEq + Send + Sync> Lattice<I> {
    pub fn build<C>(conn: &C, opts: BuildOptions) -> Result<Self>
    where
        C: GaloisConnection<Intent = I>,
    {
        let mut extents = enumerate_extents(conn, opts)?;
        extents.sort_by(|a, b| b.len().cmp(&a.len()).then_with(|| a.cmp(b)));

        let concepts: Vec<Concept<I>> = extents
            .into_par_iter()
            .map(|extent| {
                let intent = conn.derive_intent(&extent);
                Concept { extent, intent }
            })
            .collect();
        let covers = upper_covers(conn, &concepts);
        Ok(Self::from_parts(concepts, covers, conn.object_count()))
    }

    fn from_parts(concepts: Vec<Concept<I>>, mut covers: Vec<(usize, usize)>, object_count: usize) -> Self {
        covers.sort_unstable();
        let mut children = vec![Vec::new(); concepts.len()];
        let mut parents = vec![Vec::new(); concepts.len()];
        for &(p, c) in &covers {
            children[p].push(c);
            parents[c].push(p);
        }
        Lattice {
            concepts,
            covers,
            children,
            parents,
            object_count,
        }
    }
}

impl<I> Lattice<I> {
    pub fn len(&self) -> usize {
        self.concepts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.concepts.is_empty()
    }

    pub fn concepts(&self) -> &[Concept<I>] {
        &self.concepts
    }

    pub fn concept(&self, index: usize) -> Result<&Concept<I>> {
        self.concepts
            .get(index)
            .ok_or_else(|| Error::input(format!("concept index {index} out of range ({} concepts)", self.len())))
    }

    /// Cover edges `(parent, child)`: the parent's extent strictly contains
    /// the child's with no concept in between.
    pub fn covers(&self) -> &[(usize, usize)] {
        &self.covers
    }

    /// Children of `index` under the cover relation.
    pub fn direct_descendants(&self, index: usize) -> Result<&[usize]> {
        self.concept(index)?;
        Ok(&self.children[index])
    }

    pub fn direct_ancestors(&self, index: usize) -> Result<&[usize]> {
        self.concept(index)?;
        Ok(&self.parents[index])
    }

    pub fn top(&self) -> usize {
        0
    }

    pub fn bottom(&self) -> usize {
        self.concepts.len() - 1
    }

    /// Number of objects of the underlying data (|G|).
    pub fn object_count(&self) -> usize {
        self.object_count
    }

    pub fn index_of_extent(&self, extent: &BitSet) -> Option<usize> {
        self.concepts.iter().position(|c| &c.extent == extent)
    }

    /// Graphviz rendering of the cover relation.
    pub fn to_dot(&self, label: impl Fn(usize, &Concept<I>) -> String) -> String {
        let mut out = String::from("digraph lattice {\n  rankdir=TB;\n  node [shape=box];\n");
        for (i, c) in self.concepts.iter().enumerate() {
            let text = label(i, c).replace('\\', "\\\\").replace('"', "\\\"");
            let _ = writeln!(out, "  c{i} [label=\"{text}\"];");
        }
        for (p, c) in &self.covers {
            let _ = writeln!(out, "  c{p} -> c{c};");
        }
        out.push_str("}\n");
        out
    }
}

fn enumerate_extents<C: GaloisConnection>(conn: &C, opts: BuildOptions) -> Result<Vec<BitSet>> {
    let n = conn.object_count();
    let counter = AtomicUsize::new(0);
    let root = conn.close(&BitSet::new(n));
    bump(&counter, opts.concept_cap)?;

    let branch = |g: usize| -> Result<Vec<BitSet>> {
        let mut out = Vec::new();
        if let Some(child) = extend(conn, &root, g) {
            close_by_one(conn, child, g + 1, &mut out, &counter, opts.concept_cap)?;
        }
        Ok(out)
    };

    let branches: Vec<Vec<BitSet>> = if opts.parallel {
        (0..n).into_par_iter().map(branch).collect::<Result<_>>()?
    } else {
        (0..n).map(branch).collect::<Result<_>>()?
    };

    let mut all = Vec::with_capacity(1 + branches.iter().map(Vec::len).sum::<usize>());
    all.push(root);
    all.extend(branches.into_iter().flatten());
    Ok(all)
}

/// Closure of `extent ∪ {g}` if `g` is new and the result passes the
/// canonicity test (no object below `g` was added).
fn extend<C: GaloisConnection>(conn: &C, extent: &BitSet, g: usize) -> Option<BitSet> {
    if extent.contains(g) {
        return None;
    }
    let mut next = extent.clone();
    next.insert(g);
    let closed = conn.close(&next);
    closed.agrees_below(extent, g).then_some(closed)
}

fn close_by_one<C: GaloisConnection>(
    conn: &C,
    extent: BitSet,
    from: usize,
    out: &mut Vec<BitSet>,
    counter: &AtomicUsize,
    cap: usize,
) -> Result<()> {
    bump(counter, cap)?;
    for g in from..conn.object_count() {
        if let Some(child) = extend(conn, &extent, g) {
            close_by_one(conn, child, g + 1, out, counter, cap)?;
        }
    }
    out.push(extent);
    Ok(())
}

fn bump(counter: &AtomicUsize, cap: usize) -> Result<()> {
    if counter.fetch_add(1, Ordering::Relaxed) >= cap {
        return Err(Error::Capacity {
            what: "concept count".into(),
            limit: cap,
        });
    }
    Ok(())
}

/// Upper covers of every concept. For a concept with extent `A`, each
/// `g ∉ A` generates the candidate `(A ∪ {g})''`; a candidate `F` is an
/// upper neighbour iff every object of `F \ A` generates it.
fn upper_covers<C: GaloisConnection, I: Sync>(conn: &C, concepts: &[Concept<I>]) -> Vec<(usize, usize)> {
    let index: HashMap<&BitSet, usize> = concepts.iter().enumerate().map(|(i, c)| (&c.extent, i)).collect();
    let n = conn.object_count();

    concepts
        .par_iter()
        .enumerate()
        .flat_map_iter(|(child, concept)| {
            let extent = &concept.extent;
            let mut generated: HashMap<BitSet, usize> = HashMap::new();
            for g in (0..n).filter(|&g| !extent.contains(g)) {
                let mut next = extent.clone();
                next.insert(g);
                *generated.entry(conn.close(&next)).or_default() += 1;
            }
            let mut edges: Vec<(usize, usize)> = generated
                .into_iter()
                .filter(|(upper, count)| upper.len() - extent.len() == *count)
                .map(|(upper, _)| (index[&upper], child))
                .collect();
            edges.sort_unstable();
            edges
        })
        .collect()
}
