//! Interval pattern structures over numeric data.
//!
//! Each object is described by one closed interval per numeric attribute;
//! raw measurements become degenerate intervals `[v, v]`. The similarity of
//! two descriptions is their component-wise convex hull, so descriptions
//! only ever hold input values and equality stays exact.

use std::collections::HashSet;
use std::fmt;
use std::io::Read;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::bitset::BitSet;
use crate::error::{Error, Result};
use crate::fca::csv_err;
use crate::lattice::{BuildOptions, Concept, GaloisConnection, Lattice};

/// A closed interval `[low, high]` with finite bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    low: f64,
    high: f64,
}

impl Interval {
    pub fn new(low: f64, high: f64) -> Result<Self> {
        if !low.is_finite() || !high.is_finite() {
            return Err(Error::input(format!(
                "interval bounds must be finite, got [{low}, {high}]"
            )));
        }
        if low > high {
            return Err(Error::input(format!("interval low {low} exceeds high {high}")));
        }
        Ok(Interval { low, high })
    }

    pub fn point(value: f64) -> Result<Self> {
        Self::new(value, value)
    }

    pub fn low(&self) -> f64 {
        self.low
    }

    pub fn high(&self) -> f64 {
        self.high
    }

    /// Convex hull `[min(a, c), max(b, d)]`.
    pub fn hull(&self, other: &Interval) -> Interval {
        Interval {
            low: self.low.min(other.low),
            high: self.high.max(other.high),
        }
    }

    pub fn contains(&self, other: &Interval) -> bool {
        self.low <= other.low && other.high <= self.high
    }

    pub fn contains_value(&self, v: f64) -> bool {
        self.low <= v && v <= self.high
    }
}

/// Written as `lo..hi` using the shortest round-trip float representation.
impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}..{:?}", self.low, self.high)
    }
}

impl FromStr for Interval {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let parse = |t: &str| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| Error::input(format!("`{t}` is not a number")))
        };
        match s.split_once("..") {
            Some((lo, hi)) => Interval::new(parse(lo)?, parse(hi)?),
            None => Interval::point(parse(s)?),
        }
    }
}

impl Serialize for Interval {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Interval {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// One interval per numeric attribute.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct IntervalDescription {
    intervals: Vec<Interval>,
}

impl IntervalDescription {
    pub fn new(intervals: Vec<Interval>) -> Self {
        IntervalDescription { intervals }
    }

    /// Degenerate intervals `[v, v]` for each value.
    pub fn points(values: &[f64]) -> Result<Self> {
        Ok(IntervalDescription {
            intervals: values.iter().map(|&v| Interval::point(v)).collect::<Result<_>>()?,
        })
    }

    pub fn width(&self) -> usize {
        self.intervals.len()
    }

    pub fn intervals(&self) -> &[Interval] {
        &self.intervals
    }

    fn hull_with(&mut self, other: &IntervalDescription) {
        for (a, b) in self.intervals.iter_mut().zip(&other.intervals) {
            *a = a.hull(b);
        }
    }

    fn contains(&self, other: &IntervalDescription) -> bool {
        self.intervals.iter().zip(&other.intervals).all(|(a, b)| a.contains(b))
    }
}

impl fmt::Display for IntervalDescription {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("<")?;
        for (i, iv) in self.intervals.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "[{}, {}]", iv.low, iv.high)?;
        }
        f.write_str(">")
    }
}

fn check_widths(a: &IntervalDescription, b: &IntervalDescription) -> Result<()> {
    if a.width() != b.width() {
        return Err(Error::input(format!(
            "description widths differ: {} vs {}",
            a.width(),
            b.width()
        )));
    }
    Ok(())
}

/// Similarity `d1 ⊓ d2`: component-wise convex hull.
pub fn interval_meet(d1: &IntervalDescription, d2: &IntervalDescription) -> Result<IntervalDescription> {
    check_widths(d1, d2)?;
    let mut out = d1.clone();
    out.hull_with(d2);
    Ok(out)
}

/// `c ⊑ d`, i.e. `c ⊓ d = c`: every interval of `c` contains the matching
/// interval of `d`.
pub fn subsumes(c: &IntervalDescription, d: &IntervalDescription) -> Result<bool> {
    check_widths(c, d)?;
    Ok(c.contains(d))
}

/// Intent of a pattern concept.
///
/// `Bottom` is the meet identity: the description of the empty object set,
/// more specific than every interval description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PatternIntent {
    Bottom,
    Hull(IntervalDescription),
}

impl PatternIntent {
    pub fn as_hull(&self) -> Option<&IntervalDescription> {
        match self {
            PatternIntent::Bottom => None,
            PatternIntent::Hull(d) => Some(d),
        }
    }
}

impl fmt::Display for PatternIntent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PatternIntent::Bottom => f.write_str("⊥"),
            PatternIntent::Hull(d) => d.fmt(f),
        }
    }
}

pub type PatternConcept = Concept<PatternIntent>;
pub type PatternLattice = Lattice<PatternIntent>;

/// Objects with interval descriptions over a shared list of numeric
/// attributes.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalPatternStructure {
    objects: Vec<String>,
    attributes: Vec<String>,
    descriptions: Vec<IntervalDescription>,
}

impl IntervalPatternStructure {
    pub fn new(objects: Vec<String>, attributes: Vec<String>, descriptions: Vec<IntervalDescription>) -> Result<Self> {
        let mut seen = HashSet::new();
        if let Some(dup) = objects.iter().find(|o| !seen.insert(o.as_str())) {
            return Err(Error::input(format!("duplicate object name `{dup}`")));
        }
        let mut seen = HashSet::new();
        if let Some(dup) = attributes.iter().find(|a| !seen.insert(a.as_str())) {
            return Err(Error::input(format!("duplicate attribute name `{dup}`")));
        }
        if descriptions.len() != objects.len() {
            return Err(Error::input(format!(
                "{} descriptions for {} objects",
                descriptions.len(),
                objects.len()
            )));
        }
        if let Some((g, d)) = descriptions
            .iter()
            .enumerate()
            .find(|(_, d)| d.width() != attributes.len())
        {
            return Err(Error::input(format!(
                "object `{}` has {} intervals, expected {}",
                objects[g],
                d.width(),
                attributes.len()
            )));
        }
        Ok(IntervalPatternStructure {
            objects,
            attributes,
            descriptions,
        })
    }

    /// Point-valued structure: every value `v` becomes `[v, v]`.
    pub fn from_points(objects: Vec<String>, attributes: Vec<String>, values: &[Vec<f64>]) -> Result<Self> {
        let descriptions = values
            .iter()
            .map(|row| IntervalDescription::points(row))
            .collect::<Result<_>>()?;
        Self::new(objects, attributes, descriptions)
    }

    pub fn objects(&self) -> &[String] {
        &self.objects
    }

    pub fn attributes(&self) -> &[String] {
        &self.attributes
    }

    /// `δ(g)`
    pub fn description(&self, object: usize) -> Option<&IntervalDescription> {
        self.descriptions.get(object)
    }

    /// Number of binary attributes of the interordinal view (a lower and an
    /// upper boundary per numeric attribute). Bounds every concept's count
    /// of direct descendants, so it plays the role of |M| for stability
    /// bounds.
    pub fn boundary_attribute_count(&self) -> usize {
        2 * self.attributes.len()
    }

    pub fn object_set(&self, indices: &[usize]) -> Result<BitSet> {
        let n = self.objects.len();
        let mut set = BitSet::new(n);
        for &i in indices {
            if i >= n {
                return Err(Error::input(format!("object index {i} out of bounds ({n})")));
            }
            set.insert(i);
        }
        Ok(set)
    }

    /// `A^⋄`: hull of the descriptions of `extent`. The empty set has no
    /// interval description (its intent is [`PatternIntent::Bottom`]).
    pub fn extent_to_description(&self, extent: &BitSet) -> Result<IntervalDescription> {
        if extent.universe() != self.objects.len() {
            return Err(Error::input(format!(
                "object set over {} indices, structure has {}",
                extent.universe(),
                self.objects.len()
            )));
        }
        self.hull(extent)
            .ok_or_else(|| Error::input("empty object set has no interval description (bottom)"))
    }

    fn hull(&self, extent: &BitSet) -> Option<IntervalDescription> {
        let mut members = extent.iter();
        let mut out = self.descriptions[members.next()?].clone();
        for g in members {
            out.hull_with(&self.descriptions[g]);
        }
        Some(out)
    }

    /// `d^⋄`: objects whose description is subsumed by `d`.
    pub fn description_to_extent(&self, d: &IntervalDescription) -> Result<BitSet> {
        if d.width() != self.attributes.len() {
            return Err(Error::input(format!(
                "description width {} does not match {} attributes",
                d.width(),
                self.attributes.len()
            )));
        }
        Ok(self.covered_by(d))
    }

    fn covered_by(&self, d: &IntervalDescription) -> BitSet {
        let mut out = BitSet::new(self.objects.len());
        for (g, desc) in self.descriptions.iter().enumerate() {
            if d.contains(desc) {
                out.insert(g);
            }
        }
        out
    }

    pub fn is_concept(&self, concept: &PatternConcept) -> bool {
        concept.extent.universe() == self.objects.len()
            && self.derive_intent(&concept.extent) == concept.intent
            && self.derive_extent(&concept.intent) == concept.extent
    }

    pub fn build_pattern_lattice(&self) -> Result<PatternLattice> {
        self.build_pattern_lattice_with(BuildOptions::default())
    }

    pub fn build_pattern_lattice_with(&self, opts: BuildOptions) -> Result<PatternLattice> {
        if self.objects.is_empty() {
            return Err(Error::input("pattern structure has no objects"));
        }
        Lattice::build(self, opts)
    }

    /// Reads a numeric context: a header row `id,<attr>,...` and one row per
    /// object. Cells are plain numbers or `lo..hi` intervals.
    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv(file)
    }

    pub fn from_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let header = rdr.headers().map_err(csv_err)?.clone();
        if header.is_empty() {
            return Err(Error::input("numeric context CSV has no header"));
        }
        let attributes: Vec<String> = header.iter().skip(1).map(str::to_owned).collect();
        let mut objects = Vec::new();
        let mut descriptions = Vec::new();
        for (line, record) in rdr.records().enumerate() {
            let record = record.map_err(csv_err)?;
            objects.push(record[0].to_owned());
            let intervals = record
                .iter()
                .skip(1)
                .map(|cell| cell.parse::<Interval>())
                .collect::<Result<Vec<_>>>()
                .map_err(|e| Error::input(format!("row {}: {e}", line + 2)))?;
            descriptions.push(IntervalDescription::new(intervals));
        }
        Self::new(objects, attributes, descriptions)
    }
}

impl GaloisConnection for IntervalPatternStructure {
    type Intent = PatternIntent;

    fn object_count(&self) -> usize {
        self.objects.len()
    }

    fn derive_intent(&self, extent: &BitSet) -> PatternIntent {
        self.hull(extent).map_or(PatternIntent::Bottom, PatternIntent::Hull)
    }

    fn derive_extent(&self, intent: &PatternIntent) -> BitSet {
        match intent {
            PatternIntent::Bottom => BitSet::new(self.objects.len()),
            PatternIntent::Hull(d) => self.covered_by(d),
        }
    }
}
