//! Binary formal contexts and their derivation operators.
//!
//! # CSV format
//!
//! The first row holds attribute names (its first cell is a corner label and
//! is ignored). Every following row starts with an object name followed by
//! one cell per attribute: `1`, `x` or `X` for incidence, `0` or an empty
//! cell for its absence. Surrounding whitespace is ignored. Rows whose cell
//! count differs from the header are rejected.

use std::collections::HashSet;
use std::io::{Read, Write};
use std::path::Path;

use crate::bitset::BitSet;
use crate::error::{Error, Result};
use crate::lattice::{BuildOptions, Concept, GaloisConnection, Lattice};

/// Lattice of a binary context; intents are attribute sets.
pub type ConceptLattice = Lattice<BitSet>;

/// Objects `G`, attributes `M` and an incidence relation `I ⊆ G × M`.
#[derive(Debug, Clone, PartialEq)]
pub struct FormalContext {
    objects: Vec<String>,
    attributes: Vec<String>,
    /// `rows[g]` = attributes of object g
    rows: Vec<BitSet>,
    /// `columns[m]` = objects having attribute m
    columns: Vec<BitSet>,
}

fn check_unique(kind: &str, names: &[String]) -> Result<()> {
    let mut seen = HashSet::new();
    for name in names {
        if !seen.insert(name.as_str()) {
            return Err(Error::input(format!("duplicate {kind} name `{name}`")));
        }
    }
    Ok(())
}

impl FormalContext {
    pub fn new<I>(objects: Vec<String>, attributes: Vec<String>, incidence: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        check_unique("object", &objects)?;
        check_unique("attribute", &attributes)?;
        let (n, m) = (objects.len(), attributes.len());
        let mut rows = vec![BitSet::new(m); n];
        let mut columns = vec![BitSet::new(n); m];
        for (g, a) in incidence {
            if g >= n || a >= m {
                return Err(Error::input(format!("incidence ({g}, {a}) outside a {n}x{m} context")));
            }
            rows[g].insert(a);
            columns[a].insert(g);
        }
        Ok(FormalContext {
            objects,
            attributes,
            rows,
            columns,
        })
    }

    /// Builds a context from a dense boolean matrix, one row per object.
    pub fn from_matrix(objects: Vec<String>, attributes: Vec<String>, matrix: &[Vec<bool>]) -> Result<Self> {
        if matrix.len() != objects.len() {
            return Err(Error::input(format!(
                "{} matrix rows for {} objects",
                matrix.len(),
                objects.len()
            )));
        }
        let mut incidence = Vec::new();
        for (g, row) in matrix.iter().enumerate() {
            if row.len() != attributes.len() {
                return Err(Error::input(format!(
                    "row {g} has {} cells, expected {}",
                    row.len(),
                    attributes.len()
                )));
            }
            incidence.extend(row.iter().enumerate().filter(|(_, &b)| b).map(|(m, _)| (g, m)));
        }
        Self::new(objects, attributes, incidence)
    }

    pub fn objects(&self) -> &[String] {
        &self.objects
    }

    pub fn attributes(&self) -> &[String] {
        &self.attributes
    }

    pub fn has(&self, object: usize, attribute: usize) -> bool {
        self.rows.get(object).is_some_and(|r| r.contains(attribute))
    }

    /// Object-index set from explicit indices, bounds-checked.
    pub fn object_set(&self, indices: &[usize]) -> Result<BitSet> {
        index_set("object", self.objects.len(), indices)
    }

    pub fn attribute_set(&self, indices: &[usize]) -> Result<BitSet> {
        index_set("attribute", self.attributes.len(), indices)
    }

    /// `A'`: attributes shared by every object of `objects`. The empty set
    /// derives all of `M`.
    pub fn derive_attributes(&self, objects: &BitSet) -> Result<BitSet> {
        check_universe("object", objects, self.objects.len())?;
        Ok(self.common_attributes(objects))
    }

    /// `B'`: objects having every attribute of `attributes`. The empty set
    /// derives all of `G`.
    pub fn derive_objects(&self, attributes: &BitSet) -> Result<BitSet> {
        check_universe("attribute", attributes, self.attributes.len())?;
        Ok(self.common_objects(attributes))
    }

    /// `A''`
    pub fn closure(&self, objects: &BitSet) -> Result<BitSet> {
        let intent = self.derive_attributes(objects)?;
        Ok(self.common_objects(&intent))
    }

    fn common_attributes(&self, objects: &BitSet) -> BitSet {
        let mut out = BitSet::full(self.attributes.len());
        for g in objects.iter() {
            out.intersect_with(&self.rows[g]);
        }
        out
    }

    fn common_objects(&self, attributes: &BitSet) -> BitSet {
        let mut out = BitSet::full(self.objects.len());
        for m in attributes.iter() {
            out.intersect_with(&self.columns[m]);
        }
        out
    }

    /// True when `(extent, intent)` is a formal concept of this context.
    pub fn is_concept(&self, concept: &Concept) -> bool {
        concept.extent.universe() == self.objects.len()
            && concept.intent.universe() == self.attributes.len()
            && self.common_attributes(&concept.extent) == concept.intent
            && self.common_objects(&concept.intent) == concept.extent
    }

    pub fn build_lattice(&self) -> Result<ConceptLattice> {
        self.build_lattice_with(BuildOptions::default())
    }

    pub fn build_lattice_with(&self, opts: BuildOptions) -> Result<ConceptLattice> {
        Lattice::build(self, opts)
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv(file)
    }

    pub fn from_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let mut records = rdr.records();
        let header = records
            .next()
            .ok_or_else(|| Error::input("context CSV is empty"))?
            .map_err(csv_err)?;
        let attributes: Vec<String> = header.iter().skip(1).map(str::to_owned).collect();

        let mut objects = Vec::new();
        let mut incidence = Vec::new();
        for (line, record) in records.enumerate() {
            let record = record.map_err(csv_err)?;
            if record.len() != header.len() {
                return Err(Error::input(format!(
                    "ragged row {}: {} cells, header has {}",
                    line + 2,
                    record.len(),
                    header.len()
                )));
            }
            let g = objects.len();
            objects.push(record[0].to_owned());
            for (m, cell) in record.iter().skip(1).enumerate() {
                match cell {
                    "1" | "x" | "X" => incidence.push((g, m)),
                    "0" | "" => {}
                    other => {
                        return Err(Error::input(format!(
                            "row {}: cell `{other}` is not one of 1/0/x/empty",
                            line + 2
                        )))
                    }
                }
            }
        }
        Self::new(objects, attributes, incidence)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        let header = std::iter::once("").chain(self.attributes.iter().map(String::as_str));
        wtr.write_record(header).map_err(csv_err)?;
        for (g, name) in self.objects.iter().enumerate() {
            let cells = (0..self.attributes.len()).map(|m| if self.rows[g].contains(m) { "1" } else { "0" });
            wtr.write_record(std::iter::once(name.as_str()).chain(cells))
                .map_err(csv_err)?;
        }
        wtr.flush().map_err(|e| Error::input(e.to_string()))?;
        Ok(())
    }
}

impl GaloisConnection for FormalContext {
    type Intent = BitSet;

    fn object_count(&self) -> usize {
        self.objects.len()
    }

    fn derive_intent(&self, extent: &BitSet) -> BitSet {
        self.common_attributes(extent)
    }

    fn derive_extent(&self, intent: &BitSet) -> BitSet {
        self.common_objects(intent)
    }
}

pub(crate) fn csv_err(e: csv::Error) -> Error {
    Error::input(format!("CSV: {e}"))
}

fn index_set(kind: &str, universe: usize, indices: &[usize]) -> Result<BitSet> {
    let mut set = BitSet::new(universe);
    for &i in indices {
        if i >= universe {
            return Err(Error::input(format!("{kind} index {i} out of bounds ({universe})")));
        }
        set.insert(i);
    }
    Ok(set)
}

fn check_universe(kind: &str, set: &BitSet, expected: usize) -> Result<()> {
    if set.universe() != expected {
        return Err(Error::input(format!(
            "{kind} set over {} indices, context has {expected}",
            set.universe()
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(prefix: &str, n: usize) -> Vec<String> {
        (1..=n).map(|i| format!("{prefix}{i}")).collect()
    }

    /// g1 ↦ {a}, g2 ↦ {a, b}
    fn k1() -> FormalContext {
        FormalContext::new(names("g", 2), vec!["a".into(), "b".into()], [(0, 0), (1, 0), (1, 1)]).unwrap()
    }

    #[test]
    fn derive_attributes_examples() {
        let k = k1();
        let all = k.object_set(&[0, 1]).unwrap();
        assert_eq!(k.derive_attributes(&all).unwrap().to_vec(), vec![0]);
        assert_eq!(
            k.derive_attributes(&k.object_set(&[]).unwrap()).unwrap().to_vec(),
            vec![0, 1]
        );
        assert_eq!(
            k.derive_attributes(&k.object_set(&[1]).unwrap()).unwrap().to_vec(),
            vec![0, 1]
        );
    }

    #[test]
    fn derive_objects_examples() {
        let k = k1();
        assert_eq!(
            k.derive_objects(&k.attribute_set(&[0]).unwrap()).unwrap().to_vec(),
            vec![0, 1]
        );
        assert_eq!(
            k.derive_objects(&k.attribute_set(&[]).unwrap()).unwrap().to_vec(),
            vec![0, 1]
        );
        assert_eq!(
            k.derive_objects(&k.attribute_set(&[0, 1]).unwrap()).unwrap().to_vec(),
            vec![1]
        );
    }

    #[test]
    fn closure_examples() {
        let k = k1();
        assert_eq!(k.closure(&k.object_set(&[0]).unwrap()).unwrap().to_vec(), vec![0, 1]);
        assert_eq!(k.closure(&k.object_set(&[1]).unwrap()).unwrap().to_vec(), vec![1]);
    }

    #[test]
    fn out_of_bounds_indices_are_input_errors() {
        let k = k1();
        assert!(matches!(k.object_set(&[2]), Err(Error::Input(_))));
        assert!(matches!(k.attribute_set(&[5]), Err(Error::Input(_))));
        assert!(matches!(k.derive_attributes(&BitSet::new(3)), Err(Error::Input(_))));
        assert!(FormalContext::new(names("g", 1), names("m", 1), [(0, 1)]).is_err());
    }

    #[test]
    fn duplicate_names_rejected() {
        let err = FormalContext::new(vec!["g".into(), "g".into()], vec![], []).unwrap_err();
        assert!(err.to_string().contains("duplicate object"));
    }

    #[test]
    fn k1_lattice() {
        let lat = k1().build_lattice().unwrap();
        assert_eq!(lat.len(), 2);
        let top = &lat.concepts()[lat.top()];
        assert_eq!((top.extent.to_vec(), top.intent.to_vec()), (vec![0, 1], vec![0]));
        let bottom = &lat.concepts()[lat.bottom()];
        assert_eq!((bottom.extent.to_vec(), bottom.intent.to_vec()), (vec![1], vec![0, 1]));
        assert_eq!(lat.covers(), &[(0, 1)]);
        assert_eq!(lat.direct_descendants(lat.top()).unwrap(), &[lat.bottom()]);
        assert!(lat.direct_descendants(lat.bottom()).unwrap().is_empty());
        assert!(lat.direct_descendants(7).is_err());
    }

    #[test]
    fn empty_incidence_lattice() {
        let k = FormalContext::new(names("g", 2), names("m", 2), []).unwrap();
        let lat = k.build_lattice().unwrap();
        let got: Vec<_> = lat
            .concepts()
            .iter()
            .map(|c| (c.extent.to_vec(), c.intent.to_vec()))
            .collect();
        assert_eq!(got, vec![(vec![0, 1], vec![]), (vec![], vec![0, 1])]);
    }

    #[test]
    fn single_full_cell_is_one_concept() {
        let k = FormalContext::new(names("g", 1), names("m", 1), [(0, 0)]).unwrap();
        let lat = k.build_lattice().unwrap();
        assert_eq!(lat.len(), 1);
        assert_eq!(lat.concepts()[0].extent.to_vec(), vec![0]);
        assert_eq!(lat.concepts()[0].intent.to_vec(), vec![0]);
        assert!(lat.covers().is_empty());
    }

    #[test]
    fn empty_context_has_single_concept() {
        let k = FormalContext::new(vec![], vec![], []).unwrap();
        let lat = k.build_lattice().unwrap();
        assert_eq!(lat.len(), 1);
        assert_eq!(lat.top(), lat.bottom());
    }

    #[test]
    fn chain_lattice_has_single_descendants() {
        // g1 ⊂ g2 ⊂ g3 by attribute sets gives nested extents {g3} ⊂ {g2,g3} ⊂ G
        let k = FormalContext::new(
            names("g", 3),
            names("m", 3),
            [(0, 0), (1, 0), (1, 1), (2, 0), (2, 1), (2, 2)],
        )
        .unwrap();
        let lat = k.build_lattice().unwrap();
        assert_eq!(lat.len(), 3);
        assert_eq!(lat.direct_descendants(lat.top()).unwrap().len(), 1);
        assert_eq!(lat.covers(), &[(0, 1), (1, 2)]);
    }

    #[test]
    fn concept_cap_reports_capacity() {
        // Contranominal scale: every subset is an extent.
        let n = 6;
        let k = FormalContext::new(
            names("g", n),
            names("m", n),
            (0..n).flat_map(|g| (0..n).filter(move |&m| m != g).map(move |m| (g, m))),
        )
        .unwrap();
        assert_eq!(k.build_lattice().unwrap().len(), 64);
        let err = k
            .build_lattice_with(BuildOptions {
                concept_cap: 10,
                parallel: false,
            })
            .unwrap_err();
        assert!(err.is_capacity());
    }

    #[test]
    fn csv_round_trip_and_cell_forms() {
        let text = ",a,b\ng1,x,\ng2, 1 ,X\n";
        let k = FormalContext::from_csv(text.as_bytes()).unwrap();
        assert_eq!(k, k1());
        let mut buf = Vec::new();
        k.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf.clone()).unwrap(), ",a,b\ng1,1,0\ng2,1,1\n");
        assert_eq!(FormalContext::from_csv(buf.as_slice()).unwrap(), k);
    }

    #[test]
    fn csv_rejects_ragged_rows_and_bad_cells() {
        let err = FormalContext::from_csv(",a,b\ng1,1\n".as_bytes()).unwrap_err();
        assert!(err.to_string().contains("ragged"), "{err}");
        let err = FormalContext::from_csv(",a\ng1,yes\n".as_bytes()).unwrap_err();
        assert!(err.to_string().contains("yes"), "{err}");
    }
}
