//! Numeric contexts built from feature rows, and attribute selection.
//!
//! Attribute names carry their unit in a bracketed suffix, e.g.
//! `mean_amplitude[uV]`. The CSV form has a header `id,<attr>,…` and one row
//! per object; values are written in shortest round-trip notation so a
//! read-back is bit-exact.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fca::csv_err;
use crate::pattern::IntervalPatternStructure;
use crate::signal::{FeatureConfig, FeatureRow};

/// Unit suffix of an attribute name, if any: `"x[Hz]"` → `"Hz"`.
pub fn unit_of(attribute: &str) -> Option<&str> {
    let open = attribute.rfind('[')?;
    attribute[open + 1..].strip_suffix(']')
}

/// Objects × numeric attributes.
#[derive(Debug, Clone, PartialEq)]
pub struct NumericContext {
    objects: Vec<String>,
    attributes: Vec<String>,
    values: Vec<Vec<f64>>,
}

impl NumericContext {
    pub fn new(objects: Vec<String>, attributes: Vec<String>, values: Vec<Vec<f64>>) -> Result<Self> {
        let mut seen = HashSet::new();
        if let Some(dup) = objects.iter().find(|o| !seen.insert(o.as_str())) {
            return Err(Error::input(format!("duplicate object id `{dup}`")));
        }
        let mut seen = HashSet::new();
        if let Some(dup) = attributes.iter().find(|a| !seen.insert(a.as_str())) {
            return Err(Error::input(format!("duplicate attribute `{dup}`")));
        }
        if values.len() != objects.len() {
            return Err(Error::input(format!(
                "{} rows for {} objects",
                values.len(),
                objects.len()
            )));
        }
        for (g, row) in values.iter().enumerate() {
            if row.len() != attributes.len() {
                return Err(Error::input(format!(
                    "object `{}` has {} values, expected {}",
                    objects[g],
                    row.len(),
                    attributes.len()
                )));
            }
            if let Some(v) = row.iter().find(|v| !v.is_finite()) {
                return Err(Error::input(format!(
                    "object `{}` has non-finite value {v}",
                    objects[g]
                )));
            }
        }
        Ok(NumericContext {
            objects,
            attributes,
            values,
        })
    }

    pub fn objects(&self) -> &[String] {
        &self.objects
    }

    pub fn attributes(&self) -> &[String] {
        &self.attributes
    }

    pub fn values(&self) -> &[Vec<f64>] {
        &self.values
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.values.iter().map(|row| row[j]).collect()
    }

    /// Keeps the given attribute columns, in ascending column order.
    pub fn select(&self, columns: &[usize]) -> NumericContext {
        let mut cols = columns.to_vec();
        cols.sort_unstable();
        cols.dedup();
        NumericContext {
            objects: self.objects.clone(),
            attributes: cols.iter().map(|&j| self.attributes[j].clone()).collect(),
            values: self
                .values
                .iter()
                .map(|row| cols.iter().map(|&j| row[j]).collect())
                .collect(),
        }
    }

    /// Every value becomes a degenerate interval.
    pub fn to_pattern_structure(&self) -> Result<IntervalPatternStructure> {
        IntervalPatternStructure::from_points(self.objects.clone(), self.attributes.clone(), &self.values)
    }

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
        let attributes = header.iter().skip(1).map(str::to_owned).collect();
        let mut objects = Vec::new();
        let mut values = Vec::new();
        for (line, record) in rdr.records().enumerate() {
            let record = record.map_err(csv_err)?;
            objects.push(record[0].to_owned());
            let row = record
                .iter()
                .skip(1)
                .map(|cell| {
                    cell.parse::<f64>()
                        .map_err(|_| Error::input(format!("row {}: `{cell}` is not a number", line + 2)))
                })
                .collect::<Result<Vec<_>>>()?;
            values.push(row);
        }
        Self::new(objects, attributes, values)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(std::iter::once("id").chain(self.attributes.iter().map(String::as_str)))
            .map_err(csv_err)?;
        for (id, row) in self.objects.iter().zip(&self.values) {
            let mut record = vec![id.clone()];
            record.extend(row.iter().map(|v| format!("{v:?}")));
            wtr.write_record(&record).map_err(csv_err)?;
        }
        wtr.flush().map_err(|e| Error::input(e.to_string()))
    }
}

/// One object per row; columns follow [`FeatureConfig::attribute_names`].
pub fn build_numeric_context(rows: &[(String, FeatureRow)], config: &FeatureConfig) -> Result<NumericContext> {
    if rows.is_empty() {
        return Err(Error::input("no feature rows"));
    }
    let attributes = config.attribute_names();
    let values = rows
        .iter()
        .map(|(id, row)| {
            if row.bandpowers.len() != config.bands.len() {
                return Err(Error::input(format!(
                    "`{id}` has {} bandpowers, expected {}",
                    row.bandpowers.len(),
                    config.bands.len()
                )));
            }
            Ok(row.values())
        })
        .collect::<Result<Vec<_>>>()?;
    NumericContext::new(rows.iter().map(|(id, _)| id.clone()).collect(), attributes, values)
}

/// Feature rows computed on several channels per object; attribute names
/// are prefixed with `<channel>:`. Every object must list the same channels
/// in the same order.
pub fn build_numeric_context_multichannel(
    rows: &[(String, Vec<(String, FeatureRow)>)],
    config: &FeatureConfig,
) -> Result<NumericContext> {
    let (_, first) = rows.first().ok_or_else(|| Error::input("no feature rows"))?;
    let channels: Vec<&String> = first.iter().map(|(c, _)| c).collect();
    let base = config.attribute_names();
    let attributes = channels
        .iter()
        .flat_map(|c| base.iter().map(move |a| format!("{c}:{a}")))
        .collect();
    let values = rows
        .iter()
        .map(|(id, per_channel)| {
            if per_channel.iter().map(|(c, _)| c).ne(channels.iter().copied()) {
                return Err(Error::input(format!("`{id}` lists different channels")));
            }
            let mut v = Vec::new();
            for (_, row) in per_channel {
                if row.bandpowers.len() != config.bands.len() {
                    return Err(Error::input(format!("`{id}` has a bandpower width mismatch")));
                }
                v.extend(row.values());
            }
            Ok(v)
        })
        .collect::<Result<Vec<_>>>()?;
    NumericContext::new(rows.iter().map(|(id, _)| id.clone()).collect(), attributes, values)
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Pearson correlation; `None` when either column has zero variance.
pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let (mx, my) = (mean(x), mean(y));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DroppedAttribute {
    pub attribute: String,
    /// Earlier retained attribute it correlates with.
    pub partner: String,
    pub r: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PruneReport {
    pub dropped: Vec<DroppedAttribute>,
    pub retained: Vec<String>,
    pub warnings: Vec<String>,
}

/// Greedy correlation filter in column order: an attribute is dropped when
/// `|r| > threshold` against any attribute already retained. Two
/// zero-variance columns count as perfectly correlated; a zero-variance
/// column against a varying one counts as uncorrelated.
pub fn correlation_prune(ctx: &NumericContext, threshold: f64) -> Result<(NumericContext, PruneReport)> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(Error::input(format!(
            "correlation threshold {threshold} outside (0, 1]"
        )));
    }
    if ctx.objects.len() < 2 {
        return Err(Error::input("correlation pruning needs at least 2 objects"));
    }
    let columns: Vec<Vec<f64>> = (0..ctx.attributes.len()).map(|j| ctx.column(j)).collect();
    let constant: Vec<bool> = columns.iter().map(|c| c.iter().all(|&v| v == c[0])).collect();

    let mut kept: Vec<usize> = Vec::new();
    let mut report = PruneReport::default();
    for j in 0..columns.len() {
        let partner = kept.iter().find_map(|&i| {
            if constant[i] && constant[j] {
                Some((i, 1.0))
            } else {
                pearson(&columns[i], &columns[j])
                    .filter(|r| r.abs() > threshold)
                    .map(|r| (i, r))
            }
        });
        match partner {
            Some((i, r)) => {
                if constant[j] {
                    report.warnings.push(format!(
                        "`{}` has zero variance; dropped as a duplicate of `{}`",
                        ctx.attributes[j], ctx.attributes[i]
                    ));
                }
                report.dropped.push(DroppedAttribute {
                    attribute: ctx.attributes[j].clone(),
                    partner: ctx.attributes[i].clone(),
                    r,
                });
            }
            None => kept.push(j),
        }
    }
    let pruned = ctx.select(&kept);
    report.retained = pruned.attributes.clone();
    Ok((pruned, report))
}

/// Entropy in bits of a label multiset.
fn entropy<'a>(labels: impl IntoIterator<Item = &'a str>) -> f64 {
    // ordered map: the summation order must not vary between runs
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    let mut n = 0usize;
    for l in labels {
        *counts.entry(l).or_default() += 1;
        n += 1;
    }
    counts
        .values()
        .map(|&c| {
            let p = c as f64 / n as f64;
            -p * p.log2()
        })
        .sum()
}

/// Equal-width bin index of each value over `[min, max]`.
fn equal_width_bins(values: &[f64], bins: usize) -> Vec<usize> {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let width = hi - lo;
    values
        .iter()
        .map(|&v| {
            if width == 0.0 {
                0
            } else {
                (((v - lo) / width * bins as f64) as usize).min(bins - 1)
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedAttribute {
    pub attribute: String,
    /// Information gain in bits.
    pub ig: f64,
}

/// `IG = H(labels) − H(labels | binned attribute)` for every attribute,
/// sorted descending; ties keep column order.
pub fn information_gain_rank(ctx: &NumericContext, labels: &[String], bins: usize) -> Result<Vec<RankedAttribute>> {
    if bins < 2 {
        return Err(Error::input(format!(
            "information gain needs at least 2 bins, got {bins}"
        )));
    }
    if labels.len() != ctx.objects.len() {
        return Err(Error::input(format!(
            "{} labels for {} objects",
            labels.len(),
            ctx.objects.len()
        )));
    }
    let n = labels.len() as f64;
    let h = entropy(labels.iter().map(String::as_str));
    let mut ranked: Vec<RankedAttribute> = (0..ctx.attributes.len())
        .map(|j| {
            let binned = equal_width_bins(&ctx.column(j), bins);
            let conditional: f64 = (0..bins)
                .map(|b| {
                    let members: Vec<&str> = binned
                        .iter()
                        .zip(labels)
                        .filter(|(&bin, _)| bin == b)
                        .map(|(_, l)| l.as_str())
                        .collect();
                    if members.is_empty() {
                        0.0
                    } else {
                        members.len() as f64 / n * entropy(members)
                    }
                })
                .sum();
            RankedAttribute {
                attribute: ctx.attributes[j].clone(),
                ig: (h - conditional).clamp(0.0, h),
            }
        })
        .collect();
    ranked.sort_by(|a, b| b.ig.total_cmp(&a.ig));
    Ok(ranked)
}

/// Reads a `id,class` CSV.
pub fn read_labels(path: impl AsRef<Path>) -> Result<HashMap<String, String>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_labels(file)
}

pub fn parse_labels<R: Read>(reader: R) -> Result<HashMap<String, String>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header = rdr.headers().map_err(csv_err)?;
    if header.len() != 2 {
        return Err(Error::input("labels CSV must have exactly two columns: id,class"));
    }
    let mut out = HashMap::new();
    for record in rdr.records() {
        let record = record.map_err(csv_err)?;
        if out.insert(record[0].to_owned(), record[1].to_owned()).is_some() {
            return Err(Error::input(format!("duplicate label for `{}`", &record[0])));
        }
    }
    Ok(out)
}

/// Writes `id,class` rows sorted by id.
pub fn write_labels<W: Write>(labels: &HashMap<String, String>, writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["id", "class"]).map_err(csv_err)?;
    let sorted: BTreeMap<_, _> = labels.iter().collect();
    for (id, class) in sorted {
        wtr.write_record([id, class]).map_err(csv_err)?;
    }
    wtr.flush().map_err(|e| Error::input(e.to_string()))
}

/// Labels in object order; every object must have one.
pub fn align_labels(ctx: &NumericContext, labels: &HashMap<String, String>) -> Result<Vec<String>> {
    ctx.objects
        .iter()
        .map(|id| {
            labels
                .get(id)
                .cloned()
                .ok_or_else(|| Error::input(format!("no label for `{id}`")))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionConfig {
    pub corr_threshold: f64,
    pub ig_bins: usize,
    /// Keep only the `k` highest-IG attributes before pruning.
    pub ig_top_k: Option<usize>,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        SelectionConfig {
            corr_threshold: 0.95,
            ig_bins: 5,
            ig_top_k: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionReport {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ig_ranking: Option<Vec<RankedAttribute>>,
    pub dropped: Vec<DroppedAttribute>,
    pub retained: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

/// Optional IG ranking with a top-k cut, then correlation pruning.
pub fn select_attributes(
    ctx: &NumericContext,
    labels: Option<&HashMap<String, String>>,
    config: &SelectionConfig,
) -> Result<(NumericContext, SelectionReport)> {
    let mut notes = Vec::new();
    let (ranked_ctx, ig_ranking) = match labels {
        Some(labels) => {
            let aligned = align_labels(ctx, labels)?;
            let ranking = information_gain_rank(ctx, &aligned, config.ig_bins)?;
            let keep = config.ig_top_k.unwrap_or(ranking.len()).min(ranking.len());
            let columns: Vec<usize> = ranking[..keep]
                .iter()
                .map(|r| {
                    ctx.attributes
                        .iter()
                        .position(|a| a == &r.attribute)
                        .expect("ranked attribute exists")
                })
                .collect();
            (ctx.select(&columns), Some(ranking))
        }
        None => {
            notes.push("information gain skipped: no class labels supplied".to_owned());
            (ctx.clone(), None)
        }
    };
    let (pruned, prune) = correlation_prune(&ranked_ctx, config.corr_threshold)?;
    Ok((
        pruned,
        SelectionReport {
            notes,
            ig_ranking,
            dropped: prune.dropped,
            retained: prune.retained,
            warnings: prune.warnings,
        },
    ))
}
