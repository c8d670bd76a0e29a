//! End-to-end orchestration: segments → features → context → patterns.
//!
//! Each stage is exposed on its own so the CLI can run them separately on
//! intermediate files. Errors are tagged with the stage that raised them,
//! and nothing is written to disk until the whole run has succeeded.

use std::collections::{BTreeMap, HashMap};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::bitset::BitSet;
use crate::context::{
    build_numeric_context, build_numeric_context_multichannel, read_labels, select_attributes, unit_of, NumericContext,
    SelectionConfig, SelectionReport,
};
use crate::error::{Error, Result};
use crate::fca::{csv_err, FormalContext};
use crate::lattice::{BuildOptions, GaloisConnection, Lattice, DEFAULT_CONCEPT_CAP};
use crate::pattern::{Interval, IntervalPatternStructure, PatternIntent};
use crate::signal::{
    extract_segments, extract_segments_all_channels, feature_row, read_annotations, standard_bands, Band,
    FeatureConfig, Recording, Segment, SpindleAnnotation, SPINDLE_BAND,
};
use crate::stability::{
    filter_concepts, lstab_bounds_all, score_records, stability_bruteforce_all, stability_lattice_dp, support,
    BoundPolicy, StabilityMethod, StabilityScore, DEFAULT_BRUTE_FORCE_CAP,
};

/// File names inside the output directory.
pub const REPORT_JSON: &str = "report.json";
pub const REPORT_CSV: &str = "patterns.csv";
pub const SCORES_JSON: &str = "scores.json";
pub const CONTEXT_CSV: &str = "context.csv";
pub const LATTICE_DOT: &str = "lattice.dot";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub recording: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub annotations: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub labels: Option<PathBuf>,
    /// Overrides the rate inferred from the recording's time column.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sample_rate: Option<f64>,
    /// Cut every channel, not just the annotated one.
    pub all_channels: bool,
    pub dominant_band: Band,
    pub bands: Vec<Band>,
    pub detrend: bool,
    pub corr_threshold: f64,
    pub ig_bins: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ig_top_k: Option<usize>,
    pub min_support: f64,
    pub min_lstab: f64,
    pub bound_policy: BoundPolicy,
    pub stability: StabilityMethod,
    pub concept_cap: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    pub dot: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            recording: None,
            annotations: None,
            labels: None,
            sample_rate: None,
            all_channels: false,
            dominant_band: SPINDLE_BAND,
            bands: standard_bands(),
            detrend: false,
            corr_threshold: 0.95,
            ig_bins: 5,
            ig_top_k: None,
            min_support: 0.1,
            min_lstab: 1.0,
            bound_policy: BoundPolicy::Upper,
            stability: StabilityMethod::Bounds,
            concept_cap: DEFAULT_CONCEPT_CAP,
            output_dir: None,
            dot: false,
        }
    }
}

impl PipelineConfig {
    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::input(format!("{}: {e}", path.display())))
    }

    pub fn features(&self) -> FeatureConfig {
        FeatureConfig {
            dominant_band: self.dominant_band,
            bands: self.bands.clone(),
            detrend: self.detrend,
        }
    }

    pub fn selection(&self) -> SelectionConfig {
        SelectionConfig {
            corr_threshold: self.corr_threshold,
            ig_bins: self.ig_bins,
            ig_top_k: self.ig_top_k,
        }
    }

    pub fn mining(&self) -> MiningConfig {
        MiningConfig {
            min_support: self.min_support,
            min_lstab: self.min_lstab,
            bound_policy: self.bound_policy,
            stability: self.stability,
            concept_cap: self.concept_cap,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(fs) = self.sample_rate {
            if !(fs.is_finite() && fs > 0.0) {
                return Err(Error::input(format!("sample rate {fs} must be positive")));
            }
        }
        self.features().validate()?;
        if !(self.corr_threshold > 0.0 && self.corr_threshold <= 1.0) {
            return Err(Error::input(format!(
                "correlation threshold {} outside (0, 1]",
                self.corr_threshold
            )));
        }
        if self.ig_bins < 2 {
            return Err(Error::input("ig_bins must be at least 2"));
        }
        if self.ig_top_k == Some(0) {
            return Err(Error::input("ig_top_k must be at least 1"));
        }
        self.mining().validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MiningConfig {
    pub min_support: f64,
    pub min_lstab: f64,
    pub bound_policy: BoundPolicy,
    pub stability: StabilityMethod,
    pub concept_cap: usize,
}

impl MiningConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.min_support) {
            return Err(Error::input(format!("min_support {} outside [0, 1]", self.min_support)));
        }
        if self.min_lstab.is_nan() || self.min_lstab < 0.0 {
            return Err(Error::input(format!(
                "min_lstab {} must be non-negative",
                self.min_lstab
            )));
        }
        if self.concept_cap == 0 {
            return Err(Error::input("concept cap must be at least 1"));
        }
        Ok(())
    }
}

/// A lattice with a score per concept and the indices that passed both
/// filters.
#[derive(Debug, Clone)]
pub struct Mined<I> {
    pub lattice: Lattice<I>,
    pub scores: Vec<StabilityScore>,
    pub selected: Vec<usize>,
}

/// Builds the lattice, scores it and filters it. `attribute_count` is the
/// `|M|` used by the lower bound.
pub fn mine<C: GaloisConnection>(conn: &C, attribute_count: usize, config: &MiningConfig) -> Result<Mined<C::Intent>> {
    config.validate().map_err(|e| e.in_stage("mine"))?;
    let lattice = Lattice::build(
        conn,
        BuildOptions {
            concept_cap: config.concept_cap,
            parallel: true,
        },
    )
    .map_err(|e| e.in_stage("mine"))?;
    let scores = match config.stability {
        StabilityMethod::BruteForce => stability_bruteforce_all(conn, &lattice, DEFAULT_BRUTE_FORCE_CAP),
        StabilityMethod::LatticeDp => Ok(stability_lattice_dp(&lattice)),
        StabilityMethod::Bounds => lstab_bounds_all(&lattice, attribute_count),
    }
    .map_err(|e| e.in_stage("stability"))?;
    let selected = filter_concepts(
        &lattice,
        &scores,
        config.min_support,
        config.min_lstab,
        config.bound_policy,
    )
    .map_err(|e| e.in_stage("filter"))?;
    Ok(Mined {
        lattice,
        scores,
        selected,
    })
}

/// Cuts the annotated segments, flattened in annotation order (and channel
/// order within an annotation when `all_channels` is set).
pub fn extract(rec: &Recording, annotations: &[SpindleAnnotation], all_channels: bool) -> Result<Vec<Segment>> {
    if annotations.is_empty() {
        return Err(Error::input("no segments: the annotation list is empty").in_stage("extract"));
    }
    let segments = if all_channels {
        extract_segments_all_channels(rec, annotations).map(|v| v.into_iter().flatten().collect())
    } else {
        extract_segments(rec, annotations)
    };
    segments.map_err(|e| e.in_stage("extract"))
}

/// One object per segment id. Ids that appear with several channels yield
/// channel-prefixed attributes; all ids must then list the same channels.
pub fn features(segments: &[Segment], config: &FeatureConfig) -> Result<NumericContext> {
    let run = || -> Result<NumericContext> {
        if segments.is_empty() {
            return Err(Error::input("no segments"));
        }
        config.validate()?;
        let mut grouped: Vec<(String, Vec<(String, _)>)> = Vec::new();
        let mut position: HashMap<&str, usize> = HashMap::new();
        for seg in segments {
            let row = feature_row(&seg.samples, seg.sample_rate, config)
                .map_err(|e| Error::input(format!("segment `{}` on `{}`: {e}", seg.id, seg.channel)))?;
            let slot = *position.entry(seg.id.as_str()).or_insert_with(|| {
                grouped.push((seg.id.clone(), Vec::new()));
                grouped.len() - 1
            });
            grouped[slot].1.push((seg.channel.clone(), row));
        }
        if grouped.iter().all(|(_, rows)| rows.len() == 1) {
            let rows: Vec<_> = grouped
                .into_iter()
                .map(|(id, mut rows)| (id, rows.remove(0).1))
                .collect();
            build_numeric_context(&rows, config)
        } else {
            build_numeric_context_multichannel(&grouped, config)
        }
    };
    run().map_err(|e| e.in_stage("features"))
}

/// Attribute selection on a numeric context.
pub fn select(
    ctx: &NumericContext,
    labels: Option<&HashMap<String, String>>,
    config: &SelectionConfig,
) -> Result<(NumericContext, SelectionReport)> {
    select_attributes(ctx, labels, config).map_err(|e| e.in_stage("select"))
}

/// Pattern intent as reported: per-attribute intervals, a binary attribute
/// set, or the empty-extent bottom.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportIntent {
    Intervals(Vec<AttributeInterval>),
    Attributes(Vec<String>),
    Bottom,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeInterval {
    pub attribute: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub unit: Option<String>,
    pub interval: Interval,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternEntry {
    pub extent: Vec<String>,
    pub intent: ReportIntent,
    pub support: f64,
    pub extent_size: usize,
    pub score: StabilityScore,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StageCounts {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub annotations: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub segments: Option<usize>,
    pub objects: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub attributes_extracted: Option<usize>,
    pub attributes_selected: usize,
    pub concepts: usize,
    pub patterns: usize,
}

/// Run metadata that differs between otherwise identical runs.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunInfo {
    pub timestamp_unix_s: u64,
    pub timings_ms: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternReport {
    pub config: PipelineConfig,
    pub counts: StageCounts,
    /// Attributes the intents range over.
    pub attributes: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub selection: Option<SelectionReport>,
    pub patterns: Vec<PatternEntry>,
    pub run: RunInfo,
}

fn extent_ids(objects: &[String], extent: &BitSet) -> Vec<String> {
    extent.iter().map(|g| objects[g].clone()).collect()
}

fn entries<I>(mined: &Mined<I>, objects: &[String], intent: impl Fn(&I) -> ReportIntent) -> Vec<PatternEntry> {
    mined
        .selected
        .iter()
        .map(|&i| {
            let c = &mined.lattice.concepts()[i];
            PatternEntry {
                extent: extent_ids(objects, &c.extent),
                intent: intent(&c.intent),
                support: support(&mined.lattice, i),
                extent_size: c.extent.len(),
                score: mined.scores[i].clone(),
            }
        })
        .collect()
}

pub fn pattern_entries(ps: &IntervalPatternStructure, mined: &Mined<PatternIntent>) -> Vec<PatternEntry> {
    entries(mined, ps.objects(), |intent| match intent {
        PatternIntent::Bottom => ReportIntent::Bottom,
        PatternIntent::Hull(d) => ReportIntent::Intervals(
            ps.attributes()
                .iter()
                .zip(d.intervals())
                .map(|(a, &interval)| AttributeInterval {
                    attribute: a.clone(),
                    unit: unit_of(a).map(str::to_owned),
                    interval,
                })
                .collect(),
        ),
    })
}

pub fn binary_entries(ctx: &FormalContext, mined: &Mined<BitSet>) -> Vec<PatternEntry> {
    entries(mined, ctx.objects(), |intent| {
        ReportIntent::Attributes(intent.iter().map(|m| ctx.attributes()[m].clone()).collect())
    })
}

/// Everything a run produced; `report` is what gets serialized.
#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub report: PatternReport,
    /// Selected context the lattice was built on.
    pub context: NumericContext,
    pub mined: Mined<PatternIntent>,
}

pub struct PipelineInputs {
    pub recording: Recording,
    pub annotations: Vec<SpindleAnnotation>,
    pub labels: Option<HashMap<String, String>>,
}

fn now_unix_s() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

/// Config as echoed in reports: the output location is not part of it, so
/// two runs writing to different directories report identically.
fn echo(config: &PipelineConfig) -> PipelineConfig {
    PipelineConfig {
        output_dir: None,
        ..config.clone()
    }
}

struct Timer(BTreeMap<String, f64>, Instant);

impl Timer {
    fn new() -> Self {
        Timer(BTreeMap::new(), Instant::now())
    }

    fn lap(&mut self, stage: &str) {
        self.0.insert(stage.to_owned(), self.1.elapsed().as_secs_f64() * 1e3);
        self.1 = Instant::now();
    }
}

pub fn load_inputs(config: &PipelineConfig) -> Result<PipelineInputs> {
    let load = || -> Result<PipelineInputs> {
        let recording = config
            .recording
            .as_ref()
            .ok_or_else(|| Error::input("no recording given"))?;
        let annotations = config
            .annotations
            .as_ref()
            .ok_or_else(|| Error::input("no annotations given"))?;
        Ok(PipelineInputs {
            recording: Recording::read_csv(recording, config.sample_rate)?,
            annotations: read_annotations(annotations)?,
            labels: config.labels.as_ref().map(read_labels).transpose()?,
        })
    };
    load().map_err(|e| e.in_stage("load"))
}

/// Runs every stage on in-memory inputs.
pub fn run(inputs: &PipelineInputs, config: &PipelineConfig) -> Result<PipelineOutput> {
    config.validate().map_err(|e| e.in_stage("config"))?;
    let mut timer = Timer::new();

    let segments = extract(&inputs.recording, &inputs.annotations, config.all_channels)?;
    timer.lap("extract");
    let full = features(&segments, &config.features())?;
    timer.lap("features");
    let (context, selection) = select(&full, inputs.labels.as_ref(), &config.selection())?;
    timer.lap("select");
    let ps = context.to_pattern_structure().map_err(|e| e.in_stage("context"))?;
    let mined = mine(&ps, ps.boundary_attribute_count(), &config.mining())?;
    timer.lap("mine");

    let patterns = pattern_entries(&ps, &mined);
    let report = PatternReport {
        config: echo(config),
        counts: StageCounts {
            annotations: Some(inputs.annotations.len()),
            segments: Some(segments.len()),
            objects: context.objects().len(),
            attributes_extracted: Some(full.attributes().len()),
            attributes_selected: context.attributes().len(),
            concepts: mined.lattice.len(),
            patterns: patterns.len(),
        },
        attributes: context.attributes().to_vec(),
        selection: Some(selection),
        patterns,
        run: RunInfo {
            timestamp_unix_s: now_unix_s(),
            timings_ms: timer.0,
        },
    };
    Ok(PipelineOutput { report, context, mined })
}

/// Loads the configured files and runs every stage.
pub fn run_pipeline(config: &PipelineConfig) -> Result<PipelineOutput> {
    config.validate().map_err(|e| e.in_stage("config"))?;
    run(&load_inputs(config)?, config)
}

/// Mines an already selected numeric context.
pub fn mine_numeric(ctx: &NumericContext, config: &PipelineConfig) -> Result<(PatternReport, Mined<PatternIntent>)> {
    let mut timer = Timer::new();
    let ps = ctx.to_pattern_structure().map_err(|e| e.in_stage("context"))?;
    let mined = mine(&ps, ps.boundary_attribute_count(), &config.mining())?;
    timer.lap("mine");
    let patterns = pattern_entries(&ps, &mined);
    Ok((
        mining_report(
            config,
            ctx.objects().len(),
            ctx.attributes(),
            mined.lattice.len(),
            patterns,
            timer,
        ),
        mined,
    ))
}

/// Mines a binary formal context.
pub fn mine_binary(ctx: &FormalContext, config: &PipelineConfig) -> Result<(PatternReport, Mined<BitSet>)> {
    let mut timer = Timer::new();
    let mined = mine(ctx, ctx.attributes().len(), &config.mining())?;
    timer.lap("mine");
    let patterns = binary_entries(ctx, &mined);
    Ok((
        mining_report(
            config,
            ctx.objects().len(),
            ctx.attributes(),
            mined.lattice.len(),
            patterns,
            timer,
        ),
        mined,
    ))
}

fn mining_report(
    config: &PipelineConfig,
    objects: usize,
    attributes: &[String],
    concepts: usize,
    patterns: Vec<PatternEntry>,
    timer: Timer,
) -> PatternReport {
    PatternReport {
        config: echo(config),
        counts: StageCounts {
            objects,
            attributes_selected: attributes.len(),
            concepts,
            patterns: patterns.len(),
            ..StageCounts::default()
        },
        attributes: attributes.to_vec(),
        selection: None,
        patterns,
        run: RunInfo {
            timestamp_unix_s: now_unix_s(),
            timings_ms: timer.0,
        },
    }
}

pub fn report_json(report: &PatternReport) -> Result<String> {
    serde_json::to_string_pretty(report).map_err(|e| Error::input(format!("report serialization: {e}")))
}

/// One row per pattern: scores, extent, then one column per attribute
/// holding the interval (`lo..hi`) or `1` for a binary attribute in the
/// intent.
pub fn report_csv(report: &PatternReport) -> Result<String> {
    let mut wtr = csv::Writer::from_writer(Vec::new());
    let fixed = [
        "extent_size",
        "support",
        "method",
        "stab",
        "lstab",
        "lower",
        "mid",
        "upper",
        "extent",
    ];
    wtr.write_record(
        fixed
            .iter()
            .copied()
            .chain(report.attributes.iter().map(String::as_str)),
    )
    .map_err(csv_err)?;
    let opt = |v: Option<f64>| v.map(|x| format!("{x:?}")).unwrap_or_default();
    for p in &report.patterns {
        let s = &p.score;
        let mut row = vec![
            p.extent_size.to_string(),
            format!("{:?}", p.support),
            serde_json::to_value(s.method)
                .ok()
                .and_then(|v| v.as_str().map(str::to_owned))
                .unwrap_or_default(),
            opt(s.stab),
            s.lstab.map(|l| l.to_string()).unwrap_or_default(),
            opt(s.bounds.map(|b| b.lower)),
            opt(s.bounds.map(|b| b.mid)),
            opt(s.bounds.map(|b| b.upper)),
            p.extent.join(";"),
        ];
        row.extend(report.attributes.iter().enumerate().map(|(j, a)| match &p.intent {
            ReportIntent::Intervals(iv) => iv[j].interval.to_string(),
            ReportIntent::Attributes(names) => {
                if names.contains(a) {
                    "1".into()
                } else {
                    String::new()
                }
            }
            ReportIntent::Bottom => String::new(),
        }));
        wtr.write_record(&row).map_err(csv_err)?;
    }
    let bytes = wtr.into_inner().map_err(|e| Error::input(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Writes all files or none: everything is rendered first, then each file
/// is written to a temporary name and renamed into place.
pub fn write_files(dir: &Path, files: &[(&str, String)]) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut staged = Vec::new();
    for (name, content) in files {
        let tmp = dir.join(format!(".{name}.tmp"));
        let written = std::fs::File::create(&tmp).and_then(|mut f| f.write_all(content.as_bytes()));
        if let Err(e) = written {
            for (t, _) in &staged {
                let _ = std::fs::remove_file(t);
            }
            let _ = std::fs::remove_file(&tmp);
            return Err(Error::io(tmp, e));
        }
        staged.push((tmp, dir.join(name)));
    }
    staged
        .into_iter()
        .map(|(tmp, dest)| {
            std::fs::rename(&tmp, &dest).map_err(|e| Error::io(&dest, e))?;
            Ok(dest)
        })
        .collect()
}

/// Report JSON, CSV summary, per-concept scores and optionally the cover
/// diagram of the lattice in DOT.
pub fn export_report<I>(report: &PatternReport, mined: &Mined<I>, dir: &Path, dot: bool) -> Result<Vec<PathBuf>> {
    let render = || -> Result<Vec<(&'static str, String)>> {
        let records = score_records(&mined.lattice, &mined.scores);
        let mut files = vec![
            (REPORT_JSON, report_json(report)?),
            (REPORT_CSV, report_csv(report)?),
            (
                SCORES_JSON,
                serde_json::to_string_pretty(&records).map_err(|e| Error::input(e.to_string()))?,
            ),
        ];
        if dot {
            let selected: std::collections::HashSet<usize> = mined.selected.iter().copied().collect();
            let n = mined.lattice.object_count().max(1) as f64;
            files.push((
                LATTICE_DOT,
                mined.lattice.to_dot(|i, c| {
                    let mark = if selected.contains(&i) { " *" } else { "" };
                    format!("#{i} |A|={} s={:.3}{mark}", c.extent.len(), c.extent.len() as f64 / n)
                }),
            ));
        }
        Ok(files)
    };
    let files = render().map_err(|e| e.in_stage("export"))?;
    write_files(dir, &files).map_err(|e| e.in_stage("export"))
}

/// Pipeline outputs: the export files plus the selected context.
pub fn export_pipeline(output: &PipelineOutput, dir: &Path, dot: bool) -> Result<Vec<PathBuf>> {
    let mut ctx = Vec::new();
    output.context.write_csv(&mut ctx).map_err(|e| e.in_stage("export"))?;
    let mut paths = export_report(&output.report, &output.mined, dir, dot)?;
    paths.extend(
        write_files(
            dir,
            &[(CONTEXT_CSV, String::from_utf8(ctx).expect("csv output is utf-8"))],
        )
        .map_err(|e| e.in_stage("export"))?,
    );
    Ok(paths)
}

/// Report JSON with the `run` section removed, for comparing runs.
pub fn deterministic_json(report: &PatternReport) -> Result<String> {
    let mut value = serde_json::to_value(report).map_err(|e| Error::input(e.to_string()))?;
    if let Some(obj) = value.as_object_mut() {
        obj.remove("run");
    }
    serde_json::to_string_pretty(&value).map_err(|e| Error::input(e.to_string()))
}
