//! Recordings, spindle annotations and segment extraction.
//!
//! # Recording CSV
//!
//! Header `time,<ch1>,<ch2>,…`, one row per sample, amplitudes in µV. The
//! `time` column (seconds) is optional when the sample rate is supplied
//! explicitly; otherwise the rate is inferred from the first and last time
//! stamps and rounded to 1 µHz.
//!
//! # Annotations JSON
//!
//! An array of `{"id", "start_s", "end_s", "channel"}` objects.

pub mod features;

use std::collections::HashSet;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fca::csv_err;

pub use features::{
    bandpower, dominant_frequency, feature_row, max_amplitude, mean_amplitude, mean_frequency, standard_bands, Band,
    FeatureConfig, FeatureRow, MeanFrequency, Periodogram, SPINDLE_BAND,
};

/// Guards `floor(t · fs)` against products like `0.29 · 200 = 57.999…`.
const INDEX_EPS: f64 = 1e-9;

/// Multichannel recording with a common sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct Recording {
    sample_rate: f64,
    channels: Vec<String>,
    samples: Vec<Vec<f64>>,
}

impl Recording {
    pub fn new(sample_rate: f64, channels: Vec<String>, samples: Vec<Vec<f64>>) -> Result<Self> {
        if !(sample_rate.is_finite() && sample_rate > 0.0) {
            return Err(Error::input(format!("sample rate {sample_rate} must be positive")));
        }
        if channels.len() != samples.len() {
            return Err(Error::input(format!(
                "{} channel names for {} sample series",
                channels.len(),
                samples.len()
            )));
        }
        let mut seen = HashSet::new();
        if let Some(dup) = channels.iter().find(|c| !seen.insert(c.as_str())) {
            return Err(Error::input(format!("duplicate channel `{dup}`")));
        }
        if let Some(first) = samples.first() {
            if let Some((i, s)) = samples.iter().enumerate().find(|(_, s)| s.len() != first.len()) {
                return Err(Error::input(format!(
                    "channel `{}` has {} samples, `{}` has {}",
                    channels[i],
                    s.len(),
                    channels[0],
                    first.len()
                )));
            }
        }
        Ok(Recording {
            sample_rate,
            channels,
            samples,
        })
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn channels(&self) -> &[String] {
        &self.channels
    }

    pub fn len(&self) -> usize {
        self.samples.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn duration_s(&self) -> f64 {
        self.len() as f64 / self.sample_rate
    }

    pub fn channel(&self, name: &str) -> Option<&[f64]> {
        self.channels
            .iter()
            .position(|c| c == name)
            .map(|i| self.samples[i].as_slice())
    }

    pub fn read_csv(path: impl AsRef<Path>, sample_rate: Option<f64>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv(file, sample_rate)
    }

    pub fn from_csv<R: Read>(reader: R, sample_rate: Option<f64>) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let header = rdr.headers().map_err(csv_err)?.clone();
        let has_time = header.get(0).is_some_and(|h| h.eq_ignore_ascii_case("time"));
        let skip = usize::from(has_time);
        let channels: Vec<String> = header.iter().skip(skip).map(str::to_owned).collect();
        if channels.is_empty() {
            return Err(Error::input("recording has no channels"));
        }

        let mut times = Vec::new();
        let mut samples = vec![Vec::new(); channels.len()];
        for (line, record) in rdr.records().enumerate() {
            let record = record.map_err(csv_err)?;
            let number =
                |i: usize| -> Result<f64> {
                    record[i].parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| {
                        Error::input(format!("row {}: `{}` is not a finite number", line + 2, &record[i]))
                    })
                };
            if has_time {
                times.push(number(0)?);
            }
            for (c, series) in samples.iter_mut().enumerate() {
                series.push(number(c + skip)?);
            }
        }

        let rate = match (sample_rate, has_time) {
            (Some(fs), _) => fs,
            (None, true) => infer_rate(&times)?,
            (None, false) => {
                return Err(Error::input(
                    "recording has no time column; supply the sample rate explicitly",
                ))
            }
        };
        Self::new(rate, channels, samples)
    }

    /// Writes the recording with a leading `time` column.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        let header = std::iter::once("time").chain(self.channels.iter().map(String::as_str));
        wtr.write_record(header).map_err(csv_err)?;
        for i in 0..self.len() {
            let mut row = vec![format!("{:?}", i as f64 / self.sample_rate)];
            row.extend(self.samples.iter().map(|s| format!("{:?}", s[i])));
            wtr.write_record(&row).map_err(csv_err)?;
        }
        wtr.flush().map_err(|e| Error::input(e.to_string()))
    }
}

fn infer_rate(times: &[f64]) -> Result<f64> {
    if times.len() < 2 {
        return Err(Error::input("need at least two time stamps to infer the sample rate"));
    }
    let span = times[times.len() - 1] - times[0];
    if span.is_nan() || span <= 0.0 {
        return Err(Error::input("time column is not increasing"));
    }
    let rate = (times.len() - 1) as f64 / span;
    Ok((rate * 1e6).round() / 1e6)
}

/// Timing of one annotated spindle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpindleAnnotation {
    pub id: String,
    pub start_s: f64,
    pub end_s: f64,
    pub channel: String,
}

pub fn read_annotations(path: impl AsRef<Path>) -> Result<Vec<SpindleAnnotation>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_annotations(&text)
}

pub fn parse_annotations(text: &str) -> Result<Vec<SpindleAnnotation>> {
    serde_json::from_str(text).map_err(|e| Error::input(format!("annotations: {e}")))
}

/// Samples of one annotated channel between the annotation bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub id: String,
    pub channel: String,
    pub sample_rate: f64,
    pub samples: Vec<f64>,
}

fn sample_index(t: f64, fs: f64) -> usize {
    (t * fs + INDEX_EPS).floor() as usize
}

fn cut(rec: &Recording, ann: &SpindleAnnotation, channel: &str) -> Result<Segment> {
    let reject = |why: String| Error::input(format!("annotation `{}`: {why}", ann.id));
    if !(ann.start_s.is_finite() && ann.end_s.is_finite()) || ann.start_s < 0.0 || ann.start_s >= ann.end_s {
        return Err(reject(format!("invalid span [{}, {}]", ann.start_s, ann.end_s)));
    }
    if ann.end_s > rec.duration_s() + INDEX_EPS {
        return Err(reject(format!(
            "ends at {} s, beyond the recording ({} s)",
            ann.end_s,
            rec.duration_s()
        )));
    }
    let series = rec
        .channel(channel)
        .ok_or_else(|| reject(format!("unknown channel `{channel}`")))?;
    let fs = rec.sample_rate();
    let start = sample_index(ann.start_s, fs);
    let end = sample_index(ann.end_s, fs).min(series.len());
    if start >= end {
        return Err(reject("covers no samples".into()));
    }
    Ok(Segment {
        id: ann.id.clone(),
        channel: channel.to_owned(),
        sample_rate: fs,
        samples: series[start..end].to_vec(),
    })
}

/// Cuts each annotation out of its channel: samples
/// `[floor(start·fs), floor(end·fs))`.
pub fn extract_segments(rec: &Recording, annotations: &[SpindleAnnotation]) -> Result<Vec<Segment>> {
    let mut seen = HashSet::new();
    annotations
        .iter()
        .map(|ann| {
            if !seen.insert(ann.id.as_str()) {
                return Err(Error::input(format!("duplicate annotation id `{}`", ann.id)));
            }
            cut(rec, ann, &ann.channel)
        })
        .collect()
}

/// Like [`extract_segments`] but cuts the annotated time span out of every
/// channel. The annotated channel must still exist.
pub fn extract_segments_all_channels(rec: &Recording, annotations: &[SpindleAnnotation]) -> Result<Vec<Vec<Segment>>> {
    // validates ids, bounds and the annotated channel
    extract_segments(rec, annotations)?;
    annotations
        .iter()
        .map(|ann| rec.channels().iter().map(|ch| cut(rec, ann, ch)).collect())
        .collect()
}
