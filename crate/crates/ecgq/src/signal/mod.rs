//! Signal ingestion, synthesis, corruption, resampling, and segmentation.
//!
//! A [`SignalRecord`] is an immutable, validated 1-D sample stream with a
//! sampling rate and optional noise labels. Records are cut into fixed-length
//! [`Segment`]s (10 s by default) which are the unit of everything
//! downstream: one segment → one scalogram → one score.

mod io;
mod noise;
mod synth;

pub use io::{ingest_record, write_raw_record, IngestFormat, RawSidecar};
pub use noise::{inject_noise, realized_snr_db};
pub use synth::{count_r_peaks, synth_clean};

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Signal condition labels; a record may carry several noise labels at once.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseLabel {
    Clean,
    Static,
    Burst,
    BaselineDrift,
}

impl NoiseLabel {
    pub fn as_str(&self) -> &'static str {
        match self {
            NoiseLabel::Clean => "clean",
            NoiseLabel::Static => "static",
            NoiseLabel::Burst => "burst",
            NoiseLabel::BaselineDrift => "baseline_drift",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "clean" => Ok(NoiseLabel::Clean),
            "static" => Ok(NoiseLabel::Static),
            "burst" => Ok(NoiseLabel::Burst),
            "baseline_drift" => Ok(NoiseLabel::BaselineDrift),
            other => Err(Error::invalid(format!("unknown label '{other}'"))),
        }
    }
}

impl fmt::Display for NoiseLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Ordered label set; `BTreeSet` keeps serialized order deterministic.
pub type LabelSet = BTreeSet<NoiseLabel>;

/// Render a label set as `a+b` (or `clean` alone). Empty sets render as `unlabeled`.
pub fn labels_to_string(labels: &LabelSet) -> String {
    if labels.is_empty() {
        return "unlabeled".to_string();
    }
    labels
        .iter()
        .map(|l| l.as_str())
        .collect::<Vec<_>>()
        .join("+")
}

/// Parse `a+b` back into a label set.
pub fn labels_from_string(s: &str) -> Result<LabelSet> {
    if s == "unlabeled" || s.is_empty() {
        return Ok(LabelSet::new());
    }
    s.split('+').map(NoiseLabel::parse).collect()
}

/// A validated 1-D signal: non-empty, all-finite samples at a positive rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalRecord {
    samples: Vec<f64>,
    fs: f64,
    pub channel: String,
    pub labels: LabelSet,
    /// Seed used to synthesize or corrupt this record, when applicable.
    pub seed: Option<u64>,
}

impl SignalRecord {
    /// Validate and wrap a sample stream.
    pub fn new(samples: Vec<f64>, fs: f64, channel: impl Into<String>) -> Result<Self> {
        if !(fs.is_finite() && fs > 0.0) {
            return Err(Error::invalid(format!("sampling rate must be positive, got {fs}")));
        }
        if samples.is_empty() {
            return Err(Error::invalid("signal must contain at least one sample"));
        }
        if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteSample { index: i });
        }
        Ok(SignalRecord {
            samples,
            fs,
            channel: channel.into(),
            labels: LabelSet::new(),
            seed: None,
        })
    }

    pub fn with_labels(mut self, labels: LabelSet) -> Self {
        self.labels = labels;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn fs(&self) -> f64 {
        self.fs
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        false // invariant: non-empty
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.fs
    }

    pub fn is_clean(&self) -> bool {
        self.labels.len() == 1 && self.labels.contains(&NoiseLabel::Clean)
    }

    /// Mean squared amplitude.
    pub fn power(&self) -> f64 {
        self.samples.iter().map(|v| v * v).sum::<f64>() / self.samples.len() as f64
    }
}

/// A windowed view into a parent record, used as the scoring unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    /// Identifier of the parent record.
    pub parent_id: String,
    /// Start index in the parent's sample stream.
    pub start: usize,
    fs: f64,
    samples: Vec<f64>,
    pub labels: LabelSet,
}

impl Segment {
    pub fn id(&self) -> String {
        format!("{}#{}", self.parent_id, self.start)
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn fs(&self) -> f64 {
        self.fs
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.fs
    }

    /// Start time of the segment within the parent, in seconds.
    pub fn start_s(&self) -> f64 {
        self.start as f64 / self.fs
    }

    /// View the segment as a standalone record (labels carried over).
    pub fn to_record(&self, channel: &str) -> Result<SignalRecord> {
        Ok(SignalRecord::new(self.samples.clone(), self.fs, channel)?
            .with_labels(self.labels.clone()))
    }
}

/// Cut a record into windows of `window_s` seconds every `hop_s` seconds.
///
/// Windows are non-overlapping at the default `hop_s = window_s`. A trailing
/// remainder shorter than one window is dropped (padding would distort the
/// scalogram statistics of the final segment). A record shorter than one
/// window yields an empty sequence.
pub fn segment(record: &SignalRecord, parent_id: &str, window_s: f64, hop_s: f64) -> Result<Vec<Segment>> {
    if !(window_s.is_finite() && window_s > 0.0) || !(hop_s.is_finite() && hop_s > 0.0) {
        return Err(Error::invalid("window and hop must be positive"));
    }
    let win = (window_s * record.fs).round() as usize;
    let hop = (hop_s * record.fs).round() as usize;
    if win < 1 || hop < 1 {
        return Err(Error::invalid("window and hop must span at least one sample"));
    }
    let mut out = Vec::new();
    let mut start = 0usize;
    while start + win <= record.len() {
        out.push(Segment {
            parent_id: parent_id.to_string(),
            start,
            fs: record.fs,
            samples: record.samples[start..start + win].to_vec(),
            labels: record.labels.clone(),
        });
        start += hop;
    }
    Ok(out)
}

/// Kinds of injectable noise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    /// Full-support white Gaussian noise plus a 50 Hz powerline component.
    Static,
    /// White Gaussian noise confined to a time window.
    Burst,
    /// A slow sinusoidal wander below the analysis band.
    BaselineDrift,
}

impl NoiseKind {
    pub fn label(&self) -> NoiseLabel {
        match self {
            NoiseKind::Static => NoiseLabel::Static,
            NoiseKind::Burst => NoiseLabel::Burst,
            NoiseKind::BaselineDrift => NoiseLabel::BaselineDrift,
        }
    }
}

/// Recipe for corrupting a clean record at a target SNR.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    /// Target signal-to-noise ratio in dB over the affected support.
    pub snr_db: f64,
    /// `(start_s, len_s)` window; required for burst noise.
    pub burst_window: Option<(f64, f64)>,
    /// Drift frequency in Hz; required for baseline drift, must be < 0.5.
    pub drift_hz: Option<f64>,
}

impl NoiseSpec {
    pub fn static_noise(snr_db: f64) -> Self {
        NoiseSpec { kind: NoiseKind::Static, snr_db, burst_window: None, drift_hz: None }
    }

    pub fn burst(snr_db: f64, start_s: f64, len_s: f64) -> Self {
        NoiseSpec {
            kind: NoiseKind::Burst,
            snr_db,
            burst_window: Some((start_s, len_s)),
            drift_hz: None,
        }
    }

    pub fn baseline_drift(snr_db: f64, drift_hz: f64) -> Self {
        NoiseSpec {
            kind: NoiseKind::BaselineDrift,
            snr_db,
            burst_window: None,
            drift_hz: Some(drift_hz),
        }
    }

    /// Check internal consistency (window/frequency presence and ranges).
    pub fn validate(&self) -> Result<()> {
        if !self.snr_db.is_finite() {
            return Err(Error::invalid("snr_db must be finite"));
        }
        match self.kind {
            NoiseKind::Burst => {
                let (start, len) = self
                    .burst_window
                    .ok_or_else(|| Error::invalid("burst noise requires a burst_window"))?;
                if !(start.is_finite() && len.is_finite() && start >= 0.0 && len > 0.0) {
                    return Err(Error::invalid(format!(
                        "burst window must satisfy start ≥ 0 and len > 0, got ({start}, {len})"
                    )));
                }
            }
            NoiseKind::BaselineDrift => {
                let f = self
                    .drift_hz
                    .ok_or_else(|| Error::invalid("baseline drift requires drift_hz"))?;
                if !(f.is_finite() && f > 0.0 && f < 0.5) {
                    return Err(Error::invalid(format!(
                        "drift frequency must lie in (0, 0.5) Hz, got {f}"
                    )));
                }
            }
            NoiseKind::Static => {}
        }
        Ok(())
    }
}

/// Resample by linear interpolation. Output length is `round(len·target/fs)`.
pub fn resample(record: &SignalRecord, target_fs: f64) -> Result<SignalRecord> {
    if !(target_fs.is_finite() && target_fs > 0.0) {
        return Err(Error::invalid(format!("target_fs must be positive, got {target_fs}")));
    }
    let src = record.samples();
    let n = src.len();
    let out_len = ((n as f64) * target_fs / record.fs).round().max(1.0) as usize;
    let mut out = Vec::with_capacity(out_len);
    let step = record.fs / target_fs;
    for j in 0..out_len {
        let pos = j as f64 * step;
        let i = pos.floor() as usize;
        if i + 1 >= n {
            out.push(src[n - 1]);
        } else {
            let frac = pos - i as f64;
            out.push(src[i] + (src[i + 1] - src[i]) * frac);
        }
    }
    let mut r = SignalRecord::new(out, target_fs, record.channel.clone())?
        .with_labels(record.labels.clone());
    r.seed = record.seed;
    Ok(r)
}
