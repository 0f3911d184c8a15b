//! In-memory training/evaluation collections of normalized scalograms.
//!
//! A dataset carries the labels of its source segments so that training code
//! can enforce the clean-only contract: the diffusion models learn the
//! manifold of clean ECG scalograms, and a single mislabeled noisy item
//! silently corrupts that premise. The fingerprint ties checkpoints to the
//! exact data they were trained on.

use sha2::{Digest, Sha256};

use crate::aslt::{aslt_scalogram, to_model_input, AsltConfig, NormalizedScalogram};
use crate::error::{Error, Result};
use crate::signal::{labels_to_string, LabelSet, NoiseLabel, Segment};

/// One scored unit: a normalized scalogram plus the identity of its segment.
#[derive(Debug, Clone)]
pub struct DatasetItem {
    /// Segment id ("{parent}#{start}").
    pub id: String,
    /// Noise labels inherited from the source segment.
    pub labels: LabelSet,
    /// The 32×256 u8 grid the models consume.
    pub grid: NormalizedScalogram,
}

/// An ordered collection of dataset items.
#[derive(Debug, Clone, Default)]
pub struct ScalogramDataset {
    items: Vec<DatasetItem>,
}

impl ScalogramDataset {
    /// Dataset from already-normalized items.
    pub fn new(items: Vec<DatasetItem>) -> Self {
        ScalogramDataset { items }
    }

    /// Transform segments end-to-end: scalogram → log-power grid.
    pub fn from_segments(segments: &[Segment], cfg: &AsltConfig) -> Result<Self> {
        let mut items = Vec::with_capacity(segments.len());
        for seg in segments {
            let record = seg.to_record("dataset")?;
            let sc = aslt_scalogram(&record, cfg)?;
            items.push(DatasetItem {
                id: seg.id(),
                labels: seg.labels.clone(),
                grid: to_model_input(&sc),
            });
        }
        Ok(ScalogramDataset { items })
    }

    /// Error unless every item is labeled clean (and nothing else).
    pub fn require_clean(&self) -> Result<()> {
        let offenders: Vec<&DatasetItem> = self
            .items
            .iter()
            .filter(|it| !(it.labels.len() == 1 && it.labels.contains(&NoiseLabel::Clean)))
            .collect();
        if let Some(first) = offenders.first() {
            return Err(Error::Contract(format!(
                "training data must be clean-only: {} item(s) violate this, first is '{}' labeled '{}'",
                offenders.len(),
                first.id,
                labels_to_string(&first.labels)
            )));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn items(&self) -> &[DatasetItem] {
        &self.items
    }

    /// Retain only the items whose ids appear in `keep` (order preserved).
    pub fn subset(&self, keep: &std::collections::BTreeSet<String>) -> ScalogramDataset {
        ScalogramDataset {
            items: self.items.iter().filter(|it| keep.contains(&it.id)).cloned().collect(),
        }
    }

    /// Content hash over ids, labels, and grid bytes (hex, stable ordering).
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        for it in &self.items {
            h.update(it.id.as_bytes());
            h.update([0u8]);
            h.update(labels_to_string(&it.labels).as_bytes());
            h.update([0u8]);
            h.update(it.grid.levels());
        }
        let digest = h.finalize();
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aslt::{GRID_COLS, GRID_ROWS};

    fn item(id: &str, label: NoiseLabel, fill: u8) -> DatasetItem {
        let mut labels = LabelSet::new();
        labels.insert(label);
        DatasetItem {
            id: id.to_string(),
            labels,
            grid: NormalizedScalogram::from_levels(vec![fill; GRID_ROWS * GRID_COLS]).unwrap(),
        }
    }

    #[test]
    fn clean_only_contract() {
        let ds = ScalogramDataset::new(vec![item("a#0", NoiseLabel::Clean, 1)]);
        ds.require_clean().unwrap();

        let bad = ScalogramDataset::new(vec![
            item("a#0", NoiseLabel::Clean, 1),
            item("b#0", NoiseLabel::Static, 2),
        ]);
        let err = bad.require_clean().unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("b#0") && msg.contains("static"), "got: {msg}");
    }

    #[test]
    fn fingerprint_tracks_content() {
        let a = ScalogramDataset::new(vec![item("a#0", NoiseLabel::Clean, 1)]);
        let b = ScalogramDataset::new(vec![item("a#0", NoiseLabel::Clean, 1)]);
        assert_eq!(a.fingerprint(), b.fingerprint());
        let c = ScalogramDataset::new(vec![item("a#0", NoiseLabel::Clean, 2)]);
        assert_ne!(a.fingerprint(), c.fingerprint());
        let d = ScalogramDataset::new(vec![item("a#1", NoiseLabel::Clean, 1)]);
        assert_ne!(a.fingerprint(), d.fingerprint());
    }

    #[test]
    fn subset_preserves_order() {
        let ds = ScalogramDataset::new(vec![
            item("a#0", NoiseLabel::Clean, 0),
            item("b#0", NoiseLabel::Clean, 1),
            item("c#0", NoiseLabel::Clean, 2),
        ]);
        let keep: std::collections::BTreeSet<String> =
            ["c#0".to_string(), "a#0".to_string()].into();
        let sub = ds.subset(&keep);
        let ids: Vec<&str> = sub.items().iter().map(|it| it.id.as_str()).collect();
        assert_eq!(ids, ["a#0", "c#0"]);
    }

    #[test]
    fn from_segments_produces_grids() {
        let rec = crate::signal::synth_clean(60.0, 128.0, 8.0, 1).unwrap();
        let segs = crate::signal::segment(&rec, "r1", 4.0, 4.0).unwrap();
        assert_eq!(segs.len(), 2);
        let ds = ScalogramDataset::from_segments(&segs, &AsltConfig::default()).unwrap();
        assert_eq!(ds.len(), 2);
        ds.require_clean().unwrap();
        assert_eq!(ds.items()[0].id, "r1#0");
        assert_eq!(ds.items()[0].grid.levels().len(), GRID_ROWS * GRID_COLS);
    }
}
