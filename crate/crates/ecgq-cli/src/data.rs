//! Shared plumbing: corpus listing, dataset assembly, checkpoint loading,
//! and score-table parsing.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};

use ecgq::aslt::AsltConfig;
use ecgq::dataset::ScalogramDataset;
use ecgq::diffusion::{NoiseSchedule, Sampler, Space};
use ecgq::nn::autoencoder::LATENT_CHANNELS;
use ecgq::nn::checkpoint::{fill_model, load_raw};
use ecgq::nn::{AutoencoderDet, ModelKind, UNetLite};
use ecgq::quality::{ModelSet, ScoreRow};
use ecgq::signal::{
    ingest_record, labels_from_string, segment, IngestFormat, NoiseLabel, Segment, SignalRecord,
};

/// One stored recording: its name stem and the validated record.
pub struct NamedRecord {
    pub name: String,
    pub record: SignalRecord,
}

/// Load every `<name>.f32le` record in a directory, sorted by name.
pub fn load_corpus(dir: &Path) -> Result<Vec<NamedRecord>> {
    if !dir.is_dir() {
        bail!("{} is not an existing directory", dir.display());
    }
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("listing {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "f32le"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        bail!("{} contains no .f32le records", dir.display());
    }
    paths
        .into_iter()
        .map(|p| {
            let name = p
                .file_stem()
                .and_then(|s| s.to_str())
                .map(str::to_string)
                .unwrap_or_else(|| p.display().to_string());
            let record = ingest_record(&p, IngestFormat::RawF32le)
                .with_context(|| format!("ingesting {}", p.display()))?;
            Ok(NamedRecord { name, record })
        })
        .collect()
}

/// Cut every record into fixed windows; the file stem names the parent.
pub fn segment_corpus(corpus: &[NamedRecord], window_s: f64) -> Result<Vec<Segment>> {
    let mut segments = Vec::new();
    for nr in corpus {
        let mut segs = segment(&nr.record, &nr.name, window_s, window_s)
            .with_context(|| format!("segmenting {}", nr.name))?;
        if segs.is_empty() {
            log::warn!("{} is shorter than one {window_s:.1}-s window; skipped", nr.name);
        }
        segments.append(&mut segs);
    }
    if segments.is_empty() {
        bail!("corpus yielded no {window_s:.1}-s segments");
    }
    Ok(segments)
}

/// Split segments into the clean population and one population per noise label.
///
/// Records carrying several noise labels at once have no single population to
/// join, so they are rejected rather than double-counted.
pub fn split_by_label(
    segments: Vec<Segment>,
) -> Result<(Vec<Segment>, BTreeMap<NoiseLabel, Vec<Segment>>)> {
    let mut clean = Vec::new();
    let mut noisy: BTreeMap<NoiseLabel, Vec<Segment>> = BTreeMap::new();
    for seg in segments {
        let labels = seg.labels.clone();
        if labels.is_empty() || labels.contains(&NoiseLabel::Clean) && labels.len() == 1 {
            clean.push(seg);
        } else if labels.len() == 1 {
            let label = *labels.iter().next().expect("len checked");
            noisy.entry(label).or_default().push(seg);
        } else {
            bail!(
                "segment {} carries multiple noise labels ({:?}); sweep populations must be single-label",
                seg.id(),
                labels
            );
        }
    }
    Ok((clean, noisy))
}

/// Build a scalogram dataset from segments.
pub fn dataset_of(segments: &[Segment], aslt: &AsltConfig) -> Result<ScalogramDataset> {
    Ok(ScalogramDataset::from_segments(segments, aslt)?)
}

/// Conventional checkpoint file name for a model kind.
pub fn checkpoint_name(kind: ModelKind) -> &'static str {
    match kind {
        ModelKind::Autoencoder => "autoencoder.ckpt",
        ModelKind::PixelUNet => "pixel.ckpt",
        ModelKind::LatentUNet => "latent.ckpt",
    }
}

/// Load one checkpoint and verify its architecture tag.
pub fn load_checkpoint(path: &Path, want: ModelKind) -> Result<ecgq::nn::Checkpoint> {
    let ckpt = load_raw(path).with_context(|| format!("loading checkpoint {}", path.display()))?;
    if ckpt.kind != want {
        bail!(
            "checkpoint {} holds a {:?} model, expected {:?}",
            path.display(),
            ckpt.kind,
            want
        );
    }
    Ok(ckpt)
}

/// Load the autoencoder stored at `path`.
pub fn load_autoencoder(path: &Path) -> Result<AutoencoderDet> {
    let ckpt = load_checkpoint(path, ModelKind::Autoencoder)?;
    let mut ae = AutoencoderDet::new(0);
    fill_model(&ckpt, &mut ae)?;
    Ok(ae)
}

/// Assemble whatever models exist in a checkpoint directory.
///
/// Missing files simply leave the slot empty; a command that later needs the
/// absent model fails with an error naming the missing checkpoint.
pub fn load_model_set(dir: &Path, schedule: NoiseSchedule) -> Result<ModelSet> {
    if !dir.is_dir() {
        bail!("{} is not an existing directory", dir.display());
    }
    let mut set = ModelSet { schedule, ..ModelSet::default() };
    let ae_path = dir.join(checkpoint_name(ModelKind::Autoencoder));
    if ae_path.is_file() {
        set.autoencoder = Some(load_autoencoder(&ae_path)?);
    }
    let pixel_path = dir.join(checkpoint_name(ModelKind::PixelUNet));
    if pixel_path.is_file() {
        let ckpt = load_checkpoint(&pixel_path, ModelKind::PixelUNet)?;
        let mut net = UNetLite::new(1, 0);
        fill_model(&ckpt, &mut net)?;
        set.pixel = Some(net);
    }
    let latent_path = dir.join(checkpoint_name(ModelKind::LatentUNet));
    if latent_path.is_file() {
        let ckpt = load_checkpoint(&latent_path, ModelKind::LatentUNet)?;
        let mut net = UNetLite::new(LATENT_CHANNELS, 0);
        fill_model(&ckpt, &mut net)?;
        set.latent = Some(net);
    }
    if set.autoencoder.is_none() && set.pixel.is_none() && set.latent.is_none() {
        bail!("{} holds no checkpoints (expected autoencoder.ckpt / pixel.ckpt / latent.ckpt)", dir.display());
    }
    Ok(set)
}

/// Parse a score table written by `score` or `sweep`.
pub fn read_scores_csv(path: &Path) -> Result<Vec<ScoreRow>> {
    let text =
        fs::read_to_string(path).with_context(|| format!("reading score table {}", path.display()))?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header == "segment_id,labels,space,sampler,lambda,psnr_db,mae,ssim" => {}
        Some((_, header)) => bail!("{}: unexpected header '{header}'", path.display()),
        None => bail!("{} is empty", path.display()),
    }
    let mut rows = Vec::new();
    for (idx, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 8 {
            bail!("{} line {}: expected 8 fields, got {}", path.display(), idx + 1, fields.len());
        }
        let parse_f64 = |s: &str, what: &str| -> Result<f64> {
            s.parse::<f64>()
                .with_context(|| format!("{} line {}: bad {what} '{s}'", path.display(), idx + 1))
        };
        rows.push(ScoreRow {
            segment_id: fields[0].to_string(),
            labels: fields[1].to_string(),
            space: Space::parse(fields[2])?,
            sampler: Sampler::parse(fields[3])?,
            lambda: fields[4]
                .parse::<usize>()
                .with_context(|| format!("{} line {}: bad lambda '{}'", path.display(), idx + 1, fields[4]))?,
            psnr_db: parse_f64(fields[5], "psnr_db")?,
            mae: parse_f64(fields[6], "mae")?,
            ssim: parse_f64(fields[7], "ssim")?,
        });
    }
    if rows.is_empty() {
        bail!("{} holds no score rows", path.display());
    }
    Ok(rows)
}

/// Labels column of a score row, parsed back into a label set (sanity check).
pub fn validate_labels_column(rows: &[ScoreRow]) -> Result<()> {
    for r in rows {
        labels_from_string(&r.labels)
            .with_context(|| format!("row {}: bad labels '{}'", r.segment_id, r.labels))?;
    }
    Ok(())
}

/// Create a directory (and parents) if needed.
pub fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating directory {}", dir.display()))
}

/// Write a text artifact, creating parent directories as needed.
pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    log::info!("wrote {}", path.display());
    Ok(())
}
