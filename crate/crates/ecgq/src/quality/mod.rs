//! Scoring orchestration: configuration sweeps, dataset refinement,
//! localized PSNR profiling, long-term monitoring, and report serialization.
//!
//! Everything here composes the lower layers into the operational loop:
//! score segments against trained models, compare score distributions across
//! reconstruction configurations, keep only the training ids both candidate
//! configurations agree are clean, localize short noise within a segment,
//! and watch a chronological stream for sustained degradation.
//!
//! Determinism contract: every scoring task derives its own seed from the
//! configuration seed and the segment id, so results are independent of
//! worker count and task order. Reports carry no wall-clock fields at all,
//! which makes identical inputs produce byte-identical report files.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::aslt::{aslt_scalogram, to_model_input, AsltConfig, NormalizedScalogram, GRID_COLS, GRID_ROWS};
use crate::dataset::ScalogramDataset;
use crate::diffusion::{reconstruct, NoiseSchedule, ReconstructionConfig, Sampler, Space};
use crate::error::{Error, Result};
use crate::metrics::{psnr, standardize, wasserstein1, ErrorDistribution, ScorePair};
use crate::nn::{AutoencoderDet, UNetLite};
use crate::rng::derive_seed;
use crate::signal::{labels_to_string, LabelSet, NoiseLabel, Segment};

/// Default sliding-window width: 32 columns ≈ 1.25 s of a 10-s segment.
pub const LOCAL_WINDOW_COLS: usize = 32;

/// Default sliding-window hop: 8 columns ≈ 0.31 s of a 10-s segment.
pub const LOCAL_STRIDE_COLS: usize = 8;

/// Default degradation threshold in dB, used when no calibration set is given.
pub const DEFAULT_THRESHOLD_DB: f64 = 24.0;

/// Consecutive degraded segments required before an event is emitted.
pub const DEFAULT_CONSECUTIVE_K: usize = 3;

/// Version stamp written into every report document.
pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Hex SHA-256 of a byte string; used to fingerprint configs in reports.
pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(bytes);
    let digest = h.finalize();
    let mut out = String::with_capacity(64);
    for b in digest {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

/// The trained models a scoring run needs, plus the shared noise schedule.
#[derive(Default)]
pub struct ModelSet {
    /// Diffusion model over the 1×32×256 pixel grid.
    pub pixel: Option<UNetLite>,
    /// Diffusion model over the 4×8×64 latent grid.
    pub latent: Option<UNetLite>,
    /// Frozen deterministic autoencoder (required for latent scoring).
    pub autoencoder: Option<AutoencoderDet>,
    /// Noise schedule shared by every configuration in a run.
    pub schedule: NoiseSchedule,
}

impl ModelSet {
    /// The network (and autoencoder, for latent space) serving `space`.
    pub fn for_space(&self, space: Space) -> Result<(&UNetLite, Option<&AutoencoderDet>)> {
        match space {
            Space::Pixel => {
                let net = self.pixel.as_ref().ok_or_else(|| {
                    Error::Config("pixel-space scoring requires a pixel diffusion checkpoint".into())
                })?;
                Ok((net, None))
            }
            Space::Latent => {
                let net = self.latent.as_ref().ok_or_else(|| {
                    Error::Config("latent-space scoring requires a latent diffusion checkpoint".into())
                })?;
                let ae = self.autoencoder.as_ref().ok_or_else(|| {
                    Error::Config("latent-space scoring requires an autoencoder checkpoint".into())
                })?;
                Ok((net, Some(ae)))
            }
        }
    }
}

/// One scored segment under one reconstruction configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub segment_id: String,
    /// Canonical label string of the source segment (`clean`, `burst+static`, …).
    pub labels: String,
    pub space: Space,
    pub sampler: Sampler,
    pub lambda: usize,
    pub psnr_db: f64,
    pub mae: f64,
    pub ssim: f64,
}

/// The configuration actually used for one segment: the run seed is replaced
/// by a seed derived from it and the segment id, so each segment draws its
/// own noise and the full run is reproducible under any execution order.
pub fn segment_config(cfg: &ReconstructionConfig, segment_id: &str) -> ReconstructionConfig {
    cfg.with_seed(derive_seed(cfg.seed, &format!("score/{segment_id}")))
}

/// Corrupt-and-reconstruct one grid, returning both sides for metric work.
///
/// λ = 0 is the identity and needs no model at all; otherwise the models
/// required by `cfg.space` must be present. The seed in `cfg` is used as-is —
/// callers wanting per-segment seeds apply [`segment_config`] first.
pub fn reconstruct_pair(
    models: &ModelSet,
    x: &NormalizedScalogram,
    cfg: &ReconstructionConfig,
) -> Result<ScorePair> {
    cfg.validate(models.schedule.t_max())?;
    if cfg.effective_lambda() == 0 {
        return Ok(ScorePair { original: x.clone(), reconstructed: x.clone() });
    }
    let (net, ae) = models.for_space(cfg.space)?;
    let reconstructed = reconstruct(net, ae, x, cfg, &models.schedule)?;
    Ok(ScorePair { original: x.clone(), reconstructed })
}

/// Score an already-normalized grid: reconstruct, then PSNR / MAE / SSIM.
pub fn score_grid(
    models: &ModelSet,
    segment_id: &str,
    labels: &LabelSet,
    x: &NormalizedScalogram,
    cfg: &ReconstructionConfig,
) -> Result<ScoreRow> {
    let seeded = segment_config(cfg, segment_id);
    let pair = reconstruct_pair(models, x, &seeded)?;
    Ok(ScoreRow {
        segment_id: segment_id.to_string(),
        labels: labels_to_string(labels),
        space: cfg.space,
        sampler: cfg.sampler,
        lambda: cfg.lambda,
        psnr_db: pair.psnr(),
        mae: pair.mae(),
        ssim: pair.ssim(),
    })
}

/// Score a raw segment end-to-end: scalogram → normalize → reconstruct → metrics.
pub fn score_segment(
    models: &ModelSet,
    seg: &Segment,
    cfg: &ReconstructionConfig,
    aslt_cfg: &AsltConfig,
) -> Result<ScoreRow> {
    let record = seg.to_record("score")?;
    let sc = aslt_scalogram(&record, aslt_cfg)?;
    let grid = to_model_input(&sc);
    score_grid(models, &seg.id(), &seg.labels, &grid, cfg)
}

/// Reconstruction-fidelity metrics a sweep can rank configurations by.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    Psnr,
    Mae,
    Ssim,
}

impl MetricKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            MetricKind::Psnr => "psnr",
            MetricKind::Mae => "mae",
            MetricKind::Ssim => "ssim",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "psnr" => Ok(MetricKind::Psnr),
            "mae" => Ok(MetricKind::Mae),
            "ssim" => Ok(MetricKind::Ssim),
            other => Err(Error::invalid(format!("unknown metric '{other}'"))),
        }
    }

    /// Extract this metric's value from a score row.
    pub fn of(&self, row: &ScoreRow) -> f64 {
        match self {
            MetricKind::Psnr => row.psnr_db,
            MetricKind::Mae => row.mae,
            MetricKind::Ssim => row.ssim,
        }
    }
}

impl std::fmt::Display for MetricKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// The axes of a configuration sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub spaces: Vec<Space>,
    pub samplers: Vec<Sampler>,
    pub lambdas: Vec<usize>,
    pub metrics: Vec<MetricKind>,
}

impl SweepGrid {
    /// Non-empty axes, duplicates dropped (first occurrence wins, with a
    /// warning per dropped value). Returns the cleaned grid and warnings.
    pub fn validated(&self) -> Result<(SweepGrid, Vec<String>)> {
        if self.spaces.is_empty()
            || self.samplers.is_empty()
            || self.lambdas.is_empty()
            || self.metrics.is_empty()
        {
            return Err(Error::invalid("sweep grid axes must all be non-empty"));
        }
        let mut warnings = Vec::new();
        fn dedup<T: PartialEq + std::fmt::Debug + Clone>(
            axis: &str,
            values: &[T],
            warnings: &mut Vec<String>,
        ) -> Vec<T> {
            let mut out: Vec<T> = Vec::with_capacity(values.len());
            for v in values {
                if out.contains(v) {
                    let msg = format!("duplicate {axis} value {v:?} in sweep grid ignored");
                    log::warn!("{msg}");
                    warnings.push(msg);
                } else {
                    out.push(v.clone());
                }
            }
            out
        }
        let grid = SweepGrid {
            spaces: dedup("space", &self.spaces, &mut warnings),
            samplers: dedup("sampler", &self.samplers, &mut warnings),
            lambdas: dedup("lambda", &self.lambdas, &mut warnings),
            metrics: dedup("metric", &self.metrics, &mut warnings),
        };
        Ok((grid, warnings))
    }
}

/// One W₁ table entry: a configuration × noise kind × metric cell.
///
/// Both class sizes are recorded so the statistical weight of every cell is
/// visible in the report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub space: Space,
    pub sampler: Sampler,
    pub lambda: usize,
    pub kind: String,
    pub metric: MetricKind,
    /// Wasserstein-1 distance between pooled-standardized clean and noisy scores.
    pub w1: f64,
    pub n_clean: usize,
    pub n_noisy: usize,
}

impl SweepCell {
    fn config_label(&self) -> String {
        format!("{}/{}/λ{}", self.space, self.sampler, self.lambda)
    }
}

/// The best configuration for one (noise kind, metric) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestChoice {
    pub kind: String,
    pub metric: MetricKind,
    pub space: Space,
    pub sampler: Sampler,
    pub lambda: usize,
    pub w1: f64,
}

/// The single configuration recommended by a sweep: the one with the highest
/// mean W₁ (PSNR metric) across all noise kinds it produced cells for.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChosenConfig {
    pub space: Space,
    pub sampler: Sampler,
    pub lambda: usize,
    pub mean_w1_psnr: f64,
}

/// Everything a sweep produced: per-segment scores, the W₁ table, the
/// per-kind/per-metric winners, the overall recommendation, and the
/// degradation threshold calibrated from the winner's clean scores.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QualityReport {
    pub grid: SweepGrid,
    pub scores: Vec<ScoreRow>,
    pub cells: Vec<SweepCell>,
    pub best: Vec<BestChoice>,
    pub chosen: Option<ChosenConfig>,
    /// 1st percentile of the chosen configuration's clean PSNR scores, the
    /// recalibrated monitoring threshold (absent when nothing was chosen).
    pub threshold_db: Option<f64>,
    pub warnings: Vec<String>,
}

impl QualityReport {
    /// Per-segment scores as a CSV table.
    pub fn scores_csv(&self) -> String {
        scores_csv(&self.scores)
    }

    /// The W₁ grid as CSV plot data.
    pub fn w1_csv(&self) -> String {
        let mut out = String::from("kind,metric,space,sampler,lambda,w1,n_clean,n_noisy\n");
        for c in &self.cells {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                csv_field(&c.kind),
                c.metric,
                c.space,
                c.sampler,
                c.lambda,
                c.w1,
                c.n_clean,
                c.n_noisy
            ));
        }
        out
    }
}

/// Escape a CSV field (quotes only when the content requires it).
fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Score rows as a CSV table (header + one line per row).
pub fn scores_csv(rows: &[ScoreRow]) -> String {
    let mut out = String::from("segment_id,labels,space,sampler,lambda,psnr_db,mae,ssim\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            csv_field(&r.segment_id),
            csv_field(&r.labels),
            r.space,
            r.sampler,
            r.lambda,
            r.psnr_db,
            r.mae,
            r.ssim
        ));
    }
    out
}

/// Compare score distributions across a configuration grid.
///
/// For every configuration, every clean and noisy item is scored once (in
/// parallel, with per-task derived seeds — results are independent of worker
/// count). For every (configuration, noise kind, metric), the clean and
/// noisy score populations are pooled-standardized and their Wasserstein-1
/// distance recorded as one cell. A kind with no data, or a cell whose
/// pooled scores are all identical, is skipped with a warning and the run
/// continues. `ddim_stride` applies to every ddim configuration; `seed` is
/// the run seed all task seeds derive from.
pub fn sweep(
    models: &ModelSet,
    grid: &SweepGrid,
    clean: &ScalogramDataset,
    noisy: &BTreeMap<NoiseLabel, ScalogramDataset>,
    ddim_stride: usize,
    seed: u64,
) -> Result<QualityReport> {
    let (grid, mut warnings) = grid.validated()?;
    for &space in &grid.spaces {
        models.for_space(space)?;
    }
    if clean.is_empty() {
        return Err(Error::invalid("sweep needs a non-empty clean set"));
    }

    let mut configs = Vec::new();
    for &space in &grid.spaces {
        for &sampler in &grid.samplers {
            for &lambda in &grid.lambdas {
                configs.push(ReconstructionConfig {
                    space,
                    sampler,
                    lambda,
                    ddim_stride,
                    seed: derive_seed(seed, &format!("sweep/{space}/{sampler}/{lambda}")),
                });
            }
        }
    }

    let score_set = |ds: &ScalogramDataset, cfg: &ReconstructionConfig| -> Result<Vec<ScoreRow>> {
        ds.items()
            .par_iter()
            .map(|it| score_grid(models, &it.id, &it.labels, &it.grid, cfg))
            .collect()
    };

    let mut scores = Vec::new();
    let mut cells = Vec::new();
    for cfg in &configs {
        let clean_rows = score_set(clean, cfg)?;
        let clean_by_metric: BTreeMap<MetricKind, Vec<f64>> = grid
            .metrics
            .iter()
            .map(|m| (*m, clean_rows.iter().map(|r| m.of(r)).collect()))
            .collect();

        for (kind, ds) in noisy {
            let cell_name = format!("{}/{}/λ{} × {kind}", cfg.space, cfg.sampler, cfg.lambda);
            if ds.is_empty() {
                let msg = format!("no {kind} data: cell {cell_name} absent");
                log::warn!("{msg}");
                warnings.push(msg);
                continue;
            }
            let noisy_rows = score_set(ds, cfg)?;
            for metric in &grid.metrics {
                let cv = clean_by_metric[metric].clone();
                let nv: Vec<f64> = noisy_rows.iter().map(|r| metric.of(r)).collect();
                let dc = ErrorDistribution::new("clean", cv)?;
                let dn = ErrorDistribution::new(kind.as_str(), nv)?;
                match standardize(&dc, &dn) {
                    Ok((sp, sq)) => cells.push(SweepCell {
                        space: cfg.space,
                        sampler: cfg.sampler,
                        lambda: cfg.lambda,
                        kind: kind.as_str().to_string(),
                        metric: *metric,
                        w1: wasserstein1(&sp, &sq)?,
                        n_clean: dc.len(),
                        n_noisy: dn.len(),
                    }),
                    Err(Error::Degenerate(msg)) => {
                        let msg = format!("cell {cell_name} ({metric}) absent: {msg}");
                        log::warn!("{msg}");
                        warnings.push(msg);
                    }
                    Err(e) => return Err(e),
                }
            }
            scores.extend(noisy_rows);
        }
        scores.extend(clean_rows);
    }

    let best = best_choices(&grid, &cells);
    let chosen = chosen_config(&configs, &cells);
    let threshold_db = match &chosen {
        Some(c) => {
            let clean_psnr: Vec<f64> = scores
                .iter()
                .filter(|r| {
                    r.space == c.space
                        && r.sampler == c.sampler
                        && r.lambda == c.lambda
                        && r.labels == NoiseLabel::Clean.as_str()
                })
                .map(|r| r.psnr_db)
                .collect();
            Some(calibrate_threshold(&clean_psnr)?)
        }
        None => None,
    };

    Ok(QualityReport { grid, scores, cells, best, chosen, threshold_db, warnings })
}

/// For each (kind, metric) with at least one cell, the maximum-W₁ cell.
/// Ties keep the earliest cell in configuration order.
fn best_choices(grid: &SweepGrid, cells: &[SweepCell]) -> Vec<BestChoice> {
    let kinds: BTreeSet<&str> = cells.iter().map(|c| c.kind.as_str()).collect();
    let mut best = Vec::new();
    for kind in kinds {
        for metric in &grid.metrics {
            let winner = cells
                .iter()
                .filter(|c| c.kind == kind && c.metric == *metric)
                .fold(None::<&SweepCell>, |acc, c| match acc {
                    Some(b) if b.w1 >= c.w1 => Some(b),
                    _ => Some(c),
                });
            if let Some(c) = winner {
                best.push(BestChoice {
                    kind: c.kind.clone(),
                    metric: c.metric,
                    space: c.space,
                    sampler: c.sampler,
                    lambda: c.lambda,
                    w1: c.w1,
                });
            }
        }
    }
    best
}

/// The configuration with the highest mean W₁ over its PSNR cells.
/// Configurations without any PSNR cell are not eligible; ties keep the
/// earliest configuration in enumeration order.
fn chosen_config(configs: &[ReconstructionConfig], cells: &[SweepCell]) -> Option<ChosenConfig> {
    let mut chosen: Option<ChosenConfig> = None;
    for cfg in configs {
        let w1s: Vec<f64> = cells
            .iter()
            .filter(|c| {
                c.metric == MetricKind::Psnr
                    && c.space == cfg.space
                    && c.sampler == cfg.sampler
                    && c.lambda == cfg.lambda
            })
            .map(|c| c.w1)
            .collect();
        if w1s.is_empty() {
            continue;
        }
        let mean = w1s.iter().sum::<f64>() / w1s.len() as f64;
        if chosen.as_ref().is_none_or(|c| mean > c.mean_w1_psnr) {
            chosen = Some(ChosenConfig {
                space: cfg.space,
                sampler: cfg.sampler,
                lambda: cfg.lambda,
                mean_w1_psnr: mean,
            });
        }
    }
    chosen
}

/// Keep the ids both configurations rank in their top N% by PSNR.
///
/// Both maps must score exactly the same ids. The cut keeps ⌈N% · n⌉ ids per
/// map, ranked by descending PSNR with ties broken by ascending id, and the
/// result is the intersection of the two cuts — ids whose cleanliness both
/// model configurations agree on. The canonical study grid is N ∈ {25, 50,
/// 75}; any N in 1..=100 is accepted (100 keeps everything). An empty
/// intersection is returned as such with a warning; the caller decides
/// whether that aborts a retrain.
pub fn refine_training_set(
    scores_a: &BTreeMap<String, f64>,
    scores_b: &BTreeMap<String, f64>,
    n_percent: u32,
) -> Result<BTreeSet<String>> {
    if n_percent == 0 || n_percent > 100 {
        return Err(Error::invalid(format!(
            "refinement percentage must be in 1..=100, got {n_percent}"
        )));
    }
    if scores_a.is_empty() {
        return Err(Error::invalid("refinement needs at least one scored id"));
    }
    if scores_a.len() != scores_b.len() {
        return Err(Error::invalid(format!(
            "score maps cover {} vs {} ids; they must score the same segments",
            scores_a.len(),
            scores_b.len()
        )));
    }
    for id in scores_a.keys() {
        if !scores_b.contains_key(id) {
            return Err(Error::invalid(format!(
                "id '{id}' is scored by one configuration but not the other"
            )));
        }
    }
    for (id, v) in scores_a.iter().chain(scores_b) {
        if !v.is_finite() {
            return Err(Error::invalid(format!("non-finite score for id '{id}'")));
        }
    }

    let n = scores_a.len();
    let count = (n_percent as usize * n).div_ceil(100);
    let top = |scores: &BTreeMap<String, f64>| -> BTreeSet<String> {
        let mut ranked: Vec<(&String, f64)> = scores.iter().map(|(k, v)| (k, *v)).collect();
        ranked.sort_by(|(ida, sa), (idb, sb)| {
            sb.partial_cmp(sa).expect("scores are finite").then_with(|| ida.cmp(idb))
        });
        ranked.into_iter().take(count).map(|(id, _)| id.clone()).collect()
    };
    let selected: BTreeSet<String> = top(scores_a).intersection(&top(scores_b)).cloned().collect();
    if selected.is_empty() {
        log::warn!("top-{n_percent}% sets are disjoint: refinement selected no ids");
    }
    Ok(selected)
}

/// A refinement decision: the cut percentage, the two configurations whose
/// rankings were intersected, and the surviving ids.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RefinementPlan {
    pub n_percent: u32,
    pub config_a: ReconstructionConfig,
    pub config_b: ReconstructionConfig,
    pub selected: BTreeSet<String>,
}

impl RefinementPlan {
    /// Build a plan by intersecting the two top-N% cuts.
    pub fn build(
        config_a: ReconstructionConfig,
        config_b: ReconstructionConfig,
        scores_a: &BTreeMap<String, f64>,
        scores_b: &BTreeMap<String, f64>,
        n_percent: u32,
    ) -> Result<RefinementPlan> {
        let selected = refine_training_set(scores_a, scores_b, n_percent)?;
        Ok(RefinementPlan { n_percent, config_a, config_b, selected })
    }
}

/// PSNR of one column window of a reconstruction pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowScore {
    pub col_start: usize,
    pub psnr_db: f64,
}

/// Sliding-window PSNR profile of one segment's reconstruction.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LocalPsnrProfile {
    pub window_cols: usize,
    pub stride_cols: usize,
    pub windows: Vec<WindowScore>,
    pub min_psnr_db: f64,
    pub min_col_start: usize,
    pub global_psnr_db: f64,
}

impl LocalPsnrProfile {
    /// The window sequence as CSV plot data.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("col_start,psnr_db\n");
        for w in &self.windows {
            out.push_str(&format!("{},{}\n", w.col_start, w.psnr_db));
        }
        out
    }
}

/// PSNR over every `window_cols`-wide column window (all 32 rows), hopping
/// `stride_cols` at a time — short localized noise that global PSNR averages
/// away shows up as a dip in this profile.
///
/// The minimum window and its start column are reported alongside the global
/// PSNR. When the windows tile the grid exactly (stride = window dividing
/// the column count), the worst window is always ≤ the global value, because
/// the worst tile's MSE is ≥ the mean over tiles.
pub fn local_psnr_profile(
    pair: &ScorePair,
    window_cols: usize,
    stride_cols: usize,
) -> Result<LocalPsnrProfile> {
    if window_cols == 0 || window_cols > GRID_COLS {
        return Err(Error::invalid(format!(
            "window of {window_cols} columns must be in 1..={GRID_COLS}"
        )));
    }
    if stride_cols == 0 {
        return Err(Error::invalid("window stride must be positive"));
    }
    let a = pair.original.levels();
    let b = pair.reconstructed.levels();
    let mut windows = Vec::new();
    let mut start = 0;
    while start + window_cols <= GRID_COLS {
        let mut wa = Vec::with_capacity(GRID_ROWS * window_cols);
        let mut wb = Vec::with_capacity(GRID_ROWS * window_cols);
        for r in 0..GRID_ROWS {
            let off = r * GRID_COLS + start;
            wa.extend_from_slice(&a[off..off + window_cols]);
            wb.extend_from_slice(&b[off..off + window_cols]);
        }
        windows.push(WindowScore { col_start: start, psnr_db: psnr(&wa, &wb)? });
        start += stride_cols;
    }
    let min = windows
        .iter()
        .fold(None::<&WindowScore>, |acc, w| match acc {
            Some(m) if m.psnr_db <= w.psnr_db => Some(m),
            _ => Some(w),
        })
        .expect("window_cols ≤ GRID_COLS yields at least one window");
    Ok(LocalPsnrProfile {
        window_cols,
        stride_cols,
        min_psnr_db: min.psnr_db,
        min_col_start: min.col_start,
        windows,
        global_psnr_db: pair.psnr(),
    })
}

/// Monitor thresholds: a segment counts as degraded below `threshold_db`,
/// and `consecutive_k` degraded segments in a row raise one event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonitorConfig {
    pub threshold_db: f64,
    pub consecutive_k: usize,
}

impl Default for MonitorConfig {
    fn default() -> Self {
        MonitorConfig { threshold_db: DEFAULT_THRESHOLD_DB, consecutive_k: DEFAULT_CONSECUTIVE_K }
    }
}

impl MonitorConfig {
    /// Default event rule with the threshold calibrated from clean scores.
    pub fn calibrated(clean_psnr: &[f64]) -> Result<MonitorConfig> {
        Ok(MonitorConfig {
            threshold_db: calibrate_threshold(clean_psnr)?,
            consecutive_k: DEFAULT_CONSECUTIVE_K,
        })
    }

    fn validate(&self) -> Result<()> {
        if !self.threshold_db.is_finite() {
            return Err(Error::invalid("monitor threshold must be finite"));
        }
        if self.consecutive_k == 0 {
            return Err(Error::invalid("event rule needs k ≥ 1 consecutive segments"));
        }
        Ok(())
    }
}

/// The 1st percentile (nearest-rank) of a clean calibration population: the
/// dataset-specific replacement for the fixed default threshold.
pub fn calibrate_threshold(clean_psnr: &[f64]) -> Result<f64> {
    if clean_psnr.is_empty() {
        return Err(Error::invalid("threshold calibration needs a non-empty clean set"));
    }
    if clean_psnr.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("non-finite PSNR in calibration set"));
    }
    let mut sorted = clean_psnr.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite values compare"));
    let rank = ((0.01 * sorted.len() as f64).ceil() as usize).max(1);
    Ok(sorted[rank - 1])
}

/// Per-segment verdict against the degradation threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Ok,
    Degraded,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Ok => "ok",
            Verdict::Degraded => "degraded",
        }
    }
}

/// A scored sample entering the monitor fold.
#[derive(Debug, Clone)]
pub struct MonitorSample {
    pub t_start_s: f64,
    pub segment_id: String,
    pub psnr_db: f64,
}

/// One point of the monitoring time series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonitorPoint {
    pub t_start_s: f64,
    pub segment_id: String,
    pub psnr_db: f64,
    pub verdict: Verdict,
}

/// A maximal run of ≥ k consecutive degraded segments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegradationEvent {
    /// Index of the run's first segment in the point series.
    pub start_index: usize,
    /// Start time of the run's first segment.
    pub t_start_s: f64,
    /// Number of consecutive degraded segments in the run.
    pub len: usize,
}

/// The monitoring verdict series plus the events it raised.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MonitorReport {
    pub threshold_db: f64,
    pub consecutive_k: usize,
    pub points: Vec<MonitorPoint>,
    pub events: Vec<DegradationEvent>,
}

impl MonitorReport {
    /// The PSNR time series as CSV plot data.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("index,t_start_s,segment_id,psnr_db,verdict\n");
        for (i, p) in self.points.iter().enumerate() {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                i,
                p.t_start_s,
                csv_field(&p.segment_id),
                p.psnr_db,
                p.verdict.as_str()
            ));
        }
        out
    }
}

/// Fold already-scored samples into verdicts and degradation events.
///
/// Samples must be in strictly increasing time order. A degradation event is
/// one maximal run of consecutive degraded segments of length ≥ k, reported
/// once at the run's first segment.
pub fn monitor_scores(samples: &[MonitorSample], mon: &MonitorConfig) -> Result<MonitorReport> {
    mon.validate()?;
    for (i, w) in samples.windows(2).enumerate() {
        if w[1].t_start_s <= w[0].t_start_s {
            return Err(Error::invalid(format!(
                "segments out of chronological order: t={} at index {} follows t={} at index {}",
                w[1].t_start_s,
                i + 1,
                w[0].t_start_s,
                i
            )));
        }
    }
    let points: Vec<MonitorPoint> = samples
        .iter()
        .map(|s| MonitorPoint {
            t_start_s: s.t_start_s,
            segment_id: s.segment_id.clone(),
            psnr_db: s.psnr_db,
            verdict: if s.psnr_db < mon.threshold_db { Verdict::Degraded } else { Verdict::Ok },
        })
        .collect();

    let mut events = Vec::new();
    let mut run_start = 0;
    let mut run_len = 0;
    for (i, p) in points.iter().enumerate() {
        if p.verdict == Verdict::Degraded {
            if run_len == 0 {
                run_start = i;
            }
            run_len += 1;
        } else {
            if run_len >= mon.consecutive_k {
                events.push(DegradationEvent {
                    start_index: run_start,
                    t_start_s: points[run_start].t_start_s,
                    len: run_len,
                });
            }
            run_len = 0;
        }
    }
    if run_len >= mon.consecutive_k {
        events.push(DegradationEvent {
            start_index: run_start,
            t_start_s: points[run_start].t_start_s,
            len: run_len,
        });
    }

    Ok(MonitorReport {
        threshold_db: mon.threshold_db,
        consecutive_k: mon.consecutive_k,
        points,
        events,
    })
}

/// Score a chronological segment stream and fold it into a monitor report.
pub fn monitor(
    models: &ModelSet,
    segments: &[Segment],
    cfg: &ReconstructionConfig,
    aslt_cfg: &AsltConfig,
    mon: &MonitorConfig,
) -> Result<MonitorReport> {
    mon.validate()?;
    let mut samples = Vec::with_capacity(segments.len());
    for seg in segments {
        let row = score_segment(models, seg, cfg, aslt_cfg)?;
        samples.push(MonitorSample {
            t_start_s: seg.start_s(),
            segment_id: row.segment_id,
            psnr_db: row.psnr_db,
        });
    }
    monitor_scores(&samples, mon)
}

/// Provenance block written into every report: enough to re-run the job.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReproBlock {
    pub schema_version: u32,
    pub tool_version: String,
    pub seed: u64,
    /// SHA-256 of the exact configuration text the run was started with.
    pub config_sha256: String,
}

impl ReproBlock {
    pub fn new(seed: u64, config_text: &str) -> Self {
        ReproBlock {
            schema_version: REPORT_SCHEMA_VERSION,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            seed,
            config_sha256: sha256_hex(config_text.as_bytes()),
        }
    }
}

/// A sweep report ready to write to disk: provenance, the structured report,
/// and its tables re-rendered as embedded CSV for direct plotting. Contains
/// no wall-clock fields, so identical runs serialize byte-identically.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReportDocument {
    pub repro: ReproBlock,
    pub report: QualityReport,
    pub scores_csv: String,
    pub w1_csv: String,
}

impl ReportDocument {
    pub fn new(report: QualityReport, repro: ReproBlock) -> Self {
        let scores_csv = report.scores_csv();
        let w1_csv = report.w1_csv();
        ReportDocument { repro, report, scores_csv, w1_csv }
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }
}

/// A monitor report ready to write to disk; see [`ReportDocument`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MonitorDocument {
    pub repro: ReproBlock,
    pub report: MonitorReport,
    pub series_csv: String,
}

impl MonitorDocument {
    pub fn new(report: MonitorReport, repro: ReproBlock) -> Self {
        let series_csv = report.to_csv();
        MonitorDocument { repro, report, series_csv }
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }
}

/// One named line of an SVG chart.
#[derive(Debug, Clone)]
pub struct SvgSeries {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

const SVG_PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

fn axis_range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for v in values {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if lo == hi {
        // A flat series still needs a visible band to sit in.
        (lo - 1.0, hi + 1.0)
    } else {
        let pad = 0.05 * (hi - lo);
        (lo - pad, hi + pad)
    }
}

/// Render line series as a static standalone SVG chart.
pub fn svg_line_chart(
    title: &str,
    x_label: &str,
    y_label: &str,
    series: &[SvgSeries],
) -> Result<String> {
    if series.is_empty() || series.iter().any(|s| s.points.is_empty()) {
        return Err(Error::invalid("svg chart needs at least one non-empty series"));
    }
    if series.iter().flat_map(|s| &s.points).any(|(x, y)| !x.is_finite() || !y.is_finite()) {
        return Err(Error::invalid("non-finite point in svg chart input"));
    }
    let (w, h) = (720.0, 400.0);
    let (ml, mr, mt, mb) = (64.0, 16.0, 36.0, 48.0);
    let (x0, x1) = axis_range(series.iter().flat_map(|s| s.points.iter().map(|p| p.0)));
    let (y0, y1) = axis_range(series.iter().flat_map(|s| s.points.iter().map(|p| p.1)));
    let px = |x: f64| ml + (x - x0) / (x1 - x0) * (w - ml - mr);
    let py = |y: f64| h - mb - (y - y0) / (y1 - y0) * (h - mt - mb);

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" \
         viewBox=\"0 0 {w} {h}\" font-family=\"sans-serif\" font-size=\"12\">\n"
    ));
    svg.push_str(&format!("<rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n"));
    svg.push_str(&format!(
        "<text x=\"{:.2}\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">{}</text>\n",
        (ml + w - mr) / 2.0,
        xml_escape(title)
    ));
    for i in 0..=4 {
        let f = i as f64 / 4.0;
        let (gx, gy) = (x0 + f * (x1 - x0), y0 + f * (y1 - y0));
        svg.push_str(&format!(
            "<line x1=\"{l:.2}\" y1=\"{y:.2}\" x2=\"{r:.2}\" y2=\"{y:.2}\" stroke=\"#dddddd\"/>\n",
            l = ml,
            r = w - mr,
            y = py(gy)
        ));
        svg.push_str(&format!(
            "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\">{:.3}</text>\n",
            ml - 6.0,
            py(gy) + 4.0,
            gy
        ));
        svg.push_str(&format!(
            "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\">{:.3}</text>\n",
            px(gx),
            h - mb + 18.0,
            gx
        ));
    }
    svg.push_str(&format!(
        "<line x1=\"{ml}\" y1=\"{t}\" x2=\"{ml}\" y2=\"{b}\" stroke=\"black\"/>\n\
         <line x1=\"{ml}\" y1=\"{b}\" x2=\"{r}\" y2=\"{b}\" stroke=\"black\"/>\n",
        t = mt,
        b = h - mb,
        r = w - mr
    ));
    svg.push_str(&format!(
        "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\">{}</text>\n",
        (ml + w - mr) / 2.0,
        h - 8.0,
        xml_escape(x_label)
    ));
    svg.push_str(&format!(
        "<text x=\"14\" y=\"{:.2}\" text-anchor=\"middle\" transform=\"rotate(-90 14 {:.2})\">{}</text>\n",
        (mt + h - mb) / 2.0,
        (mt + h - mb) / 2.0,
        xml_escape(y_label)
    ));
    for (si, s) in series.iter().enumerate() {
        let color = SVG_PALETTE[si % SVG_PALETTE.len()];
        let pts: Vec<String> =
            s.points.iter().map(|(x, y)| format!("{:.2},{:.2}", px(*x), py(*y))).collect();
        svg.push_str(&format!(
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>\n",
            pts.join(" ")
        ));
        if series.len() > 1 {
            let ly = mt + 14.0 * si as f64;
            svg.push_str(&format!(
                "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"10\" height=\"10\" fill=\"{color}\"/>\n\
                 <text x=\"{:.2}\" y=\"{:.2}\">{}</text>\n",
                w - mr - 150.0,
                ly,
                w - mr - 136.0,
                ly + 9.0,
                xml_escape(&s.label)
            ));
        }
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

/// Render a labeled value matrix as a static standalone SVG heatmap.
pub fn svg_heatmap(
    title: &str,
    row_labels: &[String],
    col_labels: &[String],
    values: &[f64],
) -> Result<String> {
    let (rows, cols) = (row_labels.len(), col_labels.len());
    if rows == 0 || cols == 0 {
        return Err(Error::invalid("svg heatmap needs at least one row and column"));
    }
    if values.len() != rows * cols {
        return Err(Error::ShapeMismatch(format!(
            "heatmap has {} values for a {rows}×{cols} grid",
            values.len()
        )));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("non-finite value in svg heatmap input"));
    }
    let (cw, ch) = (84.0, 26.0);
    let (gl, gt) = (150.0, 64.0);
    let (w, h) = (gl + cw * cols as f64 + 16.0, gt + ch * rows as f64 + 16.0);
    let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let norm = |v: f64| if hi > lo { (v - lo) / (hi - lo) } else { 0.5 };
    // Light-to-dark single-hue ramp; text flips to white on dark cells.
    let shade = |f: f64| {
        let lerp = |a: f64, b: f64| a + f * (b - a);
        format!("#{:02x}{:02x}{:02x}", lerp(247.0, 8.0) as u8, lerp(251.0, 48.0) as u8, lerp(255.0, 107.0) as u8)
    };

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" \
         viewBox=\"0 0 {w} {h}\" font-family=\"sans-serif\" font-size=\"12\">\n"
    ));
    svg.push_str(&format!("<rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n"));
    svg.push_str(&format!(
        "<text x=\"{:.2}\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">{}</text>\n",
        w / 2.0,
        xml_escape(title)
    ));
    for (c, label) in col_labels.iter().enumerate() {
        let x = gl + cw * (c as f64 + 0.5);
        svg.push_str(&format!(
            "<text x=\"{x:.2}\" y=\"{y:.2}\" text-anchor=\"end\" \
             transform=\"rotate(-30 {x:.2} {y:.2})\" font-size=\"11\">{}</text>\n",
            xml_escape(label),
            y = gt - 8.0
        ));
    }
    for (r, label) in row_labels.iter().enumerate() {
        svg.push_str(&format!(
            "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\">{}</text>\n",
            gl - 8.0,
            gt + ch * (r as f64 + 0.5) + 4.0,
            xml_escape(label)
        ));
    }
    for r in 0..rows {
        for c in 0..cols {
            let v = values[r * cols + c];
            let f = norm(v);
            let (x, y) = (gl + cw * c as f64, gt + ch * r as f64);
            svg.push_str(&format!(
                "<rect class=\"cell\" x=\"{x:.2}\" y=\"{y:.2}\" width=\"{cw}\" height=\"{ch}\" \
                 fill=\"{}\" stroke=\"white\"/>\n",
                shade(f)
            ));
            svg.push_str(&format!(
                "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\" fill=\"{}\" font-size=\"11\">{:.3}</text>\n",
                x + cw / 2.0,
                y + ch / 2.0 + 4.0,
                if f > 0.6 { "white" } else { "#1a1a1a" },
                v
            ));
        }
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// The sweep's W₁ grid for one metric as a kind × configuration heatmap.
pub fn w1_heatmap_svg(report: &QualityReport, metric: MetricKind) -> Result<String> {
    let cells: Vec<&SweepCell> = report.cells.iter().filter(|c| c.metric == metric).collect();
    if cells.is_empty() {
        return Err(Error::invalid(format!("report has no {metric} cells to plot")));
    }
    let kinds: Vec<String> = {
        let set: BTreeSet<&str> = cells.iter().map(|c| c.kind.as_str()).collect();
        set.into_iter().map(String::from).collect()
    };
    let mut configs: Vec<String> = Vec::new();
    for c in &cells {
        let label = c.config_label();
        if !configs.contains(&label) {
            configs.push(label);
        }
    }
    let mut values = vec![f64::NAN; kinds.len() * configs.len()];
    for c in &cells {
        let r = kinds.iter().position(|k| *k == c.kind).expect("kind from cells");
        let col = configs.iter().position(|l| *l == c.config_label()).expect("config from cells");
        values[r * configs.len() + col] = c.w1;
    }
    // Absent cells render as the low end of the ramp rather than poisoning it.
    let lo = values.iter().cloned().filter(|v| v.is_finite()).fold(f64::INFINITY, f64::min);
    for v in &mut values {
        if !v.is_finite() {
            *v = lo;
        }
    }
    svg_heatmap(
        &format!("Wasserstein-1 separation ({metric})"),
        &kinds,
        &configs,
        &values,
    )
}

/// The monitor PSNR series (plus its threshold) as an SVG line chart.
pub fn monitor_chart_svg(report: &MonitorReport) -> Result<String> {
    if report.points.is_empty() {
        return Err(Error::invalid("monitor report has no points to plot"));
    }
    let series = vec![
        SvgSeries {
            label: "psnr".into(),
            points: report.points.iter().map(|p| (p.t_start_s, p.psnr_db)).collect(),
        },
        SvgSeries {
            label: "threshold".into(),
            points: vec![
                (report.points[0].t_start_s, report.threshold_db),
                (report.points[report.points.len() - 1].t_start_s, report.threshold_db),
            ],
        },
    ];
    svg_line_chart("Reconstruction PSNR over time", "time (s)", "PSNR (dB)", &series)
}
