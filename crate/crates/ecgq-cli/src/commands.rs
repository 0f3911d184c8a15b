//! Implementations of the eight subcommands.
//!
//! Every command resolves its inputs (flags over config file over defaults),
//! runs the corresponding library operation, and writes data-first artifacts:
//! CSV tables, JSON reports with a reproducibility block, and optional SVG
//! charts. Nothing here records wall-clock time, so identical flags and seeds
//! produce byte-identical outputs.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{bail, Result};
use serde::Serialize;

use ecgq::aslt::{aslt_scalogram, to_model_input};
use ecgq::diffusion::{train_autoencoder, train_diffusion, Sampler, Space, TrainConfig};
use ecgq::nn::autoencoder::LATENT_CHANNELS;
use ecgq::nn::checkpoint::save_model;
use ecgq::nn::{AutoencoderDet, ModelKind, UNetLite};
use ecgq::quality::{
    calibrate_threshold, monitor, monitor_chart_svg, score_grid, scores_csv, sweep,
    w1_heatmap_svg, MetricKind, MonitorConfig, MonitorDocument, RefinementPlan, ReportDocument,
    ReproBlock, ScoreRow, SweepGrid,
};
use ecgq::rng::{derive_seed, derived_rng};
use ecgq::signal::{
    ingest_record, inject_noise, resample, segment as segment_record, synth_clean,
    write_raw_record, IngestFormat, NoiseSpec,
};
use rand::Rng;

use crate::args::{
    AsltArgs, FormatArg, IngestArgs, KindArg, MonitorArgs, RefineArgs, ScoreArgs, SweepArgs,
    SynthArgs, TrainArgs,
};
use crate::config::Resolved;
use crate::data::{
    checkpoint_name, dataset_of, ensure_dir, load_autoencoder, load_corpus, load_model_set,
    read_scores_csv, segment_corpus, split_by_label, validate_labels_column, write_text,
};
use crate::usage;

/// Reproducibility block from the resolved, effective parameters of a run.
fn repro_from(seed: u64, effective: &serde_json::Value) -> Result<ReproBlock> {
    Ok(ReproBlock::new(seed, &serde_json::to_string_pretty(effective)?))
}

// ---------------------------------------------------------------------------
// synth
// ---------------------------------------------------------------------------

pub fn cmd_synth(r: &Resolved, a: &SynthArgs) -> Result<()> {
    if a.count == 0 {
        return Err(usage("--count must be at least 1"));
    }
    for (name, v) in [("--burst-frac", a.burst_frac), ("--static-frac", a.static_frac), ("--drift-frac", a.drift_frac)] {
        if !(0.0..=1.0).contains(&v) {
            return Err(usage(format!("{name} must lie in [0, 1], got {v}")));
        }
    }
    if a.burst_frac + a.static_frac + a.drift_frac > 1.0 + 1e-12 {
        return Err(usage("noise fractions must sum to at most 1"));
    }
    if !(a.hr_min >= 30.0 && a.hr_max <= 200.0 && a.hr_min <= a.hr_max) {
        return Err(usage(format!(
            "heart-rate range [{}, {}] must lie within [30, 200] bpm",
            a.hr_min, a.hr_max
        )));
    }
    ensure_dir(&a.out)?;

    let n_burst = (a.count as f64 * a.burst_frac).round() as usize;
    let n_static = (a.count as f64 * a.static_frac).round() as usize;
    let n_drift = (a.count as f64 * a.drift_frac).round() as usize;
    if n_burst + n_static + n_drift > a.count {
        return Err(usage("noise fractions round to more records than --count"));
    }

    let mut manifest = String::from("id,labels,seed,snr_db\n");
    for i in 0..a.count {
        let id = format!("rec{i:04}");
        let rec_seed = derive_seed(r.seed, &format!("synth/{i}"));
        let mut prng = derived_rng(rec_seed, "params");
        let hr = a.hr_min + (a.hr_max - a.hr_min) * prng.random::<f64>();
        let clean = synth_clean(hr, a.fs, a.dur_s, derive_seed(rec_seed, "ecg"))?
            .with_seed(rec_seed);

        let spec = if i < n_burst {
            let len = (1.0 + prng.random::<f64>()).min(a.dur_s * 0.25);
            let start = 0.1 * a.dur_s + prng.random::<f64>() * (0.8 * a.dur_s - len);
            Some(NoiseSpec::burst(a.snr_db, start, len))
        } else if i < n_burst + n_static {
            Some(NoiseSpec::static_noise(a.snr_db))
        } else if i < n_burst + n_static + n_drift {
            let drift_hz = 0.05 + 0.4 * prng.random::<f64>();
            Some(NoiseSpec::baseline_drift(a.snr_db, drift_hz))
        } else {
            None
        };
        let (record, snr_field) = match spec {
            Some(spec) => {
                let noisy = inject_noise(&clean, &spec, derive_seed(rec_seed, "noise"))?
                    .with_seed(rec_seed);
                (noisy, format!("{}", a.snr_db))
            }
            None => (clean, String::new()),
        };
        let labels = ecgq::signal::labels_to_string(&record.labels);
        manifest.push_str(&format!("{id},{labels},{rec_seed},{snr_field}\n"));
        write_raw_record(&record, &a.out, &id)?;
    }
    write_text(&a.out.join("manifest.csv"), &manifest)?;
    println!(
        "synthesized {} records ({} burst, {} static, {} drift, {} clean) in {}",
        a.count,
        n_burst,
        n_static,
        n_drift,
        a.count - n_burst - n_static - n_drift,
        a.out.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// ingest
// ---------------------------------------------------------------------------

/// Resolve the declared or inferred input format.
fn input_format(path: &Path, format: Option<FormatArg>, fs: Option<f64>) -> Result<IngestFormat> {
    let arg = match format {
        Some(f) => f,
        None => match path.extension().and_then(|e| e.to_str()) {
            Some("csv") => FormatArg::Csv,
            Some("f32le") => FormatArg::Raw,
            other => {
                return Err(usage(format!(
                    "cannot infer format from extension {other:?}; pass --format csv|raw"
                )))
            }
        },
    };
    match arg {
        FormatArg::Csv => {
            let fs = fs.ok_or_else(|| usage("CSV input needs --fs (the time column is not trusted)"))?;
            Ok(IngestFormat::Csv { fs })
        }
        FormatArg::Raw => Ok(IngestFormat::RawF32le),
    }
}

pub fn cmd_ingest(a: &IngestArgs) -> Result<()> {
    let format = input_format(&a.input, a.format, a.fs)?;
    let mut record = ingest_record(&a.input, format)?;
    if let Some(target_fs) = a.resample {
        record = resample(&record, target_fs)?;
    }
    let name = match &a.name {
        Some(n) => n.clone(),
        None => a
            .input
            .file_stem()
            .and_then(|s| s.to_str())
            .map(str::to_string)
            .ok_or_else(|| usage("cannot derive a record name from the input path; pass --name"))?,
    };
    ensure_dir(&a.out)?;
    let path = write_raw_record(&record, &a.out, &name)?;
    println!(
        "ingested {}: {} samples @ {} Hz ({:.1} s), labels {} -> {}",
        name,
        record.len(),
        record.fs(),
        record.duration_s(),
        ecgq::signal::labels_to_string(&record.labels),
        path.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// aslt
// ---------------------------------------------------------------------------

/// Levels of one normalized scalogram as a 32-row CSV.
fn levels_csv(levels: &[u8]) -> String {
    let mut out = String::new();
    for row in levels.chunks(ecgq::aslt::GRID_COLS) {
        let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

pub fn cmd_aslt(r: &Resolved, a: &AsltArgs) -> Result<()> {
    let format = input_format(&a.input, a.format, a.fs)?;
    let record = ingest_record(&a.input, format)?;
    let name = a
        .input
        .file_stem()
        .and_then(|s| s.to_str())
        .map(str::to_string)
        .unwrap_or_else(|| "record".to_string());

    let mut aslt = r.aslt();
    if let Some(v) = a.f_min {
        aslt.f_min = v;
    }
    if let Some(v) = a.f_max {
        aslt.f_max = v;
    }
    if let Some(v) = a.n_freq_bins {
        aslt.n_freq_bins = v;
    }
    if let Some(v) = a.o_min {
        aslt.o_min = v;
    }
    if let Some(v) = a.o_max {
        aslt.o_max = v;
    }

    let segments = segment_record(&record, &name, a.window_s, a.window_s)?;
    if segments.is_empty() {
        bail!("{} is shorter than one {:.1}-s window", a.input.display(), a.window_s);
    }
    ensure_dir(&a.out)?;
    for seg in &segments {
        let sc = aslt_scalogram(&seg.to_record("aslt")?, &aslt)?;
        let norm = to_model_input(&sc);
        let file = a.out.join(format!("{}.csv", seg.id().replace('#', "_")));
        write_text(&file, &levels_csv(norm.levels()))?;
    }
    println!("wrote {} scalogram grids to {}", segments.len(), a.out.display());
    Ok(())
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

/// Hyperparameters stored inside a checkpoint, enough to audit a training run.
#[derive(Serialize)]
struct TrainHyper<'a> {
    schema_version: u32,
    kind: &'a str,
    epochs: usize,
    batch_size: usize,
    lr: f64,
    seed: u64,
    t_max: usize,
    beta_start: f64,
    beta_end: f64,
    dataset_len: usize,
    dataset_fingerprint: String,
}

pub fn cmd_train(r: &Resolved, a: &TrainArgs) -> Result<()> {
    let data = r.dir(a.data.clone(), "data_dir", "--data")?;
    let out = r.dir(a.out.clone(), "checkpoint_dir", "--out")?;
    let kind = match a.kind {
        KindArg::Autoencoder => ModelKind::Autoencoder,
        KindArg::Pixel => ModelKind::PixelUNet,
        KindArg::Latent => ModelKind::LatentUNet,
    };
    if matches!(kind, ModelKind::LatentUNet) && a.autoencoder.is_none() {
        return Err(usage(
            "training the latent denoiser requires --autoencoder <checkpoint>; train the autoencoder first",
        ));
    }

    let corpus = load_corpus(&data)?;
    let segments = segment_corpus(&corpus, a.window_s)?;
    let aslt = r.aslt();
    let ds = dataset_of(&segments, &aslt)?;
    let params = r.schedule_params();
    let sched = params.build()?;
    let kind_str = match kind {
        ModelKind::Autoencoder => "autoencoder",
        ModelKind::PixelUNet => "pixel",
        ModelKind::LatentUNet => "latent",
    };
    let train_seed = derive_seed(r.seed, &format!("train/{kind_str}"));
    let cfg = TrainConfig { epochs: a.epochs, batch_size: a.batch_size, lr: a.lr, seed: train_seed };
    log::info!(
        "training {kind_str} on {} segments ({} epochs, batch {}, lr {})",
        ds.len(),
        a.epochs,
        a.batch_size,
        a.lr
    );

    ensure_dir(&out)?;
    let init_seed = derive_seed(r.seed, &format!("init/{kind_str}"));
    let trace = match kind {
        ModelKind::Autoencoder => {
            let mut ae = AutoencoderDet::new(init_seed);
            let trace = train_autoencoder(&mut ae, &ds, &cfg)?;
            save_with_hyper(&out, kind, kind_str, &ae, a, &cfg, &params, &ds)?;
            trace
        }
        ModelKind::PixelUNet => {
            let mut net = UNetLite::new(1, init_seed);
            let trace = train_diffusion(&mut net, &ds, None, &sched, &cfg)?;
            save_with_hyper(&out, kind, kind_str, &net, a, &cfg, &params, &ds)?;
            trace
        }
        ModelKind::LatentUNet => {
            let ae_path = a.autoencoder.as_ref().expect("checked above");
            let ae = load_autoencoder(ae_path)?;
            let mut net = UNetLite::new(LATENT_CHANNELS, init_seed);
            let trace = train_diffusion(&mut net, &ds, Some(&ae), &sched, &cfg)?;
            save_with_hyper(&out, kind, kind_str, &net, a, &cfg, &params, &ds)?;
            trace
        }
    };

    let mut loss_csv = String::from("epoch,loss\n");
    for (i, loss) in trace.iter().enumerate() {
        loss_csv.push_str(&format!("{},{}\n", i + 1, loss));
    }
    write_text(&out.join(format!("{kind_str}_loss.csv")), &loss_csv)?;
    println!(
        "trained {kind_str}: loss {:.6} -> {:.6} over {} epochs; checkpoint {}",
        trace.first().copied().unwrap_or(f64::NAN),
        trace.last().copied().unwrap_or(f64::NAN),
        trace.len(),
        out.join(checkpoint_name(kind)).display()
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn save_with_hyper(
    out: &Path,
    kind: ModelKind,
    kind_str: &str,
    model: &dyn ecgq::nn::Parametrized,
    a: &TrainArgs,
    cfg: &TrainConfig,
    params: &crate::config::ScheduleParams,
    ds: &ecgq::dataset::ScalogramDataset,
) -> Result<()> {
    let hyper = TrainHyper {
        schema_version: 1,
        kind: kind_str,
        epochs: a.epochs,
        batch_size: a.batch_size,
        lr: a.lr,
        seed: cfg.seed,
        t_max: params.t_max,
        beta_start: params.beta_start,
        beta_end: params.beta_end,
        dataset_len: ds.len(),
        dataset_fingerprint: ds.fingerprint(),
    };
    let path = out.join(checkpoint_name(kind));
    save_model(&path, kind, &serde_json::to_string(&hyper)?, model)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// score
// ---------------------------------------------------------------------------

/// A score run: provenance plus the score table it produced.
#[derive(Serialize)]
struct ScoreDocument {
    repro: ReproBlock,
    scores_csv: String,
}

pub fn cmd_score(r: &Resolved, a: &ScoreArgs) -> Result<()> {
    let data = r.dir(a.data.clone(), "data_dir", "--data")?;
    let ckpt_dir = r.dir(a.checkpoints.clone(), "checkpoint_dir", "--checkpoints")?;
    let out = r.dir(a.out.clone(), "report_dir", "--out")?;
    let recon = r.reconstruction(
        a.space.map(Into::into),
        a.sampler.map(Into::into),
        a.lambda,
        a.stride,
    );

    let corpus = load_corpus(&data)?;
    let segments = segment_corpus(&corpus, a.window_s)?;
    let aslt = r.aslt();
    let ds = dataset_of(&segments, &aslt)?;
    // Depth 0 reconstructs by identity and needs no trained model.
    let models = if recon.effective_lambda() == 0 {
        ecgq::quality::ModelSet { schedule: r.schedule()?, ..Default::default() }
    } else {
        load_model_set(&ckpt_dir, r.schedule()?)?
    };

    let rows: Vec<ScoreRow> = ds
        .items()
        .iter()
        .map(|it| Ok(score_grid(&models, &it.id, &it.labels, &it.grid, &recon)?))
        .collect::<Result<_>>()?;

    let effective = serde_json::json!({
        "command": "score",
        "reconstruction": recon,
        "window_s": a.window_s,
        "aslt": aslt,
        "schedule": r.schedule_params(),
        "segments": rows.len(),
    });
    let doc = ScoreDocument { repro: repro_from(r.seed, &effective)?, scores_csv: scores_csv(&rows) };

    ensure_dir(&out)?;
    write_text(&out.join("scores.csv"), &doc.scores_csv)?;
    let mut json = serde_json::to_string_pretty(&doc)?;
    json.push('\n');
    write_text(&out.join("score_report.json"), &json)?;

    let mean = rows.iter().map(|r| r.psnr_db).sum::<f64>() / rows.len() as f64;
    println!(
        "scored {} segments at {}/{}/λ{}: mean psnr {:.2} dB; reports in {}",
        rows.len(),
        recon.space,
        recon.sampler,
        recon.lambda,
        mean,
        out.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// sweep
// ---------------------------------------------------------------------------

/// Parse a comma-separated flag list with one parser per item.
fn parse_list<T>(raw: &str, what: &str, parse: impl Fn(&str) -> Result<T>) -> Result<Vec<T>> {
    raw.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse(s).map_err(|e| usage(format!("bad {what} '{s}': {e}"))))
        .collect()
}

pub fn cmd_sweep(r: &Resolved, a: &SweepArgs) -> Result<()> {
    let data = r.dir(a.data.clone(), "data_dir", "--data")?;
    let ckpt_dir = r.dir(a.checkpoints.clone(), "checkpoint_dir", "--checkpoints")?;
    let out = r.dir(a.out.clone(), "report_dir", "--out")?;

    let file_grid = r.config.as_ref().and_then(|c| c.sweep.clone());
    let grid = SweepGrid {
        spaces: match &a.spaces {
            Some(s) => parse_list(s, "space", |x| Ok(Space::parse(x)?))?,
            None => file_grid.as_ref().map(|g| g.spaces.clone()).unwrap_or_else(|| vec![Space::Pixel, Space::Latent]),
        },
        samplers: match &a.samplers {
            Some(s) => parse_list(s, "sampler", |x| Ok(Sampler::parse(x)?))?,
            None => file_grid.as_ref().map(|g| g.samplers.clone()).unwrap_or_else(|| vec![Sampler::Ddpm, Sampler::Ddim]),
        },
        lambdas: match &a.lambdas {
            Some(s) => parse_list(s, "lambda", |x| Ok(x.parse::<usize>()?))?,
            None => file_grid.as_ref().map(|g| g.lambdas.clone()).unwrap_or_else(|| vec![10, 30, 50]),
        },
        metrics: match &a.metrics {
            Some(s) => parse_list(s, "metric", |x| Ok(MetricKind::parse(x)?))?,
            None => file_grid
                .as_ref()
                .map(|g| g.metrics.clone())
                .unwrap_or_else(|| vec![MetricKind::Psnr, MetricKind::Mae, MetricKind::Ssim]),
        },
    };

    let corpus = load_corpus(&data)?;
    let segments = segment_corpus(&corpus, a.window_s)?;
    let (clean_segs, noisy_segs) = split_by_label(segments)?;
    if clean_segs.is_empty() {
        bail!("sweep needs clean-labeled segments in {}", data.display());
    }
    if noisy_segs.is_empty() {
        bail!("sweep needs at least one noise-labeled population in {}", data.display());
    }
    let aslt = r.aslt();
    let clean_ds = dataset_of(&clean_segs, &aslt)?;
    let mut noisy_ds = BTreeMap::new();
    for (label, segs) in noisy_segs {
        noisy_ds.insert(label, dataset_of(&segs, &aslt)?);
    }

    let models = load_model_set(&ckpt_dir, r.schedule()?)?;
    let report = sweep(&models, &grid, &clean_ds, &noisy_ds, a.stride, r.seed)?;

    let effective = serde_json::json!({
        "command": "sweep",
        "grid": grid,
        "ddim_stride": a.stride,
        "window_s": a.window_s,
        "aslt": aslt,
        "schedule": r.schedule_params(),
    });
    let doc = ReportDocument::new(report, repro_from(r.seed, &effective)?);

    ensure_dir(&out)?;
    write_text(&out.join("scores.csv"), &doc.scores_csv)?;
    write_text(&out.join("w1.csv"), &doc.w1_csv)?;
    write_text(&out.join("report.json"), &doc.to_json()?)?;
    if a.svg {
        for metric in &doc.report.grid.metrics {
            let svg = w1_heatmap_svg(&doc.report, *metric)?;
            write_text(&out.join(format!("w1_{}.svg", metric.as_str())), &svg)?;
        }
    }

    match &doc.report.chosen {
        Some(c) => println!(
            "sweep done: chose {}/{}/λ{} (mean W1 over psnr {:.3}); reports in {}",
            c.space,
            c.sampler,
            c.lambda,
            c.mean_w1_psnr,
            out.display()
        ),
        None => println!("sweep done (no configuration could be ranked); reports in {}", out.display()),
    }
    for w in &doc.report.warnings {
        log::warn!("{w}");
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// refine
// ---------------------------------------------------------------------------

/// One score per id from a single-configuration table.
fn score_map(rows: &[ScoreRow], metric: MetricKind, path: &Path) -> Result<BTreeMap<String, f64>> {
    let mut map = BTreeMap::new();
    for row in rows {
        if map.insert(row.segment_id.clone(), metric.of(row)).is_some() {
            bail!(
                "{}: several rows for id {}; refine expects one configuration per table (filter sweep output first)",
                path.display(),
                row.segment_id
            );
        }
    }
    Ok(map)
}

pub fn cmd_refine(r: &Resolved, a: &RefineArgs) -> Result<()> {
    let rows_a = read_scores_csv(&a.scores_a)?;
    let rows_b = read_scores_csv(&a.scores_b)?;
    validate_labels_column(&rows_a)?;
    validate_labels_column(&rows_b)?;
    let metric = a.metric.into();
    let map_a = score_map(&rows_a, metric, &a.scores_a)?;
    let map_b = score_map(&rows_b, metric, &a.scores_b)?;

    // The tables carry their configuration in every row; echo the first.
    let cfg_of = |rows: &[ScoreRow]| ecgq::diffusion::ReconstructionConfig {
        space: rows[0].space,
        sampler: rows[0].sampler,
        lambda: rows[0].lambda,
        ddim_stride: 10,
        seed: r.seed,
    };
    let plan = RefinementPlan::build(cfg_of(&rows_a), cfg_of(&rows_b), &map_a, &map_b, a.n_percent)?;

    for id in &plan.selected {
        println!("{id}");
    }
    log::info!(
        "kept {} of {} ids at top {}% by {}",
        plan.selected.len(),
        map_a.len(),
        a.n_percent,
        metric.as_str()
    );
    if let Some(out) = &a.out {
        let effective = serde_json::json!({
            "command": "refine",
            "n_percent": a.n_percent,
            "metric": metric,
            "scores_a": a.scores_a.display().to_string(),
            "scores_b": a.scores_b.display().to_string(),
        });
        #[derive(Serialize)]
        struct RefineDocument {
            repro: ReproBlock,
            plan: RefinementPlan,
        }
        let doc = RefineDocument { repro: repro_from(r.seed, &effective)?, plan };
        let mut json = serde_json::to_string_pretty(&doc)?;
        json.push('\n');
        write_text(out, &json)?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// monitor
// ---------------------------------------------------------------------------

pub fn cmd_monitor(r: &Resolved, a: &MonitorArgs) -> Result<()> {
    let ckpt_dir = r.dir(a.checkpoints.clone(), "checkpoint_dir", "--checkpoints")?;
    let out = r.dir(a.out.clone(), "report_dir", "--out")?;
    let format = input_format(&a.input, a.format, a.fs)?;
    let record = ingest_record(&a.input, format)?;
    let name = a
        .input
        .file_stem()
        .and_then(|s| s.to_str())
        .map(str::to_string)
        .unwrap_or_else(|| "stream".to_string());

    let recon = r.reconstruction(
        a.space.map(Into::into),
        a.sampler.map(Into::into),
        a.lambda,
        a.stride,
    );
    let threshold_db = match (&a.calibrate, a.threshold_db) {
        (Some(path), None) => {
            let rows = read_scores_csv(path)?;
            let psnr: Vec<f64> = rows.iter().map(|r| r.psnr_db).collect();
            calibrate_threshold(&psnr)?
        }
        (None, Some(t)) => t,
        (None, None) => ecgq::quality::DEFAULT_THRESHOLD_DB,
        (Some(_), Some(_)) => unreachable!("clap conflicts_with rejects this"),
    };
    let mon = MonitorConfig { threshold_db, consecutive_k: a.consecutive };

    let segments = segment_record(&record, &name, a.window_s, a.window_s)?;
    if segments.is_empty() {
        bail!("{} is shorter than one {:.1}-s window", a.input.display(), a.window_s);
    }
    let aslt = r.aslt();
    let models = if recon.effective_lambda() == 0 {
        ecgq::quality::ModelSet { schedule: r.schedule()?, ..Default::default() }
    } else {
        load_model_set(&ckpt_dir, r.schedule()?)?
    };
    let report = monitor(&models, &segments, &recon, &aslt, &mon)?;

    let effective = serde_json::json!({
        "command": "monitor",
        "input": name,
        "reconstruction": recon,
        "window_s": a.window_s,
        "threshold_db": threshold_db,
        "consecutive_k": a.consecutive,
        "aslt": aslt,
        "schedule": r.schedule_params(),
    });
    let doc = MonitorDocument::new(report, repro_from(r.seed, &effective)?);

    ensure_dir(&out)?;
    write_text(&out.join("monitor_series.csv"), &doc.series_csv)?;
    write_text(&out.join("monitor_report.json"), &doc.to_json()?)?;
    if a.svg {
        write_text(&out.join("monitor.svg"), &monitor_chart_svg(&doc.report)?)?;
    }

    println!(
        "monitored {} segments: {} degradation event(s) below {:.2} dB (k={}); reports in {}",
        doc.report.points.len(),
        doc.report.events.len(),
        doc.report.threshold_db,
        doc.report.consecutive_k,
        out.display()
    );
    Ok(())
}
