//! The four subcommands. Each writes its files into `cfg.out_dir` and returns
//! the report that goes to report.json (where there is one).

use std::path::Path;

use rayon::prelude::*;
use serde_json::{json, Value};

use occlink::camera::{self, pgm};
use occlink::equalizer;
use occlink::link;
use occlink::metrics::LinkReport;

use crate::config::{OffsetSpec, RunConfig};
use crate::error::{CliError, StageExt};
use crate::output::{self, num, Csv};
use crate::trial::{self, TrialSeeds};

pub const SAMPLES_HEADER: [&str; 6] = [
    "index",
    "tx_symbol",
    "y_raw",
    "y_normalized",
    "y_equalized",
    "sliced_symbol",
];

pub const SWEEP_HEADER: [&str; 8] = [
    "offset_fraction",
    "snr_db",
    "trials",
    "sync_failures",
    "n_bits",
    "ber_no_eq",
    "ber_zf",
    "mean_residual_isi",
];

pub const TAPS_HEADER: [&str; 7] = [
    "offset_fraction",
    "analytic_main",
    "analytic_next",
    "empirical_main",
    "empirical_next",
    "max_abs_error",
    "square_wave_contrast",
];

pub fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(output::io_err(dir))
}

fn ok_report(command: &str, cfg: &RunConfig, body: Value) -> Value {
    let mut v = json!({
        "status": "ok",
        "exit_code": 0,
        "command": command,
        "reason": null,
        "config": cfg,
    });
    if let (Value::Object(dst), Value::Object(src)) = (&mut v, body) {
        dst.extend(src);
    }
    v
}

/// One transmission through the whole chain, writing samples.csv,
/// capture.pgm and payload.bits (plus waveform.csv on request).
pub fn simulate(cfg: &RunConfig) -> Result<Value, CliError> {
    let out = &cfg.out_dir;
    ensure_dir(out)?;
    let t = trial::transmit(cfg, cfg.offset, cfg.snr_db, 0)?;
    let cap = &t.capture;

    let fs = link::full_scale(&cap.camera, &t.params);
    let image = camera::render_stripe_image(&cap.rows, &cap.camera, fs).stage("render")?;
    pgm::save(&image, &out.join("capture.pgm")).stage("render")?;
    if cfg.write_waveform {
        write_waveform(&t, &out.join("waveform.csv"))?;
    }
    if cfg.decodes() {
        output::write_bytes(&out.join("payload.bits"), output::bit_lines(&t.bits).as_bytes())?;
    }

    let y = t.normalized()?;
    let frame_contrast = link::row_contrast(&y.values[t.frame_rows()]);
    let padded = t.padded_symbols();
    let r = t.params.rows_per_symbol;
    let tx_symbol = |n: usize| padded.get(n / r).copied();

    let mut csv = Csv::new(&SAMPLES_HEADER);
    let mut body = json!({
        "frame_contrast": frame_contrast,
        "capture": {
            "rows": cap.rows.len(),
            "first_frame_row": cap.first_frame_row,
            "offset_fraction": t.offset_fraction,
            "noise_sigma": t.params.channel.noise_sigma(),
            "trial_seed": t.seeds.trial,
        },
        "report": null,
    });

    if !cfg.decodes() {
        for n in 0..cap.rows.len() {
            csv.row(&[
                n.to_string(),
                num(tx_symbol(n)),
                num(Some(cap.rows.values[n])),
                num(Some(y.values[n])),
                String::new(),
                String::new(),
            ]);
        }
        csv.save(&out.join("samples.csv"))?;
        return Ok(ok_report("simulate", cfg, body));
    }

    let rc = trial::receiver(cfg, t.seeds.slicer)?;
    let rx = trial::decode(&y.values, &rc)?;
    let n_pre = rc.preamble.len();
    let start = rx.sync.start;
    for n in 0..cap.rows.len() {
        let j = n.checked_sub(start).filter(|j| *j < rc.frame_len());
        let sliced = j
            .and_then(|j| j.checked_sub(n_pre))
            .map(|k| rx.payload_symbols[k]);
        csv.row(&[
            n.to_string(),
            num(tx_symbol(n)),
            num(Some(cap.rows.values[n])),
            num(Some(y.values[n])),
            num(j.map(|j| rx.equalized[j])),
            num(sliced),
        ]);
    }
    csv.save(&out.join("samples.csv"))?;

    let report = LinkReport::from_decisions(
        &t.bits,
        &rx.payload_bits,
        &t.symbols[n_pre..],
        &rx.payload_symbols,
        cfg.snr_db,
        t.offset_fraction,
        rx.equalizer.residual_isi,
        rx.estimate.taps.clone(),
    )
    .stage("metrics")?;
    body["report"] = json!(report);
    body["receiver"] = receiver_json(&rx);
    Ok(ok_report("simulate", cfg, body))
}

fn receiver_json(rx: &link::Reception) -> Value {
    json!({
        "sync_start": rx.sync.start,
        "sync_peak": rx.sync.peak,
        "frame_start": rx.estimate.frame_start,
        "estimated_taps": rx.estimate.taps,
        "estimation_residual": rx.estimate.residual_norm,
        "delay": rx.equalizer.delay,
        "residual_isi": rx.equalizer.residual_isi,
        "equalizer_taps": rx.equalizer.taps,
    })
}

fn write_waveform(t: &trial::Transmission, path: &Path) -> Result<(), CliError> {
    let mut csv = Csv::new(&["index", "time", "transmitted", "received"]);
    let tx = &t.capture.transmitted;
    for k in 0..tx.len() {
        csv.row(&[
            k.to_string(),
            num(Some(tx.time(k))),
            num(Some(tx.samples()[k])),
            num(Some(t.capture.received.samples()[k])),
        ]);
    }
    csv.save(path)
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct TrialStats {
    n_bits: usize,
    errors_no_eq: usize,
    errors_zf: usize,
    residual_isi: f64,
}

fn sweep_trial(
    cfg: &RunConfig,
    offset: OffsetSpec,
    snr_db: Option<f64>,
    index: u64,
) -> Result<Option<TrialStats>, CliError> {
    let t = trial::transmit(cfg, offset, snr_db, index)?;
    let y = t.normalized()?;
    let rc = trial::receiver(cfg, t.seeds.slicer)?;
    let rx = match trial::decode(&y.values, &rc) {
        Ok(rx) => rx,
        Err(CliError::Stage {
            source: occlink::Error::SyncFailure { .. },
            ..
        }) => return Ok(None),
        Err(e) => return Err(e),
    };
    let raw = link::slice_unequalized(&y.values, &rx.sync, &rc).stage("slice")?;
    let raw_bits = occlink::modem::symbols_to_bits(&raw, &rc.alphabet).stage("slice")?;
    let count = |rx_bits: &[u8]| t.bits.iter().zip(rx_bits).filter(|(a, b)| a != b).count();
    Ok(Some(TrialStats {
        n_bits: t.bits.len(),
        errors_no_eq: count(&raw_bits),
        errors_zf: count(&rx.payload_bits),
        residual_isi: rx.equalizer.residual_isi,
    }))
}

/// Monte-Carlo BER over the offset × SNR grid. Trial `t` of grid point `p`
/// uses the trial index `p·trials + t`, so the table does not depend on how
/// the trials are scheduled.
pub fn sweep_ber(cfg: &RunConfig, threads: usize) -> Result<String, CliError> {
    ensure_dir(&cfg.out_dir)?;
    let offsets = if cfg.sweep.offsets.is_empty() {
        vec![cfg.offset]
    } else {
        cfg.sweep.offsets.clone()
    };
    let snrs = if cfg.sweep.snr_db.is_empty() {
        vec![cfg.snr_db]
    } else {
        cfg.sweep.snr_db.clone()
    };
    let points: Vec<(OffsetSpec, Option<f64>)> = offsets
        .iter()
        .flat_map(|o| snrs.iter().map(move |s| (*o, *s)))
        .collect();
    let trials = cfg.sweep.trials;
    let jobs: Vec<(usize, u64)> = (0..points.len())
        .flat_map(|p| (0..trials).map(move |t| (p, (p * trials + t) as u64)))
        .collect();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| CliError::Config {
            field: "threads".into(),
            message: e.to_string(),
        })?;
    log::info!("sweep: {} points x {trials} trials on {threads} threads", points.len());
    let results: Vec<Result<Option<TrialStats>, CliError>> = pool.install(|| {
        jobs.par_iter()
            .map(|(p, index)| sweep_trial(cfg, points[*p].0, points[*p].1, *index))
            .collect()
    });

    let mut csv = Csv::new(&SWEEP_HEADER);
    let mut results = results.into_iter();
    for (offset, snr) in &points {
        let mut failures = 0usize;
        let mut total = TrialStats::default();
        let mut decoded = 0usize;
        for r in results.by_ref().take(trials) {
            match r {
                Ok(Some(s)) => {
                    total.n_bits += s.n_bits;
                    total.errors_no_eq += s.errors_no_eq;
                    total.errors_zf += s.errors_zf;
                    total.residual_isi += s.residual_isi;
                    decoded += 1;
                }
                Ok(None) => failures += 1,
                Err(e) => return Err(e),
            }
        }
        let rate = |e: usize| (total.n_bits > 0).then(|| e as f64 / total.n_bits as f64);
        csv.row(&[
            offset.label(),
            num(*snr),
            trials.to_string(),
            failures.to_string(),
            total.n_bits.to_string(),
            num(rate(total.errors_no_eq)),
            num(rate(total.errors_zf)),
            num((decoded > 0).then(|| total.residual_isi / decoded as f64)),
        ]);
    }
    csv.save(&cfg.out_dir.join("sweep.csv"))?;
    Ok(csv.as_str().to_owned())
}

/// Ingest a stripe image and decode its payload into decoded.bits.
pub fn decode_image(cfg: &RunConfig, image_path: &Path) -> Result<Value, CliError> {
    ensure_dir(&cfg.out_dir)?;
    let image = pgm::load(image_path).map_err(|e| match e {
        occlink::Error::Io(source) => CliError::Io {
            path: image_path.to_owned(),
            source,
        },
        other => CliError::Stage {
            stage: "ingest",
            source: other,
        },
    })?;
    let roi = match cfg.camera.roi_cols {
        Some([lo, hi]) => lo..hi,
        None => 0..image.cols(),
    };
    let row_period = cfg.symbol_duration / cfg.rows_per_symbol as f64;
    let rows = camera::ingest_stripe_image(&image, roi, 1.0, row_period).stage("ingest")?;
    let seeds = TrialSeeds::new(cfg.master_seed, 0);
    let rc = trial::receiver(cfg, seeds.slicer)?;
    let (_, rx) = link::receive_blind(&rows, &rc).map_err(|source| CliError::Stage {
        stage: trial::receive_stage(&source),
        source,
    })?;
    output::write_bytes(
        &cfg.out_dir.join("decoded.bits"),
        output::bit_lines(&rx.payload_bits).as_bytes(),
    )?;
    let body = json!({
        "image": {
            "path": image_path,
            "rows": image.rows(),
            "cols": image.cols(),
            "bit_depth": image.bit_depth(),
        },
        "n_bits": rx.payload_bits.len(),
        "n_symbols": rx.payload_symbols.len(),
        "estimated_taps": rx.estimate.taps,
        "residual_isi": rx.equalizer.residual_isi,
        "receiver": receiver_json(&rx),
    });
    Ok(ok_report("decode-image", cfg, body))
}

/// Alternating ±1 symbols, a square wave at half the symbol rate.
pub fn square_wave(n: usize) -> Vec<f64> {
    (0..n).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect()
}

/// Analytic against estimated offset taps, with the row contrast of a square
/// wave at the same offset, into taps.csv.
pub fn offset_demo(cfg: &RunConfig) -> Result<String, CliError> {
    ensure_dir(&cfg.out_dir)?;
    let mut square = cfg.clone();
    square.explicit_symbols = Some(square_wave(32));
    let mut csv = Csv::new(&TAPS_HEADER);
    for (i, f) in cfg.demo_offsets.iter().enumerate() {
        let (a_main, a_next) =
            equalizer::analytic_offset_taps(f * cfg.symbol_duration, cfg.symbol_duration).stage("analytic")?;
        let t = trial::transmit(cfg, OffsetSpec::Fraction(*f), cfg.snr_db, i as u64)?;
        let y = t.normalized()?;
        let rx = trial::decode(&y.values, &trial::receiver(cfg, t.seeds.slicer)?)?;
        let empirical = rx.coupling(t.capture.first_frame_row);
        let err = empirical.map(|(m, n)| (m - a_main).abs().max((n - a_next).abs()));

        let sq = trial::transmit(&square, OffsetSpec::Fraction(*f), None, i as u64)?;
        let sq_y = sq.normalized()?;
        let contrast = link::row_contrast(&sq_y.values[sq.frame_rows()]);
        csv.row(&[
            num(Some(*f)),
            num(Some(a_main)),
            num(Some(a_next)),
            num(empirical.map(|p| p.0)),
            num(empirical.map(|p| p.1)),
            num(err),
            num(Some(contrast)),
        ]);
    }
    csv.save(&cfg.out_dir.join("taps.csv"))?;
    Ok(csv.as_str().to_owned())
}
