//! Subcommand implementations.

use serde_json::json;

use linhlc::compensation::{
    fir_from_gain, optimal_gain_freq, restoration_residual, CompensationGain, GainOptions, Window,
};
use linhlc::{dft, Complex64};
use linhlc::io::{cfs_to_csv, fmt_sig, read_channel_responses};
use linhlc::metrics::{
    convolve_fir, long_term_gain, low_freq_penalty, make_noise, plain_mae, segmented_mae, ser, NoiseKind,
    SignalBuffer, WelchParams, LOW_FREQ_CUTOFF_HZ,
};
use linhlc::model::{audiogram_to_profile, build_filterbank, impair_spec, SpacingChoice};
use linhlc::prescribe::{half_gain, nalr_gain, prescription_to_gaincurve};
use linhlc::spacing::{gnr_sweep as run_sweep, log_cfs, propose_cfs, SpacingRequest, SpacingStrategy, SweepConfig};

use crate::wav::{read_mono, write_mono, WavFormat};
use crate::*;

fn parse_window(name: &str) -> CliResult<Window> {
    Ok(name.parse::<Window>()?)
}

fn fir_csv(taps: &[f64]) -> String {
    let mut s = String::from("tap,value\n");
    for (i, v) in taps.iter().enumerate() {
        s.push_str(&format!("{i},{}\n", fmt_sig(*v)));
    }
    s
}

pub fn spacing(a: &SpacingArgs) -> CliResult<()> {
    let mut cfg = load_model(&a.model)?;
    if let Some(f) = a.cf_min {
        cfg.cf_min_hz = f;
    }
    if let Some(f) = a.cf_max {
        cfg.cf_max_hz = f;
    }
    cfg.validate()?;
    let (cfs, params) = match a.strategy.as_str() {
        "log" => {
            if a.delta.is_some() {
                return Err(CliError::Config("--delta applies only to --strategy proposed".into()));
            }
            let k = a.k.unwrap_or(cfg.k);
            (log_cfs(cfg.cf_min_hz, cfg.cf_max_hz, k)?, json!({ "k": k }))
        }
        _ => {
            if a.k.is_some() {
                return Err(CliError::Config("--k applies only to --strategy log; use --delta".into()));
            }
            let delta = a
                .delta
                .or(cfg.delta)
                .ok_or_else(|| CliError::Config("--strategy proposed requires --delta (e.g. --delta 0.5)".into()))?;
            let req = SpacingRequest { cf_min: cfg.cf_min_hz, cf_max: cfg.cf_max_hz, delta, model: cfg.probe_model() };
            (propose_cfs(&req)?, json!({ "delta": delta, "probe": req.model }))
        }
    };
    prepare_out(&a.out)?;
    write_file(&a.out.join("cfs.csv"), &cfs_to_csv(&cfs))?;
    write_sidecar(
        &a.out,
        "spacing",
        json!({
            "strategy": a.strategy,
            "cf_min_hz": cfg.cf_min_hz,
            "cf_max_hz": cfg.cf_max_hz,
            "params": params,
            "count": cfs.len(),
        }),
    )
}

pub fn compensate(a: &CompensateArgs) -> CliResult<()> {
    let mut cfg = load_model(&a.model)?;
    if a.no_plus_one {
        cfg.plus_one = false;
    }
    let window = parse_window(&a.window)?;
    let mut audiogram = load_audiogram(&a.audiogram)?;
    if a.half_gain {
        audiogram = half_gain(&audiogram);
    }
    let cfs = cfg.cfs()?;
    let normal_spec = cfg.spec_for_cfs(&cfs)?;
    let profile = audiogram_to_profile(&audiogram, &cfs, cfg.hl_max_db, a.smooth, cfg.plus_one)?;
    let impaired_spec = impair_spec(&normal_spec, &profile)?;
    if a.fir_taps == 0 || a.fir_taps > cfg.nfft {
        return Err(CliError::Config(format!("--fir-taps must lie in 1..={}", cfg.nfft)));
    }
    let normal = build_filterbank(&normal_spec)?;
    let impaired = build_filterbank(&impaired_spec)?;
    let gain = optimal_gain_freq(&normal, &impaired, &GainOptions::default())?;
    let residual = restoration_residual(&normal, &impaired, &gain)?;
    let fir = fir_from_gain(&gain, a.fir_taps, window)?;

    prepare_out(&a.out)?;
    write_file(&a.out.join("gain.csv"), &gain.to_csv())?;
    write_file(&a.out.join("cfs.csv"), &cfs_to_csv(&cfs))?;
    write_file(&a.out.join("fir.csv"), &fir_csv(&fir))?;
    write_mono(&a.out.join("fir.wav"), &fir, cfg.sample_rate_hz, WavFormat::Float32)?;
    write_json(&a.out.join("residual.json"), &json!({ "relative_residual": residual }))?;
    write_sidecar(
        &a.out,
        "compensate",
        json!({
            "model": cfg,
            "audiogram": audiogram_source(&a.audiogram)?,
            "audiogram_points": audiogram.points(),
            "half_gain": a.half_gain,
            "smooth": a.smooth,
            "per_cf_hl_db": profile.per_cf_hl,
            "fir_taps": a.fir_taps,
            "window": a.window,
        }),
    )
}

pub fn gnr_sweep(a: &GnrSweepArgs) -> CliResult<()> {
    let mut cfg = load_model(&a.model)?;
    if a.no_plus_one {
        cfg.plus_one = false;
    }
    if !matches!(cfg.spacing, SpacingChoice::Named(_)) {
        return Err(CliError::Config("a sweep sets its own spacing; drop the explicit CF list".into()));
    }
    let strategies = a.strategies.iter().map(|s| SpacingStrategy::parse(s)).collect::<Result<Vec<_>, _>>()?;
    let audiogram = load_audiogram(&a.audiogram)?;
    let sweep = SweepConfig { model: cfg, k_values: a.k.clone(), strategies, ref_k: a.ref_k, smooth: a.smooth };
    let table = run_sweep(&sweep, &audiogram)?;
    for w in &table.warnings {
        eprintln!("warning: {w}");
    }
    prepare_out(&a.out)?;
    write_file(&a.out.join("gnr.csv"), &table.to_csv())?;
    let deltas: Vec<_> = table
        .rows
        .iter()
        .filter_map(|r| r.delta.map(|d| json!({ "strategy": r.strategy.name(), "k": r.k, "delta": d })))
        .collect();
    write_sidecar(
        &a.out,
        "gnr-sweep",
        json!({
            "sweep": sweep,
            "audiogram": audiogram_source(&a.audiogram)?,
            "audiogram_points": audiogram.points(),
            "proposed_deltas": deltas,
            "warnings": table.warnings,
        }),
    )
}

pub fn analyze_gain(a: &AnalyzeGainArgs) -> CliResult<()> {
    let (x, fs_x) = read_mono(&a.input)?;
    let (y, fs_y) = read_mono(&a.processed)?;
    let params = WelchParams {
        segment_len: a.welch_seg,
        overlap: a.overlap,
        window: parse_window(&a.window)?,
        nfft: a.nfft.unwrap_or(a.welch_seg),
    };
    let g = long_term_gain(&SignalBuffer::new(x, fs_x)?, &SignalBuffer::new(y, fs_y)?, &params)?;
    prepare_out(&a.dest)?;
    write_file(&a.dest.join("gain.csv"), &g.curve.to_csv())?;
    write_sidecar(
        &a.dest,
        "analyze-gain",
        json!({
            "input": { "path": a.input, "sha256": file_sha256(&a.input)? },
            "processed": { "path": a.processed, "sha256": file_sha256(&a.processed)? },
            "sample_rate_hz": fs_x,
            "welch": { "segment_len": params.segment_len, "overlap": params.overlap, "window": a.window, "nfft": params.nfft },
            "invalid_bins": g.invalid_freqs.len(),
        }),
    )
}

pub fn metrics(a: &MetricsArgs) -> CliResult<()> {
    let open = |p: &std::path::Path| -> CliResult<_> {
        let f = std::fs::File::open(p).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
        Ok(read_channel_responses(std::io::BufReader::new(f))?)
    };
    let nh = open(&a.reference)?;
    let hi = open(&a.test)?;
    if nh.shape() != hi.shape() {
        return Err(CliError::Config(format!(
            "channel responses are {:?} and {:?}",
            nh.shape(),
            hi.shape()
        )));
    }
    let mut mae = serde_json::Map::new();
    let mut mae_sum = 0.0;
    for &ms in &a.segments_ms {
        let v = segmented_mae(&nh, &hi, ms)?;
        mae_sum += v;
        mae.insert(fmt_sig(ms), json!(v));
    }
    let waves = match (&a.reference_wav, &a.test_wav) {
        (Some(x), Some(y)) => {
            let (x, fx) = read_mono(x)?;
            let (y, fy) = read_mono(y)?;
            if fx != fy || fx != nh.sample_rate {
                return Err(CliError::Config("waveform and channel-response sample rates differ".into()));
            }
            Some((x, y))
        }
        _ => None,
    };
    // Without waveforms the composite loss reduces to its MAE terms.
    let lf = match &waves {
        Some((x, y)) => Some(low_freq_penalty(x, y, nh.sample_rate, LOW_FREQ_CUTOFF_HZ)?),
        None => None,
    };
    let composite = mae_sum + lf.map_or(0.0, |v| a.gamma * v);
    let report = json!({
        "shape": [nh.shape().0, nh.shape().1],
        "segmented_mae": mae,
        "plain_mae": plain_mae(&nh, &hi)?,
        "low_freq_penalty": lf,
        "gamma": a.gamma,
        "composite_loss": composite,
        "ser_db": ser(&nh, &hi)?,
    });
    prepare_out(&a.out)?;
    write_json(&a.out.join("metrics.json"), &report)?;
    write_sidecar(
        &a.out,
        "metrics",
        json!({
            "reference": { "path": a.reference, "sha256": file_sha256(&a.reference)? },
            "test": { "path": a.test, "sha256": file_sha256(&a.test)? },
            "waveforms": waves.is_some(),
            "segments_ms": a.segments_ms,
            "gamma": a.gamma,
            "low_freq_cutoff_hz": LOW_FREQ_CUTOFF_HZ,
        }),
    )
}

pub fn nalr(a: &NalrArgs) -> CliResult<()> {
    let audiogram = load_audiogram(&a.audiogram)?;
    let p = nalr_gain(&audiogram)?;
    let window = parse_window(&a.window)?;
    prepare_out(&a.out)?;
    write_file(&a.out.join("nalr.csv"), &p.to_csv())?;
    if let Some(taps) = a.fir_taps {
        if a.nfft < 2 || taps == 0 || taps > a.nfft {
            return Err(CliError::Config(format!("--fir-taps must lie in 1..={}", a.nfft)));
        }
        let grid: Vec<f64> = dft::frequency_grid(a.nfft, a.sample_rate).iter().map(|f| f.abs()).collect();
        let curve = prescription_to_gaincurve(&p, &grid)?;
        let bins = curve.gains.iter().map(|&g| Complex64::new(g, 0.0)).collect();
        let gain = CompensationGain::from_bins(bins, a.sample_rate)?;
        let fir = fir_from_gain(&gain, taps, window)?;
        write_file(&a.out.join("fir.csv"), &fir_csv(&fir))?;
        write_mono(&a.out.join("fir.wav"), &fir, a.sample_rate, WavFormat::Float32)?;
    }
    write_sidecar(
        &a.out,
        "nalr",
        json!({
            "audiogram": audiogram_source(&a.audiogram)?,
            "audiogram_points": audiogram.points(),
            "prescription": p,
            "fir_taps": a.fir_taps,
            "sample_rate_hz": a.sample_rate,
            "nfft": a.nfft,
            "window": a.window,
        }),
    )
}

pub fn noise(a: &NoiseArgs) -> CliResult<()> {
    let kind: NoiseKind = a.kind.parse()?;
    let format: WavFormat = a.format.parse()?;
    let mut buf = make_noise(kind, a.duration, a.sample_rate, a.seed)?;
    if let Some(level) = a.spl {
        buf.normalize_spl(level)?;
    }
    prepare_out(&a.out)?;
    write_mono(&a.out.join("noise.wav"), &buf.samples, a.sample_rate, format)?;
    write_sidecar(
        &a.out,
        "noise",
        json!({
            "kind": a.kind,
            "duration_s": a.duration,
            "sample_rate_hz": a.sample_rate,
            "seed": a.seed,
            "spl_db": a.spl,
            "full_scale_spl_db": buf.spl_db,
            "format": a.format,
        }),
    )
}

pub fn filter(a: &FilterArgs) -> CliResult<()> {
    let format: WavFormat = a.format.parse()?;
    let (x, fs) = read_mono(&a.input)?;
    let (h, fs_h) = read_mono(&a.fir)?;
    if fs != fs_h {
        return Err(CliError::Config(format!("recording is at {fs} Hz, FIR at {fs_h} Hz")));
    }
    let y = convolve_fir(&x, &h);
    prepare_out(&a.out)?;
    write_mono(&a.out.join("filtered.wav"), &y, fs, format)?;
    write_sidecar(
        &a.out,
        "filter",
        json!({
            "input": { "path": a.input, "sha256": file_sha256(&a.input)? },
            "fir": { "path": a.fir, "sha256": file_sha256(&a.fir)?, "taps": h.len() },
            "sample_rate_hz": fs,
            "format": a.format,
        }),
    )
}
