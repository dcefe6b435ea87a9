//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

mod common;

use std::fs;
use std::time::{Duration, Instant};

use emotag_core::analysis::{fisher_separability, label_summary, SeparabilityMatrix};
use emotag_core::audio_io::{encode_wav_pcm16, part_len, AudioBuffer, CANONICAL_RATE};
use emotag_core::classifier::{loocv, SvmModel, TrainParams};
use emotag_core::features::{extract_features, subband_ratios, zero_crossings, FeatureConfig};
use emotag_core::musical::{inharmonicity, mode_strength, onset_envelope, tempo_and_clarity, ModeSign};
use emotag_core::pipeline::{extract_manifest, read_manifest, PipelineConfig};
use emotag_core::spectral::{magnitude_spectrum, make_subband_plan, FramePlan, Spectrogram};
use emotag_core::synth;
use emotag_core::{Emotion, StdConvention};
use rand::Rng;

type Outcome = Result<String, String>;

fn check(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn dft_oracle() -> Outcome {
    let start = Instant::now();
    let mut r = synth::rng(101);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let len = r.gen_range(2..=1024usize);
        let n = len.next_power_of_two();
        let frame: Vec<f64> = (0..len).map(|_| r.gen_range(-1.0..1.0)).collect();
        let got = magnitude_spectrum(&frame, n).map_err(|e| e.to_string())?;
        let want = common::naive_dft_magnitudes(&common::windowed(&frame), n);
        worst = worst.max(common::max_relative_error(&got, &want));
    }
    let elapsed = start.elapsed();
    check(
        worst <= 1e-6 && elapsed < Duration::from_secs(10),
        format!("max relative error {worst:.2e}, {:.2} s", elapsed.as_secs_f64()),
    )
}

fn subband_partition() -> Outcome {
    let plan_bands = make_subband_plan(CANONICAL_RATE, 10, 4096).map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    let mut frames = 0;
    for seed in 0..20 {
        let part = synth::random_part(seed);
        let plan = FramePlan::for_part(&part, 124).map_err(|e| e.to_string())?;
        let spec = Spectrogram::compute(&part, &plan).map_err(|e| e.to_string())?;
        for n in 0..spec.n_frames() {
            if let Some(d) = subband_ratios(&spec, &plan_bands, n) {
                worst = worst.max((d.iter().sum::<f64>() - 1.0).abs());
                frames += 1;
            }
        }
    }
    check(
        worst <= 1e-9 && frames == 20 * 124,
        format!("{frames} frames, max |sum - 1| = {worst:.2e}"),
    )
}

fn zero_crossing_rate() -> Outcome {
    let part = synth::canonical_part(synth::sine(441.0, 0.9, part_len(CANONICAL_RATE), CANONICAL_RATE));
    let plan = FramePlan::for_part(&part, 124).map_err(|e| e.to_string())?;
    let zc = zero_crossings(&part, &plan).map_err(|e| e.to_string())?;
    let expected = 2.0 * 441.0 * plan.frame_len as f64 / CANONICAL_RATE as f64;
    let worst = zc
        .iter()
        .map(|&z| (z as f64 - expected).abs() / expected)
        .fold(0.0, f64::max);
    check(worst <= 0.05, format!("expected {expected:.1}, worst deviation {:.2}%", 100.0 * worst))
}

fn fisher_analytic() -> Outcome {
    let v = fisher_separability(&[-1.0, 1.0], &[1.0, 3.0]).map_err(|e| e.to_string())?;
    check((v - 2.0).abs() <= 1e-12, format!("separability {v}"))
}

fn printed_table_summary() -> Outcome {
    let table: [[f64; 6]; 6] = [
        [0.0, 1.46, 0.89, 0.33, 1.29, 1.25],
        [1.46, 0.0, 0.06, 0.83, 1.62, 0.35],
        [0.89, 0.06, 0.0, 0.78, 2.08, 0.47],
        [0.33, 0.83, 0.78, 0.0, 0.44, 0.54],
        [1.29, 1.62, 2.08, 0.44, 0.0, 1.83],
        [1.25, 0.35, 0.47, 0.54, 1.83, 0.0],
    ];
    let values = table
        .iter()
        .enumerate()
        .map(|(i, row)| row.iter().enumerate().map(|(j, &v)| (i != j).then_some(v)).collect())
        .collect();
    let m = SeparabilityMatrix::from_values(Emotion::ALL.to_vec(), values).map_err(|e| e.to_string())?;
    let summary = label_summary(&m, StdConvention::Sample);
    let happy = summary.iter().find(|s| s.label == Emotion::Happy).expect("happy row");
    check(
        (happy.average - 1.04).abs() <= 0.01,
        format!("happy average {:.4}, std {:.4}", happy.average, happy.std),
    )
}

fn synthetic_loocv() -> Outcome {
    let start = Instant::now();
    let params = TrainParams::default();
    let clusters = synth::gaussian_clusters(7, &Emotion::ALL, 20, 8.0);
    let report = loocv(&clusters, &params).map_err(|e| e.to_string())?;
    let min_label = report.per_label_accuracy.iter().cloned().fold(1.0, f64::min);
    let noise = synth::random_label_noise(7, 120);
    let noise_acc = loocv(&noise, &params).map_err(|e| e.to_string())?.overall_accuracy;
    let elapsed = start.elapsed();
    check(
        min_label >= 0.95 && (0.05..=0.35).contains(&noise_acc) && elapsed < Duration::from_secs(60),
        format!(
            "clusters min per-label {:.1}%, noise overall {:.1}%, {:.2} s",
            100.0 * min_label,
            100.0 * noise_acc,
            elapsed.as_secs_f64()
        ),
    )
}

fn musical_descriptors() -> Outcome {
    let len = part_len(CANONICAL_RATE);
    let rate = CANONICAL_RATE;
    let mut tempos = Vec::new();
    for bpm in [120.0, 90.0] {
        let part = synth::canonical_part(synth::click_train(bpm, len, rate, 0.25));
        let env = onset_envelope(&part).map_err(|e| e.to_string())?;
        tempos.push((bpm, tempo_and_clarity(&env).bpm));
    }
    let tempo_ok = tempos.iter().all(|(want, got)| (want - got).abs() <= 2.0);

    let harmonic = synth::canonical_part(synth::partials(
        &[(220.0, 0.5), (440.0, 0.25), (660.0, 0.17), (880.0, 0.12)],
        len,
        rate,
    ));
    let inharmonic = synth::canonical_part(synth::partials(&[(220.0, 0.5), (330.0, 0.5)], len, rate));
    let ih = inharmonicity(&harmonic, 124).map_err(|e| e.to_string())?;
    let ii = inharmonicity(&inharmonic, 124).map_err(|e| e.to_string())?;

    let mode_of = |notes: &[f64]| -> Result<f64, String> {
        let part = synth::canonical_part(synth::chord(notes, 0.3, len, rate));
        let plan = FramePlan::for_part(&part, 124).map_err(|e| e.to_string())?;
        let spec = Spectrogram::compute(&part, &plan).map_err(|e| e.to_string())?;
        Ok(mode_strength(&spec, ModeSign::MajorMinusMinor))
    };
    let major = mode_of(&[60.0, 64.0, 67.0])?;
    let minor = mode_of(&[60.0, 63.0, 67.0])?;

    check(
        tempo_ok && ih < ii && major > 0.0 && minor < 0.0,
        format!(
            "tempo {:?}, inharmonicity harmonic {ih:.4} < inharmonic {ii:.4}, mode major {major:.3} minor {minor:.3}",
            tempos.iter().map(|(_, g)| format!("{g:.2}")).collect::<Vec<_>>()
        ),
    )
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let len = part_len(CANONICAL_RATE) + CANONICAL_RATE as usize;
    let mut manifest = String::from("path,label,start\n");
    for (i, label) in Emotion::ALL.iter().take(3).enumerate() {
        let samples: Vec<f64> = synth::white_noise(i as u64, len, 0.2)
            .iter()
            .zip(synth::sine(200.0 * (i + 1) as f64, 0.5, len, CANONICAL_RATE))
            .map(|(a, b)| a + b)
            .collect();
        let buf = AudioBuffer::new(samples, CANONICAL_RATE).map_err(|e| e.to_string())?;
        let name = format!("track{i}.wav");
        fs::write(dir.path().join(&name), encode_wav_pcm16(&buf)).map_err(|e| e.to_string())?;
        manifest.push_str(&format!("{name},{label},0.5\n"));
    }
    let manifest_path = dir.path().join("manifest.csv");
    fs::write(&manifest_path, manifest).map_err(|e| e.to_string())?;
    let rows = read_manifest(&manifest_path).map_err(|e| e.to_string())?;
    let config = PipelineConfig::default();
    let run = |jobs| -> Result<Vec<u8>, String> {
        let (table, failures) = extract_manifest(&rows, &config, jobs).map_err(|e| e.to_string())?;
        if !failures.is_empty() {
            return Err(format!("{} rows failed", failures.len()));
        }
        let mut out = Vec::new();
        table.write_csv(&mut out).map_err(|e| e.to_string())?;
        Ok(out)
    };
    let first = run(1)?;
    let second = run(4)?;
    let csv_ok = first == second;

    let ds = synth::gaussian_clusters(3, &Emotion::ALL, 10, 8.0);
    let model = SvmModel::train(&ds, &TrainParams::default()).map_err(|e| e.to_string())?;
    let mut bytes = Vec::new();
    model.save(&mut bytes).map_err(|e| e.to_string())?;
    let loaded = SvmModel::load(bytes.as_slice()).map_err(|e| e.to_string())?;
    let mut r = synth::rng(55);
    let mut mismatches = 0;
    for _ in 0..1000 {
        let x: Vec<f64> = (0..ds.n_features()).map(|_| r.gen_range(-6.0..10.0)).collect();
        if model.predict(&x).map_err(|e| e.to_string())? != loaded.predict(&x).map_err(|e| e.to_string())? {
            mismatches += 1;
        }
    }
    check(
        csv_ok && mismatches == 0,
        format!(
            "csv identical: {csv_ok} ({} bytes), model round-trip mismatches: {mismatches}/1000",
            first.len()
        ),
    )
}

fn throughput() -> Outcome {
    use rayon::prelude::*;
    let start = Instant::now();
    let config = FeatureConfig::default();
    let done: Result<Vec<_>, _> = (0..100u64)
        .into_par_iter()
        .map(|seed| extract_features(&synth::random_part(seed), &config))
        .collect();
    let n = done.map_err(|e| e.to_string())?.len();
    let elapsed = start.elapsed();
    check(
        n == 100 && elapsed < Duration::from_secs(120),
        format!("{n} parts in {:.2} s", elapsed.as_secs_f64()),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("dft-oracle", dft_oracle),
        ("subband-partition", subband_partition),
        ("zero-crossings", zero_crossing_rate),
        ("fisher-analytic", fisher_analytic),
        ("printed-table-summary", printed_table_summary),
        ("synthetic-loocv", synthetic_loocv),
        ("tempo-inharmonicity-mode", musical_descriptors),
        ("end-to-end-determinism", determinism),
        ("throughput", throughput),
    ];
    println!("N/A  published-numbers: the original 93-track corpus is unavailable; covered by the checks below");
    let mut failed = 0;
    for (name, f) in criteria {
        match f() {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {name}: {detail}");
            }
        }
    }
    println!("{} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
