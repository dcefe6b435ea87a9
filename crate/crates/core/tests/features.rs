mod common;

use emotag_core::audio_io::{part_len, AudioPart, CANONICAL_RATE};
use emotag_core::features::*;
use emotag_core::mfcc::{MfccExtractor, LOG_FLOOR, MEL_FILTERS, MFCC_COUNT};
use emotag_core::musical;
use emotag_core::spectral::{frame_signal, make_subband_plan, FramePlan, Spectrogram};
use emotag_core::stats::population_mean_std;
use emotag_core::synth;
use proptest::prelude::*;
use rand::Rng;

fn random_row(r: &mut impl Rng, len: usize) -> Vec<f64> {
    // Sparse-ish rows so roll-off and centroid move around.
    (0..len)
        .map(|_| if r.gen_bool(0.3) { r.gen_range(0.0..5.0) } else { 0.0 })
        .collect()
}

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(1e-300) || (a - b).abs() <= 1e-300
}

fn sgn(x: f64) -> i32 {
    if x >= 0.0 {
        1
    } else {
        -1
    }
}

#[test]
fn per_frame_measures_match_direct_oracles() {
    let mut r = synth::rng(2024);
    for _ in 0..100 {
        let len = r.gen_range(2..2048);
        let prev = random_row(&mut r, len);
        let row = random_row(&mut r, len);

        let mut total = 0.0;
        for a in &row {
            total += a;
        }
        assert!(rel_close(row_intensity(&row), total, 1e-9));

        if total > 0.0 {
            let mut moment = 0.0;
            for (k, a) in row.iter().enumerate() {
                moment += k as f64 * a;
            }
            assert!(rel_close(row_centroid(&row).unwrap(), moment / total, 1e-9));

            let mut k = 0;
            while row[..=k].iter().sum::<f64>() < 0.85 * total {
                k += 1;
            }
            assert_eq!(row_rolloff(&row), Some(k));
        } else {
            assert_eq!(row_centroid(&row), None);
        }

        let mut flux = 0.0;
        for i in 0..len {
            flux += (row[i] - prev[i]).powi(2);
        }
        assert!(rel_close(row_flux(&prev, &row), flux, 1e-9));

        let frame: Vec<f64> = (0..len).map(|_| r.gen_range(-1.0..1.0)).collect();
        let zc: i32 = frame.windows(2).map(|w| (sgn(w[1]) - sgn(w[0])).abs()).sum::<i32>() / 2;
        assert_eq!(frame_zero_crossings(&frame) as i32, zc);
    }
}

#[test]
fn rolloff_and_ratios_on_flat_spectrum() {
    let flat = vec![1.0; 2048];
    assert_eq!(row_rolloff(&flat), Some(1740));
    let plan = make_subband_plan(CANONICAL_RATE, 10, 4096).unwrap();
    let d = row_subband_ratios(&flat, &plan).unwrap();
    assert!((d[9] - 0.5).abs() < 1e-12);
    assert!((d[8] - 0.25).abs() < 1e-12);
    for i in 1..9 {
        assert!(d[i] < d[i + 1]);
    }
}

#[test]
fn mfcc_of_1khz_sine_matches_reference() {
    let part = synth::canonical_part(synth::sine(1000.0, 0.8, part_len(CANONICAL_RATE), CANONICAL_RATE));
    let plan = FramePlan::for_part(&part, 124).unwrap();
    let spec = Spectrogram::compute(&part, &plan).unwrap();
    for first in [0, 1] {
        let ex = MfccExtractor::for_spectrogram(&spec, first);
        for n in [0, 50, 123] {
            let got = ex.coefficients(spec.row(n));
            let want = common::reference_mfcc(
                spec.row(n),
                CANONICAL_RATE as f64,
                plan.fft_size,
                MEL_FILTERS,
                first,
                MFCC_COUNT,
            );
            for (g, w) in got.iter().zip(&want) {
                assert!((g - w).abs() <= 1e-6 * w.abs().max(1.0), "{g} vs {w}");
            }
        }
    }
}

#[test]
fn mfcc_of_silence_is_the_floor() {
    let ex = MfccExtractor::new(CANONICAL_RATE, 4096, 2048, 0);
    let c = ex.coefficients(&vec![0.0; 2048]);
    assert!((c[0] - (MEL_FILTERS as f64).sqrt() * LOG_FLOOR.ln()).abs() < 1e-9);
    assert!(c[1..].iter().all(|v| v.abs() < 1e-9));
}

#[test]
fn energy_stats_match_two_pass_oracle() {
    let part = synth::random_part(77);
    let plan = FramePlan::for_part(&part, 124).unwrap();
    let frames = frame_signal(&part, &plan).unwrap();
    let energies: Vec<f64> = frames
        .iter()
        .map(|f| f.iter().map(|x| x * x).sum::<f64>() / f.len() as f64)
        .collect();
    let mean = energies.iter().sum::<f64>() / energies.len() as f64;
    let var = energies.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / energies.len() as f64;
    let (m, s) = energy_stats(&part, &plan).unwrap();
    assert!((m - mean).abs() < 1e-12);
    assert!((s - var.sqrt()).abs() < 1e-12);
}

#[test]
fn energy_stats_of_half_silent_part() {
    let len = part_len(CANONICAL_RATE);
    let plan = FramePlan::new(len, 124).unwrap();
    let used = plan.frame_len * 124;
    let samples: Vec<f64> = (0..len).map(|i| if i < used / 2 { 0.5 } else { 0.0 }).collect();
    let part = synth::canonical_part(samples);
    let (m, s) = energy_stats(&part, &plan).unwrap();
    assert!((m - 0.125).abs() < 1e-12);
    assert!((s - 0.125).abs() < 1e-12);
}

#[test]
fn autocorrelation_of_noise_and_square_wave() {
    let noise = synth::canonical_part(synth::white_noise(31, part_len(CANONICAL_RATE), 0.5));
    assert!(autocorr_features(&noise).iter().all(|c| c.abs() < 0.02));

    let square: Vec<f64> = (0..part_len(CANONICAL_RATE))
        .map(|i| if i % 12 < 6 { 1.0 } else { -1.0 })
        .collect();
    let ac = autocorr_features(&synth::canonical_part(square));
    let argmax = ac.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
    assert_eq!(argmax + 1, 12);

    let constant = AudioPart::from_samples_unchecked(vec![1.0; 1000], CANONICAL_RATE).unwrap();
    for (i, c) in autocorr_features(&constant).iter().enumerate() {
        assert!((c - (1000 - i - 1) as f64 / 1000.0).abs() < 1e-12);
    }
}

#[test]
fn aggregate_vector_agrees_with_individual_operations() {
    let part = synth::canonical_part(synth::sine(441.0, 0.7, part_len(CANONICAL_RATE), CANONICAL_RATE));
    let v = extract_features(&part, &FeatureConfig::default()).unwrap();
    let plan = FramePlan::for_part(&part, 124).unwrap();
    let spec = Spectrogram::compute(&part, &plan).unwrap();
    let bands = make_subband_plan(CANONICAL_RATE, 10, plan.fft_size).unwrap();

    let stats = |xs: Vec<f64>| population_mean_std(&xs);
    let (im, is) = stats((0..124).map(|n| frame_intensity(&spec, n)).collect());
    assert_eq!(v.get("intensity_mean"), Some(im));
    assert_eq!(v.get("intensity_std"), Some(is));
    let (dm, _) = stats((0..124).map(|n| subband_ratios(&spec, &bands, n).unwrap()[4]).collect());
    assert_eq!(v.get("subband_05_mean"), Some(dm));
    let (cm, _) = stats((0..124).map(|n| spectral_centroid(&spec, n).unwrap()).collect());
    assert_eq!(v.get("centroid_mean"), Some(cm));
    let (rm, _) = stats((0..124).map(|n| rolloff(&spec, n).unwrap() as f64).collect());
    assert_eq!(v.get("rolloff_mean"), Some(rm));
    let (fm, fs) = stats((1..124).map(|n| spectral_flux(&spec, n).unwrap()).collect());
    assert_eq!(v.get("flux_mean"), Some(fm));
    assert_eq!(v.get("flux_std"), Some(fs));
    let (zm, _) = stats(zero_crossings(&part, &plan).unwrap().into_iter().map(|z| z as f64).collect());
    assert_eq!(v.get("zcr_mean"), Some(zm));
    assert_eq!(v.get("autocorr_05"), Some(autocorr_features(&part)[4]));
    let tempo = musical::tempo_and_clarity(&musical::onset_envelope(&part).unwrap());
    assert_eq!(v.get("tempo_bpm"), Some(tempo.bpm));
    assert_eq!(v.get("inharmonicity"), Some(musical::inharmonicity(&part, 124).unwrap()));

    let again = extract_features(&part, &FeatureConfig::default()).unwrap();
    assert_eq!(
        v.values().iter().map(|x| x.to_bits()).collect::<Vec<_>>(),
        again.values().iter().map(|x| x.to_bits()).collect::<Vec<_>>()
    );
}

#[test]
fn silent_part_gives_a_finite_vector() {
    let part = synth::canonical_part(vec![0.0; part_len(CANONICAL_RATE)]);
    let v = extract_features(&part, &FeatureConfig::default()).unwrap();
    assert_eq!(v.values().len(), FEATURE_COUNT);
    assert!(v.values().iter().all(|x| x.is_finite()));
    assert_eq!(v.get("intensity_mean"), Some(0.0));
    assert_eq!(v.get("tempo_bpm"), Some(0.0));
    let c0 = v.get("mfcc_00_mean").unwrap();
    assert!((c0 - (MEL_FILTERS as f64).sqrt() * LOG_FLOOR.ln()).abs() < 1e-9);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn amplitude_scaling_covariance(seed in any::<u64>(), gain in 0.05f64..8.0) {
        let base = synth::random_part(seed);
        let scaled = synth::canonical_part(base.samples().iter().map(|x| x * gain).collect());
        let plan = FramePlan::for_part(&base, 124).unwrap();
        let a = Spectrogram::compute(&base, &plan).unwrap();
        let b = Spectrogram::compute(&scaled, &plan).unwrap();
        let bands = make_subband_plan(CANONICAL_RATE, 10, plan.fft_size).unwrap();
        let close = |x: f64, y: f64| (x - y).abs() <= 1e-9 * x.abs().max(1.0);

        for n in (0..124).step_by(7) {
            prop_assert!(close(frame_intensity(&b, n), gain * frame_intensity(&a, n)));
            let (da, db) = (subband_ratios(&a, &bands, n).unwrap(), subband_ratios(&b, &bands, n).unwrap());
            for (x, y) in da.iter().zip(&db) {
                prop_assert!(close(*x, *y));
            }
            prop_assert!(close(spectral_centroid(&a, n).unwrap(), spectral_centroid(&b, n).unwrap()));
            prop_assert_eq!(rolloff(&a, n), rolloff(&b, n));
        }
        let (ea, _) = energy_stats(&base, &plan).unwrap();
        let (eb, _) = energy_stats(&scaled, &plan).unwrap();
        prop_assert!(close(eb, gain * gain * ea));
        prop_assert_eq!(zero_crossings(&base, &plan).unwrap(), zero_crossings(&scaled, &plan).unwrap());
        for (x, y) in autocorr_features(&base).iter().zip(autocorr_features(&scaled).iter()) {
            prop_assert!(close(*x, *y));
        }

        // A gain shifts only the zeroth cepstral coefficient, where bands sit
        // above the log floor.
        let ex = MfccExtractor::for_spectrogram(&a, 0);
        let (ca, cb) = (ex.coefficients(a.row(10)), ex.coefficients(b.row(10)));
        let shift = (MEL_FILTERS as f64).sqrt() * 2.0 * gain.ln();
        prop_assert!((cb[0] - ca[0] - shift).abs() < 1e-6);
        for (x, y) in ca[1..].iter().zip(&cb[1..]) {
            prop_assert!((x - y).abs() < 1e-6);
        }
    }

    #[test]
    fn feature_ranges_hold(seed in any::<u64>()) {
        let part = synth::random_part(seed);
        let plan = FramePlan::for_part(&part, 124).unwrap();
        let spec = Spectrogram::compute(&part, &plan).unwrap();
        for n in 0..124 {
            prop_assert!(frame_intensity(&spec, n) >= 0.0);
        }
        for n in 1..124 {
            prop_assert!(spectral_flux(&spec, n).unwrap() >= 0.0);
        }
        prop_assert!(zero_crossings(&part, &plan).unwrap().iter().all(|&z| z < plan.frame_len));
        prop_assert!(autocorr_features(&part).iter().all(|c| (-1.0..=1.0).contains(c)));
    }
}
