use criterion::{black_box, criterion_group, criterion_main, Criterion};

use emotag_core::classifier::{loocv, TrainParams};
use emotag_core::dataset::Emotion;
use emotag_core::features::{extract_features, FeatureConfig};
use emotag_core::spectral::{FramePlan, Spectrogram};
use emotag_core::{analysis, synth};

fn bench_features(c: &mut Criterion) {
    let part = synth::random_part(7);
    let plan = FramePlan::for_part(&part, 124).unwrap();
    c.bench_function("spectrogram_124_frames", |b| {
        b.iter(|| Spectrogram::compute(black_box(&part), &plan).unwrap())
    });
    let config = FeatureConfig::default();
    c.bench_function("extract_features_part", |b| {
        b.iter(|| extract_features(black_box(&part), &config).unwrap())
    });
}

fn bench_analysis(c: &mut Criterion) {
    let ds = synth::gaussian_clusters(11, &Emotion::ALL, 16, 8.0);
    c.bench_function("pairwise_max_separability_96x87", |b| {
        b.iter(|| analysis::pairwise_max_separability(black_box(&ds)).unwrap())
    });
    let params = TrainParams::default();
    let mut group = c.benchmark_group("classifier");
    group.sample_size(10);
    group.bench_function("loocv_96_rows", |b| b.iter(|| loocv(black_box(&ds), &params).unwrap()));
    group.finish();
}

criterion_group!(benches, bench_features, bench_analysis);
criterion_main!(benches);
