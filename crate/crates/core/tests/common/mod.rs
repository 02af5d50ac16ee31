#![allow(dead_code)]

use batchforge::config::{
    validate_config, BatchRounding, Resolution, ResolutionSet, SamplerConfig, Strategy, ValidConfig, VideoSettings,
};
use batchforge::rng::{SeededRng, StreamKey};
use batchforge::trainer::{Architecture, Model};
use proptest::prelude::*;
use proptest::strategy::Strategy as _;

pub fn sampler(strategy: Strategy, dataset_size: u64, base_batch: u64, epochs: u64) -> SamplerConfig {
    SamplerConfig {
        strategy,
        dataset_size,
        base_batch,
        base_resolution: Resolution::square(224),
        resolutions: ResolutionSet::standard(),
        epochs,
        world_size: 1,
        seed: 7,
        drop_last: false,
        batch_rounding: BatchRounding::MultipleOfWorld,
        min_batch: 1,
        video: if strategy == Strategy::VideoVbs { Some(video()) } else { None },
    }
}

pub fn video() -> VideoSettings {
    VideoSettings {
        frames: vec![4, 8, 16],
        clips: vec![1, 2],
        base_frames: 8,
        base_clips: 1,
    }
}

pub fn valid(c: SamplerConfig) -> ValidConfig {
    validate_config(c).expect("valid config")
}

pub fn any_strategy() -> impl proptest::strategy::Strategy<Value = Strategy> {
    prop::sample::select(Strategy::ALL.to_vec())
}

pub fn any_rounding() -> impl proptest::strategy::Strategy<Value = BatchRounding> {
    prop::sample::select(BatchRounding::ALL.to_vec())
}

/// A non-empty ascending subset of the standard sides with a base drawn from it.
fn resolution_set() -> impl proptest::strategy::Strategy<Value = (ResolutionSet, Resolution)> {
    prop::sample::subsequence(vec![96u32, 128, 160, 192, 224, 256, 288, 320], 1..=8).prop_flat_map(|sides| {
        let n = sides.len();
        (Just(sides), 0..n).prop_map(|(sides, i)| (ResolutionSet::squares(&sides), Resolution::square(sides[i])))
    })
}

/// Valid sampler configs with `drop_last = false` and up to `max_n` samples.
pub fn any_config(max_n: u64) -> impl proptest::strategy::Strategy<Value = ValidConfig> {
    (
        any_strategy(),
        1..=max_n,
        1u64..=96,
        resolution_set(),
        1u32..=8,
        any::<u64>(),
        any_rounding(),
        1u64..=4,
    )
        .prop_map(|(strategy, n, b, (resolutions, base), world, seed, rounding, min)| {
            valid(SamplerConfig {
                strategy,
                dataset_size: n,
                base_batch: b,
                base_resolution: base,
                resolutions,
                epochs: 2,
                world_size: world,
                seed,
                drop_last: false,
                batch_rounding: rounding,
                min_batch: min.min(b),
                video: (strategy == Strategy::VideoVbs).then(video),
            })
        })
}

/// `n` cases without on-disk regression files.
pub fn cases(n: u32) -> ProptestConfig {
    ProptestConfig {
        cases: n,
        failure_persistence: None,
        ..ProptestConfig::default()
    }
}

/// `stream[epoch][id] = (correct, confidence)`. Each sample drifts around
/// its own base confidence so some stay easy, some hover near thresholds.
pub fn prediction_stream(seed: u64, n: usize, epochs: u64) -> Vec<Vec<(bool, f64)>> {
    let bases: Vec<f64> = (0..n)
        .map(|i| SeededRng::new(seed, StreamKey::new(0, i as u64, "base")).next_f64())
        .collect();
    (0..epochs)
        .map(|e| {
            (0..n)
                .map(|i| {
                    let mut rng = SeededRng::new(seed, StreamKey::new(e + 1, i as u64, "drift"));
                    let c = (bases[i] + 0.15 * rng.standard_normal()).clamp(0.0, 1.0);
                    (c > 0.3 || rng.next_f64() < 0.2, c)
                })
                .collect()
        })
        .collect()
}

struct Instance {
    model: Model,
    inputs: Vec<Vec<f64>>,
    targets: Vec<usize>,
    eps: f64,
}

fn instance(seed: u64) -> Instance {
    let mut rng = SeededRng::new(seed, StreamKey::new(0, 0, "instance"));
    let input_dim = 1 + rng.below(6).unwrap() as usize;
    let classes = 2 + rng.below(4).unwrap() as usize;
    let architecture = if rng.next_f64() < 0.5 {
        Architecture::Linear
    } else {
        Architecture::Mlp {
            hidden: 1 + rng.below(6).unwrap() as usize,
        }
    };
    let mut model = Model::new(architecture, input_dim, classes, seed);
    // non-zero biases so every parameter is exercised
    for p in &mut model.params {
        *p += 0.1 * rng.standard_normal();
    }
    let batch = 1 + rng.below(4).unwrap() as usize;
    let inputs = (0..batch)
        .map(|_| (0..input_dim).map(|_| rng.standard_normal()).collect())
        .collect();
    let targets = (0..batch).map(|_| rng.below(classes as u64).unwrap() as usize).collect();
    Instance {
        model,
        inputs,
        targets,
        eps: 0.5 * rng.next_f64(),
    }
}

fn norm(v: impl Iterator<Item = f64>) -> f64 {
    v.map(|x| x * x).sum::<f64>().sqrt()
}

/// Relative error (vector norm) between the analytic gradient and central
/// differences for the random instance `seed`.
pub fn gradient_check(seed: u64) -> f64 {
    let h = 1e-5;
    let inst = instance(seed);
    let loss = |p: &[f64]| {
        inst.model
            .batch_loss_grad_with(p, &inst.inputs, &inst.targets, inst.eps)
            .unwrap()
            .mean_loss
    };
    let analytic = inst
        .model
        .batch_loss_grad(&inst.inputs, &inst.targets, inst.eps)
        .unwrap()
        .grad;
    let mut p = inst.model.params.clone();
    let numeric: Vec<f64> = (0..p.len())
        .map(|i| {
            let orig = p[i];
            p[i] = orig + h;
            let up = loss(&p);
            p[i] = orig - h;
            let down = loss(&p);
            p[i] = orig;
            (up - down) / (2.0 * h)
        })
        .collect();
    let diff = norm(analytic.iter().zip(&numeric).map(|(a, n)| a - n));
    let scale = norm(analytic.iter().copied()) + norm(numeric.iter().copied());
    diff / scale.max(1e-12)
}
