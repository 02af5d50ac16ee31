//! One pass/fail line per acceptance criterion. Runs without the libtest
//! harness so the summary reads top to bottom; exits nonzero on any failure.

mod common;

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use batchforge::analysis::{cost_report, count_updates, simulate_updates, MemorySpec};
use batchforge::config::{validate_config, BatchRounding, SamplerConfig, Strategy, ValidConfig};
use batchforge::presets::{load_preset, SyntheticRecipe, IMAGENET_TRAIN_SIZE, PRESET_NAMES};
use batchforge::samplers::{planner_for, shard_for_rank, write_schedule_jsonl, SampleId};
use batchforge::set::{SetConfig, SetState};
use batchforge::trainer::{cosine_lr, label_smoothed_ce, train, TrainerConfig};
use common::{any_config, prediction_stream, sampler, valid};
use proptest::test_runner::TestRunner;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn imagenet(name: &str, strategy: Strategy) -> ValidConfig {
    let (s, _) = load_preset(name).unwrap();
    valid(s.with_strategy(strategy))
}

fn within(value: f64, target: f64, tol: f64) -> bool {
    (value - target).abs() <= tol * target
}

fn update_counts() -> Outcome {
    // (preset, fbs target, vbs target, relative tolerance on fbs)
    let targets = [
        ("resnet50", 188_000.0, 143_000.0, 0.005),
        ("mobilenetv2", 375_000.0, 288_000.0, 0.02),
        ("mobilenetv1", 751_000.0, 574_000.0, 0.02),
        ("mobilenetv3", 188_000.0, 144_000.0, 0.02),
    ];
    let mut notes = Vec::new();
    for (name, fbs, vbs, tol) in targets {
        let start = Instant::now();
        let ssc = count_updates(&imagenet(name, Strategy::SscFbs));
        let msc = count_updates(&imagenet(name, Strategy::MscFbs));
        let var = count_updates(&imagenet(name, Strategy::MscVbs));
        let elapsed = start.elapsed();
        check(imagenet(name, Strategy::SscFbs).dataset_size == IMAGENET_TRAIN_SIZE, "dataset size")?;
        check(within(ssc.exact as f64, fbs, tol), format!("{name} ssc {}", ssc.exact))?;
        check(within(msc.exact as f64, fbs, tol), format!("{name} msc_fbs {}", msc.exact))?;
        if name == "resnet50" {
            check(
                (141_000.0..=146_000.0).contains(&var.closed_form),
                format!("resnet50 msc_vbs expected {:.0}", var.closed_form),
            )?;
        } else {
            check(within(var.closed_form, vbs, 0.02), format!("{name} msc_vbs {:.0}", var.closed_form))?;
        }
        check(elapsed < Duration::from_secs(1), format!("{name} took {elapsed:?}"))?;
        notes.push(format!("{name} {}/{}/{:.0}", ssc.exact, msc.exact, var.closed_form));
    }
    for name in PRESET_NAMES.iter().filter(|n| **n != "synthetic") {
        let ssc = count_updates(&imagenet(name, Strategy::SscFbs)).exact as f64;
        let var = count_updates(&imagenet(name, Strategy::MscVbs)).exact as f64;
        let ratio = var / ssc;
        check((0.755..=0.775).contains(&ratio), format!("{name} ratio {ratio:.4}"))?;
    }
    Ok(notes.join(", "))
}

fn memory_proxy() -> Outcome {
    let mem = MemorySpec::default();
    let ssc = cost_report(&imagenet("resnet50", Strategy::SscFbs), mem);
    let msc = cost_report(&imagenet("resnet50", Strategy::MscFbs), mem);
    let ratio = msc.peak_input_bytes as f64 / ssc.peak_input_bytes as f64;
    let want = (320.0f64 * 320.0) / (224.0 * 224.0);
    check((ratio - want).abs() <= 0.01, format!("peak ratio {ratio:.4}"))?;

    let vbs = imagenet("resnet50", Strategy::MscVbs);
    let target = vbs.global_batch() * vbs.base_resolution.pixel_count();
    let world = u64::from(vbs.world_size);
    let planner = planner_for(vbs.clone());
    let mut worst = 0.0f64;
    for epoch in 0..vbs.epochs {
        for s in planner.plan_shapes(epoch, vbs.dataset_size) {
            let px = s.resolution.pixel_count();
            let slack = match vbs.batch_rounding {
                BatchRounding::MultipleOfWorld => px * world,
                _ => px,
            };
            let off = (s.batch_size * px).abs_diff(target);
            check(off <= slack, format!("epoch {epoch}: batch {} at {}", s.batch_size, s.resolution))?;
            worst = worst.max(off as f64 / target as f64);
        }
    }
    Ok(format!("peak ratio {ratio:.4}, vbs max deviation {:.2}%", worst * 100.0))
}

fn monte_carlo() -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0f64;
    for name in PRESET_NAMES.iter().filter(|n| **n != "synthetic") {
        let (s, _) = load_preset(name).unwrap();
        let config = valid(s);
        let sim = simulate_updates(&config, 100).map_err(|e| e.to_string())?;
        let closed = count_updates(&config).closed_form;
        let rel = (sim.mean - closed).abs() / closed;
        check(rel <= 0.01, format!("{name}: mean {:.0} vs {closed:.0}", sim.mean))?;
        worst = worst.max(rel);
    }
    let elapsed = start.elapsed();
    check(elapsed < Duration::from_secs(30), format!("took {elapsed:?}"))?;
    Ok(format!("max deviation {:.3}% in {:.1}s", worst * 100.0, elapsed.as_secs_f64()))
}

fn set_experiment() -> Outcome {
    let start = Instant::now();
    let (sampler, trainer) = load_preset("synthetic").unwrap();
    let config = valid(sampler);
    let recipe = SyntheticRecipe::default();
    let (data, holdout) = recipe
        .datasets(config.dataset_size as usize, config.seed)
        .map_err(|e| e.to_string())?;
    check(data.len() == 10_000 && data.classes() == 10 && config.epochs == 30, "synthetic preset shape")?;
    let run = |set: Option<&SetConfig>| train(recipe.model(&data), &data, &holdout, &config, &trainer, set).unwrap();

    let baseline = run(None);
    let set = run(Some(&SetConfig::new(0.7, 2).unwrap()));
    let neutral = run(Some(&SetConfig::new(1.0, 2).unwrap()));
    let elapsed = start.elapsed();

    let drop = (baseline.final_accuracy - set.final_accuracy) * 100.0;
    let saved = 1.0 - set.total_updates as f64 / baseline.total_updates as f64;
    check(drop <= 1.0, format!("accuracy {:.4} vs {:.4}", set.final_accuracy, baseline.final_accuracy))?;
    check(saved >= 0.10, format!("only {:.1}% fewer updates", saved * 100.0))?;
    check(neutral == baseline, "tau = 1 run differs from baseline")?;
    check(set.readded_count > 0, "no re-add events")?;
    check(elapsed < Duration::from_secs(120), format!("took {elapsed:?}"))?;
    Ok(format!(
        "accuracy {:.4} vs {:.4}, {:.1}% fewer updates, {} re-added, {:.1}s",
        set.final_accuracy,
        baseline.final_accuracy,
        saved * 100.0,
        set.readded_count,
        elapsed.as_secs_f64()
    ))
}

fn set_monotonicity() -> Outcome {
    let stream = prediction_stream(17, 2_000, 15);
    let planner = planner_for(valid(sampler(Strategy::MscVbs, 2_000, 16, 15)));
    let totals: Vec<u64> = [0.1, 0.3, 0.5, 0.7, 0.9, 1.0]
        .iter()
        .map(|&tau| {
            let mut state = SetState::new(2_000, SetConfig::new(tau, 2).unwrap()).unwrap();
            let mut updates = 0;
            for (epoch, preds) in stream.iter().enumerate() {
                let active = state.active_samples();
                updates += planner.plan_shapes(epoch as u64, active.len() as u64).len() as u64;
                for id in active.into_iter().chain(state.reevaluation_plan()) {
                    let (correct, conf) = preds[id as usize];
                    state.record_prediction(id, correct, conf).unwrap();
                }
                state.finalize_epoch().unwrap();
            }
            updates
        })
        .collect();
    check(totals.windows(2).all(|w| w[0] <= w[1]), format!("{totals:?}"))?;
    Ok(format!("updates over tau grid {totals:?}"))
}

fn numerics() -> Outcome {
    let worst = (0..100).map(common::gradient_check).fold(0.0f64, f64::max);
    check(worst < 1e-5, format!("gradient relative error {worst:e}"))?;

    let cfg = TrainerConfig {
        max_lr: 0.4,
        min_lr: 0.0,
        warmup_epochs: 5,
        total_epochs: 155,
        ..TrainerConfig::default()
    };
    let lr = |step| cosine_lr(step, 10, &cfg).unwrap();
    check(lr(0) == 0.0, "lr at step 0")?;
    check(lr(50) == 0.4, "lr at end of warmup")?;
    check(lr(800) == 0.2, "lr at cosine midpoint")?;
    check(lr(1550) == 0.0, "lr at final step")?;

    for k in 2..=100 {
        for eps in [0.0, 0.1, 0.5] {
            let loss = label_smoothed_ce(&vec![1.5; k], k / 2, eps).unwrap().loss;
            check((loss - (k as f64).ln()).abs() <= 1e-12, format!("uniform logits, K = {k}"))?;
        }
    }
    Ok(format!("max gradient error {worst:.1e}"))
}

fn export(config: &ValidConfig) -> Vec<u8> {
    let planner = planner_for(config.clone());
    let epochs: Vec<_> = (0..config.epochs).map(|e| planner.plan_epoch(e, None).unwrap()).collect();
    let mut buf = Vec::new();
    write_schedule_jsonl(&mut buf, Some(config), &epochs, false).unwrap();
    buf
}

fn determinism_and_sharding() -> Outcome {
    for &strategy in Strategy::ALL.iter() {
        let a = export(&valid(sampler(strategy, 20_000, 64, 2)));
        let b = export(&valid(sampler(strategy, 20_000, 64, 2)));
        check(a == b, format!("{strategy} export differs"))?;
    }
    for world in [2u32, 4, 8] {
        for &strategy in Strategy::ALL.iter() {
            let mut c = sampler(strategy, 20_000, 64, 1);
            c.world_size = world;
            c.drop_last = false;
            let c = valid(c);
            let schedule = planner_for(c).plan_epoch(0, None).unwrap();
            let shards: Vec<_> = (0..world)
                .map(|r| shard_for_rank(&schedule, r, world).unwrap())
                .collect();
            for (t, plan) in schedule.plans.iter().enumerate() {
                let mut seen = BTreeSet::<SampleId>::new();
                for s in &shards {
                    let local = &s.plans[t];
                    check(
                        local.resolution == plan.resolution && local.clip == plan.clip,
                        format!("world {world}: rank shapes diverge at {t}"),
                    )?;
                    for &id in &local.sample_ids {
                        check(seen.insert(id), format!("world {world}: id {id} on two ranks"))?;
                    }
                }
                let want: BTreeSet<SampleId> = plan.sample_ids.iter().copied().collect();
                check(seen == want, format!("world {world}: iteration {t} not covered"))?;
            }
        }
    }
    Ok("byte-identical exports, shards disjoint and complete for worlds 2/4/8".into())
}

fn coverage() -> Outcome {
    let mut runner = TestRunner::new(common::cases(50));
    let configs = std::cell::Cell::new(0u32);
    let result = runner.run(&any_config(100_000), |config| {
        configs.set(configs.get() + 1);
        for &strategy in Strategy::ALL.iter() {
            let mut c: SamplerConfig = config.clone().into_inner().with_strategy(strategy);
            c.video = (strategy == Strategy::VideoVbs).then(common::video);
            c.drop_last = false;
            let c = validate_config(c).expect("valid");
            let schedule = planner_for(c.clone()).plan_epoch(1, None).unwrap();
            let mut ids: Vec<SampleId> = schedule.plans.iter().flat_map(|p| p.sample_ids.iter().copied()).collect();
            ids.sort_unstable();
            proptest::prop_assert_eq!(ids.len() as u64, c.dataset_size);
            proptest::prop_assert!(ids.iter().enumerate().all(|(i, &id)| i as u64 == u64::from(id)));
        }
        Ok(())
    });
    result.map_err(|e| e.to_string())?;
    Ok(format!("{} configs x {} strategies", configs.get(), Strategy::ALL.len()))
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("update-count reproduction", update_counts),
        ("memory proxy", memory_proxy),
        ("closed form vs Monte-Carlo", monte_carlo),
        ("SET desk-scale experiment", set_experiment),
        ("SET monotonicity", set_monotonicity),
        ("numerical suite", numerics),
        ("determinism and sharding", determinism_and_sharding),
        ("coverage property", coverage),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        match run() {
            Ok(detail) => println!("[PASS] {}: {name} ({detail})", i + 1),
            Err(why) => {
                failed += 1;
                println!("[FAIL] {}: {name} ({why})", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
