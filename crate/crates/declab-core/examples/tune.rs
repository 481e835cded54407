//! Scratch harness for calibrating model constants against the directional
//! experiments. Not part of the deliverable surface.

use declab_core::decode::{DecodeConfig, Picker, Strategy};
use declab_core::eval::{gen_scenes, gen_world, run_chair, run_pope, PopeSetting};
use declab_core::model::{build_model, ModelConfig};

fn main() {
    let n_scenes: usize = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(60);
    let lambda: f64 = std::env::args()
        .nth(2)
        .and_then(|s| s.parse().ok())
        .unwrap_or(2.5);
    let seeds: u64 = std::env::args()
        .nth(3)
        .and_then(|s| s.parse().ok())
        .unwrap_or(3);

    let mut base = DecodeConfig::default();
    base.keep_ratio = 0.25;

    println!("== POPE (lambda_p={lambda}, {n_scenes} scenes, {seeds} seeds) ==");
    for setting in [PopeSetting::Adversarial, PopeSetting::Random] {
        for strategy in [
            Strategy::Normal,
            Strategy::Sid,
            Strategy::SidTop,
            Strategy::SidRandom,
            Strategy::Vcd,
            Strategy::Icd,
            Strategy::Add,
        ] {
            let mut accs = Vec::new();
            for seed in 0..seeds {
                let world = gen_world(10, 0.7, 100 + seed).unwrap();
                let scenes = gen_scenes(&world, n_scenes, 4, 200 + seed).unwrap();
                let mut mc = ModelConfig::new(world.vocab.clone(), 300 + seed);
                mc.n_vision = 16;
                mc.d_model = 56;
                mc.prior_strength = lambda;
                mc.evidence_gain = 4.0;
                let model = build_model(mc).unwrap();
                let mut cfg = base.clone();
                cfg.strategy = strategy;
                if strategy == Strategy::Add {
                    cfg.alpha = 0.5;
                }
                let run = run_pope(&model, &world, &scenes, setting, 2, &cfg, 400 + seed).unwrap();
                accs.push(run.metrics.accuracy * 100.0);
            }
            let mean = accs.iter().sum::<f64>() / accs.len() as f64;
            println!("  {:12} {:12} acc {:.1}", setting.name(), strategy.name(), mean);
        }
    }

    println!("== CHAIR (captioning) ==");
    for strategy in [Strategy::Normal, Strategy::Sid, Strategy::SidTop, Strategy::Vcd] {
        let (mut cs, mut ci, mut ml) = (Vec::new(), Vec::new(), Vec::new());
        for seed in 0..seeds {
            let world = gen_world(10, 0.7, 100 + seed).unwrap();
            let scenes = gen_scenes(&world, n_scenes, 4, 200 + seed).unwrap();
            let mut mc = ModelConfig::new(world.vocab.clone(), 300 + seed);
            mc.n_vision = 16;
            mc.d_model = 56;
            mc.prior_strength = lambda;
                mc.evidence_gain = 4.0;
            let model = build_model(mc).unwrap();
            let mut cfg = base.clone();
            cfg.strategy = strategy;
            cfg.max_new_tokens = 12;
            let run = run_chair(&model, &scenes, &cfg, 500 + seed).unwrap();
            cs.push(run.metrics.chair_s * 100.0);
            ci.push(run.metrics.chair_i * 100.0);
            ml.push(run.mean_len);
        }
        let m = |v: &Vec<f64>| v.iter().sum::<f64>() / v.len() as f64;
        println!(
            "  {:12} C_S {:.1}  C_I {:.1}  mean_len {:.2}",
            strategy.name(),
            m(&cs),
            m(&ci),
            m(&ml)
        );
    }

    println!("== alpha sensitivity (adversarial) ==");
    for strategy in [Strategy::Sid, Strategy::Vcd] {
        let mut row = String::new();
        for alpha in [0.1, 0.5, 1.0, 2.0] {
            let mut accs = Vec::new();
            for seed in 0..seeds {
                let world = gen_world(10, 0.7, 100 + seed).unwrap();
                let scenes = gen_scenes(&world, n_scenes, 4, 200 + seed).unwrap();
                let mut mc = ModelConfig::new(world.vocab.clone(), 300 + seed);
                mc.n_vision = 16;
                mc.d_model = 56;
                mc.prior_strength = lambda;
                mc.evidence_gain = 4.0;
                let model = build_model(mc).unwrap();
                let mut cfg = base.clone();
                cfg.strategy = strategy;
                cfg.alpha = alpha;
                cfg.base_picker = Picker::Greedy;
                let run = run_pope(
                    &model,
                    &world,
                    &scenes,
                    PopeSetting::Adversarial,
                    2,
                    &cfg,
                    600 + seed,
                )
                .unwrap();
                accs.push(run.metrics.accuracy * 100.0);
            }
            let mean = accs.iter().sum::<f64>() / accs.len() as f64;
            row.push_str(&format!("  a={alpha}: {mean:.1}"));
        }
        println!("  {:12} {row}", strategy.name());
    }
}
