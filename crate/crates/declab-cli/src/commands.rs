//! Subcommand implementations.

use crate::config::ExperimentConfig;
use anyhow::{bail, Context, Result};
use declab_core::decode::{generate, DecodeConfig};
use declab_core::eval::{
    efficiency_profile, run_chair, run_pope, write_report, write_scenes_jsonl, ChairReportRow,
    PopeReportRow, PopeSetting, Report, ReportFormat, Scene, World,
};
use declab_core::judge::{
    format_judge_prompt, request_verdict, EndpointConfig, JudgeRequest, DEFAULT_TEMPLATE,
};
use declab_core::model::{caption_stream, forward_step};
use declab_core::select::vision_importance;
use declab_core::seed;
use serde::Serialize;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Duration;

fn out_path(cfg: &ExperimentConfig, name: &str) -> Result<PathBuf> {
    let dir = Path::new(&cfg.out_dir);
    std::fs::create_dir_all(dir)
        .with_context(|| format!("creating output directory {}", dir.display()))?;
    Ok(dir.join(name))
}

fn pope_row(
    setting: PopeSetting,
    dc: &DecodeConfig,
    master_seed: u64,
    run: &declab_core::eval::PopeRun,
) -> PopeReportRow {
    PopeReportRow {
        setting: setting.name().to_string(),
        strategy: dc.strategy.name().to_string(),
        alpha: dc.alpha,
        beta: dc.beta,
        layer_i: dc.layer_i,
        keep_ratio: dc.keep_ratio,
        seed: master_seed,
        accuracy: run.metrics.accuracy,
        precision: run.metrics.precision,
        recall: run.metrics.recall,
        f1: run.metrics.f1,
        n_probes: run.n_probes,
    }
}

pub fn cmd_pope(cfg: &ExperimentConfig) -> Result<()> {
    let (world, scenes, model) = cfg.build()?;
    let mut rows = Vec::new();
    for setting in cfg.pope_settings() {
        for dc in &cfg.decodes {
            let run = run_pope(
                &model,
                &world,
                &scenes,
                setting,
                cfg.pope.k_per_polarity,
                dc,
                seed::derive_seed(cfg.master_seed, "pope"),
            )?;
            println!(
                "pope {:12} {:10} accuracy {:.4} f1 {:.4} ({} probes)",
                setting.name(),
                dc.strategy.name(),
                run.metrics.accuracy,
                run.metrics.f1,
                run.n_probes
            );
            rows.push(pope_row(setting, dc, cfg.master_seed, &run));
        }
    }
    write_scenes_jsonl(&world, &scenes, &out_path(cfg, "scenes.jsonl")?)?;
    let path = out_path(cfg, "pope.csv")?;
    write_report(&Report::Pope(rows), &path, ReportFormat::Csv)?;
    println!("wrote {}", path.display());
    Ok(())
}

pub fn cmd_chair(cfg: &ExperimentConfig) -> Result<()> {
    let (world, scenes, model) = cfg.build()?;
    let mut rows = Vec::new();
    for dc in &cfg.decodes {
        let mut dc = dc.clone();
        dc.max_new_tokens = cfg.max_new_tokens;
        let run = run_chair(
            &model,
            &scenes,
            &dc,
            seed::derive_seed(cfg.master_seed, "chair"),
        )?;
        println!(
            "chair {:10} C_S {:.4} C_I {:.4} mean_len {:.2} ({} captions)",
            dc.strategy.name(),
            run.metrics.chair_s,
            run.metrics.chair_i,
            run.mean_len,
            run.n_captions
        );
        rows.push(ChairReportRow {
            strategy: dc.strategy.name().to_string(),
            alpha: dc.alpha,
            beta: dc.beta,
            layer_i: dc.layer_i,
            keep_ratio: dc.keep_ratio,
            seed: cfg.master_seed,
            chair_s: run.metrics.chair_s,
            chair_i: run.metrics.chair_i,
            n_captions: run.n_captions,
            mean_len: run.mean_len,
        });
    }
    write_scenes_jsonl(&world, &scenes, &out_path(cfg, "scenes.jsonl")?)?;
    let path = out_path(cfg, "chair.csv")?;
    write_report(&Report::Chair(rows), &path, ReportFormat::Csv)?;
    println!("wrote {}", path.display());
    Ok(())
}

pub fn cmd_bench(cfg: &ExperimentConfig) -> Result<()> {
    let (_, scenes, model) = cfg.build()?;
    let profile = efficiency_profile(&model, &scenes, &cfg.decodes)?;
    for e in &profile.entries {
        println!(
            "bench {:10} macs {:>14} ratio {:.4} wall {:>9.1} ms tokens {}",
            e.strategy, e.mac_total, e.mac_ratio, e.wall_ms, e.tokens
        );
    }
    let path = out_path(cfg, "efficiency.json")?;
    write_report(
        &Report::Efficiency(profile.entries),
        &path,
        ReportFormat::Json,
    )?;
    println!("wrote {}", path.display());
    Ok(())
}

pub fn cmd_sweep(cfg: &ExperimentConfig) -> Result<()> {
    let (world, scenes, model) = cfg.build()?;
    let setting: PopeSetting = cfg.sweep.setting.parse().map_err(|e| anyhow::anyhow!("{e}"))?;
    let mut rows = Vec::new();
    for dc in &cfg.decodes {
        let alphas = non_empty_axis(&cfg.sweep.alphas, dc.alpha);
        let betas = non_empty_axis(&cfg.sweep.betas, dc.beta);
        let layers = non_empty_axis(&cfg.sweep.layers, dc.layer_i);
        let ratios = non_empty_axis(&cfg.sweep.keep_ratios, dc.keep_ratio);
        for &alpha in &alphas {
            for &beta in &betas {
                for &layer_i in &layers {
                    for &keep_ratio in &ratios {
                        let mut point = dc.clone();
                        point.alpha = alpha;
                        point.beta = beta;
                        point.layer_i = layer_i;
                        point.keep_ratio = keep_ratio;
                        let run = run_pope(
                            &model,
                            &world,
                            &scenes,
                            setting,
                            cfg.pope.k_per_polarity,
                            &point,
                            seed::derive_seed(cfg.master_seed, "sweep"),
                        )?;
                        rows.push(pope_row(setting, &point, cfg.master_seed, &run));
                    }
                }
            }
        }
    }
    println!("sweep: {} grid rows", rows.len());
    let path = out_path(cfg, "sweep.csv")?;
    write_report(&Report::Pope(rows), &path, ReportFormat::Csv)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn non_empty_axis<T: Copy>(axis: &[T], fallback: T) -> Vec<T> {
    if axis.is_empty() {
        vec![fallback]
    } else {
        axis.to_vec()
    }
}

#[derive(Serialize)]
struct InspectRecord {
    step: usize,
    strategy: String,
    chosen: usize,
    chosen_name: String,
    importance: Vec<f64>,
    kept_vision: Option<Vec<usize>>,
    admissible_count: usize,
    mac_counts: Vec<u64>,
}

/// Replay one captioning generation per strategy on a chosen scene and dump
/// per-step importance scores, kept sets, and diagnostics as JSONL.
pub fn cmd_inspect(cfg: &ExperimentConfig, scene_index: usize) -> Result<()> {
    let (_world, scenes, model) = cfg.build()?;
    let scene = scenes
        .get(scene_index)
        .with_context(|| format!("scene index {scene_index} out of range"))?;
    let path = out_path(cfg, "inspect.jsonl")?;
    let mut file = std::fs::File::create(&path)?;
    for dc in &cfg.decodes {
        let mut dc = dc.clone();
        dc.max_new_tokens = cfg.max_new_tokens;
        dc.seed = seed::derive_seed(cfg.master_seed, "inspect");
        let initial = caption_stream(&model, &scene.present)?;
        let (tokens, diags) = generate(&model, &initial, &dc)?;
        // replay prefixes to recover the per-step importance scores
        let mut stream = initial;
        for (step, diag) in diags.iter().enumerate() {
            let fwd = forward_step(&model, &stream)?;
            let vis: Vec<usize> = (0..stream.vision_count()).collect();
            let layer = dc.layer_i.min(model.config().num_layers);
            let scores = vision_importance(&fwd.trace, layer, &vis)?;
            let record = InspectRecord {
                step,
                strategy: dc.strategy.name().to_string(),
                chosen: diag.chosen.0,
                chosen_name: model.vocab().token_name(diag.chosen),
                importance: scores.scores,
                kept_vision: diag.kept_vision.clone(),
                admissible_count: diag.admissible_count,
                mac_counts: diag.mac_counts.clone(),
            };
            writeln!(file, "{}", serde_json::to_string(&record)?)?;
            if step < tokens.len() {
                stream.push_generated(tokens[step]);
            }
        }
    }
    println!("wrote {}", path.display());
    Ok(())
}

#[derive(Serialize)]
struct JudgeRow {
    scene_id: u64,
    strategy_a: String,
    strategy_b: String,
    correctness_a: f64,
    detailedness_a: f64,
    correctness_b: f64,
    detailedness_b: f64,
    retries: u32,
}

/// Judge captions from the first two decode configs over a handful of
/// scenes via the external endpoint, averaging over both presentation
/// orders. This is the only subcommand that touches the network.
pub fn cmd_judge(
    cfg: &ExperimentConfig,
    pairs: usize,
    template_path: Option<&Path>,
    endpoint_override: Option<&str>,
) -> Result<()> {
    if cfg.decodes.len() < 2 {
        bail!("judge needs two decode entries to compare");
    }
    let template = match template_path {
        Some(p) => std::fs::read_to_string(p)
            .with_context(|| format!("reading template {}", p.display()))?,
        None => DEFAULT_TEMPLATE.to_string(),
    };
    let mut endpoint = match endpoint_override {
        Some(url) => EndpointConfig::new(url),
        None => EndpointConfig::from_env().map_err(|e| anyhow::anyhow!("{e}"))?,
    };
    if endpoint.api_key.is_none() {
        endpoint.api_key = std::env::var("JUDGE_API_KEY").ok();
    }

    let (world, scenes, model) = cfg.build()?;
    let caption_of = |dc: &DecodeConfig, scene: &Scene| -> Result<String> {
        let mut dc = dc.clone();
        dc.max_new_tokens = cfg.max_new_tokens;
        dc.seed = seed::derive_seed_indexed(cfg.master_seed, "judge-decode", scene.id);
        let stream = caption_stream(&model, &scene.present)?;
        let (tokens, _) = generate(&model, &stream, &dc)?;
        let words: Vec<String> = tokens
            .iter()
            .filter_map(|t| model.vocab().as_object(*t))
            .map(|o| world.vocab.object_name(o).to_string())
            .collect();
        Ok(words.join(", "))
    };
    let reference_of = |world: &World, scene: &Scene| -> String {
        let names: Vec<&str> = scene
            .present
            .iter()
            .map(|o| world.vocab.object_name(*o))
            .collect();
        format!("an image containing: {}", names.join(", "))
    };

    let a_cfg = &cfg.decodes[0];
    let b_cfg = &cfg.decodes[1];
    let mut rows = Vec::new();
    for scene in scenes.iter().take(pairs) {
        let caption_a = caption_of(a_cfg, scene)?;
        let caption_b = caption_of(b_cfg, scene)?;
        let reference = reference_of(&world, scene);
        let forward = JudgeRequest {
            reference: reference.clone(),
            caption_a: caption_a.clone(),
            caption_b: caption_b.clone(),
            template_id: "default".into(),
        };
        let swapped = JudgeRequest {
            reference,
            caption_a: caption_b,
            caption_b: caption_a,
            template_id: "default".into(),
        };
        let timeout = Duration::from_secs(30);
        let fwd = request_verdict(&endpoint, &format_judge_prompt(&forward, &template)?, timeout)
            .map_err(|e| anyhow::anyhow!("{e}"))?;
        let rev = request_verdict(&endpoint, &format_judge_prompt(&swapped, &template)?, timeout)
            .map_err(|e| anyhow::anyhow!("{e}"))?;
        // order-swap averaging: B appears as the second caption in the
        // forward order and as the first in the swapped one
        let v = fwd.verdict;
        let w = rev.verdict;
        rows.push(JudgeRow {
            scene_id: scene.id,
            strategy_a: a_cfg.strategy.name().to_string(),
            strategy_b: b_cfg.strategy.name().to_string(),
            correctness_a: (v.correctness_a as f64 + w.correctness_b as f64) / 2.0,
            detailedness_a: (v.detailedness_a as f64 + w.detailedness_b as f64) / 2.0,
            correctness_b: (v.correctness_b as f64 + w.correctness_a as f64) / 2.0,
            detailedness_b: (v.detailedness_b as f64 + w.detailedness_a as f64) / 2.0,
            retries: fwd.retries + rev.retries,
        });
    }
    let path = out_path(cfg, "judge.json")?;
    let mut file = std::fs::File::create(&path)?;
    writeln!(file, "{}", serde_json::to_string_pretty(&rows)?)?;
    for r in &rows {
        println!(
            "judge scene {} {}: C {:.1} D {:.1} | {}: C {:.1} D {:.1}",
            r.scene_id,
            r.strategy_a,
            r.correctness_a,
            r.detailedness_a,
            r.strategy_b,
            r.correctness_b,
            r.detailedness_b
        );
    }
    println!("wrote {}", path.display());
    Ok(())
}

/// Validate every decode entry against the model depth before running.
pub fn validate_decodes(cfg: &ExperimentConfig) -> Result<()> {
    for dc in &cfg.decodes {
        dc.validate(cfg.model.num_layers)
            .map_err(|e| anyhow::anyhow!("decode config invalid: {e}"))?;
    }
    Ok(())
}

