//! Scene-batch runners tying the model, decoding strategies, and metrics
//! together. Per-scene seeds derive from stable labels, so results are
//! independent of the worker count and of scene evaluation order.

use super::chair::{chair_metrics, ChairResult};
use super::pope::{build_pope_probes, pope_metrics, PopeProbe, PopeResult, PopeSetting};
use super::world::{Scene, World};
use crate::decode::{generate, DecodeConfig};
use crate::model::{caption_stream, probe_stream, Control, Model, ObjectId};
use crate::parallel::map_ordered;
use crate::seed;
use crate::Result;
use std::collections::BTreeSet;

#[derive(Debug, Clone)]
pub struct PopeRun {
    pub metrics: PopeResult,
    pub n_probes: usize,
}

#[derive(Debug, Clone)]
pub struct ChairRun {
    pub metrics: ChairResult,
    pub n_captions: usize,
    /// Mean object mentions per caption.
    pub mean_len: f64,
}

/// Probe every scene with `k_per_polarity` positives and negatives under the
/// given setting, answer each probe with one decoded token, and score the
/// predictions.
pub fn run_pope(
    model: &Model,
    world: &World,
    scenes: &[Scene],
    setting: PopeSetting,
    k_per_polarity: usize,
    config: &DecodeConfig,
    master_seed: u64,
) -> Result<PopeRun> {
    let yes = model.vocab().control_token(Control::Yes);
    let per_scene: Vec<Result<Vec<(PopeProbe, bool)>>> = map_ordered(scenes, |scene| {
        let probes = build_pope_probes(world, scene, setting, k_per_polarity, master_seed)?;
        let mut out = Vec::with_capacity(probes.len());
        for (idx, probe) in probes.into_iter().enumerate() {
            let stream = probe_stream(model, &scene.present, probe.queried)?;
            let mut cfg = config.clone();
            cfg.max_new_tokens = 1;
            cfg.seed = seed::derive_seed_indexed(
                master_seed,
                "pope-decode",
                scene.id * 64 + idx as u64,
            );
            let (tokens, _) = generate(model, &stream, &cfg)?;
            let predicted_yes = tokens.first() == Some(&yes);
            out.push((probe, predicted_yes));
        }
        Ok(out)
    });

    let mut probes = Vec::new();
    let mut predictions = Vec::new();
    for scene_result in per_scene {
        for (probe, pred) in scene_result? {
            probes.push(probe);
            predictions.push(pred);
        }
    }
    let metrics = pope_metrics(&predictions, &probes)?;
    Ok(PopeRun {
        n_probes: probes.len(),
        metrics,
    })
}

/// Caption every scene and score the hallucination ratios.
pub fn run_chair(
    model: &Model,
    scenes: &[Scene],
    config: &DecodeConfig,
    master_seed: u64,
) -> Result<ChairRun> {
    let per_scene: Vec<Result<(Vec<ObjectId>, BTreeSet<ObjectId>)>> =
        map_ordered(scenes, |scene| {
            let stream = caption_stream(model, &scene.present)?;
            let mut cfg = config.clone();
            cfg.seed = seed::derive_seed_indexed(master_seed, "chair-decode", scene.id);
            let (tokens, _) = generate(model, &stream, &cfg)?;
            let mentions: Vec<ObjectId> = tokens
                .iter()
                .filter_map(|t| model.vocab().as_object(*t))
                .collect();
            let truth: BTreeSet<ObjectId> = scene.present.iter().copied().collect();
            Ok((mentions, truth))
        });

    let mut captions = Vec::new();
    let mut truths = Vec::new();
    for r in per_scene {
        let (mentions, truth) = r?;
        captions.push(mentions);
        truths.push(truth);
    }
    let total_mentions: usize = captions.iter().map(|c| c.len()).sum();
    let mean_len = total_mentions as f64 / captions.len() as f64;
    let metrics = chair_metrics(&captions, &truths)?;
    Ok(ChairRun {
        n_captions: captions.len(),
        mean_len,
        metrics,
    })
}
