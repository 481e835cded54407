//! Compute-cost profiling. Multiply-accumulate counts are the primary
//! metric (exact and reproducible); wall time is recorded as a secondary,
//! non-deterministic observable.

use super::world::Scene;
use crate::decode::{generate, DecodeConfig, Strategy};
use crate::model::{probe_stream, Model};
use crate::parallel::map_ordered;
use crate::seed;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::time::Instant;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EfficiencyEntry {
    pub strategy: String,
    pub mac_total: u64,
    pub mac_ratio: f64,
    pub wall_ms: f64,
    pub tokens: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EfficiencyProfile {
    pub entries: Vec<EfficiencyEntry>,
}

/// Run every strategy over the identical probe workload (one single-token
/// existence answer per scene, same prompts and seeds) and aggregate exact
/// MAC counts, wall time, and token counts. Ratios are taken against the
/// normal-decoding entry; one is added if the config list lacks it.
pub fn efficiency_profile(
    model: &Model,
    scenes: &[Scene],
    configs: &[DecodeConfig],
) -> Result<EfficiencyProfile> {
    if scenes.is_empty() || configs.is_empty() {
        return Err(Error::input("efficiency profile needs scenes and configs"));
    }
    let mut all: Vec<DecodeConfig> = Vec::new();
    if !configs.iter().any(|c| c.strategy == Strategy::Normal) {
        let mut baseline = configs[0].clone();
        baseline.strategy = Strategy::Normal;
        all.push(baseline);
    }
    all.extend(configs.iter().cloned());

    let mut entries = Vec::with_capacity(all.len());
    for config in &all {
        let start = Instant::now();
        let per_scene: Vec<Result<(u64, u64)>> = map_ordered(scenes, |scene| {
            let stream = probe_stream(model, &scene.present, scene.present[0])?;
            let mut cfg = config.clone();
            cfg.max_new_tokens = 1;
            cfg.seed = seed::derive_seed_indexed(cfg.seed, "profile", scene.id);
            let (tokens, diags) = generate(model, &stream, &cfg)?;
            let macs: u64 = diags.iter().flat_map(|d| d.mac_counts.iter()).sum();
            Ok((macs, tokens.len() as u64))
        });
        let mut mac_total = 0u64;
        let mut tokens = 0u64;
        for r in per_scene {
            let (m, t) = r?;
            mac_total += m;
            tokens += t;
        }
        let wall_ms = start.elapsed().as_secs_f64() * 1e3;
        entries.push(EfficiencyEntry {
            strategy: config.strategy.name().to_string(),
            mac_total,
            mac_ratio: 0.0,
            wall_ms,
            tokens,
        });
    }

    let baseline_macs = entries
        .iter()
        .find(|e| e.strategy == Strategy::Normal.name())
        .expect("baseline present by construction")
        .mac_total as f64;
    for e in &mut entries {
        e.mac_ratio = e.mac_total as f64 / baseline_macs;
    }
    Ok(EfficiencyProfile { entries })
}
