//! Vision-token importance scoring and the selection rules used to build the
//! contrastive pass: keep-least (the introspective strategy), keep-top and
//! keep-random (its ablations).

use crate::model::AttentionTrace;
use crate::seed;
use crate::{Error, Result};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

/// Per-vision-token importance scores from one layer's attention:
/// the mean over heads of the final query row, restricted to vision indices.
/// Raw attention mass, deliberately not renormalized.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ImportanceScores {
    pub scores: Vec<f64>,
    pub layer: usize,
}

/// Score every vision token as the head-mean of the final attention row at
/// `layer_i` (1-indexed).
pub fn vision_importance(
    trace: &AttentionTrace,
    layer_i: usize,
    vision_indices: &[usize],
) -> Result<ImportanceScores> {
    if layer_i == 0 || layer_i > trace.num_layers() {
        return Err(Error::input(format!(
            "layer {layer_i} outside 1..={}",
            trace.num_layers()
        )));
    }
    let heads = trace.layer(layer_i);
    let h = heads.len();
    let n = heads[0].rows();
    let last = n - 1;
    let mut scores = Vec::with_capacity(vision_indices.len());
    for &v in vision_indices {
        if v >= n {
            return Err(Error::input(format!(
                "vision index {v} outside the traced sequence of length {n}"
            )));
        }
        let s: f64 = heads.iter().map(|a| a.get(last, v)).sum::<f64>() / h as f64;
        scores.push(s);
    }
    Ok(ImportanceScores {
        scores,
        layer: layer_i,
    })
}

fn keep_count(n: usize, ratio: f64) -> Result<usize> {
    if !(0.0..=1.0).contains(&ratio) {
        return Err(Error::input(format!("keep ratio {ratio} outside [0,1]")));
    }
    Ok((ratio * n as f64).ceil() as usize)
}

/// Keep exactly `ceil(ratio * n)` of the lowest-scoring indices; ties break
/// toward the smaller index. `ratio = 0` keeps nothing.
pub fn select_least(scores: &ImportanceScores, keep_ratio: f64) -> Result<BTreeSet<usize>> {
    if scores.scores.is_empty() {
        return Err(Error::input("no scores to select from"));
    }
    let k = keep_count(scores.scores.len(), keep_ratio)?;
    let mut order: Vec<usize> = (0..scores.scores.len()).collect();
    order.sort_by(|&a, &b| {
        scores.scores[a]
            .partial_cmp(&scores.scores[b])
            .unwrap()
            .then(a.cmp(&b))
    });
    Ok(order.into_iter().take(k).collect())
}

/// Mirror of [`select_least`] keeping the highest-scoring indices, ties still
/// toward the smaller index.
pub fn select_top(scores: &ImportanceScores, keep_ratio: f64) -> Result<BTreeSet<usize>> {
    if scores.scores.is_empty() {
        return Err(Error::input("no scores to select from"));
    }
    let k = keep_count(scores.scores.len(), keep_ratio)?;
    let mut order: Vec<usize> = (0..scores.scores.len()).collect();
    order.sort_by(|&a, &b| {
        scores.scores[b]
            .partial_cmp(&scores.scores[a])
            .unwrap()
            .then(a.cmp(&b))
    });
    Ok(order.into_iter().take(k).collect())
}

/// Uniform sample without replacement of `ceil(ratio * n_v)` indices,
/// deterministic under the seed.
pub fn select_random(n_vision: usize, ratio: f64, seed: u64) -> Result<BTreeSet<usize>> {
    let k = keep_count(n_vision, ratio)?;
    let mut pool: Vec<usize> = (0..n_vision).collect();
    let mut rng = seed::stream(seed, "select-random");
    // partial Fisher-Yates: the first k slots become the sample
    for i in 0..k {
        let j = rng.gen_range(i..pool.len());
        pool.swap(i, j);
    }
    Ok(pool.into_iter().take(k).collect())
}
