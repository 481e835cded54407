//! Caption hallucination ratios: instance-level (over all mentioned objects)
//! and sentence-level (over captions).

use crate::model::ObjectId;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChairResult {
    /// Fraction of captions containing at least one hallucinated object.
    pub chair_s: f64,
    /// Fraction of mentioned object instances that are hallucinated.
    pub chair_i: f64,
    /// Per caption: (mentions, hallucinated mentions).
    pub per_caption: Vec<(usize, usize)>,
}

/// Compute both ratios. `captions` are the mentioned-object multisets (in
/// mention order, repeats allowed); `truths` the per-scene present sets. A
/// caption with zero mentions contributes no instances and counts as
/// non-hallucinated.
pub fn chair_metrics(
    captions: &[Vec<ObjectId>],
    truths: &[BTreeSet<ObjectId>],
) -> Result<ChairResult> {
    if captions.is_empty() {
        return Err(Error::input("no captions to score"));
    }
    if captions.len() != truths.len() {
        return Err(Error::input(format!(
            "{} captions for {} truth sets",
            captions.len(),
            truths.len()
        )));
    }
    let mut total_mentions = 0usize;
    let mut total_hallucinated = 0usize;
    let mut captions_with_hallucination = 0usize;
    let mut per_caption = Vec::with_capacity(captions.len());
    for (mentions, truth) in captions.iter().zip(truths) {
        let hallucinated = mentions.iter().filter(|o| !truth.contains(o)).count();
        total_mentions += mentions.len();
        total_hallucinated += hallucinated;
        if hallucinated > 0 {
            captions_with_hallucination += 1;
        }
        per_caption.push((mentions.len(), hallucinated));
    }
    let chair_i = if total_mentions > 0 {
        total_hallucinated as f64 / total_mentions as f64
    } else {
        0.0
    };
    let chair_s = captions_with_hallucination as f64 / captions.len() as f64;
    Ok(ChairResult {
        chair_s,
        chair_i,
        per_caption,
    })
}
