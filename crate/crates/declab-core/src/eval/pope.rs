//! Balanced yes/no object-existence probes with three negative-sampling
//! settings, and the confusion-matrix metrics over their predictions.

use super::world::{Scene, World};
use crate::model::ObjectId;
use crate::seed;
use crate::{Error, Result};
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PopeSetting {
    Random,
    Popular,
    Adversarial,
}

impl PopeSetting {
    pub fn name(self) -> &'static str {
        match self {
            PopeSetting::Random => "random",
            PopeSetting::Popular => "popular",
            PopeSetting::Adversarial => "adversarial",
        }
    }
}

impl std::str::FromStr for PopeSetting {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "random" => Ok(PopeSetting::Random),
            "popular" => Ok(PopeSetting::Popular),
            "adversarial" => Ok(PopeSetting::Adversarial),
            other => Err(Error::input(format!("unknown pope setting '{other}'"))),
        }
    }
}

/// One existence question: "is `queried` in scene `scene_id`?"
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PopeProbe {
    pub scene_id: u64,
    pub queried: ObjectId,
    pub truth: bool,
    pub setting: PopeSetting,
}

/// Confusion counts and the derived metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopeResult {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Build `k` positive and `k` negative probes for one scene. Negatives are
/// drawn per the setting: uniformly among absent objects (random), from the
/// most popular absent objects (popular), or ranked by their maximum
/// co-occurrence with the present objects (adversarial). Adversarial ties are
/// broken by a seeded shuffle, so a zero-co-occurrence world degenerates to
/// the random setting's candidate pool.
pub fn build_pope_probes(
    world: &World,
    scene: &Scene,
    setting: PopeSetting,
    k_per_polarity: usize,
    seed_value: u64,
) -> Result<Vec<PopeProbe>> {
    let k_total = world.vocab.num_objects();
    let absent: Vec<ObjectId> = (0..k_total)
        .map(ObjectId)
        .filter(|o| !scene.present.contains(o))
        .collect();
    if scene.present.len() < k_per_polarity || absent.len() < k_per_polarity {
        return Err(Error::Generation(format!(
            "scene {} has {} present / {} absent objects; need {k_per_polarity} of each",
            scene.id,
            scene.present.len(),
            absent.len()
        )));
    }
    let mut rng = seed::stream_indexed(seed_value, "pope-probes", scene.id);

    let mut positives = scene.present.clone();
    partial_shuffle(&mut positives, k_per_polarity, &mut rng);
    positives.truncate(k_per_polarity);

    let mut candidates = absent;
    // Seeded shuffle first so that equal-score candidates are sampled, then a
    // stable sort by the setting's ranking criterion.
    full_shuffle(&mut candidates, &mut rng);
    match setting {
        PopeSetting::Random => {}
        PopeSetting::Popular => {
            candidates.sort_by(|a, b| {
                world.popularity[b.0]
                    .partial_cmp(&world.popularity[a.0])
                    .unwrap()
            });
        }
        PopeSetting::Adversarial => {
            let p = world.vocab.cooccurrence();
            let score = |o: ObjectId| -> f64 {
                scene
                    .present
                    .iter()
                    .map(|a| p.get(o.0, a.0))
                    .fold(0.0, f64::max)
            };
            candidates.sort_by(|a, b| score(*b).partial_cmp(&score(*a)).unwrap());
        }
    }
    candidates.truncate(k_per_polarity);

    let mut probes = Vec::with_capacity(2 * k_per_polarity);
    for o in positives {
        probes.push(PopeProbe {
            scene_id: scene.id,
            queried: o,
            truth: true,
            setting,
        });
    }
    for o in candidates {
        probes.push(PopeProbe {
            scene_id: scene.id,
            queried: o,
            truth: false,
            setting,
        });
    }
    Ok(probes)
}

fn partial_shuffle(items: &mut [ObjectId], k: usize, rng: &mut seed::SplitMix64) {
    for i in 0..k.min(items.len()) {
        let j = rng.gen_range(i..items.len());
        items.swap(i, j);
    }
}

fn full_shuffle(items: &mut [ObjectId], rng: &mut seed::SplitMix64) {
    let n = items.len();
    if n > 1 {
        partial_shuffle(items, n - 1, rng);
    }
}

/// Standard confusion-matrix metrics; F1 is 0 when precision + recall is 0.
pub fn pope_metrics(predictions: &[bool], probes: &[PopeProbe]) -> Result<PopeResult> {
    if predictions.len() != probes.len() {
        return Err(Error::input(format!(
            "{} predictions for {} probes",
            predictions.len(),
            probes.len()
        )));
    }
    if probes.is_empty() {
        return Err(Error::input("no probes to score"));
    }
    let (mut tp, mut fp, mut tn, mut fn_) = (0usize, 0usize, 0usize, 0usize);
    for (pred, probe) in predictions.iter().zip(probes) {
        match (*pred, probe.truth) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, false) => tn += 1,
            (false, true) => fn_ += 1,
        }
    }
    let total = (tp + fp + tn + fn_) as f64;
    let accuracy = (tp + tn) as f64 / total;
    let precision = if tp + fp > 0 {
        tp as f64 / (tp + fp) as f64
    } else {
        0.0
    };
    let recall = if tp + fn_ > 0 {
        tp as f64 / (tp + fn_) as f64
    } else {
        0.0
    };
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    Ok(PopeResult {
        tp,
        fp,
        tn,
        fn_,
        accuracy,
        precision,
        recall,
        f1,
    })
}
