//! Synthetic worlds (vocabulary, co-occurrence, popularity) and scenes.

use crate::model::{ObjectId, Vocabulary};
use crate::numerics::Matrix;
use crate::seed;
use crate::{Error, Result};
use rand::Rng;
use serde::{Deserialize, Serialize};

const OBJECT_WORDS: [&str; 24] = [
    "apple", "bench", "bicycle", "boat", "bottle", "bowl", "car", "cat", "chair", "cup", "dog",
    "fork", "horse", "kite", "lamp", "laptop", "pizza", "plant", "sheep", "spoon", "table",
    "train", "umbrella", "vase",
];

/// Object vocabulary plus per-object popularity weights (positive, sum 1).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct World {
    pub vocab: Vocabulary,
    pub popularity: Vec<f64>,
    pub seed: u64,
}

/// Present-object set with a stable id; stands in for an image.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Scene {
    pub id: u64,
    pub present: Vec<ObjectId>,
}

/// Deterministic world: named objects, Zipf(1) popularity, and a seeded
/// row-stochastic co-occurrence matrix with zero diagonal. `sparsity` in
/// [0,1] controls how few partners each object has; at 1.0 every row has
/// exactly one nonzero entry.
pub fn gen_world(n_objects: usize, cooccurrence_sparsity: f64, seed_value: u64) -> Result<World> {
    if n_objects < 4 {
        return Err(Error::input("worlds need at least 4 objects"));
    }
    if !(0.0..=1.0).contains(&cooccurrence_sparsity) {
        return Err(Error::input("sparsity must lie in [0,1]"));
    }
    let names: Vec<String> = (0..n_objects)
        .map(|i| {
            OBJECT_WORDS
                .get(i)
                .map(|w| w.to_string())
                .unwrap_or_else(|| format!("object{i:02}"))
        })
        .collect();

    // Zipf exponent 1: weight of the i-th object is 1/(i+1), normalized.
    let raw: Vec<f64> = (0..n_objects).map(|i| 1.0 / (i + 1) as f64).collect();
    let total: f64 = raw.iter().sum();
    let popularity: Vec<f64> = raw.into_iter().map(|w| w / total).collect();

    let mut rng = seed::stream(seed_value, "world-cooccurrence");
    let partners_per_row =
        (((1.0 - cooccurrence_sparsity) * (n_objects - 1) as f64).round() as usize).max(1);
    let mut p = Matrix::zeros(n_objects, n_objects);
    for row in 0..n_objects {
        let mut others: Vec<usize> = (0..n_objects).filter(|c| *c != row).collect();
        for i in 0..partners_per_row {
            let j = rng.gen_range(i..others.len());
            others.swap(i, j);
        }
        let partners = &others[..partners_per_row];
        // Exponential weights give most rows a clearly dominant partner.
        let weights: Vec<f64> = partners.iter().map(|_| -rng.gen::<f64>().max(1e-12).ln()).collect();
        let sum: f64 = weights.iter().sum();
        for (c, w) in partners.iter().zip(weights) {
            p.set(row, *c, w / sum);
        }
    }

    let vocab = Vocabulary::new(names, p)?;
    Ok(World {
        vocab,
        popularity,
        seed: seed_value,
    })
}

/// Scenes with popularity- and co-occurrence-biased composition: the first
/// object is drawn by popularity, later ones by a blend of popularity and
/// co-occurrence with the objects already in the scene.
pub fn gen_scenes(
    world: &World,
    n_scenes: usize,
    objects_per_scene: usize,
    seed_value: u64,
) -> Result<Vec<Scene>> {
    let k = world.vocab.num_objects();
    if objects_per_scene == 0 || objects_per_scene > k {
        return Err(Error::input(format!(
            "objects_per_scene {objects_per_scene} outside 1..={k}"
        )));
    }
    let p = world.vocab.cooccurrence();
    let mut scenes = Vec::with_capacity(n_scenes);
    for id in 0..n_scenes as u64 {
        let mut rng = seed::stream_indexed(seed_value, "scene", id);
        let mut present: Vec<ObjectId> = Vec::with_capacity(objects_per_scene);
        while present.len() < objects_per_scene {
            let weights: Vec<f64> = (0..k)
                .map(|cand| {
                    if present.iter().any(|o| o.0 == cand) {
                        return 0.0;
                    }
                    let pop = world.popularity[cand];
                    let coocc: f64 = present
                        .iter()
                        .map(|o| p.get(o.0, cand).max(p.get(cand, o.0)))
                        .fold(0.0, f64::max);
                    0.75 * pop + 0.25 * coocc
                })
                .collect();
            present.push(ObjectId(weighted_draw(&weights, &mut rng)));
        }
        scenes.push(Scene { id, present });
    }
    Ok(scenes)
}

fn weighted_draw(weights: &[f64], rng: &mut seed::SplitMix64) -> usize {
    let total: f64 = weights.iter().sum();
    debug_assert!(total > 0.0);
    let draw: f64 = rng.gen_range(0.0..total);
    let mut acc = 0.0;
    for (i, w) in weights.iter().enumerate() {
        acc += w;
        if draw < acc && *w > 0.0 {
            return i;
        }
    }
    weights.iter().rposition(|w| *w > 0.0).expect("positive weight")
}
