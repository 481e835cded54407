//! Deterministic model construction: orthonormal object codes, identity-
//! aligned projections with seeded perturbations, and scene embedding.

use super::config::{
    BlockLayout, ModelConfig, ROLE_CONFUSE, ROLE_GENERATED, ROLE_INSTRUCTION, ROLE_SEEK,
    ROLE_VISION,
};
use super::vocab::{Control, ObjectId, Vocabulary};
use super::{ALIGN_GAIN, CONFUSE_SINK_SCORE, MIX_GAIN, REPEL_GAIN, SEEK_SCORE, SINK_SCORE};
use crate::numerics::Matrix;
use crate::seed;
use crate::{Error, Result};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use sha2::{Digest, Sha256};

/// Per-head projection weights, each `d_model x d_head`.
#[derive(Debug, Clone)]
pub struct HeadWeights {
    pub wq: Matrix,
    pub wk: Matrix,
    pub wv: Matrix,
}

/// Immutable built model. Forward passes never mutate it, so it is freely
/// shareable across threads.
#[derive(Debug, Clone)]
pub struct Model {
    config: ModelConfig,
    layout: BlockLayout,
    codes: Matrix,
    layers: Vec<Vec<HeadWeights>>,
}

impl Model {
    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn layout(&self) -> &BlockLayout {
        &self.layout
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.config.vocab
    }

    /// Orthonormal object identity codes, one row per object.
    pub fn codes(&self) -> &Matrix {
        &self.codes
    }

    pub fn head_weights(&self, layer: usize, head: usize) -> &HeadWeights {
        &self.layers[layer][head]
    }

    /// Hex SHA-256 over codes and all projection weights, for determinism
    /// checks.
    pub fn weight_digest(&self) -> String {
        let mut hasher = Sha256::new();
        let mut feed = |m: &Matrix| {
            for v in m.data() {
                hasher.update(v.to_le_bytes());
            }
        };
        feed(&self.codes);
        for layer in &self.layers {
            for head in layer {
                feed(&head.wq);
                feed(&head.wk);
                feed(&head.wv);
            }
        }
        let out = hasher.finalize();
        out.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Embedding of a text token in the given role at the given position.
    pub fn embed_text(&self, token: super::vocab::TokenId, role: super::stream::Role, position: usize) -> Vec<f64> {
        let layout = &self.layout;
        let vocab = self.vocab();
        let mut x = vec![0.0; layout.d_model];
        if let Some(o) = vocab.as_object(token) {
            let scale = match role {
                super::stream::Role::Generated => -REPEL_GAIN,
                _ => 1.0,
            };
            for (i, c) in layout.text_id.clone().zip(0..layout.d_id) {
                x[i] = scale * self.codes.get(o.0, c);
            }
            // Generated object tokens carry their identity a second time in
            // the context block, whose query wiring seeks co-occurring
            // vision content even as the text block moves off the object.
            if role == super::stream::Role::Generated {
                for (i, c) in layout.ctx_id.clone().zip(0..layout.d_id) {
                    x[i] = self.codes.get(o.0, c);
                }
            }
        }
        let role_dim = match role {
            super::stream::Role::Vision => ROLE_VISION,
            super::stream::Role::Instruction => ROLE_INSTRUCTION,
            super::stream::Role::Generated => ROLE_GENERATED,
        };
        x[layout.role.start + role_dim] = 1.0;
        let seeking = role == super::stream::Role::Generated
            || vocab.as_control(token) == Some(Control::Describe);
        if seeking {
            x[layout.role.start + ROLE_SEEK] = 1.0;
        }
        if vocab.as_control(token) == Some(Control::Confuse) {
            x[layout.role.start + ROLE_CONFUSE] = 1.0;
        }
        for (i, f) in layout.pos.clone().zip(layout.position_features(position)) {
            x[i] = f;
        }
        x
    }
}

/// Build a model whose weights are fully determined by the configuration.
pub fn build_model(config: ModelConfig) -> Result<Model> {
    config.validate()?;
    let layout = BlockLayout::for_config(&config)?;
    let k = config.vocab.num_objects();

    let codes = orthonormal_codes(k, layout.d_id, config.seed);

    // Co-occurrence mixing in code space: c_b -> sum_a P[b,a] c_a.
    let p_codes = config.vocab.cooccurrence().matmul(&codes)?; // K x d_id
    let mix = codes.transpose().matmul(&p_codes)?; // d_id x d_id

    let n_layers = config.num_layers;
    let n_heads = config.num_heads;
    let mut layers = Vec::with_capacity(n_layers);
    for l in 0..n_layers {
        let mut heads = Vec::with_capacity(n_heads);
        for h in 0..n_heads {
            heads.push(build_head(&config, &layout, &mix, l, h));
        }
        layers.push(heads);
    }

    Ok(Model {
        config,
        layout,
        codes,
        layers,
    })
}

fn build_head(
    config: &ModelConfig,
    layout: &BlockLayout,
    mix: &Matrix,
    layer: usize,
    head: usize,
) -> HeadWeights {
    let d_head = layout.d_head;
    let d_id = layout.d_id;
    let mu = config.prior_strength * MIX_GAIN;
    let root = (d_head as f64).sqrt();
    // Symmetric split so that q . k / sqrt(d_head) hits the target score.
    let sink = (SINK_SCORE * root).sqrt();
    let seek = (SEEK_SCORE * root).sqrt();
    let confuse_extra = (CONFUSE_SINK_SCORE - SINK_SCORE) * root / sink;

    let mut wq = Matrix::zeros(layout.d_model, d_head);
    let mut wk = Matrix::zeros(layout.d_model, d_head);
    let mut wv = Matrix::zeros(layout.d_model, d_head);

    for r in 0..d_id {
        // Vision tokens query for their own kind; text-object queries mix in
        // co-occurring codes with strength mu. The context block carries the
        // mixing alone, gained so that a generated token's net query is
        // "repel my own object, seek its co-occurrence partners".
        wq.set(layout.vision_id.start + r, r, ALIGN_GAIN);
        for c in 0..d_id {
            let ident = if r == c { 1.0 } else { 0.0 };
            wq.set(layout.text_id.start + r, c, ALIGN_GAIN * (ident + mu * mix.get(r, c)));
            wq.set(
                layout.ctx_id.start + r,
                c,
                ALIGN_GAIN * (REPEL_GAIN + 1.0) * mu * mix.get(r, c),
            );
        }
        // Keys expose vision identity only; values pass it through.
        wk.set(layout.vision_id.start + r, r, ALIGN_GAIN);
        wv.set(layout.vision_id.start + r, r, 1.0);
    }
    for role in [ROLE_VISION, ROLE_INSTRUCTION, ROLE_GENERATED] {
        wq.set(layout.role.start + role, layout.sink_channel(), sink);
    }
    wq.set(layout.role.start + ROLE_SEEK, layout.seek_channel(), seek);
    wk.set(layout.role.start + ROLE_INSTRUCTION, layout.sink_channel(), sink);
    wk.set(layout.role.start + ROLE_GENERATED, layout.sink_channel(), sink);
    wk.set(layout.role.start + ROLE_CONFUSE, layout.sink_channel(), confuse_extra);
    wk.set(layout.role.start + ROLE_VISION, layout.seek_channel(), seek);

    // Seeded perturbations over the feature rows the clean projections read.
    // Position and free rows stay exactly zero: order is already conveyed by
    // the causal mask, and keeping them inert makes vision ablation and
    // from-layer pruning agree exactly even under re-indexed positions.
    let sigma = config.noise_scale / (layout.d_model as f64).sqrt();
    let active_rows = layout.role.end;
    for (which, w) in [&mut wq, &mut wk, &mut wv].into_iter().enumerate() {
        let idx = ((layer * config.num_heads + head) * 3 + which) as u64;
        let mut rng = seed::stream_indexed(config.seed, "weights", idx);
        for r in 0..active_rows {
            for c in 0..d_head {
                let z: f64 = StandardNormal.sample(&mut rng);
                let cur = w.get(r, c);
                w.set(r, c, cur + sigma * z);
            }
        }
    }

    HeadWeights { wq, wk, wv }
}

/// Exactly orthonormal rows via modified Gram-Schmidt on seeded Gaussian
/// draws. Requires `k <= d` (checked by config validation).
fn orthonormal_codes(k: usize, d: usize, master_seed: u64) -> Matrix {
    let mut rng = seed::stream(master_seed, "codes");
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(k);
    while rows.len() < k {
        let mut v: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
        for prev in &rows {
            let dot: f64 = v.iter().zip(prev).map(|(a, b)| a * b).sum();
            for (x, p) in v.iter_mut().zip(prev) {
                *x -= dot * p;
            }
        }
        let norm: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm < 1e-8 {
            continue; // essentially impossible; redraw for safety
        }
        for x in &mut v {
            *x /= norm;
        }
        rows.push(v);
    }
    Matrix::from_rows(rows).expect("non-empty code matrix")
}

/// Which object each vision slot encodes: every present object receives
/// floor(n/m) or ceil(n/m) contiguous slots, the remainder going to the
/// earliest objects in scene order.
pub fn vision_token_objects(n_vision: usize, present: &[ObjectId]) -> Vec<ObjectId> {
    let m = present.len();
    let base = n_vision / m;
    let extra = n_vision % m;
    let mut out = Vec::with_capacity(n_vision);
    for (i, &o) in present.iter().enumerate() {
        let count = base + usize::from(i < extra);
        out.extend(std::iter::repeat(o).take(count));
    }
    out
}

/// Vision-token embeddings for a scene: identity sub-block encodes the slot's
/// object, plus role and position features, plus seeded additive noise of
/// scale `noise_scale`. Deterministic in (model seed, present set).
pub fn embed_scene(model: &Model, present: &[ObjectId]) -> Result<Vec<Vec<f64>>> {
    let config = model.config();
    let layout = model.layout();
    let k = config.vocab.num_objects();
    if present.is_empty() {
        return Err(Error::input("scene has no present objects"));
    }
    for o in present {
        if o.0 >= k {
            return Err(Error::vocab(format!("unknown object id {}", o.0)));
        }
    }
    for i in 0..present.len() {
        for j in (i + 1)..present.len() {
            if present[i] == present[j] {
                return Err(Error::input("scene objects must be distinct"));
            }
        }
    }
    if config.n_vision < present.len() {
        return Err(Error::input(format!(
            "n_vision {} < {} present objects",
            config.n_vision,
            present.len()
        )));
    }

    let tag = present
        .iter()
        .fold(0xA076_1D64_78BD_642Fu64, |acc, o| {
            (acc ^ (o.0 as u64 + 1)).wrapping_mul(0x9E37_79B9_7F4A_7C15)
        });
    let mut rng = seed::stream_indexed(config.seed, "embed-scene", tag);

    let slots = vision_token_objects(config.n_vision, present);
    let mut out = Vec::with_capacity(config.n_vision);
    for (position, o) in slots.iter().enumerate() {
        let mut x = vec![0.0; layout.d_model];
        for (i, c) in layout.vision_id.clone().zip(0..layout.d_id) {
            x[i] = model.codes().get(o.0, c);
        }
        x[layout.role.start + ROLE_VISION] = 1.0;
        for (i, f) in layout.pos.clone().zip(layout.position_features(position)) {
            x[i] = f;
        }
        for v in &mut x {
            let z: f64 = rng.sample(StandardNormal);
            *v += config.noise_scale * z;
        }
        out.push(x);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::test_support::world_vocab;

    fn config(k: usize, seed: u64) -> ModelConfig {
        ModelConfig::new(world_vocab(k), seed)
    }

    #[test]
    fn same_config_same_digest() {
        let a = build_model(config(8, 42)).unwrap();
        let b = build_model(config(8, 42)).unwrap();
        assert_eq!(a.weight_digest(), b.weight_digest());
    }

    #[test]
    fn seed_changes_digest() {
        let a = build_model(config(8, 1)).unwrap();
        let b = build_model(config(8, 2)).unwrap();
        assert_ne!(a.weight_digest(), b.weight_digest());
    }

    #[test]
    fn zero_noise_means_zero_perturbation() {
        let mut cfg = config(8, 5);
        cfg.noise_scale = 0.0;
        let model = build_model(cfg).unwrap();
        let layout = model.layout().clone();
        // At sigma_e = 0 the perturbed entries collapse onto the clean
        // construction: rows the clean map leaves empty must be exactly zero.
        let w = model.head_weights(3, 1);
        for r in 0..layout.d_id {
            // text-identity rows of K are clean zeros
            for c in 0..layout.d_head {
                assert_eq!(w.wk.get(layout.text_id.start + r, c), 0.0);
            }
        }
        for r in layout.pos.clone() {
            for c in 0..layout.d_head {
                assert_eq!(w.wq.get(r, c), 0.0);
            }
        }
    }

    #[test]
    fn codes_are_orthonormal() {
        let model = build_model(config(10, 9)).unwrap();
        let c = model.codes();
        for i in 0..10 {
            for j in 0..10 {
                let dot: f64 = c.row(i).iter().zip(c.row(j)).map(|(a, b)| a * b).sum();
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((dot - expect).abs() < 1e-12, "codes not orthonormal at ({i},{j}): {dot}");
            }
        }
    }

    #[test]
    fn scene_embedding_split_and_determinism() {
        let mut cfg = config(8, 3);
        cfg.noise_scale = 0.0;
        cfg.n_vision = 4;
        let model = build_model(cfg).unwrap();

        // single object: all four slots carry its identity code
        let a = embed_scene(&model, &[ObjectId(2)]).unwrap();
        assert_eq!(a.len(), 4);
        for x in &a {
            for (i, c) in model.layout().vision_id.clone().zip(0..model.layout().d_id) {
                assert_eq!(x[i], model.codes().get(2, c));
            }
        }

        // two objects: an even 2/2 split
        let slots = vision_token_objects(4, &[ObjectId(0), ObjectId(5)]);
        assert_eq!(slots, vec![ObjectId(0), ObjectId(0), ObjectId(5), ObjectId(5)]);

        // uneven split: earliest objects take the remainder
        let slots = vision_token_objects(5, &[ObjectId(0), ObjectId(1)]);
        assert_eq!(
            slots,
            vec![ObjectId(0), ObjectId(0), ObjectId(0), ObjectId(1), ObjectId(1)]
        );

        // fixed seed, fixed scene: identical embeddings across calls
        let mut cfg = config(8, 3);
        cfg.n_vision = 4;
        let model = build_model(cfg).unwrap();
        let e1 = embed_scene(&model, &[ObjectId(1), ObjectId(2)]).unwrap();
        let e2 = embed_scene(&model, &[ObjectId(1), ObjectId(2)]).unwrap();
        assert_eq!(e1, e2);
    }

    #[test]
    fn unknown_object_is_vocab_error() {
        let model = build_model(config(8, 3)).unwrap();
        let err = embed_scene(&model, &[ObjectId(99)]).unwrap_err();
        assert!(matches!(err, crate::Error::Vocab(_)));
    }
}
