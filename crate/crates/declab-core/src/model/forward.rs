//! Forward passes: full, and with vision tokens dropped from a chosen layer
//! onward. Captures per-layer per-head attention and exact
//! multiply-accumulate counts.

use super::build::Model;
use super::stream::{Role, TokenStream};
use super::vocab::{Control, ObjectId};
use super::{CTX_LAYER, EOS_LEN_GAIN, NEG_LOGIT};
use crate::numerics::{causal_attention, Matrix};
use crate::{Error, Result};
use std::collections::BTreeSet;

/// Per-layer list of per-head attention matrices captured during a forward
/// pass. Layers that ran on a pruned stream store smaller matrices.
#[derive(Debug, Clone)]
pub struct AttentionTrace {
    layers: Vec<Vec<Matrix>>,
}

impl AttentionTrace {
    /// Assemble a trace from per-layer, per-head attention matrices.
    pub fn from_matrices(layers: Vec<Vec<Matrix>>) -> Self {
        AttentionTrace { layers }
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    /// Attention matrices of one layer, one per head (1-indexed layer).
    pub fn layer(&self, layer: usize) -> &[Matrix] {
        &self.layers[layer - 1]
    }

    pub fn heads(&self) -> usize {
        self.layers.first().map(|l| l.len()).unwrap_or(0)
    }
}

/// Output of a forward pass: next-token logits over the vocabulary, the
/// attention trace, and the multiply-accumulate count of everything computed.
#[derive(Debug, Clone)]
pub struct ForwardResult {
    pub logits: Vec<f64>,
    pub trace: AttentionTrace,
    pub mac_count: u64,
}

/// Language-prior logits over the vocabulary: object entries carry
/// `evidence_gain * P[last_object, .]`, or the uniform object prior when no
/// object has been mentioned; control tokens get zero.
pub fn prior_logits(model: &Model, last_object: Option<ObjectId>) -> Vec<f64> {
    let vocab = model.vocab();
    let k = vocab.num_objects();
    let kappa = model.config().evidence_gain;
    let mut out = vec![0.0; vocab.len()];
    match last_object {
        Some(o) => {
            let p = vocab.cooccurrence();
            for (slot, target) in out.iter_mut().take(k).enumerate() {
                *target = kappa * p.get(o.0, slot);
            }
        }
        None => {
            let uniform = kappa / k as f64;
            for target in out.iter_mut().take(k) {
                *target = uniform;
            }
        }
    }
    out
}

/// Full forward pass over all layers.
pub fn forward_step(model: &Model, stream: &TokenStream) -> Result<ForwardResult> {
    let all: BTreeSet<usize> = (0..stream.vision_count()).collect();
    forward_from_layer(model, stream, model.config().num_layers, &all)
}

/// Forward pass that runs layers `1..=layer_i` on the full stream and then
/// removes every vision token outside `kept_vision` from the key/value set of
/// layers `layer_i+1..=L`. Dropped positions are removed outright, so the
/// later layers run on a shorter sequence; surviving positions keep their
/// original embeddings and relative order.
pub fn forward_from_layer(
    model: &Model,
    stream: &TokenStream,
    layer_i: usize,
    kept_vision: &BTreeSet<usize>,
) -> Result<ForwardResult> {
    if stream.is_empty() {
        return Err(Error::input("forward on empty stream"));
    }
    stream.validate()?;
    let config = model.config();
    let num_layers = config.num_layers;
    if layer_i == 0 || layer_i > num_layers {
        return Err(Error::input(format!(
            "layer_i {layer_i} outside 1..={num_layers}"
        )));
    }
    let n_vision = stream.vision_count();
    if let Some(&bad) = kept_vision.iter().find(|i| **i >= n_vision) {
        return Err(Error::input(format!(
            "kept_vision index {bad} is not a vision index (stream has {n_vision})"
        )));
    }

    let layout = model.layout();
    let d_head = layout.d_head;
    let d_model = layout.d_model as u64;
    let heads = config.num_heads;

    // Embed once; pruned layers reuse the same rows.
    let full_rows: Vec<Vec<f64>> = stream
        .entries()
        .iter()
        .map(|e| match &e.embedding {
            Some(v) => v.clone(),
            None => model.embed_text(e.token, e.role, e.position),
        })
        .collect();
    let x_full = Matrix::from_rows(full_rows.clone())?;

    let survivors: Vec<usize> = (0..stream.len())
        .filter(|&i| i >= n_vision || kept_vision.contains(&i))
        .collect();
    let pruned = survivors.len() != stream.len() && layer_i < num_layers;
    let x_pruned = if pruned {
        Some(Matrix::from_rows(
            survivors.iter().map(|&i| full_rows[i].clone()).collect(),
        )?)
    } else {
        None
    };

    let ctx_layer = CTX_LAYER.min(num_layers);
    let mut mac_count: u64 = 0;
    let mut trace_layers: Vec<Vec<Matrix>> = Vec::with_capacity(num_layers);
    // (mean-head last attention row, mean-head propagated identity, vision positions)
    let mut ctx_read: Option<LayerRead> = None;
    let mut final_read: Option<LayerRead> = None;

    for l in 1..=num_layers {
        let (x, vision_here): (&Matrix, Vec<usize>) = if l > layer_i && pruned {
            let vis = survivors
                .iter()
                .enumerate()
                .filter(|(_, &orig)| orig < n_vision)
                .map(|(new_idx, _)| new_idx)
                .collect();
            (x_pruned.as_ref().unwrap(), vis)
        } else {
            (&x_full, (0..n_vision).collect())
        };
        let n = x.rows();
        let mut layer_trace = Vec::with_capacity(heads);
        let mut head_rs: Vec<Matrix> = Vec::with_capacity(heads);
        for h in 0..heads {
            let w = model.head_weights(l - 1, h);
            let q = x.matmul(&w.wq)?;
            let k = x.matmul(&w.wk)?;
            let v = x.matmul(&w.wv)?;
            let (r, a) = causal_attention(&q, &k, &v, d_head)?;
            layer_trace.push(a);
            head_rs.push(r);
        }
        // Dense projection cost plus the visible-prefix attention cost.
        let n64 = n as u64;
        let tri = n64 * (n64 + 1) / 2;
        mac_count += heads as u64 * (3 * n64 * d_model * d_head as u64 + 2 * tri * d_head as u64);

        if l == ctx_layer || l == num_layers {
            let read = LayerRead::from_heads(&layer_trace, &head_rs, layout.d_id, vision_here);
            if l == ctx_layer {
                ctx_read = Some(read.clone());
            }
            if l == num_layers {
                final_read = Some(read);
            }
        }
        trace_layers.push(layer_trace);
    }

    let final_read = final_read.expect("final layer always read");
    let ctx_read = ctx_read.expect("ctx layer always read");
    let (logits, readout_macs) = readout(model, stream, &final_read, &ctx_read)?;
    mac_count += readout_macs;

    if logits.iter().any(|v| !v.is_finite()) {
        return Err(Error::numeric("non-finite logit"));
    }

    Ok(ForwardResult {
        logits,
        trace: AttentionTrace {
            layers: trace_layers,
        },
        mac_count,
    })
}

/// Final-row summary of one layer: mean-head attention row, mean-head
/// propagated identity (the value pathway restricted to the identity
/// channel), and which row indices are vision tokens.
#[derive(Debug, Clone)]
struct LayerRead {
    attn_row: Vec<f64>,
    identity: Vec<f64>,
    vision_rows: Vec<usize>,
}

impl LayerRead {
    fn from_heads(attn: &[Matrix], rs: &[Matrix], d_id: usize, vision_rows: Vec<usize>) -> Self {
        let h = attn.len();
        let n = attn[0].rows();
        let last = n - 1;
        let mut attn_row = vec![0.0; n];
        let mut identity = vec![0.0; d_id];
        for j in 0..h {
            for (acc, v) in attn_row.iter_mut().zip(attn[j].row(last)) {
                *acc += v / h as f64;
            }
            for (acc, v) in identity.iter_mut().zip(&rs[j].row(last)[..d_id]) {
                *acc += v / h as f64;
            }
        }
        LayerRead {
            attn_row,
            identity,
            vision_rows,
        }
    }

    fn vision_mass(&self) -> f64 {
        self.vision_rows.iter().map(|&p| self.attn_row[p]).sum()
    }
}

enum Mode {
    Probe { queried: ObjectId },
    Caption,
}

/// Closed-form output heads over the attention the model actually computed.
fn readout(
    model: &Model,
    stream: &TokenStream,
    final_read: &LayerRead,
    ctx_read: &LayerRead,
) -> Result<(Vec<f64>, u64)> {
    let vocab = model.vocab();
    let config = model.config();
    let k = vocab.num_objects();
    let kappa = config.evidence_gain;
    let lambda = config.prior_strength;
    let tau = config.answer_threshold;

    // Symbolic view of the text context.
    let mut mentioned: BTreeSet<ObjectId> = BTreeSet::new();
    let mut last_object: Option<ObjectId> = None;
    let mut queried: Option<ObjectId> = None;
    let mut has_query = false;
    let mut n_generated = 0usize;
    for e in stream.entries() {
        match e.role {
            Role::Vision => continue,
            Role::Generated => n_generated += 1,
            Role::Instruction => {}
        }
        if vocab.as_control(e.token) == Some(Control::Query) {
            has_query = true;
        }
        if let Some(o) = vocab.as_object(e.token) {
            mentioned.insert(o);
            last_object = Some(o);
            if e.role == Role::Instruction && has_query {
                queried = Some(o);
            }
        }
    }
    let mode = if has_query {
        let queried =
            queried.ok_or_else(|| Error::input("probe stream has <query> but no queried object"))?;
        Mode::Probe { queried }
    } else {
        Mode::Caption
    };

    // Visual evidence per object from the final layer.
    let codes = model.codes();
    let ev: Vec<f64> = (0..k)
        .map(|o| {
            final_read
                .identity
                .iter()
                .zip(codes.row(o))
                .map(|(a, b)| a * b)
                .sum()
        })
        .collect();

    // Scene context from the early layer: per-object share of vision mass.
    let g_ctx = ctx_read.vision_mass();
    let ctx_share: Vec<f64> = (0..k)
        .map(|o| {
            if g_ctx > 1e-9 {
                let raw: f64 = ctx_read
                    .identity
                    .iter()
                    .zip(codes.row(o))
                    .map(|(a, b)| a * b)
                    .sum();
                (raw / g_ctx).clamp(0.0, 1.0)
            } else {
                0.0
            }
        })
        .collect();

    // Grounding. Evidence for the current prediction target counts in full;
    // attention mass on other unmentioned objects is spurious with respect
    // to the target and grounds only at a discount. The prior head scales
    // with the complement, so stripping vision support from the key/value
    // set amplifies prior-driven logits.
    let unmentioned_support: f64 = (0..k)
        .filter(|o| !mentioned.contains(&ObjectId(*o)))
        .map(|o| ev[o].max(0.0))
        .sum();
    let target_support = match &mode {
        Mode::Probe { queried } => ev[queried.0].max(0.0),
        Mode::Caption => 0.0,
    };
    let gate = (1.0 - target_support - super::SPURIOUS_DISCOUNT * unmentioned_support)
        .clamp(0.0, 1.0);

    let prior = prior_logits(model, last_object);

    let mut logits = vec![NEG_LOGIT; vocab.len()];
    match mode {
        Mode::Probe { queried } => {
            if n_generated == 0 {
                let p = vocab.cooccurrence();
                let assoc: f64 = (0..k).map(|a| p.get(queried.0, a) * ctx_share[a]).sum();
                let support = ev[queried.0] + lambda * gate * super::ASSOC_GAIN * assoc;
                logits[vocab.control_token(Control::Yes).0] = kappa * support;
                logits[vocab.control_token(Control::No).0] = kappa * (tau - support);
            } else {
                // The probe is answered; close the sequence.
                logits[vocab.control_token(Control::Eos).0] = 0.0;
            }
        }
        Mode::Caption => {
            for o in 0..k {
                if !mentioned.contains(&ObjectId(o)) {
                    logits[o] = kappa * ev[o] + lambda * gate * super::PRIOR_GAIN * prior[o];
                }
            }
            let length_pressure = lambda * gate * kappa * EOS_LEN_GAIN * n_generated as f64;
            logits[vocab.control_token(Control::Eos).0] =
                kappa * (tau - unmentioned_support) + length_pressure;
        }
    }

    // Readout cost: identity projections at the two read layers, evidence and
    // context dots per object, the association contraction, and the blend.
    let d_id = model.layout().d_id as u64;
    let heads = config.num_heads as u64;
    let k64 = k as u64;
    let readout_macs = 2 * (heads * d_id + k64 * d_id) + k64 * k64 + 4 * k64;

    Ok((logits, readout_macs))
}
