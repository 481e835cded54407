//! Decoding strategies: greedy and sampling pickers, the adaptive
//! plausibility constraint, contrastive and additive logit combination, and
//! the per-step orchestration that pairs an original forward pass with a
//! disturbed one.

use crate::disturb::{self, DisturbanceKind, DisturbanceSpec};
use crate::model::{
    forward_from_layer, forward_step, Control, ForwardResult, Model, TokenId, TokenStream,
};
use crate::numerics::softmax;
use crate::seed::{self, SplitMix64};
use crate::select::{select_least, select_random, select_top, vision_importance};
use crate::{Error, Result};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Normal,
    Vcd,
    Icd,
    Vig,
    Sid,
    SidTop,
    SidRandom,
    Add,
}

impl Strategy {
    pub fn is_introspective(self) -> bool {
        matches!(self, Strategy::Sid | Strategy::SidTop | Strategy::SidRandom | Strategy::Add)
    }

    pub fn is_holistic(self) -> bool {
        matches!(self, Strategy::Vcd | Strategy::Icd | Strategy::Vig)
    }

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Normal => "normal",
            Strategy::Vcd => "vcd",
            Strategy::Icd => "icd",
            Strategy::Vig => "vig",
            Strategy::Sid => "sid",
            Strategy::SidTop => "sid_top",
            Strategy::SidRandom => "sid_random",
            Strategy::Add => "add",
        }
    }
}

impl std::str::FromStr for Strategy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "normal" => Ok(Strategy::Normal),
            "vcd" => Ok(Strategy::Vcd),
            "icd" => Ok(Strategy::Icd),
            "vig" => Ok(Strategy::Vig),
            "sid" => Ok(Strategy::Sid),
            "sid_top" => Ok(Strategy::SidTop),
            "sid_random" => Ok(Strategy::SidRandom),
            "add" => Ok(Strategy::Add),
            other => Err(Error::input(format!("unknown strategy '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Picker {
    Greedy,
    Sample,
}

fn default_sigma_d() -> f64 {
    1.0
}

/// Strategy selector plus every decoding knob.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecodeConfig {
    pub strategy: Strategy,
    pub base_picker: Picker,
    pub alpha: f64,
    pub beta: f64,
    pub layer_i: usize,
    pub keep_ratio: f64,
    pub temperature: f64,
    #[serde(default)]
    pub top_k: Option<usize>,
    #[serde(default)]
    pub top_p: Option<f64>,
    pub max_new_tokens: usize,
    pub seed: u64,
    /// Gaussian vision-disturbance scale in units of the stream's vision
    /// embedding RMS (used by the gaussian baseline only).
    #[serde(default = "default_sigma_d")]
    pub sigma_d: f64,
    /// Baselines disturb once per sequence; set to re-disturb every step.
    #[serde(default)]
    pub redisturb_each_step: bool,
}

impl Default for DecodeConfig {
    fn default() -> Self {
        DecodeConfig {
            strategy: Strategy::Normal,
            base_picker: Picker::Greedy,
            alpha: 1.0,
            beta: 0.1,
            layer_i: 3,
            keep_ratio: 0.1,
            temperature: 1.0,
            top_k: None,
            top_p: None,
            max_new_tokens: 12,
            seed: 0,
            sigma_d: 1.0,
            redisturb_each_step: false,
        }
    }
}

impl DecodeConfig {
    pub fn validate(&self, num_layers: usize) -> Result<()> {
        if !(self.alpha >= 0.0) {
            return Err(Error::input("alpha must be >= 0"));
        }
        if self.strategy == Strategy::Add && self.alpha > 1.0 {
            return Err(Error::input("additive strategy needs alpha in [0,1]"));
        }
        if !(0.0..=1.0).contains(&self.beta) {
            return Err(Error::input("beta must lie in [0,1]"));
        }
        if !(self.temperature > 0.0) {
            return Err(Error::input("temperature must be > 0"));
        }
        if let Some(p) = self.top_p {
            if !(p > 0.0 && p <= 1.0) {
                return Err(Error::input("top_p must lie in (0,1]"));
            }
        }
        if let Some(k) = self.top_k {
            if k == 0 {
                return Err(Error::input("top_k must be positive"));
            }
        }
        if self.strategy.is_introspective() {
            if self.layer_i == 0 || self.layer_i > num_layers {
                return Err(Error::input(format!(
                    "layer_i {} outside 1..={num_layers}",
                    self.layer_i
                )));
            }
            if !(0.0..=1.0).contains(&self.keep_ratio) {
                return Err(Error::input("keep_ratio must lie in [0,1]"));
            }
        }
        Ok(())
    }

    #[cfg(test)]
    fn with(mut self, f: impl FnOnce(&mut Self)) -> Self {
        f(&mut self);
        self
    }
}

/// Everything observable about one decoding step.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StepDiagnostics {
    pub chosen: TokenId,
    pub original_logits: Vec<f64>,
    pub disturbed_logits: Option<Vec<f64>>,
    pub kept_vision: Option<Vec<usize>>,
    pub admissible_count: usize,
    pub mac_counts: Vec<u64>,
}

/// Argmax over logits; ties break toward the smallest token id.
pub fn greedy_next(logits: &[f64]) -> TokenId {
    let mut best = 0usize;
    for (i, v) in logits.iter().enumerate().skip(1) {
        if *v > logits[best] {
            best = i;
        }
    }
    TokenId(best)
}

/// Temperature / top-k / top-p sampling from the given logits via the seeded
/// stream. Non-finite logits are treated as excluded tokens.
pub fn sample_next(
    logits: &[f64],
    temperature: f64,
    top_k: Option<usize>,
    top_p: Option<f64>,
    rng: &mut SplitMix64,
) -> Result<TokenId> {
    if !(temperature > 0.0) {
        return Err(Error::input("temperature must be > 0"));
    }
    if let Some(p) = top_p {
        if !(p > 0.0 && p <= 1.0) {
            return Err(Error::input("top_p must lie in (0,1]"));
        }
    }
    let mut candidates: Vec<(usize, f64)> = logits
        .iter()
        .enumerate()
        .filter(|(_, v)| v.is_finite())
        .map(|(i, v)| (i, v / temperature))
        .collect();
    if candidates.is_empty() {
        return Err(Error::Sampling("no tokens with finite logits".into()));
    }
    let max = candidates
        .iter()
        .map(|(_, v)| *v)
        .fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for (_, v) in &mut candidates {
        *v = (*v - max).exp();
        total += *v;
    }
    for (_, v) in &mut candidates {
        *v /= total;
    }
    // descending probability, ties toward the smaller id
    candidates.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    if let Some(k) = top_k {
        candidates.truncate(k.max(1));
        renormalize(&mut candidates);
    }
    if let Some(p) = top_p {
        let mut cumulative = 0.0;
        let mut cut = candidates.len();
        for (i, (_, prob)) in candidates.iter().enumerate() {
            cumulative += prob;
            if cumulative >= p - 1e-12 {
                cut = i + 1;
                break;
            }
        }
        candidates.truncate(cut);
        renormalize(&mut candidates);
    }
    let draw: f64 = rng.gen();
    let mut cumulative = 0.0;
    for (i, prob) in &candidates {
        cumulative += prob;
        if draw < cumulative {
            return Ok(TokenId(*i));
        }
    }
    Ok(TokenId(candidates.last().expect("non-empty").0))
}

fn renormalize(candidates: &mut [(usize, f64)]) {
    let total: f64 = candidates.iter().map(|(_, p)| *p).sum();
    for (_, p) in candidates.iter_mut() {
        *p /= total;
    }
}

/// Adaptive plausibility constraint: tokens whose original probability is at
/// least `beta` times the maximum (and strictly positive).
pub fn plausibility_set(original_probs: &[f64], beta: f64) -> Result<BTreeSet<usize>> {
    if !(0.0..=1.0).contains(&beta) {
        return Err(Error::input("beta must lie in [0,1]"));
    }
    if original_probs.is_empty() {
        return Err(Error::input("empty probability vector"));
    }
    if original_probs.iter().any(|p| *p < 0.0 || !p.is_finite()) {
        return Err(Error::input("probabilities must be finite and non-negative"));
    }
    let max = original_probs
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(original_probs
        .iter()
        .enumerate()
        .filter(|(_, p)| **p > 0.0 && **p >= beta * max)
        .map(|(i, _)| i)
        .collect())
}

/// Contrastive combination `(1 + alpha) * orig - alpha * disturbed`.
pub fn contrastive_combine(logit_orig: &[f64], logit_dist: &[f64], alpha: f64) -> Result<Vec<f64>> {
    if logit_orig.len() != logit_dist.len() {
        return Err(Error::dimension(format!(
            "contrastive lengths {} vs {}",
            logit_orig.len(),
            logit_dist.len()
        )));
    }
    Ok(logit_orig
        .iter()
        .zip(logit_dist)
        .map(|(o, d)| (1.0 + alpha) * o - alpha * d)
        .collect())
}

/// Additive combination `(1 - alpha) * orig + alpha * enhanced`, alpha in [0,1].
pub fn additive_combine(logit_orig: &[f64], logit_enhanced: &[f64], alpha: f64) -> Result<Vec<f64>> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::input("additive alpha must lie in [0,1]"));
    }
    if logit_orig.len() != logit_enhanced.len() {
        return Err(Error::dimension(format!(
            "additive lengths {} vs {}",
            logit_orig.len(),
            logit_enhanced.len()
        )));
    }
    Ok(logit_orig
        .iter()
        .zip(logit_enhanced)
        .map(|(o, e)| (1.0 - alpha) * o + alpha * e)
        .collect())
}

fn pick(
    combined: &[f64],
    admissible: &BTreeSet<usize>,
    config: &DecodeConfig,
    rng: &mut SplitMix64,
) -> Result<TokenId> {
    if admissible.is_empty() {
        return Err(Error::Sampling("empty admissible set".into()));
    }
    let masked: Vec<f64> = combined
        .iter()
        .enumerate()
        .map(|(i, v)| if admissible.contains(&i) { *v } else { f64::NEG_INFINITY })
        .collect();
    match config.base_picker {
        Picker::Greedy => {
            let mut best: Option<usize> = None;
            for &i in admissible {
                match best {
                    None => best = Some(i),
                    Some(b) if combined[i] > combined[b] => best = Some(i),
                    _ => {}
                }
            }
            Ok(TokenId(best.expect("non-empty admissible")))
        }
        Picker::Sample => sample_next(&masked, config.temperature, config.top_k, config.top_p, rng),
    }
}

fn build_disturbed(
    model: &Model,
    stream: &TokenStream,
    config: &DecodeConfig,
    step_index: usize,
) -> Result<TokenStream> {
    let noise_seed = seed::derive_seed_indexed(config.seed, "disturb", step_index as u64);
    let spec = match config.strategy {
        Strategy::Vcd => DisturbanceSpec {
            kind: DisturbanceKind::GaussianVision,
            sigma_d: config.sigma_d * disturb::vision_rms(stream),
            negative_prefix: vec![],
            seed: noise_seed,
        },
        Strategy::Icd => DisturbanceSpec {
            kind: DisturbanceKind::NegativeInstruction,
            sigma_d: 0.0,
            negative_prefix: vec![model.vocab().control_token(Control::Confuse)],
            seed: noise_seed,
        },
        Strategy::Vig => DisturbanceSpec {
            kind: DisturbanceKind::AblateVision,
            sigma_d: 0.0,
            negative_prefix: vec![],
            seed: noise_seed,
        },
        _ => return Err(Error::input("no holistic disturbance for this strategy")),
    };
    disturb::apply(&spec, stream, model.vocab())
}

fn step_inner(
    model: &Model,
    stream: &TokenStream,
    disturbed_stream: Option<&TokenStream>,
    config: &DecodeConfig,
    step_index: usize,
) -> Result<(TokenId, StepDiagnostics)> {
    config.validate(model.config().num_layers)?;
    let original = forward_step(model, stream)?;
    let original_probs = softmax(&original.logits)?;
    let mut rng = seed::stream_indexed(config.seed, "picker", step_index as u64);

    let finish = |token: TokenId,
                  original: &ForwardResult,
                  disturbed: Option<(&ForwardResult, Option<Vec<usize>>)>,
                  admissible_count: usize| {
        let (disturbed_logits, kept_vision, mac_counts) = match disturbed {
            Some((d, kept)) => (Some(d.logits.clone()), kept, vec![original.mac_count, d.mac_count]),
            None => (None, None, vec![original.mac_count]),
        };
        StepDiagnostics {
            chosen: token,
            original_logits: original.logits.clone(),
            disturbed_logits,
            kept_vision,
            admissible_count,
            mac_counts,
        }
    };

    match config.strategy {
        Strategy::Normal => {
            let admissible = plausibility_set(&original_probs, 0.0)?;
            let token = pick(&original.logits, &admissible, config, &mut rng)?;
            Ok((token, finish(token, &original, None, admissible.len())))
        }
        Strategy::Vcd | Strategy::Icd | Strategy::Vig => {
            let owned;
            let disturbed = match disturbed_stream {
                Some(d) => d,
                None => {
                    owned = build_disturbed(model, stream, config, step_index)?;
                    &owned
                }
            };
            let dist = forward_step(model, disturbed)?;
            let combined = contrastive_combine(&original.logits, &dist.logits, config.alpha)?;
            let admissible = plausibility_set(&original_probs, config.beta)?;
            let token = pick(&combined, &admissible, config, &mut rng)?;
            let diag = finish(token, &original, Some((&dist, None)), admissible.len());
            Ok((token, diag))
        }
        Strategy::Sid | Strategy::SidTop | Strategy::SidRandom => {
            let n_vision = stream.vision_count();
            let vision_indices: Vec<usize> = (0..n_vision).collect();
            let scores = vision_importance(&original.trace, config.layer_i, &vision_indices)?;
            let kept = match config.strategy {
                Strategy::Sid => select_least(&scores, config.keep_ratio)?,
                Strategy::SidTop => select_top(&scores, config.keep_ratio)?,
                Strategy::SidRandom => select_random(
                    n_vision,
                    config.keep_ratio,
                    seed::derive_seed_indexed(config.seed, "sid-random", step_index as u64),
                )?,
                _ => unreachable!(),
            };
            let dist = forward_from_layer(model, stream, config.layer_i, &kept)?;
            let combined = contrastive_combine(&original.logits, &dist.logits, config.alpha)?;
            let admissible = plausibility_set(&original_probs, config.beta)?;
            let token = pick(&combined, &admissible, config, &mut rng)?;
            let kept_vec: Vec<usize> = kept.into_iter().collect();
            let diag = finish(token, &original, Some((&dist, Some(kept_vec))), admissible.len());
            Ok((token, diag))
        }
        Strategy::Add => {
            let n_vision = stream.vision_count();
            let vision_indices: Vec<usize> = (0..n_vision).collect();
            let scores = vision_importance(&original.trace, config.layer_i, &vision_indices)?;
            let kept = select_top(&scores, config.keep_ratio)?;
            let enhanced = forward_from_layer(model, stream, config.layer_i, &kept)?;
            let combined = additive_combine(&original.logits, &enhanced.logits, config.alpha)?;
            let admissible = plausibility_set(&original_probs, config.beta)?;
            let token = pick(&combined, &admissible, config, &mut rng)?;
            let kept_vec: Vec<usize> = kept.into_iter().collect();
            let diag = finish(token, &original, Some((&enhanced, Some(kept_vec))), admissible.len());
            Ok((token, diag))
        }
    }
}

/// One decoding step on the given stream. Holistic baselines build their
/// disturbed stream here; within [`generate`] the disturbance is built once
/// per sequence instead.
pub fn decode_step(
    model: &Model,
    stream: &TokenStream,
    config: &DecodeConfig,
) -> Result<(TokenId, StepDiagnostics)> {
    step_inner(model, stream, None, config, 0)
}

/// Auto-regressive loop: repeats [`decode_step`], appending each chosen token
/// as generated, until end-of-sequence or `max_new_tokens`. Introspective
/// strategies recompute their kept set at every step from the current trace.
pub fn generate(
    model: &Model,
    initial: &TokenStream,
    config: &DecodeConfig,
) -> Result<(Vec<TokenId>, Vec<StepDiagnostics>)> {
    config.validate(model.config().num_layers)?;
    let eos = model.vocab().control_token(Control::Eos);
    let mut stream = initial.clone();
    let mut disturbed: Option<TokenStream> = None;
    let mut tokens = Vec::new();
    let mut diagnostics = Vec::new();
    for step_index in 0..config.max_new_tokens {
        if config.strategy.is_holistic() && (disturbed.is_none() || config.redisturb_each_step) {
            disturbed = Some(build_disturbed(model, &stream, config, step_index)?);
        }
        let (token, diag) = step_inner(model, &stream, disturbed.as_ref(), config, step_index)?;
        tokens.push(token);
        diagnostics.push(diag);
        if token == eos {
            break;
        }
        stream.push_generated(token);
        if let Some(d) = &mut disturbed {
            d.push_generated(token);
        }
    }
    Ok((tokens, diagnostics))
}
