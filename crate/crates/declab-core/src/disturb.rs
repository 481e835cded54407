//! Holistic input disturbances used by the contrastive baselines: Gaussian
//! noise on vision embeddings, outright vision ablation, and negative
//! instruction prefixes.

use crate::model::{Role, TokenEntry, TokenId, TokenStream, Vocabulary};
use crate::seed;
use crate::{Error, Result};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DisturbanceKind {
    GaussianVision,
    AblateVision,
    NegativeInstruction,
}

/// Declarative disturbance description, serializable into experiment configs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DisturbanceSpec {
    pub kind: DisturbanceKind,
    /// Gaussian scale (absolute, in embedding units).
    #[serde(default)]
    pub sigma_d: f64,
    /// Tokens inserted before the instruction segment.
    #[serde(default)]
    pub negative_prefix: Vec<TokenId>,
    pub seed: u64,
}

impl DisturbanceSpec {
    pub fn validate(&self) -> Result<()> {
        if self.kind == DisturbanceKind::GaussianVision && !(self.sigma_d > 0.0) {
            return Err(Error::input("gaussian disturbance requires sigma_d > 0"));
        }
        Ok(())
    }
}

/// Apply a disturbance spec to a stream.
pub fn apply(spec: &DisturbanceSpec, stream: &TokenStream, vocab: &Vocabulary) -> Result<TokenStream> {
    spec.validate()?;
    match spec.kind {
        DisturbanceKind::GaussianVision => gaussian_vision_disturb(stream, spec.sigma_d, spec.seed),
        DisturbanceKind::AblateVision => Ok(ablate_vision(stream)),
        DisturbanceKind::NegativeInstruction => {
            negative_instruction(stream, &spec.negative_prefix, vocab)
        }
    }
}

/// Add i.i.d. zero-mean Gaussian noise of scale `sigma_d` to every vision
/// embedding entry; text entries are untouched.
pub fn gaussian_vision_disturb(stream: &TokenStream, sigma_d: f64, seed_value: u64) -> Result<TokenStream> {
    if stream.vision_count() == 0 {
        return Err(Error::input("gaussian disturbance on a stream without vision tokens"));
    }
    let mut rng = seed::stream(seed_value, "gaussian-vision");
    let entries = stream
        .entries()
        .iter()
        .map(|e| {
            let mut e = e.clone();
            if e.role == Role::Vision {
                let emb = e.embedding.as_mut().expect("vision entry has embedding");
                for v in emb.iter_mut() {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    *v += sigma_d * z;
                }
            }
            e
        })
        .collect();
    TokenStream::with_entries(entries)
}

/// Root-mean-square of the vision embedding entries; the conventional unit
/// for choosing a Gaussian disturbance scale.
pub fn vision_rms(stream: &TokenStream) -> f64 {
    let mut sum = 0.0;
    let mut count = 0usize;
    for e in stream.entries() {
        if let Some(emb) = &e.embedding {
            sum += emb.iter().map(|v| v * v).sum::<f64>();
            count += emb.len();
        }
    }
    if count == 0 {
        0.0
    } else {
        (sum / count as f64).sqrt()
    }
}

/// Remove every vision token; positions are re-indexed and text order is
/// preserved.
pub fn ablate_vision(stream: &TokenStream) -> TokenStream {
    let entries: Vec<TokenEntry> = stream
        .entries()
        .iter()
        .filter(|e| e.role != Role::Vision)
        .enumerate()
        .map(|(position, e)| TokenEntry {
            token: e.token,
            role: e.role,
            position,
            embedding: None,
        })
        .collect();
    TokenStream::with_entries(entries).expect("text-only stream is always valid")
}

/// Insert a prefix before the instruction tokens; the vision prefix and
/// generated suffix are untouched apart from re-indexing.
pub fn negative_instruction(
    stream: &TokenStream,
    prefix: &[TokenId],
    vocab: &Vocabulary,
) -> Result<TokenStream> {
    for t in prefix {
        if t.0 >= vocab.len() {
            return Err(Error::vocab(format!("prefix token id {} not in vocabulary", t.0)));
        }
    }
    let n_vision = stream.vision_count();
    let mut entries: Vec<TokenEntry> = Vec::with_capacity(stream.len() + prefix.len());
    entries.extend(stream.entries()[..n_vision].iter().cloned());
    for t in prefix {
        entries.push(TokenEntry {
            token: *t,
            role: Role::Instruction,
            position: 0, // re-indexed below
            embedding: None,
        });
    }
    entries.extend(stream.entries()[n_vision..].iter().cloned());
    for (i, e) in entries.iter_mut().enumerate() {
        e.position = i;
    }
    TokenStream::with_entries(entries)
}
