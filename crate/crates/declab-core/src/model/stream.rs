//! Ordered multimodal token sequences: a contiguous vision prefix followed by
//! instruction tokens and any generated tokens.

use super::build::{embed_scene, Model};
use super::vocab::{Control, ObjectId, TokenId};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Role {
    Vision,
    Instruction,
    Generated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenEntry {
    pub token: TokenId,
    pub role: Role,
    pub position: usize,
    /// Present exactly for vision entries.
    pub embedding: Option<Vec<f64>>,
}

/// Role-ordered token sequence. Vision entries form a contiguous prefix and
/// positions run 0, 1, 2, ... with no gaps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenStream {
    entries: Vec<TokenEntry>,
}

impl TokenStream {
    pub fn new(entries: Vec<TokenEntry>) -> Result<Self> {
        let stream = TokenStream { entries };
        stream.validate()?;
        Ok(stream)
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen_non_vision = false;
        for (i, e) in self.entries.iter().enumerate() {
            if e.position != i {
                return Err(Error::input(format!(
                    "position {} at index {i}; positions must run 0..n",
                    e.position
                )));
            }
            match e.role {
                Role::Vision => {
                    if seen_non_vision {
                        return Err(Error::input(
                            "vision entries must form a contiguous prefix",
                        ));
                    }
                    if e.embedding.is_none() {
                        return Err(Error::input("vision entry without embedding"));
                    }
                }
                _ => {
                    seen_non_vision = true;
                    if e.embedding.is_some() {
                        return Err(Error::input("text entry carries a vision embedding"));
                    }
                }
            }
        }
        // Generated tokens may not precede instruction tokens.
        let mut seen_generated = false;
        for e in &self.entries {
            match e.role {
                Role::Generated => seen_generated = true,
                Role::Instruction if seen_generated => {
                    return Err(Error::input("instruction token after generated tokens"))
                }
                _ => {}
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[TokenEntry] {
        &self.entries
    }

    pub fn vision_count(&self) -> usize {
        self.entries
            .iter()
            .take_while(|e| e.role == Role::Vision)
            .count()
    }

    /// Stream indices of the vision entries (always `0..vision_count`).
    pub fn vision_indices(&self) -> Vec<usize> {
        (0..self.vision_count()).collect()
    }

    pub fn generated_count(&self) -> usize {
        self.entries
            .iter()
            .filter(|e| e.role == Role::Generated)
            .count()
    }

    /// Append a generated token at the next position.
    pub fn push_generated(&mut self, token: TokenId) {
        let position = self.entries.len();
        self.entries.push(TokenEntry {
            token,
            role: Role::Generated,
            position,
            embedding: None,
        });
    }

    /// Replace all entries (used by disturbances); re-validates.
    pub fn with_entries(entries: Vec<TokenEntry>) -> Result<Self> {
        TokenStream::new(entries)
    }
}

/// Vision prefix for a scene followed by `[<bos> <query> <object>]`.
pub fn probe_stream(model: &Model, present: &[ObjectId], queried: ObjectId) -> Result<TokenStream> {
    let vocab = model.vocab();
    if queried.0 >= vocab.num_objects() {
        return Err(Error::vocab(format!("queried object {} out of range", queried.0)));
    }
    let mut entries = vision_entries(model, present)?;
    for token in [
        vocab.control_token(Control::Bos),
        vocab.control_token(Control::Query),
        vocab.object_token(queried),
    ] {
        let position = entries.len();
        entries.push(TokenEntry {
            token,
            role: Role::Instruction,
            position,
            embedding: None,
        });
    }
    TokenStream::new(entries)
}

/// Vision prefix for a scene followed by `[<bos> <describe>]`.
pub fn caption_stream(model: &Model, present: &[ObjectId]) -> Result<TokenStream> {
    let vocab = model.vocab();
    let mut entries = vision_entries(model, present)?;
    for token in [
        vocab.control_token(Control::Bos),
        vocab.control_token(Control::Describe),
    ] {
        let position = entries.len();
        entries.push(TokenEntry {
            token,
            role: Role::Instruction,
            position,
            embedding: None,
        });
    }
    TokenStream::new(entries)
}

fn vision_entries(model: &Model, present: &[ObjectId]) -> Result<Vec<TokenEntry>> {
    let embeddings = embed_scene(model, present)?;
    let vocab = model.vocab();
    let per_object = super::build::vision_token_objects(model.config().n_vision, present);
    Ok(embeddings
        .into_iter()
        .zip(per_object)
        .enumerate()
        .map(|(position, (embedding, object))| TokenEntry {
            token: vocab.object_token(object),
            role: Role::Vision,
            position,
            embedding: Some(embedding),
        })
        .collect())
}
