//! Deterministic toy multimodal decoder-only transformer.
//!
//! The model is constructed analytically rather than trained: object identity
//! codes are orthonormal, query/key projections align text-object queries with
//! matching vision tokens, and the output heads are closed-form functions of
//! the attention the model actually computed. That makes its attention
//! semantically meaningful by construction and gives every experiment an
//! analytic oracle.
//!
//! Hallucination is controlled by two explicit knobs: `noise_scale` perturbs
//! embeddings and projections, and `prior_strength` injects a co-occurrence
//! language prior whose weight grows as the final attention row loses visual
//! grounding.

mod build;
mod config;
mod forward;
mod stream;
mod vocab;

pub use build::{build_model, embed_scene, Model};
pub use config::{BlockLayout, ModelConfig};
pub use forward::{
    forward_from_layer, forward_step, prior_logits, AttentionTrace, ForwardResult,
};
pub use stream::{caption_stream, probe_stream, Role, TokenEntry, TokenStream};
pub use vocab::{Control, ObjectId, TokenId, Vocabulary, CONTROL_COUNT};

/// Gain on the identity alignment between text-object queries and matching
/// vision keys (and between same-object vision tokens).
pub const ALIGN_GAIN: f64 = 4.0;

/// Pre-softmax score every query assigns to text keys. Text tokens act as
/// attention sinks: attention falls back to them when no vision token
/// matches, which is what drives grounding down for unanswerable queries.
pub const SINK_SCORE: f64 = 3.0;

/// Pre-softmax score the disturbance token's key adds on top of the ordinary
/// text sink, making it soak up attention mass.
pub const CONFUSE_SINK_SCORE: f64 = 6.0;

/// Pre-softmax score seeking queries (captioning steps) assign to every
/// vision key.
pub const SEEK_SCORE: f64 = 1.6;

/// Co-occurrence mixing of text-object queries per unit of `prior_strength`:
/// a query for object `b` leaks attention toward vision tokens of objects
/// that co-occur with `b`.
pub const MIX_GAIN: f64 = 0.70;

/// How much attention mass on objects other than the queried one counts as
/// grounding. Below 1 because such mass is spurious with respect to the
/// current prediction target: the model looked somewhere related, not at
/// the thing being asked about.
pub const SPURIOUS_DISCOUNT: f64 = 0.8;

/// Weight of the co-occurrence association evidence inside the yes/no head,
/// per unit of `prior_strength`.
pub const ASSOC_GAIN: f64 = 0.7;

/// Weight of the co-occurrence prior on caption object logits, per unit of
/// `prior_strength`.
pub const PRIOR_GAIN: f64 = 0.5;

/// Scale of the negated identity carried by generated object tokens; makes
/// captioning queries move off already-described regions.
pub const REPEL_GAIN: f64 = 1.0;

/// Layer whose attention row feeds the scene-context summary used by the
/// association prior (1-indexed, clamped to the layer count).
pub const CTX_LAYER: usize = 2;

/// Length pressure of the prior on the end-of-caption head, per generated
/// token and unit of `prior_strength`.
pub const EOS_LEN_GAIN: f64 = 0.15;

/// Logit assigned to tokens that are not producible in the current mode.
pub const NEG_LOGIT: f64 = -1.0e4;
