//! Model configuration and the embedding block layout derived from it.

use super::vocab::Vocabulary;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::ops::Range;

/// All architecture, noise, prior, and seed knobs of the toy model.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelConfig {
    pub num_layers: usize,
    pub num_heads: usize,
    pub d_model: usize,
    pub n_vision: usize,
    pub vocab: Vocabulary,
    pub noise_scale: f64,
    pub prior_strength: f64,
    pub evidence_gain: f64,
    pub answer_threshold: f64,
    pub seed: u64,
}

impl ModelConfig {
    /// Defaults: 6 layers, 4 heads, d_model 64, 32 vision tokens,
    /// evidence gain 8, answer threshold 0.5, noise 0.05, prior off.
    pub fn new(vocab: Vocabulary, seed: u64) -> Self {
        ModelConfig {
            num_layers: 6,
            num_heads: 4,
            d_model: 64,
            n_vision: 32,
            vocab,
            noise_scale: 0.05,
            prior_strength: 0.0,
            evidence_gain: 8.0,
            answer_threshold: 0.5,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_layers < 2 {
            return Err(Error::config("num_layers must be at least 2"));
        }
        if self.num_heads == 0 {
            return Err(Error::config("num_heads must be positive"));
        }
        if self.d_model == 0 || self.d_model % self.num_heads != 0 {
            return Err(Error::config(format!(
                "d_model {} must be positive and divisible by num_heads {}",
                self.d_model, self.num_heads
            )));
        }
        if self.n_vision == 0 {
            return Err(Error::config("n_vision must be positive"));
        }
        if !(self.noise_scale >= 0.0) {
            return Err(Error::config("noise_scale must be >= 0"));
        }
        if !(self.prior_strength >= 0.0) {
            return Err(Error::config("prior_strength must be >= 0"));
        }
        if !(self.evidence_gain > 0.0) {
            return Err(Error::config("evidence_gain must be > 0"));
        }
        if !(self.answer_threshold > 0.0 && self.answer_threshold < 1.0) {
            return Err(Error::config("answer_threshold must lie in (0,1)"));
        }
        let layout = BlockLayout::for_config(self)?;
        if self.vocab.num_objects() > layout.d_id {
            return Err(Error::config(format!(
                "{} objects need orthonormal codes but the identity block has only {} dims; \
                 raise d_model or shrink the vocabulary",
                self.vocab.num_objects(),
                layout.d_id
            )));
        }
        Ok(())
    }

    pub fn d_head(&self) -> usize {
        self.d_model / self.num_heads
    }
}

/// How d_model is partitioned: vision-identity, text-identity, and
/// context-identity blocks, a role block, a position block, and free dims.
///
/// Role dims: 0 vision, 1 instruction, 2 generated, 3 seek flag,
/// 4 disturbance flag, 5 spare.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockLayout {
    pub d_model: usize,
    pub d_head: usize,
    /// Width of each identity block; also the dimensionality of object codes.
    pub d_id: usize,
    pub vision_id: Range<usize>,
    pub text_id: Range<usize>,
    /// Carries the identity of generated object tokens a second time, wired
    /// so their queries seek co-occurring vision content while still moving
    /// off the object itself.
    pub ctx_id: Range<usize>,
    pub role: Range<usize>,
    pub pos: Range<usize>,
}

pub const ROLE_DIMS: usize = 6;
pub const POS_DIMS: usize = 8;

pub const ROLE_VISION: usize = 0;
pub const ROLE_INSTRUCTION: usize = 1;
pub const ROLE_GENERATED: usize = 2;
pub const ROLE_SEEK: usize = 3;
pub const ROLE_CONFUSE: usize = 4;

impl BlockLayout {
    pub fn for_config(config: &ModelConfig) -> Result<Self> {
        let d_head = config.d_model / config.num_heads;
        // Head space holds the identity-match channel plus sink and seek
        // channels; keep two spare dims.
        if d_head < 8 {
            return Err(Error::config(format!(
                "head dim {d_head} too small; need at least 8"
            )));
        }
        let d_id = d_head - 4;
        let needed = 3 * d_id + ROLE_DIMS + POS_DIMS;
        if needed > config.d_model {
            return Err(Error::config(format!(
                "block layout needs {needed} dims but d_model is {}",
                config.d_model
            )));
        }
        Ok(BlockLayout {
            d_model: config.d_model,
            d_head,
            d_id,
            vision_id: 0..d_id,
            text_id: d_id..2 * d_id,
            ctx_id: 2 * d_id..3 * d_id,
            role: 3 * d_id..3 * d_id + ROLE_DIMS,
            pos: 3 * d_id + ROLE_DIMS..3 * d_id + ROLE_DIMS + POS_DIMS,
        })
    }

    /// Head-space channel carrying identity matches.
    pub fn id_channel(&self) -> Range<usize> {
        0..self.d_id
    }

    /// Head-space channel carrying the text-sink score.
    pub fn sink_channel(&self) -> usize {
        self.d_id
    }

    /// Head-space channel carrying the vision-seek score.
    pub fn seek_channel(&self) -> usize {
        self.d_id + 1
    }

    /// Sinusoidal position features for the position block.
    pub fn position_features(&self, position: usize) -> [f64; POS_DIMS] {
        let mut out = [0.0; POS_DIMS];
        let p = position as f64;
        for j in 0..POS_DIMS / 2 {
            let wavelength = 100f64.powf(j as f64 / (POS_DIMS / 2) as f64);
            out[2 * j] = (p / wavelength).sin();
            out[2 * j + 1] = (p / wavelength).cos();
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Matrix;

    fn vocab(k: usize) -> Vocabulary {
        let names: Vec<String> = (0..k).map(|i| format!("obj{i:02}")).collect();
        let mut p = Matrix::zeros(k, k);
        for r in 0..k {
            for c in 0..k {
                if c != r {
                    p.set(r, c, 1.0 / (k - 1) as f64);
                }
            }
        }
        Vocabulary::new(names, p).unwrap()
    }

    #[test]
    fn default_layout_fits() {
        let cfg = ModelConfig::new(vocab(12), 1);
        cfg.validate().unwrap();
        let layout = BlockLayout::for_config(&cfg).unwrap();
        assert_eq!(layout.d_head, 16);
        assert_eq!(layout.d_id, 12);
        assert_eq!(layout.pos.end, 3 * 12 + ROLE_DIMS + POS_DIMS);
    }

    #[test]
    fn validation_rejects_bad_configs() {
        let mut cfg = ModelConfig::new(vocab(4), 1);
        cfg.num_layers = 1;
        assert!(cfg.validate().is_err());

        let mut cfg = ModelConfig::new(vocab(4), 1);
        cfg.d_model = 63;
        assert!(cfg.validate().is_err());

        let mut cfg = ModelConfig::new(vocab(13), 1); // 13 objects > d_id 12
        cfg.num_layers = 6;
        assert!(cfg.validate().is_err());

        let mut cfg = ModelConfig::new(vocab(4), 1);
        cfg.answer_threshold = 1.0;
        assert!(cfg.validate().is_err());
    }
}
