//! Experiment configuration: a single JSON file, overridable from the
//! command line either by named flags or dotted paths.

use anyhow::{bail, Context, Result};
use declab_core::decode::{DecodeConfig, Strategy};
use declab_core::eval::{gen_scenes, gen_world, PopeSetting, Scene, World};
use declab_core::model::{build_model, Model, ModelConfig};
use declab_core::seed;
use serde::{Deserialize, Serialize};
use std::path::Path;
use std::str::FromStr;

/// Model knobs without vocabulary or seed; both are injected when the model
/// is built from the world and the master seed.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelParams {
    pub num_layers: usize,
    pub num_heads: usize,
    pub d_model: usize,
    pub n_vision: usize,
    pub noise_scale: f64,
    pub prior_strength: f64,
    pub evidence_gain: f64,
    pub answer_threshold: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        ModelParams {
            num_layers: 6,
            num_heads: 4,
            d_model: 56,
            n_vision: 16,
            noise_scale: 0.05,
            prior_strength: 2.5,
            evidence_gain: 4.0,
            answer_threshold: 0.5,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct WorldParams {
    pub n_objects: usize,
    pub cooccurrence_sparsity: f64,
}

impl Default for WorldParams {
    fn default() -> Self {
        WorldParams {
            n_objects: 10,
            cooccurrence_sparsity: 0.7,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SceneParams {
    pub count: usize,
    pub objects_per_scene: usize,
}

impl Default for SceneParams {
    fn default() -> Self {
        SceneParams {
            count: 100,
            objects_per_scene: 4,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct PopeParams {
    pub settings: Vec<String>,
    pub k_per_polarity: usize,
}

impl Default for PopeParams {
    fn default() -> Self {
        PopeParams {
            settings: vec!["random".into(), "popular".into(), "adversarial".into()],
            k_per_polarity: 2,
        }
    }
}

fn default_axis_alpha() -> Vec<f64> {
    vec![0.1, 0.5, 1.0, 2.0]
}

fn default_axis_beta() -> Vec<f64> {
    vec![0.0, 0.1, 0.5, 1.0]
}

/// Axes of the sensitivity sweep; empty axes fall back to the decode
/// config's value, so the grid size is the product of the non-empty axes.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepParams {
    #[serde(default = "default_axis_alpha")]
    pub alphas: Vec<f64>,
    #[serde(default = "default_axis_beta")]
    pub betas: Vec<f64>,
    #[serde(default)]
    pub layers: Vec<usize>,
    #[serde(default)]
    pub keep_ratios: Vec<f64>,
    #[serde(default = "default_sweep_setting")]
    pub setting: String,
}

fn default_sweep_setting() -> String {
    "adversarial".into()
}

impl Default for SweepParams {
    fn default() -> Self {
        SweepParams {
            alphas: default_axis_alpha(),
            betas: default_axis_beta(),
            layers: vec![],
            keep_ratios: vec![],
            setting: default_sweep_setting(),
        }
    }
}

fn default_decodes() -> Vec<DecodeConfig> {
    let mut normal = DecodeConfig::default();
    normal.keep_ratio = 0.25;
    let mut sid = normal.clone();
    sid.strategy = Strategy::Sid;
    vec![normal, sid]
}

fn default_out_dir() -> String {
    "out".into()
}

fn default_max_new_tokens() -> usize {
    10
}

/// The whole experiment: world, model, scenes, decoding strategies,
/// evaluation selection, output directory, master seed, worker count.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub model: ModelParams,
    #[serde(default)]
    pub world: WorldParams,
    #[serde(default)]
    pub scenes: SceneParams,
    #[serde(default = "default_decodes")]
    pub decodes: Vec<DecodeConfig>,
    #[serde(default)]
    pub pope: PopeParams,
    #[serde(default)]
    pub sweep: SweepParams,
    #[serde(default = "default_max_new_tokens")]
    pub max_new_tokens: usize,
    #[serde(default = "default_out_dir")]
    pub out_dir: String,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default)]
    pub workers: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all fields defaulted")
    }
}

impl ExperimentConfig {
    /// Load from a JSON file, then apply dotted-path overrides like
    /// `model.prior_strength=3.0`.
    pub fn load(path: Option<&Path>, dotted: &[String]) -> Result<Self> {
        let mut value: serde_json::Value = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .with_context(|| format!("reading config {}", p.display()))?;
                serde_json::from_str(&text)
                    .with_context(|| format!("parsing config {}", p.display()))?
            }
            None => serde_json::json!({}),
        };
        for assignment in dotted {
            apply_dotted(&mut value, assignment)?;
        }
        let config: ExperimentConfig =
            serde_json::from_value(value).context("config does not match the expected schema")?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.decodes.is_empty() {
            bail!("config needs at least one decode entry");
        }
        for s in &self.pope.settings {
            PopeSetting::from_str(s).map_err(|e| anyhow::anyhow!("{e}"))?;
        }
        PopeSetting::from_str(&self.sweep.setting).map_err(|e| anyhow::anyhow!("{e}"))?;
        Ok(())
    }

    pub fn pope_settings(&self) -> Vec<PopeSetting> {
        self.pope
            .settings
            .iter()
            .map(|s| PopeSetting::from_str(s).expect("validated"))
            .collect()
    }

    /// Build the world, scenes, and model for this config and master seed.
    /// The model seed derives from the master via a labelled expansion.
    pub fn build(&self) -> Result<(World, Vec<Scene>, Model)> {
        let world = gen_world(
            self.world.n_objects,
            self.world.cooccurrence_sparsity,
            seed::derive_seed(self.master_seed, "world"),
        )?;
        let scenes = gen_scenes(
            &world,
            self.scenes.count,
            self.scenes.objects_per_scene,
            seed::derive_seed(self.master_seed, "scenes"),
        )?;
        let model = build_model(self.model_config(&world))?;
        Ok((world, scenes, model))
    }

    pub fn model_config(&self, world: &World) -> ModelConfig {
        ModelConfig {
            num_layers: self.model.num_layers,
            num_heads: self.model.num_heads,
            d_model: self.model.d_model,
            n_vision: self.model.n_vision,
            vocab: world.vocab.clone(),
            noise_scale: self.model.noise_scale,
            prior_strength: self.model.prior_strength,
            evidence_gain: self.model.evidence_gain,
            answer_threshold: self.model.answer_threshold,
            seed: seed::derive_seed(self.master_seed, "model"),
        }
    }
}

/// Set `path.to.field=value` inside a JSON tree; the value is parsed as JSON
/// when possible and falls back to a string.
fn apply_dotted(root: &mut serde_json::Value, assignment: &str) -> Result<()> {
    let (path, raw) = assignment
        .split_once('=')
        .with_context(|| format!("override '{assignment}' is not of the form path=value"))?;
    let value: serde_json::Value = serde_json::from_str(raw)
        .unwrap_or_else(|_| serde_json::Value::String(raw.to_string()));
    let mut cursor = root;
    let parts: Vec<&str> = path.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        if i + 1 == parts.len() {
            match cursor {
                serde_json::Value::Object(map) => {
                    map.insert(part.to_string(), value);
                    return Ok(());
                }
                serde_json::Value::Array(items) => {
                    let idx: usize = part.parse().context("array index in override path")?;
                    if idx >= items.len() {
                        bail!("index {idx} out of bounds in override '{assignment}'");
                    }
                    items[idx] = value;
                    return Ok(());
                }
                _ => bail!("cannot set '{path}': parent is not an object"),
            }
        }
        cursor = match cursor {
            serde_json::Value::Object(map) => map
                .entry(part.to_string())
                .or_insert_with(|| serde_json::json!({})),
            serde_json::Value::Array(items) => {
                let idx: usize = part.parse().context("array index in override path")?;
                items
                    .get_mut(idx)
                    .with_context(|| format!("index {idx} out of bounds in '{assignment}'"))?
            }
            _ => bail!("cannot traverse '{path}' at '{part}'"),
        };
    }
    Ok(())
}
