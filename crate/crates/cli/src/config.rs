//! Experiment configuration: a preset, optional TOML overrides, then flags.

use std::path::{Path, PathBuf};

use hamkoop::decoders::DecoderFitConfig;
use hamkoop::presets::{Preset, Protocol};
use hamkoop::training::{TrainingConfig, Variant};
use hamkoop::SystemName;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DecoderChoice {
    Linear,
    #[default]
    Quadratic,
}

/// Architecture overrides.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub hidden: Option<Vec<usize>>,
    pub latent_dim: Option<usize>,
}

/// Any subset of the training hyperparameters.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingSection {
    pub lambdas: Option<[f64; 3]>,
    pub epochs: Option<usize>,
    pub batch_size: Option<usize>,
    pub base_lr: Option<f64>,
    pub lr_gamma: Option<f64>,
    pub lr_step_epochs: Option<usize>,
    pub wd_a: Option<f64>,
    pub wd_h: Option<f64>,
    pub l1_h: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PodSection {
    pub rank: Option<usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecoderSection {
    pub kind: Option<DecoderChoice>,
    pub epochs: Option<usize>,
    pub base_lr: Option<f64>,
    pub lr_gamma: Option<f64>,
    pub lr_step_epochs: Option<usize>,
    pub weight_decay: Option<f64>,
    pub batch_size: Option<usize>,
}

/// On-disk configuration file. Every key except `system` is optional and
/// falls back to the named preset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub system: SystemName,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub variant: Option<Variant>,
    pub plot: Option<bool>,
    /// Replaces the preset's initial-condition spec and time grids.
    pub protocol: Option<Protocol>,
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub training: TrainingSection,
    #[serde(default)]
    pub pod: PodSection,
    #[serde(default)]
    pub decoder: DecoderSection,
}

impl ConfigFile {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        toml::from_str(&text).map_err(|e| CliError::invalid(format!("{}: {e}", path.display())))
    }
}

/// Command-line values that take precedence over the file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub preset: Option<SystemName>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub variant: Option<Variant>,
    pub plot: bool,
}

/// A complete, validated run description.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub preset: Preset,
    pub seed: u64,
    pub out: PathBuf,
    pub variant: Variant,
    pub training: TrainingConfig<f64>,
    pub decoder: DecoderChoice,
    pub decoder_fit: DecoderFitConfig<f64>,
    pub plot: bool,
}

impl ExperimentConfig {
    pub fn resolve(file: Option<ConfigFile>, flags: &Overrides) -> CliResult<Self> {
        let system = flags
            .preset
            .or(file.as_ref().map(|f| f.system))
            .ok_or_else(|| CliError::invalid("either --config or --preset is required"))?;
        let file = file.unwrap_or(ConfigFile {
            system,
            seed: None,
            out: None,
            variant: None,
            plot: None,
            protocol: None,
            model: ModelSection::default(),
            training: TrainingSection::default(),
            pod: PodSection::default(),
            decoder: DecoderSection::default(),
        });
        let mut preset = Preset::by_name(system);
        if let Some(p) = file.protocol {
            preset.protocol = p;
        }
        if let Some(h) = file.model.hidden {
            preset.hidden = h;
        }
        if let Some(d) = file.model.latent_dim {
            preset.latent_dim = d;
        }
        let t = &file.training;
        if let Some(b) = t.batch_size {
            preset.batch_size = b;
        }
        if let Some(w) = t.wd_a {
            preset.wd_a = w;
        }
        if let Some(w) = t.wd_h {
            preset.wd_h = w;
        }
        if let Some(r) = file.pod.rank {
            match &mut preset.protocol {
                Protocol::SingleRun { pod_rank, .. } | Protocol::Parametric { pod_rank, .. } => {
                    *pod_rank = r
                }
                Protocol::Sampled { .. } => {
                    return Err(CliError::invalid(format!(
                        "pod.rank is only meaningful for field systems, not {system}"
                    )))
                }
            }
        }
        let seed = flags.seed.or(file.seed).unwrap_or(0);
        let mut training = preset.training_config::<f64>(seed);
        if let Some(v) = t.lambdas {
            training.lambdas = v;
        }
        if let Some(v) = t.epochs {
            training.epochs = v;
        }
        if let Some(v) = t.base_lr {
            training.base_lr = v;
        }
        if let Some(v) = t.lr_gamma {
            training.lr_gamma = v;
        }
        if let Some(v) = t.lr_step_epochs {
            training.lr_step_epochs = v;
        }
        if let Some(v) = t.l1_h {
            training.l1_h = v;
        }
        let d = &file.decoder;
        let defaults = DecoderFitConfig::<f64>::default();
        let decoder_fit = DecoderFitConfig {
            epochs: d.epochs.unwrap_or(defaults.epochs),
            base_lr: d.base_lr.unwrap_or(defaults.base_lr),
            lr_gamma: d.lr_gamma.unwrap_or(defaults.lr_gamma),
            lr_step_epochs: d.lr_step_epochs.unwrap_or(defaults.lr_step_epochs),
            weight_decay: d.weight_decay.unwrap_or(defaults.weight_decay),
            batch_size: d.batch_size.unwrap_or(defaults.batch_size),
            seed,
        };
        let cfg = Self {
            preset,
            seed,
            out: flags
                .out
                .clone()
                .or(file.out)
                .unwrap_or_else(|| PathBuf::from("runs").join(system.as_str())),
            variant: flags.variant.or(file.variant).unwrap_or(Variant::SCubic),
            training,
            decoder: d.kind.unwrap_or_default(),
            decoder_fit,
            plot: flags.plot || file.plot.unwrap_or(false),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> CliResult<()> {
        self.preset.validate()?;
        self.training.validate()?;
        let d = &self.decoder_fit;
        if d.epochs == 0 || d.batch_size == 0 || d.lr_step_epochs == 0 {
            return Err(CliError::invalid(
                "decoder epochs, batch_size and lr_step_epochs must be at least 1",
            ));
        }
        if !(d.base_lr > 0.0 && d.lr_gamma > 0.0 && d.weight_decay >= 0.0) {
            return Err(CliError::invalid(
                "decoder learning rate and decay must be positive, weight decay non-negative",
            ));
        }
        if let Some(r) = self.preset.pod_rank() {
            if self.preset.latent_dim < 2 * r {
                return Err(CliError::invalid(format!(
                    "latent_dim {} is smaller than the {} POD coordinates",
                    self.preset.latent_dim,
                    2 * r
                )));
            }
        } else if self.preset.latent_dim < 2 {
            return Err(CliError::invalid("latent_dim must be at least 2"));
        }
        Ok(())
    }

    pub fn system(&self) -> SystemName {
        self.preset.system
    }

    pub fn m(&self) -> usize {
        self.preset.latent_dim / 2
    }

    pub fn data_dir(&self) -> PathBuf {
        self.out.join("data")
    }

    pub fn pod_path(&self) -> PathBuf {
        self.out.join("pod.json")
    }

    pub fn model_path(&self) -> PathBuf {
        self.out.join(format!("model-{}.json", self.variant))
    }

    pub fn decoder_path(&self) -> PathBuf {
        self.out.join("decoder.json")
    }

    pub fn rollout_dir(&self) -> PathBuf {
        self.out.join(format!("rollout-{}", self.variant))
    }

    pub fn eval_dir(&self) -> PathBuf {
        self.out.join(format!("eval-{}", self.variant))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preset_only() {
        let flags = Overrides {
            preset: Some(SystemName::Pendulum),
            ..Overrides::default()
        };
        let cfg = ExperimentConfig::resolve(None, &flags).unwrap();
        assert_eq!(cfg.training.epochs, 4000);
        assert_eq!(cfg.out, PathBuf::from("runs/pendulum"));
        assert_eq!(cfg.variant, Variant::SCubic);
    }

    #[test]
    fn flags_override_file() {
        let file: ConfigFile = toml::from_str(
            "system = \"oscillator\"\nseed = 3\nvariant = \"quad-embs\"\n[training]\nepochs = 7\n",
        )
        .unwrap();
        let flags = Overrides {
            seed: Some(9),
            ..Overrides::default()
        };
        let cfg = ExperimentConfig::resolve(Some(file), &flags).unwrap();
        assert_eq!((cfg.seed, cfg.training.seed, cfg.training.epochs), (9, 9, 7));
        assert_eq!(cfg.variant, Variant::Quad);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        assert!(toml::from_str::<ConfigFile>("system = \"pendulum\"\nepochz = 3\n").is_err());
        assert!(toml::from_str::<ConfigFile>("system = \"pendulum\"\n[training]\nepochz = 3\n").is_err());
        let zero_rank: ConfigFile = toml::from_str("system = \"nls\"\n[pod]\nrank = 0\n").unwrap();
        assert!(ExperimentConfig::resolve(Some(zero_rank), &Overrides::default()).is_err());
        let pod_on_ode: ConfigFile = toml::from_str("system = \"pendulum\"\n[pod]\nrank = 2\n").unwrap();
        assert!(ExperimentConfig::resolve(Some(pod_on_ode), &Overrides::default()).is_err());
        assert!(ExperimentConfig::resolve(None, &Overrides::default()).is_err());
    }
}
