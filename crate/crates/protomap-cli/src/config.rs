//! Declarative experiment configuration: a TOML document with sections
//! for the code, signaling, mapping, decoder and task parameters.
//! Command-line flags override individual keys; every command records a
//! digest of the fully resolved configuration next to its outputs.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use protomap::bitmap::{reference_mapping, BitMapping, MappingMode};
use protomap::protosys::BaseMatrix;
use protomap::quantize::QuantizerSpec;
use protomap::signaling::Signaling;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Master seed for lifting, optimization and simulation streams.
    #[serde(default = "default_seed")]
    pub seed: u64,
    pub code: CodeConfig,
    pub signaling: SignalingConfig,
    #[serde(default)]
    pub mapping: MappingConfig,
    #[serde(default)]
    pub decoder: DecoderConfig,
    #[serde(default)]
    pub task: TaskConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

fn default_seed() -> u64 {
    1
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CodeConfig {
    /// Base-matrix file path, relative to the config file.
    pub base_matrix: PathBuf,
    /// Seed for circulant-shift generation when the file carries none.
    #[serde(default = "default_seed")]
    pub lift_seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SignalingConfig {
    /// Constellation size M (ASK).
    pub constellation: usize,
    /// "uniform" or "pas".
    pub mode: String,
    /// Target distribution-matcher rate in bits per amplitude (pas only).
    #[serde(default)]
    pub dm_rate: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MappingConfig {
    /// "reference" or a mapping CSV path relative to the config file.
    #[serde(default = "default_mapping_source")]
    pub source: String,
}

impl Default for MappingConfig {
    fn default() -> Self {
        MappingConfig {
            source: default_mapping_source(),
        }
    }
}

fn default_mapping_source() -> String {
    "reference".into()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecoderConfig {
    /// "float" or "quantized".
    #[serde(default = "default_decoder_kind")]
    pub kind: String,
    #[serde(default = "default_bits")]
    pub bits: u32,
    #[serde(default = "default_clip")]
    pub clip: f64,
    #[serde(default = "default_iterations")]
    pub iterations: usize,
}

impl Default for DecoderConfig {
    fn default() -> Self {
        DecoderConfig {
            kind: default_decoder_kind(),
            bits: default_bits(),
            clip: default_clip(),
            iterations: default_iterations(),
        }
    }
}

fn default_decoder_kind() -> String {
    "quantized".into()
}
fn default_bits() -> u32 {
    8
}
fn default_clip() -> f64 {
    15.0
}
fn default_iterations() -> usize {
    100
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct TaskConfig {
    /// SNR grid for `rates` in dB.
    #[serde(default)]
    pub snr_db_min: Option<f64>,
    #[serde(default)]
    pub snr_db_max: Option<f64>,
    #[serde(default)]
    pub snr_db_step: Option<f64>,
    /// Target spectral efficiency (bits/channel use) for limit reporting.
    #[serde(default)]
    pub target_se: Option<f64>,
    /// Monte-Carlo samples per uncertainty estimate.
    #[serde(default)]
    pub uncertainty_samples: Option<usize>,
    /// Threshold-search window in dB.
    #[serde(default)]
    pub window_db: Option<(f64, f64)>,
    #[serde(default)]
    pub tol_db: Option<f64>,
    /// Level ordering for `optimize`: "reliability" or "index".
    #[serde(default)]
    pub order: Option<String>,
    /// Objective for `optimize`: "pexit" or "dde".
    #[serde(default)]
    pub objective: Option<String>,
    /// Clip values for `sweep-clipping`.
    #[serde(default)]
    pub clip_grid: Option<Vec<f64>>,
    /// SNR points for `simulate` in dB.
    #[serde(default)]
    pub snr_db_list: Option<Vec<f64>>,
    #[serde(default)]
    pub min_frame_errors: Option<u64>,
    #[serde(default)]
    pub max_frames: Option<u64>,
    /// Frame-error-rate target for required-SNR searches.
    #[serde(default)]
    pub target_fer: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_out_dir")]
    pub dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: default_out_dir(),
        }
    }
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg: ExperimentConfig = toml::from_str(&text).context("parsing config")?;
        // paths are relative to the config file
        let dir = path.parent().unwrap_or(Path::new("."));
        if cfg.code.base_matrix.is_relative() {
            cfg.code.base_matrix = dir.join(&cfg.code.base_matrix);
        }
        if cfg.mapping.source != "reference" {
            let p = PathBuf::from(&cfg.mapping.source);
            if p.is_relative() {
                cfg.mapping.source = dir.join(p).to_string_lossy().into_owned();
            }
        }
        if cfg.output.dir.is_relative() {
            cfg.output.dir = dir.join(&cfg.output.dir);
        }
        Ok(cfg)
    }

    /// Canonical serialization of the resolved configuration and its
    /// SHA-256 digest.
    pub fn digest(&self, command: &str) -> Result<(String, String)> {
        let canonical = toml::to_string(self).context("serializing config")?;
        let mut hasher = Sha256::new();
        hasher.update(command.as_bytes());
        hasher.update(b"\n");
        hasher.update(canonical.as_bytes());
        Ok((canonical, hex::encode(hasher.finalize())))
    }

    pub fn write_digest(&self, command: &str) -> Result<String> {
        let (canonical, digest) = self.digest(command)?;
        std::fs::create_dir_all(&self.output.dir)?;
        let payload = format!(
            "{{\n  \"command\": {},\n  \"digest\": {},\n  \"config\": {}\n}}\n",
            json_string(command),
            json_string(&digest),
            json_string(&canonical)
        );
        let path = self.output.dir.join(format!("{command}.digest.json"));
        std::fs::write(&path, payload)
            .with_context(|| format!("writing digest {}", path.display()))?;
        Ok(digest)
    }

    pub fn bits_per_symbol(&self) -> Result<usize> {
        let m = self.signaling.constellation;
        if !m.is_power_of_two() || m < 2 || m > 256 {
            bail!("constellation must be a power of two in 2..=256, got {m}");
        }
        Ok(m.trailing_zeros() as usize)
    }

    pub fn load_base(&self) -> Result<BaseMatrix> {
        BaseMatrix::load(&self.code.base_matrix)
            .with_context(|| format!("loading base matrix {}", self.code.base_matrix.display()))
    }

    pub fn build_signaling(&self, base: &BaseMatrix) -> Result<Signaling> {
        let m = self.bits_per_symbol()?;
        match self.signaling.mode.as_str() {
            "uniform" => Ok(Signaling::uniform_ask(m)),
            "pas" => {
                let dm_rate = self
                    .signaling
                    .dm_rate
                    .context("pas mode needs signaling.dm_rate")?;
                let n_sym = base.n_transmitted() / m;
                if base.n_transmitted() % m != 0 {
                    bail!(
                        "transmitted bits {} not divisible by {m} bit levels",
                        base.n_transmitted()
                    );
                }
                Ok(Signaling::pas_ask_for_rate(m, dm_rate, n_sym as u64)?)
            }
            other => bail!("unknown signaling mode {other:?}"),
        }
    }

    pub fn mapping_mode(&self) -> MappingMode {
        if self.signaling.mode == "pas" {
            MappingMode::Pas
        } else {
            MappingMode::Uniform
        }
    }

    pub fn build_mapping(&self, base: &BaseMatrix) -> Result<BitMapping> {
        let m = self.bits_per_symbol()?;
        let mode = self.mapping_mode();
        let parity: BTreeSet<usize> = match mode {
            MappingMode::Pas => base.transmitted_parity_types().into_iter().collect(),
            MappingMode::Uniform => BTreeSet::new(),
        };
        let ids = base.transmitted_columns();
        let mapping = if self.mapping.source == "reference" {
            reference_mapping(m, ids.len(), mode, parity.iter().cloned(), ids.clone())?
        } else {
            let loaded = BitMapping::load(&self.mapping.source, mode, parity.iter().cloned())
                .with_context(|| format!("loading mapping {}", self.mapping.source))?;
            if loaded.column_ids() != ids {
                bail!(
                    "mapping column ids do not match the transmitted columns of {}",
                    self.code.base_matrix.display()
                );
            }
            loaded
        };
        if mapping.levels() != m {
            bail!(
                "mapping has {} levels but the constellation carries {m} bits",
                mapping.levels()
            );
        }
        Ok(mapping)
    }

    pub fn quantizer(&self) -> Result<QuantizerSpec> {
        Ok(QuantizerSpec::new(self.decoder.bits, self.decoder.clip)?)
    }

    pub fn decoder_config(&self) -> Result<protomap::mcsim::DecoderConfig> {
        match self.decoder.kind.as_str() {
            "float" => Ok(protomap::mcsim::DecoderConfig::float(
                self.decoder.iterations,
            )),
            "quantized" => Ok(protomap::mcsim::DecoderConfig::quantized(
                self.quantizer()?,
                self.decoder.iterations,
            )),
            other => bail!("unknown decoder kind {other:?}"),
        }
    }

    /// Default spectral-efficiency target: the configured value or the
    /// exact accounting identity for this code and signaling.
    pub fn target_se(&self, base: &BaseMatrix) -> Result<f64> {
        if let Some(se) = self.task.target_se {
            return Ok(se);
        }
        let m = self.bits_per_symbol()?;
        let n_ct = base.n_transmitted() as f64;
        let k = n_ct - (base.rows() - base.punctured().len()) as f64 * base.lifting_factor() as f64;
        let r_c = k / n_ct;
        Ok(match self.signaling.mode.as_str() {
            "pas" => protomap::signaling::pas_spectral_efficiency(
                self.signaling.dm_rate.context("pas needs dm_rate")?,
                m,
                r_c,
            ),
            _ => protomap::signaling::uniform_spectral_efficiency(m, r_c),
        })
    }
}

fn json_string(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            c if (c as u32) < 0x20 => out.push_str(&format!("\\u{:04x}", c as u32)),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}
