//! JSON run configuration.
//!
//! Triples are given in (x, y, z) order. Precedence, lowest first: built-in
//! defaults, the config file, then `--set key.path=value` overrides in the
//! order given on the command line.

use std::path::PathBuf;

use clap::ValueEnum;
use maskaggr::masks::NoiseConfig;
use maskaggr::partition::{GaspWeighting, PartitionConfig};
use maskaggr::volume::{AffinityNeighborhood, Coord3, MaskWindow, Scale, Shape};
use maskaggr::Anisotropy;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{CliError, CliResult};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub volume: VolumeConfig,
    pub masks: MaskConfig,
    pub aggregate: AggregateConfig,
    pub segment: SegmentConfig,
    pub postprocess: PostprocessConfig,
}

/// Ground truth: read from `path` if given, otherwise generated.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VolumeConfig {
    pub path: Option<PathBuf>,
    pub shape: [usize; 3],
    pub num_instances: usize,
    pub anisotropy: Anisotropy,
    pub seed: u64,
}

impl Default for VolumeConfig {
    fn default() -> Self {
        VolumeConfig {
            path: None,
            shape: [64, 64, 8],
            num_instances: 32,
            anisotropy: Anisotropy::default(),
            seed: 0,
        }
    }
}

/// Provider chain: oracle (or mask-field files), then optional noise, then
/// optional codec round trip.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MaskConfig {
    pub window: [usize; 3],
    pub scales: Vec<[u32; 3]>,
    pub empty_near_boundary: bool,
    /// Mask-field containers replacing the oracle, one per scale.
    pub files: Vec<PathBuf>,
    pub noise: Option<NoiseConfig>,
    pub codec: Option<CodecConfig>,
}

impl Default for MaskConfig {
    fn default() -> Self {
        MaskConfig {
            window: [7, 7, 5],
            scales: vec![[1, 1, 1], [4, 4, 1]],
            empty_near_boundary: false,
            files: Vec::new(),
            noise: None,
            codec: None,
        }
    }
}

/// Either a codec file, or fitting parameters. Fitting uses oracle masks of
/// the ground truth, or of a separately generated volume when
/// `training_seed` is set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CodecConfig {
    pub path: Option<PathBuf>,
    pub latent_dim: usize,
    /// Every `sample_stride`-th center of each scale enters the sample.
    pub sample_stride: usize,
    pub seed: u64,
    pub training_seed: Option<u64>,
}

impl Default for CodecConfig {
    fn default() -> Self {
        CodecConfig {
            path: None,
            latent_dim: 32,
            sample_stride: 7,
            seed: 0,
            training_seed: None,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum AggregationMethod {
    #[default]
    MaskAggr,
    Baseline,
}

impl AggregationMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            AggregationMethod::MaskAggr => "mask_aggr",
            AggregationMethod::Baseline => "baseline",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum NeighborhoodPreset {
    #[default]
    LongRange,
    Compact,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NeighborhoodSpec {
    Preset(NeighborhoodPreset),
    Custom { offsets: Vec<[i64; 3]>, direct_count: usize },
}

impl Default for NeighborhoodSpec {
    fn default() -> Self {
        NeighborhoodSpec::Preset(NeighborhoodPreset::LongRange)
    }
}

impl NeighborhoodSpec {
    pub fn build(&self) -> CliResult<AffinityNeighborhood> {
        Ok(match self {
            NeighborhoodSpec::Preset(NeighborhoodPreset::LongRange) => AffinityNeighborhood::long_range(),
            NeighborhoodSpec::Preset(NeighborhoodPreset::Compact) => AffinityNeighborhood::compact(),
            NeighborhoodSpec::Custom { offsets, direct_count } => AffinityNeighborhood::new(
                offsets.iter().map(|&o| Coord3::from(o)).collect(),
                *direct_count,
            )
            .map_err(config_err)?,
        })
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AggregateConfig {
    pub method: AggregationMethod,
    pub neighborhood: NeighborhoodSpec,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Segmenter {
    #[default]
    Mws,
    Gasp,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SegmentConfig {
    pub method: Segmenter,
    pub long_range_fraction: f64,
    pub subsample_seed: u64,
    pub gasp_weighting: GaspWeighting,
}

impl Default for SegmentConfig {
    fn default() -> Self {
        let p = PartitionConfig::default();
        SegmentConfig {
            method: Segmenter::Mws,
            long_range_fraction: p.long_range_fraction,
            subsample_seed: p.subsample_seed,
            gasp_weighting: p.gasp_weighting,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PostprocessConfig {
    pub enabled: bool,
    pub min_size: usize,
}

impl Default for PostprocessConfig {
    fn default() -> Self {
        PostprocessConfig {
            enabled: true,
            min_size: PartitionConfig::default().min_segment_size,
        }
    }
}

pub(crate) fn config_err(e: impl std::fmt::Display) -> CliError {
    CliError::Config(e.to_string())
}

impl PipelineConfig {
    pub fn shape(&self) -> CliResult<Shape> {
        let [x, y, z] = self.volume.shape;
        Shape::new(x, y, z).map_err(config_err)
    }

    pub fn window(&self) -> CliResult<MaskWindow> {
        let [x, y, z] = self.masks.window;
        MaskWindow::new(x, y, z).map_err(config_err)
    }

    pub fn scales(&self) -> CliResult<Vec<Scale>> {
        self.masks
            .scales
            .iter()
            .map(|&[x, y, z]| Scale::new(x, y, z).map_err(config_err))
            .collect()
    }

    pub fn partition(&self) -> PartitionConfig {
        PartitionConfig {
            long_range_fraction: self.segment.long_range_fraction,
            subsample_seed: self.segment.subsample_seed,
            min_segment_size: self.postprocess.min_size,
            gasp_weighting: self.segment.gasp_weighting,
        }
    }

    /// Checks everything that can be checked before running.
    pub fn validate(&self) -> CliResult<()> {
        if self.volume.path.is_none() {
            let shape = self.shape()?;
            if self.volume.num_instances == 0 || self.volume.num_instances > shape.len() {
                return Err(CliError::Config(format!(
                    "num_instances must be in 1..={}, got {}",
                    shape.len(),
                    self.volume.num_instances
                )));
            }
        }
        let window = self.window()?;
        let scales = self.scales()?;
        if scales.is_empty() {
            return Err(CliError::Config("at least one mask scale is required".into()));
        }
        for (i, s) in scales.iter().enumerate() {
            if scales[..i].contains(s) {
                return Err(CliError::Config(format!("scale {s} listed twice")));
            }
        }
        if !self.masks.files.is_empty() && self.masks.files.len() != scales.len() {
            return Err(CliError::Config("masks.files needs one file per scale".into()));
        }
        if let Some(n) = &self.masks.noise {
            if !(n.flip_sigma.is_finite() && n.flip_sigma >= 0.0) {
                return Err(CliError::Config(format!("flip_sigma must be >= 0, got {}", n.flip_sigma)));
            }
            if !(n.logit_eps > 0.0 && n.logit_eps < 0.5) {
                return Err(CliError::Config(format!("logit_eps must be in (0, 0.5), got {}", n.logit_eps)));
            }
        }
        if let Some(c) = &self.masks.codec {
            if c.path.is_none() && (c.latent_dim > window.len() || c.sample_stride == 0) {
                return Err(CliError::Config(format!(
                    "codec needs latent_dim <= {} and sample_stride >= 1",
                    window.len()
                )));
            }
        }
        let nb = self.aggregate.neighborhood.build()?;
        if self.aggregate.method == AggregationMethod::Baseline {
            if !scales.contains(&Scale::FULL) {
                return Err(CliError::Config("baseline aggregation needs scale (1,1,1)".into()));
            }
            if let Some(o) = nb.offsets().iter().find(|&&o| !window.contains(o)) {
                return Err(CliError::Config(format!(
                    "baseline cannot read offset {o} outside window {window}; use the compact neighborhood"
                )));
            }
        }
        self.partition().validate().map_err(config_err)
    }

    pub fn from_value(value: Value) -> CliResult<Self> {
        serde_json::from_value(value).map_err(config_err)
    }
}

/// Sets `path` (dot-separated) in `root` to `raw`, parsed as JSON when
/// possible and as a string otherwise.
pub fn apply_override(root: &mut Value, assignment: &str) -> CliResult<()> {
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("override `{assignment}` is not key=value")))?;
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_owned()));
    let mut node = root;
    for key in path.split('.') {
        if !node.is_object() {
            *node = Value::Object(Default::default());
        }
        node = node
            .as_object_mut()
            .expect("just made an object")
            .entry(key)
            .or_insert(Value::Null);
    }
    *node = value;
    Ok(())
}

/// Parses a config document and applies overrides.
pub fn load_config(text: Option<&str>, overrides: &[String]) -> CliResult<PipelineConfig> {
    let mut value = match text {
        Some(t) => serde_json::from_str(t).map_err(config_err)?,
        None => Value::Object(Default::default()),
    };
    for o in overrides {
        apply_override(&mut value, o)?;
    }
    let cfg = PipelineConfig::from_value(value)?;
    cfg.validate()?;
    Ok(cfg)
}
