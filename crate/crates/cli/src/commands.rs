//! Command-line interface: one subcommand per stage plus `pipeline` and
//! `sweep`.

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use maskaggr::aggregate::{aggregate_fields, baseline_affinities};
use maskaggr::codec::{codec_provider, fit_codec, LinearMaskCodec};
use maskaggr::io::{read_graph, read_volume, write_graph, write_volume};
use maskaggr::masks::{perturb, FileProvider, MaskField, MaskProvider, NoiseConfig, OracleProvider};
use maskaggr::metrics::Evaluation;
use maskaggr::partition::{gasp_average, mutex_watershed, remove_small_segments, GaspWeighting, PartitionConfig};
use maskaggr::volume::{MaskWindow, Scale, Shape};
use maskaggr::{generate_labels, Anisotropy};

use crate::config::{load_config, AggregationMethod, NeighborhoodPreset, NeighborhoodSpec, Segmenter};
use crate::error::{CliError, CliResult};
use crate::manifest::{Manifest, Recorder};
use crate::pipeline::{create_dir, manifest_path, new_manifest, rerun_from_manifest, run_pipeline};
use crate::sweep::{run_sweep, write_csv, SweepConfig};

#[derive(Debug, Parser)]
#[command(name = "maskaggr", version, about = "Aggregate central instance masks into affinity graphs and segment them")]
pub struct Cli {
    /// Maximum number of worker threads (default: all cores). Results do not
    /// depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic ground-truth label volume.
    Gen(GenArgs),
    /// Mask-field export.
    #[command(subcommand)]
    Masks(MasksCommand),
    /// Fit or apply a linear mask codec.
    #[command(subcommand)]
    Codec(CodecCommand),
    /// Aggregate mask fields into an affinity graph.
    Aggregate(AggregateArgs),
    /// Partition an affinity graph.
    Segment(SegmentArgs),
    /// Remove small segments and regrow their neighbors.
    Postprocess(PostprocessArgs),
    /// Compare a segmentation to ground truth; prints metrics as JSON.
    Eval(EvalArgs),
    /// Run all stages from a JSON config (or rerun a manifest).
    Pipeline(PipelineArgs),
    /// Sweep noise level x method x seed and write a CSV.
    Sweep(SweepArgs),
}

/// Comma-separated triple in (x, y, z) order.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Triple<T>(pub [T; 3]);

impl<T: FromStr + Copy> FromStr for Triple<T>
where
    T::Err: std::fmt::Display,
{
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.split(',').collect();
        let [x, y, z] = parts.as_slice() else {
            return Err(format!("expected x,y,z but got `{s}`"));
        };
        let p = |v: &str| v.trim().parse::<T>().map_err(|e| format!("`{v}`: {e}"));
        Ok(Triple([p(x)?, p(y)?, p(z)?]))
    }
}

fn window_of(t: Triple<usize>) -> CliResult<MaskWindow> {
    MaskWindow::new(t.0[0], t.0[1], t.0[2]).map_err(|e| CliError::Config(e.to_string()))
}

fn scale_of(t: Triple<u32>) -> CliResult<Scale> {
    Scale::new(t.0[0], t.0[1], t.0[2]).map_err(|e| CliError::Config(e.to_string()))
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long, default_value = "64,64,8")]
    pub shape: Triple<usize>,
    #[arg(long, default_value_t = 32)]
    pub instances: usize,
    /// Distance weights in (x, y, z) order.
    #[arg(long, default_value = "1,1,10")]
    pub anisotropy: Triple<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output container base path.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum MasksCommand {
    /// Write the mask field of one scale from ground truth, optionally
    /// perturbed and passed through a codec.
    Export(MasksExportArgs),
}

#[derive(Debug, Args)]
pub struct NoiseArgs {
    /// Logit noise standard deviation; 0 disables noise.
    #[arg(long, default_value_t = 0.0)]
    pub sigma: f64,
    #[arg(long, default_value_t = 0)]
    pub smoothing_radius: usize,
    #[arg(long, default_value_t = 0)]
    pub noise_seed: u64,
    #[arg(long, default_value_t = 1e-4)]
    pub logit_eps: f64,
}

impl NoiseArgs {
    fn config(&self) -> CliResult<Option<NoiseConfig>> {
        if !(self.sigma.is_finite() && self.sigma >= 0.0) || !(self.logit_eps > 0.0 && self.logit_eps < 0.5) {
            return Err(CliError::Config("need sigma >= 0 and 0 < logit_eps < 0.5".into()));
        }
        Ok((self.sigma > 0.0).then_some(NoiseConfig {
            flip_sigma: self.sigma,
            smoothing_radius: self.smoothing_radius,
            seed: self.noise_seed,
            logit_eps: self.logit_eps,
        }))
    }
}

#[derive(Debug, Args)]
pub struct MasksExportArgs {
    #[arg(long)]
    pub labels: PathBuf,
    #[arg(long, default_value = "7,7,5")]
    pub window: Triple<usize>,
    #[arg(long, default_value = "1,1,1")]
    pub scale: Triple<u32>,
    #[arg(long)]
    pub empty_near_boundary: bool,
    #[command(flatten)]
    pub noise: NoiseArgs,
    /// Codec base path; masks are replaced by their reconstruction.
    #[arg(long)]
    pub codec: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum CodecCommand {
    /// Fit on ground-truth masks of one or more label volumes.
    Fit(CodecFitArgs),
    /// Replace every mask of a mask field by its reconstruction.
    Apply(CodecApplyArgs),
}

#[derive(Debug, Args)]
pub struct CodecFitArgs {
    #[arg(long, required = true)]
    pub labels: Vec<PathBuf>,
    #[arg(long, default_value = "7,7,5")]
    pub window: Triple<usize>,
    #[arg(long, default_values = ["1,1,1", "4,4,1"])]
    pub scale: Vec<Triple<u32>>,
    #[arg(long)]
    pub empty_near_boundary: bool,
    /// Use every n-th center of each scale.
    #[arg(long, default_value_t = 7)]
    pub stride: usize,
    #[arg(long, default_value_t = 32)]
    pub q: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CodecApplyArgs {
    #[arg(long)]
    pub codec: PathBuf,
    #[arg(long)]
    pub masks: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct AggregateArgs {
    /// Mask-field containers, one per scale, in accumulation order.
    #[arg(long, required = true)]
    pub masks: Vec<PathBuf>,
    #[arg(long, value_enum, default_value = "mask-aggr")]
    pub method: AggregationMethod,
    #[arg(long, value_enum, default_value = "long-range")]
    pub neighborhood: NeighborhoodPreset,
    /// Output graph base path (`.graph.json`/`.graph.raw` are appended).
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SegmentArgs {
    #[arg(long)]
    pub graph: PathBuf,
    #[arg(long, value_enum, default_value = "mws")]
    pub method: Segmenter,
    #[arg(long, default_value_t = 0.10)]
    pub long_range_fraction: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "evidence")]
    pub gasp_weighting: GaspWeightingArg,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Copy, Debug, clap::ValueEnum)]
pub enum GaspWeightingArg {
    Evidence,
    Unit,
}

#[derive(Debug, Args)]
pub struct PostprocessArgs {
    #[arg(long)]
    pub seg: PathBuf,
    #[arg(long)]
    pub graph: PathBuf,
    #[arg(long, default_value_t = 200)]
    pub min_size: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub seg: PathBuf,
    #[arg(long)]
    pub gt: PathBuf,
    /// Also write the JSON to this file.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PipelineArgs {
    /// JSON config; omitted fields take defaults.
    #[arg(long, conflicts_with = "manifest")]
    pub config: Option<PathBuf>,
    /// Rerun the configuration recorded in a manifest.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Override a config field, e.g. `--set masks.noise.flip_sigma=0.5`.
    /// Applied after the config file, in order.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Run directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// JSON sweep config: {"pipeline": {...}, "sigmas": [...], "methods": [...], "seeds": [...]}.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    #[arg(long)]
    pub out: PathBuf,
}

fn read_text(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

fn print_json<T: serde::Serialize>(value: &T, out: Option<&Path>) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).expect("serializable");
    if let Some(path) = out {
        fs::write(path, &text).map_err(|e| CliError::io(path, e))?;
    }
    println!("{text}");
    Ok(())
}

pub fn run(cli: Cli) -> CliResult<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Config("--threads must be at least 1".into()));
        }
        // fails only if a pool already exists, e.g. when called twice in-process
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match cli.command {
        Command::Gen(a) => {
            let [x, y, z] = a.shape.0;
            let shape = Shape::new(x, y, z).map_err(|e| CliError::Config(e.to_string()))?;
            let [ax, ay, az] = a.anisotropy.0;
            let labels = generate_labels(shape, a.instances, Anisotropy { z: az, y: ay, x: ax }, a.seed)
                .map_err(|e| CliError::Config(e.to_string()))?;
            write_volume(&labels, &a.out)?;
        }
        Command::Masks(MasksCommand::Export(a)) => {
            let window = window_of(a.window)?;
            let scale = scale_of(a.scale)?;
            let labels = read_volume(&a.labels)?;
            let mut provider: Box<dyn MaskProvider> =
                Box::new(OracleProvider::new(labels, window, vec![scale], a.empty_near_boundary));
            if let Some(n) = a.noise.config()? {
                provider = Box::new(perturb(provider, n));
            }
            if let Some(path) = &a.codec {
                provider = Box::new(codec_provider(provider, LinearMaskCodec::read(path)?)?);
            }
            MaskField::materialize(&provider, scale)?.write(&a.out)?;
        }
        Command::Codec(CodecCommand::Fit(a)) => {
            let window = window_of(a.window)?;
            let scales = a.scale.iter().map(|&s| scale_of(s)).collect::<CliResult<Vec<_>>>()?;
            if a.stride == 0 {
                return Err(CliError::Config("--stride must be at least 1".into()));
            }
            let mut sample = Vec::new();
            for path in &a.labels {
                let labels = read_volume(path)?;
                let shape = labels.shape();
                let oracle = OracleProvider::new(labels, window, scales.clone(), a.empty_near_boundary);
                for &s in &scales {
                    for i in (0..shape.len()).step_by(a.stride) {
                        sample.push(oracle.mask(shape.coord(i), s)?);
                    }
                }
            }
            let codec = fit_codec(&sample, a.q, a.seed).map_err(|e| CliError::Config(e.to_string()))?;
            codec.write(&a.out)?;
            if let Some(f) = codec.captured_variance_fraction() {
                eprintln!("fitted {} masks, captured variance {f:.6}", sample.len());
            }
        }
        Command::Codec(CodecCommand::Apply(a)) => {
            let codec = LinearMaskCodec::read(&a.codec)?;
            let field = MaskField::read(&a.masks)?;
            let scale = field.scale();
            let provider = codec_provider(FileProvider::new(field), codec)?;
            MaskField::materialize(&provider, scale)?.write(&a.out)?;
        }
        Command::Aggregate(a) => {
            let fields = a.masks.iter().map(|p| MaskField::read(p)).collect::<maskaggr::Result<Vec<_>>>()?;
            let (shape, window) = (fields[0].shape(), fields[0].window());
            let nb = NeighborhoodSpec::Preset(a.neighborhood).build()?;
            let graph = match a.method {
                AggregationMethod::MaskAggr => {
                    for (i, f) in fields.iter().enumerate() {
                        if fields[..i].iter().any(|g| g.scale() == f.scale()) {
                            return Err(CliError::Config(format!("scale {} given twice", f.scale())));
                        }
                    }
                    aggregate_fields(&fields, shape, &nb, window)?
                }
                AggregationMethod::Baseline => {
                    let field = fields
                        .into_iter()
                        .find(|f| f.scale() == Scale::FULL)
                        .ok_or_else(|| CliError::Config("baseline needs a scale (1,1,1) mask field".into()))?;
                    baseline_affinities(&FileProvider::new(field), shape, &nb, window)?
                }
            };
            write_graph(&graph, &a.out)?;
        }
        Command::Segment(a) => {
            let graph = read_graph(&a.graph)?;
            let cfg = PartitionConfig {
                long_range_fraction: a.long_range_fraction,
                subsample_seed: a.seed,
                gasp_weighting: match a.gasp_weighting {
                    GaspWeightingArg::Evidence => GaspWeighting::Evidence,
                    GaspWeightingArg::Unit => GaspWeighting::Unit,
                },
                ..PartitionConfig::default()
            };
            cfg.validate().map_err(|e| CliError::Config(e.to_string()))?;
            let seg = match a.method {
                Segmenter::Mws => mutex_watershed(&graph, &cfg)?,
                Segmenter::Gasp => gasp_average(&graph, &cfg)?,
            };
            write_volume(&seg, &a.out)?;
        }
        Command::Postprocess(a) => {
            let seg = read_volume(&a.seg)?;
            let graph = read_graph(&a.graph)?;
            write_volume(&remove_small_segments(&seg, &graph, a.min_size)?, &a.out)?;
        }
        Command::Eval(a) => {
            let e = Evaluation::new(&read_volume(&a.seg)?, &read_volume(&a.gt)?)?;
            print_json(&e, a.out.as_deref())?;
        }
        Command::Pipeline(a) => {
            let manifest = match &a.manifest {
                Some(path) => {
                    if !a.overrides.is_empty() {
                        return Err(CliError::Config("--set cannot be combined with --manifest".into()));
                    }
                    rerun_from_manifest(&Manifest::read(path)?, &a.out)?
                }
                None => {
                    let text = a.config.as_deref().map(read_text).transpose()?;
                    run_pipeline(&load_config(text.as_deref(), &a.overrides)?, &a.out)?
                }
            };
            print_json(&manifest.metrics, None)?;
        }
        Command::Sweep(a) => {
            let mut value = match &a.config {
                Some(p) => serde_json::from_str(&read_text(p)?).map_err(|e| CliError::Config(e.to_string()))?,
                None => serde_json::Value::Object(Default::default()),
            };
            for o in &a.overrides {
                crate::config::apply_override(&mut value, o)?;
            }
            let cfg: SweepConfig = serde_json::from_value(value).map_err(|e| CliError::Config(e.to_string()))?;
            create_dir(&a.out)?;
            let mut rec = Recorder::default();
            let result = run_sweep(&cfg, &mut rec);
            let mut manifest = new_manifest(
                "sweep",
                serde_json::to_value(&cfg).expect("config serializes"),
                Default::default(),
            );
            manifest.stages = rec.stages;
            if let Ok(rows) = &result {
                let csv = a.out.join("sweep.csv");
                write_csv(rows, &csv)?;
                manifest.outputs.insert("sweep.csv".into(), crate::manifest::sha256_file(&csv)?);
            } else if let Err(e) = &result {
                manifest.status = "error".into();
                manifest.error = Some(rec.failure.unwrap_or_else(|| e.record("config")));
            }
            manifest.write(&manifest_path(&a.out))?;
            result?;
        }
    }
    Ok(())
}
