//! End-to-end pipeline: gen -> masks -> aggregate -> segment -> postprocess
//! -> eval.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use maskaggr::aggregate::{aggregate_fields, baseline_affinities};
use maskaggr::codec::{codec_provider, fit_codec, LinearMaskCodec};
use maskaggr::graph::SignedGridGraph;
use maskaggr::io::{container_paths, read_volume, write_graph, write_volume};
use maskaggr::masks::{perturb, FileProvider, MaskField, MaskProvider, MultiScaleProvider, OracleProvider};
use maskaggr::metrics::Evaluation;
use maskaggr::partition::{gasp_average, mutex_watershed, remove_small_segments};
use maskaggr::volume::{LabelVolume, Scale, Segmentation};
use maskaggr::{generate_labels, VERSION};
use serde_json::Value;

use crate::config::{AggregationMethod, CodecConfig, PipelineConfig, Segmenter};
use crate::error::{CliError, CliResult};
use crate::manifest::{sha256_bytes, Manifest, Recorder};

pub struct RunOutput {
    pub ground_truth: LabelVolume,
    pub graph: SignedGridGraph,
    pub segmentation: Segmentation,
    pub postprocessed: Segmentation,
    pub evaluation: Evaluation,
    pub evaluation_before_postprocess: Evaluation,
}

fn container_names(stem: &str) -> Vec<String> {
    vec![format!("{stem}.json"), format!("{stem}.raw")]
}

fn graph_names(stem: &str) -> Vec<String> {
    vec![format!("{stem}.graph.json"), format!("{stem}.graph.raw")]
}

fn scale_stem(s: Scale) -> String {
    format!("masks_s{}x{}x{}", s.x, s.y, s.z)
}

fn container_inputs(rec: &mut Recorder, base: &Path) -> CliResult<()> {
    let (json, raw) = container_paths(base);
    rec.input(&[&json, &raw])
}

pub fn load_or_fit_codec(
    cfg: &PipelineConfig,
    codec: &CodecConfig,
    ground_truth: &LabelVolume,
    rec: &mut Recorder,
) -> CliResult<LinearMaskCodec> {
    if let Some(path) = &codec.path {
        container_inputs(rec, path)?;
        return Ok(LinearMaskCodec::read(path)?);
    }
    let training = match codec.training_seed {
        Some(seed) => generate_labels(ground_truth.shape(), cfg.volume.num_instances, cfg.volume.anisotropy, seed)?,
        None => ground_truth.clone(),
    };
    let shape = training.shape();
    let oracle = OracleProvider::new(training, cfg.window()?, cfg.scales()?, cfg.masks.empty_near_boundary);
    let mut sample = Vec::new();
    for s in cfg.scales()? {
        for i in (0..shape.len()).step_by(codec.sample_stride) {
            sample.push(oracle.mask(shape.coord(i), s)?);
        }
    }
    Ok(fit_codec(&sample, codec.latent_dim, codec.seed)?)
}

/// Runs every stage; writes intermediates to `out` when given.
pub fn execute(cfg: &PipelineConfig, out: Option<&Path>, rec: &mut Recorder) -> CliResult<RunOutput> {
    cfg.validate()?;
    let window = cfg.window()?;
    let scales = cfg.scales()?;
    let neighborhood = cfg.aggregate.neighborhood.build()?;

    let ground_truth = rec.stage("gen", |rec| {
        let labels = match &cfg.volume.path {
            Some(path) => {
                container_inputs(rec, path)?;
                read_volume(path)?
            }
            None => generate_labels(cfg.shape()?, cfg.volume.num_instances, cfg.volume.anisotropy, cfg.volume.seed)?,
        };
        if let Some(dir) = out {
            write_volume(&labels, &dir.join("gt"))?;
            rec.output(dir, &container_names("gt"))?;
        }
        Ok(labels)
    })?;
    let shape = ground_truth.shape();

    let codec = match &cfg.masks.codec {
        Some(c) => Some(rec.stage("codec", |rec| {
            let codec = load_or_fit_codec(cfg, c, &ground_truth, rec)?;
            if let Some(dir) = out {
                codec.write(&dir.join("codec"))?;
                rec.output(dir, &container_names("codec"))?;
            }
            Ok(codec)
        })?),
        None => None,
    };

    let fields = rec.stage("masks", |rec| {
        let mut provider: Box<dyn MaskProvider> = if cfg.masks.files.is_empty() {
            Box::new(OracleProvider::new(
                ground_truth.clone(),
                window,
                scales.clone(),
                cfg.masks.empty_near_boundary,
            ))
        } else {
            let mut parts: Vec<Box<dyn MaskProvider>> = Vec::new();
            for path in &cfg.masks.files {
                container_inputs(rec, path)?;
                parts.push(Box::new(FileProvider::new(MaskField::read(path)?)));
            }
            Box::new(MultiScaleProvider::new(parts)?)
        };
        if provider.shape() != shape {
            return Err(maskaggr::Error::ShapeMismatch {
                expected: shape,
                found: provider.shape(),
            }
            .into());
        }
        if let Some(noise) = cfg.masks.noise {
            provider = Box::new(perturb(provider, noise));
        }
        if let Some(codec) = &codec {
            provider = Box::new(codec_provider(provider, codec.clone())?);
        }
        let needed: Vec<Scale> = match cfg.aggregate.method {
            AggregationMethod::MaskAggr => scales.clone(),
            AggregationMethod::Baseline => vec![Scale::FULL],
        };
        let mut fields = Vec::with_capacity(needed.len());
        for s in needed {
            let field = MaskField::materialize(&provider, s)?;
            if let Some(dir) = out {
                let stem = scale_stem(s);
                field.write(&dir.join(&stem))?;
                rec.output(dir, &container_names(&stem))?;
            }
            fields.push(field);
        }
        Ok(fields)
    })?;

    let graph = rec.stage("aggregate", |rec| {
        let graph = match cfg.aggregate.method {
            AggregationMethod::MaskAggr => aggregate_fields(&fields, shape, &neighborhood, window)?,
            AggregationMethod::Baseline => {
                let provider = FileProvider::new(fields[0].clone());
                baseline_affinities(&provider, shape, &neighborhood, window)?
            }
        };
        if let Some(dir) = out {
            write_graph(&graph, &dir.join("graph"))?;
            rec.output(dir, &graph_names("graph"))?;
        }
        Ok(graph)
    })?;
    drop(fields);

    let partition = cfg.partition();
    let segmentation = rec.stage("segment", |rec| {
        let seg = match cfg.segment.method {
            Segmenter::Mws => mutex_watershed(&graph, &partition)?,
            Segmenter::Gasp => gasp_average(&graph, &partition)?,
        };
        if let Some(dir) = out {
            write_volume(&seg, &dir.join("segmentation"))?;
            rec.output(dir, &container_names("segmentation"))?;
        }
        Ok(seg)
    })?;

    let postprocessed = rec.stage("postprocess", |rec| {
        let seg = if cfg.postprocess.enabled {
            remove_small_segments(&segmentation, &graph, cfg.postprocess.min_size)?
        } else {
            segmentation.clone()
        };
        if let Some(dir) = out {
            write_volume(&seg, &dir.join("postprocessed"))?;
            rec.output(dir, &container_names("postprocessed"))?;
        }
        Ok(seg)
    })?;

    let (evaluation, evaluation_before_postprocess) = rec.stage("eval", |rec| {
        let final_eval = Evaluation::new(&postprocessed, &ground_truth)?;
        let raw_eval = Evaluation::new(&segmentation, &ground_truth)?;
        if let Some(dir) = out {
            let path = dir.join("metrics.json");
            let text = serde_json::to_string_pretty(&final_eval).expect("metrics serialize");
            fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
            rec.output(dir, &["metrics.json".to_owned()])?;
        }
        Ok((final_eval, raw_eval))
    })?;

    Ok(RunOutput {
        ground_truth,
        graph,
        segmentation,
        postprocessed,
        evaluation,
        evaluation_before_postprocess,
    })
}

pub fn seeds(cfg: &PipelineConfig) -> BTreeMap<String, u64> {
    let mut seeds = BTreeMap::new();
    if cfg.volume.path.is_none() {
        seeds.insert("volume".to_owned(), cfg.volume.seed);
    }
    if let Some(n) = &cfg.masks.noise {
        seeds.insert("noise".to_owned(), n.seed);
    }
    if let Some(c) = cfg.masks.codec.as_ref().filter(|c| c.path.is_none()) {
        seeds.insert("codec".to_owned(), c.seed);
        if let Some(t) = c.training_seed {
            seeds.insert("codec_training_volume".to_owned(), t);
        }
    }
    seeds.insert("long_range_subsample".to_owned(), cfg.segment.subsample_seed);
    seeds
}

pub fn new_manifest(command: &str, config: Value, seeds: BTreeMap<String, u64>) -> Manifest {
    let config_sha256 = sha256_bytes(&serde_json::to_vec(&config).expect("config serializes"));
    Manifest {
        tool: "maskaggr".to_owned(),
        version: VERSION.to_owned(),
        command: command.to_owned(),
        config,
        config_sha256,
        seeds,
        threads: rayon::current_num_threads(),
        inputs: BTreeMap::new(),
        outputs: BTreeMap::new(),
        stages: Vec::new(),
        metrics: None,
        metrics_before_postprocess: None,
        status: "ok".to_owned(),
        error: None,
    }
}

pub fn create_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

/// Runs the pipeline into `out_dir` and writes `manifest.json` there, also
/// when a stage fails.
pub fn run_pipeline(cfg: &PipelineConfig, out_dir: &Path) -> CliResult<Manifest> {
    create_dir(out_dir)?;
    let mut rec = Recorder::default();
    let result = execute(cfg, Some(out_dir), &mut rec);
    let mut manifest = new_manifest(
        "pipeline",
        serde_json::to_value(cfg).expect("config serializes"),
        seeds(cfg),
    );
    manifest.inputs = rec.inputs;
    manifest.outputs = rec.outputs;
    manifest.stages = rec.stages;
    match &result {
        Ok(run) => {
            manifest.metrics = Some(run.evaluation);
            manifest.metrics_before_postprocess = Some(run.evaluation_before_postprocess);
        }
        Err(e) => {
            manifest.status = "error".to_owned();
            manifest.error = Some(rec.failure.unwrap_or_else(|| e.record("config")));
        }
    }
    manifest.write(&manifest_path(out_dir))?;
    result.map(|_| manifest)
}

pub fn manifest_path(dir: &Path) -> PathBuf {
    dir.join("manifest.json")
}

/// Reruns a pipeline from its manifest after checking input hashes.
pub fn rerun_from_manifest(manifest: &Manifest, out_dir: &Path) -> CliResult<Manifest> {
    if manifest.command != "pipeline" {
        return Err(CliError::Config(format!("cannot rerun a `{}` manifest as a pipeline", manifest.command)));
    }
    manifest.verify_inputs()?;
    let cfg = PipelineConfig::from_value(manifest.config.clone())?;
    run_pipeline(&cfg, out_dir)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> PipelineConfig {
        let mut cfg = PipelineConfig::default();
        cfg.volume.shape = [16, 16, 4];
        cfg.volume.num_instances = 5;
        cfg.postprocess.min_size = 20;
        cfg
    }

    #[test]
    fn in_memory_run_reconstructs() {
        let mut rec = Recorder::default();
        let out = execute(&small(), None, &mut rec).unwrap();
        assert_eq!(out.evaluation_before_postprocess.cremi, 0.0);
        let names: Vec<_> = rec.stages.iter().map(|s| s.name.as_str()).collect();
        assert_eq!(names, ["gen", "masks", "aggregate", "segment", "postprocess", "eval"]);
        assert!(rec.outputs.is_empty());
    }

    #[test]
    fn manifest_records_outputs_and_failures() {
        let dir = tempfile::tempdir().unwrap();
        let m = run_pipeline(&small(), dir.path()).unwrap();
        assert_eq!(m.status, "ok");
        assert!(m.outputs.contains_key("graph.graph.raw"));
        assert!(m.outputs.contains_key("masks_s4x4x1.raw"));
        assert_eq!(Manifest::read(&manifest_path(dir.path())).unwrap(), m);

        let mut bad = small();
        bad.masks.files = vec![dir.path().join("missing"), dir.path().join("missing2")];
        let err = run_pipeline(&bad, dir.path()).unwrap_err();
        assert_eq!(err.exit_code(), 3);
        let m = Manifest::read(&manifest_path(dir.path())).unwrap();
        assert_eq!(m.status, "error");
        let e = m.error.unwrap();
        assert_eq!((e.stage.as_str(), e.exit_code), ("masks", 3));
    }
}
