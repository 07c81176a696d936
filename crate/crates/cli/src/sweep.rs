//! Parameter sweep over noise level, aggregation method and seed, exported
//! as CSV.

use std::path::Path;

use maskaggr::masks::NoiseConfig;
use serde::{Deserialize, Serialize};

use crate::config::{AggregationMethod, NeighborhoodPreset, NeighborhoodSpec, PipelineConfig};
use crate::error::{CliError, CliResult};
use crate::manifest::Recorder;
use crate::pipeline::execute;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub pipeline: PipelineConfig,
    pub sigmas: Vec<f64>,
    pub methods: Vec<AggregationMethod>,
    /// Each seed sets both the volume seed and the noise seed.
    pub seeds: Vec<u64>,
    /// Neighborhood used for baseline runs, which can only read offsets
    /// inside the window.
    pub baseline_neighborhood: NeighborhoodSpec,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            pipeline: PipelineConfig::default(),
            sigmas: vec![0.0, 0.5, 1.0],
            methods: vec![AggregationMethod::MaskAggr, AggregationMethod::Baseline],
            seeds: (0..5).collect(),
            baseline_neighborhood: NeighborhoodSpec::Preset(NeighborhoodPreset::Compact),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub sigma: f64,
    pub method: String,
    pub seed: u64,
    pub cremi: f64,
    pub voi_split: f64,
    pub voi_merge: f64,
    pub arand: f64,
    pub mean_variance: f64,
}

impl SweepConfig {
    pub fn run_config(&self, sigma: f64, method: AggregationMethod, seed: u64) -> PipelineConfig {
        let mut cfg = self.pipeline.clone();
        cfg.volume.seed = seed;
        cfg.masks.noise = Some(NoiseConfig {
            flip_sigma: sigma,
            seed,
            ..cfg.masks.noise.unwrap_or_default()
        });
        cfg.aggregate.method = method;
        if method == AggregationMethod::Baseline {
            cfg.aggregate.neighborhood = self.baseline_neighborhood.clone();
        }
        cfg
    }

    pub fn validate(&self) -> CliResult<()> {
        if self.sigmas.is_empty() || self.methods.is_empty() || self.seeds.is_empty() {
            return Err(CliError::Config("sweep needs at least one sigma, method and seed".into()));
        }
        for &m in &self.methods {
            self.run_config(self.sigmas[0], m, self.seeds[0]).validate()?;
        }
        Ok(())
    }
}

/// Rows in (seed, sigma, method) loop order.
pub fn run_sweep(cfg: &SweepConfig, rec: &mut Recorder) -> CliResult<Vec<SweepRow>> {
    cfg.validate()?;
    let mut rows = Vec::new();
    for &seed in &cfg.seeds {
        for &sigma in &cfg.sigmas {
            for &method in &cfg.methods {
                let name = format!("sigma={sigma} method={} seed={seed}", method.as_str());
                let run = rec.stage(&name, |_| execute(&cfg.run_config(sigma, method, seed), None, &mut Recorder::default()))?;
                let e = run.evaluation;
                rows.push(SweepRow {
                    sigma,
                    method: method.as_str().to_owned(),
                    seed,
                    cremi: e.cremi,
                    voi_split: e.voi_split,
                    voi_merge: e.voi_merge,
                    arand: e.arand,
                    mean_variance: run.graph.mean_variance(),
                });
            }
        }
    }
    Ok(rows)
}

pub fn write_csv(rows: &[SweepRow], path: &Path) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    for r in rows {
        w.serialize(r).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

fn csv_err(path: &Path, e: csv::Error) -> CliError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => CliError::io(path, io),
        other => CliError::Config(format!("{}: {other:?}", path.display())),
    }
}

/// Median of `values`; mean of the two middle values for even counts.
pub fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    }
}
