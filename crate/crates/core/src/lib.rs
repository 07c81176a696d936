//! Instance-mask aggregation into signed affinity graphs, graph partitioning
//! and segmentation metrics for anisotropic 3D label volumes.

pub mod aggregate;
pub mod codec;
pub mod error;
pub mod graph;
pub mod hash;
pub mod io;
pub mod masks;
pub mod metrics;
pub mod partition;
pub mod stats;
pub mod synth;
pub mod testing;
pub mod volume;

pub use aggregate::{aggregate_affinities, aggregate_fields, baseline_affinities, Coverage};
pub use codec::{codec_provider, fit_codec, CodecProvider, LinearMaskCodec};
pub use error::{Error, Result};
pub use graph::{EdgeStats, SignedGridGraph};
pub use masks::{
    file_provider, perturb, CentralInstanceMask, MaskField, MaskProvider, NoiseConfig, NoisyProvider, OracleProvider,
};
pub use metrics::{adapted_rand_error, cremi_score, fuzzy_dice, voi, Evaluation};
pub use partition::{gasp_average, mutex_watershed, remove_small_segments, PartitionConfig};
pub use synth::{generate_labels, Anisotropy};
pub use volume::{AffinityNeighborhood, Coord3, LabelVolume, MaskWindow, Scale, Segmentation, Shape};

/// Crate version recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
