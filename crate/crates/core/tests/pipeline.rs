use maskaggr::aggregate::aggregate_affinities;
use maskaggr::codec::{codec_provider, fit_codec};
use maskaggr::masks::{perturb, MaskProvider, NoiseConfig, OracleProvider};
use maskaggr::metrics::{fuzzy_dice, Evaluation};
use maskaggr::partition::{gasp_average, mutex_watershed, remove_small_segments, PartitionConfig};
use maskaggr::volume::{AffinityNeighborhood, MaskWindow, Scale, Shape};
use maskaggr::{generate_labels, Anisotropy};

fn setup(rule: bool) -> (maskaggr::LabelVolume, OracleProvider) {
    let shape = Shape::new(32, 32, 6).unwrap();
    let labels = generate_labels(shape, 10, Anisotropy::default(), 17).unwrap();
    let oracle = OracleProvider::new(labels.clone(), MaskWindow::default(), vec![Scale::FULL, Scale::QUARTER], rule);
    (labels, oracle)
}

#[test]
fn noiseless_masks_reconstruct_ground_truth() {
    let (labels, oracle) = setup(false);
    let nb = AffinityNeighborhood::long_range();
    let g = aggregate_affinities(&oracle, labels.shape(), &nb, oracle.window(), &[Scale::FULL, Scale::QUARTER]).unwrap();
    let cfg = PartitionConfig::default();
    for seg in [mutex_watershed(&g, &cfg).unwrap(), gasp_average(&g, &cfg).unwrap()] {
        let e = Evaluation::new(&seg, &labels).unwrap();
        assert!(e.cremi <= 1e-6, "{e:?}");
    }
}

#[test]
fn boundary_rule_with_postprocessing_stays_close() {
    let (labels, oracle) = setup(true);
    let nb = AffinityNeighborhood::long_range();
    let g = aggregate_affinities(&oracle, labels.shape(), &nb, oracle.window(), &[Scale::FULL, Scale::QUARTER]).unwrap();
    let cfg = PartitionConfig::default();
    let seg = mutex_watershed(&g, &cfg).unwrap();
    let seg = remove_small_segments(&seg, &g, cfg.min_segment_size).unwrap();
    let e = Evaluation::new(&seg, &labels).unwrap();
    assert!(e.arand <= 0.05 && e.voi_sum() <= 0.2, "{e:?}");
}

#[test]
fn noise_creates_variance() {
    let (labels, oracle) = setup(false);
    let nb = AffinityNeighborhood::long_range();
    let scales = [Scale::FULL, Scale::QUARTER];
    let noisy = perturb(
        &oracle,
        NoiseConfig {
            flip_sigma: 1.0,
            seed: 3,
            ..NoiseConfig::default()
        },
    );
    let g = aggregate_affinities(&noisy, labels.shape(), &nb, oracle.window(), &scales).unwrap();
    assert!(g.mean_variance() > 0.0);
    let clean = aggregate_affinities(&oracle, labels.shape(), &nb, oracle.window(), &scales).unwrap();
    assert_eq!(clean.mean_variance(), 0.0);
}

#[test]
fn codec_dice_grows_with_latent_size() {
    let (labels, oracle) = setup(false);
    let shape = labels.shape();
    let masks: Vec<_> = (0..shape.len())
        .step_by(3)
        .map(|i| oracle.mask(shape.coord(i), Scale::FULL).unwrap())
        .collect();
    let full = fit_codec(&masks, 64, 0).unwrap();
    let mut last = 0.0;
    for q in [2, 8, 32, 64] {
        let p = codec_provider(&oracle, full.truncated(q).unwrap()).unwrap();
        let dice: f64 = masks
            .iter()
            .take(500)
            .map(|m| fuzzy_dice(&p.codec().round_trip(m).unwrap(), m).unwrap())
            .sum::<f64>()
            / 500.0;
        assert!(dice >= last - 1e-9, "q={q}: {dice} < {last}");
        last = dice;
    }
}
