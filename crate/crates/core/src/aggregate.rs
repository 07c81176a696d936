//! Edge affinities from overlapping central instance masks.
//!
//! For an edge `(u, v)` every mask that contains both voxels contributes a
//! fuzzy-AND affinity `a = min(m_u, m_v)` weighted by the fuzzy-OR evidence
//! `w = max(m_u, m_v)`. The weighted mean and population variance of all
//! contributions become the edge statistics.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{EdgeStats, SignedGridGraph};
use crate::masks::{MaskField, MaskProvider};
use crate::stats::WeightedWelford;
use crate::volume::{enumerate_edges, AffinityNeighborhood, Coord3, MaskWindow, Scale, Shape};

/// Rule deciding which voxels a strided mask covers.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Coverage {
    /// Entry `n` of a scale-`s` mask centered at `c` refers to the single
    /// voxel `c + s * n`.
    #[default]
    Strided,
}

/// One mask entry pair that can see an edge with a given offset.
#[derive(Clone, Copy, Debug)]
struct Contribution {
    field: usize,
    /// Window index of the source voxel.
    idx_u: usize,
    /// Window index of the target voxel.
    idx_v: usize,
    /// `s * n_u`, so the mask center is `u - shift`.
    shift: Coord3,
}

/// Per-offset list of contributions in the fixed accumulation order:
/// scales in the given order, then mask centers in ascending (z, y, x) order.
fn contribution_plan(fields: &[MaskField], window: MaskWindow, offset: Coord3) -> Vec<Contribution> {
    let mut plan = Vec::new();
    for (f, field) in fields.iter().enumerate() {
        let Some(q) = offset.divided(field.scale()) else {
            continue;
        };
        // center = u - s * n_u increases lexicographically as n_u decreases
        for idx_u in (0..window.len()).rev() {
            let n_u = window.offset(idx_u);
            let n_v = n_u + q;
            if !window.contains(n_v) {
                continue;
            }
            plan.push(Contribution {
                field: f,
                idx_u,
                idx_v: window.index(n_v),
                shift: n_u.scaled(field.scale()),
            });
        }
    }
    plan
}

fn check_provider<P: MaskProvider + ?Sized>(provider: &P, shape: Shape, window: MaskWindow) -> Result<()> {
    if provider.shape() != shape {
        return Err(Error::ShapeMismatch {
            expected: shape,
            found: provider.shape(),
        });
    }
    if provider.window() != window {
        return Err(Error::WindowMismatch {
            expected: window,
            found: provider.window(),
        });
    }
    Ok(())
}

/// Aggregates all overlapping masks into per-edge affinity statistics.
///
/// Edges seen by no mask with positive evidence are left invalid.
pub fn aggregate_affinities<P: MaskProvider + ?Sized>(
    provider: &P,
    shape: Shape,
    neighborhood: &AffinityNeighborhood,
    window: MaskWindow,
    scales: &[Scale],
) -> Result<SignedGridGraph> {
    check_provider(provider, shape, window)?;
    for (i, s) in scales.iter().enumerate() {
        provider.check_scale(*s)?;
        if scales[..i].contains(s) {
            return Err(Error::InvalidArgument(format!("scale {s} listed twice")));
        }
    }
    let fields = scales
        .iter()
        .map(|&s| MaskField::materialize(provider, s))
        .collect::<Result<Vec<_>>>()?;
    aggregate_fields(&fields, shape, neighborhood, window)
}

/// [`aggregate_affinities`] over already materialized mask fields.
pub fn aggregate_fields(
    fields: &[MaskField],
    shape: Shape,
    neighborhood: &AffinityNeighborhood,
    window: MaskWindow,
) -> Result<SignedGridGraph> {
    for f in fields {
        if f.shape() != shape {
            return Err(Error::ShapeMismatch {
                expected: shape,
                found: f.shape(),
            });
        }
        if f.window() != window {
            return Err(Error::WindowMismatch {
                expected: window,
                found: f.window(),
            });
        }
    }
    let plans: Vec<Vec<Contribution>> = neighborhood
        .offsets()
        .iter()
        .map(|&o| contribution_plan(fields, window, o))
        .collect();
    let edges = enumerate_edges(shape, neighborhood);
    let stats = edges
        .par_iter()
        .map(|e| {
            let u = shape.coord(e.source);
            let mut acc = WeightedWelford::new();
            for c in &plans[e.offset] {
                let center = u - c.shift;
                if !shape.contains(center) {
                    continue;
                }
                let mask = fields[c.field].mask_at(shape.index(center));
                let (mu, mv) = (mask[c.idx_u], mask[c.idx_v]);
                acc.push(f64::from(mu.min(mv)), f64::from(mu.max(mv)));
            }
            if acc.weight_sum() > 0.0 {
                EdgeStats {
                    mean: acc.mean().clamp(0.0, 1.0) as f32,
                    variance: acc.variance().clamp(0.0, 0.25) as f32,
                    evidence: acc.weight_sum() as f32,
                }
            } else {
                EdgeStats::INVALID
            }
        })
        .collect();
    SignedGridGraph::new(shape, neighborhood.clone(), stats)
}

/// Reads each edge affinity directly from the full-resolution mask centered
/// at the edge source: `a = M_u(offset)`, zero variance, unit evidence.
pub fn baseline_affinities<P: MaskProvider + ?Sized>(
    provider: &P,
    shape: Shape,
    neighborhood: &AffinityNeighborhood,
    window: MaskWindow,
) -> Result<SignedGridGraph> {
    check_provider(provider, shape, window)?;
    if let Some(o) = neighborhood.offsets().iter().find(|&&o| !window.contains(o)) {
        return Err(Error::OffsetOutsideWindow {
            offset: o.to_string(),
            window,
        });
    }
    let field = MaskField::materialize(provider, Scale::FULL)?;
    let slots: Vec<usize> = neighborhood.offsets().iter().map(|&o| window.index(o)).collect();
    let stats = enumerate_edges(shape, neighborhood)
        .par_iter()
        .map(|e| EdgeStats {
            mean: field.mask_at(e.source)[slots[e.offset]],
            variance: 0.0,
            evidence: 1.0,
        })
        .collect();
    SignedGridGraph::new(shape, neighborhood.clone(), stats)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::masks::OracleProvider;
    use crate::volume::LabelVolume;

    #[test]
    fn uniform_volume_is_fully_attractive() {
        let shape = Shape::new(12, 12, 6).unwrap();
        let labels = LabelVolume::filled(shape, 7);
        let window = MaskWindow::default();
        let oracle = OracleProvider::new(labels, window, vec![Scale::FULL, Scale::QUARTER], false);
        let g = aggregate_affinities(
            &oracle,
            shape,
            &AffinityNeighborhood::long_range(),
            window,
            &[Scale::FULL, Scale::QUARTER],
        )
        .unwrap();
        for s in g.stats() {
            assert!(s.is_valid());
            assert_eq!(s.mean, 1.0);
            assert_eq!(s.variance, 0.0);
        }
    }

    #[test]
    fn contributing_center_count() {
        let window = MaskWindow::default();
        let fields = [MaskField::new(
            Shape::new(1, 1, 1).unwrap(),
            window,
            Scale::FULL,
            vec![1.0; window.len()],
        )
        .unwrap()];
        let plan = contribution_plan(&fields, window, Coord3::new(-4, 0, 0));
        assert_eq!(plan.len(), (7 - 4) * 7 * 5);
    }

    #[test]
    fn interior_evidence_equals_window_overlap() {
        let shape = Shape::new(32, 32, 9).unwrap();
        let labels = LabelVolume::filled(shape, 1);
        let window = MaskWindow::default();
        let scales = [Scale::FULL, Scale::QUARTER];
        let oracle = OracleProvider::new(labels, window, scales.to_vec(), false);
        let nb = AffinityNeighborhood::long_range();
        let g = aggregate_affinities(&oracle, shape, &nb, window, &scales).unwrap();
        let u = Coord3::new(16, 16, 4);
        let table = g.edge_index_table();
        for (k, &o) in nb.offsets().iter().enumerate() {
            // far enough from every border for the coarse scale too
            let expected: f64 = scales
                .iter()
                .filter_map(|&s| o.divided(s))
                .map(|q| {
                    ((window.x as i64 - q.x.abs()).max(0)
                        * (window.y as i64 - q.y.abs()).max(0)
                        * (window.z as i64 - q.z.abs()).max(0)) as f64
                })
                .sum();
            let e = table[shape.index(u) * nb.len() + k] as usize;
            assert_eq!(f64::from(g.stats()[e].evidence), expected, "offset {o}");
        }
    }

    #[test]
    fn baseline_rejects_offsets_outside_window() {
        let shape = Shape::new(4, 4, 4).unwrap();
        let labels = LabelVolume::filled(shape, 1);
        let window = MaskWindow::default();
        let oracle = OracleProvider::new(labels, window, vec![Scale::FULL], false);
        assert!(matches!(
            baseline_affinities(&oracle, shape, &AffinityNeighborhood::long_range(), window),
            Err(Error::OffsetOutsideWindow { .. })
        ));
        let g = baseline_affinities(&oracle, shape, &AffinityNeighborhood::compact(), window).unwrap();
        assert!(g.stats().iter().all(|s| s.mean == 1.0 && s.evidence == 1.0));
    }

    #[test]
    fn mismatches_are_reported() {
        let shape = Shape::new(4, 4, 4).unwrap();
        let window = MaskWindow::default();
        let oracle = OracleProvider::new(LabelVolume::filled(shape, 1), window, vec![Scale::FULL], false);
        let nb = AffinityNeighborhood::long_range();
        let other = Shape::new(5, 4, 4).unwrap();
        assert!(matches!(
            aggregate_affinities(&oracle, other, &nb, window, &[Scale::FULL]),
            Err(Error::ShapeMismatch { .. })
        ));
        assert!(matches!(
            aggregate_affinities(&oracle, shape, &nb, window, &[Scale::QUARTER]),
            Err(Error::UnsupportedScale(_))
        ));
        assert!(aggregate_affinities(&oracle, shape, &nb, MaskWindow::new(5, 5, 3).unwrap(), &[Scale::FULL]).is_err());
    }
}
