//! Central instance masks and the providers that produce them.
//!
//! A mask `M_c` at scale `s` assigns to each window offset `n` the
//! pseudo-probability that voxel `c + s * n` belongs to the same instance as
//! the center `c`. Providers stand in for a network: the ground-truth
//! [`OracleProvider`], the [`NoisyProvider`] wrapper, codec round-trips (see
//! [`crate::codec`]) and [`FileProvider`] for externally predicted fields.

use std::path::Path;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hash::hash_words;
use crate::io::{read_array, write_array, ArrayData, ArrayHeader, Dtype};
use crate::volume::{Coord3, LabelVolume, MaskWindow, Scale, Shape};

#[derive(Clone, Debug, PartialEq)]
pub struct CentralInstanceMask {
    window: MaskWindow,
    scale: Scale,
    values: Vec<f32>,
}

impl CentralInstanceMask {
    /// Validates length and the `[0, 1]` range.
    pub fn new(window: MaskWindow, scale: Scale, values: Vec<f32>) -> Result<Self> {
        if values.len() != window.len() {
            return Err(Error::DimensionMismatch {
                expected: window.len(),
                found: values.len(),
            });
        }
        check_unit_range(&values)?;
        Ok(CentralInstanceMask { window, scale, values })
    }

    /// Only the center active.
    pub fn single_pixel(window: MaskWindow, scale: Scale) -> Self {
        let mut values = vec![0.0; window.len()];
        values[window.center_index()] = 1.0;
        CentralInstanceMask { window, scale, values }
    }

    pub fn window(&self) -> MaskWindow {
        self.window
    }

    pub fn scale(&self) -> Scale {
        self.scale
    }

    /// Values in (z, y, x) window order.
    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f32> {
        self.values
    }

    /// Value at window offset `n`; 0 outside the window.
    pub fn get(&self, n: Coord3) -> f32 {
        if self.window.contains(n) {
            self.values[self.window.index(n)]
        } else {
            0.0
        }
    }

    pub fn center(&self) -> f32 {
        self.values[self.window.center_index()]
    }
}

pub(crate) fn check_unit_range(values: &[f32]) -> Result<()> {
    match values.iter().position(|v| !(0.0..=1.0).contains(v)) {
        Some(index) => Err(Error::ValueOutOfRange {
            index,
            value: f64::from(values[index]),
        }),
        None => Ok(()),
    }
}

/// True if some voxel within in-plane Chebyshev distance 1 carries a
/// different label.
pub fn is_boundary_near(labels: &LabelVolume, center: Coord3) -> bool {
    let Some(own) = labels.get(center) else {
        return false;
    };
    (-1..=1).any(|dy| {
        (-1..=1).any(|dx| {
            labels
                .get(center + Coord3::new(dx, dy, 0))
                .is_some_and(|l| l != own)
        })
    })
}

/// Binary ground-truth mask: entry `n` is 1 iff `c + s * n` is in bounds
/// and carries the center's label. With `empty_near_boundary`, centers
/// close to a label transition get the single-pixel mask instead.
pub fn gt_mask(
    labels: &LabelVolume,
    center: Coord3,
    window: MaskWindow,
    scale: Scale,
    empty_near_boundary: bool,
) -> Result<CentralInstanceMask> {
    let Some(own) = labels.get(center) else {
        return Err(Error::OutOfBounds {
            x: center.x,
            y: center.y,
            z: center.z,
        });
    };
    if empty_near_boundary && is_boundary_near(labels, center) {
        return Ok(CentralInstanceMask::single_pixel(window, scale));
    }
    let values = (0..window.len())
        .map(|i| {
            let p = center + window.offset(i).scaled(scale);
            if labels.get(p) == Some(own) {
                1.0
            } else {
                0.0
            }
        })
        .collect();
    Ok(CentralInstanceMask { window, scale, values })
}

/// Deterministic source of central instance masks over a fixed volume.
pub trait MaskProvider: Send + Sync {
    fn shape(&self) -> Shape;
    fn window(&self) -> MaskWindow;
    fn supported_scales(&self) -> Vec<Scale>;
    fn mask(&self, center: Coord3, scale: Scale) -> Result<CentralInstanceMask>;

    fn check_scale(&self, scale: Scale) -> Result<()> {
        if self.supported_scales().contains(&scale) {
            Ok(())
        } else {
            Err(Error::UnsupportedScale(scale))
        }
    }
}

impl<P: MaskProvider + ?Sized> MaskProvider for Box<P> {
    fn shape(&self) -> Shape {
        (**self).shape()
    }
    fn window(&self) -> MaskWindow {
        (**self).window()
    }
    fn supported_scales(&self) -> Vec<Scale> {
        (**self).supported_scales()
    }
    fn mask(&self, center: Coord3, scale: Scale) -> Result<CentralInstanceMask> {
        (**self).mask(center, scale)
    }
}

impl<P: MaskProvider + ?Sized> MaskProvider for Arc<P> {
    fn shape(&self) -> Shape {
        (**self).shape()
    }
    fn window(&self) -> MaskWindow {
        (**self).window()
    }
    fn supported_scales(&self) -> Vec<Scale> {
        (**self).supported_scales()
    }
    fn mask(&self, center: Coord3, scale: Scale) -> Result<CentralInstanceMask> {
        (**self).mask(center, scale)
    }
}

impl<P: MaskProvider + ?Sized> MaskProvider for &P {
    fn shape(&self) -> Shape {
        (**self).shape()
    }
    fn window(&self) -> MaskWindow {
        (**self).window()
    }
    fn supported_scales(&self) -> Vec<Scale> {
        (**self).supported_scales()
    }
    fn mask(&self, center: Coord3, scale: Scale) -> Result<CentralInstanceMask> {
        (**self).mask(center, scale)
    }
}

fn check_center(shape: Shape, c: Coord3) -> Result<()> {
    if shape.contains(c) {
        Ok(())
    } else {
        Err(Error::OutOfBounds { x: c.x, y: c.y, z: c.z })
    }
}

/// Ground-truth masks computed on demand from a label volume.
#[derive(Clone, Debug)]
pub struct OracleProvider {
    labels: Arc<LabelVolume>,
    window: MaskWindow,
    scales: Vec<Scale>,
    empty_near_boundary: bool,
}

impl OracleProvider {
    pub fn new(
        labels: impl Into<Arc<LabelVolume>>,
        window: MaskWindow,
        scales: Vec<Scale>,
        empty_near_boundary: bool,
    ) -> Self {
        OracleProvider {
            labels: labels.into(),
            window,
            scales,
            empty_near_boundary,
        }
    }

    pub fn labels(&self) -> &LabelVolume {
        &self.labels
    }
}

impl MaskProvider for OracleProvider {
    fn shape(&self) -> Shape {
        self.labels.shape()
    }
    fn window(&self) -> MaskWindow {
        self.window
    }
    fn supported_scales(&self) -> Vec<Scale> {
        self.scales.clone()
    }
    fn mask(&self, center: Coord3, scale: Scale) -> Result<CentralInstanceMask> {
        self.check_scale(scale)?;
        gt_mask(&self.labels, center, self.window, scale, self.empty_near_boundary)
    }
}

/// Logit-space Gaussian perturbation of mask values.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseConfig {
    /// Standard deviation of the additive logit noise.
    pub flip_sigma: f64,
    /// Box radius (window units) of the moving average that correlates
    /// neighboring noise samples; 0 means independent samples.
    pub smoothing_radius: usize,
    pub seed: u64,
    /// Values are clamped to `[eps, 1 - eps]` before taking the logit.
    pub logit_eps: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig {
            flip_sigma: 0.0,
            smoothing_radius: 0,
            seed: 0,
            logit_eps: 1e-4,
        }
    }
}

#[derive(Clone, Debug)]
pub struct NoisyProvider<P> {
    base: P,
    cfg: NoiseConfig,
}

/// Wraps `base` so that every mask is perturbed by seeded, replayable noise.
pub fn perturb<P: MaskProvider>(base: P, cfg: NoiseConfig) -> NoisyProvider<P> {
    NoisyProvider { base, cfg }
}

impl<P> NoisyProvider<P> {
    pub fn config(&self) -> &NoiseConfig {
        &self.cfg
    }
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl<P: MaskProvider> NoisyProvider<P> {
    /// Unit-variance noise field for one mask request.
    fn noise(&self, center: Coord3, scale: Scale, window: MaskWindow) -> Vec<f64> {
        let key = hash_words(
            self.cfg.seed,
            &[
                center.x as u64,
                center.y as u64,
                center.z as u64,
                u64::from(scale.x),
                u64::from(scale.y),
                u64::from(scale.z),
            ],
        );
        let mut rng = ChaCha8Rng::seed_from_u64(key);
        let raw: Vec<f64> = (0..window.len()).map(|_| StandardNormal.sample(&mut rng)).collect();
        let r = self.cfg.smoothing_radius as i64;
        if r == 0 {
            return raw;
        }
        (0..window.len())
            .map(|i| {
                let n = window.offset(i);
                let mut sum = 0.0;
                let mut count = 0usize;
                for dz in -r..=r {
                    for dy in -r..=r {
                        for dx in -r..=r {
                            let m = n + Coord3::new(dx, dy, dz);
                            if window.contains(m) {
                                sum += raw[window.index(m)];
                                count += 1;
                            }
                        }
                    }
                }
                sum / (count as f64).sqrt()
            })
            .collect()
    }
}

impl<P: MaskProvider> MaskProvider for NoisyProvider<P> {
    fn shape(&self) -> Shape {
        self.base.shape()
    }
    fn window(&self) -> MaskWindow {
        self.base.window()
    }
    fn supported_scales(&self) -> Vec<Scale> {
        self.base.supported_scales()
    }
    fn mask(&self, center: Coord3, scale: Scale) -> Result<CentralInstanceMask> {
        let base = self.base.mask(center, scale)?;
        if self.cfg.flip_sigma == 0.0 {
            return Ok(base);
        }
        let eps = self.cfg.logit_eps;
        let eta = self.noise(center, scale, base.window);
        let values = base
            .values
            .iter()
            .zip(&eta)
            .map(|(&v, &g)| {
                let l = logit(f64::from(v).clamp(eps, 1.0 - eps));
                (sigmoid(l + self.cfg.flip_sigma * g) as f32).clamp(0.0, 1.0)
            })
            .collect();
        Ok(CentralInstanceMask { values, ..base })
    }
}

/// All masks of one scale for every voxel of a volume, stored as
/// `[Z, Y, X, D]` with the window axis fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct MaskField {
    shape: Shape,
    window: MaskWindow,
    scale: Scale,
    values: Vec<f32>,
}

impl MaskField {
    pub fn new(shape: Shape, window: MaskWindow, scale: Scale, values: Vec<f32>) -> Result<Self> {
        if values.len() != shape.len() * window.len() {
            return Err(Error::DimensionMismatch {
                expected: shape.len() * window.len(),
                found: values.len(),
            });
        }
        check_unit_range(&values)?;
        Ok(MaskField {
            shape,
            window,
            scale,
            values,
        })
    }

    /// Queries `provider` for every center in parallel.
    pub fn materialize<P: MaskProvider + ?Sized>(provider: &P, scale: Scale) -> Result<Self> {
        provider.check_scale(scale)?;
        let shape = provider.shape();
        let window = provider.window();
        let d = window.len();
        let mut values = vec![0.0f32; shape.len() * d];
        values
            .par_chunks_mut(d)
            .enumerate()
            .try_for_each(|(i, out)| -> Result<()> {
                let m = provider.mask(shape.coord(i), scale)?;
                if m.window != window {
                    return Err(Error::WindowMismatch {
                        expected: window,
                        found: m.window,
                    });
                }
                out.copy_from_slice(&m.values);
                Ok(())
            })?;
        Ok(MaskField {
            shape,
            window,
            scale,
            values,
        })
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn window(&self) -> MaskWindow {
        self.window
    }

    pub fn scale(&self) -> Scale {
        self.scale
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    /// Window values of the mask centered at flat voxel index `center`.
    #[inline]
    pub fn mask_at(&self, center: usize) -> &[f32] {
        let d = self.window.len();
        &self.values[center * d..(center + 1) * d]
    }

    pub fn write(&self, base: &Path) -> Result<()> {
        let [z, y, x] = self.shape.zyx();
        let mut header = ArrayHeader::new(Dtype::F32, vec![z, y, x, self.window.len()]);
        header.window = Some(self.window.zyx());
        header.scale = Some(self.scale.zyx());
        write_array(base, &header, &ArrayData::F32(self.values.clone()))
    }

    /// Loads a field, rejecting shape/window mismatches and values outside
    /// `[0, 1]`.
    pub fn read(base: &Path) -> Result<Self> {
        let (header, data) = read_array(base)?;
        let json = crate::io::container_paths(base).0;
        let malformed = |reason: String| Error::MalformedHeader {
            path: json.clone(),
            reason,
        };
        let ArrayData::F32(values) = data else {
            return Err(Error::UnsupportedDtype(format!(
                "{} (mask fields must be f32)",
                header.dtype
            )));
        };
        let window = MaskWindow::from_zyx(header.window.ok_or_else(|| malformed("missing window".into()))?)?;
        let scale = Scale::from_zyx(header.scale.ok_or_else(|| malformed("missing scale".into()))?)?;
        let [z, y, x, d]: [usize; 4] = header
            .shape
            .as_slice()
            .try_into()
            .map_err(|_| malformed(format!("mask field needs shape [Z, Y, X, D], found {:?}", header.shape)))?;
        if d != window.len() {
            return Err(Error::WindowMismatch {
                expected: window,
                found: MaskWindow { x: d, y: 1, z: 1 },
            });
        }
        let shape = Shape::from_zyx([z, y, x])?;
        MaskField::new(shape, window, scale, values)
    }
}

/// Serves masks from a stored field of a single scale.
#[derive(Clone, Debug)]
pub struct FileProvider {
    field: Arc<MaskField>,
}

impl FileProvider {
    pub fn new(field: MaskField) -> Self {
        FileProvider { field: Arc::new(field) }
    }

    pub fn field(&self) -> &MaskField {
        &self.field
    }
}

/// Opens a mask-field container as a provider.
pub fn file_provider(path: &Path) -> Result<FileProvider> {
    MaskField::read(path).map(FileProvider::new)
}

/// Materializes `provider` at `scale` and writes it as a mask-field file.
pub fn export_mask_field<P: MaskProvider + ?Sized>(provider: &P, scale: Scale, path: &Path) -> Result<MaskField> {
    let field = MaskField::materialize(provider, scale)?;
    field.write(path)?;
    Ok(field)
}

impl MaskProvider for FileProvider {
    fn shape(&self) -> Shape {
        self.field.shape
    }
    fn window(&self) -> MaskWindow {
        self.field.window
    }
    fn supported_scales(&self) -> Vec<Scale> {
        vec![self.field.scale]
    }
    fn mask(&self, center: Coord3, scale: Scale) -> Result<CentralInstanceMask> {
        self.check_scale(scale)?;
        check_center(self.field.shape, center)?;
        Ok(CentralInstanceMask {
            window: self.field.window,
            scale,
            values: self.field.mask_at(self.field.shape.index(center)).to_vec(),
        })
    }
}

/// Dispatches each request to the provider registered for its scale.
pub struct MultiScaleProvider {
    parts: Vec<Box<dyn MaskProvider>>,
}

impl MultiScaleProvider {
    /// All parts must agree on shape and window; each scale may be served
    /// by one part only.
    pub fn new(parts: Vec<Box<dyn MaskProvider>>) -> Result<Self> {
        let Some(first) = parts.first() else {
            return Err(Error::InvalidArgument("no mask providers given".into()));
        };
        let (shape, window) = (first.shape(), first.window());
        let mut seen = Vec::new();
        for p in &parts {
            if p.shape() != shape {
                return Err(Error::ShapeMismatch {
                    expected: shape,
                    found: p.shape(),
                });
            }
            if p.window() != window {
                return Err(Error::WindowMismatch {
                    expected: window,
                    found: p.window(),
                });
            }
            for s in p.supported_scales() {
                if seen.contains(&s) {
                    return Err(Error::InvalidArgument(format!("scale {s} provided twice")));
                }
                seen.push(s);
            }
        }
        Ok(MultiScaleProvider { parts })
    }
}

impl MaskProvider for MultiScaleProvider {
    fn shape(&self) -> Shape {
        self.parts[0].shape()
    }
    fn window(&self) -> MaskWindow {
        self.parts[0].window()
    }
    fn supported_scales(&self) -> Vec<Scale> {
        self.parts.iter().flat_map(|p| p.supported_scales()).collect()
    }
    fn mask(&self, center: Coord3, scale: Scale) -> Result<CentralInstanceMask> {
        self.parts
            .iter()
            .find(|p| p.supported_scales().contains(&scale))
            .ok_or(Error::UnsupportedScale(scale))?
            .mask(center, scale)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn line_volume() -> LabelVolume {
        let shape = Shape::new(10, 1, 1).unwrap();
        LabelVolume::new(shape, (0..10).map(|x| if x < 5 { 1 } else { 2 }).collect()).unwrap()
    }

    #[test]
    fn uniform_volume_gives_all_ones() {
        let labels = LabelVolume::filled(Shape::new(12, 12, 8).unwrap(), 7);
        let m = gt_mask(&labels, Coord3::new(6, 6, 4), MaskWindow::default(), Scale::FULL, false).unwrap();
        assert!(m.values().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn line_masks() {
        let labels = line_volume();
        let w = MaskWindow::new(5, 1, 1).unwrap();
        let at = |x| gt_mask(&labels, Coord3::new(x, 0, 0), w, Scale::FULL, false).unwrap();
        assert_eq!(at(2).values(), &[1.0, 1.0, 1.0, 1.0, 1.0]);
        assert_eq!(at(4).values(), &[1.0, 1.0, 1.0, 0.0, 0.0]);
        // out-of-bounds entries are 0
        assert_eq!(at(0).values(), &[0.0, 0.0, 1.0, 1.0, 1.0]);
    }

    #[test]
    fn boundary_rule_gives_single_pixel() {
        let labels = line_volume();
        let w = MaskWindow::new(5, 1, 1).unwrap();
        let m = gt_mask(&labels, Coord3::new(4, 0, 0), w, Scale::FULL, true).unwrap();
        assert_eq!(m.values(), &[0.0, 0.0, 1.0, 0.0, 0.0]);
        let m = gt_mask(&labels, Coord3::new(2, 0, 0), w, Scale::FULL, true).unwrap();
        assert_eq!(m.values(), &[1.0; 5]);
    }

    #[test]
    fn boundary_near_is_in_plane() {
        // labels differ only across z
        let shape = Shape::new(3, 3, 2).unwrap();
        let labels = LabelVolume::new(shape, (0..18).map(|i| if i < 9 { 1 } else { 2 }).collect()).unwrap();
        assert!(!is_boundary_near(&labels, Coord3::new(1, 1, 0)));
        let mut diag = LabelVolume::filled(shape, 1);
        diag.data_mut()[shape.index(Coord3::new(2, 2, 0))] = 3;
        assert!(is_boundary_near(&diag, Coord3::new(1, 1, 0)));
        assert!(!is_boundary_near(&diag, Coord3::new(0, 0, 0)));
    }

    #[test]
    fn out_of_bounds_center() {
        let labels = line_volume();
        assert!(matches!(
            gt_mask(&labels, Coord3::new(10, 0, 0), MaskWindow::default(), Scale::FULL, false),
            Err(Error::OutOfBounds { .. })
        ));
    }

    fn random_volume(seed: u64, shape: Shape, n: u64) -> LabelVolume {
        let data = (0..shape.len() as u64)
            .map(|i| 1 + crate::hash::hash_words(seed, &[i]) % n)
            .collect();
        LabelVolume::new(shape, data).unwrap()
    }

    #[test]
    fn zero_sigma_is_identity() {
        let labels = random_volume(3, Shape::new(6, 6, 3).unwrap(), 3);
        let oracle = OracleProvider::new(labels, MaskWindow::new(3, 3, 3).unwrap(), vec![Scale::FULL], false);
        let noisy = perturb(&oracle, NoiseConfig { seed: 9, ..Default::default() });
        for i in 0..oracle.shape().len() {
            let c = oracle.shape().coord(i);
            assert_eq!(noisy.mask(c, Scale::FULL).unwrap(), oracle.mask(c, Scale::FULL).unwrap());
        }
    }

    #[test]
    fn noise_is_deterministic_and_bounded() {
        let labels = random_volume(4, Shape::new(6, 6, 3).unwrap(), 2);
        let oracle = OracleProvider::new(labels, MaskWindow::new(3, 3, 3).unwrap(), vec![Scale::FULL], true);
        let cfg = NoiseConfig {
            flip_sigma: 3.0,
            smoothing_radius: 1,
            seed: 11,
            ..Default::default()
        };
        let a = perturb(&oracle, cfg);
        let b = perturb(&oracle, cfg);
        for i in 0..oracle.shape().len() {
            let c = oracle.shape().coord(i);
            let ma = a.mask(c, Scale::FULL).unwrap();
            let mb = b.mask(c, Scale::FULL).unwrap();
            let bits = |m: &CentralInstanceMask| m.values().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
            assert_eq!(bits(&ma), bits(&mb));
            assert!(ma.values().iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }

    #[test]
    fn deviation_grows_with_sigma() {
        let labels = random_volume(5, Shape::new(8, 8, 3).unwrap(), 3);
        let oracle = OracleProvider::new(labels, MaskWindow::new(3, 3, 3).unwrap(), vec![Scale::FULL], false);
        let mad = |sigma: f64| {
            let noisy = perturb(
                &oracle,
                NoiseConfig {
                    flip_sigma: sigma,
                    seed: 1,
                    ..Default::default()
                },
            );
            let mut total = 0.0f64;
            for i in 0..oracle.shape().len() {
                let c = oracle.shape().coord(i);
                let base = oracle.mask(c, Scale::FULL).unwrap();
                let m = noisy.mask(c, Scale::FULL).unwrap();
                total += base.values().iter().zip(m.values()).map(|(a, b)| f64::from((a - b).abs())).sum::<f64>();
            }
            total
        };
        let devs: Vec<f64> = [0.0, 0.5, 1.0, 2.0, 4.0, 8.0].iter().map(|&s| mad(s)).collect();
        assert!(devs.windows(2).all(|w| w[0] < w[1]), "{devs:?}");
    }

    #[test]
    fn mask_field_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let labels = random_volume(6, Shape::new(6, 6, 3).unwrap(), 4);
        let oracle = OracleProvider::new(labels, MaskWindow::new(3, 3, 3).unwrap(), vec![Scale::FULL], false);
        let path = dir.path().join("field");
        export_mask_field(&oracle, Scale::FULL, &path).unwrap();
        let loaded = file_provider(&path).unwrap();
        for i in 0..oracle.shape().len() {
            let c = oracle.shape().coord(i);
            assert_eq!(loaded.mask(c, Scale::FULL).unwrap(), oracle.mask(c, Scale::FULL).unwrap());
        }
        assert!(matches!(loaded.mask(Coord3::ZERO, Scale::QUARTER), Err(Error::UnsupportedScale(_))));
    }

    #[test]
    fn mask_field_rejects_out_of_range_values() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad");
        let w = MaskWindow::new(1, 1, 1).unwrap();
        let mut header = ArrayHeader::new(Dtype::F32, vec![1, 1, 2, 1]);
        header.window = Some(w.zyx());
        header.scale = Some(Scale::FULL.zyx());
        write_array(&path, &header, &ArrayData::F32(vec![0.5, 1.5])).unwrap();
        assert!(matches!(file_provider(&path), Err(Error::ValueOutOfRange { index: 1, .. })));
        assert!(file_provider(&dir.path().join("missing")).unwrap_err().is_io());
    }

    #[test]
    fn mask_field_rejects_window_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad");
        let mut header = ArrayHeader::new(Dtype::F32, vec![1, 1, 1, 2]);
        header.window = Some([1, 1, 3]);
        header.scale = Some(Scale::FULL.zyx());
        write_array(&path, &header, &ArrayData::F32(vec![0.5, 0.5])).unwrap();
        assert!(matches!(file_provider(&path), Err(Error::WindowMismatch { .. })));
    }

    #[test]
    fn multi_scale_dispatch() {
        let labels = Arc::new(random_volume(7, Shape::new(9, 9, 2).unwrap(), 3));
        let w = MaskWindow::new(3, 3, 1).unwrap();
        let fine = OracleProvider::new(labels.clone(), w, vec![Scale::FULL], false);
        let coarse = OracleProvider::new(labels.clone(), w, vec![Scale::QUARTER], false);
        let both = OracleProvider::new(labels, w, vec![Scale::FULL, Scale::QUARTER], false);
        let multi = MultiScaleProvider::new(vec![Box::new(fine.clone()), Box::new(coarse)]).unwrap();
        let c = Coord3::new(4, 4, 1);
        for s in [Scale::FULL, Scale::QUARTER] {
            assert_eq!(multi.mask(c, s).unwrap(), both.mask(c, s).unwrap());
        }
        assert!(multi.mask(c, Scale::EIGHTH).is_err());
        assert!(MultiScaleProvider::new(vec![Box::new(fine.clone()), Box::new(fine)]).is_err());
    }

    proptest! {
        #[test]
        fn strided_mask_equals_subsampled_volume(
            seed in any::<u64>(),
            sx in 1u32..4, sy in 1u32..4, sz in 1u32..3,
            cx in 0i64..10, cy in 0i64..10, cz in 0i64..4,
            rule in any::<bool>(),
        ) {
            let shape = Shape::new(10, 10, 4).unwrap();
            let labels = random_volume(seed, shape, 3);
            let scale = Scale::new(sx, sy, sz).unwrap();
            let window = MaskWindow::new(5, 3, 3).unwrap();
            let center = Coord3::new(cx, cy, cz);
            let m = gt_mask(&labels, center, window, scale, false).unwrap();
            prop_assert_eq!(m.center(), 1.0);
            prop_assert!(m.values().iter().all(|&v| v == 0.0 || v == 1.0));

            // the same window at unit scale on the strided sub-volume through the center
            let h = window.half();
            let sub_shape = Shape::new(window.x, window.y, window.z).unwrap();
            let sub_data = (0..sub_shape.len()).map(|i| {
                let n = sub_shape.coord(i) - h;
                labels.get(center + n.scaled(scale)).unwrap_or(0)
            }).collect();
            let sub = LabelVolume::new(sub_shape, sub_data).unwrap();
            let sub_mask = gt_mask(&sub, h, window, Scale::FULL, false).unwrap();
            prop_assert_eq!(m.values(), sub_mask.values());

            if rule {
                let r = gt_mask(&labels, center, window, scale, true).unwrap();
                prop_assert_eq!(r.center(), 1.0);
            }
        }
    }
}
