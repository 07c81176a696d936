//! Linear latent codec for flattened masks.
//!
//! A mask is encoded as its coordinates in the top-`Q` principal subspace of
//! a training sample and decoded by projecting back and clamping to
//! `[0, 1]`. The principal directions come from power iteration on the
//! sample covariance, each new direction deflated against the ones already
//! found.

use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::container_paths;
use crate::masks::{CentralInstanceMask, MaskProvider};
use crate::volume::{Coord3, MaskWindow, Scale, Shape};

pub const MAX_ITERATIONS: usize = 1000;
pub const EIGENVALUE_TOLERANCE: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq)]
pub struct LinearMaskCodec {
    window: MaskWindow,
    mean: Vec<f64>,
    /// `Q` orthonormal rows of length `D`.
    basis: Vec<Vec<f64>>,
    /// Covariance eigenvalue per basis row; empty for codecs read from disk.
    eigenvalues: Vec<f64>,
    total_variance: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn orthogonalize(x: &mut [f64], against: &[Vec<f64>]) {
    for b in against {
        let p = dot(x, b);
        x.iter_mut().zip(b).for_each(|(xi, bi)| *xi -= p * bi);
    }
}

fn mat_vec(m: &[f64], d: usize, x: &[f64], out: &mut [f64]) {
    for (row, o) in m.chunks_exact(d).zip(out.iter_mut()) {
        *o = dot(row, x);
    }
}

/// Unit vector orthogonal to `found`: a random draw, or a canonical basis
/// vector if the draw happens to lie in their span.
fn fresh_direction(rng: &mut ChaCha8Rng, d: usize, found: &[Vec<f64>]) -> Vec<f64> {
    let mut x: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut *rng)).collect();
    for attempt in 0..=d {
        orthogonalize(&mut x, found);
        orthogonalize(&mut x, found);
        let n = norm(&x);
        if n > 1e-8 {
            x.iter_mut().for_each(|v| *v /= n);
            return x;
        }
        x = vec![0.0; d];
        x[attempt % d] = 1.0;
    }
    unreachable!("fewer than d orthonormal vectors always leave a free direction")
}

/// Top `q` eigenpairs of the symmetric positive semi-definite `d x d`
/// matrix `m` (row-major), by power iteration with deflation.
pub fn power_iteration(m: &[f64], d: usize, q: usize, seed: u64) -> (Vec<f64>, Vec<Vec<f64>>) {
    assert_eq!(m.len(), d * d);
    assert!(q <= d);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = (0..d).map(|i| m[i * d + i].abs()).sum::<f64>().max(1.0);
    let mut values = Vec::with_capacity(q);
    let mut vectors: Vec<Vec<f64>> = Vec::with_capacity(q);
    let mut y = vec![0.0; d];
    for _ in 0..q {
        let mut x = fresh_direction(&mut rng, d, &vectors);
        mat_vec(m, d, &x, &mut y);
        let mut lambda = dot(&x, &y);
        for _ in 0..MAX_ITERATIONS {
            orthogonalize(&mut y, &vectors);
            let n = norm(&y);
            if n <= 1e-14 * scale {
                break;
            }
            x.iter_mut().zip(&y).for_each(|(xi, yi)| *xi = yi / n);
            mat_vec(m, d, &x, &mut y);
            let next = dot(&x, &y);
            let done = (next - lambda).abs() <= EIGENVALUE_TOLERANCE;
            lambda = next;
            if done {
                break;
            }
        }
        // re-orthonormalize against accumulated rounding
        orthogonalize(&mut x, &vectors);
        orthogonalize(&mut x, &vectors);
        let n = norm(&x);
        if n > 1e-8 {
            x.iter_mut().for_each(|v| *v /= n);
        } else {
            x = fresh_direction(&mut rng, d, &vectors);
        }
        mat_vec(m, d, &x, &mut y);
        values.push(dot(&x, &y).max(0.0));
        vectors.push(x);
    }
    (values, vectors)
}

/// Fits mean and top-`q` principal basis of the flattened `masks`.
pub fn fit_codec(masks: &[CentralInstanceMask], q: usize, seed: u64) -> Result<LinearMaskCodec> {
    let Some(first) = masks.first() else {
        return Err(Error::InvalidArgument("cannot fit a codec on an empty sample".into()));
    };
    let window = first.window();
    let d = window.len();
    if q > d {
        return Err(Error::InvalidArgument(format!("latent dimension {q} exceeds mask size {d}")));
    }
    if q > masks.len() {
        return Err(Error::InvalidArgument(format!(
            "latent dimension {q} exceeds sample size {}",
            masks.len()
        )));
    }
    if let Some(m) = masks.iter().find(|m| m.window() != window) {
        return Err(Error::WindowMismatch {
            expected: window,
            found: m.window(),
        });
    }
    let n = masks.len() as f64;
    let mut mean = vec![0.0; d];
    for m in masks {
        mean.iter_mut().zip(m.values()).for_each(|(a, &v)| *a += f64::from(v));
    }
    mean.iter_mut().for_each(|a| *a /= n);

    let mut cov = vec![0.0; d * d];
    let mut centered = vec![0.0; d];
    for m in masks {
        centered
            .iter_mut()
            .zip(m.values().iter().zip(&mean))
            .for_each(|(c, (&v, mu))| *c = f64::from(v) - mu);
        for i in 0..d {
            let ci = centered[i];
            if ci == 0.0 {
                continue;
            }
            let row = &mut cov[i * d..i * d + d];
            for j in i..d {
                row[j] += ci * centered[j];
            }
        }
    }
    for i in 0..d {
        for j in i..d {
            let v = cov[i * d + j] / n;
            cov[i * d + j] = v;
            cov[j * d + i] = v;
        }
    }
    let total_variance = (0..d).map(|i| cov[i * d + i]).sum();
    let (eigenvalues, basis) = power_iteration(&cov, d, q, seed);
    Ok(LinearMaskCodec {
        window,
        mean,
        basis,
        eigenvalues,
        total_variance,
    })
}

#[derive(Serialize, Deserialize)]
struct CodecHeader {
    /// `[K_z, K_y, K_x]`
    window: [usize; 3],
    #[serde(rename = "Q")]
    q: usize,
    #[serde(rename = "D")]
    d: usize,
}

impl LinearMaskCodec {
    pub fn window(&self) -> MaskWindow {
        self.window
    }

    pub fn latent_dim(&self) -> usize {
        self.basis.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn basis(&self) -> &[Vec<f64>] {
        &self.basis
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Fraction of the sample variance captured by the basis; `None` for
    /// codecs without fit statistics.
    pub fn captured_variance_fraction(&self) -> Option<f64> {
        if self.eigenvalues.len() != self.basis.len() {
            return None;
        }
        if self.total_variance <= 0.0 {
            return Some(1.0);
        }
        Some(self.eigenvalues.iter().sum::<f64>() / self.total_variance)
    }

    /// The same codec restricted to its first `q` basis vectors.
    pub fn truncated(&self, q: usize) -> Result<Self> {
        if q > self.latent_dim() {
            return Err(Error::InvalidArgument(format!(
                "cannot truncate a {}-dimensional codec to {q}",
                self.latent_dim()
            )));
        }
        Ok(LinearMaskCodec {
            window: self.window,
            mean: self.mean.clone(),
            basis: self.basis[..q].to_vec(),
            eigenvalues: self.eigenvalues.get(..q).map(<[f64]>::to_vec).unwrap_or_default(),
            total_variance: self.total_variance,
        })
    }

    pub fn encode(&self, mask: &CentralInstanceMask) -> Result<Vec<f64>> {
        if mask.window() != self.window {
            return Err(Error::WindowMismatch {
                expected: self.window,
                found: mask.window(),
            });
        }
        let centered: Vec<f64> = mask
            .values()
            .iter()
            .zip(&self.mean)
            .map(|(&v, mu)| f64::from(v) - mu)
            .collect();
        Ok(self.basis.iter().map(|b| dot(b, &centered)).collect())
    }

    pub fn decode(&self, latent: &[f64], scale: Scale) -> Result<CentralInstanceMask> {
        if latent.len() != self.latent_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.latent_dim(),
                found: latent.len(),
            });
        }
        let mut flat = self.mean.clone();
        for (b, &z) in self.basis.iter().zip(latent) {
            flat.iter_mut().zip(b).for_each(|(f, bi)| *f += z * bi);
        }
        let values = flat.iter().map(|&v| v.clamp(0.0, 1.0) as f32).collect();
        CentralInstanceMask::new(self.window, scale, values)
    }

    pub fn round_trip(&self, mask: &CentralInstanceMask) -> Result<CentralInstanceMask> {
        self.decode(&self.encode(mask)?, mask.scale())
    }

    /// Writes `<base>.json` (window, Q, D) and `<base>.raw` (f32 mean, then
    /// basis rows).
    pub fn write(&self, base: &Path) -> Result<()> {
        let (json, raw) = container_paths(base);
        let header = CodecHeader {
            window: self.window.zyx(),
            q: self.latent_dim(),
            d: self.window.len(),
        };
        let bytes: Vec<u8> = self
            .mean
            .iter()
            .chain(self.basis.iter().flatten())
            .flat_map(|&v| (v as f32).to_le_bytes())
            .collect();
        if let Some(parent) = json.parent().filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        fs::write(&json, serde_json::to_string_pretty(&header).expect("header serializes"))
            .map_err(|e| Error::io(&json, e))?;
        fs::write(&raw, bytes).map_err(|e| Error::io(&raw, e))
    }

    pub fn read(base: &Path) -> Result<Self> {
        let (json, raw) = container_paths(base);
        let text = fs::read_to_string(&json).map_err(|e| Error::io(&json, e))?;
        let malformed = |reason: String| Error::MalformedHeader {
            path: json.clone(),
            reason,
        };
        let header: CodecHeader = serde_json::from_str(&text).map_err(|e| malformed(e.to_string()))?;
        let window = MaskWindow::from_zyx(header.window).map_err(|e| malformed(e.to_string()))?;
        if header.d != window.len() || header.q > header.d {
            return Err(malformed(format!("inconsistent Q={} D={} for window {window}", header.q, header.d)));
        }
        let bytes = fs::read(&raw).map_err(|e| Error::io(&raw, e))?;
        let expected = ((header.q + 1) * header.d * 4) as u64;
        if bytes.len() as u64 != expected {
            return Err(Error::LengthMismatch {
                path: raw,
                expected,
                found: bytes.len() as u64,
            });
        }
        let values: Vec<f64> = bytes
            .chunks_exact(4)
            .map(|c| f64::from(f32::from_le_bytes(c.try_into().unwrap())))
            .collect();
        let mut rows = values.chunks_exact(header.d).map(<[f64]>::to_vec);
        let mean = rows.next().expect("mean row present");
        Ok(LinearMaskCodec {
            window,
            mean,
            basis: rows.collect(),
            eigenvalues: Vec::new(),
            total_variance: 0.0,
        })
    }
}

/// Serves `decode(encode(base.mask(c, s)))`.
#[derive(Clone, Debug)]
pub struct CodecProvider<P> {
    base: P,
    codec: LinearMaskCodec,
}

pub fn codec_provider<P: MaskProvider>(base: P, codec: LinearMaskCodec) -> Result<CodecProvider<P>> {
    if base.window() != codec.window() {
        return Err(Error::WindowMismatch {
            expected: codec.window(),
            found: base.window(),
        });
    }
    Ok(CodecProvider { base, codec })
}

impl<P> CodecProvider<P> {
    pub fn codec(&self) -> &LinearMaskCodec {
        &self.codec
    }
}

impl<P: MaskProvider> MaskProvider for CodecProvider<P> {
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
        self.codec.round_trip(&self.base.mask(center, scale)?)
    }
}
