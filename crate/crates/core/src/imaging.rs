//! Frames, boxes, feature maps, and the pluggable feature embedding.
//!
//! Everything downstream (solvers, trackers, fusion) operates on
//! [`FeatureMap`] tensors produced here. The default embedding replaces a
//! learned network with grayscale + gradient cell features so the pipeline
//! has no model dependency; richer embeddings plug in through
//! [`FeatureExtractor`].

use crate::error::{Error, Result};
use crate::Real;
use std::path::Path;

/// One video frame: interleaved 8-bit pixels, 1 (gray) or 3 (RGB) channels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub pixels: Vec<u8>,
    pub frame_index: usize,
}

impl Frame {
    pub fn new(
        width: usize,
        height: usize,
        channels: usize,
        pixels: Vec<u8>,
        frame_index: usize,
    ) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Parameter(format!(
                "frame dimensions must be positive, got {width}x{height}"
            )));
        }
        if channels != 1 && channels != 3 {
            return Err(Error::Parameter(format!(
                "frame must have 1 or 3 channels, got {channels}"
            )));
        }
        if pixels.len() != width * height * channels {
            return Err(Error::Parameter(format!(
                "pixel buffer length {} does not match {width}x{height}x{channels}",
                pixels.len()
            )));
        }
        Ok(Self {
            width,
            height,
            channels,
            pixels,
            frame_index,
        })
    }

    /// Grayscale frame filled with a constant value.
    pub fn constant(width: usize, height: usize, value: u8) -> Self {
        Self {
            width,
            height,
            channels: 1,
            pixels: vec![value; width * height],
            frame_index: 0,
        }
    }

    /// Load a PNG or JPEG file; channel count follows the file's color type.
    pub fn load(path: &Path, frame_index: usize) -> Result<Self> {
        let img = image::open(path)?;
        let (w, h) = (img.width() as usize, img.height() as usize);
        let (pixels, channels) = match img {
            image::DynamicImage::ImageLuma8(g) => (g.into_raw(), 1),
            other => (other.into_rgb8().into_raw(), 3),
        };
        Frame::new(w, h, channels, pixels, frame_index)
    }

    /// Luminance at a clamped integer coordinate, in [0, 1].
    #[inline]
    pub fn luma_at(&self, x: i64, y: i64) -> f64 {
        let xi = x.clamp(0, self.width as i64 - 1) as usize;
        let yi = y.clamp(0, self.height as i64 - 1) as usize;
        let base = (yi * self.width + xi) * self.channels;
        let v = if self.channels == 1 {
            self.pixels[base] as f64
        } else {
            0.299 * self.pixels[base] as f64
                + 0.587 * self.pixels[base + 1] as f64
                + 0.114 * self.pixels[base + 2] as f64
        };
        v / 255.0
    }
}

/// Axis-aligned box in frame coordinates. May extend beyond frame bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundingBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl BoundingBox {
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Result<Self> {
        if !(w > 0.0 && h > 0.0) || !(x.is_finite() && y.is_finite()) {
            return Err(Error::InvalidBox(format!(
                "box ({x}, {y}, {w}, {h}) must have positive finite dimensions"
            )));
        }
        Ok(Self { x, y, w, h })
    }

    pub fn center(&self) -> (f64, f64) {
        (self.x + self.w / 2.0, self.y + self.h / 2.0)
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    /// Box with the same dimensions centered at (cx, cy).
    pub fn centered_at(cx: f64, cy: f64, w: f64, h: f64) -> Self {
        Self {
            x: cx - w / 2.0,
            y: cy - h / 2.0,
            w,
            h,
        }
    }
}

/// Real-valued H×W×C tensor; stored as per-channel planes.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap<T: Real> {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    data: Vec<T>,
}

impl<T: Real> FeatureMap<T> {
    pub fn zeros(height: usize, width: usize, channels: usize) -> Self {
        Self {
            height,
            width,
            channels,
            data: vec![T::zero(); height * width * channels],
        }
    }

    pub fn from_planes(height: usize, width: usize, channels: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), height * width * channels);
        Self {
            height,
            width,
            channels,
            data,
        }
    }

    /// Per-channel impulse: 1 at the (0, 0) cell of every channel.
    /// This is the identity element of circular convolution.
    pub fn impulse(height: usize, width: usize, channels: usize) -> Self {
        let mut m = Self::zeros(height, width, channels);
        let plane = height * width;
        for c in 0..channels {
            m.data[c * plane] = T::one();
        }
        m
    }

    #[inline]
    pub fn plane(&self, c: usize) -> &[T] {
        let n = self.height * self.width;
        &self.data[c * n..(c + 1) * n]
    }

    #[inline]
    pub fn plane_mut(&mut self, c: usize) -> &mut [T] {
        let n = self.height * self.width;
        &mut self.data[c * n..(c + 1) * n]
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize, c: usize) -> T {
        self.data[c * self.height * self.width + y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, y: usize, x: usize, c: usize, v: T) {
        self.data[c * self.height * self.width + y * self.width + x] = v;
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.height == other.height && self.width == other.width && self.channels == other.channels
    }

    pub fn shape_str(&self) -> String {
        format!("{}x{}x{}", self.height, self.width, self.channels)
    }

    pub fn values(&self) -> &[T] {
        &self.data
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    /// Flatten in (height, width, channel) order, channel fastest.
    /// Fixed so that regression designs built on it are reproducible.
    pub fn vectorize_interleaved(&self) -> Vec<T> {
        let mut out = Vec::with_capacity(self.data.len());
        for y in 0..self.height {
            for x in 0..self.width {
                for c in 0..self.channels {
                    out.push(self.get(y, x, c));
                }
            }
        }
        out
    }

    /// Multiply every channel elementwise by a single-channel mask.
    pub fn apply_mask(&mut self, mask: &FeatureMap<T>) -> Result<()> {
        if mask.height != self.height || mask.width != self.width || mask.channels != 1 {
            return Err(Error::ShapeMismatch {
                expected: format!("{}x{}x1", self.height, self.width),
                got: mask.shape_str(),
            });
        }
        let n = self.height * self.width;
        for c in 0..self.channels {
            let plane = self.plane_mut(c);
            for (v, m) in plane.iter_mut().zip(mask.data[..n].iter()) {
                *v *= *m;
            }
        }
        Ok(())
    }

    pub fn l2_norm(&self) -> T {
        self.data
            .iter()
            .fold(T::zero(), |acc, v| acc + *v * *v)
            .sqrt()
    }
}

/// Feature embedding interface: maps a pixel patch to a feature tensor.
///
/// For a fixed input patch size the output shape must be deterministic:
/// (patch_h / cell_size, patch_w / cell_size, channels).
pub trait FeatureExtractor<T: Real>: Send + Sync {
    /// Spatial downsampling factor (≥ 1).
    fn cell_size(&self) -> usize;
    /// Number of output channels.
    fn channels(&self) -> usize;
    /// Identifier recorded in config fingerprints.
    fn kind(&self) -> &'static str;
    /// Embed a patch. Errors if patch dimensions are not divisible by the
    /// cell size.
    fn embed(&self, patch: &Frame) -> Result<FeatureMap<T>>;
}

/// Default embedding: 4 channels (grayscale, horizontal gradient, vertical
/// gradient, gradient magnitude), mean-pooled over cell_size×cell_size
/// cells, each channel shifted to zero mean over the map.
#[derive(Debug, Clone)]
pub struct GrayGradientExtractor {
    pub cell_size: usize,
}

impl GrayGradientExtractor {
    pub fn new(cell_size: usize) -> Result<Self> {
        if cell_size == 0 {
            return Err(Error::Parameter("cell_size must be >= 1".into()));
        }
        Ok(Self { cell_size })
    }
}

impl Default for GrayGradientExtractor {
    fn default() -> Self {
        Self { cell_size: 2 }
    }
}

impl<T: Real> FeatureExtractor<T> for GrayGradientExtractor {
    fn cell_size(&self) -> usize {
        self.cell_size
    }

    fn channels(&self) -> usize {
        4
    }

    fn kind(&self) -> &'static str {
        "gray-gradient"
    }

    fn embed(&self, patch: &Frame) -> Result<FeatureMap<T>> {
        let cs = self.cell_size;
        if !patch.width.is_multiple_of(cs) || !patch.height.is_multiple_of(cs) {
            return Err(Error::ShapeMismatch {
                expected: format!("dimensions divisible by cell_size {cs}"),
                got: format!("{}x{}", patch.width, patch.height),
            });
        }
        let (pw, ph) = (patch.width, patch.height);
        let (fw, fh) = (pw / cs, ph / cs);

        // Per-pixel channels in T. Gradients are central differences with
        // clamped borders.
        let mut gray = vec![T::zero(); pw * ph];
        let mut gx = vec![T::zero(); pw * ph];
        let mut gy = vec![T::zero(); pw * ph];
        let mut gm = vec![T::zero(); pw * ph];
        let half = T::from_f64_lossy(0.5);
        for y in 0..ph {
            for x in 0..pw {
                let i = y * pw + x;
                gray[i] = T::from_f64_lossy(patch.luma_at(x as i64, y as i64));
                let dx = T::from_f64_lossy(
                    patch.luma_at(x as i64 + 1, y as i64) - patch.luma_at(x as i64 - 1, y as i64),
                ) * half;
                let dy = T::from_f64_lossy(
                    patch.luma_at(x as i64, y as i64 + 1) - patch.luma_at(x as i64, y as i64 - 1),
                ) * half;
                gx[i] = dx;
                gy[i] = dy;
                gm[i] = (dx * dx + dy * dy).sqrt();
            }
        }

        let mut out = FeatureMap::zeros(fh, fw, 4);
        let cell_area = T::from_f64_lossy((cs * cs) as f64);
        for (c, src) in [&gray, &gx, &gy, &gm].iter().enumerate() {
            for cy in 0..fh {
                for cx in 0..fw {
                    let mut acc = T::zero();
                    for iy in 0..cs {
                        for ix in 0..cs {
                            acc += src[(cy * cs + iy) * pw + (cx * cs + ix)];
                        }
                    }
                    out.set(cy, cx, c, acc / cell_area);
                }
            }
            // zero-mean per channel
            let n = T::from_f64_lossy((fh * fw) as f64);
            let mean = out.plane(c).iter().copied().sum::<T>() / n;
            for v in out.plane_mut(c) {
                *v -= mean;
            }
        }
        Ok(out)
    }
}

/// Crop the region centered on `bbox`'s center with side lengths
/// `pad_factor * w` × `pad_factor * h`, resampled to `out_w` × `out_h`
/// via bilinear interpolation; pixels outside the frame replicate the edge.
pub fn extract_patch_rect(
    frame: &Frame,
    bbox: &BoundingBox,
    pad_factor: f64,
    out_w: usize,
    out_h: usize,
) -> Result<Frame> {
    if !(bbox.w > 0.0 && bbox.h > 0.0) {
        return Err(Error::InvalidBox(format!(
            "box dimensions must be positive, got {}x{}",
            bbox.w, bbox.h
        )));
    }
    if pad_factor < 1.0 {
        return Err(Error::Parameter(format!(
            "pad_factor must be >= 1, got {pad_factor}"
        )));
    }
    if out_w == 0 || out_h == 0 {
        return Err(Error::Parameter("output size must be positive".into()));
    }

    let (cx, cy) = bbox.center();
    let rw = pad_factor * bbox.w;
    let rh = pad_factor * bbox.h;
    let left = cx - rw / 2.0;
    let top = cy - rh / 2.0;
    let sx = rw / out_w as f64;
    let sy = rh / out_h as f64;

    let ch = frame.channels;
    let mut pixels = vec![0u8; out_w * out_h * ch];
    for oy in 0..out_h {
        let fy = top + (oy as f64 + 0.5) * sy - 0.5;
        let y0 = fy.floor();
        let wy = fy - y0;
        for ox in 0..out_w {
            let fx = left + (ox as f64 + 0.5) * sx - 0.5;
            let x0 = fx.floor();
            let wx = fx - x0;
            for c in 0..ch {
                let p00 = sample(frame, x0 as i64, y0 as i64, c);
                let p01 = sample(frame, x0 as i64 + 1, y0 as i64, c);
                let p10 = sample(frame, x0 as i64, y0 as i64 + 1, c);
                let p11 = sample(frame, x0 as i64 + 1, y0 as i64 + 1, c);
                let v = p00 * (1.0 - wx) * (1.0 - wy)
                    + p01 * wx * (1.0 - wy)
                    + p10 * (1.0 - wx) * wy
                    + p11 * wx * wy;
                pixels[(oy * out_w + ox) * ch + c] = (v + 0.5).floor().clamp(0.0, 255.0) as u8;
            }
        }
    }
    Frame::new(out_w, out_h, ch, pixels, frame.frame_index)
}

/// Square-output form of [`extract_patch_rect`].
pub fn extract_patch(
    frame: &Frame,
    bbox: &BoundingBox,
    pad_factor: f64,
    out_size: usize,
) -> Result<Frame> {
    extract_patch_rect(frame, bbox, pad_factor, out_size, out_size)
}

#[inline]
fn sample(frame: &Frame, x: i64, y: i64, c: usize) -> f64 {
    let xi = x.clamp(0, frame.width as i64 - 1) as usize;
    let yi = y.clamp(0, frame.height as i64 - 1) as usize;
    frame.pixels[(yi * frame.width + xi) * frame.channels + c] as f64
}

/// Separable Hann window: values in [0, 1], zero on the outer ring,
/// maximal at the center. A 1×1 window is the single value 1.
pub fn cosine_window<T: Real>(h: usize, w: usize) -> Result<FeatureMap<T>> {
    if h == 0 || w == 0 {
        return Err(Error::Parameter(
            "window dimensions must be positive".into(),
        ));
    }
    let hann = |n: usize| -> Vec<T> {
        if n == 1 {
            return vec![T::one()];
        }
        (0..n)
            .map(|i| {
                T::from_f64_lossy(0.5)
                    * (T::one()
                        - T::from_f64_lossy(
                            (2.0 * std::f64::consts::PI * i as f64 / (n as f64 - 1.0)).cos(),
                        ))
            })
            .collect()
    };
    let wy = hann(h);
    let wx = hann(w);
    let mut out = FeatureMap::zeros(h, w, 1);
    for y in 0..h {
        for x in 0..w {
            out.set(y, x, 0, wy[y] * wx[x]);
        }
    }
    Ok(out)
}

/// Centered isotropic 2-D Gaussian, normalized so the peak value is 1.
///
/// The center sits at ((h-1)/2, (w-1)/2); for even dimensions that point
/// falls between cells and the nearest cells carry the (normalized) peak.
pub fn gaussian_weight_map<T: Real>(h: usize, w: usize, sigma: f64) -> Result<FeatureMap<T>> {
    if sigma <= 0.0 {
        return Err(Error::Parameter(format!("sigma must be > 0, got {sigma}")));
    }
    if h == 0 || w == 0 {
        return Err(Error::Parameter("map dimensions must be positive".into()));
    }
    let cy = (h as f64 - 1.0) / 2.0;
    let cx = (w as f64 - 1.0) / 2.0;
    let denom = 2.0 * sigma * sigma;
    let mut out = FeatureMap::zeros(h, w, 1);
    let mut max = f64::MIN;
    let mut vals = vec![0.0f64; h * w];
    for y in 0..h {
        for x in 0..w {
            let d2 = (y as f64 - cy).powi(2) + (x as f64 - cx).powi(2);
            let v = (-d2 / denom).exp();
            vals[y * w + x] = v;
            max = max.max(v);
        }
    }
    for y in 0..h {
        for x in 0..w {
            out.set(y, x, 0, T::from_f64_lossy(vals[y * w + x] / max));
        }
    }
    Ok(out)
}

/// Multiply a frame's intensities by a pixel-resolution weight map.
/// Weights are expected in [0, 1]; results round to the nearest 8-bit value.
pub fn weight_frame(frame: &Frame, weights: &FeatureMap<f64>) -> Result<Frame> {
    if weights.height != frame.height || weights.width != frame.width || weights.channels != 1 {
        return Err(Error::ShapeMismatch {
            expected: format!("{}x{}x1", frame.height, frame.width),
            got: weights.shape_str(),
        });
    }
    let ch = frame.channels;
    let mut pixels = vec![0u8; frame.pixels.len()];
    for y in 0..frame.height {
        for x in 0..frame.width {
            let wv = weights.get(y, x, 0);
            for c in 0..ch {
                let i = (y * frame.width + x) * ch + c;
                pixels[i] = (frame.pixels[i] as f64 * wv + 0.5)
                    .floor()
                    .clamp(0.0, 255.0) as u8;
            }
        }
    }
    Frame::new(frame.width, frame.height, ch, pixels, frame.frame_index)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gradient_frame(w: usize, h: usize) -> Frame {
        // deterministic, textured test frame
        let pixels = (0..w * h)
            .map(|i| {
                let x = i % w;
                let y = i / w;
                ((x * 7 + y * 13 + (x * y) % 31) % 256) as u8
            })
            .collect();
        Frame::new(w, h, 1, pixels, 0).unwrap()
    }

    #[test]
    fn identity_crop_preserves_pixels() {
        let frame = gradient_frame(100, 100);
        let bbox = BoundingBox::new(40.0, 40.0, 20.0, 20.0).unwrap();
        let patch = extract_patch(&frame, &bbox, 1.0, 20).unwrap();
        for y in 0..20 {
            for x in 0..20 {
                assert_eq!(
                    patch.pixels[y * 20 + x],
                    frame.pixels[(y + 40) * 100 + (x + 40)],
                    "pixel ({x},{y})"
                );
            }
        }
    }

    #[test]
    fn corner_box_replicates_border() {
        let frame = gradient_frame(50, 50);
        let bbox = BoundingBox::new(-5.0, -5.0, 10.0, 10.0).unwrap();
        // centered at (0,0); pad 2 reaches well outside the frame
        let patch = extract_patch(&frame, &bbox, 2.0, 20).unwrap();
        assert_eq!(patch.width, 20);
        // the far out-of-frame corner must replicate pixel (0,0)
        assert_eq!(patch.pixels[0], frame.pixels[0]);
    }

    #[test]
    fn constant_frame_stays_constant() {
        let frame = Frame::constant(64, 64, 128);
        let bbox = BoundingBox::new(10.3, 20.7, 17.1, 9.4).unwrap();
        let patch = extract_patch(&frame, &bbox, 1.7, 32).unwrap();
        assert!(patch.pixels.iter().all(|&p| p == 128));
    }

    #[test]
    fn invalid_box_rejected() {
        let frame = gradient_frame(10, 10);
        let bbox = BoundingBox {
            x: 0.0,
            y: 0.0,
            w: -1.0,
            h: 5.0,
        };
        assert!(matches!(
            extract_patch(&frame, &bbox, 1.0, 8),
            Err(Error::InvalidBox(_))
        ));
    }

    #[test]
    fn patch_extraction_never_panics_on_wild_boxes() {
        let frame = gradient_frame(37, 23);
        let mut state = 0x9e3779b97f4a7c15u64;
        let mut next = || {
            state = state
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            (state >> 33) as f64 / (1u64 << 31) as f64 - 1.0
        };
        for _ in 0..500 {
            let bbox = BoundingBox {
                x: next() * 200.0,
                y: next() * 200.0,
                w: next().abs() * 100.0 + 0.1,
                h: next().abs() * 100.0 + 0.1,
            };
            let pad = 1.0 + next().abs() * 3.0;
            let patch = extract_patch(&frame, &bbox, pad, 16).unwrap();
            assert_eq!(patch.pixels.len(), 16 * 16);
        }
    }

    #[test]
    fn constant_patch_embeds_to_zero() {
        let patch = Frame::constant(16, 16, 77);
        let ex = GrayGradientExtractor::default();
        let f: FeatureMap<f64> = ex.embed(&patch).unwrap();
        assert!(f.values().iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn cell_size_one_keeps_spatial_shape() {
        let patch = gradient_frame(12, 10);
        let ex = GrayGradientExtractor::new(1).unwrap();
        let f: FeatureMap<f64> = ex.embed(&patch).unwrap();
        assert_eq!((f.height, f.width, f.channels), (10, 12, 4));
    }

    #[test]
    fn indivisible_dimensions_rejected() {
        let patch = gradient_frame(13, 10);
        let ex = GrayGradientExtractor::new(2).unwrap();
        let r: Result<FeatureMap<f64>> = ex.embed(&patch);
        assert!(matches!(r, Err(Error::ShapeMismatch { .. })));
    }

    #[test]
    fn step_edge_gradient_matches_finite_difference_oracle() {
        // vertical step edge: left half 40, right half 200
        let (w, h) = (16, 16);
        let mut pixels = vec![40u8; w * h];
        for y in 0..h {
            for x in w / 2..w {
                pixels[y * w + x] = 200;
            }
        }
        let patch = Frame::new(w, h, 1, pixels, 0).unwrap();
        let ex = GrayGradientExtractor::new(1).unwrap();
        let f: FeatureMap<f64> = ex.embed(&patch).unwrap();

        // oracle: central differences on the raw luma, then zero-mean
        let luma = |x: i64, y: i64| patch.luma_at(x, y);
        let mut oracle = vec![0.0f64; w * h];
        for y in 0..h as i64 {
            for x in 0..w as i64 {
                oracle[(y as usize) * w + x as usize] = (luma(x + 1, y) - luma(x - 1, y)) / 2.0;
            }
        }
        let mean = oracle.iter().sum::<f64>() / (w * h) as f64;
        for (i, o) in oracle.iter().enumerate() {
            let (y, x) = (i / w, i % w);
            assert!(
                (f.get(y, x, 1) - (o - mean)).abs() < 1e-12,
                "cell ({y},{x})"
            );
        }
        // the gradient peaks along the edge columns
        let edge = f.get(h / 2, w / 2, 1);
        let flat = f.get(h / 2, 2, 1);
        assert!(edge > flat);
    }

    #[test]
    fn embed_translation_consistent_at_cell_granularity() {
        // texture periodic in x with period 2*cell so a cell_size shift is a
        // clean one-cell rotation; compare interior cells only.
        let cs = 2usize;
        let (w, h) = (24usize, 16usize);
        let tex = |x: usize, y: usize| (((x % (2 * cs)) * 53 + y * 31 + (y * y) % 17) % 256) as u8;
        let a = Frame::new(w, h, 1, (0..w * h).map(|i| tex(i % w, i / w)).collect(), 0).unwrap();
        let b = Frame::new(
            w,
            h,
            1,
            (0..w * h).map(|i| tex((i % w) + cs, i / w)).collect(),
            0,
        )
        .unwrap();
        let ex = GrayGradientExtractor::new(cs).unwrap();
        let fa: FeatureMap<f64> = ex.embed(&a).unwrap();
        let fb: FeatureMap<f64> = ex.embed(&b).unwrap();
        // the borders differ after the shift, which moves each channel's
        // map-wide mean; interior cells must agree up to that constant
        for c in 0..4 {
            let delta = fb.get(1, 1, c) - fa.get(1, 2, c);
            for y in 1..fa.height - 1 {
                for x in 1..fa.width - 2 {
                    assert!(
                        (fb.get(y, x, c) - fa.get(y, x + 1, c) - delta).abs() < 1e-9,
                        "channel {c} cell ({y},{x})"
                    );
                }
            }
        }
    }

    #[test]
    fn hann_window_matches_direct_formula() {
        let win: FeatureMap<f64> = cosine_window(8, 8).unwrap();
        let hann1d: Vec<f64> = (0..8)
            .map(|i| 0.5 * (1.0 - (2.0 * std::f64::consts::PI * i as f64 / 7.0).cos()))
            .collect();
        for y in 0..8 {
            for x in 0..8 {
                assert!((win.get(y, x, 0) - hann1d[y] * hann1d[x]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn window_degenerate_and_symmetry() {
        let one: FeatureMap<f64> = cosine_window(1, 1).unwrap();
        assert_eq!(one.get(0, 0, 0), 1.0);

        let win: FeatureMap<f64> = cosine_window(4, 4).unwrap();
        for y in 0..4 {
            for x in 0..4 {
                let v = win.get(y, x, 0);
                assert!((0.0..=1.0).contains(&v));
                assert!((v - win.get(3 - y, x, 0)).abs() < 1e-12);
                assert!((v - win.get(y, 3 - x, 0)).abs() < 1e-12);
            }
        }
        // zero on the outer ring
        assert_eq!(win.get(0, 2, 0), 0.0);
        assert_eq!(win.get(2, 0, 0), 0.0);
    }

    #[test]
    fn gaussian_peak_and_corner() {
        let g: FeatureMap<f64> = gaussian_weight_map(5, 5, 1.0).unwrap();
        assert!((g.get(2, 2, 0) - 1.0).abs() < 1e-12);
        assert!((g.get(0, 0, 0) - (-4.0f64).exp()).abs() < 1e-12);
        for v in g.values() {
            assert!(*v > 0.0 && *v <= 1.0);
        }
    }

    #[test]
    fn gaussian_rotation_symmetry() {
        let g: FeatureMap<f64> = gaussian_weight_map(5, 7, 1.3).unwrap();
        for y in 0..5 {
            for x in 0..7 {
                assert!((g.get(y, x, 0) - g.get(4 - y, 6 - x, 0)).abs() < 1e-12);
            }
        }
        assert!(matches!(
            gaussian_weight_map::<f64>(5, 5, 0.0),
            Err(Error::Parameter(_))
        ));
    }

    #[test]
    fn embed_output_finite_for_random_input() {
        let mut state = 1u64;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1);
            (state >> 56) as u8
        };
        for _ in 0..50 {
            let pixels: Vec<u8> = (0..32 * 32).map(|_| next()).collect();
            let patch = Frame::new(32, 32, 1, pixels, 0).unwrap();
            let ex = GrayGradientExtractor::default();
            let f: FeatureMap<f64> = ex.embed(&patch).unwrap();
            assert!(f.values().iter().all(|v| v.is_finite()));
        }
    }
}
