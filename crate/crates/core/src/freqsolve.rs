//! Frequency-domain circular convolution and closed-form ridge solvers.
//!
//! Both tracking transforms minimize a circular-convolution least-squares
//! objective with L2 regularization. The objective decouples per frequency
//! bin and per channel, so the solutions are elementwise divisions in the
//! spectrum. Convention: unnormalized forward transform, 1/N on the inverse.

use crate::error::{Error, Result};
use crate::imaging::FeatureMap;
use crate::tracker::ResponseMap;
use crate::Real;
use rustfft::num_complex::Complex;

/// Complex tensor holding the unnormalized forward transform of a
/// [`FeatureMap`], per channel.
#[derive(Debug, Clone)]
pub struct Spectrum<T: Real> {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    data: Vec<Complex<T>>,
}

impl<T: Real> Spectrum<T> {
    #[inline]
    pub fn plane(&self, c: usize) -> &[Complex<T>] {
        let n = self.height * self.width;
        &self.data[c * n..(c + 1) * n]
    }

    #[inline]
    pub fn plane_mut(&mut self, c: usize) -> &mut [Complex<T>] {
        let n = self.height * self.width;
        &mut self.data[c * n..(c + 1) * n]
    }
}

/// Forward 2-D FFT of one real plane (row-major h×w).
pub fn fft2<T: Real>(plane: &[T], h: usize, w: usize) -> Vec<Complex<T>> {
    debug_assert_eq!(plane.len(), h * w);
    let mut buf: Vec<Complex<T>> = plane.iter().map(|&v| Complex::new(v, T::zero())).collect();
    fft2_complex(&mut buf, h, w, false);
    buf
}

/// Inverse 2-D FFT; divides by h·w and returns the real part.
pub fn ifft2_real<T: Real>(spec: &[Complex<T>], h: usize, w: usize) -> Vec<T> {
    let mut buf = spec.to_vec();
    fft2_complex(&mut buf, h, w, true);
    let scale = T::one() / T::from_f64_lossy((h * w) as f64);
    buf.into_iter().map(|c| c.re * scale).collect()
}

fn fft2_complex<T: Real>(buf: &mut [Complex<T>], h: usize, w: usize, inverse: bool) {
    let row_fft = T::fft_instance(w, inverse);
    let mut scratch = vec![Complex::new(T::zero(), T::zero()); row_fft.get_inplace_scratch_len()];
    for row in buf.chunks_exact_mut(w) {
        row_fft.process_with_scratch(row, &mut scratch);
    }

    let col_fft = T::fft_instance(h, inverse);
    let mut scratch = vec![Complex::new(T::zero(), T::zero()); col_fft.get_inplace_scratch_len()];
    let mut col = vec![Complex::new(T::zero(), T::zero()); h];
    for x in 0..w {
        for y in 0..h {
            col[y] = buf[y * w + x];
        }
        col_fft.process_with_scratch(&mut col, &mut scratch);
        for y in 0..h {
            buf[y * w + x] = col[y];
        }
    }
}

/// Forward transform of every channel of a feature map.
pub fn transform<T: Real>(map: &FeatureMap<T>) -> Spectrum<T> {
    let mut data = Vec::with_capacity(map.height * map.width * map.channels);
    for c in 0..map.channels {
        data.extend(fft2(map.plane(c), map.height, map.width));
    }
    Spectrum {
        height: map.height,
        width: map.width,
        channels: map.channels,
        data,
    }
}

/// Inverse transform back to a real feature map.
pub fn inverse<T: Real>(spec: &Spectrum<T>) -> FeatureMap<T> {
    let mut data = Vec::with_capacity(spec.height * spec.width * spec.channels);
    for c in 0..spec.channels {
        data.extend(ifft2_real(spec.plane(c), spec.height, spec.width));
    }
    FeatureMap::from_planes(spec.height, spec.width, spec.channels, data)
}

/// Per-channel 2-D circular convolution of two same-shaped maps.
pub fn circular_convolve<T: Real>(a: &FeatureMap<T>, b: &FeatureMap<T>) -> Result<FeatureMap<T>> {
    if !a.same_shape(b) {
        return Err(Error::ShapeMismatch {
            expected: a.shape_str(),
            got: b.shape_str(),
        });
    }
    let (h, w) = (a.height, a.width);
    let mut data = Vec::with_capacity(h * w * a.channels);
    for c in 0..a.channels {
        let fa = fft2(a.plane(c), h, w);
        let fb = fft2(b.plane(c), h, w);
        let prod: Vec<Complex<T>> = fa.iter().zip(&fb).map(|(x, y)| x * y).collect();
        data.extend(ifft2_real(&prod, h, w));
    }
    Ok(FeatureMap::from_planes(h, w, a.channels, data))
}

/// Closed-form minimizer of ‖X ⊗ base − target‖² + λ‖X‖², solved
/// independently per channel in the frequency domain:
/// X̂ = conj(B̂)·T̂ / (B̂·conj(B̂) + λ).
fn ridge_deconvolve<T: Real>(
    base: &FeatureMap<T>,
    target: &FeatureMap<T>,
    lambda: T,
    what: &str,
) -> Result<FeatureMap<T>> {
    if !base.same_shape(target) {
        return Err(Error::ShapeMismatch {
            expected: base.shape_str(),
            got: target.shape_str(),
        });
    }
    if lambda < T::zero() {
        return Err(Error::Parameter(format!(
            "{what}: regularization must be >= 0, got {lambda}"
        )));
    }
    let (h, w) = (base.height, base.width);
    let n = T::from_f64_lossy((h * w) as f64);
    let mut data = Vec::with_capacity(h * w * base.channels);
    for c in 0..base.channels {
        let fb = fft2(base.plane(c), h, w);
        let ft = fft2(target.plane(c), h, w);

        if lambda == T::zero() {
            // an (effectively) empty frequency bin makes the system singular
            let max_power = fb
                .iter()
                .map(|v| v.norm_sqr())
                .fold(T::zero(), |a, b| a.max(b));
            let floor = T::epsilon() * n * max_power;
            if fb.iter().any(|v| v.norm_sqr() <= floor) {
                return Err(Error::SingularSystem(format!(
                    "{what}: channel {c} has a zero frequency bin and no regularization"
                )));
            }
        }

        let sol: Vec<Complex<T>> = fb
            .iter()
            .zip(&ft)
            .map(|(b, t)| (b.conj() * t) / (b.norm_sqr() + lambda))
            .collect();
        data.extend(ifft2_real(&sol, h, w));
    }
    Ok(FeatureMap::from_planes(h, w, base.channels, data))
}

/// Appearance-variation transform: the unique minimizer of
/// ‖M ⊗ F₁ − F_prev‖² + λ_m‖M‖².
pub fn solve_variation_transform<T: Real>(
    f1: &FeatureMap<T>,
    f_prev: &FeatureMap<T>,
    lambda_m: T,
) -> Result<FeatureMap<T>> {
    ridge_deconvolve(f1, f_prev, lambda_m, "variation transform")
}

/// Background-suppression transform: same contract with the region features
/// and the Gaussian-weighted region features as (base, target).
pub fn solve_suppression_transform<T: Real>(
    f_region: &FeatureMap<T>,
    f_weighted_region: &FeatureMap<T>,
    lambda_w: T,
) -> Result<FeatureMap<T>> {
    ridge_deconvolve(
        f_region,
        f_weighted_region,
        lambda_w,
        "suppression transform",
    )
}

/// Apply a filter's per-bin gain magnitudes to a map (zero-phase
/// filtering): peaks cannot shift, only spectral emphasis changes.
pub fn zero_phase_filter<T: Real>(
    filter: &FeatureMap<T>,
    x: &FeatureMap<T>,
) -> Result<FeatureMap<T>> {
    if !filter.same_shape(x) {
        return Err(Error::ShapeMismatch {
            expected: filter.shape_str(),
            got: x.shape_str(),
        });
    }
    let (h, w) = (x.height, x.width);
    let mut data = Vec::with_capacity(h * w * x.channels);
    for c in 0..x.channels {
        let ff = fft2(filter.plane(c), h, w);
        let fx = fft2(x.plane(c), h, w);
        let prod: Vec<Complex<T>> = ff.iter().zip(&fx).map(|(g, v)| v * g.norm()).collect();
        data.extend(ifft2_real(&prod, h, w));
    }
    Ok(FeatureMap::from_planes(h, w, x.channels, data))
}

/// Cross-correlation of a template against a search region, summed over
/// channels. Computed circularly at search resolution with the template
/// zero-padded; the output has the search region's spatial shape.
pub fn correlate<T: Real>(
    template: &FeatureMap<T>,
    search: &FeatureMap<T>,
) -> Result<ResponseMap<T>> {
    if template.channels != search.channels {
        return Err(Error::ShapeMismatch {
            expected: format!("{} channels", template.channels),
            got: format!("{} channels", search.channels),
        });
    }
    if template.height > search.height || template.width > search.width {
        return Err(Error::ShapeMismatch {
            expected: format!("template within {}", search.shape_str()),
            got: template.shape_str(),
        });
    }
    let (h, w) = (search.height, search.width);
    let mut acc = vec![Complex::new(T::zero(), T::zero()); h * w];
    let mut padded = vec![T::zero(); h * w];
    for c in 0..template.channels {
        for v in padded.iter_mut() {
            *v = T::zero();
        }
        let tp = template.plane(c);
        for y in 0..template.height {
            padded[y * w..y * w + template.width]
                .copy_from_slice(&tp[y * template.width..(y + 1) * template.width]);
        }
        let ft = fft2(&padded, h, w);
        let fs = fft2(search.plane(c), h, w);
        for (a, (t, s)) in acc.iter_mut().zip(ft.iter().zip(&fs)) {
            *a += t.conj() * s;
        }
    }
    let values = ifft2_real(&acc, h, w);
    Ok(ResponseMap::new(h, w, values))
}
