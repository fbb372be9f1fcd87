//! Temporal discrete Fourier transform of feature volumes.
//!
//! Transforms run along axis 0 of a tensor, independently for every
//! trailing position. Lengths that are powers of two use an iterative
//! radix-2 Cooley-Tukey kernel; every other length goes through Bluestein's
//! chirp-z reformulation on top of the same kernel. The forward transform is
//! unnormalized: `X_k = sum_t x_t exp(-2 pi i k t / T)`.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::tensor::{ComplexTensor, Tensor};

/// Precomputed transform for one length.
#[derive(Clone, Debug)]
pub struct TemporalFft {
    len: usize,
    kind: PlanKind,
}

#[derive(Clone, Debug)]
enum PlanKind {
    Radix2(Radix2),
    Bluestein(Box<Bluestein>),
}

#[derive(Clone, Debug)]
struct Radix2 {
    /// `exp(-2 pi i k / n)` for `k < n / 2`.
    twiddles: Vec<Complex64>,
    bit_reverse: Vec<usize>,
}

impl Radix2 {
    fn new(n: usize) -> Self {
        debug_assert!(n.is_power_of_two());
        let bits = n.trailing_zeros();
        let bit_reverse = (0..n)
            .map(|i| {
                if bits == 0 {
                    0
                } else {
                    i.reverse_bits() >> (usize::BITS - bits)
                }
            })
            .collect();
        let twiddles = (0..n / 2)
            .map(|k| Complex64::from_polar(1.0, -2.0 * PI * k as f64 / n as f64))
            .collect();
        Radix2 { twiddles, bit_reverse }
    }

    fn forward(&self, buf: &mut [Complex64]) {
        let n = buf.len();
        for i in 0..n {
            let j = self.bit_reverse[i];
            if i < j {
                buf.swap(i, j);
            }
        }
        let mut half = 1;
        while half < n {
            let step = n / (2 * half);
            for start in (0..n).step_by(2 * half) {
                for k in 0..half {
                    let w = self.twiddles[k * step];
                    let a = buf[start + k];
                    let b = buf[start + k + half] * w;
                    buf[start + k] = a + b;
                    buf[start + k + half] = a - b;
                }
            }
            half *= 2;
        }
    }
}

#[derive(Clone, Debug)]
struct Bluestein {
    inner: Radix2,
    /// `exp(-pi i n^2 / N)` for `n < N`.
    chirp: Vec<Complex64>,
    /// Forward transform of the conjugate chirp filter, pre-divided by the
    /// inner length so the inverse needs no extra scaling.
    filter_spectrum: Vec<Complex64>,
}

impl Bluestein {
    fn new(n: usize) -> Self {
        let m = (2 * n - 1).next_power_of_two();
        let inner = Radix2::new(m);
        // n^2 mod 2N keeps the phase argument small and exact.
        let chirp: Vec<Complex64> = (0..n)
            .map(|i| {
                let r = (i * i) % (2 * n);
                Complex64::from_polar(1.0, -PI * r as f64 / n as f64)
            })
            .collect();
        let mut filter = vec![Complex64::new(0.0, 0.0); m];
        filter[0] = chirp[0].conj();
        for i in 1..n {
            filter[i] = chirp[i].conj();
            filter[m - i] = chirp[i].conj();
        }
        inner.forward(&mut filter);
        let scale = 1.0 / m as f64;
        filter.iter_mut().for_each(|z| *z *= scale);
        Bluestein {
            inner,
            chirp,
            filter_spectrum: filter,
        }
    }

    fn forward(&self, buf: &mut [Complex64]) {
        let n = buf.len();
        let m = self.filter_spectrum.len();
        let mut work = vec![Complex64::new(0.0, 0.0); m];
        for i in 0..n {
            work[i] = buf[i] * self.chirp[i];
        }
        self.inner.forward(&mut work);
        for (w, f) in work.iter_mut().zip(&self.filter_spectrum) {
            *w = (*w * f).conj();
        }
        // inverse via conj(FFT(conj(.)))
        self.inner.forward(&mut work);
        for i in 0..n {
            buf[i] = work[i].conj() * self.chirp[i];
        }
    }
}

impl TemporalFft {
    pub fn new(len: usize) -> Result<Self> {
        if len == 0 {
            return Err(Error::arg("transform length must be at least 1"));
        }
        let kind = if len.is_power_of_two() {
            PlanKind::Radix2(Radix2::new(len))
        } else {
            PlanKind::Bluestein(Box::new(Bluestein::new(len)))
        };
        Ok(TemporalFft { len, kind })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn is_radix2(&self) -> bool {
        matches!(self.kind, PlanKind::Radix2(_))
    }

    /// In-place unnormalized forward transform.
    pub fn forward(&self, buf: &mut [Complex64]) {
        assert_eq!(buf.len(), self.len, "buffer length does not match plan");
        match &self.kind {
            PlanKind::Radix2(r) => r.forward(buf),
            PlanKind::Bluestein(b) => b.forward(buf),
        }
    }

    /// In-place unnormalized inverse: `x_t = sum_k X_k exp(+2 pi i k t / T)`.
    pub fn inverse(&self, buf: &mut [Complex64]) {
        buf.iter_mut().for_each(|z| *z = z.conj());
        self.forward(buf);
        buf.iter_mut().for_each(|z| *z = z.conj());
    }
}

/// Temporal spectrum `[T, ...]` of a real feature volume.
#[derive(Clone, Debug, PartialEq)]
pub struct Spectrum {
    pub bins: ComplexTensor,
}

impl Spectrum {
    pub fn frames(&self) -> usize {
        self.bins.dims()[0]
    }
}

/// Applies `f` to every axis-0 column of a `[T, ...]` buffer.
fn for_each_column(frames: usize, inner: usize, data: &mut [Complex64], mut f: impl FnMut(&mut [Complex64])) {
    let mut column = vec![Complex64::new(0.0, 0.0); frames];
    for pos in 0..inner {
        for (t, z) in column.iter_mut().enumerate() {
            *z = data[t * inner + pos];
        }
        f(&mut column);
        for (t, z) in column.iter().enumerate() {
            data[t * inner + pos] = *z;
        }
    }
}

fn split_time(dims: &[usize]) -> Result<(usize, usize)> {
    let (&frames, rest) = dims
        .split_first()
        .ok_or_else(|| Error::arg("temporal transform needs a time axis"))?;
    Ok((frames, rest.iter().product()))
}

/// Unnormalized DFT along axis 0.
pub fn temporal_dft(x: &Tensor) -> Result<Spectrum> {
    let (frames, inner) = split_time(x.dims())?;
    let plan = TemporalFft::new(frames)?;
    let mut data = ComplexTensor::from_real(x).data().to_vec();
    for_each_column(frames, inner, &mut data, |col| plan.forward(col));
    Ok(Spectrum {
        bins: ComplexTensor::new(x.dims(), data)?,
    })
}

/// Squared magnitude of every bin.
pub fn power(spectrum: &Spectrum) -> Tensor {
    spectrum.bins.norm_sqr()
}

/// `|DFT_t(x)|^2`, shaped like `x`.
pub fn temporal_power(x: &Tensor) -> Result<Tensor> {
    Ok(power(&temporal_dft(x)?))
}

/// Gradient of `sum(grad * |DFT_t(x)|^2)` with respect to `x`, given the
/// forward spectrum: `2 Re(IDFT(grad * X))`.
pub(crate) fn temporal_power_adjoint(spectrum: &Spectrum, grad: &Tensor) -> Result<Tensor> {
    let dims = spectrum.bins.dims().to_vec();
    let (frames, inner) = split_time(&dims)?;
    let plan = TemporalFft::new(frames)?;
    let mut data: Vec<Complex64> = spectrum
        .bins
        .data()
        .iter()
        .zip(grad.data())
        .map(|(z, g)| z * g)
        .collect();
    for_each_column(frames, inner, &mut data, |col| plan.inverse(col));
    Tensor::new(&dims, data.iter().map(|z| 2.0 * z.re).collect())
}

/// Magnitude of the signed DFT frequency of each bin, in cycles per frame.
#[derive(Clone, Debug, PartialEq)]
pub struct FrequencyVector(Vec<f64>);

impl FrequencyVector {
    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Per-bin weights `g(f_k)` as a `[T, 1, 1, 1]` tensor that broadcasts
    /// over `[T, C, H, W]` volumes.
    pub fn weights(&self, g: impl Fn(f64) -> f64) -> Tensor {
        Tensor::new(&[self.0.len(), 1, 1, 1], self.0.iter().map(|&f| g(f)).collect())
            .expect("frequency vector is non-empty")
    }
}

/// `f_k = min(k, T - k) / T`.
pub fn frequency_vector(frames: usize) -> Result<FrequencyVector> {
    if frames == 0 {
        return Err(Error::arg("frequency vector needs T >= 1"));
    }
    Ok(FrequencyVector(
        (0..frames).map(|k| k.min(frames - k) as f64 / frames as f64).collect(),
    ))
}
