//! Power-of-two FFT and real-signal circular convolution.

use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;

/// Iterative radix-2 complex FFT of a fixed length.
#[derive(Debug, Clone)]
pub struct FftPlan {
    n: usize,
    twiddles: Vec<Complex64>,
    bitrev: Vec<u32>,
}

impl FftPlan {
    pub fn new(n: usize) -> Self {
        assert!(n.is_power_of_two() && n >= 2, "FFT length must be a power of two");
        let bits = n.trailing_zeros();
        let twiddles = (0..n / 2)
            .map(|j| {
                let a = -2.0 * PI * j as f64 / n as f64;
                Complex64::new(libm::cos(a), libm::sin(a))
            })
            .collect();
        let bitrev = (0..n as u32).map(|i| i.reverse_bits() >> (32 - bits)).collect();
        Self { n, twiddles, bitrev }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Unnormalized forward transform, `X_k = sum_j x_j exp(-2 pi i jk/n)`.
    pub fn forward(&self, buf: &mut [Complex64]) {
        assert_eq!(buf.len(), self.n);
        for i in 0..self.n {
            let j = self.bitrev[i] as usize;
            if i < j {
                buf.swap(i, j);
            }
        }
        let mut len = 2;
        while len <= self.n {
            let half = len / 2;
            let stride = self.n / len;
            for chunk in buf.chunks_exact_mut(len) {
                let (lo, hi) = chunk.split_at_mut(half);
                for k in 0..half {
                    let t = hi[k] * self.twiddles[k * stride];
                    hi[k] = lo[k] - t;
                    lo[k] += t;
                }
            }
            len *= 2;
        }
    }

    /// Unnormalized inverse transform (forward with conjugated twiddles).
    pub fn inverse(&self, buf: &mut [Complex64]) {
        for z in buf.iter_mut() {
            *z = z.conj();
        }
        self.forward(buf);
        for z in buf.iter_mut() {
            *z = z.conj();
        }
    }
}

/// Circular convolution of real sequences of length `n` (a power of two >= 4)
/// against a fixed real filter, using a half-length complex transform.
#[derive(Debug, Clone)]
pub struct RealConvolver {
    n: usize,
    half: FftPlan,
    /// `exp(-2 pi i k / n)` for `k = 0..n/2`.
    rotation: Vec<Complex64>,
    /// Spectrum of the filter for `k = 0..=n/2`, pre-scaled by `2/n`.
    filter: Vec<Complex64>,
}

/// Scratch space for [`RealConvolver`]; one per concurrent caller.
#[derive(Debug, Clone, Default)]
pub struct ConvWorkspace {
    packed: Vec<Complex64>,
    spectrum: Vec<Complex64>,
}

impl RealConvolver {
    /// `filter[j]` is the tap applied at circular lag `j`.
    pub fn new(n: usize, filter: &[f64]) -> Self {
        assert!(n.is_power_of_two() && n >= 4);
        assert!(filter.len() <= n);
        let half = FftPlan::new(n / 2);
        let rotation = (0..n / 2)
            .map(|k| {
                let a = -2.0 * PI * k as f64 / n as f64;
                Complex64::new(libm::cos(a), libm::sin(a))
            })
            .collect();
        let mut this = Self { n, half, rotation, filter: Vec::new() };
        let mut padded = alloc::vec![0.0; n];
        padded[..filter.len()].copy_from_slice(filter);
        let mut ws = ConvWorkspace::default();
        this.real_forward(&padded, &mut ws);
        let scale = 2.0 / n as f64;
        this.filter = ws.spectrum.iter().map(|z| z * scale).collect();
        this
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Leaves the spectrum `X_0..=X_{n/2}` of the real `signal` in `ws.spectrum`.
    fn real_forward(&self, signal: &[f64], ws: &mut ConvWorkspace) {
        let m = self.n / 2;
        ws.packed.clear();
        ws.packed.extend((0..m).map(|k| {
            let re = signal.get(2 * k).copied().unwrap_or(0.0);
            let im = signal.get(2 * k + 1).copied().unwrap_or(0.0);
            Complex64::new(re, im)
        }));
        self.half.forward(&mut ws.packed);
        ws.spectrum.clear();
        ws.spectrum.reserve(m + 1);
        for k in 0..=m {
            let zk = ws.packed[k % m];
            let zc = ws.packed[(m - k) % m].conj();
            let even = (zk + zc) * 0.5;
            let odd = (zk - zc) * Complex64::new(0.0, -0.5);
            let rot = if k < m { self.rotation[k] } else { Complex64::new(-1.0, 0.0) };
            ws.spectrum.push(even + rot * odd);
        }
    }

    /// Circular convolution of `signal` (zero-padded to `n`) with the filter;
    /// writes `out.len()` leading samples, scaled so `out = filter (*) signal`.
    pub fn convolve(&self, signal: &[f64], out: &mut [f64], ws: &mut ConvWorkspace) {
        let m = self.n / 2;
        self.real_forward(signal, ws);
        for (x, f) in ws.spectrum.iter_mut().zip(&self.filter) {
            *x *= f;
        }
        // repack into a half-length spectrum and invert
        for k in 0..m {
            let xk = ws.spectrum[k];
            let xc = ws.spectrum[m - k].conj();
            let even = (xk + xc) * 0.5;
            let odd = (xk - xc) * 0.5 * self.rotation[k].conj();
            ws.packed[k] = even + Complex64::new(0.0, 1.0) * odd;
        }
        self.half.inverse(&mut ws.packed);
        for (i, o) in out.iter_mut().enumerate() {
            let z = ws.packed[i / 2];
            *o = if i % 2 == 0 { z.re } else { z.im };
        }
    }
}
