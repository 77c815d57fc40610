//! Uniformly sampled traces, discrete Fourier transforms and peak picking.
//!
//! Spectra are one-sided: bin `k` covers frequency `k * df` for
//! `k = 0..=n_padded/2`. Bin values are `X_k / n_padded` with
//! `X_k = sum_n x_n exp(-2 pi i k n / n_padded)`, so a cosine of amplitude `A`
//! between bins shows up as roughly `A/2`.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::linalg::ZERO;

/// Minimum number of samples a trace must carry.
pub const MIN_SAMPLES: usize = 8;
/// Default zero-padding factor for figure-style spectra.
pub const DEFAULT_PAD: usize = 4;

/// Real signal sampled every `dt` microseconds starting at `t = 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeTrace {
    dt: f64,
    samples: Vec<f64>,
    /// Free-form key/value provenance carried into exported headers.
    pub meta: Vec<(String, String)>,
}

impl TimeTrace {
    pub fn new(dt: f64, samples: Vec<f64>) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::invalid("trace sample spacing must be positive"));
        }
        if samples.len() < MIN_SAMPLES {
            return Err(Error::invalid("a trace needs at least 8 samples"));
        }
        if samples.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("trace samples must be finite"));
        }
        Ok(Self { dt, samples, meta: Vec::new() })
    }

    pub fn with_meta(mut self, key: impl Into<String>, value: impl Into<String>) -> Self {
        self.meta.push((key.into(), value.into()));
        self
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.samples.len()).map(|k| k as f64 * self.dt).collect()
    }

    pub fn duration(&self) -> f64 {
        (self.samples.len() - 1) as f64 * self.dt
    }

    pub fn mean(&self) -> f64 {
        self.samples.iter().sum::<f64>() / self.samples.len() as f64
    }

    /// Root-mean-square difference to another trace on the same grid.
    pub fn rms_difference(&self, other: &TimeTrace) -> Result<f64> {
        if self.samples.len() != other.samples.len() || (self.dt - other.dt).abs() > 1e-12 * self.dt {
            return Err(Error::invalid("traces are on different time grids"));
        }
        let s: f64 = self.samples.iter().zip(&other.samples).map(|(a, b)| (a - b) * (a - b)).sum();
        Ok(libm::sqrt(s / self.samples.len() as f64))
    }

    pub fn peak_to_peak(&self) -> f64 {
        let (lo, hi) = self
            .samples
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
        hi - lo
    }
}

/// Arithmetic mean of traces sharing one time grid.
pub fn mean_trace(traces: &[TimeTrace]) -> Result<TimeTrace> {
    let first = traces.first().ok_or_else(|| Error::invalid("no traces to average"))?;
    let n = first.len();
    let mut acc = vec![0.0; n];
    for t in traces {
        if t.len() != n || (t.dt - first.dt).abs() > 1e-12 * first.dt {
            return Err(Error::invalid("traces are on different time grids"));
        }
        for (a, x) in acc.iter_mut().zip(&t.samples) {
            *a += x;
        }
    }
    let m = traces.len() as f64;
    acc.iter_mut().for_each(|a| *a /= m);
    let mut out = TimeTrace::new(first.dt, acc)?;
    out.meta = first.meta.clone();
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Window {
    #[default]
    None,
    Hann,
}

/// One-sided spectrum of a real trace.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectrumData {
    /// Bin width in axis units (MHz unless the axis was normalized).
    pub df: f64,
    /// Magnitude per bin, `|X_k| / n_padded`.
    pub amplitudes: Vec<f64>,
    /// Phase per bin, radians.
    pub phase: Vec<f64>,
    /// Length of the transformed (windowed, zero-padded) sequence.
    pub n_padded: usize,
    /// Number of original samples.
    pub n_samples: usize,
    /// Divisor applied to MHz frequencies to obtain the axis; 1 for MHz.
    pub axis_scale: f64,
}

impl SpectrumData {
    pub fn len(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amplitudes.is_empty()
    }

    pub fn frequencies(&self) -> Vec<f64> {
        (0..self.amplitudes.len()).map(|k| k as f64 * self.df).collect()
    }

    /// Complex bin value `X_k / n_padded`.
    pub fn bin(&self, k: usize) -> C64 {
        C64::from_polar(self.amplitudes[k], self.phase[k])
    }

    /// Bin width in MHz regardless of axis normalization.
    pub fn df_mhz(&self) -> f64 {
        self.df * self.axis_scale
    }

    /// Width in MHz of one bin of the unpadded transform.
    pub fn unpadded_df_mhz(&self) -> f64 {
        self.df_mhz() * self.n_padded as f64 / self.n_samples as f64
    }

    /// Signal energy recovered from the spectrum, `sum |x_n|^2` over the
    /// transformed sequence (Parseval).
    pub fn parseval_energy(&self) -> f64 {
        let n = self.n_padded;
        let half = n / 2;
        let mut s = 0.0;
        for (k, a) in self.amplitudes.iter().enumerate() {
            let w = if k == 0 || (n.is_multiple_of(2) && k == half) { 1.0 } else { 2.0 };
            s += w * a * a;
        }
        s * n as f64
    }

    pub fn is_mhz_axis(&self) -> bool {
        self.axis_scale == 1.0
    }
}

/// In-place iterative radix-2 transform, `X_k = sum x_n e^{-2 pi i k n / N}`.
/// Panics unless the length is a power of two.
pub fn fft_radix2(data: &mut [C64]) {
    let n = data.len();
    assert!(n.is_power_of_two(), "radix-2 transform length must be a power of two");
    if n < 2 {
        return;
    }
    let bits = n.trailing_zeros();
    for i in 0..n {
        let j = i.reverse_bits() >> (usize::BITS - bits);
        if j > i {
            data.swap(i, j);
        }
    }
    let mut len = 2;
    while len <= n {
        let ang = -2.0 * PI / len as f64;
        let half = len / 2;
        // Twiddles from direct evaluation, not recurrence, to keep round-off flat.
        let tw: Vec<C64> = (0..half).map(|k| C64::from_polar(1.0, ang * k as f64)).collect();
        for start in (0..n).step_by(len) {
            for k in 0..half {
                let a = data[start + k];
                let b = data[start + k + half] * tw[k];
                data[start + k] = a + b;
                data[start + k + half] = a - b;
            }
        }
        len <<= 1;
    }
}

/// Direct O(N^2) transform with the same convention as [`fft_radix2`]; any length.
pub fn dft_direct(data: &[C64]) -> Vec<C64> {
    let n = data.len();
    (0..n)
        .map(|k| {
            let mut acc = ZERO;
            for (j, &x) in data.iter().enumerate() {
                // Reduce k*j mod n first so the angle stays small and exact.
                let m = (k * j) % n;
                acc += x * C64::from_polar(1.0, -2.0 * PI * m as f64 / n as f64);
            }
            acc
        })
        .collect()
}

/// Mean-subtracted, optionally windowed and zero-padded sequence fed to the
/// transform. The padded length is the next power of two of `n * pad`.
pub fn conditioned(trace: &TimeTrace, window: Window, zero_pad_factor: usize) -> Result<Vec<C64>> {
    if zero_pad_factor < 1 {
        return Err(Error::invalid("zero-pad factor must be at least 1"));
    }
    let n = trace.len();
    if n < MIN_SAMPLES {
        return Err(Error::invalid("a trace needs at least 8 samples"));
    }
    let mean = trace.mean();
    let n_padded = (n * zero_pad_factor).next_power_of_two();
    let mut buf = vec![ZERO; n_padded];
    for (k, (&x, b)) in trace.samples.iter().zip(buf.iter_mut()).enumerate() {
        let w = match window {
            Window::None => 1.0,
            Window::Hann => 0.5 * (1.0 - libm::cos(2.0 * PI * k as f64 / (n - 1) as f64)),
        };
        *b = C64::new((x - mean) * w, 0.0);
    }
    Ok(buf)
}

/// One-sided magnitude/phase spectrum of the conditioned trace.
pub fn dft(trace: &TimeTrace, window: Window, zero_pad_factor: usize) -> Result<SpectrumData> {
    let mut buf = conditioned(trace, window, zero_pad_factor)?;
    let n_padded = buf.len();
    fft_radix2(&mut buf);
    let bins = n_padded / 2 + 1;
    let scale = 1.0 / n_padded as f64;
    let mut amplitudes = Vec::with_capacity(bins);
    let mut phase = Vec::with_capacity(bins);
    for x in &buf[..bins] {
        let v = x * scale;
        amplitudes.push(v.norm());
        phase.push(v.arg());
    }
    Ok(SpectrumData {
        df: 1.0 / (n_padded as f64 * trace.dt),
        amplitudes,
        phase,
        n_padded,
        n_samples: trace.len(),
        axis_scale: 1.0,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Peak {
    /// Interpolated position in axis units.
    pub frequency: f64,
    /// Interpolated height.
    pub amplitude: f64,
    /// Bin of the discrete local maximum.
    pub bin: usize,
}

/// Peaks sorted by amplitude, largest first.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct PeakList {
    pub peaks: Vec<Peak>,
}

impl PeakList {
    pub fn len(&self) -> usize {
        self.peaks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.peaks.is_empty()
    }

    /// The strongest peak within `[lo, hi]` in axis units.
    pub fn strongest_in(&self, lo: f64, hi: f64) -> Option<&Peak> {
        self.peaks.iter().find(|p| p.frequency >= lo && p.frequency <= hi)
    }

    /// The peak closest to `f`.
    pub fn nearest(&self, f: f64) -> Option<&Peak> {
        self.peaks
            .iter()
            .min_by(|a, b| (a.frequency - f).abs().total_cmp(&(b.frequency - f).abs()))
    }
}

/// Strict interior local maxima above `rel_threshold * max`, positioned by
/// three-point parabolic interpolation.
pub fn find_peaks(spec: &SpectrumData, rel_threshold: f64) -> Result<PeakList> {
    if !(rel_threshold > 0.0 && rel_threshold < 1.0) {
        return Err(Error::invalid("relative threshold must lie in (0, 1)"));
    }
    let a = &spec.amplitudes;
    let max = a.iter().copied().fold(0.0, f64::max);
    if max <= 0.0 || a.len() < 3 {
        return Ok(PeakList::default());
    }
    let floor = rel_threshold * max;
    let mut peaks = Vec::new();
    for k in 1..a.len() - 1 {
        let (l, c, r) = (a[k - 1], a[k], a[k + 1]);
        if c > l && c > r && c > floor {
            let den = l - 2.0 * c + r;
            let delta = if den != 0.0 { 0.5 * (l - r) / den } else { 0.0 };
            peaks.push(Peak {
                frequency: (k as f64 + delta) * spec.df,
                amplitude: c - 0.25 * (l - r) * delta,
                bin: k,
            });
        }
    }
    peaks.sort_by(|x, y| y.amplitude.total_cmp(&x.amplitude).then(x.bin.cmp(&y.bin)));
    Ok(PeakList { peaks })
}

/// Divides the frequency axis by `omega1`; amplitudes are untouched.
pub fn normalize_axis(spec: &SpectrumData, omega1: f64) -> Result<SpectrumData> {
    if !(omega1 > 0.0 && omega1.is_finite()) {
        return Err(Error::invalid("axis normalization needs a positive omega1"));
    }
    let mut out = spec.clone();
    out.df = spec.df / omega1;
    out.axis_scale = spec.axis_scale * omega1;
    Ok(out)
}

/// Least-squares fit `offset + a cos(2 pi f t) + b sin(2 pi f t)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SineFit {
    pub frequency: f64,
    pub amplitude: f64,
    pub phase: f64,
    pub offset: f64,
    pub r_squared: f64,
}

fn fit_at(trace: &TimeTrace, f: f64) -> SineFit {
    // Normal equations for the three basis functions 1, cos, sin.
    let mut m = [[0.0f64; 3]; 3];
    let mut rhs = [0.0f64; 3];
    for (k, &y) in trace.samples.iter().enumerate() {
        let w = 2.0 * PI * f * k as f64 * trace.dt;
        let basis = [1.0, libm::cos(w), libm::sin(w)];
        for i in 0..3 {
            rhs[i] += basis[i] * y;
            for j in 0..3 {
                m[i][j] += basis[i] * basis[j];
            }
        }
    }
    let coef = solve3(m, rhs).unwrap_or([trace.mean(), 0.0, 0.0]);
    let mean = trace.mean();
    let (mut ss_res, mut ss_tot) = (0.0, 0.0);
    for (k, &y) in trace.samples.iter().enumerate() {
        let w = 2.0 * PI * f * k as f64 * trace.dt;
        let model = coef[0] + coef[1] * libm::cos(w) + coef[2] * libm::sin(w);
        ss_res += (y - model) * (y - model);
        ss_tot += (y - mean) * (y - mean);
    }
    SineFit {
        frequency: f,
        amplitude: libm::hypot(coef[1], coef[2]),
        phase: libm::atan2(-coef[2], coef[1]),
        offset: coef[0],
        r_squared: if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 },
    }
}

fn solve3(mut m: [[f64; 3]; 3], mut b: [f64; 3]) -> Option<[f64; 3]> {
    for c in 0..3 {
        let p = (c..3).max_by(|&i, &j| m[i][c].abs().total_cmp(&m[j][c].abs()))?;
        if m[p][c].abs() < 1e-300 {
            return None;
        }
        m.swap(c, p);
        b.swap(c, p);
        for r in 0..3 {
            if r != c {
                let f = m[r][c] / m[c][c];
                for k in c..3 {
                    m[r][k] -= f * m[c][k];
                }
                b[r] -= f * b[c];
            }
        }
    }
    Some([b[0] / m[0][0], b[1] / m[1][1], b[2] / m[2][2]])
}

/// Best single-sinusoid fit with the frequency optimized by golden-section
/// search over `[f_guess - half_width, f_guess + half_width]`.
pub fn fit_sinusoid(trace: &TimeTrace, f_guess: f64, half_width: f64) -> Result<SineFit> {
    if !(f_guess > 0.0) || !(half_width >= 0.0) {
        return Err(Error::invalid("sinusoid fit needs a positive frequency guess"));
    }
    let lo = (f_guess - half_width).max(1e-9);
    let hi = f_guess + half_width;
    let f = crate::spectra::golden_section_min(|f| -fit_at(trace, f).r_squared, lo, hi, 1e-9 * f_guess);
    Ok(fit_at(trace, f))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tone(f: f64, dt: f64, n: usize) -> TimeTrace {
        TimeTrace::new(dt, (0..n).map(|k| libm::cos(2.0 * PI * f * k as f64 * dt)).collect()).unwrap()
    }

    #[test]
    fn short_traces_rejected() {
        assert!(TimeTrace::new(0.1, vec![0.0; 7]).is_err());
        assert!(TimeTrace::new(0.0, vec![0.0; 8]).is_err());
    }

    #[test]
    fn radix2_matches_direct() {
        let x: Vec<C64> = (0..64).map(|k| C64::new(libm::sin(k as f64 * 0.3), libm::cos(k as f64 * 1.7))).collect();
        let mut y = x.clone();
        fft_radix2(&mut y);
        let z = dft_direct(&x);
        for (a, b) in y.iter().zip(&z) {
            assert!((a - b).norm() < 1e-10);
        }
    }

    #[test]
    fn pure_tone_single_peak() {
        let s = dft(&tone(1.0, 0.05, 512), Window::None, 1).unwrap();
        let p = find_peaks(&s, 0.5).unwrap();
        assert_eq!(p.len(), 1);
        assert!((p.peaks[0].frequency - 1.0).abs() < s.df);
    }

    #[test]
    fn constant_trace_has_zero_spectrum() {
        let s = dft(&TimeTrace::new(0.1, vec![0.7; 64]).unwrap(), Window::Hann, 4).unwrap();
        assert!(s.amplitudes.iter().all(|&a| a < 1e-15));
        assert!(find_peaks(&s, 0.2).unwrap().is_empty());
    }

    #[test]
    fn normalize_round_trip() {
        let s = dft(&tone(1.0, 0.05, 64), Window::None, 1).unwrap();
        let n = normalize_axis(&normalize_axis(&s, 3.62).unwrap(), 1.0 / 3.62).unwrap();
        assert!((n.df - s.df).abs() < 1e-12 * s.df);
        assert!(normalize_axis(&s, 0.0).is_err());
    }

    #[test]
    fn fit_recovers_tone() {
        let t = TimeTrace::new(0.01, (0..800).map(|k| 0.3 + 0.5 * libm::cos(2.0 * PI * 0.83 * k as f64 * 0.01 + 0.4)).collect()).unwrap();
        let f = fit_sinusoid(&t, 0.8, 0.1).unwrap();
        assert!((f.frequency - 0.83).abs() < 1e-6);
        assert!((f.amplitude - 0.5).abs() < 1e-6);
        assert!((f.offset - 0.3).abs() < 1e-6);
        assert!((f.phase - 0.4).abs() < 1e-6);
        assert!(f.r_squared > 1.0 - 1e-9);
    }
}
