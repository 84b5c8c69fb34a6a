//! Spectral summary of an output trajectory.
//!
//! Transform convention, used everywhere in the crate: for a series
//! `y(0..N)` the coefficients are
//!
//! ```text
//! C_k = (1/N) * sum_t y(t) * exp(+2*pi*i*k*t/N),   k = 0..=N/2
//! ```
//!
//! so that `y(t) = sum_k C_k exp(-i*k*w0*t)` with `w0 = 2*pi/N`. `C_0` is the
//! signal mean, a unit cosine on the grid has `C = 0.5` and a unit sine has
//! `C = +0.5i`. Bin `k` sits at `k / (N * dt)` Hz.

use std::fmt;

use rustfft::{num_complex::Complex, FftPlanner};

use crate::error::{Error, Result};

/// Number of slots in a [`SummaryVector`].
pub const SUMMARY_LEN: usize = 12;

/// Relative tolerance (against the largest coefficient magnitude) under which
/// two candidate extrema are treated as tied; ties go to the lowest frequency.
const TIE_REL_TOL: f64 = 1e-10;

/// Column names in slot order.
pub const SLOT_NAMES: [&str; SUMMARY_LEN] = [
    "re_max_val_b1",
    "re_max_freq_b1",
    "re_min_val_b1",
    "re_min_freq_b1",
    "re_max_val_b2",
    "re_max_freq_b2",
    "re_min_val_b2",
    "re_min_freq_b2",
    "im_min_val_b1",
    "im_min_freq_b1",
    "im_max_val_b2",
    "im_max_freq_b2",
];

#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    values: Vec<f64>,
    dt: f64,
}

impl TimeSeries {
    pub fn new(values: Vec<f64>, dt: f64) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::invalid(format!(
                "time series needs at least 2 samples, got {}",
                values.len()
            )));
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::invalid(format!("sampling interval must be > 0, got {dt}")));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("non-finite sample at index {i}")));
        }
        Ok(TimeSeries { values, dt })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Closed frequency interval in Hz.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrequencyBand {
    pub lo: f64,
    pub hi: f64,
}

impl FrequencyBand {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo >= 0.0 && lo <= hi && hi.is_finite()) {
            return Err(Error::InvalidBand(format!("[{lo}, {hi}]")));
        }
        Ok(FrequencyBand { lo, hi })
    }

    pub fn contains(&self, f: f64) -> bool {
        f >= self.lo && f <= self.hi
    }
}

impl fmt::Display for FrequencyBand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}] Hz", self.lo, self.hi)
    }
}

/// The low-frequency and high-frequency bands the summary inspects.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandPair {
    pub low: FrequencyBand,
    pub high: FrequencyBand,
}

impl Default for BandPair {
    fn default() -> Self {
        BandPair {
            low: FrequencyBand { lo: 0.0, hi: 1.59 },
            high: FrequencyBand { lo: 1.71, hi: 5.98 },
        }
    }
}

/// One-sided spectrum, `freqs[k] = k / (N dt)` for `k = 0..=N/2`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumSlice {
    pub freqs: Vec<f64>,
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

impl SpectrumSlice {
    pub fn len(&self) -> usize {
        self.freqs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.freqs.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SummaryVector(pub [f64; SUMMARY_LEN]);

impl SummaryVector {
    pub fn entries(&self) -> &[f64; SUMMARY_LEN] {
        &self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&v| v == 0.0)
    }
}

pub fn dft(ts: &TimeSeries) -> SpectrumSlice {
    let n = ts.len();
    let mut buf: Vec<Complex<f64>> = ts.values().iter().map(|&v| Complex::new(v, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let half = n / 2;
    let scale = 1.0 / n as f64;
    let span = n as f64 * ts.dt();
    let mut freqs = Vec::with_capacity(half + 1);
    let mut re = Vec::with_capacity(half + 1);
    let mut im = Vec::with_capacity(half + 1);
    // The forward FFT uses exp(-i...), so C_k is its conjugate over N.
    for (k, c) in buf.iter().take(half + 1).enumerate() {
        freqs.push(k as f64 / span);
        re.push(c.re * scale);
        im.push(-c.im * scale);
    }
    SpectrumSlice { freqs, re, im }
}

#[derive(Clone, Copy)]
enum Extreme {
    Max,
    Min,
}

fn band_extreme(
    freqs: &[f64],
    vals: &[f64],
    band: &FrequencyBand,
    which: Extreme,
    tol: f64,
) -> Result<(f64, f64)> {
    let idx: Vec<usize> = (0..freqs.len()).filter(|&k| band.contains(freqs[k])).collect();
    if idx.is_empty() {
        return Err(Error::InvalidBand(format!(
            "{band} contains no grid frequency (grid step {:.6} Hz, top {:.6} Hz)",
            freqs.get(1).copied().unwrap_or(0.0),
            freqs.last().copied().unwrap_or(0.0)
        )));
    }
    let target = match which {
        Extreme::Max => idx.iter().map(|&k| vals[k]).fold(f64::NEG_INFINITY, f64::max),
        Extreme::Min => idx.iter().map(|&k| vals[k]).fold(f64::INFINITY, f64::min),
    };
    let k = idx
        .into_iter()
        .find(|&k| match which {
            Extreme::Max => vals[k] >= target - tol,
            Extreme::Min => vals[k] <= target + tol,
        })
        .expect("extreme exists in nonempty band");
    Ok((vals[k], freqs[k]))
}

fn check_bands(bands: &BandPair) -> Result<()> {
    let (a, b) = (bands.low, bands.high);
    FrequencyBand::new(a.lo, a.hi)?;
    FrequencyBand::new(b.lo, b.hi)?;
    if a.lo != 0.0 {
        return Err(Error::InvalidBand(format!("low band must start at 0 Hz, got {a}")));
    }
    if b.lo <= a.hi {
        return Err(Error::InvalidBand(format!("bands overlap: {a} and {b}")));
    }
    Ok(())
}

/// Twelve peak values and peak frequencies, laid out as in [`SLOT_NAMES`].
pub fn extract_summary(ts: &TimeSeries, bands: &BandPair) -> Result<SummaryVector> {
    check_bands(bands)?;
    let spec = dft(ts);
    summarize_spectrum(&spec, bands)
}

pub fn summarize_spectrum(spec: &SpectrumSlice, bands: &BandPair) -> Result<SummaryVector> {
    let scale = spec
        .re
        .iter()
        .zip(&spec.im)
        .map(|(r, i)| r.hypot(*i))
        .fold(0.0, f64::max);
    let tol = TIE_REL_TOL * scale;
    let f = &spec.freqs;
    let (b1, b2) = (&bands.low, &bands.high);
    let re_max_1 = band_extreme(f, &spec.re, b1, Extreme::Max, tol)?;
    let re_min_1 = band_extreme(f, &spec.re, b1, Extreme::Min, tol)?;
    let re_max_2 = band_extreme(f, &spec.re, b2, Extreme::Max, tol)?;
    let re_min_2 = band_extreme(f, &spec.re, b2, Extreme::Min, tol)?;
    let im_min_1 = band_extreme(f, &spec.im, b1, Extreme::Min, tol)?;
    let im_max_2 = band_extreme(f, &spec.im, b2, Extreme::Max, tol)?;
    Ok(SummaryVector([
        re_max_1.0, re_max_1.1, re_min_1.0, re_min_1.1, re_max_2.0, re_max_2.1, re_min_2.0,
        re_min_2.1, im_min_1.0, im_min_1.1, im_max_2.0, im_max_2.1,
    ]))
}

/// Signal built from the six retained peaks only; a fit diagnostic.
///
/// `intervals` is `T`, so the result has `T + 1` samples. Peaks that share a
/// frequency and a part (real or imaginary) are counted once.
pub fn reconstruct_from_summary(sv: &SummaryVector, intervals: usize, dt: f64) -> Result<TimeSeries> {
    if let Some(i) = sv.0.iter().position(|v| !v.is_finite()) {
        return Err(Error::invalid(format!("summary slot {} is not finite", SLOT_NAMES[i])));
    }
    let n = intervals + 1;
    let e = &sv.0;
    // (value, freq, is_real)
    let peaks = [
        (e[0], e[1], true),
        (e[2], e[3], true),
        (e[4], e[5], true),
        (e[6], e[7], true),
        (e[8], e[9], false),
        (e[10], e[11], false),
    ];
    let mut seen: Vec<(u64, bool)> = Vec::new();
    let nyquist = 1.0 / (2.0 * dt);
    let mut values = vec![0.0; n];
    for &(val, freq, real) in &peaks {
        let key = (freq.to_bits(), real);
        if seen.contains(&key) {
            continue;
        }
        seen.push(key);
        let edge = freq == 0.0 || (n.is_multiple_of(2) && (freq - nyquist).abs() <= 1e-9 * nyquist);
        let weight = if edge { 1.0 } else { 2.0 };
        for (t, y) in values.iter_mut().enumerate() {
            let theta = 2.0 * std::f64::consts::PI * freq * t as f64 * dt;
            *y += weight * val * if real { theta.cos() } else { theta.sin() };
        }
    }
    TimeSeries::new(values, dt)
}
