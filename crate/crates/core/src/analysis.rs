//! Measurement oracles. Nothing here calls into `pitchdyn` or `bandcomp`;
//! tests use these estimators to check those modules from the outside.

use std::ops::Range;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use crate::domain::{AudioBuffer, F0Contour};
use crate::error::{Error, Result};

/// Reported level for a band with no measurable energy.
pub const ENERGY_FLOOR_DB: f64 = -120.0;
/// Slowest vibrato the estimator is asked to resolve; spans must hold two
/// of its periods.
pub const MIN_VIBRATO_RATE_HZ: f64 = 3.0;
/// Normalised autocorrelation a peak must reach to count as periodic.
pub const PERIODICITY_THRESHOLD: f64 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VibratoEstimate {
    pub rate_hz: f64,
    pub depth_cents: f64,
    pub frames_analyzed: usize,
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Unbiased autocorrelation normalised by lag 0, for lags `0..max_lag`.
fn autocorrelation(x: &[f64], max_lag: usize) -> Vec<f64> {
    let n = x.len();
    let r0 = x.iter().map(|v| v * v).sum::<f64>() / n as f64;
    (0..max_lag)
        .map(|k| {
            let s: f64 = x[..n - k].iter().zip(&x[k..]).map(|(a, b)| a * b).sum();
            s / (n - k) as f64 / r0
        })
        .collect()
}

/// Dominant period in frames, or `None` when nothing periodic stands out.
fn dominant_lag(dev: &[f64], max_lag: usize) -> Option<f64> {
    let r = autocorrelation(dev, max_lag);
    // Skip the main lobe around lag 0.
    let first_negative = r.iter().position(|&v| v < 0.0)?;
    let peaks: Vec<usize> = (first_negative.max(1)..r.len() - 1)
        .filter(|&k| r[k] >= r[k - 1] && r[k] > r[k + 1])
        .collect();
    let best = peaks.iter().map(|&k| r[k]).fold(f64::MIN, f64::max);
    if best < PERIODICITY_THRESHOLD {
        return None;
    }
    // Multiples of the period peak about as high as the period itself;
    // take the shortest lag that comes close to the best.
    let peak = *peaks.iter().find(|&&k| r[k] >= 0.9 * best)?;
    let (a, b, c) = (r[peak - 1], r[peak], r[peak + 1]);
    let curvature = a - 2.0 * b + c;
    let offset = if curvature < 0.0 {
        0.5 * (a - c) / curvature
    } else {
        0.0
    };
    Some(peak as f64 + offset)
}

/// Rate and depth of the periodic pitch modulation over `span`.
///
/// The contour is expressed in cents around its median. The rate is taken
/// from the autocorrelation peak; the depth is half the peak-to-peak range
/// after a 3-point moving average, divided by that average's gain at the
/// measured rate so smoothing does not bias the depth low.
pub fn estimate_vibrato(f0: &F0Contour, span: Range<usize>) -> Result<VibratoEstimate> {
    if span.start >= span.end || span.end > f0.len() {
        return Err(Error::invalid(format!(
            "span {}..{} is empty or exceeds the contour's {} frames",
            span.start,
            span.end,
            f0.len()
        )));
    }
    let frame_rate = f0.grid().frame_rate();
    let min_frames = (2.0 * frame_rate / MIN_VIBRATO_RATE_HZ).ceil() as usize;
    let n = span.len();
    if n < min_frames {
        return Err(Error::invalid(format!(
            "span of {n} frames is too short; need at least {min_frames} \
             (two periods at {MIN_VIBRATO_RATE_HZ} Hz)"
        )));
    }
    if let Some(i) = span.clone().find(|&i| !f0.voiced()[i]) {
        return Err(Error::invalid(format!(
            "frame {i} in span {}..{} is unvoiced",
            span.start, span.end
        )));
    }
    let hz = &f0.values()[span];
    let base = median(hz);
    let dev: Vec<f64> = hz.iter().map(|f| 1200.0 * (f / base).log2()).collect();

    let smoothed: Vec<f64> = dev.windows(3).map(|w| (w[0] + w[1] + w[2]) / 3.0).collect();
    let max = smoothed.iter().cloned().fold(f64::MIN, f64::max);
    let min = smoothed.iter().cloned().fold(f64::MAX, f64::min);
    let raw_depth = ((max - min) / 2.0).max(0.0);
    if raw_depth == 0.0 {
        return Ok(VibratoEstimate {
            rate_hz: 0.0,
            depth_cents: 0.0,
            frames_analyzed: n,
        });
    }

    // Lags up to two thirds of the span keep at least n/3 products per lag.
    let rate_hz = dominant_lag(&dev, (2 * n / 3).max(3)).map_or(0.0, |lag| frame_rate / lag);
    let gain = if rate_hz > 0.0 {
        (1.0 + 2.0 * (2.0 * std::f64::consts::PI * rate_hz / frame_rate).cos()) / 3.0
    } else {
        1.0
    };
    // Near the smoother's null the correction would blow up; report the
    // raw figure there instead.
    let depth_cents = if gain > 0.5 {
        raw_depth / gain
    } else {
        raw_depth
    };
    Ok(VibratoEstimate {
        rate_hz,
        depth_cents,
        frames_analyzed: n,
    })
}

/// Energy in `[lo_hz, hi_hz)` in dB, from a Hann-windowed FFT of the whole
/// buffer. The scaling makes the sum over all bins equal the buffer's
/// sample energy `sum x^2` for stationary signals, so disjoint bands add.
/// A band ending at Nyquist includes the Nyquist bin.
pub fn band_energy_db(x: &AudioBuffer, lo_hz: f64, hi_hz: f64) -> Result<f64> {
    let nyquist = x.sample_rate() as f64 / 2.0;
    if !(lo_hz >= 0.0 && lo_hz < hi_hz && hi_hz <= nyquist) {
        return Err(Error::invalid(format!(
            "band [{lo_hz}, {hi_hz}) must satisfy 0 <= lo < hi <= {nyquist}"
        )));
    }
    let n = x.len();
    if n == 0 {
        return Ok(ENERGY_FLOOR_DB);
    }
    let window: Vec<f64> = (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos())
        .collect();
    let mean_sq = window.iter().map(|w| w * w).sum::<f64>() / n as f64;
    if mean_sq == 0.0 {
        // A single-sample buffer: the periodic Hann window is all zero.
        return Ok(ENERGY_FLOOR_DB);
    }
    let mut spec: Vec<Complex64> = x
        .samples()
        .iter()
        .zip(&window)
        .map(|(s, w)| Complex64::new(s * w, 0.0))
        .collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut spec);

    let bin_hz = x.sample_rate() as f64 / n as f64;
    let scale = 1.0 / (n as f64 * mean_sq);
    let mut energy = 0.0;
    for (k, c) in spec.iter().enumerate().take(n / 2 + 1) {
        let f = k as f64 * bin_hz;
        let in_band = f >= lo_hz && (f < hi_hz || (hi_hz == nyquist && f <= nyquist));
        if !in_band {
            continue;
        }
        // Positive-frequency bins stand in for their negative mirror.
        let mirrored = k != 0 && 2 * k != n;
        let weight = if mirrored { 2.0 } else { 1.0 };
        energy += weight * c.norm_sqr() * scale;
    }
    Ok(if energy > 0.0 {
        (10.0 * energy.log10()).max(ENERGY_FLOOR_DB)
    } else {
        ENERGY_FLOOR_DB
    })
}
