//! Weighted overlap-add STFT with identical analysis and synthesis windows.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Maximum relative ripple of the summed squared window.
pub const COLA_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum StftWindow {
    /// Periodic Hann for both analysis and synthesis; the squared window
    /// overlap-adds to a constant for any hop of N/4 or finer.
    #[default]
    Hann,
    /// Square-root periodic Hann; overlap-adds exactly at N/2 or finer.
    SqrtHann,
}

impl StftWindow {
    pub fn coefficients(self, size: usize) -> Vec<f64> {
        (0..size)
            .map(|n| {
                let hann = 0.5 - 0.5 * (2.0 * PI * n as f64 / size as f64).cos();
                match self {
                    StftWindow::Hann => hann,
                    StftWindow::SqrtHann => hann.sqrt(),
                }
            })
            .collect()
    }
}

/// Summed `w²` over all frame shifts, for each offset within one hop.
fn overlap_profile(window: &[f64], hop: usize) -> Vec<f64> {
    (0..hop)
        .map(|offset| window.iter().skip(offset).step_by(hop).map(|w| w * w).sum())
        .collect()
}

pub struct Stft {
    fft_size: usize,
    hop: usize,
    window: Vec<f64>,
    /// Constant overlap-add gain of the squared window.
    ola_gain: f64,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Stft {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Stft")
            .field("fft_size", &self.fft_size)
            .field("hop", &self.hop)
            .field("ola_gain", &self.ola_gain)
            .finish()
    }
}

impl Stft {
    pub fn new(fft_size: usize, hop: usize, window: StftWindow) -> Result<Self> {
        if fft_size < 4 || !fft_size.is_power_of_two() {
            return Err(Error::invalid(format!(
                "fft size must be a power of two >= 4, got {fft_size}"
            )));
        }
        if hop == 0 || hop > fft_size {
            return Err(Error::invalid(format!(
                "hop must be in 1..={fft_size}, got {hop}"
            )));
        }
        let coeffs = window.coefficients(fft_size);
        let profile = overlap_profile(&coeffs, hop);
        let max = profile.iter().cloned().fold(f64::MIN, f64::max);
        let min = profile.iter().cloned().fold(f64::MAX, f64::min);
        let mean = profile.iter().sum::<f64>() / profile.len() as f64;
        if mean <= 0.0 || (max - min) / mean > COLA_TOLERANCE {
            return Err(Error::invalid(format!(
                "{window:?} window with fft size {fft_size} and hop {hop} does not overlap-add \
                 to a constant (ripple {:.3e})",
                (max - min) / mean.max(f64::MIN_POSITIVE)
            )));
        }
        let mut planner = FftPlanner::new();
        Ok(Self {
            fft_size,
            hop,
            window: coeffs,
            ola_gain: mean,
            forward: planner.plan_fft_forward(fft_size),
            inverse: planner.plan_fft_inverse(fft_size),
        })
    }

    pub fn fft_size(&self) -> usize {
        self.fft_size
    }

    pub fn hop(&self) -> usize {
        self.hop
    }

    /// Leading zero padding; guarantees every input sample is covered by the
    /// full set of overlapping frames.
    fn pad(&self) -> usize {
        self.fft_size - self.hop
    }

    fn frame_count(&self, len: usize) -> usize {
        let padded = len + 2 * self.pad();
        if padded <= self.fft_size {
            1
        } else {
            (padded - self.fft_size).div_ceil(self.hop) + 1
        }
    }

    fn padded_len(&self, len: usize) -> usize {
        (self.frame_count(len) - 1) * self.hop + self.fft_size
    }

    /// Runs analysis, `process` on each frame's full complex spectrum, and
    /// overlap-add synthesis. Output has the input's length.
    pub fn process(&self, input: &[f64], mut process: impl FnMut(&mut [Complex64])) -> Vec<f64> {
        let pad = self.pad();
        let n = self.fft_size;
        let frames = self.frame_count(input.len());
        let mut acc = vec![0.0; self.padded_len(input.len())];
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        let mut scratch = vec![
            Complex64::new(0.0, 0.0);
            self.forward
                .get_inplace_scratch_len()
                .max(self.inverse.get_inplace_scratch_len())
        ];

        for m in 0..frames {
            let start = m * self.hop;
            for (i, slot) in buf.iter_mut().enumerate() {
                let src = (start + i).checked_sub(pad).and_then(|j| input.get(j));
                *slot = Complex64::new(src.map_or(0.0, |&x| x * self.window[i]), 0.0);
            }
            self.forward.process_with_scratch(&mut buf, &mut scratch);
            process(&mut buf);
            self.inverse.process_with_scratch(&mut buf, &mut scratch);
            for (i, c) in buf.iter().enumerate() {
                acc[start + i] += c.re * self.window[i];
            }
        }
        let scale = 1.0 / (n as f64 * self.ola_gain);
        acc[pad..pad + input.len()]
            .iter()
            .map(|v| v * scale)
            .collect()
    }

    /// Applies a real, zero-phase gain per bin. `gains` covers bins
    /// `0..=fft_size/2`; the mirrored negative-frequency bins get the same
    /// gain so the output stays real.
    pub fn filter(&self, input: &[f64], gains: &[f64]) -> Result<Vec<f64>> {
        let half = self.fft_size / 2;
        if gains.len() != half + 1 {
            return Err(Error::LengthMismatch {
                what: "bin gains vs fft_size/2 + 1",
                left: gains.len(),
                right: half + 1,
            });
        }
        let n = self.fft_size;
        Ok(self.process(input, |spec| {
            spec[0] *= gains[0];
            for k in 1..half {
                spec[k] *= gains[k];
                spec[n - k] *= gains[k];
            }
            spec[half] *= gains[half];
        }))
    }

    /// Analysis then synthesis with no modification.
    pub fn roundtrip(&self, input: &[f64]) -> Vec<f64> {
        self.process(input, |_| {})
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn snr_db(reference: &[f64], test: &[f64]) -> f64 {
        let sig: f64 = reference.iter().map(|x| x * x).sum();
        let err: f64 = reference
            .iter()
            .zip(test)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        10.0 * (sig / err.max(1e-300)).log10()
    }

    #[test]
    fn cola_checks() {
        assert!(Stft::new(2048, 512, StftWindow::Hann).is_ok());
        assert!(Stft::new(2048, 256, StftWindow::Hann).is_ok());
        assert!(Stft::new(2048, 1024, StftWindow::SqrtHann).is_ok());
        assert!(Stft::new(2048, 1024, StftWindow::Hann).is_err());
        assert!(Stft::new(2048, 700, StftWindow::Hann).is_err());
        assert!(Stft::new(1000, 250, StftWindow::Hann).is_err());
        assert!(Stft::new(2048, 0, StftWindow::Hann).is_err());
    }

    #[test]
    fn roundtrip_random_noise() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(7);
        for window in [StftWindow::Hann, StftWindow::SqrtHann] {
            for len in [0, 1, 100, 2047, 2048, 9_999] {
                let x: Vec<f64> = (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let stft = Stft::new(512, 128, window).unwrap();
                let y = stft.roundtrip(&x);
                assert_eq!(y.len(), len);
                if len > 0 {
                    assert!(snr_db(&x, &y) > 200.0, "{window:?} len {len}");
                }
            }
        }
    }

    #[test]
    fn gain_length_checked() {
        let stft = Stft::new(64, 16, StftWindow::Hann).unwrap();
        assert!(stft.filter(&[0.0; 10], &[1.0; 32]).is_err());
        assert!(stft.filter(&[0.0; 10], &[1.0; 33]).is_ok());
    }
}
