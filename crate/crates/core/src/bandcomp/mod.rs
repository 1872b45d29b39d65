//! High-frequency band completion.
//!
//! The 24 kHz main signal is upsampled to 48 kHz and summed with the part of
//! an auxiliary 48 kHz rendering that lies above the cutoff. The split is a
//! zero-phase STFT bin mask with a raised-cosine transition of
//! `crossfade_hz` centred on `cutoff_hz`.

mod resample;
mod stft;

pub use resample::{upsample_2x_samples, HALF_TAPS, KAISER_BETA};
pub use stft::{Stft, StftWindow, COLA_TOLERANCE};

use std::f64::consts::PI;

use crate::domain::AudioBuffer;
use crate::error::{Error, Result};

pub const MAIN_RATE: u32 = 24_000;
pub const FULL_RATE: u32 = 48_000;
/// Largest accepted duration difference between the two branches.
pub const MAX_DURATION_MISMATCH_SECONDS: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandCompletionConfig {
    pub cutoff_hz: f64,
    pub crossfade_hz: f64,
    pub fft_size: usize,
    pub hop: usize,
    pub window: StftWindow,
}

impl Default for BandCompletionConfig {
    fn default() -> Self {
        Self {
            cutoff_hz: 10_000.0,
            crossfade_hz: 1_000.0,
            fft_size: 2048,
            hop: 512,
            window: StftWindow::Hann,
        }
    }
}

impl BandCompletionConfig {
    pub fn transition(&self) -> (f64, f64) {
        let half = self.crossfade_hz / 2.0;
        (self.cutoff_hz - half, self.cutoff_hz + half)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.cutoff_hz.is_finite() || !self.crossfade_hz.is_finite() || self.crossfade_hz <= 0.0
        {
            return Err(Error::invalid(format!(
                "cutoff {} Hz / crossfade {} Hz must be finite with crossfade > 0",
                self.cutoff_hz, self.crossfade_hz
            )));
        }
        let (lo, hi) = self.transition();
        let nyquist = FULL_RATE as f64 / 2.0;
        if lo <= 0.0 || hi >= nyquist {
            return Err(Error::invalid(format!(
                "transition band {lo}-{hi} Hz must lie strictly inside 0-{nyquist} Hz"
            )));
        }
        Ok(())
    }

    /// Builds the STFT, which also checks the window/hop overlap-add.
    pub fn stft(&self) -> Result<Stft> {
        self.validate()?;
        Stft::new(self.fft_size, self.hop, self.window)
    }

    /// High-pass gain at `freq_hz`: 0 below the transition, 1 above it and
    /// a raised cosine in between.
    pub fn highpass_gain(&self, freq_hz: f64) -> f64 {
        let (lo, hi) = self.transition();
        if freq_hz <= lo {
            0.0
        } else if freq_hz >= hi {
            1.0
        } else {
            0.5 * (1.0 - (PI * (freq_hz - lo) / self.crossfade_hz).cos())
        }
    }

    fn bin_gains(&self, highpass: bool) -> Vec<f64> {
        let bin_hz = FULL_RATE as f64 / self.fft_size as f64;
        (0..=self.fft_size / 2)
            .map(|k| {
                let g = self.highpass_gain(k as f64 * bin_hz);
                if highpass {
                    g
                } else {
                    1.0 - g
                }
            })
            .collect()
    }
}

fn require_rate(x: &AudioBuffer, what: &'static str, expected: u32) -> Result<()> {
    if x.sample_rate() != expected {
        return Err(Error::SampleRate {
            what,
            expected,
            found: x.sample_rate(),
        });
    }
    Ok(())
}

pub fn upsample_2x(x: &AudioBuffer) -> Result<AudioBuffer> {
    require_rate(x, "upsampler input", MAIN_RATE)?;
    AudioBuffer::new(upsample_2x_samples(x.samples()), FULL_RATE)
}

/// Content above the cutoff of a 48 kHz signal.
pub fn highpass_extract(x: &AudioBuffer, config: &BandCompletionConfig) -> Result<AudioBuffer> {
    require_rate(x, "high-pass input", FULL_RATE)?;
    let out = config
        .stft()?
        .filter(x.samples(), &config.bin_gains(true))?;
    AudioBuffer::new(out, FULL_RATE)
}

/// Complement of [`highpass_extract`]: the same STFT with gains `1 - m(f)`.
pub fn lowpass_extract(x: &AudioBuffer, config: &BandCompletionConfig) -> Result<AudioBuffer> {
    require_rate(x, "low-pass input", FULL_RATE)?;
    let out = config
        .stft()?
        .filter(x.samples(), &config.bin_gains(false))?;
    AudioBuffer::new(out, FULL_RATE)
}

/// Both branches and their sum, all truncated to the shorter branch.
#[derive(Debug, Clone, PartialEq)]
pub struct BandCompletion {
    pub output: AudioBuffer,
    pub upsampled: AudioBuffer,
    pub high_band: AudioBuffer,
}

pub fn band_complete_parts(
    x24: &AudioBuffer,
    x48_src: &AudioBuffer,
    config: &BandCompletionConfig,
) -> Result<BandCompletion> {
    require_rate(x24, "main (24 kHz) input", MAIN_RATE)?;
    require_rate(x48_src, "auxiliary (48 kHz) input", FULL_RATE)?;
    config.validate()?;
    let mismatch = (x24.duration() - x48_src.duration()).abs();
    if mismatch > MAX_DURATION_MISMATCH_SECONDS {
        return Err(Error::invalid(format!(
            "input durations differ by {:.1} ms ({:.3} s vs {:.3} s), limit {:.0} ms",
            mismatch * 1e3,
            x24.duration(),
            x48_src.duration(),
            MAX_DURATION_MISMATCH_SECONDS * 1e3
        )));
    }
    let mut up = upsample_2x_samples(x24.samples());
    let mut high = config
        .stft()?
        .filter(x48_src.samples(), &config.bin_gains(true))?;
    let len = up.len().min(high.len());
    up.truncate(len);
    high.truncate(len);
    let sum = up.iter().zip(&high).map(|(a, b)| a + b).collect();
    Ok(BandCompletion {
        output: AudioBuffer::new(sum, FULL_RATE)?,
        upsampled: AudioBuffer::new(up, FULL_RATE)?,
        high_band: AudioBuffer::new(high, FULL_RATE)?,
    })
}

/// `upsample_2x(x24) + highpass_extract(x48_src)`, no gain normalisation.
pub fn band_complete(
    x24: &AudioBuffer,
    x48_src: &AudioBuffer,
    config: &BandCompletionConfig,
) -> Result<AudioBuffer> {
    band_complete_parts(x24, x48_src, config).map(|p| p.output)
}
