//! Rule-based F0 refinement gated by the technique matrix: sinusoidal
//! vibrato in the log-frequency domain and sigmoid glissando transitions at
//! note boundaries.

use std::f64::consts::PI;
use std::ops::Range;

use crate::domain::{F0Contour, NoteSequence};
use crate::error::{Error, Result};
use crate::ingest::{GLISSANDO, VIBRATO};
use crate::technique::TechniqueMatrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VibratoParams {
    /// Peak deviation in cents.
    pub depth_cents: f64,
    pub rate_hz: f64,
    /// Phase at the first frame of each vibrato run.
    pub phase_rad: f64,
    /// Depth fades in/out linearly over this long at both ends of a run.
    /// Zero disables the fade.
    pub ramp_seconds: f64,
}

impl Default for VibratoParams {
    fn default() -> Self {
        Self {
            depth_cents: 60.0,
            rate_hz: 5.5,
            phase_rad: 0.0,
            ramp_seconds: 0.05,
        }
    }
}

impl VibratoParams {
    pub fn validate(&self) -> Result<()> {
        if !self.depth_cents.is_finite() || self.depth_cents < 0.0 {
            return Err(Error::invalid(format!(
                "vibrato depth must be finite and >= 0 cents, got {}",
                self.depth_cents
            )));
        }
        if !self.rate_hz.is_finite() || self.rate_hz <= 0.0 {
            return Err(Error::invalid(format!(
                "vibrato rate must be > 0 Hz, got {}",
                self.rate_hz
            )));
        }
        if !self.phase_rad.is_finite() {
            return Err(Error::invalid("vibrato phase must be finite"));
        }
        if !self.ramp_seconds.is_finite() || self.ramp_seconds < 0.0 {
            return Err(Error::invalid(format!(
                "vibrato ramp must be >= 0 s, got {}",
                self.ramp_seconds
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GlissandoParams {
    /// Sigmoid sharpness τ, per second.
    pub sharpness: f64,
    /// Half-width of the transition window around each boundary, seconds.
    pub window_seconds: f64,
}

impl Default for GlissandoParams {
    fn default() -> Self {
        Self {
            sharpness: 50.0,
            window_seconds: 0.1,
        }
    }
}

impl GlissandoParams {
    pub fn validate(&self) -> Result<()> {
        if !self.sharpness.is_finite() || self.sharpness <= 0.0 {
            return Err(Error::invalid(format!(
                "glissando sharpness must be > 0, got {}",
                self.sharpness
            )));
        }
        if !self.window_seconds.is_finite() || self.window_seconds <= 0.0 {
            return Err(Error::invalid(format!(
                "glissando window must be > 0 s, got {}",
                self.window_seconds
            )));
        }
        Ok(())
    }
}

/// Frames touched by each rule during [`refine_f0_with_report`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RefineReport {
    pub vibrato_frames: usize,
    pub glissando_frames: usize,
}

fn check_mask(f0: &F0Contour, mask: &[bool]) -> Result<()> {
    if mask.len() != f0.len() {
        return Err(Error::LengthMismatch {
            what: "technique mask vs f0 frames",
            left: mask.len(),
            right: f0.len(),
        });
    }
    Ok(())
}

/// Keeps a modified voiced value strictly positive and below Nyquist.
fn clamp_voiced(hz: f64, nyquist: f64) -> f64 {
    let below_nyquist = f64::from_bits(nyquist.to_bits() - 1);
    if hz.is_nan() {
        return below_nyquist;
    }
    hz.clamp(f64::MIN_POSITIVE, below_nyquist)
}

fn runs(mask: &[bool]) -> impl Iterator<Item = Range<usize>> + '_ {
    let mut n = 0;
    std::iter::from_fn(move || {
        while n < mask.len() && !mask[n] {
            n += 1;
        }
        if n == mask.len() {
            return None;
        }
        let start = n;
        while n < mask.len() && mask[n] {
            n += 1;
        }
        Some(start..n)
    })
}

fn vibrato_in_place(values: &mut [f64], f0: &F0Contour, mask: &[bool], p: &VibratoParams) -> usize {
    let grid = f0.grid();
    let nyquist = grid.nyquist();
    let mut touched = 0;
    for run in runs(mask) {
        let onset = grid.frame_time(run.start);
        let last = grid.frame_time(run.end - 1);
        for n in run {
            if !f0.voiced()[n] {
                continue;
            }
            let t = grid.frame_time(n) - onset;
            let ramp = if p.ramp_seconds > 0.0 {
                (t.min(last - grid.frame_time(n)) / p.ramp_seconds).min(1.0)
            } else {
                1.0
            };
            let cents = ramp * p.depth_cents * (2.0 * PI * p.rate_hz * t + p.phase_rad).sin();
            values[n] = clamp_voiced(values[n] * (cents / 1200.0).exp2(), nyquist);
            touched += 1;
        }
    }
    touched
}

/// Applies vibrato on masked voiced frames; all other frames are copied
/// bit-for-bit. Time restarts at zero on the first frame of each run.
pub fn apply_vibrato(f0: &F0Contour, mask: &[bool], params: &VibratoParams) -> Result<F0Contour> {
    params.validate()?;
    check_mask(f0, mask)?;
    let mut values = f0.values().to_vec();
    vibrato_in_place(&mut values, f0, mask, params);
    F0Contour::new(values, f0.voiced().to_vec(), f0.grid())
}

struct Boundary {
    t0: f64,
    from_hz: f64,
    to_hz: f64,
}

impl Boundary {
    fn value_at(&self, t: f64, sharpness: f64) -> f64 {
        self.from_hz + (self.to_hz - self.from_hz) / (1.0 + (-sharpness * (t - self.t0)).exp())
    }
}

/// Pitch-changing boundaries between consecutive notes. Notes count as
/// consecutive when the gap between them is at most one frame.
fn boundaries(notes: &NoteSequence, frame_duration: f64) -> Vec<Boundary> {
    notes
        .notes()
        .windows(2)
        .filter(|w| (w[1].start - w[0].end).abs() <= frame_duration && w[0].midi != w[1].midi)
        .map(|w| Boundary {
            t0: 0.5 * (w[0].end + w[1].start),
            from_hz: w[0].hz(),
            to_hz: w[1].hz(),
        })
        .collect()
}

fn glissando_in_place(
    values: &mut [f64],
    f0: &F0Contour,
    mask: &[bool],
    notes: &NoteSequence,
    p: &GlissandoParams,
) -> usize {
    let grid = f0.grid();
    let n_frames = f0.len();
    let d = grid.frame_duration();

    let all = boundaries(notes, d);
    // Nearest active boundary for every frame inside some window.
    let mut owner: Vec<Option<(f64, usize)>> = vec![None; n_frames];
    for (b, boundary) in all.iter().enumerate() {
        let lo = ((boundary.t0 - p.window_seconds) / d).ceil().max(0.0);
        let hi = ((boundary.t0 + p.window_seconds) / d).floor();
        if hi < lo || lo >= n_frames as f64 {
            continue;
        }
        let frames = lo as usize..(hi as usize + 1).min(n_frames);
        if !mask[frames.clone()].iter().any(|&m| m) {
            continue;
        }
        for n in frames {
            let dist = (grid.frame_time(n) - boundary.t0).abs();
            if owner[n].is_none_or(|(best, _)| dist < best) {
                owner[n] = Some((dist, b));
            }
        }
    }

    let nyquist = grid.nyquist();
    let mut touched = 0;
    for n in 0..n_frames {
        let Some((_, b)) = owner[n] else { continue };
        if !mask[n] || !f0.voiced()[n] {
            continue;
        }
        values[n] = clamp_voiced(all[b].value_at(grid.frame_time(n), p.sharpness), nyquist);
        touched += 1;
    }
    touched
}

/// Replaces masked voiced frames near pitch-changing note boundaries with a
/// sigmoid slide from the previous note's frequency to the next one's.
pub fn apply_glissando(
    f0: &F0Contour,
    mask: &[bool],
    notes: &NoteSequence,
    params: &GlissandoParams,
) -> Result<F0Contour> {
    params.validate()?;
    check_mask(f0, mask)?;
    let mut values = f0.values().to_vec();
    glissando_in_place(&mut values, f0, mask, notes, params);
    F0Contour::new(values, f0.voiced().to_vec(), f0.grid())
}

/// Vibrato, then glissando (which wins where both are active), driven by
/// the `vibrato` and `glissando` rows of the matrix. A vocabulary without
/// one of those rows simply skips that rule.
pub fn refine_f0_with_report(
    f0: &F0Contour,
    matrix: &TechniqueMatrix,
    notes: Option<&NoteSequence>,
    vibrato: &VibratoParams,
    glissando: &GlissandoParams,
) -> Result<(F0Contour, RefineReport)> {
    vibrato.validate()?;
    glissando.validate()?;
    if matrix.n_frames() != f0.len() {
        return Err(Error::LengthMismatch {
            what: "technique matrix frames vs f0 frames",
            left: matrix.n_frames(),
            right: f0.len(),
        });
    }
    let mut values = f0.values().to_vec();
    let mut report = RefineReport::default();

    if let Some(vib) = matrix.try_mask(VIBRATO) {
        report.vibrato_frames = vibrato_in_place(&mut values, f0, &vib, vibrato);
    }
    if let Some(gliss) = matrix.try_mask(GLISSANDO) {
        if gliss.iter().any(|&b| b) {
            let notes = notes.ok_or_else(|| {
                Error::invalid(
                    "glissando frames are set in the technique matrix but no notes were given; \
                     glissando targets come from the note sequence",
                )
            })?;
            report.glissando_frames = glissando_in_place(&mut values, f0, &gliss, notes, glissando);
        }
    }
    let refined = F0Contour::new(values, f0.voiced().to_vec(), f0.grid())?;
    Ok((refined, report))
}

pub fn refine_f0(
    f0: &F0Contour,
    matrix: &TechniqueMatrix,
    notes: Option<&NoteSequence>,
    vibrato: &VibratoParams,
    glissando: &GlissandoParams,
) -> Result<F0Contour> {
    refine_f0_with_report(f0, matrix, notes, vibrato, glissando).map(|(c, _)| c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{FrameGrid, Note};
    use crate::ingest::LabelVocabulary;
    use proptest::prelude::*;

    fn flat(hz: f64, n: usize) -> F0Contour {
        F0Contour::from_values(vec![hz; n], FrameGrid::default()).unwrap()
    }

    fn no_ramp(depth: f64, rate: f64) -> VibratoParams {
        VibratoParams {
            depth_cents: depth,
            rate_hz: rate,
            phase_rad: 0.0,
            ramp_seconds: 0.0,
        }
    }

    fn notes(list: &[(u8, f64, f64)]) -> NoteSequence {
        NoteSequence::new(
            list.iter()
                .map(|&(midi, start, end)| Note { midi, start, end })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn empty_mask_is_bit_identical() {
        let c = F0Contour::from_values(vec![0.0, 220.1, 330.3, 0.0], FrameGrid::default()).unwrap();
        let out = apply_vibrato(&c, &[false; 4], &VibratoParams::default()).unwrap();
        for (a, b) in out.values().iter().zip(c.values()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn peak_of_sine() {
        // Rate chosen so frame 1 (t = Δ) sits exactly at a quarter period.
        let g = FrameGrid::default();
        let rate = 1.0 / (4.0 * g.frame_duration());
        let out = apply_vibrato(&flat(440.0, 3), &[true; 3], &no_ramp(100.0, rate)).unwrap();
        // 440 * 2^(100/1200), from an independent 20-digit evaluation
        assert!((out.values()[1] - 466.163_761_518_089_9).abs() < 1e-9);
    }

    #[test]
    fn zero_time_zero_phase_unchanged() {
        let out = apply_vibrato(&flat(440.0, 5), &[true; 5], &no_ramp(100.0, 5.5)).unwrap();
        assert_eq!(out.values()[0], 440.0);
    }

    #[test]
    fn unvoiced_frames_untouched() {
        let c = F0Contour::from_values(vec![200.0, 0.0, 200.0, 0.0], FrameGrid::default()).unwrap();
        let out = apply_vibrato(&c, &[true; 4], &no_ramp(100.0, 7.0)).unwrap();
        assert_eq!(out.voiced(), c.voiced());
        assert_eq!(out.values()[1], 0.0);
        assert_eq!(out.values()[3], 0.0);
    }

    #[test]
    fn ramp_starts_and_ends_at_zero_depth() {
        let p = VibratoParams {
            phase_rad: PI / 2.0,
            ..VibratoParams::default()
        };
        let out = apply_vibrato(&flat(300.0, 50), &[true; 50], &p).unwrap();
        assert_eq!(out.values()[0], 300.0);
        assert_eq!(out.values()[49], 300.0);
        assert_ne!(out.values()[20], 300.0);
    }

    #[test]
    fn phase_restarts_per_run() {
        let mut mask = vec![false; 40];
        mask[3..10].iter_mut().for_each(|m| *m = true);
        mask[20..27].iter_mut().for_each(|m| *m = true);
        let out = apply_vibrato(&flat(200.0, 40), &mask, &no_ramp(50.0, 6.0)).unwrap();
        for k in 0..7 {
            assert_eq!(out.values()[3 + k], out.values()[20 + k]);
        }
    }

    #[test]
    fn mask_length_mismatch() {
        assert!(matches!(
            apply_vibrato(&flat(200.0, 4), &[true; 3], &VibratoParams::default()),
            Err(Error::LengthMismatch { .. })
        ));
        let n = notes(&[(60, 0.0, 1.0)]);
        assert!(
            apply_glissando(&flat(200.0, 4), &[true; 5], &n, &GlissandoParams::default()).is_err()
        );
    }

    #[test]
    fn params_validated() {
        let bad = VibratoParams {
            rate_hz: 0.0,
            ..VibratoParams::default()
        };
        assert!(apply_vibrato(&flat(200.0, 2), &[false; 2], &bad).is_err());
        let bad = GlissandoParams {
            sharpness: -1.0,
            ..GlissandoParams::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn extreme_depth_stays_in_range() {
        let p = VibratoParams {
            depth_cents: 1e6,
            phase_rad: 1.0,
            ramp_seconds: 0.0,
            rate_hz: 5.0,
        };
        let out = apply_vibrato(&flat(200.0, 30), &[true; 30], &p).unwrap();
        assert!(out.values().iter().all(|&v| v > 0.0 && v < 12_000.0));
    }

    fn sigma(x: f64) -> f64 {
        1.0 / (1.0 + (-x).exp())
    }

    #[test]
    fn sigmoid_values() {
        let b = Boundary {
            t0: 1.0,
            from_hz: 200.0,
            to_hz: 300.0,
        };
        assert_eq!(b.value_at(1.0, 50.0), 250.0);
        // σ(1) = 0.7310585786300049 (independent evaluation)
        assert!((b.value_at(1.02, 50.0) - 273.105_857_863).abs() < 1e-6);
    }

    /// Boundary on an exact frame edge: frame 75 (t0 = 75Δ).
    fn boundary_setup() -> (F0Contour, NoteSequence, f64) {
        let g = FrameGrid::default();
        let t0 = g.frame_time(75);
        let n = notes(&[(60, 0.0, t0), (64, t0, 2.0)]);
        (flat(250.0, 150), n, t0)
    }

    #[test]
    fn glissando_midpoint_and_monotone() {
        let (c, n, t0) = boundary_setup();
        let out = apply_glissando(&c, &[true; 150], &n, &GlissandoParams::default()).unwrap();
        let f_prev = crate::domain::midi_to_hz(60);
        let f_curr = crate::domain::midi_to_hz(64);
        assert!((out.values()[75] - 0.5 * (f_prev + f_curr)).abs() < 1e-12);
        let g = c.grid();
        let window: Vec<usize> = (0..150)
            .filter(|&i| (g.frame_time(i) - t0).abs() <= 0.1)
            .collect();
        for w in window.windows(2) {
            assert!(out.values()[w[1]] > out.values()[w[0]]);
        }
        // outside the window nothing changes
        assert_eq!(out.values()[window[0] - 1], 250.0);
        assert_eq!(out.values()[window[window.len() - 1] + 1], 250.0);
        // spot check against the logistic
        let i = window[window.len() - 1];
        let t = g.frame_time(i) - t0;
        assert!((out.values()[i] - (f_prev + (f_curr - f_prev) * sigma(50.0 * t))).abs() < 1e-9);
    }

    #[test]
    fn glissando_needs_mask_in_window() {
        let (c, n, _) = boundary_setup();
        let mut mask = vec![false; 150];
        mask[0] = true;
        let out = apply_glissando(&c, &mask, &n, &GlissandoParams::default()).unwrap();
        assert_eq!(out, c);
    }

    #[test]
    fn glissando_only_on_masked_frames() {
        let (c, n, _) = boundary_setup();
        let mut mask = vec![false; 150];
        mask[75..].iter_mut().for_each(|m| *m = true);
        let out = apply_glissando(&c, &mask, &n, &GlissandoParams::default()).unwrap();
        assert_eq!(&out.values()[..75], &c.values()[..75]);
        assert_ne!(out.values()[76], 250.0);
    }

    #[test]
    fn equal_notes_leave_values() {
        let g = FrameGrid::default();
        let t0 = g.frame_time(75);
        let n = notes(&[(62, 0.0, t0), (62, t0, 2.0)]);
        let c = flat(290.0, 150);
        let out = apply_glissando(&c, &[true; 150], &n, &GlissandoParams::default()).unwrap();
        assert_eq!(out, c);
    }

    #[test]
    fn non_consecutive_notes_have_no_boundary() {
        let n = notes(&[(60, 0.0, 0.5), (64, 0.6, 1.0)]);
        let c = flat(250.0, 100);
        let out = apply_glissando(&c, &[true; 100], &n, &GlissandoParams::default()).unwrap();
        assert_eq!(out, c);
    }

    #[test]
    fn overlapping_windows_use_nearest_boundary() {
        let g = FrameGrid::default();
        let (t1, t2) = (g.frame_time(50), g.frame_time(60));
        let n = notes(&[(60, 0.0, t1), (64, t1, t2), (67, t2, 2.0)]);
        let out = apply_glissando(
            &flat(300.0, 120),
            &[true; 120],
            &n,
            &GlissandoParams::default(),
        )
        .unwrap();
        let f = |m| crate::domain::midi_to_hz(m);
        // frame 54 is nearer t1, frame 56 nearer t2
        let expect54 = f(60) + (f(64) - f(60)) * sigma(50.0 * (g.frame_time(54) - t1));
        let expect56 = f(64) + (f(67) - f(64)) * sigma(50.0 * (g.frame_time(56) - t2));
        assert!((out.values()[54] - expect54).abs() < 1e-9);
        assert!((out.values()[56] - expect56).abs() < 1e-9);
    }

    fn matrix(rows: &[(&str, Vec<bool>)]) -> TechniqueMatrix {
        let vocab = LabelVocabulary::new(rows.iter().map(|r| r.0)).unwrap();
        TechniqueMatrix::from_rows(vocab, rows.iter().map(|r| r.1.clone()).collect()).unwrap()
    }

    #[test]
    fn refine_zero_matrix_identity() {
        let (c, n, _) = boundary_setup();
        let m = TechniqueMatrix::zeros(LabelVocabulary::default(), 150);
        let out = refine_f0(
            &c,
            &m,
            Some(&n),
            &VibratoParams::default(),
            &GlissandoParams::default(),
        )
        .unwrap();
        assert_eq!(out, c);
    }

    #[test]
    fn refine_vibrato_only_equals_apply_vibrato() {
        let c = flat(220.0, 200);
        let mut vib = vec![false; 200];
        vib[20..150].iter_mut().for_each(|m| *m = true);
        let m = matrix(&[("vibrato", vib.clone()), ("glissando", vec![false; 200])]);
        let p = VibratoParams::default();
        let (out, report) =
            refine_f0_with_report(&c, &m, None, &p, &GlissandoParams::default()).unwrap();
        assert_eq!(out, apply_vibrato(&c, &vib, &p).unwrap());
        assert_eq!(report.vibrato_frames, 130);
        assert_eq!(report.glissando_frames, 0);
    }

    #[test]
    fn refine_disjoint_spans() {
        let (c, n, _) = boundary_setup();
        let mut vib = vec![false; 150];
        vib[0..40].iter_mut().for_each(|m| *m = true);
        let mut gl = vec![false; 150];
        gl[60..90].iter_mut().for_each(|m| *m = true);
        let m = matrix(&[("vibrato", vib.clone()), ("glissando", gl.clone())]);
        let (vp, gp) = (VibratoParams::default(), GlissandoParams::default());
        let out = refine_f0(&c, &m, Some(&n), &vp, &gp).unwrap();
        let v_only = apply_vibrato(&c, &vib, &vp).unwrap();
        let g_only = apply_glissando(&c, &gl, &n, &gp).unwrap();
        for (i, &on) in vib.iter().enumerate() {
            let expect = if on {
                v_only.values()[i]
            } else {
                g_only.values()[i]
            };
            assert_eq!(out.values()[i], expect, "frame {i}");
        }
    }

    #[test]
    fn glissando_wins_over_vibrato() {
        let (c, n, _) = boundary_setup();
        let m = matrix(&[("vibrato", vec![true; 150]), ("glissando", vec![true; 150])]);
        let (vp, gp) = (VibratoParams::default(), GlissandoParams::default());
        let out = refine_f0(&c, &m, Some(&n), &vp, &gp).unwrap();
        let g_only = apply_glissando(&c, &[true; 150], &n, &gp).unwrap();
        let v_only = apply_vibrato(&c, &[true; 150], &vp).unwrap();
        assert_eq!(out.values()[75], g_only.values()[75]);
        assert_eq!(out.values()[30], v_only.values()[30]);
    }

    #[test]
    fn glissando_without_notes_is_validation_error() {
        let c = flat(220.0, 10);
        let m = matrix(&[("glissando", vec![true; 10])]);
        let err = refine_f0(
            &c,
            &m,
            None,
            &VibratoParams::default(),
            &GlissandoParams::default(),
        )
        .unwrap_err();
        assert_eq!(err.class(), crate::error::ErrorClass::Validation);
    }

    #[test]
    fn matrix_length_mismatch() {
        let m = TechniqueMatrix::zeros(LabelVocabulary::default(), 9);
        assert!(refine_f0(
            &flat(220.0, 10),
            &m,
            None,
            &VibratoParams::default(),
            &GlissandoParams::default()
        )
        .is_err());
    }

    proptest! {
        #[test]
        fn cents_law(depth in 0.0f64..300.0, rate in 0.5f64..12.0, phase in -PI..PI, hz in 60.0f64..1000.0) {
            let g = FrameGrid::default();
            let p = VibratoParams { depth_cents: depth, rate_hz: rate, phase_rad: phase, ramp_seconds: 0.0 };
            let out = apply_vibrato(&flat(hz, 120), &[true; 120], &p).unwrap();
            for n in 0..120 {
                let cents = 1200.0 * (out.values()[n] / hz).log2();
                let expect = depth * (2.0 * PI * rate * g.frame_time(n) + phase).sin();
                prop_assert!((cents - expect).abs() < 1e-9);
            }
        }

        #[test]
        fn voicing_never_changes(vals in proptest::collection::vec(prop_oneof![Just(0.0), 50.0f64..800.0], 1..200), seed in any::<u64>()) {
            let n = vals.len();
            let c = F0Contour::from_values(vals, FrameGrid::default()).unwrap();
            let vib: Vec<bool> = (0..n).map(|i| (seed >> (i % 64)) & 1 == 1).collect();
            let gl: Vec<bool> = (0..n).map(|i| (seed >> ((i + 17) % 64)) & 1 == 1).collect();
            let m = matrix(&[("vibrato", vib), ("glissando", gl)]);
            let nseq = notes(&[(55, 0.0, 0.4), (62, 0.4, 0.9), (57, 0.9, 3.0)]);
            let out = refine_f0(&c, &m, Some(&nseq), &VibratoParams::default(), &GlissandoParams::default()).unwrap();
            prop_assert_eq!(out.voiced(), c.voiced());
            for i in 0..n {
                if !c.voiced()[i] {
                    prop_assert_eq!(out.values()[i], 0.0);
                }
                prop_assert!(out.values()[i].is_finite() && out.values()[i] < 12_000.0);
            }
        }
    }
}
