//! Domain types shared by every stage, plus the time/frame arithmetic that
//! ties annotations in seconds to the acoustic frame grid.

use std::ops::Range;

use crate::error::{Error, Result};

/// Slack (in frames) absorbed when converting seconds to frame indices, so
/// that a boundary written as a decimal that lands exactly on a frame edge is
/// not pushed one frame early by binary rounding.
const FRAME_EPSILON: f64 = 1e-9;

/// Sample rate and hop size defining the time to frame mapping.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FrameGrid {
    sample_rate: u32,
    hop: u32,
}

impl FrameGrid {
    pub const DEFAULT_SAMPLE_RATE: u32 = 24_000;
    pub const DEFAULT_HOP: u32 = 256;

    pub fn new(sample_rate: u32, hop: u32) -> Result<Self> {
        if sample_rate == 0 || hop == 0 {
            return Err(Error::invalid(format!(
                "frame grid needs sample_rate >= 1 and hop >= 1 (got sr={sample_rate} hop={hop})"
            )));
        }
        Ok(Self { sample_rate, hop })
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn hop(&self) -> u32 {
        self.hop
    }

    /// Seconds per frame.
    pub fn frame_duration(&self) -> f64 {
        self.hop as f64 / self.sample_rate as f64
    }

    /// Frames per second.
    pub fn frame_rate(&self) -> f64 {
        self.sample_rate as f64 / self.hop as f64
    }

    /// Time of frame `n`: the centre of its analysis window under centred
    /// framing, i.e. `n * hop / sample_rate`.
    pub fn frame_time(&self, n: usize) -> f64 {
        n as f64 * self.hop as f64 / self.sample_rate as f64
    }

    pub fn nyquist(&self) -> f64 {
        self.sample_rate as f64 / 2.0
    }

    fn seconds_to_frames(&self, t: f64) -> f64 {
        t * self.sample_rate as f64 / self.hop as f64
    }
}

impl Default for FrameGrid {
    fn default() -> Self {
        Self {
            sample_rate: Self::DEFAULT_SAMPLE_RATE,
            hop: Self::DEFAULT_HOP,
        }
    }
}

/// Converts `[start, end)` in seconds to a non-empty half-open frame range.
///
/// `a = floor(start / frame_duration)`, `b = max(a + 1, floor(end / frame_duration))`.
pub fn seconds_to_frame_span(start: f64, end: f64, grid: FrameGrid) -> Result<Range<usize>> {
    if !start.is_finite() || !end.is_finite() {
        return Err(Error::invalid(format!(
            "non-finite time span [{start}, {end})"
        )));
    }
    if start < 0.0 || end < 0.0 {
        return Err(Error::invalid(format!(
            "negative time in span [{start}, {end})"
        )));
    }
    if end <= start {
        return Err(Error::invalid(format!("empty time span [{start}, {end})")));
    }
    let a = (grid.seconds_to_frames(start) + FRAME_EPSILON).floor() as usize;
    let b = (grid.seconds_to_frames(end) + FRAME_EPSILON).floor() as usize;
    Ok(a..b.max(a + 1))
}

/// One aligned phoneme.
#[derive(Debug, Clone, PartialEq)]
pub struct PhonemeSegment {
    pub label: String,
    pub start: f64,
    pub end: f64,
}

impl PhonemeSegment {
    pub fn new(label: impl Into<String>, start: f64, end: f64) -> Self {
        Self {
            label: label.into(),
            start,
            end,
        }
    }
}

/// Sorted, non-overlapping phoneme segments.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PhonemeAlignment {
    segments: Vec<PhonemeSegment>,
}

impl PhonemeAlignment {
    pub fn new(segments: Vec<PhonemeSegment>) -> Result<Self> {
        for (i, seg) in segments.iter().enumerate() {
            validate_span(seg.start, seg.end)
                .map_err(|e| Error::invalid(format!("segment {} (`{}`): {e}", i + 1, seg.label)))?;
            if let Some(prev) = i.checked_sub(1).map(|j| &segments[j]) {
                if seg.start < prev.end {
                    return Err(Error::invalid(format!(
                        "segment {} (`{}`) starts at {} before previous segment ends at {}",
                        i + 1,
                        seg.label,
                        seg.start,
                        prev.end
                    )));
                }
            }
        }
        Ok(Self { segments })
    }

    pub fn segments(&self) -> &[PhonemeSegment] {
        &self.segments
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    /// End time of the last segment, or 0 for an empty alignment.
    pub fn end_time(&self) -> f64 {
        self.segments.last().map_or(0.0, |s| s.end)
    }
}

pub(crate) fn validate_span(start: f64, end: f64) -> Result<()> {
    if !start.is_finite() || !end.is_finite() {
        return Err(Error::invalid("non-finite time"));
    }
    if start < 0.0 {
        return Err(Error::invalid(format!("negative start {start}")));
    }
    if end <= start {
        return Err(Error::invalid(format!("end <= start ({end} <= {start})")));
    }
    Ok(())
}

/// Assigns every frame in `0..n_frames` a segment id.
///
/// Frames inside an aligned phoneme share its id. Each maximal run of frames
/// that no phoneme covers (leading silence, gaps, trailing frames) gets a
/// fresh id of its own. Ids start at 0 and grow by one at each boundary.
pub fn segment_map(alignment: &PhonemeAlignment, n_frames: usize, grid: FrameGrid) -> Vec<usize> {
    let mut ids = Vec::with_capacity(n_frames);
    let mut next_id = 0usize;
    let mut push_run = |ids: &mut Vec<usize>, len: usize| {
        ids.extend(std::iter::repeat_n(next_id, len));
        next_id += 1;
    };

    for seg in alignment.segments() {
        let cursor = ids.len();
        if cursor >= n_frames {
            break;
        }
        // Validated alignments always convert; skip defensively otherwise.
        let Ok(span) = seconds_to_frame_span(seg.start, seg.end, grid) else {
            continue;
        };
        let a = span.start.max(cursor).min(n_frames);
        let b = span.end.min(n_frames);
        if a >= b {
            // Entirely shadowed by an earlier segment's minimum-width frame.
            continue;
        }
        if a > cursor {
            push_run(&mut ids, a - cursor);
        }
        push_run(&mut ids, b - a);
    }
    if ids.len() < n_frames {
        let rest = n_frames - ids.len();
        push_run(&mut ids, rest);
    }
    ids
}

/// Per-frame F0 in Hz; `0.0` marks an unvoiced frame.
#[derive(Debug, Clone, PartialEq)]
pub struct F0Contour {
    values: Vec<f64>,
    voiced: Vec<bool>,
    grid: FrameGrid,
}

impl F0Contour {
    pub fn new(values: Vec<f64>, voiced: Vec<bool>, grid: FrameGrid) -> Result<Self> {
        if values.len() != voiced.len() {
            return Err(Error::LengthMismatch {
                what: "f0 values vs voiced flags",
                left: values.len(),
                right: voiced.len(),
            });
        }
        let nyquist = grid.nyquist();
        for (i, (&v, &uv)) in values.iter().zip(&voiced).enumerate() {
            if !v.is_finite() || v < 0.0 || v >= nyquist {
                return Err(Error::invalid(format!(
                    "frame {i}: f0 {v} outside [0, {nyquist})"
                )));
            }
            if (v > 0.0) != uv {
                return Err(Error::invalid(format!(
                    "frame {i}: f0 {v} inconsistent with voiced={uv}"
                )));
            }
        }
        Ok(Self {
            values,
            voiced,
            grid,
        })
    }

    /// Builds a contour whose voicing is implied by the values (`> 0` voiced).
    pub fn from_values(values: Vec<f64>, grid: FrameGrid) -> Result<Self> {
        let voiced = values.iter().map(|&v| v > 0.0).collect();
        Self::new(values, voiced, grid)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn voiced(&self) -> &[bool] {
        &self.voiced
    }

    pub fn grid(&self) -> FrameGrid {
        self.grid
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Frequency of a MIDI note number, A4 (69) = 440 Hz.
pub fn midi_to_hz(midi: u8) -> f64 {
    440.0 * 2f64.powf((midi as f64 - 69.0) / 12.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Note {
    pub midi: u8,
    pub start: f64,
    pub end: f64,
}

impl Note {
    pub fn hz(&self) -> f64 {
        midi_to_hz(self.midi)
    }
}

/// Sorted, non-overlapping score notes.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct NoteSequence {
    notes: Vec<Note>,
}

impl NoteSequence {
    pub fn new(notes: Vec<Note>) -> Result<Self> {
        for (i, note) in notes.iter().enumerate() {
            if note.midi > 127 {
                return Err(Error::invalid(format!(
                    "note {}: midi {} outside 0-127",
                    i + 1,
                    note.midi
                )));
            }
            validate_span(note.start, note.end)
                .map_err(|e| Error::invalid(format!("note {}: {e}", i + 1)))?;
            if i > 0 && note.start < notes[i - 1].end {
                return Err(Error::invalid(format!(
                    "note {} starts at {} before previous note ends at {}",
                    i + 1,
                    note.start,
                    notes[i - 1].end
                )));
            }
        }
        Ok(Self { notes })
    }

    pub fn notes(&self) -> &[Note] {
        &self.notes
    }

    pub fn len(&self) -> usize {
        self.notes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.notes.is_empty()
    }
}

/// Frame-level features, one row of `dim` values per frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    n_frames: usize,
    dim: usize,
    data: Vec<f64>,
}

impl FeatureMatrix {
    pub fn new(n_frames: usize, dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("feature dim must be >= 1"));
        }
        let expected = n_frames
            .checked_mul(dim)
            .ok_or_else(|| Error::invalid(format!("feature shape {n_frames}x{dim} overflows")))?;
        if data.len() != expected {
            return Err(Error::LengthMismatch {
                what: "feature data vs n_frames*dim",
                left: data.len(),
                right: expected,
            });
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "non-finite feature value at frame {} dim {}",
                i / dim,
                i % dim
            )));
        }
        Ok(Self {
            n_frames,
            dim,
            data,
        })
    }

    pub fn zeros(n_frames: usize, dim: usize) -> Result<Self> {
        Self::new(n_frames, dim, vec![0.0; n_frames * dim])
    }

    pub fn n_frames(&self) -> usize {
        self.n_frames
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, frame: usize) -> &[f64] {
        &self.data[frame * self.dim..(frame + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }

    pub(crate) fn from_parts_unchecked(n_frames: usize, dim: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), n_frames * dim);
        Self {
            n_frames,
            dim,
            data,
        }
    }
}

/// Mono samples at a given rate.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioBuffer {
    samples: Vec<f64>,
    sample_rate: u32,
}

impl AudioBuffer {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::invalid("sample rate must be positive"));
        }
        if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("non-finite sample at index {i}")));
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    pub fn silence(len: usize, sample_rate: u32) -> Result<Self> {
        Self::new(vec![0.0; len], sample_rate)
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }
}
