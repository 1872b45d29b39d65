//! Signal toolkit for style-controllable singing voice conversion.
//!
//! - [`bottleneck`]: phoneme-span mean pooling and down-scaling of content
//!   features.
//! - [`technique`]: per-frame multi-hot technique matrices.
//! - [`pitchdyn`]: vibrato and glissando applied to F0 contours where the
//!   matrix says so.
//! - [`bandcomp`]: 24 kHz to 48 kHz band completion.
//! - [`ingest`] and [`audioio`]: file formats.
//! - [`analysis`]: independent measurements used to check the above.
//! - [`pipeline`]: file-level stages and the manifest-driven runner behind
//!   the `stylekit` binary.

pub mod analysis;
pub mod audioio;
pub mod bandcomp;
pub mod bottleneck;
pub mod domain;
pub mod error;
pub mod fsutil;
pub mod ingest;
pub mod pipeline;
pub mod pitchdyn;
pub mod technique;

pub use domain::{
    midi_to_hz, seconds_to_frame_span, segment_map, AudioBuffer, F0Contour, FeatureMatrix,
    FrameGrid, Note, NoteSequence, PhonemeAlignment, PhonemeSegment,
};
pub use error::{Error, ErrorClass, Result};
