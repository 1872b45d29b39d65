//! Parsers and serializers for every on-disk artifact the pipeline reads or
//! writes, except audio (see [`crate::audioio`]).

mod annotations;
mod f0;
mod features;
mod vocab;

pub use annotations::{
    format_alignment, format_notes, format_technique_segments, parse_alignment, parse_notes,
    parse_technique_segments, read_alignment, read_notes, read_technique_segments,
    TechniqueSegmentFile, TechniqueSpan,
};
pub use f0::{format_f0, parse_f0, read_f0, write_f0};
pub use features::{
    decode_features, encode_features, read_features, write_features, FEATURE_HEADER_LEN,
    FEATURE_MAGIC, FEATURE_VERSION,
};
pub use vocab::{LabelVocabulary, DEFAULT_TECHNIQUES, GLISSANDO, VIBRATO};
