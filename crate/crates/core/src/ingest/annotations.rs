//! Tab-separated time annotations: phoneme alignments, technique segments and
//! score notes. Every record is `first<TAB>start<TAB>end` in decimal seconds;
//! blank lines and lines starting with `#` are ignored.

use std::fmt::Write as _;
use std::path::Path;

use crate::domain::{Note, NoteSequence, PhonemeAlignment, PhonemeSegment};
use crate::error::{Error, Result};
use crate::fsutil;
use crate::ingest::vocab::LabelVocabulary;

struct Record<'a> {
    line: usize,
    first: &'a str,
    start: f64,
    end: f64,
}

fn records(text: &str) -> impl Iterator<Item = Result<Record<'_>>> {
    text.split('\n').enumerate().filter_map(|(i, raw)| {
        let line = i + 1;
        let raw = raw.strip_suffix('\r').unwrap_or(raw);
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            return None;
        }
        Some(parse_record(line, raw))
    })
}

fn parse_record(line: usize, raw: &str) -> Result<Record<'_>> {
    let fields: Vec<&str> = raw.split('\t').collect();
    if fields.len() != 3 {
        return Err(Error::parse(
            line,
            format!("expected 3 tab-separated fields, found {}", fields.len()),
        ));
    }
    let first = fields[0].trim();
    if first.is_empty() {
        return Err(Error::parse(line, "empty label"));
    }
    let start = parse_seconds(line, "start", fields[1])?;
    let end = parse_seconds(line, "end", fields[2])?;
    if end <= start {
        return Err(Error::invalid(format!("end ≤ start at line {line}")));
    }
    Ok(Record {
        line,
        first,
        start,
        end,
    })
}

fn parse_seconds(line: usize, what: &str, field: &str) -> Result<f64> {
    let field = field.trim();
    let v: f64 = field.parse().map_err(|_| {
        Error::parse(
            line,
            format!("{what} time {field:?} is not a decimal number"),
        )
    })?;
    if !v.is_finite() {
        return Err(Error::parse(
            line,
            format!("{what} time {field:?} is not finite"),
        ));
    }
    if v < 0.0 {
        return Err(Error::invalid(format!(
            "negative {what} time {v} at line {line}"
        )));
    }
    Ok(v)
}

fn push_row(out: &mut String, first: &str, start: f64, end: f64) {
    // Writing to a String cannot fail.
    let _ = writeln!(out, "{first}\t{start:.6}\t{end:.6}");
}

pub fn parse_alignment(text: &str) -> Result<PhonemeAlignment> {
    let mut segments: Vec<PhonemeSegment> = Vec::new();
    for rec in records(text) {
        let rec = rec?;
        if let Some(prev) = segments.last() {
            if rec.start < prev.end {
                return Err(Error::invalid(format!(
                    "segment `{}` at line {} starts at {} before `{}` ends at {}",
                    rec.first, rec.line, rec.start, prev.label, prev.end
                )));
            }
        }
        segments.push(PhonemeSegment::new(rec.first, rec.start, rec.end));
    }
    PhonemeAlignment::new(segments)
}

pub fn format_alignment(alignment: &PhonemeAlignment) -> String {
    let mut out = String::new();
    for seg in alignment.segments() {
        push_row(&mut out, &seg.label, seg.start, seg.end);
    }
    out
}

pub fn read_alignment(path: &Path) -> Result<PhonemeAlignment> {
    parse_alignment(&fsutil::read_text(path)?)
}

/// One technique occurrence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TechniqueSpan {
    pub start: f64,
    pub end: f64,
}

/// Technique segments grouped by technique, in vocabulary order, each group
/// sorted by start time.
#[derive(Debug, Clone, PartialEq)]
pub struct TechniqueSegmentFile {
    groups: Vec<(String, Vec<TechniqueSpan>)>,
}

impl TechniqueSegmentFile {
    /// Groups `rows` by technique and checks them against `vocab`.
    pub fn new<S: AsRef<str>>(
        rows: impl IntoIterator<Item = (S, f64, f64)>,
        vocab: &LabelVocabulary,
    ) -> Result<Self> {
        let mut per_index: Vec<Vec<TechniqueSpan>> = vec![Vec::new(); vocab.len()];
        for (name, start, end) in rows {
            crate::domain::validate_span(start, end)?;
            let k = vocab.require(name.as_ref())?;
            per_index[k].push(TechniqueSpan { start, end });
        }
        Self::from_groups(per_index, vocab)
    }

    fn from_groups(per_index: Vec<Vec<TechniqueSpan>>, vocab: &LabelVocabulary) -> Result<Self> {
        let mut groups = Vec::new();
        for (name, mut spans) in vocab.names().iter().zip(per_index) {
            if spans.is_empty() {
                continue;
            }
            spans.sort_by(|a, b| a.start.total_cmp(&b.start));
            if let Some(w) = spans.windows(2).find(|w| w[1].start < w[0].end) {
                return Err(Error::invalid(format!(
                    "`{name}` segments overlap: [{}, {}) and [{}, {})",
                    w[0].start, w[0].end, w[1].start, w[1].end
                )));
            }
            groups.push((name.clone(), spans));
        }
        Ok(Self { groups })
    }

    pub fn empty() -> Self {
        Self { groups: Vec::new() }
    }

    /// `(technique, spans)` pairs in vocabulary order; techniques without
    /// segments are omitted.
    pub fn groups(&self) -> &[(String, Vec<TechniqueSpan>)] {
        &self.groups
    }

    pub fn spans(&self, technique: &str) -> &[TechniqueSpan] {
        self.groups
            .iter()
            .find(|(name, _)| name == technique)
            .map_or(&[], |(_, spans)| spans.as_slice())
    }

    pub fn len(&self) -> usize {
        self.groups.iter().map(|(_, s)| s.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }
}

pub fn parse_technique_segments(
    text: &str,
    vocab: &LabelVocabulary,
) -> Result<TechniqueSegmentFile> {
    let mut per_index: Vec<Vec<(usize, TechniqueSpan)>> = vec![Vec::new(); vocab.len()];
    for rec in records(text) {
        let rec = rec?;
        let k = vocab.require(rec.first)?;
        per_index[k].push((
            rec.line,
            TechniqueSpan {
                start: rec.start,
                end: rec.end,
            },
        ));
    }
    // Report within-technique overlap against the offending line.
    for (name, rows) in vocab.names().iter().zip(per_index.iter_mut()) {
        rows.sort_by(|a, b| a.1.start.total_cmp(&b.1.start));
        if let Some(w) = rows.windows(2).find(|w| w[1].1.start < w[0].1.end) {
            return Err(Error::invalid(format!(
                "`{name}` segment at line {} overlaps the one at line {}",
                w[1].0, w[0].0
            )));
        }
    }
    let groups = per_index
        .into_iter()
        .map(|rows| rows.into_iter().map(|(_, s)| s).collect())
        .collect();
    TechniqueSegmentFile::from_groups(groups, vocab)
}

pub fn format_technique_segments(file: &TechniqueSegmentFile) -> String {
    let mut out = String::new();
    for (name, spans) in file.groups() {
        for s in spans {
            push_row(&mut out, name, s.start, s.end);
        }
    }
    out
}

pub fn read_technique_segments(
    path: &Path,
    vocab: &LabelVocabulary,
) -> Result<TechniqueSegmentFile> {
    parse_technique_segments(&fsutil::read_text(path)?, vocab)
}

pub fn parse_notes(text: &str) -> Result<NoteSequence> {
    let mut notes: Vec<Note> = Vec::new();
    for rec in records(text) {
        let rec = rec?;
        let midi: i64 = rec.first.parse().map_err(|_| {
            Error::parse(
                rec.line,
                format!("midi pitch {:?} is not an integer", rec.first),
            )
        })?;
        if !(0..=127).contains(&midi) {
            return Err(Error::invalid(format!(
                "midi pitch {midi} outside 0-127 at line {}",
                rec.line
            )));
        }
        if let Some(prev) = notes.last() {
            if rec.start < prev.end {
                return Err(Error::invalid(format!(
                    "note at line {} starts at {} before the previous note ends at {}",
                    rec.line, rec.start, prev.end
                )));
            }
        }
        notes.push(Note {
            midi: midi as u8,
            start: rec.start,
            end: rec.end,
        });
    }
    NoteSequence::new(notes)
}

pub fn format_notes(notes: &NoteSequence) -> String {
    let mut out = String::new();
    for n in notes.notes() {
        push_row(&mut out, &n.midi.to_string(), n.start, n.end);
    }
    out
}

pub fn read_notes(path: &Path) -> Result<NoteSequence> {
    parse_notes(&fsutil::read_text(path)?)
}
