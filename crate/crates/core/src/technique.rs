//! Frame-level multi-hot technique matrix.
//!
//! Text format: a header naming the rows, then one line of `0`/`1`
//! characters per technique.
//!
//! ```text
//! #techniques=vibrato,breathy n_frames=5
//! 00110
//! 01100
//! ```

use std::fmt::Write as _;
use std::path::Path;

use crate::domain::{seconds_to_frame_span, FrameGrid};
use crate::error::{Error, Result};
use crate::fsutil;
use crate::ingest::{LabelVocabulary, TechniqueSegmentFile};

/// K×N binary matrix; row `k` is technique `vocab.names()[k]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TechniqueMatrix {
    vocab: LabelVocabulary,
    n_frames: usize,
    bits: Vec<bool>,
}

impl TechniqueMatrix {
    pub fn zeros(vocab: LabelVocabulary, n_frames: usize) -> Self {
        let bits = vec![false; vocab.len() * n_frames];
        Self {
            vocab,
            n_frames,
            bits,
        }
    }

    /// Builds from explicit rows, one per vocabulary entry.
    pub fn from_rows(vocab: LabelVocabulary, rows: Vec<Vec<bool>>) -> Result<Self> {
        if rows.len() != vocab.len() {
            return Err(Error::LengthMismatch {
                what: "matrix rows vs techniques",
                left: rows.len(),
                right: vocab.len(),
            });
        }
        let n_frames = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != n_frames) {
            return Err(Error::LengthMismatch {
                what: "matrix row length",
                left: bad.len(),
                right: n_frames,
            });
        }
        Ok(Self {
            vocab,
            n_frames,
            bits: rows.into_iter().flatten().collect(),
        })
    }

    pub fn vocab(&self) -> &LabelVocabulary {
        &self.vocab
    }

    pub fn n_techniques(&self) -> usize {
        self.vocab.len()
    }

    pub fn n_frames(&self) -> usize {
        self.n_frames
    }

    pub fn get(&self, technique: usize, frame: usize) -> bool {
        self.bits[technique * self.n_frames + frame]
    }

    pub fn set(&mut self, technique: usize, frame: usize, on: bool) {
        self.bits[technique * self.n_frames + frame] = on;
    }

    pub fn row(&self, technique: usize) -> &[bool] {
        &self.bits[technique * self.n_frames..(technique + 1) * self.n_frames]
    }

    /// True when no technique is active at `frame`.
    pub fn frame_is_empty(&self, frame: usize) -> bool {
        (0..self.n_techniques()).all(|k| !self.get(k, frame))
    }

    /// Number of active frames per technique, in vocabulary order.
    pub fn popcounts(&self) -> Vec<usize> {
        (0..self.n_techniques())
            .map(|k| self.row(k).iter().filter(|&&b| b).count())
            .collect()
    }

    /// Row for `technique` as an owned mask, or `None` if the vocabulary
    /// lacks it.
    pub fn try_mask(&self, technique: &str) -> Option<Vec<bool>> {
        self.vocab.index_of(technique).map(|k| self.row(k).to_vec())
    }
}

/// Marks frame `n` of row `k` when `n` falls in the frame span of some
/// segment of technique `k`. Spans past `n_frames` are clipped.
pub fn build_matrix(
    segments: &TechniqueSegmentFile,
    vocab: &LabelVocabulary,
    n_frames: usize,
    grid: FrameGrid,
) -> Result<TechniqueMatrix> {
    let mut matrix = TechniqueMatrix::zeros(vocab.clone(), n_frames);
    for (name, spans) in segments.groups() {
        let k = vocab.require(name)?;
        for s in spans {
            let span = seconds_to_frame_span(s.start, s.end, grid)?;
            for n in span.start.min(n_frames)..span.end.min(n_frames) {
                matrix.set(k, n, true);
            }
        }
    }
    Ok(matrix)
}

/// The per-frame mask for one technique.
pub fn mask(matrix: &TechniqueMatrix, technique: &str) -> Result<Vec<bool>> {
    let k = matrix.vocab.require(technique)?;
    Ok(matrix.row(k).to_vec())
}

pub fn format_matrix(matrix: &TechniqueMatrix) -> String {
    let mut out = String::with_capacity((matrix.n_frames + 1) * (matrix.n_techniques() + 1) + 64);
    let _ = writeln!(
        out,
        "#techniques={} n_frames={}",
        matrix.vocab, matrix.n_frames
    );
    for k in 0..matrix.n_techniques() {
        out.extend(matrix.row(k).iter().map(|&b| if b { '1' } else { '0' }));
        out.push('\n');
    }
    out
}

fn parse_matrix_header(line: &str) -> Result<(LabelVocabulary, usize)> {
    let bad = || {
        Error::Format(format!(
            "expected header `#techniques=<comma list> n_frames=<N>`, found {line:?}"
        ))
    };
    let mut tokens = line.split(' ');
    let names = tokens
        .next()
        .and_then(|t| t.strip_prefix("#techniques="))
        .ok_or_else(bad)?;
    let n_frames = tokens
        .next()
        .and_then(|t| t.strip_prefix("n_frames="))
        .and_then(|v| v.parse::<usize>().ok())
        .ok_or_else(bad)?;
    if tokens.next().is_some() {
        return Err(bad());
    }
    let vocab = LabelVocabulary::from_comma_list(names)
        .map_err(|e| Error::Format(format!("technique list: {e}")))?;
    Ok((vocab, n_frames))
}

pub fn parse_matrix(text: &str) -> Result<TechniqueMatrix> {
    let body = text.strip_suffix('\n').unwrap_or(text);
    let mut lines = body.split('\n').map(|l| l.strip_suffix('\r').unwrap_or(l));
    let header = lines
        .next()
        .filter(|l| l.starts_with('#'))
        .ok_or_else(|| Error::Format("missing `#techniques=... n_frames=...` header".into()))?;
    let (vocab, n_frames) = parse_matrix_header(header)?;

    let rows: Vec<&str> = lines.collect();
    if rows.len() != vocab.len() {
        return Err(Error::Format(format!(
            "header names {} techniques but {} rows follow",
            vocab.len(),
            rows.len()
        )));
    }
    let mut bits = Vec::with_capacity(vocab.len() * n_frames.min(1 << 24));
    for (k, row) in rows.iter().enumerate() {
        let line = k + 2;
        if row.len() != n_frames {
            return Err(Error::parse(
                line,
                format!(
                    "row has {} columns, header says n_frames={n_frames}",
                    row.len()
                ),
            ));
        }
        for (n, c) in row.bytes().enumerate() {
            bits.push(match c {
                b'0' => false,
                b'1' => true,
                _ => {
                    return Err(Error::parse(
                        line,
                        format!("column {}: expected '0' or '1'", n + 1),
                    ))
                }
            });
        }
    }
    Ok(TechniqueMatrix {
        vocab,
        n_frames,
        bits,
    })
}

pub fn read_matrix(path: &Path) -> Result<TechniqueMatrix> {
    parse_matrix(&fsutil::read_text(path)?)
}

pub fn write_matrix(path: &Path, matrix: &TechniqueMatrix) -> Result<()> {
    fsutil::write_atomic(path, format_matrix(matrix).as_bytes())
}
