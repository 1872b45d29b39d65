//! File-level stages shared by the CLI subcommands, and the manifest-driven
//! pipeline that chains them.
//!
//! Manifest format: one `key = value` per line, `#` starts a comment line.
//! Path values are resolved against the manifest's directory.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Component, Path, PathBuf};

use crate::analysis::band_energy_db;
use crate::audioio::{read_wav, write_wav, BitFormat, WavSpec};
use crate::bandcomp::{band_complete_parts, BandCompletionConfig, FULL_RATE};
use crate::bottleneck::{bottleneck, BottleneckConfig};
use crate::domain::{segment_map, FrameGrid, NoteSequence};
use crate::error::{Error, Result};
use crate::fsutil;
use crate::ingest::{
    read_alignment, read_f0, read_features, read_notes, read_technique_segments, write_f0,
    write_features, LabelVocabulary,
};
use crate::pitchdyn::{refine_f0_with_report, GlissandoParams, RefineReport, VibratoParams};
use crate::technique::{build_matrix, read_matrix, write_matrix, TechniqueMatrix};

pub const POOLED_FEATURES_FILE: &str = "features_pooled.sscf";
pub const MATRIX_FILE: &str = "techniques.txt";
pub const REFINED_F0_FILE: &str = "f0_refined.txt";
pub const OUTPUT_WAV_FILE: &str = "output_48k.wav";

// ---------------------------------------------------------------- stages

#[derive(Debug, Clone, PartialEq)]
pub struct PoolSummary {
    pub n_frames: usize,
    pub dim: usize,
    pub segments: usize,
}

/// Reads features and alignment, pools and scales, writes the result.
pub fn pool_files(
    features: &Path,
    alignment: &Path,
    grid: FrameGrid,
    config: &BottleneckConfig,
    out: &Path,
) -> Result<PoolSummary> {
    let x = read_features(features)?;
    let a = read_alignment(alignment)?;
    let pooled = bottleneck(&x, &a, grid, config)?;
    let ids = segment_map(&a, x.n_frames(), grid);
    write_features(out, &pooled)?;
    Ok(PoolSummary {
        n_frames: pooled.n_frames(),
        dim: pooled.dim(),
        segments: ids.last().map_or(0, |&id| id + 1),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatrixSummary {
    pub n_frames: usize,
    /// Active frames per technique, in vocabulary order.
    pub popcounts: Vec<(String, usize)>,
}

impl MatrixSummary {
    fn of(matrix: &TechniqueMatrix) -> Self {
        Self {
            n_frames: matrix.n_frames(),
            popcounts: matrix
                .vocab()
                .names()
                .iter()
                .cloned()
                .zip(matrix.popcounts())
                .collect(),
        }
    }
}

pub fn build_matrix_file(
    segments: &Path,
    vocab: &LabelVocabulary,
    n_frames: usize,
    grid: FrameGrid,
    out: &Path,
) -> Result<MatrixSummary> {
    let file = read_technique_segments(segments, vocab)?;
    let matrix = build_matrix(&file, vocab, n_frames, grid)?;
    write_matrix(out, &matrix)?;
    Ok(MatrixSummary::of(&matrix))
}

pub fn refine_f0_files(
    f0: &Path,
    matrix: &Path,
    notes: Option<&Path>,
    vibrato: &VibratoParams,
    glissando: &GlissandoParams,
    out: &Path,
) -> Result<RefineReport> {
    let contour = read_f0(f0)?;
    let matrix = read_matrix(matrix)?;
    let notes: Option<NoteSequence> = notes.map(read_notes).transpose()?;
    let (refined, report) =
        refine_f0_with_report(&contour, &matrix, notes.as_ref(), vibrato, glissando)?;
    write_f0(out, &refined)?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BandSummary {
    pub clamped: usize,
    pub n_samples: usize,
    /// Energy of the upsampled main branch below / above the cutoff.
    pub main_low_db: f64,
    pub main_high_db: f64,
    /// Energy of the extracted high branch below / above the cutoff.
    pub high_low_db: f64,
    pub high_high_db: f64,
}

pub fn band_complete_files(
    in24: &Path,
    src48: &Path,
    config: &BandCompletionConfig,
    out: &Path,
) -> Result<BandSummary> {
    let (x24, _) = read_wav(in24)?;
    let (x48, _) = read_wav(src48)?;
    let parts = band_complete_parts(&x24, &x48, config)?;
    let nyquist = FULL_RATE as f64 / 2.0;
    let cut = config.cutoff_hz;
    let summary = BandSummary {
        clamped: 0,
        n_samples: parts.output.len(),
        main_low_db: band_energy_db(&parts.upsampled, 0.0, cut)?,
        main_high_db: band_energy_db(&parts.upsampled, cut, nyquist)?,
        high_low_db: band_energy_db(&parts.high_band, 0.0, cut)?,
        high_high_db: band_energy_db(&parts.high_band, cut, nyquist)?,
    };
    let clamped = write_wav(
        out,
        &parts.output,
        &WavSpec::mono(FULL_RATE, BitFormat::Float32),
    )?;
    Ok(BandSummary { clamped, ..summary })
}

// -------------------------------------------------------------- manifest

/// Inputs, output directory and parameter overrides for one pipeline run.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineManifest {
    pub f0: Option<PathBuf>,
    pub alignment: Option<PathBuf>,
    pub notes: Option<PathBuf>,
    pub segments: Option<PathBuf>,
    pub matrix: Option<PathBuf>,
    pub features: Option<PathBuf>,
    pub audio24: Option<PathBuf>,
    pub audio48_src: Option<PathBuf>,
    pub output_dir: PathBuf,
    pub grid: FrameGrid,
    pub bottleneck: BottleneckConfig,
    pub vocab: LabelVocabulary,
    pub vibrato: VibratoParams,
    pub glissando: GlissandoParams,
    pub band: BandCompletionConfig,
}

const PATH_KEYS: [&str; 9] = [
    "f0",
    "alignment",
    "notes",
    "segments",
    "matrix",
    "features",
    "audio24",
    "audio48_src",
    "output_dir",
];

const PARAM_KEYS: [&str; 13] = [
    "lambda",
    "sr",
    "hop",
    "techniques",
    "vibrato_depth",
    "vibrato_rate",
    "vibrato_phase",
    "vibrato_ramp",
    "gliss_sharpness",
    "gliss_window",
    "cutoff",
    "crossfade",
    "fft_size",
];

/// Removes `.` and resolves `..` without touching the file system.
fn normalize(path: &Path) -> PathBuf {
    let mut out = PathBuf::new();
    for c in path.components() {
        match c {
            Component::CurDir => {}
            Component::ParentDir => {
                if !out.pop() {
                    out.push("..");
                }
            }
            other => out.push(other),
        }
    }
    out
}

impl PipelineManifest {
    /// Parses manifest text; relative paths are joined onto `base_dir`.
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let mut entries: BTreeMap<&str, (usize, &str)> = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(line_no, "expected `key = value`"))?;
            let (key, value) = (key.trim(), value.trim());
            if !PATH_KEYS.contains(&key) && !PARAM_KEYS.contains(&key) {
                return Err(Error::parse(
                    line_no,
                    format!(
                        "unknown key {key:?}; expected one of {}, {}",
                        PATH_KEYS.join(", "),
                        PARAM_KEYS.join(", ")
                    ),
                ));
            }
            if value.is_empty() {
                return Err(Error::parse(line_no, format!("empty value for {key}")));
            }
            if entries.insert(key, (line_no, value)).is_some() {
                return Err(Error::parse(line_no, format!("duplicate key {key}")));
            }
        }

        let path = |key: &str| entries.get(key).map(|(_, v)| normalize(&base_dir.join(v)));
        fn num<T: std::str::FromStr>(
            entries: &BTreeMap<&str, (usize, &str)>,
            key: &str,
            default: T,
        ) -> Result<T> {
            match entries.get(key) {
                None => Ok(default),
                Some(&(line, v)) => v.parse().map_err(|_| {
                    Error::parse(line, format!("{key}: cannot parse {v:?} as a number"))
                }),
            }
        }

        let output_dir =
            path("output_dir").ok_or_else(|| Error::invalid("manifest has no output_dir"))?;
        let grid = FrameGrid::new(
            num(&entries, "sr", FrameGrid::DEFAULT_SAMPLE_RATE)?,
            num(&entries, "hop", FrameGrid::DEFAULT_HOP)?,
        )?;
        let bottleneck =
            BottleneckConfig::new(num(&entries, "lambda", BottleneckConfig::DEFAULT_LAMBDA)?)?;
        let vocab = match entries.get("techniques") {
            Some((_, list)) => LabelVocabulary::from_comma_list(list)?,
            None => LabelVocabulary::default(),
        };
        let dv = VibratoParams::default();
        let vibrato = VibratoParams {
            depth_cents: num(&entries, "vibrato_depth", dv.depth_cents)?,
            rate_hz: num(&entries, "vibrato_rate", dv.rate_hz)?,
            phase_rad: num(&entries, "vibrato_phase", dv.phase_rad)?,
            ramp_seconds: num(&entries, "vibrato_ramp", dv.ramp_seconds)?,
        };
        vibrato.validate()?;
        let dg = GlissandoParams::default();
        let glissando = GlissandoParams {
            sharpness: num(&entries, "gliss_sharpness", dg.sharpness)?,
            window_seconds: num(&entries, "gliss_window", dg.window_seconds)?,
        };
        glissando.validate()?;
        let db = BandCompletionConfig::default();
        let band = BandCompletionConfig {
            cutoff_hz: num(&entries, "cutoff", db.cutoff_hz)?,
            crossfade_hz: num(&entries, "crossfade", db.crossfade_hz)?,
            fft_size: num(&entries, "fft_size", db.fft_size)?,
            hop: db.hop,
            window: db.window,
        };
        let band = BandCompletionConfig {
            hop: band.fft_size / 4,
            ..band
        };
        band.stft()?;

        let manifest = Self {
            f0: path("f0"),
            alignment: path("alignment"),
            notes: path("notes"),
            segments: path("segments"),
            matrix: path("matrix"),
            features: path("features"),
            audio24: path("audio24"),
            audio48_src: path("audio48_src"),
            output_dir,
            grid,
            bottleneck,
            vocab,
            vibrato,
            glissando,
            band,
        };
        manifest.check_distinct()?;
        Ok(manifest)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fsutil::read_text(path)?;
        let dir = path.parent().unwrap_or_else(|| Path::new("."));
        Self::parse(&text, dir)
    }

    fn inputs(&self) -> Vec<(&'static str, &PathBuf)> {
        [
            ("f0", &self.f0),
            ("alignment", &self.alignment),
            ("notes", &self.notes),
            ("segments", &self.segments),
            ("matrix", &self.matrix),
            ("features", &self.features),
            ("audio24", &self.audio24),
            ("audio48_src", &self.audio48_src),
        ]
        .into_iter()
        .filter_map(|(k, p)| p.as_ref().map(|p| (k, p)))
        .collect()
    }

    pub fn output_path(&self, file: &str) -> PathBuf {
        self.output_dir.join(file)
    }

    fn check_distinct(&self) -> Result<()> {
        let outputs = [
            POOLED_FEATURES_FILE,
            MATRIX_FILE,
            REFINED_F0_FILE,
            OUTPUT_WAV_FILE,
        ]
        .map(|f| self.output_path(f));
        for (key, input) in self.inputs() {
            if outputs.contains(input) {
                return Err(Error::invalid(format!(
                    "input {key} ({}) would be overwritten by a pipeline output",
                    input.display()
                )));
            }
        }
        Ok(())
    }
}

// -------------------------------------------------------------- pipeline

#[derive(Debug, Clone, PartialEq)]
pub enum StageStatus {
    Done { detail: String },
    Skipped { reason: String },
    External { note: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct StageOutcome {
    pub stage: &'static str,
    pub status: StageStatus,
}

impl fmt::Display for StageOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.status {
            StageStatus::Done { detail } => write!(f, "[{}] done: {detail}", self.stage),
            StageStatus::Skipped { reason } => write!(f, "[{}] skipped: {reason}", self.stage),
            StageStatus::External { note } => write!(f, "[{}] external: {note}", self.stage),
        }
    }
}

fn missing(keys: &[(&str, bool)]) -> Option<String> {
    let absent: Vec<&str> = keys.iter().filter(|(_, ok)| !ok).map(|(k, _)| *k).collect();
    if absent.is_empty() {
        None
    } else {
        Some(format!("manifest has no {}", absent.join(", ")))
    }
}

/// Runs pool, build-matrix, refine-f0, the external acoustic boundary and
/// band-complete in order. A stage whose inputs are absent is reported as
/// skipped; any stage failure aborts the run with that error.
pub fn run_pipeline(m: &PipelineManifest) -> Result<Vec<StageOutcome>> {
    std::fs::create_dir_all(&m.output_dir)
        .map_err(|e| Error::io(format!("create {}", m.output_dir.display()), e))?;
    let mut outcomes = Vec::new();
    let mut push = |stage, status| outcomes.push(StageOutcome { stage, status });

    // 1. semantic bottleneck
    match (&m.features, &m.alignment) {
        (Some(features), Some(alignment)) => {
            let s = pool_files(
                features,
                alignment,
                m.grid,
                &m.bottleneck,
                &m.output_path(POOLED_FEATURES_FILE),
            )?;
            push(
                "pool",
                StageStatus::Done {
                    detail: format!(
                        "{POOLED_FEATURES_FILE}: n_frames={} dim={} segments={} lambda={}",
                        s.n_frames,
                        s.dim,
                        s.segments,
                        m.bottleneck.lambda()
                    ),
                },
            );
        }
        _ => push(
            "pool",
            StageStatus::Skipped {
                reason: missing(&[
                    ("features", m.features.is_some()),
                    ("alignment", m.alignment.is_some()),
                ])
                .unwrap_or_default(),
            },
        ),
    }

    // 2. technique matrix, from segments (sized by the f0 contour) or as given
    let matrix_out = m.output_path(MATRIX_FILE);
    let mut matrix_path: Option<PathBuf> = None;
    if let Some(given) = &m.matrix {
        let matrix = read_matrix(given)?;
        write_matrix(&matrix_out, &matrix)?;
        let s = MatrixSummary::of(&matrix);
        push(
            "build-matrix",
            StageStatus::Done {
                detail: format!(
                    "{MATRIX_FILE}: copied from manifest matrix, {}",
                    describe(&s)
                ),
            },
        );
        matrix_path = Some(matrix_out);
    } else if let (Some(segments), Some(f0)) = (&m.segments, &m.f0) {
        let contour = read_f0(f0)?;
        let s = build_matrix_file(
            segments,
            &m.vocab,
            contour.len(),
            contour.grid(),
            &matrix_out,
        )?;
        push(
            "build-matrix",
            StageStatus::Done {
                detail: format!("{MATRIX_FILE}: {}", describe(&s)),
            },
        );
        matrix_path = Some(matrix_out);
    } else {
        push(
            "build-matrix",
            StageStatus::Skipped {
                reason: missing(&[
                    ("segments or matrix", m.segments.is_some()),
                    ("f0 (sets the frame count)", m.f0.is_some()),
                ])
                .unwrap_or_default(),
            },
        );
    }

    // 3. F0 refinement
    match (&m.f0, &matrix_path) {
        (Some(f0), Some(matrix)) => {
            let r = refine_f0_files(
                f0,
                matrix,
                m.notes.as_deref(),
                &m.vibrato,
                &m.glissando,
                &m.output_path(REFINED_F0_FILE),
            )?;
            push(
                "refine-f0",
                StageStatus::Done {
                    detail: format!(
                        "{REFINED_F0_FILE}: vibrato_frames={} glissando_frames={}",
                        r.vibrato_frames, r.glissando_frames
                    ),
                },
            );
        }
        _ => push(
            "refine-f0",
            StageStatus::Skipped {
                reason: missing(&[
                    ("f0", m.f0.is_some()),
                    ("technique matrix", matrix_path.is_some()),
                ])
                .unwrap_or_default(),
            },
        ),
    }

    // 4. the acoustic model and vocoder are not part of this toolkit
    push(
        "acoustic-model",
        StageStatus::External {
            note: format!(
                "condition your acoustic model on {POOLED_FEATURES_FILE} and {REFINED_F0_FILE}; \
                 its 24 kHz waveform is the manifest's audio24, and a 48 kHz rendering of \
                 the same input is audio48_src"
            ),
        },
    );

    // 5. band completion
    match (&m.audio24, &m.audio48_src) {
        (Some(a24), Some(a48)) => {
            let s = band_complete_files(a24, a48, &m.band, &m.output_path(OUTPUT_WAV_FILE))?;
            push(
                "band-complete",
                StageStatus::Done {
                    detail: format!("{OUTPUT_WAV_FILE}: {}", describe_band(&s, m.band.cutoff_hz)),
                },
            );
        }
        _ => push(
            "band-complete",
            StageStatus::Skipped {
                reason: format!(
                    "{}; pipeline stops after refine-f0",
                    missing(&[
                        ("audio24", m.audio24.is_some()),
                        ("audio48_src", m.audio48_src.is_some()),
                    ])
                    .unwrap_or_default()
                ),
            },
        ),
    }
    Ok(outcomes)
}

pub fn describe(s: &MatrixSummary) -> String {
    let counts: Vec<String> = s
        .popcounts
        .iter()
        .map(|(k, n)| format!("{k}={n}"))
        .collect();
    format!("n_frames={} {}", s.n_frames, counts.join(" "))
}

pub fn describe_band(s: &BandSummary, cutoff: f64) -> String {
    format!(
        "samples={} clamped={} upsampled[<{cutoff:.0}]={:.2}dB upsampled[>={cutoff:.0}]={:.2}dB \
         high_band[<{cutoff:.0}]={:.2}dB high_band[>={cutoff:.0}]={:.2}dB",
        s.n_samples, s.clamped, s.main_low_db, s.main_high_db, s.high_low_db, s.high_high_db
    )
}
