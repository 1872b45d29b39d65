//! Synthetic inputs shared by the integration tests.
#![allow(dead_code)]

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use stylekit::audioio::{write_wav, BitFormat, WavSpec};
use stylekit::ingest::{format_alignment, format_notes, write_f0, write_features};
use stylekit::{
    AudioBuffer, F0Contour, FeatureMatrix, FrameGrid, Note, NoteSequence, PhonemeAlignment,
    PhonemeSegment,
};

pub fn sine(freq: f64, rate: u32, seconds: f64, amp: f64) -> Vec<f64> {
    let n = (seconds * rate as f64).round() as usize;
    (0..n)
        .map(|i| amp * (2.0 * PI * freq * i as f64 / rate as f64).sin())
        .collect()
}

pub fn frames_for(seconds: f64, grid: FrameGrid) -> usize {
    (seconds * grid.frame_rate()).ceil() as usize
}

/// Paths of a complete synthetic pipeline input set.
pub struct Fixture {
    pub dir: PathBuf,
    pub f0: PathBuf,
    pub alignment: PathBuf,
    pub notes: PathBuf,
    pub segments: PathBuf,
    pub features: PathBuf,
    pub audio24: PathBuf,
    pub audio48: PathBuf,
}

impl Fixture {
    /// Manifest text with every input; `output_dir` is relative to `dir`.
    pub fn manifest(&self, output_dir: &str, with_audio: bool) -> String {
        let mut text = format!(
            "# synthetic clip\nf0 = f0.txt\nalignment = alignment.tsv\nnotes = notes.tsv\n\
             segments = techniques.tsv\nfeatures = features.sscf\noutput_dir = {output_dir}\n"
        );
        if with_audio {
            text.push_str("audio24 = main24.wav\naudio48_src = aux48.wav\n");
        }
        text
    }

    pub fn write_manifest(&self, name: &str, output_dir: &str, with_audio: bool) -> PathBuf {
        let path = self.dir.join(name);
        std::fs::write(&path, self.manifest(output_dir, with_audio)).unwrap();
        path
    }
}

/// Writes a `seconds`-long clip's worth of inputs into `dir`.
pub fn write_fixture(dir: &Path, seconds: f64) -> Fixture {
    let grid = FrameGrid::default();
    let n = frames_for(seconds, grid);
    let dim = 256;

    let data: Vec<f64> = (0..n * dim)
        .map(|i| (((i * 7919) % 1000) as f64 / 500.0 - 1.0) as f32 as f64)
        .collect();
    let features = FeatureMatrix::new(n, dim, data).unwrap();

    let phoneme = 0.2;
    let segs: Vec<PhonemeSegment> = (0..(seconds / phoneme) as usize)
        .map(|i| {
            PhonemeSegment::new(
                format!("p{}", i % 7),
                i as f64 * phoneme,
                (i + 1) as f64 * phoneme,
            )
        })
        .collect();
    let alignment = PhonemeAlignment::new(segs).unwrap();

    let notes = NoteSequence::new(
        (0..seconds as usize)
            .map(|i| Note {
                midi: if i % 2 == 0 { 57 } else { 60 },
                start: i as f64,
                end: (i + 1) as f64,
            })
            .collect(),
    )
    .unwrap();
    let f0_values: Vec<f64> = (0..n)
        .map(|i| {
            let t = grid.frame_time(i);
            if (t % 2.5) < 0.05 {
                0.0
            } else {
                let note = &notes.notes()[(t as usize).min(notes.len() - 1)];
                note.hz()
            }
        })
        .collect();
    let f0 = F0Contour::from_values(f0_values, grid).unwrap();

    let segments = "vibrato\t1.2\t2.8\nglissando\t2.8\t3.2\nbreathy\t4.0\t5.0\nvibrato\t6.1\t7.9\nglissando\t5.9\t6.1\n";

    let x24 = AudioBuffer::new(
        sine(220.0, 24_000, seconds, 0.3)
            .iter()
            .zip(sine(440.0, 24_000, seconds, 0.1))
            .map(|(a, b)| a + b)
            .collect(),
        24_000,
    )
    .unwrap();
    let x48 = AudioBuffer::new(
        sine(220.0, 48_000, seconds, 0.3)
            .iter()
            .zip(sine(12_000.0, 48_000, seconds, 0.05))
            .map(|(a, b)| a + b)
            .collect(),
        48_000,
    )
    .unwrap();

    let fx = Fixture {
        dir: dir.to_path_buf(),
        f0: dir.join("f0.txt"),
        alignment: dir.join("alignment.tsv"),
        notes: dir.join("notes.tsv"),
        segments: dir.join("techniques.tsv"),
        features: dir.join("features.sscf"),
        audio24: dir.join("main24.wav"),
        audio48: dir.join("aux48.wav"),
    };
    write_features(&fx.features, &features).unwrap();
    std::fs::write(&fx.alignment, format_alignment(&alignment)).unwrap();
    std::fs::write(&fx.notes, format_notes(&notes)).unwrap();
    std::fs::write(&fx.segments, segments).unwrap();
    write_f0(&fx.f0, &f0).unwrap();
    write_wav(&fx.audio24, &x24, &WavSpec::mono(24_000, BitFormat::Pcm16)).unwrap();
    write_wav(&fx.audio48, &x48, &WavSpec::mono(48_000, BitFormat::Pcm24)).unwrap();
    fx
}
