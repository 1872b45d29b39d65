use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use clap::{Args, Parser, Subcommand};

use stylekit::analysis::{band_energy_db, estimate_vibrato};
use stylekit::audioio::read_wav;
use stylekit::bandcomp::BandCompletionConfig;
use stylekit::bottleneck::BottleneckConfig;
use stylekit::ingest::{read_f0, LabelVocabulary};
use stylekit::pipeline::{self, PipelineManifest, StageOutcome};
use stylekit::pitchdyn::{GlissandoParams, VibratoParams};
use stylekit::{seconds_to_frame_span, Error, FrameGrid, Result};

#[derive(Parser, Debug)]
#[command(
    name = "stylekit",
    version,
    about = "Singing style conversion signal toolkit"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Pool content features over phoneme spans and scale them by lambda.
    Pool {
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        alignment: PathBuf,
        #[arg(long, default_value_t = BottleneckConfig::DEFAULT_LAMBDA)]
        lambda: f64,
        #[arg(long, default_value_t = FrameGrid::DEFAULT_SAMPLE_RATE)]
        sr: u32,
        #[arg(long, default_value_t = FrameGrid::DEFAULT_HOP)]
        hop: u32,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Rasterize technique segments into a per-frame matrix.
    BuildMatrix {
        #[arg(long)]
        segments: PathBuf,
        /// Take the frame count and grid from this F0 file.
        #[arg(long, conflicts_with = "n_frames")]
        f0: Option<PathBuf>,
        #[arg(long, required_unless_present = "f0")]
        n_frames: Option<usize>,
        /// Comma-separated technique vocabulary (row order).
        #[arg(long)]
        techniques: Option<String>,
        #[arg(long, default_value_t = FrameGrid::DEFAULT_SAMPLE_RATE)]
        sr: u32,
        #[arg(long, default_value_t = FrameGrid::DEFAULT_HOP)]
        hop: u32,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Apply vibrato and glissando where the technique matrix enables them.
    RefineF0 {
        #[arg(long)]
        f0: PathBuf,
        #[arg(long)]
        matrix: PathBuf,
        #[arg(long)]
        notes: Option<PathBuf>,
        #[command(flatten)]
        vibrato: VibratoArgs,
        #[command(flatten)]
        glissando: GlissandoArgs,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Upsample a 24 kHz signal and add the high band of a 48 kHz one.
    BandComplete {
        #[arg(long)]
        in24: PathBuf,
        #[arg(long)]
        src48: PathBuf,
        #[arg(long, default_value_t = 10_000.0)]
        cutoff: f64,
        #[arg(long, default_value_t = 1_000.0)]
        crossfade: f64,
        #[arg(long, default_value_t = 2048)]
        fft_size: usize,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Measurements for manual inspection.
    Measure {
        #[command(subcommand)]
        what: Measure,
    },
    /// Run pool, build-matrix, refine-f0 and band-complete from manifests.
    Pipeline {
        #[arg(long, required = true)]
        manifest: Vec<PathBuf>,
        /// Manifests processed concurrently.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
}

#[derive(Args, Debug)]
struct VibratoArgs {
    #[arg(long, default_value_t = VibratoParams::default().depth_cents)]
    vibrato_depth: f64,
    #[arg(long, default_value_t = VibratoParams::default().rate_hz)]
    vibrato_rate: f64,
    #[arg(long, default_value_t = VibratoParams::default().phase_rad)]
    vibrato_phase: f64,
    #[arg(long, default_value_t = VibratoParams::default().ramp_seconds)]
    vibrato_ramp: f64,
}

#[derive(Args, Debug)]
struct GlissandoArgs {
    #[arg(long, default_value_t = GlissandoParams::default().sharpness)]
    gliss_sharpness: f64,
    #[arg(long, default_value_t = GlissandoParams::default().window_seconds)]
    gliss_window: f64,
}

#[derive(Subcommand, Debug)]
enum Measure {
    /// Vibrato rate and depth of an F0 file over a time span.
    Vibrato {
        #[arg(long)]
        f0: PathBuf,
        /// Span start in seconds (default: first frame).
        #[arg(long)]
        start: Option<f64>,
        /// Span end in seconds (default: last frame).
        #[arg(long)]
        end: Option<f64>,
    },
    /// Energy of a WAV file in a frequency band.
    Band {
        #[arg(long)]
        wav: PathBuf,
        #[arg(long, default_value_t = 0.0)]
        lo: f64,
        /// Upper edge in Hz (default: Nyquist).
        #[arg(long)]
        hi: Option<f64>,
    },
}

fn same_path(a: &Path, b: &Path) -> bool {
    let abs = |p: &Path| std::path::absolute(p).unwrap_or_else(|_| p.to_path_buf());
    match (std::fs::canonicalize(a), std::fs::canonicalize(b)) {
        (Ok(x), Ok(y)) => x == y,
        _ => abs(a) == abs(b),
    }
}

fn distinct_output(output: &Path, inputs: &[&Path]) -> Result<()> {
    for input in inputs {
        if same_path(output, input) {
            return Err(Error::Invalid(format!(
                "output {} is also an input; refusing to overwrite it",
                output.display()
            )));
        }
    }
    Ok(())
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Pool {
            features,
            alignment,
            lambda,
            sr,
            hop,
            output,
        } => {
            distinct_output(&output, &[&features, &alignment])?;
            let grid = FrameGrid::new(sr, hop)?;
            let s = pipeline::pool_files(
                &features,
                &alignment,
                grid,
                &BottleneckConfig::new(lambda)?,
                &output,
            )?;
            println!(
                "n_frames={} dim={} segments={}",
                s.n_frames, s.dim, s.segments
            );
        }
        Command::BuildMatrix {
            segments,
            f0,
            n_frames,
            techniques,
            sr,
            hop,
            output,
        } => {
            let vocab = match techniques {
                Some(list) => LabelVocabulary::from_comma_list(&list)?,
                None => LabelVocabulary::default(),
            };
            let (n, grid) = match (&f0, n_frames) {
                (Some(path), _) => {
                    distinct_output(&output, &[path])?;
                    let c = read_f0(path)?;
                    (c.len(), c.grid())
                }
                (None, Some(n)) => (n, FrameGrid::new(sr, hop)?),
                (None, None) => unreachable!("clap requires --f0 or --n-frames"),
            };
            distinct_output(&output, &[&segments])?;
            let s = pipeline::build_matrix_file(&segments, &vocab, n, grid, &output)?;
            println!("{}", pipeline::describe(&s));
        }
        Command::RefineF0 {
            f0,
            matrix,
            notes,
            vibrato,
            glissando,
            output,
        } => {
            let mut inputs = vec![f0.as_path(), matrix.as_path()];
            inputs.extend(notes.as_deref());
            distinct_output(&output, &inputs)?;
            let vib = VibratoParams {
                depth_cents: vibrato.vibrato_depth,
                rate_hz: vibrato.vibrato_rate,
                phase_rad: vibrato.vibrato_phase,
                ramp_seconds: vibrato.vibrato_ramp,
            };
            let gl = GlissandoParams {
                sharpness: glissando.gliss_sharpness,
                window_seconds: glissando.gliss_window,
            };
            let r = pipeline::refine_f0_files(&f0, &matrix, notes.as_deref(), &vib, &gl, &output)?;
            println!(
                "vibrato_frames={} glissando_frames={}",
                r.vibrato_frames, r.glissando_frames
            );
        }
        Command::BandComplete {
            in24,
            src48,
            cutoff,
            crossfade,
            fft_size,
            output,
        } => {
            distinct_output(&output, &[&in24, &src48])?;
            let config = BandCompletionConfig {
                cutoff_hz: cutoff,
                crossfade_hz: crossfade,
                fft_size,
                hop: fft_size / 4,
                ..BandCompletionConfig::default()
            };
            let s = pipeline::band_complete_files(&in24, &src48, &config, &output)?;
            println!("{}", pipeline::describe_band(&s, cutoff));
        }
        Command::Measure { what } => measure(what)?,
        Command::Pipeline { .. } => unreachable!("handled in main"),
    }
    Ok(())
}

fn measure(what: Measure) -> Result<()> {
    match what {
        Measure::Vibrato { f0, start, end } => {
            let c = read_f0(&f0)?;
            let grid = c.grid();
            let a = match start {
                Some(s) => seconds_to_frame_span(s, s + grid.frame_duration(), grid)?.start,
                None => 0,
            };
            let b = match end {
                Some(e) => seconds_to_frame_span(e, e + grid.frame_duration(), grid)?.start,
                None => c.len(),
            };
            let est = estimate_vibrato(&c, a..b.min(c.len()))?;
            println!(
                "rate_hz={:.4} depth_cents={:.4} frames={}",
                est.rate_hz, est.depth_cents, est.frames_analyzed
            );
        }
        Measure::Band { wav, lo, hi } => {
            let (x, _) = read_wav(&wav)?;
            let hi = hi.unwrap_or(x.sample_rate() as f64 / 2.0);
            let db = band_energy_db(&x, lo, hi)?;
            println!("band=[{lo},{hi}) energy_db={db:.4}");
        }
    }
    Ok(())
}

/// Runs every manifest, prints its stage outcomes or its error line, and
/// returns the exit code of the first failing manifest (in argument order).
fn run_manifests(paths: &[PathBuf], jobs: usize) -> Option<i32> {
    type JobResult = Result<Vec<StageOutcome>>;
    let results: Vec<Mutex<Option<JobResult>>> = paths.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let workers = jobs.clamp(1, paths.len().max(1));
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(path) = paths.get(i) else { break };
                let r = PipelineManifest::read(path).and_then(|m| pipeline::run_pipeline(&m));
                *results[i].lock().unwrap_or_else(|e| e.into_inner()) = Some(r);
            });
        }
    });

    let mut failure = None;
    for (path, slot) in paths.iter().zip(results) {
        let result = slot
            .into_inner()
            .unwrap_or_else(|e| e.into_inner())
            .expect("every manifest is processed");
        match result {
            Ok(outcomes) => {
                println!("manifest {}", path.display());
                for o in outcomes {
                    if matches!(o.status, pipeline::StageStatus::Skipped { .. }) {
                        log::warn!("{}: {o}", path.display());
                    }
                    println!("  {o}");
                }
            }
            Err(e) => {
                report(&e, Some(path));
                failure.get_or_insert(e.class().exit_code());
            }
        }
    }
    failure
}

fn report(e: &Error, manifest: Option<&Path>) {
    let class = e.class();
    let msg = e.to_string().replace(['\n', '\r'], " ");
    let context = manifest.map_or(String::new(), |p| format!("manifest {}: ", p.display()));
    eprintln!(
        "stylekit: error kind={} exit={}: {context}{msg}",
        class.as_str(),
        class.exit_code()
    );
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    if let Command::Pipeline { manifest, jobs } = &cli.command {
        return match run_manifests(manifest, *jobs) {
            None => ExitCode::SUCCESS,
            Some(code) => ExitCode::from(code as u8),
        };
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            report(&e, None);
            ExitCode::from(e.class().exit_code() as u8)
        }
    }
}
