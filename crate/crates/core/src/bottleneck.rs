//! Boundary-aware semantic bottleneck: every frame's feature row is replaced
//! by the mean over the frames of its phoneme segment, then the pooled
//! features are scaled down by a global factor λ.

use std::collections::HashMap;

use crate::domain::{
    seconds_to_frame_span, segment_map, FeatureMatrix, FrameGrid, PhonemeAlignment,
};
use crate::error::{Error, Result};

/// How far (in frames) an alignment may run past the end of the features
/// before the pair is considered inconsistent.
pub const ALIGNMENT_SLACK_FRAMES: usize = 1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BottleneckConfig {
    lambda: f64,
}

impl BottleneckConfig {
    pub const DEFAULT_LAMBDA: f64 = 0.1;

    pub fn new(lambda: f64) -> Result<Self> {
        if !lambda.is_finite() || lambda < 0.0 {
            return Err(Error::invalid(format!(
                "lambda must be finite and >= 0, got {lambda}"
            )));
        }
        Ok(Self { lambda })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }
}

impl Default for BottleneckConfig {
    fn default() -> Self {
        Self {
            lambda: Self::DEFAULT_LAMBDA,
        }
    }
}

/// Neumaier-compensated running sum.
#[derive(Default, Clone, Copy)]
struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Replaces each row with the mean of all rows sharing its segment id.
pub fn pool_by_segments(features: &FeatureMatrix, segment_ids: &[usize]) -> Result<FeatureMatrix> {
    if segment_ids.len() != features.n_frames() {
        return Err(Error::LengthMismatch {
            what: "segment ids vs feature frames",
            left: segment_ids.len(),
            right: features.n_frames(),
        });
    }
    let dim = features.dim();

    // Group frames by id in order of first appearance; summation then runs
    // in frame order, so output does not depend on hashing.
    let mut group_of: HashMap<usize, usize> = HashMap::new();
    let mut members: Vec<Vec<usize>> = Vec::new();
    for (frame, &id) in segment_ids.iter().enumerate() {
        let g = *group_of.entry(id).or_insert_with(|| {
            members.push(Vec::new());
            members.len() - 1
        });
        members[g].push(frame);
    }

    let mut out = vec![0.0; features.data().len()];
    let mut mean = vec![0.0; dim];
    for frames in &members {
        let first = features.row(frames[0]);
        for (j, m) in mean.iter_mut().enumerate() {
            let pivot = first[j];
            if frames.iter().all(|&f| features.row(f)[j] == pivot) {
                // Exact for constant columns, which keeps pooling idempotent.
                *m = pivot;
                continue;
            }
            let mut acc = CompensatedSum::default();
            for &f in frames {
                acc.add(features.row(f)[j]);
            }
            *m = acc.value() / frames.len() as f64;
        }
        for &f in frames {
            out[f * dim..(f + 1) * dim].copy_from_slice(&mean);
        }
    }
    Ok(FeatureMatrix::from_parts_unchecked(
        features.n_frames(),
        dim,
        out,
    ))
}

/// Multiplies every element by λ.
pub fn apply_scaling(features: &FeatureMatrix, config: &BottleneckConfig) -> FeatureMatrix {
    let data = features.data().iter().map(|&v| v * config.lambda).collect();
    FeatureMatrix::from_parts_unchecked(features.n_frames(), features.dim(), data)
}

/// Rejects an alignment that extends more than [`ALIGNMENT_SLACK_FRAMES`]
/// past the last feature frame. Shorter alignments are fine: the uncovered
/// tail pools as one trailing segment.
pub fn check_alignment_extent(
    alignment: &PhonemeAlignment,
    n_frames: usize,
    grid: FrameGrid,
) -> Result<()> {
    let Some(last) = alignment.segments().last() else {
        return Ok(());
    };
    let end_frame = seconds_to_frame_span(last.start, last.end, grid)?.end;
    if end_frame > n_frames + ALIGNMENT_SLACK_FRAMES {
        return Err(Error::LengthMismatch {
            what: "alignment end frame vs feature frames",
            left: end_frame,
            right: n_frames,
        });
    }
    Ok(())
}

/// Segment map, pooling and scaling in one step.
pub fn bottleneck(
    features: &FeatureMatrix,
    alignment: &PhonemeAlignment,
    grid: FrameGrid,
    config: &BottleneckConfig,
) -> Result<FeatureMatrix> {
    check_alignment_extent(alignment, features.n_frames(), grid)?;
    let ids = segment_map(alignment, features.n_frames(), grid);
    let pooled = pool_by_segments(features, &ids)?;
    Ok(apply_scaling(&pooled, config))
}
