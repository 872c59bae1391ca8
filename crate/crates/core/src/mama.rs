//! Segment-to-cell association metric for the aerial highway.
//!
//! For each highway segment `z` and sector `b` the score is
//! `chi = c * log2(1 + P / (F + N))`, where `P` is the mean expected channel
//! gain over the segment, `c` the inverse condition number of the segment's
//! channel matrix and `F` the cross-correlation with the rest of the highway.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::channel::{split_rows, HighwayStack};
use crate::units::linear_to_db;
use crate::{Result, C64};

/// Mean of `|h|²` over all entries.
pub fn avg_channel_gain(h: &DMatrix<C64>) -> f64 {
    if h.is_empty() {
        return 0.0;
    }
    h.iter().map(|x| x.norm_sqr()).sum::<f64>() / h.len() as f64
}

/// `sigma_min / sigma_max` over the compact SVD; 0 when numerically rank deficient.
pub fn inv_condition_number(h: &DMatrix<C64>) -> f64 {
    if h.is_empty() {
        return 0.0;
    }
    let sv = h.clone().singular_values();
    let max = sv.max();
    let min = sv.min();
    let tol = max * (h.nrows().max(h.ncols()) as f64) * f64::EPSILON;
    if !(max > 0.0) || min <= tol {
        0.0
    } else {
        (min / max).min(1.0)
    }
}

/// `sum_i sum_z |<h_i, h_z>|²` with `<a, b> = sum_m a_m conj(b_m)`.
pub fn cross_corr_frobenius(segment: &DMatrix<C64>, rest: &DMatrix<C64>) -> f64 {
    if segment.nrows() == 0 || rest.nrows() == 0 {
        return 0.0;
    }
    assert_eq!(segment.ncols(), rest.ncols(), "column counts differ");
    (rest * segment.adjoint()).iter().map(|x| x.norm_sqr()).sum()
}

/// `c log2(1 + P / (F + noise))`.
pub fn mama_metric(segment: &DMatrix<C64>, rest: &DMatrix<C64>, noise: f64) -> MetricParts {
    let p = avg_channel_gain(segment);
    let c = inv_condition_number(segment);
    let f = cross_corr_frobenius(segment, rest);
    MetricParts {
        p_gain: p,
        inv_cond: c,
        cross_corr: f,
        chi: compose(c, p, f, noise),
    }
}

pub fn compose(c: f64, p: f64, f: f64, noise: f64) -> f64 {
    c * (1.0 + p / (f + noise)).log2()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricParts {
    pub p_gain: f64,
    pub inv_cond: f64,
    pub cross_corr: f64,
    pub chi: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricBreakdown {
    pub segment_id: usize,
    pub sector_id: usize,
    pub parts: MetricParts,
}

/// Serving cell per segment and the designated cell set.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentAssignment {
    pub serving: Vec<usize>,
    /// Distinct serving cells in ascending order.
    pub designated: Vec<usize>,
    /// Segment-major, one row per (segment, stack).
    pub breakdown: Vec<MetricBreakdown>,
}

impl SegmentAssignment {
    /// Writes `segment_id, sector_id, P_db, c, F_db, chi`.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["segment_id", "sector_id", "P_db", "c", "F_db", "chi_bps_per_hz"])?;
        for r in &self.breakdown {
            w.write_record([
                r.segment_id.to_string(),
                r.sector_id.to_string(),
                format!("{:.6}", linear_to_db(r.parts.p_gain)),
                format!("{:.9}", r.parts.inv_cond),
                format!("{:.6}", linear_to_db(r.parts.cross_corr)),
                format!("{:.9}", r.parts.chi),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Scores every sector for every segment and picks the argmax.
///
/// Ties go to the lowest sector id regardless of the order of `stacks`.
pub fn assign_segments(
    stacks: &[HighwayStack],
    segments: &[std::ops::Range<usize>],
    noise: f64,
) -> SegmentAssignment {
    let per_segment: Vec<Vec<MetricBreakdown>> = segments
        .par_iter()
        .enumerate()
        .map(|(z, seg)| {
            stacks
                .iter()
                .map(|st| {
                    let (inside, outside) = split_rows(&st.matrix, seg);
                    MetricBreakdown {
                        segment_id: z,
                        sector_id: st.sector,
                        parts: mama_metric(&inside, &outside, noise),
                    }
                })
                .collect()
        })
        .collect();
    let serving: Vec<usize> = per_segment
        .iter()
        .map(|rows| {
            rows.iter()
                .fold(None::<(usize, f64)>, |best, r| match best {
                    Some((b, v)) if v > r.parts.chi || (v == r.parts.chi && b < r.sector_id) => Some((b, v)),
                    _ => Some((r.sector_id, r.parts.chi)),
                })
                .expect("at least one sector")
                .0
        })
        .collect();
    let mut designated = serving.clone();
    designated.sort_unstable();
    designated.dedup();
    SegmentAssignment {
        serving,
        designated,
        breakdown: per_segment.into_iter().flatten().collect(),
    }
}
