//! ABR-lite manifests: the structural facts of a DASH presentation
//! (representations, segment template, durations) as JSON.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, ErrorCode, Result};

pub const DEFAULT_SEGMENT_DURATION_S: f64 = 4.0;
pub const DEFAULT_BITRATES: [u64; 3] = [400_000, 800_000, 1_600_000];
pub const SEGMENT_TEMPLATE: &str = "/contents/{content_id}/reps/{rep_id}/segments/{n}";

const MICROS: u64 = 1_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Representation {
    pub rep_id: String,
    pub bitrate_bps: u64,
    pub segment_count: u64,
    /// Length of every segment but the last.
    pub segment_bytes: u64,
    pub total_bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbrManifest {
    pub content_id: String,
    pub duration_s: f64,
    pub segment_duration_s: f64,
    pub segment_template: String,
    pub representations: Vec<Representation>,
}

pub fn rep_id(bitrate_bps: u64) -> String {
    format!("{}k", bitrate_bps / 1000)
}

fn to_micros(seconds: f64) -> u64 {
    (seconds * MICROS as f64).round() as u64
}

/// Builds the manifest of `content_id`. Segment count is
/// `ceil(duration / segment_duration)`; a representation's byte total is
/// `ceil(bitrate * duration / 8)`, split into full segments of
/// `bitrate * segment_duration / 8` bytes and a shorter last one.
pub fn build_manifest(
    content_id: &str,
    duration_s: f64,
    segment_duration_s: f64,
    bitrates: &[u64],
) -> Result<AbrManifest> {
    if !(duration_s.is_finite() && duration_s > 0.0) {
        return Err(Error::new(
            ErrorCode::InvalidContent,
            format!("content {content_id}: duration must be > 0, got {duration_s}"),
        ));
    }
    if !(segment_duration_s.is_finite() && segment_duration_s > 0.0) || bitrates.is_empty() {
        return Err(Error::new(
            ErrorCode::InvalidConfig,
            "segment duration must be > 0 and at least one bitrate configured",
        ));
    }
    let dur_us = to_micros(duration_s).max(1);
    let seg_us = to_micros(segment_duration_s).max(1);
    let segment_count = dur_us.div_ceil(seg_us);
    let representations = bitrates
        .iter()
        .map(|&bitrate_bps| {
            let bits_per_byte_us = 8 * MICROS as u128;
            let seg_bytes = (bitrate_bps as u128 * seg_us as u128).div_ceil(bits_per_byte_us);
            let total = (bitrate_bps as u128 * dur_us as u128).div_ceil(bits_per_byte_us);
            Representation {
                rep_id: rep_id(bitrate_bps),
                bitrate_bps,
                segment_count,
                segment_bytes: seg_bytes as u64,
                total_bytes: total as u64,
            }
        })
        .collect();
    Ok(AbrManifest {
        content_id: content_id.to_string(),
        duration_s,
        segment_duration_s,
        segment_template: SEGMENT_TEMPLATE.to_string(),
        representations,
    })
}

impl AbrManifest {
    pub fn segment_count(&self) -> u64 {
        self.representations.first().map_or(0, |r| r.segment_count)
    }

    pub fn representation(&self, rep_id: &str) -> Option<&Representation> {
        self.representations.iter().find(|r| r.rep_id == rep_id)
    }

    pub fn segment_uri(&self, rep_id: &str, n: u64) -> String {
        self.segment_template
            .replace("{content_id}", &self.content_id)
            .replace("{rep_id}", rep_id)
            .replace("{n}", &n.to_string())
    }

    /// Playback time a representation declares, summed segment by segment
    /// from the segment byte lengths.
    pub fn declared_duration_s(&self, rep_id: &str) -> Result<f64> {
        let rep = self.representation(rep_id).ok_or_else(|| {
            Error::new(ErrorCode::SegmentNotFound, format!("no representation {rep_id}"))
        })?;
        let mut total = 0.0;
        for n in 0..rep.segment_count {
            let r = self.segment_range(rep_id, n)?;
            total += (r.end - r.start) as f64 * 8.0 / rep.bitrate_bps as f64;
        }
        Ok(total)
    }

    /// Byte range of segment `n` within the representation's stream.
    pub fn segment_range(&self, rep_id: &str, n: u64) -> Result<Range<u64>> {
        let rep = self.representation(rep_id).ok_or_else(|| {
            Error::new(
                ErrorCode::SegmentNotFound,
                format!("{}: no representation {rep_id}", self.content_id),
            )
        })?;
        if n >= rep.segment_count {
            return Err(Error::new(
                ErrorCode::SegmentNotFound,
                format!(
                    "{}/{rep_id}: segment {n} out of range (count {})",
                    self.content_id, rep.segment_count
                ),
            ));
        }
        let start = (n * rep.segment_bytes).min(rep.total_bytes);
        let end = ((n + 1) * rep.segment_bytes).min(rep.total_bytes);
        Ok(start..end)
    }
}

/// Representation bytes are the content blob repeated end to end; a segment
/// is the slice of that stream at `range`.
pub fn segment_bytes(blob: &[u8], range: Range<u64>) -> Vec<u8> {
    if blob.is_empty() {
        return Vec::new();
    }
    let len = blob.len() as u64;
    range.map(|p| blob[(p % len) as usize]).collect()
}
