//! Object-selective chroma harmonization.
//!
//! For each segment mask, in list order, and for each chroma channel
//! independently: take the mode of the segment's rounded values, then snap
//! every pixel whose value differs from that mode by more than the channel
//! tolerance onto the mode. Pixels outside every mask are never touched.
//!
//! Masks come from an external segmenter; this module only consumes them.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::colorspace::AbPlanes;
use crate::error::{Error, Result};

/// Default tolerance for both channels, in a\*b\* units.
pub const DEFAULT_DELTA: f64 = 8.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HarmonizeParams {
    pub delta_a: f64,
    pub delta_b: f64,
}

impl Default for HarmonizeParams {
    fn default() -> Self {
        Self {
            delta_a: DEFAULT_DELTA,
            delta_b: DEFAULT_DELTA,
        }
    }
}

impl HarmonizeParams {
    pub fn validate(&self) -> Result<()> {
        if self.delta_a >= 0.0 && self.delta_b >= 0.0 {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "tolerances must be non-negative, got delta_a={} delta_b={}",
                self.delta_a, self.delta_b
            )))
        }
    }
}

/// Boolean segment masks over one image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SegmentMaskSet {
    pub width: usize,
    pub height: usize,
    masks: Vec<Vec<bool>>,
    labels: Option<Vec<String>>,
}

impl SegmentMaskSet {
    pub fn new(width: usize, height: usize, masks: Vec<Vec<bool>>) -> Result<Self> {
        for (i, m) in masks.iter().enumerate() {
            if m.len() != width * height {
                return Err(Error::BufferLength {
                    expected: width * height,
                    actual: m.len(),
                });
            }
            if !m.iter().any(|&v| v) {
                return Err(Error::InvalidParameter(format!("mask {i} selects no pixels")));
            }
        }
        Ok(Self {
            width,
            height,
            masks,
            labels: None,
        })
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.masks.len() {
            return Err(Error::DimensionMismatch {
                expected: format!("{} labels", self.masks.len()),
                actual: format!("{} labels", labels.len()),
            });
        }
        self.labels = Some(labels);
        Ok(self)
    }

    /// One segment per distinct nonzero label, in ascending label order.
    /// Label 0 is background.
    pub fn from_label_map(width: usize, height: usize, labels: &[u16]) -> Result<Self> {
        if labels.len() != width * height {
            return Err(Error::BufferLength {
                expected: width * height,
                actual: labels.len(),
            });
        }
        let mut ids: Vec<u16> = labels.iter().copied().filter(|&l| l != 0).collect();
        ids.sort_unstable();
        ids.dedup();
        let masks = ids
            .iter()
            .map(|&id| labels.iter().map(|&l| l == id).collect())
            .collect();
        let names = ids.iter().map(|id| format!("label-{id}")).collect();
        Self::new(width, height, masks)?.with_labels(names)
    }

    pub fn masks(&self) -> &[Vec<bool>] {
        &self.masks
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    pub fn len(&self) -> usize {
        self.masks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masks.is_empty()
    }

    /// True when no pixel belongs to more than one mask.
    pub fn is_disjoint(&self) -> bool {
        let mut seen = vec![false; self.width * self.height];
        for m in &self.masks {
            for (s, &v) in seen.iter_mut().zip(m) {
                if v {
                    if *s {
                        return false;
                    }
                    *s = true;
                }
            }
        }
        true
    }
}

/// Most frequent integer-rounded value among masked pixels; ties resolve to
/// the smaller value.
pub fn segment_mode(plane: &[f64], mask: &[bool]) -> Result<f64> {
    if plane.len() != mask.len() {
        return Err(Error::BufferLength {
            expected: plane.len(),
            actual: mask.len(),
        });
    }
    let mut freq: HashMap<i64, u64> = HashMap::new();
    for (&v, _) in plane.iter().zip(mask).filter(|(_, &m)| m) {
        *freq.entry(v.round() as i64).or_default() += 1;
    }
    freq.into_iter()
        .max_by(|(va, ca), (vb, cb)| ca.cmp(cb).then(vb.cmp(va)))
        .map(|(v, _)| v as f64)
        .ok_or(Error::Empty("segment mask"))
}

/// Indices inside `mask` to overwrite, and the value to write.
fn channel_plan(plane: &[f64], mask: &[bool], delta: f64) -> Result<(f64, Vec<usize>)> {
    let mode = segment_mode(plane, mask)?;
    let hits = mask
        .iter()
        .enumerate()
        .filter(|&(i, &m)| m && (plane[i] - mode).abs() > delta)
        .map(|(i, _)| i)
        .collect();
    Ok((mode, hits))
}

fn apply(plane: &mut [f64], (mode, hits): &(f64, Vec<usize>)) {
    for &i in hits {
        plane[i] = *mode;
    }
}

pub fn harmonize(ab: &AbPlanes, masks: &SegmentMaskSet, params: &HarmonizeParams) -> Result<AbPlanes> {
    params.validate()?;
    if ab.width != masks.width || ab.height != masks.height {
        return Err(Error::DimensionMismatch {
            expected: format!("{}x{}", ab.width, ab.height),
            actual: format!("{}x{}", masks.width, masks.height),
        });
    }
    let mut out = ab.clone();
    if masks.is_disjoint() {
        // Disjoint segments cannot see each other's writes, so the plans can
        // be computed against the input in parallel and applied in order.
        let plans = masks
            .masks
            .par_iter()
            .map(|m| {
                Ok((
                    channel_plan(&ab.a, m, params.delta_a)?,
                    channel_plan(&ab.b, m, params.delta_b)?,
                ))
            })
            .collect::<Result<Vec<_>>>()?;
        for (pa, pb) in &plans {
            apply(&mut out.a, pa);
            apply(&mut out.b, pb);
        }
    } else {
        for m in &masks.masks {
            let pa = channel_plan(&out.a, m, params.delta_a)?;
            apply(&mut out.a, &pa);
            let pb = channel_plan(&out.b, m, params.delta_b)?;
            apply(&mut out.b, &pb);
        }
    }
    Ok(out)
}

/// Summary of what harmonization changed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarmonizeDiff {
    pub changed_a: usize,
    pub changed_b: usize,
    pub changed_pixels: usize,
    pub max_abs_change_a: f64,
    pub max_abs_change_b: f64,
}

pub fn diff(before: &AbPlanes, after: &AbPlanes) -> Result<HarmonizeDiff> {
    before.check_same_shape(after)?;
    let mut d = HarmonizeDiff {
        changed_a: 0,
        changed_b: 0,
        changed_pixels: 0,
        max_abs_change_a: 0.0,
        max_abs_change_b: 0.0,
    };
    for i in 0..before.pixel_count() {
        let da = (after.a[i] - before.a[i]).abs();
        let db = (after.b[i] - before.b[i]).abs();
        d.changed_a += usize::from(da > 0.0);
        d.changed_b += usize::from(db > 0.0);
        d.changed_pixels += usize::from(da > 0.0 || db > 0.0);
        d.max_abs_change_a = d.max_abs_change_a.max(da);
        d.max_abs_change_b = d.max_abs_change_b.max(db);
    }
    Ok(d)
}
