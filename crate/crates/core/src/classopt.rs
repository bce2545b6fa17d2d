//! Reduction of the full class grid to the classes a corpus actually uses.
//!
//! Classes with at least `min_count` samples are approved. Every other class
//! is reassigned to the approved class whose bin center is closest in the
//! a\*b\* plane, which is one assignment step of k-means with the approved
//! centers held fixed.

use serde::{Deserialize, Serialize};

use crate::classgrid::{ClassMap, GridParams};
use crate::error::{Error, Result};

/// Per-class sample counts over a corpus.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassHistogram {
    pub grid: GridParams,
    pub counts: Vec<u64>,
    pub total_samples: u64,
}

impl ClassHistogram {
    pub fn empty(grid: GridParams) -> Self {
        Self {
            grid,
            counts: vec![0; grid.num_classes() as usize],
            total_samples: 0,
        }
    }

    pub fn from_counts(grid: GridParams, counts: Vec<u64>) -> Result<Self> {
        if counts.len() != grid.num_classes() as usize {
            return Err(Error::BufferLength {
                expected: grid.num_classes() as usize,
                actual: counts.len(),
            });
        }
        let total_samples = counts.iter().sum();
        Ok(Self {
            grid,
            counts,
            total_samples,
        })
    }

    /// Adds every pixel of `map`. Entries outside the grid are rejected
    /// before anything is counted.
    pub fn add_map(&mut self, map: &ClassMap) -> Result<()> {
        map.check_bound(self.grid.num_classes())?;
        for &c in &map.classes {
            self.counts[c as usize] += 1;
        }
        self.total_samples += map.pixel_count() as u64;
        Ok(())
    }

    pub fn merge(&mut self, other: &ClassHistogram) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch {
                expected: self.grid.alpha,
                actual: other.grid.alpha,
            });
        }
        for (dst, src) in self.counts.iter_mut().zip(&other.counts) {
            *dst += src;
        }
        self.total_samples += other.total_samples;
        Ok(())
    }

    pub fn nonzero_classes(&self) -> usize {
        self.counts.iter().filter(|&&c| c > 0).count()
    }
}

/// Counts classes over a stream of maps sharing `grid`.
pub fn accumulate_histogram<'a, I>(maps: I, grid: GridParams) -> Result<ClassHistogram>
where
    I: IntoIterator<Item = &'a ClassMap>,
{
    let mut hist = ClassHistogram::empty(grid);
    for map in maps {
        hist.add_map(map)?;
    }
    Ok(hist)
}

/// Retention threshold for [`select_classes`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", content = "value", rename_all = "snake_case")]
pub enum Threshold {
    /// Absolute sample count.
    Count(u64),
    /// Percentage of the histogram's total samples, rounded up to a count.
    Percent(f64),
}

impl Threshold {
    pub fn resolve(&self, total_samples: u64) -> Result<u64> {
        match *self {
            Threshold::Count(0) => Err(Error::InvalidParameter(
                "minimum count must be at least 1".into(),
            )),
            Threshold::Count(n) => Ok(n),
            Threshold::Percent(p) if !(p.is_finite() && p > 0.0) => Err(Error::InvalidParameter(
                format!("threshold percentage must be positive, got {p}"),
            )),
            Threshold::Percent(p) => {
                Ok(((total_samples as f64) * p / 100.0).ceil().max(1.0) as u64)
            }
        }
    }
}

/// Approved classes and the total remap table for a grid.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApprovedClassSet {
    pub grid: GridParams,
    /// Retained classes, ascending.
    pub approved: Vec<u32>,
    /// `remap[c]` is the approved class standing in for grid class `c`.
    pub remap: Vec<u32>,
    pub min_count_threshold: u64,
}

impl ApprovedClassSet {
    /// Builds the set from an explicit approved list, computing the remap.
    pub fn from_approved(grid: GridParams, mut approved: Vec<u32>, min_count_threshold: u64) -> Result<Self> {
        approved.sort_unstable();
        approved.dedup();
        if approved.is_empty() {
            return Err(Error::EmptyApprovedSet(min_count_threshold));
        }
        for &c in &approved {
            grid.check_class(c)?;
        }
        let remap = nearest_approved(&grid, &approved);
        Ok(Self {
            grid,
            approved,
            remap,
            min_count_threshold,
        })
    }

    pub fn len(&self) -> usize {
        self.approved.len()
    }

    pub fn is_empty(&self) -> bool {
        self.approved.is_empty()
    }

    pub fn is_approved(&self, class: u32) -> bool {
        self.approved.binary_search(&class).is_ok()
    }

    /// Checks the structural invariants of a deserialized set.
    pub fn validate(&self) -> Result<()> {
        let n = self.grid.num_classes() as usize;
        if self.approved.is_empty() {
            return Err(Error::EmptyApprovedSet(self.min_count_threshold));
        }
        if self.remap.len() != n {
            return Err(Error::BufferLength {
                expected: n,
                actual: self.remap.len(),
            });
        }
        if !self.approved.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::InvalidParameter("approved classes not strictly ascending".into()));
        }
        for &c in &self.approved {
            self.grid.check_class(c)?;
            if self.remap[c as usize] != c {
                return Err(Error::InvalidParameter(format!("approved class {c} is not a fixed point of the remap")));
            }
        }
        if let Some(&bad) = self.remap.iter().find(|&&t| !self.is_approved(t)) {
            return Err(Error::InvalidParameter(format!("remap target {bad} is not approved")));
        }
        Ok(())
    }

    pub fn dense_index(&self) -> DenseIndex {
        DenseIndex::new(self)
    }
}

/// For every grid class, the approved class with the nearest bin center.
/// Centers sit on a regular lattice, so squared distances are compared in
/// exact integer cell units; ties go to the smaller class index.
fn nearest_approved(grid: &GridParams, approved: &[u32]) -> Vec<u32> {
    let cells: Vec<(i64, i64)> = approved
        .iter()
        .map(|&c| {
            let (x, y) = grid.cell(c);
            (i64::from(x), i64::from(y))
        })
        .collect();
    (0..grid.num_classes())
        .map(|c| {
            let (x, y) = grid.cell(c);
            let (x, y) = (i64::from(x), i64::from(y));
            let mut best = approved[0];
            let mut best_d = i64::MAX;
            // `approved` is ascending, so strict < keeps the smallest index on ties.
            for (&cand, &(ax, ay)) in approved.iter().zip(&cells) {
                let d = (ax - x).pow(2) + (ay - y).pow(2);
                if d < best_d {
                    best_d = d;
                    best = cand;
                }
            }
            best
        })
        .collect()
}

pub fn select_classes(hist: &ClassHistogram, threshold: Threshold) -> Result<ApprovedClassSet> {
    let min_count = threshold.resolve(hist.total_samples)?;
    let approved: Vec<u32> = hist
        .counts
        .iter()
        .enumerate()
        .filter(|(_, &n)| n >= min_count)
        .map(|(c, _)| c as u32)
        .collect();
    if approved.is_empty() {
        return Err(Error::EmptyApprovedSet(min_count));
    }
    ApprovedClassSet::from_approved(hist.grid, approved, min_count)
}

pub fn remap_map(map: &ClassMap, set: &ApprovedClassSet) -> Result<ClassMap> {
    map.check_bound(set.grid.num_classes())?;
    Ok(ClassMap {
        width: map.width,
        height: map.height,
        classes: map.classes.iter().map(|&c| set.remap[c as usize]).collect(),
    })
}

/// Order-preserving bijection between approved grid classes and dense
/// indices `0..n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DenseIndex {
    classes: Vec<u32>,
    lookup: Vec<Option<u32>>,
}

impl DenseIndex {
    pub fn new(set: &ApprovedClassSet) -> Self {
        let mut lookup = vec![None; set.grid.num_classes() as usize];
        for (i, &c) in set.approved.iter().enumerate() {
            lookup[c as usize] = Some(i as u32);
        }
        Self {
            classes: set.approved.clone(),
            lookup,
        }
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn to_dense(&self, class: u32) -> Option<u32> {
        self.lookup.get(class as usize).copied().flatten()
    }

    pub fn to_class(&self, dense: u32) -> Option<u32> {
        self.classes.get(dense as usize).copied()
    }

    /// Remaps `map` through `set` and converts to dense indices.
    pub fn compact_map(&self, map: &ClassMap, set: &ApprovedClassSet) -> Result<ClassMap> {
        let remapped = remap_map(map, set)?;
        let classes = remapped
            .classes
            .iter()
            .map(|&c| self.to_dense(c).expect("remap image is approved"))
            .collect();
        Ok(ClassMap {
            width: map.width,
            height: map.height,
            classes,
        })
    }

    /// Converts a dense map back to grid classes.
    pub fn expand_map(&self, map: &ClassMap) -> Result<ClassMap> {
        map.check_bound(self.len() as u32)?;
        Ok(ClassMap {
            width: map.width,
            height: map.height,
            classes: map.classes.iter().map(|&d| self.classes[d as usize]).collect(),
        })
    }
}

pub fn compact_index(set: &ApprovedClassSet) -> DenseIndex {
    DenseIndex::new(set)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn g6() -> GridParams {
        GridParams::new(6).unwrap()
    }

    #[test]
    fn histogram_counts() {
        let m = ClassMap::new(2, 2, vec![0, 0, 5, 5]).unwrap();
        let h = accumulate_histogram([&m], g6()).unwrap();
        assert_eq!((h.counts[0], h.counts[5], h.total_samples), (2, 2, 4));
        let empty = accumulate_histogram(std::iter::empty::<&ClassMap>(), g6()).unwrap();
        assert_eq!(empty.total_samples, 0);
        assert!(empty.counts.iter().all(|&c| c == 0));
    }

    #[test]
    fn histogram_rejects_foreign_maps() {
        let mut h = ClassHistogram::empty(GridParams::new(14).unwrap());
        assert!(h.add_map(&ClassMap::filled(1, 1, 256)).is_err());
        assert_eq!(h.total_samples, 0);
        assert!(matches!(
            h.merge(&ClassHistogram::empty(g6())),
            Err(Error::GridMismatch { expected: 14, actual: 6 })
        ));
    }

    #[test]
    fn toy_selection() {
        let mut counts = vec![0u64; 1296];
        counts[0] = 600;
        counts[1] = 10;
        counts[2] = 700;
        let h = ClassHistogram::from_counts(g6(), counts).unwrap();
        let s = select_classes(&h, Threshold::Count(500)).unwrap();
        assert_eq!(s.approved, vec![0, 2]);
        // class 1 sits one cell from both; tie goes to 0
        assert_eq!(s.remap[1], 0);
        // class 3 is one cell from 2
        assert_eq!(s.remap[3], 2);
        // one row up from class 2 is closer to 2 than to 0
        assert_eq!(s.remap[36 + 2], 2);
        s.validate().unwrap();
    }

    #[test]
    fn min_count_one_keeps_everything() {
        let h = ClassHistogram::from_counts(GridParams::new(14).unwrap(), vec![1; 256]).unwrap();
        let s = select_classes(&h, Threshold::Count(1)).unwrap();
        assert_eq!(s.len(), 256);
        assert!(s.remap.iter().enumerate().all(|(i, &c)| i as u32 == c));
    }

    #[test]
    fn no_survivor_is_an_error() {
        let h = ClassHistogram::from_counts(GridParams::new(14).unwrap(), vec![3; 256]).unwrap();
        assert_eq!(select_classes(&h, Threshold::Count(4)), Err(Error::EmptyApprovedSet(4)));
        assert!(select_classes(&h, Threshold::Count(0)).is_err());
    }

    #[test]
    fn percent_threshold() {
        assert_eq!(Threshold::Percent(0.000455).resolve(109_885_440).unwrap(), 500);
        assert_eq!(Threshold::Percent(50.0).resolve(3).unwrap(), 2);
        assert!(Threshold::Percent(-1.0).resolve(10).is_err());
    }

    #[test]
    fn remap_behaviour() {
        let mut counts = vec![0u64; 256];
        counts[17] = 10;
        counts[200] = 10;
        let grid = GridParams::new(14).unwrap();
        let s = select_classes(&ClassHistogram::from_counts(grid, counts).unwrap(), Threshold::Count(5)).unwrap();
        let approved_only = ClassMap::new(2, 1, vec![17, 200]).unwrap();
        assert_eq!(remap_map(&approved_only, &s).unwrap(), approved_only);
        let starved = ClassMap::filled(1, 1, 0);
        assert_eq!(remap_map(&starved, &s).unwrap().classes, vec![17]);
        let m = ClassMap::new(3, 1, vec![0, 255, 100]).unwrap();
        let once = remap_map(&m, &s).unwrap();
        assert_eq!(remap_map(&once, &s).unwrap(), once);
        assert!(remap_map(&ClassMap::filled(1, 1, 256), &s).is_err());
    }

    #[test]
    fn dense_table() {
        let s = ApprovedClassSet::from_approved(g6(), vec![9, 3, 7], 1).unwrap();
        let d = compact_index(&s);
        assert_eq!(d.len(), 3);
        assert_eq!([d.to_dense(3), d.to_dense(7), d.to_dense(9)], [Some(0), Some(1), Some(2)]);
        assert_eq!(d.to_dense(4), None);
        for i in 0..3 {
            assert_eq!(d.to_dense(d.to_class(i).unwrap()), Some(i));
        }
        assert_eq!(d.to_class(3), None);
        let m = ClassMap::new(3, 1, vec![3, 8, 9]).unwrap();
        let dense = d.compact_map(&m, &s).unwrap();
        assert_eq!(dense.classes, vec![0, 1, 2]);
        assert_eq!(d.expand_map(&dense).unwrap().classes, vec![3, 7, 9]);
    }

    #[test]
    fn validate_catches_corruption() {
        let mut s = ApprovedClassSet::from_approved(g6(), vec![3, 7], 1).unwrap();
        s.remap[0] = 5;
        assert!(s.validate().is_err());
    }
}
