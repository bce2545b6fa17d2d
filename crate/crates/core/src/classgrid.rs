//! Square-bin quantization of the a\*b\* plane into color classes.
//!
//! A grid with bin edge `alpha` shifts chroma by `beta` into the positive
//! quadrant and numbers the `delta x delta` cells row-major with b\* as the
//! row axis:
//!
//! ```text
//! class = floor((b + beta) / alpha) * delta + floor((a + beta) / alpha)
//! a'    = (class mod delta) * alpha - beta + alpha / 2
//! b'    = (class div delta) * alpha - beta + alpha / 2
//! ```

use serde::{Deserialize, Serialize};

use crate::colorspace::{AbPlanes, LabImage};
use crate::error::{Error, Result};

/// Half-range of chroma the grid must cover before rounding to whole bins.
pub const CHROMA_HALF_RANGE: u32 = 108;

/// Bin sizes the defaults were tuned over.
pub const VALIDATED_ALPHAS: [u32; 6] = [4, 6, 8, 10, 12, 14];

/// Quantization grid parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GridParams {
    /// Bin edge length in a\*b\* units.
    pub alpha: u32,
    /// Shift moving `[-beta, beta)` onto `[0, 2 beta)`.
    pub beta: u32,
    /// Bins per axis.
    pub delta: u32,
}

impl GridParams {
    /// Builds the grid for bin size `alpha`.
    ///
    /// `beta` is 108 rounded up to a multiple of `alpha`, so every axis holds
    /// a whole number of bins.
    pub fn new(alpha: u32) -> Result<Self> {
        if alpha == 0 || !alpha.is_multiple_of(2) {
            return Err(Error::InvalidAlpha(i64::from(alpha)));
        }
        let beta = alpha * CHROMA_HALF_RANGE.div_ceil(alpha);
        let delta = 2 * beta / alpha;
        if u64::from(delta) * u64::from(delta) > u64::from(u32::MAX) {
            return Err(Error::InvalidAlpha(i64::from(alpha)));
        }
        Ok(Self { alpha, beta, delta })
    }

    /// Rebuilds a grid from serialized fields, checking they are consistent.
    pub fn from_parts(alpha: u32, beta: u32, delta: u32) -> Result<Self> {
        let grid = Self::new(alpha)?;
        if grid.beta != beta || grid.delta != delta {
            return Err(Error::InvalidParameter(format!(
                "inconsistent grid: alpha={alpha} beta={beta} delta={delta}, \
                 expected beta={} delta={}",
                grid.beta, grid.delta
            )));
        }
        Ok(grid)
    }

    pub fn is_validated(&self) -> bool {
        VALIDATED_ALPHAS.contains(&self.alpha)
    }

    pub fn num_classes(&self) -> u32 {
        self.delta * self.delta
    }

    fn axis_bin(&self, v: f64) -> u32 {
        let bin = ((v + f64::from(self.beta)) / f64::from(self.alpha)).floor();
        // NaN casts to 0; clamping puts out-of-range chroma in the edge bins.
        (bin as i64).clamp(0, i64::from(self.delta) - 1) as u32
    }

    fn axis_center(&self, bin: u32) -> f64 {
        f64::from(bin * self.alpha) - f64::from(self.beta) + f64::from(self.alpha) / 2.0
    }

    /// Class of the chroma pair `(a, b)`. Values outside `[-beta, beta)` fall
    /// into the nearest edge bin.
    pub fn encode(&self, a: f64, b: f64) -> u32 {
        self.axis_bin(b) * self.delta + self.axis_bin(a)
    }

    /// Bin center `(a', b')` of `class`.
    pub fn decode(&self, class: u32) -> Result<(f64, f64)> {
        self.check_class(class)?;
        Ok(self.decode_unchecked(class))
    }

    pub(crate) fn decode_unchecked(&self, class: u32) -> (f64, f64) {
        (
            self.axis_center(class % self.delta),
            self.axis_center(class / self.delta),
        )
    }

    /// `(column, row)` of `class` in the grid, i.e. (a\* bin, b\* bin).
    pub fn cell(&self, class: u32) -> (u32, u32) {
        (class % self.delta, class / self.delta)
    }

    pub fn check_class(&self, class: u32) -> Result<()> {
        if class >= self.num_classes() {
            return Err(Error::ClassOutOfRange {
                index: class,
                classes: self.num_classes(),
            });
        }
        Ok(())
    }
}

pub fn make_grid(alpha: u32) -> Result<GridParams> {
    GridParams::new(alpha)
}

pub fn encode_class(a: f64, b: f64, grid: &GridParams) -> u32 {
    grid.encode(a, b)
}

pub fn decode_class(class: u32, grid: &GridParams) -> Result<(f64, f64)> {
    grid.decode(class)
}

/// Per-pixel class indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassMap {
    pub width: usize,
    pub height: usize,
    pub classes: Vec<u32>,
}

impl ClassMap {
    pub fn new(width: usize, height: usize, classes: Vec<u32>) -> Result<Self> {
        if classes.len() != width * height {
            return Err(Error::BufferLength {
                expected: width * height,
                actual: classes.len(),
            });
        }
        Ok(Self {
            width,
            height,
            classes,
        })
    }

    pub fn filled(width: usize, height: usize, class: u32) -> Self {
        Self {
            width,
            height,
            classes: vec![class; width * height],
        }
    }

    pub fn pixel_count(&self) -> usize {
        self.classes.len()
    }

    pub fn get(&self, x: usize, y: usize) -> u32 {
        self.classes[y * self.width + x]
    }

    /// Checks every entry is below `bound`.
    pub fn check_bound(&self, bound: u32) -> Result<()> {
        match self.classes.iter().find(|&&c| c >= bound) {
            Some(&index) => Err(Error::ClassOutOfRange {
                index,
                classes: bound,
            }),
            None => Ok(()),
        }
    }

    pub fn same_shape(&self, other: &ClassMap) -> bool {
        self.width == other.width && self.height == other.height
    }

    /// Nearest-neighbor resampling; class indices are never interpolated.
    pub fn resize_nearest(&self, width: usize, height: usize) -> ClassMap {
        let mut classes = Vec::with_capacity(width * height);
        for y in 0..height {
            let sy = ((y * 2 + 1) * self.height / (height * 2)).min(self.height - 1);
            for x in 0..width {
                let sx = ((x * 2 + 1) * self.width / (width * 2)).min(self.width - 1);
                classes.push(self.classes[sy * self.width + sx]);
            }
        }
        ClassMap {
            width,
            height,
            classes,
        }
    }
}

pub fn encode_planes(ab: &AbPlanes, grid: &GridParams) -> ClassMap {
    let classes = ab
        .a
        .iter()
        .zip(&ab.b)
        .map(|(&a, &b)| grid.encode(a, b))
        .collect();
    ClassMap {
        width: ab.width,
        height: ab.height,
        classes,
    }
}

pub fn encode_image(img: &LabImage, grid: &GridParams) -> ClassMap {
    let classes = img
        .a
        .iter()
        .zip(&img.b)
        .map(|(&a, &b)| grid.encode(a, b))
        .collect();
    ClassMap {
        width: img.width,
        height: img.height,
        classes,
    }
}

pub fn decode_map(map: &ClassMap, grid: &GridParams) -> Result<AbPlanes> {
    map.check_bound(grid.num_classes())?;
    let (a, b) = map
        .classes
        .iter()
        .map(|&c| grid.decode_unchecked(c))
        .unzip();
    Ok(AbPlanes {
        width: map.width,
        height: map.height,
        a,
        b,
    })
}

/// One row of the bin-size trade-off table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinAnalysisRow {
    pub alpha: u32,
    pub total_class_points: u32,
    /// Largest per-channel a\*b\* deviation after quantize/dequantize.
    pub max_dev_ab: f64,
    /// Mean per-channel a\*b\* deviation after quantize/dequantize.
    pub avg_dev_ab: f64,
}

/// Measures quantization loss exhaustively over the integer grid
/// `a, b in [-beta, beta - 1]`.
///
/// Both channels share the same bin geometry, so the per-channel statistics
/// over the 2D grid equal those over one axis; the sweep still visits every
/// pair and pools both channels.
pub fn bin_analysis(grid: &GridParams) -> BinAnalysisRow {
    let lo = -i64::from(grid.beta);
    let hi = i64::from(grid.beta);
    let mut max_dev: f64 = 0.0;
    let mut sum_dev = 0.0;
    let mut n = 0u64;
    for b in lo..hi {
        for a in lo..hi {
            let (af, bf) = (a as f64, b as f64);
            let (da, db) = grid.decode_unchecked(grid.encode(af, bf));
            let ea = (da - af).abs();
            let eb = (db - bf).abs();
            max_dev = max_dev.max(ea).max(eb);
            sum_dev += ea + eb;
            n += 2;
        }
    }
    BinAnalysisRow {
        alpha: grid.alpha,
        total_class_points: grid.num_classes(),
        max_dev_ab: max_dev,
        avg_dev_ab: sum_dev / n as f64,
    }
}

pub fn bin_table(alphas: &[u32]) -> Result<Vec<BinAnalysisRow>> {
    if alphas.is_empty() {
        return Err(Error::Empty("bin size list"));
    }
    alphas
        .iter()
        .map(|&alpha| GridParams::new(alpha).map(|g| bin_analysis(&g)))
        .collect()
}

/// RGB-space deviation of quantization around one chroma anchor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RgbDeviation {
    pub anchor: f64,
    pub max_dev: f64,
    pub avg_dev: f64,
}

/// Auxiliary sweep: at L = 50, visit every integer `(a, b)` within one bin
/// edge of `(anchor, anchor)`, quantize and dequantize the chroma, and
/// measure the 8-bit per-channel RGB distance between the original and the
/// reconstructed color.
pub fn rgb_deviation(grid: &GridParams, anchor: f64) -> RgbDeviation {
    use crate::colorspace::lab_pixel_to_rgb;
    let radius = i64::from(grid.alpha);
    let mut max_dev: f64 = 0.0;
    let mut sum = 0.0;
    let mut n = 0u64;
    for db in -radius..=radius {
        for da in -radius..=radius {
            let a = anchor + da as f64;
            let b = anchor + db as f64;
            let (qa, qb) = grid.decode_unchecked(grid.encode(a, b));
            let orig = lab_pixel_to_rgb([50.0, a, b]);
            let quant = lab_pixel_to_rgb([50.0, qa, qb]);
            for ch in 0..3 {
                let d = (f64::from(orig[ch]) - f64::from(quant[ch])).abs();
                max_dev = max_dev.max(d);
                sum += d;
                n += 1;
            }
        }
    }
    RgbDeviation {
        anchor,
        max_dev,
        avg_dev: sum / n as f64,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn g6() -> GridParams {
        GridParams::new(6).unwrap()
    }

    #[test]
    fn grid_for_validated_alphas() {
        let expect = [
            (4, 108, 54, 2916),
            (6, 108, 36, 1296),
            (8, 112, 28, 784),
            (10, 110, 22, 484),
            (12, 108, 18, 324),
            (14, 112, 16, 256),
        ];
        for (alpha, beta, delta, n) in expect {
            let g = GridParams::new(alpha).unwrap();
            assert_eq!((g.beta, g.delta, g.num_classes()), (beta, delta, n));
            assert!(g.is_validated());
        }
        assert!(!GridParams::new(2).unwrap().is_validated());
    }

    #[test]
    fn rejects_odd_and_zero() {
        assert_eq!(GridParams::new(0), Err(Error::InvalidAlpha(0)));
        assert_eq!(GridParams::new(7), Err(Error::InvalidAlpha(7)));
        assert!(GridParams::from_parts(6, 110, 36).is_err());
        assert!(GridParams::from_parts(6, 108, 36).is_ok());
    }

    #[test]
    fn encode_examples() {
        let g = g6();
        assert_eq!(g.encode(0.0, 0.0), 666);
        assert_eq!(g.encode(-108.0, -108.0), 0);
        assert_eq!(g.encode(107.0, 107.0), 1295);
        // clamped
        assert_eq!(g.encode(-500.0, 500.0), 35 * 36);
        assert_eq!(g.encode(f64::NAN, 0.0), 18 * 36);
    }

    #[test]
    fn decode_examples() {
        let g = g6();
        assert_eq!(g.decode(666).unwrap(), (3.0, 3.0));
        assert_eq!(g.decode(0).unwrap(), (-105.0, -105.0));
        assert!(matches!(
            g.decode(1296),
            Err(Error::ClassOutOfRange { index: 1296, classes: 1296 })
        ));
    }

    #[test]
    fn centers_round_trip() {
        for alpha in VALIDATED_ALPHAS {
            let g = GridParams::new(alpha).unwrap();
            for c in 0..g.num_classes() {
                let (a, b) = g.decode(c).unwrap();
                assert_eq!(g.encode(a, b), c);
            }
        }
    }

    #[test]
    fn table_rows() {
        let rows = bin_table(&[4, 6, 12]).unwrap();
        assert_eq!((rows[0].total_class_points, rows[0].max_dev_ab, rows[0].avg_dev_ab), (2916, 2.0, 1.0));
        assert_eq!((rows[1].total_class_points, rows[1].max_dev_ab, rows[1].avg_dev_ab), (1296, 3.0, 1.5));
        assert_eq!((rows[2].total_class_points, rows[2].max_dev_ab, rows[2].avg_dev_ab), (324, 6.0, 3.0));
        assert!(bin_table(&[]).is_err());
        assert!(bin_table(&[5]).is_err());
    }

    #[test]
    fn map_lifts_elementwise() {
        let g = g6();
        let ab = AbPlanes::new(2, 1, vec![0.0, -108.0], vec![0.0, -108.0]).unwrap();
        let m = encode_planes(&ab, &g);
        assert_eq!(m.classes, vec![666, 0]);
        let back = decode_map(&m, &g).unwrap();
        assert_eq!(back.a, vec![3.0, -105.0]);
        assert!(decode_map(&ClassMap::filled(1, 1, 5000), &g).is_err());
    }

    #[test]
    fn nearest_resize_keeps_labels() {
        let m = ClassMap::new(4, 2, vec![1, 1, 2, 2, 3, 3, 4, 4]).unwrap();
        let r = m.resize_nearest(2, 1);
        assert_eq!(r.classes, vec![3, 4]);
        let up = m.resize_nearest(8, 4);
        assert_eq!(up.pixel_count(), 32);
        assert!(up.classes.iter().all(|c| (1..=4).contains(c)));
    }

    #[test]
    fn rgb_sweep_is_bounded() {
        let g = g6();
        let dev = rgb_deviation(&g, 0.0);
        assert!(dev.max_dev >= dev.avg_dev);
        assert!(dev.max_dev < 20.0);
    }
}
