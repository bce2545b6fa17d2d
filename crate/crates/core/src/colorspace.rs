//! sRGB (8-bit) <-> CIE 1976 L\*a\*b\* conversion.
//!
//! The transfer function is the IEC 61966-2-1 sRGB curve, the primaries are
//! the sRGB/Rec.709 primaries, and the reference white is D65. All arithmetic
//! is done in `f64`; the only quantization happens when writing 8-bit RGB.

use std::sync::LazyLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Linear sRGB -> CIE XYZ, D65, Y of white normalized to 1.
const RGB_TO_XYZ: [[f64; 3]; 3] = [
    [0.412_456_4, 0.357_576_1, 0.180_437_5],
    [0.212_672_9, 0.715_152_2, 0.072_175_0],
    [0.019_333_9, 0.119_192_0, 0.950_304_1],
];

/// D65 white in XYZ, taken as the image of linear (1, 1, 1) under
/// [`RGB_TO_XYZ`] so that neutral RGB lands exactly on a\* = b\* = 0.
/// Numerically (0.95047, 1.0000001, 1.08883).
const WHITE_D65: [f64; 3] = [
    RGB_TO_XYZ[0][0] + RGB_TO_XYZ[0][1] + RGB_TO_XYZ[0][2],
    RGB_TO_XYZ[1][0] + RGB_TO_XYZ[1][1] + RGB_TO_XYZ[1][2],
    RGB_TO_XYZ[2][0] + RGB_TO_XYZ[2][1] + RGB_TO_XYZ[2][2],
];

/// CIE epsilon, (6/29)^3.
const EPSILON: f64 = 216.0 / 24389.0;
/// CIE kappa, (29/3)^3.
const KAPPA: f64 = 24389.0 / 27.0;

static XYZ_TO_RGB: LazyLock<[[f64; 3]; 3]> = LazyLock::new(|| invert3(&RGB_TO_XYZ));

fn invert3(m: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let c00 = m[1][1] * m[2][2] - m[1][2] * m[2][1];
    let c01 = m[1][2] * m[2][0] - m[1][0] * m[2][2];
    let c02 = m[1][0] * m[2][1] - m[1][1] * m[2][0];
    let det = m[0][0] * c00 + m[0][1] * c01 + m[0][2] * c02;
    let inv_det = 1.0 / det;
    [
        [
            c00 * inv_det,
            (m[0][2] * m[2][1] - m[0][1] * m[2][2]) * inv_det,
            (m[0][1] * m[1][2] - m[0][2] * m[1][1]) * inv_det,
        ],
        [
            c01 * inv_det,
            (m[0][0] * m[2][2] - m[0][2] * m[2][0]) * inv_det,
            (m[0][2] * m[1][0] - m[0][0] * m[1][2]) * inv_det,
        ],
        [
            c02 * inv_det,
            (m[0][1] * m[2][0] - m[0][0] * m[2][1]) * inv_det,
            (m[0][0] * m[1][1] - m[0][1] * m[1][0]) * inv_det,
        ],
    ]
}

fn mul3(m: &[[f64; 3]; 3], v: [f64; 3]) -> [f64; 3] {
    [
        m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
        m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
        m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2],
    ]
}

#[inline]
fn srgb_to_linear(v: f64) -> f64 {
    if v <= 0.040_45 {
        v / 12.92
    } else {
        ((v + 0.055) / 1.055).powf(2.4)
    }
}

#[inline]
fn linear_to_srgb(v: f64) -> f64 {
    if v <= 0.003_130_8 {
        v * 12.92
    } else {
        1.055 * v.powf(1.0 / 2.4) - 0.055
    }
}

#[inline]
fn lab_f(t: f64) -> f64 {
    if t > EPSILON {
        t.cbrt()
    } else {
        (KAPPA * t + 16.0) / 116.0
    }
}

#[inline]
fn lab_f_inv(f: f64) -> f64 {
    let f3 = f * f * f;
    if f3 > EPSILON {
        f3
    } else {
        (116.0 * f - 16.0) / KAPPA
    }
}

/// Converts one 8-bit sRGB triple to `[L, a, b]`.
pub fn rgb_pixel_to_lab(rgb: [u8; 3]) -> [f64; 3] {
    let lin = rgb.map(|c| srgb_to_linear(f64::from(c) / 255.0));
    let xyz = mul3(&RGB_TO_XYZ, lin);
    let fx = lab_f(xyz[0] / WHITE_D65[0]);
    let fy = lab_f(xyz[1] / WHITE_D65[1]);
    let fz = lab_f(xyz[2] / WHITE_D65[2]);
    let l = (116.0 * fy - 16.0).clamp(0.0, 100.0);
    [l, 500.0 * (fx - fy), 200.0 * (fy - fz)]
}

/// Converts `[L, a, b]` to 8-bit sRGB, clamping out-of-gamut channels.
pub fn lab_pixel_to_rgb(lab: [f64; 3]) -> [u8; 3] {
    let fy = (lab[0] + 16.0) / 116.0;
    let fx = fy + lab[1] / 500.0;
    let fz = fy - lab[2] / 200.0;
    let xyz = [
        lab_f_inv(fx) * WHITE_D65[0],
        lab_f_inv(fy) * WHITE_D65[1],
        lab_f_inv(fz) * WHITE_D65[2],
    ];
    mul3(&XYZ_TO_RGB, xyz).map(|c| {
        let v = linear_to_srgb(c.clamp(0.0, 1.0));
        // NaN input saturates to 0 through the cast.
        (v * 255.0).round().clamp(0.0, 255.0) as u8
    })
}

/// Interleaved 8-bit RGB image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl RgbImage {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        let expected = width * height * 3;
        if data.len() != expected {
            return Err(Error::BufferLength {
                expected,
                actual: data.len(),
            });
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> [u8; 3]) -> Self {
        let mut data = Vec::with_capacity(width * height * 3);
        for y in 0..height {
            for x in 0..width {
                data.extend_from_slice(&f(x, y));
            }
        }
        Self {
            width,
            height,
            data,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn into_data(self) -> Vec<u8> {
        self.data
    }

    pub fn pixel(&self, x: usize, y: usize) -> [u8; 3] {
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn pixels(&self) -> impl Iterator<Item = [u8; 3]> + '_ {
        self.data.chunks_exact(3).map(|p| [p[0], p[1], p[2]])
    }
}

/// Planar CIELAB image.
#[derive(Debug, Clone, PartialEq)]
pub struct LabImage {
    pub width: usize,
    pub height: usize,
    pub l: Vec<f64>,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

impl LabImage {
    pub fn new(width: usize, height: usize, l: Vec<f64>, a: Vec<f64>, b: Vec<f64>) -> Result<Self> {
        let expected = width * height;
        for plane in [&l, &a, &b] {
            if plane.len() != expected {
                return Err(Error::BufferLength {
                    expected,
                    actual: plane.len(),
                });
            }
        }
        Ok(Self {
            width,
            height,
            l,
            a,
            b,
        })
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    /// The chroma planes, dropping lightness.
    pub fn ab(&self) -> AbPlanes {
        AbPlanes {
            width: self.width,
            height: self.height,
            a: self.a.clone(),
            b: self.b.clone(),
        }
    }

    /// Recombines a lightness plane with predicted chroma.
    pub fn from_l_and_ab(width: usize, height: usize, l: Vec<f64>, ab: AbPlanes) -> Result<Self> {
        if ab.width != width || ab.height != height {
            return Err(Error::DimensionMismatch {
                expected: format!("{width}x{height}"),
                actual: format!("{}x{}", ab.width, ab.height),
            });
        }
        Self::new(width, height, l, ab.a, ab.b)
    }
}

/// The two chroma planes (a\*, b\*) of a Lab image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbPlanes {
    pub width: usize,
    pub height: usize,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

impl AbPlanes {
    pub fn new(width: usize, height: usize, a: Vec<f64>, b: Vec<f64>) -> Result<Self> {
        let expected = width * height;
        for plane in [&a, &b] {
            if plane.len() != expected {
                return Err(Error::BufferLength {
                    expected,
                    actual: plane.len(),
                });
            }
        }
        Ok(Self {
            width,
            height,
            a,
            b,
        })
    }

    pub fn filled(width: usize, height: usize, a: f64, b: f64) -> Self {
        let n = width * height;
        Self {
            width,
            height,
            a: vec![a; n],
            b: vec![b; n],
        }
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    pub(crate) fn check_same_shape(&self, other: &AbPlanes) -> Result<()> {
        if self.width != other.width || self.height != other.height {
            return Err(Error::DimensionMismatch {
                expected: format!("{}x{}", self.width, self.height),
                actual: format!("{}x{}", other.width, other.height),
            });
        }
        Ok(())
    }
}

pub fn rgb_to_lab(img: &RgbImage) -> LabImage {
    let n = img.pixel_count();
    let mut l = Vec::with_capacity(n);
    let mut a = Vec::with_capacity(n);
    let mut b = Vec::with_capacity(n);
    for px in img.pixels() {
        let [pl, pa, pb] = rgb_pixel_to_lab(px);
        l.push(pl);
        a.push(pa);
        b.push(pb);
    }
    LabImage {
        width: img.width,
        height: img.height,
        l,
        a,
        b,
    }
}

pub fn lab_to_rgb(img: &LabImage) -> RgbImage {
    let mut data = Vec::with_capacity(img.pixel_count() * 3);
    for i in 0..img.pixel_count() {
        data.extend_from_slice(&lab_pixel_to_rgb([img.l[i], img.a[i], img.b[i]]));
    }
    RgbImage {
        width: img.width,
        height: img.height,
        data,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn black_is_origin() {
        let [l, a, b] = rgb_pixel_to_lab([0, 0, 0]);
        assert_eq!((l, a, b), (0.0, 0.0, 0.0));
        assert_eq!(lab_pixel_to_rgb([0.0, 0.0, 0.0]), [0, 0, 0]);
    }

    #[test]
    fn white_is_reference() {
        let [l, a, b] = rgb_pixel_to_lab([255, 255, 255]);
        assert_abs_diff_eq!(l, 100.0, epsilon = 1e-4);
        assert_abs_diff_eq!(a, 0.0, epsilon = 1e-4);
        assert_abs_diff_eq!(b, 0.0, epsilon = 1e-4);
        assert_eq!(lab_pixel_to_rgb([100.0, 0.0, 0.0]), [255, 255, 255]);
    }

    #[test]
    fn mid_gray() {
        // Independent evaluation: ((128/255 + 0.055)/1.055)^2.4 = 0.2158605,
        // L = 116 * cbrt(0.2158605) - 16 = 53.5850.
        let [l, a, b] = rgb_pixel_to_lab([128, 128, 128]);
        assert_abs_diff_eq!(l, 53.585, epsilon = 1e-3);
        assert!(a.abs() < 1e-3 && b.abs() < 1e-3);
    }

    #[test]
    fn gray_axis_is_neutral_and_monotone() {
        let mut prev = -1.0;
        for v in 0..=255u8 {
            let [l, a, b] = rgb_pixel_to_lab([v, v, v]);
            assert!(a.abs() < 1e-3 && b.abs() < 1e-3, "level {v}: a={a} b={b}");
            assert!(l > prev, "L not increasing at {v}");
            prev = l;
        }
    }

    #[test]
    fn inverse_matrix_is_inverse() {
        let inv = &*XYZ_TO_RGB;
        for (i, row) in RGB_TO_XYZ.iter().enumerate() {
            for j in 0..3 {
                let col = inv.map(|r| r[j]);
                let dot: f64 = row.iter().zip(col).map(|(x, y)| x * y).sum();
                assert_abs_diff_eq!(dot, if i == j { 1.0 } else { 0.0 }, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn out_of_gamut_clamps() {
        assert_eq!(lab_pixel_to_rgb([50.0, 127.0, -128.0])[1], 0);
        assert_eq!(lab_pixel_to_rgb([150.0, 0.0, 0.0]), [255, 255, 255]);
    }

    #[test]
    fn image_roundtrip() {
        let img = RgbImage::from_fn(7, 5, |x, y| [(x * 30) as u8, (y * 50) as u8, 200]);
        let lab = rgb_to_lab(&img);
        assert_eq!(lab.pixel_count(), 35);
        assert_eq!(lab_to_rgb(&lab), img);
    }

    #[test]
    fn rejects_bad_buffer() {
        assert!(RgbImage::new(2, 2, vec![0; 11]).is_err());
        assert!(LabImage::new(1, 1, vec![0.0], vec![], vec![0.0]).is_err());
    }
}
