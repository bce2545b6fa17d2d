//! Area-averaging resize for continuous planes.
//!
//! Each output sample is the mean of the source samples it covers, weighted
//! by fractional overlap. The filter is separable, so rows and columns are
//! handled independently. Class maps are never passed through here; they use
//! nearest-neighbor sampling.

use colorclass::colorspace::LabImage;

/// `(source index, weight)` taps for each output index along one axis.
fn axis_taps(src: usize, dst: usize) -> Vec<Vec<(usize, f64)>> {
    let scale = src as f64 / dst as f64;
    (0..dst)
        .map(|o| {
            let lo = o as f64 * scale;
            let hi = (o + 1) as f64 * scale;
            let first = lo.floor() as usize;
            let last = (hi.ceil() as usize).min(src);
            let mut taps: Vec<(usize, f64)> = (first..last)
                .map(|i| {
                    let overlap = (hi.min((i + 1) as f64) - lo.max(i as f64)).max(0.0);
                    (i, overlap)
                })
                .filter(|&(_, w)| w > 0.0)
                .collect();
            let total: f64 = taps.iter().map(|t| t.1).sum();
            taps.iter_mut().for_each(|t| t.1 /= total);
            taps
        })
        .collect()
}

pub fn area_resize_plane(plane: &[f64], width: usize, height: usize, out_w: usize, out_h: usize) -> Vec<f64> {
    let xt = axis_taps(width, out_w);
    let yt = axis_taps(height, out_h);
    let mut rows = vec![0.0; out_w * height];
    for y in 0..height {
        let src = &plane[y * width..(y + 1) * width];
        for (ox, taps) in xt.iter().enumerate() {
            rows[y * out_w + ox] = taps.iter().map(|&(i, w)| src[i] * w).sum();
        }
    }
    let mut out = vec![0.0; out_w * out_h];
    for (oy, taps) in yt.iter().enumerate() {
        for ox in 0..out_w {
            out[oy * out_w + ox] = taps.iter().map(|&(i, w)| rows[i * out_w + ox] * w).sum();
        }
    }
    out
}

pub fn area_resize_lab(img: &LabImage, out_w: usize, out_h: usize) -> LabImage {
    if img.width == out_w && img.height == out_h {
        return img.clone();
    }
    let r = |p: &[f64]| area_resize_plane(p, img.width, img.height, out_w, out_h);
    LabImage {
        width: out_w,
        height: out_h,
        l: r(&img.l),
        a: r(&img.a),
        b: r(&img.b),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn halving_averages_blocks() {
        let plane = vec![1.0, 3.0, 5.0, 7.0, 1.0, 3.0, 5.0, 7.0];
        assert_eq!(area_resize_plane(&plane, 4, 2, 2, 1), vec![2.0, 6.0]);
    }

    #[test]
    fn fractional_overlap() {
        // 3 -> 2: first output covers [0, 1.5)
        let out = area_resize_plane(&[0.0, 3.0, 6.0], 3, 1, 2, 1);
        assert!((out[0] - 1.0).abs() < 1e-12);
        assert!((out[1] - 5.0).abs() < 1e-12);
    }

    #[test]
    fn constant_is_preserved_and_upscale_works() {
        let out = area_resize_plane(&[4.5; 35], 7, 5, 3, 11);
        assert_eq!(out.len(), 33);
        assert!(out.iter().all(|v| (v - 4.5).abs() < 1e-12));
    }

    #[test]
    fn mean_is_preserved_on_integral_factor() {
        let plane: Vec<f64> = (0..64).map(f64::from).collect();
        let out = area_resize_plane(&plane, 8, 8, 4, 2);
        let m_in = plane.iter().sum::<f64>() / 64.0;
        let m_out = out.iter().sum::<f64>() / out.len() as f64;
        assert!((m_in - m_out).abs() < 1e-12);
    }
}
