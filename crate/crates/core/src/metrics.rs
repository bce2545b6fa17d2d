//! Class-space colorization metrics and MSE/PSNR.
//!
//! * CNR: distinct classes in the prediction over distinct classes in the
//!   ground truth.
//! * CCAR: distinct classes in the prediction, raw and as a fraction of the
//!   size of the class set.
//! * TAR: pixel-exact class agreement, averaged over images, in percent.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::classgrid::ClassMap;
use crate::colorspace::RgbImage;
use crate::error::{Error, Result};

pub fn unique_classes(map: &ClassMap) -> usize {
    map.classes.iter().collect::<HashSet<_>>().len()
}

pub fn cnr(pred: &ClassMap, truth: &ClassMap) -> Result<f64> {
    if truth.pixel_count() == 0 {
        return Err(Error::Empty("ground-truth class map"));
    }
    Ok(unique_classes(pred) as f64 / unique_classes(truth) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ccar {
    pub raw: usize,
    pub ratio: f64,
}

pub fn ccar(pred: &ClassMap, n_class: usize) -> Result<Ccar> {
    if n_class == 0 {
        return Err(Error::InvalidParameter("class set size must be at least 1".into()));
    }
    let raw = unique_classes(pred);
    Ok(Ccar {
        raw,
        ratio: raw as f64 / n_class as f64,
    })
}

/// Fraction of pixels whose classes agree.
pub fn pixel_accuracy(pred: &ClassMap, truth: &ClassMap) -> Result<f64> {
    if !pred.same_shape(truth) {
        return Err(Error::DimensionMismatch {
            expected: format!("{}x{}", truth.width, truth.height),
            actual: format!("{}x{}", pred.width, pred.height),
        });
    }
    if truth.pixel_count() == 0 {
        return Err(Error::Empty("class map"));
    }
    let hits = pred
        .classes
        .iter()
        .zip(&truth.classes)
        .filter(|(p, t)| p == t)
        .count();
    Ok(hits as f64 / truth.pixel_count() as f64)
}

/// Mean per-image pixel accuracy, times 100.
pub fn tar(preds: &[ClassMap], truths: &[ClassMap]) -> Result<f64> {
    if preds.len() != truths.len() {
        return Err(Error::DimensionMismatch {
            expected: format!("{} images", truths.len()),
            actual: format!("{} images", preds.len()),
        });
    }
    if preds.is_empty() {
        return Err(Error::Empty("image list"));
    }
    let mut sum = 0.0;
    for (p, t) in preds.iter().zip(truths) {
        sum += pixel_accuracy(p, t)?;
    }
    Ok(100.0 * sum / preds.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MsePsnr {
    pub mse: f64,
    /// `+inf` when the inputs are identical.
    pub psnr: f64,
}

/// MSE and PSNR over values already normalized to `[0, 1]`.
pub fn mse_psnr_normalized(pred: &[f64], truth: &[f64]) -> Result<MsePsnr> {
    if pred.len() != truth.len() {
        return Err(Error::BufferLength {
            expected: truth.len(),
            actual: pred.len(),
        });
    }
    if pred.is_empty() {
        return Err(Error::Empty("image"));
    }
    let sq: Vec<f64> = pred.iter().zip(truth).map(|(p, t)| (p - t) * (p - t)).collect();
    let mse = crate::weighting::pairwise_sum(&sq) / sq.len() as f64;
    let psnr = if mse == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (1.0 / mse).log10()
    };
    Ok(MsePsnr { mse, psnr })
}

/// MSE/PSNR between two 8-bit RGB images scaled to `[0, 1]`.
pub fn mse_psnr(pred: &RgbImage, truth: &RgbImage) -> Result<MsePsnr> {
    if pred.width() != truth.width() || pred.height() != truth.height() {
        return Err(Error::DimensionMismatch {
            expected: format!("{}x{}", truth.width(), truth.height()),
            actual: format!("{}x{}", pred.width(), pred.height()),
        });
    }
    let norm = |img: &RgbImage| img.data().iter().map(|&v| f64::from(v) / 255.0).collect::<Vec<_>>();
    mse_psnr_normalized(&norm(pred), &norm(truth))
}

/// Metrics for one prediction/ground-truth pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageMetrics {
    pub cnr: f64,
    pub ccar_raw: usize,
    pub ccar_ratio: f64,
    /// Pixel accuracy of this image, in percent.
    pub tar_percent: f64,
    pub mse: Option<f64>,
    pub psnr: Option<f64>,
}

pub fn image_metrics(
    pred: &ClassMap,
    truth: &ClassMap,
    n_class: usize,
    rgb: Option<(&RgbImage, &RgbImage)>,
) -> Result<ImageMetrics> {
    let acc = pixel_accuracy(pred, truth)?;
    let c = ccar(pred, n_class)?;
    let mp = rgb.map(|(p, t)| mse_psnr(p, t)).transpose()?;
    Ok(ImageMetrics {
        cnr: cnr(pred, truth)?,
        ccar_raw: c.raw,
        ccar_ratio: c.ratio,
        tar_percent: 100.0 * acc,
        mse: mp.map(|m| m.mse),
        psnr: mp.map(|m| m.psnr),
    })
}

/// Corpus means of per-image metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub images: usize,
    pub cnr: f64,
    pub ccar_raw: f64,
    pub ccar_ratio: f64,
    pub tar_percent: f64,
    pub mse: Option<f64>,
    /// Mean of finite per-image PSNR values; `None` if every pair was identical
    /// or no RGB data was supplied.
    pub psnr: Option<f64>,
    /// Pairs whose PSNR was infinite.
    pub identical_pairs: usize,
}

impl MetricsReport {
    /// Ordered mean over `per_image`.
    pub fn aggregate(per_image: &[ImageMetrics]) -> Result<Self> {
        if per_image.is_empty() {
            return Err(Error::Empty("metrics list"));
        }
        let n = per_image.len() as f64;
        let mean = |f: &dyn Fn(&ImageMetrics) -> f64| per_image.iter().map(f).sum::<f64>() / n;
        let mses: Vec<f64> = per_image.iter().filter_map(|m| m.mse).collect();
        let psnrs: Vec<f64> = per_image
            .iter()
            .filter_map(|m| m.psnr)
            .filter(|p| p.is_finite())
            .collect();
        let identical = per_image
            .iter()
            .filter(|m| m.psnr.is_some_and(f64::is_infinite))
            .count();
        Ok(Self {
            images: per_image.len(),
            cnr: mean(&|m| m.cnr),
            ccar_raw: mean(&|m| m.ccar_raw as f64),
            ccar_ratio: mean(&|m| m.ccar_ratio),
            tar_percent: mean(&|m| m.tar_percent),
            mse: (!mses.is_empty()).then(|| mses.iter().sum::<f64>() / mses.len() as f64),
            psnr: (!psnrs.is_empty()).then(|| psnrs.iter().sum::<f64>() / psnrs.len() as f64),
            identical_pairs: identical,
        })
    }
}
