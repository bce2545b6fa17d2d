//! Command implementations. Each command reads its inputs, runs the library
//! operations and returns serializable reports; `cli` handles argument
//! parsing and where reports are written.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use colorclass::classgrid::{self, ClassMap, GridParams, RgbDeviation};
use colorclass::classopt::{self, ApprovedClassSet, ClassHistogram, DenseIndex};
use colorclass::colorspace::{self, AbPlanes, LabImage, RgbImage};
use colorclass::harmonize::{self, HarmonizeDiff, HarmonizeParams, SegmentMaskSet};
use colorclass::metrics::{self, ImageMetrics, MetricsReport};
use colorclass::weighting::{self, BatchStats};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{sha256_hex, PipelineConfig};
use crate::formats::{
    self, ensure_same_grid, ApprovedSetDoc, BatchShape, ClassMapMeta, CorpusManifest, FileFailure, GridDoc,
    HistogramDoc, WeightTableDoc, SCHEMA_VERSION,
};
use crate::resize::area_resize_lab;

/// Process exit status for a command that ran to completion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Success,
    /// Some inputs failed; a report was still produced.
    Partial,
}

impl Status {
    pub fn code(self) -> i32 {
        match self {
            Status::Success => 0,
            Status::Partial => 1,
        }
    }

    fn from_failures(n: usize) -> Self {
        if n == 0 {
            Status::Success
        } else {
            Status::Partial
        }
    }
}

// ---------------------------------------------------------------------------
// analyze-bins
// ---------------------------------------------------------------------------

/// RGB anchors of the auxiliary deviation sweep.
pub const RGB_ANCHORS: [f64; 3] = [50.0, 0.0, -50.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RgbColumns {
    pub max_dev: [f64; 3],
    pub max_dev_mean: f64,
    pub avg_dev: [f64; 3],
    pub avg_dev_mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinReportRow {
    pub alpha: u32,
    pub beta: u32,
    pub delta: u32,
    pub total_class_points: u32,
    pub max_dev_ab: f64,
    pub avg_dev_ab: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rgb: Option<RgbColumns>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinReport {
    pub schema_version: u32,
    pub kind: String,
    pub rows: Vec<BinReportRow>,
    pub warnings: Vec<String>,
}

pub fn analyze_bins(alphas: &[u32], with_rgb: bool) -> Result<BinReport> {
    ensure!(!alphas.is_empty(), "no bin sizes given");
    let table = classgrid::bin_table(alphas)?;
    let mut warnings = Vec::new();
    let rows = table
        .into_iter()
        .map(|row| {
            let grid = GridParams::new(row.alpha).expect("validated by bin_table");
            if !grid.is_validated() {
                warnings.push(format!(
                    "alpha={} is outside the validated set {:?}",
                    row.alpha,
                    classgrid::VALIDATED_ALPHAS
                ));
            }
            let rgb = with_rgb.then(|| {
                let devs: Vec<RgbDeviation> =
                    RGB_ANCHORS.iter().map(|&a| classgrid::rgb_deviation(&grid, a)).collect();
                let max_dev = [devs[0].max_dev, devs[1].max_dev, devs[2].max_dev];
                let avg_dev = [devs[0].avg_dev, devs[1].avg_dev, devs[2].avg_dev];
                RgbColumns {
                    max_dev_mean: max_dev.iter().sum::<f64>() / 3.0,
                    avg_dev_mean: avg_dev.iter().sum::<f64>() / 3.0,
                    max_dev,
                    avg_dev,
                }
            });
            BinReportRow {
                alpha: grid.alpha,
                beta: grid.beta,
                delta: grid.delta,
                total_class_points: row.total_class_points,
                max_dev_ab: row.max_dev_ab,
                avg_dev_ab: row.avg_dev_ab,
                rgb,
            }
        })
        .collect();
    Ok(BinReport {
        schema_version: SCHEMA_VERSION,
        kind: "bin_analysis".into(),
        rows,
        warnings,
    })
}

pub fn bin_report_csv(report: &BinReport) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let with_rgb = report.rows.iter().any(|r| r.rgb.is_some());
    let mut header = vec!["alpha", "beta", "delta", "total_class_points", "max_dev_ab", "avg_dev_ab"];
    if with_rgb {
        header.extend([
            "rgb_max_dev_50",
            "rgb_max_dev_0",
            "rgb_max_dev_-50",
            "rgb_max_dev_mean",
            "rgb_avg_dev_50",
            "rgb_avg_dev_0",
            "rgb_avg_dev_-50",
            "rgb_avg_dev_mean",
        ]);
    }
    w.write_record(&header)?;
    for r in &report.rows {
        let mut rec = vec![
            r.alpha.to_string(),
            r.beta.to_string(),
            r.delta.to_string(),
            r.total_class_points.to_string(),
            r.max_dev_ab.to_string(),
            r.avg_dev_ab.to_string(),
        ];
        if let Some(rgb) = &r.rgb {
            rec.extend(rgb.max_dev.iter().map(|v| format!("{v:.2}")));
            rec.push(format!("{:.2}", rgb.max_dev_mean));
            rec.extend(rgb.avg_dev.iter().map(|v| format!("{v:.2}")));
            rec.push(format!("{:.2}", rgb.avg_dev_mean));
        }
        w.write_record(&rec)?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

// ---------------------------------------------------------------------------
// build-histogram
// ---------------------------------------------------------------------------

/// Class map of one image as counted for the histogram: Lab conversion,
/// optional area-averaged resize of the Lab planes, then quantization.
pub fn classify_image(img: &RgbImage, grid: &GridParams, resize: Option<[u32; 2]>) -> ClassMap {
    let lab = colorspace::rgb_to_lab(img);
    let lab = match resize {
        Some([w, h]) => area_resize_lab(&lab, w as usize, h as usize),
        None => lab,
    };
    classgrid::encode_image(&lab, grid)
}

fn histogram_one(path: &Path, expected_sha: Option<&str>, grid: GridParams, resize: Option<[u32; 2]>) -> Result<ClassHistogram> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    if let Some(want) = expected_sha {
        let got = sha256_hex(&bytes);
        ensure!(got.eq_ignore_ascii_case(want), "checksum mismatch: manifest {want}, file {got}");
    }
    let img = image::load_from_memory(&bytes).with_context(|| format!("decoding {}", path.display()))?;
    let rgb = img.to_rgb8();
    let (w, h) = rgb.dimensions();
    ensure!(w > 0 && h > 0, "empty image");
    let img = RgbImage::new(w as usize, h as usize, rgb.into_raw())?;
    let map = classify_image(&img, &grid, resize);
    Ok(classopt::accumulate_histogram([&map], grid)?)
}

pub fn build_histogram(manifest: &CorpusManifest, config: &PipelineConfig) -> Result<(HistogramDoc, Status)> {
    ensure!(!manifest.files.is_empty(), "manifest lists no files");
    let grid = config.grid()?;
    if let Some([w, h]) = config.histogram_resize {
        ensure!(w > 0 && h > 0, "resize target must be non-zero");
    }
    let partials: Vec<Result<ClassHistogram>> = manifest
        .files
        .par_iter()
        .map(|entry| {
            histogram_one(
                &manifest.resolve(entry),
                entry.sha256.as_deref(),
                grid,
                config.histogram_resize,
            )
        })
        .collect();
    let mut hist = ClassHistogram::empty(grid);
    let mut failures = Vec::new();
    let mut counted = 0;
    for (entry, part) in manifest.files.iter().zip(partials) {
        match part {
            Ok(h) => {
                hist.merge(&h)?;
                counted += 1;
            }
            Err(e) => failures.push(FileFailure {
                path: entry.path.clone(),
                error: format!("{e:#}"),
            }),
        }
    }
    let status = Status::from_failures(failures.len());
    Ok((
        HistogramDoc::new(&hist, config.hash(), config.histogram_resize, counted, failures),
        status,
    ))
}

// ---------------------------------------------------------------------------
// optimize-classes
// ---------------------------------------------------------------------------

pub fn optimize_classes(doc: &HistogramDoc, config: &PipelineConfig) -> Result<ApprovedSetDoc> {
    let hist = doc.histogram()?;
    ensure_same_grid(config.grid()?, hist.grid, "histogram")?;
    let threshold = config.threshold();
    let set = classopt::select_classes(&hist, threshold)?;
    Ok(ApprovedSetDoc::new(&set, threshold, hist.total_samples, config.hash()))
}

// ---------------------------------------------------------------------------
// weights
// ---------------------------------------------------------------------------

/// Loads a class map and converts it to dense indices of `set`.
pub fn load_dense_map(path: &Path, set: &ApprovedClassSet, set_hash: &str, dense: &DenseIndex) -> Result<ClassMap> {
    let (map, meta) = formats::read_classmap(path)?;
    ensure_same_grid(set.grid, meta.grid()?, &path.display().to_string())?;
    if meta.compacted {
        ensure!(
            meta.approved_set_hash.as_deref() == Some(set_hash),
            "{} was compacted against approved set {:?}, not {set_hash}",
            path.display(),
            meta.approved_set_hash
        );
        map.check_bound(dense.len() as u32)?;
        Ok(map)
    } else {
        Ok(dense.compact_map(&map, set)?)
    }
}

pub fn weights(maps: &[PathBuf], approved: &ApprovedSetDoc, config: &PipelineConfig) -> Result<WeightTableDoc> {
    ensure!(!maps.is_empty(), "no class maps given");
    let set = approved.set()?;
    ensure_same_grid(config.grid()?, set.grid, "approved set")?;
    let dense = set.dense_index();
    let loaded = maps
        .iter()
        .map(|p| load_dense_map(p, &set, &approved.approved_set_hash, &dense))
        .collect::<Result<Vec<_>>>()?;
    let stats = BatchStats::from_maps(&loaded, dense.len())?;
    let table = weighting::batch_weights_with(&stats, config.p_percent, config.psi_mode())?;
    let uniform_shape = loaded.windows(2).all(|w| w[0].same_shape(&w[1]));
    Ok(WeightTableDoc {
        schema_version: SCHEMA_VERSION,
        kind: WeightTableDoc::KIND.into(),
        grid: set.grid.into(),
        config_hash: config.hash(),
        approved_set_hash: approved.approved_set_hash.clone(),
        n_classes: dense.len(),
        p_percent: table.p_percent,
        psi: table.psi,
        psi_mode: config.psi_mode(),
        batch: BatchShape {
            maps: loaded.len(),
            height: uniform_shape.then(|| loaded[0].height),
            width: uniform_shape.then(|| loaded[0].width),
        },
        total: stats.total,
        dense_to_class: set.approved.clone(),
        counts: stats.counts.iter().enumerate().map(|(i, &c)| (i as u32, c)).collect(),
        weights: table.weights.iter().enumerate().map(|(i, &w)| (i as u32, w)).collect(),
    })
}

// ---------------------------------------------------------------------------
// harmonize
// ---------------------------------------------------------------------------

pub enum ChromaSource {
    /// `<prefix>.a.png` / `<prefix>.b.png`.
    Planes(PathBuf),
    /// A class map decoded to bin centers.
    ClassMap(PathBuf),
}

pub enum MaskSource {
    Dir(PathBuf),
    LabelMap(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarmonizeReport {
    pub schema_version: u32,
    pub kind: String,
    pub config_hash: String,
    pub params: HarmonizeParams,
    pub width: usize,
    pub height: usize,
    pub segments: usize,
    pub disjoint_segments: bool,
    pub segment_labels: Option<Vec<String>>,
    pub diff: HarmonizeDiff,
}

pub fn load_chroma(src: &ChromaSource, config: &PipelineConfig) -> Result<AbPlanes> {
    match src {
        ChromaSource::Planes(prefix) => formats::read_ab(prefix),
        ChromaSource::ClassMap(path) => {
            let (map, meta) = formats::read_classmap(path)?;
            ensure!(!meta.compacted, "{} holds dense indices; expand it first", path.display());
            let grid = meta.grid()?;
            ensure_same_grid(config.grid()?, grid, &path.display().to_string())?;
            Ok(classgrid::decode_map(&map, &grid)?)
        }
    }
}

pub fn load_masks(src: &MaskSource) -> Result<SegmentMaskSet> {
    match src {
        MaskSource::Dir(d) => formats::read_mask_dir(d),
        MaskSource::LabelMap(p) => formats::read_label_map(p),
    }
}

/// Harmonizes chroma and, when a grayscale image is supplied, recombines its
/// lightness with the harmonized chroma into an RGB image.
pub fn harmonize(
    chroma: &AbPlanes,
    masks: &SegmentMaskSet,
    gray: Option<&RgbImage>,
    config: &PipelineConfig,
) -> Result<(AbPlanes, Option<RgbImage>, HarmonizeReport)> {
    let params = config.harmonize_params();
    let out = harmonize::harmonize(chroma, masks, &params)?;
    let rgb = gray
        .map(|g| -> Result<RgbImage> {
            ensure!(
                g.width() == out.width && g.height() == out.height,
                "gray image is {}x{}, chroma is {}x{}",
                g.width(),
                g.height(),
                out.width,
                out.height
            );
            let l = colorspace::rgb_to_lab(g).l;
            let lab = LabImage::from_l_and_ab(out.width, out.height, l, out.clone())?;
            Ok(colorspace::lab_to_rgb(&lab))
        })
        .transpose()?;
    let report = HarmonizeReport {
        schema_version: SCHEMA_VERSION,
        kind: "harmonize_report".into(),
        config_hash: config.hash(),
        params,
        width: out.width,
        height: out.height,
        segments: masks.len(),
        disjoint_segments: masks.is_disjoint(),
        segment_labels: masks.labels().map(<[String]>::to_vec),
        diff: harmonize::diff(chroma, &out)?,
    };
    Ok((out, rgb, report))
}

// ---------------------------------------------------------------------------
// evaluate
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputKind {
    /// Color images, quantized on the configured grid.
    Rgb,
    /// Class-map PNGs with sidecars.
    ClassMap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub file: String,
    pub status: String,
    pub width: Option<usize>,
    pub height: Option<usize>,
    #[serde(flatten)]
    pub metrics: Option<ImageMetrics>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub schema_version: u32,
    pub kind: String,
    pub grid: GridDoc,
    pub config_hash: String,
    pub compacted: bool,
    pub approved_set_hash: Option<String>,
    /// Size of the class set used as the CCAR denominator.
    pub n_class: usize,
    pub pairs_total: usize,
    pub pairs_ok: usize,
    pub pairs_failed: usize,
    /// Corpus means; `tar_percent` is the mean of per-image pixel accuracy
    /// over successful pairs, in percent.
    pub corpus: Option<MetricsReport>,
    pub failures: Vec<FileFailure>,
}

struct ClassSpace<'a> {
    grid: GridParams,
    approved: Option<(&'a ApprovedClassSet, &'a str, DenseIndex)>,
}

impl ClassSpace<'_> {
    fn n_class(&self) -> usize {
        match &self.approved {
            Some((_, _, d)) => d.len(),
            None => self.grid.num_classes() as usize,
        }
    }

    fn project(&self, map: ClassMap) -> Result<ClassMap> {
        match &self.approved {
            Some((set, _, dense)) => Ok(dense.compact_map(&map, set)?),
            None => Ok(map),
        }
    }

    fn load(&self, path: &Path, kind: InputKind) -> Result<(ClassMap, Option<RgbImage>)> {
        match kind {
            InputKind::Rgb => {
                let img = formats::load_rgb(path)?;
                let map = classgrid::encode_image(&colorspace::rgb_to_lab(&img), &self.grid);
                Ok((self.project(map)?, Some(img)))
            }
            InputKind::ClassMap => {
                let (map, meta) = formats::read_classmap(path)?;
                ensure_same_grid(self.grid, meta.grid()?, &path.display().to_string())?;
                if meta.compacted {
                    let Some((_, hash, dense)) = &self.approved else {
                        bail!("{} holds dense indices but no approved set was given", path.display());
                    };
                    ensure!(
                        meta.approved_set_hash.as_deref() == Some(*hash),
                        "{} was compacted against a different approved set",
                        path.display()
                    );
                    map.check_bound(dense.len() as u32)?;
                    Ok((map, None))
                } else {
                    Ok((self.project(map)?, None))
                }
            }
        }
    }
}

fn eval_pair(space: &ClassSpace<'_>, pred: &Path, truth: &Path, kind: InputKind) -> Result<(usize, usize, ImageMetrics)> {
    let (pm, prgb) = space.load(pred, kind)?;
    let (tm, trgb) = space.load(truth, kind)?;
    ensure!(
        pm.same_shape(&tm),
        "dimension mismatch: prediction {}x{}, ground truth {}x{}",
        pm.width,
        pm.height,
        tm.width,
        tm.height
    );
    let rgb = prgb.as_ref().zip(trgb.as_ref());
    let m = metrics::image_metrics(&pm, &tm, space.n_class(), rgb)?;
    Ok((tm.width, tm.height, m))
}

fn relative_files(dir: &Path, kind: InputKind) -> Result<Vec<String>> {
    let files = formats::list_images(dir)?;
    Ok(files
        .iter()
        .filter(|p| kind == InputKind::Rgb || p.extension().is_some_and(|e| e.eq_ignore_ascii_case("png")))
        .map(|p| p.strip_prefix(dir).unwrap_or(p).to_string_lossy().replace('\\', "/"))
        .collect())
}

pub fn evaluate(
    pred_dir: &Path,
    truth_dir: &Path,
    kind: InputKind,
    approved: Option<&ApprovedSetDoc>,
    config: &PipelineConfig,
) -> Result<(Vec<EvalRow>, EvalSummary, Status)> {
    let grid = config.grid()?;
    let set = approved.map(ApprovedSetDoc::set).transpose()?;
    if let Some(s) = &set {
        ensure_same_grid(grid, s.grid, "approved set")?;
    }
    let space = ClassSpace {
        grid,
        approved: set
            .as_ref()
            .zip(approved)
            .map(|(s, doc)| (s, doc.approved_set_hash.as_str(), s.dense_index())),
    };
    let files = relative_files(truth_dir, kind)?;
    ensure!(!files.is_empty(), "no ground-truth images in {}", truth_dir.display());

    let results: Vec<Result<(usize, usize, ImageMetrics)>> = files
        .par_iter()
        .map(|rel| {
            let pred = pred_dir.join(rel);
            ensure!(pred.exists(), "no prediction for {rel}");
            eval_pair(&space, &pred, &truth_dir.join(rel), kind)
        })
        .collect();

    let mut rows = Vec::with_capacity(files.len());
    let mut ok = Vec::new();
    let mut failures = Vec::new();
    for (rel, res) in files.iter().zip(results) {
        match res {
            Ok((w, h, m)) => {
                ok.push(m.clone());
                rows.push(EvalRow {
                    file: rel.clone(),
                    status: "ok".into(),
                    width: Some(w),
                    height: Some(h),
                    metrics: Some(m),
                    error: None,
                });
            }
            Err(e) => {
                let msg = format!("{e:#}");
                failures.push(FileFailure {
                    path: rel.clone(),
                    error: msg.clone(),
                });
                rows.push(EvalRow {
                    file: rel.clone(),
                    status: "error".into(),
                    width: None,
                    height: None,
                    metrics: None,
                    error: Some(msg),
                });
            }
        }
    }
    let corpus = (!ok.is_empty()).then(|| MetricsReport::aggregate(&ok)).transpose()?;
    let summary = EvalSummary {
        schema_version: SCHEMA_VERSION,
        kind: "metrics_summary".into(),
        grid: grid.into(),
        config_hash: config.hash(),
        compacted: space.approved.is_some(),
        approved_set_hash: approved.map(|a| a.approved_set_hash.clone()),
        n_class: space.n_class(),
        pairs_total: files.len(),
        pairs_ok: ok.len(),
        pairs_failed: failures.len(),
        corpus,
        failures,
    };
    let status = Status::from_failures(summary.pairs_failed);
    Ok((rows, summary, status))
}

fn fmt_opt(v: Option<f64>) -> String {
    match v {
        Some(x) if x.is_infinite() => "inf".into(),
        Some(x) => x.to_string(),
        None => String::new(),
    }
}

pub fn eval_rows_csv(rows: &[EvalRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "file", "status", "width", "height", "cnr", "ccar_raw", "ccar_ratio", "tar_percent", "mse", "psnr", "error",
    ])?;
    for r in rows {
        let m = r.metrics.as_ref();
        w.write_record([
            r.file.clone(),
            r.status.clone(),
            r.width.map(|v| v.to_string()).unwrap_or_default(),
            r.height.map(|v| v.to_string()).unwrap_or_default(),
            fmt_opt(m.map(|m| m.cnr)),
            m.map(|m| m.ccar_raw.to_string()).unwrap_or_default(),
            fmt_opt(m.map(|m| m.ccar_ratio)),
            fmt_opt(m.map(|m| m.tar_percent)),
            fmt_opt(m.and_then(|m| m.mse)),
            fmt_opt(m.and_then(|m| m.psnr)),
            r.error.clone().unwrap_or_default(),
        ])?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

// ---------------------------------------------------------------------------
// roundtrip
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundtripReport {
    pub schema_version: u32,
    pub kind: String,
    pub grid: GridDoc,
    pub config_hash: String,
    pub width: usize,
    pub height: usize,
    pub max_dev_a: f64,
    pub max_dev_b: f64,
    pub mean_dev_a: f64,
    pub mean_dev_b: f64,
    /// Per-channel bound alpha / 2 for chroma inside the grid.
    pub bound: f64,
    pub within_bound: bool,
    /// Pixels whose chroma lay outside `[-beta, beta)` and were clamped.
    pub clamped_pixels: usize,
    pub distinct_classes: usize,
}

pub struct RoundtripOutput {
    pub report: RoundtripReport,
    pub classes: ClassMap,
    pub reconstructed: RgbImage,
}

pub fn roundtrip(img: &RgbImage, config: &PipelineConfig) -> Result<RoundtripOutput> {
    ensure!(img.pixel_count() > 0, "empty image");
    let grid = config.grid()?;
    let lab = colorspace::rgb_to_lab(img);
    let classes = classgrid::encode_image(&lab, &grid);
    let ab = classgrid::decode_map(&classes, &grid)?;
    let beta = f64::from(grid.beta);
    let in_grid = |v: f64| (-beta..beta).contains(&v);
    let (mut max_a, mut max_b, mut sum_a, mut sum_b) = (0f64, 0f64, 0.0, 0.0);
    let mut clamped = 0;
    for i in 0..lab.pixel_count() {
        let da = (ab.a[i] - lab.a[i]).abs();
        let db = (ab.b[i] - lab.b[i]).abs();
        if in_grid(lab.a[i]) && in_grid(lab.b[i]) {
            max_a = max_a.max(da);
            max_b = max_b.max(db);
        } else {
            clamped += 1;
        }
        sum_a += da;
        sum_b += db;
    }
    let n = lab.pixel_count() as f64;
    let bound = f64::from(grid.alpha) / 2.0;
    let reconstructed = colorspace::lab_to_rgb(&LabImage::from_l_and_ab(lab.width, lab.height, lab.l.clone(), ab)?);
    Ok(RoundtripOutput {
        report: RoundtripReport {
            schema_version: SCHEMA_VERSION,
            kind: "roundtrip_report".into(),
            grid: grid.into(),
            config_hash: config.hash(),
            width: img.width(),
            height: img.height(),
            max_dev_a: max_a,
            max_dev_b: max_b,
            mean_dev_a: sum_a / n,
            mean_dev_b: sum_b / n,
            bound,
            within_bound: max_a <= bound && max_b <= bound,
            clamped_pixels: clamped,
            distinct_classes: metrics::unique_classes(&classes),
        },
        classes,
        reconstructed,
    })
}

/// Writes `map` with a full-grid sidecar.
pub fn save_full_classmap(path: &Path, map: &ClassMap, grid: GridParams) -> Result<()> {
    formats::write_classmap(path, map, &ClassMapMeta::full(grid))
}

/// Counts per grid class, keyed by class, for diagnostics.
pub fn class_counts(map: &ClassMap) -> BTreeMap<u32, u64> {
    let mut out = BTreeMap::new();
    for &c in &map.classes {
        *out.entry(c).or_default() += 1;
    }
    out
}
