//! On-disk formats.
//!
//! * Class maps: 16-bit grayscale PNG holding the class index per pixel, plus
//!   a JSON sidecar next to it (`map.png` -> `map.json`) recording the grid.
//! * Chroma planes: a pair of 16-bit grayscale PNGs `<prefix>.a.png` and
//!   `<prefix>.b.png`, each storing `round((v + 128) * 256)`.
//! * Histograms, approved sets, weight tables, metric summaries: pretty JSON
//!   documents carrying `schema_version`, the grid and the config hash.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, ensure, Context, Result};
use colorclass::classgrid::{ClassMap, GridParams};
use colorclass::classopt::{ApprovedClassSet, ClassHistogram, Threshold};
use colorclass::colorspace::{AbPlanes, RgbImage};
use colorclass::harmonize::SegmentMaskSet;
use colorclass::weighting::PsiMode;
use image::{DynamicImage, ImageBuffer, Luma};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::config::short_hash;

pub const SCHEMA_VERSION: u32 = 1;

/// Serialized form of [`GridParams`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridDoc {
    pub alpha: u32,
    pub beta: u32,
    pub delta: u32,
}

impl From<GridParams> for GridDoc {
    fn from(g: GridParams) -> Self {
        Self {
            alpha: g.alpha,
            beta: g.beta,
            delta: g.delta,
        }
    }
}

impl GridDoc {
    pub fn params(&self) -> Result<GridParams> {
        Ok(GridParams::from_parts(self.alpha, self.beta, self.delta)?)
    }
}

pub fn ensure_same_grid(expected: GridParams, found: GridParams, what: &str) -> Result<()> {
    ensure!(
        expected == found,
        "grid mismatch in {what}: expected alpha={} (beta={}, delta={}), found alpha={} (beta={}, delta={})",
        expected.alpha,
        expected.beta,
        expected.delta,
        found.alpha,
        found.beta,
        found.delta
    );
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn check_schema(version: u32, kind: &str, expected_kind: &str, path: &Path) -> Result<()> {
    ensure!(
        kind == expected_kind,
        "{} is a `{kind}` document, expected `{expected_kind}`",
        path.display()
    );
    ensure!(
        version == SCHEMA_VERSION,
        "{} has schema_version {version}, this build reads {SCHEMA_VERSION}",
        path.display()
    );
    Ok(())
}

fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// RGB images
// ---------------------------------------------------------------------------

pub fn load_rgb(path: &Path) -> Result<RgbImage> {
    let img = image::open(path).with_context(|| format!("decoding {}", path.display()))?;
    let rgb = img.to_rgb8();
    let (w, h) = rgb.dimensions();
    Ok(RgbImage::new(w as usize, h as usize, rgb.into_raw())?)
}

pub fn save_rgb(path: &Path, img: &RgbImage) -> Result<()> {
    ensure_parent(path)?;
    let buf: ImageBuffer<image::Rgb<u8>, Vec<u8>> =
        ImageBuffer::from_raw(img.width() as u32, img.height() as u32, img.data().to_vec())
            .ok_or_else(|| anyhow!("rgb buffer size mismatch"))?;
    buf.save(path).with_context(|| format!("writing {}", path.display()))
}

/// Image files under `dir` (recursively), sorted by path.
pub fn list_images(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).with_context(|| format!("listing {}", d.display()))? {
            let path = entry?.path();
            if path.is_dir() {
                stack.push(path);
            } else if is_image(&path) {
                out.push(path);
            }
        }
    }
    out.sort();
    Ok(out)
}

pub fn is_image(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| matches!(e.to_ascii_lowercase().as_str(), "png" | "jpg" | "jpeg"))
}

// ---------------------------------------------------------------------------
// Class maps
// ---------------------------------------------------------------------------

/// Sidecar describing the grid a class-map PNG was encoded on.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassMapMeta {
    pub schema_version: u32,
    pub alpha: u32,
    pub beta: u32,
    pub delta: u32,
    /// True when pixel values are dense indices into an approved set.
    pub compacted: bool,
    pub approved_set_hash: Option<String>,
}

impl ClassMapMeta {
    pub fn full(grid: GridParams) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            alpha: grid.alpha,
            beta: grid.beta,
            delta: grid.delta,
            compacted: false,
            approved_set_hash: None,
        }
    }

    pub fn compacted(grid: GridParams, approved_set_hash: &str) -> Self {
        Self {
            compacted: true,
            approved_set_hash: Some(approved_set_hash.to_owned()),
            ..Self::full(grid)
        }
    }

    pub fn grid(&self) -> Result<GridParams> {
        Ok(GridParams::from_parts(self.alpha, self.beta, self.delta)?)
    }
}

pub fn sidecar_path(png: &Path) -> PathBuf {
    png.with_extension("json")
}

pub fn write_classmap(path: &Path, map: &ClassMap, meta: &ClassMapMeta) -> Result<()> {
    ensure_parent(path)?;
    let data = map
        .classes
        .iter()
        .map(|&c| u16::try_from(c).map_err(|_| anyhow!("class {c} does not fit in 16 bits")))
        .collect::<Result<Vec<u16>>>()?;
    let buf: ImageBuffer<Luma<u16>, Vec<u16>> =
        ImageBuffer::from_raw(map.width as u32, map.height as u32, data)
            .ok_or_else(|| anyhow!("class map buffer size mismatch"))?;
    buf.save(path).with_context(|| format!("writing {}", path.display()))?;
    write_json(&sidecar_path(path), meta)
}

fn read_luma16(path: &Path) -> Result<(usize, usize, Vec<u16>)> {
    let img = image::open(path).with_context(|| format!("decoding {}", path.display()))?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let data = match img {
        DynamicImage::ImageLuma16(b) => b.into_raw(),
        DynamicImage::ImageLuma8(b) => b.into_raw().into_iter().map(u16::from).collect(),
        other => bail!(
            "{} is {:?}, expected single-channel grayscale",
            path.display(),
            other.color()
        ),
    };
    Ok((w, h, data))
}

pub fn read_classmap(path: &Path) -> Result<(ClassMap, ClassMapMeta)> {
    let meta: ClassMapMeta = read_json(&sidecar_path(path))
        .with_context(|| format!("class map sidecar for {}", path.display()))?;
    ensure!(
        meta.schema_version == SCHEMA_VERSION,
        "unsupported class map schema_version {}",
        meta.schema_version
    );
    let grid = meta.grid()?;
    let (w, h, data) = read_luma16(path)?;
    let map = ClassMap::new(w, h, data.into_iter().map(u32::from).collect())?;
    if !meta.compacted {
        map.check_bound(grid.num_classes())?;
    }
    Ok((map, meta))
}

// ---------------------------------------------------------------------------
// Chroma plane pairs
// ---------------------------------------------------------------------------

pub fn ab_pair_paths(prefix: &Path) -> (PathBuf, PathBuf) {
    let base = prefix.as_os_str().to_owned();
    let mut a = base.clone();
    a.push(".a.png");
    let mut b = base;
    b.push(".b.png");
    (PathBuf::from(a), PathBuf::from(b))
}

pub fn encode_chroma(v: f64) -> u16 {
    ((v + 128.0) * 256.0).round().clamp(0.0, 65535.0) as u16
}

pub fn decode_chroma(v: u16) -> f64 {
    f64::from(v) / 256.0 - 128.0
}

pub fn write_ab(prefix: &Path, ab: &AbPlanes) -> Result<()> {
    ensure_parent(prefix)?;
    let (pa, pb) = ab_pair_paths(prefix);
    for (path, plane) in [(pa, &ab.a), (pb, &ab.b)] {
        let buf: ImageBuffer<Luma<u16>, Vec<u16>> = ImageBuffer::from_raw(
            ab.width as u32,
            ab.height as u32,
            plane.iter().map(|&v| encode_chroma(v)).collect(),
        )
        .ok_or_else(|| anyhow!("chroma buffer size mismatch"))?;
        buf.save(&path).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

pub fn read_ab(prefix: &Path) -> Result<AbPlanes> {
    let (pa, pb) = ab_pair_paths(prefix);
    let (wa, ha, a) = read_luma16(&pa)?;
    let (wb, hb, b) = read_luma16(&pb)?;
    ensure!(
        (wa, ha) == (wb, hb),
        "chroma planes differ in size: {wa}x{ha} vs {wb}x{hb}"
    );
    Ok(AbPlanes::new(
        wa,
        ha,
        a.into_iter().map(decode_chroma).collect(),
        b.into_iter().map(decode_chroma).collect(),
    )?)
}

// ---------------------------------------------------------------------------
// Segment masks
// ---------------------------------------------------------------------------

/// One mask per PNG in `dir`, in file-name order; nonzero pixels are members.
pub fn read_mask_dir(dir: &Path) -> Result<SegmentMaskSet> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("listing {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e.eq_ignore_ascii_case("png")))
        .collect();
    paths.sort();
    ensure!(!paths.is_empty(), "no mask PNGs in {}", dir.display());
    let mut size = None;
    let mut masks = Vec::with_capacity(paths.len());
    let mut labels = Vec::with_capacity(paths.len());
    for p in &paths {
        let img = image::open(p).with_context(|| format!("decoding {}", p.display()))?;
        let luma = img.to_luma16();
        let dims = luma.dimensions();
        if let Some(prev) = size {
            ensure!(prev == dims, "mask {} is {dims:?}, expected {prev:?}", p.display());
        }
        size = Some(dims);
        masks.push(luma.into_raw().into_iter().map(|v| v != 0).collect());
        labels.push(p.file_stem().unwrap_or_default().to_string_lossy().into_owned());
    }
    let (w, h) = size.expect("at least one mask");
    Ok(SegmentMaskSet::new(w as usize, h as usize, masks)?.with_labels(labels)?)
}

/// Segments from a labeled PNG; 0 is background.
pub fn read_label_map(path: &Path) -> Result<SegmentMaskSet> {
    let (w, h, labels) = read_luma16(path)?;
    Ok(SegmentMaskSet::from_label_map(w, h, &labels)?)
}

// ---------------------------------------------------------------------------
// JSON documents
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileFailure {
    pub path: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramDoc {
    pub schema_version: u32,
    pub kind: String,
    pub grid: GridDoc,
    pub config_hash: String,
    pub resize: Option<[u32; 2]>,
    pub files_counted: usize,
    pub total_samples: u64,
    pub nonzero_classes: usize,
    pub counts: Vec<u64>,
    pub failures: Vec<FileFailure>,
}

impl HistogramDoc {
    pub const KIND: &'static str = "class_histogram";

    pub fn new(
        hist: &ClassHistogram,
        config_hash: String,
        resize: Option<[u32; 2]>,
        files_counted: usize,
        failures: Vec<FileFailure>,
    ) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            kind: Self::KIND.into(),
            grid: hist.grid.into(),
            config_hash,
            resize,
            files_counted,
            total_samples: hist.total_samples,
            nonzero_classes: hist.nonzero_classes(),
            counts: hist.counts.clone(),
            failures,
        }
    }

    pub fn read(path: &Path) -> Result<Self> {
        let doc: Self = read_json(path)?;
        check_schema(doc.schema_version, &doc.kind, Self::KIND, path)?;
        Ok(doc)
    }

    pub fn histogram(&self) -> Result<ClassHistogram> {
        let hist = ClassHistogram::from_counts(self.grid.params()?, self.counts.clone())?;
        ensure!(
            hist.total_samples == self.total_samples,
            "histogram total_samples {} disagrees with counts sum {}",
            self.total_samples,
            hist.total_samples
        );
        Ok(hist)
    }
}

pub fn approved_set_hash(set: &ApprovedClassSet) -> String {
    let list: Vec<String> = set.approved.iter().map(u32::to_string).collect();
    short_hash(format!("alpha={};approved={}", set.grid.alpha, list.join(",")).as_bytes())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApprovedSetDoc {
    pub schema_version: u32,
    pub kind: String,
    pub grid: GridDoc,
    pub config_hash: String,
    pub approved_set_hash: String,
    pub threshold: Threshold,
    pub min_count_threshold: u64,
    pub source_total_samples: u64,
    pub approved_count: usize,
    pub approved: Vec<u32>,
    pub remap: Vec<u32>,
}

impl ApprovedSetDoc {
    pub const KIND: &'static str = "approved_class_set";

    pub fn new(set: &ApprovedClassSet, threshold: Threshold, source_total_samples: u64, config_hash: String) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            kind: Self::KIND.into(),
            grid: set.grid.into(),
            config_hash,
            approved_set_hash: approved_set_hash(set),
            threshold,
            min_count_threshold: set.min_count_threshold,
            source_total_samples,
            approved_count: set.len(),
            approved: set.approved.clone(),
            remap: set.remap.clone(),
        }
    }

    pub fn read(path: &Path) -> Result<Self> {
        let doc: Self = read_json(path)?;
        check_schema(doc.schema_version, &doc.kind, Self::KIND, path)?;
        Ok(doc)
    }

    pub fn set(&self) -> Result<ApprovedClassSet> {
        let set = ApprovedClassSet {
            grid: self.grid.params()?,
            approved: self.approved.clone(),
            remap: self.remap.clone(),
            min_count_threshold: self.min_count_threshold,
        };
        set.validate()?;
        ensure!(
            approved_set_hash(&set) == self.approved_set_hash,
            "approved set hash does not match its contents"
        );
        Ok(set)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchShape {
    pub maps: usize,
    /// Per-map height and width when every map shares them.
    pub height: Option<usize>,
    pub width: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightTableDoc {
    pub schema_version: u32,
    pub kind: String,
    pub grid: GridDoc,
    pub config_hash: String,
    pub approved_set_hash: String,
    pub n_classes: usize,
    pub p_percent: f64,
    pub psi: f64,
    pub psi_mode: PsiMode,
    pub batch: BatchShape,
    pub total: u64,
    /// Dense index -> grid class.
    pub dense_to_class: Vec<u32>,
    /// Dense index -> count in this batch.
    pub counts: BTreeMap<u32, u64>,
    /// Dense index -> weight.
    pub weights: BTreeMap<u32, f64>,
}

impl WeightTableDoc {
    pub const KIND: &'static str = "weight_table";

    pub fn read(path: &Path) -> Result<Self> {
        let doc: Self = read_json(path)?;
        check_schema(doc.schema_version, &doc.kind, Self::KIND, path)?;
        Ok(doc)
    }
}

// ---------------------------------------------------------------------------
// Corpus manifest
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    /// Relative to the manifest root.
    pub path: String,
    #[serde(default)]
    pub split: Option<String>,
    /// Hex SHA-256 of the file; verified when present.
    #[serde(default)]
    pub sha256: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusManifest {
    pub root: PathBuf,
    pub files: Vec<ManifestEntry>,
}

impl CorpusManifest {
    /// Reads a manifest; a relative `root` is resolved against the manifest's
    /// own directory.
    pub fn read(path: &Path) -> Result<Self> {
        let mut m: Self = read_json(path)?;
        if m.root.is_relative() {
            let base = path.parent().unwrap_or(Path::new("."));
            m.root = base.join(&m.root);
        }
        Ok(m)
    }

    /// Manifest listing every image under `dir`, without checksums.
    pub fn scan(dir: &Path) -> Result<Self> {
        let files = list_images(dir)?
            .into_iter()
            .map(|p| ManifestEntry {
                path: p
                    .strip_prefix(dir)
                    .unwrap_or(&p)
                    .to_string_lossy()
                    .replace('\\', "/"),
                split: None,
                sha256: None,
            })
            .collect();
        Ok(Self {
            root: dir.to_path_buf(),
            files,
        })
    }

    pub fn resolve(&self, entry: &ManifestEntry) -> PathBuf {
        self.root.join(&entry.path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chroma_codec() {
        for v in [-128.0, -107.5, 0.0, 3.0, 99.99609375] {
            assert_eq!(decode_chroma(encode_chroma(v)), v);
        }
        assert_eq!(encode_chroma(500.0), 65535);
        assert_eq!(encode_chroma(-500.0), 0);
        assert!((decode_chroma(encode_chroma(12.3456)) - 12.3456).abs() <= 1.0 / 512.0);
    }

    #[test]
    fn pair_paths() {
        let (a, b) = ab_pair_paths(Path::new("out/img01"));
        assert_eq!(a, Path::new("out/img01.a.png"));
        assert_eq!(b, Path::new("out/img01.b.png"));
        assert_eq!(sidecar_path(Path::new("x/m.png")), Path::new("x/m.json"));
    }

    #[test]
    fn classmap_file_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.png");
        let g = GridParams::new(6).unwrap();
        let map = ClassMap::new(3, 2, vec![0, 666, 1295, 5, 6, 7]).unwrap();
        write_classmap(&p, &map, &ClassMapMeta::full(g)).unwrap();
        let (back, meta) = read_classmap(&p).unwrap();
        assert_eq!(back, map);
        assert_eq!(meta.grid().unwrap(), g);
        assert!(!meta.compacted);
    }

    #[test]
    fn classmap_rejects_wide_classes() {
        let dir = tempfile::tempdir().unwrap();
        let map = ClassMap::filled(1, 1, 70_000);
        let g = GridParams::new(6).unwrap();
        assert!(write_classmap(&dir.path().join("m.png"), &map, &ClassMapMeta::full(g)).is_err());
    }

    #[test]
    fn ab_file_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let ab = AbPlanes::new(2, 1, vec![3.0, -105.0], vec![-0.5, 60.25]).unwrap();
        write_ab(&dir.path().join("x"), &ab).unwrap();
        assert_eq!(read_ab(&dir.path().join("x")).unwrap(), ab);
    }
}
