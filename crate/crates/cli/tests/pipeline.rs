use std::path::{Path, PathBuf};

use colorclass::classgrid::{ClassMap, GridParams};
use colorclass::classopt::ClassHistogram;
use colorclass::RgbImage;
use colorclass_cli::commands::RoundtripReport;
use colorclass_cli::formats::{
    self, ApprovedSetDoc, ClassMapMeta, CorpusManifest, HistogramDoc, WeightTableDoc,
};
use colorclass_cli::{main_with_args, PipelineConfig};
use serde_json::Value;
use tempfile::TempDir;

fn run(args: &[&str]) -> i32 {
    let mut full = vec!["colorclass"];
    full.extend_from_slice(args);
    main_with_args(full)
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn solid(color: [u8; 3]) -> RgbImage {
    RgbImage::from_fn(8, 6, |_, _| color)
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

const COLORS: [[u8; 3]; 4] = [[200, 30, 30], [30, 180, 40], [40, 50, 210], [128, 128, 128]];

fn solid_corpus(dir: &Path) {
    for (i, c) in COLORS.iter().enumerate() {
        formats::save_rgb(&dir.join(format!("img{i}.png")), &solid(*c)).unwrap();
    }
}

#[test]
fn solid_corpus_fills_four_bins_and_reruns_identically() {
    let tmp = TempDir::new().unwrap();
    let corpus = tmp.path().join("corpus");
    std::fs::create_dir(&corpus).unwrap();
    solid_corpus(&corpus);
    let out1 = tmp.path().join("h1.json");
    let out2 = tmp.path().join("h2.json");
    for out in [&out1, &out2] {
        let code = run(&["build-histogram", "--input-dir", p(&corpus), "-o", p(out), "--resize", "none", "--jobs", "3"]);
        assert_eq!(code, 0);
    }
    assert_eq!(std::fs::read(&out1).unwrap(), std::fs::read(&out2).unwrap());
    let doc = HistogramDoc::read(&out1).unwrap();
    assert_eq!(doc.nonzero_classes, 4);
    assert_eq!(doc.total_samples, 4 * 48);
    assert_eq!(doc.files_counted, 4);
    assert!(doc.counts.iter().all(|&c| c == 0 || c == 48));
}

#[test]
fn manifest_checksum_failure_is_partial() {
    let tmp = TempDir::new().unwrap();
    solid_corpus(tmp.path());
    let mut m = CorpusManifest::scan(tmp.path()).unwrap();
    m.root = PathBuf::from(".");
    m.files[1].sha256 = Some("00".repeat(32));
    let man = tmp.path().join("manifest.json");
    formats::write_json(&man, &m).unwrap();
    let out = tmp.path().join("h.json");
    assert_eq!(run(&["build-histogram", "--manifest", p(&man), "-o", p(&out), "--resize", "none"]), 1);
    let doc = HistogramDoc::read(&out).unwrap();
    assert_eq!(doc.files_counted, 3);
    assert_eq!(doc.failures.len(), 1);
    assert_eq!(doc.failures[0].path, "img1.png");
}

#[test]
fn empty_manifest_is_invalid() {
    let tmp = TempDir::new().unwrap();
    let man = tmp.path().join("manifest.json");
    std::fs::write(&man, r#"{"root": ".", "files": []}"#).unwrap();
    let out = tmp.path().join("h.json");
    assert_eq!(run(&["build-histogram", "--manifest", p(&man), "-o", p(&out)]), 2);
    assert!(!out.exists());
}

/// One 10x10 map holding grid classes 0..4 with counts 70, 20, 8, 2.
fn toy_map() -> ClassMap {
    let mut classes = vec![0u32; 70];
    classes.extend([1; 20]);
    classes.extend([2; 8]);
    classes.extend([3; 2]);
    ClassMap::new(10, 10, classes).unwrap()
}

#[test]
fn optimize_then_weights_on_toy_batch() {
    let tmp = TempDir::new().unwrap();
    let grid = GridParams::new(6).unwrap();
    let map = toy_map();
    let map_path = tmp.path().join("batch0.png");
    formats::write_classmap(&map_path, &map, &ClassMapMeta::full(grid)).unwrap();

    let hist = ClassHistogram::from_counts(grid, {
        let mut c = vec![0u64; 1296];
        c[..4].copy_from_slice(&[70, 20, 8, 2]);
        c
    })
    .unwrap();
    let hpath = tmp.path().join("hist.json");
    let hash = PipelineConfig::default().hash();
    formats::write_json(&hpath, &HistogramDoc::new(&hist, hash, None, 1, vec![])).unwrap();

    let apath = tmp.path().join("approved.json");
    assert_eq!(run(&["optimize-classes", "--histogram", p(&hpath), "-o", p(&apath), "--min-count", "1"]), 0);
    let approved = ApprovedSetDoc::read(&apath).unwrap();
    assert_eq!(approved.approved, vec![0, 1, 2, 3]);
    assert_eq!(approved.remap.len(), 1296);

    let wpath = tmp.path().join("weights.json");
    assert_eq!(run(&["weights", p(&map_path), "--approved", p(&apath), "-o", p(&wpath)]), 0);
    let w = WeightTableDoc::read(&wpath).unwrap();
    assert_eq!(w.psi, 2.5);
    assert_eq!(w.total, 100);
    let want = [100.0 / 98.0, 100.0 / 48.0, 100.0 / 36.0, 100.0 / 30.5];
    for (i, f) in want.iter().enumerate() {
        assert!((w.weights[&(i as u32)] - f).abs() < 1e-12);
    }

    let fixed = tmp.path().join("fixed.json");
    assert_eq!(run(&["weights", p(&map_path), "--approved", p(&apath), "-o", p(&fixed), "--psi", "5"]), 0);
    let fw = WeightTableDoc::read(&fixed).unwrap();
    assert_eq!(fw.psi, 5.0);
    assert!((fw.weights[&3] - 100.0 / 19.0).abs() < 1e-12);
}

#[test]
fn weights_need_an_approved_set() {
    let tmp = TempDir::new().unwrap();
    let map_path = tmp.path().join("m.png");
    formats::write_classmap(&map_path, &toy_map(), &ClassMapMeta::full(GridParams::new(6).unwrap())).unwrap();
    let out = tmp.path().join("w.json");
    assert_eq!(run(&["weights", p(&map_path), "-o", p(&out)]), 2);
    let missing = tmp.path().join("nope.json");
    assert_eq!(run(&["weights", p(&map_path), "--approved", p(&missing), "-o", p(&out)]), 2);
    assert!(!out.exists());
}

#[test]
fn evaluate_identical_dirs() {
    let tmp = TempDir::new().unwrap();
    let (pred, truth) = (tmp.path().join("pred"), tmp.path().join("truth"));
    for d in [&pred, &truth] {
        std::fs::create_dir(d).unwrap();
        solid_corpus(d);
    }
    let (csv, summary) = (tmp.path().join("rows.csv"), tmp.path().join("summary.json"));
    let code = run(&["evaluate", "--pred", p(&pred), "--truth", p(&truth), "--csv", p(&csv), "--summary", p(&summary)]);
    assert_eq!(code, 0);
    let s = json(&summary);
    assert_eq!(s["corpus"]["cnr"], 1.0);
    assert_eq!(s["corpus"]["tar_percent"], 100.0);
    assert_eq!(s["corpus"]["mse"], 0.0);
    assert_eq!(s["corpus"]["identical_pairs"], 4);
    let rows = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(rows.lines().count(), 5);
    assert!(rows.starts_with("file,status,width,height,cnr,ccar_raw,ccar_ratio,tar_percent,mse,psnr,error"));
}

#[test]
fn evaluate_records_per_file_errors() {
    let tmp = TempDir::new().unwrap();
    let (pred, truth) = (tmp.path().join("pred"), tmp.path().join("truth"));
    for d in [&pred, &truth] {
        std::fs::create_dir(d).unwrap();
        solid_corpus(d);
    }
    formats::save_rgb(&pred.join("img2.png"), &RgbImage::from_fn(3, 3, |_, _| [0, 0, 0])).unwrap();
    std::fs::remove_file(pred.join("img3.png")).unwrap();
    let (csv, summary) = (tmp.path().join("rows.csv"), tmp.path().join("summary.json"));
    let code = run(&["evaluate", "--pred", p(&pred), "--truth", p(&truth), "--csv", p(&csv), "--summary", p(&summary)]);
    assert_eq!(code, 1);
    let mut reader = csv::Reader::from_path(&csv).unwrap();
    let rows: Vec<csv::StringRecord> = reader.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 4);
    let status: Vec<&str> = rows.iter().map(|r| &r[1]).collect();
    assert_eq!(status, ["ok", "ok", "error", "error"]);
    assert!(rows[2][10].contains("3x3"), "{}", &rows[2][10]);
    assert!(rows[3][10].contains("no prediction"));
}

#[test]
fn roundtrip_neutral_gray_deviates_by_half_bin() {
    let tmp = TempDir::new().unwrap();
    let img = tmp.path().join("gray.png");
    formats::save_rgb(&img, &solid([128, 128, 128])).unwrap();
    let (report, recon, cmap) = (tmp.path().join("r.json"), tmp.path().join("recon.png"), tmp.path().join("c.png"));
    let code = run(&[
        "roundtrip",
        p(&img),
        "--alpha",
        "6",
        "-o",
        p(&report),
        "--reconstructed",
        p(&recon),
        "--classmap-out",
        p(&cmap),
    ]);
    assert_eq!(code, 0);
    let r: RoundtripReport = formats::read_json(&report).unwrap();
    assert!((r.max_dev_a - 3.0).abs() < 1e-9 && (r.max_dev_b - 3.0).abs() < 1e-9);
    assert!(r.within_bound);
    assert_eq!(r.distinct_classes, 1);
    let (map, meta) = formats::read_classmap(&cmap).unwrap();
    assert_eq!(meta.alpha, 6);
    assert!(map.classes.iter().all(|&c| c == 18 * 36 + 18));
    assert_eq!(formats::load_rgb(&recon).unwrap().width(), 8);
}

#[test]
fn harmonize_label_map_and_rgb_out() {
    let tmp = TempDir::new().unwrap();
    let a = vec![5.0, 5.0, 5.0, 20.0, 12.0, -30.0];
    let ab = colorclass::AbPlanes::new(6, 1, a, vec![0.0; 6]).unwrap();
    let prefix = tmp.path().join("in");
    formats::write_ab(&prefix, &ab).unwrap();
    let labels = image::ImageBuffer::<image::Luma<u16>, _>::from_raw(6, 1, vec![1u16, 1, 1, 1, 1, 0]).unwrap();
    let lpath = tmp.path().join("labels.png");
    labels.save(&lpath).unwrap();
    let gray = tmp.path().join("gray.png");
    formats::save_rgb(&gray, &RgbImage::from_fn(6, 1, |_, _| [90, 90, 90])).unwrap();
    let (out, rgb, report) = (tmp.path().join("out"), tmp.path().join("rgb.png"), tmp.path().join("rep.json"));
    let code = run(&[
        "harmonize",
        "--ab",
        p(&prefix),
        "--label-map",
        p(&lpath),
        "-o",
        p(&out),
        "--gray",
        p(&gray),
        "--rgb-out",
        p(&rgb),
        "--report",
        p(&report),
    ]);
    assert_eq!(code, 0);
    let res = formats::read_ab(&out).unwrap();
    assert_eq!(res.a, vec![5.0, 5.0, 5.0, 5.0, 12.0, -30.0]);
    assert_eq!(json(&report)["segments"], 1);
    assert!(rgb.exists());
}

#[test]
fn analyze_bins_csv() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("bins.csv");
    assert_eq!(run(&["analyze-bins", "-o", p(&out)]), 0);
    let text = std::fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().count(), 7);
    assert!(text.lines().nth(2).unwrap().starts_with("6,108,36,1296,"));
    assert_eq!(run(&["analyze-bins", "--alphas", "0"]), 2);
}
