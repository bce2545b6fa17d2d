//! Seeded synthetic corpus and an end-to-end run of every subcommand on it.
//!
//! Images are a muted background with a few small saturated rectangles, which
//! gives the skewed class distribution the rebalancing steps are meant for.

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use anyhow::{ensure, Context, Result};
use colorclass::colorspace::{self, LabImage};
use colorclass::RgbImage;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

use crate::formats;

pub struct Rect {
    pub x: usize,
    pub y: usize,
    pub w: usize,
    pub h: usize,
}

pub struct SynthImage {
    pub image: RgbImage,
    pub rects: Vec<Rect>,
}

pub fn synth_image(rng: &mut impl Rng, width: usize, height: usize) -> SynthImage {
    let base: [i32; 3] = [rng.gen_range(90..170), rng.gen_range(90..170), rng.gen_range(90..170)];
    let rects: Vec<(Rect, [u8; 3])> = (0..rng.gen_range(1..4))
        .map(|_| {
            let w = rng.gen_range(3..width / 3);
            let h = rng.gen_range(3..height / 3);
            let r = Rect {
                x: rng.gen_range(0..width - w),
                y: rng.gen_range(0..height - h),
                w,
                h,
            };
            let mut c = [rng.gen_range(0..60u8), rng.gen_range(0..60), rng.gen_range(0..60)];
            c[rng.gen_range(0..3)] = rng.gen_range(190..=255);
            (r, c)
        })
        .collect();
    let noise: Vec<i32> = (0..width * height).map(|_| rng.gen_range(-6..=6)).collect();
    let image = RgbImage::from_fn(width, height, |x, y| {
        for (r, c) in rects.iter().rev() {
            if x >= r.x && x < r.x + r.w && y >= r.y && y < r.y + r.h {
                return *c;
            }
        }
        let n = noise[y * width + x];
        base.map(|v| (v + n).clamp(0, 255) as u8)
    });
    SynthImage {
        image,
        rects: rects.into_iter().map(|(r, _)| r).collect(),
    }
}

/// Writes `count` images to `dir` as `img_NNN.png`.
pub fn write_corpus(dir: &Path, count: usize, width: usize, height: usize, seed: u64) -> Result<Vec<SynthImage>> {
    std::fs::create_dir_all(dir)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| {
            let s = synth_image(&mut rng, width, height);
            formats::save_rgb(&dir.join(format!("img_{i:03}.png")), &s.image)?;
            Ok(s)
        })
        .collect()
}

#[derive(Debug)]
pub struct Walkthrough {
    pub stages: Vec<(&'static str, Duration)>,
    pub total: Duration,
    pub nonzero_classes: u64,
    pub approved_classes: u64,
    pub weight_psi: f64,
    pub harmonized_pixels: u64,
    pub raw: Means,
    pub harmonized: Means,
}

/// Corpus means from an evaluation summary.
#[derive(Debug, Clone, Copy)]
pub struct Means {
    pub cnr: f64,
    pub tar: f64,
    pub psnr: f64,
}

fn corpus_means(summary: &Value) -> Means {
    let c = &summary["corpus"];
    let f = |k: &str| c[k].as_f64().unwrap_or(f64::NAN);
    Means {
        cnr: f("cnr"),
        tar: f("tar_percent"),
        psnr: f("psnr"),
    }
}

fn cli(args: &[&str]) -> Result<()> {
    let mut full = vec!["colorclass"];
    full.extend_from_slice(args);
    let code = crate::main_with_args(full);
    ensure!(code == 0, "`colorclass {}` exited with {code}", args.join(" "));
    Ok(())
}

fn s(p: &Path) -> &str {
    p.to_str().expect("utf-8 path")
}

fn read(p: &Path) -> Result<Value> {
    let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
    Ok(serde_json::from_str(&text)?)
}

/// Runs analyze-bins, build-histogram, optimize-classes, roundtrip, weights,
/// harmonize and evaluate under `work`. Predictions are evaluated before and
/// after harmonization.
pub fn walkthrough(work: &Path, seed: u64) -> Result<Walkthrough> {
    let start = Instant::now();
    let mut stages = Vec::new();
    let mut stage = |name, t: Instant| stages.push((name, t.elapsed()));

    let t = Instant::now();
    let corpus = work.join("corpus");
    let images = write_corpus(&corpus, 40, 96, 72, seed)?;
    stage("corpus", t);

    let t = Instant::now();
    cli(&["analyze-bins", "--format", "json", "--rgb", "-o", s(&work.join("bins.json"))])?;
    stage("analyze-bins", t);

    let t = Instant::now();
    let hist = work.join("histogram.json");
    cli(&["build-histogram", "--input-dir", s(&corpus), "-o", s(&hist), "--resize", "48x36"])?;
    stage("build-histogram", t);

    let t = Instant::now();
    let approved = work.join("approved.json");
    cli(&["optimize-classes", "--histogram", s(&hist), "-o", s(&approved), "--min-count", "20"])?;
    stage("optimize-classes", t);

    let t = Instant::now();
    let maps_dir = work.join("classmaps");
    let mut maps: Vec<PathBuf> = Vec::new();
    for i in 0..8 {
        let map = maps_dir.join(format!("img_{i:03}.png"));
        cli(&[
            "roundtrip",
            s(&corpus.join(format!("img_{i:03}.png"))),
            "-o",
            s(&maps_dir.join(format!("img_{i:03}.report.json"))),
            "--classmap-out",
            s(&map),
        ])?;
        maps.push(map);
    }
    stage("roundtrip", t);

    let t = Instant::now();
    let weights = work.join("weights.json");
    let mut args = vec!["weights"];
    args.extend(maps.iter().map(|p| s(p)));
    args.extend(["--approved", s(&approved), "-o", s(&weights)]);
    cli(&args)?;
    stage("weights", t);

    // Predictions: the true chroma with mild noise everywhere and large
    // outliers on a fraction of each planted rectangle, rendered with the
    // true lightness. Harmonization should pull the outliers back.
    let t = Instant::now();
    let raw = work.join("pred_raw");
    let pred = work.join("pred");
    let truth = work.join("truth");
    for d in [&raw, &pred, &truth] {
        std::fs::create_dir_all(d)?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let mut harmonized = 0u64;
    for (i, img) in images.iter().enumerate().take(8) {
        let name = format!("img_{i:03}.png");
        std::fs::copy(corpus.join(&name), truth.join(&name))?;
        let (w, h) = (img.image.width(), img.image.height());
        let lab = colorspace::rgb_to_lab(&img.image);
        let mut ab = lab.ab();
        let mut labels = vec![0u16; w * h];
        for (k, r) in img.rects.iter().enumerate() {
            for y in r.y..r.y + r.h {
                labels[y * w + r.x..y * w + r.x + r.w].fill(k as u16 + 1);
            }
        }
        for (p, &label) in labels.iter().enumerate() {
            let (da, db) = if label != 0 && rng.gen_bool(0.2) {
                let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
                (sign * rng.gen_range(20.0..40.0), -sign * rng.gen_range(20.0..40.0))
            } else {
                (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
            };
            ab.a[p] += da;
            ab.b[p] += db;
        }
        let recolored = LabImage::from_l_and_ab(w, h, lab.l.clone(), ab.clone())?;
        formats::save_rgb(&raw.join(&name), &colorspace::lab_to_rgb(&recolored))?;
        let prefix = work.join(format!("pred_ab_{i:03}"));
        formats::write_ab(&prefix, &ab)?;

        let label_path = work.join(format!("labels_{i:03}.png"));
        image::ImageBuffer::<image::Luma<u16>, _>::from_raw(w as u32, h as u32, labels)
            .context("label buffer")?
            .save(&label_path)?;
        let report = work.join(format!("harmonize_{i:03}.json"));
        cli(&[
            "harmonize",
            "--ab",
            s(&prefix),
            "--label-map",
            s(&label_path),
            "-o",
            s(&work.join(format!("harmonized_{i:03}"))),
            "--gray",
            s(&corpus.join(&name)),
            "--rgb-out",
            s(&pred.join(&name)),
            "--report",
            s(&report),
        ])?;
        harmonized += read(&report)?["diff"]["changed_pixels"].as_u64().unwrap_or(0);
    }
    stage("harmonize", t);

    let t = Instant::now();
    let evaluate = |dir: &Path, tag: &str| -> Result<Value> {
        let summary = work.join(format!("metrics_{tag}.json"));
        cli(&[
            "evaluate",
            "--pred",
            s(dir),
            "--truth",
            s(&truth),
            "--approved",
            s(&approved),
            "--csv",
            s(&work.join(format!("metrics_{tag}.csv"))),
            "--summary",
            s(&summary),
        ])?;
        read(&summary)
    };
    let before = evaluate(&raw, "raw")?;
    let after = evaluate(&pred, "harmonized")?;
    stage("evaluate", t);

    let h = read(&hist)?;
    let a = read(&approved)?;
    let w = read(&weights)?;
    Ok(Walkthrough {
        stages,
        total: start.elapsed(),
        nonzero_classes: h["nonzero_classes"].as_u64().unwrap_or(0),
        approved_classes: a["approved_count"].as_u64().unwrap_or(0),
        weight_psi: w["psi"].as_f64().unwrap_or(f64::NAN),
        harmonized_pixels: harmonized,
        raw: corpus_means(&before),
        harmonized: corpus_means(&after),
    })
}
