//! Argument parsing and dispatch.
//!
//! Exit codes: 0 success, 1 partial (some inputs failed, report written),
//! 2 invalid invocation or unusable input.

use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::commands::{self, ChromaSource, InputKind, MaskSource, Status};
use crate::config::PipelineConfig;
use crate::formats::{self, ApprovedSetDoc, CorpusManifest, HistogramDoc};

#[derive(Debug, Parser)]
#[command(name = "colorclass", version, about = "Color-class quantization, rebalancing, harmonization and evaluation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

/// Pipeline settings; any flag given overrides the `--config` file.
#[derive(Debug, Clone, Default, Args)]
pub struct ConfigArgs {
    /// JSON pipeline configuration.
    #[arg(long, env = "COLORCLASS_CONFIG", global = true)]
    pub config: Option<PathBuf>,
    /// Bin edge length in a*b* units.
    #[arg(long, global = true)]
    pub alpha: Option<u32>,
    /// Percentage deriving the per-batch weight threshold.
    #[arg(long, global = true)]
    pub p_percent: Option<f64>,
    /// Fixed weight threshold instead of the derived one.
    #[arg(long, global = true)]
    pub psi: Option<f64>,
    /// Harmonization tolerance on a*.
    #[arg(long, global = true)]
    pub delta_a: Option<f64>,
    /// Harmonization tolerance on b*.
    #[arg(long, global = true)]
    pub delta_b: Option<f64>,
    /// Minimum corpus count for a class to be retained.
    #[arg(long, global = true)]
    pub min_count: Option<u64>,
    /// Retention threshold as a percentage of all samples.
    #[arg(long, global = true, conflicts_with = "min_count")]
    pub min_percent: Option<f64>,
    /// Histogram resize target `WxH`, or `none`.
    #[arg(long, global = true)]
    pub resize: Option<String>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
}

impl ConfigArgs {
    pub fn resolve(&self) -> Result<PipelineConfig> {
        let mut c = match &self.config {
            Some(p) => PipelineConfig::load(p)?,
            None => PipelineConfig::default(),
        };
        if let Some(v) = self.alpha {
            c.alpha = v;
        }
        if let Some(v) = self.p_percent {
            c.p_percent = v;
        }
        if let Some(v) = self.psi {
            c.psi_override = Some(v);
        }
        if let Some(v) = self.delta_a {
            c.delta_a = v;
        }
        if let Some(v) = self.delta_b {
            c.delta_b = v;
        }
        if let Some(v) = self.min_count {
            c.min_count = v;
            c.min_percent = None;
        }
        if let Some(v) = self.min_percent {
            c.min_percent = Some(v);
        }
        if let Some(r) = &self.resize {
            c.histogram_resize = parse_resize(r)?;
        }
        c.grid()?;
        Ok(c)
    }
}

pub fn parse_resize(s: &str) -> Result<Option<[u32; 2]>> {
    if s.eq_ignore_ascii_case("none") {
        return Ok(None);
    }
    let (w, h) = s
        .split_once(['x', 'X'])
        .with_context(|| format!("resize must be WxH or none, got {s:?}"))?;
    let w: u32 = w.trim().parse().with_context(|| format!("bad width in {s:?}"))?;
    let h: u32 = h.trim().parse().with_context(|| format!("bad height in {s:?}"))?;
    if w == 0 || h == 0 {
        bail!("resize dimensions must be non-zero");
    }
    Ok(Some([w, h]))
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Kind {
    Rgb,
    Classmap,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Tabulate class count and quantization loss per bin size.
    AnalyzeBins {
        /// Comma-separated bin sizes.
        #[arg(long, value_delimiter = ',', default_values_t = [4u32, 6, 8, 10, 12, 14])]
        alphas: Vec<u32>,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
        /// Add the auxiliary RGB-deviation sweep at L = 50.
        #[arg(long)]
        rgb: bool,
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Count color classes over an image corpus.
    BuildHistogram {
        /// Corpus manifest JSON.
        #[arg(long, conflicts_with = "input_dir", required_unless_present = "input_dir")]
        manifest: Option<PathBuf>,
        /// Scan a directory instead of reading a manifest.
        #[arg(long)]
        input_dir: Option<PathBuf>,
        #[arg(long, short)]
        output: PathBuf,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Select the approved class set from a histogram.
    OptimizeClasses {
        #[arg(long)]
        histogram: PathBuf,
        #[arg(long, short)]
        output: PathBuf,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Per-batch class weights from class-map files.
    Weights {
        /// Class-map PNGs forming one batch.
        #[arg(required = true)]
        maps: Vec<PathBuf>,
        #[arg(long)]
        approved: Option<PathBuf>,
        #[arg(long, short)]
        output: PathBuf,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Snap chroma outliers to each segment's mode.
    Harmonize {
        /// Prefix of a `<prefix>.a.png` / `<prefix>.b.png` pair.
        #[arg(long, conflicts_with = "classmap", required_unless_present = "classmap")]
        ab: Option<PathBuf>,
        /// Class-map PNG decoded to bin centers.
        #[arg(long)]
        classmap: Option<PathBuf>,
        /// Directory with one mask PNG per segment.
        #[arg(long, conflicts_with = "label_map", required_unless_present = "label_map")]
        masks: Option<PathBuf>,
        /// Single labeled PNG, one segment per nonzero label.
        #[arg(long)]
        label_map: Option<PathBuf>,
        /// Output prefix for the harmonized plane pair.
        #[arg(long, short)]
        output: PathBuf,
        /// Grayscale image supplying lightness for an RGB rendering.
        #[arg(long, requires = "rgb_out")]
        gray: Option<PathBuf>,
        /// Where to write the RGB rendering.
        #[arg(long)]
        rgb_out: Option<PathBuf>,
        /// Diff report JSON (default: stdout).
        #[arg(long)]
        report: Option<PathBuf>,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Class-space metrics between predictions and ground truth.
    Evaluate {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        #[arg(long, value_enum, default_value_t = Kind::Rgb)]
        kind: Kind,
        /// Evaluate in the compacted class space of this approved set.
        #[arg(long)]
        approved: Option<PathBuf>,
        /// Per-image CSV.
        #[arg(long)]
        csv: PathBuf,
        /// Corpus JSON summary.
        #[arg(long)]
        summary: PathBuf,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Quantize an image and report the chroma deviation.
    Roundtrip {
        image: PathBuf,
        /// Report JSON (default: stdout).
        #[arg(long, short)]
        output: Option<PathBuf>,
        /// Write the reconstructed RGB image.
        #[arg(long)]
        reconstructed: Option<PathBuf>,
        /// Write the class map (16-bit PNG + sidecar).
        #[arg(long)]
        classmap_out: Option<PathBuf>,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
}

fn emit(output: Option<&Path>, text: &str) -> Result<()> {
    match output {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)?;
            }
            std::fs::write(p, text).with_context(|| format!("writing {}", p.display()))
        }
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn pretty<T: serde::Serialize>(v: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    Ok(s)
}

fn with_pool<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match jobs {
        Some(n) => Ok(rayon::ThreadPoolBuilder::new().num_threads(n).build()?.install(f)),
        None => Ok(f()),
    }
}

pub fn run(cli: Cli) -> Result<Status> {
    match cli.command {
        Command::AnalyzeBins {
            alphas,
            format,
            rgb,
            output,
        } => {
            let report = commands::analyze_bins(&alphas, rgb)?;
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            let text = match format {
                Format::Csv => commands::bin_report_csv(&report)?,
                Format::Json => pretty(&report)?,
            };
            emit(output.as_deref(), &text)?;
            Ok(Status::Success)
        }
        Command::BuildHistogram {
            manifest,
            input_dir,
            output,
            cfg,
        } => {
            let config = cfg.resolve()?;
            let manifest = match (manifest, input_dir) {
                (Some(m), _) => CorpusManifest::read(&m)?,
                (None, Some(d)) => CorpusManifest::scan(&d)?,
                (None, None) => bail!("either --manifest or --input-dir is required"),
            };
            let (doc, status) = with_pool(cfg.jobs, || commands::build_histogram(&manifest, &config))??;
            for f in &doc.failures {
                eprintln!("failed: {}: {}", f.path, f.error);
            }
            formats::write_json(&output, &doc)?;
            eprintln!(
                "counted {} files ({} failed), {} samples, {} non-empty classes",
                doc.files_counted,
                doc.failures.len(),
                doc.total_samples,
                doc.nonzero_classes
            );
            Ok(status)
        }
        Command::OptimizeClasses {
            histogram,
            output,
            cfg,
        } => {
            let config = cfg.resolve()?;
            let doc = commands::optimize_classes(&HistogramDoc::read(&histogram)?, &config)?;
            formats::write_json(&output, &doc)?;
            eprintln!(
                "approved {} of {} classes (min count {})",
                doc.approved_count,
                doc.remap.len(),
                doc.min_count_threshold
            );
            Ok(Status::Success)
        }
        Command::Weights {
            maps,
            approved,
            output,
            cfg,
        } => {
            let config = cfg.resolve()?;
            let Some(approved) = approved else {
                bail!("--approved <approved set JSON> is required to index classes");
            };
            let doc = commands::weights(&maps, &ApprovedSetDoc::read(&approved)?, &config)?;
            formats::write_json(&output, &doc)?;
            Ok(Status::Success)
        }
        Command::Harmonize {
            ab,
            classmap,
            masks,
            label_map,
            output,
            gray,
            rgb_out,
            report,
            cfg,
        } => {
            let config = cfg.resolve()?;
            let chroma_src = match (ab, classmap) {
                (Some(p), _) => ChromaSource::Planes(p),
                (None, Some(p)) => ChromaSource::ClassMap(p),
                (None, None) => bail!("either --ab or --classmap is required"),
            };
            let mask_src = match (masks, label_map) {
                (Some(d), _) => MaskSource::Dir(d),
                (None, Some(p)) => MaskSource::LabelMap(p),
                (None, None) => bail!("either --masks or --label-map is required"),
            };
            let chroma = commands::load_chroma(&chroma_src, &config)?;
            let mask_set = commands::load_masks(&mask_src)?;
            let gray_img = gray.as_deref().map(formats::load_rgb).transpose()?;
            let (out, rgb, rep) = commands::harmonize(&chroma, &mask_set, gray_img.as_ref(), &config)?;
            formats::write_ab(&output, &out)?;
            if let (Some(path), Some(img)) = (rgb_out, rgb) {
                formats::save_rgb(&path, &img)?;
            }
            emit(report.as_deref(), &pretty(&rep)?)?;
            Ok(Status::Success)
        }
        Command::Evaluate {
            pred,
            truth,
            kind,
            approved,
            csv,
            summary,
            cfg,
        } => {
            let config = cfg.resolve()?;
            let approved = approved.as_deref().map(ApprovedSetDoc::read).transpose()?;
            let kind = match kind {
                Kind::Rgb => InputKind::Rgb,
                Kind::Classmap => InputKind::ClassMap,
            };
            let (rows, sum, status) =
                with_pool(cfg.jobs, || commands::evaluate(&pred, &truth, kind, approved.as_ref(), &config))??;
            emit(Some(&csv), &commands::eval_rows_csv(&rows)?)?;
            formats::write_json(&summary, &sum)?;
            for f in &sum.failures {
                eprintln!("failed: {}: {}", f.path, f.error);
            }
            Ok(status)
        }
        Command::Roundtrip {
            image,
            output,
            reconstructed,
            classmap_out,
            cfg,
        } => {
            let config = cfg.resolve()?;
            let img = formats::load_rgb(&image)?;
            let out = commands::roundtrip(&img, &config)?;
            if let Some(p) = reconstructed {
                formats::save_rgb(&p, &out.reconstructed)?;
            }
            if let Some(p) = classmap_out {
                commands::save_full_classmap(&p, &out.classes, config.grid()?)?;
            }
            emit(output.as_deref(), &pretty(&out.report)?)?;
            Ok(Status::Success)
        }
    }
}

/// Parses `args`, runs the command and maps the outcome to an exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(status) => status.code(),
        Err(e) => {
            eprintln!("error: {e:#}");
            2
        }
    }
}
