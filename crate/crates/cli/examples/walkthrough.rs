//! Runs the whole pipeline on a generated corpus.
//!
//!     cargo run --release -p colorclass-cli --example walkthrough [WORKDIR]

use colorclass_cli::synth;

fn main() -> anyhow::Result<()> {
    let work = match std::env::args_os().nth(1) {
        Some(p) => std::path::PathBuf::from(p),
        None => std::env::temp_dir().join("colorclass-walkthrough"),
    };
    std::fs::create_dir_all(&work)?;
    let w = synth::walkthrough(&work, 2024)?;
    for (name, d) in &w.stages {
        println!("{name:<18} {:>8.1} ms", d.as_secs_f64() * 1e3);
    }
    println!("{:<18} {:>8.1} ms", "total", w.total.as_secs_f64() * 1e3);
    println!("occupied classes   {}", w.nonzero_classes);
    println!("approved classes   {}", w.approved_classes);
    println!("batch psi          {:.3}", w.weight_psi);
    println!("harmonized pixels  {}", w.harmonized_pixels);
    println!("                   raw      harmonized");
    println!("mean CNR           {:<8.4} {:.4}", w.raw.cnr, w.harmonized.cnr);
    println!("mean TAR %         {:<8.2} {:.2}", w.raw.tar, w.harmonized.tar);
    println!("mean PSNR dB       {:<8.2} {:.2}", w.raw.psnr, w.harmonized.psnr);
    println!("outputs in {}", work.display());
    Ok(())
}
