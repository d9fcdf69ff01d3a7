//! End to end: generate a planted dataset, run features, encoding, the
//! pairwise study and the report.

use parsebrain::atlas::Hemisphere;
use parsebrain::pipeline::{max_other_pct, roi_pct, run_pairwise, RunConfig};
use parsebrain::synth::{write_dataset, SynthSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let dir = std::env::args().nth(1).map(std::path::PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("parsebrain-planted"));
    let spec = SynthSpec { n_voxels: 720, ..SynthSpec::default() };
    let data = write_dataset(&dir.join("data"), &spec)?;
    let mut cfg = RunConfig::load(&data.config)?;
    cfg.out = dir.join("out");
    let (run, outcome) = run_pairwise(cfg)?;
    for c in &outcome.comparisons {
        println!(
            "{:<4} AG-L {:>5.1}%  elsewhere at most {:>4.1}%",
            c.name,
            roi_pct(&outcome, &c.name, "AG", Hemisphere::Left).unwrap_or(0.0),
            max_other_pct(&outcome, &c.name, "AG", Hemisphere::Left)
        );
    }
    println!("outputs in {}", run.out.root().display());
    Ok(())
}
