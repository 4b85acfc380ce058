//! Runs a small grid, writes its CSVs and renders the mean-error curves.
//!
//! Usage: `cargo run --release --example plot [OUT_DIR]`

use std::path::PathBuf;

use asyncmatd::harness::{cmd_plot_data, cmd_run, ExperimentConfig};
use asyncmatd::Result;

fn main() -> Result<()> {
    let out = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("asyncmatd-plot"));
    let config = ExperimentConfig::load(concat!(env!("CARGO_MANIFEST_DIR"), "/configs/paper_fig.json").as_ref())?;
    let cells = cmd_run(&config, Some(&out))?;
    let inputs: Vec<PathBuf> = cells.iter().map(|c| out.join(format!("{}_aggregate.csv", c.cell.slug()))).collect();
    let plot = cmd_plot_data(&inputs, &out)?;
    println!("series: {:?}", plot.series);
    println!("wrote {} and {}", plot.svg.display(), plot.csv.display());
    Ok(())
}
