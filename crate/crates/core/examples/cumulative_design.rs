//! Build a quantile grid of candidate thresholds and the nested indicator design.
//!
//! ```bash
//! cargo run --release --example cumulative_design
//! ```

use binilasso::binarize::{build_cut_grid, cumulative_binarize, design_rank_check, GridStrategy};
use binilasso::design::DesignMatrix;
use binilasso::simgen::{simulate, ScenarioConfig};

fn main() -> binilasso::Result<()> {
    let sim = simulate(&ScenarioConfig::for_scenario(1, 200, 7))?;
    let grid = build_cut_grid(&sim.data, 10, GridStrategy::Quantile)?;
    for f in &grid.features {
        println!("{}: {:.3?}", f.name, f.thresholds);
    }

    let x = cumulative_binarize(&sim.data, &grid)?;
    println!("\n{} rows x {} columns, {} nonzeros", x.n_rows(), x.n_cols(), x.nnz());

    // a row's indicators are 1 up to the last threshold below its value
    let row = 0;
    let value = sim.data.features()[(row, 0)];
    let bits: String = x.columns_of_feature(0).iter().map(|&k| if x.get(row, k) { '1' } else { '0' }).collect();
    println!("row {row}: x1 = {value:.3} -> {bits}");

    let rank = design_rank_check(&x);
    println!("rank {} of {} columns, duplicates {:?}", rank.rank, rank.n_cols, rank.duplicated);
    Ok(())
}
