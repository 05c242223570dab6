//! Averaged coefficients of D2 tabulated on an x-grid by invariant-measure
//! Monte Carlo, compared with their closed forms and with a refined grid.
//!
//! cargo run --release --example averaged_table

use stable_averaging::ergodics::{AveragedTable, AveragingGrid, ErgodicConfig, GridAxis};
use stable_averaging::systems::{d1_averaged_drift, d2, d2_averaged_noise};

fn main() -> stable_averaging::Result<()> {
    let alpha = 1.5;
    let sys = d2(alpha);
    let grid = AveragingGrid::autonomous(vec![GridAxis::new(-2.0, 2.0, 9)?]);
    let cfg = ErgodicConfig { horizon: 40.0, replicas: 100, seed: 5, ..Default::default() };
    let table = AveragedTable::new(&sys, grid, cfg)?;
    let (b_exact, d_exact) = (d1_averaged_drift(alpha), d2_averaged_noise(alpha));
    let (mut b, mut d, mut be, mut de) = ([0.0], [0.0], [0.0], [0.0]);
    println!("{:>6} {:>10} {:>10} {:>10} {:>10}", "x", "b_table", "b_exact", "d_table", "d_exact");
    for k in 0..8 {
        let x = -2.0 + 0.5 * k as f64 + 0.1;
        table.eval(0.0, &[x], &mut b, &mut d)?;
        b_exact(0.0, &[x], &mut be);
        d_exact(0.0, &[x], &mut de);
        println!("{x:>6.2} {:>10.5} {:>10.5} {:>10.5} {:>10.5}", b[0], be[0], d[0], de[0]);
    }
    println!("refinement gap: {:.2e}", table.refinement_gap()?);
    Ok(())
}
