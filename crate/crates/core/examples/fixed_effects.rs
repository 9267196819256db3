//! Within (fixed-effects) residuals for a hand-built panel with unit effects
//! and a weak common shock in a third of the units.
//!
//!     cargo run --release --example fixed_effects

use panelcd::report::format_battery_table;
use panelcd::{derive_stream, fit_fixed_effects, run_all, PanelDataset, TestConfig};
use rand::Rng;
use rand_distr::StandardNormal;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (n, t) = (60, 80);
    let mut rng = derive_stream(11, 0, 0);
    let shock: Vec<f64> = (0..t).map(|_| rng.sample(StandardNormal)).collect();
    let effects: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
    let x: Vec<f64> = (0..n * t).map(|_| rng.sample(StandardNormal)).collect();
    let noise: Vec<f64> = (0..n * t).map(|_| rng.sample(StandardNormal)).collect();

    // columns: intercept, x; y_it = a_i + 0.5 x_it + [i < n/3] f_t + e_it
    let panel = PanelDataset::from_fn(
        n,
        t,
        2,
        true,
        |i, s| effects[i] + 0.5 * x[i * t + s] + if i < n / 3 { shock[s] } else { 0.0 } + noise[i * t + s],
        |i, _, s| x[i * t + s],
    )?;
    let resid = fit_fixed_effects(&panel)?;
    println!("T_eff={} k_eff={}", resid.t_eff(), resid.k_eff());
    // LM_adj is reported as unsupported for pooled residuals
    print!("{}", format_battery_table(&run_all(&resid, &TestConfig::default()), "fixed effects, shock in 20 of 60 units"));
    Ok(())
}
