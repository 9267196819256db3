//! Dynamic panel (lagged dependent variable) from the AR(1) design, fitted
//! with the augmented per-unit regression.
//!
//!     cargo run --release --example dynamic_panel

use panelcd::dgp::generate;
use panelcd::report::format_battery_table;
use panelcd::{fit, run_all, DgpConfig, DgpKind, ErrorDist, TestConfig, TestKind};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = DgpConfig::new(DgpKind::Dgp4, 100, 50).errors(ErrorDist::StudentT10).seed(3);
    let g = generate(&cfg)?;
    println!("AR roots redrawn: {}", g.ar_redraws);
    let resid = fit(&g.panel, g.model_spec, true)?;
    println!("T={} -> T_eff={}, k_eff={}", g.panel.t(), resid.t_eff(), resid.k_eff());
    let tests = TestConfig::new(0.10, vec![TestKind::CdP, TestKind::Rlm, TestKind::RlmPe, TestKind::LmAdj])?;
    print!("{}", format_battery_table(&run_all(&resid, &tests), "DGP4, t(10) errors, alpha=0.10"));
    Ok(())
}
