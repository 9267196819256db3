//! Full test battery on heterogeneous-slope panels, once under independence
//! and once with a dense common factor.
//!
//!     cargo run --release --example heterogeneous_battery

use panelcd::dgp::generate;
use panelcd::report::format_battery_table;
use panelcd::{fit, run_all, Alternative, DgpConfig, DgpKind, TestConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for alt in [Alternative::Null, Alternative::Dense { h: 3.0 }] {
        let cfg = DgpConfig::new(DgpKind::Dgp1, 100, 100).alternative(alt).seed(7);
        let g = generate(&cfg)?;
        // bases are kept so that LM_adj can be computed
        let resid = fit(&g.panel, g.model_spec, true)?;
        let battery = run_all(&resid, &TestConfig::default());
        print!("{}", format_battery_table(&battery, &format!("DGP1 T=100 n=100 alternative={alt}")));
        println!();
    }
    Ok(())
}
