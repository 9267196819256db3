//! Long-format CSV: dump a generated panel, read it back (rows in any order)
//! and test it, as the `dump-dgp` and `test` subcommands do.
//!
//!     cargo run --release --example csv_roundtrip

use panelcd::cli::{dump_panel_csv, read_panel_csv};
use panelcd::dgp::generate;
use panelcd::report::write_battery_csv;
use panelcd::{fit_heterogeneous, run_all, DgpConfig, DgpKind, TestConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let g = generate(&DgpConfig::new(DgpKind::Dgp3, 30, 12).seed(5))?;
    let mut buf = Vec::new();
    dump_panel_csv(&g.panel, &mut buf)?;

    let text = String::from_utf8(buf).expect("utf-8");
    let mut lines: Vec<&str> = text.lines().collect();
    println!("{} rows, header: {}", lines.len() - 1, lines[0]);
    // the reader sorts by labels, so shuffled rows give the same panel
    lines[1..].reverse();
    let back = read_panel_csv(lines.join("\n").as_bytes(), true)?;
    assert_eq!(back, g.panel);
    println!("round trip exact");

    let battery = run_all(&fit_heterogeneous(&back, true)?, &TestConfig::default());
    write_battery_csv(&battery, std::io::stdout())?;
    Ok(())
}
