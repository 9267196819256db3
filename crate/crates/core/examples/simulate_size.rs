//! Small size/power experiment over two cells. Results depend only on the
//! root seed, not on the number of workers.
//!
//!     cargo run --release --example simulate_size [reps]

use panelcd::report::{format_report_table, write_report_csv};
use panelcd::{run_experiment, Alternative, DgpConfig, DgpKind, ExperimentPlan, TestKind};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let reps = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(200);
    let cells = vec![
        DgpConfig::new(DgpKind::Dgp1, 50, 50),
        DgpConfig::new(DgpKind::Dgp1, 50, 100),
        DgpConfig::new(DgpKind::Dgp1, 50, 50).alternative(Alternative::Sparse),
        DgpConfig::new(DgpKind::Dgp1, 50, 100).alternative(Alternative::Sparse),
    ];
    let mut plan = ExperimentPlan::new(cells, reps, 2024);
    plan.tests = vec![TestKind::CdP, TestKind::LmBc, TestKind::Rlm, TestKind::RlmPe];
    plan.workers = std::thread::available_parallelism().map_or(1, |n| n.get());

    let report = run_experiment(&plan)?;
    print!("{}", format_report_table(&report));
    println!("\n{:.1}s; CSV form:", report.wall_time.as_secs_f64());
    write_report_csv(&report, std::io::stdout())?;
    Ok(())
}
