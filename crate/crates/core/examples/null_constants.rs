//! The statistics as functions of tr(R^2) and tr(R^4): centring and scaling
//! constants, the exact algebraic links between CD_LM, LM_BC and RLM, and
//! how far the RMT variance term sits from its limit.
//!
//!     cargo run --release --example null_constants

use panelcd::cdtest::{cd_lm_value, lm_bc_stat, rlm_stat, rmt_variance};
use panelcd::corr::correlation_from_rows;
use panelcd::dgp::gen_errors;
use panelcd::{derive_stream, trace_stats, ErrorDist, NullConstants};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (n, t) = (40, 90);
    let v = gen_errors(ErrorDist::Normal, n, t, &mut derive_stream(1, 0, 0));
    let s = trace_stats(&correlation_from_rows(&v, n, t)?, t);
    println!("n={n} T={t}: tr R^2={:.4} tr R^4={:.4}", s.tr_r2, s.tr_r4);
    println!("{:?}", NullConstants::new(n, t));

    let (nf, tf) = (n as f64, t as f64);
    let cd_lm = cd_lm_value(&s);
    let lm_bc = lm_bc_stat(&s, 0.05)?.statistic;
    let rlm = rlm_stat(&s, 0.05)?.statistic;
    println!("CD_LM - LM_BC            = {:.15}", cd_lm - lm_bc);
    println!("n / (2(T-1))             = {:.15}", nf / (2.0 * (tf - 1.0)));
    println!("sqrt(n/(n-1)) (RLM + ..) = {:.15}", (nf / (nf - 1.0)).sqrt() * (rlm + nf / (2.0 * (tf - 1.0))));
    println!("CD_LM                    = {cd_lm:.15}");

    println!("\nRMT variance term at n = T, k = 2 (limit 4):");
    for t in [100, 200, 1000, 10_000, 100_000] {
        println!("  T={t:>6}: {:.4}", rmt_variance(t, t, 2));
    }
    Ok(())
}
