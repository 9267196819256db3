//! The cross-sectional independence test battery.
//!
//! Every statistic is a function of the residual correlation matrix. Six of
//! them only need [`TraceStats`]; `LM_adj` additionally needs the per-unit
//! design bases retained by the per-unit estimators.
//!
//! In all formulas `T` is the effective residual sample length and `k` the
//! effective regressor count of the fitted model.

use std::fmt;
use std::str::FromStr;

use statrs::function::gamma::gamma_ur;

use libm::erfc;

use crate::corr::{check_basis, correlation_matrix, pair_moments_unchecked, trace_stats, CorrelationMatrix, TraceStats};
use crate::error::{Error, Result};
use crate::panel::{Basis, ModelSpec, ResidualMatrix};

pub const DEFAULT_ALPHA: f64 = 0.05;
const P_FLOOR: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TestKind {
    Lm,
    CdLm,
    CdP,
    LmBc,
    LmAdj,
    LmRmt,
    Rlm,
    RlmPe,
}

impl TestKind {
    pub const ALL: [TestKind; 8] = [
        TestKind::Lm,
        TestKind::CdLm,
        TestKind::CdP,
        TestKind::LmBc,
        TestKind::LmAdj,
        TestKind::LmRmt,
        TestKind::Rlm,
        TestKind::RlmPe,
    ];

    /// Display name, e.g. `RLM_PE`.
    pub fn name(&self) -> &'static str {
        match self {
            TestKind::Lm => "LM",
            TestKind::CdLm => "CD_LM",
            TestKind::CdP => "CD_P",
            TestKind::LmBc => "LM_bc",
            TestKind::LmAdj => "LM_adj",
            TestKind::LmRmt => "LM_RMT",
            TestKind::Rlm => "RLM",
            TestKind::RlmPe => "RLM_PE",
        }
    }

    /// Short command-line identifier, e.g. `rlmpe`.
    pub fn id(&self) -> &'static str {
        match self {
            TestKind::Lm => "lm",
            TestKind::CdLm => "cdlm",
            TestKind::CdP => "cdp",
            TestKind::LmBc => "lmbc",
            TestKind::LmAdj => "lmadj",
            TestKind::LmRmt => "lmrmt",
            TestKind::Rlm => "rlm",
            TestKind::RlmPe => "rlmpe",
        }
    }
}

impl fmt::Display for TestKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TestKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key: String = s.chars().filter(|c| c.is_ascii_alphanumeric()).collect::<String>().to_ascii_lowercase();
        TestKind::ALL
            .into_iter()
            .find(|k| k.id() == key)
            .ok_or_else(|| Error::InvalidInput(format!("unknown test {s:?} (expected one of lm, cdlm, cdp, lmbc, lmadj, lmrmt, rlm, rlmpe)")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NullDist {
    StdNormal,
    /// Chi-squared with the given degrees of freedom.
    ChiSquared(f64),
}

impl fmt::Display for NullDist {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NullDist::StdNormal => f.write_str("N(0,1)"),
            NullDist::ChiSquared(d) => write!(f, "chi2({d})"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sidedness {
    UpperOneSided,
    TwoSided,
}

impl fmt::Display for Sidedness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sidedness::UpperOneSided => "upper",
            Sidedness::TwoSided => "two-sided",
        })
    }
}

/// Upper tail of the standard normal.
pub fn normal_sf(z: f64) -> f64 {
    0.5 * erfc(z / std::f64::consts::SQRT_2)
}

/// Upper tail of chi-squared with `d` degrees of freedom.
pub fn chi2_sf(x: f64, d: f64) -> f64 {
    if x <= 0.0 {
        1.0
    } else {
        gamma_ur(d / 2.0, x / 2.0)
    }
}

/// p-value of `statistic` under `dist` with the given sidedness, clamped to
/// `[1e-300, 1]`.
pub fn p_value(statistic: f64, dist: NullDist, sidedness: Sidedness) -> f64 {
    let p = match (dist, sidedness) {
        (NullDist::StdNormal, Sidedness::UpperOneSided) => normal_sf(statistic),
        (NullDist::StdNormal, Sidedness::TwoSided) => erfc(statistic.abs() / std::f64::consts::SQRT_2),
        (NullDist::ChiSquared(d), Sidedness::UpperOneSided) => chi2_sf(statistic, d),
        (NullDist::ChiSquared(d), Sidedness::TwoSided) => {
            let upper = chi2_sf(statistic, d);
            2.0 * upper.min(1.0 - upper)
        }
    };
    p.clamp(P_FLOOR, 1.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestResult {
    pub kind: TestKind,
    pub statistic: f64,
    pub null_dist: NullDist,
    pub sidedness: Sidedness,
    pub p_value: f64,
    pub reject: bool,
}

impl TestResult {
    pub fn new(kind: TestKind, statistic: f64, null_dist: NullDist, sidedness: Sidedness, alpha: f64) -> Result<Self> {
        if !statistic.is_finite() {
            return Err(Error::InvalidInput(format!("{kind} statistic is not finite ({statistic})")));
        }
        let p = p_value(statistic, null_dist, sidedness);
        Ok(TestResult { kind, statistic, null_dist, sidedness, p_value: p, reject: p < alpha })
    }

    fn normal_upper(kind: TestKind, statistic: f64, alpha: f64) -> Result<Self> {
        Self::new(kind, statistic, NullDist::StdNormal, Sidedness::UpperOneSided, alpha)
    }
}

/// Null centering and scale constants of the RLM and RLM_PE statistics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NullConstants {
    pub mu0: f64,
    pub sigma0: f64,
    pub mu_pe: f64,
    pub sigma_pe: f64,
    /// n / T
    pub c_t: f64,
}

impl NullConstants {
    pub fn new(n: usize, t: usize) -> Self {
        let (nf, tf) = (n as f64, t as f64);
        let c = nf / tf;
        let tm1 = tf - 1.0;
        let mu0 = nf + nf * nf / tm1 - c;
        let sigma0 = 2.0 * c;
        let mu_pe = nf + 6.0 * nf * nf / tm1 + 6.0 * nf.powi(3) / (tm1 * tm1) + nf.powi(4) / tm1.powi(3)
            - 6.0 * c * (1.0 + c).powi(2)
            - 2.0 * c * c;
        let var_pe = 8.0 * c * c + 96.0 * c.powi(3) * (1.0 + c).powi(2) + 16.0 * c * c * (3.0 * c * c + 8.0 * c + 3.0).powi(2);
        NullConstants { mu0, sigma0, mu_pe, sigma_pe: var_pe.sqrt(), c_t: c }
    }
}

fn dims(stats: &TraceStats) -> (f64, f64) {
    (stats.n as f64, stats.t_eff as f64)
}

/// Breusch-Pagan LM: `(T/2)(tr R^2 - n)`, chi-squared with n(n-1)/2 df.
pub fn lm_stat(stats: &TraceStats, alpha: f64) -> Result<TestResult> {
    let (n, t) = dims(stats);
    let d = n * (n - 1.0) / 2.0;
    TestResult::new(TestKind::Lm, t / 2.0 * (stats.tr_r2 - n), NullDist::ChiSquared(d), Sidedness::UpperOneSided, alpha)
}

pub fn cd_lm_value(stats: &TraceStats) -> f64 {
    let (n, t) = dims(stats);
    (t * t / (4.0 * n * (n - 1.0))).sqrt() * (stats.tr_r2 - n - n * (n - 1.0) / t)
}

/// Scaled LM: `sqrt(T^2/(4n(n-1))) [tr R^2 - n - n(n-1)/T]`.
pub fn cd_lm_stat(stats: &TraceStats, alpha: f64) -> Result<TestResult> {
    TestResult::normal_upper(TestKind::CdLm, cd_lm_value(stats), alpha)
}

/// Pesaran CD: `sqrt(T/(2n(n-1))) sum_{i!=j} rho_ij`, two-sided.
pub fn cd_p_stat(stats: &TraceStats, alpha: f64) -> Result<TestResult> {
    let (n, t) = dims(stats);
    let value = (t / (2.0 * n * (n - 1.0))).sqrt() * stats.offdiag_sum;
    TestResult::new(TestKind::CdP, value, NullDist::StdNormal, Sidedness::TwoSided, alpha)
}

/// Bias-corrected scaled LM: `CD_LM - n/(2(T-1))`.
pub fn lm_bc_stat(stats: &TraceStats, alpha: f64) -> Result<TestResult> {
    let (n, t) = dims(stats);
    TestResult::normal_upper(TestKind::LmBc, cd_lm_value(stats) - n / (2.0 * (t - 1.0)), alpha)
}

/// Variance term of LM_RMT (written as `sigma_RMT` in the literature but
/// dimensionally a variance).
pub fn rmt_variance(n: usize, t: usize, k: usize) -> f64 {
    let (n, t, k) = (n as f64, t as f64, k as f64);
    let kappa = 3.0 * t * (t - k - 2.0) / ((t + 2.0) * (t - k));
    4.0 * n * (2.0 * n + t) * (n + 2.0 * t) / t.powi(3) - 4.0 * (kappa - 1.0) * n * (n + t).powi(2) / t.powi(3)
        - (kappa - 3.0) * n * (n - 4.0 * t).powi(2) * (n + t).powi(2) / t.powi(5)
}

/// RMT-based LM: `[tr R^2 - n - n^2/T - n^2/T^2 + n/T] / sqrt(var)`.
pub fn lm_rmt_stat(stats: &TraceStats, k: usize, alpha: f64) -> Result<TestResult> {
    let (n, t) = dims(stats);
    if stats.t_eff <= k + 2 {
        return Err(Error::InvalidInput(format!("LM_RMT needs T > k + 2 (T = {}, k = {k})", stats.t_eff)));
    }
    let var = rmt_variance(stats.n, stats.t_eff, k);
    if !(var > 0.0) {
        return Err(Error::InvalidInput(format!("LM_RMT variance is not positive ({var})")));
    }
    let centered = stats.tr_r2 - n - n * n / t - n * n / (t * t) + n / t;
    TestResult::normal_upper(TestKind::LmRmt, centered / var.sqrt(), alpha)
}

/// RLM: `(tr R^2 - mu0) / sigma0`.
pub fn rlm_stat(stats: &TraceStats, alpha: f64) -> Result<TestResult> {
    if stats.t_eff < 2 {
        return Err(Error::InvalidInput("RLM needs T >= 2".into()));
    }
    let c = NullConstants::new(stats.n, stats.t_eff);
    TestResult::normal_upper(TestKind::Rlm, (stats.tr_r2 - c.mu0) / c.sigma0, alpha)
}

/// Power-enhanced RLM: `(tr R^4 - mu_PE) / sigma_PE`.
pub fn rlm_pe_stat(stats: &TraceStats, alpha: f64) -> Result<TestResult> {
    if stats.t_eff < 2 {
        return Err(Error::InvalidInput("RLM_PE needs T >= 2".into()));
    }
    let c = NullConstants::new(stats.n, stats.t_eff);
    TestResult::normal_upper(TestKind::RlmPe, (stats.tr_r4 - c.mu_pe) / c.sigma_pe, alpha)
}

/// Bias-adjusted LM with exact pair moments:
/// `sqrt(1/(2n(n-1))) sum_{i!=j} [(T-k) rho_ij^2 - mu_ij] / sigma_ij`.
///
/// The summand is symmetric, so each unordered pair is evaluated once and
/// counted twice.
pub fn lm_adj_stat(r: &CorrelationMatrix, bases: &[Basis], t: usize, k: usize, alpha: f64) -> Result<TestResult> {
    let n = r.n();
    if bases.len() != n {
        return Err(Error::InvalidInput(format!("{} bases supplied for {n} units", bases.len())));
    }
    if t < k + 3 {
        return Err(Error::InvalidInput(format!("LM_adj needs T > k + 2 (T = {t}, k = {k})")));
    }
    for b in bases {
        if b.rows() != t || b.cols() != k {
            return Err(Error::InvalidInput("basis shape does not match (T, k)".into()));
        }
        check_basis(b)?;
    }
    let dof = (t - k) as f64;
    let mut scratch = vec![0.0; k * k];
    let mut total = 0.0;
    for i in 0..n {
        let mut row = 0.0;
        for j in (i + 1)..n {
            let m = pair_moments_unchecked(&bases[i], &bases[j], t, k, &mut scratch);
            let rho = r.get(i, j);
            row += (dof * rho * rho - m.mu_t_ij) / m.sigma_t_ij;
        }
        total += row;
    }
    let nf = n as f64;
    let value = (1.0 / (2.0 * nf * (nf - 1.0))).sqrt() * 2.0 * total;
    TestResult::normal_upper(TestKind::LmAdj, value, alpha)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestConfig {
    pub alpha: f64,
    pub tests: Vec<TestKind>,
}

impl Default for TestConfig {
    fn default() -> Self {
        TestConfig { alpha: DEFAULT_ALPHA, tests: TestKind::ALL.to_vec() }
    }
}

impl TestConfig {
    pub fn new(alpha: f64, tests: Vec<TestKind>) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::InvalidInput(format!("alpha must lie in (0, 1), got {alpha}")));
        }
        Ok(TestConfig { alpha, tests })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TestOutcome {
    Computed(TestResult),
    /// The statistic is undefined for this residual source.
    Unsupported(String),
    Failed(String),
}

impl TestOutcome {
    pub fn result(&self) -> Option<&TestResult> {
        match self {
            TestOutcome::Computed(r) => Some(r),
            _ => None,
        }
    }
}

/// Results of one battery run, in request order.
#[derive(Debug, Clone, PartialEq)]
pub struct Battery {
    pub entries: Vec<(TestKind, TestOutcome)>,
    pub trace: Option<TraceStats>,
}

impl Battery {
    pub fn get(&self, kind: TestKind) -> Option<&TestResult> {
        self.entries.iter().find(|(k, _)| *k == kind).and_then(|(_, o)| o.result())
    }
}

/// Computes the correlation matrix and trace functionals once, then every
/// requested statistic. Failures are recorded per test.
pub fn run_all(resid: &ResidualMatrix, cfg: &TestConfig) -> Battery {
    let r = match correlation_matrix(resid) {
        Ok(r) => r,
        Err(e) => {
            let msg = e.to_string();
            return Battery { entries: cfg.tests.iter().map(|&k| (k, TestOutcome::Failed(msg.clone()))).collect(), trace: None };
        }
    };
    let stats = trace_stats(&r, resid.t_eff());
    let alpha = cfg.alpha;
    let entries = cfg
        .tests
        .iter()
        .map(|&kind| {
            let outcome = match kind {
                TestKind::Lm => lm_stat(&stats, alpha),
                TestKind::CdLm => cd_lm_stat(&stats, alpha),
                TestKind::CdP => cd_p_stat(&stats, alpha),
                TestKind::LmBc => lm_bc_stat(&stats, alpha),
                TestKind::LmRmt => lm_rmt_stat(&stats, resid.k_eff(), alpha),
                TestKind::Rlm => rlm_stat(&stats, alpha),
                TestKind::RlmPe => rlm_pe_stat(&stats, alpha),
                TestKind::LmAdj => match (resid.bases(), resid.estimator()) {
                    (_, Some(ModelSpec::FixedEffects)) => {
                        Err(Error::Unsupported("LM_adj has no exact moments for pooled within residuals".into()))
                    }
                    (None, _) => Err(Error::MissingBases),
                    (Some(b), _) => lm_adj_stat(&r, b, resid.t_eff(), resid.k_eff(), alpha),
                },
            };
            let outcome = match outcome {
                Ok(res) => TestOutcome::Computed(res),
                Err(e @ (Error::Unsupported(_) | Error::MissingBases)) => TestOutcome::Unsupported(e.to_string()),
                Err(e) => TestOutcome::Failed(e.to_string()),
            };
            (kind, outcome)
        })
        .collect();
    Battery { entries, trace: Some(stats) }
}

/// Convenience: battery from already-computed trace functionals (no LM_adj).
pub fn run_on_trace(stats: &TraceStats, k: usize, cfg: &TestConfig) -> Vec<(TestKind, Result<TestResult>)> {
    cfg.tests
        .iter()
        .map(|&kind| {
            let alpha = cfg.alpha;
            let r = match kind {
                TestKind::Lm => lm_stat(stats, alpha),
                TestKind::CdLm => cd_lm_stat(stats, alpha),
                TestKind::CdP => cd_p_stat(stats, alpha),
                TestKind::LmBc => lm_bc_stat(stats, alpha),
                TestKind::LmRmt => lm_rmt_stat(stats, k, alpha),
                TestKind::Rlm => rlm_stat(stats, alpha),
                TestKind::RlmPe => rlm_pe_stat(stats, alpha),
                TestKind::LmAdj => Err(Error::MissingBases),
            };
            (kind, r)
        })
        .collect()
}
