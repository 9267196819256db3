//! Synthetic panels for the four Monte Carlo designs.
//!
//! | design | model | fitted as |
//! |--------|-------|-----------|
//! | DGP1 | heterogeneous slopes, strictly exogenous AR(1) regressors | heterogeneous |
//! | DGP2 | heterogeneous slopes, `x2` fed back from `y_{t-1}` | heterogeneous |
//! | DGP3 | homogeneous slopes with unit fixed effects | fixed effects |
//! | DGP4 | heterogeneous AR(1) in `y` with unit-specific level | dynamic |
//!
//! Recursions start at `t = -burn_in` from zero and only periods `1..=T`
//! are emitted.
//!
//! # Variate generation
//!
//! Every draw comes from the injected [`rand::Rng`] in a fixed order, so a
//! seed defines a panel exactly. Normals use the ziggurat sampler of
//! `rand_distr::StandardNormal`; chi-squared variates use `rand_distr`'s
//! Marsaglia-Tsang gamma sampler; Student-t is a normal over the root of an
//! independent scaled chi-squared; uniforms are `rand`'s float range
//! sampler.
//!
//! Draw order per panel: loadings (alternatives only), factors over the full
//! horizon (alternatives only), then unit by unit the unit parameters,
//! regressor innovations, error scale and errors, as laid out in each
//! generator.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal, StudentT};

use crate::error::{Error, Result};
use crate::mc::derive_stream;
use crate::panel::{validate_dataset, ModelSpec, PanelDataset};

/// Autoregressive coefficient of the exogenous regressors.
const X_AR: f64 = 0.6;
/// Autoregressive roots of `y` (DGP2's `b2`, DGP4's `b`) are redrawn until
/// they lie inside this bound.
pub const MAX_ABS_AR: f64 = 0.98;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DgpKind {
    Dgp1,
    Dgp2,
    Dgp3,
    Dgp4,
}

impl DgpKind {
    pub fn model_spec(&self) -> ModelSpec {
        match self {
            DgpKind::Dgp1 | DgpKind::Dgp2 => ModelSpec::Heterogeneous,
            DgpKind::Dgp3 => ModelSpec::FixedEffects,
            DgpKind::Dgp4 => ModelSpec::Dynamic { include_intercept: true },
        }
    }

    pub fn number(&self) -> u8 {
        match self {
            DgpKind::Dgp1 => 1,
            DgpKind::Dgp2 => 2,
            DgpKind::Dgp3 => 3,
            DgpKind::Dgp4 => 4,
        }
    }
}

impl fmt::Display for DgpKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "DGP{}", self.number())
    }
}

impl FromStr for DgpKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().trim_start_matches("dgp") {
            "1" => Ok(DgpKind::Dgp1),
            "2" => Ok(DgpKind::Dgp2),
            "3" => Ok(DgpKind::Dgp3),
            "4" => Ok(DgpKind::Dgp4),
            _ => Err(Error::InvalidInput(format!("unknown DGP {s:?} (expected 1-4)"))),
        }
    }
}

/// Standardized error distributions (mean 0, variance 1).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ErrorDist {
    Normal,
    /// (chi2(5) - 5) / sqrt(10)
    ChiSq5,
    /// t(10) / sqrt(10/8)
    StudentT10,
}

impl ErrorDist {
    pub fn id(&self) -> &'static str {
        match self {
            ErrorDist::Normal => "normal",
            ErrorDist::ChiSq5 => "chisq",
            ErrorDist::StudentT10 => "t",
        }
    }
}

impl fmt::Display for ErrorDist {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for ErrorDist {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "normal" | "n" => Ok(ErrorDist::Normal),
            "chisq" | "chi2" | "chisquared" | "chi-squared" => Ok(ErrorDist::ChiSq5),
            "t" | "student" | "student-t" | "t10" => Ok(ErrorDist::StudentT10),
            _ => Err(Error::InvalidInput(format!("unknown error distribution {s:?} (expected normal, chisq or t)"))),
        }
    }
}

/// Error structure: independent errors, or a one-factor alternative.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Alternative {
    Null,
    /// Loadings U(-b, b) with b = sqrt(3h/n).
    Dense { h: f64 },
    /// Loadings U(0.5, 1.5) on the first floor(n^0.3) units.
    Sparse,
    /// Loadings U(0.5, 1.5) on the first floor(n^0.5) units.
    LessSparse,
}

impl Alternative {
    pub fn id(&self) -> String {
        match self {
            Alternative::Null => "null".into(),
            Alternative::Dense { h } => format!("dense(h={h})"),
            Alternative::Sparse => "sparse".into(),
            Alternative::LessSparse => "less-sparse".into(),
        }
    }
}

impl fmt::Display for Alternative {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.id())
    }
}

/// One Monte Carlo cell / one synthetic panel description.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DgpConfig {
    pub dgp: DgpKind,
    pub t: usize,
    pub n: usize,
    /// Regressor count including the intercept; only DGP1 and DGP3 read it.
    pub k: usize,
    pub error_dist: ErrorDist,
    pub alternative: Alternative,
    pub burn_in: usize,
    pub seed: u64,
}

impl DgpConfig {
    pub fn new(dgp: DgpKind, t: usize, n: usize) -> Self {
        DgpConfig { dgp, t, n, k: 2, error_dist: ErrorDist::Normal, alternative: Alternative::Null, burn_in: 50, seed: 0 }
    }

    pub fn k(mut self, k: usize) -> Self {
        self.k = k;
        self
    }

    pub fn errors(mut self, dist: ErrorDist) -> Self {
        self.error_dist = dist;
        self
    }

    pub fn alternative(mut self, alt: Alternative) -> Self {
        self.alternative = alt;
        self
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn burn_in(mut self, burn_in: usize) -> Self {
        self.burn_in = burn_in;
        self
    }

    /// Regressor count of the emitted panel (intercept included).
    pub fn panel_k(&self) -> usize {
        match self.dgp {
            DgpKind::Dgp1 | DgpKind::Dgp3 => self.k,
            DgpKind::Dgp2 => 3,
            DgpKind::Dgp4 => 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.t < 10 {
            return Err(Error::InvalidInput(format!("T must be at least 10, got {}", self.t)));
        }
        if self.n < 3 {
            return Err(Error::InvalidInput(format!("n must be at least 3, got {}", self.n)));
        }
        if matches!(self.dgp, DgpKind::Dgp1 | DgpKind::Dgp3) && self.k < 2 {
            return Err(Error::InvalidInput(format!("{} needs k >= 2, got {}", self.dgp, self.k)));
        }
        if self.panel_k() + 2 > self.t {
            return Err(Error::InvalidInput(format!("T = {} too small for k = {}", self.t, self.panel_k())));
        }
        if let Alternative::Dense { h } = self.alternative {
            if !(h > 0.0 && h.is_finite()) {
                return Err(Error::InvalidInput(format!("dense alternative needs h > 0, got {h}")));
            }
        }
        Ok(())
    }

    fn horizon(&self) -> usize {
        self.burn_in + 1 + self.t
    }
}

/// A generated panel with the estimator it should be fitted with.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedPanel {
    pub panel: PanelDataset,
    pub true_loadings: Option<Vec<f64>>,
    pub model_spec: ModelSpec,
    /// Rejected AR-root draws (DGP2 and DGP4).
    pub ar_redraws: usize,
}

/// One standardized error draw.
pub fn draw_error<R: Rng + ?Sized>(dist: ErrorDist, rng: &mut R) -> f64 {
    match dist {
        ErrorDist::Normal => rng.sample(StandardNormal),
        ErrorDist::ChiSq5 => {
            let c: f64 = ChiSquared::new(5.0).expect("valid df").sample(rng);
            (c - 5.0) / 10f64.sqrt()
        }
        ErrorDist::StudentT10 => {
            let t: f64 = StudentT::new(10.0).expect("valid df").sample(rng);
            t / (10.0f64 / 8.0).sqrt()
        }
    }
}

/// `rows x cols` row-major grid of iid standardized errors.
pub fn gen_errors<R: Rng + ?Sized>(dist: ErrorDist, rows: usize, cols: usize, rng: &mut R) -> Vec<f64> {
    (0..rows * cols).map(|_| draw_error(dist, rng)).collect()
}

/// Number of loaded units for the sparse designs: floor(n^delta).
pub fn loaded_count(n: usize, delta: f64) -> usize {
    let raw = (n as f64).powf(delta);
    // guard exact powers such as 100^0.5 against rounding just below
    ((raw + 1e-9).floor() as usize).min(n)
}

/// Factor loadings for an alternative. Panics on [`Alternative::Null`].
pub fn gen_loadings<R: Rng + ?Sized>(alt: Alternative, n: usize, rng: &mut R) -> Vec<f64> {
    match alt {
        Alternative::Null => panic!("null design has no loadings"),
        Alternative::Dense { h } => {
            let b = (3.0 * h / n as f64).sqrt();
            (0..n).map(|_| rng.random_range(-b..b)).collect()
        }
        Alternative::Sparse | Alternative::LessSparse => {
            let delta = if alt == Alternative::Sparse { 0.3 } else { 0.5 };
            let m = loaded_count(n, delta);
            (0..n).map(|i| if i < m { rng.random_range(0.5..1.5) } else { 0.0 }).collect()
        }
    }
}

fn normal<R: Rng + ?Sized>(mean: f64, sd: f64, rng: &mut R) -> f64 {
    mean + sd * rng.sample::<f64, _>(StandardNormal)
}

fn chi2_scaled<R: Rng + ?Sized>(df: f64, rng: &mut R) -> f64 {
    let c: f64 = ChiSquared::new(df).expect("valid df").sample(rng);
    c / df
}

/// Disturbance generator shared by all designs: `sigma_i * eps` under the
/// null with `sigma_i ~ chi2(2)/2`, `lambda_i f_t + eps` otherwise.
struct Disturbances {
    dist: ErrorDist,
    loadings: Option<Vec<f64>>,
    /// Factor values over the full horizon.
    factors: Vec<f64>,
}

impl Disturbances {
    fn draw<R: Rng + ?Sized>(cfg: &DgpConfig, rng: &mut R) -> Self {
        let loadings = match cfg.alternative {
            Alternative::Null => None,
            alt => Some(gen_loadings(alt, cfg.n, rng)),
        };
        let factors = if loadings.is_some() { (0..cfg.horizon()).map(|_| rng.sample(StandardNormal)).collect() } else { Vec::new() };
        Disturbances { dist: cfg.error_dist, loadings, factors }
    }

    /// Disturbances of unit `i` for horizon indices `from..horizon`.
    fn unit<R: Rng + ?Sized>(&self, i: usize, from: usize, horizon: usize, rng: &mut R) -> Vec<f64> {
        match &self.loadings {
            None => {
                let sigma = chi2_scaled(2.0, rng);
                (from..horizon).map(|_| sigma * draw_error(self.dist, rng)).collect()
            }
            Some(lambda) => (from..horizon).map(|h| lambda[i] * self.factors[h] + draw_error(self.dist, rng)).collect(),
        }
    }
}

/// Stationary AR(1) regressor path over the horizon with
/// innovations `N(0, tau^2 / (1 - 0.6^2))`, `tau^2 ~ chi2(6)/6`.
fn ar_regressor<R: Rng + ?Sized>(horizon: usize, rng: &mut R) -> Vec<f64> {
    let tau2 = chi2_scaled(6.0, rng);
    let sd = (tau2 / (1.0 - X_AR * X_AR)).sqrt();
    let mut x = 0.0;
    (0..horizon)
        .map(|_| {
            x = X_AR * x + sd * rng.sample::<f64, _>(StandardNormal);
            x
        })
        .collect()
}

fn finish(cfg: &DgpConfig, y: Vec<f64>, x: Vec<f64>, dist: Disturbances, ar_redraws: usize) -> Result<GeneratedPanel> {
    let panel = PanelDataset::new(cfg.n, cfg.t, cfg.panel_k(), y, x, true)?;
    let model_spec = cfg.dgp.model_spec();
    debug_assert!(validate_dataset(&panel, model_spec).is_ok());
    Ok(GeneratedPanel { panel, true_loadings: dist.loadings, model_spec, ar_redraws })
}

/// Strictly exogenous heterogeneous design:
/// `y_it = alpha_i + sum_{l=2..k} x_lit beta_li + v_it`,
/// `alpha_i ~ N(1,1)`, `beta_li ~ N(1, 0.04)`.
///
/// Per unit: alpha, then for each slope its coefficient and regressor path,
/// then the disturbances.
pub fn gen_dgp1<R: Rng + ?Sized>(cfg: &DgpConfig, rng: &mut R) -> Result<GeneratedPanel> {
    static_design(cfg, rng, |_, rng| normal(1.0, 1.0, rng), |_, rng| normal(1.0, 0.2, rng))
}

/// Fixed-effects design with homogeneous slopes:
/// `y_it = 1 + sum_{l=2..k} l x_lit + mu_i + v_it`, `mu_i ~ N(1,1)`.
pub fn gen_dgp3<R: Rng + ?Sized>(cfg: &DgpConfig, rng: &mut R) -> Result<GeneratedPanel> {
    static_design(cfg, rng, |_, rng| 1.0 + normal(1.0, 1.0, rng), |l, _| l as f64)
}

fn static_design<R: Rng + ?Sized>(
    cfg: &DgpConfig,
    rng: &mut R,
    mut level: impl FnMut(usize, &mut R) -> f64,
    mut slope: impl FnMut(usize, &mut R) -> f64,
) -> Result<GeneratedPanel> {
    cfg.validate()?;
    let (n, t, k, horizon) = (cfg.n, cfg.t, cfg.k, cfg.horizon());
    let keep = horizon - t;
    let dist = Disturbances::draw(cfg, rng);
    let mut y = Vec::with_capacity(n * t);
    let mut x = Vec::with_capacity(n * t * k);
    for i in 0..n {
        let a = level(i, rng);
        let mut yi = vec![a; t];
        x.extend(std::iter::repeat(1.0).take(t));
        // regressor l = 2..k (1-based, as in the model)
        for l in 2..=k {
            let b = slope(l, rng);
            let path = ar_regressor(horizon, rng);
            let kept = &path[keep..];
            yi.iter_mut().zip(kept).for_each(|(yv, xv)| *yv += b * xv);
            x.extend_from_slice(kept);
        }
        let v = dist.unit(i, keep, horizon, rng);
        yi.iter_mut().zip(&v).for_each(|(yv, vv)| *yv += vv);
        y.extend(yi);
    }
    finish(cfg, y, x, dist, 0)
}

/// Weakly exogenous design: `y_it = alpha_i + x1_it b1_i + x2_it b2_i + v_it`
/// with `x1` an AR(1) and `x2_it = y_{i,t-1} + u2_it`.
///
/// Substituting `x2` makes `b2` the autoregressive root of `y`, so
/// `b2 ~ N(1, 0.04)` is redrawn until `|b2| <= 0.98`, as in DGP4;
/// otherwise about half the units explode.
///
/// Per unit: alpha, b1, b2 (with redraws), tau^2 for x1 and x2, disturbances, then the
/// innovations of x1 and x2 period by period.
pub fn gen_dgp2<R: Rng + ?Sized>(cfg: &DgpConfig, rng: &mut R) -> Result<GeneratedPanel> {
    cfg.validate()?;
    let (n, t, horizon) = (cfg.n, cfg.t, cfg.horizon());
    let keep = horizon - t;
    let dist = Disturbances::draw(cfg, rng);
    let mut y = Vec::with_capacity(n * t);
    let mut x = Vec::with_capacity(n * t * 3);
    let mut redraws = 0;
    for i in 0..n {
        let alpha = normal(1.0, 1.0, rng);
        let b1 = normal(1.0, 0.2, rng);
        // b2 is the AR root of y; keep it stationary as in DGP4
        let b2 = stationary_ar(rng, &mut redraws);
        let sd1 = (chi2_scaled(6.0, rng) / (1.0 - X_AR * X_AR)).sqrt();
        let sd2 = (chi2_scaled(6.0, rng) / (1.0 - X_AR * X_AR)).sqrt();
        let v = dist.unit(i, 0, horizon, rng);
        let mut u1 = Vec::with_capacity(horizon);
        let mut u2 = Vec::with_capacity(horizon);
        for _ in 0..horizon {
            u1.push(sd1 * rng.sample::<f64, _>(StandardNormal));
            u2.push(sd2 * rng.sample::<f64, _>(StandardNormal));
        }
        let path = dgp2_path(alpha, b1, b2, &u1, &u2, &v);
        y.extend_from_slice(&path.y[keep..]);
        x.extend(std::iter::repeat(1.0).take(t));
        x.extend_from_slice(&path.x1[keep..]);
        x.extend_from_slice(&path.x2[keep..]);
    }
    finish(cfg, y, x, dist, redraws)
}

/// Series produced by the DGP2 recursion.
#[derive(Debug, Clone, PartialEq)]
pub struct Dgp2Path {
    pub y: Vec<f64>,
    pub x1: Vec<f64>,
    pub x2: Vec<f64>,
}

/// Runs the DGP2 recursion from zero initial values over the length of the
/// innovation slices.
pub fn dgp2_path(alpha: f64, b1: f64, b2: f64, u1: &[f64], u2: &[f64], v: &[f64]) -> Dgp2Path {
    let h = v.len();
    let mut out = Dgp2Path { y: Vec::with_capacity(h), x1: Vec::with_capacity(h), x2: Vec::with_capacity(h) };
    let (mut y_prev, mut x1_prev) = (0.0, 0.0);
    for s in 0..h {
        let x1 = X_AR * x1_prev + u1[s];
        let x2 = y_prev + u2[s];
        let y = alpha + b1 * x1 + b2 * x2 + v[s];
        out.x1.push(x1);
        out.x2.push(x2);
        out.y.push(y);
        y_prev = y;
        x1_prev = x1;
    }
    out
}

/// Dynamic design: `y_it = xi_i (1 - b_i) + b_i y_{i,t-1} + v_it` with
/// `xi_i = v_i0 + eta_i`, `eta_i ~ N(1, 2)`.
///
/// `b_i ~ N(1, 0.04)` is redrawn until `|b_i| <= 0.98`; the number of
/// rejected draws is returned in [`GeneratedPanel::ar_redraws`]. Per unit:
/// b (with redraws), eta, then the disturbances over the full horizon.
pub fn gen_dgp4<R: Rng + ?Sized>(cfg: &DgpConfig, rng: &mut R) -> Result<GeneratedPanel> {
    cfg.validate()?;
    let (n, t, horizon) = (cfg.n, cfg.t, cfg.horizon());
    let keep = horizon - t;
    let dist = Disturbances::draw(cfg, rng);
    let mut y = Vec::with_capacity(n * t);
    let mut redraws = 0;
    for i in 0..n {
        let b = stationary_ar(rng, &mut redraws);
        let eta = normal(1.0, 2f64.sqrt(), rng);
        let v = dist.unit(i, 0, horizon, rng);
        // t = 0 sits just before the first emitted period
        let xi = v[keep - 1] + eta;
        let path = dgp4_path(b, xi, &v);
        y.extend_from_slice(&path[keep..]);
    }
    finish(cfg, y, vec![1.0; n * t], dist, redraws)
}

/// Draws N(1, 0.04) until the value lies in [-0.98, 0.98], counting
/// rejected draws.
fn stationary_ar<R: Rng + ?Sized>(rng: &mut R, redraws: &mut usize) -> f64 {
    loop {
        let b = normal(1.0, 0.2, rng);
        if b.abs() <= MAX_ABS_AR {
            return b;
        }
        *redraws += 1;
    }
}

/// Runs the DGP4 recursion from `y = 0` over the length of `v`.
pub fn dgp4_path(b: f64, xi: f64, v: &[f64]) -> Vec<f64> {
    let mut prev = 0.0;
    v.iter()
        .map(|e| {
            prev = xi * (1.0 - b) + b * prev + e;
            prev
        })
        .collect()
}

/// Generates the panel described by `cfg` from the injected stream.
pub fn generate_with<R: Rng + ?Sized>(cfg: &DgpConfig, rng: &mut R) -> Result<GeneratedPanel> {
    match cfg.dgp {
        DgpKind::Dgp1 => gen_dgp1(cfg, rng),
        DgpKind::Dgp2 => gen_dgp2(cfg, rng),
        DgpKind::Dgp3 => gen_dgp3(cfg, rng),
        DgpKind::Dgp4 => gen_dgp4(cfg, rng),
    }
}

/// Generates the panel described by `cfg` from its own seed.
pub fn generate(cfg: &DgpConfig) -> Result<GeneratedPanel> {
    generate_with(cfg, &mut derive_stream(cfg.seed, 0, 0))
}
