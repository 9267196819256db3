//! Balanced panel data and the three residual estimators.
//!
//! * heterogeneous: per-unit OLS of `y_i` on the unit's own design;
//! * fixed effects: pooled within (unit-demeaned) regression with one
//!   common slope vector;
//! * dynamic: per-unit OLS on `(y_{i,t-1}, x_it)`, consuming the first
//!   period as the presample lag.
//!
//! Per-unit regressions use a column-equilibrated Householder QR; the thin
//! Q factor of every unit can be retained for the exact-moment statistic
//! in [`crate::cdtest`].

use std::fmt;

use crate::error::{Error, Result};
use crate::linalg::HouseholderQr;

/// Largest autoregressive coefficient magnitude fitted without a warning.
pub const NEAR_UNIT_ROOT: f64 = 0.999;

/// A balanced panel: `n` units observed over the same `t` periods.
///
/// Regressors are stored unit-major, then by regressor, then by period:
/// `x[(i * k + l) * t + s]`. When `has_intercept` is set, regressor 0 is the
/// constant column.
#[derive(Debug, Clone, PartialEq)]
pub struct PanelDataset {
    n: usize,
    t: usize,
    k: usize,
    y: Vec<f64>,
    x: Vec<f64>,
    unit_ids: Vec<String>,
    time_ids: Vec<String>,
    has_intercept: bool,
}

impl PanelDataset {
    /// Builds a panel from flat grids; `y` is `n x t` row-major and `x`
    /// follows the layout documented on the type. Labels default to `1..=n`
    /// and `1..=t`.
    pub fn new(n: usize, t: usize, k: usize, y: Vec<f64>, x: Vec<f64>, has_intercept: bool) -> Result<Self> {
        if y.len() != n * t {
            return Err(Error::InvalidInput(format!("response grid has {} cells, expected {}", y.len(), n * t)));
        }
        if x.len() != n * t * k {
            return Err(Error::InvalidInput(format!("regressor grid has {} cells, expected {}", x.len(), n * t * k)));
        }
        if has_intercept && k == 0 {
            return Err(Error::InvalidInput("intercept flag set but no regressor columns".into()));
        }
        Ok(PanelDataset {
            n,
            t,
            k,
            y,
            x,
            unit_ids: (1..=n).map(|i| i.to_string()).collect(),
            time_ids: (1..=t).map(|s| s.to_string()).collect(),
            has_intercept,
        })
    }

    /// Builds a panel from per-cell closures. `x(i, l, s)` is not called for
    /// the intercept column when `has_intercept` is set; that column is 1.
    pub fn from_fn(
        n: usize,
        t: usize,
        k: usize,
        has_intercept: bool,
        mut y: impl FnMut(usize, usize) -> f64,
        mut x: impl FnMut(usize, usize, usize) -> f64,
    ) -> Result<Self> {
        let yv = (0..n).flat_map(|i| (0..t).map(move |s| (i, s))).map(|(i, s)| y(i, s)).collect();
        let mut xv = Vec::with_capacity(n * t * k);
        for i in 0..n {
            for l in 0..k {
                for s in 0..t {
                    xv.push(if has_intercept && l == 0 { 1.0 } else { x(i, l, s) });
                }
            }
        }
        Self::new(n, t, k, yv, xv, has_intercept)
    }

    pub fn with_labels(mut self, unit_ids: Vec<String>, time_ids: Vec<String>) -> Result<Self> {
        if unit_ids.len() != self.n || time_ids.len() != self.t {
            return Err(Error::InvalidInput("label lists do not match panel dimensions".into()));
        }
        self.unit_ids = unit_ids;
        self.time_ids = time_ids;
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn has_intercept(&self) -> bool {
        self.has_intercept
    }

    pub fn unit_ids(&self) -> &[String] {
        &self.unit_ids
    }

    pub fn time_ids(&self) -> &[String] {
        &self.time_ids
    }

    pub fn y(&self, i: usize, s: usize) -> f64 {
        self.y[i * self.t + s]
    }

    pub fn x(&self, i: usize, s: usize, l: usize) -> f64 {
        self.x[(i * self.k + l) * self.t + s]
    }

    /// Response series of unit `i`.
    pub fn y_row(&self, i: usize) -> &[f64] {
        &self.y[i * self.t..(i + 1) * self.t]
    }

    /// Column-major `t x k` design of unit `i`.
    pub fn design(&self, i: usize) -> &[f64] {
        &self.x[i * self.k * self.t..(i + 1) * self.k * self.t]
    }

    /// Reorders units: row `r` of the result is unit `order[r]` of `self`.
    pub fn permute_units(&self, order: &[usize]) -> Result<Self> {
        let mut seen = vec![false; self.n];
        if order.len() != self.n || order.iter().any(|&i| i >= self.n || std::mem::replace(&mut seen[i], true)) {
            return Err(Error::InvalidInput("not a permutation of the units".into()));
        }
        let mut out = self.clone();
        for (r, &i) in order.iter().enumerate() {
            out.y[r * self.t..(r + 1) * self.t].copy_from_slice(self.y_row(i));
            out.x[r * self.k * self.t..(r + 1) * self.k * self.t].copy_from_slice(self.design(i));
            out.unit_ids[r] = self.unit_ids[i].clone();
        }
        Ok(out)
    }
}

/// Which residual estimator to apply.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelSpec {
    Heterogeneous,
    FixedEffects,
    /// Adds a constant column to the augmented design unless the panel
    /// already carries one.
    Dynamic { include_intercept: bool },
}

impl ModelSpec {
    pub fn name(&self) -> &'static str {
        match self {
            ModelSpec::Heterogeneous => "hetero",
            ModelSpec::FixedEffects => "fixed",
            ModelSpec::Dynamic { .. } => "dynamic",
        }
    }

    /// Effective sample length and regressor count produced for `data`.
    pub fn effective_dims(&self, data: &PanelDataset) -> (usize, usize) {
        match *self {
            ModelSpec::Heterogeneous => (data.t, data.k),
            ModelSpec::FixedEffects => (data.t, data.k - usize::from(data.has_intercept)),
            ModelSpec::Dynamic { include_intercept } => {
                let added = usize::from(include_intercept && !data.has_intercept);
                (data.t.saturating_sub(1), data.k + 1 + added)
            }
        }
    }
}

impl fmt::Display for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    TooFewUnits { n: usize },
    TooFewPeriods { t: usize, required: usize },
    InterceptNotConstant,
    NonFinite,
    ConstantResponse { unit: usize },
    RankDeficientUnit { unit: usize },
    RankDeficientPooled,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::TooFewUnits { n } => write!(f, "n = {n} < 3"),
            Violation::TooFewPeriods { t, required } => write!(f, "T < k+2 (T = {t}, need at least {required})"),
            Violation::InterceptNotConstant => f.write_str("intercept column is not identically 1"),
            Violation::NonFinite => f.write_str("non-finite value in response or regressors"),
            Violation::ConstantResponse { unit } => write!(f, "constant response for unit {unit}"),
            Violation::RankDeficientUnit { unit } => write!(f, "rank-deficient design for unit {unit}"),
            Violation::RankDeficientPooled => f.write_str("rank-deficient pooled within design"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks `data` against the requirements of `spec` without fitting it.
pub fn validate_dataset(data: &PanelDataset, spec: ModelSpec) -> ValidationReport {
    let mut violations = Vec::new();
    if data.n < 3 {
        violations.push(Violation::TooFewUnits { n: data.n });
    }
    let (t_eff, k_eff) = spec.effective_dims(data);
    if t_eff < k_eff + 2 {
        violations.push(Violation::TooFewPeriods { t: data.t, required: k_eff + 2 + (data.t - t_eff) });
    }
    if data.y.iter().chain(&data.x).any(|v| !v.is_finite()) {
        violations.push(Violation::NonFinite);
        return ValidationReport { violations };
    }
    if data.has_intercept && (0..data.n).any(|i| data.design(i)[..data.t].iter().any(|&v| v != 1.0)) {
        violations.push(Violation::InterceptNotConstant);
    }
    for i in 0..data.n {
        let row = data.y_row(i);
        if row.iter().all(|&v| v == row[0]) {
            violations.push(Violation::ConstantResponse { unit: i });
        }
    }
    if !violations.iter().any(|v| matches!(v, Violation::TooFewPeriods { .. })) {
        match spec {
            ModelSpec::Heterogeneous | ModelSpec::Dynamic { .. } => {
                for i in 0..data.n {
                    let (design, rows, cols) = unit_design(data, spec, i);
                    if HouseholderQr::factor(&design, rows, cols).is_none() {
                        violations.push(Violation::RankDeficientUnit { unit: i });
                    }
                }
            }
            ModelSpec::FixedEffects => {
                let (design, _) = within_stack(data);
                let (rows, cols) = (data.n * data.t, spec.effective_dims(data).1);
                if cols > 0 && HouseholderQr::factor(&design, rows, cols).is_none() {
                    violations.push(Violation::RankDeficientPooled);
                }
            }
        }
    }
    ValidationReport { violations }
}

/// Column-major orthonormal basis of one unit's design column space.
#[derive(Debug, Clone, PartialEq)]
pub struct Basis {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Basis {
    /// Wraps a column-major `rows x cols` matrix. Orthonormality is checked
    /// where the basis is consumed.
    pub fn from_col_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::InvalidInput("basis storage does not match its shape".into()));
        }
        Ok(Basis { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn column(&self, c: usize) -> &[f64] {
        &self.data[c * self.rows..(c + 1) * self.rows]
    }
}

/// Fitted coefficients, kept for diagnostics only.
#[derive(Debug, Clone, PartialEq)]
pub enum Coefficients {
    /// One vector per unit, in augmented-design column order.
    PerUnit(Vec<Vec<f64>>),
    /// Common within slopes (intercept column excluded).
    Pooled(Vec<f64>),
    None,
}

#[derive(Debug, Clone, PartialEq)]
pub enum FitWarning {
    NearUnitRoot { unit: usize, coefficient: f64 },
}

/// Fitted residuals, `n x t_eff` row-major, plus provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualMatrix {
    n: usize,
    t_eff: usize,
    k_eff: usize,
    resid: Vec<f64>,
    estimator: Option<ModelSpec>,
    bases: Option<Vec<Basis>>,
    coefficients: Coefficients,
    warnings: Vec<FitWarning>,
}

impl ResidualMatrix {
    /// Wraps residuals produced elsewhere (for example true disturbances in
    /// a simulation). No estimator provenance and no bases are attached.
    pub fn from_residuals(n: usize, t_eff: usize, k_eff: usize, resid: Vec<f64>) -> Result<Self> {
        if resid.len() != n * t_eff {
            return Err(Error::InvalidInput(format!("residual grid has {} cells, expected {}", resid.len(), n * t_eff)));
        }
        Ok(ResidualMatrix {
            n,
            t_eff,
            k_eff,
            resid,
            estimator: None,
            bases: None,
            coefficients: Coefficients::None,
            warnings: Vec::new(),
        })
    }

    /// Attaches per-unit bases, e.g. for externally fitted residuals.
    pub fn with_bases(mut self, bases: Vec<Basis>) -> Result<Self> {
        if bases.len() != self.n || bases.iter().any(|b| b.rows != self.t_eff || b.cols != self.k_eff) {
            return Err(Error::InvalidInput("bases do not match residual dimensions".into()));
        }
        self.bases = Some(bases);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn t_eff(&self) -> usize {
        self.t_eff
    }

    pub fn k_eff(&self) -> usize {
        self.k_eff
    }

    pub fn estimator(&self) -> Option<ModelSpec> {
        self.estimator
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.resid[i * self.t_eff..(i + 1) * self.t_eff]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.resid
    }

    pub fn bases(&self) -> Option<&[Basis]> {
        self.bases.as_deref()
    }

    pub fn coefficients(&self) -> &Coefficients {
        &self.coefficients
    }

    pub fn warnings(&self) -> &[FitWarning] {
        &self.warnings
    }
}

/// Fits `data` with the estimator named by `spec`.
pub fn fit(data: &PanelDataset, spec: ModelSpec, retain_bases: bool) -> Result<ResidualMatrix> {
    match spec {
        ModelSpec::Heterogeneous => fit_heterogeneous(data, retain_bases),
        ModelSpec::FixedEffects => fit_fixed_effects(data),
        ModelSpec::Dynamic { include_intercept } => fit_dynamic(data, include_intercept, retain_bases),
    }
}

pub fn fit_heterogeneous(data: &PanelDataset, retain_bases: bool) -> Result<ResidualMatrix> {
    fit_per_unit(data, ModelSpec::Heterogeneous, retain_bases)
}

/// Per-unit regression of `y_it` on `(y_{i,t-1}, x_it)`; the first period
/// only supplies the lag, so `t_eff = t - 1`.
pub fn fit_dynamic(data: &PanelDataset, include_intercept: bool, retain_bases: bool) -> Result<ResidualMatrix> {
    fit_per_unit(data, ModelSpec::Dynamic { include_intercept }, retain_bases)
}

fn check_dims(data: &PanelDataset, spec: ModelSpec) -> Result<(usize, usize)> {
    let (t_eff, k_eff) = spec.effective_dims(data);
    if data.t == 0 || t_eff < k_eff + 2 {
        return Err(Error::InvalidInput(format!(
            "{spec} model needs at least {} usable periods, panel provides {t_eff}",
            k_eff + 2
        )));
    }
    Ok((t_eff, k_eff))
}

/// Column index of the lagged response in the dynamic design.
fn lag_column(data: &PanelDataset, include_intercept: bool) -> usize {
    usize::from(include_intercept && !data.has_intercept)
}

/// Returns the column-major design of unit `i` under `spec` with its shape.
fn unit_design(data: &PanelDataset, spec: ModelSpec, i: usize) -> (Vec<f64>, usize, usize) {
    match spec {
        ModelSpec::Dynamic { include_intercept } => {
            let (t, k) = (data.t, data.k);
            let rows = t - 1;
            let lag = lag_column(data, include_intercept);
            let mut z = Vec::with_capacity(rows * (k + 1 + lag));
            if lag == 1 {
                z.extend(std::iter::repeat(1.0).take(rows));
            }
            z.extend_from_slice(&data.y_row(i)[..rows]);
            let design = data.design(i);
            for l in 0..k {
                z.extend_from_slice(&design[l * t + 1..(l + 1) * t]);
            }
            let cols = z.len() / rows;
            (z, rows, cols)
        }
        _ => (data.design(i).to_vec(), data.t, data.k),
    }
}

fn fit_per_unit(data: &PanelDataset, spec: ModelSpec, retain_bases: bool) -> Result<ResidualMatrix> {
    let (t_eff, k_eff) = check_dims(data, spec)?;
    let offset = data.t - t_eff;
    let mut resid = Vec::with_capacity(data.n * t_eff);
    let mut coefs = Vec::with_capacity(data.n);
    let mut bases = retain_bases.then(|| Vec::with_capacity(data.n));
    let mut warnings = Vec::new();
    for i in 0..data.n {
        let (design, rows, cols) = unit_design(data, spec, i);
        debug_assert_eq!((rows, cols), (t_eff, k_eff));
        let qr = HouseholderQr::factor(&design, rows, cols).ok_or(Error::RankDeficient { unit: Some(i) })?;
        let (r, b) = qr.solve(&data.y_row(i)[offset..]);
        if let ModelSpec::Dynamic { include_intercept } = spec {
            let alpha = b[lag_column(data, include_intercept)];
            if alpha.abs() > NEAR_UNIT_ROOT {
                warnings.push(FitWarning::NearUnitRoot { unit: i, coefficient: alpha });
            }
        }
        if let Some(bases) = bases.as_mut() {
            bases.push(Basis { rows: qr.rows(), cols: qr.cols(), data: qr.thin_q() });
        }
        resid.extend_from_slice(&r);
        coefs.push(b);
    }
    Ok(ResidualMatrix {
        n: data.n,
        t_eff,
        k_eff,
        resid,
        estimator: Some(spec),
        bases,
        coefficients: Coefficients::PerUnit(coefs),
        warnings,
    })
}

/// Unit-demeaned regressors stacked column-major (`n*t x k'`, intercept
/// dropped) and the demeaned response.
fn within_stack(data: &PanelDataset) -> (Vec<f64>, Vec<f64>) {
    let (n, t) = (data.n, data.t);
    let first = usize::from(data.has_intercept);
    let cols = data.k - first;
    let mut design = vec![0.0; n * t * cols];
    let mut y = vec![0.0; n * t];
    for i in 0..n {
        demean_into(data.y_row(i), &mut y[i * t..(i + 1) * t]);
        let unit = data.design(i);
        for (c, l) in (first..data.k).enumerate() {
            let dst = &mut design[c * n * t + i * t..c * n * t + (i + 1) * t];
            demean_into(&unit[l * t..(l + 1) * t], dst);
        }
    }
    (design, y)
}

fn demean_into(src: &[f64], dst: &mut [f64]) {
    let mean = src.iter().sum::<f64>() / src.len() as f64;
    dst.iter_mut().zip(src).for_each(|(d, s)| *d = s - mean);
}

/// Within estimator: pooled OLS of demeaned `y` on demeaned regressors.
/// The intercept column, annihilated by demeaning, is dropped.
pub fn fit_fixed_effects(data: &PanelDataset) -> Result<ResidualMatrix> {
    let spec = ModelSpec::FixedEffects;
    let (t_eff, k_eff) = check_dims(data, spec)?;
    let (design, ytilde) = within_stack(data);
    let (resid, beta) = if k_eff == 0 {
        (ytilde, Vec::new())
    } else {
        let qr = HouseholderQr::factor(&design, data.n * data.t, k_eff).ok_or(Error::RankDeficient { unit: None })?;
        qr.solve(&ytilde)
    };
    Ok(ResidualMatrix {
        n: data.n,
        t_eff,
        k_eff,
        resid,
        estimator: Some(spec),
        bases: None,
        coefficients: Coefficients::Pooled(beta),
        warnings: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn random_panel(n: usize, t: usize, k: usize, seed: u64) -> PanelDataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let y: Vec<f64> = (0..n * t).map(|_| rng.sample(StandardNormal)).collect();
        let x: Vec<f64> = (0..n * t * k).map(|_| rng.sample(StandardNormal)).collect();
        PanelDataset::from_fn(n, t, k, true, |i, s| y[i * t + s], |i, l, s| x[(i * k + l) * t + s]).unwrap()
    }

    /// Solves `(X'X) b = X'y` by Gaussian elimination.
    fn normal_equations(x: &[f64], y: &[f64], rows: usize, cols: usize) -> Vec<f64> {
        let mut a = vec![vec![0.0; cols + 1]; cols];
        for r in 0..cols {
            for c in 0..cols {
                a[r][c] = (0..rows).map(|s| x[r * rows + s] * x[c * rows + s]).sum();
            }
            a[r][cols] = (0..rows).map(|s| x[r * rows + s] * y[s]).sum();
        }
        for p in 0..cols {
            let piv = (p..cols).max_by(|&i, &j| a[i][p].abs().partial_cmp(&a[j][p].abs()).unwrap()).unwrap();
            a.swap(p, piv);
            for r in 0..cols {
                if r != p {
                    let f = a[r][p] / a[p][p];
                    for c in p..=cols {
                        a[r][c] -= f * a[p][c];
                    }
                }
            }
        }
        (0..cols).map(|r| a[r][cols] / a[r][r]).collect()
    }

    #[test]
    fn validates_well_formed_panel() {
        let p = random_panel(25, 50, 2, 1);
        assert!(validate_dataset(&p, ModelSpec::Heterogeneous).is_ok());
    }

    #[test]
    fn too_short_panel_is_reported() {
        let p = random_panel(4, 3, 2, 2);
        let report = validate_dataset(&p, ModelSpec::Heterogeneous);
        assert!(matches!(report.violations[0], Violation::TooFewPeriods { t: 3, required: 4 }));
        assert!(report.violations[0].to_string().starts_with("T < k+2"));
    }

    #[test]
    fn zero_regressor_column_is_rank_deficient() {
        let p = random_panel(4, 10, 2, 3);
        let p = PanelDataset::from_fn(4, 10, 2, true, |i, s| p.y(i, s), |i, l, s| if i == 2 { 0.0 } else { p.x(i, s, l) })
            .unwrap();
        let report = validate_dataset(&p, ModelSpec::Heterogeneous);
        assert_eq!(report.violations, vec![Violation::RankDeficientUnit { unit: 2 }]);
        assert_eq!(report.violations[0].to_string(), "rank-deficient design for unit 2");
        assert!(matches!(fit_heterogeneous(&p, false), Err(Error::RankDeficient { unit: Some(2) })));
    }

    #[test]
    fn exact_fit_gives_zero_residuals() {
        let p = random_panel(3, 12, 2, 4);
        let p = PanelDataset::from_fn(3, 12, 2, true, |i, s| if i == 1 { 2.0 - 0.5 * p.x(i, s, 1) } else { p.y(i, s) }, |i, l, s| p.x(i, s, l))
            .unwrap();
        let r = fit_heterogeneous(&p, false).unwrap();
        assert!(r.row(1).iter().all(|v| v.abs() < 1e-10));
    }

    #[test]
    fn intercept_only_residuals_are_demeaned_response() {
        let p = random_panel(3, 9, 1, 5);
        let r = fit_heterogeneous(&p, false).unwrap();
        for i in 0..3 {
            let mean = p.y_row(i).iter().sum::<f64>() / 9.0;
            for s in 0..9 {
                assert!((r.row(i)[s] - (p.y(i, s) - mean)).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn heterogeneous_matches_normal_equations() {
        let p = random_panel(5, 20, 2, 6);
        let r = fit_heterogeneous(&p, true).unwrap();
        for i in 0..5 {
            let b = normal_equations(p.design(i), p.y_row(i), 20, 2);
            for s in 0..20 {
                let fit = b[0] * p.x(i, s, 0) + b[1] * p.x(i, s, 1);
                assert!((r.row(i)[s] - (p.y(i, s) - fit)).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn heterogeneous_residuals_are_orthogonal_to_each_column() {
        let p = random_panel(6, 30, 4, 7);
        let r = fit_heterogeneous(&p, true).unwrap();
        for i in 0..6 {
            let v = r.row(i);
            let vnorm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
            for l in 0..4 {
                let col = &p.design(i)[l * 30..(l + 1) * 30];
                let cnorm = col.iter().map(|a| a * a).sum::<f64>().sqrt();
                let ip: f64 = col.iter().zip(v).map(|(a, b)| a * b).sum();
                assert!(ip.abs() <= 1e-8 * cnorm * vnorm);
            }
        }
        assert_eq!(r.bases().unwrap().len(), 6);
    }

    #[test]
    fn fixed_effects_removes_unit_levels() {
        let mu = [0.3, -1.0, 2.5, 4.0];
        let p = PanelDataset::from_fn(4, 8, 1, true, |i, _| mu[i], |_, _, _| 1.0).unwrap();
        let r = fit_fixed_effects(&p).unwrap();
        assert!(r.as_slice().iter().all(|v| v.abs() < 1e-14));
        assert_eq!(r.k_eff(), 0);
    }

    #[test]
    fn fixed_effects_recovers_exact_slope() {
        let p = random_panel(5, 10, 2, 8);
        let p = PanelDataset::from_fn(5, 10, 2, true, |i, s| i as f64 + 2.0 * p.x(i, s, 1), |i, l, s| p.x(i, s, l)).unwrap();
        let r = fit_fixed_effects(&p).unwrap();
        match r.coefficients() {
            Coefficients::Pooled(b) => assert!((b[0] - 2.0).abs() < 1e-10),
            other => panic!("unexpected {other:?}"),
        }
        assert!(r.as_slice().iter().all(|v| v.abs() < 1e-10));
    }

    #[test]
    fn fixed_effects_matches_dense_stacked_solve() {
        let (n, t) = (4, 15);
        let p = random_panel(n, t, 2, 9);
        let r = fit_fixed_effects(&p).unwrap();
        // Oracle: explicitly demeaned stacks, normal equations on one column.
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for i in 0..n {
            let xm = (0..t).map(|s| p.x(i, s, 1)).sum::<f64>() / t as f64;
            let ym = (0..t).map(|s| p.y(i, s)).sum::<f64>() / t as f64;
            for s in 0..t {
                xs.push(p.x(i, s, 1) - xm);
                ys.push(p.y(i, s) - ym);
            }
        }
        let b = normal_equations(&xs, &ys, n * t, 1)[0];
        for (idx, v) in r.as_slice().iter().enumerate() {
            assert!((v - (ys[idx] - b * xs[idx])).abs() < 1e-10);
        }
        for i in 0..n {
            assert!(r.row(i).iter().sum::<f64>().abs() < 1e-12);
        }
    }

    #[test]
    fn fixed_effects_singular_pooled_design() {
        let p = PanelDataset::from_fn(3, 6, 2, true, |i, s| (i * s) as f64, |i, _, _| i as f64).unwrap();
        assert!(matches!(fit_fixed_effects(&p), Err(Error::RankDeficient { unit: None })));
        assert!(validate_dataset(&p, ModelSpec::FixedEffects).violations.contains(&Violation::RankDeficientPooled));
    }

    #[test]
    fn dynamic_recovers_pure_ar1() {
        let t = 30;
        let p = PanelDataset::from_fn(3, t, 1, true, |i, s| (1.0 + i as f64) * 0.5f64.powi(s as i32), |_, _, _| 1.0).unwrap();
        let r = fit_dynamic(&p, false, false).unwrap();
        assert_eq!((r.t_eff(), r.k_eff()), (t - 1, 2));
        let Coefficients::PerUnit(b) = r.coefficients() else { panic!() };
        for coef in b {
            assert!((coef[0] - 0.5).abs() < 1e-10, "{coef:?}");
        }
    }

    #[test]
    fn dynamic_with_zero_lag_effect() {
        let p = random_panel(3, 20, 2, 10);
        let p = PanelDataset::from_fn(3, 20, 2, true, |i, s| 1.0 + 3.0 * p.x(i, s, 1), |i, l, s| p.x(i, s, l)).unwrap();
        let r = fit_dynamic(&p, true, false).unwrap();
        let Coefficients::PerUnit(b) = r.coefficients() else { panic!() };
        for coef in b {
            assert!(coef[0].abs() < 1e-8);
        }
        assert!(r.as_slice().iter().all(|v| v.abs() < 1e-8));
    }

    #[test]
    fn dynamic_equals_heterogeneous_on_prebuilt_lag() {
        let (n, t) = (4, 25);
        let p = random_panel(n, t, 2, 11);
        let dynamic = fit_dynamic(&p, true, false).unwrap();
        let prebuilt = PanelDataset::from_fn(
            n,
            t - 1,
            3,
            true,
            |i, s| p.y(i, s + 1),
            |i, l, s| if l == 1 { p.y(i, s) } else { p.x(i, s + 1, 1) },
        )
        .unwrap();
        let hetero = fit_heterogeneous(&prebuilt, false).unwrap();
        for (a, b) in dynamic.as_slice().iter().zip(hetero.as_slice()) {
            assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn dynamic_adds_intercept_when_missing() {
        let p = random_panel(3, 12, 2, 12);
        let no_const = PanelDataset::from_fn(3, 12, 1, false, |i, s| p.y(i, s), |i, _, s| p.x(i, s, 1)).unwrap();
        let r = fit_dynamic(&no_const, true, true).unwrap();
        assert_eq!(r.k_eff(), 3);
        for i in 0..3 {
            assert!(r.row(i).iter().sum::<f64>().abs() < 1e-12);
        }
        assert_eq!(fit_dynamic(&p, true, false).unwrap().k_eff(), 3);
    }

    #[test]
    fn dynamic_flags_near_unit_root() {
        let p = PanelDataset::from_fn(3, 15, 1, true, |i, s| (i + 1) as f64 * (s as f64 + 1.0), |_, _, _| 1.0).unwrap();
        let r = fit_dynamic(&p, true, false).unwrap();
        assert_eq!(r.warnings().len(), 3);
    }

    #[test]
    fn location_scale_and_permutation() {
        let (n, t) = (5, 18);
        let p = random_panel(n, t, 3, 13);
        let base = fit_heterogeneous(&p, false).unwrap();

        let shifted = PanelDataset::from_fn(n, t, 3, true, |i, s| p.y(i, s) + 10.0 * i as f64 - 3.0, |i, l, s| p.x(i, s, l)).unwrap();
        let r = fit_heterogeneous(&shifted, false).unwrap();
        for (a, b) in base.as_slice().iter().zip(r.as_slice()) {
            assert!((a - b).abs() <= 1e-9);
        }

        let scaled = PanelDataset::from_fn(n, t, 3, true, |i, s| p.y(i, s) * 4.0, |i, l, s| p.x(i, s, l)).unwrap();
        let r = fit_heterogeneous(&scaled, false).unwrap();
        for (a, b) in base.as_slice().iter().zip(r.as_slice()) {
            assert!((4.0 * a - b).abs() <= 1e-12 * b.abs().max(1e-300) + 1e-15);
        }

        let order = [3, 0, 4, 1, 2];
        let r = fit_heterogeneous(&p.permute_units(&order).unwrap(), false).unwrap();
        for (row, &i) in order.iter().enumerate() {
            assert_eq!(r.row(row), base.row(i));
        }
    }
}
