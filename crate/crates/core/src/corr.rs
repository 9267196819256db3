//! Residual correlation matrix, its trace functionals, and the exact
//! projection-pair moments used by the bias-adjusted LM statistic.
//!
//! All reductions run in a fixed order (ascending index, row by row), so
//! results are bitwise reproducible no matter how callers schedule work.

use std::cell::Cell;

use crate::error::{Error, Result};
use crate::linalg::dot;
use crate::panel::{Basis, ResidualMatrix};

/// Residual sums of squares below this are treated as an exact fit.
pub const DEGENERATE_RSS: f64 = 1e-24;

/// Symmetric `n x n` matrix of raw (non-demeaned) residual correlations.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix {
    n: usize,
    rho: Vec<f64>,
}

impl CorrelationMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.rho[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.rho[i * self.n..(i + 1) * self.n]
    }

    /// Builds a correlation matrix from a full row-major grid. The upper
    /// triangle is mirrored and the diagonal forced to 1.
    pub fn from_full(n: usize, rho: Vec<f64>) -> Result<Self> {
        if rho.len() != n * n {
            return Err(Error::InvalidInput("correlation grid is not n x n".into()));
        }
        let mut m = CorrelationMatrix { n, rho };
        for i in 0..n {
            m.rho[i * n + i] = 1.0;
            for j in (i + 1)..n {
                let v = m.rho[i * n + j];
                if !(v.abs() <= 1.0 + 1e-12) {
                    return Err(Error::InvalidInput(format!("|rho[{i}][{j}]| = {v} exceeds 1")));
                }
                m.rho[j * n + i] = v;
            }
        }
        Ok(m)
    }
}

/// Pairwise correlations of the residual rows:
/// `rho_ij = sum_t v_it v_jt / (|v_i| |v_j|)`.
pub fn correlation_matrix(resid: &ResidualMatrix) -> Result<CorrelationMatrix> {
    correlation_from_rows(resid.as_slice(), resid.n(), resid.t_eff())
}

/// Same as [`correlation_matrix`] on a bare row-major `n x t` grid.
pub fn correlation_from_rows(v: &[f64], n: usize, t: usize) -> Result<CorrelationMatrix> {
    if v.len() != n * t {
        return Err(Error::InvalidInput("residual grid is not n x t".into()));
    }
    let mut inv_norm = Vec::with_capacity(n);
    for i in 0..n {
        let row = &v[i * t..(i + 1) * t];
        let ss = dot(row, row);
        if !(ss >= DEGENERATE_RSS) {
            return Err(Error::DegenerateUnit(i));
        }
        inv_norm.push(1.0 / ss.sqrt());
    }
    let mut rho = vec![0.0; n * n];
    for i in 0..n {
        rho[i * n + i] = 1.0;
        let vi = &v[i * t..(i + 1) * t];
        for j in (i + 1)..n {
            let r = dot(vi, &v[j * t..(j + 1) * t]) * inv_norm[i] * inv_norm[j];
            rho[i * n + j] = r;
            rho[j * n + i] = r;
        }
    }
    Ok(CorrelationMatrix { n, rho })
}

/// Scalar functionals of a correlation matrix consumed by the statistics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceStats {
    /// tr(R^2) = sum_ij rho_ij^2
    pub tr_r2: f64,
    /// tr(R^4) = |R^2|_F^2
    pub tr_r4: f64,
    /// sum over i != j of rho_ij (both orders)
    pub offdiag_sum: f64,
    pub max_abs_offdiag: f64,
    pub n: usize,
    pub t_eff: usize,
}

thread_local! {
    static TRACE_EVALUATIONS: Cell<u64> = const { Cell::new(0) };
}

/// Number of [`trace_stats`] evaluations performed on the current thread.
pub fn trace_stats_evaluations() -> u64 {
    TRACE_EVALUATIONS.with(Cell::get)
}

/// Trace functionals of `r`, recording `t_eff` as the sample length the
/// correlations were computed from.
///
/// `tr(R^4)` is the squared Frobenius norm of `R^2`. Because `R` is
/// symmetric, `(R^2)_ij` is the dot product of rows `i` and `j`, so only the
/// upper triangle of the product is formed.
pub fn trace_stats(r: &CorrelationMatrix, t_eff: usize) -> TraceStats {
    TRACE_EVALUATIONS.with(|c| c.set(c.get() + 1));
    let n = r.n;
    let mut off_sq = 0.0;
    let mut offdiag_sum = 0.0;
    let mut max_abs: f64 = 0.0;
    let mut diag4 = 0.0;
    let mut off4 = 0.0;
    for i in 0..n {
        let ri = r.row(i);
        let mut row_sq = 0.0;
        let mut row_sum = 0.0;
        for &v in &ri[i + 1..] {
            row_sq += v * v;
            row_sum += v;
            max_abs = max_abs.max(v.abs());
        }
        off_sq += row_sq;
        offdiag_sum += row_sum;
        let d = dot(ri, ri);
        diag4 += d * d;
        let mut row4 = 0.0;
        for j in (i + 1)..n {
            let p = dot(ri, r.row(j));
            row4 += p * p;
        }
        off4 += row4;
    }
    TraceStats {
        tr_r2: n as f64 + 2.0 * off_sq,
        tr_r4: diag4 + 2.0 * off4,
        offdiag_sum: 2.0 * offdiag_sum,
        max_abs_offdiag: max_abs,
        n,
        t_eff,
    }
}

/// Exact null moments of `(T-k) rho_ij^2` for a pair of unit designs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectionPairMoments {
    pub mu_t_ij: f64,
    pub sigma_t_ij: f64,
    /// tr(M_i M_j)
    pub tr_mm: f64,
    /// tr[(M_i M_j)^2]
    pub tr_mm_sq: f64,
}

/// Orthonormality tolerance accepted for supplied bases.
pub const BASIS_TOL: f64 = 1e-8;

/// Checks that a basis has orthonormal columns.
pub fn check_basis(q: &Basis) -> Result<()> {
    let mut worst: f64 = 0.0;
    for a in 0..q.cols() {
        for b in a..q.cols() {
            let target = if a == b { 1.0 } else { 0.0 };
            worst = worst.max((dot(q.column(a), q.column(b)) - target).abs());
        }
    }
    if worst > BASIS_TOL {
        return Err(Error::InvalidBasis(worst));
    }
    Ok(())
}

/// Moments of the squared correlation between residuals of two regressions
/// with annihilators `M_i = I - Q_i Q_i'` and `M_j = I - Q_j Q_j'`.
///
/// With `C = Q_i' Q_j` (k x k), `tr(M_i M_j) = T - 2k + |C|_F^2` and
/// `tr[(M_i M_j)^2] = T - 2k + tr[(C'C)^2]`; then
/// `mu = tr(M_i M_j)/(T-k)`, `sigma^2 = tr(M_i M_j)^2 a1 + tr[(M_i M_j)^2] a2`
/// with `a2 = 3/(T-k+2)^2` and `a1 = a2 - 1/(T-k)^2`.
pub fn projection_pair_moments(qi: &Basis, qj: &Basis, t: usize, k: usize) -> Result<ProjectionPairMoments> {
    if qi.rows() != t || qj.rows() != t || qi.cols() != k || qj.cols() != k {
        return Err(Error::InvalidInput("basis shape does not match (T, k)".into()));
    }
    if t < k + 3 {
        return Err(Error::InvalidInput(format!("pair moments need T > k + 2 (T = {t}, k = {k})")));
    }
    check_basis(qi)?;
    check_basis(qj)?;
    Ok(pair_moments_unchecked(qi, qj, t, k, &mut vec![0.0; k * k]))
}

/// Pair moments without shape or orthonormality checks; `c` is `k*k`
/// scratch space.
pub(crate) fn pair_moments_unchecked(qi: &Basis, qj: &Basis, t: usize, k: usize, c: &mut [f64]) -> ProjectionPairMoments {
    // c[a*k + b] = <q_i,a , q_j,b>
    for a in 0..k {
        for b in 0..k {
            c[a * k + b] = dot(qi.column(a), qj.column(b));
        }
    }
    let frob: f64 = c.iter().map(|v| v * v).sum();
    // tr[(C'C)^2] = |C'C|_F^2
    let mut ctc_sq = 0.0;
    for a in 0..k {
        for b in 0..k {
            let mut g = 0.0;
            for r in 0..k {
                g += c[r * k + a] * c[r * k + b];
            }
            ctc_sq += g * g;
        }
    }
    let base = t as f64 - 2.0 * k as f64;
    let tr_mm = base + frob;
    let tr_mm_sq = base + ctc_sq;
    let dof = (t - k) as f64;
    let a2 = 3.0 / ((dof + 2.0) * (dof + 2.0));
    let a1 = a2 - 1.0 / (dof * dof);
    let var = tr_mm * tr_mm * a1 + tr_mm_sq * a2;
    ProjectionPairMoments { mu_t_ij: tr_mm / dof, sigma_t_ij: var.sqrt(), tr_mm, tr_mm_sq }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn random_grid(n: usize, t: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n * t).map(|_| rng.sample(StandardNormal)).collect()
    }

    /// Gram-Schmidt orthonormal basis of random columns.
    fn random_basis(t: usize, k: usize, rng: &mut ChaCha8Rng) -> Basis {
        let mut cols: Vec<Vec<f64>> = Vec::new();
        for _ in 0..k {
            let mut v: Vec<f64> = (0..t).map(|_| rng.sample(StandardNormal)).collect();
            for _ in 0..2 {
                for c in &cols {
                    let p: f64 = c.iter().zip(&v).map(|(a, b)| a * b).sum();
                    v.iter_mut().zip(c).for_each(|(x, y)| *x -= p * y);
                }
            }
            let nrm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            v.iter_mut().for_each(|x| *x /= nrm);
            cols.push(v);
        }
        Basis::from_col_major(t, k, cols.concat()).unwrap()
    }

    /// Dense T x T annihilator.
    fn annihilator(q: &Basis) -> Vec<Vec<f64>> {
        let t = q.rows();
        (0..t)
            .map(|r| {
                (0..t)
                    .map(|c| {
                        let p: f64 = (0..q.cols()).map(|l| q.column(l)[r] * q.column(l)[c]).sum();
                        f64::from(u8::from(r == c)) - p
                    })
                    .collect()
            })
            .collect()
    }

    fn matmul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let n = a.len();
        (0..n).map(|i| (0..n).map(|j| (0..n).map(|l| a[i][l] * b[l][j]).sum()).collect()).collect()
    }

    fn trace(a: &[Vec<f64>]) -> f64 {
        (0..a.len()).map(|i| a[i][i]).sum()
    }

    #[test]
    fn identical_rows_correlate_perfectly() {
        let mut v = random_grid(3, 10, 1);
        let row0 = v[..10].to_vec();
        v[20..30].copy_from_slice(&row0);
        let r = correlation_from_rows(&v, 3, 10).unwrap();
        assert!((r.get(0, 2) - 1.0).abs() < 1e-15);
        assert_eq!(r.get(2, 0), r.get(0, 2));
    }

    #[test]
    fn orthogonal_rows_give_zero_offdiagonals() {
        let v = vec![1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0, -1.0, 1.0, -1.0, 0.0, 0.0];
        let r = correlation_from_rows(&v, 3, 4).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                if i != j {
                    assert!(r.get(i, j).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn matches_scalar_double_loop() {
        let (n, t) = (4, 10);
        let v = random_grid(n, t, 2);
        let r = correlation_from_rows(&v, n, t).unwrap();
        for i in 0..n {
            for j in 0..n {
                let (mut num, mut si, mut sj) = (0.0, 0.0, 0.0);
                for s in 0..t {
                    num += v[i * t + s] * v[j * t + s];
                    si += v[i * t + s] * v[i * t + s];
                    sj += v[j * t + s] * v[j * t + s];
                }
                assert!((r.get(i, j) - num / (si.sqrt() * sj.sqrt())).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn zero_row_is_degenerate() {
        let mut v = random_grid(3, 5, 3);
        v[5..10].iter_mut().for_each(|x| *x = 0.0);
        assert!(matches!(correlation_from_rows(&v, 3, 5), Err(Error::DegenerateUnit(1))));
    }

    #[test]
    fn identity_traces() {
        let mut id = vec![0.0; 49];
        (0..7).for_each(|i| id[i * 7 + i] = 1.0);
        let s = trace_stats(&CorrelationMatrix::from_full(7, id).unwrap(), 10);
        assert_eq!((s.tr_r2, s.tr_r4, s.offdiag_sum, s.max_abs_offdiag), (7.0, 7.0, 0.0, 0.0));
    }

    #[test]
    fn two_by_two_traces_match_eigenvalue_expansion() {
        for rho in [-0.9, -0.3, 0.0, 0.25, 0.7] {
            let r = CorrelationMatrix::from_full(2, vec![1.0, rho, rho, 1.0]).unwrap();
            let s = trace_stats(&r, 5);
            let (l1, l2): (f64, f64) = (1.0 + rho, 1.0 - rho);
            assert!((s.tr_r2 - (l1 * l1 + l2 * l2)).abs() < 1e-14);
            assert!((s.tr_r4 - (l1.powi(4) + l2.powi(4))).abs() < 1e-13);
            assert!((s.tr_r4 - (2.0 + 12.0 * rho * rho + 2.0 * rho.powi(4))).abs() < 1e-13);
            assert!((s.offdiag_sum - 2.0 * rho).abs() < 1e-15);
        }
    }

    #[test]
    fn fourth_trace_matches_naive_product() {
        let (n, t) = (6, 15);
        let r = correlation_from_rows(&random_grid(n, t, 4), n, t).unwrap();
        let m: Vec<Vec<f64>> = (0..n).map(|i| r.row(i).to_vec()).collect();
        let m2 = matmul(&m, &m);
        let m4 = matmul(&matmul(&m2, &m), &m);
        let s = trace_stats(&r, t);
        assert!((s.tr_r4 - trace(&m4)).abs() <= 1e-10 * trace(&m4));
        assert!((s.tr_r2 - trace(&m2)).abs() <= 1e-10 * trace(&m2));
    }

    #[test]
    fn evaluation_counter_increments() {
        let r = correlation_from_rows(&random_grid(3, 6, 5), 3, 6).unwrap();
        let before = trace_stats_evaluations();
        trace_stats(&r, 6);
        assert_eq!(trace_stats_evaluations(), before + 1);
    }

    #[test]
    fn pair_moments_identical_designs() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let q = random_basis(20, 2, &mut rng);
        let m = projection_pair_moments(&q, &q, 20, 2).unwrap();
        assert!((m.tr_mm - 18.0).abs() < 1e-12);
        assert!((m.tr_mm_sq - 18.0).abs() < 1e-12);
        assert!((m.mu_t_ij - 1.0).abs() < 1e-13);
    }

    #[test]
    fn pair_moments_disjoint_designs() {
        let t = 10;
        let mut cols = vec![0.0; t * 4];
        for c in 0..4 {
            cols[c * t + c] = 1.0;
        }
        let qi = Basis::from_col_major(t, 2, cols[..2 * t].to_vec()).unwrap();
        let qj = Basis::from_col_major(t, 2, cols[2 * t..].to_vec()).unwrap();
        let m = projection_pair_moments(&qi, &qj, t, 2).unwrap();
        assert_eq!((m.tr_mm, m.tr_mm_sq), (6.0, 6.0));
    }

    #[test]
    fn pair_moments_match_dense_projections() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let (t, k) = (12, 3);
        for _ in 0..5 {
            let qi = random_basis(t, k, &mut rng);
            let qj = random_basis(t, k, &mut rng);
            let mm = matmul(&annihilator(&qi), &annihilator(&qj));
            let m = projection_pair_moments(&qi, &qj, t, k).unwrap();
            assert!((m.tr_mm - trace(&mm)).abs() < 1e-10);
            assert!((m.tr_mm_sq - trace(&matmul(&mm, &mm))).abs() < 1e-10);
            let sym = projection_pair_moments(&qj, &qi, t, k).unwrap();
            assert!((m.sigma_t_ij - sym.sigma_t_ij).abs() < 1e-13);
        }
    }

    #[test]
    fn pair_variance_is_close_to_exact_beta_variance() {
        // Identical designs: (T-k) rho^2 ~ (T-k) Beta(1/2, (T-k-1)/2), whose
        // variance is 2(m-1)/(m+2). The squared-trace reading of the second
        // term would put it near 5 instead.
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let (t, k) = (60, 2);
        let q = random_basis(t, k, &mut rng);
        let m = projection_pair_moments(&q, &q, t, k).unwrap();
        let dof = (t - k) as f64;
        let exact = 2.0 * (dof - 1.0) / (dof + 2.0);
        assert!((m.sigma_t_ij.powi(2) - exact).abs() < 3.0 / dof);
        let a2 = 3.0 / (dof + 2.0).powi(2);
        let squared_reading = m.tr_mm.powi(2) * (2.0 * a2 - 1.0 / (dof * dof));
        assert!(squared_reading > 4.5);
    }

    #[test]
    fn non_orthonormal_basis_rejected() {
        let q = Basis::from_col_major(5, 1, vec![1.0, 1.0, 0.0, 0.0, 0.0]).unwrap();
        assert!(matches!(projection_pair_moments(&q, &q, 5, 1), Err(Error::InvalidBasis(_))));
    }
}
