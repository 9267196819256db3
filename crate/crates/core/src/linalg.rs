//! Small dense kernels: Householder QR for tall per-unit designs and a
//! one-sided Jacobi SVD for the resulting triangular factor.
//!
//! Matrices are column-major slices (`a[col * rows + row]`).

/// Singular-value ratio below which a design is declared rank deficient.
pub(crate) const RANK_TOL: f64 = 1e-10;

/// Thin Householder QR of a column-equilibrated `rows x cols` design.
#[derive(Debug, Clone)]
pub(crate) struct HouseholderQr {
    rows: usize,
    cols: usize,
    /// Householder vectors below the diagonal, strict upper triangle of R above.
    packed: Vec<f64>,
    tau: Vec<f64>,
    rdiag: Vec<f64>,
    /// Column norms used for equilibration.
    scale: Vec<f64>,
}

impl HouseholderQr {
    /// Factorizes `a` (column-major, `rows x cols`). Returns `None` when the
    /// equilibrated design is numerically rank deficient.
    pub(crate) fn factor(a: &[f64], rows: usize, cols: usize) -> Option<Self> {
        debug_assert_eq!(a.len(), rows * cols);
        if cols > rows {
            return None;
        }
        let mut packed = a.to_vec();
        let mut scale = Vec::with_capacity(cols);
        for c in 0..cols {
            let col = &mut packed[c * rows..(c + 1) * rows];
            let norm = norm2(col);
            if !(norm > 0.0) || !norm.is_finite() {
                return None;
            }
            col.iter_mut().for_each(|v| *v /= norm);
            scale.push(norm);
        }

        let mut tau = vec![0.0; cols];
        let mut rdiag = vec![0.0; cols];
        for j in 0..cols {
            let (head, tail) = packed.split_at_mut((j + 1) * rows);
            let col = &mut head[j * rows..];
            let x = &mut col[j..];
            let alpha = x[0];
            let norm = norm2(x);
            if norm == 0.0 {
                return None;
            }
            let beta = if alpha >= 0.0 { -norm } else { norm };
            let denom = alpha - beta;
            tau[j] = (beta - alpha) / beta;
            x[0] = 1.0;
            x[1..].iter_mut().for_each(|v| *v /= denom);
            rdiag[j] = beta;
            for c in (j + 1)..cols {
                let other = &mut tail[(c - j - 1) * rows + j..(c - j) * rows];
                let s = dot(x, other) * tau[j];
                other.iter_mut().zip(x.iter()).for_each(|(o, v)| *o -= s * v);
            }
        }

        let qr = HouseholderQr { rows, cols, packed, tau, rdiag, scale };
        let sv = singular_values_upper(&qr.r_matrix(), cols);
        let max = sv.iter().cloned().fold(0.0, f64::max);
        let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
        if cols > 0 && !(min >= RANK_TOL * max) {
            return None;
        }
        Some(qr)
    }

    pub(crate) fn rows(&self) -> usize {
        self.rows
    }

    pub(crate) fn cols(&self) -> usize {
        self.cols
    }

    /// R factor of the equilibrated design (column-major `cols x cols`).
    fn r_matrix(&self) -> Vec<f64> {
        let k = self.cols;
        let mut r = vec![0.0; k * k];
        for c in 0..k {
            for row in 0..c {
                r[c * k + row] = self.packed[c * self.rows + row];
            }
            r[c * k + c] = self.rdiag[c];
        }
        r
    }

    fn householder(&self, j: usize) -> &[f64] {
        &self.packed[j * self.rows + j..(j + 1) * self.rows]
    }

    /// y <- Q' y
    pub(crate) fn apply_qt(&self, y: &mut [f64]) {
        for j in 0..self.cols {
            let v = self.householder(j);
            let seg = &mut y[j..];
            let s = dot_unit_head(v, seg) * self.tau[j];
            sub_scaled_unit_head(seg, v, s);
        }
    }

    /// y <- Q y
    pub(crate) fn apply_q(&self, y: &mut [f64]) {
        for j in (0..self.cols).rev() {
            let v = self.householder(j);
            let seg = &mut y[j..];
            let s = dot_unit_head(v, seg) * self.tau[j];
            sub_scaled_unit_head(seg, v, s);
        }
    }

    /// Least-squares residual and coefficients of `y` on the design.
    pub(crate) fn solve(&self, y: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let k = self.cols;
        let mut z = y.to_vec();
        self.apply_qt(&mut z);
        let mut coef = z[..k].to_vec();
        for c in (0..k).rev() {
            let mut acc = coef[c];
            for j in (c + 1)..k {
                acc -= self.packed[j * self.rows + c] * coef[j];
            }
            coef[c] = acc / self.rdiag[c];
        }
        for (b, s) in coef.iter_mut().zip(&self.scale) {
            *b /= s;
        }
        z[..k].iter_mut().for_each(|v| *v = 0.0);
        self.apply_q(&mut z);
        (z, coef)
    }

    /// Explicit thin Q (column-major `rows x cols`).
    pub(crate) fn thin_q(&self) -> Vec<f64> {
        let mut q = vec![0.0; self.rows * self.cols];
        for c in 0..self.cols {
            let col = &mut q[c * self.rows..(c + 1) * self.rows];
            col[c] = 1.0;
            self.apply_q(col);
        }
        q
    }
}

// Householder vectors are stored with an implicit leading 1.
#[inline]
fn dot_unit_head(v: &[f64], y: &[f64]) -> f64 {
    y[0] + dot(&v[1..], &y[1..])
}

#[inline]
fn sub_scaled_unit_head(y: &mut [f64], v: &[f64], s: f64) {
    y[0] -= s;
    y[1..].iter_mut().zip(&v[1..]).for_each(|(a, b)| *a -= s * b);
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    // Four fixed accumulators: vectorizes and keeps a fixed summation order.
    let chunks = a.len() / 4;
    let mut acc = [0.0f64; 4];
    for c in 0..chunks {
        let i = 4 * c;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut tail = 0.0;
    for i in 4 * chunks..a.len() {
        tail += a[i] * b[i];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

#[inline]
pub(crate) fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Singular values of a square column-major matrix by one-sided Jacobi.
pub(crate) fn singular_values_upper(a: &[f64], n: usize) -> Vec<f64> {
    let mut w = a.to_vec();
    for _sweep in 0..60 {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let (alpha, beta, gamma) = {
                    let cp = &w[p * n..(p + 1) * n];
                    let cq = &w[q * n..(q + 1) * n];
                    (dot(cp, cp), dot(cq, cq), dot(cp, cq))
                };
                if gamma == 0.0 || gamma.abs() <= 1e-15 * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for r in 0..n {
                    let xp = w[p * n + r];
                    let xq = w[q * n + r];
                    w[p * n + r] = c * xp - s * xq;
                    w[q * n + r] = s * xp + c * xq;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    (0..n).map(|c| norm2(&w[c * n..(c + 1) * n])).collect()
}
