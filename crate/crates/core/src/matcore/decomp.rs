//! Factorizations: LU, Cholesky, pivoted QR, Hessenberg/Schur and the
//! spectral helpers built on them.

use super::{CMatrix, C64};
use crate::error::{Error, Result};

const EPS: f64 = f64::EPSILON;

fn zero() -> C64 {
    C64::new(0.0, 0.0)
}

// ── LU ──────────────────────────────────────────────────────────────

/// LU factorization with partial pivoting, `P M = L U`.
#[derive(Debug, Clone)]
pub struct Lu {
    lu: CMatrix,
    perm: Vec<usize>,
    norm_1: f64,
}

impl Lu {
    pub fn new(m: &CMatrix) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::DimensionMismatch(format!(
                "LU needs a square matrix, got {}x{}",
                m.rows(),
                m.cols()
            )));
        }
        let n = m.rows();
        let mut lu = m.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let (p, pmax) = (k..n)
                .map(|i| (i, lu[(i, k)].norm()))
                .fold((k, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
            if pmax == 0.0 {
                return Err(Error::Singular { rcond: 0.0 });
            }
            if p != k {
                perm.swap(p, k);
                for j in 0..n {
                    let t = lu[(k, j)];
                    lu[(k, j)] = lu[(p, j)];
                    lu[(p, j)] = t;
                }
            }
            let pivot = lu[(k, k)];
            for i in k + 1..n {
                let f = lu[(i, k)] / pivot;
                lu[(i, k)] = f;
                if f != zero() {
                    for j in k + 1..n {
                        let u = lu[(k, j)];
                        lu[(i, j)] -= f * u;
                    }
                }
            }
        }
        Ok(Self {
            lu,
            perm,
            norm_1: m.norm_1(),
        })
    }

    pub fn order(&self) -> usize {
        self.lu.rows()
    }

    /// Solves `M X = rhs`.
    pub fn solve(&self, rhs: &CMatrix) -> CMatrix {
        let n = self.order();
        assert_eq!(rhs.rows(), n, "LU solve: rhs has wrong row count");
        let mut x = CMatrix::from_fn(n, rhs.cols(), |i, j| rhs[(self.perm[i], j)]);
        for c in 0..rhs.cols() {
            for i in 0..n {
                let mut s = x[(i, c)];
                for k in 0..i {
                    s -= self.lu[(i, k)] * x[(k, c)];
                }
                x[(i, c)] = s;
            }
            for i in (0..n).rev() {
                let mut s = x[(i, c)];
                for k in i + 1..n {
                    s -= self.lu[(i, k)] * x[(k, c)];
                }
                x[(i, c)] = s / self.lu[(i, i)];
            }
        }
        x
    }

    pub fn inverse(&self) -> CMatrix {
        self.solve(&CMatrix::identity(self.order()))
    }

    /// Reciprocal 1-norm condition number, computed from the explicit inverse.
    pub fn rcond(&self) -> f64 {
        if self.order() == 0 {
            return 1.0;
        }
        let inv_norm = self.inverse().norm_1();
        if !inv_norm.is_finite() || self.norm_1 == 0.0 {
            return 0.0;
        }
        1.0 / (self.norm_1 * inv_norm)
    }
}

/// Solves `M X = rhs` by partial-pivoted elimination.
///
/// Fails with [`Error::Singular`] carrying the reciprocal condition estimate
/// when `M` is singular to working precision.
pub fn solve_linear(m: &CMatrix, rhs: &CMatrix) -> Result<CMatrix> {
    if rhs.rows() != m.rows() {
        return Err(Error::DimensionMismatch(format!(
            "rhs has {} rows, matrix has {}",
            rhs.rows(),
            m.rows()
        )));
    }
    let lu = Lu::new(m)?;
    let rcond = lu.rcond();
    if rcond < EPS * (m.rows().max(1) as f64) {
        return Err(Error::Singular { rcond });
    }
    Ok(lu.solve(rhs))
}

// ── Cholesky / positivity ───────────────────────────────────────────

/// Lower-triangular `L` with `H = L L*`, reading only the lower triangle of
/// `H`. Returns `None` when a pivot is not strictly positive.
pub fn cholesky(h: &CMatrix) -> Option<CMatrix> {
    cholesky_detail(h).ok()
}

fn cholesky_detail(h: &CMatrix) -> std::result::Result<CMatrix, (usize, f64)> {
    let n = h.rows();
    let mut l = CMatrix::zeros(n, n);
    for j in 0..n {
        let mut d = h[(j, j)].re;
        for k in 0..j {
            d -= l[(j, k)].norm_sqr();
        }
        if d <= 0.0 || !d.is_finite() {
            return Err((j, d));
        }
        let djj = d.sqrt();
        l[(j, j)] = C64::new(djj, 0.0);
        for i in j + 1..n {
            let mut s = h[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)].conj();
            }
            l[(i, j)] = s / djj;
        }
    }
    Ok(l)
}

#[derive(Debug, Clone, PartialEq)]
pub enum PdFailure {
    NotSquare,
    NotHermitian { defect: f64 },
    NonPositivePivot { index: usize, value: f64 },
}

/// Outcome of [`is_positive_definite`].
#[derive(Debug, Clone)]
pub struct PdCheck {
    pub positive: bool,
    /// Cholesky factor of the Hermitian part when `positive`.
    pub factor: Option<CMatrix>,
    pub failure: Option<PdFailure>,
}

/// Hermitian within `1e-10·‖H‖` and every Cholesky pivot of the Hermitian
/// part strictly positive.
pub fn is_positive_definite(h: &CMatrix) -> PdCheck {
    if !h.is_square() {
        return PdCheck {
            positive: false,
            factor: None,
            failure: Some(PdFailure::NotSquare),
        };
    }
    let scale = operator_norm(h);
    let defect = h.hermitian_defect();
    if defect > 1e-10 * scale {
        return PdCheck {
            positive: false,
            factor: None,
            failure: Some(PdFailure::NotHermitian { defect }),
        };
    }
    match cholesky_detail(&h.hermitian_part()) {
        Ok(l) => PdCheck {
            positive: true,
            factor: Some(l),
            failure: None,
        },
        Err((index, value)) => PdCheck {
            positive: false,
            factor: None,
            failure: Some(PdFailure::NonPositivePivot { index, value }),
        },
    }
}

/// Solves `L X = B` for lower-triangular `L`.
pub fn forward_substitute(l: &CMatrix, b: &CMatrix) -> CMatrix {
    let n = l.rows();
    let mut x = b.clone();
    for c in 0..b.cols() {
        for i in 0..n {
            let mut s = x[(i, c)];
            for k in 0..i {
                s -= l[(i, k)] * x[(k, c)];
            }
            x[(i, c)] = s / l[(i, i)];
        }
    }
    x
}

// ── Householder helpers ─────────────────────────────────────────────

/// Householder vector `v` (with v[0] = 1 scaling not assumed) and `beta` such
/// that `(I - beta v v*) x = alpha e1`.
fn householder(x: &[C64]) -> Option<(Vec<C64>, f64)> {
    let norm = x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if norm == 0.0 {
        return None;
    }
    let x0 = x[0];
    let phase = if x0.norm() == 0.0 {
        C64::new(1.0, 0.0)
    } else {
        x0 / x0.norm()
    };
    let alpha = -phase * norm;
    let mut v = x.to_vec();
    v[0] -= alpha;
    let vnorm2: f64 = v.iter().map(|z| z.norm_sqr()).sum();
    if vnorm2 == 0.0 {
        return None;
    }
    Some((v, 2.0 / vnorm2))
}

/// Applies `(I - beta v v*)` from the left to rows `r0..r0+len(v)` of `m`,
/// columns `c0..`.
fn reflect_rows(m: &mut CMatrix, v: &[C64], beta: f64, r0: usize, c0: usize) {
    for j in c0..m.cols() {
        let mut s = zero();
        for (k, vk) in v.iter().enumerate() {
            s += vk.conj() * m[(r0 + k, j)];
        }
        s *= beta;
        for (k, vk) in v.iter().enumerate() {
            m[(r0 + k, j)] -= vk * s;
        }
    }
}

/// Applies `(I - beta v v*)` from the right to columns `c0..c0+len(v)`.
fn reflect_cols(m: &mut CMatrix, v: &[C64], beta: f64, c0: usize) {
    for i in 0..m.rows() {
        let mut s = zero();
        for (k, vk) in v.iter().enumerate() {
            s += m[(i, c0 + k)] * vk;
        }
        s *= beta;
        for (k, vk) in v.iter().enumerate() {
            m[(i, c0 + k)] -= s * vk.conj();
        }
    }
}

// ── Pivoted QR ──────────────────────────────────────────────────────

/// Householder QR with column pivoting, `M P = Q R`.
#[derive(Debug, Clone)]
pub struct PivotedQr {
    /// Full unitary factor (rows × rows).
    pub q: CMatrix,
    /// Upper-trapezoidal factor (rows × cols).
    pub r: CMatrix,
    /// `perm[k]` is the original column placed at position k.
    pub perm: Vec<usize>,
}

impl PivotedQr {
    /// Number of diagonal entries of R above `tol`.
    pub fn rank(&self, tol: f64) -> usize {
        let k = self.r.rows().min(self.r.cols());
        (0..k).take_while(|&i| self.r[(i, i)].norm() > tol).count()
    }

    /// Orthonormal basis of the column space at the given rank tolerance.
    pub fn range_basis(&self, tol: f64) -> CMatrix {
        self.q.columns(0..self.rank(tol))
    }
}

pub fn pivoted_qr(m: &CMatrix) -> PivotedQr {
    let (rows, cols) = m.shape();
    let mut r = m.clone();
    let mut q = CMatrix::identity(rows);
    let mut perm: Vec<usize> = (0..cols).collect();
    let steps = rows.min(cols);
    for k in 0..steps {
        // pick the remaining column with the largest trailing norm
        let (p, _) = (k..cols)
            .map(|j| {
                let s: f64 = (k..rows).map(|i| r[(i, j)].norm_sqr()).sum();
                (j, s)
            })
            .fold((k, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if p != k {
            perm.swap(p, k);
            for i in 0..rows {
                let t = r[(i, k)];
                r[(i, k)] = r[(i, p)];
                r[(i, p)] = t;
            }
        }
        let x: Vec<C64> = (k..rows).map(|i| r[(i, k)]).collect();
        if let Some((v, beta)) = householder(&x) {
            reflect_rows(&mut r, &v, beta, k, k);
            reflect_cols(&mut q, &v, beta, k);
        }
        for i in k + 1..rows {
            r[(i, k)] = zero();
        }
    }
    PivotedQr { q, r, perm }
}

// ── Hessenberg and Schur ────────────────────────────────────────────

/// Unitary `Q` and upper Hessenberg `H` with `M = Q H Q*`.
pub fn hessenberg(m: &CMatrix) -> (CMatrix, CMatrix) {
    assert!(m.is_square(), "hessenberg needs a square matrix");
    let n = m.rows();
    let mut h = m.clone();
    let mut q = CMatrix::identity(n);
    for k in 0..n.saturating_sub(2) {
        let x: Vec<C64> = (k + 1..n).map(|i| h[(i, k)]).collect();
        if let Some((v, beta)) = householder(&x) {
            reflect_rows(&mut h, &v, beta, k + 1, 0);
            reflect_cols(&mut h, &v, beta, k + 1);
            reflect_cols(&mut q, &v, beta, k + 1);
        }
        for i in k + 2..n {
            h[(i, k)] = zero();
        }
    }
    (q, h)
}

/// Complex Schur form `M = Q T Q*` with `T` upper triangular.
#[derive(Debug, Clone)]
pub struct Schur {
    pub q: CMatrix,
    pub t: CMatrix,
}

/// Rotation `[[c, s], [-conj(s), c]]` mapping `(a, b)` to `(r, 0)`.
fn givens(a: C64, b: C64) -> (f64, C64) {
    let na = a.norm();
    let nb = b.norm();
    if nb == 0.0 {
        return (1.0, zero());
    }
    if na == 0.0 {
        return (0.0, C64::new(1.0, 0.0));
    }
    let rho = na.hypot(nb);
    (na / rho, (a / na) * b.conj() / rho)
}

/// Left application to rows k, k+1 on columns `c0..`.
fn rot_rows(m: &mut CMatrix, k: usize, c: f64, s: C64, c0: usize) {
    for j in c0..m.cols() {
        let x = m[(k, j)];
        let y = m[(k + 1, j)];
        m[(k, j)] = x * c + s * y;
        m[(k + 1, j)] = -s.conj() * x + y * c;
    }
}

/// Right application of the adjoint rotation to columns k, k+1 on rows
/// `0..r_end`.
fn rot_cols(m: &mut CMatrix, k: usize, c: f64, s: C64, r_end: usize) {
    for i in 0..r_end {
        let x = m[(i, k)];
        let y = m[(i, k + 1)];
        m[(i, k)] = x * c + s.conj() * y;
        m[(i, k + 1)] = -s * x + y * c;
    }
}

impl Schur {
    pub fn eigenvalues(&self) -> Vec<C64> {
        self.t.diagonal()
    }

    /// Swaps the adjacent diagonal entries at positions k and k+1.
    fn swap_adjacent(&mut self, k: usize) {
        let n = self.t.rows();
        let a = self.t[(k, k)];
        let b = self.t[(k + 1, k + 1)];
        let (c, s) = givens(self.t[(k, k + 1)], b - a);
        rot_rows(&mut self.t, k, c, s, k);
        rot_cols(&mut self.t, k, c, s, (k + 2).min(n));
        rot_cols(&mut self.q, k, c, s, n);
        self.t[(k + 1, k)] = zero();
        self.t[(k, k)] = b;
        self.t[(k + 1, k + 1)] = a;
    }

    /// Reorders the form so that eigenvalues satisfying `select` lead the
    /// diagonal. Returns how many were selected.
    pub fn reorder(&mut self, select: impl Fn(C64) -> bool) -> usize {
        let n = self.t.rows();
        let mut placed = 0;
        for k in 0..n {
            if select(self.t[(k, k)]) {
                let mut pos = k;
                while pos > placed {
                    self.swap_adjacent(pos - 1);
                    pos -= 1;
                }
                placed += 1;
            }
        }
        placed
    }
}

/// Complex Schur decomposition by Hessenberg reduction and shifted QR.
pub fn schur(m: &CMatrix) -> Result<Schur> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "schur needs a square matrix, got {}x{}",
            m.rows(),
            m.cols()
        )));
    }
    if !m.is_finite() {
        return Err(Error::NonFinite("schur input".into()));
    }
    let n = m.rows();
    let (mut q, mut t) = hessenberg(m);
    if n < 2 {
        return Ok(Schur { q, t });
    }
    let scale = t.max_abs().max(f64::MIN_POSITIVE);
    // absolute floor so subnormal subdiagonals deflate instead of feeding the shift
    let small = f64::MIN_POSITIVE * (n as f64 / EPS);
    let max_total = 100 * n;
    let mut total = 0usize;
    let mut since_deflation = 0usize;
    let mut hi = n - 1;
    while hi > 0 {
        // locate the active unreduced block [lo, hi]
        let mut lo = hi;
        while lo > 0 {
            let sub = t[(lo, lo - 1)].norm();
            let mut diag = t[(lo - 1, lo - 1)].norm() + t[(lo, lo)].norm();
            if diag == 0.0 {
                diag = scale;
            }
            if sub <= EPS * diag || sub <= small {
                t[(lo, lo - 1)] = zero();
                break;
            }
            lo -= 1;
        }
        if lo == hi {
            hi -= 1;
            since_deflation = 0;
            continue;
        }
        total += 1;
        since_deflation += 1;
        if total > max_total {
            return Err(Error::NoConvergence {
                what: "complex Schur QR iteration",
                iterations: total,
                residual: t[(hi, hi - 1)].norm(),
            });
        }
        let mu = if since_deflation % 11 == 10 {
            // exceptional shift to break cycles
            t[(hi, hi)] + C64::new(0.75 * t[(hi, hi - 1)].norm(), 0.0)
        } else {
            wilkinson_shift(t[(hi - 1, hi - 1)], t[(hi - 1, hi)], t[(hi, hi - 1)], t[(hi, hi)])
        };
        for k in lo..=hi {
            t[(k, k)] -= mu;
        }
        let mut rots = Vec::with_capacity(hi - lo);
        for k in lo..hi {
            let (c, s) = givens(t[(k, k)], t[(k + 1, k)]);
            rot_rows(&mut t, k, c, s, k);
            t[(k + 1, k)] = zero();
            rots.push((k, c, s));
        }
        for &(k, c, s) in &rots {
            rot_cols(&mut t, k, c, s, (k + 2).min(hi + 1));
            rot_cols(&mut q, k, c, s, n);
        }
        for k in lo..=hi {
            t[(k, k)] += mu;
        }
    }
    for i in 1..n {
        for j in 0..i {
            t[(i, j)] = zero();
        }
    }
    Ok(Schur { q, t })
}

fn wilkinson_shift(a: C64, b: C64, c: C64, d: C64) -> C64 {
    let half = (a - d) * 0.5;
    let disc = (half * half + b * c).sqrt();
    let m1 = (a + d) * 0.5 + disc;
    let m2 = (a + d) * 0.5 - disc;
    if (m1 - d).norm() <= (m2 - d).norm() {
        m1
    } else {
        m2
    }
}

// ── spectra ─────────────────────────────────────────────────────────

/// Eigenvalues with multiplicity.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub eigenvalues: Vec<C64>,
}

impl Spectrum {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn min_imag(&self) -> f64 {
        self.eigenvalues.iter().map(|z| z.im).fold(f64::INFINITY, f64::min)
    }

    pub fn max_imag(&self) -> f64 {
        self.eigenvalues.iter().map(|z| z.im).fold(f64::NEG_INFINITY, f64::max)
    }

    /// Distance from `z` to the nearest eigenvalue (infinite when empty).
    pub fn distance_to(&self, z: C64) -> f64 {
        self.eigenvalues
            .iter()
            .map(|w| (w - z).norm())
            .fold(f64::INFINITY, f64::min)
    }

    pub fn sum(&self) -> C64 {
        self.eigenvalues.iter().sum()
    }
}

pub fn spectrum(m: &CMatrix) -> Result<Spectrum> {
    Ok(Spectrum {
        eigenvalues: schur(m)?.eigenvalues(),
    })
}

/// Eigen-decomposition of the Hermitian part of `h`: ascending eigenvalues
/// and a unitary matrix of eigenvectors.
pub fn eigh(h: &CMatrix) -> Result<(Vec<f64>, CMatrix)> {
    let sym = h.hermitian_part();
    let s = schur(&sym)?;
    let n = sym.rows();
    let mut order: Vec<usize> = (0..n).collect();
    let vals: Vec<f64> = s.t.diagonal().iter().map(|z| z.re).collect();
    order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
    let sorted_vals = order.iter().map(|&i| vals[i]).collect();
    let vecs = CMatrix::from_fn(n, n, |i, j| s.q[(i, order[j])]);
    Ok((sorted_vals, vecs))
}

/// Largest singular value.
pub fn operator_norm(m: &CMatrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    let scale = m.max_abs();
    if scale == 0.0 || !scale.is_finite() {
        return scale;
    }
    // normalise first so the Gram matrix cannot overflow
    let ms = m.scale_real(1.0 / scale);
    let gram = if m.cols() <= m.rows() {
        &ms.adjoint() * &ms
    } else {
        &ms * &ms.adjoint()
    };
    if gram.rows() == 1 {
        return gram[(0, 0)].re.max(0.0).sqrt() * scale;
    }
    match eigh(&gram) {
        Ok((vals, _)) => vals.last().copied().unwrap_or(0.0).max(0.0).sqrt() * scale,
        Err(_) => m.frobenius_norm(),
    }
}

/// Singular values in descending order.
pub fn singular_values(m: &CMatrix) -> Result<Vec<f64>> {
    if m.is_empty() {
        return Ok(Vec::new());
    }
    let scale = m.max_abs();
    if scale == 0.0 {
        return Ok(vec![0.0; m.rows().min(m.cols())]);
    }
    let ms = m.scale_real(1.0 / scale);
    let gram = if m.cols() <= m.rows() {
        &ms.adjoint() * &ms
    } else {
        &ms * &ms.adjoint()
    };
    let (vals, _) = eigh(&gram)?;
    Ok(vals.iter().rev().map(|&v| v.max(0.0).sqrt() * scale).collect())
}

/// Spectral condition number `σ_max / σ_min` (infinite when singular).
pub fn condition_number(m: &CMatrix) -> Result<f64> {
    let sv = singular_values(m)?;
    match (sv.first(), sv.last()) {
        (Some(&hi), Some(&lo)) if lo > 0.0 => Ok(hi / lo),
        (Some(_), Some(_)) => Ok(f64::INFINITY),
        _ => Ok(1.0),
    }
}

/// Hermitian square root of a positive semidefinite matrix and its inverse.
pub fn sqrtm_psd(h: &CMatrix) -> Result<(CMatrix, CMatrix)> {
    let (vals, vecs) = eigh(h)?;
    if vals.iter().any(|&v| v <= 0.0) {
        return Err(Error::NotPositive(format!(
            "square root needs a positive definite matrix, smallest eigenvalue {:.3e}",
            vals.first().copied().unwrap_or(0.0)
        )));
    }
    let root: Vec<C64> = vals.iter().map(|&v| C64::new(v.sqrt(), 0.0)).collect();
    let inv: Vec<C64> = vals.iter().map(|&v| C64::new(1.0 / v.sqrt(), 0.0)).collect();
    let r = (&(&vecs * &CMatrix::diag(&root)) * &vecs.adjoint()).hermitian_part();
    let ri = (&(&vecs * &CMatrix::diag(&inv)) * &vecs.adjoint()).hermitian_part();
    Ok((r, ri))
}

#[cfg(test)]
mod tests {
    use super::super::{c64, I};
    use super::*;

    fn close(a: &CMatrix, b: &CMatrix, tol: f64) -> bool {
        (a - b).max_abs() <= tol
    }

    fn sample(n: usize, seed: u64) -> CMatrix {
        // small LCG keeps these tests dependency-free
        let mut s = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        let mut next = || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        };
        CMatrix::from_fn(n, n, |_, _| c64(next(), next()))
    }

    #[test]
    fn lu_solves() {
        let m = sample(5, 3);
        let x = sample(5, 4).columns(0..2);
        let b = &m * &x;
        let y = solve_linear(&m, &b).unwrap();
        assert!(close(&x, &y, 1e-12));
    }

    #[test]
    fn solve_examples() {
        let b = sample(3, 9);
        assert!(close(&solve_linear(&CMatrix::identity(3), &b).unwrap(), &b, 0.0));
        let two = CMatrix::scalar(c64(2.0, 0.0));
        let r = solve_linear(&two, &CMatrix::scalar(c64(4.0, 0.0))).unwrap();
        assert_eq!(r[(0, 0)], c64(2.0, 0.0));
        for x in [0.0f64, 0.3, 1.7] {
            let m = CMatrix::scalar(c64((2.0 * x).cosh(), 0.0));
            let r = solve_linear(&m, &CMatrix::scalar(c64(1.0, 0.0))).unwrap();
            assert!((r[(0, 0)].re - 1.0 / (2.0 * x).cosh()).abs() < 1e-15);
        }
    }

    #[test]
    fn singular_is_reported() {
        let m = CMatrix::from_real_rows(&[[1.0, 2.0], [2.0, 4.0]]);
        let err = solve_linear(&m, &CMatrix::identity(2)).unwrap_err();
        assert!(matches!(err, Error::Singular { .. }));
    }

    #[test]
    fn positive_definite_examples() {
        let c = is_positive_definite(&CMatrix::identity(4));
        assert!(c.positive);
        assert_eq!(c.factor.unwrap(), CMatrix::identity(4));
        let c = is_positive_definite(&CMatrix::from_real_rows(&[[1.0, 2.0], [2.0, 1.0]]));
        assert!(!c.positive);
        assert!(matches!(c.failure, Some(PdFailure::NonPositivePivot { .. })));
        let c = is_positive_definite(&CMatrix::scalar(c64(2.0f64.cosh(), 0.0)));
        assert!(c.positive);
        let c = is_positive_definite(&CMatrix::from_real_rows(&[[1.0, 1.0], [0.0, 1.0]]));
        assert!(matches!(c.failure, Some(PdFailure::NotHermitian { .. })));
    }

    #[test]
    fn cholesky_reconstructs() {
        let a = sample(4, 11);
        let h = &(&a * &a.adjoint()) + &CMatrix::identity(4);
        let l = cholesky(&h).unwrap();
        assert!(close(&(&l * &l.adjoint()), &h, 1e-12));
    }

    #[test]
    fn schur_deflates_subnormal_subdiagonals() {
        let mut m = CMatrix::identity(4).scale_real(1.0 - 4.0 * f64::EPSILON);
        m[(0, 1)] = c64(2e-16, 1e-16);
        m[(1, 0)] = c64(2e-16, -1e-16);
        m[(2, 3)] = c64(1e-155, 3e-156);
        m[(3, 2)] = c64(1e-155, -3e-156);
        m[(1, 3)] = c64(0.0, 1e-300);
        m[(3, 1)] = c64(0.0, -1e-300);
        let (vals, _) = eigh(&m).unwrap();
        assert!(vals.iter().all(|v| (v - 1.0).abs() < 1e-15));
        assert!((operator_norm(&m) - 1.0).abs() < 1e-15);
        let s = schur(&(&m * &m)).unwrap();
        assert!(close(&(&(&s.q * &s.t) * &s.q.adjoint()), &(&m * &m), 1e-14));
    }

    #[test]
    fn schur_reconstructs_and_is_triangular() {
        for seed in 0..10 {
            let n = 1 + (seed as usize % 7);
            let m = sample(n, seed);
            let s = schur(&m).unwrap();
            let back = &(&s.q * &s.t) * &s.q.adjoint();
            assert!(close(&back, &m, 1e-12 * (1.0 + m.max_abs())), "seed {seed}");
            assert!(close(&(&s.q.adjoint() * &s.q), &CMatrix::identity(n), 1e-13));
            for i in 0..n {
                for j in 0..i {
                    assert_eq!(s.t[(i, j)], c64(0.0, 0.0));
                }
            }
        }
    }

    #[test]
    fn spectrum_examples() {
        let d = CMatrix::diag(&[c64(1.0, 0.0), c64(0.0, 2.0)]);
        let mut ev = spectrum(&d).unwrap().eigenvalues;
        ev.sort_by(|a, b| a.re.total_cmp(&b.re));
        assert!((ev[0] - c64(0.0, 2.0)).norm() < 1e-15);
        assert!((ev[1] - c64(1.0, 0.0)).norm() < 1e-15);

        let rot = CMatrix::from_real_rows(&[[0.0, -1.0], [1.0, 0.0]]);
        let mut ev = spectrum(&rot).unwrap().eigenvalues;
        ev.sort_by(|a, b| a.im.total_cmp(&b.im));
        assert!((ev[0] + I).norm() < 1e-14);
        assert!((ev[1] - I).norm() < 1e-14);

        let ev = spectrum(&CMatrix::scalar(I)).unwrap().eigenvalues;
        assert_eq!(ev, vec![I]);
    }

    #[test]
    fn spectrum_trace_and_residual() {
        for seed in 20..30 {
            let m = sample(6, seed);
            let sp = spectrum(&m).unwrap();
            let tr = m.trace();
            assert!((sp.sum() - tr).norm() <= 1e-9 * (1.0 + tr.norm()));
            // eigenvector residual via a null vector of M - λI
            for &lam in &sp.eigenvalues {
                let shifted = m.shift(-lam);
                let qr = pivoted_qr(&shifted.adjoint());
                let v = qr.q.columns(5..6);
                let res = (&shifted * &v).frobenius_norm();
                assert!(res <= 1e-9 * m.norm(), "residual {res}");
            }
        }
    }

    #[test]
    fn reorder_moves_selected_to_front() {
        let m = sample(6, 42);
        let mut s = schur(&m).unwrap();
        let k = s.reorder(|z| z.re < 0.0);
        for i in 0..6 {
            assert_eq!(s.t[(i, i)].re < 0.0, i < k);
        }
        let back = &(&s.q * &s.t) * &s.q.adjoint();
        assert!(close(&back, &m, 1e-12));
        for i in 1..6 {
            for j in 0..i {
                assert_eq!(s.t[(i, j)], c64(0.0, 0.0));
            }
        }
    }

    #[test]
    fn operator_norm_examples() {
        assert!((operator_norm(&CMatrix::identity(3)) - 1.0).abs() < 1e-14);
        let d = CMatrix::diag(&[c64(3.0, 0.0), c64(0.0, -4.0)]);
        assert!((operator_norm(&d) - 4.0).abs() < 1e-14);
        let n = CMatrix::from_real_rows(&[[0.0, 2.0], [0.0, 0.0]]);
        assert!((operator_norm(&n) - 2.0).abs() < 1e-14);
        assert_eq!(operator_norm(&CMatrix::zeros(2, 3)), 0.0);
        let wide = CMatrix::from_real_rows(&[[3.0, 4.0]]);
        assert!((operator_norm(&wide) - 5.0).abs() < 1e-14);
    }

    #[test]
    fn pivoted_qr_rank() {
        let a = sample(4, 5).columns(0..2);
        let dup = a.hstack(&(&a * c64(2.0, 1.0)));
        let qr = pivoted_qr(&dup);
        let tol = 1e-10 * qr.r[(0, 0)].norm();
        assert_eq!(qr.rank(tol), 2);
        let recon = &qr.q * &qr.r;
        for (k, &p) in qr.perm.iter().enumerate() {
            for i in 0..4 {
                assert!((recon[(i, k)] - dup[(i, p)]).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn condition_and_sqrt() {
        let d = CMatrix::diag(&[c64(4.0, 0.0), c64(0.0, -0.5)]);
        assert!((condition_number(&d).unwrap() - 8.0).abs() < 1e-12);
        let h = CMatrix::from_real_rows(&[[4.0, 1.0], [1.0, 3.0]]);
        let (r, ri) = sqrtm_psd(&h).unwrap();
        assert!(close(&(&r * &r), &h, 1e-13));
        assert!(close(&(&r * &ri), &CMatrix::identity(2), 1e-13));
        let l = CMatrix::from_real_rows(&[[2.0, 0.0], [1.0, 3.0]]);
        let b = CMatrix::from_real_rows(&[[2.0], [4.0]]);
        assert!(close(
            &forward_substitute(&l, &b),
            &CMatrix::from_real_rows(&[[1.0], [1.0]]),
            1e-15
        ));
    }

    #[test]
    fn eigh_sorted() {
        let a = sample(5, 77);
        let h = (&a + &a.adjoint()) * 0.5;
        let (vals, vecs) = eigh(&h).unwrap();
        for w in vals.windows(2) {
            assert!(w[0] <= w[1]);
        }
        let d = CMatrix::diag(&vals.iter().map(|&x| c64(x, 0.0)).collect::<Vec<_>>());
        assert!(close(&(&(&vecs * &d) * &vecs.adjoint()), &h, 1e-12));
    }
}
