//! `∫₀ˣ e^{tA} Q e^{tA*} dt` by the block exponential of
//! `[[A, Q], [0, −A*]]`, plus a quadrature cross-check.

use super::{expm, CMatrix};
use crate::error::{Error, Result};

fn check(a: &CMatrix, q: &CMatrix, x: f64) -> Result<()> {
    if !a.is_square() || q.shape() != a.shape() {
        return Err(Error::DimensionMismatch(format!(
            "gramian: A is {}x{}, Q is {}x{}",
            a.rows(),
            a.cols(),
            q.rows(),
            q.cols()
        )));
    }
    if !(x >= 0.0) || !x.is_finite() {
        return Err(Error::InvalidArgument(format!("gramian: x = {x} must be >= 0")));
    }
    Ok(())
}

pub fn gramian_integral(a: &CMatrix, q: &CMatrix, x: f64) -> Result<CMatrix> {
    check(a, q, x)?;
    let n = a.rows();
    if x == 0.0 || n == 0 {
        return Ok(CMatrix::zeros(n, n));
    }
    let block = CMatrix::blocks(a, q, &CMatrix::zeros(n, n), &-&a.adjoint()).scale_real(x);
    let f = expm(&block)?;
    let f11 = f.block(0, 0, n, n);
    let f12 = f.block(0, n, n, n);
    // F12 = ∫ e^{(x-t)A} Q e^{-tA*} dt, so F12·F11* is the Gramian
    let g = &f12 * &f11.adjoint();
    Ok(g.hermitian_part())
}

/// Composite Simpson quadrature with `panels` (rounded up to even) panels.
pub fn gramian_simpson(a: &CMatrix, q: &CMatrix, x: f64, panels: usize) -> Result<CMatrix> {
    check(a, q, x)?;
    let n = a.rows();
    let panels = (panels.max(2) + 1) & !1;
    let h = x / panels as f64;
    let step = expm(&a.scale_real(h))?;
    let mut e = CMatrix::identity(n);
    let mut acc = CMatrix::zeros(n, n);
    for k in 0..=panels {
        let w = if k == 0 || k == panels {
            1.0
        } else if k % 2 == 1 {
            4.0
        } else {
            2.0
        };
        acc += &(&(&e * q) * &e.adjoint()).scale_real(w);
        e = &step * &e;
    }
    Ok(acc.scale_real(h / 3.0).hermitian_part())
}

#[cfg(test)]
mod tests {
    use super::super::{c64, is_positive_definite};
    use super::*;

    #[test]
    fn examples() {
        let g = gramian_integral(&CMatrix::zeros(2, 2), &CMatrix::identity(2), 2.0).unwrap();
        assert!((&g - &CMatrix::identity(2).scale_real(2.0)).max_abs() < 1e-14);
        for x in [0.1, 1.0, 3.0] {
            let g = gramian_integral(&CMatrix::scalar(c64(-1.0, 0.0)), &CMatrix::identity(1), x).unwrap();
            let want = (1.0 - (-2.0 * x).exp()) / 2.0;
            assert!((g[(0, 0)].re - want).abs() < 1e-14);
            let g = gramian_integral(&CMatrix::scalar(c64(2.0, 0.0)), &CMatrix::identity(1), x).unwrap();
            let want = ((4.0 * x).exp() - 1.0) / 4.0;
            assert!((g[(0, 0)].re - want).abs() <= 1e-13 * want);
        }
    }

    #[test]
    fn negative_x_rejected() {
        let r = gramian_integral(&CMatrix::zeros(1, 1), &CMatrix::identity(1), -1.0);
        assert!(matches!(r, Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn agrees_with_simpson() {
        let a = CMatrix::from_rows(&[
            [c64(-0.4, 1.0), c64(0.3, 0.2), c64(0.0, 0.1)],
            [c64(0.1, -0.2), c64(0.5, 0.3), c64(0.2, 0.0)],
            [c64(0.0, 0.4), c64(-0.3, 0.1), c64(-0.2, -0.7)],
        ]);
        let b = CMatrix::from_rows(&[[c64(1.0, 0.5)], [c64(0.0, -1.0)], [c64(0.3, 0.0)]]);
        let q = &b * &b.adjoint();
        for x in [0.5, 2.0, 4.0] {
            let g = gramian_integral(&a, &q, x).unwrap();
            let s = gramian_simpson(&a, &q, x, 2000).unwrap();
            assert!((&g - &s).norm() <= 1e-8 * g.norm(), "x {x}");
        }
    }

    #[test]
    fn monotone_in_x() {
        let a = CMatrix::from_rows(&[[c64(0.2, 1.0), c64(0.3, 0.0)], [c64(-0.5, 0.1), c64(-0.1, 0.4)]]);
        let q = CMatrix::from_real_rows(&[[2.0, 1.0], [1.0, 1.0]]);
        let mut prev = CMatrix::zeros(2, 2);
        for k in 1..20 {
            let g = gramian_integral(&a, &q, 0.25 * k as f64).unwrap();
            let d = &g - &prev;
            let shifted = d.shift(c64(1e-12 * g.norm(), 0.0));
            assert!(is_positive_definite(&shifted).positive, "k {k}");
            prev = g;
        }
    }
}
