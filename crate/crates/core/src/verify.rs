//! Forward solvers and the finite-horizon Weyl defect checks.
//!
//! Continuous: `Y' = (izj + jV(x))Y`, `Y(0) = I`, `V = [[0, v], [v*, 0]]`,
//! integrand `‖Y(x)[I; φ]‖²`. Discrete: `w_{k+1} = (I + (i/z)C_k)w_k`,
//! summand `‖w_k[φ; I]‖²`. A finite run can only certify geometric decay of
//! the tail, so the verdict compares the two halves of the horizon.

use serde::Serialize;

use crate::continuous::ContinuousPotential;
use crate::discrete::DiscretePotential;
use crate::error::{Error, Result};
use crate::matcore::{CMatrix, C64, I};

/// Tail share below which a run passes.
pub const TAIL_RATIO: f64 = 0.05;
/// Default step of the continuous integrator.
pub const DEFAULT_STEP: f64 = 1e-3;
const MAX_STEPS: usize = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Inconclusive,
    Fail,
}

impl Verdict {
    /// Worst of two verdicts.
    pub fn combine(self, other: Verdict) -> Verdict {
        use Verdict::*;
        match (self, other) {
            (Fail, _) | (_, Fail) => Fail,
            (Inconclusive, _) | (_, Inconclusive) => Inconclusive,
            _ => Pass,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct WeylDefectReport {
    pub z: [f64; 2],
    /// Reported half-plane bound; not enforced.
    pub m_bound: f64,
    pub im_z_exceeds_m: bool,
    /// Integration length (continuous) or number of steps (discrete).
    pub horizon: f64,
    /// Checkpoint positions with the running integral/sum and the integrand.
    pub positions: Vec<f64>,
    pub partial: Vec<f64>,
    pub integrand: Vec<f64>,
    pub first_half: f64,
    pub second_half: f64,
    pub ratio: f64,
    pub verdict: Verdict,
    /// Richardson estimate of the relative error in `Y(L)[I; φ]`, from a
    /// rerun at twice the step; 0 for the exact discrete recursion.
    pub step_error: f64,
}

fn verdict(first: f64, second: f64) -> (f64, Verdict) {
    if !first.is_finite() || !second.is_finite() {
        return (f64::INFINITY, Verdict::Fail);
    }
    let ratio = if first > 0.0 {
        second / first
    } else if second > 0.0 {
        f64::INFINITY
    } else {
        0.0
    };
    let v = if ratio <= TAIL_RATIO {
        Verdict::Pass
    } else if ratio > 1.0 {
        Verdict::Fail
    } else {
        Verdict::Inconclusive
    };
    (ratio, v)
}

fn jv(v: &CMatrix, m1: usize, z: C64) -> CMatrix {
    // izj + jV = [[iz, v], [−v*, −iz]]
    let m2 = v.cols();
    let mut g = CMatrix::zeros(m1 + m2, m1 + m2);
    for i in 0..m1 {
        g[(i, i)] = I * z;
    }
    for i in 0..m2 {
        g[(m1 + i, m1 + i)] = -I * z;
    }
    g.set_block(0, m1, v);
    g.set_block(m1, 0, &-&v.adjoint());
    g
}

/// Classical RK4 for `Y' = G(x)Y` with `G` sampled on the half-step grid
/// (`v_half[2k]` at node k, `v_half[2k+1]` at the midpoint).
pub fn integrate_samples(v_half: &[CMatrix], m1: usize, z: C64, h: f64, y0: &CMatrix) -> Result<Vec<CMatrix>> {
    if v_half.is_empty() || v_half.len().is_multiple_of(2) {
        return Err(Error::InvalidArgument("need an odd number of half-step samples".into()));
    }
    let steps = (v_half.len() - 1) / 2;
    let mut ys = Vec::with_capacity(steps + 1);
    ys.push(y0.clone());
    for k in 0..steps {
        let g0 = jv(&v_half[2 * k], m1, z);
        let g1 = jv(&v_half[2 * k + 1], m1, z);
        let g2 = jv(&v_half[2 * k + 2], m1, z);
        let y = &ys[k];
        let k1 = &g0 * y;
        let k2 = &g1 * &(y + &k1.scale_real(h / 2.0));
        let k3 = &g1 * &(y + &k2.scale_real(h / 2.0));
        let k4 = &g2 * &(y + &k3.scale_real(h));
        let inc = &(&(&k1 + &k2.scale_real(2.0)) + &k3.scale_real(2.0)) + &k4;
        let next = y + &inc.scale_real(h / 6.0);
        if !next.is_finite() {
            return Err(Error::Overflow(format!(
                "integration diverged at x = {}",
                (k + 1) as f64 * h
            )));
        }
        ys.push(next);
    }
    Ok(ys)
}

/// Steps and step size covering `[0, l]` with a step no larger than `h`
/// (even step count, for Simpson).
fn mesh(l: f64, h: f64) -> Result<(usize, f64)> {
    if !(h > 0.0) || !(l > 0.0) || !l.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "need L > 0 and h > 0, got L = {l}, h = {h}"
        )));
    }
    let mut n = (l / h).ceil() as usize;
    n += n % 2;
    let n = n.max(2);
    if n > MAX_STEPS {
        return Err(Error::InvalidArgument(format!(
            "{n} steps exceed the limit {MAX_STEPS}"
        )));
    }
    Ok((n, l / n as f64))
}

fn half_samples(p: &ContinuousPotential, n: usize, h: f64) -> Result<Vec<CMatrix>> {
    let xs: Vec<f64> = (0..=2 * n).map(|k| k as f64 * h / 2.0).collect();
    let vs = p.on_grid(&xs)?;
    if vs.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("potential sample".into()));
    }
    Ok(vs)
}

/// Fundamental solution on a uniform mesh.
#[derive(Debug, Clone)]
pub struct FundamentalSolution {
    pub z: C64,
    pub h: f64,
    pub l: f64,
    pub y: Vec<CMatrix>,
}

impl FundamentalSolution {
    pub fn x(&self, k: usize) -> f64 {
        k as f64 * self.h
    }
}

pub fn integrate_dirac(p: &ContinuousPotential, z: C64, l: f64, h: f64) -> Result<FundamentalSolution> {
    let (n, h) = mesh(l, h)?;
    let vs = half_samples(p, n, h)?;
    let m = p.m1() + p.m2();
    let y = integrate_samples(&vs, p.m1(), z, h, &CMatrix::identity(m))?;
    Ok(FundamentalSolution { z, h, l, y })
}

/// `6 / Im z`: the decaying column loses a factor `e^{−12}` in norm².
pub fn default_length(z: C64) -> f64 {
    6.0 / z.im.max(1e-3)
}

const CHECKPOINTS: usize = 100;

fn report(
    z: C64,
    m_bound: f64,
    horizon: f64,
    xs: &[f64],
    values: &[f64],
    partial: &[f64],
    first: f64,
    second: f64,
    step_error: f64,
) -> WeylDefectReport {
    let stride = (values.len() / CHECKPOINTS).max(1);
    let pick = |v: &[f64]| -> Vec<f64> {
        let mut out: Vec<f64> = v.iter().step_by(stride).copied().collect();
        if !(v.len() - 1).is_multiple_of(stride) {
            out.push(*v.last().unwrap());
        }
        out
    };
    let (ratio, verdict) = verdict(first, second);
    WeylDefectReport {
        z: [z.re, z.im],
        m_bound,
        im_z_exceeds_m: z.im > m_bound,
        horizon,
        positions: pick(xs),
        partial: pick(partial),
        integrand: pick(values),
        first_half: first,
        second_half: second,
        ratio,
        verdict,
        step_error,
    }
}

/// `[I; φ]` (identity on top) or `[φ; I]`.
fn weyl_column(phi: &CMatrix, top: bool) -> CMatrix {
    let id = CMatrix::identity(phi.cols());
    if top {
        id.vstack(phi)
    } else {
        phi.vstack(&id)
    }
}

/// Composite-Simpson accumulation of `‖Y(x)[I; φ]‖²` over `[0, L]`.
pub fn weyl_defect_continuous(
    p: &ContinuousPotential,
    phi: &CMatrix,
    z: C64,
    l: Option<f64>,
    h: f64,
) -> Result<WeylDefectReport> {
    let m1 = p.m1();
    if phi.shape() != (p.m2(), m1) {
        return Err(Error::DimensionMismatch(format!(
            "φ is {:?}, expected {}×{}",
            phi.shape(),
            p.m2(),
            m1
        )));
    }
    let l = l.unwrap_or_else(|| default_length(z));
    let (n, h) = mesh(l, h)?;
    let vs = half_samples(p, n, h)?;
    let y0 = weyl_column(phi, true);
    let ys = integrate_samples(&vs, m1, z, h, &y0)?;
    let f: Vec<f64> = ys.iter().map(|y| y.frobenius_norm().powi(2)).collect();
    // same march at step 2h; fourth order gives error ≈ difference / 15
    let coarse = integrate_samples(&half_samples(p, n / 2, 2.0 * h)?, m1, z, 2.0 * h, &y0)?;
    let end = &ys[n];
    let step_error = (end - &coarse[n / 2]).norm() / 15.0 / end.norm().max(f64::MIN_POSITIVE);
    let xs: Vec<f64> = (0..=n).map(|k| k as f64 * h).collect();
    // Simpson over pairs of steps; partial sums at even nodes, linear fill
    let mut partial = vec![0.0; n + 1];
    for k in (0..n).step_by(2) {
        let s = h / 3.0 * (f[k] + 4.0 * f[k + 1] + f[k + 2]);
        partial[k + 1] = partial[k] + h / 2.0 * (f[k] + f[k + 1]);
        partial[k + 2] = partial[k] + s;
    }
    let mid = if (n / 2) % 2 == 0 { n / 2 } else { n / 2 + 1 };
    let first = partial[mid];
    let second = partial[n] - partial[mid];
    Ok(report(
        z,
        p.bound + 1.0,
        l,
        &xs,
        &f,
        &partial,
        first,
        second,
        step_error,
    ))
}

/// `w_0 = I`, `w_{k+1} = (I + (i/z)C_k)w_k` for `k < K`.
pub fn propagate_discrete(c: &[CMatrix], z: C64, k_max: usize) -> Result<Vec<CMatrix>> {
    if z.norm() == 0.0 {
        return Err(Error::InvalidArgument("z = 0".into()));
    }
    if k_max > c.len() {
        return Err(Error::InvalidArgument(format!(
            "K = {k_max} exceeds the {} stored C_k",
            c.len()
        )));
    }
    let m = c.first().map_or(0, CMatrix::rows);
    let f = I / z;
    let mut w = vec![CMatrix::identity(m)];
    for ck in &c[..k_max] {
        let step = &CMatrix::identity(m) + &ck.scale(f);
        let next = &step * w.last().unwrap();
        if !next.is_finite() {
            return Err(Error::Overflow(format!("w_k not finite at k = {}", w.len())));
        }
        w.push(next);
    }
    Ok(w)
}

/// Horizon for the discrete check: long enough for the decaying factor
/// `min |1 ± i/z|` to lose `e^{−12}` in norm², short enough that rounding
/// in the growing direction stays below `1e−6` relative.
pub fn default_steps(z: C64) -> usize {
    let a = (C64::new(1.0, 0.0) + I / z).norm();
    let b = (C64::new(1.0, 0.0) - I / z).norm();
    let (d, g) = (a.min(b), a.max(b));
    if !(d < 1.0) {
        return 50;
    }
    let want = (6.0 / -d.ln()).ceil();
    let cap = if g > d {
        (1e10f64.ln() / (g / d).ln()).floor()
    } else {
        f64::INFINITY
    };
    want.min(cap).clamp(10.0, 10_000.0) as usize
}

/// `Σ‖w_k[φ; I]‖²` over `k = 0..=K`.
pub fn weyl_defect_discrete(
    p: &DiscretePotential,
    phi: &CMatrix,
    z: C64,
    k_max: Option<usize>,
) -> Result<WeylDefectReport> {
    if phi.shape() != (p.m1(), p.m2()) {
        return Err(Error::DimensionMismatch(format!(
            "φ is {:?}, expected {}×{}",
            phi.shape(),
            p.m1(),
            p.m2()
        )));
    }
    let k_max = k_max.unwrap_or_else(|| default_steps(z)).min(p.k());
    if k_max < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 steps, have {k_max}")));
    }
    let w = propagate_discrete(&p.c, z, k_max)?;
    let col = weyl_column(phi, false);
    let f: Vec<f64> = w.iter().map(|wk| (wk * &col).frobenius_norm().powi(2)).collect();
    let mut partial = Vec::with_capacity(f.len());
    let mut acc = 0.0;
    for v in &f {
        acc += v;
        partial.push(acc);
    }
    let mid = k_max / 2;
    let first = partial[mid - 1];
    let second = acc - first;
    let m_bound = p.c.iter().map(CMatrix::norm).fold(0.0, f64::max) + 1.0;
    let xs: Vec<f64> = (0..=k_max).map(|k| k as f64).collect();
    Ok(report(z, m_bound, k_max as f64, &xs, &f, &partial, first, second, 0.0))
}

/// Adds `eps` to entry (0, 0): the contrast input for the separation checks.
pub fn corrupt(phi: &CMatrix, eps: f64) -> CMatrix {
    let mut out = phi.clone();
    if out.rows() > 0 && out.cols() > 0 {
        out[(0, 0)] += C64::new(eps, 0.0);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::continuous::solve_inverse_continuous;
    use crate::discrete::{c_sequence, solve_inverse_discrete};
    use crate::matcore::c64;
    use crate::quadruple::{AdmissibleQuadruple, Quadruple};
    use crate::realization::{scalar, Convention, Realization};

    fn zero_potential(m1: usize, m2: usize) -> ContinuousPotential {
        solve_inverse_continuous(&Realization::trivial(Convention::Continuous, m1, m2)).unwrap()
    }

    fn sech() -> ContinuousPotential {
        solve_inverse_continuous(&scalar(Convention::Continuous, c64(0.0, 0.0), c64(1.0, 0.0), I)).unwrap()
    }

    #[test]
    fn free_solution() {
        let p = zero_potential(2, 1);
        let z = c64(0.7, 0.4);
        let sol = integrate_dirac(&p, z, 2.0, 1e-2).unwrap();
        for (k, y) in sol.y.iter().enumerate().step_by(37) {
            let x = sol.x(k);
            let want = CMatrix::diag(&[(I * z * x).exp(), (I * z * x).exp(), (-I * z * x).exp()]);
            assert!((y - &want).norm() < 1e-9);
        }
        let sol = integrate_dirac(&p, c64(0.0, 0.0), 1.0, 0.1).unwrap();
        assert!(sol.y.iter().all(|y| (y - &CMatrix::identity(3)).norm() < 1e-15));
    }

    #[test]
    fn fourth_order() {
        let p = zero_potential(1, 1);
        let z = c64(1.0, 0.5);
        let err = |h: f64| {
            let sol = integrate_dirac(&p, z, 2.0, h).unwrap();
            let want = (I * z * 2.0).exp();
            (sol.y.last().unwrap()[(0, 0)] - want).norm()
        };
        let (a, b) = (err(0.1), err(0.05));
        assert!(a / b >= 8.0, "{a} {b}");
    }

    #[test]
    fn free_defect_closed_form() {
        let p = zero_potential(2, 1);
        let sigma = 1.5;
        let l = default_length(c64(0.0, sigma));
        let r = weyl_defect_continuous(&p, &CMatrix::zeros(1, 2), c64(0.0, sigma), None, 1e-3).unwrap();
        let want = 2.0 / (2.0 * sigma) * (1.0 - (-2.0 * sigma * l).exp());
        assert!((r.first_half + r.second_half - want).abs() <= 1e-6 * want);
        assert_eq!(r.verdict, Verdict::Pass);
        assert!(r.partial.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn sech_separation() {
        let p = sech();
        for s in [2.0, 3.0, 4.0] {
            let z = c64(0.0, s);
            let phi = p.weyl(z).unwrap();
            assert!((phi[(0, 0)] - I / z).norm() < 1e-12);
            let good = weyl_defect_continuous(&p, &phi, z, None, DEFAULT_STEP).unwrap();
            assert_eq!(good.verdict, Verdict::Pass, "z = {s}i ratio {}", good.ratio);
            assert!(good.step_error < 1e-6, "z = {s}i step error {}", good.step_error);
            let bad = weyl_defect_continuous(&p, &corrupt(&phi, 0.1), z, None, DEFAULT_STEP).unwrap();
            assert_eq!(bad.verdict, Verdict::Fail, "z = {s}i ratio {}", bad.ratio);
        }
    }

    #[test]
    fn discrete_free_closed_form() {
        let q = AdmissibleQuadruple::new(Quadruple::empty(1, 2)).unwrap();
        let p = c_sequence(&q, 400, false).unwrap();
        let y = 3.0;
        let z = c64(0.0, y);
        let w = propagate_discrete(&p.c, z, 5).unwrap();
        assert_eq!(w[0], CMatrix::identity(3));
        let d = CMatrix::diag(&[
            c64(1.0 + 1.0 / y, 0.0).powi(5),
            c64(1.0 - 1.0 / y, 0.0).powi(5),
            c64(1.0 - 1.0 / y, 0.0).powi(5),
        ]);
        assert!((&w[5] - &d).norm() < 1e-14);
        let r = weyl_defect_discrete(&p, &CMatrix::zeros(1, 2), z, Some(400)).unwrap();
        let want = 2.0 / (1.0 - (1.0 - 1.0 / y).powi(2));
        assert!((r.first_half + r.second_half - want).abs() < 1e-10);
        assert_eq!(r.verdict, Verdict::Pass);
        assert!(propagate_discrete(&p.c, c64(0.0, 0.0), 3).is_err());
    }

    #[test]
    fn discrete_separation() {
        let r = scalar(Convention::Discrete, -I, c64(1.0, 0.0), c64(3f64.sqrt(), 0.0));
        let p = solve_inverse_discrete(&r, 200).unwrap();
        for s in [2.0, 3.0, 4.0] {
            let z = c64(0.0, s);
            let phi = p.weyl(z).unwrap();
            let good = weyl_defect_discrete(&p, &phi, z, None).unwrap();
            assert_eq!(good.verdict, Verdict::Pass, "z = {s}i ratio {}", good.ratio);
            let bad = weyl_defect_discrete(&p, &corrupt(&phi, 0.1), z, None).unwrap();
            assert_eq!(bad.verdict, Verdict::Fail, "z = {s}i ratio {}", bad.ratio);
        }
    }

    #[test]
    fn verdict_rules() {
        assert_eq!(verdict(1.0, 0.01).1, Verdict::Pass);
        assert_eq!(verdict(1.0, 0.5).1, Verdict::Inconclusive);
        assert_eq!(verdict(1.0, 2.0).1, Verdict::Fail);
        assert_eq!(verdict(f64::NAN, 2.0).1, Verdict::Fail);
        assert_eq!(Verdict::Pass.combine(Verdict::Inconclusive), Verdict::Inconclusive);
    }
}
