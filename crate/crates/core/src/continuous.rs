//! Pseudo-exponential potentials of the continuous system and the
//! continuous inverse procedure.
//!
//! `v(x) = 2ϑ1*e^{2ixα*}R(x)⁻¹ϑ2` with
//! `R(x) = S0 + 2∫₀ˣ e^{−2itα}ϑ1ϑ1*e^{2itα*}dt`.
//!
//! The direct formulas overflow once `e^{2xImσ(α)}` leaves double range, so
//! the evaluator used by the pipeline marches along x: at each node the
//! shifted quadruple `{α, S(x0), Λ(x0)}` is admissible, and after the
//! congruence that turns `S(x0)` into `I` every factor stays O(1).

use serde::Serialize;

use crate::error::{Error, Result};
use crate::matcore::{expm, gramian_integral, is_positive_definite, solve_linear, spectrum, CMatrix, C64, I};
use crate::quadruple::{AdmissibleQuadruple, Quadruple};
use crate::realization::{probe_mismatch_with, Convention, Realization};
use crate::riccati::RiccatiSolution;

fn check_x(x: f64) -> Result<()> {
    if !(x >= 0.0) || !x.is_finite() {
        return Err(Error::InvalidArgument(format!("x = {x} must be finite and >= 0")));
    }
    Ok(())
}

fn exp_i(alpha: &CMatrix, t: f64) -> Result<CMatrix> {
    expm(&alpha.scale(I * t))
}

/// `Λ(x) = [e^{−ixα}ϑ1  e^{ixα}ϑ2]`.
pub fn lambda(q: &Quadruple, x: f64) -> Result<CMatrix> {
    let minus = exp_i(&q.alpha, -x)?;
    let plus = exp_i(&q.alpha, x)?;
    Ok((&minus * &q.theta1).hstack(&(&plus * &q.theta2)))
}

/// `R(x)` through the block-exponential Gramian.
pub fn r_of_x(q: &Quadruple, x: f64) -> Result<CMatrix> {
    check_x(x)?;
    let a = q.alpha.scale(I * -2.0);
    let g = gramian_integral(&a, &(&q.theta1 * &q.theta1.adjoint()).scale_real(2.0), x)?;
    Ok((&q.s0 + &g).hermitian_part())
}

/// `S(x) = e^{ixα}R(x)e^{−ixα*}`, checked for positivity.
pub fn s_of_x(q: &Quadruple, x: f64) -> Result<CMatrix> {
    let e = exp_i(&q.alpha, x)?;
    let s = (&(&e * &r_of_x(q, x)?) * &e.adjoint()).hermitian_part();
    if q.n() > 0 && !is_positive_definite(&s).positive {
        return Err(Error::Inconsistent(format!("S({x}) lost positivity")));
    }
    Ok(s)
}

/// `S(x) = S0 + ∫₀ˣ Λ(t)jΛ(t)*dt`, split into two Gramians.
pub fn s_of_x_direct(q: &Quadruple, x: f64) -> Result<CMatrix> {
    check_x(x)?;
    let g1 = gramian_integral(&q.alpha.scale(-I), &(&q.theta1 * &q.theta1.adjoint()), x)?;
    let g2 = gramian_integral(&q.alpha.scale(I), &(&q.theta2 * &q.theta2.adjoint()), x)?;
    Ok((&(&q.s0 + &g1) - &g2).hermitian_part())
}

/// `v(x) = 2ϑ1*e^{2ixα*}R(x)⁻¹ϑ2`, evaluated literally.
pub fn potential_direct(q: &Quadruple, x: f64) -> Result<CMatrix> {
    let r = r_of_x(q, x)?;
    let e = exp_i(&q.alpha.adjoint(), 2.0 * x)?;
    let y = solve_linear(&r, &q.theta2)?;
    Ok((&(&q.theta1.adjoint() * &e) * &y).scale_real(2.0))
}

/// `v(x) = 2ϑ1*e^{ixα*}S(x)⁻¹e^{ixα}ϑ2`, evaluated literally.
pub fn potential_s_form(q: &Quadruple, x: f64) -> Result<CMatrix> {
    let s = s_of_x_direct(q, x)?;
    let e = exp_i(&q.alpha, x)?;
    let e_adj = exp_i(&q.alpha.adjoint(), x)?;
    let y = solve_linear(&s, &(&e * &q.theta2))?;
    Ok((&(&q.theta1.adjoint() * &e_adj) * &y).scale_real(2.0))
}

/// Renormalised march along x.
///
/// State at node `x0`: `α_c = T⁻¹αT`, `ϑ_c = T⁻¹Λ(x0)`, `P = T⁻¹e^{ix0α}`,
/// where `TT* = S(x0)`. Locally
/// `v(x0+s) = 2Kϑ2c`, `ϑ1*e^{2ixα*}R(x)⁻¹ = KP` with
/// `K = ϑ1c*e^{2isα_c*}R_c(s)⁻¹`.
#[derive(Debug, Clone)]
pub struct Marcher {
    x0: f64,
    alpha: CMatrix,
    theta1: CMatrix,
    theta2: CMatrix,
    p: CMatrix,
    nodes: usize,
}

/// Sample of the marching evaluator.
#[derive(Debug, Clone)]
pub struct LocalValue {
    pub v: CMatrix,
    /// `ϑ1*e^{2ixα*}R(x)⁻¹`.
    pub w: CMatrix,
}

impl Marcher {
    pub fn new(q: &Quadruple) -> Result<Self> {
        let n = q.n();
        let l = cholesky_factor(&q.s0)?;
        let inv = lower_inverse(&l)?;
        Ok(Self {
            x0: 0.0,
            alpha: &(&inv * &q.alpha) * &l,
            theta1: &inv * &q.theta1,
            theta2: &inv * &q.theta2,
            p: if n == 0 { CMatrix::zeros(0, 0) } else { inv },
            nodes: 0,
        })
    }

    pub fn node(&self) -> f64 {
        self.x0
    }

    pub fn nodes_taken(&self) -> usize {
        self.nodes
    }

    fn step(&self) -> f64 {
        0.5 / self.alpha.norm().max(1.0)
    }

    fn r_local(&self, s: f64) -> Result<CMatrix> {
        let n = self.alpha.rows();
        let q = (&self.theta1 * &self.theta1.adjoint()).scale_real(2.0);
        let g = gramian_integral(&self.alpha.scale(I * -2.0), &q, s)?;
        Ok((&CMatrix::identity(n) + &g).hermitian_part())
    }

    fn k_local(&self, s: f64) -> Result<CMatrix> {
        let r = self.r_local(s)?;
        let e = exp_i(&self.alpha.adjoint(), 2.0 * s)?;
        // K = ϑ1c* e R⁻¹  ⇔  R K* = e* ϑ1c
        let kt = solve_linear(&r, &(&e.adjoint() * &self.theta1))?;
        Ok(kt.adjoint())
    }

    /// Moves to the last node not beyond `x`.
    pub fn advance_to(&mut self, x: f64) -> Result<()> {
        let n = self.alpha.rows();
        if n == 0 {
            return Ok(());
        }
        loop {
            let h = self.step();
            if self.x0 + h > x {
                return Ok(());
            }
            let e = exp_i(&self.alpha, h)?;
            let e_minus = exp_i(&self.alpha, -h)?;
            let s = (&(&e * &self.r_local(h)?) * &e.adjoint()).hermitian_part();
            let l =
                cholesky_factor(&s).map_err(|_| Error::Inconsistent(format!("S({}) lost positivity", self.x0 + h)))?;
            let inv = lower_inverse(&l)?;
            self.theta1 = &inv * &(&e_minus * &self.theta1);
            self.theta2 = &inv * &(&e * &self.theta2);
            self.p = &inv * &(&e * &self.p);
            self.alpha = &(&inv * &self.alpha) * &l;
            self.x0 += h;
            self.nodes += 1;
            if !self.alpha.is_finite() || !self.p.is_finite() {
                return Err(Error::Overflow(format!("march diverged at x = {}", self.x0)));
            }
        }
    }

    /// Values at `x ≥ node()`; callers advance first.
    pub fn value(&self, x: f64) -> Result<LocalValue> {
        let m1 = self.theta1.cols();
        let m2 = self.theta2.cols();
        if self.alpha.rows() == 0 {
            return Ok(LocalValue {
                v: CMatrix::zeros(m1, m2),
                w: CMatrix::zeros(m1, 0),
            });
        }
        let s = x - self.x0;
        if s < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "x = {x} lies before the current node {}",
                self.x0
            )));
        }
        let k = self.k_local(s)?;
        Ok(LocalValue {
            v: (&k * &self.theta2).scale_real(2.0),
            w: &k * &self.p,
        })
    }
}

fn cholesky_factor(s: &CMatrix) -> Result<CMatrix> {
    if s.rows() == 0 {
        return Ok(CMatrix::zeros(0, 0));
    }
    is_positive_definite(s)
        .factor
        .ok_or_else(|| Error::NotPositive("S".into()))
}

fn lower_inverse(l: &CMatrix) -> Result<CMatrix> {
    Ok(crate::matcore::forward_substitute(l, &CMatrix::identity(l.rows())))
}

/// `v(x)` by marching from 0.
pub fn potential_at(q: &Quadruple, x: f64) -> Result<CMatrix> {
    check_x(x)?;
    let mut m = Marcher::new(q)?;
    m.advance_to(x)?;
    Ok(m.value(x)?.v)
}

/// Marching evaluation on an arbitrary set of points (one march, visited in
/// increasing order; results returned in input order).
pub fn evaluate_grid(q: &Quadruple, xs: &[f64]) -> Result<Vec<LocalValue>> {
    for &x in xs {
        check_x(x)?;
    }
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut m = Marcher::new(q)?;
    let mut out: Vec<Option<LocalValue>> = vec![None; xs.len()];
    for i in order {
        m.advance_to(xs[i])?;
        out[i] = Some(m.value(xs[i])?);
    }
    Ok(out.into_iter().map(|v| v.expect("every slot filled")).collect())
}

pub fn potential_on_grid(q: &Quadruple, xs: &[f64]) -> Result<Vec<CMatrix>> {
    Ok(evaluate_grid(q, xs)?.into_iter().map(|l| l.v).collect())
}

/// `φ(z) = iϑ2*S0⁻¹(zI − θ)⁻¹ϑ1`, `θ = α − iϑ1ϑ1*S0⁻¹`.
pub fn weyl_continuous(q: &Quadruple, z: C64) -> Result<CMatrix> {
    let n = q.n();
    if n == 0 {
        return Ok(CMatrix::zeros(q.m2(), q.m1()));
    }
    let s_inv_t1 = solve_linear(&q.s0, &q.theta1)?;
    let s_inv_t2 = solve_linear(&q.s0, &q.theta2)?;
    let theta = &q.alpha - &(&q.theta1 * &s_inv_t1.adjoint()).scale(I);
    let distance = spectrum(&theta)?.distance_to(z);
    if distance <= 1e-10 * theta.norm().max(1.0) {
        return Err(Error::NearPole { z, distance });
    }
    let y = solve_linear(&(-&theta).shift(z), &q.theta1).map_err(|_| Error::NearPole { z, distance })?;
    Ok((&s_inv_t2.adjoint() * &y).scale(I))
}

/// Default sampling range `10 / min Im σ(α)` (10 when the spectrum is not in
/// the open upper half-plane).
pub fn default_x_max(q: &Quadruple) -> Result<f64> {
    if q.n() == 0 {
        return Ok(10.0);
    }
    let lo = spectrum(&q.alpha)?.min_imag();
    Ok(if lo > 1e-10 { 10.0 / lo } else { 10.0 })
}

pub fn uniform_grid(a: f64, b: f64, samples: usize) -> Vec<f64> {
    match samples {
        0 => Vec::new(),
        1 => vec![a],
        _ => (0..samples)
            .map(|k| a + (b - a) * k as f64 / (samples - 1) as f64)
            .collect(),
    }
}

pub const DEFAULT_SAMPLES: usize = 400;

/// Recovered continuous potential.
#[derive(Debug, Clone)]
pub struct ContinuousPotential {
    pub quadruple: AdmissibleQuadruple,
    pub riccati: Option<RiccatiSolution>,
    /// Default evaluation range.
    pub x_max: f64,
    /// sup ‖v‖ over the default grid.
    pub bound: f64,
    /// Worst relative mismatch between the recovered Weyl function and the
    /// input realization at the probe points.
    pub weyl_mismatch: f64,
}

impl ContinuousPotential {
    pub fn from_quadruple(q: AdmissibleQuadruple) -> Result<Self> {
        let x_max = default_x_max(&q)?;
        let grid = uniform_grid(0.0, x_max, DEFAULT_SAMPLES);
        let bound = potential_on_grid(&q, &grid)?
            .iter()
            .map(CMatrix::norm)
            .fold(0.0, f64::max);
        Ok(Self {
            quadruple: q,
            riccati: None,
            x_max,
            bound,
            weyl_mismatch: 0.0,
        })
    }

    pub fn at(&self, x: f64) -> Result<CMatrix> {
        potential_at(&self.quadruple, x)
    }

    pub fn on_grid(&self, xs: &[f64]) -> Result<Vec<CMatrix>> {
        potential_on_grid(&self.quadruple, xs)
    }

    pub fn default_grid(&self) -> Vec<f64> {
        uniform_grid(0.0, self.x_max, DEFAULT_SAMPLES)
    }

    pub fn weyl(&self, z: C64) -> Result<CMatrix> {
        weyl_continuous(&self.quadruple, z)
    }

    pub fn m1(&self) -> usize {
        self.quadruple.m1()
    }

    pub fn m2(&self) -> usize {
        self.quadruple.m2()
    }
}

/// Riccati solve, quadruple, potential.
pub fn solve_inverse_continuous(r: &Realization) -> Result<ContinuousPotential> {
    if r.convention() != Convention::Continuous {
        return Err(Error::InvalidArgument(
            "continuous inversion needs a continuous-convention realization".into(),
        ));
    }
    if r.n() == 0 {
        let q = AdmissibleQuadruple::new(Quadruple::empty(r.m1(), r.m2()))?;
        return ContinuousPotential::from_quadruple(q);
    }
    let (sol, q) = crate::quadruple::recover(r)?;
    let mismatch = probe_mismatch_with(r, |z| weyl_continuous(&q, z))?;
    let mut p = ContinuousPotential::from_quadruple(q)?;
    p.riccati = Some(sol);
    p.weyl_mismatch = mismatch;
    Ok(p)
}

#[derive(Debug, Clone, Serialize)]
pub struct DecayProfile {
    pub x: Vec<f64>,
    pub v_norm: Vec<f64>,
    /// `‖ϑ1*e^{2ixα*}R(x)⁻¹‖`.
    pub w_norm: Vec<f64>,
}

impl DecayProfile {
    /// `‖v(x_max)‖ < 1e−3·‖v(0)‖` (or v ≡ 0).
    pub fn v_decayed(&self) -> bool {
        match (self.v_norm.first(), self.v_norm.last()) {
            (Some(&a), Some(&b)) => b < 1e-3 * a || (a == 0.0 && b == 0.0),
            _ => true,
        }
    }

    /// `‖ϑ1*e^{2ixα*}R(x)⁻¹‖` non-increasing over the final half.
    pub fn w_decreasing_tail(&self) -> bool {
        let half = self.w_norm.len() / 2;
        self.w_norm[half..]
            .windows(2)
            .all(|w| w[1] <= w[0] * (1.0 + 1e-12) + 1e-300)
    }
}

pub fn decay_profile(p: &ContinuousPotential, x_max: f64, samples: usize) -> Result<DecayProfile> {
    if !(x_max > 0.0) {
        return Err(Error::InvalidArgument(format!("x_max = {x_max} must be > 0")));
    }
    let xs = uniform_grid(0.0, x_max, samples);
    let vals = evaluate_grid(&p.quadruple, &xs)?;
    Ok(DecayProfile {
        v_norm: vals.iter().map(|l| l.v.norm()).collect(),
        w_norm: vals.iter().map(|l| l.w.norm()).collect(),
        x: xs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matcore::c64;
    use crate::random;
    use crate::realization::{random_realization, scalar};

    fn sech_quadruple() -> Quadruple {
        Quadruple::scalar(I, c64(1.0, 0.0), c64(1.0, 0.0), c64(1.0, 0.0))
    }

    fn sech2(x: f64) -> f64 {
        2.0 / (2.0 * x).cosh()
    }

    #[test]
    fn lambda_examples() {
        let q = sech_quadruple();
        assert_eq!(lambda(&q, 0.0).unwrap(), q.lambda0());
        let l = lambda(&q, 0.7).unwrap();
        assert!((l[(0, 0)].re - 0.7f64.exp()).abs() < 1e-14);
        assert!((l[(0, 1)].re - (-0.7f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn r_and_s_examples() {
        let q = sech_quadruple();
        assert_eq!(r_of_x(&q, 0.0).unwrap(), q.s0);
        for x in [0.2, 1.0, 2.5] {
            let r = r_of_x(&q, x).unwrap()[(0, 0)].re;
            let want = ((4.0 * x).exp() + 1.0) / 2.0;
            assert!((r - want).abs() <= 1e-13 * want);
            let s = s_of_x(&q, x).unwrap()[(0, 0)].re;
            let sd = s_of_x_direct(&q, x).unwrap()[(0, 0)].re;
            assert!((s - (2.0 * x).cosh()).abs() <= 1e-13 * s);
            assert!((sd - (2.0 * x).cosh()).abs() <= 1e-13 * s);
        }
    }

    #[test]
    fn sech_potential() {
        let q = sech_quadruple();
        for k in 0..=50 {
            let x = 0.1 * k as f64;
            let want = sech2(x);
            assert!((potential_at(&q, x).unwrap()[(0, 0)].re - want).abs() < 1e-12);
            assert!((potential_direct(&q, x).unwrap()[(0, 0)].re - want).abs() < 1e-12);
            assert!((potential_s_form(&q, x).unwrap()[(0, 0)].re - want).abs() < 1e-12);
        }
        let far = potential_at(&q, 300.0).unwrap()[(0, 0)].norm();
        assert!(far < 1e-250 && far.is_finite());
    }

    #[test]
    fn potential_edge_cases() {
        let mut rng = random::rng(2);
        let r = random_realization(&mut rng, Convention::Continuous, 3, 2, 2);
        let p = solve_inverse_continuous(&r).unwrap();
        let q = &p.quadruple;
        let v0 = potential_at(q, 0.0).unwrap();
        let want = (&q.theta1.adjoint() * &solve_linear(&q.s0, &q.theta2).unwrap()).scale_real(2.0);
        assert!((&v0 - &want).norm() < 1e-12 * want.norm());

        let mut z = (**q).clone();
        z.theta2 = CMatrix::zeros(3, 2);
        z.alpha = &z.alpha - &(&q.theta2 * &q.theta2.adjoint()).scale(I);
        assert!(potential_at(&z, 1.3).unwrap().norm() == 0.0);
        assert!(matches!(potential_at(q, -1.0), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn weyl_examples() {
        let q = sech_quadruple();
        for z in [c64(1.0, 2.0), c64(-3.0, 0.5), c64(0.0, 4.0)] {
            let f = weyl_continuous(&q, z).unwrap();
            assert!((f[(0, 0)] - I / z).norm() < 1e-15);
        }
        let mut q0 = q.clone();
        q0.theta1 = CMatrix::zeros(1, 1);
        assert_eq!(weyl_continuous(&q0, c64(0.0, 2.0)).unwrap(), CMatrix::zeros(1, 1));
        let mut rng = random::rng(8);
        let r = random_realization(&mut rng, Convention::Continuous, 3, 1, 2);
        let p = solve_inverse_continuous(&r).unwrap();
        assert!(p.weyl_mismatch < 1e-8);
    }

    #[test]
    fn sech_pipeline() {
        let r = scalar(Convention::Continuous, c64(0.0, 0.0), c64(1.0, 0.0), I);
        let p = solve_inverse_continuous(&r).unwrap();
        let xs = uniform_grid(0.0, 5.0, 501);
        let vs = p.on_grid(&xs).unwrap();
        for (x, v) in xs.iter().zip(&vs) {
            assert!((v[(0, 0)] - sech2(*x)).norm() < 1e-9);
        }
        assert!((p.bound - 2.0).abs() < 1e-12);
    }

    #[test]
    fn empty_state_space() {
        let r = Realization::trivial(Convention::Continuous, 2, 1);
        let p = solve_inverse_continuous(&r).unwrap();
        assert_eq!(p.at(1.0).unwrap(), CMatrix::zeros(2, 1));
    }

    #[test]
    fn forms_agree_and_identity_holds() {
        for seed in 0..6 {
            let mut rng = random::rng(100 + seed);
            let r = random_realization(&mut rng, Convention::Continuous, 2 + seed as usize % 3, 2, 1);
            let p = solve_inverse_continuous(&r).unwrap();
            let q = &p.quadruple;
            // the literal forms lose digits like e^{4x·max Im σ(α)}
            let top = spectrum(&q.alpha).unwrap().max_imag();
            for k in 0..12 {
                let x = 2.5 / top * k as f64 / 11.0;
                let a = potential_at(q, x).unwrap();
                let b = potential_direct(q, x).unwrap();
                let c = potential_s_form(q, x).unwrap();
                let scale = a.norm().max(1e-300);
                assert!((&a - &b).norm() <= 1e-8 * scale, "seed {seed} x {x}");
                assert!((&a - &c).norm() <= 1e-8 * scale, "seed {seed} x {x}");
                let s = s_of_x(q, x).unwrap();
                let l = lambda(q, x).unwrap();
                let d = &(&(&q.alpha * &s) - &(&s * &q.alpha.adjoint())) - &(&l * &l.adjoint()).scale(I);
                let sc = q.alpha.norm() * s.norm() + l.norm() * l.norm();
                assert!(d.norm() <= 1e-9 * sc);
            }
        }
    }

    #[test]
    fn normalisation_does_not_change_v() {
        let mut rng = random::rng(17);
        let r = random_realization(&mut rng, Convention::Continuous, 3, 1, 1);
        let p = solve_inverse_continuous(&r).unwrap();
        let qn = p.quadruple.normalize_s0().unwrap();
        let xs = uniform_grid(0.0, p.x_max, 60);
        let a = potential_on_grid(&p.quadruple, &xs).unwrap();
        let b = potential_on_grid(&qn, &xs).unwrap();
        for (u, v) in a.iter().zip(&b) {
            assert!((u - v).norm() <= 1e-9 * (1.0 + u.norm()));
        }
    }

    #[test]
    fn r_is_monotone() {
        let mut rng = random::rng(23);
        let r = random_realization(&mut rng, Convention::Continuous, 3, 2, 2);
        let p = solve_inverse_continuous(&r).unwrap();
        let mut prev = r_of_x(&p.quadruple, 0.0).unwrap();
        for k in 1..20 {
            let cur = r_of_x(&p.quadruple, 0.1 * k as f64).unwrap();
            let d = &cur - &prev;
            let (vals, _) = crate::matcore::eigh(&d).unwrap();
            assert!(vals[0] >= -1e-10 * cur.norm());
            prev = cur;
        }
    }

    #[test]
    fn decay() {
        let q = AdmissibleQuadruple::new(sech_quadruple()).unwrap();
        let p = ContinuousPotential::from_quadruple(q).unwrap();
        let prof = decay_profile(&p, p.x_max, 200).unwrap();
        assert!(prof.v_norm.windows(2).all(|w| w[1] < w[0]));
        assert!(prof.v_decayed() && prof.w_decreasing_tail());
        for seed in 0..5 {
            let mut rng = random::rng(300 + seed);
            let r = random_realization(&mut rng, Convention::Continuous, 2, 1, 1);
            let p = solve_inverse_continuous(&r).unwrap();
            let prof = decay_profile(&p, p.x_max, 400).unwrap();
            assert!(prof.v_decayed(), "seed {seed}");
        }
    }
}
