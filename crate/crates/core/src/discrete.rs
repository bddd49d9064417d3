//! Discrete potentials `{C_k}` generated by an admissible quadruple and the
//! discrete inverse procedure.
//!
//! Literal recursion:
//! `Λ_{k+1} = Λ_k + iα⁻¹Λ_kj`,
//! `S_{k+1} = S_k + α⁻¹S_kα*⁻¹ + α⁻¹Λ_kjΛ_k*α*⁻¹`,
//! `C_k = j + Λ_k*S_k⁻¹Λ_k − Λ_{k+1}*S_{k+1}⁻¹Λ_{k+1}`.
//!
//! `S_k` grows geometrically, so [`c_sequence`] runs the recursion in the
//! basis where `S_k = I`: with `S_k = T_kT_k*` the state is
//! `α_c = T_k⁻¹αT_k`, `Λ_c = T_k⁻¹Λ_k`, and each step only needs the Cholesky
//! factor of the O(1) matrix `T_k⁻¹S_{k+1}T_k⁻*`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::matcore::{
    eigh, is_positive_definite, operator_norm, pivoted_qr, solve_linear, spectrum, CMatrix, Lu, C64, I,
};
use crate::quadruple::{AdmissibleQuadruple, Quadruple};
use crate::realization::{krylov_basis, probe_mismatch_with, Convention, Realization};
use crate::riccati::RiccatiSolution;

/// `max(5n + 20, 50)`.
pub fn default_k(n: usize) -> usize {
    (5 * n + 20).max(50)
}

fn inverse(m: &CMatrix, what: &str) -> Result<CMatrix> {
    let lu = Lu::new(m)?;
    if lu.rcond() < f64::EPSILON * m.rows().max(1) as f64 {
        return Err(Error::SpectralCondition(format!("{what} is singular")));
    }
    Ok(lu.inverse())
}

fn alpha_inverse(alpha: &CMatrix) -> Result<CMatrix> {
    inverse(alpha, "α")
}

/// One literal step of the `(Λ, S)` recursion.
pub fn recursion_step(q: &Quadruple, lambda: &CMatrix, s: &CMatrix) -> Result<(CMatrix, CMatrix)> {
    let ai = alpha_inverse(&q.alpha)?;
    step_with(&ai, lambda, s, q.m1())
}

fn step_with(ai: &CMatrix, lambda: &CMatrix, s: &CMatrix, m1: usize) -> Result<(CMatrix, CMatrix)> {
    let j = CMatrix::signature(m1, lambda.cols() - m1);
    let lj = lambda * &j;
    let next_lambda = lambda + &(ai * &lj).scale(I);
    let ai_adj = ai.adjoint();
    let s_next = &(s + &(&(ai * s) * &ai_adj)) + &(&(ai * &(&lj * &lambda.adjoint())) * &ai_adj);
    Ok((next_lambda, s_next.hermitian_part()))
}

/// `Λ_k = [(I + iα⁻¹)^kϑ1  (I − iα⁻¹)^kϑ2]`.
pub fn explicit_lambda(q: &Quadruple, k: usize) -> Result<CMatrix> {
    let n = q.n();
    if n == 0 {
        return Ok(CMatrix::zeros(0, q.m()));
    }
    let ai = alpha_inverse(&q.alpha)?.scale(I);
    let id = CMatrix::identity(n);
    let plus = (&id + &ai).powi(k as u32);
    let minus = (&id - &ai).powi(k as u32);
    Ok((&plus * &q.theta1).hstack(&(&minus * &q.theta2)))
}

fn check_finite(m: &CMatrix, what: &str, k: usize) -> Result<()> {
    if m.is_finite() {
        Ok(())
    } else {
        Err(Error::Overflow(format!("{what} at k = {k} is not finite")))
    }
}

/// Literal `Λ_k, S_k` for `k = 0..=K`.
pub fn literal_sequence(q: &Quadruple, k_max: usize) -> Result<(Vec<CMatrix>, Vec<CMatrix>)> {
    let ai = if q.n() == 0 {
        CMatrix::zeros(0, 0)
    } else {
        alpha_inverse(&q.alpha)?
    };
    let mut lambdas = vec![q.lambda0()];
    let mut ss = vec![q.s0.clone()];
    for k in 0..k_max {
        let (l, s) = step_with(&ai, &lambdas[k], &ss[k], q.m1())?;
        check_finite(&s, "S_k", k + 1)?;
        lambdas.push(l);
        ss.push(s);
    }
    Ok((lambdas, ss))
}

/// `C_k` from the literal recursion (oracle for short ranges).
pub fn c_sequence_literal(q: &Quadruple, k_max: usize) -> Result<Vec<CMatrix>> {
    let (lambdas, ss) = literal_sequence(q, k_max)?;
    let j = CMatrix::signature(q.m1(), q.m2());
    let f = |k: usize| -> Result<CMatrix> {
        if q.n() == 0 {
            return Ok(CMatrix::zeros(q.m(), q.m()));
        }
        Ok(&lambdas[k].adjoint() * &solve_linear(&ss[k], &lambdas[k])?)
    };
    (0..k_max)
        .map(|k| Ok((&(&j + &f(k)?) - &f(k + 1)?).hermitian_part()))
        .collect()
}

fn chol(s: &CMatrix, k: usize) -> Result<CMatrix> {
    is_positive_definite(s)
        .factor
        .ok_or_else(|| Error::Inconsistent(format!("S_{k} lost positivity")))
}

fn lower_inverse(l: &CMatrix) -> CMatrix {
    crate::matcore::forward_substitute(l, &CMatrix::identity(l.rows()))
}

/// Recursion state in the basis where `S_k = I`.
struct Normalized {
    alpha: CMatrix,
    lambda: CMatrix,
    /// `T_k⁻¹(I − iα⁻¹)^k`.
    p: CMatrix,
    m1: usize,
}

impl Normalized {
    fn new(q: &Quadruple) -> Result<Self> {
        let l = chol(&q.s0, 0)?;
        let li = lower_inverse(&l);
        Ok(Self {
            alpha: &(&li * &q.alpha) * &l,
            lambda: &li * &q.lambda0(),
            p: li,
            m1: q.m1(),
        })
    }

    /// Returns `C_k` and advances to `k + 1`.
    fn advance(&mut self, k: usize) -> Result<CMatrix> {
        let n = self.alpha.rows();
        let m = self.lambda.cols();
        let j = CMatrix::signature(self.m1, m - self.m1);
        let ai = alpha_inverse(&self.alpha)?;
        let (next_lambda, s_next) = step_with(&ai, &self.lambda, &CMatrix::identity(n), self.m1)?;
        let f_k = &self.lambda.adjoint() * &self.lambda;
        let l = chol(&s_next, k + 1)?;
        let li = lower_inverse(&l);
        let lam = &li * &next_lambda;
        let f_next = &lam.adjoint() * &lam;
        self.p = &li * &(&(&CMatrix::identity(n) - &ai.scale(I)) * &self.p);
        self.alpha = &(&li * &self.alpha) * &l;
        self.lambda = lam;
        if !self.alpha.is_finite() || !self.lambda.is_finite() {
            return Err(Error::Overflow(format!("recursion diverged at k = {k}")));
        }
        Ok((&(&j + &f_k) - &f_next).hermitian_part())
    }

    /// `‖R_k⁻¹Ψ_k‖ = ‖P_k*Λ_c^{(1)}‖`.
    fn r_inv_psi(&self) -> f64 {
        (&self.p.adjoint() * &self.lambda.columns(0..self.m1)).norm()
    }

    /// `λ_min(R_k) = 1/‖P_k‖²`, since `R_k⁻¹ = P_k*P_k`. Accurate in the
    /// relative sense where the dense `R_k` is not.
    fn r_lambda_min(&self) -> f64 {
        let p = operator_norm(&self.p);
        1.0 / (p * p)
    }
}

/// Per-step output of the normalized recursion.
struct Sequence {
    c: Vec<CMatrix>,
    r_inv_psi: Vec<f64>,
    r_lambda_min: Vec<f64>,
}

/// `C_0, …, C_{K−1}` with `‖R_k⁻¹Ψ_k‖` and `λ_min(R_k)` for `k = 0..K`.
fn normalized_sequence(q: &Quadruple, k_max: usize) -> Result<Sequence> {
    let j = CMatrix::signature(q.m1(), q.m2());
    if q.n() == 0 {
        return Ok(Sequence {
            c: vec![j; k_max],
            r_inv_psi: vec![0.0; k_max],
            r_lambda_min: vec![f64::INFINITY; k_max],
        });
    }
    let mut state = Normalized::new(q)?;
    let mut seq = Sequence {
        c: Vec::with_capacity(k_max),
        r_inv_psi: Vec::with_capacity(k_max),
        r_lambda_min: Vec::with_capacity(k_max),
    };
    for k in 0..k_max {
        seq.r_inv_psi.push(state.r_inv_psi());
        seq.r_lambda_min.push(state.r_lambda_min());
        seq.c.push(state.advance(k)?);
    }
    Ok(seq)
}

/// Checked per-`C_k` invariants.
#[derive(Debug, Clone, Serialize)]
pub struct InvariantReport {
    pub max_hermitian_defect: f64,
    pub max_involution_defect: f64,
    pub signature_ok: bool,
    pub ok: bool,
}

pub const HERMITIAN_TOL: f64 = 1e-10;
pub const INVOLUTION_TOL: f64 = 1e-9;
pub const SIGNATURE_TOL: f64 = 1e-8;

pub fn check_invariants(cs: &[CMatrix], m1: usize) -> Result<InvariantReport> {
    let mut herm: f64 = 0.0;
    let mut inv: f64 = 0.0;
    let mut sig = true;
    for c in cs {
        let m = c.rows();
        herm = herm.max(c.hermitian_defect() / c.norm().max(1.0));
        inv = inv.max((&(c * c) - &CMatrix::identity(m)).norm());
        let (vals, _) = eigh(&c.hermitian_part())?;
        let minus = vals.iter().filter(|&&v| (v + 1.0).abs() <= SIGNATURE_TOL).count();
        let plus = vals.iter().filter(|&&v| (v - 1.0).abs() <= SIGNATURE_TOL).count();
        sig &= plus == m1 && minus == m - m1;
    }
    Ok(InvariantReport {
        max_hermitian_defect: herm,
        max_involution_defect: inv,
        signature_ok: sig,
        ok: herm <= HERMITIAN_TOL && inv <= INVOLUTION_TOL && sig,
    })
}

/// Recovered discrete potential.
#[derive(Debug, Clone)]
pub struct DiscretePotential {
    pub quadruple: AdmissibleQuadruple,
    pub c: Vec<CMatrix>,
    /// `‖R_k⁻¹Ψ_k‖`, `k = 0..K`.
    pub r_inv_psi: Vec<f64>,
    /// `λ_min(R_k)`, `k = 0..K`; `+∞` when `n = 0` or past underflow of `R_k⁻¹`.
    pub r_lambda_min: Vec<f64>,
    pub invariants: InvariantReport,
    pub riccati: Option<RiccatiSolution>,
    pub weyl_mismatch: f64,
    pub warnings: Vec<String>,
}

impl DiscretePotential {
    pub fn k(&self) -> usize {
        self.c.len()
    }

    pub fn m1(&self) -> usize {
        self.quadruple.m1()
    }

    pub fn m2(&self) -> usize {
        self.quadruple.m2()
    }

    pub fn signature(&self) -> CMatrix {
        CMatrix::signature(self.m1(), self.m2())
    }

    pub fn weyl(&self, z: C64) -> Result<CMatrix> {
        weyl_discrete(&self.quadruple, z)
    }

    /// Literal `Λ_k, S_k, R_k, Q_k, Ψ_k` up to `k_max` (may overflow for
    /// long ranges).
    pub fn diagnostics(&self, k_max: usize) -> Result<Diagnostics> {
        diagnostics(&self.quadruple, k_max)
    }
}

/// `C_k` sequence of an admissible quadruple. `i ∈ σ(α)` is refused unless
/// `allow_i` is set, in which case a warning is recorded.
pub fn c_sequence(q: &AdmissibleQuadruple, k_max: usize, allow_i: bool) -> Result<DiscretePotential> {
    let mut warnings = Vec::new();
    if q.n() > 0 {
        let flags = q.spectral_flags()?;
        if flags.contains_zero {
            return Err(Error::SpectralCondition("0 ∈ σ(α)".into()));
        }
        if flags.contains_i {
            if !allow_i {
                return Err(Error::SpectralCondition("i ∈ σ(α)".into()));
            }
            warnings.push("i ∈ σ(α): asymptotic guarantees do not apply".into());
        }
    }
    let Sequence {
        c,
        r_inv_psi,
        r_lambda_min,
    } = normalized_sequence(q, k_max)?;
    let invariants = check_invariants(&c, q.m1())?;
    if !invariants.ok {
        warnings.push(format!(
            "C_k invariants violated: hermitian {:.2e}, involution {:.2e}, signature {}",
            invariants.max_hermitian_defect, invariants.max_involution_defect, invariants.signature_ok
        ));
    }
    Ok(DiscretePotential {
        quadruple: q.clone(),
        c,
        r_inv_psi,
        r_lambda_min,
        invariants,
        riccati: None,
        weyl_mismatch: 0.0,
        warnings,
    })
}

/// Literal diagnostic sequences.
#[derive(Debug, Clone)]
pub struct Diagnostics {
    pub lambda: Vec<CMatrix>,
    pub s: Vec<CMatrix>,
    /// `(I − iα⁻¹)^{−k}S_k(I + iα*⁻¹)^{−k}`.
    pub r: Vec<CMatrix>,
    /// Increment form of `R_k`.
    pub r_increment: Vec<CMatrix>,
    /// `(I + iα⁻¹)^{−k}S_k(I − iα*⁻¹)^{−k}`.
    pub q: Vec<CMatrix>,
    pub q_increment: Vec<CMatrix>,
    /// `(α − iI)^{−k}(α + iI)^kϑ1`.
    pub psi: Vec<CMatrix>,
}

pub fn diagnostics(q: &Quadruple, k_max: usize) -> Result<Diagnostics> {
    let n = q.n();
    let (lambda, s) = literal_sequence(q, k_max)?;
    if n == 0 {
        let e = vec![CMatrix::zeros(0, 0); k_max + 1];
        return Ok(Diagnostics {
            lambda,
            s,
            r: e.clone(),
            r_increment: e.clone(),
            q: e.clone(),
            q_increment: e,
            psi: vec![CMatrix::zeros(0, q.m1()); k_max + 1],
        });
    }
    let id = CMatrix::identity(n);
    let ai = alpha_inverse(&q.alpha)?;
    let am = inverse(&(&q.alpha - &id.scale(I)), "α − iI")?;
    let ap = q.alpha.shift(I);
    let amp = inverse(&(&id + &ai.scale(I)), "I + iα⁻¹")?;
    let amm = inverse(&(&id - &ai.scale(I)), "I − iα⁻¹")?;
    let j_minus_i = {
        let mut d = CMatrix::signature(q.m1(), q.m2());
        d -= &CMatrix::identity(q.m());
        d
    };

    let mut r = Vec::with_capacity(k_max + 1);
    let mut qs = Vec::with_capacity(k_max + 1);
    let mut r_inc = vec![q.s0.clone()];
    let mut q_inc = vec![q.s0.clone()];
    let mut psi = vec![q.theta1.clone()];
    // (I − iα⁻¹)^{−k} and (I + iα⁻¹)^{−k}
    let mut pm = id.clone();
    let mut pp = id.clone();
    // (α − iI)^{−k−1}(α + iI)^k ϑ1
    let mut g = &am * &q.theta1;
    for k in 0..=k_max {
        r.push((&(&pm * &s[k]) * &pm.adjoint()).hermitian_part());
        qs.push((&(&pp * &s[k]) * &pp.adjoint()).hermitian_part());
        if k == k_max {
            break;
        }
        let inc_r = (&g * &g.adjoint()).scale_real(2.0);
        r_inc.push((&r_inc[k] + &inc_r).hermitian_part());
        let pp_next = &pp * &amp;
        let h = &(&pp_next * &ai) * &lambda[k];
        let inc_q = &(&h * &j_minus_i) * &h.adjoint();
        q_inc.push((&q_inc[k] + &inc_q).hermitian_part());
        psi.push(&(&am * &ap) * &psi[k]);
        g = &(&am * &ap) * &g;
        pm = &pm * &amm;
        pp = pp_next;
        check_finite(&r_inc[k + 1], "R_k", k + 1)?;
    }
    Ok(Diagnostics {
        lambda,
        s,
        r,
        r_increment: r_inc,
        q: qs,
        q_increment: q_inc,
        psi,
    })
}

/// `λ_min(R_k)` for `k = 0..K` from the increment form
/// `R_{k+1} = R_k + 2G_kG_k*`, `G_k = (α − iI)^{−k−1}(α + iI)^kϑ1`, `R_0 = S0`.
/// Entries past an overflow are `+∞`.
pub fn r_lambda_min_increment(q: &Quadruple, k_max: usize) -> Result<Vec<f64>> {
    if q.n() == 0 {
        return Ok(vec![f64::INFINITY; k_max]);
    }
    let am = inverse(&q.alpha.shift(-I), "α − iI")?;
    let step = &am * &q.alpha.shift(I);
    let mut r = q.s0.clone();
    let mut g = &am * &q.theta1;
    let mut out = Vec::with_capacity(k_max);
    for _ in 0..k_max {
        if !r.is_finite() {
            out.push(f64::INFINITY);
            continue;
        }
        out.push(eigh(&r)?.0[0]);
        r = (&r + &(&g * &g.adjoint()).scale_real(2.0)).hermitian_part();
        g = &step * &g;
    }
    Ok(out)
}

/// `φ(z) = −iϑ1*S0⁻¹(zI + γ)⁻¹ϑ2`, `γ = α − iϑ2ϑ2*S0⁻¹`.
pub fn weyl_discrete(q: &Quadruple, z: C64) -> Result<CMatrix> {
    if q.n() == 0 {
        return Ok(CMatrix::zeros(q.m1(), q.m2()));
    }
    let s_inv_t1 = solve_linear(&q.s0, &q.theta1)?;
    let s_inv_t2 = solve_linear(&q.s0, &q.theta2)?;
    let gamma = &q.alpha - &(&q.theta2 * &s_inv_t2.adjoint()).scale(I);
    let distance = spectrum(&gamma)?.distance_to(-z);
    if distance <= 1e-10 * gamma.norm().max(1.0) {
        return Err(Error::NearPole { z, distance });
    }
    let y = solve_linear(&gamma.shift(z), &q.theta2).map_err(|_| Error::NearPole { z, distance })?;
    Ok((&s_inv_t1.adjoint() * &y).scale(-I))
}

/// Riccati solve, quadruple, `{C_k}`.
pub fn solve_inverse_discrete(r: &Realization, k_max: usize) -> Result<DiscretePotential> {
    if r.convention() != Convention::Discrete {
        return Err(Error::InvalidArgument(
            "discrete inversion needs a discrete-convention realization".into(),
        ));
    }
    if r.n() == 0 {
        let q = AdmissibleQuadruple::new(Quadruple::empty(r.m1(), r.m2()))?;
        return c_sequence(&q, k_max, false);
    }
    let (sol, q) = crate::quadruple::recover(r)?;
    let mismatch = probe_mismatch_with(r, |z| weyl_discrete(&q, z))?;
    let mut p = c_sequence(&q, k_max, false)?;
    p.riccati = Some(sol);
    p.weyl_mismatch = mismatch;
    Ok(p)
}

#[derive(Debug, Clone, Serialize)]
pub struct AsymptoticsReport {
    /// `‖C_k − j‖`.
    pub distance: Vec<f64>,
    /// `‖C11 − I‖, ‖C12‖, ‖C21‖, ‖C22 + I‖` per k.
    pub blocks: Vec<[f64; 4]>,
    pub r_inv_psi: Vec<f64>,
    pub threshold: f64,
    /// First k from which `‖C_k − j‖` stays below the threshold.
    pub settled_at: Option<usize>,
    pub tail_ok: bool,
}

pub fn asymptotics_check(p: &DiscretePotential) -> AsymptoticsReport {
    let (m1, m2) = (p.m1(), p.m2());
    let j = p.signature();
    let distance: Vec<f64> = p.c.iter().map(|c| (c - &j).norm()).collect();
    let blocks =
        p.c.iter()
            .map(|c| {
                let c11 = &c.block(0, 0, m1, m1) - &CMatrix::identity(m1);
                let c22 = &c.block(m1, m1, m2, m2) + &CMatrix::identity(m2);
                [
                    c11.norm(),
                    c.block(0, m1, m1, m2).norm(),
                    c.block(m1, 0, m2, m1).norm(),
                    c22.norm(),
                ]
            })
            .collect();
    let d0 = distance.first().copied().unwrap_or(0.0);
    let threshold = if d0 > 0.0 { 1e-6 * d0 } else { 1e-6 };
    let settled_at = distance
        .iter()
        .rposition(|&d| d >= threshold)
        .map_or(Some(0), |k| (k + 1 < distance.len()).then_some(k + 1));
    AsymptoticsReport {
        tail_ok: distance.last().is_none_or(|&d| d < threshold),
        distance,
        blocks,
        r_inv_psi: p.r_inv_psi.clone(),
        threshold,
        settled_at,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Which {
    Theta1,
    Theta2,
}

#[derive(Debug, Clone, Serialize)]
pub struct Reduction {
    pub quadruple: AdmissibleQuadruple,
    pub which: Which,
    pub n_before: usize,
    pub n_after: usize,
    /// The Krylov subspace was trivial and a fixed quadruple generating
    /// `C_k ≡ j` was substituted.
    pub replaced: bool,
}

/// Restricts the quadruple to the span of `α^kϑ` (ϑ selected by `which`).
pub fn reduce_quadruple(q: &AdmissibleQuadruple, which: Which) -> Result<Reduction> {
    let n = q.n();
    let theta = match which {
        Which::Theta1 => &q.theta1,
        Which::Theta2 => &q.theta2,
    };
    let basis = krylov_basis(&q.alpha, theta);
    let nt = basis.cols();
    if nt == n {
        return Ok(Reduction {
            quadruple: q.clone(),
            which,
            n_before: n,
            n_after: n,
            replaced: false,
        });
    }
    if nt == 0 {
        return Ok(Reduction {
            quadruple: trivial_generator(q.m1(), q.m2())?,
            which,
            n_before: n,
            n_after: 1,
            replaced: true,
        });
    }
    let norm = q.normalize_s0()?;
    // the Krylov space of the congruent quadruple is S0^{-1/2}L0
    let basis = krylov_basis(
        &norm.alpha,
        match which {
            Which::Theta1 => &norm.theta1,
            Which::Theta2 => &norm.theta2,
        },
    );
    let full = pivoted_qr(&basis).q;
    let perp = full.columns(nt..n);
    let u = perp.hstack(&basis).adjoint();
    let k = n - nt;
    let alpha = (&(&u * &norm.alpha) * &u.adjoint()).block(k, k, nt, nt);
    let t1 = (&u * &norm.theta1).rows_range(k..n);
    let t2 = (&u * &norm.theta2).rows_range(k..n);
    let reduced = AdmissibleQuadruple::new(Quadruple::new(alpha, CMatrix::identity(nt), t1, t2)?)?;
    Ok(Reduction {
        quadruple: reduced,
        which,
        n_before: n,
        n_after: nt,
        replaced: false,
    })
}

/// `{2i, 1, 2e_1, 0}`: admissible, `i ∉ σ(α)`, and generates `C_k ≡ j`.
/// With `m1 = 0` the empty quadruple is the only option.
pub fn trivial_generator(m1: usize, m2: usize) -> Result<AdmissibleQuadruple> {
    if m1 == 0 {
        return AdmissibleQuadruple::new(Quadruple::empty(m1, m2));
    }
    let mut t1 = CMatrix::zeros(1, m1);
    t1[(0, 0)] = C64::new(2.0, 0.0);
    let alpha = CMatrix::scalar(C64::new(0.0, 2.0));
    AdmissibleQuadruple::new(Quadruple::new(alpha, CMatrix::identity(1), t1, CMatrix::zeros(1, m2))?)
}

/// Alternates the two one-step reductions until both pairs are
/// controllable. Returns the final quadruple and the steps taken; stops
/// after `2n + 2` steps.
#[derive(Debug, Clone, Serialize)]
pub struct ReductionTrace {
    pub quadruple: AdmissibleQuadruple,
    pub steps: Vec<Reduction>,
    pub strongly_admissible: bool,
}

pub fn reduce_fully(q: &AdmissibleQuadruple) -> Result<ReductionTrace> {
    let mut cur = q.clone();
    let mut steps = Vec::new();
    for _ in 0..(2 * q.n() + 2) {
        if cur.controllable_theta1 && cur.controllable_theta2 {
            return Ok(ReductionTrace {
                quadruple: cur,
                steps,
                strongly_admissible: true,
            });
        }
        let which = if cur.controllable_theta1 {
            Which::Theta2
        } else {
            Which::Theta1
        };
        let red = reduce_quadruple(&cur, which)?;
        cur = red.quadruple.clone();
        let replaced = red.replaced;
        steps.push(red);
        if replaced {
            break;
        }
    }
    let ok = cur.controllable_theta1 && cur.controllable_theta2;
    Ok(ReductionTrace {
        quadruple: cur,
        steps,
        strongly_admissible: ok,
    })
}

/// `‖C_k − C̃_k‖` maximised over the common range.
pub fn sup_deviation(a: &[CMatrix], b: &[CMatrix]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matcore::c64;
    use crate::random;
    use crate::realization::{random_realization, scalar, similarity};

    fn sqrt2() -> C64 {
        c64(2f64.sqrt(), 0.0)
    }

    fn q_sqrt2() -> AdmissibleQuadruple {
        AdmissibleQuadruple::new(Quadruple::scalar(c64(0.0, 2.0), c64(1.0, 0.0), sqrt2(), sqrt2())).unwrap()
    }

    fn q_sqrt3() -> AdmissibleQuadruple {
        AdmissibleQuadruple::new(Quadruple::scalar(
            c64(0.0, 2.0),
            c64(1.0, 0.0),
            c64(3f64.sqrt(), 0.0),
            I,
        ))
        .unwrap()
    }

    fn random_quadruple(seed: u64, n: usize, m1: usize, m2: usize) -> AdmissibleQuadruple {
        let mut rng = random::rng(seed);
        let r = random_realization(&mut rng, Convention::Discrete, n, m1, m2);
        crate::quadruple::recover(&r).unwrap().1
    }

    /// Plain scalar loop over (Λ, S) with num-complex arithmetic.
    fn scalar_oracle(a: C64, s0: C64, t1: C64, t2: C64, k_max: usize) -> Vec<[[C64; 2]; 2]> {
        let ai = C64::new(1.0, 0.0) / a;
        let (mut l1, mut l2, mut s) = (t1, t2, s0);
        let f = |l1: C64, l2: C64, s: C64| {
            let l = [l1, l2];
            let mut m = [[C64::new(0.0, 0.0); 2]; 2];
            for r in 0..2 {
                for c in 0..2 {
                    m[r][c] = l[r].conj() * l[c] / s;
                }
            }
            m
        };
        let mut out = Vec::new();
        for _ in 0..k_max {
            let fk = f(l1, l2, s);
            let s_next = s + ai * s * ai.conj() + ai * (l1 * l1.conj() - l2 * l2.conj()) * ai.conj();
            let n1 = l1 + I * ai * l1;
            let n2 = l2 - I * ai * l2;
            let fn_ = f(n1, n2, s_next);
            let j = [1.0, -1.0];
            let mut c = [[C64::new(0.0, 0.0); 2]; 2];
            for r in 0..2 {
                for cc in 0..2 {
                    c[r][cc] = fk[r][cc] - fn_[r][cc]
                        + if r == cc {
                            C64::new(j[r], 0.0)
                        } else {
                            C64::new(0.0, 0.0)
                        };
                }
            }
            out.push(c);
            l1 = n1;
            l2 = n2;
            s = s_next;
        }
        out
    }

    #[test]
    fn recursion_step_examples() {
        let q = q_sqrt2();
        let (l, s) = recursion_step(&q, &q.lambda0(), &q.s0).unwrap();
        assert!((l[(0, 0)] - sqrt2() * 1.5).norm() < 1e-15);
        assert!((l[(0, 1)] - sqrt2() * 0.5).norm() < 1e-15);
        assert!((s[(0, 0)] - c64(1.25, 0.0)).norm() < 1e-15);
        let l3 = explicit_lambda(&q, 3).unwrap();
        assert!((l3[(0, 0)] - sqrt2() * 3.375).norm() < 1e-14);
        assert!((l3[(0, 1)] - sqrt2() * 0.125).norm() < 1e-15);
        assert_eq!(explicit_lambda(&q, 0).unwrap(), q.lambda0());
        let mut sing = (*q).clone();
        sing.alpha = CMatrix::zeros(1, 1);
        assert!(recursion_step(&sing, &q.lambda0(), &q.s0).is_err());
    }

    #[test]
    fn explicit_matches_recursion() {
        let q = random_quadruple(5, 3, 2, 1);
        let (lambdas, _) = literal_sequence(&q, 30).unwrap();
        for (k, l) in lambdas.iter().enumerate() {
            let e = explicit_lambda(&q, k).unwrap();
            assert!((&e - l).norm() <= 1e-10 * l.norm(), "k = {k}");
        }
    }

    #[test]
    fn scalar_sequence_matches_oracle() {
        let q = q_sqrt2();
        let p = c_sequence(&q, 20, false).unwrap();
        let want = scalar_oracle(c64(0.0, 2.0), c64(1.0, 0.0), sqrt2(), sqrt2(), 20);
        for (c, w) in p.c.iter().zip(&want) {
            for r in 0..2 {
                for cc in 0..2 {
                    assert!((c[(r, cc)] - w[r][cc]).norm() < 1e-10);
                }
            }
        }
        assert!(p.invariants.ok);
        assert!(asymptotics_check(&p).tail_ok);
    }

    #[test]
    fn normalized_matches_literal() {
        for seed in 0..5 {
            let q = random_quadruple(40 + seed, 2 + seed as usize % 3, 1 + seed as usize % 2, 2);
            // the literal form loses about a digit per step on these inputs
            let a = c_sequence(&q, 6, false).unwrap();
            let b = c_sequence_literal(&q, 6).unwrap();
            assert!(sup_deviation(&a.c, &b) < 1e-9, "seed {seed}");
            let long = c_sequence(&q, 200, false).unwrap();
            assert!(long.invariants.ok, "seed {seed}");
            assert!(a.invariants.ok);
        }
    }

    #[test]
    fn zero_theta_gives_j() {
        let mut q = (*q_sqrt2()).clone();
        q.theta2 = CMatrix::zeros(1, 1);
        q.alpha = CMatrix::scalar(I);
        // α = i: identity with ϑ1 = √2 needs α − α* = 2i
        let q = AdmissibleQuadruple::new(q).unwrap();
        let p = c_sequence(&q, 10, true).unwrap();
        assert!(!p.warnings.is_empty());
        let j = p.signature();
        assert!(p.c.iter().all(|c| (c - &j).norm() < 1e-14));

        let q = AdmissibleQuadruple::new(Quadruple::scalar(
            c64(0.0, 2.0),
            c64(1.0, 0.0),
            c64(0.0, 0.0),
            c64(2.0, 0.0),
        ))
        .unwrap();
        let p = c_sequence(&q, 10, false).unwrap();
        assert!(p.c.iter().all(|c| (c - &j).norm() < 1e-14));
        assert!(asymptotics_check(&p).distance.iter().all(|&d| d < 1e-14));
    }

    #[test]
    fn lambda_min_matches_increments() {
        let q = random_quadruple(11, 3, 1, 2);
        let d = diagnostics(&q, 8).unwrap();
        let l = r_lambda_min_increment(&q, 9).unwrap();
        let p = c_sequence(&q, 9, true).unwrap();
        for k in 0..=8 {
            let want = eigh(&d.r_increment[k]).unwrap().0[0];
            assert!((l[k] - want).abs() <= 1e-10 * d.r_increment[k].norm());
            assert!((p.r_lambda_min[k] - want).abs() <= 1e-9 * want);
        }
        let long = c_sequence(&q, 200, true).unwrap();
        assert!(long.r_lambda_min.windows(2).all(|w| w[1] >= w[0] * (1.0 - 1e-12)));
    }

    #[test]
    fn diagnostics_identities() {
        let q = random_quadruple(11, 3, 1, 2);
        // definition forms cancel geometrically large factors, so the
        // comparison is kept to short ranges
        let d = diagnostics(&q, 8).unwrap();
        assert_eq!(d.r[0], q.s0);
        for k in 0..=8 {
            let s = &d.s[k];
            let l = &d.lambda[k];
            let def = &(&(&q.alpha * s) - &(s * &q.alpha.adjoint())) - &(l * &l.adjoint()).scale(I);
            let sc = q.alpha.norm() * s.norm() + l.norm() * l.norm();
            assert!(def.norm() <= 1e-9 * sc, "S identity k = {k}");

            let r = &d.r[k];
            let pt = d.psi[k].hstack(&q.theta2);
            let def = &(&(&q.alpha * r) - &(r * &q.alpha.adjoint())) - &(&pt * &pt.adjoint()).scale(I);
            let sc = q.alpha.norm() * r.norm() + pt.norm() * pt.norm();
            assert!(def.norm() <= 1e-9 * sc, "R identity k = {k}");

            assert!((r - &d.r_increment[k]).norm() <= 1e-9 * r.norm());
            assert!((&d.q[k] - &d.q_increment[k]).norm() <= 1e-9 * d.q[k].norm());
            if k > 0 {
                let (vals, _) = eigh(&(&d.r[k] - &d.r[k - 1])).unwrap();
                assert!(vals[0] >= -1e-10 * r.norm());
            }
        }
        let ex = diagnostics(&q_sqrt2(), 3).unwrap();
        assert!((ex.r[1][(0, 0)] - c64(5.0, 0.0)).norm() < 1e-13);
        assert!((ex.q[0][(0, 0)] - c64(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn r_grows() {
        let q = random_quadruple(12, 2, 1, 1);
        let d = diagnostics(&q, 30).unwrap();
        let lmin = |m: &CMatrix| eigh(m).unwrap().0[0];
        let n = q.n();
        let eps = lmin(&d.r[n]) - lmin(&d.r[0]);
        assert!(eps > 0.0);
        for k in 0..=(30 - n) {
            assert!(lmin(&d.r[k + n]) - lmin(&d.r[k]) >= 0.5 * eps.min(1.0));
        }
    }

    #[test]
    fn weyl_examples() {
        let q = q_sqrt3();
        for z in [c64(1.0, 2.0), c64(0.0, 4.0), c64(-2.0, 0.3)] {
            let f = weyl_discrete(&q, z).unwrap();
            assert!((f[(0, 0)] - c64(3f64.sqrt(), 0.0) / (z + I)).norm() < 1e-14);
        }
        assert!(matches!(weyl_discrete(&q, -I), Err(Error::NearPole { .. })));
        let mut q0 = (*q).clone();
        q0.theta2 = CMatrix::zeros(1, 1);
        assert_eq!(weyl_discrete(&q0, c64(0.0, 2.0)).unwrap(), CMatrix::zeros(1, 1));
    }

    #[test]
    fn scalar_pipeline() {
        let r = scalar(Convention::Discrete, -I, c64(1.0, 0.0), c64(3f64.sqrt(), 0.0));
        let p = solve_inverse_discrete(&r, 60).unwrap();
        let q = &p.quadruple;
        assert!((q.alpha[(0, 0)] - c64(0.0, 2.0)).norm() < 1e-12);
        assert!((q.s0[(0, 0)] - c64(1.0, 0.0)).norm() < 1e-12);
        assert!((q.theta1[(0, 0)] - c64(3f64.sqrt(), 0.0)).norm() < 1e-12);
        assert!((q.theta2[(0, 0)] - I).norm() < 1e-12);
        assert!(p.weyl_mismatch < 1e-12);
        let a = asymptotics_check(&p);
        assert!(a.tail_ok && a.settled_at.unwrap() <= 30);
    }

    #[test]
    fn i_in_spectrum_is_refused() {
        let r = scalar(Convention::Discrete, c64(0.0, 0.0), c64(1.0, 0.0), c64(1.0, 0.0));
        assert!(matches!(
            solve_inverse_discrete(&r, 10),
            Err(Error::SpectralCondition(_))
        ));
    }

    #[test]
    fn random_pipelines() {
        for seed in 0..6 {
            let mut rng = random::rng(500 + seed);
            let n = 1 + seed as usize % 3;
            let r = random_realization(&mut rng, Convention::Discrete, n, 2, 1 + seed as usize % 2);
            let p = solve_inverse_discrete(&r, default_k(n)).unwrap();
            assert!(p.weyl_mismatch < 1e-8, "seed {seed}");
            assert!(p.invariants.ok, "seed {seed}");
            let a = asymptotics_check(&p);
            assert!(a.tail_ok, "seed {seed} last {:?}", a.distance.last());
            let last = a.blocks.last().unwrap();
            assert!(last.iter().all(|&b| b < 1e-5));
            assert!(p.r_inv_psi.last().unwrap() < &1e-3);

            let t = random::well_conditioned(&mut rng, n, 100.0);
            let p2 = solve_inverse_discrete(&similarity(&r, &t).unwrap(), default_k(n)).unwrap();
            assert!(sup_deviation(&p.c, &p2.c) < 1e-9 * 101.0);
        }
    }

    #[test]
    fn empty_state_space() {
        let r = Realization::trivial(Convention::Discrete, 1, 2);
        let p = solve_inverse_discrete(&r, 5).unwrap();
        assert!(p.c.iter().all(|c| *c == CMatrix::signature(1, 2)));
    }

    #[test]
    fn reduction_pass_through_and_trivial() {
        let q = q_sqrt2();
        let red = reduce_quadruple(&q, Which::Theta1).unwrap();
        assert_eq!(red.n_after, 1);
        assert_eq!(red.quadruple, q);

        let q0 = AdmissibleQuadruple::new(Quadruple::scalar(
            c64(0.0, 2.0),
            c64(1.0, 0.0),
            c64(0.0, 0.0),
            c64(2.0, 0.0),
        ))
        .unwrap();
        let red = reduce_quadruple(&q0, Which::Theta1).unwrap();
        assert!(red.replaced);
        assert!(red.quadruple.theta2.norm() == 0.0);
        let p = c_sequence(&red.quadruple, 10, false).unwrap();
        assert!(p.c.iter().all(|c| (c - &p.signature()).norm() < 1e-14));
    }

    /// Pads a strongly admissible quadruple with coordinates outside the
    /// Krylov space of ϑ1, then hides the block structure by a unitary.
    fn padded(seed: u64) -> (AdmissibleQuadruple, AdmissibleQuadruple) {
        let base = random_quadruple(seed, 2, 1, 1).normalized().unwrap();
        let mut rng = random::rng(seed + 1);
        let extra = 2;
        let (m1, m2) = (1, 1);
        let n = base.n() + extra;
        let kappa = random::gaussian_matrix(&mut rng, extra, m2);
        // padding eigenvalues far from 0 keep the uncontrollable modes from
        // amplifying rounding errors faster than S_k grows
        let h = random::gaussian_matrix(&mut rng, extra, extra)
            .hermitian_part()
            .shift(C64::new(8.0, 0.0));
        let a11 = &h + &(&kappa * &kappa.adjoint()).scale(I * 0.5);
        let a21 = (&base.theta2 * &kappa.adjoint()).scale(I);
        let mut alpha = CMatrix::zeros(n, n);
        alpha.set_block(0, 0, &a11);
        alpha.set_block(extra, 0, &a21);
        alpha.set_block(extra, extra, &base.alpha);
        let t1 = CMatrix::zeros(extra, m1).vstack(&base.theta1);
        let t2 = kappa.vstack(&base.theta2);
        let u = random::unitary(&mut rng, n);
        let q = Quadruple::new(&(&u * &alpha) * &u.adjoint(), CMatrix::identity(n), &u * &t1, &u * &t2).unwrap();
        (AdmissibleQuadruple::new(q).unwrap(), base)
    }

    #[test]
    fn reduction_preserves_c_k() {
        for seed in [3u64, 9, 27] {
            let (q, base) = padded(seed);
            assert!(!q.controllable_theta1);
            let red = reduce_quadruple(&q, Which::Theta1).unwrap();
            assert_eq!(red.n_after, base.n());
            let a = c_sequence(&q, 40, true).unwrap();
            let b = c_sequence(&red.quadruple, 40, true).unwrap();
            let c = c_sequence(&base, 40, true).unwrap();
            assert!(sup_deviation(&a.c, &b.c) < 1e-9, "seed {seed}");
            assert!(sup_deviation(&b.c, &c.c) < 1e-9, "seed {seed}");
            let trace = reduce_fully(&q).unwrap();
            assert!(trace.strongly_admissible);
        }
    }
}
