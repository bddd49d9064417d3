//! The two algebraic Riccati equations of the inverse procedures:
//!
//! continuous: `X C*C X + i(AX − XA*) − BB* = 0`
//! discrete:   `X C*C X − i(AX − XA*) − BB* = 0`
//!
//! Both are rewritten as `G*X + XG − XRX + Q = 0` with `G = iA*` (resp.
//! `−iA*`), `R = C*C`, `Q = BB*`; the positive solution is the stabilizing
//! one, so `G − RX` is Hurwitz.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::matcore::{is_positive_definite, schur, solve_linear, CMatrix, C64, I};
use crate::random;
use crate::realization::{Convention, Realization};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Continuous,
    Discrete,
}

impl From<Convention> for Variant {
    fn from(c: Convention) -> Self {
        match c {
            Convention::Continuous => Variant::Continuous,
            Convention::Discrete => Variant::Discrete,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Hamiltonian,
    NewtonKleinman,
    Trivial,
}

#[derive(Debug, Clone)]
pub struct RiccatiProblem {
    pub a: CMatrix,
    pub b: CMatrix,
    pub c: CMatrix,
    pub variant: Variant,
}

#[derive(Debug, Clone)]
pub struct RiccatiSolution {
    pub x: CMatrix,
    pub residual_norm: f64,
    pub iterations: usize,
    pub method: Method,
}

const MAX_ITER: usize = 200;

impl RiccatiProblem {
    pub fn new(a: CMatrix, b: CMatrix, c: CMatrix, variant: Variant) -> Result<Self> {
        let n = a.rows();
        if !a.is_square() || b.rows() != n || c.cols() != n {
            return Err(Error::DimensionMismatch("Riccati data not conformable".into()));
        }
        Ok(Self { a, b, c, variant })
    }

    pub fn from_realization(r: &Realization) -> Self {
        Self {
            a: r.a().clone(),
            b: r.b().clone(),
            c: r.c().clone(),
            variant: r.convention().into(),
        }
    }

    pub fn n(&self) -> usize {
        self.a.rows()
    }

    fn sign(&self) -> f64 {
        match self.variant {
            Variant::Continuous => 1.0,
            Variant::Discrete => -1.0,
        }
    }

    /// Left-hand side of the equation at `X`.
    pub fn residual_matrix(&self, x: &CMatrix) -> CMatrix {
        let cc = &self.c.adjoint() * &self.c;
        let quad = &(x * &cc) * x;
        let comm = &(&self.a * x) - &(x * &self.a.adjoint());
        let lin = comm.scale(I * self.sign());
        &(&quad + &lin) - &(&self.b * &self.b.adjoint())
    }

    pub fn residual(&self, x: &CMatrix) -> f64 {
        self.residual_matrix(x).norm()
    }

    /// `‖X‖²‖C‖² + ‖A‖‖X‖ + ‖B‖²`, the natural size of the residual terms.
    pub fn scale(&self, x: &CMatrix) -> f64 {
        let nx = x.norm();
        let nc = self.c.norm();
        let nb = self.b.norm();
        nx * nx * nc * nc + self.a.norm() * nx + nb * nb
    }

    /// `(G, R, Q)` of the standard form.
    fn standard(&self) -> (CMatrix, CMatrix, CMatrix) {
        let g = self.a.adjoint().scale(I * self.sign());
        let r = &self.c.adjoint() * &self.c;
        let q = &self.b * &self.b.adjoint();
        (g, r, q)
    }

    fn realization(&self) -> Realization {
        let conv = match self.variant {
            Variant::Continuous => Convention::Continuous,
            Variant::Discrete => Convention::Discrete,
        };
        Realization::new(conv, self.a.clone(), self.b.clone(), self.c.clone()).expect("conformable by construction")
    }

    pub fn require_minimal(&self) -> Result<()> {
        self.realization().require_minimal()
    }
}

/// Solves `F*Y + YF = W` by Kronecker vectorisation.
pub fn lyapunov(f: &CMatrix, w: &CMatrix) -> Result<CMatrix> {
    let n = f.rows();
    let nn = n * n;
    let mut k = CMatrix::zeros(nn, nn);
    for i in 0..n {
        for j in 0..n {
            let row = i * n + j;
            for l in 0..n {
                // (F*Y)_{ij} = Σ_l conj(F_{li}) Y_{lj}
                k[(row, l * n + j)] += f[(l, i)].conj();
                // (YF)_{ij} = Σ_l Y_{il} F_{lj}
                k[(row, i * n + l)] += f[(l, j)];
            }
        }
    }
    let rhs = CMatrix::from_fn(nn, 1, |r, _| w[(r / n, r % n)]);
    let y = solve_linear(&k, &rhs)?;
    Ok(CMatrix::from_fn(n, n, |i, j| y[(i * n + j, 0)]))
}

fn newton_step(g: &CMatrix, r: &CMatrix, q: &CMatrix, x: &CMatrix) -> Result<CMatrix> {
    let closed = g - &(r * x);
    let rhs = -&(q + &(&(x * r) * x));
    Ok(lyapunov(&closed, &rhs)?.hermitian_part())
}

/// Up to five Newton steps, kept only while the residual decreases.
fn refine(p: &RiccatiProblem, mut x: CMatrix, mut res: f64) -> (CMatrix, f64, usize) {
    let (g, r, q) = p.standard();
    let mut steps = 0;
    for _ in 0..5 {
        let Ok(next) = newton_step(&g, &r, &q, &x) else { break };
        let next_res = p.residual(&next);
        if !(next_res < res) {
            break;
        }
        steps += 1;
        let done = next_res <= 1e-15 * p.scale(&next);
        x = next;
        res = next_res;
        if done {
            break;
        }
    }
    (x, res, steps)
}

fn trivial(p: &RiccatiProblem) -> Option<RiccatiSolution> {
    (p.n() == 0).then(|| RiccatiSolution {
        x: CMatrix::zeros(0, 0),
        residual_norm: 0.0,
        iterations: 0,
        method: Method::Trivial,
    })
}

/// Stabilizing solution from the stable invariant subspace of the
/// Hamiltonian `[[G, −R], [−Q, −G*]]`, then Newton refinement.
pub fn solve_hamiltonian(p: &RiccatiProblem) -> Result<RiccatiSolution> {
    if let Some(s) = trivial(p) {
        return Ok(s);
    }
    let n = p.n();
    let (g, r, q) = p.standard();
    let h = CMatrix::blocks(&g, &-&r, &-&q, &-&g.adjoint());
    let mut sch = schur(&h)?;
    let stable = sch.reorder(|z| z.re < 0.0);
    if stable != n {
        return Err(Error::SpectralCondition(format!(
            "Hamiltonian has {stable} stable eigenvalues, expected {n}"
        )));
    }
    let u1 = sch.q.block(0, 0, n, n);
    let u2 = sch.q.block(n, 0, n, n);
    // X U1 = U2  ⇔  U1* X* = U2*
    let x = solve_linear(&u1.adjoint(), &u2.adjoint())?.adjoint().hermitian_part();
    let res = p.residual(&x);
    let (x, res, steps) = refine(p, x, res);
    Ok(RiccatiSolution {
        x,
        residual_norm: res,
        iterations: 1 + steps,
        method: Method::Hamiltonian,
    })
}

/// Newton–Kleinman iteration from a Bass-type stabilizing start.
pub fn solve_newton_kleinman(p: &RiccatiProblem) -> Result<RiccatiSolution> {
    if let Some(s) = trivial(p) {
        return Ok(s);
    }
    let (g, r, q) = p.standard();
    // (G+βI) is anti-stable for β > ‖G‖, so Z below is positive definite and
    // G − R Z⁻¹ is Hurwitz.
    let beta = 1.0 + g.norm();
    let shifted = g.shift(C64::new(beta, 0.0));
    let z = lyapunov(&shifted.adjoint(), &r.scale_real(2.0))?.hermitian_part();
    let mut x = solve_linear(&z, &CMatrix::identity(p.n()))?.hermitian_part();
    let mut res = p.residual(&x);
    let mut best = res;
    let mut stagnant = 0;
    let mut iterations = 0;
    while iterations < MAX_ITER {
        iterations += 1;
        x = newton_step(&g, &r, &q, &x)?;
        res = p.residual(&x);
        if !res.is_finite() {
            break;
        }
        if res <= 1e-12 * p.scale(&x) {
            let (xr, rr, _) = refine(p, x, res);
            x = xr;
            res = rr;
            break;
        }
        if res < 0.5 * best {
            best = res;
            stagnant = 0;
        } else {
            stagnant += 1;
            if stagnant >= 3 {
                break;
            }
        }
    }
    if !res.is_finite() || res > 1e-8 * p.scale(&x) {
        return Err(Error::NoConvergence {
            what: "Newton-Kleinman iteration",
            iterations,
            residual: res,
        });
    }
    Ok(RiccatiSolution {
        x,
        residual_norm: res,
        iterations,
        method: Method::NewtonKleinman,
    })
}

/// The unique positive solution for a minimal triple.
pub fn solve_max_positive(p: &RiccatiProblem) -> Result<RiccatiSolution> {
    p.require_minimal()?;
    if let Some(s) = trivial(p) {
        return Ok(s);
    }
    let primary = solve_hamiltonian(p);
    let good = |s: &RiccatiSolution| s.residual_norm <= 1e-10 * p.scale(&s.x) && is_positive_definite(&s.x).positive;
    let sol = match primary {
        Ok(s) if good(&s) => s,
        _ => {
            let s = solve_newton_kleinman(p)?;
            if !good(&s) {
                if !is_positive_definite(&s.x).positive {
                    return Err(Error::NotPositive("Riccati solution".into()));
                }
                return Err(Error::NoConvergence {
                    what: "Riccati solver",
                    iterations: s.iterations,
                    residual: s.residual_norm,
                });
            }
            s
        }
    };
    Ok(sol)
}

/// Deviation statistics of the Riccati solution under random triple
/// perturbations of total size δ/2.
#[derive(Debug, Clone, Serialize)]
pub struct SensitivityStats {
    pub delta: f64,
    pub max: f64,
    pub mean: f64,
    pub median: f64,
    pub deviations: Vec<f64>,
    pub skipped: usize,
}

pub fn sensitivity_probe(p: &RiccatiProblem, delta: f64, trials: usize, seed: u64) -> Result<SensitivityStats> {
    if !(delta >= 0.0) {
        return Err(Error::InvalidArgument(format!("delta = {delta} must be >= 0")));
    }
    let base = solve_max_positive(p)?;
    let r = p.realization();
    let outcomes: Vec<Option<f64>> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let pr = r.perturbed(delta, random::sub_seed(seed, &[t as u64]));
            let pp = RiccatiProblem::from_realization(&pr);
            solve_max_positive(&pp).ok().map(|s| (&s.x - &base.x).norm())
        })
        .collect();
    let deviations: Vec<f64> = outcomes.iter().flatten().copied().collect();
    let skipped = outcomes.len() - deviations.len();
    Ok(SensitivityStats {
        delta,
        max: deviations.iter().copied().fold(0.0, f64::max),
        mean: if deviations.is_empty() {
            0.0
        } else {
            deviations.iter().sum::<f64>() / deviations.len() as f64
        },
        median: median(&deviations),
        deviations,
        skipped,
    })
}

pub(crate) fn median(v: &[f64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let m = s.len() / 2;
    if s.len() % 2 == 1 {
        s[m]
    } else {
        0.5 * (s[m - 1] + s[m])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matcore::{c64, spectrum};
    use crate::realization::random_realization;

    fn scalar(a: C64, b: C64, c: C64, v: Variant) -> RiccatiProblem {
        RiccatiProblem::new(CMatrix::scalar(a), CMatrix::scalar(b), CMatrix::scalar(c), v).unwrap()
    }

    /// Positive root of |c|²X² ∓ 2Im(a)X − |b|² = 0.
    fn scalar_root(a: C64, b: C64, c: C64, v: Variant) -> f64 {
        let s = match v {
            Variant::Continuous => a.im,
            Variant::Discrete => -a.im,
        };
        (s + (s * s + (b * c).norm_sqr()).sqrt()) / c.norm_sqr()
    }

    #[test]
    fn scalar_examples() {
        let p = scalar(c64(0.0, 0.0), c64(1.0, 0.0), I, Variant::Continuous);
        let s = solve_max_positive(&p).unwrap();
        assert!((s.x[(0, 0)] - 1.0).norm() < 1e-14);
        let p = scalar(-I, c64(1.0, 0.0), c64(3f64.sqrt(), 0.0), Variant::Discrete);
        let s = solve_max_positive(&p).unwrap();
        assert!((s.x[(0, 0)] - 1.0).norm() < 1e-14);
        for (a, b, c) in [
            (c64(0.3, 0.7), c64(1.2, -0.4), c64(0.5, 0.5)),
            (c64(-1.0, -2.0), c64(0.1, 0.0), c64(2.0, 1.0)),
        ] {
            for v in [Variant::Continuous, Variant::Discrete] {
                let s = solve_max_positive(&scalar(a, b, c, v)).unwrap();
                let want = scalar_root(a, b, c, v);
                assert!((s.x[(0, 0)].re - want).abs() < 1e-12 * want.max(1.0));
            }
        }
    }

    #[test]
    fn residual_examples() {
        let p = scalar(c64(0.0, 0.0), c64(1.0, 0.0), I, Variant::Continuous);
        assert!(p.residual(&CMatrix::identity(1)) < 1e-14);
        assert!((p.residual(&CMatrix::zeros(1, 1)) - 1.0).abs() < 1e-15);
        let r6 = p.residual(&CMatrix::scalar(c64(1.0 + 1e-6, 0.0)));
        let r4 = p.residual(&CMatrix::scalar(c64(1.0 + 1e-4, 0.0)));
        assert!(r6 < r4 && r6 < 1e-5);
    }

    #[test]
    fn discrete_is_continuous_with_negated_a() {
        let mut rng = random::rng(4);
        let r = random_realization(&mut rng, Convention::Discrete, 4, 2, 3);
        let pd = RiccatiProblem::from_realization(&r);
        let pc = RiccatiProblem::new(-r.a(), r.b().clone(), r.c().clone(), Variant::Continuous).unwrap();
        let xd = solve_max_positive(&pd).unwrap().x;
        let xc = solve_max_positive(&pc).unwrap().x;
        assert!((&xd - &xc).norm() <= 1e-9 * xd.norm());
    }

    #[test]
    fn paths_agree_and_stabilize() {
        for seed in 0..20 {
            let mut rng = random::rng(seed);
            let n = 1 + (seed as usize % 6);
            let conv = if seed % 2 == 0 {
                Convention::Continuous
            } else {
                Convention::Discrete
            };
            let r = random_realization(&mut rng, conv, n, 1 + seed as usize % 3, 1 + (seed as usize / 3) % 3);
            let p = RiccatiProblem::from_realization(&r);
            let h = solve_hamiltonian(&p).unwrap();
            let nk = solve_newton_kleinman(&p).unwrap();
            assert!((&h.x - &nk.x).norm() <= 1e-9 * h.x.norm(), "seed {seed}");
            assert!(h.residual_norm <= 1e-10 * p.scale(&h.x));
            assert!(is_positive_definite(&h.x).positive);
            let (g, rr, _) = p.standard();
            let closed = &g - &(&rr * &h.x);
            assert!(spectrum(&closed).unwrap().eigenvalues.iter().all(|z| z.re < 0.0));
        }
    }

    #[test]
    fn non_minimal_refused() {
        let p = RiccatiProblem::new(
            CMatrix::diag(&[c64(0.0, 0.0), c64(5.0, 0.0)]),
            CMatrix::from_real_rows(&[[1.0], [0.0]]),
            CMatrix::from_rows(&[[I, c64(0.0, 0.0)]]),
            Variant::Continuous,
        )
        .unwrap();
        assert!(matches!(solve_max_positive(&p), Err(Error::NotMinimal { .. })));
    }

    #[test]
    fn lyapunov_solves() {
        let mut rng = random::rng(11);
        let f = random::gaussian_matrix(&mut rng, 3, 3);
        let w = random::gaussian_matrix(&mut rng, 3, 3);
        let y = lyapunov(&f, &w).unwrap();
        let back = &(&f.adjoint() * &y) + &(&y * &f);
        assert!((&back - &w).norm() < 1e-12 * y.norm().max(1.0));
    }

    #[test]
    fn sensitivity_examples() {
        let p = scalar(c64(0.0, 0.0), c64(1.0, 0.0), I, Variant::Continuous);
        let s = sensitivity_probe(&p, 0.0, 5, 1).unwrap();
        assert_eq!(s.max, 0.0);
        let s = sensitivity_probe(&p, 1e-6, 20, 1).unwrap();
        assert!(s.max <= 1e-4 && s.skipped == 0);
        let big = sensitivity_probe(&p, 1e-3, 50, 2).unwrap();
        let small = sensitivity_probe(&p, 1e-5, 50, 2).unwrap();
        assert!(big.median >= small.median);
        // deterministic under a fixed seed
        let again = sensitivity_probe(&p, 1e-3, 50, 2).unwrap();
        assert_eq!(again.deviations, big.deviations);
    }
}
