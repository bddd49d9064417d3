//! State-space realizations `φ(z) = C(zI − A)⁻¹B` of strictly proper
//! rational matrix functions.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matcore::{condition_number, pivoted_qr, solve_linear, spectrum, CMatrix, C64, I};
use crate::random;

/// Relative rank tolerance for Krylov rank decisions.
pub const RANK_TOL: f64 = 1e-10;

/// Which Dirac system the realization feeds.
///
/// Continuous: `B` is n×m1 and `C` is m2×n. Discrete: `B` is n×m2 and `C`
/// is m1×n, so φ is m1×m2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Convention {
    Continuous,
    Discrete,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RealizationRepr", into = "RealizationRepr")]
pub struct Realization {
    convention: Convention,
    a: CMatrix,
    b: CMatrix,
    c: CMatrix,
}

#[derive(Serialize, Deserialize)]
struct RealizationRepr {
    convention: Convention,
    n: usize,
    m1: usize,
    m2: usize,
    #[serde(rename = "A")]
    a: CMatrix,
    #[serde(rename = "B")]
    b: CMatrix,
    #[serde(rename = "C")]
    c: CMatrix,
}

impl From<Realization> for RealizationRepr {
    fn from(r: Realization) -> Self {
        Self {
            convention: r.convention,
            n: r.n(),
            m1: r.m1(),
            m2: r.m2(),
            a: r.a,
            b: r.b,
            c: r.c,
        }
    }
}

impl TryFrom<RealizationRepr> for Realization {
    type Error = Error;

    fn try_from(w: RealizationRepr) -> Result<Self> {
        let r = Realization::new(w.convention, w.a, w.b, w.c)?;
        if (r.n(), r.m1(), r.m2()) != (w.n, w.m1, w.m2) {
            return Err(Error::DimensionMismatch(format!(
                "declared (n, m1, m2) = ({}, {}, {}) but matrices give ({}, {}, {})",
                w.n,
                w.m1,
                w.m2,
                r.n(),
                r.m1(),
                r.m2()
            )));
        }
        Ok(r)
    }
}

/// Rank verdict for a Krylov condition.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RankReport {
    pub full: bool,
    pub rank: usize,
}

impl Realization {
    pub fn new(convention: Convention, a: CMatrix, b: CMatrix, c: CMatrix) -> Result<Self> {
        let n = a.rows();
        if !a.is_square() || b.rows() != n || c.cols() != n {
            return Err(Error::DimensionMismatch(format!(
                "A {}x{}, B {}x{}, C {}x{} are not conformable",
                a.rows(),
                a.cols(),
                b.rows(),
                b.cols(),
                c.rows(),
                c.cols()
            )));
        }
        Ok(Self { convention, a, b, c })
    }

    pub fn continuous(a: CMatrix, b: CMatrix, c: CMatrix) -> Result<Self> {
        Self::new(Convention::Continuous, a, b, c)
    }

    pub fn discrete(a: CMatrix, b: CMatrix, c: CMatrix) -> Result<Self> {
        Self::new(Convention::Discrete, a, b, c)
    }

    /// Empty state space: φ ≡ 0.
    pub fn trivial(convention: Convention, m1: usize, m2: usize) -> Self {
        let (p, q) = match convention {
            Convention::Continuous => (m1, m2),
            Convention::Discrete => (m2, m1),
        };
        Self {
            convention,
            a: CMatrix::zeros(0, 0),
            b: CMatrix::zeros(0, p),
            c: CMatrix::zeros(q, 0),
        }
    }

    pub fn convention(&self) -> Convention {
        self.convention
    }

    pub fn a(&self) -> &CMatrix {
        &self.a
    }

    pub fn b(&self) -> &CMatrix {
        &self.b
    }

    pub fn c(&self) -> &CMatrix {
        &self.c
    }

    pub fn n(&self) -> usize {
        self.a.rows()
    }

    pub fn m1(&self) -> usize {
        match self.convention {
            Convention::Continuous => self.b.cols(),
            Convention::Discrete => self.c.rows(),
        }
    }

    pub fn m2(&self) -> usize {
        match self.convention {
            Convention::Continuous => self.c.rows(),
            Convention::Discrete => self.b.cols(),
        }
    }

    /// φ(z), via a linear solve against `zI − A`.
    pub fn evaluate(&self, z: C64) -> Result<CMatrix> {
        let n = self.n();
        if n == 0 {
            return Ok(CMatrix::zeros(self.c.rows(), self.b.cols()));
        }
        let norm_a = self.a.norm();
        let distance = spectrum(&self.a)?.distance_to(z);
        if distance <= 1e-10 * norm_a.max(1.0) {
            return Err(Error::NearPole { z, distance });
        }
        let resolvent = (-&self.a).shift(z);
        let x = solve_linear(&resolvent, &self.b).map_err(|_| Error::NearPole { z, distance })?;
        Ok(&self.c * &x)
    }

    pub fn probe_points(&self) -> Vec<C64> {
        probe_points(&self.a)
    }

    pub fn is_controllable(&self) -> RankReport {
        is_controllable(&self.a, &self.b)
    }

    pub fn is_observable(&self) -> RankReport {
        is_observable(&self.c, &self.a)
    }

    pub fn is_minimal(&self) -> bool {
        self.is_controllable().full && self.is_observable().full
    }

    /// Error unless both rank conditions hold.
    pub fn require_minimal(&self) -> Result<()> {
        let ctrb = self.is_controllable();
        let obsv = self.is_observable();
        if ctrb.full && obsv.full {
            Ok(())
        } else {
            Err(Error::NotMinimal {
                n: self.n(),
                controllable_rank: ctrb.rank,
                observable_rank: obsv.rank,
            })
        }
    }

    /// Same realization with all three matrices replaced.
    pub fn with_matrices(&self, a: CMatrix, b: CMatrix, c: CMatrix) -> Result<Self> {
        Self::new(self.convention, a, b, c)
    }

    /// Random perturbation with `‖ΔA‖ + ‖ΔB‖ + ‖ΔC‖ = δ/2`, deterministic in
    /// `seed`.
    pub fn perturbed(&self, delta: f64, seed: u64) -> Self {
        if delta == 0.0 || self.n() == 0 {
            return self.clone();
        }
        let mut rng = random::rng(seed);
        let da = random::gaussian_matrix(&mut rng, self.a.rows(), self.a.cols());
        let db = random::gaussian_matrix(&mut rng, self.b.rows(), self.b.cols());
        let dc = random::gaussian_matrix(&mut rng, self.c.rows(), self.c.cols());
        let total = da.norm() + db.norm() + dc.norm();
        let s = 0.5 * delta / total;
        Self {
            convention: self.convention,
            a: &self.a + &da.scale_real(s),
            b: &self.b + &db.scale_real(s),
            c: &self.c + &dc.scale_real(s),
        }
    }
}

/// `z_k = 2(1+‖A‖)e^{2πik/20} + 3i(1+‖A‖)`, k = 0..20, so `Im z_k ≥ 1+‖A‖`.
pub fn probe_points(a: &CMatrix) -> Vec<C64> {
    let r = 2.0 * (1.0 + a.norm());
    (0..20)
        .map(|k| C64::from_polar(r, 2.0 * PI * k as f64 / 20.0) + I * (1.5 * r))
        .collect()
}

fn max_column_norm(m: &CMatrix) -> f64 {
    (0..m.cols())
        .map(|j| m.column(j).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt())
        .fold(0.0, f64::max)
}

/// Orthonormal basis (n×r) of `span ⋃ Im AᵏB`, built block by block with
/// re-orthogonalisation and rank-revealing QR at each step.
pub fn krylov_basis(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let n = a.rows();
    let mut basis = CMatrix::zeros(n, 0);
    if n == 0 || b.cols() == 0 {
        return basis;
    }
    let mut block = b.clone();
    let mut first = true;
    while basis.cols() < n {
        let scale = max_column_norm(&block);
        if scale == 0.0 {
            break;
        }
        let mut w = block.clone();
        if !first {
            for _ in 0..2 {
                let proj = &basis * &(&basis.adjoint() * &w);
                w -= &proj;
            }
        }
        let qr = pivoted_qr(&w);
        let rank = qr.rank(RANK_TOL * scale).min(n - basis.cols());
        if rank == 0 {
            break;
        }
        let mut fresh = qr.q.columns(0..rank);
        if !first {
            // one more pass keeps the combined basis orthonormal to rounding
            let proj = &basis * &(&basis.adjoint() * &fresh);
            fresh -= &proj;
            fresh = pivoted_qr(&fresh).q.columns(0..rank);
        }
        basis = basis.hstack(&fresh);
        block = a * &fresh;
        first = false;
    }
    basis
}

/// Rank of the controllability matrix `[B, AB, …, A^{n−1}B]`.
pub fn is_controllable(a: &CMatrix, b: &CMatrix) -> RankReport {
    let rank = krylov_basis(a, b).cols();
    RankReport {
        full: rank == a.rows(),
        rank,
    }
}

/// Dual of [`is_controllable`] through `(A*, C*)`.
pub fn is_observable(c: &CMatrix, a: &CMatrix) -> RankReport {
    is_controllable(&a.adjoint(), &c.adjoint())
}

/// Two-stage Kalman reduction: restrict to the controllable subspace, then
/// to the observable subspace of the result. Minimal inputs pass through
/// unchanged.
pub fn minimal_realization(r: &Realization) -> Result<Realization> {
    let n = r.n();
    let v = krylov_basis(&r.a, &r.b);
    let stage1 = if v.cols() == n {
        r.clone()
    } else {
        let vh = v.adjoint();
        r.with_matrices(&(&vh * &r.a) * &v, &vh * &r.b, &r.c * &v)?
    };
    let w = krylov_basis(&stage1.a.adjoint(), &stage1.c.adjoint());
    if w.cols() == stage1.n() {
        return Ok(stage1);
    }
    let wh = w.adjoint();
    stage1.with_matrices(&(&wh * &stage1.a) * &w, &wh * &stage1.b, &stage1.c * &w)
}

/// `(T⁻¹AT, T⁻¹B, CT)`.
pub fn similarity(r: &Realization, t: &CMatrix) -> Result<Realization> {
    if t.shape() != r.a.shape() {
        return Err(Error::DimensionMismatch(format!(
            "similarity matrix is {}x{}, state dimension {}",
            t.rows(),
            t.cols(),
            r.n()
        )));
    }
    if r.n() == 0 {
        return Ok(r.clone());
    }
    let tinv_at = solve_linear(t, &(&r.a * t))?;
    let tinv_b = solve_linear(t, &r.b)?;
    r.with_matrices(tinv_at, tinv_b, &r.c * t)
}

/// Largest relative evaluation mismatch between two realizations over the
/// probe points of the first.
pub fn probe_mismatch(r: &Realization, other: &Realization) -> Result<f64> {
    probe_mismatch_with(r, |z| other.evaluate(z))
}

/// Same as [`probe_mismatch`] against an arbitrary matrix function.
pub fn probe_mismatch_with<F>(r: &Realization, mut other: F) -> Result<f64>
where
    F: FnMut(C64) -> Result<CMatrix>,
{
    let mut worst: f64 = 0.0;
    for z in r.probe_points() {
        let f = r.evaluate(z)?;
        let g = other(z)?;
        let scale = f.norm().max(f64::MIN_POSITIVE);
        worst = worst.max((&f - &g).norm() / scale);
    }
    Ok(worst)
}

/// Spectral condition number of a similarity matrix.
pub fn similarity_condition(t: &CMatrix) -> Result<f64> {
    condition_number(t)
}

/// Random realization with Gaussian entries; minimal with probability one.
pub fn random_realization<R: rand::Rng + ?Sized>(
    rng: &mut R,
    convention: Convention,
    n: usize,
    m1: usize,
    m2: usize,
) -> Realization {
    let (p, q) = match convention {
        Convention::Continuous => (m1, m2),
        Convention::Discrete => (m2, m1),
    };
    let a = random::gaussian_matrix(rng, n, n);
    let b = random::gaussian_matrix(rng, n, p);
    let c = random::gaussian_matrix(rng, q, n);
    Realization::new(convention, a, b, c).expect("shapes are conformable by construction")
}

/// Scalar helper for tests and examples.
pub fn scalar(convention: Convention, a: C64, b: C64, c: C64) -> Realization {
    Realization::new(convention, CMatrix::scalar(a), CMatrix::scalar(b), CMatrix::scalar(c))
        .expect("scalar realization")
}
