//! Admissible quadruples `{α, S0, ϑ1, ϑ2}`:
//! `αS0 − S0α* = i(ϑ1ϑ1* + ϑ2ϑ2*)` with `S0 > 0`.

use std::ops::Deref;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matcore::{is_positive_definite, solve_linear, spectrum, sqrtm_psd, CMatrix, Spectrum, C64, I};
use crate::realization::{is_controllable, Realization};
use crate::riccati::{solve_max_positive, RiccatiProblem, RiccatiSolution};

/// Relative tolerance of the identity check.
pub const IDENTITY_TOL: f64 = 1e-10;

/// Distance (relative to `1 + ‖α‖`) under which a point counts as an
/// eigenvalue of α.
pub const SPECTRAL_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "QuadrupleRepr", into = "QuadrupleRepr")]
pub struct Quadruple {
    pub alpha: CMatrix,
    pub s0: CMatrix,
    pub theta1: CMatrix,
    pub theta2: CMatrix,
}

#[derive(Serialize, Deserialize)]
struct QuadrupleRepr {
    n: usize,
    m1: usize,
    m2: usize,
    alpha: CMatrix,
    #[serde(rename = "S0")]
    s0: CMatrix,
    theta1: CMatrix,
    theta2: CMatrix,
}

impl From<Quadruple> for QuadrupleRepr {
    fn from(q: Quadruple) -> Self {
        Self {
            n: q.n(),
            m1: q.m1(),
            m2: q.m2(),
            alpha: q.alpha,
            s0: q.s0,
            theta1: q.theta1,
            theta2: q.theta2,
        }
    }
}

impl TryFrom<QuadrupleRepr> for Quadruple {
    type Error = Error;

    fn try_from(w: QuadrupleRepr) -> Result<Self> {
        let q = Quadruple::new(w.alpha, w.s0, w.theta1, w.theta2)?;
        if (q.n(), q.m1(), q.m2()) != (w.n, w.m1, w.m2) {
            return Err(Error::DimensionMismatch(format!(
                "declared (n, m1, m2) = ({}, {}, {}) but matrices give ({}, {}, {})",
                w.n,
                w.m1,
                w.m2,
                q.n(),
                q.m1(),
                q.m2()
            )));
        }
        Ok(q)
    }
}

/// Where α sits relative to the points the discrete machinery divides by.
#[derive(Debug, Clone, Serialize)]
pub struct SpectralFlags {
    pub eigenvalues: Vec<[f64; 2]>,
    pub min_imag: f64,
    pub contains_zero: bool,
    pub contains_i: bool,
    pub contains_minus_i: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct AdmissibilityReport {
    pub identity_residual: f64,
    pub tolerance: f64,
    pub s0_positive: bool,
    pub controllable_theta1: bool,
    pub controllable_theta2: bool,
    pub spectrum: SpectralFlags,
    pub admissible: bool,
}

impl Quadruple {
    pub fn new(alpha: CMatrix, s0: CMatrix, theta1: CMatrix, theta2: CMatrix) -> Result<Self> {
        let n = alpha.rows();
        if !alpha.is_square() || s0.shape() != (n, n) || theta1.rows() != n || theta2.rows() != n {
            return Err(Error::DimensionMismatch(format!(
                "alpha {:?}, S0 {:?}, theta1 {:?}, theta2 {:?}",
                alpha.shape(),
                s0.shape(),
                theta1.shape(),
                theta2.shape()
            )));
        }
        Ok(Self {
            alpha,
            s0,
            theta1,
            theta2,
        })
    }

    pub fn scalar(alpha: C64, s0: C64, theta1: C64, theta2: C64) -> Self {
        Self {
            alpha: CMatrix::scalar(alpha),
            s0: CMatrix::scalar(s0),
            theta1: CMatrix::scalar(theta1),
            theta2: CMatrix::scalar(theta2),
        }
    }

    /// Quadruple with n = 0.
    pub fn empty(m1: usize, m2: usize) -> Self {
        Self {
            alpha: CMatrix::zeros(0, 0),
            s0: CMatrix::zeros(0, 0),
            theta1: CMatrix::zeros(0, m1),
            theta2: CMatrix::zeros(0, m2),
        }
    }

    pub fn n(&self) -> usize {
        self.alpha.rows()
    }

    pub fn m1(&self) -> usize {
        self.theta1.cols()
    }

    pub fn m2(&self) -> usize {
        self.theta2.cols()
    }

    pub fn m(&self) -> usize {
        self.m1() + self.m2()
    }

    /// `[ϑ1 ϑ2]`.
    pub fn lambda0(&self) -> CMatrix {
        self.theta1.hstack(&self.theta2)
    }

    /// `αS0 − S0α* − i(ϑ1ϑ1* + ϑ2ϑ2*)`.
    pub fn identity_defect(&self) -> CMatrix {
        let lhs = &(&self.alpha * &self.s0) - &(&self.s0 * &self.alpha.adjoint());
        let l = self.lambda0();
        &lhs - &(&l * &l.adjoint()).scale(I)
    }

    pub fn identity_residual(&self) -> f64 {
        self.identity_defect().norm()
    }

    /// `‖α‖‖S0‖ + ‖ϑ1‖² + ‖ϑ2‖²`.
    pub fn identity_scale(&self) -> f64 {
        let t1 = self.theta1.norm();
        let t2 = self.theta2.norm();
        self.alpha.norm() * self.s0.norm() + t1 * t1 + t2 * t2
    }

    pub fn spectrum(&self) -> Result<Spectrum> {
        spectrum(&self.alpha)
    }

    pub fn spectral_flags(&self) -> Result<SpectralFlags> {
        let sp = self.spectrum()?;
        let tol = SPECTRAL_TOL * (1.0 + self.alpha.norm());
        Ok(SpectralFlags {
            eigenvalues: sp.eigenvalues.iter().map(|z| [z.re, z.im]).collect(),
            min_imag: sp.min_imag(),
            contains_zero: sp.distance_to(C64::new(0.0, 0.0)) <= tol,
            contains_i: sp.distance_to(I) <= tol,
            contains_minus_i: sp.distance_to(-I) <= tol,
        })
    }

    pub fn check(&self) -> Result<AdmissibilityReport> {
        let residual = self.identity_residual();
        let tolerance = IDENTITY_TOL * self.identity_scale();
        let s0_positive = self.n() == 0 || is_positive_definite(&self.s0).positive;
        Ok(AdmissibilityReport {
            identity_residual: residual,
            tolerance,
            s0_positive,
            controllable_theta1: is_controllable(&self.alpha, &self.theta1).full,
            controllable_theta2: is_controllable(&self.alpha, &self.theta2).full,
            spectrum: self.spectral_flags()?,
            admissible: s0_positive && residual <= tolerance,
        })
    }

    /// `{S0^{-1/2}αS0^{1/2}, I, S0^{-1/2}ϑ1, S0^{-1/2}ϑ2}`; exact no-op when
    /// S0 is already the identity.
    pub fn normalize_s0(&self) -> Result<Quadruple> {
        let n = self.n();
        if self.s0 == CMatrix::identity(n) {
            return Ok(self.clone());
        }
        let (root, inv_root) = sqrtm_psd(&self.s0)?;
        Ok(Quadruple {
            alpha: &(&inv_root * &self.alpha) * &root,
            s0: CMatrix::identity(n),
            theta1: &inv_root * &self.theta1,
            theta2: &inv_root * &self.theta2,
        })
    }
}

/// Validated quadruple with its controllability flags.
#[derive(Debug, Clone, PartialEq)]
pub struct AdmissibleQuadruple {
    quad: Quadruple,
    pub controllable_theta1: bool,
    pub controllable_theta2: bool,
}

impl Deref for AdmissibleQuadruple {
    type Target = Quadruple;

    fn deref(&self) -> &Quadruple {
        &self.quad
    }
}

impl Serialize for AdmissibleQuadruple {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.quad.serialize(s)
    }
}

impl<'de> Deserialize<'de> for AdmissibleQuadruple {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let q = Quadruple::deserialize(d)?;
        AdmissibleQuadruple::new(q).map_err(serde::de::Error::custom)
    }
}

impl AdmissibleQuadruple {
    pub fn new(q: Quadruple) -> Result<Self> {
        if q.n() > 0 && !is_positive_definite(&q.s0).positive {
            return Err(Error::NotPositive("S0".into()));
        }
        let residual = q.identity_residual();
        let tol = IDENTITY_TOL * q.identity_scale();
        if !(residual <= tol) {
            return Err(Error::Inconsistent(format!(
                "identity residual {residual:.3e} exceeds {tol:.3e}"
            )));
        }
        Ok(Self {
            controllable_theta1: is_controllable(&q.alpha, &q.theta1).full,
            controllable_theta2: is_controllable(&q.alpha, &q.theta2).full,
            quad: q,
        })
    }

    pub fn quadruple(&self) -> &Quadruple {
        &self.quad
    }

    pub fn into_inner(self) -> Quadruple {
        self.quad
    }

    pub fn normalized(&self) -> Result<AdmissibleQuadruple> {
        let q = self.quad.normalize_s0()?;
        // normalisation is a similarity plus congruence: flags carry over
        Ok(Self {
            quad: q,
            controllable_theta1: self.controllable_theta1,
            controllable_theta2: self.controllable_theta2,
        })
    }
}

/// `X⁻¹·M` for Hermitian positive `X`.
fn left_divide(x: &CMatrix, m: &CMatrix) -> Result<CMatrix> {
    solve_linear(x, m).map_err(|_| Error::NotPositive("Riccati solution is singular".into()))
}

fn check_x(x: &CMatrix) -> Result<()> {
    if x.rows() > 0 && !is_positive_definite(x).positive {
        return Err(Error::NotPositive("Riccati solution X".into()));
    }
    Ok(())
}

/// `α = A + iBB*X⁻¹, S0 = X, ϑ1 = B, ϑ2 = iXC*`.
pub fn from_continuous(a: &CMatrix, b: &CMatrix, c: &CMatrix, x: &CMatrix) -> Result<AdmissibleQuadruple> {
    check_x(x)?;
    // BB*X⁻¹ = (X⁻¹BB*)* since X is Hermitian
    let bbx = left_divide(x, &(b * &b.adjoint()))?.adjoint();
    let q = Quadruple::new(a + &bbx.scale(I), x.clone(), b.clone(), (x * &c.adjoint()).scale(I))?;
    AdmissibleQuadruple::new(q)
}

/// `α = −A + iBB*X⁻¹, S0 = X, ϑ1 = XC*, ϑ2 = iB`.
pub fn from_discrete(a: &CMatrix, b: &CMatrix, c: &CMatrix, x: &CMatrix) -> Result<AdmissibleQuadruple> {
    check_x(x)?;
    let bbx = left_divide(x, &(b * &b.adjoint()))?.adjoint();
    let q = Quadruple::new(&(-a) + &bbx.scale(I), x.clone(), x * &c.adjoint(), b.scale(I))?;
    AdmissibleQuadruple::new(q)
}

/// Riccati solve plus the matching quadruple construction.
pub fn recover(r: &Realization) -> Result<(RiccatiSolution, AdmissibleQuadruple)> {
    let p = RiccatiProblem::from_realization(r);
    let sol = solve_max_positive(&p)?;
    let q = match r.convention() {
        crate::realization::Convention::Continuous => from_continuous(r.a(), r.b(), r.c(), &sol.x)?,
        crate::realization::Convention::Discrete => from_discrete(r.a(), r.b(), r.c(), &sol.x)?,
    };
    Ok((sol, q))
}

/// `‖α−α̃‖ + ‖S0−S̃0‖ + ‖ϑ1−ϑ̃1‖ + ‖ϑ2−ϑ̃2‖`.
pub fn quadruple_distance(q: &Quadruple, other: &Quadruple) -> Result<f64> {
    if q.alpha.shape() != other.alpha.shape()
        || q.theta1.shape() != other.theta1.shape()
        || q.theta2.shape() != other.theta2.shape()
    {
        return Err(Error::DimensionMismatch("quadruples differ in shape".into()));
    }
    Ok(q.alpha.distance(&other.alpha)
        + q.s0.distance(&other.s0)
        + q.theta1.distance(&other.theta1)
        + q.theta2.distance(&other.theta2))
}
