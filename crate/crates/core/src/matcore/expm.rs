//! Scaling-and-squaring matrix exponential with Padé approximants
//! (Higham 2005 degree selection).

use super::{solve_linear, CMatrix};
use crate::error::{Error, Result};

const THETA: [(usize, f64); 5] = [
    (3, 1.495585217958292e-2),
    (5, 2.53939833006323e-1),
    (7, 9.504178996162932e-1),
    (9, 2.097847961257068),
    (13, 5.371920351148152),
];

const B3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const B5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const B7: [f64; 8] = [17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0];
const B9: [f64; 10] = [
    17643225600.0,
    8821612800.0,
    2075673600.0,
    302702400.0,
    30270240.0,
    2162160.0,
    110880.0,
    3960.0,
    90.0,
    1.0,
];
const B13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

/// `e^M`.
pub fn expm(m: &CMatrix) -> Result<CMatrix> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "expm needs a square matrix, got {}x{}",
            m.rows(),
            m.cols()
        )));
    }
    if !m.is_finite() {
        return Err(Error::NonFinite("expm input".into()));
    }
    let n = m.rows();
    if n == 0 {
        return Ok(CMatrix::zeros(0, 0));
    }
    let norm = m.norm_1();
    for &(deg, theta) in &THETA[..4] {
        if norm <= theta {
            let (u, v) = pade_low(m, deg);
            return finish(&u, &v, 0);
        }
    }
    let theta13 = THETA[4].1;
    let s = if norm > theta13 {
        (norm / theta13).log2().ceil().max(0.0) as i32
    } else {
        0
    };
    if s > 1000 {
        return Err(Error::Overflow(format!("expm: norm {norm:.3e} too large")));
    }
    let scaled = m.scale_real(0.5f64.powi(s));
    let (u, v) = pade13(&scaled);
    finish(&u, &v, s as u32)
}

fn pade_low(a: &CMatrix, deg: usize) -> (CMatrix, CMatrix) {
    let b: &[f64] = match deg {
        3 => &B3,
        5 => &B5,
        7 => &B7,
        _ => &B9,
    };
    let n = a.rows();
    let a2 = a * a;
    // even powers I, A², A⁴, ...
    let mut pows = vec![CMatrix::identity(n), a2.clone()];
    while pows.len() <= deg / 2 {
        let next = pows.last().unwrap() * &a2;
        pows.push(next);
    }
    let mut u = CMatrix::zeros(n, n);
    let mut v = CMatrix::zeros(n, n);
    for (k, p) in pows.iter().enumerate() {
        u += &p.scale_real(b[2 * k + 1]);
        v += &p.scale_real(b[2 * k]);
    }
    (a * &u, v)
}

fn pade13(a: &CMatrix) -> (CMatrix, CMatrix) {
    let b = &B13;
    let n = a.rows();
    let id = CMatrix::identity(n);
    let a2 = a * a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let u_inner = &(&(&a6.scale_real(b[13]) + &a4.scale_real(b[11])) + &a2.scale_real(b[9])) * &a6;
    let u_tail = &(&(&a6.scale_real(b[7]) + &a4.scale_real(b[5])) + &a2.scale_real(b[3])) + &id.scale_real(b[1]);
    let u = a * &(&u_inner + &u_tail);
    let v_inner = &(&(&a6.scale_real(b[12]) + &a4.scale_real(b[10])) + &a2.scale_real(b[8])) * &a6;
    let v_tail = &(&(&a6.scale_real(b[6]) + &a4.scale_real(b[4])) + &a2.scale_real(b[2])) + &id.scale_real(b[0]);
    (u, &v_inner + &v_tail)
}

fn finish(u: &CMatrix, v: &CMatrix, squarings: u32) -> Result<CMatrix> {
    let p = v + u;
    let q = v - u;
    let mut r = solve_linear(&q, &p).map_err(|e| Error::Overflow(format!("expm: Padé denominator failed ({e})")))?;
    for _ in 0..squarings {
        r = &r * &r;
        if !r.is_finite() {
            return Err(Error::Overflow("expm: squaring left double range".into()));
        }
    }
    if !r.is_finite() {
        return Err(Error::Overflow("expm: non-finite result".into()));
    }
    Ok(r)
}
