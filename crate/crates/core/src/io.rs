//! CSV and JSON emitters shared by the CLI and the bindings.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::discrete::DiscretePotential;
use crate::error::{Error, Result};
use crate::matcore::CMatrix;
use crate::stability::SweepResult;

/// 17 significant digits, round-trip exact.
pub fn float(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        format!("{x}").to_lowercase()
    }
}

/// `x, re_v{i}{j}, im_v{i}{j}, …, norm` with 1-based indices.
pub fn potential_csv(xs: &[f64], vs: &[CMatrix]) -> String {
    let (rows, cols) = vs.first().map_or((0, 0), CMatrix::shape);
    let mut out = String::from("x");
    for i in 1..=rows {
        for j in 1..=cols {
            write!(out, ",re_v{i}{j},im_v{i}{j}").unwrap();
        }
    }
    out.push_str(",norm\n");
    for (x, v) in xs.iter().zip(vs) {
        out.push_str(&float(*x));
        for z in v.as_slice() {
            write!(out, ",{},{}", float(z.re), float(z.im)).unwrap();
        }
        writeln!(out, ",{}", float(v.norm())).unwrap();
    }
    out
}

/// `k, dist_j, lambda_min_R`.
pub fn discrete_csv(p: &DiscretePotential) -> String {
    let j = p.signature();
    let mut out = String::from("k,dist_j,lambda_min_R\n");
    for (k, c) in p.c.iter().enumerate() {
        let l = p.r_lambda_min.get(k).copied().unwrap_or(f64::NAN);
        writeln!(out, "{k},{},{}", float((c - &j).norm()), float(l)).unwrap();
    }
    out
}

/// `delta, trial, quad_distance, potential_dev, skipped`.
pub fn sweep_csv(r: &SweepResult) -> String {
    let mut out = String::from("delta,trial,quad_distance,potential_dev,skipped\n");
    for t in &r.records {
        writeln!(
            out,
            "{},{},{},{},{}",
            float(t.delta),
            t.trial,
            float(t.quad_distance),
            float(t.potential_dev),
            t.skipped as u8
        )
        .unwrap();
    }
    out
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    serde_json::to_string_pretty(value).map_err(|e| Error::InvalidArgument(e.to_string()))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::InvalidArgument(format!("{}: {e}", path.display())))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_text(path, &(to_json(value)? + "\n"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matcore::c64;

    #[test]
    fn float_round_trips() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 6.02e23, f64::MIN_POSITIVE] {
            assert_eq!(float(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(float(f64::INFINITY), "inf");
        assert_eq!(float(f64::NAN), "nan");
    }

    #[test]
    fn potential_layout() {
        let v = CMatrix::from_rows(&[vec![c64(1.0, 2.0), c64(3.0, 0.0)]]);
        let s = potential_csv(&[0.0, 0.5], &[v.clone(), v]);
        let lines: Vec<&str> = s.lines().collect();
        assert_eq!(lines[0], "x,re_v11,im_v11,re_v12,im_v12,norm");
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[1].split(',').count(), 6);
    }
}
