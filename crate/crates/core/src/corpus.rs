//! Shipped example cases and the pass/fail table over them.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::continuous::{decay_profile, solve_inverse_continuous, ContinuousPotential, DEFAULT_SAMPLES};
use crate::discrete::{asymptotics_check, c_sequence, solve_inverse_discrete, DiscretePotential};
use crate::error::{Error, Result};
use crate::matcore::{CMatrix, C64};
use crate::quadruple::{quadruple_distance, AdmissibleQuadruple, Quadruple};
use crate::realization::{Convention, Realization};
use crate::verify::{corrupt, weyl_defect_continuous, weyl_defect_discrete, Verdict, DEFAULT_STEP};

/// Size of the entry corruption used for the contrast half of the defect check.
pub const CORRUPTION: f64 = 0.1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExampleCase {
    pub name: String,
    #[serde(default)]
    pub description: String,
    /// Where the expected values come from.
    pub source: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub realization: Option<Realization>,
    /// Quadruple-only cases name their convention here.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<Convention>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quadruple: Option<Quadruple>,
    pub tolerance: f64,
    pub expected: Expected,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Expected {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quadruple: Option<Quadruple>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub potential: Vec<PotentialSample>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub weyl: Vec<WeylSample>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weyl_round_trip: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decay: Option<bool>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub weyl_defect_z: Vec<[f64; 2]>,
    #[serde(rename = "K", default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub c: Vec<CSample>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tail_below: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_equals_j: Option<bool>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PotentialSample {
    pub x: f64,
    pub value: CMatrix,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WeylSample {
    pub z: [f64; 2],
    pub value: CMatrix,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CSample {
    pub k: usize,
    pub value: CMatrix,
}

/// One measured quantity of a case.
#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub what: String,
    pub deviation: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl Check {
    fn new(what: impl Into<String>, deviation: f64, tolerance: f64) -> Self {
        Self {
            what: what.into(),
            pass: deviation <= tolerance,
            deviation,
            tolerance,
        }
    }

    fn flag(what: impl Into<String>, ok: bool) -> Self {
        Self {
            what: what.into(),
            deviation: if ok { 0.0 } else { 1.0 },
            tolerance: 0.0,
            pass: ok,
        }
    }
}

/// One row of the corpus table.
#[derive(Debug, Clone, Serialize)]
pub struct CaseRow {
    pub name: String,
    pub path: PathBuf,
    /// Worst deviation over the checks that share the case tolerance.
    pub deviation: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub checks: Vec<Check>,
    pub error: Option<String>,
}

pub fn load_case(path: &Path) -> Result<ExampleCase> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::InvalidArgument(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::InvalidArgument(format!("{}: {e}", path.display())))
}

/// Top-level `*.json` files of `dir`, sorted by name.
pub fn case_paths(dir: &Path) -> Result<Vec<PathBuf>> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::InvalidArgument(format!("{}: {e}", dir.display())))?;
    let mut out: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|x| x == "json"))
        .collect();
    out.sort();
    Ok(out)
}

pub fn run_corpus(dir: &Path) -> Result<Vec<CaseRow>> {
    Ok(run_paths(&case_paths(dir)?))
}

/// Each path is an independent row; a load or solver failure errors only
/// that row.
pub fn run_paths(paths: &[PathBuf]) -> Vec<CaseRow> {
    use rayon::prelude::*;
    paths.par_iter().map(|p| run_path(p)).collect()
}

pub fn run_path(path: &Path) -> CaseRow {
    let fallback = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    match load_case(path) {
        Ok(case) => {
            let mut row = run_case(&case);
            row.path = path.to_path_buf();
            row
        }
        Err(e) => CaseRow {
            name: fallback,
            path: path.to_path_buf(),
            deviation: f64::NAN,
            tolerance: f64::NAN,
            pass: false,
            checks: Vec::new(),
            error: Some(e.to_string()),
        },
    }
}

pub fn run_case(case: &ExampleCase) -> CaseRow {
    let (checks, error) = match evaluate(case) {
        Ok(c) => (c, None),
        Err(e) => (Vec::new(), Some(e.to_string())),
    };
    let deviation = checks
        .iter()
        .filter(|c| c.tolerance == case.tolerance)
        .map(|c| c.deviation)
        .fold(0.0, f64::max);
    CaseRow {
        name: case.name.clone(),
        path: PathBuf::new(),
        deviation,
        tolerance: case.tolerance,
        pass: error.is_none() && !checks.is_empty() && checks.iter().all(|c| c.pass),
        checks,
        error,
    }
}

/// Solved form of a case.
pub enum Pipeline {
    Continuous(ContinuousPotential),
    Discrete(DiscretePotential),
}

impl Pipeline {
    pub fn quadruple(&self) -> &AdmissibleQuadruple {
        match self {
            Pipeline::Continuous(p) => &p.quadruple,
            Pipeline::Discrete(p) => &p.quadruple,
        }
    }
}

pub fn solve_case(case: &ExampleCase) -> Result<Pipeline> {
    let k = case.expected.k.unwrap_or(0);
    match (&case.realization, &case.quadruple) {
        (Some(r), _) => match r.convention() {
            Convention::Continuous => Ok(Pipeline::Continuous(solve_inverse_continuous(r)?)),
            Convention::Discrete => Ok(Pipeline::Discrete(solve_inverse_discrete(r, k)?)),
        },
        (None, Some(q)) => {
            let q = AdmissibleQuadruple::new(q.clone())?;
            match case.mode.unwrap_or(Convention::Discrete) {
                Convention::Continuous => Ok(Pipeline::Continuous(ContinuousPotential::from_quadruple(q)?)),
                Convention::Discrete => Ok(Pipeline::Discrete(c_sequence(&q, k, false)?)),
            }
        }
        (None, None) => Err(Error::InvalidArgument(format!(
            "case {} has neither realization nor quadruple",
            case.name
        ))),
    }
}

fn rel(a: &CMatrix, b: &CMatrix) -> f64 {
    a.distance(b) / b.norm().max(1.0)
}

fn evaluate(case: &ExampleCase) -> Result<Vec<Check>> {
    let tol = case.tolerance;
    let exp = &case.expected;
    let pipeline = solve_case(case)?;
    let mut checks = Vec::new();

    if let Some(q) = &exp.quadruple {
        checks.push(Check::new(
            "quadruple",
            quadruple_distance(pipeline.quadruple(), q)?,
            tol,
        ));
    }
    let weyl = |z: C64| match &pipeline {
        Pipeline::Continuous(p) => p.weyl(z),
        Pipeline::Discrete(p) => p.weyl(z),
    };
    for s in &exp.weyl {
        let z = C64::new(s.z[0], s.z[1]);
        checks.push(Check::new(format!("weyl at {z}"), rel(&weyl(z)?, &s.value), tol));
    }
    if let Some(t) = exp.weyl_round_trip {
        let m = match &pipeline {
            Pipeline::Continuous(p) => p.weyl_mismatch,
            Pipeline::Discrete(p) => p.weyl_mismatch,
        };
        checks.push(Check::new("weyl round trip", m, t));
    }

    match &pipeline {
        Pipeline::Continuous(p) => {
            if !exp.potential.is_empty() {
                let xs: Vec<f64> = exp.potential.iter().map(|s| s.x).collect();
                let vs = p.on_grid(&xs)?;
                let dev = vs
                    .iter()
                    .zip(&exp.potential)
                    .map(|(v, s)| v.distance(&s.value))
                    .fold(0.0, f64::max);
                checks.push(Check::new("potential", dev, tol));
            }
            if exp.decay == Some(true) {
                let d = decay_profile(p, p.x_max, DEFAULT_SAMPLES)?;
                checks.push(Check::flag("v decayed at x_max", d.v_decayed()));
                checks.push(Check::flag("weight decreasing over final half", d.w_decreasing_tail()));
            }
        }
        Pipeline::Discrete(p) => {
            if !exp.c.is_empty() {
                let mut dev = 0.0f64;
                for s in &exp.c {
                    let got = p.c.get(s.k).ok_or_else(|| {
                        Error::InvalidArgument(format!("expected C_{} but only {} computed", s.k, p.k()))
                    })?;
                    dev = dev.max(got.distance(&s.value));
                }
                checks.push(Check::new("C_k", dev, tol));
            }
            if exp.c_equals_j == Some(true) {
                let j = p.signature();
                let dev = p.c.iter().map(|c| c.distance(&j)).fold(0.0, f64::max);
                checks.push(Check::new("C_k = j", dev, tol));
            }
            if let Some(t) = exp.tail_below {
                let a = asymptotics_check(p);
                checks.push(Check::new(
                    "tail ‖C_K − j‖",
                    a.distance.last().copied().unwrap_or(0.0),
                    t,
                ));
            }
            checks.push(Check::flag("C_k invariants", p.invariants.ok));
        }
    }

    for z in &exp.weyl_defect_z {
        let z = C64::new(z[0], z[1]);
        let phi = weyl(z)?;
        let (good, bad) = match &pipeline {
            Pipeline::Continuous(p) => (
                weyl_defect_continuous(p, &phi, z, None, DEFAULT_STEP)?.verdict,
                weyl_defect_continuous(p, &corrupt(&phi, CORRUPTION), z, None, DEFAULT_STEP)?.verdict,
            ),
            Pipeline::Discrete(p) => (
                weyl_defect_discrete(p, &phi, z, None)?.verdict,
                weyl_defect_discrete(p, &corrupt(&phi, CORRUPTION), z, None)?.verdict,
            ),
        };
        checks.push(Check::flag(format!("defect at {z} passes"), good == Verdict::Pass));
        checks.push(Check::flag(
            format!("corrupted defect at {z} fails"),
            bad == Verdict::Fail,
        ));
    }
    Ok(checks)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn corpus_dir() -> PathBuf {
        Path::new(env!("CARGO_MANIFEST_DIR")).join("../../corpus")
    }

    #[test]
    fn shipped_cases_pass() {
        let rows = run_corpus(&corpus_dir()).unwrap();
        assert!(rows.len() >= 6);
        for r in &rows {
            let failed: Vec<_> = r.checks.iter().filter(|c| !c.pass).collect();
            assert!(r.pass, "{}: {:?} {:?}", r.name, r.error, failed);
        }
    }

    #[test]
    fn missing_file_errors_only_its_row() {
        let mut paths = case_paths(&corpus_dir()).unwrap();
        paths.push(corpus_dir().join("does_not_exist.json"));
        let rows = run_paths(&paths);
        let last = rows.last().unwrap();
        assert!(!last.pass && last.error.is_some());
        assert!(rows[..rows.len() - 1].iter().all(|r| r.pass));
    }

    #[test]
    fn case_round_trips_through_json() {
        let case = load_case(&corpus_dir().join("sech.json")).unwrap();
        let again: ExampleCase = serde_json::from_str(&serde_json::to_string(&case).unwrap()).unwrap();
        assert_eq!(again.expected.potential.len(), case.expected.potential.len());
        assert_eq!(again.realization, case.realization);
    }
}
