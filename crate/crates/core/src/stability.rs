//! Perturbation sweeps and the similarity-uniqueness experiment.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::continuous::{solve_inverse_continuous, uniform_grid, ContinuousPotential, DEFAULT_SAMPLES};
use crate::discrete::{c_sequence, default_k, solve_inverse_discrete, sup_deviation, DiscretePotential};
use crate::error::{Error, Result};
use crate::matcore::{condition_number, is_positive_definite, CMatrix};
use crate::quadruple::{quadruple_distance, AdmissibleQuadruple, Quadruple};
use crate::random;
use crate::realization::{similarity, Convention, Realization};
use crate::riccati::{lyapunov, median};
use crate::verify::Verdict;

/// Share of skipped trials above which a δ row makes the sweep inconclusive.
pub const MAX_SKIP_SHARE: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    /// Perturb `(A, B, C)` and rerun the whole pipeline.
    #[default]
    Triple,
    /// Perturb `(α, ϑ1, ϑ2)` with equal weights and re-solve `S0` from the
    /// identity.
    Quadruple,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepConfig {
    pub base: Realization,
    /// Strictly positive, strictly descending; a trailing 0 adds a control row.
    pub deltas: Vec<f64>,
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    /// Discrete horizon; default `max(5n + 20, 50)`.
    #[serde(default, rename = "K")]
    pub k: Option<usize>,
    /// Continuous grid samples on `[0, 10/min Im σ(α)]`.
    #[serde(default)]
    pub samples: Option<usize>,
    #[serde(default)]
    pub level: Level,
}

impl SweepConfig {
    pub fn new(base: Realization, deltas: Vec<f64>, trials: usize, seed: u64) -> Self {
        Self {
            base,
            deltas,
            trials,
            seed,
            k: None,
            samples: None,
            level: Level::Triple,
        }
    }

    pub fn mode(&self) -> Convention {
        self.base.convention()
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::InvalidArgument("trials must be positive".into()));
        }
        if self.deltas.is_empty() {
            return Err(Error::InvalidArgument("empty δ list".into()));
        }
        let (body, control) = match self.deltas.split_last() {
            Some((&0.0, rest)) => (rest, true),
            _ => (&self.deltas[..], false),
        };
        if body.iter().any(|&d| !(d > 0.0) || !d.is_finite()) {
            return Err(Error::InvalidArgument("δ values must be positive and finite".into()));
        }
        if body.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::InvalidArgument("δ list must be strictly descending".into()));
        }
        if body.is_empty() && control {
            return Err(Error::InvalidArgument("δ list has only the control row".into()));
        }
        Ok(())
    }
}

/// Total perturbation norm `δ/2`, deterministic in the seed.
pub fn perturb_realization(r: &Realization, delta: f64, seed: u64) -> Result<Realization> {
    if !(delta >= 0.0) {
        return Err(Error::InvalidArgument(format!("δ = {delta} must be >= 0")));
    }
    Ok(r.perturbed(delta, seed))
}

/// Equal-weight perturbation of `(α, ϑ1, ϑ2)` of total norm `δ/2`; `S0`
/// re-solved from `αS0 − S0α* = iΛΛ*`.
pub fn perturb_quadruple(q: &Quadruple, delta: f64, seed: u64) -> Result<AdmissibleQuadruple> {
    if delta == 0.0 || q.n() == 0 {
        return AdmissibleQuadruple::new(q.clone());
    }
    let mut rng = random::rng(seed);
    let da = random::gaussian_matrix(&mut rng, q.n(), q.n());
    let d1 = random::gaussian_matrix(&mut rng, q.n(), q.m1());
    let d2 = random::gaussian_matrix(&mut rng, q.n(), q.m2());
    let s = 0.5 * delta / (da.norm() + d1.norm() + d2.norm());
    let alpha = &q.alpha + &da.scale_real(s);
    let t1 = &q.theta1 + &d1.scale_real(s);
    let t2 = &q.theta2 + &d2.scale_real(s);
    let l = t1.hstack(&t2);
    // F*Y + YF = W with F = −iα*:  iαY − iYα* = −ΛΛ*
    let f = alpha.adjoint().scale(-crate::matcore::I);
    let s0 = lyapunov(&f, &-&(&l * &l.adjoint()))?.hermitian_part();
    if !is_positive_definite(&s0).positive {
        return Err(Error::NotPositive("perturbed S0".into()));
    }
    AdmissibleQuadruple::new(Quadruple::new(alpha, s0, t1, t2)?)
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct Stats {
    pub median: f64,
    pub mean: f64,
    pub max: f64,
}

impl Stats {
    fn of(v: &[f64]) -> Self {
        let n = v.len().max(1) as f64;
        Self {
            median: median(v),
            mean: v.iter().sum::<f64>() / n,
            max: v.iter().copied().fold(0.0, f64::max),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TrialRecord {
    pub delta: f64,
    pub trial: usize,
    pub quad_distance: f64,
    pub potential_dev: f64,
    pub skipped: bool,
    pub reason: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct DeltaRow {
    pub delta: f64,
    pub quad_distance: Stats,
    pub potential_dev: Stats,
    pub skipped: usize,
    pub trials: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepResult {
    pub mode: Convention,
    pub level: Level,
    pub rows: Vec<DeltaRow>,
    pub records: Vec<TrialRecord>,
    pub quad_trend_ok: bool,
    pub potential_trend_ok: bool,
    /// `max over δ of median potential deviation / δ`.
    pub lipschitz_estimate: f64,
    pub verdict: Verdict,
}

/// Base potential in whichever mode, with the deviation measure.
enum Base {
    Continuous {
        p: ContinuousPotential,
        grid: Vec<f64>,
        v: Vec<CMatrix>,
    },
    Discrete {
        p: DiscretePotential,
    },
}

impl Base {
    fn quadruple(&self) -> &AdmissibleQuadruple {
        match self {
            Base::Continuous { p, .. } => &p.quadruple,
            Base::Discrete { p } => &p.quadruple,
        }
    }

    fn deviation(&self, q: &AdmissibleQuadruple, k: usize) -> Result<f64> {
        match self {
            Base::Continuous { grid, v, .. } => {
                let w = crate::continuous::potential_on_grid(q, grid)?;
                Ok(v.iter().zip(&w).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max))
            }
            Base::Discrete { p } => {
                let other = c_sequence(q, k, false)?;
                Ok(sup_deviation(&p.c, &other.c))
            }
        }
    }
}

fn build_base(cfg: &SweepConfig, k: usize) -> Result<Base> {
    let r = &cfg.base;
    r.require_minimal()?;
    Ok(match cfg.mode() {
        Convention::Continuous => {
            let p = solve_inverse_continuous(r)?;
            let grid = uniform_grid(0.0, p.x_max, cfg.samples.unwrap_or(DEFAULT_SAMPLES));
            let v = p.on_grid(&grid)?;
            Base::Continuous { p, grid, v }
        }
        Convention::Discrete => Base::Discrete {
            p: solve_inverse_discrete(r, k)?,
        },
    })
}

fn run_trial(cfg: &SweepConfig, base: &Base, k: usize, di: usize, delta: f64, trial: usize) -> TrialRecord {
    let seed = random::sub_seed(cfg.seed, &[di as u64, trial as u64]);
    let outcome = (|| -> Result<(f64, f64)> {
        let q = match cfg.level {
            Level::Triple => {
                let r = perturb_realization(&cfg.base, delta, seed)?;
                r.require_minimal()?;
                crate::quadruple::recover(&r)?.1
            }
            Level::Quadruple => perturb_quadruple(base.quadruple(), delta, seed)?,
        };
        let dq = quadruple_distance(base.quadruple(), &q)?;
        Ok((dq, base.deviation(&q, k)?))
    })();
    match outcome {
        Ok((dq, dv)) => TrialRecord {
            delta,
            trial,
            quad_distance: dq,
            potential_dev: dv,
            skipped: false,
            reason: None,
        },
        Err(e) => TrialRecord {
            delta,
            trial,
            quad_distance: f64::NAN,
            potential_dev: f64::NAN,
            skipped: true,
            reason: Some(e.to_string()),
        },
    }
}

/// Medians non-increasing along the δ list and the last one below a tenth of
/// the first.
fn trend_ok(medians: &[f64]) -> bool {
    if medians.iter().any(|m| !m.is_finite()) {
        return false;
    }
    let decreasing = medians.windows(2).all(|w| w[1] <= w[0]);
    match (medians.first(), medians.last()) {
        (Some(&a), Some(&b)) if medians.len() > 1 => decreasing && b < a / 10.0,
        _ => decreasing,
    }
}

pub fn run_sweep(cfg: &SweepConfig) -> Result<SweepResult> {
    cfg.validate()?;
    let k = cfg.k.unwrap_or_else(|| default_k(cfg.base.n()));
    let base = build_base(cfg, k)?;
    let jobs: Vec<(usize, f64, usize)> = cfg
        .deltas
        .iter()
        .enumerate()
        .flat_map(|(di, &d)| (0..cfg.trials).map(move |t| (di, d, t)))
        .collect();
    let records: Vec<TrialRecord> = jobs
        .par_iter()
        .map(|&(di, d, t)| run_trial(cfg, &base, k, di, d, t))
        .collect();

    let mut rows = Vec::new();
    for (di, &delta) in cfg.deltas.iter().enumerate() {
        let recs = &records[di * cfg.trials..(di + 1) * cfg.trials];
        let ok: Vec<&TrialRecord> = recs.iter().filter(|r| !r.skipped).collect();
        let dq: Vec<f64> = ok.iter().map(|r| r.quad_distance).collect();
        let dv: Vec<f64> = ok.iter().map(|r| r.potential_dev).collect();
        rows.push(DeltaRow {
            delta,
            quad_distance: Stats::of(&dq),
            potential_dev: Stats::of(&dv),
            skipped: recs.len() - ok.len(),
            trials: recs.len(),
        });
    }
    let trend_rows: Vec<&DeltaRow> = rows.iter().filter(|r| r.delta > 0.0).collect();
    let quad_trend_ok = trend_ok(&trend_rows.iter().map(|r| r.quad_distance.median).collect::<Vec<_>>());
    let potential_trend_ok = trend_ok(&trend_rows.iter().map(|r| r.potential_dev.median).collect::<Vec<_>>());
    let lipschitz_estimate = trend_rows
        .iter()
        .map(|r| r.potential_dev.median / r.delta)
        .fold(0.0, f64::max);
    let too_many_skips = rows
        .iter()
        .any(|r| r.skipped as f64 > MAX_SKIP_SHARE * r.trials as f64 || r.skipped == r.trials);
    let verdict = if too_many_skips {
        Verdict::Inconclusive
    } else if quad_trend_ok && potential_trend_ok {
        Verdict::Pass
    } else {
        Verdict::Fail
    };
    Ok(SweepResult {
        mode: cfg.mode(),
        level: cfg.level,
        rows,
        records,
        quad_trend_ok,
        potential_trend_ok,
        lipschitz_estimate,
        verdict,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct UniquenessTrial {
    pub trial: usize,
    pub cond: f64,
    pub deviation: f64,
    pub tolerance: f64,
    pub ok: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct UniquenessReport {
    pub mode: Convention,
    pub trials: Vec<UniquenessTrial>,
    /// Largest `deviation / tolerance`.
    pub worst_ratio: f64,
    pub pass: bool,
}

/// Condition bound of the random similarity transforms.
pub const SIMILARITY_COND: f64 = 100.0;

/// Inverts `similarity(r, T)` for random `T` with `cond(T) ≤ 100` and
/// compares with the inversion of `r`.
pub fn uniqueness_experiment(r: &Realization, trials: usize, seed: u64) -> Result<UniquenessReport> {
    r.require_minimal()?;
    let n = r.n();
    let k = default_k(n);
    let cfg = SweepConfig::new(r.clone(), vec![1.0], 1, seed);
    let base = build_base(&cfg, k)?;
    let out: Vec<Result<UniquenessTrial>> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = random::rng(random::sub_seed(seed, &[t as u64]));
            let tm = random::well_conditioned(&mut rng, n, SIMILARITY_COND);
            let cond = if n == 0 { 1.0 } else { condition_number(&tm)? };
            let rt = similarity(r, &tm)?;
            let q = crate::quadruple::recover(&rt)?.1;
            let deviation = base.deviation(&q, k)?;
            let tolerance = 1e-8 * (1.0 + cond);
            Ok(UniquenessTrial {
                trial: t,
                cond,
                deviation,
                tolerance,
                ok: deviation <= tolerance,
            })
        })
        .collect();
    let trials: Vec<UniquenessTrial> = out.into_iter().collect::<Result<_>>()?;
    let worst_ratio = trials.iter().map(|t| t.deviation / t.tolerance).fold(0.0, f64::max);
    Ok(UniquenessReport {
        mode: r.convention(),
        pass: trials.iter().all(|t| t.ok),
        trials,
        worst_ratio,
    })
}
