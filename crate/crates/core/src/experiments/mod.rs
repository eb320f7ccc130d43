//! Monte-Carlo rate studies, log-log fitting and study output files.

mod solvers;
mod studies;

use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::algebra::Level;
use crate::error::{usage, Error, Result};
use crate::gaussian::{sample_bm, FbmMethod, FbmSampler, RngSpec};
use crate::metrics::{Good2Terms, PairSet};
use crate::path::{dyadic_grid, PiecewiseLinearPath};

pub use solvers::{
    ito_continuity, linear_scalar_sde, solver_order_study, wong_zakai_study, ClosedForm, ContinuityPoint, InitialCondition,
    OrderReport,
};
pub use studies::{
    counterexample_study, covariance_lemma_suite, endpoint_l2_study, good_sequence_study, wick_monte_carlo,
    CounterexampleReport, LemmaRow, LemmaSuiteReport, WickCheck, LOOP_FLOOR, ZERO_FLOOR,
};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Stream reserved for bootstrap resampling; replica `r` uses stream `r`.
const BOOTSTRAP_STREAM: u64 = u64::MAX;

/// Share of replicas allowed to abort before a study fails.
const MAX_FAILED_SHARE: f64 = 0.05;

/// Driving noise of a study.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Driver {
    Bm,
    Fbm { hurst: f64 },
}

impl Driver {
    pub fn hurst(&self) -> f64 {
        match self {
            Driver::Bm => 0.5,
            Driver::Fbm { hurst } => *hurst,
        }
    }
}

impl fmt::Display for Driver {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Driver::Bm => write!(f, "bm"),
            Driver::Fbm { hurst } => write!(f, "fbm({hurst})"),
        }
    }
}

impl FromStr for Driver {
    type Err = Error;

    /// `bm`, `fbm(0.4)` or `fbm:0.4`.
    fn from_str(s: &str) -> Result<Driver> {
        let s = s.trim();
        if s == "bm" {
            return Ok(Driver::Bm);
        }
        let arg = s
            .strip_prefix("fbm(")
            .and_then(|r| r.strip_suffix(')'))
            .or_else(|| s.strip_prefix("fbm:"));
        match arg.map(|a| a.trim().parse::<f64>()) {
            Some(Ok(h)) if h > 0.0 && h < 1.0 => Ok(Driver::Fbm { hurst: h }),
            Some(_) => usage(format!("bad Hurst parameter in {s:?}")),
            None => usage(format!("unknown driver {s:?} (expected bm or fbm(H))")),
        }
    }
}

/// Parameters shared by the Monte-Carlo studies.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StudyConfig {
    pub driver: Driver,
    pub level: Level,
    pub p: f64,
    pub p_prime: f64,
    /// The fine grid has `2^fine_exponent` intervals.
    pub fine_exponent: u32,
    /// Coarse dyadic levels, increasing.
    pub levels: Vec<u32>,
    pub replicas: usize,
    pub q: f64,
    pub seed: u64,
    /// Dimension of the driving noise.
    pub dim: usize,
    /// Pair set of the supremum; `None` picks by grid size.
    pub pairs: Option<PairSet>,
    pub fbm_method: FbmMethod,
    /// Bootstrap resamples for the slope interval; 0 uses the OLS interval.
    pub bootstrap: usize,
    /// RK4 steps per fine cell in solver studies.
    pub substeps: usize,
    /// Record per-level wall-clock times (makes output non-deterministic).
    pub timing: bool,
}

impl Default for StudyConfig {
    fn default() -> StudyConfig {
        StudyConfig {
            driver: Driver::Bm,
            level: Level::Two,
            p: 2.5,
            p_prime: 3.0,
            fine_exponent: 12,
            levels: (3..=8).collect(),
            replicas: 64,
            q: 2.0,
            seed: 0,
            dim: 2,
            pairs: None,
            fbm_method: FbmMethod::DaviesHarte,
            bootstrap: 1000,
            substeps: 1,
            timing: false,
        }
    }
}

impl StudyConfig {
    pub fn validate(&self) -> Result<()> {
        let h = self.driver.hurst();
        let top = (self.level.depth() + 1) as f64;
        if !(self.p > 1.0 / h && self.p < top) {
            return usage(format!("p = {} must lie in (1/H, {top}) = ({}, {top})", self.p, 1.0 / h));
        }
        if !(self.p_prime > 1.0) {
            return usage("p′ must exceed 1");
        }
        if !(3..=20).contains(&self.fine_exponent) {
            return usage(format!("fine exponent must lie in 3..=20, got {}", self.fine_exponent));
        }
        if self.levels.len() < 3 {
            return usage("a rate fit needs at least three levels");
        }
        if self.levels[0] == 0 || self.levels.windows(2).any(|w| w[1] <= w[0]) {
            return usage("levels must be positive and strictly increasing");
        }
        let max = *self.levels.last().unwrap();
        if max + 2 >= self.fine_exponent {
            return usage(format!(
                "finest coarse level {max} must stay below fine exponent − 2 = {}",
                self.fine_exponent as i64 - 2
            ));
        }
        if self.replicas < 2 {
            return usage("need at least two replicas");
        }
        if !(self.q >= 1.0) {
            return usage("moment order q must be at least 1");
        }
        if self.dim == 0 {
            return usage("driver dimension must be positive");
        }
        if self.substeps == 0 {
            return usage("substeps must be at least 1");
        }
        Ok(())
    }

    pub fn fine_grid(&self) -> Vec<f64> {
        dyadic_grid(self.fine_exponent)
    }

    pub fn meshes(&self) -> Vec<f64> {
        self.levels.iter().map(|&n| 0.5f64.powi(n as i32)).collect()
    }

    pub fn pair_set(&self) -> PairSet {
        self.pairs.unwrap_or_else(|| PairSet::auto(1 << self.fine_exponent))
    }
}

/// One `(replica, level)` measurement.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReplicaRecord {
    pub replica: usize,
    pub level: u32,
    pub mesh: f64,
    pub defect: f64,
    pub terms: Option<Good2Terms>,
    /// Uniform gap between solutions (solver studies).
    pub uniform: Option<f64>,
    /// The same gap computed from a closed-form solution.
    pub oracle: Option<f64>,
    pub wall_ms: Option<f64>,
}

impl ReplicaRecord {
    fn new(replica: usize, level: u32, defect: f64) -> ReplicaRecord {
        ReplicaRecord {
            replica,
            level,
            mesh: 0.5f64.powi(level as i32),
            defect,
            terms: None,
            uniform: None,
            oracle: None,
            wall_ms: None,
        }
    }
}

/// Least-squares fit of `log defect = intercept + slope · log mesh`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    /// 95% interval for the slope.
    pub ci: (f64, f64),
}

fn ols(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    (slope, intercept, (ssr / (n - 2.0) / sxx).sqrt())
}

/// Log-log least squares with a Student-t interval for the slope.
pub fn fit_rate(mesh: &[f64], defect: &[f64]) -> Result<RateFit> {
    if mesh.len() != defect.len() {
        return usage("mesh and defect arrays differ in length");
    }
    if mesh.len() < 3 {
        return usage("a rate fit needs at least three points");
    }
    if mesh.iter().chain(defect).any(|v| !(*v > 0.0 && v.is_finite())) {
        return usage("rate fits need positive finite values");
    }
    let lx: Vec<f64> = mesh.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = defect.iter().map(|v| v.ln()).collect();
    if lx.windows(2).all(|w| w[0] == w[1]) {
        return usage("rate fits need at least two distinct meshes");
    }
    let (slope, intercept, se) = ols(&lx, &ly);
    let t = StudentsT::new(0.0, 1.0, (mesh.len() - 2) as f64)
        .map_err(|e| Error::Numeric(e.to_string()))?
        .inverse_cdf(0.975);
    Ok(RateFit { slope, intercept, ci: (slope - t * se, slope + t * se) })
}

fn lq_mean(values: impl Iterator<Item = f64>, q: f64) -> f64 {
    let (mut sum, mut count) = (0.0, 0usize);
    for v in values {
        sum += v.powf(q);
        count += 1;
    }
    (sum / count as f64).powf(1.0 / q)
}

/// Percentile interval of the slope refitted on replica resamples.
pub fn bootstrap_slope(mesh: &[f64], per_replica: &[Vec<f64>], q: f64, resamples: usize, spec: &RngSpec) -> Result<(f64, f64)> {
    let m = per_replica.len();
    if m < 2 || resamples < 20 {
        return usage("bootstrap needs at least two replicas and twenty resamples");
    }
    let lx: Vec<f64> = mesh.iter().map(|v| v.ln()).collect();
    let mut rng = spec.rng();
    let mut slopes = Vec::with_capacity(resamples);
    let mut picks = vec![0usize; m];
    for _ in 0..resamples {
        picks.iter_mut().for_each(|k| *k = rng.random_range(0..m));
        let ly: Vec<f64> = (0..mesh.len()).map(|j| lq_mean(picks.iter().map(|&r| per_replica[r][j]), q).ln()).collect();
        if ly.iter().all(|v| v.is_finite()) {
            slopes.push(ols(&lx, &ly).0);
        }
    }
    if slopes.len() < resamples / 2 {
        return Err(Error::Numeric("too many degenerate bootstrap resamples".into()));
    }
    slopes.sort_by(f64::total_cmp);
    let at = |f: f64| slopes[((slopes.len() - 1) as f64 * f).round() as usize];
    Ok((at(0.025), at(0.975)))
}

/// Aggregated outcome of a Monte-Carlo rate study.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RateStudyResult {
    pub study: String,
    pub config: StudyConfig,
    pub levels: Vec<u32>,
    pub mesh: Vec<f64>,
    pub defect_mean: Vec<f64>,
    pub defect_q: Vec<f64>,
    pub defect_se: Vec<f64>,
    pub slope: f64,
    pub intercept: f64,
    pub slope_ci: (f64, f64),
    /// Replicas that completed.
    pub replicas: usize,
    /// Indices of aborted replicas.
    pub failed: Vec<usize>,
    /// Slope of the L^q level-one term, when good2 terms were recorded.
    pub a1_slope: Option<f64>,
    #[serde(skip)]
    pub records: Vec<ReplicaRecord>,
}

impl RateStudyResult {
    /// Per-replica defects, `replica × level`.
    pub fn per_replica(&self) -> Vec<Vec<f64>> {
        let k = self.levels.len();
        self.records.chunks(k).map(|c| c.iter().map(|r| r.defect).collect()).collect()
    }

    /// Share of replicas whose `measure` strictly decreases from level to
    /// level; replicas where it is missing count as not decreasing.
    pub fn monotone_fraction(&self, measure: impl Fn(&ReplicaRecord) -> Option<f64>) -> f64 {
        let k = self.levels.len();
        let good = self
            .records
            .chunks(k)
            .filter(|rows| {
                let v: Option<Vec<f64>> = rows.iter().map(&measure).collect();
                v.is_some_and(|v| v.windows(2).all(|w| w[1] < w[0]))
            })
            .count();
        good as f64 / (self.records.len() / k) as f64
    }

    /// Relative gap `|E u − E o| / E o` per level between the measured uniform
    /// errors and their closed-form counterparts.
    pub fn oracle_gap(&self) -> Option<Vec<f64>> {
        let k = self.levels.len();
        (0..k)
            .map(|j| {
                let rows = self.records.iter().skip(j).step_by(k);
                let (mut u, mut o, mut n) = (0.0, 0.0, 0.0);
                for r in rows {
                    u += r.uniform?;
                    o += r.oracle?;
                    n += 1.0;
                }
                Some(((u - o) / n).abs() / (o / n))
            })
            .collect()
    }

    pub fn write_csv(&self, w: &mut impl Write) -> Result<()> {
        write_study_csv(w, &self.records)
    }

    /// Summary JSON; `meta` holds run-dependent values such as timestamps.
    pub fn write_summary(&self, w: &mut impl Write, meta: serde_json::Value) -> Result<()> {
        let mut v = serde_json::to_value(self).map_err(|e| Error::Numeric(e.to_string()))?;
        v["version"] = VERSION.into();
        v["seed"] = self.config.seed.into();
        v["meta"] = meta;
        serde_json::to_writer_pretty(&mut *w, &v).map_err(std::io::Error::from)?;
        writeln!(w)?;
        Ok(())
    }
}

pub const STUDY_CSV_HEADER: &str = "replica,level,mesh,defect,a1,a2,a4,wall_ms,uniform,oracle";

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.16e}")).unwrap_or_default()
}

/// Raw per-replica records, one row per `(replica, level)`.
pub fn write_study_csv(w: &mut impl Write, records: &[ReplicaRecord]) -> Result<()> {
    writeln!(w, "# roughkit {VERSION}")?;
    writeln!(w, "{STUDY_CSV_HEADER}")?;
    for r in records {
        let t = r.terms;
        writeln!(
            w,
            "{},{},{:.16e},{:.16e},{},{},{},{},{},{}",
            r.replica,
            r.level,
            r.mesh,
            r.defect,
            opt(t.map(|t| t.a1)),
            opt(t.map(|t| t.a2)),
            opt(t.map(|t| t.a4)),
            opt(r.wall_ms),
            opt(r.uniform),
            opt(r.oracle),
        )?;
    }
    Ok(())
}

enum DriverSampler {
    Bm { grid: Vec<f64>, dim: usize },
    Fbm { sampler: FbmSampler, dim: usize },
}

impl DriverSampler {
    fn new(cfg: &StudyConfig, dim: usize) -> Result<DriverSampler> {
        let grid = cfg.fine_grid();
        Ok(match cfg.driver {
            Driver::Bm => DriverSampler::Bm { grid, dim },
            Driver::Fbm { hurst } => DriverSampler::Fbm { sampler: FbmSampler::new(&grid, hurst, cfg.fbm_method)?, dim },
        })
    }

    fn sample(&self, spec: &RngSpec) -> Result<PiecewiseLinearPath> {
        match self {
            DriverSampler::Bm { grid, dim } => sample_bm(grid, *dim, spec),
            DriverSampler::Fbm { sampler, dim } => sampler.sample(*dim, spec),
        }
    }
}

/// Runs `per_level(replica, level)` for every replica in parallel; replica `r`
/// draws from stream `r`. Usage errors abort the study, other errors abort
/// only the replica.
fn run_replicas<F>(cfg: &StudyConfig, job: F) -> Result<(Vec<ReplicaRecord>, Vec<usize>)>
where
    F: Fn(usize, &RngSpec) -> Result<Vec<ReplicaRecord>> + Sync,
{
    let outcomes: Vec<Result<Vec<ReplicaRecord>>> =
        (0..cfg.replicas).into_par_iter().map(|r| job(r, &RngSpec::new(cfg.seed, r as u64))).collect();
    let mut records = Vec::with_capacity(cfg.replicas * cfg.levels.len());
    let mut failed = Vec::new();
    for (r, out) in outcomes.into_iter().enumerate() {
        match out {
            Ok(recs) => records.extend(recs),
            Err(e @ Error::Usage(_)) => return Err(e),
            Err(e) => {
                log::warn!("replica {r} aborted: {e}");
                failed.push(r);
            }
        }
    }
    if failed.len() as f64 > MAX_FAILED_SHARE * cfg.replicas as f64 {
        return Err(Error::Study(format!("{} of {} replicas aborted", failed.len(), cfg.replicas)));
    }
    Ok((records, failed))
}

/// Calls `measure` per level and stamps the wall time when enabled.
fn timed<T>(enabled: bool, measure: impl FnOnce() -> Result<T>) -> Result<(T, Option<f64>)> {
    if !enabled {
        return Ok((measure()?, None));
    }
    let start = Instant::now();
    let out = measure()?;
    Ok((out, Some(start.elapsed().as_secs_f64() * 1e3)))
}

fn aggregate(study: &str, cfg: &StudyConfig, q: f64, records: Vec<ReplicaRecord>, failed: Vec<usize>) -> Result<RateStudyResult> {
    let k = cfg.levels.len();
    let m = records.len() / k;
    if m < 2 {
        return Err(Error::Study("fewer than two replicas completed".into()));
    }
    let column = |j: usize| records.iter().skip(j).step_by(k);
    let mut defect_mean = Vec::with_capacity(k);
    let mut defect_q = Vec::with_capacity(k);
    let mut defect_se = Vec::with_capacity(k);
    for j in 0..k {
        let mean = column(j).map(|r| r.defect).sum::<f64>() / m as f64;
        let var = column(j).map(|r| (r.defect - mean).powi(2)).sum::<f64>() / (m - 1) as f64;
        defect_mean.push(mean);
        defect_q.push(lq_mean(column(j).map(|r| r.defect), q));
        defect_se.push((var / m as f64).sqrt());
    }
    let mesh = cfg.meshes();
    let fit = fit_rate(&mesh, &defect_q)?;
    let slope_ci = if cfg.bootstrap > 0 {
        let rows: Vec<Vec<f64>> = records.chunks(k).map(|c| c.iter().map(|r| r.defect).collect()).collect();
        bootstrap_slope(&mesh, &rows, q, cfg.bootstrap, &RngSpec::new(cfg.seed, BOOTSTRAP_STREAM))?
    } else {
        fit.ci
    };
    let a1_slope = if records.iter().all(|r| r.terms.is_some()) {
        let a1: Vec<f64> = (0..k).map(|j| lq_mean(column(j).map(|r| r.terms.unwrap().a1), q)).collect();
        fit_rate(&mesh, &a1).ok().map(|f| f.slope)
    } else {
        None
    };
    Ok(RateStudyResult {
        study: study.to_string(),
        config: cfg.clone(),
        levels: cfg.levels.clone(),
        mesh,
        defect_mean,
        defect_q,
        defect_se,
        slope: fit.slope,
        intercept: fit.intercept,
        slope_ci,
        replicas: m,
        failed,
        a1_slope,
        records,
    })
}
