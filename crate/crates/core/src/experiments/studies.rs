//! Good-sequence rate studies, the pure-area counterexample and exact
//! covariance checks.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use super::{aggregate, run_replicas, timed, DriverSampler, RateStudyResult, ReplicaRecord, StudyConfig};
use crate::algebra::Level;
use crate::error::{usage, Result};
use crate::gaussian::lemmas::lemma_sides;
use crate::gaussian::{finallemma_check, increasing_lattice, wick_fourth_moment, LatticeReport, RngSpec};
use crate::metrics::{defect_with_terms, good2_from_increment, good_sequence_defect, MetricReport, PairSet, Reference};
use crate::path::{dyadic_grid, pure_area_path, s_prime_level2, square_loop_path, uniform_grid, PiecewiseLinearPath};

/// Defect of `x_n ≡ 0` against the pure-area path: three level-2 blocks of
/// the joint lift differ by `[e₁, e₂]` at `(0, 1)`.
pub const ZERO_FLOOR: f64 = 2.213_363_839_400_643;

/// Lower bound for any approximant of the pure-area path: both cross blocks
/// differ by `[e₁, e₂]` at `(0, 1)`.
pub const LOOP_FLOOR: f64 = 2.0;

/// Good-sequence defect `d(S′(x_n, x), S″(x))` of the dyadic interpolants of
/// one fine sample per replica.
pub fn good_sequence_study(cfg: &StudyConfig) -> Result<RateStudyResult> {
    cfg.validate()?;
    let sampler = DriverSampler::new(cfg, cfg.dim)?;
    let pairs = cfg.pair_set();
    let (records, failed) = run_replicas(cfg, |r, spec| {
        let fine = sampler.sample(spec)?;
        let lift = (cfg.level == Level::Two).then(|| fine.signature_lift(Level::Two));
        let diag = lift.as_ref().map(|l| l.diagonal());
        cfg.levels
            .iter()
            .map(|&n| {
                let ((report, terms), wall) = timed(cfg.timing, || {
                    let x_n = fine.linear_interpolant(&dyadic_grid(n))?;
                    match (&lift, &diag) {
                        (Some(lift), Some(diag)) => {
                            let sp = s_prime_level2(&x_n, lift)?;
                            let (report, terms) = defect_with_terms(&sp, diag, cfg.p, pairs)?;
                            Ok((report, Some(terms)))
                        }
                        _ => Ok((good_sequence_defect(&x_n, Reference::Path(&fine, cfg.level), cfg.p, pairs)?, None)),
                    }
                })?;
                let mut rec = ReplicaRecord::new(r, n, report.distance);
                rec.terms = terms;
                rec.wall_ms = wall;
                Ok(rec)
            })
            .collect()
    })?;
    aggregate("good_sequence", cfg, cfg.q, records, failed)
}

/// `‖∫₀¹ x ⊗ dx^{Dₙ} − x²₀,₁‖` with `L²` aggregation over replicas.
pub fn endpoint_l2_study(cfg: &StudyConfig) -> Result<RateStudyResult> {
    cfg.validate()?;
    let sampler = DriverSampler::new(cfg, cfg.dim)?;
    let d = cfg.dim;
    let (records, failed) = run_replicas(cfg, |r, spec| {
        let fine = sampler.sample(spec)?;
        let lift = fine.signature_lift(Level::Two);
        let last = lift.len() - 1;
        cfg.levels
            .iter()
            .map(|&n| {
                let (gap, wall) = timed(cfg.timing, || {
                    let sp = s_prime_level2(&fine.linear_interpolant(&dyadic_grid(n))?, &lift)?;
                    Ok(good2_from_increment(sp.increment(0, last).as_slice(), d).2)
                })?;
                let mut rec = ReplicaRecord::new(r, n, gap);
                rec.wall_ms = wall;
                Ok(rec)
            })
            .collect()
    })?;
    aggregate("endpoint_l2", cfg, 2.0, records, failed)
}

/// Defects of two approximations of the pure-area path across mesh halvings.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CounterexampleReport {
    pub p: f64,
    pub meshes: Vec<f64>,
    /// `x_n ≡ 0` on a grid of the given mesh.
    pub zero: Vec<MetricReport>,
    /// Square loops of side `√mesh`, one per cell.
    pub loops: Vec<MetricReport>,
    pub zero_floor: f64,
    pub loop_floor: f64,
}

impl CounterexampleReport {
    /// Whether every defect stays on or above its floor.
    pub fn floor_holds(&self) -> bool {
        self.zero.iter().all(|r| r.distance >= self.zero_floor) && self.loops.iter().all(|r| r.distance >= self.loop_floor)
    }

    /// Largest change of the `x_n ≡ 0` defect across meshes.
    pub fn zero_spread(&self) -> f64 {
        let d: Vec<f64> = self.zero.iter().map(|r| r.distance).collect();
        d.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b)) - d.iter().fold(f64::INFINITY, |a, &b| a.min(b))
    }
}

/// Approximations of `t ↦ exp(t [e₁, e₂])` on `grid · 2^j` cells for
/// `j = 0..=halvings`. `grid` must be a power of two.
pub fn counterexample_study(p: f64, grid: usize, halvings: u32) -> Result<CounterexampleReport> {
    if !(p > 2.0 && p < 3.0) {
        return usage(format!("p must lie in (2, 3), got {p}"));
    }
    if !grid.is_power_of_two() {
        return usage(format!("grid must be a power of two, got {grid}"));
    }
    let mut report = CounterexampleReport {
        p,
        meshes: Vec::new(),
        zero: Vec::new(),
        loops: Vec::new(),
        zero_floor: ZERO_FLOOR,
        loop_floor: LOOP_FLOOR,
    };
    for j in 0..=halvings {
        let cells = grid << j;
        let times = uniform_grid(cells);
        let zero = PiecewiseLinearPath::constant(times.clone(), &[0.0, 0.0])?;
        let area = pure_area_path(&times)?;
        report.zero.push(good_sequence_defect(&zero, Reference::Lifted(&area), p, PairSet::auto(cells))?);
        let loops = square_loop_path(cells)?;
        let area = pure_area_path(loops.times())?;
        report.loops.push(good_sequence_defect(&loops, Reference::Lifted(&area), p, PairSet::auto(4 * cells))?);
        report.meshes.push(1.0 / cells as f64);
    }
    Ok(report)
}

/// One subdivision size of the covariance double-sum check.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LemmaRow {
    pub n: usize,
    pub lhs: f64,
    pub lhs_abs: f64,
    pub rhs: f64,
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LemmaSuiteReport {
    pub hurst: f64,
    pub p_prime: f64,
    pub rows: Vec<LemmaRow>,
    pub max_ratio: f64,
    pub ratio_non_increasing: bool,
    /// Lattice of interval orderings; absent at `H = ½`.
    pub lattice: Option<LatticeReport>,
}

impl LemmaSuiteReport {
    /// Lattice violations plus one if the ratio ever increases.
    pub fn violations(&self) -> usize {
        self.lattice.map_or(0, |l| l.violations()) + usize::from(!self.ratio_non_increasing)
    }
}

/// Side of the interval lattice used by the suite.
pub const LATTICE_POINTS: usize = 20;

/// Double-sum bound over uniform subdivisions of `[0, 1]` with `sizes`
/// intervals, and the ordering lattice. `H = ½` is accepted, where
/// increments are independent.
pub fn covariance_lemma_suite(h: f64, p_prime: f64, sizes: &[usize]) -> Result<LemmaSuiteReport> {
    if sizes.is_empty() || sizes.windows(2).any(|w| w[1] <= w[0]) || sizes[0] == 0 {
        return usage("sizes must be positive and strictly increasing");
    }
    let sides = |d: &[f64]| if h == 0.5 { lemma_sides(d, h, p_prime) } else { finallemma_check(d, h, p_prime) };
    if h == 0.5 {
        let eps = 4.0 / p_prime - 1.0;
        if !(p_prime > 2.0 && eps > 0.0 && eps < 1.0) {
            return usage(format!("at H = 1/2, p′ must lie in (2, 4), got {p_prime}"));
        }
    }
    let rows = sizes
        .iter()
        .map(|&n| {
            let r = sides(&uniform_grid(n))?;
            Ok(LemmaRow { n, lhs: r.lhs, lhs_abs: r.lhs_abs, rhs: r.rhs, ratio: r.ratio() })
        })
        .collect::<Result<Vec<_>>>()?;
    let max_ratio = rows.iter().map(|r| r.ratio).fold(f64::NEG_INFINITY, f64::max);
    let ratio_non_increasing = rows.windows(2).all(|w| w[1].ratio <= w[0].ratio * (1.0 + 1e-12));
    let lattice = if h < 0.5 { Some(increasing_lattice(h, LATTICE_POINTS, 1e-14)?) } else { None };
    Ok(LemmaSuiteReport { hurst: h, p_prime, rows, max_ratio, ratio_non_increasing, lattice })
}

/// Monte-Carlo estimate of a fourth moment against the pairing formula.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct WickCheck {
    pub exact: f64,
    pub mean: f64,
    pub se: f64,
}

impl WickCheck {
    pub fn within(&self, bands: f64) -> bool {
        (self.mean - self.exact).abs() <= bands * self.se
    }
}

/// `E(X₁X₂X₃X₄)` for `X = A z` with a fixed mixing matrix `A`.
pub fn wick_monte_carlo(samples: usize, spec: &RngSpec) -> WickCheck {
    const MIX: [[f64; 4]; 4] = [[1.0, 0.0, 0.0, 0.0], [0.6, 0.8, 0.0, 0.0], [-0.3, 0.2, 0.9, 0.0], [0.5, -0.4, 0.1, 0.7]];
    let cov = |i: usize, j: usize| (0..4).map(|k| MIX[i][k] * MIX[j][k]).sum::<f64>();
    let exact = wick_fourth_moment(cov(0, 1), cov(0, 2), cov(0, 3), cov(1, 2), cov(1, 3), cov(2, 3));
    let mut rng = spec.rng();
    let (mut sum, mut sum2) = (0.0, 0.0);
    for _ in 0..samples {
        let z: [f64; 4] = std::array::from_fn(|_| rng.sample(StandardNormal));
        let prod: f64 = (0..4).map(|i| (0..4).map(|k| MIX[i][k] * z[k]).sum::<f64>()).product();
        sum += prod;
        sum2 += prod * prod;
    }
    let m = samples as f64;
    let mean = sum / m;
    WickCheck { exact, mean, se: ((sum2 / m - mean * mean) / m).sqrt() }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::Driver;

    fn small_bm() -> StudyConfig {
        StudyConfig { fine_exponent: 9, levels: vec![2, 3, 4, 5, 6], replicas: 8, seed: 5, bootstrap: 200, ..Default::default() }
    }

    #[test]
    fn floors_match_closed_forms() {
        assert_eq!(ZERO_FLOOR, (2.0 * 6f64.sqrt()).sqrt());
    }

    #[test]
    fn zero_approximant_defect_is_mesh_free() {
        let r = counterexample_study(2.5, 4, 6).unwrap();
        assert_eq!(r.meshes.len(), 7);
        for z in &r.zero {
            assert!((z.distance - ZERO_FLOOR).abs() < 1e-15);
            assert_eq!(z.witness, (0.0, 1.0));
        }
        assert!(r.zero_spread() < 1e-12);
        assert!(r.loops.iter().all(|l| l.distance >= LOOP_FLOOR));
        assert!(r.floor_holds());
    }

    #[test]
    fn counterexample_rejects_bad_input() {
        assert!(counterexample_study(3.5, 4, 1).is_err());
        assert!(counterexample_study(2.5, 6, 1).is_err());
    }

    #[test]
    fn good_sequence_study_is_deterministic() {
        let cfg = small_bm();
        let a = good_sequence_study(&cfg).unwrap();
        let b = good_sequence_study(&cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.records.len(), 8 * 5);
        assert!(a.defect_mean.windows(2).all(|w| w[1] < w[0]));
        assert!(a.defect_se.iter().all(|s| *s >= 0.0));
        assert!(a.slope > 0.0);
        assert!(a.a1_slope.unwrap() > 0.0);
        let mut csv_a = Vec::new();
        let mut csv_b = Vec::new();
        a.write_csv(&mut csv_a).unwrap();
        b.write_csv(&mut csv_b).unwrap();
        assert_eq!(csv_a, csv_b);
    }

    #[test]
    fn records_follow_replica_then_level_order() {
        let r = good_sequence_study(&small_bm()).unwrap();
        for (k, rec) in r.records.iter().enumerate() {
            assert_eq!(rec.replica, k / 5);
            assert_eq!(rec.level, [2, 3, 4, 5, 6][k % 5]);
        }
    }

    #[test]
    fn level_three_study_runs() {
        let cfg = StudyConfig {
            driver: Driver::Fbm { hurst: 0.3 },
            level: Level::Three,
            p: 3.8,
            fine_exponent: 7,
            levels: vec![2, 3, 4],
            replicas: 3,
            bootstrap: 0,
            ..Default::default()
        };
        let r = good_sequence_study(&cfg).unwrap();
        assert!(r.records.iter().all(|x| x.terms.is_none() && x.defect > 0.0));
        assert!(r.a1_slope.is_none());
    }

    #[test]
    fn endpoint_gap_matches_direct_sum() {
        let cfg = StudyConfig { replicas: 2, bootstrap: 0, ..small_bm() };
        let r = endpoint_l2_study(&cfg).unwrap();
        // ∫ B ⊗ dB^D − B² over [0, 1], recomputed from the interpolant by hand
        let fine = crate::gaussian::sample_bm(&cfg.fine_grid(), 2, &RngSpec::new(cfg.seed, 0)).unwrap();
        let lift = fine.signature_lift(Level::Two);
        let b2 = lift.increment(0, lift.len() - 1);
        let coarse = fine.linear_interpolant(&dyadic_grid(3)).unwrap().refine(fine.times()).unwrap();
        let mut integral = [0.0; 4];
        for k in 1..fine.len() {
            let (a, b) = (fine.value(k - 1), fine.value(k));
            let dx = [coarse.value(k)[0] - coarse.value(k - 1)[0], coarse.value(k)[1] - coarse.value(k - 1)[1]];
            for i in 0..2 {
                for j in 0..2 {
                    integral[i * 2 + j] += 0.5 * (a[i] + b[i] - 2.0 * fine.value(0)[i]) * dx[j];
                }
            }
        }
        let gap = (0..4).map(|k| (integral[k] - b2.second()[k]).powi(2)).sum::<f64>().sqrt();
        assert!((r.records[1].defect - gap).abs() < 1e-12, "{} vs {gap}", r.records[1].defect);
    }

    #[test]
    fn lemma_suite_examples() {
        let sizes = [4, 8, 16, 32, 64, 128, 256];
        let r = covariance_lemma_suite(0.4, 3.0, &sizes).unwrap();
        assert!(r.ratio_non_increasing);
        assert!(r.max_ratio <= 1.0 + 1e-12);
        let l = r.lattice.unwrap();
        assert_eq!(l.disjoint_sign + l.disjoint_order + l.nested_sign + l.nested_upper, 0);
        let half = covariance_lemma_suite(0.5, 3.0, &sizes).unwrap();
        for row in &half.rows {
            let diag = row.n as f64 * (1.0 / row.n as f64).powi(2);
            assert!((row.lhs - diag).abs() < 1e-14);
        }
        assert!(half.lattice.is_none());
        assert!(covariance_lemma_suite(0.4, 2.0, &sizes).is_err());
    }

    #[test]
    fn wick_check_is_reproducible() {
        let a = wick_monte_carlo(10_000, &RngSpec::new(2, 0));
        assert_eq!(a, wick_monte_carlo(10_000, &RngSpec::new(2, 0)));
        assert!(a.se > 0.0);
    }
}
