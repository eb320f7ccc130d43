//! Controls, Hölder-type and p-variation distances between lifted paths, and
//! the defect of an approximating sequence against a rough reference.

use rayon::prelude::*;
use serde::Serialize;

use crate::algebra::{euclid, Level, Shape};
use crate::error::{usage, Error, Result};
use crate::path::{s_prime_concat, s_prime_level2, LiftedPath, PiecewiseLinearPath};

/// A control `ω(s, t)` on `[0, 1]`.
pub trait Control: Sync {
    fn eval(&self, s: f64, t: f64) -> f64;
}

/// `ω(s, t) = t − s`.
#[derive(Clone, Copy, Debug, Default)]
pub struct HolderControl;

impl Control for HolderControl {
    fn eval(&self, s: f64, t: f64) -> f64 {
        t - s
    }
}

impl<F: Fn(f64, f64) -> f64 + Sync> Control for F {
    fn eval(&self, s: f64, t: f64) -> f64 {
        self(s, t)
    }
}

/// Checks `ω(t, t) = 0`, `ω ≥ 0` and `ω(s, t) + ω(t, u) ≤ ω(s, u)` on every
/// ordered triple of `grid`, up to `tol`.
pub fn check_control(control: &dyn Control, grid: &[f64], tol: f64) -> Result<()> {
    for (a, &s) in grid.iter().enumerate() {
        if control.eval(s, s).abs() > tol {
            return Err(Error::Domain(format!("ω({s}, {s}) ≠ 0")));
        }
        for (b, &t) in grid.iter().enumerate().skip(a + 1) {
            let st = control.eval(s, t);
            if !(st >= -tol) {
                return Err(Error::Domain(format!("ω({s}, {t}) = {st} is negative")));
            }
            for &u in &grid[b + 1..] {
                if st + control.eval(t, u) > control.eval(s, u) + tol {
                    return Err(Error::Domain(format!("ω is not superadditive at ({s}, {t}, {u})")));
                }
            }
        }
    }
    Ok(())
}

/// Which grid pairs `(t_i, t_j)` a supremum runs over.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PairSet {
    /// Every `i < j`.
    All,
    /// Only `j = i + 2^k`; a cheap lower estimate of the full supremum.
    Dyadic,
}

impl PairSet {
    /// Grids above this many intervals default to dyadic pairs.
    pub const AUTO_LIMIT: usize = 512;

    pub fn auto(intervals: usize) -> PairSet {
        if intervals > Self::AUTO_LIMIT {
            PairSet::Dyadic
        } else {
            PairSet::All
        }
    }

    fn partners(self, i: usize, n: usize) -> Box<dyn Iterator<Item = usize>> {
        match self {
            PairSet::All => Box::new(i + 1..n),
            PairSet::Dyadic => Box::new((0..usize::BITS).map(|k| 1usize << k).map(move |step| i + step).take_while(move |&j| j < n)),
        }
    }
}

impl std::str::FromStr for PairSet {
    type Err = Error;

    fn from_str(s: &str) -> Result<PairSet> {
        match s {
            "all" => Ok(PairSet::All),
            "dyadic" => Ok(PairSet::Dyadic),
            other => usage(format!("unknown pair set {other:?} (expected all or dyadic)")),
        }
    }
}

/// Result of a supremum over grid pairs.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MetricReport {
    pub distance: f64,
    /// `(s, t)` attaining the supremum; the first in lexicographic order on ties.
    pub witness: (f64, f64),
    pub basepoint_term: f64,
}

impl MetricReport {
    pub const CSV_HEADER: &'static str = "distance,witness_s,witness_t,basepoint_term";

    pub fn csv_row(&self) -> String {
        format!("{:.16e},{:.16e},{:.16e},{:.16e}", self.distance, self.witness.0, self.witness.1, self.basepoint_term)
    }
}

/// Best value and the pair attaining it; `(value, i, j)`.
type Best = (f64, usize, usize);

const NO_PAIR: Best = (f64::NEG_INFINITY, usize::MAX, usize::MAX);

fn better(a: Best, b: Best) -> Best {
    // larger value wins; equal values keep the lexicographically first pair
    if b.0 > a.0 || (b.0 == a.0 && (b.1, b.2) < (a.1, a.2)) {
        b
    } else {
        a
    }
}

/// Supremum of `f(i, j, scratch)` over the pair set; `scratch` holds
/// `scratch_len` reals private to the worker. Independent of scheduling.
fn sup_over_pairs<F>(n: usize, pairs: PairSet, scratch_len: usize, f: F) -> Best
where
    F: Fn(usize, usize, &mut [f64]) -> f64 + Sync,
{
    (0..n.saturating_sub(1))
        .into_par_iter()
        .map_init(
            || vec![0.0; scratch_len],
            |scratch, i| {
                pairs.partners(i, n).fold(NO_PAIR, |best, j| better(best, (f(i, j, scratch), i, j)))
            },
        )
        .reduce(|| NO_PAIR, better)
}

fn check_grids(x: &LiftedPath, y: &LiftedPath) -> Result<()> {
    if x.shape() != y.shape() {
        return usage(format!("shape mismatch: {:?} vs {:?}", x.shape(), y.shape()));
    }
    if x.times() != y.times() {
        return usage("lifted paths must share the same time grid");
    }
    Ok(())
}

fn check_p(p: f64) -> Result<()> {
    if !(p > 1.0 && p.is_finite()) {
        return usage(format!("p must be a finite number above 1, got {p}"));
    }
    Ok(())
}

/// `d_{ω,p}(x, y) = d(x₀, y₀) + sup d(x_{s,t}, y_{s,t}) / ω(s,t)^{1/p}` over grid pairs.
pub fn holder_distance_with(x: &LiftedPath, y: &LiftedPath, p: f64, pairs: PairSet, control: &dyn Control) -> Result<MetricReport> {
    check_grids(x, y)?;
    check_p(p)?;
    let shape = x.shape();
    let len = shape.len();
    let times = x.times();
    let mut scratch = vec![0.0; len];
    let base = shape.distance(x.point_slice(0), y.point_slice(0), &mut scratch);
    let (sup, i, j) = sup_over_pairs(x.len(), pairs, 3 * len, |i, j, buf| {
        let (xs, rest) = buf.split_at_mut(len);
        let (ys, tmp) = rest.split_at_mut(len);
        x.increment_into(i, j, xs);
        y.increment_into(i, j, ys);
        shape.distance(xs, ys, tmp) / control.eval(times[i], times[j]).powf(1.0 / p)
    });
    Ok(MetricReport { distance: base + sup, witness: (times[i], times[j]), basepoint_term: base })
}

pub fn holder_distance(x: &LiftedPath, y: &LiftedPath, p: f64, pairs: PairSet) -> Result<MetricReport> {
    holder_distance_with(x, y, p, pairs, &HolderControl)
}

/// `max over subdivisions (Σ c(t_{k}, t_{k+1})^p)^{1/p}` by dynamic programming.
fn p_variation_dp(n: usize, p: f64, cost: impl Fn(usize, usize) -> f64) -> f64 {
    let mut best = vec![0.0f64; n];
    for j in 1..n {
        best[j] = (0..j).map(|i| best[i] + cost(i, j).powf(p)).fold(0.0, f64::max);
    }
    best[n - 1].powf(1.0 / p)
}

/// p-variation of `x` over subdivisions with points on its grid, O(N²).
pub fn p_variation_norm(x: &LiftedPath, p: f64) -> Result<f64> {
    if !(p >= 1.0 && p.is_finite()) {
        return usage(format!("p must be a finite number of at least 1, got {p}"));
    }
    let shape = x.shape();
    let mut buf = vec![0.0; shape.len()];
    let mut norms = vec![0.0; x.len() * x.len()];
    for i in 0..x.len() {
        for j in i + 1..x.len() {
            norms[i * x.len() + j] = shape.distance(x.point_slice(i), x.point_slice(j), &mut buf);
        }
    }
    Ok(p_variation_dp(x.len(), p, |i, j| norms[i * x.len() + j]))
}

/// p-variation distance `(max Σ d(x_{t_k,t_{k+1}}, y_{t_k,t_{k+1}})^p)^{1/p}`.
pub fn p_variation_distance(x: &LiftedPath, y: &LiftedPath, p: f64) -> Result<f64> {
    check_grids(x, y)?;
    if !(p >= 1.0 && p.is_finite()) {
        return usage(format!("p must be a finite number of at least 1, got {p}"));
    }
    let shape = x.shape();
    let len = shape.len();
    let n = x.len();
    let mut buf = vec![0.0; 3 * len];
    let mut costs = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let (xs, rest) = buf.split_at_mut(len);
            let (ys, tmp) = rest.split_at_mut(len);
            x.increment_into(i, j, xs);
            y.increment_into(i, j, ys);
            costs[i * n + j] = shape.distance(xs, ys, tmp);
        }
    }
    Ok(p_variation_dp(n, p, |i, j| costs[i * n + j]))
}

/// Reference for [`good_sequence_defect`].
#[derive(Clone, Copy, Debug)]
pub enum Reference<'a> {
    /// A piecewise-linear path, lifted at the given level.
    Path(&'a PiecewiseLinearPath, Level),
    /// A level-2 rough path with its own second level.
    Lifted(&'a LiftedPath),
}

/// The pair `(S′(x_n, x), S″(x))` on the reference grid.
pub fn joint_lifts(x_n: &PiecewiseLinearPath, reference: Reference<'_>) -> Result<(LiftedPath, LiftedPath)> {
    match reference {
        Reference::Path(y, level) => {
            let x_n = x_n.refine(y.times())?;
            let sp = s_prime_concat(&x_n, y, level)?;
            Ok((sp, y.signature_lift(level).diagonal()))
        }
        Reference::Lifted(y) => Ok((s_prime_level2(x_n, y)?, y.diagonal())),
    }
}

/// `d_{ω,p}(S′(x_n, x), S″(x))`, the defect of `x_n` as an approximation of `x`.
pub fn good_sequence_defect(x_n: &PiecewiseLinearPath, reference: Reference<'_>, p: f64, pairs: PairSet) -> Result<MetricReport> {
    let (sp, spp) = joint_lifts(x_n, reference)?;
    holder_distance(&sp, &spp, p, pairs)
}

/// The three suprema characterising a good sequence at level 2:
/// * `a1 = sup |x_{n;s,t} − x¹_{s,t}| / ω^{1/p}`
/// * `a2 = sup |∫ x_{n;s,u} ⊗ dx_{n;u} − x²_{s,t}| / ω^{2/p}`
/// * `a4 = sup |∫ x¹_{s,u} ⊗ dx_{n;u} − x²_{s,t}| / ω^{2/p}`
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct Good2Terms {
    pub a1: f64,
    pub a2: f64,
    pub a4: f64,
}

impl Good2Terms {
    /// `max(a1, √a2, √a4)`, the scale the defect is bounded by.
    pub fn scale(&self) -> f64 {
        self.a1.max(self.a2.sqrt()).max(self.a4.sqrt())
    }
}

/// Reads the three terms off one increment of a level-2 joint lift over
/// `R^d ⊕ R^d`; the `(y, y)` block is the reference's second level.
pub(crate) fn good2_from_increment(z: &[f64], d: usize) -> (f64, f64, f64) {
    let dd = 2 * d;
    let (z1, z2) = (&z[1..=dd], &z[1 + dd..]);
    let mut e1 = 0.0;
    for i in 0..d {
        e1 += (z1[i] - z1[d + i]).powi(2);
    }
    let (mut e2, mut e4) = (0.0, 0.0);
    for i in 0..d {
        for j in 0..d {
            let yy = z2[(d + i) * dd + d + j];
            e2 += (z2[i * dd + j] - yy).powi(2);
            e4 += (z2[(d + i) * dd + j] - yy).powi(2);
        }
    }
    (e1.sqrt(), e2.sqrt(), e4.sqrt())
}

fn check_joint(sp: &LiftedPath) -> Result<usize> {
    if sp.level() != Level::Two || !sp.dim().is_multiple_of(2) {
        return usage("good2 terms need a level-2 joint lift of even dimension");
    }
    Ok(sp.dim() / 2)
}

/// Defect and good2 terms from one pass over the pairs of a joint lift.
pub fn defect_with_terms(sp: &LiftedPath, spp: &LiftedPath, p: f64, pairs: PairSet) -> Result<(MetricReport, Good2Terms)> {
    check_grids(sp, spp)?;
    check_p(p)?;
    let d = check_joint(sp)?;
    let report = holder_distance(sp, spp, p, pairs)?;
    let terms = good2_terms_joint(sp, d, p, pairs);
    Ok((report, terms))
}

fn good2_terms_joint(sp: &LiftedPath, d: usize, p: f64, pairs: PairSet) -> Good2Terms {
    let shape: Shape = sp.shape();
    let times = sp.times();
    let n = sp.len();
    let per_i: Vec<(f64, f64, f64)> = (0..n.saturating_sub(1))
        .into_par_iter()
        .map_init(
            || vec![0.0; shape.len()],
            |z, i| {
                pairs.partners(i, n).fold((0.0f64, 0.0f64, 0.0f64), |acc, j| {
                    sp.increment_into(i, j, z);
                    let (e1, e2, e4) = good2_from_increment(z, d);
                    let w = times[j] - times[i];
                    let (r1, r2) = (w.powf(1.0 / p), w.powf(2.0 / p));
                    (acc.0.max(e1 / r1), acc.1.max(e2 / r2), acc.2.max(e4 / r2))
                })
            },
        )
        .collect();
    per_i.into_iter().fold(Good2Terms::default(), |t, (a1, a2, a4)| Good2Terms {
        a1: t.a1.max(a1),
        a2: t.a2.max(a2),
        a4: t.a4.max(a4),
    })
}

/// The three suprema for `x_n` against a level-2 reference.
pub fn good2_terms(x_n: &PiecewiseLinearPath, reference: &LiftedPath, p: f64, pairs: PairSet) -> Result<Good2Terms> {
    check_p(p)?;
    if reference.level() != Level::Two {
        return Err(Error::Unsupported("good2 terms are defined at level 2".into()));
    }
    let sp = s_prime_level2(x_n, reference)?;
    let d = check_joint(&sp)?;
    Ok(good2_terms_joint(&sp, d, p, pairs))
}

/// Euclidean norm of the level-`k` part of a flat buffer.
pub fn level_norm(shape: Shape, x: &[f64], k: usize) -> f64 {
    match k {
        1 => euclid(shape.first(x)),
        2 => euclid(shape.second(x)),
        3 => shape.third(x).map_or(0.0, euclid),
        _ => 0.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::GroupElement;
    use crate::path::{dyadic_grid, pure_area_path, uniform_grid};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_path(rng: &mut ChaCha8Rng, times: Vec<f64>, dim: usize) -> PiecewiseLinearPath {
        let scale = (1.0 / times.len() as f64).sqrt();
        let mut values = vec![0.0; dim];
        for _ in 1..times.len() {
            let last = values[values.len() - dim..].to_vec();
            values.extend(last.iter().map(|v| v + scale * rng.random_range(-1.7..1.7)));
        }
        PiecewiseLinearPath::new(times, values, dim).unwrap()
    }

    fn identity_path(times: &[f64]) -> LiftedPath {
        PiecewiseLinearPath::constant(times.to_vec(), &[0.0, 0.0]).unwrap().signature_lift(Level::Two)
    }

    /// Naive supremum through the public group API.
    fn brute_holder(x: &LiftedPath, y: &LiftedPath, p: f64) -> f64 {
        let base = x.point(0).distance(&y.point(0)).unwrap();
        let t = x.times();
        let mut sup = 0.0f64;
        for i in 0..x.len() {
            for j in i + 1..x.len() {
                let d = x.increment(i, j).distance(&y.increment(i, j)).unwrap();
                sup = sup.max(d / (t[j] - t[i]).powf(1.0 / p));
            }
        }
        base + sup
    }

    /// Enumerates all subdivisions of the grid.
    fn brute_p_variation(x: &LiftedPath, p: f64) -> f64 {
        let n = x.len();
        let mut best = 0.0f64;
        for mask in 0u32..(1 << (n - 2)) {
            let mut pts = vec![0];
            pts.extend((1..n - 1).filter(|k| mask & (1 << (k - 1)) != 0));
            pts.push(n - 1);
            let s: f64 = pts.windows(2).map(|w| x.increment(w[0], w[1]).norm().powf(p)).sum();
            best = best.max(s);
        }
        best.powf(1.0 / p)
    }

    #[test]
    fn holder_control_is_superadditive() {
        check_control(&HolderControl, &uniform_grid(12), 1e-15).unwrap();
        let concave = |s: f64, t: f64| (t - s).sqrt();
        assert!(check_control(&concave, &uniform_grid(6), 1e-15).is_err());
        let convex = |s: f64, t: f64| (t - s).powi(2);
        check_control(&convex, &uniform_grid(6), 1e-15).unwrap();
    }

    #[test]
    fn distance_to_itself_is_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = random_path(&mut rng, dyadic_grid(5), 2).signature_lift(Level::Three);
        let r = holder_distance(&x, &x, 2.5, PairSet::All).unwrap();
        assert_eq!(r.distance, 0.0);
        assert_eq!(r.witness, (0.0, 1.0 / 32.0));
    }

    #[test]
    fn pure_area_against_identity() {
        let grid = dyadic_grid(4);
        let y = pure_area_path(&grid).unwrap();
        let x = identity_path(&grid);
        let want = (2.0 * 2f64.sqrt()).sqrt();
        for pairs in [PairSet::All, PairSet::Dyadic] {
            let r = holder_distance(&x, &y, 2.5, pairs).unwrap();
            assert!((r.distance - want).abs() < 1e-14);
            assert_eq!(r.witness, (0.0, 1.0));
            assert_eq!(r.basepoint_term, 0.0);
        }
        assert!((brute_holder(&x, &y, 2.5) - want).abs() < 1e-14);
    }

    #[test]
    fn witness_tie_break_is_lexicographic() {
        // identical increments on every unit step: all single steps tie
        let x = PiecewiseLinearPath::new(uniform_grid(4), vec![0.0, 1.0, 0.0, 1.0, 0.0], 1).unwrap();
        let zero = PiecewiseLinearPath::constant(uniform_grid(4), &[0.0]).unwrap();
        let r = holder_distance(&x.signature_lift(Level::Two), &zero.signature_lift(Level::Two), 1.5, PairSet::All).unwrap();
        assert_eq!(r.witness, (0.0, 0.25));
    }

    #[test]
    fn grid_mismatch_is_rejected() {
        let a = identity_path(&dyadic_grid(3));
        let b = identity_path(&uniform_grid(6));
        assert!(matches!(holder_distance(&a, &b, 2.5, PairSet::All), Err(Error::Usage(_))));
        assert!(matches!(holder_distance(&a, &a, 1.0, PairSet::All), Err(Error::Usage(_))));
    }

    #[test]
    fn basepoint_term_counts_the_start() {
        let grid = dyadic_grid(3);
        let a = PiecewiseLinearPath::constant(grid.clone(), &[0.0, 0.0]).unwrap().signature_lift(Level::Two);
        let b = PiecewiseLinearPath::constant(grid, &[3.0, 4.0]).unwrap().signature_lift(Level::Two);
        let r = holder_distance(&a, &b, 2.5, PairSet::All).unwrap();
        assert!((r.basepoint_term - 5.0).abs() < 1e-14);
        assert!((r.distance - 5.0).abs() < 1e-14);
    }

    #[test]
    fn dyadic_pairs_do_not_exceed_all_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..5 {
            let x = random_path(&mut rng, dyadic_grid(6), 2).signature_lift(Level::Two);
            let y = random_path(&mut rng, dyadic_grid(6), 2).signature_lift(Level::Two);
            let all = holder_distance(&x, &y, 2.5, PairSet::All).unwrap().distance;
            let dy = holder_distance(&x, &y, 2.5, PairSet::Dyadic).unwrap().distance;
            assert!(all >= dy);
            assert!((all - brute_holder(&x, &y, 2.5)).abs() < 1e-12);
        }
    }

    #[test]
    fn dyadic_partners() {
        let js: Vec<usize> = PairSet::Dyadic.partners(3, 12).collect();
        assert_eq!(js, vec![4, 5, 7, 11]);
        assert_eq!(PairSet::auto(512), PairSet::All);
        assert_eq!(PairSet::auto(1024), PairSet::Dyadic);
    }

    #[test]
    fn report_csv_row() {
        let r = MetricReport { distance: 1.5, witness: (0.0, 0.5), basepoint_term: 0.25 };
        assert_eq!(r.csv_row(), "1.5000000000000000e0,0.0000000000000000e0,5.0000000000000000e-1,2.5000000000000000e-1");
    }

    #[test]
    fn p_variation_examples() {
        let line = PiecewiseLinearPath::new(uniform_grid(10), uniform_grid(10), 1).unwrap().signature_lift(Level::Two);
        assert!((p_variation_norm(&line, 2.0).unwrap() - 1.0).abs() < 1e-14);

        let zig = PiecewiseLinearPath::new(uniform_grid(5), vec![0.0, 1.0, -0.5, 0.25, 2.0, 1.0], 1).unwrap();
        let total: f64 = zig.values().windows(2).map(|w| (w[1] - w[0]).abs()).sum();
        let lifted = zig.signature_lift(Level::Two);
        assert!((p_variation_norm(&lifted, 1.0).unwrap() - total).abs() < 1e-14);

        let flat = PiecewiseLinearPath::constant(uniform_grid(6), &[1.0, 2.0]).unwrap().signature_lift(Level::Three);
        assert_eq!(p_variation_norm(&flat, 2.5).unwrap(), 0.0);
    }

    #[test]
    fn p_variation_dp_matches_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in [3, 7, 12] {
            let x = random_path(&mut rng, uniform_grid(n - 1), 2).signature_lift(Level::Two);
            for p in [1.0, 2.5, 3.5] {
                let dp = p_variation_norm(&x, p).unwrap();
                assert!((dp - brute_p_variation(&x, p)).abs() < 1e-12 * dp.max(1.0));
            }
        }
    }

    #[test]
    fn p_variation_distance_to_identity_is_the_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = random_path(&mut rng, uniform_grid(9), 2).signature_lift(Level::Two);
        let e = identity_path(x.times());
        let a = p_variation_distance(&x, &e, 2.5).unwrap();
        assert!((a - p_variation_norm(&x, 2.5).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn metrics_grow_under_refinement() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let coarse = random_path(&mut rng, dyadic_grid(3), 2);
        let other = random_path(&mut rng, dyadic_grid(3), 2);
        let fine_grid = dyadic_grid(5);
        let (a, b) = (coarse.signature_lift(Level::Two), other.signature_lift(Level::Two));
        let (af, bf) = (
            coarse.refine(&fine_grid).unwrap().signature_lift(Level::Two),
            other.refine(&fine_grid).unwrap().signature_lift(Level::Two),
        );
        assert!(holder_distance(&af, &bf, 2.5, PairSet::All).unwrap().distance >= holder_distance(&a, &b, 2.5, PairSet::All).unwrap().distance - 1e-12);
        assert!(p_variation_norm(&af, 2.5).unwrap() >= p_variation_norm(&a, 2.5).unwrap() - 1e-12);
        let finer = dyadic_grid(6);
        let af2 = coarse.refine(&finer).unwrap().signature_lift(Level::Two);
        let pv1 = p_variation_norm(&af, 1.0).unwrap();
        let pv2 = p_variation_norm(&af2, 1.0).unwrap();
        assert!((pv1 - pv2).abs() < 1e-12);
    }

    #[test]
    fn defect_vanishes_on_itself() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let y = random_path(&mut rng, dyadic_grid(6), 2);
        let lifted = y.signature_lift(Level::Two);
        let r = good_sequence_defect(&y, Reference::Lifted(&lifted), 2.5, PairSet::All).unwrap();
        assert!(r.distance < 1e-6);
        let r3 = good_sequence_defect(&y, Reference::Path(&y, Level::Three), 3.5, PairSet::All).unwrap();
        assert_eq!(r3.distance, 0.0);
        let t = good2_terms(&y, &lifted, 2.5, PairSet::All).unwrap();
        assert!(t.a1 == 0.0 && t.a2 < 1e-12 && t.a4 < 1e-12);
    }

    #[test]
    fn pure_area_counterexample_floor() {
        let grid = dyadic_grid(4);
        let y = pure_area_path(&grid).unwrap();
        let zero = PiecewiseLinearPath::constant(grid.clone(), &[0.0, 0.0]).unwrap();
        let (sp, spp) = joint_lifts(&zero, Reference::Lifted(&y)).unwrap();
        let (r, t) = defect_with_terms(&sp, &spp, 2.5, PairSet::All).unwrap();
        // three of the four level-2 blocks differ by t[e1, e2]
        let want = (2.0 * 6f64.sqrt()).sqrt();
        assert!((r.distance - want).abs() < 1e-14);
        assert_eq!(r.witness, (0.0, 1.0));
        assert!((brute_holder(&sp, &spp, 2.5) - want).abs() < 1e-14);
        assert_eq!(t.a1, 0.0);
        assert!((t.a2 - 2f64.sqrt()).abs() < 1e-14);
        assert!((t.a4 - 2f64.sqrt()).abs() < 1e-14);
        assert_eq!(good2_terms(&zero, &y, 2.5, PairSet::All).unwrap(), t);
    }

    #[test]
    fn unsupported_levels() {
        let x = PiecewiseLinearPath::constant(dyadic_grid(2), &[0.0, 0.0]).unwrap();
        let l3 = x.signature_lift(Level::Three);
        assert!(matches!(good2_terms(&x, &l3, 2.5, PairSet::All), Err(Error::Unsupported(_))));
        assert!(matches!(good_sequence_defect(&x, Reference::Lifted(&l3), 2.5, PairSet::All), Err(Error::Unsupported(_))));
    }

    #[test]
    fn level_norms() {
        let g = GroupElement::exp_vector(&[3.0, 4.0], Level::Three);
        let s = g.shape();
        assert_eq!(level_norm(s, g.as_slice(), 1), 5.0);
        assert!((level_norm(s, g.as_slice(), 2) - 12.5).abs() < 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn holder_distance_is_a_metric(seed in any::<u64>(), level3 in any::<bool>()) {
            let level = if level3 { Level::Three } else { Level::Two };
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let [x, y, z] = [0, 1, 2].map(|_| random_path(&mut rng, dyadic_grid(4), 2).signature_lift(level));
            let dxy = holder_distance(&x, &y, 2.5, PairSet::All).unwrap().distance;
            let dyx = holder_distance(&y, &x, 2.5, PairSet::All).unwrap().distance;
            let dyz = holder_distance(&y, &z, 2.5, PairSet::All).unwrap().distance;
            let dxz = holder_distance(&x, &z, 2.5, PairSet::All).unwrap().distance;
            prop_assert!((dxy - dyx).abs() < 1e-12);
            prop_assert!(dxz <= dxy + dyz + 1e-12);
        }
    }
}
