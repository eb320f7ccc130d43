//! Wong–Zakai studies and solver cross-checks.

use serde::Serialize;

use super::{aggregate, fit_rate, run_replicas, timed, DriverSampler, RateFit, RateStudyResult, ReplicaRecord, StudyConfig};
use crate::algebra::Level;
use crate::error::{usage, Result};
use crate::metrics::{holder_distance, PairSet};
use crate::path::{dyadic_grid, PiecewiseLinearPath};
use crate::rde::{solve_ode, solve_rde_level2, VectorFieldSet};

/// `(t, x_t − x_0, y₀) ↦ y_t` for equations whose solution is a function of
/// the current driver value.
pub type ClosedForm = dyn Fn(f64, &[f64], &[f64]) -> Vec<f64> + Send + Sync;

/// Where a solver study starts.
#[derive(Clone, Debug, PartialEq)]
pub enum InitialCondition {
    Fixed(Vec<f64>),
    /// `y₀ = x₁`, the endpoint of the driving sample.
    Endpoint,
}

/// `dy = a y dt + σ y ∘ dx` in one dimension, with solution
/// `y₀ exp(a t + σ (x_t − x_0))`.
pub fn linear_scalar_sde(a: f64, sigma: f64) -> Result<(VectorFieldSet, Box<ClosedForm>)> {
    let vf = VectorFieldSet::linear(1, Some(vec![a]), vec![vec![sigma]])?;
    let exact: Box<ClosedForm> = Box::new(move |t, x, y0| vec![y0[0] * (a * t + sigma * x[0]).exp()]);
    Ok((vf, exact))
}

fn max_gap(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max)
}

fn closed_form_path(exact: &ClosedForm, x: &PiecewiseLinearPath, y0: &[f64]) -> Vec<f64> {
    let x0 = x.start().to_vec();
    let mut dx = vec![0.0; x.dim()];
    let mut out = Vec::new();
    for (k, &t) in x.times().iter().enumerate() {
        for (c, v) in dx.iter_mut().enumerate() {
            *v = x.value(k)[c] - x0[c];
        }
        out.extend(exact(t, &dx, y0));
    }
    out
}

/// Solutions along dyadic interpolants of a fine sample against the level-2
/// rough solution of the same sample. The defect is the Hölder distance of
/// the lifted solutions; `uniform` is the sup gap on the fine grid, and
/// `oracle` the same gap between closed-form solutions when one is given.
pub fn wong_zakai_study(cfg: &StudyConfig, vf: &VectorFieldSet, init: &InitialCondition, exact: Option<&ClosedForm>) -> Result<RateStudyResult> {
    cfg.validate()?;
    if cfg.level != Level::Two {
        return usage("Wong–Zakai studies use level-2 drivers");
    }
    if let InitialCondition::Endpoint = init {
        if vf.state_dim() != vf.drive_dim() {
            return usage("an endpoint initial condition needs equal state and driver dimensions");
        }
    }
    let sampler = DriverSampler::new(cfg, vf.drive_dim())?;
    let pairs = cfg.pair_set();
    let (records, failed) = run_replicas(cfg, |r, spec| {
        let fine = sampler.sample(spec)?;
        let y0 = match init {
            InitialCondition::Fixed(y) => y.clone(),
            InitialCondition::Endpoint => fine.end().to_vec(),
        };
        let reference = solve_rde_level2(vf, &y0, &fine.signature_lift(Level::Two))?;
        let ref_lift = reference.y.signature_lift(Level::Two);
        let exact_fine = exact.map(|f| closed_form_path(f, &fine, &y0));
        cfg.levels
            .iter()
            .map(|&n| {
                let (rec, wall) = timed(cfg.timing, || {
                    let coarse = fine.linear_interpolant(&dyadic_grid(n))?.refine(fine.times())?;
                    let sol = solve_ode(vf, &y0, &coarse, cfg.substeps)?;
                    let defect = holder_distance(&sol.y.signature_lift(Level::Two), &ref_lift, cfg.p, pairs)?.distance;
                    let mut rec = ReplicaRecord::new(r, n, defect);
                    rec.uniform = Some(max_gap(sol.y.values(), reference.y.values()));
                    if let (Some(f), Some(e)) = (exact, &exact_fine) {
                        rec.oracle = Some(max_gap(&closed_form_path(f, &coarse, &y0), e));
                    }
                    Ok(rec)
                })?;
                Ok(ReplicaRecord { wall_ms: wall, ..rec })
            })
            .collect()
    })?;
    aggregate("wong_zakai", cfg, cfg.q, records, failed)
}

/// Terminal errors of the rough scheme on refinements of a piecewise-linear
/// driver, against a finely stepped ODE solution along the same driver.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OrderReport {
    pub mesh: Vec<f64>,
    pub error: Vec<f64>,
    pub fit: RateFit,
}

/// `driver` must have its breakpoints on the coarsest dyadic grid.
pub fn solver_order_study(vf: &VectorFieldSet, y0: &[f64], driver: &PiecewiseLinearPath, levels: &[u32], reference_substeps: usize) -> Result<OrderReport> {
    let reference = solve_ode(vf, y0, driver, reference_substeps)?;
    let mut mesh = Vec::with_capacity(levels.len());
    let mut error = Vec::with_capacity(levels.len());
    for &n in levels {
        let fine = driver.refine(&dyadic_grid(n))?;
        let rough = solve_rde_level2(vf, y0, &fine.signature_lift(Level::Two))?;
        mesh.push(0.5f64.powi(n as i32));
        error.push(max_gap(rough.terminal(), reference.terminal()));
    }
    let fit = fit_rate(&mesh, &error)?;
    Ok(OrderReport { mesh, error, fit })
}

/// Input and output distances of the Itô map for one perturbation size.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ContinuityPoint {
    pub scale: f64,
    /// `d(S(x), S(x + δh))`.
    pub input: f64,
    /// Distance between the joint lifts of driver and solution.
    pub output: f64,
    pub ratio: f64,
}

/// Perturbs `x` by `δ · direction` for each scale `δ` and compares the rough
/// solutions through their joint lifts.
pub fn ito_continuity(
    vf: &VectorFieldSet,
    y0: &[f64],
    x: &PiecewiseLinearPath,
    direction: &PiecewiseLinearPath,
    scales: &[f64],
    p: f64,
) -> Result<Vec<ContinuityPoint>> {
    if direction.times() != x.times() || direction.dim() != x.dim() {
        return usage("perturbation must share the driver's grid and dimension");
    }
    let pairs = PairSet::auto(x.len() - 1);
    let base_lift = x.signature_lift(Level::Two);
    let base = solve_rde_level2(vf, y0, &base_lift)?.joint_lift.expect("rough solver returns a joint lift");
    scales
        .iter()
        .map(|&scale| {
            let values: Vec<f64> = x.values().iter().zip(direction.values()).map(|(a, b)| a + scale * b).collect();
            let moved = PiecewiseLinearPath::new(x.times().to_vec(), values, x.dim())?.signature_lift(Level::Two);
            let joint = solve_rde_level2(vf, y0, &moved)?.joint_lift.expect("rough solver returns a joint lift");
            let input = holder_distance(&base_lift, &moved, p, pairs)?.distance;
            let output = holder_distance(&base, &joint, p, pairs)?.distance;
            Ok(ContinuityPoint { scale, input, output, ratio: output / input })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::Driver;
    use crate::gaussian::{sample_bm, RngSpec};
    use crate::path::uniform_grid;

    fn small() -> StudyConfig {
        StudyConfig {
            fine_exponent: 10,
            levels: vec![2, 4, 6],
            replicas: 6,
            dim: 1,
            bootstrap: 0,
            seed: 3,
            ..Default::default()
        }
    }

    #[test]
    fn linear_sde_matches_its_closed_form() {
        let (vf, exact) = linear_scalar_sde(0.3, 0.7).unwrap();
        let x = sample_bm(&uniform_grid(256), 1, &RngSpec::new(1, 0)).unwrap();
        let sol = solve_ode(&vf, &[2.0], &x, 16).unwrap();
        let closed = closed_form_path(exact.as_ref(), &x, &[2.0]);
        assert!(max_gap(sol.y.values(), &closed) < 1e-9);
    }

    #[test]
    fn wong_zakai_errors_follow_the_closed_form() {
        let (vf, exact) = linear_scalar_sde(0.2, 0.8).unwrap();
        let r = wong_zakai_study(&small(), &vf, &InitialCondition::Fixed(vec![1.0]), Some(exact.as_ref())).unwrap();
        assert!(r.slope > 0.0);
        for gap in r.oracle_gap().unwrap() {
            assert!(gap < 0.1, "{gap}");
        }
    }

    #[test]
    fn endpoint_start_is_supported() {
        let (vf, exact) = linear_scalar_sde(0.0, 1.0).unwrap();
        let r = wong_zakai_study(&small(), &vf, &InitialCondition::Endpoint, Some(exact.as_ref())).unwrap();
        assert!(r.slope > 0.0);
        let two = VectorFieldSet::linear(2, None, vec![vec![1.0, 0.0, 0.0, 1.0]]).unwrap();
        assert!(wong_zakai_study(&small(), &two, &InitialCondition::Endpoint, None).is_err());
    }

    #[test]
    fn resolved_smooth_driver_stops_changing() {
        // the driver is linear between quarter points, so levels ≥ 2 see it exactly
        let vf = VectorFieldSet::linear(1, None, vec![vec![0.9]]).unwrap();
        let x = PiecewiseLinearPath::new(uniform_grid(4), vec![0.0, 0.3, -0.1, 0.2, 0.5], 1).unwrap();
        let fine = x.refine(&dyadic_grid(9)).unwrap();
        let gaps = crate::rde::stratonovich_compare(&vf, &[1.0], &fine, &[2, 4, 6], 2.5, 1).unwrap();
        assert!((gaps[0].uniform - gaps[2].uniform).abs() < 1e-13);
        assert!((gaps[1].uniform - gaps[2].uniform).abs() < 1e-13);
    }

    #[test]
    fn fbm_drivers_are_accepted() {
        let (vf, _) = linear_scalar_sde(0.0, 0.5).unwrap();
        let cfg = StudyConfig { driver: Driver::Fbm { hurst: 0.4 }, p: 2.8, ..small() };
        let r = wong_zakai_study(&cfg, &vf, &InitialCondition::Fixed(vec![1.0]), None).unwrap();
        assert!(r.records.iter().all(|x| x.oracle.is_none() && x.uniform.is_some()));
    }

    #[test]
    fn rough_scheme_has_at_least_first_order() {
        let vf = VectorFieldSet::new(
            2,
            2,
            std::sync::Arc::new(|y: &[f64], out: &mut [f64]| {
                out[0] = y[1].cos();
                out[1] = 0.5 * y[0];
                out[2] = y[0].sin();
                out[3] = 1.0 + 0.2 * y[1];
            }),
        )
        .unwrap();
        let x = sample_bm(&dyadic_grid(4), 2, &RngSpec::new(4, 0)).unwrap();
        let r = solver_order_study(&vf, &[0.3, -0.2], &x, &[5, 6, 7, 8, 9], 256).unwrap();
        assert!(r.fit.slope >= 0.9, "{r:?}");
    }

    #[test]
    fn ito_map_ratio_is_stable() {
        let two = VectorFieldSet::linear(1, None, vec![vec![0.6], vec![-0.4]]).unwrap();
        let grid = dyadic_grid(7);
        let x = sample_bm(&grid, 2, &RngSpec::new(6, 0)).unwrap();
        let h: Vec<f64> = grid.iter().flat_map(|t| [(3.0 * t).sin(), t * t]).collect();
        let h = PiecewiseLinearPath::new(grid.clone(), h, 2).unwrap();
        let pts = ito_continuity(&two, &[1.0], &x, &h, &[1e-3, 1e-2, 1e-1], 2.5).unwrap();
        let max = pts.iter().map(|p| p.ratio).fold(0.0, f64::max);
        let min = pts.iter().map(|p| p.ratio).fold(f64::INFINITY, f64::min);
        assert!(max / min < 3.0, "{pts:?}");
    }
}
