//! Differential equations driven by piecewise-linear paths and by level-2
//! rough paths.

use std::sync::Arc;

use serde::Serialize;

use crate::algebra::{Level, Shape};
use crate::error::{usage, Error, Result};
use crate::metrics::{holder_distance, PairSet};
use crate::path::{concat_oplus, dyadic_grid, LiftedPath, PiecewiseLinearPath};

/// `f(y, out)` writing the value of a field at `y`.
pub type FieldFn = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;

/// Drift `V₀: Rⁿ → Rⁿ`, driving fields `V₁..V_d` and optionally their Jacobians.
///
/// Layouts: `fields(y, out)` fills `out[r·d + i] = V_i(y)_r`; `jacobian(y, out)`
/// fills `out[(i·n + r)·n + c] = ∂_c V_i(y)_r`. Callables must be safe to
/// evaluate concurrently.
#[derive(Clone)]
pub struct VectorFieldSet {
    state_dim: usize,
    drive_dim: usize,
    drift: Option<FieldFn>,
    fields: FieldFn,
    jacobian: Option<FieldFn>,
}

impl std::fmt::Debug for VectorFieldSet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("VectorFieldSet")
            .field("state_dim", &self.state_dim)
            .field("drive_dim", &self.drive_dim)
            .field("drift", &self.drift.is_some())
            .field("jacobian", &self.jacobian.is_some())
            .finish()
    }
}

fn probe_points(n: usize) -> Vec<Vec<f64>> {
    let mut pts = vec![vec![0.0; n], vec![1.0; n]];
    pts.push((0..n).map(|c| 0.37 - 0.61 * c as f64).collect());
    pts.push((0..n).map(|c| -1.3 + 0.45 * (c as f64).sin()).collect());
    pts
}

fn fd_step(v: f64) -> f64 {
    1e-6 * v.abs().max(1.0)
}

impl VectorFieldSet {
    pub fn new(state_dim: usize, drive_dim: usize, fields: FieldFn) -> Result<VectorFieldSet> {
        if state_dim == 0 || drive_dim == 0 {
            return usage("state and driving dimensions must be positive");
        }
        Ok(VectorFieldSet { state_dim, drive_dim, drift: None, fields, jacobian: None })
    }

    pub fn with_drift(mut self, drift: FieldFn) -> VectorFieldSet {
        self.drift = Some(drift);
        self
    }

    /// Attaches exact Jacobians after comparing them with central differences
    /// at a few probe points (relative tolerance `1e−5`).
    pub fn with_jacobian(mut self, jacobian: FieldFn) -> Result<VectorFieldSet> {
        let (n, d) = (self.state_dim, self.drive_dim);
        let mut exact = vec![0.0; d * n * n];
        let mut approx = vec![0.0; d * n * n];
        for y in probe_points(n) {
            jacobian(&y, &mut exact);
            self.fd_jacobian(&y, &mut approx);
            for (k, (a, b)) in exact.iter().zip(&approx).enumerate() {
                if (a - b).abs() > 1e-5 * a.abs().max(b.abs()).max(1.0) {
                    let (i, rc) = (k / (n * n), k % (n * n));
                    return usage(format!(
                        "Jacobian of V_{} entry ({}, {}) at {y:?} is {a}, finite differences give {b}",
                        i + 1,
                        rc / n,
                        rc % n
                    ));
                }
            }
        }
        self.jacobian = Some(jacobian);
        Ok(self)
    }

    /// `V₀(y) = A₀ y`, `V_i(y) = A_i y` for row-major `n × n` matrices.
    pub fn linear(n: usize, drift: Option<Vec<f64>>, matrices: Vec<Vec<f64>>) -> Result<VectorFieldSet> {
        let d = matrices.len();
        if matrices.iter().chain(drift.iter()).any(|m| m.len() != n * n) {
            return usage(format!("linear fields need {n}×{n} matrices"));
        }
        let mats = Arc::new(matrices);
        let m = mats.clone();
        let fields: FieldFn = Arc::new(move |y, out| {
            for r in 0..n {
                for (i, a) in m.iter().enumerate() {
                    out[r * d + i] = (0..n).map(|c| a[r * n + c] * y[c]).sum();
                }
            }
        });
        let m = mats.clone();
        let jac: FieldFn = Arc::new(move |_, out| {
            for (i, a) in m.iter().enumerate() {
                out[i * n * n..(i + 1) * n * n].copy_from_slice(a);
            }
        });
        let mut vf = VectorFieldSet::new(n, d, fields)?.with_jacobian(jac)?;
        if let Some(a0) = drift {
            vf = vf.with_drift(Arc::new(move |y, out| {
                for r in 0..n {
                    out[r] = (0..n).map(|c| a0[r * n + c] * y[c]).sum();
                }
            }));
        }
        Ok(vf)
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn drive_dim(&self) -> usize {
        self.drive_dim
    }

    pub fn has_exact_jacobian(&self) -> bool {
        self.jacobian.is_some()
    }

    pub fn eval_fields(&self, y: &[f64], out: &mut [f64]) {
        (self.fields)(y, out)
    }

    pub fn eval_drift(&self, y: &[f64], out: &mut [f64]) {
        match &self.drift {
            Some(f) => f(y, out),
            None => out.fill(0.0),
        }
    }

    fn fd_jacobian(&self, y: &[f64], out: &mut [f64]) {
        let (n, d) = (self.state_dim, self.drive_dim);
        let mut yp = y.to_vec();
        let (mut fp, mut fm) = (vec![0.0; n * d], vec![0.0; n * d]);
        for c in 0..n {
            let h = fd_step(y[c]);
            yp[c] = y[c] + h;
            (self.fields)(&yp, &mut fp);
            yp[c] = y[c] - h;
            (self.fields)(&yp, &mut fm);
            yp[c] = y[c];
            for i in 0..d {
                for r in 0..n {
                    out[(i * n + r) * n + c] = (fp[r * d + i] - fm[r * d + i]) / (2.0 * h);
                }
            }
        }
    }

    /// Jacobians of the driving fields, by central differences when no exact
    /// Jacobian was supplied.
    pub fn eval_jacobian(&self, y: &[f64], out: &mut [f64]) {
        match &self.jacobian {
            Some(j) => j(y, out),
            None => self.fd_jacobian(y, out),
        }
    }

    fn check_dims(&self, y0: &[f64], drive_dim: usize) -> Result<()> {
        if y0.len() != self.state_dim {
            return usage(format!("initial condition has length {}, state dimension is {}", y0.len(), self.state_dim));
        }
        if drive_dim != self.drive_dim {
            return usage(format!("driver has dimension {drive_dim}, the fields expect {}", self.drive_dim));
        }
        if y0.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("initial condition is not finite".into()));
        }
        Ok(())
    }
}

/// Solution on the driver's grid, optionally with the joint lift `S(x ⊕ y)`.
#[derive(Clone, Debug, PartialEq)]
pub struct RDESolution {
    pub y: PiecewiseLinearPath,
    pub joint_lift: Option<LiftedPath>,
}

impl RDESolution {
    pub fn terminal(&self) -> &[f64] {
        self.y.end()
    }

    /// Adds `S(x ⊕ y)` with `y` linear between grid points.
    pub fn with_joint_lift(mut self, x: &PiecewiseLinearPath, level: Level) -> Result<RDESolution> {
        self.joint_lift = Some(concat_oplus(x, &self.y)?.signature_lift(level));
        Ok(self)
    }
}

fn blow_up(t: f64) -> Error {
    Error::Numeric(format!("solution left the finite range at t = {t}"))
}

/// Integrates `ẏ = V₀(y) + V(y) ẋ` along a piecewise-linear `x` with classical
/// RK4, `substeps` steps per driver segment.
pub fn solve_ode(vf: &VectorFieldSet, y0: &[f64], x: &PiecewiseLinearPath, substeps: usize) -> Result<RDESolution> {
    vf.check_dims(y0, x.dim())?;
    if substeps == 0 {
        return usage("substeps must be at least 1");
    }
    let (n, d) = (vf.state_dim, vf.drive_dim);
    let mut values = Vec::with_capacity(x.len() * n);
    values.extend_from_slice(y0);
    let mut y = y0.to_vec();
    let mut vel = vec![0.0; d];
    let mut fields = vec![0.0; n * d];
    let mut drift = vec![0.0; n];
    let mut k = [vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    let mut tmp = vec![0.0; n];
    let mut rhs = |state: &[f64], vel: &[f64], out: &mut [f64]| {
        vf.eval_drift(state, &mut drift);
        vf.eval_fields(state, &mut fields);
        for r in 0..n {
            out[r] = drift[r] + (0..d).map(|i| fields[r * d + i] * vel[i]).sum::<f64>();
        }
    };
    for seg in 1..x.len() {
        let (t0, t1) = (x.times()[seg - 1], x.times()[seg]);
        let dt = t1 - t0;
        for i in 0..d {
            vel[i] = (x.value(seg)[i] - x.value(seg - 1)[i]) / dt;
        }
        let h = dt / substeps as f64;
        for _ in 0..substeps {
            rhs(&y, &vel, &mut k[0]);
            for r in 0..n {
                tmp[r] = y[r] + 0.5 * h * k[0][r];
            }
            rhs(&tmp, &vel, &mut k[1]);
            for r in 0..n {
                tmp[r] = y[r] + 0.5 * h * k[1][r];
            }
            rhs(&tmp, &vel, &mut k[2]);
            for r in 0..n {
                tmp[r] = y[r] + h * k[2][r];
            }
            rhs(&tmp, &vel, &mut k[3]);
            for r in 0..n {
                y[r] += h / 6.0 * (k[0][r] + 2.0 * k[1][r] + 2.0 * k[2][r] + k[3][r]);
            }
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(blow_up(t1));
        }
        values.extend_from_slice(&y);
    }
    Ok(RDESolution { y: PiecewiseLinearPath::new(x.times().to_vec(), values, n)?, joint_lift: None })
}

/// Second-order scheme driven by a level-2 rough path:
/// `y ← y + V₀(y)Δt + V_i(y) x¹_i + DV_j(y)[V_i(y)] x²_{ij}`.
///
/// The joint lift over `R^d ⊕ Rⁿ` is accumulated from the same expansion
/// (`∫ y ⊗ dx ≈ V_i x²_{ij}`, `∫ x ⊗ dy ≈ x²_{ji} V_i`,
/// `∫ y ⊗ dy ≈ V_i ⊗ V_j x²_{ij}`); each step keeps its antisymmetric part and
/// takes the symmetric part `½ z¹ ⊗ z¹`, so every point stays geometric.
pub fn solve_rde_level2(vf: &VectorFieldSet, y0: &[f64], x: &LiftedPath) -> Result<RDESolution> {
    if x.level() != Level::Two {
        return Err(Error::Unsupported("the rough stepping scheme is implemented for level-2 drivers only".into()));
    }
    vf.check_dims(y0, x.dim())?;
    let (n, d) = (vf.state_dim, vf.drive_dim);
    let m = d + n;
    let jshape = Shape::new(m, Level::Two);
    let mut values = Vec::with_capacity(x.len() * n);
    values.extend_from_slice(y0);
    let mut joint = Vec::with_capacity(x.len() * jshape.len());
    let mut start = vec![0.0; m];
    start[..d].copy_from_slice(x.shape().first(x.point_slice(0)));
    start[d..].copy_from_slice(y0);
    joint.extend_from_slice(crate::algebra::GroupElement::exp_vector(&start, Level::Two).as_slice());

    let mut y = y0.to_vec();
    let mut fields = vec![0.0; n * d];
    let mut drift = vec![0.0; n];
    let mut jac = vec![0.0; d * n * n];
    let mut inc = vec![0.0; x.shape().len()];
    let mut step = vec![0.0; jshape.len()];
    let mut next = vec![0.0; jshape.len()];
    let mut dy = vec![0.0; n];
    let mut yx = vec![0.0; n * d];
    for k in 1..x.len() {
        let dt = x.times()[k] - x.times()[k - 1];
        x.increment_into(k - 1, k, &mut inc);
        let (x1, x2) = (&inc[1..=d], &inc[1 + d..]);
        vf.eval_drift(&y, &mut drift);
        vf.eval_fields(&y, &mut fields);
        vf.eval_jacobian(&y, &mut jac);
        // yx[r, j] = Σ_i V_i(y)_r x²[i, j]
        for r in 0..n {
            for j in 0..d {
                yx[r * d + j] = (0..d).map(|i| fields[r * d + i] * x2[i * d + j]).sum();
            }
        }
        for r in 0..n {
            let mut acc = drift[r] * dt;
            for i in 0..d {
                acc += fields[r * d + i] * x1[i];
            }
            // Σ_j (DV_j · V_i)_r x²[i, j] = Σ_j Σ_c ∂_c V_{j,r} yx[c, j]
            for j in 0..d {
                for c in 0..n {
                    acc += jac[(j * n + r) * n + c] * yx[c * d + j];
                }
            }
            dy[r] = acc;
        }

        // joint increment with geometric symmetric part
        step.fill(0.0);
        step[0] = 1.0;
        step[1..=d].copy_from_slice(x1);
        step[1 + d..=m].copy_from_slice(&dy);
        {
            let z1: Vec<f64> = step[1..=m].to_vec();
            let lvl2 = &mut step[1 + m..];
            let mut raw = vec![0.0; m * m];
            for a in 0..d {
                for b in 0..d {
                    raw[a * m + b] = x2[a * d + b];
                }
            }
            for r in 0..n {
                for j in 0..d {
                    raw[(d + r) * m + j] = yx[r * d + j];
                    raw[j * m + d + r] = (0..d).map(|i| x2[j * d + i] * fields[r * d + i]).sum();
                }
                for c in 0..n {
                    raw[(d + r) * m + d + c] = (0..d).map(|i| fields[r * d + i] * yx[c * d + i]).sum();
                }
            }
            for a in 0..m {
                for b in 0..m {
                    lvl2[a * m + b] = 0.5 * (raw[a * m + b] - raw[b * m + a]) + 0.5 * z1[a] * z1[b];
                }
            }
        }
        let prev = &joint[(k - 1) * jshape.len()..k * jshape.len()];
        jshape.mul_into(prev, &step, &mut next);
        joint.extend_from_slice(&next);

        for r in 0..n {
            y[r] += dy[r];
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(blow_up(x.times()[k]));
        }
        values.extend_from_slice(&y);
    }
    let y_path = PiecewiseLinearPath::new(x.times().to_vec(), values, n)?;
    let joint_lift = LiftedPath::from_flat(x.times().to_vec(), jshape, joint)?;
    Ok(RDESolution { y: y_path, joint_lift: Some(joint_lift) })
}

/// Gap between the solution driven by a dyadic interpolant and the rough
/// solution on the fine grid.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct StratonovichGap {
    pub level: u32,
    pub mesh: f64,
    /// `max_t |y^{(k)}_t − y_t|` over the fine grid.
    pub uniform: f64,
    /// Hölder distance between the lifts of both solution paths.
    pub holder: f64,
}

/// For each dyadic level, solves along the level-`k` interpolant of `fine`
/// (on the fine grid, `substeps` RK4 steps per fine cell) and compares with
/// the level-2 rough solution driven by the lift of `fine`.
pub fn stratonovich_compare(
    vf: &VectorFieldSet,
    y0: &[f64],
    fine: &PiecewiseLinearPath,
    levels: &[u32],
    p: f64,
    substeps: usize,
) -> Result<Vec<StratonovichGap>> {
    let reference = solve_rde_level2(vf, y0, &fine.signature_lift(Level::Two))?;
    let ref_lift = reference.y.signature_lift(Level::Two);
    let pairs = PairSet::auto(fine.len() - 1);
    levels
        .iter()
        .map(|&level| {
            let coarse = fine.linear_interpolant(&dyadic_grid(level))?.refine(fine.times())?;
            let sol = solve_ode(vf, y0, &coarse, substeps)?;
            let uniform = sol
                .y
                .values()
                .iter()
                .zip(reference.y.values())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            let holder = holder_distance(&sol.y.signature_lift(Level::Two), &ref_lift, p, pairs)?.distance;
            Ok(StratonovichGap { level, mesh: (0.5f64).powi(level as i32), uniform, holder })
        })
        .collect()
}

/// One JSON line describing a solver run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SolverManifest {
    pub scheme: String,
    pub mesh: f64,
    pub substeps: usize,
    pub seed: Option<u64>,
    pub stream: Option<u64>,
}

impl SolverManifest {
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("manifest serialises")
    }
}
