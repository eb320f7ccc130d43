//! Piecewise-linear paths, their signature lifts, and the paired lifts used
//! to compare an approximating sequence with a rough reference.

use crate::algebra::{GroupElement, Level, Shape};
use crate::error::{usage, Error, Result};

/// Path in `R^d` that is linear between consecutive sample times.
#[derive(Clone, Debug, PartialEq)]
pub struct PiecewiseLinearPath {
    dim: usize,
    times: Vec<f64>,
    /// Row-major `N × d`.
    values: Vec<f64>,
}

/// `k / 2^level` for `k = 0..=2^level`.
pub fn dyadic_grid(level: u32) -> Vec<f64> {
    let n = 1usize << level;
    (0..=n).map(|k| k as f64 / n as f64).collect()
}

/// `n + 1` equally spaced times covering `[0, 1]`.
pub fn uniform_grid(n: usize) -> Vec<f64> {
    (0..=n).map(|k| k as f64 / n as f64).collect()
}

fn check_times(times: &[f64]) -> Result<()> {
    if times.len() < 2 {
        return usage(format!("a path needs at least two sample times, got {}", times.len()));
    }
    if times.iter().any(|t| !t.is_finite() || *t < 0.0 || *t > 1.0) {
        return usage("sample times must lie in [0, 1]");
    }
    if let Some(k) = times.windows(2).position(|w| w[1] <= w[0]) {
        return usage(format!("sample times must be strictly increasing (index {})", k + 1));
    }
    Ok(())
}

/// Sorted union of two increasing grids, with exact duplicates merged.
pub fn union_grid(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() || j < b.len() {
        let next = match (a.get(i), b.get(j)) {
            (Some(&x), Some(&y)) if x == y => {
                i += 1;
                j += 1;
                x
            }
            (Some(&x), Some(&y)) if x < y => {
                i += 1;
                x
            }
            (Some(_), Some(&y)) => {
                j += 1;
                y
            }
            (Some(&x), None) => {
                i += 1;
                x
            }
            (None, Some(&y)) => {
                j += 1;
                y
            }
            (None, None) => unreachable!(),
        };
        out.push(next);
    }
    out
}

fn is_subset(small: &[f64], big: &[f64]) -> bool {
    small.iter().all(|t| big.binary_search_by(|p| p.total_cmp(t)).is_ok())
}

impl PiecewiseLinearPath {
    /// `values` is row-major with `times.len()` rows of length `dim`.
    pub fn new(times: Vec<f64>, values: Vec<f64>, dim: usize) -> Result<PiecewiseLinearPath> {
        if dim == 0 {
            return usage("path dimension must be positive");
        }
        check_times(&times)?;
        if values.len() != times.len() * dim {
            return usage(format!("expected {} values for {} times in dimension {dim}, got {}", times.len() * dim, times.len(), values.len()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("path values must be finite".into()));
        }
        Ok(PiecewiseLinearPath { dim, times, values })
    }

    pub fn constant(times: Vec<f64>, value: &[f64]) -> Result<PiecewiseLinearPath> {
        let values = value.iter().copied().cycle().take(times.len() * value.len()).collect();
        PiecewiseLinearPath::new(times, values, value.len())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, k: usize) -> &[f64] {
        &self.values[k * self.dim..(k + 1) * self.dim]
    }

    pub fn start(&self) -> &[f64] {
        self.value(0)
    }

    pub fn end(&self) -> &[f64] {
        self.value(self.len() - 1)
    }

    /// Value at time `t` inside the sampled interval. Sample times return the
    /// stored value exactly.
    pub fn value_at(&self, t: f64) -> Result<Vec<f64>> {
        let (t0, t1) = (self.times[0], self.times[self.len() - 1]);
        if !(t0..=t1).contains(&t) {
            return usage(format!("time {t} outside of the path's interval [{t0}, {t1}]"));
        }
        match self.times.binary_search_by(|p| p.total_cmp(&t)) {
            Ok(k) => Ok(self.value(k).to_vec()),
            Err(k) => {
                let (a, b) = (self.times[k - 1], self.times[k]);
                let w = (t - a) / (b - a);
                Ok(self.value(k - 1).iter().zip(self.value(k)).map(|(x, y)| x + w * (y - x)).collect())
            }
        }
    }

    /// Same path sampled on `grid`, which must span exactly the path's interval.
    /// Exact because the path is linear between its own sample times; breakpoints
    /// missing from `grid` are, however, lost.
    pub fn resample(&self, grid: &[f64]) -> Result<PiecewiseLinearPath> {
        check_times(grid)?;
        if grid[0] != self.times[0] || grid[grid.len() - 1] != self.times[self.len() - 1] {
            return usage("resampling grid must start and end at the path's endpoints");
        }
        let mut values = Vec::with_capacity(grid.len() * self.dim);
        for &t in grid {
            values.extend(self.value_at(t)?);
        }
        PiecewiseLinearPath::new(grid.to_vec(), values, self.dim)
    }

    /// Resample onto a grid containing every breakpoint of the path.
    pub fn refine(&self, grid: &[f64]) -> Result<PiecewiseLinearPath> {
        if !is_subset(&self.times, grid) {
            return usage("refinement grid must contain every sample time of the path");
        }
        self.resample(grid)
    }

    /// `D`-linear approximation: linear between consecutive points of
    /// `subdivision`, agreeing with the samples there. Every point of the
    /// subdivision has to be one of the sample times.
    pub fn linear_interpolant(&self, subdivision: &[f64]) -> Result<PiecewiseLinearPath> {
        check_times(subdivision)?;
        let mut values = Vec::with_capacity(subdivision.len() * self.dim);
        for &t in subdivision {
            match self.times.binary_search_by(|p| p.total_cmp(&t)) {
                Ok(k) => values.extend_from_slice(self.value(k)),
                Err(_) => return usage(format!("subdivision time {t} is not a sample time")),
            }
        }
        PiecewiseLinearPath::new(subdivision.to_vec(), values, self.dim)
    }

    /// Componentwise difference `self − other` on the union grid.
    pub fn sub(&self, other: &PiecewiseLinearPath) -> Result<PiecewiseLinearPath> {
        if self.dim != other.dim {
            return usage(format!("dimension mismatch: {} vs {}", self.dim, other.dim));
        }
        let grid = union_grid(&self.times, &other.times);
        let a = self.refine(&grid)?;
        let b = other.refine(&grid)?;
        let values = a.values.iter().zip(&b.values).map(|(x, y)| x - y).collect();
        PiecewiseLinearPath::new(grid, values, self.dim)
    }

    /// Canonical lift `S(x)`: `points[k] = exp(x₀) ⊗ exp(Δ₁) ⊗ … ⊗ exp(Δ_k)`,
    /// the exact solution of `dS = S ⊗ dx` for a piecewise-linear `x`.
    pub fn signature_lift(&self, level: Level) -> LiftedPath {
        let shape = Shape::new(self.dim, level);
        let stride = shape.len();
        let mut data = Vec::with_capacity(stride * self.len());
        data.extend_from_slice(GroupElement::exp_vector(self.start(), level).as_slice());
        let mut delta = vec![0.0; self.dim];
        let mut next = vec![0.0; stride];
        for k in 1..self.len() {
            for ((d, a), b) in delta.iter_mut().zip(self.value(k - 1)).zip(self.value(k)) {
                *d = b - a;
            }
            let step = GroupElement::exp_vector(&delta, level);
            shape.mul_into(&data[(k - 1) * stride..k * stride], step.as_slice(), &mut next);
            data.extend_from_slice(&next);
        }
        LiftedPath { times: self.times.clone(), shape, data }
    }
}

/// `x ⊕ y`: both paths on the union of their grids, stacked componentwise.
pub fn concat_oplus(x: &PiecewiseLinearPath, y: &PiecewiseLinearPath) -> Result<PiecewiseLinearPath> {
    let grid = union_grid(&x.times, &y.times);
    let xr = x.refine(&grid)?;
    let yr = y.refine(&grid)?;
    let dim = x.dim + y.dim;
    let mut values = Vec::with_capacity(grid.len() * dim);
    for k in 0..grid.len() {
        values.extend_from_slice(xr.value(k));
        values.extend_from_slice(yr.value(k));
    }
    PiecewiseLinearPath::new(grid, values, dim)
}

/// `S′(x_n, S(y)) = S(x_n ⊕ y)` for a piecewise-linear reference `y`.
pub fn s_prime_concat(x_n: &PiecewiseLinearPath, y_ref: &PiecewiseLinearPath, level: Level) -> Result<LiftedPath> {
    if x_n.dim != y_ref.dim {
        return usage(format!("dimension mismatch: {} vs {}", x_n.dim, y_ref.dim));
    }
    Ok(concat_oplus(x_n, y_ref)?.signature_lift(level))
}

/// `S″(S(y)) = S(y ⊕ y)`.
pub fn s_double_prime(y_ref: &PiecewiseLinearPath, level: Level) -> Result<LiftedPath> {
    s_prime_concat(y_ref, y_ref, level)
}

/// Joint level-2 lift `S′(x, y)` of a piecewise-linear `x` and a level-2
/// rough path `y`, over `R^d ⊕ R^d`.
///
/// Blocks of the level-2 part at grid time `t`:
/// * `(x, x)`: `∫ x ⊗ dx`, exact for piecewise-linear `x`;
/// * `(y, x)`: `∫ y¹ ⊗ dx`, trapezoidal rule on `y`'s grid;
/// * `(x, y)`: `x_t ⊗ y¹_t − ∫ dx ⊗ y¹` (integration by parts, same quadrature);
/// * `(y, y)`: copied from `y`.
///
/// Cross blocks start from `½ x₀ ⊗ y¹₀` and `½ y¹₀ ⊗ x₀`, as in the lift of
/// a concatenated path started at `exp(x₀ ⊕ y¹₀)`. The trapezoidal rule is
/// exact when `y` is the lift of a piecewise-linear path, so the result then
/// coincides with [`s_prime_concat`]. `x`'s breakpoints must all be on `y`'s grid.
pub fn s_prime_level2(x: &PiecewiseLinearPath, y: &LiftedPath) -> Result<LiftedPath> {
    if y.level() != Level::Two {
        return Err(Error::Unsupported("the quadrature construction of S′ needs a level-2 reference".into()));
    }
    let d = y.dim();
    if x.dim != d {
        return usage(format!("dimension mismatch: {} vs {}", x.dim, d));
    }
    let xr = x.refine(&y.times)?;
    let x_lift = xr.signature_lift(Level::Two);
    let n = y.len();
    let dd = 2 * d;
    let shape = Shape::new(dd, Level::Two);
    let stride = shape.len();
    let mut data = vec![0.0; stride * n];
    // C_k = Σ_{j<k} Δx_j ⊗ ½(y¹_j + y¹_{j+1})
    let mut c = vec![0.0; d * d];
    let (x0, y0) = (xr.start().to_vec(), y.shape.first(y.point_slice(0)).to_vec());
    for k in 0..n {
        if k > 0 {
            let (x0, x1) = (xr.value(k - 1), xr.value(k));
            let (y0, y1) = (y.shape.first(y.point_slice(k - 1)), y.shape.first(y.point_slice(k)));
            for i in 0..d {
                let dx = x1[i] - x0[i];
                for j in 0..d {
                    c[i * d + j] += dx * 0.5 * (y0[j] + y1[j]);
                }
            }
        }
        let xk = xr.value(k);
        let yp = y.point_slice(k);
        let (y1, y2) = (y.shape.first(yp), y.shape.second(yp));
        let x2 = x_lift.shape.second(x_lift.point_slice(k));
        let row = &mut data[k * stride..(k + 1) * stride];
        row[0] = 1.0;
        row[1..=d].copy_from_slice(xk);
        row[1 + d..=dd].copy_from_slice(y1);
        let lvl2 = &mut row[1 + dd..];
        for i in 0..d {
            for j in 0..d {
                lvl2[i * dd + j] = x2[i * d + j];
                lvl2[i * dd + d + j] = xk[i] * y1[j] - 0.5 * x0[i] * y0[j] - c[i * d + j];
                lvl2[(d + i) * dd + j] = c[j * d + i] + 0.5 * y0[i] * x0[j];
                lvl2[(d + i) * dd + d + j] = y2[i * d + j];
            }
        }
    }
    Ok(LiftedPath { times: y.times.clone(), shape, data })
}

/// Translation `T_{−h}(y) = Minus(S′(h, y))`, a level-2 rough path lying above
/// `y¹ − h`.
pub fn translate(h: &PiecewiseLinearPath, y: &LiftedPath) -> Result<LiftedPath> {
    s_prime_level2(h, y)?.minus()
}

/// `t ↦ exp(t [e₁, e₂])`: zero first level, level two `t (e₁⊗e₂ − e₂⊗e₁)`.
pub fn pure_area_path(times: &[f64]) -> Result<LiftedPath> {
    check_times(times)?;
    let shape = Shape::new(2, Level::Two);
    let mut data = Vec::with_capacity(shape.len() * times.len());
    for &t in times {
        data.extend_from_slice(&[1.0, 0.0, 0.0, 0.0, t, -t, 0.0]);
    }
    Ok(LiftedPath { times: times.to_vec(), shape, data })
}

/// `cells` counter-clockwise square loops of side `√Δ`, one per cell of width
/// `Δ = 1/cells`, each traversed in four equal time steps. The path returns to
/// the origin at every cell boundary and encloses area `t` by time `t`.
pub fn square_loop_path(cells: usize) -> Result<PiecewiseLinearPath> {
    if cells == 0 {
        return usage("need at least one loop");
    }
    let side = (1.0 / cells as f64).sqrt();
    let corners = [[0.0, 0.0], [side, 0.0], [side, side], [0.0, side]];
    let mut values = Vec::with_capacity(8 * cells + 2);
    values.extend_from_slice(&[0.0, 0.0]);
    for _ in 0..cells {
        for c in corners[1..].iter().chain(std::iter::once(&corners[0])) {
            values.extend_from_slice(c);
        }
    }
    PiecewiseLinearPath::new(uniform_grid(4 * cells), values, 2)
}

/// A path with values in `G^n(R^d)` sampled on a grid.
///
/// Points are stored flat (`N × shape.len()`). Increments are read off as
/// `x_{s,t} = x_s⁻¹ ⊗ x_t`, so Chen's relation holds by construction.
#[derive(Clone, Debug, PartialEq)]
pub struct LiftedPath {
    times: Vec<f64>,
    shape: Shape,
    data: Vec<f64>,
}

impl LiftedPath {
    pub fn new(times: Vec<f64>, points: &[GroupElement]) -> Result<LiftedPath> {
        check_times(&times)?;
        if points.len() != times.len() {
            return usage(format!("{} points for {} times", points.len(), times.len()));
        }
        let shape = points[0].shape();
        if let Some(k) = points.iter().position(|p| p.shape() != shape) {
            return usage(format!("point {k} has a different shape from point 0"));
        }
        let data = points.iter().flat_map(|p| p.as_slice().iter().copied()).collect();
        Ok(LiftedPath { times, shape, data })
    }

    pub(crate) fn from_flat(times: Vec<f64>, shape: Shape, data: Vec<f64>) -> Result<LiftedPath> {
        check_times(&times)?;
        if data.len() != times.len() * shape.len() {
            return usage("flat buffer does not match the grid and shape");
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("lifted path has non-finite components".into()));
        }
        if let Some(k) = data.chunks(shape.len()).position(|p| p[0] != 1.0) {
            return usage(format!("point {k} does not have scalar component 1"));
        }
        Ok(LiftedPath { times, shape, data })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn dim(&self) -> usize {
        self.shape.dim
    }

    pub fn level(&self) -> Level {
        self.shape.level
    }

    pub fn point_slice(&self, k: usize) -> &[f64] {
        let s = self.shape.len();
        &self.data[k * s..(k + 1) * s]
    }

    pub fn point(&self, k: usize) -> GroupElement {
        GroupElement::from_flat_unchecked(self.shape, self.point_slice(k).to_vec())
    }

    /// `x_{t_i}⁻¹ ⊗ x_{t_j}`.
    pub fn increment(&self, i: usize, j: usize) -> GroupElement {
        let mut out = vec![0.0; self.shape.len()];
        self.increment_into(i, j, &mut out);
        GroupElement::from_flat_unchecked(self.shape, out)
    }

    pub fn increment_into(&self, i: usize, j: usize, out: &mut [f64]) {
        self.shape.left_divide_into(self.point_slice(i), self.point_slice(j), out);
    }

    /// The first-level path `x¹`.
    pub fn level1_path(&self) -> PiecewiseLinearPath {
        let d = self.dim();
        let values = (0..self.len()).flat_map(|k| self.shape.first(self.point_slice(k)).to_vec()).collect();
        PiecewiseLinearPath { dim: d, times: self.times.clone(), values }
    }

    pub fn max_shuffle_defect(&self) -> f64 {
        (0..self.len()).map(|k| self.point(k).shuffle_defect()).fold(0.0, f64::max)
    }

    /// Pointwise image under the linear map `A` (row-major `m × d`).
    pub fn push_forward(&self, matrix: &[f64], out_dim: usize) -> Result<LiftedPath> {
        let mut data = Vec::new();
        let mut shape = self.shape;
        for k in 0..self.len() {
            let p = self.point(k).push_forward(matrix, out_dim)?;
            shape = p.shape();
            data.extend_from_slice(p.as_slice());
        }
        Ok(LiftedPath { times: self.times.clone(), shape, data })
    }

    /// `S″(x)`: image under the diagonal map `v ↦ (v, v)`. For a lifted
    /// piecewise-linear path this is exactly `S(x ⊕ x)`.
    pub fn diagonal(&self) -> LiftedPath {
        let d = self.dim();
        let mut map = vec![0.0; 2 * d * d];
        for i in 0..d {
            map[i * d + i] = 1.0;
            map[(d + i) * d + i] = 1.0;
        }
        self.push_forward(&map, 2 * d).expect("diagonal map has matching shape")
    }

    /// Pointwise minus map `(x, y) ↦ y − x`; level 2 and even dimension only.
    pub fn minus(&self) -> Result<LiftedPath> {
        let mut data = Vec::new();
        let mut shape = self.shape;
        for k in 0..self.len() {
            let p = self.point(k).minus()?;
            shape = p.shape();
            data.extend_from_slice(p.as_slice());
        }
        Ok(LiftedPath { times: self.times.clone(), shape, data })
    }

    /// Restriction to the grid points of `subgrid`, which must be sample times.
    pub fn restrict(&self, subgrid: &[f64]) -> Result<LiftedPath> {
        check_times(subgrid)?;
        let mut data = Vec::with_capacity(subgrid.len() * self.shape.len());
        for &t in subgrid {
            let k = self
                .times
                .binary_search_by(|p| p.total_cmp(&t))
                .map_err(|_| Error::Usage(format!("time {t} is not on the lifted path's grid")))?;
            data.extend_from_slice(self.point_slice(k));
        }
        Ok(LiftedPath { times: subgrid.to_vec(), shape: self.shape, data })
    }
}
