//! Truncated tensor algebra `T^n(R^d)` for `n ∈ {2, 3}` and the free
//! nilpotent group `G^n(R^d)` embedded in it.
//!
//! An element is stored as one flat row-major buffer
//! `[c0, c1 (d), c2 (d×d), c3 (d×d×d)]`. Hot loops in the path and metric
//! modules work on these slices directly through [`Shape`]; the owned types
//! [`TruncatedTensor`] and [`GroupElement`] wrap a buffer together with its
//! shape.
//!
//! Tensor levels carry the Euclidean (Hilbert–Schmidt) norm. The group
//! carries the homogeneous norm `‖g‖ = max_i (i! |g_i|)^{1/i}` and the
//! left-invariant distance `d(g, h) = ‖g⁻¹ ⊗ h‖`.

use std::fmt;
use std::ops::Mul;

use serde::{Deserialize, Serialize};

use crate::error::{usage, Error, Result};

/// Truncation depth.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Level {
    Two,
    Three,
}

impl Level {
    pub fn depth(self) -> usize {
        match self {
            Level::Two => 2,
            Level::Three => 3,
        }
    }

    pub fn from_depth(n: usize) -> Result<Level> {
        match n {
            2 => Ok(Level::Two),
            3 => Ok(Level::Three),
            _ => usage(format!("truncation level must be 2 or 3, got {n}")),
        }
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.depth())
    }
}

/// Dimension and depth of a tensor buffer, plus the slice kernels that
/// operate on buffers of that shape.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Shape {
    pub dim: usize,
    pub level: Level,
}

impl Shape {
    pub fn new(dim: usize, level: Level) -> Shape {
        assert!(dim >= 1, "tensor dimension must be positive");
        Shape { dim, level }
    }

    /// Number of reals in a buffer of this shape.
    pub fn len(self) -> usize {
        let d = self.dim;
        match self.level {
            Level::Two => 1 + d + d * d,
            Level::Three => 1 + d + d * d + d * d * d,
        }
    }

    #[inline]
    fn off2(self) -> usize {
        1 + self.dim
    }

    #[inline]
    fn off3(self) -> usize {
        1 + self.dim + self.dim * self.dim
    }

    /// Buffer of the unit element `(1, 0, 0[, 0])`.
    pub fn identity(self) -> Vec<f64> {
        let mut v = vec![0.0; self.len()];
        v[0] = 1.0;
        v
    }

    pub fn first(self, x: &[f64]) -> &[f64] {
        &x[1..self.off2()]
    }

    pub fn second(self, x: &[f64]) -> &[f64] {
        &x[self.off2()..self.off3()]
    }

    pub fn third(self, x: &[f64]) -> Option<&[f64]> {
        match self.level {
            Level::Two => None,
            Level::Three => Some(&x[self.off3()..]),
        }
    }

    /// Graded convolution `out_k = Σ_{i+j=k} a_i ⊗ b_j`, truncated at the level.
    pub fn mul_into(self, a: &[f64], b: &[f64], out: &mut [f64]) {
        let d = self.dim;
        let (o2, o3) = (self.off2(), self.off3());
        let (a0, b0) = (a[0], b[0]);
        out[0] = a0 * b0;
        for i in 0..d {
            out[1 + i] = a0 * b[1 + i] + a[1 + i] * b0;
        }
        for i in 0..d {
            let ai = a[1 + i];
            for j in 0..d {
                let ij = i * d + j;
                out[o2 + ij] = a0 * b[o2 + ij] + a[o2 + ij] * b0 + ai * b[1 + j];
            }
        }
        if self.level == Level::Three {
            for i in 0..d {
                let ai = a[1 + i];
                for j in 0..d {
                    let ij = i * d + j;
                    let a_ij = a[o2 + ij];
                    for k in 0..d {
                        let ijk = ij * d + k;
                        out[o3 + ijk] = a0 * b[o3 + ijk]
                            + a[o3 + ijk] * b0
                            + ai * b[o2 + j * d + k]
                            + a_ij * b[1 + k];
                    }
                }
            }
        }
    }

    /// `out = g⁻¹ ⊗ h` for group-like buffers (scalar parts equal to 1).
    ///
    /// Solved level by level from `h = g ⊗ k`, which avoids forming the
    /// inverse and returns an exact zero increment when `g == h`.
    pub fn left_divide_into(self, g: &[f64], h: &[f64], out: &mut [f64]) {
        let d = self.dim;
        let (o2, o3) = (self.off2(), self.off3());
        out[0] = 1.0;
        for i in 0..d {
            out[1 + i] = h[1 + i] - g[1 + i];
        }
        for i in 0..d {
            let gi = g[1 + i];
            for j in 0..d {
                let ij = i * d + j;
                out[o2 + ij] = h[o2 + ij] - g[o2 + ij] - gi * out[1 + j];
            }
        }
        if self.level == Level::Three {
            for i in 0..d {
                let gi = g[1 + i];
                for j in 0..d {
                    let ij = i * d + j;
                    let g_ij = g[o2 + ij];
                    for k in 0..d {
                        let ijk = ij * d + k;
                        out[o3 + ijk] = h[o3 + ijk]
                            - g[o3 + ijk]
                            - g_ij * out[1 + k]
                            - gi * out[o2 + j * d + k];
                    }
                }
            }
        }
    }

    /// Homogeneous norm `max_i (i! |x_i|)^{1/i}`; the scalar part is ignored.
    pub fn hom_norm(self, x: &[f64]) -> f64 {
        let n1 = euclid(self.first(x));
        let n2 = (2.0 * euclid(self.second(x))).sqrt();
        let n3 = self.third(x).map_or(0.0, |t| (6.0 * euclid(t)).cbrt());
        n1.max(n2).max(n3)
    }

    /// `d(g, h) = ‖g⁻¹ ⊗ h‖`, using `scratch` (length [`Shape::len`]) as workspace.
    pub fn distance(self, g: &[f64], h: &[f64], scratch: &mut [f64]) -> f64 {
        self.left_divide_into(g, h, scratch);
        self.hom_norm(scratch)
    }
}

pub(crate) fn euclid(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Element of `T^n(R^d)`.
#[derive(Clone, Debug, PartialEq)]
pub struct TruncatedTensor {
    shape: Shape,
    data: Vec<f64>,
}

impl TruncatedTensor {
    pub fn zeros(dim: usize, level: Level) -> TruncatedTensor {
        let shape = Shape::new(dim, level);
        TruncatedTensor { shape, data: vec![0.0; shape.len()] }
    }

    /// Builds a tensor from its graded components. `third` must be present
    /// exactly when `level` is three.
    pub fn from_components(
        scalar: f64,
        first: &[f64],
        second: &[f64],
        third: Option<&[f64]>,
    ) -> Result<TruncatedTensor> {
        let dim = first.len();
        if dim == 0 {
            return usage("tensor dimension must be positive");
        }
        if second.len() != dim * dim {
            return usage(format!("level-2 component has {} entries, expected {}", second.len(), dim * dim));
        }
        let level = match third {
            None => Level::Two,
            Some(t) if t.len() == dim * dim * dim => Level::Three,
            Some(t) => {
                return usage(format!("level-3 component has {} entries, expected {}", t.len(), dim * dim * dim))
            }
        };
        let mut data = Vec::with_capacity(Shape::new(dim, level).len());
        data.push(scalar);
        data.extend_from_slice(first);
        data.extend_from_slice(second);
        if let Some(t) = third {
            data.extend_from_slice(t);
        }
        TruncatedTensor::from_flat(Shape::new(dim, level), data)
    }

    /// Wraps a flat buffer laid out as described in the module docs.
    pub fn from_flat(shape: Shape, data: Vec<f64>) -> Result<TruncatedTensor> {
        if data.len() != shape.len() {
            return usage(format!("buffer has {} entries, shape needs {}", data.len(), shape.len()));
        }
        if let Some(bad) = data.iter().position(|x| !x.is_finite()) {
            return Err(Error::Numeric(format!("non-finite tensor component at index {bad}")));
        }
        Ok(TruncatedTensor { shape, data })
    }

    /// Level-one element `(0, v, 0[, 0])`.
    pub fn lie_vector(v: &[f64], level: Level) -> TruncatedTensor {
        let shape = Shape::new(v.len(), level);
        let mut data = vec![0.0; shape.len()];
        data[1..=v.len()].copy_from_slice(v);
        TruncatedTensor { shape, data }
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

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn scalar(&self) -> f64 {
        self.data[0]
    }

    pub fn first(&self) -> &[f64] {
        self.shape.first(&self.data)
    }

    pub fn second(&self) -> &[f64] {
        self.shape.second(&self.data)
    }

    pub fn third(&self) -> Option<&[f64]> {
        self.shape.third(&self.data)
    }

    fn check_same_shape(&self, other: &TruncatedTensor) -> Result<()> {
        if self.shape != other.shape {
            return usage(format!(
                "shape mismatch: (d={}, n={}) vs (d={}, n={})",
                self.shape.dim, self.shape.level, other.shape.dim, other.shape.level
            ));
        }
        Ok(())
    }

    /// Tensor product in `T^n(R^d)`.
    pub fn checked_mul(&self, other: &TruncatedTensor) -> Result<TruncatedTensor> {
        self.check_same_shape(other)?;
        let mut data = vec![0.0; self.shape.len()];
        self.shape.mul_into(&self.data, &other.data, &mut data);
        Ok(TruncatedTensor { shape: self.shape, data })
    }

    pub fn checked_add(&self, other: &TruncatedTensor) -> Result<TruncatedTensor> {
        self.check_same_shape(other)?;
        Ok(self.zip_with(other, |a, b| a + b))
    }

    pub fn checked_sub(&self, other: &TruncatedTensor) -> Result<TruncatedTensor> {
        self.check_same_shape(other)?;
        Ok(self.zip_with(other, |a, b| a - b))
    }

    pub fn scale(&self, c: f64) -> TruncatedTensor {
        TruncatedTensor { shape: self.shape, data: self.data.iter().map(|x| c * x).collect() }
    }

    fn zip_with(&self, other: &TruncatedTensor, f: impl Fn(f64, f64) -> f64) -> TruncatedTensor {
        let data = self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect();
        TruncatedTensor { shape: self.shape, data }
    }

    /// Truncated power series `1 + x + x²/2 + x³/6`. Requires a zero scalar part,
    /// which makes `x` nilpotent so the series is exact.
    pub fn exp(&self) -> Result<GroupElement> {
        if self.scalar() != 0.0 {
            return usage(format!("exp needs a zero scalar component, got {}", self.scalar()));
        }
        let shape = self.shape;
        let x = &self.data;
        let mut x2 = vec![0.0; shape.len()];
        shape.mul_into(x, x, &mut x2);
        let mut out: Vec<f64> = x.iter().zip(&x2).map(|(a, b)| a + 0.5 * b).collect();
        if shape.level == Level::Three {
            let mut x3 = vec![0.0; shape.len()];
            shape.mul_into(&x2, x, &mut x3);
            for (o, v) in out.iter_mut().zip(&x3) {
                *o += v / 6.0;
            }
        }
        out[0] = 1.0;
        Ok(GroupElement(TruncatedTensor { shape, data: out }))
    }
}

/// Element of the free nilpotent group `G^n(R^d)`: a truncated tensor with
/// scalar part exactly one.
///
/// Geometricity (the shuffle relations) is not enforced at construction; use
/// [`GroupElement::shuffle_defect`] to measure it.
#[derive(Clone, Debug, PartialEq)]
pub struct GroupElement(TruncatedTensor);

impl GroupElement {
    pub fn identity(dim: usize, level: Level) -> GroupElement {
        let shape = Shape::new(dim, level);
        GroupElement(TruncatedTensor { shape, data: shape.identity() })
    }

    pub fn from_tensor(t: TruncatedTensor) -> Result<GroupElement> {
        if t.scalar() != 1.0 {
            return usage(format!("group elements need scalar component 1, got {}", t.scalar()));
        }
        Ok(GroupElement(t))
    }

    pub(crate) fn from_flat_unchecked(shape: Shape, data: Vec<f64>) -> GroupElement {
        debug_assert_eq!(data.len(), shape.len());
        GroupElement(TruncatedTensor { shape, data })
    }

    /// `exp(v)` for a level-one vector `v`: the signature of a straight segment.
    pub fn exp_vector(v: &[f64], level: Level) -> GroupElement {
        TruncatedTensor::lie_vector(v, level).exp().expect("lie vector has zero scalar part")
    }

    pub fn tensor(&self) -> &TruncatedTensor {
        &self.0
    }

    pub fn into_tensor(self) -> TruncatedTensor {
        self.0
    }

    pub fn shape(&self) -> Shape {
        self.0.shape
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    pub fn level(&self) -> Level {
        self.0.level()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0.data
    }

    pub fn first(&self) -> &[f64] {
        self.0.first()
    }

    pub fn second(&self) -> &[f64] {
        self.0.second()
    }

    pub fn third(&self) -> Option<&[f64]> {
        self.0.third()
    }

    pub fn checked_mul(&self, other: &GroupElement) -> Result<GroupElement> {
        self.0.checked_mul(&other.0).map(GroupElement)
    }

    /// `log(g) = y − y²/2 + y³/3` with `y = g − 1`.
    pub fn log(&self) -> TruncatedTensor {
        let shape = self.shape();
        let mut y = self.0.data.clone();
        y[0] = 0.0;
        let mut y2 = vec![0.0; shape.len()];
        shape.mul_into(&y, &y, &mut y2);
        let mut out: Vec<f64> = y.iter().zip(&y2).map(|(a, b)| a - 0.5 * b).collect();
        if shape.level == Level::Three {
            let mut y3 = vec![0.0; shape.len()];
            shape.mul_into(&y2, &y, &mut y3);
            for (o, v) in out.iter_mut().zip(&y3) {
                *o += v / 3.0;
            }
        }
        out[0] = 0.0;
        TruncatedTensor { shape, data: out }
    }

    /// Neumann series `Σ_{k ≤ n} (1 − g)^k`, exact by nilpotency.
    pub fn inverse(&self) -> GroupElement {
        let shape = self.shape();
        let mut u: Vec<f64> = self.0.data.iter().map(|x| -x).collect();
        u[0] = 0.0;
        let mut acc = shape.identity();
        let mut power = u.clone();
        for k in 1..=shape.level.depth() {
            for (a, p) in acc.iter_mut().zip(&power) {
                *a += p;
            }
            if k < shape.level.depth() {
                let mut next = vec![0.0; shape.len()];
                shape.mul_into(&power, &u, &mut next);
                power = next;
            }
        }
        GroupElement(TruncatedTensor { shape, data: acc })
    }

    /// Dilation `δ_λ`: level `k` is scaled by `λ^k`.
    pub fn dilate(&self, lambda: f64) -> GroupElement {
        let shape = self.shape();
        let mut data = self.0.data.clone();
        let (o2, o3) = (shape.off2(), shape.off3());
        for (idx, x) in data.iter_mut().enumerate().skip(1) {
            let k = if idx < o2 {
                1
            } else if idx < o3 {
                2
            } else {
                3
            };
            *x *= lambda.powi(k);
        }
        GroupElement(TruncatedTensor { shape, data })
    }

    pub fn norm(&self) -> f64 {
        self.shape().hom_norm(&self.0.data)
    }

    /// Left-invariant distance `‖self⁻¹ ⊗ other‖`.
    pub fn distance(&self, other: &GroupElement) -> Result<f64> {
        self.0.check_same_shape(&other.0)?;
        let mut scratch = vec![0.0; self.shape().len()];
        Ok(self.shape().distance(&self.0.data, &other.0.data, &mut scratch))
    }

    /// `self⁻¹ ⊗ other`, the increment from `self` to `other`.
    pub fn increment_to(&self, other: &GroupElement) -> Result<GroupElement> {
        self.0.check_same_shape(&other.0)?;
        let shape = self.shape();
        let mut data = vec![0.0; shape.len()];
        shape.left_divide_into(&self.0.data, &other.0.data, &mut data);
        Ok(GroupElement(TruncatedTensor { shape, data }))
    }

    /// Largest violation of the shuffle relations up to the truncation level.
    ///
    /// Level two contributes `|½(g_ij + g_ji) − ½ g_i g_j|`; level three
    /// contributes `|g_i g_jk − (g_ijk + g_jik + g_jki)|`.
    pub fn shuffle_defect(&self) -> f64 {
        let shape = self.shape();
        let d = shape.dim;
        let g1 = self.first();
        let g2 = self.second();
        let mut worst = 0.0f64;
        for i in 0..d {
            for j in 0..d {
                let v = 0.5 * (g2[i * d + j] + g2[j * d + i]) - 0.5 * g1[i] * g1[j];
                worst = worst.max(v.abs());
            }
        }
        if let Some(g3) = self.third() {
            let at = |a: usize, b: usize, c: usize| g3[(a * d + b) * d + c];
            for i in 0..d {
                for j in 0..d {
                    for k in 0..d {
                        let v = g1[i] * g2[j * d + k] - (at(i, j, k) + at(j, i, k) + at(j, k, i));
                        worst = worst.max(v.abs());
                    }
                }
            }
        }
        worst
    }

    /// Image under the linear map `A: R^d → R^m` (row-major `m × d`), i.e.
    /// `(1, A g1, A g2 Aᵀ, (A⊗A⊗A) g3)`. Signatures are natural under linear
    /// maps, so this sends `S(x)` to `S(Ax)`.
    pub fn push_forward(&self, matrix: &[f64], out_dim: usize) -> Result<GroupElement> {
        let d = self.dim();
        if matrix.len() != out_dim * d || out_dim == 0 {
            return usage(format!("linear map must be {out_dim}x{d}, got {} entries", matrix.len()));
        }
        let m = out_dim;
        let a = |r: usize, c: usize| matrix[r * d + c];
        let shape = Shape::new(m, self.level());
        let mut data = shape.identity();
        let g1 = self.first();
        let g2 = self.second();
        for r in 0..m {
            data[1 + r] = (0..d).map(|c| a(r, c) * g1[c]).sum();
        }
        // A g2 Aᵀ via the intermediate A g2.
        let mut ag2 = vec![0.0; m * d];
        for r in 0..m {
            for j in 0..d {
                ag2[r * d + j] = (0..d).map(|i| a(r, i) * g2[i * d + j]).sum();
            }
        }
        let o2 = shape.off2();
        for r in 0..m {
            for s in 0..m {
                data[o2 + r * m + s] = (0..d).map(|j| ag2[r * d + j] * a(s, j)).sum();
            }
        }
        if let Some(g3) = self.third() {
            // contract one index at a time
            let mut t1 = vec![0.0; m * d * d];
            for r in 0..m {
                for j in 0..d {
                    for k in 0..d {
                        t1[(r * d + j) * d + k] = (0..d).map(|i| a(r, i) * g3[(i * d + j) * d + k]).sum();
                    }
                }
            }
            let mut t2 = vec![0.0; m * m * d];
            for r in 0..m {
                for s in 0..m {
                    for k in 0..d {
                        t2[(r * m + s) * d + k] = (0..d).map(|j| a(s, j) * t1[(r * d + j) * d + k]).sum();
                    }
                }
            }
            let o3 = shape.off3();
            for r in 0..m {
                for s in 0..m {
                    for u in 0..m {
                        data[o3 + (r * m + s) * m + u] = (0..d).map(|k| a(u, k) * t2[(r * m + s) * d + k]).sum();
                    }
                }
            }
        }
        Ok(GroupElement(TruncatedTensor { shape, data }))
    }

    /// Lift of `(x, y) ↦ y − x` for a level-2 element over `R^d ⊕ R^d`:
    /// `(1, Z¹;² − Z¹;¹, Z²;²,² − Z²;¹,² − Z²;²,¹ + Z²;¹,¹)`.
    pub fn minus(&self) -> Result<GroupElement> {
        if self.level() != Level::Two {
            return Err(Error::Unsupported("minus map is only defined at level 2".into()));
        }
        let dd = self.dim();
        if !dd.is_multiple_of(2) {
            return usage(format!("minus map needs an even dimension, got {dd}"));
        }
        let d = dd / 2;
        let z1 = self.first();
        let z2 = self.second();
        let block = |a: usize, b: usize, i: usize, j: usize| z2[(a * d + i) * dd + b * d + j];
        let shape = Shape::new(d, Level::Two);
        let mut data = shape.identity();
        for i in 0..d {
            data[1 + i] = z1[d + i] - z1[i];
        }
        let o2 = shape.off2();
        for i in 0..d {
            for j in 0..d {
                data[o2 + i * d + j] = block(1, 1, i, j) - block(0, 1, i, j) - block(1, 0, i, j) + block(0, 0, i, j);
            }
        }
        Ok(GroupElement(TruncatedTensor { shape, data }))
    }
}

impl Mul for &GroupElement {
    type Output = GroupElement;

    /// Panics on a shape mismatch; use [`GroupElement::checked_mul`] otherwise.
    fn mul(self, rhs: &GroupElement) -> GroupElement {
        self.checked_mul(rhs).expect("group product of mismatched shapes")
    }
}
