//! Exact checks of covariance inequalities for fractional Gaussian increments.

use serde::Serialize;

use super::increment_covariance;
use crate::error::{usage, Result};

/// Both sides of the double-sum bound over a subdivision `D` of `[t_m, t_n]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FinalLemma {
    /// `Σ_{k,l} ‖ΔW_k‖ ‖ΔW_l‖ E(ΔW_k ΔW_l)`.
    pub lhs: f64,
    /// Same sum with `|E(ΔW_k ΔW_l)|`.
    pub lhs_abs: f64,
    /// `(t_n − t_m)^{4/p′} |D|^{4H − 4/p′}`.
    pub rhs: f64,
}

impl FinalLemma {
    pub fn ratio(&self) -> f64 {
        self.lhs / self.rhs
    }
}

/// Evaluates the bound for `H ∈ (¼, ½)`, `p′ > 1/H` and `4/p′ − 1 ∈ (0, 2H)`.
pub fn finallemma_check(d: &[f64], h: f64, p_prime: f64) -> Result<FinalLemma> {
    if !(h > 0.25 && h < 0.5) {
        return usage(format!("H must lie in (1/4, 1/2), got {h}"));
    }
    if !(p_prime > 1.0 / h) {
        return usage(format!("p′ must exceed 1/H = {}, got {p_prime}", 1.0 / h));
    }
    let eps = 4.0 / p_prime - 1.0;
    if !(eps > 0.0 && eps < 2.0 * h) {
        return usage(format!("4/p′ − 1 = {eps} must lie in (0, 2H)"));
    }
    lemma_sides(d, h, p_prime)
}

/// Both sides without the parameter constraints; `H = ½` is allowed here.
pub(crate) fn lemma_sides(d: &[f64], h: f64, p_prime: f64) -> Result<FinalLemma> {
    if d.len() < 2 || d.windows(2).any(|w| !(w[1] > w[0])) {
        return usage("subdivision must be strictly increasing with at least two points");
    }
    let sd: Vec<f64> = d.windows(2).map(|w| (w[1] - w[0]).powf(h)).collect();
    let (mut lhs, mut lhs_abs) = (0.0, 0.0);
    for (k, wk) in d.windows(2).enumerate() {
        for (l, wl) in d.windows(2).enumerate() {
            let c = increment_covariance(wk[0], wk[1], wl[0], wl[1], h);
            lhs += sd[k] * sd[l] * c;
            lhs_abs += sd[k] * sd[l] * c.abs();
        }
    }
    let mesh = d.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
    let span = d[d.len() - 1] - d[0];
    let rhs = span.powf(4.0 / p_prime) * mesh.powf(4.0 * h - 4.0 / p_prime);
    Ok(FinalLemma { lhs, lhs_abs, rhs })
}

/// Violation counts for the ordering of increment covariances on a lattice.
///
/// Disjoint intervals `[u′,v′] ⊆ [s′,t′]`, `[u,v] ⊆ [s,t]` with `t′ ≤ s`:
/// * `disjoint_sign`: `0 ≤ −E(W(u′,v′) W(u,v))`
/// * `disjoint_order`: `−E(W(u′,v′) W(u,v)) ≤ −E(W(s′,t′) W(s,t))`
///
/// Nested points `s < u < v ≤ t`:
/// * `nested_sign`: `0 ≤ E(W(s,u) W(s,v))`
/// * `nested_middle`: `E(W(s,u) W(s,v)) ≤ E(W(s,u) W(s,t))`
/// * `nested_upper`: `E(W(s,u) W(s,t)) ≤ E(W(s,t)²)`
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct LatticeReport {
    pub disjoint_checked: usize,
    pub nested_checked: usize,
    pub disjoint_sign: usize,
    pub disjoint_order: usize,
    pub nested_sign: usize,
    pub nested_middle: usize,
    pub nested_upper: usize,
}

impl LatticeReport {
    pub fn violations(&self) -> usize {
        self.disjoint_sign + self.disjoint_order + self.nested_sign + self.nested_middle + self.nested_upper
    }
}

/// Runs every inequality over all admissible choices of points `k/m`,
/// allowing `slack` for rounding.
pub fn increasing_lattice(h: f64, m: usize, slack: f64) -> Result<LatticeReport> {
    if !(h > 0.25 && h < 0.5) {
        return usage(format!("H must lie in (1/4, 1/2), got {h}"));
    }
    if m < 3 {
        return usage("lattice needs at least three intervals");
    }
    let x = |k: usize| k as f64 / m as f64;
    let cov = |a: usize, b: usize, c: usize, d: usize| increment_covariance(x(a), x(b), x(c), x(d), h);
    let mut r = LatticeReport::default();
    for s2 in 0..=m {
        for t2 in s2 + 1..=m {
            for s in t2..=m {
                for t in s + 1..=m {
                    let outer = -cov(s2, t2, s, t);
                    for u2 in s2..=t2 {
                        for v2 in u2 + 1..=t2 {
                            for u in s..=t {
                                for v in u + 1..=t {
                                    let inner = -cov(u2, v2, u, v);
                                    r.disjoint_checked += 1;
                                    r.disjoint_sign += usize::from(inner < -slack);
                                    r.disjoint_order += usize::from(inner > outer + slack);
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    for s in 0..=m {
        for u in s + 1..=m {
            for v in u + 1..=m {
                for t in v..=m {
                    let su_sv = cov(s, u, s, v);
                    let su_st = cov(s, u, s, t);
                    let st_st = cov(s, t, s, t);
                    r.nested_checked += 1;
                    r.nested_sign += usize::from(su_sv < -slack);
                    r.nested_middle += usize::from(su_sv > su_st + slack);
                    r.nested_upper += usize::from(su_st > st_st + slack);
                }
            }
        }
    }
    Ok(r)
}
