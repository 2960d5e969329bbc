//! Distribution function and decreasing/symmetric rearrangements of
//! nonnegative fields on the truncated graph.
//!
//! The distribution `rho(t)` is the exact super-level measure of the P1
//! interpolant: piecewise linear in `t` with breakpoints at nodal values,
//! nonincreasing and right-continuous (plateaus of the field appear as
//! downward jumps, resolved to the right). Rearrangements are generalized
//! inverses of `rho`, sampled on uniform grids:
//!
//! * `u*(x) = inf { t >= 0 : rho(t) <= x }` on `[0, |G|)`,
//! * `u^(x) = inf { t >= 0 : rho(t) <= 2|x| }` on `(-|G|/2, |G|/2)`.
//!
//! They serve as verification instruments for the kinetic-energy
//! inequalities, not as solver components.

use crate::error::SolveError;
use crate::field::Field;
use crate::grid::Grid;

/// Exact distribution function of a nonnegative piecewise-linear field.
#[derive(Debug, Clone)]
pub struct Distribution {
    /// Breakpoints, ascending, all >= 0; `rho` is linear between them.
    knots: Vec<f64>,
    /// Left limit at each knot, `measure { u >= t }`.
    rho_left: Vec<f64>,
    /// Right-continuous value at each knot, `measure { u > t }`.
    rho_right: Vec<f64>,
    total: f64,
}

/// `measure { x in element : u(x) > t }` for a linear element, in `[0, h]`.
fn measure_gt(a: f64, b: f64, h: f64, t: f64) -> f64 {
    let (lo, hi) = if a < b { (a, b) } else { (b, a) };
    if lo == hi {
        return if t < lo { h } else { 0.0 };
    }
    if t < lo {
        h
    } else if t >= hi {
        0.0
    } else {
        h * (hi - t) / (hi - lo)
    }
}

/// `measure { x in element : u(x) >= t }`.
fn measure_ge(a: f64, b: f64, h: f64, t: f64) -> f64 {
    let (lo, hi) = if a < b { (a, b) } else { (b, a) };
    if lo == hi {
        return if t <= lo { h } else { 0.0 };
    }
    if t <= lo {
        h
    } else if t > hi {
        0.0
    } else {
        h * (hi - t) / (hi - lo)
    }
}

/// (value at left node, value at right node, element length)
pub type Segment = (f64, f64, f64);

pub fn field_segments(grid: &Grid, u: &Field) -> Result<Vec<Segment>, SolveError> {
    if u.len() != grid.n_nodes() {
        return Err(SolveError::GridMismatch {
            expected: grid.n_nodes(),
            got: u.len(),
        });
    }
    Ok(grid
        .elements()
        .map(|el| (u.values[el.node_a], u.values[el.node_b], el.step))
        .collect())
}

pub fn distribution(grid: &Grid, u: &Field) -> Result<Distribution, SolveError> {
    Distribution::from_segments(&field_segments(grid, u)?)
}

impl Distribution {
    pub fn from_segments(segments: &[Segment]) -> Result<Self, SolveError> {
        let mut total = 0.0;
        let mut clean: Vec<Segment> = Vec::with_capacity(segments.len());
        let mut knots: Vec<f64> = Vec::with_capacity(2 * segments.len() + 1);
        knots.push(0.0);
        for &(a, b, h) in segments {
            if a < -1e-12 || b < -1e-12 {
                return Err(SolveError::InvalidParameter(
                    "rearrangement requires a nonnegative field".into(),
                ));
            }
            let a = a.max(0.0);
            let b = b.max(0.0);
            total += h;
            clean.push((a, b, h));
            knots.push(a);
            knots.push(b);
        }
        knots.sort_by(|x, y| x.partial_cmp(y).unwrap());
        knots.dedup();

        // exact per-knot sums keep everything in [0, h] per element, so the
        // values are stable and monotone regardless of near-plateau slopes
        let rho_right: Vec<f64> = knots
            .iter()
            .map(|&t| clean.iter().map(|&(a, b, h)| measure_gt(a, b, h, t)).sum())
            .collect();
        let rho_left: Vec<f64> = knots
            .iter()
            .map(|&t| clean.iter().map(|&(a, b, h)| measure_ge(a, b, h, t)).sum())
            .collect();

        Ok(Distribution {
            knots,
            rho_left,
            rho_right,
            total,
        })
    }

    pub fn total_length(&self) -> f64 {
        self.total
    }

    /// Right-continuous evaluation, `measure { u > t }`.
    pub fn eval(&self, t: f64) -> f64 {
        if t < self.knots[0] {
            return self.total;
        }
        let k = match self.knots.binary_search_by(|v| v.partial_cmp(&t).unwrap()) {
            Ok(k) => k,
            Err(ins) => ins - 1,
        };
        if k + 1 == self.knots.len() {
            return self.rho_right[k];
        }
        // linear between the right value here and the left limit at the next
        let span = self.knots[k + 1] - self.knots[k];
        let frac = (t - self.knots[k]) / span;
        self.rho_right[k] + frac * (self.rho_left[k + 1] - self.rho_right[k])
    }

    /// Generalized inverse `inf { t >= 0 : rho(t) <= x }`.
    pub fn inverse(&self, x: f64) -> f64 {
        if x >= self.eval(0.0) {
            return 0.0;
        }
        if x < self.rho_right[self.knots.len() - 1] {
            // below the residual at the top knot (exactly 0 at the maximum)
            return self.knots[self.knots.len() - 1];
        }
        // first knot with right value <= x (rho_right is nonincreasing)
        let mut lo = 0usize;
        let mut hi = self.knots.len() - 1;
        while lo < hi {
            let mid = (lo + hi) / 2;
            if self.rho_right[mid] <= x {
                hi = mid;
            } else {
                lo = mid + 1;
            }
        }
        let k = lo;
        if k == 0 {
            return self.knots[0];
        }
        if x < self.rho_left[k] {
            // inside the jump at knot k
            return self.knots[k];
        }
        // on the linear piece between knots k-1 and k
        let drop = self.rho_right[k - 1] - self.rho_left[k];
        if drop <= 0.0 {
            return self.knots[k];
        }
        self.knots[k - 1] + (self.rho_right[k - 1] - x) / drop * (self.knots[k] - self.knots[k - 1])
    }
}

/// Samples of a rearranged profile on a uniform grid.
#[derive(Debug, Clone)]
pub struct RearrangedProfile {
    /// Sample coordinates, ascending, uniform step.
    pub xs: Vec<f64>,
    pub values: Vec<f64>,
    pub step: f64,
}

impl RearrangedProfile {
    pub fn segments(&self) -> Vec<Segment> {
        self.values
            .windows(2)
            .map(|w| (w[0], w[1], self.step))
            .collect()
    }

    /// `int |u|^p` by the same per-element Simpson rule used on graph fields.
    pub fn p_norm_integral(&self, p: f64) -> f64 {
        self.segments()
            .iter()
            .map(|&(a, b, h)| {
                let m = 0.5 * (a + b);
                h / 6.0 * (a.abs().powf(p) + 4.0 * m.abs().powf(p) + b.abs().powf(p))
            })
            .sum()
    }

    /// `int |u'|^2` of the P1 interpolant.
    pub fn kinetic(&self) -> f64 {
        self.segments()
            .iter()
            .map(|&(a, b, h)| (b - a) * (b - a) / h)
            .sum()
    }
}

/// `int_G |u|^p` of a graph field with the element Simpson rule.
pub fn graph_p_norm_integral(grid: &Grid, u: &Field, p: f64) -> Result<f64, SolveError> {
    Ok(field_segments(grid, u)?
        .iter()
        .map(|&(a, b, h)| {
            let m = 0.5 * (a + b);
            h / 6.0 * (a.abs().powf(p) + 4.0 * m.abs().powf(p) + b.abs().powf(p))
        })
        .sum())
}

/// `int_G |u'|^2` of a graph field.
pub fn graph_kinetic(grid: &Grid, u: &Field) -> Result<f64, SolveError> {
    Ok(field_segments(grid, u)?
        .iter()
        .map(|&(a, b, h)| (b - a) * (b - a) / h)
        .sum())
}

/// Decreasing rearrangement sampled on `[0, |G|]` with the given step.
pub fn decreasing_rearrangement(
    grid: &Grid,
    u: &Field,
    step: f64,
) -> Result<RearrangedProfile, SolveError> {
    let rho = distribution(grid, u)?;
    let total = rho.total_length();
    let n = (total / step).ceil() as usize;
    let xs: Vec<f64> = (0..=n).map(|j| j as f64 * step).collect();
    let values = xs.iter().map(|&x| rho.inverse(x)).collect();
    Ok(RearrangedProfile { xs, values, step })
}

/// Symmetric rearrangement sampled on `[-|G|/2, |G|/2]`, even by construction.
pub fn symmetric_rearrangement(
    grid: &Grid,
    u: &Field,
    step: f64,
) -> Result<RearrangedProfile, SolveError> {
    let rho = distribution(grid, u)?;
    let half = rho.total_length() / 2.0;
    let n = (half / step).ceil() as usize;
    let xs: Vec<f64> = (-(n as i64)..=n as i64).map(|j| j as f64 * step).collect();
    let values = xs.iter().map(|&x| rho.inverse(2.0 * x.abs())).collect();
    Ok(RearrangedProfile { xs, values, step })
}

/// Minimal number of strict level crossings of the interpolant over a sweep
/// of levels in `(0, max u)`. A value >= 2 certifies the two-preimages
/// hypothesis of the symmetric rearrangement inequality.
pub fn min_level_crossings(grid: &Grid, u: &Field, n_levels: usize) -> Result<usize, SolveError> {
    let segments = field_segments(grid, u)?;
    let max = u.max_abs();
    if max == 0.0 {
        return Ok(0);
    }
    let mut min_count = usize::MAX;
    for j in 0..n_levels {
        let t = max * (j as f64 + 0.5) / n_levels as f64;
        let count = segments
            .iter()
            .filter(|&&(a, b, _)| (a - t) * (b - t) < 0.0)
            .count();
        min_count = min_count.min(count);
    }
    Ok(min_count)
}

/// Two-column CSV of a profile for plotting.
pub fn profile_csv(profile: &RearrangedProfile) -> String {
    let mut out = String::from("x,value\n");
    for (x, v) in profile.xs.iter().zip(&profile.values) {
        out.push_str(&format!("{x},{v}\n"));
    }
    out
}
