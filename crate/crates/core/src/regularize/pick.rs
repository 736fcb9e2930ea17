//! Truncation-index selection over a sweep of regularized solutions.
//!
//! Every rule takes per-index curves in sweep order (increasing truncation
//! index) and returns a 0-based position into them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default safety factor for the discrepancy rule.
pub const DEFAULT_KAPPA: f64 = 1.5;

/// Wedge products above this are treated as straight.
const TURN_TOLERANCE: f64 = 1e-12;

/// Spline curvature must fall below `-CURVATURE_TOLERANCE` to count as a corner.
const CURVATURE_TOLERANCE: f64 = 1e-8;

/// Samples per spline segment in the curvature fallback.
const SPLINE_SAMPLES: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PickFlag {
    /// No norm reached the threshold; the smallest one was taken.
    DiscrepancyUnsatisfied,
    /// Pruning found no convex corner; spline curvature decided.
    SplineFallback,
    /// Neither pruning nor spline curvature found a corner; last index taken.
    NoCorner,
    /// No monotone run of length ≥ 2; the functional was minimized everywhere.
    Unrestricted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Pick {
    pub position: usize,
    pub flag: Option<PickFlag>,
}

impl Pick {
    fn clean(position: usize) -> Self {
        Self { position, flag: None }
    }

    fn flagged(position: usize, flag: PickFlag) -> Self {
        Self { position, flag: Some(flag) }
    }
}

/// First position whose norm is within `kappa · noise_norm`.
pub fn discrepancy_pick(residual_norms: &[f64], noise_norm: f64, kappa: f64) -> Result<Pick> {
    if residual_norms.is_empty() {
        return Err(Error::InvalidInput("no residual norms to choose from".into()));
    }
    if !(kappa > 1.0) || !kappa.is_finite() {
        return Err(Error::InvalidInput(format!("kappa must exceed 1, got {kappa}")));
    }
    if !(noise_norm >= 0.0) || !noise_norm.is_finite() {
        return Err(Error::InvalidInput(format!("noise norm must be ≥ 0, got {noise_norm}")));
    }
    let threshold = kappa * noise_norm;
    if let Some(pos) = residual_norms.iter().position(|&r| r <= threshold) {
        return Ok(Pick::clean(pos));
    }
    let pos = argmin(residual_norms.iter().copied());
    Ok(Pick::flagged(pos, PickFlag::DiscrepancyUnsatisfied))
}

/// Corner of a discrete L-curve by adaptive pruning, with a spline fallback.
///
/// `points` are `(log ‖r‖, log ‖Lσ‖)` pairs. Non-finite points are skipped.
pub fn lcurve_corner(points: &[(f64, f64)]) -> Result<Pick> {
    if points.len() < 3 {
        return Err(Error::InvalidInput(format!(
            "L-curve needs at least 3 points, got {}",
            points.len()
        )));
    }
    let kept: Vec<usize> =
        (0..points.len()).filter(|&i| points[i].0.is_finite() && points[i].1.is_finite()).collect();
    if kept.len() < 3 {
        return Ok(Pick::flagged(points.len() - 1, PickFlag::NoCorner));
    }
    let p: Vec<[f64; 2]> = kept.iter().map(|&i| [points[i].0, points[i].1]).collect();
    if let Some(idx) = pruned_corner(&p) {
        return Ok(Pick::clean(kept[idx]));
    }
    match spline_corner(&p) {
        Some(idx) => Ok(Pick::flagged(kept[idx], PickFlag::SplineFallback)),
        None => Ok(Pick::flagged(points.len() - 1, PickFlag::NoCorner)),
    }
}

/// Minimizer of `‖r‖ · ‖Lσ‖` over the longest run where the residual does not
/// increase and the seminorm does not decrease. Ties go to the earlier index.
///
/// Points with a nonpositive or non-finite norm are excluded.
pub fn resreg_pick(residual_norms: &[f64], seminorms: &[f64]) -> Result<Pick> {
    if residual_norms.len() != seminorms.len() {
        return Err(Error::Shape(format!(
            "{} residual norms vs {} seminorms",
            residual_norms.len(),
            seminorms.len()
        )));
    }
    if residual_norms.len() < 2 {
        return Err(Error::InvalidInput("ResReg needs at least 2 points".into()));
    }
    let usable = |i: usize| {
        let (r, e) = (residual_norms[i], seminorms[i]);
        r.is_finite() && e.is_finite() && r > 0.0 && e > 0.0
    };
    let psi = |i: usize| residual_norms[i].ln() + seminorms[i].ln();

    let mut best_run: Option<(usize, usize)> = None;
    let mut start = None;
    for i in 0..residual_norms.len() {
        if !usable(i) {
            start = None;
            continue;
        }
        let s = match start {
            Some(s)
                if residual_norms[i] <= residual_norms[i - 1]
                    && seminorms[i] >= seminorms[i - 1] =>
            {
                s
            }
            _ => i,
        };
        start = Some(s);
        let len = i - s + 1;
        if best_run.is_none_or(|(a, b)| len > b - a + 1) {
            best_run = Some((s, i));
        }
    }
    match best_run {
        Some((a, b)) if b > a => Ok(Pick::clean(a + argmin((a..=b).map(psi)))),
        _ => {
            let candidates: Vec<usize> = (0..residual_norms.len()).filter(|&i| usable(i)).collect();
            if candidates.is_empty() {
                return Err(Error::InvalidInput("no positive finite norm pairs".into()));
            }
            let k = argmin(candidates.iter().map(|&i| psi(i)));
            Ok(Pick::flagged(candidates[k], PickFlag::Unrestricted))
        }
    }
}

/// First index of the smallest value; NaN never wins.
fn argmin(values: impl Iterator<Item = f64>) -> usize {
    let mut best = (0, f64::INFINITY);
    for (i, v) in values.enumerate() {
        if v < best.1 {
            best = (i, v);
        }
    }
    best.0
}

fn wedge(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[1] - b[0] * a[1]
}

fn unit(a: [f64; 2]) -> [f64; 2] {
    let len = a[0].hypot(a[1]);
    if len == 0.0 {
        [0.0, 0.0]
    } else {
        [a[0] / len, a[1] / len]
    }
}

/// Candidate corners from a sequence of pruned curves; `None` when no pruned
/// curve turns the right way.
fn pruned_corner(pts: &[[f64; 2]]) -> Option<usize> {
    let np = pts.len();
    let vecs: Vec<[f64; 2]> =
        (0..np - 1).map(|k| [pts[k + 1][0] - pts[k][0], pts[k + 1][1] - pts[k][1]]).collect();
    let lens: Vec<f64> = vecs.iter().map(|v| v[0].hypot(v[1])).collect();
    let dirs: Vec<[f64; 2]> = vecs.iter().map(|&v| unit(v)).collect();

    // longest first; equal lengths keep the later segment first
    let mut by_len: Vec<usize> = (0..np - 1).collect();
    by_len.sort_by(|&a, &b| lens[a].total_cmp(&lens[b]));
    by_len.reverse();

    let mut candidates: Vec<usize> = Vec::new();
    let mut convex = false;
    let mut keep = 5.min(np - 1);
    while keep < (np - 1) * 2 {
        let mut segs: Vec<usize> = by_len[..keep.min(np - 1)].to_vec();
        segs.sort_unstable();
        let seg_dirs: Vec<[f64; 2]> = segs.iter().map(|&k| dirs[k]).collect();

        if let Some(c) = angle_candidate(&seg_dirs, &segs) {
            convex = true;
            if !candidates.contains(&c) {
                candidates.push(c);
            }
        }
        if let Some(c) = global_candidate(pts, &seg_dirs, &segs) {
            if !candidates.contains(&c) {
                candidates.push(c);
            }
        }
        keep *= 2;
    }
    if !convex {
        return None;
    }

    if !candidates.contains(&0) {
        candidates.push(0);
    }
    candidates.sort_unstable();

    // positions k ≥ 1 where moving to the next candidate gains more seminorm
    // than it loses residual
    let steep: Vec<usize> = (1..candidates.len().saturating_sub(1))
        .filter(|&k| {
            let (a, b) = (pts[candidates[k]], pts[candidates[k + 1]]);
            b[1] - a[1] >= (b[0] - a[0]).abs()
        })
        .collect();
    if steep.is_empty() {
        return candidates.last().copied();
    }
    let hops: Vec<[f64; 2]> = candidates
        .windows(2)
        .map(|w| unit([pts[w[1]][0] - pts[w[0]][0], pts[w[1]][1] - pts[w[0]][1]]))
        .collect();
    let turning = steep.iter().copied().find(|&k| wedge(hops[k - 1], hops[k]) <= 0.0);
    Some(candidates[turning.unwrap_or(*steep.last().expect("nonempty"))])
}

/// End point of the sharpest clockwise turn between consecutive kept segments.
fn angle_candidate(dirs: &[[f64; 2]], segs: &[usize]) -> Option<usize> {
    let mut best = (0, f64::INFINITY);
    for k in 0..dirs.len().saturating_sub(1) {
        let w = wedge(dirs[k], dirs[k + 1]);
        if w < best.1 {
            best = (k, w);
        }
    }
    (best.1 < -TURN_TOLERANCE).then(|| segs[best.0] + 1)
}

/// Point nearest to the crossing of the flattest and steepest kept segments.
fn global_candidate(pts: &[[f64; 2]], dirs: &[[f64; 2]], segs: &[usize]) -> Option<usize> {
    let ln = dirs.len();
    if ln < 2 {
        return None;
    }
    let slope: Vec<f64> = dirs.iter().map(|d| d[1].abs()).collect();
    let mut order: Vec<usize> = (0..ln).collect();
    order.sort_by(|&a, &b| slope[a].total_cmp(&slope[b]));

    let mut count = 1;
    let mut lo = order[0];
    let mut hi = order[ln - 1];
    while lo >= hi && count < ln {
        hi = hi.max(order[ln - 1 - count]);
        count += 1;
        lo = lo.min(order[count - 1]);
    }
    let (flat, steep) = if count > 1 {
        let mut found = None;
        'outer: for i in 0..count {
            for j in (ln - count..ln).rev() {
                if order[i] < order[j] {
                    found = Some((order[i], order[j]));
                    break 'outer;
                }
            }
        }
        found?
    } else {
        (order[0], order[ln - 1])
    };

    let a = pts[segs[flat]];
    let s0 = pts[segs[steep]];
    let s1 = pts[segs[steep] + 1];
    let dy = s1[1] - s0[1];
    if dy == 0.0 {
        return None;
    }
    let x = s1[0] + (a[1] - s1[1]) / dy * (s1[0] - s0[0]);
    let origin = [x, a[1]];
    Some(argmin(pts.iter().map(|q| (origin[0] - q[0]).powi(2) + (origin[1] - q[1]).powi(2))))
}

/// Most negative curvature of a parametric monotone cubic through the points,
/// mapped to the nearest node.
fn spline_corner(pts: &[[f64; 2]]) -> Option<usize> {
    let xs: Vec<f64> = pts.iter().map(|p| p[0]).collect();
    let ys: Vec<f64> = pts.iter().map(|p| p[1]).collect();
    let dx = pchip_slopes(&xs);
    let dy = pchip_slopes(&ys);
    let mut best = (0, -CURVATURE_TOLERANCE);
    for k in 0..pts.len() - 1 {
        for step in 0..=SPLINE_SAMPLES {
            let u = step as f64 / SPLINE_SAMPLES as f64;
            let (x1, x2) = hermite_derivatives(xs[k], xs[k + 1], dx[k], dx[k + 1], u);
            let (y1, y2) = hermite_derivatives(ys[k], ys[k + 1], dy[k], dy[k + 1], u);
            let speed = (x1 * x1 + y1 * y1).powf(1.5);
            if speed == 0.0 {
                continue;
            }
            let kappa = (x1 * y2 - y1 * x2) / speed;
            if kappa < best.1 {
                best = (if u < 0.5 { k } else { k + 1 }, kappa);
            }
        }
    }
    (best.1 < -CURVATURE_TOLERANCE).then_some(best.0)
}

/// Shape-preserving node slopes on a unit-spaced parameter.
fn pchip_slopes(v: &[f64]) -> Vec<f64> {
    let n = v.len();
    let delta: Vec<f64> = v.windows(2).map(|w| w[1] - w[0]).collect();
    let mut d = vec![0.0; n];
    for k in 1..n - 1 {
        let (a, b) = (delta[k - 1], delta[k]);
        if a * b > 0.0 {
            d[k] = 2.0 / (1.0 / a + 1.0 / b);
        }
    }
    let end = |d0: f64, d1: f64| {
        let mut s = (3.0 * d0 - d1) / 2.0;
        if s * d0 <= 0.0 {
            s = 0.0;
        } else if d0 * d1 < 0.0 && s.abs() > 3.0 * d0.abs() {
            s = 3.0 * d0;
        }
        s
    };
    if n == 2 {
        d[0] = delta[0];
        d[1] = delta[0];
    } else {
        d[0] = end(delta[0], delta[1]);
        d[n - 1] = end(delta[n - 2], delta[n - 3]);
    }
    d
}

/// First and second derivative of the cubic Hermite segment at `u ∈ [0, 1]`.
fn hermite_derivatives(p0: f64, p1: f64, m0: f64, m1: f64, u: f64) -> (f64, f64) {
    let u2 = u * u;
    let first = (6.0 * u2 - 6.0 * u) * p0
        + (3.0 * u2 - 4.0 * u + 1.0) * m0
        + (-6.0 * u2 + 6.0 * u) * p1
        + (3.0 * u2 - 2.0 * u) * m1;
    let second = (12.0 * u - 6.0) * p0 + (6.0 * u - 4.0) * m0 + (-12.0 * u + 6.0) * p1
        + (6.0 * u - 2.0) * m1;
    (first, second)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn discrepancy_first_crossing() {
        let pick = discrepancy_pick(&[5.0, 2.0, 1.0, 0.9], 1.0, 1.5).unwrap();
        assert_eq!(pick, Pick::clean(2));
    }

    #[test]
    fn discrepancy_fallback() {
        let pick = discrepancy_pick(&[5.0, 2.0, 1.7, 1.9], 1.0, 1.5).unwrap();
        assert_eq!(pick, Pick::flagged(2, PickFlag::DiscrepancyUnsatisfied));
    }

    #[test]
    fn discrepancy_rejects_bad_input() {
        assert!(discrepancy_pick(&[], 1.0, 1.5).is_err());
        assert!(discrepancy_pick(&[1.0], 1.0, 1.0).is_err());
        assert!(discrepancy_pick(&[1.0], -1.0, 2.0).is_err());
    }

    /// Exact L: flat run to position `corner`, then a steep climb.
    fn exact_l(len: usize, corner: usize) -> Vec<(f64, f64)> {
        (0..len)
            .map(|i| {
                if i <= corner {
                    (-(i as f64), 0.01 * i as f64)
                } else {
                    let k = (i - corner) as f64;
                    (-(corner as f64) - 0.01 * k, 0.01 * corner as f64 + k)
                }
            })
            .collect()
    }

    #[test]
    fn corner_of_exact_l() {
        // 15 points, corner at the fifth
        let pick = lcurve_corner(&exact_l(15, 4)).unwrap();
        assert_eq!(pick, Pick::clean(4));
    }

    #[test]
    fn corner_moves_with_the_data() {
        for corner in 2..12 {
            assert_eq!(lcurve_corner(&exact_l(15, corner)).unwrap().position, corner);
        }
    }

    #[test]
    fn straight_line_has_no_corner() {
        let pts: Vec<(f64, f64)> = (0..10).map(|i| (-(i as f64), 0.5 * i as f64)).collect();
        assert_eq!(lcurve_corner(&pts).unwrap(), Pick::flagged(9, PickFlag::NoCorner));
    }

    #[test]
    fn corner_needs_three_points() {
        assert!(lcurve_corner(&[(0.0, 0.0), (1.0, 1.0)]).is_err());
    }

    #[test]
    fn resreg_argmin() {
        // ψ = (6, 2, 3, 8) on a monotone run
        let rho = [6.0, 2.0, 1.0, 1.0];
        let eta = [1.0, 1.0, 3.0, 8.0];
        assert_eq!(resreg_pick(&rho, &eta).unwrap(), Pick::clean(1));
    }

    #[test]
    fn resreg_ties_go_left() {
        let rho = [4.0, 2.0, 1.0, 0.5];
        let eta = [1.0, 2.0, 4.0, 16.0];
        assert_eq!(resreg_pick(&rho, &eta).unwrap().position, 0);
        let rho = [8.0, 2.0, 1.0, 0.5];
        let eta = [1.0, 2.0, 4.0, 16.0];
        assert_eq!(resreg_pick(&rho, &eta).unwrap().position, 1);
    }

    #[test]
    fn resreg_restricts_to_longest_run() {
        // positions 0..=1 then a break, then a run 2..=5
        let rho = [1.0, 0.5, 3.0, 2.0, 1.5, 1.0];
        let eta = [1.0, 1.0, 1.0, 1.2, 1.4, 2.0];
        assert_eq!(resreg_pick(&rho, &eta).unwrap(), Pick::clean(5));
    }

    #[test]
    fn resreg_without_run() {
        let rho = [1.0, 2.0, 3.0];
        let eta = [3.0, 2.0, 0.1];
        assert_eq!(resreg_pick(&rho, &eta).unwrap(), Pick::flagged(2, PickFlag::Unrestricted));
    }

    #[test]
    fn resreg_skips_zero_seminorm() {
        let rho = [5.0, 2.0, 1.0];
        let eta = [0.0, 1.0, 3.0];
        assert_eq!(resreg_pick(&rho, &eta).unwrap(), Pick::clean(1));
    }

    #[test]
    fn pchip_reproduces_lines() {
        let v = [0.0, 1.0, 3.0, 4.0];
        let d = pchip_slopes(&v);
        assert!(d.iter().all(|x| *x >= 0.0));
        let flat = pchip_slopes(&[2.0, 2.0, 2.0]);
        assert!(flat.iter().all(|x| *x == 0.0));
    }
}
