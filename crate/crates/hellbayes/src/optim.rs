//! Derivative-free minimization used by the distance estimators.
//!
//! The objectives here are cheap, smooth away from ties, and low dimensional
//! (one or two coordinates), but can be multimodal. The strategy is
//! multistart coordinate descent with golden-section line searches, followed
//! by an axis-scan verification pass that restarts the descent whenever a
//! scan finds a better point than the incumbent.

const GOLDEN_RATIO_CONJ: f64 = 0.618_033_988_749_894_9;

/// Golden-section search for the minimum of `f` on `[lo, hi]`.
/// Returns `(argmin, min)`; accuracy `tol` on the argument.
pub(crate) fn golden_section(
    f: &mut impl FnMut(f64) -> f64,
    lo: f64,
    hi: f64,
    tol: f64,
) -> (f64, f64) {
    debug_assert!(lo <= hi);
    let mut a = lo;
    let mut b = hi;
    let mut x1 = b - GOLDEN_RATIO_CONJ * (b - a);
    let mut x2 = a + GOLDEN_RATIO_CONJ * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    // Interval shrinks by the golden ratio each step; cap defends against
    // tol below float resolution.
    for _ in 0..200 {
        if (b - a) <= tol {
            break;
        }
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - GOLDEN_RATIO_CONJ * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + GOLDEN_RATIO_CONJ * (b - a);
            f2 = f(x2);
        }
    }
    let mid = 0.5 * (a + b);
    let fmid = f(mid);
    // Return the best point actually evaluated.
    let mut best = (mid, fmid);
    if f1 < best.1 {
        best = (x1, f1);
    }
    if f2 < best.1 {
        best = (x2, f2);
    }
    best
}

/// Line minimization localized around `(x0, f0)`: golden section on a
/// window of half-width `w`, expanding and sliding the window while the
/// minimizer keeps landing on a window edge that is not a box edge (still
/// descending). Never returns a point worse than the input.
fn line_min_local(
    f: &mut impl FnMut(f64) -> f64,
    x0: f64,
    f0: f64,
    mut w: f64,
    (blo, bhi): (f64, f64),
    tol: f64,
) -> (f64, f64) {
    let mut best = (x0, f0);
    for _ in 0..40 {
        let lo = (best.0 - w).max(blo);
        let hi = (best.0 + w).min(bhi);
        let (x, fx) = golden_section(f, lo, hi, tol);
        let improved = fx < best.1;
        if improved {
            best = (x, fx);
        }
        let on_lo_edge = x - lo <= 2.0 * tol && lo > blo;
        let on_hi_edge = hi - x <= 2.0 * tol && hi < bhi;
        if improved && (on_lo_edge || on_hi_edge) {
            w *= 2.0;
            continue;
        }
        break;
    }
    best
}

/// Coordinate descent from `start`, staying inside `bounds`. Line searches
/// are local (window a quarter of the box, expanded on demand), so distinct
/// starts explore distinct basins.
fn coordinate_descent(
    f: &impl Fn(&[f64]) -> f64,
    bounds: &[(f64, f64)],
    start: &[f64],
    tol: f64,
) -> (Vec<f64>, f64) {
    let mut point: Vec<f64> = start
        .iter()
        .zip(bounds)
        .map(|(&x, &(lo, hi))| x.clamp(lo, hi))
        .collect();
    let mut value = f(&point);
    for _sweep in 0..60 {
        let mut moved: f64 = 0.0;
        for i in 0..point.len() {
            let (lo, hi) = bounds[i];
            let w = 0.25 * (hi - lo);
            let mut line = |x: f64| {
                let mut p = point.clone();
                p[i] = x;
                f(&p)
            };
            let (x, fx) = line_min_local(&mut line, point[i], value, w, (lo, hi), tol);
            if fx < value {
                moved = moved.max((x - point[i]).abs());
                point[i] = x;
                value = fx;
            }
        }
        if moved <= tol {
            break;
        }
    }
    (point, value)
}

/// Number of points per axis in the verification scan.
const VERIFY_POINTS: usize = 200;

/// Minimizes `f` over the box from several starting points, then verifies
/// the incumbent against a 200-point scan along each coordinate axis
/// (other coordinates held at the incumbent), restarting the descent from
/// any scan point that beats it. Ties in the final value are broken toward
/// the lexicographically smallest point.
pub(crate) fn multistart_box_minimize(
    f: &impl Fn(&[f64]) -> f64,
    bounds: &[(f64, f64)],
    starts: &[Vec<f64>],
    tol: f64,
) -> (Vec<f64>, f64) {
    debug_assert!(!starts.is_empty());
    let mut candidates: Vec<(Vec<f64>, f64)> = starts
        .iter()
        .map(|s| coordinate_descent(f, bounds, s, tol))
        .collect();

    // Verification: scan each axis through the current best; a win restarts
    // the descent there. Few rounds suffice because each restart must strictly
    // improve.
    for _round in 0..3 {
        let best = best_candidate(&candidates);
        let (best_point, best_value) = (best.0.clone(), best.1);
        let mut improved = false;
        for axis in 0..bounds.len() {
            let (lo, hi) = bounds[axis];
            let mut challenger: Option<Vec<f64>> = None;
            let mut challenger_value = best_value;
            for k in 0..VERIFY_POINTS {
                let x = lo + (hi - lo) * (k as f64 + 0.5) / VERIFY_POINTS as f64;
                let mut p = best_point.clone();
                p[axis] = x;
                let v = f(&p);
                if v < challenger_value - 1e-12 {
                    challenger_value = v;
                    challenger = Some(p);
                }
            }
            if let Some(p) = challenger {
                candidates.push(coordinate_descent(f, bounds, &p, tol));
                improved = true;
            }
        }
        if !improved {
            break;
        }
    }

    let best = best_candidate(&candidates);
    (best.0.clone(), best.1)
}

/// Smallest value wins; near-exact ties go to the lexicographically smallest
/// point so results do not depend on start ordering.
fn best_candidate(candidates: &[(Vec<f64>, f64)]) -> &(Vec<f64>, f64) {
    let min_value = candidates
        .iter()
        .map(|c| c.1)
        .fold(f64::INFINITY, f64::min);
    let tie = 1e-12 * min_value.abs().max(1.0);
    candidates
        .iter()
        .filter(|c| c.1 <= min_value + tie)
        .min_by(|a, b| {
            a.0.partial_cmp(&b.0)
                .unwrap_or(std::cmp::Ordering::Equal)
        })
        .expect("candidate list is nonempty")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn golden_section_finds_parabola_vertex() {
        let mut f = |x: f64| (x - 1.3) * (x - 1.3) + 0.5;
        let (x, fx) = golden_section(&mut f, -10.0, 10.0, 1e-8);
        assert!((x - 1.3).abs() < 1e-6);
        assert!((fx - 0.5).abs() < 1e-10);
    }

    #[test]
    fn golden_section_handles_boundary_minimum() {
        let mut f = |x: f64| x;
        let (x, _) = golden_section(&mut f, 2.0, 5.0, 1e-8);
        assert!((x - 2.0).abs() < 1e-6);
    }

    #[test]
    fn multistart_escapes_local_minimum() {
        // Double well: local minimum near -1 (value ~0.04), global near +1.2
        // (value ~0). A start in the left basin alone would stall; the
        // verification scan finds the right basin.
        let f = |p: &[f64]| {
            let x = p[0];
            let left = 0.04 + (x + 1.0) * (x + 1.0);
            let right = (x - 1.2) * (x - 1.2);
            left.min(right)
        };
        let (point, value) =
            multistart_box_minimize(&f, &[(-3.0, 3.0)], &[vec![-1.4]], 1e-7);
        assert!((point[0] - 1.2).abs() < 1e-5);
        assert!(value < 1e-9);
    }

    #[test]
    fn two_dimensional_quadratic() {
        let f = |p: &[f64]| (p[0] - 0.5).powi(2) + 2.0 * (p[1] - 2.0).powi(2);
        let (point, value) = multistart_box_minimize(
            &f,
            &[(-5.0, 5.0), (0.1, 6.0)],
            &[vec![0.0, 1.0], vec![3.0, 5.0]],
            1e-7,
        );
        assert!((point[0] - 0.5).abs() < 1e-5);
        assert!((point[1] - 2.0).abs() < 1e-5);
        assert!(value < 1e-9);
    }

    #[test]
    fn flat_objective_breaks_ties_lexicographically() {
        let f = |_: &[f64]| 1.0;
        let (point, value) =
            multistart_box_minimize(&f, &[(0.0, 1.0)], &[vec![0.9], vec![0.2]], 1e-7);
        assert_eq!(value, 1.0);
        // All points tie; the reported one must not depend on start order.
        let (point2, _) =
            multistart_box_minimize(&f, &[(0.0, 1.0)], &[vec![0.2], vec![0.9]], 1e-7);
        assert_eq!(point, point2);
    }
}
