//! Point estimators that minimize Hellinger distance against a posterior
//! over densities.
//!
//! Three one-step estimators share the same ingredients, an ensemble of
//! density draws and a parametric family, but aggregate differently:
//!
//! * `theta_hat_1` minimizes the distance to the *posterior mean* density.
//! * `theta_hat_2` minimizes the *posterior expectation* of the distance,
//!   the ensemble average of per-draw distances.
//! * `theta_hat_3` minimizes the posterior *probability* that the distance
//!   exceeds a tolerance `epsilon`, the ensemble fraction of far draws.
//!
//! `classical_mhde` is the kernel-density baseline the Bayesian versions
//! are compared against. All are pure functions; replications parallelize
//! freely outside.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::density::{
    ensemble_grid_densities, posterior_mean_density, BandwidthRule, DensityEnsemble, KdeDensity,
};
use crate::error::{ensure_finite, Error, Result};
use crate::family::{ParamVector, ParametricFamily};
use crate::grid::{GridDensity, QuadratureGrid};
use crate::hellinger::{
    hellinger_sq_normal_raw, minimize_hellinger, normal_affinity_terms, search_starts,
    validate_search_box, LocationDistanceTable,
};
use crate::optim::{golden_section, multistart_box_minimize};

/// Lattice segments per coordinate for the exceedance search: one
/// coordinate gets the full resolution, two share it.
const EXCEEDANCE_STEPS_1D: usize = 2000;
const EXCEEDANCE_STEPS_2D: usize = 200;

/// Relative slack under which two objective values count as tied.
const TIE_EPS: f64 = 1e-12;

/// Which estimator produced a result.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimatorMethod {
    Theta1,
    Theta2,
    Theta3,
    ClassicalMhde,
}

impl EstimatorMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            EstimatorMethod::Theta1 => "theta1",
            EstimatorMethod::Theta2 => "theta2",
            EstimatorMethod::Theta3 => "theta3",
            EstimatorMethod::ClassicalMhde => "classical-mhde",
        }
    }
}

impl std::fmt::Display for EstimatorMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A point estimate and what produced it.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EstimatorResult {
    pub theta: ParamVector,
    pub method: EstimatorMethod,
    /// Attained objective: a squared distance for `theta1`, `theta2`, and
    /// `classical-mhde`; an exceedance fraction for `theta3`. Nonnegative.
    pub objective_value: f64,
    /// Ensemble draws consumed; 0 for the kernel baseline.
    pub ensemble_size: usize,
    /// The exceedance tolerance; present exactly when method is `theta3`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
}

/// Minimizer of the distance to the posterior-mean density.
pub fn theta_hat_1(
    ensemble: &DensityEnsemble,
    family: &ParametricFamily,
    grid: &QuadratureGrid,
    search_box: &[(f64, f64)],
) -> Result<EstimatorResult> {
    let mean_g = posterior_mean_density(ensemble, grid)?;
    let (theta, value) = minimize_hellinger(family, &mean_g, search_box)?;
    Ok(EstimatorResult {
        theta,
        method: EstimatorMethod::Theta1,
        objective_value: value,
        ensemble_size: ensemble.len(),
        epsilon: None,
    })
}

/// Ensemble average of the per-draw squared distances, collapsed into one
/// grid pass: the average is linear in each draw's mass and root profile,
/// so `mean_j D(g_j, f) = mean_mass + mass_f - 2 <w sbar, sqrt f>` with
/// `sbar` the mean of the draws' root densities.
struct MeanSqrtProfile {
    grid: QuadratureGrid,
    mean_sqrt: Vec<f64>,
    mean_mass: f64,
}

impl MeanSqrtProfile {
    fn new(grid: &QuadratureGrid, gds: &[GridDensity]) -> Self {
        let inv = 1.0 / gds.len() as f64;
        let mut mean_sqrt = vec![0.0; grid.len()];
        let mut mean_mass = 0.0;
        for g in gds {
            mean_mass += g.mass();
            for (m, &s) in mean_sqrt.iter_mut().zip(g.sqrt_values()) {
                *m += s;
            }
        }
        for m in &mut mean_sqrt {
            *m *= inv;
        }
        MeanSqrtProfile {
            grid: grid.clone(),
            mean_sqrt,
            mean_mass: mean_mass * inv,
        }
    }

    /// The expected squared distance at an in-box parameter.
    fn expected_distance(&self, family: &ParametricFamily, p: &[f64]) -> f64 {
        let (mu, sd) = family.location_scale_unchecked(p);
        let (mass_f, dot) = normal_affinity_terms(&self.grid, &self.mean_sqrt, mu, sd);
        (self.mean_mass + mass_f - 2.0 * dot).clamp(0.0, 2.0)
    }
}

/// Shared minimizer of the expected distance; `theta_hat_3` delegates here
/// when its exceedance objective is flat everywhere.
fn expected_distance_minimizer(
    profile: &MeanSqrtProfile,
    ensemble: &DensityEnsemble,
    family: &ParametricFamily,
    grid: &QuadratureGrid,
    search_box: &[(f64, f64)],
) -> Result<(ParamVector, f64)> {
    let mean_g = posterior_mean_density(ensemble, grid)?;
    let starts = search_starts(family, &mean_g, search_box);
    let objective = |p: &[f64]| profile.expected_distance(family, p);
    let (point, value) = multistart_box_minimize(&objective, search_box, &starts, 1e-6);
    Ok((ParamVector::new(point), value))
}

/// Minimizer of the posterior expected squared distance.
pub fn theta_hat_2(
    ensemble: &DensityEnsemble,
    family: &ParametricFamily,
    grid: &QuadratureGrid,
    search_box: &[(f64, f64)],
) -> Result<EstimatorResult> {
    validate_search_box(family, search_box)?;
    let gds = ensemble_grid_densities(ensemble, grid)?;
    let profile = MeanSqrtProfile::new(grid, &gds);
    let (theta, value) =
        expected_distance_minimizer(&profile, ensemble, family, grid, search_box)?;
    Ok(EstimatorResult {
        theta,
        method: EstimatorMethod::Theta2,
        objective_value: value,
        ensemble_size: ensemble.len(),
        epsilon: None,
    })
}

/// Per-draw distance evaluators for the exceedance search. Location
/// families go through a tabulated profile (cheap per query); a free scale
/// coordinate forces exact evaluation.
enum DrawEval<'a> {
    Table(LocationDistanceTable),
    Exact(&'a GridDensity),
}

fn draw_evals<'a>(
    family: &ParametricFamily,
    gds: &'a [GridDensity],
    search_box: &[(f64, f64)],
) -> Vec<DrawEval<'a>> {
    match family.known_sigma() {
        Some(sigma) => gds
            .par_iter()
            .map(|g| {
                DrawEval::Table(LocationDistanceTable::new(
                    g,
                    sigma,
                    search_box[0].0,
                    search_box[0].1,
                ))
            })
            .collect(),
        None => gds.iter().map(DrawEval::Exact).collect(),
    }
}

fn exceedance_count(
    evals: &[DrawEval],
    family: &ParametricFamily,
    p: &[f64],
    epsilon: f64,
) -> usize {
    let (mu, sd) = family.location_scale_unchecked(p);
    evals
        .iter()
        .filter(|e| match e {
            DrawEval::Table(t) => t.eval(mu) > epsilon,
            DrawEval::Exact(g) => hellinger_sq_normal_raw(g, mu, sd) > epsilon,
        })
        .count()
}

/// Minimizer of the posterior probability that the squared distance
/// exceeds `epsilon`, i.e. of the ensemble fraction of draws farther than
/// the tolerance.
///
/// The objective is a step function from a finite ensemble, so the search
/// runs on a deterministic lattice over the box rather than a line search
/// built for unimodal objectives. Flat stretches are resolved in a fixed
/// order: among lattice points attaining the minimal fraction, take the one
/// with the smallest expected distance (ties broken toward the
/// lexicographically smallest point), then polish within one lattice step
/// as long as the fraction stays minimal. When every parameter exceeds the
/// tolerance for every draw the fraction carries no information at all and
/// the estimate falls back to the expected-distance minimizer.
pub fn theta_hat_3(
    ensemble: &DensityEnsemble,
    family: &ParametricFamily,
    grid: &QuadratureGrid,
    search_box: &[(f64, f64)],
    epsilon: f64,
) -> Result<EstimatorResult> {
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(Error::invalid(format!(
            "exceedance tolerance must be positive, got {epsilon}"
        )));
    }
    validate_search_box(family, search_box)?;
    let gds = ensemble_grid_densities(ensemble, grid)?;
    let profile = MeanSqrtProfile::new(grid, &gds);
    let ensemble_size = ensemble.len();

    let evals = draw_evals(family, &gds, search_box);
    let steps = if search_box.len() == 1 {
        EXCEEDANCE_STEPS_1D
    } else {
        EXCEEDANCE_STEPS_2D
    };
    let axes: Vec<Vec<f64>> = search_box
        .iter()
        .map(|&(lo, hi)| {
            (0..=steps)
                .map(|k| lo + (hi - lo) * k as f64 / steps as f64)
                .collect()
        })
        .collect();

    let lattice: Vec<Vec<f64>> = match axes.len() {
        1 => axes[0].iter().map(|&x| vec![x]).collect(),
        _ => axes[0]
            .iter()
            .flat_map(|&x| axes[1].iter().map(move |&y| vec![x, y]))
            .collect(),
    };
    let counts: Vec<usize> = lattice
        .par_iter()
        .map(|p| exceedance_count(&evals, family, p, epsilon))
        .collect();
    let m_star = *counts.iter().min().expect("lattice is nonempty");

    if m_star == ensemble_size {
        // Full plateau: the fraction is 1 everywhere, fall back.
        let (theta, _) =
            expected_distance_minimizer(&profile, ensemble, family, grid, search_box)?;
        return Ok(EstimatorResult {
            theta,
            method: EstimatorMethod::Theta3,
            objective_value: 1.0,
            ensemble_size,
            epsilon: Some(epsilon),
        });
    }

    // Tie-break over the plateau by expected distance, then lexicographic.
    let mut best: Option<(&Vec<f64>, f64)> = None;
    for (p, &c) in lattice.iter().zip(&counts) {
        if c != m_star {
            continue;
        }
        let f = profile.expected_distance(family, p);
        best = match best {
            None => Some((p, f)),
            Some((bp, bf)) => {
                let tie = (f - bf).abs() <= TIE_EPS * bf.abs().max(1.0);
                if (f < bf && !tie) || (tie && p < bp) {
                    Some((p, f))
                } else {
                    Some((bp, bf))
                }
            }
        };
    }
    let (winner, winner_f) = best.expect("plateau is nonempty");
    let mut point = winner.clone();
    let mut fval = winner_f;

    // Polish inside one lattice cell, never leaving the plateau.
    for axis in 0..point.len() {
        let step = (search_box[axis].1 - search_box[axis].0) / steps as f64;
        let lo = (point[axis] - step).max(search_box[axis].0);
        let hi = (point[axis] + step).min(search_box[axis].1);
        let fixed = point.clone();
        let mut objective = |x: f64| {
            let mut q = fixed.clone();
            q[axis] = x;
            profile.expected_distance(family, &q)
        };
        let (x, fx) = golden_section(&mut objective, lo, hi, 1e-9);
        let mut candidate = point.clone();
        candidate[axis] = x;
        if fx <= fval && exceedance_count(&evals, family, &candidate, epsilon) == m_star {
            point = candidate;
            fval = fx;
        }
    }

    Ok(EstimatorResult {
        theta: ParamVector::new(point),
        method: EstimatorMethod::Theta3,
        objective_value: m_star as f64 / ensemble_size as f64,
        ensemble_size,
        epsilon: Some(epsilon),
    })
}

/// Kernel-density baseline: fit a kernel estimate to the data and minimize
/// the distance against it directly, no posterior involved.
pub fn classical_mhde(
    data: &[f64],
    family: &ParametricFamily,
    bandwidth_rule: BandwidthRule,
    grid: &QuadratureGrid,
    search_box: &[(f64, f64)],
) -> Result<EstimatorResult> {
    if data.len() < 2 {
        return Err(Error::invalid(format!(
            "kernel estimate needs at least two observations, got {}",
            data.len()
        )));
    }
    ensure_finite(data, "data")?;
    let kde = KdeDensity::new(data, bandwidth_rule)?;
    let gd = GridDensity::from_density(grid, &kde)?;
    let (theta, value) = minimize_hellinger(family, &gd, search_box)?;
    Ok(EstimatorResult {
        theta,
        method: EstimatorMethod::ClassicalMhde,
        objective_value: value,
        ensemble_size: 0,
        epsilon: None,
    })
}

/// Default exceedance tolerance `ln(n)/sqrt(n)`, the rate under which the
/// probability estimator stays consistent. Needs n >= 2 for a positive
/// value.
pub fn default_epsilon(n: usize) -> Result<f64> {
    if n < 2 {
        return Err(Error::invalid(format!(
            "the default tolerance needs at least two observations, got {n}"
        )));
    }
    let nf = n as f64;
    Ok(nf.ln() / nf.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::{EnsembleMeta, GaussianMixtureDensity};
    use crate::dpmix::{run_blocked_gibbs, DpPriorConfig, McmcConfig};
    use crate::grid::build_grid;
    use crate::hellinger::hellinger_sq_grid;
    use crate::stats::ln_normal_pdf;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn location_family() -> ParametricFamily {
        ParametricFamily::normal_location(1.0).unwrap()
    }

    fn ensemble_of(draws: Vec<GaussianMixtureDensity>) -> DensityEnsemble {
        let meta = EnsembleMeta {
            seed: 0,
            burn_in: 0,
            thin: 1,
            source_iterations: (0..draws.len()).collect(),
        };
        DensityEnsemble::new(draws, meta).unwrap()
    }

    fn single(mean: f64, var: f64) -> GaussianMixtureDensity {
        GaussianMixtureDensity::single(mean, var).unwrap()
    }

    #[test]
    fn t1_recovers_an_exact_family_member() {
        let ensemble = ensemble_of(vec![single(5.0, 1.0)]);
        let family = location_family();
        let grid = QuadratureGrid::with_density(-4.0, 14.0, 32).unwrap();
        let r = theta_hat_1(&ensemble, &family, &grid, &[(0.0, 10.0)]).unwrap();
        assert!((r.theta[0] - 5.0).abs() < 1e-3, "theta {}", r.theta[0]);
        assert!(r.objective_value >= 0.0 && r.objective_value < 1e-4);
        assert_eq!(r.method, EstimatorMethod::Theta1);
        assert_eq!(r.ensemble_size, 1);
        assert_eq!(r.epsilon, None);
    }

    #[test]
    fn t1_two_draw_mixture_matches_the_brute_force_argmin() {
        // The mean of {N(0,1), N(4,1)} is bimodal; the distance to a single
        // normal has two symmetric global minima (near 0.64 and 3.36), not
        // a minimum at the midpoint 2. The optimizer may land in either
        // basin, so accept the brute-force argmin or its mirror.
        let ensemble = ensemble_of(vec![single(0.0, 1.0), single(4.0, 1.0)]);
        let family = location_family();
        let grid = QuadratureGrid::with_density(-9.0, 13.0, 32).unwrap();
        let mean_g = posterior_mean_density(&ensemble, &grid).unwrap();

        let mut bf = (f64::INFINITY, f64::NAN);
        let mut theta = -2.0;
        while theta <= 6.0 {
            let d = hellinger_sq_normal_raw(&mean_g, theta, 1.0);
            if d < bf.0 {
                bf = (d, theta);
            }
            theta += 1e-3;
        }

        let r = theta_hat_1(&ensemble, &family, &grid, &[(-2.0, 6.0)]).unwrap();
        let hit = (r.theta[0] - bf.1).abs().min((r.theta[0] - (4.0 - bf.1)).abs());
        assert!(hit < 0.02, "theta {} vs brute force {}", r.theta[0], bf.1);
        assert!((r.objective_value - bf.0).abs() < 1e-6);
        // The twin minima genuinely beat the midpoint.
        let mid = hellinger_sq_normal_raw(&mean_g, 2.0, 1.0);
        assert!(bf.0 < mid - 0.01, "twin {} vs midpoint {mid}", bf.0);
    }

    #[test]
    fn t1_is_invariant_to_draw_order() {
        let family = location_family();
        let grid = QuadratureGrid::with_density(-9.0, 13.0, 32).unwrap();
        let fwd = ensemble_of(vec![single(0.0, 1.0), single(4.0, 1.0)]);
        let rev = ensemble_of(vec![single(4.0, 1.0), single(0.0, 1.0)]);
        let a = theta_hat_1(&fwd, &family, &grid, &[(-2.0, 6.0)]).unwrap();
        let b = theta_hat_1(&rev, &family, &grid, &[(-2.0, 6.0)]).unwrap();
        assert_eq!(a.theta, b.theta);
    }

    #[test]
    fn t2_singleton_collapses_to_t1() {
        let ensemble = ensemble_of(vec![single(5.0, 1.0)]);
        let family = location_family();
        let grid = QuadratureGrid::with_density(-4.0, 14.0, 32).unwrap();
        let r1 = theta_hat_1(&ensemble, &family, &grid, &[(0.0, 10.0)]).unwrap();
        let r2 = theta_hat_2(&ensemble, &family, &grid, &[(0.0, 10.0)]).unwrap();
        assert!((r1.theta[0] - r2.theta[0]).abs() < 1e-6);
        assert_eq!(r2.method, EstimatorMethod::Theta2);
    }

    #[test]
    fn t2_duplicate_draws_change_nothing() {
        let family = location_family();
        let grid = QuadratureGrid::with_density(-8.0, 8.0, 32).unwrap();
        let one = ensemble_of(vec![single(0.0, 1.0)]);
        let two = ensemble_of(vec![single(0.0, 1.0), single(0.0, 1.0)]);
        let a = theta_hat_2(&one, &family, &grid, &[(-3.0, 3.0)]).unwrap();
        let b = theta_hat_2(&two, &family, &grid, &[(-3.0, 3.0)]).unwrap();
        assert!((a.theta[0] - b.theta[0]).abs() < 1e-9);
    }

    #[test]
    fn t2_two_draw_argmin_sits_at_the_midpoint() {
        let ensemble = ensemble_of(vec![single(0.0, 1.0), single(4.0, 1.0)]);
        let family = location_family();
        let grid = QuadratureGrid::with_density(-9.0, 13.0, 32).unwrap();
        let gds = ensemble_grid_densities(&ensemble, &grid).unwrap();
        let profile = MeanSqrtProfile::new(&grid, &gds);

        let mut bf = (f64::INFINITY, f64::NAN);
        let mut theta = -2.0;
        while theta <= 6.0 {
            let d = profile.expected_distance(&family, &[theta]);
            if d < bf.0 {
                bf = (d, theta);
            }
            theta += 1e-3;
        }

        let r = theta_hat_2(&ensemble, &family, &grid, &[(-2.0, 6.0)]).unwrap();
        assert!((r.theta[0] - bf.1).abs() < 0.02, "{} vs {}", r.theta[0], bf.1);
        assert!((r.theta[0] - 2.0).abs() < 0.02, "midpoint miss: {}", r.theta[0]);
    }

    #[test]
    fn t2_collapsed_objective_equals_the_average_of_distances() {
        let draws = vec![single(0.0, 1.0), single(1.0, 2.0), single(3.0, 1.5)];
        let ensemble = ensemble_of(draws);
        let family = location_family();
        let grid = QuadratureGrid::with_density(-10.0, 12.0, 32).unwrap();
        let gds = ensemble_grid_densities(&ensemble, &grid).unwrap();
        let profile = MeanSqrtProfile::new(&grid, &gds);
        for &theta in &[-1.0, 0.7, 3.0] {
            let f_theta =
                GridDensity::from_fn(&grid, |x| ln_normal_pdf(x, theta, 1.0).exp()).unwrap();
            let direct: f64 = gds
                .iter()
                .map(|g| hellinger_sq_grid(&f_theta, g).unwrap())
                .sum::<f64>()
                / gds.len() as f64;
            let collapsed = profile.expected_distance(&family, &[theta]);
            assert!(
                (collapsed - direct).abs() < 1e-12,
                "theta {theta}: collapsed {collapsed} vs direct {direct}"
            );
        }
    }

    #[test]
    fn t3_plateau_resolves_to_the_expected_distance_minimizer() {
        let ensemble = ensemble_of(vec![single(5.0, 1.0)]);
        let family = location_family();
        let grid = QuadratureGrid::with_density(-4.0, 14.0, 32).unwrap();
        let r = theta_hat_3(&ensemble, &family, &grid, &[(0.0, 10.0)], 0.5).unwrap();
        assert!((r.theta[0] - 5.0).abs() < 0.01, "theta {}", r.theta[0]);
        assert_eq!(r.objective_value, 0.0);
        assert_eq!(r.epsilon, Some(0.5));
        assert_eq!(r.method, EstimatorMethod::Theta3);
    }

    #[test]
    fn t3_full_plateau_falls_back_to_t2() {
        // Bimodal draws keep every single normal at least ~0.3 away, so a
        // tolerance of 1e-9 is exceeded by every draw at every theta.
        let g1 = GaussianMixtureDensity::new(
            vec![0.5, 0.5],
            vec![0.0, 4.0],
            vec![1.0, 1.0],
        )
        .unwrap();
        let g2 = GaussianMixtureDensity::new(
            vec![0.5, 0.5],
            vec![1.0, 5.0],
            vec![1.0, 1.0],
        )
        .unwrap();
        let ensemble = ensemble_of(vec![g1, g2]);
        let family = location_family();
        let grid = QuadratureGrid::with_density(-9.0, 14.0, 32).unwrap();
        let r3 = theta_hat_3(&ensemble, &family, &grid, &[(-2.0, 7.0)], 1e-9).unwrap();
        let r2 = theta_hat_2(&ensemble, &family, &grid, &[(-2.0, 7.0)]).unwrap();
        assert_eq!(r3.objective_value, 1.0);
        assert!(
            (r3.theta[0] - r2.theta[0]).abs() < 1e-6,
            "{} vs {}",
            r3.theta[0],
            r2.theta[0]
        );
    }

    #[test]
    fn t3_rejects_nonpositive_tolerances() {
        let ensemble = ensemble_of(vec![single(0.0, 1.0)]);
        let family = location_family();
        let grid = QuadratureGrid::with_density(-8.0, 8.0, 32).unwrap();
        for eps in [0.0, -0.5, f64::NAN] {
            assert!(theta_hat_3(&ensemble, &family, &grid, &[(-3.0, 3.0)], eps).is_err());
        }
    }

    #[test]
    fn t3_is_invariant_to_draw_order() {
        let family = location_family();
        let grid = QuadratureGrid::with_density(-9.0, 13.0, 32).unwrap();
        let fwd = ensemble_of(vec![single(0.0, 1.0), single(4.0, 1.0)]);
        let rev = ensemble_of(vec![single(4.0, 1.0), single(0.0, 1.0)]);
        let a = theta_hat_3(&fwd, &family, &grid, &[(-2.0, 6.0)], 0.3).unwrap();
        let b = theta_hat_3(&rev, &family, &grid, &[(-2.0, 6.0)], 0.3).unwrap();
        assert_eq!(a.theta, b.theta);
        assert_eq!(a.objective_value, b.objective_value);
    }

    #[test]
    fn t3_searches_both_coordinates_of_a_location_scale_family() {
        let ensemble = ensemble_of(vec![single(0.0, 1.0)]);
        let family = ParametricFamily::normal_location_scale();
        let grid = QuadratureGrid::with_density(-9.0, 9.0, 16).unwrap();
        let r = theta_hat_3(
            &ensemble,
            &family,
            &grid,
            &[(-2.0, 2.0), (0.5, 2.0)],
            0.5,
        )
        .unwrap();
        assert!(r.theta[0].abs() < 0.05, "mu {}", r.theta[0]);
        assert!((r.theta[1] - 1.0).abs() < 0.05, "sigma {}", r.theta[1]);
        assert_eq!(r.objective_value, 0.0);
    }

    #[test]
    fn t3_tracks_t1_on_a_mixture_posterior() {
        // Long data, fitted mixture ensemble, default tolerance: the
        // probability estimator must agree with the mean-density one and
        // both must sit near the generating location.
        let mut rng = ChaCha8Rng::seed_from_u64(404);
        let gen = Normal::new(5.0, 1.0).unwrap();
        let data: Vec<f64> = (0..200).map(|_| gen.sample(&mut rng)).collect();
        let mcmc = McmcConfig {
            seed: 17,
            ..McmcConfig::default()
        };
        let ensemble = run_blocked_gibbs(&data, &DpPriorConfig::default(), &mcmc).unwrap();
        let grid = crate::density::grid_for_ensemble(&data, &ensemble, 32, 4.0).unwrap();
        let family = location_family();
        let search = [(1.0, 9.0)];
        let eps = default_epsilon(data.len()).unwrap();
        let r3 = theta_hat_3(&ensemble, &family, &grid, &search, eps).unwrap();
        let r1 = theta_hat_1(&ensemble, &family, &grid, &search).unwrap();
        assert!((r3.theta[0] - 5.0).abs() < 0.3, "theta3 {}", r3.theta[0]);
        assert!(
            (r3.theta[0] - r1.theta[0]).abs() < 0.2,
            "theta3 {} vs theta1 {}",
            r3.theta[0],
            r1.theta[0]
        );
    }

    #[test]
    fn classical_mhde_recovers_a_normal_location() {
        let mut rng = ChaCha8Rng::seed_from_u64(808);
        let gen = Normal::new(5.0, 1.0).unwrap();
        let data: Vec<f64> = (0..200).map(|_| gen.sample(&mut rng)).collect();
        let grid = build_grid(&data, 32, 4.0).unwrap();
        let family = location_family();
        let r = classical_mhde(
            &data,
            &family,
            BandwidthRule::Silverman,
            &grid,
            &[(0.0, 10.0)],
        )
        .unwrap();
        assert!((r.theta[0] - 5.0).abs() < 0.25, "theta {}", r.theta[0]);
        assert_eq!(r.method, EstimatorMethod::ClassicalMhde);
        assert_eq!(r.ensemble_size, 0);
    }

    #[test]
    fn classical_mhde_ignores_a_distant_mass_clump() {
        let mut rng = ChaCha8Rng::seed_from_u64(808);
        let gen = Normal::new(5.0, 1.0).unwrap();
        let clean: Vec<f64> = (0..200).map(|_| gen.sample(&mut rng)).collect();
        let mut shifted = clean.clone();
        for x in shifted.iter_mut().take(10) {
            *x = 50.0;
        }
        let family = location_family();
        let grid_clean = build_grid(&clean, 32, 4.0).unwrap();
        let grid_shift = build_grid(&shifted, 32, 4.0).unwrap();
        let a = classical_mhde(
            &clean,
            &family,
            BandwidthRule::Silverman,
            &grid_clean,
            &[(0.0, 10.0)],
        )
        .unwrap();
        let b = classical_mhde(
            &shifted,
            &family,
            BandwidthRule::Silverman,
            &grid_shift,
            &[(0.0, 10.0)],
        )
        .unwrap();
        assert!(
            (a.theta[0] - b.theta[0]).abs() < 0.15,
            "clean {} vs contaminated {}",
            a.theta[0],
            b.theta[0]
        );
    }

    #[test]
    fn classical_mhde_respects_exact_symmetry() {
        // Data exactly symmetric about 3 on a grid symmetric about 3.
        let data = [1.5, 2.5, 3.5, 4.5];
        let family = location_family();
        let grid = QuadratureGrid::with_density(-5.0, 11.0, 16).unwrap();
        let r = classical_mhde(
            &data,
            &family,
            BandwidthRule::Silverman,
            &grid,
            &[(-2.0, 8.0)],
        )
        .unwrap();
        assert!((r.theta[0] - 3.0).abs() < 1e-4, "theta {}", r.theta[0]);
    }

    #[test]
    fn classical_mhde_needs_two_points() {
        let family = location_family();
        let grid = QuadratureGrid::with_density(-5.0, 5.0, 16).unwrap();
        let r = classical_mhde(
            &[1.0],
            &family,
            BandwidthRule::Silverman,
            &grid,
            &[(-2.0, 2.0)],
        );
        assert!(r.is_err());
    }

    #[test]
    fn default_tolerance_follows_the_slow_log_rate() {
        let e = default_epsilon(200).unwrap();
        assert_eq!(e, 200f64.ln() / 200f64.sqrt());
        assert!((e - 0.3746476138764567).abs() < 1e-15);
        assert!(default_epsilon(1).is_err());
        assert!(default_epsilon(0).is_err());
    }

    #[test]
    fn method_names_serialize_in_kebab_case() {
        assert_eq!(
            serde_json::to_string(&EstimatorMethod::ClassicalMhde).unwrap(),
            "\"classical-mhde\""
        );
        assert_eq!(
            serde_json::to_string(&EstimatorMethod::Theta1).unwrap(),
            "\"theta1\""
        );
        let back: EstimatorMethod = serde_json::from_str("\"theta3\"").unwrap();
        assert_eq!(back, EstimatorMethod::Theta3);
        assert_eq!(EstimatorMethod::Theta2.to_string(), "theta2");
    }
}
