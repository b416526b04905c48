//! Blocked Gibbs sampler for a truncated Dirichlet-process mixture of
//! normals: the nonparametric posterior the rest of the crate measures
//! distances against.
//!
//! Model, for observations x_1..x_n:
//!
//! ```text
//! x_i | z_i            ~ N(mu_{z_i}, var_{z_i})
//! P(z_i = k)           = w_k,   w from stick breaking with mass M, K atoms
//! (mu_k, var_k)        ~ N(location_mean, var_k / kappa0) x InvGamma(df/2, scale/2)
//! kappa0               ~ Gamma(kappa_shape, rate = kappa_rate)
//! ```
//!
//! One sweep resamples, in order: assignments, all K atoms (empty atoms are
//! refreshed from the base measure), sticks, then kappa0. Because every
//! atom is a base-measure draw given kappa0, the kappa0 full conditional
//! stays a Gamma; no Metropolis step is needed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution, Gamma, Normal};
use serde::{Deserialize, Serialize};

use crate::density::{DensityEnsemble, EnsembleMeta, GaussianMixtureDensity};
use crate::error::{ensure_finite, Error, Result};
use crate::stats::ln_normal_pdf;

/// Smallest atom variance the sampler will keep; draws below it are clamped
/// (with a warning) to stop a cluster from collapsing onto a point.
pub const VARIANCE_FLOOR: f64 = 1e-10;
/// Defensive ceiling; an atom this diffuse carries no usable information
/// and an infinite draw would poison downstream mixtures.
const VARIANCE_CEILING: f64 = 1e12;

/// Prior settings for the truncated mixture.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DpPriorConfig {
    /// Dirichlet-process mass (concentration) parameter.
    pub mass: f64,
    /// Base-measure mean for atom locations.
    pub location_mean: f64,
    /// Shape of the Gamma hyperprior on kappa0 (the location-precision
    /// scale).
    pub kappa_shape: f64,
    /// Rate of the Gamma hyperprior on kappa0.
    pub kappa_rate: f64,
    /// Degrees of freedom nu of the atom-variance prior
    /// InvGamma(nu/2, scale/2).
    pub variance_df: f64,
    /// Scale parameter psi of the atom-variance prior.
    pub variance_scale: f64,
    /// Number of atoms K in the truncated stick-breaking representation.
    /// K = 1 is the degenerate single-atom case (one normal with a
    /// normal-inverse-gamma prior), useful as a conjugate cross-check.
    pub truncation: usize,
}

impl Default for DpPriorConfig {
    fn default() -> Self {
        DpPriorConfig {
            mass: 1.0,
            location_mean: 0.0,
            kappa_shape: 0.5,
            kappa_rate: 50.0,
            variance_df: 4.0,
            variance_scale: 2.0,
            truncation: 30,
        }
    }
}

impl DpPriorConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("mass", self.mass),
            ("kappa_shape", self.kappa_shape),
            ("kappa_rate", self.kappa_rate),
            ("variance_df", self.variance_df),
            ("variance_scale", self.variance_scale),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(format!(
                    "{name} must be a positive real, got {v}"
                )));
            }
        }
        if !self.location_mean.is_finite() {
            return Err(Error::invalid(format!(
                "location_mean must be finite, got {}",
                self.location_mean
            )));
        }
        if self.truncation == 0 {
            return Err(Error::invalid(
                "truncation must be at least 1 atom".to_string(),
            ));
        }
        Ok(())
    }
}

/// Chain-length settings shared by the samplers in this crate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct McmcConfig {
    pub iterations: usize,
    pub burn_in: usize,
    /// Keep every thin-th draw after burn-in.
    pub thin: usize,
    pub seed: u64,
}

impl Default for McmcConfig {
    fn default() -> Self {
        McmcConfig {
            iterations: 1500,
            burn_in: 500,
            thin: 10,
            seed: 0,
        }
    }
}

impl McmcConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::invalid("iterations must be positive".to_string()));
        }
        if self.burn_in >= self.iterations {
            return Err(Error::invalid(format!(
                "burn_in ({}) must be smaller than iterations ({})",
                self.burn_in, self.iterations
            )));
        }
        if self.thin == 0 {
            return Err(Error::invalid("thin must be at least 1".to_string()));
        }
        Ok(())
    }

    /// Number of draws a run with these settings retains.
    pub fn retained(&self) -> usize {
        (self.iterations - self.burn_in + self.thin - 1) / self.thin
    }
}

/// Turns stick fractions v_1..v_{K-1} into K mixture weights:
/// `w_k = v_k prod_{j<k} (1 - v_j)`, last weight the leftover stick.
///
/// Sticks must lie in the closed interval [0, 1]; sampled Beta fractions
/// can round to either endpoint.
pub fn stick_breaking_weights(sticks: &[f64]) -> Result<Vec<f64>> {
    for (i, &v) in sticks.iter().enumerate() {
        if !(v.is_finite() && (0.0..=1.0).contains(&v)) {
            return Err(Error::invalid(format!(
                "stick fraction {i} = {v} outside [0, 1]"
            )));
        }
    }
    let mut weights = Vec::with_capacity(sticks.len() + 1);
    let mut remaining = 1.0;
    for &v in sticks {
        weights.push(v * remaining);
        remaining *= 1.0 - v;
    }
    weights.push(remaining);
    Ok(weights)
}

/// Full sampler state after a sweep.
#[derive(Clone, Debug)]
pub struct GibbsState {
    /// Cluster index of each observation.
    pub assignments: Vec<usize>,
    pub atom_means: Vec<f64>,
    pub atom_variances: Vec<f64>,
    /// Stick fractions; length `truncation - 1`.
    pub sticks: Vec<f64>,
    /// Mixture weights from the sticks; length `truncation`.
    pub weights: Vec<f64>,
    pub kappa0: f64,
}

impl GibbsState {
    /// Number of distinct clusters with at least one observation.
    pub fn occupied_clusters(&self) -> usize {
        let mut seen = vec![false; self.atom_means.len()];
        for &z in &self.assignments {
            seen[z] = true;
        }
        seen.iter().filter(|&&s| s).count()
    }
}

/// The blocked Gibbs sampler. Construct, then call [`step`](Self::step);
/// [`run_blocked_gibbs`] wraps the usual run-and-collect loop.
pub struct BlockedGibbs {
    data: Vec<f64>,
    prior: DpPriorConfig,
    state: GibbsState,
    rng: ChaCha8Rng,
    floor_hits: u64,
    /// Cluster sizes from the latest assignment pass; feeds the stick update.
    counts_cache: Vec<usize>,
}

impl BlockedGibbs {
    pub fn new(data: &[f64], prior: &DpPriorConfig, seed: u64) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::EmptyData("mixture sampler needs observations"));
        }
        ensure_finite(data, "data")?;
        prior.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k = prior.truncation;

        // Initial state: hyperparameter at its prior mean, atoms fresh from
        // the base measure, everything in cluster 0. The first sweep
        // reassigns before any atom statistics are used.
        let kappa0 = prior.kappa_shape / prior.kappa_rate;
        let mut atom_means = Vec::with_capacity(k);
        let mut atom_variances = Vec::with_capacity(k);
        for _ in 0..k {
            let (m, v) = draw_base_atom(&mut rng, prior, kappa0);
            atom_means.push(m);
            atom_variances.push(v);
        }
        let sticks: Vec<f64> = (0..k.saturating_sub(1))
            .map(|_| {
                Beta::new(1.0, prior.mass)
                    .expect("valid Beta parameters")
                    .sample(&mut rng)
            })
            .collect();
        let weights = stick_breaking_weights(&sticks)?;
        let mut counts = vec![0usize; k];
        counts[0] = data.len();
        Ok(BlockedGibbs {
            data: data.to_vec(),
            prior: *prior,
            state: GibbsState {
                assignments: vec![0; data.len()],
                atom_means,
                atom_variances,
                sticks,
                weights,
                kappa0,
            },
            rng,
            floor_hits: 0,
            counts_cache: counts,
        })
    }

    pub fn state(&self) -> &GibbsState {
        &self.state
    }

    /// How many atom-variance draws were clamped to [`VARIANCE_FLOOR`].
    pub fn floor_hits(&self) -> u64 {
        self.floor_hits
    }

    /// The mixture density defined by the current state.
    pub fn current_mixture(&self) -> GaussianMixtureDensity {
        GaussianMixtureDensity::new(
            self.state.weights.clone(),
            self.state.atom_means.clone(),
            self.state.atom_variances.clone(),
        )
        .expect("sampler state is a valid mixture")
    }

    /// One full sweep: assignments, atoms, sticks, kappa0.
    pub fn step(&mut self) {
        self.update_assignments();
        self.update_atoms();
        self.update_sticks();
        self.update_kappa0();
    }

    fn update_assignments(&mut self) {
        let k = self.prior.truncation;
        let mut log_w: Vec<f64> = self.state.weights.iter().map(|&w| w.ln()).collect();
        let sds: Vec<f64> = self.state.atom_variances.iter().map(|&v| v.sqrt()).collect();
        // ln(0) = -inf drops zero-weight atoms from the draw.
        for lw in &mut log_w {
            if lw.is_nan() {
                *lw = f64::NEG_INFINITY;
            }
        }
        let mut logp = vec![0.0; k];
        for i in 0..self.data.len() {
            let x = self.data[i];
            let mut max = f64::NEG_INFINITY;
            for j in 0..k {
                let lp = log_w[j] + ln_normal_pdf(x, self.state.atom_means[j], sds[j]);
                logp[j] = lp;
                if lp > max {
                    max = lp;
                }
            }
            let mut total = 0.0;
            for lp in &mut logp {
                *lp = (*lp - max).exp();
                total += *lp;
            }
            let u: f64 = self.rng.random::<f64>() * total;
            let mut cum = 0.0;
            let mut pick = k - 1;
            for (j, &p) in logp.iter().enumerate() {
                cum += p;
                if u < cum {
                    pick = j;
                    break;
                }
            }
            self.state.assignments[i] = pick;
        }
    }

    fn update_atoms(&mut self) {
        let k = self.prior.truncation;
        let mut counts = vec![0usize; k];
        let mut sums = vec![0.0; k];
        for (&x, &z) in self.data.iter().zip(&self.state.assignments) {
            counts[z] += 1;
            sums[z] += x;
        }
        let mut ssd = vec![0.0; k];
        for (&x, &z) in self.data.iter().zip(&self.state.assignments) {
            let d = x - sums[z] / counts[z] as f64;
            ssd[z] += d * d;
        }

        let prior = self.prior;
        let kappa0 = self.state.kappa0;
        for j in 0..k {
            let (mean, var) = if counts[j] == 0 {
                draw_base_atom(&mut self.rng, &prior, kappa0)
            } else {
                let nk = counts[j] as f64;
                let xbar = sums[j] / nk;
                let kappa_n = kappa0 + nk;
                let m_n = (kappa0 * prior.location_mean + nk * xbar) / kappa_n;
                let a_n = 0.5 * prior.variance_df + 0.5 * nk;
                let b_n = 0.5 * prior.variance_scale
                    + 0.5 * ssd[j]
                    + kappa0 * nk * (xbar - prior.location_mean).powi(2) / (2.0 * kappa_n);
                let var = draw_inverse_gamma(&mut self.rng, a_n, b_n);
                let mean = draw_normal(&mut self.rng, m_n, (var / kappa_n).sqrt());
                (mean, var)
            };
            let clamped = var.clamp(VARIANCE_FLOOR, VARIANCE_CEILING);
            if clamped != var && var < VARIANCE_FLOOR {
                self.floor_hits += 1;
                log::warn!("atom variance draw {var} clamped to the floor {VARIANCE_FLOOR}");
            }
            self.state.atom_means[j] = mean;
            self.state.atom_variances[j] = clamped;
        }
        self.counts_cache = counts;
    }

    fn update_sticks(&mut self) {
        let k = self.prior.truncation;
        let counts = &self.counts_cache;
        let mut tail: Vec<f64> = vec![0.0; k + 1];
        for j in (0..k).rev() {
            tail[j] = tail[j + 1] + counts[j] as f64;
        }
        for j in 0..k - 1 {
            let a = 1.0 + counts[j] as f64;
            let b = self.prior.mass + tail[j + 1];
            self.state.sticks[j] = Beta::new(a, b)
                .expect("valid Beta parameters")
                .sample(&mut self.rng);
        }
        self.state.weights =
            stick_breaking_weights(&self.state.sticks).expect("sticks lie in [0, 1]");
    }

    fn update_kappa0(&mut self) {
        // All K atoms are base-measure draws given kappa0, so the full
        // conditional is Gamma(shape + K/2, rate + sum_k (mu_k - m1)^2 / (2 var_k)).
        let prior = self.prior;
        let k = prior.truncation as f64;
        let shape = prior.kappa_shape + 0.5 * k;
        let mut rate = prior.kappa_rate;
        for (&m, &v) in self
            .state
            .atom_means
            .iter()
            .zip(&self.state.atom_variances)
        {
            rate += (m - prior.location_mean).powi(2) / (2.0 * v);
        }
        let draw = Gamma::new(shape, 1.0 / rate)
            .expect("valid Gamma parameters")
            .sample(&mut self.rng);
        self.state.kappa0 = draw.max(1e-100);
    }
}

fn draw_base_atom(rng: &mut ChaCha8Rng, prior: &DpPriorConfig, kappa0: f64) -> (f64, f64) {
    let var = draw_inverse_gamma(rng, 0.5 * prior.variance_df, 0.5 * prior.variance_scale);
    let var = var.clamp(VARIANCE_FLOOR, VARIANCE_CEILING);
    let mean = draw_normal(rng, prior.location_mean, (var / kappa0).sqrt());
    (mean, var)
}

fn draw_inverse_gamma(rng: &mut ChaCha8Rng, shape: f64, rate_b: f64) -> f64 {
    // X ~ InvGamma(a, b) iff 1/X ~ Gamma(a, rate = b).
    let g = Gamma::new(shape, 1.0 / rate_b)
        .expect("valid Gamma parameters")
        .sample(rng);
    if g <= 0.0 {
        return VARIANCE_CEILING;
    }
    1.0 / g
}

fn draw_normal(rng: &mut ChaCha8Rng, mean: f64, sd: f64) -> f64 {
    Normal::new(mean, sd)
        .expect("valid Normal parameters")
        .sample(rng)
}

/// Runs the sampler and collects the retained draws as a
/// [`DensityEnsemble`]: `iterations` sweeps, discard the first `burn_in`,
/// keep every `thin`-th of the rest.
pub fn run_blocked_gibbs(
    data: &[f64],
    prior: &DpPriorConfig,
    mcmc: &McmcConfig,
) -> Result<DensityEnsemble> {
    mcmc.validate()?;
    let mut sampler = BlockedGibbs::new(data, prior, mcmc.seed)?;
    let mut draws = Vec::with_capacity(mcmc.retained());
    let mut source_iterations = Vec::with_capacity(mcmc.retained());
    for t in 0..mcmc.iterations {
        sampler.step();
        if t >= mcmc.burn_in && (t - mcmc.burn_in) % mcmc.thin == 0 {
            draws.push(sampler.current_mixture());
            source_iterations.push(t);
        }
    }
    DensityEnsemble::new(
        draws,
        EnsembleMeta {
            seed: mcmc.seed,
            burn_in: mcmc.burn_in,
            thin: mcmc.thin,
            source_iterations,
        },
    )
}

/// One draw from the prior over mixtures (no data): sticks from
/// Beta(1, mass), atoms from the base measure, kappa0 from its hyperprior.
pub fn prior_predictive_draw(prior: &DpPriorConfig, seed: u64) -> Result<GaussianMixtureDensity> {
    prior.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let kappa0 = Gamma::new(prior.kappa_shape, 1.0 / prior.kappa_rate)
        .expect("valid Gamma parameters")
        .sample(&mut rng)
        .max(1e-100);
    let k = prior.truncation;
    let mut means = Vec::with_capacity(k);
    let mut vars = Vec::with_capacity(k);
    for _ in 0..k {
        let (m, v) = draw_base_atom(&mut rng, prior, kappa0);
        means.push(m);
        vars.push(v);
    }
    let sticks: Vec<f64> = (0..k.saturating_sub(1))
        .map(|_| {
            Beta::new(1.0, prior.mass)
                .expect("valid Beta parameters")
                .sample(&mut rng)
        })
        .collect();
    GaussianMixtureDensity::new(stick_breaking_weights(&sticks)?, means, vars)
}
