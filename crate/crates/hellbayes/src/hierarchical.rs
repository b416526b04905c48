//! The distance-as-likelihood posterior over parameters.
//!
//! Given a density ensemble g_1..g_J, each draw defines a tempered target
//! `pi(theta) exp(-2 n D_H(g_j, theta))`: the prior reweighted by how close
//! the family member sits to g_j, with the squared Hellinger distance
//! standing in for a log likelihood. One random-walk Metropolis chain runs
//! per draw; pooling equal counts from every chain marginalizes over the
//! density posterior. The pooled mean (EAP) is the point estimate; pooled
//! quantiles give credible intervals.
//!
//! Chains over a location-scale family walk `(mu, variance)` directly (the
//! prior's scale component is a Gamma on the variance); draws are reported
//! in family coordinates `(mu, sigma)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution, Normal, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::ContinuousCDF;
use statrs::function::gamma::ln_gamma;

use crate::density::{ensemble_grid_densities, DensityEnsemble};
use crate::dpmix::McmcConfig;
use crate::error::{ensure_finite, Error, Result};
use crate::family::{FamilyKind, ParamVector, ParametricFamily};
use crate::grid::{GridDensity, QuadratureGrid};
use crate::hellinger::{hellinger_sq_normal_raw, LocationDistanceTable};
use crate::stats::{mean, ln_normal_pdf, quantile_sorted, sample_sd, splitmix64};

/// Random-walk proposal standard deviation, per coordinate.
pub const DEFAULT_PROPOSAL_SD: f64 = 0.5;

/// Minimum pooled draws [`eap_and_ci`] will summarize.
pub const MIN_POOL_DRAWS: usize = 100;

/// How many standard deviations of prior mass the location-profile lattice
/// covers beyond the quadrature range.
const PRIOR_SPAN_SD: f64 = 8.0;

/// Normal prior on a location coordinate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NormalPrior {
    pub mean: f64,
    pub variance: f64,
}

/// Gamma prior (shape, rate) on a variance coordinate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GammaPrior {
    pub shape: f64,
    pub rate: f64,
}

/// Prior over the chain state: a normal on the location and, when the
/// family has a free scale, a gamma on the variance.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorSpec {
    pub location: NormalPrior,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<GammaPrior>,
}

impl PriorSpec {
    pub fn location_only(mean: f64, variance: f64) -> Self {
        PriorSpec {
            location: NormalPrior { mean, variance },
            scale: None,
        }
    }

    pub fn location_scale(mean: f64, variance: f64, shape: f64, rate: f64) -> Self {
        PriorSpec {
            location: NormalPrior { mean, variance },
            scale: Some(GammaPrior { shape, rate }),
        }
    }

    /// Checks internal validity and coherence with `family`.
    pub fn validate_for(&self, family: &ParametricFamily) -> Result<()> {
        if !(self.location.mean.is_finite()
            && self.location.variance.is_finite()
            && self.location.variance > 0.0)
        {
            return Err(Error::invalid(format!(
                "location prior needs a finite mean and positive variance, got N({}, {})",
                self.location.mean, self.location.variance
            )));
        }
        match (family.dimension(), &self.scale) {
            (1, None) => {}
            (2, Some(g)) => {
                if !(g.shape.is_finite() && g.shape > 0.0 && g.rate.is_finite() && g.rate > 0.0)
                {
                    return Err(Error::invalid(format!(
                        "scale prior needs positive shape and rate, got Gamma({}, {})",
                        g.shape, g.rate
                    )));
                }
            }
            (1, Some(_)) => {
                return Err(Error::invalid(
                    "scale prior given but the family has no scale coordinate".to_string(),
                ))
            }
            _ => {
                return Err(Error::invalid(
                    "family has a scale coordinate but no scale prior was given".to_string(),
                ))
            }
        }
        Ok(())
    }

    /// Log prior density at a chain state (location, or location and
    /// variance). No bounds handling; callers gate on the family domain.
    fn log_density_state(&self, state: &[f64]) -> f64 {
        let mut lp = ln_normal_pdf(
            state[0],
            self.location.mean,
            self.location.variance.sqrt(),
        );
        if let Some(g) = &self.scale {
            let v = state[1];
            lp += g.shape * g.rate.ln() - ln_gamma(g.shape) + (g.shape - 1.0) * v.ln()
                - g.rate * v;
        }
        lp
    }

    /// Chain starting point: prior means.
    fn start_state(&self) -> Vec<f64> {
        match &self.scale {
            None => vec![self.location.mean],
            Some(g) => vec![self.location.mean, g.shape / g.rate],
        }
    }
}

/// Chain state dimension for a family (scale chains carry the variance).
fn state_dim(family: &ParametricFamily) -> usize {
    family.dimension()
}

/// True when a chain state maps to a parameter inside the family domain.
fn state_in_bounds(family: &ParametricFamily, state: &[f64]) -> bool {
    if state.len() != state_dim(family) {
        return false;
    }
    let bounds = family.bounds();
    let mu = state[0];
    if !(mu > bounds[0].0 && mu < bounds[0].1) {
        return false;
    }
    if family.dimension() == 2 {
        let v = state[1];
        if !v.is_finite() || v <= 0.0 {
            return false;
        }
        let sd = v.sqrt();
        if !(sd > bounds[1].0 && sd < bounds[1].1) {
            return false;
        }
    }
    mu.is_finite()
}

/// Chain state in family coordinates: `(mu,)` or `(mu, sigma)`.
fn state_to_theta(family: &ParametricFamily, state: &[f64]) -> ParamVector {
    match family.kind() {
        FamilyKind::NormalLocation => ParamVector::scalar(state[0]),
        FamilyKind::NormalLocationScale => ParamVector::pair(state[0], state[1].sqrt()),
    }
}

fn state_to_mu_sd(family: &ParametricFamily, state: &[f64]) -> (f64, f64) {
    match family.kind() {
        FamilyKind::NormalLocation => (
            state[0],
            family.known_sigma().expect("location family has a known sigma"),
        ),
        FamilyKind::NormalLocationScale => (state[0], state[1].sqrt()),
    }
}

/// How a chain evaluates the squared distance to a density draw.
enum DistanceEval<'a> {
    Exact(&'a GridDensity),
    /// Tabulated location profile; callers guarantee a location family.
    Table(&'a LocationDistanceTable),
}

impl DistanceEval<'_> {
    #[inline]
    fn eval(&self, family: &ParametricFamily, state: &[f64]) -> f64 {
        match self {
            DistanceEval::Exact(g) => {
                let (mu, sd) = state_to_mu_sd(family, state);
                hellinger_sq_normal_raw(g, mu, sd)
            }
            DistanceEval::Table(t) => t.eval(state[0]),
        }
    }
}

/// Log of the tempered target at a chain state: `log pi(state) - 2 n D_H`.
///
/// `theta_state` is the chain parameterization: `[mu]` for a location
/// family, `[mu, variance]` for location-scale. `n` is the distance weight;
/// it is a real (reference posteriors temper with non-integer weights) and
/// zero disables the distance term. States outside the family domain return
/// negative infinity, which Metropolis treats as certain rejection.
pub fn hellinger_log_kernel(
    theta_state: &[f64],
    g: &GridDensity,
    n: f64,
    prior: &PriorSpec,
    family: &ParametricFamily,
) -> f64 {
    log_kernel(&DistanceEval::Exact(g), theta_state, n, prior, family)
}

fn log_kernel(
    eval: &DistanceEval,
    state: &[f64],
    weight: f64,
    prior: &PriorSpec,
    family: &ParametricFamily,
) -> f64 {
    if !state_in_bounds(family, state) {
        return f64::NEG_INFINITY;
    }
    let lp = prior.log_density_state(state);
    if weight == 0.0 {
        return lp;
    }
    lp - 2.0 * weight * eval.eval(family, state)
}

/// Draws from one Metropolis chain, in family coordinates.
#[derive(Clone, Debug)]
pub struct ChainResult {
    pub draws: Vec<ParamVector>,
    pub acceptance_rate: f64,
}

/// Random-walk Metropolis targeting the tempered posterior for one density
/// draw. Independent normal increments (`proposal_sd` per coordinate),
/// out-of-domain proposals rejected, first half of the chain discarded,
/// deterministic under `seed`.
pub fn metropolis_chain(
    g: &GridDensity,
    n: f64,
    prior: &PriorSpec,
    family: &ParametricFamily,
    proposal_sd: &[f64],
    steps: usize,
    seed: u64,
) -> Result<ChainResult> {
    validate_chain_args(n, prior, family, proposal_sd, steps)?;
    let eval = DistanceEval::Exact(g);
    let run = run_metropolis(&eval, n, prior, family, proposal_sd, steps, seed, 1);
    Ok(ChainResult {
        draws: run
            .states
            .iter()
            .map(|s| state_to_theta(family, s))
            .collect(),
        acceptance_rate: run.acceptance_rate,
    })
}

fn validate_chain_args(
    n: f64,
    prior: &PriorSpec,
    family: &ParametricFamily,
    proposal_sd: &[f64],
    steps: usize,
) -> Result<()> {
    if steps < 100 {
        return Err(Error::invalid(format!(
            "a Metropolis chain needs at least 100 steps, got {steps}"
        )));
    }
    if !(n.is_finite() && n >= 0.0) {
        return Err(Error::invalid(format!(
            "distance weight must be a nonnegative real, got {n}"
        )));
    }
    prior.validate_for(family)?;
    if proposal_sd.len() != state_dim(family) {
        return Err(Error::invalid(format!(
            "{} proposal scales for a {}-coordinate chain",
            proposal_sd.len(),
            state_dim(family)
        )));
    }
    if let Some(&sd) = proposal_sd.iter().find(|&&sd| !(sd.is_finite() && sd > 0.0)) {
        return Err(Error::invalid(format!(
            "proposal sd must be positive, got {sd}"
        )));
    }
    if !state_in_bounds(family, &prior.start_state()) {
        return Err(Error::invalid(
            "prior mean lies outside the family domain; chains cannot start there".to_string(),
        ));
    }
    Ok(())
}

struct ChainOutput {
    /// Retained states (second half, thinned), chain parameterization.
    states: Vec<Vec<f64>>,
    acceptance_rate: f64,
}

#[allow(clippy::too_many_arguments)]
fn run_metropolis(
    eval: &DistanceEval,
    weight: f64,
    prior: &PriorSpec,
    family: &ParametricFamily,
    proposal_sd: &[f64],
    steps: usize,
    seed: u64,
    thin: usize,
) -> ChainOutput {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut state = prior.start_state();
    let mut lk = log_kernel(eval, &state, weight, prior, family);
    debug_assert!(lk.is_finite(), "chain must start inside the domain");

    let burn = steps / 2;
    let retained = steps - burn;
    let mut states = Vec::with_capacity((retained + thin - 1) / thin);
    let mut accepted = 0usize;
    let mut proposal = state.clone();
    for step in 0..steps {
        for (p, (&s, &sd)) in proposal
            .iter_mut()
            .zip(state.iter().zip(proposal_sd))
        {
            let z: f64 = rng.sample(StandardNormal);
            *p = s + sd * z;
        }
        let lk_new = log_kernel(eval, &proposal, weight, prior, family);
        let u: f64 = rng.random();
        if u.ln() < lk_new - lk {
            state.copy_from_slice(&proposal);
            lk = lk_new;
            accepted += 1;
        }
        if step >= burn && (step - burn) % thin == 0 {
            states.push(state.clone());
        }
    }
    ChainOutput {
        states,
        acceptance_rate: accepted as f64 / steps as f64,
    }
}

/// Pooled posterior draws over theta, merged from one chain per ensemble
/// density (equal counts per chain).
#[derive(Clone, Debug)]
pub struct ThetaSamplePool {
    /// Column-major draws: `coords[c][r]` is coordinate c of pooled draw r,
    /// in family coordinates.
    coords: Vec<Vec<f64>>,
    per_g_counts: Vec<usize>,
    acceptance_rates: Vec<f64>,
    seed: u64,
}

impl ThetaSamplePool {
    fn from_chains(
        family: &ParametricFamily,
        chains: Vec<ChainOutput>,
        seed: u64,
    ) -> ThetaSamplePool {
        let dim = family.dimension();
        let total: usize = chains.iter().map(|c| c.states.len()).sum();
        let mut coords = vec![Vec::with_capacity(total); dim];
        let mut per_g_counts = Vec::with_capacity(chains.len());
        let mut acceptance_rates = Vec::with_capacity(chains.len());
        for chain in &chains {
            per_g_counts.push(chain.states.len());
            acceptance_rates.push(chain.acceptance_rate);
            for s in &chain.states {
                let theta = state_to_theta(family, s);
                for (c, coord) in coords.iter_mut().enumerate() {
                    coord.push(theta[c]);
                }
            }
        }
        ThetaSamplePool {
            coords,
            per_g_counts,
            acceptance_rates,
            seed,
        }
    }

    /// Number of pooled draws.
    pub fn len(&self) -> usize {
        self.coords.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Parameter dimension.
    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    /// All pooled values of coordinate `c`.
    pub fn coordinate(&self, c: usize) -> &[f64] {
        &self.coords[c]
    }

    /// Draw `r` in family coordinates.
    pub fn draw(&self, r: usize) -> ParamVector {
        ParamVector::new(self.coords.iter().map(|col| col[r]).collect())
    }

    /// Draws contributed by each chain; all entries are equal.
    pub fn per_g_counts(&self) -> &[usize] {
        &self.per_g_counts
    }

    /// Acceptance rate of each chain, in [0, 1].
    pub fn acceptance_rates(&self) -> &[f64] {
        &self.acceptance_rates
    }

    pub fn mean_acceptance(&self) -> f64 {
        mean(&self.acceptance_rates)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }
}

/// Runs one Metropolis chain per ensemble draw and pools the retained
/// states: chain j targets the posterior tempered by g_j and is seeded
/// `mcmc.seed XOR j`, so the pool is deterministic and chains can run in
/// parallel.
///
/// `mcmc.iterations` is the per-chain step count and `mcmc.thin` the
/// post-discard thinning; the `burn_in` field is not used here (chains
/// always discard their first half, the mixture sampler owns `burn_in`).
///
/// For location families the squared distance is evaluated through a
/// precomputed per-draw profile (cubic interpolation on a lattice aligned
/// with the grid, exact fallback off-lattice); location-scale families
/// evaluate exactly per proposal. [`metropolis_chain`] is the always-exact
/// single-chain form.
pub fn hierarchical_posterior(
    ensemble: &DensityEnsemble,
    n: f64,
    prior: &PriorSpec,
    family: &ParametricFamily,
    mcmc: &McmcConfig,
    grid: &QuadratureGrid,
) -> Result<ThetaSamplePool> {
    let proposal_sd = vec![DEFAULT_PROPOSAL_SD; state_dim(family)];
    validate_chain_args(n, prior, family, &proposal_sd, mcmc.iterations)?;
    if mcmc.thin == 0 {
        return Err(Error::invalid("thin must be at least 1".to_string()));
    }
    let gds = ensemble_grid_densities(ensemble, grid)?;
    let tables = location_tables(family, prior, &gds, grid);
    let runs = [(n, mcmc.seed)];
    Ok(pooled_runs(
        &gds,
        tables.as_deref(),
        &runs,
        prior,
        family,
        &proposal_sd,
        mcmc.iterations,
        mcmc.thin,
        mcmc.seed,
    ))
}

/// Location-profile tables covering the quadrature range plus the bulk of
/// the prior; `None` for families the table cannot represent.
fn location_tables(
    family: &ParametricFamily,
    prior: &PriorSpec,
    gds: &[GridDensity],
    grid: &QuadratureGrid,
) -> Option<Vec<LocationDistanceTable>> {
    let sigma = family.known_sigma()?;
    let prior_sd = prior.location.variance.sqrt();
    let lo = grid.range().0.min(prior.location.mean - PRIOR_SPAN_SD * prior_sd);
    let hi = grid.range().1.max(prior.location.mean + PRIOR_SPAN_SD * prior_sd);
    Some(
        gds.par_iter()
            .map(|g| LocationDistanceTable::new(g, sigma, lo, hi))
            .collect(),
    )
}

/// Runs `runs.len() x gds.len()` chains (chain for run m, draw j seeded
/// `run_seed_m XOR j`) and pools everything in run-major, draw-minor order.
#[allow(clippy::too_many_arguments)]
fn pooled_runs(
    gds: &[GridDensity],
    tables: Option<&[LocationDistanceTable]>,
    runs: &[(f64, u64)],
    prior: &PriorSpec,
    family: &ParametricFamily,
    proposal_sd: &[f64],
    steps: usize,
    thin: usize,
    pool_seed: u64,
) -> ThetaSamplePool {
    let jobs: Vec<(usize, usize)> = runs
        .iter()
        .enumerate()
        .flat_map(|(m, _)| (0..gds.len()).map(move |j| (m, j)))
        .collect();
    let chains: Vec<ChainOutput> = jobs
        .par_iter()
        .map(|&(m, j)| {
            let (weight, run_seed) = runs[m];
            let eval = match tables {
                Some(t) => DistanceEval::Table(&t[j]),
                None => DistanceEval::Exact(&gds[j]),
            };
            run_metropolis(
                &eval,
                weight,
                prior,
                family,
                proposal_sd,
                steps,
                run_seed ^ j as u64,
                thin,
            )
        })
        .collect();
    ThetaSamplePool::from_chains(family, chains, pool_seed)
}

/// Posterior point and interval summary of a sample pool.
#[derive(Clone, Debug, PartialEq)]
pub struct PosteriorSummary {
    /// Pooled mean per coordinate (the EAP estimate).
    pub eap: ParamVector,
    /// 2.5% empirical quantile per coordinate.
    pub ci_low: Vec<f64>,
    /// 97.5% empirical quantile per coordinate.
    pub ci_high: Vec<f64>,
    /// Pooled sample standard deviation per coordinate.
    pub sd: Vec<f64>,
    /// True when some coordinate's mean escaped its interval (extreme
    /// asymmetry); reported rather than treated as an error.
    pub eap_outside_ci: bool,
}

/// Pooled mean, 95% equal-tail interval (linear-interpolation quantiles),
/// and sample sd per coordinate. Requires at least [`MIN_POOL_DRAWS`]
/// draws.
pub fn eap_and_ci(pool: &ThetaSamplePool) -> Result<PosteriorSummary> {
    if pool.len() < MIN_POOL_DRAWS {
        return Err(Error::PoolTooSmall {
            len: pool.len(),
            min: MIN_POOL_DRAWS,
        });
    }
    Ok(summarize_columns(&pool.coords))
}

/// The summary arithmetic without the pool-size gate; unit tests pin the
/// interpolation behavior on tiny hand-checkable pools.
pub(crate) fn summarize_columns(coords: &[Vec<f64>]) -> PosteriorSummary {
    let mut eap = Vec::with_capacity(coords.len());
    let mut ci_low = Vec::with_capacity(coords.len());
    let mut ci_high = Vec::with_capacity(coords.len());
    let mut sd = Vec::with_capacity(coords.len());
    let mut flagged = false;
    for col in coords {
        let m = mean(col);
        let mut sorted = col.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let lo = quantile_sorted(&sorted, 0.025);
        let hi = quantile_sorted(&sorted, 0.975);
        if !(lo <= m && m <= hi) {
            flagged = true;
        }
        eap.push(m);
        ci_low.push(lo);
        ci_high.push(hi);
        sd.push(sample_sd(col));
    }
    PosteriorSummary {
        eap: ParamVector::new(eap),
        ci_low,
        ci_high,
        sd,
        eap_outside_ci: flagged,
    }
}

/// Closed-form posterior for normal-location data with known sigma and a
/// normal prior: the exact baseline the distance posterior is judged
/// against on clean data.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConjugateNormalPosterior {
    pub mean: f64,
    pub sd: f64,
}

impl ConjugateNormalPosterior {
    /// Central 95% interval.
    pub fn ci95(&self) -> (f64, f64) {
        let z = statrs::distribution::Normal::new(0.0, 1.0)
            .expect("standard normal")
            .inverse_cdf(0.975);
        (self.mean - z * self.sd, self.mean + z * self.sd)
    }

    /// Independent draws; deterministic under `seed`.
    pub fn sample(&self, count: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dist = Normal::new(self.mean, self.sd).expect("valid posterior scale");
        (0..count).map(|_| dist.sample(&mut rng)).collect()
    }
}

/// Conjugate update: prior N(prior_mean, prior_var), likelihood
/// N(theta, known_sigma^2) per observation.
pub fn conjugate_normal_posterior(
    data: &[f64],
    prior_mean: f64,
    prior_var: f64,
    known_sigma: f64,
) -> Result<ConjugateNormalPosterior> {
    if data.is_empty() {
        return Err(Error::EmptyData("conjugate posterior needs observations"));
    }
    ensure_finite(data, "data")?;
    if !(prior_var.is_finite() && prior_var > 0.0) {
        return Err(Error::invalid(format!(
            "prior variance must be positive, got {prior_var}"
        )));
    }
    if !(known_sigma.is_finite() && known_sigma > 0.0) {
        return Err(Error::invalid(format!(
            "known sigma must be positive, got {known_sigma}"
        )));
    }
    let n = data.len() as f64;
    let obs_var = known_sigma * known_sigma;
    let post_var = 1.0 / (1.0 / prior_var + n / obs_var);
    let post_mean = post_var * (prior_mean / prior_var + data.iter().sum::<f64>() / obs_var);
    Ok(ConjugateNormalPosterior {
        mean: post_mean,
        sd: post_var.sqrt(),
    })
}

/// Reference posterior for data containing gross outliers, plus the
/// tempering fractions it integrated over.
#[derive(Clone, Debug)]
pub struct CleanSubsetReference {
    pub pool: ThetaSamplePool,
    /// The sampled Beta(n1+1, n_total-n1) fractions b_m.
    pub beta_samples: Vec<f64>,
}

/// Stream label for the Beta draws, kept distinct from chain seeds.
const BETA_STREAM_SALT: u64 = 0x4245_5441;

/// The limiting posterior when `n_total - n_clean` observations drift to
/// infinity: the clean-data distance posterior with the weight tempered to
/// `sqrt(b) n_total`, averaged over `b ~ Beta(n_clean+1, n_total-n_clean)`.
///
/// `clean_ensemble` is the density posterior fit to the clean subset
/// (callers own its sampler settings); `n_clean` its data size. One
/// hierarchical run executes per Beta draw; all pools merge.
#[allow(clippy::too_many_arguments)]
pub fn clean_subset_reference_posterior(
    clean_ensemble: &DensityEnsemble,
    n_clean: usize,
    n_total: usize,
    prior: &PriorSpec,
    family: &ParametricFamily,
    mcmc: &McmcConfig,
    grid: &QuadratureGrid,
    beta_draws: usize,
) -> Result<CleanSubsetReference> {
    if n_clean == 0 {
        return Err(Error::EmptyData("reference posterior needs clean data"));
    }
    if n_clean >= n_total {
        return Err(Error::invalid(format!(
            "clean subset ({n_clean}) must be smaller than the full sample ({n_total})"
        )));
    }
    if beta_draws == 0 {
        return Err(Error::invalid("need at least one Beta draw".to_string()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(mcmc.seed ^ BETA_STREAM_SALT));
    let beta = Beta::new(n_clean as f64 + 1.0, (n_total - n_clean) as f64)
        .expect("valid Beta parameters");
    let beta_samples: Vec<f64> = (0..beta_draws).map(|_| beta.sample(&mut rng)).collect();
    let pool = reference_with_b(
        clean_ensemble,
        &beta_samples,
        n_total,
        prior,
        family,
        mcmc,
        grid,
    )?;
    Ok(CleanSubsetReference {
        pool,
        beta_samples,
    })
}

/// Reference pooling with the tempering fractions supplied directly.
pub(crate) fn reference_with_b(
    clean_ensemble: &DensityEnsemble,
    beta_samples: &[f64],
    n_total: usize,
    prior: &PriorSpec,
    family: &ParametricFamily,
    mcmc: &McmcConfig,
    grid: &QuadratureGrid,
) -> Result<ThetaSamplePool> {
    let proposal_sd = vec![DEFAULT_PROPOSAL_SD; state_dim(family)];
    validate_chain_args(0.0, prior, family, &proposal_sd, mcmc.iterations)?;
    let gds = ensemble_grid_densities(clean_ensemble, grid)?;
    let tables = location_tables(family, prior, &gds, grid);
    let runs: Vec<(f64, u64)> = beta_samples
        .iter()
        .enumerate()
        .map(|(m, &b)| {
            (
                b.max(0.0).sqrt() * n_total as f64,
                splitmix64(mcmc.seed ^ (m as u64 + 1)),
            )
        })
        .collect();
    Ok(pooled_runs(
        &gds,
        tables.as_deref(),
        &runs,
        prior,
        family,
        &proposal_sd,
        mcmc.iterations,
        mcmc.thin,
        mcmc.seed,
    ))
}
