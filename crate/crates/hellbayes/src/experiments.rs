//! Monte-Carlo study of the estimators under contamination, and the paired
//! count-data pipeline.
//!
//! A run draws replicated datasets from a normal population, optionally
//! shifts the last few observations to fabricate gross outliers, applies
//! each requested method to every dataset, and reduces the records to the
//! usual report: bias, spread, coverage, and interval length per
//! (method, contamination) cell.
//!
//! Everything is replayable: replication r derives every stream it needs
//! (data, mixture sampler, parameter chains) from
//! `master_seed XOR splitmix64(r)` plus fixed purpose salts, so any record
//! can be regenerated in isolation and execution order never matters.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::density::{grid_for_ensemble, BandwidthRule};
use crate::dpmix::{run_blocked_gibbs, DpPriorConfig, McmcConfig};
use crate::error::{Error, Result};
use crate::estimators::{
    classical_mhde, default_epsilon, theta_hat_1, theta_hat_2, theta_hat_3,
};
use crate::family::ParametricFamily;
use crate::grid::build_grid;
use crate::hierarchical::{
    conjugate_normal_posterior, eap_and_ci, hierarchical_posterior, NormalPrior, PriorSpec,
};
use crate::serialize::float17;
use crate::stats::{mean, sample_sd, splitmix64};

/// Stream labels, kept apart so one replication's data, mixture fit, and
/// parameter chains never share a seed.
const DATA_SALT: u64 = 0x4441_5441;
const GIBBS_SALT: u64 = 0x4749_4253;
const CHAIN_SALT: u64 = 0x4348_414E;

/// Which estimate a simulation cell reports.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SimMethod {
    /// Closed-form normal posterior mean with analytic intervals.
    Conjugate,
    /// Pooled distance-tempered posterior (EAP with empirical intervals).
    Hierarchical,
    Theta1,
    Theta2,
    Theta3,
    ClassicalMhde,
}

impl SimMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            SimMethod::Conjugate => "conjugate",
            SimMethod::Hierarchical => "hierarchical",
            SimMethod::Theta1 => "theta1",
            SimMethod::Theta2 => "theta2",
            SimMethod::Theta3 => "theta3",
            SimMethod::ClassicalMhde => "classical-mhde",
        }
    }

    fn needs_ensemble(&self) -> bool {
        matches!(
            self,
            SimMethod::Hierarchical | SimMethod::Theta1 | SimMethod::Theta2 | SimMethod::Theta3
        )
    }
}

impl std::fmt::Display for SimMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Which way the outlier group moves.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Direction {
    /// The default: shifts pull against the prior's side of the truth, the
    /// harder case for coverage.
    #[default]
    Down,
    Up,
}

/// Moves the last `k` observations by `shift` in `direction`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContaminationSpec {
    pub k: usize,
    pub shift: f64,
    #[serde(default)]
    pub direction: Direction,
}

impl ContaminationSpec {
    fn validate(&self, n: usize) -> Result<()> {
        if self.k == 0 {
            return Err(Error::invalid(
                "contamination must move at least one observation".to_string(),
            ));
        }
        if self.k >= n {
            return Err(Error::invalid(format!(
                "contamination size {} must be below the sample size {n}",
                self.k
            )));
        }
        if !(self.shift.is_finite() && self.shift >= 0.0) {
            return Err(Error::invalid(format!(
                "contamination shift must be a nonnegative real, got {}",
                self.shift
            )));
        }
        Ok(())
    }
}

/// Mixture-sampler sweep counts for each replication.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GibbsSizes {
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
}

impl Default for GibbsSizes {
    fn default() -> Self {
        GibbsSizes {
            iterations: 1500,
            burn_in: 500,
            thin: 10,
        }
    }
}

/// Parameter-chain sizes for each replication (the first half of every
/// chain is always discarded).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChainSizes {
    pub steps: usize,
    pub thin: usize,
}

impl Default for ChainSizes {
    fn default() -> Self {
        ChainSizes {
            steps: 20_000,
            thin: 10,
        }
    }
}

/// Full description of a simulation run, deserializable from JSON with
/// every field optional.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationConfig {
    /// Observations per dataset.
    pub n: usize,
    /// Generating location.
    pub theta0: f64,
    /// Generating scale.
    pub sigma0: f64,
    pub replications: usize,
    pub methods: Vec<SimMethod>,
    /// Outlier cells to run; each reuses the clean base datasets.
    pub contaminations: Vec<ContaminationSpec>,
    /// Also run the uncontaminated cell (reported as k = 0, shift = 0).
    pub include_clean: bool,
    pub master_seed: u64,
    /// Location prior shared by the conjugate and distance posteriors.
    pub prior: NormalPrior,
    pub ensemble: DpPriorConfig,
    pub gibbs: GibbsSizes,
    pub chain: ChainSizes,
    pub grid_nodes_per_unit: u32,
    pub grid_margin: f64,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        SimulationConfig {
            n: 20,
            theta0: 5.0,
            sigma0: 1.0,
            replications: 200,
            methods: vec![SimMethod::Conjugate, SimMethod::Hierarchical],
            contaminations: Vec::new(),
            include_clean: true,
            master_seed: 0,
            prior: NormalPrior {
                mean: 0.0,
                variance: 25.0,
            },
            ensemble: DpPriorConfig::default(),
            gibbs: GibbsSizes::default(),
            chain: ChainSizes::default(),
            grid_nodes_per_unit: 32,
            grid_margin: 4.0,
        }
    }
}

impl SimulationConfig {
    /// The published-scale setting: five times the replications and ten
    /// times the chain lengths of the desk-scale default.
    pub fn paper_scale(mut self) -> Self {
        self.replications = 1000;
        self.gibbs = GibbsSizes {
            iterations: 10_500,
            burn_in: 500,
            thin: 100,
        };
        self.chain = ChainSizes {
            steps: 200_000,
            thin: 100,
        };
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::invalid(format!(
                "need at least two observations per dataset, got {}",
                self.n
            )));
        }
        if self.replications == 0 {
            return Err(Error::invalid("need at least one replication".to_string()));
        }
        if !(self.sigma0.is_finite() && self.sigma0 > 0.0) {
            return Err(Error::invalid(format!(
                "generating scale must be positive, got {}",
                self.sigma0
            )));
        }
        if !self.theta0.is_finite() {
            return Err(Error::invalid("generating location must be finite".to_string()));
        }
        if self.methods.is_empty() {
            return Err(Error::invalid("no methods requested".to_string()));
        }
        if !self.include_clean && self.contaminations.is_empty() {
            return Err(Error::invalid(
                "no cells to run: clean excluded and no contaminations given".to_string(),
            ));
        }
        for spec in &self.contaminations {
            spec.validate(self.n)?;
        }
        for (i, a) in self.contaminations.iter().enumerate() {
            for b in &self.contaminations[i + 1..] {
                if a.k == b.k && a.shift.to_bits() == b.shift.to_bits() {
                    return Err(Error::invalid(format!(
                        "duplicate contamination cell (k = {}, shift = {})",
                        a.k, a.shift
                    )));
                }
            }
        }
        if !(self.prior.variance.is_finite() && self.prior.variance > 0.0)
            || !self.prior.mean.is_finite()
        {
            return Err(Error::invalid(format!(
                "location prior needs a finite mean and positive variance, got N({}, {})",
                self.prior.mean, self.prior.variance
            )));
        }
        self.ensemble.validate()?;
        McmcConfig {
            iterations: self.gibbs.iterations,
            burn_in: self.gibbs.burn_in,
            thin: self.gibbs.thin,
            seed: 0,
        }
        .validate()?;
        if self.chain.steps < 100 {
            return Err(Error::invalid(format!(
                "parameter chains need at least 100 steps, got {}",
                self.chain.steps
            )));
        }
        if self.chain.thin == 0 {
            return Err(Error::invalid("chain thinning must be at least 1".to_string()));
        }
        if self.grid_nodes_per_unit < 8 {
            return Err(Error::invalid(format!(
                "grid needs at least 8 nodes per unit, got {}",
                self.grid_nodes_per_unit
            )));
        }
        if !(self.grid_margin.is_finite() && self.grid_margin >= 0.0) {
            return Err(Error::invalid(format!(
                "grid margin must be nonnegative, got {}",
                self.grid_margin
            )));
        }
        Ok(())
    }

    /// Cells in report order: clean first when requested, then each
    /// contamination as configured.
    fn cell_specs(&self) -> Vec<Option<ContaminationSpec>> {
        let mut cells = Vec::with_capacity(self.contaminations.len() + 1);
        if self.include_clean {
            cells.push(None);
        }
        cells.extend(self.contaminations.iter().copied().map(Some));
        cells
    }
}

/// Independent draws from N(theta0, sigma0^2); deterministic per seed.
/// Callers guarantee n >= 1 and sigma0 > 0.
pub fn simulate_dataset(n: usize, theta0: f64, sigma0: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dist = Normal::new(theta0, sigma0).expect("valid generating parameters");
    (0..n).map(|_| dist.sample(&mut rng)).collect()
}

/// Shifts the last `spec.k` observations by `spec.shift` in
/// `spec.direction`, leaving the rest untouched. A zero shift is accepted
/// and returns the data unchanged.
pub fn contaminate(data: &[f64], spec: &ContaminationSpec) -> Result<Vec<f64>> {
    spec.validate(data.len())?;
    let delta = match spec.direction {
        Direction::Down => -spec.shift,
        Direction::Up => spec.shift,
    };
    let mut out = data.to_vec();
    let start = out.len() - spec.k;
    for x in &mut out[start..] {
        *x += delta;
    }
    Ok(out)
}

/// One method's answer on one dataset.
#[derive(Clone, Debug, PartialEq)]
pub struct MethodRecord {
    pub method: SimMethod,
    pub estimate: f64,
    /// Central 95% interval; absent for the point estimators.
    pub ci: Option<(f64, f64)>,
}

/// Every requested method on one (replication, contamination) dataset.
#[derive(Clone, Debug, PartialEq)]
pub struct CellRecord {
    /// Outliers moved; 0 for the clean cell.
    pub k: usize,
    /// Shift magnitude; 0 for the clean cell.
    pub shift: f64,
    pub results: Vec<MethodRecord>,
}

/// All cells of one replication.
#[derive(Clone, Debug, PartialEq)]
pub struct ReplicationRecord {
    pub index: usize,
    pub cells: Vec<CellRecord>,
}

fn cell_salt(spec: Option<&ContaminationSpec>) -> u64 {
    match spec {
        None => 0,
        Some(c) => {
            let dir = match c.direction {
                Direction::Down => 1,
                Direction::Up => 2,
            };
            splitmix64(c.k as u64 ^ c.shift.to_bits() ^ dir)
        }
    }
}

/// Search region handed to the distance minimizers: the data span widened
/// by two generating scales on each side.
fn search_box(data: &[f64], sigma0: f64) -> Vec<(f64, f64)> {
    let lo = data.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = data.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    vec![(lo - 2.0 * sigma0, hi + 2.0 * sigma0)]
}

/// Runs every requested method on every cell of replication `index`.
///
/// All streams derive from `master_seed XOR splitmix64(index)`: the clean
/// base dataset is shared across cells (contamination only edits it), and
/// each cell's sampler streams carry a content-derived salt so reordering
/// or removing cells never changes another cell's answer.
pub fn run_replication(config: &SimulationConfig, index: usize) -> Result<ReplicationRecord> {
    config.validate()?;
    let rep_seed = config.master_seed ^ splitmix64(index as u64);
    let base = simulate_dataset(config.n, config.theta0, config.sigma0, rep_seed ^ DATA_SALT);
    let family = ParametricFamily::normal_location(config.sigma0)?;
    let prior = PriorSpec::location_only(config.prior.mean, config.prior.variance);
    let needs_ensemble = config.methods.iter().any(SimMethod::needs_ensemble);

    let mut cells = Vec::new();
    for cell in config.cell_specs() {
        let (k, shift, data) = match &cell {
            None => (0, 0.0, base.clone()),
            Some(c) => (c.k, c.shift, contaminate(&base, c)?),
        };
        let salt = cell_salt(cell.as_ref());

        let (ensemble, grid) = if needs_ensemble {
            let mcmc = McmcConfig {
                iterations: config.gibbs.iterations,
                burn_in: config.gibbs.burn_in,
                thin: config.gibbs.thin,
                seed: rep_seed ^ GIBBS_SALT ^ salt,
            };
            let e = run_blocked_gibbs(&data, &config.ensemble, &mcmc)?;
            let g = grid_for_ensemble(
                &data,
                &e,
                config.grid_nodes_per_unit,
                config.grid_margin,
            )?;
            (Some(e), g)
        } else {
            (
                None,
                build_grid(&data, config.grid_nodes_per_unit, config.grid_margin)?,
            )
        };
        let search = search_box(&data, config.sigma0);

        let mut results = Vec::with_capacity(config.methods.len());
        for &method in &config.methods {
            let record = match method {
                SimMethod::Conjugate => {
                    let post = conjugate_normal_posterior(
                        &data,
                        config.prior.mean,
                        config.prior.variance,
                        config.sigma0,
                    )?;
                    MethodRecord {
                        method,
                        estimate: post.mean,
                        ci: Some(post.ci95()),
                    }
                }
                SimMethod::Hierarchical => {
                    let mcmc = McmcConfig {
                        iterations: config.chain.steps,
                        burn_in: 0,
                        thin: config.chain.thin,
                        seed: rep_seed ^ CHAIN_SALT ^ salt,
                    };
                    let ens = ensemble.as_ref().expect("ensemble built for this method");
                    let pool = hierarchical_posterior(
                        ens,
                        data.len() as f64,
                        &prior,
                        &family,
                        &mcmc,
                        &grid,
                    )?;
                    let summary = eap_and_ci(&pool)?;
                    MethodRecord {
                        method,
                        estimate: summary.eap[0],
                        ci: Some((summary.ci_low[0], summary.ci_high[0])),
                    }
                }
                SimMethod::Theta1 => {
                    let ens = ensemble.as_ref().expect("ensemble built for this method");
                    let r = theta_hat_1(ens, &family, &grid, &search)?;
                    MethodRecord {
                        method,
                        estimate: r.theta[0],
                        ci: None,
                    }
                }
                SimMethod::Theta2 => {
                    let ens = ensemble.as_ref().expect("ensemble built for this method");
                    let r = theta_hat_2(ens, &family, &grid, &search)?;
                    MethodRecord {
                        method,
                        estimate: r.theta[0],
                        ci: None,
                    }
                }
                SimMethod::Theta3 => {
                    let ens = ensemble.as_ref().expect("ensemble built for this method");
                    let eps = default_epsilon(data.len())?;
                    let r = theta_hat_3(ens, &family, &grid, &search, eps)?;
                    MethodRecord {
                        method,
                        estimate: r.theta[0],
                        ci: None,
                    }
                }
                SimMethod::ClassicalMhde => {
                    let r = classical_mhde(
                        &data,
                        &family,
                        BandwidthRule::Silverman,
                        &grid,
                        &search,
                    )?;
                    MethodRecord {
                        method,
                        estimate: r.theta[0],
                        ci: None,
                    }
                }
            };
            results.push(record);
        }
        cells.push(CellRecord { k, shift, results });
    }
    Ok(ReplicationRecord { index, cells })
}

/// One line of the report.
#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    pub method: SimMethod,
    pub k: usize,
    pub shift: f64,
    /// Mean estimate minus the generating location.
    pub bias: f64,
    /// Sample standard deviation of the estimates (0 for one record).
    pub sd: f64,
    /// Fraction of intervals containing the truth; absent for point
    /// estimators.
    pub coverage: Option<f64>,
    /// Mean interval length; absent for point estimators.
    pub length: Option<f64>,
    pub replications: usize,
}

/// Bias/spread/coverage report, one row per (method, contamination) cell.
#[derive(Clone, Debug, PartialEq)]
pub struct SummaryTable {
    pub rows: Vec<SummaryRow>,
}

impl SummaryTable {
    pub fn row(&self, method: SimMethod, k: usize, shift: f64) -> Option<&SummaryRow> {
        self.rows
            .iter()
            .find(|r| r.method == method && r.k == k && r.shift.to_bits() == shift.to_bits())
    }

    /// Tab-separated report; point-estimator rows carry `nan` in the
    /// interval columns.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("method\tk\tshift\tbias\tsd\tcoverage\tlength\treps\n");
        for r in &self.rows {
            let opt = |v: Option<f64>| v.map_or_else(|| "nan".to_string(), float17);
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
                r.method,
                r.k,
                float17(r.shift),
                float17(r.bias),
                float17(r.sd),
                opt(r.coverage),
                opt(r.length),
                r.replications
            ));
        }
        out
    }
}

/// Reduces replication records to the per-cell report. Rows appear in
/// first-encounter order (replications all share one cell order, so this
/// is the config's order).
pub fn summarize(records: &[ReplicationRecord], theta0: f64) -> Result<SummaryTable> {
    if records.is_empty() {
        return Err(Error::EmptyData("no replication records to summarize"));
    }
    struct Bucket {
        method: SimMethod,
        k: usize,
        shift: f64,
        estimates: Vec<f64>,
        cis: Vec<Option<(f64, f64)>>,
    }
    let mut buckets: Vec<Bucket> = Vec::new();
    for record in records {
        for cell in &record.cells {
            for res in &cell.results {
                let found = buckets.iter_mut().find(|b| {
                    b.method == res.method
                        && b.k == cell.k
                        && b.shift.to_bits() == cell.shift.to_bits()
                });
                let bucket = match found {
                    Some(b) => b,
                    None => {
                        buckets.push(Bucket {
                            method: res.method,
                            k: cell.k,
                            shift: cell.shift,
                            estimates: Vec::new(),
                            cis: Vec::new(),
                        });
                        buckets.last_mut().expect("just pushed")
                    }
                };
                bucket.estimates.push(res.estimate);
                bucket.cis.push(res.ci);
            }
        }
    }
    let rows = buckets
        .into_iter()
        .map(|b| {
            if b.estimates.len() == 1 {
                log::warn!(
                    "cell ({}, k={}, shift={}) has a single record; reporting sd 0",
                    b.method,
                    b.k,
                    b.shift
                );
            }
            let (coverage, length) = if b.cis.iter().all(Option::is_some) {
                let hits = b
                    .cis
                    .iter()
                    .filter(|ci| {
                        let (lo, hi) = ci.expect("checked above");
                        lo <= theta0 && theta0 <= hi
                    })
                    .count();
                let lengths: Vec<f64> =
                    b.cis.iter().map(|ci| ci.expect("checked above")).map(|(lo, hi)| hi - lo).collect();
                (
                    Some(hits as f64 / b.cis.len() as f64),
                    Some(mean(&lengths)),
                )
            } else {
                (None, None)
            };
            SummaryRow {
                method: b.method,
                k: b.k,
                shift: b.shift,
                bias: mean(&b.estimates) - theta0,
                sd: sample_sd(&b.estimates),
                coverage,
                length,
                replications: b.estimates.len(),
            }
        })
        .collect();
    Ok(SummaryTable { rows })
}

/// Runs the whole study: every replication in parallel, then one summary.
pub fn run_simulation(config: &SimulationConfig) -> Result<SummaryTable> {
    config.validate()?;
    let records: Result<Vec<ReplicationRecord>> = (0..config.replications)
        .into_par_iter()
        .map(|i| run_replication(config, i))
        .collect();
    summarize(&records?, config.theta0)
}

/// Before/after counts per subject, validated so every log-odds is finite:
/// each subject needs `0 < after < before`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairedCountData {
    ids: Vec<String>,
    before: Vec<u64>,
    after: Vec<u64>,
}

impl PairedCountData {
    pub fn new(ids: Vec<String>, before: Vec<u64>, after: Vec<u64>) -> Result<Self> {
        if ids.is_empty() {
            return Err(Error::EmptyData("paired counts need at least one subject"));
        }
        if ids.len() != before.len() || ids.len() != after.len() {
            return Err(Error::invalid(format!(
                "column lengths differ: {} ids, {} before, {} after",
                ids.len(),
                before.len(),
                after.len()
            )));
        }
        for ((id, &b), &a) in ids.iter().zip(&before).zip(&after) {
            if b == 0 {
                return Err(Error::invalid(format!(
                    "subject {id}: count before must be positive"
                )));
            }
            if a == 0 {
                return Err(Error::invalid(format!(
                    "subject {id}: zero survivors give an infinite log-odds"
                )));
            }
            if a >= b {
                return Err(Error::invalid(format!(
                    "subject {id}: count after ({a}) must be below count before ({b})"
                )));
            }
        }
        Ok(PairedCountData { ids, before, after })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn before(&self) -> &[u64] {
        &self.before
    }

    pub fn after(&self) -> &[u64] {
        &self.after
    }

    /// Drops one subject by position.
    pub fn without(&self, index: usize) -> Result<Self> {
        if index >= self.len() {
            return Err(Error::invalid(format!(
                "subject index {index} out of range (have {})",
                self.len()
            )));
        }
        let drop = |v: &[u64]| {
            v.iter()
                .enumerate()
                .filter(|&(i, _)| i != index)
                .map(|(_, &x)| x)
                .collect()
        };
        let ids = self
            .ids
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != index)
            .map(|(_, s)| s.clone())
            .collect();
        PairedCountData::new(ids, drop(&self.before), drop(&self.after))
    }
}

/// Per-subject survival log-odds `ln(p / (1 - p))` with `p = after/before`,
/// equal to `ln(after / (before - after))`. Finite by the type's
/// invariants.
pub fn logodds_ingest(pc: &PairedCountData) -> Vec<f64> {
    pc.before
        .iter()
        .zip(&pc.after)
        .map(|(&b, &a)| (a as f64 / (b - a) as f64).ln())
        .collect()
}

/// The seven-subject fecal egg count data (treatment before/after).
pub fn parasite_egg_counts() -> PairedCountData {
    PairedCountData::new(
        (1..=7).map(|i| i.to_string()).collect(),
        vec![2440, 1000, 1900, 1820, 3260, 300, 660],
        vec![580, 320, 400, 160, 60, 40, 120],
    )
    .expect("built-in counts satisfy the invariants")
}
