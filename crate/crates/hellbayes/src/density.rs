//! Density types: finite Gaussian mixtures, posterior ensembles of them,
//! kernel density estimates, and random histograms.
//!
//! Everything implements [`Density`], a bare pointwise evaluator; the
//! distance machinery restricts densities to a grid
//! ([`GridDensity`](crate::grid::GridDensity)) before integrating.

use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{ensure_finite, Error, Result};
use crate::grid::{build_grid, GridDensity, QuadratureGrid};
use crate::serialize::{float17, float17_array};
use crate::stats::{ln_normal_pdf, quantile_sorted, sample_sd};

/// A probability density on the real line.
pub trait Density {
    fn pdf(&self, x: f64) -> f64;
}

impl<F: Fn(f64) -> f64> Density for F {
    fn pdf(&self, x: f64) -> f64 {
        self(x)
    }
}

impl GridDensity {
    /// Restricts `density` to `grid`, enforcing the grid-mass contract.
    pub fn from_density(grid: &QuadratureGrid, density: &impl Density) -> Result<Self> {
        GridDensity::from_fn(grid, |x| density.pdf(x))
    }
}

/// Atoms lighter than this are ignored when computing support hints; their
/// total mass is far below the grid-mass tolerance.
const SUPPORT_WEIGHT_CUTOFF: f64 = 1e-6;
/// Support hints pad each atom by this many standard deviations.
const SUPPORT_SD_SPAN: f64 = 8.0;

/// A finite mixture of normals: `sum_k w_k N(mean_k, var_k)`.
///
/// Invariants checked at construction (and after deserialization): equal
/// component counts, nonnegative weights summing to one, strictly positive
/// variances, all entries finite.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MixtureRepr")]
pub struct GaussianMixtureDensity {
    weights: Vec<f64>,
    means: Vec<f64>,
    variances: Vec<f64>,
}

#[derive(Deserialize)]
struct MixtureRepr {
    weights: Vec<f64>,
    means: Vec<f64>,
    variances: Vec<f64>,
}

impl TryFrom<MixtureRepr> for GaussianMixtureDensity {
    type Error = Error;
    fn try_from(r: MixtureRepr) -> Result<Self> {
        GaussianMixtureDensity::new(r.weights, r.means, r.variances)
    }
}

impl GaussianMixtureDensity {
    pub fn new(weights: Vec<f64>, means: Vec<f64>, variances: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::EmptyData("mixture needs at least one component"));
        }
        if weights.len() != means.len() || weights.len() != variances.len() {
            return Err(Error::invalid(format!(
                "component counts differ: {} weights, {} means, {} variances",
                weights.len(),
                means.len(),
                variances.len()
            )));
        }
        ensure_finite(&weights, "weights")?;
        ensure_finite(&means, "means")?;
        ensure_finite(&variances, "variances")?;
        if let Some(w) = weights.iter().find(|&&w| w < 0.0) {
            return Err(Error::invalid(format!("negative mixture weight {w}")));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!(
                "mixture weights sum to {total}, expected 1"
            )));
        }
        if let Some(v) = variances.iter().find(|&&v| v <= 0.0) {
            return Err(Error::invalid(format!("nonpositive mixture variance {v}")));
        }
        Ok(GaussianMixtureDensity {
            weights,
            means,
            variances,
        })
    }

    /// Single normal as a one-component mixture.
    pub fn single(mean: f64, variance: f64) -> Result<Self> {
        Self::new(vec![1.0], vec![mean], vec![variance])
    }

    pub fn component_count(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    pub fn variances(&self) -> &[f64] {
        &self.variances
    }

    /// An interval holding all but a negligible sliver of the mass:
    /// union of `mean +- 8 sd` over components heavier than 1e-6.
    pub fn support_hint(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for ((&w, &m), &v) in self.weights.iter().zip(&self.means).zip(&self.variances) {
            if w <= SUPPORT_WEIGHT_CUTOFF {
                continue;
            }
            let span = SUPPORT_SD_SPAN * v.sqrt();
            lo = lo.min(m - span);
            hi = hi.max(m + span);
        }
        if lo > hi {
            // All weights negligible only if the mixture is pathological;
            // fall back to the heaviest component.
            let k = self
                .weights
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                .map(|(i, _)| i)
                .unwrap_or(0);
            let span = SUPPORT_SD_SPAN * self.variances[k].sqrt();
            return (self.means[k] - span, self.means[k] + span);
        }
        (lo, hi)
    }

    fn write_json(&self, out: &mut String) {
        out.push_str("{\"weights\":");
        out.push_str(&float17_array(&self.weights));
        out.push_str(",\"means\":");
        out.push_str(&float17_array(&self.means));
        out.push_str(",\"variances\":");
        out.push_str(&float17_array(&self.variances));
        out.push('}');
    }
}

impl Density for GaussianMixtureDensity {
    fn pdf(&self, x: f64) -> f64 {
        let mut acc = 0.0;
        for ((&w, &m), &v) in self.weights.iter().zip(&self.means).zip(&self.variances) {
            if w > 0.0 {
                acc += w * ln_normal_pdf(x, m, v.sqrt()).exp();
            }
        }
        acc
    }
}

/// Provenance of a sampled ensemble.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleMeta {
    pub seed: u64,
    pub burn_in: usize,
    pub thin: usize,
    /// Sweep index each retained draw came from.
    pub source_iterations: Vec<usize>,
}

/// Posterior draws of a density: the working representation of "the
/// nonparametric posterior" everywhere downstream.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "EnsembleRepr")]
pub struct DensityEnsemble {
    draws: Vec<GaussianMixtureDensity>,
    meta: EnsembleMeta,
}

#[derive(Deserialize)]
struct EnsembleRepr {
    draws: Vec<GaussianMixtureDensity>,
    meta: EnsembleMeta,
}

impl TryFrom<EnsembleRepr> for DensityEnsemble {
    type Error = Error;
    fn try_from(r: EnsembleRepr) -> Result<Self> {
        DensityEnsemble::new(r.draws, r.meta)
    }
}

impl DensityEnsemble {
    pub fn new(draws: Vec<GaussianMixtureDensity>, meta: EnsembleMeta) -> Result<Self> {
        if draws.is_empty() {
            return Err(Error::EmptyData("ensemble needs at least one draw"));
        }
        if meta.source_iterations.len() != draws.len() {
            return Err(Error::invalid(format!(
                "{} draws but {} source iterations",
                draws.len(),
                meta.source_iterations.len()
            )));
        }
        Ok(DensityEnsemble { draws, meta })
    }

    pub fn len(&self) -> usize {
        self.draws.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn draws(&self) -> &[GaussianMixtureDensity] {
        &self.draws
    }

    pub fn meta(&self) -> &EnsembleMeta {
        &self.meta
    }

    /// Union of the draws' support hints.
    pub fn support_hint(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for d in &self.draws {
            let (a, b) = d.support_hint();
            lo = lo.min(a);
            hi = hi.max(b);
        }
        (lo, hi)
    }

    /// Deterministic JSON encoding (fixed key order, 17-significant-digit
    /// reals); the inverse of [`from_json_str`](Self::from_json_str).
    pub fn to_json_string(&self) -> String {
        let mut out = String::new();
        out.push_str("{\n  \"meta\": {\"seed\": ");
        out.push_str(&self.meta.seed.to_string());
        out.push_str(", \"burn_in\": ");
        out.push_str(&self.meta.burn_in.to_string());
        out.push_str(", \"thin\": ");
        out.push_str(&self.meta.thin.to_string());
        out.push_str(", \"source_iterations\": [");
        for (i, it) in self.meta.source_iterations.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            out.push_str(&it.to_string());
        }
        out.push_str("]},\n  \"draws\": [\n");
        for (i, d) in self.draws.iter().enumerate() {
            out.push_str("    ");
            d.write_json(&mut out);
            if i + 1 < self.draws.len() {
                out.push(',');
            }
            out.push('\n');
        }
        out.push_str("  ]\n}\n");
        out
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::invalid(format!("ensemble JSON: {e}")))
    }
}

/// Every ensemble draw restricted to `grid`, in draw order.
pub(crate) fn ensemble_grid_densities(
    ensemble: &DensityEnsemble,
    grid: &QuadratureGrid,
) -> Result<Vec<GridDensity>> {
    ensemble
        .draws()
        .iter()
        .map(|d| GridDensity::from_density(grid, d))
        .collect()
}

/// Pointwise average of the ensemble draws, restricted to `grid`: the
/// posterior-mean density.
pub fn posterior_mean_density(
    ensemble: &DensityEnsemble,
    grid: &QuadratureGrid,
) -> Result<GridDensity> {
    let mut values = vec![0.0; grid.len()];
    for draw in ensemble.draws() {
        for (v, &x) in values.iter_mut().zip(grid.nodes()) {
            *v += draw.pdf(x);
        }
    }
    let inv = 1.0 / ensemble.len() as f64;
    for v in &mut values {
        *v *= inv;
    }
    GridDensity::from_values(grid, values)
}

/// Builds a grid wide enough for the data *and* every significant ensemble
/// atom, so each draw passes the grid-mass check. Mixture atoms can sit far
/// from the data (fresh prior draws on empty clusters); a grid sized to the
/// data alone leaks their mass.
pub fn grid_for_ensemble(
    data: &[f64],
    ensemble: &DensityEnsemble,
    nodes_per_unit: u32,
    margin: f64,
) -> Result<QuadratureGrid> {
    let base = build_grid(data, nodes_per_unit, margin)?;
    let (dlo, dhi) = base.range();
    let (elo, ehi) = ensemble.support_hint();
    let lo = dlo.min(elo);
    let hi = dhi.max(ehi);
    if lo == dlo && hi == dhi {
        return Ok(base);
    }
    QuadratureGrid::with_density(lo, hi, nodes_per_unit)
}

/// Bandwidth choice for kernel density estimates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BandwidthRule {
    /// `0.9 min(sd, iqr/1.34) n^(-1/5)`, the classic plug-in rule.
    Silverman,
    Fixed(f64),
}

/// Gaussian kernel density estimate over a data set.
#[derive(Clone, Debug)]
pub struct KdeDensity {
    data: Vec<f64>,
    bandwidth: f64,
}

/// Bandwidth used when the data show no spread at all.
const DEGENERATE_BANDWIDTH: f64 = 1e-3;

impl KdeDensity {
    pub fn new(data: &[f64], rule: BandwidthRule) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::EmptyData("kernel density estimate"));
        }
        ensure_finite(data, "data")?;
        let bandwidth = match rule {
            BandwidthRule::Fixed(h) => {
                if !(h.is_finite() && h > 0.0) {
                    return Err(Error::invalid(format!(
                        "fixed bandwidth must be positive, got {h}"
                    )));
                }
                h
            }
            BandwidthRule::Silverman => {
                let sd = sample_sd(data);
                let mut sorted = data.to_vec();
                sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
                let iqr = quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25);
                let scale = if sd > 0.0 && iqr > 0.0 {
                    sd.min(iqr / 1.34)
                } else {
                    sd.max(iqr / 1.34)
                };
                if scale > 0.0 {
                    0.9 * scale * (data.len() as f64).powf(-0.2)
                } else {
                    log::warn!(
                        "data shows zero spread; falling back to bandwidth {DEGENERATE_BANDWIDTH}"
                    );
                    DEGENERATE_BANDWIDTH
                }
            }
        };
        Ok(KdeDensity {
            data: data.to_vec(),
            bandwidth,
        })
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Interval holding essentially all of the mass.
    pub fn support_hint(&self) -> (f64, f64) {
        let min = self.data.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = self.data.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let span = SUPPORT_SD_SPAN * self.bandwidth;
        (min - span, max + span)
    }
}

impl Density for KdeDensity {
    fn pdf(&self, x: f64) -> f64 {
        let inv = 1.0 / (self.data.len() as f64);
        self.data
            .iter()
            .map(|&xi| ln_normal_pdf(x, xi, self.bandwidth).exp())
            .sum::<f64>()
            * inv
    }
}

/// Equal-width bins: `[origin + i w, origin + (i+1) w)` for `i < count`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistogramBins {
    pub origin: f64,
    pub width: f64,
    pub count: usize,
}

impl HistogramBins {
    pub fn new(origin: f64, width: f64, count: usize) -> Result<Self> {
        if !(origin.is_finite() && width.is_finite() && width > 0.0) {
            return Err(Error::invalid(format!(
                "bins need a finite origin and positive width, got origin {origin}, width {width}"
            )));
        }
        if count == 0 {
            return Err(Error::invalid("bin count must be at least 1".to_string()));
        }
        Ok(HistogramBins {
            origin,
            width,
            count,
        })
    }

    /// Smallest width-aligned bin set covering the data.
    pub fn covering(data: &[f64], width: f64) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::EmptyData("histogram bins need observations"));
        }
        ensure_finite(data, "data")?;
        if !(width.is_finite() && width > 0.0) {
            return Err(Error::invalid(format!(
                "bin width must be positive, got {width}"
            )));
        }
        let min = data.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = data.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let origin = (min / width).floor() * width;
        let mut count = ((max - origin) / width).ceil().max(1.0) as usize;
        // Bins are half open; a maximum landing exactly on the top edge
        // needs one more bin.
        while origin + count as f64 * width <= max {
            count += 1;
        }
        HistogramBins::new(origin, width, count)
    }

    /// Bin index of `x`, or `None` outside the covered range.
    pub fn index_of(&self, x: f64) -> Option<usize> {
        if !x.is_finite() || x < self.origin {
            return None;
        }
        let i = ((x - self.origin) / self.width).floor() as usize;
        // Guard the top edge: floating division can land on `count`.
        if i < self.count && x < self.origin + self.count as f64 * self.width {
            Some(i.min(self.count - 1))
        } else {
            None
        }
    }

    pub fn total_span(&self) -> (f64, f64) {
        (
            self.origin,
            self.origin + self.count as f64 * self.width,
        )
    }
}

/// Dirichlet posterior over histogram bin probabilities.
///
/// The prior puts `base_weights[i]` pseudo-counts on bin i; observed counts
/// add to them, so the posterior is Dirichlet(base + counts). Sampled and
/// mean densities are piecewise constant on the bins.
#[derive(Clone, Debug)]
pub struct RandomHistogramPosterior {
    bins: HistogramBins,
    base_weights: Vec<f64>,
    counts: Vec<usize>,
}

impl RandomHistogramPosterior {
    /// Posterior given `data` and explicit bins/prior. Empty data is fine
    /// (the posterior is the prior); data outside the bins is an error.
    pub fn with_bins(data: &[f64], bins: HistogramBins, base_weights: Vec<f64>) -> Result<Self> {
        if base_weights.len() != bins.count {
            return Err(Error::invalid(format!(
                "{} base weights for {} bins",
                base_weights.len(),
                bins.count
            )));
        }
        ensure_finite(&base_weights, "base_weights")?;
        if let Some(w) = base_weights.iter().find(|&&w| w <= 0.0) {
            return Err(Error::invalid(format!(
                "base weights must be positive, got {w}"
            )));
        }
        let mut counts = vec![0usize; bins.count];
        for &x in data {
            match bins.index_of(x) {
                Some(i) => counts[i] += 1,
                None => {
                    return Err(Error::invalid(format!(
                        "observation {x} falls outside the bins {:?}",
                        bins.total_span()
                    )))
                }
            }
        }
        Ok(RandomHistogramPosterior {
            bins,
            base_weights,
            counts,
        })
    }

    pub fn bins(&self) -> HistogramBins {
        self.bins
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    /// Dirichlet parameters of the posterior: base + observed counts.
    pub fn posterior_weights(&self) -> Vec<f64> {
        self.base_weights
            .iter()
            .zip(&self.counts)
            .map(|(&b, &c)| b + c as f64)
            .collect()
    }

    /// Posterior-mean density (bin probabilities proportional to the
    /// posterior weights).
    pub fn mean_density(&self) -> RandomHistogramDensity {
        let alpha = self.posterior_weights();
        let total: f64 = alpha.iter().sum();
        let probs = alpha.into_iter().map(|a| a / total).collect();
        RandomHistogramDensity {
            bins: self.bins,
            bin_probs: probs,
        }
    }

    /// One Dirichlet draw of the bin probabilities.
    pub fn sample(&self, rng: &mut impl Rng) -> RandomHistogramDensity {
        let alpha = self.posterior_weights();
        // Dirichlet via normalized Gamma(alpha_i, 1) draws.
        let mut draws: Vec<f64> = alpha
            .iter()
            .map(|&a| Gamma::new(a, 1.0).expect("positive shape").sample(rng))
            .collect();
        let total: f64 = draws.iter().sum();
        if total <= 0.0 {
            // All-zero draws are a measure-zero event hit only by extreme
            // underflow; fall back to the mean.
            return self.mean_density();
        }
        for d in &mut draws {
            *d /= total;
        }
        RandomHistogramDensity {
            bins: self.bins,
            bin_probs: draws,
        }
    }

    /// Log marginal likelihood of the observed counts under the Dirichlet
    /// prior (Dirichlet-multinomial mass times the bin-width density
    /// factor). Comparable across different bin layouts for the same data.
    pub fn log_marginal_likelihood(&self) -> f64 {
        let n: usize = self.counts.iter().sum();
        let a0: f64 = self.base_weights.iter().sum();
        let mut acc = ln_gamma(a0) - ln_gamma(a0 + n as f64);
        for (&b, &c) in self.base_weights.iter().zip(&self.counts) {
            acc += ln_gamma(b + c as f64) - ln_gamma(b);
        }
        acc - n as f64 * self.bins.width.ln()
    }
}

/// Piecewise-constant density over histogram bins.
#[derive(Clone, Debug, PartialEq)]
pub struct RandomHistogramDensity {
    bins: HistogramBins,
    bin_probs: Vec<f64>,
}

impl RandomHistogramDensity {
    pub fn bins(&self) -> HistogramBins {
        self.bins
    }

    /// Bin probabilities; sum to one.
    pub fn bin_probs(&self) -> &[f64] {
        &self.bin_probs
    }
}

impl Density for RandomHistogramDensity {
    fn pdf(&self, x: f64) -> f64 {
        match self.bins.index_of(x) {
            Some(i) => self.bin_probs[i] / self.bins.width,
            None => 0.0,
        }
    }
}

/// Posterior for data-covering bins of width `h` with `base_per_bin`
/// pseudo-counts per bin.
pub fn random_histogram_posterior(
    data: &[f64],
    h: f64,
    base_per_bin: f64,
) -> Result<RandomHistogramPosterior> {
    let bins = HistogramBins::covering(data, h)?;
    RandomHistogramPosterior::with_bins(data, bins, vec![base_per_bin; bins.count])
}

/// Default candidate widths for [`select_bin_width`].
pub const DEFAULT_BIN_WIDTHS: [f64; 3] = [0.1, 0.25, 0.5];

/// Picks the candidate width with the highest log marginal likelihood
/// (first maximum on ties).
pub fn select_bin_width(data: &[f64], candidates: &[f64], base_per_bin: f64) -> Result<f64> {
    if candidates.is_empty() {
        return Err(Error::EmptyData("bin-width candidates"));
    }
    let mut best: Option<(f64, f64)> = None;
    for &h in candidates {
        let ml = random_histogram_posterior(data, h, base_per_bin)?.log_marginal_likelihood();
        if best.map_or(true, |(_, b)| ml > b) {
            best = Some((h, ml));
        }
    }
    Ok(best.expect("nonempty candidates").0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn mixture_pdf_matches_hand_computation() {
        let m = GaussianMixtureDensity::new(
            vec![0.3, 0.7],
            vec![-1.0, 2.0],
            vec![0.25, 4.0],
        )
        .unwrap();
        // 0.3 phi((0.5+1)/0.5)/0.5 + 0.7 phi((0.5-2)/2)/2.
        assert!((m.pdf(0.5) - 0.10805721030134435).abs() < 1e-15);
    }

    #[test]
    fn mixture_integrates_to_one() {
        let m = GaussianMixtureDensity::new(
            vec![0.5, 0.25, 0.25],
            vec![0.0, -3.0, 4.0],
            vec![1.0, 0.5, 2.0],
        )
        .unwrap();
        let grid = QuadratureGrid::with_density(-16.0, 18.0, 32).unwrap();
        let mass = grid.integrate(|x| m.pdf(x));
        assert!((mass - 1.0).abs() < 1e-9);
    }

    #[test]
    fn mixture_validation_rejects_bad_input() {
        assert!(GaussianMixtureDensity::new(vec![], vec![], vec![]).is_err());
        assert!(
            GaussianMixtureDensity::new(vec![0.5, 0.6], vec![0.0, 1.0], vec![1.0, 1.0]).is_err()
        );
        assert!(GaussianMixtureDensity::new(vec![1.0], vec![0.0], vec![0.0]).is_err());
        assert!(GaussianMixtureDensity::new(vec![1.0], vec![0.0, 1.0], vec![1.0]).is_err());
        assert!(GaussianMixtureDensity::new(vec![-0.2, 1.2], vec![0.0, 1.0], vec![1.0, 1.0])
            .is_err());
    }

    #[test]
    fn support_hint_skips_negligible_atoms() {
        let m = GaussianMixtureDensity::new(
            vec![1.0 - 1e-9, 1e-9],
            vec![0.0, 500.0],
            vec![1.0, 1.0],
        )
        .unwrap();
        let (lo, hi) = m.support_hint();
        assert!(lo <= -8.0 && hi >= 8.0);
        assert!(hi < 100.0, "negligible atom dragged the hint to {hi}");
    }

    fn tiny_ensemble() -> DensityEnsemble {
        let draws = vec![
            GaussianMixtureDensity::new(vec![0.5, 0.5], vec![0.0, 1.0], vec![1.0, 2.0]).unwrap(),
            GaussianMixtureDensity::single(0.5, 1.5).unwrap(),
        ];
        DensityEnsemble::new(
            draws,
            EnsembleMeta {
                seed: 7,
                burn_in: 10,
                thin: 5,
                source_iterations: vec![10, 15],
            },
        )
        .unwrap()
    }

    #[test]
    fn ensemble_json_round_trips_byte_identically() {
        let e = tiny_ensemble();
        let s1 = e.to_json_string();
        let back = DensityEnsemble::from_json_str(&s1).unwrap();
        assert_eq!(back, e);
        assert_eq!(back.to_json_string(), s1);
    }

    #[test]
    fn ensemble_validation() {
        let meta = EnsembleMeta {
            seed: 0,
            burn_in: 0,
            thin: 1,
            source_iterations: vec![],
        };
        assert!(DensityEnsemble::new(vec![], meta.clone()).is_err());
        let draw = GaussianMixtureDensity::single(0.0, 1.0).unwrap();
        // 1 draw, 0 source iterations recorded.
        assert!(DensityEnsemble::new(vec![draw], meta).is_err());
    }

    #[test]
    fn posterior_mean_averages_pointwise() {
        let e = tiny_ensemble();
        let grid = QuadratureGrid::with_density(-12.0, 13.0, 32).unwrap();
        let mean = posterior_mean_density(&e, &grid).unwrap();
        let x = grid.nodes()[grid.len() / 3];
        let expected = 0.5 * (e.draws()[0].pdf(x) + e.draws()[1].pdf(x));
        let got = mean.values()[grid.len() / 3];
        assert!((got - expected).abs() < 1e-15);
    }

    #[test]
    fn ensemble_grid_covers_stray_atoms() {
        let draws = vec![GaussianMixtureDensity::new(
            vec![0.9, 0.1],
            vec![0.0, 40.0],
            vec![1.0, 1.0],
        )
        .unwrap()];
        let e = DensityEnsemble::new(
            draws,
            EnsembleMeta {
                seed: 0,
                burn_in: 0,
                thin: 1,
                source_iterations: vec![0],
            },
        )
        .unwrap();
        let data = [0.0, 1.0, -1.0];
        let grid = grid_for_ensemble(&data, &e, 16, 5.0).unwrap();
        // A data-only grid would stop near 6 and leak the atom at 40.
        assert!(grid.range().1 >= 48.0);
        assert!(posterior_mean_density(&e, &grid).is_ok());
    }

    #[test]
    fn kde_fixed_bandwidth_matches_hand_value() {
        let kde = KdeDensity::new(&[0.0, 10.0], BandwidthRule::Fixed(1.0)).unwrap();
        assert!((kde.pdf(0.0) - 0.19947114020071635).abs() < 1e-12);
    }

    #[test]
    fn silverman_bandwidth_matches_reference() {
        let kde = KdeDensity::new(&[0.0, 1.0, 2.0, 3.0, 4.0], BandwidthRule::Silverman).unwrap();
        // 0.9 min(1.5811..., 2/1.34) 5^(-1/5), quartiles interpolated.
        assert!((kde.bandwidth() - 0.9735846228506357).abs() < 1e-12);
    }

    #[test]
    fn kde_constant_data_falls_back() {
        let kde = KdeDensity::new(&[3.0, 3.0, 3.0], BandwidthRule::Silverman).unwrap();
        assert_eq!(kde.bandwidth(), DEGENERATE_BANDWIDTH);
    }

    #[test]
    fn kde_integrates_to_one() {
        let kde = KdeDensity::new(&[-2.0, 0.5, 0.7, 3.1], BandwidthRule::Silverman).unwrap();
        let (lo, hi) = kde.support_hint();
        let grid = QuadratureGrid::with_density(lo, hi, 64).unwrap();
        assert!((grid.integrate(|x| kde.pdf(x)) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn covering_bins_include_every_point() {
        let bins = HistogramBins::covering(&[0.2, 3.7], 0.5).unwrap();
        assert_eq!(bins.origin, 0.0);
        assert_eq!(bins.count, 8);
        assert_eq!(bins.index_of(0.2), Some(0));
        assert_eq!(bins.index_of(3.7), Some(7));
        assert_eq!(bins.index_of(4.0), None);
        assert_eq!(bins.index_of(-0.1), None);

        // Maximum exactly on a bin edge gets its own bin.
        let edge = HistogramBins::covering(&[0.0, 2.0], 1.0).unwrap();
        assert_eq!(edge.count, 3);
        assert_eq!(edge.index_of(2.0), Some(2));
    }

    #[test]
    fn histogram_posterior_counts_and_mean() {
        let bins = HistogramBins::new(0.0, 1.0, 4).unwrap();
        let post = RandomHistogramPosterior::with_bins(
            &[0.5, 1.5, 1.7],
            bins,
            vec![1.0; 4],
        )
        .unwrap();
        assert_eq!(post.counts(), &[1, 2, 0, 0]);
        assert_eq!(post.posterior_weights(), vec![2.0, 3.0, 1.0, 1.0]);
        let mean = post.mean_density();
        assert!((mean.bin_probs().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!((mean.pdf(1.2) - 3.0 / 7.0).abs() < 1e-12);
    }

    #[test]
    fn histogram_prior_with_no_data_is_uniform() {
        let bins = HistogramBins::new(-1.0, 0.5, 4).unwrap();
        let post = RandomHistogramPosterior::with_bins(&[], bins, vec![1.0; 4]).unwrap();
        let mean = post.mean_density();
        for &p in mean.bin_probs() {
            assert!((p - 0.25).abs() < 1e-12);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let draw = post.sample(&mut rng);
        assert!((draw.bin_probs().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(draw.bin_probs().iter().all(|&p| p >= 0.0));
    }

    #[test]
    fn histogram_rejects_out_of_range_data() {
        let bins = HistogramBins::new(0.0, 1.0, 2).unwrap();
        assert!(RandomHistogramPosterior::with_bins(&[5.0], bins, vec![1.0, 1.0]).is_err());
    }

    #[test]
    fn histogram_sampling_is_deterministic_per_seed() {
        let post = random_histogram_posterior(&[0.1, 0.9, 1.4], 0.5, 1.0).unwrap();
        let a = post.sample(&mut ChaCha8Rng::seed_from_u64(3));
        let b = post.sample(&mut ChaCha8Rng::seed_from_u64(3));
        assert_eq!(a.bin_probs(), b.bin_probs());
    }

    #[test]
    fn marginal_likelihood_matches_hand_case() {
        // Two unit bins, flat Dirichlet(1,1), one observation in each:
        // Gamma(2)/Gamma(4) * Gamma(2)^2 = 1/6, width factor 1.
        let bins = HistogramBins::new(0.0, 1.0, 2).unwrap();
        let post =
            RandomHistogramPosterior::with_bins(&[0.5, 1.5], bins, vec![1.0, 1.0]).unwrap();
        assert!((post.log_marginal_likelihood() + 1.791759469228055).abs() < 1e-12);
    }

    #[test]
    fn bin_width_selection_prefers_matching_resolution() {
        // Tight cluster: narrow bins explain it far better than wide ones.
        let data: Vec<f64> = (0..40).map(|i| 0.05 + 0.002 * i as f64).collect();
        let h = select_bin_width(&data, &DEFAULT_BIN_WIDTHS, 1.0).unwrap();
        assert_eq!(h, 0.1);
    }
}
