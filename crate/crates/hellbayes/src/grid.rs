//! Deterministic quadrature grids and densities restricted to them.
//!
//! All integrals in this crate run over a fixed composite-Simpson grid: the
//! same nodes and weights are reused for every density and every candidate
//! parameter, so distances computed against a common grid are exactly
//! comparable and runs are bit-reproducible.

use std::sync::Arc;

use crate::error::{ensure_finite, Error, Result};

/// Relative slack allowed when checking that a density integrates to one on
/// the grid. Mass outside `[1 - MASS_TOLERANCE, 1 + MASS_TOLERANCE]` means
/// the grid range does not cover the density's support.
pub const MASS_TOLERANCE: f64 = 5e-3;

/// A composite Simpson rule on `[a, b]`: odd number of equally spaced nodes
/// with weights `h/3 * (1, 4, 2, 4, ..., 2, 4, 1)`. Clones share storage.
#[derive(Clone, Debug)]
pub struct QuadratureGrid {
    nodes: Arc<[f64]>,
    weights: Arc<[f64]>,
    range: (f64, f64),
    step: f64,
}

impl QuadratureGrid {
    /// Simpson grid on `[a, b]` with at least `min_nodes` nodes (rounded up
    /// to an odd count, minimum 3).
    pub fn simpson(a: f64, b: f64, min_nodes: usize) -> Result<Self> {
        if !(a.is_finite() && b.is_finite() && a < b) {
            return Err(Error::invalid(format!(
                "grid range must satisfy a < b with both finite, got [{a}, {b}]"
            )));
        }
        let n = min_nodes.max(3);
        let n = if n % 2 == 0 { n + 1 } else { n };
        let h = (b - a) / (n - 1) as f64;
        let nodes: Vec<f64> = (0..n).map(|i| a + h * i as f64).collect();
        let mut weights = vec![0.0; n];
        let w = h / 3.0;
        weights[0] = w;
        weights[n - 1] = w;
        for (i, wi) in weights.iter_mut().enumerate().take(n - 1).skip(1) {
            *wi = if i % 2 == 1 { 4.0 * w } else { 2.0 * w };
        }
        Ok(QuadratureGrid {
            nodes: nodes.into(),
            weights: weights.into(),
            range: (a, b),
            step: h,
        })
    }

    /// Simpson grid on `[a, b]` with about `nodes_per_unit` nodes per unit
    /// length.
    pub fn with_density(a: f64, b: f64, nodes_per_unit: u32) -> Result<Self> {
        if !(a.is_finite() && b.is_finite() && a < b) {
            return Err(Error::invalid(format!(
                "grid range must satisfy a < b with both finite, got [{a}, {b}]"
            )));
        }
        let n = ((b - a) * nodes_per_unit as f64).ceil() as usize + 1;
        Self::simpson(a, b, n)
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn range(&self) -> (f64, f64) {
        self.range
    }

    /// Spacing between adjacent nodes.
    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Integrates `f` over the grid range.
    pub fn integrate(&self, mut f: impl FnMut(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(self.weights.iter())
            .map(|(&x, &w)| w * f(x))
            .sum()
    }

    /// True when `other` has identical nodes; cheap (pointer comparison)
    /// when one grid is a clone of the other.
    pub fn same_nodes(&self, other: &QuadratureGrid) -> bool {
        Arc::ptr_eq(&self.nodes, &other.nodes)
            || (self.range == other.range && self.nodes.len() == other.nodes.len())
    }
}

/// Builds a grid sized to a data set: range `[min - margin, max + margin]`
/// with `nodes_per_unit` nodes per unit length.
///
/// `nodes_per_unit` below 8 is rejected: coarser grids visibly bias the
/// distances this crate computes.
pub fn build_grid(data: &[f64], nodes_per_unit: u32, margin: f64) -> Result<QuadratureGrid> {
    if data.is_empty() {
        return Err(Error::EmptyData("build_grid requires observations"));
    }
    ensure_finite(data, "data")?;
    if nodes_per_unit < 8 {
        return Err(Error::invalid(format!(
            "nodes_per_unit must be at least 8, got {nodes_per_unit}"
        )));
    }
    if !(margin.is_finite() && margin >= 0.0) {
        return Err(Error::invalid(format!(
            "margin must be a nonnegative real, got {margin}"
        )));
    }
    let min = data.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = data.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    QuadratureGrid::with_density(min - margin, max + margin, nodes_per_unit)
}

/// A probability density evaluated on a grid, with its square root cached.
///
/// Construction enforces the crate's normalization contract: values must be
/// finite and nonnegative, and the grid mass must lie within
/// [`MASS_TOLERANCE`] of one. A failed mass check almost always means the
/// grid range is too narrow for the density.
#[derive(Clone, Debug)]
pub struct GridDensity {
    grid: QuadratureGrid,
    values: Arc<[f64]>,
    sqrt_values: Arc<[f64]>,
    mass: f64,
}

impl GridDensity {
    pub fn from_values(grid: &QuadratureGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(
                "value vector length differs from grid node count",
            ));
        }
        let mut mass = 0.0;
        for ((&x, &w), &v) in grid.nodes.iter().zip(grid.weights.iter()).zip(&values) {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::BadDensityValue { x, value: v });
            }
            mass += w * v;
        }
        if (mass - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::MassOutOfRange {
                mass,
                lo: 1.0 - MASS_TOLERANCE,
                hi: 1.0 + MASS_TOLERANCE,
            });
        }
        let sqrt_values: Vec<f64> = values.iter().map(|v| v.sqrt()).collect();
        Ok(GridDensity {
            grid: grid.clone(),
            values: values.into(),
            sqrt_values: sqrt_values.into(),
            mass,
        })
    }

    pub fn from_fn(grid: &QuadratureGrid, f: impl FnMut(f64) -> f64) -> Result<Self> {
        let values: Vec<f64> = grid.nodes.iter().cloned().map(f).collect();
        Self::from_values(grid, values)
    }

    pub fn grid(&self) -> &QuadratureGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Pointwise square roots of the density values.
    pub fn sqrt_values(&self) -> &[f64] {
        &self.sqrt_values
    }

    /// Grid mass (integral of the values); within [`MASS_TOLERANCE`] of one.
    pub fn mass(&self) -> f64 {
        self.mass
    }

    /// Approximate q-quantile read off the grid CDF; used to place search
    /// starting points, not for inference.
    pub(crate) fn quantile_approx(&self, q: f64) -> f64 {
        let target = q.clamp(0.0, 1.0) * self.mass;
        let mut cum = 0.0;
        for ((&x, &w), &v) in self
            .grid
            .nodes
            .iter()
            .zip(self.grid.weights.iter())
            .zip(self.values.iter())
        {
            cum += w * v;
            if cum >= target {
                return x;
            }
        }
        self.grid.range.1
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::ln_normal_pdf;

    #[test]
    fn simpson_is_exact_for_cubics() {
        let grid = QuadratureGrid::simpson(0.0, 2.0, 11).unwrap();
        let integral = grid.integrate(|x| x * x * x - x + 2.0);
        // Antiderivative x^4/4 - x^2/2 + 2x on [0,2]: 4 - 2 + 4 = 6.
        assert!((integral - 6.0).abs() < 1e-12);
    }

    #[test]
    fn node_count_rounds_up_to_odd() {
        assert_eq!(QuadratureGrid::simpson(0.0, 1.0, 10).unwrap().len(), 11);
        assert_eq!(QuadratureGrid::simpson(0.0, 1.0, 11).unwrap().len(), 11);
        assert_eq!(QuadratureGrid::simpson(0.0, 1.0, 0).unwrap().len(), 3);
    }

    #[test]
    fn weights_sum_to_range_length() {
        let grid = QuadratureGrid::simpson(-3.0, 5.0, 101).unwrap();
        let total: f64 = grid.weights().iter().sum();
        assert!((total - 8.0).abs() < 1e-12);
    }

    #[test]
    fn build_grid_covers_data_with_margin() {
        let grid = build_grid(&[1.0, 4.0, 2.5], 16, 2.0).unwrap();
        assert_eq!(grid.range(), (-1.0, 6.0));
        assert!(grid.len() >= 7 * 16);
    }

    #[test]
    fn build_grid_rejects_bad_input() {
        assert!(matches!(
            build_grid(&[], 16, 1.0),
            Err(Error::EmptyData(_))
        ));
        assert!(build_grid(&[0.0], 4, 1.0).is_err());
        assert!(build_grid(&[0.0, f64::NAN], 16, 1.0).is_err());
        // Degenerate range: single point, zero margin.
        assert!(build_grid(&[2.0], 16, 0.0).is_err());
    }

    #[test]
    fn grid_density_accepts_normal_and_reports_mass() {
        let grid = QuadratureGrid::with_density(-8.0, 8.0, 32).unwrap();
        let gd = GridDensity::from_fn(&grid, |x| ln_normal_pdf(x, 0.0, 1.0).exp()).unwrap();
        assert!((gd.mass() - 1.0).abs() < 1e-9);
        assert_eq!(gd.values().len(), grid.len());
        for (v, s) in gd.values().iter().zip(gd.sqrt_values()) {
            assert!((s * s - v).abs() <= 1e-15 * v.max(1.0));
        }
    }

    #[test]
    fn grid_density_rejects_mass_leak() {
        // N(10, 1) on [-4, 4] holds essentially no mass.
        let grid = QuadratureGrid::with_density(-4.0, 4.0, 32).unwrap();
        let err = GridDensity::from_fn(&grid, |x| ln_normal_pdf(x, 10.0, 1.0).exp()).unwrap_err();
        assert!(matches!(err, Error::MassOutOfRange { .. }));
    }

    #[test]
    fn grid_density_rejects_negative_values() {
        let grid = QuadratureGrid::simpson(0.0, 1.0, 5).unwrap();
        let err = GridDensity::from_values(&grid, vec![1.0, 1.0, -0.1, 1.0, 1.0]).unwrap_err();
        assert!(matches!(err, Error::BadDensityValue { .. }));
    }

    #[test]
    fn quantiles_track_the_cdf() {
        let grid = QuadratureGrid::with_density(-8.0, 8.0, 64).unwrap();
        let gd = GridDensity::from_fn(&grid, |x| ln_normal_pdf(x, 1.0, 1.0).exp()).unwrap();
        assert!((gd.quantile_approx(0.5) - 1.0).abs() < 0.05);
        assert!(gd.quantile_approx(0.1) < gd.quantile_approx(0.9));
    }
}
