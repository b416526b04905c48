//! Parametric families the estimators search over.
//!
//! Two families are built in: a normal location family with known scale
//! (parameter `(mu,)`) and a normal location-scale family (parameter
//! `(mu, sigma)` with sigma the standard deviation). Every parameter
//! coordinate lives in an open interval; validation reports all violated
//! coordinates at once rather than stopping at the first.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::ln_normal_pdf;

/// Default open bounds for location coordinates.
pub const LOCATION_BOUNDS: (f64, f64) = (-1e12, 1e12);
/// Default open bounds for the scale coordinate; the lower bound keeps the
/// scale strictly positive.
pub const SCALE_BOUNDS: (f64, f64) = (1e-8, 1e12);

/// A point in parameter space; length matches the family dimension.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParamVector(Vec<f64>);

impl ParamVector {
    pub fn new(values: Vec<f64>) -> Self {
        ParamVector(values)
    }

    pub fn scalar(value: f64) -> Self {
        ParamVector(vec![value])
    }

    pub fn pair(a: f64, b: f64) -> Self {
        ParamVector(vec![a, b])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

impl From<Vec<f64>> for ParamVector {
    fn from(values: Vec<f64>) -> Self {
        ParamVector(values)
    }
}

impl From<f64> for ParamVector {
    fn from(value: f64) -> Self {
        ParamVector::scalar(value)
    }
}

impl std::ops::Index<usize> for ParamVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl std::fmt::Display for ParamVector {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "(")?;
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{v}")?;
        }
        write!(f, ")")
    }
}

/// One out-of-bounds coordinate found during validation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundsViolation {
    pub coordinate: usize,
    pub value: f64,
    pub bounds: (f64, f64),
}

/// Everything wrong with a candidate parameter vector. `is_ok()` means the
/// vector is usable; otherwise every offending coordinate is listed.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct BoundsReport {
    /// `(expected, got)` when the vector length does not match the family.
    pub dimension_mismatch: Option<(usize, usize)>,
    pub violations: Vec<BoundsViolation>,
}

impl BoundsReport {
    pub fn is_ok(&self) -> bool {
        self.dimension_mismatch.is_none() && self.violations.is_empty()
    }
}

impl std::fmt::Display for BoundsReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if let Some((expected, got)) = self.dimension_mismatch {
            return write!(f, "expected {expected} coordinates, got {got}");
        }
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                write!(f, "; ")?;
            }
            write!(
                f,
                "coordinate {} = {} outside ({}, {})",
                v.coordinate, v.value, v.bounds.0, v.bounds.1
            )?;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FamilyKind {
    /// N(mu, sigma^2) with sigma known; parameter is (mu,).
    NormalLocation,
    /// N(mu, sigma^2); parameter is (mu, sigma).
    NormalLocationScale,
}

/// A parametric family: density evaluator plus parameter-domain metadata.
#[derive(Clone, Debug, PartialEq)]
pub struct ParametricFamily {
    kind: FamilyKind,
    /// Known standard deviation; only meaningful for `NormalLocation`.
    sigma: f64,
    bounds: Vec<(f64, f64)>,
}

impl ParametricFamily {
    /// Normal location family with known standard deviation `sigma`.
    pub fn normal_location(sigma: f64) -> Result<Self> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::invalid(format!(
                "known scale must be a positive real, got {sigma}"
            )));
        }
        Ok(ParametricFamily {
            kind: FamilyKind::NormalLocation,
            sigma,
            bounds: vec![LOCATION_BOUNDS],
        })
    }

    /// Normal family with both location and scale free.
    pub fn normal_location_scale() -> Self {
        ParametricFamily {
            kind: FamilyKind::NormalLocationScale,
            sigma: f64::NAN,
            bounds: vec![LOCATION_BOUNDS, SCALE_BOUNDS],
        }
    }

    /// Replaces the per-coordinate open bounds. Scale coordinates must keep a
    /// strictly positive lower bound.
    pub fn with_bounds(mut self, bounds: Vec<(f64, f64)>) -> Result<Self> {
        if bounds.len() != self.dimension() {
            return Err(Error::invalid(format!(
                "family has {} coordinates, got {} bound pairs",
                self.dimension(),
                bounds.len()
            )));
        }
        for (i, &(lo, hi)) in bounds.iter().enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::invalid(format!(
                    "bounds for coordinate {i} must satisfy lo < hi, got ({lo}, {hi})"
                )));
            }
        }
        if self.kind == FamilyKind::NormalLocationScale && bounds[1].0 <= 0.0 {
            return Err(Error::invalid(format!(
                "scale lower bound must be positive, got {}",
                bounds[1].0
            )));
        }
        self.bounds = bounds;
        Ok(self)
    }

    pub fn kind(&self) -> FamilyKind {
        self.kind
    }

    pub fn dimension(&self) -> usize {
        match self.kind {
            FamilyKind::NormalLocation => 1,
            FamilyKind::NormalLocationScale => 2,
        }
    }

    /// Open parameter bounds, one `(lo, hi)` pair per coordinate.
    pub fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    /// The fixed standard deviation of a location family.
    pub fn known_sigma(&self) -> Option<f64> {
        match self.kind {
            FamilyKind::NormalLocation => Some(self.sigma),
            FamilyKind::NormalLocationScale => None,
        }
    }

    /// Checks `theta` against the domain, reporting every violation.
    pub fn validate_params(&self, theta: &ParamVector) -> BoundsReport {
        let mut report = BoundsReport::default();
        if theta.dim() != self.dimension() {
            report.dimension_mismatch = Some((self.dimension(), theta.dim()));
            return report;
        }
        for (i, (&value, &bounds)) in theta.values().iter().zip(&self.bounds).enumerate() {
            // NaN fails both comparisons and is reported as a violation.
            if !(value > bounds.0 && value < bounds.1) {
                report.violations.push(BoundsViolation {
                    coordinate: i,
                    value,
                    bounds,
                });
            }
        }
        report
    }

    /// `(mu, sigma)` of the member at `theta`, after validation.
    pub fn location_scale(&self, theta: &ParamVector) -> Result<(f64, f64)> {
        let report = self.validate_params(theta);
        if !report.is_ok() {
            return Err(Error::ParamOutOfBounds(report));
        }
        Ok(self.location_scale_unchecked(theta.values()))
    }

    /// As [`location_scale`](Self::location_scale) minus the domain check;
    /// hot loops validate once and then call this.
    #[inline]
    pub(crate) fn location_scale_unchecked(&self, theta: &[f64]) -> (f64, f64) {
        match self.kind {
            FamilyKind::NormalLocation => (theta[0], self.sigma),
            FamilyKind::NormalLocationScale => (theta[0], theta[1]),
        }
    }

    /// Log density of the member at `theta`, evaluated at `x`.
    pub fn log_density(&self, theta: &ParamVector, x: f64) -> Result<f64> {
        let (mu, sd) = self.location_scale(theta)?;
        Ok(ln_normal_pdf(x, mu, sd))
    }

    /// Density of the member at `theta`, evaluated at `x`.
    pub fn density(&self, theta: &ParamVector, x: f64) -> Result<f64> {
        Ok(self.log_density(theta, x)?.exp())
    }

    /// Fisher information matrix at `theta` (row-major).
    ///
    /// For N(mu, sigma^2): I(mu) = 1/sigma^2 in the location family and
    /// diag(1/sigma^2, 2/sigma^2) in the location-scale family.
    pub fn fisher_information(&self, theta: &ParamVector) -> Result<Vec<Vec<f64>>> {
        let (_, sd) = self.location_scale(theta)?;
        let inv_var = 1.0 / (sd * sd);
        Ok(match self.kind {
            FamilyKind::NormalLocation => vec![vec![inv_var]],
            FamilyKind::NormalLocationScale => {
                vec![vec![inv_var, 0.0], vec![0.0, 2.0 * inv_var]]
            }
        })
    }
}
