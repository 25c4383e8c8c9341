//! Random inputs: variable catalog, transforms to standard normal space,
//! Latin hypercube designs and the frequency limit state.

mod samples;
mod variables;

pub use samples::{lhs_sample, LhsOptions, Provenance, SampleSet};
pub use variables::{expand_per_ply, realize, Binding, Dispersion, Family, RandomVariableSpec};

use serde::{Deserialize, Serialize};

use crate::fem::{fundamental_frequency, FemOptions, PlateModel};
use crate::{Error, Result};

/// Parameters `(mu_x, sigma_x)` of the normal variable `ln Y` for a lognormal
/// `Y` with the given mean and standard deviation.
pub fn lognormal_to_normal(mean_y: f64, std_y: f64) -> Result<(f64, f64)> {
    if !(mean_y > 0.0 && std_y > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "lognormal moments must be positive, got mean {mean_y} and std {std_y}"
        )));
    }
    let second = (std_y * std_y + mean_y * mean_y).ln();
    let mu = 2.0 * mean_y.ln() - 0.5 * second;
    // ln(1 + cov^2) written without cancellation for small dispersions.
    let cov = std_y / mean_y;
    let sigma = (cov * cov).ln_1p().sqrt();
    Ok((mu, sigma))
}

/// Frequency limit state `lambda_p / lambda_r - 1`; negative means failure.
pub fn limit_state(lambda_p: f64, lambda_r: f64) -> Result<f64> {
    if !(lambda_r > 0.0) {
        return Err(Error::InvalidArgument(format!("reference frequency must be positive, got {lambda_r}")));
    }
    Ok(lambda_p / lambda_r - 1.0)
}

/// FEM-backed limit state `g(x) = lambda_p(x) / lambda_r - 1` on a plate
/// whose parameters are overwritten by the random inputs.
#[derive(Debug, Clone)]
pub struct FrequencyLimitState {
    pub base: PlateModel,
    pub specs: Vec<RandomVariableSpec>,
    pub options: FemOptions,
    pub lambda_r: f64,
}

impl FrequencyLimitState {
    /// Sets `lambda_r` to `fraction` times the fundamental frequency at the
    /// input means.
    pub fn at_mean(base: PlateModel, specs: Vec<RandomVariableSpec>, options: FemOptions, fraction: f64) -> Result<Self> {
        if !(fraction > 0.0) {
            return Err(Error::InvalidArgument(format!("reference fraction must be positive, got {fraction}")));
        }
        let means: Vec<f64> = specs.iter().map(|s| s.mean).collect();
        let lambda_mean = fundamental_frequency(&realize(&base, &specs, &means)?, &options)?;
        Ok(FrequencyLimitState { base, specs, options, lambda_r: fraction * lambda_mean })
    }

    pub fn frequency(&self, x: &[f64]) -> Result<f64> {
        fundamental_frequency(&realize(&self.base, &self.specs, x)?, &self.options)
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        limit_state(self.frequency(x)?, self.lambda_r)
    }
}

/// Independent inputs mapped to standard normal coordinates.
///
/// Normal variables use `z = (x - mu) / sigma`; lognormal ones use the same
/// map on `ln x` with the underlying normal parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianSpace {
    pub names: Vec<String>,
    pub families: Vec<Family>,
    pub mu: Vec<f64>,
    pub sigma: Vec<f64>,
    /// Physical means, used for deterministic reference runs.
    pub means: Vec<f64>,
}

impl GaussianSpace {
    pub fn new(specs: &[RandomVariableSpec]) -> Result<Self> {
        if specs.is_empty() {
            return Err(Error::InvalidArgument("at least one random variable is required".into()));
        }
        let mut space = GaussianSpace {
            names: Vec::with_capacity(specs.len()),
            families: Vec::with_capacity(specs.len()),
            mu: Vec::with_capacity(specs.len()),
            sigma: Vec::with_capacity(specs.len()),
            means: Vec::with_capacity(specs.len()),
        };
        for s in specs {
            s.validate()?;
            let std = s.std_dev();
            let (mu, sigma) = match s.family {
                Family::Normal => (s.mean, std),
                Family::LogNormal => lognormal_to_normal(s.mean, std)?,
            };
            if space.names.contains(&s.name) {
                return Err(Error::InvalidArgument(format!("duplicate random variable name {:?}", s.name)));
            }
            space.names.push(s.name.clone());
            space.families.push(s.family);
            space.mu.push(mu);
            space.sigma.push(sigma);
            space.means.push(s.mean);
        }
        Ok(space)
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    pub fn to_standard_normal(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_len(x.len())?;
        (0..self.dim())
            .map(|i| {
                let v = match self.families[i] {
                    Family::Normal => x[i],
                    Family::LogNormal => {
                        if !(x[i] > 0.0) {
                            return Err(Error::Domain(format!(
                                "lognormal variable {} needs a positive value, got {}",
                                self.names[i], x[i]
                            )));
                        }
                        x[i].ln()
                    }
                };
                Ok((v - self.mu[i]) / self.sigma[i])
            })
            .collect()
    }

    pub fn from_standard_normal(&self, z: &[f64]) -> Vec<f64> {
        assert_eq!(z.len(), self.dim(), "point dimension does not match the space");
        (0..self.dim())
            .map(|i| {
                let v = self.mu[i] + self.sigma[i] * z[i];
                match self.families[i] {
                    Family::Normal => v,
                    Family::LogNormal => v.exp(),
                }
            })
            .collect()
    }

    /// Diagonal Jacobian `dx_i / dz_i` at `z`.
    pub fn dx_dz(&self, z: &[f64]) -> Vec<f64> {
        let x = self.from_standard_normal(z);
        (0..self.dim())
            .map(|i| match self.families[i] {
                Family::Normal => self.sigma[i],
                Family::LogNormal => self.sigma[i] * x[i],
            })
            .collect()
    }

    /// Diagonal second derivative `d2x_i / dz_i^2` at `z`.
    pub fn d2x_dz2(&self, z: &[f64]) -> Vec<f64> {
        let x = self.from_standard_normal(z);
        (0..self.dim())
            .map(|i| match self.families[i] {
                Family::Normal => 0.0,
                Family::LogNormal => self.sigma[i] * self.sigma[i] * x[i],
            })
            .collect()
    }

    fn check_len(&self, n: usize) -> Result<()> {
        if n != self.dim() {
            return Err(Error::InvalidArgument(format!("point has {n} coordinates, space has {}", self.dim())));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(name: &str, family: Family, mean: f64, dispersion: Dispersion) -> RandomVariableSpec {
        RandomVariableSpec { name: name.into(), target: Binding::Rho, family, mean, dispersion }
    }

    #[test]
    fn lognormal_closed_form_inversion() {
        let e = std::f64::consts::E;
        let (mu, sigma) = lognormal_to_normal(e, e * (e - 1.0).sqrt()).unwrap();
        assert!((sigma * sigma - 1.0).abs() < 1e-12);
        assert!((mu - 0.5).abs() < 1e-12);
    }

    #[test]
    fn lognormal_degenerate_limit() {
        let (mu, sigma) = lognormal_to_normal(1.0, 1e-9).unwrap();
        assert!(mu.abs() < 1e-15 && sigma < 1e-8);
        assert!(lognormal_to_normal(0.0, 1.0).is_err());
        assert!(lognormal_to_normal(1.0, -1.0).is_err());
    }

    #[test]
    fn lognormal_mean_round_trip() {
        for (m, s) in [(1540.0, 0.036 * 1540.0), (1.73e11, 0.03701 * 1.73e11), (0.0033, 0.04 * 0.0033)] {
            let (mu, sigma) = lognormal_to_normal(m, s).unwrap();
            let back = (mu + 0.5 * sigma * sigma).exp();
            assert!((back - m).abs() <= 1e-12 * m);
        }
    }

    #[test]
    fn affine_transform_examples() {
        let space = GaussianSpace::new(&[spec("a", Family::Normal, 10.0, Dispersion::Std(2.0))]).unwrap();
        assert_eq!(space.from_standard_normal(&[1.0]), vec![12.0]);
        assert_eq!(space.to_standard_normal(&[10.0]).unwrap(), vec![0.0]);
    }

    #[test]
    fn lognormal_rejects_non_positive_values() {
        let space = GaussianSpace::new(&[spec("rho", Family::LogNormal, 1540.0, Dispersion::Cov(0.036))]).unwrap();
        assert_eq!(space.to_standard_normal(&[0.0]).unwrap_err().class(), "domain");
    }

    #[test]
    fn limit_state_values() {
        assert_eq!(limit_state(5.0, 5.0).unwrap(), 0.0);
        let lr = 0.97 * 1193.5;
        assert_eq!(limit_state(lr, lr).unwrap(), 0.0);
        assert!((limit_state(1193.5, lr).unwrap() - (1.0 / 0.97 - 1.0)).abs() < 1e-14);
        assert!(limit_state(900.0, 1000.0).unwrap() < 0.0);
        assert!(limit_state(1.0, 0.0).is_err());
    }
}
