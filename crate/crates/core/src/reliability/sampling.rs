use std::time::Instant;

use log::warn;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Method, ReliabilityResult};
use crate::stochastic::GaussianSpace;
use crate::{Error, Result};

/// Samples per independent random stream. Each chunk draws from its own
/// ChaCha stream, so results do not depend on the thread count.
const CHUNK: usize = 1024;

/// Gaussian sampling density in z: `z = center + scale * xi`, `xi ~ N(0, I)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstrumentalDensity {
    pub center: Vec<f64>,
    /// Per-variable standard deviation multipliers.
    pub scale: Vec<f64>,
}

impl InstrumentalDensity {
    /// Unit-variance density shifted to `center`.
    pub fn at(center: Vec<f64>) -> Self {
        let scale = vec![1.0; center.len()];
        InstrumentalDensity { center, scale }
    }

    /// The standard normal itself.
    pub fn standard(dim: usize) -> Self {
        Self::at(vec![0.0; dim])
    }

    pub fn validate(&self) -> Result<()> {
        if self.center.len() != self.scale.len() || self.center.is_empty() {
            return Err(Error::InvalidArgument("instrumental density center and scale differ in length".into()));
        }
        if self.scale.iter().any(|s| !(*s > 0.0 && s.is_finite())) || self.center.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidArgument("instrumental density needs finite center and positive widths".into()));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    /// `ln(phi(z) / h(z))`.
    pub fn log_weight(&self, z: &[f64]) -> f64 {
        let mut lw = 0.0;
        for ((z, c), s) in z.iter().zip(&self.center).zip(&self.scale) {
            let u = (z - c) / s;
            lw += 0.5 * (u * u - z * z) + s.ln();
        }
        lw
    }
}

/// Draws chunk `k` of a sample stream: `len` points of the density.
pub(crate) fn draw_chunk(h: &InstrumentalDensity, seed: u64, k: usize, len: usize) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(k as u64);
    (0..len)
        .map(|_| {
            h.center
                .iter()
                .zip(&h.scale)
                .map(|(c, s)| c + s * Distribution::<f64>::sample(&StandardNormal, &mut rng))
                .collect()
        })
        .collect()
}

pub(crate) fn chunks(n: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..n.div_ceil(CHUNK)).map(move |k| (k, CHUNK.min(n - k * CHUNK)))
}

struct Sums {
    w: f64,
    w2: f64,
    failures: usize,
}

fn weighted_sums<G>(g: &G, space: &GaussianSpace, h: &InstrumentalDensity, n: usize, seed: u64) -> Sums
where
    G: Fn(&[f64]) -> f64 + Sync,
{
    let parts: Vec<Sums> = chunks(n)
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|(k, len)| {
            let mut s = Sums { w: 0.0, w2: 0.0, failures: 0 };
            for z in draw_chunk(h, seed, k, len) {
                if g(&space.from_standard_normal(&z)) < 0.0 {
                    let w = h.log_weight(&z).exp();
                    s.w += w;
                    s.w2 += w * w;
                    s.failures += 1;
                }
            }
            s
        })
        .collect();
    parts.into_iter().fold(Sums { w: 0.0, w2: 0.0, failures: 0 }, |a, b| Sums {
        w: a.w + b.w,
        w2: a.w2 + b.w2,
        failures: a.failures + b.failures,
    })
}

/// Crude Monte Carlo estimate `(1/N) sum I(g(x_i) < 0)`, `x_i ~ f`.
///
/// `g` acts on physical coordinates. The coefficient of variation is
/// `sqrt((1 - pf) / (N pf))`; its large-sample form `1 / sqrt(N pf)` is
/// kept alongside.
pub fn mcs_pf<G>(g: &G, space: &GaussianSpace, n: usize, seed: u64) -> Result<ReliabilityResult>
where
    G: Fn(&[f64]) -> f64 + Sync,
{
    if n < 100 {
        return Err(Error::InvalidArgument(format!("Monte Carlo needs at least 100 samples, got {n}")));
    }
    let start = Instant::now();
    let s = weighted_sums(g, space, &InstrumentalDensity::standard(space.dim()), n, seed);
    let pf = s.failures as f64 / n as f64;
    let mut warnings = Vec::new();
    let (cov, cov_approx) = if s.failures == 0 {
        warnings.push("no failures observed; coefficient of variation is infinite".to_string());
        (f64::INFINITY, f64::INFINITY)
    } else {
        (((1.0 - pf) / (n as f64 * pf)).sqrt(), 1.0 / (n as f64 * pf).sqrt())
    };
    Ok(ReliabilityResult {
        method: Method::Mcs,
        pf,
        beta: None,
        std: if cov.is_finite() { cov * pf } else { 0.0 },
        cov,
        cov_approx: Some(cov_approx),
        n_samples: n,
        n_failures: s.failures,
        n_model_calls: 0,
        seconds: start.elapsed().as_secs_f64(),
        seed: Some(seed),
        warnings,
    })
}

/// Importance sampling estimate `(1/N) sum I(g(x_i) < 0) f(x_i) / h(x_i)`
/// with `x_i ~ h`, and the variance
/// `(1/(N-1)) ((1/N) sum I w_i^2 - pf^2)`.
///
/// A warning is recorded when the effective number of failure samples,
/// `(sum I w)^2 / sum I w^2`, falls below `N / 100`.
pub fn is_pf<G>(g: &G, space: &GaussianSpace, h: &InstrumentalDensity, n: usize, seed: u64) -> Result<ReliabilityResult>
where
    G: Fn(&[f64]) -> f64 + Sync,
{
    h.validate()?;
    if h.dim() != space.dim() {
        return Err(Error::InvalidArgument(format!("density has {} variables, space has {}", h.dim(), space.dim())));
    }
    if n < 2 {
        return Err(Error::InvalidArgument("importance sampling needs at least 2 samples".into()));
    }
    let start = Instant::now();
    let s = weighted_sums(g, space, h, n, seed);
    let nf = n as f64;
    let pf = s.w / nf;
    let var = ((s.w2 / nf - pf * pf) / (nf - 1.0)).max(0.0);
    let std = var.sqrt();
    let mut warnings = Vec::new();
    let ess = if s.w2 > 0.0 { s.w * s.w / s.w2 } else { 0.0 };
    if ess < 0.01 * nf {
        let msg = format!("degenerate importance weights: effective sample size {ess:.1} of {n}");
        warn!("{msg}");
        warnings.push(msg);
    }
    Ok(ReliabilityResult {
        method: Method::Mcis,
        pf,
        beta: None,
        std,
        cov: if pf > 0.0 { std / pf } else { f64::INFINITY },
        cov_approx: None,
        n_samples: n,
        n_failures: s.failures,
        n_model_calls: 0,
        seconds: start.elapsed().as_secs_f64(),
        seed: Some(seed),
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stochastic::{Binding, Dispersion, Family, RandomVariableSpec};

    fn unit(dim: usize) -> GaussianSpace {
        let specs: Vec<_> = (0..dim)
            .map(|i| RandomVariableSpec {
                name: format!("z{i}"),
                target: Binding::Rho,
                family: Family::Normal,
                mean: 0.0,
                dispersion: Dispersion::Std(1.0),
            })
            .collect();
        GaussianSpace::new(&specs).unwrap()
    }

    #[test]
    fn certain_failure() {
        let r = mcs_pf(&|_: &[f64]| -1.0, &unit(2), 1000, 1).unwrap();
        assert_eq!(r.pf, 1.0);
        assert_eq!(r.cov, 0.0);
    }

    #[test]
    fn no_failure_has_infinite_cov() {
        let r = mcs_pf(&|_: &[f64]| 1.0, &unit(2), 1000, 1).unwrap();
        assert_eq!(r.pf, 0.0);
        assert!(r.cov.is_infinite());
        assert!(!r.warnings.is_empty());
    }

    #[test]
    fn standard_density_has_unit_weights() {
        let h = InstrumentalDensity::standard(3);
        assert_eq!(h.log_weight(&[0.3, -2.0, 1.1]), 0.0);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(mcs_pf(&|_: &[f64]| 1.0, &unit(1), 99, 1).is_err());
        let h = InstrumentalDensity { center: vec![0.0], scale: vec![0.0] };
        assert!(is_pf(&|_: &[f64]| 1.0, &unit(1), &h, 100, 1).is_err());
        assert!(is_pf(&|_: &[f64]| 1.0, &unit(2), &InstrumentalDensity::standard(1), 100, 1).is_err());
    }
}
