//! Failure probability estimators: MPP search with FORM/SORM on a
//! differentiable limit state, crude Monte Carlo, importance sampling and
//! the adaptive surrogate loop that combines them.
//!
//! Failure is `g < 0`. All searches and densities live in standard normal
//! space `z`; limit states written on physical inputs are pulled back
//! through a [`GaussianSpace`](crate::stochastic::GaussianSpace).

mod adaptive;
mod form;
mod sampling;
mod zspace;

pub use adaptive::{adaptive_ann_mcis, AdaptiveConfig, AdaptiveResult, StageRecord};
pub use form::{form_search, sorm_pf, FormOptions, IterRecord, MppResult, SormResult};
pub use sampling::{is_pf, mcs_pf, InstrumentalDensity};
pub(crate) use sampling::{chunks, draw_chunk};
pub use zspace::SurrogateLimitState;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::{Error, Result};

/// Standard normal distribution function, accurate to a few ulp.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Inverse of [`normal_cdf`]: a rational first guess polished by Newton
/// steps on the accurate distribution function.
pub fn normal_quantile(p: f64) -> f64 {
    let mut x = Normal::standard().inverse_cdf(p);
    if !x.is_finite() {
        return x;
    }
    for _ in 0..2 {
        let pdf = (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
        if pdf > 0.0 {
            x -= (normal_cdf(x) - p) / pdf;
        }
    }
    x
}

/// First-order failure probability `Phi(-beta)`.
pub fn form_pf(beta: f64) -> f64 {
    normal_cdf(-beta)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "FORM")]
    Form,
    #[serde(rename = "SORM")]
    Sorm,
    #[serde(rename = "MCS")]
    Mcs,
    #[serde(rename = "MCIS")]
    Mcis,
    #[serde(rename = "ANN-MCS")]
    AnnMcs,
    #[serde(rename = "ANN-MCIS")]
    AnnMcis,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Form => "FORM",
            Method::Sorm => "SORM",
            Method::Mcs => "MCS",
            Method::Mcis => "MCIS",
            Method::AnnMcs => "ANN-MCS",
            Method::AnnMcis => "ANN-MCIS",
        })
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "FORM" => Method::Form,
            "SORM" => Method::Sorm,
            "MCS" => Method::Mcs,
            "MCIS" => Method::Mcis,
            "ANN-MCS" => Method::AnnMcs,
            "ANN-MCIS" => Method::AnnMcis,
            _ => return Err(Error::Format(format!("unknown method tag {s:?}"))),
        })
    }
}

/// One failure probability estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReliabilityResult {
    pub method: Method,
    pub pf: f64,
    /// Reliability index, for the approximation methods.
    pub beta: Option<f64>,
    /// Estimator standard deviation; zero for FORM/SORM.
    pub std: f64,
    /// `std / pf`; infinite when no failure was observed.
    pub cov: f64,
    /// Large-sample form `1 / sqrt(N pf)` of the Monte Carlo CoV.
    pub cov_approx: Option<f64>,
    pub n_samples: usize,
    pub n_failures: usize,
    /// Calls to the expensive model (FEM) behind the estimate.
    pub n_model_calls: usize,
    pub seconds: f64,
    pub seed: Option<u64>,
    pub warnings: Vec<String>,
}

impl ReliabilityResult {
    pub fn approximation(method: Method, pf: f64, beta: f64) -> Self {
        ReliabilityResult {
            method,
            pf,
            beta: Some(beta),
            std: 0.0,
            cov: 0.0,
            cov_approx: None,
            n_samples: 0,
            n_failures: 0,
            n_model_calls: 0,
            seconds: 0.0,
            seed: None,
            warnings: Vec::new(),
        }
    }

    pub const TABLE_HEADER: &'static str = "method\tpf\tbeta\tstd\tn_samples\tn_failures\tn_fem\tseed";

    /// One tab-separated row matching [`Self::TABLE_HEADER`]; missing values
    /// are written as `-`. Wall time is left out so that reruns reproduce
    /// the row exactly.
    pub fn table_row(&self) -> String {
        let opt = |v: Option<String>| v.unwrap_or_else(|| "-".into());
        format!(
            "{}\t{:e}\t{}\t{:e}\t{}\t{}\t{}\t{}",
            self.method,
            self.pf,
            opt(self.beta.map(|b| format!("{b:e}"))),
            self.std,
            self.n_samples,
            self.n_failures,
            self.n_model_calls,
            opt(self.seed.map(|s| s.to_string()))
        )
    }

    /// Human-readable multi-line summary.
    pub fn report(&self) -> String {
        let mut s = format!("method      {}\nP_f         {:.6}\n", self.method, self.pf);
        if let Some(b) = self.beta {
            s.push_str(&format!("beta        {b:.6}\n"));
        }
        if self.n_samples > 0 {
            s.push_str(&format!(
                "std         {:.3e}\nCoV         {:.4}\nsamples     {} ({} failures)\n",
                self.std, self.cov, self.n_samples, self.n_failures
            ));
        }
        s.push_str(&format!("FEM calls   {}\nseconds     {:.3}\n", self.n_model_calls, self.seconds));
        if let Some(seed) = self.seed {
            s.push_str(&format!("seed        {seed}\n"));
        }
        for w in &self.warnings {
            s.push_str(&format!("warning     {w}\n"));
        }
        s
    }
}

/// A row of a result table read back from text.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub method: Method,
    pub pf: f64,
    pub beta: Option<f64>,
    pub std: f64,
    pub n_samples: usize,
    pub n_failures: usize,
    pub n_fem: usize,
    pub seed: Option<u64>,
}

/// Parses rows written by [`ReliabilityResult::table_row`].
pub fn parse_result_table(text: &str) -> Result<Vec<ResultRow>> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    if lines.next() != Some(ReliabilityResult::TABLE_HEADER) {
        return Err(Error::Format("result table lacks its header".into()));
    }
    let bad = |l: &str| Error::Format(format!("malformed result row {l:?}"));
    lines
        .map(|l| {
            let c: Vec<&str> = l.split('\t').collect();
            if c.len() != 8 {
                return Err(bad(l));
            }
            let num = |s: &str| s.parse::<f64>().map_err(|_| bad(l));
            let int = |s: &str| s.parse::<usize>().map_err(|_| bad(l));
            Ok(ResultRow {
                method: c[0].parse()?,
                pf: num(c[1])?,
                beta: if c[2] == "-" { None } else { Some(num(c[2])?) },
                std: num(c[3])?,
                n_samples: int(c[4])?,
                n_failures: int(c[5])?,
                n_fem: int(c[6])?,
                seed: if c[7] == "-" { None } else { Some(c[7].parse().map_err(|_| bad(l))?) },
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cdf_reference_values() {
        assert_eq!(normal_cdf(0.0), 0.5);
        assert!((normal_cdf(-1.96) - 0.024_997_895_148_220_435).abs() < 1e-15);
        assert!((normal_cdf(-3.0) - 1.349_898_031_630_094_6e-3).abs() < 1e-16);
        assert!((normal_cdf(1.0) - 0.841_344_746_068_542_9).abs() < 1e-15);
        assert!((normal_cdf(-8.0) - 6.220_960_574_271_785e-16).abs() < 1e-28);
    }

    #[test]
    fn quantile_inverts_cdf() {
        for p in [1e-6, 0.0878, 0.5, 0.9] {
            assert!((normal_cdf(normal_quantile(p)) - p).abs() < 1e-12 * p.max(1e-3));
        }
    }

    #[test]
    fn table_rows_parse_back() {
        let mut r = ReliabilityResult::approximation(Method::Form, form_pf(1.3), 1.3);
        r.seed = Some(7);
        let text = format!("{}\n{}\n", ReliabilityResult::TABLE_HEADER, r.table_row());
        let rows = parse_result_table(&text).unwrap();
        assert_eq!(rows[0].method, Method::Form);
        assert_eq!(rows[0].pf, r.pf);
        assert_eq!(rows[0].beta, Some(1.3));
        assert_eq!(rows[0].seed, Some(7));
        for m in ["FORM", "SORM", "MCS", "MCIS", "ANN-MCS", "ANN-MCIS"] {
            assert_eq!(m.parse::<Method>().unwrap().to_string(), m);
        }
    }
}
