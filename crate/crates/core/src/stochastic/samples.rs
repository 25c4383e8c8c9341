use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::GaussianSpace;
use crate::{Error, Result};

/// How a sample set was generated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    LhsGlobal,
    LhsAroundMpp,
    Mc,
    Is,
    Mixed,
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Provenance::LhsGlobal => "lhs-global",
            Provenance::LhsAroundMpp => "lhs-around-mpp",
            Provenance::Mc => "mc",
            Provenance::Is => "is",
            Provenance::Mixed => "mixed",
        })
    }
}

impl FromStr for Provenance {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "lhs-global" => Provenance::LhsGlobal,
            "lhs-around-mpp" => Provenance::LhsAroundMpp,
            "mc" => Provenance::Mc,
            "is" => Provenance::Is,
            "mixed" => Provenance::Mixed,
            _ => return Err(Error::Format(format!("unknown sample provenance {s:?}"))),
        })
    }
}

/// Design points in physical space with their limit-state values.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    pub names: Vec<String>,
    /// One row per sample.
    pub x: Vec<Vec<f64>>,
    /// Empty until evaluated, then one value per row.
    pub g: Vec<f64>,
    pub provenance: Provenance,
}

impl SampleSet {
    pub fn new(names: Vec<String>, x: Vec<Vec<f64>>, provenance: Provenance) -> Result<Self> {
        for (i, row) in x.iter().enumerate() {
            if row.len() != names.len() {
                return Err(Error::InvalidArgument(format!(
                    "sample {i} has {} values for {} variables",
                    row.len(),
                    names.len()
                )));
            }
            if row.iter().any(|v| v.is_nan()) {
                return Err(Error::InvalidArgument(format!("sample {i} contains NaN")));
            }
        }
        Ok(SampleSet { names, x, g: Vec::new(), provenance })
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.names.len()
    }

    pub fn is_evaluated(&self) -> bool {
        !self.x.is_empty() && self.g.len() == self.x.len()
    }

    pub fn set_g(&mut self, g: Vec<f64>) -> Result<()> {
        if g.len() != self.x.len() {
            return Err(Error::InvalidArgument(format!("{} limit-state values for {} samples", g.len(), self.x.len())));
        }
        if g.iter().any(|v| v.is_nan()) {
            return Err(Error::InvalidArgument("limit-state values contain NaN".into()));
        }
        self.g = g;
        Ok(())
    }

    /// Evaluates `f` on every row in parallel; results keep the row order.
    pub fn evaluate<F>(&mut self, f: F) -> Result<()>
    where
        F: Fn(&[f64]) -> Result<f64> + Sync,
    {
        let g = self.x.par_iter().map(|row| f(row)).collect::<Result<Vec<_>>>()?;
        self.set_g(g)
    }

    /// Appends the rows of `other`; both sets must be evaluated or neither.
    pub fn extend(&mut self, other: &SampleSet) -> Result<()> {
        if other.names != self.names {
            return Err(Error::InvalidArgument("sample sets have different variables".into()));
        }
        if self.g.is_empty() != other.g.is_empty() && !self.x.is_empty() && !other.x.is_empty() {
            return Err(Error::InvalidArgument("cannot mix evaluated and unevaluated samples".into()));
        }
        if self.x.is_empty() {
            self.provenance = other.provenance;
        } else if self.provenance != other.provenance {
            self.provenance = Provenance::Mixed;
        }
        self.x.extend(other.x.iter().cloned());
        self.g.extend(other.g.iter().copied());
        Ok(())
    }

    /// Tab-separated table: a provenance comment, a header of variable names
    /// (plus `g` when evaluated) and one row per sample. Values are written
    /// in shortest round-trip form.
    pub fn to_table(&self) -> String {
        let evaluated = self.is_evaluated();
        let mut s = format!("# provenance: {}\n", self.provenance);
        s.push_str(&self.names.join("\t"));
        if evaluated {
            s.push_str("\tg");
        }
        s.push('\n');
        for (i, row) in self.x.iter().enumerate() {
            let mut cells: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
            if evaluated {
                cells.push(format!("{:e}", self.g[i]));
            }
            s.push_str(&cells.join("\t"));
            s.push('\n');
        }
        s
    }

    pub fn from_table(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let first = lines.next().ok_or_else(|| Error::Format("empty sample table".into()))?;
        let provenance = first
            .strip_prefix("# provenance:")
            .ok_or_else(|| Error::Format("sample table lacks a provenance line".into()))?
            .trim()
            .parse()?;
        let header: Vec<String> = lines
            .next()
            .ok_or_else(|| Error::Format("sample table lacks a header".into()))?
            .split('\t')
            .map(str::to_string)
            .collect();
        let evaluated = header.last().map(String::as_str) == Some("g");
        let n_vars = header.len() - usize::from(evaluated);
        let mut x = Vec::new();
        let mut g = Vec::new();
        for (i, line) in lines.enumerate() {
            let vals = line
                .split('\t')
                .map(|v| v.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::Format(format!("sample row {}: {e}", i + 1)))?;
            if vals.len() != header.len() {
                return Err(Error::Format(format!("sample row {} has {} columns, expected {}", i + 1, vals.len(), header.len())));
            }
            if evaluated {
                g.push(vals[n_vars]);
            }
            x.push(vals[..n_vars].to_vec());
        }
        let mut set = SampleSet::new(header[..n_vars].to_vec(), x, provenance)?;
        if evaluated {
            set.set_g(g)?;
        }
        Ok(set)
    }
}

/// Extent of a Latin hypercube design in standard normal space.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LhsOptions {
    /// Center of a local design; `None` gives a global design.
    pub center: Option<Vec<f64>>,
    /// Half-width per variable in standard deviations (default 1).
    pub halfwidth: Option<Vec<f64>>,
}

/// Probability mass covered by a global design: `[-4, 4]` in z.
const GLOBAL_Z: f64 = 4.0;

/// Latin hypercube design with one sample per stratum and variable.
///
/// A global design cuts the normal distribution truncated to `|z| <= 4`
/// into `n` equiprobable strata; a local design cuts the box
/// `center +- halfwidth` into `n` equal-width strata. Columns are paired by
/// independent random permutations.
pub fn lhs_sample(n: usize, space: &GaussianSpace, options: &LhsOptions, seed: u64) -> Result<SampleSet> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!("a Latin hypercube needs at least 2 samples, got {n}")));
    }
    let dim = space.dim();
    for (what, v) in [("center", &options.center), ("halfwidth", &options.halfwidth)] {
        if let Some(v) = v {
            if v.len() != dim {
                return Err(Error::InvalidArgument(format!("{what} has {} entries for {dim} variables", v.len())));
            }
        }
    }
    if let Some(h) = &options.halfwidth {
        if h.iter().any(|w| !(*w > 0.0)) {
            return Err(Error::InvalidArgument("halfwidths must be positive".into()));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let std_normal = Normal::standard();
    let lo_p = std_normal.cdf(-GLOBAL_Z);
    let hi_p = std_normal.cdf(GLOBAL_Z);
    let mut z = vec![vec![0.0; dim]; n];
    let mut perm: Vec<usize> = (0..n).collect();
    for j in 0..dim {
        perm.shuffle(&mut rng);
        for (i, &stratum) in perm.iter().enumerate() {
            let u = (stratum as f64 + rng.random::<f64>()) / n as f64;
            z[i][j] = match &options.center {
                None => std_normal.inverse_cdf(lo_p + u * (hi_p - lo_p)),
                Some(c) => {
                    let w = options.halfwidth.as_ref().map_or(1.0, |h| h[j]);
                    c[j] + w * (2.0 * u - 1.0)
                }
            };
        }
    }
    let provenance = if options.center.is_some() { Provenance::LhsAroundMpp } else { Provenance::LhsGlobal };
    let x = z.iter().map(|zi| space.from_standard_normal(zi)).collect();
    SampleSet::new(space.names.clone(), x, provenance)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stochastic::{Binding, Dispersion, Family, RandomVariableSpec};

    fn unit_space(dim: usize) -> GaussianSpace {
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
    fn one_sample_per_equiprobable_stratum() {
        let space = unit_space(1);
        let s = lhs_sample(10, &space, &LhsOptions::default(), 3).unwrap();
        let normal = Normal::standard();
        let (lo, hi) = (normal.cdf(-4.0), normal.cdf(4.0));
        let mut bins: Vec<usize> =
            s.x.iter().map(|r| (((normal.cdf(r[0]) - lo) / (hi - lo)) * 10.0).floor() as usize).collect();
        bins.sort();
        assert_eq!(bins, (0..10).collect::<Vec<_>>());
    }

    #[test]
    fn local_design_stays_in_box() {
        let space = unit_space(4);
        let opts = LhsOptions { center: Some(vec![1.0; 4]), halfwidth: None };
        let s = lhs_sample(50, &space, &opts, 9).unwrap();
        assert_eq!(s.provenance, Provenance::LhsAroundMpp);
        assert!(s.x.iter().flatten().all(|v| (0.0..=2.0).contains(v)));
    }

    #[test]
    fn table_round_trip_is_exact() {
        let space = unit_space(3);
        let mut s = lhs_sample(7, &space, &LhsOptions::default(), 1).unwrap();
        assert_eq!(SampleSet::from_table(&s.to_table()).unwrap(), s);
        s.evaluate(|x| Ok(x.iter().sum::<f64>() / 3.0)).unwrap();
        assert_eq!(SampleSet::from_table(&s.to_table()).unwrap(), s);
        assert!(SampleSet::from_table("z0\tg\n1\t2\n").is_err());
    }

    #[test]
    fn rejects_tiny_designs_and_bad_rows() {
        assert!(lhs_sample(1, &unit_space(2), &LhsOptions::default(), 0).is_err());
        assert!(SampleSet::new(vec!["a".into()], vec![vec![f64::NAN]], Provenance::Mc).is_err());
    }
}
