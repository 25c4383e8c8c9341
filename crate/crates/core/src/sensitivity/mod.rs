//! Importance of the random inputs for the failure event: Garson's weight
//! partition of a trained net and variance-based total-effect indices of
//! the failure indicator `I(g < 0)`.

use std::fmt;

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::reliability::{chunks, draw_chunk, InstrumentalDensity};
use crate::stochastic::{Binding, GaussianSpace, RandomVariableSpec};
use crate::surrogate::SurrogateNet;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SensitivityMethod {
    Garson,
    #[serde(rename = "TotalEffect-MCS")]
    TotalEffectMcs,
    #[serde(rename = "TotalEffect-IS")]
    TotalEffectIs,
}

impl fmt::Display for SensitivityMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SensitivityMethod::Garson => "Garson",
            SensitivityMethod::TotalEffectMcs => "TotalEffect-MCS",
            SensitivityMethod::TotalEffectIs => "TotalEffect-IS",
        })
    }
}

/// Named sets of input columns reported together.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grouping {
    pub groups: Vec<(String, Vec<usize>)>,
}

impl Grouping {
    /// Every input on its own.
    pub fn singletons(names: &[String]) -> Self {
        Grouping { groups: names.iter().enumerate().map(|(i, n)| (n.clone(), vec![i])).collect() }
    }

    /// Pools all ply thicknesses into `thickness` and all ply angle
    /// offsets into `angle`; other variables stay alone.
    pub fn by_binding(specs: &[RandomVariableSpec]) -> Self {
        let mut groups: Vec<(String, Vec<usize>)> = Vec::new();
        for (i, s) in specs.iter().enumerate() {
            let label = match s.target {
                Binding::Thickness(_) => "thickness".to_string(),
                Binding::Angle(_) => "angle".to_string(),
                _ => s.name.clone(),
            };
            match groups.iter_mut().find(|(l, _)| *l == label) {
                Some((_, members)) => members.push(i),
                None => groups.push((label, vec![i])),
            }
        }
        Grouping { groups }
    }

    /// Checks that the groups partition `0..dim`.
    pub fn validate(&self, dim: usize) -> Result<()> {
        let mut seen = vec![false; dim];
        for (label, members) in &self.groups {
            if members.is_empty() {
                return Err(Error::InvalidArgument(format!("group {label:?} is empty")));
            }
            for &m in members {
                if m >= dim || seen[m] {
                    return Err(Error::InvalidArgument(format!("group {label:?} repeats or exceeds input {m}")));
                }
                seen[m] = true;
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::InvalidArgument("groups do not cover every input".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityReport {
    pub method: SensitivityMethod,
    /// Variable or group labels.
    pub labels: Vec<String>,
    pub indices: Vec<f64>,
    /// Statistical standard error per index, for sampling estimators.
    pub std: Option<Vec<f64>>,
    pub warnings: Vec<String>,
}

impl SensitivityReport {
    /// Labels ordered by decreasing index.
    pub fn ranking(&self) -> Vec<&str> {
        let mut order: Vec<usize> = (0..self.labels.len()).collect();
        order.sort_by(|&a, &b| self.indices[b].total_cmp(&self.indices[a]));
        order.into_iter().map(|i| self.labels[i].as_str()).collect()
    }

    pub fn index_of(&self, label: &str) -> Option<f64> {
        self.labels.iter().position(|l| l == label).map(|i| self.indices[i])
    }

    /// Sums Garson indices within each group.
    pub fn pooled(&self, grouping: &Grouping) -> Result<SensitivityReport> {
        grouping.validate(self.indices.len())?;
        Ok(SensitivityReport {
            method: self.method,
            labels: grouping.groups.iter().map(|(l, _)| l.clone()).collect(),
            indices: grouping.groups.iter().map(|(_, m)| m.iter().map(|&i| self.indices[i]).sum()).collect(),
            std: None,
            warnings: self.warnings.clone(),
        })
    }

    pub const TABLE_HEADER: &'static str = "label\tindex\tstd\tmethod";

    /// Tab-separated `label, index, std, method` rows.
    pub fn to_table(&self) -> String {
        let mut s = format!("{}\n", Self::TABLE_HEADER);
        for (i, l) in self.labels.iter().enumerate() {
            let std = self.std.as_ref().map_or_else(|| "-".to_string(), |v| format!("{:e}", v[i]));
            s.push_str(&format!("{l}\t{:e}\t{std}\t{}\n", self.indices[i], self.method));
        }
        s
    }

    /// Bar-chart data: rank, label and index, largest first.
    pub fn bar_chart(&self) -> String {
        let mut s = String::from("rank\tlabel\tindex\n");
        for (r, l) in self.ranking().into_iter().enumerate() {
            s.push_str(&format!("{}\t{l}\t{:e}\n", r + 1, self.index_of(l).unwrap_or(f64::NAN)));
        }
        s
    }
}

/// Garson's partition of the connection weights.
///
/// With `P_ij = |w_out,i| |W_ij|` for hidden unit `i` and input `j`, each
/// unit's share is spread over the inputs as `Q_ij = P_ij / sum_j P_ij`;
/// input `j` collects `S_j = sum_i Q_ij` and the index is
/// `SI_j = S_j / sum_j S_j`. Units with no weight to share are left out.
pub fn garson_si(net: &SurrogateNet) -> Result<SensitivityReport> {
    net.validate()?;
    let (n_in, n_hidden) = (net.inputs, net.hidden);
    let mut s = vec![0.0; n_in];
    let mut active = 0;
    for i in 0..n_hidden {
        let row = &net.w_hidden[i * n_in..(i + 1) * n_in];
        let p: Vec<f64> = row.iter().map(|w| net.w_out[i].abs() * w.abs()).collect();
        let total: f64 = p.iter().sum();
        if !(total > 0.0) {
            continue;
        }
        active += 1;
        for (sj, pj) in s.iter_mut().zip(&p) {
            *sj += pj / total;
        }
    }
    if active == 0 {
        return Err(Error::InvalidArgument("every hidden unit of the net is disconnected".into()));
    }
    let total: f64 = s.iter().sum();
    let labels = if net.meta.input_names.len() == n_in {
        net.meta.input_names.clone()
    } else {
        (0..n_in).map(|j| format!("x{}", j + 1)).collect()
    };
    let mut warnings = Vec::new();
    if active < n_hidden {
        warnings.push(format!("{} disconnected hidden units ignored", n_hidden - active));
    }
    Ok(SensitivityReport {
        method: SensitivityMethod::Garson,
        labels,
        indices: s.iter().map(|v| v / total).collect(),
        std: None,
        warnings,
    })
}

/// Total-effect indices of the failure indicator by the Jansen
/// pick-freeze estimator.
///
/// Two independent sample matrices `A` and `B` are drawn in z. For group
/// `u`, `AB_u` is `A` with the columns of `u` taken from `B`, and
///
/// ```text
/// S_T,u = E[(Y(A) - Y(AB_u))^2] / (2 Var Y),   Y = I(g(x) < 0)
/// ```
///
/// When a density `h` is supplied both matrices are drawn from it and each
/// term is weighted by `f(A)/h(A)` times the density ratio of the swapped
/// columns. `A` is then the very stream [`is_pf`](crate::reliability::is_pf)
/// draws with the same `seed`, so its samples are reused; `B` comes from
/// `seed + 1`. `g` acts on physical coordinates.
pub fn total_effect_indices<G>(
    g: &G,
    space: &GaussianSpace,
    grouping: &Grouping,
    n: usize,
    seed: u64,
    density: Option<&InstrumentalDensity>,
) -> Result<SensitivityReport>
where
    G: Fn(&[f64]) -> f64 + Sync,
{
    let dim = space.dim();
    grouping.validate(dim)?;
    if n < 2 {
        return Err(Error::InvalidArgument("total-effect estimate needs at least 2 samples".into()));
    }
    let standard = InstrumentalDensity::standard(dim);
    let h = match density {
        Some(h) => {
            h.validate()?;
            if h.dim() != dim {
                return Err(Error::InvalidArgument("density dimension differs from the space".into()));
            }
            h
        }
        None => &standard,
    };
    let n_groups = grouping.groups.len();
    let fails = |z: &[f64]| f64::from(u8::from(g(&space.from_standard_normal(z)) < 0.0));
    // Per-coordinate log density ratio ln(phi(z_i) / h_i(z_i)).
    let log_ratio = |i: usize, z: f64| {
        let u = (z - h.center[i]) / h.scale[i];
        0.5 * (u * u - z * z) + h.scale[i].ln()
    };

    // Per chunk: sum w Y, then for each group sum t and sum t^2 with
    // t = w_A w_Bu (Y(A) - Y(AB_u))^2.
    let parts: Vec<(f64, Vec<f64>, Vec<f64>)> = chunks(n)
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|(k, len)| {
            let a = draw_chunk(h, seed, k, len);
            let b = draw_chunk(h, seed.wrapping_add(1), k, len);
            let mut wy = 0.0;
            let mut t1 = vec![0.0; n_groups];
            let mut t2 = vec![0.0; n_groups];
            for (za, zb) in a.iter().zip(&b) {
                let wa = h.log_weight(za).exp();
                let ya = fails(za);
                wy += wa * ya;
                for (gi, (_, members)) in grouping.groups.iter().enumerate() {
                    let mut mixed = za.clone();
                    let mut lw = 0.0;
                    for &m in members {
                        mixed[m] = zb[m];
                        lw += log_ratio(m, zb[m]);
                    }
                    let d = ya - fails(&mixed);
                    if d != 0.0 {
                        let t = wa * lw.exp() * d * d;
                        t1[gi] += t;
                        t2[gi] += t * t;
                    }
                }
            }
            (wy, t1, t2)
        })
        .collect();

    let nf = n as f64;
    let mut wy = 0.0;
    let mut t1 = vec![0.0; n_groups];
    let mut t2 = vec![0.0; n_groups];
    for (a, c, d) in parts {
        wy += a;
        for gi in 0..n_groups {
            t1[gi] += c[gi];
            t2[gi] += d[gi];
        }
    }
    let p = wy / nf;
    let var_y = p * (1.0 - p);
    let mut warnings = Vec::new();
    if p * nf < 50.0 {
        let msg = format!("only {:.1} expected failures among {n} samples; indices are unreliable", p * nf);
        warn!("{msg}");
        warnings.push(msg);
    }
    if !(var_y > 0.0) {
        return Err(Error::InsufficientData("failure indicator has no variance on the sample".into()));
    }
    let mut indices = Vec::with_capacity(n_groups);
    let mut std = Vec::with_capacity(n_groups);
    for gi in 0..n_groups {
        let mean = t1[gi] / nf;
        let var_t = (t2[gi] / nf - mean * mean).max(0.0) / (nf - 1.0);
        indices.push(mean / (2.0 * var_y));
        std.push(var_t.sqrt() / (2.0 * var_y));
    }
    Ok(SensitivityReport {
        method: if density.is_some() { SensitivityMethod::TotalEffectIs } else { SensitivityMethod::TotalEffectMcs },
        labels: grouping.groups.iter().map(|(l, _)| l.clone()).collect(),
        indices,
        std: Some(std),
        warnings,
    })
}
