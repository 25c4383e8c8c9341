use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::{form_pf, normal_quantile};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FormOptions {
    /// Stop when `||z_{k+1} - z_k|| <= epsilon`.
    pub epsilon: f64,
    pub max_iter: usize,
}

impl Default for FormOptions {
    fn default() -> Self {
        FormOptions { epsilon: 1e-3, max_iter: 50 }
    }
}

/// State at one iterate of the MPP search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterRecord {
    pub z: Vec<f64>,
    pub g: f64,
    pub grad_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MppResult {
    pub z: Vec<f64>,
    /// Physical coordinates; filled by callers that know the transform.
    pub x: Vec<f64>,
    pub beta: f64,
    /// Unit gradient direction at the final iterate.
    pub a: Vec<f64>,
    /// Limit state and gradient norm at the final iterate.
    pub g: f64,
    pub grad_norm: f64,
    /// Limit state at the origin; negative when the mean point fails.
    pub g_origin: f64,
    pub trace: Vec<IterRecord>,
    pub converged: bool,
}

impl MppResult {
    /// Residual `||z + beta a||` of the optimality condition.
    pub fn stationarity_residual(&self) -> f64 {
        self.z.iter().zip(&self.a).map(|(z, a)| (z + self.beta * a).powi(2)).sum::<f64>().sqrt()
    }

    /// `Phi(-beta)`, or `Phi(beta)` when the origin lies in the failure set.
    pub fn form_pf(&self) -> f64 {
        if self.g_origin < 0.0 {
            form_pf(-self.beta)
        } else {
            form_pf(self.beta)
        }
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Hasofer-Lind-Rackwitz-Fiessler search for the most probable failure
/// point, starting at the origin.
///
/// Each step linearizes `g` at `z_k` and jumps to the closest point of the
/// zero set of the linearization,
/// `z_{k+1} = -a_k (beta_k + g(z_k) / ||grad g(z_k)||)` with
/// `beta_k = -a_k . z_k`. If `max_iter` runs out the last iterate is
/// returned with `converged = false`.
pub fn form_search<F>(mut g_and_grad: F, dim: usize, options: &FormOptions) -> Result<MppResult>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    if dim == 0 {
        return Err(Error::InvalidArgument("MPP search needs at least one variable".into()));
    }
    if !(options.epsilon > 0.0) || options.max_iter == 0 {
        return Err(Error::InvalidArgument("MPP search needs epsilon > 0 and max_iter >= 1".into()));
    }
    let mut z = vec![0.0; dim];
    let mut trace = Vec::new();
    let mut converged = false;
    let mut g_origin = f64::NAN;
    let mut iteration = 0;
    let (g, a, grad_norm) = loop {
        let (g, grad) = g_and_grad(&z)?;
        if grad.len() != dim {
            return Err(Error::InvalidArgument(format!("gradient has {} entries for {dim} variables", grad.len())));
        }
        let gn = norm(&grad);
        trace.push(IterRecord { z: z.clone(), g, grad_norm: gn });
        if iteration == 0 {
            g_origin = g;
        }
        if !(gn >= 1e-12) {
            return Err(Error::ZeroGradient { iteration, norm: gn });
        }
        let a: Vec<f64> = grad.iter().map(|v| v / gn).collect();
        if converged || iteration == options.max_iter {
            break (g, a, gn);
        }
        let beta_k = -a.iter().zip(&z).map(|(a, z)| a * z).sum::<f64>();
        let step = beta_k + g / gn;
        let next: Vec<f64> = a.iter().map(|a| -a * step).collect();
        let change = norm(&next.iter().zip(&z).map(|(n, z)| n - z).collect::<Vec<_>>());
        z = next;
        converged = change <= options.epsilon;
        iteration += 1;
    };
    let beta = norm(&z);
    Ok(MppResult { x: z.clone(), z, beta, a, g, grad_norm, g_origin, trace, converged })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SormResult {
    pub pf: f64,
    /// Generalized index `-Phi^{-1}(pf)`.
    pub beta: f64,
    /// Principal curvatures of the limit surface at the MPP.
    pub curvatures: Vec<f64>,
    /// Set when some `1 + beta kappa <= 0`; `pf` is then the FORM value.
    pub singular: bool,
}

/// Breitung's asymptotic correction
/// `pf = Phi(-beta) prod_i (1 + beta kappa_i)^(-1/2)`.
///
/// The curvatures are the eigenvalues of the Hessian (in z) projected onto
/// the tangent plane of the limit surface at the MPP and divided by the
/// gradient norm; a positive curvature bends the surface away from the
/// origin and shrinks the failure set. `hessian` is row-major.
pub fn sorm_pf(mpp: &MppResult, hessian: &[f64]) -> Result<SormResult> {
    let n = mpp.z.len();
    if hessian.len() != n * n {
        return Err(Error::InvalidArgument(format!("Hessian has {} entries, expected {}", hessian.len(), n * n)));
    }
    if !(mpp.beta > 0.0) {
        return Err(Error::InvalidArgument("second-order correction needs beta > 0".into()));
    }
    let h = DMatrix::from_row_slice(n, n, hessian);
    if (&h - h.transpose()).amax() > 1e-10 * h.amax().max(1.0) {
        return Err(Error::InvalidArgument("Hessian is not symmetric".into()));
    }
    let first = mpp.form_pf();
    let curvatures = if n == 1 {
        Vec::new()
    } else {
        // Householder reflection sending a to a coordinate axis; its other
        // columns span the tangent plane.
        let a = DVector::from_column_slice(&mpp.a);
        let k = a.iamax();
        let mut v = a.clone();
        v[k] -= a[k].signum();
        let vv = v.dot(&v);
        let q = if vv < 1e-300 { DMatrix::identity(n, n) } else { DMatrix::identity(n, n) - (&v * v.transpose()) * (2.0 / vv) };
        let rotated = q.transpose() * &h * &q;
        let keep: Vec<usize> = (0..n).filter(|&i| i != k).collect();
        let tangent = DMatrix::from_fn(n - 1, n - 1, |i, j| rotated[(keep[i], keep[j])]);
        let eig = SymmetricEigen::new(tangent);
        let mut c: Vec<f64> = eig.eigenvalues.iter().map(|l| l / mpp.grad_norm).collect();
        c.sort_by(f64::total_cmp);
        c
    };
    let mut factor = 1.0;
    let mut singular = false;
    for &k in &curvatures {
        let t = 1.0 + mpp.beta * k;
        if t <= 0.0 {
            singular = true;
            break;
        }
        factor /= t.sqrt();
    }
    let pf = if singular { first } else { (first * factor).min(1.0) };
    Ok(SormResult { pf, beta: -normal_quantile(pf), curvatures, singular })
}
