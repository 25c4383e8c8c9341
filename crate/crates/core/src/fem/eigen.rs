//! Shift-invert Lanczos for the lowest eigenpairs of `K x = lambda M x`.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::skyline::SkylineMatrix;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenOptions {
    /// Relative change of the wanted eigenvalues between checks.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Spectral shift; must lie below the lowest eigenvalue.
    pub shift: f64,
}

impl Default for EigenOptions {
    fn default() -> Self {
        EigenOptions { tolerance: 1e-9, max_iterations: 400, shift: 0.0 }
    }
}

#[derive(Debug, Clone)]
pub struct EigenPairs {
    /// Ascending eigenvalues `lambda = omega^2`.
    pub values: Vec<f64>,
    /// M-orthonormal eigenvectors.
    pub vectors: Vec<Vec<f64>>,
    pub iterations: usize,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Lowest `count` eigenpairs of the symmetric pencil `(K, M)`.
///
/// `M` must be positive definite. The Krylov space of `(K - shift M)^-1 M`
/// is built with full M-orthogonal reorthogonalization, so the iteration is
/// deterministic and needs no restarts for the handful of modes wanted here.
pub fn lanczos_smallest(k: &SkylineMatrix, m: &SkylineMatrix, count: usize, opts: &EigenOptions) -> Result<EigenPairs> {
    let n = k.dim();
    if m.dim() != n {
        return Err(Error::InvalidArgument("K and M dimensions differ".into()));
    }
    if count == 0 || count > n {
        return Err(Error::InvalidArgument(format!("cannot extract {count} modes from {n} dofs")));
    }
    if let Err((dof, pivot)) = m.factorize_detail(true) {
        return Err(Error::SingularMass { dof, pivot });
    }
    let shifted = k.add_scaled(-opts.shift, m);
    let fac = shifted.factorize(false)?;
    if fac.negative_pivots() > 0 {
        return Err(Error::InvalidArgument(format!(
            "shift {} lies above {} eigenvalues",
            opts.shift,
            fac.negative_pivots()
        )));
    }

    let mut q: Vec<Vec<f64>> = Vec::new();
    let mut mq: Vec<Vec<f64>> = Vec::new();
    let mut alpha: Vec<f64> = Vec::new();
    let mut beta: Vec<f64> = Vec::new();

    // Deterministic start vector, pushed once through the operator to damp
    // high-frequency content.
    let mut v: Vec<f64> = (0..n).map(|i| 1.0 + ((i * 7919) % 97) as f64 / 97.0).collect();
    let mut tmp = vec![0.0; n];
    m.mul_vec(&v, &mut tmp);
    fac.solve_in_place(&mut tmp);
    v.copy_from_slice(&tmp);

    let max_steps = opts.max_iterations.min(n);
    let mut previous: Option<Vec<f64>> = None;
    let mut steps = 0;

    let normalize = |v: &mut Vec<f64>, mv: &mut Vec<f64>| -> f64 {
        m.mul_vec(v, mv);
        let nrm = dot(v, mv).max(0.0).sqrt();
        if nrm > 0.0 {
            v.iter_mut().for_each(|x| *x /= nrm);
            mv.iter_mut().for_each(|x| *x /= nrm);
        }
        nrm
    };

    let mut mv = vec![0.0; n];
    normalize(&mut v, &mut mv);
    q.push(v);
    mq.push(mv);

    loop {
        let j = q.len() - 1;
        let mut w = mq[j].clone();
        fac.solve_in_place(&mut w);
        let a = dot(&mq[j], &w);
        alpha.push(a);
        // Full reorthogonalization, applied twice.
        for _ in 0..2 {
            for (qi, mqi) in q.iter().zip(&mq) {
                let c = dot(mqi, &w);
                w.iter_mut().zip(qi).for_each(|(x, y)| *x -= c * y);
            }
        }
        steps += 1;

        let mut mw = vec![0.0; n];
        let b = normalize(&mut w, &mut mw);
        let invariant = b <= 1e-13 * a.abs().max(f64::MIN_POSITIVE);
        let exhausted = q.len() >= max_steps || invariant;

        if q.len() >= count && (q.len() % 5 == 0 || exhausted) {
            let dim = q.len();
            let mut t = DMatrix::<f64>::zeros(dim, dim);
            for i in 0..dim {
                t[(i, i)] = alpha[i];
                if i + 1 < dim {
                    t[(i, i + 1)] = beta[i];
                    t[(i + 1, i)] = beta[i];
                }
            }
            let eig = SymmetricEigen::new(t);
            let mut idx: Vec<usize> = (0..dim).collect();
            idx.sort_by(|&x, &y| eig.eigenvalues[y].total_cmp(&eig.eigenvalues[x]));
            let wanted: Vec<usize> = idx[..count].to_vec();
            let lambdas: Vec<f64> = wanted.iter().map(|&i| opts.shift + 1.0 / eig.eigenvalues[i]).collect();
            let residual_ok = wanted.iter().all(|&i| {
                let mu = eig.eigenvalues[i];
                (b * eig.eigenvectors[(dim - 1, i)]).abs() <= opts.tolerance * mu.abs()
            });
            let change_ok = previous.as_ref().is_some_and(|p| {
                p.iter().zip(&lambdas).all(|(x, y)| (x - y).abs() <= opts.tolerance * y.abs())
            });
            if (residual_ok && change_ok) || invariant {
                if wanted.iter().any(|&i| eig.eigenvalues[i] <= 0.0) {
                    return Err(Error::Singular("non-positive Ritz value of the shifted inverse".into()));
                }
                let vectors = wanted
                    .iter()
                    .map(|&i| {
                        let mut x = vec![0.0; n];
                        for (c, qc) in q.iter().enumerate() {
                            let s = eig.eigenvectors[(c, i)];
                            x.iter_mut().zip(qc).for_each(|(xv, qv)| *xv += s * qv);
                        }
                        x
                    })
                    .collect();
                return Ok(EigenPairs { values: lambdas, vectors, iterations: steps });
            }
            if exhausted {
                return Err(Error::NoConvergence { iterations: steps, what: "Lanczos eigenvalue extraction".into() });
            }
            previous = Some(lambdas);
        } else if exhausted {
            return Err(Error::NoConvergence { iterations: steps, what: "Lanczos eigenvalue extraction".into() });
        }

        beta.push(b);
        q.push(w);
        mq.push(mw);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Fixed-free spring-mass chain: eigenvalues 4 sin^2((2k-1) pi / (2(2n+1))).
    #[test]
    fn spring_chain_eigenvalues() {
        let n = 60;
        let first: Vec<usize> = (0..n).map(|j: usize| j.saturating_sub(1)).collect();
        let mut k = SkylineMatrix::with_profile(first.clone());
        let mut m = SkylineMatrix::with_profile(first);
        for j in 0..n {
            k.add(j, j, if j == n - 1 { 1.0 } else { 2.0 });
            if j > 0 {
                k.add(j - 1, j, -1.0);
            }
            m.add(j, j, 1.0);
        }
        let pairs = lanczos_smallest(&k, &m, 4, &EigenOptions::default()).unwrap();
        for (i, lam) in pairs.values.iter().enumerate() {
            let kk = (i + 1) as f64;
            let exact = 4.0 * ((2.0 * kk - 1.0) * std::f64::consts::PI / (2.0 * (2.0 * n as f64 + 1.0))).sin().powi(2);
            assert!((lam - exact).abs() < 1e-9 * exact, "mode {i}: {lam} vs {exact}");
        }
        // M-orthonormal vectors satisfying K x = lambda M x.
        let mut kx = vec![0.0; n];
        let mut mx = vec![0.0; n];
        for (lam, x) in pairs.values.iter().zip(&pairs.vectors) {
            k.mul_vec(x, &mut kx);
            m.mul_vec(x, &mut mx);
            assert!((dot(x, &mx) - 1.0).abs() < 1e-9);
            let r: f64 = kx.iter().zip(&mx).map(|(a, b)| (a - lam * b).powi(2)).sum::<f64>().sqrt();
            assert!(r < 1e-6 * lam);
        }
    }

    #[test]
    fn indefinite_mass_rejected() {
        let mut k = SkylineMatrix::with_profile(vec![0, 1]);
        let mut m = SkylineMatrix::with_profile(vec![0, 1]);
        k.add(0, 0, 1.0);
        k.add(1, 1, 1.0);
        m.add(0, 0, 1.0);
        m.add(1, 1, -1.0);
        assert!(matches!(lanczos_smallest(&k, &m, 1, &EigenOptions::default()), Err(Error::SingularMass { .. })));
    }
}
