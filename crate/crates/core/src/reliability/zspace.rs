use super::form::{form_search, sorm_pf, FormOptions, MppResult, SormResult};
use crate::stochastic::GaussianSpace;
use crate::surrogate::SurrogateNet;
use crate::Result;

/// A trained net seen as a limit state on standard normal coordinates.
///
/// Derivatives follow from the chain rule through the diagonal map
/// `x_i(z_i)`:
///
/// ```text
/// dg/dz_i       = dg/dx_i x_i'
/// d2g/dz_i dz_j = d2g/dx_i dx_j x_i' x_j' + [i = j] dg/dx_i x_i''
/// ```
///
/// For normal inputs `x_i' = sigma_i` and `x_i'' = 0`.
#[derive(Debug, Clone, Copy)]
pub struct SurrogateLimitState<'a> {
    pub net: &'a SurrogateNet,
    pub space: &'a GaussianSpace,
}

impl<'a> SurrogateLimitState<'a> {
    pub fn new(net: &'a SurrogateNet, space: &'a GaussianSpace) -> Result<Self> {
        net.check_inputs(&space.names)?;
        Ok(SurrogateLimitState { net, space })
    }

    pub fn value(&self, z: &[f64]) -> f64 {
        self.net.forward(&self.space.from_standard_normal(z))
    }

    pub fn value_and_grad(&self, z: &[f64]) -> (f64, Vec<f64>) {
        let x = self.space.from_standard_normal(z);
        let (g, gx) = self.net.value_and_grad(&x);
        let j = self.space.dx_dz(z);
        (g, gx.iter().zip(&j).map(|(g, d)| g * d).collect())
    }

    /// Row-major Hessian in z.
    pub fn hessian(&self, z: &[f64]) -> Vec<f64> {
        let n = z.len();
        let x = self.space.from_standard_normal(z);
        let hx = self.net.hessian_input(&x);
        let gx = self.net.grad_input(&x);
        let j = self.space.dx_dz(z);
        let j2 = self.space.d2x_dz2(z);
        let mut h = vec![0.0; n * n];
        for r in 0..n {
            for c in 0..n {
                h[r * n + c] = hx[r * n + c] * j[r] * j[c];
            }
            h[r * n + r] += gx[r] * j2[r];
        }
        h
    }

    pub fn mpp(&self, options: &FormOptions) -> Result<MppResult> {
        let mut r = form_search(|z| Ok(self.value_and_grad(z)), self.space.dim(), options)?;
        r.x = self.space.from_standard_normal(&r.z);
        Ok(r)
    }

    pub fn sorm(&self, mpp: &MppResult) -> Result<SormResult> {
        sorm_pf(mpp, &self.hessian(&mpp.z))
    }
}
