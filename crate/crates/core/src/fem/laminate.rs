use nalgebra::{Matrix2, Matrix3};

use super::{fiber_angle_unchecked, Ply};
use crate::{Error, Result};

/// Reduced stiffness of one ply rotated to the plate axes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlyStiffness {
    /// In-plane `Qbar` in Voigt order (xx, yy, xy).
    pub in_plane: Matrix3<f64>,
    /// Transverse shear `Qbar` in order (xz, yz).
    pub shear: Matrix2<f64>,
}

/// Through-thickness integrated stiffness and inertia of the laminate at one abscissa.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaminateStiffness {
    pub a: Matrix3<f64>,
    pub b: Matrix3<f64>,
    pub d: Matrix3<f64>,
    /// Transverse shear stiffness, shear correction factor included.
    pub e: Matrix2<f64>,
    /// Mass moments `int rho {1, z, z^2} dz`.
    pub inertia: [f64; 3],
}

/// Rotates the ply stiffness by `theta` radians (fiber axis measured from x).
pub fn transformed_stiffness(ply: &Ply, theta: f64) -> PlyStiffness {
    let denom = 1.0 - ply.nu12 * ply.nu21();
    let q11 = ply.e1 / denom;
    let q22 = ply.e2 / denom;
    let q12 = ply.nu12 * ply.e2 / denom;
    let q66 = ply.g12;
    let q44 = ply.g23;
    let q55 = ply.g13;

    let (s, c) = theta.sin_cos();
    let (c2, s2) = (c * c, s * s);
    let (c4, s4, s2c2) = (c2 * c2, s2 * s2, s2 * c2);

    let qb11 = q11 * c4 + 2.0 * (q12 + 2.0 * q66) * s2c2 + q22 * s4;
    let qb22 = q11 * s4 + 2.0 * (q12 + 2.0 * q66) * s2c2 + q22 * c4;
    let qb12 = (q11 + q22 - 4.0 * q66) * s2c2 + q12 * (s4 + c4);
    let qb66 = (q11 + q22 - 2.0 * q12 - 2.0 * q66) * s2c2 + q66 * (s4 + c4);
    let qb16 = (q11 - q12 - 2.0 * q66) * c2 * c * s + (q12 - q22 + 2.0 * q66) * c * s2 * s;
    let qb26 = (q11 - q12 - 2.0 * q66) * c * s2 * s + (q12 - q22 + 2.0 * q66) * c2 * c * s;

    let qb55 = q55 * c2 + q44 * s2;
    let qb44 = q55 * s2 + q44 * c2;
    let qb45 = (q55 - q44) * c * s;

    PlyStiffness {
        in_plane: Matrix3::new(qb11, qb12, qb16, qb12, qb22, qb26, qb16, qb26, qb66),
        shear: Matrix2::new(qb55, qb45, qb45, qb44),
    }
}

/// A, B, D and shear stiffness of the stack at abscissa `x` of a plate of length `a`.
///
/// Ply interfaces are stacked bottom to top and centered on `z = 0`; each
/// ply's fiber angle is evaluated at `x`.
pub fn abd_matrices(plies: &[Ply], x: f64, a: f64, shear_correction: f64) -> Result<LaminateStiffness> {
    if plies.is_empty() {
        return Err(Error::InvalidArgument("empty ply stack".into()));
    }
    for p in plies {
        p.validate()?;
    }
    if !(a > 0.0) || x.abs() > 0.5 * a * (1.0 + 1e-9) {
        return Err(Error::InvalidArgument(format!("x = {x} outside plate of length {a}")));
    }
    Ok(abd_unchecked(plies, x, a, shear_correction))
}

pub(crate) fn abd_unchecked(plies: &[Ply], x: f64, a: f64, shear_correction: f64) -> LaminateStiffness {
    let h: f64 = plies.iter().map(|p| p.thickness).sum();
    let mut z_lo = -0.5 * h;
    let mut out = LaminateStiffness {
        a: Matrix3::zeros(),
        b: Matrix3::zeros(),
        d: Matrix3::zeros(),
        e: Matrix2::zeros(),
        inertia: [0.0; 3],
    };
    for ply in plies {
        let z_hi = z_lo + ply.thickness;
        let dz1 = z_hi - z_lo;
        let dz2 = (z_hi * z_hi - z_lo * z_lo) / 2.0;
        let dz3 = (z_hi * z_hi * z_hi - z_lo * z_lo * z_lo) / 3.0;
        let theta = fiber_angle_unchecked(x, ply.theta0, ply.theta1, a).to_radians();
        let q = transformed_stiffness(ply, theta);
        out.a += q.in_plane * dz1;
        out.b += q.in_plane * dz2;
        out.d += q.in_plane * dz3;
        out.e += q.shear * (shear_correction * dz1);
        out.inertia[0] += ply.rho * dz1;
        out.inertia[1] += ply.rho * dz2;
        out.inertia[2] += ply.rho * dz3;
        z_lo = z_hi;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ply(theta0: f64, theta1: f64, t: f64) -> Ply {
        Ply {
            e1: 173e9,
            e2: 7.2e9,
            g12: 3.76e9,
            g13: 3.76e9,
            g23: 3.76e9,
            nu12: 0.29,
            rho: 1540.0,
            thickness: t,
            theta0,
            theta1,
        }
    }

    fn iso(e: f64, nu: f64, t: f64) -> Ply {
        let g = e / (2.0 * (1.0 + nu));
        Ply { e1: e, e2: e, g12: g, g13: g, g23: g, nu12: nu, rho: 7800.0, thickness: t, theta0: 0.0, theta1: 0.0 }
    }

    /// Independent route: Qbar = T^-1 Q R T R^-1 with the Reuter matrix.
    fn qbar_oracle(p: &Ply, theta: f64) -> Matrix3<f64> {
        let den = 1.0 - p.nu12 * p.nu12 * p.e2 / p.e1;
        let q = Matrix3::new(
            p.e1 / den,
            p.nu12 * p.e2 / den,
            0.0,
            p.nu12 * p.e2 / den,
            p.e2 / den,
            0.0,
            0.0,
            0.0,
            p.g12,
        );
        let (s, c) = theta.sin_cos();
        let t = Matrix3::new(c * c, s * s, 2.0 * s * c, s * s, c * c, -2.0 * s * c, -s * c, s * c, c * c - s * s);
        let r = Matrix3::new(1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 2.0);
        t.try_inverse().unwrap() * q * r * t * r.try_inverse().unwrap()
    }

    fn rel_close(a: &Matrix3<f64>, b: &Matrix3<f64>, tol: f64) -> bool {
        (a - b).norm() <= tol * b.norm()
    }

    #[test]
    fn isotropic_single_ply() {
        let (e, nu, h) = (70e9, 0.3, 0.01);
        let lam = abd_matrices(&[iso(e, nu, h)], 0.0, 1.0, 5.0 / 6.0).unwrap();
        assert!(lam.b.norm() < 1e-12 * lam.d.norm());
        let d0 = e * h.powi(3) / (12.0 * (1.0 - nu * nu));
        let expected = Matrix3::new(d0, nu * d0, 0.0, nu * d0, d0, 0.0, 0.0, 0.0, (1.0 - nu) / 2.0 * d0);
        assert!(rel_close(&lam.d, &expected, 1e-12));
        let g = e / (2.0 * (1.0 + nu));
        assert!((lam.e[(0, 0)] - 5.0 / 6.0 * g * h).abs() < 1e-6);
        assert!(lam.e[(0, 1)].abs() < 1e-6);
    }

    #[test]
    fn symmetric_stack_has_no_coupling() {
        let t = 0.0033;
        let plies = [ply(0.0, 45.0, t), ply(-45.0, -60.0, t), ply(-45.0, -60.0, t), ply(0.0, 45.0, t)];
        for x in [-0.5, -0.3, 0.0, 0.17, 0.5] {
            let lam = abd_matrices(&plies, x, 1.0, 5.0 / 6.0).unwrap();
            assert!(lam.b.norm() < 1e-9 * lam.a.norm() * t, "B != 0 at x = {x}");
            assert!(lam.inertia[1].abs() < 1e-12);
        }
    }

    #[test]
    fn three_ply_layup_matches_straight_fiber_oracle() {
        let t = 0.01 / 3.0;
        let plies = [ply(30.0, 0.0, t), ply(45.0, 90.0, t), ply(30.0, 0.0, t)];
        let lam = abd_matrices(&plies, 0.0, 1.0, 5.0 / 6.0).unwrap();

        let mut a = Matrix3::zeros();
        let mut d = Matrix3::zeros();
        let zs = [-1.5 * t, -0.5 * t, 0.5 * t, 1.5 * t];
        for (k, p) in plies.iter().enumerate() {
            let q = qbar_oracle(p, p.theta0.to_radians());
            a += q * (zs[k + 1] - zs[k]);
            d += q * ((zs[k + 1].powi(3) - zs[k].powi(3)) / 3.0);
        }
        assert!(rel_close(&lam.a, &a, 1e-12));
        assert!(rel_close(&lam.d, &d, 1e-12));

        // Off-center: each ply at its own theta(x).
        let x = 0.3;
        let lam = abd_matrices(&plies, x, 1.0, 5.0 / 6.0).unwrap();
        let mut d = Matrix3::zeros();
        for (k, p) in plies.iter().enumerate() {
            let theta = p.theta0 + 2.0 * (p.theta1 - p.theta0) * x;
            d += qbar_oracle(p, theta.to_radians()) * ((zs[k + 1].powi(3) - zs[k].powi(3)) / 3.0);
        }
        assert!(rel_close(&lam.d, &d, 1e-12));
    }

    #[test]
    fn blocks_are_symmetric() {
        let plies = [ply(0.0, 45.0, 0.002), ply(-45.0, -60.0, 0.003), ply(10.0, 70.0, 0.004)];
        let lam = abd_matrices(&plies, 0.21, 1.0, 5.0 / 6.0).unwrap();
        for m in [lam.a, lam.b, lam.d] {
            assert!((m - m.transpose()).norm() <= 1e-14 * m.norm());
        }
        assert!((lam.e - lam.e.transpose()).norm() == 0.0);
    }

    #[test]
    fn degenerate_ply_rejected() {
        let mut p = ply(0.0, 0.0, 0.01);
        p.thickness = 0.0;
        assert!(matches!(abd_matrices(&[p], 0.0, 1.0, 5.0 / 6.0), Err(Error::InvalidArgument(_))));
        let mut p = ply(0.0, 0.0, 0.01);
        p.nu12 = 10.0;
        assert!(abd_matrices(&[p], 0.0, 1.0, 5.0 / 6.0).is_err());
    }
}
