#![allow(dead_code)]

use vscl_core::fem::{BoundaryCondition, Cutout, PlateModel, Ply};

pub fn graphite_ply(theta0: f64, theta1: f64, thickness: f64) -> Ply {
    Ply {
        e1: 173e9,
        e2: 7.2e9,
        g12: 3.76e9,
        g13: 3.76e9,
        g23: 3.76e9,
        nu12: 0.29,
        rho: 1540.0,
        thickness,
        theta0,
        theta1,
    }
}

pub fn isotropic_ply(e: f64, nu: f64, rho: f64, thickness: f64) -> Ply {
    let g = e / (2.0 * (1.0 + nu));
    Ply { e1: e, e2: e, g12: g, g13: g, g23: g, nu12: nu, rho, thickness, theta0: 0.0, theta1: 0.0 }
}

pub fn plate(a: f64, b: f64, plies: Vec<Ply>, cutout: Option<Cutout>, n: usize) -> PlateModel {
    PlateModel {
        a,
        b,
        plies,
        cutout,
        bc: BoundaryCondition::Ssss,
        mesh_nx: n,
        mesh_ny: n,
        shear_correction: 5.0 / 6.0,
    }
}

/// Square validation plate without cutout: three plies, 10 mm total.
pub fn validation_plate(n: usize) -> PlateModel {
    let t = 0.01 / 3.0;
    plate(
        1.0,
        1.0,
        vec![graphite_ply(30.0, 0.0, t), graphite_ply(45.0, 90.0, t), graphite_ply(30.0, 0.0, t)],
        None,
        n,
    )
}

use vscl_core::stochastic::{expand_per_ply, Binding, Dispersion, Family, RandomVariableSpec};

fn var(name: &str, target: Binding, family: Family, mean: f64, dispersion: Dispersion) -> RandomVariableSpec {
    RandomVariableSpec { name: name.into(), target, family, mean, dispersion }
}

/// Material, cutout, thickness and ply-angle variables of the curvilinear
/// composite study, expanded over `n_plies`.
pub fn composite_variables(n_plies: usize) -> Vec<RandomVariableSpec> {
    use Dispersion::{Cov, Std};
    use Family::{LogNormal, Normal};
    let mut v = vec![
        var("E11", Binding::E1, LogNormal, 1.73e11, Cov(0.03701)),
        var("E22", Binding::E2, LogNormal, 7.2e9, Cov(0.03571)),
        var("G12", Binding::G12, LogNormal, 3.76e9, Cov(0.05977)),
        var("rho", Binding::Rho, LogNormal, 1540.0, Cov(0.036)),
        var("d", Binding::CutoutDiameter, Normal, 0.4, Cov(0.00025)),
        var("c_over_d", Binding::CutoutEllipticity, Normal, 1.0, Cov(0.005)),
        var("xc", Binding::CutoutXc, Normal, 0.0, Std(0.001)),
        var("yc", Binding::CutoutYc, Normal, 0.0, Std(0.001)),
    ];
    v.extend(expand_per_ply("t", Binding::Thickness, n_plies, LogNormal, 0.0033, Cov(0.04)));
    v.extend(expand_per_ply("dtheta", Binding::Angle, n_plies, Normal, 0.0, Std(1.8)));
    v
}

pub fn composite_plate(side: f64, n: usize) -> PlateModel {
    let t = 0.0033;
    plate(
        side,
        side,
        vec![graphite_ply(0.0, 45.0, t), graphite_ply(-45.0, -60.0, t), graphite_ply(0.0, 45.0, t)],
        Some(Cutout::circle(0.0, 0.0, 0.4)),
        n,
    )
}
