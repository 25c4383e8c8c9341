//! Free-vibration analysis of variable-stiffness composite plates.
//!
//! Plates are modelled with first-order shear deformation theory on a
//! structured mesh of four-node rectangular elements with five dofs per node
//! (`u0, v0, w0, beta_x, beta_y`). Cutouts are described implicitly by a
//! level set and handled with Heaviside enrichment, so the mesh never has to
//! conform to the hole boundary.
//!
//! The plate occupies `[-a/2, a/2] x [-b/2, b/2]`; fiber angles are stored in
//! degrees on the public types and converted to radians internally.

mod eigen;
mod element;
mod laminate;
mod mesh;
mod skyline;
mod solver;

pub use eigen::{lanczos_smallest, EigenOptions, EigenPairs};
pub use element::{element_matrices, ElementMatrices};
pub use laminate::{abd_matrices, transformed_stiffness, LaminateStiffness, PlyStiffness};
pub use mesh::{ElementKind, Mesh, NodeDofs};
pub use skyline::SkylineMatrix;
pub use solver::{
    assemble, assemble_and_solve, assemble_with_mesh, fundamental_frequency, Assembly, ModalResult, ModeRecord,
};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Manufacturing limit on the fiber curvature of a curvilinear ply.
pub const CURVATURE_LIMIT: f64 = 3.28;

/// One lamina with a linearly varying fiber path `<theta0 | theta1>`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ply {
    pub e1: f64,
    pub e2: f64,
    pub g12: f64,
    pub g13: f64,
    pub g23: f64,
    pub nu12: f64,
    pub rho: f64,
    pub thickness: f64,
    /// Fiber angle at the plate center line `x = 0`, degrees.
    pub theta0: f64,
    /// Fiber angle at the plate edges `x = +-a/2`, degrees.
    pub theta1: f64,
}

impl Ply {
    pub fn nu21(&self) -> f64 {
        self.nu12 * self.e2 / self.e1
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("E1", self.e1),
            ("E2", self.e2),
            ("G12", self.g12),
            ("G13", self.g13),
            ("G23", self.g23),
            ("rho", self.rho),
            ("thickness", self.thickness),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidArgument(format!("ply {name} must be positive, got {v}")));
            }
        }
        let prod = self.nu12 * self.nu21();
        if !(prod > 0.0 && prod < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "ply requires 0 < nu12*nu21 < 1, got {prod}"
            )));
        }
        if !self.theta0.is_finite() || !self.theta1.is_finite() {
            return Err(Error::InvalidArgument("ply angles must be finite".into()));
        }
        Ok(())
    }
}

/// Elliptical cutout with axis `d_major` along x and `c = ellipticity * d_major` along y.
///
/// Nominal designs have `ellipticity <= 1`. Ratios slightly above one are
/// accepted so that a random ellipticity scattered around a circle stays
/// admissible; the longer axis then lies along y.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cutout {
    pub xc: f64,
    pub yc: f64,
    pub d_major: f64,
    pub ellipticity: f64,
}

impl Cutout {
    pub fn circle(xc: f64, yc: f64, diameter: f64) -> Self {
        Cutout { xc, yc, d_major: diameter, ellipticity: 1.0 }
    }

    pub fn semi_axes(&self) -> (f64, f64) {
        (0.5 * self.d_major, 0.5 * self.d_major * self.ellipticity)
    }

    pub fn area(&self) -> f64 {
        let (ra, rb) = self.semi_axes();
        std::f64::consts::PI * ra * rb
    }

    /// Signed level set: negative inside the cutout, zero on its boundary.
    ///
    /// The implicit ellipse function is divided by its gradient norm, which
    /// makes it a first-order metric distance and reduces to
    /// `|x - xc| - r` for a circle.
    pub fn level_set(&self, x: f64, y: f64) -> f64 {
        let (ra, rb) = self.semi_axes();
        let dx = x - self.xc;
        let dy = y - self.yc;
        if (ra - rb).abs() <= f64::EPSILON * ra {
            return (dx * dx + dy * dy).sqrt() - ra;
        }
        let s = ((dx / ra).powi(2) + (dy / rb).powi(2)).sqrt();
        if s == 0.0 {
            return -rb;
        }
        let gx = dx / (ra * ra * s);
        let gy = dy / (rb * rb * s);
        (s - 1.0) / (gx * gx + gy * gy).sqrt()
    }

    fn validate(&self, a: f64, b: f64) -> Result<()> {
        if !(self.d_major > 0.0) {
            return Err(Error::InvalidArgument(format!("cutout major axis must be positive, got {}", self.d_major)));
        }
        if !(self.ellipticity > 0.0 && self.ellipticity.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "cutout ellipticity must be positive, got {}",
                self.ellipticity
            )));
        }
        let (ra, rb) = self.semi_axes();
        if self.xc - ra <= -0.5 * a || self.xc + ra >= 0.5 * a || self.yc - rb <= -0.5 * b || self.yc + rb >= 0.5 * b {
            return Err(Error::InvalidArgument("cutout must lie strictly inside the plate".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "UPPERCASE")]
pub enum BoundaryCondition {
    /// Simply supported on all four edges (hard support).
    #[default]
    Ssss,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlateModel {
    pub a: f64,
    pub b: f64,
    pub plies: Vec<Ply>,
    pub cutout: Option<Cutout>,
    pub bc: BoundaryCondition,
    pub mesh_nx: usize,
    pub mesh_ny: usize,
    pub shear_correction: f64,
}

impl PlateModel {
    pub fn total_thickness(&self) -> f64 {
        self.plies.iter().map(|p| p.thickness).sum()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.a > 0.0 && self.b > 0.0) {
            return Err(Error::InvalidArgument(format!("plate dimensions must be positive, got {} x {}", self.a, self.b)));
        }
        if self.plies.is_empty() {
            return Err(Error::InvalidArgument("plate needs at least one ply".into()));
        }
        for p in &self.plies {
            p.validate()?;
        }
        if self.mesh_nx < 2 || self.mesh_ny < 2 {
            return Err(Error::InvalidArgument(format!(
                "mesh must have at least 2x2 elements, got {}x{}",
                self.mesh_nx, self.mesh_ny
            )));
        }
        if !(self.shear_correction > 0.0) {
            return Err(Error::InvalidArgument("shear correction factor must be positive".into()));
        }
        if let Some(c) = &self.cutout {
            c.validate(self.a, self.b)?;
        }
        Ok(())
    }
}

/// Interpolation used for the transverse shear strains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ShearInterpolation {
    /// Field-redistributed (assumed) shear strains, free of shear locking.
    #[default]
    FieldConsistent,
    /// Plain bilinear shear strains; locks for thin plates. Diagnostics only.
    Bilinear,
}

/// Where the curvilinear fiber angle is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum AngleSampling {
    #[default]
    GaussPoint,
    ElementCentroid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FemOptions {
    pub shear: ShearInterpolation,
    pub angle_sampling: AngleSampling,
    /// Heaviside enrichment of nodes around the cutout. With the flag off,
    /// nodes inside the cutout keep their standard dofs instead.
    pub enrichment: bool,
    /// Number of lowest modes extracted.
    pub modes: usize,
    pub eigen: EigenOptions,
}

impl Default for FemOptions {
    fn default() -> Self {
        FemOptions {
            shear: ShearInterpolation::FieldConsistent,
            angle_sampling: AngleSampling::GaussPoint,
            enrichment: true,
            modes: 5,
            eigen: EigenOptions::default(),
        }
    }
}

/// Fiber angle (degrees) of a `<theta0 | theta1>` ply at abscissa `x`.
///
/// The angle varies linearly in `|x|` from `theta0` on the center line to
/// `theta1` on the edges `x = +-a/2`.
pub fn fiber_angle(x: f64, theta0: f64, theta1: f64, a: f64) -> Result<f64> {
    if !(a > 0.0) {
        return Err(Error::InvalidArgument(format!("plate length must be positive, got {a}")));
    }
    if x.abs() > 0.5 * a * (1.0 + 1e-12) {
        return Err(Error::InvalidArgument(format!("x = {x} outside [-a/2, a/2] with a = {a}")));
    }
    Ok(fiber_angle_unchecked(x, theta0, theta1, a))
}

#[inline]
pub(crate) fn fiber_angle_unchecked(x: f64, theta0: f64, theta1: f64, a: f64) -> f64 {
    2.0 * (theta1 - theta0) / a * x.abs() + theta0
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvatureReport {
    pub max_curvature: f64,
    pub feasible: bool,
}

/// Samples the fiber curvature on `[-a/2, a/2]` and checks it against
/// [`CURVATURE_LIMIT`].
pub fn check_curvature(theta0: f64, theta1: f64, a: f64) -> Result<CurvatureReport> {
    const SAMPLES: usize = 1025;
    if !(a > 0.0) {
        return Err(Error::InvalidArgument(format!("plate length must be positive, got {a}")));
    }
    let t0 = theta0.to_radians();
    let t1 = theta1.to_radians();
    let amplitude = 2.0 * (t1 - t0) / a;
    let mut max_k = 0.0f64;
    for i in 0..SAMPLES {
        let x = -0.5 * a + a * i as f64 / (SAMPLES - 1) as f64;
        let k = amplitude * ((t1 - t0) * x / (0.5 * a) + t0).cos();
        max_k = max_k.max(k.abs());
    }
    Ok(CurvatureReport { max_curvature: max_k, feasible: max_k < CURVATURE_LIMIT })
}
