use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::eigen::{lanczos_smallest, EigenPairs};
use super::element::{element_matrices, ElementMatrices};
use super::mesh::{ElementKind, Mesh, NODE_DOFS};
use super::skyline::SkylineMatrix;
use super::{FemOptions, PlateModel};
use crate::{Error, Result};

/// Global stiffness and mass on the active dofs.
#[derive(Debug, Clone)]
pub struct Assembly {
    pub mesh: Mesh,
    pub k: SkylineMatrix,
    pub m: SkylineMatrix,
    /// Mass of the material region, `int I0 dA`.
    pub material_mass: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeRecord {
    pub mode: usize,
    pub omega: f64,
}

/// Natural frequencies (rad/s, ascending) and mesh metadata of one solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModalResult {
    pub frequencies: Vec<f64>,
    pub converged_modes: usize,
    pub lanczos_steps: usize,
    pub mesh_nx: usize,
    pub mesh_ny: usize,
    pub n_dofs: usize,
    pub split_elements: usize,
    pub void_elements: usize,
}

impl ModalResult {
    pub fn fundamental(&self) -> f64 {
        self.frequencies[0]
    }

    pub fn modes(&self) -> Vec<ModeRecord> {
        self.frequencies.iter().enumerate().map(|(i, &omega)| ModeRecord { mode: i + 1, omega }).collect()
    }

    /// Tab-separated `mode  omega_rad_s` table with a header line.
    pub fn to_table(&self) -> String {
        let mut s = String::from("mode\tomega_rad_s\n");
        for r in self.modes() {
            s.push_str(&format!("{}\t{:.10e}\n", r.mode, r.omega));
        }
        s
    }

    pub fn parse_table(text: &str) -> Result<Vec<ModeRecord>> {
        let mut lines = text.lines();
        if lines.next().map(str::trim) != Some("mode\tomega_rad_s") {
            return Err(Error::Format("missing modal table header".into()));
        }
        lines
            .filter(|l| !l.trim().is_empty())
            .map(|l| {
                let mut it = l.split('\t');
                let mode = it.next().and_then(|v| v.trim().parse().ok());
                let omega = it.next().and_then(|v| v.trim().parse().ok());
                match (mode, omega) {
                    (Some(mode), Some(omega)) => Ok(ModeRecord { mode, omega }),
                    _ => Err(Error::Format(format!("bad modal table row {l:?}"))),
                }
            })
            .collect()
    }
}

/// Assembles K and M with the natural node ordering.
pub fn assemble(plate: &PlateModel, options: &FemOptions) -> Result<Assembly> {
    let mesh = Mesh::build(plate, options)?;
    assemble_with_mesh(mesh, plate, options)
}

/// Assembles K and M on a prebuilt mesh, e.g. one with a custom node order.
pub fn assemble_with_mesh(mesh: Mesh, plate: &PlateModel, options: &FemOptions) -> Result<Assembly> {
    let active: Vec<usize> = (0..mesh.elements.len()).filter(|&e| mesh.kinds[e] != ElementKind::Void).collect();
    // Element matrices in parallel; the reduction below runs in element order
    // so the sums are identical for any thread count.
    let elems: Vec<ElementMatrices> = active
        .par_iter()
        .map(|&e| element_matrices(e, &mesh, plate, options))
        .collect::<Result<Vec<_>>>()?;

    let n = mesh.n_dofs;
    if n == 0 {
        return Err(Error::InvalidArgument("no active dofs".into()));
    }
    let mut first: Vec<usize> = (0..n).collect();
    for em in &elems {
        if let Some(lo) = em.dofs.iter().flatten().min() {
            for &d in em.dofs.iter().flatten() {
                first[d] = first[d].min(*lo);
            }
        }
    }
    let mut k = SkylineMatrix::with_profile(first.clone());
    let mut m = SkylineMatrix::with_profile(first);
    let mut material_mass = 0.0;
    for em in &elems {
        for (a, da) in em.dofs.iter().enumerate() {
            let Some(ga) = *da else { continue };
            for (b, db) in em.dofs.iter().enumerate().skip(a) {
                let Some(gb) = *db else { continue };
                k.add(ga, gb, em.k[(a, b)]);
                m.add(ga, gb, em.m[(a, b)]);
            }
        }
        // Transverse translation of the standard field measures the element mass.
        let w: Vec<usize> = (0..4).map(|i| i * NODE_DOFS + 2).collect();
        let mut mass = 0.0;
        for &a in &w {
            for &b in &w {
                mass += em.m[(a, b)];
            }
        }
        material_mass += mass;
    }
    Ok(Assembly { mesh, k, m, material_mass })
}

impl Assembly {
    pub fn solve(&self, options: &FemOptions) -> Result<(ModalResult, EigenPairs)> {
        let count = options.modes.min(self.mesh.n_dofs);
        let pairs = lanczos_smallest(&self.k, &self.m, count, &options.eigen)?;
        if let Some(bad) = pairs.values.iter().find(|v| !(**v > 0.0)) {
            return Err(Error::Singular(format!("non-positive eigenvalue {bad:e}")));
        }
        let result = ModalResult {
            frequencies: pairs.values.iter().map(|v| v.sqrt()).collect(),
            converged_modes: pairs.values.len(),
            lanczos_steps: pairs.iterations,
            mesh_nx: self.mesh.nx,
            mesh_ny: self.mesh.ny,
            n_dofs: self.mesh.n_dofs,
            split_elements: self.mesh.count(ElementKind::Split),
            void_elements: self.mesh.count(ElementKind::Void),
        };
        Ok((result, pairs))
    }
}

/// Lowest natural frequencies of the plate.
pub fn assemble_and_solve(plate: &PlateModel, options: &FemOptions) -> Result<ModalResult> {
    assemble(plate, options)?.solve(options).map(|(r, _)| r)
}

/// First natural frequency, rad/s.
pub fn fundamental_frequency(plate: &PlateModel, options: &FemOptions) -> Result<f64> {
    let opts = FemOptions { modes: 1, ..options.clone() };
    assemble_and_solve(plate, &opts).map(|r| r.fundamental())
}
