use super::{BoundaryCondition, FemOptions, PlateModel};
use crate::Result;

/// Dofs per node: `u0, v0, w0, beta_x, beta_y`.
pub const NODE_DOFS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ElementKind {
    Standard,
    /// Crossed by the zero level set.
    Split,
    /// Uncut, but shares a node with a split element.
    Blending,
    /// Entirely inside the cutout; carries no stiffness or mass.
    Void,
}

/// Global equation numbers of one node; `None` marks a constrained or absent dof.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct NodeDofs {
    pub standard: [Option<usize>; NODE_DOFS],
    pub enriched: [Option<usize>; NODE_DOFS],
}

/// Structured QUAD-4 mesh of the plate with level set, element classes and dof map.
#[derive(Debug, Clone)]
pub struct Mesh {
    pub nx: usize,
    pub ny: usize,
    pub a: f64,
    pub b: f64,
    pub coords: Vec<[f64; 2]>,
    /// Counter-clockwise connectivity starting at the lower-left corner.
    pub elements: Vec<[usize; 4]>,
    /// Nodal level set; `+inf` everywhere when the plate has no cutout.
    pub phi: Vec<f64>,
    pub kinds: Vec<ElementKind>,
    pub enriched_nodes: Vec<bool>,
    pub dofs: Vec<NodeDofs>,
    pub n_dofs: usize,
    /// Position of every node in the equation ordering.
    pub order: Vec<usize>,
}

impl Mesh {
    /// Builds the mesh with the natural row-major equation ordering.
    pub fn build(plate: &PlateModel, options: &FemOptions) -> Result<Mesh> {
        let n_nodes = (plate.mesh_nx + 1) * (plate.mesh_ny + 1);
        Mesh::build_with_order(plate, options, (0..n_nodes).collect())
    }

    /// Builds the mesh numbering equations in the node sequence given by `order`
    /// (`order[k]` is the node placed k-th).
    pub fn build_with_order(plate: &PlateModel, options: &FemOptions, order: Vec<usize>) -> Result<Mesh> {
        plate.validate()?;
        let (nx, ny) = (plate.mesh_nx, plate.mesh_ny);
        let n_nodes = (nx + 1) * (ny + 1);
        let mut seen = vec![false; n_nodes];
        if order.len() != n_nodes || order.iter().any(|&n| n >= n_nodes || std::mem::replace(&mut seen[n], true)) {
            return Err(crate::Error::InvalidArgument("node order must be a permutation of all nodes".into()));
        }

        let hx = plate.a / nx as f64;
        let hy = plate.b / ny as f64;
        let mut coords = Vec::with_capacity(n_nodes);
        for j in 0..=ny {
            for i in 0..=nx {
                coords.push([-0.5 * plate.a + i as f64 * hx, -0.5 * plate.b + j as f64 * hy]);
            }
        }
        let node = |i: usize, j: usize| j * (nx + 1) + i;
        let mut elements = Vec::with_capacity(nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                elements.push([node(i, j), node(i + 1, j), node(i + 1, j + 1), node(i, j + 1)]);
            }
        }

        // Nodal values too close to zero are pushed to the material side so
        // that sub-triangles never collapse onto a node.
        let snap = 1e-6 * hx.min(hy);
        let phi: Vec<f64> = match &plate.cutout {
            None => vec![f64::INFINITY; n_nodes],
            Some(c) => coords
                .iter()
                .map(|p| {
                    let v = c.level_set(p[0], p[1]);
                    if v.abs() < snap {
                        snap
                    } else {
                        v
                    }
                })
                .collect(),
        };

        let mut kinds: Vec<ElementKind> = elements
            .iter()
            .map(|conn| {
                let inside = conn.iter().filter(|&&n| phi[n] < 0.0).count();
                match inside {
                    0 => ElementKind::Standard,
                    4 => ElementKind::Void,
                    _ => ElementKind::Split,
                }
            })
            .collect();

        let mut enriched_nodes = vec![false; n_nodes];
        for (conn, kind) in elements.iter().zip(&kinds) {
            if *kind == ElementKind::Split {
                for &n in conn {
                    enriched_nodes[n] = true;
                }
            }
        }
        for (conn, kind) in elements.iter().zip(kinds.iter_mut()) {
            if *kind == ElementKind::Standard && conn.iter().any(|&n| enriched_nodes[n]) {
                *kind = ElementKind::Blending;
            }
        }

        let mut supported = vec![false; n_nodes];
        for (conn, kind) in elements.iter().zip(&kinds) {
            if *kind != ElementKind::Void {
                for &n in conn {
                    supported[n] = true;
                }
            }
        }

        let mut dofs = vec![NodeDofs::default(); n_nodes];
        let mut next = 0usize;
        for &n in &order {
            if !supported[n] {
                continue;
            }
            let i = n % (nx + 1);
            let j = n / (nx + 1);
            let fixed = fixed_components(plate.bc, i, j, nx, ny);
            let inside = phi[n] < 0.0;
            // Nodes inside the cutout move only through their enriched dofs;
            // the enrichment of nodes outside vanishes on the material side.
            let standard_active = !(options.enrichment && inside);
            let enriched_active = options.enrichment && enriched_nodes[n] && inside;
            for c in 0..NODE_DOFS {
                if standard_active && !fixed[c] {
                    dofs[n].standard[c] = Some(next);
                    next += 1;
                }
            }
            for c in 0..NODE_DOFS {
                if enriched_active && !fixed[c] {
                    dofs[n].enriched[c] = Some(next);
                    next += 1;
                }
            }
        }

        Ok(Mesh {
            nx,
            ny,
            a: plate.a,
            b: plate.b,
            coords,
            elements,
            phi,
            kinds,
            enriched_nodes,
            dofs,
            n_dofs: next,
            order,
        })
    }

    pub fn element_size(&self) -> (f64, f64) {
        (self.a / self.nx as f64, self.b / self.ny as f64)
    }

    pub fn count(&self, kind: ElementKind) -> usize {
        self.kinds.iter().filter(|k| **k == kind).count()
    }

    /// Nodes strictly inside the cutout that carry no dof at all.
    pub fn removed_nodes(&self) -> Vec<usize> {
        (0..self.coords.len())
            .filter(|&n| {
                self.dofs[n].standard.iter().all(Option::is_none) && self.dofs[n].enriched.iter().all(Option::is_none)
            })
            .filter(|&n| self.phi[n] < 0.0)
            .collect()
    }
}

fn fixed_components(bc: BoundaryCondition, i: usize, j: usize, nx: usize, ny: usize) -> [bool; NODE_DOFS] {
    let mut fixed = [false; NODE_DOFS];
    match bc {
        BoundaryCondition::Ssss => {
            if i == 0 || i == nx {
                fixed[1] = true;
                fixed[2] = true;
                fixed[4] = true;
            }
            if j == 0 || j == ny {
                fixed[0] = true;
                fixed[2] = true;
                fixed[3] = true;
            }
        }
    }
    fixed
}
