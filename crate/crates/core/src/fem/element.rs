use nalgebra::{DMatrix, SMatrix};

use super::laminate::{abd_unchecked, LaminateStiffness};
use super::mesh::{ElementKind, Mesh, NODE_DOFS};
use super::{AngleSampling, FemOptions, PlateModel, ShearInterpolation};
use crate::{Error, Result};

const STD: usize = 4 * NODE_DOFS;

/// Element stiffness and mass.
///
/// Local dofs are the 20 standard dofs (node-major, `u0 v0 w0 bx by`),
/// followed by 20 enriched dofs when the element touches an enriched node,
/// so `k` splits into the blocks `[[Kss, Kse], [Kes, Kee]]`.
#[derive(Debug, Clone)]
pub struct ElementMatrices {
    pub k: DMatrix<f64>,
    pub m: DMatrix<f64>,
    /// Global equation per local dof, `None` when constrained or absent.
    pub dofs: Vec<Option<usize>>,
}

impl ElementMatrices {
    pub fn is_enriched(&self) -> bool {
        self.k.nrows() > STD
    }

    pub fn kss(&self) -> DMatrix<f64> {
        self.k.view((0, 0), (STD, STD)).into_owned()
    }

    pub fn kse(&self) -> Option<DMatrix<f64>> {
        self.is_enriched().then(|| self.k.view((0, STD), (STD, STD)).into_owned())
    }

    pub fn kes(&self) -> Option<DMatrix<f64>> {
        self.is_enriched().then(|| self.k.view((STD, 0), (STD, STD)).into_owned())
    }

    pub fn kee(&self) -> Option<DMatrix<f64>> {
        self.is_enriched().then(|| self.k.view((STD, STD), (STD, STD)).into_owned())
    }
}

/// Integration point in natural coordinates with its natural-area weight.
#[derive(Debug, Clone, Copy)]
pub(crate) struct QuadPoint {
    pub xi: f64,
    pub eta: f64,
    pub w: f64,
}

const NODE_XI: [f64; 4] = [-1.0, 1.0, 1.0, -1.0];
const NODE_ETA: [f64; 4] = [-1.0, -1.0, 1.0, 1.0];

pub(crate) fn shape(xi: f64, eta: f64) -> ([f64; 4], [f64; 4], [f64; 4]) {
    let mut n = [0.0; 4];
    let mut dxi = [0.0; 4];
    let mut deta = [0.0; 4];
    for i in 0..4 {
        n[i] = 0.25 * (1.0 + xi * NODE_XI[i]) * (1.0 + eta * NODE_ETA[i]);
        dxi[i] = 0.25 * NODE_XI[i] * (1.0 + eta * NODE_ETA[i]);
        deta[i] = 0.25 * NODE_ETA[i] * (1.0 + xi * NODE_XI[i]);
    }
    (n, dxi, deta)
}

fn gauss_2x2() -> Vec<QuadPoint> {
    let g = 1.0 / 3f64.sqrt();
    [(-g, -g), (g, -g), (g, g), (-g, g)].iter().map(|&(xi, eta)| QuadPoint { xi, eta, w: 1.0 }).collect()
}

/// Sub-triangle rule on the material side (`phi > 0`) of a split element.
///
/// The zero level set is located on each edge by linear interpolation of the
/// nodal values; the material polygon(s) are fan-triangulated and each
/// triangle gets a three-point rule.
pub(crate) fn split_rule(phi: [f64; 4]) -> Result<Vec<QuadPoint>> {
    let corners: [(f64, f64); 4] = [(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)];
    let mut crossings = 0;
    let mut ring: Vec<((f64, f64), bool)> = Vec::with_capacity(8);
    for i in 0..4 {
        let j = (i + 1) % 4;
        if phi[i] > 0.0 {
            ring.push((corners[i], true));
        }
        if (phi[i] > 0.0) != (phi[j] > 0.0) {
            let t = phi[i] / (phi[i] - phi[j]);
            let p = (
                corners[i].0 + t * (corners[j].0 - corners[i].0),
                corners[i].1 + t * (corners[j].1 - corners[i].1),
            );
            ring.push((p, false));
            crossings += 1;
        }
    }

    let mut polygons: Vec<Vec<(f64, f64)>> = Vec::new();
    let center: f64 = phi.iter().sum::<f64>() / 4.0;
    if crossings == 4 && center <= 0.0 {
        // Saddle with material in two opposite corners: each corner polygon is
        // the corner node between its two crossings.
        let n = ring.len();
        for k in 0..n {
            if ring[k].1 {
                polygons.push(vec![ring[(k + n - 1) % n].0, ring[k].0, ring[(k + 1) % n].0]);
            }
        }
    } else {
        polygons.push(ring.into_iter().map(|(p, _)| p).collect());
    }

    let mut points = Vec::new();
    for poly in polygons {
        for k in 1..poly.len().saturating_sub(1) {
            let (p0, p1, p2) = (poly[0], poly[k], poly[k + 1]);
            let area = 0.5 * ((p1.0 - p0.0) * (p2.1 - p0.1) - (p2.0 - p0.0) * (p1.1 - p0.1));
            if area.abs() < 1e-12 * 4.0 {
                return Err(Error::QuadratureFailure(format!(
                    "collapsed sub-triangle (natural area {area:e}) for nodal level set {phi:?}"
                )));
            }
            for (l1, l2) in [(2.0 / 3.0, 1.0 / 6.0), (1.0 / 6.0, 2.0 / 3.0), (1.0 / 6.0, 1.0 / 6.0)] {
                let l0 = 1.0 - l1 - l2;
                points.push(QuadPoint {
                    xi: l0 * p0.0 + l1 * p1.0 + l2 * p2.0,
                    eta: l0 * p0.1 + l1 * p1.1 + l2 * p2.1,
                    w: area.abs() / 3.0,
                });
            }
        }
    }
    Ok(points)
}

/// Transverse shear rows for one node at natural point (xi, eta):
/// `[dgxz/dw, dgxz/dbx, dgyz/dw, dgyz/dby]`.
fn shear_rows(xi: f64, eta: f64, hx: f64, hy: f64, shear: ShearInterpolation) -> [[f64; 4]; 4] {
    let plain = |xi: f64, eta: f64| {
        let (n, dxi, deta) = shape(xi, eta);
        let mut r = [[0.0; 4]; 4];
        for i in 0..4 {
            r[i] = [dxi[i] * 2.0 / hx, n[i], deta[i] * 2.0 / hy, n[i]];
        }
        r
    };
    match shear {
        ShearInterpolation::Bilinear => plain(xi, eta),
        ShearInterpolation::FieldConsistent => {
            // gamma_xz tied at the midpoints of the edges eta = -1, +1 and
            // gamma_yz at the midpoints of xi = -1, +1.
            let bot = plain(0.0, -1.0);
            let top = plain(0.0, 1.0);
            let left = plain(-1.0, 0.0);
            let right = plain(1.0, 0.0);
            let mut r = [[0.0; 4]; 4];
            for i in 0..4 {
                r[i][0] = 0.5 * (1.0 - eta) * bot[i][0] + 0.5 * (1.0 + eta) * top[i][0];
                r[i][1] = 0.5 * (1.0 - eta) * bot[i][1] + 0.5 * (1.0 + eta) * top[i][1];
                r[i][2] = 0.5 * (1.0 - xi) * left[i][2] + 0.5 * (1.0 + xi) * right[i][2];
                r[i][3] = 0.5 * (1.0 - xi) * left[i][3] + 0.5 * (1.0 + xi) * right[i][3];
            }
            r
        }
    }
}

fn constitutive(lam: &LaminateStiffness) -> SMatrix<f64, 8, 8> {
    let mut c = SMatrix::<f64, 8, 8>::zeros();
    for i in 0..3 {
        for j in 0..3 {
            c[(i, j)] = lam.a[(i, j)];
            c[(i, j + 3)] = lam.b[(i, j)];
            c[(i + 3, j)] = lam.b[(i, j)];
            c[(i + 3, j + 3)] = lam.d[(i, j)];
        }
    }
    for i in 0..2 {
        for j in 0..2 {
            c[(6 + i, 6 + j)] = lam.e[(i, j)];
        }
    }
    c
}

fn inertia_matrix(lam: &LaminateStiffness) -> SMatrix<f64, 5, 5> {
    let [i0, i1, i2] = lam.inertia;
    let mut r = SMatrix::<f64, 5, 5>::zeros();
    r[(0, 0)] = i0;
    r[(1, 1)] = i0;
    r[(2, 2)] = i0;
    r[(3, 3)] = i2;
    r[(4, 4)] = i2;
    r[(0, 3)] = i1;
    r[(3, 0)] = i1;
    r[(1, 4)] = i1;
    r[(4, 1)] = i1;
    r
}

/// Stiffness and mass of element `index`.
///
/// Standard elements use 2x2 Gauss points; split elements integrate the
/// material side only with three points per sub-triangle; blending elements
/// use 2x2 Gauss points. Enriched columns carry the shifted Heaviside
/// `H(x) - H(x_j)` times the standard columns of node `j`; on the integrated
/// (material) side `H(x) = 1`.
pub fn element_matrices(index: usize, mesh: &Mesh, plate: &PlateModel, options: &FemOptions) -> Result<ElementMatrices> {
    let kind = mesh.kinds[index];
    if kind == ElementKind::Void {
        return Err(Error::InvalidArgument(format!("element {index} is void")));
    }
    let conn = mesh.elements[index];
    let (hx, hy) = mesh.element_size();
    let x_mid = 0.5 * (mesh.coords[conn[0]][0] + mesh.coords[conn[1]][0]);
    let det_j = 0.25 * hx * hy;

    let enriched = kind != ElementKind::Standard;
    let ndof = if enriched { 2 * STD } else { STD };
    let shifted: [f64; 4] = std::array::from_fn(|i| {
        if mesh.enriched_nodes[conn[i]] {
            1.0 - if mesh.phi[conn[i]] > 0.0 { 1.0 } else { 0.0 }
        } else {
            0.0
        }
    });

    let points = match kind {
        ElementKind::Split => split_rule(std::array::from_fn(|i| mesh.phi[conn[i]]))?,
        _ => gauss_2x2(),
    };

    let centroid_lam = abd_unchecked(&plate.plies, x_mid, plate.a, plate.shear_correction);
    let mut k = DMatrix::<f64>::zeros(ndof, ndof);
    let mut m = DMatrix::<f64>::zeros(ndof, ndof);
    let mut bmat = DMatrix::<f64>::zeros(8, ndof);
    let mut nmat = DMatrix::<f64>::zeros(5, ndof);

    for qp in &points {
        let x = x_mid + 0.5 * hx * qp.xi;
        let lam = match options.angle_sampling {
            AngleSampling::GaussPoint => abd_unchecked(&plate.plies, x, plate.a, plate.shear_correction),
            AngleSampling::ElementCentroid => centroid_lam,
        };
        let c = constitutive(&lam);
        let rho = inertia_matrix(&lam);
        let (n, dxi, deta) = shape(qp.xi, qp.eta);
        let sh = shear_rows(qp.xi, qp.eta, hx, hy, options.shear);

        bmat.fill(0.0);
        nmat.fill(0.0);
        let blocks = if enriched { 2 } else { 1 };
        for blk in 0..blocks {
            for i in 0..4 {
                let scale = if blk == 0 { 1.0 } else { shifted[i] };
                if scale == 0.0 {
                    continue;
                }
                let col = blk * STD + i * NODE_DOFS;
                let nx = dxi[i] * 2.0 / hx * scale;
                let ny = deta[i] * 2.0 / hy * scale;
                // membrane
                bmat[(0, col)] = nx;
                bmat[(1, col + 1)] = ny;
                bmat[(2, col)] = ny;
                bmat[(2, col + 1)] = nx;
                // bending
                bmat[(3, col + 3)] = nx;
                bmat[(4, col + 4)] = ny;
                bmat[(5, col + 3)] = ny;
                bmat[(5, col + 4)] = nx;
                // shear
                bmat[(6, col + 2)] = sh[i][0] * scale;
                bmat[(6, col + 3)] = sh[i][1] * scale;
                bmat[(7, col + 2)] = sh[i][2] * scale;
                bmat[(7, col + 4)] = sh[i][3] * scale;
                for d in 0..NODE_DOFS {
                    nmat[(d, col + d)] = n[i] * scale;
                }
            }
        }
        let w = qp.w * det_j;
        let cb = c * &bmat;
        k.gemm_tr(w, &bmat, &cb, 1.0);
        let rn = rho * &nmat;
        m.gemm_tr(w, &nmat, &rn, 1.0);
    }

    // Exact symmetry.
    for i in 0..ndof {
        for j in (i + 1)..ndof {
            let ks = 0.5 * (k[(i, j)] + k[(j, i)]);
            k[(i, j)] = ks;
            k[(j, i)] = ks;
            let ms = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = ms;
            m[(j, i)] = ms;
        }
    }

    let mut dofs = Vec::with_capacity(ndof);
    for &node in &conn {
        dofs.extend_from_slice(&mesh.dofs[node].standard);
    }
    if enriched {
        for &node in &conn {
            dofs.extend_from_slice(&mesh.dofs[node].enriched);
        }
    }
    Ok(ElementMatrices { k, m, dofs })
}
