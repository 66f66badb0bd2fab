//! Vertex (trapezoidal) quadrature for the velocity mass term.
//!
//! Both rules sample the integrand only at element vertices, so the basis
//! functions of one vertex decouple from all others and the velocity mass
//! matrix is block diagonal with one block per mesh vertex.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::fem::{reference_basis, DofMap};
use crate::gauss::reference_rule;
use crate::mesh::{CellKind, Mesh, RefMap};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum QuadratureVariant {
    Symmetric,
    NonSymmetric,
}

impl QuadratureVariant {
    pub fn name(self) -> &'static str {
        match self {
            QuadratureVariant::Symmetric => "symmetric",
            QuadratureVariant::NonSymmetric => "nonsymmetric",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "symmetric" | "sym" => Ok(QuadratureVariant::Symmetric),
            "nonsymmetric" | "non-symmetric" | "nonsym" => Ok(QuadratureVariant::NonSymmetric),
            other => Err(Error::Parameter(format!("unknown quadrature variant '{other}'"))),
        }
    }
}

/// Contribution of one element corner to the velocity mass matrix.
///
/// `matrix[(a, b)]` couples test function `dofs[a]` with trial function
/// `dofs[b]` (local reference DOF numbers of the cell).
#[derive(Clone, Debug, PartialEq)]
pub struct LocalVertexBlock {
    pub cell: usize,
    pub vertex: usize,
    pub dofs: Vec<usize>,
    pub matrix: DMatrix<f64>,
}

fn spd_inverse(k: DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    let sym = (&k - k.transpose()).amax() <= 1e-12 * k.amax().max(1.0);
    match k.cholesky() {
        Some(ch) if sym => Ok(ch.inverse()),
        _ => Err(Error::Coefficient(format!("{what} is not symmetric positive definite"))),
    }
}

/// Mean of a tensor field over the element, `J`-weighted tensor Gauss with two
/// points per direction.
fn mean_tensor(map: &RefMap, k: &dyn Fn(&[f64]) -> DMatrix<f64>) -> DMatrix<f64> {
    let d = map.dim();
    let mut sum = DMatrix::zeros(d, d);
    let mut vol = 0.0;
    for (xh, w) in reference_rule(map.kind(), 2) {
        let jw = w * map.jacobian_matrix(&xh).determinant();
        sum += k(&map.map_unchecked(&xh)) * jw;
        vol += jw;
    }
    sum / vol
}

/// Per-corner blocks of `(K⁻¹ ρ⁻¹ q, v)_{Q,E}` for one element.
///
/// `k` returns the (viscosity-scaled) permeability tensor at a physical
/// point, `rho` is the density of the element's pressure value. Blocks are
/// returned in local vertex order.
pub fn local_velocity_blocks(
    cell: usize,
    map: &RefMap,
    k: &dyn Fn(&[f64]) -> DMatrix<f64>,
    rho: f64,
    variant: QuadratureVariant,
) -> Result<Vec<LocalVertexBlock>> {
    let kind = map.kind();
    let d = kind.dim();
    if rho <= 0.0 || !rho.is_finite() {
        return Err(Error::Coefficient(format!("density {rho} is not positive")));
    }
    let weight = kind.reference_measure() / kind.n_vertices() as f64;
    let basis = reference_basis(kind);

    // the non-symmetric rule freezes K and DF^T at the element center
    let frozen = match variant {
        QuadratureVariant::Symmetric => None,
        QuadratureVariant::NonSymmetric => {
            if matches!(kind, CellKind::Triangle | CellKind::Tetrahedron) {
                return Err(Error::Variant(format!(
                    "the non-symmetric rule needs a mapped cell, not a {kind:?}"
                )));
            }
            let kbar_inv = spd_inverse(mean_tensor(map, k), "mean permeability")?;
            let center = kind.reference_center();
            let dfc = map.jacobian(&center[..d])?.0;
            Some(dfc.transpose() * kbar_inv)
        }
    };

    let mut blocks = Vec::with_capacity(kind.n_vertices());
    for (v, r) in kind.reference_vertices().iter().enumerate() {
        let r = &r[..d];
        let (df, j) = map.jacobian(r)?;
        let left = match &frozen {
            None => {
                let kinv = spd_inverse(k(&map.map_unchecked(r)), "permeability")?;
                df.transpose() * kinv
            }
            Some(m) => m.clone(),
        };
        let kt = left * &df * (weight / (j * rho));
        let corner = basis.corner(v);
        let vecs: Vec<nalgebra::DVector<f64>> = corner
            .iter()
            .map(|(_, val)| nalgebra::DVector::from_column_slice(&val[..d]))
            .collect();
        let n = corner.len();
        let matrix = DMatrix::from_fn(n, n, |a, b| vecs[a].dot(&(&kt * &vecs[b])));
        blocks.push(LocalVertexBlock {
            cell,
            vertex: v,
            dofs: corner.iter().map(|c| c.0).collect(),
            matrix,
        });
    }
    Ok(blocks)
}

/// `(K⁻¹ ρ⁻¹(p) q, v)_Q` summed over all elements.
///
/// `k(cell, x)` gives the permeability tensor, `rho[c]` the density in cell `c`.
pub fn quadrature_bilinear_form(
    mesh: &Mesh,
    dofs: &DofMap,
    k: &dyn Fn(usize, &[f64]) -> DMatrix<f64>,
    rho: &[f64],
    variant: QuadratureVariant,
    q: &[f64],
    v: &[f64],
) -> Result<f64> {
    if q.len() != dofs.n_velocity() || v.len() != dofs.n_velocity() {
        return Err(Error::Dimension {
            expected: dofs.n_velocity(),
            got: q.len().min(v.len()),
        });
    }
    let mut sum = 0.0;
    for c in 0..mesh.n_cells() {
        let map = mesh.ref_map(c);
        let kc = |x: &[f64]| k(c, x);
        let local = dofs.cell_dofs(c);
        for block in local_velocity_blocks(c, &map, &kc, rho[c], variant)? {
            for (a, &ka) in block.dofs.iter().enumerate() {
                let (ga, fa) = local[ka];
                for (b, &kb) in block.dofs.iter().enumerate() {
                    let (gb, fb) = local[kb];
                    sum += fa * v[ga] * block.matrix[(a, b)] * fb * q[gb];
                }
            }
        }
    }
    Ok(sum)
}
