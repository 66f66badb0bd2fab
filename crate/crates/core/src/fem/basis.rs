use std::sync::OnceLock;

use nalgebra::DMatrix;

use super::poly::{Poly, VecPoly};
use crate::mesh::CellKind;

/// A velocity degree of freedom on the reference cell: the normal component
/// on local face `face` evaluated at local vertex `vertex`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DofDescriptor {
    pub face: usize,
    pub vertex: usize,
}

/// Nodal basis of the reference velocity space (BDM1 on triangles and
/// squares, BDDF1 on tetrahedra, enhanced BDDF1 on cubes).
#[derive(Debug)]
pub struct BasisSet {
    kind: CellKind,
    span: Vec<VecPoly>,
    /// Column `j` holds the span coefficients of basis function `j`.
    coeffs: DMatrix<f64>,
    dofs: Vec<DofDescriptor>,
    divergence: Vec<f64>,
    /// Per reference vertex: the DOFs located there and their basis values.
    corners: Vec<Vec<(usize, [f64; 3])>>,
}

impl BasisSet {
    pub fn kind(&self) -> CellKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.kind.dim()
    }

    pub fn n_vdofs(&self) -> usize {
        self.dofs.len()
    }

    pub fn dofs(&self) -> &[DofDescriptor] {
        &self.dofs
    }

    /// Basis values at `x̂`, written as `out[k * d + a]`.
    pub fn eval(&self, xh: &[f64], out: &mut [f64]) {
        let d = self.dim();
        let n = self.n_vdofs();
        let mut s = vec![0.0; n * d];
        for (m, p) in self.span.iter().enumerate() {
            p.eval(xh, &mut s[m * d..(m + 1) * d]);
        }
        out[..n * d].iter_mut().for_each(|v| *v = 0.0);
        for j in 0..n {
            for m in 0..n {
                let c = self.coeffs[(m, j)];
                if c != 0.0 {
                    for a in 0..d {
                        out[j * d + a] += c * s[m * d + a];
                    }
                }
            }
        }
    }

    /// Basis values at `x̂` as a list of vectors.
    pub fn values(&self, xh: &[f64]) -> Vec<Vec<f64>> {
        let d = self.dim();
        let mut out = vec![0.0; self.n_vdofs() * d];
        self.eval(xh, &mut out);
        out.chunks(d).map(|c| c.to_vec()).collect()
    }

    /// Reference divergence of basis `k`; constant on the reference cell.
    pub fn divergence(&self, k: usize) -> f64 {
        self.divergence[k]
    }

    /// Divergence of basis `k` at an arbitrary reference point, from the
    /// polynomial representation.
    pub fn divergence_at(&self, k: usize, xh: &[f64]) -> f64 {
        self.span
            .iter()
            .enumerate()
            .map(|(m, p)| self.coeffs[(m, k)] * p.divergence(xh))
            .sum()
    }

    /// DOFs sitting at reference vertex `v`, with their basis values there.
    /// All other basis functions vanish at that vertex.
    pub fn corner(&self, v: usize) -> &[(usize, [f64; 3])] {
        &self.corners[v]
    }

    /// `v̂_k · n̂` on reference face `face` at `x̂`.
    pub fn normal_trace(&self, k: usize, face: usize, xh: &[f64]) -> f64 {
        let d = self.dim();
        let mut out = vec![0.0; self.n_vdofs() * d];
        self.eval(xh, &mut out);
        let n = self.kind.reference_normal(face);
        (0..d).map(|a| out[k * d + a] * n[a]).sum()
    }
}

fn spanning_set(kind: CellKind) -> Vec<VecPoly> {
    let d = kind.dim();
    let mut span = Vec::new();
    // (P1)^d
    for a in 0..d {
        span.push(VecPoly::unit(d, a, [0, 0, 0]));
        for b in 0..d {
            let mut e = [0, 0, 0];
            e[b] = 1;
            span.push(VecPoly::unit(d, a, e));
        }
    }
    let m = |e: [u32; 3]| Poly::monomial(1.0, e);
    let z = Poly::zero();
    match kind {
        CellKind::Triangle | CellKind::Tetrahedron => {}
        CellKind::Quadrilateral => {
            span.push(VecPoly::curl2(&m([2, 1, 0])));
            span.push(VecPoly::curl2(&m([1, 2, 0])));
        }
        CellKind::Hexahedron => {
            let potentials: [[Poly; 3]; 12] = [
                // BDDF1 supplement
                [z.clone(), z.clone(), m([1, 1, 1])],
                [z.clone(), z.clone(), m([1, 2, 0])],
                [m([1, 1, 1]), z.clone(), z.clone()],
                [m([0, 1, 2]), z.clone(), z.clone()],
                [z.clone(), m([1, 1, 1]), z.clone()],
                [z.clone(), m([2, 0, 1]), z.clone()],
                // enhancement
                [z.clone(), z.clone(), m([2, 0, 1])],
                [z.clone(), z.clone(), m([2, 1, 1])],
                [m([1, 2, 0]), z.clone(), z.clone()],
                [m([1, 2, 1]), z.clone(), z.clone()],
                [z.clone(), m([0, 1, 2]), z.clone()],
                [z.clone(), m([1, 1, 2]), z.clone()],
            ];
            for [a, b, c] in &potentials {
                span.push(VecPoly::curl3([a, b, c]));
            }
        }
    }
    span
}

fn dof_descriptors(kind: CellKind) -> Vec<DofDescriptor> {
    kind.faces()
        .iter()
        .enumerate()
        .flat_map(|(face, verts)| verts.iter().map(move |&vertex| DofDescriptor { face, vertex }))
        .collect()
}

fn nodal_matrix_of(kind: CellKind, span: &[VecPoly], dofs: &[DofDescriptor]) -> DMatrix<f64> {
    let d = kind.dim();
    let mut v = vec![0.0; d];
    DMatrix::from_fn(dofs.len(), span.len(), |k, m| {
        let dof = dofs[k];
        let r = &kind.reference_vertices()[dof.vertex][..d];
        let n = kind.reference_normal(dof.face);
        span[m].eval(r, &mut v);
        (0..d).map(|a| v[a] * n[a]).sum()
    })
}

/// DOF functionals applied to the monomial spanning set of the space.
pub fn nodal_matrix(kind: CellKind) -> DMatrix<f64> {
    nodal_matrix_of(kind, &spanning_set(kind), &dof_descriptors(kind))
}

fn build(kind: CellKind) -> BasisSet {
    let span = spanning_set(kind);
    let dofs = dof_descriptors(kind);
    assert_eq!(span.len(), dofs.len(), "spanning set size for {kind:?}");
    let coeffs = nodal_matrix_of(kind, &span, &dofs)
        .try_inverse()
        .unwrap_or_else(|| panic!("nodal system of {kind:?} is singular"));
    let d = kind.dim();
    let center = kind.reference_center();
    let mut basis = BasisSet {
        kind,
        span,
        coeffs,
        dofs,
        divergence: Vec::new(),
        corners: Vec::new(),
    };
    basis.divergence = (0..basis.n_vdofs())
        .map(|k| basis.divergence_at(k, &center[..d]))
        .collect();
    let mut values = vec![0.0; basis.n_vdofs() * d];
    basis.corners = kind
        .reference_vertices()
        .iter()
        .enumerate()
        .map(|(v, r)| {
            basis.eval(&r[..d], &mut values);
            basis
                .dofs
                .iter()
                .enumerate()
                .filter(|(_, dof)| dof.vertex == v)
                .map(|(k, _)| {
                    let mut val = [0.0; 3];
                    val[..d].copy_from_slice(&values[k * d..(k + 1) * d]);
                    (k, val)
                })
                .collect()
        })
        .collect();
    basis
}

/// The nodal reference basis of a cell kind, built once and cached.
pub fn reference_basis(kind: CellKind) -> &'static BasisSet {
    static TRI: OnceLock<BasisSet> = OnceLock::new();
    static QUAD: OnceLock<BasisSet> = OnceLock::new();
    static TET: OnceLock<BasisSet> = OnceLock::new();
    static HEX: OnceLock<BasisSet> = OnceLock::new();
    let cell = match kind {
        CellKind::Triangle => &TRI,
        CellKind::Quadrilateral => &QUAD,
        CellKind::Tetrahedron => &TET,
        CellKind::Hexahedron => &HEX,
    };
    cell.get_or_init(|| build(kind))
}
