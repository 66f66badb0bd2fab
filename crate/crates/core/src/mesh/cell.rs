//! Reference cells.
//!
//! Vertex numbering:
//! - unit triangle `(0,0), (1,0), (0,1)`
//! - unit square, counterclockwise from the origin: `(0,0), (1,0), (1,1), (0,1)`
//! - unit tetrahedron `(0,0,0), (1,0,0), (0,1,0), (0,0,1)`
//! - unit cube: the square at `z = 0` followed by the square at `z = 1`

use std::f64::consts::SQRT_2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CellKind {
    Triangle,
    Quadrilateral,
    Tetrahedron,
    Hexahedron,
}

const TRI_VERTS: [[f64; 3]; 3] = [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]];
const QUAD_VERTS: [[f64; 3]; 4] = [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [1.0, 1.0, 0.0], [0.0, 1.0, 0.0]];
const TET_VERTS: [[f64; 3]; 4] = [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
const HEX_VERTS: [[f64; 3]; 8] = [
    [0.0, 0.0, 0.0],
    [1.0, 0.0, 0.0],
    [1.0, 1.0, 0.0],
    [0.0, 1.0, 0.0],
    [0.0, 0.0, 1.0],
    [1.0, 0.0, 1.0],
    [1.0, 1.0, 1.0],
    [0.0, 1.0, 1.0],
];

const TRI_FACES: [&[usize]; 3] = [&[0, 1], &[1, 2], &[2, 0]];
const QUAD_FACES: [&[usize]; 4] = [&[0, 1], &[1, 2], &[2, 3], &[3, 0]];
const TET_FACES: [&[usize]; 4] = [&[0, 1, 2], &[0, 1, 3], &[0, 2, 3], &[1, 2, 3]];
const HEX_FACES: [&[usize]; 6] = [
    &[0, 3, 7, 4],
    &[1, 2, 6, 5],
    &[0, 1, 5, 4],
    &[3, 2, 6, 7],
    &[0, 1, 2, 3],
    &[4, 5, 6, 7],
];

const INV_SQRT_3: f64 = 0.577_350_269_189_625_8;

const TRI_NORMALS: [[f64; 3]; 3] = [[0.0, -1.0, 0.0], [1.0 / SQRT_2, 1.0 / SQRT_2, 0.0], [-1.0, 0.0, 0.0]];
const QUAD_NORMALS: [[f64; 3]; 4] = [[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [-1.0, 0.0, 0.0]];
const TET_NORMALS: [[f64; 3]; 4] = [
    [0.0, 0.0, -1.0],
    [0.0, -1.0, 0.0],
    [-1.0, 0.0, 0.0],
    [INV_SQRT_3, INV_SQRT_3, INV_SQRT_3],
];
const HEX_NORMALS: [[f64; 3]; 6] = [
    [-1.0, 0.0, 0.0],
    [1.0, 0.0, 0.0],
    [0.0, -1.0, 0.0],
    [0.0, 1.0, 0.0],
    [0.0, 0.0, -1.0],
    [0.0, 0.0, 1.0],
];

impl CellKind {
    pub fn dim(self) -> usize {
        match self {
            CellKind::Triangle | CellKind::Quadrilateral => 2,
            CellKind::Tetrahedron | CellKind::Hexahedron => 3,
        }
    }

    pub fn n_vertices(self) -> usize {
        match self {
            CellKind::Triangle => 3,
            CellKind::Quadrilateral | CellKind::Tetrahedron => 4,
            CellKind::Hexahedron => 8,
        }
    }

    pub fn n_faces(self) -> usize {
        self.faces().len()
    }

    /// Vertices per face (edge in 2D).
    pub fn face_vertex_count(self) -> usize {
        match self {
            CellKind::Triangle | CellKind::Quadrilateral => 2,
            CellKind::Tetrahedron => 3,
            CellKind::Hexahedron => 4,
        }
    }

    /// Reference vertex coordinates, padded to three components.
    pub fn reference_vertices(self) -> &'static [[f64; 3]] {
        match self {
            CellKind::Triangle => &TRI_VERTS,
            CellKind::Quadrilateral => &QUAD_VERTS,
            CellKind::Tetrahedron => &TET_VERTS,
            CellKind::Hexahedron => &HEX_VERTS,
        }
    }

    /// Local vertex lists of the faces, ordered cyclically.
    pub fn faces(self) -> &'static [&'static [usize]] {
        match self {
            CellKind::Triangle => &TRI_FACES,
            CellKind::Quadrilateral => &QUAD_FACES,
            CellKind::Tetrahedron => &TET_FACES,
            CellKind::Hexahedron => &HEX_FACES,
        }
    }

    /// Outward unit normal of reference face `f`.
    pub fn reference_normal(self, f: usize) -> [f64; 3] {
        match self {
            CellKind::Triangle => TRI_NORMALS[f],
            CellKind::Quadrilateral => QUAD_NORMALS[f],
            CellKind::Tetrahedron => TET_NORMALS[f],
            CellKind::Hexahedron => HEX_NORMALS[f],
        }
    }

    /// Length (2D) or area (3D) of reference face `f`.
    pub fn reference_face_measure(self, f: usize) -> f64 {
        match (self, f) {
            (CellKind::Triangle, 1) => SQRT_2,
            (CellKind::Tetrahedron, 3) => 3f64.sqrt() / 2.0,
            (CellKind::Tetrahedron, _) => 0.5,
            _ => 1.0,
        }
    }

    pub fn reference_measure(self) -> f64 {
        match self {
            CellKind::Triangle => 0.5,
            CellKind::Tetrahedron => 1.0 / 6.0,
            CellKind::Quadrilateral | CellKind::Hexahedron => 1.0,
        }
    }

    /// Center of mass of the reference cell.
    pub fn reference_center(self) -> [f64; 3] {
        match self {
            CellKind::Triangle => [1.0 / 3.0, 1.0 / 3.0, 0.0],
            CellKind::Quadrilateral => [0.5, 0.5, 0.0],
            CellKind::Tetrahedron => [0.25, 0.25, 0.25],
            CellKind::Hexahedron => [0.5, 0.5, 0.5],
        }
    }

    /// Faces meeting at local vertex `v`, in increasing face order.
    pub fn faces_at_vertex(self, v: usize) -> Vec<usize> {
        self.faces()
            .iter()
            .enumerate()
            .filter(|(_, fv)| fv.contains(&v))
            .map(|(f, _)| f)
            .collect()
    }

    /// Whether `x` lies in the closed reference cell (up to `tol`).
    pub fn contains(self, x: &[f64], tol: f64) -> bool {
        if x.len() != self.dim() {
            return false;
        }
        let in_unit = x.iter().all(|&c| c >= -tol && c <= 1.0 + tol);
        match self {
            CellKind::Quadrilateral | CellKind::Hexahedron => in_unit,
            CellKind::Triangle | CellKind::Tetrahedron => in_unit && x.iter().sum::<f64>() <= 1.0 + tol,
        }
    }

    /// VTK legacy cell type id.
    pub fn vtk_type(self) -> u8 {
        match self {
            CellKind::Triangle => 5,
            CellKind::Quadrilateral => 9,
            CellKind::Tetrahedron => 10,
            CellKind::Hexahedron => 12,
        }
    }

    pub(crate) fn shape_values(self, x: &[f64], out: &mut [f64]) {
        match self {
            CellKind::Triangle => {
                out[0] = 1.0 - x[0] - x[1];
                out[1] = x[0];
                out[2] = x[1];
            }
            CellKind::Quadrilateral => {
                let (s, t) = (x[0], x[1]);
                out[0] = (1.0 - s) * (1.0 - t);
                out[1] = s * (1.0 - t);
                out[2] = s * t;
                out[3] = (1.0 - s) * t;
            }
            CellKind::Tetrahedron => {
                out[0] = 1.0 - x[0] - x[1] - x[2];
                out[1] = x[0];
                out[2] = x[1];
                out[3] = x[2];
            }
            CellKind::Hexahedron => {
                for (k, r) in HEX_VERTS.iter().enumerate() {
                    out[k] = (0..3).map(|a| if r[a] == 1.0 { x[a] } else { 1.0 - x[a] }).product();
                }
            }
        }
    }

    /// Gradients of the shape functions, `out[k * dim + a] = d N_k / d x_a`.
    pub(crate) fn shape_gradients(self, x: &[f64], out: &mut [f64]) {
        match self {
            CellKind::Triangle => {
                out.copy_from_slice(&[-1.0, -1.0, 1.0, 0.0, 0.0, 1.0]);
            }
            CellKind::Quadrilateral => {
                let (s, t) = (x[0], x[1]);
                out.copy_from_slice(&[-(1.0 - t), -(1.0 - s), 1.0 - t, -s, t, s, -t, 1.0 - s]);
            }
            CellKind::Tetrahedron => {
                out.copy_from_slice(&[-1.0, -1.0, -1.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
            }
            CellKind::Hexahedron => {
                for (k, r) in HEX_VERTS.iter().enumerate() {
                    let f = |a: usize| if r[a] == 1.0 { x[a] } else { 1.0 - x[a] };
                    let df = |a: usize| if r[a] == 1.0 { 1.0 } else { -1.0 };
                    out[k * 3] = df(0) * f(1) * f(2);
                    out[k * 3 + 1] = f(0) * df(1) * f(2);
                    out[k * 3 + 2] = f(0) * f(1) * df(2);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_match_kind() {
        let expect = [
            (CellKind::Triangle, 3, 3),
            (CellKind::Quadrilateral, 4, 4),
            (CellKind::Tetrahedron, 4, 4),
            (CellKind::Hexahedron, 8, 6),
        ];
        for (k, nv, nf) in expect {
            assert_eq!(k.n_vertices(), nv);
            assert_eq!(k.n_faces(), nf);
            assert_eq!(k.reference_vertices().len(), nv);
        }
    }

    #[test]
    fn every_vertex_meets_dim_faces() {
        for k in [
            CellKind::Triangle,
            CellKind::Quadrilateral,
            CellKind::Tetrahedron,
            CellKind::Hexahedron,
        ] {
            for v in 0..k.n_vertices() {
                assert_eq!(k.faces_at_vertex(v).len(), k.dim(), "{k:?} vertex {v}");
            }
        }
    }

    #[test]
    fn normals_point_outward() {
        for k in [
            CellKind::Triangle,
            CellKind::Quadrilateral,
            CellKind::Tetrahedron,
            CellKind::Hexahedron,
        ] {
            let c = k.reference_center();
            let verts = k.reference_vertices();
            for (f, fv) in k.faces().iter().enumerate() {
                let n = k.reference_normal(f);
                let p = verts[fv[0]];
                let d: f64 = (0..3).map(|a| (p[a] - c[a]) * n[a]).sum();
                assert!(d > 0.0, "{k:?} face {f}");
                // every face vertex lies on the face plane
                for &v in fv.iter() {
                    let q = verts[v];
                    let e: f64 = (0..3).map(|a| (q[a] - p[a]) * n[a]).sum();
                    assert!(e.abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn shape_functions_interpolate_vertices() {
        for k in [
            CellKind::Triangle,
            CellKind::Quadrilateral,
            CellKind::Tetrahedron,
            CellKind::Hexahedron,
        ] {
            let mut vals = vec![0.0; k.n_vertices()];
            for (i, r) in k.reference_vertices().iter().enumerate() {
                k.shape_values(&r[..k.dim()], &mut vals);
                for (j, v) in vals.iter().enumerate() {
                    assert_eq!(*v, if i == j { 1.0 } else { 0.0 });
                }
            }
        }
    }
}
