//! Reference cells, element maps, the 2D mesh and the mesh generators.

mod cell;
mod generate;
mod refmap;

use std::collections::HashMap;

pub use cell::CellKind;
pub use generate::{generate_mesh, MeshFamily, MeshFamilyParams};
pub use refmap::{h2_parallelogram_defect, RefMap};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BoundaryKind {
    Dirichlet,
    Neumann,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Cell {
    pub kind: CellKind,
    pub vertices: Vec<usize>,
}

/// A mesh edge. `cells[0]` is the lower-indexed adjacent cell; the edge's
/// global normal is the outward normal of `cells[0]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Face {
    pub vertices: [usize; 2],
    pub cells: [usize; 2],
    pub n_cells: usize,
}

impl Face {
    pub fn is_boundary(&self) -> bool {
        self.n_cells == 1
    }

    pub fn adjacent_cells(&self) -> &[usize] {
        &self.cells[..self.n_cells]
    }
}

/// A conforming 2D mesh of triangles and convex quadrilaterals.
///
/// Immutable once built; boundary markers are assigned through
/// [`Mesh::with_boundary`].
#[derive(Clone, Debug)]
pub struct Mesh {
    vertices: Vec<[f64; 2]>,
    cells: Vec<Cell>,
    faces: Vec<Face>,
    /// Per cell and local face: global face id and orientation sign.
    cell_faces: Vec<Vec<(usize, f64)>>,
    boundary: Vec<Option<BoundaryKind>>,
    vertex_cells: Vec<Vec<usize>>,
    vertex_faces: Vec<Vec<usize>>,
    h: f64,
}

impl Mesh {
    /// Build the face structure and validate every cell.
    ///
    /// All boundary faces start out Dirichlet.
    pub fn new(vertices: Vec<[f64; 2]>, cells: Vec<Cell>) -> Result<Self> {
        for (c, cell) in cells.iter().enumerate() {
            if cell.kind.dim() != 2 {
                return Err(Error::Structure(format!(
                    "cell {c} is a {:?}; the mesh is two-dimensional",
                    cell.kind
                )));
            }
            if cell.vertices.len() != cell.kind.n_vertices() {
                return Err(Error::Structure(format!(
                    "cell {c} has {} vertices, expected {}",
                    cell.vertices.len(),
                    cell.kind.n_vertices()
                )));
            }
            if let Some(&v) = cell.vertices.iter().find(|&&v| v >= vertices.len()) {
                return Err(Error::Structure(format!("cell {c} references missing vertex {v}")));
            }
        }

        let mut lookup: HashMap<(usize, usize), usize> = HashMap::new();
        let mut faces: Vec<Face> = Vec::new();
        let mut cell_faces = Vec::with_capacity(cells.len());
        for (c, cell) in cells.iter().enumerate() {
            let mut local = Vec::with_capacity(cell.kind.n_faces());
            for fv in cell.kind.faces() {
                let (a, b) = (cell.vertices[fv[0]], cell.vertices[fv[1]]);
                let key = (a.min(b), a.max(b));
                let id = match lookup.get(&key) {
                    Some(&id) => {
                        let f = &mut faces[id];
                        if f.n_cells == 2 {
                            return Err(Error::Structure(format!(
                                "edge {key:?} is shared by more than two cells"
                            )));
                        }
                        f.cells[1] = c;
                        f.n_cells = 2;
                        id
                    }
                    None => {
                        faces.push(Face {
                            vertices: [key.0, key.1],
                            cells: [c, usize::MAX],
                            n_cells: 1,
                        });
                        lookup.insert(key, faces.len() - 1);
                        faces.len() - 1
                    }
                };
                // cells are visited in increasing order, so the first visitor owns the normal
                let sign = if faces[id].cells[0] == c { 1.0 } else { -1.0 };
                local.push((id, sign));
            }
            cell_faces.push(local);
        }

        let mut vertex_cells = vec![Vec::new(); vertices.len()];
        for (c, cell) in cells.iter().enumerate() {
            for &v in &cell.vertices {
                vertex_cells[v].push(c);
            }
        }
        let mut vertex_faces = vec![Vec::new(); vertices.len()];
        for (f, face) in faces.iter().enumerate() {
            for &v in &face.vertices {
                vertex_faces[v].push(f);
            }
        }
        let boundary = faces
            .iter()
            .map(|f| f.is_boundary().then_some(BoundaryKind::Dirichlet))
            .collect();

        let mut mesh = Mesh {
            vertices,
            cells,
            faces,
            cell_faces,
            boundary,
            vertex_cells,
            vertex_faces,
            h: 0.0,
        };
        mesh.validate_geometry()?;
        mesh.h = (0..mesh.n_cells())
            .map(|c| mesh.ref_map(c).diameter())
            .fold(0.0, f64::max);
        Ok(mesh)
    }

    fn validate_geometry(&self) -> Result<()> {
        for c in 0..self.n_cells() {
            let map = self.ref_map(c);
            let kind = map.kind();
            if kind == CellKind::Quadrilateral && !is_convex_quad(&self.cell_points(c)) {
                return Err(Error::MeshGeneration {
                    cell: c,
                    reason: "quadrilateral is not strictly convex".into(),
                });
            }
            let center = kind.reference_center();
            let mut points: Vec<&[f64]> = kind.reference_vertices().iter().map(|r| &r[..2]).collect();
            points.push(&center[..2]);
            for p in points {
                if let Err(e) = map.jacobian(p) {
                    return Err(Error::MeshGeneration {
                        cell: c,
                        reason: e.to_string(),
                    });
                }
            }
        }
        Ok(())
    }

    /// Assign a boundary marker to every boundary face from its midpoint.
    pub fn with_boundary<F>(mut self, classify: F) -> Result<Self>
    where
        F: Fn(f64, f64) -> Result<BoundaryKind>,
    {
        for (f, face) in self.faces.iter().enumerate() {
            if face.is_boundary() {
                let a = self.vertices[face.vertices[0]];
                let b = self.vertices[face.vertices[1]];
                self.boundary[f] = Some(classify(0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1]))?);
            }
        }
        Ok(self)
    }

    pub fn dimension(&self) -> usize {
        2
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn n_faces(&self) -> usize {
        self.faces.len()
    }

    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.vertices
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn cell(&self, c: usize) -> &Cell {
        &self.cells[c]
    }

    pub fn faces(&self) -> &[Face] {
        &self.faces
    }

    pub fn face(&self, f: usize) -> &Face {
        &self.faces[f]
    }

    /// Global face and orientation sign of local face `lf` of cell `c`.
    pub fn cell_face(&self, c: usize, lf: usize) -> (usize, f64) {
        self.cell_faces[c][lf]
    }

    pub fn boundary_marker(&self, f: usize) -> Option<BoundaryKind> {
        self.boundary[f]
    }

    pub fn vertex_cells(&self, v: usize) -> &[usize] {
        &self.vertex_cells[v]
    }

    pub fn vertex_faces(&self, v: usize) -> &[usize] {
        &self.vertex_faces[v]
    }

    /// Characteristic size: the largest element diameter.
    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn cell_points(&self, c: usize) -> Vec<[f64; 2]> {
        self.cells[c].vertices.iter().map(|&v| self.vertices[v]).collect()
    }

    pub fn ref_map(&self, c: usize) -> RefMap {
        RefMap::from_2d(self.cells[c].kind, &self.cell_points(c)).expect("cell vertex count validated at construction")
    }

    pub fn face_length(&self, f: usize) -> f64 {
        let [a, b] = self.faces[f].vertices;
        let (p, q) = (self.vertices[a], self.vertices[b]);
        ((q[0] - p[0]).powi(2) + (q[1] - p[1]).powi(2)).sqrt()
    }

    /// Unit normal of face `f` in its global orientation (outward from `cells[0]`).
    pub fn face_normal(&self, f: usize) -> [f64; 2] {
        let c = self.faces[f].cells[0];
        let lf = self.local_face(c, f).expect("face owner lists the face");
        self.outward_normal(c, lf)
    }

    /// Local index of global face `f` within cell `c`.
    pub fn local_face(&self, c: usize, f: usize) -> Option<usize> {
        self.cell_faces[c].iter().position(|&(g, _)| g == f)
    }

    /// Outward unit normal of local face `lf` of cell `c`.
    pub fn outward_normal(&self, c: usize, lf: usize) -> [f64; 2] {
        let cell = &self.cells[c];
        let fv = cell.kind.faces()[lf];
        let p = self.vertices[cell.vertices[fv[0]]];
        let q = self.vertices[cell.vertices[fv[1]]];
        // counterclockwise cells: rotate the edge direction clockwise
        let (dx, dy) = (q[0] - p[0], q[1] - p[1]);
        let len = (dx * dx + dy * dy).sqrt();
        [dy / len, -dx / len]
    }
}

/// Strict convexity from the cross products of consecutive edge vectors.
pub fn is_convex_quad(p: &[[f64; 2]]) -> bool {
    (0..4).all(|i| {
        let a = p[i];
        let b = p[(i + 1) % 4];
        let c = p[(i + 2) % 4];
        let e1 = [b[0] - a[0], b[1] - a[1]];
        let e2 = [c[0] - b[0], c[1] - b[1]];
        e1[0] * e2[1] - e1[1] * e2[0] > 0.0
    })
}
