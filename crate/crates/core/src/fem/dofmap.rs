use super::basis::reference_basis;
use crate::error::{Error, Result};
use crate::mesh::{BoundaryKind, Mesh};

/// Global numbering of velocity and pressure unknowns.
///
/// Velocity unknowns are grouped per mesh vertex: the group of vertex `v`
/// holds one unknown per face meeting `v`, in the order of
/// [`Mesh::vertex_faces`]. The unknown of `(face e, vertex r)` is the
/// volumetric flux `(u · n_e)(r) |e|` with respect to the face's global normal.
/// Pressure unknowns are numbered like cells.
#[derive(Clone, Debug)]
pub struct DofMap {
    n_cells: usize,
    vertex_offsets: Vec<usize>,
    dof_face: Vec<usize>,
    dof_vertex: Vec<usize>,
    /// Per cell and local DOF: global DOF and the factor turning the global
    /// coefficient into the local reference coefficient.
    cell_dofs: Vec<Vec<(usize, f64)>>,
    essential: Vec<bool>,
    /// Per face: its two global DOFs, ordered like the face's vertices.
    face_dofs: Vec<[usize; 2]>,
}

impl DofMap {
    /// Total number of velocity unknowns `L`.
    pub fn n_velocity(&self) -> usize {
        self.dof_face.len()
    }

    pub fn n_pressure(&self) -> usize {
        self.n_cells
    }

    pub fn n_vertex_groups(&self) -> usize {
        self.vertex_offsets.len() - 1
    }

    /// Global DOF range of the group of vertex `v`.
    pub fn vertex_group(&self, v: usize) -> std::ops::Range<usize> {
        self.vertex_offsets[v]..self.vertex_offsets[v + 1]
    }

    pub fn dof_face(&self, dof: usize) -> usize {
        self.dof_face[dof]
    }

    pub fn dof_vertex(&self, dof: usize) -> usize {
        self.dof_vertex[dof]
    }

    pub fn cell_dofs(&self, c: usize) -> &[(usize, f64)] {
        &self.cell_dofs[c]
    }

    /// Whether the DOF lies on a no-flux (Neumann) face and is fixed to zero.
    pub fn is_essential(&self, dof: usize) -> bool {
        self.essential[dof]
    }

    pub fn face_dofs(&self, f: usize) -> [usize; 2] {
        self.face_dofs[f]
    }
}

/// Number the velocity and pressure unknowns of a 2D mesh.
pub fn build_dof_map(mesh: &Mesh) -> Result<DofMap> {
    let nv = mesh.n_vertices();
    let mut vertex_offsets = Vec::with_capacity(nv + 1);
    vertex_offsets.push(0);
    let mut dof_face = Vec::new();
    let mut dof_vertex = Vec::new();
    for v in 0..nv {
        for &f in mesh.vertex_faces(v) {
            dof_face.push(f);
            dof_vertex.push(v);
        }
        vertex_offsets.push(dof_face.len());
    }
    let find = |f: usize, v: usize| -> Result<usize> {
        let pos = mesh
            .vertex_faces(v)
            .iter()
            .position(|&g| g == f)
            .ok_or_else(|| Error::Structure(format!("face {f} is not incident to vertex {v}")))?;
        Ok(vertex_offsets[v] + pos)
    };

    let mut face_dofs = Vec::with_capacity(mesh.n_faces());
    for (f, face) in mesh.faces().iter().enumerate() {
        face_dofs.push([find(f, face.vertices[0])?, find(f, face.vertices[1])?]);
    }

    let mut cell_dofs = Vec::with_capacity(mesh.n_cells());
    for c in 0..mesh.n_cells() {
        let cell = mesh.cell(c);
        let basis = reference_basis(cell.kind);
        let mut local = Vec::with_capacity(basis.n_vdofs());
        for dof in basis.dofs() {
            let (f, sign) = mesh.cell_face(c, dof.face);
            let v = cell.vertices[dof.vertex];
            let face = mesh.face(f);
            if !face.adjacent_cells().contains(&c) {
                return Err(Error::Structure(format!("cell {c} is not adjacent to its face {f}")));
            }
            // local reference value v̂·n̂(r̂) = sign * U / |ê| for straight faces
            let factor = sign / cell.kind.reference_face_measure(dof.face);
            local.push((find(f, v)?, factor));
        }
        cell_dofs.push(local);
    }

    let essential = dof_face
        .iter()
        .map(|&f| mesh.boundary_marker(f) == Some(BoundaryKind::Neumann))
        .collect();

    Ok(DofMap {
        n_cells: mesh.n_cells(),
        vertex_offsets,
        dof_face,
        dof_vertex,
        cell_dofs,
        essential,
        face_dofs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate_mesh, Cell, CellKind, MeshFamily, MeshFamilyParams};

    #[test]
    fn two_by_two_counts() {
        let m = generate_mesh(&MeshFamilyParams::new(MeshFamily::Uniform, 2)).unwrap();
        let d = build_dof_map(&m).unwrap();
        assert_eq!(m.n_faces(), 12);
        assert_eq!(d.n_velocity(), 24);
        assert_eq!(d.vertex_group(4).len(), 4);
        let total: usize = (0..m.n_vertices()).map(|v| d.vertex_group(v).len()).sum();
        assert_eq!(total, d.n_velocity());
    }

    #[test]
    fn single_triangle() {
        let m = Mesh::new(
            vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]],
            vec![Cell {
                kind: CellKind::Triangle,
                vertices: vec![0, 1, 2],
            }],
        )
        .unwrap();
        let d = build_dof_map(&m).unwrap();
        assert_eq!(d.n_velocity(), 6);
        assert!((0..3).all(|v| d.vertex_group(v).len() == 2));
    }

    #[test]
    fn shared_dofs_have_opposite_signs() {
        let m = generate_mesh(&MeshFamilyParams::new(MeshFamily::Smooth, 4)).unwrap();
        let d = build_dof_map(&m).unwrap();
        let mut seen: Vec<Vec<f64>> = vec![Vec::new(); d.n_velocity()];
        for c in 0..m.n_cells() {
            for &(g, factor) in d.cell_dofs(c) {
                seen[g].push(factor);
            }
        }
        for (g, s) in seen.iter().enumerate() {
            let f = d.dof_face(g);
            if m.face(f).is_boundary() {
                assert_eq!(s.len(), 1);
            } else {
                assert_eq!(s.len(), 2);
                assert_eq!(s[0], -s[1]);
            }
        }
    }
}
