//! Reference velocity spaces, the Piola transformation, the DOF map and the
//! projections `Π_h` and `P_h`.

mod basis;
mod dofmap;
pub(crate) mod poly;

use nalgebra::DMatrix;

pub use basis::{nodal_matrix, reference_basis, BasisSet, DofDescriptor};
pub use dofmap::{build_dof_map, DofMap};

use crate::error::Result;
use crate::gauss::{gauss_legendre_01, reference_rule};
use crate::mesh::{Mesh, RefMap};

/// Map a reference vector value and divergence to the physical element:
/// `v = J⁻¹ DF v̂`, `∇·v = J⁻¹ ∇̂·v̂`.
pub fn piola_transform(map: &RefMap, xh: &[f64], vh: &[f64], div_h: f64) -> Result<(Vec<f64>, f64)> {
    let (df, j) = map.jacobian(xh)?;
    let v = (&df * nalgebra::DVector::from_column_slice(vh)) / j;
    Ok((v.as_slice().to_vec(), div_h / j))
}

/// Same as [`piola_transform`] for a precomputed 2x2 Jacobian.
#[inline]
pub(crate) fn piola2(df: &DMatrix<f64>, j: f64, vh: [f64; 2]) -> [f64; 2] {
    [
        (df[(0, 0)] * vh[0] + df[(0, 1)] * vh[1]) / j,
        (df[(1, 0)] * vh[0] + df[(1, 1)] * vh[1]) / j,
    ]
}

/// Value of the discrete velocity with coefficients `u` in cell `c` at `x̂`.
pub fn velocity_at(mesh: &Mesh, dofs: &DofMap, u: &[f64], c: usize, xh: &[f64]) -> Result<[f64; 2]> {
    let map = mesh.ref_map(c);
    let basis = reference_basis(map.kind());
    let mut vals = vec![0.0; basis.n_vdofs() * 2];
    basis.eval(xh, &mut vals);
    let mut vh = [0.0; 2];
    for (k, &(g, factor)) in dofs.cell_dofs(c).iter().enumerate() {
        let coef = factor * u[g];
        vh[0] += coef * vals[2 * k];
        vh[1] += coef * vals[2 * k + 1];
    }
    let (df, j) = map.jacobian(xh)?;
    Ok(piola2(&df, j, vh))
}

/// `Π_h u`: on every face, the normal trace of `u` is projected onto linear
/// functions in `L²(e)`; the coefficients are the projected vertex values
/// times the face length.
pub fn interpolate_velocity<F>(mesh: &Mesh, dofs: &DofMap, u: F) -> Vec<f64>
where
    F: Fn(f64, f64) -> [f64; 2],
{
    let gauss = gauss_legendre_01(5);
    let mut out = vec![0.0; dofs.n_velocity()];
    for f in 0..mesh.n_faces() {
        let face = mesh.face(f);
        let p = mesh.vertices()[face.vertices[0]];
        let q = mesh.vertices()[face.vertices[1]];
        let n = mesh.face_normal(f);
        let (mut r0, mut r1) = (0.0, 0.0);
        for &(s, w) in &gauss {
            let x = p[0] + s * (q[0] - p[0]);
            let y = p[1] + s * (q[1] - p[1]);
            let val = u(x, y);
            let g = val[0] * n[0] + val[1] * n[1];
            r0 += w * g * (1.0 - s);
            r1 += w * g * s;
        }
        // inverse of the P1 mass matrix [[1/3, 1/6], [1/6, 1/3]]
        let a = 4.0 * r0 - 2.0 * r1;
        let b = 4.0 * r1 - 2.0 * r0;
        let len = mesh.face_length(f);
        let [d0, d1] = dofs.face_dofs(f);
        out[d0] = a * len;
        out[d1] = b * len;
    }
    out
}

/// `P_h p`: the `L²(Ê)` projection onto constants of `p ∘ F_E`, i.e. the
/// unweighted reference-cell average, integrated with the 3x3 Gauss rule.
/// This is the projection for which `(p − P_h p, ∇·v) = 0` for all `v ∈ V_h`.
pub fn project_pressure<F>(mesh: &Mesh, p: F) -> Vec<f64>
where
    F: Fn(f64, f64) -> f64,
{
    (0..mesh.n_cells())
        .map(|c| {
            let map = mesh.ref_map(c);
            let kind = map.kind();
            let sum: f64 = reference_rule(kind, 3)
                .iter()
                .map(|(xh, w)| {
                    let x = map.map_unchecked(xh);
                    w * p(x[0], x[1])
                })
                .sum();
            sum / kind.reference_measure()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate_mesh, CellKind, MeshFamily, MeshFamilyParams};

    #[test]
    fn identity_piola() {
        let map = RefMap::reference(CellKind::Quadrilateral);
        let (v, d) = piola_transform(&map, &[0.2, 0.4], &[1.5, -2.0], 3.0).unwrap();
        assert_eq!(v, vec![1.5, -2.0]);
        assert_eq!(d, 3.0);
    }

    #[test]
    fn scaled_triangle_piola() {
        let h = 0.5;
        let map = RefMap::from_2d(CellKind::Triangle, &[[0.0, 0.0], [h, 0.0], [0.0, h]]).unwrap();
        let (v, d) = piola_transform(&map, &[0.1, 0.1], &[1.0, 0.0], 1.0).unwrap();
        assert!((v[0] - 1.0 / h).abs() < 1e-14 && v[1] == 0.0);
        assert!((d - 1.0 / (h * h)).abs() < 1e-12);
    }

    #[test]
    fn zero_and_constant_interpolation() {
        let m = generate_mesh(&MeshFamilyParams::new(MeshFamily::Uniform, 3)).unwrap();
        let d = build_dof_map(&m).unwrap();
        assert!(interpolate_velocity(&m, &d, |_, _| [0.0, 0.0])
            .iter()
            .all(|&v| v == 0.0));
        let u = interpolate_velocity(&m, &d, |_, _| [1.0, -2.0]);
        for c in 0..m.n_cells() {
            for xh in [[0.0, 0.0], [0.3, 0.8], [1.0, 0.5]] {
                let v = velocity_at(&m, &d, &u, c, &xh).unwrap();
                assert!((v[0] - 1.0).abs() < 1e-12 && (v[1] + 2.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn pressure_projection_of_linear_function() {
        let m = generate_mesh(&MeshFamilyParams::new(MeshFamily::Uniform, 2)).unwrap();
        let p = project_pressure(&m, |x, _| x);
        let expect = [0.25, 0.75, 0.25, 0.75];
        for (a, b) in p.iter().zip(expect) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!(project_pressure(&m, |_, _| 1.0)
            .iter()
            .all(|&v| (v - 1.0).abs() < 1e-15));
    }
}
