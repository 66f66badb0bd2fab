use nalgebra::DMatrix;

use super::CellKind;
use crate::error::{Error, Result};

const REF_TOL: f64 = 1e-12;

/// Map `F_E` from a reference cell onto a physical element.
///
/// Affine on simplices, bilinear on quadrilaterals and trilinear on
/// hexahedra. Vertex order follows [`CellKind::reference_vertices`].
#[derive(Clone, Debug, PartialEq)]
pub struct RefMap {
    kind: CellKind,
    coords: Vec<f64>,
}

impl RefMap {
    pub fn new(kind: CellKind, vertices: &[Vec<f64>]) -> Result<Self> {
        let d = kind.dim();
        if vertices.len() != kind.n_vertices() {
            return Err(Error::Dimension {
                expected: kind.n_vertices(),
                got: vertices.len(),
            });
        }
        let mut coords = Vec::with_capacity(d * vertices.len());
        for v in vertices {
            if v.len() != d {
                return Err(Error::Dimension {
                    expected: d,
                    got: v.len(),
                });
            }
            coords.extend_from_slice(v);
        }
        Ok(RefMap { kind, coords })
    }

    pub fn from_2d(kind: CellKind, vertices: &[[f64; 2]]) -> Result<Self> {
        let v: Vec<Vec<f64>> = vertices.iter().map(|p| p.to_vec()).collect();
        Self::new(kind, &v)
    }

    /// The identity map of the reference cell.
    pub fn reference(kind: CellKind) -> Self {
        let d = kind.dim();
        let coords = kind.reference_vertices().iter().flat_map(|r| r[..d].to_vec()).collect();
        RefMap { kind, coords }
    }

    pub fn kind(&self) -> CellKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.kind.dim()
    }

    pub fn vertex(&self, i: usize) -> &[f64] {
        let d = self.dim();
        &self.coords[i * d..(i + 1) * d]
    }

    fn check_point(&self, xh: &[f64]) -> Result<()> {
        if !self.kind.contains(xh, REF_TOL) {
            return Err(Error::Domain(format!(
                "point {xh:?} is outside the reference {:?}",
                self.kind
            )));
        }
        Ok(())
    }

    /// `F_E(x̂)`.
    pub fn map_to_physical(&self, xh: &[f64]) -> Result<Vec<f64>> {
        self.check_point(xh)?;
        Ok(self.map_unchecked(xh))
    }

    pub(crate) fn map_unchecked(&self, xh: &[f64]) -> Vec<f64> {
        let d = self.dim();
        let nv = self.kind.n_vertices();
        let mut n = [0.0; 8];
        self.kind.shape_values(xh, &mut n[..nv]);
        let mut x = vec![0.0; d];
        for (k, nk) in n[..nv].iter().enumerate() {
            for a in 0..d {
                x[a] += nk * self.coords[k * d + a];
            }
        }
        x
    }

    /// `DF_E(x̂)` and `J_E = det DF_E`; a non-positive determinant is an error.
    pub fn jacobian(&self, xh: &[f64]) -> Result<(DMatrix<f64>, f64)> {
        self.check_point(xh)?;
        let df = self.jacobian_matrix(xh);
        let det = df.determinant();
        if det <= 0.0 || !det.is_finite() {
            return Err(Error::DegenerateElement {
                det,
                point: xh.to_vec(),
            });
        }
        Ok((df, det))
    }

    pub(crate) fn jacobian_matrix(&self, xh: &[f64]) -> DMatrix<f64> {
        let d = self.dim();
        let nv = self.kind.n_vertices();
        let mut g = [0.0; 24];
        self.kind.shape_gradients(xh, &mut g[..nv * d]);
        let mut df = DMatrix::zeros(d, d);
        for k in 0..nv {
            for a in 0..d {
                for b in 0..d {
                    df[(a, b)] += self.coords[k * d + a] * g[k * d + b];
                }
            }
        }
        df
    }

    /// Physical measure `|E|`, integrated with a tensor Gauss rule exact for `J_E`.
    pub fn measure(&self) -> f64 {
        crate::gauss::reference_rule(self.kind, 3)
            .iter()
            .map(|(x, w)| w * self.jacobian_matrix(x).determinant())
            .sum()
    }

    /// `J`-weighted centroid (center of mass) of the element.
    pub fn center_of_mass(&self) -> Vec<f64> {
        let d = self.dim();
        let mut c = vec![0.0; d];
        let mut m = 0.0;
        for (x, w) in crate::gauss::reference_rule(self.kind, 3) {
            let j = w * self.jacobian_matrix(&x).determinant();
            let p = self.map_unchecked(&x);
            for a in 0..d {
                c[a] += j * p[a];
            }
            m += j;
        }
        c.iter_mut().for_each(|v| *v /= m);
        c
    }

    /// Largest vertex-to-vertex distance.
    pub fn diameter(&self) -> f64 {
        let nv = self.kind.n_vertices();
        let mut best = 0.0f64;
        for i in 0..nv {
            for j in i + 1..nv {
                let dist = self
                    .vertex(i)
                    .iter()
                    .zip(self.vertex(j))
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt();
                best = best.max(dist);
            }
        }
        best
    }
}

fn quad_defect(r: [&[f64]; 4]) -> f64 {
    (0..r[0].len())
        .map(|a| {
            let c = r[0][a] - r[1][a] + r[2][a] - r[3][a];
            c * c
        })
        .sum::<f64>()
        .sqrt()
}

/// `|r1 - r2 + r3 - r4|`, zero exactly for parallelograms.
///
/// For hexahedra the largest defect over the six (generalized quadrilateral)
/// faces is returned.
pub fn h2_parallelogram_defect(map: &RefMap) -> Result<f64> {
    match map.kind() {
        CellKind::Quadrilateral => Ok(quad_defect([
            map.vertex(0),
            map.vertex(1),
            map.vertex(2),
            map.vertex(3),
        ])),
        CellKind::Hexahedron => Ok(CellKind::Hexahedron
            .faces()
            .iter()
            .map(|f| quad_defect([map.vertex(f[0]), map.vertex(f[1]), map.vertex(f[2]), map.vertex(f[3])]))
            .fold(0.0, f64::max)),
        k => Err(Error::Domain(format!(
            "parallelogram defect is defined for quadrilaterals and hexahedra, not {k:?}"
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quad(pts: [[f64; 2]; 4]) -> RefMap {
        RefMap::from_2d(CellKind::Quadrilateral, &pts).unwrap()
    }

    #[test]
    fn identity_square() {
        let m = RefMap::reference(CellKind::Quadrilateral);
        assert_eq!(m.map_to_physical(&[0.3, 0.7]).unwrap(), vec![0.3, 0.7]);
        let (df, j) = m.jacobian(&[0.2, 0.9]).unwrap();
        assert_eq!(df, DMatrix::identity(2, 2));
        assert_eq!(j, 1.0);
    }

    #[test]
    fn identity_cube_hits_vertices() {
        let m = RefMap::reference(CellKind::Hexahedron);
        for r in CellKind::Hexahedron.reference_vertices() {
            assert_eq!(m.map_to_physical(r).unwrap(), r.to_vec());
        }
    }

    #[test]
    fn stretched_quad_center() {
        let m = quad([[0.0, 0.0], [2.0, 0.0], [2.0, 1.0], [0.0, 1.0]]);
        let x = m.map_to_physical(&[0.5, 0.5]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-15 && (x[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn affine_triangle_scaling() {
        let h = 0.25;
        let m = RefMap::from_2d(CellKind::Triangle, &[[0.0, 0.0], [h, 0.0], [0.0, h]]).unwrap();
        let (df, j) = m.jacobian(&[0.2, 0.3]).unwrap();
        assert_eq!(df, DMatrix::identity(2, 2) * h);
        assert!((j - h * h).abs() < 1e-16);
    }

    #[test]
    fn bilinear_jacobian_matches_central_differences() {
        let m = quad([[0.0, 0.0], [2.0, 0.0], [2.0, 1.0], [0.0, 1.0]]);
        let m2 = quad([[0.1, 0.0], [1.0, 0.2], [1.3, 1.1], [-0.1, 0.8]]);
        for map in [m, m2] {
            for xh in [[0.0, 0.0], [0.3, 0.6], [1.0, 1.0]] {
                let (df, _) = map.jacobian(&xh).unwrap();
                let step = 1e-6;
                for b in 0..2 {
                    // one-sided shift keeps the stencil inside the closed cell
                    let base = xh[b].clamp(step, 1.0 - step);
                    let mut p = xh;
                    let mut q = xh;
                    p[b] = base + step;
                    q[b] = base - step;
                    let fp = map.map_to_physical(&p).unwrap();
                    let fq = map.map_to_physical(&q).unwrap();
                    for a in 0..2 {
                        let fd = (fp[a] - fq[a]) / (2.0 * step);
                        assert!((fd - df[(a, b)]).abs() <= 1e-8);
                    }
                }
            }
        }
    }

    #[test]
    fn outside_point_is_domain_error() {
        let m = RefMap::reference(CellKind::Triangle);
        assert!(matches!(m.map_to_physical(&[0.8, 0.8]), Err(Error::Domain(_))));
        let q = RefMap::reference(CellKind::Quadrilateral);
        assert!(q.jacobian(&[1.5, 0.0]).is_err());
    }

    #[test]
    fn inverted_element_is_degenerate() {
        let m = quad([[0.0, 0.0], [0.0, 1.0], [1.0, 1.0], [1.0, 0.0]]);
        assert!(matches!(m.jacobian(&[0.5, 0.5]), Err(Error::DegenerateElement { .. })));
    }

    #[test]
    fn parallelogram_defect() {
        assert_eq!(
            h2_parallelogram_defect(&RefMap::reference(CellKind::Quadrilateral)).unwrap(),
            0.0
        );
        let m = quad([[0.0, 0.0], [1.0, 0.0], [1.2, 1.0], [0.0, 1.0]]);
        assert!((h2_parallelogram_defect(&m).unwrap() - 0.2).abs() < 1e-15);
        assert!(h2_parallelogram_defect(&RefMap::reference(CellKind::Triangle)).is_err());
        assert_eq!(
            h2_parallelogram_defect(&RefMap::reference(CellKind::Hexahedron)).unwrap(),
            0.0
        );
    }

    #[test]
    fn measure_and_centroid() {
        let m = quad([[0.0, 0.0], [2.0, 0.0], [2.0, 1.0], [0.0, 1.0]]);
        assert!((m.measure() - 2.0).abs() < 1e-14);
        let c = m.center_of_mass();
        assert!((c[0] - 1.0).abs() < 1e-14 && (c[1] - 0.5).abs() < 1e-14);
        // trapezoid: centroid of a trapezoid with parallel sides 2 (bottom) and 1 (top)
        let t = quad([[0.0, 0.0], [2.0, 0.0], [1.0, 1.0], [0.0, 1.0]]);
        assert!((t.measure() - 1.5).abs() < 1e-14);
        let c = t.center_of_mass();
        // y_c = h (2a + b) / (3 (a + b)) with a = top, b = bottom
        assert!((c[1] - (2.0 * 1.0 + 2.0) / (3.0 * 3.0)).abs() < 1e-14);
    }
}
