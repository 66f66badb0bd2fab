//! Gauss rules on reference cells.

use crate::mesh::CellKind;

/// Gauss-Legendre nodes and weights on `[0, 1]`, 1 to 5 points.
pub fn gauss_legendre_01(n: usize) -> Vec<(f64, f64)> {
    let (x, w): (&[f64], &[f64]) = match n {
        1 => (&[0.0], &[2.0]),
        2 => (&[-0.577_350_269_189_625_8, 0.577_350_269_189_625_8], &[1.0, 1.0]),
        3 => (
            &[-0.774_596_669_241_483_4, 0.0, 0.774_596_669_241_483_4],
            &[5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0],
        ),
        4 => (
            &[
                -0.861_136_311_594_052_6,
                -0.339_981_043_584_856_3,
                0.339_981_043_584_856_3,
                0.861_136_311_594_052_6,
            ],
            &[
                0.347_854_845_137_453_8,
                0.652_145_154_862_546_1,
                0.652_145_154_862_546_1,
                0.347_854_845_137_453_8,
            ],
        ),
        5 => (
            &[
                -0.906_179_845_938_664,
                -0.538_469_310_105_683_1,
                0.0,
                0.538_469_310_105_683_1,
                0.906_179_845_938_664,
            ],
            &[
                0.236_926_885_056_189_1,
                0.478_628_670_499_366_5,
                0.568_888_888_888_888_9,
                0.478_628_670_499_366_5,
                0.236_926_885_056_189_1,
            ],
        ),
        _ => panic!("gauss_legendre_01 supports 1..=5 points, got {n}"),
    };
    x.iter().zip(w).map(|(xi, wi)| (0.5 * (xi + 1.0), 0.5 * wi)).collect()
}

fn triangle_degree5() -> Vec<(Vec<f64>, f64)> {
    // 7-point symmetric rule, exact for degree 5; weights sum to 1/2.
    let a1 = 0.059_715_871_789_769_82;
    let b1 = 0.470_142_064_105_115_1;
    let a2 = 0.797_426_985_353_087_3;
    let b2 = 0.101_286_507_323_456_3;
    let w0 = 0.225;
    let w1 = 0.132_394_152_788_506_2;
    let w2 = 0.125_939_180_544_827_2;
    let mut pts = vec![(vec![1.0 / 3.0, 1.0 / 3.0], w0)];
    for (a, b, w) in [(a1, b1, w1), (a2, b2, w2)] {
        pts.push((vec![b, b], w));
        pts.push((vec![a, b], w));
        pts.push((vec![b, a], w));
    }
    pts.into_iter().map(|(x, w)| (x, 0.5 * w)).collect()
}

fn collapsed_tet(n: usize) -> Vec<(Vec<f64>, f64)> {
    let g = gauss_legendre_01(n);
    let mut out = Vec::with_capacity(n * n * n);
    for &(u, wu) in &g {
        for &(v, wv) in &g {
            for &(w, ww) in &g {
                let x = u;
                let y = v * (1.0 - u);
                let z = w * (1.0 - u) * (1.0 - v);
                let jac = (1.0 - u) * (1.0 - u) * (1.0 - v);
                out.push((vec![x, y, z], wu * wv * ww * jac));
            }
        }
    }
    out
}

/// A rule on the reference cell. Tensor cells use `n` points per direction;
/// triangles use the 7-point degree-5 rule; tetrahedra a collapsed tensor rule.
pub fn reference_rule(kind: CellKind, n: usize) -> Vec<(Vec<f64>, f64)> {
    let g = gauss_legendre_01(n);
    match kind {
        CellKind::Quadrilateral => {
            let mut out = Vec::with_capacity(n * n);
            for &(y, wy) in &g {
                for &(x, wx) in &g {
                    out.push((vec![x, y], wx * wy));
                }
            }
            out
        }
        CellKind::Hexahedron => {
            let mut out = Vec::with_capacity(n * n * n);
            for &(z, wz) in &g {
                for &(y, wy) in &g {
                    for &(x, wx) in &g {
                        out.push((vec![x, y, z], wx * wy * wz));
                    }
                }
            }
            out
        }
        CellKind::Triangle => triangle_degree5(),
        CellKind::Tetrahedron => collapsed_tet(n.max(3)),
    }
}
