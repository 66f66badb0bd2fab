//! Logically rectangular `N x N` quadrilateral meshes of the unit square.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Cell, CellKind, Mesh};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum MeshFamily {
    Uniform,
    Smooth,
    Kershaw,
    RandomPerturbed,
}

impl MeshFamily {
    pub fn name(self) -> &'static str {
        match self {
            MeshFamily::Uniform => "uniform",
            MeshFamily::Smooth => "smooth",
            MeshFamily::Kershaw => "kershaw",
            MeshFamily::RandomPerturbed => "random",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(MeshFamily::Uniform),
            "smooth" => Ok(MeshFamily::Smooth),
            "kershaw" => Ok(MeshFamily::Kershaw),
            "random" | "random-perturbed" => Ok(MeshFamily::RandomPerturbed),
            other => Err(Error::Parameter(format!("unknown mesh family '{other}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MeshFamilyParams {
    pub family: MeshFamily,
    pub n: usize,
    pub seed: Option<u64>,
}

impl MeshFamilyParams {
    pub fn new(family: MeshFamily, n: usize) -> Self {
        MeshFamilyParams { family, n, seed: None }
    }

    pub fn random(n: usize, seed: u64) -> Self {
        MeshFamilyParams {
            family: MeshFamily::RandomPerturbed,
            n,
            seed: Some(seed),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::Parameter(format!(
                "mesh needs at least 2 cells per direction, got {}",
                self.n
            )));
        }
        match (self.family, self.seed) {
            (MeshFamily::RandomPerturbed, None) => {
                Err(Error::Parameter("randomly perturbed meshes need a seed".into()))
            }
            (MeshFamily::RandomPerturbed, Some(_)) | (_, None) => Ok(()),
            (f, Some(_)) => Err(Error::Parameter(format!(
                "a seed is only meaningful for random meshes, not {}",
                f.name()
            ))),
        }
    }
}

/// Generate the `n x n` quadrilateral mesh of `(0,1)^2` for a family.
///
/// Vertex `(i, j)` has index `j (n + 1) + i`, cell `(i, j)` has index
/// `j n + i`, so cells are ordered row by row in `y`.
pub fn generate_mesh(params: &MeshFamilyParams) -> Result<Mesh> {
    params.validate()?;
    let n = params.n;
    let h = 1.0 / n as f64;
    let mut vertices = Vec::with_capacity((n + 1) * (n + 1));
    for j in 0..=n {
        for i in 0..=n {
            let xh = i as f64 * h;
            let yh = j as f64 * h;
            let p = match params.family {
                MeshFamily::Uniform => [xh, yh],
                MeshFamily::Smooth => smooth_map(xh, yh),
                MeshFamily::Kershaw => [xh, kershaw_y(xh, yh)],
                MeshFamily::RandomPerturbed => {
                    let interior = i > 0 && i < n && j > 0 && j < n;
                    if interior {
                        let seed = params.seed.expect("validated");
                        let (rx, ry) = vertex_draws(seed, (j * (n + 1) + i) as u64);
                        let a = std::f64::consts::SQRT_2 / 3.0 * h;
                        [xh + a * (rx - 0.5), yh + a * (ry - 0.5)]
                    } else {
                        [xh, yh]
                    }
                }
            };
            vertices.push(p);
        }
    }
    let mut cells = Vec::with_capacity(n * n);
    for j in 0..n {
        for i in 0..n {
            let v0 = j * (n + 1) + i;
            cells.push(Cell {
                kind: CellKind::Quadrilateral,
                vertices: vec![v0, v0 + 1, v0 + n + 2, v0 + n + 1],
            });
        }
    }
    Mesh::new(vertices, cells)
}

/// `C^inf` perturbation of the identity that turns uniform meshes into
/// `h^2`-parallelogram meshes.
pub fn smooth_map(xh: f64, yh: f64) -> [f64; 2] {
    let s = (2.0 * PI * xh).sin() * (2.0 * PI * yh).sin();
    [xh + 0.06 * s, yh - 0.05 * s]
}

/// Height of the Kershaw mid-line over column position `xh`: a zig-zag
/// between `0.5 - 0.3` and `0.5 + 0.3` with kinks at quarters.
fn kershaw_midline(xh: f64) -> f64 {
    const KNOTS: [f64; 5] = [0.2, 0.8, 0.2, 0.8, 0.2];
    let s = (xh * 4.0).clamp(0.0, 4.0);
    let k = (s.floor() as usize).min(3);
    let t = s - k as f64;
    KNOTS[k] * (1.0 - t) + KNOTS[k + 1] * t
}

/// Vertical coordinate of the Kershaw mesh: the lower half of each column is
/// compressed or stretched onto `[0, b]`, the upper half onto `[b, 1]`.
///
/// The map is bilinear on each of the 4 x 2 coarse blocks, so refinements
/// whose grid lines hit the block edges consist of `h^2`-parallelograms.
pub fn kershaw_y(xh: f64, yh: f64) -> f64 {
    let b = kershaw_midline(xh);
    if yh <= 0.5 {
        2.0 * b * yh
    } else {
        b + 2.0 * (1.0 - b) * (yh - 0.5)
    }
}

/// Two uniform draws on `[0, 1)` from an independent stream per vertex.
fn vertex_draws(seed: u64, vertex: u64) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(vertex);
    (rng.random::<f64>(), rng.random::<f64>())
}
