//! Equation of state, permeability fields and the problem definitions.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::mesh::{BoundaryKind, MeshFamilyParams};
use crate::quadrature::QuadratureVariant;
use crate::solver::SolverConfig;

/// Exponential equation of state `ρ(p) = ρ_ref exp(c_f (p - p_ref))`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Eos {
    pub rho_ref: f64,
    pub p_ref: f64,
    pub c_f: f64,
}

impl Eos {
    pub fn new(rho_ref: f64, p_ref: f64, c_f: f64) -> Result<Self> {
        if !(rho_ref > 0.0) || !(c_f >= 0.0) || !p_ref.is_finite() {
            return Err(Error::Parameter(format!(
                "equation of state needs rho_ref > 0 and c_f >= 0, got rho_ref={rho_ref}, c_f={c_f}"
            )));
        }
        Ok(Eos { rho_ref, p_ref, c_f })
    }

    pub fn density(&self, p: f64) -> f64 {
        self.rho_ref * (self.c_f * (p - self.p_ref)).exp()
    }

    pub fn density_derivative(&self, p: f64) -> f64 {
        self.c_f * self.density(p)
    }
}

pub type Tensor2 = [[f64; 2]; 2];

/// The rock permeability `K̂`; the flow uses `K = K̂ / μ`.
#[derive(Clone, Debug, PartialEq)]
pub enum PermeabilityField {
    Constant(Tensor2),
    /// `left` where the cell centroid has `x <= split_x`, `right` elsewhere.
    PiecewiseX {
        split_x: f64,
        left: Tensor2,
        right: Tensor2,
    },
    /// The full, variable tensor of the manufactured-solution test.
    Manufactured,
    /// Scalar values on an `n x n` grid of cells, `K̂ = k I`.
    ScalarGrid {
        n: usize,
        values: Vec<f64>,
    },
}

impl PermeabilityField {
    /// `K̂` evaluated for cell `cell` (with centroid `centroid`) at point `x`.
    ///
    /// Piecewise fields are resolved per cell so that vertices on an
    /// interface see the value of the element being integrated.
    pub fn khat(&self, cell: usize, centroid: [f64; 2], x: [f64; 2]) -> Tensor2 {
        match self {
            PermeabilityField::Constant(k) => *k,
            PermeabilityField::PiecewiseX { split_x, left, right } => {
                if centroid[0] <= *split_x {
                    *left
                } else {
                    *right
                }
            }
            PermeabilityField::Manufactured => manufactured_khat(x[0], x[1]),
            PermeabilityField::ScalarGrid { values, .. } => {
                let k = values[cell];
                [[k, 0.0], [0.0, k]]
            }
        }
    }

    pub fn validate(&self, n_cells: usize) -> Result<()> {
        let spd = |k: &Tensor2| {
            k[0][0] > 0.0
                && (k[0][1] - k[1][0]).abs() <= 1e-14 * k[0][0].abs().max(1.0)
                && k[0][0] * k[1][1] - k[0][1] * k[1][0] > 0.0
        };
        match self {
            PermeabilityField::Constant(k) if !spd(k) => {
                Err(Error::Coefficient(format!("permeability {k:?} is not SPD")))
            }
            PermeabilityField::PiecewiseX { left, right, .. } if !spd(left) || !spd(right) => {
                Err(Error::Coefficient("piecewise permeability is not SPD".into()))
            }
            PermeabilityField::ScalarGrid { n, values } => {
                if values.len() != n * n || values.len() != n_cells {
                    return Err(Error::Dimension {
                        expected: n_cells,
                        got: values.len(),
                    });
                }
                if let Some(v) = values.iter().find(|v| !(**v > 0.0) || !v.is_finite()) {
                    return Err(Error::Coefficient(format!("scalar permeability {v} is not positive")));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

/// `K̂(x, y)` of the manufactured test.
pub fn manufactured_khat(x: f64, y: f64) -> Tensor2 {
    let off = 1.0 + x * y;
    [[4.0 + (x + 2.0).powi(2) + y * y, off], [off, 2.0]]
}

/// Boundary classifier mapping a boundary point to its condition.
pub type BoundaryClassifier = Arc<dyn Fn(f64, f64) -> Result<BoundaryKind> + Send + Sync>;
/// Source `f(x, y, t)`.
pub type SourceFn = Arc<dyn Fn(f64, f64, f64) -> f64 + Send + Sync>;
/// Initial pressure `p_0(x, y)`.
pub type InitialFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// Everything needed to march one problem in time.
#[derive(Clone)]
pub struct ProblemSpec {
    pub mesh: MeshFamilyParams,
    pub eos: Eos,
    pub porosity: f64,
    pub viscosity: f64,
    pub permeability: PermeabilityField,
    pub gravity: [f64; 2],
    pub source: SourceFn,
    pub initial_pressure: InitialFn,
    pub boundary: BoundaryClassifier,
    pub final_time: f64,
    pub time_step: f64,
    pub variant: QuadratureVariant,
    pub solver: SolverConfig,
}

impl std::fmt::Debug for ProblemSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ProblemSpec")
            .field("mesh", &self.mesh)
            .field("eos", &self.eos)
            .field("porosity", &self.porosity)
            .field("viscosity", &self.viscosity)
            .field("permeability", &self.permeability)
            .field("gravity", &self.gravity)
            .field("final_time", &self.final_time)
            .field("time_step", &self.time_step)
            .field("variant", &self.variant)
            .field("solver", &self.solver)
            .finish_non_exhaustive()
    }
}

impl ProblemSpec {
    /// Number of time steps `N = T / τ`.
    pub fn n_steps(&self) -> Result<usize> {
        let n = self.final_time / self.time_step;
        let rounded = n.round();
        if !(self.time_step > 0.0) || rounded < 1.0 || (n - rounded).abs() > 1e-9 * n.max(1.0) {
            return Err(Error::Parameter(format!(
                "final time {} is not a positive multiple of the time step {}",
                self.final_time, self.time_step
            )));
        }
        Ok(rounded as usize)
    }

    pub fn validate(&self) -> Result<()> {
        self.mesh.validate()?;
        if !(self.porosity > 0.0) || !(self.viscosity > 0.0) {
            return Err(Error::Parameter(format!(
                "porosity and viscosity must be positive, got {} and {}",
                self.porosity, self.viscosity
            )));
        }
        Eos::new(self.eos.rho_ref, self.eos.p_ref, self.eos.c_f)?;
        self.solver.validate()?;
        self.n_steps()?;
        Ok(())
    }
}

/// Physical parameters shared by the manufactured and five-spot problems.
pub const POROSITY: f64 = 0.2;
pub const VISCOSITY: f64 = 2.0;
pub const COMPRESSIBILITY: f64 = 4e-5;

pub fn default_eos() -> Eos {
    Eos {
        rho_ref: 1.0,
        p_ref: 0.0,
        c_f: COMPRESSIBILITY,
    }
}

/// Exact solution `p = t sin²(3πx) sin²(3πy)` and its derived data.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ManufacturedSolution {
    pub eos: Eos,
    pub porosity: f64,
    pub viscosity: f64,
}

impl Default for ManufacturedSolution {
    fn default() -> Self {
        ManufacturedSolution {
            eos: default_eos(),
            porosity: POROSITY,
            viscosity: VISCOSITY,
        }
    }
}

/// `sin²(3πs)` and its first two derivatives.
fn s3(s: f64) -> (f64, f64, f64) {
    let a = 3.0 * PI * s;
    let sin = a.sin();
    (sin * sin, 3.0 * PI * (2.0 * a).sin(), 18.0 * PI * PI * (2.0 * a).cos())
}

impl ManufacturedSolution {
    pub fn pressure(&self, x: f64, y: f64, t: f64) -> f64 {
        t * s3(x).0 * s3(y).0
    }

    pub fn pressure_dt(&self, x: f64, y: f64) -> f64 {
        s3(x).0 * s3(y).0
    }

    pub fn grad_pressure(&self, x: f64, y: f64, t: f64) -> [f64; 2] {
        let (sx, dsx, _) = s3(x);
        let (sy, dsy, _) = s3(y);
        [t * dsx * sy, t * sx * dsy]
    }

    fn k(&self, x: f64, y: f64) -> Tensor2 {
        let k = manufactured_khat(x, y);
        let m = self.viscosity;
        [[k[0][0] / m, k[0][1] / m], [k[1][0] / m, k[1][1] / m]]
    }

    /// Darcy velocity `u = -K ρ(p) ∇p`.
    pub fn velocity(&self, x: f64, y: f64, t: f64) -> [f64; 2] {
        let rho = self.eos.density(self.pressure(x, y, t));
        let g = self.grad_pressure(x, y, t);
        let k = self.k(x, y);
        [
            -rho * (k[0][0] * g[0] + k[0][1] * g[1]),
            -rho * (k[1][0] * g[0] + k[1][1] * g[1]),
        ]
    }

    /// `f = φ ρ'(p) p_t + ∇·u`.
    pub fn source(&self, x: f64, y: f64, t: f64) -> f64 {
        let (sx, dsx, ddsx) = s3(x);
        let (sy, dsy, ddsy) = s3(y);
        let p = t * sx * sy;
        let (px, py) = (t * dsx * sy, t * sx * dsy);
        let (pxx, pxy, pyy) = (t * ddsx * sy, t * dsx * dsy, t * sx * ddsy);
        let k = manufactured_khat(x, y);
        let m = self.viscosity;
        // ∇·(K̂ ∇p), with ∂x K̂11 = 2(x+2), ∂x K̂12 = y, ∂y K̂21 = x
        let div_k_grad = 2.0 * (x + 2.0) * px + y * py + x * px + k[0][0] * pxx + 2.0 * k[0][1] * pxy + k[1][1] * pyy;
        let grad_k_grad = k[0][0] * px * px + 2.0 * k[0][1] * px * py + k[1][1] * py * py;
        let rho = self.eos.density(p);
        let drho = self.eos.density_derivative(p);
        let div_u = -(rho * div_k_grad + drho * grad_k_grad) / m;
        self.porosity * drho * self.pressure_dt(x, y) + div_u
    }

    /// Problem setup of the manufactured test on a mesh family.
    pub fn spec(&self, mesh: MeshFamilyParams, variant: QuadratureVariant) -> ProblemSpec {
        let me = *self;
        ProblemSpec {
            mesh,
            eos: self.eos,
            porosity: self.porosity,
            viscosity: self.viscosity,
            permeability: PermeabilityField::Manufactured,
            gravity: [0.0, 0.0],
            source: Arc::new(move |x, y, t| me.source(x, y, t)),
            initial_pressure: Arc::new(move |x, y| me.pressure(x, y, 0.0)),
            boundary: Arc::new(|_, _| Ok(BoundaryKind::Dirichlet)),
            final_time: 2.0,
            time_step: 0.1,
            variant,
            solver: SolverConfig::default(),
        }
    }
}

/// Injection/production source of the quarter five-spot.
pub fn fivespot_source(x: f64, y: f64) -> f64 {
    let r0 = (x * x + y * y).sqrt();
    let r1 = ((x - 1.0).powi(2) + (y - 1.0).powi(2)).sqrt();
    200.0 * ((200.0 * (0.025 - r0)).tanh() - (200.0 * (0.025 - r1)).tanh())
}

/// Initial pressure of the quarter five-spot.
pub fn fivespot_initial_pressure(x: f64, y: f64) -> f64 {
    (1.0 - 3.0 * x * x + 2.0 * x.powi(3)) * (1.0 - 3.0 * y * y + 2.0 * y.powi(3))
}

/// Dirichlet on `{x = 1, y <= 3/4} ∪ {y = 1, x <= 3/4}`, no-flux elsewhere.
pub fn fivespot_boundary_classifier(x: f64, y: f64) -> Result<BoundaryKind> {
    const TOL: f64 = 1e-12;
    let on_boundary = x.abs() <= TOL || y.abs() <= TOL || (x - 1.0).abs() <= TOL || (y - 1.0).abs() <= TOL;
    if !on_boundary || !(-TOL..=1.0 + TOL).contains(&x) || !(-TOL..=1.0 + TOL).contains(&y) {
        return Err(Error::Domain(format!(
            "({x}, {y}) is not on the boundary of the unit square"
        )));
    }
    let right = (x - 1.0).abs() <= TOL && y <= 0.75;
    let top = (y - 1.0).abs() <= TOL && x <= 0.75;
    Ok(if right || top {
        BoundaryKind::Dirichlet
    } else {
        BoundaryKind::Neumann
    })
}

/// Permeability cases of the five-spot experiments.
#[derive(Clone, Debug, PartialEq)]
pub enum FiveSpotPermeability {
    ConstantFull,
    PiecewiseFull,
    Random {
        nu: f64,
        range: f64,
        variance: f64,
        seed: u64,
    },
}

impl FiveSpotPermeability {
    pub fn name(&self) -> &'static str {
        match self {
            FiveSpotPermeability::ConstantFull => "constant-full",
            FiveSpotPermeability::PiecewiseFull => "piecewise-full",
            FiveSpotPermeability::Random { .. } => "random",
        }
    }

    /// The `K̂` field on an `n x n` grid.
    pub fn field(&self, n: usize) -> Result<PermeabilityField> {
        let k4 = [[4.0, 0.5], [0.5, 4.0]];
        Ok(match self {
            FiveSpotPermeability::ConstantFull => PermeabilityField::Constant(k4),
            FiveSpotPermeability::PiecewiseFull => PermeabilityField::PiecewiseX {
                split_x: 0.5,
                left: [[16.0, 0.5], [0.5, 16.0]],
                right: k4,
            },
            FiveSpotPermeability::Random {
                nu,
                range,
                variance,
                seed,
            } => {
                let params = crate::random_field::MaternParams::new(*nu, *range, *variance)?;
                let sample = crate::random_field::sample_log_normal_field(n, &params, *seed)?;
                PermeabilityField::ScalarGrid {
                    n,
                    values: sample.permeability(),
                }
            }
        })
    }
}

/// The quarter five-spot problem on a uniform `n x n` mesh.
pub fn fivespot_spec(perm: &FiveSpotPermeability, n: usize) -> Result<ProblemSpec> {
    let eos = default_eos();
    Ok(ProblemSpec {
        mesh: MeshFamilyParams::new(crate::mesh::MeshFamily::Uniform, n),
        eos,
        porosity: POROSITY,
        viscosity: VISCOSITY,
        permeability: perm.field(n)?,
        gravity: [0.0, 0.0],
        source: Arc::new(|x, y, _| fivespot_source(x, y)),
        initial_pressure: Arc::new(fivespot_initial_pressure),
        boundary: Arc::new(fivespot_boundary_classifier),
        final_time: 1.0,
        time_step: 5e-3,
        variant: QuadratureVariant::Symmetric,
        solver: SolverConfig::default(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn density_basics() {
        let eos = Eos::new(1.0, 0.0, 4e-5).unwrap();
        assert_eq!(eos.density(0.0), 1.0);
        let inc = Eos::new(2.0, 1.0, 0.0).unwrap();
        assert_eq!(inc.density(123.0), 2.0);
        assert_eq!(inc.density_derivative(-5.0), 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let p: f64 = rng.random_range(-100.0..100.0);
            assert!((eos.density_derivative(p) / eos.density(p) - 4e-5).abs() < 1e-14);
        }
        assert!(Eos::new(0.0, 0.0, 1.0).is_err());
        assert!(Eos::new(1.0, 0.0, -1.0).is_err());
    }

    #[test]
    fn manufactured_source_at_initial_time() {
        let m = ManufacturedSolution::default();
        for (x, y) in [(0.1, 0.3), (0.7, 0.45)] {
            let s = (3.0 * PI * x).sin().powi(2) * (3.0 * PI * y).sin().powi(2);
            assert!((m.source(x, y, 0.0) - 0.2 * 4e-5 * s).abs() < 1e-18);
        }
    }

    /// `φ ρ(p)_t + ∇·(-K ρ(p) ∇p)` by central differences of `p` alone.
    fn fd_source(m: &ManufacturedSolution, x: f64, y: f64, t: f64) -> f64 {
        let h = 1e-5;
        let flux = |x: f64, y: f64| -> [f64; 2] {
            let p = |x: f64, y: f64| m.pressure(x, y, t);
            let gx = (p(x + h, y) - p(x - h, y)) / (2.0 * h);
            let gy = (p(x, y + h) - p(x, y - h)) / (2.0 * h);
            let k = manufactured_khat(x, y);
            let rho = m.eos.density(p(x, y));
            [
                -rho * (k[0][0] * gx + k[0][1] * gy) / m.viscosity,
                -rho * (k[1][0] * gx + k[1][1] * gy) / m.viscosity,
            ]
        };
        let div =
            (flux(x + h, y)[0] - flux(x - h, y)[0]) / (2.0 * h) + (flux(x, y + h)[1] - flux(x, y - h)[1]) / (2.0 * h);
        let dt = (m.eos.density(m.pressure(x, y, t + h)) - m.eos.density(m.pressure(x, y, t - h))) / (2.0 * h);
        m.porosity * dt + div
    }

    #[test]
    fn manufactured_source_matches_finite_differences() {
        let m = ManufacturedSolution::default();
        for (x, y, t) in [(0.2, 0.7, 1.0), (0.55, 0.15, 0.3), (0.9, 0.4, 2.0), (0.0, 0.3, 1.5)] {
            let exact = m.source(x, y, t);
            let fd = fd_source(&m, x, y, t);
            let scale = exact.abs().max(1.0);
            assert!((exact - fd).abs() <= 1e-6 * scale, "({x},{y},{t}): {exact} vs {fd}");
        }
    }

    #[test]
    fn manufactured_source_not_swap_symmetric() {
        let m = ManufacturedSolution::default();
        assert!((m.source(0.2, 0.7, 1.0) - m.source(0.7, 0.2, 1.0)).abs() > 1e-3);
    }

    #[test]
    fn manufactured_velocity_is_darcy() {
        let m = ManufacturedSolution::default();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..100 {
            let (x, y, t): (f64, f64, f64) = (rng.random(), rng.random(), 2.0 * rng.random::<f64>());
            let u = m.velocity(x, y, t);
            let g = m.grad_pressure(x, y, t);
            let k = m.k(x, y);
            let rho = m.eos.density(m.pressure(x, y, t));
            let r0 = u[0] + rho * (k[0][0] * g[0] + k[0][1] * g[1]);
            let r1 = u[1] + rho * (k[1][0] * g[0] + k[1][1] * g[1]);
            assert!(r0.hypot(r1) <= 1e-12);
        }
    }

    #[test]
    fn manufactured_pressure_vanishes_on_boundary() {
        let m = ManufacturedSolution::default();
        for s in [0.0, 0.13, 0.5, 0.77, 1.0] {
            for (x, y) in [(0.0, s), (1.0, s), (s, 0.0), (s, 1.0)] {
                assert!(m.pressure(x, y, 2.0).abs() < 1e-28);
            }
        }
    }

    #[test]
    fn fivespot_source_values() {
        let expect = 200.0 * ((5.0f64).tanh() - (200.0 * (0.025 - 2f64.sqrt())).tanh());
        assert!((fivespot_source(0.0, 0.0) - expect).abs() < 1e-12);
        assert!((fivespot_source(0.0, 0.0) - 399.98).abs() < 0.01);
        assert_eq!(fivespot_source(0.5, 0.5), 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let (x, y): (f64, f64) = (rng.random(), rng.random());
            assert!((fivespot_source(x, y) + fivespot_source(1.0 - x, 1.0 - y)).abs() < 1e-12);
        }
    }

    #[test]
    fn fivespot_boundary() {
        use BoundaryKind::*;
        assert_eq!(fivespot_boundary_classifier(1.0, 0.5).unwrap(), Dirichlet);
        assert_eq!(fivespot_boundary_classifier(0.5, 0.0).unwrap(), Neumann);
        assert_eq!(fivespot_boundary_classifier(1.0, 0.9).unwrap(), Neumann);
        assert_eq!(fivespot_boundary_classifier(0.3, 1.0).unwrap(), Dirichlet);
        assert!(fivespot_boundary_classifier(0.5, 0.5).is_err());
    }

    #[test]
    fn fivespot_initial_pressure_is_flat_at_origin_edges() {
        let h = 1e-6;
        for s in [0.1, 0.5, 0.9] {
            let dx = (fivespot_initial_pressure(h, s) - fivespot_initial_pressure(0.0, s)) / h;
            assert!(dx.abs() < 1e-5);
        }
    }

    #[test]
    fn time_steps() {
        let spec = ManufacturedSolution::default().spec(
            MeshFamilyParams::new(crate::mesh::MeshFamily::Uniform, 4),
            QuadratureVariant::Symmetric,
        );
        assert_eq!(spec.n_steps().unwrap(), 20);
        let mut bad = spec.clone();
        bad.time_step = 0.3;
        assert!(bad.n_steps().is_err());
    }
}
