//! Error norms, convergence studies on the manufactured solution and the
//! quarter five-spot driver.

use crate::assembly::{Discretization, State};
use crate::error::{Error, Result};
use crate::fem::{interpolate_velocity, reference_basis, velocity_at};
use crate::gauss::{gauss_legendre_01, reference_rule};
use crate::mesh::{MeshFamily, MeshFamilyParams};
use crate::physics::{fivespot_spec, FiveSpotPermeability, ManufacturedSolution, ProblemSpec};
use crate::quadrature::QuadratureVariant;
use crate::solver::{time_march, MarchMode, StepRecord};

/// The four error measures at one resolution, each a maximum over time levels.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ErrorReport {
    /// `‖p − p_h‖` in `L²`, 3x3 Gauss per element.
    pub e_p: f64,
    /// `|E|`-weighted `ℓ²` error at the cell centers `F_E(x̂_c)`.
    pub e_p_centers: f64,
    /// `‖Π_h u − u_h‖` in `L²`, trapezoidal rule.
    pub e_u: f64,
    /// `‖u − u_h‖_{F_h}`, 5-point Gauss per edge.
    pub e_u_face: f64,
}

impl ErrorReport {
    fn max(self, o: ErrorReport) -> ErrorReport {
        ErrorReport {
            e_p: self.e_p.max(o.e_p),
            e_p_centers: self.e_p_centers.max(o.e_p_centers),
            e_u: self.e_u.max(o.e_u),
            e_u_face: self.e_u_face.max(o.e_u_face),
        }
    }

    pub fn values(&self) -> [f64; 4] {
        [self.e_p, self.e_p_centers, self.e_u, self.e_u_face]
    }
}

/// Value of `u_h` at one element corner: the two DOFs living there with
/// `factor · v̂_k(r̂)`, and `DF(r̂) / J(r̂)`.
struct CornerEval {
    weight: f64,
    piola: [[f64; 2]; 2],
    dofs: [(usize, [f64; 2]); 2],
}

struct FaceEval {
    /// `Σ_{E ∋ e} |E| / |e|`
    weight: f64,
    normal: [f64; 2],
    length: f64,
    dofs: [usize; 2],
    /// Gauss points on the edge as `(x, y, w |e|, s)`.
    points: Vec<[f64; 4]>,
}

/// Precomputed geometry for evaluating the error norms on one discretization.
pub struct ErrorEvaluator {
    gauss9: Vec<Vec<[f64; 3]>>,
    centers: Vec<[f64; 2]>,
    corners: Vec<CornerEval>,
    faces: Vec<FaceEval>,
}

impl ErrorEvaluator {
    pub fn new(disc: &Discretization) -> Result<Self> {
        let mesh = disc.mesh();
        let dofs = disc.dofs();
        let mut gauss9 = Vec::with_capacity(mesh.n_cells());
        let mut corners = Vec::new();
        let centers = cell_centers(mesh);
        for c in 0..mesh.n_cells() {
            let map = mesh.ref_map(c);
            let kind = map.kind();
            gauss9.push(
                reference_rule(kind, 3)
                    .iter()
                    .map(|(xh, w)| {
                        let x = map.map_unchecked(xh);
                        [x[0], x[1], w * map.jacobian_matrix(xh).determinant()]
                    })
                    .collect(),
            );
            let basis = reference_basis(kind);
            let local = dofs.cell_dofs(c);
            let wq = kind.reference_measure() / kind.n_vertices() as f64;
            for (v, r) in kind.reference_vertices().iter().enumerate() {
                let (df, j) = map.jacobian(&r[..2])?;
                let corner = basis.corner(v);
                let entry = |i: usize| {
                    let (k, val) = corner[i];
                    let (g, f) = local[k];
                    (g, [f * val[0], f * val[1]])
                };
                corners.push(CornerEval {
                    weight: wq * j,
                    piola: [[df[(0, 0)] / j, df[(0, 1)] / j], [df[(1, 0)] / j, df[(1, 1)] / j]],
                    dofs: [entry(0), entry(1)],
                });
            }
        }
        let gauss = gauss_legendre_01(5);
        let faces = (0..mesh.n_faces())
            .map(|f| {
                let face = mesh.face(f);
                let length = mesh.face_length(f);
                let p = mesh.vertices()[face.vertices[0]];
                let q = mesh.vertices()[face.vertices[1]];
                let cell_measure: f64 = face.adjacent_cells().iter().map(|&c| disc.measures()[c]).sum();
                FaceEval {
                    weight: cell_measure / length,
                    normal: mesh.face_normal(f),
                    length,
                    dofs: dofs.face_dofs(f),
                    points: gauss
                        .iter()
                        .map(|&(s, w)| [p[0] + s * (q[0] - p[0]), p[1] + s * (q[1] - p[1]), w * length, s])
                        .collect(),
                }
            })
            .collect();
        Ok(ErrorEvaluator {
            gauss9,
            centers,
            corners,
            faces,
        })
    }

    /// Spatial errors of `state` against the exact `p`, `u` at one time.
    pub fn errors<P, U>(&self, disc: &Discretization, state: &State, p: P, u: U) -> Result<ErrorReport>
    where
        P: Fn(f64, f64) -> f64,
        U: Fn(f64, f64) -> [f64; 2],
    {
        let mesh = disc.mesh();
        if state.p.len() != mesh.n_cells() || state.u.len() != disc.dofs().n_velocity() {
            return Err(Error::Dimension {
                expected: mesh.n_cells(),
                got: state.p.len(),
            });
        }
        let mut e_p = 0.0;
        let mut e_pc = 0.0;
        for c in 0..mesh.n_cells() {
            for q in &self.gauss9[c] {
                e_p += q[2] * (p(q[0], q[1]) - state.p[c]).powi(2);
            }
            let x = self.centers[c];
            e_pc += disc.measures()[c] * (p(x[0], x[1]) - state.p[c]).powi(2);
        }

        let pi_u = interpolate_velocity(mesh, disc.dofs(), &u);
        let mut e_u = 0.0;
        for cr in &self.corners {
            let mut vh = [0.0; 2];
            for &(g, val) in &cr.dofs {
                let d = pi_u[g] - state.u[g];
                vh[0] += d * val[0];
                vh[1] += d * val[1];
            }
            let v0 = cr.piola[0][0] * vh[0] + cr.piola[0][1] * vh[1];
            let v1 = cr.piola[1][0] * vh[0] + cr.piola[1][1] * vh[1];
            e_u += cr.weight * (v0 * v0 + v1 * v1);
        }

        let mut e_f = 0.0;
        for fe in &self.faces {
            let a = state.u[fe.dofs[0]] / fe.length;
            let b = state.u[fe.dofs[1]] / fe.length;
            let mut sum = 0.0;
            for q in &fe.points {
                let ue = u(q[0], q[1]);
                let exact = ue[0] * fe.normal[0] + ue[1] * fe.normal[1];
                let disc_val = a * (1.0 - q[3]) + b * q[3];
                sum += q[2] * (exact - disc_val).powi(2);
            }
            e_f += fe.weight * sum;
        }
        Ok(ErrorReport {
            e_p: e_p.sqrt(),
            e_p_centers: e_pc.sqrt(),
            e_u: e_u.sqrt(),
            e_u_face: e_f.sqrt(),
        })
    }
}

/// Images `F_E(x̂_c)` of the reference cell centers.
///
/// On general quadrilaterals this point, not the center of mass, is where the
/// cell pressure superconverges; the two differ by `O(h²)` per cell on
/// `h`-perturbed meshes, which is enough to spoil the second-order rate.
pub fn cell_centers(mesh: &crate::mesh::Mesh) -> Vec<[f64; 2]> {
    (0..mesh.n_cells())
        .map(|c| {
            let map = mesh.ref_map(c);
            let xc = map.kind().reference_center();
            let x = map.map_unchecked(&xc[..2]);
            [x[0], x[1]]
        })
        .collect()
}

/// Maximum over a trajectory `(t_{n+1}, state)` of the spatial errors.
pub fn compute_errors(
    disc: &Discretization,
    trajectory: &[(f64, State)],
    exact: &ManufacturedSolution,
) -> Result<ErrorReport> {
    if trajectory.is_empty() {
        return Err(Error::Parameter("no time levels to evaluate".into()));
    }
    let ev = ErrorEvaluator::new(disc)?;
    let mut out = ErrorReport::default();
    for (t, st) in trajectory {
        let r = ev.errors(
            disc,
            st,
            |x, y| exact.pressure(x, y, *t),
            |x, y| exact.velocity(x, y, *t),
        )?;
        out = out.max(r);
    }
    Ok(out)
}

/// `log₂(E(h) / E(h/2))`.
pub fn rate(coarse: f64, fine: f64) -> f64 {
    (coarse / fine).log2()
}

/// A spatial convergence study of the manufactured problem.
#[derive(Clone, Debug, PartialEq)]
pub struct StudySpec {
    pub family: MeshFamily,
    pub levels: usize,
    /// Cells per direction on the coarsest level.
    pub n0: usize,
    pub variant: QuadratureVariant,
    /// Seed of the random-perturbed family.
    pub seed: Option<u64>,
    pub final_time: f64,
    pub time_step: f64,
}

impl StudySpec {
    pub fn new(family: MeshFamily, levels: usize, variant: QuadratureVariant) -> Self {
        StudySpec {
            family,
            levels,
            n0: 16,
            variant,
            seed: (family == MeshFamily::RandomPerturbed).then_some(0),
            final_time: 2.0,
            time_step: 0.1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.levels == 0 || self.levels > 8 {
            return Err(Error::Parameter(format!(
                "levels must be in 1..=8, got {}",
                self.levels
            )));
        }
        self.level_problem(0).validate()
    }

    fn mesh_params(&self, level: usize) -> MeshFamilyParams {
        MeshFamilyParams {
            family: self.family,
            n: self.n0 << level,
            seed: self.seed,
        }
    }

    /// Problem at one level.
    pub fn level_problem(&self, level: usize) -> ProblemSpec {
        let mut spec = ManufacturedSolution::default().spec(self.mesh_params(level), self.variant);
        spec.final_time = self.final_time;
        spec.time_step = self.time_step;
        spec
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StudyRow {
    pub level: usize,
    pub n: usize,
    pub h: f64,
    pub errors: ErrorReport,
    /// Rates against the previous level; `None` on the first row.
    pub rates: Option<[f64; 4]>,
    pub newton_iterations: usize,
    pub linear_iterations: usize,
}

/// Run every level and tabulate errors and rates.
pub fn convergence_study(study: &StudySpec) -> Result<Vec<StudyRow>> {
    convergence_study_with(study, |_| {})
}

/// As [`convergence_study`], reporting each row as soon as it is available.
pub fn convergence_study_with<F: FnMut(&StudyRow)>(study: &StudySpec, mut on_row: F) -> Result<Vec<StudyRow>> {
    study.validate()?;
    let exact = ManufacturedSolution::default();
    let mut rows: Vec<StudyRow> = Vec::with_capacity(study.levels);
    for level in 0..study.levels {
        let spec = study.level_problem(level);
        let mut evaluator: Option<ErrorEvaluator> = None;
        let mut report = ErrorReport::default();
        let out = time_march(&spec, MarchMode::Fixed, |disc, _, t, st| {
            if evaluator.is_none() {
                evaluator = Some(ErrorEvaluator::new(disc)?);
            }
            let ev = evaluator.as_ref().expect("initialized above");
            let r = ev.errors(disc, st, |x, y| exact.pressure(x, y, t), |x, y| exact.velocity(x, y, t))?;
            report = report.max(r);
            Ok(())
        })?;
        let rates = rows.last().map(|prev| {
            let (a, b) = (prev.errors.values(), report.values());
            [rate(a[0], b[0]), rate(a[1], b[1]), rate(a[2], b[2]), rate(a[3], b[3])]
        });
        let n = study.n0 << level;
        let row = StudyRow {
            level,
            n,
            h: 1.0 / n as f64,
            errors: report,
            rates,
            newton_iterations: out.steps.iter().map(|s| s.newton.iterations).sum(),
            linear_iterations: out.steps.iter().map(|s| s.newton.linear_iterations).sum(),
        };
        on_row(&row);
        rows.push(row);
    }
    Ok(rows)
}

/// Steady five-spot fields and run statistics.
#[derive(Debug)]
pub struct FiveSpotResult {
    pub case: FiveSpotPermeability,
    pub n: usize,
    pub disc: Discretization,
    pub state: State,
    pub steps: Vec<StepRecord>,
    pub steady_reached: bool,
    /// `|u_h|` at the cell centers.
    pub speed: Vec<f64>,
    /// `log₁₀ |u_h|` at the cell centers.
    pub log_speed: Vec<f64>,
    /// `K̂` per cell (first diagonal entry), for output.
    pub permeability: Vec<f64>,
}

impl FiveSpotResult {
    pub fn pressure(&self) -> &[f64] {
        &self.state.p
    }

    /// `max |p_h(x, y) − p_h(y, x)|` over the cells of the uniform grid.
    pub fn diagonal_asymmetry(&self) -> f64 {
        diagonal_asymmetry(&self.state.p, self.n)
    }
}

/// `max_{i,j} |v[j n + i] − v[i n + j]|`.
pub fn diagonal_asymmetry(values: &[f64], n: usize) -> f64 {
    let mut worst = 0.0f64;
    for j in 0..n {
        for i in 0..j {
            worst = worst.max((values[j * n + i] - values[i * n + j]).abs());
        }
    }
    worst
}

/// Run the quarter five-spot to steady state (or to the final time).
pub fn fivespot_run(case: &FiveSpotPermeability, n: usize) -> Result<FiveSpotResult> {
    let spec = fivespot_spec(case, n)?;
    fivespot_run_spec(case.clone(), n, &spec)
}

/// [`fivespot_run`] with an explicit problem (e.g. modified solver settings).
pub fn fivespot_run_spec(case: FiveSpotPermeability, n: usize, spec: &ProblemSpec) -> Result<FiveSpotResult> {
    let out = time_march(spec, MarchMode::Steady, |_, _, _, _| Ok(()))?;
    let disc = out.disc;
    let mesh = disc.mesh();
    let mut speed = Vec::with_capacity(mesh.n_cells());
    for c in 0..mesh.n_cells() {
        let center = mesh.cell(c).kind.reference_center();
        let v = velocity_at(mesh, disc.dofs(), &out.state.u, c, &center[..2])?;
        speed.push(v[0].hypot(v[1]));
    }
    let log_speed = speed.iter().map(|s| s.max(1e-300).log10()).collect();
    let permeability = (0..mesh.n_cells())
        .map(|c| spec.permeability.khat(c, disc.centroids()[c], disc.centroids()[c])[0][0])
        .collect();
    Ok(FiveSpotResult {
        case,
        n,
        disc,
        state: out.state,
        steps: out.steps,
        steady_reached: out.steady_reached,
        speed,
        log_speed,
        permeability,
    })
}
