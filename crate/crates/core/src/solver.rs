//! Inexact Newton with per-vertex velocity elimination, the cell-centered
//! Schur solve and backward-Euler time marching.

use nalgebra::{DMatrix, DVector};

use crate::assembly::{Discretization, JacobianBlocks, ResidualVector, State};
use crate::error::{Error, Result};
use crate::physics::ProblemSpec;
use crate::quadrature::QuadratureVariant;
use crate::sparse::{gmres, pcg_ilu0, CsrMatrix};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverConfig {
    pub newton_tol: f64,
    pub newton_abs_tol: f64,
    pub max_newton_iters: usize,
    pub linear_tol: f64,
    pub max_linear_iters: usize,
    pub steady_tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            newton_tol: 1e-9,
            newton_abs_tol: 1e-12,
            max_newton_iters: 20,
            linear_tol: 1e-11,
            max_linear_iters: 5000,
            steady_tol: 1e-8,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let tols = [
            ("newton_tol", self.newton_tol),
            ("newton_abs_tol", self.newton_abs_tol),
            ("linear_tol", self.linear_tol),
            ("steady_tol", self.steady_tol),
        ];
        for (name, v) in tols {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Parameter(format!("{name} must be positive, got {v}")));
            }
        }
        if self.max_newton_iters == 0 || self.max_linear_iters == 0 {
            return Err(Error::Parameter("iteration limits must be at least 1".into()));
        }
        Ok(())
    }
}

/// `S ΔP = rhs` with the per-vertex factors needed to recover `ΔU`.
#[derive(Clone, Debug)]
pub struct SchurSystem {
    pub s: CsrMatrix,
    pub rhs: Vec<f64>,
    /// Per vertex, row-major `A_i⁻¹ B_i` (`ℓ x m`, columns follow the
    /// vertex's cell list).
    x: Vec<f64>,
    x_offsets: Vec<usize>,
    /// Per vertex, `A_i⁻¹ F_i`, concatenated like the velocity DOFs.
    y: Vec<f64>,
}

/// Eliminate the velocity increments vertex by vertex.
pub fn eliminate_velocity(disc: &Discretization, jac: &JacobianBlocks, res: &ResidualVector) -> Result<SchurSystem> {
    let mesh = disc.mesh();
    let dofs = disc.dofs();
    let tau = jac.tau;
    let mut s = disc.schur_pattern().clone();
    let mut rhs = res.g.clone();
    let mut x = Vec::new();
    let mut x_offsets = vec![0];
    let mut y = vec![0.0; dofs.n_velocity()];
    for v in 0..mesh.n_vertices() {
        let group = dofs.vertex_group(v);
        let l = group.len();
        let cells = mesh.vertex_cells(v);
        let m = cells.len();
        let a = DMatrix::from_row_slice(l, l, jac.a_block(v));
        let mut rhs_block = DMatrix::zeros(l, m + 1);
        for (i, g) in group.clone().enumerate() {
            for &(c, bv) in disc.b_row(g) {
                let k = cells
                    .iter()
                    .position(|&cc| cc == c)
                    .expect("B couples only cells at the vertex");
                rhs_block[(i, k)] = bv;
            }
            rhs_block[(i, m)] = res.f[g];
        }
        let sol = a
            .lu()
            .solve(&rhs_block)
            .filter(|s| s.iter().all(|v| v.is_finite()))
            .ok_or(Error::Elimination { vertex: v })?;
        for i in 0..l {
            for k in 0..m {
                x.push(sol[(i, k)]);
            }
            y[group.start + i] = sol[(i, m)];
        }
        x_offsets.push(x.len());
        // S += τ B_iᵀ A_i⁻¹ B_i, rhs -= τ B_iᵀ A_i⁻¹ F_i
        for (k, &ck) in cells.iter().enumerate() {
            let mut ry = 0.0;
            let mut row = vec![0.0; m];
            for i in 0..l {
                let bik = rhs_block[(i, k)];
                if bik != 0.0 {
                    ry += bik * sol[(i, m)];
                    for (ll, r) in row.iter_mut().enumerate() {
                        *r += bik * sol[(i, ll)];
                    }
                }
            }
            rhs[ck] -= tau * ry;
            for (ll, &cl) in cells.iter().enumerate() {
                if row[ll] != 0.0 {
                    s.add(ck, cl, tau * row[ll]);
                }
            }
        }
    }
    for (c, d) in jac.d.iter().enumerate() {
        s.add(c, c, -d);
    }
    Ok(SchurSystem {
        s,
        rhs,
        x,
        x_offsets,
        y,
    })
}

/// `ΔU = −A⁻¹(B ΔP + F)` from the stored factors.
pub fn back_substitute(disc: &Discretization, schur: &SchurSystem, dp: &[f64]) -> Vec<f64> {
    let mesh = disc.mesh();
    let dofs = disc.dofs();
    let mut du = vec![0.0; dofs.n_velocity()];
    for v in 0..mesh.n_vertices() {
        let group = dofs.vertex_group(v);
        let cells = mesh.vertex_cells(v);
        let m = cells.len();
        let xv = &schur.x[schur.x_offsets[v]..schur.x_offsets[v + 1]];
        for (i, g) in group.enumerate() {
            let mut acc = schur.y[g];
            for (k, &c) in cells.iter().enumerate() {
                acc += xv[i * m + k] * dp[c];
            }
            du[g] = -acc;
        }
    }
    du
}

/// Solve the Schur system; returns `ΔP` and the Krylov iteration count.
pub fn solve_schur(
    s: &CsrMatrix,
    rhs: &[f64],
    variant: QuadratureVariant,
    config: &SolverConfig,
) -> Result<(Vec<f64>, usize)> {
    let sol = match variant {
        QuadratureVariant::Symmetric => pcg_ilu0(s, rhs, config.linear_tol, config.max_linear_iters)?,
        QuadratureVariant::NonSymmetric => gmres(s, rhs, config.linear_tol, config.max_linear_iters, 60)?,
    };
    Ok((sol.x, sol.iterations))
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct NewtonStats {
    pub iterations: usize,
    /// `‖(F, G)‖₂` before each iteration and after the last one.
    pub residual_history: Vec<f64>,
    pub linear_iterations: usize,
}

impl NewtonStats {
    pub fn final_residual(&self) -> f64 {
        self.residual_history.last().copied().unwrap_or(0.0)
    }
}

/// One backward-Euler step: Newton from `state` (the previous step's
/// solution) until `‖r‖ ≤ newton_tol ‖r₀‖ + newton_abs_tol`.
pub fn newton_solve_step(
    disc: &Discretization,
    config: &SolverConfig,
    state: &mut State,
    p_prev: &[f64],
    source: &[f64],
    tau: f64,
    step: usize,
) -> Result<NewtonStats> {
    let mut stats = NewtonStats::default();
    let mut res = disc.assemble_residual(state, p_prev, source, tau)?;
    let r0 = res.norm();
    stats.residual_history.push(r0);
    let target = config.newton_tol * r0 + config.newton_abs_tol;
    while res.norm() > target {
        if stats.iterations == config.max_newton_iters {
            return Err(Error::NonConvergence {
                step,
                iterations: stats.iterations,
                history: stats.residual_history,
            });
        }
        let jac = disc.assemble_jacobian(state, tau)?;
        let schur = eliminate_velocity(disc, &jac, &res)?;
        let (dp, lin) = solve_schur(&schur.s, &schur.rhs, disc.variant(), config)?;
        let du = back_substitute(disc, &schur, &dp);
        state.p.iter_mut().zip(&dp).for_each(|(p, d)| *p += d);
        state.u.iter_mut().zip(&du).for_each(|(u, d)| *u += d);
        stats.iterations += 1;
        stats.linear_iterations += lin;
        res = disc.assemble_residual(state, p_prev, source, tau)?;
        let r = res.norm();
        if !r.is_finite() {
            stats.residual_history.push(r);
            return Err(Error::NonConvergence {
                step,
                iterations: stats.iterations,
                history: stats.residual_history,
            });
        }
        stats.residual_history.push(r);
    }
    Ok(stats)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MarchMode {
    /// All `N = T / τ` steps.
    Fixed,
    /// Stop once `‖P^{n+1} − P^n‖₂ / (τ ‖P^{n+1}‖₂) < steady_tol`.
    Steady,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    pub time: f64,
    pub newton: NewtonStats,
    /// `‖P^{n+1} − P^n‖₂ / τ`.
    pub pressure_change: f64,
}

#[derive(Debug)]
pub struct MarchResult {
    pub disc: Discretization,
    pub state: State,
    pub steps: Vec<StepRecord>,
    pub steady_reached: bool,
}

/// March `spec` in time from `P_h p₀`, `U = 0`.
///
/// `observer` sees the discretization, the step index (1-based), the time
/// and the accepted state after every step.
pub fn time_march<O>(spec: &ProblemSpec, mode: MarchMode, mut observer: O) -> Result<MarchResult>
where
    O: FnMut(&Discretization, usize, f64, &State) -> Result<()>,
{
    let disc = Discretization::from_spec(spec)?;
    let n_steps = spec.n_steps()?;
    let tau = spec.time_step;
    let p0 = spec.initial_pressure.clone();
    let mut state = disc.initial_state(|x, y| p0(x, y));
    let mut steps = Vec::new();
    let mut steady_reached = false;
    for n in 0..n_steps {
        let t = (n + 1) as f64 * tau;
        let p_prev = state.p.clone();
        let source = disc.source_integrals(t);
        let newton = newton_solve_step(&disc, &spec.solver, &mut state, &p_prev, &source, tau, n + 1)?;
        let change = state
            .p
            .iter()
            .zip(&p_prev)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
            / tau;
        observer(&disc, n + 1, t, &state)?;
        steps.push(StepRecord {
            step: n + 1,
            time: t,
            newton,
            pressure_change: change,
        });
        let pnorm = state.p.iter().map(|v| v * v).sum::<f64>().sqrt();
        if mode == MarchMode::Steady && change < spec.solver.steady_tol * pnorm {
            steady_reached = true;
            break;
        }
    }
    Ok(MarchResult {
        disc,
        state,
        steps,
        steady_reached,
    })
}

/// Solve the full `(L + N_e)` Newton system densely; only for tiny meshes.
pub fn dense_newton_update(
    disc: &Discretization,
    jac: &JacobianBlocks,
    res: &ResidualVector,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let l = disc.dofs().n_velocity();
    let ne = disc.mesh().n_cells();
    let mut k = DMatrix::zeros(l + ne, l + ne);
    for v in 0..disc.mesh().n_vertices() {
        let group = disc.dofs().vertex_group(v);
        let blk = jac.a_block(v);
        let n = group.len();
        for i in 0..n {
            for j in 0..n {
                k[(group.start + i, group.start + j)] = blk[i * n + j];
            }
        }
    }
    let b = disc.b_dense();
    for j in 0..l {
        for c in 0..ne {
            k[(j, l + c)] = b[(j, c)];
            k[(l + c, j)] = jac.tau * b[(j, c)];
        }
    }
    for c in 0..ne {
        k[(l + c, l + c)] = jac.d[c];
    }
    let rhs = DVector::from_iterator(l + ne, res.f.iter().chain(&res.g).map(|v| -v));
    let sol = k.lu().solve(&rhs).ok_or(Error::LinearSolver {
        iterations: 0,
        residual: f64::NAN,
    })?;
    Ok((
        sol.rows(0, l).iter().copied().collect(),
        sol.rows(l, ne).iter().copied().collect(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{BoundaryKind, MeshFamily, MeshFamilyParams};
    use crate::physics::{default_eos, ManufacturedSolution, PermeabilityField};
    use std::sync::Arc;

    fn spec(n: usize, c_f: f64) -> ProblemSpec {
        let mut eos = default_eos();
        eos.c_f = c_f;
        ProblemSpec {
            mesh: MeshFamilyParams::new(MeshFamily::Smooth, n),
            eos,
            porosity: 0.2,
            viscosity: 2.0,
            permeability: PermeabilityField::Manufactured,
            gravity: [0.0, 0.0],
            source: Arc::new(|x, y, _| (x * 7.0).sin() + y),
            initial_pressure: Arc::new(|x, y| x * y),
            boundary: Arc::new(|x, _| {
                Ok(if x < 0.5 {
                    BoundaryKind::Neumann
                } else {
                    BoundaryKind::Dirichlet
                })
            }),
            final_time: 0.2,
            time_step: 0.1,
            variant: QuadratureVariant::Symmetric,
            solver: SolverConfig::default(),
        }
    }

    #[test]
    fn config_validation() {
        assert!(SolverConfig::default().validate().is_ok());
        let bad = SolverConfig {
            newton_tol: 0.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = SolverConfig {
            max_newton_iters: 0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn identity_schur_system() {
        let s = CsrMatrix::identity(4);
        let rhs = vec![1.0, 2.0, 3.0, 4.0];
        let (x, _) = solve_schur(&s, &rhs, QuadratureVariant::Symmetric, &SolverConfig::default()).unwrap();
        assert_eq!(x, rhs);
    }

    #[test]
    fn schur_path_matches_dense_kkt() {
        for variant in [QuadratureVariant::Symmetric, QuadratureVariant::NonSymmetric] {
            let mut sp = spec(2, 4e-5);
            sp.variant = variant;
            let disc = Discretization::from_spec(&sp).unwrap();
            let st = disc.initial_state(|x, y| 1.0 + x * y);
            let src = disc.source_integrals(0.1);
            let res = disc.assemble_residual(&st, &[0.5; 4], &src, 0.1).unwrap();
            let jac = disc.assemble_jacobian(&st, 0.1).unwrap();
            let schur = eliminate_velocity(&disc, &jac, &res).unwrap();
            let (dp, _) = solve_schur(&schur.s, &schur.rhs, variant, &SolverConfig::default()).unwrap();
            let du = back_substitute(&disc, &schur, &dp);
            let (du_d, dp_d) = dense_newton_update(&disc, &jac, &res).unwrap();
            for (a, b) in du.iter().zip(&du_d).chain(dp.iter().zip(&dp_d)) {
                assert!((a - b).abs() < 1e-10, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn back_substitution_identity() {
        let disc = Discretization::from_spec(&spec(4, 4e-5)).unwrap();
        let st = disc.initial_state(|x, y| x - y);
        let src = disc.source_integrals(0.1);
        let res = disc.assemble_residual(&st, &st.p, &src, 0.1).unwrap();
        let jac = disc.assemble_jacobian(&st, 0.1).unwrap();
        let schur = eliminate_velocity(&disc, &jac, &res).unwrap();
        let dp: Vec<f64> = (0..disc.mesh().n_cells()).map(|c| (c as f64 * 0.7).cos()).collect();
        let du = back_substitute(&disc, &schur, &dp);
        let adu = disc.a_mul(&jac, &du);
        let bdp = disc.b_mul(&dp);
        for j in 0..du.len() {
            assert!((adu[j] + bdp[j] + res.f[j]).abs() < 1e-12);
        }
    }

    #[test]
    fn schur_is_symmetric_with_nine_point_rows() {
        let m = ManufacturedSolution::default();
        let sp = m.spec(
            MeshFamilyParams::new(MeshFamily::Uniform, 8),
            QuadratureVariant::Symmetric,
        );
        let disc = Discretization::from_spec(&sp).unwrap();
        let st = disc.initial_state(|_, _| 0.0);
        let src = disc.source_integrals(0.1);
        let res = disc.assemble_residual(&st, &st.p, &src, 0.1).unwrap();
        let jac = disc.assemble_jacobian(&st, 0.1).unwrap();
        let schur = eliminate_velocity(&disc, &jac, &res).unwrap();
        assert!(schur.s.asymmetry() <= 1e-12);
        for j in 0..8 {
            for i in 0..8 {
                let nz = schur.s.row_nonzeros(j * 8 + i);
                if (1..7).contains(&i) && (1..7).contains(&j) {
                    assert_eq!(nz, 9);
                } else {
                    assert!(nz < 9);
                }
            }
        }
    }

    #[test]
    fn equilibrium_needs_no_update() {
        let mut sp = spec(4, 4e-5);
        sp.source = Arc::new(|_, _, _| 0.0);
        sp.initial_pressure = Arc::new(|_, _| 3.0);
        sp.boundary = Arc::new(|_, _| Ok(BoundaryKind::Neumann));
        let out = time_march(&sp, MarchMode::Fixed, |_, _, _, _| Ok(())).unwrap();
        assert!(out.steps.iter().all(|s| s.newton.iterations <= 1));
        assert!(out.state.p.iter().all(|&p| (p - 3.0).abs() < 1e-14));
        assert!(out.state.u.iter().all(|&u| u.abs() < 1e-14));
    }

    #[test]
    fn newton_converges_and_conserves_mass() {
        let sp = spec(8, 4e-5);
        let disc = Discretization::from_spec(&sp).unwrap();
        let mut st = disc.initial_state(|x, y| x * y);
        let p_prev = st.p.clone();
        let src = disc.source_integrals(0.1);
        let stats = newton_solve_step(&disc, &sp.solver, &mut st, &p_prev, &src, 0.1, 1).unwrap();
        assert!(stats.iterations >= 1 && stats.iterations <= 5);
        let h = &stats.residual_history;
        for w in h.windows(2) {
            assert!(w[1] < 0.1 * w[0]);
        }
        let mb = disc.mass_balance(&st, &p_prev, &src, 0.1).unwrap();
        assert!(mb.iter().all(|v| v.abs() <= 1e-9));
    }

    #[test]
    fn nonconvergence_reports_history() {
        let mut sp = spec(4, 4e-5);
        sp.solver.max_newton_iters = 1;
        sp.solver.newton_tol = 1e-300;
        sp.solver.newton_abs_tol = 1e-300;
        let err = time_march(&sp, MarchMode::Fixed, |_, _, _, _| Ok(())).unwrap_err();
        match err {
            Error::NonConvergence { step, history, .. } => {
                assert_eq!(step, 1);
                assert_eq!(history.len(), 2);
            }
            other => panic!("unexpected error {other:?}"),
        }
    }
}
