use faer::sparse::linalg::solvers::{Lu, SymbolicLu};
use faer::sparse::{Argsort, Pair, SparseColMat, SymbolicSparseColMat};
use faer::linalg::solvers::Solve;
use faer::Mat;
use log::{debug, warn};

use crate::error::{Error, Result};
use crate::graphs::GraphSpec;
use crate::grid::Boundary;

use super::{DiagnosticsRow, Problem, SolverConfig, StepSolution};

/// Largest number of step halvings in the Newton line search.
const MAX_HALVINGS: usize = 8;

/// Residual reduction a chord step must reach to keep a cached factorization.
const CHORD_CONTRACTION: f64 = 0.25;

/// Full Newton steps per time step that may be taken without residual decrease.
const MAX_NONMONOTONE: usize = 10;

type Triplets = Vec<(usize, usize, f64)>;

/// Sparse matrix-vector product `out = A x` from row-grouped triplets.
fn spmv(a: &Triplets, x: &[f64], out: &mut [f64]) {
    out.iter_mut().for_each(|o| *o = 0.0);
    for &(r, c, v) in a {
        out[r] += v * x[c];
    }
}

fn periodic(j: usize, n: usize) -> (usize, usize) {
    (if j == 0 { n - 1 } else { j - 1 }, if j + 1 == n { 0 } else { j + 1 })
}

/// Explicit data of one step.
struct StepData {
    dt: f64,
    u: Vec<f64>,
    v: Vec<f64>,
    /// `f(t′) − π(u)`.
    bulk_rhs: Vec<f64>,
    /// `g(t′) − π_Γ(v)`.
    trace_rhs: Vec<f64>,
}

/// Laplacian triplets with zero-flux and ring closures.
struct Stencils {
    lap_n: Triplets,
    lap_d: Triplets,
}

/// Data the Newton matrix depends on.
#[derive(Clone, Copy)]
struct Linearization<'b> {
    dt: f64,
    dxi: &'b [f64],
    deta: &'b [f64],
}

impl Stencils {
    /// Pushes the Newton matrix entries in a fixed order; `pattern` receives
    /// their positions when given.
    fn assemble(
        &self,
        problem: &Problem,
        config: &SolverConfig,
        lin: &Linearization<'_>,
        mut pattern: Option<&mut Vec<(usize, usize)>>,
        vals: &mut Vec<f64>,
    ) {
        let grid = &problem.grid;
        let (n, m) = (grid.cells(), grid.n_theta());
        let Linearization { dt, dxi, deta } = *lin;
        let damp = config.lambda / dt + config.stabilization;
        let mut push = |r: usize, c: usize, v: f64| {
            if let Some(p) = pattern.as_deref_mut() {
                p.push((r, c));
            }
            vals.push(v);
        };
        let (mu0, v0, w0) = (n, 2 * n, 2 * n + m);

        for c in 0..n {
            push(c, c, 1.0);
        }
        for &(r, c, v) in &self.lap_n {
            push(r, mu0 + c, -dt * v);
        }

        for c in 0..n {
            push(mu0 + c, mu0 + c, 1.0);
        }
        for &(r, c, v) in &self.lap_d {
            let extra = if r == c { -damp - dxi[c] } else { 0.0 };
            push(mu0 + r, c, v + extra);
        }
        let outer = (grid.n_r() - 1) * m;
        let coupling = grid.boundary_coupling_coeff();
        for j in 0..m {
            push(mu0 + outer + j, v0 + j, coupling);
        }

        let k = grid.trace_coeff();
        let h = 0.5 * grid.dr();
        let delta = config.delta;
        for j in 0..m {
            let (jm, jp) = periodic(j, m);
            push(v0 + j, v0 + j, 1.0);
            push(v0 + j, w0 + jm, -dt * k);
            push(v0 + j, w0 + j, 2.0 * dt * k);
            push(v0 + j, w0 + jp, -dt * k);
        }
        for j in 0..m {
            let (jm, jp) = periodic(j, m);
            push(w0 + j, w0 + j, 1.0);
            push(w0 + j, v0 + j, -damp - 1.0 / h - 2.0 * delta * k - deta[j]);
            push(w0 + j, v0 + jm, delta * k);
            push(w0 + j, v0 + jp, delta * k);
            push(w0 + j, outer + j, 1.0 / h);
        }
    }
}

struct Factorization {
    lu: Lu<usize, f64>,
    dt: f64,
}

/// Time stepper for one problem and configuration. The sparsity pattern and
/// the symbolic LU factorization of the Newton matrix are computed once; the
/// numeric factorization is reused across iterations and steps while chord
/// steps keep contracting.
pub struct Solver<'a> {
    problem: &'a Problem,
    config: SolverConfig,
    stencils: Stencils,
    symbolic: SymbolicSparseColMat<usize>,
    argsort: Argsort<usize>,
    lu_symbolic: SymbolicLu<usize>,
    factorization: Option<Factorization>,
}

impl std::fmt::Debug for Solver<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Solver").field("config", &self.config).finish_non_exhaustive()
    }
}

/// Stored states, per-step diagnostics, and the error that stopped the run, if any.
#[derive(Debug)]
pub struct Trajectory {
    pub states: Vec<StepSolution>,
    pub diagnostics: Vec<DiagnosticsRow>,
    pub error: Option<Error>,
    /// `dt·(L + L_Γ)` for the explicit perturbations.
    pub stiffness: f64,
}

impl Trajectory {
    /// Last stored state; the terminal state is always stored.
    pub fn last(&self) -> &StepSolution {
        self.states.last().expect("trajectory holds the initial state")
    }
}

impl<'a> Solver<'a> {
    pub fn new(problem: &'a Problem, config: SolverConfig) -> Result<Self> {
        config.validate()?;
        let grid = &problem.grid;
        grid.check_bulk(&problem.u0)?;
        grid.check_trace(&problem.v0)?;
        let stencils = Stencils { lap_n: grid.laplacian_triplets(false), lap_d: grid.laplacian_triplets(true) };
        let n = 2 * grid.cells() + 2 * grid.n_theta();
        let mut pattern = Vec::new();
        let lin = Linearization { dt: 1.0, dxi: &vec![0.0; grid.cells()], deta: &vec![0.0; grid.n_theta()] };
        stencils.assemble(problem, &config, &lin, Some(&mut pattern), &mut Vec::new());
        let pairs: Vec<Pair<usize, usize>> = pattern.into_iter().map(|(row, col)| Pair { row, col }).collect();
        let linear_failure = |e: &dyn std::fmt::Debug| Error::LinearSolveFailure(format!("{e:?}"));
        let (symbolic, argsort) = SymbolicSparseColMat::try_new_from_indices(n, n, &pairs).map_err(|e| linear_failure(&e))?;
        let lu_symbolic = SymbolicLu::try_new(symbolic.as_ref()).map_err(|e| linear_failure(&e))?;
        Ok(Solver { problem, config, stencils, symbolic, argsort, lu_symbolic, factorization: None })
    }

    pub fn config(&self) -> &SolverConfig {
        &self.config
    }

    pub fn problem(&self) -> &Problem {
        self.problem
    }

    /// `dt·(L + L_Γ)`.
    pub fn stiffness(&self) -> f64 {
        let p = self.problem;
        self.config.dt * (p.bulk_perturbation.lipschitz_constant() + p.boundary_perturbation.lipschitz_constant())
    }

    fn yosida_field(&self, graph: &GraphSpec, x: &[f64]) -> Result<Vec<f64>> {
        x.iter().map(|&r| graph.yosida(r, self.config.lambda)).collect()
    }

    fn yosida_derivative_field(&self, graph: &GraphSpec, x: &[f64]) -> Result<Vec<f64>> {
        x.iter().map(|&r| graph.yosida_derivative(r, self.config.lambda)).collect()
    }

    /// The state at `t = 0`, with `μ⁰` and `w⁰` from the chemical potential
    /// relations at zero velocity.
    pub fn initial_state(&self) -> Result<StepSolution> {
        let p = self.problem;
        let g = &p.grid;
        let (u, v) = (p.u0.clone(), p.v0.clone());
        let xi = g.bulk_from_values(self.yosida_field(&p.bulk_graph, &u.values)?)?;
        let eta = g.trace_from_values(self.yosida_field(&p.boundary_graph, &v.values)?)?;
        let f = p.f.bulk(g, 0.0)?;
        let gs = p.g.trace(g, 0.0)?;
        let lap = g.laplacian_bulk(&u, Boundary::Dirichlet(&v))?;
        let mu = g.bulk_from_values(
            (0..g.cells())
                .map(|c| -lap.values[c] + xi.values[c] + p.bulk_perturbation.eval(u.values[c]) - f.values[c])
                .collect(),
        )?;
        let dn = g.normal_derivative(&u, &v)?;
        let lb = g.laplace_beltrami(&v)?;
        let w = g.trace_from_values(
            (0..g.n_theta())
                .map(|j| {
                    dn.values[j] - self.config.delta * lb.values[j]
                        + eta.values[j]
                        + p.boundary_perturbation.eval(v.values[j])
                        - gs.values[j]
                })
                .collect(),
        )?;
        Ok(StepSolution { t: 0.0, u, mu, xi, v, w, eta, newton_iters: 0, residual: 0.0 })
    }

    fn step_data(&self, state: &StepSolution, t_next: f64) -> Result<StepData> {
        let p = self.problem;
        let g = &p.grid;
        let f = p.f.bulk(g, t_next)?;
        let gs = p.g.trace(g, t_next)?;
        let bulk_rhs = f.values.iter().zip(&state.u.values).map(|(f, &u)| f - p.bulk_perturbation.eval(u)).collect();
        let trace_rhs =
            gs.values.iter().zip(&state.v.values).map(|(g, &v)| g - p.boundary_perturbation.eval(v)).collect();
        Ok(StepData {
            dt: t_next - state.t,
            u: state.u.values.clone(),
            v: state.v.values.clone(),
            bulk_rhs,
            trace_rhs,
        })
    }

    /// Residual `(R1, R2, R3, R4)` of the step equations at `x = (u′, μ′, v′, w′)`.
    fn residual(&self, data: &StepData, x: &[f64], out: &mut [f64]) -> Result<()> {
        let grid = &self.problem.grid;
        let (n, m) = (grid.cells(), grid.n_theta());
        let (up, rest) = x.split_at(n);
        let (mup, rest) = rest.split_at(n);
        let (vp, wp) = rest.split_at(m);
        let (r1, rest) = out.split_at_mut(n);
        let (r2, rest) = rest.split_at_mut(n);
        let (r3, r4) = rest.split_at_mut(m);
        let dt = data.dt;
        let damp = self.config.lambda / dt + self.config.stabilization;

        spmv(&self.stencils.lap_n, mup, r1);
        for c in 0..n {
            r1[c] = up[c] - data.u[c] - dt * r1[c];
        }

        let xi = self.yosida_field(&self.problem.bulk_graph, up)?;
        spmv(&self.stencils.lap_d, up, r2);
        let outer = (grid.n_r() - 1) * m;
        let coupling = grid.boundary_coupling_coeff();
        for j in 0..m {
            r2[outer + j] += coupling * vp[j];
        }
        for c in 0..n {
            r2[c] = mup[c] - damp * (up[c] - data.u[c]) + r2[c] - xi[c] + data.bulk_rhs[c];
        }

        let eta = self.yosida_field(&self.problem.boundary_graph, vp)?;
        let k = grid.trace_coeff();
        let h = 0.5 * grid.dr();
        for j in 0..m {
            let (jm, jp) = periodic(j, m);
            let lw = k * (wp[jm] - 2.0 * wp[j] + wp[jp]);
            let lv = k * (vp[jm] - 2.0 * vp[j] + vp[jp]);
            r3[j] = vp[j] - data.v[j] - dt * lw;
            let dn = (vp[j] - up[outer + j]) / h;
            r4[j] = wp[j] - damp * (vp[j] - data.v[j]) - dn + self.config.delta * lv - eta[j] + data.trace_rhs[j];
        }
        Ok(())
    }

    /// Weighted norms `(full, linear part)` of a residual.
    fn residual_norms(&self, r: &[f64]) -> (f64, f64) {
        let grid = &self.problem.grid;
        let (n, m) = (grid.cells(), grid.n_theta());
        let mut lin = 0.0;
        let mut nonlin = 0.0;
        for i in 0..grid.n_r() {
            let w = grid.cell_weight(i);
            for j in 0..m {
                let c = grid.index(i, j);
                lin += w * r[c] * r[c];
                nonlin += w * r[n + c] * r[n + c];
            }
        }
        let dth = grid.dtheta();
        for j in 0..m {
            lin += dth * r[2 * n + j] * r[2 * n + j];
            nonlin += dth * r[2 * n + m + j] * r[2 * n + m + j];
        }
        ((lin + nonlin).sqrt(), lin.sqrt())
    }

    /// The Newton matrix at `x` as `(row, col, value)` triplets.
    pub fn jacobian_triplets(&self, dt: f64, x: &[f64]) -> Result<Vec<(usize, usize, f64)>> {
        let grid = &self.problem.grid;
        let n = grid.cells();
        let dxi = self.yosida_derivative_field(&self.problem.bulk_graph, &x[..n])?;
        let deta = self.yosida_derivative_field(&self.problem.boundary_graph, &x[2 * n..2 * n + grid.n_theta()])?;
        let mut pattern = Vec::new();
        let mut vals = Vec::new();
        let lin = Linearization { dt, dxi: &dxi, deta: &deta };
        self.stencils.assemble(self.problem, &self.config, &lin, Some(&mut pattern), &mut vals);
        Ok(pattern.into_iter().zip(vals).map(|((r, c), v)| (r, c, v)).collect())
    }

    /// Numeric LU of the Newton matrix at `x`.
    fn factor(&self, dt: f64, x: &[f64]) -> Result<Factorization> {
        let grid = &self.problem.grid;
        let n = grid.cells();
        let dxi = self.yosida_derivative_field(&self.problem.bulk_graph, &x[..n])?;
        let deta = self.yosida_derivative_field(&self.problem.boundary_graph, &x[2 * n..2 * n + grid.n_theta()])?;
        let mut vals = Vec::with_capacity(self.symbolic.compute_nnz());
        let lin = Linearization { dt, dxi: &dxi, deta: &deta };
        self.stencils.assemble(self.problem, &self.config, &lin, None, &mut vals);
        let mat = SparseColMat::new_from_argsort(self.symbolic.clone(), &self.argsort, &vals)
            .map_err(|e| Error::LinearSolveFailure(format!("{e:?}")))?;
        let lu = Lu::try_new_with_symbolic(self.lu_symbolic.clone(), mat.as_ref())
            .map_err(|e| Error::LinearSolveFailure(format!("{e:?}")))?;
        Ok(Factorization { lu, dt })
    }

    /// Newton update `−J⁻¹ r`, refactoring when no usable factorization is cached.
    fn update(&mut self, dt: f64, x: &[f64], r: &[f64], refresh: bool) -> Result<Vec<f64>> {
        let stale = !matches!(&self.factorization, Some(f) if f.dt == dt);
        if refresh || stale {
            self.factorization = Some(self.factor(dt, x)?);
        }
        let lu = &self.factorization.as_ref().expect("factorization just computed").lu;
        let mut b = Mat::from_fn(r.len(), 1, |i, _| -r[i]);
        lu.solve_in_place(b.as_mut());
        let out: Vec<f64> = (0..r.len()).map(|i| b[(i, 0)]).collect();
        if out.iter().any(|x| !x.is_finite()) {
            return Err(Error::LinearSolveFailure("non-finite Newton update".into()));
        }
        Ok(out)
    }

    /// Advances `state` to `t_next`.
    pub fn step_to(&mut self, state: &StepSolution, t_next: f64) -> Result<StepSolution> {
        let grid = &self.problem.grid;
        let (n, m) = (grid.cells(), grid.n_theta());
        let tol = self.config.newton_tol;
        let data = self.step_data(state, t_next)?;

        let mut x: Vec<f64> = [&state.u.values, &state.mu.values, &state.v.values, &state.w.values]
            .iter()
            .flat_map(|v| v.iter().copied())
            .collect();
        let mut r = vec![0.0; x.len()];
        self.residual(&data, &x, &mut r)?;
        let (mut norm, lin) = self.residual_norms(&r);
        let mut linear_exact = lin <= 1e-3 * tol;
        let mut iters = 0;
        let mut trial = vec![0.0; x.len()];
        let mut r_trial = vec![0.0; x.len()];
        let mut nonmonotone = 0;

        while !(norm <= tol && linear_exact) {
            if iters == self.config.newton_max_iter {
                return Err(Error::NewtonDivergence { t: t_next, residual: norm, iterations: iters });
            }
            iters += 1;

            // chord step with the cached factorization
            let mut fresh = self.factorization.as_ref().is_none_or(|f| f.dt != data.dt);
            let mut dx = self.update(data.dt, &x, &r, false)?;
            if !fresh {
                for i in 0..x.len() {
                    trial[i] = x[i] + dx[i];
                }
                if self.residual(&data, &trial, &mut r_trial).is_ok() {
                    let (tn, _) = self.residual_norms(&r_trial);
                    if tn <= CHORD_CONTRACTION * norm || tn <= tol {
                        std::mem::swap(&mut x, &mut trial);
                        std::mem::swap(&mut r, &mut r_trial);
                        norm = tn;
                        linear_exact = true;
                        continue;
                    }
                }
                dx = self.update(data.dt, &x, &r, true)?;
                fresh = true;
            }
            debug_assert!(fresh);

            let mut accepted = false;
            let mut alpha = 1.0;
            for _ in 0..=MAX_HALVINGS {
                for i in 0..x.len() {
                    trial[i] = x[i] + alpha * dx[i];
                }
                // a trial leaving a bounded graph domain counts as no decrease
                if self.residual(&data, &trial, &mut r_trial).is_ok() {
                    let (tn, _) = self.residual_norms(&r_trial);
                    if tn < norm || (alpha == 1.0 && tn <= tol) {
                        std::mem::swap(&mut x, &mut trial);
                        std::mem::swap(&mut r, &mut r_trial);
                        norm = tn;
                        linear_exact = alpha == 1.0;
                        accepted = true;
                        break;
                    }
                }
                alpha *= 0.5;
            }
            if !accepted {
                if norm <= 10.0 * tol && linear_exact {
                    debug!("accepting step at t = {t_next} on the rounding floor, residual {norm:e}");
                    break;
                }
                if nonmonotone < MAX_NONMONOTONE {
                    for i in 0..x.len() {
                        trial[i] = x[i] + dx[i];
                    }
                    if self.residual(&data, &trial, &mut r_trial).is_ok() {
                        nonmonotone += 1;
                        std::mem::swap(&mut x, &mut trial);
                        std::mem::swap(&mut r, &mut r_trial);
                        norm = self.residual_norms(&r).0;
                        linear_exact = true;
                        continue;
                    }
                }
                return Err(Error::NewtonDivergence { t: t_next, residual: norm, iterations: iters });
            }
        }

        let u = grid.bulk_from_values(x[..n].to_vec())?;
        let mu = grid.bulk_from_values(x[n..2 * n].to_vec())?;
        let v = grid.trace_from_values(x[2 * n..2 * n + m].to_vec())?;
        let w = grid.trace_from_values(x[2 * n + m..].to_vec())?;
        let xi = grid.bulk_from_values(self.yosida_field(&self.problem.bulk_graph, &u.values)?)?;
        let eta = grid.trace_from_values(self.yosida_field(&self.problem.boundary_graph, &v.values)?)?;
        Ok(StepSolution { t: t_next, u, mu, xi, v, w, eta, newton_iters: iters, residual: norm })
    }

    /// Advances `state` by one `dt`, capped at `t_end`.
    pub fn step(&mut self, state: &StepSolution) -> Result<StepSolution> {
        self.step_to(state, (state.t + self.config.dt).min(self.config.t_end))
    }

    /// Discrete energy of `state` at its time level.
    pub fn energy(&self, state: &StepSolution) -> Result<f64> {
        let p = self.problem;
        let g = &p.grid;
        let lambda = self.config.lambda;
        let f = p.f.bulk(g, state.t)?;
        let gs = p.g.trace(g, state.t)?;
        let mut e = 0.5 * g.dirichlet_energy_bulk(&state.u, Boundary::Dirichlet(&state.v))?;
        for i in 0..g.n_r() {
            let w = g.cell_weight(i);
            for j in 0..g.n_theta() {
                let c = g.index(i, j);
                let u = state.u.values[c];
                e += w
                    * (p.bulk_graph.yosida_primitive(u, lambda)? + p.bulk_perturbation.primitive(u) - f.values[c] * u);
            }
        }
        e += 0.5 * self.config.delta * g.dirichlet_energy_trace(&state.v)?;
        let dth = g.dtheta();
        for (j, &v) in state.v.values.iter().enumerate() {
            e += dth
                * (p.boundary_graph.yosida_primitive(v, lambda)? + p.boundary_perturbation.primitive(v)
                    - gs.values[j] * v);
        }
        Ok(e)
    }

    /// Monitors of `state`; `previous_energy` gives the energy increment.
    pub fn diagnostics(&self, state: &StepSolution, previous_energy: Option<f64>) -> Result<DiagnosticsRow> {
        let g = &self.problem.grid;
        let energy = self.energy(state)?;
        let dom = self.problem.boundary_graph.domain();
        Ok(DiagnosticsRow {
            t: state.t,
            mass_bulk: g.mean_bulk(&state.u)?,
            mass_trace: g.mean_trace(&state.v)?,
            energy,
            d_energy: previous_energy.map_or(0.0, |e| energy - e),
            grad_mu: g.h1_seminorm_bulk(&state.mu, Boundary::ZeroFlux)?,
            grad_w: g.h1_seminorm_trace(&state.w)?,
            overshoot: state.v.values.iter().map(|&v| dom.distance(v)).fold(0.0, f64::max),
            delta_h1v: self.config.delta * g.h1_seminorm_trace(&state.v)?,
            newton_iters: state.newton_iters,
        })
    }

    /// Runs from the initial data to `t_end`. Every `stride`-th state is kept
    /// (`0` keeps only the first and last); `observer` sees every state.
    pub fn run_with(&mut self, stride: usize, mut observer: impl FnMut(&StepSolution, &DiagnosticsRow)) -> Trajectory {
        let stiffness = self.stiffness();
        if stiffness > 0.5 {
            warn!("dt·(L + L_Γ) = {stiffness:.3} exceeds 0.5");
        }
        let mut traj = Trajectory { states: Vec::new(), diagnostics: Vec::new(), error: None, stiffness };
        let start = self.initial_state().and_then(|s| {
            let d = self.diagnostics(&s, None)?;
            Ok((s, d))
        });
        let (mut state, row) = match start {
            Ok(v) => v,
            Err(e) => {
                traj.error = Some(e);
                return traj;
            }
        };
        observer(&state, &row);
        let mut energy = row.energy;
        traj.diagnostics.push(row);
        traj.states.push(state.clone());
        let mut last_stored = true;

        for (n, t_next) in self.config.step_times().into_iter().enumerate() {
            let next = self.step_to(&state, t_next).and_then(|s| {
                let d = self.diagnostics(&s, Some(energy))?;
                Ok((s, d))
            });
            match next {
                Ok((s, row)) => {
                    observer(&s, &row);
                    energy = row.energy;
                    traj.diagnostics.push(row);
                    state = s;
                    last_stored = stride > 0 && (n + 1) % stride == 0;
                    if last_stored {
                        traj.states.push(state.clone());
                    }
                }
                Err(e) => {
                    traj.error = Some(e);
                    break;
                }
            }
        }
        if !last_stored {
            traj.states.push(state);
        }
        traj
    }

    pub fn run(&mut self, stride: usize) -> Trajectory {
        self.run_with(stride, |_, _| {})
    }
}

/// One step of `config.dt` from `state`.
pub fn step(state: &StepSolution, problem: &Problem, config: &SolverConfig) -> Result<StepSolution> {
    Solver::new(problem, *config)?.step(state)
}

/// Full run keeping every state.
pub fn run(problem: &Problem, config: &SolverConfig) -> Result<Trajectory> {
    Ok(Solver::new(problem, *config)?.run(1))
}

pub fn energy(state: &StepSolution, problem: &Problem, config: &SolverConfig) -> Result<f64> {
    Solver::new(problem, *config)?.energy(state)
}
