//! Regularized solution of the ill-posed Cauchy problem: recover the body
//! potential `u_b` in the annulus (and its Cauchy data on the heart boundary)
//! from Dirichlet data `f` on the body surface and zero conormal data there.
//!
//! The problem is parameterized by the unknown Dirichlet trace `g` on the
//! heart boundary; each evaluation of the linear forward map is a mixed
//! (Zaremba) solve. Two regularization strategies are provided:
//!
//! * Tikhonov: minimize `½‖F g − f‖²_{L²(outer)} + α/2 ‖g‖²_{H¹(inner)}` by
//!   conjugate gradients on the normal equations, with the adjoint applied
//!   through an adjoint Zaremba solve (the exact discrete adjoint);
//! * alternating iterations between the two well-posed mixed problems, with
//!   the iteration count acting as the regularization parameter.

use num_complex::Complex64;

use crate::boundary::{conormal_trace_with, MixedWorkspace};
use crate::error::{Error, Result};
use crate::fem::{
    field_from_dofs,
    solve::{axpy, dot, norm},
    CsrMatrix, SolveOptions,
};
use crate::field::{Field, Support};
use crate::mesh::{BoundaryTag, Mesh};
use crate::operator::FirstOrderOperator;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CauchyMethod {
    Tikhonov,
    Alternating,
}

impl CauchyMethod {
    pub fn name(self) -> &'static str {
        match self {
            CauchyMethod::Tikhonov => "TIKHONOV",
            CauchyMethod::Alternating => "ALTERNATING",
        }
    }
}

/// Everything the downstream Neumann step needs from a Cauchy solve.
#[derive(Debug, Clone)]
pub struct CauchySolution {
    /// Reconstructed body potential on the annulus.
    pub u_b: Field,
    /// Dirichlet trace of `u_b` on the heart boundary (loop order).
    pub trace_inner: Field,
    /// Conormal derivative of `u_b` on the heart boundary, outward normal of
    /// the annulus (pointing into the hole).
    pub flux_inner: Field,
    /// Regularization weight used (0 for the alternating method).
    pub alpha: f64,
    /// Achieved data misfit `‖u_b|outer − f‖_{L²(outer)}`.
    pub discrepancy: f64,
    pub iterations: usize,
    pub method: CauchyMethod,
    /// Per-iteration convergence measure (relative residual or trace change).
    pub history: Vec<f64>,
}

/// Cached discretization for repeated Cauchy work on one mesh/operator pair:
/// the Zaremba factorization, boundary index maps, the boundary mass on the
/// outer loop and the H¹ penalty on the inner loop.
pub struct CauchyWorkspace {
    op: FirstOrderOperator,
    k: usize,
    zaremba: MixedWorkspace,
    inner_nodes: Vec<usize>,
    outer_nodes: Vec<usize>,
    inner_weights: Vec<f64>,
    outer_weights: Vec<f64>,
    penalty: CsrMatrix,
    solve_opts: SolveOptions,
}

impl CauchyWorkspace {
    pub fn new(op_b: &FirstOrderOperator, mesh: &Mesh, solver_tol: f64) -> Result<Self> {
        let zaremba = MixedWorkspace::new(op_b, mesh, BoundaryTag::Inner, BoundaryTag::Outer)?;
        let inner_nodes = mesh.boundary_nodes(BoundaryTag::Inner)?.to_vec();
        let outer_nodes = mesh.boundary_nodes(BoundaryTag::Outer)?.to_vec();
        let inner_weights = mesh.boundary_weights(BoundaryTag::Inner)?;
        let outer_weights = mesh.boundary_weights(BoundaryTag::Outer)?;
        let k = op_b.components();
        let penalty = boundary_h1_matrix(mesh, BoundaryTag::Inner, k)?;
        Ok(Self {
            op: op_b.clone(),
            k,
            zaremba,
            inner_nodes,
            outer_nodes,
            inner_weights,
            outer_weights,
            penalty,
            solve_opts: SolveOptions::with_tol(solver_tol),
        })
    }

    pub fn op(&self) -> &FirstOrderOperator {
        &self.op
    }

    pub fn components(&self) -> usize {
        self.k
    }

    pub fn n_inner(&self) -> usize {
        self.inner_nodes.len()
    }

    pub fn n_outer(&self) -> usize {
        self.outer_nodes.len()
    }

    pub fn stiffness(&self) -> &CsrMatrix {
        &self.zaremba.full
    }

    /// Full-domain lift of inner Dirichlet data `g` with zero conormal data
    /// on the outer loop.
    pub fn lift(&self, g: &[Complex64]) -> Result<Vec<Complex64>> {
        debug_assert_eq!(g.len(), self.n_inner() * self.k);
        let rhs =
            self.zaremba
                .elim
                .reduced_rhs(&self.zaremba.full, &vec![ZERO; self.zaremba.full.n()], g);
        let (x, _) = self.zaremba.solve_reduced(&rhs, &self.solve_opts)?;
        Ok(self.zaremba.elim.embed(&x, g))
    }

    /// The linear forward map: trace on the outer loop of the lift of `g`.
    pub fn forward(&self, g: &[Complex64]) -> Result<Vec<Complex64>> {
        let u = self.lift(g)?;
        Ok(self.outer_trace(&u))
    }

    pub fn outer_trace(&self, u_full: &[Complex64]) -> Vec<Complex64> {
        let mut out = Vec::with_capacity(self.n_outer() * self.k);
        for &node in &self.outer_nodes {
            for comp in 0..self.k {
                out.push(u_full[node * self.k + comp]);
            }
        }
        out
    }

    /// Adjoint of [`Self::forward`]: `F^H y = −K_BI K_II^{-1} R_out^H y`.
    pub fn adjoint(&self, y: &[Complex64]) -> Result<Vec<Complex64>> {
        debug_assert_eq!(y.len(), self.n_outer() * self.k);
        let k = self.k;
        let pairs = self
            .outer_nodes
            .iter()
            .enumerate()
            .flat_map(|(i, &node)| (0..k).map(move |comp| (node * k + comp, y[i * k + comp])));
        let rhs = self.zaremba.elim.scatter_free(pairs);
        let (w, _) = self.zaremba.solve_reduced(&rhs, &self.solve_opts)?;
        let w_full = self
            .zaremba
            .elim
            .embed(&w, &vec![ZERO; self.n_inner() * self.k]);
        let kw = self.zaremba.full.matvec(&w_full);
        let mut out = Vec::with_capacity(self.n_inner() * self.k);
        for &node in &self.inner_nodes {
            for comp in 0..k {
                out.push(-kw[node * k + comp]);
            }
        }
        Ok(out)
    }

    /// Multiplies a vector on the outer loop by the trapezoidal boundary mass.
    pub fn weight_outer(&self, y: &[Complex64]) -> Vec<Complex64> {
        let mut out = y.to_vec();
        for (i, w) in self.outer_weights.iter().enumerate() {
            for comp in 0..self.k {
                out[i * self.k + comp] *= c(*w);
            }
        }
        out
    }

    pub fn outer_norm(&self, y: &[Complex64]) -> f64 {
        weighted_norm(y, &self.outer_weights, self.k)
    }

    pub fn inner_norm(&self, y: &[Complex64]) -> f64 {
        weighted_norm(y, &self.inner_weights, self.k)
    }

    /// `H g = F^H M F g + α P g`, the Hessian of the Tikhonov functional.
    pub fn apply_hessian(&self, g: &[Complex64], alpha: f64) -> Result<Vec<Complex64>> {
        let fg = self.forward(g)?;
        let mut out = self.adjoint(&self.weight_outer(&fg))?;
        let pg = self.penalty.matvec(g);
        axpy(&mut out, &pg, c(alpha));
        Ok(out)
    }

    /// Tikhonov objective `½‖Fg − f‖²_M + α/2 g^H P g` and its gradient
    /// (with respect to the conjugate coordinates; exact discrete adjoint).
    pub fn objective_and_gradient(
        &self,
        g: &[Complex64],
        f: &[Complex64],
        alpha: f64,
    ) -> Result<(f64, Vec<Complex64>)> {
        let fg = self.forward(g)?;
        let misfit: Vec<Complex64> = fg.iter().zip(f).map(|(a, b)| a - b).collect();
        let weighted = self.weight_outer(&misfit);
        let data_term = 0.5 * dot(&misfit, &weighted).re;
        let pg = self.penalty.matvec(g);
        let reg_term = 0.5 * alpha * dot(g, &pg).re;
        let mut grad = self.adjoint(&weighted)?;
        axpy(&mut grad, &pg, c(alpha));
        Ok((data_term + reg_term, grad))
    }

    #[allow(clippy::too_many_arguments)]
    fn solution_from_inner_data(
        &self,
        mesh: &Mesh,
        g: Vec<Complex64>,
        f: &Field,
        alpha: f64,
        iterations: usize,
        method: CauchyMethod,
        history: Vec<f64>,
    ) -> Result<CauchySolution> {
        let u_full = self.lift(&g)?;
        let outer = self.outer_trace(&u_full);
        let misfit: Vec<Complex64> = outer.iter().zip(f.values()).map(|(a, b)| a - b).collect();
        let discrepancy = self.outer_norm(&misfit);
        let u_b = field_from_dofs(self.k, u_full)?;
        let flux_inner = conormal_trace_with(&self.zaremba.full, mesh, &u_b, BoundaryTag::Inner)?;
        let trace_inner = Field::new(Support::Boundary(BoundaryTag::Inner), self.k, g)?;
        Ok(CauchySolution {
            u_b,
            trace_inner,
            flux_inner,
            alpha,
            discrepancy,
            iterations,
            method,
            history,
        })
    }
}

fn weighted_norm(y: &[Complex64], weights: &[f64], k: usize) -> f64 {
    weights
        .iter()
        .enumerate()
        .map(|(i, w)| (0..k).map(|comp| y[i * k + comp].norm_sqr()).sum::<f64>() * w)
        .sum::<f64>()
        .sqrt()
}

/// Discrete `H¹` matrix of a boundary loop: edge stiffness along the curve
/// plus the lumped boundary mass, per component.
pub fn boundary_h1_matrix(mesh: &Mesh, tag: BoundaryTag, k: usize) -> Result<CsrMatrix> {
    let nodes = mesh.boundary_nodes(tag)?;
    let index: std::collections::BTreeMap<usize, usize> =
        nodes.iter().enumerate().map(|(i, &n)| (n, i)).collect();
    let weights = mesh.boundary_weights(tag)?;
    let n = nodes.len();
    let mut triplets = Vec::with_capacity(n * 5 * k);
    for e in mesh.tagged_edges(tag) {
        let (i, j) = (index[&e.a], index[&e.b]);
        let w = 1.0 / e.length;
        for comp in 0..k {
            triplets.push((i * k + comp, i * k + comp, c(w)));
            triplets.push((j * k + comp, j * k + comp, c(w)));
            triplets.push((i * k + comp, j * k + comp, c(-w)));
            triplets.push((j * k + comp, i * k + comp, c(-w)));
        }
    }
    for (i, w) in weights.iter().enumerate() {
        for comp in 0..k {
            triplets.push((i * k + comp, i * k + comp, c(*w)));
        }
    }
    Ok(CsrMatrix::from_triplets(n * k, triplets))
}

/// Forward map as a standalone operation: the outer trace of the mixed
/// solution with `u = g` on the inner loop and zero conormal data outside.
pub fn forward_map(op_b: &FirstOrderOperator, mesh: &Mesh, g: &Field) -> Result<Field> {
    g.expect_boundary(mesh, BoundaryTag::Inner)?;
    let ws = CauchyWorkspace::new(op_b, mesh, 1e-11)?;
    let out = ws.forward(g.values())?;
    Field::new(Support::Boundary(BoundaryTag::Outer), op_b.components(), out)
}

#[derive(Debug, Clone)]
pub struct TikhonovOptions {
    /// Relative residual target for the normal-equation CG.
    pub cg_tol: f64,
    pub max_iter: usize,
    /// Inner linear-solver tolerance.
    pub solver_tol: f64,
    /// Optional reference trace `ḡ`; the penalty is `‖g − ḡ‖²`. Default 0.
    pub reference: Option<Field>,
    /// Warm start for the CG iteration.
    pub initial_guess: Option<Vec<Complex64>>,
}

impl Default for TikhonovOptions {
    fn default() -> Self {
        Self {
            cg_tol: 1e-10,
            max_iter: 4000,
            solver_tol: 1e-11,
            reference: None,
            initial_guess: None,
        }
    }
}

/// Tikhonov-regularized Cauchy solve with weight `alpha`.
pub fn solve_tikhonov(
    op_b: &FirstOrderOperator,
    mesh: &Mesh,
    f: &Field,
    alpha: f64,
    opts: &TikhonovOptions,
) -> Result<CauchySolution> {
    let ws = CauchyWorkspace::new(op_b, mesh, opts.solver_tol)?;
    solve_tikhonov_with(&ws, mesh, f, alpha, opts)
}

/// [`solve_tikhonov`] against a prebuilt workspace (used by the α sweep).
pub fn solve_tikhonov_with(
    ws: &CauchyWorkspace,
    mesh: &Mesh,
    f: &Field,
    alpha: f64,
    opts: &TikhonovOptions,
) -> Result<CauchySolution> {
    if !(alpha > 0.0) {
        return Err(Error::invalid(format!(
            "alpha must be positive, got {alpha}"
        )));
    }
    f.expect_boundary(mesh, BoundaryTag::Outer)?;
    let dim = ws.n_inner() * ws.k;

    // normal equations: (F^H M F + α P) g = F^H M f [+ α P ḡ]
    let mut b = ws.adjoint(&ws.weight_outer(f.values()))?;
    if let Some(reference) = &opts.reference {
        reference.expect_boundary(mesh, BoundaryTag::Inner)?;
        let pr = ws.penalty.matvec(reference.values());
        axpy(&mut b, &pr, c(alpha));
    }

    let apply = |g: &[Complex64]| ws.apply_hessian(g, alpha);
    let x0 = opts.initial_guess.clone().unwrap_or_else(|| vec![ZERO; dim]);
    let (g, iterations, history) = cg_on_operator(apply, &b, x0, opts.cg_tol, opts.max_iter)?;
    ws.solution_from_inner_data(mesh, g, f, alpha, iterations, CauchyMethod::Tikhonov, history)
}

/// Conjugate gradients on a Hermitian positive definite operator given as a
/// closure. Returns the iterate, iteration count and residual history.
fn cg_on_operator(
    apply: impl Fn(&[Complex64]) -> Result<Vec<Complex64>>,
    b: &[Complex64],
    mut x: Vec<Complex64>,
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<Complex64>, usize, Vec<f64>)> {
    let b_norm = norm(b);
    if b_norm == 0.0 {
        return Ok((vec![ZERO; b.len()], 0, vec![]));
    }
    let ax = apply(&x)?;
    let mut r: Vec<Complex64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
    let mut p = r.clone();
    let mut rr = dot(&r, &r);
    let mut history = Vec::new();
    let mut best = f64::INFINITY;
    let mut stagnant = 0usize;
    for iter in 0..max_iter {
        let rel = rr.re.max(0.0).sqrt() / b_norm;
        history.push(rel);
        if rel <= tol {
            return Ok((x, iter, history));
        }
        if rel < best * (1.0 - 1e-6) {
            best = rel;
            stagnant = 0;
        } else {
            stagnant += 1;
            // the normal-equation residual bottoms out at roundoff; accept a
            // clearly converged iterate instead of erroring
            if stagnant > 60 {
                if rel <= (1e3 * tol).max(1e-12) {
                    return Ok((x, iter, history));
                }
                return Err(Error::NonConvergence {
                    iterations: iter,
                    achieved: rel,
                    required: tol,
                    history,
                });
            }
        }
        let ap = apply(&p)?;
        let pap = dot(&p, &ap);
        if pap.re <= 0.0 {
            return Err(Error::NonConvergence {
                iterations: iter,
                achieved: rel,
                required: tol,
                history,
            });
        }
        let alpha = rr / pap;
        axpy(&mut x, &p, alpha);
        axpy(&mut r, &ap, -alpha);
        let rr_new = dot(&r, &r);
        let beta = rr_new / rr;
        for (pi, ri) in p.iter_mut().zip(&r) {
            *pi = ri + beta * *pi;
        }
        rr = rr_new;
    }
    let rel = rr.re.max(0.0).sqrt() / b_norm;
    if rel <= 1e3 * tol {
        return Ok((x, max_iter, history));
    }
    Err(Error::NonConvergence {
        iterations: max_iter,
        achieved: rel,
        required: tol,
        history,
    })
}

#[derive(Debug, Clone)]
pub struct AlternatingOptions {
    pub max_iter: usize,
    /// Relative change of successive inner traces that stops the iteration.
    pub stop_tol: f64,
    pub solver_tol: f64,
}

impl Default for AlternatingOptions {
    fn default() -> Self {
        Self {
            max_iter: 200,
            stop_tol: 1e-10,
            solver_tol: 1e-11,
        }
    }
}

/// Alternating iterations between the two well-posed mixed problems:
/// (i) Dirichlet `f` outside + current conormal guess inside,
/// (ii) zero conormal outside + the inner trace of (i) inside.
/// The iteration count acts as the regularization parameter.
pub fn solve_alternating(
    op_b: &FirstOrderOperator,
    mesh: &Mesh,
    f: &Field,
    opts: &AlternatingOptions,
) -> Result<CauchySolution> {
    if opts.max_iter < 1 {
        return Err(Error::invalid("max_iter must be at least 1"));
    }
    f.expect_boundary(mesh, BoundaryTag::Outer)?;
    let k = op_b.components();
    let solve_opts = SolveOptions::with_tol(opts.solver_tol);

    let ws1 = MixedWorkspace::new(op_b, mesh, BoundaryTag::Outer, BoundaryTag::Inner)?;
    let ws2 = CauchyWorkspace::new(op_b, mesh, opts.solver_tol)?;

    let n_inner = ws2.n_inner();
    let f_norm = ws2.outer_norm(f.values()).max(f64::MIN_POSITIVE);
    let divergence_limit = 1e6 * f_norm;

    let mut eta = Field::zeros(Support::Boundary(BoundaryTag::Inner), k, n_inner);
    let mut g_prev: Option<Vec<Complex64>> = None;
    let mut g = vec![ZERO; n_inner * k];
    let mut history = Vec::new();
    let mut iterations = opts.max_iter;

    for iter in 1..=opts.max_iter {
        let (u1, _) = ws1.solve(mesh, f, &eta, &solve_opts)?;
        let trace = u1.boundary_trace(mesh, BoundaryTag::Inner)?;
        g = trace.values().to_vec();

        let g_norm = ws2.inner_norm(&g);
        if g_norm > divergence_limit {
            return Err(Error::Divergence {
                norm: g_norm,
                limit: divergence_limit,
            });
        }

        let u2_full = ws2.lift(&g)?;
        let u2 = field_from_dofs(k, u2_full)?;
        let eta_new = conormal_trace_with(ws2.stiffness(), mesh, &u2, BoundaryTag::Inner)?;

        let eta_change = {
            let mut d = eta_new.values().to_vec();
            axpy(&mut d, eta.values(), c(-1.0));
            ws2.inner_norm(&d)
        };
        let trace_change = match &g_prev {
            Some(prev) => {
                let mut d = g.clone();
                axpy(&mut d, prev, c(-1.0));
                ws2.inner_norm(&d) / g_norm.max(f64::MIN_POSITIVE)
            }
            None => f64::INFINITY,
        };
        history.push(trace_change.min(1.0));

        eta = eta_new;
        g_prev = Some(g.clone());

        let eta_scale = ws2.inner_norm(eta.values()).max(f_norm);
        if trace_change <= opts.stop_tol || eta_change <= opts.stop_tol * eta_scale {
            iterations = iter;
            break;
        }
    }

    ws2.solution_from_inner_data(
        mesh,
        g,
        f,
        0.0,
        iterations,
        CauchyMethod::Alternating,
        history,
    )
}

/// The (alpha, discrepancy) pairs evaluated by an α sweep, in order.
pub type SweepTable = Vec<(f64, f64)>;

/// Morozov discrepancy principle: geometric α sweep (factor 10) from `1e-2`
/// down to `1e-12`, returning the largest α whose discrepancy is at most
/// `tau * delta`, together with the sweep table actually evaluated.
pub fn select_alpha_discrepancy(
    op_b: &FirstOrderOperator,
    mesh: &Mesh,
    f: &Field,
    delta: f64,
    tau: f64,
    opts: &TikhonovOptions,
) -> Result<(f64, CauchySolution, SweepTable)> {
    if !(delta > 0.0) {
        return Err(Error::invalid("noise level delta must be positive"));
    }
    if !(tau >= 1.0) {
        return Err(Error::invalid("tau must be at least 1"));
    }
    let ws = CauchyWorkspace::new(op_b, mesh, opts.solver_tol)?;
    let target = tau * delta;
    let mut sweep = Vec::new();
    let mut alpha = 1e-2;
    let mut guess: Option<Vec<Complex64>> = None;
    while alpha >= 1e-12 * 0.999 {
        let mut o = opts.clone();
        o.initial_guess = guess.clone();
        let sol = solve_tikhonov_with(&ws, mesh, f, alpha, &o)?;
        sweep.push((alpha, sol.discrepancy));
        if sol.discrepancy <= target {
            return Ok((alpha, sol, sweep));
        }
        guess = Some(sol.trace_inner.values().to_vec());
        alpha /= 10.0;
    }
    Err(Error::NoAdmissibleAlpha { target, sweep })
}
