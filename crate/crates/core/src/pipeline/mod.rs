//! The three-step reconstruction: Cauchy solve on the body-minus-heart
//! domain, Neumann solve on the heart domain, then pointwise arithmetic for
//! the transmembrane potential on the heart boundary.
//!
//! Operator bookkeeping: the extracellular operator `A_e` is the input,
//! `A_i = λ A_e` and `A_b = A_e / λ̃` are derived, never specified twice.
//!
//! Sign and scaling contract for the Neumann data. Step 1 reports the
//! conormal flux of `u_b` on the heart boundary with the annulus' outward
//! normal (pointing into the hole). The Neumann step poses its equation with
//! the heart domain's own outward normal, so the handoff flips the sign
//! exactly once, here in [`run`]. The data is expressed through the `ν_{A_e}`
//! conormal the Neumann solver works with, which multiplies the `ν_{A_b}`
//! flux by `λ̃²`: `h0 = −λ̃² · flux`. The reconstruction is then invariant
//! under the reparameterization `(A_e, λ̃) → (μ A_e, μ λ̃)` that leaves the
//! body operator unchanged.

use std::collections::BTreeMap;
use std::time::Instant;

use num_complex::Complex64;

use crate::boundary::{
    compatibility_defect, kernel_basis, solve_neumann_with_kernel, KernelBasis, NeumannOptions,
    NeumannSolution,
};
use crate::cauchy::{
    select_alpha_discrepancy, solve_alternating, solve_tikhonov, AlternatingOptions,
    CauchySolution, TikhonovOptions,
};
use crate::error::{Error, Result};
use crate::fem::SolveOptions;
use crate::field::{add_boundary_noise, transfer_boundary, Field};
use crate::mesh::{BoundaryTag, Mesh};
use crate::operator::FirstOrderOperator;

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// Cauchy-step strategy and its parameters.
#[derive(Debug, Clone)]
pub enum CauchyStrategy {
    Tikhonov { alpha: f64 },
    /// Discrepancy-principle α selection for noisy data.
    Morozov { delta: f64, tau: f64 },
    Alternating { max_iter: usize, stop_tol: f64 },
}

#[derive(Debug, Clone)]
pub struct PipelineConfig {
    /// The extracellular operator `A_e`.
    pub op_e: FirstOrderOperator,
    /// `A_i = λ A_e`.
    pub lambda: f64,
    /// `A_e = λ̃ A_b`.
    pub lambda_tilde: f64,
    /// Body-minus-heart mesh (INNER and OUTER loops).
    pub mesh_omega: Mesh,
    /// Heart mesh (single INNER loop).
    pub mesh_heart: Mesh,
    /// Body-surface Dirichlet data on the OUTER loop of `mesh_omega`.
    pub f: Field,
    pub strategy: CauchyStrategy,
    /// Compatibility tolerance for the Neumann step.
    pub ctol: f64,
    pub eps_ker: f64,
    pub solver_tol: f64,
    /// Seed for the optional noise injection.
    pub seed: u64,
    /// Relative boundary-L² noise level added to `f` before solving (0 = none).
    pub noise_level: f64,
}

impl PipelineConfig {
    pub fn new(
        op_e: FirstOrderOperator,
        lambda: f64,
        lambda_tilde: f64,
        mesh_omega: Mesh,
        mesh_heart: Mesh,
        f: Field,
        strategy: CauchyStrategy,
    ) -> Result<Self> {
        let cfg = Self {
            op_e,
            lambda,
            lambda_tilde,
            mesh_omega,
            mesh_heart,
            f,
            strategy,
            ctol: 1e-6,
            eps_ker: 1e-8,
            solver_tol: 1e-10,
            seed: 0,
            noise_level: 0.0,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0) {
            return Err(Error::invalid("lambda must be positive"));
        }
        if !(self.lambda_tilde > 0.0) {
            return Err(Error::invalid("lambda_tilde must be positive"));
        }
        let margin = self.op_e.symbol_injectivity_margin(64)?;
        if margin <= 1e-10 {
            return Err(Error::invalid(format!(
                "operator symbol is not injective (margin {margin:.3e})"
            )));
        }
        self.f.expect_boundary(&self.mesh_omega, BoundaryTag::Outer)?;
        if !self.mesh_omega.has_tag(BoundaryTag::Inner) {
            return Err(Error::invalid("body mesh lacks an INNER loop"));
        }
        if !self.mesh_heart.has_tag(BoundaryTag::Inner) {
            return Err(Error::invalid("heart mesh lacks an INNER loop"));
        }
        Ok(())
    }

    /// The body operator `A_b = A_e / λ̃`.
    pub fn op_b(&self) -> Result<FirstOrderOperator> {
        self.op_e.scale(1.0 / self.lambda_tilde)
    }

    /// The intracellular operator `A_i = λ A_e` (derived, for reporting).
    pub fn op_i(&self) -> Result<FirstOrderOperator> {
        self.op_e.scale(self.lambda)
    }
}

/// Which stage a pipeline failure occurred in.
#[derive(Debug, Clone)]
pub struct PipelineFailure {
    pub stage: &'static str,
    pub message: String,
    /// True when the failure is a solver/compatibility problem rather than
    /// bad input.
    pub solver_failure: bool,
}

/// Everything the run produced, including partial results on failure.
/// `v` is present iff both solve steps succeeded; the compatibility defect is
/// recorded even when the Neumann step aborts.
pub struct PipelineReport {
    pub cauchy: Option<CauchySolution>,
    /// Noise norm actually injected into `f` (0 when disabled).
    pub injected_noise: f64,
    pub kernel_dim: Option<usize>,
    pub compatibility_defect: Option<f64>,
    /// Neumann data handed to Step 2, on the heart boundary loop.
    pub h0: Option<Field>,
    pub neumann: Option<NeumannSolution>,
    /// Trace of h on the heart boundary loop.
    pub h_trace: Option<Field>,
    /// Trace of u_b transferred onto the heart boundary loop.
    pub u_b_trace: Option<Field>,
    /// The transmembrane potential on the heart boundary.
    pub v: Option<Field>,
    pub failure: Option<PipelineFailure>,
    /// Wall-clock seconds per stage.
    pub timings: BTreeMap<&'static str, f64>,
    /// True when the Step-2 data had to be interpolated between mismatched
    /// boundary loops.
    pub boundary_interpolated: bool,
}

impl PipelineReport {
    pub fn is_success(&self) -> bool {
        self.failure.is_none() && self.v.is_some()
    }

    fn empty() -> Self {
        Self {
            cauchy: None,
            injected_noise: 0.0,
            kernel_dim: None,
            compatibility_defect: None,
            h0: None,
            neumann: None,
            h_trace: None,
            u_b_trace: None,
            v: None,
            failure: None,
            timings: BTreeMap::new(),
            boundary_interpolated: false,
        }
    }

    fn fail(mut self, stage: &'static str, err: &Error) -> Self {
        self.failure = Some(PipelineFailure {
            stage,
            message: err.to_string(),
            solver_failure: !err.is_input_error(),
        });
        self
    }
}

/// Pointwise transmembrane potential `v = (h − u_b)/λ² − u_b` on the heart
/// boundary.
pub fn transmembrane_potential(h: &Field, u_b_trace: &Field, lambda: f64) -> Result<Field> {
    if !(lambda > 0.0) {
        return Err(Error::invalid("lambda must be positive"));
    }
    if h.support() != u_b_trace.support()
        || h.components() != u_b_trace.components()
        || h.n_nodes() != u_b_trace.n_nodes()
    {
        return Err(Error::invalid(
            "h and u_b traces must live on the same boundary loop",
        ));
    }
    let inv_l2 = 1.0 / (lambda * lambda);
    let values = h
        .values()
        .iter()
        .zip(u_b_trace.values())
        .map(|(hv, uv)| (hv - uv) * c(inv_l2) - uv)
        .collect();
    Field::new(h.support(), h.components(), values)
}

/// Runs the three-step reconstruction. Input errors surface as `Err`; solver
/// and compatibility failures come back inside the report with all partial
/// results that were produced.
pub fn run(config: &PipelineConfig) -> Result<PipelineReport> {
    config.validate()?;
    let mut report = PipelineReport::empty();
    let op_b = config.op_b()?;
    let mesh = &config.mesh_omega;
    let heart = &config.mesh_heart;

    // optional reproducible noise injection
    let f = if config.noise_level > 0.0 {
        let (noisy, injected) =
            add_boundary_noise(mesh, &config.f, config.noise_level, config.seed)?;
        report.injected_noise = injected;
        noisy
    } else {
        config.f.clone()
    };

    // Step 1: regularized Cauchy solve on the body-minus-heart domain
    let t0 = Instant::now();
    let cauchy = match &config.strategy {
        CauchyStrategy::Tikhonov { alpha } => {
            let opts = TikhonovOptions {
                solver_tol: config.solver_tol,
                ..TikhonovOptions::default()
            };
            solve_tikhonov(&op_b, mesh, &f, *alpha, &opts)
        }
        CauchyStrategy::Morozov { delta, tau } => {
            let opts = TikhonovOptions {
                solver_tol: config.solver_tol,
                ..TikhonovOptions::default()
            };
            let delta = if *delta > 0.0 {
                *delta
            } else {
                report.injected_noise
            };
            select_alpha_discrepancy(&op_b, mesh, &f, delta, *tau, &opts).map(|(_, s, _)| s)
        }
        CauchyStrategy::Alternating { max_iter, stop_tol } => {
            let opts = AlternatingOptions {
                max_iter: *max_iter,
                stop_tol: *stop_tol,
                solver_tol: config.solver_tol,
            };
            solve_alternating(&op_b, mesh, &f, &opts)
        }
    };
    report.timings.insert("cauchy", t0.elapsed().as_secs_f64());
    let cauchy = match cauchy {
        Ok(s) => s,
        Err(e) => return Ok(report.fail("cauchy", &e)),
    };

    // Step 2 data: flip the flux once to the heart domain's outward normal
    // and express it through the nu_{A_e} conormal: h0 = -lambda_tilde^2 flux
    let t1 = Instant::now();
    let heart_nodes = heart.boundary_nodes(BoundaryTag::Inner)?;
    let omega_inner_nodes = mesh.boundary_nodes(BoundaryTag::Inner)?;
    let matched = heart_nodes.len() == omega_inner_nodes.len()
        && heart_nodes
            .iter()
            .zip(omega_inner_nodes)
            .all(|(&h, &o)| heart.vertices()[h] == mesh.vertices()[o]);
    report.boundary_interpolated = !matched;

    let scale = -config.lambda_tilde * config.lambda_tilde;
    let flux_on_heart = transfer_boundary(mesh, &cauchy.flux_inner, heart, BoundaryTag::Inner)?;
    let h0 = flux_on_heart.scaled(c(scale));
    let u_b_trace = transfer_boundary(mesh, &cauchy.trace_inner, heart, BoundaryTag::Inner)?;
    report.h0 = Some(h0.clone());
    report.u_b_trace = Some(u_b_trace.clone());
    report.cauchy = Some(cauchy);

    // Step 2: Fredholm Neumann solve on the heart domain
    let kernel = match kernel_basis(&config.op_e, heart, config.eps_ker) {
        Ok(k) => k,
        Err(e) => {
            report.timings.insert("neumann", t1.elapsed().as_secs_f64());
            return Ok(report.fail("kernel-detection", &e));
        }
    };
    report.kernel_dim = Some(kernel.dim());
    let defect = match compatibility_defect(heart, &h0, &kernel) {
        Ok(d) => d,
        Err(e) => {
            report.timings.insert("neumann", t1.elapsed().as_secs_f64());
            return Ok(report.fail("compatibility", &e));
        }
    };
    report.compatibility_defect = Some(defect);

    let neumann_opts = NeumannOptions {
        ctol: config.ctol,
        eps_ker: config.eps_ker,
        solve: SolveOptions::with_tol(config.solver_tol),
    };
    let neumann = match solve_neumann_with_kernel(&config.op_e, heart, &h0, &kernel, &neumann_opts)
    {
        Ok(s) => s,
        Err(e) => {
            report.timings.insert("neumann", t1.elapsed().as_secs_f64());
            return Ok(report.fail("neumann", &e));
        }
    };
    report.timings.insert("neumann", t1.elapsed().as_secs_f64());

    // Step 3: transmembrane potential on the heart boundary
    let t2 = Instant::now();
    let h_trace = neumann.h.boundary_trace(heart, BoundaryTag::Inner)?;
    let v = transmembrane_potential(&h_trace, &u_b_trace, config.lambda)?;
    report.timings.insert("potential", t2.elapsed().as_secs_f64());
    report.h_trace = Some(h_trace);
    report.neumann = Some(neumann);
    report.v = Some(v);
    Ok(report)
}

/// Result of the kernel-coincidence diagnostic.
#[derive(Debug, Clone)]
pub struct KernelCoincidence {
    pub dim_heart: usize,
    pub dim_omega: usize,
    /// Worst relative residual of an Ω-kernel trace against the span of the
    /// heart-kernel traces.
    pub max_residual: f64,
    pub matched: bool,
    pub detail: String,
}

/// Checks the hypothesis that the solution spaces of `A_e` on the heart
/// domain and `A_b` on the body-minus-heart domain coincide: equal discrete
/// kernel dimensions, and every Ω-kernel element restricted to the heart
/// boundary reproduced by the span of heart-kernel traces (report-only).
pub fn check_kernel_coincidence(
    op_e: &FirstOrderOperator,
    mesh_heart: &Mesh,
    op_b: &FirstOrderOperator,
    mesh_omega: &Mesh,
    eps_ker: f64,
) -> Result<KernelCoincidence> {
    let heart_kernel = kernel_basis(op_e, mesh_heart, eps_ker)?;
    let omega_kernel = kernel_basis(op_b, mesh_omega, eps_ker)?;
    let (dh, dom) = (heart_kernel.dim(), omega_kernel.dim());

    let mut max_residual = 0.0f64;
    let mut detail = String::new();
    if dh != dom {
        detail = format!("kernel dimensions differ: heart {dh}, body {dom}");
    } else if dom > 0 {
        max_residual = trace_reproduction_residual(&heart_kernel, mesh_heart, &omega_kernel, mesh_omega)?;
        if max_residual > 1e-6 {
            detail = format!("trace residual {max_residual:.3e} exceeds 1e-6");
        }
    }
    let matched = detail.is_empty();
    if matched {
        detail = format!("dimensions {dh} = {dom}, max trace residual {max_residual:.3e}");
    }
    Ok(KernelCoincidence {
        dim_heart: dh,
        dim_omega: dom,
        max_residual,
        matched,
        detail,
    })
}

/// Worst boundary-L² residual of projecting Ω-kernel fields (evaluated at the
/// heart-boundary node positions, which lie inside the annulus) onto the span
/// of heart-kernel traces.
fn trace_reproduction_residual(
    heart_kernel: &KernelBasis,
    mesh_heart: &Mesh,
    omega_kernel: &KernelBasis,
    mesh_omega: &Mesh,
) -> Result<f64> {
    let k = heart_kernel.fields()[0].components();
    let nodes = mesh_heart.boundary_nodes(BoundaryTag::Inner)?;
    let weights = mesh_heart.boundary_weights(BoundaryTag::Inner)?;
    let weighted_inner = |a: &[Complex64], b: &[Complex64]| -> Complex64 {
        weights
            .iter()
            .enumerate()
            .map(|(i, w)| {
                (0..k)
                    .map(|comp| b[i * k + comp].conj() * a[i * k + comp] * c(*w))
                    .sum::<Complex64>()
            })
            .sum()
    };

    // heart-kernel traces as raw vectors, Gram for the projection
    let traces: Vec<Vec<Complex64>> = heart_kernel
        .traces()
        .iter()
        .map(|t| t.values().to_vec())
        .collect();
    let d = traces.len();
    let mut gram = nalgebra::DMatrix::<Complex64>::zeros(d, d);
    for i in 0..d {
        for j in 0..d {
            gram[(i, j)] = weighted_inner(&traces[j], &traces[i]);
        }
    }
    let gram_inv = gram
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Factorization("kernel trace Gram matrix is singular".into()))?;

    let mut worst = 0.0f64;
    for field in omega_kernel.fields() {
        // evaluate the annulus field at the heart boundary node positions
        let mut vals = Vec::with_capacity(nodes.len() * k);
        for &node in nodes {
            let p = mesh_heart.vertices()[node];
            let v = field.eval_volume(mesh_omega, p)?;
            vals.extend(v);
        }
        let norm2 = weighted_inner(&vals, &vals).re.max(0.0);
        if norm2 < 1e-26 {
            continue;
        }
        // project onto span of traces
        let rhs = nalgebra::DVector::<Complex64>::from_iterator(
            d,
            (0..d).map(|i| weighted_inner(&vals, &traces[i])),
        );
        let coeffs = &gram_inv * rhs;
        let mut resid = vals.clone();
        for (i, trace) in traces.iter().enumerate() {
            for (r, t) in resid.iter_mut().zip(trace) {
                *r -= coeffs[i] * t;
            }
        }
        let r2 = weighted_inner(&resid, &resid).re.max(0.0);
        worst = worst.max((r2 / norm2).sqrt());
    }
    Ok(worst)
}

/// Convenience pair of meshes with a shared heart boundary: an annulus and a
/// disk whose boundary nodes coincide node-for-node with the annulus' INNER
/// loop.
pub fn generate_matched_meshes(r_in: f64, r_out: f64, h: f64) -> Result<(Mesh, Mesh)> {
    let omega = crate::mesh::generate_annulus(r_in, r_out, h)?;
    let n_inner = omega.boundary_nodes(BoundaryTag::Inner)?.len();
    let heart = crate::mesh::generate_disk_with_boundary(r_in, h, n_inner)?;
    Ok((omega, heart))
}

/// Oracle helper: runs Steps 2-3 only, from a given flux on the annulus'
/// INNER loop (outward-of-annulus normal). Used to validate the full pipeline
/// against exact Cauchy data.
pub fn run_steps_2_3(
    config: &PipelineConfig,
    flux_inner: &Field,
    u_b_trace: &Field,
) -> Result<(Field, Field)> {
    let heart = &config.mesh_heart;
    let scale = -config.lambda_tilde * config.lambda_tilde;
    let flux_on_heart =
        transfer_boundary(&config.mesh_omega, flux_inner, heart, BoundaryTag::Inner)?;
    let h0 = flux_on_heart.scaled(c(scale));
    let ub_on_heart =
        transfer_boundary(&config.mesh_omega, u_b_trace, heart, BoundaryTag::Inner)?;
    let opts = NeumannOptions {
        ctol: config.ctol,
        eps_ker: config.eps_ker,
        solve: SolveOptions::with_tol(config.solver_tol),
    };
    let sol = crate::boundary::solve_neumann(&config.op_e, heart, &h0, &opts)?;
    let h_trace = sol.h.boundary_trace(heart, BoundaryTag::Inner)?;
    let v = transmembrane_potential(&h_trace, &ub_on_heart, config.lambda)?;
    Ok((h_trace, v))
}

#[cfg(test)]
mod tests;
