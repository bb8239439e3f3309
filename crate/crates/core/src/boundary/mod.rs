//! Well-posed boundary-value building blocks: the Fredholm Neumann problem
//! with discrete kernel detection, compatibility testing and normalized
//! solutions, the mixed (Zaremba) problem, and variationally consistent
//! conormal traces.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::fem::{
    assemble_boundary_load, assemble_stiffness, field_from_dofs, solve::dot, solve_system,
    volume_l2_inner, CsrMatrix, Elimination, Factorization, SolveOptions, SolveReport,
    SolverMethod, SparseSystem,
};
use crate::field::{Field, Support};
use crate::mesh::{BoundaryTag, Mesh};
use crate::operator::FirstOrderOperator;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// Hard cap on detected kernel dimension; a larger near-null space means the
/// Neumann pair is probably not Fredholm (Shapiro-Lopatinsky suspect).
pub const KERNEL_DIM_CAP: usize = 20;
/// Required ratio between the first rejected and the threshold eigenvalue.
pub const KERNEL_GAP_FACTOR: f64 = 100.0;

/// Inner product used to orthonormalize the kernel basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelNorm {
    /// Boundary traces orthonormal in L² of the tagged loop (the default).
    BoundaryL2(BoundaryTag),
    /// Fallback when kernel traces are linearly dependent on the boundary.
    VolumeL2,
}

/// Orthonormal basis of the discrete near-null space of the Neumann stiffness.
#[derive(Debug)]
pub struct KernelBasis {
    fields: Vec<Field>,
    traces: Vec<Field>,
    rayleigh: Vec<f64>,
    norm_used: KernelNorm,
    matrix_norm: f64,
    tag: BoundaryTag,
}

impl KernelBasis {
    pub fn dim(&self) -> usize {
        self.fields.len()
    }

    pub fn fields(&self) -> &[Field] {
        &self.fields
    }

    /// Boundary traces of the basis fields, in loop order of the tag.
    pub fn traces(&self) -> &[Field] {
        &self.traces
    }

    pub fn rayleigh_quotients(&self) -> &[f64] {
        &self.rayleigh
    }

    pub fn norm_used(&self) -> KernelNorm {
        self.norm_used
    }

    pub fn tag(&self) -> BoundaryTag {
        self.tag
    }

    pub fn matrix_norm(&self) -> f64 {
        self.matrix_norm
    }
}

fn orthonormalize_columns(x: &mut DMatrix<Complex64>) {
    let (n, s) = (x.nrows(), x.ncols());
    for j in 0..s {
        // two MGS passes keep orthogonality near machine precision
        for _ in 0..2 {
            for i in 0..j {
                let mut proj = ZERO;
                for r in 0..n {
                    proj += x[(r, i)].conj() * x[(r, j)];
                }
                for r in 0..n {
                    let xi = x[(r, i)];
                    x[(r, j)] -= proj * xi;
                }
            }
        }
        let mut nrm = 0.0;
        for r in 0..n {
            nrm += x[(r, j)].norm_sqr();
        }
        let nrm = nrm.sqrt();
        if nrm > 1e-300 {
            for r in 0..n {
                x[(r, j)] /= c(nrm);
            }
        }
    }
}

/// Discrete kernel of the Neumann problem for `op` on `mesh`: eigenvectors of
/// the stiffness matrix with Rayleigh quotient below `eps_ker * norm(K)`,
/// found by shifted inverse subspace iteration with Ritz extraction.
///
/// The basis is orthonormalized in boundary L² of the heart boundary when the
/// traces are independent, otherwise in volume L² (recorded in the result).
pub fn kernel_basis(
    op: &FirstOrderOperator,
    mesh: &Mesh,
    eps_ker: f64,
) -> Result<KernelBasis> {
    if !(eps_ker > 0.0 && eps_ker <= 1e-4) {
        return Err(Error::invalid(format!(
            "eps_ker must lie in (0, 1e-4], got {eps_ker}"
        )));
    }
    let tag = if mesh.has_tag(BoundaryTag::Inner) {
        BoundaryTag::Inner
    } else {
        BoundaryTag::Outer
    };
    let sys = assemble_stiffness(op, mesh)?;
    let kmat = &sys.matrix;
    let n = kmat.n();
    let k = op.components();
    let matrix_norm = kmat.norm_inf();
    if matrix_norm == 0.0 {
        return Err(Error::KernelCapExceeded {
            dim: n,
            cap: KERNEL_DIM_CAP,
        });
    }
    let threshold = eps_ker * matrix_norm;
    let s = n.min(KERNEL_DIM_CAP + 5);

    // inverse iteration on K + sigma I; sigma far below the first nonzero
    // eigenvalue but far above kernel roundoff
    let sigma = 1e-8 * matrix_norm;
    let shifted = kmat.shifted(sigma);
    let factor = Factorization::new(&shifted).ok();
    let solve_shifted = |b: &[Complex64]| -> Result<Vec<Complex64>> {
        if let Some(f) = &factor {
            Ok(f.solve(b))
        } else {
            let sys = SparseSystem::new(shifted.clone(), b.to_vec());
            let opts = SolveOptions {
                method: SolverMethod::Pcg,
                tol: 1e-10,
                max_iter: Some(40 * n),
            };
            Ok(solve_system(&sys, &opts)?.0)
        }
    };

    let mut rng = ChaCha8Rng::seed_from_u64(0xBA5E);
    let mut x = DMatrix::<Complex64>::zeros(n, s);
    for j in 0..s {
        for i in 0..n {
            x[(i, j)] = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        }
    }
    orthonormalize_columns(&mut x);

    let mut ritz: Vec<f64> = Vec::new();
    for _iter in 0..30 {
        // power step on the inverse
        let mut y = DMatrix::<Complex64>::zeros(n, s);
        for j in 0..s {
            let col: Vec<Complex64> = (0..n).map(|i| x[(i, j)]).collect();
            let sol = solve_shifted(&col)?;
            for i in 0..n {
                y[(i, j)] = sol[i];
            }
        }
        orthonormalize_columns(&mut y);

        // Rayleigh-Ritz on the subspace
        let mut kx = DMatrix::<Complex64>::zeros(n, s);
        for j in 0..s {
            let col: Vec<Complex64> = (0..n).map(|i| y[(i, j)]).collect();
            let kcol = kmat.matvec(&col);
            for i in 0..n {
                kx[(i, j)] = kcol[i];
            }
        }
        let mut b = y.adjoint() * &kx;
        let bh = b.adjoint();
        b = (b + bh) * c(0.5);
        let eig = nalgebra::SymmetricEigen::new(b);
        let mut order: Vec<usize> = (0..s).collect();
        order.sort_by(|&a, &bb| {
            eig.eigenvalues[a]
                .partial_cmp(&eig.eigenvalues[bb])
                .unwrap()
        });
        let new_ritz: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        // rotate the subspace to the Ritz basis, ascending
        let mut rotated = DMatrix::<Complex64>::zeros(n, s);
        for (newj, &oldj) in order.iter().enumerate() {
            for i in 0..n {
                let mut acc = ZERO;
                for m in 0..s {
                    acc += y[(i, m)] * eig.eigenvectors[(m, oldj)];
                }
                rotated[(i, newj)] = acc;
            }
        }
        x = rotated;
        let converged = !ritz.is_empty()
            && ritz
                .iter()
                .zip(&new_ritz)
                .all(|(a, b)| (a - b).abs() <= 1e-3 * b.abs().max(1e-13 * matrix_norm));
        ritz = new_ritz;
        if converged {
            break;
        }
    }

    let dim = ritz.iter().filter(|&&t| t <= threshold).count();
    if dim > KERNEL_DIM_CAP {
        return Err(Error::KernelCapExceeded {
            dim,
            cap: KERNEL_DIM_CAP,
        });
    }
    // no eigenvalue may sit in the ambiguous band (threshold, gap * threshold)
    for &t in &ritz {
        if t > threshold && t < KERNEL_GAP_FACTOR * threshold {
            return Err(Error::AmbiguousKernelGap {
                eigenvalue: t,
                threshold,
                gap_factor: KERNEL_GAP_FACTOR,
            });
        }
    }

    let mut fields: Vec<Field> = (0..dim)
        .map(|j| {
            let vals: Vec<Complex64> = (0..n).map(|i| x[(i, j)]).collect();
            field_from_dofs(k, vals).expect("finite kernel vector")
        })
        .collect::<Vec<_>>();
    let rayleigh = ritz[..dim].to_vec();

    // orthonormalize in boundary L2 when traces are independent
    let mut norm_used = KernelNorm::BoundaryL2(tag);
    if dim > 0 {
        let traces: Vec<Field> = fields
            .iter()
            .map(|f| f.boundary_trace(mesh, tag))
            .collect::<Result<_>>()?;
        let mut gram = DMatrix::<Complex64>::zeros(dim, dim);
        for i in 0..dim {
            for j in 0..dim {
                gram[(i, j)] =
                    crate::fem::boundary_l2_inner(mesh, tag, &traces[j], &traces[i])?;
            }
        }
        let sym = (gram.clone() + gram.adjoint()) * c(0.5);
        let evals = sym.clone().symmetric_eigenvalues();
        let min_ev = evals.iter().fold(f64::INFINITY, |a, &b| a.min(b));
        let max_ev = evals.iter().fold(0.0f64, |a, &b| a.max(b));
        let independent = max_ev > 0.0 && min_ev > 1e-10 * max_ev;
        if independent {
            rebase(&mut fields, &sym)?;
        } else {
            norm_used = KernelNorm::VolumeL2;
            let mut gram_v = DMatrix::<Complex64>::zeros(dim, dim);
            for i in 0..dim {
                for j in 0..dim {
                    gram_v[(i, j)] = volume_l2_inner(mesh, &fields[j], &fields[i])?;
                }
            }
            let sym_v = (gram_v.clone() + gram_v.adjoint()) * c(0.5);
            rebase(&mut fields, &sym_v)?;
        }
    }
    let traces = fields
        .iter()
        .map(|f| f.boundary_trace(mesh, tag))
        .collect::<Result<_>>()?;

    Ok(KernelBasis {
        fields,
        traces,
        rayleigh,
        norm_used,
        matrix_norm,
        tag,
    })
}

/// Replaces `fields` by linear combinations orthonormal under the Gram matrix.
fn rebase(fields: &mut [Field], gram: &DMatrix<Complex64>) -> Result<()> {
    let chol = nalgebra::Cholesky::new(gram.clone())
        .ok_or_else(|| Error::Factorization("kernel Gram matrix not positive definite".into()))?;
    // new_j = sum_i old_i * (R^{-1})_{ij}, where gram = R^H R
    let r = chol.l().adjoint();
    let rinv = r
        .try_inverse()
        .ok_or_else(|| Error::Factorization("kernel Gram matrix is singular".into()))?;
    let dim = fields.len();
    let old: Vec<Field> = fields.to_vec();
    for j in 0..dim {
        let mut combo = old[0].scaled(rinv[(0, j)]);
        for i in 1..dim {
            combo.add_scaled(&old[i], rinv[(i, j)])?;
        }
        fields[j] = combo;
    }
    Ok(())
}

/// Normalized compatibility defect `max_i |(h0, φ_i)_∂| / ‖h0‖_∂`.
/// Zero for an empty kernel or zero data.
pub fn compatibility_defect(mesh: &Mesh, h0: &Field, kernel: &KernelBasis) -> Result<f64> {
    if kernel.dim() == 0 {
        return Ok(0.0);
    }
    let tag = kernel.tag();
    h0.expect_boundary(mesh, tag)?;
    let h_norm = crate::fem::boundary_l2_norm(mesh, tag, h0)?;
    if h_norm == 0.0 {
        return Ok(0.0);
    }
    let mut worst: f64 = 0.0;
    for trace in kernel.traces() {
        let trace_norm = crate::fem::boundary_l2_norm(mesh, tag, trace)?;
        if trace_norm < 1e-13 {
            continue;
        }
        let pairing = crate::fem::boundary_l2_inner(mesh, tag, h0, trace)?;
        worst = worst.max(pairing.norm() / trace_norm);
    }
    Ok(worst / h_norm)
}

#[derive(Debug, Clone)]
pub struct NeumannOptions {
    /// Compatibility tolerance on the normalized defect.
    pub ctol: f64,
    pub eps_ker: f64,
    pub solve: SolveOptions,
}

impl Default for NeumannOptions {
    fn default() -> Self {
        Self {
            ctol: 1e-6,
            eps_ker: 1e-8,
            solve: SolveOptions::default(),
        }
    }
}

pub struct NeumannSolution {
    /// The normalized solution h₁ (volume field).
    pub h: Field,
    pub kernel_dim: usize,
    pub defect: f64,
    pub normalization: KernelNorm,
    pub report: SolveReport,
}

/// Solves `A*A h = 0` with conormal data `ν_A h = h0` on the loop carrying
/// `h0`, after checking the kernel-orthogonality compatibility condition.
/// The returned solution's boundary trace is L²-orthogonal to every kernel
/// trace (volume L² in the fallback case).
pub fn solve_neumann(
    op: &FirstOrderOperator,
    mesh: &Mesh,
    h0: &Field,
    opts: &NeumannOptions,
) -> Result<NeumannSolution> {
    let kernel = kernel_basis(op, mesh, opts.eps_ker)?;
    solve_neumann_with_kernel(op, mesh, h0, &kernel, opts)
}

/// [`solve_neumann`] with a precomputed kernel basis.
pub fn solve_neumann_with_kernel(
    op: &FirstOrderOperator,
    mesh: &Mesh,
    h0: &Field,
    kernel: &KernelBasis,
    opts: &NeumannOptions,
) -> Result<NeumannSolution> {
    let tag = match h0.support() {
        Support::Boundary(t) => t,
        Support::Volume => return Err(Error::invalid("Neumann data must be a boundary field")),
    };
    h0.expect_boundary(mesh, tag)?;
    if kernel.dim() > 0 && kernel.tag() != tag {
        return Err(Error::invalid("kernel basis tag does not match the data"));
    }

    let defect = compatibility_defect(mesh, h0, kernel)?;
    if defect > opts.ctol {
        return Err(Error::Incompatible {
            defect,
            ctol: opts.ctol,
        });
    }

    let mut sys = assemble_stiffness(op, mesh)?;
    sys.rhs = assemble_boundary_load(mesh, tag, h0)?;
    for field in kernel.fields() {
        sys.push_constraint(field.values().to_vec())?;
    }
    let (x, report) = solve_system(&sys, &opts.solve)?;
    let mut h = field_from_dofs(op.components(), x)?;

    // normalization: subtract kernel components so the boundary trace is
    // orthogonal to the kernel traces (basis is orthonormal in that product)
    for (field, trace) in kernel.fields().iter().zip(kernel.traces()) {
        let coeff = match kernel.norm_used() {
            KernelNorm::BoundaryL2(t) => {
                let h_trace = h.boundary_trace(mesh, t)?;
                crate::fem::boundary_l2_inner(mesh, t, &h_trace, trace)?
            }
            KernelNorm::VolumeL2 => volume_l2_inner(mesh, &h, field)?,
        };
        h.add_scaled(field, -coeff)?;
    }

    Ok(NeumannSolution {
        h,
        kernel_dim: kernel.dim(),
        defect,
        normalization: kernel.norm_used(),
        report,
    })
}

/// Reusable workspace for mixed (Zaremba) solves: Dirichlet data on one loop,
/// conormal data on the other. The reduced matrix is factorized once.
pub struct MixedWorkspace {
    op: FirstOrderOperator,
    dirichlet_tag: BoundaryTag,
    neumann_tag: BoundaryTag,
    pub full: CsrMatrix,
    pub elim: Elimination,
    reduced: CsrMatrix,
    factor: Option<Factorization>,
}

impl MixedWorkspace {
    pub fn new(
        op: &FirstOrderOperator,
        mesh: &Mesh,
        dirichlet_tag: BoundaryTag,
        neumann_tag: BoundaryTag,
    ) -> Result<Self> {
        if dirichlet_tag == neumann_tag {
            return Err(Error::invalid(
                "Dirichlet and Neumann tags must be distinct boundary components",
            ));
        }
        if !mesh.has_tag(dirichlet_tag) || !mesh.has_tag(neumann_tag) {
            return Err(Error::invalid("mesh lacks a required boundary tag"));
        }
        let sys = assemble_stiffness(op, mesh)?;
        let full = sys.matrix;
        let elim = Elimination::fix_nodes(
            mesh.n_vertices(),
            op.components(),
            mesh.boundary_nodes(dirichlet_tag)?,
        );
        let reduced = elim.reduced_matrix(&full);
        let factor = Factorization::new(&reduced).ok();
        Ok(Self {
            op: op.clone(),
            dirichlet_tag,
            neumann_tag,
            full,
            elim,
            reduced,
            factor,
        })
    }

    pub fn op(&self) -> &FirstOrderOperator {
        &self.op
    }

    /// Solves with Dirichlet values `g` (loop order on the Dirichlet tag) and
    /// conormal data `q` (loop order on the Neumann tag, outward normal of
    /// the meshed domain).
    pub fn solve(
        &self,
        mesh: &Mesh,
        g: &Field,
        q: &Field,
        opts: &SolveOptions,
    ) -> Result<(Field, SolveReport)> {
        g.expect_boundary(mesh, self.dirichlet_tag)?;
        q.expect_boundary(mesh, self.neumann_tag)?;
        let load = assemble_boundary_load(mesh, self.neumann_tag, q)?;
        let rhs_reduced = self.elim.reduced_rhs(&self.full, &load, g.values());
        let (x, report) = self.solve_reduced(&rhs_reduced, opts)?;
        let full = self.elim.embed(&x, g.values());
        Ok((field_from_dofs(self.op.components(), full)?, report))
    }

    pub fn solve_reduced(
        &self,
        rhs: &[Complex64],
        opts: &SolveOptions,
    ) -> Result<(Vec<Complex64>, SolveReport)> {
        if opts.method != SolverMethod::Pcg {
            if let Some(f) = &self.factor {
                let x = f.solve(rhs);
                let b_norm = crate::fem::solve::norm(rhs);
                let rel = if b_norm == 0.0 {
                    0.0
                } else {
                    crate::fem::solve::residual(&self.reduced, &x, rhs) / b_norm
                };
                if rel <= opts.tol.max(1e-12) {
                    return Ok((
                        x,
                        SolveReport {
                            method: "cached-direct",
                            iterations: 1,
                            residual: rel,
                            history: vec![rel],
                        },
                    ));
                }
            }
        }
        let sys = SparseSystem::new(self.reduced.clone(), rhs.to_vec());
        solve_system(
            &sys,
            &SolveOptions {
                method: SolverMethod::Pcg,
                ..opts.clone()
            },
        )
    }
}

/// One-shot mixed (Zaremba) solve: `A*A u = 0`, `u = g` on the Dirichlet tag,
/// `ν_A u = q` on the Neumann tag.
pub fn solve_mixed(
    op: &FirstOrderOperator,
    mesh: &Mesh,
    dirichlet: (BoundaryTag, &Field),
    neumann: (BoundaryTag, &Field),
    opts: &SolveOptions,
) -> Result<Field> {
    let ws = MixedWorkspace::new(op, mesh, dirichlet.0, neumann.0)?;
    Ok(ws.solve(mesh, dirichlet.1, neumann.1, opts)?.0)
}

/// Variationally consistent conormal trace on a tagged loop: solves the
/// lumped boundary mass system `M q = a(u, φ_i)` for the loop's nodes. The
/// normal is the outward normal of the meshed domain.
pub fn conormal_trace(
    op: &FirstOrderOperator,
    mesh: &Mesh,
    u: &Field,
    tag: BoundaryTag,
) -> Result<Field> {
    let sys = assemble_stiffness(op, mesh)?;
    conormal_trace_with(&sys.matrix, mesh, u, tag)
}

/// [`conormal_trace`] with a preassembled stiffness matrix.
pub fn conormal_trace_with(
    stiffness: &CsrMatrix,
    mesh: &Mesh,
    u: &Field,
    tag: BoundaryTag,
) -> Result<Field> {
    u.expect_volume(mesh)?;
    let k = u.components();
    let ku = stiffness.matvec(u.values());
    let nodes = mesh.boundary_nodes(tag)?;
    let weights = mesh.boundary_weights(tag)?;
    let mut values = Vec::with_capacity(nodes.len() * k);
    for (i, &node) in nodes.iter().enumerate() {
        for comp in 0..k {
            values.push(ku[node * k + comp] / c(weights[i]));
        }
    }
    Field::new(Support::Boundary(tag), k, values)
}

/// Discrete Green identity residual `|a(u, v) − ∫ v^H h0 ds|` for a Neumann
/// solution `u` with data `h0`, normalized by the natural scale.
pub fn green_identity_residual(
    op: &FirstOrderOperator,
    mesh: &Mesh,
    u: &Field,
    h0: &Field,
    v: &Field,
) -> Result<f64> {
    let tag = match h0.support() {
        Support::Boundary(t) => t,
        _ => return Err(Error::invalid("h0 must be a boundary field")),
    };
    u.expect_volume(mesh)?;
    v.expect_volume(mesh)?;
    let sys = assemble_stiffness(op, mesh)?;
    let ku = sys.matrix.matvec(u.values());
    let energy = dot(v.values(), &ku);
    let load = assemble_boundary_load(mesh, tag, h0)?;
    let boundary = dot(v.values(), &load);
    let scale = crate::fem::solve::norm(&load) * crate::fem::solve::norm(v.values())
        + energy.norm()
        + boundary.norm();
    Ok((energy - boundary).norm() / scale.max(f64::MIN_POSITIVE))
}
