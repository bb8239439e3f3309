//! Piecewise-linear finite elements for generalized Laplacians `A*A`.
//!
//! The bilinear form is assembled directly from the first-order operator:
//! `a(u, v) = ∫ (Av)^H (Au) dx`, which is the volume term of the Green
//! formula `a(u, v) = ∫_∂ v^H (ν_A u) ds + ∫ v^H (A*A u) dx`. On P1 elements
//! the integrand is a quadratic polynomial per triangle and is integrated
//! exactly. Boundary terms use the trapezoidal rule on edges.
//!
//! Degrees of freedom are node-major: dof(node, component) = node * k + component.

pub mod solve;
mod sparse;

pub use solve::{
    solve_system, Factorization, SolveOptions, SolveReport, SolverMethod, SparseSystem,
};
pub use sparse::CsrMatrix;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::{Field, Support};
use crate::mesh::{signed_area, BoundaryTag, Mesh};
use crate::operator::FirstOrderOperator;
use crate::parallel;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// Assembles the Galerkin matrix of `a(u, v) = (Au, Av)` on P1 elements.
/// The right-hand side starts at zero; no constraints are attached.
pub fn assemble_stiffness(op: &FirstOrderOperator, mesh: &Mesh) -> Result<SparseSystem> {
    if op.dim() != 2 {
        return Err(Error::invalid(format!(
            "assembly is two-dimensional, operator has n={}",
            op.dim()
        )));
    }
    let k = op.components();
    let l = op.rows();
    let n_dofs = mesh.n_vertices() * k;

    let vertices = mesh.vertices();
    let per_triangle = parallel::map_slice(mesh.triangles(), |tri| {
        let p = [vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]];
        let area = signed_area(vertices, tri);
        // P1 hat gradients
        let inv2a = 1.0 / (2.0 * area);
        let grads = [
            [(p[1][1] - p[2][1]) * inv2a, (p[2][0] - p[1][0]) * inv2a],
            [(p[2][1] - p[0][1]) * inv2a, (p[0][0] - p[2][0]) * inv2a],
            [(p[0][1] - p[1][1]) * inv2a, (p[1][0] - p[0][0]) * inv2a],
        ];
        // D_a = sum_j (d_j phi_a) a_j, an l x k matrix per local node
        let d: Vec<_> = (0..3)
            .map(|a| op.coefficient(0) * c(grads[a][0]) + op.coefficient(1) * c(grads[a][1]))
            .collect();
        let a0 = op.zero_order();
        let a0h_a0 = a0.adjoint() * a0;
        let mut entries = Vec::with_capacity(9 * k * k);
        for a in 0..3 {
            let dah = d[a].adjoint();
            let dah_a0 = &dah * a0;
            for b in 0..3 {
                // exact integrals: |T| for const, |T|/3 for one hat,
                // |T|/6 (diag) and |T|/12 (off-diag) for two hats
                let m_ab = if a == b { area / 6.0 } else { area / 12.0 };
                let mut block = &dah * &d[b] * c(area);
                block += &dah_a0 * c(area / 3.0);
                block += a0.adjoint() * &d[b] * c(area / 3.0);
                block += &a0h_a0 * c(m_ab);
                for r in 0..k {
                    for s in 0..k {
                        let v = block[(r, s)];
                        if v != ZERO {
                            entries.push((tri[a] * k + r, tri[b] * k + s, v));
                        }
                    }
                }
            }
        }
        let _ = l;
        entries
    });

    let mut triplets = Vec::new();
    for chunk in per_triangle {
        triplets.extend(chunk);
    }
    let matrix = CsrMatrix::from_triplets(n_dofs, triplets);
    Ok(SparseSystem::new(matrix, vec![ZERO; n_dofs]))
}

/// Boundary load vector `b_i = ∫_tag φ_i^H h0 ds` by the trapezoidal rule:
/// each tagged edge contributes half its length times the endpoint value.
pub fn assemble_boundary_load(
    mesh: &Mesh,
    tag: BoundaryTag,
    h0: &Field,
) -> Result<Vec<Complex64>> {
    h0.expect_boundary(mesh, tag)?;
    let k = h0.components();
    let nodes = mesh.boundary_nodes(tag)?;
    let index: std::collections::BTreeMap<usize, usize> =
        nodes.iter().enumerate().map(|(i, &n)| (n, i)).collect();
    let mut load = vec![ZERO; mesh.n_vertices() * k];
    for e in mesh.tagged_edges(tag) {
        let w = 0.5 * e.length;
        for node in [e.a, e.b] {
            let li = index[&node];
            for comp in 0..k {
                load[node * k + comp] += h0.value(li, comp) * c(w);
            }
        }
    }
    Ok(load)
}

/// Trapezoidal boundary inner product `(u, v)_{L²(tag)} = ∫ v^H u ds`.
pub fn boundary_l2_inner(mesh: &Mesh, tag: BoundaryTag, u: &Field, v: &Field) -> Result<Complex64> {
    u.expect_boundary(mesh, tag)?;
    v.expect_boundary(mesh, tag)?;
    if u.components() != v.components() {
        return Err(Error::invalid("component count mismatch"));
    }
    let w = mesh.boundary_weights(tag)?;
    let mut acc = ZERO;
    for (i, wi) in w.iter().enumerate() {
        for comp in 0..u.components() {
            acc += v.value(i, comp).conj() * u.value(i, comp) * c(*wi);
        }
    }
    Ok(acc)
}

pub fn boundary_l2_norm(mesh: &Mesh, tag: BoundaryTag, u: &Field) -> Result<f64> {
    Ok(boundary_l2_inner(mesh, tag, u, u)?.re.max(0.0).sqrt())
}

/// Volume L² distance between a P1 field and a pointwise function, by the
/// 3-point edge-midpoint rule (exact for quadratics).
pub fn volume_l2_error(
    mesh: &Mesh,
    u: &Field,
    exact: impl Fn(f64, f64, usize) -> Complex64 + Sync,
) -> Result<f64> {
    u.expect_volume(mesh)?;
    let k = u.components();
    let vertices = mesh.vertices();
    let tris = mesh.triangles();
    let total = parallel::sum_indexed(tris.len(), 256, |ti| {
        let tri = &tris[ti];
        let p = [vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]];
        let area = signed_area(vertices, tri);
        let mut acc = 0.0;
        for e in 0..3 {
            let (i, j) = (e, (e + 1) % 3);
            let mid = [(p[i][0] + p[j][0]) / 2.0, (p[i][1] + p[j][1]) / 2.0];
            for comp in 0..k {
                let uh = (u.value(tri[i], comp) + u.value(tri[j], comp)) * c(0.5);
                let ex = exact(mid[0], mid[1], comp);
                acc += (uh - ex).norm_sqr();
            }
        }
        acc * area / 3.0
    });
    Ok(total.sqrt())
}

/// Volume L² norm of a P1 field (same quadrature as [`volume_l2_error`]).
pub fn volume_l2_norm(mesh: &Mesh, u: &Field) -> Result<f64> {
    volume_l2_error(mesh, u, |_, _, _| ZERO)
}

/// Volume L² inner product of two P1 fields (edge-midpoint rule, exact here).
pub fn volume_l2_inner(mesh: &Mesh, u: &Field, v: &Field) -> Result<Complex64> {
    u.expect_volume(mesh)?;
    v.expect_volume(mesh)?;
    if u.components() != v.components() {
        return Err(Error::invalid("component count mismatch"));
    }
    let k = u.components();
    let vertices = mesh.vertices();
    let mut acc = ZERO;
    for tri in mesh.triangles() {
        let area = signed_area(vertices, tri);
        for e in 0..3 {
            let (i, j) = (e, (e + 1) % 3);
            for comp in 0..k {
                let uh = (u.value(tri[i], comp) + u.value(tri[j], comp)) * c(0.5);
                let vh = (v.value(tri[i], comp) + v.value(tri[j], comp)) * c(0.5);
                acc += vh.conj() * uh * c(area / 3.0);
            }
        }
    }
    Ok(acc)
}

/// Node-elimination pattern for Dirichlet conditions. Values are supplied per
/// solve so the pattern (and a factorization of the reduced matrix) can be
/// reused across right-hand sides.
pub struct Elimination {
    n_dofs: usize,
    /// Free dof ids in ascending order.
    pub free: Vec<usize>,
    /// dof -> position among free dofs.
    pub free_index: Vec<Option<usize>>,
    /// Fixed dof ids: `fixed[loop_idx * k + comp]`, in loop order.
    pub fixed: Vec<usize>,
}

impl Elimination {
    /// Pattern that fixes all `k` components at each listed node.
    pub fn fix_nodes(n_vertices: usize, k: usize, nodes: &[usize]) -> Self {
        let n_dofs = n_vertices * k;
        let mut is_fixed = vec![false; n_dofs];
        let mut fixed = Vec::with_capacity(nodes.len() * k);
        for &node in nodes {
            for comp in 0..k {
                is_fixed[node * k + comp] = true;
                fixed.push(node * k + comp);
            }
        }
        let mut free = Vec::with_capacity(n_dofs - fixed.len());
        let mut free_index = vec![None; n_dofs];
        for dof in 0..n_dofs {
            if !is_fixed[dof] {
                free_index[dof] = Some(free.len());
                free.push(dof);
            }
        }
        Self {
            n_dofs,
            free,
            free_index,
            fixed,
        }
    }

    pub fn reduced_matrix(&self, matrix: &CsrMatrix) -> CsrMatrix {
        matrix.restrict(&self.free, &self.free_index)
    }

    /// Reduced right-hand side `rhs_I − K_IB g` for the supplied fixed values
    /// (in the order of `self.fixed`).
    pub fn reduced_rhs(
        &self,
        matrix: &CsrMatrix,
        rhs: &[Complex64],
        fixed_values: &[Complex64],
    ) -> Vec<Complex64> {
        debug_assert_eq!(fixed_values.len(), self.fixed.len());
        let mut g_full = vec![ZERO; self.n_dofs];
        for (&dof, &v) in self.fixed.iter().zip(fixed_values) {
            g_full[dof] = v;
        }
        let kg = matrix.matvec(&g_full);
        self.free.iter().map(|&dof| rhs[dof] - kg[dof]).collect()
    }

    /// Embeds a reduced solution back into a full dof vector.
    pub fn embed(&self, x_reduced: &[Complex64], fixed_values: &[Complex64]) -> Vec<Complex64> {
        let mut full = vec![ZERO; self.n_dofs];
        for (&dof, &v) in self.free.iter().zip(x_reduced) {
            full[dof] = v;
        }
        for (&dof, &v) in self.fixed.iter().zip(fixed_values) {
            full[dof] = v;
        }
        full
    }

    /// Scatters values into the free-dof slots of a reduced-length vector.
    pub fn scatter_free(&self, pairs: impl Iterator<Item = (usize, Complex64)>) -> Vec<Complex64> {
        let mut out = vec![ZERO; self.free.len()];
        for (dof, v) in pairs {
            if let Some(slot) = self.free_index[dof] {
                out[slot] += v;
            }
        }
        out
    }
}

/// Wraps a raw dof vector as a volume field.
pub fn field_from_dofs(k: usize, dofs: Vec<Complex64>) -> Result<Field> {
    Field::new(Support::Volume, k, dofs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate_annulus, generate_disk};

    #[test]
    fn laplace_stiffness_has_zero_row_sums() {
        let mesh = generate_disk(1.0, 0.3).unwrap();
        let op = FirstOrderOperator::gradient(2);
        let sys = assemble_stiffness(&op, &mesh).unwrap();
        let ones = vec![c(1.0); sys.n()];
        let k1 = sys.matrix.matvec(&ones);
        let scale = sys.matrix.norm_inf();
        for v in k1 {
            assert!(v.norm() <= 1e-12 * scale, "row sum {v}");
        }
        assert!(sys.matrix.hermitian_defect() < 1e-12);
    }

    #[test]
    fn grad_with_unit_adds_mass() {
        let mesh = generate_disk(1.0, 0.3).unwrap();
        let op = FirstOrderOperator::gradient_with_unit(2);
        let sys = assemble_stiffness(&op, &mesh).unwrap();
        let ones = vec![c(1.0); sys.n()];
        let k1 = sys.matrix.matvec(&ones);
        // row sums equal the mass-matrix row sums, all positive
        for v in &k1 {
            assert!(v.re > 0.0 && v.im.abs() < 1e-14);
        }
        // total: 1^H K 1 = integral of 1 over the disk
        let total: Complex64 = k1.iter().sum();
        let area = std::f64::consts::PI;
        assert!((total.re - area).abs() / area < 0.01, "total {total}");
    }

    #[test]
    fn constant_has_zero_energy_for_gradient() {
        let mesh = generate_annulus(1.0, 2.0, 0.4).unwrap();
        let op = FirstOrderOperator::gradient(2);
        let sys = assemble_stiffness(&op, &mesh).unwrap();
        let u = vec![c(3.25); sys.n()];
        let ku = sys.matrix.matvec(&u);
        let energy = solve::dot(&u, &ku);
        assert!(energy.norm() < 1e-12 * sys.matrix.norm_inf() * 3.25 * 3.25 * sys.n() as f64);
    }

    #[test]
    fn holonomic_kernel_fields_have_zero_energy() {
        let mesh = generate_disk(1.0, 0.4).unwrap();
        let op = FirstOrderOperator::holonomic_6x3();
        let sys = assemble_stiffness(&op, &mesh).unwrap();
        // u = (c1, c2, c1 x + c2 y + c3)
        let (c1, c2, c3) = (0.7, -1.3, 0.4);
        let field = Field::from_fn_volume(&mesh, 3, |x, y, comp| match comp {
            0 => c(c1),
            1 => c(c2),
            _ => c(c1 * x + c2 * y + c3),
        });
        let ku = sys.matrix.matvec(field.values());
        let energy = solve::dot(field.values(), &ku);
        assert!(
            energy.norm() < 1e-12 * sys.matrix.norm_inf() * field.norm().powi(2),
            "energy {energy}"
        );
    }

    #[test]
    fn rejects_3d_operator() {
        let mesh = generate_disk(1.0, 0.4).unwrap();
        let op = FirstOrderOperator::gradient(3);
        assert!(assemble_stiffness(&op, &mesh).is_err());
    }

    #[test]
    fn boundary_load_partition_of_unity() {
        let mesh = generate_disk(1.0, 0.1).unwrap();
        let ones =
            Field::from_fn_boundary(&mesh, BoundaryTag::Inner, 1, |_, _, _| c(1.0)).unwrap();
        let load = assemble_boundary_load(&mesh, BoundaryTag::Inner, &ones).unwrap();
        let total: Complex64 = load.iter().sum();
        let expect = 2.0 * std::f64::consts::PI;
        assert!((total.re - expect).abs() / expect < 0.01, "total {total}");

        let zero = Field::zeros(
            Support::Boundary(BoundaryTag::Inner),
            1,
            mesh.boundary_nodes(BoundaryTag::Inner).unwrap().len(),
        );
        let load0 = assemble_boundary_load(&mesh, BoundaryTag::Inner, &zero).unwrap();
        assert!(load0.iter().all(|v| *v == ZERO));

        let cos = Field::from_fn_boundary(&mesh, BoundaryTag::Inner, 1, |x, y, _| {
            c(x / (x * x + y * y).sqrt())
        })
        .unwrap();
        let loadc = assemble_boundary_load(&mesh, BoundaryTag::Inner, &cos).unwrap();
        let total: Complex64 = loadc.iter().sum();
        assert!(total.norm() < 1e-10, "cos load sum {total}");
    }

    #[test]
    fn boundary_inner_products_on_unit_circle() {
        let mesh = generate_disk(1.0, 0.05).unwrap();
        let tag = BoundaryTag::Inner;
        let one = Field::from_fn_boundary(&mesh, tag, 1, |_, _, _| c(1.0)).unwrap();
        let cos = Field::from_fn_boundary(&mesh, tag, 1, |x, y, _| c(x / (x * x + y * y).sqrt()))
            .unwrap();
        let sin = Field::from_fn_boundary(&mesh, tag, 1, |x, y, _| c(y / (x * x + y * y).sqrt()))
            .unwrap();
        let pi = std::f64::consts::PI;
        let ii = boundary_l2_inner(&mesh, tag, &one, &one).unwrap();
        assert!((ii.re - 2.0 * pi).abs() / (2.0 * pi) < 0.01);
        let cs = boundary_l2_inner(&mesh, tag, &cos, &sin).unwrap();
        assert!(cs.norm() < 1e-10);
        let cc = boundary_l2_inner(&mesh, tag, &cos, &cos).unwrap();
        assert!((cc.re - pi).abs() / pi < 0.01);
    }

    #[test]
    fn volume_error_of_interpolant_is_small() {
        let mesh = generate_disk(1.0, 0.1).unwrap();
        let u = Field::from_fn_volume(&mesh, 1, |x, y, _| c(x + 2.0 * y));
        // linear functions are reproduced exactly by P1
        let err = volume_l2_error(&mesh, &u, |x, y, _| c(x + 2.0 * y)).unwrap();
        assert!(err < 1e-13);
    }

    #[test]
    fn spectral_nonnegativity_small_meshes() {
        let mesh = generate_disk(1.0, 0.45).unwrap();
        for op in [
            FirstOrderOperator::gradient(2),
            FirstOrderOperator::gradient_with_unit(2),
            FirstOrderOperator::cauchy_riemann(),
            FirstOrderOperator::holonomic_6x3(),
        ] {
            let sys = assemble_stiffness(&op, &mesh).unwrap();
            let dense = sys.matrix.to_dense();
            let eigs = nalgebra::SymmetricEigen::new(dense).eigenvalues;
            let min = eigs.iter().fold(f64::INFINITY, |a, &b| a.min(b));
            assert!(
                min >= -1e-10 * sys.matrix.norm_inf(),
                "min eigenvalue {min} for k={}",
                op.components()
            );
        }
    }
}
