//! Linear solvers for the Hermitian positive (semi)definite systems produced
//! by the assembly: a dense Cholesky for small systems, a banded Cholesky for
//! the structured meshes the generators emit, and a Jacobi-preconditioned
//! conjugate gradient fallback. Singular Neumann systems are handled through
//! Euclidean constraint projection (rhs and iterates kept orthogonal to the
//! supplied near-null vectors).

use nalgebra::{Cholesky, DVector, Dyn};
use num_complex::Complex64;

use super::sparse::CsrMatrix;
use crate::error::{Error, Result};
use crate::parallel;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Systems at most this large go to the dense path under `Auto`.
pub const DENSE_LIMIT: usize = 700;
/// Banded factorization is used when `n * bandwidth^2` stays below this.
pub const BAND_COST_LIMIT: f64 = 6.0e9;
/// Minimum bandwidth before the trailing update of a band column is worth
/// dispatching to the thread pool.
const PAR_BAND_MIN: usize = 2048;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SolverMethod {
    /// Pick by size: dense when small, banded when cheap, PCG otherwise.
    #[default]
    Auto,
    Direct,
    Pcg,
}

#[derive(Debug, Clone)]
pub struct SolveOptions {
    pub method: SolverMethod,
    /// Relative residual target.
    pub tol: f64,
    pub max_iter: Option<usize>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            method: SolverMethod::Auto,
            tol: 1e-10,
            max_iter: None,
        }
    }
}

impl SolveOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self {
            tol,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub method: &'static str,
    pub iterations: usize,
    pub residual: f64,
    pub history: Vec<f64>,
}

/// Linear system carrier: Hermitian matrix, right-hand side, and optional
/// orthogonality constraints spanning the matrix kernel.
#[derive(Debug, Clone)]
pub struct SparseSystem {
    pub matrix: CsrMatrix,
    pub rhs: Vec<Complex64>,
    /// Euclidean-orthonormal vectors the solution must stay orthogonal to.
    pub constraints: Vec<Vec<Complex64>>,
}

impl SparseSystem {
    pub fn new(matrix: CsrMatrix, rhs: Vec<Complex64>) -> Self {
        Self {
            matrix,
            rhs,
            constraints: Vec::new(),
        }
    }

    pub fn n(&self) -> usize {
        self.matrix.n()
    }

    /// Adds a constraint vector; it is orthonormalized against existing ones.
    pub fn push_constraint(&mut self, mut z: Vec<Complex64>) -> Result<()> {
        if z.len() != self.n() {
            return Err(Error::invalid("constraint length mismatch"));
        }
        for existing in &self.constraints {
            let proj = dot(existing, &z);
            axpy(&mut z, existing, -proj);
        }
        let nz = norm(&z);
        if nz < 1e-14 {
            return Err(Error::invalid(
                "constraint vector is linearly dependent on existing constraints",
            ));
        }
        scale_in_place(&mut z, Complex64::new(1.0 / nz, 0.0));
        self.constraints.push(z);
        Ok(())
    }
}

pub fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn norm(a: &[Complex64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

pub fn axpy(y: &mut [Complex64], x: &[Complex64], alpha: Complex64) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

fn scale_in_place(v: &mut [Complex64], s: Complex64) {
    for x in v.iter_mut() {
        *x *= s;
    }
}

fn project_out(v: &mut [Complex64], constraints: &[Vec<Complex64>]) {
    for z in constraints {
        let p = dot(z, v);
        axpy(v, z, -p);
    }
}

// ---------------------------------------------------------------------------
// banded Cholesky

/// In-place banded `L L^H` factorization, lower band stored row-major:
/// entry `(i, j)` with `i - bw <= j <= i` lives at `data[i*(bw+1) + j - i + bw]`.
pub struct BandCholesky {
    n: usize,
    bw: usize,
    data: Vec<Complex64>,
}

impl BandCholesky {
    pub fn new(matrix: &CsrMatrix) -> Result<Self> {
        let n = matrix.n();
        let bw = matrix.bandwidth();
        let stride = bw + 1;
        let mut data = vec![ZERO; n * stride];
        for i in 0..n {
            let (cols, vals) = matrix.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                if j <= i {
                    data[i * stride + (j + bw - i)] = v;
                }
            }
        }
        // right-looking factorization; rows of the trailing update are
        // disjoint storage chunks, so they run in parallel deterministically
        let mut column = vec![ZERO; bw];
        for j in 0..n {
            let djj = data[j * stride + bw];
            let pivot = djj.re;
            if !(pivot > 0.0) || djj.im.abs() > 1e-10 * pivot.abs().max(1.0) {
                return Err(Error::Factorization(format!(
                    "band Cholesky pivot {pivot:.3e} at row {j}"
                )));
            }
            let ljj = pivot.sqrt();
            data[j * stride + bw] = Complex64::new(ljj, 0.0);
            let hi = (j + bw).min(n - 1);
            for i in j + 1..=hi {
                let idx = i * stride + (j + bw - i);
                data[idx] /= ljj;
                column[i - j - 1] = data[idx];
            }
            // A[i][m] -= L[i][j] conj(L[m][j]) for j < m <= i <= j + bw
            let col = &column;
            let update = |off: usize, row: &mut [Complex64]| {
                let i = j + 1 + off;
                let lij = col[off];
                for m in j + 1..=i {
                    row[m + bw - i] -= lij * col[m - j - 1].conj();
                }
            };
            let trailing = &mut data[(j + 1) * stride..(hi + 1) * stride];
            // per-column dispatch only pays off once a column carries real work
            if bw >= PAR_BAND_MIN {
                parallel::chunks_mut_indexed(trailing, stride, update);
            } else {
                for (off, row) in trailing.chunks_mut(stride).enumerate() {
                    update(off, row);
                }
            }
        }
        Ok(Self { n, bw, data })
    }

    #[allow(clippy::needless_range_loop)]
    pub fn solve(&self, b: &[Complex64]) -> Vec<Complex64> {
        let (n, bw, stride) = (self.n, self.bw, self.bw + 1);
        let mut x = b.to_vec();
        // forward: L y = b
        for i in 0..n {
            let lo = i.saturating_sub(bw);
            let mut acc = x[i];
            for j in lo..i {
                acc -= self.data[i * stride + (j + bw - i)] * x[j];
            }
            x[i] = acc / self.data[i * stride + bw].re;
        }
        // backward: L^H x = y
        for i in (0..n).rev() {
            let hi = (i + bw).min(n - 1);
            let mut acc = x[i];
            for j in i + 1..=hi {
                acc -= self.data[j * stride + (i + bw - j)].conj() * x[j];
            }
            x[i] = acc / self.data[i * stride + bw].re;
        }
        x
    }
}

// ---------------------------------------------------------------------------
// reusable factorization

/// A factorization of a Hermitian positive definite matrix that can be reused
/// across many right-hand sides (the Cauchy solvers lean on this).
pub enum Factorization {
    Dense(Cholesky<Complex64, Dyn>),
    Band(BandCholesky),
}

impl Factorization {
    pub fn new(matrix: &CsrMatrix) -> Result<Self> {
        let n = matrix.n();
        if n <= DENSE_LIMIT {
            let chol = Cholesky::new(matrix.to_dense())
                .ok_or_else(|| Error::Factorization("dense Cholesky failed (matrix not positive definite)".into()))?;
            return Ok(Factorization::Dense(chol));
        }
        let bw = matrix.bandwidth();
        let cost = n as f64 * (bw as f64) * (bw as f64);
        if cost <= BAND_COST_LIMIT {
            return Ok(Factorization::Band(BandCholesky::new(matrix)?));
        }
        Err(Error::Factorization(format!(
            "no cheap direct factorization: n={n}, bandwidth={bw}"
        )))
    }

    pub fn solve(&self, rhs: &[Complex64]) -> Vec<Complex64> {
        match self {
            Factorization::Dense(chol) => {
                let b = DVector::from_column_slice(rhs);
                chol.solve(&b).as_slice().to_vec()
            }
            Factorization::Band(band) => band.solve(rhs),
        }
    }
}

// ---------------------------------------------------------------------------
// conjugate gradient

fn pcg(
    matrix: &CsrMatrix,
    rhs: &[Complex64],
    constraints: &[Vec<Complex64>],
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<Complex64>, SolveReport)> {
    let n = matrix.n();
    let diag = matrix.diagonal();
    let precond: Vec<f64> = diag
        .iter()
        .map(|d| if d.re.abs() > 1e-300 { 1.0 / d.re } else { 1.0 })
        .collect();

    let mut b = rhs.to_vec();
    project_out(&mut b, constraints);
    let b_norm = norm(&b);
    if b_norm == 0.0 {
        return Ok((
            vec![ZERO; n],
            SolveReport {
                method: "pcg",
                iterations: 0,
                residual: 0.0,
                history: vec![],
            },
        ));
    }

    let mut x = vec![ZERO; n];
    let mut r = b.clone();
    let mut z: Vec<Complex64> = r.iter().zip(&precond).map(|(ri, p)| ri * *p).collect();
    project_out(&mut z, constraints);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut history = Vec::new();
    let mut best_rel = f64::INFINITY;
    let mut last_improvement = 0usize;

    for iter in 0..max_iter {
        let ap = matrix.matvec(&p);
        let pap = dot(&p, &ap);
        if pap.re <= 0.0 {
            return Err(Error::NonConvergence {
                iterations: iter,
                achieved: norm(&r) / b_norm,
                required: tol,
                history,
            });
        }
        let alpha = rz / pap;
        axpy(&mut x, &p, alpha);
        axpy(&mut r, &ap, -alpha);
        if iter % 50 == 49 {
            // refresh the residual to control drift
            let ax = matrix.matvec(&x);
            r = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
            project_out(&mut r, constraints);
        }
        let rel = norm(&r) / b_norm;
        history.push(rel);
        if rel < best_rel * 0.999 {
            best_rel = rel;
            last_improvement = iter;
        }
        if rel <= tol {
            project_out(&mut x, constraints);
            return Ok((
                x,
                SolveReport {
                    method: "pcg",
                    iterations: iter + 1,
                    residual: rel,
                    history,
                },
            ));
        }
        // stagnation: no relative progress for a long stretch
        if iter > last_improvement + 250 {
            return Err(Error::NonConvergence {
                iterations: iter + 1,
                achieved: rel,
                required: tol,
                history,
            });
        }
        let mut znew: Vec<Complex64> = r.iter().zip(&precond).map(|(ri, pc)| ri * *pc).collect();
        project_out(&mut znew, constraints);
        let rznew = dot(&r, &znew);
        let beta = rznew / rz;
        for (pi, zi) in p.iter_mut().zip(&znew) {
            *pi = zi + beta * *pi;
        }
        rz = rznew;
        z = znew;
        let _ = &z;
    }
    Err(Error::NonConvergence {
        iterations: max_iter,
        achieved: best_rel,
        required: tol,
        history,
    })
}

// ---------------------------------------------------------------------------
// the front door

/// Solves the system to the requested relative residual.
///
/// Positive definite systems take a direct factorization when affordable and
/// PCG otherwise. Systems with constraints (singular Neumann problems) get a
/// projected solve: the rhs is projected onto the range, a slightly shifted
/// factorization plus iterative refinement (or projected PCG) produces a
/// particular solution, and the result is re-projected.
pub fn solve_system(system: &SparseSystem, opts: &SolveOptions) -> Result<(Vec<Complex64>, SolveReport)> {
    let n = system.n();
    if system.rhs.len() != n {
        return Err(Error::invalid("rhs length does not match matrix size"));
    }
    if !(opts.tol > 0.0) {
        return Err(Error::invalid("solver tolerance must be positive"));
    }
    let max_iter = opts.max_iter.unwrap_or_else(|| (20 * n).max(2000));

    if system.constraints.is_empty() {
        match opts.method {
            SolverMethod::Pcg => pcg(&system.matrix, &system.rhs, &[], opts.tol, max_iter),
            SolverMethod::Direct | SolverMethod::Auto => match Factorization::new(&system.matrix) {
                Ok(f) => {
                    let x = f.solve(&system.rhs);
                    let r = residual(&system.matrix, &x, &system.rhs);
                    let b_norm = norm(&system.rhs).max(f64::MIN_POSITIVE);
                    let mut rel = r / b_norm;
                    let method = match f {
                        Factorization::Dense(_) => "dense-cholesky",
                        Factorization::Band(_) => "band-cholesky",
                    };
                    let mut x = x;
                    if rel > opts.tol {
                        // one round of iterative refinement mops up roundoff
                        let ax = system.matrix.matvec(&x);
                        let res: Vec<Complex64> =
                            system.rhs.iter().zip(&ax).map(|(b, a)| b - a).collect();
                        let dx = f.solve(&res);
                        axpy(&mut x, &dx, Complex64::new(1.0, 0.0));
                        rel = residual(&system.matrix, &x, &system.rhs) / b_norm;
                    }
                    if rel > opts.tol && opts.method == SolverMethod::Auto {
                        return pcg(&system.matrix, &system.rhs, &[], opts.tol, max_iter);
                    }
                    if rel > opts.tol {
                        return Err(Error::NonConvergence {
                            iterations: 1,
                            achieved: rel,
                            required: opts.tol,
                            history: vec![rel],
                        });
                    }
                    Ok((
                        x,
                        SolveReport {
                            method,
                            iterations: 1,
                            residual: rel,
                            history: vec![rel],
                        },
                    ))
                }
                Err(e) => {
                    if opts.method == SolverMethod::Direct {
                        Err(e)
                    } else {
                        pcg(&system.matrix, &system.rhs, &[], opts.tol, max_iter)
                    }
                }
            },
        }
    } else {
        solve_constrained(system, opts, max_iter)
    }
}

fn solve_constrained(
    system: &SparseSystem,
    opts: &SolveOptions,
    max_iter: usize,
) -> Result<(Vec<Complex64>, SolveReport)> {
    let matrix = &system.matrix;
    let constraints = &system.constraints;
    let mut b = system.rhs.clone();
    project_out(&mut b, constraints);
    let b_norm = norm(&b).max(f64::MIN_POSITIVE);

    let use_direct = opts.method != SolverMethod::Pcg;
    if use_direct {
        let shift = 1e-8 * matrix.norm_inf().max(1e-300);
        if let Ok(f) = Factorization::new(&matrix.shifted(shift)) {
            let mut x = vec![ZERO; matrix.n()];
            let mut rel = f64::INFINITY;
            let mut history = Vec::new();
            for _round in 0..30 {
                let ax = matrix.matvec(&x);
                let mut res: Vec<Complex64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
                project_out(&mut res, constraints);
                rel = norm(&res) / b_norm;
                history.push(rel);
                if rel <= opts.tol {
                    break;
                }
                let mut dx = f.solve(&res);
                project_out(&mut dx, constraints);
                axpy(&mut x, &dx, Complex64::new(1.0, 0.0));
            }
            if rel <= opts.tol {
                project_out(&mut x, constraints);
                return Ok((
                    x,
                    SolveReport {
                        method: "shifted-direct",
                        iterations: history.len(),
                        residual: rel,
                        history,
                    },
                ));
            }
            if opts.method == SolverMethod::Direct {
                return Err(Error::NonConvergence {
                    iterations: history.len(),
                    achieved: rel,
                    required: opts.tol,
                    history,
                });
            }
        } else if opts.method == SolverMethod::Direct {
            return Err(Error::Factorization(
                "no direct factorization available for constrained system".into(),
            ));
        }
    }
    pcg(matrix, &system.rhs, constraints, opts.tol, max_iter)
}

pub fn residual(matrix: &CsrMatrix, x: &[Complex64], b: &[Complex64]) -> f64 {
    let ax = matrix.matvec(x);
    ax.iter()
        .zip(b)
        .map(|(a, bb)| (a - bb).norm_sqr())
        .sum::<f64>()
        .sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn identity_returns_rhs() {
        let sys = SparseSystem::new(CsrMatrix::identity(5), vec![c(2.0); 5]);
        let (x, _) = solve_system(&sys, &SolveOptions::default()).unwrap();
        for xi in x {
            assert!((xi - c(2.0)).norm() < 1e-12);
        }
    }

    fn random_spd(n: usize, bw: usize, seed: u64) -> CsrMatrix {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut triplets = Vec::new();
        for i in 0..n {
            for j in i.saturating_sub(bw)..i {
                let v = Complex64::new(rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5));
                triplets.push((i, j, v));
                triplets.push((j, i, v.conj()));
            }
            triplets.push((i, i, c(2.0 * bw as f64 + 1.0)));
        }
        CsrMatrix::from_triplets(n, triplets)
    }

    #[test]
    fn band_cholesky_matches_dense() {
        let m = random_spd(60, 4, 3);
        let band = BandCholesky::new(&m).unwrap();
        let b: Vec<Complex64> = (0..60).map(|i| Complex64::new(i as f64, -1.0)).collect();
        let x = band.solve(&b);
        assert!(residual(&m, &x, &b) / norm(&b) < 1e-12);
    }

    #[test]
    fn pcg_solves_spd() {
        let m = random_spd(300, 3, 11);
        let b = vec![c(1.0); 300];
        let (x, rep) = pcg(&m, &b, &[], 1e-11, 5000).unwrap();
        assert!(residual(&m, &x, &b) / norm(&b) < 1e-10, "rep {rep:?}");
    }

    #[test]
    fn singular_system_with_constraint_converges() {
        // 1D Laplacian with Neumann ends: kernel = constants
        let n = 40;
        let mut triplets = Vec::new();
        for i in 0..n {
            let mut d = 0.0;
            if i > 0 {
                triplets.push((i, i - 1, c(-1.0)));
                d += 1.0;
            }
            if i + 1 < n {
                triplets.push((i, i + 1, c(-1.0)));
                d += 1.0;
            }
            triplets.push((i, i, c(d)));
        }
        let m = CsrMatrix::from_triplets(n, triplets);
        // compatible rhs: orthogonal to constants
        let mut rhs: Vec<Complex64> = (0..n)
            .map(|i| c((2.0 * std::f64::consts::PI * i as f64 / n as f64).cos()))
            .collect();
        let mean: Complex64 = rhs.iter().sum::<Complex64>() / c(n as f64);
        for r in rhs.iter_mut() {
            *r -= mean;
        }
        let mut sys = SparseSystem::new(m.clone(), rhs.clone());
        sys.push_constraint(vec![c(1.0); n]).unwrap();
        let (x, rep) = solve_system(&sys, &SolveOptions::with_tol(1e-10)).unwrap();
        assert!(rep.residual <= 1e-10);
        // solution orthogonal to the constant
        let s: Complex64 = x.iter().sum();
        assert!(s.norm() < 1e-8 * norm(&x).max(1.0));
        assert!(residual(&m, &x, &rhs) / norm(&rhs) < 1e-9);
    }

    #[test]
    fn incompatible_rhs_without_constraints_fails() {
        // 3-node Neumann Laplacian, rhs with a mean: inconsistent
        let triplets = vec![
            (0, 0, c(1.0)),
            (0, 1, c(-1.0)),
            (1, 0, c(-1.0)),
            (1, 1, c(2.0)),
            (1, 2, c(-1.0)),
            (2, 1, c(-1.0)),
            (2, 2, c(1.0)),
        ];
        let m = CsrMatrix::from_triplets(3, triplets);
        let sys = SparseSystem::new(m, vec![c(1.0), c(1.0), c(1.0)]);
        let err = solve_system(
            &sys,
            &SolveOptions {
                method: SolverMethod::Pcg,
                tol: 1e-10,
                max_iter: Some(500),
            },
        )
        .unwrap_err();
        match err {
            Error::NonConvergence { history, .. } => assert!(!history.is_empty()),
            other => panic!("expected NonConvergence, got {other}"),
        }
    }
}
