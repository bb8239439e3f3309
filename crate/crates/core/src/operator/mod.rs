//! Algebra of first-order constant-coefficient matrix differential operators.
//!
//! An operator `A = Σ_j a_j ∂_j + a_0` with `l×k` coefficient matrices maps
//! k-vector fields to l-vector fields. The module computes principal symbols,
//! formal adjoints (with the sign convention forced by the L² pairing
//! `(Au, v) = (u, A*v)`), generalized Laplacians `A*A`, conormal boundary
//! operators `ν_A = σ*(A)(ν) A`, and sampling-based ellipticity diagnostics.
//!
//! Complex coefficients are supported throughout; real operators simply carry
//! zero imaginary parts. Symbols follow the convention without the factor `i`:
//! `σ(A)(ζ) = Σ_j a_j ζ_j`, and for a second-order operator written as
//! `L = −Σ Q_jm ∂_j∂_m + Σ b_j ∂_j + c` the principal symbol is
//! `σ(L)(ζ) = −Σ Q_jm ζ_j ζ_m`, so that `σ(A*A) = −σ*(A)σ(A)`.

mod io;
mod samples;

pub use io::{load_operator, operator_from_toml, operator_to_toml, save_operator};
pub use samples::unit_sphere_samples;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Dense complex matrix used for operator coefficients.
pub type CMatrix = DMatrix<Complex64>;

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// First-order operator `A = Σ_j a_j ∂_j + a_0` with constant `l×k` matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct FirstOrderOperator {
    n: usize,
    k: usize,
    l: usize,
    a: Vec<CMatrix>,
    a0: CMatrix,
}

impl FirstOrderOperator {
    /// Builds an operator from its coefficient matrices, validating shapes.
    pub fn new(a: Vec<CMatrix>, a0: CMatrix) -> Result<Self> {
        let n = a.len();
        if n < 2 {
            return Err(Error::invalid(format!(
                "spatial dimension must be >= 2, got {n}"
            )));
        }
        let (l, k) = (a0.nrows(), a0.ncols());
        for (j, aj) in a.iter().enumerate() {
            if aj.nrows() != l || aj.ncols() != k {
                return Err(Error::invalid(format!(
                    "coefficient a_{} has shape {}x{}, expected {}x{}",
                    j + 1,
                    aj.nrows(),
                    aj.ncols(),
                    l,
                    k
                )));
            }
        }
        let finite = a
            .iter()
            .chain(std::iter::once(&a0))
            .all(|m| m.iter().all(|z| z.re.is_finite() && z.im.is_finite()));
        if !finite {
            return Err(Error::invalid("coefficient entries must be finite"));
        }
        Ok(Self { n, k, l, a, a0 })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Number of unknown components.
    pub fn components(&self) -> usize {
        self.k
    }

    /// Number of equation rows.
    pub fn rows(&self) -> usize {
        self.l
    }

    pub fn coefficient(&self, j: usize) -> &CMatrix {
        &self.a[j]
    }

    pub fn coefficients(&self) -> &[CMatrix] {
        &self.a
    }

    pub fn zero_order(&self) -> &CMatrix {
        &self.a0
    }

    /// The gradient `∇` in `n` dimensions (k=1, l=n).
    pub fn gradient(n: usize) -> Self {
        let mut a = Vec::with_capacity(n);
        for j in 0..n {
            let mut m = CMatrix::zeros(n, 1);
            m[(j, 0)] = c(1.0);
            a.push(m);
        }
        Self::new(a, CMatrix::zeros(n, 1)).expect("gradient is well-formed")
    }

    /// The stacked operator `(∇; 1)` in `n` dimensions (k=1, l=n+1).
    pub fn gradient_with_unit(n: usize) -> Self {
        let mut a = Vec::with_capacity(n);
        for j in 0..n {
            let mut m = CMatrix::zeros(n + 1, 1);
            m[(j, 0)] = c(1.0);
            a.push(m);
        }
        let mut a0 = CMatrix::zeros(n + 1, 1);
        a0[(n, 0)] = c(1.0);
        Self::new(a, a0).expect("(grad; 1) is well-formed")
    }

    /// The Cauchy-Riemann operator `∂_x − i ∂_y` in the plane (k=l=1).
    pub fn cauchy_riemann() -> Self {
        let ax = CMatrix::from_element(1, 1, c(1.0));
        let ay = CMatrix::from_element(1, 1, Complex64::new(0.0, -1.0));
        Self::new(vec![ax, ay], CMatrix::zeros(1, 1)).expect("well-formed")
    }

    /// The overdetermined 6x3 first-order system equivalent to the second
    /// derivatives `(∂_xx; ∂_yy; ∂_xy)`; its kernel is the linear functions
    /// `u = (c1, c2, c1 x + c2 y + c3)`.
    pub fn holonomic_6x3() -> Self {
        let mut ax = CMatrix::zeros(6, 3);
        let mut ay = CMatrix::zeros(6, 3);
        let mut a0 = CMatrix::zeros(6, 3);
        ax[(0, 0)] = c(1.0);
        ay[(1, 0)] = c(1.0);
        ax[(2, 1)] = c(1.0);
        ay[(3, 1)] = c(1.0);
        a0[(4, 0)] = c(-1.0);
        ax[(4, 2)] = c(1.0);
        a0[(5, 1)] = c(-1.0);
        ay[(5, 2)] = c(1.0);
        Self::new(vec![ax, ay], a0).expect("well-formed")
    }

    /// Principal symbol `σ(A)(ζ) = Σ_j a_j ζ_j` (the zero-order term is excluded).
    pub fn principal_symbol(&self, zeta: &[f64]) -> Result<CMatrix> {
        if zeta.len() != self.n {
            return Err(Error::invalid(format!(
                "zeta has length {}, operator dimension is {}",
                zeta.len(),
                self.n
            )));
        }
        let mut sym = CMatrix::zeros(self.l, self.k);
        for (aj, &zj) in self.a.iter().zip(zeta) {
            sym += aj * c(zj);
        }
        Ok(sym)
    }

    /// Minimum over quasi-uniform unit directions of the smallest singular
    /// value of the principal symbol. Strictly positive values certify
    /// injectivity on the sampled set; 0 flags a rank drop. Operators with
    /// fewer rows than components can never be injective and report 0.
    pub fn symbol_injectivity_margin(&self, samples: usize) -> Result<f64> {
        if samples < 8 {
            return Err(Error::invalid("need at least 8 symbol samples"));
        }
        if self.l < self.k {
            return Ok(0.0);
        }
        let dirs = unit_sphere_samples(self.n, samples);
        let mins = crate::parallel::map_slice(&dirs, |zeta| {
            let sym = self.principal_symbol(zeta).expect("consistent dims");
            smallest_singular_value(&sym)
        });
        Ok(mins.into_iter().fold(f64::INFINITY, f64::min).max(0.0))
    }

    /// Formal adjoint `A* = −Σ_j a_j^H ∂_j + a_0^H`, the operator satisfying
    /// `(Au, v) = (u, A*v)` for compactly supported smooth fields.
    pub fn formal_adjoint(&self) -> Self {
        let a = self.a.iter().map(|aj| -aj.adjoint()).collect();
        Self::new(a, self.a0.adjoint()).expect("adjoint shapes are valid")
    }

    /// The generalized Laplacian `A*A` in second-order form.
    pub fn generalized_laplacian(&self) -> SecondOrderOperator {
        let n = self.n;
        let mut q = Vec::with_capacity(n);
        for j in 0..n {
            let mut row = Vec::with_capacity(n);
            for m in 0..n {
                // coefficient of −∂_j∂_m
                row.push(self.a[j].adjoint() * &self.a[m]);
            }
            q.push(row);
        }
        // A*(A u) cross terms: a0^H a_j ∂_j from the zero-order of A*, and
        // −a_j^H a_0 ∂_j from the derivative part of A* hitting a0 u.
        let b = (0..n)
            .map(|j| self.a0.adjoint() * &self.a[j] - self.a[j].adjoint() * &self.a0)
            .collect();
        let c0 = self.a0.adjoint() * &self.a0;
        SecondOrderOperator {
            n,
            k: self.k,
            q,
            b,
            c: c0,
        }
    }

    /// The conormal boundary operator `ν_A = σ*(A)(ν) A`.
    pub fn conormal(&self) -> ConormalOperator {
        ConormalOperator { base: self.clone() }
    }

    /// Multiplies every coefficient matrix (including the zero-order one) by
    /// `factor`. `generalized_laplacian` of the result scales by `factor²`.
    pub fn scale(&self, factor: f64) -> Result<Self> {
        if !(factor > 0.0) {
            return Err(Error::invalid(format!(
                "scale factor must be positive, got {factor}"
            )));
        }
        let f = c(factor);
        let a = self.a.iter().map(|aj| aj * f).collect();
        Self::new(a, &self.a0 * f)
    }

    /// Entrywise maximum distance between two operators' coefficients.
    pub fn max_coefficient_distance(&self, other: &Self) -> f64 {
        if self.n != other.n || self.k != other.k || self.l != other.l {
            return f64::INFINITY;
        }
        let mut d: f64 = 0.0;
        for (x, y) in self.a.iter().zip(&other.a) {
            d = d.max((x - y).iter().map(|z| z.norm()).fold(0.0, f64::max));
        }
        d.max(
            (&self.a0 - &other.a0)
                .iter()
                .map(|z| z.norm())
                .fold(0.0, f64::max),
        )
    }
}

/// Second-order operator `L = −Σ_jm Q_jm ∂_j∂_m + Σ_j b_j ∂_j + c`
/// with `k×k` coefficient matrices, as produced by [`FirstOrderOperator::generalized_laplacian`].
#[derive(Debug, Clone, PartialEq)]
pub struct SecondOrderOperator {
    n: usize,
    k: usize,
    q: Vec<Vec<CMatrix>>,
    b: Vec<CMatrix>,
    c: CMatrix,
}

impl SecondOrderOperator {
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn components(&self) -> usize {
        self.k
    }

    /// Coefficient of `−∂_j∂_m`.
    pub fn principal_coefficient(&self, j: usize, m: usize) -> &CMatrix {
        &self.q[j][m]
    }

    pub fn first_order_coefficient(&self, j: usize) -> &CMatrix {
        &self.b[j]
    }

    pub fn zero_order(&self) -> &CMatrix {
        &self.c
    }

    /// Principal symbol `σ(L)(ζ) = −Σ Q_jm ζ_j ζ_m`; for `L = A*A` this equals
    /// `−σ*(A)(ζ) σ(A)(ζ)`.
    pub fn principal_symbol(&self, zeta: &[f64]) -> Result<CMatrix> {
        if zeta.len() != self.n {
            return Err(Error::invalid(format!(
                "zeta has length {}, operator dimension is {}",
                zeta.len(),
                self.n
            )));
        }
        let mut sym = CMatrix::zeros(self.k, self.k);
        for j in 0..self.n {
            for m in 0..self.n {
                sym -= &self.q[j][m] * c(zeta[j] * zeta[m]);
            }
        }
        Ok(sym)
    }

    /// Sampling estimate of the largest constant `c` with
    /// `Re(−w* σ(L)(ζ) w) ≥ c |w|² |ζ|²` over unit `ζ`, computed as the
    /// minimum eigenvalue of the Hermitian part of `−σ(L)(ζ)`. Returns 0 when
    /// ellipticity fails on a sample.
    pub fn strong_ellipticity_constant(&self, samples: usize) -> Result<f64> {
        if samples < 8 {
            return Err(Error::invalid("need at least 8 symbol samples"));
        }
        let dirs = unit_sphere_samples(self.n, samples);
        let mins = crate::parallel::map_slice(&dirs, |zeta| {
            let sym = self.principal_symbol(zeta).expect("consistent dims");
            let herm = (-&sym + (-&sym).adjoint()) * c(0.5);
            herm.symmetric_eigenvalues()
                .iter()
                .fold(f64::INFINITY, |acc, &ev| acc.min(ev))
        });
        Ok(mins.into_iter().fold(f64::INFINITY, f64::min).max(0.0))
    }
}

/// Conormal boundary operator `ν_A u = σ*(A)(ν) A u`, represented through its
/// base operator and evaluated per unit normal.
#[derive(Debug, Clone, PartialEq)]
pub struct ConormalOperator {
    base: FirstOrderOperator,
}

/// The `k×k` matrices of `ν_A` at a fixed unit normal:
/// `ν_A = Σ_j M_j(ν) ∂_j + M_0(ν)` with `M_j = σ*(A)(ν) a_j`, `M_0 = σ*(A)(ν) a_0`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConormalAtNormal {
    pub derivative: Vec<CMatrix>,
    pub zero_order: CMatrix,
}

impl ConormalOperator {
    pub fn base(&self) -> &FirstOrderOperator {
        &self.base
    }

    pub fn at_normal(&self, nu: &[f64]) -> Result<ConormalAtNormal> {
        let sigma = self.base.principal_symbol(nu)?;
        let sigma_star = sigma.adjoint();
        let derivative = self
            .base
            .coefficients()
            .iter()
            .map(|aj| &sigma_star * aj)
            .collect();
        let zero_order = &sigma_star * self.base.zero_order();
        Ok(ConormalAtNormal {
            derivative,
            zero_order,
        })
    }

    /// Smallest over sampled unit normals of the smallest eigenvalue of
    /// `σ*(A)(ν) σ(A)(ν)`; equals `k` full rank when positive.
    pub fn rank_margin(&self, samples: usize) -> Result<f64> {
        let m = self.base.symbol_injectivity_margin(samples)?;
        Ok(m * m)
    }
}

pub(crate) fn smallest_singular_value(m: &CMatrix) -> f64 {
    m.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .fold(f64::INFINITY, |acc, &s| acc.min(s))
        .max(0.0)
}
