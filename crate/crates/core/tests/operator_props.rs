//! Property tests for the operator algebra. The formal adjoint is checked
//! against the defining L² pairing with an independent quadrature oracle:
//! random compactly supported smooth fields on a box, Gauss-Legendre tensor
//! quadrature, and analytically differentiated test functions.

use epicard_core::operator::{unit_sphere_samples, CMatrix, FirstOrderOperator};
use num_complex::Complex64;
use proptest::prelude::*;

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// Gauss-Legendre nodes/weights on [-1, 1] by Newton iteration.
fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            // evaluate P_n and P_n' by the recurrence
            let (mut p0, mut p1) = (1.0f64, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (mut p0, mut p1) = (1.0f64, x);
        for k in 2..=n {
            let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
            p0 = p1;
            p1 = p2;
        }
        let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
        nodes[i] = x;
        weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

/// Bump function on (-w, w) with all derivatives vanishing at the edges.
fn bump(t: f64, w: f64) -> f64 {
    let s = t / w;
    if s.abs() >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - s * s)).exp()
    }
}

fn bump_prime(t: f64, w: f64) -> f64 {
    let s = t / w;
    if s.abs() >= 1.0 {
        0.0
    } else {
        let d = 1.0 - s * s;
        bump(t, w) * (-2.0 * s / (d * d)) / w
    }
}

/// Smooth compactly supported test component: quadratic polynomial times a
/// bump in each coordinate, with analytic first derivatives.
#[derive(Clone, Debug)]
struct SmoothComponent {
    coeffs: [f64; 6],
}

impl SmoothComponent {
    fn poly(&self, x: f64, y: f64) -> f64 {
        let [a, b, cc, d, e, f] = self.coeffs;
        a + b * x + cc * y + d * x * y + e * x * x + f * y * y
    }

    fn poly_dx(&self, x: f64, y: f64) -> f64 {
        let [_, b, _, d, e, _] = self.coeffs;
        b + d * y + 2.0 * e * x
    }

    fn poly_dy(&self, x: f64, y: f64) -> f64 {
        let [_, _, cc, d, _, f] = self.coeffs;
        cc + d * x + 2.0 * f * y
    }

    fn value(&self, x: f64, y: f64) -> f64 {
        self.poly(x, y) * bump(x, 0.9) * bump(y, 0.9)
    }

    fn dx(&self, x: f64, y: f64) -> f64 {
        self.poly_dx(x, y) * bump(x, 0.9) * bump(y, 0.9)
            + self.poly(x, y) * bump_prime(x, 0.9) * bump(y, 0.9)
    }

    fn dy(&self, x: f64, y: f64) -> f64 {
        self.poly_dy(x, y) * bump(x, 0.9) * bump(y, 0.9)
            + self.poly(x, y) * bump(x, 0.9) * bump_prime(y, 0.9)
    }
}

fn component_strategy() -> impl Strategy<Value = SmoothComponent> {
    prop::array::uniform6(-1.0f64..1.0).prop_map(|coeffs| SmoothComponent { coeffs })
}

fn matrix_strategy(l: usize, k: usize) -> impl Strategy<Value = CMatrix> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), l * k).prop_map(move |entries| {
        CMatrix::from_iterator(l, k, entries.into_iter().map(|(re, im)| Complex64::new(re, im)))
    })
}

fn operator_strategy() -> impl Strategy<Value = FirstOrderOperator> {
    (1usize..=2, 0usize..=2).prop_flat_map(|(k, extra)| {
        let l = k + extra;
        (
            matrix_strategy(l, k),
            matrix_strategy(l, k),
            matrix_strategy(l, k),
        )
            .prop_map(|(ax, ay, a0)| FirstOrderOperator::new(vec![ax, ay], a0).unwrap())
    })
}

struct PairingOracle {
    forward: Complex64,
    adjoint: Complex64,
    /// `‖Au‖ ‖v‖ + ‖u‖ ‖A*v‖`, the Cauchy-Schwarz scale of the two pairings.
    scale: f64,
}

/// `(Au, v)` and `(u, A*v)` over the box by tensor Gauss-Legendre quadrature,
/// with `Au` and `A*v` evaluated analytically from the smooth components.
#[allow(clippy::needless_range_loop)]
fn pairing_oracle(
    op: &FirstOrderOperator,
    u: &[SmoothComponent],
    v: &[SmoothComponent],
    nodes: &[f64],
    weights: &[f64],
) -> PairingOracle {
    let adj = op.formal_adjoint();
    let (k, l) = (op.components(), op.rows());
    let mut forward = Complex64::new(0.0, 0.0);
    let mut adjoint = Complex64::new(0.0, 0.0);
    let (mut au2, mut v2, mut u2, mut av2) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for (xi, wx) in nodes.iter().zip(weights) {
        for (yi, wy) in nodes.iter().zip(weights) {
            let w = wx * wy;
            let uv: Vec<f64> = u.iter().map(|s| s.value(*xi, *yi)).collect();
            let ux: Vec<f64> = u.iter().map(|s| s.dx(*xi, *yi)).collect();
            let uy: Vec<f64> = u.iter().map(|s| s.dy(*xi, *yi)).collect();
            let vv: Vec<f64> = v.iter().map(|s| s.value(*xi, *yi)).collect();
            let vx: Vec<f64> = v.iter().map(|s| s.dx(*xi, *yi)).collect();
            let vy: Vec<f64> = v.iter().map(|s| s.dy(*xi, *yi)).collect();
            for r in 0..l {
                let mut au = Complex64::new(0.0, 0.0);
                for s in 0..k {
                    au += op.coefficient(0)[(r, s)] * c(ux[s])
                        + op.coefficient(1)[(r, s)] * c(uy[s])
                        + op.zero_order()[(r, s)] * c(uv[s]);
                }
                forward += c(vv[r]).conj() * au * c(w);
                au2 += au.norm_sqr() * w;
                v2 += vv[r] * vv[r] * w;
            }
            for s in 0..k {
                let mut astar = Complex64::new(0.0, 0.0);
                for r in 0..l {
                    astar += adj.coefficient(0)[(s, r)] * c(vx[r])
                        + adj.coefficient(1)[(s, r)] * c(vy[r])
                        + adj.zero_order()[(s, r)] * c(vv[r]);
                }
                adjoint += astar.conj() * c(uv[s]) * c(w);
                av2 += astar.norm_sqr() * w;
                u2 += uv[s] * uv[s] * w;
            }
        }
    }
    PairingOracle {
        forward,
        adjoint,
        scale: au2.sqrt() * v2.sqrt() + u2.sqrt() * av2.sqrt(),
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 12, ..ProptestConfig::default() })]

    #[test]
    fn adjoint_satisfies_the_pairing_identity(
        op in operator_strategy(),
        comps in prop::collection::vec(component_strategy(), 8),
    ) {
        let (nodes, weights) = gauss_legendre(96);
        let k = op.components();
        let l = op.rows();
        prop_assume!(comps.len() >= k + l);
        let u = &comps[..k];
        let v = &comps[k..k + l];
        let oracle = pairing_oracle(&op, u, v, &nodes, &weights);
        let rel = (oracle.forward - oracle.adjoint).norm() / oracle.scale.max(1e-12);
        prop_assert!(
            rel <= 1e-8,
            "pairing defect {rel}: {} vs {}",
            oracle.forward,
            oracle.adjoint
        );
    }

    #[test]
    fn symbol_factorization_for_random_operators(op in operator_strategy()) {
        let lap = op.generalized_laplacian();
        for zeta in unit_sphere_samples(2, 12) {
            let s = op.principal_symbol(&zeta).unwrap();
            let expect = -(s.adjoint() * &s);
            let got = lap.principal_symbol(&zeta).unwrap();
            let diff = (&got - &expect).iter().map(|z| z.norm()).fold(0.0, f64::max);
            prop_assert!(diff <= 1e-12, "symbol factorization defect {diff}");
        }
    }

    #[test]
    fn scaling_is_exact(op in operator_strategy(), factor in 0.1f64..5.0) {
        let scaled = op.scale(factor).unwrap();
        for j in 0..2 {
            let diff = (scaled.coefficient(j) - op.coefficient(j) * c(factor))
                .iter().map(|z| z.norm()).fold(0.0, f64::max);
            prop_assert!(diff == 0.0);
        }
        // conormal representation scales by factor^2 exactly up to roundoff
        let nu = [0.6, -0.8];
        let base = op.conormal().at_normal(&nu).unwrap();
        let big = scaled.conormal().at_normal(&nu).unwrap();
        for j in 0..2 {
            let diff = (&big.derivative[j] - &base.derivative[j] * c(factor * factor))
                .iter().map(|z| z.norm()).fold(0.0, f64::max);
            prop_assert!(diff <= 1e-12 * factor * factor);
        }
    }

    #[test]
    fn quadratic_symbol_form_is_nonnegative(op in operator_strategy()) {
        // w^H (sigma* sigma) w = |sigma w|^2 >= 0 for the generalized Laplacian
        let lap = op.generalized_laplacian();
        for zeta in unit_sphere_samples(2, 8) {
            let sym = lap.principal_symbol(&zeta).unwrap();
            let herm = (-&sym + (-&sym).adjoint()) * c(0.5);
            let min_ev = herm.symmetric_eigenvalues().iter().fold(f64::INFINITY, |a, &b| a.min(b));
            prop_assert!(min_ev >= -1e-12, "negative symbol eigenvalue {min_ev}");
        }
    }
}
