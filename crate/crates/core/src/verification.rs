//! Analytic benchmark fixtures and refinement studies used to verify the
//! discretization: a mixed-problem harmonic fixture, a Neumann fixture for
//! the operator with a zero-order term, and a constant fixture that should
//! sit at the solver floor.

use num_complex::Complex64;

use crate::boundary::{solve_mixed, solve_neumann, NeumannOptions};
use crate::error::{Error, Result};
use crate::fem::{volume_l2_error, SolveOptions};
use crate::field::{Field, Support};
use crate::mesh::{generate_annulus, generate_disk, BoundaryTag};
use crate::operator::FirstOrderOperator;

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fixture {
    /// Mixed problem on the annulus (1,2) for the gradient operator against
    /// the harmonic `u = (r + 4/r) cos θ` (Dirichlet `5 cos θ` inside, zero
    /// conormal data outside).
    ZarembaM1,
    /// Neumann problem on the unit disk for `(∇; 1)` against `u = cosh x`.
    NeumannCosh,
    /// Mixed problem with constant data; errors sit at the solver floor.
    Constant,
}

impl Fixture {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "zaremba-m1" => Ok(Fixture::ZarembaM1),
            "neumann-cosh" => Ok(Fixture::NeumannCosh),
            "constant" => Ok(Fixture::Constant),
            other => Err(Error::invalid(format!(
                "unknown fixture '{other}' (expected zaremba-m1, neumann-cosh or constant)"
            ))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Fixture::ZarembaM1 => "zaremba-m1",
            Fixture::NeumannCosh => "neumann-cosh",
            Fixture::Constant => "constant",
        }
    }
}

#[derive(Debug, Clone)]
pub struct LevelResult {
    pub level: usize,
    pub h: f64,
    pub l2_error: f64,
    /// Observed order against the previous level.
    pub order: Option<f64>,
}

/// Solves the fixture at one mesh size and returns the volume L² error
/// against the closed form.
pub fn fixture_error(fixture: Fixture, h: f64, tol: f64) -> Result<f64> {
    let opts = SolveOptions::with_tol(tol);
    match fixture {
        Fixture::ZarembaM1 => {
            let mesh = generate_annulus(1.0, 2.0, h)?;
            let op = FirstOrderOperator::gradient(2);
            let g = Field::from_fn_boundary(&mesh, BoundaryTag::Inner, 1, |x, y, _| {
                c(5.0 * x / (x * x + y * y).sqrt())
            })?;
            let q = Field::zeros(
                Support::Boundary(BoundaryTag::Outer),
                1,
                mesh.boundary_nodes(BoundaryTag::Outer)?.len(),
            );
            let u = solve_mixed(
                &op,
                &mesh,
                (BoundaryTag::Inner, &g),
                (BoundaryTag::Outer, &q),
                &opts,
            )?;
            volume_l2_error(&mesh, &u, |x, y, _| {
                let r = (x * x + y * y).sqrt();
                c((r + 4.0 / r) * (x / r))
            })
        }
        Fixture::NeumannCosh => {
            let mesh = generate_disk(1.0, h)?;
            let op = FirstOrderOperator::gradient_with_unit(2);
            let data = Field::from_fn_boundary(&mesh, BoundaryTag::Inner, 1, |x, y, _| {
                let r = (x * x + y * y).sqrt();
                c(x.sinh() * (x / r))
            })?;
            let nopts = NeumannOptions {
                solve: opts,
                ..NeumannOptions::default()
            };
            let sol = solve_neumann(&op, &mesh, &data, &nopts)?;
            volume_l2_error(&mesh, &sol.h, |x, _, _| c(x.cosh()))
        }
        Fixture::Constant => {
            let mesh = generate_annulus(1.0, 2.0, h)?;
            let op = FirstOrderOperator::gradient(2);
            let g = Field::from_fn_boundary(&mesh, BoundaryTag::Inner, 1, |_, _, _| c(2.0))?;
            let q = Field::zeros(
                Support::Boundary(BoundaryTag::Outer),
                1,
                mesh.boundary_nodes(BoundaryTag::Outer)?.len(),
            );
            let u = solve_mixed(
                &op,
                &mesh,
                (BoundaryTag::Inner, &g),
                (BoundaryTag::Outer, &q),
                &opts,
            )?;
            volume_l2_error(&mesh, &u, |_, _, _| c(2.0))
        }
    }
}

/// Runs the fixture at `levels` uniform refinements starting from `h0`,
/// halving the target edge length each time.
pub fn convergence_study(
    fixture: Fixture,
    h0: f64,
    levels: usize,
    tol: f64,
) -> Result<Vec<LevelResult>> {
    if levels < 2 {
        return Err(Error::invalid("a convergence study needs at least 2 levels"));
    }
    let mut out: Vec<LevelResult> = Vec::with_capacity(levels);
    let mut h = h0;
    for level in 0..levels {
        let err = fixture_error(fixture, h, tol)?;
        let order = out
            .last()
            .filter(|prev| prev.l2_error > 0.0 && err > 0.0)
            .map(|prev| (prev.l2_error / err).log2());
        out.push(LevelResult {
            level,
            h,
            l2_error: err,
            order,
        });
        h /= 2.0;
    }
    Ok(out)
}

/// Least-squares slope of `log2(error)` against `log2(1/h)`; the aggregate
/// observed order over all levels.
pub fn observed_order(results: &[LevelResult]) -> f64 {
    let pts: Vec<(f64, f64)> = results
        .iter()
        .filter(|r| r.l2_error > 0.0)
        .map(|r| ((1.0 / r.h).log2(), r.l2_error.log2()))
        .collect();
    let n = pts.len() as f64;
    if pts.len() < 2 {
        return 0.0;
    }
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    -(n * sxy - sx * sy) / (n * sxx - sx * sx)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_fixture_sits_at_the_floor() {
        let err = fixture_error(Fixture::Constant, 0.25, 1e-11).unwrap();
        assert!(err < 1e-9, "constant fixture error {err}");
    }

    #[test]
    fn parse_names_round_trip() {
        for f in [Fixture::ZarembaM1, Fixture::NeumannCosh, Fixture::Constant] {
            assert_eq!(Fixture::parse(f.name()).unwrap(), f);
        }
        assert!(Fixture::parse("nope").is_err());
    }
}
