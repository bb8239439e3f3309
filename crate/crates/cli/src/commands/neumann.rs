use epicard_core::boundary::{solve_neumann, KernelNorm, NeumannOptions};
use epicard_core::fem::SolveOptions;
use epicard_core::field::{load_field_csv, save_field_csv, save_field_vtk, Support};
use epicard_core::mesh::{load_mesh, BoundaryTag};
use epicard_core::operator::load_operator;

use crate::output::{fail, Summary};
use crate::{CliError, CliResult, NeumannArgs};

pub fn run(args: &NeumannArgs) -> CliResult {
    std::fs::create_dir_all(&args.out_dir)?;
    let mut summary = Summary::new();
    summary.put("ctol", args.ctol);
    summary.put("eps_ker", args.eps_ker);
    summary.put("tol", args.tol);

    let op = load_operator(&args.operator)
        .map_err(|e| fail(&args.out_dir, "load-operator", CliError::from_core(&e), Summary::new()))?;
    let mesh = load_mesh(&args.mesh)
        .map_err(|e| fail(&args.out_dir, "load-mesh", CliError::from_core(&e), Summary::new()))?;
    let h0 = load_field_csv(&mesh, Support::Boundary(BoundaryTag::Inner), &args.data)
        .map_err(|e| fail(&args.out_dir, "load-data", CliError::from_core(&e), Summary::new()))?;

    let opts = NeumannOptions {
        ctol: args.ctol,
        eps_ker: args.eps_ker,
        solve: SolveOptions::with_tol(args.tol),
    };
    let start = std::time::Instant::now();
    let sol = match solve_neumann(&op, &mesh, &h0, &opts) {
        Ok(s) => s,
        Err(e) => {
            if let epicard_core::Error::Incompatible { defect, ctol } = &e {
                summary.put("compatibility_defect", defect);
                summary.put("ctol", ctol);
            }
            return Err(fail(&args.out_dir, "neumann-solve", CliError::from_core(&e), summary));
        }
    };
    summary.put("time_solve_s", start.elapsed().as_secs_f64());

    save_field_csv(&mesh, &sol.h, args.out_dir.join("h.csv"))?;
    save_field_vtk(&mesh, &sol.h, "neumann solution", args.out_dir.join("h.vtk"))?;

    summary.put("status", "ok");
    summary.put("kernel_dim", sol.kernel_dim);
    summary.put("compatibility_defect", sol.defect);
    summary.put("solver_method", sol.report.method);
    summary.put("solver_iterations", sol.report.iterations);
    summary.put("solver_residual", sol.report.residual);
    summary.put(
        "normalization",
        match sol.normalization {
            KernelNorm::BoundaryL2(_) => "boundary-l2",
            KernelNorm::VolumeL2 => "volume-l2-fallback",
        },
    );
    summary.write(&args.out_dir)?;
    println!(
        "neumann: kernel dim {}, defect {:.3e}, residual {:.3e}",
        sol.kernel_dim, sol.defect, sol.report.residual
    );
    Ok(())
}
