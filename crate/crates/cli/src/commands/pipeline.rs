use epicard_core::fem::boundary_l2_norm;
use epicard_core::field::{save_field_csv, save_field_vtk};
use epicard_core::mesh::BoundaryTag;

use crate::config::load_run_config;
use crate::output::{fail, write_csv, Summary};
use crate::{CliError, CliResult, RunArgs};

pub fn run(args: &RunArgs) -> CliResult {
    std::fs::create_dir_all(&args.out_dir)?;
    let file = load_run_config(&args.config)
        .map_err(|e| fail(&args.out_dir, "load-config", e, Summary::new()))?;
    let loaded = file
        .build(&args.config, args.alpha, args.seed, args.noise_level)
        .map_err(|e| fail(&args.out_dir, "build-config", e, Summary::new()))?;
    let config = loaded.config;

    let report = epicard_core::pipeline::run(&config)
        .map_err(|e| fail(&args.out_dir, "pipeline", CliError::from_core(&e), Summary::new()))?;

    let omega = &config.mesh_omega;
    let heart = &config.mesh_heart;
    let mut summary = Summary::new();
    summary.put("seed", config.seed);
    summary.put("lambda", config.lambda);
    summary.put("lambda_tilde", config.lambda_tilde);
    summary.put("ctol", config.ctol);
    summary.put("eps_ker", config.eps_ker);
    summary.put("noise_level", config.noise_level);
    summary.put("injected_noise", report.injected_noise);
    summary.put("boundary_interpolated", report.boundary_interpolated);
    for (stage, secs) in &report.timings {
        summary.put(&format!("time_{stage}_s"), secs);
    }

    if let Some(cauchy) = &report.cauchy {
        save_field_csv(omega, &cauchy.u_b, args.out_dir.join("u_b.csv"))?;
        save_field_vtk(omega, &cauchy.u_b, "body potential", args.out_dir.join("u_b.vtk"))?;
        save_field_csv(omega, &cauchy.trace_inner, args.out_dir.join("trace_inner.csv"))?;
        save_field_csv(omega, &cauchy.flux_inner, args.out_dir.join("flux_inner.csv"))?;
        write_csv(
            &args.out_dir.join("cauchy_history.csv"),
            "iteration,value",
            cauchy
                .history
                .iter()
                .enumerate()
                .map(|(i, v)| vec![i as f64, *v]),
        )?;
        summary.put("cauchy_method", cauchy.method.name());
        summary.put("cauchy_alpha", cauchy.alpha);
        summary.put("cauchy_discrepancy", cauchy.discrepancy);
        summary.put("cauchy_iterations", cauchy.iterations);
    }
    summary.put_opt("kernel_dim", &report.kernel_dim);
    summary.put_opt("compatibility_defect", &report.compatibility_defect);
    if let Some(h0) = &report.h0 {
        save_field_csv(heart, h0, args.out_dir.join("h0.csv"))?;
    }
    if let Some(neumann) = &report.neumann {
        save_field_csv(heart, &neumann.h, args.out_dir.join("h.csv"))?;
        save_field_vtk(heart, &neumann.h, "auxiliary potential", args.out_dir.join("h.vtk"))?;
        summary.put("neumann_residual", neumann.report.residual);
        summary.put("neumann_iterations", neumann.report.iterations);
        summary.put("neumann_method", neumann.report.method);
    }
    if let Some(h_trace) = &report.h_trace {
        save_field_csv(heart, h_trace, args.out_dir.join("h_trace.csv"))?;
    }
    if let Some(ub) = &report.u_b_trace {
        save_field_csv(heart, ub, args.out_dir.join("u_b_trace.csv"))?;
    }
    if let Some(v) = &report.v {
        save_field_csv(heart, v, args.out_dir.join("v.csv"))?;
        save_field_vtk(heart, v, "transmembrane potential", args.out_dir.join("v.vtk"))?;
        summary.put(
            "v_norm_boundary_l2",
            boundary_l2_norm(heart, BoundaryTag::Inner, v)?,
        );
    }

    match &report.failure {
        None => {
            summary.put("status", "ok");
            summary.write(&args.out_dir)?;
            println!(
                "pipeline: kernel dim {:?}, defect {:?}, v written to {}",
                report.kernel_dim,
                report.compatibility_defect,
                args.out_dir.join("v.csv").display()
            );
            Ok(())
        }
        Some(failure) => {
            summary.put("status", "error");
            summary.put("failure_stage", failure.stage);
            summary.put("failure_message", &failure.message);
            let code = if failure.solver_failure { 2 } else { 1 };
            summary.put("exit_code", code);
            summary.write(&args.out_dir)?;
            Err(CliError {
                code,
                message: format!("pipeline failed at stage {}: {}", failure.stage, failure.message),
            })
        }
    }
}
