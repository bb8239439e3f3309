use epicard_core::cauchy::{
    select_alpha_discrepancy, solve_alternating, solve_tikhonov, AlternatingOptions,
    CauchySolution, SweepTable, TikhonovOptions,
};
use epicard_core::field::{add_boundary_noise, save_field_csv, save_field_vtk};
use epicard_core::pipeline::CauchyStrategy;

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
    let mesh = &config.mesh_omega;
    let op_b = config.op_b().map_err(CliError::from)?;

    let mut summary = Summary::new();
    summary.put("seed", config.seed);
    summary.put("noise_level", config.noise_level);
    summary.put("solver_tol", config.solver_tol);

    let f = if config.noise_level > 0.0 {
        let (noisy, injected) =
            add_boundary_noise(mesh, &config.f, config.noise_level, config.seed)
                .map_err(|e| fail(&args.out_dir, "noise", CliError::from_core(&e), Summary::new()))?;
        summary.put("injected_noise", injected);
        noisy
    } else {
        config.f.clone()
    };

    let t0 = std::time::Instant::now();
    let tik_opts = TikhonovOptions {
        solver_tol: config.solver_tol,
        ..TikhonovOptions::default()
    };
    let result: Result<(CauchySolution, Option<SweepTable>), epicard_core::Error> =
        match &config.strategy {
            CauchyStrategy::Tikhonov { alpha } =>
                solve_tikhonov(&op_b, mesh, &f, *alpha, &tik_opts).map(|s| (s, None)),
            CauchyStrategy::Morozov { delta, tau } => {
                let delta = if *delta > 0.0 {
                    *delta
                } else {
                    // fall back to the injected noise norm
                    match add_boundary_noise(mesh, &config.f, config.noise_level, config.seed) {
                        Ok((_, injected)) if injected > 0.0 => injected,
                        _ => {
                            return Err(fail(
                                &args.out_dir,
                                "morozov",
                                CliError::input("morozov needs delta > 0 or a nonzero noise_level"),
                                summary,
                            ))
                        }
                    }
                };
                select_alpha_discrepancy(&op_b, mesh, &f, delta, *tau, &tik_opts)
                    .map(|(_, s, table)| (s, Some(table)))
            }
            CauchyStrategy::Alternating { max_iter, stop_tol } => {
                let opts = AlternatingOptions {
                    max_iter: *max_iter,
                    stop_tol: *stop_tol,
                    solver_tol: config.solver_tol,
                };
                solve_alternating(&op_b, mesh, &f, &opts).map(|s| (s, None))
            }
        };
    let (sol, sweep) = match result {
        Ok(x) => x,
        Err(e) => {
            if let epicard_core::Error::NoAdmissibleAlpha { sweep, .. } = &e {
                let _ = write_csv(
                    &args.out_dir.join("alpha_sweep.csv"),
                    "alpha,discrepancy",
                    sweep.iter().map(|(a, d)| vec![*a, *d]),
                );
            }
            return Err(fail(&args.out_dir, "cauchy-solve", CliError::from_core(&e), summary));
        }
    };
    summary.put("time_cauchy_s", t0.elapsed().as_secs_f64());

    save_field_csv(mesh, &sol.u_b, args.out_dir.join("u_b.csv"))?;
    save_field_vtk(mesh, &sol.u_b, "body potential", args.out_dir.join("u_b.vtk"))?;
    save_field_csv(mesh, &sol.trace_inner, args.out_dir.join("trace_inner.csv"))?;
    save_field_csv(mesh, &sol.flux_inner, args.out_dir.join("flux_inner.csv"))?;
    write_csv(
        &args.out_dir.join("residual_history.csv"),
        "iteration,value",
        sol.history
            .iter()
            .enumerate()
            .map(|(i, v)| vec![i as f64, *v]),
    )?;
    if let Some(table) = sweep {
        write_csv(
            &args.out_dir.join("alpha_sweep.csv"),
            "alpha,discrepancy",
            table.iter().map(|(a, d)| vec![*a, *d]),
        )?;
    }

    summary.put("status", "ok");
    summary.put("method", sol.method.name());
    summary.put("alpha", sol.alpha);
    summary.put("discrepancy", sol.discrepancy);
    summary.put("iterations", sol.iterations);
    summary.write(&args.out_dir)?;
    println!(
        "cauchy: method {}, alpha {:.3e}, discrepancy {:.3e}, {} iterations",
        sol.method.name(),
        sol.alpha,
        sol.discrepancy,
        sol.iterations
    );
    Ok(())
}
