use epicard_core::verification::{convergence_study, observed_order, Fixture};

use crate::output::{fail, write_csv, Summary};
use crate::{CliError, CliResult, ConvergenceArgs};

pub fn run(args: &ConvergenceArgs) -> CliResult {
    std::fs::create_dir_all(&args.out_dir)?;
    if args.levels < 3 {
        return Err(fail(
            &args.out_dir,
            "validate",
            CliError::input("a convergence study needs at least 3 levels"),
            Summary::new(),
        ));
    }
    let fixture = Fixture::parse(&args.fixture)
        .map_err(|e| fail(&args.out_dir, "validate", CliError::from_core(&e), Summary::new()))?;

    let results = convergence_study(fixture, args.h0, args.levels, args.tol)
        .map_err(|e| fail(&args.out_dir, "study", CliError::from_core(&e), Summary::new()))?;

    println!("fixture {}:", fixture.name());
    println!("level,h,l2_error,order");
    for r in &results {
        match r.order {
            Some(o) => println!("{},{},{},{}", r.level, r.h, r.l2_error, o),
            None => println!("{},{},{},", r.level, r.h, r.l2_error),
        }
    }
    let slope = observed_order(&results);
    println!("observed order (least squares): {slope}");

    write_csv(
        &args.out_dir.join("convergence.csv"),
        "level,h,l2_error,order",
        results
            .iter()
            .map(|r| vec![r.level as f64, r.h, r.l2_error, r.order.unwrap_or(f64::NAN)]),
    )?;
    let mut summary = Summary::new();
    summary.put("status", "ok");
    summary.put("fixture", fixture.name());
    summary.put("levels", args.levels);
    summary.put("h0", args.h0);
    summary.put("observed_order", slope);
    summary.write(&args.out_dir)?;
    Ok(())
}
