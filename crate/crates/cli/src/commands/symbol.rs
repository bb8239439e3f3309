use epicard_core::operator::{load_operator, operator_to_toml, FirstOrderOperator};

use crate::config::builtin_operator;
use crate::output::Summary;
use crate::{CliError, CliResult, SymbolArgs};

pub fn run(args: &SymbolArgs) -> CliResult {
    let op: FirstOrderOperator = match (&args.operator, &args.builtin) {
        (Some(path), None) => load_operator(path)?,
        (None, Some(name)) => builtin_operator(name)?,
        _ => {
            return Err(CliError::input(
                "pass exactly one of --operator <file> or --builtin <name>",
            ))
        }
    };

    let margin = op.symbol_injectivity_margin(args.samples)?;
    let adjoint = op.formal_adjoint();
    let laplacian = op.generalized_laplacian();
    let ellipticity = laplacian.strong_ellipticity_constant(args.samples)?;
    let conormal_rank_margin = op.conormal().rank_margin(args.samples)?;

    println!(
        "operator: n = {}, k = {}, l = {}",
        op.dim(),
        op.components(),
        op.rows()
    );
    println!(
        "symbol injectivity margin ({} samples): {:.6}",
        args.samples, margin
    );
    println!("strong ellipticity constant of A*A: {ellipticity:.6}");
    println!("conormal rank margin: {conormal_rank_margin:.6}");
    println!("formal adjoint coefficients:\n{}", operator_to_toml(&adjoint));

    if let Some(dir) = &args.out_dir {
        let mut summary = Summary::new();
        summary.put("status", "ok");
        summary.put("n", op.dim());
        summary.put("k", op.components());
        summary.put("l", op.rows());
        summary.put("samples", args.samples);
        summary.put("injectivity_margin", margin);
        summary.put("ellipticity_constant", ellipticity);
        summary.put("conormal_rank_margin", conormal_rank_margin);
        summary.write(dir)?;
        std::fs::write(dir.join("adjoint.toml"), operator_to_toml(&adjoint))?;
    }

    if margin <= 1e-10 {
        return Err(CliError {
            code: 2,
            message: format!("symbol is not injective: margin {margin:.3e}"),
        });
    }
    Ok(())
}
