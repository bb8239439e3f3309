use epicard_core::mesh::{generate_annulus, generate_disk, save_mesh};

use crate::output::{fail, write_csv, Summary};
use crate::{CliError, CliResult, MeshArgs};

pub fn run(args: &MeshArgs) -> CliResult {
    std::fs::create_dir_all(&args.out_dir)?;
    let mesh = match args.kind.as_str() {
        "annulus" => generate_annulus(args.r_in, args.r_out, args.h),
        "disk" => generate_disk(args.r, args.h),
        other => Err(epicard_core::Error::invalid(format!(
            "unknown mesh kind '{other}' (expected annulus or disk)"
        ))),
    }
    .map_err(|e| fail(&args.out_dir, "generate", CliError::from_core(&e), Summary::new()))?;

    let q = mesh.quality();
    save_mesh(&mesh, args.out_dir.join("mesh.txt"))
        .map_err(|e| fail(&args.out_dir, "save", CliError::from_core(&e), Summary::new()))?;
    write_csv(
        &args.out_dir.join("mesh_quality.csv"),
        "vertices,triangles,boundary_edges,euler_characteristic,min_angle_deg,max_edge,min_edge,min_area,total_area",
        [vec![
            q.vertices as f64,
            q.triangles as f64,
            q.boundary_edges as f64,
            q.euler_characteristic as f64,
            q.min_angle_deg,
            q.max_edge,
            q.min_edge,
            q.min_area,
            q.total_area,
        ]],
    )?;

    let mut summary = Summary::new();
    summary.put("status", "ok");
    summary.put("kind", &args.kind);
    summary.put("h_target", args.h);
    summary.put("vertices", q.vertices);
    summary.put("triangles", q.triangles);
    summary.put("boundary_edges", q.boundary_edges);
    summary.put("euler_characteristic", q.euler_characteristic);
    summary.put("min_angle_deg", q.min_angle_deg);
    summary.put("max_edge", q.max_edge);
    summary.write(&args.out_dir)?;
    println!(
        "mesh: {} vertices, {} triangles, min angle {:.1} deg, max edge {:.4}",
        q.vertices, q.triangles, q.min_angle_deg, q.max_edge
    );
    Ok(())
}
