use super::*;
use crate::fem::boundary_l2_norm;
use crate::field::Support;
use crate::mesh::generate_disk;

fn cos_theta(x: f64, y: f64) -> f64 {
    x / (x * x + y * y).sqrt()
}

fn scalar_config(h: f64, strategy: CauchyStrategy) -> PipelineConfig {
    let (omega, heart) = generate_matched_meshes(1.0, 2.0, h).unwrap();
    let f = Field::from_fn_boundary(&omega, BoundaryTag::Outer, 1, |x, y, _| {
        c(4.0 * cos_theta(x, y))
    })
    .unwrap();
    PipelineConfig::new(
        FirstOrderOperator::gradient(2),
        1.0,
        1.0,
        omega,
        heart,
        f,
        strategy,
    )
    .unwrap()
}

#[test]
fn transmembrane_arithmetic() {
    let mesh = generate_disk(1.0, 0.4).unwrap();
    let n = mesh.boundary_nodes(BoundaryTag::Inner).unwrap().len();
    let mk = |v: f64| {
        Field::new(
            Support::Boundary(BoundaryTag::Inner),
            1,
            vec![c(v); n],
        )
        .unwrap()
    };
    // zero in, zero out
    let v0 = transmembrane_potential(&mk(0.0), &mk(0.0), 3.0).unwrap();
    assert!(v0.values().iter().all(|z| z.norm() == 0.0));
    // lambda = 1: (3 - 1)/1 - 1 = 1
    let v1 = transmembrane_potential(&mk(3.0), &mk(1.0), 1.0).unwrap();
    assert!(v1.values().iter().all(|z| (z - c(1.0)).norm() < 1e-15));
    // lambda = 2: (5 - 1)/4 - 1 = 0
    let v2 = transmembrane_potential(&mk(5.0), &mk(1.0), 2.0).unwrap();
    assert!(v2.values().iter().all(|z| z.norm() < 1e-15));
    // invalid lambda and support mismatch
    assert!(transmembrane_potential(&mk(1.0), &mk(1.0), 0.0).is_err());
    let short = Field::new(Support::Boundary(BoundaryTag::Inner), 1, vec![c(1.0); n - 1]).unwrap();
    assert!(transmembrane_potential(&mk(1.0), &short, 1.0).is_err());
}

#[test]
fn zero_data_yields_zero_everything() {
    let mut config = scalar_config(0.2, CauchyStrategy::Tikhonov { alpha: 1e-8 });
    let n = config
        .mesh_omega
        .boundary_nodes(BoundaryTag::Outer)
        .unwrap()
        .len();
    config.f = Field::zeros(Support::Boundary(BoundaryTag::Outer), 1, n);
    let report = run(&config).unwrap();
    assert!(report.is_success(), "failure: {:?}", report.failure);
    let cauchy = report.cauchy.as_ref().unwrap();
    assert!(cauchy.u_b.norm() <= 1e-6, "u_b norm {}", cauchy.u_b.norm());
    let h = &report.neumann.as_ref().unwrap().h;
    assert!(h.norm() <= 1e-6, "h norm {}", h.norm());
    let v = report.v.as_ref().unwrap();
    assert!(v.norm() <= 1e-6, "v norm {}", v.norm());
}

#[test]
fn scalar_fixture_matches_exact_flux_oracle() {
    let config = scalar_config(0.1, CauchyStrategy::Tikhonov { alpha: 1e-8 });
    let report = run(&config).unwrap();
    assert!(report.is_success(), "failure: {:?}", report.failure);
    assert_eq!(report.kernel_dim, Some(1));

    // oracle: Steps 2-3 with the exact Cauchy data
    let flux_exact = Field::from_fn_boundary(&config.mesh_omega, BoundaryTag::Inner, 1, |x, y, _| {
        c(3.0 * cos_theta(x, y))
    })
    .unwrap();
    let trace_exact = Field::from_fn_boundary(&config.mesh_omega, BoundaryTag::Inner, 1, |x, y, _| {
        c(5.0 * cos_theta(x, y))
    })
    .unwrap();
    let (_, v_oracle) = run_steps_2_3(&config, &flux_exact, &trace_exact).unwrap();

    let v = report.v.as_ref().unwrap();
    let mut diff = v.clone();
    diff.add_scaled(&v_oracle, c(-1.0)).unwrap();
    let rel = boundary_l2_norm(&config.mesh_heart, BoundaryTag::Inner, &diff).unwrap()
        / boundary_l2_norm(&config.mesh_heart, BoundaryTag::Inner, &v_oracle).unwrap();
    assert!(rel <= 0.10, "pipeline vs oracle relative error {rel}");

    // the oracle itself: h = -3 r cos(theta), u_b = 5 cos(theta),
    // v = (h - u_b) - u_b = -13 cos(theta) on the circle
    let v_closed = Field::from_fn_boundary(&config.mesh_heart, BoundaryTag::Inner, 1, |x, y, _| {
        c(-13.0 * cos_theta(x, y))
    })
    .unwrap();
    let mut odiff = v_oracle.clone();
    odiff.add_scaled(&v_closed, c(-1.0)).unwrap();
    let orel = boundary_l2_norm(&config.mesh_heart, BoundaryTag::Inner, &odiff).unwrap()
        / boundary_l2_norm(&config.mesh_heart, BoundaryTag::Inner, &v_closed).unwrap();
    assert!(orel <= 0.05, "oracle vs closed form error {orel}");
}

#[test]
fn grad_with_unit_variant_reports_empty_kernel() {
    let (omega, heart) = generate_matched_meshes(1.0, 2.0, 0.2).unwrap();
    // manufactured data: any trace works, the operator pins the solution
    let f = Field::from_fn_boundary(&omega, BoundaryTag::Outer, 1, |x, _, _| c(x.cosh() * 0.1))
        .unwrap();
    let config = PipelineConfig::new(
        FirstOrderOperator::gradient_with_unit(2),
        1.0,
        1.0,
        omega,
        heart,
        f,
        CauchyStrategy::Tikhonov { alpha: 1e-6 },
    )
    .unwrap();
    let report = run(&config).unwrap();
    assert!(report.is_success(), "failure: {:?}", report.failure);
    assert_eq!(report.kernel_dim, Some(0));
    assert_eq!(report.compatibility_defect, Some(0.0));
}

#[test]
fn automatic_compatibility_for_gradient_and_holonomic() {
    // gradient fixture
    let config = scalar_config(0.15, CauchyStrategy::Tikhonov { alpha: 1e-8 });
    let report = run(&config).unwrap();
    assert!(report.is_success(), "failure: {:?}", report.failure);
    let cauchy = report.cauchy.as_ref().unwrap();
    let f_norm = boundary_l2_norm(&config.mesh_omega, BoundaryTag::Outer, &config.f).unwrap();
    let bound = 1e-6f64.max(10.0 * cauchy.discrepancy / f_norm);
    let defect = report.compatibility_defect.unwrap();
    assert!(defect <= bound, "defect {defect} > bound {bound}");

    // holonomic fixture: exact solution u = (c1, c2, c1 x + c2 y + c3)
    let (omega, heart) = generate_matched_meshes(1.0, 2.0, 0.15).unwrap();
    let (c1, c2, c3) = (0.8, -0.5, 0.3);
    let f = Field::from_fn_boundary(&omega, BoundaryTag::Outer, 3, |x, y, comp| match comp {
        0 => c(c1),
        1 => c(c2),
        _ => c(c1 * x + c2 * y + c3),
    })
    .unwrap();
    let config = PipelineConfig::new(
        FirstOrderOperator::holonomic_6x3(),
        1.0,
        1.0,
        omega,
        heart,
        f,
        CauchyStrategy::Tikhonov { alpha: 1e-8 },
    )
    .unwrap();
    let report = run(&config).unwrap();
    assert!(report.is_success(), "failure: {:?}", report.failure);
    assert_eq!(report.kernel_dim, Some(3));
    let cauchy = report.cauchy.as_ref().unwrap();
    let f_norm = boundary_l2_norm(&config.mesh_omega, BoundaryTag::Outer, &config.f).unwrap();
    let bound = 1e-6f64.max(10.0 * cauchy.discrepancy / f_norm);
    let defect = report.compatibility_defect.unwrap();
    assert!(defect <= bound, "holonomic defect {defect} > bound {bound}");
}

#[test]
fn scaling_covariance_leaves_v_unchanged() {
    // (A_e, lambda_tilde) -> (mu A_e, mu lambda_tilde) with A_b fixed
    let baseline = scalar_config(0.2, CauchyStrategy::Tikhonov { alpha: 1e-8 });
    let report0 = run(&baseline).unwrap();
    assert!(report0.is_success());

    let mu = 3.0;
    let mut scaled = scalar_config(0.2, CauchyStrategy::Tikhonov { alpha: 1e-8 });
    scaled.op_e = baseline.op_e.scale(mu).unwrap();
    scaled.lambda_tilde = baseline.lambda_tilde * mu;
    let report1 = run(&scaled).unwrap();
    assert!(report1.is_success(), "failure: {:?}", report1.failure);

    let v0 = report0.v.as_ref().unwrap();
    let v1 = report1.v.as_ref().unwrap();
    let mut diff = v0.clone();
    diff.add_scaled(v1, c(-1.0)).unwrap();
    let rel = diff.norm() / v0.norm();
    assert!(rel <= 1e-8, "v changed by {rel} under mu-scaling");

    // h0 scales by exactly mu^2
    let h0_0 = report0.h0.as_ref().unwrap();
    let h0_1 = report1.h0.as_ref().unwrap();
    let mut hdiff = h0_1.clone();
    hdiff.add_scaled(&h0_0.scaled(c(mu * mu)), c(-1.0)).unwrap();
    assert!(hdiff.norm() <= 1e-8 * h0_1.norm(), "h0 scaling defect");
}

#[test]
fn kernel_shift_moves_v_by_phi_over_lambda_squared() {
    let config = scalar_config(0.2, CauchyStrategy::Tikhonov { alpha: 1e-8 });
    let report = run(&config).unwrap();
    assert!(report.is_success());
    let h_trace = report.h_trace.as_ref().unwrap();
    let ub = report.u_b_trace.as_ref().unwrap();
    let lambda = 2.0;
    let v_base = transmembrane_potential(h_trace, ub, lambda).unwrap();

    // phi = constant 1 lies in the kernel of the gradient operator
    let phi = Field::new(
        Support::Boundary(BoundaryTag::Inner),
        1,
        vec![c(1.0); h_trace.n_nodes()],
    )
    .unwrap();
    let mut shifted = h_trace.clone();
    shifted.add_scaled(&phi, c(1.0)).unwrap();
    let v_shifted = transmembrane_potential(&shifted, ub, lambda).unwrap();

    let mut delta = v_shifted.clone();
    delta.add_scaled(&v_base, c(-1.0)).unwrap();
    for z in delta.values() {
        assert!(
            (z - c(1.0 / (lambda * lambda))).norm() < 1e-13,
            "shift mismatch {z}"
        );
    }
}

#[test]
fn kernel_coincidence_fixtures() {
    let (omega, heart) = generate_matched_meshes(1.0, 2.0, 0.2).unwrap();
    let lt = 1.6;

    let grad = FirstOrderOperator::gradient(2);
    let r = check_kernel_coincidence(&grad, &heart, &grad.scale(1.0 / lt).unwrap(), &omega, 1e-8)
        .unwrap();
    assert!(r.matched, "{}", r.detail);
    assert_eq!((r.dim_heart, r.dim_omega), (1, 1));

    let gu = FirstOrderOperator::gradient_with_unit(2);
    let r = check_kernel_coincidence(&gu, &heart, &gu.scale(1.0 / lt).unwrap(), &omega, 1e-8)
        .unwrap();
    assert!(r.matched, "{}", r.detail);
    assert_eq!((r.dim_heart, r.dim_omega), (0, 0));

    let hol = FirstOrderOperator::holonomic_6x3();
    let r = check_kernel_coincidence(&hol, &heart, &hol.scale(1.0 / lt).unwrap(), &omega, 1e-8)
        .unwrap();
    assert!(r.matched, "{}", r.detail);
    assert_eq!((r.dim_heart, r.dim_omega), (3, 3));
}

#[test]
fn incompatible_data_aborts_step_2_with_defect_recorded() {
    // hand the pipeline a config whose Cauchy step produces a flux with a
    // nonzero mean by injecting gross noise and a huge ctol-violating setup:
    // force it by using alternating with 1 iteration on constant-mean data.
    let mut config = scalar_config(0.2, CauchyStrategy::Tikhonov { alpha: 1e-8 });
    config.ctol = 1e-18; // unattainably strict
    let report = run(&config).unwrap();
    assert!(!report.is_success());
    let failure = report.failure.as_ref().unwrap();
    assert_eq!(failure.stage, "neumann");
    assert!(failure.solver_failure);
    // defect recorded even though the step failed
    assert!(report.compatibility_defect.is_some());
    assert!(report.v.is_none());
    assert!(report.cauchy.is_some());
}

#[test]
fn deterministic_reports_with_noise() {
    let mut config = scalar_config(0.2, CauchyStrategy::Tikhonov { alpha: 1e-6 });
    config.noise_level = 0.01;
    config.seed = 7;
    let r1 = run(&config).unwrap();
    let r2 = run(&config).unwrap();
    assert!(r1.is_success() && r2.is_success());
    assert_eq!(
        r1.v.as_ref().unwrap().values(),
        r2.v.as_ref().unwrap().values()
    );
    assert_eq!(
        r1.cauchy.as_ref().unwrap().flux_inner.values(),
        r2.cauchy.as_ref().unwrap().flux_inner.values()
    );
    assert_eq!(r1.injected_noise, r2.injected_noise);
}
