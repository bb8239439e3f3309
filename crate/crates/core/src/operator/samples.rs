//! Quasi-uniform direction sampling on the unit sphere.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Deterministic quasi-uniform unit vectors in `n` dimensions.
///
/// n=2 uses equally spaced angles, n=3 a Fibonacci lattice, higher dimensions
/// normalized Gaussian samples from a fixed seed.
pub fn unit_sphere_samples(n: usize, count: usize) -> Vec<Vec<f64>> {
    assert!(n >= 2, "sphere sampling needs n >= 2");
    match n {
        2 => (0..count)
            .map(|i| {
                let theta = 2.0 * std::f64::consts::PI * (i as f64) / (count as f64);
                vec![theta.cos(), theta.sin()]
            })
            .collect(),
        3 => {
            let golden = (1.0 + 5.0_f64.sqrt()) / 2.0;
            (0..count)
                .map(|i| {
                    let t = (i as f64 + 0.5) / count as f64;
                    let z = 1.0 - 2.0 * t;
                    let r = (1.0 - z * z).sqrt();
                    let phi = 2.0 * std::f64::consts::PI * (i as f64) / golden;
                    vec![r * phi.cos(), r * phi.sin(), z]
                })
                .collect()
        }
        _ => {
            let mut rng = ChaCha8Rng::seed_from_u64(0x5157_u64);
            (0..count)
                .map(|_| {
                    loop {
                        let v: Vec<f64> = (0..n)
                            .map(|_| {
                                // Box-Muller from uniform draws
                                let u1: f64 = rng.gen_range(1e-12..1.0);
                                let u2: f64 = rng.gen::<f64>();
                                (-2.0 * u1.ln()).sqrt()
                                    * (2.0 * std::f64::consts::PI * u2).cos()
                            })
                            .collect();
                        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                        if norm > 1e-8 {
                            return v.into_iter().map(|x| x / norm).collect();
                        }
                    }
                })
                .collect()
        }
    }
}
