//! Structured generators for annulus and disk meshes.
//!
//! Angular resolution is rounded up to a power of two so that halving the
//! target edge length exactly doubles every boundary loop; radial counts come
//! straight from the target so the `0.2 / 0.1 / 0.05` refinement family nests
//! cleanly.

use super::{BoundaryTag, Mesh};
use crate::error::{Error, Result};

fn angular_count(radius: f64, h: f64) -> usize {
    let needed = (2.0 * std::f64::consts::PI * radius / h).ceil() as usize;
    needed.max(8).next_power_of_two()
}

fn ring_points(radius: f64, count: usize) -> Vec<[f64; 2]> {
    (0..count)
        .map(|j| {
            let theta = 2.0 * std::f64::consts::PI * (j as f64) / (count as f64);
            [radius * theta.cos(), radius * theta.sin()]
        })
        .collect()
}

/// Triangulates the strip between two concentric rings of node ids.
/// `inner` and `outer` are in counterclockwise order; counts may differ.
/// A single-node `inner` ring produces a fan (used at the disk center).
fn stitch_rings(
    vertices: &[[f64; 2]],
    inner: &[usize],
    outer: &[usize],
    triangles: &mut Vec<[usize; 3]>,
) {
    let (na, nb) = (inner.len(), outer.len());
    if na == 1 {
        for j in 0..nb {
            triangles.push([inner[0], outer[j], outer[(j + 1) % nb]]);
        }
        return;
    }
    if na == nb {
        // uniform strip: split each quad along the parity-alternating diagonal
        for j in 0..na {
            let (a0, a1) = (inner[j], inner[(j + 1) % na]);
            let (b0, b1) = (outer[j], outer[(j + 1) % na]);
            if j % 2 == 0 {
                triangles.push([a0, b0, b1]);
                triangles.push([a0, b1, a1]);
            } else {
                triangles.push([a0, b0, a1]);
                triangles.push([a1, b0, b1]);
            }
        }
        return;
    }
    // two-pointer advance choosing the shorter diagonal
    let dist = |p: usize, q: usize| {
        let (a, b) = (vertices[p], vertices[q]);
        ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
    };
    let (mut i, mut j) = (0usize, 0usize);
    while i < na || j < nb {
        let ai = inner[i % na];
        let ai1 = inner[(i + 1) % na];
        let bj = outer[j % nb];
        let bj1 = outer[(j + 1) % nb];
        let advance_outer = if j >= nb {
            false
        } else if i >= na {
            true
        } else {
            // compare diagonals (a_i, b_{j+1}) vs (a_{i+1}, b_j), biased by
            // how far each ring has progressed around the circle
            let prog_a = (i + 1) as f64 / na as f64;
            let prog_b = (j + 1) as f64 / nb as f64;
            if (prog_b - prog_a).abs() > 0.25 / na.min(nb) as f64 {
                prog_b < prog_a
            } else {
                dist(ai, bj1) <= dist(ai1, bj)
            }
        };
        if advance_outer {
            triangles.push([ai, bj, bj1]);
            j += 1;
        } else {
            triangles.push([ai, bj, ai1]);
            i += 1;
        }
    }
}

/// Conforming triangulation of the annulus `r_in <= |x| <= r_out` with the
/// `INNER` tag on `|x| = r_in` and `OUTER` on `|x| = r_out`.
/// Maximum edge length stays below `1.5 * h_target`.
pub fn generate_annulus(r_in: f64, r_out: f64, h_target: f64) -> Result<Mesh> {
    if !(r_in > 0.0 && r_out > r_in) {
        return Err(Error::invalid(format!(
            "need 0 < r_in < r_out, got r_in={r_in}, r_out={r_out}"
        )));
    }
    if !(h_target > 0.0 && h_target < r_out - r_in) {
        return Err(Error::invalid(format!(
            "need 0 < h_target < r_out - r_in, got h_target={h_target}"
        )));
    }
    let n_theta = angular_count(r_out, h_target);
    let n_r = ((r_out - r_in) / h_target).ceil() as usize;

    let mut vertices = Vec::with_capacity((n_r + 1) * n_theta);
    let mut rings: Vec<Vec<usize>> = Vec::with_capacity(n_r + 1);
    for i in 0..=n_r {
        let r = r_in + (r_out - r_in) * (i as f64) / (n_r as f64);
        let start = vertices.len();
        vertices.extend(ring_points(r, n_theta));
        rings.push((start..start + n_theta).collect());
    }
    let mut triangles = Vec::with_capacity(2 * n_r * n_theta);
    for i in 0..n_r {
        stitch_rings(&vertices, &rings[i], &rings[i + 1], &mut triangles);
    }

    let mut tagged = Vec::with_capacity(2 * n_theta);
    for j in 0..n_theta {
        tagged.push((rings[0][j], rings[0][(j + 1) % n_theta], BoundaryTag::Inner));
        tagged.push((
            rings[n_r][j],
            rings[n_r][(j + 1) % n_theta],
            BoundaryTag::Outer,
        ));
    }
    Mesh::from_parts(vertices, triangles, tagged)
}

/// Conforming triangulation of the disk `|x| <= r` with a single `INNER`
/// boundary loop (the disk plays the role of the heart domain).
pub fn generate_disk(r: f64, h_target: f64) -> Result<Mesh> {
    if !(r > 0.0) {
        return Err(Error::invalid(format!("need r > 0, got r={r}")));
    }
    if !(h_target > 0.0 && h_target < r) {
        return Err(Error::invalid(format!(
            "need 0 < h_target < r, got h_target={h_target}"
        )));
    }
    generate_disk_with_boundary(r, h_target, angular_count(r, h_target))
}

/// Disk mesh whose boundary loop has exactly `boundary_count` nodes at angles
/// `2πj/boundary_count`. Used to share the heart boundary with an annulus
/// mesh node-for-node.
pub fn generate_disk_with_boundary(r: f64, h_target: f64, boundary_count: usize) -> Result<Mesh> {
    if boundary_count < 8 {
        return Err(Error::invalid("boundary_count must be at least 8"));
    }
    if !(r > 0.0 && h_target > 0.0 && h_target < r) {
        return Err(Error::invalid(format!(
            "need 0 < h_target < r, got r={r}, h_target={h_target}"
        )));
    }
    let n_r = (r / h_target).ceil() as usize;

    let mut vertices = vec![[0.0, 0.0]];
    let mut rings: Vec<Vec<usize>> = vec![vec![0]];
    for i in 1..=n_r {
        let radius = r * (i as f64) / (n_r as f64);
        let count = if i == n_r {
            boundary_count
        } else {
            ((boundary_count as f64) * (i as f64) / (n_r as f64)).round() as usize
        }
        .max(6);
        let start = vertices.len();
        vertices.extend(ring_points(radius, count));
        rings.push((start..start + count).collect());
    }
    let mut triangles = Vec::new();
    for i in 0..n_r {
        stitch_rings(&vertices, &rings[i], &rings[i + 1], &mut triangles);
    }
    let boundary = &rings[n_r];
    let nb = boundary.len();
    let tagged = (0..nb)
        .map(|j| (boundary[j], boundary[(j + 1) % nb], BoundaryTag::Inner))
        .collect();
    Mesh::from_parts(vertices, triangles, tagged)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn annulus_topology() {
        let mesh = generate_annulus(1.0, 2.0, 0.5).unwrap();
        assert_eq!(mesh.euler_characteristic(), 0);
        assert!(mesh.has_tag(BoundaryTag::Inner));
        assert!(mesh.has_tag(BoundaryTag::Outer));
    }

    #[test]
    fn annulus_quality() {
        let mesh = generate_annulus(1.0, 2.0, 0.1).unwrap();
        let q = mesh.quality();
        assert!(q.min_area > 0.0);
        assert!(q.min_angle_deg > 15.0, "min angle {}", q.min_angle_deg);
        assert!(q.max_edge <= 1.5 * 0.1, "max edge {}", q.max_edge);
        let expect_area = std::f64::consts::PI * 3.0;
        assert!((q.total_area - expect_area).abs() / expect_area < 0.01);
    }

    #[test]
    fn annulus_rejects_degenerate() {
        assert!(generate_annulus(1.0, 1.0, 0.1).is_err());
        assert!(generate_annulus(1.0, 2.0, 5.0).is_err());
        assert!(generate_annulus(0.0, 2.0, 0.1).is_err());
    }

    #[test]
    fn disk_topology_and_perimeter() {
        let mesh = generate_disk(1.0, 0.5).unwrap();
        assert_eq!(mesh.euler_characteristic(), 1);

        let fine = generate_disk(1.0, 0.1).unwrap();
        let perimeter: f64 = fine.tagged_edges(BoundaryTag::Inner).map(|e| e.length).sum();
        let expect = 2.0 * std::f64::consts::PI;
        assert!((perimeter - expect).abs() / expect < 0.01, "perimeter {perimeter}");
    }

    #[test]
    fn disk_rejects_zero_radius() {
        assert!(generate_disk(0.0, 0.1).is_err());
    }

    #[test]
    fn boundary_loop_is_a_cycle_without_repeats() {
        let mesh = generate_annulus(1.0, 2.0, 0.5).unwrap();
        let nodes = mesh.boundary_nodes(BoundaryTag::Inner).unwrap();
        let set: std::collections::BTreeSet<_> = nodes.iter().collect();
        assert_eq!(set.len(), nodes.len());
    }

    #[test]
    fn refinement_doubles_boundary_nodes() {
        for h in [0.4, 0.23, 0.11] {
            let coarse = generate_annulus(1.0, 2.0, h).unwrap();
            let fine = generate_annulus(1.0, 2.0, h / 2.0).unwrap();
            for tag in [BoundaryTag::Inner, BoundaryTag::Outer] {
                let c = coarse.boundary_nodes(tag).unwrap().len();
                let f = fine.boundary_nodes(tag).unwrap().len();
                assert!(f >= 2 * c, "{tag:?}: {c} -> {f}");
            }
        }
        let coarse = generate_disk(1.0, 0.3).unwrap();
        let fine = generate_disk(1.0, 0.15).unwrap();
        let c = coarse.boundary_nodes(BoundaryTag::Inner).unwrap().len();
        let f = fine.boundary_nodes(BoundaryTag::Inner).unwrap().len();
        assert!(f >= 2 * c);
    }

    #[test]
    fn disk_matches_requested_boundary() {
        let annulus = generate_annulus(1.0, 2.0, 0.2).unwrap();
        let n_inner = annulus.boundary_nodes(BoundaryTag::Inner).unwrap().len();
        let disk = generate_disk_with_boundary(1.0, 0.2, n_inner).unwrap();
        let disk_nodes = disk.boundary_nodes(BoundaryTag::Inner).unwrap();
        assert_eq!(disk_nodes.len(), n_inner);
        // identical angles -> identical coordinates
        let ann_nodes = annulus.boundary_nodes(BoundaryTag::Inner).unwrap();
        for (da, aa) in disk_nodes.iter().zip(ann_nodes) {
            let p = disk.vertices()[*da];
            let q = annulus.vertices()[*aa];
            assert_eq!(p, q);
        }
    }

    #[test]
    fn constant_flux_closes_on_loops() {
        // discrete divergence theorem: sum of (F . nu) |e| over a closed loop is 0
        let mesh = generate_annulus(1.0, 2.0, 0.2).unwrap();
        let f = [0.3, -1.7];
        for tag in [BoundaryTag::Inner, BoundaryTag::Outer] {
            let total: f64 = mesh
                .tagged_edges(tag)
                .map(|e| (f[0] * e.normal[0] + f[1] * e.normal[1]) * e.length)
                .sum();
            let scale: f64 = mesh.tagged_edges(tag).map(|e| e.length).sum::<f64>()
                * (f[0 ].powi(2) + f[1].powi(2)).sqrt();
            assert!(total.abs() < 1e-10 * scale, "{tag:?}: {total}");
        }
    }
}
