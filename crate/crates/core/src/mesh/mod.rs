//! 2-D triangulations of body-minus-heart geometries.
//!
//! A [`Mesh`] is a conforming triangulation with tagged boundary loops:
//! `OUTER` is the body surface, `INNER` the heart boundary. Annulus meshes
//! carry both tags, disk meshes (the heart domain) a single `INNER` loop.
//! Boundary edges store outward unit normals pointing out of the meshed
//! domain: outward on `OUTER`, toward the hole on `INNER`.

mod generate;
mod io;

pub use generate::{generate_annulus, generate_disk, generate_disk_with_boundary};
pub use io::{load_mesh, mesh_from_str, mesh_to_string, save_mesh};

use std::collections::BTreeMap;

use crate::error::{Error, Result};

/// Boundary component tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BoundaryTag {
    Outer,
    Inner,
}

impl BoundaryTag {
    pub fn name(self) -> &'static str {
        match self {
            BoundaryTag::Outer => "OUTER",
            BoundaryTag::Inner => "INNER",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "OUTER" => Ok(BoundaryTag::Outer),
            "INNER" => Ok(BoundaryTag::Inner),
            other => Err(Error::Parse(format!("unknown boundary tag '{other}'"))),
        }
    }
}

/// A tagged boundary edge with its outward unit normal and length.
#[derive(Debug, Clone)]
pub struct BoundaryEdge {
    pub a: usize,
    pub b: usize,
    pub tag: BoundaryTag,
    pub normal: [f64; 2],
    pub length: f64,
}

#[derive(Debug, Clone)]
pub struct Mesh {
    vertices: Vec<[f64; 2]>,
    triangles: Vec<[usize; 3]>,
    boundary_edges: Vec<BoundaryEdge>,
    /// Ordered node loop per tag (counterclockwise, no repeated first node).
    loops: BTreeMap<BoundaryTag, Vec<usize>>,
}

/// Quality numbers reported by the generators and the `mesh` subcommand.
#[derive(Debug, Clone)]
pub struct MeshQuality {
    pub vertices: usize,
    pub triangles: usize,
    pub boundary_edges: usize,
    pub euler_characteristic: i64,
    pub min_angle_deg: f64,
    pub max_edge: f64,
    pub min_edge: f64,
    pub min_area: f64,
    pub total_area: f64,
}

impl Mesh {
    /// Builds a mesh from raw vertices, triangles and tagged boundary edges,
    /// validating orientation, manifoldness and loop structure. Normals are
    /// recomputed from geometry.
    pub fn from_parts(
        vertices: Vec<[f64; 2]>,
        triangles: Vec<[usize; 3]>,
        tagged_edges: Vec<(usize, usize, BoundaryTag)>,
    ) -> Result<Self> {
        let nv = vertices.len();
        if nv < 3 {
            return Err(Error::invalid("mesh needs at least 3 vertices"));
        }
        for t in &triangles {
            for &v in t {
                if v >= nv {
                    return Err(Error::invalid(format!("triangle vertex {v} out of range")));
                }
            }
            let area = signed_area(&vertices, t);
            if !(area > 0.0) {
                return Err(Error::invalid(format!(
                    "triangle {t:?} has non-positive area {area}"
                )));
            }
        }

        // edge -> adjacent triangle count and one adjacent triangle id
        let mut edge_use: BTreeMap<(usize, usize), (usize, usize)> = BTreeMap::new();
        for (ti, t) in triangles.iter().enumerate() {
            for e in 0..3 {
                let (p, q) = (t[e], t[(e + 1) % 3]);
                let key = (p.min(q), p.max(q));
                let entry = edge_use.entry(key).or_insert((0, ti));
                entry.0 += 1;
                entry.1 = ti;
            }
        }
        if let Some((key, (count, _))) = edge_use.iter().find(|(_, (c, _))| *c > 2) {
            return Err(Error::invalid(format!(
                "non-manifold edge {key:?} shared by {count} triangles"
            )));
        }

        // every tagged edge must be an actual boundary edge, and vice versa
        let mut boundary_edges = Vec::new();
        let mut seen: BTreeMap<(usize, usize), bool> = BTreeMap::new();
        for &(a, b, tag) in &tagged_edges {
            let key = (a.min(b), a.max(b));
            match edge_use.get(&key) {
                Some((1, tri)) => {
                    if seen.insert(key, true).is_some() {
                        return Err(Error::invalid(format!("boundary edge {key:?} listed twice")));
                    }
                    let normal = outward_normal(&vertices, a, b, &triangles[*tri]);
                    let length = dist(vertices[a], vertices[b]);
                    boundary_edges.push(BoundaryEdge {
                        a,
                        b,
                        tag,
                        normal,
                        length,
                    });
                }
                Some((2, _)) => {
                    return Err(Error::invalid(format!(
                        "edge {key:?} tagged as boundary but interior to the mesh"
                    )))
                }
                _ => {
                    return Err(Error::invalid(format!(
                        "tagged edge {key:?} does not exist in the triangulation"
                    )))
                }
            }
        }
        let n_boundary = edge_use.values().filter(|(c, _)| *c == 1).count();
        if n_boundary != boundary_edges.len() {
            return Err(Error::invalid(format!(
                "{n_boundary} boundary edges in the triangulation, {} tagged",
                boundary_edges.len()
            )));
        }

        let loops = build_loops(&vertices, &boundary_edges)?;
        Ok(Self {
            vertices,
            triangles,
            boundary_edges,
            loops,
        })
    }

    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn boundary_edges(&self) -> &[BoundaryEdge] {
        &self.boundary_edges
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn has_tag(&self, tag: BoundaryTag) -> bool {
        self.loops.contains_key(&tag)
    }

    pub fn tags(&self) -> impl Iterator<Item = BoundaryTag> + '_ {
        self.loops.keys().copied()
    }

    /// Nodes of the tagged loop, ordered counterclockwise; the first node is
    /// not repeated at the end.
    pub fn boundary_nodes(&self, tag: BoundaryTag) -> Result<&[usize]> {
        self.loops
            .get(&tag)
            .map(|v| v.as_slice())
            .ok_or_else(|| Error::invalid(format!("mesh has no {} boundary", tag.name())))
    }

    /// Edges carrying the given tag.
    pub fn tagged_edges(&self, tag: BoundaryTag) -> impl Iterator<Item = &BoundaryEdge> {
        self.boundary_edges.iter().filter(move |e| e.tag == tag)
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        signed_area(&self.vertices, &self.triangles[t])
    }

    pub fn euler_characteristic(&self) -> i64 {
        let mut edges = std::collections::BTreeSet::new();
        for t in &self.triangles {
            for e in 0..3 {
                let (p, q) = (t[e], t[(e + 1) % 3]);
                edges.insert((p.min(q), p.max(q)));
            }
        }
        self.vertices.len() as i64 - edges.len() as i64 + self.triangles.len() as i64
    }

    pub fn quality(&self) -> MeshQuality {
        let mut min_angle = f64::INFINITY;
        let mut max_edge: f64 = 0.0;
        let mut min_edge = f64::INFINITY;
        let mut min_area = f64::INFINITY;
        let mut total_area = 0.0;
        for t in &self.triangles {
            let p = [self.vertices[t[0]], self.vertices[t[1]], self.vertices[t[2]]];
            let area = signed_area(&self.vertices, t);
            min_area = min_area.min(area);
            total_area += area;
            for i in 0..3 {
                let e = dist(p[i], p[(i + 1) % 3]);
                max_edge = max_edge.max(e);
                min_edge = min_edge.min(e);
                let u = sub(p[(i + 1) % 3], p[i]);
                let v = sub(p[(i + 2) % 3], p[i]);
                let cosang = dot(u, v) / (norm(u) * norm(v));
                min_angle = min_angle.min(cosang.clamp(-1.0, 1.0).acos());
            }
        }
        MeshQuality {
            vertices: self.vertices.len(),
            triangles: self.triangles.len(),
            boundary_edges: self.boundary_edges.len(),
            euler_characteristic: self.euler_characteristic(),
            min_angle_deg: min_angle.to_degrees(),
            max_edge,
            min_edge,
            min_area,
            total_area,
        }
    }

    /// Lumped (trapezoidal) boundary mass per loop node, in loop order.
    pub fn boundary_weights(&self, tag: BoundaryTag) -> Result<Vec<f64>> {
        let nodes = self.boundary_nodes(tag)?;
        let index: BTreeMap<usize, usize> =
            nodes.iter().enumerate().map(|(i, &n)| (n, i)).collect();
        let mut w = vec![0.0; nodes.len()];
        for e in self.tagged_edges(tag) {
            w[index[&e.a]] += 0.5 * e.length;
            w[index[&e.b]] += 0.5 * e.length;
        }
        Ok(w)
    }

    /// Locates `point` in the mesh and returns (triangle, barycentric coords).
    /// Accepts points on edges/vertices; tolerance absorbs roundoff.
    pub fn locate(&self, point: [f64; 2]) -> Option<(usize, [f64; 3])> {
        let mut best: Option<(usize, [f64; 3], f64)> = None;
        for (ti, t) in self.triangles.iter().enumerate() {
            let b = barycentric(&self.vertices, t, point);
            let worst = b[0].min(b[1]).min(b[2]);
            if worst >= -1e-12 {
                return Some((ti, b));
            }
            if best.is_none_or(|(_, _, w)| worst > w) {
                best = Some((ti, b, worst));
            }
        }
        // fall back to the nearest triangle when the point sits a hair outside
        best.and_then(|(ti, b, worst)| {
            if worst > -1e-8 {
                Some((ti, b))
            } else {
                None
            }
        })
    }
}

fn sub(a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    [a[0] - b[0], a[1] - b[1]]
}

fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

fn norm(a: [f64; 2]) -> f64 {
    dot(a, a).sqrt()
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    norm(sub(a, b))
}

pub(crate) fn signed_area(vertices: &[[f64; 2]], t: &[usize; 3]) -> f64 {
    let [p0, p1, p2] = [vertices[t[0]], vertices[t[1]], vertices[t[2]]];
    0.5 * ((p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]))
}

fn barycentric(vertices: &[[f64; 2]], t: &[usize; 3], p: [f64; 2]) -> [f64; 3] {
    let area = signed_area(vertices, t);
    let [p0, p1, p2] = [vertices[t[0]], vertices[t[1]], vertices[t[2]]];
    let a0 = 0.5 * ((p1[0] - p[0]) * (p2[1] - p[1]) - (p2[0] - p[0]) * (p1[1] - p[1]));
    let a1 = 0.5 * ((p2[0] - p[0]) * (p0[1] - p[1]) - (p0[0] - p[0]) * (p2[1] - p[1]));
    let a2 = 0.5 * ((p0[0] - p[0]) * (p1[1] - p[1]) - (p1[0] - p[0]) * (p0[1] - p[1]));
    [a0 / area, a1 / area, a2 / area]
}

/// Unit normal of boundary edge (a,b) pointing away from the adjacent triangle.
fn outward_normal(vertices: &[[f64; 2]], a: usize, b: usize, tri: &[usize; 3]) -> [f64; 2] {
    let pa = vertices[a];
    let pb = vertices[b];
    let t = sub(pb, pa);
    let len = norm(t);
    let mut n = [t[1] / len, -t[0] / len];
    let centroid = [
        (vertices[tri[0]][0] + vertices[tri[1]][0] + vertices[tri[2]][0]) / 3.0,
        (vertices[tri[0]][1] + vertices[tri[1]][1] + vertices[tri[2]][1]) / 3.0,
    ];
    let mid = [(pa[0] + pb[0]) / 2.0, (pa[1] + pb[1]) / 2.0];
    if dot(n, sub(centroid, mid)) > 0.0 {
        n = [-n[0], -n[1]];
    }
    n
}

/// Chains tagged boundary edges into closed counterclockwise loops.
fn build_loops(
    vertices: &[[f64; 2]],
    edges: &[BoundaryEdge],
) -> Result<BTreeMap<BoundaryTag, Vec<usize>>> {
    let mut result = BTreeMap::new();
    for tag in [BoundaryTag::Outer, BoundaryTag::Inner] {
        let tagged: Vec<&BoundaryEdge> = edges.iter().filter(|e| e.tag == tag).collect();
        if tagged.is_empty() {
            continue;
        }
        let mut adj: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for e in &tagged {
            adj.entry(e.a).or_default().push(e.b);
            adj.entry(e.b).or_default().push(e.a);
        }
        if let Some((node, nb)) = adj.iter().find(|(_, nb)| nb.len() != 2) {
            return Err(Error::invalid(format!(
                "boundary node {node} on {} has {} incident tagged edges, expected 2",
                tag.name(),
                nb.len()
            )));
        }
        let start = *adj.keys().next().expect("nonempty");
        let mut cycle = vec![start];
        let mut prev = start;
        let mut cur = adj[&start][0].min(adj[&start][1]);
        while cur != start {
            cycle.push(cur);
            let nb = &adj[&cur];
            let next = if nb[0] == prev { nb[1] } else { nb[0] };
            prev = cur;
            cur = next;
            if cycle.len() > adj.len() {
                return Err(Error::invalid(format!(
                    "{} boundary edges do not form a single closed loop",
                    tag.name()
                )));
            }
        }
        if cycle.len() != adj.len() {
            return Err(Error::invalid(format!(
                "{} boundary has {} nodes but the loop through them visits {}",
                tag.name(),
                adj.len(),
                cycle.len()
            )));
        }
        // orient counterclockwise by polygon signed area
        let area: f64 = cycle
            .iter()
            .zip(cycle.iter().cycle().skip(1))
            .map(|(&i, &j)| {
                let p = vertices[i];
                let q = vertices[j];
                p[0] * q[1] - q[0] * p[1]
            })
            .sum();
        if area < 0.0 {
            cycle[1..].reverse();
        }
        result.insert(tag, cycle);
    }
    if result.is_empty() {
        return Err(Error::invalid("mesh has no tagged boundary"));
    }
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_triangle_mesh() {
        let mesh = Mesh::from_parts(
            vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]],
            vec![[0, 1, 2]],
            vec![
                (0, 1, BoundaryTag::Outer),
                (1, 2, BoundaryTag::Outer),
                (2, 0, BoundaryTag::Outer),
            ],
        )
        .unwrap();
        assert_eq!(mesh.euler_characteristic(), 1);
        let nodes = mesh.boundary_nodes(BoundaryTag::Outer).unwrap();
        assert_eq!(nodes.len(), 3);
    }

    #[test]
    fn rejects_flipped_triangle() {
        let r = Mesh::from_parts(
            vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]],
            vec![[0, 2, 1]],
            vec![],
        );
        assert!(r.is_err());
    }

    #[test]
    fn rejects_untagged_boundary() {
        let r = Mesh::from_parts(
            vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]],
            vec![[0, 1, 2]],
            vec![(0, 1, BoundaryTag::Outer)],
        );
        assert!(r.is_err());
    }

    #[test]
    fn normals_point_away_from_triangles() {
        let mesh = crate::mesh::generate_annulus(1.0, 2.0, 0.4).unwrap();
        for e in mesh.boundary_edges() {
            let pa = mesh.vertices()[e.a];
            let pb = mesh.vertices()[e.b];
            let t = [pb[0] - pa[0], pb[1] - pa[1]];
            let dp = e.normal[0] * t[0] + e.normal[1] * t[1];
            assert!(dp.abs() < 1e-12 * e.length, "normal not perpendicular");
            let mid = [(pa[0] + pb[0]) / 2.0, (pa[1] + pb[1]) / 2.0];
            let r = (mid[0] * mid[0] + mid[1] * mid[1]).sqrt();
            let radial = (mid[0] * e.normal[0] + mid[1] * e.normal[1]) / r;
            match e.tag {
                BoundaryTag::Outer => assert!(radial > 0.9),
                BoundaryTag::Inner => assert!(radial < -0.9),
            }
        }
    }
}
