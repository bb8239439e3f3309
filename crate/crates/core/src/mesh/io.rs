//! Plain-text mesh files.
//!
//! Format (whitespace separated, `#` starts a comment line):
//!
//! ```text
//! epicard-mesh 1
//! nodes <count>
//! <id> <x> <y>            # ids are consecutive from 0
//! triangles <count>
//! <id> <v0> <v1> <v2>     # counterclockwise
//! edges <count>
//! <id> <v0> <v1> <TAG>    # TAG is INNER or OUTER
//! ```
//!
//! Coordinates are written in the shortest decimal form that parses back to
//! the identical `f64`, so save/load round-trips are bit-exact.

use std::fmt::Write as _;
use std::path::Path;

use super::{BoundaryTag, Mesh};
use crate::error::{Error, Result};

pub fn mesh_to_string(mesh: &Mesh) -> String {
    let mut out = String::new();
    out.push_str("epicard-mesh 1\n");
    writeln!(out, "nodes {}", mesh.n_vertices()).unwrap();
    for (i, v) in mesh.vertices().iter().enumerate() {
        writeln!(out, "{} {} {}", i, v[0], v[1]).unwrap();
    }
    writeln!(out, "triangles {}", mesh.triangles().len()).unwrap();
    for (i, t) in mesh.triangles().iter().enumerate() {
        writeln!(out, "{} {} {} {}", i, t[0], t[1], t[2]).unwrap();
    }
    writeln!(out, "edges {}", mesh.boundary_edges().len()).unwrap();
    for (i, e) in mesh.boundary_edges().iter().enumerate() {
        writeln!(out, "{} {} {} {}", i, e.a, e.b, e.tag.name()).unwrap();
    }
    out
}

struct Lines<'a> {
    iter: std::str::Lines<'a>,
    line_no: usize,
}

impl<'a> Lines<'a> {
    fn next_content(&mut self) -> Result<&'a str> {
        for line in self.iter.by_ref() {
            self.line_no += 1;
            let trimmed = line.trim();
            if !trimmed.is_empty() && !trimmed.starts_with('#') {
                return Ok(trimmed);
            }
        }
        Err(Error::Parse("unexpected end of mesh file".into()))
    }

    fn err(&self, msg: impl std::fmt::Display) -> Error {
        Error::Parse(format!("mesh file line {}: {}", self.line_no, msg))
    }
}

fn section<'a>(lines: &mut Lines<'a>, name: &str) -> Result<usize> {
    let header = lines.next_content()?;
    let mut parts = header.split_whitespace();
    match (parts.next(), parts.next()) {
        (Some(word), Some(count)) if word == name => count
            .parse()
            .map_err(|_| lines.err(format_args!("bad {name} count '{count}'"))),
        _ => Err(lines.err(format_args!("expected '{name} <count>', found '{header}'"))),
    }
}

pub fn mesh_from_str(text: &str) -> Result<Mesh> {
    let mut lines = Lines {
        iter: text.lines(),
        line_no: 0,
    };
    let magic = lines.next_content()?;
    if magic != "epicard-mesh 1" {
        return Err(lines.err(format_args!("bad header '{magic}'")));
    }

    let n_nodes = section(&mut lines, "nodes")?;
    let mut vertices = Vec::with_capacity(n_nodes);
    for i in 0..n_nodes {
        let line = lines.next_content()?;
        let mut p = line.split_whitespace();
        let id: usize = p
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| lines.err("missing node id"))?;
        if id != i {
            return Err(lines.err(format_args!("node ids must be consecutive, found {id}")));
        }
        let x: f64 = p
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| lines.err("bad x coordinate"))?;
        let y: f64 = p
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| lines.err("bad y coordinate"))?;
        vertices.push([x, y]);
    }

    let n_tris = section(&mut lines, "triangles")?;
    let mut triangles = Vec::with_capacity(n_tris);
    for i in 0..n_tris {
        let line = lines.next_content()?;
        let nums: Vec<usize> = line
            .split_whitespace()
            .map(|s| s.parse())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| lines.err("bad triangle line"))?;
        if nums.len() != 4 || nums[0] != i {
            return Err(lines.err("expected '<id> <v0> <v1> <v2>'"));
        }
        triangles.push([nums[1], nums[2], nums[3]]);
    }

    let n_edges = section(&mut lines, "edges")?;
    let mut tagged = Vec::with_capacity(n_edges);
    for i in 0..n_edges {
        let line = lines.next_content()?;
        let parts: Vec<&str> = line.split_whitespace().collect();
        if parts.len() != 4 {
            return Err(lines.err("expected '<id> <v0> <v1> <TAG>'"));
        }
        let id: usize = parts[0].parse().map_err(|_| lines.err("bad edge id"))?;
        if id != i {
            return Err(lines.err("edge ids must be consecutive"));
        }
        let a: usize = parts[1].parse().map_err(|_| lines.err("bad edge node"))?;
        let b: usize = parts[2].parse().map_err(|_| lines.err("bad edge node"))?;
        let tag = BoundaryTag::parse(parts[3])?;
        tagged.push((a, b, tag));
    }

    Mesh::from_parts(vertices, triangles, tagged)
}

pub fn save_mesh(mesh: &Mesh, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, mesh_to_string(mesh))?;
    Ok(())
}

pub fn load_mesh(path: impl AsRef<Path>) -> Result<Mesh> {
    mesh_from_str(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate_annulus, generate_disk};

    #[test]
    fn round_trip_is_exact() {
        for mesh in [
            generate_annulus(1.0, 2.0, 0.5).unwrap(),
            generate_disk(1.0, 0.4).unwrap(),
        ] {
            let text = mesh_to_string(&mesh);
            let back = mesh_from_str(&text).unwrap();
            assert_eq!(mesh.vertices(), back.vertices());
            assert_eq!(mesh.triangles(), back.triangles());
            assert_eq!(text, mesh_to_string(&back));
        }
    }

    #[test]
    fn rejects_non_manifold_edge() {
        // three positively oriented triangles sharing edge (0,1)
        let text = "epicard-mesh 1\n\
                    nodes 5\n\
                    0 0 0\n1 1 0\n2 0 1\n3 0 -1\n4 -1 -1\n\
                    triangles 3\n\
                    0 0 1 2\n1 0 3 1\n2 0 4 1\n\
                    edges 0\n";
        let err = mesh_from_str(text).unwrap_err();
        assert!(err.to_string().contains("non-manifold"), "{err}");
    }

    #[test]
    fn rejects_truncated_file() {
        let text = "epicard-mesh 1\nnodes 2\n0 0 0\n";
        assert!(mesh_from_str(text).is_err());
    }
}
