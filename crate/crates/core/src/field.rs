//! Nodal vector fields over a mesh or over one of its boundary loops.
//!
//! A volume field stores `k` complex components per mesh node, indexed by
//! node id. A boundary field stores `k` components per loop node, indexed in
//! loop order (see [`Mesh::boundary_nodes`]). Fields do not own their mesh;
//! operations take the mesh alongside and validate the node count.

use std::fmt::Write as _;
use std::path::Path;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::mesh::{BoundaryTag, Mesh};

/// Where the nodal values of a [`Field`] live.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Support {
    Volume,
    Boundary(BoundaryTag),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    support: Support,
    components: usize,
    values: Vec<Complex64>,
}

impl Field {
    pub fn new(support: Support, components: usize, values: Vec<Complex64>) -> Result<Self> {
        if components == 0 || !values.len().is_multiple_of(components) {
            return Err(Error::invalid(format!(
                "value count {} is not a multiple of component count {}",
                values.len(),
                components
            )));
        }
        if values.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::invalid("field values must be finite"));
        }
        Ok(Self {
            support,
            components,
            values,
        })
    }

    pub fn zeros(support: Support, components: usize, nodes: usize) -> Self {
        Self {
            support,
            components,
            values: vec![Complex64::new(0.0, 0.0); components * nodes],
        }
    }

    /// Volume field built by evaluating `f(x, y, component)` at every node.
    pub fn from_fn_volume(
        mesh: &Mesh,
        components: usize,
        f: impl Fn(f64, f64, usize) -> Complex64,
    ) -> Self {
        let mut values = Vec::with_capacity(mesh.n_vertices() * components);
        for v in mesh.vertices() {
            for c in 0..components {
                values.push(f(v[0], v[1], c));
            }
        }
        Self {
            support: Support::Volume,
            components,
            values,
        }
    }

    /// Boundary field built by evaluating `f(x, y, component)` at loop nodes.
    pub fn from_fn_boundary(
        mesh: &Mesh,
        tag: BoundaryTag,
        components: usize,
        f: impl Fn(f64, f64, usize) -> Complex64,
    ) -> Result<Self> {
        let nodes = mesh.boundary_nodes(tag)?;
        let mut values = Vec::with_capacity(nodes.len() * components);
        for &n in nodes {
            let v = mesh.vertices()[n];
            for c in 0..components {
                values.push(f(v[0], v[1], c));
            }
        }
        Ok(Self {
            support: Support::Boundary(tag),
            components,
            values,
        })
    }

    pub fn support(&self) -> Support {
        self.support
    }

    pub fn components(&self) -> usize {
        self.components
    }

    pub fn n_nodes(&self) -> usize {
        self.values.len() / self.components
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn value(&self, node: usize, component: usize) -> Complex64 {
        self.values[node * self.components + component]
    }

    pub fn set(&mut self, node: usize, component: usize, v: Complex64) {
        self.values[node * self.components + component] = v;
    }

    /// Euclidean norm of the raw value vector.
    pub fn norm(&self) -> f64 {
        self.values.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Checks that this field is a volume field matching `mesh`.
    pub fn expect_volume(&self, mesh: &Mesh) -> Result<()> {
        if self.support != Support::Volume {
            return Err(Error::invalid("expected a volume field"));
        }
        if self.n_nodes() != mesh.n_vertices() {
            return Err(Error::invalid(format!(
                "volume field has {} nodes, mesh has {}",
                self.n_nodes(),
                mesh.n_vertices()
            )));
        }
        Ok(())
    }

    /// Checks that this field lives on the tagged loop of `mesh`.
    pub fn expect_boundary(&self, mesh: &Mesh, tag: BoundaryTag) -> Result<()> {
        if self.support != Support::Boundary(tag) {
            return Err(Error::invalid(format!(
                "expected a field on the {} boundary",
                tag.name()
            )));
        }
        let n = mesh.boundary_nodes(tag)?.len();
        if self.n_nodes() != n {
            return Err(Error::invalid(format!(
                "boundary field has {} nodes, loop has {}",
                self.n_nodes(),
                n
            )));
        }
        Ok(())
    }

    /// Restricts a volume field to the tagged loop (values in loop order).
    pub fn boundary_trace(&self, mesh: &Mesh, tag: BoundaryTag) -> Result<Field> {
        self.expect_volume(mesh)?;
        let nodes = mesh.boundary_nodes(tag)?;
        let mut values = Vec::with_capacity(nodes.len() * self.components);
        for &n in nodes {
            for c in 0..self.components {
                values.push(self.value(n, c));
            }
        }
        Ok(Field {
            support: Support::Boundary(tag),
            components: self.components,
            values,
        })
    }

    pub fn scaled(&self, factor: Complex64) -> Field {
        Field {
            support: self.support,
            components: self.components,
            values: self.values.iter().map(|z| z * factor).collect(),
        }
    }

    pub fn add_scaled(&mut self, other: &Field, factor: Complex64) -> Result<()> {
        if self.support != other.support
            || self.components != other.components
            || self.values.len() != other.values.len()
        {
            return Err(Error::invalid("field support mismatch"));
        }
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += b * factor;
        }
        Ok(())
    }

    /// P1 evaluation of a volume field at an arbitrary point of the mesh.
    pub fn eval_volume(&self, mesh: &Mesh, point: [f64; 2]) -> Result<Vec<Complex64>> {
        self.expect_volume(mesh)?;
        let (tri, bary) = mesh
            .locate(point)
            .ok_or_else(|| Error::invalid(format!("point {point:?} is outside the mesh")))?;
        let t = mesh.triangles()[tri];
        Ok((0..self.components)
            .map(|c| {
                (0..3)
                    .map(|i| self.value(t[i], c) * Complex64::new(bary[i], 0.0))
                    .sum()
            })
            .collect())
    }
}

/// Adds seeded Gaussian noise to a boundary field, scaled so the boundary-L²
/// norm of the perturbation is exactly `rel_level` times the field's norm.
/// Returns the noisy field and the absolute noise norm.
pub fn add_boundary_noise(
    mesh: &Mesh,
    field: &Field,
    rel_level: f64,
    seed: u64,
) -> Result<(Field, f64)> {
    let tag = match field.support() {
        Support::Boundary(t) => t,
        Support::Volume => return Err(Error::invalid("noise injection expects a boundary field")),
    };
    field.expect_boundary(mesh, tag)?;
    if rel_level == 0.0 {
        return Ok((field.clone(), 0.0));
    }
    let weights = mesh.boundary_weights(tag)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = field.components();
    let mut noise = vec![Complex64::new(0.0, 0.0); field.values().len()];
    for slot in noise.iter_mut() {
        let u1: f64 = rng.gen_range(1e-12..1.0);
        let u2: f64 = rng.gen();
        *slot = Complex64::new(
            (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos(),
            0.0,
        );
    }
    let weighted_norm = |vals: &[Complex64]| -> f64 {
        weights
            .iter()
            .enumerate()
            .map(|(i, w)| {
                (0..k).map(|c| vals[i * k + c].norm_sqr()).sum::<f64>() * w
            })
            .sum::<f64>()
            .sqrt()
    };
    let f_norm = weighted_norm(field.values());
    let raw = weighted_norm(&noise);
    if raw == 0.0 {
        return Err(Error::invalid("degenerate noise draw"));
    }
    let target = rel_level * f_norm;
    let scale = Complex64::new(target / raw, 0.0);
    let mut out = field.clone();
    for (f, n) in out.values_mut().iter_mut().zip(&noise) {
        *f += n * scale;
    }
    Ok((out, target))
}

/// Transfers a boundary field from one loop to another along arclength.
///
/// When both loops have identical node coordinates the transfer is exact
/// node-to-node; otherwise values are interpolated piecewise-linearly by the
/// normalized arclength parameter measured from the angle-zero node.
pub fn transfer_boundary(
    src_mesh: &Mesh,
    src: &Field,
    dst_mesh: &Mesh,
    dst_tag: BoundaryTag,
) -> Result<Field> {
    let src_tag = match src.support() {
        Support::Boundary(t) => t,
        _ => return Err(Error::invalid("can only transfer boundary fields")),
    };
    src.expect_boundary(src_mesh, src_tag)?;
    let src_nodes = src_mesh.boundary_nodes(src_tag)?;
    let dst_nodes = dst_mesh.boundary_nodes(dst_tag)?;
    let k = src.components();

    if src_nodes.len() == dst_nodes.len() {
        let exact = src_nodes
            .iter()
            .zip(dst_nodes)
            .all(|(&s, &d)| src_mesh.vertices()[s] == dst_mesh.vertices()[d]);
        if exact {
            return Field::new(Support::Boundary(dst_tag), k, src.values().to_vec());
        }
    }

    let param = |mesh: &Mesh, nodes: &[usize]| -> Vec<f64> {
        // cumulative arclength, normalized to [0, 1)
        let mut s = Vec::with_capacity(nodes.len() + 1);
        s.push(0.0);
        for i in 0..nodes.len() {
            let a = mesh.vertices()[nodes[i]];
            let b = mesh.vertices()[nodes[(i + 1) % nodes.len()]];
            let d = ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
            s.push(s[i] + d);
        }
        let total = *s.last().unwrap();
        s.iter().map(|x| x / total).collect()
    };
    let sp = param(src_mesh, src_nodes);
    let dp = param(dst_mesh, dst_nodes);

    let ns = src_nodes.len();
    let mut values = Vec::with_capacity(dst_nodes.len() * k);
    for &t in dp.iter().take(dst_nodes.len()) {
        // find the source segment containing parameter t
        let seg = match sp.binary_search_by(|x| x.partial_cmp(&t).unwrap()) {
            Ok(i) => i.min(ns - 1),
            Err(i) => i.saturating_sub(1).min(ns - 1),
        };
        let (t0, t1) = (sp[seg], sp[seg + 1]);
        let w = if t1 > t0 { (t - t0) / (t1 - t0) } else { 0.0 };
        for c in 0..k {
            let v0 = src.value(seg, c);
            let v1 = src.value((seg + 1) % ns, c);
            values.push(v0 * Complex64::new(1.0 - w, 0.0) + v1 * Complex64::new(w, 0.0));
        }
    }
    Field::new(Support::Boundary(dst_tag), k, values)
}

// ---------------------------------------------------------------------------
// serialization

fn field_coords(mesh: &Mesh, field: &Field) -> Result<Vec<(usize, [f64; 2])>> {
    match field.support() {
        Support::Volume => {
            field.expect_volume(mesh)?;
            Ok(mesh
                .vertices()
                .iter()
                .enumerate()
                .map(|(i, &v)| (i, v))
                .collect())
        }
        Support::Boundary(tag) => {
            field.expect_boundary(mesh, tag)?;
            Ok(mesh
                .boundary_nodes(tag)?
                .iter()
                .map(|&n| (n, mesh.vertices()[n]))
                .collect())
        }
    }
}

/// CSV with one row per node: `node,x,y,c0_re,c0_im[,c1_re,c1_im,...]`.
pub fn field_to_csv(mesh: &Mesh, field: &Field) -> Result<String> {
    let coords = field_coords(mesh, field)?;
    let k = field.components();
    let mut out = String::from("node,x,y");
    for c in 0..k {
        write!(out, ",c{c}_re,c{c}_im").unwrap();
    }
    out.push('\n');
    for (row, (node, [x, y])) in coords.iter().enumerate() {
        write!(out, "{node},{x},{y}").unwrap();
        for c in 0..k {
            let z = field.value(row, c);
            write!(out, ",{},{}", z.re, z.im).unwrap();
        }
        out.push('\n');
    }
    Ok(out)
}

pub fn save_field_csv(mesh: &Mesh, field: &Field, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, field_to_csv(mesh, field)?)?;
    Ok(())
}

/// Reads a boundary or volume field from the CSV layout of [`field_to_csv`].
pub fn load_field_csv(
    mesh: &Mesh,
    support: Support,
    path: impl AsRef<Path>,
) -> Result<Field> {
    let text = std::fs::read_to_string(path)?;
    field_from_csv(mesh, support, &text)
}

pub fn field_from_csv(mesh: &Mesh, support: Support, text: &str) -> Result<Field> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Parse("empty field CSV".into()))?;
    let cols = header.split(',').count();
    if cols < 5 || (cols - 3) % 2 != 0 {
        return Err(Error::Parse(format!("bad field CSV header '{header}'")));
    }
    let k = (cols - 3) / 2;
    let expected_nodes = match support {
        Support::Volume => mesh.n_vertices(),
        Support::Boundary(tag) => mesh.boundary_nodes(tag)?.len(),
    };
    let mut values = Vec::with_capacity(expected_nodes * k);
    let mut count = 0usize;
    for (ln, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != cols {
            return Err(Error::Parse(format!("field CSV row {}: wrong column count", ln + 2)));
        }
        for c in 0..k {
            let re: f64 = parts[3 + 2 * c]
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("field CSV row {}: bad float", ln + 2)))?;
            let im: f64 = parts[4 + 2 * c]
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("field CSV row {}: bad float", ln + 2)))?;
            values.push(Complex64::new(re, im));
        }
        count += 1;
    }
    if count != expected_nodes {
        return Err(Error::Parse(format!(
            "field CSV has {count} rows, support expects {expected_nodes}"
        )));
    }
    Field::new(support, k, values)
}

/// Legacy ASCII VTK for external visualization. Volume fields become an
/// unstructured triangle grid, boundary fields a polyline.
pub fn field_to_vtk(mesh: &Mesh, field: &Field, title: &str) -> Result<String> {
    let coords = field_coords(mesh, field)?;
    let k = field.components();
    let mut out = String::new();
    out.push_str("# vtk DataFile Version 3.0\n");
    writeln!(out, "{title}").unwrap();
    out.push_str("ASCII\nDATASET UNSTRUCTURED_GRID\n");
    writeln!(out, "POINTS {} double", coords.len()).unwrap();
    for (_, [x, y]) in &coords {
        writeln!(out, "{x} {y} 0").unwrap();
    }
    match field.support() {
        Support::Volume => {
            let tris = mesh.triangles();
            writeln!(out, "CELLS {} {}", tris.len(), 4 * tris.len()).unwrap();
            for t in tris {
                writeln!(out, "3 {} {} {}", t[0], t[1], t[2]).unwrap();
            }
            writeln!(out, "CELL_TYPES {}", tris.len()).unwrap();
            for _ in tris {
                out.push_str("5\n");
            }
        }
        Support::Boundary(_) => {
            let n = coords.len();
            writeln!(out, "CELLS {} {}", n, 3 * n).unwrap();
            for i in 0..n {
                writeln!(out, "2 {} {}", i, (i + 1) % n).unwrap();
            }
            writeln!(out, "CELL_TYPES {n}").unwrap();
            for _ in 0..n {
                out.push_str("3\n");
            }
        }
    }
    writeln!(out, "POINT_DATA {}", coords.len()).unwrap();
    for c in 0..k {
        writeln!(out, "SCALARS c{c}_re double 1\nLOOKUP_TABLE default").unwrap();
        for row in 0..coords.len() {
            writeln!(out, "{}", field.value(row, c).re).unwrap();
        }
        writeln!(out, "SCALARS c{c}_im double 1\nLOOKUP_TABLE default").unwrap();
        for row in 0..coords.len() {
            writeln!(out, "{}", field.value(row, c).im).unwrap();
        }
    }
    Ok(out)
}

pub fn save_field_vtk(
    mesh: &Mesh,
    field: &Field,
    title: &str,
    path: impl AsRef<Path>,
) -> Result<()> {
    std::fs::write(path, field_to_vtk(mesh, field, title)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate_annulus, generate_disk};

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn trace_picks_loop_values() {
        let mesh = generate_annulus(1.0, 2.0, 0.5).unwrap();
        let field = Field::from_fn_volume(&mesh, 1, |x, y, _| c(x * x + y * y));
        let trace = field.boundary_trace(&mesh, BoundaryTag::Inner).unwrap();
        for v in trace.values() {
            assert!((v.re - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn csv_round_trip() {
        let mesh = generate_disk(1.0, 0.4).unwrap();
        let field = Field::from_fn_boundary(&mesh, BoundaryTag::Inner, 2, |x, y, c_| {
            Complex64::new(x + c_ as f64, y - 0.25)
        })
        .unwrap();
        let text = field_to_csv(&mesh, &field).unwrap();
        let back = field_from_csv(&mesh, Support::Boundary(BoundaryTag::Inner), &text).unwrap();
        assert_eq!(field, back);
    }

    #[test]
    fn noise_has_requested_level() {
        let mesh = generate_annulus(1.0, 2.0, 0.3).unwrap();
        let f = Field::from_fn_boundary(&mesh, BoundaryTag::Outer, 1, |x, _, _| c(4.0 * x / 2.0))
            .unwrap();
        let (noisy, delta) = add_boundary_noise(&mesh, &f, 0.01, 7).unwrap();
        let mut diff = noisy.clone();
        diff.add_scaled(&f, c(-1.0)).unwrap();
        let w = mesh.boundary_weights(BoundaryTag::Outer).unwrap();
        let norm = |g: &Field| -> f64 {
            w.iter()
                .enumerate()
                .map(|(i, wi)| g.value(i, 0).norm_sqr() * wi)
                .sum::<f64>()
                .sqrt()
        };
        assert!((norm(&diff) - delta).abs() < 1e-12 * delta.max(1.0));
        assert!((norm(&diff) / norm(&f) - 0.01).abs() < 1e-12);
        // determinism
        let (noisy2, _) = add_boundary_noise(&mesh, &f, 0.01, 7).unwrap();
        assert_eq!(noisy, noisy2);
    }

    #[test]
    fn transfer_matching_loops_is_exact() {
        let annulus = generate_annulus(1.0, 2.0, 0.3).unwrap();
        let n = annulus.boundary_nodes(BoundaryTag::Inner).unwrap().len();
        let disk = crate::mesh::generate_disk_with_boundary(1.0, 0.3, n).unwrap();
        let f = Field::from_fn_boundary(&annulus, BoundaryTag::Inner, 1, |x, y, _| {
            Complex64::new(3.0 * x, y)
        })
        .unwrap();
        let g = transfer_boundary(&annulus, &f, &disk, BoundaryTag::Inner).unwrap();
        assert_eq!(f.values(), g.values());
    }

    #[test]
    fn transfer_interpolates_between_loops() {
        let annulus = generate_annulus(1.0, 2.0, 0.11).unwrap();
        let disk = generate_disk(1.0, 0.2).unwrap();
        let f = Field::from_fn_boundary(&annulus, BoundaryTag::Inner, 1, |x, _, _| c(x)).unwrap();
        let g = transfer_boundary(&annulus, &f, &disk, BoundaryTag::Inner).unwrap();
        let nodes = disk.boundary_nodes(BoundaryTag::Inner).unwrap();
        for (i, &nd) in nodes.iter().enumerate() {
            let x = disk.vertices()[nd][0];
            assert!((g.value(i, 0).re - x).abs() < 5e-3, "node {i}");
        }
    }
}
