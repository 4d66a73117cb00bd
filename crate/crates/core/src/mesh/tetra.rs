use std::collections::HashMap;

use rayon::prelude::*;

use super::field::{OpacityField, FIELD_MAX};
use super::TriMesh;
use crate::scene::GaussianCloud;
use crate::{Error, Result, Vec3};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MeshConfig {
    pub resolution: usize,
    pub iso: f64,
    pub refine_iters: usize,
    /// Bounding-box inflation in units of the largest primitive scale.
    pub margin_sigmas: f64,
    /// Restricts the lattice to this box when set; otherwise the box comes
    /// from the primitive centers and `margin_sigmas`.
    pub region: Option<(Vec3, Vec3)>,
}

impl Default for MeshConfig {
    fn default() -> Self {
        MeshConfig {
            resolution: 128,
            iso: 0.5,
            refine_iters: 10,
            margin_sigmas: 3.0,
            region: None,
        }
    }
}

impl MeshConfig {
    pub fn validate(&self) -> Result<()> {
        if !(2..=1024).contains(&self.resolution) {
            return Err(Error::InvalidArgument(format!("grid resolution {} outside [2, 1024]", self.resolution)));
        }
        if !(self.iso > 0.0 && self.iso < FIELD_MAX) {
            return Err(Error::InvalidArgument(format!("iso level {} outside (0, {FIELD_MAX})", self.iso)));
        }
        if !(self.margin_sigmas >= 0.0) {
            return Err(Error::InvalidArgument("margin must be non-negative".into()));
        }
        if let Some((lo, hi)) = self.region {
            if !(lo.iter().chain(hi.iter()).all(|v| v.is_finite()) && (hi - lo).min() > 0.0) {
                return Err(Error::InvalidArgument("mesh region must be a non-empty finite box".into()));
            }
        }
        Ok(())
    }
}

/// Regular lattice of `(n + 1)³` nodes spanning a box.
#[derive(Clone, Debug)]
pub struct Lattice {
    pub lo: Vec3,
    pub cell: Vec3,
    pub n: usize,
}

impl Lattice {
    pub fn node_count(&self) -> usize {
        (self.n + 1).pow(3)
    }

    pub fn node_index(&self, i: usize, j: usize, k: usize) -> u32 {
        ((k * (self.n + 1) + j) * (self.n + 1) + i) as u32
    }

    pub fn node_position(&self, idx: u32) -> Vec3 {
        let m = self.n + 1;
        let idx = idx as usize;
        let (i, j, k) = (idx % m, (idx / m) % m, idx / (m * m));
        self.lo + Vec3::new(i as f64 * self.cell.x, j as f64 * self.cell.y, k as f64 * self.cell.z)
    }

    /// Largest cell side.
    pub fn max_cell(&self) -> f64 {
        self.cell.max()
    }
}

/// Bounds of the primitive centers grown by `margin_sigmas` times the largest
/// scale.
pub fn mesh_bounds(cloud: &GaussianCloud, margin_sigmas: f64) -> Option<(Vec3, Vec3)> {
    let (lo, hi) = cloud.center_bounds()?;
    let m = Vec3::repeat(margin_sigmas * cloud.max_scale());
    Some((lo - m, hi + m))
}

/// The six tetrahedra of a cube around its main diagonal, as corner indices
/// `x + 2y + 4z`. Adjacent cubes triangulate shared faces identically.
pub const CUBE_TETS: [[usize; 4]; 6] = [
    [0, 1, 3, 7],
    [0, 1, 5, 7],
    [0, 2, 3, 7],
    [0, 2, 6, 7],
    [0, 4, 5, 7],
    [0, 4, 6, 7],
];

/// Lattice edge from a node above the iso level to one at or below it.
type EdgeKey = (u32, u32);

struct PendingTriangle {
    edges: [EdgeKey; 3],
    /// Points from the inside of the tetrahedron towards its outside.
    outward: Vec3,
}

/// Bisects the segment `inside → outside` for the iso crossing. Returns the
/// midpoint of the final bracket and the bracket itself.
pub fn refine_edge(field: impl Fn(&Vec3) -> f64, inside: Vec3, outside: Vec3, iso: f64, iters: usize) -> (Vec3, (Vec3, Vec3)) {
    let (mut a, mut b) = (inside, outside);
    for _ in 0..iters {
        let m = (a + b) * 0.5;
        if field(&m) > iso {
            a = m;
        } else {
            b = m;
        }
    }
    ((a + b) * 0.5, (a, b))
}

fn tet_triangles(nodes: [u32; 4], values: [f64; 4], pos: [Vec3; 4], iso: f64, out: &mut Vec<PendingTriangle>) {
    let inside: Vec<usize> = (0..4).filter(|&v| values[v] > iso).collect();
    let outside: Vec<usize> = (0..4).filter(|&v| values[v] <= iso).collect();
    if inside.is_empty() || outside.is_empty() {
        return;
    }
    let centroid = |s: &[usize]| s.iter().map(|&v| pos[v]).sum::<Vec3>() / s.len() as f64;
    let outward = centroid(&outside) - centroid(&inside);
    let e = |i: usize, o: usize| (nodes[i], nodes[o]);
    match (inside.len(), outside.len()) {
        (1, 3) => out.push(PendingTriangle {
            edges: [e(inside[0], outside[0]), e(inside[0], outside[1]), e(inside[0], outside[2])],
            outward,
        }),
        (3, 1) => out.push(PendingTriangle {
            edges: [e(inside[0], outside[0]), e(inside[1], outside[0]), e(inside[2], outside[0])],
            outward,
        }),
        _ => {
            let (a, b, c, d) = (inside[0], inside[1], outside[0], outside[1]);
            let quad = [e(a, c), e(a, d), e(b, d), e(b, c)];
            out.push(PendingTriangle {
                edges: [quad[0], quad[1], quad[2]],
                outward,
            });
            out.push(PendingTriangle {
                edges: [quad[0], quad[2], quad[3]],
                outward,
            });
        }
    }
}

/// Extracts the `cfg.iso` level set of the max-opacity field with marching
/// tetrahedra over a uniform lattice. Triangles are wound so their normals
/// point away from the high-opacity side.
pub fn extract_mesh(cloud: &GaussianCloud, cfg: &MeshConfig) -> Result<TriMesh> {
    cfg.validate()?;
    let Some((lo, hi)) = mesh_bounds(cloud, cfg.margin_sigmas) else {
        return Ok(TriMesh::default());
    };
    let (lo, hi) = cfg.region.unwrap_or((lo, hi));
    let n = cfg.resolution;
    let cell = (hi - lo).map(|e| e.max(1e-12) / n as f64);
    let lattice = Lattice { lo, cell, n };
    let field = OpacityField::new(cloud, lo - cell, hi + cell, (n / 2).clamp(1, 64));

    let values: Vec<f64> = (0..lattice.node_count() as u32)
        .into_par_iter()
        .map(|idx| field.eval(&lattice.node_position(idx)))
        .collect();

    let pending: Vec<PendingTriangle> = (0..n)
        .into_par_iter()
        .map(|k| {
            let mut out = Vec::new();
            for j in 0..n {
                for i in 0..n {
                    let corners: [u32; 8] =
                        std::array::from_fn(|c| lattice.node_index(i + (c & 1), j + ((c >> 1) & 1), k + ((c >> 2) & 1)));
                    let above = corners.iter().filter(|&&c| values[c as usize] > cfg.iso).count();
                    if above == 0 || above == 8 {
                        continue;
                    }
                    for tet in CUBE_TETS {
                        let nodes = tet.map(|c| corners[c]);
                        let vals = nodes.map(|v| values[v as usize]);
                        let pos = nodes.map(|v| lattice.node_position(v));
                        tet_triangles(nodes, vals, pos, cfg.iso, &mut out);
                    }
                }
            }
            out
        })
        .flatten_iter()
        .collect();

    let mut ids: HashMap<EdgeKey, u32> = HashMap::new();
    let mut edges: Vec<EdgeKey> = Vec::new();
    let mut triangles: Vec<[u32; 3]> = pending
        .iter()
        .map(|t| {
            t.edges.map(|e| {
                *ids.entry(e).or_insert_with(|| {
                    edges.push(e);
                    (edges.len() - 1) as u32
                })
            })
        })
        .collect();
    let vertices: Vec<Vec3> = edges
        .par_iter()
        .map(|&(a, b)| {
            refine_edge(|x| field.eval(x), lattice.node_position(a), lattice.node_position(b), cfg.iso, cfg.refine_iters).0
        })
        .collect();

    for (tri, t) in triangles.iter_mut().zip(&pending) {
        let [p, q, r] = tri.map(|v| vertices[v as usize]);
        if (q - p).cross(&(r - p)).dot(&t.outward) < 0.0 {
            tri.swap(1, 2);
        }
    }
    let mut mesh = TriMesh::new(vertices, triangles);
    mesh.remove_degenerate(1e-12);
    Ok(mesh)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::Gaussian;

    fn blob() -> GaussianCloud {
        GaussianCloud::new(vec![Gaussian::isotropic(Vec3::zeros(), 1.0, 0.999, [0.5; 3])])
    }

    fn radius() -> f64 {
        (2.0 * (0.999f64 / 0.5).ln()).sqrt()
    }

    fn cfg(resolution: usize) -> MeshConfig {
        MeshConfig {
            resolution,
            ..Default::default()
        }
    }

    #[test]
    fn region_clips_the_lattice() {
        let full = extract_mesh(&blob(), &cfg(32)).unwrap();
        let region = (Vec3::new(-2.0, -2.0, 0.0), Vec3::new(2.0, 2.0, 2.0));
        let half = extract_mesh(&blob(), &MeshConfig { region: Some(region), ..cfg(32) }).unwrap();
        assert!(!half.triangles.is_empty());
        assert!(half.vertices.iter().all(|v| v.z >= -1e-9));
        assert!(full.vertices.iter().any(|v| v.z < -1.0));
        let bad = (Vec3::zeros(), Vec3::new(1.0, 0.0, 1.0));
        assert!(extract_mesh(&blob(), &MeshConfig { region: Some(bad), ..cfg(8) }).is_err());
    }

    #[test]
    fn analytic_radius() {
        assert!((radius() - 1.176559).abs() < 1e-6);
    }

    #[test]
    fn single_blob_vertices_on_level_set() {
        let mesh = extract_mesh(&blob(), &cfg(128)).unwrap();
        assert!(mesh.triangles.len() > 1000);
        let cell = 6.0 / 128.0;
        for v in &mesh.vertices {
            assert!((v.norm() - radius()).abs() <= cell / 1024.0, "{}", v.norm());
        }
    }

    #[test]
    fn single_blob_is_watertight_and_outward() {
        let mut mesh = extract_mesh(&blob(), &cfg(32)).unwrap();
        assert!(mesh.is_valid());
        assert_eq!(mesh.boundary_edge_count(), 0);
        let signed: f64 = (0..mesh.triangles.len())
            .map(|t| {
                let [a, b, c] = mesh.triangle(t);
                a.dot(&b.cross(&c)) / 6.0
            })
            .sum();
        let r = radius();
        let ball = 4.0 / 3.0 * std::f64::consts::PI * r * r * r;
        assert!((signed - ball).abs() / ball < 0.02, "{signed} vs {ball}");
        mesh.compute_normals();
        for (v, n) in mesh.vertices.iter().zip(mesh.normals.as_ref().unwrap()) {
            assert!(n.dot(&v.normalize()) > 0.9);
        }
    }

    fn deviation(mesh: &TriMesh) -> f64 {
        let r = radius();
        let verts = mesh.vertices.iter().map(|v| (v.norm() - r).abs());
        let centroids = (0..mesh.triangles.len()).map(|t| {
            let [a, b, c] = mesh.triangle(t);
            (((a + b + c) / 3.0).norm() - r).abs()
        });
        verts.chain(centroids).fold(0.0, f64::max)
    }

    #[test]
    fn refinement_is_monotone() {
        let coarse = deviation(&extract_mesh(&blob(), &cfg(64)).unwrap());
        let fine = deviation(&extract_mesh(&blob(), &cfg(128)).unwrap());
        assert!(fine <= coarse, "{fine} > {coarse}");
    }

    #[test]
    fn empty_cloud_gives_empty_mesh() {
        let mesh = extract_mesh(&GaussianCloud::default(), &cfg(16)).unwrap();
        assert!(mesh.vertices.is_empty() && mesh.triangles.is_empty());
    }

    #[test]
    fn faint_cloud_has_no_crossings() {
        let cloud = GaussianCloud::new(vec![Gaussian::isotropic(Vec3::zeros(), 1.0, 0.3, [0.5; 3])]);
        assert!(extract_mesh(&cloud, &cfg(16)).unwrap().is_empty());
    }

    #[test]
    fn deterministic() {
        let mut cloud = blob();
        cloud.push(Gaussian::isotropic(Vec3::new(1.5, 0.3, 0.0), 0.6, 0.9, [0.5; 3]));
        let a = extract_mesh(&cloud, &cfg(24)).unwrap();
        let b = extract_mesh(&cloud, &cfg(24)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.boundary_edge_count(), 0);
    }

    #[test]
    fn rejects_bad_config() {
        assert!(extract_mesh(&blob(), &MeshConfig { iso: 0.9995, ..cfg(8) }).is_err());
        assert!(extract_mesh(&blob(), &MeshConfig { iso: 0.0, ..cfg(8) }).is_err());
        assert!(extract_mesh(&blob(), &cfg(1)).is_err());
    }

    #[test]
    fn bisection_brackets_the_level() {
        let f = |x: &Vec3| (-x.norm_squared()).exp();
        let iso = 0.4;
        for iters in [0, 3, 10] {
            let (v, (a, b)) = refine_edge(f, Vec3::new(0.1, 0.0, 0.0), Vec3::new(2.0, 0.5, 0.0), iso, iters);
            assert!(f(&a) > iso && f(&b) <= iso);
            assert!(((b - a).norm() - 1.9f64.hypot(0.5) / 2f64.powi(iters as i32)).abs() < 1e-12);
            assert!((f(&v) - iso).abs() <= f(&a) - f(&b));
        }
    }
}
