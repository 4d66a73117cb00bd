use crate::Vec3;

/// Indexed triangle mesh.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TriMesh {
    pub vertices: Vec<Vec3>,
    pub triangles: Vec<[u32; 3]>,
    pub normals: Option<Vec<Vec3>>,
}

impl TriMesh {
    pub fn new(vertices: Vec<Vec3>, triangles: Vec<[u32; 3]>) -> Self {
        TriMesh {
            vertices,
            triangles,
            normals: None,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    /// Axis-aligned bounds of the vertices; `None` when there are none.
    pub fn bounds(&self) -> Option<(Vec3, Vec3)> {
        let first = *self.vertices.first()?;
        Some(self.vertices.iter().fold((first, first), |(lo, hi), v| (lo.inf(v), hi.sup(v))))
    }

    pub fn triangle(&self, t: usize) -> [Vec3; 3] {
        self.triangles[t].map(|i| self.vertices[i as usize])
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangle(t);
        0.5 * (b - a).cross(&(c - a)).norm()
    }

    pub fn area(&self) -> f64 {
        (0..self.triangles.len()).map(|t| self.triangle_area(t)).sum()
    }

    /// Indices in range.
    pub fn is_valid(&self) -> bool {
        let n = self.vertices.len() as u32;
        self.triangles.iter().all(|t| t.iter().all(|&i| i < n))
    }

    /// Drops triangles with area at most `min_area` and vertices no triangle
    /// references, keeping the remaining order.
    pub fn remove_degenerate(&mut self, min_area: f64) {
        let keep: Vec<bool> = (0..self.triangles.len()).map(|t| self.triangle_area(t) > min_area).collect();
        let mut k = keep.iter();
        self.triangles.retain(|_| *k.next().expect("one flag per triangle"));
        self.compact();
    }

    fn compact(&mut self) {
        let mut remap = vec![u32::MAX; self.vertices.len()];
        let mut verts = Vec::new();
        let mut normals = self.normals.as_ref().map(|_| Vec::new());
        for t in &mut self.triangles {
            for i in t.iter_mut() {
                let old = *i as usize;
                if remap[old] == u32::MAX {
                    remap[old] = verts.len() as u32;
                    verts.push(self.vertices[old]);
                    if let (Some(out), Some(src)) = (normals.as_mut(), self.normals.as_ref()) {
                        out.push(src[old]);
                    }
                }
                *i = remap[old];
            }
        }
        self.vertices = verts;
        self.normals = normals;
    }

    /// Area-weighted vertex normals from the triangle winding.
    pub fn compute_normals(&mut self) {
        let mut n = vec![Vec3::zeros(); self.vertices.len()];
        for t in &self.triangles {
            let [a, b, c] = t.map(|i| self.vertices[i as usize]);
            let face = (b - a).cross(&(c - a));
            for &i in t {
                n[i as usize] += face;
            }
        }
        self.normals = Some(n.into_iter().map(|v| if v.norm() > 0.0 { v.normalize() } else { v }).collect());
    }

    /// Number of undirected edges used by a count other than two triangles.
    /// Zero for a closed manifold surface.
    pub fn boundary_edge_count(&self) -> usize {
        let mut counts = std::collections::BTreeMap::new();
        for t in &self.triangles {
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                *counts.entry((a.min(b), a.max(b))).or_insert(0usize) += 1;
            }
        }
        counts.values().filter(|&&c| c != 2).count()
    }
}
