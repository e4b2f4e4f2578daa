//! Triangle meshes: positions, faces and the vertex adjacency that random
//! walks travel along.

mod io;

pub use io::{
    load_mesh, load_mesh_with_attributes, read_mesh, save_mesh, save_mesh_with_attributes,
    write_mesh, MeshFormat, VertexAttributes,
};

use crate::error::{Error, Result};

pub type Point = [f64; 3];

/// An indexed triangle mesh with cached vertex adjacency.
///
/// Faces are fixed at construction; vertex positions may be moved (the attack
/// does exactly that) without invalidating the adjacency.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    vertices: Vec<Point>,
    faces: Vec<[usize; 3]>,
    adjacency: Vec<Vec<usize>>,
}

impl Mesh {
    /// Builds a mesh, rejecting out-of-range or repeated face indices.
    pub fn new(vertices: Vec<Point>, faces: Vec<[usize; 3]>) -> Result<Self> {
        let n = vertices.len();
        for (fi, face) in faces.iter().enumerate() {
            for (k, &idx) in face.iter().enumerate() {
                if idx >= n {
                    return Err(Error::Index {
                        face: fi,
                        index: idx,
                        vertex_count: n,
                    });
                }
                if face[..k].contains(&idx) {
                    return Err(Error::RepeatedVertex { face: fi, index: idx });
                }
            }
        }
        let adjacency = build_adjacency(n, &faces);
        Ok(Mesh {
            vertices,
            faces,
            adjacency,
        })
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    /// Mutable access to positions. Topology cannot be changed through this.
    pub fn vertices_mut(&mut self) -> &mut [Point] {
        &mut self.vertices
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adjacency[v]
    }

    pub fn adjacency(&self) -> &[Vec<usize>] {
        &self.adjacency
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn face_count(&self) -> usize {
        self.faces.len()
    }

    /// Returns a copy with the same faces and new positions.
    pub fn with_vertices(&self, vertices: Vec<Point>) -> Result<Self> {
        if vertices.len() != self.vertices.len() {
            return Err(Error::dims(
                format!("{} vertices", self.vertices.len()),
                format!("{} vertices", vertices.len()),
            ));
        }
        Ok(Mesh {
            vertices,
            faces: self.faces.clone(),
            adjacency: self.adjacency.clone(),
        })
    }

    /// Vertex centroid and largest distance from it.
    pub fn unit_sphere_frame(&self) -> Result<SphereFrame> {
        if self.vertices.is_empty() {
            return Err(Error::EmptyMesh("vertices"));
        }
        let n = self.vertices.len() as f64;
        let mut c = [0.0; 3];
        for v in &self.vertices {
            for k in 0..3 {
                c[k] += v[k];
            }
        }
        for ck in &mut c {
            *ck /= n;
        }
        let radius = self
            .vertices
            .iter()
            .map(|v| norm(sub(*v, c)))
            .fold(0.0, f64::max);
        if !(radius > 1e-12) || !radius.is_finite() {
            return Err(Error::DegenerateMesh(format!(
                "all vertices coincide (radius {radius})"
            )));
        }
        Ok(SphereFrame {
            center: c,
            radius,
        })
    }

    /// Largest vertex distance from the origin.
    pub fn max_radius(&self) -> f64 {
        self.vertices.iter().map(|v| norm(*v)).fold(0.0, f64::max)
    }

    /// Centers the vertex centroid at the origin and scales the farthest
    /// vertex to distance 1.
    pub fn normalize_unit_sphere(&self) -> Result<Mesh> {
        let frame = self.unit_sphere_frame()?;
        Ok(frame.apply(self))
    }

    /// Checks every structural invariant; used heavily in tests.
    pub fn validate(&self) -> Result<()> {
        let n = self.vertices.len();
        for (fi, face) in self.faces.iter().enumerate() {
            for (k, &idx) in face.iter().enumerate() {
                if idx >= n {
                    return Err(Error::Index {
                        face: fi,
                        index: idx,
                        vertex_count: n,
                    });
                }
                if face[..k].contains(&idx) {
                    return Err(Error::RepeatedVertex { face: fi, index: idx });
                }
            }
        }
        if self.adjacency.len() != n {
            return Err(Error::TopologyMismatch("adjacency length".into()));
        }
        let expected = build_adjacency(n, &self.faces);
        if expected != self.adjacency {
            return Err(Error::TopologyMismatch(
                "adjacency does not match faces".into(),
            ));
        }
        for (i, nbrs) in self.adjacency.iter().enumerate() {
            for &j in nbrs {
                if self.adjacency[j].binary_search(&i).is_err() {
                    return Err(Error::TopologyMismatch(format!(
                        "adjacency not symmetric between {i} and {j}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Connected components of the edge graph, as lists of vertex indices.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let n = self.vertices.len();
        let mut seen = vec![false; n];
        let mut out = Vec::new();
        for s in 0..n {
            if seen[s] {
                continue;
            }
            seen[s] = true;
            let mut stack = vec![s];
            let mut comp = Vec::new();
            while let Some(v) = stack.pop() {
                comp.push(v);
                for &u in &self.adjacency[v] {
                    if !seen[u] {
                        seen[u] = true;
                        stack.push(u);
                    }
                }
            }
            comp.sort_unstable();
            out.push(comp);
        }
        out
    }

    /// Order-independent 64-bit digest of the face list.
    pub fn topology_hash(&self) -> u64 {
        let mut h = fnv_start();
        h = fnv_u64(h, self.vertices.len() as u64);
        for f in &self.faces {
            for &i in f {
                h = fnv_u64(h, i as u64);
            }
        }
        h
    }

    /// Digest of faces and exact vertex bit patterns.
    pub fn fingerprint(&self) -> u64 {
        let mut h = self.topology_hash();
        for v in &self.vertices {
            for x in v {
                h = fnv_u64(h, x.to_bits());
            }
        }
        h
    }
}

/// A similarity transform mapping a mesh into its unit sphere.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SphereFrame {
    pub center: Point,
    pub radius: f64,
}

impl SphereFrame {
    pub fn map_point(&self, p: Point) -> Point {
        let d = sub(p, self.center);
        [d[0] / self.radius, d[1] / self.radius, d[2] / self.radius]
    }

    pub fn apply(&self, mesh: &Mesh) -> Mesh {
        Mesh {
            vertices: mesh.vertices.iter().map(|&p| self.map_point(p)).collect(),
            faces: mesh.faces.clone(),
            adjacency: mesh.adjacency.clone(),
        }
    }
}

/// A mesh with its class label and a stable identifier.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledMesh {
    pub mesh: Mesh,
    pub label: usize,
    pub source_id: String,
}

/// Sorted, deduplicated neighbor lists for the undirected edges of `faces`.
pub fn build_adjacency(vertex_count: usize, faces: &[[usize; 3]]) -> Vec<Vec<usize>> {
    let mut adj = vec![Vec::new(); vertex_count];
    for f in faces {
        for k in 0..3 {
            let a = f[k];
            let b = f[(k + 1) % 3];
            adj[a].push(b);
            adj[b].push(a);
        }
    }
    for nbrs in &mut adj {
        nbrs.sort_unstable();
        nbrs.dedup();
    }
    adj
}

pub(crate) fn sub(a: Point, b: Point) -> Point {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub(crate) fn norm(a: Point) -> f64 {
    (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt()
}

pub(crate) fn cross(a: Point, b: Point) -> Point {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

pub(crate) fn fnv_start() -> u64 {
    0xcbf2_9ce4_8422_2325
}

pub(crate) fn fnv_u64(mut h: u64, x: u64) -> u64 {
    for b in x.to_le_bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

pub(crate) fn fnv_str(mut h: u64, s: &str) -> u64 {
    for b in s.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}
