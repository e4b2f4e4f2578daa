//! Random walks along mesh edges.
//!
//! A walk starts at a uniformly chosen vertex and repeatedly steps to a
//! uniformly chosen *unvisited* neighbor of the current vertex. When every
//! neighbor has already been visited it steps to a uniform neighbor anyway
//! (a revisit). Only a vertex with no neighbors at all forces a jump, which
//! lands on a uniform unvisited vertex.

use rand::Rng;

use crate::error::{Error, Result};
use crate::mesh::{Mesh, Point};

/// Walk length used when none is configured: `min(200, |V|)`.
pub fn default_walk_length(mesh: &Mesh) -> usize {
    mesh.vertex_count().clamp(1, 200)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Walk {
    pub vertices: Vec<usize>,
    /// `jumps[t]` is true when step `t` was not an edge traversal.
    /// `jumps[0]` is always false.
    pub jumps: Vec<bool>,
    /// Positions of `vertices` at extraction time.
    pub coords: Vec<Point>,
}

impl Walk {
    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn start(&self) -> usize {
        self.vertices[0]
    }
}

/// Reusable walk generator; keeps its visited buffer between walks.
#[derive(Debug, Default)]
pub struct Walker {
    stamp: Vec<u32>,
    generation: u32,
    scratch: Vec<usize>,
}

impl Walker {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn extract<R: Rng + ?Sized>(
        &mut self,
        mesh: &Mesh,
        length: usize,
        rng: &mut R,
    ) -> Result<Walk> {
        let n = mesh.vertex_count();
        if n == 0 {
            return Err(Error::EmptyMesh("vertices"));
        }
        if length == 0 {
            return Err(Error::Config("walk length must be at least 1".into()));
        }
        if self.stamp.len() != n || self.generation == u32::MAX {
            self.stamp = vec![0; n];
            self.generation = 0;
        }
        self.generation += 1;
        let g = self.generation;

        let mut vertices = Vec::with_capacity(length);
        let mut jumps = Vec::with_capacity(length);
        let mut current = rng.random_range(0..n);
        let mut visited_count = 1;
        self.stamp[current] = g;
        vertices.push(current);
        jumps.push(false);

        while vertices.len() < length {
            let nbrs = mesh.neighbors(current);
            self.scratch.clear();
            self.scratch
                .extend(nbrs.iter().copied().filter(|&u| self.stamp[u] != g));
            let (next, jumped) = if !self.scratch.is_empty() {
                (self.scratch[rng.random_range(0..self.scratch.len())], false)
            } else if !nbrs.is_empty() {
                (nbrs[rng.random_range(0..nbrs.len())], false)
            } else if visited_count < n {
                // Isolated vertex: jump to the k-th unvisited vertex.
                let k = rng.random_range(0..n - visited_count);
                let target = (0..n).filter(|&u| self.stamp[u] != g).nth(k).unwrap();
                (target, true)
            } else {
                (rng.random_range(0..n), true)
            };
            if self.stamp[next] != g {
                self.stamp[next] = g;
                visited_count += 1;
            }
            vertices.push(next);
            jumps.push(jumped);
            current = next;
        }

        let coords = vertices.iter().map(|&v| mesh.vertices()[v]).collect();
        Ok(Walk {
            vertices,
            jumps,
            coords,
        })
    }
}

pub fn extract_walk<R: Rng + ?Sized>(mesh: &Mesh, length: usize, rng: &mut R) -> Result<Walk> {
    Walker::new().extract(mesh, length, rng)
}

/// `count` independent walks drawn from one generator.
pub fn walk_batch<R: Rng + ?Sized>(
    mesh: &Mesh,
    count: usize,
    length: usize,
    rng: &mut R,
) -> Result<Vec<Walk>> {
    if mesh.vertex_count() == 0 {
        return Err(Error::EmptyMesh("vertices"));
    }
    let mut walker = Walker::new();
    (0..count).map(|_| walker.extract(mesh, length, rng)).collect()
}

/// Checks edge validity and the unvisited-preference rule for a walk
/// against the mesh it was drawn from. Returns a description of the first
/// violation.
pub fn check_walk(mesh: &Mesh, walk: &Walk) -> std::result::Result<(), String> {
    if walk.is_empty() || walk.jumps.len() != walk.len() || walk.coords.len() != walk.len() {
        return Err("inconsistent walk lengths".into());
    }
    if walk.jumps[0] {
        return Err("first step flagged as jump".into());
    }
    let mut visited = vec![false; mesh.vertex_count()];
    visited[walk.vertices[0]] = true;
    for t in 1..walk.len() {
        let (prev, cur) = (walk.vertices[t - 1], walk.vertices[t]);
        let nbrs = mesh.neighbors(prev);
        if walk.jumps[t] {
            if !nbrs.is_empty() {
                return Err(format!("step {t}: jumped away from non-isolated vertex {prev}"));
            }
        } else {
            if nbrs.binary_search(&cur).is_err() {
                return Err(format!("step {t}: {prev} -> {cur} is not an edge"));
            }
            let has_unvisited = nbrs.iter().any(|&u| !visited[u]);
            if has_unvisited && visited[cur] {
                return Err(format!("step {t}: revisited {cur} while {prev} had unvisited neighbors"));
            }
        }
        visited[cur] = true;
    }
    for (t, &v) in walk.vertices.iter().enumerate() {
        if walk.coords[t] != mesh.vertices()[v] {
            return Err(format!("coords[{t}] does not match vertex {v}"));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::fixtures::{tetrahedron, two_triangles};
    use crate::seed;
    use crate::synth::primitives;
    use proptest::prelude::*;

    #[test]
    fn tetrahedron_walk_covers_all_vertices() {
        let m = tetrahedron();
        for s in 0..50 {
            let w = extract_walk(&m, 4, &mut seed::rng(s)).unwrap();
            let mut v = w.vertices.clone();
            v.sort_unstable();
            assert_eq!(v, vec![0, 1, 2, 3]);
            assert!(w.jumps.iter().all(|j| !j));
            check_walk(&m, &w).unwrap();
        }
    }

    #[test]
    fn length_one_is_just_the_start() {
        let m = tetrahedron();
        let w = extract_walk(&m, 1, &mut seed::rng(3)).unwrap();
        assert_eq!(w.len(), 1);
        assert_eq!(w.jumps, vec![false]);
        assert_eq!(w.coords[0], m.vertices()[w.start()]);
    }

    #[test]
    fn empty_mesh_errors() {
        let m = Mesh::new(vec![], vec![]).unwrap();
        assert!(matches!(
            extract_walk(&m, 3, &mut seed::rng(0)),
            Err(Error::EmptyMesh(_))
        ));
        assert!(matches!(
            walk_batch(&m, 0, 3, &mut seed::rng(0)),
            Err(Error::EmptyMesh(_))
        ));
    }

    /// On two disjoint triangles the walk exhausts its own triangle after two
    /// steps and then revisits; it never jumps to the other component.
    #[test]
    fn disjoint_triangles_stay_in_start_component() {
        let m = two_triangles();
        for s in 0..100 {
            let w = extract_walk(&m, 6, &mut seed::rng(s)).unwrap();
            check_walk(&m, &w).unwrap();
            assert_eq!(w.jumps.iter().filter(|&&j| j).count(), 0);
            let comp = w.start() / 3;
            assert!(w.vertices.iter().all(|&v| v / 3 == comp));
            let mut first3 = w.vertices[..3].to_vec();
            first3.sort_unstable();
            first3.dedup();
            assert_eq!(first3.len(), 3);
        }
    }

    /// Hand-traced transcript for a fixed seed: after visiting its three
    /// vertices, the walk bounces between neighbors of the same triangle.
    #[test]
    fn disjoint_triangles_transcript() {
        let m = two_triangles();
        let w = extract_walk(&m, 6, &mut seed::rng(42)).unwrap();
        let t = &w.vertices;
        let base = t[0] / 3 * 3;
        let tri: Vec<usize> = (base..base + 3).collect();
        assert!(tri.contains(&t[1]) && tri.contains(&t[2]));
        assert_ne!(t[0], t[1]);
        assert!(t[2] != t[0] && t[2] != t[1]);
        for k in 3..6 {
            assert_ne!(t[k], t[k - 1]);
            assert!(tri.contains(&t[k]));
        }
    }

    #[test]
    fn isolated_start_jumps_to_unvisited() {
        let m = Mesh::new(
            vec![[0.0; 3], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [3.0, 3.0, 3.0]],
            vec![[0, 1, 2]],
        )
        .unwrap();
        let mut seen_jump = false;
        for s in 0..64 {
            let w = extract_walk(&m, 4, &mut seed::rng(s)).unwrap();
            check_walk(&m, &w).unwrap();
            if w.start() == 3 {
                assert!(w.jumps[1]);
                assert_ne!(w.vertices[1], 3);
                assert_eq!(w.jumps.iter().filter(|&&j| j).count(), 1);
                seen_jump = true;
            } else {
                assert!(w.jumps.iter().all(|j| !j));
            }
        }
        assert!(seen_jump);
    }

    #[test]
    fn batch_is_deterministic() {
        let (v, f) = primitives::icosphere(2);
        let m = Mesh::new(v, f).unwrap();
        assert!(walk_batch(&m, 0, 10, &mut seed::rng(1)).unwrap().is_empty());
        let a = walk_batch(&m, 8, 50, &mut seed::rng(1)).unwrap();
        let b = walk_batch(&m, 8, 50, &mut seed::rng(1)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 8);
    }

    /// Pearson chi-square test of uniform start vertices; the 0.99 quantile
    /// for 161 degrees of freedom is about 206.
    #[test]
    fn start_vertices_are_uniform() {
        let (v, f) = primitives::icosphere(2);
        let m = Mesh::new(v, f).unwrap();
        let n = m.vertex_count();
        let mut counts = vec![0usize; n];
        let mut rng = seed::rng(2024);
        let batches = 2025;
        for _ in 0..batches {
            for w in walk_batch(&m, 8, 2, &mut rng).unwrap() {
                counts[w.start()] += 1;
            }
        }
        let expected = (batches * 8) as f64 / n as f64;
        let chi2: f64 = counts
            .iter()
            .map(|&c| (c as f64 - expected).powi(2) / expected)
            .sum();
        assert!(chi2 < 206.0, "chi2 = {chi2}");
    }

    #[test]
    fn full_length_walks_cover_most_vertices() {
        let (v, f) = primitives::torus(16, 10, 1.0, 0.4);
        let m = Mesh::new(v, f).unwrap();
        let n = m.vertex_count();
        let mut walker = Walker::new();
        let mut good = 0;
        for s in 0..200 {
            let w = walker.extract(&m, n, &mut seed::rng(s)).unwrap();
            let mut d = w.vertices.clone();
            d.sort_unstable();
            d.dedup();
            if d.len() * 2 > n {
                good += 1;
            }
        }
        assert!(good >= 198, "{good}/200");
    }

    proptest! {
        #[test]
        fn walks_respect_edges_and_preference(s in any::<u64>(), len in 1usize..300, fam in 0usize..5) {
            let (v, f) = crate::synth::Family::ALL[fam].base_mesh(2);
            let m = Mesh::new(v, f).unwrap();
            let w = extract_walk(&m, len, &mut seed::rng(s)).unwrap();
            prop_assert_eq!(w.len(), len);
            prop_assert!(check_walk(&m, &w).is_ok());
        }
    }
}
