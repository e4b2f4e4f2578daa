//! Closed triangle-mesh primitives.

use std::collections::HashMap;
use std::f64::consts::PI;

use crate::mesh::Point;

pub type RawMesh = (Vec<Point>, Vec<[usize; 3]>);

/// Icosahedron subdivided `level` times and projected onto the unit sphere.
/// Has `10 * 4^level + 2` vertices.
pub fn icosphere(level: u32) -> RawMesh {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut vertices: Vec<Point> = vec![
        [-1.0, t, 0.0],
        [1.0, t, 0.0],
        [-1.0, -t, 0.0],
        [1.0, -t, 0.0],
        [0.0, -1.0, t],
        [0.0, 1.0, t],
        [0.0, -1.0, -t],
        [0.0, 1.0, -t],
        [t, 0.0, -1.0],
        [t, 0.0, 1.0],
        [-t, 0.0, -1.0],
        [-t, 0.0, 1.0],
    ];
    let mut faces: Vec<[usize; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..level {
        let mut midpoint: HashMap<(usize, usize), usize> = HashMap::new();
        let mut mid = |a: usize, b: usize, vertices: &mut Vec<Point>| {
            let key = (a.min(b), a.max(b));
            *midpoint.entry(key).or_insert_with(|| {
                let (pa, pb) = (vertices[a], vertices[b]);
                vertices.push([
                    (pa[0] + pb[0]) / 2.0,
                    (pa[1] + pb[1]) / 2.0,
                    (pa[2] + pb[2]) / 2.0,
                ]);
                vertices.len() - 1
            })
        };
        let mut next = Vec::with_capacity(faces.len() * 4);
        for &[a, b, c] in &faces {
            let ab = mid(a, b, &mut vertices);
            let bc = mid(b, c, &mut vertices);
            let ca = mid(c, a, &mut vertices);
            next.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }
    for v in &mut vertices {
        let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        for x in v.iter_mut() {
            *x /= n;
        }
    }
    (vertices, faces)
}

/// Torus around the z axis on a `major x minor` parametric grid:
/// `major * minor` vertices and `2 * major * minor` faces.
pub fn torus(major: usize, minor: usize, ring_radius: f64, tube_radius: f64) -> RawMesh {
    let mut vertices = Vec::with_capacity(major * minor);
    for i in 0..major {
        let u = 2.0 * PI * i as f64 / major as f64;
        for j in 0..minor {
            let v = 2.0 * PI * j as f64 / minor as f64;
            let r = ring_radius + tube_radius * v.cos();
            vertices.push([r * u.cos(), r * u.sin(), tube_radius * v.sin()]);
        }
    }
    let idx = |i: usize, j: usize| (i % major) * minor + (j % minor);
    let mut faces = Vec::with_capacity(2 * major * minor);
    for i in 0..major {
        for j in 0..minor {
            let (a, b, c, d) = (idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1));
            faces.push([a, b, c]);
            faces.push([a, c, d]);
        }
    }
    (vertices, faces)
}

/// Axis-aligned cube `[-1, 1]^3` with `segments x segments` quads per side:
/// `6 * segments^2 + 2` vertices.
pub fn cube(segments: usize) -> RawMesh {
    let n = segments.max(1);
    let mut index: HashMap<[usize; 3], usize> = HashMap::new();
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    let coord = |k: usize| -1.0 + 2.0 * k as f64 / n as f64;
    let mut vid = |p: [usize; 3], vertices: &mut Vec<Point>| {
        *index.entry(p).or_insert_with(|| {
            vertices.push([coord(p[0]), coord(p[1]), coord(p[2])]);
            vertices.len() - 1
        })
    };
    // For each axis and side, the two in-plane axes ordered so quads face outward.
    for axis in 0..3 {
        let (ua, va) = ((axis + 1) % 3, (axis + 2) % 3);
        for side in [0, n] {
            for i in 0..n {
                for j in 0..n {
                    let corner = |di: usize, dj: usize| {
                        let mut p = [0; 3];
                        p[axis] = side;
                        p[ua] = i + di;
                        p[va] = j + dj;
                        p
                    };
                    let a = vid(corner(0, 0), &mut vertices);
                    let b = vid(corner(1, 0), &mut vertices);
                    let c = vid(corner(1, 1), &mut vertices);
                    let d = vid(corner(0, 1), &mut vertices);
                    if side == n {
                        faces.push([a, b, c]);
                        faces.push([a, c, d]);
                    } else {
                        faces.push([a, c, b]);
                        faces.push([a, d, c]);
                    }
                }
            }
        }
    }
    (vertices, faces)
}

/// Surface of revolution about the z axis. `profile` is a list of
/// `(radius, z)` points whose first and last entries lie on the axis; they
/// become single pole vertices and every interior point becomes a ring of
/// `segments` vertices.
pub fn revolve(profile: &[(f64, f64)], segments: usize) -> RawMesh {
    assert!(profile.len() >= 3 && segments >= 3);
    let rings = &profile[1..profile.len() - 1];
    let mut vertices = Vec::with_capacity(rings.len() * segments + 2);
    vertices.push([0.0, 0.0, profile[0].1]);
    for &(r, z) in rings {
        for s in 0..segments {
            let a = 2.0 * PI * s as f64 / segments as f64;
            vertices.push([r * a.cos(), r * a.sin(), z]);
        }
    }
    let top = vertices.len();
    vertices.push([0.0, 0.0, profile[profile.len() - 1].1]);

    let ring = |k: usize, s: usize| 1 + k * segments + s % segments;
    let mut faces = Vec::new();
    for s in 0..segments {
        faces.push([0, ring(0, s + 1), ring(0, s)]);
    }
    for k in 0..rings.len() - 1 {
        for s in 0..segments {
            let (a, b) = (ring(k, s), ring(k, s + 1));
            let (c, d) = (ring(k + 1, s + 1), ring(k + 1, s));
            faces.push([a, b, c]);
            faces.push([a, c, d]);
        }
    }
    let last = rings.len() - 1;
    for s in 0..segments {
        faces.push([top, ring(last, s), ring(last, s + 1)]);
    }
    (vertices, faces)
}

/// Capped cylinder of radius 1 spanning z in [-1, 1].
pub fn cylinder(segments: usize, height_steps: usize, cap_rings: usize) -> RawMesh {
    let c = cap_rings.max(1);
    let h = height_steps.max(1);
    let mut profile = vec![(0.0, -1.0)];
    profile.extend((1..=c).map(|k| (k as f64 / c as f64, -1.0)));
    profile.extend((1..=h).map(|k| (1.0, -1.0 + 2.0 * k as f64 / h as f64)));
    profile.extend((1..c).map(|k| ((c - k) as f64 / c as f64, 1.0)));
    profile.push((0.0, 1.0));
    revolve(&profile, segments)
}

/// Cone with unit base radius at z = -1 and apex at z = 1.
pub fn cone(segments: usize, height_steps: usize, cap_rings: usize) -> RawMesh {
    let c = cap_rings.max(1);
    let h = height_steps.max(1);
    let mut profile = vec![(0.0, -1.0)];
    profile.extend((1..=c).map(|k| (k as f64 / c as f64, -1.0)));
    profile.extend((1..h).map(|k| {
        let t = k as f64 / h as f64;
        (1.0 - t, -1.0 + 2.0 * t)
    }));
    profile.push((0.0, 1.0));
    revolve(&profile, segments)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::Mesh;
    use std::collections::HashMap;

    /// Every undirected edge is shared by exactly two faces, with opposite
    /// orientations.
    fn assert_closed_oriented((v, f): &RawMesh) {
        let mesh = Mesh::new(v.clone(), f.clone()).unwrap();
        mesh.validate().unwrap();
        let mut directed: HashMap<(usize, usize), usize> = HashMap::new();
        for t in f {
            for k in 0..3 {
                *directed.entry((t[k], t[(k + 1) % 3])).or_default() += 1;
            }
        }
        for (&(a, b), &n) in &directed {
            assert_eq!(n, 1, "directed edge {a}->{b} used {n} times");
            assert_eq!(directed.get(&(b, a)), Some(&1), "edge {a}-{b} is a boundary");
        }
        // Euler characteristic of a closed surface: V - E + F.
        let e = directed.len() / 2;
        let chi = v.len() as i64 - e as i64 + f.len() as i64;
        assert!(chi == 2 || chi == 0, "chi = {chi}");
    }

    /// Oracle: every subdivision adds one vertex per edge; a closed
    /// triangulation of genus 0 has E = 3F/2 and F = 20 * 4^n, so
    /// V = 12 + sum over levels of E_k.
    fn icosphere_vertex_count_oracle(level: u32) -> usize {
        let mut v = 12usize;
        let mut f = 20usize;
        for _ in 0..level {
            v += 3 * f / 2;
            f *= 4;
        }
        v
    }

    #[test]
    fn icosphere_counts() {
        for level in 0..4 {
            let m = icosphere(level);
            assert_eq!(m.0.len(), icosphere_vertex_count_oracle(level));
            assert_eq!(m.0.len(), 10 * 4usize.pow(level) + 2);
            assert_closed_oriented(&m);
        }
        assert_eq!(icosphere(2).0.len(), 162);
    }

    #[test]
    fn torus_counts() {
        let m = torus(20, 10, 1.0, 0.4);
        assert_eq!(m.0.len(), 200);
        assert_eq!(m.1.len(), 400);
        assert_closed_oriented(&m);
    }

    #[test]
    fn cube_counts() {
        for n in 1..5 {
            let m = cube(n);
            assert_eq!(m.0.len(), 6 * n * n + 2);
            assert_closed_oriented(&m);
        }
    }

    #[test]
    fn revolved_shapes_are_closed() {
        let c = cylinder(20, 9, 2);
        assert_eq!(c.0.len(), 20 * (2 * 2 + 9 - 1) + 2);
        assert_closed_oriented(&c);
        let k = cone(20, 9, 2);
        assert_eq!(k.0.len(), 20 * (2 + 9 - 1) + 2);
        assert_closed_oriented(&k);
    }

    #[test]
    fn outward_orientation() {
        // Signed volume is positive for outward-facing triangles.
        for m in [icosphere(1), cube(2), cylinder(12, 3, 1), cone(12, 3, 1)] {
            let vol: f64 = m
                .1
                .iter()
                .map(|t| {
                    let (a, b, c) = (m.0[t[0]], m.0[t[1]], m.0[t[2]]);
                    a[0] * (b[1] * c[2] - b[2] * c[1]) - a[1] * (b[0] * c[2] - b[2] * c[0])
                        + a[2] * (b[0] * c[1] - b[1] * c[0])
                })
                .sum();
            assert!(vol > 0.0);
        }
    }
}
