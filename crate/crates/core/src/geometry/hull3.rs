//! Incremental 3-D convex hull (quickhull with conflict lists).

use nalgebra::{Point3, Vector3};
use thiserror::Error;

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
pub enum HullError {
    #[error("need at least 4 points for a 3-D hull, got {0}")]
    TooFewPoints(usize),
    #[error("input points are affinely dependent (flat)")]
    Degenerate,
}

#[derive(Debug, Clone)]
pub struct HullFace {
    /// Input point indices, counter-clockwise seen from outside.
    pub vertices: [usize; 3],
    /// Outward unit normal.
    pub normal: Vector3<f64>,
    /// `normal . x = offset` on the face plane.
    pub offset: f64,
}

#[derive(Debug, Clone)]
pub struct Hull3 {
    pub faces: Vec<HullFace>,
    /// Indices of input points that are hull vertices.
    pub vertex_ids: Vec<usize>,
}

struct Face {
    verts: [usize; 3],
    normal: Vector3<f64>,
    offset: f64,
    // neighbor[i] is the face across edge (verts[i], verts[(i+1)%3])
    neighbors: [usize; 3],
    outside: Vec<usize>,
    furthest: usize,
    furthest_dist: f64,
    alive: bool,
}

impl Face {
    fn dist(&self, p: &Point3<f64>) -> f64 {
        self.normal.dot(&p.coords) - self.offset
    }
}

fn plane(points: &[Point3<f64>], a: usize, b: usize, c: usize) -> (Vector3<f64>, f64) {
    let n = (points[b] - points[a]).cross(&(points[c] - points[a]));
    let n = n.normalize();
    (n, n.dot(&points[a].coords))
}

/// Convex hull of a 3-D point set. Interior and duplicate points are
/// ignored; flat inputs are reported as [`HullError::Degenerate`].
pub fn convex_hull(points: &[Point3<f64>]) -> Result<Hull3, HullError> {
    if points.len() < 4 {
        return Err(HullError::TooFewPoints(points.len()));
    }
    let mut lo = points[0];
    let mut hi = points[0];
    for p in points {
        for k in 0..3 {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    let diag = (hi - lo).norm();
    if diag == 0.0 {
        return Err(HullError::Degenerate);
    }
    let eps = 1e-10 * diag;

    // initial simplex from extreme points
    let (mut p0, mut p1) = (0, 0);
    let mut best = -1.0;
    // farthest pair among the 6 axis extremes
    let mut extremes = Vec::with_capacity(6);
    for k in 0..3 {
        let (mut imin, mut imax) = (0, 0);
        for (i, p) in points.iter().enumerate() {
            if p[k] < points[imin][k] {
                imin = i;
            }
            if p[k] > points[imax][k] {
                imax = i;
            }
        }
        extremes.push(imin);
        extremes.push(imax);
    }
    for &i in &extremes {
        for &j in &extremes {
            let d = (points[i] - points[j]).norm_squared();
            if d > best {
                best = d;
                p0 = i;
                p1 = j;
            }
        }
    }
    if best.sqrt() < eps {
        return Err(HullError::Degenerate);
    }
    let dir = (points[p1] - points[p0]).normalize();
    let mut p2 = 0;
    best = -1.0;
    for (i, p) in points.iter().enumerate() {
        let v = p - points[p0];
        let d = (v - dir * v.dot(&dir)).norm_squared();
        if d > best {
            best = d;
            p2 = i;
        }
    }
    if best.sqrt() < eps {
        return Err(HullError::Degenerate);
    }
    let (n, off) = plane(points, p0, p1, p2);
    let mut p3 = 0;
    best = -1.0;
    for (i, p) in points.iter().enumerate() {
        let d = (n.dot(&p.coords) - off).abs();
        if d > best {
            best = d;
            p3 = i;
        }
    }
    if best < eps {
        return Err(HullError::Degenerate);
    }

    // orient the simplex so face normals point away from its centroid
    let centroid = Point3::from(
        (points[p0].coords + points[p1].coords + points[p2].coords + points[p3].coords) / 4.0,
    );
    let mut faces: Vec<Face> = Vec::new();
    let simplex_faces = [[p0, p1, p2], [p0, p1, p3], [p0, p2, p3], [p1, p2, p3]];
    for verts in simplex_faces {
        let (mut n, mut off) = plane(points, verts[0], verts[1], verts[2]);
        let mut v = verts;
        if n.dot(&centroid.coords) - off > 0.0 {
            v.swap(1, 2);
            n = -n;
            off = -off;
        }
        faces.push(Face {
            verts: v,
            normal: n,
            offset: off,
            neighbors: [usize::MAX; 3],
            outside: Vec::new(),
            furthest: usize::MAX,
            furthest_dist: 0.0,
            alive: true,
        });
    }
    link_neighbors(&mut faces, &[0, 1, 2, 3]);

    // conflict lists
    let simplex_set = [p0, p1, p2, p3];
    for (i, p) in points.iter().enumerate() {
        if simplex_set.contains(&i) {
            continue;
        }
        assign_point(&mut faces, &[0, 1, 2, 3], i, p, eps);
    }

    let mut pending: Vec<usize> = (0..4).filter(|&f| !faces[f].outside.is_empty()).collect();
    while let Some(fi) = pending.pop() {
        if !faces[fi].alive || faces[fi].outside.is_empty() {
            continue;
        }
        let eye = faces[fi].furthest;
        let eye_p = points[eye];

        // visible set via BFS over neighbors
        let mut visible = vec![fi];
        let mut seen = std::collections::HashSet::new();
        seen.insert(fi);
        let mut stack = vec![fi];
        while let Some(f) = stack.pop() {
            for k in 0..3 {
                let nb = faces[f].neighbors[k];
                if nb != usize::MAX && faces[nb].alive && seen.insert(nb) {
                    if faces[nb].dist(&eye_p) > eps {
                        visible.push(nb);
                        stack.push(nb);
                    }
                }
            }
        }
        // horizon: directed edges of visible faces whose neighbor is hidden
        let visible_set: std::collections::HashSet<usize> = visible.iter().cloned().collect();
        let mut horizon: Vec<(usize, usize, usize)> = Vec::new(); // (a, b, hidden face)
        for &f in &visible {
            for k in 0..3 {
                let nb = faces[f].neighbors[k];
                if nb == usize::MAX || !visible_set.contains(&nb) {
                    let a = faces[f].verts[k];
                    let b = faces[f].verts[(k + 1) % 3];
                    horizon.push((a, b, nb));
                }
            }
        }

        // collect orphaned conflict points
        let mut orphans: Vec<usize> = Vec::new();
        for &f in &visible {
            orphans.append(&mut faces[f].outside);
            faces[f].alive = false;
        }

        // new faces (a, b, eye) preserve the outward winding
        let mut new_ids = Vec::with_capacity(horizon.len());
        let mut edge_map = std::collections::HashMap::new();
        for &(a, b, hidden) in &horizon {
            let (mut n, mut off) = plane(points, a, b, eye);
            // keep strictly outward; guard against tiny winding noise
            let inner = centroid.coords;
            if n.dot(&inner) - off > 0.0 {
                n = -n;
                off = -off;
            }
            let id = faces.len();
            faces.push(Face {
                verts: [a, b, eye],
                normal: n,
                offset: off,
                neighbors: [usize::MAX; 3],
                outside: Vec::new(),
                furthest: usize::MAX,
                furthest_dist: 0.0,
                alive: true,
            });
            // stitch to the hidden face across (a, b)
            if hidden != usize::MAX {
                faces[id].neighbors[0] = hidden;
                for k in 0..3 {
                    let ha = faces[hidden].verts[k];
                    let hb = faces[hidden].verts[(k + 1) % 3];
                    if ha == b && hb == a {
                        faces[hidden].neighbors[k] = id;
                    }
                }
            }
            edge_map.insert((b, eye), (id, 1));
            edge_map.insert((eye, a), (id, 2));
            new_ids.push(id);
        }
        // stitch new faces to each other around the horizon fan
        for &id in &new_ids {
            for k in 1..3 {
                let a = faces[id].verts[k];
                let b = faces[id].verts[(k + 1) % 3];
                if let Some(&(other, ok)) = edge_map.get(&(b, a)) {
                    faces[id].neighbors[k] = other;
                    faces[other].neighbors[ok] = id;
                }
            }
        }
        // redistribute orphans
        for i in orphans {
            if i == eye {
                continue;
            }
            assign_point(&mut faces, &new_ids, i, &points[i], eps);
        }
        for &id in &new_ids {
            if !faces[id].outside.is_empty() {
                pending.push(id);
            }
        }
    }

    let mut out_faces = Vec::new();
    let mut used = std::collections::BTreeSet::new();
    for f in &faces {
        if f.alive {
            out_faces.push(HullFace {
                vertices: f.verts,
                normal: f.normal,
                offset: f.offset,
            });
            used.extend(f.verts);
        }
    }
    Ok(Hull3 {
        faces: out_faces,
        vertex_ids: used.into_iter().collect(),
    })
}

fn assign_point(faces: &mut [Face], candidates: &[usize], i: usize, p: &Point3<f64>, eps: f64) {
    let mut best_face = usize::MAX;
    let mut best_dist = eps;
    for &f in candidates {
        if !faces[f].alive {
            continue;
        }
        let d = faces[f].dist(p);
        if d > best_dist {
            best_dist = d;
            best_face = f;
        }
    }
    if best_face != usize::MAX {
        let f = &mut faces[best_face];
        f.outside.push(i);
        if best_dist > f.furthest_dist {
            f.furthest_dist = best_dist;
            f.furthest = i;
        }
    }
}

fn link_neighbors(faces: &mut [Face], ids: &[usize]) {
    let mut edge_map: std::collections::HashMap<(usize, usize), (usize, usize)> =
        std::collections::HashMap::new();
    for &id in ids {
        for k in 0..3 {
            let a = faces[id].verts[k];
            let b = faces[id].verts[(k + 1) % 3];
            edge_map.insert((a, b), (id, k));
        }
    }
    for &id in ids {
        for k in 0..3 {
            let a = faces[id].verts[k];
            let b = faces[id].verts[(k + 1) % 3];
            if let Some(&(other, _)) = edge_map.get(&(b, a)) {
                faces[id].neighbors[k] = other;
            }
        }
    }
}
