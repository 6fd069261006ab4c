//! Vertex enumeration of a bounded n-dimensional H-polytope by the double
//! description method: start from a bounding box and clip one halfspace at a
//! time, tracking vertex/constraint incidence to find the cut edges.
//!
//! Coordinates are normalised to the unit box internally so tolerances are
//! scale-free. The caller supplies box bounds (usually from per-coordinate
//! LPs, which also certify boundedness).

use nalgebra::DVector;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum VertexEnumError {
    #[error("polytope is empty")]
    Empty,
    #[error("vertex budget of {budget} exceeded while clipping halfspace {row}")]
    BudgetExceeded { budget: usize, row: usize },
    #[error("bounding box is degenerate in coordinate {0}")]
    DegenerateBox(usize),
}

#[derive(Debug, Clone)]
pub struct VertexEnumOptions {
    /// Hard cap on the number of live vertices; exceeding it aborts with an
    /// error instead of returning a wrong answer.
    pub vertex_budget: usize,
    /// Incidence/feasibility tolerance in normalised (unit-box) coordinates.
    pub tol: f64,
}

impl Default for VertexEnumOptions {
    fn default() -> Self {
        Self {
            vertex_budget: 400_000,
            tol: 1e-9,
        }
    }
}

/// Dense bitset sized for (rows + box facets) incidence flags.
#[derive(Clone)]
struct Incidence(Vec<u64>);

impl Incidence {
    fn new(bits: usize) -> Self {
        Incidence(vec![0; bits.div_ceil(64)])
    }
    fn set(&mut self, i: usize) {
        self.0[i / 64] |= 1 << (i % 64);
    }
    fn and_count(&self, other: &Incidence) -> usize {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a & b).count_ones() as usize)
            .sum()
    }
    fn and(&self, other: &Incidence) -> Incidence {
        Incidence(self.0.iter().zip(&other.0).map(|(a, b)| a & b).collect())
    }
    fn or_assign(&mut self, other: &Incidence) {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a |= b;
        }
    }
}

struct Vert {
    y: DVector<f64>,
    inc: Incidence,
}

/// Enumerate all vertices of `{x : a_i' x <= b_i}` intersected with the
/// bounding box `[lo, hi]` (the box must strictly contain the polytope, so
/// box facets never support true vertices).
pub fn enumerate_vertices(
    rows: &[(DVector<f64>, f64)],
    lo: &DVector<f64>,
    hi: &DVector<f64>,
    opts: &VertexEnumOptions,
) -> Result<Vec<DVector<f64>>, VertexEnumError> {
    let d = lo.len();
    assert!(d >= 1);
    let m = rows.len();
    let nbits = m + 2 * d;
    let tol = opts.tol;

    // normalise to the unit box: x = center + half .* y, y in [-1, 1]
    let center = (lo + hi) * 0.5;
    let mut half = DVector::zeros(d);
    for k in 0..d {
        let h = (hi[k] - lo[k]) * 0.5;
        if !(h > 0.0) {
            return Err(VertexEnumError::DegenerateBox(k));
        }
        half[k] = h;
    }
    // rows in y coordinates, normalised to unit gradient
    let scaled: Vec<(DVector<f64>, f64)> = rows
        .iter()
        .map(|(a, b)| {
            let mut ay = DVector::zeros(d);
            for k in 0..d {
                ay[k] = a[k] * half[k];
            }
            let by = b - a.dot(&center);
            let n = ay.norm();
            if n > 0.0 {
                (ay / n, by / n)
            } else {
                (ay, by)
            }
        })
        .collect();

    // start from the box corners (incidence = the d touching box facets;
    // facet bit layout: m + 2k for y_k = -1, m + 2k + 1 for y_k = +1)
    let mut verts: Vec<Vert> = Vec::with_capacity(1 << d.min(20));
    for corner in 0..(1usize << d) {
        let mut y = DVector::zeros(d);
        let mut inc = Incidence::new(nbits);
        for k in 0..d {
            if corner >> k & 1 == 1 {
                y[k] = 1.0;
                inc.set(m + 2 * k + 1);
            } else {
                y[k] = -1.0;
                inc.set(m + 2 * k);
            }
        }
        verts.push(Vert { y, inc });
    }

    let row_dist = |row: usize, y: &DVector<f64>| -> f64 {
        let (a, b) = &scaled[row];
        a.dot(y) - b
    };
    // full incidence/feasibility scan of a candidate against everything
    // processed so far; returns None if the point is infeasible
    let full_incidence = |upto: usize, y: &DVector<f64>| -> Option<Incidence> {
        let mut inc = Incidence::new(nbits);
        for r in 0..upto {
            let dist = row_dist(r, y);
            if dist > tol {
                return None;
            }
            if dist.abs() <= tol {
                inc.set(r);
            }
        }
        for k in 0..d {
            let v = y[k];
            if v < -1.0 - tol || v > 1.0 + tol {
                return None;
            }
            if (v + 1.0).abs() <= tol {
                inc.set(m + 2 * k);
            }
            if (v - 1.0).abs() <= tol {
                inc.set(m + 2 * k + 1);
            }
        }
        Some(inc)
    };

    for row in 0..m {
        if scaled[row].0.norm() == 0.0 {
            // constant row: either trivially true or the polytope is empty
            if scaled[row].1 < -tol {
                return Err(VertexEnumError::Empty);
            }
            continue;
        }
        let dist: Vec<f64> = verts.iter().map(|v| row_dist(row, &v.y)).collect();
        let mut negs = Vec::new();
        let mut poss = Vec::new();
        for (i, &di) in dist.iter().enumerate() {
            if di > tol {
                poss.push(i);
            } else if di < -tol {
                negs.push(i);
            } else {
                verts[i].inc.set(row);
            }
        }
        if poss.is_empty() {
            continue;
        }
        if negs.is_empty() && poss.len() == verts.len() {
            return Err(VertexEnumError::Empty);
        }

        // candidate new vertices: cut points of edges between a kept and a
        // dropped vertex; an edge needs >= d-1 common active constraints
        let mut fresh: Vec<Vert> = Vec::new();
        for &i in &negs {
            for &j in &poss {
                if verts[i].inc.and_count(&verts[j].inc) < d - 1 {
                    continue;
                }
                let (di, dj) = (dist[i], dist[j]);
                let t = di / (di - dj); // in (0, 1)
                let y = &verts[i].y + (&verts[j].y - &verts[i].y) * t;
                // exhaustive re-check guards against false combinatorial edges
                let Some(mut inc) = full_incidence(row + 1, &y) else {
                    continue;
                };
                inc.or_assign(&verts[i].inc.and(&verts[j].inc));
                inc.set(row);
                // merge near-duplicates (degenerate vertices shared by many
                // edges), pooling their incidence sets
                let mut merged = false;
                for f in fresh.iter_mut() {
                    if (&f.y - &y).amax() <= 10.0 * tol {
                        f.inc.or_assign(&inc);
                        merged = true;
                        break;
                    }
                }
                if !merged {
                    fresh.push(Vert { y, inc });
                }
            }
        }
        // drop the violating vertices, keep negs/on, append fresh
        let mut keep: Vec<Vert> = Vec::with_capacity(verts.len() - poss.len() + fresh.len());
        for (i, v) in verts.into_iter().enumerate() {
            if dist[i] <= tol {
                keep.push(v);
            }
        }
        keep.append(&mut fresh);
        verts = keep;
        if verts.len() > opts.vertex_budget {
            return Err(VertexEnumError::BudgetExceeded {
                budget: opts.vertex_budget,
                row,
            });
        }
        if verts.is_empty() {
            return Err(VertexEnumError::Empty);
        }
    }

    // drop anything still resting on a box facet: with a strictly inflated
    // box those are artifacts of clipping order, not polytope vertices
    let polytope_verts: Vec<DVector<f64>> = verts
        .iter()
        .filter(|v| {
            (0..2 * d).all(|k| {
                let bit = m + k;
                v.inc.0[bit / 64] >> (bit % 64) & 1 == 0
            })
        })
        .map(|v| {
            let mut x = center.clone();
            for k in 0..d {
                x[k] += half[k] * v.y[k];
            }
            x
        })
        .collect();
    if polytope_verts.is_empty() {
        return Err(VertexEnumError::Empty);
    }
    Ok(polytope_verts)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dv(v: &[f64]) -> DVector<f64> {
        DVector::from_row_slice(v)
    }

    #[test]
    fn unit_cube_in_4d_has_16_vertices() {
        let mut rows = Vec::new();
        for k in 0..4 {
            let mut a = vec![0.0; 4];
            a[k] = 1.0;
            rows.push((dv(&a), 1.0));
            a[k] = -1.0;
            rows.push((dv(&a), 1.0));
        }
        let lo = dv(&[-2.0; 4]);
        let hi = dv(&[2.0; 4]);
        let verts =
            enumerate_vertices(&rows, &lo, &hi, &VertexEnumOptions::default()).unwrap();
        assert_eq!(verts.len(), 16);
        for v in &verts {
            for k in 0..4 {
                assert!((v[k].abs() - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn simplex_vertices() {
        // x >= 0 componentwise, sum x <= 1 (3-D): 4 vertices
        let mut rows = Vec::new();
        for k in 0..3 {
            let mut a = vec![0.0; 3];
            a[k] = -1.0;
            rows.push((dv(&a), 0.0));
        }
        rows.push((dv(&[1.0, 1.0, 1.0]), 1.0));
        let lo = dv(&[-1.0; 3]);
        let hi = dv(&[2.0; 3]);
        let verts =
            enumerate_vertices(&rows, &lo, &hi, &VertexEnumOptions::default()).unwrap();
        assert_eq!(verts.len(), 4);
    }

    #[test]
    fn empty_polytope_detected() {
        let rows = vec![(dv(&[1.0, 0.0]), -1.0), (dv(&[-1.0, 0.0]), -1.0)];
        let lo = dv(&[-3.0, -3.0]);
        let hi = dv(&[3.0, 3.0]);
        assert_eq!(
            enumerate_vertices(&rows, &lo, &hi, &VertexEnumOptions::default()).unwrap_err(),
            VertexEnumError::Empty
        );
    }

    #[test]
    fn budget_guard_fires() {
        // 6-D cross-polytope-ish cut collection blows past a tiny budget
        let mut rows = Vec::new();
        let d = 6;
        for s in 0..(1 << d) {
            let a: Vec<f64> = (0..d)
                .map(|k| if s >> k & 1 == 1 { 1.0 } else { -1.0 })
                .collect();
            rows.push((dv(&a), 1.0));
        }
        let lo = dv(&vec![-2.0; d]);
        let hi = dv(&vec![2.0; d]);
        let err = enumerate_vertices(
            &rows,
            &lo,
            &hi,
            &VertexEnumOptions {
                vertex_budget: 8,
                tol: 1e-9,
            },
        )
        .unwrap_err();
        assert!(matches!(err, VertexEnumError::BudgetExceeded { .. }));
    }

    #[test]
    fn rotated_cube_keeps_vertex_count() {
        // rotate the 3-D cube by an arbitrary rotation; still 8 vertices
        let rot = nalgebra::Rotation3::from_euler_angles(0.3, -0.7, 1.1);
        let mut rows = Vec::new();
        for k in 0..3 {
            for s in [-1.0, 1.0] {
                let mut a = nalgebra::Vector3::zeros();
                a[k] = s;
                let ar = rot * a;
                rows.push((dv(ar.as_slice()), 1.0));
            }
        }
        let lo = dv(&[-3.0; 3]);
        let hi = dv(&[3.0; 3]);
        let verts =
            enumerate_vertices(&rows, &lo, &hi, &VertexEnumOptions::default()).unwrap();
        assert_eq!(verts.len(), 8);
        for v in &verts {
            assert!((v.norm() - 3.0f64.sqrt()).abs() < 1e-8);
        }
    }
}
