//! Convex polytope geometry in 3-D force space.

pub mod hull3;
pub mod vertex_enum;

use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::solver::{self, ConicProblem, SolveStatus, SolverTolerances};
pub use hull3::{convex_hull, Hull3, HullError};
pub use vertex_enum::{enumerate_vertices, VertexEnumError, VertexEnumOptions};

/// Facet merge tolerance: triangles whose unit normals and offsets agree to
/// this are one facet.
pub const FACET_MERGE_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("direction count must be >= 1")]
    NoDirections,
    #[error("polytope is empty")]
    Empty,
    #[error("polytope is unbounded")]
    Unbounded,
    #[error("polytope is degenerate (no interior)")]
    Degenerate,
    #[error(transparent)]
    Hull(#[from] HullError),
}

/// A halfspace `normal . x <= offset` with unit normal.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Halfspace3 {
    pub normal: Vector3<f64>,
    pub offset: f64,
}

impl Halfspace3 {
    /// Normalise an arbitrary row `a . x <= b`; rows with zero gradient are
    /// rejected by the polytope invariants upstream.
    pub fn from_row(a: Vector3<f64>, b: f64) -> Self {
        let n = a.norm();
        Halfspace3 {
            normal: a / n,
            offset: b / n,
        }
    }

    pub fn signed_distance(&self, p: &Point3<f64>) -> f64 {
        self.normal.dot(&p.coords) - self.offset
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    Exact,
    Fibonacci(usize),
}

/// Bounded convex polytope carrying both representations.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Polytope3 {
    pub vertices: Vec<Point3<f64>>,
    pub halfspaces: Vec<Halfspace3>,
    pub provenance: Provenance,
}

impl Polytope3 {
    /// Hull of a point cloud; interior points are dropped.
    pub fn from_vertices(
        points: &[Point3<f64>],
        provenance: Provenance,
    ) -> Result<Self, GeometryError> {
        let hull = convex_hull(points)?;
        let halfspaces = merge_facets(&hull);
        let vertices = hull.vertex_ids.iter().map(|&i| points[i]).collect();
        Ok(Polytope3 {
            vertices,
            halfspaces,
            provenance,
        })
    }

    /// Vertex enumeration of an H-polytope (empty/unbounded reported
    /// distinctly); the stored facets are the minimal description recovered
    /// from the vertex hull.
    pub fn from_halfspaces(
        rows: &[(Vector3<f64>, f64)],
        provenance: Provenance,
    ) -> Result<Self, GeometryError> {
        let vertices = hrep_to_vrep(rows)?;
        Self::from_vertices(&vertices, provenance)
    }

    pub fn contains(&self, p: &Point3<f64>, tol: f64) -> bool {
        self.halfspaces
            .iter()
            .all(|h| h.signed_distance(p) <= tol)
    }

    /// Check the dual-representation invariants: every vertex satisfies every
    /// halfspace and is not strictly interior to all of them.
    pub fn max_vertex_violation(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for v in &self.vertices {
            for h in &self.halfspaces {
                worst = worst.max(h.signed_distance(v));
            }
        }
        worst
    }

    /// One vertex per row: `x,y,z`.
    pub fn write_vertex_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "x,y,z")?;
        for v in &self.vertices {
            writeln!(w, "{},{},{}", v.x, v.y, v.z)?;
        }
        Ok(())
    }

    /// One halfspace per row: `nx,ny,nz,offset`.
    pub fn write_halfspace_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "nx,ny,nz,offset")?;
        for h in &self.halfspaces {
            writeln!(
                w,
                "{},{},{},{}",
                h.normal.x, h.normal.y, h.normal.z, h.offset
            )?;
        }
        Ok(())
    }

    /// Wavefront-style triangle mesh for visual inspection.
    pub fn write_obj<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        let hull = convex_hull(&self.vertices).map_err(std::io::Error::other)?;
        writeln!(w, "# polytope mesh ({} vertices)", self.vertices.len())?;
        for v in &self.vertices {
            writeln!(w, "v {} {} {}", v.x, v.y, v.z)?;
        }
        for f in &hull.faces {
            writeln!(
                w,
                "f {} {} {}",
                f.vertices[0] + 1,
                f.vertices[1] + 1,
                f.vertices[2] + 1
            )?;
        }
        Ok(())
    }
}

/// Deterministic golden-angle lattice on the unit sphere:
/// `z_k = 1 - (2k + 1)/n`, azimuth `k * pi (3 - sqrt 5)`.
pub fn fibonacci_sphere(n: usize) -> Result<Vec<Vector3<f64>>, GeometryError> {
    if n == 0 {
        return Err(GeometryError::NoDirections);
    }
    let golden_angle = std::f64::consts::PI * (3.0 - 5.0f64.sqrt());
    let mut dirs = Vec::with_capacity(n);
    for k in 0..n {
        let z = 1.0 - (2.0 * k as f64 + 1.0) / n as f64;
        let r = (1.0 - z * z).max(0.0).sqrt();
        let phi = golden_angle * k as f64;
        let v = Vector3::new(r * phi.cos(), r * phi.sin(), z);
        dirs.push(v / v.norm());
    }
    Ok(dirs)
}

/// Result of the origin-centred Chebyshev radius (largest origin-centred
/// ball inside the polytope): `rho = min_i b_i / ||a_i||`.
#[derive(Debug, Clone, Copy)]
pub struct ChebyshevOrigin {
    pub rho: f64,
    /// Row attaining the minimum.
    pub limiting_row: usize,
    /// Row certifying origin infeasibility, if any (then `rho = 0`).
    pub violated_row: Option<usize>,
}

/// Origin-centred inscribed-ball radius over raw rows `a . x <= b`.
pub fn chebyshev_origin(rows: &[(Vector3<f64>, f64)]) -> ChebyshevOrigin {
    let mut rho = f64::INFINITY;
    let mut limiting = 0;
    for (i, (a, b)) in rows.iter().enumerate() {
        if *b < 0.0 {
            return ChebyshevOrigin {
                rho: 0.0,
                limiting_row: i,
                violated_row: Some(i),
            };
        }
        let d = b / a.norm();
        if d < rho {
            rho = d;
            limiting = i;
        }
    }
    ChebyshevOrigin {
        rho,
        limiting_row: limiting,
        violated_row: None,
    }
}

/// Same radius via an explicit LP (`max rho s.t. rho ||a_i|| <= b_i`); used as
/// a cross-check of the enumeration formula.
pub fn chebyshev_origin_lp(rows: &[(Vector3<f64>, f64)]) -> Option<f64> {
    let mut p = ConicProblem::new(1);
    p.tolerances = SolverTolerances::tight();
    p.maximize(0, 1.0);
    for (a, b) in rows {
        p.add_leq(vec![(0, a.norm())], *b);
    }
    let out = solver::solve_lp(&p);
    match out.status {
        SolveStatus::Optimal => Some(out.objective),
        SolveStatus::Infeasible => Some(0.0),
        _ => None,
    }
}

/// Minimal facet description of the hull of a point set.
pub fn vrep_to_hrep(points: &[Point3<f64>]) -> Result<Vec<Halfspace3>, GeometryError> {
    let hull = convex_hull(points)?;
    Ok(merge_facets(&hull))
}

fn merge_facets(hull: &Hull3) -> Vec<Halfspace3> {
    let mut merged: Vec<Halfspace3> = Vec::new();
    for f in &hull.faces {
        let dup = merged.iter().any(|h| {
            (h.normal - f.normal).amax() <= FACET_MERGE_TOL
                && (h.offset - f.offset).abs() <= FACET_MERGE_TOL
        });
        if !dup {
            merged.push(Halfspace3 {
                normal: f.normal,
                offset: f.offset,
            });
        }
    }
    merged
}

/// All extreme points of a bounded H-polytope via the polar dual:
/// shift an interior point to the origin, take the hull of the dual points
/// `a_i / (b_i - a_i . x0)`, and read each primal vertex off a dual facet.
pub fn hrep_to_vrep(rows: &[(Vector3<f64>, f64)]) -> Result<Vec<Point3<f64>>, GeometryError> {
    // boundedness certificates: max +-e_k . x must all be finite
    for k in 0..3 {
        for sign in [1.0, -1.0] {
            let mut p = ConicProblem::new(3);
            p.maximize(k, sign);
            for (a, b) in rows {
                p.add_leq(vec![(0, a.x), (1, a.y), (2, a.z)], *b);
            }
            match solver::solve_lp(&p).status {
                SolveStatus::Optimal => {}
                SolveStatus::Unbounded => return Err(GeometryError::Unbounded),
                SolveStatus::Infeasible => return Err(GeometryError::Empty),
                SolveStatus::NumericFailure => return Err(GeometryError::Degenerate),
            }
        }
    }
    // interior point: Chebyshev centre
    let mut p = ConicProblem::new(4);
    p.tolerances = SolverTolerances::tight();
    p.maximize(3, 1.0);
    for (a, b) in rows {
        p.add_leq(vec![(0, a.x), (1, a.y), (2, a.z), (3, a.norm())], *b);
    }
    let out = solver::solve_lp(&p);
    let x = match out.status {
        SolveStatus::Optimal => out.primal.unwrap(),
        SolveStatus::Infeasible => return Err(GeometryError::Empty),
        _ => return Err(GeometryError::Degenerate),
    };
    let radius = x[3];
    if radius <= 1e-9 {
        return Err(GeometryError::Degenerate);
    }
    let x0 = Vector3::new(x[0], x[1], x[2]);

    let dual_points: Vec<Point3<f64>> = rows
        .iter()
        .map(|(a, b)| {
            let margin = b - a.dot(&x0);
            Point3::from(a / margin)
        })
        .collect();
    let dual_facets = vrep_to_hrep(&dual_points)?;
    let mut verts: Vec<Point3<f64>> = Vec::new();
    for f in &dual_facets {
        // a facet at distance < offset_min would put the primal vertex at
        // infinity; boundedness above rules that out
        let v = Point3::from(x0 + f.normal / f.offset);
        if !verts.iter().any(|u| (u - v).norm() <= 1e-9 * (1.0 + v.coords.norm())) {
            verts.push(v);
        }
    }
    Ok(verts)
}
