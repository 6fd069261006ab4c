//! The five smallest-unrejectable-force computations over a reduced system:
//! exact projection, single direction, Fibonacci sampling, affine decision
//! rule (SOCP) and quadratic decision rule (SDP).
//!
//! All methods answer the same question: the radius of the largest
//! origin-centred ball of end-effector disturbance forces for which feasible
//! joint torques and contact forces exist. Timing covers the solve only;
//! assembly and reduction happen before these calls.

use std::time::Instant;

use nalgebra::{DMatrix, DVector, Matrix3, Point3, Vector3};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::contacts::ReducedSystem;
use crate::geometry::{
    self, chebyshev_origin, enumerate_vertices, GeometryError, Polytope3, Provenance,
    VertexEnumError, VertexEnumOptions,
};
use crate::solver::{self, ConicProblem, SolveStatus, SolverTolerances};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Exact,
    Single,
    Fibonacci,
    Affine,
    Quadratic,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Exact,
        Method::Single,
        Method::Fibonacci,
        Method::Affine,
        Method::Quadratic,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Method::Exact => "exact",
            Method::Single => "single",
            Method::Fibonacci => "fibonacci",
            Method::Affine => "affine",
            Method::Quadratic => "quadratic",
        }
    }
}

#[derive(Debug, Error)]
pub enum SufError {
    #[error("solver reported a numeric failure")]
    NumericFailure,
    #[error("reduced force polytope is unbounded; cannot enumerate vertices")]
    UnboundedPolytope,
    #[error(transparent)]
    VertexEnum(#[from] VertexEnumError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Why a method returned the radius it did.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodStatus {
    Ok,
    /// The robot cannot even hold the pose (no feasible recourse at F = 0).
    OriginInfeasible,
    /// The force polytope is flat; it contains no 3-D ball.
    Degenerate,
    /// The single-direction scaling is unbounded along this direction.
    Unbounded,
}

/// Decision-rule certificate: the optimised recourse law
/// `dQ(F) = dq0 + gain F (+ quadratic terms F' W_j F per component)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Certificate {
    pub dq0: Vec<f64>,
    /// Gain matrix, `n_dq x 3`, row-major.
    pub gain: Vec<[f64; 3]>,
    /// Quadratic terms, one symmetric 3x3 per dQ component.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quadratic: Option<Vec<[[f64; 3]; 3]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub zeta: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub xi: Option<Vec<f64>>,
}

impl Certificate {
    /// Evaluate the recourse law at a force.
    pub fn recourse(&self, f: &Vector3<f64>) -> DVector<f64> {
        let n = self.dq0.len();
        let mut dq = DVector::from_row_slice(&self.dq0);
        for r in 0..n {
            dq[r] += self.gain[r][0] * f.x + self.gain[r][1] * f.y + self.gain[r][2] * f.z;
        }
        if let Some(ws) = &self.quadratic {
            for r in 0..n {
                let w = Matrix3::from_fn(|i, j| ws[r][i][j]);
                dq[r] += (w * f).dot(f);
            }
        }
        dq
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SufResult {
    pub method: Method,
    /// Robustness radius in N.
    pub rho: f64,
    pub status: MethodStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub polytope: Option<Polytope3>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub certificate: Option<Certificate>,
    /// Unit direction and feasible scaling (single-direction method only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub direction: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<f64>,
    pub solve_time_s: f64,
}

#[derive(Debug, Clone)]
pub struct SufOptions {
    /// Direction count for the Fibonacci method.
    pub fibonacci_n: usize,
    /// Vertex budget guarding the exact enumeration.
    pub vertex_budget: usize,
    /// Unbounded single-direction rays are clipped at this multiple of the
    /// largest finite scaling when building the Fibonacci inner hull.
    pub unbounded_cap_factor: f64,
    pub tolerances: SolverTolerances,
}

impl Default for SufOptions {
    fn default() -> Self {
        Self {
            fibonacci_n: 1024,
            vertex_budget: 400_000,
            unbounded_cap_factor: 10.0,
            tolerances: SolverTolerances::default(),
        }
    }
}

/// Largest feasible scaling of a fixed unit direction:
/// `max f s.t. (f direction, dQ)` satisfies the reduced rows.
pub fn suf_single(
    reduced: &ReducedSystem,
    direction: &Vector3<f64>,
    opts: &SufOptions,
) -> Result<SufResult, SufError> {
    debug_assert!((direction.norm() - 1.0).abs() < 1e-9);
    let start = Instant::now();
    let out = direction_lp(reduced, direction, &opts.tolerances);
    let elapsed = start.elapsed().as_secs_f64();
    let (status, f) = match out {
        DirectionScale::Feasible(f) => (MethodStatus::Ok, f.max(0.0)),
        DirectionScale::OriginInfeasible => (MethodStatus::OriginInfeasible, 0.0),
        DirectionScale::Unbounded => (MethodStatus::Unbounded, f64::INFINITY),
        DirectionScale::NumericFailure => return Err(SufError::NumericFailure),
    };
    Ok(SufResult {
        method: Method::Single,
        rho: f,
        status,
        polytope: None,
        certificate: None,
        direction: Some([direction.x, direction.y, direction.z]),
        scale: Some(f),
        solve_time_s: elapsed,
    })
}

enum DirectionScale {
    Feasible(f64),
    OriginInfeasible,
    Unbounded,
    NumericFailure,
}

fn direction_lp(
    reduced: &ReducedSystem,
    direction: &Vector3<f64>,
    tol: &SolverTolerances,
) -> DirectionScale {
    let n_dq = reduced.n_dq;
    let mut p = ConicProblem::new(1 + n_dq);
    p.tolerances = *tol;
    p.maximize(0, 1.0);
    for (g, b) in &reduced.rows {
        let (gf, gd) = reduced.split_row(g);
        let mut row: Vec<(usize, f64)> = vec![(0, gf.dot(direction))];
        for r in 0..n_dq {
            row.push((1 + r, gd[r]));
        }
        p.add_leq(row, *b);
    }
    // flat-polytope consistency rows pin f whenever the direction leaves
    // the allowed plane
    for i in 0..reduced.f_equalities.nrows() {
        let e = reduced.f_equalities.row(i).transpose();
        p.add_eq(vec![(0, e.dot(direction))], 0.0);
    }
    let out = solver::solve_lp(&p);
    match out.status {
        SolveStatus::Optimal => DirectionScale::Feasible(out.objective),
        SolveStatus::Infeasible => DirectionScale::OriginInfeasible,
        SolveStatus::Unbounded => DirectionScale::Unbounded,
        SolveStatus::NumericFailure => DirectionScale::NumericFailure,
    }
}

/// Inner polytope approximation from boundary points along Fibonacci-sphere
/// directions; the radius is the origin-centred Chebyshev radius of the
/// sampled hull, which never exceeds the exact radius.
pub fn suf_fibonacci(reduced: &ReducedSystem, opts: &SufOptions) -> Result<SufResult, SufError> {
    let start = Instant::now();
    if reduced.is_degenerate() {
        return Ok(degenerate_result(Method::Fibonacci, start.elapsed().as_secs_f64()));
    }
    let dirs = geometry::fibonacci_sphere(opts.fibonacci_n)?;
    use rayon::prelude::*;
    let scales: Vec<DirectionScale> = dirs
        .par_iter()
        .map(|d| direction_lp(reduced, d, &opts.tolerances))
        .collect();
    let mut max_finite: f64 = 0.0;
    for s in &scales {
        match s {
            DirectionScale::Feasible(f) => max_finite = max_finite.max(*f),
            DirectionScale::OriginInfeasible => {
                return Ok(origin_infeasible_result(
                    Method::Fibonacci,
                    start.elapsed().as_secs_f64(),
                ));
            }
            DirectionScale::NumericFailure => return Err(SufError::NumericFailure),
            DirectionScale::Unbounded => {}
        }
    }
    if max_finite == 0.0 {
        // every direction unbounded or zero: nothing to hull
        return Ok(degenerate_result(Method::Fibonacci, start.elapsed().as_secs_f64()));
    }
    let cap = opts.unbounded_cap_factor * max_finite;
    let points: Vec<Point3<f64>> = dirs
        .iter()
        .zip(&scales)
        .map(|(d, s)| {
            let f = match s {
                DirectionScale::Feasible(f) => *f,
                DirectionScale::Unbounded => cap,
                _ => unreachable!("handled above"),
            };
            Point3::from(d * f)
        })
        .collect();
    let (rho, status, polytope) = match Polytope3::from_vertices(
        &points,
        Provenance::Fibonacci(opts.fibonacci_n),
    ) {
        Ok(poly) => {
            let rows: Vec<(Vector3<f64>, f64)> = poly
                .halfspaces
                .iter()
                .map(|h| (h.normal, h.offset))
                .collect();
            let c = chebyshev_origin(&rows);
            let status = if c.violated_row.is_some() {
                MethodStatus::OriginInfeasible
            } else {
                MethodStatus::Ok
            };
            (c.rho, status, Some(poly))
        }
        Err(GeometryError::Hull(_)) => (0.0, MethodStatus::Degenerate, None),
        Err(e) => return Err(e.into()),
    };
    Ok(SufResult {
        method: Method::Fibonacci,
        rho,
        status,
        polytope,
        certificate: None,
        direction: None,
        scale: None,
        solve_time_s: start.elapsed().as_secs_f64(),
    })
}

/// Exact force polytope: enumerate the vertices of the reduced `(F, dQ)`
/// polytope, project them onto force space and take the 3-D hull (the
/// projection of a polytope is the hull of its projected vertices). The
/// poor scaling of this route in contacts and joints is expected; the vertex
/// budget turns blow-ups into an error instead of a wrong answer.
pub fn suf_exact(reduced: &ReducedSystem, opts: &SufOptions) -> Result<SufResult, SufError> {
    let start = Instant::now();
    if reduced.is_degenerate() {
        return Ok(degenerate_result(Method::Exact, start.elapsed().as_secs_f64()));
    }
    if reduced.n_dq == 0 {
        // the reduced rows already are the force polytope H-rep
        let rows: Vec<(Vector3<f64>, f64)> = reduced
            .rows
            .iter()
            .map(|(g, b)| (Vector3::new(g[0], g[1], g[2]), *b))
            .collect();
        let c = chebyshev_origin(&rows);
        let status = if c.violated_row.is_some() {
            MethodStatus::OriginInfeasible
        } else {
            MethodStatus::Ok
        };
        // vertices exist only if the polytope is bounded
        let polytope = Polytope3::from_halfspaces(&rows, Provenance::Exact).ok();
        return Ok(SufResult {
            method: Method::Exact,
            rho: c.rho,
            status,
            polytope,
            certificate: None,
            direction: None,
            scale: None,
            solve_time_s: start.elapsed().as_secs_f64(),
        });
    }

    // bounding box over (F, dQ) from per-coordinate LPs; these also certify
    // boundedness and feasibility
    let dim = reduced.dim();
    let mut lo = DVector::zeros(dim);
    let mut hi = DVector::zeros(dim);
    for k in 0..dim {
        for (sign, store) in [(1.0, false), (-1.0, true)] {
            let mut p = ConicProblem::new(dim);
            p.tolerances = opts.tolerances;
            p.maximize(k, sign);
            for (g, b) in &reduced.rows {
                let row: Vec<(usize, f64)> =
                    g.iter().cloned().enumerate().filter(|(_, v)| *v != 0.0).collect();
                p.add_leq(row, *b);
            }
            let out = solver::solve_lp(&p);
            match out.status {
                SolveStatus::Optimal => {
                    if store {
                        lo[k] = -out.objective;
                    } else {
                        hi[k] = out.objective;
                    }
                }
                SolveStatus::Infeasible => {
                    return Ok(origin_infeasible_result(
                        Method::Exact,
                        start.elapsed().as_secs_f64(),
                    ))
                }
                SolveStatus::Unbounded => return Err(SufError::UnboundedPolytope),
                SolveStatus::NumericFailure => return Err(SufError::NumericFailure),
            }
        }
    }
    // inflate so box facets never support polytope vertices
    for k in 0..dim {
        let pad = 0.1 * (hi[k] - lo[k]).abs() + 1.0;
        lo[k] -= pad;
        hi[k] += pad;
    }
    let ve_opts = VertexEnumOptions {
        vertex_budget: opts.vertex_budget,
        tol: 1e-9,
    };
    let verts = match enumerate_vertices(&reduced.rows, &lo, &hi, &ve_opts) {
        Ok(v) => v,
        Err(VertexEnumError::Empty) => {
            return Ok(origin_infeasible_result(
                Method::Exact,
                start.elapsed().as_secs_f64(),
            ))
        }
        Err(e) => return Err(e.into()),
    };
    let projected: Vec<Point3<f64>> = verts
        .iter()
        .map(|v| Point3::new(v[0], v[1], v[2]))
        .collect();
    let (rho, status, polytope) = match Polytope3::from_vertices(&projected, Provenance::Exact) {
        Ok(poly) => {
            let rows: Vec<(Vector3<f64>, f64)> = poly
                .halfspaces
                .iter()
                .map(|h| (h.normal, h.offset))
                .collect();
            let c = chebyshev_origin(&rows);
            let status = if c.violated_row.is_some() {
                MethodStatus::OriginInfeasible
            } else {
                MethodStatus::Ok
            };
            (c.rho, status, Some(poly))
        }
        Err(GeometryError::Hull(_)) => (0.0, MethodStatus::Degenerate, None),
        Err(e) => return Err(e.into()),
    };
    Ok(SufResult {
        method: Method::Exact,
        rho,
        status,
        polytope,
        certificate: None,
        direction: None,
        scale: None,
        solve_time_s: start.elapsed().as_secs_f64(),
    })
}

/// Affine decision rule `dQ(F) = dq0 + V F`, optimised jointly with the
/// radius via a second-order cone program: for every reduced row `(g, b)`
/// with force part `g_F` and recourse part `g_d`,
/// `g_d' dq0 + || rho g_F + Vt' g_d || <= b`
/// where `Vt = rho V` absorbs the radius to keep the program conic.
pub fn suf_affine(reduced: &ReducedSystem, opts: &SufOptions) -> Result<SufResult, SufError> {
    let start = Instant::now();
    if reduced.is_degenerate() {
        return Ok(degenerate_result(Method::Affine, start.elapsed().as_secs_f64()));
    }
    let n_dq = reduced.n_dq;
    let dq0_at = |r: usize| 1 + r;
    let vt_at = |r: usize, c: usize| 1 + n_dq + c * n_dq + r;
    let mut p = ConicProblem::new(1 + 4 * n_dq);
    p.tolerances = opts.tolerances;
    p.maximize(0, 1.0);
    for (g, b) in &reduced.rows {
        let (gf, gd) = reduced.split_row(g);
        let mut rows: Vec<solver::Row> = Vec::with_capacity(4);
        let mut rhs = Vec::with_capacity(4);
        let bound: solver::Row = (0..n_dq).map(|r| (dq0_at(r), gd[r])).collect();
        rows.push(bound);
        rhs.push(*b);
        for c in 0..3 {
            let mut row: solver::Row = vec![(0, -gf[c])];
            for r in 0..n_dq {
                row.push((vt_at(r, c), -gd[r]));
            }
            rows.push(row);
            rhs.push(0.0);
        }
        p.add_soc(rows, rhs);
    }
    let out = solver::solve_socp(&p);
    let elapsed = start.elapsed().as_secs_f64();
    match out.status {
        SolveStatus::Optimal => {
            let x = out.primal.expect("optimal carries primal");
            let rho = out.objective.max(0.0);
            let mut gain = vec![[0.0; 3]; n_dq];
            if rho > 1e-12 {
                for r in 0..n_dq {
                    for c in 0..3 {
                        gain[r][c] = x[vt_at(r, c)] / rho;
                    }
                }
            }
            let cert = Certificate {
                dq0: (0..n_dq).map(|r| x[dq0_at(r)]).collect(),
                gain,
                quadratic: None,
                zeta: None,
                xi: None,
            };
            Ok(SufResult {
                method: Method::Affine,
                rho,
                status: MethodStatus::Ok,
                polytope: None,
                certificate: Some(cert),
                direction: None,
                scale: None,
                solve_time_s: elapsed,
            })
        }
        SolveStatus::Infeasible => Ok(origin_infeasible_result(Method::Affine, elapsed)),
        SolveStatus::Unbounded | SolveStatus::NumericFailure => Err(SufError::NumericFailure),
    }
}

/// Quadratic decision rule: the affine law plus per-component quadratic
/// terms `F' W_j F`, certified through an S-procedure. Each row contributes
/// a 4x4 linear matrix inequality
/// `[[zeta_i - xi_i - g_d' dq0, -(rho g_F + Vt' g_d)'/2],
///   [-(rho g_F + Vt' g_d)/2,   xi_i I - sum_j g_d[j] Wt_j]] >= 0`
/// with `zeta <= b`, `xi >= 0`; `Wt = rho^2 W` absorbs the radius. Setting
/// `W = 0` recovers the affine program, so this radius can only be larger.
pub fn suf_quadratic(reduced: &ReducedSystem, opts: &SufOptions) -> Result<SufResult, SufError> {
    let start = Instant::now();
    if reduced.is_degenerate() {
        return Ok(degenerate_result(
            Method::Quadratic,
            start.elapsed().as_secs_f64(),
        ));
    }
    let n_dq = reduced.n_dq;
    let m = reduced.rows.len();
    let dq0_at = |r: usize| 1 + r;
    let vt_at = |r: usize, c: usize| 1 + n_dq + c * n_dq + r;
    // six packed entries per symmetric 3x3 quadratic term
    let sv3 = |i: usize, j: usize| j * (j + 1) / 2 + i;
    let wt_at = |j: usize, p: usize, q: usize| 1 + 4 * n_dq + 6 * j + sv3(p.min(q), p.max(q));
    let zeta_at = |i: usize| 1 + 10 * n_dq + i;
    let xi_at = |i: usize| 1 + 10 * n_dq + m + i;
    let mut p = ConicProblem::new(1 + 10 * n_dq + 2 * m);
    p.tolerances = opts.tolerances;
    p.maximize(0, 1.0);
    for (i, (g, b)) in reduced.rows.iter().enumerate() {
        let (gf, gd) = reduced.split_row(g);
        p.add_leq(vec![(zeta_at(i), 1.0)], *b);
        p.add_leq(vec![(xi_at(i), -1.0)], 0.0);
        // 4x4 LMI in svec order (upper triangle, column-major)
        let mut rows: Vec<solver::Row> = Vec::with_capacity(10);
        let mut rhs = vec![0.0; 10];
        let entry = |bi: usize, bj: usize| -> solver::Row {
            // block indices: 0 is the scalar corner, 1..4 the force block
            if bi == 0 && bj == 0 {
                let mut row: solver::Row = vec![(zeta_at(i), -1.0), (xi_at(i), 1.0)];
                for r in 0..n_dq {
                    row.push((dq0_at(r), gd[r]));
                }
                row
            } else if bi == 0 {
                let c = bj - 1;
                let mut row: solver::Row = vec![(0, 0.5 * gf[c])];
                for r in 0..n_dq {
                    row.push((vt_at(r, c), 0.5 * gd[r]));
                }
                row
            } else {
                let (pq, qq) = (bi - 1, bj - 1);
                let mut row: solver::Row = Vec::new();
                if pq == qq {
                    row.push((xi_at(i), -1.0));
                }
                for j in 0..n_dq {
                    if gd[j] != 0.0 {
                        row.push((wt_at(j, pq, qq), gd[j]));
                    }
                }
                row
            }
        };
        for bj in 0..4 {
            for bi in 0..=bj {
                rows.push(entry(bi, bj));
            }
        }
        rhs.truncate(rows.len());
        p.add_psd(4, rows, rhs);
    }
    let out = solver::solve_sdp(&p);
    let elapsed = start.elapsed().as_secs_f64();
    match out.status {
        SolveStatus::Optimal => {
            let x = out.primal.expect("optimal carries primal");
            let rho = out.objective.max(0.0);
            let mut gain = vec![[0.0; 3]; n_dq];
            let mut quad = vec![[[0.0; 3]; 3]; n_dq];
            if rho > 1e-12 {
                for r in 0..n_dq {
                    for c in 0..3 {
                        gain[r][c] = x[vt_at(r, c)] / rho;
                    }
                    for pq in 0..3 {
                        for qq in pq..3 {
                            let v = x[wt_at(r, pq, qq)] / (rho * rho);
                            quad[r][pq][qq] = v;
                            quad[r][qq][pq] = v;
                        }
                    }
                }
            }
            let cert = Certificate {
                dq0: (0..n_dq).map(|r| x[dq0_at(r)]).collect(),
                gain,
                quadratic: Some(quad),
                zeta: Some((0..m).map(|i| x[zeta_at(i)]).collect()),
                xi: Some((0..m).map(|i| x[xi_at(i)]).collect()),
            };
            Ok(SufResult {
                method: Method::Quadratic,
                rho,
                status: MethodStatus::Ok,
                polytope: None,
                certificate: Some(cert),
                direction: None,
                scale: None,
                solve_time_s: elapsed,
            })
        }
        SolveStatus::Infeasible => Ok(origin_infeasible_result(Method::Quadratic, elapsed)),
        SolveStatus::Unbounded | SolveStatus::NumericFailure => Err(SufError::NumericFailure),
    }
}

/// Run one method.
pub fn compute(
    reduced: &ReducedSystem,
    method: Method,
    direction: Option<&Vector3<f64>>,
    opts: &SufOptions,
) -> Result<SufResult, SufError> {
    match method {
        Method::Exact => suf_exact(reduced, opts),
        Method::Fibonacci => suf_fibonacci(reduced, opts),
        Method::Affine => suf_affine(reduced, opts),
        Method::Quadratic => suf_quadratic(reduced, opts),
        Method::Single => {
            let d = direction
                .cloned()
                .unwrap_or_else(|| Vector3::new(1.0, 0.0, 0.0));
            suf_single(reduced, &d, opts)
        }
    }
}

fn degenerate_result(method: Method, elapsed: f64) -> SufResult {
    SufResult {
        method,
        rho: 0.0,
        status: MethodStatus::Degenerate,
        polytope: None,
        certificate: None,
        direction: None,
        scale: None,
        solve_time_s: elapsed,
    }
}

fn origin_infeasible_result(method: Method, elapsed: f64) -> SufResult {
    SufResult {
        method,
        rho: 0.0,
        status: MethodStatus::OriginInfeasible,
        polytope: None,
        certificate: None,
        direction: None,
        scale: None,
        solve_time_s: elapsed,
    }
}

/// Replay a decision-rule certificate: sample forces uniformly in the ball
/// of radius `rho` and evaluate every reduced halfspace under the recourse
/// law. Returns the maximum constraint violation seen.
pub fn replay_certificate(
    rows: &[(DVector<f64>, f64)],
    n_dq: usize,
    cert: &Certificate,
    rho: f64,
    samples: usize,
    seed: u64,
) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = f64::NEG_INFINITY;
    let mut check = |f: &Vector3<f64>| {
        let dq = cert.recourse(f);
        for (g, b) in rows {
            let mut v = g[0] * f.x + g[1] * f.y + g[2] * f.z;
            for r in 0..n_dq {
                v += g[3 + r] * dq[r];
            }
            worst = worst.max(v - b);
        }
    };
    check(&Vector3::zeros());
    for _ in 0..samples {
        // rejection sampling gives a uniform draw from the unit ball
        let f = loop {
            let v = Vector3::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            );
            if v.norm_squared() <= 1.0 {
                break v;
            }
        };
        check(&(f * rho));
    }
    worst
}

/// Closed-form inscribed radius of the single-body fixture:
/// `(sqrt2/2) mu m g / sqrt(1 + mu^2 / 2)`.
pub fn fixture_rho(mass: f64, mu: f64, g: f64) -> f64 {
    let c = std::f64::consts::FRAC_1_SQRT_2;
    c * mu * mass * g / (1.0 + mu * mu / 2.0).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contacts::{assemble, reduce, Scenario};
    use crate::models;
    use approx::assert_relative_eq;

    fn fixture_reduced() -> ReducedSystem {
        let model = models::single_body_fixture(10.0, 0.5);
        let state = model.zero_state();
        let scenario = Scenario::statics(&["support"], "ee");
        reduce(&assemble(&model, &state, &scenario).unwrap()).unwrap()
    }

    #[test]
    fn fixture_formula_value() {
        // hand-derived oracle: facets of the fixture polytope are
        // F_z <= m g and +-F_x + c mu F_z <= c mu m g (same for y), so the
        // nearest facet distance is c mu m g / sqrt(1 + c^2 mu^2)
        let rho = fixture_rho(10.0, 0.5, 9.81);
        assert_relative_eq!(rho, 32.70, epsilon = 0.01);
    }

    #[test]
    fn single_up_equals_weight() {
        let red = fixture_reduced();
        let up = suf_single(&red, &Vector3::z(), &SufOptions::default()).unwrap();
        assert_eq!(up.status, MethodStatus::Ok);
        assert_relative_eq!(up.rho, 98.1, epsilon = 1e-5);
    }

    #[test]
    fn single_down_is_unbounded_under_pyramid_rows() {
        let red = fixture_reduced();
        let down = suf_single(&red, &(-Vector3::z()), &SufOptions::default()).unwrap();
        assert_eq!(down.status, MethodStatus::Unbounded);
        assert!(down.rho.is_infinite());
    }

    #[test]
    fn single_sideways_friction_limit() {
        let red = fixture_reduced();
        let side = suf_single(&red, &Vector3::x(), &SufOptions::default()).unwrap();
        // f = (sqrt2/2) mu m g = 34.68
        assert_relative_eq!(side.rho, 0.5 * std::f64::consts::FRAC_1_SQRT_2 * 98.1, epsilon = 1e-5);
    }

    #[test]
    fn exact_on_fixture_matches_closed_form() {
        let red = fixture_reduced();
        let res = suf_exact(&red, &SufOptions::default()).unwrap();
        assert_eq!(res.status, MethodStatus::Ok);
        assert_relative_eq!(res.rho, fixture_rho(10.0, 0.5, 9.81), epsilon = 1e-8);
    }

    #[test]
    fn fibonacci_on_fixture_conservative_within_2_percent() {
        let red = fixture_reduced();
        let res = suf_fibonacci(&red, &SufOptions::default()).unwrap();
        let exact = fixture_rho(10.0, 0.5, 9.81);
        assert!(res.rho <= exact + 1e-9, "inner approximation exceeded exact");
        assert!(res.rho >= 0.98 * exact, "rho {} too small", res.rho);
    }

    #[test]
    fn fibonacci_coarse_is_smaller_on_fixture() {
        let red = fixture_reduced();
        let coarse = suf_fibonacci(
            &red,
            &SufOptions {
                fibonacci_n: 4,
                ..SufOptions::default()
            },
        )
        .unwrap();
        let fine = suf_fibonacci(&red, &SufOptions::default()).unwrap();
        assert!(coarse.rho < fine.rho);
    }

    #[test]
    fn affine_and_quadratic_match_exact_on_fixture() {
        // no recourse exists on the fixture, so every law coincides
        let red = fixture_reduced();
        let exact = fixture_rho(10.0, 0.5, 9.81);
        let aff = suf_affine(&red, &SufOptions::default()).unwrap();
        assert_relative_eq!(aff.rho, exact, epsilon = 1e-5);
        let quad = suf_quadratic(&red, &SufOptions::default()).unwrap();
        assert_relative_eq!(quad.rho, exact, epsilon = 1e-4);
    }

    #[test]
    fn fixture_scale_covariance() {
        // all constraints are homogeneous of degree 1 in (m g), so scaling
        // gravity scales every radius
        let model = models::single_body_fixture(20.0, 0.5);
        let state = model.zero_state();
        let scenario = Scenario::statics(&["support"], "ee");
        let red = reduce(&assemble(&model, &state, &scenario).unwrap()).unwrap();
        let aff = suf_affine(&red, &SufOptions::default()).unwrap();
        assert_relative_eq!(aff.rho, 2.0 * fixture_rho(10.0, 0.5, 9.81), epsilon = 1e-4);
    }

    fn teleop_reduced() -> ReducedSystem {
        let model = models::default_quadruped(false);
        let state = models::nominal_stance(&model, 0.42).unwrap();
        let scenario = Scenario::statics(&["lf_foot", "rf_foot", "lh_foot"], "rh_foot");
        reduce(&assemble(&model, &state, &scenario).unwrap()).unwrap()
    }

    #[test]
    fn conservativity_chain_on_articulated_instance() {
        let red = teleop_reduced();
        let opts = SufOptions::default();
        let exact = suf_exact(&red, &opts).unwrap();
        assert_eq!(exact.status, MethodStatus::Ok);
        assert!(exact.rho > 1.0, "exact rho {}", exact.rho);
        let fib = suf_fibonacci(&red, &opts).unwrap();
        let aff = suf_affine(&red, &opts).unwrap();
        let quad = suf_quadratic(&red, &opts).unwrap();
        assert!(fib.rho <= exact.rho + 1e-6, "fib {} exact {}", fib.rho, exact.rho);
        assert!(aff.rho <= exact.rho + 1e-6, "aff {} exact {}", aff.rho, exact.rho);
        assert!(quad.rho <= exact.rho + 1e-6, "quad {} exact {}", quad.rho, exact.rho);
        assert!(quad.rho >= aff.rho - 1e-6, "quad {} aff {}", quad.rho, aff.rho);
        // single-direction overestimates relative to the exact radius
        for d in geometry::fibonacci_sphere(16).unwrap() {
            let s = suf_single(&red, &d, &opts).unwrap();
            assert!(s.rho >= exact.rho - 1e-6);
        }
    }

    #[test]
    fn exact_close_to_dense_fibonacci_on_teleop() {
        let red = teleop_reduced();
        let exact = suf_exact(&red, &SufOptions::default()).unwrap();
        let dense = suf_fibonacci(
            &red,
            &SufOptions {
                fibonacci_n: 20_000,
                ..SufOptions::default()
            },
        )
        .unwrap();
        assert!(dense.rho <= exact.rho + 1e-6);
        assert!(
            dense.rho >= exact.rho * 0.995,
            "dense {} vs exact {}",
            dense.rho,
            exact.rho
        );
    }

    #[test]
    fn certificate_replay_affine() {
        let red = teleop_reduced();
        let aff = suf_affine(&red, &SufOptions::default()).unwrap();
        let cert = aff.certificate.as_ref().unwrap();
        let worst = replay_certificate(&red.rows, red.n_dq, cert, aff.rho, 1000, 42);
        assert!(worst < 1e-7, "worst violation {worst}");
    }

    #[test]
    fn certificate_replay_quadratic() {
        let red = teleop_reduced();
        let quad = suf_quadratic(&red, &SufOptions::default()).unwrap();
        let cert = quad.certificate.as_ref().unwrap();
        let worst = replay_certificate(&red.rows, red.n_dq, cert, quad.rho, 1000, 43);
        assert!(worst < 1e-6, "worst violation {worst}");
    }

    #[test]
    fn zero_torque_limits_make_origin_infeasible() {
        // a quadruped with no actuation cannot hold a bent-leg pose
        let model = models::default_quadruped(false);
        let mut weak = model.clone();
        // rebuild with zero torque limits
        let links = weak.links().to_vec();
        let joints: Vec<_> = weak
            .joints()
            .iter()
            .cloned()
            .map(|mut j| {
                j.torque_limit = 0.0;
                j
            })
            .collect();
        let contacts = weak.contacts().to_vec();
        weak = crate::model::RobotModel::new(
            links,
            joints,
            contacts,
            model.gravity(),
            model.friction_mu(),
            true,
        )
        .unwrap();
        let state = models::nominal_stance(&model, 0.42).unwrap();
        let scenario = Scenario::statics(&["lf_foot", "rf_foot", "lh_foot"], "rh_foot");
        let red = reduce(&assemble(&weak, &state, &scenario).unwrap()).unwrap();
        let res = suf_single(&red, &Vector3::x(), &SufOptions::default()).unwrap();
        assert_eq!(res.status, MethodStatus::OriginInfeasible);
        assert_eq!(res.rho, 0.0);
    }

    #[test]
    fn fibonacci_hits_box_facets_exactly() {
        // a box-shaped feasible set whose facet normals are in the sample
        // set: rho matches the closed form to 1e-8. Build a synthetic
        // reduced system with rows +-F <= 1 per axis and no recourse.
        let mut rows = Vec::new();
        for k in 0..3 {
            for s in [1.0, -1.0] {
                let mut g = DVector::zeros(3);
                g[k] = s;
                rows.push((g, 1.0));
            }
        }
        let red = ReducedSystem {
            rows,
            n_dq: 0,
            recourse_f: DMatrix::zeros(0, 3),
            nullspace: DMatrix::zeros(0, 0),
            offset: DVector::zeros(0),
            f_equalities: DMatrix::zeros(0, 3),
            layout: crate::contacts::VarLayout {
                n_tau: 0,
                n_lambda: 0,
                active: vec![],
                end_effector: 0,
            },
            w: DMatrix::zeros(0, 0),
            w_pinv: DMatrix::zeros(0, 0),
        };
        // direction set includes the 6 facet normals: use n = 6 axis dirs by
        // constructing a custom run over suf_single and hulling manually
        let opts = SufOptions::default();
        let mut pts = Vec::new();
        for k in 0..3 {
            for s in [1.0f64, -1.0] {
                let mut d = Vector3::zeros();
                d[k] = s;
                let r = suf_single(&red, &d, &opts).unwrap();
                pts.push(Point3::from(d * r.rho));
            }
        }
        // corners fill out the hull so the box is reproduced exactly
        for &x in &[-1.0f64, 1.0] {
            for &y in &[-1.0f64, 1.0] {
                for &z in &[-1.0f64, 1.0] {
                    let d = Vector3::new(x, y, z).normalize();
                    let r = suf_single(&red, &d, &opts).unwrap();
                    pts.push(Point3::from(d * r.rho));
                }
            }
        }
        let poly = Polytope3::from_vertices(&pts, Provenance::Fibonacci(14)).unwrap();
        let rows3: Vec<(Vector3<f64>, f64)> =
            poly.halfspaces.iter().map(|h| (h.normal, h.offset)).collect();
        assert_relative_eq!(chebyshev_origin(&rows3).rho, 1.0, epsilon = 1e-8);
    }
}
