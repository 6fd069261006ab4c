//! Uniform conic-programming interface: LP, SOCP and SDP with deterministic
//! status reporting.
//!
//! Problems are stated as `maximize c'x` subject to equality rows and cone
//! blocks of the form `rhs - A x` belonging to a cone. A single interior-point
//! backend (Clarabel) handles all three cone classes; the interface stays
//! backend-agnostic so nothing outside this module touches solver types.

use std::time::{Duration, Instant};

use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettingsBuilder, DefaultSolver, IPSolver, SolverStatus, SupportedConeT,
};
use nalgebra::DVector;
use serde::Serialize;

/// Sparse row: (column, coefficient) pairs.
pub type Row = Vec<(usize, f64)>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    NumericFailure,
}

#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub status: SolveStatus,
    /// Objective value in the maximisation sense; NaN unless optimal.
    pub objective: f64,
    pub primal: Option<DVector<f64>>,
    pub solve_time: Duration,
}

impl SolveOutcome {
    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct SolverTolerances {
    pub feasibility: f64,
    pub gap_rel: f64,
    pub gap_abs: f64,
    pub max_iter: u32,
}

impl Default for SolverTolerances {
    fn default() -> Self {
        Self {
            feasibility: 1e-8,
            gap_rel: 1e-8,
            gap_abs: 1e-8,
            max_iter: 200,
        }
    }
}

impl SolverTolerances {
    /// Tight settings for small problems where callers check to 1e-10.
    pub fn tight() -> Self {
        Self {
            feasibility: 1e-11,
            gap_rel: 1e-11,
            gap_abs: 1e-11,
            max_iter: 500,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
enum ConeBlock {
    /// Each row: rhs - a'x >= 0, i.e. a'x <= rhs.
    NonNeg { rows: Vec<Row>, rhs: Vec<f64> },
    /// rhs - A x in the second-order cone; row 0 is the bound component.
    SecondOrder { rows: Vec<Row>, rhs: Vec<f64> },
    /// Symmetric `side x side` matrix, entries affine in x, must be PSD.
    /// Entries are stored in svec order (upper triangle, column-major) as
    /// plain matrix entries; the backend applies its own off-diagonal scaling.
    Psd { side: usize, rows: Vec<Row>, rhs: Vec<f64> },
}

/// A conic program `maximize c'x` over equality rows and cone blocks.
#[derive(Debug, Clone, Serialize)]
pub struct ConicProblem {
    n_vars: usize,
    objective: Vec<f64>,
    eq_rows: Vec<Row>,
    eq_rhs: Vec<f64>,
    blocks: Vec<ConeBlock>,
    pub tolerances: SolverTolerances,
}

/// svec index of entry (i, j), i <= j, in an upper-triangular column-major
/// packing of a symmetric matrix.
pub fn svec_index(i: usize, j: usize) -> usize {
    debug_assert!(i <= j);
    j * (j + 1) / 2 + i
}

impl ConicProblem {
    pub fn new(n_vars: usize) -> Self {
        Self {
            n_vars,
            objective: vec![0.0; n_vars],
            eq_rows: Vec::new(),
            eq_rhs: Vec::new(),
            blocks: Vec::new(),
            tolerances: SolverTolerances::default(),
        }
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    pub fn maximize(&mut self, var: usize, coeff: f64) {
        self.objective[var] += coeff;
    }

    pub fn add_eq(&mut self, row: Row, rhs: f64) {
        self.eq_rows.push(row);
        self.eq_rhs.push(rhs);
    }

    /// a'x <= rhs
    pub fn add_leq(&mut self, row: Row, rhs: f64) {
        if let Some(ConeBlock::NonNeg { rows, rhs: r }) = self.blocks.last_mut() {
            rows.push(row);
            r.push(rhs);
            return;
        }
        self.blocks.push(ConeBlock::NonNeg {
            rows: vec![row],
            rhs: vec![rhs],
        });
    }

    /// || (s_1 .. s_{k-1}) || <= s_0 with s_i = rhs_i - row_i ' x.
    pub fn add_soc(&mut self, rows: Vec<Row>, rhs: Vec<f64>) {
        assert_eq!(rows.len(), rhs.len());
        assert!(rows.len() >= 2, "second-order cone needs dimension >= 2");
        self.blocks.push(ConeBlock::SecondOrder { rows, rhs });
    }

    /// Symmetric `side x side` PSD block; entries given in [`svec_index`]
    /// order as plain matrix entries (no scaling applied by the caller).
    pub fn add_psd(&mut self, side: usize, rows: Vec<Row>, rhs: Vec<f64>) {
        assert_eq!(rows.len(), side * (side + 1) / 2);
        assert_eq!(rows.len(), rhs.len());
        self.blocks.push(ConeBlock::Psd { side, rows, rhs });
    }

    pub fn has_soc(&self) -> bool {
        self.blocks
            .iter()
            .any(|b| matches!(b, ConeBlock::SecondOrder { .. }))
    }

    pub fn has_psd(&self) -> bool {
        self.blocks.iter().any(|b| matches!(b, ConeBlock::Psd { .. }))
    }

    /// Self-describing dump for offline debugging.
    pub fn to_debug_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("problem serialises")
    }

    /// Maximum violation of all equality rows and cone memberships at `x`.
    /// Lets callers re-verify an optimal solution independently.
    pub fn verify(&self, x: &DVector<f64>) -> f64 {
        let dot = |row: &Row| -> f64 { row.iter().map(|&(c, v)| v * x[c]).sum() };
        let mut worst: f64 = 0.0;
        for (row, rhs) in self.eq_rows.iter().zip(&self.eq_rhs) {
            worst = worst.max((dot(row) - rhs).abs());
        }
        for block in &self.blocks {
            match block {
                ConeBlock::NonNeg { rows, rhs } => {
                    for (row, r) in rows.iter().zip(rhs) {
                        worst = worst.max(dot(row) - r);
                    }
                }
                ConeBlock::SecondOrder { rows, rhs } => {
                    let s: Vec<f64> =
                        rows.iter().zip(rhs).map(|(row, r)| r - dot(row)).collect();
                    let tail: f64 = s[1..].iter().map(|v| v * v).sum::<f64>().sqrt();
                    worst = worst.max(tail - s[0]);
                }
                ConeBlock::Psd { side, rows, rhs } => {
                    let mut m = nalgebra::DMatrix::zeros(*side, *side);
                    let mut k = 0;
                    for j in 0..*side {
                        for i in 0..=j {
                            let v = rhs[k] - dot(&rows[k]);
                            m[(i, j)] = v;
                            m[(j, i)] = v;
                            k += 1;
                        }
                    }
                    let eig = m.symmetric_eigenvalues();
                    let min_eig = eig.iter().cloned().fold(f64::INFINITY, f64::min);
                    worst = worst.max(-min_eig);
                }
            }
        }
        worst
    }

    fn solve_inner(&self) -> SolveOutcome {
        // assemble rows in cone order: zero cone first, then blocks
        let mut triplets: Vec<(usize, usize, f64)> = Vec::new();
        let mut rhs: Vec<f64> = Vec::new();
        let mut cones: Vec<SupportedConeT<f64>> = Vec::new();
        let push_row = |triplets: &mut Vec<(usize, usize, f64)>,
                            rhs: &mut Vec<f64>,
                            row: &Row,
                            r: f64,
                            scale: f64| {
            let i = rhs.len();
            for &(c, v) in row {
                triplets.push((i, c, v * scale));
            }
            rhs.push(r * scale);
        };
        if !self.eq_rows.is_empty() {
            for (row, &r) in self.eq_rows.iter().zip(&self.eq_rhs) {
                push_row(&mut triplets, &mut rhs, row, r, 1.0);
            }
            cones.push(SupportedConeT::ZeroConeT(self.eq_rows.len()));
        }
        for block in &self.blocks {
            match block {
                ConeBlock::NonNeg { rows, rhs: r } => {
                    for (row, &b) in rows.iter().zip(r) {
                        push_row(&mut triplets, &mut rhs, row, b, 1.0);
                    }
                    cones.push(SupportedConeT::NonnegativeConeT(rows.len()));
                }
                ConeBlock::SecondOrder { rows, rhs: r } => {
                    for (row, &b) in rows.iter().zip(r) {
                        push_row(&mut triplets, &mut rhs, row, b, 1.0);
                    }
                    cones.push(SupportedConeT::SecondOrderConeT(rows.len()));
                }
                ConeBlock::Psd { side, rows, rhs: r } => {
                    // off-diagonal svec entries carry a sqrt(2) factor
                    let mut k = 0;
                    for j in 0..*side {
                        for i in 0..=j {
                            let scale = if i == j { 1.0 } else { std::f64::consts::SQRT_2 };
                            push_row(&mut triplets, &mut rhs, &rows[k], r[k], scale);
                            k += 1;
                        }
                    }
                    cones.push(SupportedConeT::PSDTriangleConeT(*side));
                }
            }
        }
        let m = rhs.len();
        let a = csc_from_triplets(m, self.n_vars, &triplets);
        let p = CscMatrix::<f64>::zeros((self.n_vars, self.n_vars));
        let q: Vec<f64> = self.objective.iter().map(|v| -v).collect();
        let settings = DefaultSettingsBuilder::default()
            .verbose(false)
            .tol_feas(self.tolerances.feasibility)
            .tol_gap_rel(self.tolerances.gap_rel)
            .tol_gap_abs(self.tolerances.gap_abs)
            .max_iter(self.tolerances.max_iter)
            .build()
            .expect("static settings");
        let start = Instant::now();
        let mut solver = match DefaultSolver::new(&p, &q, &a, &rhs, &cones, settings) {
            Ok(s) => s,
            Err(_) => {
                return SolveOutcome {
                    status: SolveStatus::NumericFailure,
                    objective: f64::NAN,
                    primal: None,
                    solve_time: start.elapsed(),
                }
            }
        };
        solver.solve();
        let solve_time = start.elapsed();
        let status = match solver.solution.status {
            SolverStatus::Solved => SolveStatus::Optimal,
            SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => {
                SolveStatus::Infeasible
            }
            SolverStatus::DualInfeasible | SolverStatus::AlmostDualInfeasible => {
                SolveStatus::Unbounded
            }
            _ => SolveStatus::NumericFailure,
        };
        let (objective, primal) = if status == SolveStatus::Optimal {
            (
                -solver.solution.obj_val,
                Some(DVector::from_vec(solver.solution.x.clone())),
            )
        } else {
            (f64::NAN, None)
        };
        SolveOutcome {
            status,
            objective,
            primal,
            solve_time,
        }
    }
}

/// Solve a pure linear program (no SOC or PSD blocks).
pub fn solve_lp(problem: &ConicProblem) -> SolveOutcome {
    assert!(
        !problem.has_soc() && !problem.has_psd(),
        "solve_lp expects a pure LP"
    );
    problem.solve_inner()
}

/// Solve a second-order cone program (PSD blocks not allowed).
pub fn solve_socp(problem: &ConicProblem) -> SolveOutcome {
    assert!(!problem.has_psd(), "solve_socp cannot take PSD blocks");
    problem.solve_inner()
}

/// Solve a semidefinite program (any cone mix).
pub fn solve_sdp(problem: &ConicProblem) -> SolveOutcome {
    problem.solve_inner()
}

fn csc_from_triplets(m: usize, n: usize, triplets: &[(usize, usize, f64)]) -> CscMatrix<f64> {
    let mut by_col: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for &(r, c, v) in triplets {
        by_col[c].push((r, v));
    }
    let mut colptr = Vec::with_capacity(n + 1);
    let mut rowval = Vec::with_capacity(triplets.len());
    let mut nzval = Vec::with_capacity(triplets.len());
    colptr.push(0);
    for col in &mut by_col {
        col.sort_by_key(|&(r, _)| r);
        // merge duplicate entries in the same cell
        let mut merged: Vec<(usize, f64)> = Vec::with_capacity(col.len());
        for &(r, v) in col.iter() {
            match merged.last_mut() {
                Some(last) if last.0 == r => last.1 += v,
                _ => merged.push((r, v)),
            }
        }
        for (r, v) in merged {
            rowval.push(r);
            nzval.push(v);
        }
        colptr.push(rowval.len());
    }
    CscMatrix::new(m, n, colptr, rowval, nzval)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn lp_simple_bound() {
        let mut p = ConicProblem::new(1);
        p.maximize(0, 1.0);
        p.add_leq(vec![(0, 1.0)], 1.0);
        let out = solve_lp(&p);
        assert_eq!(out.status, SolveStatus::Optimal);
        assert_relative_eq!(out.objective, 1.0, epsilon = 1e-8);
    }

    #[test]
    fn lp_infeasible() {
        let mut p = ConicProblem::new(1);
        p.maximize(0, 1.0);
        p.add_leq(vec![(0, 1.0)], 1.0);
        p.add_leq(vec![(0, -1.0)], -2.0); // x >= 2
        assert_eq!(solve_lp(&p).status, SolveStatus::Infeasible);
    }

    #[test]
    fn lp_unbounded() {
        let mut p = ConicProblem::new(1);
        p.maximize(0, 1.0);
        p.add_leq(vec![(0, -1.0)], 0.0); // x >= 0
        assert_eq!(solve_lp(&p).status, SolveStatus::Unbounded);
    }

    #[test]
    fn lp_matches_vertex_enumeration_brute_force() {
        // random bounded LPs over a box with extra diagonal cuts; the optimum
        // sits on a vertex, found here by enumerating all constraint triples
        use rand::prelude::*;
        use rand_chacha::ChaCha8Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let n = 3;
            let mut rows: Vec<(Vec<f64>, f64)> = Vec::new();
            for i in 0..n {
                let mut a = vec![0.0; n];
                a[i] = 1.0;
                rows.push((a.clone(), 1.0 + rng.random::<f64>()));
                a[i] = -1.0;
                rows.push((a, 1.0 + rng.random::<f64>()));
            }
            for _ in 0..3 {
                let a: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
                rows.push((a, rng.random_range(0.5..1.5)));
            }
            let c: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();

            let mut p = ConicProblem::new(n);
            for (i, ci) in c.iter().enumerate() {
                p.maximize(i, *ci);
            }
            for (a, b) in &rows {
                p.add_leq(a.iter().cloned().enumerate().collect(), *b);
            }
            let out = solve_lp(&p);
            assert_eq!(out.status, SolveStatus::Optimal);

            // brute force: intersect all triples of constraint planes
            let mut best = f64::NEG_INFINITY;
            let m = rows.len();
            for i in 0..m {
                for j in (i + 1)..m {
                    for k in (j + 1)..m {
                        let a = nalgebra::Matrix3::from_rows(&[
                            nalgebra::RowVector3::from_row_slice(&rows[i].0),
                            nalgebra::RowVector3::from_row_slice(&rows[j].0),
                            nalgebra::RowVector3::from_row_slice(&rows[k].0),
                        ]);
                        let b = nalgebra::Vector3::new(rows[i].1, rows[j].1, rows[k].1);
                        if let Some(inv) = a.try_inverse() {
                            let x = inv * b;
                            let feasible = rows.iter().all(|(arow, brow)| {
                                arow.iter().zip(x.iter()).map(|(ai, xi)| ai * xi).sum::<f64>()
                                    <= brow + 1e-9
                            });
                            if feasible {
                                let val: f64 =
                                    c.iter().zip(x.iter()).map(|(ci, xi)| ci * xi).sum();
                                best = best.max(val);
                            }
                        }
                    }
                }
            }
            assert_relative_eq!(out.objective, best, epsilon = 1e-7);
        }
    }

    #[test]
    fn socp_diagonal_ball() {
        // max r s.t. ||(r, r)|| <= 1  ->  r = sqrt(2)/2
        let mut p = ConicProblem::new(1);
        p.maximize(0, 1.0);
        p.add_soc(
            vec![vec![], vec![(0, -1.0)], vec![(0, -1.0)]],
            vec![1.0, 0.0, 0.0],
        );
        let out = solve_socp(&p);
        assert_eq!(out.status, SolveStatus::Optimal);
        assert_relative_eq!(out.objective, std::f64::consts::FRAC_1_SQRT_2, epsilon = 1e-7);
    }

    #[test]
    fn socp_zero_radius_forces_zero() {
        // ||(x, y)|| <= 0 with max x + y  -> x = y = 0
        let mut p = ConicProblem::new(2);
        p.maximize(0, 1.0);
        p.maximize(1, 1.0);
        p.add_soc(
            vec![vec![], vec![(0, -1.0)], vec![(1, -1.0)]],
            vec![0.0, 0.0, 0.0],
        );
        let out = solve_socp(&p);
        assert_eq!(out.status, SolveStatus::Optimal);
        let x = out.primal.unwrap();
        assert!(x[0].abs() < 1e-7 && x[1].abs() < 1e-7);
    }

    #[test]
    fn lp_posed_as_socp_matches() {
        let mut lp = ConicProblem::new(2);
        lp.maximize(0, 1.0);
        lp.maximize(1, 0.5);
        lp.add_leq(vec![(0, 1.0), (1, 1.0)], 2.0);
        lp.add_leq(vec![(0, -1.0)], 0.0);
        lp.add_leq(vec![(1, -1.0)], 0.0);
        let a = solve_lp(&lp);
        // same feasible set, one degenerate SOC bound appended
        let mut socp = lp.clone();
        socp.add_soc(vec![vec![], vec![(0, 0.0)]], vec![1.0, 0.0]);
        let b = solve_socp(&socp);
        assert_relative_eq!(a.objective, b.objective, epsilon = 1e-7);
    }

    #[test]
    fn sdp_offdiag_bound() {
        // max t s.t. [[1, t], [t, 1]] PSD  ->  t = 1
        let mut p = ConicProblem::new(1);
        p.maximize(0, 1.0);
        p.add_psd(
            2,
            vec![vec![], vec![(0, -1.0)], vec![]],
            vec![1.0, 0.0, 1.0],
        );
        let out = solve_sdp(&p);
        assert_eq!(out.status, SolveStatus::Optimal);
        assert_relative_eq!(out.objective, 1.0, epsilon = 1e-7);
        assert!(out.primal.is_some());
    }

    #[test]
    fn sdp_diagonal_eigenvalue() {
        // max t s.t. diag(1 - t, 2 - t) PSD -> t = 1
        let mut p = ConicProblem::new(1);
        p.maximize(0, 1.0);
        p.add_psd(
            2,
            vec![vec![(0, 1.0)], vec![], vec![(0, 1.0)]],
            vec![1.0, 0.0, 2.0],
        );
        let out = solve_sdp(&p);
        assert_eq!(out.status, SolveStatus::Optimal);
        assert_relative_eq!(out.objective, 1.0, epsilon = 1e-7);
        // PSD residual at the optimum stays above -1e-7
        assert!(p.verify(&out.primal.unwrap()) < 1e-7);
    }

    #[test]
    fn determinism_across_repeats() {
        let mut p = ConicProblem::new(3);
        p.maximize(0, 1.0);
        p.maximize(2, -0.3);
        for i in 0..3 {
            p.add_leq(vec![(i, 1.0)], 1.0);
            p.add_leq(vec![(i, -1.0)], 1.0);
        }
        p.add_soc(
            vec![vec![], vec![(0, -1.0)], vec![(1, -1.0)], vec![(2, -1.0)]],
            vec![1.5, 0.0, 0.0, 0.0],
        );
        let a = solve_socp(&p);
        for _ in 0..5 {
            let b = solve_socp(&p);
            assert_eq!(a.status, b.status);
            assert!((a.objective - b.objective).abs() < 1e-9);
        }
    }

    #[test]
    fn equality_rows_respected() {
        // max x + y s.t. x + y = 1, x,y >= 0 -> 1
        let mut p = ConicProblem::new(2);
        p.maximize(0, 1.0);
        p.maximize(1, 1.0);
        p.add_eq(vec![(0, 1.0), (1, 1.0)], 1.0);
        p.add_leq(vec![(0, -1.0)], 0.0);
        p.add_leq(vec![(1, -1.0)], 0.0);
        let out = solve_lp(&p);
        assert_relative_eq!(out.objective, 1.0, epsilon = 1e-8);
        assert!(p.verify(&out.primal.unwrap()) < 1e-7);
    }

    #[test]
    fn debug_json_is_self_describing() {
        let mut p = ConicProblem::new(1);
        p.maximize(0, 1.0);
        p.add_leq(vec![(0, 1.0)], 1.0);
        let dump = p.to_debug_json();
        assert!(dump.contains("non-neg"));
        assert!(dump.contains("objective"));
    }
}
