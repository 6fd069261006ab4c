//! Assembly of the quasi-static force-feasibility system for a scenario, and
//! its reduction to halfspaces over `(F, dQ)`.
//!
//! The stacked decision vector is `x = [F(3), tau(n), lambda(3 per active
//! contact)]`. The dynamics equality with `qdd` pinned to the desired
//! acceleration reads `A_eq x = d` with `A_eq = [Je', B, Jc']` and
//! `d = M qdd_d + h`. Friction pyramids and torque bounds supply the
//! halfspace rows, stored unnormalised (norms are computed on demand where
//! the inscribed-radius formula needs them).

use nalgebra::{DMatrix, DVector, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{ModelError, RobotModel, RobotState};

/// Slope of the inscribed friction pyramid per tangential axis.
pub const PYRAMID_SLOPE: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// Singular values below this count as zero when splitting `W`.
pub const NULLSPACE_SV_TOL: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum ContactsError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("end-effector {0} cannot also be an active contact")]
    EndEffectorActive(String),
    #[error("scenario needs at least one active contact")]
    NoActiveContacts,
    #[error("friction coefficient must be >= 0, got {0}")]
    NegativeFriction(f64),
    #[error(
        "desired acceleration moves stationary contact {contact}: |J qdd_d + Jdot qd| = {residual:.3e}"
    )]
    MovingContact { contact: String, residual: f64 },
    #[error("dynamics equality is inconsistent: no (tau, lambda) reaches it (residual {0:.3e})")]
    InconsistentEquality(f64),
}

/// Which contacts carry ground reaction forces and where the disturbance
/// force is applied.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Scenario {
    pub active_contacts: Vec<String>,
    pub end_effector: String,
    /// Friction coefficient override; model value when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    /// Desired generalised acceleration; zero (static analysis) when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub qddot_d: Option<Vec<f64>>,
}

impl Scenario {
    pub fn statics(active: &[&str], end_effector: &str) -> Self {
        Scenario {
            active_contacts: active.iter().map(|s| s.to_string()).collect(),
            end_effector: end_effector.to_string(),
            mu: None,
            qddot_d: None,
        }
    }
}

/// Provenance of a halfspace row, for diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RowKind {
    Unilateral { contact: usize },
    PyramidX { contact: usize, positive: bool },
    PyramidY { contact: usize, positive: bool },
    TorqueUpper { joint: usize },
    TorqueLower { joint: usize },
}

#[derive(Debug, Clone)]
pub struct HalfspaceRow {
    pub a: DVector<f64>,
    pub b: f64,
    pub kind: RowKind,
}

/// Variable layout of the stacked system.
#[derive(Debug, Clone)]
pub struct VarLayout {
    pub n_tau: usize,
    pub n_lambda: usize,
    /// Model contact indices of the active contacts, in scenario order.
    pub active: Vec<usize>,
    pub end_effector: usize,
}

impl VarLayout {
    pub fn dim(&self) -> usize {
        3 + self.n_tau + self.n_lambda
    }
    pub fn tau_offset(&self) -> usize {
        3
    }
    pub fn lambda_offset(&self, slot: usize) -> usize {
        3 + self.n_tau + 3 * slot
    }
}

/// Stacked equalities and halfspaces over `(F, tau, lambda)`.
#[derive(Debug, Clone)]
pub struct ConstraintSystem {
    pub a_eq: DMatrix<f64>,
    pub b_eq: DVector<f64>,
    pub rows: Vec<HalfspaceRow>,
    pub layout: VarLayout,
    pub mu: f64,
}

/// The five friction rows of one active contact over the stacked vector:
/// unilaterality plus the four pyramid facets
/// `+-lambda_x <= (sqrt2/2) mu lambda_z`, `+-lambda_y <= (sqrt2/2) mu lambda_z`.
pub fn friction_halfspaces(
    slot: usize,
    contact: usize,
    layout: &VarLayout,
    mu: f64,
) -> Result<Vec<HalfspaceRow>, ContactsError> {
    if mu < 0.0 {
        return Err(ContactsError::NegativeFriction(mu));
    }
    let dim = layout.dim();
    let off = layout.lambda_offset(slot);
    let mut rows = Vec::with_capacity(5);
    let mut push = |coeffs: [(usize, f64); 2], kind: RowKind| {
        let mut a = DVector::zeros(dim);
        for (c, v) in coeffs {
            a[c] += v;
        }
        rows.push(HalfspaceRow { a, b: 0.0, kind });
    };
    let k = PYRAMID_SLOPE * mu;
    push([(off + 2, -1.0), (off + 2, 0.0)], RowKind::Unilateral { contact });
    push(
        [(off, 1.0), (off + 2, -k)],
        RowKind::PyramidX { contact, positive: true },
    );
    push(
        [(off, -1.0), (off + 2, -k)],
        RowKind::PyramidX { contact, positive: false },
    );
    push(
        [(off + 1, 1.0), (off + 2, -k)],
        RowKind::PyramidY { contact, positive: true },
    );
    push(
        [(off + 1, -1.0), (off + 2, -k)],
        RowKind::PyramidY { contact, positive: false },
    );
    Ok(rows)
}

/// Torque-bound rows `+-tau_i <= tau_limit_i` for every joint.
pub fn torque_halfspaces(model: &RobotModel, layout: &VarLayout) -> Vec<HalfspaceRow> {
    let dim = layout.dim();
    let mut rows = Vec::with_capacity(2 * model.n_joints());
    for (j, joint) in model.joints().iter().enumerate() {
        let c = layout.tau_offset() + j;
        let mut a = DVector::zeros(dim);
        a[c] = 1.0;
        rows.push(HalfspaceRow {
            a,
            b: joint.torque_limit,
            kind: RowKind::TorqueUpper { joint: j },
        });
        let mut a = DVector::zeros(dim);
        a[c] = -1.0;
        rows.push(HalfspaceRow {
            a,
            b: joint.torque_limit,
            kind: RowKind::TorqueLower { joint: j },
        });
    }
    rows
}

/// Stationary-contact consistency tolerance on `J qdd_d + Jdot qd`.
pub const CONTACT_ACC_TOL: f64 = 1e-8;

/// Build the full force-feasibility system for a scenario.
pub fn assemble(
    model: &RobotModel,
    state: &RobotState,
    scenario: &Scenario,
) -> Result<ConstraintSystem, ContactsError> {
    if scenario.active_contacts.is_empty() {
        return Err(ContactsError::NoActiveContacts);
    }
    if scenario.active_contacts.contains(&scenario.end_effector) {
        return Err(ContactsError::EndEffectorActive(scenario.end_effector.clone()));
    }
    let mu = scenario.mu.unwrap_or(model.friction_mu());
    if mu < 0.0 {
        return Err(ContactsError::NegativeFriction(mu));
    }
    let active: Vec<usize> = scenario
        .active_contacts
        .iter()
        .map(|n| model.contact_index(n))
        .collect::<Result<_, _>>()?;
    let ee = model.contact_index(&scenario.end_effector)?;
    let nv = model.nv();
    let n_tau = model.n_joints();
    let layout = VarLayout {
        n_tau,
        n_lambda: 3 * active.len(),
        active: active.clone(),
        end_effector: ee,
    };

    let qdd_d = match &scenario.qddot_d {
        Some(v) => {
            if v.len() != nv {
                return Err(ContactsError::Model(ModelError::VelocityDimension {
                    expected: nv,
                    got: v.len(),
                }));
            }
            DVector::from_row_slice(v)
        }
        None => DVector::zeros(nv),
    };
    let mut st = state.clone();
    st.desired_acceleration = qdd_d.clone();

    // stationary contacts constrain the desired motion, not the decision
    // variables: J qdd_d + Jdot qd must vanish for every active contact
    for (name, &ci) in scenario.active_contacts.iter().zip(&active) {
        let _ = ci;
        let jac = model.point_jacobian(&st, name)?;
        let bias = model.contact_acc_bias(&st, name)?;
        let residual = (jac * &qdd_d + bias).norm();
        if residual > CONTACT_ACC_TOL {
            return Err(ContactsError::MovingContact {
                contact: name.clone(),
                residual,
            });
        }
    }

    // equality block: [Je' | B | Jf'/Jp' stacked] x = M qdd_d + h
    let mut a_eq = DMatrix::zeros(nv, layout.dim());
    let je = model.point_jacobian(&st, &model.contacts()[ee].name)?;
    a_eq.view_mut((0, 0), (nv, 3)).copy_from(&je.transpose());
    for j in 0..n_tau {
        a_eq[(model.joint_col(j), layout.tau_offset() + j)] = 1.0;
    }
    for (slot, &ci) in active.iter().enumerate() {
        let jc = model.point_jacobian(&st, &model.contacts()[ci].name)?;
        a_eq.view_mut((0, layout.lambda_offset(slot)), (nv, 3))
            .copy_from(&jc.transpose());
    }
    let b_eq = model.mass_matrix(&st)? * &qdd_d + model.dynamics_bias(&st)?;

    let mut rows = Vec::with_capacity(5 * active.len() + 2 * n_tau);
    for (slot, &ci) in active.iter().enumerate() {
        rows.extend(friction_halfspaces(slot, ci, &layout, mu)?);
    }
    rows.extend(torque_halfspaces(model, &layout));

    Ok(ConstraintSystem {
        a_eq,
        b_eq,
        rows,
        layout,
        mu,
    })
}

/// Halfspace system over the reduced variable `y = (F, dQ)` after
/// eliminating the dynamics equality through `W = [B Jf' Jp']`.
#[derive(Debug, Clone)]
pub struct ReducedSystem {
    /// Halfspace rows `(g, b)` with `g' y <= b`.
    pub rows: Vec<(DVector<f64>, f64)>,
    pub n_dq: usize,
    /// Recourse map back to `(tau, lambda)`: `r = recourse_f * F + nullspace * dQ + offset`.
    pub recourse_f: DMatrix<f64>,
    pub nullspace: DMatrix<f64>,
    pub offset: DVector<f64>,
    /// Left-nullspace consistency rows `E F = 0` (rank-deficient `W` only).
    /// Nonzero rows flatten the force polytope; methods report degeneracy.
    pub f_equalities: DMatrix<f64>,
    pub layout: VarLayout,
    pub w: DMatrix<f64>,
    pub w_pinv: DMatrix<f64>,
}

impl ReducedSystem {
    pub fn dim(&self) -> usize {
        3 + self.n_dq
    }

    /// Map reduced coordinates back to the stacked `(F, tau, lambda)`.
    pub fn expand(&self, f: &Vector3<f64>, dq: &DVector<f64>) -> DVector<f64> {
        let fd = DVector::from_row_slice(f.as_slice());
        let r = &self.recourse_f * &fd + &self.nullspace * dq + &self.offset;
        let mut x = DVector::zeros(3 + r.len());
        x.rows_mut(0, 3).copy_from(&fd);
        x.rows_mut(3, r.len()).copy_from(&r);
        x
    }

    /// True when the force polytope is flattened by consistency rows.
    pub fn is_degenerate(&self) -> bool {
        self.f_equalities.nrows() > 0
    }

    /// Split a reduced row into its force and recourse gradients.
    pub fn split_row(&self, row: &DVector<f64>) -> (Vector3<f64>, DVector<f64>) {
        (
            Vector3::new(row[0], row[1], row[2]),
            DVector::from(row.rows(3, self.n_dq).clone_owned()),
        )
    }
}

/// Reparametrise the constraint system over `(F, dQ)`.
///
/// `W` collects the equality columns of `(tau, lambda)`. The general solution
/// of `W r = d - Je' F` is `r = -W+ Je' F + N dQ + W+ d` with `N` an
/// orthonormal nullspace basis of `W` (SVD, threshold [`NULLSPACE_SV_TOL`]).
/// Rank deficiency leaves consistency requirements `U' (d - Je' F) = 0` over
/// the left-nullspace `U`; rows that no `F` can satisfy are an error, rows
/// that constrain `F` are kept as equalities.
pub fn reduce(system: &ConstraintSystem) -> Result<ReducedSystem, ContactsError> {
    let nv = system.a_eq.nrows();
    let n_r = system.layout.n_tau + system.layout.n_lambda;
    let w = system.a_eq.columns(3, n_r).clone_owned();
    let je_t = system.a_eq.columns(0, 3).clone_owned();
    let d = system.b_eq.clone();

    let svd = nalgebra::SVD::new(w.clone(), true, true);
    let u = svd.u.as_ref().expect("u requested");
    let v_t = svd.v_t.as_ref().expect("v_t requested");
    let rank = svd
        .singular_values
        .iter()
        .filter(|&&s| s > NULLSPACE_SV_TOL)
        .count();

    // pseudo-inverse W+ = V S+ U' (thin factors)
    let min_dim = nv.min(n_r);
    let mut s_inv = DMatrix::zeros(min_dim, min_dim);
    for i in 0..rank {
        s_inv[(i, i)] = 1.0 / svd.singular_values[i];
    }
    let w_pinv = v_t.transpose() * s_inv * u.transpose();

    // the thin SVD omits the nullspace columns, so both nullspaces come from
    // symmetric eigendecompositions; the rank itself comes from the SVD
    let n_dq = n_r - rank;
    let nullspace = smallest_eigvecs(&(w.transpose() * &w), n_dq);

    // left-nullspace consistency: U_perp' (d - Je' F) = 0
    let n_left = nv - rank;
    let mut f_eq_rows: Vec<DVector<f64>> = Vec::new();
    if n_left > 0 {
        let u_perp = smallest_eigvecs(&(&w * w.transpose()), n_left);
        let e = u_perp.transpose() * &je_t; // n_left x 3
        let rhs = u_perp.transpose() * &d;
        for i in 0..n_left {
            let row = e.row(i).transpose();
            if row.norm() <= 1e-10 {
                if rhs[i].abs() > 1e-8 {
                    return Err(ContactsError::InconsistentEquality(rhs[i].abs()));
                }
            } else {
                // F must lie on this plane for the equality to be solvable;
                // rhs != 0 would exclude F = 0 (no static equilibrium)
                if rhs[i].abs() > 1e-8 {
                    return Err(ContactsError::InconsistentEquality(rhs[i].abs()));
                }
                f_eq_rows.push(row.clone_owned());
            }
        }
    }
    let mut f_equalities = DMatrix::zeros(f_eq_rows.len(), 3);
    for (i, r) in f_eq_rows.iter().enumerate() {
        f_equalities.row_mut(i).copy_from(&r.transpose());
    }

    let recourse_f = -&w_pinv * &je_t;
    let offset = &w_pinv * &d;

    // rewrite each halfspace over y = (F, dQ)
    let rows = system
        .rows
        .iter()
        .map(|hs| {
            let a_f = hs.a.rows(0, 3).clone_owned();
            let a_r = hs.a.rows(3, n_r).clone_owned();
            let mut g = DVector::zeros(3 + n_dq);
            let gf = a_f + recourse_f.transpose() * &a_r;
            g.rows_mut(0, 3).copy_from(&gf);
            let gd = nullspace.transpose() * &a_r;
            g.rows_mut(3, n_dq).copy_from(&gd);
            let b = hs.b - a_r.dot(&offset);
            (g, b)
        })
        .collect();

    Ok(ReducedSystem {
        rows,
        n_dq,
        recourse_f,
        nullspace,
        offset,
        f_equalities,
        layout: system.layout.clone(),
        w,
        w_pinv,
    })
}

/// Orthonormal basis of the `k` smallest-eigenvalue directions of a
/// symmetric PSD matrix (eigenvectors sorted by eigenvalue).
fn smallest_eigvecs(sym: &DMatrix<f64>, k: usize) -> DMatrix<f64> {
    let n = sym.nrows();
    if k == 0 {
        return DMatrix::zeros(n, 0);
    }
    let eig = nalgebra::SymmetricEigen::new(sym.clone());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[a]
            .partial_cmp(&eig.eigenvalues[b])
            .expect("eigenvalues are finite")
    });
    let mut basis = DMatrix::zeros(n, k);
    for (j, &idx) in order.iter().take(k).enumerate() {
        basis.column_mut(j).copy_from(&eig.eigenvectors.column(idx));
    }
    basis
}

impl ConstraintSystem {
    /// Max violation of all halfspace rows at a stacked point.
    pub fn max_row_violation(&self, x: &DVector<f64>) -> f64 {
        self.rows
            .iter()
            .map(|r| r.a.dot(x) - r.b)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Residual of the dynamics equality at a stacked point.
    pub fn equality_residual(&self, x: &DVector<f64>) -> f64 {
        (&self.a_eq * x - &self.b_eq).norm()
    }
}
