//! Branched rigid-body kinematics and quasi-static dynamics.
//!
//! Links are modelled as point masses at their centre of mass, which is all
//! the quasi-static force analysis needs: the mass matrix is
//! `M(q) = sum_i m_i J_i' J_i` over the link CoM Jacobians and the bias
//! `h(q, qd)` carries the velocity-product and gravity terms.
//!
//! Conventions:
//! * world-frame quantities everywhere; gravity is a world vector in m/s^2,
//! * generalised velocity layout `[v_base(3), w_base(3), qd_joints(n)]` for a
//!   floating base, `[qd_joints]` otherwise,
//! * orientation is a unit quaternion; velocity-level perturbations act on the
//!   left (world frame), so the angular Jacobian block of a point `p` is
//!   `-skew(p - r_base)`.

use std::collections::BTreeMap;

use nalgebra::{
    DMatrix, DVector, Isometry3, Matrix3, Point3, Translation3, Unit, UnitQuaternion, Vector3,
};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance on the unit-norm invariant of the base quaternion.
pub const QUAT_NORM_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("model has no links")]
    Empty,
    #[error("link {0} has more than one root / broken parent chain")]
    NotATree(String),
    #[error("link {0} has non-positive mass {1}")]
    BadMass(String, f64),
    #[error("joint {0} has negative torque limit {1}")]
    BadTorqueLimit(String, f64),
    #[error("friction coefficient must be >= 0, got {0}")]
    BadFriction(f64),
    #[error("prong contact {0} must attach to the base link")]
    ProngNotOnBase(String),
    #[error("joint {0} has inverted position limits")]
    BadJointLimits(String),
    #[error("duplicate name {0}")]
    DuplicateName(String),
    #[error("unknown link {0}")]
    UnknownLink(String),
    #[error("unknown contact point {0}")]
    UnknownContact(String),
    #[error("state dimension mismatch: expected {expected} joint angles, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("base quaternion norm deviates from 1 by {0:.3e}")]
    QuaternionNotUnit(f64),
    #[error("velocity dimension mismatch: expected {expected}, got {got}")]
    VelocityDimension { expected: usize, got: usize },
}

#[derive(Debug, Error)]
#[error("IK did not converge: residual {residual:.6e} m after {iterations} iterations")]
pub struct IkFailure {
    pub residual: f64,
    pub iterations: usize,
    /// Best state reached; callers may inspect or discard it.
    pub best: RobotState,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContactKind {
    Foot,
    Prong,
    EndEffector,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Link {
    pub name: String,
    /// Mass in kg, strictly positive.
    pub mass: f64,
    /// Centre of mass offset in the link frame, m.
    pub com: Vector3<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Joint {
    pub name: String,
    pub parent_link: usize,
    pub child_link: usize,
    /// Revolute axis in the joint frame (unit).
    pub axis: Unit<Vector3<f64>>,
    /// Fixed transform from the parent link frame to the joint frame.
    pub origin: Isometry3<f64>,
    /// Position limits in rad, `lower <= upper`.
    pub limits: [f64; 2],
    /// Torque limit in N*m, >= 0.
    pub torque_limit: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ContactPoint {
    pub name: String,
    pub kind: ContactKind,
    pub link: usize,
    /// Offset in the link frame, m.
    pub offset: Vector3<f64>,
}

/// Immutable articulated-body description.
///
/// Link 0 is the root; when `floating_base` is set the root pose comes from
/// the state, otherwise the root is welded to the world origin.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RobotModel {
    links: Vec<Link>,
    joints: Vec<Joint>,
    contacts: Vec<ContactPoint>,
    gravity: Vector3<f64>,
    friction_mu: f64,
    floating_base: bool,
    /// joint index driving each link (None for the root).
    parent_joint: Vec<Option<usize>>,
}

impl RobotModel {
    pub fn new(
        links: Vec<Link>,
        joints: Vec<Joint>,
        contacts: Vec<ContactPoint>,
        gravity: Vector3<f64>,
        friction_mu: f64,
        floating_base: bool,
    ) -> Result<Self, ModelError> {
        if links.is_empty() {
            return Err(ModelError::Empty);
        }
        if friction_mu < 0.0 {
            return Err(ModelError::BadFriction(friction_mu));
        }
        let mut names = std::collections::HashSet::new();
        for l in &links {
            if l.mass <= 0.0 {
                return Err(ModelError::BadMass(l.name.clone(), l.mass));
            }
            if !names.insert(l.name.clone()) {
                return Err(ModelError::DuplicateName(l.name.clone()));
            }
        }
        let mut parent_joint = vec![None; links.len()];
        for (ji, j) in joints.iter().enumerate() {
            if j.torque_limit < 0.0 {
                return Err(ModelError::BadTorqueLimit(j.name.clone(), j.torque_limit));
            }
            if j.limits[0] > j.limits[1] {
                return Err(ModelError::BadJointLimits(j.name.clone()));
            }
            if j.parent_link >= links.len() || j.child_link >= links.len() {
                return Err(ModelError::UnknownLink(j.name.clone()));
            }
            // joints must be listed parent-before-child so a single forward
            // pass computes the kinematics
            if j.parent_link >= j.child_link {
                return Err(ModelError::NotATree(links[j.child_link].name.clone()));
            }
            if parent_joint[j.child_link].is_some() {
                return Err(ModelError::NotATree(links[j.child_link].name.clone()));
            }
            parent_joint[j.child_link] = Some(ji);
        }
        for (li, l) in links.iter().enumerate().skip(1) {
            if parent_joint[li].is_none() {
                return Err(ModelError::NotATree(l.name.clone()));
            }
        }
        let mut cnames = std::collections::HashSet::new();
        for c in &contacts {
            if c.link >= links.len() {
                return Err(ModelError::UnknownLink(c.name.clone()));
            }
            if c.kind == ContactKind::Prong && c.link != 0 {
                return Err(ModelError::ProngNotOnBase(c.name.clone()));
            }
            if !cnames.insert(c.name.clone()) {
                return Err(ModelError::DuplicateName(c.name.clone()));
            }
        }
        Ok(Self {
            links,
            joints,
            contacts,
            gravity,
            friction_mu,
            floating_base,
            parent_joint,
        })
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }
    pub fn joints(&self) -> &[Joint] {
        &self.joints
    }
    pub fn contacts(&self) -> &[ContactPoint] {
        &self.contacts
    }
    pub fn gravity(&self) -> Vector3<f64> {
        self.gravity
    }
    pub fn friction_mu(&self) -> f64 {
        self.friction_mu
    }
    pub fn floating_base(&self) -> bool {
        self.floating_base
    }

    pub fn n_joints(&self) -> usize {
        self.joints.len()
    }

    /// Dimension of the generalised velocity vector.
    pub fn nv(&self) -> usize {
        self.joints.len() + if self.floating_base { 6 } else { 0 }
    }

    /// Column offset of the joint block in velocity coordinates.
    pub fn joint_col(&self, joint: usize) -> usize {
        joint + if self.floating_base { 6 } else { 0 }
    }

    pub fn contact_index(&self, name: &str) -> Result<usize, ModelError> {
        self.contacts
            .iter()
            .position(|c| c.name == name)
            .ok_or_else(|| ModelError::UnknownContact(name.to_string()))
    }

    pub fn joint_index(&self, name: &str) -> Option<usize> {
        self.joints.iter().position(|j| j.name == name)
    }

    /// Returns a copy with every prong contact re-attached at height `-length`
    /// below its torso anchor (the anchor keeps its x/y offset).
    pub fn with_prong_length(&self, length: f64) -> Self {
        let mut m = self.clone();
        for c in &mut m.contacts {
            if c.kind == ContactKind::Prong {
                c.offset.z = -length;
            }
        }
        m
    }

    /// Returns a copy without any prong contact points.
    pub fn without_prongs(&self) -> Self {
        let mut m = self.clone();
        m.contacts.retain(|c| c.kind != ContactKind::Prong);
        m
    }

    pub fn zero_state(&self) -> RobotState {
        RobotState {
            base_position: Vector3::zeros(),
            base_orientation: UnitQuaternion::identity(),
            joint_angles: DVector::zeros(self.n_joints()),
            velocity: DVector::zeros(self.nv()),
            desired_acceleration: DVector::zeros(self.nv()),
        }
    }

    fn check_state(&self, state: &RobotState) -> Result<(), ModelError> {
        if state.joint_angles.len() != self.n_joints() {
            return Err(ModelError::DimensionMismatch {
                expected: self.n_joints(),
                got: state.joint_angles.len(),
            });
        }
        if state.velocity.len() != self.nv() {
            return Err(ModelError::VelocityDimension {
                expected: self.nv(),
                got: state.velocity.len(),
            });
        }
        if state.desired_acceleration.len() != self.nv() {
            return Err(ModelError::VelocityDimension {
                expected: self.nv(),
                got: state.desired_acceleration.len(),
            });
        }
        let norm_err = (state.base_orientation.as_ref().norm() - 1.0).abs();
        if norm_err > QUAT_NORM_TOL {
            return Err(ModelError::QuaternionNotUnit(norm_err));
        }
        Ok(())
    }
}

/// Plain-data robot state: base pose, joint angles, generalised velocity and
/// the desired generalised acceleration used by the force analysis.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RobotState {
    pub base_position: Vector3<f64>,
    pub base_orientation: UnitQuaternion<f64>,
    pub joint_angles: DVector<f64>,
    pub velocity: DVector<f64>,
    pub desired_acceleration: DVector<f64>,
}

impl RobotState {
    /// Tangent-space retraction: base position and orientation move by the
    /// first 6 components (world frame, rotation on the left), joints by the
    /// rest. For fixed-base models `delta` only covers the joints.
    pub fn integrate(&self, model: &RobotModel, delta: &DVector<f64>) -> RobotState {
        let mut out = self.clone();
        let joff = if model.floating_base {
            let lin = Vector3::new(delta[0], delta[1], delta[2]);
            let ang = Vector3::new(delta[3], delta[4], delta[5]);
            out.base_position += lin;
            out.base_orientation = UnitQuaternion::from_scaled_axis(ang) * out.base_orientation;
            6
        } else {
            0
        };
        for j in 0..out.joint_angles.len() {
            out.joint_angles[j] += delta[joff + j];
        }
        out
    }

    /// Clamp joint angles to the model's position limits.
    pub fn clamp_joints(&mut self, model: &RobotModel) {
        for (j, joint) in model.joints().iter().enumerate() {
            self.joint_angles[j] = self.joint_angles[j].clamp(joint.limits[0], joint.limits[1]);
        }
    }
}

/// World transforms for every link plus world positions for every contact.
#[derive(Debug, Clone)]
pub struct ForwardKinematics {
    pub link_poses: Vec<Isometry3<f64>>,
    pub contact_positions: Vec<Point3<f64>>,
}

impl RobotModel {
    /// Forward kinematics for all links and contact points.
    pub fn forward_kinematics(&self, state: &RobotState) -> Result<ForwardKinematics, ModelError> {
        self.check_state(state)?;
        let base = if self.floating_base {
            Isometry3::from_parts(
                Translation3::from(state.base_position),
                state.base_orientation,
            )
        } else {
            Isometry3::identity()
        };
        let mut link_poses = vec![base; self.links.len()];
        for (li, _) in self.links.iter().enumerate().skip(1) {
            let ji = self.parent_joint[li].expect("validated tree");
            let joint = &self.joints[ji];
            let spin = UnitQuaternion::from_axis_angle(&joint.axis, state.joint_angles[ji]);
            link_poses[li] = link_poses[joint.parent_link]
                * joint.origin
                * Isometry3::from_parts(Translation3::identity(), spin);
        }
        let contact_positions = self
            .contacts
            .iter()
            .map(|c| link_poses[c.link] * Point3::from(c.offset))
            .collect();
        Ok(ForwardKinematics {
            link_poses,
            contact_positions,
        })
    }

    /// Map of frame name to world transform (links and contact points).
    /// Contact frames share their parent link's orientation.
    pub fn frame_map(&self, state: &RobotState) -> Result<BTreeMap<String, Isometry3<f64>>, ModelError> {
        let fk = self.forward_kinematics(state)?;
        let mut map = BTreeMap::new();
        for (li, link) in self.links.iter().enumerate() {
            map.insert(link.name.clone(), fk.link_poses[li]);
        }
        for (ci, c) in self.contacts.iter().enumerate() {
            let pose = Isometry3::from_parts(
                Translation3::from(fk.contact_positions[ci].coords),
                fk.link_poses[c.link].rotation,
            );
            map.insert(c.name.clone(), pose);
        }
        Ok(map)
    }

    /// 3 x nv Jacobian of a world point `p` attached to `link`.
    fn point_jacobian_raw(
        &self,
        fk: &ForwardKinematics,
        link: usize,
        p: &Point3<f64>,
    ) -> DMatrix<f64> {
        let mut jac = DMatrix::zeros(3, self.nv());
        if self.floating_base {
            jac.view_mut((0, 0), (3, 3)).copy_from(&Matrix3::identity());
            let r = p.coords - fk.link_poses[0].translation.vector;
            jac.view_mut((0, 3), (3, 3)).copy_from(&(-skew(&r)));
        }
        // walk up the chain accumulating revolute columns
        let mut li = link;
        while let Some(ji) = self.parent_joint[li] {
            let joint = &self.joints[ji];
            // joint frame pose: parent pose * origin (rotation about axis
            // happens after, so the axis and anchor live in this frame)
            let jf = fk.link_poses[joint.parent_link] * joint.origin;
            let axis_w = jf.rotation * joint.axis.into_inner();
            let anchor = jf.translation.vector;
            let col = axis_w.cross(&(p.coords - anchor));
            let c = self.joint_col(ji);
            jac[(0, c)] = col.x;
            jac[(1, c)] = col.y;
            jac[(2, c)] = col.z;
            li = joint.parent_link;
        }
        jac
    }

    /// 3 x nv velocity map of a named contact point.
    pub fn point_jacobian(
        &self,
        state: &RobotState,
        contact: &str,
    ) -> Result<DMatrix<f64>, ModelError> {
        let ci = self.contact_index(contact)?;
        let fk = self.forward_kinematics(state)?;
        Ok(self.point_jacobian_raw(&fk, self.contacts[ci].link, &fk.contact_positions[ci]))
    }

    /// Per-link world angular velocity/acceleration and the velocity and
    /// acceleration of each link's joint-anchor material point, with qdd = 0.
    fn velocity_pass(&self, state: &RobotState, fk: &ForwardKinematics) -> VelocityPass {
        let n = self.links.len();
        let mut w = vec![Vector3::zeros(); n];
        let mut dw = vec![Vector3::zeros(); n];
        let mut anchor = vec![Vector3::zeros(); n];
        let mut v = vec![Vector3::zeros(); n];
        let mut a = vec![Vector3::zeros(); n];
        anchor[0] = fk.link_poses[0].translation.vector;
        if self.floating_base {
            v[0] = Vector3::new(state.velocity[0], state.velocity[1], state.velocity[2]);
            w[0] = Vector3::new(state.velocity[3], state.velocity[4], state.velocity[5]);
        }
        for li in 1..n {
            let ji = self.parent_joint[li].expect("validated tree");
            let joint = &self.joints[ji];
            let p = joint.parent_link;
            let jf = fk.link_poses[p] * joint.origin;
            let axis_w = jf.rotation * joint.axis.into_inner();
            let o = jf.translation.vector;
            let r = o - anchor[p];
            let qd = state.velocity[self.joint_col(ji)];
            anchor[li] = o;
            v[li] = v[p] + w[p].cross(&r);
            a[li] = a[p] + dw[p].cross(&r) + w[p].cross(&w[p].cross(&r));
            w[li] = w[p] + axis_w * qd;
            dw[li] = dw[p] + w[p].cross(&axis_w) * qd;
        }
        VelocityPass { w, dw, anchor, v, a }
    }

    /// Acceleration of a world point fixed on `link` when qdd = 0 (the
    /// velocity-product term `Jdot * qdot` of that point).
    fn point_acc_bias(&self, vp: &VelocityPass, link: usize, p: &Point3<f64>) -> Vector3<f64> {
        let r = p.coords - vp.anchor[link];
        vp.a[link] + vp.dw[link].cross(&r) + vp.w[link].cross(&vp.w[link].cross(&r))
    }

    /// `Jdot * qdot` for a named contact point.
    pub fn contact_acc_bias(
        &self,
        state: &RobotState,
        contact: &str,
    ) -> Result<Vector3<f64>, ModelError> {
        let ci = self.contact_index(contact)?;
        let fk = self.forward_kinematics(state)?;
        let vp = self.velocity_pass(state, &fk);
        Ok(self.point_acc_bias(&vp, self.contacts[ci].link, &fk.contact_positions[ci]))
    }

    /// Dynamic bias h(q, qd): velocity-product terms plus gravity, moved to
    /// the left-hand side of `M qdd + h = B tau + J' lambda`.
    /// With qd = 0 this is the generalised gravity force, i.e. the gradient
    /// of the total potential energy with respect to q.
    pub fn dynamics_bias(&self, state: &RobotState) -> Result<DVector<f64>, ModelError> {
        let fk = self.forward_kinematics(state)?;
        let vp = self.velocity_pass(state, &fk);
        let mut h = DVector::zeros(self.nv());
        for (li, link) in self.links.iter().enumerate() {
            let com = fk.link_poses[li] * Point3::from(link.com);
            let jac = self.point_jacobian_raw(&fk, li, &com);
            let acc = self.point_acc_bias(&vp, li, &com);
            h += jac.transpose() * ((acc - self.gravity) * link.mass);
        }
        Ok(h)
    }

    /// Point-mass mass matrix `sum_i m_i J_i' J_i`.
    pub fn mass_matrix(&self, state: &RobotState) -> Result<DMatrix<f64>, ModelError> {
        let fk = self.forward_kinematics(state)?;
        let mut m = DMatrix::zeros(self.nv(), self.nv());
        for (li, link) in self.links.iter().enumerate() {
            let com = fk.link_poses[li] * Point3::from(link.com);
            let jac = self.point_jacobian_raw(&fk, li, &com);
            m += jac.transpose() * &jac * link.mass;
        }
        Ok(m)
    }

    /// Total potential energy (for the finite-difference gravity oracle).
    pub fn potential_energy(&self, state: &RobotState) -> Result<f64, ModelError> {
        let fk = self.forward_kinematics(state)?;
        let mut e = 0.0;
        for (li, link) in self.links.iter().enumerate() {
            let com = fk.link_poses[li] * Point3::from(link.com);
            e -= link.mass * self.gravity.dot(&com.coords);
        }
        Ok(e)
    }
}

struct VelocityPass {
    w: Vec<Vector3<f64>>,
    dw: Vec<Vector3<f64>>,
    anchor: Vec<Vector3<f64>>,
    #[allow(dead_code)]
    v: Vec<Vector3<f64>>,
    a: Vec<Vector3<f64>>,
}

/// Options for the transpose-Jacobian inverse kinematics.
#[derive(Debug, Clone)]
pub struct IkOptions {
    pub max_iter: usize,
    /// Convergence threshold on the stacked task-space error norm, m.
    pub tol: f64,
    /// Keep the base pose fixed and move joints only.
    pub lock_base: bool,
}

impl Default for IkOptions {
    fn default() -> Self {
        Self {
            max_iter: 500,
            tol: 1e-4,
            lock_base: true,
        }
    }
}

/// Step gain of the transpose-Jacobian update; halved within an iteration
/// whenever the task error would grow, which makes the error monotone.
const IK_GAIN: f64 = 0.5;
const IK_MIN_GAIN: f64 = 1e-7;

impl RobotModel {
    /// Transpose-Jacobian IK driving the named contacts to world targets.
    ///
    /// Returns the converged state, or an [`IkFailure`] carrying the final
    /// residual and the best state reached.
    pub fn ik_transpose(
        &self,
        targets: &[(String, Point3<f64>)],
        seed: &RobotState,
        opts: &IkOptions,
    ) -> Result<RobotState, IkFailure> {
        let ids: Vec<usize> = targets
            .iter()
            .map(|(n, _)| self.contact_index(n).expect("IK target must exist"))
            .collect();
        let mut state = seed.clone();
        let mut err = self.ik_error(&state, &ids, targets);
        let mut err_norm = err.norm();
        let mut iterations = 0;
        for _ in 0..opts.max_iter {
            if err_norm < opts.tol {
                return Ok(state);
            }
            iterations += 1;
            let fk = self.forward_kinematics(&state).expect("dims already checked");
            let mut jac = DMatrix::zeros(3 * ids.len(), self.nv());
            for (k, &ci) in ids.iter().enumerate() {
                let j = self.point_jacobian_raw(&fk, self.contacts[ci].link, &fk.contact_positions[ci]);
                jac.view_mut((3 * k, 0), (3, self.nv())).copy_from(&j);
            }
            let mut step = jac.transpose() * &err;
            if opts.lock_base && self.floating_base {
                for i in 0..6 {
                    step[i] = 0.0;
                }
            }
            // backtracking on the fixed transpose gain keeps the error monotone
            let mut gain = IK_GAIN;
            loop {
                let mut cand = state.integrate(self, &(&step * gain));
                cand.clamp_joints(self);
                let cand_err = self.ik_error(&cand, &ids, targets);
                let cand_norm = cand_err.norm();
                if cand_norm <= err_norm {
                    state = cand;
                    err = cand_err;
                    err_norm = cand_norm;
                    break;
                }
                gain *= 0.5;
                if gain < IK_MIN_GAIN {
                    return Err(IkFailure {
                        residual: err_norm,
                        iterations,
                        best: state,
                    });
                }
            }
        }
        if err_norm < opts.tol {
            Ok(state)
        } else {
            Err(IkFailure {
                residual: err_norm,
                iterations,
                best: state,
            })
        }
    }

    fn ik_error(
        &self,
        state: &RobotState,
        ids: &[usize],
        targets: &[(String, Point3<f64>)],
    ) -> DVector<f64> {
        let fk = self.forward_kinematics(state).expect("dims already checked");
        let mut e = DVector::zeros(3 * ids.len());
        for (k, (&ci, (_, target))) in ids.iter().zip(targets.iter()).enumerate() {
            let d = target - fk.contact_positions[ci];
            e[3 * k] = d.x;
            e[3 * k + 1] = d.y;
            e[3 * k + 2] = d.z;
        }
        e
    }
}

pub fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn planar_two_link() -> RobotModel {
        // shoulder at origin, two links of 0.3 m along +x, revolute about z
        let links = vec![
            Link { name: "base".into(), mass: 1.0, com: Vector3::zeros() },
            Link { name: "upper".into(), mass: 1.0, com: Vector3::new(0.15, 0.0, 0.0) },
            Link { name: "lower".into(), mass: 1.0, com: Vector3::new(0.15, 0.0, 0.0) },
        ];
        let joints = vec![
            Joint {
                name: "shoulder".into(),
                parent_link: 0,
                child_link: 1,
                axis: Unit::new_normalize(Vector3::z()),
                origin: Isometry3::identity(),
                limits: [-3.0, 3.0],
                torque_limit: 40.0,
            },
            Joint {
                name: "elbow".into(),
                parent_link: 1,
                child_link: 2,
                axis: Unit::new_normalize(Vector3::z()),
                origin: Isometry3::translation(0.3, 0.0, 0.0),
                limits: [-3.0, 3.0],
                torque_limit: 40.0,
            },
        ];
        let contacts = vec![ContactPoint {
            name: "tip".into(),
            kind: ContactKind::EndEffector,
            link: 2,
            offset: Vector3::new(0.3, 0.0, 0.0),
        }];
        RobotModel::new(
            links,
            joints,
            contacts,
            Vector3::new(0.0, 0.0, -9.81),
            0.5,
            false,
        )
        .unwrap()
    }

    fn single_body(mass: f64) -> RobotModel {
        RobotModel::new(
            vec![Link { name: "base".into(), mass, com: Vector3::zeros() }],
            vec![],
            vec![ContactPoint {
                name: "p".into(),
                kind: ContactKind::Foot,
                link: 0,
                offset: Vector3::zeros(),
            }],
            Vector3::new(0.0, 0.0, -9.81),
            0.5,
            true,
        )
        .unwrap()
    }

    #[test]
    fn zero_configuration_matches_chained_origins() {
        let m = planar_two_link();
        let fk = m.forward_kinematics(&m.zero_state()).unwrap();
        assert_relative_eq!(fk.contact_positions[0].x, 0.6, epsilon = 1e-14);
        assert_relative_eq!(fk.contact_positions[0].y, 0.0, epsilon = 1e-14);
    }

    #[test]
    fn two_link_elbow_bend() {
        // angles (0 deg, 90 deg) -> tip at (0.3, 0.3) relative to the shoulder
        let m = planar_two_link();
        let mut s = m.zero_state();
        s.joint_angles[1] = std::f64::consts::FRAC_PI_2;
        let fk = m.forward_kinematics(&s).unwrap();
        assert_relative_eq!(fk.contact_positions[0].x, 0.3, epsilon = 1e-12);
        assert_relative_eq!(fk.contact_positions[0].y, 0.3, epsilon = 1e-12);
    }

    #[test]
    fn base_translation_shifts_all_frames() {
        let m = single_body(10.0);
        let mut s = m.zero_state();
        s.base_position = Vector3::new(1.0, 2.0, 3.0);
        let fk = m.forward_kinematics(&s).unwrap();
        assert_relative_eq!(fk.contact_positions[0].coords, Vector3::new(1.0, 2.0, 3.0));
        let frames = m.frame_map(&s).unwrap();
        assert_relative_eq!(frames["base"].translation.vector, Vector3::new(1.0, 2.0, 3.0));
    }

    #[test]
    fn single_revolute_jacobian_norm() {
        // point at radius 0.5 from a z-axis joint: column norm 0.5, and the
        // column is perpendicular to the radius vector
        let links = vec![
            Link { name: "base".into(), mass: 1.0, com: Vector3::zeros() },
            Link { name: "arm".into(), mass: 1.0, com: Vector3::new(0.25, 0.0, 0.0) },
        ];
        let joints = vec![Joint {
            name: "j".into(),
            parent_link: 0,
            child_link: 1,
            axis: Unit::new_normalize(Vector3::z()),
            origin: Isometry3::identity(),
            limits: [-3.0, 3.0],
            torque_limit: 10.0,
        }];
        let contacts = vec![ContactPoint {
            name: "tip".into(),
            kind: ContactKind::EndEffector,
            link: 1,
            offset: Vector3::new(0.5, 0.0, 0.0),
        }];
        let m = RobotModel::new(links, joints, contacts, Vector3::zeros(), 0.5, false).unwrap();
        let mut s = m.zero_state();
        s.joint_angles[0] = 0.7;
        let jac = m.point_jacobian(&s, "tip").unwrap();
        let col = Vector3::new(jac[(0, 0)], jac[(1, 0)], jac[(2, 0)]);
        assert_relative_eq!(col.norm(), 0.5, epsilon = 1e-12);
        let fk = m.forward_kinematics(&s).unwrap();
        assert_relative_eq!(col.dot(&fk.contact_positions[0].coords), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let m = planar_two_link();
        let mut s = m.zero_state();
        s.joint_angles[0] = 0.3;
        s.joint_angles[1] = -0.9;
        let jac = m.point_jacobian(&s, "tip").unwrap();
        let h = 1e-6;
        for c in 0..m.nv() {
            let mut d = DVector::zeros(m.nv());
            d[c] = h;
            let sp = s.integrate(&m, &d);
            d[c] = -h;
            let sm = s.integrate(&m, &d);
            let pp = m.forward_kinematics(&sp).unwrap().contact_positions[0];
            let pm = m.forward_kinematics(&sm).unwrap().contact_positions[0];
            let fd = (pp - pm) / (2.0 * h);
            for r in 0..3 {
                assert_relative_eq!(jac[(r, c)], fd[r], epsilon = 1e-5);
            }
        }
    }

    #[test]
    fn gravity_bias_of_free_body() {
        let m = single_body(10.0);
        let h = m.dynamics_bias(&m.zero_state()).unwrap();
        assert_relative_eq!(h[0], 0.0, epsilon = 1e-12);
        assert_relative_eq!(h[1], 0.0, epsilon = 1e-12);
        assert_relative_eq!(h[2], 98.1, epsilon = 1e-12);
    }

    #[test]
    fn zero_gravity_zero_bias() {
        let mut m = single_body(10.0);
        m.gravity = Vector3::zeros();
        let h = m.dynamics_bias(&m.zero_state()).unwrap();
        assert!(h.norm() < 1e-15);
    }

    #[test]
    fn gravity_bias_is_potential_gradient() {
        let m = planar_two_link();
        let mut s = m.zero_state();
        s.joint_angles[0] = 0.4;
        s.joint_angles[1] = 0.8;
        let bias = m.dynamics_bias(&s).unwrap();
        let h = 1e-6;
        for c in 0..m.nv() {
            let mut d = DVector::zeros(m.nv());
            d[c] = h;
            let ep = m.potential_energy(&s.integrate(&m, &d)).unwrap();
            d[c] = -h;
            let em = m.potential_energy(&s.integrate(&m, &d)).unwrap();
            assert_relative_eq!(bias[c], (ep - em) / (2.0 * h), epsilon = 1e-5);
        }
    }

    #[test]
    fn prong_jacobian_has_zero_joint_columns() {
        let links = vec![
            Link { name: "base".into(), mass: 5.0, com: Vector3::zeros() },
            Link { name: "arm".into(), mass: 1.0, com: Vector3::new(0.1, 0.0, 0.0) },
        ];
        let joints = vec![Joint {
            name: "j".into(),
            parent_link: 0,
            child_link: 1,
            axis: Unit::new_normalize(Vector3::y()),
            origin: Isometry3::translation(0.2, 0.0, 0.0),
            limits: [-2.0, 2.0],
            torque_limit: 10.0,
        }];
        let contacts = vec![ContactPoint {
            name: "prong".into(),
            kind: ContactKind::Prong,
            link: 0,
            offset: Vector3::new(0.25, 0.0, -0.3),
        }];
        let m =
            RobotModel::new(links, joints, contacts, Vector3::new(0.0, 0.0, -9.81), 0.5, true)
                .unwrap();
        let mut s = m.zero_state();
        s.joint_angles[0] = 0.5;
        let jac = m.point_jacobian(&s, "prong").unwrap();
        assert_eq!(jac[(0, 6)], 0.0);
        assert_eq!(jac[(1, 6)], 0.0);
        assert_eq!(jac[(2, 6)], 0.0);
        // base columns are populated
        assert!(jac.view((0, 0), (3, 6)).norm() > 0.9);
    }

    #[test]
    fn ik_fixed_point_returns_seed() {
        let m = planar_two_link();
        let s = m.zero_state();
        let fk = m.forward_kinematics(&s).unwrap();
        let targets = vec![("tip".to_string(), fk.contact_positions[0])];
        let out = m.ik_transpose(&targets, &s, &IkOptions::default()).unwrap();
        assert_eq!(out.joint_angles, s.joint_angles);
    }

    #[test]
    fn ik_reaches_nearby_target() {
        let m = planar_two_link();
        let mut seed = m.zero_state();
        seed.joint_angles[1] = 0.5; // away from the straight-arm singularity
        let target = Point3::new(0.45, 0.25, 0.0);
        let opts = IkOptions { max_iter: 3000, tol: 1e-3, lock_base: true };
        let out = m
            .ik_transpose(&[("tip".to_string(), target)], &seed, &opts)
            .unwrap();
        let fk = m.forward_kinematics(&out).unwrap();
        assert!((fk.contact_positions[0] - target).norm() < 1e-3);
    }

    #[test]
    fn ik_unreachable_reports_residual() {
        let m = planar_two_link();
        let err = m
            .ik_transpose(
                &[("tip".to_string(), Point3::new(10.0, 0.0, 0.0))],
                &m.zero_state(),
                &IkOptions::default(),
            )
            .unwrap_err();
        assert!(err.residual > 9.0);
    }

    #[test]
    fn invariants_rejected() {
        assert!(RobotModel::new(
            vec![Link { name: "b".into(), mass: -1.0, com: Vector3::zeros() }],
            vec![],
            vec![],
            Vector3::zeros(),
            0.5,
            true
        )
        .is_err());
        assert!(RobotModel::new(
            vec![Link { name: "b".into(), mass: 1.0, com: Vector3::zeros() }],
            vec![],
            vec![],
            Vector3::zeros(),
            -0.1,
            true
        )
        .is_err());
    }
}
