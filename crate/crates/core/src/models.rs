//! Built-in robot descriptions: a desk-scale quadruped (12 revolute joints,
//! optional 3-joint arm, two torso prongs) and a single-body fixture with a
//! closed-form force polytope.
//!
//! The quadruped numbers are configuration defaults for the analysis, not
//! measurements of any particular platform.

use nalgebra::{Isometry3, Point3, Unit, Vector3};

use crate::model::{
    ContactKind, ContactPoint, IkFailure, IkOptions, Joint, Link, RobotModel, RobotState,
};

pub const GRAVITY: f64 = 9.81;

/// Torso mass kg.
const TORSO_MASS: f64 = 30.0;
/// Each leg link mass kg.
const LEG_LINK_MASS: f64 = 2.0;
/// Arm link mass kg.
const ARM_LINK_MASS: f64 = 1.0;
/// Joint torque limit N*m.
const TORQUE_LIMIT: f64 = 40.0;
/// Hip positions on the torso (x, y).
const HIP_X: f64 = 0.30;
const HIP_Y: f64 = 0.15;
/// Lateral offset from hip abduction to hip flexion.
const HIP_OFFSET: f64 = 0.08;
/// Thigh and shank lengths m.
const THIGH: f64 = 0.27;
const SHANK: f64 = 0.27;
/// Prong anchors sit on the torso x-axis, as far apart as leg clearance
/// allows on this geometry.
pub const PRONG_X: f64 = 0.25;
/// Default prong length m (overridden by the design module).
pub const DEFAULT_PRONG_LENGTH: f64 = 0.35;
/// Arm mount on the torso.
const ARM_MOUNT: [f64; 3] = [0.32, 0.0, 0.05];
const ARM_UPPER: f64 = 0.30;
const ARM_FORE: f64 = 0.30;

/// Maximum torso height with legs fully stretched.
pub fn max_torso_height() -> f64 {
    THIGH + SHANK
}

/// Desk-scale quadruped: 3 joints per leg (abduction, hip flexion, knee),
/// floating base, two prongs on the torso x-axis, and optionally a 3-joint
/// arm whose tip is the end-effector.
pub fn default_quadruped(with_arm: bool) -> RobotModel {
    let mut links = vec![Link {
        name: "torso".into(),
        mass: TORSO_MASS,
        com: Vector3::zeros(),
    }];
    let mut joints = Vec::new();
    let mut contacts = Vec::new();

    let legs = [
        ("lf", HIP_X, HIP_Y, 1.0),
        ("rf", HIP_X, -HIP_Y, -1.0),
        ("lh", -HIP_X, HIP_Y, 1.0),
        ("rh", -HIP_X, -HIP_Y, -1.0),
    ];
    for (prefix, hx, hy, side) in legs {
        let hip = links.len();
        links.push(Link {
            name: format!("{prefix}_hip"),
            mass: LEG_LINK_MASS,
            com: Vector3::new(0.0, side * HIP_OFFSET / 2.0, 0.0),
        });
        joints.push(Joint {
            name: format!("{prefix}_haa"),
            parent_link: 0,
            child_link: hip,
            axis: Unit::new_normalize(Vector3::x()),
            origin: Isometry3::translation(hx, hy, 0.0),
            limits: [-0.7, 0.7],
            torque_limit: TORQUE_LIMIT,
        });
        let thigh = links.len();
        links.push(Link {
            name: format!("{prefix}_thigh"),
            mass: LEG_LINK_MASS,
            com: Vector3::new(0.0, 0.0, -THIGH / 2.0),
        });
        joints.push(Joint {
            name: format!("{prefix}_hfe"),
            parent_link: hip,
            child_link: thigh,
            axis: Unit::new_normalize(Vector3::y()),
            origin: Isometry3::translation(0.0, side * HIP_OFFSET, 0.0),
            limits: [-1.6, 1.6],
            torque_limit: TORQUE_LIMIT,
        });
        let shank = links.len();
        links.push(Link {
            name: format!("{prefix}_shank"),
            mass: LEG_LINK_MASS,
            com: Vector3::new(0.0, 0.0, -SHANK / 2.0),
        });
        joints.push(Joint {
            name: format!("{prefix}_kfe"),
            parent_link: thigh,
            child_link: shank,
            axis: Unit::new_normalize(Vector3::y()),
            origin: Isometry3::translation(0.0, 0.0, -THIGH),
            limits: [-2.4, 2.4],
            torque_limit: TORQUE_LIMIT,
        });
        contacts.push(ContactPoint {
            name: format!("{prefix}_foot"),
            kind: ContactKind::Foot,
            link: shank,
            offset: Vector3::new(0.0, 0.0, -SHANK),
        });
    }

    contacts.push(ContactPoint {
        name: "left_prong".into(),
        kind: ContactKind::Prong,
        link: 0,
        offset: Vector3::new(PRONG_X, 0.0, -DEFAULT_PRONG_LENGTH),
    });
    contacts.push(ContactPoint {
        name: "right_prong".into(),
        kind: ContactKind::Prong,
        link: 0,
        offset: Vector3::new(-PRONG_X, 0.0, -DEFAULT_PRONG_LENGTH),
    });

    if with_arm {
        let shoulder = links.len();
        links.push(Link {
            name: "arm_shoulder".into(),
            mass: ARM_LINK_MASS,
            com: Vector3::new(0.03, 0.0, 0.0),
        });
        joints.push(Joint {
            name: "arm_yaw".into(),
            parent_link: 0,
            child_link: shoulder,
            axis: Unit::new_normalize(Vector3::z()),
            origin: Isometry3::translation(ARM_MOUNT[0], ARM_MOUNT[1], ARM_MOUNT[2]),
            limits: [-2.6, 2.6],
            torque_limit: TORQUE_LIMIT,
        });
        let upper = links.len();
        links.push(Link {
            name: "arm_upper".into(),
            mass: ARM_LINK_MASS,
            com: Vector3::new(ARM_UPPER / 2.0, 0.0, 0.0),
        });
        joints.push(Joint {
            name: "arm_pitch".into(),
            parent_link: shoulder,
            child_link: upper,
            axis: Unit::new_normalize(Vector3::y()),
            origin: Isometry3::translation(0.06, 0.0, 0.0),
            limits: [-2.6, 2.6],
            torque_limit: TORQUE_LIMIT,
        });
        let fore = links.len();
        links.push(Link {
            name: "arm_fore".into(),
            mass: ARM_LINK_MASS,
            com: Vector3::new(ARM_FORE / 2.0, 0.0, 0.0),
        });
        joints.push(Joint {
            name: "arm_elbow".into(),
            parent_link: upper,
            child_link: fore,
            axis: Unit::new_normalize(Vector3::y()),
            origin: Isometry3::translation(ARM_UPPER, 0.0, 0.0),
            limits: [-2.6, 2.6],
            torque_limit: TORQUE_LIMIT,
        });
        contacts.push(ContactPoint {
            name: "arm_ee".into(),
            kind: ContactKind::EndEffector,
            link: fore,
            offset: Vector3::new(ARM_FORE, 0.0, 0.0),
        });
    }

    RobotModel::new(
        links,
        joints,
        contacts,
        Vector3::new(0.0, 0.0, -GRAVITY),
        0.5,
        true,
    )
    .expect("builtin model is valid")
}

/// Default symmetric foot targets for a stance at torso height `b_z`.
pub fn default_foot_targets(b_z: f64) -> Vec<(String, Point3<f64>)> {
    foot_targets(HIP_X, HIP_Y + HIP_OFFSET, b_z)
}

/// Symmetric foot targets at (+-x_f, +-y_f, 0) given torso height `b_z`
/// (the torso sits at (0, 0, b_z), so targets are world coordinates).
pub fn foot_targets(x_f: f64, y_f: f64, _b_z: f64) -> Vec<(String, Point3<f64>)> {
    vec![
        ("lf_foot".into(), Point3::new(x_f, y_f, 0.0)),
        ("rf_foot".into(), Point3::new(x_f, -y_f, 0.0)),
        ("lh_foot".into(), Point3::new(-x_f, y_f, 0.0)),
        ("rh_foot".into(), Point3::new(-x_f, -y_f, 0.0)),
    ]
}

/// A comfortable bent-knee seed for leg IK.
pub fn leg_seed(model: &RobotModel, b_z: f64) -> RobotState {
    let mut s = model.zero_state();
    s.base_position = Vector3::new(0.0, 0.0, b_z);
    // bend knees so the transpose IK starts away from the straight-leg
    // singularity; sign pattern points knees backward
    for (j, joint) in model.joints().iter().enumerate() {
        if joint.name.ends_with("_hfe") {
            s.joint_angles[j] = 0.5;
        } else if joint.name.ends_with("_kfe") {
            s.joint_angles[j] = -1.0;
        } else if joint.name == "arm_pitch" {
            s.joint_angles[j] = -0.6;
        } else if joint.name == "arm_elbow" {
            s.joint_angles[j] = 0.9;
        }
    }
    s
}

/// Nominal standing posture: torso level at `b_z`, feet at the default
/// symmetric targets.
pub fn nominal_stance(model: &RobotModel, b_z: f64) -> Result<RobotState, IkFailure> {
    let seed = leg_seed(model, b_z);
    let opts = IkOptions {
        max_iter: 4000,
        tol: 1e-7,
        lock_base: true,
    };
    model.ik_transpose(&default_foot_targets(b_z), &seed, &opts)
}

/// Single rigid body (mass kg) with one support contact and the disturbance
/// applied at the centre of mass. Its force polytope has the closed-form
/// inscribed radius `(sqrt2/2) mu m g / sqrt(1 + mu^2/2)`.
pub fn single_body_fixture(mass: f64, mu: f64) -> RobotModel {
    RobotModel::new(
        vec![Link {
            name: "base".into(),
            mass,
            com: Vector3::zeros(),
        }],
        vec![],
        vec![
            ContactPoint {
                name: "support".into(),
                kind: ContactKind::Foot,
                link: 0,
                offset: Vector3::zeros(),
            },
            ContactPoint {
                name: "ee".into(),
                kind: ContactKind::EndEffector,
                link: 0,
                offset: Vector3::zeros(),
            },
        ],
        Vector3::new(0.0, 0.0, -GRAVITY),
        mu,
        true,
    )
    .expect("fixture is valid")
}
