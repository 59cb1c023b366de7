//! Analytic forward kinematics and Jacobians for a configurable serial
//! revolute chain — the known forward model the inverse model is trained
//! against.
//!
//! Convention: joint i first rotates the current frame about its local axis,
//! then translates along the rotated local +x by the link length. At q = 0
//! the whole arm lies along +x, so `fk(0) == (reach, 0, 0)`.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// End-effector position in centimeters.
pub type Position3 = [f64; 3];

/// Local rotation axis of a revolute joint.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Axis {
    X,
    Y,
    Z,
}

/// Serial revolute chain: per-joint rotation axis, link length (cm), and
/// joint limits (radians).
#[derive(Clone, Debug, PartialEq)]
pub struct KinematicChain {
    axes: Vec<Axis>,
    link_lengths: Vec<f64>,
    joint_limits: Vec<(f64, f64)>,
}

impl KinematicChain {
    /// Validated constructor.
    ///
    /// Errors on mismatched list lengths, non-positive link lengths, or
    /// inverted limits (`lo > hi`; collapsed `lo == hi` is allowed so a
    /// joint can be frozen).
    pub fn new(
        axes: Vec<Axis>,
        link_lengths: Vec<f64>,
        joint_limits: Vec<(f64, f64)>,
    ) -> Result<Self> {
        let n = axes.len();
        if link_lengths.len() != n {
            return Err(Error::dims(n, link_lengths.len(), "link lengths"));
        }
        if joint_limits.len() != n {
            return Err(Error::dims(n, joint_limits.len(), "joint limits"));
        }
        for (i, &len) in link_lengths.iter().enumerate() {
            if !(len > 0.0) {
                return Err(Error::NonPositiveLength {
                    index: i,
                    length: len,
                });
            }
        }
        for (i, &(lo, hi)) in joint_limits.iter().enumerate() {
            if lo > hi || !lo.is_finite() || !hi.is_finite() {
                return Err(Error::InvertedLimits { index: i, lo, hi });
            }
        }
        Ok(Self {
            axes,
            link_lengths,
            joint_limits,
        })
    }

    /// The default experimental arm: six 20 cm links on alternating Z/Y
    /// axes (full 3D workspace, 3 redundant DOF for a position task), with
    /// symmetric joint limits of `±half_range` radians on every joint.
    pub fn default6(half_range: f64) -> Self {
        Self::new(
            vec![Axis::Z, Axis::Y, Axis::Z, Axis::Y, Axis::Z, Axis::Y],
            vec![20.0; 6],
            vec![(-half_range, half_range); 6],
        )
        .expect("default6 parameters are valid")
    }

    pub fn n_joints(&self) -> usize {
        self.axes.len()
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn link_lengths(&self) -> &[f64] {
        &self.link_lengths
    }

    pub fn joint_limits(&self) -> &[(f64, f64)] {
        &self.joint_limits
    }

    /// Sum of link lengths: the radius of the reachable sphere.
    pub fn reach(&self) -> f64 {
        self.link_lengths.iter().sum()
    }

    /// Same axes and limits with every link length shifted by `delta_cm`.
    pub fn perturb_link_lengths(&self, delta_cm: f64) -> Result<Self> {
        let lengths = self.link_lengths.iter().map(|l| l + delta_cm).collect();
        Self::new(self.axes.clone(), lengths, self.joint_limits.clone())
    }

    /// Same axes and limits with replaced link lengths (used by the
    /// forward-model refit).
    pub fn with_link_lengths(&self, lengths: Vec<f64>) -> Result<Self> {
        Self::new(self.axes.clone(), lengths, self.joint_limits.clone())
    }

    /// End position for joint angles `q` (radians).
    ///
    /// Panics if `q.len() != n_joints`.
    pub fn fk(&self, q: &[f64]) -> Position3 {
        assert_eq!(q.len(), self.n_joints(), "q length must match joint count");
        let mut rot = Rot3::identity();
        let mut p = [0.0f64; 3];
        for ((&axis, &angle), &len) in self.axes.iter().zip(q).zip(&self.link_lengths) {
            rot.rotate_local(axis, angle);
            let dir = rot.col(0);
            p[0] += len * dir[0];
            p[1] += len * dir[1];
            p[2] += len * dir[2];
        }
        p
    }

    /// Position Jacobian ∂p/∂q, 3 x n_joints.
    ///
    /// Column j is (world axis of joint j) x (p_end - origin of joint j).
    pub fn joint_jacobian(&self, q: &[f64]) -> crate::linalg::Matrix {
        assert_eq!(q.len(), self.n_joints(), "q length must match joint count");
        let n = self.n_joints();
        let mut rot = Rot3::identity();
        let mut p = [0.0f64; 3];
        let mut origins = Vec::with_capacity(n);
        let mut axes_w = Vec::with_capacity(n);
        for ((&axis, &angle), &len) in self.axes.iter().zip(q).zip(&self.link_lengths) {
            origins.push(p);
            // the world direction of a joint's axis is unchanged by its own
            // rotation, so reading it before or after is equivalent
            axes_w.push(rot.col(axis as usize));
            rot.rotate_local(axis, angle);
            let dir = rot.col(0);
            p[0] += len * dir[0];
            p[1] += len * dir[1];
            p[2] += len * dir[2];
        }
        let mut jac = crate::linalg::Matrix::zeros(3, n);
        for j in 0..n {
            let lever = sub(p, origins[j]);
            let col = cross(axes_w[j], lever);
            for r in 0..3 {
                jac.data_mut()[r * n + j] = col[r];
            }
        }
        jac
    }

    /// Link-length Jacobian ∂p/∂L, 3 x n_joints: column j is the world
    /// direction of link j. fk is linear in the lengths, so
    /// `fk(q) == link_jacobian(q) · link_lengths` exactly.
    pub fn link_jacobian(&self, q: &[f64]) -> crate::linalg::Matrix {
        assert_eq!(q.len(), self.n_joints(), "q length must match joint count");
        let n = self.n_joints();
        let mut rot = Rot3::identity();
        let mut jac = crate::linalg::Matrix::zeros(3, n);
        for (j, (&axis, &angle)) in self.axes.iter().zip(q).enumerate() {
            rot.rotate_local(axis, angle);
            let dir = rot.col(0);
            for r in 0..3 {
                jac.data_mut()[r * n + j] = dir[r];
            }
        }
        jac
    }
}

/// 3x3 rotation, row-major.
#[derive(Clone, Copy)]
struct Rot3 {
    m: [f64; 9],
}

impl Rot3 {
    fn identity() -> Self {
        Self {
            m: [1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0],
        }
    }

    fn col(&self, c: usize) -> [f64; 3] {
        [self.m[c], self.m[3 + c], self.m[6 + c]]
    }

    fn set_col(&mut self, c: usize, v: [f64; 3]) {
        self.m[c] = v[0];
        self.m[3 + c] = v[1];
        self.m[6 + c] = v[2];
    }

    /// Right-multiply by a rotation about a local axis: only two columns
    /// mix, the axis column is untouched.
    ///
    /// With (a, b) the column pair below, R * Rot(axis) gives
    /// a' = c*a + s*b and b' = -s*a + c*b.
    fn rotate_local(&mut self, axis: Axis, angle: f64) {
        let (s, c) = angle.sin_cos();
        let (ca, cb) = match axis {
            Axis::Z => (0, 1),
            Axis::Y => (2, 0),
            Axis::X => (1, 2),
        };
        let a = self.col(ca);
        let b = self.col(cb);
        self.set_col(ca, [c * a[0] + s * b[0], c * a[1] + s * b[1], c * a[2] + s * b[2]]);
        self.set_col(cb, [c * b[0] - s * a[0], c * b[1] - s * a[1], c * b[2] - s * a[2]]);
    }
}

pub fn sub(a: Position3, b: Position3) -> Position3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub fn cross(a: Position3, b: Position3) -> Position3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub fn norm(a: Position3) -> f64 {
    (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt()
}

/// Euclidean distance between two positions, cm.
pub fn distance(a: Position3, b: Position3) -> f64 {
    norm(sub(a, b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::FRAC_PI_2;

    fn planar2() -> KinematicChain {
        KinematicChain::new(
            vec![Axis::Z, Axis::Z],
            vec![10.0, 10.0],
            vec![(-std::f64::consts::PI, std::f64::consts::PI); 2],
        )
        .unwrap()
    }

    #[test]
    fn default6_reach_and_zero_pose() {
        let chain = KinematicChain::default6(FRAC_PI_2);
        assert_eq!(chain.n_joints(), 6);
        assert_eq!(chain.reach(), 120.0);
        let p = chain.fk(&[0.0; 6]);
        assert_abs_diff_eq!(p[0], 120.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p[1], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p[2], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn base_z_rotation_swings_whole_arm() {
        let chain = KinematicChain::default6(FRAC_PI_2);
        let p = chain.fk(&[FRAC_PI_2, 0.0, 0.0, 0.0, 0.0, 0.0]);
        assert_abs_diff_eq!(p[0], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p[1], 120.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p[2], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn second_joint_y_rotation_folds_distal_links_down() {
        let chain = KinematicChain::default6(FRAC_PI_2);
        // +90 deg about local Y maps +x to -z for all links after joint 2
        let p = chain.fk(&[0.0, FRAC_PI_2, 0.0, 0.0, 0.0, 0.0]);
        assert_abs_diff_eq!(p[0], 20.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p[1], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p[2], -100.0, epsilon = 1e-12);
    }

    #[test]
    fn planar_two_link_jacobian_at_zero() {
        let jac = planar2().joint_jacobian(&[0.0, 0.0]);
        // textbook columns: (0, 20, 0) and (0, 10, 0)
        let n = 2;
        assert_abs_diff_eq!(jac.data()[n], 20.0, epsilon = 1e-12); // row y, col 0
        assert_abs_diff_eq!(jac.data()[n + 1], 10.0, epsilon = 1e-12); // row y, col 1
        assert_abs_diff_eq!(jac.data()[0], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(jac.data()[2 * n], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn jacobian_column_norms_bounded_by_reach() {
        let chain = KinematicChain::default6(FRAC_PI_2);
        let q = [0.3, -0.7, 1.1, 0.2, -0.4, 0.9];
        let jac = chain.joint_jacobian(&q);
        let n = chain.n_joints();
        for j in 0..n {
            let col = [jac.data()[j], jac.data()[n + j], jac.data()[2 * n + j]];
            assert!(norm(col) <= chain.reach() + 1e-9);
        }
    }

    #[test]
    fn link_jacobian_at_zero_is_all_plus_x() {
        let chain = KinematicChain::default6(FRAC_PI_2);
        let jac = chain.link_jacobian(&[0.0; 6]);
        let n = 6;
        for j in 0..n {
            assert_abs_diff_eq!(jac.data()[j], 1.0, epsilon = 1e-15);
            assert_abs_diff_eq!(jac.data()[n + j], 0.0, epsilon = 1e-15);
            assert_abs_diff_eq!(jac.data()[2 * n + j], 0.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn link_linearity_identity() {
        let chain = KinematicChain::default6(FRAC_PI_2);
        let q = [0.5, -0.3, 0.8, -1.2, 0.1, 0.6];
        let jac = chain.link_jacobian(&q);
        let p = chain.fk(&q);
        let n = 6;
        for r in 0..3 {
            let mut acc = 0.0;
            for j in 0..n {
                acc += jac.data()[r * n + j] * chain.link_lengths()[j];
            }
            assert_abs_diff_eq!(acc, p[r], epsilon = 1e-12);
        }
    }

    #[test]
    fn constructor_validation() {
        let err = KinematicChain::new(
            vec![Axis::Z, Axis::Y],
            vec![10.0],
            vec![(-1.0, 1.0), (-1.0, 1.0)],
        );
        assert!(matches!(err, Err(crate::Error::DimensionMismatch { .. })));

        let err = KinematicChain::new(vec![Axis::Z], vec![0.0], vec![(-1.0, 1.0)]);
        assert!(matches!(err, Err(crate::Error::NonPositiveLength { .. })));

        let err = KinematicChain::new(vec![Axis::Z], vec![1.0], vec![(1.0, -1.0)]);
        assert!(matches!(err, Err(crate::Error::InvertedLimits { .. })));
    }

    #[test]
    fn perturb_lengths() {
        let chain = KinematicChain::default6(FRAC_PI_2);
        let longer = chain.perturb_link_lengths(1.0).unwrap();
        assert!(longer.link_lengths().iter().all(|&l| l == 21.0));
        assert_eq!(longer.reach(), 126.0);

        let same = chain.perturb_link_lengths(0.0).unwrap();
        assert_eq!(same, chain);

        assert!(chain.perturb_link_lengths(-25.0).is_err());
    }
}
