//! SE(3) transforms, point clouds and the evaluation metrics.

use nalgebra::{Matrix3, Matrix4, Quaternion, UnitQuaternion, Vector3};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::{Error, Result};

/// Orthonormality defect (`|R^T R - I|_F`) below which a rotation is accepted
/// verbatim.
pub const ROTATION_DEFECT_ACCEPT: f64 = 1e-9;
/// Defect up to which a rotation is silently re-orthonormalized by polar
/// projection. This tolerates file round-trip rounding; anything worse is
/// rejected rather than repaired.
pub const ROTATION_DEFECT_REPAIR: f64 = 1e-6;

/// A proper rigid transform: `p -> R p + t` with `det(R) = +1`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RigidTransform {
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
}

impl RigidTransform {
    /// Validates orthonormality and properness. Rotations with defect in
    /// (`ROTATION_DEFECT_ACCEPT`, `ROTATION_DEFECT_REPAIR`] are projected back
    /// onto SO(3); reflections are always rejected.
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self> {
        if !rotation.iter().all(|x| x.is_finite()) || !translation.iter().all(|x| x.is_finite()) {
            return Err(Error::NonFinite("rigid transform"));
        }
        let defect = (rotation.transpose() * rotation - Matrix3::identity()).norm();
        let rotation = if defect <= ROTATION_DEFECT_ACCEPT {
            rotation
        } else if defect <= ROTATION_DEFECT_REPAIR {
            polar_rotation(&rotation)
        } else {
            return Err(Error::NotOrthonormal { defect });
        };
        if rotation.determinant() < 0.0 {
            return Err(Error::Reflection);
        }
        Ok(Self {
            rotation,
            translation,
        })
    }

    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    /// `self . other`: applies `other` first, then `self`.
    pub fn compose(&self, other: &Self) -> Self {
        Self {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    /// Inverse via orthogonality: `(R^T, -R^T t)`.
    pub fn invert(&self) -> Self {
        let rt = self.rotation.transpose();
        Self {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    pub fn apply_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    /// Applies the inverse without forming it: `R^T (p - t)`.
    pub fn inverse_apply_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation.transpose() * (p - self.translation)
    }

    pub fn apply(&self, cloud: &PointCloud) -> PointCloud {
        PointCloud {
            points: cloud.points.iter().map(|p| self.apply_point(p)).collect(),
        }
    }

    /// 4x4 homogeneous matrix.
    pub fn homogeneous(&self) -> Matrix4<f64> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.rotation);
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation);
        m
    }

    pub fn rotation_row_major(&self) -> [f64; 9] {
        let r = &self.rotation;
        [
            r[(0, 0)],
            r[(0, 1)],
            r[(0, 2)],
            r[(1, 0)],
            r[(1, 1)],
            r[(1, 2)],
            r[(2, 0)],
            r[(2, 1)],
            r[(2, 2)],
        ]
    }

    pub fn translation_array(&self) -> [f64; 3] {
        [
            self.translation.x,
            self.translation.y,
            self.translation.z,
        ]
    }

    pub fn from_row_major(rotation: &[f64; 9], translation: &[f64; 3]) -> Result<Self> {
        let r = Matrix3::new(
            rotation[0],
            rotation[1],
            rotation[2],
            rotation[3],
            rotation[4],
            rotation[5],
            rotation[6],
            rotation[7],
            rotation[8],
        );
        Self::new(r, Vector3::new(translation[0], translation[1], translation[2]))
    }
}

fn polar_rotation(m: &Matrix3<f64>) -> Matrix3<f64> {
    let svd = m.svd(true, true);
    let u = svd.u.expect("svd requested u");
    let v_t = svd.v_t.expect("svd requested v_t");
    u * v_t
}

/// An ordered list of 3D points, at least one.
#[derive(Clone, Debug, PartialEq)]
pub struct PointCloud {
    points: Vec<Vector3<f64>>,
}

impl PointCloud {
    pub fn new(points: Vec<Vector3<f64>>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyCloud);
        }
        if !points.iter().all(|p| p.iter().all(|x| x.is_finite())) {
            return Err(Error::NonFinite("point cloud"));
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[Vector3<f64>] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// The three Table-style evaluation metrics.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MetricTriple {
    pub rot_err_deg: f64,
    pub trans_err: f64,
    pub pp_mse: f64,
}

/// Geodesic angle of `R_pred R_gt^T` in degrees, in [0, 180].
///
/// Uses `atan2(|skew part|, (trace - 1) / 2)`, which stays accurate near zero
/// where the plain arccos-of-trace formula loses half the significant digits.
pub fn rotation_error_deg(pred: &RigidTransform, gt: &RigidTransform) -> f64 {
    let rel = pred.rotation() * gt.rotation().transpose();
    let axis = 0.5
        * Vector3::new(
            rel[(2, 1)] - rel[(1, 2)],
            rel[(0, 2)] - rel[(2, 0)],
            rel[(1, 0)] - rel[(0, 1)],
        );
    let sin = axis.norm().min(1.0);
    let cos = ((rel.trace() - 1.0) * 0.5).clamp(-1.0, 1.0);
    sin.atan2(cos).to_degrees()
}

/// Euclidean norm of the translation difference.
pub fn translation_error(pred: &RigidTransform, gt: &RigidTransform) -> f64 {
    (pred.translation() - gt.translation()).norm()
}

/// Mean squared distance between the two transforms' images of the cloud.
pub fn per_point_mse(pred: &RigidTransform, gt: &RigidTransform, cloud: &PointCloud) -> f64 {
    let sum: f64 = cloud
        .points()
        .iter()
        .map(|p| (pred.apply_point(p) - gt.apply_point(p)).norm_squared())
        .sum();
    sum / cloud.len() as f64
}

pub fn metric_triple(pred: &RigidTransform, gt: &RigidTransform, cloud: &PointCloud) -> MetricTriple {
    MetricTriple {
        rot_err_deg: rotation_error_deg(pred, gt),
        trans_err: translation_error(pred, gt),
        pp_mse: per_point_mse(pred, gt, cloud),
    }
}

pub fn so3_hat(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Rodrigues exponential, with the series expansion for tiny angles.
pub fn so3_exp(omega: &Vector3<f64>) -> Matrix3<f64> {
    let theta2 = omega.norm_squared();
    let hat = so3_hat(omega);
    let (a, b) = if theta2 < 1e-18 {
        (1.0 - theta2 / 6.0, 0.5 - theta2 / 24.0)
    } else {
        let theta = theta2.sqrt();
        (theta.sin() / theta, (1.0 - theta.cos()) / theta2)
    };
    Matrix3::identity() + a * hat + b * (hat * hat)
}

/// Uniform rotation via a normalized Gaussian quaternion.
pub fn random_rotation<R: Rng + ?Sized>(rng: &mut R) -> Matrix3<f64> {
    loop {
        let w: f64 = rng.sample(StandardNormal);
        let x: f64 = rng.sample(StandardNormal);
        let y: f64 = rng.sample(StandardNormal);
        let z: f64 = rng.sample(StandardNormal);
        let q = Quaternion::new(w, x, y, z);
        if q.norm() > 1e-6 {
            return UnitQuaternion::from_quaternion(q).to_rotation_matrix().into_inner();
        }
    }
}

/// Uniform rotation, translation uniform in [-1, 1]^3.
pub fn random_transform<R: Rng + ?Sized>(rng: &mut R) -> RigidTransform {
    let rotation = random_rotation(rng);
    let translation = Vector3::new(
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
    );
    RigidTransform::new(rotation, translation).expect("sampled rotation is orthonormal")
}
