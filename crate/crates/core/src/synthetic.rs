//! Synthetic scenario generation with exact ground truth, plus corruption
//! operators for stressing the blend.

use std::fmt;
use std::str::FromStr;

use nalgebra::{Matrix3, Rotation3, Unit, Vector3};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};

use crate::geometry::{random_rotation, random_transform, PointCloud, RigidTransform};
use crate::losses::ground_truth_transform;
use crate::solver::CrossPoseProblem;
use crate::{Error, Result};

/// Blend weight baked into generated scenarios; callers override per solve.
pub const DEFAULT_BLEND: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScenarioKind {
    FreeFloating,
    Articulated,
}

impl ScenarioKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ScenarioKind::FreeFloating => "free-floating",
            ScenarioKind::Articulated => "articulated",
        }
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScenarioKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "free-floating" => Ok(ScenarioKind::FreeFloating),
            "articulated" => Ok(ScenarioKind::Articulated),
            other => Err(Error::UnknownKind(other.to_string())),
        }
    }
}

/// A problem paired with the transform that generated it.
#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioBundle {
    pub problem: CrossPoseProblem,
    pub gt: RigidTransform,
    pub kind: ScenarioKind,
    pub seed: u64,
    pub noise_sigma: f64,
}

/// A revolute joint; with `prismatic` set, the angles are displacements along
/// the axis and the goal motion is a pure translation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RevoluteJoint {
    pub axis_point: Vector3<f64>,
    pub axis_direction: Vector3<f64>,
    pub current_angle: f64,
    pub open_angle: f64,
    pub prismatic: bool,
}

impl RevoluteJoint {
    pub fn new(
        axis_point: Vector3<f64>,
        axis_direction: Vector3<f64>,
        current_angle: f64,
        open_angle: f64,
    ) -> Result<Self> {
        if !axis_point.iter().all(|x| x.is_finite())
            || !axis_direction.iter().all(|x| x.is_finite())
            || !current_angle.is_finite()
            || !open_angle.is_finite()
        {
            return Err(Error::NonFinite("revolute joint"));
        }
        let norm = axis_direction.norm();
        if norm < 1e-12 {
            return Err(Error::InvalidAxis);
        }
        Ok(Self {
            axis_point,
            axis_direction: axis_direction / norm,
            current_angle,
            open_angle,
            prismatic: false,
        })
    }

    pub fn prismatic(mut self) -> Self {
        self.prismatic = true;
        self
    }

    /// Rigid motion from the current configuration to the open one.
    pub fn goal_transform(&self) -> RigidTransform {
        let delta = self.open_angle - self.current_angle;
        if self.prismatic {
            RigidTransform::new(Matrix3::identity(), delta * self.axis_direction)
                .expect("identity rotation is valid")
        } else {
            let rotation =
                Rotation3::from_axis_angle(&Unit::new_unchecked(self.axis_direction), delta)
                    .into_inner();
            let translation = self.axis_point - rotation * self.axis_point;
            RigidTransform::new(rotation, translation).expect("axis-angle rotation is valid")
        }
    }
}

fn validate_sizes(n_a: usize, n_b: usize, noise_sigma: f64) -> Result<()> {
    if n_a < 3 || n_b < 3 {
        return Err(Error::InvalidArgument("clouds need at least 3 points"));
    }
    if !noise_sigma.is_finite() || noise_sigma < 0.0 {
        return Err(Error::InvalidArgument("noise_sigma must be nonnegative"));
    }
    Ok(())
}

fn sample_box_cloud<R: Rng + ?Sized>(rng: &mut R, n: usize) -> PointCloud {
    let points = (0..n)
        .map(|_| {
            Vector3::new(
                rng.random_range(-0.5..0.5),
                rng.random_range(-0.5..0.5),
                rng.random_range(-0.5..0.5),
            )
        })
        .collect();
    PointCloud::new(points).expect("sampled cloud is nonempty and finite")
}

fn noise<R: Rng + ?Sized>(rng: &mut R, sigma: f64) -> Vector3<f64> {
    let x: f64 = rng.sample(StandardNormal);
    let y: f64 = rng.sample(StandardNormal);
    let z: f64 = rng.sample(StandardNormal);
    sigma * Vector3::new(x, y, z)
}

/// Exact correspondences and flow from `gt`, Gaussian noise on those only
/// (never on the clouds), alphas from a normalized positive distribution.
fn consistent_bundle<R: Rng + ?Sized>(
    rng: &mut R,
    action: PointCloud,
    anchor: PointCloud,
    gt: RigidTransform,
    kind: ScenarioKind,
    seed: u64,
    noise_sigma: f64,
) -> Result<ScenarioBundle> {
    let corr_action: Vec<Vector3<f64>> = action
        .points()
        .iter()
        .map(|p| gt.apply_point(p) + noise(rng, noise_sigma))
        .collect();
    let corr_anchor: Vec<Vector3<f64>> = anchor
        .points()
        .iter()
        .map(|p| gt.inverse_apply_point(p) + noise(rng, noise_sigma))
        .collect();
    let goal_flow: Vec<Vector3<f64>> = action
        .points()
        .iter()
        .map(|p| (gt.apply_point(p) - p) + noise(rng, noise_sigma))
        .collect();
    let alpha_action: Vec<f64> = (0..action.len()).map(|_| rng.sample(Exp1)).collect();
    let alpha_anchor: Vec<f64> = (0..anchor.len()).map(|_| rng.sample(Exp1)).collect();
    let problem = CrossPoseProblem::new(
        action,
        anchor,
        corr_action,
        corr_anchor,
        alpha_action,
        alpha_anchor,
        goal_flow,
        DEFAULT_BLEND,
    )?;
    Ok(ScenarioBundle {
        problem,
        gt,
        kind,
        seed,
        noise_sigma,
    })
}

/// Free-floating placement: demonstration clouds in the unit box, each hit by
/// a random transform, ground truth `T_beta . T_alpha^-1`.
pub fn make_free_floating(
    seed: u64,
    n_a: usize,
    n_b: usize,
    noise_sigma: f64,
) -> Result<ScenarioBundle> {
    validate_sizes(n_a, n_b, noise_sigma)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let demo_action = sample_box_cloud(&mut rng, n_a);
    let demo_anchor = sample_box_cloud(&mut rng, n_b);
    let t_alpha = random_transform(&mut rng);
    let t_beta = random_transform(&mut rng);
    let action = t_alpha.apply(&demo_action);
    let anchor = t_beta.apply(&demo_anchor);
    let gt = ground_truth_transform(&t_alpha, &t_beta);
    consistent_bundle(
        &mut rng,
        action,
        anchor,
        gt,
        ScenarioKind::FreeFloating,
        seed,
        noise_sigma,
    )
}

/// Articulated opening: the action cloud is a door panel at the current
/// angle, the anchor a static body, and the ground truth the joint motion to
/// the open state.
pub fn make_articulated(
    seed: u64,
    n_a: usize,
    n_b: usize,
    joint: &RevoluteJoint,
    noise_sigma: f64,
) -> Result<ScenarioBundle> {
    validate_sizes(n_a, n_b, noise_sigma)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gt = joint.goal_transform();
    let (e1, e2) = orthonormal_basis(&joint.axis_direction);
    let place = Rotation3::from_axis_angle(
        &Unit::new_unchecked(joint.axis_direction),
        if joint.prismatic { 0.0 } else { joint.current_angle },
    );
    let slide = if joint.prismatic {
        joint.current_angle * joint.axis_direction
    } else {
        Vector3::zeros()
    };
    let action_points: Vec<Vector3<f64>> = (0..n_a)
        .map(|_| {
            let reach = rng.random_range(0.1..1.0);
            let height = rng.random_range(-0.5..0.5);
            let thickness = rng.random_range(-0.02..0.02);
            let local = reach * e1 + thickness * e2 + height * joint.axis_direction;
            joint.axis_point + place * local + slide
        })
        .collect();
    let anchor_center = joint.axis_point - 0.6 * e1;
    let anchor_points: Vec<Vector3<f64>> = (0..n_b)
        .map(|_| {
            anchor_center
                + Vector3::new(
                    rng.random_range(-0.5..0.5),
                    rng.random_range(-0.5..0.5),
                    rng.random_range(-0.5..0.5),
                )
        })
        .collect();
    let action = PointCloud::new(action_points).expect("panel cloud is nonempty and finite");
    let anchor = PointCloud::new(anchor_points).expect("body cloud is nonempty and finite");
    consistent_bundle(
        &mut rng,
        action,
        anchor,
        gt,
        ScenarioKind::Articulated,
        seed,
        noise_sigma,
    )
}

fn orthonormal_basis(dir: &Vector3<f64>) -> (Vector3<f64>, Vector3<f64>) {
    let helper = if dir.x.abs() < 0.9 {
        Vector3::x()
    } else {
        Vector3::y()
    };
    let e1 = dir.cross(&helper).normalize();
    let e2 = dir.cross(&e1);
    (e1, e2)
}

/// A nontrivial random joint: uniform axis, opening offset of at least 0.3 rad.
pub fn random_joint<R: Rng + ?Sized>(rng: &mut R) -> RevoluteJoint {
    let axis_point = Vector3::new(
        rng.random_range(-0.5..0.5),
        rng.random_range(-0.5..0.5),
        rng.random_range(-0.5..0.5),
    );
    let direction = random_rotation(rng) * Vector3::z();
    let current = rng.random_range(-std::f64::consts::FRAC_PI_2..std::f64::consts::FRAC_PI_2);
    let magnitude = rng.random_range(0.3..2.5);
    let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
    RevoluteJoint::new(axis_point, direction, current, current + sign * magnitude)
        .expect("sampled joint is valid")
}

/// Articulated scenario whose joint is itself derived from the seed, for
/// callers that only have a seed (the CLI generator).
pub fn make_articulated_random(
    seed: u64,
    n_a: usize,
    n_b: usize,
    noise_sigma: f64,
) -> Result<ScenarioBundle> {
    let mut joint_rng = ChaCha8Rng::seed_from_u64(splitmix64(seed));
    let joint = random_joint(&mut joint_rng);
    make_articulated(seed, n_a, n_b, &joint, noise_sigma)
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CorruptionKind {
    /// Replace a fraction of both correspondence sets with uniform points in
    /// their bounding boxes.
    CorrOutliers,
    /// Replace a fraction of the goal targets `p + d` with uniform points in
    /// the targets' bounding box.
    FlowOutliers,
    /// Scale the flow field by `1 + level`.
    FlowScale,
    /// Blend the alphas toward fresh random weights: `(1-level) a + level u`.
    AlphaRandomize,
}

impl CorruptionKind {
    pub fn as_str(self) -> &'static str {
        match self {
            CorruptionKind::CorrOutliers => "corr-outliers",
            CorruptionKind::FlowOutliers => "flow-outliers",
            CorruptionKind::FlowScale => "flow-scale",
            CorruptionKind::AlphaRandomize => "alpha-randomize",
        }
    }

    fn tag(self) -> u8 {
        match self {
            CorruptionKind::CorrOutliers => 1,
            CorruptionKind::FlowOutliers => 2,
            CorruptionKind::FlowScale => 3,
            CorruptionKind::AlphaRandomize => 4,
        }
    }
}

impl fmt::Display for CorruptionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CorruptionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "corr-outliers" => Ok(CorruptionKind::CorrOutliers),
            "flow-outliers" => Ok(CorruptionKind::FlowOutliers),
            "flow-scale" => Ok(CorruptionKind::FlowScale),
            "alpha-randomize" => Ok(CorruptionKind::AlphaRandomize),
            other => Err(Error::UnknownCorruption(other.to_string())),
        }
    }
}

fn corruption_rng(seed: u64, kind: CorruptionKind, level: f64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8] = kind.tag();
    key[9..17].copy_from_slice(&level.to_bits().to_le_bytes());
    ChaCha8Rng::from_seed(key)
}

fn bounding_box(points: &[Vector3<f64>]) -> (Vector3<f64>, Vector3<f64>) {
    let mut min = points[0];
    let mut max = points[0];
    for p in points {
        for i in 0..3 {
            min[i] = min[i].min(p[i]);
            max[i] = max[i].max(p[i]);
        }
    }
    (min, max)
}

fn uniform_in_box<R: Rng + ?Sized>(
    rng: &mut R,
    min: &Vector3<f64>,
    max: &Vector3<f64>,
) -> Vector3<f64> {
    let mut p = Vector3::zeros();
    for i in 0..3 {
        p[i] = if max[i] > min[i] {
            rng.random_range(min[i]..max[i])
        } else {
            min[i]
        };
    }
    p
}

fn outlier_indices<R: Rng + ?Sized>(rng: &mut R, n: usize, fraction: f64) -> Vec<usize> {
    let count = ((fraction * n as f64).round() as usize).min(n);
    rand::seq::index::sample(rng, n, count).into_vec()
}

/// Applies a corruption, leaving the ground truth untouched. The corruption
/// RNG is derived from the bundle seed, the corruption kind and the level, so
/// results are reproducible. Level 0 is always the identity.
pub fn corrupt(bundle: &ScenarioBundle, kind: CorruptionKind, level: f64) -> Result<ScenarioBundle> {
    if !level.is_finite() {
        return Err(Error::InvalidArgument("corruption level must be finite"));
    }
    match kind {
        CorruptionKind::CorrOutliers | CorruptionKind::FlowOutliers | CorruptionKind::AlphaRandomize => {
            if !(0.0..=1.0).contains(&level) {
                return Err(Error::InvalidArgument(
                    "outlier/alpha corruption level must be in [0, 1]",
                ));
            }
        }
        CorruptionKind::FlowScale => {
            if level < -1.0 {
                return Err(Error::InvalidArgument(
                    "flow-scale level must be at least -1",
                ));
            }
        }
    }
    if level == 0.0 {
        return Ok(bundle.clone());
    }

    let mut rng = corruption_rng(bundle.seed, kind, level);
    let problem = &bundle.problem;
    let mut corr_action = problem.corr_action().to_vec();
    let mut corr_anchor = problem.corr_anchor().to_vec();
    let mut goal_flow = problem.goal_flow().to_vec();
    let mut alpha_action = problem.alpha_action().to_vec();
    let mut alpha_anchor = problem.alpha_anchor().to_vec();

    match kind {
        CorruptionKind::CorrOutliers => {
            let (min_a, max_a) = bounding_box(&corr_action);
            for i in outlier_indices(&mut rng, corr_action.len(), level) {
                corr_action[i] = uniform_in_box(&mut rng, &min_a, &max_a);
            }
            let (min_b, max_b) = bounding_box(&corr_anchor);
            for i in outlier_indices(&mut rng, corr_anchor.len(), level) {
                corr_anchor[i] = uniform_in_box(&mut rng, &min_b, &max_b);
            }
        }
        CorruptionKind::FlowOutliers => {
            let points = problem.action_cloud().points();
            let targets: Vec<Vector3<f64>> =
                points.iter().zip(goal_flow.iter()).map(|(p, d)| p + d).collect();
            let (min_t, max_t) = bounding_box(&targets);
            for i in outlier_indices(&mut rng, goal_flow.len(), level) {
                goal_flow[i] = uniform_in_box(&mut rng, &min_t, &max_t) - points[i];
            }
        }
        CorruptionKind::FlowScale => {
            let factor = 1.0 + level;
            for d in &mut goal_flow {
                *d *= factor;
            }
        }
        CorruptionKind::AlphaRandomize => {
            for a in &mut alpha_action {
                let u: f64 = rng.sample(Exp1);
                *a = (1.0 - level) * *a + level * u;
            }
            for a in &mut alpha_anchor {
                let u: f64 = rng.sample(Exp1);
                *a = (1.0 - level) * *a + level * u;
            }
        }
    }

    let corrupted = CrossPoseProblem::new(
        problem.action_cloud().clone(),
        problem.anchor_cloud().clone(),
        corr_action,
        corr_anchor,
        alpha_action,
        alpha_anchor,
        goal_flow,
        problem.blend(),
    )?;
    Ok(ScenarioBundle {
        problem: corrupted,
        gt: bundle.gt,
        kind: bundle.kind,
        seed: bundle.seed,
        noise_sigma: bundle.noise_sigma,
    })
}
