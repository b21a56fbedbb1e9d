//! Geometric training losses over forward-kinematics positions and the
//! evaluation metric suite (rotation, position, velocity, and smoothness
//! errors).
//!
//! All reductions here run in f64.

use crate::error::{Error, Result};
use crate::features::{MotionSequence, MOTION_CHANNELS_PER_JOINT};
use crate::numerics::Tensor2;
use crate::rotations::{
    geodesic_deg, rot6d_to_matrix, rot6d_to_matrix_backward, RotMat, Vec3,
};
use crate::skeleton::{
    fk_backward, forward_kinematics, recover_root_translation, FkResult, SkeletonTree,
};
use crate::scalar::Scalar;

/// Foot speed below this counts as ground contact, m/s.
pub const DEFAULT_CONTACT_SPEED: f64 = 0.01;

/// Per-frame, per-foot-joint contact flags derived from ground-truth foot
/// speed.
#[derive(Debug, Clone)]
pub struct FootContactMask {
    /// [frame][k] where k indexes `tree.foot_indices()`.
    pub flags: Vec<Vec<bool>>,
}

impl FootContactMask {
    pub fn contact_count(&self) -> usize {
        self.flags
            .iter()
            .map(|f| f.iter().filter(|&&b| b).count())
            .sum()
    }
}

fn decode_motion<T: Scalar>(m: &MotionSequence<T>) -> Result<Vec<Vec<RotMat<T>>>> {
    m.decode()
}

fn check_pair<T: Scalar>(
    gt: &MotionSequence<T>,
    pred: &MotionSequence<T>,
    context: &'static str,
) -> Result<()> {
    if gt.frames() != pred.frames() {
        return Err(Error::LengthMismatch {
            context,
            left: gt.frames(),
            right: pred.frames(),
        });
    }
    if gt.joints() != pred.joints() {
        return Err(Error::WidthMismatch {
            context,
            expected: gt.data.cols(),
            got: pred.data.cols(),
        });
    }
    Ok(())
}

fn sq_dist(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    dx * dx + dy * dy + dz * dz
}

fn pos_f64<T: Scalar>(p: &Vec3<T>) -> [f64; 3] {
    [p[0].to_f64(), p[1].to_f64(), p[2].to_f64()]
}

/// Mean squared distance between ground-truth and predicted global joint
/// positions, averaged over frames and joints. Both sides use the
/// ground-truth root translation. Returns m².
pub fn loss_pos<T: Scalar>(
    tree: &SkeletonTree<T>,
    gt: &MotionSequence<T>,
    pred: &MotionSequence<T>,
    root_trans: &[Vec3<T>],
) -> Result<f64> {
    check_pair(gt, pred, "loss_pos")?;
    let fk_gt = forward_kinematics(tree, &decode_motion(gt)?, root_trans)?;
    let fk_pred = forward_kinematics(tree, &decode_motion(pred)?, root_trans)?;
    let n = gt.frames();
    let j = tree.joint_count();
    let mut acc = 0f64;
    for f in 0..n {
        for jj in 0..j {
            acc += sq_dist(
                &pos_f64(&fk_gt.global_pos[f][jj]),
                &pos_f64(&fk_pred.global_pos[f][jj]),
            );
        }
    }
    Ok(acc / (n * j) as f64)
}

/// Mean squared difference of raw frame-to-frame position deltas over the
/// N−1 frame pairs, averaged over joints (no fps scaling).
pub fn loss_vel<T: Scalar>(
    tree: &SkeletonTree<T>,
    gt: &MotionSequence<T>,
    pred: &MotionSequence<T>,
    root_trans: &[Vec3<T>],
) -> Result<f64> {
    check_pair(gt, pred, "loss_vel")?;
    if gt.frames() < 2 {
        return Err(Error::SequenceTooShort {
            context: "loss_vel",
            needed: 2,
            got: gt.frames(),
        });
    }
    let fk_gt = forward_kinematics(tree, &decode_motion(gt)?, root_trans)?;
    let fk_pred = forward_kinematics(tree, &decode_motion(pred)?, root_trans)?;
    let n = gt.frames();
    let j = tree.joint_count();
    let mut acc = 0f64;
    for f in 0..n - 1 {
        for jj in 0..j {
            let g0 = pos_f64(&fk_gt.global_pos[f][jj]);
            let g1 = pos_f64(&fk_gt.global_pos[f + 1][jj]);
            let p0 = pos_f64(&fk_pred.global_pos[f][jj]);
            let p1 = pos_f64(&fk_pred.global_pos[f + 1][jj]);
            let d = [
                (g1[0] - g0[0]) - (p1[0] - p0[0]),
                (g1[1] - g0[1]) - (p1[1] - p0[1]),
                (g1[2] - g0[2]) - (p1[2] - p0[2]),
            ];
            acc += d[0] * d[0] + d[1] * d[1] + d[2] * d[2];
        }
    }
    Ok(acc / ((n - 1) * j) as f64)
}

/// Contact flags from ground-truth foot speed: flag = 1 when speed is below
/// `speed_threshold` m/s. Frame 0 copies frame 1.
pub fn foot_contact_mask<T: Scalar>(
    tree: &SkeletonTree<T>,
    gt: &MotionSequence<T>,
    root_trans: &[Vec3<T>],
    speed_threshold: f64,
) -> Result<FootContactMask> {
    if gt.frames() < 2 {
        return Err(Error::SequenceTooShort {
            context: "foot_contact_mask",
            needed: 2,
            got: gt.frames(),
        });
    }
    let fk = forward_kinematics(tree, &decode_motion(gt)?, root_trans)?;
    let fps = gt.fps as f64;
    let feet = tree.foot_indices();
    let n = gt.frames();
    let mut flags = vec![vec![false; feet.len()]; n];
    for f in 1..n {
        for (k, &joint) in feet.iter().enumerate() {
            let p0 = pos_f64(&fk.global_pos[f - 1][joint]);
            let p1 = pos_f64(&fk.global_pos[f][joint]);
            let speed = sq_dist(&p0, &p1).sqrt() * fps;
            flags[f][k] = speed < speed_threshold;
        }
    }
    flags[0] = flags[1].clone();
    Ok(FootContactMask { flags })
}

/// Mean squared foot-position error over contact (frame, joint) pairs; zero
/// when the mask selects nothing.
pub fn loss_foot<T: Scalar>(
    tree: &SkeletonTree<T>,
    gt: &MotionSequence<T>,
    pred: &MotionSequence<T>,
    root_trans: &[Vec3<T>],
    mask: &FootContactMask,
) -> Result<f64> {
    check_pair(gt, pred, "loss_foot")?;
    if mask.flags.len() != gt.frames() {
        return Err(Error::LengthMismatch {
            context: "loss_foot mask",
            left: mask.flags.len(),
            right: gt.frames(),
        });
    }
    let count = mask.contact_count();
    if count == 0 {
        return Ok(0.0);
    }
    let fk_gt = forward_kinematics(tree, &decode_motion(gt)?, root_trans)?;
    let fk_pred = forward_kinematics(tree, &decode_motion(pred)?, root_trans)?;
    let feet = tree.foot_indices();
    let mut acc = 0f64;
    for (f, frame_flags) in mask.flags.iter().enumerate() {
        for (k, &on) in frame_flags.iter().enumerate() {
            if on {
                let joint = feet[k];
                acc += sq_dist(
                    &pos_f64(&fk_gt.global_pos[f][joint]),
                    &pos_f64(&fk_pred.global_pos[f][joint]),
                );
            }
        }
    }
    Ok(acc / count as f64)
}

/// Relative weights of the geometric losses (0 disables a term).
#[derive(Debug, Clone, Copy, Default)]
pub struct GeomLossWeights {
    pub pos: f64,
    pub vel: f64,
    pub foot: f64,
}

impl GeomLossWeights {
    pub fn any(&self) -> bool {
        self.pos != 0.0 || self.vel != 0.0 || self.foot != 0.0
    }
}

/// Scalar values of the three geometric losses.
#[derive(Debug, Clone, Copy, Default)]
pub struct GeomLossValues {
    pub pos: f64,
    pub vel: f64,
    pub foot: f64,
}

impl GeomLossValues {
    pub fn weighted_total(&self, w: &GeomLossWeights) -> f64 {
        w.pos * self.pos + w.vel * self.vel + w.foot * self.foot
    }
}

/// Geometric losses on a raw network output, with the gradient w.r.t. the
/// 6d prediction.
///
/// Early in training the network can emit non-decodable 6d slices (the
/// output projection starts at zero). Such slices take the identity rotation
/// for the kinematic chain, contribute nothing to the losses, and receive
/// zero gradient; denominators stay fixed so the values agree with
/// [`loss_pos`]/[`loss_vel`]/[`loss_foot`] once every slice decodes.
pub fn geometric_loss_with_grad<T: Scalar>(
    tree: &SkeletonTree<T>,
    gt: &MotionSequence<T>,
    pred_raw: &Tensor2<T>,
    root_trans: &[Vec3<T>],
    mask: &FootContactMask,
    weights: &GeomLossWeights,
) -> Result<(GeomLossValues, Tensor2<T>)> {
    let n = gt.frames();
    let joints = tree.joint_count();
    if pred_raw.rows() != n || pred_raw.cols() != joints * MOTION_CHANNELS_PER_JOINT {
        return Err(Error::ShapeMismatch {
            context: "geometric_loss_with_grad",
            left: pred_raw.shape(),
            right: (n, joints * MOTION_CHANNELS_PER_JOINT),
        });
    }
    // decode with validity mask
    let mut valid = vec![vec![true; joints]; n];
    let mut pred_rots = vec![vec![RotMat::<T>::identity(); joints]; n];
    let pred_seq = MotionSequence {
        data: pred_raw.clone(),
        fps: gt.fps,
    };
    for f in 0..n {
        for j in 0..joints {
            match rot6d_to_matrix(&pred_seq.rot6d(f, j)) {
                Ok(m) => pred_rots[f][j] = m,
                Err(_) => valid[f][j] = false,
            }
        }
    }
    let gt_rots = gt.decode()?;
    let fk_gt = forward_kinematics(tree, &gt_rots, root_trans)?;
    let fk_pred = forward_kinematics(tree, &pred_rots, root_trans)?;

    let mut values = GeomLossValues::default();
    let mut g_pos: Vec<Vec<Vec3<T>>> = vec![vec![[T::zero(); 3]; joints]; n];
    let pos_norm = (n * joints) as f64;

    if weights.pos != 0.0 {
        for f in 0..n {
            for j in 0..joints {
                let g = pos_f64(&fk_gt.global_pos[f][j]);
                let p = pos_f64(&fk_pred.global_pos[f][j]);
                if frame_joint_usable(&valid[f], tree, j) {
                    values.pos += sq_dist(&g, &p) / pos_norm;
                    let c = 2.0 * weights.pos / pos_norm;
                    for k in 0..3 {
                        g_pos[f][j][k] = g_pos[f][j][k] + T::from_f64(c * (p[k] - g[k]));
                    }
                }
            }
        }
    }

    if weights.vel != 0.0 && n >= 2 {
        let vel_norm = ((n - 1) * joints) as f64;
        for f in 0..n - 1 {
            for j in 0..joints {
                if frame_joint_usable(&valid[f], tree, j) && frame_joint_usable(&valid[f + 1], tree, j)
                {
                    let g0 = pos_f64(&fk_gt.global_pos[f][j]);
                    let g1 = pos_f64(&fk_gt.global_pos[f + 1][j]);
                    let p0 = pos_f64(&fk_pred.global_pos[f][j]);
                    let p1 = pos_f64(&fk_pred.global_pos[f + 1][j]);
                    let mut sq = 0.0;
                    let c = 2.0 * weights.vel / vel_norm;
                    for k in 0..3 {
                        let d = (p1[k] - p0[k]) - (g1[k] - g0[k]);
                        sq += d * d;
                        g_pos[f + 1][j][k] = g_pos[f + 1][j][k] + T::from_f64(c * d);
                        g_pos[f][j][k] = g_pos[f][j][k] - T::from_f64(c * d);
                    }
                    values.vel += sq / vel_norm;
                }
            }
        }
    }

    if weights.foot != 0.0 {
        let count = mask.contact_count();
        if count > 0 {
            let feet = tree.foot_indices();
            for (f, frame_flags) in mask.flags.iter().enumerate() {
                for (k, &on) in frame_flags.iter().enumerate() {
                    let j = feet[k];
                    if on && frame_joint_usable(&valid[f], tree, j) {
                        let g = pos_f64(&fk_gt.global_pos[f][j]);
                        let p = pos_f64(&fk_pred.global_pos[f][j]);
                        values.foot += sq_dist(&g, &p) / count as f64;
                        let c = 2.0 * weights.foot / count as f64;
                        for d in 0..3 {
                            g_pos[f][j][d] = g_pos[f][j][d] + T::from_f64(c * (p[d] - g[d]));
                        }
                    }
                }
            }
        }
    }

    // backprop positions → local rotation matrices → 6d slices
    let d_rots = fk_backward(tree, &pred_rots, &fk_pred, &g_pos);
    let mut grad = Tensor2::zeros(n, joints * MOTION_CHANNELS_PER_JOINT);
    for f in 0..n {
        for j in 0..joints {
            if !valid[f][j] {
                continue;
            }
            let six = pred_seq.rot6d(f, j);
            let d6 = rot6d_to_matrix_backward(&six, &d_rots[f][j])?;
            grad.row_mut(f)[j * 6..j * 6 + 6].copy_from_slice(&d6.0);
        }
    }
    Ok((values, grad))
}

/// A joint's global position is trustworthy when the joint itself and every
/// ancestor decoded.
fn frame_joint_usable<T: Scalar>(valid: &[bool], tree: &SkeletonTree<T>, j: usize) -> bool {
    let mut cur = j;
    loop {
        if !valid[cur] {
            return false;
        }
        match tree.parent(cur) {
            None => return true,
            Some(p) => cur = p,
        }
    }
}

/// The evaluation metric suite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricReport {
    /// Mean per-joint rotation error, degrees.
    pub mpjre_deg: f64,
    /// Mean per-joint position error, cm.
    pub mpjpe_cm: f64,
    /// Mean per-joint velocity error, cm/s.
    pub mpjve_cm_s: f64,
    /// Mean jerk magnitude of the prediction, 10² m/s³.
    pub jitter: f64,
    pub hand_pe_cm: f64,
    pub upper_pe_cm: f64,
    pub lower_pe_cm: f64,
    pub root_pe_cm: f64,
    pub upper_jitter: f64,
    pub lower_jitter: f64,
}

impl MetricReport {
    pub fn fields(&self) -> [(&'static str, f64); 10] {
        [
            ("mpjre_deg", self.mpjre_deg),
            ("mpjpe_cm", self.mpjpe_cm),
            ("mpjve_cm_s", self.mpjve_cm_s),
            ("hand_pe_cm", self.hand_pe_cm),
            ("upper_pe_cm", self.upper_pe_cm),
            ("lower_pe_cm", self.lower_pe_cm),
            ("root_pe_cm", self.root_pe_cm),
            ("jitter", self.jitter),
            ("upper_jitter", self.upper_jitter),
            ("lower_jitter", self.lower_jitter),
        ]
    }

    /// Flat key-value block, one metric per line.
    pub fn to_text_block(&self) -> String {
        self.fields()
            .iter()
            .map(|(k, v)| format!("{k}: {v:.6}\n"))
            .collect()
    }

    /// Machine-readable single-line record.
    pub fn to_record_line(&self) -> String {
        self.fields()
            .iter()
            .map(|(k, v)| format!("{k}={v:.6}"))
            .collect::<Vec<_>>()
            .join(" ")
    }

    /// Elementwise mean of several reports.
    pub fn mean(reports: &[MetricReport]) -> MetricReport {
        assert!(!reports.is_empty());
        let n = reports.len() as f64;
        let mut sum = [0f64; 10];
        for r in reports {
            for (i, (_, v)) in r.fields().iter().enumerate() {
                sum[i] += v;
            }
        }
        MetricReport {
            mpjre_deg: sum[0] / n,
            mpjpe_cm: sum[1] / n,
            mpjve_cm_s: sum[2] / n,
            hand_pe_cm: sum[3] / n,
            upper_pe_cm: sum[4] / n,
            lower_pe_cm: sum[5] / n,
            root_pe_cm: sum[6] / n,
            jitter: sum[7] / n,
            upper_jitter: sum[8] / n,
            lower_jitter: sum[9] / n,
        }
    }
}

fn mean_pe_cm(gt: &FkResult<impl Scalar>, pred: &FkResult<impl Scalar>, set: &[usize]) -> f64 {
    let n = gt.global_pos.len();
    let mut acc = 0f64;
    for f in 0..n {
        for &j in set {
            acc += sq_dist(
                &pos_f64(&gt.global_pos[f][j]),
                &pos_f64(&pred.global_pos[f][j]),
            )
            .sqrt();
        }
    }
    acc / (n * set.len()) as f64 * 100.0
}

fn mean_jerk(pred: &FkResult<impl Scalar>, set: &[usize], fps: f64) -> f64 {
    let n = pred.global_pos.len();
    let fps3 = fps * fps * fps;
    let mut acc = 0f64;
    for f in 0..n - 3 {
        for &j in set {
            let p0 = pos_f64(&pred.global_pos[f][j]);
            let p1 = pos_f64(&pred.global_pos[f + 1][j]);
            let p2 = pos_f64(&pred.global_pos[f + 2][j]);
            let p3 = pos_f64(&pred.global_pos[f + 3][j]);
            let mut sq = 0.0;
            for k in 0..3 {
                let jerk = (p3[k] - 3.0 * p2[k] + 3.0 * p1[k] - p0[k]) * fps3;
                sq += jerk * jerk;
            }
            acc += sq.sqrt();
        }
    }
    // reported in 10² m/s³
    acc / ((n - 3) * set.len()) as f64 / 100.0
}

/// Full metric suite with an explicit predicted root translation (the
/// head-anchored recovery is bypassed).
pub fn evaluate_with_root<T: Scalar>(
    tree: &SkeletonTree<T>,
    gt: &MotionSequence<T>,
    gt_root: &[Vec3<T>],
    pred: &MotionSequence<T>,
    pred_root: &[Vec3<T>],
    fps: f64,
) -> Result<MetricReport> {
    check_pair(gt, pred, "evaluate")?;
    let n = gt.frames();
    if n < 4 {
        return Err(Error::SequenceTooShort {
            context: "evaluate: jitter needs four frames",
            needed: 4,
            got: n,
        });
    }
    let gt_rots = decode_motion(gt)?;
    let pred_rots = decode_motion(pred)?;
    let joints = tree.joint_count();

    // rotation error on local joint rotations
    let mut mpjre = 0f64;
    for f in 0..n {
        for j in 0..joints {
            mpjre += geodesic_deg(&gt_rots[f][j], &pred_rots[f][j]);
        }
    }
    mpjre /= (n * joints) as f64;

    let fk_gt = forward_kinematics(tree, &gt_rots, gt_root)?;
    let fk_pred = forward_kinematics(tree, &pred_rots, pred_root)?;

    let all: Vec<usize> = (0..joints).collect();
    let mpjpe = mean_pe_cm(&fk_gt, &fk_pred, &all);
    let root_pe = mean_pe_cm(&fk_gt, &fk_pred, &[0]);
    let hand_pe = mean_pe_cm(&fk_gt, &fk_pred, tree.hand_indices());
    let upper_pe = mean_pe_cm(&fk_gt, &fk_pred, tree.upper_body());
    let lower_pe = mean_pe_cm(&fk_gt, &fk_pred, tree.lower_body());

    // velocity error: forward differences scaled by fps, cm/s
    let mut mpjve = 0f64;
    for f in 0..n - 1 {
        for j in 0..joints {
            let g0 = pos_f64(&fk_gt.global_pos[f][j]);
            let g1 = pos_f64(&fk_gt.global_pos[f + 1][j]);
            let p0 = pos_f64(&fk_pred.global_pos[f][j]);
            let p1 = pos_f64(&fk_pred.global_pos[f + 1][j]);
            let mut sq = 0.0;
            for k in 0..3 {
                let dv = ((g1[k] - g0[k]) - (p1[k] - p0[k])) * fps;
                sq += dv * dv;
            }
            mpjve += sq.sqrt();
        }
    }
    mpjve = mpjve / ((n - 1) * joints) as f64 * 100.0;

    Ok(MetricReport {
        mpjre_deg: mpjre,
        mpjpe_cm: mpjpe,
        mpjve_cm_s: mpjve,
        jitter: mean_jerk(&fk_pred, &all, fps),
        hand_pe_cm: hand_pe,
        upper_pe_cm: upper_pe,
        lower_pe_cm: lower_pe,
        root_pe_cm: root_pe,
        upper_jitter: mean_jerk(&fk_pred, tree.upper_body(), fps),
        lower_jitter: mean_jerk(&fk_pred, tree.lower_body(), fps),
    })
}

/// Full metric suite; the prediction's global translation is recovered from
/// the ground-truth head trajectory.
pub fn evaluate<T: Scalar>(
    tree: &SkeletonTree<T>,
    gt: &MotionSequence<T>,
    gt_root: &[Vec3<T>],
    gt_head: &[Vec3<T>],
    pred: &MotionSequence<T>,
    fps: f64,
) -> Result<MetricReport> {
    let pred_rots = decode_motion(pred)?;
    let pred_root = recover_root_translation(tree, &pred_rots, gt_head)?;
    evaluate_with_root(tree, gt, gt_root, pred, &pred_root, fps)
}

/// Head positions implied by a motion and its root translation.
pub fn head_trajectory<T: Scalar>(
    tree: &SkeletonTree<T>,
    motion: &MotionSequence<T>,
    root_trans: &[Vec3<T>],
) -> Result<Vec<Vec3<T>>> {
    let fk = forward_kinematics(tree, &decode_motion(motion)?, root_trans)?;
    let head = tree.head_index();
    Ok(fk.global_pos.iter().map(|f| f[head]).collect())
}
