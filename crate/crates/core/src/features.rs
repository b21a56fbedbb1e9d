//! Motion and sparse-signal containers, conditioning-feature construction,
//! sequence windowing/stitching for auto-regressive inference, and
//! tracking-loss simulation.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::numerics::Tensor2;
use crate::rotations::{frame_delta, matrix_to_rot6d, rot6d_to_matrix, Rot6d, RotMat, Vec3};
use crate::skeleton::{forward_kinematics, SkeletonTree};
use crate::scalar::Scalar;

/// Frames per second used across the crate.
pub const FPS: u32 = 60;

/// Channels per tracked joint in the sparse signal: 6d orientation,
/// 6d orientation velocity, position, linear velocity.
pub const SPARSE_CHANNELS_PER_JOINT: usize = 18;

/// Tracked joints: head, left hand, right hand.
pub const SPARSE_TRACKED_JOINTS: usize = 3;

/// Total sparse-signal width (54).
pub const SPARSE_WIDTH: usize = SPARSE_CHANNELS_PER_JOINT * SPARSE_TRACKED_JOINTS;

/// Channels per body joint in the motion signal (6d rotation).
pub const MOTION_CHANNELS_PER_JOINT: usize = 6;

/// Canonical body joint count.
pub const BODY_JOINTS: usize = 22;

/// Canonical motion width (132).
pub const MOTION_WIDTH: usize = BODY_JOINTS * MOTION_CHANNELS_PER_JOINT;

/// Per-frame local joint rotations in 6d form; joint 0 carries the global
/// pelvis orientation. Row layout: joint-major, 6 values per joint.
#[derive(Debug, Clone, PartialEq)]
pub struct MotionSequence<T> {
    pub data: Tensor2<T>,
    pub fps: u32,
}

impl<T: Scalar> MotionSequence<T> {
    pub fn new(data: Tensor2<T>, fps: u32) -> Result<Self> {
        if data.cols() % MOTION_CHANNELS_PER_JOINT != 0 {
            return Err(Error::WidthMismatch {
                context: "MotionSequence width must be a multiple of 6",
                expected: MOTION_CHANNELS_PER_JOINT,
                got: data.cols(),
            });
        }
        Ok(Self { data, fps })
    }

    pub fn frames(&self) -> usize {
        self.data.rows()
    }

    pub fn joints(&self) -> usize {
        self.data.cols() / MOTION_CHANNELS_PER_JOINT
    }

    pub fn rot6d(&self, frame: usize, joint: usize) -> Rot6d<T> {
        let row = self.data.row(frame);
        let base = joint * MOTION_CHANNELS_PER_JOINT;
        let mut six = [T::zero(); 6];
        six.copy_from_slice(&row[base..base + 6]);
        Rot6d(six)
    }

    pub fn set_rot6d(&mut self, frame: usize, joint: usize, r: &Rot6d<T>) {
        let base = joint * MOTION_CHANNELS_PER_JOINT;
        self.data.row_mut(frame)[base..base + 6].copy_from_slice(&r.0);
    }

    /// Decodes every 6-slice to a rotation matrix; fails on the first
    /// degenerate slice with its flattened (frame·joints + joint) index.
    pub fn decode(&self) -> Result<Vec<Vec<RotMat<T>>>> {
        let joints = self.joints();
        let mut out = Vec::with_capacity(self.frames());
        for f in 0..self.frames() {
            let mut row = Vec::with_capacity(joints);
            for j in 0..joints {
                let m = rot6d_to_matrix(&self.rot6d(f, j)).map_err(|_| {
                    Error::DegenerateRotation {
                        index: f * joints + j,
                    }
                })?;
                row.push(m);
            }
            out.push(row);
        }
        Ok(out)
    }

    /// Encodes per-frame rotation matrices.
    pub fn encode(rots: &[Vec<RotMat<T>>], fps: u32) -> Self {
        let frames = rots.len();
        let joints = if frames == 0 { 0 } else { rots[0].len() };
        let mut data = Tensor2::zeros(frames, joints * MOTION_CHANNELS_PER_JOINT);
        for (f, frame) in rots.iter().enumerate() {
            for (j, m) in frame.iter().enumerate() {
                let six = matrix_to_rot6d(m);
                data.row_mut(f)[j * 6..j * 6 + 6].copy_from_slice(&six.0);
            }
        }
        Self { data, fps }
    }
}

/// Per-frame tracking signal for head and both hands; width fixed at 54.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseInput<T> {
    pub data: Tensor2<T>,
}

impl<T: Scalar> SparseInput<T> {
    pub fn new(data: Tensor2<T>) -> Result<Self> {
        if data.cols() != SPARSE_WIDTH {
            return Err(Error::WidthMismatch {
                context: "SparseInput",
                expected: SPARSE_WIDTH,
                got: data.cols(),
            });
        }
        Ok(Self { data })
    }

    pub fn frames(&self) -> usize {
        self.data.rows()
    }
}

/// Builds the conditioning signal: per tracked joint, global orientation,
/// orientation velocity (6d of the frame-to-frame delta), global position,
/// and linear velocity scaled by fps. Frame 0 velocities are the identity
/// encoding and the zero vector.
pub fn build_sparse_input<T: Scalar>(
    tree: &SkeletonTree<T>,
    motion: &MotionSequence<T>,
    root_trans: &[Vec3<T>],
) -> Result<SparseInput<T>> {
    if motion.frames() != root_trans.len() {
        return Err(Error::LengthMismatch {
            context: "build_sparse_input",
            left: motion.frames(),
            right: root_trans.len(),
        });
    }
    let rots = motion.decode()?;
    // FK at the origin; root translation enters additively below, which
    // keeps velocity channels independent of any constant shift.
    let zeros = vec![[T::zero(); 3]; motion.frames()];
    let fk = forward_kinematics(tree, &rots, &zeros)?;
    let tracked = [
        tree.head_index(),
        tree.hand_indices()[0],
        tree.hand_indices()[1],
    ];
    let fps = T::from_f64(motion.fps as f64);
    let mut data = Tensor2::zeros(motion.frames(), SPARSE_WIDTH);
    for f in 0..motion.frames() {
        for (k, &joint) in tracked.iter().enumerate() {
            let base = k * SPARSE_CHANNELS_PER_JOINT;
            let rot = &fk.global_rot[f][joint];
            let rot6 = matrix_to_rot6d(rot);
            let rotvel = if f == 0 {
                Rot6d::identity()
            } else {
                matrix_to_rot6d(&frame_delta(&fk.global_rot[f - 1][joint], rot))
            };
            let p0 = &fk.global_pos[f][joint];
            let pos = [
                p0[0] + root_trans[f][0],
                p0[1] + root_trans[f][1],
                p0[2] + root_trans[f][2],
            ];
            let linvel = if f == 0 {
                [T::zero(); 3]
            } else {
                let pp = &fk.global_pos[f - 1][joint];
                [
                    ((p0[0] - pp[0]) + (root_trans[f][0] - root_trans[f - 1][0])) * fps,
                    ((p0[1] - pp[1]) + (root_trans[f][1] - root_trans[f - 1][1])) * fps,
                    ((p0[2] - pp[2]) + (root_trans[f][2] - root_trans[f - 1][2])) * fps,
                ]
            };
            let row = data.row_mut(f);
            row[base..base + 6].copy_from_slice(&rot6.0);
            row[base + 6..base + 12].copy_from_slice(&rotvel.0);
            row[base + 12..base + 15].copy_from_slice(&pos);
            row[base + 15..base + 18].copy_from_slice(&linvel);
        }
    }
    SparseInput::new(data)
}

/// Splits a sequence into N-frame chunks starting at 0, stride, 2·stride, …
/// The final chunk is the last N frames and may overlap its predecessor.
/// Returns (offset, chunk) pairs.
pub fn window<T: Scalar>(
    seq: &Tensor2<T>,
    n: usize,
    stride: usize,
) -> Result<Vec<(usize, Tensor2<T>)>> {
    let len = seq.rows();
    if len < n {
        return Err(Error::SequenceTooShort {
            context: "window",
            needed: n,
            got: len,
        });
    }
    assert!(stride > 0, "window stride must be positive");
    let mut chunks = Vec::new();
    let mut start = 0usize;
    loop {
        if start + n <= len {
            chunks.push((start, seq.slice_rows(start, n)));
            if start + n == len {
                break;
            }
            start += stride;
        } else {
            chunks.push((len - n, seq.slice_rows(len - n, n)));
            break;
        }
    }
    Ok(chunks)
}

/// Reassembles windowed chunks; overlapping frames take the later chunk's
/// values. Fails if any frame in [0, total) is uncovered.
pub fn stitch<T: Scalar>(chunks: &[(usize, Tensor2<T>)], total: usize) -> Result<Tensor2<T>> {
    if chunks.is_empty() {
        return Err(Error::CoverageGap { frame: 0 });
    }
    let cols = chunks[0].1.cols();
    let mut out = Tensor2::zeros(total, cols);
    let mut covered = vec![false; total];
    for (offset, chunk) in chunks {
        assert_eq!(chunk.cols(), cols, "stitch: chunk widths differ");
        for r in 0..chunk.rows() {
            let dst = offset + r;
            if dst < total {
                out.row_mut(dst).copy_from_slice(chunk.row(r));
                covered[dst] = true;
            }
        }
    }
    if let Some(frame) = covered.iter().position(|&c| !c) {
        return Err(Error::CoverageGap { frame });
    }
    Ok(out)
}

/// Zeroes ⌊fraction·N⌋ whole frames chosen uniformly without replacement by
/// the seeded generator. Deterministic per seed.
pub fn mask_tracking_loss<T: Scalar>(p: &SparseInput<T>, fraction: f64, seed: u64) -> SparseInput<T> {
    assert!((0.0..=1.0).contains(&fraction), "fraction must be in [0, 1]");
    let n = p.frames();
    let k = (fraction * n as f64).floor() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let picked = rand::seq::index::sample(&mut rng, n, k.min(n));
    let mut out = p.clone();
    for idx in picked.iter() {
        out.data.row_mut(idx).iter_mut().for_each(|v| *v = T::zero());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rotations::axisangle_to_matrix;
    use crate::skeleton::default_test_skeleton;

    fn identity_motion(frames: usize) -> MotionSequence<f32> {
        let rots = vec![vec![RotMat::identity(); BODY_JOINTS]; frames];
        MotionSequence::encode(&rots, FPS)
    }

    #[test]
    fn static_pose_has_zero_velocities() {
        let tree = default_test_skeleton::<f32>();
        let motion = identity_motion(8);
        let rt = vec![[0.0f32, 0.9, 0.0]; 8];
        let sp = build_sparse_input(&tree, &motion, &rt).unwrap();
        assert_eq!(sp.data.cols(), 54);
        let ident = Rot6d::<f32>::identity();
        for f in 0..8 {
            for k in 0..SPARSE_TRACKED_JOINTS {
                let base = k * SPARSE_CHANNELS_PER_JOINT;
                let row = sp.data.row(f);
                assert_eq!(&row[base + 6..base + 12], &ident.0, "rotvel frame {f}");
                assert_eq!(&row[base + 15..base + 18], &[0.0; 3], "linvel frame {f}");
            }
        }
    }

    #[test]
    fn constant_velocity_head_reads_back() {
        let tree = default_test_skeleton::<f32>();
        let frames = 10;
        let motion = identity_motion(frames);
        // 0.6 m/s at 60 fps → 0.01 m per frame along x
        let rt: Vec<[f32; 3]> = (0..frames)
            .map(|i| [0.01 * i as f32, 0.9, 0.0])
            .collect();
        let sp = build_sparse_input(&tree, &motion, &rt).unwrap();
        for f in 1..frames {
            let head_vel = &sp.data.row(f)[15..18];
            assert!((head_vel[0] - 0.6).abs() < 1e-4, "frame {f}: {head_vel:?}");
            assert!(head_vel[1].abs() < 1e-4 && head_vel[2].abs() < 1e-4);
        }
    }

    #[test]
    fn translation_shift_touches_only_position_channels() {
        let tree = default_test_skeleton::<f32>();
        let frames = 6;
        // non-trivial pose so orientation channels are not all identity
        let mut rots = vec![vec![RotMat::<f32>::identity(); BODY_JOINTS]; frames];
        for (f, frame) in rots.iter_mut().enumerate() {
            let angle = 0.05 * f as f64;
            frame[0] = axisangle_to_matrix(&[0.0f32, 1.0, 0.0], angle).unwrap();
            frame[16] = axisangle_to_matrix(&[1.0f32, 0.0, 0.0], 0.5 + angle).unwrap();
        }
        let motion = MotionSequence::encode(&rots, FPS);
        // dyadic root values so the constant shift is exactly representable
        let rt: Vec<[f32; 3]> = (0..frames).map(|i| [0.25 * i as f32, 1.0, -0.5]).collect();
        let v = [1.5f32, 2.25, -3.75];
        let shifted: Vec<[f32; 3]> = rt.iter().map(|p| [p[0] + v[0], p[1] + v[1], p[2] + v[2]]).collect();

        let a = build_sparse_input(&tree, &motion, &rt).unwrap();
        let b = build_sparse_input(&tree, &motion, &shifted).unwrap();
        for f in 0..frames {
            for k in 0..SPARSE_TRACKED_JOINTS {
                let base = k * SPARSE_CHANNELS_PER_JOINT;
                let ra = a.data.row(f);
                let rb = b.data.row(f);
                // orientation and both velocity blocks: bitwise identical
                assert_eq!(&ra[base..base + 12], &rb[base..base + 12]);
                assert_eq!(&ra[base + 15..base + 18], &rb[base + 15..base + 18]);
                // position block shifted by v
                for c in 0..3 {
                    assert!((rb[base + 12 + c] - ra[base + 12 + c] - v[c]).abs() < 1e-5);
                }
            }
        }
    }

    #[test]
    fn window_single_chunk() {
        let seq = Tensor2::<f32>::from_fn(196, 3, |r, _| r as f32);
        let chunks = window(&seq, 196, 196).unwrap();
        assert_eq!(chunks.len(), 1);
        assert_eq!(chunks[0].0, 0);
    }

    #[test]
    fn window_tail_rule() {
        let seq = Tensor2::<f32>::from_fn(200, 2, |r, _| r as f32);
        let chunks = window(&seq, 196, 196).unwrap();
        let offsets: Vec<usize> = chunks.iter().map(|c| c.0).collect();
        assert_eq!(offsets, vec![0, 4]);
    }

    #[test]
    fn window_exact_partition() {
        let seq = Tensor2::<f32>::from_fn(588, 1, |r, _| r as f32);
        let chunks = window(&seq, 196, 196).unwrap();
        let offsets: Vec<usize> = chunks.iter().map(|c| c.0).collect();
        assert_eq!(offsets, vec![0, 196, 392]);
    }

    #[test]
    fn window_rejects_short_sequences() {
        let seq = Tensor2::<f32>::zeros(10, 2);
        assert!(window(&seq, 16, 16).is_err());
    }

    #[test]
    fn stitch_single_chunk_is_identity() {
        let seq = Tensor2::<f32>::from_fn(32, 4, |r, c| (r * 4 + c) as f32);
        let out = stitch(&[(0, seq.clone())], 32).unwrap();
        assert_eq!(out, seq);
    }

    #[test]
    fn stitch_overlap_later_wins() {
        let a = Tensor2::<f32>::filled(8, 2, 1.0);
        let b = Tensor2::<f32>::filled(8, 2, 2.0);
        // chunks [0..8) and [4..12): frames 4..8 overlap
        let out = stitch(&[(0, a), (4, b)], 12).unwrap();
        for f in 0..4 {
            assert_eq!(out.row(f), &[1.0, 1.0], "frame {f}");
        }
        for f in 4..12 {
            assert_eq!(out.row(f), &[2.0, 2.0], "frame {f}");
        }
    }

    #[test]
    fn window_then_stitch_round_trips() {
        let seq = Tensor2::<f32>::from_fn(437, 3, |r, c| (r * 31 + c) as f32);
        let chunks = window(&seq, 196, 196).unwrap();
        let back = stitch(&chunks, 437).unwrap();
        assert_eq!(back, seq);
    }

    #[test]
    fn stitch_detects_gaps() {
        let a = Tensor2::<f32>::filled(4, 1, 1.0);
        let err = stitch(&[(0, a.clone()), (6, a)], 10).unwrap_err();
        match err {
            Error::CoverageGap { frame } => assert_eq!(frame, 4),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn mask_fraction_zero_is_identity() {
        let tree = default_test_skeleton::<f32>();
        let motion = identity_motion(20);
        let rt = vec![[0.0f32, 0.9, 0.0]; 20];
        let sp = build_sparse_input(&tree, &motion, &rt).unwrap();
        let masked = mask_tracking_loss(&sp, 0.0, 99);
        assert_eq!(masked.data, sp.data);
    }

    #[test]
    fn mask_fraction_one_zeroes_everything() {
        let tree = default_test_skeleton::<f32>();
        let motion = identity_motion(12);
        let rt = vec![[0.0f32, 0.9, 0.0]; 12];
        let sp = build_sparse_input(&tree, &motion, &rt).unwrap();
        let masked = mask_tracking_loss(&sp, 1.0, 99);
        assert!(masked.data.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn mask_zeroes_floor_of_fraction_frames() {
        let sp = SparseInput::new(Tensor2::<f32>::filled(196, SPARSE_WIDTH, 1.0)).unwrap();
        let masked = mask_tracking_loss(&sp, 0.1, 7);
        let zeroed = (0..196)
            .filter(|&f| masked.data.row(f).iter().all(|&v| v == 0.0))
            .count();
        assert_eq!(zeroed, 19); // floor(19.6)
    }

    #[test]
    fn mask_is_reproducible_per_seed() {
        let sp = SparseInput::new(Tensor2::<f32>::filled(50, SPARSE_WIDTH, 0.5)).unwrap();
        let a = mask_tracking_loss(&sp, 0.3, 1234);
        let b = mask_tracking_loss(&sp, 0.3, 1234);
        let c = mask_tracking_loss(&sp, 0.3, 4321);
        assert_eq!(a.data, b.data);
        assert_ne!(a.data, c.data);
    }
}
