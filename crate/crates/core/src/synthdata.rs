//! Deterministic procedural gait generator (the hermetic stand-in for
//! captured motion data) and the MSEQ motion-file format shared by all
//! tools.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::features::{MotionSequence, BODY_JOINTS, FPS};
use crate::numerics::Tensor2;
use crate::rotations::{axisangle_to_matrix, RotMat, Vec3};
use crate::skeleton::{forward_kinematics, SkeletonTree, STANDING_ROOT_HEIGHT};
use crate::scalar::Scalar;

pub const MSEQ_MAGIC: [u8; 4] = *b"MSEQ";
pub const MSEQ_VERSION: u32 = 1;
const TRACK_ROOT: [u8; 4] = *b"ROOT";
const TRACK_HEAD: [u8; 4] = *b"HEAD";

/// A motion container: frames × channels payload plus optional parallel
/// tracks for root translation and head trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct MseqFile<T> {
    pub fps: u32,
    pub data: Tensor2<T>,
    pub root_trans: Option<Vec<Vec3<T>>>,
    pub head: Option<Vec<Vec3<T>>>,
}

fn push_track<T: Scalar>(buf: &mut Vec<u8>, tag: [u8; 4], track: &[Vec3<T>]) {
    buf.extend_from_slice(&tag);
    buf.extend_from_slice(&3u32.to_le_bytes());
    for v in track {
        for k in 0..3 {
            buf.extend_from_slice(&v[k].to_f32().to_bits().to_le_bytes());
        }
    }
}

/// Writes the little-endian MSEQ container (payloads are raw 32-bit reals).
pub fn save_mseq<T: Scalar>(path: &Path, file: &MseqFile<T>) -> Result<()> {
    let mut buf = Vec::new();
    buf.extend_from_slice(&MSEQ_MAGIC);
    buf.extend_from_slice(&MSEQ_VERSION.to_le_bytes());
    buf.extend_from_slice(&file.fps.to_le_bytes());
    buf.extend_from_slice(&(file.data.rows() as u32).to_le_bytes());
    buf.extend_from_slice(&(file.data.cols() as u32).to_le_bytes());
    for &v in file.data.as_slice() {
        buf.extend_from_slice(&v.to_f32().to_bits().to_le_bytes());
    }
    let tracks = usize::from(file.root_trans.is_some()) + usize::from(file.head.is_some());
    buf.extend_from_slice(&(tracks as u32).to_le_bytes());
    if let Some(rt) = &file.root_trans {
        push_track(&mut buf, TRACK_ROOT, rt);
    }
    if let Some(head) = &file.head {
        push_track(&mut buf, TRACK_HEAD, head);
    }
    std::fs::write(path, buf)?;
    Ok(())
}

struct Reader<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.data.len() {
            return Err(Error::Truncated { context: "mseq" });
        }
        let s = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f32s(&mut self, count: usize) -> Result<Vec<f32>> {
        let raw = self.take(count * 4)?;
        Ok(raw
            .chunks_exact(4)
            .map(|c| f32::from_bits(u32::from_le_bytes(c.try_into().unwrap())))
            .collect())
    }
}

pub fn load_mseq<T: Scalar>(path: &Path) -> Result<MseqFile<T>> {
    let bytes = std::fs::read(path)?;
    let mut r = Reader {
        data: &bytes,
        pos: 0,
    };
    let magic: [u8; 4] = r.take(4)?.try_into().unwrap();
    if magic != MSEQ_MAGIC {
        return Err(Error::BadMagic {
            context: "mseq",
            expected: MSEQ_MAGIC,
            found: magic,
        });
    }
    let version = r.u32()?;
    if version != MSEQ_VERSION {
        return Err(Error::VersionMismatch {
            context: "mseq",
            expected: MSEQ_VERSION,
            found: version,
        });
    }
    let fps = r.u32()?;
    let frames = r.u32()? as usize;
    let channels = r.u32()? as usize;
    let payload = r.f32s(frames * channels)?;
    let data = Tensor2::from_vec(frames, channels, payload.into_iter().map(T::from_f32).collect())?;
    let mut root_trans = None;
    let mut head = None;
    let tracks = r.u32()? as usize;
    for _ in 0..tracks {
        let tag: [u8; 4] = r.take(4)?.try_into().unwrap();
        let width = r.u32()? as usize;
        let vals = r.f32s(frames * width)?;
        if width != 3 {
            return Err(Error::WidthMismatch {
                context: "mseq track",
                expected: 3,
                got: width,
            });
        }
        let track: Vec<Vec3<T>> = vals
            .chunks_exact(3)
            .map(|c| [T::from_f32(c[0]), T::from_f32(c[1]), T::from_f32(c[2])])
            .collect();
        match tag {
            TRACK_ROOT => root_trans = Some(track),
            TRACK_HEAD => head = Some(track),
            other => {
                return Err(Error::BadMagic {
                    context: "mseq track tag",
                    expected: TRACK_ROOT,
                    found: other,
                })
            }
        }
    }
    Ok(MseqFile {
        fps,
        data,
        root_trans,
        head,
    })
}

/// Gait-cycle parameters for the procedural generator.
#[derive(Debug, Clone, Copy)]
pub struct GaitParams {
    /// Step-cycle frequency, Hz.
    pub cycle_hz: f64,
    /// Hip swing amplitude, radians.
    pub stride_amplitude: f64,
    /// Shoulder swing amplitude, radians.
    pub arm_swing: f64,
    /// Walking speed along the heading, m/s.
    pub forward_speed: f64,
    /// Heading change rate, rad/s.
    pub turning_rate: f64,
    /// Spine roll amplitude, radians.
    pub torso_sway: f64,
    pub phase_offset: f64,
    pub frames: usize,
    pub fps: u32,
}

impl Default for GaitParams {
    fn default() -> Self {
        Self {
            cycle_hz: 1.1,
            stride_amplitude: 0.5,
            arm_swing: 0.35,
            forward_speed: 0.9,
            turning_rate: 0.0,
            torso_sway: 0.06,
            phase_offset: 0.0,
            frames: 196,
            fps: FPS,
        }
    }
}

/// SMPL joint indices driven by the generator.
mod joints {
    pub const PELVIS: usize = 0;
    pub const L_HIP: usize = 1;
    pub const R_HIP: usize = 2;
    pub const SPINE1: usize = 3;
    pub const L_KNEE: usize = 4;
    pub const R_KNEE: usize = 5;
    pub const SPINE2: usize = 6;
    pub const L_ANKLE: usize = 7;
    pub const R_ANKLE: usize = 8;
    pub const L_SHOULDER: usize = 16;
    pub const R_SHOULDER: usize = 17;
    pub const L_ELBOW: usize = 18;
    pub const R_ELBOW: usize = 19;
}

/// Sinusoidal walking motion, phase-locked across joints with contralateral
/// arm-leg phasing. Deterministic per (params, seed); a per-joint constant
/// bias (≤ 1°, scaled by the stride amplitude so zeroed parameters yield an
/// exact identity pose) adds dataset variety.
pub fn generate_gait<T: Scalar>(
    tree: &SkeletonTree<T>,
    params: &GaitParams,
    seed: u64,
) -> Result<(MotionSequence<T>, Vec<Vec3<T>>, Vec<Vec3<T>>)> {
    assert!(params.cycle_hz > 0.0, "cycle frequency must be positive");
    assert!(params.fps > 0, "fps must be positive");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise_scale = (params.stride_amplitude.abs() / 0.5).min(1.0);
    let bias: Vec<f64> = (0..BODY_JOINTS)
        .map(|_| rng.gen_range(-0.017..0.017) * noise_scale)
        .collect();
    let bias_axes: Vec<[f64; 3]> = (0..BODY_JOINTS)
        .map(|_| {
            let v: [f64; 3] = [
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            ];
            let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt().max(1e-6);
            [v[0] / n, v[1] / n, v[2] / n]
        })
        .collect();

    let dt = 1.0 / params.fps as f64;
    let knee_amp = 0.6 * params.stride_amplitude;
    let x_axis = [1.0, 0.0, 0.0];
    let y_axis = [0.0, 1.0, 0.0];
    let z_axis = [0.0, 0.0, 1.0];

    let mut rots: Vec<Vec<RotMat<T>>> = Vec::with_capacity(params.frames);
    let mut root_trans: Vec<Vec3<T>> = Vec::with_capacity(params.frames);
    let mut pos_x = 0f64;
    let mut pos_z = 0f64;
    for i in 0..params.frames {
        let time = i as f64 * dt;
        let phase = 2.0 * std::f64::consts::PI * params.cycle_hz * time + params.phase_offset;
        let heading = params.turning_rate * time;
        let mut angles = [0f64; BODY_JOINTS];
        angles[joints::L_HIP] = -params.stride_amplitude * phase.sin();
        angles[joints::R_HIP] = -params.stride_amplitude * (phase + std::f64::consts::PI).sin();
        // knees flex only (non-negative) so the swing foot clears the ground
        angles[joints::L_KNEE] = knee_amp * (1.0 - phase.cos()) / 2.0;
        angles[joints::R_KNEE] = knee_amp * (1.0 + phase.cos()) / 2.0;
        angles[joints::L_ANKLE] = -0.3 * angles[joints::L_KNEE];
        angles[joints::R_ANKLE] = -0.3 * angles[joints::R_KNEE];
        // arms oppose the same-side leg
        angles[joints::L_SHOULDER] = -params.arm_swing * (phase + std::f64::consts::PI).sin();
        angles[joints::R_SHOULDER] = -params.arm_swing * phase.sin();
        angles[joints::L_ELBOW] = 0.25 * params.arm_swing * (1.0 - phase.cos());
        angles[joints::R_ELBOW] = 0.25 * params.arm_swing * (1.0 + phase.cos());

        let mut frame: Vec<RotMat<T>> = Vec::with_capacity(BODY_JOINTS);
        for j in 0..BODY_JOINTS {
            let mut m: RotMat<f64> = if j == joints::PELVIS {
                let yaw = axisangle_to_matrix(&y_axis, heading)?;
                let roll = axisangle_to_matrix(&z_axis, params.torso_sway * 0.3 * phase.sin())?;
                yaw.compose(&roll)
            } else if matches!(j, joints::SPINE1 | joints::SPINE2) {
                axisangle_to_matrix(&z_axis, params.torso_sway * phase.sin())?
            } else if angles[j] != 0.0 {
                axisangle_to_matrix(&x_axis, angles[j])?
            } else {
                RotMat::identity()
            };
            if bias[j] != 0.0 {
                m = m.compose(&axisangle_to_matrix(&bias_axes[j], bias[j])?);
            }
            frame.push(RotMat(m.0.map(|row| row.map(T::from_f64))));
        }
        rots.push(frame);

        let bounce = 0.015 * noise_scale * (1.0 - (2.0 * phase).cos()) / 2.0;
        root_trans.push([
            T::from_f64(pos_x),
            T::from_f64(STANDING_ROOT_HEIGHT + bounce),
            T::from_f64(pos_z),
        ]);
        pos_x += params.forward_speed * dt * heading.sin();
        pos_z += params.forward_speed * dt * heading.cos();
    }
    let motion = MotionSequence::encode(&rots, params.fps);
    let fk = forward_kinematics(tree, &rots, &root_trans)?;
    let head = tree.head_index();
    let head_traj = fk.global_pos.iter().map(|f| f[head]).collect();
    Ok((motion, root_trans, head_traj))
}

/// Uniform sampling ranges for dataset generation.
#[derive(Debug, Clone, Copy)]
pub struct GaitRanges {
    pub cycle_hz: (f64, f64),
    pub stride_amplitude: (f64, f64),
    pub arm_swing: (f64, f64),
    pub forward_speed: (f64, f64),
    pub turning_rate: (f64, f64),
    pub torso_sway: (f64, f64),
    pub frames: usize,
    pub fps: u32,
}

impl Default for GaitRanges {
    fn default() -> Self {
        Self {
            cycle_hz: (0.7, 1.5),
            stride_amplitude: (0.25, 0.65),
            arm_swing: (0.2, 0.5),
            forward_speed: (0.4, 1.3),
            turning_rate: (-0.4, 0.4),
            torso_sway: (0.02, 0.1),
            frames: 196,
            fps: FPS,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn name(&self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

/// One generated sequence with its ground-truth tracks.
#[derive(Debug, Clone)]
pub struct GeneratedSequence<T> {
    pub motion: MotionSequence<T>,
    pub root_trans: Vec<Vec3<T>>,
    pub head: Vec<Vec3<T>>,
    pub params: GaitParams,
    pub split: Split,
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e3779b97f4a7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d049bb133111eb);
    x ^ (x >> 31)
}

/// Samples `count` gaits uniformly from the ranges and splits them 90/10 by
/// index hash (at least one test sequence). Deterministic per seed.
pub fn make_dataset<T: Scalar>(
    tree: &SkeletonTree<T>,
    count: usize,
    ranges: &GaitRanges,
    seed: u64,
) -> Result<Vec<GeneratedSequence<T>>> {
    if count < 2 {
        return Err(Error::Config("dataset needs at least two sequences".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params_list = Vec::with_capacity(count);
    for _ in 0..count {
        params_list.push(GaitParams {
            cycle_hz: rng.gen_range(ranges.cycle_hz.0..ranges.cycle_hz.1),
            stride_amplitude: rng.gen_range(ranges.stride_amplitude.0..ranges.stride_amplitude.1),
            arm_swing: rng.gen_range(ranges.arm_swing.0..ranges.arm_swing.1),
            forward_speed: rng.gen_range(ranges.forward_speed.0..ranges.forward_speed.1),
            turning_rate: rng.gen_range(ranges.turning_rate.0..ranges.turning_rate.1),
            torso_sway: rng.gen_range(ranges.torso_sway.0..ranges.torso_sway.1),
            phase_offset: rng.gen_range(0.0..std::f64::consts::TAU),
            frames: ranges.frames,
            fps: ranges.fps,
        });
    }
    // deterministic 90/10 split: the lowest-hashed tenth is held out
    let n_test = (count / 10).max(1);
    let mut order: Vec<usize> = (0..count).collect();
    order.sort_by_key(|&i| splitmix64(seed ^ (i as u64 + 1)));
    let test_set: std::collections::HashSet<usize> = order.into_iter().take(n_test).collect();

    let mut out = Vec::with_capacity(count);
    for (i, params) in params_list.into_iter().enumerate() {
        let seq_seed = splitmix64(seed.wrapping_add(0x5eed) ^ (i as u64));
        let (motion, root_trans, head) = generate_gait(tree, &params, seq_seed)?;
        out.push(GeneratedSequence {
            motion,
            root_trans,
            head,
            params,
            split: if test_set.contains(&i) {
                Split::Test
            } else {
                Split::Train
            },
        });
    }
    Ok(out)
}

/// Writes `NNN.mseq` files plus a line-oriented `manifest.txt`
/// (`name frames split` per line).
pub fn save_dataset<T: Scalar>(dir: &Path, dataset: &[GeneratedSequence<T>]) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut manifest = String::new();
    for (i, seq) in dataset.iter().enumerate() {
        let name = format!("{i:03}.mseq");
        let file = MseqFile {
            fps: seq.motion.fps,
            data: seq.motion.data.clone(),
            root_trans: Some(seq.root_trans.clone()),
            head: Some(seq.head.clone()),
        };
        save_mseq(&dir.join(&name), &file)?;
        manifest.push_str(&format!(
            "{name} {} {}\n",
            seq.motion.frames(),
            seq.split.name()
        ));
    }
    std::fs::write(dir.join("manifest.txt"), manifest)?;
    Ok(())
}

/// Reads a dataset directory written by [`save_dataset`]. Returns
/// (name, file, split) triples in manifest order.
pub fn load_dataset<T: Scalar>(dir: &Path) -> Result<Vec<(String, MseqFile<T>, Split)>> {
    let manifest = std::fs::read_to_string(dir.join("manifest.txt"))?;
    let mut out = Vec::new();
    for line in manifest.lines() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(Error::Config(format!("bad manifest line `{line}`")));
        }
        let split = match fields[2] {
            "train" => Split::Train,
            "test" => Split::Test,
            other => return Err(Error::Config(format!("bad split `{other}`"))),
        };
        let file = load_mseq(&dir.join(fields[0]))?;
        out.push((fields[0].to_string(), file, split));
    }
    Ok(out)
}
