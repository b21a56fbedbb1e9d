//! Kinematic tree, forward kinematics, and head-anchored root-translation
//! recovery.
//!
//! Joint indices follow the SMPL convention for the 22-joint body (pelvis 0,
//! hips 1/2, knees 4/5, ankles 7/8, feet 10/11, head 15, wrists 20/21).
//! Offsets are rest-pose bone vectors in meters, y-up.

use std::collections::HashMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::rotations::{add3, sub3, RotMat, Vec3};
use crate::scalar::Scalar;

/// Canonical joint names in SMPL order.
pub const SMPL_JOINT_NAMES: [&str; 22] = [
    "pelvis",
    "l_hip",
    "r_hip",
    "spine1",
    "l_knee",
    "r_knee",
    "spine2",
    "l_ankle",
    "r_ankle",
    "spine3",
    "l_foot",
    "r_foot",
    "neck",
    "l_collar",
    "r_collar",
    "head",
    "l_shoulder",
    "r_shoulder",
    "l_elbow",
    "r_elbow",
    "l_wrist",
    "r_wrist",
];

/// Pelvis height of the default skeleton when standing at rest, meters.
pub const STANDING_ROOT_HEIGHT: f64 = 0.92;

/// Kinematic tree: parent indices in topological order plus named joint
/// groups. Immutable after construction.
#[derive(Debug, Clone)]
pub struct SkeletonTree<T> {
    names: Vec<String>,
    parent: Vec<Option<usize>>,
    offset: Vec<Vec3<T>>,
    head: usize,
    hands: Vec<usize>,
    upper: Vec<usize>,
    lower: Vec<usize>,
    feet: Vec<usize>,
}

impl<T: Scalar> SkeletonTree<T> {
    /// Validates topology: exactly one root at index 0, parent[j] < j,
    /// group indices in range.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        names: Vec<String>,
        parent: Vec<Option<usize>>,
        offset: Vec<Vec3<T>>,
        head: usize,
        hands: Vec<usize>,
        upper: Vec<usize>,
        lower: Vec<usize>,
        feet: Vec<usize>,
    ) -> Result<Self> {
        let n = parent.len();
        if n == 0 || names.len() != n || offset.len() != n {
            return Err(Error::Topology("joint array lengths differ".into()));
        }
        if parent[0].is_some() {
            return Err(Error::Topology("joint 0 must be the root".into()));
        }
        for (j, p) in parent.iter().enumerate().skip(1) {
            match p {
                None => return Err(Error::Topology(format!("second root at joint {j}"))),
                Some(p) if *p >= j => {
                    return Err(Error::Topology(format!(
                        "joint {j} has parent {p}, breaking topological order"
                    )))
                }
                _ => {}
            }
        }
        for off in &offset {
            if !off.iter().all(|v| v.is_finite()) {
                return Err(Error::Topology("non-finite bone offset".into()));
            }
        }
        for &idx in [head].iter().chain(&hands).chain(&upper).chain(&lower).chain(&feet) {
            if idx >= n {
                return Err(Error::Topology(format!("group index {idx} out of range")));
            }
        }
        Ok(Self {
            names,
            parent,
            offset,
            head,
            hands,
            upper,
            lower,
            feet,
        })
    }

    /// Simple chain root→1→2→… for oracles and unit tests.
    pub fn chain(offsets: &[Vec3<T>]) -> Self {
        let n = offsets.len();
        let names = (0..n).map(|j| format!("joint{j}")).collect();
        let parent = (0..n).map(|j| if j == 0 { None } else { Some(j - 1) }).collect();
        Self {
            names,
            parent,
            offset: offsets.to_vec(),
            head: n - 1,
            hands: vec![],
            upper: (1..n).collect(),
            lower: vec![],
            feet: vec![],
        }
    }

    pub fn joint_count(&self) -> usize {
        self.parent.len()
    }

    pub fn parent(&self, j: usize) -> Option<usize> {
        self.parent[j]
    }

    pub fn offset(&self, j: usize) -> &Vec3<T> {
        &self.offset[j]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn head_index(&self) -> usize {
        self.head
    }

    pub fn hand_indices(&self) -> &[usize] {
        &self.hands
    }

    pub fn upper_body(&self) -> &[usize] {
        &self.upper
    }

    pub fn lower_body(&self) -> &[usize] {
        &self.lower
    }

    pub fn foot_indices(&self) -> &[usize] {
        &self.feet
    }

    pub fn cast<U: Scalar>(&self) -> SkeletonTree<U> {
        SkeletonTree {
            names: self.names.clone(),
            parent: self.parent.clone(),
            offset: self
                .offset
                .iter()
                .map(|o| [U::from_f64(o[0].to_f64()), U::from_f64(o[1].to_f64()), U::from_f64(o[2].to_f64())])
                .collect(),
            head: self.head,
            hands: self.hands.clone(),
            upper: self.upper.clone(),
            lower: self.lower.clone(),
            feet: self.feet.clone(),
        }
    }

    /// Writes the plain-text definition: one `name parent x y z` line per
    /// joint, `-` for the root's parent.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = String::from("# joint parent offset_x offset_y offset_z\n");
        for j in 0..self.joint_count() {
            let parent = match self.parent[j] {
                None => "-".to_string(),
                Some(p) => self.names[p].clone(),
            };
            out.push_str(&format!(
                "{} {} {} {} {}\n",
                self.names[j],
                parent,
                self.offset[j][0].to_f64(),
                self.offset[j][1].to_f64(),
                self.offset[j][2].to_f64(),
            ));
        }
        std::fs::write(path, out)?;
        Ok(())
    }

    /// Loads a skeleton from the plain-text format. Joints must use the
    /// canonical SMPL names so the named groups can be derived; parents must
    /// appear before children.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut names = Vec::new();
        let mut parent = Vec::new();
        let mut offset = Vec::new();
        let mut index = HashMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 5 {
                return Err(Error::Topology(format!(
                    "line {}: expected `name parent x y z`",
                    lineno + 1
                )));
            }
            let name = fields[0].to_string();
            let par = if fields[1] == "-" {
                None
            } else {
                Some(*index.get(fields[1]).ok_or_else(|| {
                    Error::Topology(format!(
                        "line {}: parent `{}` not defined yet",
                        lineno + 1,
                        fields[1]
                    ))
                })?)
            };
            let mut xyz = [T::zero(); 3];
            for (k, f) in fields[2..5].iter().enumerate() {
                let v: f64 = f
                    .parse()
                    .map_err(|_| Error::Topology(format!("line {}: bad number `{f}`", lineno + 1)))?;
                xyz[k] = T::from_f64(v);
            }
            index.insert(name.clone(), names.len());
            names.push(name);
            parent.push(par);
            offset.push(xyz);
        }
        let find = |name: &str| -> Result<usize> {
            index
                .get(name)
                .copied()
                .ok_or_else(|| Error::Topology(format!("missing canonical joint `{name}`")))
        };
        let head = find("head")?;
        let hands = vec![find("l_wrist")?, find("r_wrist")?];
        let feet = vec![find("l_foot")?, find("r_foot")?];
        let lower: Vec<usize> = ["l_hip", "r_hip", "l_knee", "r_knee", "l_ankle", "r_ankle", "l_foot", "r_foot"]
            .iter()
            .map(|n| find(n))
            .collect::<Result<_>>()?;
        let upper = (1..names.len()).filter(|j| !lower.contains(j)).collect();
        Self::new(names, parent, offset, head, hands, upper, lower, feet)
    }
}

/// The fixed humanoid shipped with the crate: SMPL joint ordering with
/// plausible bone lengths (standing head height ≈ 1.5 m).
pub fn default_test_skeleton<T: Scalar>() -> SkeletonTree<T> {
    let parent: Vec<Option<usize>> = vec![
        None,
        Some(0),
        Some(0),
        Some(0),
        Some(1),
        Some(2),
        Some(3),
        Some(4),
        Some(5),
        Some(6),
        Some(7),
        Some(8),
        Some(9),
        Some(9),
        Some(9),
        Some(12),
        Some(13),
        Some(14),
        Some(16),
        Some(17),
        Some(18),
        Some(19),
    ];
    let offsets_f64: [[f64; 3]; 22] = [
        [0.0, 0.0, 0.0],       // pelvis (root)
        [0.09, -0.07, 0.0],    // l_hip
        [-0.09, -0.07, 0.0],   // r_hip
        [0.0, 0.11, 0.0],      // spine1
        [0.0, -0.38, 0.0],     // l_knee
        [0.0, -0.38, 0.0],     // r_knee
        [0.0, 0.13, 0.0],      // spine2
        [0.0, -0.40, 0.0],     // l_ankle
        [0.0, -0.40, 0.0],     // r_ankle
        [0.0, 0.06, 0.0],      // spine3
        [0.0, -0.06, 0.12],    // l_foot
        [0.0, -0.06, 0.12],    // r_foot
        [0.0, 0.22, 0.0],      // neck
        [0.07, 0.12, 0.0],     // l_collar
        [-0.07, 0.12, 0.0],    // r_collar
        [0.0, 0.16, 0.0],      // head
        [0.10, 0.02, 0.0],     // l_shoulder
        [-0.10, 0.02, 0.0],    // r_shoulder
        [0.26, 0.0, 0.0],      // l_elbow
        [-0.26, 0.0, 0.0],     // r_elbow
        [0.25, 0.0, 0.0],      // l_wrist
        [-0.25, 0.0, 0.0],     // r_wrist
    ];
    let offset = offsets_f64
        .iter()
        .map(|o| [T::from_f64(o[0]), T::from_f64(o[1]), T::from_f64(o[2])])
        .collect();
    let names = SMPL_JOINT_NAMES.iter().map(|s| s.to_string()).collect();
    let lower = vec![1, 2, 4, 5, 7, 8, 10, 11];
    let upper = (1..22).filter(|j| !lower.contains(j)).collect();
    SkeletonTree::new(
        names,
        parent,
        offset,
        15,
        vec![20, 21],
        upper,
        lower,
        vec![10, 11],
    )
    .expect("default skeleton is valid")
}

/// Global joint rotations and positions per frame.
#[derive(Debug, Clone)]
pub struct FkResult<T> {
    /// [frame][joint]
    pub global_rot: Vec<Vec<RotMat<T>>>,
    /// [frame][joint], meters
    pub global_pos: Vec<Vec<Vec3<T>>>,
}

/// Forward kinematics over the tree:
/// global_rot[j] = global_rot[parent]·local_rot[j] (root takes its local
/// rotation directly) and global_pos[j] = global_pos[parent] +
/// global_rot[parent]·offset[j], with the root placed at `root_trans`.
pub fn forward_kinematics<T: Scalar>(
    tree: &SkeletonTree<T>,
    local_rots: &[Vec<RotMat<T>>],
    root_trans: &[Vec3<T>],
) -> Result<FkResult<T>> {
    if local_rots.len() != root_trans.len() {
        return Err(Error::LengthMismatch {
            context: "forward_kinematics",
            left: local_rots.len(),
            right: root_trans.len(),
        });
    }
    let n = tree.joint_count();
    let mut global_rot = Vec::with_capacity(local_rots.len());
    let mut global_pos = Vec::with_capacity(local_rots.len());
    for (frame, rots) in local_rots.iter().enumerate() {
        if rots.len() != n {
            return Err(Error::Topology(format!(
                "frame {frame}: {} rotations for {n} joints",
                rots.len()
            )));
        }
        let mut rot = Vec::with_capacity(n);
        let mut pos: Vec<Vec3<T>> = Vec::with_capacity(n);
        for j in 0..n {
            match tree.parent(j) {
                None => {
                    rot.push(rots[j]);
                    pos.push([T::zero(); 3]);
                }
                Some(p) => {
                    rot.push(rot[p].compose(&rots[j]));
                    let bone = rot[p].apply(tree.offset(j));
                    pos.push(add3(&pos[p], &bone));
                }
            }
        }
        // root translation is a rigid offset; applying it last keeps
        // translation equivariance exact
        let rt = &root_trans[frame];
        for p in pos.iter_mut() {
            *p = add3(p, rt);
        }
        global_rot.push(rot);
        global_pos.push(pos);
    }
    Ok(FkResult {
        global_rot,
        global_pos,
    })
}

/// Gradient of a scalar loss w.r.t. the local rotation matrices, given the
/// gradient w.r.t. global joint positions. Consumes the forward result for
/// the chain rotations.
pub fn fk_backward<T: Scalar>(
    tree: &SkeletonTree<T>,
    local_rots: &[Vec<RotMat<T>>],
    fk: &FkResult<T>,
    d_pos: &[Vec<Vec3<T>>],
) -> Vec<Vec<RotMat<T>>> {
    let n = tree.joint_count();
    let frames = local_rots.len();
    assert_eq!(d_pos.len(), frames, "fk_backward: frame count mismatch");
    let zero = RotMat([[T::zero(); 3]; 3]);
    let mut d_local = vec![vec![zero; n]; frames];
    for f in 0..frames {
        let mut g_rot = vec![[[0f64; 3]; 3]; n];
        let mut g_pos: Vec<[f64; 3]> = d_pos[f]
            .iter()
            .map(|v| [v[0].to_f64(), v[1].to_f64(), v[2].to_f64()])
            .collect();
        for j in (1..n).rev() {
            let p = tree.parent(j).expect("non-root joint has a parent");
            // p_j = p_p + R_p·off_j  →  dR_p += g_pos_j ⊗ off_j, dp_p += dp_j
            let off = tree.offset(j);
            for r in 0..3 {
                for c in 0..3 {
                    g_rot[p][r][c] += g_pos[j][r] * off[c].to_f64();
                }
                g_pos[p][r] += g_pos[j][r];
            }
            // R_j = R_p·L_j  →  dR_p += dR_j·L_jᵀ, dL_j = R_pᵀ·dR_j
            let lj = &local_rots[f][j];
            let rp = &fk.global_rot[f][p];
            for r in 0..3 {
                for c in 0..3 {
                    let mut acc_p = 0f64;
                    let mut acc_l = 0f64;
                    for k in 0..3 {
                        acc_p += g_rot[j][r][k] * lj.0[c][k].to_f64();
                        acc_l += rp.0[k][r].to_f64() * g_rot[j][k][c];
                    }
                    g_rot[p][r][c] += acc_p;
                    d_local[f][j].0[r][c] = T::from_f64(acc_l);
                }
            }
        }
        // root: R_0 = L_0
        for r in 0..3 {
            for c in 0..3 {
                d_local[f][0].0[r][c] = T::from_f64(g_rot[0][r][c]);
            }
        }
    }
    d_local
}

/// Root translation that places the head on the given global trajectory:
/// run FK with zero root translation and subtract the head offset.
pub fn recover_root_translation<T: Scalar>(
    tree: &SkeletonTree<T>,
    local_rots: &[Vec<RotMat<T>>],
    head_global_pos: &[Vec3<T>],
) -> Result<Vec<Vec3<T>>> {
    if local_rots.len() != head_global_pos.len() {
        return Err(Error::LengthMismatch {
            context: "recover_root_translation",
            left: local_rots.len(),
            right: head_global_pos.len(),
        });
    }
    let zeros = vec![[T::zero(); 3]; local_rots.len()];
    let fk = forward_kinematics(tree, local_rots, &zeros)?;
    let head = tree.head_index();
    Ok(fk
        .global_pos
        .iter()
        .zip(head_global_pos)
        .map(|(pos, target)| sub3(target, &pos[head]))
        .collect())
}
