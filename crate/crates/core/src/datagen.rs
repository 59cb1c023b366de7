//! Dataset construction: uniform joint-space sampling (motor babbling),
//! chain-derived normalization, train/test splitting, and CSV persistence.

use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::kinematics::KinematicChain;
use crate::linalg::Matrix;
use crate::rng::seeded_rng;
use crate::{Error, Result};

/// Paired joint angles (N x n_joints, radians) and end positions (N x 3, cm)
/// with exact row correspondence: `p.row(i) == fk(chain, q.row(i))`.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledSet {
    pub q: Matrix,
    pub p: Matrix,
}

impl LabeledSet {
    pub fn new(q: Matrix, p: Matrix) -> Self {
        assert_eq!(q.rows(), p.rows(), "row correspondence");
        assert_eq!(p.cols(), 3, "positions are 3D");
        Self { q, p }
    }

    pub fn len(&self) -> usize {
        self.q.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Uniform per-joint sampling over the joint limits; positions computed by
/// the chain's forward kinematics. Deterministic in `seed`.
pub fn sample_joint_dataset(chain: &KinematicChain, n: usize, seed: u64) -> LabeledSet {
    let n_joints = chain.n_joints();
    let mut rng = seeded_rng(seed);
    let mut q = Matrix::zeros(n, n_joints);
    let mut p = Matrix::zeros(n, 3);
    for i in 0..n {
        for (j, &(lo, hi)) in chain.joint_limits().iter().enumerate() {
            q.row_mut(i)[j] = rng.gen_range(lo..=hi);
        }
        let pos = chain.fk(q.row(i));
        p.row_mut(i).copy_from_slice(&pos);
    }
    LabeledSet::new(q, p)
}

/// Affine maps between physical units and the network's [0, 1] ranges.
///
/// The position map covers the analytic reach box `[-reach, reach]^3`
/// rather than an empirical bounding box, so it is independent of any
/// particular sample. The joint map sends each joint's `[lo, hi]` to
/// `[0, 1]`, which means denormalizing a sigmoid output always lands
/// inside the limits.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalizerPair {
    pub pos_lo: [f64; 3],
    pub pos_hi: [f64; 3],
    pub joint_lo: Vec<f64>,
    pub joint_hi: Vec<f64>,
}

/// Build normalizers from chain geometry alone.
pub fn fit_normalizers(chain: &KinematicChain) -> NormalizerPair {
    let r = chain.reach();
    NormalizerPair {
        pos_lo: [-r; 3],
        pos_hi: [r; 3],
        joint_lo: chain.joint_limits().iter().map(|&(lo, _)| lo).collect(),
        joint_hi: chain.joint_limits().iter().map(|&(_, hi)| hi).collect(),
    }
}

impl NormalizerPair {
    pub fn n_joints(&self) -> usize {
        self.joint_lo.len()
    }

    /// Positions (N x 3, cm) to network inputs in [0, 1]^3.
    pub fn normalize_positions(&self, p: &Matrix) -> Matrix {
        assert_eq!(p.cols(), 3);
        let mut out = p.clone();
        for row in out.data_mut().chunks_exact_mut(3) {
            for a in 0..3 {
                row[a] = (row[a] - self.pos_lo[a]) / (self.pos_hi[a] - self.pos_lo[a]);
            }
        }
        out
    }

    pub fn denormalize_positions(&self, x: &Matrix) -> Matrix {
        assert_eq!(x.cols(), 3);
        let mut out = x.clone();
        for row in out.data_mut().chunks_exact_mut(3) {
            for a in 0..3 {
                row[a] = self.pos_lo[a] + row[a] * (self.pos_hi[a] - self.pos_lo[a]);
            }
        }
        out
    }

    /// Joint angles (N x n, radians) to [0, 1] targets. A collapsed joint
    /// (lo == hi) maps to 0.5.
    pub fn normalize_joints(&self, q: &Matrix) -> Matrix {
        assert_eq!(q.cols(), self.n_joints());
        let mut out = q.clone();
        let n = self.n_joints();
        for row in out.data_mut().chunks_exact_mut(n) {
            for j in 0..n {
                let span = self.joint_hi[j] - self.joint_lo[j];
                row[j] = if span == 0.0 {
                    0.5
                } else {
                    (row[j] - self.joint_lo[j]) / span
                };
            }
        }
        out
    }

    /// Network outputs in [0, 1] back to radians inside the joint limits.
    pub fn denormalize_joints(&self, y: &Matrix) -> Matrix {
        assert_eq!(y.cols(), self.n_joints());
        let mut out = y.clone();
        let n = self.n_joints();
        for row in out.data_mut().chunks_exact_mut(n) {
            for j in 0..n {
                row[j] = self.joint_lo[j] + row[j] * (self.joint_hi[j] - self.joint_lo[j]);
            }
        }
        out
    }

    /// Per-joint denormalization scale dq/dy (used to compose gradients
    /// through the output map).
    pub fn joint_spans(&self) -> Vec<f64> {
        self.joint_lo
            .iter()
            .zip(&self.joint_hi)
            .map(|(&lo, &hi)| hi - lo)
            .collect()
    }
}

/// Seed-deterministic shuffle split into `n_train` and `len - n_train` rows.
/// The two halves partition the input by row index.
pub fn split(set: &LabeledSet, n_train: usize, seed: u64) -> Result<(LabeledSet, LabeledSet)> {
    let n = set.len();
    if n_train == 0 || n_train >= n {
        return Err(Error::InvalidArgument(format!(
            "n_train must be in 1..{n}, got {n_train}"
        )));
    }
    let mut indices: Vec<usize> = (0..n).collect();
    indices.shuffle(&mut seeded_rng(seed));
    let gather = |idx: &[usize]| {
        let mut q = Matrix::zeros(idx.len(), set.q.cols());
        let mut p = Matrix::zeros(idx.len(), 3);
        for (r, &i) in idx.iter().enumerate() {
            q.row_mut(r).copy_from_slice(set.q.row(i));
            p.row_mut(r).copy_from_slice(set.p.row(i));
        }
        LabeledSet::new(q, p)
    };
    Ok((gather(&indices[..n_train]), gather(&indices[n_train..])))
}

/// Write a labeled set as CSV with header `q_1..q_n,p_x,p_y,p_z`.
/// Floats are written in shortest round-trip form, so a rerun with the same
/// seed produces a byte-identical file.
pub fn write_csv(set: &LabeledSet, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    let n_joints = set.q.cols();
    let mut header: Vec<String> = (1..=n_joints).map(|j| format!("q_{j}")).collect();
    header.extend(["p_x".into(), "p_y".into(), "p_z".into()]);
    writeln!(w, "{}", header.join(","))?;
    for i in 0..set.len() {
        let mut fields: Vec<String> = set.q.row(i).iter().map(|v| v.to_string()).collect();
        fields.extend(set.p.row(i).iter().map(|v| v.to_string()));
        writeln!(w, "{}", fields.join(","))?;
    }
    w.flush()?;
    Ok(())
}

/// Read a labeled set written by [`write_csv`].
pub fn read_csv(path: &Path) -> Result<LabeledSet> {
    let reader = BufReader::new(std::fs::File::open(path)?);
    let mut lines = reader.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::InvalidArgument(format!("{}: empty file", path.display())))??;
    let n_cols = header.split(',').count();
    if n_cols < 4 {
        return Err(Error::InvalidArgument(format!(
            "{}: expected q_* and p_x,p_y,p_z columns",
            path.display()
        )));
    }
    let n_joints = n_cols - 3;
    let mut qdata = Vec::new();
    let mut pdata = Vec::new();
    let mut rows = 0;
    for line in lines {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split(',');
        for _ in 0..n_joints {
            qdata.push(parse_field(&mut fields, path)?);
        }
        for _ in 0..3 {
            pdata.push(parse_field(&mut fields, path)?);
        }
        if fields.next().is_some() {
            return Err(Error::InvalidArgument(format!(
                "{}: too many fields on row {rows}",
                path.display()
            )));
        }
        rows += 1;
    }
    Ok(LabeledSet::new(
        Matrix::from_vec(rows, n_joints, qdata),
        Matrix::from_vec(rows, 3, pdata),
    ))
}

fn parse_field<'a>(fields: &mut impl Iterator<Item = &'a str>, path: &Path) -> Result<f64> {
    let field = fields
        .next()
        .ok_or_else(|| Error::InvalidArgument(format!("{}: short row", path.display())))?;
    field
        .parse::<f64>()
        .map_err(|e| Error::InvalidArgument(format!("{}: bad float {field:?}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinematics::Axis;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::FRAC_PI_2;

    fn chain() -> KinematicChain {
        KinematicChain::default6(FRAC_PI_2)
    }

    #[test]
    fn sampling_is_deterministic() {
        let a = sample_joint_dataset(&chain(), 5, 7);
        let b = sample_joint_dataset(&chain(), 5, 7);
        assert_eq!(a, b);
        let c = sample_joint_dataset(&chain(), 5, 8);
        assert_ne!(a, c);
    }

    #[test]
    fn sampled_pairs_satisfy_fk_exactly() {
        let set = sample_joint_dataset(&chain(), 50, 3);
        for i in 0..set.len() {
            assert_eq!(set.p.row(i), &chain().fk(set.q.row(i))[..]);
        }
    }

    #[test]
    fn collapsed_limits_pin_the_arm() {
        let frozen = KinematicChain::new(
            vec![Axis::Z, Axis::Y],
            vec![10.0, 10.0],
            vec![(0.0, 0.0); 2],
        )
        .unwrap();
        let set = sample_joint_dataset(&frozen, 4, 1);
        assert!(set.q.data().iter().all(|&v| v == 0.0));
        for i in 0..4 {
            assert_abs_diff_eq!(set.p.row(i)[0], 20.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn normalizers_map_box_center_and_limit_endpoints() {
        let norms = fit_normalizers(&chain());
        let center = norms.normalize_positions(&Matrix::from_vec(1, 3, vec![0.0, 0.0, 0.0]));
        assert_eq!(center.data(), &[0.5, 0.5, 0.5]);

        let q = Matrix::from_vec(1, 6, chain().joint_limits().iter().map(|&(lo, _)| lo).collect());
        assert!(norms.normalize_joints(&q).data().iter().all(|&v| v == 0.0));
        let q = Matrix::from_vec(1, 6, chain().joint_limits().iter().map(|&(_, hi)| hi).collect());
        assert!(norms.normalize_joints(&q).data().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn round_trip_error_below_1e12() {
        let norms = fit_normalizers(&chain());
        let set = sample_joint_dataset(&chain(), 1000, 5);
        let p2 = norms.denormalize_positions(&norms.normalize_positions(&set.p));
        for (&a, &b) in p2.data().iter().zip(set.p.data()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
        let q2 = norms.denormalize_joints(&norms.normalize_joints(&set.q));
        for (&a, &b) in q2.data().iter().zip(set.q.data()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn normalized_samples_stay_in_unit_box() {
        let norms = fit_normalizers(&chain());
        let set = sample_joint_dataset(&chain(), 500, 11);
        let np = norms.normalize_positions(&set.p);
        assert!(np.data().iter().all(|&v| (0.0..=1.0).contains(&v)));
        let nq = norms.normalize_joints(&set.q);
        assert!(nq.data().iter().all(|&v| (0.0..=1.0).contains(&v)));
    }

    #[test]
    fn split_partitions_rows() {
        let set = sample_joint_dataset(&chain(), 10, 2);
        let (train, test) = split(&set, 7, 9).unwrap();
        assert_eq!(train.len(), 7);
        assert_eq!(test.len(), 3);

        // disjoint + exhaustive: every original row appears exactly once
        let mut seen: Vec<&[f64]> = train.q.row_iter().chain(test.q.row_iter()).collect();
        seen.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut orig: Vec<&[f64]> = set.q.row_iter().collect();
        orig.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(seen, orig);

        let (t2, _) = split(&set, 7, 9).unwrap();
        assert_eq!(train, t2);

        assert!(split(&set, 10, 9).is_err());
        assert!(split(&set, 0, 9).is_err());
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("set.csv");
        let set = sample_joint_dataset(&chain(), 20, 13);
        write_csv(&set, &path).unwrap();
        let loaded = read_csv(&path).unwrap();
        assert_eq!(set, loaded);

        // rerun writes the identical byte stream
        let bytes1 = std::fs::read(&path).unwrap();
        write_csv(&sample_joint_dataset(&chain(), 20, 13), &path).unwrap();
        assert_eq!(bytes1, std::fs::read(&path).unwrap());
    }
}
