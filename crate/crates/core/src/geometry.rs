//! Wiener-spiral reference geometry, distortion bounds, Hausdorff distance,
//! epsilon-nets and the Gram alignment estimator.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{distance, gram_from_cloud, psd_sqrt, squared_distance, GramMatrix, PointCloud, VectorD};
use crate::walk::WalkPath;

pub const DEFAULT_TRUNCATION: usize = 10_000;

fn check_unit(t: f64) -> Result<()> {
    if (0.0..=1.0).contains(&t) {
        Ok(())
    } else {
        Err(Error::Domain(format!("time {t} outside [0, 1]")))
    }
}

/// `sqrt(|t - s|)` on `[0, 1]`.
pub fn spiral_metric(s: f64, t: f64) -> Result<f64> {
    check_unit(s)?;
    check_unit(t)?;
    Ok((t - s).abs().sqrt())
}

/// Truncated sine-series realization of the spiral in `R^K`.
pub fn spiral_embedding(t: f64, terms: usize) -> Result<VectorD> {
    check_unit(t)?;
    if terms == 0 {
        return Err(Error::param("truncation must have at least one term"));
    }
    let c = 2.0 * 2f64.sqrt() / PI;
    let v = (1..=terms)
        .map(|k| {
            let kf = k as f64;
            c * (PI * (kf - 0.5) * t).sin() / (2.0 * kf - 1.0)
        })
        .collect();
    VectorD::new(v)
}

/// Reference spiral restricted to a time grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpiralRef {
    pub truncation_terms: usize,
    pub grid: Vec<f64>,
}

impl SpiralRef {
    pub fn new(truncation_terms: usize, grid: Vec<f64>) -> Result<Self> {
        if truncation_terms == 0 {
            return Err(Error::param("truncation must have at least one term"));
        }
        if grid.is_empty() {
            return Err(Error::InsufficientData { needed: 1, got: 0 });
        }
        for &t in &grid {
            check_unit(t)?;
        }
        if grid.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::Contract("spiral grid must be sorted".into()));
        }
        Ok(Self { truncation_terms, grid })
    }

    /// Grid `k_j / n` of a walk path.
    pub fn for_path(path: &WalkPath, truncation_terms: usize) -> Result<Self> {
        let n = path.n.max(1) as f64;
        Self::new(truncation_terms, path.grid.iter().map(|&k| k as f64 / n).collect())
    }

    pub fn cloud(&self) -> Result<PointCloud> {
        let rows = self
            .grid
            .iter()
            .map(|&t| spiral_embedding(t, self.truncation_terms).map(VectorD::into_inner))
            .collect::<Result<Vec<_>>>()?;
        PointCloud::new(rows, "spiral")
    }

    /// `max |(|w_t - w_s|^2) - |t - s||` over grid pairs.
    pub fn truncation_error(&self) -> Result<f64> {
        let cloud = self.cloud()?;
        let mut worst = 0.0f64;
        for i in 0..cloud.len() {
            for j in i + 1..cloud.len() {
                let err = squared_distance(cloud.point(i), cloud.point(j)) - (self.grid[j] - self.grid[i]).abs();
                worst = worst.max(err.abs());
            }
        }
        Ok(worst)
    }
}

/// `max_{i<j} | |p_j - p_i| - sqrt(|t_j - t_i|) |`.
pub fn cloud_distortion(cloud: &PointCloud, times: &[f64]) -> Result<f64> {
    if times.len() != cloud.len() {
        return Err(Error::DimensionMismatch {
            expected: cloud.len(),
            found: times.len(),
        });
    }
    if cloud.len() < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            got: cloud.len(),
        });
    }
    let mut worst = 0.0f64;
    for i in 0..cloud.len() {
        let pi = cloud.point(i);
        for j in i + 1..cloud.len() {
            let d = distance(pi, cloud.point(j));
            worst = worst.max((d - (times[j] - times[i]).abs().sqrt()).abs());
        }
    }
    Ok(worst)
}

/// Distortion of the time correspondence between path snapshots and the spiral.
/// The Gromov-Hausdorff distance on the grid is at most twice this value.
pub fn path_distortion(path: &WalkPath) -> Result<f64> {
    let n = path.n.max(1) as f64;
    let times: Vec<f64> = path.grid.iter().map(|&k| k as f64 / n).collect();
    cloud_distortion(&path.snapshots, &times)
}

fn check_pair(a: &PointCloud, b: &PointCloud) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            found: b.dim(),
        });
    }
    if a.is_empty() || b.is_empty() {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    Ok(())
}

/// `max_{a in A} min_{b in B} |a - b|`.
pub fn directed_hausdorff(a: &PointCloud, b: &PointCloud) -> Result<f64> {
    check_pair(a, b)?;
    let mut worst = 0.0f64;
    for pa in a.points() {
        let mut best = f64::INFINITY;
        for pb in b.points() {
            let d2 = squared_distance(pa, pb);
            if d2 < best {
                best = d2;
                if best <= worst {
                    // Cannot raise the running maximum.
                    break;
                }
            }
        }
        worst = worst.max(best);
    }
    Ok(worst.sqrt())
}

pub fn hausdorff_distance(a: &PointCloud, b: &PointCloud) -> Result<f64> {
    Ok(directed_hausdorff(a, b)?.max(directed_hausdorff(b, a)?))
}

/// Greedy farthest-point net. Starts at index 0; ties go to the lowest index.
pub fn eps_net(a: &PointCloud, eps: f64) -> Result<Vec<usize>> {
    Ok(eps_net_with_radius(a, eps)?.0)
}

/// The net together with its actual covering radius.
pub fn eps_net_with_radius(a: &PointCloud, eps: f64) -> Result<(Vec<usize>, f64)> {
    if !(eps > 0.0) {
        return Err(Error::param(format!("eps must be positive, got {eps}")));
    }
    if a.is_empty() {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    let mut net = vec![0];
    let mut gap: Vec<f64> = a.points().map(|p| distance(p, a.point(0))).collect();
    loop {
        let (far, radius) = gap
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (i, &g)| if g > acc.1 { (i, g) } else { acc });
        if radius <= eps {
            return Ok((net, radius.max(0.0)));
        }
        net.push(far);
        let pf = a.point(far);
        for (g, p) in gap.iter_mut().zip(a.points()) {
            *g = g.min(distance(p, pf));
        }
    }
}

/// How net points of `A` are paired with points of `B`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Correspondence {
    /// Same index, or the same relative position when sizes differ.
    ByIndex,
    /// Nearest point of `B` in the common ambient space.
    Nearest,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentResult {
    pub hausdorff_upper: f64,
    pub anchor_indices: Vec<usize>,
    pub eps_used: f64,
}

/// A net anchored at its first point, with the square root of its Gram matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedNet {
    /// Columns of `G^{1/2}`; the anchor is the origin.
    sqrt_gram: Option<GramMatrix>,
    /// Translate of the net to the anchor, kept for the degenerate case.
    anchored: PointCloud,
    cover: f64,
}

impl PreparedNet {
    pub fn new(net: &PointCloud, cover: f64) -> Result<Self> {
        if net.is_empty() {
            return Err(Error::InsufficientData { needed: 1, got: 0 });
        }
        let base = net.point(0).to_vec();
        let anchored = net.translate(&base.iter().map(|v| -v).collect::<Vec<_>>())?;
        let sqrt_gram = if net.len() > 1 {
            let g = gram_from_cloud(net, 0)?;
            if g.frobenius() > 0.0 {
                Some(psd_sqrt(&g)?)
            } else {
                None
            }
        } else {
            None
        };
        Ok(Self {
            sqrt_gram,
            anchored,
            cover,
        })
    }

    pub fn len(&self) -> usize {
        self.anchored.len()
    }

    pub fn is_empty(&self) -> bool {
        self.anchored.is_empty()
    }

    pub fn cover(&self) -> f64 {
        self.cover
    }

    /// Aligned copy in `R^m`, `m = len - 1`, anchor first.
    fn aligned(&self) -> Result<PointCloud> {
        let m = self.len() - 1;
        let mut flat = vec![0.0; m.max(1)];
        match &self.sqrt_gram {
            Some(r) => (0..m).for_each(|j| flat.extend(r.column(j))),
            None => flat.extend(std::iter::repeat(0.0).take(m * m.max(1))),
        }
        PointCloud::from_flat(m.max(1), flat, "aligned")
    }
}

/// Hausdorff distance between two prepared nets under their Gram alignment,
/// plus both covering radii. Symmetric in its arguments.
pub fn align_with_nets(a: &PreparedNet, b: &PreparedNet) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            found: b.len(),
        });
    }
    let core = if a.sqrt_gram.is_none() && b.sqrt_gram.is_none() && a.anchored.dim() == b.anchored.dim() {
        // Every point coincides with its anchor on both sides.
        hausdorff_distance(&a.anchored, &b.anchored)?
    } else {
        hausdorff_distance(&a.aligned()?, &b.aligned()?)?
    };
    Ok(core + a.cover + b.cover)
}

fn nearest_index(b: &PointCloud, p: &[f64]) -> usize {
    let mut best = (0, f64::INFINITY);
    for (j, q) in b.points().enumerate() {
        let d2 = squared_distance(p, q);
        if d2 < best.1 {
            best = (j, d2);
        }
    }
    best.0
}

fn matched_indices(a: &PointCloud, b: &PointCloud, net: &[usize], corr: Correspondence) -> Result<Vec<usize>> {
    match corr {
        Correspondence::ByIndex => {
            if a.len() == b.len() {
                return Ok(net.to_vec());
            }
            let (la, lb) = (a.len().max(2) - 1, b.len() - 1);
            Ok(net
                .iter()
                .map(|&i| ((i as f64 * lb as f64 / la as f64).round() as usize).min(lb))
                .collect())
        }
        Correspondence::Nearest => {
            check_pair(a, b)?;
            Ok(net.iter().map(|&i| nearest_index(b, a.point(i))).collect())
        }
    }
}

/// Upper estimate of the Hausdorff distance up to isometry between `A` and `B`.
pub fn align_and_hausdorff(a: &PointCloud, b: &PointCloud, eps: f64, corr: Correspondence) -> Result<AlignmentResult> {
    if b.is_empty() {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    let (net, cover_a) = eps_net_with_radius(a, eps)?;
    let matched = matched_indices(a, b, &net, corr)?;
    let net_a = a.subset(&net)?;
    let net_b = b.subset(&matched)?;
    let cover_b = directed_hausdorff(b, &net_b)?;
    let hausdorff_upper = align_with_nets(&PreparedNet::new(&net_a, cover_a)?, &PreparedNet::new(&net_b, cover_b)?)?;
    Ok(AlignmentResult {
        hausdorff_upper,
        anchor_indices: net,
        eps_used: eps,
    })
}

/// Alignment of path snapshots to the spiral on the same time grid.
/// Pass a cached spiral net to avoid rebuilding it for every replicate.
pub fn align_path_to_spiral(path: &WalkPath, spiral: &PreparedNet) -> Result<f64> {
    let walk = PreparedNet::new(&path.snapshots, 0.0)?;
    align_with_nets(&walk, spiral)
}

/// Largest truncation error on the grid for each `K`.
pub fn truncation_sweep(grid: &[f64], terms: &[usize]) -> Result<Vec<(usize, f64)>> {
    terms
        .iter()
        .map(|&k| Ok((k, SpiralRef::new(k, grid.to_vec())?.truncation_error()?)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cloud(rows: &[&[f64]]) -> PointCloud {
        PointCloud::new(rows.iter().map(|r| r.to_vec()).collect(), "t").unwrap()
    }

    #[test]
    fn spiral_metric_values() {
        assert_eq!(spiral_metric(0.3, 0.3).unwrap(), 0.0);
        assert_eq!(spiral_metric(0.0, 1.0).unwrap(), 1.0);
        assert_eq!(spiral_metric(0.25, 0.5).unwrap(), 0.5);
        assert!(spiral_metric(-0.1, 0.5).is_err());
        assert!(spiral_metric(0.1, 1.5).is_err());
    }

    #[test]
    fn spiral_embedding_endpoints() {
        let w0 = spiral_embedding(0.0, 100).unwrap();
        assert!(w0.as_slice().iter().all(|&v| v == 0.0));
        let w1 = spiral_embedding(1.0, 10_000).unwrap();
        assert!((w1.norm().powi(2) - 1.0).abs() < 1e-3);
        assert!(spiral_embedding(0.5, 0).is_err());
    }

    #[test]
    fn spiral_ref_rejects_bad_grid() {
        assert!(SpiralRef::new(10, vec![0.5, 0.1]).is_err());
        assert!(SpiralRef::new(10, vec![0.5, 1.1]).is_err());
        assert!(SpiralRef::new(0, vec![0.5]).is_err());
    }

    #[test]
    fn hausdorff_basics() {
        let a = cloud(&[&[0.0, 0.0]]);
        let b = cloud(&[&[0.0, 0.0], &[3.0, 4.0]]);
        assert_eq!(hausdorff_distance(&a, &a).unwrap(), 0.0);
        assert_eq!(hausdorff_distance(&a, &b).unwrap(), 5.0);
        assert_eq!(directed_hausdorff(&a, &b).unwrap(), 0.0);
        let c = cloud(&[&[0.0, 0.0, 0.0]]);
        assert!(hausdorff_distance(&a, &c).is_err());
    }

    #[test]
    fn eps_net_cases() {
        let line = cloud(&[&[0.0], &[1.0], &[2.0], &[3.0]]);
        assert_eq!(eps_net(&line, 10.0).unwrap(), vec![0]);
        let mut all = eps_net(&line, 1e-12).unwrap();
        all.sort_unstable();
        assert_eq!(all, vec![0, 1, 2, 3]);
        let (net, r) = eps_net_with_radius(&line, 1.5).unwrap();
        assert_eq!(net, vec![0, 3]);
        assert_eq!(r, 1.0);
        assert!(eps_net(&line, 0.0).is_err());
    }

    #[test]
    fn eps_net_ties_go_to_lowest_index() {
        let c = cloud(&[&[0.0], &[-1.0], &[1.0]]);
        assert_eq!(eps_net(&c, 0.1).unwrap(), vec![0, 1, 2]);
    }

    #[test]
    fn two_point_alignment_is_norm_difference() {
        let a = cloud(&[&[0.0, 0.0, 0.0], &[1.0, 2.0, 2.0]]);
        let b = cloud(&[&[1.0, 1.0, 1.0], &[1.0, 1.0, 6.0]]);
        let r = align_and_hausdorff(&a, &b, 1e-12, Correspondence::ByIndex).unwrap();
        assert!((r.hausdorff_upper - 2.0).abs() < 1e-9);
    }

    #[test]
    fn alignment_of_identical_clouds_is_zero() {
        let a = cloud(&[&[0.0, 1.0], &[2.0, -1.0], &[0.5, 0.5], &[3.0, 3.0]]);
        let r = align_and_hausdorff(&a, &a, 1e-9, Correspondence::Nearest).unwrap();
        assert!(r.hausdorff_upper < 1e-9);
    }

    #[test]
    fn degenerate_clouds_fall_back_to_translates() {
        let a = cloud(&[&[1.0, 1.0], &[1.0, 1.0]]);
        let b = cloud(&[&[5.0, 0.0], &[5.0, 0.0]]);
        let r = align_and_hausdorff(&a, &b, 0.5, Correspondence::ByIndex).unwrap();
        assert_eq!(r.hausdorff_upper, 0.0);
        assert_eq!(r.anchor_indices, vec![0]);
    }

    #[test]
    fn net_sizes_must_match() {
        let a = PreparedNet::new(&cloud(&[&[0.0], &[1.0]]), 0.0).unwrap();
        let b = PreparedNet::new(&cloud(&[&[0.0]]), 0.0).unwrap();
        assert!(align_with_nets(&a, &b).is_err());
    }

    #[test]
    fn relative_time_matching() {
        let a = cloud(&[&[0.0], &[1.0], &[2.0]]);
        let b = cloud(&[&[0.0], &[0.5], &[1.0], &[1.5], &[2.0]]);
        assert_eq!(matched_indices(&a, &b, &[0, 1, 2], Correspondence::ByIndex).unwrap(), vec![0, 2, 4]);
    }
}
