//! OPTICS ordering and ξ-steep cluster extraction.
//!
//! The extraction follows the reachability-plot formulation with two known
//! corrections to the original description: a steep downward point satisfies
//! r(p)·(1 − ξ) ≥ r(p + 1), and the end-of-cluster adjustment moves left while
//! r(x) > r(start). A sentinel ∞ is appended to the plot so clusters running
//! to the end of the ordering are closed. Points are then assigned to the
//! first non-overlapping cluster in discovery order (smallest first within
//! each steep-up area); everything else is noise.

use crate::gaze::GazePoint2D;
use crate::{Error, Real, Result};

/// Output of an OPTICS run on 2D points.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterAssignment<T: Real> {
    /// Cluster id per input point, `None` for noise.
    pub labels: Vec<Option<usize>>,
    /// Mean of each cluster's members, indexed by cluster id.
    pub centroids: Vec<GazePoint2D<T>>,
    pub sizes: Vec<usize>,
    /// Visiting order of the input points.
    pub ordering: Vec<usize>,
    /// Reachability of each input point (∞ where undefined).
    pub reachability: Vec<T>,
    pub core_distance: Vec<T>,
    pub predecessor: Vec<Option<usize>>,
}

impl<T: Real> ClusterAssignment<T> {
    pub fn num_clusters(&self) -> usize {
        self.centroids.len()
    }

    pub fn noise_count(&self) -> usize {
        self.labels.iter().filter(|l| l.is_none()).count()
    }

    /// Reachability values in visiting order.
    pub fn reachability_plot(&self) -> Vec<T> {
        self.ordering.iter().map(|&i| self.reachability[i]).collect()
    }
}

pub fn optics_cluster<T: Real>(
    points: &[GazePoint2D<T>],
    min_pts: usize,
    max_eps: T,
    xi: T,
    min_cluster_size: usize,
) -> Result<ClusterAssignment<T>> {
    let n = points.len();
    if min_pts < 2 {
        return Err(Error::InvalidInput("min_pts must be at least 2".into()));
    }
    if n < min_pts {
        return Err(Error::InsufficientPoints { needed: min_pts, got: n });
    }
    if !(xi > T::zero() && xi < T::one()) {
        return Err(Error::InvalidInput(format!("xi must be in (0, 1), got {xi}")));
    }
    if !(max_eps > T::zero()) {
        return Err(Error::InvalidInput("max_eps must be positive".into()));
    }
    if points.iter().any(|p| !(p.x.finite() && p.y.finite())) {
        return Err(Error::NonFinite("gaze point".into()));
    }
    let (ordering, reachability, core_distance, predecessor) = optics_order(points, min_pts, max_eps);

    let plot: Vec<T> = ordering.iter().map(|&i| reachability[i]).collect();
    let pred_plot: Vec<Option<usize>> = ordering.iter().map(|&i| predecessor[i]).collect();
    let clusters = xi_clusters(&plot, &pred_plot, &ordering, xi, min_pts, min_cluster_size.max(2));

    // Leaf-first labelling in visiting order, then mapped back to input indices.
    let mut ordered_labels: Vec<Option<usize>> = vec![None; n];
    let mut next = 0;
    for &(s, e) in &clusters {
        if ordered_labels[s..=e].iter().all(|l| l.is_none()) {
            for l in &mut ordered_labels[s..=e] {
                *l = Some(next);
            }
            next += 1;
        }
    }
    let mut labels = vec![None; n];
    for (pos, &idx) in ordering.iter().enumerate() {
        labels[idx] = ordered_labels[pos];
    }

    let mut sums = vec![(T::zero(), T::zero()); next];
    let mut sizes = vec![0usize; next];
    for (p, l) in points.iter().zip(&labels) {
        if let Some(c) = *l {
            sums[c].0 += p.x;
            sums[c].1 += p.y;
            sizes[c] += 1;
        }
    }
    let centroids = sums
        .iter()
        .zip(&sizes)
        .map(|(s, &k)| {
            let kf = T::from_count(k);
            GazePoint2D::new(s.0 / kf, s.1 / kf)
        })
        .collect();
    Ok(ClusterAssignment {
        labels,
        centroids,
        sizes,
        ordering,
        reachability,
        core_distance,
        predecessor,
    })
}

type Order<T> = (Vec<usize>, Vec<T>, Vec<T>, Vec<Option<usize>>);

/// Brute-force OPTICS ordering. Core distance is the distance to the
/// `min_pts`-th nearest point counting the point itself. The next point is
/// the unprocessed one with the smallest reachability, ties by index.
fn optics_order<T: Real>(points: &[GazePoint2D<T>], min_pts: usize, max_eps: T) -> Order<T> {
    let n = points.len();
    let inf = T::lit(f64::INFINITY);
    let mut core = vec![inf; n];
    let mut buf: Vec<T> = Vec::with_capacity(n);
    for i in 0..n {
        buf.clear();
        buf.extend(points.iter().map(|q| points[i].dist(q)));
        let (_, kth, _) = buf.select_nth_unstable_by(min_pts - 1, |a, b| a.partial_cmp(b).unwrap());
        if *kth <= max_eps {
            core[i] = *kth;
        }
    }

    let mut reach = vec![inf; n];
    let mut pred = vec![None; n];
    let mut processed = vec![false; n];
    let mut ordering = Vec::with_capacity(n);
    for _ in 0..n {
        let mut best = None;
        for i in 0..n {
            if processed[i] {
                continue;
            }
            match best {
                None => best = Some(i),
                Some(b) if reach[i] < reach[b] => best = Some(i),
                _ => {}
            }
        }
        let p = best.expect("an unprocessed point remains");
        processed[p] = true;
        ordering.push(p);
        if core[p] == inf {
            continue;
        }
        for q in 0..n {
            if processed[q] {
                continue;
            }
            let d = points[p].dist(&points[q]);
            if d > max_eps {
                continue;
            }
            let r = core[p].max(d);
            if r < reach[q] {
                reach[q] = r;
                pred[q] = Some(p);
            }
        }
    }
    (ordering, reach, core, pred)
}

#[derive(Debug, Clone, Copy)]
struct SteepDown<T> {
    start: usize,
    end: usize,
    mib: T,
}

/// ξ-steep cluster extraction on a reachability plot. Returns inclusive
/// (start, end) ranges in plot positions.
fn xi_clusters<T: Real>(
    reach_plot: &[T],
    pred_plot: &[Option<usize>],
    ordering: &[usize],
    xi: T,
    min_pts: usize,
    min_cluster_size: usize,
) -> Vec<(usize, usize)> {
    let n = reach_plot.len();
    let inf = T::lit(f64::INFINITY);
    let mut r = reach_plot.to_vec();
    r.push(inf);
    let xic = T::one() - xi;

    // NaN ratios (0/0, ∞/∞) compare false everywhere, as intended.
    let ratio: Vec<T> = (0..n).map(|i| r[i] / r[i + 1]).collect();
    let steep_up: Vec<bool> = ratio.iter().map(|&q| q <= xic).collect();
    let steep_down: Vec<bool> = ratio.iter().map(|&q| q >= T::one() / xic).collect();
    let down: Vec<bool> = ratio.iter().map(|&q| q > T::one()).collect();
    let up: Vec<bool> = ratio.iter().map(|&q| q < T::one()).collect();

    let mut sdas: Vec<SteepDown<T>> = Vec::new();
    let mut clusters = Vec::new();
    let mut index = 0usize;
    let mut mib = T::zero();

    for steep_index in 0..n {
        if !(steep_up[steep_index] || steep_down[steep_index]) || steep_index < index {
            continue;
        }
        mib = r[index..=steep_index].iter().fold(mib, |m, &v| m.max(v));

        if steep_down[steep_index] {
            update_filter_sdas(&mut sdas, mib, xic, &r);
            let d_end = extend_region(&steep_down, &up, steep_index, min_pts);
            sdas.push(SteepDown {
                start: steep_index,
                end: d_end,
                mib: T::zero(),
            });
            index = d_end + 1;
            mib = r[index];
        } else {
            update_filter_sdas(&mut sdas, mib, xic, &r);
            let u_start = steep_index;
            let u_end = extend_region(&steep_up, &down, u_start, min_pts);
            index = u_end + 1;
            mib = r[index];

            let mut u_clusters = Vec::new();
            for d in &sdas {
                let mut c_start = d.start;
                let mut c_end = u_end;
                if r[c_end + 1] * xic < d.mib {
                    continue;
                }
                let d_max = r[d.start];
                if d_max * xic >= r[c_end + 1] {
                    while r[c_start + 1] > r[c_end + 1] && c_start < d.end {
                        c_start += 1;
                    }
                } else if r[c_end + 1] * xic >= d_max {
                    while c_end > u_start && r[c_end - 1] > d_max {
                        c_end -= 1;
                    }
                }
                let Some((s, e)) = correct_predecessor(&r, pred_plot, ordering, c_start, c_end) else {
                    continue;
                };
                (c_start, c_end) = (s, e);
                if c_end - c_start + 1 < min_cluster_size {
                    continue;
                }
                if c_start > d.end || c_end < u_start {
                    continue;
                }
                u_clusters.push((c_start, c_end));
            }
            u_clusters.reverse();
            clusters.extend(u_clusters);
        }
    }
    clusters
}

fn update_filter_sdas<T: Real>(sdas: &mut Vec<SteepDown<T>>, mib: T, xic: T, r: &[T]) {
    if mib == T::lit(f64::INFINITY) {
        sdas.clear();
        return;
    }
    sdas.retain(|d| mib <= r[d.start] * xic);
    for d in sdas.iter_mut() {
        d.mib = d.mib.max(mib);
    }
}

/// Grows a steep region from `start`; it may contain at most `min_pts`
/// consecutive non-steep points and ends at the first point going the other way.
fn extend_region(steep: &[bool], xward: &[bool], start: usize, min_pts: usize) -> usize {
    let mut non_xward = 0;
    let mut end = start;
    for index in start..steep.len() {
        if steep[index] {
            non_xward = 0;
            end = index;
        } else if !xward[index] {
            non_xward += 1;
            if non_xward > min_pts {
                break;
            }
        } else {
            return end;
        }
    }
    end
}

/// Trims the cluster end until its predecessor lies inside the cluster.
fn correct_predecessor<T: Real>(
    r: &[T],
    pred_plot: &[Option<usize>],
    ordering: &[usize],
    s: usize,
    mut e: usize,
) -> Option<(usize, usize)> {
    while s < e {
        if r[s] > r[e] {
            return Some((s, e));
        }
        if let Some(p) = pred_plot[e] {
            if ordering[s..e].contains(&p) {
                return Some((s, e));
            }
        }
        e -= 1;
    }
    None
}
