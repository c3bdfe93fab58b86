//! Dense descriptor correspondence ranked by cyclical distance, and selection
//! of the reference view whose best matches are most cycle-consistent.
//!
//! For a query cell `x`, the forward nearest neighbour `α` is searched in the
//! reference map and mapped back to its nearest neighbour `β` in the query
//! map. The cyclical distance `‖x − β‖` (in grid cells) is zero for mutually
//! nearest pairs and grows as the round trip drifts.

mod feature_map;

use nalgebra::Vector2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use feature_map::{Cell, FeatureMap};

/// Number of matches kept per reference when none is configured.
pub const DEFAULT_TOP_K: usize = 50;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MatchError {
    #[error("invalid feature map: {0}")]
    InvalidFeatureMap(String),
    #[error("channel mismatch: {expected} vs {found}")]
    ChannelMismatch { expected: usize, found: usize },
    #[error("feature map has no foreground cells")]
    FullyMasked,
    #[error("cell ({row}, {col}) is masked or out of bounds")]
    InvalidCell { row: usize, col: usize },
    #[error("k must be at least 1")]
    InvalidK,
    #[error("no reference views given")]
    NoReferences,
}

/// Similarity used by the nearest-neighbour selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    /// Maximize cosine similarity. Zero descriptors score 0 against everything.
    #[default]
    Cosine,
    /// Minimize Euclidean distance.
    L2,
}

/// One ranked correspondence between a query cell and a reference cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Match {
    pub query_px: Vector2<f64>,
    pub ref_px: Vector2<f64>,
    pub query_cell: Cell,
    pub ref_cell: Cell,
    pub cyc_dist: f64,
}

/// Matches sorted by ascending cyclical distance, ties in row-major query order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchSet {
    pub matches: Vec<Match>,
}

impl MatchSet {
    pub fn k(&self) -> usize {
        self.matches.len()
    }

    pub fn cumulative_distance(&self) -> f64 {
        self.matches.iter().map(|m| m.cyc_dist).sum()
    }
}

/// Outcome of one query→reference→query round trip.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cycle {
    pub alpha: Cell,
    pub beta: Cell,
    pub distance: f64,
}

/// Descriptors converted once to the form the metric compares.
struct Prepared {
    channels: usize,
    values: Vec<f64>,
    foreground: Vec<usize>,
}

impl Prepared {
    fn new(f: &FeatureMap, metric: Metric) -> Self {
        let channels = f.channels();
        let mut values: Vec<f64> = f.data().iter().map(|&x| f64::from(x)).collect();
        if metric == Metric::Cosine {
            values.chunks_exact_mut(channels).for_each(normalize);
        }
        Self { channels, values, foreground: f.foreground_indices() }
    }

    #[inline]
    fn row(&self, index: usize) -> &[f64] {
        &self.values[index * self.channels..(index + 1) * self.channels]
    }

    /// First foreground index with the highest score against `v`.
    fn best(&self, v: &[f64], metric: Metric) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for &i in &self.foreground {
            let s = score(v, self.row(i), metric);
            if best.map_or(true, |(_, b)| s > b) {
                best = Some((i, s));
            }
        }
        best.map(|(i, _)| i)
    }
}

fn normalize(v: &mut [f64]) {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
}

/// Larger is more similar.
#[inline]
fn score(a: &[f64], b: &[f64], metric: Metric) -> f64 {
    match metric {
        Metric::Cosine => a.iter().zip(b).map(|(x, y)| x * y).sum(),
        Metric::L2 => -a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>(),
    }
}

fn check_channels(a: &FeatureMap, b: &FeatureMap) -> Result<(), MatchError> {
    if a.channels() != b.channels() {
        return Err(MatchError::ChannelMismatch { expected: a.channels(), found: b.channels() });
    }
    Ok(())
}

/// Foreground cell of `f` whose descriptor is closest to `v`; ties go to the
/// first cell in row-major order.
pub fn nn_coordinate(f: &FeatureMap, v: &[f32], metric: Metric) -> Result<Cell, MatchError> {
    if v.len() != f.channels() {
        return Err(MatchError::ChannelMismatch { expected: f.channels(), found: v.len() });
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(MatchError::InvalidFeatureMap("query descriptor is not finite".into()));
    }
    let prepared = Prepared::new(f, metric);
    let mut query: Vec<f64> = v.iter().map(|&x| f64::from(x)).collect();
    if metric == Metric::Cosine {
        normalize(&mut query);
    }
    prepared.best(&query, metric).map(|i| f.cell_at(i)).ok_or(MatchError::FullyMasked)
}

/// Round trip `x_q → α ∈ F_r → β ∈ F_q` and the distance `‖x_q − β‖` in cells.
pub fn cyclical_distance(
    x_q: Cell,
    f_q: &FeatureMap,
    f_r: &FeatureMap,
    metric: Metric,
) -> Result<Cycle, MatchError> {
    check_channels(f_q, f_r)?;
    if !f_q.contains(x_q) || !f_q.is_foreground(x_q) {
        return Err(MatchError::InvalidCell { row: x_q.row, col: x_q.col });
    }
    let alpha = nn_coordinate(f_r, f_q.descriptor(x_q), metric)?;
    let beta = nn_coordinate(f_q, f_r.descriptor(alpha), metric)?;
    Ok(Cycle { alpha, beta, distance: x_q.distance(&beta) })
}

/// Cycle results for every foreground query cell, in row-major order.
fn all_cycles(f_q: &FeatureMap, f_r: &FeatureMap, metric: Metric) -> Result<Vec<(Cell, Cycle)>, MatchError> {
    check_channels(f_q, f_r)?;
    let q = Prepared::new(f_q, metric);
    let r = Prepared::new(f_r, metric);
    if q.foreground.is_empty() || r.foreground.is_empty() {
        return Err(MatchError::FullyMasked);
    }

    // Forward pass: best reference cell for each query cell.
    let alpha: Vec<usize> = q
        .foreground
        .par_iter()
        .map(|&i| r.best(q.row(i), metric).expect("non-empty foreground"))
        .collect();

    // Backward pass only for reference cells that were actually reached.
    let mut reached = vec![false; f_r.num_cells()];
    alpha.iter().for_each(|&a| reached[a] = true);
    let targets: Vec<usize> = (0..f_r.num_cells()).filter(|&j| reached[j]).collect();
    let back: Vec<usize> = targets
        .par_iter()
        .map(|&j| q.best(r.row(j), metric).expect("non-empty foreground"))
        .collect();
    let mut beta_of = vec![usize::MAX; f_r.num_cells()];
    for (&j, &b) in targets.iter().zip(&back) {
        beta_of[j] = b;
    }

    Ok(q.foreground
        .iter()
        .zip(&alpha)
        .map(|(&i, &a)| {
            let x_q = f_q.cell_at(i);
            let beta = f_q.cell_at(beta_of[a]);
            (x_q, Cycle { alpha: f_r.cell_at(a), beta, distance: x_q.distance(&beta) })
        })
        .collect())
}

/// Ranks every foreground query cell by cyclical distance and keeps the best `k`.
pub fn top_k_matches(f_q: &FeatureMap, f_r: &FeatureMap, k: usize, metric: Metric) -> Result<MatchSet, MatchError> {
    if k == 0 {
        return Err(MatchError::InvalidK);
    }
    let mut cycles = all_cycles(f_q, f_r, metric)?;
    // Stable: equal distances keep row-major order.
    cycles.sort_by(|a, b| a.1.distance.total_cmp(&b.1.distance));
    cycles.truncate(k);
    let matches = cycles
        .into_iter()
        .map(|(x_q, c)| Match {
            query_px: f_q.cell_to_pixel(x_q),
            ref_px: f_r.cell_to_pixel(c.alpha),
            query_cell: x_q,
            ref_cell: c.alpha,
            cyc_dist: c.distance,
        })
        .collect();
    Ok(MatchSet { matches })
}

/// Reference view with the lowest cumulative top-`k` cyclical distance.
/// Ties go to the lowest index. References are scored in parallel; the
/// reduction runs over indices so the outcome does not depend on scheduling.
pub fn best_view(
    f_q: &FeatureMap,
    refs: &[FeatureMap],
    k: usize,
    metric: Metric,
) -> Result<(usize, MatchSet), MatchError> {
    if refs.is_empty() {
        return Err(MatchError::NoReferences);
    }
    let sets = refs
        .par_iter()
        .map(|r| top_k_matches(f_q, r, k, metric))
        .collect::<Result<Vec<_>, _>>()?;
    let mut best = 0;
    let mut best_score = f64::INFINITY;
    for (i, s) in sets.iter().enumerate() {
        let total = s.cumulative_distance();
        if total < best_score {
            best = i;
            best_score = total;
        }
    }
    let set = sets.into_iter().nth(best).expect("index in range");
    Ok((best, set))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_hot_map(h: usize, w: usize) -> FeatureMap {
        let c = h * w;
        let mut data = vec![0.0f32; h * w * c];
        for i in 0..h * w {
            data[i * c + i] = 1.0;
        }
        FeatureMap::new(h, w, c, data, 4.0, 2.0, None).unwrap()
    }

    #[test]
    fn exact_descriptor_is_found() {
        let f = one_hot_map(3, 4);
        let v = f.descriptor(Cell::new(2, 1)).to_vec();
        assert_eq!(nn_coordinate(&f, &v, Metric::Cosine).unwrap(), Cell::new(2, 1));
        assert_eq!(nn_coordinate(&f, &v, Metric::L2).unwrap(), Cell::new(2, 1));
    }

    #[test]
    fn ties_break_row_major() {
        let f = FeatureMap::new(3, 3, 2, vec![0.5; 18], 1.0, 0.0, None).unwrap();
        assert_eq!(nn_coordinate(&f, &[0.5, 0.5], Metric::Cosine).unwrap(), Cell::new(0, 0));
        assert_eq!(nn_coordinate(&f, &[1.0, -3.0], Metric::L2).unwrap(), Cell::new(0, 0));
    }

    #[test]
    fn masked_cells_are_skipped() {
        let f = one_hot_map(2, 2);
        let masked = FeatureMap::new(2, 2, 4, f.data().to_vec(), 4.0, 2.0, Some(vec![false, true, true, true])).unwrap();
        let v = f.descriptor(Cell::new(0, 0)).to_vec();
        // Every remaining cell is orthogonal, so the first foreground cell wins.
        assert_eq!(nn_coordinate(&masked, &v, Metric::Cosine).unwrap(), Cell::new(0, 1));
        let none = FeatureMap::new(2, 2, 4, f.data().to_vec(), 4.0, 2.0, Some(vec![false; 4])).unwrap();
        assert_eq!(nn_coordinate(&none, &v, Metric::Cosine), Err(MatchError::FullyMasked));
        assert_eq!(top_k_matches(&none, &f, 3, Metric::Cosine), Err(MatchError::FullyMasked));
        assert!(matches!(
            cyclical_distance(Cell::new(0, 0), &masked, &f, Metric::Cosine),
            Err(MatchError::InvalidCell { .. })
        ));
    }

    #[test]
    fn channel_mismatch_is_error() {
        let f = one_hot_map(2, 2);
        assert!(matches!(nn_coordinate(&f, &[1.0], Metric::Cosine), Err(MatchError::ChannelMismatch { .. })));
        let g = one_hot_map(1, 2);
        assert!(top_k_matches(&f, &g, 1, Metric::Cosine).is_err());
    }

    #[test]
    fn identical_maps_cycle_to_start() {
        let f = one_hot_map(3, 3);
        for i in 0..9 {
            let c = cyclical_distance(f.cell_at(i), &f, &f, Metric::Cosine).unwrap();
            assert_eq!(c.distance, 0.0);
            assert_eq!(c.alpha, f.cell_at(i));
        }
        let set = top_k_matches(&f, &f, 5, Metric::Cosine).unwrap();
        assert_eq!(set.k(), 5);
        for m in &set.matches {
            assert_eq!(m.cyc_dist, 0.0);
            assert_eq!(m.query_cell, m.ref_cell);
            assert_eq!(m.query_px, f.cell_to_pixel(m.query_cell));
        }
    }

    #[test]
    fn cycle_landing_one_cell_away() {
        // Query cells (0,0) and (0,1) share a descriptor; the reference holds
        // only that descriptor, so the way back lands on (0,0) by tie-break.
        let q = FeatureMap::new(1, 3, 2, vec![1.0, 0.0, 1.0, 0.0, 0.0, 1.0], 1.0, 0.0, None).unwrap();
        let r = FeatureMap::new(1, 2, 2, vec![1.0, 0.0, 0.0, 1.0], 1.0, 0.0, None).unwrap();
        let c = cyclical_distance(Cell::new(0, 1), &q, &r, Metric::Cosine).unwrap();
        assert_eq!(c.alpha, Cell::new(0, 0));
        assert_eq!(c.beta, Cell::new(0, 0));
        assert_eq!(c.distance, 1.0);
    }

    #[test]
    fn k_larger_than_grid_returns_everything() {
        let f = one_hot_map(2, 3);
        assert_eq!(top_k_matches(&f, &f, 100, Metric::Cosine).unwrap().k(), 6);
        assert_eq!(top_k_matches(&f, &f, 0, Metric::Cosine), Err(MatchError::InvalidK));
    }

    #[test]
    fn best_view_prefers_exact_copy() {
        let q = one_hot_map(3, 3);
        // Collapsed descriptors send every cycle back to (0, 0).
        let other = FeatureMap::new(3, 3, 9, vec![0.3; 81], 4.0, 2.0, None).unwrap();
        let (idx, set) = best_view(&q, &[q.clone(), other.clone()], 5, Metric::Cosine).unwrap();
        assert_eq!(idx, 0);
        assert_eq!(set.cumulative_distance(), 0.0);
        let (idx, set) = best_view(&q, &[other.clone(), q.clone()], 5, Metric::Cosine).unwrap();
        assert_eq!(idx, 1);
        assert_eq!(set.cumulative_distance(), 0.0);
        assert_eq!(best_view(&q, &[other], 5, Metric::Cosine).unwrap().0, 0);
        assert_eq!(best_view(&q, &[], 5, Metric::Cosine).unwrap_err(), MatchError::NoReferences);
    }

    #[test]
    fn invalid_maps_rejected() {
        assert!(FeatureMap::new(2, 2, 1, vec![0.0; 3], 1.0, 0.0, None).is_err());
        assert!(FeatureMap::new(1, 1, 1, vec![f32::NAN], 1.0, 0.0, None).is_err());
        assert!(FeatureMap::new(1, 1, 1, vec![0.0], 0.5, 0.0, None).is_err());
        assert!(FeatureMap::new(1, 2, 1, vec![0.0; 2], 1.0, 0.0, Some(vec![true])).is_err());
    }
}
