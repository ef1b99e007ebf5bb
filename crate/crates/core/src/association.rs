//! Global nearest neighbour association: Mahalanobis gating, hypothesis
//! generation, optimal 2D assignment, and the time-based deletion policy.

use std::collections::HashMap;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{Error, Result};
use crate::filters::{measurement_transform, FilterKind, GaussianState};
use crate::linalg::{cholesky_with_repair, wrap_angle};
use crate::models::MeasurementModel;
use crate::transforms::TransformResult;

/// A sensor measurement tagged with its origin and measurement model.
#[derive(Debug, Clone)]
pub struct Detection {
    pub z: DVector<f64>,
    pub timestamp: f64,
    pub sensor: String,
    pub model: Arc<MeasurementModel>,
    /// Simulation bookkeeping only; never used by the tracker.
    pub is_clutter: bool,
}

/// One association hypothesis for a track.
#[derive(Debug, Clone)]
pub struct Hypothesis {
    pub track: usize,
    /// `None` is the missed-detection hypothesis.
    pub detection: Option<usize>,
    pub distance: f64,
}

/// Result of the per-scan assignment.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    /// One entry per track: assigned detection index or `None` for missed.
    pub pairs: Vec<(usize, Option<usize>)>,
    pub unassigned_detections: Vec<usize>,
}

/// Mahalanobis distance sqrt(nu^T S^-1 nu) via a factorization solve.
/// Angle components of `nu` must be pre-wrapped by the caller.
pub fn mahalanobis(nu: &DVector<f64>, s: &DMatrix<f64>) -> Result<f64> {
    if s.nrows() != nu.len() || s.ncols() != nu.len() {
        return Err(Error::InvalidArgument("dimension mismatch".into()));
    }
    let (chol, _) = cholesky_with_repair(s)?;
    let solved = chol.solve(nu);
    let q = nu.dot(&solved);
    Ok(q.max(0.0).sqrt())
}

/// Hypothesis matrix for one scan. Distances above the gate are infeasible
/// (`None`). `transforms` holds one `TransformResult` per track per distinct
/// measurement model appearing in the scan, keyed by model pointer identity.
pub struct HypothesisMatrix {
    /// distances[track][detection]
    pub distances: Vec<Vec<Option<f64>>>,
    pub n_detections: usize,
    pub gate: f64,
    pub transforms: Vec<HashMap<usize, TransformResult>>,
    /// Number of moment transforms actually computed.
    pub transforms_computed: usize,
}

fn model_key(model: &Arc<MeasurementModel>) -> usize {
    Arc::as_ptr(model) as usize
}

/// Generate the gated hypothesis matrix. The moment transform is computed
/// once per (track, measurement model); it does not depend on the detection.
pub fn hypothesize<R: Rng>(
    tracks: &[GaussianState],
    detections: &[Detection],
    kind: &FilterKind,
    gate: f64,
    rng: &mut R,
) -> HypothesisMatrix {
    let mut transforms: Vec<HashMap<usize, TransformResult>> = vec![HashMap::new(); tracks.len()];
    let mut computed = 0usize;
    let mut distances = vec![vec![None; detections.len()]; tracks.len()];

    for (ti, track) in tracks.iter().enumerate() {
        for (di, det) in detections.iter().enumerate() {
            if det.model.state_dim != track.mean().len() {
                continue;
            }
            let key = model_key(&det.model);
            if !transforms[ti].contains_key(&key) {
                match measurement_transform(kind, &det.model, &track.density, rng) {
                    Ok(t) => {
                        computed += 1;
                        transforms[ti].insert(key, t);
                    }
                    Err(_) => continue, // pair infeasible, scan goes on
                }
            }
            let t = &transforms[ti][&key];
            let mut nu = &det.z - &t.z_mean;
            for (i, &is_angle) in det.model.angle_mask.iter().enumerate() {
                if is_angle {
                    nu[i] = wrap_angle(nu[i]);
                }
            }
            if let Ok(d) = mahalanobis(&nu, &t.cov_zz) {
                if d <= gate {
                    distances[ti][di] = Some(d);
                }
            }
        }
    }
    HypothesisMatrix {
        distances,
        n_detections: detections.len(),
        gate,
        transforms,
        transforms_computed: computed,
    }
}

const BIG: f64 = 1e30;

/// Minimum-cost assignment of rows to distinct columns (rows <= columns),
/// Jonker-Volgenant shortest augmenting path. `f64::INFINITY` marks an
/// infeasible pair; a feasible perfect matching of the rows must exist.
/// Equal-cost solutions are canonicalized to the lexicographically smallest
/// (row, column) pairing.
pub fn assign_rectangular(cost: &DMatrix<f64>) -> Result<Vec<usize>> {
    let n_rows = cost.nrows();
    let n_cols = cost.ncols();
    if n_rows == 0 {
        return Ok(Vec::new());
    }
    if n_rows > n_cols {
        return Err(Error::InvalidArgument(
            "assignment requires rows <= columns".into(),
        ));
    }
    let c = |r: usize, col: usize| {
        let v = cost[(r, col)];
        if v.is_finite() {
            v
        } else {
            BIG
        }
    };

    // 1-indexed over columns; job[col] = assigned row.
    let mut job: Vec<Option<usize>> = vec![None; n_cols + 1];
    let mut ys = vec![0.0f64; n_rows];
    let mut yt = vec![0.0f64; n_cols + 1];

    for row in 0..n_rows {
        let mut w_cur = n_cols; // virtual column
        job[w_cur] = Some(row);
        let mut min_to = vec![f64::INFINITY; n_cols + 1];
        let mut prev: Vec<Option<usize>> = vec![None; n_cols + 1];
        let mut in_z = vec![false; n_cols + 1];

        while let Some(j) = job[w_cur] {
            in_z[w_cur] = true;
            let mut delta = f64::INFINITY;
            let mut w_next = 0usize;
            for col in 0..n_cols {
                if !in_z[col] {
                    let reduced = c(j, col) - ys[j] - yt[col];
                    if reduced < min_to[col] {
                        min_to[col] = reduced;
                        prev[col] = Some(w_cur);
                    }
                    if min_to[col] < delta
                        || (min_to[col] == delta && job[col].is_none() && job[w_next].is_some())
                    {
                        delta = min_to[col];
                        w_next = col;
                    }
                }
            }
            for col in 0..=n_cols {
                if in_z[col] {
                    if let Some(j2) = job[col] {
                        ys[j2] += delta;
                    }
                    yt[col] -= delta;
                } else {
                    min_to[col] -= delta;
                }
            }
            w_cur = w_next;
        }
        // Augment along the alternating path.
        while let Some(w_prev) = prev[w_cur] {
            job[w_cur] = job[w_prev];
            w_cur = w_prev;
        }
    }

    let mut row_to_col = vec![usize::MAX; n_rows];
    for col in 0..n_cols {
        if let Some(r) = job[col] {
            row_to_col[r] = col;
        }
    }
    if row_to_col.iter().any(|&c| c == usize::MAX) {
        return Err(Error::Numerical("assignment failed to match all rows".into()));
    }
    // Reject if the optimum uses an infeasible edge.
    for (r, &col) in row_to_col.iter().enumerate() {
        if !cost[(r, col)].is_finite() {
            return Err(Error::InvalidArgument(
                "no feasible assignment exists".into(),
            ));
        }
    }
    canonicalize_ties(cost, &mut row_to_col);
    Ok(row_to_col)
}

/// Among cost-equal optima, prefer the lexicographically smallest
/// (row, column) pairing by exchanging column pairs that leave the total
/// cost identical.
fn canonicalize_ties(cost: &DMatrix<f64>, row_to_col: &mut [usize]) {
    let n = row_to_col.len();
    let mut changed = true;
    while changed {
        changed = false;
        for i in 0..n {
            for j in (i + 1)..n {
                let (ci, cj) = (row_to_col[i], row_to_col[j]);
                if cj < ci
                    && cost[(i, cj)].is_finite()
                    && cost[(j, ci)].is_finite()
                    && cost[(i, cj)] + cost[(j, ci)] == cost[(i, ci)] + cost[(j, cj)]
                {
                    row_to_col[i] = cj;
                    row_to_col[j] = ci;
                    changed = true;
                }
            }
        }
    }
}

/// Solve the gated association for one scan. Each track gets a dedicated
/// missed-detection column at cost equal to the gate.
pub fn assign_2d(hypotheses: &HypothesisMatrix) -> Result<Assignment> {
    let n_tracks = hypotheses.distances.len();
    let n_dets = hypotheses.n_detections;
    let mut cost = DMatrix::from_element(n_tracks, n_dets + n_tracks, f64::INFINITY);
    for (ti, row) in hypotheses.distances.iter().enumerate() {
        for (di, d) in row.iter().enumerate() {
            if let Some(d) = d {
                cost[(ti, di)] = *d;
            }
        }
        cost[(ti, n_dets + ti)] = hypotheses.gate;
    }
    let row_to_col = assign_rectangular(&cost)?;
    let mut pairs = Vec::with_capacity(n_tracks);
    let mut used = vec![false; n_dets];
    for (ti, &col) in row_to_col.iter().enumerate() {
        if col < n_dets {
            used[col] = true;
            pairs.push((ti, Some(col)));
        } else {
            pairs.push((ti, None));
        }
    }
    let unassigned_detections = (0..n_dets).filter(|&d| !used[d]).collect();
    Ok(Assignment { pairs, unassigned_detections })
}

/// Split `last_update_times` into survivors and stale entries. An entry is
/// stale when `now - last_update > threshold` (strict).
pub fn delete_stale<I: Copy>(
    tracks: &[(I, f64)],
    now: f64,
    threshold: f64,
) -> (Vec<I>, Vec<I>) {
    let mut surviving = Vec::new();
    let mut deleted = Vec::new();
    for &(id, last_update) in tracks {
        if now - last_update > threshold {
            deleted.push(id);
        } else {
            surviving.push(id);
        }
    }
    (surviving, deleted)
}
