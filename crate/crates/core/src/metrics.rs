//! Tracking performance metrics: OSPA, SIAP ambiguity and positional
//! accuracy, and the summed covariance Frobenius norm.

use nalgebra::{DMatrix, DVector};

use crate::association::assign_rectangular;
use crate::error::{Error, Result};
use crate::linalg::frobenius_norm;

/// OSPA parameters: order `p` and cutoff distance `c`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct OspaParams {
    pub p: f64,
    pub c: f64,
}

impl OspaParams {
    pub fn new(p: f64, c: f64) -> Result<Self> {
        if p < 1.0 {
            return Err(Error::InvalidArgument("OSPA order p must be >= 1".into()));
        }
        if !(c > 0.0) {
            return Err(Error::InvalidArgument("OSPA cutoff c must be positive".into()));
        }
        Ok(Self { p, c })
    }
}

/// Optimal sub-pattern assignment distance between two point sets.
pub fn ospa(xs: &[DVector<f64>], ys: &[DVector<f64>], params: &OspaParams) -> Result<f64> {
    if let (Some(x), Some(y)) = (xs.first(), ys.first()) {
        if x.len() != y.len() {
            return Err(Error::InvalidArgument("point dimension mismatch".into()));
        }
    }
    let (small, large) = if xs.len() <= ys.len() { (xs, ys) } else { (ys, xs) };
    let (m, n) = (small.len(), large.len());
    if n == 0 {
        return Ok(0.0);
    }
    let c_p = params.c.powf(params.p);
    let mut localization = 0.0;
    if m > 0 {
        let cost = DMatrix::from_fn(m, n, |i, j| {
            let d = (&small[i] - &large[j]).norm();
            d.min(params.c).powf(params.p)
        });
        let assignment = assign_rectangular(&cost)?;
        localization = assignment
            .iter()
            .enumerate()
            .map(|(i, &j)| cost[(i, j)])
            .sum();
    }
    let cardinality = c_p * (n - m) as f64;
    Ok(((localization + cardinality) / n as f64).powf(1.0 / params.p))
}

/// Per-timestamp truth/track association counts feeding the SIAP metrics.
#[derive(Debug, Clone, Default)]
pub struct AssociationCounts {
    pub times: Vec<f64>,
    /// N_{A,k}: tracks associated to some truth at time k.
    pub associated_tracks: Vec<usize>,
    /// J_{T,k}: truths with at least one associated track at time k.
    pub associated_truths: Vec<usize>,
    /// PA_{n,k}: positional errors of the associated tracks at time k.
    pub position_errors: Vec<Vec<f64>>,
}

/// SIAP ambiguity: sum N_{A,k} / sum J_{T,k}. `None` when the denominator is
/// zero over the window.
pub fn siap_ambiguity(counts: &AssociationCounts) -> Option<f64> {
    let num: usize = counts.associated_tracks.iter().sum();
    let den: usize = counts.associated_truths.iter().sum();
    if den == 0 {
        None
    } else {
        Some(num as f64 / den as f64)
    }
}

/// SIAP positional accuracy: mean Euclidean error over all associated
/// track-timestamps. `None` when no associations exist.
pub fn siap_position_accuracy(counts: &AssociationCounts) -> Option<f64> {
    let den: usize = counts.associated_tracks.iter().sum();
    if den == 0 {
        return None;
    }
    let num: f64 = counts.position_errors.iter().flatten().sum();
    Some(num / den as f64)
}

/// Sum of Frobenius norms of track covariances at one timestamp.
pub fn covariance_norm_sum(covs: &[DMatrix<f64>]) -> f64 {
    covs.iter().map(frobenius_norm).sum()
}

/// Associate truth positions to track positions at one timestamp.
///
/// A minimum-cost one-to-one assignment with gate `cutoff` is solved first;
/// tracks it leaves unassociated are then attached to their nearest truth
/// within the cutoff, so that redundant tracks on one truth count towards
/// ambiguity.
pub fn associate_timestamp(
    truth_positions: &[DVector<f64>],
    track_positions: &[DVector<f64>],
    cutoff: f64,
) -> (usize, usize, Vec<f64>) {
    let n_truth = truth_positions.len();
    let n_tracks = track_positions.len();
    if n_truth == 0 || n_tracks == 0 {
        return (0, 0, Vec::new());
    }
    // Rows = tracks, columns = truths + per-track unassigned column.
    let mut cost = DMatrix::from_element(n_tracks, n_truth + n_tracks, f64::INFINITY);
    for t in 0..n_tracks {
        for g in 0..n_truth {
            let d = (&track_positions[t] - &truth_positions[g]).norm();
            if d <= cutoff {
                cost[(t, g)] = d;
            }
        }
        cost[(t, n_truth + t)] = cutoff;
    }
    let mut truth_hit = vec![false; n_truth];
    let mut errors = Vec::new();
    let mut leftover = Vec::new();
    match assign_rectangular(&cost) {
        Ok(assignment) => {
            for (t, &col) in assignment.iter().enumerate() {
                if col < n_truth {
                    truth_hit[col] = true;
                    errors.push(cost[(t, col)]);
                } else {
                    leftover.push(t);
                }
            }
        }
        Err(_) => leftover = (0..n_tracks).collect(),
    }
    // Second pass: nearest truth within cutoff for leftover tracks.
    for t in leftover {
        let mut best: Option<(usize, f64)> = None;
        for g in 0..n_truth {
            let d = (&track_positions[t] - &truth_positions[g]).norm();
            if d <= cutoff && best.map_or(true, |(_, bd)| d < bd) {
                best = Some((g, d));
            }
        }
        if let Some((g, d)) = best {
            truth_hit[g] = true;
            errors.push(d);
        }
    }
    let associated_tracks = errors.len();
    let associated_truths = truth_hit.iter().filter(|&&h| h).count();
    (associated_tracks, associated_truths, errors)
}

/// Build the association-count series over common timestamps.
///
/// `truth_at` and `tracks_at` give the position sets present at each
/// timestamp, in the same order as `times`.
pub fn associate_truth_to_tracks(
    times: &[f64],
    truth_at: &[Vec<DVector<f64>>],
    tracks_at: &[Vec<DVector<f64>>],
    cutoff: f64,
) -> AssociationCounts {
    let mut counts = AssociationCounts::default();
    for ((&t, truths), tracks) in times.iter().zip(truth_at).zip(tracks_at) {
        let (na, jt, errs) = associate_timestamp(truths, tracks, cutoff);
        counts.times.push(t);
        counts.associated_tracks.push(na);
        counts.associated_truths.push(jt);
        counts.position_errors.push(errs);
    }
    counts
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn pt(v: &[f64]) -> DVector<f64> {
        DVector::from_vec(v.to_vec())
    }

    fn params(p: f64, c: f64) -> OspaParams {
        OspaParams::new(p, c).unwrap()
    }

    /// Exhaustive-permutation OSPA oracle for small sets.
    fn ospa_brute(xs: &[DVector<f64>], ys: &[DVector<f64>], p: f64, c: f64) -> f64 {
        let (small, large) = if xs.len() <= ys.len() { (xs, ys) } else { (ys, xs) };
        let (m, n) = (small.len(), large.len());
        if n == 0 {
            return 0.0;
        }
        fn perms(items: Vec<usize>) -> Vec<Vec<usize>> {
            if items.len() <= 1 {
                return vec![items];
            }
            let mut out = Vec::new();
            for i in 0..items.len() {
                let mut rest = items.clone();
                let head = rest.remove(i);
                for mut tail in perms(rest) {
                    tail.insert(0, head);
                    out.push(tail);
                }
            }
            out
        }
        let mut best = f64::INFINITY;
        for perm in perms((0..n).collect()) {
            let mut total = 0.0;
            for i in 0..m {
                let d = (&small[i] - &large[perm[i]]).norm();
                total += d.min(c).powf(p);
            }
            best = best.min(total);
        }
        if m == 0 {
            best = 0.0;
        }
        ((best + c.powf(p) * (n - m) as f64) / n as f64).powf(1.0 / p)
    }

    #[test]
    fn ospa_identities() {
        let x = vec![pt(&[0.0, 0.0]), pt(&[5.0, 5.0])];
        assert_relative_eq!(ospa(&x, &x, &params(2.0, 10.0)).unwrap(), 0.0, epsilon = 1e-12);
        // Pure cardinality error.
        let empty: Vec<DVector<f64>> = Vec::new();
        let y = vec![pt(&[1.0])];
        assert_relative_eq!(ospa(&empty, &y, &params(2.0, 10.0)).unwrap(), 10.0, epsilon = 1e-12);
        assert_relative_eq!(ospa(&empty, &empty, &params(2.0, 10.0)).unwrap(), 0.0);
        // Hand evaluation: 1-D, p=2, c=10, X={0}, Y={0,100}.
        let x = vec![pt(&[0.0])];
        let y = vec![pt(&[0.0]), pt(&[100.0])];
        assert_relative_eq!(
            ospa(&x, &y, &params(2.0, 10.0)).unwrap(),
            (100.0f64 / 2.0).sqrt(),
            epsilon = 1e-10
        );
        assert_relative_eq!(ospa(&x, &y, &params(2.0, 10.0)).unwrap(), 7.0711, epsilon = 1e-4);
    }

    #[test]
    fn ospa_matches_brute_force() {
        let mut rng = ChaCha12Rng::seed_from_u64(8);
        let p = 2.0;
        let c = 10.0;
        for _ in 0..200 {
            let nx = rng.gen_range(0..=4);
            let ny = rng.gen_range(0..=4);
            let xs: Vec<_> = (0..nx)
                .map(|_| pt(&[rng.gen_range(-20.0..20.0), rng.gen_range(-20.0..20.0)]))
                .collect();
            let ys: Vec<_> = (0..ny)
                .map(|_| pt(&[rng.gen_range(-20.0..20.0), rng.gen_range(-20.0..20.0)]))
                .collect();
            let got = ospa(&xs, &ys, &params(p, c)).unwrap();
            let want = ospa_brute(&xs, &ys, p, c);
            assert!((got - want).abs() < 1e-10, "{got} vs {want}");
            // Symmetry.
            let rev = ospa(&ys, &xs, &params(p, c)).unwrap();
            assert!((got - rev).abs() < 1e-10);
            assert!(got <= c + 1e-12 && got >= -1e-12);
        }
    }

    #[test]
    fn ospa_cutoff_monotone_under_cardinality_error() {
        let xs = vec![pt(&[0.0])];
        let ys = vec![pt(&[1.0]), pt(&[50.0])];
        let a = ospa(&xs, &ys, &params(2.0, 10.0)).unwrap();
        let b = ospa(&xs, &ys, &params(2.0, 20.0)).unwrap();
        assert!(b >= a);
    }

    #[test]
    fn siap_examples() {
        let counts = AssociationCounts {
            times: vec![0.0, 1.0, 2.0],
            associated_tracks: vec![2, 1, 1],
            associated_truths: vec![1, 1, 1],
            position_errors: vec![vec![3.0], vec![4.0], vec![5.0]],
        };
        assert_relative_eq!(siap_ambiguity(&counts).unwrap(), 4.0 / 3.0, epsilon = 1e-12);

        let perfect = AssociationCounts {
            times: vec![0.0; 10],
            associated_tracks: vec![1; 10],
            associated_truths: vec![1; 10],
            position_errors: vec![vec![5.0]; 10],
        };
        assert_relative_eq!(siap_ambiguity(&perfect).unwrap(), 1.0);
        assert_relative_eq!(siap_position_accuracy(&perfect).unwrap(), 5.0);

        let mean = AssociationCounts {
            times: vec![0.0, 1.0, 2.0],
            associated_tracks: vec![1, 1, 1],
            associated_truths: vec![1, 1, 1],
            position_errors: vec![vec![3.0], vec![4.0], vec![5.0]],
        };
        assert_relative_eq!(siap_position_accuracy(&mean).unwrap(), 4.0);

        let empty = AssociationCounts::default();
        assert!(siap_ambiguity(&empty).is_none());
        assert!(siap_position_accuracy(&empty).is_none());
    }

    #[test]
    fn double_coverage_ambiguity() {
        // Two tracks on one truth for the whole run.
        let truth = vec![vec![pt(&[0.0, 0.0])]; 5];
        let tracks = vec![vec![pt(&[1.0, 0.0]), pt(&[0.0, 1.0])]; 5];
        let times: Vec<f64> = (0..5).map(|k| k as f64).collect();
        let counts = associate_truth_to_tracks(&times, &truth, &tracks, 10.0);
        assert_relative_eq!(siap_ambiguity(&counts).unwrap(), 2.0);
    }

    #[test]
    fn covariance_norm_sum_cases() {
        let i4 = DMatrix::identity(4, 4);
        assert_relative_eq!(covariance_norm_sum(&[i4.clone()]), 2.0);
        assert_relative_eq!(covariance_norm_sum(&[i4.clone(), i4.clone()]), 4.0);
        let d = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 4.0]));
        assert_relative_eq!(covariance_norm_sum(&[d]), 17.0f64.sqrt());
        // Additive over disjoint sets.
        let a = covariance_norm_sum(&[i4.clone()]);
        let b = covariance_norm_sum(&[i4.clone(), i4.clone()]);
        assert_relative_eq!(a + b, covariance_norm_sum(&[i4.clone(), i4.clone(), i4]));
    }

    #[test]
    fn associate_gate_semantics() {
        let truth = vec![pt(&[0.0, 0.0])];
        let near = vec![pt(&[3.0, 4.0])];
        let far = vec![pt(&[300.0, 400.0])];
        let (na, jt, errs) = associate_timestamp(&truth, &near, 10.0);
        assert_eq!((na, jt), (1, 1));
        assert_relative_eq!(errs[0], 5.0);
        let (na, jt, errs) = associate_timestamp(&truth, &far, 10.0);
        assert_eq!((na, jt), (0, 0));
        assert!(errs.is_empty());
    }

    #[test]
    fn associate_three_by_three_matches_permutation_minimum() {
        let truth = vec![pt(&[0.0, 0.0]), pt(&[100.0, 0.0]), pt(&[0.0, 100.0])];
        let tracks = vec![pt(&[99.0, 1.0]), pt(&[2.0, 99.0]), pt(&[1.0, -1.0])];
        let (na, jt, errs) = associate_timestamp(&truth, &tracks, 50.0);
        assert_eq!((na, jt), (3, 3));
        let total: f64 = errs.iter().sum();
        // Brute-force permutation oracle over 3! pairings with the gate applied.
        let mut best = f64::INFINITY;
        let perms = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
        for p in perms {
            let mut s = 0.0;
            let mut ok = true;
            for (t, &g) in p.iter().enumerate() {
                let d = (&tracks[t] - &truth[g]).norm();
                if d > 50.0 {
                    ok = false;
                    break;
                }
                s += d;
            }
            if ok {
                best = best.min(s);
            }
        }
        assert_relative_eq!(total, best, epsilon = 1e-9);
    }

    proptest! {
        #[test]
        fn ospa_bounded_and_symmetric(seed in 0u64..300) {
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            let nx = rng.gen_range(0..=4);
            let ny = rng.gen_range(0..=4);
            let xs: Vec<_> = (0..nx).map(|_| pt(&[rng.gen_range(-5.0..5.0)])).collect();
            let ys: Vec<_> = (0..ny).map(|_| pt(&[rng.gen_range(-5.0..5.0)])).collect();
            let p = params(2.0, 3.0);
            let d = ospa(&xs, &ys, &p).unwrap();
            let r = ospa(&ys, &xs, &p).unwrap();
            prop_assert!(d >= 0.0 && d <= 3.0 + 1e-12);
            prop_assert!((d - r).abs() < 1e-12);
        }
    }
}
