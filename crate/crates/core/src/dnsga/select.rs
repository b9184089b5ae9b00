//! Dominance, non-dominated sorting and staged crowding selection. All
//! objectives are maximized.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evalcore::{EvaluatedProgram, SecondObjective};

/// `a` is no worse than `b` everywhere and strictly better somewhere.
pub fn dominates(a: &[f64], b: &[f64]) -> bool {
    debug_assert_eq!(a.len(), b.len());
    let mut strict = false;
    for (x, y) in a.iter().zip(b) {
        if x < y {
            return false;
        }
        if x > y {
            strict = true;
        }
    }
    strict
}

/// Dominance between evaluated programs on (precision, second objective).
pub fn dominates_programs(a: &EvaluatedProgram, b: &EvaluatedProgram, second: SecondObjective) -> Result<bool> {
    if second == SecondObjective::Speed && (a.speed.is_none() || b.speed.is_none()) {
        return Err(Error::Usage("speed objective missing on a program".into()));
    }
    Ok(dominates(&sanitize(a.objectives(second)), &sanitize(b.objectives(second))))
}

/// NaN objectives rank below everything.
pub fn sanitize(v: [f64; 2]) -> [f64; 2] {
    v.map(|x| if x.is_nan() { f64::NEG_INFINITY } else { x })
}

/// Fronts of indices into `points`, best first.
pub fn non_dominated_sort(points: &[[f64; 2]]) -> Vec<Vec<usize>> {
    let n = points.len();
    let mut dominated_by = vec![0usize; n];
    let mut dominates_list: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        for j in (i + 1)..n {
            if dominates(&points[i], &points[j]) {
                dominates_list[i].push(j);
                dominated_by[j] += 1;
            } else if dominates(&points[j], &points[i]) {
                dominates_list[j].push(i);
                dominated_by[i] += 1;
            }
        }
    }
    let mut fronts = Vec::new();
    let mut current: Vec<usize> = (0..n).filter(|&i| dominated_by[i] == 0).collect();
    while !current.is_empty() {
        let mut next = Vec::new();
        for &i in &current {
            for &j in &dominates_list[i] {
                dominated_by[j] -= 1;
                if dominated_by[j] == 0 {
                    next.push(j);
                }
            }
        }
        next.sort_unstable();
        fronts.push(current);
        current = next;
    }
    fronts
}

/// Maps objective vectors to comparable coordinates: infinities are pulled in
/// just beyond the finite range, then each axis is divided by its range
/// (1 when degenerate). With `normalize` off only the clamping happens.
pub fn normalized(points: &[[f64; 2]], normalize: bool) -> Vec<[f64; 2]> {
    let mut out: Vec<[f64; 2]> = points.iter().map(|p| sanitize(*p)).collect();
    for axis in 0..2 {
        let finite: Vec<f64> = out.iter().map(|p| p[axis]).filter(|v| v.is_finite()).collect();
        let (lo, hi) = finite
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
        let (lo, hi) = if finite.is_empty() { (0.0, 0.0) } else { (lo, hi) };
        let range = hi - lo;
        let pad = if range > 0.0 && range.is_finite() { range } else { 1.0 };
        for p in out.iter_mut() {
            if p[axis] == f64::NEG_INFINITY {
                p[axis] = lo - pad;
            } else if p[axis] == f64::INFINITY {
                p[axis] = hi + pad;
            }
        }
        let scale = if normalize && range > 0.0 && range.is_finite() { range } else { 1.0 };
        for p in out.iter_mut() {
            p[axis] /= scale;
        }
    }
    out
}

/// Front member maximizing the minimum distance to `selected`. With nothing
/// selected yet, the member with the largest first objective. Ties go to the
/// lower id. Coordinates are expected to be normalized already.
pub fn least_crowded(front: &[usize], selected: &[usize], coords: &[[f64; 2]], ids: &[u64]) -> usize {
    assert!(!front.is_empty(), "least_crowded on an empty front");
    let key = |i: usize| -> f64 {
        if selected.is_empty() {
            coords[i][0]
        } else {
            selected
                .iter()
                .map(|&j| {
                    let dx = coords[i][0] - coords[j][0];
                    let dy = coords[i][1] - coords[j][1];
                    (dx * dx + dy * dy).sqrt()
                })
                .fold(f64::INFINITY, f64::min)
        }
    };
    let mut best = front[0];
    let mut best_key = key(best);
    for &i in &front[1..] {
        let k = key(i);
        if k > best_key || (k == best_key && ids[i] < ids[best]) {
            best = i;
            best_key = k;
        }
    }
    best
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Requirement {
    None,
    /// precision strictly greater than the threshold
    MinPrecision { threshold: f64 },
}

impl Requirement {
    pub fn accepts(&self, obj: &[f64; 2]) -> bool {
        match *self {
            Requirement::None => true,
            Requirement::MinPrecision { threshold } => obj[0] > threshold,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stage {
    pub count: usize,
    pub requirement: Requirement,
}

/// One unconstrained stage of `s`.
pub fn single_stage(s: usize) -> Vec<Stage> {
    vec![Stage {
        count: s,
        requirement: Requirement::None,
    }]
}

/// Half the parents must be under one ULP of error, the rest unconstrained.
pub fn float_stages(s: usize) -> Vec<Stage> {
    vec![
        Stage {
            count: s / 2,
            requirement: Requirement::MinPrecision { threshold: -1.0 },
        },
        Stage {
            count: s - s / 2,
            requirement: Requirement::None,
        },
    ]
}

/// Chooses `sum(stage.count)` parents from the sample. Fronts are those of
/// the whole sample; within each stage only members meeting the requirement
/// are eligible. Stage targets are cumulative, so a stage that runs out of
/// eligible programs leaves its shortfall to the next one.
pub fn select_in_stages(points: &[[f64; 2]], ids: &[u64], stages: &[Stage], normalize: bool) -> Result<Vec<usize>> {
    let s: usize = stages.iter().map(|st| st.count).sum();
    if points.len() < s {
        return Err(Error::SelectionUnderflow {
            available: points.len(),
            required: s,
        });
    }
    let coords = normalized(points, normalize);
    let pts: Vec<[f64; 2]> = points.iter().map(|p| sanitize(*p)).collect();
    let fronts = non_dominated_sort(&pts);
    let mut taken = vec![false; points.len()];
    let mut selected: Vec<usize> = Vec::with_capacity(s);
    let mut target = 0;
    for stage in stages {
        target += stage.count;
        for front in &fronts {
            let remaining = target - selected.len();
            if remaining == 0 {
                break;
            }
            let mut eligible: Vec<usize> = front
                .iter()
                .copied()
                .filter(|&i| !taken[i] && stage.requirement.accepts(&pts[i]))
                .collect();
            if eligible.len() <= remaining {
                for &i in &eligible {
                    taken[i] = true;
                }
                selected.extend(eligible);
            } else {
                for _ in 0..remaining {
                    let pick = least_crowded(&eligible, &selected, &coords, ids);
                    eligible.retain(|&i| i != pick);
                    taken[pick] = true;
                    selected.push(pick);
                }
                break;
            }
        }
    }
    if selected.len() != s {
        return Err(Error::SelectionUnderflow {
            available: selected.len(),
            required: s,
        });
    }
    Ok(selected)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn dominance_examples() {
        assert!(dominates(&[2.0, 3.0], &[1.0, 3.0]));
        assert!(!dominates(&[2.0, 3.0], &[2.0, 3.0]));
        assert!(!dominates(&[2.0, 1.0], &[1.0, 2.0]));
        assert!(!dominates(&[1.0, 2.0], &[2.0, 1.0]));
    }

    #[test]
    fn sort_examples() {
        let incomparable = [[1.0, 3.0], [2.0, 2.0], [3.0, 1.0]];
        assert_eq!(non_dominated_sort(&incomparable), vec![vec![0, 1, 2]]);
        let chain = [[1.0, 1.0], [3.0, 3.0], [2.0, 2.0]];
        assert_eq!(non_dominated_sort(&chain), vec![vec![1], vec![2], vec![0]]);
    }

    #[test]
    fn crowding_examples() {
        let coords = [[0.0, 0.0], [1.0, 0.0], [3.0, 0.0], [4.0, 0.0], [2.0, 0.0]];
        let ids = [0, 1, 2, 3, 4];
        assert_eq!(least_crowded(&[1, 2], &[0], &coords, &ids), 2);
        assert_eq!(least_crowded(&[1, 4], &[0, 3], &coords, &ids), 4);
        // equidistant candidates: lower id wins, in either order
        let coords = [[0.0, 0.0], [1.0, 0.0], [-1.0, 0.0]];
        assert_eq!(least_crowded(&[1, 2], &[0], &coords, &[0, 9, 4]), 2);
        assert_eq!(least_crowded(&[2, 1], &[0], &coords, &[0, 4, 9]), 1);
        // empty selection: extremal first objective
        assert_eq!(least_crowded(&[0, 1, 2], &[], &coords, &[0, 1, 2]), 1);
    }

    #[test]
    fn all_failing_first_stage_is_absorbed() {
        let s = 4;
        let points: Vec<[f64; 2]> = (0..2 * s).map(|i| [-5.0 - i as f64, i as f64]).collect();
        let ids: Vec<u64> = (0..2 * s as u64).collect();
        let sel = select_in_stages(&points, &ids, &float_stages(s), true).unwrap();
        assert_eq!(sel.len(), s);
    }

    #[test]
    fn non_dominated_beat_dominated_copies() {
        let s = 5;
        let mut points: Vec<[f64; 2]> = (0..s).map(|i| [i as f64, (s - i) as f64]).collect();
        points.extend((0..s).map(|i| [i as f64 - 10.0, (s - i) as f64 - 10.0]));
        let ids: Vec<u64> = (0..2 * s as u64).collect();
        let mut sel = select_in_stages(&points, &ids, &single_stage(s), true).unwrap();
        sel.sort_unstable();
        assert_eq!(sel, vec![0, 1, 2, 3, 4]);
        assert!(matches!(
            select_in_stages(&points[..3], &ids[..3], &single_stage(s), true),
            Err(Error::SelectionUnderflow { .. })
        ));
    }

    #[test]
    fn greedy_spread_hand_trace() {
        // six incomparable points on a line x + y = 5, choose 3
        let points: Vec<[f64; 2]> = [0.0, 1.0, 2.0, 3.0, 4.0, 5.0].iter().map(|&x| [x, 5.0 - x]).collect();
        let ids: Vec<u64> = (0..6).collect();
        let sel = select_in_stages(&points, &ids, &single_stage(3), true).unwrap();
        // first the top precision (x = 5), then the farthest (x = 0), then a
        // middle point; x = 2 and x = 3 tie and the lower id wins
        assert_eq!(sel, vec![5, 0, 2]);
    }

    fn brute_fronts(points: &[[f64; 2]]) -> Vec<Vec<usize>> {
        let mut left: Vec<usize> = (0..points.len()).collect();
        let mut fronts = Vec::new();
        while !left.is_empty() {
            let front: Vec<usize> = left
                .iter()
                .copied()
                .filter(|&i| !left.iter().any(|&j| dominates(&points[j], &points[i])))
                .collect();
            left.retain(|i| !front.contains(i));
            fronts.push(front);
        }
        fronts
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn sort_matches_brute_force(pts in prop::collection::vec((0i32..8, 0i32..8), 1..64)) {
            let points: Vec<[f64; 2]> = pts.iter().map(|&(a, b)| [a as f64, b as f64]).collect();
            let mut got = non_dominated_sort(&points);
            for f in got.iter_mut() { f.sort_unstable(); }
            prop_assert_eq!(got, brute_fronts(&points));
        }

        #[test]
        fn selection_size_and_first_front(
            pts in prop::collection::vec((-20i32..1, 0i32..10), 8..48),
            s in 1usize..8,
            staged in any::<bool>(),
        ) {
            let points: Vec<[f64; 2]> = pts.iter().map(|&(a, b)| [a as f64 / 10.0, -b as f64]).collect();
            prop_assume!(points.len() >= s);
            let ids: Vec<u64> = (0..points.len() as u64).collect();
            let stages = if staged { float_stages(s) } else { single_stage(s) };
            let sel = select_in_stages(&points, &ids, &stages, true).unwrap();
            prop_assert_eq!(sel.len(), s);
            let mut uniq = sel.clone();
            uniq.sort_unstable();
            uniq.dedup();
            prop_assert_eq!(uniq.len(), s);
            // a dominated program is chosen only once the whole first front is in
            let first = &non_dominated_sort(&points)[0];
            let any_dominated = sel.iter().any(|i| !first.contains(i));
            if any_dominated && !staged {
                prop_assert!(first.iter().all(|i| sel.contains(i)));
            }
        }
    }
}
