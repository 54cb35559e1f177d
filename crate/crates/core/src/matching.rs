//! Matching distances `d1` and `d1'` between configurations.
//!
//! Both reduce to a minimum-cost assignment of the points of the smaller
//! configuration into the points of the larger one, with `d0` costs. The
//! solver is the shortest-augmenting-path Hungarian method on a rectangular
//! `n x m` cost matrix (`n <= m`), `O(n^2 m)`.

use crate::carrier::Configuration;

/// Optimal assignment between two expanded point lists.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchingResult {
    /// Sum of matched `d0` distances.
    pub cost: f64,
    /// `(index in smaller, index in larger)` pairs; indices refer to
    /// [`Configuration::expand`] of the respective configuration.
    pub assignment: Vec<(usize, usize)>,
    /// True when `b` was the smaller side, i.e. pairs are `(b index, a index)`.
    pub swapped: bool,
}

/// Solves `min over injections pi of sum_i cost[i][pi(i)]` for a row-major
/// `rows x cols` matrix with `rows <= cols`. Returns the column for each row.
///
/// Ties are broken toward the lowest column index.
pub fn solve_assignment(cost: &[f64], rows: usize, cols: usize) -> Vec<usize> {
    assert!(rows <= cols, "assignment needs rows <= cols");
    assert_eq!(cost.len(), rows * cols);
    if rows == 0 {
        return Vec::new();
    }
    let at = |i: usize, j: usize| cost[(i - 1) * cols + (j - 1)];

    // 1-based potentials; column 0 is the virtual root.
    let mut u = vec![0.0f64; rows + 1];
    let mut v = vec![0.0f64; cols + 1];
    let mut owner = vec![0usize; cols + 1];
    let mut way = vec![0usize; cols + 1];
    let mut minv = vec![f64::INFINITY; cols + 1];
    let mut used = vec![false; cols + 1];

    for i in 1..=rows {
        owner[0] = i;
        let mut j0 = 0usize;
        minv.fill(f64::INFINITY);
        used.fill(false);
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=cols {
                if used[j] {
                    continue;
                }
                let reduced = at(i0, j) - u[i0] - v[j];
                if reduced < minv[j] {
                    minv[j] = reduced;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=cols {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut out = vec![0usize; rows];
    for j in 1..=cols {
        if owner[j] > 0 {
            out[owner[j] - 1] = j - 1;
        }
    }
    out
}

/// Minimum-cost matching of all points of the smaller configuration into the
/// larger one under `d0`.
pub fn min_matching(a: &Configuration, b: &Configuration) -> MatchingResult {
    let (pa, pb) = (a.expand(), b.expand());
    let swapped = pb.len() < pa.len();
    let (small, large) = if swapped { (&pb, &pa) } else { (&pa, &pb) };
    let (n, m) = (small.len(), large.len());

    let mut cost = Vec::with_capacity(n * m);
    for &y in small {
        cost.extend(large.iter().map(|&z| (y - z).abs()));
    }
    let cols = solve_assignment(&cost, n, m);
    let total = cols
        .iter()
        .enumerate()
        .map(|(i, &j)| cost[i * m + j])
        .sum();
    MatchingResult {
        cost: total,
        assignment: cols.into_iter().enumerate().collect(),
        swapped,
    }
}

/// `d1'(a, b)`: optimal matching cost plus one per unmatched point.
pub fn d1_prime(a: &Configuration, b: &Configuration) -> f64 {
    if a == b {
        return 0.0;
    }
    let unmatched = a.total_mass().abs_diff(b.total_mass());
    min_matching(a, b).cost + unmatched as f64
}

/// `d1(a, b)`: 0 if both are empty, 1 if masses differ, otherwise the optimal
/// perfect-matching cost divided by the common mass.
pub fn d1(a: &Configuration, b: &Configuration) -> f64 {
    let (na, nb) = (a.total_mass(), b.total_mass());
    if na != nb {
        return 1.0;
    }
    if na == 0 {
        return 0.0;
    }
    min_matching(a, b).cost / na as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn cfg(atoms: &[(f64, u64)]) -> Configuration {
        Configuration::new(atoms.iter().copied()).unwrap()
    }

    /// Exhaustive minimum over all injections of `small` into `large`.
    fn brute_force(small: &[f64], large: &[f64]) -> f64 {
        fn rec(k: usize, small: &[f64], large: &[f64], used: &mut [bool], acc: f64, best: &mut f64) {
            if k == small.len() {
                *best = best.min(acc);
                return;
            }
            for j in 0..large.len() {
                if !used[j] {
                    used[j] = true;
                    rec(k + 1, small, large, used, acc + (small[k] - large[j]).abs(), best);
                    used[j] = false;
                }
            }
        }
        let mut best = f64::INFINITY;
        rec(0, small, large, &mut vec![false; large.len()], 0.0, &mut best);
        best
    }

    #[test]
    fn d1_prime_examples() {
        let a = cfg(&[(0.4, 2)]);
        assert_eq!(d1_prime(&a, &a), 0.0);
        assert_abs_diff_eq!(d1_prime(&cfg(&[(0.2, 1)]), &cfg(&[(0.5, 1)])), 0.3, epsilon = 1e-15);
        assert_abs_diff_eq!(
            d1_prime(&cfg(&[(0.1, 1)]), &cfg(&[(0.1, 1), (0.9, 1)])),
            1.0,
            epsilon = 1e-15
        );
    }

    #[test]
    fn d1_examples() {
        let e = Configuration::empty();
        assert_eq!(d1(&e, &e), 0.0);
        assert_eq!(d1(&cfg(&[(0.1, 2)]), &cfg(&[(0.1, 3)])), 1.0);
        assert_abs_diff_eq!(d1(&cfg(&[(0.2, 1)]), &cfg(&[(0.5, 1)])), 0.3, epsilon = 1e-15);
    }

    #[test]
    fn assignment_is_injective_and_cost_consistent() {
        let a = cfg(&[(0.1, 2), (0.6, 1), (0.95, 1)]);
        let b = cfg(&[(0.0, 1), (0.3, 3), (0.5, 1), (0.8, 2)]);
        let r = min_matching(&a, &b);
        assert!(!r.swapped);
        let (pa, pb) = (a.expand(), b.expand());
        let mut seen = std::collections::HashSet::new();
        let mut cost = 0.0;
        for &(i, j) in &r.assignment {
            assert!(seen.insert(j));
            cost += (pa[i] - pb[j]).abs();
        }
        assert_eq!(r.assignment.len(), pa.len());
        assert_abs_diff_eq!(cost, r.cost, epsilon = 1e-12);
        assert_abs_diff_eq!(r.cost, brute_force(&pa, &pb), epsilon = 1e-12);
    }

    #[test]
    fn swapped_when_first_is_larger() {
        let r = min_matching(&cfg(&[(0.1, 1), (0.2, 1)]), &cfg(&[(0.9, 1)]));
        assert!(r.swapped);
        assert_eq!(r.assignment, vec![(0, 1)]);
    }

    #[test]
    fn ties_go_to_lowest_index() {
        // both columns cost the same for the single row
        let cols = solve_assignment(&[0.5, 0.5], 1, 2);
        assert_eq!(cols, vec![0]);
    }

    fn arb_points(max: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(0u32..=1000, 0..=max)
            .prop_map(|v| v.into_iter().map(|k| k as f64 / 1000.0).collect())
    }

    proptest! {
        #[test]
        fn matches_brute_force(a in arb_points(4), b in arb_points(4)) {
            let ca = Configuration::from_points(a).unwrap();
            let cb = Configuration::from_points(b).unwrap();
            let (pa, pb) = (ca.expand(), cb.expand());
            let (s, l) = if pa.len() <= pb.len() { (&pa, &pb) } else { (&pb, &pa) };
            let expected = brute_force(s, l) + (l.len() - s.len()) as f64;
            prop_assert!((d1_prime(&ca, &cb) - expected).abs() <= 1e-9);
        }

        #[test]
        fn distances_are_symmetric_metrics(
            a in arb_points(4), b in arb_points(4), c in arb_points(4)
        ) {
            let (a, b, c) = (
                Configuration::from_points(a).unwrap(),
                Configuration::from_points(b).unwrap(),
                Configuration::from_points(c).unwrap(),
            );
            for dist in [d1_prime as fn(&Configuration, &Configuration) -> f64, d1] {
                let ab = dist(&a, &b);
                prop_assert!((ab - dist(&b, &a)).abs() <= 1e-12);
                prop_assert!(ab <= dist(&a, &c) + dist(&c, &b) + 1e-12);
                prop_assert_eq!(dist(&a, &a), 0.0);
            }
            prop_assert!(d1(&a, &b) <= 1.0);
            prop_assert!(d1_prime(&a, &b) <= (a.total_mass() + b.total_mass()) as f64);
            if a.total_mass() != b.total_mass() {
                prop_assert_eq!(d1(&a, &b), 1.0);
            }
        }
    }
}
