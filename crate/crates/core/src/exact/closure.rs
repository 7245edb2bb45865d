use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::graphs::Graph;

/// Activation threshold of the closure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClosureRule {
    /// At least `⌈d(v)/2⌉` closed neighbours: exactly the vertices whose
    /// neighbour sum can be `≤ 0`, so a zero-temperature update may set them
    /// to `−1` (with probability ½ on a tie).
    #[default]
    Glauber,
    /// At least two closed neighbours (classical 2-neighbour bootstrap
    /// percolation).
    TwoNeighbor,
}

impl ClosureRule {
    fn threshold(self, degree: usize) -> usize {
        match self {
            ClosureRule::Glauber => degree.div_ceil(2),
            ClosureRule::TwoNeighbor => 2,
        }
    }
}

/// Least closed superset of `seed` under `rule`, ascending.
pub fn bootstrap_closure(graph: &Graph, seed: &[usize], rule: ClosureRule) -> Vec<usize> {
    let n = graph.n();
    let mut closed = vec![false; n];
    let mut hits = vec![0usize; n];
    let mut queue = VecDeque::new();
    for &v in seed {
        if v < n && !closed[v] {
            closed[v] = true;
            queue.push_back(v);
        }
    }
    for (v, c) in closed.iter_mut().enumerate() {
        if !*c && rule.threshold(graph.degree(v)) == 0 {
            *c = true;
            queue.push_back(v);
        }
    }
    while let Some(v) = queue.pop_front() {
        for &u in graph.neighbors(v) {
            if closed[u] {
                continue;
            }
            hits[u] += 1;
            if hits[u] >= rule.threshold(graph.degree(u)) {
                closed[u] = true;
                queue.push_back(u);
            }
        }
    }
    (0..n).filter(|&v| closed[v]).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphs::{generate_grid, grid_diagonal, grid_index};
    use proptest::prelude::*;

    #[test]
    fn grid_examples() {
        let g = generate_grid(3).unwrap();
        assert!(bootstrap_closure(&g, &[], ClosureRule::Glauber).is_empty());
        assert_eq!(bootstrap_closure(&g, &grid_diagonal(3), ClosureRule::Glauber).len(), 9);
        assert_eq!(bootstrap_closure(&g, &grid_diagonal(3), ClosureRule::TwoNeighbor).len(), 9);
    }

    #[test]
    fn corner_vertices_need_one_neighbour_under_the_glauber_rule() {
        let g = generate_grid(3).unwrap();
        let pair = [grid_index(3, 1, 2), grid_index(3, 2, 3)];
        assert_eq!(bootstrap_closure(&g, &pair, ClosureRule::Glauber).len(), 9);
        assert!(bootstrap_closure(&g, &pair, ClosureRule::TwoNeighbor).len() < 9);
    }

    #[test]
    fn two_neighbour_rule_never_fills_a_grid_from_fewer_than_side_vertices() {
        for side in [3usize, 4] {
            let g = generate_grid(side).unwrap();
            let n = side * side;
            for mask in 0u32..(1 << n) {
                if mask.count_ones() as usize != side - 1 {
                    continue;
                }
                let a: Vec<usize> = (0..n).filter(|&v| mask >> v & 1 == 1).collect();
                assert!(bootstrap_closure(&g, &a, ClosureRule::TwoNeighbor).len() < n);
            }
        }
    }

    proptest! {
        #[test]
        fn monotone_and_idempotent(a in prop::collection::vec(0usize..16, 0..6), b in prop::collection::vec(0usize..16, 0..6)) {
            let g = generate_grid(4).unwrap();
            for rule in [ClosureRule::Glauber, ClosureRule::TwoNeighbor] {
                let ca = bootstrap_closure(&g, &a, rule);
                let union: Vec<usize> = a.iter().chain(&b).copied().collect();
                let cu = bootstrap_closure(&g, &union, rule);
                prop_assert!(ca.iter().all(|v| cu.contains(v)));
                prop_assert_eq!(bootstrap_closure(&g, &ca, rule), ca);
            }
        }
    }
}
