//! Assignment problems between component lists.

/// Sizes up to this bound are solved by enumerating all permutations.
pub const ENUMERATION_LIMIT: usize = 6;

/// Minimum-cost perfect assignment on a square cost matrix.
///
/// Returns `assignment[row] = col` and the total cost. Small problems are
/// enumerated exhaustively, larger ones use the Hungarian algorithm.
pub fn min_cost_assignment(cost: &[Vec<f64>]) -> (Vec<usize>, f64) {
    let n = cost.len();
    if n == 0 {
        return (Vec::new(), 0.0);
    }
    if n <= ENUMERATION_LIMIT {
        enumerate(cost)
    } else {
        hungarian(cost)
    }
}

fn enumerate(cost: &[Vec<f64>]) -> (Vec<usize>, f64) {
    let n = cost.len();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut best = (perm.clone(), f64::INFINITY);
    permute(&mut perm, 0, cost, &mut best);
    best
}

fn permute(perm: &mut [usize], k: usize, cost: &[Vec<f64>], best: &mut (Vec<usize>, f64)) {
    if k == perm.len() {
        let total: f64 = perm.iter().enumerate().map(|(r, &c)| cost[r][c]).sum();
        if total < best.1 {
            *best = (perm.to_vec(), total);
        }
        return;
    }
    for i in k..perm.len() {
        perm.swap(k, i);
        permute(perm, k + 1, cost, best);
        perm.swap(k, i);
    }
}

/// O(n^3) Hungarian algorithm with row/column potentials.
pub fn hungarian(cost: &[Vec<f64>]) -> (Vec<usize>, f64) {
    let n = cost.len();
    // 1-based arrays; column 0 is a sentinel.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];

    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut assignment = vec![0; n];
    for j in 1..=n {
        assignment[p[j] - 1] = j - 1;
    }
    let total = assignment.iter().enumerate().map(|(r, &c)| cost[r][c]).sum();
    (assignment, total)
}

/// Whether the bipartite graph `adj[left][right]` has a perfect matching.
pub fn has_perfect_matching(adj: &[Vec<bool>]) -> bool {
    let n = adj.len();
    let mut match_right: Vec<Option<usize>> = vec![None; n];
    for left in 0..n {
        let mut seen = vec![false; n];
        if !augment(left, adj, &mut seen, &mut match_right) {
            return false;
        }
    }
    true
}

fn augment(left: usize, adj: &[Vec<bool>], seen: &mut [bool], match_right: &mut [Option<usize>]) -> bool {
    for right in 0..adj[left].len() {
        if !adj[left][right] || seen[right] {
            continue;
        }
        seen[right] = true;
        let free = match match_right[right] {
            None => true,
            Some(other) => augment(other, adj, seen, match_right),
        };
        if free {
            match_right[right] = Some(left);
            return true;
        }
    }
    false
}
