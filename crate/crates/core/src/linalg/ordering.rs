use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

use super::SparseOperator;

/// Symmetric adjacency (without self loops) of the pattern of `a` restricted to
/// the first `n` unknowns.
fn adjacency(a: &SparseOperator, n: usize) -> Vec<Vec<usize>> {
    let mut adj = vec![Vec::new(); n];
    for (r, c, _) in a.iter() {
        if r < n && c < n && r != c {
            adj[r].push(c);
            adj[c].push(r);
        }
    }
    for list in adj.iter_mut() {
        list.sort_unstable();
        list.dedup();
    }
    adj
}

/// Breadth-first traversal from `root` over unmarked nodes, neighbours visited
/// by increasing degree. Returns the visit order and the level of each visited node.
fn bfs(adj: &[Vec<usize>], root: usize, mark: &mut [bool]) -> (Vec<usize>, Vec<usize>) {
    let mut order = Vec::new();
    let mut level = Vec::new();
    let mut queue = VecDeque::new();
    queue.push_back((root, 0usize));
    mark[root] = true;
    while let Some((v, d)) = queue.pop_front() {
        order.push(v);
        level.push(d);
        let mut next: Vec<usize> = adj[v].iter().copied().filter(|&w| !mark[w]).collect();
        next.sort_by_key(|&w| (adj[w].len(), w));
        for w in next {
            mark[w] = true;
            queue.push_back((w, d + 1));
        }
    }
    (order, level)
}

/// Reverse Cuthill-McKee permutation (new position → old index) of the
/// symmetrized pattern of the leading `n × n` block of `a`.
pub fn reverse_cuthill_mckee(a: &SparseOperator, n: usize) -> Vec<usize> {
    let adj = adjacency(a, n);
    let mut placed = vec![false; n];
    let mut scratch = vec![false; n];
    let mut perm = Vec::with_capacity(n);
    for seed in 0..n {
        if placed[seed] {
            continue;
        }
        // pseudo-peripheral root
        let mut root = seed;
        let mut best_depth = None;
        for _ in 0..8 {
            let (order, level) = bfs(&adj, root, &mut scratch);
            for &v in &order {
                scratch[v] = false;
            }
            let depth = *level.last().unwrap();
            if best_depth.is_some_and(|b| depth <= b) {
                break;
            }
            best_depth = Some(depth);
            let candidate = order
                .iter()
                .zip(&level)
                .filter(|(_, &l)| l == depth)
                .map(|(&v, _)| v)
                .min_by_key(|&v| (adj[v].len(), v))
                .unwrap();
            if candidate == root {
                break;
            }
            root = candidate;
        }
        let (order, _) = bfs(&adj, root, &mut placed);
        perm.extend(order);
    }
    perm.reverse();
    perm
}

/// Ordering for a symmetric saddle matrix whose first `n_primary` unknowns form
/// a definite block and the rest couple to them. Primary unknowns follow RCM;
/// every secondary unknown is placed right after the last primary unknown it
/// couples to, so every leading principal submatrix is nonsingular whenever
/// the coupling block has full row rank.
pub fn saddle_ordering(a: &SparseOperator, n_primary: usize) -> Vec<usize> {
    let n = a.n_rows();
    let primary = reverse_cuthill_mckee(a, n_primary);
    let mut pos = vec![0usize; n_primary];
    for (p, &v) in primary.iter().enumerate() {
        pos[v] = p;
    }
    let mut keys: Vec<(usize, usize, usize)> = Vec::with_capacity(n);
    for (p, &v) in primary.iter().enumerate() {
        keys.push((p, 0, v));
    }
    for v in n_primary..n {
        let (cols, _) = a.row(v);
        let last = cols
            .iter()
            .filter(|&&c| c < n_primary)
            .map(|&c| pos[c])
            .max()
            .unwrap_or(n_primary);
        keys.push((last, 1, v));
    }
    keys.sort_unstable();
    keys.into_iter().map(|(_, _, v)| v).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::TripletBuffer;

    #[test]
    fn rcm_is_a_permutation_and_reduces_bandwidth_of_a_path() {
        // path graph with scrambled labels
        let labels = [5, 2, 7, 0, 3, 6, 1, 4];
        let mut t = TripletBuffer::new();
        for w in labels.windows(2) {
            t.push(w[0], w[1], 1.0);
            t.push(w[1], w[0], 1.0);
        }
        for i in 0..8 {
            t.push(i, i, 4.0);
        }
        let a = SparseOperator::from_triplets(8, 8, t, true);
        let perm = reverse_cuthill_mckee(&a, 8);
        let mut seen = perm.clone();
        seen.sort();
        assert_eq!(seen, (0..8).collect::<Vec<_>>());
        let mut pos = [0usize; 8];
        for (p, &v) in perm.iter().enumerate() {
            pos[v] = p;
        }
        for w in labels.windows(2) {
            assert_eq!((pos[w[0]] as isize - pos[w[1]] as isize).abs(), 1);
        }
    }
}
