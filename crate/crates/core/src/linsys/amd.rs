//! Approximate minimum degree ordering on the quotient graph.
//!
//! Variables are eliminated greedily by approximate external degree. Each
//! eliminated variable becomes an element whose variable list replaces the
//! cliques it would otherwise create; elements adjacent to the pivot are
//! absorbed into it. Supervariable detection is not performed.

use std::collections::BTreeSet;

use crate::sparse::CscMatrix;

/// Returns `perm` with `perm[k]` the index eliminated at step `k`. Only the
/// pattern of the symmetric matrix `k` (either triangle) is read; the
/// diagonal is ignored. Ties are broken by the smaller index.
pub fn amd_order(k: &CscMatrix) -> Vec<usize> {
    let n = k.ncols();
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (r, c, _) in k.iter() {
        if r != c {
            adj[r].push(c);
            adj[c].push(r);
        }
    }
    for a in &mut adj {
        a.sort_unstable();
        a.dedup();
    }

    // elems[i]: elements adjacent to variable i. members[e]: variables of
    // element e, which is indexed by the variable it was created from.
    let mut elems: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut eliminated = vec![false; n];
    let mut absorbed = vec![false; n];
    let mut degree: Vec<usize> = adj.iter().map(Vec::len).collect();
    let mut queue: BTreeSet<(usize, usize)> = (0..n).map(|i| (degree[i], i)).collect();

    let mut in_lp = vec![false; n];
    let mut w = vec![0usize; n];
    let mut w_stamp = vec![usize::MAX; n];
    let mut perm = Vec::with_capacity(n);

    for step in 0..n {
        let (_, p) = queue.pop_first().expect("queue holds every uneliminated variable");
        perm.push(p);
        eliminated[p] = true;

        // Lp = (adj(p) ∪ members of elements adjacent to p) minus p.
        let mut lp: Vec<usize> = Vec::new();
        for &v in &adj[p] {
            if !eliminated[v] && !in_lp[v] {
                in_lp[v] = true;
                lp.push(v);
            }
        }
        for &e in &elems[p] {
            for &v in &members[e] {
                if !eliminated[v] && !in_lp[v] {
                    in_lp[v] = true;
                    lp.push(v);
                }
            }
        }
        for &e in &elems[p] {
            absorbed[e] = true;
            members[e] = Vec::new();
        }
        elems[p] = Vec::new();
        adj[p] = Vec::new();

        for &i in &lp {
            elems[i].retain(|&e| !absorbed[e]);
            elems[i].push(p);
            adj[i].retain(|&v| !eliminated[v] && !in_lp[v]);
        }

        // |Le \ Lp| for every element touching Lp.
        for &i in &lp {
            for &e in &elems[i] {
                if e == p {
                    continue;
                }
                if w_stamp[e] != step {
                    w_stamp[e] = step;
                    w[e] = members[e].len();
                }
                w[e] -= 1;
            }
        }

        let remaining = n - step - 1;
        let lp_ext = lp.len().saturating_sub(1);
        for &i in &lp {
            let ext: usize = elems[i].iter().filter(|&&e| e != p).map(|&e| w[e]).sum();
            let bound = adj[i].len() + lp_ext + ext;
            let d = remaining
                .saturating_sub(1)
                .min(degree[i] + lp_ext)
                .min(bound);
            queue.remove(&(degree[i], i));
            degree[i] = d;
            queue.insert((d, i));
        }

        members[p] = lp.clone();
        for &i in &lp {
            in_lp[i] = false;
        }
    }
    perm
}

#[cfg(test)]
mod tests {
    use super::*;

    fn is_permutation(p: &[usize]) -> bool {
        let mut seen = vec![false; p.len()];
        for &i in p {
            if i >= p.len() || seen[i] {
                return false;
            }
            seen[i] = true;
        }
        true
    }

    #[test]
    fn diagonal_keeps_natural_order() {
        assert_eq!(amd_order(&CscMatrix::identity(4)), vec![0, 1, 2, 3]);
    }

    #[test]
    fn star_eliminates_leaves_first() {
        let mut rows = vec![];
        let mut cols = vec![];
        for i in 1..6 {
            rows.push(0);
            cols.push(i);
        }
        let vals = vec![1.0; rows.len()];
        let k = CscMatrix::from_triplets(6, 6, &rows, &cols, &vals, false).unwrap();
        let perm = amd_order(&k);
        assert!(is_permutation(&perm));
        // the hub is only chosen once it has at most one remaining neighbour
        let hub_pos = perm.iter().position(|&v| v == 0).unwrap();
        assert!(hub_pos >= 4);
    }

    #[test]
    fn empty() {
        assert!(amd_order(&CscMatrix::zeros(0, 0)).is_empty());
    }
}
