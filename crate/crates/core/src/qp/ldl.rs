//! Envelope (profile) LDLᵀ factorization of quasi-definite KKT matrices.
//!
//! The reduced KKT matrix of the interior-point method is symmetric with a
//! positive definite primal block and a negative definite (regularized) dual
//! block. Such matrices admit an LDLᵀ factorization for every symmetric
//! permutation, so the ordering can be chosen purely to keep the profile
//! small. Within the profile the factorization is dense.

use std::collections::VecDeque;

/// Reverse Cuthill-McKee ordering of an undirected graph.
///
/// `adjacency[i]` lists the neighbours of vertex `i`. Returns `perm` where
/// `perm[old] = new`.
pub(crate) fn reverse_cuthill_mckee(adjacency: &[Vec<usize>]) -> Vec<usize> {
    let n = adjacency.len();
    let degree: Vec<usize> = adjacency.iter().map(Vec::len).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);

    while order.len() < n {
        // start each component from a pseudo-peripheral vertex
        let seed = (0..n)
            .filter(|&v| !visited[v])
            .min_by_key(|&v| (degree[v], v))
            .expect("unvisited vertex exists");
        let start = pseudo_peripheral(adjacency, &degree, seed);

        let mut queue = VecDeque::from([start]);
        visited[start] = true;
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut next: Vec<usize> = adjacency[v]
                .iter()
                .copied()
                .filter(|&u| !visited[u])
                .collect();
            next.sort_by_key(|&u| (degree[u], u));
            next.dedup();
            for u in next {
                if !visited[u] {
                    visited[u] = true;
                    queue.push_back(u);
                }
            }
        }
    }

    let mut perm = vec![0; n];
    for (new, &old) in order.iter().rev().enumerate() {
        perm[old] = new;
    }
    perm
}

fn pseudo_peripheral(adjacency: &[Vec<usize>], degree: &[usize], seed: usize) -> usize {
    let mut current = seed;
    let mut best_depth = 0;
    for _ in 0..8 {
        let (depth, last_level) = bfs_levels(adjacency, current);
        if depth <= best_depth && best_depth > 0 {
            break;
        }
        best_depth = depth;
        let candidate = last_level
            .into_iter()
            .min_by_key(|&v| (degree[v], v))
            .unwrap_or(current);
        if candidate == current {
            break;
        }
        current = candidate;
    }
    current
}

fn bfs_levels(adjacency: &[Vec<usize>], start: usize) -> (usize, Vec<usize>) {
    let mut level = vec![usize::MAX; adjacency.len()];
    level[start] = 0;
    let mut frontier = vec![start];
    let mut depth = 0;
    loop {
        let mut next = Vec::new();
        for &v in &frontier {
            for &u in &adjacency[v] {
                if level[u] == usize::MAX {
                    level[u] = depth + 1;
                    next.push(u);
                }
            }
        }
        if next.is_empty() {
            return (depth, frontier);
        }
        depth += 1;
        frontier = next;
    }
}

/// Symmetric matrix stored by rows of its lower profile.
#[derive(Debug, Clone)]
pub(crate) struct EnvelopeMatrix {
    first: Vec<usize>,
    offset: Vec<usize>,
    data: Vec<f64>,
}

impl EnvelopeMatrix {
    /// Allocates a zero matrix whose profile covers every `(i, j)` in
    /// `entries` (either triangle may be given).
    pub fn with_pattern(n: usize, entries: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let mut first: Vec<usize> = (0..n).collect();
        for (i, j) in entries {
            let (hi, lo) = if i >= j { (i, j) } else { (j, i) };
            first[hi] = first[hi].min(lo);
        }
        let mut offset = Vec::with_capacity(n + 1);
        let mut total = 0;
        for (i, &f) in first.iter().enumerate() {
            offset.push(total);
            total += i - f + 1;
        }
        offset.push(total);
        Self {
            first,
            offset,
            data: vec![0.0; total],
        }
    }

    pub fn dim(&self) -> usize {
        self.first.len()
    }

    pub fn clear(&mut self) {
        self.data.iter_mut().for_each(|v| *v = 0.0);
    }

    /// Adds `value` at `(i, j)` and, implicitly, `(j, i)`.
    pub fn add(&mut self, i: usize, j: usize, value: f64) {
        let (hi, lo) = if i >= j { (i, j) } else { (j, i) };
        debug_assert!(lo >= self.first[hi], "entry outside profile");
        self.data[self.offset[hi] + lo - self.first[hi]] += value;
    }

    /// Symmetric product `self * x`.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let mut y = vec![0.0; n];
        for i in 0..n {
            let f = self.first[i];
            let row = &self.data[self.offset[i]..self.offset[i + 1]];
            let mut acc = row[i - f] * x[i];
            for (k, &a) in row[..i - f].iter().enumerate() {
                let j = f + k;
                acc += a * x[j];
                y[j] += a * x[i];
            }
            y[i] += acc;
        }
        y
    }

    /// Factors in place. `expected_sign[i]` is +1 for primal pivots and -1
    /// for dual pivots; pivots that come out tiny or with the wrong sign are
    /// replaced by `sign * floor`.
    pub fn factor(mut self, expected_sign: &[f64], floor: f64) -> LdlFactor {
        let n = self.dim();
        let mut diag = vec![0.0; n];
        let mut work = Vec::new();
        let mut replaced = 0;
        for i in 0..n {
            let fi = self.first[i];
            let oi = self.offset[i];
            work.clear();
            // work[k] = l_ik * d_k for k in fi..i
            for j in fi..i {
                let fj = self.first[j];
                let oj = self.offset[j];
                let k0 = fi.max(fj);
                let mut s = self.data[oi + j - fi];
                for k in k0..j {
                    s -= work[k - fi] * self.data[oj + k - fj];
                }
                work.push(s);
            }
            let mut d = self.data[oi + i - fi];
            for (k, &w) in work.iter().enumerate() {
                let j = fi + k;
                let l = w / diag[j];
                self.data[oi + k] = l;
                d -= w * l;
            }
            let sign = expected_sign[i];
            if !(d * sign > floor) {
                d = sign * floor.max(d.abs());
                replaced += 1;
            }
            diag[i] = d;
            self.data[oi + i - fi] = 1.0;
        }
        LdlFactor {
            lower: self,
            diag,
            replaced_pivots: replaced,
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct LdlFactor {
    lower: EnvelopeMatrix,
    diag: Vec<f64>,
    #[cfg_attr(not(test), allow(dead_code))]
    pub replaced_pivots: usize,
}

impl LdlFactor {
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let m = &self.lower;
        let n = m.dim();
        for i in 0..n {
            let f = m.first[i];
            let row = &m.data[m.offset[i]..m.offset[i + 1] - 1];
            let mut s = b[i];
            for (k, &l) in row.iter().enumerate() {
                s -= l * b[f + k];
            }
            b[i] = s;
        }
        for (bi, d) in b.iter_mut().zip(&self.diag) {
            *bi /= d;
        }
        for i in (0..n).rev() {
            let f = m.first[i];
            let row = &m.data[m.offset[i]..m.offset[i + 1] - 1];
            let xi = b[i];
            for (k, &l) in row.iter().enumerate() {
                b[f + k] -= l * xi;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense_mul(a: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
        a.iter()
            .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    #[test]
    fn factor_solves_quasi_definite_system() {
        // [[4, 1, 1], [1, 3, 2], [1, 2, -1]] is quasi-definite with a 2x2 primal block
        let a = vec![
            vec![4.0, 1.0, 1.0],
            vec![1.0, 3.0, 2.0],
            vec![1.0, 2.0, -1.0],
        ];
        let mut env = EnvelopeMatrix::with_pattern(3, [(1, 0), (2, 0), (2, 1)]);
        for i in 0..3 {
            for j in 0..=i {
                env.add(i, j, a[i][j]);
            }
        }
        let y = env.mul_vec(&[1.0, -2.0, 0.5]);
        assert_eq!(y, dense_mul(&a, &[1.0, -2.0, 0.5]));

        let factor = env.factor(&[1.0, 1.0, -1.0], 1e-14);
        assert_eq!(factor.replaced_pivots, 0);
        let mut b = vec![1.0, 2.0, 3.0];
        factor.solve_in_place(&mut b);
        let back = dense_mul(&a, &b);
        for (got, want) in back.iter().zip([1.0, 2.0, 3.0]) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn profile_skips_zeros_left_of_first_entry() {
        let env = EnvelopeMatrix::with_pattern(4, [(1, 0), (3, 2)]);
        assert_eq!(env.first, vec![0, 0, 2, 2]);
        assert_eq!(env.data.len(), 1 + 2 + 1 + 2);
    }

    #[test]
    fn rcm_of_path_is_bandwidth_one() {
        // path 0-3-1-4-2 scrambled
        let adj = vec![vec![3], vec![3, 4], vec![4], vec![0, 1], vec![1, 2]];
        let perm = reverse_cuthill_mckee(&adj);
        for (v, nbrs) in adj.iter().enumerate() {
            for &u in nbrs {
                assert_eq!(perm[v].abs_diff(perm[u]), 1);
            }
        }
        let mut sorted = perm.clone();
        sorted.sort();
        assert_eq!(sorted, vec![0, 1, 2, 3, 4]);
    }
}
