//! Symmetric positive definite solves with a profile (skyline) Cholesky
//! factorization under a reverse Cuthill-McKee ordering.

use std::collections::{BTreeMap, VecDeque};

use crate::{Error, Result};

/// Lower triangle of a symmetric matrix, assembled entry by entry.
#[derive(Clone, Debug, Default)]
pub struct SymmetricBuilder {
    n: usize,
    rows: Vec<BTreeMap<usize, f64>>,
}

impl SymmetricBuilder {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            rows: vec![BTreeMap::new(); n],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Adds `v` to entry `(i, j)` and, implicitly, `(j, i)`.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let (r, c) = if i >= j { (i, j) } else { (j, i) };
        *self.rows[r].entry(c).or_insert(0.0) += v;
    }

    pub fn diagonal(&self, i: usize) -> f64 {
        self.rows[i].get(&i).copied().unwrap_or(0.0)
    }

    /// Replaces row and column `i` by the unit vector.
    pub fn clear_dof(&mut self, i: usize) {
        self.rows[i].clear();
        for r in &mut self.rows[i + 1..] {
            r.remove(&i);
        }
        self.rows[i].insert(i, 1.0);
    }

    fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n];
        for (i, row) in self.rows.iter().enumerate() {
            for &j in row.keys() {
                if j != i {
                    adj[i].push(j);
                    adj[j].push(i);
                }
            }
        }
        for a in &mut adj {
            a.sort_unstable();
            a.dedup();
        }
        adj
    }
}

/// Reverse Cuthill-McKee ordering: `perm[new] = old`.
pub fn reverse_cuthill_mckee(adj: &[Vec<usize>]) -> Vec<usize> {
    let n = adj.len();
    let mut order = Vec::with_capacity(n);
    let mut seen = vec![false; n];
    let mut by_degree: Vec<usize> = (0..n).collect();
    by_degree.sort_by_key(|&v| (adj[v].len(), v));
    for &start in &by_degree {
        if seen[start] {
            continue;
        }
        seen[start] = true;
        let mut queue = VecDeque::from([start]);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut next: Vec<usize> = adj[v].iter().copied().filter(|&w| !seen[w]).collect();
            next.sort_by_key(|&w| (adj[w].len(), w));
            for w in next {
                seen[w] = true;
                queue.push_back(w);
            }
        }
    }
    order.reverse();
    order
}

/// Cholesky factor `P A P^T = L L^T` in row-profile storage.
#[derive(Clone, Debug)]
pub struct ProfileCholesky {
    perm: Vec<usize>,
    first: Vec<usize>,
    start: Vec<usize>,
    values: Vec<f64>,
}

impl ProfileCholesky {
    pub fn factor(a: &SymmetricBuilder) -> Result<Self> {
        let n = a.dim();
        let perm = reverse_cuthill_mckee(&a.adjacency());
        let mut inv = vec![0; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        // Permuted lower-triangle entries per row.
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for (i, row) in a.rows.iter().enumerate() {
            for (&j, &v) in row {
                let (pi, pj) = (inv[i], inv[j]);
                let (r, c) = if pi >= pj { (pi, pj) } else { (pj, pi) };
                rows[r].push((c, v));
            }
        }
        let first: Vec<usize> = rows
            .iter()
            .enumerate()
            .map(|(i, r)| r.iter().map(|&(c, _)| c).min().unwrap_or(i).min(i))
            .collect();
        let mut start = Vec::with_capacity(n + 1);
        let mut total = 0;
        for i in 0..n {
            start.push(total);
            total += i - first[i] + 1;
        }
        start.push(total);
        let mut values = vec![0.0; total];
        for (i, r) in rows.iter().enumerate() {
            for &(c, v) in r {
                values[start[i] + c - first[i]] += v;
            }
        }

        for i in 0..n {
            for j in first[i]..=i {
                let lo = first[i].max(first[j]);
                let mut sum = values[start[i] + j - first[i]];
                let (ri, rj) = (start[i] - first[i], start[j] - first[j]);
                for k in lo..j {
                    sum -= values[ri + k] * values[rj + k];
                }
                if j < i {
                    values[ri + j] = sum / values[rj + j];
                } else {
                    if !(sum > 0.0) {
                        return Err(Error::Degenerate(format!(
                            "matrix not positive definite at pivot {i}"
                        )));
                    }
                    values[ri + i] = sum.sqrt();
                }
            }
        }
        Ok(Self {
            perm,
            first,
            start,
            values,
        })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.perm.len();
        let mut y: Vec<f64> = self.perm.iter().map(|&old| b[old]).collect();
        for i in 0..n {
            let ri = self.start[i] - self.first[i];
            let mut sum = y[i];
            for k in self.first[i]..i {
                sum -= self.values[ri + k] * y[k];
            }
            y[i] = sum / self.values[ri + i];
        }
        for i in (0..n).rev() {
            let ri = self.start[i] - self.first[i];
            y[i] /= self.values[ri + i];
            let yi = y[i];
            for k in self.first[i]..i {
                y[k] -= self.values[ri + k] * yi;
            }
        }
        let mut x = vec![0.0; n];
        for (new, &old) in self.perm.iter().enumerate() {
            x[old] = y[new];
        }
        x
    }

    /// Stored entries of the factor, a measure of fill.
    pub fn profile_size(&self) -> usize {
        self.values.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};
    use proptest::prelude::*;

    fn laplacian_grid(nx: usize, ny: usize) -> SymmetricBuilder {
        let id = |i: usize, j: usize| j * nx + i;
        let mut a = SymmetricBuilder::new(nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                a.add(id(i, j), id(i, j), 4.01);
                if i + 1 < nx {
                    a.add(id(i + 1, j), id(i, j), -1.0);
                }
                if j + 1 < ny {
                    a.add(id(i, j), id(i, j + 1), -1.0);
                }
            }
        }
        a
    }

    #[test]
    fn solves_grid_laplacian() {
        let a = laplacian_grid(17, 13);
        let f = ProfileCholesky::factor(&a).unwrap();
        let b: Vec<f64> = (0..a.dim()).map(|i| (i as f64 * 0.37).sin()).collect();
        let x = f.solve(&b);
        for i in 0..a.dim() {
            let mut ax = 0.0;
            for j in 0..a.dim() {
                let v = if i >= j {
                    a.rows[i].get(&j)
                } else {
                    a.rows[j].get(&i)
                };
                ax += v.copied().unwrap_or(0.0) * x[j];
            }
            assert!((ax - b[i]).abs() < 1e-12);
        }
        // The ordering keeps the profile near the grid bandwidth.
        assert!(f.profile_size() < a.dim() * 20);
    }

    #[test]
    fn rcm_is_a_permutation() {
        let a = laplacian_grid(5, 4);
        let mut p = reverse_cuthill_mckee(&a.adjacency());
        p.sort_unstable();
        assert_eq!(p, (0..20).collect::<Vec<_>>());
    }

    #[test]
    fn indefinite_matrices_are_rejected() {
        let mut a = SymmetricBuilder::new(2);
        a.add(0, 0, 1.0);
        a.add(1, 1, 1.0);
        a.add(0, 1, 2.0);
        assert!(ProfileCholesky::factor(&a).is_err());
    }

    #[test]
    fn cleared_dofs_become_identity() {
        let mut a = laplacian_grid(3, 3);
        a.clear_dof(4);
        let f = ProfileCholesky::factor(&a).unwrap();
        let mut b = vec![0.0; 9];
        b[4] = 2.5;
        let x = f.solve(&b);
        assert!((x[4] - 2.5).abs() < 1e-14);
        assert!(x.iter().enumerate().all(|(i, v)| i == 4 || v.abs() < 1e-14));
    }

    proptest! {
        #[test]
        fn matches_dense_solve(entries in prop::collection::vec((0usize..12, 0usize..12, -1.0f64..1.0), 0..40), seed in 0u32..100) {
            let n = 12;
            let mut a = SymmetricBuilder::new(n);
            let mut dense = DMatrix::<f64>::zeros(n, n);
            for &(i, j, v) in &entries {
                // Diagonally dominant by construction.
                a.add(i, j, v);
                dense[(i, j)] += v;
                if i != j {
                    dense[(j, i)] += v;
                }
            }
            for i in 0..n {
                a.add(i, i, 2.0 * entries.len() as f64 + 1.0);
                dense[(i, i)] += 2.0 * entries.len() as f64 + 1.0;
            }
            let b: Vec<f64> = (0..n).map(|i| ((i as u32 + seed) as f64).cos()).collect();
            let x = ProfileCholesky::factor(&a).unwrap().solve(&b);
            let expect = dense.lu().solve(&DVector::from_vec(b)).unwrap();
            for i in 0..n {
                prop_assert!((x[i] - expect[i]).abs() < 1e-10);
            }
        }
    }
}
