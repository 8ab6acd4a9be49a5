//! Exact discrete optimal transport by primal network simplex.
//!
//! The bipartite transportation graph is augmented with an artificial root:
//! every source holds an arc to the root and the root an arc to every sink,
//! all priced far above any real arc, so the star over the root is a feasible
//! starting basis and the basis stays a spanning tree throughout. The tree is
//! stored in parent-pointer arrays (parent, predecessor arc, arc orientation,
//! flow on the predecessor arc); duals and depths are recomputed from the
//! root after every pivot, so no incremental dual drift accumulates.
//!
//! Entering arcs come from a wrapping block scan of the real arcs (most
//! negative reduced cost within the first block that has one). The leaving
//! arc is the last blocking arc met when walking the cycle from the apex in
//! the entering arc's direction, which keeps the basis strongly feasible and
//! rules out cycling even through the many degenerate pivots that tied costs
//! (e.g. indicator costs) produce.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use ndarray::{Array2, ArrayView2};

pub(crate) struct ExactPlan<T> {
    pub value: T,
    pub plan: Array2<T>,
}

/// Minimum-cost coupling of `a` and `b` under `c`. Marginals must be
/// strictly positive and sum to the same total (up to rounding dust; any
/// imbalance stays parked on the root arcs and never reaches the plan).
pub(crate) fn transport_simplex<T: Scalar>(
    c: &ArrayView2<T>,
    a: &[T],
    b: &[T],
) -> Result<ExactPlan<T>> {
    let (n, m) = c.dim();
    debug_assert!(n == a.len() && m == b.len());
    let nm = n * m;
    let nodes = n + m + 1;
    let root = n + m;

    let mut max_c = T::zero();
    for &v in c.iter() {
        if v > max_c {
            max_c = v;
        }
    }
    // Artificial arcs priced above any simple path of real arcs.
    let big = (max_c + T::one()) * T::from_f64_c(nodes as f64);
    // Pricing tolerance: covers rounding in dual sums along tree paths.
    let eps = (T::one() + max_c) * T::epsilon() * T::from_f64_c(64.0 + nodes as f64);

    // Predecessor-arc ids: real arc i·m+j, artificial arc nm+v for node v.
    let mut par = vec![root; nodes];
    par[root] = usize::MAX;
    let mut pred_arc = vec![0usize; nodes];
    let mut pred_dir = vec![0i8; nodes]; // +1: arc points node→parent
    let mut flow = vec![T::zero(); nodes];
    for i in 0..n {
        pred_arc[i] = nm + i;
        pred_dir[i] = 1;
        flow[i] = a[i];
    }
    for j in 0..m {
        let v = n + j;
        pred_arc[v] = nm + v;
        pred_dir[v] = -1;
        flow[v] = b[j];
    }

    let mut depth = vec![0u32; nodes];
    let mut pot = vec![T::zero(); nodes];
    let mut head = vec![0usize; nodes + 1];
    let mut cursor = vec![0usize; nodes];
    let mut child = vec![0usize; nodes];
    let mut stack: Vec<usize> = Vec::with_capacity(nodes);
    refresh_tree(
        c, big, m, &par, &pred_arc, &pred_dir, &mut depth, &mut pot, &mut head, &mut cursor,
        &mut child, &mut stack,
    );

    let block = 64usize.max((nm as f64).sqrt() as usize);
    let mut scan_from = 0usize;
    let mut path_i: Vec<usize> = Vec::new();
    let mut path_j: Vec<usize> = Vec::new();

    let pivot_cap = 1000usize.saturating_mul(nodes).max(100_000);
    let mut pivots = 0usize;
    loop {
        if pivots >= pivot_cap {
            return Err(Error::NonConvergence {
                iterations: pivots,
                residual: f64::NAN,
            });
        }
        pivots += 1;

        // Entering arc: wrapping block scan over real arcs.
        let mut entering: Option<usize> = None;
        let mut best_red = -eps;
        let mut scanned = 0usize;
        let mut pos = scan_from;
        while scanned < nm {
            let chunk = block.min(nm - pos);
            for id in pos..pos + chunk {
                let i = id / m;
                let j = id % m;
                let red = c[[i, j]] + pot[i] - pot[n + j];
                if red < best_red {
                    best_red = red;
                    entering = Some(id);
                }
            }
            scanned += chunk;
            pos += chunk;
            if pos == nm {
                pos = 0;
            }
            if entering.is_some() {
                break;
            }
        }
        scan_from = pos;
        let Some(e) = entering else {
            break; // no reduced cost below −eps: optimal
        };
        let ei = e / m;
        let ej = n + e % m;

        // Cycle: walk both endpoints up to their common apex.
        path_i.clear();
        path_j.clear();
        let (mut x, mut y) = (ei, ej);
        while depth[x] > depth[y] {
            path_i.push(x);
            x = par[x];
        }
        while depth[y] > depth[x] {
            path_j.push(y);
            y = par[y];
        }
        while x != y {
            path_i.push(x);
            x = par[x];
            path_j.push(y);
            y = par[y];
        }

        // Blocking arcs, traversed from the apex in the entering direction:
        // down the source side (a node's arc opposes traversal when it points
        // at its parent), across the entering arc, up the sink side.
        let mut theta = T::infinity();
        let mut leaving: Option<(usize, bool)> = None; // (node, on source side)
        for &nd in path_i.iter().rev() {
            if pred_dir[nd] == 1 && flow[nd] <= theta {
                theta = flow[nd];
                leaving = Some((nd, true));
            }
        }
        for &nd in path_j.iter() {
            if pred_dir[nd] == -1 && flow[nd] <= theta {
                theta = flow[nd];
                leaving = Some((nd, false));
            }
        }
        let (leave, on_source_side) =
            leaving.expect("transportation cycle always has a blocking arc");

        for &nd in path_i.iter() {
            if pred_dir[nd] == 1 {
                flow[nd] -= theta;
            } else {
                flow[nd] += theta;
            }
        }
        for &nd in path_j.iter() {
            if pred_dir[nd] == -1 {
                flow[nd] -= theta;
            } else {
                flow[nd] += theta;
            }
        }

        // Re-root the detached subtree at the entering arc's endpoint inside
        // it, reversing predecessor records up to the leaving arc's owner.
        let (e_in, e_out, enter_dir) = if on_source_side {
            (ei, ej, 1i8)
        } else {
            (ej, ei, -1i8)
        };
        let mut cur = e_in;
        let mut new_par = e_out;
        let mut new_arc = e;
        let mut new_dir = enter_dir;
        let mut new_flow = theta;
        loop {
            let old_par = par[cur];
            let old_arc = pred_arc[cur];
            let old_dir = pred_dir[cur];
            let old_flow = flow[cur];
            par[cur] = new_par;
            pred_arc[cur] = new_arc;
            pred_dir[cur] = new_dir;
            flow[cur] = new_flow;
            if cur == leave {
                break;
            }
            new_par = cur;
            new_arc = old_arc;
            new_dir = -old_dir;
            new_flow = old_flow;
            cur = old_par;
        }

        refresh_tree(
            c, big, m, &par, &pred_arc, &pred_dir, &mut depth, &mut pot, &mut head, &mut cursor,
            &mut child, &mut stack,
        );
    }

    let mut plan = Array2::zeros((n, m));
    let mut value = T::zero();
    for v in 0..nodes - 1 {
        let id = pred_arc[v];
        if id < nm {
            let f = if flow[v] > T::zero() { flow[v] } else { T::zero() };
            let (i, j) = (id / m, id % m);
            plan[[i, j]] = f;
            value += f * c[[i, j]];
        }
    }
    Ok(ExactPlan { value, plan })
}

/// Rebuilds depths and duals from the root over the current tree. Child
/// lists are assembled by counting sort into `head`/`child`; `cursor` and
/// `stack` are reusable scratch.
#[allow(clippy::too_many_arguments)]
fn refresh_tree<T: Scalar>(
    c: &ArrayView2<T>,
    big: T,
    m: usize,
    par: &[usize],
    pred_arc: &[usize],
    pred_dir: &[i8],
    depth: &mut [u32],
    pot: &mut [T],
    head: &mut [usize],
    cursor: &mut [usize],
    child: &mut [usize],
    stack: &mut Vec<usize>,
) {
    let nodes = par.len();
    let root = nodes - 1;
    let nm = (nodes - 1 - m) * m;
    for h in head.iter_mut() {
        *h = 0;
    }
    for v in 0..nodes {
        if v != root {
            head[par[v] + 1] += 1;
        }
    }
    for i in 0..nodes {
        head[i + 1] += head[i];
    }
    cursor.copy_from_slice(&head[..nodes]);
    for v in 0..nodes {
        if v != root {
            let p = par[v];
            child[cursor[p]] = v;
            cursor[p] += 1;
        }
    }

    depth[root] = 0;
    pot[root] = T::zero();
    stack.clear();
    stack.push(root);
    while let Some(u) = stack.pop() {
        for idx in head[u]..head[u + 1] {
            let v = child[idx];
            depth[v] = depth[u] + 1;
            let id = pred_arc[v];
            let cc = if id < nm { c[[id / m, id % m]] } else { big };
            pot[v] = if pred_dir[v] == 1 { pot[u] - cc } else { pot[u] + cc };
            stack.push(v);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, StreamKind};
    use approx::assert_abs_diff_eq;
    use itertools::Itertools;
    use ndarray::array;
    use rand::Rng;

    fn uniform(n: usize) -> Vec<f64> {
        vec![1.0 / n as f64; n]
    }

    /// Exact square-instance oracle: best permutation matching.
    fn permutation_value(c: &Array2<f64>) -> f64 {
        let n = c.nrows();
        (0..n)
            .permutations(n)
            .map(|p| p.iter().enumerate().map(|(i, &j)| c[[i, j]]).sum::<f64>() / n as f64)
            .fold(f64::INFINITY, f64::min)
    }

    /// Exact rational-marginal oracle: exhaustive search over integer
    /// couplings with the given row/column counts (total mass q).
    fn integer_coupling_value(c: &Array2<f64>, rows: &[u32], cols: &[u32], q: u32) -> f64 {
        fn go(
            c: &Array2<f64>,
            rows: &[u32],
            rem_cols: &mut [u32],
            i: usize,
            acc: f64,
            best: &mut f64,
        ) {
            if i == rows.len() {
                if acc < *best {
                    *best = acc;
                }
                return;
            }
            // Distribute rows[i] units over columns within remaining capacity.
            fn split(
                c: &Array2<f64>,
                rows: &[u32],
                rem_cols: &mut [u32],
                i: usize,
                j: usize,
                left: u32,
                acc: f64,
                best: &mut f64,
            ) {
                if acc >= *best {
                    return;
                }
                if j == rem_cols.len() {
                    if left == 0 {
                        go(c, rows, rem_cols, i + 1, acc, best);
                    }
                    return;
                }
                let cap = rem_cols[j].min(left);
                for take in 0..=cap {
                    rem_cols[j] -= take;
                    split(
                        c,
                        rows,
                        rem_cols,
                        i,
                        j + 1,
                        left - take,
                        acc + f64::from(take) * c[[i, j]],
                        best,
                    );
                    rem_cols[j] += take;
                }
            }
            split(c, rows, rem_cols, i, 0, rows[i], acc, best);
        }
        let mut best = f64::INFINITY;
        let mut rem = cols.to_vec();
        go(c, rows, &mut rem, 0, 0.0, &mut best);
        best / f64::from(q)
    }

    #[test]
    fn single_atom_moves_all_mass() {
        let c = array![[3.25]];
        let out = transport_simplex(&c.view(), &[1.0], &[1.0]).unwrap();
        assert_abs_diff_eq!(out.value, 3.25, epsilon = 1e-15);
        assert_abs_diff_eq!(out.plan[[0, 0]], 1.0, epsilon = 1e-15);
    }

    #[test]
    fn two_by_two_prefers_diagonal() {
        let c = array![[0.0, 1.0], [1.0, 0.0]];
        let out = transport_simplex(&c.view(), &uniform(2), &uniform(2)).unwrap();
        assert_abs_diff_eq!(out.value, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(out.plan[[0, 0]], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(out.plan[[1, 1]], 0.5, epsilon = 1e-15);
    }

    #[test]
    fn tied_indicator_costs_terminate_and_hit_zero() {
        // c[i,j] = 1 when i < j: identity coupling costs zero, and the heavy
        // tie structure exercises degenerate pivots.
        let n = 6;
        let c = Array2::from_shape_fn((n, n), |(i, j)| if i < j { 1.0 } else { 0.0 });
        let out = transport_simplex(&c.view(), &uniform(n), &uniform(n)).unwrap();
        assert_abs_diff_eq!(out.value, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn matches_permutation_oracle_on_random_square_instances() {
        let mut rng = stream(41, StreamKind::Fixture, 0, 0);
        for trial in 0..40 {
            let n = 1 + trial % 6;
            let c = Array2::from_shape_fn((n, n), |_| rng.gen_range(0.0..5.0));
            let want = permutation_value(&c);
            let got = transport_simplex(&c.view(), &uniform(n), &uniform(n)).unwrap();
            assert!(
                (got.value - want).abs() <= 1e-12 * (1.0 + want.abs()),
                "n={n} got={} want={want}",
                got.value
            );
        }
    }

    #[test]
    fn matches_integer_coupling_oracle_on_weighted_rectangles() {
        let mut rng = stream(42, StreamKind::Fixture, 0, 0);
        for (n, m, q) in [(2usize, 3usize, 6u32), (3, 2, 5), (3, 3, 6), (4, 2, 7)] {
            for _ in 0..6 {
                let c = Array2::from_shape_fn((n, m), |_| rng.gen_range(0.0..3.0));
                // Random positive integer marginals summing to q on each side.
                let mut rows = vec![1u32; n];
                for _ in 0..(q - n as u32) {
                    let i = rng.gen_range(0..n);
                    rows[i] += 1;
                }
                let mut cols = vec![1u32; m];
                for _ in 0..(q - m as u32) {
                    let j = rng.gen_range(0..m);
                    cols[j] += 1;
                }
                let qf = f64::from(q);
                let a: Vec<f64> = rows.iter().map(|&r| f64::from(r) / qf).collect();
                let b: Vec<f64> = cols.iter().map(|&s| f64::from(s) / qf).collect();
                let want = integer_coupling_value(&c, &rows, &cols, q);
                let got = transport_simplex(&c.view(), &a, &b).unwrap();
                assert!(
                    (got.value - want).abs() <= 1e-12 * (1.0 + want.abs()),
                    "{n}x{m} got={} want={want}",
                    got.value
                );
            }
        }
    }

    #[test]
    fn plan_marginals_are_exact() {
        let mut rng = stream(43, StreamKind::Fixture, 0, 0);
        let (n, m) = (7, 5);
        let c = Array2::from_shape_fn((n, m), |_| rng.gen_range(0.0..2.0));
        let a: Vec<f64> = {
            let raw: Vec<f64> = (0..n).map(|_| rng.gen_range(0.1..1.0)).collect();
            let s: f64 = raw.iter().sum();
            raw.iter().map(|v| v / s).collect()
        };
        let b: Vec<f64> = {
            let raw: Vec<f64> = (0..m).map(|_| rng.gen_range(0.1..1.0)).collect();
            let s: f64 = raw.iter().sum();
            raw.iter().map(|v| v / s).collect()
        };
        let out = transport_simplex(&c.view(), &a, &b).unwrap();
        for i in 0..n {
            let r: f64 = (0..m).map(|j| out.plan[[i, j]]).sum();
            assert_abs_diff_eq!(r, a[i], epsilon = 1e-12);
        }
        for j in 0..m {
            let s: f64 = (0..n).map(|i| out.plan[[i, j]]).sum();
            assert_abs_diff_eq!(s, b[j], epsilon = 1e-12);
        }
    }
}
