//! Precomputed geometry for the column-wise search.
//!
//! The 2D DCT factors as `M = A (x) B` with `A` the 1D transform over rows
//! and `B` over columns. For `Z = E - K` the quantizer input error is
//! `A Z B^T`, so with `V = A Z` every row `r` of `V` must lie in the zonotope
//! `C_r = { B^T w : |w_s| <= q_rs / 2 }`. A plan stores, for each search
//! depth, the facets of the projection of every `C_r` onto the columns
//! assigned so far, together with the column visiting order.

use std::cell::RefCell;
use std::collections::HashMap;
use std::rc::Rc;

use crate::transform::{dct_1d_matrix, BlockShape, QuantTable};

/// Normals shorter than this are treated as degenerate.
const DEGENERATE: f64 = 1e-9;
/// Above this many columns the visiting order is the natural one.
const ORDER_SEARCH_LIMIT: usize = 8;

/// A facet pair `|normal . v| <= support[r]` of a projected zonotope.
#[derive(Debug, Clone)]
pub(crate) struct Facet {
    pub normal: Vec<f64>,
    pub support: Vec<f64>,
}

#[derive(Debug, Clone)]
pub(crate) struct Level {
    /// Block column assigned at this depth.
    pub col: usize,
    /// Facets over the columns of depths `0..=d` whose last normal
    /// component is nonzero.
    pub facets: Vec<Facet>,
}

#[derive(Debug)]
pub(crate) struct Plan {
    pub rows: usize,
    pub cols: usize,
    /// The row transform `A`, row-major `rows x rows`.
    pub a: Vec<f64>,
    pub levels: Vec<Level>,
    /// Absolute slack on every pruning test.
    pub tol: f64,
}

thread_local! {
    static PLANS: RefCell<HashMap<(BlockShape, QuantTable), Rc<Plan>>> =
        RefCell::new(HashMap::new());
}

impl Plan {
    /// The plan for `shape` and `quant`, cached per thread.
    pub fn cached(shape: BlockShape, quant: &QuantTable) -> Rc<Plan> {
        PLANS.with(|plans| {
            Rc::clone(
                plans
                    .borrow_mut()
                    .entry((shape, quant.clone()))
                    .or_insert_with(|| Rc::new(Plan::new(shape, quant))),
            )
        })
    }

    pub fn new(shape: BlockShape, quant: &QuantTable) -> Self {
        let (rows, cols) = (shape.rows(), shape.cols());
        let b = dct_1d_matrix(cols);
        let half: Vec<f64> = quant.values().iter().map(|&q| 0.5 * q as f64).collect();
        let order = column_order(&b, &half, rows, cols);

        let levels = (0..cols)
            .map(|d| {
                let gens: Vec<Vec<f64>> = (0..cols)
                    .map(|s| order[..=d].iter().map(|&j| b[s * cols + j]).collect())
                    .collect();
                let facets = zonotope_normals(&gens, d + 1)
                    .into_iter()
                    .filter(|h| h[d].abs() > DEGENERATE)
                    .map(|h| {
                        let support = (0..rows)
                            .map(|r| {
                                gens.iter()
                                    .enumerate()
                                    .map(|(s, g)| half[r * cols + s] * dot(&h, g).abs())
                                    .sum()
                            })
                            .collect();
                        Facet { normal: h, support }
                    })
                    .collect();
                Level {
                    col: order[d],
                    facets,
                }
            })
            .collect();

        let qmax = quant.values().iter().copied().max().unwrap_or(1) as f64;
        Self {
            rows,
            cols,
            a: dct_1d_matrix(rows),
            levels,
            // Quantizer tie snapping lets a true antecedent sit up to 1e-9
            // (in quantized units) outside the closed box.
            tol: 1e-7 * qmax,
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Determinant by Gaussian elimination with partial pivoting.
fn det(mut m: Vec<f64>, n: usize) -> f64 {
    let mut out = 1.0;
    for c in 0..n {
        let p = (c..n)
            .max_by(|&x, &y| m[x * n + c].abs().total_cmp(&m[y * n + c].abs()))
            .unwrap_or(c);
        if m[p * n + c] == 0.0 {
            return 0.0;
        }
        if p != c {
            for k in 0..n {
                m.swap(p * n + k, c * n + k);
            }
            out = -out;
        }
        let pivot = m[c * n + c];
        out *= pivot;
        for r in c + 1..n {
            let f = m[r * n + c] / pivot;
            for k in c..n {
                m[r * n + k] -= f * m[c * n + k];
            }
        }
    }
    out
}

/// All `k`-subsets of `0..n` in lexicographic order.
fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur: Vec<usize> = (0..k).collect();
    if k > n {
        return out;
    }
    loop {
        out.push(cur.clone());
        let Some(i) = (0..k).rev().find(|&i| cur[i] < n - k + i) else {
            return out;
        };
        cur[i] += 1;
        for t in i + 1..k {
            cur[t] = cur[t - 1] + 1;
        }
    }
}

/// Unit facet normals (one per parallel pair) of the zonotope generated by
/// `gens` in `dim` dimensions.
fn zonotope_normals(gens: &[Vec<f64>], dim: usize) -> Vec<Vec<f64>> {
    if dim == 1 {
        return vec![vec![1.0]];
    }
    let mut out: Vec<Vec<f64>> = Vec::new();
    for set in subsets(gens.len(), dim - 1) {
        // Generalized cross product of the chosen generators.
        let mut h: Vec<f64> = (0..dim)
            .map(|skip| {
                let minor: Vec<f64> = set
                    .iter()
                    .flat_map(|&s| (0..dim).filter(move |&t| t != skip).map(move |t| gens[s][t]))
                    .collect();
                let sign = if skip % 2 == 0 { 1.0 } else { -1.0 };
                sign * det(minor, dim - 1)
            })
            .collect();
        let norm = dot(&h, &h).sqrt();
        if norm < DEGENERATE {
            continue;
        }
        let lead = h.iter().copied().find(|x| x.abs() > DEGENERATE).unwrap_or(1.0);
        let scale = lead.signum() / norm;
        h.iter_mut().for_each(|x| *x *= scale);
        let duplicate = out
            .iter()
            .any(|g| g.iter().zip(&h).all(|(x, y)| (x - y).abs() < DEGENERATE));
        if !duplicate {
            out.push(h);
        }
    }
    out
}

/// Volume of the projection of every row zonotope onto `set`, multiplied
/// over rows: the expected number of lattice points at that depth.
fn projected_volume(b: &[f64], half: &[f64], rows: usize, cols: usize, set: &[usize]) -> f64 {
    let d = set.len();
    let mut total = 0.0f64;
    let dets: Vec<(Vec<usize>, f64)> = subsets(cols, d)
        .into_iter()
        .map(|gens| {
            let m: Vec<f64> = gens
                .iter()
                .flat_map(|&s| set.iter().map(move |&j| b[s * cols + j]))
                .collect();
            let v = det(m, d).abs();
            (gens, v)
        })
        .collect();
    for r in 0..rows {
        let vol: f64 = dets
            .iter()
            .map(|(gens, v)| v * gens.iter().map(|&s| 2.0 * half[r * cols + s]).product::<f64>())
            .sum();
        total += vol.max(f64::MIN_POSITIVE).ln();
    }
    total.min(600.0).exp()
}

/// Column order minimizing the summed projected volumes over all depths.
fn column_order(b: &[f64], half: &[f64], rows: usize, cols: usize) -> Vec<usize> {
    if cols > ORDER_SEARCH_LIMIT {
        return (0..cols).collect();
    }
    let full = 1usize << cols;
    let mut best = vec![f64::INFINITY; full];
    let mut last = vec![0usize; full];
    best[0] = 0.0;
    for mask in 1..full {
        let set: Vec<usize> = (0..cols).filter(|j| mask >> j & 1 == 1).collect();
        let cost = projected_volume(b, half, rows, cols, &set);
        for &j in &set {
            let prev = best[mask & !(1 << j)] + cost;
            if prev < best[mask] {
                best[mask] = prev;
                last[mask] = j;
            }
        }
    }
    let mut order = Vec::with_capacity(cols);
    let mut mask = full - 1;
    while mask != 0 {
        order.push(last[mask]);
        mask &= !(1 << last[mask]);
    }
    order.reverse();
    order
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn subsets_enumerate_combinations() {
        assert_eq!(subsets(4, 2).len(), 6);
        assert_eq!(subsets(3, 0), vec![Vec::<usize>::new()]);
        assert_eq!(subsets(3, 3), vec![vec![0, 1, 2]]);
        assert!(subsets(2, 3).is_empty());
    }

    #[test]
    fn determinant() {
        assert!((det(vec![2.0, 1.0, 1.0, 3.0], 2) - 5.0).abs() < 1e-12);
        assert_eq!(det(vec![1.0, 2.0, 2.0, 4.0], 2), 0.0);
    }

    #[test]
    fn square_normals() {
        // The unit square has two facet directions.
        let gens = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let normals = zonotope_normals(&gens, 2);
        assert_eq!(normals.len(), 2);
    }

    #[test]
    fn last_level_is_the_exact_box() {
        let shape = BlockShape::new(4, 4).unwrap();
        let plan = Plan::new(shape, &QuantTable::qf100(shape));
        let last = plan.levels.last().unwrap();
        assert_eq!(last.facets.len(), 4);
        for f in &last.facets {
            assert!(f.support.iter().all(|s| (s - 0.5).abs() < 1e-12));
        }
        let mut cols: Vec<usize> = plan.levels.iter().map(|l| l.col).collect();
        cols.sort_unstable();
        assert_eq!(cols, vec![0, 1, 2, 3]);
    }

    #[test]
    fn first_level_is_the_column_norm() {
        let shape = BlockShape::new(3, 5).unwrap();
        let plan = Plan::new(shape, &QuantTable::qf100(shape));
        let level = &plan.levels[0];
        let b = dct_1d_matrix(5);
        let norm: f64 = (0..5).map(|s| b[s * 5 + level.col].abs()).sum();
        assert_eq!(level.facets.len(), 1);
        assert!((level.facets[0].support[0] - 0.5 * norm).abs() < 1e-12);
    }
}
