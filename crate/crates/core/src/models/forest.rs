//! Bagged regression trees with random feature subsets at each split.

use ndarray::{Array1, ArrayView1, ArrayView2};
use rand::seq::index::sample;
use rand::Rng;
use rayon::prelude::*;

use super::spec::RfConfig;
use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::scalar::Scalar;
use crate::seeds;

#[derive(Clone, Debug, PartialEq)]
pub enum Node<F> {
    Leaf(F),
    Split {
        column: usize,
        threshold: F,
        left: usize,
        right: usize,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Tree<F> {
    /// Node 0 is the root.
    pub nodes: Vec<Node<F>>,
}

impl<F: Scalar> Tree<F> {
    pub fn predict_row(&self, row: ArrayView1<F>) -> F {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Leaf(v) => return *v,
                Node::Split {
                    column,
                    threshold,
                    left,
                    right,
                } => at = if row[*column] <= *threshold { *left } else { *right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go<F>(nodes: &[Node<F>], at: usize) -> usize {
            match &nodes[at] {
                Node::Leaf(_) => 0,
                Node::Split { left, right, .. } => 1 + go(nodes, *left).max(go(nodes, *right)),
            }
        }
        go(&self.nodes, 0)
    }
}

/// Best axis-aligned split of `rows` over `columns`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SplitChoice<F> {
    pub column: usize,
    /// Rows with `x ≤ threshold` go left; thresholds sit midway between
    /// consecutive distinct values.
    pub threshold: F,
    /// Decrease in the node's residual sum of squares.
    pub gain: F,
}

/// Exhaustive variance-reduction split. Ties keep the lowest column index,
/// then the lowest threshold. `None` when no column separates the rows.
pub fn best_split<F: Scalar>(x: ArrayView2<F>, y: ArrayView1<F>, rows: &[usize], columns: &[usize]) -> Option<SplitChoice<F>> {
    let n = rows.len();
    if n < 2 {
        return None;
    }
    let total: F = rows.iter().map(|&r| y[r]).sum();
    let nf = F::of_usize(n);
    let parent = total * total / nf;
    let mut cols = columns.to_vec();
    cols.sort_unstable();
    let mut best: Option<(SplitChoice<F>, F)> = None;
    let mut pairs: Vec<(F, F)> = Vec::with_capacity(n);
    for &c in &cols {
        pairs.clear();
        pairs.extend(rows.iter().map(|&r| (x[[r, c]], y[r])));
        pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite design"));
        let mut left_sum = F::zero();
        for k in 0..n - 1 {
            left_sum += pairs[k].1;
            if pairs[k].0 == pairs[k + 1].0 {
                continue;
            }
            let nl = F::of_usize(k + 1);
            let nr = F::of_usize(n - k - 1);
            let right_sum = total - left_sum;
            let score = left_sum * left_sum / nl + right_sum * right_sum / nr;
            if best.is_none_or(|(_, s)| score > s) {
                let threshold = (pairs[k].0 + pairs[k + 1].0) / F::of(2.0);
                best = Some((
                    SplitChoice {
                        column: c,
                        threshold,
                        gain: score - parent,
                    },
                    score,
                ));
            }
        }
    }
    best.map(|(s, _)| s)
}

struct Grower<'a, F, R> {
    x: ArrayView2<'a, F>,
    y: ArrayView1<'a, F>,
    m_try: usize,
    min_node_size: usize,
    rng: &'a mut R,
    nodes: Vec<Node<F>>,
}

impl<F: Scalar, R: Rng> Grower<'_, F, R> {
    fn grow(&mut self, rows: Vec<usize>) -> usize {
        let id = self.nodes.len();
        let mean = rows.iter().map(|&r| self.y[r]).sum::<F>() / F::of_usize(rows.len());
        self.nodes.push(Node::Leaf(mean));
        let pure = rows.iter().all(|&r| self.y[r] == self.y[rows[0]]);
        if rows.len() <= self.min_node_size || pure {
            return id;
        }
        let p = self.x.ncols();
        let cols = sample(self.rng, p, self.m_try).into_vec();
        let Some(split) = best_split(self.x, self.y, &rows, &cols) else {
            return id;
        };
        let (l, r): (Vec<usize>, Vec<usize>) = rows
            .into_iter()
            .partition(|&i| self.x[[i, split.column]] <= split.threshold);
        let left = self.grow(l);
        let right = self.grow(r);
        self.nodes[id] = Node::Split {
            column: split.column,
            threshold: split.threshold,
            left,
            right,
        };
        id
    }
}

/// Grows one tree on `rows` (possibly repeated, as in a bootstrap sample).
pub fn grow_tree<F: Scalar, R: Rng>(x: ArrayView2<F>, y: ArrayView1<F>, rows: Vec<usize>, m_try: usize, min_node_size: usize, rng: &mut R) -> Tree<F> {
    let mut g = Grower {
        x,
        y,
        m_try,
        min_node_size,
        rng,
        nodes: Vec::new(),
    };
    g.grow(rows);
    Tree { nodes: g.nodes }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ForestFit<F> {
    pub trees: Vec<Tree<F>>,
    pub m_try: usize,
}

impl<F: Scalar> ForestFit<F> {
    pub fn predict(&self, x: ArrayView2<F>) -> Array1<F> {
        let b = F::of_usize(self.trees.len());
        x.rows()
            .into_iter()
            .map(|row| self.trees.iter().map(|t| t.predict_row(row)).sum::<F>() / b)
            .collect()
    }
}

pub fn resolve_m_try(cfg: &RfConfig, p: usize) -> Result<usize> {
    let m = cfg.m_try.unwrap_or_else(|| ((p as f64).sqrt().floor() as usize).max(1));
    if m == 0 || m > p {
        return Err(Error::Config(format!("m_try must lie in 1..={p}, got {m}")));
    }
    Ok(m)
}

pub fn fit_random_forest<F: Scalar>(m: &FeatureMatrix<F>, cfg: &RfConfig) -> Result<ForestFit<F>> {
    let (n, p) = m.x.dim();
    if n < cfg.min_node_size.max(1) {
        return Err(Error::History {
            needed: cfg.min_node_size,
            available: n,
        });
    }
    if cfg.n_trees == 0 || cfg.min_node_size == 0 {
        return Err(Error::Config("random forest needs n_trees, min_node_size >= 1".into()));
    }
    let m_try = resolve_m_try(cfg, p)?;
    let trees = (0..cfg.n_trees)
        .into_par_iter()
        .map(|b| {
            let mut rng = seeds::rng(seeds::derive(cfg.seed, b as u64));
            let rows: Vec<usize> = if cfg.bootstrap {
                (0..n).map(|_| rng.random_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            grow_tree(m.x.view(), m.target.view(), rows, m_try, cfg.min_node_size, &mut rng)
        })
        .collect();
    Ok(ForestFit { trees, m_try })
}
