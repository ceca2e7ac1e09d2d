//! Binary decision trees grown level by level over presorted feature columns.
//!
//! The same grower backs CART classification (Gini) and the squared-error
//! regression trees used by gradient boosting. Candidate splits are scanned in
//! feature order, then ascending value; the first strictly best split wins.

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Leaf {
        value: Vec<f64>,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    /// Leaf value reached by `row` (`x <= threshold` goes left).
    pub fn leaf<'a>(&'a self, row: &[f64]) -> &'a [f64] {
        let mut id = 0;
        loop {
            match &self.nodes[id] {
                Node::Leaf { value } => return value,
                Node::Split { feature, threshold, left, right } => {
                    id = if row[*feature] <= *threshold { *left } else { *right };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(t: &Tree, id: usize) -> usize {
            match &t.nodes[id] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(t, *left).max(walk(t, *right)),
            }
        }
        walk(self, 0)
    }
}

/// Row indices sorted by each feature column (ties by index).
pub struct Presorted {
    order: Vec<Vec<usize>>,
}

impl Presorted {
    pub fn new(x: ArrayView2<'_, f64>) -> Self {
        let n = x.nrows();
        let order = (0..x.ncols())
            .map(|f| {
                let mut idx: Vec<usize> = (0..n).collect();
                idx.sort_by(|&a, &b| x[[a, f]].total_cmp(&x[[b, f]]).then(a.cmp(&b)));
                idx
            })
            .collect();
        Self { order }
    }
}

/// Split quality bookkeeping; larger scores are better.
pub trait Criterion {
    type Acc: Clone;
    fn zero(&self) -> Self::Acc;
    fn add(&self, acc: &mut Self::Acc, sample: usize);
    fn count(acc: &Self::Acc) -> usize;
    /// Score of splitting `total` into `left` and the remainder.
    fn split_score(&self, left: &Self::Acc, total: &Self::Acc) -> f64;
    /// Score of leaving `total` unsplit.
    fn node_score(&self, total: &Self::Acc) -> f64;
}

/// Gini impurity over class indices. Scores are `Σ_side Σ_k n_k² / n_side`,
/// which is `n - Σ n_side · gini_side`.
pub struct Gini<'a> {
    pub labels: &'a [usize],
    pub n_classes: usize,
}

#[derive(Clone)]
pub struct ClassCounts {
    counts: Vec<usize>,
    n: usize,
}

impl Criterion for Gini<'_> {
    type Acc = ClassCounts;

    fn zero(&self) -> ClassCounts {
        ClassCounts {
            counts: vec![0; self.n_classes],
            n: 0,
        }
    }

    fn add(&self, acc: &mut ClassCounts, sample: usize) {
        acc.counts[self.labels[sample]] += 1;
        acc.n += 1;
    }

    fn count(acc: &ClassCounts) -> usize {
        acc.n
    }

    fn split_score(&self, left: &ClassCounts, total: &ClassCounts) -> f64 {
        let nl = left.n as f64;
        let nr = (total.n - left.n) as f64;
        let (mut sl, mut sr) = (0.0, 0.0);
        for (l, t) in left.counts.iter().zip(&total.counts) {
            sl += (*l as f64).powi(2);
            sr += ((t - l) as f64).powi(2);
        }
        sl / nl + sr / nr
    }

    fn node_score(&self, total: &ClassCounts) -> f64 {
        total.counts.iter().map(|&c| (c as f64).powi(2)).sum::<f64>() / total.n as f64
    }
}

/// Squared error on real targets. Scores are `Σ_side s_side² / n_side`.
pub struct SquaredError<'a> {
    pub targets: &'a [f64],
}

#[derive(Clone)]
pub struct SumCount {
    sum: f64,
    n: usize,
}

impl Criterion for SquaredError<'_> {
    type Acc = SumCount;

    fn zero(&self) -> SumCount {
        SumCount { sum: 0.0, n: 0 }
    }

    fn add(&self, acc: &mut SumCount, sample: usize) {
        acc.sum += self.targets[sample];
        acc.n += 1;
    }

    fn count(acc: &SumCount) -> usize {
        acc.n
    }

    fn split_score(&self, left: &SumCount, total: &SumCount) -> f64 {
        let sr = total.sum - left.sum;
        left.sum * left.sum / left.n as f64 + sr * sr / (total.n - left.n) as f64
    }

    fn node_score(&self, total: &SumCount) -> f64 {
        total.sum * total.sum / total.n as f64
    }
}

pub struct GrowParams {
    pub max_depth: usize,
    pub min_leaf: usize,
}

struct Frontier<A> {
    node: usize,
    depth: usize,
    members: Vec<usize>,
    total: A,
    splittable: bool,
}

/// Grows a tree on `samples` (row indices of `x`). `leaf_value` maps the
/// members of a finished leaf to its stored value.
pub fn grow<C, L>(
    x: ArrayView2<'_, f64>,
    samples: &[usize],
    presorted: &Presorted,
    criterion: &C,
    params: &GrowParams,
    leaf_value: L,
) -> Tree
where
    C: Criterion,
    L: Fn(&[usize]) -> Vec<f64>,
{
    let min_leaf = params.min_leaf.max(1);
    let n_all = x.nrows();
    let mut slot_of: Vec<Option<usize>> = vec![None; n_all];
    let mut nodes: Vec<Node> = vec![Node::Leaf { value: Vec::new() }];

    let make = |node: usize, depth: usize, members: Vec<usize>| {
        let mut total = criterion.zero();
        for &i in &members {
            criterion.add(&mut total, i);
        }
        let n = members.len();
        Frontier {
            node,
            depth,
            splittable: depth < params.max_depth && n >= 2 * min_leaf,
            members,
            total,
        }
    };
    let mut frontier = vec![make(0, 0, samples.to_vec())];

    while !frontier.is_empty() {
        for (s, fr) in frontier.iter().enumerate() {
            for &i in &fr.members {
                slot_of[i] = Some(s);
            }
        }
        // (score, feature, threshold)
        let mut best: Vec<Option<(f64, usize, f64)>> = vec![None; frontier.len()];
        if frontier.iter().any(|f| f.splittable) {
            let mut left: Vec<C::Acc> = Vec::with_capacity(frontier.len());
            let mut last: Vec<f64> = vec![f64::NAN; frontier.len()];
            for (f, order) in presorted.order.iter().enumerate() {
                left.clear();
                left.extend(frontier.iter().map(|_| criterion.zero()));
                last.iter_mut().for_each(|v| *v = f64::NAN);
                for &i in order {
                    let Some(s) = slot_of[i] else { continue };
                    let fr = &frontier[s];
                    if !fr.splittable {
                        continue;
                    }
                    let v = x[[i, f]];
                    let nl = C::count(&left[s]);
                    let nt = C::count(&fr.total);
                    if nl >= min_leaf && nt - nl >= min_leaf && v > last[s] {
                        let score = criterion.split_score(&left[s], &fr.total);
                        if best[s].is_none_or(|b| score > b.0) {
                            let mut thr = last[s] + (v - last[s]) / 2.0;
                            if thr >= v {
                                thr = last[s];
                            }
                            best[s] = Some((score, f, thr));
                        }
                    }
                    criterion.add(&mut left[s], i);
                    last[s] = v;
                }
            }
        }

        let mut next = Vec::new();
        for (s, fr) in frontier.into_iter().enumerate() {
            for &i in &fr.members {
                slot_of[i] = None;
            }
            let parent = criterion.node_score(&fr.total);
            let improves = best[s]
                .filter(|b| fr.splittable && b.0 > parent + 1e-12 * parent.abs().max(1.0));
            match improves {
                Some((_, feature, threshold)) => {
                    let (l, r): (Vec<usize>, Vec<usize>) =
                        fr.members.iter().partition(|&&i| x[[i, feature]] <= threshold);
                    let left_id = nodes.len();
                    nodes.push(Node::Leaf { value: Vec::new() });
                    nodes.push(Node::Leaf { value: Vec::new() });
                    nodes[fr.node] = Node::Split {
                        feature,
                        threshold,
                        left: left_id,
                        right: left_id + 1,
                    };
                    next.push(make(left_id, fr.depth + 1, l));
                    next.push(make(left_id + 1, fr.depth + 1, r));
                }
                None => {
                    nodes[fr.node] = Node::Leaf {
                        value: leaf_value(&fr.members),
                    };
                }
            }
        }
        frontier = next;
    }
    Tree { nodes }
}

/// Class-distribution leaf for CART.
pub fn class_distribution(labels: &[usize], n_classes: usize, members: &[usize]) -> Vec<f64> {
    let mut p = vec![0.0; n_classes];
    for &i in members {
        p[labels[i]] += 1.0;
    }
    let n = members.len().max(1) as f64;
    p.iter_mut().for_each(|v| *v /= n);
    p
}
