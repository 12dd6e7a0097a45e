//! CART classification tree on two classes with Gini impurity.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Class index of a success label.
pub const SUCCESS: u8 = 0;
/// Class index of a failure label.
pub const FAILURE: u8 = 1;

/// Tree node in its serialized form: `{f, t, l, r}` or `{leaf: [nS, nF]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TreeNode {
    Split {
        f: usize,
        t: f64,
        l: Box<TreeNode>,
        r: Box<TreeNode>,
    },
    Leaf {
        leaf: [u32; 2],
    },
}

impl TreeNode {
    /// Success fraction of the leaf reached by `row`.
    pub fn predict(&self, row: &[f64]) -> f64 {
        let mut node = self;
        loop {
            match node {
                TreeNode::Split { f, t, l, r } => node = if row[*f] <= *t { l } else { r },
                TreeNode::Leaf { leaf } => {
                    let total = leaf[0] + leaf[1];
                    return if total == 0 { 0.5 } else { leaf[0] as f64 / total as f64 };
                }
            }
        }
    }

    /// Class counts summed over all leaves: the training multiset's counts.
    pub fn class_totals(&self) -> [u32; 2] {
        match self {
            TreeNode::Leaf { leaf } => *leaf,
            TreeNode::Split { l, r, .. } => {
                let (a, b) = (l.class_totals(), r.class_totals());
                [a[0] + b[0], a[1] + b[1]]
            }
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Split { l, r, .. } => 1 + l.depth().max(r.depth()),
        }
    }

    pub fn n_splits(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Split { l, r, .. } => 1 + l.n_splits() + r.n_splits(),
        }
    }

    /// Adds each split's weighted Gini decrease, divided by the root sample
    /// count, to `out[feature]`.
    pub fn accumulate_importance(&self, out: &mut [f64]) {
        let root = self.class_totals();
        let n_root = (root[0] + root[1]) as f64;
        if n_root > 0.0 {
            self.importance_rec(out, n_root);
        }
    }

    fn importance_rec(&self, out: &mut [f64], n_root: f64) -> [u32; 2] {
        match self {
            TreeNode::Leaf { leaf } => *leaf,
            TreeNode::Split { f, l, r, .. } => {
                let a = l.importance_rec(out, n_root);
                let b = r.importance_rec(out, n_root);
                let parent = [a[0] + b[0], a[1] + b[1]];
                let weighted = |c: [u32; 2]| {
                    let n = (c[0] + c[1]) as f64;
                    if n == 0.0 {
                        0.0
                    } else {
                        n * gini(c)
                    }
                };
                let decrease = weighted(parent) - weighted(a) - weighted(b);
                out[*f] += decrease.max(0.0) / n_root;
                parent
            }
        }
    }
}

fn gini(c: [u32; 2]) -> f64 {
    let n = (c[0] + c[1]) as f64;
    let (p, q) = (c[0] as f64 / n, c[1] as f64 / n);
    1.0 - p * p - q * q
}

/// Growth limits for one tree.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TreeParams {
    pub max_features: usize,
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
}

/// Candidate split scored by `sum over children of (s^2 + f^2) / n`, which
/// is larger for lower weighted Gini impurity. Kept as an exact fraction
/// `num / den` so ties compare exactly.
#[derive(Debug, Clone, Copy)]
struct Candidate {
    num: u128,
    den: u128,
    feature: usize,
    threshold: f64,
}

impl Candidate {
    fn better_than(&self, other: &Candidate) -> bool {
        let lhs = self.num * other.den;
        let rhs = other.num * self.den;
        if lhs != rhs {
            return lhs > rhs;
        }
        if self.feature != other.feature {
            return self.feature < other.feature;
        }
        self.threshold < other.threshold
    }
}

fn purity_score(l: [u32; 2], r: [u32; 2]) -> (u128, u128) {
    let sq = |c: [u32; 2]| (c[0] as u128).pow(2) + (c[1] as u128).pow(2);
    let (nl, nr) = ((l[0] + l[1]) as u128, (r[0] + r[1]) as u128);
    (sq(l) * nr + sq(r) * nl, nl * nr)
}

fn midpoint(a: f64, b: f64) -> f64 {
    let m = a + (b - a) / 2.0;
    if m >= b {
        a
    } else {
        m
    }
}

struct Builder<'a, R> {
    x: &'a [Vec<f64>],
    y: &'a [u8],
    params: TreeParams,
    n_features: usize,
    rng: &'a mut R,
    scratch: Vec<(f64, u8)>,
}

impl<R: Rng> Builder<'_, R> {
    fn counts(&self, idx: &[usize]) -> [u32; 2] {
        let mut c = [0u32; 2];
        for &i in idx {
            c[self.y[i] as usize] += 1;
        }
        c
    }

    /// Best split of `idx` on feature `f`, or `None` if the feature is
    /// constant there. The flag reports whether the feature varied.
    fn best_on_feature(&mut self, idx: &[usize], f: usize, totals: [u32; 2]) -> (bool, Option<Candidate>) {
        self.scratch.clear();
        self.scratch.extend(idx.iter().map(|&i| (self.x[i][f], self.y[i])));
        self.scratch.sort_by(|a, b| a.0.total_cmp(&b.0));
        let first = self.scratch[0].0;
        let last = self.scratch[self.scratch.len() - 1].0;
        if first == last {
            return (false, None);
        }
        let min_leaf = self.params.min_leaf;
        let n = self.scratch.len();
        let mut left = [0u32; 2];
        let mut best: Option<Candidate> = None;
        for k in 0..n - 1 {
            left[self.scratch[k].1 as usize] += 1;
            let (a, b) = (self.scratch[k].0, self.scratch[k + 1].0);
            if a == b || k + 1 < min_leaf || n - k - 1 < min_leaf {
                continue;
            }
            let right = [totals[0] - left[0], totals[1] - left[1]];
            let (num, den) = purity_score(left, right);
            let c = Candidate {
                num,
                den,
                feature: f,
                threshold: midpoint(a, b),
            };
            if best.as_ref().is_none_or(|b| c.better_than(b)) {
                best = Some(c);
            }
        }
        (true, best)
    }

    fn grow(&mut self, idx: &mut [usize], depth: usize) -> TreeNode {
        let totals = self.counts(idx);
        let n = idx.len();
        let pure = totals[0] == 0 || totals[1] == 0;
        let depth_hit = self.params.max_depth.is_some_and(|d| depth >= d);
        if pure || depth_hit || n < 2 * self.params.min_leaf {
            return TreeNode::Leaf { leaf: totals };
        }

        // draw features without replacement until enough non-constant ones
        // have been examined
        let mut order: Vec<usize> = (0..self.n_features).collect();
        let mut examined = 0;
        let mut best: Option<Candidate> = None;
        for drawn in 0..self.n_features {
            if examined >= self.params.max_features {
                break;
            }
            let pick = self.rng.random_range(drawn..self.n_features);
            order.swap(drawn, pick);
            let f = order[drawn];
            let (varied, cand) = self.best_on_feature(idx, f, totals);
            if varied {
                examined += 1;
            }
            if let Some(c) = cand {
                if best.as_ref().is_none_or(|b| c.better_than(b)) {
                    best = Some(c);
                }
            }
        }
        let Some(best) = best else {
            return TreeNode::Leaf { leaf: totals };
        };

        let (f, t) = (best.feature, best.threshold);
        let x = self.x;
        let split = partition(idx, |i| x[i][f] <= t);
        let (left, right) = idx.split_at_mut(split);
        let l = self.grow(left, depth + 1);
        let r = self.grow(right, depth + 1);
        TreeNode::Split {
            f,
            t,
            l: Box::new(l),
            r: Box::new(r),
        }
    }
}

/// Stable in-place partition; returns the number of elements satisfying
/// `pred`, which end up first.
fn partition(idx: &mut [usize], pred: impl Fn(usize) -> bool) -> usize {
    let (yes, no): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| pred(i));
    let k = yes.len();
    idx[..k].copy_from_slice(&yes);
    idx[k..].copy_from_slice(&no);
    k
}

/// Grows a tree on the multiset `sample` of row indices into `x`/`y`
/// (`y` holds [`SUCCESS`] or [`FAILURE`]).
pub fn fit_tree(x: &[Vec<f64>], y: &[u8], sample: &[usize], params: TreeParams, rng: &mut impl Rng) -> Result<TreeNode> {
    if sample.is_empty() || x.is_empty() {
        return Err(Error::EmptyInput);
    }
    if params.min_leaf == 0 {
        return Err(Error::Config("min_leaf must be at least 1".into()));
    }
    let n_features = x[0].len();
    let mut idx = sample.to_vec();
    let mut b = Builder {
        x,
        y,
        params: TreeParams {
            max_features: params.max_features.clamp(1, n_features.max(1)),
            ..params
        },
        n_features,
        rng,
        scratch: Vec::with_capacity(sample.len()),
    };
    Ok(b.grow(&mut idx, 0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn params(max_depth: Option<usize>) -> TreeParams {
        TreeParams {
            max_features: 100,
            max_depth,
            min_leaf: 1,
        }
    }

    fn rows(v: &[f64]) -> Vec<Vec<f64>> {
        v.iter().map(|x| vec![*x]).collect()
    }

    #[test]
    fn one_dimensional_split_at_midpoint() {
        let x = rows(&[1.0, 2.0, 8.0, 9.0]);
        let y = [SUCCESS, SUCCESS, FAILURE, FAILURE];
        let t = fit_tree(&x, &y, &[0, 1, 2, 3], params(None), &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(
            t,
            TreeNode::Split {
                f: 0,
                t: 5.0,
                l: Box::new(TreeNode::Leaf { leaf: [2, 0] }),
                r: Box::new(TreeNode::Leaf { leaf: [0, 2] }),
            }
        );
    }

    #[test]
    fn pure_and_depth_zero_make_leaves() {
        let x = rows(&[1.0, 2.0, 3.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let t = fit_tree(&x, &[SUCCESS; 3], &[0, 1, 2], params(None), &mut rng).unwrap();
        assert_eq!(t, TreeNode::Leaf { leaf: [3, 0] });
        let t = fit_tree(&x, &[SUCCESS, FAILURE, SUCCESS], &[0, 1, 2], params(Some(0)), &mut rng).unwrap();
        assert_eq!(t, TreeNode::Leaf { leaf: [2, 1] });
    }

    #[test]
    fn ties_prefer_lowest_feature() {
        // both features separate the classes perfectly
        let x = vec![vec![0.0, 0.0], vec![1.0, 1.0]];
        let t = fit_tree(&x, &[SUCCESS, FAILURE], &[0, 1], params(None), &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert!(matches!(t, TreeNode::Split { f: 0, .. }));
    }

    #[test]
    fn leaf_fraction_and_totals() {
        let leaf = TreeNode::Leaf { leaf: [3, 1] };
        assert_eq!(leaf.predict(&[0.0]), 0.75);
        let x = rows(&[1.0, 1.0, 2.0, 3.0, 3.0]);
        let sample = [0, 0, 2, 3, 4, 4];
        let y = [SUCCESS, FAILURE, FAILURE, SUCCESS, FAILURE];
        let t = fit_tree(&x, &y, &sample, params(None), &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert_eq!(t.class_totals(), [3, 3]);
    }

    #[test]
    fn min_leaf_respected() {
        let x = rows(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let y = [SUCCESS, FAILURE, SUCCESS, FAILURE, SUCCESS, FAILURE];
        let p = TreeParams { min_leaf: 2, ..params(None) };
        let t = fit_tree(&x, &y, &[0, 1, 2, 3, 4, 5], p, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        fn check(n: &TreeNode) {
            match n {
                TreeNode::Leaf { leaf } => assert!(leaf[0] + leaf[1] >= 2),
                TreeNode::Split { l, r, .. } => {
                    check(l);
                    check(r)
                }
            }
        }
        check(&t);
    }

    #[test]
    fn serialized_shape() {
        let t = TreeNode::Split {
            f: 3,
            t: 0.5,
            l: Box::new(TreeNode::Leaf { leaf: [1, 0] }),
            r: Box::new(TreeNode::Leaf { leaf: [0, 2] }),
        };
        let s = serde_json::to_string(&t).unwrap();
        assert_eq!(s, r#"{"f":3,"t":0.5,"l":{"leaf":[1,0]},"r":{"leaf":[0,2]}}"#);
        assert_eq!(serde_json::from_str::<TreeNode>(&s).unwrap(), t);
    }
}
