//! Multi-indices over `N_0^d` and their graded-lexicographic enumeration.

use std::collections::HashMap;
use std::fmt;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MultiIndex(Vec<usize>);

impl MultiIndex {
    pub fn new(entries: Vec<usize>) -> Self {
        MultiIndex(entries)
    }

    pub fn zeros(dim: usize) -> Self {
        MultiIndex(vec![0; dim])
    }

    /// The basis index `e_i`.
    pub fn unit(dim: usize, axis: usize) -> Self {
        let mut e = vec![0; dim];
        e[axis] = 1;
        MultiIndex(e)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    /// `|γ| = Σ γ_i`.
    pub fn order(&self) -> usize {
        self.0.iter().sum()
    }

    pub fn entries(&self) -> &[usize] {
        &self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&g| g == 0)
    }

    pub fn add(&self, other: &MultiIndex) -> MultiIndex {
        debug_assert_eq!(self.dim(), other.dim());
        MultiIndex(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    /// `self - other`, or `None` unless `other ≤ self` componentwise.
    pub fn checked_sub(&self, other: &MultiIndex) -> Option<MultiIndex> {
        debug_assert_eq!(self.dim(), other.dim());
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| a.checked_sub(*b))
            .collect::<Option<Vec<_>>>()
            .map(MultiIndex)
    }

    /// `C(self + beta, beta) = Π_i C(self_i + beta_i, beta_i)`.
    pub fn binomial_with(&self, beta: &MultiIndex) -> f64 {
        self.0
            .iter()
            .zip(&beta.0)
            .map(|(&g, &b)| binomial(g + b, b))
            .product()
    }

    /// `x^γ = Π_i x_i^{γ_i}` for a real state vector.
    pub fn monomial(&self, x: &[f64]) -> f64 {
        self.0
            .iter()
            .zip(x)
            .map(|(&g, &xi)| xi.powi(g as i32))
            .product()
    }

    /// The single axis carrying all of the order, if there is one.
    pub fn pure_axis(&self) -> Option<usize> {
        let mut axis = None;
        for (i, &g) in self.0.iter().enumerate() {
            if g > 0 {
                if axis.is_some() {
                    return None;
                }
                axis = Some(i);
            }
        }
        axis
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, g) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{g}")?;
        }
        write!(f, ")")
    }
}

pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc = 1.0;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc.round()
}

pub fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// All multi-indices of dimension `dim` with `|γ| ≤ max_order`, enumerated by
/// order first and lexicographically (ascending) within each order.
#[derive(Debug, Clone)]
pub struct MultiIndexSet {
    dim: usize,
    max_order: usize,
    indices: Vec<MultiIndex>,
    order_start: Vec<usize>,
    ranks: HashMap<MultiIndex, usize>,
}

impl MultiIndexSet {
    pub fn graded_lex(dim: usize, max_order: usize) -> Self {
        let mut indices = Vec::new();
        let mut order_start = Vec::with_capacity(max_order + 2);
        for order in 0..=max_order {
            order_start.push(indices.len());
            let mut level = Vec::new();
            compositions(dim, order, &mut vec![0; dim], 0, &mut level);
            level.sort();
            indices.extend(level);
        }
        order_start.push(indices.len());
        let ranks = indices
            .iter()
            .enumerate()
            .map(|(i, g)| (g.clone(), i))
            .collect();
        MultiIndexSet {
            dim,
            max_order,
            indices,
            order_start,
            ranks,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn max_order(&self) -> usize {
        self.max_order
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn get(&self, rank: usize) -> &MultiIndex {
        &self.indices[rank]
    }

    pub fn iter(&self) -> impl Iterator<Item = &MultiIndex> {
        self.indices.iter()
    }

    pub fn rank(&self, gamma: &MultiIndex) -> Option<usize> {
        self.ranks.get(gamma).copied()
    }

    /// Number of indices with `|γ| ≤ order`.
    pub fn count_up_to(&self, order: usize) -> usize {
        self.order_start[order.min(self.max_order) + 1]
    }

    /// Ranks of the indices with `|γ| = order`.
    pub fn ranks_of_order(&self, order: usize) -> std::ops::Range<usize> {
        if order > self.max_order {
            return 0..0;
        }
        self.order_start[order]..self.order_start[order + 1]
    }
}

fn compositions(
    dim: usize,
    remaining: usize,
    current: &mut Vec<usize>,
    pos: usize,
    out: &mut Vec<MultiIndex>,
) {
    if pos + 1 == dim {
        current[pos] = remaining;
        out.push(MultiIndex(current.clone()));
        return;
    }
    for k in 0..=remaining {
        current[pos] = k;
        compositions(dim, remaining - k, current, pos + 1, out);
    }
    current[pos] = 0;
}
