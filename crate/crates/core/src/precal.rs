//! Finite `(n, k)`-centeredness and linkedness.
//!
//! A space has `(n, k)`-centeredness when every length-`n` list of non-empty
//! basic opens (repetition allowed) contains `k` entries with a common point.
//! Linkedness asks only that the `k` entries meet pairwise. Checking basic
//! opens suffices because every open is a union of them.
//!
//! Lists are enumerated as multisets: whether a list has a good sublist does
//! not depend on the order of its entries. Note that once
//! `n > |basis| · (k - 1)` some member repeats `k` times and the property holds
//! by pigeonhole.

use std::ops::ControlFlow;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::setfam::normalize_indices;
use crate::topo::{validate_space, FiniteSpace, ProductInstance};
use crate::Caps;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PropertyQuery {
    n: usize,
    k: usize,
}

impl PropertyQuery {
    pub fn new(n: usize, k: usize) -> Result<Self> {
        if k == 0 || k > n {
            return Err(Error::InvalidParams(format!(
                "need 1 <= k <= n (got n={n}, k={k})"
            )));
        }
        Ok(PropertyQuery { n, k })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PropertyReport {
    pub holds: bool,
    /// A length-`n` list of basis indices with no good `k`-sublist.
    pub counterexample: Option<Vec<usize>>,
}

/// Calls `f` on every non-decreasing sequence of length `n` over `0..b`, in
/// lexicographic order.
fn for_each_multiset<F>(b: usize, n: usize, mut f: F) -> Option<Vec<usize>>
where
    F: FnMut(&[usize]) -> ControlFlow<()>,
{
    if n == 0 {
        return f(&[]).is_break().then(Vec::new);
    }
    if b == 0 {
        return None;
    }
    let mut seq = vec![0; n];
    loop {
        if f(&seq).is_break() {
            return Some(seq);
        }
        let pos = seq.iter().rposition(|&x| x + 1 < b)?;
        let next = seq[pos] + 1;
        seq[pos..].fill(next);
    }
}

fn check_inputs(space: &FiniteSpace, q: &PropertyQuery, caps: &Caps) -> Result<()> {
    let report = validate_space(space);
    if !report.is_ok() {
        return Err(Error::InvalidSpace(format!("{:?}", report.violations)));
    }
    if space.basis().len() > caps.property_basis {
        return Err(Error::CapExceeded {
            what: "basis size",
            actual: space.basis().len(),
            cap: caps.property_basis,
        });
    }
    if q.n > caps.property_n {
        return Err(Error::CapExceeded {
            what: "list length n",
            actual: q.n,
            cap: caps.property_n,
        });
    }
    Ok(())
}

/// Whether some `k` entries of `list` share a point: true iff some point lies
/// in at least `k` of them.
pub(crate) fn has_centered_sublist(space: &FiniteSpace, list: &[usize], k: usize) -> bool {
    (0..space.point_count()).any(|x| {
        list.iter()
            .filter(|&&u| space.basis()[u].contains(x))
            .count()
            >= k
    })
}

/// Whether some `k` entries of `list` meet pairwise.
pub(crate) fn has_linked_sublist(space: &FiniteSpace, list: &[usize], k: usize) -> bool {
    fn grow(
        space: &FiniteSpace,
        list: &[usize],
        k: usize,
        picked: &mut Vec<usize>,
        from: usize,
    ) -> bool {
        if picked.len() == k {
            return true;
        }
        for i in from..list.len() {
            if list.len() - i < k - picked.len() {
                break;
            }
            let u = &space.basis()[list[i]];
            if picked
                .iter()
                .all(|&j| !space.basis()[list[j]].is_disjoint(u))
            {
                picked.push(i);
                if grow(space, list, k, picked, i + 1) {
                    return true;
                }
                picked.pop();
            }
        }
        false
    }
    grow(space, list, k, &mut Vec::with_capacity(k), 0)
}

fn exhaustive<F>(
    space: &FiniteSpace,
    q: &PropertyQuery,
    caps: &Caps,
    good: F,
) -> Result<PropertyReport>
where
    F: Fn(&FiniteSpace, &[usize], usize) -> bool,
{
    check_inputs(space, q, caps)?;
    let counterexample = for_each_multiset(space.basis().len(), q.n, |list| {
        if good(space, list, q.k) {
            ControlFlow::Continue(())
        } else {
            ControlFlow::Break(())
        }
    });
    Ok(PropertyReport {
        holds: counterexample.is_none(),
        counterexample,
    })
}

/// Exhaustive `(n, k)`-centeredness check over all multisets of basis members.
pub fn has_centeredness_property(
    space: &FiniteSpace,
    q: &PropertyQuery,
    caps: &Caps,
) -> Result<PropertyReport> {
    exhaustive(space, q, caps, has_centered_sublist)
}

/// Exhaustive `(n, k)`-linkedness check over all multisets of basis members.
pub fn has_linked_property(
    space: &FiniteSpace,
    q: &PropertyQuery,
    caps: &Caps,
) -> Result<PropertyReport> {
    exhaustive(space, q, caps, has_linked_sublist)
}

/// Narrows `candidates` one coordinate at a time.
///
/// At coordinate `ξ`, boxes that leave `ξ` free always survive; among the
/// boxes constraining `ξ`, the survivors are those whose open contains the
/// point `x` of factor `ξ` keeping the most boxes (ties: lexicographically
/// least survivor set). In a finite space a maximal centered subfamily is
/// exactly the set of opens around one point, so scanning the points is an
/// exhaustive search for it. Returns the `k` least survivors, or `None` when
/// fewer than `k` remain.
pub fn chain_compose_select(
    instance: &ProductInstance,
    coords: &[usize],
    candidates: &[usize],
    k: usize,
) -> Result<Option<Vec<usize>>> {
    instance.check_indices(candidates)?;
    if let Some(&xi) = coords.iter().find(|&&xi| xi >= instance.factors().len()) {
        return Err(Error::InvalidParams(format!(
            "coordinate {xi} out of range ({} factors)",
            instance.factors().len()
        )));
    }
    let mut survivors = normalize_indices(candidates);
    for &xi in coords {
        let (constrained, free): (Vec<usize>, Vec<usize>) = survivors
            .iter()
            .partition(|&&g| instance.boxes()[g].constraint(xi).is_some());
        if constrained.is_empty() {
            continue;
        }
        let mut best: Option<Vec<usize>> = None;
        for x in 0..instance.factors()[xi].point_count() {
            let mut kept: Vec<usize> = constrained
                .iter()
                .copied()
                .filter(|&g| instance.open(g, xi).is_some_and(|u| u.contains(x)))
                .chain(free.iter().copied())
                .collect();
            kept.sort_unstable();
            let better = match &best {
                None => true,
                Some(b) => kept.len() > b.len() || (kept.len() == b.len() && kept < *b),
            };
            if better {
                best = Some(kept);
            }
        }
        survivors = best.unwrap_or(free);
    }
    Ok((survivors.len() >= k).then(|| {
        survivors.truncate(k);
        survivors
    }))
}
