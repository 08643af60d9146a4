//! Finite set families and single-level delta-systems.
//!
//! A family `S_0, …, S_{N-1}` contains a delta-system (sunflower) on the
//! index set `J` with kernel `A` when `S_i ∩ S_j = A` for all distinct
//! `i, j ∈ J`. Families are indexed, so the same set may occur at several
//! indices; `r` copies of one set form a delta-system whose kernel is that set.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigUint;
use serde::{Deserialize, Deserializer, Serialize};

use crate::error::{Error, Result};

/// Opaque label of a ground-set element.
pub type ElementId = usize;

/// A finite set stored as a strictly increasing vector.
#[derive(Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(transparent)]
pub struct FiniteSet(Vec<ElementId>);

impl FiniteSet {
    pub fn new() -> Self {
        FiniteSet(Vec::new())
    }

    pub fn singleton(x: ElementId) -> Self {
        FiniteSet(vec![x])
    }

    /// The set `{0, 1, …, n-1}`.
    pub fn range(n: usize) -> Self {
        FiniteSet((0..n).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[ElementId] {
        &self.0
    }

    pub fn iter(&self) -> impl DoubleEndedIterator<Item = ElementId> + ExactSizeIterator + '_ {
        self.0.iter().copied()
    }

    pub fn first(&self) -> Option<ElementId> {
        self.0.first().copied()
    }

    pub fn max(&self) -> Option<ElementId> {
        self.0.last().copied()
    }

    pub fn contains(&self, x: ElementId) -> bool {
        self.0.binary_search(&x).is_ok()
    }

    pub fn insert(&mut self, x: ElementId) -> bool {
        match self.0.binary_search(&x) {
            Ok(_) => false,
            Err(pos) => {
                self.0.insert(pos, x);
                true
            }
        }
    }

    pub fn remove(&mut self, x: ElementId) -> bool {
        match self.0.binary_search(&x) {
            Ok(pos) => {
                self.0.remove(pos);
                true
            }
            Err(_) => false,
        }
    }

    pub fn intersection(&self, other: &FiniteSet) -> FiniteSet {
        let (mut a, mut b) = (self.0.iter().peekable(), other.0.iter().peekable());
        let mut out = Vec::new();
        while let (Some(&&x), Some(&&y)) = (a.peek(), b.peek()) {
            match x.cmp(&y) {
                std::cmp::Ordering::Less => {
                    a.next();
                }
                std::cmp::Ordering::Greater => {
                    b.next();
                }
                std::cmp::Ordering::Equal => {
                    out.push(x);
                    a.next();
                    b.next();
                }
            }
        }
        FiniteSet(out)
    }

    pub fn union(&self, other: &FiniteSet) -> FiniteSet {
        let mut out = Vec::with_capacity(self.len() + other.len());
        let (mut i, mut j) = (0, 0);
        while i < self.0.len() && j < other.0.len() {
            match self.0[i].cmp(&other.0[j]) {
                std::cmp::Ordering::Less => {
                    out.push(self.0[i]);
                    i += 1;
                }
                std::cmp::Ordering::Greater => {
                    out.push(other.0[j]);
                    j += 1;
                }
                std::cmp::Ordering::Equal => {
                    out.push(self.0[i]);
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend_from_slice(&self.0[i..]);
        out.extend_from_slice(&other.0[j..]);
        FiniteSet(out)
    }

    pub fn difference(&self, other: &FiniteSet) -> FiniteSet {
        FiniteSet(
            self.0
                .iter()
                .copied()
                .filter(|&x| !other.contains(x))
                .collect(),
        )
    }

    pub fn is_disjoint(&self, other: &FiniteSet) -> bool {
        let (small, large) = if self.len() <= other.len() {
            (self, other)
        } else {
            (other, self)
        };
        small.iter().all(|x| !large.contains(x))
    }

    pub fn is_subset(&self, other: &FiniteSet) -> bool {
        self.len() <= other.len() && self.iter().all(|x| other.contains(x))
    }
}

impl FromIterator<ElementId> for FiniteSet {
    fn from_iter<I: IntoIterator<Item = ElementId>>(iter: I) -> Self {
        let mut v: Vec<ElementId> = iter.into_iter().collect();
        v.sort_unstable();
        v.dedup();
        FiniteSet(v)
    }
}

impl From<Vec<ElementId>> for FiniteSet {
    fn from(v: Vec<ElementId>) -> Self {
        v.into_iter().collect()
    }
}

impl<const N: usize> From<[ElementId; N]> for FiniteSet {
    fn from(v: [ElementId; N]) -> Self {
        v.into_iter().collect()
    }
}

impl<'de> Deserialize<'de> for FiniteSet {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        Vec::<ElementId>::deserialize(deserializer).map(FiniteSet::from)
    }
}

impl fmt::Debug for FiniteSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.0.iter()).finish()
    }
}

/// Sorts and deduplicates an index list read from input.
pub(crate) fn sorted_unique<'de, D: Deserializer<'de>>(
    deserializer: D,
) -> std::result::Result<Vec<usize>, D::Error> {
    let mut v = Vec::<usize>::deserialize(deserializer)?;
    v.sort_unstable();
    v.dedup();
    Ok(v)
}

pub(crate) fn normalize_indices(indices: &[usize]) -> Vec<usize> {
    let mut v = indices.to_vec();
    v.sort_unstable();
    v.dedup();
    v
}

/// An indexed family of finite subsets of `{0, …, ground_size-1}`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawFamily")]
pub struct IndexedFamily {
    ground_size: usize,
    sets: Vec<FiniteSet>,
}

#[derive(Deserialize)]
struct RawFamily {
    ground_size: usize,
    sets: Vec<FiniteSet>,
}

impl TryFrom<RawFamily> for IndexedFamily {
    type Error = Error;

    fn try_from(raw: RawFamily) -> Result<Self> {
        IndexedFamily::new(raw.ground_size, raw.sets)
    }
}

impl IndexedFamily {
    pub fn new(ground_size: usize, sets: Vec<FiniteSet>) -> Result<Self> {
        check_ground(ground_size, &sets)?;
        Ok(IndexedFamily { ground_size, sets })
    }

    pub fn ground_size(&self) -> usize {
        self.ground_size
    }

    pub fn sets(&self) -> &[FiniteSet] {
        &self.sets
    }

    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }

    pub fn get(&self, index: usize) -> Option<&FiniteSet> {
        self.sets.get(index)
    }
}

pub(crate) fn check_ground(ground_size: usize, sets: &[FiniteSet]) -> Result<()> {
    for s in sets {
        if let Some(element) = s.max().filter(|&x| x >= ground_size) {
            return Err(Error::ElementOutOfRange {
                element,
                ground_size,
            });
        }
    }
    Ok(())
}

/// Witness `(J, A)` that the members indexed by `J` form a delta-system with
/// kernel `A`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeltaSystemCertificate {
    #[serde(deserialize_with = "sorted_unique")]
    pub indices: Vec<usize>,
    pub kernel: FiniteSet,
}

/// Returns the common pairwise intersection of the members at `indices`.
pub fn kernel_of(family: &IndexedFamily, indices: &[usize]) -> Result<FiniteSet> {
    let idx = normalize_indices(indices);
    if idx.len() < 2 {
        return Err(Error::DegenerateSize(idx.len()));
    }
    let sets = idx
        .iter()
        .map(|&i| {
            family.get(i).ok_or(Error::IndexOutOfRange {
                index: i,
                len: family.len(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let kernel = sets[0].intersection(sets[1]);
    for (a, sa) in sets.iter().enumerate() {
        for sb in &sets[a + 1..] {
            if sa.intersection(sb) != kernel {
                return Err(Error::NotDeltaSystem);
            }
        }
    }
    Ok(kernel)
}

/// Checks a certificate by direct enumeration of all pairwise intersections.
pub fn verify_delta_system(family: &IndexedFamily, cert: &DeltaSystemCertificate) -> Result<bool> {
    match kernel_of(family, &cert.indices) {
        Ok(kernel) => Ok(kernel == cert.kernel),
        Err(Error::NotDeltaSystem) => Ok(false),
        Err(e) => Err(e),
    }
}

/// Complete search for an `r`-member delta-system.
///
/// Candidates are visited in increasing index order, so the first hit is the
/// lexicographically least `J`. The kernel is fixed by the first two picks and
/// every later pick must meet each earlier one in exactly that kernel.
pub fn find_delta_system_exact(
    family: &IndexedFamily,
    r: usize,
    cap: usize,
) -> Result<Option<DeltaSystemCertificate>> {
    if r < 2 {
        return Err(Error::DegenerateSize(r));
    }
    if family.len() > cap {
        return Err(Error::CapExceeded {
            what: "family size",
            actual: family.len(),
            cap,
        });
    }
    if family.len() < r {
        return Ok(None);
    }
    let mut chosen = Vec::with_capacity(r);
    let found = exact_search(family.sets(), r, &mut chosen, None, 0);
    Ok(found.map(|kernel| DeltaSystemCertificate {
        indices: chosen,
        kernel,
    }))
}

fn exact_search(
    sets: &[FiniteSet],
    r: usize,
    chosen: &mut Vec<usize>,
    kernel: Option<&FiniteSet>,
    start: usize,
) -> Option<FiniteSet> {
    if chosen.len() == r {
        return kernel.cloned();
    }
    let last = sets.len() - (r - chosen.len());
    for j in start..=last {
        match (chosen.len(), kernel) {
            (0, _) => {
                chosen.push(j);
                if let Some(k) = exact_search(sets, r, chosen, None, j + 1) {
                    return Some(k);
                }
            }
            (1, _) => {
                let k = sets[chosen[0]].intersection(&sets[j]);
                chosen.push(j);
                if let Some(k) = exact_search(sets, r, chosen, Some(&k), j + 1) {
                    return Some(k);
                }
            }
            (_, Some(k)) => {
                let fits = k.is_subset(&sets[j])
                    && chosen
                        .iter()
                        .all(|&c| sets[c].intersection(&sets[j]).len() == k.len());
                if !fits {
                    continue;
                }
                chosen.push(j);
                if let Some(k) = exact_search(sets, r, chosen, Some(k), j + 1) {
                    return Some(k);
                }
            }
            (_, None) => unreachable!("kernel fixed once two members are chosen"),
        }
        chosen.pop();
    }
    None
}

/// Constructive extraction following the Erdős–Rado recursion.
///
/// Duplicates are collapsed first; a set repeated at least `r` times is
/// returned directly. The distinct sets are bucketed by cardinality and the
/// buckets tried largest first. Within a uniform bucket: a greedy maximal
/// pairwise-disjoint subcollection with `r` members is a delta-system with
/// empty kernel; otherwise the element lying in the most members is moved
/// into the kernel and the recursion continues on those members.
///
/// Succeeds whenever the family holds more than [`er_threshold`]`(k, r)`
/// distinct sets of size `k`.
pub fn find_delta_system_er(family: &IndexedFamily, r: usize) -> Option<DeltaSystemCertificate> {
    if r < 2 || family.len() < r {
        return None;
    }

    let mut occurrences: BTreeMap<&FiniteSet, Vec<usize>> = BTreeMap::new();
    for (i, s) in family.sets().iter().enumerate() {
        occurrences.entry(s).or_default().push(i);
    }
    let repeated = occurrences
        .iter()
        .filter(|(_, idx)| idx.len() >= r)
        .map(|(s, idx)| (&idx[..r], *s))
        .min_by(|a, b| a.0.cmp(b.0));
    if let Some((indices, set)) = repeated {
        return Some(DeltaSystemCertificate {
            indices: indices.to_vec(),
            kernel: set.clone(),
        });
    }

    let mut buckets: BTreeMap<usize, Vec<(usize, FiniteSet)>> = BTreeMap::new();
    let mut representatives: Vec<(usize, &FiniteSet)> =
        occurrences.iter().map(|(s, idx)| (idx[0], *s)).collect();
    representatives.sort_unstable_by_key(|&(i, _)| i);
    for (i, s) in representatives {
        buckets.entry(s.len()).or_default().push((i, s.clone()));
    }
    let mut order: Vec<Vec<(usize, FiniteSet)>> = buckets.into_values().collect();
    // Stable sort keeps smaller cardinalities first among equal-sized buckets.
    order.sort_by_key(|b| std::cmp::Reverse(b.len()));

    order
        .into_iter()
        .filter(|bucket| bucket.len() >= r)
        .find_map(|bucket| sunflower_recursion(bucket, r))
        .map(|(mut indices, kernel)| {
            indices.sort_unstable();
            DeltaSystemCertificate { indices, kernel }
        })
}

fn sunflower_recursion(
    members: Vec<(usize, FiniteSet)>,
    r: usize,
) -> Option<(Vec<usize>, FiniteSet)> {
    if members.len() < r {
        return None;
    }

    let mut covered = FiniteSet::new();
    let mut disjoint = Vec::new();
    for (i, s) in &members {
        if s.is_disjoint(&covered) {
            disjoint.push(*i);
            covered = covered.union(s);
            if disjoint.len() == r {
                return Some((disjoint, FiniteSet::new()));
            }
        }
    }

    let mut degree: BTreeMap<ElementId, usize> = BTreeMap::new();
    for (_, s) in &members {
        for x in s.iter() {
            *degree.entry(x).or_default() += 1;
        }
    }
    // Highest degree, smallest element on ties.
    let (pivot, count) = degree.into_iter().fold(
        None,
        |best: Option<(ElementId, usize)>, (x, c)| match best {
            Some((_, bc)) if bc >= c => best,
            _ => Some((x, c)),
        },
    )?;
    if count < r {
        return None;
    }

    let star = members
        .into_iter()
        .filter(|(_, s)| s.contains(pivot))
        .map(|(i, mut s)| {
            s.remove(pivot);
            (i, s)
        })
        .collect();
    let (indices, mut kernel) = sunflower_recursion(star, r)?;
    kernel.insert(pivot);
    Some((indices, kernel))
}

/// Largest delta-system in the family: exact search (largest `r` first) when
/// the family fits under `exact_cap`, the constructive recursion otherwise.
/// Returns `None` only for families with fewer than two members.
pub fn find_largest_delta_system(
    family: &IndexedFamily,
    exact_cap: usize,
) -> Option<DeltaSystemCertificate> {
    let n = family.len();
    if n < 2 {
        return None;
    }
    if n <= exact_cap {
        (2..=n)
            .rev()
            .find_map(|r| find_delta_system_exact(family, r, exact_cap).ok().flatten())
    } else {
        (2..=n).rev().find_map(|r| find_delta_system_er(family, r))
    }
}

/// `k! · (r-1)^k`: more than this many distinct `k`-sets always contain an
/// `r`-member delta-system.
pub fn er_threshold(k: u32, r: u32) -> BigUint {
    let factorial: BigUint = (1..=k).map(BigUint::from).product();
    factorial * BigUint::from(r.saturating_sub(1)).pow(k)
}
