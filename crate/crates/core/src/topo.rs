//! Finite spaces presented by a basis, and canonical open boxes in finite
//! products of them.
//!
//! An [`OpenBox`] constrains finitely many coordinates `ξ` to a basis member
//! `U_ξ` of factor `ξ` and leaves every other coordinate free. All product
//! reasoning is coordinatewise: a family of boxes has a common point iff on
//! every coordinate the constrained opens share a point.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::doubledelta::DoubleFamily;
use crate::error::{Error, Result};
use crate::setfam::{check_ground, FiniteSet};

/// A topology on `{0, …, point_count-1}` generated by `basis`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawSpace")]
pub struct FiniteSpace {
    #[serde(rename = "points")]
    point_count: usize,
    basis: Vec<FiniteSet>,
}

#[derive(Deserialize)]
struct RawSpace {
    points: usize,
    basis: Vec<FiniteSet>,
}

impl TryFrom<RawSpace> for FiniteSpace {
    type Error = Error;

    fn try_from(raw: RawSpace) -> Result<Self> {
        FiniteSpace::new(raw.points, raw.basis)
    }
}

/// Names of the catalog spaces, indexed by catalog id.
pub const CATALOG: [&str; 4] = ["discrete", "sierpinski", "chain", "indiscrete-plus-point"];

impl FiniteSpace {
    /// Checks only that the basis lives on the declared points; the basis
    /// axioms are reported by [`validate_space`].
    pub fn new(point_count: usize, basis: Vec<FiniteSet>) -> Result<Self> {
        if point_count == 0 {
            return Err(Error::InvalidSpace(
                "a space needs at least one point".into(),
            ));
        }
        check_ground(point_count, &basis).map_err(|e| Error::InvalidSpace(e.to_string()))?;
        Ok(FiniteSpace { point_count, basis })
    }

    pub fn point_count(&self) -> usize {
        self.point_count
    }

    pub fn basis(&self) -> &[FiniteSet] {
        &self.basis
    }

    pub fn member(&self, index: usize) -> Option<&FiniteSet> {
        self.basis.get(index)
    }

    /// Singletons plus the whole space.
    pub fn discrete(n: usize) -> Result<Self> {
        let mut basis: Vec<FiniteSet> = (0..n).map(FiniteSet::singleton).collect();
        if n > 1 {
            basis.push(FiniteSet::range(n));
        }
        FiniteSpace::new(n, basis)
    }

    /// Every basic open contains the generic point 0: `{0}, {0,1}, …, {0,n-1}`.
    pub fn sierpinski(n: usize) -> Result<Self> {
        let basis = (0..n).map(|i| FiniteSet::from([0, i])).collect();
        FiniteSpace::new(n, basis)
    }

    /// Nested opens `{0} ⊂ {0,1} ⊂ … ⊂ {0,…,n-1}`.
    pub fn chain(n: usize) -> Result<Self> {
        let basis = (1..=n).map(FiniteSet::range).collect();
        FiniteSpace::new(n, basis)
    }

    /// An indiscrete block `{0,…,n-2}` next to the isolated point `n-1`.
    pub fn indiscrete_plus_point(n: usize) -> Result<Self> {
        if n == 1 {
            return FiniteSpace::new(1, vec![FiniteSet::singleton(0)]);
        }
        FiniteSpace::new(
            n,
            vec![FiniteSet::range(n - 1), FiniteSet::singleton(n - 1)],
        )
    }

    pub fn catalog(id: usize, n: usize) -> Result<Self> {
        match id {
            0 => Self::discrete(n),
            1 => Self::sierpinski(n),
            2 => Self::chain(n),
            3 => Self::indiscrete_plus_point(n),
            _ => Err(Error::InvalidParams(format!(
                "catalog id {id} (expected 0..{})",
                CATALOG.len()
            ))),
        }
    }

    fn resolve(&self, opens: &[usize]) -> Result<Vec<&FiniteSet>> {
        opens
            .iter()
            .map(|&i| {
                self.member(i).ok_or(Error::IndexOutOfRange {
                    index: i,
                    len: self.basis.len(),
                })
            })
            .collect()
    }

    /// Points lying in every listed basis member (all points for an empty list).
    pub fn common_points(&self, opens: &[usize]) -> Result<FiniteSet> {
        Ok(self
            .resolve(opens)?
            .into_iter()
            .fold(FiniteSet::range(self.point_count), |acc, u| {
                acc.intersection(u)
            }))
    }
}

/// One failed basis axiom.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum Violation {
    EmptyMember {
        member: usize,
    },
    CoverFailure {
        point: usize,
    },
    IntersectionFailure {
        first: usize,
        second: usize,
        point: usize,
    },
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks that the basis has no empty member, covers every point, and that
/// each point of `B1 ∩ B2` has a basis member around it inside `B1 ∩ B2`.
pub fn validate_space(space: &FiniteSpace) -> ValidationReport {
    let mut violations = Vec::new();
    for (i, b) in space.basis.iter().enumerate() {
        if b.is_empty() {
            violations.push(Violation::EmptyMember { member: i });
        }
    }
    for point in 0..space.point_count {
        if !space.basis.iter().any(|b| b.contains(point)) {
            violations.push(Violation::CoverFailure { point });
        }
    }
    for (first, b1) in space.basis.iter().enumerate() {
        for (second, b2) in space.basis.iter().enumerate().skip(first + 1) {
            let meet = b1.intersection(b2);
            for point in meet.iter() {
                let refined = space
                    .basis
                    .iter()
                    .any(|b3| b3.contains(point) && b3.is_subset(&meet));
                if !refined {
                    violations.push(Violation::IntersectionFailure {
                        first,
                        second,
                        point,
                    });
                }
            }
        }
    }
    ValidationReport { violations }
}

/// Whether the listed basis members have a common point. For a finite list
/// this is the same as every non-empty sublist having one; the empty list
/// counts as centered.
pub fn is_centered(space: &FiniteSpace, opens: &[usize]) -> Result<bool> {
    Ok(opens.is_empty() || !space.common_points(opens)?.is_empty())
}

/// A canonical open: coordinate `ξ` ↦ index of a basis member of factor `ξ`.
/// The empty support is the whole product.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpenBox {
    pub support: BTreeMap<usize, usize>,
}

impl OpenBox {
    pub fn new(support: BTreeMap<usize, usize>) -> Self {
        OpenBox { support }
    }

    /// The coordinates this box constrains (`B_γ`).
    pub fn support_set(&self) -> FiniteSet {
        self.support.keys().copied().collect()
    }

    pub fn constraint(&self, coord: usize) -> Option<usize> {
        self.support.get(&coord).copied()
    }
}

/// Restricts a box to the coordinates in `coords`.
pub fn project_box(bx: &OpenBox, coords: &FiniteSet) -> OpenBox {
    OpenBox {
        support: bx
            .support
            .iter()
            .filter(|(xi, _)| coords.contains(**xi))
            .map(|(&xi, &u)| (xi, u))
            .collect(),
    }
}

/// Factors, boxes, and a partition of the box indices into contiguous blocks.
///
/// `block_boundaries` is `[0, c_1, …, c_{b-1}, N]`, strictly increasing, so
/// block `α` is `c_α..c_{α+1}`. With no boxes it is `[0]` and there are no
/// blocks.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawInstance")]
pub struct ProductInstance {
    factors: Vec<FiniteSpace>,
    boxes: Vec<OpenBox>,
    block_boundaries: Vec<usize>,
}

#[derive(Deserialize)]
struct RawInstance {
    factors: Vec<FiniteSpace>,
    boxes: Vec<OpenBox>,
    block_boundaries: Vec<usize>,
}

impl TryFrom<RawInstance> for ProductInstance {
    type Error = Error;

    fn try_from(raw: RawInstance) -> Result<Self> {
        ProductInstance::new(raw.factors, raw.boxes, raw.block_boundaries)
    }
}

impl ProductInstance {
    pub fn new(
        factors: Vec<FiniteSpace>,
        boxes: Vec<OpenBox>,
        block_boundaries: Vec<usize>,
    ) -> Result<Self> {
        for (gamma, bx) in boxes.iter().enumerate() {
            for (&xi, &u) in &bx.support {
                let factor = factors.get(xi).ok_or_else(|| {
                    Error::InvalidInstance(format!(
                        "box {gamma} constrains coordinate {xi} but there are {} factors",
                        factors.len()
                    ))
                })?;
                match factor.member(u) {
                    None => {
                        return Err(Error::InvalidInstance(format!(
                            "box {gamma} uses basis member {u} of factor {xi}, which has {}",
                            factor.basis().len()
                        )))
                    }
                    Some(b) if b.is_empty() => {
                        return Err(Error::InvalidInstance(format!(
                            "box {gamma} uses the empty basis member {u} of factor {xi}"
                        )))
                    }
                    Some(_) => {}
                }
            }
        }
        let n = boxes.len();
        let well_formed = block_boundaries.first() == Some(&0)
            && block_boundaries.last() == Some(&n)
            && block_boundaries.windows(2).all(|w| w[0] < w[1]);
        if !well_formed {
            return Err(Error::InvalidInstance(format!(
                "block boundaries {block_boundaries:?} do not partition 0..{n}"
            )));
        }
        Ok(ProductInstance {
            factors,
            boxes,
            block_boundaries,
        })
    }

    pub fn factors(&self) -> &[FiniteSpace] {
        &self.factors
    }

    pub fn boxes(&self) -> &[OpenBox] {
        &self.boxes
    }

    pub fn block_boundaries(&self) -> &[usize] {
        &self.block_boundaries
    }

    pub fn block_count(&self) -> usize {
        self.block_boundaries.len() - 1
    }

    /// OpenBox indices of block `α`.
    pub fn block_range(&self, block: usize) -> std::ops::Range<usize> {
        self.block_boundaries[block]..self.block_boundaries[block + 1]
    }

    /// The block containing box `γ`.
    pub fn block_of_box(&self, gamma: usize) -> Option<usize> {
        (gamma < self.boxes.len())
            .then(|| self.block_boundaries.partition_point(|&c| c <= gamma) - 1)
    }

    /// `U_ξ^γ`, if box `γ` constrains coordinate `ξ`.
    pub fn open(&self, gamma: usize, coord: usize) -> Option<&FiniteSet> {
        let u = self.boxes.get(gamma)?.constraint(coord)?;
        self.factors[coord].member(u)
    }

    /// The supports `B_γ` grouped by block, over the coordinate ground set.
    pub fn support_family(&self) -> Option<DoubleFamily> {
        let blocks = (0..self.block_count())
            .map(|a| {
                self.block_range(a)
                    .map(|g| self.boxes[g].support_set())
                    .collect()
            })
            .collect();
        DoubleFamily::new(self.factors.len(), blocks).ok()
    }

    pub(crate) fn check_indices(&self, indices: &[usize]) -> Result<()> {
        match indices.iter().find(|&&g| g >= self.boxes.len()) {
            Some(&index) => Err(Error::IndexOutOfRange {
                index,
                len: self.boxes.len(),
            }),
            None => Ok(()),
        }
    }

    /// Coordinatewise intersections of the listed boxes over the coordinates
    /// they constrain. Unconstrained coordinates are absent.
    pub fn meets(&self, indices: &[usize]) -> Result<BTreeMap<usize, FiniteSet>> {
        self.check_indices(indices)?;
        let mut meet: BTreeMap<usize, FiniteSet> = BTreeMap::new();
        for &g in indices {
            for &xi in self.boxes[g].support.keys() {
                let u = self.open(g, xi).expect("validated instance");
                meet.entry(xi)
                    .and_modify(|acc| *acc = acc.intersection(u))
                    .or_insert_with(|| u.clone());
            }
        }
        Ok(meet)
    }
}

/// Whether the listed boxes share a point of the product, decided one
/// coordinate at a time.
pub fn boxes_centered(instance: &ProductInstance, indices: &[usize]) -> Result<bool> {
    Ok(instance.meets(indices)?.values().all(|s| !s.is_empty()))
}
