//! Common points for finite subfamilies of boxes.
//!
//! Given boxes `U_γ` with supports `B_γ`, the pipeline
//!
//! 1. reduces the supports to a two-level delta-system `(m, I, {J_α}, {A_α}, A)`
//!    over the instance's blocks ([`reduce_supports`]);
//! 2. keeps boxes whose projections to the global kernel `A` are centered
//!    ([`select_kernel_centered`]);
//! 3. inside each selected block keeps boxes whose projections to `A_α` are
//!    centered ([`select_block_centered`]);
//! 4. for each finite `I_fin` of the selected boxes, glues a point from three
//!    partial functions with disjoint domains ([`assemble_witness`]):
//!    `q` on `A`, `r` on the `A_α \ A`, and `s` on the leftover `B_γ \ A_α`.
//!
//! Disjointness of the three domains rests on the certificate: members of one block meet
//! in `A_α`, members of different blocks meet in `A`, so `B_γ \ A_{α(γ)}` is
//! disjoint from every other selected support.

use std::collections::{BTreeMap, BTreeSet};

use itertools::Itertools;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::doubledelta::{
    extract_double_delta, find_double_delta_exact, DoubleDeltaCertificate, ExtractionParams,
};
use crate::error::{Error, Result};
use crate::setfam::{normalize_indices, FiniteSet};
use crate::topo::ProductInstance;
use crate::Caps;

/// A partial function from coordinates to points of the matching factor.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PartialPoint {
    pub assignments: BTreeMap<usize, usize>,
}

impl PartialPoint {
    pub fn domain(&self) -> FiniteSet {
        self.assignments.keys().copied().collect()
    }

    pub fn get(&self, coord: usize) -> Option<usize> {
        self.assignments.get(&coord).copied()
    }

    /// Whether this point lies in every box of `indices` on every coordinate
    /// the box constrains.
    pub fn lies_in(&self, instance: &ProductInstance, indices: &[usize]) -> bool {
        indices.iter().all(|&g| {
            instance.boxes()[g].support.keys().all(|&xi| {
                let u = instance.open(g, xi).expect("validated instance");
                self.get(xi).is_some_and(|x| u.contains(x))
            })
        })
    }
}

/// Selections made by the pipeline.
///
/// `block_selections` is keyed by label `α ∈ I`; label `α` draws its boxes
/// from block `block_source[α]` and is matched with that block's kernel. With
/// shift 0 every label is its own source.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WitnessPlan {
    pub support_cert: DoubleDeltaCertificate,
    /// Boxes whose projections to `A` are centered.
    pub kernel_selection: Vec<usize>,
    pub block_selections: BTreeMap<usize, Vec<usize>>,
    pub block_source: BTreeMap<usize, usize>,
    /// `γ ↦ α(γ)`, the label whose selection contains `γ`.
    pub block_of: BTreeMap<usize, usize>,
}

impl WitnessPlan {
    /// `J`, the union of the block selections.
    pub fn selected(&self) -> Vec<usize> {
        self.block_of.keys().copied().collect()
    }

    /// `A_{α(γ)}` (shifted to the label's source block).
    fn block_kernel(&self, gamma: usize) -> Result<&FiniteSet> {
        let label = self
            .block_of
            .get(&gamma)
            .ok_or_else(|| Error::PlanInvalid(format!("box {gamma} is not selected")))?;
        let source = self
            .block_source
            .get(label)
            .ok_or_else(|| Error::PlanInvalid(format!("label {label} has no source block")))?;
        self.support_cert
            .kernel_of_block(*source)
            .ok_or_else(|| Error::PlanInvalid(format!("no kernel for block {source}")))
    }
}

/// The pieces of an assembled point.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Witness {
    pub q: PartialPoint,
    pub r: PartialPoint,
    pub s: PartialPoint,
    /// `q ∪ r ∪ s`, extended by the least point on every other coordinate.
    pub point: PartialPoint,
}

/// Two-level delta-system over the supports `{B_γ}`, blocked as the instance.
pub fn reduce_supports(
    instance: &ProductInstance,
    params: &ExtractionParams,
    caps: &Caps,
) -> Option<DoubleDeltaCertificate> {
    extract_double_delta(&instance.support_family()?, params, caps)
}

/// [`reduce_supports`] with the exhaustive oracle in place of the extractor.
pub fn reduce_supports_exact(
    instance: &ProductInstance,
    params: &ExtractionParams,
    caps: &Caps,
) -> Result<Option<DoubleDeltaCertificate>> {
    match instance.support_family() {
        Some(fam) => find_double_delta_exact(&fam, params, caps),
        None => Ok(None),
    }
}

/// Global box indices of `J_α` for block `α` of the certificate.
fn certified_boxes(
    instance: &ProductInstance,
    cert: &DoubleDeltaCertificate,
    block: usize,
) -> Vec<usize> {
    let start = instance.block_range(block).start;
    cert.indices_of(block).iter().map(|&g| start + g).collect()
}

/// Largest subfamily of `candidates` whose restrictions to `coords` share a
/// point, ties broken toward the lexicographically least index list.
///
/// A centered family of boxes over a finite sub-product contains a common
/// point `p`, and the largest such family around `p` is every box containing
/// `p`. The search walks the points of the sub-product coordinate by
/// coordinate, pruning branches that can no longer beat the best so far.
fn largest_centered(
    instance: &ProductInstance,
    candidates: &[usize],
    coords: &FiniteSet,
    caps: &Caps,
) -> Result<Vec<usize>> {
    let points = coords.iter().try_fold(1usize, |acc, xi| {
        acc.checked_mul(instance.factors()[xi].point_count())
            .filter(|&p| p <= caps.selection_points)
    });
    if points.is_none() {
        return Err(Error::CapExceeded {
            what: "sub-product points",
            actual: coords
                .iter()
                .map(|xi| instance.factors()[xi].point_count())
                .fold(1usize, usize::saturating_mul),
            cap: caps.selection_points,
        });
    }

    fn walk(
        instance: &ProductInstance,
        coords: &[usize],
        survivors: Vec<usize>,
        best: &mut Option<Vec<usize>>,
    ) {
        if let Some(b) = best {
            if survivors.len() < b.len() {
                return;
            }
        }
        let Some((&xi, rest)) = coords.split_first() else {
            let better = match best {
                None => true,
                Some(b) => survivors.len() > b.len() || survivors < *b,
            };
            if better {
                *best = Some(survivors);
            }
            return;
        };
        let mut seen = BTreeSet::new();
        for x in 0..instance.factors()[xi].point_count() {
            let next: Vec<usize> = survivors
                .iter()
                .copied()
                .filter(|&g| instance.open(g, xi).is_none_or(|u| u.contains(x)))
                .collect();
            if seen.insert(next.clone()) {
                walk(instance, rest, next, best);
            }
        }
    }

    let mut best = None;
    walk(
        instance,
        coords.as_slice(),
        normalize_indices(candidates),
        &mut best,
    );
    Ok(best.unwrap_or_default())
}

/// Boxes from `⋃_{α∈I} J_α` whose projections to `A` are centered.
/// With `A = ∅` every eligible box qualifies.
pub fn select_kernel_centered(
    instance: &ProductInstance,
    cert: &DoubleDeltaCertificate,
    target: usize,
    caps: &Caps,
) -> Result<Option<Vec<usize>>> {
    let eligible: Vec<usize> = cert
        .block_indices
        .iter()
        .flat_map(|&a| certified_boxes(instance, cert, a))
        .collect();
    let best = largest_centered(instance, &eligible, &cert.global_kernel, caps)?;
    Ok((best.len() >= target).then_some(best))
}

/// Boxes of block `α`'s certified selection (optionally restricted to
/// `within`) whose projections to `A_α` are centered.
pub fn select_block_centered(
    instance: &ProductInstance,
    cert: &DoubleDeltaCertificate,
    block: usize,
    target: usize,
    within: Option<&[usize]>,
    caps: &Caps,
) -> Result<Option<Vec<usize>>> {
    let kernel = cert
        .kernel_of_block(block)
        .filter(|_| cert.block_indices.contains(&block))
        .ok_or_else(|| Error::InvalidParams(format!("block {block} is not in the certificate")))?;
    let mut candidates = certified_boxes(instance, cert, block);
    if let Some(allowed) = within {
        candidates.retain(|g| allowed.contains(g));
    }
    let best = largest_centered(instance, &candidates, kernel, caps)?;
    Ok((best.len() >= target).then_some(best))
}

fn least_common_point(instance: &ProductInstance, boxes: &[usize], coord: usize) -> Option<usize> {
    boxes
        .iter()
        .filter_map(|&g| instance.open(g, coord))
        .fold(
            FiniteSet::range(instance.factors()[coord].point_count()),
            |acc, u| acc.intersection(u),
        )
        .first()
}

fn insert_disjoint(target: &mut PartialPoint, piece: &PartialPoint, what: &str) -> Result<()> {
    for (&xi, &x) in &piece.assignments {
        if target.assignments.insert(xi, x).is_some() {
            return Err(Error::DomainClash(format!(
                "{what}: coordinate {xi} assigned twice"
            )));
        }
    }
    Ok(())
}

/// Builds `q`, `r`, `s` for the finite subfamily `i_fin` and checks
/// that their domains are pairwise disjoint before gluing them into a point.
pub fn assemble_witness(
    instance: &ProductInstance,
    plan: &WitnessPlan,
    i_fin: &[usize],
) -> Result<Witness> {
    let i_fin = normalize_indices(i_fin);
    if i_fin.is_empty() {
        return Err(Error::PlanInvalid("empty subfamily".into()));
    }
    instance.check_indices(&i_fin)?;
    let global = &plan.support_cert.global_kernel;
    let supports: BTreeMap<usize, FiniteSet> = i_fin
        .iter()
        .map(|&g| (g, instance.boxes()[g].support_set()))
        .collect();
    let kernels: BTreeMap<usize, &FiniteSet> = i_fin
        .iter()
        .map(|&g| plan.block_kernel(g).map(|k| (g, k)))
        .collect::<Result<_>>()?;

    for &g in &i_fin {
        if !global.is_subset(kernels[&g]) || !kernels[&g].is_subset(&supports[&g]) {
            return Err(Error::PlanInvalid(format!(
                "kernel chain A ⊆ A_α ⊆ B_γ fails for box {g}"
            )));
        }
    }
    for (&g, &d) in i_fin.iter().tuple_combinations() {
        let (hi, lo) = if plan.block_of[&g] >= plan.block_of[&d] {
            (g, d)
        } else {
            (d, g)
        };
        if !supports[&hi]
            .difference(kernels[&hi])
            .is_disjoint(&supports[&lo])
        {
            return Err(Error::DomainClash(format!(
                "petal of box {hi} meets the support of box {lo}"
            )));
        }
    }

    let mut q = PartialPoint::default();
    for xi in global.iter() {
        let x = least_common_point(instance, &i_fin, xi).ok_or_else(|| {
            Error::PlanInvalid(format!(
                "kernel projections share no point at coordinate {xi}"
            ))
        })?;
        q.assignments.insert(xi, x);
    }

    let mut by_label: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for &g in &i_fin {
        by_label.entry(plan.block_of[&g]).or_default().push(g);
    }
    let mut r = PartialPoint::default();
    for members in by_label.values() {
        let kernel = kernels[&members[0]];
        let mut r_alpha = PartialPoint::default();
        for xi in kernel.iter() {
            let x = least_common_point(instance, members, xi).ok_or_else(|| {
                Error::PlanInvalid(format!(
                    "block-kernel projections share no point at coordinate {xi}"
                ))
            })?;
            r_alpha.assignments.insert(xi, x);
        }
        r_alpha.assignments.retain(|xi, _| !global.contains(*xi));
        insert_disjoint(&mut r, &r_alpha, "r")?;
    }

    let mut s = PartialPoint::default();
    for &g in &i_fin {
        let mut piece = PartialPoint::default();
        for xi in supports[&g].difference(kernels[&g]).iter() {
            let x = instance
                .open(g, xi)
                .and_then(FiniteSet::first)
                .ok_or_else(|| Error::PlanInvalid(format!("box {g} has an empty open at {xi}")))?;
            piece.assignments.insert(xi, x);
        }
        insert_disjoint(&mut s, &piece, "s")?;
    }

    let (dq, dr, ds) = (q.domain(), r.domain(), s.domain());
    if !dq.is_disjoint(&dr) || !dq.is_disjoint(&ds) || !dr.is_disjoint(&ds) {
        return Err(Error::DomainClash("dom(q), dom(r), dom(s) overlap".into()));
    }

    let mut point = PartialPoint::default();
    insert_disjoint(&mut point, &q, "q")?;
    insert_disjoint(&mut point, &r, "r")?;
    insert_disjoint(&mut point, &s, "s")?;
    for xi in 0..instance.factors().len() {
        point.assignments.entry(xi).or_insert(0);
    }
    Ok(Witness { q, r, s, point })
}

/// Knobs for [`run_pipeline`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PipelineParams {
    pub extraction: ExtractionParams,
    /// Minimum size of the kernel-centered selection.
    pub kernel_target: usize,
    /// Minimum size of each block selection.
    pub block_target: usize,
    /// Label `α` draws from the block `shift` places after it in `I`.
    pub shift: usize,
    /// Largest subfamily size checked.
    pub subset_cap: usize,
    /// Use the exhaustive oracle for the support reduction.
    pub use_oracle: bool,
}

impl Default for PipelineParams {
    fn default() -> Self {
        PipelineParams {
            extraction: ExtractionParams::default(),
            kernel_target: 2,
            block_target: 2,
            shift: 0,
            subset_cap: 4,
            use_oracle: false,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PipelineCertificates {
    pub support: Option<DoubleDeltaCertificate>,
    pub kernel_selection: Option<Vec<usize>>,
    pub block_selections: BTreeMap<usize, Vec<usize>>,
    pub block_source: BTreeMap<usize, usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubsetCheck {
    #[serde(rename = "I")]
    pub indices: Vec<usize>,
    pub ok: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PipelineReport {
    #[serde(rename = "J")]
    pub selected: Vec<usize>,
    pub certificates: PipelineCertificates,
    pub subset_checks: Vec<SubsetCheck>,
    pub failed_stage: Option<String>,
}

impl PipelineReport {
    pub fn passed(&self) -> bool {
        self.failed_stage.is_none() && self.subset_checks.iter().all(|c| c.ok)
    }

    /// The plan behind `J`, rebuilt from the certificates of a run that got
    /// past every selection stage.
    pub fn plan(&self) -> Option<WitnessPlan> {
        if self.failed_stage.is_some() {
            return None;
        }
        let c = &self.certificates;
        let block_of = c
            .block_selections
            .iter()
            .flat_map(|(&label, chosen)| chosen.iter().map(move |&g| (g, label)))
            .collect();
        Some(WitnessPlan {
            support_cert: c.support.clone()?,
            kernel_selection: c.kernel_selection.clone()?,
            block_selections: c.block_selections.clone(),
            block_source: c.block_source.clone(),
            block_of,
        })
    }

    fn fail(mut self, stage: &str) -> Self {
        self.failed_stage = Some(stage.to_string());
        self
    }
}

/// Runs every stage and checks each subfamily of the selected boxes up to
/// `subset_cap` members: the assembled point must lie in every box.
pub fn run_pipeline(
    instance: &ProductInstance,
    params: &PipelineParams,
    caps: &Caps,
) -> Result<PipelineReport> {
    let mut report = PipelineReport::default();

    let cert = if params.use_oracle {
        reduce_supports_exact(instance, &params.extraction, caps)?
    } else {
        reduce_supports(instance, &params.extraction, caps)
    };
    let Some(cert) = cert else {
        return Ok(report.fail("reduce_supports"));
    };
    report.certificates.support = Some(cert.clone());

    let Some(kernel_selection) =
        select_kernel_centered(instance, &cert, params.kernel_target, caps)?
    else {
        return Ok(report.fail("select_kernel_centered"));
    };
    report.certificates.kernel_selection = Some(kernel_selection.clone());

    let labels = &cert.block_indices;
    let mut block_selections = BTreeMap::new();
    let mut block_source = BTreeMap::new();
    let mut block_of = BTreeMap::new();
    for (pos, &label) in labels.iter().enumerate() {
        let Some(&source) = labels.get(pos + params.shift) else {
            break;
        };
        let chosen = select_block_centered(
            instance,
            &cert,
            source,
            params.block_target,
            Some(&kernel_selection),
            caps,
        )?;
        let Some(chosen) = chosen else {
            return Ok(report.fail("select_block_centered"));
        };
        for &g in &chosen {
            block_of.insert(g, label);
        }
        block_source.insert(label, source);
        block_selections.insert(label, chosen);
    }
    if block_selections.is_empty() {
        return Ok(report.fail("select_block_centered"));
    }
    report.certificates.block_selections = block_selections.clone();
    report.certificates.block_source = block_source.clone();

    let plan = WitnessPlan {
        support_cert: cert,
        kernel_selection,
        block_selections,
        block_source,
        block_of,
    };
    report.selected = plan.selected();

    let subsets: Vec<Vec<usize>> = (1..=params.subset_cap.min(report.selected.len()))
        .flat_map(|size| report.selected.iter().copied().combinations(size))
        .collect();
    report.subset_checks = subsets
        .into_par_iter()
        .map(|indices| {
            let ok = assemble_witness(instance, &plan, &indices)
                .is_ok_and(|w| w.point.lies_in(instance, &indices));
            SubsetCheck { indices, ok }
        })
        .collect();
    Ok(report)
}
