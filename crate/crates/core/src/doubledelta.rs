//! Two-level delta-systems over block-indexed families.
//!
//! A [`DoubleFamily`] holds sets `A(α, γ)` where `α` names a block and `γ` a
//! position inside it. A [`DoubleDeltaCertificate`] `(m, I, {J_α}, {A_α}, A)`
//! satisfies, for distinct `α, β ∈ I`:
//!
//! 1. every `γ ∈ J_α` is a position of block `α`;
//! 2. `A_α ∩ A_β = A`;
//! 3. `A(α, γ) ∩ A(α, δ) = A_α` for distinct `γ, δ ∈ J_α`;
//! 4. `A(α, γ) ∩ A(β, δ) = A` for `γ ∈ J_α`, `δ ∈ J_β`;
//! 5. `|A_α| = m`.

use std::collections::BTreeMap;

use itertools::Itertools;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::setfam::{
    check_ground, find_largest_delta_system, kernel_of, normalize_indices, sorted_unique,
    FiniteSet, IndexedFamily,
};
use crate::Caps;

/// Sets `A(α, γ)` grouped into blocks. Blocks may differ in length.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawDoubleFamily")]
pub struct DoubleFamily {
    ground_size: usize,
    blocks: Vec<Vec<FiniteSet>>,
}

#[derive(Deserialize)]
struct RawDoubleFamily {
    ground_size: usize,
    blocks: Vec<Vec<FiniteSet>>,
}

impl TryFrom<RawDoubleFamily> for DoubleFamily {
    type Error = Error;

    fn try_from(raw: RawDoubleFamily) -> Result<Self> {
        DoubleFamily::new(raw.ground_size, raw.blocks)
    }
}

impl DoubleFamily {
    pub fn new(ground_size: usize, blocks: Vec<Vec<FiniteSet>>) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::InvalidParams(
                "a double family needs at least one block".into(),
            ));
        }
        for block in &blocks {
            check_ground(ground_size, block)?;
        }
        Ok(DoubleFamily {
            ground_size,
            blocks,
        })
    }

    pub fn ground_size(&self) -> usize {
        self.ground_size
    }

    pub fn blocks(&self) -> &[Vec<FiniteSet>] {
        &self.blocks
    }

    pub fn block_count(&self) -> usize {
        self.blocks.len()
    }

    pub fn total_sets(&self) -> usize {
        self.blocks.iter().map(Vec::len).sum()
    }

    pub fn get(&self, block: usize, position: usize) -> Option<&FiniteSet> {
        self.blocks.get(block)?.get(position)
    }

    /// Block `α` as a single-level family.
    pub fn block_family(&self, block: usize) -> Option<IndexedFamily> {
        let sets = self.blocks.get(block)?.clone();
        Some(IndexedFamily::new(self.ground_size, sets).expect("validated on construction"))
    }
}

/// Certificate `(m, I, {J_α}, {A_α}, A)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DoubleDeltaCertificate {
    pub m: usize,
    #[serde(rename = "I", deserialize_with = "sorted_unique")]
    pub block_indices: Vec<usize>,
    #[serde(rename = "J")]
    pub per_block_indices: BTreeMap<usize, Vec<usize>>,
    #[serde(rename = "A_blocks")]
    pub per_block_kernels: BTreeMap<usize, FiniteSet>,
    #[serde(rename = "A")]
    pub global_kernel: FiniteSet,
}

impl DoubleDeltaCertificate {
    /// `J_α` for a block in `I`.
    pub fn indices_of(&self, block: usize) -> &[usize] {
        self.per_block_indices
            .get(&block)
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    pub fn kernel_of_block(&self, block: usize) -> Option<&FiniteSet> {
        self.per_block_kernels.get(&block)
    }
}

/// Finite stand-ins for the sizes of `I` and of each `J_α`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawParams")]
pub struct ExtractionParams {
    block_count_target: usize,
    per_block_target: usize,
}

#[derive(Deserialize)]
struct RawParams {
    block_count_target: usize,
    per_block_target: usize,
}

impl TryFrom<RawParams> for ExtractionParams {
    type Error = Error;

    fn try_from(raw: RawParams) -> Result<Self> {
        ExtractionParams::new(raw.block_count_target, raw.per_block_target)
    }
}

impl ExtractionParams {
    /// `s` blocks, each keeping at least `t` members. Both must be ≥ 2.
    pub fn new(block_count_target: usize, per_block_target: usize) -> Result<Self> {
        if block_count_target < 2 || per_block_target < 2 {
            return Err(Error::InvalidParams(format!(
                "targets must be at least 2 (got s={block_count_target}, t={per_block_target})"
            )));
        }
        Ok(ExtractionParams {
            block_count_target,
            per_block_target,
        })
    }

    pub fn block_count_target(&self) -> usize {
        self.block_count_target
    }

    pub fn per_block_target(&self) -> usize {
        self.per_block_target
    }
}

impl Default for ExtractionParams {
    fn default() -> Self {
        ExtractionParams {
            block_count_target: 2,
            per_block_target: 2,
        }
    }
}

/// Per-condition outcome of [`verify_double_delta`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub block_range: bool,
    pub kernels_meet_in_global: bool,
    pub within_block: bool,
    pub cross_block: bool,
    pub uniform_size: bool,
    pub passed: bool,
}

impl ConditionReport {
    fn new(
        block_range: bool,
        kernels_meet_in_global: bool,
        within_block: bool,
        cross_block: bool,
        uniform_size: bool,
    ) -> Self {
        ConditionReport {
            block_range,
            kernels_meet_in_global,
            within_block,
            cross_block,
            uniform_size,
            passed: block_range
                && kernels_meet_in_global
                && within_block
                && cross_block
                && uniform_size,
        }
    }
}

/// Checks the five certificate conditions by direct enumeration.
///
/// Indices outside their block fail condition (1) and are skipped by the
/// intersection checks.
pub fn verify_double_delta(
    dfam: &DoubleFamily,
    cert: &DoubleDeltaCertificate,
) -> Result<ConditionReport> {
    let blocks = normalize_indices(&cert.block_indices);
    if blocks.len() < 2 {
        return Err(Error::DegenerateSize(blocks.len()));
    }
    for key in cert.per_block_indices.keys() {
        if !blocks.contains(key) {
            return Err(Error::MalformedCertificate(format!(
                "J has an entry for block {key} outside I"
            )));
        }
    }
    for key in cert.per_block_kernels.keys() {
        if !blocks.contains(key) {
            return Err(Error::MalformedCertificate(format!(
                "A_blocks has an entry for block {key} outside I"
            )));
        }
    }

    let mut members: Vec<(usize, Vec<usize>, &FiniteSet)> = Vec::with_capacity(blocks.len());
    for &alpha in &blocks {
        let js = cert
            .per_block_indices
            .get(&alpha)
            .ok_or_else(|| Error::MalformedCertificate(format!("J is missing block {alpha}")))?;
        let kernel = cert.per_block_kernels.get(&alpha).ok_or_else(|| {
            Error::MalformedCertificate(format!("A_blocks is missing block {alpha}"))
        })?;
        let js = normalize_indices(js);
        if js.len() < 2 {
            return Err(Error::DegenerateSize(js.len()));
        }
        members.push((alpha, js, kernel));
    }

    let block_range = members
        .iter()
        .all(|(alpha, js, _)| js.iter().all(|&g| dfam.get(*alpha, g).is_some()));

    let kernels_meet_in_global = members
        .iter()
        .tuple_combinations()
        .all(|(a, b)| a.2.intersection(b.2) == cert.global_kernel);

    let sets_of = |alpha: usize, js: &[usize]| -> Vec<FiniteSet> {
        js.iter()
            .filter_map(|&g| dfam.get(alpha, g).cloned())
            .collect()
    };
    let resolved: Vec<(Vec<FiniteSet>, &FiniteSet)> = members
        .iter()
        .map(|(alpha, js, kernel)| (sets_of(*alpha, js), *kernel))
        .collect();

    let within_block = resolved.iter().all(|(sets, kernel)| {
        sets.iter()
            .tuple_combinations()
            .all(|(x, y)| &x.intersection(y) == *kernel)
    });

    let cross_block = resolved.iter().tuple_combinations().all(|(a, b)| {
        a.0.iter()
            .all(|x| b.0.iter().all(|y| x.intersection(y) == cert.global_kernel))
    });

    let uniform_size = members.iter().all(|(_, _, kernel)| kernel.len() == cert.m);

    Ok(ConditionReport::new(
        block_range,
        kernels_meet_in_global,
        within_block,
        cross_block,
        uniform_size,
    ))
}

/// Greedy extraction mirroring the existence proof.
///
/// 1. Each block with at least two members gets a largest delta-system
///    `J'_α` with kernel `A_α`.
/// 2. Blocks are grouped by `|A_α|`; the largest group wins, ties going to the
///    smaller `m`.
/// 3. A largest delta-system among those kernels gives `I` and `A`.
/// 4. In ascending order of `α ∈ I`, `J_α` keeps the `γ ∈ J'_α` whose petal
///    `A(α,γ) \ A_α` misses `B_α`, the union of all kernels and of every set
///    already kept in earlier blocks.
///
/// Fails when `|I| < s` or some `|J_α| < t`.
pub fn extract_double_delta(
    dfam: &DoubleFamily,
    params: &ExtractionParams,
    caps: &Caps,
) -> Option<DoubleDeltaCertificate> {
    let s = params.block_count_target;
    let t = params.per_block_target;

    // Phase 1.
    let per_block: BTreeMap<usize, (Vec<usize>, FiniteSet)> = (0..dfam.block_count())
        .filter_map(|alpha| {
            let fam = dfam.block_family(alpha)?;
            find_largest_delta_system(&fam, caps.exact_family)
                .map(|c| (alpha, (c.indices, c.kernel)))
        })
        .collect();

    // Phase 2.
    let mut fibers: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (&alpha, (_, kernel)) in &per_block {
        fibers.entry(kernel.len()).or_default().push(alpha);
    }
    let (m, fiber) = fibers.into_iter().fold(
        None,
        |best: Option<(usize, Vec<usize>)>, (m, f)| match best {
            Some((_, ref bf)) if bf.len() >= f.len() => best,
            _ => Some((m, f)),
        },
    )?;
    if fiber.len() < s {
        return None;
    }

    // Phase 3.
    let kernels = IndexedFamily::new(
        dfam.ground_size(),
        fiber.iter().map(|a| per_block[a].1.clone()).collect(),
    )
    .expect("kernels lie in the ground set");
    let top = find_largest_delta_system(&kernels, caps.exact_family)?;
    let chosen: Vec<usize> = top.indices.iter().map(|&i| fiber[i]).collect();
    if chosen.len() < s {
        return None;
    }

    // Phase 4.
    let all_kernels = chosen
        .iter()
        .fold(FiniteSet::new(), |acc, a| acc.union(&per_block[a].1));
    let mut used = all_kernels;
    let mut per_block_indices = BTreeMap::new();
    let mut per_block_kernels = BTreeMap::new();
    for &alpha in &chosen {
        let (candidates, kernel) = &per_block[&alpha];
        let kept: Vec<usize> = candidates
            .iter()
            .copied()
            .filter(|&g| {
                let set = dfam.get(alpha, g).expect("index from block search");
                set.difference(kernel).is_disjoint(&used)
            })
            .collect();
        if kept.len() < t {
            return None;
        }
        for &g in &kept {
            used = used.union(dfam.get(alpha, g).expect("index from block search"));
        }
        per_block_indices.insert(alpha, kept);
        per_block_kernels.insert(alpha, kernel.clone());
    }

    let cert = DoubleDeltaCertificate {
        m,
        block_indices: chosen,
        per_block_indices,
        per_block_kernels,
        global_kernel: top.kernel,
    };
    debug_assert!(verify_double_delta(dfam, &cert).is_ok_and(|r| r.passed));
    Some(cert)
}

/// Exhaustive oracle: a certificate with `|I| ≥ s` and every `|J_α| ≥ t` exists
/// iff one with `|I| = s` and every `|J_α| = t` does (sub-selections keep all
/// five conditions), so only those sizes are enumerated. The lexicographically
/// least `I`, then the least choice of `J_α` block by block, is returned.
pub fn find_double_delta_exact(
    dfam: &DoubleFamily,
    params: &ExtractionParams,
    caps: &Caps,
) -> Result<Option<DoubleDeltaCertificate>> {
    if dfam.total_sets() > caps.double_exact_sets {
        return Err(Error::CapExceeded {
            what: "total set count",
            actual: dfam.total_sets(),
            cap: caps.double_exact_sets,
        });
    }
    if dfam.block_count() > caps.double_exact_blocks {
        return Err(Error::CapExceeded {
            what: "block count",
            actual: dfam.block_count(),
            cap: caps.double_exact_blocks,
        });
    }
    let s = params.block_count_target;
    let t = params.per_block_target;

    // All t-member delta-systems of each block, in lexicographic order.
    let options: Vec<Vec<(Vec<usize>, FiniteSet)>> = (0..dfam.block_count())
        .map(|alpha| {
            let fam = dfam.block_family(alpha).expect("block in range");
            (0..fam.len())
                .combinations(t)
                .filter_map(|js| kernel_of(&fam, &js).ok().map(|k| (js, k)))
                .collect()
        })
        .collect();

    let eligible: Vec<usize> = (0..dfam.block_count())
        .filter(|&a| !options[a].is_empty())
        .collect();
    for blocks in eligible.into_iter().combinations(s) {
        let mut picks = Vec::with_capacity(s);
        if exact_pick(dfam, &blocks, &options, &mut picks, None) {
            let global_kernel = picks[0].1.intersection(&picks[1].1);
            let m = picks[0].1.len();
            let (per_block_indices, per_block_kernels) = blocks
                .iter()
                .zip(picks)
                .map(|(&a, (js, k))| ((a, js), (a, k)))
                .unzip();
            return Ok(Some(DoubleDeltaCertificate {
                m,
                block_indices: blocks,
                per_block_indices,
                per_block_kernels,
                global_kernel,
            }));
        }
    }
    Ok(None)
}

fn exact_pick(
    dfam: &DoubleFamily,
    blocks: &[usize],
    options: &[Vec<(Vec<usize>, FiniteSet)>],
    picks: &mut Vec<(Vec<usize>, FiniteSet)>,
    global: Option<&FiniteSet>,
) -> bool {
    let depth = picks.len();
    if depth == blocks.len() {
        return true;
    }
    let alpha = blocks[depth];
    for (js, kernel) in &options[alpha] {
        if let Some((_, first)) = picks.first() {
            if kernel.len() != first.len() {
                continue;
            }
        }
        let global_here = match global {
            Some(g) => g.clone(),
            None if depth == 1 => picks[0].1.intersection(kernel),
            None => FiniteSet::new(),
        };
        let consistent = picks
            .iter()
            .zip(blocks)
            .all(|((other_js, other_k), &beta)| {
                other_k.intersection(kernel) == global_here
                    && js.iter().all(|&g| {
                        let x = dfam.get(alpha, g).expect("option index");
                        other_js.iter().all(|&d| {
                            x.intersection(dfam.get(beta, d).expect("option index")) == global_here
                        })
                    })
            });
        if !consistent {
            continue;
        }
        picks.push((js.clone(), kernel.clone()));
        let next_global = if depth >= 1 { Some(&global_here) } else { None };
        if exact_pick(dfam, blocks, options, picks, next_global) {
            return true;
        }
        picks.pop();
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dfam(ground: usize, blocks: &[&[&[usize]]]) -> DoubleFamily {
        DoubleFamily::new(
            ground,
            blocks
                .iter()
                .map(|b| b.iter().map(|s| s.to_vec().into()).collect())
                .collect(),
        )
        .unwrap()
    }

    fn p(s: usize, t: usize) -> ExtractionParams {
        ExtractionParams::new(s, t).unwrap()
    }

    pub(crate) fn worked_example() -> DoubleFamily {
        dfam(
            7,
            &[&[&[0, 1], &[0, 2], &[0, 3]], &[&[0, 4], &[0, 5], &[0, 6]]],
        )
    }

    #[test]
    fn params_reject_small_targets() {
        assert!(ExtractionParams::new(1, 2).is_err());
        assert!(ExtractionParams::new(2, 1).is_err());
        assert!(serde_json::from_str::<ExtractionParams>(
            r#"{"block_count_target":2,"per_block_target":0}"#
        )
        .is_err());
    }

    #[test]
    fn extract_worked_example() {
        let d = worked_example();
        let c = extract_double_delta(&d, &p(2, 2), &Caps::default()).unwrap();
        assert_eq!(c.m, 1);
        assert_eq!(c.block_indices, vec![0, 1]);
        assert_eq!(c.global_kernel, FiniteSet::from([0]));
        assert_eq!(c.per_block_kernels[&0], FiniteSet::from([0]));
        assert_eq!(c.per_block_kernels[&1], FiniteSet::from([0]));
        assert_eq!(c.per_block_indices[&0], vec![0, 1, 2]);
        assert_eq!(c.per_block_indices[&1], vec![0, 1, 2]);
        assert!(verify_double_delta(&d, &c).unwrap().passed);
    }

    #[test]
    fn extract_single_block_fails() {
        let d = dfam(4, &[&[&[0], &[1], &[2]]]);
        assert_eq!(extract_double_delta(&d, &p(2, 2), &Caps::default()), None);
    }

    #[test]
    fn extract_repeated_sets() {
        let d = dfam(8, &[&[&[7], &[7]], &[&[7], &[7]]]);
        let c = extract_double_delta(&d, &p(2, 2), &Caps::default()).unwrap();
        assert_eq!(c.m, 1);
        assert_eq!(c.global_kernel, FiniteSet::from([7]));
        assert_eq!(c.per_block_indices[&0], vec![0, 1]);
        assert_eq!(c.per_block_indices[&1], vec![0, 1]);
    }

    #[test]
    fn filtering_drops_petals_hitting_earlier_blocks() {
        // Block 1's member {0,1} reuses petal element 1 from block 0.
        let d = dfam(
            8,
            &[
                &[&[0, 1], &[0, 2], &[0, 3]],
                &[&[0, 1], &[0, 4], &[0, 5], &[0, 6]],
            ],
        );
        let c = extract_double_delta(&d, &p(2, 2), &Caps::default()).unwrap();
        assert_eq!(c.per_block_indices[&0], vec![0, 1, 2]);
        assert_eq!(c.per_block_indices[&1], vec![1, 2, 3]);
        assert!(verify_double_delta(&d, &c).unwrap().passed);
    }

    #[test]
    fn verify_tampered_block_kernel() {
        let d = worked_example();
        let mut c = extract_double_delta(&d, &p(2, 2), &Caps::default()).unwrap();
        c.per_block_kernels.insert(0, FiniteSet::new());
        let r = verify_double_delta(&d, &c).unwrap();
        assert!(!r.within_block);
        assert!(!r.passed);
    }

    #[test]
    fn verify_cross_block_failure() {
        let d = dfam(5, &[&[&[0, 1], &[0, 2]], &[&[1, 3], &[1, 4]]]);
        let c = DoubleDeltaCertificate {
            m: 1,
            block_indices: vec![0, 1],
            per_block_indices: BTreeMap::from([(0, vec![0, 1]), (1, vec![0, 1])]),
            per_block_kernels: BTreeMap::from([
                (0, FiniteSet::from([0])),
                (1, FiniteSet::from([1])),
            ]),
            global_kernel: FiniteSet::new(),
        };
        let r = verify_double_delta(&d, &c).unwrap();
        assert!(r.block_range && r.kernels_meet_in_global && r.within_block && r.uniform_size);
        assert!(!r.cross_block);
        assert!(!r.passed);
    }

    #[test]
    fn verify_degenerate_and_malformed() {
        let d = worked_example();
        let mut c = extract_double_delta(&d, &p(2, 2), &Caps::default()).unwrap();
        c.per_block_indices.insert(1, vec![2]);
        assert_eq!(verify_double_delta(&d, &c), Err(Error::DegenerateSize(1)));

        let mut c = extract_double_delta(&d, &p(2, 2), &Caps::default()).unwrap();
        c.block_indices = vec![0];
        assert!(matches!(
            verify_double_delta(&d, &c),
            Err(Error::DegenerateSize(1))
        ));

        let mut c = extract_double_delta(&d, &p(2, 2), &Caps::default()).unwrap();
        c.per_block_kernels.remove(&1);
        assert!(matches!(
            verify_double_delta(&d, &c),
            Err(Error::MalformedCertificate(_))
        ));
    }

    #[test]
    fn verify_out_of_range_index_fails_condition_one() {
        let d = worked_example();
        let mut c = extract_double_delta(&d, &p(2, 2), &Caps::default()).unwrap();
        c.per_block_indices.insert(1, vec![0, 9]);
        let r = verify_double_delta(&d, &c).unwrap();
        assert!(!r.block_range);
        assert!(!r.passed);
    }

    #[test]
    fn exact_examples() {
        let caps = Caps::default();
        let c = find_double_delta_exact(&worked_example(), &p(2, 2), &caps)
            .unwrap()
            .unwrap();
        assert!(verify_double_delta(&worked_example(), &c).unwrap().passed);
        assert_eq!(c.per_block_indices[&0], vec![0, 1]);

        let d = dfam(3, &[&[&[0, 1]], &[&[0, 2]]]);
        assert_eq!(find_double_delta_exact(&d, &p(2, 2), &caps).unwrap(), None);

        let d = dfam(4, &[&[&[0], &[1]], &[&[2], &[3]]]);
        let c = find_double_delta_exact(&d, &p(2, 2), &caps)
            .unwrap()
            .unwrap();
        assert_eq!(c.m, 0);
        assert!(c.global_kernel.is_empty());
        assert!(c.per_block_kernels.values().all(FiniteSet::is_empty));
    }

    #[test]
    fn exact_caps() {
        let caps = Caps {
            double_exact_sets: 5,
            ..Caps::default()
        };
        assert!(matches!(
            find_double_delta_exact(&worked_example(), &p(2, 2), &caps),
            Err(Error::CapExceeded { actual: 6, .. })
        ));
        let d = dfam(1, &[&[] as &[&[usize]]; 5]);
        assert!(matches!(
            find_double_delta_exact(&d, &p(2, 2), &Caps::default()),
            Err(Error::CapExceeded {
                what: "block count",
                ..
            })
        ));
    }

    #[test]
    fn exact_needs_uniform_m() {
        // Kernels {0} and {} can never both appear.
        let d = dfam(6, &[&[&[0, 1], &[0, 2]], &[&[3], &[4]]]);
        assert_eq!(
            find_double_delta_exact(&d, &p(2, 2), &Caps::default()).unwrap(),
            None
        );
    }

    #[test]
    fn certificate_json_shape() {
        let c = extract_double_delta(&worked_example(), &p(2, 2), &Caps::default()).unwrap();
        let v = serde_json::to_value(&c).unwrap();
        assert_eq!(
            v,
            serde_json::json!({
                "m": 1, "I": [0, 1], "J": {"0": [0, 1, 2], "1": [0, 1, 2]},
                "A_blocks": {"0": [0], "1": [0]}, "A": [0]
            })
        );
        let back: DoubleDeltaCertificate = serde_json::from_value(v).unwrap();
        assert_eq!(back, c);
    }
}
