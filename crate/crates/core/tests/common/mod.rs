//! Brute-force oracles written against the raw data, sharing no search code
//! with the library.
#![allow(dead_code)]

use std::collections::BTreeSet;

use deltakit::{FiniteSpace, IndexedFamily, ProductInstance};

pub fn bitset(s: &deltakit::FiniteSet) -> u64 {
    s.iter().fold(0u64, |acc, x| acc | (1 << x))
}

/// Whether the sets at `idx` pairwise intersect in one common set.
pub fn is_sunflower(masks: &[u64], idx: &[usize]) -> bool {
    if idx.len() < 2 {
        return false;
    }
    let kernel = masks[idx[0]] & masks[idx[1]];
    idx.iter()
        .enumerate()
        .all(|(i, &a)| idx[i + 1..].iter().all(|&b| masks[a] & masks[b] == kernel))
}

/// Some `r`-subset of the family is a delta-system; checked over every
/// bitmask of indices.
pub fn has_sunflower(family: &IndexedFamily, r: usize) -> bool {
    let masks: Vec<u64> = family.sets().iter().map(bitset).collect();
    let n = masks.len();
    assert!(n < 24 && family.ground_size() <= 64);
    (0u32..1 << n).any(|sel| {
        sel.count_ones() as usize == r && {
            let idx: Vec<usize> = (0..n).filter(|i| sel >> i & 1 == 1).collect();
            is_sunflower(&masks, &idx)
        }
    })
}

/// Points of the sub-product over `coords`, as explicit assignments.
pub fn product_points(instance: &ProductInstance, coords: &[usize]) -> Vec<Vec<usize>> {
    let mut points = vec![Vec::new()];
    for &xi in coords {
        let n = instance.factors()[xi].point_count();
        points = points
            .into_iter()
            .flat_map(|p| {
                (0..n).map(move |x| {
                    let mut q = p.clone();
                    q.push(x);
                    q
                })
            })
            .collect();
    }
    points
}

/// Whether the assignment `point` on `coords` lies in box `g` (coordinates of
/// its support outside `coords` are ignored).
pub fn point_in_box(
    instance: &ProductInstance,
    g: usize,
    coords: &[usize],
    point: &[usize],
) -> bool {
    let bx = &instance.boxes()[g];
    coords
        .iter()
        .zip(point)
        .all(|(&xi, &x)| match bx.support.get(&xi) {
            None => true,
            Some(&m) => instance.factors()[xi].basis()[m].contains(x),
        })
}

/// Materialises the product over the union of the supports and looks for a
/// point in every listed box.
pub fn boxes_meet(instance: &ProductInstance, indices: &[usize]) -> bool {
    let coords: Vec<usize> = indices
        .iter()
        .flat_map(|&g| instance.boxes()[g].support.keys().copied())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    product_points(instance, &coords).iter().any(|p| {
        indices
            .iter()
            .all(|&g| point_in_box(instance, g, &coords, p))
    })
}

fn opens_share_point(space: &FiniteSpace, members: &[usize]) -> bool {
    (0..space.point_count()).any(|x| members.iter().all(|&m| space.basis()[m].contains(x)))
}

fn opens_pairwise_meet(space: &FiniteSpace, members: &[usize]) -> bool {
    members.iter().enumerate().all(|(i, &a)| {
        members[i + 1..]
            .iter()
            .all(|&b| opens_share_point(space, &[a, b]))
    })
}

fn k_subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    (0u32..1 << n)
        .filter(|s| s.count_ones() as usize == k)
        .map(|s| (0..n).filter(|i| s >> i & 1 == 1).collect())
        .collect()
}

/// `(n, k)` property over every length-`n` sequence (not just multisets) of
/// basis members.
pub fn property_holds(space: &FiniteSpace, n: usize, k: usize, linked: bool) -> bool {
    let b = space.basis().len();
    let subsets = k_subsets(n, k);
    let total = b.pow(n as u32);
    (0..total).all(|mut code| {
        let seq: Vec<usize> = (0..n)
            .map(|_| {
                let d = code % b;
                code /= b;
                d
            })
            .collect();
        subsets.iter().any(|pos| {
            let members: Vec<usize> = pos.iter().map(|&p| seq[p]).collect();
            if linked {
                opens_pairwise_meet(space, &members)
            } else {
                opens_share_point(space, &members)
            }
        })
    })
}

/// Catalog spaces with at most `max_points` points, duplicates removed.
pub fn small_catalog(max_points: usize) -> Vec<FiniteSpace> {
    let mut out: Vec<FiniteSpace> = Vec::new();
    for n in 1..=max_points {
        for id in 0..deltakit::topo::CATALOG.len() {
            let s = FiniteSpace::catalog(id, n).unwrap();
            if !out.contains(&s) {
                out.push(s);
            }
        }
    }
    out
}
