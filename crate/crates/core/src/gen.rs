//! Seeded instance generators.
//!
//! Every generator is a pure function of its [`GenParams`]. The stream comes
//! from xoshiro256++ seeded through SplitMix64 (`rand_xoshiro`), which is
//! specified independently of platform and word size, so outputs and golden
//! files are portable.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;
use serde::{Deserialize, Serialize};

use crate::doubledelta::DoubleFamily;
use crate::error::{Error, Result};
use crate::setfam::{FiniteSet, IndexedFamily};
use crate::topo::{validate_space, FiniteSpace, OpenBox, ProductInstance, CATALOG};

const MAX_GROUND: usize = 1 << 16;
const MAX_COUNT: usize = 1 << 20;
const MAX_POINTS: usize = 64;
const MAX_FACTORS: usize = 1024;

/// Size knobs shared by all generators. Each generator reads only the knobs it
/// needs.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenParams {
    pub seed: u64,
    /// Sets in a family.
    pub set_count: usize,
    pub set_size_min: usize,
    pub set_size_max: usize,
    pub ground_size: usize,
    /// Blocks of a double family or of a product instance.
    pub block_count: usize,
    pub block_size_min: usize,
    pub block_size_max: usize,
    /// Catalog space for `gen_space`; drawn at random when absent.
    pub catalog: Option<usize>,
    pub points: usize,
    /// Random basis members tried (and kept only if the axioms still hold).
    pub perturb: usize,
    pub factor_count: usize,
    pub points_max: usize,
    pub box_count: usize,
    pub support_max: usize,
}

impl Default for GenParams {
    fn default() -> Self {
        GenParams {
            seed: 0,
            set_count: 8,
            set_size_min: 1,
            set_size_max: 3,
            ground_size: 10,
            block_count: 3,
            block_size_min: 2,
            block_size_max: 6,
            catalog: None,
            points: 2,
            perturb: 0,
            factor_count: 4,
            points_max: 3,
            box_count: 8,
            support_max: 2,
        }
    }
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParams(msg.into())
}

impl GenParams {
    fn rng(&self) -> Xoshiro256PlusPlus {
        Xoshiro256PlusPlus::seed_from_u64(self.seed)
    }

    fn check_sets(&self) -> Result<()> {
        if self.ground_size > MAX_GROUND {
            return Err(invalid(format!("ground_size above {MAX_GROUND}")));
        }
        if self.set_size_min > self.set_size_max {
            return Err(invalid("set_size_min exceeds set_size_max"));
        }
        if self.set_size_max > self.ground_size {
            return Err(invalid("set_size_max exceeds ground_size"));
        }
        Ok(())
    }

    fn check_space(&self, points: usize) -> Result<()> {
        if points == 0 || points > MAX_POINTS {
            return Err(invalid(format!("points must be in 1..={MAX_POINTS}")));
        }
        if self.perturb > MAX_COUNT {
            return Err(invalid("perturb too large"));
        }
        Ok(())
    }
}

fn random_set(rng: &mut Xoshiro256PlusPlus, p: &GenParams) -> FiniteSet {
    let size = rng.random_range(p.set_size_min..=p.set_size_max);
    sample(rng, p.ground_size, size).into_iter().collect()
}

pub fn gen_family(p: &GenParams) -> Result<IndexedFamily> {
    p.check_sets()?;
    if p.set_count > MAX_COUNT {
        return Err(invalid("set_count too large"));
    }
    let mut rng = p.rng();
    let sets = (0..p.set_count).map(|_| random_set(&mut rng, p)).collect();
    IndexedFamily::new(p.ground_size, sets)
}

pub fn gen_double_family(p: &GenParams) -> Result<DoubleFamily> {
    p.check_sets()?;
    if p.block_count == 0 || p.block_count > MAX_COUNT {
        return Err(invalid("block_count must be positive"));
    }
    if p.block_size_min > p.block_size_max || p.block_size_max > MAX_COUNT {
        return Err(invalid("bad block size range"));
    }
    let mut rng = p.rng();
    let blocks = (0..p.block_count)
        .map(|_| {
            let len = rng.random_range(p.block_size_min..=p.block_size_max);
            (0..len).map(|_| random_set(&mut rng, p)).collect()
        })
        .collect();
    DoubleFamily::new(p.ground_size, blocks)
}

fn space_with(
    rng: &mut Xoshiro256PlusPlus,
    catalog: usize,
    points: usize,
    perturb: usize,
) -> Result<FiniteSpace> {
    let mut space = FiniteSpace::catalog(catalog, points)?;
    for _ in 0..perturb {
        let size = rng.random_range(1..=points);
        let extra: FiniteSet = sample(rng, points, size).into_iter().collect();
        if space.basis().contains(&extra) {
            continue;
        }
        let mut basis = space.basis().to_vec();
        basis.push(extra);
        let candidate = FiniteSpace::new(points, basis)?;
        if validate_space(&candidate).is_ok() {
            space = candidate;
        }
    }
    Ok(space)
}

pub fn gen_space(p: &GenParams) -> Result<FiniteSpace> {
    p.check_space(p.points)?;
    let mut rng = p.rng();
    let catalog = match p.catalog {
        Some(id) if id >= CATALOG.len() => return Err(invalid(format!("catalog id {id}"))),
        Some(id) => id,
        None => rng.random_range(0..CATALOG.len()),
    };
    space_with(&mut rng, catalog, p.points, p.perturb)
}

/// Factors drawn from the catalog (point counts in `1..=points_max`), boxes
/// with supports of size `0..=support_max`, and `block_count` contiguous
/// blocks of near-equal length.
pub fn gen_instance(p: &GenParams) -> Result<ProductInstance> {
    p.check_space(p.points_max)?;
    if p.factor_count > MAX_FACTORS {
        return Err(invalid(format!("factor_count above {MAX_FACTORS}")));
    }
    if p.box_count > MAX_COUNT {
        return Err(invalid("box_count too large"));
    }
    if p.box_count > 0 && p.block_count == 0 {
        return Err(invalid("block_count must be positive"));
    }
    if p.support_max > p.factor_count {
        return Err(invalid("support_max exceeds factor_count"));
    }
    let mut rng = p.rng();
    let factors = (0..p.factor_count)
        .map(|_| {
            let catalog = rng.random_range(0..CATALOG.len());
            let points = rng.random_range(1..=p.points_max);
            space_with(&mut rng, catalog, points, p.perturb)
        })
        .collect::<Result<Vec<_>>>()?;
    let boxes = (0..p.box_count)
        .map(|_| {
            let size = rng.random_range(0..=p.support_max);
            let mut coords = sample(&mut rng, p.factor_count, size).into_vec();
            coords.sort_unstable();
            OpenBox::new(
                coords
                    .into_iter()
                    .map(|xi| (xi, rng.random_range(0..factors[xi].basis().len())))
                    .collect(),
            )
        })
        .collect();
    let blocks = p.block_count.min(p.box_count);
    let boundaries = if blocks == 0 {
        vec![0]
    } else {
        (0..=blocks).map(|a| a * p.box_count / blocks).collect()
    };
    ProductInstance::new(factors, boxes, boundaries)
}
