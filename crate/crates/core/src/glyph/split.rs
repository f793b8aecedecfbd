use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{GlyphError, Group};
use crate::rng;

pub const DEFAULT_FOLD_COUNT: usize = 5;

/// Child-level partition for one cross-validation fold.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSplit {
    pub training_children: BTreeSet<String>,
    pub validation_children: BTreeSet<String>,
    pub dysgraphic_children: BTreeSet<String>,
}

/// TD children are sorted, shuffled once by `seed` and cut into
/// `fold_count` blocks whose sizes differ by at most one; block
/// `fold_index` validates. Dysgraphic children never train or validate.
pub fn split_dataset(
    children: &[(String, Group)],
    fold_count: usize,
    fold_index: usize,
    seed: u64,
) -> Result<DatasetSplit, GlyphError> {
    if fold_index >= fold_count {
        return Err(GlyphError::FoldOutOfRange { index: fold_index, folds: fold_count });
    }
    // dedupe by id; a child listed in both groups counts as dysgraphic
    let mut groups: BTreeMap<&str, Group> = BTreeMap::new();
    for (id, g) in children {
        let entry = groups.entry(id.as_str()).or_insert(*g);
        if *g == Group::Dysgraphic {
            *entry = Group::Dysgraphic;
        }
    }
    let mut td: Vec<&str> = groups.iter().filter(|(_, g)| **g == Group::TypicallyDeveloping).map(|(id, _)| *id).collect();
    if td.len() < fold_count {
        return Err(GlyphError::TooFewChildren { td: td.len(), folds: fold_count });
    }
    let mut stream = rng::stream(rng::derive(seed, 0x5_9117));
    rng::shuffle(&mut stream, &mut td);

    let base = td.len() / fold_count;
    let extra = td.len() % fold_count;
    let start = fold_index * base + fold_index.min(extra);
    let len = base + usize::from(fold_index < extra);

    let mut split = DatasetSplit {
        training_children: BTreeSet::new(),
        validation_children: BTreeSet::new(),
        dysgraphic_children: groups.iter().filter(|(_, g)| **g == Group::Dysgraphic).map(|(id, _)| id.to_string()).collect(),
    };
    for (i, id) in td.iter().enumerate() {
        if (start..start + len).contains(&i) {
            split.validation_children.insert(id.to_string());
        } else {
            split.training_children.insert(id.to_string());
        }
    }
    Ok(split)
}
