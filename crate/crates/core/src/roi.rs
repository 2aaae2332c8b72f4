//! Regions of interest: named voxel subsets and their unions.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Named set of voxel column indices, kept strictly increasing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoiMask {
    name: String,
    indices: Vec<usize>,
}

impl RoiMask {
    /// Sorts `indices`; a repeated index is an error.
    pub fn new(name: impl Into<String>, mut indices: Vec<usize>) -> Result<Self> {
        let name = name.into();
        indices.sort_unstable();
        if let Some(w) = indices.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::DuplicateIndex {
                mask: name,
                index: w[0],
            });
        }
        Ok(Self { name, indices })
    }

    /// Contiguous mask `start..end`.
    pub fn range(name: impl Into<String>, start: usize, end: usize) -> Self {
        Self {
            name: name.into(),
            indices: (start..end).collect(),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// Keeps the response columns listed in `mask`, in ascending index order.
pub fn select_voxels(y: &Matrix, mask: &RoiMask) -> Result<Matrix> {
    if mask.is_empty() {
        return Err(Error::EmptyMask(mask.name.clone()));
    }
    if let Some(&bad) = mask.indices.iter().find(|&&i| i >= y.cols()) {
        return Err(Error::IndexOutOfRange {
            index: bad,
            n_voxels: y.cols(),
        });
    }
    Ok(y.select_columns(&mask.indices))
}

pub fn union_masks(masks: &[RoiMask], name: impl Into<String>) -> Result<RoiMask> {
    if masks.is_empty() {
        return Err(Error::EmptyInput("union of zero masks".into()));
    }
    let merged: BTreeSet<usize> = masks.iter().flat_map(|m| m.indices.iter().copied()).collect();
    Ok(RoiMask {
        name: name.into(),
        indices: merged.into_iter().collect(),
    })
}
