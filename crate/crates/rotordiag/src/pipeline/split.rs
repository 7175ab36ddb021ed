//! The dataset split protocol: a seeded shuffle within each class, then
//! fixed per-class counts into train and validation, remainder to test.

use super::manifest::{DatasetManifest, Label};
use super::PipelineError;
use crate::rng::SplitMix64;

/// Disjoint train/validation/test index sets over one manifest.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitPlan {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
    pub seed: u64,
}

/// Split a manifest per class: shuffle each class's indices with the seed,
/// take `train_per_class` for training and `val_per_class` for validation;
/// everything left is test data.
pub fn split(
    manifest: &DatasetManifest,
    seed: u64,
    train_per_class: usize,
    val_per_class: usize,
) -> Result<SplitPlan, PipelineError> {
    let mut rng = SplitMix64::new(seed);
    let mut plan = SplitPlan {
        train: Vec::new(),
        validation: Vec::new(),
        test: Vec::new(),
        seed,
    };
    for label in Label::ALL {
        let mut indices = manifest.indices_with_label(label);
        let needed = train_per_class + val_per_class;
        if indices.len() < needed {
            return Err(PipelineError::InsufficientSamples {
                class: match label {
                    Label::Unbroken => "unbroken",
                    Label::Broken => "broken",
                },
                needed,
                found: indices.len(),
            });
        }
        rng.shuffle(&mut indices);
        plan.train.extend(&indices[..train_per_class]);
        plan.validation
            .extend(&indices[train_per_class..train_per_class + val_per_class]);
        plan.test
            .extend(&indices[train_per_class + val_per_class..]);
    }
    Ok(plan)
}
