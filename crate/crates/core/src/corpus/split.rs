use super::examples::ClassificationExample;
use super::labels::Label;
use crate::error::{Error, Result};
use crate::numerics::RngStream;

/// Train/dev/test partition of a sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct Splits<T> {
    pub train: Vec<T>,
    pub dev: Vec<T>,
    pub test: Vec<T>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitName {
    Train,
    Dev,
    Test,
}

impl std::str::FromStr for SplitName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(SplitName::Train),
            "dev" => Ok(SplitName::Dev),
            "test" => Ok(SplitName::Test),
            other => Err(Error::InvalidArgument(format!("unknown split `{other}`"))),
        }
    }
}

impl<T> Splits<T> {
    pub fn get(&self, name: SplitName) -> &[T] {
        match name {
            SplitName::Train => &self.train,
            SplitName::Dev => &self.dev,
            SplitName::Test => &self.test,
        }
    }
}

/// Seeded random partition into three parts of sizes `round(n * ratio)`
/// (test takes the remainder). Items keep their input order inside each part.
pub fn make_splits<T: Clone>(items: &[T], ratios: (f64, f64, f64), seed: u64) -> Result<Splits<T>> {
    let (tr, dv, te) = ratios;
    if tr <= 0.0 || dv <= 0.0 || te <= 0.0 || ((tr + dv + te) - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!(
            "split ratios ({tr}, {dv}, {te}) must be positive and sum to 1"
        )));
    }
    let n = items.len();
    let n_train = (n as f64 * tr).round() as usize;
    let n_dev = (n as f64 * dv).round() as usize;
    if n_train == 0 || n_dev == 0 || n_train + n_dev >= n {
        return Err(Error::InvalidArgument(format!(
            "{n} items cannot fill three non-empty splits with ratios ({tr}, {dv}, {te})"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    RngStream::derived(seed, 0x5917).shuffle(&mut order);
    let mut assign = vec![SplitName::Test; n];
    for &i in &order[..n_train] {
        assign[i] = SplitName::Train;
    }
    for &i in &order[n_train..n_train + n_dev] {
        assign[i] = SplitName::Dev;
    }
    let mut splits = Splits {
        train: Vec::with_capacity(n_train),
        dev: Vec::with_capacity(n_dev),
        test: Vec::with_capacity(n - n_train - n_dev),
    };
    for (item, part) in items.iter().zip(assign) {
        match part {
            SplitName::Train => splits.train.push(item.clone()),
            SplitName::Dev => splits.dev.push(item.clone()),
            SplitName::Test => splits.test.push(item.clone()),
        }
    }
    Ok(splits)
}

/// Keep each example of class `cls` with probability `keep_ratio`; all other
/// examples pass through. Order is preserved.
pub fn downsample_class(
    examples: Vec<ClassificationExample>,
    cls: Label,
    keep_ratio: f64,
    seed: u64,
) -> Result<Vec<ClassificationExample>> {
    if !(keep_ratio > 0.0 && keep_ratio <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "keep ratio {keep_ratio} outside (0, 1]"
        )));
    }
    let mut rng = RngStream::derived(seed, 0xd0);
    Ok(examples
        .into_iter()
        .filter(|ex| ex.label != cls || rng.uniform() < keep_ratio)
        .collect())
}
