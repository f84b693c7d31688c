use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Dataset, Standardizer};
use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;

/// Disjoint train/validation/test index sets covering `0..n`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub seed: u64,
    pub test_indices: Vec<usize>,
    pub val_indices: Vec<usize>,
    pub train_indices: Vec<usize>,
}

impl SplitPlan {
    pub fn sizes(&self) -> (usize, usize, usize) {
        (self.train_indices.len(), self.val_indices.len(), self.test_indices.len())
    }
}

/// Seeded shuffle, then `⌊n/10⌋` test rows, `⌊(n − test)/5⌋` validation rows
/// and the rest for training.
pub fn make_split(n: usize, seed: u64) -> Result<SplitPlan> {
    if n < 10 {
        return Err(Error::TooFewRows { needed: 10, got: n });
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_test = n / 10;
    let n_val = (n - n_test) / 5;
    Ok(SplitPlan {
        seed,
        test_indices: idx[..n_test].to_vec(),
        val_indices: idx[n_test..n_test + n_val].to_vec(),
        train_indices: idx[n_test + n_val..].to_vec(),
    })
}

/// A split materialized on the standardized scale, with statistics from the
/// training rows only.
#[derive(Clone, Debug)]
pub struct SplitData {
    pub train_x: DenseMatrix,
    pub train_y: Vec<f64>,
    pub val_x: DenseMatrix,
    pub val_y: Vec<f64>,
    pub test_x: DenseMatrix,
    pub test_y: Vec<f64>,
    pub standardizer: Standardizer,
}

impl SplitData {
    pub fn new(ds: &Dataset, plan: &SplitPlan) -> Result<Self> {
        let train = ds.select(&plan.train_indices);
        let val = ds.select(&plan.val_indices);
        let test = ds.select(&plan.test_indices);
        let st = Standardizer::fit(&train.x, &train.y)?;
        Ok(Self {
            train_x: st.transform_x(&train.x)?,
            train_y: st.transform_y(&train.y),
            val_x: st.transform_x(&val.x)?,
            val_y: st.transform_y(&val.y),
            test_x: st.transform_x(&test.x)?,
            test_y: st.transform_y(&test.y),
            standardizer: st,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.train_x.cols()
    }
}
