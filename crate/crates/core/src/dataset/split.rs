use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::table::RecordTable;
use super::DatasetError;

/// Disjoint train (the attacker's auxiliary data) and test partitions.
#[derive(Clone, Debug)]
pub struct DatasetSplit {
    pub train: RecordTable,
    pub test: RecordTable,
    pub seed: u64,
    /// Source-row indices of each partition, ascending.
    pub train_index: Vec<usize>,
    pub test_index: Vec<usize>,
}

/// Seeded shuffle split with `round(n * test_fraction)` test rows.
pub fn split(
    table: &RecordTable,
    test_fraction: f64,
    seed: u64,
) -> Result<DatasetSplit, DatasetError> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(DatasetError::InvalidSplit(format!(
            "test fraction {test_fraction} not in (0, 1)"
        )));
    }
    let n_test = (table.len() as f64 * test_fraction).round() as usize;
    split_rows(table, n_test, seed)
}

/// Seeded shuffle split with an exact test-row count.
pub fn split_rows(
    table: &RecordTable,
    n_test: usize,
    seed: u64,
) -> Result<DatasetSplit, DatasetError> {
    let n = table.len();
    if n < 2 {
        return Err(DatasetError::InvalidSplit(format!(
            "need at least 2 rows, have {n}"
        )));
    }
    if n_test == 0 || n_test >= n {
        return Err(DatasetError::InvalidSplit(format!(
            "{n_test} test rows out of {n}"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut test_index = order[..n_test].to_vec();
    let mut train_index = order[n_test..].to_vec();
    test_index.sort_unstable();
    train_index.sort_unstable();
    Ok(DatasetSplit {
        train: table.select(&train_index),
        test: table.select(&test_index),
        seed,
        train_index,
        test_index,
    })
}
