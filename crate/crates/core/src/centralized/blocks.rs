use crate::error::{GpError, Result};

/// Sizes of an even split of `n` items into `m` parts; the last part absorbs
/// the remainder.
pub fn even_sizes(n: usize, m: usize) -> Vec<usize> {
    assert!(m >= 1);
    let base = n / m;
    let mut sizes = vec![base; m];
    sizes[m - 1] += n % m;
    sizes
}

/// Splits the sequence `order` into consecutive parts of [`even_sizes`].
pub fn split_even(order: &[usize], m: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::with_capacity(m);
    let mut start = 0;
    for s in even_sizes(order.len(), m) {
        out.push(order[start..start + s].to_vec());
        start += s;
    }
    out
}

/// Disjoint blocks of training indices, optionally paired with blocks of
/// test indices.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BlockStructure {
    train: Vec<Vec<usize>>,
    test: Option<Vec<Vec<usize>>>,
}

fn check_partition(blocks: &[Vec<usize>], n: usize, what: &str) -> Result<()> {
    let mut seen = vec![false; n];
    let mut count = 0;
    for b in blocks {
        for &i in b {
            if i >= n || seen[i] {
                return Err(GpError::InvalidInput(format!(
                    "{what} blocks are not a partition of 0..{n}: index {i}"
                )));
            }
            seen[i] = true;
            count += 1;
        }
    }
    if count != n {
        return Err(GpError::InvalidInput(format!(
            "{what} blocks cover {count} of {n} points"
        )));
    }
    Ok(())
}

impl BlockStructure {
    pub fn new(train: Vec<Vec<usize>>, n_train: usize) -> Result<Self> {
        if train.is_empty() {
            return Err(GpError::InvalidInput("at least one block is required".into()));
        }
        check_partition(&train, n_train, "training")?;
        Ok(BlockStructure { train, test: None })
    }

    /// Pairs test block `m` with training block `m`.
    pub fn with_tests(mut self, test: Vec<Vec<usize>>, n_test: usize) -> Result<Self> {
        if test.len() != self.train.len() {
            return Err(GpError::InvalidInput(format!(
                "{} test blocks for {} training blocks",
                test.len(),
                self.train.len()
            )));
        }
        check_partition(&test, n_test, "test")?;
        self.test = Some(test);
        Ok(self)
    }

    /// Contiguous even blocks.
    pub fn even(n_train: usize, m: usize) -> Result<Self> {
        if m == 0 || m > n_train {
            return Err(GpError::InvalidInput(format!(
                "cannot split {n_train} points into {m} blocks"
            )));
        }
        let order: Vec<usize> = (0..n_train).collect();
        BlockStructure::new(split_even(&order, m), n_train)
    }

    pub fn even_with_tests(n_train: usize, n_test: usize, m: usize) -> Result<Self> {
        let order: Vec<usize> = (0..n_test).collect();
        BlockStructure::even(n_train, m)?.with_tests(split_even(&order, m), n_test)
    }

    pub fn num_blocks(&self) -> usize {
        self.train.len()
    }

    pub fn train_blocks(&self) -> &[Vec<usize>] {
        &self.train
    }

    pub fn test_blocks(&self) -> Option<&[Vec<usize>]> {
        self.test.as_deref()
    }
}
