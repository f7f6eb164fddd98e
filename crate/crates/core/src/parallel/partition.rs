//! Distribution of training and test inputs over the workers.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::transport::{Phase, Transport};
use crate::centralized::{split_even, BlockStructure};
use crate::data::{with_resolved_priors, Dataset};
use crate::error::{GpError, Result};

/// The data held by one worker.
///
/// Local datasets carry the prior means resolved over the full data, so a
/// worker never re-derives them from its own outputs.
#[derive(Clone, Debug, PartialEq)]
pub struct WorkerAssignment {
    pub worker: usize,
    /// Positions of the local training points in the full training set.
    pub train_indices: Vec<usize>,
    /// Positions of the local test points in the full test set.
    pub test_indices: Vec<usize>,
    pub local_data: Dataset,
    pub local_tests: Dataset,
}

impl WorkerAssignment {
    pub fn num_train(&self) -> usize {
        self.train_indices.len()
    }

    pub fn num_tests(&self) -> usize {
        self.test_indices.len()
    }
}

/// Builds assignments from explicit index blocks; block `m` goes to worker
/// `m`. The blocks must partition both sets.
pub fn assign_blocks(
    train: &Dataset,
    tests: &Dataset,
    train_blocks: Vec<Vec<usize>>,
    test_blocks: Vec<Vec<usize>>,
) -> Result<Vec<WorkerAssignment>> {
    // Validates both partitions.
    BlockStructure::new(train_blocks.clone(), train.len())?.with_tests(test_blocks.clone(), tests.len())?;
    if train.is_empty() {
        return Err(GpError::InvalidInput("training set is empty".into()));
    }
    if !tests.is_empty() && tests.dim() != train.dim() {
        return Err(GpError::DimensionMismatch {
            expected: train.dim(),
            found: tests.dim(),
        });
    }
    let (train, tests) = with_resolved_priors(train, tests)?;
    Ok(train_blocks
        .into_iter()
        .zip(test_blocks)
        .enumerate()
        .map(|(worker, (tr, te))| WorkerAssignment {
            worker,
            local_data: train.subset(&tr),
            local_tests: tests.subset(&te),
            train_indices: tr,
            test_indices: te,
        })
        .collect())
}

/// The block structure the centralized predictors see for these
/// assignments.
pub fn block_structure(assignments: &[WorkerAssignment]) -> Result<BlockStructure> {
    let n: usize = assignments.iter().map(WorkerAssignment::num_train).sum();
    let u: usize = assignments.iter().map(WorkerAssignment::num_tests).sum();
    BlockStructure::new(assignments.iter().map(|a| a.train_indices.clone()).collect(), n)?
        .with_tests(assignments.iter().map(|a| a.test_indices.clone()).collect(), u)
}

/// Seeded shuffle of both sets, each split evenly over `m` workers with the
/// last worker absorbing the remainder.
pub fn partition_random(train: &Dataset, tests: &Dataset, m: usize, seed: u64) -> Result<Vec<WorkerAssignment>> {
    if m == 0 || m > train.len() {
        return Err(GpError::InvalidInput(format!(
            "cannot distribute {} training points over {m} workers",
            train.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut d: Vec<usize> = (0..train.len()).collect();
    d.shuffle(&mut rng);
    let mut u: Vec<usize> = (0..tests.len()).collect();
    u.shuffle(&mut rng);
    assign_blocks(train, tests, split_even(&d, m), split_even(&u, m))
}

/// [`partition_random`] followed by one round of clustering.
pub fn partition_clustered(train: &Dataset, tests: &Dataset, m: usize, seed: u64) -> Result<Vec<WorkerAssignment>> {
    let initial = partition_random(train, tests, m, seed)?;
    let mut transport = Transport::new(m);
    recluster(train, tests, &initial, seed, &mut transport)
}

/// One clustering round over an existing assignment.
///
/// Every worker draws a center from its own training points and announces
/// it. Each point then goes to the nearest center whose worker still has
/// room, at most `⌈|D|/M⌉` training and `⌈|U|/M⌉` test points per worker.
/// Points are placed in order of their distance to the nearest center, so
/// points close to a center claim it first. A point that changes worker is
/// sent by its old owner: features, id and output for training points,
/// features and id for test points.
pub fn recluster(
    train: &Dataset,
    tests: &Dataset,
    initial: &[WorkerAssignment],
    seed: u64,
    transport: &mut Transport,
) -> Result<Vec<WorkerAssignment>> {
    let m = initial.len();
    if m == 0 {
        return Err(GpError::InvalidInput("no workers".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    let centers: Vec<usize> = initial
        .iter()
        .map(|a| {
            if a.train_indices.is_empty() {
                Err(GpError::InvalidInput(format!("worker {} holds no training data", a.worker)))
            } else {
                Ok(a.train_indices[rng.random_range(0..a.train_indices.len())])
            }
        })
        .collect::<Result<_>>()?;
    let d = train.dim();
    transport.allgather(Phase::Partition, "center", |_| d);

    let center_pts: Vec<_> = centers.iter().map(|&c| &train.inputs()[c]).collect();
    let mut fixed = vec![None; train.len()];
    for (w, &c) in centers.iter().enumerate() {
        fixed[c] = Some(w);
    }
    let train_owner = assign_to_centers(train, &center_pts, train.len().div_ceil(m), &fixed);
    let test_owner = assign_to_centers(tests, &center_pts, tests.len().div_ceil(m), &vec![None; tests.len()]);

    let mut old_train = vec![0; train.len()];
    let mut old_test = vec![0; tests.len()];
    for a in initial {
        for &i in &a.train_indices {
            old_train[i] = a.worker;
        }
        for &i in &a.test_indices {
            old_test[i] = a.worker;
        }
    }
    log_moves(transport, &old_train, &train_owner, m, "train_points", d + 2);
    log_moves(transport, &old_test, &test_owner, m, "test_points", d + 1);

    let mut tr = vec![Vec::new(); m];
    for (i, &w) in train_owner.iter().enumerate() {
        tr[w].push(i);
    }
    let mut te = vec![Vec::new(); m];
    for (i, &w) in test_owner.iter().enumerate() {
        te[w].push(i);
    }
    assign_blocks(train, tests, tr, te)
}

/// Greedy capacity-constrained nearest-center assignment. Ties in distance
/// go to the lower point index and the lower worker.
fn assign_to_centers(
    data: &Dataset,
    centers: &[&crate::data::InputPoint],
    capacity: usize,
    fixed: &[Option<usize>],
) -> Vec<usize> {
    let m = centers.len();
    let mut owner = vec![usize::MAX; data.len()];
    let mut load = vec![0usize; m];
    for (i, f) in fixed.iter().enumerate() {
        if let Some(w) = *f {
            owner[i] = w;
            load[w] += 1;
        }
    }
    let dist: Vec<Vec<f64>> = data
        .inputs()
        .iter()
        .map(|p| centers.iter().map(|c| p.sq_distance(c)).collect())
        .collect();
    let mut order: Vec<(f64, usize)> = (0..data.len())
        .filter(|&i| owner[i] == usize::MAX)
        .map(|i| (dist[i].iter().copied().fold(f64::INFINITY, f64::min), i))
        .collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    for (_, i) in order {
        let mut ranked: Vec<usize> = (0..m).collect();
        ranked.sort_by(|&a, &b| dist[i][a].total_cmp(&dist[i][b]).then(a.cmp(&b)));
        let w = ranked
            .into_iter()
            .find(|&w| load[w] < capacity)
            .expect("total capacity covers every point");
        owner[i] = w;
        load[w] += 1;
    }
    owner
}

fn log_moves(t: &mut Transport, from: &[usize], to: &[usize], m: usize, tag: &'static str, per_point: usize) {
    let mut counts = vec![vec![0usize; m]; m];
    for (&a, &b) in from.iter().zip(to) {
        counts[a][b] += 1;
    }
    for (s, row) in counts.iter().enumerate() {
        for (r, &c) in row.iter().enumerate() {
            if s != r && c > 0 {
                t.send(Phase::Partition, s, r, tag, c * per_point);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::SetId;

    fn line(n: usize, set: SetId, with_y: bool) -> Dataset {
        let rows = (0..n).map(|i| vec![i as f64]).collect();
        let y = with_y.then(|| (0..n).map(|i| i as f64).collect());
        Dataset::from_rows(set, rows, y).unwrap()
    }

    fn check_partition(a: &[WorkerAssignment], n: usize, u: usize) {
        block_structure(a).unwrap();
        assert_eq!(a.iter().map(|w| w.num_train()).sum::<usize>(), n);
        assert_eq!(a.iter().map(|w| w.num_tests()).sum::<usize>(), u);
    }

    #[test]
    fn random_sizes() {
        let train = line(10, SetId::TRAIN, true);
        let tests = line(4, SetId::TEST, false);
        let a = partition_random(&train, &tests, 3, 7).unwrap();
        let sizes: Vec<usize> = a.iter().map(|w| w.num_train()).collect();
        assert_eq!(sizes, vec![3, 3, 4]);
        check_partition(&a, 10, 4);
        assert_eq!(a, partition_random(&train, &tests, 3, 7).unwrap());

        let one = partition_random(&train, &tests, 1, 7).unwrap();
        assert_eq!(one.len(), 1);
        assert_eq!(one[0].num_train(), 10);
        assert!(partition_random(&train, &tests, 11, 7).is_err());
    }

    #[test]
    fn local_priors_come_from_the_full_data() {
        let train = line(10, SetId::TRAIN, true);
        let tests = line(2, SetId::TEST, false);
        let a = partition_random(&train, &tests, 2, 1).unwrap();
        for w in &a {
            let (mu_d, mu_u) = crate::data::prior_means(&w.local_data, &w.local_tests).unwrap();
            assert!(mu_d.iter().chain(mu_u.iter()).all(|&v| v == 4.5));
        }
    }

    #[test]
    fn clustering_separates_blobs() {
        let mut rows = Vec::new();
        for i in 0..10 {
            rows.push(vec![i as f64 * 0.01]);
            rows.push(vec![100.0 + i as f64 * 0.01]);
        }
        let train = Dataset::from_rows(SetId::TRAIN, rows, Some(vec![0.0; 20])).unwrap();
        let tests = Dataset::from_rows(SetId::TEST, vec![vec![0.05], vec![100.05]], None).unwrap();
        // Find a seed whose centers land one per blob, then check the result.
        let mut found = false;
        for seed in 0..20 {
            let a = partition_clustered(&train, &tests, 2, seed).unwrap();
            check_partition(&a, 20, 2);
            let blob = |w: &WorkerAssignment| -> Vec<bool> {
                w.local_data.inputs().iter().map(|p| p.features[0] > 50.0).collect()
            };
            let b0 = blob(&a[0]);
            if b0.iter().all(|&x| x == b0[0]) && blob(&a[1]).iter().all(|&x| x != b0[0]) {
                assert_eq!(a[0].num_train(), 10);
                let t0 = a[0].local_tests.inputs()[0].features[0] > 50.0;
                assert_eq!(t0, b0[0]);
                found = true;
            }
        }
        assert!(found);
    }

    #[test]
    fn clustering_respects_capacity() {
        // Every point is nearest to the center at 0; the other center sits
        // far away and only receives the overflow.
        let mut rows: Vec<Vec<f64>> = (0..8).map(|i| vec![i as f64 * 0.1]).collect();
        rows.push(vec![100.0]);
        let train = Dataset::from_rows(SetId::TRAIN, rows, Some(vec![0.0; 9])).unwrap();
        let tests = Dataset::from_rows(SetId::TEST, vec![vec![0.05], vec![0.15], vec![0.25]], None).unwrap();
        let initial = assign_blocks(
            &train,
            &tests,
            vec![vec![0, 1, 2, 3], vec![4, 5, 6, 7, 8]],
            vec![vec![0], vec![1, 2]],
        )
        .unwrap();
        let mut t = Transport::new(2);
        // Search seeds for centers 0 and 8.
        for seed in 0..200 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(1);
            let c0 = initial[0].train_indices[rng.random_range(0..4)];
            let c1 = initial[1].train_indices[rng.random_range(0..5)];
            if c0 == 0 && c1 == 8 {
                let a = recluster(&train, &tests, &initial, seed, &mut t).unwrap();
                // Capacity ⌈9/2⌉ = 5: the four closest points join the
                // center, the rest spill over in distance order.
                assert_eq!(a[0].train_indices, vec![0, 1, 2, 3, 4]);
                assert_eq!(a[1].train_indices, vec![5, 6, 7, 8]);
                assert_eq!(a[0].test_indices, vec![0, 1]);
                assert_eq!(a[1].test_indices, vec![2]);
                let p = t.log().totals(Phase::Partition);
                // Center announcements plus point 4 moving to worker 0 and
                // test point 1 moving to worker 0.
                assert_eq!(p.scalars, 2 + 3 + 2);
                return;
            }
        }
        panic!("no seed produced the wanted centers");
    }

    #[test]
    fn single_worker_clustering_is_identity() {
        let train = line(6, SetId::TRAIN, true);
        let tests = line(2, SetId::TEST, false);
        let mut t = Transport::new(1);
        let initial = partition_random(&train, &tests, 1, 3).unwrap();
        let a = recluster(&train, &tests, &initial, 3, &mut t).unwrap();
        let mut idx = initial[0].train_indices.clone();
        idx.sort();
        assert_eq!(a[0].train_indices, idx);
        assert!(t.log().is_empty());
    }
}
