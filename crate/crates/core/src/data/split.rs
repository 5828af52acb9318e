use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::example::Example;
use crate::error::{Error, Result};

/// Assignment of examples (by position) to `k` test folds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    pub seed: u64,
    pub assignments: Vec<usize>,
}

impl FoldPlan {
    pub fn test_indices(&self, fold: usize) -> Vec<usize> {
        self.indices_where(|f| f == fold)
    }

    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        self.indices_where(|f| f != fold)
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        self.assignments.iter().for_each(|&f| sizes[f] += 1);
        sizes
    }

    fn indices_where(&self, pred: impl Fn(usize) -> bool) -> Vec<usize> {
        self.assignments
            .iter()
            .enumerate()
            .filter(|(_, &f)| pred(f))
            .map(|(i, _)| i)
            .collect()
    }
}

/// Example indices grouped by stratum (literal first), each group shuffled.
fn shuffled_strata(examples: &[Example], rng: &mut ChaCha8Rng) -> [Vec<usize>; 2] {
    let mut strata = [Vec::new(), Vec::new()];
    for (i, ex) in examples.iter().enumerate() {
        strata[usize::from(ex.stratum())].push(i);
    }
    strata.iter_mut().for_each(|s| s.shuffle(rng));
    strata
}

/// Label-stratified, shuffled k-fold partition.
///
/// Strata are concatenated and dealt round-robin, so fold sizes differ by at
/// most one and each fold's label mix tracks the whole set.
pub fn make_folds(examples: &[Example], k: usize, seed: u64) -> Result<FoldPlan> {
    if k == 0 {
        return Err(Error::Domain("k must be positive".into()));
    }
    if examples.len() < k {
        return Err(Error::Domain(format!(
            "cannot make {k} folds from {} examples",
            examples.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut assignments = vec![0; examples.len()];
    for (slot, idx) in shuffled_strata(examples, &mut rng).into_iter().flatten().enumerate() {
        assignments[idx] = slot % k;
    }
    Ok(FoldPlan { k, seed, assignments })
}

/// Stratified split of positions into `(train, dev)`, each sorted ascending,
/// with `|dev| = round(fraction · N)`. Per-stratum dev quotas use largest
/// remainders so they sum exactly to the target.
pub fn dev_split_indices(examples: &[Example], fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::Domain(format!("dev fraction must be in (0, 1), got {fraction}")));
    }
    let n = examples.len();
    let dev_total = (fraction * n as f64).round() as usize;
    if dev_total == 0 || dev_total >= n {
        return Err(Error::Domain(format!(
            "a {fraction} dev split of {n} examples leaves an empty side"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let strata = shuffled_strata(examples, &mut rng);

    let exact: Vec<f64> = strata
        .iter()
        .map(|s| dev_total as f64 * s.len() as f64 / n as f64)
        .collect();
    let mut quotas: Vec<usize> = exact.iter().map(|q| q.floor() as usize).collect();
    let mut order: Vec<usize> = (0..strata.len()).collect();
    order.sort_by(|&a, &b| (exact[b] - exact[b].floor()).total_cmp(&(exact[a] - exact[a].floor())));
    let mut missing = dev_total - quotas.iter().sum::<usize>();
    for &s in order.iter().cycle() {
        if missing == 0 {
            break;
        }
        if quotas[s] < strata[s].len() {
            quotas[s] += 1;
            missing -= 1;
        }
    }

    let mut train = Vec::with_capacity(n - dev_total);
    let mut dev = Vec::with_capacity(dev_total);
    for (stratum, quota) in strata.iter().zip(quotas) {
        dev.extend_from_slice(&stratum[..quota]);
        train.extend_from_slice(&stratum[quota..]);
    }
    train.sort_unstable();
    dev.sort_unstable();
    Ok((train, dev))
}

pub fn dev_split(examples: &[Example], fraction: f64, seed: u64) -> Result<(Vec<Example>, Vec<Example>)> {
    let (train, dev) = dev_split_indices(examples, fraction, seed)?;
    let pick = |idx: &[usize]| idx.iter().map(|&i| examples[i].clone()).collect();
    Ok((pick(&train), pick(&dev)))
}
