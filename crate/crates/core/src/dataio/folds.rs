use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dataio::table::{ScoreTable, Split};
use crate::error::{Error, Result};

/// A (label, group) cell that holds fewer samples than there are folds.
/// Balance still holds, but some folds receive no sample from the cell.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SmallCell {
    pub label: bool,
    pub group: usize,
    pub size: usize,
}

/// Fold index for every non-test sample.
#[derive(Debug, Clone, PartialEq)]
pub struct FoldAssignment {
    pub n_folds: usize,
    pub seed: u64,
    fold_of: BTreeMap<String, usize>,
    small_cells: Vec<SmallCell>,
}

impl FoldAssignment {
    pub fn fold_of(&self, sample_id: &str) -> Option<usize> {
        self.fold_of.get(sample_id).copied()
    }

    pub fn assignments(&self) -> &BTreeMap<String, usize> {
        &self.fold_of
    }

    /// Cells smaller than `n_folds` (the "k too large" warning).
    pub fn small_cells(&self) -> &[SmallCell] {
        &self.small_cells
    }

    /// Table indices of the samples in fold `f`, in table order.
    pub fn fold_indices(&self, table: &ScoreTable, f: usize) -> Vec<usize> {
        table
            .samples()
            .iter()
            .enumerate()
            .filter(|(_, s)| self.fold_of(&s.record.sample_id) == Some(f))
            .map(|(i, _)| i)
            .collect()
    }
}

/// Assigns train and validation samples to `k` folds, stratified by label and group.
///
/// Each cell is shuffled with a ChaCha8 stream seeded by `seed` and then dealt
/// round-robin. The dealing offset carries over from cell to cell so that fold
/// totals stay balanced as well. Cells are visited in (label, group) order.
pub fn stratified_kfold(table: &ScoreTable, k: usize, seed: u64) -> Result<FoldAssignment> {
    if k < 2 {
        return Err(Error::InvalidFolds(format!("k must be at least 2, got {k}")));
    }
    let n_groups = table.n_groups();
    let mut cells: Vec<Vec<usize>> = vec![Vec::new(); 2 * n_groups];
    for (i, s) in table.samples().iter().enumerate() {
        if s.record.split == Split::Test {
            continue;
        }
        let label = s.record.label.ok_or_else(|| {
            Error::MissingLabels(format!(
                "non-test sample `{}` needs a label for fold assignment",
                s.record.sample_id
            ))
        })?;
        cells[usize::from(label) * n_groups + s.record.group].push(i);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fold_of = BTreeMap::new();
    let mut small_cells = Vec::new();
    let mut offset = 0usize;
    for (c, members) in cells.iter_mut().enumerate() {
        let label = c >= n_groups;
        let group = c % n_groups;
        if members.is_empty() {
            return Err(Error::EmptyCell {
                label: u8::from(label),
                group: table.group_set()[group].clone(),
            });
        }
        if members.len() < k {
            small_cells.push(SmallCell {
                label,
                group,
                size: members.len(),
            });
        }
        members.shuffle(&mut rng);
        for (j, &i) in members.iter().enumerate() {
            fold_of.insert(table.samples()[i].record.sample_id.clone(), (offset + j) % k);
        }
        offset = (offset + members.len()) % k;
    }
    Ok(FoldAssignment {
        n_folds: k,
        seed,
        fold_of,
        small_cells,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::table::{MemberScores, Sample, SampleRecord};

    fn table_with_cells(cells: &[(bool, usize, usize)], test_extra: usize) -> ScoreTable {
        let mut samples = Vec::new();
        let mut n = 0;
        let mut push = |label: bool, group: usize, split: Split, samples: &mut Vec<Sample>| {
            samples.push(Sample {
                record: SampleRecord {
                    sample_id: format!("s{n}"),
                    label: Some(label),
                    group,
                    split,
                },
                scores: vec![MemberScores {
                    member_id: 0,
                    task_score: 0.5,
                    group_scores: if group == 0 { vec![1.0, 0.0] } else { vec![0.0, 1.0] },
                }],
            });
            n += 1;
        };
        for &(label, group, count) in cells {
            for _ in 0..count {
                push(label, group, Split::Validation, &mut samples);
            }
        }
        for _ in 0..test_extra {
            push(true, 0, Split::Test, &mut samples);
        }
        ScoreTable::new(vec!["a".into(), "b".into()], 1, samples).unwrap()
    }

    fn cell_counts(t: &ScoreTable, f: &FoldAssignment) -> Vec<Vec<usize>> {
        let mut counts = vec![vec![0; f.n_folds]; 4];
        for s in t.samples() {
            if let Some(k) = f.fold_of(&s.record.sample_id) {
                let c = usize::from(s.record.label.unwrap()) * 2 + s.record.group;
                counts[c][k] += 1;
            }
        }
        counts
    }

    #[test]
    fn divisible_cells_split_evenly() {
        let t = table_with_cells(&[(false, 0, 10), (false, 1, 10), (true, 0, 10), (true, 1, 10)], 0);
        let f = stratified_kfold(&t, 5, 3).unwrap();
        for cell in cell_counts(&t, &f) {
            assert_eq!(cell, vec![2; 5]);
        }
        assert!(f.small_cells().is_empty());
    }

    #[test]
    fn eleven_in_a_cell_gives_three_two_two_two_two() {
        let t = table_with_cells(&[(false, 0, 11), (false, 1, 5), (true, 0, 5), (true, 1, 5)], 0);
        let f = stratified_kfold(&t, 5, 9).unwrap();
        let mut c = cell_counts(&t, &f)[0].clone();
        c.sort_unstable();
        assert_eq!(c, vec![2, 2, 2, 2, 3]);
    }

    #[test]
    fn same_seed_same_assignment_and_test_excluded() {
        let t = table_with_cells(&[(false, 0, 7), (false, 1, 4), (true, 0, 6), (true, 1, 3)], 5);
        let a = stratified_kfold(&t, 3, 42).unwrap();
        let b = stratified_kfold(&t, 3, 42).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.assignments().len(), 20);
        let c = stratified_kfold(&t, 3, 43).unwrap();
        assert_ne!(a.assignments(), c.assignments());
    }

    #[test]
    fn empty_cell_is_reported() {
        let t = table_with_cells(&[(false, 0, 4), (false, 1, 4), (true, 0, 4)], 0);
        assert!(matches!(
            stratified_kfold(&t, 2, 0),
            Err(Error::EmptyCell { label: 1, ref group }) if group == "b"
        ));
    }

    #[test]
    fn k_larger_than_a_cell_warns_but_balances() {
        let t = table_with_cells(&[(false, 0, 9), (false, 1, 2), (true, 0, 9), (true, 1, 9)], 0);
        let f = stratified_kfold(&t, 4, 1).unwrap();
        assert_eq!(f.small_cells().len(), 1);
        assert_eq!(f.small_cells()[0].size, 2);
        for cell in cell_counts(&t, &f) {
            let (lo, hi) = (cell.iter().min().unwrap(), cell.iter().max().unwrap());
            assert!(hi - lo <= 1);
        }
    }

    #[test]
    fn k_below_two_is_rejected() {
        let t = table_with_cells(&[(false, 0, 2), (false, 1, 2), (true, 0, 2), (true, 1, 2)], 0);
        assert!(matches!(stratified_kfold(&t, 1, 0), Err(Error::InvalidFolds(_))));
    }
}
