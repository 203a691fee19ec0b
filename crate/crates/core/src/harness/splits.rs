use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const N_FOLDS: usize = 4;

/// Validation half plus a four-fold partition of the whole dataset.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Splits {
    pub validation_half: Vec<usize>,
    pub folds: Vec<Vec<usize>>,
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, &b| {
        (h ^ b as u64).wrapping_mul(0x0100_0000_01b3)
    })
}

impl Splits {
    /// Deterministic splits seeded by the dataset name.
    pub fn generate(name: &str, n: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(fnv1a(name.as_bytes()));
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut rng);
        let mut validation_half = perm[..n / 2].to_vec();
        validation_half.sort_unstable();

        perm.shuffle(&mut rng);
        let mut folds = vec![Vec::new(); N_FOLDS];
        for (k, &i) in perm.iter().enumerate() {
            folds[k % N_FOLDS].push(i);
        }
        for f in &mut folds {
            f.sort_unstable();
        }
        Self {
            validation_half,
            folds,
        }
    }

    /// Indices outside the validation half.
    pub fn validation_train(&self, n: usize) -> Vec<usize> {
        let mut held = vec![false; n];
        for &i in &self.validation_half {
            held[i] = true;
        }
        (0..n).filter(|&i| !held[i]).collect()
    }

    /// `(train, test)` indices for fold `k`.
    pub fn fold(&self, k: usize) -> (Vec<usize>, Vec<usize>) {
        let mut train: Vec<usize> = self
            .folds
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != k)
            .flat_map(|(_, f)| f.iter().copied())
            .collect();
        train.sort_unstable();
        (train, self.folds[k].clone())
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(format!("splits: {msg}")));
        if self.folds.len() != N_FOLDS {
            return bad(format!("expected {N_FOLDS} folds, found {}", self.folds.len()));
        }
        let mut seen = vec![false; n];
        for &i in &self.validation_half {
            if i >= n || std::mem::replace(&mut seen[i], true) {
                return bad(format!("validation index {i} out of range or repeated"));
            }
        }
        if self.validation_half.is_empty() || self.validation_half.len() == n {
            return bad("validation half must leave both sides nonempty".into());
        }
        let mut seen = vec![false; n];
        for f in &self.folds {
            if f.is_empty() || f.len() == n {
                return bad("every fold must be a nonempty proper subset".into());
            }
            for &i in f {
                if i >= n || std::mem::replace(&mut seen[i], true) {
                    return bad(format!("fold index {i} out of range or repeated"));
                }
            }
        }
        if seen.iter().any(|s| !s) {
            return bad("folds do not cover the dataset".into());
        }
        Ok(())
    }
}

/// `<dir>/<stem>.splits.json` next to a dataset file.
pub fn sidecar_path(dataset: &Path) -> PathBuf {
    let stem = dataset
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    dataset.with_file_name(format!("{stem}.splits.json"))
}

/// Sidecar splits when present, generated ones otherwise.
pub fn splits_for(dataset: &Path, name: &str, n: usize) -> Result<Splits> {
    let side = sidecar_path(dataset);
    let splits = if side.exists() {
        serde_json::from_reader(std::fs::File::open(side)?)?
    } else {
        Splits::generate(name, n)
    };
    splits.validate(n)?;
    Ok(splits)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn generated_splits_partition(n in 8usize..400, name in "[a-z]{1,8}") {
            let s = Splits::generate(&name, n);
            prop_assert!(s.validate(n).is_ok());
            prop_assert_eq!(s.validation_half.len(), n / 2);
            let sizes: Vec<usize> = s.folds.iter().map(Vec::len).collect();
            prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
            for k in 0..N_FOLDS {
                let (train, test) = s.fold(k);
                prop_assert_eq!(train.len() + test.len(), n);
                prop_assert!(test.iter().all(|i| train.binary_search(i).is_err()));
            }
        }
    }

    #[test]
    fn deterministic_by_name() {
        assert_eq!(Splits::generate("iris", 150), Splits::generate("iris", 150));
        assert_ne!(Splits::generate("iris", 150), Splits::generate("wine", 150));
    }

    #[test]
    fn invalid_sidecars() {
        let good = Splits::generate("x", 12);
        let mut s = good.clone();
        s.folds.pop();
        assert!(s.validate(12).is_err());
        let mut s = good.clone();
        let dup = s.folds[1][0];
        s.folds[0].push(dup);
        assert!(s.validate(12).is_err());
        let mut s = good;
        s.validation_half.push(99);
        assert!(s.validate(12).is_err());
    }

    #[test]
    fn sidecar_is_read() {
        let dir = tempfile::tempdir().unwrap();
        let csv = dir.path().join("toy.csv");
        let s = Splits {
            validation_half: vec![0, 1, 2, 3],
            folds: vec![vec![0, 4], vec![1, 5], vec![2, 6], vec![3, 7]],
        };
        std::fs::write(sidecar_path(&csv), serde_json::to_string(&s).unwrap()).unwrap();
        assert_eq!(splits_for(&csv, "toy", 8).unwrap(), s);
        assert!(splits_for(&csv, "toy", 9).is_err());
    }
}
