//! Validation-half model selection followed by four-fold cross-testing with
//! voting among all tied best configurations.

use std::collections::BTreeMap;

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::baseline::{polynomial_kernel, rbf_kernel};
use super::dataset::Dataset;
use super::grid::{configurations, sigma_v_for, Config, HyperGrid, KernelChoice, Method};
use super::normalize::normalize;
use super::splits::{Splits, N_FOLDS};
use crate::error::{Error, Result};
use crate::kernel::{base_cross, base_grams, BaseGrams, GramOptions, HyperParams, InputOrder, KernelKind};
use crate::matrix::Matrix;
use crate::svm::{train_multiclass, vote, SmoConfig, DEFAULT_TOL};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProtocolOptions {
    pub grid: HyperGrid,
    pub methods: Vec<Method>,
    pub tile_size: usize,
    pub svm_tol: f64,
}

impl Default for ProtocolOptions {
    fn default() -> Self {
        Self {
            grid: HyperGrid::default(),
            methods: Method::ALL.to_vec(),
            tile_size: GramOptions::default().tile_size,
            svm_tol: DEFAULT_TOL,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodResult {
    pub method: Method,
    pub configs_evaluated: usize,
    pub validation_accuracy: f64,
    /// All configurations tied at the best validation accuracy.
    pub best_configs: Vec<Config>,
    pub fold_accuracy: Vec<f64>,
    /// Mean over folds.
    pub accuracy: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetResult {
    pub name: String,
    pub n_points: usize,
    pub length: usize,
    pub n_classes: usize,
    pub methods: Vec<MethodResult>,
    /// Recursion passes over the data in the validation stage.
    pub validation_gram_passes: usize,
    /// Recursion passes over the data, across all splits.
    pub gram_passes: usize,
}

impl DatasetResult {
    pub fn accuracy(&self, method: Method) -> Option<f64> {
        self.methods.iter().find(|m| m.method == method).map(|m| m.accuracy)
    }
}

/// Recurrent kernel hyperparameters shared by every `C`, head, and output scale.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
struct BaseKey {
    sigma_u: u64,
    sigma_b: u64,
    depth: usize,
    order: InputOrder,
}

/// One train/test split, normalized with train statistics, plus the
/// recurrent base kernels it needs.
struct Split {
    train: Matrix,
    test: Matrix,
    train_labels: Vec<i64>,
    test_labels: Vec<i64>,
    bases: BTreeMap<BaseKey, (BaseGrams, BaseGrams)>,
    passes: usize,
}

impl Split {
    fn new(data: &Dataset, train_idx: &[usize], test_idx: &[usize]) -> Self {
        let (train, test) = normalize(
            &data.features.select_rows(train_idx),
            &data.features.select_rows(test_idx),
        );
        let pick = |idx: &[usize]| idx.iter().map(|&i| data.labels[i]).collect::<Vec<_>>();
        let train_labels = pick(train_idx);
        let test_labels = pick(test_idx);
        let missing: Vec<i64> = (0..data.n_classes() as i64)
            .filter(|c| !train_labels.contains(c) && test_labels.contains(c))
            .collect();
        if !missing.is_empty() {
            warn!(
                "{}: classes {:?} absent from a training split; their test points count as errors",
                data.name,
                missing.iter().map(|&c| data.classes[c as usize]).collect::<Vec<_>>()
            );
        }
        Self {
            train,
            test,
            train_labels,
            test_labels,
            bases: BTreeMap::new(),
            passes: 0,
        }
    }

    fn prepare(&mut self, kernels: &[KernelChoice], grid: &HyperGrid, opts: &GramOptions) -> Result<()> {
        for k in kernels {
            let KernelChoice::Recurrent {
                variant,
                sigma_u,
                sigma_b,
                depth,
                ..
            } = *k
            else {
                continue;
            };
            let orders: &[InputOrder] = if variant.arch.is_bidirectional() {
                &[InputOrder::Default, InputOrder::Flipped]
            } else {
                std::slice::from_ref(&variant.order)
            };
            for &order in orders {
                let key = BaseKey {
                    sigma_u: sigma_u.to_bits(),
                    sigma_b: sigma_b.to_bits(),
                    depth,
                    order,
                };
                if self.bases.contains_key(&key) {
                    continue;
                }
                let params = HyperParams::new(grid.sigma_w, sigma_u, sigma_b, 1.0, depth)?;
                let own = base_grams(&self.train, &params, order, opts)?;
                let cross = base_cross(&self.train, &self.test, &params, order, opts)?;
                self.passes += 2;
                self.bases.insert(key, (own, cross));
            }
        }
        Ok(())
    }

    /// `(train x train, test x train)` kernel matrices.
    fn kernels(&self, choice: &KernelChoice) -> Result<(Matrix, Matrix)> {
        match *choice {
            KernelChoice::Rbf { scale } => {
                let gamma = scale / self.train.cols() as f64;
                Ok((
                    rbf_kernel(&self.train, &self.train, gamma),
                    rbf_kernel(&self.test, &self.train, gamma),
                ))
            }
            KernelChoice::Polynomial { degree } => Ok((
                polynomial_kernel(&self.train, &self.train, degree),
                polynomial_kernel(&self.test, &self.train, degree),
            )),
            KernelChoice::Recurrent {
                variant,
                sigma_u,
                sigma_b,
                depth,
                kind,
            } => {
                let pooled = variant.arch.is_pooled();
                let fetch = |order: InputOrder| -> Result<(&Matrix, &Matrix)> {
                    let key = BaseKey {
                        sigma_u: sigma_u.to_bits(),
                        sigma_b: sigma_b.to_bits(),
                        depth,
                        order,
                    };
                    let (own, cross) = self
                        .bases
                        .get(&key)
                        .ok_or_else(|| Error::InvalidConfig("base kernel was not prepared".into()))?;
                    Ok((pick(own, pooled, kind), pick(cross, pooled, kind)))
                };
                let (mut own, mut cross) = if variant.arch.is_bidirectional() {
                    let (fo, fc) = fetch(InputOrder::Default)?;
                    let (bo, bc) = fetch(InputOrder::Flipped)?;
                    (fo.add(bo)?, fc.add(bc)?)
                } else {
                    let (o, c) = fetch(variant.order)?;
                    (o.clone(), c.clone())
                };
                let s = sigma_v_for(variant, self.train.cols()).powi(2);
                own.scale(s);
                cross.scale(s);
                Ok((own, cross))
            }
        }
    }

    /// Test predictions for every `C` of one kernel.
    fn predict_all(&self, choice: &KernelChoice, cs: &[f64], tol: f64) -> Result<Vec<Vec<i64>>> {
        let (own, cross) = self.kernels(choice)?;
        cs.iter()
            .map(|&c| {
                let cfg = SmoConfig {
                    tol,
                    ..SmoConfig::new(c)
                };
                train_multiclass(&own, &self.train_labels, &cfg)?.predict(&cross)
            })
            .collect()
    }

    fn correct(&self, predictions: &[i64]) -> usize {
        predictions.iter().zip(&self.test_labels).filter(|(p, y)| p == y).count()
    }
}

fn pick(base: &BaseGrams, pooled: bool, kind: KernelKind) -> &Matrix {
    let (ck, ntk) = base.select(pooled);
    match kind {
        KernelKind::Ck => ck,
        KernelKind::Ntk => ntk,
    }
}

/// Predictions of each listed configuration on the split's test rows.
fn evaluate(split: &Split, configs: &[Config], tol: f64) -> Result<Vec<Vec<i64>>> {
    let mut kernels: Vec<KernelChoice> = Vec::new();
    for c in configs {
        if !kernels.contains(&c.kernel) {
            kernels.push(c.kernel);
        }
    }
    let per_kernel: Vec<Vec<Vec<i64>>> = kernels
        .par_iter()
        .map(|k| {
            let cs: Vec<f64> = configs.iter().filter(|c| c.kernel == *k).map(|c| c.c).collect();
            split.predict_all(k, &cs, tol)
        })
        .collect::<Result<_>>()?;
    let mut cursor = vec![0usize; kernels.len()];
    Ok(configs
        .iter()
        .map(|c| {
            let k = kernels.iter().position(|k| *k == c.kernel).unwrap();
            cursor[k] += 1;
            per_kernel[k][cursor[k] - 1].clone()
        })
        .collect())
}

fn unique_kernels(configs: &[Config]) -> Vec<KernelChoice> {
    let mut out: Vec<KernelChoice> = Vec::new();
    for c in configs {
        if !out.contains(&c.kernel) {
            out.push(c.kernel);
        }
    }
    out
}

/// Runs model selection and cross-testing for every requested method.
pub fn run_protocol(data: &Dataset, splits: &Splits, opts: &ProtocolOptions) -> Result<DatasetResult> {
    data.check_protocol_size()?;
    splits.validate(data.n_points())?;
    opts.grid.validate()?;
    let gram_opts = GramOptions {
        tile_size: opts.tile_size,
    };
    let n = data.n_points();

    let per_method: Vec<(Method, Vec<Config>)> = opts
        .methods
        .iter()
        .map(|&m| Ok((m, configurations(m, &opts.grid)?)))
        .collect::<Result<_>>()?;
    for (m, configs) in &per_method {
        for v in m.variants() {
            let count = configs
                .iter()
                .filter(|c| matches!(c.kernel, KernelChoice::Recurrent { variant, .. } if variant == v))
                .count();
            if count != opts.grid.recurrent_count() {
                return Err(Error::InvalidConfig(format!(
                    "{m}: {count} configurations for {v}, expected {}",
                    opts.grid.recurrent_count()
                )));
            }
        }
    }

    // validation stage: every distinct configuration is fitted once
    let mut all: Vec<Config> = Vec::new();
    for (_, configs) in &per_method {
        for c in configs {
            if !all.contains(c) {
                all.push(*c);
            }
        }
    }
    let mut split = Split::new(data, &splits.validation_train(n), &splits.validation_half);
    split.prepare(&unique_kernels(&all), &opts.grid, &gram_opts)?;
    let scores: Vec<usize> = evaluate(&split, &all, opts.svm_tol)?
        .iter()
        .map(|p| split.correct(p))
        .collect();
    let n_val = splits.validation_half.len() as f64;
    let validation_passes = split.passes;
    let mut passes = split.passes;
    drop(split);

    let mut selections = Vec::new();
    for (m, configs) in &per_method {
        let score = |c: &Config| scores[all.iter().position(|a| a == c).unwrap()];
        let best = configs.iter().map(score).max().unwrap_or(0);
        let chosen: Vec<Config> = configs.iter().filter(|c| score(c) == best).copied().collect();
        info!(
            "{} {m}: validation accuracy {:.4} with {} tied configurations",
            data.name,
            best as f64 / n_val,
            chosen.len()
        );
        selections.push((*m, configs.len(), best as f64 / n_val, chosen));
    }

    // cross-testing: only the selected configurations are refitted
    let mut fold_acc = vec![Vec::with_capacity(N_FOLDS); selections.len()];
    for k in 0..N_FOLDS {
        let (train_idx, test_idx) = splits.fold(k);
        let mut split = Split::new(data, &train_idx, &test_idx);
        let mut needed: Vec<Config> = Vec::new();
        for (.., chosen) in &selections {
            for c in chosen {
                if !needed.contains(c) {
                    needed.push(*c);
                }
            }
        }
        split.prepare(&unique_kernels(&needed), &opts.grid, &gram_opts)?;
        let preds = evaluate(&split, &needed, opts.svm_tol)?;
        passes += split.passes;
        let labels: Vec<i64> = (0..data.n_classes() as i64).collect();
        for (s, (.., chosen)) in selections.iter().enumerate() {
            let members: Vec<&Vec<i64>> = chosen
                .iter()
                .map(|c| &preds[needed.iter().position(|a| a == c).unwrap()])
                .collect();
            let voted: Vec<i64> = (0..test_idx.len())
                .map(|i| vote(&labels, members.iter().map(|p| p[i])))
                .collect();
            fold_acc[s].push(split.correct(&voted) as f64 / test_idx.len() as f64);
        }
    }

    let methods = selections
        .into_iter()
        .zip(fold_acc)
        .map(|((method, evaluated, validation_accuracy, best_configs), fold_accuracy)| MethodResult {
            method,
            configs_evaluated: evaluated,
            validation_accuracy,
            best_configs,
            accuracy: fold_accuracy.iter().sum::<f64>() / N_FOLDS as f64,
            fold_accuracy,
        })
        .collect();
    Ok(DatasetResult {
        name: data.name.clone(),
        n_points: n,
        length: data.length(),
        n_classes: data.n_classes(),
        methods,
        validation_gram_passes: validation_passes,
        gram_passes: passes,
    })
}
