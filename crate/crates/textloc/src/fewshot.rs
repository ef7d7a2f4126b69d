//! Data-efficiency harness: one model per training-set size `n`.

use std::path::Path;

use textloc_core::dataset::subset_sample;
use textloc_core::EvalReport;

use crate::config::RunConfig;
use crate::data::{build_training_pairs, DocumentSample, PairConfig};
use crate::error::{AppError, AppResult};
use crate::features::feature_net;
use crate::io;
use crate::pipeline::evaluate_samples;
use crate::trainer::{train_loop, TrainOptions};

pub const CSV_HEADER: &str = "n,precision,recall,hmean,train_precision,train_recall,train_hmean";

#[derive(Debug, Clone, PartialEq)]
pub struct FewshotRow {
    pub n: usize,
    /// Score on the evaluation set.
    pub eval: EvalReport,
    /// Score on the `n` training documents themselves.
    pub train: EvalReport,
}

#[derive(Debug, Clone, Default)]
pub struct FewshotOptions {
    /// Draw every subset independently (seed + n) instead of taking prefixes
    /// of one shuffled pool.
    pub independent: bool,
    pub steps: Option<u64>,
    pub cache: Option<std::path::PathBuf>,
}

pub fn pair_config(cfg: &RunConfig) -> PairConfig {
    PairConfig {
        preprocess: cfg.preprocess_params(),
        sigma_ratio: cfg.map.sigma_ratio,
        composition: cfg.composition(),
        stride: cfg.network.generator.stride,
    }
}

/// The training documents used for each `n`.
pub fn subsets(pool: &[DocumentSample], n_values: &[usize], seed: u64, independent: bool) -> AppResult<Vec<Vec<DocumentSample>>> {
    let max = *n_values.iter().max().ok_or_else(|| AppError::usage("--n-values: empty list"))?;
    if n_values.contains(&0) {
        return Err(AppError::usage("--n-values: n must be >= 1"));
    }
    let err = |e| AppError::core("--n-values", e);
    if independent {
        n_values
            .iter()
            .map(|&n| subset_sample(pool, n, seed.wrapping_add(n as u64)).map_err(err))
            .collect()
    } else {
        let fixed = subset_sample(pool, max, seed).map_err(err)?;
        Ok(n_values.iter().map(|&n| fixed[..n].to_vec()).collect())
    }
}

/// Trains and scores one model per `n`, writing each run under `out/n{n}`
/// and the curve to `out/fewshot.csv`.
pub fn fewshot_experiment(
    cfg: &RunConfig,
    pool: &[DocumentSample],
    n_values: &[usize],
    eval_set: &[DocumentSample],
    out: &Path,
    opts: &FewshotOptions,
) -> AppResult<Vec<FewshotRow>> {
    let sets = subsets(pool, n_values, cfg.seed, opts.independent)?;
    let mut rows = Vec::new();
    let mut csv = format!("{CSV_HEADER}\n");
    for (&n, set) in n_values.iter().zip(&sets) {
        log::info!("few-shot n={n}: {}", set.iter().map(|s| s.stem.as_str()).collect::<Vec<_>>().join(" "));
        let pairs = build_training_pairs(set, &pair_config(cfg), opts.cache.as_deref())?.pairs;
        let mut phi = feature_net(&cfg.network.feature)?;
        let run_dir = out.join(format!("n{n}"));
        let topts = TrainOptions {
            steps: opts.steps,
            ..Default::default()
        };
        let mut outcome = train_loop(cfg, &pairs, &mut phi, &run_dir, &topts)?;
        let g = &mut outcome.state.generator;
        let eval = evaluate_samples(g, cfg, eval_set)?;
        let train = evaluate_samples(g, cfg, set)?;
        log::info!("few-shot n={n}: eval hmean {:.4}, train hmean {:.4}", eval.hmean, train.hmean);
        csv.push_str(&format!(
            "{n},{},{},{},{},{},{}\n",
            eval.precision, eval.recall, eval.hmean, train.precision, train.recall, train.hmean
        ));
        rows.push(FewshotRow { n, eval, train });
    }
    io::write_atomic(&out.join("fewshot.csv"), csv.as_bytes())?;
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pool(n: usize) -> Vec<DocumentSample> {
        (0..n)
            .map(|i| DocumentSample {
                stem: format!("d{i}"),
                image_path: format!("d{i}.png").into(),
                annotation_path: None,
                split: crate::data::Split::Train,
            })
            .collect()
    }

    #[test]
    fn nested_subsets_and_rejections() {
        let p = pool(15);
        let s = subsets(&p, &[1, 3, 11], 0, false).unwrap();
        assert_eq!(s[1][..1], s[0][..]);
        assert_eq!(s[2][..3], s[1][..]);
        assert_eq!(subsets(&p, &[1, 3, 11], 0, false).unwrap(), s);
        assert!(matches!(subsets(&p, &[0, 2], 0, false), Err(AppError::Usage(_))));
        assert!(matches!(subsets(&p, &[16], 0, false), Err(AppError::Usage(_))));
        assert_eq!(subsets(&p, &[4], 0, true).unwrap()[0].len(), 4);
    }
}
