//! Stratified cross-validation, grid search and classification metrics.
//! Success is the positive class throughout.

use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::forest::{fit_forest, ClinicalRule, CvInfo, ForestKind, ForestModel, Hyperparameters};
use crate::signals::Outcome;

/// Test-row indices of each fold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    pub seed: u64,
    pub folds: Vec<Vec<usize>>,
}

impl FoldPlan {
    pub fn n_rows(&self) -> usize {
        self.folds.iter().map(Vec::len).sum()
    }

    /// Every row not in the test fold, ascending.
    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        let mut rows: Vec<usize> = self
            .folds
            .iter()
            .enumerate()
            .filter(|(f, _)| *f != fold)
            .flat_map(|(_, idx)| idx.iter().copied())
            .collect();
        rows.sort_unstable();
        rows
    }
}

/// Shuffles each class with `seed` and deals its rows round-robin into
/// `k` folds, continuing the deal position from one class to the next.
pub fn stratified_folds(labels: &[Outcome], k: usize, seed: u64) -> Result<FoldPlan> {
    if k < 2 {
        return Err(Error::Config(format!("need at least 2 folds, got {k}")));
    }
    if labels.is_empty() {
        return Err(Error::EmptyInput);
    }
    if labels.len() < k {
        return Err(Error::Config(format!("{} rows cannot fill {k} folds", labels.len())));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut folds = vec![Vec::new(); k];
    let mut position = 0;
    for class in [Outcome::Success, Outcome::Failure, Outcome::Unknown] {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        if members.is_empty() {
            continue;
        }
        if members.len() < k {
            log::warn!("class {class} has {} rows, fewer than {k} folds", members.len());
        }
        members.shuffle(&mut rng);
        for i in members {
            folds[position % k].push(i);
            position += 1;
        }
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(FoldPlan { k, seed, folds })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fn_: usize,
    pub tn: usize,
    pub fp: usize,
    /// `None` when no success rows are present.
    pub sensitivity: Option<f64>,
    /// `None` when no failure rows are present.
    pub specificity: Option<f64>,
    pub balanced_accuracy: Option<f64>,
}

/// Mean of sensitivity and specificity.
pub fn balanced_accuracy(sensitivity: f64, specificity: f64) -> f64 {
    0.5 * (sensitivity + specificity)
}

fn rate(hit: usize, miss: usize) -> Option<f64> {
    let n = hit + miss;
    (n > 0).then(|| hit as f64 / n as f64)
}

pub fn confusion_metrics(truth: &[Outcome], predicted: &[Outcome]) -> Result<Confusion> {
    if truth.len() != predicted.len() {
        return Err(Error::LengthMismatch(truth.len(), predicted.len()));
    }
    if truth.is_empty() {
        return Err(Error::EmptyInput);
    }
    let (mut tp, mut fn_, mut tn, mut fp) = (0, 0, 0, 0);
    for (t, p) in truth.iter().zip(predicted) {
        match (t, p == &Outcome::Success) {
            (Outcome::Success, true) => tp += 1,
            (Outcome::Success, false) => fn_ += 1,
            (Outcome::Failure, false) => tn += 1,
            (Outcome::Failure, true) => fp += 1,
            (Outcome::Unknown, _) => return Err(Error::UnknownOutcome("<truth label>".into())),
        }
    }
    let sensitivity = rate(tp, fn_);
    let specificity = rate(tn, fp);
    Ok(Confusion {
        tp,
        fn_,
        tn,
        fp,
        sensitivity,
        specificity,
        balanced_accuracy: sensitivity.zip(specificity).map(|(a, b)| balanced_accuracy(a, b)),
    })
}

pub fn label_at(score: f64, threshold: f64) -> Outcome {
    if score >= threshold {
        Outcome::Success
    } else {
        Outcome::Failure
    }
}

/// One ROC operating point: rows with score `>= threshold` are called
/// success. `threshold = None` is the sentinel above every score.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub threshold: Option<f64>,
    pub fpr: f64,
    pub tpr: f64,
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Roc {
    pub points: Vec<RocPoint>,
    pub auc: f64,
}

/// ROC over every distinct score plus the sentinel, and its trapezoidal
/// area.
pub fn roc_auc(truth: &[Outcome], scores: &[f64]) -> Result<Roc> {
    if truth.len() != scores.len() {
        return Err(Error::LengthMismatch(truth.len(), scores.len()));
    }
    if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
        return Err(Error::Parse(format!("non-finite score at row {i}")));
    }
    let pos = truth.iter().filter(|t| **t == Outcome::Success).count();
    let neg = truth.iter().filter(|t| **t == Outcome::Failure).count();
    if pos == 0 || neg == 0 {
        return Err(Error::SingleClass);
    }
    let mut order: Vec<usize> = (0..scores.len()).filter(|&i| truth[i] != Outcome::Unknown).collect();
    order.sort_by(|a, b| scores[*b].total_cmp(&scores[*a]));

    let point = |threshold, tp: usize, fp: usize| RocPoint {
        threshold,
        fpr: fp as f64 / neg as f64,
        tpr: tp as f64 / pos as f64,
        tp,
        fp,
        tn: neg - fp,
        fn_: pos - tp,
    };
    let mut points = vec![point(None, 0, 0)];
    let (mut tp, mut fp) = (0, 0);
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        while i < order.len() && scores[order[i]] == s {
            if truth[order[i]] == Outcome::Success {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push(point(Some(s), tp, fp));
    }
    let auc = points
        .windows(2)
        .map(|w| (w[1].fpr - w[0].fpr) * (w[1].tpr + w[0].tpr) / 2.0)
        .sum::<f64>()
        .clamp(0.0, 1.0);
    Ok(Roc { points, auc })
}

/// ROC point with the highest balanced accuracy (first on ties).
pub fn best_balanced_point(roc: &Roc) -> Option<RocPoint> {
    roc.points
        .iter()
        .copied()
        .fold(None, |best: Option<RocPoint>, p| match best {
            Some(b) if b.tpr + (1.0 - b.fpr) >= p.tpr + (1.0 - p.fpr) => Some(b),
            _ => Some(p),
        })
}

/// Writes `threshold,fpr,tpr`; the sentinel threshold is `inf`.
pub fn write_roc_csv(path: impl AsRef<Path>, roc: &Roc) -> Result<()> {
    let path = path.as_ref();
    let mut out = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut text = String::from("threshold,fpr,tpr\n");
    for p in &roc.points {
        let t = p.threshold.map(|t| format!("{t:?}")).unwrap_or_else(|| "inf".into());
        text.push_str(&format!("{t},{:?},{:?}\n", p.fpr, p.tpr));
    }
    out.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldOutcome {
    pub fold: usize,
    pub n_test: usize,
    pub confusion: Confusion,
    pub auc: Option<f64>,
}

/// Pooled held-out scores of one cross-validation run, plus the audit
/// trail of which rows each fold's imputation medians came from.
#[derive(Debug, Clone)]
pub struct CvRun {
    /// Held-out probability of success per matrix row.
    pub scores: Vec<f64>,
    pub folds: Vec<FoldOutcome>,
    pub train_indices: Vec<Vec<usize>>,
    /// Matrix rows used to fit each fold's imputation table.
    pub imputation_rows: Vec<Vec<usize>>,
    pub models: Vec<ForestModel>,
}

impl CvRun {
    pub fn mean_balanced_accuracy(&self, threshold: f64, truth: &[Outcome]) -> f64 {
        let per_fold: Vec<f64> = self
            .train_indices
            .iter()
            .enumerate()
            .filter_map(|(f, _)| {
                let test = self.test_rows(f);
                let t: Vec<Outcome> = test.iter().map(|&i| truth[i]).collect();
                let p: Vec<Outcome> = test.iter().map(|&i| label_at(self.scores[i], threshold)).collect();
                confusion_metrics(&t, &p).ok()?.balanced_accuracy
            })
            .collect();
        if per_fold.is_empty() {
            0.0
        } else {
            per_fold.iter().sum::<f64>() / per_fold.len() as f64
        }
    }

    fn test_rows(&self, fold: usize) -> Vec<usize> {
        let train = &self.train_indices[fold];
        (0..self.scores.len()).filter(|i| train.binary_search(i).is_err()).collect()
    }
}

fn run_fold(
    matrix: &FeatureMatrix,
    kind: ForestKind,
    hp: &Hyperparameters,
    rule: ClinicalRule,
    plan: &FoldPlan,
    fold: usize,
) -> Result<(ForestModel, Vec<usize>, Vec<f64>)> {
    let train = plan.train_indices(fold);
    let model = fit_forest(&matrix.subset(&train), hp, kind, rule)?;
    let test = &plan.folds[fold];
    let scores = test
        .iter()
        .map(|&i| model.predict_proba(&matrix.values[i]))
        .collect::<Result<Vec<_>>>()?;
    Ok((model, train, scores))
}

/// Fits one model per fold on the training rows only and scores the
/// held-out rows. Held-out rows are imputed with the training rows'
/// overall medians, never their own outcome class.
pub fn cross_validate(
    matrix: &FeatureMatrix,
    kind: ForestKind,
    hp: &Hyperparameters,
    rule: ClinicalRule,
    plan: &FoldPlan,
) -> Result<CvRun> {
    if plan.n_rows() != matrix.n_rows() {
        return Err(Error::LengthMismatch(plan.n_rows(), matrix.n_rows()));
    }
    let results = (0..plan.k)
        .into_par_iter()
        .map(|f| run_fold(matrix, kind, hp, rule, plan, f))
        .collect::<Result<Vec<_>>>()?;
    assemble_run(matrix, plan, results)
}

fn assemble_run(matrix: &FeatureMatrix, plan: &FoldPlan, results: Vec<(ForestModel, Vec<usize>, Vec<f64>)>) -> Result<CvRun> {
    let mut scores = vec![f64::NAN; matrix.n_rows()];
    let mut folds = Vec::with_capacity(plan.k);
    let mut train_indices = Vec::with_capacity(plan.k);
    let mut imputation_rows = Vec::with_capacity(plan.k);
    let mut models = Vec::with_capacity(plan.k);
    for (f, (model, train, fold_scores)) in results.into_iter().enumerate() {
        let test = &plan.folds[f];
        for (&i, &s) in test.iter().zip(&fold_scores) {
            scores[i] = s;
        }
        let truth: Vec<Outcome> = test.iter().map(|&i| matrix.outcomes[i]).collect();
        let predicted: Vec<Outcome> = fold_scores.iter().map(|&s| model.predict_label(s)).collect();
        folds.push(FoldOutcome {
            fold: f,
            n_test: test.len(),
            confusion: confusion_metrics(&truth, &predicted)?,
            auc: roc_auc(&truth, &fold_scores).ok().map(|r| r.auc),
        });
        imputation_rows.push(training_rows_of_table(&model, &train, matrix));
        train_indices.push(train);
        models.push(model);
    }
    Ok(CvRun {
        scores,
        folds,
        train_indices,
        imputation_rows,
        models,
    })
}

/// Maps a fold model's imputation fit rows (indices into the fold's
/// training subset, after any clinical-rule filtering) back to matrix rows.
fn training_rows_of_table(model: &ForestModel, train: &[usize], matrix: &FeatureMatrix) -> Vec<usize> {
    let used: Vec<usize> = match model.clinical_rule {
        Some(rule) => train
            .iter()
            .copied()
            .filter(|&i| matrix.clinical(i).is_some_and(|(bw, ga)| !rule.applies(bw, ga)))
            .collect(),
        None => train.to_vec(),
    };
    model.imputation_table.fit_rows.iter().map(|&k| used[k]).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridScore {
    pub hyperparameters: Hyperparameters,
    pub mean_balanced_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedImportance {
    pub feature: String,
    pub importance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub kind: ForestKind,
    pub n_rows: usize,
    pub n_success: usize,
    pub n_failure: usize,
    pub threshold: f64,
    pub confusion: Confusion,
    pub sensitivity: Option<f64>,
    pub specificity: Option<f64>,
    pub balanced_accuracy: Option<f64>,
    pub auc: f64,
    pub roc_points: Vec<RocPoint>,
    /// Operating point with the best balanced accuracy.
    pub best_point: Option<RocPoint>,
    pub per_fold: Vec<FoldOutcome>,
    pub chosen_hyperparameters: Option<Hyperparameters>,
    pub grid: Vec<GridScore>,
    pub feature_importances: Vec<NamedImportance>,
    pub cv: Option<CvInfo>,
    #[serde(default)]
    pub provenance: Option<serde_json::Value>,
}

impl EvalReport {
    /// Report on `scores` for the rows of `matrix` with known outcomes.
    pub fn from_scores(kind: ForestKind, matrix: &FeatureMatrix, scores: &[f64], threshold: f64) -> Result<EvalReport> {
        let known: Vec<usize> = (0..matrix.n_rows()).filter(|&i| matrix.outcomes[i] != Outcome::Unknown).collect();
        let truth: Vec<Outcome> = known.iter().map(|&i| matrix.outcomes[i]).collect();
        let s: Vec<f64> = known.iter().map(|&i| scores[i]).collect();
        let predicted: Vec<Outcome> = s.iter().map(|&v| label_at(v, threshold)).collect();
        let confusion = confusion_metrics(&truth, &predicted)?;
        let roc = roc_auc(&truth, &s)?;
        Ok(EvalReport {
            kind,
            n_rows: known.len(),
            n_success: truth.iter().filter(|t| **t == Outcome::Success).count(),
            n_failure: truth.iter().filter(|t| **t == Outcome::Failure).count(),
            threshold,
            confusion,
            sensitivity: confusion.sensitivity,
            specificity: confusion.specificity,
            balanced_accuracy: confusion.balanced_accuracy,
            auc: roc.auc,
            best_point: best_balanced_point(&roc),
            roc_points: roc.points,
            per_fold: Vec::new(),
            chosen_hyperparameters: None,
            grid: Vec::new(),
            feature_importances: Vec::new(),
            cv: None,
            provenance: None,
        })
    }

    pub fn with_importances(mut self, model: &ForestModel) -> Self {
        self.feature_importances = model
            .registry
            .iter()
            .zip(model.feature_importance())
            .map(|(f, v)| NamedImportance {
                feature: f.clone(),
                importance: v,
            })
            .collect();
        self
    }

    pub fn roc(&self) -> Roc {
        Roc {
            points: self.roc_points.clone(),
            auc: self.auc,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Parse(e.to_string()))
    }

    /// One-line summary.
    pub fn summary(&self) -> String {
        let f = |v: Option<f64>| v.map(|x| format!("{x:.3}")).unwrap_or_else(|| "n/a".into());
        format!(
            "{}: sensitivity {} specificity {} balanced_accuracy {} auc {:.3}",
            self.kind,
            f(self.sensitivity),
            f(self.specificity),
            f(self.balanced_accuracy),
            self.auc
        )
    }
}

fn depth_rank(d: Option<usize>) -> usize {
    d.unwrap_or(usize::MAX)
}

/// True if `a` should win over `b` at equal score: fewer trees, then
/// shallower, then larger leaves.
fn simpler(a: &Hyperparameters, b: &Hyperparameters) -> bool {
    (a.n_trees, depth_rank(a.max_depth), std::cmp::Reverse(a.min_leaf))
        < (b.n_trees, depth_rank(b.max_depth), std::cmp::Reverse(b.min_leaf))
}

pub struct GridOutcome {
    pub best: Hyperparameters,
    pub model: ForestModel,
    pub report: EvalReport,
    pub cv: CvRun,
}

/// Scores every setting by mean fold balanced accuracy at the default
/// threshold, refits the winner on all rows and reports the winner's
/// pooled held-out predictions.
pub fn grid_search(
    matrix: &FeatureMatrix,
    kind: ForestKind,
    grid: &[Hyperparameters],
    plan: &FoldPlan,
    rule: ClinicalRule,
) -> Result<GridOutcome> {
    if grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    for hp in grid {
        hp.validate()?;
    }
    if plan.n_rows() != matrix.n_rows() {
        return Err(Error::LengthMismatch(plan.n_rows(), matrix.n_rows()));
    }
    let jobs: Vec<(usize, usize)> = (0..grid.len()).flat_map(|g| (0..plan.k).map(move |f| (g, f))).collect();
    let mut results = jobs
        .par_iter()
        .map(|&(g, f)| run_fold(matrix, kind, &grid[g], rule, plan, f))
        .collect::<Result<Vec<_>>>()?
        .into_iter();
    let mut runs = Vec::with_capacity(grid.len());
    for _ in grid {
        let fold_results: Vec<_> = results.by_ref().take(plan.k).collect();
        runs.push(assemble_run(matrix, plan, fold_results)?);
    }

    let threshold = crate::forest::DEFAULT_THRESHOLD;
    let scores: Vec<f64> = runs.iter().map(|r| r.mean_balanced_accuracy(threshold, &matrix.outcomes)).collect();
    let mut best = 0;
    for g in 1..grid.len() {
        let better = scores[g] > scores[best] + 1e-12;
        let tied = (scores[g] - scores[best]).abs() <= 1e-12;
        if better || (tied && simpler(&grid[g], &grid[best])) {
            best = g;
        }
    }
    let hp = grid[best];
    let mut model = fit_forest(matrix, &hp, kind, rule)?;
    model.cv = Some(CvInfo {
        k: plan.k,
        seed: plan.seed,
    });
    let cv = runs.swap_remove(best);
    let mut report = EvalReport::from_scores(kind, matrix, &cv.scores, threshold)?.with_importances(&model);
    report.per_fold = cv.folds.clone();
    report.chosen_hyperparameters = Some(hp);
    report.cv = model.cv;
    report.grid = grid
        .iter()
        .zip(&scores)
        .map(|(h, s)| GridScore {
            hyperparameters: *h,
            mean_balanced_accuracy: *s,
        })
        .collect();
    Ok(GridOutcome {
        best: hp,
        model,
        report,
        cv,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use Outcome::{Failure as F, Success as S};

    /// Pairwise concordance with ties counted as one half.
    fn concordance(truth: &[Outcome], scores: &[f64]) -> f64 {
        let (mut num, mut den) = (0.0, 0.0);
        for i in 0..truth.len() {
            for j in 0..truth.len() {
                if truth[i] == S && truth[j] == F {
                    den += 1.0;
                    num += if scores[i] > scores[j] {
                        1.0
                    } else if scores[i] == scores[j] {
                        0.5
                    } else {
                        0.0
                    };
                }
            }
        }
        num / den
    }

    #[test]
    fn folds_on_161_to_28_cohort() {
        let labels: Vec<Outcome> = (0..189).map(|i| if i < 161 { S } else { F }).collect();
        let plan = stratified_folds(&labels, 5, 11).unwrap();
        for fold in &plan.folds {
            let fails = fold.iter().filter(|&&i| labels[i] == F).count();
            assert!(fails == 5 || fails == 6, "{fails}");
        }
        let mut all: Vec<usize> = plan.folds.concat();
        all.sort_unstable();
        assert_eq!(all, (0..189).collect::<Vec<_>>());

        let plan = stratified_folds(&[S; 10], 5, 0).unwrap();
        assert!(plan.folds.iter().all(|f| f.len() == 2));
    }

    #[test]
    fn confusion_cases() {
        assert!((balanced_accuracy(0.78, 0.71) - 0.745).abs() < 1e-12);
        let c = confusion_metrics(&[S, F, S], &[S, F, S]).unwrap();
        assert_eq!((c.sensitivity, c.specificity, c.balanced_accuracy), (Some(1.0), Some(1.0), Some(1.0)));

        let truth: Vec<Outcome> = (0..189).map(|i| if i < 161 { S } else { F }).collect();
        let c = confusion_metrics(&truth, &[S; 189]).unwrap();
        assert_eq!((c.sensitivity, c.specificity, c.balanced_accuracy), (Some(1.0), Some(0.0), Some(0.5)));

        let c = confusion_metrics(&[S, S], &[S, F]).unwrap();
        assert_eq!(c.specificity, None);
        assert_eq!(c.balanced_accuracy, None);
        assert!(matches!(confusion_metrics(&[], &[]), Err(Error::EmptyInput)));
    }

    #[test]
    fn roc_cases() {
        let truth = [S, S, F, F];
        assert_eq!(roc_auc(&truth, &[0.9, 0.8, 0.3, 0.2]).unwrap().auc, 1.0);
        assert_eq!(roc_auc(&truth, &[0.4; 4]).unwrap().auc, 0.5);
        let roc = roc_auc(&truth, &[0.9, 0.2, 0.3, 0.8]).unwrap();
        assert_eq!(roc.points.first().unwrap().threshold, None);
        assert_eq!((roc.points.last().unwrap().fpr, roc.points.last().unwrap().tpr), (1.0, 1.0));
        assert!(matches!(roc_auc(&[S, S], &[0.1, 0.2]), Err(Error::SingleClass)));
    }

    #[test]
    fn simpler_settings_win_ties() {
        let a = Hyperparameters { n_trees: 50, ..Default::default() };
        let b = Hyperparameters { n_trees: 100, ..Default::default() };
        assert!(simpler(&a, &b));
        let c = Hyperparameters { max_depth: Some(3), ..b };
        assert!(simpler(&c, &b));
        let d = Hyperparameters { min_leaf: 5, ..b };
        assert!(simpler(&d, &b));
    }

    proptest! {
        #[test]
        fn auc_equals_concordance(pairs in prop::collection::vec((0u8..2, 0u8..20), 2..60)) {
            let truth: Vec<Outcome> = pairs.iter().map(|(c, _)| if *c == 0 { S } else { F }).collect();
            prop_assume!(truth.contains(&S) && truth.contains(&F));
            let scores: Vec<f64> = pairs.iter().map(|(_, s)| *s as f64 / 20.0).collect();
            let auc = roc_auc(&truth, &scores).unwrap().auc;
            prop_assert!((auc - concordance(&truth, &scores)).abs() < 1e-12);
            let flipped: Vec<f64> = scores.iter().map(|s| 1.0 - s).collect();
            prop_assert!((roc_auc(&truth, &flipped).unwrap().auc - (1.0 - auc)).abs() < 1e-12);
            let warped: Vec<f64> = scores.iter().map(|s| (3.0 * s).exp()).collect();
            prop_assert!((roc_auc(&truth, &warped).unwrap().auc - auc).abs() < 1e-12);
        }

        #[test]
        fn folds_partition_rows(n_s in 0usize..60, n_f in 0usize..30, k in 2usize..7, seed in any::<u64>()) {
            prop_assume!(n_s + n_f >= k);
            let labels: Vec<Outcome> = (0..n_s + n_f).map(|i| if i < n_s { S } else { F }).collect();
            let plan = stratified_folds(&labels, k, seed).unwrap();
            let mut all = plan.folds.concat();
            all.sort_unstable();
            prop_assert_eq!(all, (0..n_s + n_f).collect::<Vec<_>>());
            for fold in &plan.folds {
                let f = fold.iter().filter(|&&i| labels[i] == F).count() as f64;
                prop_assert!((f - n_f as f64 / k as f64).abs() <= 1.0);
                let s = fold.len() as f64 - f;
                prop_assert!((s - n_s as f64 / k as f64).abs() <= 1.0);
            }
        }
    }
}
