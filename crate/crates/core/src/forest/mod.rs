//! Random Forest, Balanced Random Forest and the clinically driven two-stage
//! variant, with a versioned JSON model format.

mod tree;

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FeatureMatrix, ImputationTable};
use crate::signals::Outcome;

pub use tree::{fit_tree, TreeNode, TreeParams, FAILURE, SUCCESS};

pub const FORMAT_VERSION: u32 = 1;
pub const DEFAULT_THRESHOLD: f64 = 0.5;
/// Fraction of rows each tree sees in subsample mode.
const SUBSAMPLE_FRACTION: f64 = 0.632;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ForestKind {
    Rf,
    Brf,
    Cdbrf,
}

impl ForestKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ForestKind::Rf => "rf",
            ForestKind::Brf => "brf",
            ForestKind::Cdbrf => "cdbrf",
        }
    }
}

impl fmt::Display for ForestKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ForestKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "rf" => Ok(ForestKind::Rf),
            "brf" => Ok(ForestKind::Brf),
            "cdbrf" | "cd-brf" => Ok(ForestKind::Cdbrf),
            other => Err(Error::Config(format!("unknown forest kind {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MaxFeatures {
    Sqrt,
    Third,
}

impl MaxFeatures {
    pub fn count(self, n_features: usize) -> usize {
        let k = match self {
            MaxFeatures::Sqrt => (n_features as f64).sqrt().floor() as usize,
            MaxFeatures::Third => n_features / 3,
        };
        k.max(1)
    }
}

impl FromStr for MaxFeatures {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "sqrt" => Ok(MaxFeatures::Sqrt),
            "third" => Ok(MaxFeatures::Third),
            other => Err(Error::Config(format!("max_features must be sqrt or third, got {other:?}"))),
        }
    }
}

/// How an RF tree draws its rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RowSampling {
    #[default]
    Bootstrap,
    /// 63.2% of the rows without replacement.
    Subsample,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyperparameters {
    pub n_trees: usize,
    pub max_features: MaxFeatures,
    /// `None` grows until purity or `min_leaf`.
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
    pub seed: u64,
    #[serde(default)]
    pub row_sampling: RowSampling,
    /// Balanced draws take the majority class without replacement.
    #[serde(default)]
    pub undersample_without_replacement: bool,
}

impl Default for Hyperparameters {
    fn default() -> Self {
        Hyperparameters {
            n_trees: 100,
            max_features: MaxFeatures::Sqrt,
            max_depth: None,
            min_leaf: 1,
            seed: 0,
            row_sampling: RowSampling::Bootstrap,
            undersample_without_replacement: false,
        }
    }
}

impl Hyperparameters {
    pub fn validate(&self) -> Result<()> {
        if self.n_trees == 0 {
            return Err(Error::Config("n_trees must be at least 1".into()));
        }
        if self.min_leaf == 0 {
            return Err(Error::Config("min_leaf must be at least 1".into()));
        }
        Ok(())
    }

    fn tree_params(&self, n_features: usize) -> TreeParams {
        TreeParams {
            max_features: self.max_features.count(n_features),
            max_depth: self.max_depth,
            min_leaf: self.min_leaf,
        }
    }
}

/// Infants at or above `ga_min_weeks`, or heavier than `bw_min_g`, are
/// predicted to succeed without consulting the forest.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClinicalRule {
    pub ga_min_weeks: f64,
    pub bw_min_g: f64,
}

impl Default for ClinicalRule {
    fn default() -> Self {
        ClinicalRule {
            ga_min_weeks: 27.0,
            bw_min_g: 1000.0,
        }
    }
}

impl ClinicalRule {
    pub fn applies(&self, bw_g: f64, ga_weeks: f64) -> bool {
        ga_weeks >= self.ga_min_weeks || bw_g > self.bw_min_g
    }
}

/// Class indices for outcome labels; unknown outcomes are rejected.
pub fn class_labels(matrix: &FeatureMatrix) -> Result<Vec<u8>> {
    matrix
        .outcomes
        .iter()
        .zip(&matrix.patient_ids)
        .map(|(o, id)| match o {
            Outcome::Success => Ok(SUCCESS),
            Outcome::Failure => Ok(FAILURE),
            Outcome::Unknown => Err(Error::UnknownOutcome(id.clone())),
        })
        .collect()
}

fn class_pools(labels: &[u8]) -> (Vec<usize>, Vec<usize>) {
    let mut pools = (Vec::new(), Vec::new());
    for (i, &y) in labels.iter().enumerate() {
        if y == SUCCESS {
            pools.0.push(i);
        } else {
            pools.1.push(i);
        }
    }
    pools
}

/// Class-balanced draw: `n_min` rows with replacement from each class,
/// minority first. With `majority_without_replacement` the majority draw
/// is a random subset instead.
pub fn undersample_balanced(labels: &[u8], majority_without_replacement: bool, rng: &mut impl Rng) -> Result<Vec<usize>> {
    let (s, f) = class_pools(labels);
    if s.is_empty() || f.is_empty() {
        return Err(Error::SingleClass);
    }
    let (minority, majority) = if f.len() <= s.len() { (f, s) } else { (s, f) };
    let n_min = minority.len();
    let mut out = Vec::with_capacity(2 * n_min);
    out.extend((0..n_min).map(|_| minority[rng.random_range(0..n_min)]));
    if majority_without_replacement {
        let mut pool = majority;
        let (chosen, _) = pool.partial_shuffle(rng, n_min);
        out.extend_from_slice(chosen);
    } else {
        out.extend((0..n_min).map(|_| majority[rng.random_range(0..majority.len())]));
    }
    Ok(out)
}

fn tree_rng(seed: u64, tree: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(tree as u64);
    rng
}

fn draw_rows(kind: ForestKind, labels: &[u8], hp: &Hyperparameters, rng: &mut ChaCha8Rng) -> Result<Vec<usize>> {
    let n = labels.len();
    match kind {
        ForestKind::Rf => Ok(match hp.row_sampling {
            RowSampling::Bootstrap => (0..n).map(|_| rng.random_range(0..n)).collect(),
            RowSampling::Subsample => {
                let k = ((SUBSAMPLE_FRACTION * n as f64).round() as usize).clamp(1, n);
                let mut all: Vec<usize> = (0..n).collect();
                let (chosen, _) = all.partial_shuffle(rng, k);
                chosen.to_vec()
            }
        }),
        ForestKind::Brf | ForestKind::Cdbrf => undersample_balanced(labels, hp.undersample_without_replacement, rng),
    }
}

/// Trees grown on dense rows. Probabilities are mean leaf success
/// fractions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ensemble {
    pub trees: Vec<TreeNode>,
}

impl Ensemble {
    pub fn predict(&self, row: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.predict(row)).sum::<f64>() / self.trees.len() as f64
    }

    /// Mean per-tree impurity decrease, normalised to sum to one; all zeros
    /// when no tree splits.
    pub fn importance(&self, n_features: usize) -> Vec<f64> {
        let mut acc = vec![0.0; n_features];
        for t in &self.trees {
            t.accumulate_importance(&mut acc);
        }
        let total: f64 = acc.iter().sum();
        if total > 0.0 {
            for v in &mut acc {
                *v /= total;
            }
        }
        acc
    }
}

/// Fits `hp.n_trees` trees on dense rows. BRF-style kinds assert that every
/// tree's training multiset is exactly balanced.
pub fn fit_ensemble(x: &[Vec<f64>], labels: &[u8], hp: &Hyperparameters, kind: ForestKind) -> Result<Ensemble> {
    hp.validate()?;
    if x.is_empty() {
        return Err(Error::EmptyInput);
    }
    let (s, f) = class_pools(labels);
    if kind != ForestKind::Rf && (s.is_empty() || f.is_empty()) {
        return Err(Error::SingleClass);
    }
    let params = hp.tree_params(x[0].len());
    let trees = (0..hp.n_trees)
        .into_par_iter()
        .map(|i| {
            let mut rng = tree_rng(hp.seed, i);
            let rows = draw_rows(kind, labels, hp, &mut rng)?;
            let tree = fit_tree(x, labels, &rows, params, &mut rng)?;
            if kind != ForestKind::Rf {
                let totals = tree.class_totals();
                assert_eq!(totals[0], totals[1], "balanced draw produced unequal classes");
            }
            Ok(tree)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Ensemble { trees })
}

/// Cross-validation settings recorded with a model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CvInfo {
    pub k: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub format_version: u32,
    pub kind: ForestKind,
    pub hyperparameters: Hyperparameters,
    pub clinical_rule: Option<ClinicalRule>,
    pub registry: Vec<String>,
    pub registry_hash: String,
    pub imputation_table: ImputationTable,
    pub trees: Vec<TreeNode>,
    pub threshold: f64,
    #[serde(default)]
    pub cv: Option<CvInfo>,
    #[serde(default)]
    pub provenance: Option<serde_json::Value>,
}

/// Row indices the clinical rule does not decide.
fn below_rule(matrix: &FeatureMatrix, rule: &ClinicalRule) -> Result<Vec<usize>> {
    let mut keep = Vec::new();
    for i in 0..matrix.n_rows() {
        let (bw, ga) = matrix.clinical(i).ok_or(Error::MissingClinicalForCdbrf)?;
        if !rule.applies(bw, ga) {
            keep.push(i);
        }
    }
    Ok(keep)
}

/// Fits a forest on a matrix with known outcomes. Missing values are
/// imputed with class medians of the training rows; the table is stored
/// in the model. CD-BRF first drops the rows its clinical rule decides.
pub fn fit_forest(matrix: &FeatureMatrix, hp: &Hyperparameters, kind: ForestKind, rule: ClinicalRule) -> Result<ForestModel> {
    hp.validate()?;
    class_labels(matrix)?;
    let rows: Vec<usize> = match kind {
        ForestKind::Cdbrf => {
            let keep = below_rule(matrix, &rule)?;
            if keep.is_empty() {
                return Err(Error::EmptyAfterRule);
            }
            keep
        }
        _ => (0..matrix.n_rows()).collect(),
    };
    if rows.is_empty() {
        return Err(Error::EmptyInput);
    }
    let train = matrix.subset(&rows);
    let all: Vec<usize> = (0..train.n_rows()).collect();
    let table = ImputationTable::fit(&train, &all)?;
    let x = table.apply(&train)?.dense_rows()?;
    let labels = class_labels(&train)?;
    let ensemble = fit_ensemble(&x, &labels, hp, kind)?;
    Ok(ForestModel {
        format_version: FORMAT_VERSION,
        kind,
        hyperparameters: *hp,
        clinical_rule: (kind == ForestKind::Cdbrf).then_some(rule),
        registry: matrix.registry.names().to_vec(),
        registry_hash: matrix.registry.hash(),
        imputation_table: table,
        trees: ensemble.trees,
        threshold: DEFAULT_THRESHOLD,
        cv: None,
        provenance: None,
    })
}

impl ForestModel {
    fn bw_ga_index(&self) -> Option<(usize, usize)> {
        let find = |name: &str| self.registry.iter().position(|n| n == name);
        Some((find(crate::features::BW_FEATURE)?, find(crate::features::GA_FEATURE)?))
    }

    /// Probability of success for one raw (unimputed) row in registry
    /// order.
    pub fn predict_proba(&self, row: &[Option<f64>]) -> Result<f64> {
        if row.len() != self.registry.len() {
            return Err(Error::RegistryMismatch(format!(
                "row has {} values, model expects {}",
                row.len(),
                self.registry.len()
            )));
        }
        if let Some(rule) = &self.clinical_rule {
            let (bi, gi) = self.bw_ga_index().ok_or(Error::MissingClinicalForCdbrf)?;
            let (bw, ga) = match (row[bi], row[gi]) {
                (Some(b), Some(g)) => (b, g),
                _ => return Err(Error::MissingClinicalForCdbrf),
            };
            if rule.applies(bw, ga) {
                return Ok(1.0);
            }
        }
        let dense = self.imputation_table.impute_row(row, Outcome::Unknown);
        Ok(self.trees.iter().map(|t| t.predict(&dense)).sum::<f64>() / self.trees.len() as f64)
    }

    /// Probabilities for every row of a matrix with a matching registry.
    pub fn predict_matrix(&self, matrix: &FeatureMatrix) -> Result<Vec<f64>> {
        if matrix.registry.hash() != self.registry_hash {
            return Err(Error::RegistryMismatch("feature registry differs from the model's".into()));
        }
        matrix.values.iter().map(|r| self.predict_proba(r)).collect()
    }

    pub fn predict_label(&self, probability: f64) -> Outcome {
        if probability >= self.threshold {
            Outcome::Success
        } else {
            Outcome::Failure
        }
    }

    pub fn feature_importance(&self) -> Vec<f64> {
        feature_importance(self)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::CorruptModel(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text).map_err(|e| Error::CorruptModel(e.to_string()))?;
        let found = value
            .get("format_version")
            .and_then(|v| v.as_u64())
            .ok_or_else(|| Error::CorruptModel("missing format_version".into()))?;
        if found != FORMAT_VERSION as u64 {
            return Err(Error::VersionMismatch {
                found: found as u32,
                expected: FORMAT_VERSION,
            });
        }
        let model: ForestModel = serde_json::from_value(value).map_err(|e| Error::CorruptModel(e.to_string()))?;
        model.check()?;
        Ok(model)
    }

    fn check(&self) -> Result<()> {
        let registry = crate::features::FeatureRegistry::from_names(self.registry.clone())
            .map_err(|e| Error::CorruptModel(e.to_string()))?;
        if registry.hash() != self.registry_hash {
            return Err(Error::CorruptModel("registry hash does not match registry".into()));
        }
        if self.trees.is_empty() {
            return Err(Error::CorruptModel("model has no trees".into()));
        }
        let p = self.registry.len();
        let sizes = [
            self.imputation_table.success.len(),
            self.imputation_table.failure.len(),
            self.imputation_table.overall.len(),
        ];
        if sizes.iter().any(|s| *s != p) {
            return Err(Error::CorruptModel("imputation table size differs from registry".into()));
        }
        fn max_feature(n: &TreeNode) -> Option<usize> {
            match n {
                TreeNode::Leaf { .. } => None,
                TreeNode::Split { f, l, r, .. } => [Some(*f), max_feature(l), max_feature(r)].into_iter().flatten().max(),
            }
        }
        if self.trees.iter().filter_map(max_feature).any(|f| f >= p) {
            return Err(Error::CorruptModel("tree references a feature outside the registry".into()));
        }
        if self.kind == ForestKind::Cdbrf && self.clinical_rule.is_none() {
            return Err(Error::CorruptModel("CD-BRF model without clinical rule".into()));
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut text = self.to_json()?;
        text.push('\n');
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

/// Normalised mean decrease in Gini impurity per registry feature.
pub fn feature_importance(model: &ForestModel) -> Vec<f64> {
    Ensemble {
        trees: model.trees.clone(),
    }
    .importance(model.registry.len())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::FeatureRegistry;

    fn toy_matrix(n: usize, seed: u64) -> FeatureMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut m = FeatureMatrix::new(FeatureRegistry::canonical());
        for i in 0..n {
            let fail = i % 5 == 0;
            let mut row: Vec<Option<f64>> = (0..79).map(|_| Some(rng.random_range(0.0..1.0))).collect();
            row[5] = Some(if fail { rng.random_range(0.0..0.6) } else { rng.random_range(0.4..1.0) });
            // bw, ga: every third patient is rule positive
            let positive = i % 3 == 0;
            row[77] = Some(if positive { 1200.0 } else { 800.0 });
            row[78] = Some(if positive { 28.0 } else { 25.0 });
            let o = if fail { Outcome::Failure } else { Outcome::Success };
            m.push_row(format!("p{i}"), o, row).unwrap();
        }
        m
    }

    #[test]
    fn undersample_counts() {
        let labels: Vec<u8> = (0..200).map(|i| if i < 30 { FAILURE } else { SUCCESS }).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let idx = undersample_balanced(&labels, false, &mut rng).unwrap();
        assert_eq!(idx.len(), 60);
        assert_eq!(idx.iter().filter(|&&i| labels[i] == FAILURE).count(), 30);
        let idx = undersample_balanced(&labels, true, &mut rng).unwrap();
        let majority: std::collections::BTreeSet<_> = idx.iter().filter(|&&i| labels[i] == SUCCESS).collect();
        assert_eq!(majority.len(), 30);

        let even: Vec<u8> = (0..10).map(|i| (i % 2) as u8).collect();
        assert_eq!(undersample_balanced(&even, false, &mut rng).unwrap().len(), 10);
        assert!(matches!(undersample_balanced(&[SUCCESS; 4], false, &mut rng), Err(Error::SingleClass)));
    }

    #[test]
    fn max_feature_counts() {
        assert_eq!(MaxFeatures::Sqrt.count(79), 8);
        assert_eq!(MaxFeatures::Third.count(79), 26);
        assert_eq!(MaxFeatures::Third.count(2), 1);
    }

    #[test]
    fn brf_trees_are_balanced_and_deterministic() {
        let m = toy_matrix(100, 1);
        let hp = Hyperparameters {
            n_trees: 20,
            seed: 4,
            ..Default::default()
        };
        let a = fit_forest(&m, &hp, ForestKind::Brf, ClinicalRule::default()).unwrap();
        for t in &a.trees {
            let c = t.class_totals();
            assert_eq!(c, [20, 20]);
        }
        let b = fit_forest(&m, &hp, ForestKind::Brf, ClinicalRule::default()).unwrap();
        assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
    }

    #[test]
    fn cdbrf_fits_below_rule_and_short_circuits() {
        let m = toy_matrix(90, 2);
        let hp = Hyperparameters {
            n_trees: 10,
            ..Default::default()
        };
        let model = fit_forest(&m, &hp, ForestKind::Cdbrf, ClinicalRule::default()).unwrap();
        let below = (0..90).filter(|i| i % 3 != 0).collect::<Vec<_>>();
        let n_fail = below.iter().filter(|i| *i % 5 == 0).count() as u32;
        assert_eq!(model.trees[0].class_totals(), [n_fail, n_fail]);

        let mut row = m.values[1].clone();
        row[77] = Some(900.0);
        row[78] = Some(28.0);
        assert_eq!(model.predict_proba(&row).unwrap(), 1.0);
        row[78] = None;
        assert!(matches!(model.predict_proba(&row), Err(Error::MissingClinicalForCdbrf)));
        assert!(matches!(model.predict_proba(&row[..10]), Err(Error::RegistryMismatch(_))));
    }

    #[test]
    fn mean_of_tree_probabilities() {
        let m = toy_matrix(30, 3);
        let mut model = fit_forest(&m, &Hyperparameters { n_trees: 2, ..Default::default() }, ForestKind::Rf, ClinicalRule::default()).unwrap();
        model.trees = vec![TreeNode::Leaf { leaf: [1, 4] }, TreeNode::Leaf { leaf: [4, 1] }];
        assert!((model.predict_proba(&m.values[0]).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(feature_importance(&model), vec![0.0; 79]);
    }

    #[test]
    fn importance_one_hot_when_single_feature_used() {
        let m = toy_matrix(30, 3);
        let mut model = fit_forest(&m, &Hyperparameters { n_trees: 1, ..Default::default() }, ForestKind::Rf, ClinicalRule::default()).unwrap();
        model.trees = vec![TreeNode::Split {
            f: 5,
            t: 0.5,
            l: Box::new(TreeNode::Leaf { leaf: [1, 3] }),
            r: Box::new(TreeNode::Leaf { leaf: [5, 1] }),
        }];
        let imp = feature_importance(&model);
        assert_eq!(imp[5], 1.0);
        assert_eq!(imp.iter().sum::<f64>(), 1.0);
    }

    #[test]
    fn model_json_round_trip_and_errors() {
        let m = toy_matrix(50, 5);
        let model = fit_forest(&m, &Hyperparameters { n_trees: 5, ..Default::default() }, ForestKind::Brf, ClinicalRule::default()).unwrap();
        let text = model.to_json().unwrap();
        let back = ForestModel::from_json(&text).unwrap();
        assert_eq!(back, model);
        for row in &m.values {
            assert_eq!(back.predict_proba(row).unwrap(), model.predict_proba(row).unwrap());
        }
        assert!(matches!(ForestModel::from_json(&text[..text.len() / 2]), Err(Error::CorruptModel(_))));
        let bumped = text.replacen("\"format_version\": 1", "\"format_version\": 2", 1);
        assert!(matches!(ForestModel::from_json(&bumped), Err(Error::VersionMismatch { found: 2, expected: 1 })));
    }

    #[test]
    fn kind_parsing() {
        assert_eq!("CDBRF".parse::<ForestKind>().unwrap(), ForestKind::Cdbrf);
        assert!("svm".parse::<ForestKind>().is_err());
    }
}
