//! Stacking ensemble over the nondominated LSTM models.
//!
//! Every front member is run over a dataset as one continuous sequence; its
//! outputs form one column of the stacking matrix and the observations form
//! the last column. A meta-regressor trained on that matrix combines the base
//! models at prediction time.

mod forest;
mod linear;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use forest::{fit_forest, ForestParams, RandomForestRegressor, RegressionTree};
pub use linear::LeastSquares;

use crate::data::WindowedDataset;
use crate::error::{Error, Result};
use crate::forecast::SequenceForecaster;
use crate::lstm::{forward_pass, Genome, LstmParams, LstmState};
use crate::moea::ParetoFront;

/// Rows of `[Y_1(d_t), …, Y_m(d_t), o_t]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StackingDataset {
    pub matrix: Vec<Vec<f64>>,
}

impl StackingDataset {
    pub fn model_count(&self) -> usize {
        self.matrix.first().map_or(0, |r| r.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.matrix.len()
    }

    pub fn is_empty(&self) -> bool {
        self.matrix.is_empty()
    }

    /// Base-model output columns of each row.
    pub fn inputs(&self) -> Vec<Vec<f64>> {
        self.matrix.iter().map(|r| r[..r.len() - 1].to_vec()).collect()
    }

    pub fn targets(&self) -> Vec<f64> {
        self.matrix.iter().map(|r| r[r.len() - 1]).collect()
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.matrix.iter().map(|r| r[j]).collect()
    }
}

/// Runs every model over `data` from a zero state and tabulates the outputs
/// next to the observations.
pub fn build_stacking_dataset(models: &[Genome], data: &WindowedDataset) -> Result<StackingDataset> {
    if models.is_empty() {
        return Err(Error::usage("stacking needs at least one base model"));
    }
    if let Some(g) = models.iter().find(|g| g.shape().inputs != data.feature_count()) {
        return Err(Error::usage(format!(
            "base model expects {} inputs but the dataset has {} features",
            g.shape().inputs,
            data.feature_count()
        )));
    }
    let columns: Vec<Vec<f64>> = models
        .par_iter()
        .map(|g| forward_pass(&g.decode()?, g.mask(), &data.rows))
        .collect::<Result<_>>()?;
    let matrix = (0..data.len())
        .map(|t| {
            let mut row: Vec<f64> = columns.iter().map(|c| c[t]).collect();
            row.push(data.targets[t]);
            row
        })
        .collect();
    Ok(StackingDataset { matrix })
}

/// Fraction of front members selecting each feature.
pub fn feature_importance(front: &ParetoFront, q: usize) -> Result<Vec<f64>> {
    importance_of(front.genomes(), q)
}

fn importance_of<'a>(genomes: impl Iterator<Item = &'a Genome>, q: usize) -> Result<Vec<f64>> {
    let mut counts = vec![0usize; q];
    let mut m = 0usize;
    for g in genomes {
        if g.mask().len() != q {
            return Err(Error::Dimension {
                expected: q,
                actual: g.mask().len(),
            });
        }
        for (c, &s) in counts.iter_mut().zip(g.mask()) {
            *c += usize::from(s);
        }
        m += 1;
    }
    if m == 0 {
        return Err(Error::usage("feature importance needs a nonempty front"));
    }
    Ok(counts.into_iter().map(|c| c as f64 / m as f64).collect())
}

/// How the meta-regressor is trained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MetaLearner {
    RandomForest(ForestParams),
    LeastSquares,
}

impl Default for MetaLearner {
    fn default() -> Self {
        MetaLearner::RandomForest(ForestParams::default())
    }
}

impl MetaLearner {
    pub fn fit(&self, ds: &StackingDataset) -> Result<MetaModel> {
        if ds.len() < 2 {
            return Err(Error::usage("meta-learner needs at least 2 stacking rows"));
        }
        let (x, y) = (ds.inputs(), ds.targets());
        Ok(match self {
            MetaLearner::RandomForest(p) => MetaModel::RandomForest(fit_forest(&x, &y, p)?),
            MetaLearner::LeastSquares => MetaModel::LeastSquares(LeastSquares::fit(&x, &y)?),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MetaModel {
    RandomForest(RandomForestRegressor),
    LeastSquares(LeastSquares),
}

impl MetaModel {
    pub fn predict(&self, x: &[f64]) -> f64 {
        match self {
            MetaModel::RandomForest(f) => f.predict(x),
            MetaModel::LeastSquares(l) => l.predict(x),
        }
    }
}

/// Base LSTMs plus the meta-regressor that combines them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "EnsembleRepr", into = "EnsembleRepr")]
pub struct EnsembleModel {
    base_models: Vec<Genome>,
    decoded: Vec<LstmParams>,
    meta: Option<MetaModel>,
    feature_names: Vec<String>,
    importance: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct EnsembleRepr {
    feature_names: Vec<String>,
    base_models: Vec<Genome>,
    meta: Option<MetaModel>,
    importance: Vec<f64>,
}

impl TryFrom<EnsembleRepr> for EnsembleModel {
    type Error = Error;

    fn try_from(r: EnsembleRepr) -> Result<Self> {
        let mut model = EnsembleModel::untrained(r.base_models, r.feature_names)?;
        if r.importance != model.importance {
            return Err(Error::data("stored importance does not match the base-model masks"));
        }
        model.meta = r.meta;
        Ok(model)
    }
}

impl From<EnsembleModel> for EnsembleRepr {
    fn from(m: EnsembleModel) -> Self {
        EnsembleRepr {
            feature_names: m.feature_names,
            base_models: m.base_models,
            meta: m.meta,
            importance: m.importance,
        }
    }
}

impl EnsembleModel {
    /// Base models without a meta-regressor; predicting fails until
    /// [`EnsembleModel::train`] is called.
    pub fn untrained(base_models: Vec<Genome>, feature_names: Vec<String>) -> Result<Self> {
        let q = feature_names.len();
        let importance = importance_of(base_models.iter(), q)?;
        let decoded = base_models.iter().map(Genome::decode).collect::<Result<_>>()?;
        Ok(Self {
            base_models,
            decoded,
            meta: None,
            feature_names,
            importance,
        })
    }

    /// Builds the stacking matrix on `train` and fits the meta-regressor.
    pub fn fit(front: &ParetoFront, train: &WindowedDataset, learner: &MetaLearner) -> Result<(Self, StackingDataset)> {
        let genomes: Vec<Genome> = front.genomes().cloned().collect();
        let mut model = Self::untrained(genomes, train.feature_names.clone())?;
        let stack = build_stacking_dataset(&model.base_models, train)?;
        model.train(learner, &stack)?;
        Ok((model, stack))
    }

    pub fn train(&mut self, learner: &MetaLearner, stack: &StackingDataset) -> Result<()> {
        if stack.model_count() != self.base_models.len() {
            return Err(Error::Dimension {
                expected: self.base_models.len(),
                actual: stack.model_count(),
            });
        }
        self.meta = Some(learner.fit(stack)?);
        Ok(())
    }

    pub fn base_models(&self) -> &[Genome] {
        &self.base_models
    }

    pub fn meta(&self) -> Option<&MetaModel> {
        self.meta.as_ref()
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn importance(&self) -> &[f64] {
        &self.importance
    }

    /// Advances every base model on `row` and returns the meta prediction.
    pub fn predict_meta(&self, state: &mut [LstmState], row: &[f64]) -> Result<f64> {
        let meta = self
            .meta
            .as_ref()
            .ok_or_else(|| Error::usage("ensemble has no trained meta-regressor"))?;
        if state.len() != self.decoded.len() {
            return Err(Error::Dimension {
                expected: self.decoded.len(),
                actual: state.len(),
            });
        }
        let outputs = self
            .decoded
            .iter()
            .zip(&self.base_models)
            .zip(state.iter_mut())
            .map(|((p, g), s)| p.step(s, g.mask(), row, 0))
            .collect::<Result<Vec<f64>>>()?;
        Ok(meta.predict(&outputs))
    }

    /// One-step predictions over `data` from a zero state.
    pub fn predict_sequence(&self, data: &WindowedDataset) -> Result<Vec<f64>> {
        let mut state = self.initial_state();
        data.rows.iter().map(|r| self.predict_meta(&mut state, r)).collect()
    }
}

impl SequenceForecaster for EnsembleModel {
    type State = Vec<LstmState>;

    fn initial_state(&self) -> Vec<LstmState> {
        self.decoded.iter().map(LstmParams::initial_state).collect()
    }

    fn step(&self, state: &mut Vec<LstmState>, row: &[f64]) -> Result<f64> {
        self.predict_meta(state, row)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lstm::{LstmShape, ObjectiveVector};

    fn bias_model(q: usize, bias: f64, mask: Vec<bool>) -> Genome {
        let shape = LstmShape::new(q, 1).unwrap();
        let mut w = vec![0.0; shape.weight_count()];
        *w.last_mut().unwrap() = bias;
        Genome::new(shape, mask, w).unwrap()
    }

    fn data(targets: Vec<f64>) -> WindowedDataset {
        WindowedDataset::from_rows(
            vec!["a".into(), "b".into()],
            targets.iter().map(|t| vec![*t, 1.0 - t]).collect(),
            targets,
        )
        .unwrap()
    }

    fn front(genomes: Vec<Genome>) -> ParetoFront {
        ParetoFront {
            members: genomes
                .into_iter()
                .map(|g| (g, ObjectiveVector(vec![0.1, 0.1])))
                .collect(),
        }
    }

    #[test]
    fn bias_only_stack() {
        let ds = data(vec![0.1, 0.9]);
        let s = build_stacking_dataset(&[bias_model(2, 0.3, vec![true, true])], &ds).unwrap();
        assert_eq!(s.matrix, vec![vec![0.3, 0.1], vec![0.3, 0.9]]);
    }

    #[test]
    fn stack_shape() {
        let ds = data(vec![0.1, 0.2, 0.3, 0.4, 0.5]);
        let models: Vec<Genome> = (0..3).map(|i| bias_model(2, i as f64, vec![true, false])).collect();
        let s = build_stacking_dataset(&models, &ds).unwrap();
        assert_eq!(s.len(), 5);
        assert!(s.matrix.iter().all(|r| r.len() == 4));
        assert_eq!(s.model_count(), 3);
    }

    #[test]
    fn stack_rejects_mismatched_models() {
        let ds = data(vec![0.1, 0.2]);
        assert!(build_stacking_dataset(&[bias_model(3, 0.0, vec![true; 3])], &ds).is_err());
        assert!(build_stacking_dataset(&[], &ds).is_err());
    }

    #[test]
    fn importance_fractions() {
        let genomes = vec![
            bias_model(2, 0.0, vec![true, false]),
            bias_model(2, 0.0, vec![true, true]),
            bias_model(2, 0.0, vec![true, false]),
            bias_model(2, 0.0, vec![false, false]),
        ];
        let imp = feature_importance(&front(genomes), 2).unwrap();
        assert_eq!(imp, vec![0.75, 0.25]);
        let all = feature_importance(&front(vec![bias_model(2, 0.0, vec![true, false])]), 2).unwrap();
        assert_eq!(all, vec![1.0, 0.0]);
        assert!(feature_importance(&front(vec![]), 2).is_err());
    }

    #[test]
    fn untrained_prediction_fails() {
        let model = EnsembleModel::untrained(vec![bias_model(2, 0.2, vec![true, true])], vec!["a".into(), "b".into()]).unwrap();
        let mut state = model.initial_state();
        assert!(matches!(model.predict_meta(&mut state, &[0.0, 0.0]), Err(Error::Usage(_))));
    }

    #[test]
    fn constant_target_forest_is_constant() {
        let ds = data(vec![0.4; 12]);
        let f = front(vec![bias_model(2, 0.2, vec![true, true]), bias_model(2, 0.6, vec![true, false])]);
        let (model, _) = EnsembleModel::fit(&f, &ds, &MetaLearner::default()).unwrap();
        assert!(model.predict_sequence(&ds).unwrap().iter().all(|&p| p == 0.4));
    }

    #[test]
    fn json_round_trip() {
        let ds = data((0..12).map(|i| i as f64 / 12.0).collect());
        let f = front(vec![bias_model(2, 0.2, vec![true, true]), bias_model(2, 0.6, vec![true, false])]);
        let (model, _) = EnsembleModel::fit(&f, &ds, &MetaLearner::LeastSquares).unwrap();
        let json = serde_json::to_string(&model).unwrap();
        let back: EnsembleModel = serde_json::from_str(&json).unwrap();
        assert_eq!(back, model);
    }
}
