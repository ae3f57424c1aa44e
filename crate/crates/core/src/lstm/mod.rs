//! Masked single-layer LSTM decoded from a flat genome.
//!
//! A [`Genome`] carries a binary feature mask and the flat weight vector of an
//! LSTM. The mask zeroes unselected attributes before every event-weight
//! product, so feature selection is part of the model itself.

mod params;

use serde::{Deserialize, Serialize};

pub use params::{convert, LstmParams, LstmShape, Matrix};

use crate::data::WindowedDataset;
use crate::error::{Error, Result};
use crate::forecast::metrics::rmse;
use params::dot;

/// One individual: feature mask plus LSTM weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GenomeRepr", into = "GenomeRepr")]
pub struct Genome {
    shape: LstmShape,
    mask: Vec<bool>,
    weights: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct GenomeRepr {
    hidden: usize,
    mask: Vec<bool>,
    weights: Vec<f64>,
}

impl TryFrom<GenomeRepr> for Genome {
    type Error = Error;

    fn try_from(repr: GenomeRepr) -> Result<Self> {
        let shape = LstmShape::new(repr.mask.len(), repr.hidden)?;
        Genome::new(shape, repr.mask, repr.weights)
    }
}

impl From<Genome> for GenomeRepr {
    fn from(g: Genome) -> Self {
        GenomeRepr {
            hidden: g.shape.hidden,
            mask: g.mask,
            weights: g.weights,
        }
    }
}

impl Genome {
    pub fn new(shape: LstmShape, mask: Vec<bool>, weights: Vec<f64>) -> Result<Self> {
        if mask.len() != shape.inputs {
            return Err(Error::Dimension {
                expected: shape.inputs,
                actual: mask.len(),
            });
        }
        if weights.len() != shape.weight_count() {
            return Err(Error::Dimension {
                expected: shape.weight_count(),
                actual: weights.len(),
            });
        }
        Ok(Self {
            shape,
            mask,
            weights,
        })
    }

    pub fn shape(&self) -> LstmShape {
        self.shape
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub(crate) fn parts_mut(&mut self) -> (&mut [bool], &mut [f64]) {
        (&mut self.mask, &mut self.weights)
    }

    pub fn selected_count(&self) -> usize {
        self.mask.iter().filter(|&&b| b).count()
    }

    pub fn decode(&self) -> Result<LstmParams> {
        convert(&self.weights, self.shape)
    }
}

/// Per-partition RMSE values of one genome; lower is better in every entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ObjectiveVector(pub Vec<f64>);

impl ObjectiveVector {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for ObjectiveVector {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

/// Recurrent hidden and cell state.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmState {
    pub hidden: Vec<f64>,
    pub cell: Vec<f64>,
}

impl LstmState {
    pub fn zeros(units: usize) -> Self {
        Self {
            hidden: vec![0.0; units],
            cell: vec![0.0; units],
        }
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// `out = (wh·h + bh) + (wx·x + bx)`
fn gate_preactivation(
    wh: &Matrix,
    bh: &[f64],
    wx: &Matrix,
    bx: &[f64],
    h: &[f64],
    x: &[f64],
    out: &mut [f64],
) {
    for (r, o) in out.iter_mut().enumerate() {
        *o = (dot(wh.row(r), h) + bh[r]) + (dot(wx.row(r), x) + bx[r]);
    }
}

impl LstmParams {
    pub fn initial_state(&self) -> LstmState {
        LstmState::zeros(self.shape.hidden)
    }

    /// Advances the recurrence by one event and returns the model output.
    ///
    /// `sample` is only used to label numeric errors.
    pub fn step(
        &self,
        state: &mut LstmState,
        mask: &[bool],
        input: &[f64],
        sample: usize,
    ) -> Result<f64> {
        let q = self.shape.inputs;
        let u = self.shape.hidden;
        if input.len() != q {
            return Err(Error::Dimension {
                expected: q,
                actual: input.len(),
            });
        }
        if mask.len() != q {
            return Err(Error::Dimension {
                expected: q,
                actual: mask.len(),
            });
        }
        let x: Vec<f64> = input
            .iter()
            .zip(mask)
            .map(|(&v, &keep)| if keep { v } else { 0.0 })
            .collect();

        let h = &state.hidden;
        let mut f = vec![0.0; u];
        let mut i = vec![0.0; u];
        let mut l = vec![0.0; u];
        let mut o = vec![0.0; u];
        gate_preactivation(&self.whf, &self.bhf, &self.wxf, &self.bxf, h, &x, &mut f);
        gate_preactivation(&self.whi, &self.bhi, &self.wxi, &self.bxi, h, &x, &mut i);
        gate_preactivation(&self.whl, &self.bhl, &self.wxl, &self.bxl, h, &x, &mut l);
        gate_preactivation(&self.who, &self.bho, &self.wxo, &self.bxo, h, &x, &mut o);

        for k in 0..u {
            // forget term already carries the product with the previous cell
            let forget = sigmoid(f[k]) * state.cell[k];
            let input = sigmoid(i[k]) * l[k].tanh();
            state.cell[k] = forget + input;
            state.hidden[k] = sigmoid(o[k]) * state.cell[k].tanh();
        }
        let y = dot(&self.wo, &state.hidden) + self.bo;
        if !y.is_finite() || state.cell.iter().any(|c| !c.is_finite()) {
            return Err(Error::Numeric { sample });
        }
        Ok(y)
    }
}

/// Runs the masked recurrence over `inputs` from a zero state.
pub fn forward_pass<R: AsRef<[f64]>>(
    params: &LstmParams,
    mask: &[bool],
    inputs: &[R],
) -> Result<Vec<f64>> {
    let mut state = params.initial_state();
    inputs
        .iter()
        .enumerate()
        .map(|(j, row)| params.step(&mut state, mask, row.as_ref(), j))
        .collect()
}

fn objective_with(params: &LstmParams, mask: &[bool], partition: &WindowedDataset) -> Result<f64> {
    if partition.is_empty() {
        return Err(Error::usage("cannot evaluate a genome on an empty partition"));
    }
    let outputs = forward_pass(params, mask, &partition.rows)?;
    rmse(&outputs, &partition.targets)
}

/// RMSE of the genome's forward pass against the partition's targets.
pub fn evaluate_objective(genome: &Genome, partition: &WindowedDataset) -> Result<f64> {
    let params = genome.decode()?;
    objective_with(&params, genome.mask(), partition)
}

/// One RMSE per partition; the recurrent state restarts at zero for each.
pub fn evaluate_all(genome: &Genome, partitions: &[WindowedDataset]) -> Result<ObjectiveVector> {
    if partitions.len() < 2 {
        return Err(Error::usage(format!(
            "need at least two partitions, got {}",
            partitions.len()
        )));
    }
    let params = genome.decode()?;
    partitions
        .iter()
        .map(|p| objective_with(&params, genome.mask(), p))
        .collect::<Result<Vec<_>>>()
        .map(ObjectiveVector)
}
