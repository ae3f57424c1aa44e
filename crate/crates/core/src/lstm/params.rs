use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Input width and hidden width of a single-layer LSTM.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LstmShape {
    /// Number of input attributes (`q`).
    pub inputs: usize,
    /// Number of hidden units (`u`).
    pub hidden: usize,
}

impl LstmShape {
    pub fn new(inputs: usize, hidden: usize) -> Result<Self> {
        if inputs == 0 || hidden == 0 {
            return Err(Error::usage(format!(
                "LSTM shape needs at least one input and one hidden unit (got q={inputs}, u={hidden})"
            )));
        }
        Ok(Self { inputs, hidden })
    }

    /// Length of the flat weight vector: `4·(q·u + u² + 2·u) + u + 1`.
    pub fn weight_count(&self) -> usize {
        let (q, u) = (self.inputs, self.hidden);
        4 * (q * u + u * u + 2 * u) + u + 1
    }
}

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Dimension {
                expected: rows * cols,
                actual: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.data[row * self.cols + col] = value;
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.data[row * self.cols..(row + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// The nine weight matrices and nine bias vectors of a single-layer LSTM with
/// a fully connected scalar output.
///
/// Gate suffixes: `i` ignore input gate, `f` forget gate, `l` learn input
/// gate, `o` output gate. `wx*`/`bx*` act on the event (input row), `wh*`/`bh*`
/// on the previous hidden state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmParams {
    pub shape: LstmShape,
    pub wxi: Matrix,
    pub wxf: Matrix,
    pub wxl: Matrix,
    pub wxo: Matrix,
    pub bxi: Vec<f64>,
    pub bxf: Vec<f64>,
    pub bxl: Vec<f64>,
    pub bxo: Vec<f64>,
    pub whi: Matrix,
    pub whf: Matrix,
    pub whl: Matrix,
    pub who: Matrix,
    pub bhi: Vec<f64>,
    pub bhf: Vec<f64>,
    pub bhl: Vec<f64>,
    pub bho: Vec<f64>,
    pub wo: Vec<f64>,
    pub bo: f64,
}

/// Sequential reader over the flat weight vector.
struct Cursor<'a> {
    weights: &'a [f64],
    offset: usize,
}

impl Cursor<'_> {
    fn take(&mut self, len: usize) -> &[f64] {
        let slice = &self.weights[self.offset..self.offset + len];
        self.offset += len;
        slice
    }

    fn matrix(&mut self, rows: usize, cols: usize) -> Matrix {
        Matrix {
            rows,
            cols,
            data: self.take(rows * cols).to_vec(),
        }
    }

    fn vector(&mut self, len: usize) -> Vec<f64> {
        self.take(len).to_vec()
    }
}

/// Decodes a flat weight vector into LSTM parameters.
///
/// Slices are consumed consecutively in the order event weights (i, f, l, o;
/// `u×q` each), event biases (i, f, l, o; `u` each), hidden-state weights
/// (i, f, l, o; `u×u` each), hidden-state biases (i, f, l, o; `u` each),
/// output weights (`u`) and output bias (1). Each matrix is filled row-major.
pub fn convert(weights: &[f64], shape: LstmShape) -> Result<LstmParams> {
    let expected = shape.weight_count();
    if weights.len() != expected {
        return Err(Error::Dimension {
            expected,
            actual: weights.len(),
        });
    }
    let (q, u) = (shape.inputs, shape.hidden);
    let mut cur = Cursor { weights, offset: 0 };
    let wxi = cur.matrix(u, q);
    let wxf = cur.matrix(u, q);
    let wxl = cur.matrix(u, q);
    let wxo = cur.matrix(u, q);
    let bxi = cur.vector(u);
    let bxf = cur.vector(u);
    let bxl = cur.vector(u);
    let bxo = cur.vector(u);
    let whi = cur.matrix(u, u);
    let whf = cur.matrix(u, u);
    let whl = cur.matrix(u, u);
    let who = cur.matrix(u, u);
    let bhi = cur.vector(u);
    let bhf = cur.vector(u);
    let bhl = cur.vector(u);
    let bho = cur.vector(u);
    let wo = cur.vector(u);
    let bo = cur.take(1)[0];
    debug_assert_eq!(cur.offset, expected);

    Ok(LstmParams {
        shape,
        wxi,
        wxf,
        wxl,
        wxo,
        bxi,
        bxf,
        bxl,
        bxo,
        whi,
        whf,
        whl,
        who,
        bhi,
        bhf,
        bhl,
        bho,
        wo,
        bo,
    })
}

impl LstmParams {
    /// Inverse of [`convert`].
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.shape.weight_count());
        for m in [&self.wxi, &self.wxf, &self.wxl, &self.wxo] {
            out.extend_from_slice(m.as_slice());
        }
        for b in [&self.bxi, &self.bxf, &self.bxl, &self.bxo] {
            out.extend_from_slice(b);
        }
        for m in [&self.whi, &self.whf, &self.whl, &self.who] {
            out.extend_from_slice(m.as_slice());
        }
        for b in [&self.bhi, &self.bhf, &self.bhl, &self.bho] {
            out.extend_from_slice(b);
        }
        out.extend_from_slice(&self.wo);
        out.push(self.bo);
        out
    }

    /// Total number of scalar cells across all eighteen parameter blocks.
    pub fn cell_count(&self) -> usize {
        let mats = [
            &self.wxi, &self.wxf, &self.wxl, &self.wxo, &self.whi, &self.whf, &self.whl,
            &self.who,
        ];
        let vecs = [
            &self.bxi, &self.bxf, &self.bxl, &self.bxo, &self.bhi, &self.bhf, &self.bhl,
            &self.bho, &self.wo,
        ];
        mats.iter().map(|m| m.rows() * m.cols()).sum::<usize>()
            + vecs.iter().map(|v| v.len()).sum::<usize>()
            + 1
    }
}
