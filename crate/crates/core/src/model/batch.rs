use ndarray::{Array2, Axis};

use super::ModelError;

/// Supervision attached to a set of samples.
#[derive(Debug, Clone, PartialEq)]
pub enum Targets {
    /// Class index per sample.
    Classes(Vec<usize>),
    /// One row of real-valued outputs per sample.
    Values(Array2<f64>),
}

impl Targets {
    pub fn len(&self) -> usize {
        match self {
            Targets::Classes(c) => c.len(),
            Targets::Values(v) => v.nrows(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn select(&self, indices: &[usize]) -> Targets {
        match self {
            Targets::Classes(c) => Targets::Classes(indices.iter().map(|&i| c[i]).collect()),
            Targets::Values(v) => Targets::Values(v.select(Axis(0), indices)),
        }
    }
}

/// `b` samples: an input matrix of shape `b × n₀` plus matching targets.
#[derive(Debug, Clone, PartialEq)]
pub struct MiniBatch {
    inputs: Array2<f64>,
    targets: Targets,
}

impl MiniBatch {
    pub fn new(inputs: Array2<f64>, targets: Targets) -> Result<Self, ModelError> {
        if inputs.nrows() == 0 {
            return Err(ModelError::InvalidBatch("batch must contain at least one sample".into()));
        }
        if inputs.nrows() != targets.len() {
            return Err(ModelError::InvalidBatch(format!(
                "{} input rows but {} targets",
                inputs.nrows(),
                targets.len()
            )));
        }
        Ok(Self { inputs, targets })
    }

    pub fn inputs(&self) -> &Array2<f64> {
        &self.inputs
    }

    pub fn targets(&self) -> &Targets {
        &self.targets
    }

    pub fn len(&self) -> usize {
        self.inputs.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.nrows() == 0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn rejects_row_mismatch_and_empty() {
        let x = array![[1.0, 2.0], [3.0, 4.0]];
        assert!(MiniBatch::new(x.clone(), Targets::Classes(vec![0])).is_err());
        assert!(MiniBatch::new(Array2::zeros((0, 2)), Targets::Classes(vec![])).is_err());
        assert!(MiniBatch::new(x, Targets::Classes(vec![0, 1])).is_ok());
    }
}
