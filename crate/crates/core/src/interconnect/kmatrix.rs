use super::{BlockSystem, InterconnectError};
use crate::sparse::SparseMatrix;

/// `[u_b; y_c] = [K11 K12; K21 K22] [y_b; u_c]`.
#[derive(Clone, Debug, PartialEq)]
pub struct InterconnectionMatrix {
    k11: SparseMatrix,
    k12: SparseMatrix,
    k21: SparseMatrix,
    k22: SparseMatrix,
    external_inputs: Vec<String>,
    external_outputs: Vec<String>,
}

impl InterconnectionMatrix {
    pub fn new(
        k11: SparseMatrix,
        k12: SparseMatrix,
        k21: SparseMatrix,
        k22: SparseMatrix,
    ) -> Result<Self, InterconnectError> {
        let inputs = (0..k12.ncols()).map(|i| format!("u{i}")).collect();
        let outputs = (0..k21.nrows()).map(|i| format!("y{i}")).collect();
        Self::with_labels(k11, k12, k21, k22, inputs, outputs)
    }

    pub fn with_labels(
        k11: SparseMatrix,
        k12: SparseMatrix,
        k21: SparseMatrix,
        k22: SparseMatrix,
        external_inputs: Vec<String>,
        external_outputs: Vec<String>,
    ) -> Result<Self, InterconnectError> {
        let (m_b, p_b) = k11.shape();
        let m_c = k12.ncols();
        let p_c = k21.nrows();
        let ok = k12.nrows() == m_b
            && k21.ncols() == p_b
            && k22.shape() == (p_c, m_c)
            && external_inputs.len() == m_c
            && external_outputs.len() == p_c;
        if !ok {
            return Err(InterconnectError::Dimension(format!(
                "K11 {:?}, K12 {:?}, K21 {:?}, K22 {:?}, {} external inputs, {} external outputs",
                k11.shape(),
                k12.shape(),
                k21.shape(),
                k22.shape(),
                external_inputs.len(),
                external_outputs.len()
            )));
        }
        Ok(Self {
            k11,
            k12,
            k21,
            k22,
            external_inputs,
            external_outputs,
        })
    }

    /// External inputs/outputs wired straight to subsystem ports:
    /// `K12` selects `u_b` entries, `K21` selects `y_b` entries, `K22 = 0`.
    pub fn from_selection(
        block: &BlockSystem,
        k11: SparseMatrix,
        inputs: &[(usize, usize)],
        outputs: &[(usize, usize)],
        input_labels: Vec<String>,
        output_labels: Vec<String>,
    ) -> Result<Self, InterconnectError> {
        let mut k12 = Vec::with_capacity(inputs.len());
        for (c, &(sub, port)) in inputs.iter().enumerate() {
            k12.push((block.global_input(sub, port)?, c, 1.0));
        }
        let mut k21 = Vec::with_capacity(outputs.len());
        for (r, &(sub, port)) in outputs.iter().enumerate() {
            k21.push((r, block.global_output(sub, port)?, 1.0));
        }
        Self::with_labels(
            k11,
            SparseMatrix::from_triplets(block.m_b(), inputs.len(), k12),
            SparseMatrix::from_triplets(outputs.len(), block.p_b(), k21),
            SparseMatrix::zeros(outputs.len(), inputs.len()),
            input_labels,
            output_labels,
        )
    }

    /// Same external wiring with a different subsystem coupling.
    pub fn with_k11(&self, k11: SparseMatrix) -> Result<Self, InterconnectError> {
        if k11.shape() != self.k11.shape() {
            return Err(InterconnectError::Dimension(format!(
                "K11 {:?}, expected {:?}",
                k11.shape(),
                self.k11.shape()
            )));
        }
        Ok(Self {
            k11,
            ..self.clone()
        })
    }

    pub fn k11(&self) -> &SparseMatrix {
        &self.k11
    }

    pub fn k12(&self) -> &SparseMatrix {
        &self.k12
    }

    pub fn k21(&self) -> &SparseMatrix {
        &self.k21
    }

    pub fn k22(&self) -> &SparseMatrix {
        &self.k22
    }

    pub fn m_b(&self) -> usize {
        self.k11.nrows()
    }

    pub fn p_b(&self) -> usize {
        self.k11.ncols()
    }

    pub fn m_c(&self) -> usize {
        self.k12.ncols()
    }

    pub fn p_c(&self) -> usize {
        self.k21.nrows()
    }

    pub fn external_inputs(&self) -> &[String] {
        &self.external_inputs
    }

    pub fn external_outputs(&self) -> &[String] {
        &self.external_outputs
    }
}
