use nalgebra::DMatrix;
use num_complex::Complex64;

use super::InterconnectError;
use crate::lti::{DescriptorStateSpace, FrfSweep};

/// Port bookkeeping of one subsystem inside the block system.
#[derive(Clone, Debug, PartialEq)]
pub struct PortBlock {
    pub name: String,
    pub input_labels: Vec<String>,
    pub output_labels: Vec<String>,
    pub input_offset: usize,
    pub output_offset: usize,
}

impl PortBlock {
    pub fn n_inputs(&self) -> usize {
        self.input_labels.len()
    }

    pub fn n_outputs(&self) -> usize {
        self.output_labels.len()
    }
}

/// Ordered concatenation of subsystem ports: `u_b = [u_1; …; u_k]`,
/// `y_b = [y_1; …; y_k]`.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockSystem {
    blocks: Vec<PortBlock>,
    m_b: usize,
    p_b: usize,
}

impl BlockSystem {
    /// `(name, input labels, output labels)` per subsystem, in block order.
    pub fn from_ports<I>(entries: I) -> Result<Self, InterconnectError>
    where
        I: IntoIterator<Item = (String, Vec<String>, Vec<String>)>,
    {
        let mut blocks = Vec::new();
        let (mut m_b, mut p_b) = (0, 0);
        for (name, input_labels, output_labels) in entries {
            let block = PortBlock {
                name,
                input_offset: m_b,
                output_offset: p_b,
                input_labels,
                output_labels,
            };
            m_b += block.n_inputs();
            p_b += block.n_outputs();
            blocks.push(block);
        }
        if blocks.is_empty() {
            return Err(InterconnectError::EmptyBlock);
        }
        Ok(Self { blocks, m_b, p_b })
    }

    pub fn m_b(&self) -> usize {
        self.m_b
    }

    pub fn p_b(&self) -> usize {
        self.p_b
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn blocks(&self) -> &[PortBlock] {
        &self.blocks
    }

    pub fn block(&self, subsystem: usize) -> Result<&PortBlock, InterconnectError> {
        self.blocks
            .get(subsystem)
            .ok_or(InterconnectError::UnknownSubsystem(subsystem))
    }

    pub fn global_input(&self, subsystem: usize, port: usize) -> Result<usize, InterconnectError> {
        let b = self.block(subsystem)?;
        if port >= b.n_inputs() {
            return Err(InterconnectError::UnknownPort {
                subsystem,
                kind: "input",
                port,
            });
        }
        Ok(b.input_offset + port)
    }

    pub fn global_output(&self, subsystem: usize, port: usize) -> Result<usize, InterconnectError> {
        let b = self.block(subsystem)?;
        if port >= b.n_outputs() {
            return Err(InterconnectError::UnknownPort {
                subsystem,
                kind: "output",
                port,
            });
        }
        Ok(b.output_offset + port)
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.blocks.iter().position(|b| b.name == name)
    }

    fn global_labels(&self) -> (Vec<String>, Vec<String>) {
        let ins = self
            .blocks
            .iter()
            .flat_map(|b| b.input_labels.iter().map(move |l| format!("{}.{}", b.name, l)))
            .collect();
        let outs = self
            .blocks
            .iter()
            .flat_map(|b| b.output_labels.iter().map(move |l| format!("{}.{}", b.name, l)))
            .collect();
        (ins, outs)
    }
}

/// Block system of unnamed subsystems; names are their indices.
pub fn block_collect(systems: &[DescriptorStateSpace]) -> Result<BlockSystem, InterconnectError> {
    BlockSystem::from_ports(systems.iter().enumerate().map(|(j, s)| {
        (
            j.to_string(),
            s.input_labels().to_vec(),
            s.output_labels().to_vec(),
        )
    }))
}

pub fn block_collect_named(systems: &[(&str, &DescriptorStateSpace)]) -> Result<BlockSystem, InterconnectError> {
    BlockSystem::from_ports(systems.iter().map(|(name, s)| {
        (
            name.to_string(),
            s.input_labels().to_vec(),
            s.output_labels().to_vec(),
        )
    }))
}

/// `G_b(iω) = diag(G_1(iω), …, G_k(iω))` from per-subsystem sweeps that share
/// one frequency grid.
pub fn block_diag_sweeps(block: &BlockSystem, sweeps: &[&FrfSweep]) -> Result<FrfSweep, InterconnectError> {
    if sweeps.len() != block.len() {
        return Err(InterconnectError::Dimension(format!(
            "{} sweeps for {} subsystems",
            sweeps.len(),
            block.len()
        )));
    }
    let grid = sweeps[0].frequencies();
    for (b, s) in block.blocks().iter().zip(sweeps) {
        if s.frequencies() != grid {
            return Err(InterconnectError::FrequencyMismatch);
        }
        if s.n_inputs() != b.n_inputs() || s.n_outputs() != b.n_outputs() {
            return Err(InterconnectError::Dimension(format!(
                "subsystem '{}' sweep is {}x{}, block expects {}x{}",
                b.name,
                s.n_outputs(),
                s.n_inputs(),
                b.n_outputs(),
                b.n_inputs()
            )));
        }
    }
    let data = (0..grid.len())
        .map(|k| {
            let mut g = DMatrix::<Complex64>::zeros(block.p_b(), block.m_b());
            for (b, s) in block.blocks().iter().zip(sweeps) {
                g.view_mut((b.output_offset, b.input_offset), (b.n_outputs(), b.n_inputs()))
                    .copy_from(s.at(k));
            }
            g
        })
        .collect();
    let (ins, outs) = block.global_labels();
    Ok(FrfSweep::new(grid.to_vec(), data, ins, outs)?)
}
