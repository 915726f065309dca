use std::collections::HashSet;

use rayon::prelude::*;

use super::{
    block_diag_sweeps, lft_assemble, posdep_k11, static_k11, BlockSystem, InterconnectError,
    InterconnectionMatrix, InterfaceSpec, OperatingPoint,
};
use crate::lti::{frf_eval, to_descriptor, DescriptorStateSpace, FrfSweep, LtiError, SecondOrderSystem};
use crate::sparse::SparseMatrix;

/// A subsystem given either as `(M, D, K)` or directly as a realization.
#[derive(Clone, Debug, PartialEq)]
pub enum Subsystem {
    SecondOrder(SecondOrderSystem),
    StateSpace(DescriptorStateSpace),
}

impl Subsystem {
    pub fn descriptor(&self) -> Result<DescriptorStateSpace, LtiError> {
        match self {
            Subsystem::SecondOrder(s) => to_descriptor(s),
            Subsystem::StateSpace(ss) => Ok(ss.clone()),
        }
    }

    pub fn n_states(&self) -> usize {
        match self {
            Subsystem::SecondOrder(s) => 2 * s.n_dof(),
            Subsystem::StateSpace(ss) => ss.n_states(),
        }
    }

    pub fn input_labels(&self) -> Vec<String> {
        match self {
            Subsystem::SecondOrder(s) => s.input_labels(),
            Subsystem::StateSpace(ss) => ss.input_labels().to_vec(),
        }
    }

    pub fn output_labels(&self) -> Vec<String> {
        match self {
            Subsystem::SecondOrder(s) => s.output_labels(),
            Subsystem::StateSpace(ss) => ss.output_labels().to_vec(),
        }
    }

    pub fn as_second_order(&self) -> Option<&SecondOrderSystem> {
        match self {
            Subsystem::SecondOrder(s) => Some(s),
            Subsystem::StateSpace(_) => None,
        }
    }

    pub fn frf(&self, omegas: &[f64]) -> Result<FrfSweep, LtiError> {
        frf_eval(&self.descriptor()?, omegas)
    }
}

impl From<SecondOrderSystem> for Subsystem {
    fn from(s: SecondOrderSystem) -> Self {
        Subsystem::SecondOrder(s)
    }
}

impl From<DescriptorStateSpace> for Subsystem {
    fn from(ss: DescriptorStateSpace) -> Self {
        Subsystem::StateSpace(ss)
    }
}

/// A subsystem port routed to the outside of the interconnection.
#[derive(Clone, Debug, PartialEq)]
pub struct ExternalPort {
    pub label: String,
    pub subsystem: usize,
    /// Local input (for `u_c`) or output (for `y_c`) index.
    pub port: usize,
}

/// Named subsystems, their spring interfaces and the external port selection.
#[derive(Clone, Debug, PartialEq)]
pub struct CoupledModel {
    names: Vec<String>,
    subsystems: Vec<Subsystem>,
    interfaces: Vec<InterfaceSpec>,
    external_inputs: Vec<ExternalPort>,
    external_outputs: Vec<ExternalPort>,
    block: BlockSystem,
}

impl CoupledModel {
    pub fn new(
        names: Vec<String>,
        subsystems: Vec<Subsystem>,
        interfaces: Vec<InterfaceSpec>,
        external_inputs: Vec<ExternalPort>,
        external_outputs: Vec<ExternalPort>,
    ) -> Result<Self, InterconnectError> {
        if names.len() != subsystems.len() {
            return Err(InterconnectError::Dimension(format!(
                "{} names for {} subsystems",
                names.len(),
                subsystems.len()
            )));
        }
        let mut seen = HashSet::new();
        for n in &names {
            if !seen.insert(n) {
                return Err(InterconnectError::Dimension(format!("duplicate subsystem name '{n}'")));
            }
        }
        let block = BlockSystem::from_ports(
            names
                .iter()
                .zip(&subsystems)
                .map(|(n, s)| (n.clone(), s.input_labels(), s.output_labels())),
        )?;
        for iface in &interfaces {
            iface.validate(&block)?;
        }
        for p in &external_inputs {
            block.global_input(p.subsystem, p.port)?;
        }
        for p in &external_outputs {
            block.global_output(p.subsystem, p.port)?;
        }
        Ok(Self {
            names,
            subsystems,
            interfaces,
            external_inputs,
            external_outputs,
            block,
        })
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn subsystems(&self) -> &[Subsystem] {
        &self.subsystems
    }

    pub fn interfaces(&self) -> &[InterfaceSpec] {
        &self.interfaces
    }

    pub fn external_inputs(&self) -> &[ExternalPort] {
        &self.external_inputs
    }

    pub fn external_outputs(&self) -> &[ExternalPort] {
        &self.external_outputs
    }

    pub fn block(&self) -> &BlockSystem {
        &self.block
    }

    pub fn len(&self) -> usize {
        self.subsystems.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subsystems.is_empty()
    }

    /// Same interfaces and external wiring around different subsystems,
    /// e.g. reduced ones. Port labels must match exactly.
    pub fn with_subsystems(&self, subsystems: Vec<Subsystem>) -> Result<Self, InterconnectError> {
        if subsystems.len() != self.subsystems.len() {
            return Err(InterconnectError::Dimension(format!(
                "{} replacement subsystems for {}",
                subsystems.len(),
                self.subsystems.len()
            )));
        }
        for ((name, old), new) in self.names.iter().zip(&self.subsystems).zip(&subsystems) {
            if old.input_labels() != new.input_labels() || old.output_labels() != new.output_labels() {
                return Err(InterconnectError::Dimension(format!(
                    "subsystem '{name}': replacement changes the port set"
                )));
            }
        }
        Ok(Self {
            subsystems,
            ..self.clone()
        })
    }

    /// Replaces one subsystem, keeping the others.
    pub fn replace(&self, index: usize, subsystem: Subsystem) -> Result<Self, InterconnectError> {
        let mut subs = self.subsystems.clone();
        *subs
            .get_mut(index)
            .ok_or(InterconnectError::UnknownSubsystem(index))? = subsystem;
        self.with_subsystems(subs)
    }

    /// Interconnection matrix with the given coupling and this model's
    /// external selection.
    pub fn interconnection(&self, k11: SparseMatrix) -> Result<InterconnectionMatrix, InterconnectError> {
        let ins: Vec<_> = self.external_inputs.iter().map(|p| (p.subsystem, p.port)).collect();
        let outs: Vec<_> = self.external_outputs.iter().map(|p| (p.subsystem, p.port)).collect();
        InterconnectionMatrix::from_selection(
            &self.block,
            k11,
            &ins,
            &outs,
            self.external_inputs.iter().map(|p| p.label.clone()).collect(),
            self.external_outputs.iter().map(|p| p.label.clone()).collect(),
        )
    }

    pub fn posdep_k11(&self, op: &OperatingPoint) -> Result<SparseMatrix, InterconnectError> {
        posdep_k11(&self.interfaces, op, &self.block)
    }

    pub fn static_k11(&self, op: &OperatingPoint) -> Result<SparseMatrix, InterconnectError> {
        static_k11(&self.interfaces, op, &self.block)
    }

    /// Per-subsystem FRFs, evaluated concurrently.
    pub fn subsystem_frfs(&self, omegas: &[f64]) -> Result<Vec<FrfSweep>, InterconnectError> {
        self.subsystems
            .par_iter()
            .map(|s| s.frf(omegas).map_err(InterconnectError::from))
            .collect()
    }

    pub fn block_frf(&self, sweeps: &[FrfSweep]) -> Result<FrfSweep, InterconnectError> {
        block_diag_sweeps(&self.block, &sweeps.iter().collect::<Vec<_>>())
    }

    /// Closed-loop FRF at one operating point with position-dependent coupling.
    pub fn assemble(&self, op: &OperatingPoint, omegas: &[f64]) -> Result<FrfSweep, InterconnectError> {
        let gb = self.block_frf(&self.subsystem_frfs(omegas)?)?;
        lft_assemble(&gb, &self.interconnection(self.posdep_k11(op)?)?)
    }

    /// Closed-loop FRF with springs routed directly between coincident ports.
    pub fn assemble_static(&self, op: &OperatingPoint, omegas: &[f64]) -> Result<FrfSweep, InterconnectError> {
        let gb = self.block_frf(&self.subsystem_frfs(omegas)?)?;
        lft_assemble(&gb, &self.interconnection(self.static_k11(op)?)?)
    }
}
