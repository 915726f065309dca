use super::{BeamSpec, BeamStage, BeamSupport, ModelError};
use crate::interconnect::{
    Anchoring, CoupledModel, ExternalPort, InterfaceSide, InterfaceSpec, SpringSpec, Subsystem, VirtualPoint,
};
use crate::lti::{build_modal_damping, lin_space, InputPort, OutputPort, SecondOrderSystem};

const COORD_TOL: f64 = 1e-9;

/// Parameters of the spring-coupled stage bench.
///
/// The base stage (`x_stage`) is a clamped–clamped beam. The `yz_stage`
/// is a free–free beam riding on it through vertical springs fixed to the
/// `yz_stage` at `carriage_anchors` and touching the base at
/// `rail_anchors + δ₁`. With `top_stage` set, a third free–free beam rides on
/// the `yz_stage` through a second interface (offset `δ₂`), which gives two
/// independent operating coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct StageModelConfig {
    pub rail_length: f64,
    pub rail_elements: usize,
    /// Span of the base-side virtual grid.
    pub rail_span: (f64, f64),
    pub carriage_length: f64,
    pub carriage_elements: usize,
    pub top_stage: bool,
    pub top_length: f64,
    pub top_elements: usize,
    /// Nominal `EI` (N·m²) before `stiffness_scale`.
    pub bending_stiffness: f64,
    /// Nominal `ρA` (kg/m) before `density_scale`.
    pub mass_per_length: f64,
    pub stiffness_scale: f64,
    pub density_scale: f64,
    /// `k_s` (N/m) of every spring.
    pub spring_stiffness: f64,
    pub carriage_anchors: Vec<f64>,
    pub rail_anchors: Vec<f64>,
    pub top_anchors: Vec<f64>,
    /// Positions on the `yz_stage` touched by the top-stage springs at `δ₂ = 0`.
    pub top_base_anchors: Vec<f64>,
    /// Virtual points per side of the base interface (also used for the
    /// `yz_stage` grid shared by both interfaces).
    pub n_v: usize,
    /// Virtual points on the top stage.
    pub top_n_v: usize,
    pub zeta: f64,
}

impl Default for StageModelConfig {
    fn default() -> Self {
        Self {
            rail_length: 1.0,
            rail_elements: 50,
            rail_span: (0.1, 0.9),
            carriage_length: 0.4,
            carriage_elements: 20,
            top_stage: false,
            top_length: 0.2,
            top_elements: 10,
            bending_stiffness: 23_625.0,
            mass_per_length: 11.7,
            stiffness_scale: 1.0,
            density_scale: 1.0,
            spring_stiffness: 2e6,
            carriage_anchors: vec![0.0, 0.2, 0.4],
            rail_anchors: vec![0.3, 0.5, 0.7],
            top_anchors: vec![0.0, 0.2],
            top_base_anchors: vec![0.1, 0.3],
            n_v: 5,
            top_n_v: 3,
            zeta: 0.03,
        }
    }
}

impl StageModelConfig {
    pub fn n_interfaces(&self) -> usize {
        if self.top_stage {
            2
        } else {
            1
        }
    }

    fn validate(&self) -> Result<(), ModelError> {
        let positive = [
            self.rail_length,
            self.carriage_length,
            self.top_length,
            self.bending_stiffness,
            self.mass_per_length,
            self.stiffness_scale,
            self.density_scale,
            self.spring_stiffness,
        ];
        if positive.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(ModelError::Config("lengths, scales and stiffnesses must be positive".into()));
        }
        let counts = [
            self.rail_elements,
            self.carriage_elements,
            self.top_elements,
            self.n_v,
            self.top_n_v,
        ];
        if counts.iter().any(|&c| c < 2) {
            return Err(ModelError::Config("element and grid counts must be at least 2".into()));
        }
        if !(0.0..1.0).contains(&self.zeta) {
            return Err(ModelError::Config(format!("damping ratio {} outside [0, 1)", self.zeta)));
        }
        let (lo, hi) = self.rail_span;
        if !(0.0 <= lo && lo < hi && hi <= self.rail_length) {
            return Err(ModelError::Config(format!("rail span [{lo}, {hi}]")));
        }
        if self.carriage_anchors.len() != self.rail_anchors.len() {
            return Err(ModelError::Config("carriage and rail anchor counts differ".into()));
        }
        if self.top_stage && self.top_anchors.len() != self.top_base_anchors.len() {
            return Err(ModelError::Config("top and top-base anchor counts differ".into()));
        }
        let check = |stage: &str, anchors: &[f64], min: f64, max: f64| -> Result<(), ModelError> {
            for &a in anchors {
                if !(a >= min - COORD_TOL && a <= max + COORD_TOL) {
                    return Err(ModelError::AnchorOutsideGrid {
                        stage: stage.into(),
                        anchor: a,
                        min,
                        max,
                    });
                }
            }
            Ok(())
        };
        check("yz_stage", &self.carriage_anchors, 0.0, self.carriage_length)?;
        check("x_stage", &self.rail_anchors, lo, hi)?;
        if self.top_stage {
            check("top_stage", &self.top_anchors, 0.0, self.top_length)?;
            check("yz_stage", &self.top_base_anchors, 0.0, self.carriage_length)?;
        }
        Ok(())
    }

    fn beam(&self, length: f64, n_elements: usize, support: BeamSupport) -> BeamSpec {
        BeamSpec {
            length,
            n_elements,
            bending_stiffness: self.bending_stiffness * self.stiffness_scale,
            mass_per_length: self.mass_per_length * self.density_scale,
            support,
        }
    }
}

/// Position-dependent model plus the static reference in which every node
/// inside an interface span is a port, so springs at node-aligned offsets
/// can be routed without interpolation.
#[derive(Clone, Debug)]
pub struct TwoStageBench {
    pub config: StageModelConfig,
    pub model: CoupledModel,
    pub static_model: CoupledModel,
}

struct Stage {
    name: &'static str,
    beam: BeamStage,
    /// Grid nodes per interface grid of this stage.
    grid_nodes: Vec<usize>,
    ext_input: Option<usize>,
    ext_output: Option<usize>,
}

impl Stage {
    /// Force/displacement ports at `nodes`, then the external ports.
    fn system(&self, nodes: &[usize], zeta: f64) -> Result<SecondOrderSystem, ModelError> {
        let mut inputs = Vec::new();
        let mut outputs = Vec::new();
        for (k, &node) in nodes.iter().enumerate() {
            let dof = self.beam.transverse_dof(node).expect("grid nodes are free");
            inputs.push(InputPort::new(format!("f{k}"), dof));
            outputs.push(OutputPort::displacement(format!("q{k}"), dof));
        }
        if let Some(node) = self.ext_input {
            inputs.push(InputPort::new("f_ext", self.beam.transverse_dof(node).expect("free node")));
        }
        if let Some(node) = self.ext_output {
            outputs.push(OutputPort::displacement(
                "q_ext",
                self.beam.transverse_dof(node).expect("free node"),
            ));
        }
        let damping = build_modal_damping(&self.beam.mass, &self.beam.stiffness, zeta)?;
        Ok(SecondOrderSystem::new(
            self.beam.mass.clone(),
            damping,
            self.beam.stiffness.clone(),
            inputs,
            outputs,
        )?)
    }

    fn side(&self, subsystem: usize, nodes: &[usize]) -> InterfaceSide {
        InterfaceSide {
            subsystem,
            direction: "z".into(),
            points: nodes
                .iter()
                .enumerate()
                .map(|(k, &node)| VirtualPoint {
                    input: k,
                    output: k,
                    coordinate: self.beam.node_coordinates[node],
                })
                .collect(),
        }
    }
}

/// Nodes closest to `n` equally spaced targets over `[lo, hi]`.
fn grid_nodes(beam: &BeamStage, lo: f64, hi: f64, n: usize, stage: &str) -> Result<Vec<usize>, ModelError> {
    let candidates = beam.free_nodes_in(lo, hi, COORD_TOL);
    let mut nodes: Vec<usize> = lin_space(lo, hi, n)
        .into_iter()
        .map(|x| {
            *candidates
                .iter()
                .min_by(|&&a, &&b| {
                    (beam.node_coordinates[a] - x)
                        .abs()
                        .total_cmp(&(beam.node_coordinates[b] - x).abs())
                })
                .expect("span contains nodes")
        })
        .collect();
    let before = nodes.len();
    nodes.dedup();
    if nodes.len() != before {
        return Err(ModelError::Config(format!(
            "'{stage}': {n} virtual points do not fit on {} nodes in [{lo}, {hi}]",
            candidates.len()
        )));
    }
    Ok(nodes)
}

fn springs(k: f64, on_j: &[f64], on_ell: &[f64]) -> Vec<SpringSpec> {
    on_j.iter()
        .zip(on_ell)
        .map(|(&a, &b)| SpringSpec {
            stiffness: k,
            anchor_j: a,
            anchor_ell_base: b,
        })
        .collect()
}

pub fn make_two_stage_bench(cfg: &StageModelConfig) -> Result<TwoStageBench, ModelError> {
    cfg.validate()?;
    let rail_beam = cfg.beam(cfg.rail_length, cfg.rail_elements, BeamSupport::ClampedClamped).build()?;
    let carriage_beam = cfg
        .beam(cfg.carriage_length, cfg.carriage_elements, BeamSupport::Free)
        .build()?;
    let (lo, hi) = cfg.rail_span;
    if rail_beam.free_nodes_in(lo, hi, COORD_TOL).len() < 2 {
        return Err(ModelError::Config("rail span holds fewer than two nodes".into()));
    }

    let last = |b: &BeamStage| b.node_coordinates.len() - 1;
    let mut stages = vec![
        Stage {
            name: "x_stage",
            grid_nodes: grid_nodes(&rail_beam, lo, hi, cfg.n_v, "x_stage")?,
            beam: rail_beam,
            ext_input: None,
            ext_output: None,
        },
        Stage {
            name: "yz_stage",
            grid_nodes: grid_nodes(&carriage_beam, 0.0, cfg.carriage_length, cfg.n_v, "yz_stage")?,
            ext_input: (!cfg.top_stage).then_some(0),
            ext_output: (!cfg.top_stage).then_some(last(&carriage_beam)),
            beam: carriage_beam,
        },
    ];
    if cfg.top_stage {
        let top_beam = cfg.beam(cfg.top_length, cfg.top_elements, BeamSupport::Free).build()?;
        stages.push(Stage {
            name: "top_stage",
            grid_nodes: grid_nodes(&top_beam, 0.0, cfg.top_length, cfg.top_n_v, "top_stage")?,
            ext_input: Some(0),
            ext_output: Some(last(&top_beam)),
            beam: top_beam,
        });
    }
    let spans = [(lo, hi), (0.0, cfg.carriage_length), (0.0, cfg.top_length)];
    let all_nodes: Vec<Vec<usize>> = stages
        .iter()
        .zip(spans)
        .map(|(s, (a, b))| s.beam.free_nodes_in(a, b, COORD_TOL))
        .collect();

    let build = |use_all: bool| -> Result<CoupledModel, ModelError> {
        let nodes = |j: usize| {
            if use_all {
                &all_nodes[j]
            } else {
                &stages[j].grid_nodes
            }
        };
        let mut systems = Vec::new();
        for (j, s) in stages.iter().enumerate() {
            systems.push(Subsystem::from(s.system(nodes(j), cfg.zeta)?));
        }
        let mut interfaces = vec![InterfaceSpec {
            id: "x_yz".into(),
            axis: "x".into(),
            side_j: stages[1].side(1, nodes(1)),
            side_ell: stages[0].side(0, nodes(0)),
            springs: springs(cfg.spring_stiffness, &cfg.carriage_anchors, &cfg.rail_anchors),
            anchoring: Anchoring::FixedToJ,
        }];
        if cfg.top_stage {
            interfaces.push(InterfaceSpec {
                id: "yz_top".into(),
                axis: "y".into(),
                side_j: stages[2].side(2, nodes(2)),
                side_ell: stages[1].side(1, nodes(1)),
                springs: springs(cfg.spring_stiffness, &cfg.top_anchors, &cfg.top_base_anchors),
                anchoring: Anchoring::FixedToJ,
            });
        }
        let top = stages.len() - 1;
        let n_grid = nodes(top).len();
        Ok(CoupledModel::new(
            stages.iter().map(|s| s.name.to_string()).collect(),
            systems,
            interfaces,
            vec![ExternalPort {
                label: "force".into(),
                subsystem: top,
                port: n_grid,
            }],
            vec![ExternalPort {
                label: "displacement".into(),
                subsystem: top,
                port: n_grid,
            }],
        )?)
    };

    Ok(TwoStageBench {
        config: cfg.clone(),
        model: build(false)?,
        static_model: build(true)?,
    })
}
