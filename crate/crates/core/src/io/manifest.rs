//! JSON model manifest: subsystems backed by Matrix Market files, spring
//! interfaces referencing ports by label, and the external port selection.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::mtx::{read_matrix_market, write_matrix_market};
use super::{write_atomic, IoError};
use crate::interconnect::{
    Anchoring, CoupledModel, ExternalPort, InterfaceSide, InterfaceSpec, OperatingPoint, SpringSpec, Subsystem,
    VirtualPoint,
};
use crate::lti::{
    build_modal_damping, lin_space, log_space, DescriptorStateSpace, FrequencySpacing, InputPort, OutputPort,
    SecondOrderSystem,
};
use crate::models::make_operating_grid;
use crate::sparse::SparseMatrix;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelManifest {
    pub schema_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    pub subsystems: Vec<SubsystemEntry>,
    #[serde(default)]
    pub interfaces: Vec<InterfaceEntry>,
    pub external_inputs: Vec<ExternalEntry>,
    pub external_outputs: Vec<ExternalEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frequency: Option<FrequencySpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub operating_points: Option<OperatingPointSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubsystemEntry {
    pub name: String,
    #[serde(flatten)]
    pub model: SubsystemModel,
}

/// Matrix paths are relative to the manifest's directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SubsystemModel {
    SecondOrder {
        mass: PathBuf,
        stiffness: PathBuf,
        #[serde(default)]
        damping: DampingSpec,
        inputs: Vec<InputPort>,
        outputs: Vec<OutputPort>,
    },
    StateSpace {
        /// Identity when absent.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        e: Option<PathBuf>,
        a: PathBuf,
        b: PathBuf,
        c: PathBuf,
        /// Zero when absent.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        d: Option<PathBuf>,
        input_labels: Vec<String>,
        output_labels: Vec<String>,
    },
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum DampingSpec {
    #[default]
    None,
    File {
        path: PathBuf,
    },
    /// Modal damping with one ratio for every elastic mode.
    Modal {
        zeta: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InterfaceEntry {
    pub id: String,
    pub axis: String,
    #[serde(default)]
    pub anchoring: Anchoring,
    pub side_j: SideEntry,
    pub side_ell: SideEntry,
    pub springs: Vec<SpringSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SideEntry {
    pub subsystem: String,
    pub direction: String,
    pub points: Vec<PointEntry>,
}

/// A virtual point: input and output port labels at a coordinate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointEntry {
    pub coordinate: f64,
    pub input: String,
    pub output: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExternalEntry {
    pub label: String,
    pub subsystem: String,
    pub port: String,
    /// Allows routing a port that is also an interface virtual point.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub dual: bool,
}

/// Frequency grid in Hz.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrequencySpec {
    pub min_hz: f64,
    pub max_hz: f64,
    pub count: usize,
    pub spacing: FrequencySpacing,
}

impl FrequencySpec {
    /// Parses `min:max:count[:log|lin]` (Hz, log spacing by default).
    pub fn parse(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        if !(3..=4).contains(&parts.len()) {
            return Err(format!("frequency spec '{s}' is not min:max:count[:log|lin]"));
        }
        let num = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("'{t}': {e}"));
        let spacing = match parts.get(3).map(|t| t.trim()) {
            None | Some("log") => FrequencySpacing::Log,
            Some("lin") => FrequencySpacing::Lin,
            Some(other) => return Err(format!("unknown spacing '{other}' (log or lin)")),
        };
        let spec = Self {
            min_hz: num(parts[0])?,
            max_hz: num(parts[1])?,
            count: parts[2].trim().parse().map_err(|e| format!("'{}': {e}", parts[2]))?,
            spacing,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), String> {
        let lower_ok = match self.spacing {
            FrequencySpacing::Log => self.min_hz > 0.0,
            FrequencySpacing::Lin => self.min_hz >= 0.0,
        };
        if !(lower_ok && self.max_hz.is_finite() && self.max_hz > self.min_hz && self.count >= 2) {
            return Err(format!(
                "frequency grid {}..{} Hz with {} points is invalid",
                self.min_hz, self.max_hz, self.count
            ));
        }
        Ok(())
    }

    /// Angular frequencies (rad/s).
    pub fn omegas(&self) -> Vec<f64> {
        let tau = 2.0 * std::f64::consts::PI;
        let (a, b) = (tau * self.min_hz, tau * self.max_hz);
        match self.spacing {
            FrequencySpacing::Log => log_space(a, b, self.count),
            FrequencySpacing::Lin => lin_space(a, b, self.count),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum OperatingPointSpec {
    /// Explicit offsets, one vector per point.
    List { points: Vec<Vec<f64>> },
    /// Cartesian grid, first interface varying slowest.
    Grid { ranges: Vec<(f64, f64)>, counts: Vec<usize> },
}

impl OperatingPointSpec {
    pub fn points(&self) -> Result<Vec<OperatingPoint>, String> {
        match self {
            OperatingPointSpec::List { points } => Ok(points.iter().map(|p| OperatingPoint::new(p.clone())).collect()),
            OperatingPointSpec::Grid { ranges, counts } => {
                make_operating_grid(ranges, counts).map_err(|e| e.to_string())
            }
        }
    }
}

/// A validated manifest with its model built.
#[derive(Clone, Debug)]
pub struct LoadedManifest {
    pub manifest: ModelManifest,
    pub base_dir: PathBuf,
    pub model: CoupledModel,
}

fn read_json(path: &Path) -> Result<ModelManifest, IoError> {
    let text = std::fs::read_to_string(path).map_err(|source| IoError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|e| IoError::Json {
        path: path.to_path_buf(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })
}

/// Loads and validates a manifest and builds its model. Validation does not
/// stop at the first problem: every error found is reported.
pub fn load_manifest(path: &Path) -> Result<LoadedManifest, IoError> {
    let manifest = read_json(path)?;
    let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let model = build_model(&manifest, &base_dir).map_err(|errors| IoError::Validation {
        path: path.to_path_buf(),
        errors,
    })?;
    Ok(LoadedManifest {
        manifest,
        base_dir,
        model,
    })
}

pub fn save_manifest(path: &Path, manifest: &ModelManifest) -> Result<(), IoError> {
    let mut text = serde_json::to_string_pretty(manifest).expect("manifest serializes");
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

struct Ports {
    inputs: Vec<String>,
    outputs: Vec<String>,
}

impl Ports {
    fn input(&self, label: &str) -> Option<usize> {
        self.inputs.iter().position(|l| l == label)
    }

    fn output(&self, label: &str) -> Option<usize> {
        self.outputs.iter().position(|l| l == label)
    }
}

fn load_matrix(base: &Path, rel: &Path, errors: &mut Vec<String>) -> Option<SparseMatrix> {
    let path = base.join(rel);
    if !path.is_file() {
        errors.push(format!("matrix file {} does not exist", path.display()));
        return None;
    }
    match read_matrix_market(&path) {
        Ok(m) => Some(m),
        Err(e) => {
            errors.push(e.to_string());
            None
        }
    }
}

fn load_subsystem(entry: &SubsystemEntry, base: &Path, errors: &mut Vec<String>) -> Option<Subsystem> {
    let ctx = |e: &dyn std::fmt::Display| format!("subsystem '{}': {e}", entry.name);
    match &entry.model {
        SubsystemModel::SecondOrder {
            mass,
            stiffness,
            damping,
            inputs,
            outputs,
        } => {
            let m = load_matrix(base, mass, errors);
            let k = load_matrix(base, stiffness, errors);
            let d = match damping {
                DampingSpec::File { path } => load_matrix(base, path, errors).map(Some),
                _ => Some(None),
            };
            let (m, k, d) = (m?, k?, d?);
            let d = match (damping, d) {
                (_, Some(d)) => d,
                (DampingSpec::Modal { zeta }, None) => match build_modal_damping(&m, &k, *zeta) {
                    Ok(d) => d,
                    Err(e) => {
                        errors.push(ctx(&e));
                        return None;
                    }
                },
                _ => SparseMatrix::zeros(m.nrows(), m.ncols()),
            };
            match SecondOrderSystem::new(m, d, k, inputs.clone(), outputs.clone()) {
                Ok(s) => Some(s.into()),
                Err(e) => {
                    errors.push(ctx(&e));
                    None
                }
            }
        }
        SubsystemModel::StateSpace {
            e,
            a,
            b,
            c,
            d,
            input_labels,
            output_labels,
        } => {
            let ma = load_matrix(base, a, errors);
            let mb = load_matrix(base, b, errors);
            let mc = load_matrix(base, c, errors);
            let me = e.as_ref().map(|p| load_matrix(base, p, errors));
            let md = d.as_ref().map(|p| load_matrix(base, p, errors));
            let (ma, mb, mc) = (ma?.to_dense(), mb?.to_dense(), mc?.to_dense());
            let n = ma.nrows();
            let me = match me {
                Some(m) => m?.to_dense(),
                None => DMatrix::identity(n, n),
            };
            let md = match md {
                Some(m) => m?.to_dense(),
                None => DMatrix::zeros(mc.nrows(), mb.ncols()),
            };
            match DescriptorStateSpace::new(me, ma, mb, mc, md, input_labels.clone(), output_labels.clone()) {
                Ok(ss) => Some(ss.into()),
                Err(e) => {
                    errors.push(ctx(&e));
                    None
                }
            }
        }
    }
}

fn port_labels(entry: &SubsystemEntry) -> Ports {
    match &entry.model {
        SubsystemModel::SecondOrder { inputs, outputs, .. } => Ports {
            inputs: inputs.iter().map(|p| p.label.clone()).collect(),
            outputs: outputs.iter().map(|p| p.label.clone()).collect(),
        },
        SubsystemModel::StateSpace {
            input_labels,
            output_labels,
            ..
        } => Ports {
            inputs: input_labels.clone(),
            outputs: output_labels.clone(),
        },
    }
}

fn build_model(manifest: &ModelManifest, base: &Path) -> Result<CoupledModel, Vec<String>> {
    let mut errors = Vec::new();
    if manifest.schema_version != SCHEMA_VERSION {
        errors.push(format!(
            "schema_version {} is not supported (expected {SCHEMA_VERSION})",
            manifest.schema_version
        ));
    }
    if manifest.subsystems.is_empty() {
        errors.push("manifest declares no subsystems".into());
    }
    let mut seen = HashSet::new();
    for s in &manifest.subsystems {
        if !seen.insert(&s.name) {
            errors.push(format!("duplicate subsystem name '{}'", s.name));
        }
    }
    let index = |name: &str| manifest.subsystems.iter().position(|s| s.name == name);
    let ports: Vec<Ports> = manifest.subsystems.iter().map(port_labels).collect();
    let subsystems: Vec<Option<Subsystem>> = manifest
        .subsystems
        .iter()
        .map(|s| load_subsystem(s, base, &mut errors))
        .collect();

    let mut internal: HashSet<(usize, bool, String)> = HashSet::new();
    let mut interfaces = Vec::new();
    for iface in &manifest.interfaces {
        let mut side = |which: &str, s: &SideEntry, errors: &mut Vec<String>| -> Option<InterfaceSide> {
            let ctx = format!("interface '{}' side {which}", iface.id);
            let Some(sub) = index(&s.subsystem) else {
                errors.push(format!("{ctx}: unknown subsystem '{}'", s.subsystem));
                return None;
            };
            if s.points.len() < 2 {
                errors.push(format!("{ctx}: needs at least two virtual points"));
            }
            let increasing = s.points.iter().all(|p| p.coordinate.is_finite())
                && s.points.windows(2).all(|w| w[0].coordinate < w[1].coordinate);
            if !increasing {
                errors.push(format!("{ctx}: coordinates must be finite and strictly increasing"));
            }
            let mut points = Vec::new();
            for p in &s.points {
                let input = ports[sub].input(&p.input);
                let output = ports[sub].output(&p.output);
                if input.is_none() {
                    errors.push(format!("{ctx}: '{}' has no input port '{}'", s.subsystem, p.input));
                }
                if output.is_none() {
                    errors.push(format!("{ctx}: '{}' has no output port '{}'", s.subsystem, p.output));
                }
                internal.insert((sub, true, p.input.clone()));
                internal.insert((sub, false, p.output.clone()));
                if let (Some(input), Some(output)) = (input, output) {
                    points.push(VirtualPoint {
                        input,
                        output,
                        coordinate: p.coordinate,
                    });
                }
            }
            (points.len() == s.points.len()).then(|| InterfaceSide {
                subsystem: sub,
                direction: s.direction.clone(),
                points,
            })
        };
        let j = side("j", &iface.side_j, &mut errors);
        let ell = side("ℓ", &iface.side_ell, &mut errors);
        if iface.side_j.direction != iface.side_ell.direction {
            errors.push(format!(
                "interface '{}': direction '{}' on side j does not match '{}' on side ℓ",
                iface.id, iface.side_j.direction, iface.side_ell.direction
            ));
        }
        for (k, s) in iface.springs.iter().enumerate() {
            if !(s.stiffness > 0.0 && s.stiffness.is_finite()) {
                errors.push(format!("interface '{}' spring {k}: stiffness must be positive", iface.id));
            }
        }
        if let (Some(side_j), Some(side_ell)) = (j, ell) {
            interfaces.push(InterfaceSpec {
                id: iface.id.clone(),
                axis: iface.axis.clone(),
                side_j,
                side_ell,
                springs: iface.springs.clone(),
                anchoring: iface.anchoring,
            });
        }
    }

    let externals = |entries: &[ExternalEntry], input: bool, errors: &mut Vec<String>| {
        let kind = if input { "input" } else { "output" };
        let mut out = Vec::new();
        let mut labels = HashSet::new();
        for e in entries {
            if !labels.insert(&e.label) {
                errors.push(format!("duplicate external {kind} label '{}'", e.label));
            }
            let Some(sub) = index(&e.subsystem) else {
                errors.push(format!("external {kind} '{}': unknown subsystem '{}'", e.label, e.subsystem));
                continue;
            };
            let port = if input {
                ports[sub].input(&e.port)
            } else {
                ports[sub].output(&e.port)
            };
            let Some(port) = port else {
                errors.push(format!(
                    "external {kind} '{}': '{}' has no {kind} port '{}'",
                    e.label, e.subsystem, e.port
                ));
                continue;
            };
            if internal.contains(&(sub, input, e.port.clone())) && !e.dual {
                errors.push(format!(
                    "external {kind} '{}': port '{}' of '{}' is an interface virtual point; set \"dual\": true to route it anyway",
                    e.label, e.port, e.subsystem
                ));
            }
            out.push(ExternalPort {
                label: e.label.clone(),
                subsystem: sub,
                port,
            });
        }
        out
    };
    let ext_in = externals(&manifest.external_inputs, true, &mut errors);
    let ext_out = externals(&manifest.external_outputs, false, &mut errors);

    if let Some(f) = &manifest.frequency {
        if let Err(e) = f.validate() {
            errors.push(e);
        }
    }
    if let Some(ops) = &manifest.operating_points {
        match ops.points() {
            Ok(points) => {
                for (k, p) in points.iter().enumerate() {
                    if p.offsets.len() != manifest.interfaces.len() {
                        errors.push(format!(
                            "operating point {k} has {} offsets for {} interfaces",
                            p.offsets.len(),
                            manifest.interfaces.len()
                        ));
                    }
                }
            }
            Err(e) => errors.push(format!("operating points: {e}")),
        }
    }

    if !errors.is_empty() {
        return Err(errors);
    }
    let subsystems = subsystems.into_iter().map(|s| s.expect("no errors recorded")).collect();
    let names = manifest.subsystems.iter().map(|s| s.name.clone()).collect();
    CoupledModel::new(names, subsystems, interfaces, ext_in, ext_out).map_err(|e| vec![e.to_string()])
}

/// Writes every subsystem's matrices under `dir` and returns a manifest
/// describing `model` with paths relative to `dir`.
///
/// `damping` holds one entry per subsystem: `Some(ζ)` records a modal
/// damping recipe instead of writing the damping matrix.
pub fn export_model(model: &CoupledModel, dir: &Path, damping: &[Option<f64>]) -> Result<ModelManifest, IoError> {
    let mut subsystems = Vec::new();
    for (j, (name, sub)) in model.names().iter().zip(model.subsystems()).enumerate() {
        let rel = |file: &str| PathBuf::from(name).join(file);
        let write = |file: &str, m: &SparseMatrix| write_matrix_market(&dir.join(rel(file)), m);
        let entry = match sub {
            Subsystem::SecondOrder(s) => {
                write("M.mtx", s.mass())?;
                write("K.mtx", s.stiffness())?;
                let damping = match damping.get(j).copied().flatten() {
                    Some(zeta) => DampingSpec::Modal { zeta },
                    None if s.damping().nnz() == 0 => DampingSpec::None,
                    None => {
                        write("D.mtx", s.damping())?;
                        DampingSpec::File { path: rel("D.mtx") }
                    }
                };
                SubsystemModel::SecondOrder {
                    mass: rel("M.mtx"),
                    stiffness: rel("K.mtx"),
                    damping,
                    inputs: s.inputs().to_vec(),
                    outputs: s.outputs().to_vec(),
                }
            }
            Subsystem::StateSpace(ss) => {
                let dense = |file: &str, m: &DMatrix<f64>| write(file, &SparseMatrix::from_dense(m, 0.0));
                dense("E.mtx", ss.e())?;
                dense("A.mtx", ss.a())?;
                dense("B.mtx", ss.b())?;
                dense("C.mtx", ss.c())?;
                dense("D.mtx", ss.d())?;
                SubsystemModel::StateSpace {
                    e: Some(rel("E.mtx")),
                    a: rel("A.mtx"),
                    b: rel("B.mtx"),
                    c: rel("C.mtx"),
                    d: Some(rel("D.mtx")),
                    input_labels: ss.input_labels().to_vec(),
                    output_labels: ss.output_labels().to_vec(),
                }
            }
        };
        subsystems.push(SubsystemEntry {
            name: name.clone(),
            model: entry,
        });
    }
    let labels: Vec<Ports> = model
        .subsystems()
        .iter()
        .map(|s| Ports {
            inputs: s.input_labels(),
            outputs: s.output_labels(),
        })
        .collect();
    let side = |s: &InterfaceSide| SideEntry {
        subsystem: model.names()[s.subsystem].clone(),
        direction: s.direction.clone(),
        points: s
            .points
            .iter()
            .map(|p| PointEntry {
                coordinate: p.coordinate,
                input: labels[s.subsystem].inputs[p.input].clone(),
                output: labels[s.subsystem].outputs[p.output].clone(),
            })
            .collect(),
    };
    let interfaces: Vec<InterfaceEntry> = model
        .interfaces()
        .iter()
        .map(|i| InterfaceEntry {
            id: i.id.clone(),
            axis: i.axis.clone(),
            anchoring: i.anchoring,
            side_j: side(&i.side_j),
            side_ell: side(&i.side_ell),
            springs: i.springs.clone(),
        })
        .collect();
    let is_internal = |sub: usize, input: bool, port: usize| {
        model.interfaces().iter().any(|i| {
            [&i.side_j, &i.side_ell].iter().any(|s| {
                s.subsystem == sub && s.points.iter().any(|p| if input { p.input == port } else { p.output == port })
            })
        })
    };
    let external = |p: &ExternalPort, input: bool| ExternalEntry {
        label: p.label.clone(),
        subsystem: model.names()[p.subsystem].clone(),
        port: if input {
            labels[p.subsystem].inputs[p.port].clone()
        } else {
            labels[p.subsystem].outputs[p.port].clone()
        },
        dual: is_internal(p.subsystem, input, p.port),
    };
    Ok(ModelManifest {
        schema_version: SCHEMA_VERSION,
        description: None,
        subsystems,
        interfaces,
        external_inputs: model.external_inputs().iter().map(|p| external(p, true)).collect(),
        external_outputs: model.external_outputs().iter().map(|p| external(p, false)).collect(),
        frequency: None,
        operating_points: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frequency_spec_parsing() {
        let f = FrequencySpec::parse("1:1000:50:log").unwrap();
        assert_eq!((f.min_hz, f.max_hz, f.count, f.spacing), (1.0, 1000.0, 50, FrequencySpacing::Log));
        assert_eq!(FrequencySpec::parse("0:10:11:lin").unwrap().spacing, FrequencySpacing::Lin);
        assert_eq!(FrequencySpec::parse("1:10:5").unwrap().spacing, FrequencySpacing::Log);
        assert!(FrequencySpec::parse("0:10:11:log").is_err());
        assert!(FrequencySpec::parse("5:1:10").is_err());
        assert!(FrequencySpec::parse("1:10").is_err());
        assert!(FrequencySpec::parse("1:10:5:cubic").is_err());
        let w = f.omegas();
        assert!((w[0] - 2.0 * std::f64::consts::PI).abs() < 1e-12);
    }

    #[test]
    fn operating_point_specs() {
        let grid = OperatingPointSpec::Grid {
            ranges: vec![(-0.02, 0.02)],
            counts: vec![3],
        };
        assert_eq!(grid.points().unwrap().len(), 3);
        let list = OperatingPointSpec::List {
            points: vec![vec![0.0], vec![0.1]],
        };
        assert_eq!(list.points().unwrap()[1].offsets, [0.1]);
    }

    #[test]
    fn damping_spec_json() {
        let d: DampingSpec = serde_json::from_str(r#"{"type": "modal", "zeta": 0.03}"#).unwrap();
        assert_eq!(d, DampingSpec::Modal { zeta: 0.03 });
        assert_eq!(DampingSpec::default(), DampingSpec::None);
    }
}
