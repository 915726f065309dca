use std::collections::HashMap;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{relative_error, ErrorReport, MorError, Reducer, ReductionMethod, DEFAULT_FLOOR, DEFAULT_THRESHOLD};
use crate::interconnect::{lft_assemble, CoupledModel, InterconnectionMatrix, OperatingPoint};
use crate::lti::FrfSweep;

/// Search configuration. `methods` holds one entry per subsystem in model
/// order; `None` keeps that subsystem at full order.
#[derive(Clone, Debug)]
pub struct SearchOptions {
    pub methods: Vec<Option<ReductionMethod>>,
    pub threshold: f64,
    pub floor: f64,
    /// `(output, input)` entries checked, all when `None`.
    pub entries: Option<Vec<(usize, usize)>>,
    /// Reference responses per operating point. Defaults to the full-order
    /// assembly; pass e.g. a finer model to also bound modeling error.
    pub reference: Option<Vec<FrfSweep>>,
    /// Upper bound on stage-2 repair steps.
    pub max_repairs: usize,
}

impl SearchOptions {
    pub fn new(methods: Vec<Option<ReductionMethod>>) -> Self {
        Self {
            methods,
            threshold: DEFAULT_THRESHOLD,
            floor: DEFAULT_FLOOR,
            entries: None,
            reference: None,
            max_repairs: 10_000,
        }
    }
}

/// Evidence that one level below the reported one is insufficient.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrderWitness {
    pub level: usize,
    pub order: usize,
    /// Index into the operating-point list.
    pub op: usize,
    pub error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubsystemOrder {
    pub name: String,
    pub method: Option<ReductionMethod>,
    /// Least passing level at each operating point, every other subsystem
    /// at full order.
    pub per_point_levels: Vec<usize>,
    /// Reduced order (states for BT, DOFs for CMS) at each operating point.
    pub per_point_orders: Vec<usize>,
    /// Level after stage 1: least level passing at all points in isolation.
    pub isolated_level: usize,
    /// Final level after the combined verification.
    pub level: usize,
    /// Final reduced order: states for BT, DOFs for CMS.
    pub order: usize,
    /// Final order in first-order states.
    pub states: usize,
    pub full_states: usize,
    /// `100 · (1 − states / full_states)`.
    pub reduction_percent: f64,
    /// Failure of `level − 1` with all other subsystems at their final
    /// levels; `None` at the smallest admissible level or without reduction.
    pub witness: Option<OrderWitness>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RepairStep {
    pub subsystem: usize,
    pub from_level: usize,
    pub to_level: usize,
    /// Combined error that triggered the step.
    pub combined_error: f64,
    /// Isolated error of the chosen subsystem at `from_level`.
    pub contribution: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SearchResult {
    pub orders: Vec<SubsystemOrder>,
    pub repairs: Vec<RepairStep>,
    /// Verification of the final combined orders at every point.
    pub report: ErrorReport,
    /// Closed-loop evaluations performed (one per point and candidate).
    pub evaluations: usize,
}

struct Level {
    order: usize,
    states: usize,
    frf: Arc<FrfSweep>,
}

struct Searcher<'a> {
    model: &'a CoupledModel,
    omegas: &'a [f64],
    opts: &'a SearchOptions,
    reducers: Vec<Option<Reducer>>,
    full: Vec<Arc<FrfSweep>>,
    interconnections: Vec<InterconnectionMatrix>,
    reference: Vec<FrfSweep>,
    cache: HashMap<(usize, usize), Level>,
    evaluations: usize,
}

impl<'a> Searcher<'a> {
    fn level(&mut self, sub: usize, level: usize) -> Result<&Level, MorError> {
        if !self.cache.contains_key(&(sub, level)) {
            let reducer = self.reducers[sub].as_ref().expect("only reduced subsystems have levels");
            let name = &self.model.names()[sub];
            let (reduced, basis) = reducer.reduce(level).map_err(|e| e.in_subsystem(name))?;
            let frf = reduced
                .frf(self.omegas)
                .map_err(|e| MorError::from(e).in_subsystem(name))?;
            self.cache.insert(
                (sub, level),
                Level {
                    order: basis.order,
                    states: basis.state_order(),
                    frf: Arc::new(frf),
                },
            );
        }
        Ok(&self.cache[&(sub, level)])
    }

    /// Per-point reports for the configuration `levels` (`None` = full order).
    fn evaluate(&mut self, levels: &[Option<usize>], ops: &[usize]) -> Result<Vec<ErrorReport>, MorError> {
        let mut sweeps = Vec::with_capacity(levels.len());
        for (sub, level) in levels.iter().enumerate() {
            sweeps.push(match level {
                Some(l) => self.level(sub, *l)?.frf.clone(),
                None => self.full[sub].clone(),
            });
        }
        let refs: Vec<&FrfSweep> = sweeps.iter().map(|s| s.as_ref()).collect();
        let gb = crate::interconnect::block_diag_sweeps(self.model.block(), &refs)?;
        self.evaluations += ops.len();
        let entries = self.opts.entries.as_deref();
        let floor = self.opts.floor;
        ops.par_iter()
            .map(|&op| {
                let gc = lft_assemble(&gb, &self.interconnections[op])?;
                relative_error(&self.reference[op], &gc, entries, floor)
            })
            .collect()
    }

    fn errors(&mut self, levels: &[Option<usize>], ops: &[usize]) -> Result<Vec<f64>, MorError> {
        Ok(self.evaluate(levels, ops)?.iter().map(|r| r.max_error()).collect())
    }

    fn isolated(&self, sub: usize, level: usize) -> Vec<Option<usize>> {
        let mut levels = vec![None; self.reducers.len()];
        levels[sub] = Some(level);
        levels
    }

    /// Least level of `sub` passing at `op` in isolation, by bisection.
    fn bisect(&mut self, sub: usize, op: usize) -> Result<usize, MorError> {
        let reducer = self.reducers[sub].as_ref().expect("reduced subsystem");
        let (mut lo, mut hi) = (reducer.min_level(), reducer.max_level());
        let threshold = self.opts.threshold;
        let hi_err = self.errors(&self.isolated(sub, hi), &[op])?[0];
        if !(hi_err < threshold) {
            return Err(MorError::ThresholdUnreachable {
                subsystem: self.model.names()[sub].clone(),
                error: hi_err,
                threshold,
            });
        }
        while lo < hi {
            let mid = lo + (hi - lo) / 2;
            if self.errors(&self.isolated(sub, mid), &[op])?[0] < threshold {
                hi = mid;
            } else {
                lo = mid + 1;
            }
        }
        Ok(lo)
    }
}

fn worst(errors: &[f64]) -> (usize, f64) {
    errors
        .iter()
        .copied()
        .enumerate()
        .fold((0, 0.0), |acc, (i, e)| if e > acc.1 { (i, e) } else { acc })
}

/// Smallest per-subsystem orders whose reduced assembly keeps the relative
/// FRF error below the threshold at every operating point.
///
/// Stage 1 bisects each subsystem's level per operating point with all other
/// subsystems at full order; the isolated level is the least one passing at
/// all points. Stage 2 assembles all reduced subsystems together and, while
/// the combined model fails, raises the subsystem with the largest isolated
/// error by one step. Finally every subsystem is lowered again as long as
/// the combined model still passes, so `level − 1` fails for each one.
pub fn minimal_order_search(
    model: &CoupledModel,
    ops: &[OperatingPoint],
    omegas: &[f64],
    opts: &SearchOptions,
) -> Result<SearchResult, MorError> {
    let n = model.len();
    if opts.methods.len() != n {
        return Err(MorError::Config(format!(
            "{} reduction methods for {n} subsystems",
            opts.methods.len()
        )));
    }
    if ops.is_empty() {
        return Err(MorError::Config("no operating points".into()));
    }
    if !(opts.threshold > 0.0) {
        return Err(MorError::Config(format!("threshold {} must be positive", opts.threshold)));
    }

    let reducers = model
        .subsystems()
        .par_iter()
        .zip(model.names())
        .zip(&opts.methods)
        .map(|((sub, name), method)| {
            method
                .map(|m| Reducer::new(m, sub).map_err(|e| e.in_subsystem(name)))
                .transpose()
        })
        .collect::<Result<Vec<_>, _>>()?;
    let full: Vec<Arc<FrfSweep>> = model.subsystem_frfs(omegas)?.into_iter().map(Arc::new).collect();
    let interconnections = ops
        .iter()
        .map(|op| model.interconnection(model.posdep_k11(op)?))
        .collect::<Result<Vec<_>, _>>()?;

    let all_ops: Vec<usize> = (0..ops.len()).collect();
    let mut searcher = Searcher {
        model,
        omegas,
        opts,
        reducers,
        full,
        interconnections,
        reference: Vec::new(),
        cache: HashMap::new(),
        evaluations: 0,
    };
    searcher.reference = match &opts.reference {
        Some(r) if r.len() != ops.len() => {
            return Err(MorError::Config(format!(
                "{} reference responses for {} operating points",
                r.len(),
                ops.len()
            )))
        }
        Some(r) => r.clone(),
        None => {
            let refs: Vec<&FrfSweep> = searcher.full.iter().map(|s| s.as_ref()).collect();
            let gb = crate::interconnect::block_diag_sweeps(model.block(), &refs)?;
            searcher
                .interconnections
                .par_iter()
                .map(|k| lft_assemble(&gb, k))
                .collect::<Result<Vec<_>, _>>()?
        }
    };
    if opts.reference.is_some() {
        let (_, e) = worst(&searcher.errors(&vec![None; n], &all_ops)?);
        if !(e < opts.threshold) {
            return Err(MorError::ThresholdUnreachable {
                subsystem: "all subsystems".into(),
                error: e,
                threshold: opts.threshold,
            });
        }
    }

    // Stage 1
    let reduced: Vec<usize> = (0..n).filter(|&j| searcher.reducers[j].is_some()).collect();
    let mut per_point = vec![Vec::new(); n];
    let mut levels: Vec<Option<usize>> = vec![None; n];
    for &j in &reduced {
        for op in 0..ops.len() {
            per_point[j].push(searcher.bisect(j, op)?);
        }
        let mut level = *per_point[j].iter().max().expect("at least one point");
        let max_level = searcher.reducers[j].as_ref().map(|r| r.max_level()).unwrap_or(0);
        // Non-monotone error curves: the largest per-point level may still
        // fail elsewhere.
        while level < max_level && !(worst(&searcher.errors(&searcher.isolated(j, level), &all_ops)?).1 < opts.threshold) {
            level += 1;
        }
        levels[j] = Some(level);
    }
    let isolated_levels = levels.clone();

    // Stage 2
    let mut repairs = Vec::new();
    loop {
        let (_, combined) = worst(&searcher.errors(&levels, &all_ops)?);
        if combined < opts.threshold {
            break;
        }
        if repairs.len() >= opts.max_repairs {
            return Err(MorError::Config(format!(
                "combined model still fails after {} repair steps",
                opts.max_repairs
            )));
        }
        let mut best: Option<(usize, f64)> = None;
        for &j in &reduced {
            let level = levels[j].expect("reduced");
            if level >= searcher.reducers[j].as_ref().map(|r| r.max_level()).unwrap_or(0) {
                continue;
            }
            let (_, e) = worst(&searcher.errors(&searcher.isolated(j, level), &all_ops)?);
            if best.is_none_or(|(_, b)| e > b) {
                best = Some((j, e));
            }
        }
        let Some((j, contribution)) = best else {
            return Err(MorError::ThresholdUnreachable {
                subsystem: "all subsystems".into(),
                error: combined,
                threshold: opts.threshold,
            });
        };
        let from = levels[j].expect("reduced");
        levels[j] = Some(from + 1);
        repairs.push(RepairStep {
            subsystem: j,
            from_level: from,
            to_level: from + 1,
            combined_error: combined,
            contribution,
        });
    }

    // Descent and witnesses in the combined context.
    let mut witnesses: Vec<Option<OrderWitness>> = vec![None; n];
    for &j in &reduced {
        let min_level = searcher.reducers[j].as_ref().map(|r| r.min_level()).unwrap_or(0);
        loop {
            let level = levels[j].expect("reduced");
            if level <= min_level {
                break;
            }
            let mut trial = levels.clone();
            trial[j] = Some(level - 1);
            let (op, e) = worst(&searcher.errors(&trial, &all_ops)?);
            if e < opts.threshold {
                levels[j] = Some(level - 1);
                continue;
            }
            witnesses[j] = Some(OrderWitness {
                level: level - 1,
                order: searcher.level(j, level - 1)?.order,
                op,
                error: e,
            });
            break;
        }
    }
    // Lowering a later subsystem can only have relaxed earlier witnesses'
    // context upward, never below the threshold; re-check them.
    for &j in &reduced {
        if let Some(w) = &witnesses[j] {
            let mut trial = levels.clone();
            trial[j] = Some(w.level);
            let (op, e) = worst(&searcher.errors(&trial, &all_ops)?);
            witnesses[j] = Some(OrderWitness { op, error: e, ..w.clone() });
        }
    }

    let report = ErrorReport::combine(searcher.evaluate(&levels, &all_ops)?);
    let mut orders = Vec::with_capacity(n);
    for j in 0..n {
        let name = model.names()[j].clone();
        let full_states = model.subsystems()[j].n_states();
        let (level, order, states, per_point_orders) = match levels[j] {
            Some(l) => {
                let lv = searcher.level(j, l)?;
                let (order, states) = (lv.order, lv.states);
                let mut ppo = Vec::new();
                for &p in &per_point[j] {
                    ppo.push(searcher.level(j, p)?.order);
                }
                (l, order, states, ppo)
            }
            None => (0, full_states, full_states, Vec::new()),
        };
        orders.push(SubsystemOrder {
            name,
            method: opts.methods[j],
            per_point_levels: per_point[j].clone(),
            per_point_orders,
            isolated_level: isolated_levels[j].unwrap_or(0),
            level,
            order,
            states,
            full_states,
            reduction_percent: 100.0 * (1.0 - states as f64 / full_states as f64),
            witness: witnesses[j].clone(),
        });
    }
    Ok(SearchResult {
        orders,
        repairs,
        report,
        evaluations: searcher.evaluations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interconnect::{Anchoring, ExternalPort, InterfaceSide, InterfaceSpec, SpringSpec, VirtualPoint};
    use crate::lti::log_space;
    use crate::models::{make_chain, ChainBoundary, ChainParams};

    fn side(sub: usize, n: usize) -> InterfaceSide {
        InterfaceSide {
            subsystem: sub,
            direction: "x".into(),
            points: (0..n)
                .map(|k| VirtualPoint {
                    input: k,
                    output: k,
                    coordinate: k as f64,
                })
                .collect(),
        }
    }

    fn pair() -> CoupledModel {
        let p = ChainParams {
            mass: 1.0,
            stiffness: 40.0,
            damping: 0.4,
        };
        let a = make_chain(12, p, ChainBoundary::FixedFree, &[6, 9, 11]).unwrap();
        let b = make_chain(8, p, ChainBoundary::FixedFree, &[3, 7]).unwrap();
        let iface = InterfaceSpec {
            id: "ab".into(),
            axis: "x".into(),
            side_j: side(0, 3),
            side_ell: side(1, 2),
            springs: vec![SpringSpec {
                stiffness: 15.0,
                anchor_j: 1.0,
                anchor_ell_base: 0.5,
            }],
            anchoring: Anchoring::FixedToJ,
        };
        CoupledModel::new(
            vec!["a".into(), "b".into()],
            vec![a.into(), b.into()],
            vec![iface],
            vec![ExternalPort {
                label: "u".into(),
                subsystem: 1,
                port: 1,
            }],
            vec![ExternalPort {
                label: "y".into(),
                subsystem: 0,
                port: 2,
            }],
        )
        .unwrap()
    }

    fn ops() -> Vec<OperatingPoint> {
        [-0.3, 0.0, 0.4].map(|d| OperatingPoint::new(vec![d])).to_vec()
    }

    #[test]
    fn infinite_threshold_gives_minimum_sizes() {
        let model = pair();
        let mut opts = SearchOptions::new(vec![Some(ReductionMethod::Cb), Some(ReductionMethod::Bt)]);
        opts.threshold = f64::INFINITY;
        let res = minimal_order_search(&model, &ops(), &log_space(0.05, 10.0, 80), &opts).unwrap();
        assert_eq!(res.orders[0].order, 3);
        assert_eq!(res.orders[1].order, 1);
        assert!(res.orders.iter().all(|o| o.witness.is_none()));
    }

    #[test]
    fn found_orders_pass_and_have_witnesses() {
        let model = pair();
        let w = log_space(0.05, 10.0, 120);
        let opts = SearchOptions::new(vec![Some(ReductionMethod::Cb), Some(ReductionMethod::Hh)]);
        let res = minimal_order_search(&model, &ops(), &w, &opts).unwrap();
        assert!(res.report.passes(0.1));
        assert_eq!(res.report.entries.len(), 3);
        for o in &res.orders {
            assert_eq!(o.per_point_levels.len(), 3);
            if o.level > 0 {
                let wit = o.witness.as_ref().unwrap();
                assert_eq!(wit.level, o.level - 1);
                assert!(wit.error >= 0.1);
            }
        }
    }

    #[test]
    fn single_subsystem_bt_matches_scan() {
        let model = pair();
        let w = log_space(0.05, 10.0, 100);
        let opts = SearchOptions::new(vec![None, Some(ReductionMethod::Bt)]);
        let op = [OperatingPoint::new(vec![0.2])];
        let res = minimal_order_search(&model, &op, &w, &opts).unwrap();
        let reducer = Reducer::new(ReductionMethod::Bt, &model.subsystems()[1]).unwrap();
        let full = model.assemble(&op[0], &w).unwrap();
        let scan = (reducer.min_level()..=reducer.max_level())
            .find(|&r| {
                let (sub, _) = reducer.reduce(r).unwrap();
                let red = model.replace(1, sub).unwrap().assemble(&op[0], &w).unwrap();
                relative_error(&full, &red, None, DEFAULT_FLOOR).unwrap().passes(0.1)
            })
            .unwrap();
        assert_eq!(res.orders[1].level, scan);
        assert_eq!(res.orders[0].states, res.orders[0].full_states);
    }

    #[test]
    fn orders_shrink_with_looser_threshold() {
        let model = pair();
        let w = log_space(0.05, 10.0, 100);
        let mut opts = SearchOptions::new(vec![Some(ReductionMethod::Cb), Some(ReductionMethod::Bt)]);
        opts.threshold = 0.05;
        let tight = minimal_order_search(&model, &ops(), &w, &opts).unwrap();
        opts.threshold = 0.2;
        let loose = minimal_order_search(&model, &ops(), &w, &opts).unwrap();
        for (t, l) in tight.orders.iter().zip(&loose.orders) {
            assert!(l.order <= t.order, "{} vs {}", l.order, t.order);
        }
    }

    #[test]
    fn unreachable_reference() {
        let model = pair();
        let w = log_space(0.05, 10.0, 40);
        let mut opts = SearchOptions::new(vec![Some(ReductionMethod::Cb), None]);
        let off = model.assemble(&OperatingPoint::new(vec![0.45]), &w).unwrap();
        opts.reference = Some(vec![off; 3]);
        let err = minimal_order_search(&model, &ops(), &w, &opts).unwrap_err();
        assert!(matches!(err, MorError::ThresholdUnreachable { .. }));
        assert!(err.is_numerical());
    }
}
