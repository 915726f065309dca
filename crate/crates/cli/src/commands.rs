use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use log::info;
use modlink::interconnect::{lft_assemble, CoupledModel, InterconnectError, OperatingPoint, Subsystem};
use modlink::io::manifest::DampingSpec;
use modlink::io::mtx::write_matrix_market;
use modlink::io::report::{
    write_basis, write_error_report_csv, write_final_orders_csv, write_json, write_per_point_orders_csv,
    write_sweep_csv,
};
use modlink::io::{
    export_model, load_manifest, save_manifest, FrequencySpec, FrfCache, IoError, LoadedManifest, ModelManifest,
    OperatingPointSpec,
};
use modlink::lti::{FrequencySpacing, FrfSweep, LtiError};
use modlink::models::{make_two_stage_bench, ModelError, StageModelConfig};
use modlink::mor::{
    minimal_order_search, refine_around_resonances, relative_error, ErrorReport, MorError, Reducer,
    ReductionBasis, ReductionMethod, SearchOptions, SearchResult,
};
use serde_json::json;

use crate::args::{parse_entries, parse_methods, parse_orders, resolve_freq, resolve_ops};
use crate::{AssembleArgs, CompareArgs, GenArgs, ModelArgs, ReduceArgs, SearchArgs, SweepArgs};

/// A run that completed but whose result fails its accuracy requirement.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct NumericalFailure(String);

/// 2 for numerical failures, 1 for everything else.
pub fn exit_code(e: &anyhow::Error) -> u8 {
    for cause in e.chain() {
        let numerical = if cause.is::<NumericalFailure>() {
            Some(true)
        } else if let Some(x) = cause.downcast_ref::<modlink::Error>() {
            Some(x.is_numerical())
        } else if let Some(x) = cause.downcast_ref::<MorError>() {
            Some(x.is_numerical())
        } else if let Some(x) = cause.downcast_ref::<InterconnectError>() {
            Some(x.is_numerical())
        } else if let Some(x) = cause.downcast_ref::<LtiError>() {
            Some(x.is_numerical())
        } else if cause.is::<IoError>() || cause.is::<ModelError>() {
            Some(false)
        } else {
            None
        };
        if let Some(n) = numerical {
            return if n { 2 } else { 1 };
        }
    }
    1
}

fn load(path: &Path) -> Result<LoadedManifest> {
    Ok(load_manifest(path)?)
}

/// Closed-loop FRFs at every point from one set of subsystem FRFs.
fn closed_loop(
    model: &CoupledModel,
    ops: &[OperatingPoint],
    omegas: &[f64],
    cache: Option<&FrfCache>,
) -> Result<Vec<FrfSweep>> {
    if let Some(cache) = cache {
        return Ok(cache.assemble(model, ops, omegas)?);
    }
    let gb = model.block_frf(&model.subsystem_frfs(omegas)?)?;
    ops.iter()
        .enumerate()
        .map(|(k, op)| {
            let k11 = model.posdep_k11(op).with_context(|| format!("operating point {k}"))?;
            lft_assemble(&gb, &model.interconnection(k11)?).with_context(|| format!("operating point {k}"))
        })
        .collect()
}

struct Setup {
    loaded: LoadedManifest,
    ops: Vec<OperatingPoint>,
    freq: FrequencySpec,
}

fn setup(a: &ModelArgs) -> Result<Setup> {
    let loaded = load(&a.manifest)?;
    let ops = resolve_ops(a.ops.as_deref(), &loaded)?;
    let freq = resolve_freq(a.freq.as_deref(), &loaded)?;
    Ok(Setup { loaded, ops, freq })
}

fn offsets(ops: &[OperatingPoint]) -> Vec<&[f64]> {
    ops.iter().map(|o| o.offsets.as_slice()).collect()
}

pub fn gen(a: GenArgs) -> Result<()> {
    let defaults = StageModelConfig::default();
    let cfg = StageModelConfig {
        top_stage: a.top_stage,
        n_v: a.n_v,
        top_n_v: a.top_n_v,
        stiffness_scale: a.stiffness_scale,
        spring_stiffness: a.spring_stiffness.unwrap_or(defaults.spring_stiffness),
        zeta: a.zeta.unwrap_or(defaults.zeta),
        ..defaults
    };
    let bench = make_two_stage_bench(&cfg)?;
    let model = if a.static_model { &bench.static_model } else { &bench.model };
    let mut manifest = export_model(model, &a.out, &vec![Some(cfg.zeta); model.len()])?;
    manifest.description = Some(format!(
        "{} stage bench{}, {} virtual points per base-interface side",
        model.len(),
        if a.static_model { " (static reference)" } else { "" },
        cfg.n_v
    ));
    manifest.frequency = Some(FrequencySpec {
        min_hz: 1.0,
        max_hz: 2000.0,
        count: 400,
        spacing: FrequencySpacing::Log,
    });
    // Steps of one element length on the rail and the carriage, so the
    // static reference can be assembled at every point.
    let (mut ranges, mut counts) = (vec![(-0.1, 0.1)], vec![11]);
    if cfg.top_stage {
        ranges.push((-0.04, 0.04));
        counts.push(5);
    }
    manifest.operating_points = Some(OperatingPointSpec::Grid { ranges, counts });
    let path = a.out.join("manifest.json");
    save_manifest(&path, &manifest)?;
    println!("wrote {} ({} subsystems)", path.display(), model.len());
    Ok(())
}

pub fn assemble(a: AssembleArgs) -> Result<()> {
    let loaded = load(&a.model.manifest)?;
    let ops = resolve_ops(a.model.ops.as_deref(), &loaded)?;
    let model = &loaded.model;
    let mut files = Vec::new();
    for (k, op) in ops.iter().enumerate() {
        let k11 = model.posdep_k11(op).with_context(|| format!("operating point {k}"))?;
        let kc = model.interconnection(k11.clone())?;
        let name = format!("K11_op{k}.mtx");
        write_matrix_market(&a.out.join(&name), &k11)?;
        files.push(json!({ "op": k, "offsets": op.offsets, "k11": name, "nnz": k11.nnz() }));
        if k == 0 {
            println!(
                "block inputs m_b = {}, block outputs p_b = {}, external inputs m_c = {}, external outputs p_c = {}",
                kc.m_b(),
                kc.p_b(),
                kc.m_c(),
                kc.p_c()
            );
        }
    }
    let index = json!({
        "manifest": a.model.manifest,
        "subsystems": model.names(),
        "block_inputs": model.block().m_b(),
        "block_outputs": model.block().p_b(),
        "external_inputs": model.external_inputs().iter().map(|p| &p.label).collect::<Vec<_>>(),
        "external_outputs": model.external_outputs().iter().map(|p| &p.label).collect::<Vec<_>>(),
        "operating_points": files,
    });
    write_json(&a.out.join("assemble.json"), &index)?;
    println!("wrote {} coupling matrices to {}", ops.len(), a.out.display());
    Ok(())
}

pub fn sweep(a: SweepArgs) -> Result<()> {
    let s = setup(&a.model)?;
    let model = &s.loaded.model;
    let entries = parse_entries(a.entries.as_deref(), model)?;
    if let Some(f) = a.normalize {
        if !(f > 0.0 && f.is_finite()) {
            bail!("--normalize needs a positive reference frequency, got {f}");
        }
    }
    let cache = (!a.no_cache).then(|| FrfCache::new(a.cache.clone().unwrap_or_else(|| s.loaded.base_dir.join(".modlink-cache"))));
    let omegas = s.freq.omegas();
    let sweeps = closed_loop(model, &s.ops, &omegas, cache.as_ref())?;
    write_sweep_csv(&a.out.join("sweep.csv"), &sweeps, &entries, a.normalize)?;
    let stats = cache.as_ref().map(FrfCache::stats);
    let index = json!({
        "manifest": a.model.manifest,
        "csv": "sweep.csv",
        "frequency": s.freq,
        "n_frequencies": omegas.len(),
        "operating_points": offsets(&s.ops),
        "entries": entries.iter().map(|&(i, j)| json!({
            "output": model.external_outputs()[i].label,
            "input": model.external_inputs()[j].label,
        })).collect::<Vec<_>>(),
        "normalize_f_ref": a.normalize,
        "cache": stats,
    });
    write_json(&a.out.join("sweep.json"), &index)?;
    println!(
        "{} operating points x {} frequencies written to {}",
        s.ops.len(),
        omegas.len(),
        a.out.join("sweep.csv").display()
    );
    if let Some(st) = stats {
        println!(
            "subsystem FRFs: {} evaluated, {} cache hits, {} misses",
            st.evaluations, st.hits, st.misses
        );
    }
    Ok(())
}

/// Verification grid, optionally refined around the full model's peaks at
/// every operating point.
fn verification_omegas(s: &Setup, refine: bool) -> Result<Vec<f64>> {
    let base = s.freq.omegas();
    if !refine {
        return Ok(base);
    }
    let full = closed_loop(&s.loaded.model, &s.ops, &base, None)?;
    let mut all = base.clone();
    for sweep in &full {
        all.extend(refine_around_resonances(&base, sweep)?);
    }
    all.sort_by(f64::total_cmp);
    all.dedup();
    info!("refined grid: {} -> {} frequencies", base.len(), all.len());
    Ok(all)
}

fn run_search(s: &Setup, a: &crate::ReductionArgs, methods: Vec<Option<ReductionMethod>>, omegas: &[f64]) -> Result<SearchResult> {
    let model = &s.loaded.model;
    let mut opts = SearchOptions::new(methods);
    opts.threshold = a.threshold;
    opts.floor = a.floor;
    opts.entries = Some(parse_entries(a.entries.as_deref(), model)?);
    Ok(minimal_order_search(model, &s.ops, omegas, &opts)?)
}

/// Reduced subsystems at the given levels (`None` keeps the original).
fn reduce_all(
    model: &CoupledModel,
    choice: &[Option<(ReductionMethod, usize)>],
) -> Result<(Vec<Subsystem>, Vec<Option<ReductionBasis>>)> {
    let mut subs = Vec::new();
    let mut bases = Vec::new();
    for ((name, sub), c) in model.names().iter().zip(model.subsystems()).zip(choice) {
        match c {
            Some((method, level)) => {
                let (r, basis) = Reducer::new(*method, sub)
                    .and_then(|red| red.reduce(*level))
                    .with_context(|| format!("reducing '{name}'"))?;
                subs.push(r);
                bases.push(Some(basis));
            }
            None => {
                subs.push(sub.clone());
                bases.push(None);
            }
        }
    }
    Ok((subs, bases))
}

fn combined_report(
    model: &CoupledModel,
    reduced: &CoupledModel,
    ops: &[OperatingPoint],
    omegas: &[f64],
    entries: &[(usize, usize)],
    floor: f64,
) -> Result<ErrorReport> {
    let full = closed_loop(model, ops, omegas, None)?;
    let red = closed_loop(reduced, ops, omegas, None)?;
    let reports = full
        .iter()
        .zip(&red)
        .map(|(f, r)| relative_error(f, r, Some(entries), floor))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ErrorReport::combine(reports))
}

fn print_orders(result: &SearchResult) {
    println!(
        "{:<12} {:>6} {:>8} {:>8} {:>8} {:>8} {:>7}",
        "subsystem", "method", "n", "r", "states", "of", "red. %"
    );
    for o in &result.orders {
        let method = o.method.map(|m| m.name()).unwrap_or("full");
        let n = match o.method {
            Some(ReductionMethod::Cb | ReductionMethod::Hh) => o.full_states / 2,
            _ => o.full_states,
        };
        println!(
            "{:<12} {:>6} {:>8} {:>8} {:>8} {:>8} {:>7.1}",
            o.name, method, n, o.order, o.states, o.full_states, o.reduction_percent
        );
    }
}

fn report_files(out: &Path, stem: &str, report: &ErrorReport) -> Result<()> {
    write_error_report_csv(&out.join(format!("{stem}.csv")), report)?;
    write_json(&out.join(format!("{stem}.json")), report)?;
    Ok(())
}

pub fn search(a: SearchArgs) -> Result<()> {
    let s = setup(&a.model)?;
    let model = &s.loaded.model;
    let methods = parse_methods(&a.reduction.method, model)?;
    let omegas = verification_omegas(&s, a.reduction.refine)?;
    let result = run_search(&s, &a.reduction, methods, &omegas)?;
    print_orders(&result);

    // Independent re-verification from freshly reduced subsystems.
    let choice: Vec<_> = result.orders.iter().map(|o| o.method.map(|m| (m, o.level))).collect();
    let (subs, _) = reduce_all(model, &choice)?;
    let reduced = model.with_subsystems(subs)?;
    let entries = parse_entries(a.reduction.entries.as_deref(), model)?;
    let check = combined_report(model, &reduced, &s.ops, &omegas, &entries, a.reduction.floor)?;

    write_per_point_orders_csv(&a.out.join("per_point_orders.csv"), &result)?;
    write_final_orders_csv(&a.out.join("final_orders.csv"), &result)?;
    report_files(&a.out, "error_report", &check)?;
    write_json(
        &a.out.join("search.json"),
        &json!({
            "manifest": a.model.manifest,
            "threshold": a.reduction.threshold,
            "floor": a.reduction.floor,
            "n_frequencies": omegas.len(),
            "operating_points": offsets(&s.ops),
            "reduction_percent_definition": "100 * (1 - states / full_states), first-order states",
            "orders": result.orders,
            "repairs": result.repairs,
            "evaluations": result.evaluations,
            "verified_max_error": check.max_error(),
        }),
    )?;
    println!(
        "verified: max relative error {:.3e} over {} points and {} frequencies ({} closed-loop evaluations)",
        check.max_error(),
        s.ops.len(),
        omegas.len(),
        result.evaluations
    );
    if !check.passes(a.reduction.threshold) {
        return Err(NumericalFailure(format!(
            "re-verification failed: {:.3e} is not below {}",
            check.max_error(),
            a.reduction.threshold
        ))
        .into());
    }
    Ok(())
}

/// Least level whose native order reaches `order`.
fn level_for_order(reducer: &Reducer, order: usize) -> Result<usize> {
    let (mut lo, mut hi) = (reducer.min_level(), reducer.max_level());
    let order_at = |l: usize| reducer.reduce(l).map(|(_, b)| b.order);
    if order_at(hi)? < order {
        bail!("order {order} exceeds the full order {}", order_at(hi)?);
    }
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if order_at(mid)? >= order {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    let got = order_at(lo)?;
    if got != order {
        bail!("no {} level gives order {order}; nearest is {got}", reducer.method());
    }
    Ok(lo)
}

pub fn reduce(a: ReduceArgs) -> Result<()> {
    let s = setup(&a.model)?;
    let model = &s.loaded.model;
    let methods = parse_methods(&a.reduction.method, model)?;
    let orders = parse_orders(&a.order, model)?;
    let mut choice: Vec<Option<(ReductionMethod, usize)>> = vec![None; model.len()];
    let mut open = vec![None; model.len()];
    for j in 0..model.len() {
        match (methods[j], orders[j]) {
            (Some(m), Some(order)) => {
                let reducer = Reducer::new(m, &model.subsystems()[j])
                    .with_context(|| format!("subsystem '{}'", model.names()[j]))?;
                choice[j] = Some((m, level_for_order(&reducer, order)?));
            }
            (Some(m), None) => open[j] = Some(m),
            (None, Some(_)) => bail!("--order given for '{}' but its method is full", model.names()[j]),
            (None, None) => {}
        }
    }
    let omegas = verification_omegas(&s, a.reduction.refine)?;
    if open.iter().any(Option::is_some) {
        let result = run_search(&s, &a.reduction, open.clone(), &omegas)?;
        for (j, o) in result.orders.iter().enumerate() {
            if let Some(m) = open[j] {
                choice[j] = Some((m, o.level));
            }
        }
    }
    let (subs, bases) = reduce_all(model, &choice)?;
    let reduced = model.with_subsystems(subs)?;

    let recipes: Vec<Option<f64>> = s
        .loaded
        .manifest
        .subsystems
        .iter()
        .zip(&choice)
        .map(|(e, c)| match (&e.model, c) {
            (modlink::io::manifest::SubsystemModel::SecondOrder { damping: DampingSpec::Modal { zeta }, .. }, None) => {
                Some(*zeta)
            }
            _ => None,
        })
        .collect();
    let mut manifest: ModelManifest = export_model(&reduced, &a.out, &recipes)?;
    manifest.description = Some(format!("reduced from {}", a.model.manifest.display()));
    manifest.frequency = Some(s.freq);
    manifest.operating_points = Some(match &s.loaded.manifest.operating_points {
        Some(spec) if a.model.ops.is_none() => spec.clone(),
        _ => OperatingPointSpec::List {
            points: s.ops.iter().map(|o| o.offsets.clone()).collect(),
        },
    });
    save_manifest(&a.out.join("manifest.json"), &manifest)?;

    let mut summary = Vec::new();
    for ((name, basis), c) in model.names().iter().zip(&bases).zip(&choice) {
        if let (Some(basis), Some((m, level))) = (basis, c) {
            let sidecar = write_basis(&a.out.join("bases"), name, basis)?;
            println!(
                "{name}: {m} order {} ({} states), basis {}",
                basis.order,
                basis.state_order(),
                sidecar.display()
            );
            summary.push(json!({ "subsystem": name, "method": m, "level": level, "order": basis.order, "states": basis.state_order() }));
        }
    }
    let entries = parse_entries(a.reduction.entries.as_deref(), model)?;
    let check = combined_report(model, &reduced, &s.ops, &omegas, &entries, a.reduction.floor)?;
    report_files(&a.out, "error_report", &check)?;
    write_json(
        &a.out.join("reduce.json"),
        &json!({ "source": a.model.manifest, "reduced": summary, "max_error": check.max_error() }),
    )?;
    println!("max relative error of the reduced model: {:.3e}", check.max_error());
    if !check.passes(a.reduction.threshold) {
        log::warn!(
            "reduced model exceeds the threshold {} (fixed orders may be too small)",
            a.reduction.threshold
        );
    }
    Ok(())
}

pub fn compare(a: CompareArgs) -> Result<()> {
    let s = setup(&a.model)?;
    let other = load(&a.reduced)?;
    let (full, red) = (&s.loaded.model, &other.model);
    let labels = |m: &CoupledModel| {
        (
            m.external_inputs().iter().map(|p| p.label.clone()).collect::<Vec<_>>(),
            m.external_outputs().iter().map(|p| p.label.clone()).collect::<Vec<_>>(),
        )
    };
    if labels(full) != labels(red) {
        bail!("external ports of {} and {} differ", a.model.manifest.display(), a.reduced.display());
    }
    if full.interfaces().len() != red.interfaces().len() {
        return Err(anyhow!("models have different numbers of interfaces"));
    }
    let entries = parse_entries(a.entries.as_deref(), full)?;
    let omegas = s.freq.omegas();
    let report = combined_report(full, red, &s.ops, &omegas, &entries, a.floor)?;
    report_files(&a.out, "error_report", &report)?;
    match report.worst() {
        Some(w) => println!(
            "max relative error {:.3e} at op {}, {}/{}, {:.4} Hz",
            w.max_error,
            w.op,
            w.output_label,
            w.input_label,
            w.omega_at_max.unwrap_or(0.0) / (2.0 * std::f64::consts::PI)
        ),
        None => println!("no entries compared"),
    }
    if let Some(t) = a.threshold {
        if !report.passes(t) {
            return Err(NumericalFailure(format!("relative error {:.3e} is not below {t}", report.max_error())).into());
        }
    }
    Ok(())
}
