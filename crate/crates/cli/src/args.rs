//! Parsers for the option syntaxes shared by several commands.

use anyhow::{anyhow, bail, Context, Result};
use modlink::interconnect::{CoupledModel, OperatingPoint};
use modlink::io::{FrequencySpec, LoadedManifest};
use modlink::models::make_operating_grid;
use modlink::mor::ReductionMethod;

/// `--ops` value: `grid:lo:hi:n[,lo:hi:n...]` (one range per interface) or
/// explicit points `d1,d2;d1,d2;...`.
pub fn parse_ops(s: &str, n_interfaces: usize) -> Result<Vec<OperatingPoint>> {
    let ops = if let Some(rest) = s.strip_prefix("grid:") {
        let mut ranges = Vec::new();
        let mut counts = Vec::new();
        for part in rest.split(',') {
            let f: Vec<&str> = part.split(':').collect();
            if f.len() != 3 {
                bail!("grid range '{part}' is not lo:hi:n");
            }
            let lo: f64 = f[0].trim().parse().with_context(|| format!("'{}'", f[0]))?;
            let hi: f64 = f[1].trim().parse().with_context(|| format!("'{}'", f[1]))?;
            let n: usize = f[2].trim().parse().with_context(|| format!("'{}'", f[2]))?;
            ranges.push((lo, hi));
            counts.push(n);
        }
        make_operating_grid(&ranges, &counts)?
    } else {
        s.split(';')
            .filter(|p| !p.trim().is_empty())
            .map(|p| {
                p.split(',')
                    .map(|v| v.trim().parse::<f64>().with_context(|| format!("offset '{v}'")))
                    .collect::<Result<Vec<_>>>()
                    .map(OperatingPoint::new)
            })
            .collect::<Result<Vec<_>>>()?
    };
    if ops.is_empty() {
        bail!("no operating points in '{s}'");
    }
    for (k, op) in ops.iter().enumerate() {
        if op.offsets.len() != n_interfaces {
            bail!(
                "operating point {k} has {} offsets but the model has {n_interfaces} interfaces",
                op.offsets.len()
            );
        }
    }
    Ok(ops)
}

/// Operating points from `--ops`, else from the manifest, else the zero offset.
pub fn resolve_ops(arg: Option<&str>, loaded: &LoadedManifest) -> Result<Vec<OperatingPoint>> {
    let n = loaded.model.interfaces().len();
    match (arg, &loaded.manifest.operating_points) {
        (Some(s), _) => parse_ops(s, n),
        (None, Some(spec)) => spec.points().map_err(|e| anyhow!(e)),
        (None, None) => Ok(vec![OperatingPoint::new(vec![0.0; n])]),
    }
}

pub fn resolve_freq(arg: Option<&str>, loaded: &LoadedManifest) -> Result<FrequencySpec> {
    match (arg, loaded.manifest.frequency) {
        (Some(s), _) => FrequencySpec::parse(s).map_err(|e| anyhow!(e)),
        (None, Some(f)) => Ok(f),
        (None, None) => bail!("no frequency grid: pass --freq min:max:count[:log|lin] or set it in the manifest"),
    }
}

/// `--method` values: a bare method for every subsystem, or `name=method`
/// (`full` keeps a subsystem unreduced). Later entries win.
pub fn parse_methods(args: &[String], model: &CoupledModel) -> Result<Vec<Option<ReductionMethod>>> {
    let mut methods = vec![None; model.len()];
    let parse = |m: &str| -> Result<Option<ReductionMethod>> {
        match m.trim() {
            "full" | "none" => Ok(None),
            other => Ok(Some(other.parse()?)),
        }
    };
    for item in args.iter().flat_map(|a| a.split(',')) {
        match item.split_once('=') {
            Some((name, m)) => {
                let j = subsystem_index(model, name)?;
                methods[j] = parse(m)?;
            }
            None => methods.fill(parse(item)?),
        }
    }
    Ok(methods)
}

/// `name=N` pairs.
pub fn parse_orders(args: &[String], model: &CoupledModel) -> Result<Vec<Option<usize>>> {
    let mut orders = vec![None; model.len()];
    for item in args.iter().flat_map(|a| a.split(',')) {
        let (name, n) = item
            .split_once('=')
            .ok_or_else(|| anyhow!("order '{item}' is not name=N"))?;
        let j = subsystem_index(model, name)?;
        orders[j] = Some(n.trim().parse().with_context(|| format!("order '{n}'"))?);
    }
    Ok(orders)
}

pub fn subsystem_index(model: &CoupledModel, name: &str) -> Result<usize> {
    let name = name.trim();
    model
        .names()
        .iter()
        .position(|n| n == name)
        .ok_or_else(|| anyhow!("unknown subsystem '{name}' (have {})", model.names().join(", ")))
}

/// `--entries`: `all` or `output/input` label pairs separated by commas.
pub fn parse_entries(arg: Option<&str>, model: &CoupledModel) -> Result<Vec<(usize, usize)>> {
    let outs: Vec<&str> = model.external_outputs().iter().map(|p| p.label.as_str()).collect();
    let ins: Vec<&str> = model.external_inputs().iter().map(|p| p.label.as_str()).collect();
    match arg.map(str::trim) {
        None | Some("all") => Ok((0..outs.len()).flat_map(|i| (0..ins.len()).map(move |j| (i, j))).collect()),
        Some(list) => list
            .split(',')
            .map(|pair| {
                let (o, i) = pair
                    .split_once('/')
                    .ok_or_else(|| anyhow!("entry '{pair}' is not output/input"))?;
                let oi = outs
                    .iter()
                    .position(|l| *l == o.trim())
                    .ok_or_else(|| anyhow!("unknown external output '{o}'"))?;
                let ii = ins
                    .iter()
                    .position(|l| *l == i.trim())
                    .ok_or_else(|| anyhow!("unknown external input '{i}'"))?;
                Ok((oi, ii))
            })
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ops_grid_and_list() {
        let g = parse_ops("grid:-0.1:0.1:3,0:0.02:2", 2).unwrap();
        assert_eq!(g.len(), 6);
        assert_eq!(g[0].offsets, [-0.1, 0.0]);
        let l = parse_ops("0.0;0.05; -0.05", 1).unwrap();
        assert_eq!(l.iter().map(|o| o.offsets[0]).collect::<Vec<_>>(), [0.0, 0.05, -0.05]);
        assert!(parse_ops("0.0,0.1", 1).is_err());
        assert!(parse_ops("grid:0:1", 1).is_err());
        assert!(parse_ops("", 1).is_err());
    }
}
