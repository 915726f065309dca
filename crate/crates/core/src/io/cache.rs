//! Content-addressed on-disk cache of subsystem FRFs.
//!
//! The key is a SHA-256 over the subsystem's matrices, port definitions and
//! the exact frequency grid, so any change to the model or grid misses. An
//! entry that fails to parse or does not match its key is treated as a miss
//! and overwritten.

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{write_atomic, IoError};
use crate::interconnect::{lft_assemble, CoupledModel, OperatingPoint, Subsystem};
use crate::lti::FrfSweep;
use crate::sparse::SparseMatrix;

const FORMAT: &str = "modlink-frf-v1";

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheStats {
    pub hits: usize,
    pub misses: usize,
    /// Subsystem FRF sweeps actually computed.
    pub evaluations: usize,
}

#[derive(Debug)]
pub struct FrfCache {
    dir: PathBuf,
    hits: AtomicUsize,
    misses: AtomicUsize,
    evaluations: AtomicUsize,
}

#[derive(Serialize, Deserialize)]
struct Entry {
    format: String,
    key: String,
    frequencies: Vec<f64>,
    input_labels: Vec<String>,
    output_labels: Vec<String>,
    /// Row-major `p × m` blocks, one per frequency.
    re: Vec<f64>,
    im: Vec<f64>,
}

fn hash_sparse(h: &mut Sha256, tag: &str, m: &SparseMatrix) {
    h.update(tag.as_bytes());
    h.update((m.nrows() as u64).to_le_bytes());
    h.update((m.ncols() as u64).to_le_bytes());
    for (r, c, v) in m.triplets() {
        h.update((r as u64).to_le_bytes());
        h.update((c as u64).to_le_bytes());
        h.update(v.to_bits().to_le_bytes());
    }
}

fn hash_dense(h: &mut Sha256, tag: &str, m: &DMatrix<f64>) {
    h.update(tag.as_bytes());
    h.update((m.nrows() as u64).to_le_bytes());
    h.update((m.ncols() as u64).to_le_bytes());
    for v in m.iter() {
        h.update(v.to_bits().to_le_bytes());
    }
}

fn hash_labels(h: &mut Sha256, labels: &[String]) {
    h.update((labels.len() as u64).to_le_bytes());
    for l in labels {
        h.update((l.len() as u64).to_le_bytes());
        h.update(l.as_bytes());
    }
}

impl FrfCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self {
            dir: dir.into(),
            hits: AtomicUsize::new(0),
            misses: AtomicUsize::new(0),
            evaluations: AtomicUsize::new(0),
        }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn stats(&self) -> CacheStats {
        CacheStats {
            hits: self.hits.load(Ordering::Relaxed),
            misses: self.misses.load(Ordering::Relaxed),
            evaluations: self.evaluations.load(Ordering::Relaxed),
        }
    }

    /// Hex digest identifying `subsystem` evaluated on `omegas`.
    pub fn key(subsystem: &Subsystem, omegas: &[f64]) -> String {
        let mut h = Sha256::new();
        h.update(FORMAT.as_bytes());
        match subsystem {
            Subsystem::SecondOrder(s) => {
                h.update(b"second-order");
                hash_sparse(&mut h, "M", s.mass());
                hash_sparse(&mut h, "D", s.damping());
                hash_sparse(&mut h, "K", s.stiffness());
                let ports = serde_json::to_string(&(s.inputs(), s.outputs())).expect("ports serialize");
                h.update(ports.as_bytes());
            }
            Subsystem::StateSpace(ss) => {
                h.update(b"state-space");
                for (tag, m) in [("E", ss.e()), ("A", ss.a()), ("B", ss.b()), ("C", ss.c()), ("D", ss.d())] {
                    hash_dense(&mut h, tag, m);
                }
                hash_labels(&mut h, ss.input_labels());
                hash_labels(&mut h, ss.output_labels());
            }
        }
        h.update(b"omega");
        h.update((omegas.len() as u64).to_le_bytes());
        for w in omegas {
            h.update(w.to_bits().to_le_bytes());
        }
        hex::encode(h.finalize())
    }

    fn path(&self, key: &str) -> PathBuf {
        self.dir.join(&key[..2]).join(format!("{key}.json"))
    }

    fn load(&self, key: &str, omegas: &[f64]) -> Option<FrfSweep> {
        let path = self.path(key);
        let bytes = std::fs::read(&path).ok()?;
        let parsed = serde_json::from_slice::<Entry>(&bytes).ok().and_then(|e| decode(e, key, omegas));
        if parsed.is_none() {
            log::warn!("ignoring corrupt cache entry {}", path.display());
        }
        parsed
    }

    fn store(&self, key: &str, sweep: &FrfSweep) -> Result<(), IoError> {
        let (mut re, mut im) = (Vec::new(), Vec::new());
        for g in sweep.data() {
            for i in 0..g.nrows() {
                for j in 0..g.ncols() {
                    re.push(g[(i, j)].re);
                    im.push(g[(i, j)].im);
                }
            }
        }
        let entry = Entry {
            format: FORMAT.into(),
            key: key.into(),
            frequencies: sweep.frequencies().to_vec(),
            input_labels: sweep.input_labels().to_vec(),
            output_labels: sweep.output_labels().to_vec(),
            re,
            im,
        };
        write_atomic(&self.path(key), &serde_json::to_vec(&entry).expect("entry serializes"))
    }

    /// FRF of `subsystem` on `omegas`, from disk when available.
    pub fn subsystem_frf(&self, subsystem: &Subsystem, omegas: &[f64]) -> crate::Result<FrfSweep> {
        let key = Self::key(subsystem, omegas);
        if let Some(sweep) = self.load(&key, omegas) {
            self.hits.fetch_add(1, Ordering::Relaxed);
            return Ok(sweep);
        }
        self.misses.fetch_add(1, Ordering::Relaxed);
        let sweep = subsystem.frf(omegas)?;
        self.evaluations.fetch_add(1, Ordering::Relaxed);
        if let Err(e) = self.store(&key, &sweep) {
            log::warn!("could not write cache entry: {e}");
        }
        Ok(sweep)
    }

    pub fn subsystem_frfs(&self, model: &CoupledModel, omegas: &[f64]) -> crate::Result<Vec<FrfSweep>> {
        model
            .subsystems()
            .par_iter()
            .map(|s| self.subsystem_frf(s, omegas))
            .collect()
    }

    /// Closed-loop FRFs at every operating point, computing each subsystem
    /// FRF at most once.
    pub fn assemble(
        &self,
        model: &CoupledModel,
        ops: &[OperatingPoint],
        omegas: &[f64],
    ) -> crate::Result<Vec<FrfSweep>> {
        let gb = model.block_frf(&self.subsystem_frfs(model, omegas)?)?;
        ops.par_iter()
            .map(|op| Ok(lft_assemble(&gb, &model.interconnection(model.posdep_k11(op)?)?)?))
            .collect()
    }
}

fn decode(e: Entry, key: &str, omegas: &[f64]) -> Option<FrfSweep> {
    let same_grid = e.frequencies.len() == omegas.len()
        && e.frequencies.iter().zip(omegas).all(|(a, b)| a.to_bits() == b.to_bits());
    if e.format != FORMAT || e.key != key || !same_grid {
        return None;
    }
    let (p, m) = (e.output_labels.len(), e.input_labels.len());
    let block = p * m;
    if e.re.len() != block * omegas.len() || e.im.len() != e.re.len() {
        return None;
    }
    let data = (0..omegas.len())
        .map(|k| DMatrix::from_fn(p, m, |i, j| Complex64::new(e.re[k * block + i * m + j], e.im[k * block + i * m + j])))
        .collect();
    FrfSweep::new(e.frequencies, data, e.input_labels, e.output_labels).ok()
}
