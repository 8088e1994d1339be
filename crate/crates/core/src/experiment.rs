//! Proof-size sweep over chunk size, target false positive rate and element count.
//!
//! Each cell builds a seeded filter, then measures the encoded size of one
//! absence proof and the median encoded size of presence proofs over a sample
//! of inserted elements. Cells are independent and run under the chosen
//! [`Execution`]; output order is always the cross-product order.

use crate::bloom::{derive_params, BloomFilter, BloomParams, ParamsError};
use crate::codec::{encode_proof, CodecError};
use crate::merkle::Digest;
use crate::par::Execution;
use crate::tree::{BloomTree, Proof};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use sha2::{Digest as _, Sha256};
use std::collections::HashSet;
use std::io::Write;
use thiserror::Error;

/// Bytes per generated element.
pub const ELEMENT_LEN: usize = 16;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Params(#[from] ParamsError),
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error("no element with an absence proof found in {0} draws")]
    NoAbsenceSpecimen(usize),
    #[error("invalid config: {0}")]
    Config(&'static str),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub chunk_sizes: Vec<u32>,
    pub fprs: Vec<f64>,
    pub ns: Vec<u64>,
    pub sample_size: usize,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            chunk_sizes: vec![8, 32, 64],
            fprs: vec![0.1, 0.01, 0.001],
            ns: vec![500, 1000, 5000, 10_000],
            sample_size: 100,
            seed: 0,
        }
    }
}

impl ExperimentConfig {
    fn validate(&self) -> Result<(), ExperimentError> {
        if self.chunk_sizes.is_empty() || self.fprs.is_empty() || self.ns.is_empty() {
            return Err(ExperimentError::Config("grid lists must be non-empty"));
        }
        if self.sample_size == 0 {
            return Err(ExperimentError::Config("sample size must be at least 1"));
        }
        Ok(())
    }

    /// Cells in output order: chunk size outermost, then fpr, then n.
    pub fn cells(&self) -> Vec<(u32, f64, u64)> {
        let mut cells = Vec::new();
        for &c in &self.chunk_sizes {
            for &p in &self.fprs {
                for &n in &self.ns {
                    cells.push((c, p, n));
                }
            }
        }
        cells
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentRow {
    pub chunk_size: u32,
    #[serde(rename = "fpr")]
    pub fpr_target: f64,
    pub n: u64,
    pub m_bits: u64,
    pub k: u32,
    pub filter_bytes: u64,
    #[serde(rename = "absence_bytes")]
    pub absence_proof_bytes: u64,
    #[serde(rename = "median_presence_bytes")]
    pub median_presence_proof_bytes: u64,
}

/// Everything a cell produced, for callers that want to re-verify it.
#[derive(Debug, Clone)]
pub struct CellRun {
    pub row: ExperimentRow,
    pub tree: BloomTree,
    pub inserted: Vec<Vec<u8>>,
    /// `(element, proof)` for each sampled inserted element.
    pub presence: Vec<(Vec<u8>, Proof)>,
    pub absence: (Vec<u8>, Proof),
}

impl CellRun {
    pub fn root(&self) -> Digest {
        self.tree.root()
    }

    pub fn params(&self) -> &BloomParams {
        self.tree.params()
    }
}

/// Deterministic per-cell RNG: the seed is mixed with the cell coordinates so
/// cells do not share element streams.
fn cell_rng(seed: u64, chunk_size: u32, fpr: f64, n: u64, stream: u8) -> ChaCha8Rng {
    let mut h = Sha256::new();
    h.update(b"bloomtree-experiment");
    h.update(seed.to_le_bytes());
    h.update(chunk_size.to_le_bytes());
    h.update(fpr.to_bits().to_le_bytes());
    h.update(n.to_le_bytes());
    h.update([stream]);
    ChaCha8Rng::from_seed(h.finalize().into())
}

fn random_element(rng: &mut impl Rng) -> Vec<u8> {
    let mut e = vec![0u8; ELEMENT_LEN];
    rng.fill(&mut e[..]);
    e
}

/// `n` distinct seeded random elements.
pub fn distinct_elements(rng: &mut impl Rng, n: usize) -> Vec<Vec<u8>> {
    let mut seen = HashSet::with_capacity(n);
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let e = random_element(rng);
        if seen.insert(e.clone()) {
            out.push(e);
        }
    }
    out
}

/// Lower median: element `(len - 1) / 2` of the sorted values.
pub fn lower_median(values: &mut [u64]) -> Option<u64> {
    if values.is_empty() {
        return None;
    }
    values.sort_unstable();
    Some(values[(values.len() - 1) / 2])
}

pub fn run_cell(
    chunk_size: u32,
    fpr: f64,
    n: u64,
    sample_size: usize,
    seed: u64,
) -> Result<ExperimentRow, ExperimentError> {
    run_cell_detailed(chunk_size, fpr, n, sample_size, seed).map(|r| r.row)
}

pub fn run_cell_detailed(
    chunk_size: u32,
    fpr: f64,
    n: u64,
    sample_size: usize,
    seed: u64,
) -> Result<CellRun, ExperimentError> {
    if sample_size == 0 {
        return Err(ExperimentError::Config("sample size must be at least 1"));
    }
    let params = derive_params(n, fpr, chunk_size)?;

    let mut rng = cell_rng(seed, chunk_size, fpr, n, 0);
    let inserted = distinct_elements(&mut rng, n as usize);
    let mut filter = BloomFilter::new(params);
    for e in &inserted {
        filter.insert(e);
    }
    // Cells already run in parallel, so the tree is built sequentially.
    let tree = BloomTree::build_with(filter, Execution::Sequential);

    let sample: Vec<Vec<u8>> = inserted.iter().take(sample_size).cloned().collect();
    let mut presence = Vec::with_capacity(sample.len());
    let mut sizes = Vec::with_capacity(sample.len());
    for e in sample {
        let proof = tree.prove(&e);
        sizes.push(encode_proof(&params, &proof)?.len() as u64);
        presence.push((e, proof));
    }

    let mut probe_rng = cell_rng(seed, chunk_size, fpr, n, 1);
    let inserted_set: HashSet<&[u8]> = inserted.iter().map(Vec::as_slice).collect();
    let budget = 10 * sample_size;
    let absence = (0..budget)
        .map(|_| random_element(&mut probe_rng))
        .filter(|e| !inserted_set.contains(e.as_slice()))
        .map(|e| {
            let proof = tree.prove(&e);
            (e, proof)
        })
        .find(|(_, p)| !p.is_presence())
        .ok_or(ExperimentError::NoAbsenceSpecimen(budget))?;
    let absence_bytes = encode_proof(&params, &absence.1)?.len() as u64;

    let row = ExperimentRow {
        chunk_size,
        fpr_target: fpr,
        n,
        m_bits: params.m(),
        k: params.k(),
        filter_bytes: params.filter_bytes(),
        absence_proof_bytes: absence_bytes,
        median_presence_proof_bytes: lower_median(&mut sizes).expect("sample is non-empty"),
    };
    Ok(CellRun {
        row,
        tree,
        inserted,
        presence,
        absence,
    })
}

pub fn run_grid(config: &ExperimentConfig) -> Result<Vec<ExperimentRow>, ExperimentError> {
    run_grid_with(config, Execution::default())
}

pub fn run_grid_with(
    config: &ExperimentConfig,
    exec: Execution,
) -> Result<Vec<ExperimentRow>, ExperimentError> {
    config.validate()?;
    exec.map(&config.cells(), |&(c, p, n)| {
        run_cell(c, p, n, config.sample_size, config.seed)
    })
    .into_iter()
    .collect()
}

pub fn write_csv<W: Write>(rows: &[ExperimentRow], out: W) -> Result<(), ExperimentError> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

/// Renders rows as CSV text.
pub fn to_csv(rows: &[ExperimentRow]) -> Result<String, ExperimentError> {
    let mut buf = Vec::new();
    write_csv(rows, &mut buf)?;
    Ok(String::from_utf8(buf).expect("csv output is utf-8"))
}

/// Fixed-width summary table for terminals.
pub fn summary_table(rows: &[ExperimentRow]) -> String {
    let mut s = format!(
        "{:>6} {:>7} {:>6} {:>9} {:>4} {:>9} {:>8} {:>9}\n",
        "chunk", "fpr", "n", "m_bits", "k", "filter_B", "absent_B", "present_B"
    );
    for r in rows {
        s.push_str(&format!(
            "{:>6} {:>7} {:>6} {:>9} {:>4} {:>9} {:>8} {:>9}\n",
            r.chunk_size,
            r.fpr_target,
            r.n,
            r.m_bits,
            r.k,
            r.filter_bytes,
            r.absence_proof_bytes,
            r.median_presence_proof_bytes
        ));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::PROOF_HEADER_LEN;

    #[test]
    fn lower_median_picks_lower_middle() {
        assert_eq!(lower_median(&mut []), None);
        assert_eq!(lower_median(&mut [7]), Some(7));
        assert_eq!(lower_median(&mut [4, 1, 3, 2]), Some(2));
        assert_eq!(lower_median(&mut [5, 1, 3]), Some(3));
    }

    #[test]
    fn absence_size_layout_arithmetic() {
        let row = run_cell(32, 0.01, 10_000, 5, 1).unwrap();
        assert_eq!((row.m_bits, row.k, row.filter_bytes), (131_072, 9, 16_384));
        // header + chunk index + 32 chunk bytes + path length + 9 digests
        assert_eq!(
            row.absence_proof_bytes,
            (PROOF_HEADER_LEN + 8 + 32 + 2 + 9 * 32) as u64
        );
        assert_eq!(row.absence_proof_bytes, 352);
    }

    #[test]
    fn single_sample_median_is_that_proof() {
        let run = run_cell_detailed(8, 0.1, 200, 1, 3).unwrap();
        let (_, proof) = &run.presence[0];
        let len = encode_proof(run.params(), proof).unwrap().len() as u64;
        assert_eq!(run.row.median_presence_proof_bytes, len);
    }

    #[test]
    fn deterministic_under_seed() {
        let a = run_cell(8, 0.01, 500, 10, 42).unwrap();
        let b = run_cell(8, 0.01, 500, 10, 42).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_empty_config() {
        let mut cfg = ExperimentConfig::default();
        cfg.ns.clear();
        assert!(matches!(run_grid(&cfg), Err(ExperimentError::Config(_))));
        let cfg = ExperimentConfig {
            sample_size: 0,
            ..Default::default()
        };
        assert!(matches!(run_grid(&cfg), Err(ExperimentError::Config(_))));
    }

    #[test]
    fn csv_header_and_order() {
        let cfg = ExperimentConfig {
            chunk_sizes: vec![8, 32],
            fprs: vec![0.1],
            ns: vec![100, 200],
            sample_size: 5,
            seed: 9,
        };
        let rows = run_grid(&cfg).unwrap();
        let csv = to_csv(&rows).unwrap();
        let mut lines = csv.lines();
        assert_eq!(
            lines.next().unwrap(),
            "chunk_size,fpr,n,m_bits,k,filter_bytes,absence_bytes,median_presence_bytes"
        );
        let keys: Vec<(u32, u64)> = rows.iter().map(|r| (r.chunk_size, r.n)).collect();
        assert_eq!(keys, vec![(8, 100), (8, 200), (32, 100), (32, 200)]);
        assert_eq!(rows, run_grid_with(&cfg, Execution::Sequential).unwrap());
    }
}
