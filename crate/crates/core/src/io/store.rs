//! Chain store. A run directory holds
//!
//! - `run.toml`: format version, config and data hashes, seed, run lengths,
//!   parameter names and the chain list;
//! - `config.toml` and `data.csv`: the inputs, so analyses need nothing else;
//! - per chain `chain-<c>.toml` (acceptance, scales), `chain-<c>.tsv` (one
//!   row per stored draw: continuous parameters, LL, log-joint) and
//!   `chain-<c>.states` (bit-packed state vectors).
//!
//! Floats are written in shortest round-trip decimal, so loading is
//! bit-exact.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::{sha256_hex, RunConfig};
use super::dataset::{load_dataset, write_dataset};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::sampler::{ChainResult, ParamPoint, ProposalScales, ProposalShape};
use crate::switching::{StateVector, TransitionProbs};

pub const FORMAT_VERSION: u32 = 1;
const STATES_MAGIC: &[u8; 4] = b"RSWS";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainMeta {
    pub format_version: u32,
    pub chain: usize,
    pub names: Vec<String>,
    pub intervals: usize,
    pub t_tilde: usize,
    pub draws: usize,
    pub accept_rates: Vec<f64>,
    pub sigma: Vec<f64>,
    pub shape: ProposalShape,
    pub unfitted_scales: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainEntry {
    pub chain: usize,
    /// Set when the chain aborted; such chains have no files.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub format_version: u32,
    pub config_hash: String,
    pub data_hash: String,
    pub seed: u64,
    pub draws: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub names: Vec<String>,
    pub chains: Vec<ChainEntry>,
}

/// A persisted run with its successful chains.
#[derive(Debug, Clone)]
pub struct Run {
    pub dir: PathBuf,
    pub meta: RunMeta,
    pub config: RunConfig,
    pub data: Dataset,
    pub chains: Vec<ChainResult>,
}

fn store_err(path: &Path, message: impl std::fmt::Display) -> Error {
    Error::Store(format!("{}: {message}", path.display()))
}

fn chain_path(dir: &Path, chain: usize, ext: &str) -> PathBuf {
    dir.join(format!("chain-{chain}.{ext}"))
}

fn write_toml<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = toml::to_string(value).map_err(|e| store_err(path, e))?;
    fs::write(path, text)?;
    Ok(())
}

fn read_toml<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)?;
    toml::from_str(&text).map_err(|e| store_err(path, e))
}

/// Writes one chain's three files into `dir`.
pub fn persist_chain(result: &ChainResult, dir: &Path) -> Result<()> {
    let c = result.chain;
    let intervals = result.draws.first().map_or(0, |d| d.trans.p01.len());
    let t_tilde = result.draws.first().map_or(0, |d| d.s.len());
    let meta = ChainMeta {
        format_version: FORMAT_VERSION,
        chain: c,
        names: result.names.clone(),
        intervals,
        t_tilde,
        draws: result.draws.len(),
        accept_rates: result.accept_rates.clone(),
        sigma: result.scales.sigma.clone(),
        shape: result.scales.shape,
        unfitted_scales: result.unfitted_scales.clone(),
    };
    write_toml(&chain_path(dir, c, "toml"), &meta)?;

    let mut out = BufWriter::new(fs::File::create(chain_path(dir, c, "tsv"))?);
    let mut header: Vec<String> = result.names.clone();
    header.extend((1..=intervals).map(|r| format!("p01[{r}]")));
    header.extend((1..=intervals).map(|r| format!("p10[{r}]")));
    header.extend(["loglik".to_string(), "logjoint".to_string()]);
    writeln!(out, "{}", header.join("\t"))?;
    for ((d, ll), lj) in result.draws.iter().zip(&result.loglik).zip(&result.logjoint) {
        let row: Vec<String> = d
            .free
            .iter()
            .chain(&d.trans.p01)
            .chain(&d.trans.p10)
            .chain([ll, lj])
            .map(|v| v.to_string())
            .collect();
        writeln!(out, "{}", row.join("\t"))?;
    }
    out.flush()?;

    let mut out = BufWriter::new(fs::File::create(chain_path(dir, c, "states"))?);
    out.write_all(STATES_MAGIC)?;
    out.write_all(&FORMAT_VERSION.to_le_bytes())?;
    out.write_all(&(result.draws.len() as u64).to_le_bytes())?;
    out.write_all(&(t_tilde as u64).to_le_bytes())?;
    for d in &result.draws {
        out.write_all(&pack_bits(d.s.as_slice()))?;
    }
    out.flush()?;
    Ok(())
}

/// Packs 0/1 values, least significant bit first.
pub fn pack_bits(bits: &[u8]) -> Vec<u8> {
    let mut out = vec![0u8; bits.len().div_ceil(8)];
    for (i, &b) in bits.iter().enumerate() {
        out[i / 8] |= (b & 1) << (i % 8);
    }
    out
}

pub fn unpack_bits(bytes: &[u8], len: usize) -> Vec<u8> {
    (0..len).map(|i| (bytes[i / 8] >> (i % 8)) & 1).collect()
}

/// Reads one chain back from `dir`.
pub fn load_chain(dir: &Path, chain: usize) -> Result<ChainResult> {
    let meta_path = chain_path(dir, chain, "toml");
    let meta: ChainMeta = read_toml(&meta_path)?;
    if meta.format_version != FORMAT_VERSION {
        return Err(store_err(
            &meta_path,
            format!("format version {} is not supported (expected {FORMAT_VERSION})", meta.format_version),
        ));
    }
    let k = meta.names.len();
    let r = meta.intervals;
    let width = k + 2 * r + 2;

    let tsv = chain_path(dir, chain, "tsv");
    let reader = BufReader::new(fs::File::open(&tsv)?);
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(meta.draws);
    for (i, line) in reader.lines().enumerate().skip(1) {
        let line = line?;
        let row = line
            .split('\t')
            .map(|v| v.parse::<f64>().map_err(|_| store_err(&tsv, format!("line {}: bad number `{v}`", i + 1))))
            .collect::<Result<Vec<f64>>>()?;
        if row.len() != width {
            return Err(store_err(&tsv, format!("line {}: expected {width} columns, got {}", i + 1, row.len())));
        }
        rows.push(row);
    }
    if rows.len() != meta.draws {
        return Err(store_err(&tsv, format!("expected {} draws, found {}", meta.draws, rows.len())));
    }

    let states_path = chain_path(dir, chain, "states");
    let mut bytes = Vec::new();
    fs::File::open(&states_path)?.read_to_end(&mut bytes)?;
    if bytes.len() < 24 || &bytes[..4] != STATES_MAGIC {
        return Err(store_err(&states_path, "not a state file"));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().expect("4 bytes"));
    let u64_at = |o: usize| u64::from_le_bytes(bytes[o..o + 8].try_into().expect("8 bytes")) as usize;
    if u32_at(4) != FORMAT_VERSION {
        return Err(store_err(&states_path, format!("format version {} is not supported", u32_at(4))));
    }
    let (n_draws, t_tilde) = (u64_at(8), u64_at(16));
    let stride = t_tilde.div_ceil(8);
    if n_draws != meta.draws || t_tilde != meta.t_tilde || bytes.len() != 24 + n_draws * stride {
        return Err(store_err(&states_path, "size does not match the chain metadata"));
    }

    let mut draws = Vec::with_capacity(n_draws);
    let mut loglik = Vec::with_capacity(n_draws);
    let mut logjoint = Vec::with_capacity(n_draws);
    for (g, row) in rows.iter().enumerate() {
        let off = 24 + g * stride;
        draws.push(ParamPoint {
            free: row[..k].to_vec(),
            trans: TransitionProbs { p01: row[k..k + r].to_vec(), p10: row[k + r..k + 2 * r].to_vec() },
            s: StateVector(unpack_bits(&bytes[off..off + stride], t_tilde)),
        });
        loglik.push(row[width - 2]);
        logjoint.push(row[width - 1]);
    }
    Ok(ChainResult {
        chain,
        names: meta.names,
        draws,
        loglik,
        logjoint,
        accept_rates: meta.accept_rates,
        scales: ProposalScales { sigma: meta.sigma, shape: meta.shape },
        unfitted_scales: meta.unfitted_scales,
    })
}

/// Writes a complete run: inputs, metadata and every successful chain.
pub fn save_run(dir: &Path, config: &RunConfig, data: &Dataset, chains: &[Result<ChainResult>]) -> Result<RunMeta> {
    fs::create_dir_all(dir)?;
    let config_text = config.to_toml()?;
    fs::write(dir.join("config.toml"), &config_text)?;
    let data_path = dir.join("data.csv");
    write_dataset(&data_path, data)?;
    let mut entries = Vec::with_capacity(chains.len());
    let mut names = Vec::new();
    for (c, chain) in chains.iter().enumerate() {
        match chain {
            Ok(result) => {
                persist_chain(result, dir)?;
                if names.is_empty() {
                    let r = result.draws.first().map_or(0, |d| d.trans.p01.len());
                    names = result.names.clone();
                    names.extend((1..=r).map(|i| format!("p01[{i}]")));
                    names.extend((1..=r).map(|i| format!("p10[{i}]")));
                }
                entries.push(ChainEntry { chain: result.chain, error: None });
            }
            Err(e) => entries.push(ChainEntry { chain: c, error: Some(e.to_string()) }),
        }
    }
    let meta = RunMeta {
        format_version: FORMAT_VERSION,
        config_hash: sha256_hex(config_text.as_bytes()),
        data_hash: sha256_hex(&fs::read(&data_path)?),
        seed: config.sampler.seed,
        draws: config.sampler.draws,
        burn_in: config.sampler.burn_in,
        thin: config.sampler.thin,
        names,
        chains: entries,
    };
    write_toml(&dir.join("run.toml"), &meta)?;
    Ok(meta)
}

/// Loads a run, refusing version mismatches and inputs whose hashes differ
/// from the recorded ones.
pub fn load_run(dir: &Path) -> Result<Run> {
    let meta_path = dir.join("run.toml");
    let meta: RunMeta = read_toml(&meta_path)?;
    if meta.format_version != FORMAT_VERSION {
        return Err(store_err(
            &meta_path,
            format!("format version {} is not supported (expected {FORMAT_VERSION})", meta.format_version),
        ));
    }
    let config_path = dir.join("config.toml");
    let config_text = fs::read_to_string(&config_path)?;
    if sha256_hex(config_text.as_bytes()) != meta.config_hash {
        return Err(store_err(&config_path, "configuration hash does not match the run metadata"));
    }
    let data_path = dir.join("data.csv");
    if sha256_hex(&fs::read(&data_path)?) != meta.data_hash {
        return Err(store_err(&data_path, "data hash does not match the run metadata"));
    }
    let config = RunConfig::from_toml(&config_text)?;
    let data = load_dataset(&data_path)?;
    let chains = meta
        .chains
        .iter()
        .filter(|e| e.error.is_none())
        .map(|e| load_chain(dir, e.chain))
        .collect::<Result<Vec<_>>>()?;
    Ok(Run { dir: dir.to_path_buf(), meta, config, data, chains })
}
