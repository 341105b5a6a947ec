//! Binary checkpoint file.
//!
//! ```text
//! "RSDN" | u32 version | u64 header length | header text (UTF-8)
//!        | weights f64[n] | adam m f64[n] | adam v f64[n] | adam step u64
//! ```
//!
//! All integers and reals are little-endian. The header is `key=value`
//! lines in a fixed order; reals use the shortest representation that
//! parses back to the same bits.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

use super::adam::{AdamState, TrainHyper};
use super::layers::RunningStats;
use super::network::{Network, NetworkConfig};

pub const MAGIC: &[u8; 4] = b"RSDN";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub network: Network,
    pub hyper: TrainHyper,
    pub adam: AdamState,
    /// Mean training loss per epoch.
    pub history: Vec<f64>,
}

impl Checkpoint {
    /// An untrained checkpoint around `network`.
    pub fn fresh(network: Network, hyper: TrainHyper) -> Self {
        let n = network.params.len();
        Checkpoint {
            network,
            hyper,
            adam: AdamState::new(n),
            history: Vec::new(),
        }
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.network.config
    }
}

fn join(values: &[f64]) -> String {
    let mut s = String::new();
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            s.push(',');
        }
        write!(s, "{v}").unwrap();
    }
    s
}

fn header_text(ckpt: &Checkpoint) -> String {
    let c = &ckpt.network.config;
    let h = &ckpt.hyper;
    let mut s = String::new();
    let mut line = |k: &str, v: String| {
        s.push_str(k);
        s.push('=');
        s.push_str(&v);
        s.push('\n');
    };
    line("topology", c.topology.as_str().into());
    line("branch_depth", c.branch_depth.to_string());
    line("filters_per_layer", c.filters_per_layer.to_string());
    line("kernel_len", c.kernel_len.to_string());
    line("input_len", c.input_len.to_string());
    line("learning_rate", h.learning_rate.to_string());
    line("beta1", h.beta1.to_string());
    line("beta2", h.beta2.to_string());
    line("epsilon", h.epsilon.to_string());
    line("epochs", h.epochs.to_string());
    line("batch_size", h.batch_size.to_string());
    line("seed", h.seed.to_string());
    line("shift_augment", h.shift_augment.to_string());
    line("param_count", ckpt.network.params.len().to_string());
    line("input_means", join(&ckpt.network.input_means));
    for (b, stats) in ckpt.network.running.iter().enumerate() {
        for (l, st) in stats.iter().enumerate() {
            line(&format!("bn.{b}.{l}.mean"), join(&st.mean));
            line(&format!("bn.{b}.{l}.var"), join(&st.var));
        }
    }
    line("history", join(&ckpt.history));
    s
}

fn write_reals(out: &mut Vec<u8>, values: &[f64]) {
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

pub fn to_bytes(ckpt: &Checkpoint) -> Vec<u8> {
    let header = header_text(ckpt);
    let n = ckpt.network.params.len();
    let mut out = Vec::with_capacity(16 + header.len() + 24 * n + 8);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(header.len() as u64).to_le_bytes());
    out.extend_from_slice(header.as_bytes());
    write_reals(&mut out, &ckpt.network.params);
    write_reals(&mut out, &ckpt.adam.m);
    write_reals(&mut out, &ckpt.adam.v);
    out.extend_from_slice(&ckpt.adam.step.to_le_bytes());
    out
}

struct Header(BTreeMap<String, String>);

impl Header {
    fn parse(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for line in text.lines() {
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::BadHeader(format!("no '=' in {line:?}")))?;
            map.insert(k.to_string(), v.to_string());
        }
        Ok(Header(map))
    }

    fn raw(&self, key: &str) -> Result<&str> {
        self.0
            .get(key)
            .map(String::as_str)
            .ok_or_else(|| Error::BadHeader(format!("missing key {key}")))
    }

    fn get<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        let raw = self.raw(key)?;
        raw.parse()
            .map_err(|_| Error::BadHeader(format!("bad value for {key}: {raw:?}")))
    }

    fn reals(&self, key: &str) -> Result<Vec<f64>> {
        let raw = self.raw(key)?;
        if raw.is_empty() {
            return Ok(Vec::new());
        }
        raw.split(',')
            .map(|v| {
                v.parse()
                    .map_err(|_| Error::BadHeader(format!("bad real in {key}: {v:?}")))
            })
            .collect()
    }
}

fn take<'a>(bytes: &mut &'a [u8], n: usize, expected: usize) -> Result<&'a [u8]> {
    if bytes.len() < n {
        return Err(Error::CountMismatch {
            expected,
            found: bytes.len() / 8,
        });
    }
    let (head, rest) = bytes.split_at(n);
    *bytes = rest;
    Ok(head)
}

fn read_reals(bytes: &mut &[u8], n: usize) -> Result<Vec<f64>> {
    let raw = take(bytes, 8 * n, n)?;
    Ok(raw
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect())
}

pub fn from_bytes(mut bytes: &[u8]) -> Result<Checkpoint> {
    if bytes.len() < 16 || &bytes[..4] != MAGIC {
        return Err(Error::BadMagic);
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != VERSION {
        return Err(Error::VersionMismatch(version));
    }
    let header_len = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
    bytes = &bytes[16..];
    if bytes.len() < header_len {
        return Err(Error::BadHeader("truncated header".into()));
    }
    let text = std::str::from_utf8(&bytes[..header_len])
        .map_err(|_| Error::BadHeader("header is not UTF-8".into()))?;
    bytes = &bytes[header_len..];
    let h = Header::parse(text)?;

    let config = NetworkConfig {
        topology: h.get("topology")?,
        branch_depth: h.get("branch_depth")?,
        filters_per_layer: h.get("filters_per_layer")?,
        kernel_len: h.get("kernel_len")?,
        input_len: h.get("input_len")?,
    };
    config
        .validate()
        .map_err(|e| Error::BadHeader(e.to_string()))?;
    let hyper = TrainHyper {
        learning_rate: h.get("learning_rate")?,
        beta1: h.get("beta1")?,
        beta2: h.get("beta2")?,
        epsilon: h.get("epsilon")?,
        epochs: h.get("epochs")?,
        batch_size: h.get("batch_size")?,
        seed: h.get("seed")?,
        shift_augment: h.get("shift_augment")?,
    };
    let mut network = Network::zeroed(config)?;
    let n = network.params.len();
    let declared: usize = h.get("param_count")?;
    if declared != n {
        return Err(Error::CountMismatch {
            expected: n,
            found: declared,
        });
    }
    network.input_means = h.reals("input_means")?;
    if network.input_means.len() != network.config.input_len {
        return Err(Error::BadHeader("input_means has the wrong length".into()));
    }
    let filters = network.config.filters_per_layer;
    for (b, stats) in network.running.iter_mut().enumerate() {
        for (l, st) in stats.iter_mut().enumerate() {
            *st = RunningStats {
                mean: h.reals(&format!("bn.{b}.{l}.mean"))?,
                var: h.reals(&format!("bn.{b}.{l}.var"))?,
            };
            if st.mean.len() != filters || st.var.len() != filters {
                return Err(Error::BadHeader(format!("bn.{b}.{l} has the wrong width")));
            }
        }
    }
    let history = h.reals("history")?;

    network.params = read_reals(&mut bytes, n)?;
    let m = read_reals(&mut bytes, n)?;
    let v = read_reals(&mut bytes, n)?;
    let step_bytes = take(&mut bytes, 8, n)?;
    let step = u64::from_le_bytes(step_bytes.try_into().unwrap());
    if !bytes.is_empty() {
        return Err(Error::CountMismatch {
            expected: n,
            found: n + bytes.len() / 8,
        });
    }
    Ok(Checkpoint {
        network,
        hyper,
        adam: AdamState { m, v, step },
        history,
    })
}

pub fn save_checkpoint(ckpt: &Checkpoint, dest: &Path) -> Result<()> {
    let mut f = std::fs::File::create(dest)?;
    f.write_all(&to_bytes(ckpt))?;
    f.sync_all()?;
    Ok(())
}

pub fn load_checkpoint(src: &Path) -> Result<Checkpoint> {
    let mut bytes = Vec::new();
    std::fs::File::open(src)?.read_to_end(&mut bytes)?;
    from_bytes(&bytes)
}
