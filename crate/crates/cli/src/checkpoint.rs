//! Versioned binary checkpoints.
//!
//! A checkpoint is a self-contained container: configuration text,
//! training phase and iteration, every parameter tensor by name, the
//! optimizer state and the RNG stream positions, so a resumed run
//! reproduces the uninterrupted run bit-exactly. Loading refuses
//! configurations whose parameter-determining fields differ from the
//! stored ones and prints the offending fields.

use std::io::{Cursor, Read};
use std::path::Path;

use stvu_core::config::ModelConfig;
use stvu_core::model::Network;
use stvu_core::optim::Adam;
use stvu_core::rng::{restore_state, save_state, RngState};
use stvu_core::tensor::Tensor;
use stvu_core::train::{Phase, TrainSchedule, Trainer};

use crate::error::CliError;
use crate::pngio::write_atomic;

const MAGIC: &[u8; 8] = b"STVUCKPT";
const VERSION: u32 = 1;

/// Everything stored in a checkpoint file.
pub struct Checkpoint {
    pub phase: Phase,
    pub iteration: u64,
    pub config: ModelConfig,
    pub init_seed: u64,
    pub schedule: TrainSchedule,
    pub params: Vec<(String, Tensor<f32>)>,
    pub adam: Option<AdamState>,
    pub rng_sample: RngState,
    pub rng_augment: RngState,
}

pub struct AdamState {
    pub t: u64,
    pub m: Vec<Option<Tensor<f32>>>,
    pub v: Vec<Option<Tensor<f32>>>,
}

struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }
    fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn u128(&mut self, v: u128) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn bytes(&mut self, v: &[u8]) {
        self.u32(v.len() as u32);
        self.buf.extend_from_slice(v);
    }
    fn tensor(&mut self, t: &Tensor<f32>) {
        for d in t.shape() {
            self.u32(d as u32);
        }
        for &v in t.data() {
            self.buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    fn rng(&mut self, s: &RngState) {
        self.buf.extend_from_slice(&s.seed);
        self.u128(s.word_pos);
        self.u64(s.stream_id);
    }
}

struct Reader<'a> {
    cur: Cursor<&'a [u8]>,
}

impl<'a> Reader<'a> {
    fn take<const N: usize>(&mut self) -> Result<[u8; N], CliError> {
        let mut b = [0u8; N];
        self.cur
            .read_exact(&mut b)
            .map_err(|_| CliError::Checkpoint("truncated checkpoint".into()))?;
        Ok(b)
    }
    fn u8(&mut self) -> Result<u8, CliError> {
        Ok(self.take::<1>()?[0])
    }
    fn u32(&mut self) -> Result<u32, CliError> {
        Ok(u32::from_le_bytes(self.take()?))
    }
    fn u64(&mut self) -> Result<u64, CliError> {
        Ok(u64::from_le_bytes(self.take()?))
    }
    fn u128(&mut self) -> Result<u128, CliError> {
        Ok(u128::from_le_bytes(self.take()?))
    }
    fn f64(&mut self) -> Result<f64, CliError> {
        Ok(f64::from_le_bytes(self.take()?))
    }
    fn bytes(&mut self) -> Result<Vec<u8>, CliError> {
        let n = self.u32()? as usize;
        let mut b = vec![0u8; n];
        self.cur
            .read_exact(&mut b)
            .map_err(|_| CliError::Checkpoint("truncated checkpoint".into()))?;
        Ok(b)
    }
    fn tensor(&mut self) -> Result<Tensor<f32>, CliError> {
        let shape = [
            self.u32()? as usize,
            self.u32()? as usize,
            self.u32()? as usize,
            self.u32()? as usize,
        ];
        let len: usize = shape.iter().product();
        let mut data = Vec::with_capacity(len);
        for _ in 0..len {
            data.push(f32::from_le_bytes(self.take()?));
        }
        Ok(Tensor::from_vec(shape, data))
    }
    fn rng(&mut self) -> Result<RngState, CliError> {
        Ok(RngState {
            seed: self.take()?,
            word_pos: self.u128()?,
            stream_id: self.u64()?,
        })
    }
}

pub fn save(ckpt: &Checkpoint, path: &Path) -> Result<(), CliError> {
    let mut w = Writer { buf: Vec::new() };
    w.buf.extend_from_slice(MAGIC);
    w.u32(VERSION);
    w.u8(match ckpt.phase {
        Phase::Pretrain => 0,
        Phase::Joint => 1,
    });
    w.u64(ckpt.iteration);
    w.u64(ckpt.init_seed);
    w.bytes(ckpt.config.emit().as_bytes());
    let s = &ckpt.schedule;
    w.u64(s.total_iters);
    w.u32(s.batch_size as u32);
    w.u32(s.patch_size as u32);
    w.f64(s.lr_init);
    w.f64(s.lr_decay_factor);
    w.u64(s.lr_decay_every);
    w.f64(s.grad_clip.unwrap_or(f64::NAN));
    w.u64(s.checkpoint_every);
    w.rng(&ckpt.rng_sample);
    w.rng(&ckpt.rng_augment);
    w.u32(ckpt.params.len() as u32);
    for (name, tensor) in &ckpt.params {
        w.bytes(name.as_bytes());
        w.tensor(tensor);
    }
    match &ckpt.adam {
        None => w.u8(0),
        Some(a) => {
            w.u8(1);
            w.u64(a.t);
            w.u32(a.m.len() as u32);
            for (m, v) in a.m.iter().zip(&a.v) {
                match (m, v) {
                    (Some(m), Some(v)) => {
                        w.u8(1);
                        w.tensor(m);
                        w.tensor(v);
                    }
                    _ => w.u8(0),
                }
            }
        }
    }
    write_atomic(path, &w.buf)
}

pub fn load(path: &Path) -> Result<Checkpoint, CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(e, path))?;
    let mut r = Reader {
        cur: Cursor::new(bytes.as_slice()),
    };
    let magic: [u8; 8] = r.take()?;
    if &magic != MAGIC {
        return Err(CliError::Checkpoint(format!(
            "{} is not a checkpoint file",
            path.display()
        )));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(CliError::Checkpoint(format!(
            "unsupported checkpoint version {version} (expected {VERSION})"
        )));
    }
    let phase = match r.u8()? {
        0 => Phase::Pretrain,
        1 => Phase::Joint,
        other => {
            return Err(CliError::Checkpoint(format!(
                "unknown training phase tag {other}"
            )))
        }
    };
    let iteration = r.u64()?;
    let init_seed = r.u64()?;
    let config_text = String::from_utf8(r.bytes()?)
        .map_err(|_| CliError::Checkpoint("config block is not UTF-8".into()))?;
    let config = ModelConfig::parse(&config_text)
        .map_err(|e| CliError::Checkpoint(format!("stored config invalid: {e}")))?;
    let grad_clip_raw;
    let schedule = TrainSchedule {
        phase,
        total_iters: r.u64()?,
        batch_size: r.u32()? as usize,
        patch_size: r.u32()? as usize,
        lr_init: r.f64()?,
        lr_decay_factor: r.f64()?,
        lr_decay_every: r.u64()?,
        grad_clip: {
            grad_clip_raw = r.f64()?;
            if grad_clip_raw.is_nan() {
                None
            } else {
                Some(grad_clip_raw)
            }
        },
        checkpoint_every: r.u64()?,
    };
    let rng_sample = r.rng()?;
    let rng_augment = r.rng()?;
    let n_params = r.u32()? as usize;
    let mut params = Vec::with_capacity(n_params);
    for _ in 0..n_params {
        let name = String::from_utf8(r.bytes()?)
            .map_err(|_| CliError::Checkpoint("parameter name is not UTF-8".into()))?;
        params.push((name, r.tensor()?));
    }
    let adam = if r.u8()? == 1 {
        let t = r.u64()?;
        let n = r.u32()? as usize;
        let mut m = Vec::with_capacity(n);
        let mut v = Vec::with_capacity(n);
        for _ in 0..n {
            if r.u8()? == 1 {
                m.push(Some(r.tensor()?));
                v.push(Some(r.tensor()?));
            } else {
                m.push(None);
                v.push(None);
            }
        }
        Some(AdamState { t, m, v })
    } else {
        None
    };
    Ok(Checkpoint {
        phase,
        iteration,
        config,
        init_seed,
        schedule,
        params,
        adam,
        rng_sample,
        rng_augment,
    })
}

/// Capture a running trainer.
pub fn from_trainer(trainer: &Trainer<f32>) -> Checkpoint {
    Checkpoint {
        phase: trainer.schedule.phase,
        iteration: trainer.iteration,
        config: (*trainer.net.config).clone(),
        init_seed: trainer.net.init_seed(),
        schedule: trainer.schedule.clone(),
        params: trainer
            .net
            .params()
            .iter()
            .map(|p| (p.name.clone(), p.value.clone()))
            .collect(),
        adam: Some(AdamState {
            t: trainer.adam.t,
            m: trainer.adam.m.clone(),
            v: trainer.adam.v.clone(),
        }),
        rng_sample: save_state(&trainer.rng_sample),
        rng_augment: save_state(&trainer.rng_augment),
    }
}

/// Rebuild the network from a checkpoint. The stored parameter set must
/// cover the architecture exactly.
pub fn build_network(ckpt: &Checkpoint) -> Result<Network<f32>, CliError> {
    let cfg = ckpt
        .config
        .clone()
        .validate()
        .map_err(|e| CliError::Checkpoint(format!("stored config invalid: {e}")))?;
    let mut net: Network<f32> = Network::new(cfg, ckpt.init_seed);
    let has_flow = ckpt.params.iter().any(|(n, _)| n.starts_with("flow"));
    if has_flow {
        net.ensure_flow();
    }
    let expected: Vec<String> = net.params().iter().map(|p| p.name.clone()).collect();
    let stored: Vec<&String> = ckpt.params.iter().map(|(n, _)| n).collect();
    if expected.len() != stored.len() || expected.iter().zip(&stored).any(|(a, b)| &a != b) {
        return Err(CliError::Checkpoint(format!(
            "stored parameter set does not match the architecture ({} stored, {} expected)",
            stored.len(),
            expected.len()
        )));
    }
    for ((name, value), param) in ckpt.params.iter().zip(net.params_mut()) {
        debug_assert_eq!(name, &param.name);
        if value.shape() != param.value.shape() {
            return Err(CliError::Checkpoint(format!(
                "parameter {name} has shape {:?}, expected {:?}",
                value.shape(),
                param.value.shape()
            )));
        }
        param.value = value.clone();
    }
    Ok(net)
}

/// Rebuild a full trainer (network + optimizer + RNG streams) to resume
/// mid-phase.
pub fn build_trainer(ckpt: &Checkpoint) -> Result<Trainer<f32>, CliError> {
    let net = build_network(ckpt)?;
    let n = net.params().len();
    let mut adam = Adam::new(n);
    if let Some(a) = &ckpt.adam {
        if a.m.len() != n {
            return Err(CliError::Checkpoint(format!(
                "optimizer state covers {} parameters, expected {n}",
                a.m.len()
            )));
        }
        adam.t = a.t;
        adam.m = a.m.clone();
        adam.v = a.v.clone();
    }
    Ok(Trainer {
        net,
        adam,
        schedule: ckpt.schedule.clone(),
        iteration: ckpt.iteration,
        rng_sample: restore_state(&ckpt.rng_sample),
        rng_augment: restore_state(&ckpt.rng_augment),
    })
}

/// Render the fingerprint difference between a requested configuration
/// and the checkpoint's stored one.
pub fn fingerprint_mismatch(requested: &ModelConfig, stored: &ModelConfig) -> Option<String> {
    let diff = stored.fingerprint_diff(requested);
    if diff.is_empty() {
        return None;
    }
    let lines: Vec<String> = diff
        .iter()
        .map(|(field, stored_v, requested_v)| {
            format!("  {field}: checkpoint has {stored_v}, requested {requested_v}")
        })
        .collect();
    Some(format!(
        "configuration differs from the checkpoint:\n{}",
        lines.join("\n")
    ))
}
