//! Binary model files.
//!
//! Layout: `RIDI-MODEL`, format version (u32), payload length (u64), payload,
//! CRC-32 of the payload (u32). Integers and floats are little-endian.

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;

use super::cascade::CascadeModel;
use super::kernel::Kernel;
use super::normalizer::Normalizer;
use super::svc::{BinarySvc, PlacementClassifier};
use super::svr::{Hyperparams, SvrModel, SvrWeights};
use crate::error::ModelIoError;

pub const MAGIC: &[u8; 10] = b"RIDI-MODEL";
pub const FORMAT_VERSION: u32 = 1;

const HEADER: usize = MAGIC.len() + 4 + 8;

#[derive(Default)]
struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn usize(&mut self, v: usize) {
        self.u64(v as u64);
    }
    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64s(&mut self, v: &[f64]) {
        self.usize(v.len());
        v.iter().for_each(|&x| self.f64(x));
    }
    fn usizes(&mut self, v: &[usize]) {
        self.usize(v.len());
        v.iter().for_each(|&x| self.usize(x));
    }
    fn kernel(&mut self, k: &Kernel) {
        let tag = match k {
            Kernel::Linear => 0,
            Kernel::Poly2 { .. } => 1,
            Kernel::Rbf { .. } => 2,
        };
        self.u8(tag);
        self.f64(k.gamma());
    }
}

struct Reader<'a> {
    buf: &'a [u8],
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], ModelIoError> {
        if self.buf.len() < n {
            return Err(ModelIoError::Truncated);
        }
        let (head, tail) = self.buf.split_at(n);
        self.buf = tail;
        Ok(head)
    }
    fn u8(&mut self) -> Result<u8, ModelIoError> {
        Ok(self.take(1)?[0])
    }
    fn u64(&mut self) -> Result<u64, ModelIoError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
    fn f64(&mut self) -> Result<f64, ModelIoError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
    /// A length that must fit in the remaining bytes at `unit` bytes each.
    fn len(&mut self, unit: usize) -> Result<usize, ModelIoError> {
        let n = self.u64()?;
        if n.checked_mul(unit as u64).is_none_or(|b| b > self.buf.len() as u64) {
            return Err(ModelIoError::Corrupt(format!("length {n} exceeds the payload")));
        }
        Ok(n as usize)
    }
    fn f64s(&mut self) -> Result<Vec<f64>, ModelIoError> {
        let n = self.len(8)?;
        (0..n).map(|_| self.f64()).collect()
    }
    fn usizes(&mut self, bound: usize) -> Result<Vec<usize>, ModelIoError> {
        let n = self.len(8)?;
        (0..n)
            .map(|_| {
                let v = self.u64()?;
                if v >= bound as u64 {
                    return Err(ModelIoError::Corrupt(format!("support index {v} out of range {bound}")));
                }
                Ok(v as usize)
            })
            .collect()
    }
    fn kernel(&mut self) -> Result<Kernel, ModelIoError> {
        let tag = self.u8()?;
        let gamma = self.f64()?;
        match tag {
            0 => Ok(Kernel::Linear),
            1 => Ok(Kernel::Poly2 { gamma }),
            2 => Ok(Kernel::Rbf { gamma }),
            t => Err(ModelIoError::Corrupt(format!("unknown kernel tag {t}"))),
        }
    }
}

fn write_svr(w: &mut Writer, m: &SvrModel) {
    w.kernel(&m.kernel);
    w.f64(m.hp.c);
    w.f64(m.hp.epsilon);
    w.f64(m.bias);
    match &m.weights {
        SvrWeights::Primal(v) => {
            w.u8(0);
            w.f64s(v);
        }
        SvrWeights::Dual { rows, coef } => {
            w.u8(1);
            w.usizes(rows);
            w.f64s(coef);
        }
    }
}

fn read_svr(r: &mut Reader, dim: usize, support: usize) -> Result<SvrModel, ModelIoError> {
    let kernel = r.kernel()?;
    let hp = Hyperparams {
        c: r.f64()?,
        epsilon: r.f64()?,
    };
    let bias = r.f64()?;
    let weights = match r.u8()? {
        0 => {
            let v = r.f64s()?;
            if v.len() != dim {
                return Err(ModelIoError::Corrupt(format!("primal weights have {} entries, expected {dim}", v.len())));
            }
            SvrWeights::Primal(v)
        }
        1 => {
            let rows = r.usizes(support)?;
            let coef = r.f64s()?;
            if rows.len() != coef.len() {
                return Err(ModelIoError::Corrupt("support rows and coefficients differ in length".into()));
            }
            SvrWeights::Dual { rows, coef }
        }
        t => return Err(ModelIoError::Corrupt(format!("unknown weight tag {t}"))),
    };
    Ok(SvrModel {
        kernel,
        hp,
        weights,
        bias,
    })
}

/// Serializes a model to bytes.
pub fn encode(m: &CascadeModel) -> Vec<u8> {
    let mut w = Writer::default();
    w.kernel(&m.kernel);
    w.u64(m.seed);
    w.f64s(&m.normalizer.mean);
    w.f64s(&m.normalizer.std);
    w.usize(m.support.ncols());
    w.f64s(m.support.as_slice());
    let c = &m.classifier;
    w.f64(c.c);
    w.f64(c.training_accuracy);
    for machine in &c.machines {
        match machine {
            None => w.u8(0),
            Some(b) => {
                w.u8(1);
                w.usizes(&b.rows);
                w.f64s(&b.coef);
                w.f64(b.bias);
            }
        }
    }
    for pair in &m.regressors {
        for r in pair {
            write_svr(&mut w, r);
        }
    }
    let payload = w.0;
    let mut out = Vec::with_capacity(HEADER + payload.len() + 4);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(payload.len() as u64).to_le_bytes());
    out.extend_from_slice(&payload);
    out.extend_from_slice(&crc32fast::hash(&payload).to_le_bytes());
    out
}

/// Parses bytes produced by [`encode`].
pub fn decode(bytes: &[u8]) -> Result<CascadeModel, ModelIoError> {
    if bytes.len() < MAGIC.len() || &bytes[..MAGIC.len()] != MAGIC {
        return Err(if MAGIC.starts_with(bytes) {
            ModelIoError::Truncated
        } else {
            ModelIoError::BadMagic
        });
    }
    let mut r = Reader {
        buf: &bytes[MAGIC.len()..],
    };
    let version = u32::from_le_bytes(r.take(4)?.try_into().expect("4 bytes"));
    if version != FORMAT_VERSION {
        return Err(ModelIoError::Version {
            found: version,
            supported: FORMAT_VERSION,
        });
    }
    let len = r.u64()?;
    if (r.buf.len() as u64) < len.saturating_add(4) {
        return Err(ModelIoError::Truncated);
    }
    let len = len as usize;
    let payload = r.take(len)?;
    let stored = u32::from_le_bytes(r.take(4)?.try_into().expect("4 bytes"));
    let computed = crc32fast::hash(payload);
    if stored != computed {
        return Err(ModelIoError::Checksum { stored, computed });
    }
    if !r.buf.is_empty() {
        return Err(ModelIoError::Corrupt(format!("{} trailing bytes", r.buf.len())));
    }

    let mut r = Reader { buf: payload };
    let kernel = r.kernel()?;
    let seed = r.u64()?;
    let mean = r.f64s()?;
    let std = r.f64s()?;
    let dim = mean.len();
    if std.len() != dim || dim == 0 {
        return Err(ModelIoError::Corrupt("normalizer arrays differ in length".into()));
    }
    let cols = r.u64()? as usize;
    let flat = r.f64s()?;
    if cols.checked_mul(dim) != Some(flat.len()) {
        return Err(ModelIoError::Corrupt("support matrix size mismatch".into()));
    }
    let support = DMatrix::from_vec(dim, cols, flat);
    let c = r.f64()?;
    let training_accuracy = r.f64()?;
    let mut machines: [Option<BinarySvc>; 4] = Default::default();
    for slot in machines.iter_mut() {
        *slot = match r.u8()? {
            0 => None,
            1 => {
                let rows = r.usizes(cols)?;
                let coef = r.f64s()?;
                if rows.len() != coef.len() {
                    return Err(ModelIoError::Corrupt("classifier rows and coefficients differ in length".into()));
                }
                Some(BinarySvc {
                    rows,
                    coef,
                    bias: r.f64()?,
                })
            }
            t => return Err(ModelIoError::Corrupt(format!("unknown classifier tag {t}"))),
        };
    }
    let mut regressors = Vec::with_capacity(8);
    for _ in 0..8 {
        let m = read_svr(&mut r, dim, cols)?;
        if m.kernel != kernel {
            return Err(ModelIoError::Corrupt("regressor kernel differs from model kernel".into()));
        }
        regressors.push(m);
    }
    if !r.buf.is_empty() {
        return Err(ModelIoError::Corrupt("unread payload bytes".into()));
    }
    let mut it = regressors.into_iter();
    let regressors = std::array::from_fn(|_| std::array::from_fn(|_| it.next().expect("eight regressors")));
    Ok(CascadeModel {
        normalizer: Normalizer { mean, std },
        kernel,
        support,
        classifier: PlacementClassifier {
            kernel,
            c,
            machines,
            training_accuracy,
        },
        regressors,
        seed,
    })
}

pub fn save_model(model: &CascadeModel, path: &Path) -> Result<(), ModelIoError> {
    fs::write(path, encode(model)).map_err(|source| ModelIoError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_model(path: &Path) -> Result<CascadeModel, ModelIoError> {
    let bytes = fs::read(path).map_err(|source| ModelIoError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    decode(&bytes)
}
