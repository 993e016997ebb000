//! Binary model files. All integers and floats are little-endian.
//!
//! | magic    | contents                                                        |
//! |----------|-----------------------------------------------------------------|
//! | `XLREP1` | N, entry count, then (side, word, index list) records           |
//! | `XLCBW1` | window, dim, negatives, vocabulary with counts, both matrices   |
//! | `XLRNN1` | version, config, N, tagsets, matrices, CRC-32 of preceding bytes |
//! | `XLHMM1` | config, tagset, n-gram counts, lexicon, suffixes, λs, θ          |

use std::collections::BTreeMap;
use std::fs;
use std::io::{Cursor, Read};
use std::path::Path;

use byteorder::{ReadBytesExt, WriteBytesExt, LE};

use xltag_core::cbow::CbowModel;
use xltag_core::corpus::{Side, TagSet};
use xltag_core::hmm::{HmmConfig, HmmCounts, HmmModel};
use xltag_core::matrix::Matrix;
use xltag_core::repr::{CommonWordVector, ReprTable};
use xltag_core::rnn::{BpttHorizon, PosInjection, RnnConfig, RnnModel, Weights};

use crate::error::{Error, Result};

pub const REPR_MAGIC: &[u8; 6] = b"XLREP1";
pub const CBOW_MAGIC: &[u8; 6] = b"XLCBW1";
pub const RNN_MAGIC: &[u8; 6] = b"XLRNN1";
pub const HMM_MAGIC: &[u8; 6] = b"XLHMM1";
pub const RNN_VERSION: u32 = 1;

type Decode<T> = std::result::Result<T, String>;

// Writes into a Vec<u8> cannot fail.
struct Out(Vec<u8>);

impl Out {
    fn new(magic: &[u8]) -> Self {
        Out(magic.to_vec())
    }
    fn u8(&mut self, v: u8) {
        self.0.write_u8(v).unwrap();
    }
    fn u32(&mut self, v: usize) {
        self.0.write_u32::<LE>(u32::try_from(v).expect("value fits in u32")).unwrap();
    }
    fn u64(&mut self, v: u64) {
        self.0.write_u64::<LE>(v).unwrap();
    }
    fn f64(&mut self, v: f64) {
        self.0.write_f64::<LE>(v).unwrap();
    }
    fn str(&mut self, s: &str) {
        self.u32(s.len());
        self.0.extend_from_slice(s.as_bytes());
    }
    fn f64s(&mut self, v: &[f64]) {
        v.iter().for_each(|&x| self.f64(x));
    }
    fn u64s(&mut self, v: &[u64]) {
        v.iter().for_each(|&x| self.u64(x));
    }
    fn tagset(&mut self, t: &TagSet) {
        self.str(t.name());
        self.u32(t.len());
        t.labels().iter().for_each(|l| self.str(l));
    }
}

struct In<'a>(Cursor<&'a [u8]>);

fn truncated<E>(_: E) -> String {
    "file is truncated".to_string()
}

impl<'a> In<'a> {
    fn new(bytes: &'a [u8], magic: &[u8]) -> Decode<Self> {
        if !bytes.starts_with(magic) {
            return Err(format!("not a {} file", String::from_utf8_lossy(magic)));
        }
        let mut c = Cursor::new(bytes);
        c.set_position(magic.len() as u64);
        Ok(In(c))
    }
    fn u8(&mut self) -> Decode<u8> {
        self.0.read_u8().map_err(truncated)
    }
    fn u32(&mut self) -> Decode<usize> {
        self.0.read_u32::<LE>().map(|v| v as usize).map_err(truncated)
    }
    fn u64(&mut self) -> Decode<u64> {
        self.0.read_u64::<LE>().map_err(truncated)
    }
    fn f64(&mut self) -> Decode<f64> {
        self.0.read_f64::<LE>().map_err(truncated)
    }
    fn remaining(&self) -> usize {
        self.0.get_ref().len() - self.0.position() as usize
    }
    /// Guards allocations against corrupt length fields.
    fn expect_bytes(&self, n: usize, width: usize) -> Decode<()> {
        match n.checked_mul(width) {
            Some(b) if b <= self.remaining() => Ok(()),
            _ => Err("file is truncated".to_string()),
        }
    }
    fn str(&mut self) -> Decode<String> {
        let n = self.u32()?;
        self.expect_bytes(n, 1)?;
        let mut buf = vec![0; n];
        self.0.read_exact(&mut buf).map_err(truncated)?;
        String::from_utf8(buf).map_err(|_| "invalid UTF-8 string".to_string())
    }
    fn f64s(&mut self, n: usize) -> Decode<Vec<f64>> {
        self.expect_bytes(n, 8)?;
        (0..n).map(|_| self.f64()).collect()
    }
    fn u64s(&mut self, n: usize) -> Decode<Vec<u64>> {
        self.expect_bytes(n, 8)?;
        (0..n).map(|_| self.u64()).collect()
    }
    fn tagset(&mut self) -> Decode<TagSet> {
        let name = self.str()?;
        let n = self.u32()?;
        self.expect_bytes(n, 4)?;
        let labels = (0..n).map(|_| self.str()).collect::<Decode<Vec<_>>>()?;
        TagSet::new(name, labels).map_err(|e| e.to_string())
    }
    fn finish(self) -> Decode<()> {
        if self.remaining() == 0 {
            Ok(())
        } else {
            Err(format!("{} trailing bytes", self.remaining()))
        }
    }
}

pub fn encode_repr(repr: &ReprTable) -> Vec<u8> {
    let mut out = Out::new(REPR_MAGIC);
    out.u64(repr.dim() as u64);
    out.u64(repr.len() as u64);
    for (side, word, v) in repr.iter() {
        out.u8(side.0);
        out.str(word);
        out.u32(v.indices().len());
        v.indices().iter().for_each(|&i| out.u32(i as usize));
    }
    out.0
}

pub fn decode_repr(bytes: &[u8]) -> Decode<ReprTable> {
    let mut r = In::new(bytes, REPR_MAGIC)?;
    let dim = usize::try_from(r.u64()?).map_err(|e| e.to_string())?;
    let entries = r.u64()? as usize;
    r.expect_bytes(entries, 9)?;
    let mut repr = ReprTable::new(dim);
    for _ in 0..entries {
        let side = Side(r.u8()?);
        let word = r.str()?;
        let n = r.u32()?;
        r.expect_bytes(n, 4)?;
        let indices = (0..n).map(|_| r.u32().map(|i| i as u32)).collect::<Decode<Vec<_>>>()?;
        let v = CommonWordVector::new(indices, dim).map_err(|e| e.to_string())?;
        if repr.get(side, &word).is_some() {
            return Err(format!("duplicate entry `{word}` on side {side}"));
        }
        repr.insert(side, word, v).map_err(|e| e.to_string())?;
    }
    r.finish()?;
    Ok(repr)
}

pub fn encode_cbow(model: &CbowModel) -> Vec<u8> {
    let mut out = Out::new(CBOW_MAGIC);
    out.u32(model.window());
    out.u32(model.dim());
    out.u32(model.negatives());
    out.u64(model.words().len() as u64);
    for (w, &c) in model.words().iter().zip(model.counts()) {
        out.str(w);
        out.u64(c);
    }
    out.f64s(model.input_matrix());
    out.f64s(model.output_matrix());
    out.0
}

pub fn decode_cbow(bytes: &[u8]) -> Decode<CbowModel> {
    let mut r = In::new(bytes, CBOW_MAGIC)?;
    let window = r.u32()?;
    let dim = r.u32()?;
    let negatives = r.u32()?;
    let v = r.u64()? as usize;
    r.expect_bytes(v, 12)?;
    let mut words = Vec::with_capacity(v);
    let mut counts = Vec::with_capacity(v);
    for _ in 0..v {
        words.push(r.str()?);
        counts.push(r.u64()?);
    }
    let n = v.checked_mul(dim).ok_or("matrix size overflows")?;
    let input = r.f64s(n)?;
    let output = r.f64s(n)?;
    r.finish()?;
    CbowModel::from_parts(words, counts, window, dim, negatives, input, output).map_err(|e| e.to_string())
}

fn bptt_code(h: BpttHorizon) -> (u8, usize) {
    match h {
        BpttHorizon::Full => (0, 0),
        BpttHorizon::Truncated(k) => (1, k),
    }
}

pub fn encode_rnn(model: &RnnModel) -> Vec<u8> {
    let c = model.config();
    let mut out = Out::new(RNN_MAGIC);
    out.u32(RNN_VERSION as usize);
    out.u32(c.forward_size);
    out.u32(c.compression_size);
    out.u8(c.bidirectional as u8);
    out.u8(c.pos_injection.code());
    out.u32(c.pos_tagset_size);
    out.f64(c.learning_rate);
    out.u32(c.max_epochs);
    let (kind, k) = bptt_code(c.bptt);
    out.u8(kind);
    out.u32(k);
    out.u64(c.seed);
    out.u64(model.input_dim() as u64);
    out.tagset(model.tagset());
    match model.pos_tagset() {
        Some(p) => {
            out.u8(1);
            out.tagset(p);
        }
        None => out.u8(0),
    }
    let mats = model.weights().matrices();
    out.u32(mats.len());
    for m in mats {
        out.u32(m.rows());
        out.u32(m.cols());
        out.f64s(m.as_slice());
    }
    let crc = crc32fast::hash(&out.0);
    out.0.write_u32::<LE>(crc).unwrap();
    out.0
}

pub fn decode_rnn(bytes: &[u8]) -> Decode<RnnModel> {
    if bytes.len() < RNN_MAGIC.len() + 4 || !bytes.starts_with(RNN_MAGIC) {
        return Err("not a XLRNN1 file".to_string());
    }
    let (body, tail) = bytes.split_at(bytes.len() - 4);
    let stored = u32::from_le_bytes(tail.try_into().expect("4 bytes"));
    if crc32fast::hash(body) != stored {
        return Err("checksum mismatch".to_string());
    }
    let mut r = In::new(body, RNN_MAGIC)?;
    let version = r.u32()?;
    if version != RNN_VERSION as usize {
        return Err(format!("unsupported model version {version}"));
    }
    let forward_size = r.u32()?;
    let compression_size = r.u32()?;
    let bidirectional = match r.u8()? {
        0 => false,
        1 => true,
        b => return Err(format!("bad bidirectional flag {b}")),
    };
    let pos_injection = PosInjection::from_code(r.u8()?).ok_or("bad POS injection code")?;
    let pos_tagset_size = r.u32()?;
    let learning_rate = r.f64()?;
    let max_epochs = r.u32()?;
    let bptt = match (r.u8()?, r.u32()?) {
        (0, _) => BpttHorizon::Full,
        (1, k) => BpttHorizon::Truncated(k),
        (b, _) => return Err(format!("bad BPTT code {b}")),
    };
    let seed = r.u64()?;
    let config = RnnConfig {
        forward_size,
        compression_size,
        bidirectional,
        pos_injection,
        pos_tagset_size,
        learning_rate,
        max_epochs,
        bptt,
        seed,
    };
    let input_dim = r.u64()? as usize;
    let tagset = r.tagset()?;
    let pos_tagset = match r.u8()? {
        0 => None,
        1 => Some(r.tagset()?),
        b => return Err(format!("bad POS tagset flag {b}")),
    };
    let n = r.u32()?;
    r.expect_bytes(n, 8)?;
    let mut mats = Vec::with_capacity(n);
    for _ in 0..n {
        let rows = r.u32()?;
        let cols = r.u32()?;
        let data = r.f64s(rows.checked_mul(cols).ok_or("matrix size overflows")?)?;
        mats.push(Matrix::from_vec(rows, cols, data).ok_or("bad matrix shape")?);
    }
    r.finish()?;
    let weights = Weights::from_matrices(&config, mats).map_err(|e| e.to_string())?;
    RnnModel::from_parts(config, input_dim, tagset, pos_tagset, weights).map_err(|e| e.to_string())
}

fn encode_table(out: &mut Out, table: &BTreeMap<String, Vec<u64>>) {
    out.u64(table.len() as u64);
    for (k, row) in table {
        out.str(k);
        out.u64s(row);
    }
}

fn decode_table(r: &mut In<'_>, width: usize) -> Decode<BTreeMap<String, Vec<u64>>> {
    let n = r.u64()? as usize;
    r.expect_bytes(n, 4)?;
    let mut table = BTreeMap::new();
    for _ in 0..n {
        let k = r.str()?;
        let row = r.u64s(width)?;
        if table.insert(k, row).is_some() {
            return Err("duplicate table key".to_string());
        }
    }
    Ok(table)
}

pub fn encode_hmm(model: &HmmModel) -> Vec<u8> {
    let mut out = Out::new(HMM_MAGIC);
    let c = model.config();
    out.u64(c.rare_threshold);
    out.u32(c.max_suffix);
    out.tagset(model.tagset());
    let counts = model.counts();
    out.u64s(&counts.unigram);
    out.u64s(&counts.bigram);
    out.u64s(&counts.trigram);
    encode_table(&mut out, &counts.lexicon);
    encode_table(&mut out, &counts.suffixes);
    out.f64s(&model.lambdas());
    out.f64(model.theta());
    out.0
}

pub fn decode_hmm(bytes: &[u8]) -> Decode<HmmModel> {
    let mut r = In::new(bytes, HMM_MAGIC)?;
    let config = HmmConfig {
        rare_threshold: r.u64()?,
        max_suffix: r.u32()?,
    };
    let tagset = r.tagset()?;
    let t = tagset.len();
    let s = t + 1;
    let unigram = r.u64s(s)?;
    let bigram = r.u64s(s * s)?;
    let trigram = r.u64s(s * s * s)?;
    let lexicon = decode_table(&mut r, t)?;
    let suffixes = decode_table(&mut r, t)?;
    let lambdas = [r.f64()?, r.f64()?, r.f64()?];
    let theta = r.f64()?;
    r.finish()?;
    let counts = HmmCounts {
        unigram,
        bigram,
        trigram,
        lexicon,
        suffixes,
    };
    HmmModel::from_parts(tagset, config, counts, lambdas, theta).map_err(|e| e.to_string())
}

fn load<T>(path: &Path, decode: impl FnOnce(&[u8]) -> Decode<T>) -> Result<T> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes).map_err(|m| Error::data(path, m))
}

pub fn read_repr(path: &Path) -> Result<ReprTable> {
    load(path, decode_repr)
}

pub fn read_cbow(path: &Path) -> Result<CbowModel> {
    load(path, decode_cbow)
}

pub fn read_rnn(path: &Path) -> Result<RnnModel> {
    load(path, decode_rnn)
}

pub fn read_hmm(path: &Path) -> Result<HmmModel> {
    load(path, decode_hmm)
}
