//! On-disk parameter storage: a directory holding `manifest.txt` (one
//! `key = value` per line) and `tensors.bin` (little-endian f64 tensors).

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use super::Parameters;
use crate::error::{Error, Result};
use crate::fsutil::{read_to_string, write_atomic, write_string_atomic};

pub const CHECKPOINT_VERSION: u32 = 1;

const MAGIC: &[u8; 8] = b"WALKTNSR";
const MANIFEST: &str = "manifest.txt";
const TENSORS: &str = "tensors.bin";

#[derive(Debug, Clone, PartialEq)]
pub struct NamedArray {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Checkpoint {
    pub manifest: BTreeMap<String, String>,
    pub tensors: Vec<NamedArray>,
}

impl Checkpoint {
    pub fn get(&self, key: &str) -> Result<&str> {
        self.manifest
            .get(key)
            .map(String::as_str)
            .ok_or_else(|| Error::Config(format!("checkpoint manifest lacks {key:?}")))
    }

    pub fn parse<T: FromStr>(&self, key: &str) -> Result<T> {
        self.parse_value(key, self.get(key)?)
    }

    pub fn parse_value<T: FromStr>(&self, key: &str, value: &str) -> Result<T> {
        value
            .parse()
            .map_err(|_| Error::Config(format!("bad checkpoint value {key} = {value:?}")))
    }

    /// Copies stored tensors into `params`, matching by name and shape.
    pub fn fill<P: Parameters + ?Sized>(&self, params: &mut P) -> Result<()> {
        let mut by_name: BTreeMap<&str, &NamedArray> =
            self.tensors.iter().map(|t| (t.name.as_str(), t)).collect();
        for t in params.tensors_mut() {
            let stored = by_name
                .remove(t.name.as_str())
                .ok_or_else(|| Error::Config(format!("checkpoint lacks tensor {}", t.name)))?;
            if stored.shape != t.shape {
                return Err(Error::dims(format!("{} {:?}", t.name, t.shape), format!("{:?}", stored.shape)));
            }
            t.data.copy_from_slice(&stored.data);
        }
        if let Some(extra) = by_name.keys().next() {
            return Err(Error::Config(format!("unexpected checkpoint tensor {extra}")));
        }
        Ok(())
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut text = String::new();
        for (k, v) in &self.manifest {
            if k.contains(['=', '\n']) || v.contains('\n') {
                return Err(Error::Config(format!("unstorable manifest entry {k:?}")));
            }
            text.push_str(&format!("{k} = {v}\n"));
        }
        write_atomic(&dir.join(TENSORS), |w| self.write_tensors(w))?;
        write_string_atomic(&dir.join(MANIFEST), &text)
    }

    fn write_tensors(&self, w: &mut dyn Write) -> std::io::Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
        w.write_all(&(self.tensors.len() as u32).to_le_bytes())?;
        for t in &self.tensors {
            w.write_all(&(t.name.len() as u32).to_le_bytes())?;
            w.write_all(t.name.as_bytes())?;
            w.write_all(&(t.shape.len() as u32).to_le_bytes())?;
            for &d in &t.shape {
                w.write_all(&(d as u64).to_le_bytes())?;
            }
            w.write_all(&((t.data.len() * 8) as u64).to_le_bytes())?;
            for x in &t.data {
                w.write_all(&x.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let manifest_path = dir.join(MANIFEST);
        let text = read_to_string(&manifest_path)?;
        let mut manifest = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Error::parse(format!("{}:{}", manifest_path.display(), i + 1), "expected key = value")
            })?;
            manifest.insert(k.trim().to_string(), v.trim().to_string());
        }
        let tensor_path = dir.join(TENSORS);
        let bytes = std::fs::read(&tensor_path).map_err(|e| Error::io(&tensor_path, e))?;
        let tensors = parse_tensors(&bytes)
            .map_err(|m| Error::parse(tensor_path.display().to_string(), m))?;
        let ckpt = Checkpoint { manifest, tensors };
        if let Some(v) = ckpt.manifest.get("version") {
            if v != &CHECKPOINT_VERSION.to_string() {
                return Err(Error::Config(format!("unsupported checkpoint version {v}")));
            }
        }
        Ok(ckpt)
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> std::result::Result<&'a [u8], String> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| format!("truncated at byte {}", self.pos))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> std::result::Result<u32, String> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> std::result::Result<u64, String> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

fn parse_tensors(bytes: &[u8]) -> std::result::Result<Vec<NamedArray>, String> {
    let mut c = Cursor { bytes, pos: 0 };
    if c.take(MAGIC.len())? != MAGIC {
        return Err("not a tensor file".into());
    }
    let version = c.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(format!("unsupported tensor file version {version}"));
    }
    let count = c.u32()?;
    let mut out = Vec::new();
    for _ in 0..count {
        let len = c.u32()? as usize;
        let name = String::from_utf8(c.take(len)?.to_vec()).map_err(|_| "non-UTF-8 tensor name")?;
        let ndim = c.u32()? as usize;
        let shape = (0..ndim)
            .map(|_| c.u64().map(|d| d as usize))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        let byte_len = c.u64()? as usize;
        let expected = shape.iter().product::<usize>() * 8;
        if byte_len != expected {
            return Err(format!("tensor {name}: {byte_len} bytes for shape {shape:?}"));
        }
        let data = c
            .take(byte_len)?
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
            .collect();
        out.push(NamedArray { name, shape, data });
    }
    if c.pos != bytes.len() {
        return Err("trailing bytes after last tensor".into());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{InputFeatures, NetDims, WalkNet};

    fn dims() -> NetDims {
        NetDims {
            lift: Some(4),
            hidden: 6,
            layers: 2,
            classes: 3,
            features: InputFeatures::Coordinates,
        }
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let net = WalkNet::new(dims(), 7).unwrap();
        let mut extra = BTreeMap::new();
        extra.insert("imitates".to_string(), "victim-a".to_string());
        net.to_checkpoint(&extra).save(dir.path()).unwrap();
        let ckpt = Checkpoint::load(dir.path()).unwrap();
        assert_eq!(ckpt.get("imitates").unwrap(), "victim-a");
        let back = WalkNet::from_checkpoint(&ckpt).unwrap();
        assert_eq!(back, net);
        let bits = |n: &WalkNet| n.flatten().iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&back), bits(&net));
    }

    #[test]
    fn corrupt_files_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let net = WalkNet::new(dims(), 1).unwrap();
        net.to_checkpoint(&BTreeMap::new()).save(dir.path()).unwrap();
        let path = dir.path().join(TENSORS);
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 3]).unwrap();
        assert!(matches!(Checkpoint::load(dir.path()), Err(Error::Parse { .. })));
        std::fs::write(&path, b"garbage").unwrap();
        assert!(Checkpoint::load(dir.path()).is_err());
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let net = WalkNet::new(dims(), 1).unwrap();
        let mut ckpt = net.to_checkpoint(&BTreeMap::new());
        ckpt.manifest.insert("hidden".into(), "5".into());
        assert!(WalkNet::from_checkpoint(&ckpt).is_err());
    }
}
