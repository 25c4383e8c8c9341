//! Binary net format, all integers and floats little-endian:
//!
//! ```text
//! magic        8 bytes  "VSCLNET\0"
//! version      u32      1
//! inputs       u32
//! hidden       u32
//! seed         u64
//! digest       u32 length + UTF-8 (training-data digest)
//! names        u32 count, then u32 length + UTF-8 each
//! w_hidden     f64 x hidden*inputs, row-major
//! b_hidden     f64 x hidden
//! w_out        f64 x hidden
//! b_out        f64
//! x_min, x_max f64 x inputs each
//! y_min, y_max f64
//! checksum     32 bytes, SHA-256 of everything above
//! ```

use std::fs;
use std::io::Write;
use std::path::Path;

use sha2::{Digest, Sha256};

use super::{NetMetadata, SurrogateNet};
use crate::{Error, Result};

const MAGIC: &[u8; 8] = b"VSCLNET\0";
pub const FORMAT_VERSION: u32 = 1;

impl SurrogateNet {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut b = Vec::new();
        b.extend_from_slice(MAGIC);
        b.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        b.extend_from_slice(&(self.inputs as u32).to_le_bytes());
        b.extend_from_slice(&(self.hidden as u32).to_le_bytes());
        b.extend_from_slice(&self.meta.seed.to_le_bytes());
        put_str(&mut b, &self.meta.training_digest);
        b.extend_from_slice(&(self.meta.input_names.len() as u32).to_le_bytes());
        for n in &self.meta.input_names {
            put_str(&mut b, n);
        }
        let floats = self
            .w_hidden
            .iter()
            .chain(&self.b_hidden)
            .chain(&self.w_out)
            .chain(std::iter::once(&self.b_out))
            .chain(&self.x_min)
            .chain(&self.x_max)
            .chain([&self.y_min, &self.y_max]);
        for v in floats {
            b.extend_from_slice(&v.to_le_bytes());
        }
        let sum = Sha256::digest(&b);
        b.extend_from_slice(&sum);
        b
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < MAGIC.len() || &bytes[..MAGIC.len()] != MAGIC {
            return Err(Error::Format("not a surrogate network file (bad magic)".into()));
        }
        if bytes.len() < MAGIC.len() + 4 + 32 {
            return Err(Error::Format("truncated network file".into()));
        }
        let (body, sum) = bytes.split_at(bytes.len() - 32);
        let mut r = Reader { buf: body, pos: MAGIC.len() };
        let version = r.u32()?;
        if version != FORMAT_VERSION {
            return Err(Error::Format(format!("network format version {version}, expected {FORMAT_VERSION}")));
        }
        if Sha256::digest(body).as_slice() != sum {
            return Err(Error::Format("network file checksum mismatch".into()));
        }
        let inputs = r.u32()? as usize;
        let hidden = r.u32()? as usize;
        let seed = r.u64()?;
        let training_digest = r.string()?;
        let n_names = r.u32()? as usize;
        let input_names = (0..n_names).map(|_| r.string()).collect::<Result<Vec<_>>>()?;
        let w_hidden = r.f64s(hidden * inputs)?;
        let b_hidden = r.f64s(hidden)?;
        let w_out = r.f64s(hidden)?;
        let b_out = r.f64()?;
        let x_min = r.f64s(inputs)?;
        let x_max = r.f64s(inputs)?;
        let y_min = r.f64()?;
        let y_max = r.f64()?;
        if r.pos != body.len() {
            return Err(Error::Format("trailing bytes in network file".into()));
        }
        let net = SurrogateNet {
            inputs,
            hidden,
            w_hidden,
            b_hidden,
            w_out,
            b_out,
            x_min,
            x_max,
            y_min,
            y_max,
            meta: NetMetadata { seed, training_digest, input_names },
        };
        net.validate().map_err(|e| Error::Format(format!("inconsistent network file: {e}")))?;
        Ok(net)
    }

    /// Writes the net through a temporary file and a rename.
    pub fn save(&self, path: &Path) -> Result<()> {
        let tmp = path.with_extension("tmp");
        {
            let mut f = fs::File::create(&tmp)?;
            f.write_all(&self.to_bytes())?;
            f.sync_all()?;
        }
        fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }
}

fn put_str(b: &mut Vec<u8>, s: &str) {
    b.extend_from_slice(&(s.len() as u32).to_le_bytes());
    b.extend_from_slice(s.as_bytes());
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or_else(|| Error::Format("truncated network file".into()))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        (0..n).map(|_| self.f64()).collect()
    }

    fn string(&mut self) -> Result<String> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| Error::Format("invalid UTF-8 in network file".into()))
    }
}
