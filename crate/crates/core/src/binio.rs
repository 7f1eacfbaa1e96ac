//! Little-endian primitives for the `ZSEB`, `ZSPM` and `ZSPC` formats.
//!
//! Every file starts with a 4-byte magic and a `u32` version. Strings are a
//! `u32` byte length followed by UTF-8 bytes.

use std::io::{self, Read, Write};

fn invalid(msg: String) -> io::Error {
    io::Error::new(io::ErrorKind::InvalidData, msg)
}

pub fn read_header(r: &mut impl Read, magic: &[u8; 4], version: u32) -> io::Result<()> {
    let mut got = [0u8; 4];
    r.read_exact(&mut got)?;
    if &got != magic {
        return Err(invalid(format!(
            "bad magic {:?}, expected {:?}",
            String::from_utf8_lossy(&got),
            String::from_utf8_lossy(magic)
        )));
    }
    let v = read_u32(r)?;
    if v != version {
        return Err(invalid(format!("unsupported version {v}, expected {version}")));
    }
    Ok(())
}

pub fn write_header(w: &mut impl Write, magic: &[u8; 4], version: u32) -> io::Result<()> {
    w.write_all(magic)?;
    write_u32(w, version)
}

pub fn read_u32(r: &mut impl Read) -> io::Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

pub fn write_u32(w: &mut impl Write, v: u32) -> io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

pub fn read_u64(r: &mut impl Read) -> io::Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

pub fn write_u64(w: &mut impl Write, v: u64) -> io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

/// Reads `n` f32 values, widened to f64.
pub fn read_f32s(r: &mut impl Read, n: usize) -> io::Result<Vec<f64>> {
    let mut out = Vec::with_capacity(n);
    let mut buf = vec![0u8; 4 * 8192];
    let mut left = n;
    while left > 0 {
        let take = left.min(8192);
        let bytes = &mut buf[..4 * take];
        r.read_exact(bytes)?;
        out.extend(
            bytes
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64),
        );
        left -= take;
    }
    Ok(out)
}

/// Writes values narrowed to f32.
pub fn write_f32s(w: &mut impl Write, values: impl IntoIterator<Item = f64>) -> io::Result<()> {
    for v in values {
        w.write_all(&(v as f32).to_le_bytes())?;
    }
    Ok(())
}

pub fn read_string(r: &mut impl Read) -> io::Result<String> {
    let len = read_u32(r)? as usize;
    let mut bytes = vec![0u8; len];
    r.read_exact(&mut bytes)?;
    String::from_utf8(bytes).map_err(|e| invalid(e.to_string()))
}

pub fn write_string(w: &mut impl Write, s: &str) -> io::Result<()> {
    let len = u32::try_from(s.len()).map_err(|_| invalid("string too long".into()))?;
    write_u32(w, len)?;
    w.write_all(s.as_bytes())
}
