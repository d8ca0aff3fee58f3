//! Bit-packed configuration files.
//!
//! Layout (little endian):
//!
//! ```text
//! 0   8  magic  b"PERCLAB\0"
//! 8   4  format version (u32, currently 1)
//! 12  1  kind   (0 = triangular-site, 1 = square-fk)
//! 13  3  reserved, zero
//! 16  8  eta          (f64)
//! 24  8  k            (f64)
//! 32  8  p            (f64)
//! 40  8  seed         (u64)
//! 48  8  sample_index (u64)
//! 56  .. payload, 1 bit per entry, LSB first, zero padded to a byte
//! ```
//!
//! The payload is the site colours (1 = red) in row-major vertex order for triangular
//! configurations; for FK configurations it is the bond states (1 = open) in edge order
//! followed by the spins (1 = +1) in vertex order.

use std::io::{Read, Write};

use super::{FkConfig, LatticeKind, MeshSpec, SiteConfig};
use crate::error::{ensure, Error, Result};

pub const MAGIC: [u8; 8] = *b"PERCLAB\0";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 56;

fn pack(bits: impl Iterator<Item = bool>, out: &mut Vec<u8>) {
    let mut byte = 0u8;
    let mut n = 0;
    for b in bits {
        if b {
            byte |= 1 << n;
        }
        n += 1;
        if n == 8 {
            out.push(byte);
            byte = 0;
            n = 0;
        }
    }
    if n > 0 {
        out.push(byte);
    }
}

fn unpack(bytes: &[u8], count: usize) -> Vec<bool> {
    (0..count).map(|i| bytes[i / 8] >> (i % 8) & 1 == 1).collect()
}

fn header(spec: &MeshSpec) -> Vec<u8> {
    let mut h = Vec::with_capacity(HEADER_LEN);
    h.extend_from_slice(&MAGIC);
    h.extend_from_slice(&VERSION.to_le_bytes());
    h.push(match spec.kind {
        LatticeKind::TriangularSite => 0,
        LatticeKind::SquareFk => 1,
    });
    h.extend_from_slice(&[0, 0, 0]);
    h.extend_from_slice(&spec.eta.to_le_bytes());
    h.extend_from_slice(&spec.k.to_le_bytes());
    h.extend_from_slice(&spec.p.to_le_bytes());
    h.extend_from_slice(&spec.seed.to_le_bytes());
    h.extend_from_slice(&spec.sample_index.to_le_bytes());
    h
}

fn parse_header(bytes: &[u8]) -> Result<MeshSpec> {
    ensure!(bytes.len() >= HEADER_LEN, Format, "file shorter than the {HEADER_LEN}-byte header");
    ensure!(bytes[..8] == MAGIC, Format, "bad magic");
    let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    ensure!(version == VERSION, Format, "unsupported format version {version}");
    let kind = match bytes[12] {
        0 => LatticeKind::TriangularSite,
        1 => LatticeKind::SquareFk,
        other => return Err(Error::Format(format!("unknown lattice kind tag {other}"))),
    };
    let f = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    let u = |o: usize| u64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    let spec = MeshSpec { kind, eta: f(16), k: f(24), p: f(32), seed: u(40), sample_index: u(48) };
    spec.validate()?;
    Ok(spec)
}

pub fn encode_site(cfg: &SiteConfig) -> Vec<u8> {
    let mut out = header(&cfg.spec);
    pack(cfg.colors.iter().copied(), &mut out);
    out
}

pub fn encode_fk(cfg: &FkConfig) -> Vec<u8> {
    let mut out = header(&cfg.spec);
    let bits = cfg.bonds.iter().copied().chain(cfg.spins.iter().map(|&s| s > 0));
    pack(bits, &mut out);
    out
}

/// A decoded configuration of either kind.
#[derive(Debug, Clone)]
pub enum Decoded {
    Site(SiteConfig),
    Fk(FkConfig),
}

pub fn decode(bytes: &[u8]) -> Result<Decoded> {
    let spec = parse_header(bytes)?;
    let lattice = spec.lattice()?;
    let payload = &bytes[HEADER_LEN..];
    let bits = match spec.kind {
        LatticeKind::TriangularSite => lattice.len(),
        LatticeKind::SquareFk => lattice.edge_count() + lattice.len(),
    };
    ensure!(payload.len() == bits.div_ceil(8), Format, "payload has {} bytes, expected {}", payload.len(), bits.div_ceil(8));
    let flags = unpack(payload, bits);
    Ok(match spec.kind {
        LatticeKind::TriangularSite => Decoded::Site(SiteConfig::from_colors(spec, lattice, flags)?),
        LatticeKind::SquareFk => {
            let m = lattice.edge_count();
            let bonds = flags[..m].to_vec();
            let spins = flags[m..].iter().map(|&b| if b { 1 } else { -1 }).collect();
            Decoded::Fk(FkConfig::from_parts(spec, lattice, bonds, spins)?)
        }
    })
}

pub fn write_to(w: &mut impl Write, bytes: &[u8]) -> Result<()> {
    w.write_all(bytes)?;
    Ok(())
}

pub fn read_from(r: &mut impl Read) -> Result<Decoded> {
    let mut buf = Vec::new();
    r.read_to_end(&mut buf)?;
    decode(&buf)
}
