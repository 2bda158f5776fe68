//! Serialization of keys and signatures.
//!
//! The text form is a JSON object with fields in this order: `format`,
//! `params_digest`, then the payload (`key` or `signature`). Ring elements are
//! arrays of integer coefficients.
//!
//! The binary form is `b"GGR1"`, a kind byte, the 32-byte params digest, and
//! a list of sections. Each section is `rows: u32, cols: u32, n: u32` followed
//! by `rows * cols * n` little-endian `i64` coefficients. An absent optional
//! section is written with `rows = 0`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{SchemeParams, Variant};
use crate::ring::RingElement;
use crate::scheme::{PublicKey, SecretKey, Signature};

const MAGIC: &[u8; 4] = b"GGR1";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u8)]
pub enum ArtifactKind {
    PublicKey = 1,
    SecretKey = 2,
    Signature = 3,
}

impl ArtifactKind {
    fn name(self) -> &'static str {
        match self {
            ArtifactKind::PublicKey => "ggratio-public-key",
            ArtifactKind::SecretKey => "ggratio-secret-key",
            ArtifactKind::Signature => "ggratio-signature",
        }
    }
}

#[derive(Serialize, Deserialize)]
struct KeyEnvelope<T> {
    format: String,
    params_digest: String,
    key: T,
}

#[derive(Serialize, Deserialize)]
struct SignatureEnvelope {
    format: String,
    params_digest: String,
    signature: Signature,
}

fn check_format(kind: ArtifactKind, format: &str) -> Result<()> {
    if format != kind.name() {
        return Err(Error::Malformed(format!(
            "expected format {}, found {format}",
            kind.name()
        )));
    }
    Ok(())
}

fn key_to_json<T: Serialize>(kind: ArtifactKind, params: &SchemeParams, key: &T) -> Result<String> {
    let env = KeyEnvelope {
        format: kind.name().to_string(),
        params_digest: params.digest(),
        key,
    };
    Ok(serde_json::to_string_pretty(&env)? + "\n")
}

fn key_from_json<T: for<'de> Deserialize<'de>>(
    kind: ArtifactKind,
    params: &SchemeParams,
    text: &str,
) -> Result<T> {
    let env: KeyEnvelope<T> =
        serde_json::from_str(text).map_err(|e| Error::Malformed(format!("{}: {e}", kind.name())))?;
    check_format(kind, &env.format)?;
    check_digest(params, &env.params_digest)?;
    Ok(env.key)
}

fn check_digest(params: &SchemeParams, digest: &str) -> Result<()> {
    if digest != params.digest() {
        return Err(Error::Malformed(format!(
            "artifact was produced under different parameters (digest {digest})"
        )));
    }
    Ok(())
}

pub fn public_key_to_json(pk: &PublicKey, params: &SchemeParams) -> Result<String> {
    key_to_json(ArtifactKind::PublicKey, params, pk)
}

pub fn public_key_from_json(text: &str, params: &SchemeParams) -> Result<PublicKey> {
    let pk: PublicKey = key_from_json(ArtifactKind::PublicKey, params, text)?;
    check_public_key(&pk, params)?;
    Ok(pk)
}

pub fn secret_key_to_json(sk: &SecretKey, params: &SchemeParams) -> Result<String> {
    key_to_json(ArtifactKind::SecretKey, params, sk)
}

pub fn secret_key_from_json(text: &str, params: &SchemeParams) -> Result<SecretKey> {
    let sk: SecretKey = key_from_json(ArtifactKind::SecretKey, params, text)?;
    check_blocks(&sk.s, params.k, params.n, "secret key")?;
    Ok(sk)
}

pub fn signature_to_json(sig: &Signature, params: &SchemeParams) -> Result<String> {
    let env = SignatureEnvelope {
        format: ArtifactKind::Signature.name().to_string(),
        params_digest: params.digest(),
        signature: sig.clone(),
    };
    Ok(serde_json::to_string_pretty(&env)? + "\n")
}

pub fn signature_from_json(text: &str, params: &SchemeParams) -> Result<Signature> {
    let env: SignatureEnvelope = serde_json::from_str(text)
        .map_err(|e| Error::Malformed(format!("{}: {e}", ArtifactKind::Signature.name())))?;
    check_format(ArtifactKind::Signature, &env.format)?;
    check_digest(params, &env.params_digest)?;
    let sig = env.signature;
    check_blocks(&sig.z, params.k, params.n, "signature z")?;
    check_blocks(std::slice::from_ref(&sig.c), 1, params.n, "signature c")?;
    Ok(sig)
}

fn check_blocks(v: &[RingElement], len: usize, n: usize, what: &str) -> Result<()> {
    if v.len() != len || v.iter().any(|e| e.n() != n) {
        return Err(Error::Malformed(format!(
            "{what}: expected {len} ring elements of degree {n}"
        )));
    }
    Ok(())
}

fn check_public_key(pk: &PublicKey, params: &SchemeParams) -> Result<()> {
    if pk.variant != params.variant || pk.a.len() != params.m {
        return Err(Error::Malformed("public key does not match the parameter set".into()));
    }
    for row in &pk.a {
        check_blocks(row, params.k, params.n, "public matrix row")?;
    }
    Ok(())
}

struct Writer(Vec<u8>);

impl Writer {
    fn new(kind: ArtifactKind, params: &SchemeParams) -> Result<Self> {
        let mut buf = MAGIC.to_vec();
        buf.push(kind as u8);
        buf.extend(hex::decode(params.digest()).map_err(|e| Error::Malformed(e.to_string()))?);
        Ok(Writer(buf))
    }

    fn section(&mut self, rows: &[Vec<RingElement>]) {
        let cols = rows.first().map_or(0, Vec::len);
        let n = rows.first().and_then(|r| r.first()).map_or(0, RingElement::n);
        for x in [rows.len(), cols, n] {
            self.0.extend((x as u32).to_le_bytes());
        }
        for e in rows.iter().flatten() {
            for &c in e.coeffs() {
                self.0.extend(c.to_le_bytes());
            }
        }
    }

    fn optional(&mut self, v: &Option<Vec<RingElement>>) {
        match v {
            Some(v) => self.section(std::slice::from_ref(v)),
            None => self.section(&[]),
        }
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(buf: &'a [u8], kind: ArtifactKind, params: &SchemeParams) -> Result<Self> {
        if buf.len() < 37 || &buf[..4] != MAGIC {
            return Err(Error::Malformed("not a ggratio binary artifact".into()));
        }
        if buf[4] != kind as u8 {
            return Err(Error::Malformed(format!("expected a {} artifact", kind.name())));
        }
        check_digest(params, &hex::encode(&buf[5..37]))?;
        Ok(Reader { buf, pos: 37 })
    }

    fn take(&mut self, len: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(len)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| Error::Malformed("binary artifact is truncated".into()))?;
        let out = &self.buf[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()) as usize)
    }

    fn section(&mut self) -> Result<Vec<Vec<RingElement>>> {
        let (rows, cols, n) = (self.u32()?, self.u32()?, self.u32()?);
        let total = rows
            .checked_mul(cols)
            .and_then(|x| x.checked_mul(n))
            .and_then(|x| x.checked_mul(8))
            .ok_or_else(|| Error::Malformed("section size overflows".into()))?;
        let bytes = self.take(total)?;
        let mut words = bytes.chunks_exact(8).map(|b| i64::from_le_bytes(b.try_into().unwrap()));
        (0..rows)
            .map(|_| {
                (0..cols)
                    .map(|_| RingElement::new(words.by_ref().take(n).collect()))
                    .collect()
            })
            .collect()
    }

    fn row(&mut self) -> Result<Vec<RingElement>> {
        Ok(self.section()?.into_iter().next().unwrap_or_default())
    }

    fn optional(&mut self) -> Result<Option<Vec<RingElement>>> {
        Ok(self.section()?.into_iter().next())
    }

    fn finish(self) -> Result<()> {
        if self.pos != self.buf.len() {
            return Err(Error::Malformed("trailing bytes in binary artifact".into()));
        }
        Ok(())
    }
}

pub fn public_key_to_bytes(pk: &PublicKey, params: &SchemeParams) -> Result<Vec<u8>> {
    let mut w = Writer::new(ArtifactKind::PublicKey, params)?;
    w.section(&pk.a);
    w.section(std::slice::from_ref(&pk.b));
    w.section(&pk.a0);
    w.optional(&pk.offset);
    w.optional(&pk.b0);
    w.optional(&pk.b1);
    Ok(w.0)
}

pub fn public_key_from_bytes(buf: &[u8], params: &SchemeParams) -> Result<PublicKey> {
    let mut r = Reader::new(buf, ArtifactKind::PublicKey, params)?;
    let pk = PublicKey {
        variant: params.variant,
        a: r.section()?,
        b: r.row()?,
        a0: r.section()?,
        offset: r.optional()?,
        b0: r.optional()?,
        b1: r.optional()?,
    };
    r.finish()?;
    check_public_key(&pk, params)?;
    if params.variant == Variant::Generic && pk.offset.is_some() {
        return Err(Error::Malformed("generic public key carries module fields".into()));
    }
    Ok(pk)
}

pub fn secret_key_to_bytes(sk: &SecretKey, params: &SchemeParams) -> Result<Vec<u8>> {
    let mut w = Writer::new(ArtifactKind::SecretKey, params)?;
    w.section(std::slice::from_ref(&sk.s));
    Ok(w.0)
}

pub fn secret_key_from_bytes(buf: &[u8], params: &SchemeParams) -> Result<SecretKey> {
    let mut r = Reader::new(buf, ArtifactKind::SecretKey, params)?;
    let sk = SecretKey { s: r.row()? };
    r.finish()?;
    check_blocks(&sk.s, params.k, params.n, "secret key")?;
    Ok(sk)
}

pub fn signature_to_bytes(sig: &Signature, params: &SchemeParams) -> Result<Vec<u8>> {
    let mut w = Writer::new(ArtifactKind::Signature, params)?;
    w.section(std::slice::from_ref(&sig.z));
    w.section(&[vec![sig.c.clone()]]);
    Ok(w.0)
}

pub fn signature_from_bytes(buf: &[u8], params: &SchemeParams) -> Result<Signature> {
    let mut r = Reader::new(buf, ArtifactKind::Signature, params)?;
    let z = r.row()?;
    let c = r
        .row()?
        .into_iter()
        .next()
        .ok_or_else(|| Error::Malformed("signature has no challenge".into()))?;
    r.finish()?;
    let sig = Signature { z, c };
    check_blocks(&sig.z, params.k, params.n, "signature z")?;
    check_blocks(std::slice::from_ref(&sig.c), 1, params.n, "signature c")?;
    Ok(sig)
}
