//! Binary channel dump for cross-implementation regression.
//!
//! Little-endian throughout. A file starts with the magic `HPCH` and a `u32`
//! format version, followed by records until end of file:
//!
//! ```text
//! u32 n_tx, n_rx, n_clusters, n_rays
//! f64 angular_spread_deg
//! u64 master_seed, realization_index
//! f64 x 2 n_rx n_tx   H, row-major, re/im interleaved
//! u8  has_precoders
//! -- if has_precoders:
//! u32 n_s, n_rf
//! f64 rho
//! f64 x n_s           stream gains V_kk
//! c64 F_RF (n_tx x n_rf), F_BB (n_rf x n_s), W_RF (n_rx x n_rf), U_BB (n_rf x n_s)
//! ```
//!
//! where `c64` matrices use the same row-major interleaved layout as `H`.

use std::io::{self, Read, Write};

use crate::channel::{ChannelMatrix, ChannelParams};
use crate::linalg::CMatrix;
use crate::montecarlo::{draw_design, ExperimentConfig};
use crate::precoding::PrecoderSet;
use crate::{Error, Result, C64};

pub const MAGIC: [u8; 4] = *b"HPCH";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRecord {
    pub params: ChannelParams,
    pub master_seed: u64,
    pub realization_index: u64,
    pub h: CMatrix,
    pub precoders: Option<PrecoderSet>,
}

pub fn write_header<W: Write>(w: &mut W) -> Result<()> {
    w.write_all(&MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    Ok(())
}

fn put_u32<W: Write>(w: &mut W, v: usize) -> Result<()> {
    let v = u32::try_from(v).map_err(|_| Error::Dump(format!("{v} does not fit in u32")))?;
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn put_matrix<W: Write>(w: &mut W, m: &CMatrix) -> Result<()> {
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            let z = m[(i, j)];
            w.write_all(&z.re.to_le_bytes())?;
            w.write_all(&z.im.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn write_record<W: Write>(w: &mut W, rec: &ChannelRecord) -> Result<()> {
    let p = &rec.params;
    if rec.h.shape() != (p.n_rx, p.n_tx) {
        return Err(Error::DimensionMismatch(format!(
            "H is {:?}, params say {}x{}",
            rec.h.shape(),
            p.n_rx,
            p.n_tx
        )));
    }
    for v in [p.n_tx, p.n_rx, p.n_clusters, p.n_rays] {
        put_u32(w, v)?;
    }
    w.write_all(&p.angular_spread_deg.to_le_bytes())?;
    w.write_all(&rec.master_seed.to_le_bytes())?;
    w.write_all(&rec.realization_index.to_le_bytes())?;
    put_matrix(w, &rec.h)?;
    match &rec.precoders {
        None => w.write_all(&[0])?,
        Some(ps) => {
            w.write_all(&[1])?;
            put_u32(w, ps.n_s())?;
            put_u32(w, ps.n_rf())?;
            w.write_all(&ps.rho.to_le_bytes())?;
            for v in &ps.v_diag {
                w.write_all(&v.to_le_bytes())?;
            }
            for m in [&ps.f_rf, &ps.f_bb, &ps.w_rf, &ps.u_bb] {
                put_matrix(w, m)?;
            }
        }
    }
    Ok(())
}

struct Cursor<R> {
    inner: R,
}

impl<R: Read> Cursor<R> {
    fn bytes<const N: usize>(&mut self) -> Result<[u8; N]> {
        let mut b = [0u8; N];
        self.inner.read_exact(&mut b).map_err(truncated)?;
        Ok(b)
    }

    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.bytes()?) as usize)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.bytes()?))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.bytes()?))
    }

    fn matrix(&mut self, rows: usize, cols: usize) -> Result<CMatrix> {
        let mut m = CMatrix::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                let re = self.f64()?;
                let im = self.f64()?;
                m[(i, j)] = C64::new(re, im);
            }
        }
        Ok(m)
    }

    /// `Ok(None)` at a clean end of file.
    fn at_eof(&mut self) -> Result<Option<u8>> {
        let mut b = [0u8; 1];
        loop {
            match self.inner.read(&mut b) {
                Ok(0) => return Ok(None),
                Ok(_) => return Ok(Some(b[0])),
                Err(e) if e.kind() == io::ErrorKind::Interrupted => continue,
                Err(e) => return Err(e.into()),
            }
        }
    }
}

fn truncated(e: io::Error) -> Error {
    if e.kind() == io::ErrorKind::UnexpectedEof {
        Error::Dump("truncated record".into())
    } else {
        e.into()
    }
}

const MAX_DIM: usize = 1 << 16;

fn check_dim(name: &str, v: usize) -> Result<usize> {
    if v == 0 || v > MAX_DIM {
        return Err(Error::Dump(format!("implausible {name} = {v}")));
    }
    Ok(v)
}

pub fn read_dump<R: Read>(input: R) -> Result<Vec<ChannelRecord>> {
    let mut c = Cursor { inner: input };
    let magic: [u8; 4] = c.bytes().map_err(|_| Error::Dump("missing header".into()))?;
    if magic != MAGIC {
        return Err(Error::Dump(format!("bad magic {magic:?}")));
    }
    let version = c.u32()? as u32;
    if version != VERSION {
        return Err(Error::Dump(format!("unsupported version {version}")));
    }
    let mut out = Vec::new();
    while let Some(first) = c.at_eof()? {
        let rest: [u8; 3] = c.bytes()?;
        let n_tx = check_dim("n_tx", u32::from_le_bytes([first, rest[0], rest[1], rest[2]]) as usize)?;
        let n_rx = check_dim("n_rx", c.u32()?)?;
        let params = ChannelParams {
            n_tx,
            n_rx,
            n_clusters: c.u32()?,
            n_rays: c.u32()?,
            angular_spread_deg: c.f64()?,
        };
        let master_seed = c.u64()?;
        let realization_index = c.u64()?;
        let h = c.matrix(n_rx, n_tx)?;
        let flag: [u8; 1] = c.bytes()?;
        let precoders = match flag[0] {
            0 => None,
            1 => {
                let n_s = check_dim("n_s", c.u32()?)?;
                let n_rf = check_dim("n_rf", c.u32()?)?;
                let rho = c.f64()?;
                let v_diag = (0..n_s).map(|_| c.f64()).collect::<Result<Vec<_>>>()?;
                Some(PrecoderSet {
                    f_rf: c.matrix(n_tx, n_rf)?,
                    f_bb: c.matrix(n_rf, n_s)?,
                    w_rf: c.matrix(n_rx, n_rf)?,
                    u_bb: c.matrix(n_rf, n_s)?,
                    v_diag,
                    rho,
                })
            }
            other => return Err(Error::Dump(format!("bad precoder flag {other}"))),
        };
        out.push(ChannelRecord {
            params,
            master_seed,
            realization_index,
            h,
            precoders,
        });
    }
    Ok(out)
}

/// Dumps realisations `0..n` of an experiment exactly as the sweeps draw them.
pub fn dump_experiment<W: Write>(
    w: &mut W,
    cfg: &ExperimentConfig,
    n: usize,
    with_precoders: bool,
) -> Result<()> {
    cfg.validate()?;
    write_header(w)?;
    for i in 0..n as u64 {
        let (ch, design, _) = draw_design(&cfg.channel, cfg.n_s, cfg.n_rf, &cfg.altmin, cfg.master_seed, i)?;
        write_record(
            w,
            &ChannelRecord {
                params: cfg.channel,
                master_seed: cfg.master_seed,
                realization_index: i,
                h: ch.h,
                precoders: with_precoders.then_some(design.precoders),
            },
        )?;
    }
    Ok(())
}

impl ChannelRecord {
    pub fn channel(&self) -> ChannelMatrix {
        ChannelMatrix::from_matrix(self.h.clone())
    }
}
