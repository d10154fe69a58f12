//! On-disk formats.
//!
//! Tensor file (`MRLR1`): one ASCII header line
//! `MRLR1 <I> <N_1> ... <N_I>\n` followed by `prod N_i` little-endian f64
//! values in colexicographic order.
//!
//! Model file (`MRLRM1`):
//!
//! ```text
//! MRLRM1 <I> <N_1> ... <N_I>\n
//! <L>\n
//! then per stage:
//!   <partition> <rank> <nfe>\n          partition as "1,2|3", nfe or "nan"
//!   per reshaped mode: <rows> <cols>\n  followed by rows*cols LE f64, column-major
//! ```
//!
//! Sweep and report CSV: header `method,stage_ranks,params,nfe,sweeps,seconds,seed`,
//! stage ranks joined with `+`, reals with 9 significant digits.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::als::AlsTrace;
use crate::cp::FactorSet;
use crate::error::{Error, Result};
use crate::experiments::SweepRow;
use crate::mrlr::{MrlrModel, MrlrStage};
use crate::tensor::{DenseTensor, ModePartition};
use crate::Matrix;

pub const TENSOR_MAGIC: &str = "MRLR1";
pub const MODEL_MAGIC: &str = "MRLRM1";
pub const CSV_HEADER: &str = "method,stage_ranks,params,nfe,sweeps,seconds,seed";

const MAX_LINE: usize = 1 << 16;

fn push_f64s(buf: &mut Vec<u8>, values: &[f64]) {
    buf.reserve(values.len() * 8);
    for v in values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
}

fn shape_line(magic: &str, shape: &[usize]) -> String {
    let mut line = format!("{magic} {}", shape.len());
    for n in shape {
        line.push_str(&format!(" {n}"));
    }
    line.push('\n');
    line
}

pub fn encode_tensor(x: &DenseTensor) -> Vec<u8> {
    let mut buf = shape_line(TENSOR_MAGIC, x.shape()).into_bytes();
    push_f64s(&mut buf, x.data());
    buf
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, pos: 0 }
    }

    /// Next newline-terminated ASCII line, with its starting offset.
    fn line(&mut self) -> Result<(usize, &'a str)> {
        let start = self.pos;
        let rest = &self.bytes[start..];
        let end = rest
            .iter()
            .take(MAX_LINE)
            .position(|&b| b == b'\n')
            .ok_or_else(|| Error::MalformedHeader {
                offset: start,
                msg: "missing newline-terminated header line".into(),
            })?;
        let text = std::str::from_utf8(&rest[..end]).map_err(|_| Error::MalformedHeader {
            offset: start,
            msg: "header line is not ASCII".into(),
        })?;
        self.pos = start + end + 1;
        Ok((start, text))
    }

    fn f64s(&mut self, count: usize) -> Result<Vec<f64>> {
        let expected = count * 8;
        let actual = self.bytes.len() - self.pos;
        if actual < expected {
            return Err(Error::Truncated {
                offset: self.pos,
                expected,
                actual,
            });
        }
        let out = self.bytes[self.pos..self.pos + expected]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        self.pos += expected;
        Ok(out)
    }

    fn finish(&self) -> Result<()> {
        let extra = self.bytes.len() - self.pos;
        if extra > 0 {
            return Err(Error::TrailingBytes {
                offset: self.pos,
                extra,
            });
        }
        Ok(())
    }
}

/// Whitespace tokens of a line, each with its absolute byte offset.
fn tokens(offset: usize, line: &str) -> Vec<(usize, &str)> {
    let base = line.as_ptr() as usize;
    line.split(' ')
        .filter(|t| !t.is_empty())
        .map(|t| (offset + (t.as_ptr() as usize - base), t))
        .collect()
}

fn parse_num<T: std::str::FromStr>(offset: usize, tok: &str, what: &str) -> Result<T> {
    tok.parse().map_err(|_| Error::MalformedHeader {
        offset,
        msg: format!("{what} {tok:?} is not a number"),
    })
}

fn check_magic(bytes: &[u8], magic: &'static str) -> Result<()> {
    let head = &bytes[..bytes.len().min(magic.len() + 1)];
    let ok = head.len() == magic.len() + 1
        && &head[..magic.len()] == magic.as_bytes()
        && head[magic.len()] == b' ';
    if !ok {
        let found: String = String::from_utf8_lossy(&bytes[..bytes.len().min(8)]).into_owned();
        return Err(Error::BadMagic {
            expected: magic,
            found,
        });
    }
    Ok(())
}

/// Parses `MAGIC <I> <N_1> ... <N_I>` and validates the shape.
fn parse_shape_line(cur: &mut Cursor<'_>, magic: &'static str) -> Result<Vec<usize>> {
    check_magic(cur.bytes, magic)?;
    let (offset, line) = cur.line()?;
    let toks = tokens(offset, line);
    let (ooff, otok) = *toks.get(1).ok_or_else(|| Error::MalformedHeader {
        offset: offset + line.len(),
        msg: "missing tensor order".into(),
    })?;
    let order: usize = parse_num(ooff, otok, "order")?;
    if order == 0 {
        return Err(Error::MalformedHeader {
            offset: ooff,
            msg: "order must be at least 1".into(),
        });
    }
    if toks.len() != order + 2 {
        return Err(Error::MalformedHeader {
            offset,
            msg: format!("order {order} needs {order} mode sizes, found {}", toks.len() - 2),
        });
    }
    let shape = toks[2..]
        .iter()
        .map(|&(o, t)| {
            let n: usize = parse_num(o, t, "mode size")?;
            if n == 0 {
                return Err(Error::MalformedHeader {
                    offset: o,
                    msg: "mode sizes must be positive".into(),
                });
            }
            Ok(n)
        })
        .collect::<Result<Vec<_>>>()?;
    shape
        .iter()
        .try_fold(1usize, |acc, &n| acc.checked_mul(n))
        .ok_or_else(|| Error::MalformedHeader {
            offset,
            msg: format!("shape {shape:?} is too large"),
        })?;
    Ok(shape)
}

pub fn decode_tensor(bytes: &[u8]) -> Result<DenseTensor> {
    let mut cur = Cursor::new(bytes);
    let shape = parse_shape_line(&mut cur, TENSOR_MAGIC)?;
    let len = shape.iter().product();
    let data = cur.f64s(len)?;
    cur.finish()?;
    DenseTensor::new(shape, data)
}

pub fn write_tensor(path: impl AsRef<Path>, x: &DenseTensor) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_tensor(x)).map_err(|e| Error::io(path, e))
}

pub fn read_tensor(path: impl AsRef<Path>) -> Result<DenseTensor> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_tensor(&bytes)
}

/// A model together with the cumulative NFE recorded after each stage, if
/// known.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelFile {
    pub model: MrlrModel,
    pub stage_nfe: Vec<Option<f64>>,
}

pub fn encode_model(model: &MrlrModel, stage_nfe: &[Option<f64>]) -> Vec<u8> {
    let mut buf = shape_line(MODEL_MAGIC, model.shape()).into_bytes();
    buf.extend_from_slice(format!("{}\n", model.stages().len()).as_bytes());
    for (i, stage) in model.stages().iter().enumerate() {
        let nfe = match stage_nfe.get(i).copied().flatten() {
            Some(v) => format!("{v:e}"),
            None => "nan".into(),
        };
        buf.extend_from_slice(
            format!("{} {} {nfe}\n", stage.partition, stage.rank()).as_bytes(),
        );
        for f in stage.factors.factors() {
            buf.extend_from_slice(format!("{} {}\n", f.nrows(), f.ncols()).as_bytes());
            push_f64s(&mut buf, f.as_slice());
        }
    }
    buf
}

pub fn decode_model(bytes: &[u8]) -> Result<ModelFile> {
    let mut cur = Cursor::new(bytes);
    let shape = parse_shape_line(&mut cur, MODEL_MAGIC)?;
    let (off, line) = cur.line()?;
    let count: usize = parse_num(off, line.trim(), "stage count")?;
    let mut stages = Vec::with_capacity(count.min(1024));
    let mut stage_nfe = Vec::with_capacity(count.min(1024));
    for _ in 0..count {
        let (off, line) = cur.line()?;
        let toks = tokens(off, line);
        if toks.len() != 3 {
            return Err(Error::MalformedHeader {
                offset: off,
                msg: format!("stage line needs partition, rank and nfe: {line:?}"),
            });
        }
        let partition: ModePartition = toks[0].1.parse().map_err(|e| match e {
            Error::Parse(msg) | Error::InvalidPartition(msg) => Error::MalformedHeader {
                offset: toks[0].0,
                msg,
            },
            other => other,
        })?;
        let rank: usize = parse_num(toks[1].0, toks[1].1, "rank")?;
        let nfe: f64 = parse_num(toks[2].0, toks[2].1, "nfe")?;
        let reshaped = partition.reshaped_shape(&shape).map_err(|_| Error::MalformedHeader {
            offset: toks[0].0,
            msg: format!("partition {partition} does not fit shape {shape:?}"),
        })?;
        let mut factors = Vec::with_capacity(reshaped.len());
        for &expected_rows in &reshaped {
            let (off, line) = cur.line()?;
            let toks = tokens(off, line);
            if toks.len() != 2 {
                return Err(Error::MalformedHeader {
                    offset: off,
                    msg: format!("factor line needs rows and columns: {line:?}"),
                });
            }
            let rows: usize = parse_num(toks[0].0, toks[0].1, "row count")?;
            let cols: usize = parse_num(toks[1].0, toks[1].1, "column count")?;
            if rows != expected_rows || cols != rank {
                return Err(Error::MalformedHeader {
                    offset: off,
                    msg: format!("factor is {rows}x{cols}, expected {expected_rows}x{rank}"),
                });
            }
            let data = cur.f64s(rows * cols)?;
            factors.push(Matrix::from_vec(rows, cols, data));
        }
        stages.push(MrlrStage {
            partition,
            factors: FactorSet::new(factors)?,
            trace: AlsTrace::default(),
        });
        stage_nfe.push((!nfe.is_nan()).then_some(nfe));
    }
    cur.finish()?;
    Ok(ModelFile {
        model: MrlrModel::new(shape, stages)?,
        stage_nfe,
    })
}

pub fn write_model(
    path: impl AsRef<Path>,
    model: &MrlrModel,
    stage_nfe: &[Option<f64>],
) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_model(model, stage_nfe)).map_err(|e| Error::io(path, e))
}

pub fn read_model(path: impl AsRef<Path>) -> Result<ModelFile> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_model(&bytes)
}

/// Reals in CSV output: 9 significant digits, scientific notation.
pub fn format_real(v: f64) -> String {
    format!("{v:.8e}")
}

pub fn csv_line(row: &SweepRow) -> String {
    let ranks: Vec<String> = row.stage_ranks.iter().map(ToString::to_string).collect();
    format!(
        "{},{},{},{},{},{},{}",
        row.method,
        ranks.join("+"),
        row.params,
        format_real(row.nfe),
        row.sweeps,
        format_real(row.seconds),
        row.seed
    )
}

pub fn write_csv(mut out: impl Write, rows: &[SweepRow]) -> std::io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for row in rows {
        writeln!(out, "{}", csv_line(row))?;
    }
    Ok(())
}

pub fn write_csv_file(path: impl AsRef<Path>, rows: &[SweepRow]) -> Result<()> {
    let path = path.as_ref();
    let mut buf = Vec::new();
    write_csv(&mut buf, rows).map_err(|e| Error::io(path, e))?;
    fs::write(path, buf).map_err(|e| Error::io(path, e))
}
