//! Append-only trajectory files.
//!
//! ```text
//! cgq-trajectory 1
//! label lorenz
//! config <sha256>
//! q 3
//! digits 64
//! bits 256
//! dim 3
//! intervals 6000
//! T 30
//! ---
//! <m> <t_left> <t_right> <U_0 components> ... <U_q components>
//! ```
//!
//! Each interval is one line written after it is solved, so a killed run
//! leaves a valid prefix that `solve` resumes from.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::discretization::Partition;
use crate::error::{Error, Result};
use crate::numerics::{PrecisionContext, Real, Vector};

const MAGIC: &str = "cgq-trajectory 1";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrajectoryHeader {
    pub label: String,
    pub config_hash: String,
    pub q: usize,
    pub digits: u32,
    pub bits: u32,
    pub dim: usize,
    pub intervals: usize,
    pub end: String,
}

impl TrajectoryHeader {
    fn render(&self) -> String {
        format!(
            "{MAGIC}\nlabel {}\nconfig {}\nq {}\ndigits {}\nbits {}\ndim {}\nintervals {}\nT {}\n---\n",
            self.label, self.config_hash, self.q, self.digits, self.bits, self.dim, self.intervals, self.end
        )
    }

    pub fn context(&self) -> Result<PrecisionContext> {
        let ctx = if self.bits == 53 { PrecisionContext::ieee_double() } else { PrecisionContext::new(self.digits)? };
        if ctx.bits() != self.bits {
            return Err(Error::Format(format!("{} digits do not map to the stored {} bits", self.digits, self.bits)));
        }
        Ok(ctx)
    }
}

/// One stored interval, values still in decimal form.
#[derive(Debug, Clone, PartialEq)]
pub struct StoredInterval {
    pub t_left: String,
    pub t_right: String,
    pub values: Vec<String>,
}

/// Reads a trajectory file; a torn final line is dropped.
pub fn read_trajectory_file(path: &Path) -> Result<(TrajectoryHeader, Vec<StoredInterval>)> {
    let (header, rows, _) = read_with_offset(path)?;
    Ok((header, rows))
}

fn read_with_offset(path: &Path) -> Result<(TrajectoryHeader, Vec<StoredInterval>, u64)> {
    let mut reader = BufReader::new(File::open(path)?);
    let mut offset = 0u64;
    let mut line = String::new();
    let next = |reader: &mut BufReader<File>, line: &mut String| -> Result<Option<usize>> {
        line.clear();
        let n = reader.read_line(line)?;
        Ok(if n == 0 { None } else { Some(n) })
    };
    let mut fields = Vec::new();
    loop {
        let n = next(&mut reader, &mut line)?.ok_or_else(|| Error::Format("header is incomplete".into()))?;
        offset += n as u64;
        let l = line.trim_end();
        if l == "---" {
            break;
        }
        fields.push(l.to_string());
    }
    if fields.first().map(String::as_str) != Some(MAGIC) {
        return Err(Error::Format(format!("{} is not a trajectory file", path.display())));
    }
    let get = |key: &str| -> Result<String> {
        fields
            .iter()
            .find_map(|f| f.strip_prefix(key).and_then(|r| r.strip_prefix(' ')).map(str::to_string))
            .ok_or_else(|| Error::Format(format!("header lacks '{key}'")))
    };
    let num = |key: &str| -> Result<usize> {
        get(key)?.parse().map_err(|_| Error::Format(format!("header field '{key}' is not a number")))
    };
    let header = TrajectoryHeader {
        label: get("label")?,
        config_hash: get("config")?,
        q: num("q")?,
        digits: num("digits")? as u32,
        bits: num("bits")? as u32,
        dim: num("dim")?,
        intervals: num("intervals")?,
        end: get("T")?,
    };
    let width = (header.q + 1) * header.dim;
    let mut rows = Vec::new();
    while let Some(n) = next(&mut reader, &mut line)? {
        if !line.ends_with('\n') {
            break;
        }
        let parts: Vec<&str> = line.split_whitespace().collect();
        if parts.len() != 3 + width || parts[0].parse::<usize>().ok() != Some(rows.len()) {
            break;
        }
        rows.push(StoredInterval {
            t_left: parts[1].to_string(),
            t_right: parts[2].to_string(),
            values: parts[3..].iter().map(|s| s.to_string()).collect(),
        });
        offset += n as u64;
    }
    Ok((header, rows, offset))
}

/// Parses stored rows into nodal values, checking them against `partition`.
pub fn decode_rows<R: Real>(
    header: &TrajectoryHeader,
    rows: &[StoredInterval],
    partition: &Partition<R>,
    ctx: &PrecisionContext,
) -> Result<Vec<Vec<Vector<R>>>> {
    if rows.len() > partition.len() {
        return Err(Error::Format(format!("{} rows for a {}-interval partition", rows.len(), partition.len())));
    }
    rows.iter()
        .enumerate()
        .map(|(m, row)| {
            if R::parse(&row.t_left, ctx)? != *partition.left(m) || R::parse(&row.t_right, ctx)? != *partition.right(m) {
                return Err(Error::Stale(format!("interval {m} does not match the configured partition")));
            }
            let vals = row.values.iter().map(|s| R::parse(s, ctx)).collect::<Result<Vec<R>>>()?;
            Ok(vals.chunks(header.dim).map(|c| Vector::from_vec(c.to_vec())).collect())
        })
        .collect()
}

/// Appends solved intervals to a trajectory file.
pub struct TrajectoryWriter {
    out: BufWriter<File>,
}

impl TrajectoryWriter {
    /// Opens `path` for appending. An existing file must carry the same
    /// header; its complete rows are returned and any torn tail is cut.
    pub fn open(path: &Path, header: &TrajectoryHeader) -> Result<(Self, Vec<StoredInterval>)> {
        if path.exists() {
            let (found, rows, offset) = read_with_offset(path)?;
            if &found != header {
                return Err(Error::Stale(format!(
                    "{} was written by config {} (q={}, {} digits), not {}",
                    path.display(),
                    found.config_hash,
                    found.q,
                    found.digits,
                    header.config_hash
                )));
            }
            let file = OpenOptions::new().write(true).open(path)?;
            file.set_len(offset)?;
            let file = OpenOptions::new().append(true).open(path)?;
            Ok((Self { out: BufWriter::new(file) }, rows))
        } else {
            if let Some(dir) = path.parent() {
                std::fs::create_dir_all(dir)?;
            }
            let mut out = BufWriter::new(File::create(path)?);
            out.write_all(header.render().as_bytes())?;
            out.flush()?;
            Ok((Self { out }, Vec::new()))
        }
    }

    pub fn append<R: Real>(&mut self, m: usize, left: &R, right: &R, values: &[Vector<R>]) -> Result<()> {
        let mut line = format!("{m} {} {}", left.to_decimal(), right.to_decimal());
        for v in values {
            for x in v.iter() {
                line.push(' ');
                line.push_str(&x.to_decimal());
            }
        }
        line.push('\n');
        self.out.write_all(line.as_bytes())?;
        self.out.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::BigFloat;

    fn header() -> TrajectoryHeader {
        TrajectoryHeader {
            label: "test".into(),
            config_hash: "abc".into(),
            q: 1,
            digits: 30,
            bits: 128,
            dim: 2,
            intervals: 4,
            end: "1".into(),
        }
    }

    #[test]
    fn write_read_resume() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("traj.txt");
        let ctx = header().context().unwrap();
        let part = Partition::<BigFloat>::uniform(&BigFloat::zero(&ctx), &BigFloat::one(&ctx), 4, &ctx).unwrap();
        let third = BigFloat::from_ratio(1, 3, &ctx);
        let vals = |m: usize| {
            let a = third.clone() * BigFloat::from_i64(m as i64, &ctx);
            vec![Vector::from_vec(vec![a.clone(), -a.clone()]), Vector::from_vec(vec![a.exp(), a.sin()])]
        };
        {
            let (mut w, rows) = TrajectoryWriter::open(&path, &header()).unwrap();
            assert!(rows.is_empty());
            for m in 0..2 {
                w.append(m, part.left(m), part.right(m), &vals(m)).unwrap();
            }
        }
        // Torn tail from an interrupted write.
        let mut f = OpenOptions::new().append(true).open(&path).unwrap();
        f.write_all(b"2 +5e-1 +7.5e-1 +1.0").unwrap();
        drop(f);
        let (h, rows) = read_trajectory_file(&path).unwrap();
        assert_eq!(h, header());
        assert_eq!(rows.len(), 2);
        let decoded = decode_rows(&h, &rows, &part, &ctx).unwrap();
        assert_eq!(decoded[1], vals(1));

        let (mut w, rows) = TrajectoryWriter::open(&path, &header()).unwrap();
        assert_eq!(rows.len(), 2);
        w.append(2, part.left(2), part.right(2), &vals(2)).unwrap();
        drop(w);
        let (_, rows) = read_trajectory_file(&path).unwrap();
        assert_eq!(decode_rows(&h, &rows, &part, &ctx).unwrap()[2], vals(2));

        let mut other = header();
        other.config_hash = "def".into();
        assert!(matches!(TrajectoryWriter::open(&path, &other), Err(Error::Stale(_))));
        let coarse = Partition::<BigFloat>::uniform(&BigFloat::zero(&ctx), &BigFloat::one(&ctx), 3, &ctx).unwrap();
        assert!(decode_rows(&h, &rows, &coarse, &ctx).is_err());
    }

    #[test]
    fn rejects_foreign_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.txt");
        std::fs::write(&path, "hello\n---\n").unwrap();
        assert!(matches!(read_trajectory_file(&path), Err(Error::Format(_))));
        std::fs::write(&path, "cgq-trajectory 1\nlabel a\n").unwrap();
        assert!(matches!(read_trajectory_file(&path), Err(Error::Format(_))));
    }
}
