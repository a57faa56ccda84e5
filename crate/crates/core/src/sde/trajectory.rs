//! Sampled trajectories and their CSV / binary file formats.

use std::io::{BufRead, BufReader, BufWriter, Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniformly sampled record of one run. Positions are in units of `x_zp`,
/// forces in `x_zp`-normalized acceleration units (1/s²).
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Trajectory {
    pub t: Vec<f64>,
    /// True position.
    pub u: Vec<f64>,
    /// Measurement record `u + imprecision`.
    pub y: Vec<f64>,
    /// Applied feedback force.
    pub f_fb: Vec<f64>,
}

const MAGIC: &[u8; 8] = b"CDTRAJ01";
const HEADER_LEN: usize = 64;
const COLUMNS: u64 = 4;

impl Trajectory {
    pub fn with_capacity(n: usize) -> Self {
        Self {
            t: Vec::with_capacity(n),
            u: Vec::with_capacity(n),
            y: Vec::with_capacity(n),
            f_fb: Vec::with_capacity(n),
        }
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    /// Sample interval (s); zero for fewer than two samples.
    pub fn dt(&self) -> f64 {
        if self.t.len() < 2 {
            0.0
        } else {
            (self.t[self.t.len() - 1] - self.t[0]) / (self.t.len() - 1) as f64
        }
    }

    pub fn sample_rate(&self) -> f64 {
        1.0 / self.dt()
    }

    /// Writes `t,u,y,f_fb` rows with 17 significant digits.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut w = BufWriter::new(w);
        writeln!(w, "t,u,y,f_fb")?;
        for i in 0..self.len() {
            writeln!(
                w,
                "{:.16e},{:.16e},{:.16e},{:.16e}",
                self.t[i], self.u[i], self.y[i], self.f_fb[i]
            )?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut out = Trajectory::default();
        let reader = BufReader::new(r);
        let mut lines = reader.lines();
        let header = lines.next().ok_or(Error::EmptyInput)??;
        if header.trim() != "t,u,y,f_fb" {
            return Err(Error::Parse {
                line: 1,
                message: format!("expected header `t,u,y,f_fb`, found `{}`", header.trim()),
            });
        }
        for (i, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let vals: Vec<f64> = line
                .split(',')
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Parse {
                    line: i + 2,
                    message: e.to_string(),
                })?;
            if vals.len() != 4 {
                return Err(Error::Parse {
                    line: i + 2,
                    message: format!("expected 4 columns, found {}", vals.len()),
                });
            }
            out.t.push(vals[0]);
            out.u.push(vals[1]);
            out.y.push(vals[2]);
            out.f_fb.push(vals[3]);
        }
        Ok(out)
    }

    /// Binary layout: a 64-byte header (`CDTRAJ01`, sample count, column
    /// count, sample interval, start time, zero padding; integers `u64` and
    /// floats `f64`, little-endian) followed by the columns `t, u, y, f_fb`
    /// one after another as little-endian `f64`.
    pub fn write_binary<W: Write>(&self, w: W) -> Result<()> {
        let mut w = BufWriter::new(w);
        let mut header = [0u8; HEADER_LEN];
        header[..8].copy_from_slice(MAGIC);
        header[8..16].copy_from_slice(&(self.len() as u64).to_le_bytes());
        header[16..24].copy_from_slice(&COLUMNS.to_le_bytes());
        header[24..32].copy_from_slice(&self.dt().to_le_bytes());
        let t0 = self.t.first().copied().unwrap_or(0.0);
        header[32..40].copy_from_slice(&t0.to_le_bytes());
        w.write_all(&header)?;
        for col in [&self.t, &self.u, &self.y, &self.f_fb] {
            for v in col.iter() {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_binary<R: Read>(r: R) -> Result<Self> {
        let mut r = BufReader::new(r);
        let mut header = [0u8; HEADER_LEN];
        r.read_exact(&mut header)?;
        if &header[..8] != MAGIC {
            return Err(Error::Parse {
                line: 0,
                message: "not a trajectory file (bad magic)".into(),
            });
        }
        let word = |i: usize| u64::from_le_bytes(header[i..i + 8].try_into().expect("8 bytes"));
        let n = word(8) as usize;
        if word(16) != COLUMNS {
            return Err(Error::Parse {
                line: 0,
                message: format!("expected {COLUMNS} columns, header says {}", word(16)),
            });
        }
        let mut cols: Vec<Vec<f64>> = Vec::with_capacity(4);
        let mut buf = [0u8; 8];
        for _ in 0..COLUMNS {
            let mut col = Vec::with_capacity(n);
            for _ in 0..n {
                r.read_exact(&mut buf)?;
                col.push(f64::from_le_bytes(buf));
            }
            cols.push(col);
        }
        let f_fb = cols.pop().unwrap_or_default();
        let y = cols.pop().unwrap_or_default();
        let u = cols.pop().unwrap_or_default();
        let t = cols.pop().unwrap_or_default();
        Ok(Self { t, u, y, f_fb })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Trajectory {
        let mut tr = Trajectory::with_capacity(5);
        for i in 0..5 {
            let t = i as f64 * 0.1;
            tr.t.push(t);
            tr.u.push((t * 3.0).sin() * 1e5);
            tr.y.push(1.0 / 3.0 + t);
            tr.f_fb.push(-2.5e-7 * t);
        }
        tr
    }

    #[test]
    fn csv_round_trip_is_lossless() {
        let tr = sample();
        let mut buf = Vec::new();
        tr.write_csv(&mut buf).unwrap();
        assert_eq!(Trajectory::read_csv(buf.as_slice()).unwrap(), tr);
    }

    #[test]
    fn binary_round_trip_is_lossless() {
        let tr = sample();
        let mut buf = Vec::new();
        tr.write_binary(&mut buf).unwrap();
        assert_eq!(buf.len(), 64 + 4 * 5 * 8);
        assert_eq!(Trajectory::read_binary(buf.as_slice()).unwrap(), tr);
    }

    #[test]
    fn csv_reports_bad_line() {
        let text = "t,u,y,f_fb\n0,1,2,3\n0,1,x,3\n";
        match Trajectory::read_csv(text.as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }
}
