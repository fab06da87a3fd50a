//! Plain-text matrix files shared by spectrograms and occlusion maps.
//!
//! One header line `K=<k_max> N=<n_frames> fs=<hz> scale=<tag>` followed by
//! K+1 rows of N space-separated values (row k = frequency index k). Values
//! are written with Rust's shortest round-trip float formatting, so files are
//! byte-stable across runs.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};

pub(crate) struct RawMatrix {
    pub n_bins: usize,
    pub n_frames: usize,
    pub sample_rate_hz: f64,
    pub scale_tag: String,
    pub values: Vec<f64>,
}

pub(crate) fn write_matrix<W: Write>(
    out: &mut W,
    n_bins: usize,
    n_frames: usize,
    sample_rate_hz: f64,
    scale_tag: &str,
    values: &[f64],
) -> std::io::Result<()> {
    writeln!(
        out,
        "K={} N={} fs={} scale={}",
        n_bins - 1,
        n_frames,
        sample_rate_hz,
        scale_tag
    )?;
    for k in 0..n_bins {
        let row = &values[k * n_frames..(k + 1) * n_frames];
        let mut line = String::new();
        for (i, v) in row.iter().enumerate() {
            if i > 0 {
                line.push(' ');
            }
            line.push_str(&format!("{v}"));
        }
        writeln!(out, "{line}")?;
    }
    Ok(())
}

fn header_field<'a>(token: Option<&'a str>, key: &str) -> Result<&'a str> {
    token
        .and_then(|t| t.strip_prefix(key))
        .and_then(|t| t.strip_prefix('='))
        .ok_or_else(|| Error::Format(format!("matrix header: expected `{key}=<value>`")))
}

pub(crate) fn read_matrix<R: BufRead>(input: &mut R) -> Result<RawMatrix> {
    let mut header = String::new();
    if input.read_line(&mut header)? == 0 {
        return Err(Error::Format("matrix file is empty".into()));
    }
    let mut tokens = header.split_whitespace();
    let k_max: usize = header_field(tokens.next(), "K")?
        .parse()
        .map_err(|_| Error::Format("matrix header: bad K".into()))?;
    let n_frames: usize = header_field(tokens.next(), "N")?
        .parse()
        .map_err(|_| Error::Format("matrix header: bad N".into()))?;
    let sample_rate_hz: f64 = header_field(tokens.next(), "fs")?
        .parse()
        .map_err(|_| Error::Format("matrix header: bad fs".into()))?;
    let scale_tag = header_field(tokens.next(), "scale")?.to_string();

    // bounds also cap the upfront allocation for hostile headers
    const MAX_DIM: usize = 1 << 20;
    if k_max >= MAX_DIM {
        return Err(Error::Format(format!(
            "matrix header: implausible K={k_max}"
        )));
    }
    let n_bins = k_max + 1;
    if n_frames == 0 || n_frames > MAX_DIM {
        return Err(Error::Format(format!(
            "matrix header: N must be in 1..={MAX_DIM}"
        )));
    }

    let mut values = Vec::with_capacity(n_bins * n_frames);
    let mut line = String::new();
    for k in 0..n_bins {
        line.clear();
        if input.read_line(&mut line)? == 0 {
            return Err(Error::Format(format!(
                "matrix file: expected {n_bins} rows, found {k}"
            )));
        }
        let mut count = 0usize;
        for tok in line.split_whitespace() {
            let v: f64 = tok
                .parse()
                .map_err(|_| Error::Format(format!("matrix row {k}: bad value `{tok}`")))?;
            values.push(v);
            count += 1;
        }
        if count != n_frames {
            return Err(Error::Format(format!(
                "matrix row {k}: expected {n_frames} values, found {count}"
            )));
        }
    }

    Ok(RawMatrix {
        n_bins,
        n_frames,
        sample_rate_hz,
        scale_tag,
        values,
    })
}
