//! Field files: CSV with a metadata header, and a little-endian binary twin.

use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use psdyn::{Complex64, ComplexField, GridSpec, Method};

use crate::CliError;

fn header(field: &ComplexField) -> String {
    let g = &field.grid;
    format!(
        "# meta: hbar={}, t={}, method={}, grid={},{},{},{},{},{}",
        field.hbar, field.time, field.method, g.qmin, g.qmax, g.pmin, g.pmax, g.nq, g.np
    )
}

fn bad(path: &Path, msg: impl std::fmt::Display) -> CliError {
    CliError::Validation(format!("{}: {msg}", path.display()))
}

struct Meta {
    hbar: f64,
    t: f64,
    method: Method,
    grid: GridSpec,
}

fn parse_header(line: &str, path: &Path) -> Result<Meta, CliError> {
    let body = line
        .trim_end()
        .strip_prefix("# meta: ")
        .ok_or_else(|| bad(path, "missing '# meta:' header"))?;
    let (mut hbar, mut t, mut method, mut grid) = (None, None, None, None);
    // grid values contain commas, so split on ", " between keys
    for item in body.split(", ") {
        let (key, value) = item
            .split_once('=')
            .ok_or_else(|| bad(path, format!("malformed header item '{item}'")))?;
        let num = |v: &str| {
            v.parse::<f64>()
                .map_err(|_| bad(path, format!("bad number '{v}' for {key}")))
        };
        match key {
            "hbar" => hbar = Some(num(value)?),
            "t" => t = Some(num(value)?),
            "method" => method = Some(value.parse::<Method>().map_err(|e| bad(path, e))?),
            "grid" => {
                let parts: Vec<&str> = value.split(',').collect();
                if parts.len() != 6 {
                    return Err(bad(path, "grid needs qmin,qmax,pmin,pmax,nq,np"));
                }
                let b: Vec<f64> = parts[..4]
                    .iter()
                    .map(|v| num(v))
                    .collect::<Result<_, _>>()?;
                let n: Vec<usize> = parts[4..]
                    .iter()
                    .map(|v| {
                        v.parse::<usize>()
                            .map_err(|_| bad(path, format!("bad grid size '{v}'")))
                    })
                    .collect::<Result<_, _>>()?;
                grid = Some(
                    GridSpec::new(b[0], b[1], b[2], b[3], n[0], n[1]).map_err(|e| bad(path, e))?,
                );
            }
            other => return Err(bad(path, format!("unknown header key '{other}'"))),
        }
    }
    match (hbar, t, method, grid) {
        (Some(hbar), Some(t), Some(method), Some(grid)) => Ok(Meta {
            hbar,
            t,
            method,
            grid,
        }),
        _ => Err(bad(path, "header needs hbar, t, method and grid")),
    }
}

fn finish(meta: Meta, values: Vec<Complex64>, path: &Path) -> Result<ComplexField, CliError> {
    ComplexField::new(meta.grid, values, meta.hbar, meta.t, meta.method).map_err(|e| bad(path, e))
}

pub fn write_csv(field: &ComplexField, path: &Path) -> Result<(), CliError> {
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "{}", header(field))?;
    writeln!(w, "q,p,re,im")?;
    for (k, v) in field.values.iter().enumerate() {
        let (q, p) = field.grid.point(k);
        writeln!(w, "{q:.16e},{p:.16e},{:.16e},{:.16e}", v.re, v.im)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv(path: &Path) -> Result<ComplexField, CliError> {
    let mut lines = BufReader::new(std::fs::File::open(path)?).lines();
    let first = lines.next().ok_or_else(|| bad(path, "empty file"))??;
    let meta = parse_header(&first, path)?;
    if lines.next().transpose()?.as_deref() != Some("q,p,re,im") {
        return Err(bad(path, "expected column line 'q,p,re,im'"));
    }
    let mut values = Vec::with_capacity(meta.grid.len());
    for (k, line) in lines.enumerate() {
        let line = line?;
        let cols: Vec<f64> = line
            .split(',')
            .map(|v| {
                v.parse::<f64>()
                    .map_err(|_| bad(path, format!("row {k}: bad number '{v}'")))
            })
            .collect::<Result<_, _>>()?;
        if cols.len() != 4 {
            return Err(bad(path, format!("row {k}: expected 4 columns")));
        }
        if k >= meta.grid.len() || (cols[0], cols[1]) != meta.grid.point(k) {
            return Err(bad(
                path,
                format!(
                    "row {k}: point ({}, {}) is not on the grid",
                    cols[0], cols[1]
                ),
            ));
        }
        values.push(Complex64::new(cols[2], cols[3]));
    }
    finish(meta, values, path)
}

/// Header line, then (re, im) pairs as little-endian f64 in grid order.
pub fn write_binary(field: &ComplexField, path: &Path) -> Result<(), CliError> {
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "{}", header(field))?;
    for v in &field.values {
        w.write_all(&v.re.to_le_bytes())?;
        w.write_all(&v.im.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_binary(path: &Path) -> Result<ComplexField, CliError> {
    let mut r = BufReader::new(std::fs::File::open(path)?);
    let mut first = String::new();
    r.read_line(&mut first)?;
    let meta = parse_header(&first, path)?;
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.len() != 16 * meta.grid.len() {
        return Err(bad(
            path,
            format!(
                "expected {} bytes of values, found {}",
                16 * meta.grid.len(),
                bytes.len()
            ),
        ));
    }
    let f = |c: &[u8]| f64::from_le_bytes(c.try_into().expect("8 bytes"));
    let values = bytes
        .chunks_exact(16)
        .map(|c| Complex64::new(f(&c[..8]), f(&c[8..])))
        .collect();
    finish(meta, values, path)
}
