//! Long-form CSV formats.
//!
//! Grid CSV: header `w,h,x1,...,xp`, one row per cell, every cell exactly
//! once. Scatter CSV: header `cx,cy,x1,...,xp`.

use std::io::{Read, Write};

use crate::binning::ScatterPoint;
use crate::error::{Error, Result};
use crate::grid::DataGrid;

fn response_columns(headers: &csv::StringRecord, first: [&str; 2]) -> Result<usize> {
    if headers.len() < 3 {
        return Err(Error::Parse(format!(
            "expected header {},{},x1,...,xp",
            first[0], first[1]
        )));
    }
    for (i, name) in first.iter().enumerate() {
        if headers[i].trim() != *name {
            return Err(Error::Parse(format!(
                "column {} must be `{}`, found `{}`",
                i + 1,
                name,
                &headers[i]
            )));
        }
    }
    for (k, name) in headers.iter().skip(2).enumerate() {
        if name.trim() != format!("x{}", k + 1) {
            return Err(Error::Parse(format!(
                "column {} must be `x{}`, found `{}`",
                k + 3,
                k + 1,
                name
            )));
        }
    }
    Ok(headers.len() - 2)
}

fn parse_f64(field: &str, line: u64, col: &str) -> Result<f64> {
    field
        .trim()
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| Error::Parse(format!("line {line}: bad value `{field}` in column {col}")))
}

fn parse_index(field: &str, line: u64, col: &str) -> Result<usize> {
    field
        .trim()
        .parse::<usize>()
        .ok()
        .filter(|v| *v >= 1)
        .ok_or_else(|| Error::Parse(format!("line {line}: bad index `{field}` in column {col}")))
}

/// Reads a grid from long-form CSV. Grid dimensions are the maxima of the
/// `w` and `h` columns; duplicate or missing cells are errors.
pub fn read_grid_csv<R: Read>(reader: R) -> Result<DataGrid> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let p = response_columns(rdr.headers()?, ["w", "h"])?;
    let mut rows = Vec::new();
    let (mut tw, mut th) = (0, 0);
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != p + 2 {
            return Err(Error::Parse(format!(
                "line {line}: expected {} fields, found {}",
                p + 2,
                rec.len()
            )));
        }
        let w = parse_index(&rec[0], line, "w")?;
        let h = parse_index(&rec[1], line, "h")?;
        let x = (0..p)
            .map(|k| parse_f64(&rec[k + 2], line, &format!("x{}", k + 1)))
            .collect::<Result<Vec<_>>>()?;
        tw = tw.max(w);
        th = th.max(h);
        rows.push((w, h, x));
    }
    if rows.is_empty() {
        return Err(Error::Parse("grid CSV has no data rows".into()));
    }
    let mut values = vec![0.0; tw * th * p];
    let mut seen = vec![false; tw * th];
    for (w, h, x) in rows {
        let idx = (w - 1) * th + (h - 1);
        if std::mem::replace(&mut seen[idx], true) {
            return Err(Error::Parse(format!("duplicate cell ({w}, {h})")));
        }
        values[idx * p..(idx + 1) * p].copy_from_slice(&x);
    }
    if let Some(idx) = seen.iter().position(|s| !s) {
        return Err(Error::Parse(format!(
            "missing cell ({}, {})",
            idx / th + 1,
            idx % th + 1
        )));
    }
    DataGrid::new(tw, th, p, values)
}

/// Writes a grid as long-form CSV, rows ordered by `w` then `h`.
pub fn write_grid_csv<W: Write>(grid: &DataGrid, writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header = vec!["w".to_string(), "h".to_string()];
    header.extend((1..=grid.p()).map(|k| format!("x{k}")));
    wtr.write_record(&header)?;
    for ((w, h), x) in grid.iter_cells() {
        let mut row = vec![w.to_string(), h.to_string()];
        row.extend(x.iter().map(|v| v.to_string()));
        wtr.write_record(&row)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_scatter_csv<R: Read>(reader: R) -> Result<Vec<ScatterPoint>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let p = response_columns(rdr.headers()?, ["cx", "cy"])?;
    let mut points = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != p + 2 {
            return Err(Error::Parse(format!(
                "line {line}: expected {} fields, found {}",
                p + 2,
                rec.len()
            )));
        }
        points.push(ScatterPoint {
            cx: parse_f64(&rec[0], line, "cx")?,
            cy: parse_f64(&rec[1], line, "cy")?,
            obs: (0..p)
                .map(|k| parse_f64(&rec[k + 2], line, &format!("x{}", k + 1)))
                .collect::<Result<_>>()?,
        });
    }
    Ok(points)
}
