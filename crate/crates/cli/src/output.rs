use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use bayes_fusion::montecarlo::{Axis, PerformanceGrid};
use serde::Serialize;

/// Corner cell of the grid CSV header.
pub const CORNER: &str = "h\\c";

/// Grid CSV: header row holds decision-bin centers, first column holds object-bin centers.
pub fn grid_csv(decision: &Axis, object: &Axis, value: impl Fn(usize, usize) -> f64) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec![CORNER.to_string()];
    header.extend(decision.centers().iter().map(f64::to_string));
    w.write_record(&header)?;
    for r in 0..object.len() {
        let mut row = vec![object.center(r).to_string()];
        row.extend((0..decision.len()).map(|k| value(r, k).to_string()));
        w.write_record(&row)?;
    }
    Ok(w.into_inner()?)
}

pub fn performance_csv(grid: &PerformanceGrid) -> Result<Vec<u8>> {
    grid_csv(&grid.spec.decision, &grid.spec.object, |r, k| grid.row(r)[k])
}

/// A grid CSV read back into numbers.
#[derive(Debug, Clone, PartialEq)]
pub struct GridTable {
    pub decision: Vec<f64>,
    pub object: Vec<f64>,
    pub rows: Vec<Vec<f64>>,
}

pub fn read_grid_csv(bytes: &[u8]) -> Result<GridTable> {
    let mut rd = csv::Reader::from_reader(bytes);
    let decision = rd.headers()?.iter().skip(1).map(str::parse).collect::<Result<Vec<f64>, _>>()?;
    let (mut object, mut rows) = (Vec::new(), Vec::new());
    for rec in rd.records() {
        let rec = rec?;
        let mut cells = rec.iter().map(str::parse::<f64>);
        object.push(cells.next().context("empty grid row")??);
        rows.push(cells.collect::<Result<Vec<_>, _>>()?);
    }
    Ok(GridTable { decision, object, rows })
}

pub fn json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    Ok(bytes)
}

pub fn write(dir: &Path, name: &str, bytes: &[u8]) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(name);
    fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))
}
