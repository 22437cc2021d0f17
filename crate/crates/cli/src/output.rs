//! CSV and JSON artifacts. Floats are written with 17 significant digits so
//! that every value survives a round trip through text unchanged.

use std::fs::File;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use xychain::lzmap::{impulse_region_check, LZMapping};
use xychain::{ExcitationProfile, Protocol};

use crate::error::CliError;

pub fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Output { path: path.to_path_buf(), source }
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> CliError + '_ {
    move |e| CliError::Output { path: path.to_path_buf(), source: e.into() }
}

pub fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))
}

fn write_rows(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    w.write_record(header).map_err(csv_err(path))?;
    for row in rows {
        w.write_record(&row).map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub protocol: Protocol,
    pub tau: f64,
    pub w: f64,
    pub n_w: f64,
}

pub fn write_sweep(path: &Path, rows: &[SweepRow]) -> Result<(), CliError> {
    write_rows(
        path,
        &["protocol", "tau", "w", "n_w"],
        rows.iter().map(|r| vec![r.protocol.name().to_string(), fmt(r.tau), fmt(r.w), fmt(r.n_w)]),
    )
}

pub fn read_sweep(path: &Path) -> Result<Vec<SweepRow>, CliError> {
    let mut reader = csv::Reader::from_path(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    reader
        .deserialize()
        .collect::<Result<Vec<SweepRow>, _>>()
        .map_err(|e| CliError::Config(format!("malformed sweep file {}: {e}", path.display())))
}

pub fn pk_path(dir: &Path, protocol: Protocol, tau: f64, w: f64) -> PathBuf {
    dir.join(format!("pk_{}_{tau}_{w}.csv", protocol.name()))
}

pub fn write_profile(path: &Path, profile: &ExcitationProfile) -> Result<(), CliError> {
    write_rows(
        path,
        &["k", "p_k"],
        profile.k_values.iter().zip(&profile.p_values).map(|(k, p)| vec![fmt(*k), fmt(*p)]),
    )
}

pub fn write_lz_table(path: &Path, table: &[LZMapping]) -> Result<(), CliError> {
    write_rows(
        path,
        &["k", "v_lz", "t_scale", "t_offset", "window_lz_start", "window_lz_end", "complete_lzt"],
        table.iter().map(|m| {
            vec![
                fmt(m.k),
                fmt(m.v_lz),
                fmt(m.t_scale),
                fmt(m.t_offset),
                fmt(m.window_lz.0),
                fmt(m.window_lz.1),
                impulse_region_check(m).to_string(),
            ]
        }),
    )
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<String, CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("report types serialize");
    text.push('\n');
    let file = File::create(path).map_err(io_err(path))?;
    std::io::Write::write_all(&mut &file, text.as_bytes()).map_err(io_err(path))?;
    Ok(text)
}
