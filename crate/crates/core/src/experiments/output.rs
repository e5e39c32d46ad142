//! CSV and JSON writers. CSVs use CRLF records and `{:.16e}` floats so every
//! value round-trips exactly.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::diagnostics::{DiagRecord, DIAG_COLUMNS};
use crate::error::{Error, Result};
use crate::profile::{ProfilePoint, ShockProfile, Weight};
use crate::shift::ShiftState;
use crate::solver::{FluidField, Grid, RunObserver};

pub const SNAPSHOT_COLUMNS: [&str; 7] = ["x", "rho", "u", "rho_tilde_shifted", "u_tilde_shifted", "phi", "psi"];
pub const PROFILE_COLUMNS: [&str; 8] = ["xi", "rho", "u", "drho", "du", "ddu", "a", "da"];
pub const SHIFT_COLUMNS: [&str; 3] = ["t", "X", "Xdot"];

#[inline]
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub struct CsvSink {
    inner: csv::Writer<BufWriter<File>>,
    path: PathBuf,
}

impl CsvSink {
    pub fn create(path: &Path, header: &[&str]) -> Result<Self> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut inner = csv::WriterBuilder::new()
            .terminator(csv::Terminator::CRLF)
            .from_writer(BufWriter::new(file));
        inner.write_record(header)?;
        Ok(Self {
            inner,
            path: path.to_path_buf(),
        })
    }

    pub fn row(&mut self, values: &[f64]) -> Result<()> {
        self.inner.write_record(values.iter().map(|v| fmt_f64(*v)))?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        self.inner.flush().map_err(|e| Error::io(&self.path, e))
    }
}

pub fn write_csv<I>(path: &Path, header: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator,
    I::Item: AsRef<[f64]>,
{
    let mut sink = CsvSink::create(path, header)?;
    for r in rows {
        sink.row(r.as_ref())?;
    }
    sink.finish()
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn write_profile_csv(path: &Path, profile: &ShockProfile) -> Result<()> {
    let w = Weight::new(profile);
    write_csv(
        path,
        &PROFILE_COLUMNS,
        (0..profile.len()).map(|k| {
            let p = profile.node(k);
            let (a, da) = w.at(&p);
            [p.xi, p.rho, p.u, p.drho, p.du, p.ddu, a, da]
        }),
    )
}

pub fn write_shift_csv(path: &Path, shift: &ShiftState) -> Result<()> {
    write_csv(path, &SHIFT_COLUMNS, shift.history.iter().map(|&(t, x, v)| [t, x, v]))
}

/// Streams `diag.csv` and writes `snapshots/NNNN.csv` for one run directory.
pub struct BundleObserver {
    dir: PathBuf,
    grid: Grid,
    diag: Option<CsvSink>,
}

impl BundleObserver {
    pub fn new(dir: &Path, grid: Grid) -> Result<Self> {
        std::fs::create_dir_all(dir.join("snapshots")).map_err(|e| Error::io(dir, e))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            grid,
            diag: Some(CsvSink::create(&dir.join("diag.csv"), &DIAG_COLUMNS)?),
        })
    }

    pub fn finish(&mut self) -> Result<()> {
        match self.diag.take() {
            Some(d) => d.finish(),
            None => Ok(()),
        }
    }
}

impl RunObserver for BundleObserver {
    fn record(&mut self, rec: &DiagRecord) -> Result<()> {
        match self.diag.as_mut() {
            Some(d) => d.row(&rec.values()),
            None => Ok(()),
        }
    }

    fn snapshot(&mut self, index: usize, field: &FluidField, pts: &[ProfilePoint], _x_shift: f64) -> Result<()> {
        let path = self.dir.join("snapshots").join(format!("{index:04}.csv"));
        let grid = self.grid;
        write_csv(
            &path,
            &SNAPSHOT_COLUMNS,
            (0..field.len()).map(|i| {
                let u = field.mom[i] / field.rho[i];
                let p = &pts[i];
                [grid.center(i), field.rho[i], u, p.rho, p.u, field.rho[i] - p.rho, u - p.u]
            }),
        )
    }

    fn abort(&mut self, last: &FluidField) -> Option<PathBuf> {
        let _ = self.finish();
        let path = self.dir.join("abort_field.csv");
        let grid = self.grid;
        let rows = (0..last.len()).map(|i| [last.t, grid.center(i), last.rho[i], last.mom[i]]);
        write_csv(&path, &["t", "x", "rho", "mom"], rows).ok().map(|_| path)
    }
}
