//! On-disk formats.
//!
//! A grid file is a CSV whose first line holds the grid times and whose
//! remaining lines are the matrix rows, every value printed with 17
//! significant digits so a write/read cycle is lossless. A one-row file
//! holds a single-time series such as `K`. Manifests are `key = value` text.
//! All writes go through a temporary file in the target directory followed
//! by a rename.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use crate::ck::{chi_from_r, CkSolution, ConstraintMode, SolverDiagnostics};
use crate::error::{Error, Result};
use crate::grid::{SquareGrid, TriGrid};
use crate::langevin::EmpiricalObservables;

/// Times plus any number of rows over those times.
#[derive(Debug, Clone, PartialEq)]
pub struct GridTable {
    pub times: Vec<f64>,
    pub rows: Vec<Vec<f64>>,
}

impl GridTable {
    pub fn from_square(times: &[f64], grid: &SquareGrid) -> Self {
        GridTable {
            times: times.to_vec(),
            rows: (0..grid.len()).map(|s| grid.row(s).to_vec()).collect(),
        }
    }

    pub fn series(times: &[f64], values: &[f64]) -> Self {
        GridTable { times: times.to_vec(), rows: vec![values.to_vec()] }
    }

    pub fn into_square(self) -> Result<SquareGrid> {
        let n = self.times.len();
        if self.rows.len() != n {
            return Err(Error::GridMismatch(format!("{} rows over {n} times", self.rows.len())));
        }
        let data: Vec<f64> = self.rows.into_iter().flatten().collect();
        SquareGrid::from_rows(n, data).ok_or_else(|| Error::GridMismatch("ragged grid".into()))
    }

    /// Lower triangle of a square table.
    pub fn into_tri(self, h: f64) -> Result<TriGrid> {
        let sq = self.into_square()?;
        let mut tri = TriGrid::zeros(h, sq.len());
        for i in 0..sq.len() {
            tri.row_mut(i).copy_from_slice(&sq.row(i)[..=i]);
        }
        Ok(tri)
    }
}

fn push_row(buf: &mut String, values: &[f64]) {
    for (k, v) in values.iter().enumerate() {
        if k > 0 {
            buf.push(',');
        }
        let _ = write!(buf, "{v:.16e}");
    }
    buf.push('\n');
}

/// Writes `contents` to `path` atomically.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

pub fn format_grid(table: &GridTable) -> String {
    let mut buf = String::new();
    push_row(&mut buf, &table.times);
    for row in &table.rows {
        push_row(&mut buf, row);
    }
    buf
}

pub fn write_grid(path: &Path, table: &GridTable) -> Result<()> {
    write_atomic(path, format_grid(table).as_bytes())
}

pub fn parse_grid(text: &str, path: &Path) -> Result<GridTable> {
    let parse_line = |line: &str, lineno: usize| -> Result<Vec<f64>> {
        line.split(',')
            .map(|f| {
                f.trim().parse::<f64>().map_err(|e| Error::Parse {
                    path: path.to_path_buf(),
                    line: lineno,
                    msg: format!("{f:?}: {e}"),
                })
            })
            .collect()
    };
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or_else(|| Error::Parse {
        path: path.to_path_buf(),
        line: 1,
        msg: "empty grid file".into(),
    })?;
    let times = parse_line(header, 1)?;
    let mut rows = Vec::new();
    for (k, line) in lines {
        let row = parse_line(line, k + 1)?;
        if row.len() != times.len() {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: k + 1,
                msg: format!("{} values, header has {}", row.len(), times.len()),
            });
        }
        rows.push(row);
    }
    Ok(GridTable { times, rows })
}

pub fn read_grid(path: &Path) -> Result<GridTable> {
    parse_grid(&fs::read_to_string(path)?, path)
}

/// Ordered `key = value` record.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Manifest {
    entries: Vec<(String, String)>,
}

impl Manifest {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&mut self, key: impl Into<String>, value: impl ToString) -> &mut Self {
        let key = key.into();
        let value = value.to_string();
        match self.entries.iter_mut().find(|(k, _)| *k == key) {
            Some(e) => e.1 = value,
            None => self.entries.push((key, value)),
        }
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }

    pub fn get_parsed<T: std::str::FromStr>(&self, key: &str, path: &Path) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        let raw = self.get(key).ok_or_else(|| Error::Parse {
            path: path.to_path_buf(),
            line: 0,
            msg: format!("missing key {key:?}"),
        })?;
        raw.parse().map_err(|e: T::Err| Error::Parse {
            path: path.to_path_buf(),
            line: 0,
            msg: format!("{key}: {e}"),
        })
    }

    pub fn render(&self) -> String {
        self.entries.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.render().as_bytes())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let mut m = Manifest::new();
        for (k, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
                path: path.to_path_buf(),
                line: k + 1,
                msg: "expected key = value".into(),
            })?;
            m.set(key.trim(), value.trim());
        }
        Ok(m)
    }
}

pub const MANIFEST_FILE: &str = "manifest.txt";

/// Writes the solver grids (full square, using the solution's off-triangle
/// conventions) and returns the paths written.
pub fn write_solution(dir: &Path, sol: &CkSolution, manifest: &mut Manifest) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let times = sol.times();
    let n = sol.len();
    let grids = [
        ("R.csv", SquareGrid::from_fn(n, |s, t| sol.r_at(s, t))),
        ("C.csv", SquareGrid::from_fn(n, |s, t| sol.c_at(s, t))),
        ("chi.csv", SquareGrid::from_fn(n, |s, t| sol.chi_at(s, t))),
    ];
    let mut written = Vec::new();
    for (name, g) in &grids {
        let p = dir.join(name);
        write_grid(&p, &GridTable::from_square(&times, g))?;
        written.push(p);
    }
    let p = dir.join("K.csv");
    write_grid(&p, &GridTable::series(&times, &sol.k))?;
    written.push(p);
    if let Some(z) = &sol.zlag {
        let p = dir.join("z.csv");
        write_grid(&p, &GridTable::series(&times, z))?;
        written.push(p);
    }
    manifest
        .set("run.kind", "solution")
        .set("h", sol.h())
        .set("T", times.last().copied().unwrap_or(0.0))
        .set("mode", sol.mode.as_str())
        .set("run.corrector.max_sweeps", sol.diagnostics.max_sweeps())
        .set("run.corrector.total_sweeps", sol.diagnostics.total_sweeps())
        .set("run.corrector.max_final_update", sol.diagnostics.max_final_update());
    let files: Vec<String> = written.iter().filter_map(|p| p.file_name()?.to_str().map(String::from)).collect();
    manifest.set("run.files", files.join(","));
    manifest.write(&dir.join(MANIFEST_FILE))?;
    Ok(written)
}

/// Reads back a solution written by [`write_solution`]. Corrector
/// statistics are not restored; `chi` is re-read, not recomputed.
pub fn read_solution(dir: &Path) -> Result<CkSolution> {
    let mpath = dir.join(MANIFEST_FILE);
    let manifest = Manifest::read(&mpath)?;
    let h: f64 = manifest.get_parsed("h", &mpath)?;
    let mode: ConstraintMode = manifest.get_parsed("mode", &mpath)?;
    let r = read_grid(&dir.join("R.csv"))?.into_tri(h)?;
    let c = read_grid(&dir.join("C.csv"))?.into_tri(h)?;
    let chi = match read_grid(&dir.join("chi.csv")) {
        Ok(t) => t.into_tri(h)?,
        Err(Error::Io(e)) if e.kind() == std::io::ErrorKind::NotFound => chi_from_r(&r),
        Err(e) => return Err(e),
    };
    let k = (0..c.len()).map(|i| c.get(i, i)).collect();
    let zlag = match mode {
        ConstraintMode::Hard => Some(read_grid(&dir.join("z.csv"))?.rows.remove(0)),
        ConstraintMode::Soft => None,
    };
    if r.len() != c.len() || chi.len() != c.len() {
        return Err(Error::GridMismatch("R, C and chi sizes differ".into()));
    }
    Ok(CkSolution { r, c, k, chi, mode, zlag, diagnostics: SolverDiagnostics::default() })
}

/// Writes the averaged observables and their variance-of-mean grids.
pub fn write_observables(dir: &Path, obs: &EmpiricalObservables, manifest: &mut Manifest) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let t = &obs.times;
    let mut grids = vec![
        ("C.csv", obs.c.clone()),
        ("chi.csv", obs.chi.clone()),
        ("C_var.csv", obs.c_variance()),
        ("chi_var.csv", obs.chi_variance()),
    ];
    if let (Some(a), Some(f)) = (&obs.a, &obs.f) {
        grids.push(("A.csv", a.clone()));
        grids.push(("F.csv", f.clone()));
    }
    let mut written = Vec::new();
    for (name, g) in &grids {
        let p = dir.join(name);
        write_grid(&p, &GridTable::from_square(t, g))?;
        written.push(p);
    }
    let p = dir.join("K.csv");
    write_grid(&p, &GridTable::series(t, &obs.k))?;
    written.push(p);
    manifest.set("run.kind", "observables").set("realizations", obs.n_realizations);
    let files: Vec<String> = written.iter().filter_map(|p| p.file_name()?.to_str().map(String::from)).collect();
    manifest.set("run.files", files.join(","));
    manifest.write(&dir.join(MANIFEST_FILE))?;
    Ok(written)
}

pub fn read_observables(dir: &Path) -> Result<EmpiricalObservables> {
    let mpath = dir.join(MANIFEST_FILE);
    let manifest = Manifest::read(&mpath)?;
    let n_real: usize = manifest.get_parsed("realizations", &mpath)?;
    let c = read_grid(&dir.join("C.csv"))?;
    let times = c.times.clone();
    let c = c.into_square()?;
    let chi = read_grid(&dir.join("chi.csv"))?.into_square()?;
    let var = |name: &str| -> Result<Option<SquareGrid>> {
        match read_grid(&dir.join(name)) {
            Ok(t) => Ok(Some(t.into_square()?)),
            Err(Error::Io(e)) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(e),
        }
    };
    EmpiricalObservables::from_parts(times, c, chi, n_real, var("C_var.csv")?, var("chi_var.csv")?)
}

/// One line of a long-format plot file.
#[derive(Debug, Clone, PartialEq)]
pub struct PlotPoint<'a> {
    pub s: f64,
    pub t: f64,
    pub value: f64,
    pub source: &'a str,
}

pub fn write_plot_csv(path: &Path, points: &[PlotPoint<'_>]) -> Result<()> {
    let mut buf = String::from("s,t,value,source\n");
    for p in points {
        let _ = writeln!(buf, "{:.16e},{:.16e},{:.16e},{}", p.s, p.t, p.value, p.source);
    }
    write_atomic(path, buf.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ck::{solve_ck, SolverConfig};
    use crate::model::{ConfinementSpec, ModelSpec};
    use proptest::prelude::*;

    #[test]
    fn solution_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let model = ModelSpec::pure(3, 1.0, ConfinementSpec::default(), 1).unwrap();
        let sol = solve_ck(&model, &SolverConfig { h: 0.05, t_max: 0.5, ..Default::default() }).unwrap();
        let mut m = Manifest::new();
        let files = write_solution(dir.path(), &sol, &mut m).unwrap();
        assert_eq!(files.len(), 4);
        let back = read_solution(dir.path()).unwrap();
        assert_eq!(back.r, sol.r);
        assert_eq!(back.c, sol.c);
        assert_eq!(back.chi, sol.chi);
        assert_eq!(back.k, sol.k);
        assert_eq!(Manifest::read(&dir.path().join(MANIFEST_FILE)).unwrap(), m);
    }

    #[test]
    fn ragged_rows_rejected() {
        let err = parse_grid("0,1\n1,2,3\n", Path::new("x.csv")).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
        assert!(parse_grid("", Path::new("x.csv")).is_err());
        assert!(parse_grid("0,abc\n", Path::new("x.csv")).is_err());
    }

    #[test]
    fn manifest_overwrites_and_ignores_comments() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.txt");
        fs::write(&p, "# header\nh = 0.5 # step\n\nmode=soft\nh = 0.25\n").unwrap();
        let m = Manifest::read(&p).unwrap();
        assert_eq!(m.get("h"), Some("0.25"));
        assert_eq!(m.get("mode"), Some("soft"));
        assert_eq!(m.entries().len(), 2);
    }

    proptest! {
        #[test]
        fn grid_csv_is_lossless(
            n in 1usize..6,
            seed in proptest::collection::vec(proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL | proptest::num::f64::ZERO, 36),
        ) {
            let times: Vec<f64> = (0..n).map(|k| k as f64 * 0.1).collect();
            let g = SquareGrid::from_fn(n, |s, t| seed[s * 6 + t]);
            let table = GridTable::from_square(&times, &g);
            let back = parse_grid(&format_grid(&table), Path::new("p.csv")).unwrap();
            prop_assert_eq!(back.times.iter().map(|x| x.to_bits()).collect::<Vec<_>>(),
                            times.iter().map(|x| x.to_bits()).collect::<Vec<_>>());
            let sq = back.into_square().unwrap();
            for (a, b) in sq.as_slice().iter().zip(g.as_slice()) {
                prop_assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }
}
