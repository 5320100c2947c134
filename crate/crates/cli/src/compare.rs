//! Side-by-side tables of two finished runs.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use crate::run::RunManifest;
use crate::CliError;

#[derive(Clone, Debug, PartialEq)]
pub struct Comparison {
    pub diagnostics: PathBuf,
    pub density: Option<PathBuf>,
    pub rows: usize,
    /// Largest absolute difference over every compared column.
    pub max_abs_difference: f64,
}

type Table = BTreeMap<String, Vec<Option<f64>>>;

fn read_table(path: &Path, key: &str) -> Result<(Vec<String>, Table), CliError> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let headers: Vec<String> = rdr
        .headers()
        .map_err(|e| CliError::Io(e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    if headers.first().map(String::as_str) != Some(key) {
        return Err(CliError::Io(format!("{}: first column must be `{key}`", path.display())));
    }
    let mut table = Table::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| CliError::Io(e.to_string()))?;
        let values = rec.iter().skip(1).map(|v| v.parse::<f64>().ok()).collect();
        table.insert(rec[0].to_string(), values);
    }
    Ok((headers[1..].to_vec(), table))
}

fn chain_dir(root: &Path, manifest: &RunManifest) -> PathBuf {
    match manifest.chains.first() {
        Some(c) if !c.dir.is_empty() => root.join(&c.dir),
        _ => root.to_path_buf(),
    }
}

fn fmt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |v| v.to_string())
}

fn diff(a: Option<f64>, b: Option<f64>) -> Option<f64> {
    Some(a? - b?)
}

/// Joins `file` of both runs on its first column, emitting
/// `key, <col>_a, <col>_b, <col>_diff` for the selected columns.
fn join(
    a: &Path,
    b: &Path,
    file: &str,
    key: &str,
    columns: &[&str],
    out: &Path,
) -> Result<(usize, f64), CliError> {
    let (ha, ta) = read_table(&a.join(file), key)?;
    let (hb, tb) = read_table(&b.join(file), key)?;
    let idx = |h: &[String], c: &str| {
        h.iter()
            .position(|x| x == c)
            .ok_or_else(|| CliError::Io(format!("{file}: missing column `{c}`")))
    };
    let ia: Vec<usize> = columns.iter().map(|c| idx(&ha, c)).collect::<Result<_, _>>()?;
    let ib: Vec<usize> = columns.iter().map(|c| idx(&hb, c)).collect::<Result<_, _>>()?;

    let mut header = vec![key.to_string()];
    for c in columns {
        header.extend([format!("{c}_a"), format!("{c}_b"), format!("{c}_diff")]);
    }
    let mut body = header.join(",") + "\n";
    let mut rows: Vec<(&String, &Vec<Option<f64>>, &Vec<Option<f64>>)> = ta
        .iter()
        .filter_map(|(k, va)| tb.get(k).map(|vb| (k, va, vb)))
        .collect();
    rows.sort_by(|x, y| {
        let px = x.0.parse::<f64>().unwrap_or(f64::NAN);
        let py = y.0.parse::<f64>().unwrap_or(f64::NAN);
        px.total_cmp(&py)
    });
    let mut max_abs: f64 = 0.0;
    for (k, va, vb) in &rows {
        let mut fields = vec![(*k).clone()];
        for (&i, &j) in ia.iter().zip(&ib) {
            let (x, y) = (va.get(i).copied().flatten(), vb.get(j).copied().flatten());
            let d = diff(x, y);
            if let Some(d) = d {
                max_abs = max_abs.max(d.abs());
            }
            fields.extend([fmt(x), fmt(y), fmt(d)]);
        }
        body.push_str(&fields.join(","));
        body.push('\n');
    }
    fs::write(out, body).map_err(CliError::io)?;
    Ok((rows.len(), max_abs))
}

/// Compares two run directories and writes `comparison.csv` (and
/// `density_comparison.csv` when both runs have density tables) into `out`.
pub fn compare(a: &Path, b: &Path, out: &Path) -> Result<Comparison, CliError> {
    let ma = RunManifest::load(a)?;
    let mb = RunManifest::load(b)?;
    if ma.experiment != mb.experiment {
        return Err(CliError::Config(format!(
            "incompatible runs: experiment `{}` vs `{}`",
            ma.experiment, mb.experiment
        )));
    }
    if ma.dim != mb.dim {
        return Err(CliError::Config(format!("incompatible runs: dimension {} vs {}", ma.dim, mb.dim)));
    }
    fs::create_dir_all(out).map_err(CliError::io)?;
    let (da, db) = (chain_dir(a, &ma), chain_dir(b, &mb));

    let diagnostics = out.join("comparison.csv");
    let (rows, mut max_abs) = join(
        &da,
        &db,
        "diagnostics.csv",
        "step",
        &["acceptance", "lambda", "sigma_trace", "subopt"],
        &diagnostics,
    )?;

    let density = if da.join("density.csv").exists() && db.join("density.csv").exists() {
        let path = out.join("density_comparison.csv");
        let (_, m) = join(&da, &db, "density.csv", "bin_center", &["empirical", "difference"], &path)?;
        max_abs = max_abs.max(m);
        Some(path)
    } else {
        None
    };
    Ok(Comparison {
        diagnostics,
        density,
        rows,
        max_abs_difference: max_abs,
    })
}
