//! Gnuplot scripts for tabular artifacts. Scripts reference the CSVs by
//! path and never embed data.

use std::fs;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::manifest::Manifest;

fn header(csv: &Path) -> Result<Vec<String>> {
    let f = fs::File::open(csv)
        .map_err(|e| Error::Manifest(format!("missing table {}: {e}", csv.display())))?;
    let mut line = String::new();
    BufReader::new(f).read_line(&mut line)?;
    Ok(line.trim_end().split(',').map(str::to_owned).collect())
}

fn column(cols: &[String], name: &str, csv: &Path) -> Result<usize> {
    cols.iter()
        .position(|c| c == name)
        .map(|i| i + 1)
        .ok_or_else(|| Error::Manifest(format!("column {name} not in {}", csv.display())))
}

/// Writes one `.gp` script per table with a plot hint, next to the table.
pub fn emit_plots(manifest: &Manifest, dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for entry in &manifest.files {
        let Some(hint) = &entry.plot else { continue };
        let csv = dir.join(&entry.path);
        let cols = header(&csv)?;
        let xc = column(&cols, &hint.x, &csv)?;
        let stem = Path::new(&entry.path)
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "plot".into());
        let mut s = String::new();
        s.push_str("set datafile separator ','\n");
        s.push_str("set terminal pngcairo size 800,600\n");
        s.push_str(&format!("set output '{stem}.png'\n"));
        s.push_str(&format!("set title '{}'\n", hint.title.replace('\'', "")));
        s.push_str(&format!("set xlabel '{}'\n", hint.x));
        if hint.log_x {
            s.push_str("set logscale x\n");
        }
        if hint.log_y {
            s.push_str("set logscale y\n");
        }
        if let Some(a) = &hint.annotation {
            s.push_str(&format!(
                "set label 1 '{}' at graph 0.05, graph 0.92\n",
                a.replace('\'', "")
            ));
        }
        let file = Path::new(&entry.path)
            .file_name()
            .map(|f| f.to_string_lossy().into_owned())
            .unwrap_or_default();
        let mut series = Vec::new();
        for y in &hint.y {
            let yc = column(&cols, y, &csv)?;
            series.push(format!("'{file}' using {xc}:{yc} skip 1 with linespoints title '{y}'"));
        }
        s.push_str(&format!("plot {}\n", series.join(", \\\n     ")));
        let path = csv.with_file_name(format!("{stem}.gp"));
        fs::write(&path, s)?;
        out.push(path);
    }
    Ok(out)
}
