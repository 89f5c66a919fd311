//! On-disk artifacts: CSV tables, the certificate report, and JSON summaries.
//!
//! Numbers are written with 17 significant digits so every value reads back
//! bit-identically.

use std::fs;
use std::path::Path;

use fcpmp::lift::Multipliers;
use fcpmp::spectrum::spectrum_table;
use fcpmp::Trajectory;
use nalgebra::DVector;

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn writer(path: &Path) -> Result<csv::Writer<fs::File>, String> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .map_err(|e| format!("{}: {e}", path.display()))
}

fn write_rows(path: &Path, header: &[String], rows: &[Vec<String>]) -> Result<(), String> {
    let mut w = writer(path)?;
    let ctx = |e: csv::Error| format!("{}: {e}", path.display());
    w.write_record(header).map_err(ctx)?;
    for r in rows {
        w.write_record(r).map_err(ctx)?;
    }
    w.flush().map_err(|e| format!("{}: {e}", path.display()))
}

/// Header and `(line, cells)` records of a CSV file.
type Rows = (Vec<String>, Vec<(usize, Vec<String>)>);

fn read_rows(path: &Path) -> Result<Rows, String> {
    let mut r = csv::Reader::from_path(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let header = r
        .headers()
        .map_err(|e| format!("{}: {e}", path.display()))?
        .iter()
        .map(str::to_owned)
        .collect();
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| format!("{}: {e}", path.display()))?;
        rows.push((i + 2, rec.iter().map(str::to_owned).collect()));
    }
    Ok((header, rows))
}

fn parse_num(path: &Path, line: usize, field: &str) -> Result<f64, String> {
    field
        .trim()
        .parse()
        .map_err(|_| format!("{}:{line}: `{field}` is not a number", path.display()))
}

/// `t, x1..xn, u1..um`; the control cells of the last row are blank.
pub fn write_trajectory(path: &Path, traj: &Trajectory) -> Result<(), String> {
    let n = traj.states.first().map_or(0, |x| x.len());
    let m = traj.controls.first().map_or(0, |u| u.len());
    let mut header = vec!["t".to_string()];
    header.extend((1..=n).map(|i| format!("x{i}")));
    header.extend((1..=m).map(|i| format!("u{i}")));
    let rows: Vec<Vec<String>> = traj
        .states
        .iter()
        .enumerate()
        .map(|(t, x)| {
            let mut row = vec![t.to_string()];
            row.extend(x.iter().map(|&v| num(v)));
            match traj.controls.get(t) {
                Some(u) => row.extend(u.iter().map(|&v| num(v))),
                None => row.extend(std::iter::repeat_n(String::new(), m)),
            }
            row
        })
        .collect();
    write_rows(path, &header, &rows)
}

pub fn read_trajectory(path: &Path) -> Result<Trajectory, String> {
    let (header, rows) = read_rows(path)?;
    let n = header.iter().filter(|h| h.starts_with('x')).count();
    let m = header.iter().filter(|h| h.starts_with('u')).count();
    if header.len() != 1 + n + m || header.first().map(String::as_str) != Some("t") {
        return Err(format!("{}: header must be t, x1..xn, u1..um", path.display()));
    }
    if rows.is_empty() {
        return Err(format!("{}: no rows", path.display()));
    }
    let horizon = rows.len() - 1;
    let mut states = Vec::with_capacity(rows.len());
    let mut controls = Vec::with_capacity(horizon);
    for (t, (line, row)) in rows.iter().enumerate() {
        if row.len() != header.len() {
            return Err(format!("{}:{line}: expected {} fields", path.display(), header.len()));
        }
        if row[0].trim() != t.to_string() {
            return Err(format!("{}:{line}: expected t = {t}", path.display()));
        }
        let x = row[1..=n]
            .iter()
            .map(|f| parse_num(path, *line, f))
            .collect::<Result<Vec<_>, _>>()?;
        states.push(DVector::from_vec(x));
        if t < horizon {
            let u = row[n + 1..]
                .iter()
                .map(|f| parse_num(path, *line, f))
                .collect::<Result<Vec<_>, _>>()?;
            controls.push(DVector::from_vec(u));
        }
    }
    Ok(Trajectory { states, controls })
}

/// Long format `block, index, component, value`, one row per multiplier entry.
pub fn write_multipliers(path: &Path, mult: &Multipliers) -> Result<(), String> {
    let mut rows = vec![vec!["nu".into(), "0".into(), "1".into(), num(mult.nu)]];
    let mut push = |block: &str, index: usize, v: &DVector<f64>| {
        for (k, &x) in v.iter().enumerate() {
            rows.push(vec![block.into(), index.to_string(), (k + 1).to_string(), num(x)]);
        }
    };
    for (t, l) in mult.lambda.iter().enumerate() {
        push("lambda", t, l);
    }
    push("mu_s", 0, &mult.mu_s);
    push("mu_c", 0, &mult.mu_c);
    for (t, e) in mult.eta_x.iter().enumerate() {
        push("eta_x", t, e);
    }
    for (t, e) in mult.eta_u.iter().enumerate() {
        push("eta_u", t, e);
    }
    let header = ["block", "index", "component", "value"].map(String::from);
    write_rows(path, &header, &rows)
}

/// Read multipliers into the shape of `template`, which fixes every dimension.
pub fn read_multipliers(path: &Path, template: &Multipliers) -> Result<Multipliers, String> {
    let (header, rows) = read_rows(path)?;
    if header != ["block", "index", "component", "value"] {
        return Err(format!(
            "{}: header must be block,index,component,value",
            path.display()
        ));
    }
    let mut mult = template.clone();
    let mut seen = 0usize;
    for (line, row) in rows {
        let bad = |what: &str| format!("{}:{line}: {what}", path.display());
        if row.len() != 4 {
            return Err(bad("expected 4 fields"));
        }
        let index: usize = row[1].trim().parse().map_err(|_| bad("bad index"))?;
        let comp: usize = row[2].trim().parse().map_err(|_| bad("bad component"))?;
        let value = parse_num(path, line, &row[3])?;
        let slot = match row[0].trim() {
            "nu" if index == 0 && comp == 1 => Some(&mut mult.nu),
            "lambda" => mult.lambda.get_mut(index).and_then(|v| v.get_mut(comp.wrapping_sub(1))),
            "mu_s" if index == 0 => mult.mu_s.get_mut(comp.wrapping_sub(1)),
            "mu_c" if index == 0 => mult.mu_c.get_mut(comp.wrapping_sub(1)),
            "eta_x" => mult.eta_x.get_mut(index).and_then(|v| v.get_mut(comp.wrapping_sub(1))),
            "eta_u" => mult.eta_u.get_mut(index).and_then(|v| v.get_mut(comp.wrapping_sub(1))),
            other => return Err(bad(&format!("unknown block `{other}`"))),
        };
        *slot.ok_or_else(|| bad("index or component out of range"))? = value;
        seen += 1;
    }
    let expected = 1
        + mult.mu_s.len()
        + mult.mu_c.len()
        + [&mult.lambda, &mult.eta_x, &mult.eta_u]
            .iter()
            .map(|vs| vs.iter().map(|v| v.len()).sum::<usize>())
            .sum::<usize>();
    if seen != expected {
        return Err(format!("{}: expected {expected} entries, found {seen}", path.display()));
    }
    Ok(mult)
}

/// `component, bin, omega_rad_per_sample, re, im, magnitude`.
pub fn write_spectrum(path: &Path, signal: &[DVector<f64>]) -> Result<(), String> {
    let table = spectrum_table(signal).map_err(|e| e.to_string())?;
    let header = ["component", "bin", "omega_rad_per_sample", "re", "im", "magnitude"].map(String::from);
    let rows: Vec<Vec<String>> = table
        .iter()
        .map(|r| {
            vec![
                r.component.to_string(),
                r.bin.to_string(),
                num(r.omega),
                num(r.re),
                num(r.im),
                num(r.magnitude),
            ]
        })
        .collect();
    write_rows(path, &header, &rows)
}

/// `t` and the two series of `pair`; a control cell is blank at `t = T`.
pub fn write_phase(path: &Path, traj: &Trajectory, pair: [(char, usize); 2]) -> Result<(), String> {
    let mut header = vec!["t".to_string()];
    header.extend(pair.iter().map(|(kind, k)| format!("{kind}{}", k + 1)));
    let cell = |t: usize, (kind, k): (char, usize)| -> String {
        let v = if kind == 'x' {
            traj.states.get(t)
        } else {
            traj.controls.get(t)
        };
        v.and_then(|v| v.get(k)).map_or(String::new(), |&x| num(x))
    };
    let rows: Vec<Vec<String>> = (0..traj.states.len())
        .map(|t| vec![t.to_string(), cell(t, pair[0]), cell(t, pair[1])])
        .collect();
    write_rows(path, &header, &rows)
}

pub fn write_comparison(path: &Path, rows: &[(&str, f64, f64)]) -> Result<(), String> {
    let header = ["metric", "pmp", "filtered"].map(String::from);
    let rows: Vec<Vec<String>> = rows
        .iter()
        .map(|(k, a, b)| vec![k.to_string(), num(*a), num(*b)])
        .collect();
    write_rows(path, &header, &rows)
}

pub fn write_text(path: &Path, text: &str) -> Result<(), String> {
    fs::write(path, text).map_err(|e| format!("{}: {e}", path.display()))
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<(), String> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| e.to_string())?;
    text.push('\n');
    write_text(path, &text)
}
