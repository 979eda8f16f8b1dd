//! LP and MPS text export, and solution-file import.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use super::{LpModel, LpError, Sense};

fn fmt_num(v: f64) -> String {
    // 12+ significant digits, trimmed of trailing zeros for readability
    let s = format!("{v:.12e}");
    s
}

/// Writes the model in CPLEX LP text format.
pub fn export_lp(model: &LpModel, path: &Path) -> Result<(), LpError> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_lp(model, &mut w)
}

pub fn write_lp<W: Write>(model: &LpModel, w: &mut W) -> Result<(), LpError> {
    writeln!(w, "\\ {} variables, {} rows", model.n_vars(), model.rows.len())?;
    writeln!(w, "Minimize")?;
    write!(w, " obj:")?;
    let mut line_len = 5;
    let mut first = true;
    for (i, c) in model.objective.iter().enumerate() {
        if *c == 0.0 {
            continue;
        }
        let term = if *c < 0.0 || first {
            format!(" {} {}", fmt_num(*c), model.var_names[i])
        } else {
            format!(" + {} {}", fmt_num(*c), model.var_names[i])
        };
        first = false;
        if line_len + term.len() > 240 {
            writeln!(w)?;
            write!(w, "   ")?;
            line_len = 3;
        }
        write!(w, "{term}")?;
        line_len += term.len();
    }
    if model.objective_constant != 0.0 {
        write!(w, " + {}", fmt_num(model.objective_constant))?;
    }
    writeln!(w)?;
    writeln!(w, "Subject To")?;
    for row in &model.rows {
        write!(w, " {}:", row.name)?;
        let mut line_len = row.name.len() + 2;
        let mut first = true;
        for (v, c) in &row.coeffs {
            let term = if *c < 0.0 || first {
                format!(" {} {}", fmt_num(*c), model.var_names[*v])
            } else {
                format!(" + {} {}", fmt_num(*c), model.var_names[*v])
            };
            first = false;
            if line_len + term.len() > 240 {
                writeln!(w)?;
                write!(w, "   ")?;
                line_len = 3;
            }
            write!(w, "{term}")?;
            line_len += term.len();
        }
        let op = match row.sense {
            Sense::Le => "<=",
            Sense::Eq => "=",
            Sense::Ge => ">=",
        };
        writeln!(w, " {op} {}", fmt_num(row.rhs))?;
    }
    writeln!(w, "Bounds")?;
    for i in 0..model.n_vars() {
        let (lb, ub) = (model.lower[i], model.upper[i]);
        if lb == 0.0 && ub == f64::INFINITY {
            continue; // LP-format default
        }
        if ub == f64::INFINITY {
            writeln!(w, " {} >= {}", model.var_names[i], fmt_num(lb))?;
        } else {
            writeln!(w, " {} <= {} <= {}", fmt_num(lb), model.var_names[i], fmt_num(ub))?;
        }
    }
    writeln!(w, "End")?;
    Ok(())
}

/// Writes the model in free MPS format. The objective constant is encoded as
/// the customary negated RHS entry on the objective row.
pub fn export_mps(model: &LpModel, path: &Path) -> Result<(), LpError> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_mps(model, &mut w)
}

pub fn write_mps<W: Write>(model: &LpModel, w: &mut W) -> Result<(), LpError> {
    writeln!(w, "NAME          EAMOD")?;
    writeln!(w, "ROWS")?;
    writeln!(w, " N  COST")?;
    for row in &model.rows {
        let tag = match row.sense {
            Sense::Le => "L",
            Sense::Eq => "E",
            Sense::Ge => "G",
        };
        writeln!(w, " {tag}  {}", row.name)?;
    }
    // column-major coefficients
    let mut by_var: Vec<Vec<(usize, f64)>> = vec![Vec::new(); model.n_vars()];
    for (ri, row) in model.rows.iter().enumerate() {
        for (v, c) in &row.coeffs {
            by_var[*v].push((ri, *c));
        }
    }
    writeln!(w, "COLUMNS")?;
    for (v, entries) in by_var.iter().enumerate() {
        let name = &model.var_names[v];
        if model.objective[v] != 0.0 {
            writeln!(w, "    {name}  COST  {}", fmt_num(model.objective[v]))?;
        }
        for (ri, c) in entries {
            writeln!(w, "    {name}  {}  {}", model.rows[*ri].name, fmt_num(*c))?;
        }
    }
    writeln!(w, "RHS")?;
    if model.objective_constant != 0.0 {
        writeln!(w, "    RHS  COST  {}", fmt_num(-model.objective_constant))?;
    }
    for row in &model.rows {
        if row.rhs != 0.0 {
            writeln!(w, "    RHS  {}  {}", row.name, fmt_num(row.rhs))?;
        }
    }
    writeln!(w, "BOUNDS")?;
    for i in 0..model.n_vars() {
        let (lb, ub) = (model.lower[i], model.upper[i]);
        if lb != 0.0 {
            writeln!(w, " LO BND  {}  {}", model.var_names[i], fmt_num(lb))?;
        }
        if ub != f64::INFINITY {
            writeln!(w, " UP BND  {}  {}", model.var_names[i], fmt_num(ub))?;
        }
    }
    writeln!(w, "ENDATA")?;
    Ok(())
}

/// Reads an external solver's solution as `name value` pairs, one per line.
/// Blank lines and lines starting with `#` are ignored; variables absent from
/// the file default to zero. Unknown names are an error.
pub fn import_solution(model: &LpModel, path: &Path) -> Result<Vec<f64>, LpError> {
    let file = std::fs::File::open(path)?;
    read_solution(model, file)
}

pub fn read_solution<R: Read>(model: &LpModel, reader: R) -> Result<Vec<f64>, LpError> {
    let index: HashMap<&str, usize> = model
        .var_names
        .iter()
        .enumerate()
        .map(|(i, n)| (n.as_str(), i))
        .collect();
    let mut x = vec![0.0; model.n_vars()];
    for line in BufReader::new(reader).lines() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split_whitespace();
        let (Some(name), Some(value)) = (parts.next(), parts.next()) else {
            return Err(LpError::Parse(format!("malformed solution line `{line}`")));
        };
        let Some(&vi) = index.get(name) else {
            return Err(LpError::NameMismatch { name: name.into() });
        };
        x[vi] = value
            .parse::<f64>()
            .map_err(|e| LpError::Parse(format!("bad value for {name}: {e}")))?;
    }
    Ok(x)
}
