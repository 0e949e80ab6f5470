//! Experimental data in `y,d,x1[,x2,...]` CSV form.

use std::path::Path;

use regret_bw::{Arm, ExperimentDesign};

use crate::error::{CliError, CliResult};

pub const OUTCOME_NOTICE: &str = "notice: outcome column y is validated but not used; \
the maximum regret depends only on the covariates of each arm";

fn data_error(path: &Path, line: u64, message: impl Into<String>) -> CliError {
    CliError::Data { path: path.to_owned(), line, message: message.into() }
}

fn binary(path: &Path, line: u64, name: &str, field: &str) -> CliResult<bool> {
    match field.trim() {
        "0" => Ok(false),
        "1" => Ok(true),
        other => Err(data_error(path, line, format!("{name} must be 0 or 1, got {other:?}"))),
    }
}

/// Reads a dataset and translates covariates so that `target` (the origin
/// when absent) becomes the origin.
pub fn load_dataset(path: &Path, target: Option<&[f64]>, lipschitz_c: f64) -> CliResult<ExperimentDesign> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let header = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    let names: Vec<&str> = header.iter().collect();
    if names.len() < 3 || names[0] != "y" || names[1] != "d" {
        return Err(data_error(path, 1, format!("header must be y,d,x1[,x2,...], got {}", names.join(","))));
    }
    let dim = names.len() - 2;
    let target = match target {
        Some(t) if t.len() != dim => {
            return Err(regret_bw::Error::Dimension { what: "target point", expected: dim, got: t.len() }.into());
        }
        Some(t) => t.to_vec(),
        None => vec![0.0; dim],
    };

    let (mut x1, mut x0) = (Vec::new(), Vec::new());
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map_or(0, |p| p.line());
        binary(path, line, "y", &record[0])?;
        let treated = binary(path, line, "d", &record[1])?;
        let x = record
            .iter()
            .skip(2)
            .zip(&target)
            .enumerate()
            .map(|(k, (field, t))| match field.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v - t),
                _ => Err(data_error(path, line, format!("{} must be a finite number, got {field:?}", names[k + 2]))),
            })
            .collect::<CliResult<Vec<f64>>>()?;
        if treated {
            x1.push(x);
        } else {
            x0.push(x);
        }
    }
    Ok(ExperimentDesign::new(x1, x0, lipschitz_c)?)
}

fn csv_error(path: &Path, e: csv::Error) -> CliError {
    let line = e.position().map_or(0, |p| p.line());
    match e.kind() {
        csv::ErrorKind::Io(_) => CliError::Io { path: path.to_owned(), source: std::io::Error::other(e.to_string()) },
        _ => data_error(path, line, e.to_string()),
    }
}

/// Writes a design as a dataset (outcomes set to 0), treated rows first.
pub fn write_design_csv(design: &ExperimentDesign, path: &Path) -> CliResult<()> {
    let io = |e: csv::Error| CliError::Io { path: path.to_owned(), source: std::io::Error::other(e.to_string()) };
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    let mut header = vec!["y".to_string(), "d".to_string()];
    header.extend((1..=design.dim()).map(|k| format!("x{k}")));
    w.write_record(&header).map_err(io)?;
    for (arm, d) in [(Arm::Treated, "1"), (Arm::Control, "0")] {
        for x in design.covariates(arm) {
            let mut row = vec!["0".to_string(), d.to_string()];
            row.extend(x.iter().map(|v| v.to_string()));
            w.write_record(&row).map_err(io)?;
        }
    }
    w.flush().map_err(|source| CliError::Io { path: path.to_owned(), source })?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn file(body: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(body.as_bytes()).unwrap();
        f
    }

    #[test]
    fn splits_arms() {
        let f = file("y,d,x1\n1,1,-1\n0,1,1\n1,0,-1\n0,0,1\n");
        let d = load_dataset(f.path(), None, 0.1).unwrap();
        assert_eq!(d.covariates(Arm::Treated), &[vec![-1.0], vec![1.0]]);
        assert_eq!(d.covariates(Arm::Control), &[vec![-1.0], vec![1.0]]);
    }

    #[test]
    fn translates_to_target() {
        let f = file("y,d,x1\n0,1,0\n0,0,1\n");
        let d = load_dataset(f.path(), Some(&[0.5]), 0.1).unwrap();
        assert_eq!(d.covariates(Arm::Treated), &[vec![-0.5]]);
        assert_eq!(d.covariates(Arm::Control), &[vec![0.5]]);
    }

    #[test]
    fn names_offending_line() {
        let f = file("y,d,x1\n0,1,0\n2,0,1\n");
        let err = load_dataset(f.path(), None, 0.1).unwrap_err();
        assert!(matches!(err, CliError::Data { line: 3, .. }), "{err}");
        assert_eq!(err.exit_code(), 3);
        assert!(err.to_string().contains("line 3"));
    }

    #[test]
    fn bad_number_and_ragged_rows() {
        let f = file("y,d,x1\n0,1,abc\n");
        assert!(matches!(load_dataset(f.path(), None, 0.1), Err(CliError::Data { line: 2, .. })));
        let f = file("y,d,x1\n0,1,0\n0,0,1,2\n");
        assert!(matches!(load_dataset(f.path(), None, 0.1), Err(CliError::Data { line: 3, .. })));
    }

    #[test]
    fn empty_arm_and_bad_header() {
        let f = file("y,d,x1\n0,1,0\n1,1,1\n");
        let err = load_dataset(f.path(), None, 0.1).unwrap_err();
        assert!(matches!(err, CliError::Core(regret_bw::Error::InvalidDesign(_))));
        let f = file("d,y,x1\n0,1,0\n");
        assert_eq!(load_dataset(f.path(), None, 0.1).unwrap_err().exit_code(), 3);
    }

    #[test]
    fn target_dimension() {
        let f = file("y,d,x1,x2\n0,1,0,0\n0,0,1,1\n");
        assert!(load_dataset(f.path(), Some(&[0.0]), 0.1).is_err());
        let d = load_dataset(f.path(), Some(&[1.0, 1.0]), 0.1).unwrap();
        assert_eq!(d.covariates(Arm::Control), &[vec![0.0, 0.0]]);
    }

    #[test]
    fn round_trip() {
        let d = regret_bw::make_grid_design(7, 4, 0.2).unwrap();
        let f = tempfile::NamedTempFile::new().unwrap();
        write_design_csv(&d, f.path()).unwrap();
        assert_eq!(load_dataset(f.path(), None, 0.2).unwrap(), d);
    }
}
