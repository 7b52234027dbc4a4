use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;
use stackdrive::experiments::Verdict;

use crate::CliError;

pub fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::io(path, e))
}

pub fn write_rows<R: Serialize>(
    path: &Path,
    rows: impl IntoIterator<Item = R>,
) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(create(path)?);
    for row in rows {
        w.serialize(row)
            .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut w = create(path)?;
    let text = serde_json::to_string_pretty(value).expect("summary serialises");
    writeln!(w, "{text}")
        .and_then(|_| w.flush())
        .map_err(|e| CliError::io(path, e))
}

#[derive(Serialize)]
struct VerdictRow<'a> {
    name: &'a str,
    passed: bool,
    detail: &'a str,
}

pub const VERDICT_FILE: &str = "verdicts.csv";

/// Write the verdict file, echo one line per verdict and fail with the
/// number of failed checks.
pub fn report_verdicts(dir: &Path, verdicts: &[Verdict]) -> Result<(), CliError> {
    write_rows(
        &dir.join(VERDICT_FILE),
        verdicts.iter().map(|v| VerdictRow {
            name: &v.name,
            passed: v.passed,
            detail: &v.detail,
        }),
    )?;
    for v in verdicts {
        println!(
            "{} {} ({})",
            if v.passed { "PASS" } else { "FAIL" },
            v.name,
            v.detail
        );
    }
    let failed = verdicts.iter().filter(|v| !v.passed).count();
    if failed > 0 {
        Err(CliError::Verdict { failed })
    } else {
        Ok(())
    }
}
