//! Bundled golden outputs and the comparison used by `--check`.

use crate::table::Table;

pub const TABLE1_CSV: &str = include_str!("../golden/table1.csv");
pub const TABLE2_CSV: &str = include_str!("../golden/table2.csv");

/// Relative and absolute tolerance for numeric cells against a golden file.
pub const GOLDEN_RTOL: f64 = 1e-9;
pub const GOLDEN_ATOL: f64 = 1e-12;

fn parse(csv_text: &str) -> Result<(Vec<String>, Vec<Vec<String>>), String> {
    let body: String = csv_text.lines().filter(|l| !l.starts_with('#')).map(|l| format!("{l}\n")).collect();
    let mut reader = csv::Reader::from_reader(body.as_bytes());
    let header = reader.headers().map_err(|e| e.to_string())?.iter().map(String::from).collect();
    let rows = reader
        .records()
        .map(|r| r.map(|rec| rec.iter().map(String::from).collect()).map_err(|e| e.to_string()))
        .collect::<Result<_, _>>()?;
    Ok((header, rows))
}

fn cells_match(a: &str, b: &str) -> bool {
    if a == b {
        return true;
    }
    match (a.parse::<f64>(), b.parse::<f64>()) {
        (Ok(x), Ok(y)) => (x - y).abs() <= GOLDEN_ATOL + GOLDEN_RTOL * y.abs(),
        _ => false,
    }
}

/// Cell-by-cell comparison of `table` against golden CSV text; returns one message per mismatch.
pub fn compare(table: &Table, golden_csv: &str) -> Vec<String> {
    let computed = match table.to_csv().map_err(|e| e.to_string()).and_then(|s| parse(&s)) {
        Ok(v) => v,
        Err(e) => return vec![format!("cannot render output: {e}")],
    };
    let golden = match parse(golden_csv) {
        Ok(v) => v,
        Err(e) => return vec![format!("cannot read golden file: {e}")],
    };
    if computed.0 != golden.0 {
        return vec![format!("columns differ from golden file: {:?} vs {:?}", computed.0, golden.0)];
    }
    if computed.1.len() != golden.1.len() {
        return vec![format!("{} rows, golden file has {}", computed.1.len(), golden.1.len())];
    }
    let mut out = Vec::new();
    for (row, (c, g)) in computed.1.iter().zip(&golden.1).enumerate() {
        for (k, (a, b)) in c.iter().zip(g).enumerate() {
            if !cells_match(a, b) {
                out.push(format!("row {row} column {}: {a} (golden {b})", computed.0[k]));
            }
        }
    }
    out
}
