use serde_json::{Map, Value};

use crate::CliError;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    F(f64),
    I(i64),
    B(bool),
    S(String),
}

impl Cell {
    /// Round-trip text form, also used for non-finite JSON numbers.
    pub fn text(&self) -> String {
        match self {
            Cell::F(v) => format!("{v:?}"),
            Cell::I(v) => v.to_string(),
            Cell::B(v) => v.to_string(),
            Cell::S(v) => v.clone(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::F(v) if v.is_finite() => serde_json::Number::from_f64(*v).map_or(Value::Null, Value::Number),
            Cell::F(_) => Value::String(self.text()),
            Cell::I(v) => Value::from(*v),
            Cell::B(v) => Value::Bool(*v),
            Cell::S(v) => Value::String(v.clone()),
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::F(v)
    }
}
impl From<i64> for Cell {
    fn from(v: i64) -> Self {
        Cell::I(v)
    }
}
impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::I(v as i64)
    }
}
impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::I(v as i64)
    }
}
impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::B(v)
    }
}
impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::S(v)
    }
}
impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::S(v.to_string())
    }
}

#[macro_export]
macro_rules! row {
    ($($v:expr),* $(,)?) => { vec![$($crate::table::Cell::from($v)),*] };
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Table { columns: columns.iter().map(|c| c.to_string()).collect(), rows: vec![] }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len(), "row width");
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<&Cell>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| &r[i]).collect())
    }

    pub fn floats(&self, name: &str) -> Vec<f64> {
        self.column(name)
            .unwrap_or_default()
            .into_iter()
            .filter_map(|c| match c {
                Cell::F(v) => Some(*v),
                Cell::I(v) => Some(*v as f64),
                _ => None,
            })
            .collect()
    }
}

/// A finished table with its `# key = value` header lines.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub header: Vec<String>,
    pub table: Table,
    pub pass: bool,
}

impl Report {
    pub fn to_csv(&self) -> Result<String, CliError> {
        let mut out = String::new();
        for h in &self.header {
            out.push_str("# ");
            out.push_str(h);
            out.push('\n');
        }
        let mut w = csv::Writer::from_writer(vec![]);
        w.write_record(&self.table.columns)?;
        for r in &self.table.rows {
            w.write_record(r.iter().map(Cell::text))?;
        }
        let body = w.into_inner().map_err(|e| CliError::Io(e.into_error()))?;
        out.push_str(&String::from_utf8(body).expect("csv is utf-8"));
        Ok(out)
    }

    pub fn to_json(&self) -> String {
        let rows: Vec<Value> = self
            .table
            .rows
            .iter()
            .map(|r| {
                let m: Map<String, Value> = self.table.columns.iter().cloned().zip(r.iter().map(Cell::json)).collect();
                Value::Object(m)
            })
            .collect();
        let doc = serde_json::json!({
            "header": self.header,
            "pass": self.pass,
            "columns": self.table.columns,
            "rows": rows,
        });
        let mut s = serde_json::to_string_pretty(&doc).expect("json serializes");
        s.push('\n');
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trips_floats() {
        let mut t = Table::new(&["x", "label", "ok"]);
        let x = 0.1 + 0.2;
        t.push(row![x, "a,b", true]);
        t.push(row![f64::INFINITY, "c", false]);
        let r = Report { header: vec!["experiment = \"demo\"".into()], table: t, pass: false };
        let csv = r.to_csv().unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "# experiment = \"demo\"");
        assert_eq!(lines[1], "x,label,ok");
        assert_eq!(lines[2], "0.30000000000000004,\"a,b\",true");
        assert_eq!(lines[3].split(',').next().unwrap().parse::<f64>().unwrap(), f64::INFINITY);
        assert_eq!(lines[2].split(',').next().unwrap().parse::<f64>().unwrap(), x);
    }

    #[test]
    fn json_mirrors_columns() {
        let mut t = Table::new(&["x", "n"]);
        t.push(row![1.5, 3usize]);
        t.push(row![f64::NAN, 4usize]);
        let r = Report { header: vec![], table: t, pass: true };
        let v: Value = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(v["columns"][1], "n");
        assert_eq!(v["rows"][0]["x"], 1.5);
        assert_eq!(v["rows"][1]["x"], "NaN");
    }
}
