use std::fmt::Write as _;

/// One CSV field.
#[derive(Debug, Clone, PartialEq)]
pub enum Field {
    F(f64),
    U(u64),
    B(bool),
    S(String),
    Empty,
}

impl From<f64> for Field {
    fn from(v: f64) -> Self {
        Field::F(v)
    }
}
impl From<usize> for Field {
    fn from(v: usize) -> Self {
        Field::U(v as u64)
    }
}
impl From<u64> for Field {
    fn from(v: u64) -> Self {
        Field::U(v)
    }
}
impl From<bool> for Field {
    fn from(v: bool) -> Self {
        Field::B(v)
    }
}
impl From<&str> for Field {
    fn from(v: &str) -> Self {
        Field::S(v.to_string())
    }
}
impl From<String> for Field {
    fn from(v: String) -> Self {
        Field::S(v)
    }
}
impl<T: Into<Field>> From<Option<T>> for Field {
    fn from(v: Option<T>) -> Self {
        v.map_or(Field::Empty, Into::into)
    }
}

/// 17 significant digits, '.' decimal point.
pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "nan".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

impl Field {
    fn render(&self) -> String {
        match self {
            Field::F(v) => fmt_f64(*v),
            Field::U(v) => v.to_string(),
            Field::B(v) => v.to_string(),
            Field::S(s) => s.clone(),
            Field::Empty => String::new(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Field>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Table { columns: columns.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Field>) {
        assert_eq!(row.len(), self.columns.len(), "row width");
        self.rows.push(row);
    }

    /// RFC 4180: CRLF line ends, fields quoted when they contain a comma,
    /// quote or line break.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let line = |out: &mut String, fields: &mut dyn Iterator<Item = String>| {
            let parts: Vec<String> = fields.map(|f| quote(&f)).collect();
            let _ = write!(out, "{}\r\n", parts.join(","));
        };
        line(&mut out, &mut self.columns.iter().cloned());
        for r in &self.rows {
            line(&mut out, &mut r.iter().map(Field::render));
        }
        out
    }
}

fn quote(s: &str) -> String {
    if s.contains([',', '"', '\r', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_precision_round_trips() {
        for v in [1.0 / 6.0, -3.0e-300, 123456789.123456789, 0.1 + 0.2] {
            assert_eq!(fmt_f64(v).parse::<f64>().unwrap(), v);
        }
        assert_eq!(fmt_f64(1.0 / 6.0), "1.6666666666666666e-1");
    }

    #[test]
    fn quoting_follows_rfc4180() {
        let mut t = Table::new(&["a", "b"]);
        t.push(vec![Field::S("x,y".into()), Field::S("say \"hi\"".into())]);
        assert_eq!(t.to_csv(), "a,b\r\n\"x,y\",\"say \"\"hi\"\"\"\r\n");
    }
}
