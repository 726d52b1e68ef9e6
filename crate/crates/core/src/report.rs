//! Plain-text table output shared by the library reports and the CLI.

use std::fmt::Write as _;

/// Round-trip float formatting: 17 significant digits in scientific form.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// CSV table with a mandatory header row. Cells are written verbatim.
#[derive(Debug, Clone, PartialEq)]
pub struct Csv {
    out: String,
    width: usize,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        Self {
            out: header.join(",") + "\n",
            width: header.len(),
        }
    }

    pub fn row<I, S>(&mut self, cells: I)
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut count = 0;
        for (i, cell) in cells.into_iter().enumerate() {
            if i > 0 {
                self.out.push(',');
            }
            self.out.push_str(cell.as_ref());
            count += 1;
        }
        debug_assert_eq!(count, self.width, "row width differs from header");
        self.out.push('\n');
    }

    pub fn float_row(&mut self, values: &[f64]) {
        self.row(values.iter().map(|&v| fmt_f64(v)));
    }

    pub fn finish(self) -> String {
        self.out
    }
}

/// Appends `key=value` pairs separated by spaces; used for one-line summaries.
pub fn summary_line(pairs: &[(&str, String)]) -> String {
    let mut s = String::new();
    for (i, (k, v)) in pairs.iter().enumerate() {
        if i > 0 {
            s.push(' ');
        }
        write!(s, "{k}={v}").expect("write to String");
    }
    s
}
