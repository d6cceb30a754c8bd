//! Text and CSV rendering of the three codebook tables.

use std::fmt::Write as _;

use bqdc_core::codebook::{
    build_table1, build_table2, build_table3, symbolic, GeneralizedParams, Table1, Table2, Table2Cell,
    Table3,
};

use crate::report::csv_field;

pub const TABLE1_HEADER: &str = "initial,00,10,11,01";
pub const TABLE2_HEADER: &str = "initial,message,side_b,side_b_residual,side_a,side_a_residual";
pub const TABLE3_HEADER: &str = "message,phi+,phi-,psi+,psi-";

pub struct Tables {
    pub params: GeneralizedParams,
    pub t1: Table1,
    pub t2: Table2,
    pub t3: Table3,
}

impl Tables {
    pub fn build(params: GeneralizedParams) -> Self {
        Tables {
            params,
            t1: build_table1(),
            t2: build_table2(&params),
            t3: build_table3(),
        }
    }

    /// Side-A cells that match no member of the generalized family.
    pub fn unmatched_side_a(&self) -> usize {
        self.t2.cells().iter().filter(|c| c.side_a.matched.is_none()).count()
    }

    pub fn unmatched_side_b(&self) -> usize {
        self.t2.cells().iter().filter(|c| c.side_b.matched.is_none()).count()
    }

    fn side_b(&self, c: &Table2Cell) -> String {
        symbolic(&c.side_b, &c.side_b_state, &self.params)
    }

    fn side_a(&self, c: &Table2Cell) -> String {
        symbolic(&c.side_a, &c.side_a_state, &self.params)
    }

    pub fn table1_text(&self) -> String {
        let mut out = String::from("table 1: initial state x message -> measured state\n");
        let _ = write!(out, "{:<6}", "IS");
        for m in self.t1.col_keys() {
            let _ = write!(out, "{:<6}", m.to_string());
        }
        out.truncate(out.trim_end().len());
        out.push('\n');
        for (r, is) in self.t1.row_keys().iter().enumerate() {
            let _ = write!(out, "{:<6}", is.symbol());
            for l in self.t1.row(r) {
                let _ = write!(out, "{:<6}", l.symbol());
            }
            out.truncate(out.trim_end().len());
            out.push('\n');
        }
        out
    }

    /// Each cell is `side-B (side-A)`; a trailing `*` flags a side-A entry
    /// outside the generalized family.
    pub fn table2_text(&self) -> String {
        let mut out = format!(
            "table 2: generalized states, alpha={:.6} beta={:.6}; cells are side-B (side-A)\n",
            self.params.alpha(),
            self.params.beta()
        );
        let cells: Vec<Vec<String>> = (0..4)
            .map(|r| {
                self.t2
                    .row(r)
                    .iter()
                    .map(|c| {
                        let flag = if c.side_a.matched.is_none() { "*" } else { "" };
                        format!("{} ({}){flag}", self.side_b(c), self.side_a(c))
                    })
                    .collect()
            })
            .collect();
        let width = cells.iter().flatten().map(|c| c.chars().count()).max().unwrap_or(0) + 2;
        let pad = |s: &str| format!("{s}{}", " ".repeat(width.saturating_sub(s.chars().count())));
        let _ = write!(out, "{:<6}", "IS");
        for m in self.t2.col_keys() {
            out.push_str(&pad(&m.to_string()));
        }
        out.truncate(out.trim_end().len());
        out.push('\n');
        for (row, label) in cells.iter().zip(self.t2.row_keys()) {
            let _ = write!(out, "{:<6}", label.symbol());
            for c in row {
                out.push_str(&pad(c));
            }
            out.truncate(out.trim_end().len());
            out.push('\n');
        }
        let _ = writeln!(out, "unmatched side-A entries: {}", self.unmatched_side_a());
        let _ = writeln!(out, "unmatched side-B entries: {}", self.unmatched_side_b());
        out
    }

    pub fn table3_text(&self) -> String {
        let mut out = String::from("table 3: message x initial state -> measured state (both communicants)\n");
        let _ = write!(out, "{:<6}", "msg");
        for is in self.t3.col_keys() {
            let _ = write!(out, "{:<6}", is.symbol());
        }
        out.truncate(out.trim_end().len());
        out.push('\n');
        for (r, m) in self.t3.row_keys().iter().enumerate() {
            let _ = write!(out, "{:<6}", m.to_string());
            for l in self.t3.row(r) {
                let _ = write!(out, "{:<6}", l.symbol());
            }
            out.truncate(out.trim_end().len());
            out.push('\n');
        }
        out
    }

    pub fn table1_csv(&self) -> String {
        let mut out = format!("{TABLE1_HEADER}\n");
        for (r, is) in self.t1.row_keys().iter().enumerate() {
            let cells: Vec<&str> = self.t1.row(r).iter().map(|l| l.name()).collect();
            let _ = writeln!(out, "{},{}", is.name(), cells.join(","));
        }
        out
    }

    pub fn table2_csv(&self) -> String {
        let mut out = format!("{TABLE2_HEADER}\n");
        for (r, label) in self.t2.row_keys().iter().enumerate() {
            for (c, m) in self.t2.col_keys().iter().enumerate() {
                let cell = self.t2.cell(r, c);
                let _ = writeln!(
                    out,
                    "{},{},{},{:.12},{},{:.12}",
                    label.name(),
                    m,
                    csv_field(&self.side_b(cell)),
                    cell.side_b.residual.max(0.0),
                    csv_field(&self.side_a(cell)),
                    cell.side_a.residual.max(0.0)
                );
            }
        }
        out
    }

    pub fn table3_csv(&self) -> String {
        let mut out = format!("{TABLE3_HEADER}\n");
        for (r, m) in self.t3.row_keys().iter().enumerate() {
            let cells: Vec<&str> = self.t3.row(r).iter().map(|l| l.name()).collect();
            let _ = writeln!(out, "{m},{}", cells.join(","));
        }
        out
    }
}
