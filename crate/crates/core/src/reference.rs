//! Published copies of the three codebook tables, kept as data so that
//! regenerated tables can be checked cell by cell.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::codebook::{
    build_table1, build_table2, build_table3_for, symbolic, GeneralizedParams, Table1, Table2,
    Table3, MESSAGE_COLUMNS, TABLE1_ROWS, TABLE2_ROWS, TABLE3_COLUMNS,
};
use crate::qstate::{BellLabel, Side};

use BellLabel::{PhiMinus as PM, PhiPlus as PP, PsiMinus as SM, PsiPlus as SP};

/// Table 1: rows φ+, ψ+, ψ-, φ-; columns 00, 10, 11, 01.
pub const TABLE1: [[BellLabel; 4]; 4] = [
    [PP, SP, SM, PM], // row φ+
    [SP, PP, PM, SM], // row ψ+
    [SM, PM, PP, SP], // row ψ-
    [PM, SM, SP, PP], // row φ-
];

/// Table 2, first entry of each cell (encoding on the second particle):
/// rows ω+, χ+, χ-, ω-; columns 00, 10, 11, 01.
pub const TABLE2_SIDE_B: [[&str; 4]; 4] = [
    ["|ω+⟩", "|χ+⟩", "-|χ-⟩", "|ω-⟩"], // row ω+
    ["|χ+⟩", "|ω+⟩", "|ω-⟩", "-|χ-⟩"], // row χ+
    ["|χ-⟩", "|ω-⟩", "|ω+⟩", "-|χ+⟩"], // row χ-
    ["|ω-⟩", "|χ-⟩", "-|χ+⟩", "|ω+⟩"], // row ω-
];

/// Table 2, parenthetical entry of each cell (encoding on the first
/// particle), written for α ≠ β.
pub const TABLE2_SIDE_A: [[&str; 4]; 4] = [
    ["|ω+⟩", "α|10⟩ + β|01⟩", "-α|10⟩ + β|01⟩", "|ω-⟩"], // row ω+
    ["|χ+⟩", "α|11⟩ + β|00⟩", "-α|11⟩ + β|00⟩", "|χ-⟩"], // row χ+
    ["|χ-⟩", "α|11⟩ - β|00⟩", "-α|11⟩ - β|00⟩", "|χ+⟩"], // row χ-
    ["|ω-⟩", "α|10⟩ - β|01⟩", "-α|10⟩ - β|01⟩", "|ω+⟩"], // row ω-
];

/// Table 3: rows are messages 00, 01, 10, 11; columns φ+, φ-, ψ+, ψ-.
/// The same entries are printed for both communicants.
pub const TABLE3: [[BellLabel; 4]; 4] = [
    [PP, PM, SP, SM], // 00
    [PM, PP, SM, SP], // 01
    [SP, SM, PP, PM], // 10
    [SM, SP, PM, PP], // 11
];

/// A cell where a regenerated table disagrees with the published one.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mismatch {
    pub table: &'static str,
    pub row: String,
    pub column: String,
    pub expected: String,
    pub found: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Verification {
    pub checked: usize,
    pub mismatches: Vec<Mismatch>,
}

impl Verification {
    pub fn matched(&self) -> usize {
        self.checked - self.mismatches.len()
    }

    pub fn passed(&self) -> bool {
        self.mismatches.is_empty()
    }

    pub fn merge(mut self, other: Verification) -> Self {
        self.checked += other.checked;
        self.mismatches.extend(other.mismatches);
        self
    }

    fn check(&mut self, table: &'static str, row: &str, col: &str, expected: &str, found: &str) {
        self.checked += 1;
        if expected != found {
            self.mismatches.push(Mismatch {
                table,
                row: row.into(),
                column: col.into(),
                expected: expected.into(),
                found: found.into(),
            });
        }
    }
}

pub fn verify_table1(t: &Table1) -> Verification {
    let mut v = Verification::default();
    for (r, row) in TABLE1_ROWS.iter().enumerate() {
        for (c, msg) in MESSAGE_COLUMNS.iter().enumerate() {
            let found = t.get(row, msg).map_or("missing", |l| l.symbol());
            v.check("table1", row.symbol(), &msg.to_string(), TABLE1[r][c].symbol(), found);
        }
    }
    v
}

fn verify_table3_side(t: &Table3, table: &'static str) -> Verification {
    let mut v = Verification::default();
    for (r, msg) in crate::codebook::TwoBitMessage::ALL.iter().enumerate() {
        for (c, is) in TABLE3_COLUMNS.iter().enumerate() {
            let found = t.get(msg, is).map_or("missing", |l| l.symbol());
            v.check(table, &msg.to_string(), is.symbol(), TABLE3[r][c].symbol(), found);
        }
    }
    v
}

pub fn verify_table3(t: &Table3) -> Verification {
    verify_table3_side(t, "table3")
}

/// Side-B (first) entries of the generalized table, including signs.
pub fn verify_table2_side_b(t: &Table2, params: &GeneralizedParams) -> Verification {
    let mut v = Verification::default();
    for (r, row) in TABLE2_ROWS.iter().enumerate() {
        for (c, msg) in MESSAGE_COLUMNS.iter().enumerate() {
            let cell = t.cell(r, c);
            let found = symbolic(&cell.side_b, &cell.side_b_state, params);
            v.check("table2", row.symbol(), &msg.to_string(), TABLE2_SIDE_B[r][c], &found);
        }
    }
    v
}

/// Side-A (parenthetical) entries; only meaningful for α ≠ β, where the
/// unclassifiable kets can be told apart symbolically.
pub fn verify_table2_side_a(t: &Table2, params: &GeneralizedParams) -> Verification {
    let mut v = Verification::default();
    for (r, row) in TABLE2_ROWS.iter().enumerate() {
        for (c, msg) in MESSAGE_COLUMNS.iter().enumerate() {
            let cell = t.cell(r, c);
            let found = symbolic(&cell.side_a, &cell.side_a_state, params);
            v.check("table2-parenthetical", row.symbol(), &msg.to_string(), TABLE2_SIDE_A[r][c], &found);
        }
    }
    v
}

/// Regenerates tables 1, 2 (side B, at `params`) and 3 (both communicants'
/// copies must agree with the published one) and checks all 48 cells.
pub fn verify_all(params: &GeneralizedParams) -> Verification {
    let t3a = build_table3_for(Side::A);
    let t3b = build_table3_for(Side::B);
    let mut bob_copy = verify_table3_side(&t3b, "table3-bob");
    // the Bob copy is reported only on disagreement; it is not counted twice
    bob_copy.checked = bob_copy.mismatches.len();
    verify_table1(&build_table1())
        .merge(verify_table2_side_b(&build_table2(params), params))
        .merge(verify_table3(&t3a))
        .merge(bob_copy)
}
