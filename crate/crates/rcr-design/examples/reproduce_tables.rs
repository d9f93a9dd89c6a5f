//! Reproduce both published optimal-design tables for the two-group
//! straight-line family.
//!
//! Table 1: A-optimal designs under a random intercept. Table 2: D-optimal
//! designs under a random slope. Each of the twelve rows varies the group
//! sizes (n₁, n₂) and observations per unit (m₁, m₂); the solver runs on the
//! exact two-point grid and the weights are rounded to the printed three
//! decimals.

use rcr_design::straightline::{reproduce_table, write_table_csv};

fn main() -> rcr_design::Result<()> {
    for (id, title) in [
        (1u8, "A-optimal designs, random intercept (d = 1)"),
        (2u8, "D-optimal designs, random slope (d = 1)"),
    ] {
        println!("table {id}: {title}");
        let rows = reproduce_table(id)?;
        let mut csv = Vec::new();
        write_table_csv(&rows, &mut csv)?;
        print!("{}", String::from_utf8_lossy(&csv));
        println!();
    }
    Ok(())
}
