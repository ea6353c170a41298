//! Run the diagnostic suite programmatically (the CLI's `validate`
//! subcommand does the same) and print the report table.
//!
//! ```bash
//! cargo run -p sparsefeed --example diagnostics_table
//! ```

use sparsefeed::diagnostics::{format_report_table, run_suite, SuiteProfile};

fn main() {
    let reports = run_suite(SuiteProfile::Fast, 12345).unwrap();
    print!("{}", format_report_table(&reports));
    let failed = reports.iter().filter(|r| !r.pass).count();
    println!("{} checks, {failed} failed", reports.len());
    std::process::exit(if failed == 0 { 0 } else { 1 });
}
