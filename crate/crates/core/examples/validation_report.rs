//! Printed versus corrected closed forms, judged against the simulation.

use qnd_cat::config::SweepSpec;
use qnd_cat::report::validate;

fn main() {
    let report = validate(&SweepSpec::validation_default());
    let text = report.render_text();
    // The per-row table is long; show the summary.
    let summary = text.find("# summary").unwrap_or(0);
    print!("{}", &text[summary..]);
    println!(
        "printed forms at <n> = 1, a = 0.5: reduced off by {:.3e}, sqrt-d off by {:.3e}",
        report.deviation_at(1.0, 0.5, "printed_reduced").unwrap_or(f64::NAN),
        report.deviation_at(1.0, 0.5, "printed_sqrt_d").unwrap_or(f64::NAN)
    );
}
