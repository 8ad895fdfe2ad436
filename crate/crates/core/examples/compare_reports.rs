//! Reports carry a fingerprint of their evaluation settings. Comparing a
//! method report to a baseline report yields multiplicative improvements, and
//! refuses reports produced under different settings.

use std::collections::BTreeMap;

use latent_spread::io::report::compare_reports;
use latent_spread::io::{DiversityReport, MetricValue};

fn report(c3: f64, c2: f64, factors: &str) -> DiversityReport {
    let ctx = BTreeMap::from([("factors".to_string(), factors.to_string())]);
    let mut r = DiversityReport::new("color", ctx);
    r.insert("run", "K=1.1/c3", MetricValue::fraction(c3, 400));
    r.insert("run", "K=1.1/c2", MetricValue::fraction(c2, 400));
    r
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let method = report(0.18, 0.71, "1,1.1,1.2");
    let baseline = report(0.12, 0.64, "1,1.1,1.2");
    let cmp = compare_reports(&method, &baseline, None, false)?;
    print!("{}", cmp.improvements_csv());

    let other = report(0.10, 0.60, "1.5");
    match compare_reports(&method, &other, None, false) {
        Err(e) => println!("refused: {e}"),
        Ok(_) => println!("unexpectedly compared"),
    }
    let forced = compare_reports(&method, &other, None, true)?;
    println!("forced: {} improvement rows", forced.improvements["run"].len());
    Ok(())
}
