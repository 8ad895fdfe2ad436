//! Demographic coverage of labeled batches: the fraction of batches showing
//! every gender-ethnicity combination, at least m ethnicities, and so on.

use latent_spread::batch::{
    coverage_all_pairs, coverage_at_least, coverage_combination, coverage_genders_and_ethnicities,
    multiplicative_improvement, proportion_ci, Ethnicity, Gender,
};
use latent_spread::io::parse_labels;

const METHOD: &str = "\
batch_id,image_id,gender,ethnicity
a,1,male,black
a,2,female,asian
a,3,female,hispanic
a,4,male,white-or-middle-eastern
b,1,female,black
b,2,male,asian
b,3,female,black
c,1,male,hispanic
c,2,female,white-or-middle-eastern
";

const BASELINE: &str = "\
batch_id,image_id,gender,ethnicity
a,1,male,white-or-middle-eastern
a,2,male,white-or-middle-eastern
a,3,female,asian
b,1,male,white-or-middle-eastern
b,2,male,white-or-middle-eastern
c,1,female,white-or-middle-eastern
c,2,male,black
";

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let method = parse_labels(METHOD)?;
    let baseline = parse_labels(BASELINE)?;
    let n = method.batches.len();
    println!("all 8 combinations: {}", coverage_all_pairs(&method)?);
    println!("both genders and all ethnicities: {}", coverage_genders_and_ethnicities(&method)?);
    println!(
        "female/black: {:.3}",
        coverage_combination(&method, Gender::Female, Ethnicity::Black)?
    );
    for m in 1..=4 {
        let (pm, pb) = (coverage_at_least(&method, m)?, coverage_at_least(&baseline, m)?);
        let ci = proportion_ci(pm, n);
        let ratio = multiplicative_improvement(pm, pb)
            .ratio
            .map_or("n/a".to_string(), |r| format!("{r:.2}x"));
        println!(
            "at least {m} ethnicities: {pm:.3} +/- {:.3} vs baseline {pb:.3} ({ratio})",
            ci.half_width
        );
    }
    Ok(())
}
