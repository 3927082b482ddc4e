//! Monte Carlo check of the expected log-likelihood derivatives.

use bvn_prior::matching::verify_lemma21;
use bvn_prior::model::OrthogonalParams;

fn main() -> bvn_prior::Result<()> {
    let p = OrthogonalParams::new(0.3, -1.0, 0.8, 1.7, 0.6)?;
    let checks = verify_lemma21(&p, 400_000, 3)?;
    for c in &checks {
        println!(
            "{:<28} claimed {:>12.6}  mc {:>12.6} ± {:.1e}  {}",
            c.moment.label(),
            c.claimed_value,
            c.mc_estimate,
            c.mc_stderr,
            if c.pass { "ok" } else { "FAIL" }
        );
    }
    let failed = checks.iter().filter(|c| !c.pass).count();
    println!("{} of {} moments agree", checks.len() - failed, checks.len());
    Ok(())
}
