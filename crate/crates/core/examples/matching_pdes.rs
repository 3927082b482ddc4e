//! Evaluate the matching conditions for the reference prior, a flat prior and a custom one.

use bvn_prior::matching::{verify_prior, Grid, MatchingCondition, PriorSpec};

fn main() -> bvn_prior::Result<()> {
    let grid = Grid::default();
    for prior in [PriorSpec::matching(), PriorSpec::matching_fd(), PriorSpec::flat()] {
        let v = verify_prior(&prior, &grid)?;
        print!("{}", v.to_table());
        println!("all pass: {}\n", v.all_pass());
    }

    // Residuals of 1/(theta eta^2) at a single point.
    let custom = PriorSpec::custom("inv_theta_eta2", |_, t, e| -t.ln() - 2.0 * e.ln());
    for cond in MatchingCondition::ALL {
        let r = cond.residual_at(&custom, 0.0, 1.0, 1.0)?;
        println!("{:<16} {:>10.3e}", cond.id(), r);
    }
    Ok(())
}
