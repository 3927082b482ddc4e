//! Draw a bivariate normal sample and reduce it to sufficient statistics.

use bvn_prior::model::{sample, sufficient_stats, OriginalParams};

fn main() -> bvn_prior::Result<()> {
    let truth = OriginalParams::new(1.0, -2.0, 2.0, 0.5, 0.7)?;
    let orth = truth.to_orthogonal();
    println!("beta {:.4}  theta {:.4}  eta {:.4}", orth.beta, orth.theta, orth.eta);

    let data = sample(&truth, 200, 11);
    let s = sufficient_stats(&data.pairs)?;
    println!("n {}  means ({:.3}, {:.3})", s.n, s.xbar1, s.xbar2);
    println!("S11 {:.3}  S12 {:.3}  S22 {:.3}  S22.1 {:.3}", s.s11, s.s12, s.s22, s.s22_1);
    println!("least squares slope {:.4}", s.slope());

    // Same seed, same draws.
    assert_eq!(sample(&truth, 200, 11).pairs, data.pairs);
    Ok(())
}
