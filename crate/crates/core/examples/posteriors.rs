//! Marginal posteriors of the slope, the scale products and the precision.

use bvn_prior::model::{sample, sufficient_stats, OriginalParams};
use bvn_prior::posterior::{posterior, ParamId, UnivariateDensity};

fn main() -> bvn_prior::Result<()> {
    let data = sample(&OriginalParams::standard(0.4)?, 12, 5);
    let stats = sufficient_stats(&data.pairs)?;

    println!("{:>6} {:>10} {:>10} {:>10} {:>10} {:>10}", "param", "mode", "median", "mean", "q025", "q975");
    for id in ParamId::ALL {
        let d = posterior(id, &stats)?;
        let mean = d.mean().map_or("-".to_string(), |m| format!("{m:.4}"));
        println!(
            "{:>6} {:>10.4} {:>10.4} {:>10} {:>10.4} {:>10.4}",
            id.as_str(),
            d.mode(),
            d.median()?,
            mean,
            d.quantile(0.025)?,
            d.quantile(0.975)?
        );
    }

    let eta = posterior(ParamId::Eta, &stats)?;
    let x = eta.median()?;
    println!(
        "eta cdf at median: closed form {:.12}  quadrature {:.12}",
        eta.eta_cdf_closed_form(x)?,
        eta.eta_cdf_quadrature(x)?
    );
    Ok(())
}
