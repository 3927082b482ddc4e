//! Highest posterior density intervals next to the equal-tailed ones.

use bvn_prior::interval::{interval, IntervalKind};
use bvn_prior::model::{sample, sufficient_stats, OriginalParams};
use bvn_prior::posterior::{posterior, ParamId, UnivariateDensity};

fn main() -> bvn_prior::Result<()> {
    let data = sample(&OriginalParams::standard(-0.3)?, 8, 21);
    let stats = sufficient_stats(&data.pairs)?;

    for id in ParamId::ALL {
        let d = posterior(id, &stats)?;
        let hpd = interval(&d, IntervalKind::Hpd, 0.95)?;
        let et = interval(&d, IntervalKind::EqualTailed, 0.95)?;
        println!(
            "{:>5}  hpd [{:.4}, {:.4}] len {:.4}   equal-tailed [{:.4}, {:.4}] len {:.4}",
            id.as_str(),
            hpd.lo,
            hpd.hi,
            hpd.length(),
            et.lo,
            et.hi,
            et.length()
        );
        if hpd.kind == IntervalKind::Hpd {
            println!("       ln density gap at endpoints {:.2e}", (d.ln_pdf(hpd.lo) - d.ln_pdf(hpd.hi)).abs());
        }
    }

    // The HPD for w is not the image of the HPD for theta.
    let t = interval(&posterior(ParamId::Theta, &stats)?, IntervalKind::Hpd, 0.95)?;
    let w = interval(&posterior(ParamId::PrecisionW, &stats)?, IntervalKind::Hpd, 0.95)?;
    println!("1/theta hpd [{:.4}, {:.4}]  vs  w hpd [{:.4}, {:.4}]", 1.0 / t.hi, 1.0 / t.lo, w.lo, w.hi);
    Ok(())
}
