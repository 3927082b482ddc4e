//! Frequentist coverage of 95% HPD intervals over a small grid of cells.

use bvn_prior::coverage::{run_table, CoverageCellSpec, DEFAULT_SEED};

fn main() -> bvn_prior::Result<()> {
    let defaults = CoverageCellSpec {
        replicates: 2000,
        seed: DEFAULT_SEED,
        ..CoverageCellSpec::new(0.0, 4)
    };
    let report = run_table(&[0.0, 0.5, 0.9], &[4, 10], &defaults)?;
    print!("{}", report.to_markdown());
    for cell in &report.cells {
        for p in &cell.params {
            println!("rho {} n {} {}: ks {:.4} p {:.3}", cell.rho, cell.n, p.param, p.ks_statistic, p.ks_p_value);
        }
    }
    report.write_csv(std::io::stdout())?;
    Ok(())
}
