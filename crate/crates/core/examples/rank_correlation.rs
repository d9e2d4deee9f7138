//! Spearman and Kendall coefficients, Cohen labels and Tukey fences.

use snnlab::measure::{cohen_label, iqr_filter, kendall, spearman};

fn main() -> snnlab::Result<()> {
    let density = [0.013, 0.016, 0.014, 0.021, 0.018, 0.025, 0.019, 0.022];
    let error = [0.41, 0.47, 0.40, 0.62, 0.49, 0.58, 0.55, 0.66];
    let rho = spearman(&density, &error)?;
    let tau = kendall(&density, &error)?;
    println!("density vs error rate: rho = {rho:.3}, tau = {tau:.3} ({})", cohen_label(rho));

    let ties = [1.0, 1.0, 2.0, 3.0, 3.0, 3.0];
    let other = [2.0, 1.0, 4.0, 3.0, 6.0, 5.0];
    println!("with ties: rho = {:.3}, tau-b = {:.3}", spearman(&ties, &other)?, kendall(&ties, &other)?);

    match spearman(&[5.0; 4], &[1.0, 2.0, 3.0, 4.0]) {
        Ok(r) => println!("constant input gave {r}"),
        Err(e) => println!("constant input: {e}"),
    }

    let runs = [0.21, 0.19, 0.22, 0.20, 0.23, 0.91];
    let split = iqr_filter(&runs)?;
    println!(
        "fences [{:.3}, {:.3}]: kept {:?}, outliers {:?}",
        split.lower, split.upper, split.kept, split.outliers
    );
    Ok(())
}
