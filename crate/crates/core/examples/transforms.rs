//! Free and c-free convolution on truncated moment series. Squares of
//! t-gaussians convolve into the law of `c^t`.

use tgauss::cfree::{cfree_power, free_convolution, SeriesPair};
use tgauss::series::CauchySeries;
use tgauss::spectra::{closed_form_series, GKind};
use tgauss::{ratio, DeformParams, Scalar, Surd};

fn main() -> tgauss::Result<()> {
    let semicircle = CauchySeries::new([1, 0, 1, 0, 2, 0, 5, 0, 14].map(Surd::from_i64).to_vec())?;
    let doubled = free_convolution(&semicircle, &semicircle)?;
    println!("semicircle ⊞ semicircle moments: {:?}", doubled.moments().iter().map(|m| m.to_string()).collect::<Vec<_>>());

    let order = 8;
    let one = DeformParams::exact(ratio(2, 3), 1, 0)?;
    let gamma = SeriesPair::new(closed_form_series(GKind::Ct, &one, order)?, closed_form_series(GKind::TC1, &one, order)?)?;
    for n in 2..=4 {
        let power = cfree_power(&gamma, n)?;
        let target = closed_form_series(GKind::Ct, &one.with_n(n)?, order)?;
        println!("n = {n}: c-free power matches law of c^t: {}", power.mu == target);
    }
    Ok(())
}
