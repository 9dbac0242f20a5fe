//! The c-free central limit of a Bernoulli pair approaches the law of `s^t`.

use tgauss::cfree::{bernoulli_moments, cfree_clt, SeriesPair};
use tgauss::series::CauchySeries;
use tgauss::spectra::{gaussian_measure, measure_moment};

fn main() -> tgauss::Result<()> {
    let t = 0.5;
    let pair = SeriesPair::new(CauchySeries::new(bernoulli_moments(&1.0, 8))?, CauchySeries::new(bernoulli_moments(&t, 8))?)?;
    let target = gaussian_measure(t)?;
    println!("limit moments m_4 = {:.6}, m_6 = {:.6}", measure_moment(&target, 4), measure_moment(&target, 6));
    for n in [4, 16, 64, 256, 1024] {
        let law = cfree_clt(&pair, n)?;
        println!("N = {n:>4}: m_4 = {:.6}  m_6 = {:.6}  N*err(m_4) = {:.4}", law.moment(4), law.moment(6), n as f64 * (law.moment(4) - 1.0 - t).abs());
    }
    Ok(())
}
