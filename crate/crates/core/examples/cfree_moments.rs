//! Conditionally free mixed moments: the engine against the Fock model, and
//! the second state computed from the vacuum vector.

use tgauss::cfree::{cfree_mixed_moment, free_mixed_moment, psi_state_of_word, t_gaussian_marginal, vacuum_state_of_word, AlternatingWord};
use tgauss::operators::GaussianFamily;
use tgauss::polynomials::u_poly;
use tgauss::{ratio, DeformParams};

fn main() -> tgauss::Result<()> {
    let params = DeformParams::exact(ratio(2, 5), 2, 8)?;
    let marginal = t_gaussian_marginal(&params, 16)?;
    let marginals = vec![marginal.clone(), marginal];
    let family = GaussianFamily::new(params.clone())?;

    let words = [
        AlternatingWord::from_letters(&[1, 2, 1, 2]),
        AlternatingWord::from_letters(&[1, 1, 2, 2]),
        AlternatingWord::new(vec![(1, u_poly(2, &params)), (2, u_poly(2, &params))]),
        AlternatingWord::new(vec![(1, u_poly(1, &params)), (2, u_poly(2, &params)), (1, u_poly(1, &params))]),
    ];
    for w in &words {
        println!(
            "{w}: phi engine {} model {} | psi free {} model {}",
            cfree_mixed_moment(&marginals, w)?,
            vacuum_state_of_word(&family, w)?,
            free_mixed_moment(&marginals, w)?,
            psi_state_of_word(&family, w)?,
        );
    }
    Ok(())
}
