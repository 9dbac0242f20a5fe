//! Creation operators on the truncated t-Fock space and the vacuum moments of
//! `s^t`, computed exactly in Q(√t).

use tgauss::operators::{creation, gaussian, operator_norm_estimate, vacuum_moments};
use tgauss::{ratio, DeformParams, FockSpace, FockVector, Word};

fn main() -> tgauss::Result<()> {
    let params = DeformParams::exact(ratio(1, 4), 2, 4)?;
    let space = FockSpace::new(params)?;
    println!("dim = {} (n = 2, L = 4)", space.dim());

    let l1 = creation(1, &space)?;
    let e2 = FockVector::basis(&space, &Word::new([2]))?;
    let e12 = l1.apply(&e2)?;
    println!("l_1 e_2 = {} e_12", e12.coeff(&Word::new([1, 2]))?);
    println!("|e_12|^2 = {}", e12.inner(&e12)?);

    let s1 = gaussian(1, &space)?;
    for (k, m) in vacuum_moments(&s1, 8)?.iter().enumerate().filter(|(k, _)| k % 2 == 0) {
        println!("phi(s^{k}) = {m}");
    }

    let float = DeformParams::float(0.25, 1, 40)?;
    let s = gaussian(1, &FockSpace::new(float)?)?;
    let est = operator_norm_estimate(&s, 400, 7);
    println!("|s| ~ {:.6}  (converged: {})", est.value, est.converged);
    Ok(())
}
