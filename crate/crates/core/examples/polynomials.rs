//! The polynomial families `u_k`, `v_k` and the identity mapping products of
//! them applied to the vacuum onto basis words.

use tgauss::operators::GaussianFamily;
use tgauss::polynomials::{ident_vector, relations_r_check, u_poly, v_gram, v_poly};
use tgauss::{ratio, DeformParams, Word};

fn main() -> tgauss::Result<()> {
    let params = DeformParams::exact(ratio(1, 3), 2, 6)?;
    for k in 0..=4 {
        println!("u_{k} = {}", u_poly(k, &params));
        println!("v_{k} = {}", v_poly(k, &params));
    }

    let report = relations_r_check(&params, 6, 0.0)?;
    println!("relations hold exactly: {}", report.passed());

    let family = GaussianFamily::new(params.with_n(1)?)?;
    let gram = v_gram(&family, 4)?;
    println!("<v_2 Omega, v_2 Omega> = {}, <v_1 Omega, v_3 Omega> = {}", gram[2][2], gram[1][3]);

    let family = GaussianFamily::new(params)?;
    let word = Word::new([1, 1, 2, 1]);
    let e = ident_vector(&word, &family)?;
    println!("u_2(s_1) u_1(s_2) v_1(s_1) Omega has norm^2 {}", e.inner(&e)?);
    Ok(())
}
