//! Regime classification and its witnesses: the eigenvector of `c^t`, the
//! kernel recursion, the conjugation `S` and the Khinchine test.

use tgauss::analysis::{
    classify_regime, kernel_recursion, khinchine_witness, s_conjugation, zeta_residual,
};
use tgauss::{ratio, DeformParams};

fn main() -> tgauss::Result<()> {
    for (t, n) in [(0.4, 2), (0.8, 2), (1.0, 3), (2.5, 2)] {
        let v = classify_regime(t, n)?;
        println!("t = {t}, n = {n}: {} (interval [{:.4}, {:.4}])", v.regime, v.interval.0, v.interval.1);
    }

    for depth in [4, 8, 12] {
        println!("zeta residual at pair depth {depth}: {:.3e}", zeta_residual(0.4, 2, depth)?);
    }

    let kernel = kernel_recursion(&DeformParams::exact(ratio(2, 5), 2, 0)?, 20)?;
    println!("kernel: a = {}, b = {}, summable = {}", kernel.a, kernel.b, kernel.summable);

    let p = DeformParams::exact(ratio(4, 5), 2, 8)?;
    let rep = s_conjugation(&p)?.report(&p, 1)?;
    println!("S^2 = I: {}, |S| = {:.4}, bound {:.4}", rep.s_squared_exact, rep.norm_s, rep.bound_s);

    for t in [0.3, 0.8] {
        let k = 3;
        let w = khinchine_witness(&DeformParams::float(t, 2, 2 * k)?, k)?;
        println!("t = {t}: phi(T_{k}) = {:.4}, free bound {:.4}, violated {}", w.phi_value, w.bound, w.violated);
    }
    Ok(())
}
