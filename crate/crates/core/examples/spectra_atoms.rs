//! Closed-form laws of `s^t` and `c^t`, Stieltjes inversion and atom detection.

use tgauss::spectra::{c_measure, closed_form_g, detect_atom, gaussian_measure, stieltjes_invert, GKind};

fn main() -> tgauss::Result<()> {
    let t = 0.25;
    let mu = gaussian_measure(t)?;
    for a in &mu.atoms {
        println!("s^t atom at {:+.6} with weight {:.6}", a.location, a.weight);
    }
    let g = |z| closed_form_g(GKind::St, t, 1, z).expect("upper half-plane");
    let grid: Vec<f64> = (0..5).map(|j| -1.0 + 0.5 * j as f64).collect();
    let inverted = stieltjes_invert(g, &grid, 1e-6)?;
    let density = mu.density.as_ref().expect("absolutely continuous part");
    for (x, f) in grid.iter().zip(&inverted) {
        println!("x = {x:+.2}  density {:.6}  inverted {f:.6}", density.eval(*x));
    }

    let (t, n) = (0.4, 2);
    let c = c_measure(t, n)?;
    let atom = &c.atoms[0];
    let est = detect_atom(|z| closed_form_g(GKind::Ct, t, n, z).expect("upper half-plane"), atom.location, 1e-5, 1e-3);
    println!(
        "c^t atom at {:.6}: formula {:.6}, detected {:.6}, mass of law {:.9}",
        atom.location,
        atom.weight,
        est.weight_fine,
        c.total_mass()
    );
    Ok(())
}
