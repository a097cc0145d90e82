//! Scans the helix frequency and locates the optimal chiral texture:
//! exchange + DMI energy of the helix `m = (cos wz, sin wz, 0)` is
//! `(alpha w^2 - kappa w) vol`, minimized at `w* = kappa / (2 alpha)` with
//! value `-kappa^2/(4 alpha) vol`.

use chiralmag::energy::{dmi_energy, exchange_energy};
use chiralmag::fixtures::helix_state;
use chiralmag::MaterialModel;

fn main() {
    let m = MaterialModel {
        b: 0.0,
        ..MaterialModel::default()
    };
    let omega_star = m.kappa / (2.0 * m.alpha);
    let n = 12;

    let mut best = (f64::INFINITY, 0.0);
    println!("{:>8} {:>14}", "omega", "energy");
    let mut omega = 0.0;
    while omega <= 2.5 * omega_star {
        let q = helix_state(n, omega);
        let e = exchange_energy(&q, &m).unwrap() + dmi_energy(&q, &m).unwrap();
        println!("{omega:>8.3} {e:>14.8}");
        if e < best.0 {
            best = (e, omega);
        }
        omega += 0.05 * omega_star;
    }

    let oracle = -m.kappa * m.kappa / (4.0 * m.alpha);
    println!();
    println!("optimal frequency {:.4} (analytic {omega_star:.4})", best.1);
    println!("optimal energy    {:.6} (analytic {oracle:.6})", best.0);
}
