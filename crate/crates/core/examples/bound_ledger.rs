//! Measured spectral quantities against their analytic limits.
//!
//! On a conforming instance (||b|| <= 1, ||c|| <= 1, regularization weights
//! above the convexity floor) the kernel norms, the Hessian eigenvalue floor
//! and the sampled Hessian-Lipschitz ratios must all sit inside the analytic
//! bounds; the margins are typically enormous.

use levinv::hessian::bound_ledger;
use levinv::leverage::build_state;
use levinv::numkit::{SeededRng, Vector};
use levinv::problem::{gen_planted, PlantSpec};

fn main() {
    let spec = PlantSpec::new(50, 5, 4).with_kappa(10.0).with_clamped_c();
    let (inst, _) = gen_planted(&spec).unwrap();
    println!(
        "conforming instance: ||b|| = {:.4}, ||c|| = {:.4}, w = {:.2}",
        inst.b.norm(),
        inst.c.norm(),
        inst.w[0]
    );

    let st = build_state(&inst, &Vector::zeros(inst.d)).unwrap();
    let mut rng = SeededRng::new(0);
    let radius = 0.05 * inst.b.amax();
    let ledger = bound_ledger(&inst, &st, 4, radius, &mut rng).unwrap();

    println!(
        "beta = {:.4}, R = {:.4} (worst case over sampled points)",
        ledger.beta, ledger.rcap
    );
    let row = |name: &str, value: f64, limit: f64, ok: bool| {
        println!(
            "  {name:26} {value:14.6e}  <= {limit:14.6e}   {}",
            if ok { "ok" } else { "VIOLATED" }
        );
    };
    row("||B1||", ledger.norm_b1, ledger.b1_limit, ledger.b1_ok);
    row("||B||", ledger.norm_b, ledger.b_limit, ledger.b_ok);
    row(
        "Hessian Lipschitz ratio",
        ledger.lipschitz_ratio_max,
        ledger.lipschitz_limit,
        ledger.lipschitz_ok,
    );
    println!(
        "  {:26} {:14.6e}  >= {:14.6e}   {}",
        "min eig of Hessian",
        ledger.pd_floor,
        spec.pd_margin,
        if ledger.pd_floor >= spec.pd_margin * (1.0 - 1e-6) {
            "ok"
        } else {
            "VIOLATED"
        }
    );
    println!("  ||G|| (inner matrix)       {:14.6e}", ledger.norm_g);
}
