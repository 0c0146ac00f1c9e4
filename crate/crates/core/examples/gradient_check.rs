//! Finite-difference gates for the analytic derivative chain.
//!
//! Compares the analytic gradient of L, the Jacobian of g (the Hessian of
//! L_b) and the full Hessian of L against central finite differences on a
//! seeded instance.

use levinv::calculus::{grad_l, grad_lb, jacobian_g, loss_l};
use levinv::hessian::{hessian_l, HessianMode};
use levinv::leverage::build_state;
use levinv::numkit::{Matrix, SeededRng, Vector};
use levinv::oracle::{fd_gradient, fd_hessian, fd_jacobian, FdPlan};
use levinv::problem::{feasible_point, gen_planted, PlantSpec};

fn rel_vec(a: &Vector, b: &Vector) -> f64 {
    (a - b).amax() / a.amax().max(b.amax()).max(1.0)
}

fn rel_mat(a: &Matrix, b: &Matrix) -> f64 {
    let gap = (a - b).amax();
    gap / a.amax().max(b.amax()).max(1.0)
}

fn main() {
    let spec = PlantSpec::new(50, 4, 11).with_kappa(100.0);
    let (inst, _) = gen_planted(&spec).unwrap();
    let mut rng = SeededRng::new(23);
    let x = feasible_point(&inst, 0.4, &mut rng);
    let st = build_state(&inst, &x).unwrap();

    let g = grad_l(&inst, &st);
    let g_fd = fd_gradient(
        |y| Ok(loss_l(&inst, &build_state(&inst, y)?)),
        &x,
        &FdPlan::default(),
    )
    .unwrap();
    println!(
        "gradient of L vs FD:      rel err {:.3e} (gate 1e-6)",
        rel_vec(&g, &g_fd)
    );

    let jac = jacobian_g(&st);
    let jac_fd = fd_jacobian(
        |y| Ok(grad_lb(&build_state(&inst, y)?)),
        &x,
        &FdPlan::default(),
    )
    .unwrap();
    println!(
        "jacobian of g vs FD:      rel err {:.3e} (gate 1e-5)",
        rel_mat(&jac, &jac_fd)
    );
    println!(
        "jacobian asymmetry:       {:.3e}",
        (&jac - jac.transpose()).amax()
    );

    let h = hessian_l(&inst, &st, HessianMode::Full).unwrap().h;
    let h_fd = fd_hessian(
        |y| Ok(loss_l(&inst, &build_state(&inst, y)?)),
        &x,
        &FdPlan::new(1e-4, true).unwrap(),
    )
    .unwrap();
    println!(
        "hessian of L vs FD:       rel err {:.3e} (gate 5e-4)",
        rel_mat(&h, &h_fd)
    );
}
