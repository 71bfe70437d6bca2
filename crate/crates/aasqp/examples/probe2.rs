// Diagnose local behavior at the swing-up fixed point.
use aasqp::analysis::estimate_iteration_matrix;
use aasqp::experiments::{swingup_ocp, swingup_spec};
use aasqp::hessian::HessianStrategy;
use aasqp::linalg::{spectral_radius, sym_eig, Vector};
use aasqp::nlp::PrimalDualIterate;
use aasqp::ocp::initial_iterate;
use aasqp::sqp::{kkt_residual, solve, AndersonConfig, SqpConfig};

fn main() {
    let nlp = swingup_ocp();
    let spec = swingup_spec();
    let z0 = initial_iterate(&spec, &nlp);

    // find the fixed point with AA(1)-SCQP at tight tolerance
    let aa_cfg = SqpConfig {
        hessian: HessianStrategy::Scqp,
        kkt_tol: 1e-11,
        max_iter: 400,
        anderson: AndersonConfig { enabled: true, depth: 1, ..AndersonConfig::default() },
        ..SqpConfig::default()
    };
    let res = solve(&nlp, &z0, &aa_cfg).expect("aa1 scqp should converge");
    let z_star = res.z;
    println!("fixed point: kkt={:.2e}, mu_terminal={:.4e}", kkt_residual(&nlp, &z_star).norm_inf, z_star.mu[0]);
    println!("lambda inf norm = {:.3e}, v inf = {:.3e}", z_star.lambda.norm_inf(), z_star.v.norm_inf());

    // exact Lagrangian Hessian spectrum at the fixed point
    let w_exact = nlp.eval_hess_lagrangian(&z_star.v, &z_star.lambda, &z_star.mu).unwrap();
    let (vals, _) = sym_eig(&w_exact).unwrap();
    println!("eig(hessL): min={:.4e}, max={:.4e}", vals[0], vals[vals.len() - 1]);

    // spectral radius of the plain SCQP map at the fixed point
    let scqp_cfg = SqpConfig { hessian: HessianStrategy::Scqp, ..SqpConfig::default() };
    match estimate_iteration_matrix(&nlp, &z_star, &scqp_cfg, 1e-5 * (1.0 + z_star.to_flat().norm_inf())) {
        Ok(a) => println!("rho(A*) scqp = {:.6}", spectral_radius(&a).unwrap()),
        Err(e) => println!("scqp A* failed: {e}"),
    }
    let proj_cfg = SqpConfig {
        hessian: HessianStrategy::ExactProject { epsilon: 1e-6 },
        ..SqpConfig::default()
    };
    match estimate_iteration_matrix(&nlp, &z_star, &proj_cfg, 1e-5 * (1.0 + z_star.to_flat().norm_inf())) {
        Ok(a) => println!("rho(A*) exact+project = {:.6}", spectral_radius(&a).unwrap()),
        Err(e) => println!("exact+project A* failed: {e}"),
    }

    // does plain SCQP converge from near the fixed point?
    let mut z_near = z_star.clone();
    for i in 0..z_near.v.len() {
        z_near.v[i] += 1e-3 * ((i * 7 % 13) as f64 / 13.0 - 0.5);
    }
    let plain_cfg = SqpConfig { hessian: HessianStrategy::Scqp, max_iter: 300, ..SqpConfig::default() };
    match solve(&nlp, &z_near, &plain_cfg) {
        Ok(r) => println!("plain scqp from near z*: converged in {} iters", r.report.iterations()),
        Err(e) => println!("plain scqp from near z*: {e}"),
    }

    // alternative documented initial guesses
    let mut spec_p = swingup_spec();
    spec_p.initial_guess_target = Some(vec![0.8, 0.0, 0.0, 0.0]);
    let z0_p = initial_iterate(&spec_p, &nlp);
    match solve(&nlp, &z0_p, &plain_cfg) {
        Ok(r) => println!("plain scqp from interp->p=0.8: converged in {} iters", r.report.iterations()),
        Err(e) => println!("plain scqp from interp->p=0.8: {e}"),
    }
    let z0_hold = PrimalDualIterate::new(
        {
            let mut v = Vector::zeros(nlp.n_v());
            for k in 0..=20 {
                let off = k * 5;
                v[off + 2] = std::f64::consts::PI;
            }
            v
        },
        Vector::zeros(nlp.n_g()),
        Vector::zeros(nlp.n_h()),
    );
    match solve(&nlp, &z0_hold, &plain_cfg) {
        Ok(r) => println!("plain scqp from hold-x0: converged in {} iters", r.report.iterations()),
        Err(e) => println!("plain scqp from hold-x0: {e}"),
    }
}
