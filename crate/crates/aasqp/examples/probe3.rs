// Compare the fixed points found by different strategies; check SOSC.
use aasqp::analysis::{estimate_iteration_matrix, kappa_bound_symmetric, reduced_matrices};
use aasqp::experiments::{swingup_ocp, swingup_spec};
use aasqp::hessian::HessianStrategy;
use aasqp::linalg::{spectral_radius, sym_eig};
use aasqp::ocp::initial_iterate;
use aasqp::sqp::{kkt_residual, solve, AndersonConfig, SqpConfig};

fn main() {
    let nlp = swingup_ocp();
    let spec = swingup_spec();
    let z0 = initial_iterate(&spec, &nlp);

    let aa_cfg = SqpConfig {
        hessian: HessianStrategy::Scqp,
        kkt_tol: 1e-11,
        max_iter: 400,
        anderson: AndersonConfig { enabled: true, depth: 1, ..AndersonConfig::default() },
        ..SqpConfig::default()
    };
    let z_aa = solve(&nlp, &z0, &aa_cfg).expect("aa1 scqp").z;

    let proj_cfg = SqpConfig {
        hessian: HessianStrategy::ExactProject { epsilon: 1e-6 },
        kkt_tol: 1e-11,
        max_iter: 600,
        ..SqpConfig::default()
    };
    let z_proj = solve(&nlp, &z0, &proj_cfg).expect("exact+project").z;

    println!("distance between fixed points: {:.3e}", z_aa.norm_inf_diff(&z_proj));
    println!("aa:   mu_term={:.4e} obj={:.6e}", z_aa.mu[0], nlp.eval_f(&z_aa.v));
    println!("proj: mu_term={:.4e} obj={:.6e}", z_proj.mu[0], nlp.eval_f(&z_proj.v));

    for (name, z) in [("aa_scqp_fp", &z_aa), ("proj_fp", &z_proj)] {
        println!("== {name}: kkt={:.2e}", kkt_residual(&nlp, z).norm_inf);
        // SOSC: reduced exact Hessian over active constraints
        let cfg = SqpConfig { hessian: HessianStrategy::Scqp, ..SqpConfig::default() };
        match reduced_matrices(&nlp, z, &cfg) {
            Ok((w_hat, lam_hat)) => {
                let (lv, _) = sym_eig(&lam_hat).unwrap();
                let (wv, _) = sym_eig(&w_hat).unwrap();
                println!(
                    "  reduced dim {}, eig(Lambda_hat) in [{:.4e}, {:.4e}], eig(W_hat scqp) in [{:.4e}, {:.4e}]",
                    lam_hat.rows(), lv[0], lv[lv.len() - 1], wv[0], wv[wv.len() - 1]
                );
                match kappa_bound_symmetric(&w_hat, &lam_hat) {
                    Ok(k) => println!("  kappa(scqp) = {k:.4}"),
                    Err(e) => println!("  kappa failed: {e}"),
                }
            }
            Err(e) => println!("  reduced_matrices failed: {e}"),
        }
        let h = 1e-5 * (1.0 + z.to_flat().norm_inf());
        for (cname, cfg) in [
            ("scqp", SqpConfig { hessian: HessianStrategy::Scqp, ..SqpConfig::default() }),
            (
                "exact+project",
                SqpConfig { hessian: HessianStrategy::ExactProject { epsilon: 1e-6 }, ..SqpConfig::default() },
            ),
        ] {
            match estimate_iteration_matrix(&nlp, z, &cfg, h) {
                Ok(a) => println!("  rho(A*) {cname} = {:.6}", spectral_radius(&a).unwrap()),
                Err(e) => println!("  rho {cname} failed: {e}"),
            }
        }
    }
}
