use cgp_core::ensemble::{FitMode, GridPolicy};
use cgp_core::experiment::{replicate_seeds, run_cgp_replicate, CgpRunSpec};
use cgp_core::simdata::SwissRollConfig;

fn main() {
    let scenario = SwissRollConfig::new(2000, 5000, 0.03, 5.0, 0);
    let seeds = replicate_seeds(20260810, 40, 1);
    let base_policy = {
        let mut p = GridPolicy::default();
        p.stride = 16;
        p.m_cap = Some(150);
        p
    };

    let exact_spec = CgpRunSpec {
        scenario,
        n_pred: 200,
        mode: FitMode::Exact,
        policy: base_policy.clone(),
        level: 0.95,
    };
    let ex = run_cgp_replicate(&exact_spec, seeds[0]).unwrap();
    println!("exact: mspe={:.4} fit={:.2}s", ex.mspe, ex.fit_seconds);

    for (m_phi, per_member) in [(150, true), (250, false), (250, true), (350, false)] {
        let mut policy = base_policy.clone();
        policy.m_phi = m_phi;
        policy.per_member_phi = per_member;
        let spec = CgpRunSpec {
            scenario,
            n_pred: 200,
            mode: FitMode::LowRank,
            policy,
            level: 0.95,
        };
        let lr = run_cgp_replicate(&spec, seeds[0]).unwrap();
        println!(
            "lowrank m_phi={m_phi} per_member={per_member}: mspe={:.4} fit={:.2}s  gap={:.1}%  speedup=x{:.2}",
            lr.mspe,
            lr.fit_seconds,
            100.0 * (lr.mspe - ex.mspe) / ex.mspe,
            ex.fit_seconds / lr.fit_seconds
        );
    }
}
