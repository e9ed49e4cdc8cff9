use nondivfem::adapt::MarkingConvention;
use nondivfem::bench::{
    read_csv, run_convergence, run_scheme_comparison, write_comparison_csv, write_convergence_csv, Refinement,
    RunConfig, CONVERGENCE_HEADER,
};
use nondivfem::estimate::eoc;
use nondivfem::operator::Experiment;
use nondivfem::solve::Scheme;

fn csv_of(c: &RunConfig) -> Vec<u8> {
    let recs = run_convergence(c).unwrap();
    let mut buf = Vec::new();
    write_convergence_csv(&recs, &mut buf).unwrap();
    buf
}

#[test]
fn uniform_study_rows_and_round_trip() {
    let c = RunConfig::new(Experiment::Exp1 { kappa: 0.5 });
    let buf = csv_of(&c);
    let t = read_csv(buf.as_slice()).unwrap();
    assert_eq!(t.headers, CONVERGENCE_HEADER);
    assert_eq!(t.rows.len(), 4);
    let n: Vec<f64> = t.column("Ndofs").unwrap().into_iter().map(Option::unwrap).collect();
    assert!(n.windows(2).all(|w| w[1] > w[0]));
    // identical configuration, identical bytes
    assert_eq!(buf, csv_of(&c));
}

#[test]
fn cubic_study_has_second_order_h2h() {
    let mut c = RunConfig::new(Experiment::Exp1 { kappa: 0.5 });
    c.degree = 3;
    c.levels = 3;
    let t = read_csv(csv_of(&c).as_slice()).unwrap();
    let h: Vec<f64> = t.column("h_max").unwrap().into_iter().map(Option::unwrap).collect();
    let e: Vec<f64> = t.column("H2h_error").unwrap().into_iter().map(Option::unwrap).collect();
    let r = eoc(&h, &e).unwrap();
    assert!((r.last().unwrap() - 2.0).abs() < 0.3, "{r:?}");
}

#[test]
fn estimator_only_study_decreases_under_adaptivity() {
    let mut c = RunConfig::new(Experiment::Exp4);
    c.refinement = Refinement::Adaptive;
    c.first_level = 2;
    c.max_dofs = 3000;
    let t = read_csv(csv_of(&c).as_slice()).unwrap();
    assert!(t.rows.len() >= 3);
    assert!(t.column("L2_error").unwrap().iter().all(Option::is_none));
    let eta: Vec<f64> = t.column("Eta_global").unwrap().into_iter().map(Option::unwrap).collect();
    assert!(eta.last().unwrap() < &eta[0], "{eta:?}");
}

#[test]
fn linear_marking_also_refines() {
    let mut c = RunConfig::new(Experiment::Exp2 { alpha: 1.5 });
    c.refinement = Refinement::Adaptive;
    c.convention = MarkingConvention::Linear;
    c.first_level = 1;
    c.max_dofs = 2000;
    let recs = run_convergence(&c).unwrap();
    assert!(recs.len() >= 3);
    assert!(recs.windows(2).all(|w| w[1].n_dofs > w[0].n_dofs));
}

#[test]
fn comparison_shows_stabilized_l2_order() {
    let mut c = RunConfig::new(Experiment::Exp1 { kappa: 0.5 });
    c.eta1 = Some(0.0);
    c.eta2 = Some(0.0);
    c.first_level = 3;
    c.levels = 3;
    let schemes = [Scheme::RecoveryCg, Scheme::Nsz];
    let rows = run_scheme_comparison(&c, &schemes).unwrap();
    let h: Vec<f64> = rows.iter().map(|r| r.h_max).collect();
    let l2 = |s: usize| -> f64 {
        let e: Vec<f64> = rows.iter().map(|r| r.errors[s].unwrap().0).collect();
        *eoc(&h, &e).unwrap().last().unwrap()
    };
    assert!(l2(0) > 2.7, "recovery {}", l2(0));
    assert!(l2(1) < 2.4, "nsz {}", l2(1));
    let mut buf = Vec::new();
    write_comparison_csv(&rows, &schemes, &mut buf).unwrap();
    let t = read_csv(buf.as_slice()).unwrap();
    assert_eq!(t.column("degree").unwrap(), vec![Some(2.0); 3]);
    assert!(t.column("nsz_H2h_error").unwrap().iter().all(Option::is_some));
}
