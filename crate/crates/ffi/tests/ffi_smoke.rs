//! Exercises the C ABI through the exported symbols, the way a foreign
//! binding would.

use std::ffi::{c_char, CStr, CString};

use interference_lab_ffi::*;

fn check(status: IlStatus) {
    if status != IlStatus::IlOk {
        let mut buf = [0 as c_char; 256];
        unsafe { il_last_error(buf.as_mut_ptr(), buf.len()) };
        let msg = unsafe { CStr::from_ptr(buf.as_ptr()) };
        panic!("ffi call failed ({status:?}): {}", msg.to_string_lossy());
    }
}

#[test]
fn graph_design_table_round_trip() {
    unsafe {
        // Path 0–1–2–3.
        let edges: [u32; 6] = [0, 1, 1, 2, 2, 3];
        let mut graph: *mut IlGraph = std::ptr::null_mut();
        check(il_graph_from_edge_list(4, edges.as_ptr(), 3, &mut graph));
        assert_eq!(il_graph_n(graph), 4);
        assert_eq!(il_graph_edge_count(graph), 3);
        assert_eq!(il_graph_degree(graph, 1), 2);

        let mut design: *mut IlDesign = std::ptr::null_mut();
        check(il_design_crd(4, 1, &mut design));
        let mut z = [9u8; 4];
        check(il_design_sample(design, 7, z.as_mut_ptr(), 4));
        assert_eq!(z.iter().map(|&v| v as usize).sum::<usize>(), 1);
        let mut z2 = [0u8; 4];
        check(il_design_sample(design, 7, z2.as_mut_ptr(), 4));
        assert_eq!(z, z2, "same seed, same draw");

        let mut table: *mut IlTable = std::ptr::null_mut();
        check(il_table_generate(
            IlParamSpec::IlUncorrelated,
            graph,
            5,
            &mut table,
        ));
        assert_eq!(il_table_n(table), 4);
        let mut dte = 0.0f64;
        check(il_table_true_estimand(table, IlEstimand::IlDte, &mut dte));
        assert!(dte.is_finite());

        // Exact unbiasedness of inverse weighting, end to end.
        let mut mean = 0.0f64;
        let mut var = 0.0f64;
        let mut undef = 0.0f64;
        check(il_exact_expectation(
            design,
            graph,
            IlExposure::IlBinary,
            table,
            IlEstimator::IlHt,
            IlEstimand::IlDte,
            &mut mean,
            &mut var,
            &mut undef,
        ));
        assert!((mean - dte).abs() < 1e-10, "{mean} vs {dte}");
        assert_eq!(undef, 0.0);
        assert!(var > 0.0);

        il_table_free(table);
        il_design_free(design);
        il_graph_free(graph);
    }
}

#[test]
fn propensity_tables_and_errors() {
    unsafe {
        let mut graph: *mut IlGraph = std::ptr::null_mut();
        check(il_graph_generate(
            IlGraphModel::IlErdosRenyi,
            8,
            0,
            0.3,
            11,
            &mut graph,
        ));
        let mut design: *mut IlDesign = std::ptr::null_mut();
        check(il_design_bernoulli(8, 0.4, &mut design));

        let mut analytic: *mut IlPropensity = std::ptr::null_mut();
        check(il_propensity_analytic(
            design,
            graph,
            IlExposure::IlBinary,
            &mut analytic,
        ));
        let mut exact: *mut IlPropensity = std::ptr::null_mut();
        check(il_propensity_enumerated(
            design,
            graph,
            IlExposure::IlBinary,
            &mut exact,
        ));
        for unit in 0..8 {
            for z in [0u8, 1] {
                for e in [0u32, 1] {
                    let mut a = 0.0;
                    let mut b = 0.0;
                    check(il_propensity_get(analytic, unit, z, e, &mut a));
                    check(il_propensity_get(exact, unit, z, e, &mut b));
                    assert!((a - b).abs() < 1e-12);
                }
            }
        }
        let csv = il_propensity_csv(analytic);
        assert!(!csv.is_null());
        let text = CStr::from_ptr(csv).to_string_lossy().into_owned();
        assert!(text.starts_with("unit,z,e,pi,provenance,se"));
        il_string_free(csv);

        // No closed form for the restricted variant: status + message.
        let mut restricted: *mut IlDesign = std::ptr::null_mut();
        check(il_design_restricted_bernoulli(8, 0.4, &mut restricted));
        let mut table: *mut IlPropensity = std::ptr::null_mut();
        let status = il_propensity_analytic(restricted, graph, IlExposure::IlBinary, &mut table);
        assert_eq!(status, IlStatus::IlErrUnsupported);
        let needed = il_last_error(std::ptr::null_mut(), 0);
        assert!(needed > 0);
        let mut buf = vec![0 as c_char; needed + 1];
        il_last_error(buf.as_mut_ptr(), buf.len());
        let msg = CStr::from_ptr(buf.as_ptr()).to_string_lossy().into_owned();
        assert!(msg.contains("enumeration"), "{msg}");

        il_propensity_free(exact);
        il_propensity_free(analytic);
        il_design_free(restricted);
        il_design_free(design);
        il_graph_free(graph);
    }
}

#[test]
fn invalid_arguments_are_rejected() {
    unsafe {
        let mut design: *mut IlDesign = std::ptr::null_mut();
        assert_eq!(
            il_design_crd(4, 0, &mut design),
            IlStatus::IlErrInvalidArgument
        );
        assert_eq!(
            il_design_bernoulli(4, 1.5, &mut design),
            IlStatus::IlErrInvalidArgument
        );
        let mut graph: *mut IlGraph = std::ptr::null_mut();
        let edges: [u32; 2] = [0, 9];
        assert_eq!(
            il_graph_from_edge_list(4, edges.as_ptr(), 1, &mut graph),
            IlStatus::IlErrInvalidArgument
        );
        assert_eq!(
            il_graph_from_edge_list(4, std::ptr::null(), 2, &mut graph),
            IlStatus::IlErrNullPointer
        );
    }
}

#[test]
fn run_toml_returns_csv() {
    let config = CString::new(
        r#"
[graph]
source = "erdos_renyi"
n = 12
p = 0.15
seed = 2

[exposure]
model = "binary"

[outcomes]
source = "uncorrelated"
seed = 3

[experiment]
estimand = "dte"
replicates = 50
master_seed = 4
mode = "monte_carlo"

[[strategy]]
design = { kind = "crd", n_t = 4 }
estimator = "hajek"
"#,
    )
    .unwrap();
    unsafe {
        let csv = il_run_toml(config.as_ptr());
        assert!(!csv.is_null());
        let text = CStr::from_ptr(csv).to_string_lossy().into_owned();
        il_string_free(csv);
        assert!(text.starts_with("strategy,design,estimator,estimand,"));
        assert_eq!(text.lines().count(), 2);
        assert!(text.contains("hajek"));

        let bad = CString::new("this is not toml [").unwrap();
        let out = il_run_toml(bad.as_ptr());
        assert!(out.is_null());
    }
}
