use std::ffi::{CStr, CString};
use std::process::Command;
use std::ptr;

use evacsim_ffi::*;

fn last_error() -> String {
    let p = evacsim_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn generated() -> *mut EvacsimGraph {
    let mut g = ptr::null_mut();
    let status = unsafe { evacsim_graph_generate(2, 40, 60, 2, 7, &mut g) };
    assert_eq!(status, EvacsimStatus::Ok);
    g
}

#[test]
fn graph_handle_lifecycle() {
    let g = generated();
    unsafe {
        assert_eq!(evacsim_graph_node_count(g), 40);
        assert_eq!(evacsim_graph_edge_count(g), 62);
        let mut exit = usize::MAX;
        assert_eq!(evacsim_graph_exit(g, &mut exit), EvacsimStatus::Ok);
        assert_eq!(exit, 0);
        evacsim_graph_free(g);
        evacsim_graph_free(ptr::null_mut());
        assert_eq!(evacsim_graph_node_count(ptr::null()), 0);
    }
}

#[test]
fn generator_errors_set_a_message() {
    let mut g = ptr::null_mut();
    let status = unsafe { evacsim_graph_generate(2, 40, 10, 2, 7, &mut g) };
    assert_eq!(status, EvacsimStatus::Graph);
    assert!(g.is_null());
    assert!(!last_error().is_empty());
}

#[test]
fn load_reports_io_and_parse_errors() {
    let dir = tempfile::tempdir().unwrap();
    let missing = CString::new(dir.path().join("nope.graph").to_str().unwrap()).unwrap();
    let mut g = ptr::null_mut();
    assert_eq!(unsafe { evacsim_graph_load(missing.as_ptr(), &mut g) }, EvacsimStatus::Io);

    let bad = dir.path().join("bad.graph");
    std::fs::write(&bad, "nodes 1\nexit 3\n").unwrap();
    let bad = CString::new(bad.to_str().unwrap()).unwrap();
    assert_eq!(unsafe { evacsim_graph_load(bad.as_ptr(), &mut g) }, EvacsimStatus::Graph);

    let good = dir.path().join("good.graph");
    std::fs::write(
        &good,
        "nodes 2\nexit 0\nnode 0 0 0 0\nnode 1 0 1 0\nedge 0 1 10 passage\n",
    )
    .unwrap();
    let good = CString::new(good.to_str().unwrap()).unwrap();
    assert_eq!(unsafe { evacsim_graph_load(good.as_ptr(), &mut g) }, EvacsimStatus::Ok);
    unsafe {
        assert_eq!(evacsim_graph_node_count(g), 2);
        evacsim_graph_free(g);
    }
    assert_eq!(
        unsafe { evacsim_graph_load(ptr::null(), &mut g) },
        EvacsimStatus::NullPointer
    );
}

#[test]
fn paired_run_through_the_abi() {
    let g = generated();
    let mut scenario = evacsim_scenario_default();
    scenario.pod = 0.3;
    scenario.sod = 2;
    scenario.master_seed = 5;
    let mut r = ptr::null_mut();
    unsafe {
        assert_eq!(
            evacsim_run_paired(g, &scenario, ptr::null(), 0, 0, &mut r),
            EvacsimStatus::Ok
        );
        assert_eq!(evacsim_results_len(r), 39);
        let mut o = EvacsimOutcome::default();
        let mut sum = (0.0, 0.0);
        for i in 0..39 {
            assert_eq!(evacsim_results_get(r, i, &mut o), EvacsimStatus::Ok);
            assert!(o.ideal_arrival > 0.0 && o.actual_arrival > 0.0);
            sum.0 += o.actual_arrival;
            sum.1 += o.ideal_arrival;
        }
        let mut delta = f64::NAN;
        assert_eq!(evacsim_results_delta_avg(r, &mut delta), EvacsimStatus::Ok);
        assert!((delta - (sum.0 - sum.1) / sum.1).abs() < 1e-12);
        assert_eq!(evacsim_results_get(r, 39, &mut o), EvacsimStatus::OutOfRange);
        evacsim_results_free(r);

        let starts = [3usize, 4, 99];
        assert_eq!(
            evacsim_run_paired(g, &scenario, starts.as_ptr(), 3, 0, &mut r),
            EvacsimStatus::OutOfRange
        );
        scenario.pod = 2.0;
        assert_eq!(
            evacsim_run_paired(g, &scenario, starts.as_ptr(), 2, 0, &mut r),
            EvacsimStatus::Config
        );
        assert!(last_error().contains("pod"));
        evacsim_graph_free(g);
    }
}

#[test]
fn same_inputs_same_outputs() {
    let g = generated();
    let scenario = EvacsimScenario {
        poe: 0.2,
        ..evacsim_scenario_default()
    };
    let run = || unsafe {
        let mut r = ptr::null_mut();
        assert_eq!(evacsim_run_paired(g, &scenario, ptr::null(), 0, 3, &mut r), EvacsimStatus::Ok);
        let mut d = 0.0;
        evacsim_results_delta_avg(r, &mut d);
        evacsim_results_free(r);
        d
    };
    assert_eq!(run(), run());
    unsafe { evacsim_graph_free(g) };
}

#[test]
fn header_declares_the_api_and_compiles_as_c() {
    let header = concat!(env!("CARGO_MANIFEST_DIR"), "/include/evacsim.h");
    let text = std::fs::read_to_string(header).unwrap();
    for name in [
        "evacsim_graph_load",
        "evacsim_graph_generate",
        "evacsim_graph_free",
        "evacsim_run_paired",
        "evacsim_results_get",
        "evacsim_results_free",
        "evacsim_last_error",
        "typedef struct EvacsimGraph EvacsimGraph;",
        "EVACSIM_STATUS_OK = 0",
    ] {
        assert!(text.contains(name), "header lacks {name}");
    }

    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("use.c");
    std::fs::write(
        &src,
        "#include \"evacsim.h\"\n\
         int main(void) {\n\
           EvacsimGraph *g = NULL;\n\
           EvacsimScenario s = evacsim_scenario_default();\n\
           EvacsimStatus st = evacsim_graph_generate(3, 346, 600, 5, 0, &g);\n\
           (void)s; evacsim_graph_free(g);\n\
           return st == EVACSIM_STATUS_OK ? 0 : 1;\n\
         }\n",
    )
    .unwrap();
    match Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(concat!(env!("CARGO_MANIFEST_DIR"), "/include"))
        .arg(&src)
        .output()
    {
        Ok(out) => assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr)),
        Err(e) => eprintln!("no C compiler, skipped compile check: {e}"),
    }
}
