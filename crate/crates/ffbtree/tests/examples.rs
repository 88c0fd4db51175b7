//! Runs every example as a test.

#[allow(dead_code)]
#[path = "../examples/io_accounting.rs"]
mod io_accounting;

#[test]
fn io_accounting_runs() {
    io_accounting::run_example().unwrap();
}

#[allow(dead_code)]
#[path = "../examples/worst_case_insert.rs"]
mod worst_case_insert;

#[test]
fn worst_case_insert_runs() {
    worst_case_insert::run_example().unwrap();
}

#[allow(dead_code)]
#[path = "../examples/sequential_fluctuation.rs"]
mod sequential_fluctuation;

#[test]
fn sequential_fluctuation_runs() {
    sequential_fluctuation::run_example().unwrap();
}

#[allow(dead_code)]
#[path = "../examples/clrs_adversary.rs"]
mod clrs_adversary;

#[test]
fn clrs_adversary_runs() {
    clrs_adversary::run_example().unwrap();
}

#[allow(dead_code)]
#[path = "../examples/critical_state.rs"]
mod critical_state;

#[test]
fn critical_state_runs() {
    critical_state::run_example().unwrap();
}

#[allow(dead_code)]
#[path = "../examples/workload_generators.rs"]
mod workload_generators;

#[test]
fn workload_generators_runs() {
    workload_generators::run_example().unwrap();
}

#[allow(dead_code)]
#[path = "../examples/concurrent_inserts.rs"]
mod concurrent_inserts;

#[test]
fn concurrent_inserts_runs() {
    concurrent_inserts::run_example().unwrap();
}

#[allow(dead_code)]
#[path = "../examples/experiment_config.rs"]
mod experiment_config;

#[test]
fn experiment_config_runs() {
    experiment_config::run_example().unwrap();
}

#[allow(dead_code)]
#[path = "../examples/tail_metrics.rs"]
mod tail_metrics;

#[test]
fn tail_metrics_runs() {
    tail_metrics::run_example().unwrap();
}

#[allow(dead_code)]
#[path = "../examples/utilization.rs"]
mod utilization;

#[test]
fn utilization_runs() {
    utilization::run_example().unwrap();
}
