use skyway::bench::*;
use skyway::composer::Strategy;
use skyway::failure::InjectionConfig;
use skyway::net::*;

fn corpus(n: usize) -> (SkywayNetwork, Vec<DeliveryRequest>) {
    let net = generate_network(&NetworkGenConfig { nodes: 30, seed: 8, ..Default::default() }).unwrap();
    let reqs = generate_requests(&net, n, 8, PayloadLimits::default(), WindowPolicy::default()).unwrap();
    (net, reqs)
}

fn metrics_bytes(rows: &[MetricsRow]) -> Vec<u8> {
    let mut v = Vec::new();
    write_metrics_csv(rows, &mut v).unwrap();
    v
}

fn trace_bytes(results: &[RequestResult]) -> Vec<u8> {
    let mut v = Vec::new();
    write_traces_jsonl(results, &mut v).unwrap();
    v
}

#[test]
fn metrics_recompute_from_traces() {
    let (net, reqs) = corpus(12);
    let cfg = BenchConfig { seeds: vec![0, 1], ..Default::default() };
    let report = run_bench(&net, &reqs, &cfg).unwrap();
    assert_eq!(report.rows.len(), 8);
    assert_eq!(report.results.len(), 4 * 2 * 12);
    for row in &report.rows {
        let sel: Vec<&RequestResult> =
            report.results.iter().filter(|r| r.seed == row.seed && r.trace.strategy == row.strategy).collect();
        assert_eq!(row.total_requests, sel.len());
        let ok: Vec<f64> = sel.iter().filter(|r| r.trace.successful()).map(|r| r.trace.delivery_time).collect();
        assert_eq!(row.successful_requests, ok.len());
        assert_eq!(row.on_time_requests, sel.iter().filter(|r| r.trace.outcome == skyway::failure::DeliveryOutcome::Success).count());
        assert!(row.on_time_requests <= row.successful_requests && row.successful_requests <= row.total_requests);
        if !ok.is_empty() {
            let mean = ok.iter().sum::<f64>() / ok.len() as f64;
            assert!((row.mean_delivery_time - mean).abs() <= 1e-9 * mean);
        }
    }

    // Every trace line parses and summaries match results.
    let text = String::from_utf8(trace_bytes(&report.results)).unwrap();
    let summaries: Vec<serde_json::Value> = text
        .lines()
        .map(|l| serde_json::from_str::<serde_json::Value>(l).unwrap())
        .filter(|v| v["record"] == "summary")
        .collect();
    assert_eq!(summaries.len(), report.results.len());
    let legs = text.lines().count() - summaries.len();
    assert_eq!(legs, report.results.iter().map(|r| r.trace.legs.len()).sum::<usize>());

    let csv = String::from_utf8(metrics_bytes(&report.rows)).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("# skyway-metrics v1"));
    assert_eq!(lines.next(), Some("strategy,seed,total_requests,successful_requests,on_time_requests,mean_delivery_time_s"));
    assert_eq!(lines.count(), 8);
}

#[test]
fn no_failures_means_every_request_succeeds() {
    let (net, reqs) = corpus(10);
    let cfg = BenchConfig { injection: InjectionConfig::disabled(), ..Default::default() };
    let report = run_bench(&net, &reqs, &cfg).unwrap();
    for row in &report.rows {
        assert_eq!(row.successful_requests, row.total_requests, "{}", row.strategy);
    }
    assert!(report.truth.iter().all(|(_, _, s)| s.iter().all(|d| d.failure_time.is_none())));
}

#[test]
fn reruns_are_byte_identical() {
    let (net, reqs) = corpus(8);
    let cfg = BenchConfig { seeds: vec![3], workers: 2, ..Default::default() };
    let a = run_bench(&net, &reqs, &cfg).unwrap();
    let b = run_bench(&net, &reqs, &BenchConfig { workers: 1, ..cfg.clone() }).unwrap();
    assert_eq!(metrics_bytes(&a.rows), metrics_bytes(&b.rows));
    assert_eq!(trace_bytes(&a.results), trace_bytes(&b.results));

    let dir = tempfile::tempdir().unwrap();
    write_report(&a, dir.path()).unwrap();
    for f in ["metrics.csv", "timing.csv", "traces.jsonl", "truth.jsonl", "loss.csv"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    assert_eq!(std::fs::read(dir.path().join("metrics.csv")).unwrap(), metrics_bytes(&a.rows));
}

#[test]
fn exhaustive_costs_more_wall_clock_than_the_heuristic() {
    let (net, reqs) = corpus(15);
    let mut cfg = BenchConfig { strategies: vec![Strategy::Heuristic, Strategy::Exhaustive], ..Default::default() };
    cfg.composer.exhaustive_cap = 20;
    let report = run_bench(&net, &reqs, &cfg).unwrap();
    let exec = |s: Strategy| report.rows.iter().find(|r| r.strategy == s).unwrap().mean_execution_time;
    assert!(exec(Strategy::Exhaustive) > exec(Strategy::Heuristic));
}

#[test]
fn invalid_configs_are_rejected() {
    let (net, reqs) = corpus(3);
    let bad = [
        BenchConfig { strategies: vec![], ..Default::default() },
        BenchConfig { seeds: vec![], ..Default::default() },
        BenchConfig { injection: InjectionConfig { probability: 1.5, ..Default::default() }, ..Default::default() },
    ];
    for cfg in bad {
        assert!(matches!(run_bench(&net, &reqs, &cfg), Err(BenchError::Config(_))));
    }
    let mut r = reqs.clone();
    r[0].destination = "nowhere".into();
    assert!(run_bench(&net, &r, &BenchConfig::default()).is_err());
}
