use proptest::prelude::*;

use super::*;

fn result(id: &str, success: bool, sat: u32, total: u32, agent: u32, expert: u32) -> EpisodeResult {
    EpisodeResult {
        episode_id: id.into(),
        success,
        gc_satisfied: sat,
        gc_total: total,
        agent_steps: agent,
        expert_steps: expert,
        policy: "adapt".into(),
        reasoner: "oracle".into(),
        abort: AbortCode::None,
        scene_split: SceneSplit::Seen,
        partition: Partition::Test,
        mode: Mode::Dynamic,
        difficulty: Difficulty::Basic,
    }
}

#[test]
fn metric_examples() {
    let m = episode_metrics(&result("a", true, 2, 2, 100, 100));
    assert_eq!((m.sr, m.plw_sr), (1.0, 1.0));
    let m = episode_metrics(&result("a", true, 2, 2, 200, 100));
    assert_eq!(m.plw_sr, 0.5);
    let m = episode_metrics(&result("a", false, 3, 4, 50, 80));
    assert_eq!((m.gc, m.plw_gc, m.sr), (0.75, 0.75, 0.0));
}

#[test]
fn two_episodes_average_to_fifty_percent() {
    let rs = [result("a", true, 1, 1, 10, 10), result("b", false, 0, 1, 10, 10)];
    let rep = aggregate(&rs, Grouping::default()).unwrap();
    let cell = rep.cells.iter().find(|c| c.n == 2).unwrap();
    assert_eq!(cell.sr, Some(50.0));
    assert_eq!(cell.split, Some(SceneSplit::Seen));
    // Full grid: 2 splits x 2 modes x 2 difficulties.
    assert_eq!(rep.cells.len(), 8);
    let empty = rep.cells.iter().find(|c| c.n == 0).unwrap();
    assert_eq!((empty.gc, empty.sr), (None, None));
    assert!(matches!(aggregate(&[], Grouping::default()), Err(EvalError::Empty)));
}

#[test]
fn static_and_dynamic_tables_separate() {
    let mut s = result("a", true, 1, 1, 10, 10);
    s.mode = Mode::Static;
    let d = result("b", false, 0, 1, 10, 10);
    let g = Grouping { split: false, partition: false, mode: true, difficulty: false };
    let rep = aggregate(&[s, d], g).unwrap();
    let sr: Vec<_> = rep.cells.iter().map(|c| (c.mode, c.sr)).collect();
    assert_eq!(sr, vec![(Some(Mode::Static), Some(100.0)), (Some(Mode::Dynamic), Some(0.0))]);
}

#[test]
fn report_formats() {
    let rs = [result("a", true, 1, 1, 12, 10), result("b", false, 1, 2, 10, 10)];
    let rep = aggregate(&rs, Grouping::default()).unwrap();
    let json = render_report(&rep, ReportFormat::Json).unwrap();
    assert_eq!(serde_json::from_str::<SplitReport>(&json).unwrap(), rep);
    let md = render_report(&rep, ReportFormat::Markdown).unwrap();
    assert!(md.lines().next().unwrap().contains("GC | PLW GC | SR | PLW SR"));
    let csv = render_report(&rep, ReportFormat::Csv).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "policy,split,partition,mode,difficulty,n,gc,plw_gc,sr,plw_sr");
    assert!(csv.lines().any(|l| l.contains(",0,,,,")), "{csv}");
    assert_eq!(csv.lines().count(), 1 + rep.cells.len());

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("results.jsonl");
    fs::write(&path, results_to_jsonl(&rs)).unwrap();
    assert_eq!(read_results(&path).unwrap(), rs);
    fs::write(&path, "{\"episode_id\": 3}\n").unwrap();
    assert!(matches!(read_results(&path), Err(EvalError::Parse { line: 1, .. })));
}

fn arb_result() -> impl Strategy<Value = EpisodeResult> {
    (1u32..6, 0u32..6, any::<bool>(), 0u32..400, 1u32..400, 0usize..2, 0usize..2, 0usize..2).prop_map(
        |(total, sat, success, agent, expert, sp, mo, di)| {
            let sat = if success { total } else { sat.min(total) };
            let mut r = result(&format!("ep-{agent}-{expert}"), success, sat, total, agent, expert);
            r.scene_split = [SceneSplit::Seen, SceneSplit::Unseen][sp];
            r.mode = [Mode::Static, Mode::Dynamic][mo];
            r.difficulty = [Difficulty::Basic, Difficulty::Advanced][di];
            r
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn metric_identities(r in arb_result()) {
        let m = episode_metrics(&r);
        prop_assert!(m.plw_sr <= m.sr && m.plw_gc <= m.gc);
        let shorter = r.agent_steps <= r.expert_steps;
        prop_assert_eq!(m.plw_gc == m.gc, shorter || m.gc == 0.0);
        prop_assert_eq!(m.plw_sr == m.sr, shorter || m.sr == 0.0);
        prop_assert!(m.gc >= m.sr);
        if r.success {
            prop_assert_eq!(m.gc, 1.0);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn aggregation_is_order_free_and_plw_bounded(mut rs in prop::collection::vec(arb_result(), 1..40), seed in any::<u64>()) {
        let a = aggregate(&rs, Grouping::default()).unwrap();
        use rand::{seq::SliceRandom, SeedableRng};
        rs.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
        prop_assert_eq!(&aggregate(&rs, Grouping::default()).unwrap(), &a);
        for c in &a.cells {
            if c.n > 0 {
                prop_assert!(c.plw_gc.unwrap() <= c.gc.unwrap());
                prop_assert!(c.plw_sr.unwrap() <= c.sr.unwrap());
            }
        }
    }
}
