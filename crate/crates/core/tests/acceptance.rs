use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use indexmap::IndexMap;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use hammr::agents::{AgentLibrary, DISPATCHER};
use hammr::backend::{load_script, ConfusableBackend, OraclePlanner, ScriptedBackend};
use hammr::engine::{Engine, EngineConfig};
use hammr::eval::{aggregate, aggregate_values, exact_match, vqa_accuracy, ErrorLabel, EvalConfig, Harness};
use hammr::tools::{builtin_registry, NoiseConfig, ToolConfig};
use hammr::trace::{Outcome, StepKind};
use hammr::value::{iou, Box2D, ImageRef, Value};
use hammr::world::{generate_suite, KnowledgeBase, Point, QuestionType, Scene, SceneObject, SuiteConfig, World};

type Check = Result<(), String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Check {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/fixtures")
}

fn load_scene(name: &str) -> Scene {
    let text = std::fs::read_to_string(fixtures().join("scenes").join(name)).unwrap();
    serde_json::from_str(&text).unwrap()
}

fn suite(per_type: usize, seed: u64) -> Arc<World> {
    Arc::new(generate_suite(&SuiteConfig { seed, per_type, ..SuiteConfig::default() }).unwrap())
}

fn table_averages() -> Check {
    let rows: [(&str, [f64; 8], f64); 3] = [
        ("specialists", [48.1, 55.0, 51.8, 25.9, 61.0, 50.7, 28.6, 22.0], 42.9),
        ("naive", [8.7, 46.1, 9.8, 13.9, 37.2, 41.5, 25.4, 9.7], 24.0),
        ("hammr", [47.8, 55.0, 45.0, 22.8, 55.4, 50.5, 29.2, 16.3], 40.3),
    ];
    for (name, cells, want) in rows {
        let mean = aggregate_values(&cells);
        ensure((mean - want).abs() <= 0.05, || format!("{name}: mean {mean} vs {want}"))?;
        // Same thing from per-item scores: 1000 items per dataset.
        let mut scores = IndexMap::new();
        for (i, c) in cells.iter().enumerate() {
            let hits = (c * 10.0).round() as usize;
            let v: Vec<f64> = (0..1000).map(|k| if k < hits { 1.0 } else { 0.0 }).collect();
            scores.insert(format!("d{i}"), v);
        }
        let m = aggregate(&scores);
        ensure((m.overall - want).abs() <= 0.05, || format!("{name}: item-level {} vs {want}", m.overall))?;
    }
    Ok(())
}

fn oracle_end_to_end() -> Check {
    let start = Instant::now();
    let world = suite(50, 0);
    let backend = OraclePlanner;
    let h = Harness::new(world, AgentLibrary::shipped(), &backend, EvalConfig { parallel: 4, ..EvalConfig::default() })
        .map_err(|e| e.to_string())?;
    let run = h.run(&["specialists".to_string()]).map_err(|e| e.to_string())?;
    ensure(run.records.len() == 400, || format!("{} records", run.records.len()))?;
    for t in QuestionType::ALL {
        let scores: Vec<f64> = run.records.iter().filter(|r| r.qtype == t).map(|r| r.score).collect();
        ensure(scores.len() == 50, || format!("{}: {} items", t.as_str(), scores.len()))?;
        let acc = aggregate_values(&scores);
        ensure(acc == 1.0, || format!("{} scored {acc}", t.specialist()))?;
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(secs < 60.0, || format!("took {secs:.1}s"))
}

fn confusable_backend() -> Check {
    let world = suite(50, 1);
    let backend = ConfusableBackend::default();
    let h = Harness::new(world, AgentLibrary::shipped(), &backend, EvalConfig { parallel: 4, ..EvalConfig::default() })
        .map_err(|e| e.to_string())?;
    let run = h.run(&["hammr".to_string(), "naive".to_string()]).map_err(|e| e.to_string())?;
    let naive: Vec<_> = run.records_of("naive").collect();
    let unknown = naive
        .iter()
        .filter(|r| r.episode.walk().iter().any(|e| e.calls.iter().any(|c| c.error_kind.as_deref() == Some("UnknownTool"))))
        .count();
    let frac = unknown as f64 / naive.len() as f64;
    ensure(frac >= 0.30, || format!("unregistered tool on {:.1}% of naive items", 100.0 * frac))?;
    let hammr = run.report.agent("hammr").unwrap().overall;
    let nv = run.report.agent("naive").unwrap().overall;
    ensure(hammr > nv, || format!("hammr {hammr} <= naive {nv}"))?;
    let injected: Vec<_> = naive.iter().filter(|r| backend.confuses(&r.question) && r.score < 1.0).collect();
    ensure(!injected.is_empty(), || "no injected failures".into())?;
    let ok = injected.iter().filter(|r| r.label == ErrorLabel::ToolCallFormulation).count();
    let share = ok as f64 / injected.len() as f64;
    ensure(share >= 0.99, || format!("{:.1}% of injected failures labeled formulation", 100.0 * share))
}

fn filter_objects_transcript() -> Check {
    let script = load_script(&fixtures().join("filter_objects.json")).map_err(|e| e.to_string())?;
    let backend = ScriptedBackend::new(script);
    let library = AgentLibrary::shipped();
    let world = Arc::new(World::default());
    let mut registry = builtin_registry(world, &ToolConfig::default());
    library.register_all(&mut registry).map_err(|e| e.to_string())?;
    let config = EngineConfig::default();
    let engine = Engine { registry: &registry, backend: &backend, config: &config };
    let inputs = vec![("image".to_string(), Value::Image(ImageRef::from(load_scene("four_cars.json"))))];
    let ep = engine.run(&library.naive(), "How many yellow cars are in the picture?", &inputs, "filter", 1);
    let want = "#ERROR#: Tool FilterObjects is not registered.";
    let idx = ep
        .steps
        .iter()
        .position(|s| s.kind == StepKind::Observe && s.text == want)
        .ok_or_else(|| format!("no observation {want:?} in {:?}", ep.steps))?;
    ensure(idx + 1 < ep.steps.len(), || "episode stopped at the error".into())?;
    ensure(ep.outcome == Outcome::Finished, || format!("outcome {:?}", ep.outcome))?;
    ensure(ep.steps[1].text == "DetectObject(image, 'car')", || format!("first act {:?}", ep.steps[1].text))
}

fn pixel_iou(a: &Box2D, b: &Box2D) -> f64 {
    let (mut inter, mut union) = (0i64, 0i64);
    let lo_x = a.left.min(b.left);
    let hi_x = a.right().max(b.right());
    let lo_y = a.top.min(b.top);
    let hi_y = a.bottom().max(b.bottom());
    for x in lo_x..hi_x {
        for y in lo_y..hi_y {
            let (ia, ib) = (a.contains_point(x, y), b.contains_point(x, y));
            inter += (ia && ib) as i64;
            union += (ia || ib) as i64;
        }
    }
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

fn random_box(rng: &mut ChaCha8Rng, span: i64, max: i64) -> Box2D {
    Box2D::new(rng.gen_range(-5..span), rng.gen_range(-5..span), rng.gen_range(0..max), rng.gen_range(0..max))
}

fn random_scene(rng: &mut ChaCha8Rng) -> Scene {
    let mut s = Scene::empty("s", rng.gen_range(20..120), rng.gen_range(20..120));
    for i in 0..rng.gen_range(0..8) {
        let b = Box2D::new(rng.gen_range(0..100), rng.gen_range(0..100), rng.gen_range(1..50), rng.gen_range(1..50));
        s.objects.push(SceneObject::new(i, "car", "red", b));
    }
    for _ in 0..rng.gen_range(0..4) {
        s.points.push(Point { x: rng.gen_range(0..120), y: rng.gen_range(0..120) });
    }
    s
}

fn geometry() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..1000 {
        let (a, b) = (random_box(&mut rng, 40, 30), random_box(&mut rng, 40, 30));
        let (got, want) = (iou(&a, &b), pixel_iou(&a, &b));
        ensure((got - want).abs() <= 1e-9, || format!("iou({a}, {b}) = {got}, pixels say {want}"))?;
    }
    for _ in 0..1000 {
        let s = random_scene(&mut rng);
        let a = random_box(&mut rng, 100, 80);
        let b = random_box(&mut rng, 60, 60);
        let nested = s.crop(&a).and_then(|c| c.crop(&b));
        let direct = a
            .intersect(&s.bounds())
            .and_then(|ac| b.translate(ac.left, ac.top).intersect(&ac))
            .map(|r| s.crop(&r));
        match (nested, direct) {
            (Ok(x), Some(Ok(y))) => ensure(x.same_content(&y), || format!("crop mismatch for a={a} b={b}"))?,
            (Err(_), None) => {}
            (x, y) => return Err(format!("a={a} b={b}: nested ok={} direct ok={}", x.is_ok(), matches!(y, Some(Ok(_))))),
        }
    }
    Ok(())
}

fn metric_levels() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let words = ["red", "blue", "two", "3", "the car", "a cat"];
    for _ in 0..500 {
        let refs: Vec<String> = (0..10).map(|_| words[rng.gen_range(0..words.len())].to_string()).collect();
        let pred = words[rng.gen_range(0..words.len())];
        let v = vqa_accuracy(pred, &refs);
        ensure([0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0].contains(&v), || format!("vqa_accuracy gave {v}"))?;
    }
    let table: [(&str, &str, f64); 20] = [
        ("Philippines", "philippines", 1.0),
        ("the Philippines", "Philippines", 1.0),
        ("1739.", "1739", 1.0),
        ("  two  ", "two", 1.0),
        ("two", "2", 0.0),
        ("Red", "red", 1.0),
        ("a cat", "cat", 1.0),
        ("an apple", "apple", 1.0),
        ("the", "the", 1.0),
        ("yes!", "yes", 1.0),
        ("no", "yes", 0.0),
        ("New York", "new york", 1.0),
        ("new-york", "newyork", 1.0),
        ("September 8, 1739", "september 8 1739", 1.0),
        ("Sept 8 1739", "September 8, 1739", 0.0),
        ("", "", 1.0),
        ("", "x", 0.0),
        ("BLUE car", "blue car", 1.0),
        ("blue  car", "blue car", 1.0),
        ("car blue", "blue car", 0.0),
    ];
    for (p, g, want) in table {
        let got = exact_match(p, g);
        ensure(got == want, || format!("exact_match({p:?}, {g:?}) = {got}"))?;
    }
    Ok(())
}

fn files_under(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(dir).unwrap().to_path_buf(), std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn run_cli(args: &[&str]) -> (i32, String) {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = hammr::cli::run(std::iter::once("hammr").chain(args.iter().copied()), &mut out, &mut err);
    (code, String::from_utf8_lossy(&out).into_owned() + &String::from_utf8_lossy(&err))
}

fn deterministic_eval() -> Check {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let suite_dir = tmp.path().join("suite");
    let s = suite_dir.to_str().unwrap();
    let (code, msg) = run_cli(&["gen", "--out", s, "--count", "6", "--seed", "3"]);
    ensure(code == 0, || format!("gen failed: {msg}"))?;
    let manifest = suite_dir.join("manifest.jsonl");
    let mut dumps = Vec::new();
    for run in ["a", "b"] {
        let out = tmp.path().join(run);
        let (code, msg) = run_cli(&[
            "eval", "--manifest", manifest.to_str().unwrap(), "--agents", "hammr,naive,specialists",
            "--out", out.to_str().unwrap(), "--seed", "11", "--noise", "0.3", "--parallel", "4",
        ]);
        ensure(code == 0, || format!("eval {run} failed: {msg}"))?;
        dumps.push(files_under(&out));
    }
    ensure(dumps[0].len() > 100, || format!("only {} files written", dumps[0].len()))?;
    ensure(dumps[0].keys().eq(dumps[1].keys()), || "different file sets".into())?;
    for (k, v) in &dumps[0] {
        ensure(&dumps[1][k] == v, || format!("{} differs between runs", k.display()))?;
    }
    Ok(())
}

fn two_hop_trace() -> Check {
    let script = load_script(&fixtures().join("fig1_two_hop.json")).map_err(|e| e.to_string())?;
    let backend = ScriptedBackend::new(script);
    let library = AgentLibrary::shipped();
    let world = Arc::new(World { kb: KnowledgeBase::generate(0), ..World::default() });
    let mut registry = builtin_registry(world, &ToolConfig::default());
    library.register_all(&mut registry).map_err(|e| e.to_string())?;
    let config = EngineConfig::default();
    let engine = Engine { registry: &registry, backend: &backend, config: &config };
    let inputs = vec![("image".to_string(), Value::Image(ImageRef::from(load_scene("cathedral.json"))))];
    let q = "in which country is the city where this cathedral is located?";
    let ep = engine.run(library.get(DISPATCHER).unwrap(), q, &inputs, "fig1", 1);
    ensure(ep.answer.as_deref() == Some("Philippines"), || format!("answer {:?}", ep.answer))?;
    let single = ep.walk().iter().filter(|e| e.agent == "SingleHopEncyclopedicAgent").count();
    ensure(single == 1, || format!("{single} single-hop sub-episodes"))?;
    ensure(ep.depth() == 3, || format!("depth {}", ep.depth()))?;
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = tmp.path().join("fig1.json");
    std::fs::write(&path, ep.to_json()).map_err(|e| e.to_string())?;
    let (code, text) = run_cli(&["trace", path.to_str().unwrap()]);
    ensure(code == 0, || text.clone())?;
    let headers: Vec<usize> = text
        .lines()
        .filter(|l| l.trim_start().starts_with("=== "))
        .map(|l| l.len() - l.trim_start().len())
        .collect();
    ensure(headers == [0, 2, 4], || format!("trace header indents {headers:?}"))
}

fn noisy_labels() -> Check {
    let world = suite(25, 2);
    let backend = OraclePlanner;
    let columns = ["hammr".to_string()];
    let clean = Harness::new(world.clone(), AgentLibrary::shipped(), &backend, EvalConfig { parallel: 4, ..EvalConfig::default() })
        .map_err(|e| e.to_string())?
        .run(&columns)
        .map_err(|e| e.to_string())?;
    let config = EvalConfig { parallel: 4, seed: 9, ..EvalConfig::default() }.with_noise(NoiseConfig::uniform(0.3));
    let noisy = Harness::new(world, AgentLibrary::shipped(), &backend, config)
        .map_err(|e| e.to_string())?
        .run(&columns)
        .map_err(|e| e.to_string())?;
    ensure(noisy.records.len() == 200, || format!("{} episodes", noisy.records.len()))?;
    for r in &noisy.records {
        let label_ok = (r.score >= 1.0) == (r.label == ErrorLabel::NoError);
        ensure(label_ok, || format!("{}: score {} labeled {:?}", r.item_id, r.score, r.label))?;
    }
    let counts = noisy.report.agent("hammr").unwrap().errors;
    ensure(counts.total() == 200, || format!("{} labels for 200 episodes", counts.total()))?;
    let sum: f64 = counts.percentages().iter().map(|(_, p)| p).sum();
    ensure((sum - 100.0).abs() < 1e-9, || format!("fractions sum to {sum}"))?;
    let clean_ok: std::collections::HashSet<&str> =
        clean.records.iter().filter(|r| r.score >= 1.0).map(|r| r.item_id.as_str()).collect();
    let noise_only: Vec<_> = noisy.records.iter().filter(|r| r.score < 1.0 && clean_ok.contains(r.item_id.as_str())).collect();
    ensure(!noise_only.is_empty(), || "noise caused no failures".into())?;
    let hit = noise_only.iter().filter(|r| r.label == ErrorLabel::ToolFailure).count();
    let precision = hit as f64 / noise_only.len() as f64;
    ensure(precision >= 0.95, || format!("{hit}/{} noise-only failures labeled tool failure", noise_only.len()))
}

fn main() {
    let criteria: [(&str, fn() -> Check); 9] = [
        ("aggregate reproduces the reported averages", table_averages),
        ("oracle specialists score 100% on their own type", oracle_end_to_end),
        ("confusable backend separates naive from hammr", confusable_backend),
        ("unregistered FilterObjects call is observed and the episode continues", filter_objects_transcript),
        ("iou and crop composition", geometry),
        ("vqa accuracy levels and exact match table", metric_levels),
        ("same seed gives identical dumps and reports", deterministic_eval),
        ("two-hop script nests three levels", two_hop_trace),
        ("noise failures get one label each and are tool failures", noisy_labels),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let result = std::panic::catch_unwind(f).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_else(|| "panicked".into()))
        });
        match result {
            Ok(()) => println!("PASS {} {name}", i + 1),
            Err(e) => {
                failed += 1;
                println!("FAIL {} {name}: {e}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
