//! Command-line front end: ask | eval | gen | trace | compare.
//!
//! Exit codes: 0 finished, 2 step budget, malformed output or usage error,
//! 3 fatal error.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use crate::agents::{load_agent_spec, AgentLibrary, DISPATCHER, NAIVE};
use crate::backend::{load_script, Backend, ConfusableBackend, HttpBackend, HttpConfig, OraclePlanner, ScriptedBackend};
use crate::engine::{Engine, EngineConfig};
use crate::eval::{EpisodeRecord, EvalConfig, Harness};
use crate::tools::{builtin_registry, NoiseConfig, ToolConfig};
use crate::trace::{Episode, Outcome};
use crate::value::{ImageRef, Value};
use crate::world::{generate_suite, Point, QuestionType, Scene, SceneConfig, SuiteConfig, World};

pub const EXIT_OK: i32 = 0;
pub const EXIT_BUDGET: i32 = 2;
pub const EXIT_FATAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "hammr", version, about = "Hierarchical tool-using agents for visual question answering")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Answer one question about one or two scenes.
    Ask(AskArgs),
    /// Run a suite through one or more agents and write a report.
    Eval(EvalArgs),
    /// Generate a synthetic suite.
    Gen(GenArgs),
    /// Render an episode dump as a nested transcript.
    Trace(TraceArgs),
    /// Evaluate several agents and print their differences.
    Compare(EvalArgs),
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// JSON run config; explicit flags win over its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// oracle | confusable | scripted:PATH | http:PATH
    #[arg(long)]
    pub backend: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Uniform noise rate for the perception tools.
    #[arg(long)]
    pub noise: Option<f64>,
    #[arg(long)]
    pub max_steps: Option<usize>,
    /// Directory of extra agent specs to load on top of the shipped ones.
    #[arg(long)]
    pub agents_dir: Option<PathBuf>,
    /// Record prompts and completions in the episode.
    #[arg(long)]
    pub log_backend: bool,
}

#[derive(Debug, Args)]
pub struct AskArgs {
    #[arg(long)]
    pub question: String,
    /// Scene file; give it twice for two-image questions.
    #[arg(long = "scene", required = true)]
    pub scenes: Vec<PathBuf>,
    /// Point marked on the first scene, as `x,y`.
    #[arg(long)]
    pub point: Option<String>,
    /// Agent name, `hammr` or `naive`.
    #[arg(long)]
    pub agent: Option<String>,
    /// Agent spec file to run instead of a named agent.
    #[arg(long)]
    pub agent_spec: Option<PathBuf>,
    /// Knowledge base file; defaults to kb.json of the scene's suite.
    #[arg(long)]
    pub kb: Option<PathBuf>,
    /// Write the episode as JSON here.
    #[arg(long)]
    pub dump: Option<PathBuf>,
    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Comma-separated columns: hammr, naive, specialists or agent names.
    #[arg(long, value_delimiter = ',')]
    pub agents: Vec<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub parallel: Option<usize>,
    #[arg(long)]
    pub suite: Option<String>,
    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long)]
    pub out: PathBuf,
    /// `all` or comma-separated type names.
    #[arg(long, default_value = "all")]
    pub types: String,
    #[arg(long, default_value_t = 50)]
    pub count: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub width: Option<i64>,
    #[arg(long)]
    pub height: Option<i64>,
    #[arg(long)]
    pub min_objects: Option<usize>,
    #[arg(long)]
    pub max_objects: Option<usize>,
}

#[derive(Debug, Args)]
pub struct TraceArgs {
    pub path: PathBuf,
    /// Number of nesting levels to show.
    #[arg(long)]
    pub depth: Option<usize>,
}

/// Values a config file may set.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub agent: Option<String>,
    pub agents: Option<Vec<String>>,
    pub backend: Option<String>,
    pub http: Option<HttpConfig>,
    pub manifest: Option<PathBuf>,
    pub seed: Option<u64>,
    pub noise: Option<f64>,
    pub tools: Option<ToolConfig>,
    pub out: Option<PathBuf>,
    pub max_steps: Option<usize>,
    pub parallel: Option<usize>,
    pub agents_dir: Option<PathBuf>,
}

/// A failure with its exit code.
#[derive(Debug)]
struct Fail(i32, String);

fn usage(msg: impl Into<String>) -> Fail {
    Fail(EXIT_BUDGET, msg.into())
}

fn fatal(msg: impl std::fmt::Display) -> Fail {
    Fail(EXIT_FATAL, msg.to_string())
}

type Res<T> = Result<T, Fail>;

/// Flags merged over the config file.
struct Resolved {
    file: RunConfig,
    backend: String,
    seed: Option<u64>,
    tools: ToolConfig,
    engine: EngineConfig,
    library: AgentLibrary,
}

fn read_config(path: Option<&Path>) -> Res<RunConfig> {
    let Some(p) = path else { return Ok(RunConfig::default()) };
    let text = std::fs::read_to_string(p).map_err(|e| fatal(format!("{}: {e}", p.display())))?;
    serde_json::from_str(&text).map_err(|e| fatal(format!("{}: {e}", p.display())))
}

fn resolve(run: &RunArgs) -> Res<Resolved> {
    let file = read_config(run.config.as_deref())?;
    let backend = run.backend.clone().or(file.backend.clone()).unwrap_or_else(|| "oracle".into());
    let seed = run.seed.or(file.seed);
    let mut tools = file.tools.clone().unwrap_or_default();
    if let Some(p) = run.noise.or(file.noise) {
        if !(0.0..=1.0).contains(&p) {
            return Err(usage(format!("--noise must be in [0, 1], got {p}")));
        }
        tools.noise = NoiseConfig::uniform(p);
    }
    let engine = EngineConfig {
        seed: seed.unwrap_or(0),
        log_backend: run.log_backend,
        max_steps: run.max_steps.or(file.max_steps),
        ..EngineConfig::default()
    };
    let mut library = AgentLibrary::shipped();
    if let Some(dir) = run.agents_dir.clone().or(file.agents_dir.clone()) {
        let extra = AgentLibrary::load_dir(&dir).map_err(fatal)?;
        library.specs.extend(extra.specs);
    }
    Ok(Resolved {
        file,
        backend,
        seed,
        tools,
        engine,
        library,
    })
}

impl Resolved {
    fn needs_seed(&self) -> bool {
        !self.backend.starts_with("http")
    }

    fn check_seed(&self) -> Res<()> {
        if self.needs_seed() && self.seed.is_none() {
            return Err(usage(format!("--seed is required with the {} backend", self.backend)));
        }
        Ok(())
    }

    fn make_backend(&self) -> Res<Box<dyn Backend>> {
        let b = self.backend.as_str();
        Ok(match b {
            "oracle" => Box::new(OraclePlanner),
            "confusable" => Box::new(ConfusableBackend::default()),
            "http" => {
                let cfg = self.file.http.clone().ok_or_else(|| usage("backend http needs an `http` block in the config"))?;
                Box::new(HttpBackend::new(cfg))
            }
            _ => {
                if let Some(p) = b.strip_prefix("scripted:") {
                    Box::new(ScriptedBackend::new(load_script(Path::new(p)).map_err(fatal)?))
                } else if let Some(p) = b.strip_prefix("http:") {
                    let text = std::fs::read_to_string(p).map_err(|e| fatal(format!("{p}: {e}")))?;
                    let cfg: HttpConfig = serde_json::from_str(&text).map_err(|e| fatal(format!("{p}: {e}")))?;
                    Box::new(HttpBackend::new(cfg))
                } else {
                    return Err(usage(format!("unknown backend {b:?}")));
                }
            }
        })
    }
}

fn parse_point(s: &str) -> Res<Point> {
    let (x, y) = s.split_once(',').ok_or_else(|| usage(format!("--point expects x,y, got {s:?}")))?;
    let n = |v: &str| v.trim().parse::<i64>().map_err(|_| usage(format!("bad coordinate {v:?}")));
    Ok(Point { x: n(x)?, y: n(y)? })
}

fn load_scene(path: &Path) -> Res<Scene> {
    let text = std::fs::read_to_string(path).map_err(|e| fatal(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| fatal(format!("{}: {e}", path.display())))
}

fn agent_column(name: &str) -> &str {
    match name {
        "hammr" => DISPATCHER,
        "naive" => NAIVE,
        n => n,
    }
}

fn cmd_ask(a: &AskArgs, out: &mut dyn Write, err: &mut dyn Write) -> Res<i32> {
    let r = resolve(&a.run)?;
    r.check_seed()?;
    if a.scenes.len() > 2 {
        return Err(usage("at most two scenes"));
    }
    let mut scenes = a.scenes.iter().map(|p| load_scene(p)).collect::<Res<Vec<_>>>()?;
    if let Some(p) = &a.point {
        scenes[0].points = vec![parse_point(p)?];
    }
    let kb_path = a.kb.clone().or_else(|| {
        let guess = a.scenes[0].parent()?.parent()?.join("kb.json");
        guess.exists().then_some(guess)
    });
    let mut world = World::default();
    if let Some(p) = kb_path {
        let text = std::fs::read_to_string(&p).map_err(|e| fatal(format!("{}: {e}", p.display())))?;
        world.kb = serde_json::from_str(&text).map_err(|e| fatal(format!("{}: {e}", p.display())))?;
    }
    let world = Arc::new(world);
    let mut registry = builtin_registry(world, &r.tools);
    r.library.register_all(&mut registry).map_err(fatal)?;
    let spec = match &a.agent_spec {
        Some(p) => load_agent_spec(p, &registry).map_err(fatal)?,
        None => {
            let name = agent_column(a.agent.as_deref().or(r.file.agent.as_deref()).unwrap_or("hammr"));
            if name == NAIVE {
                r.library.naive()
            } else {
                r.library.get(name).cloned().ok_or_else(|| usage(format!("unknown agent {name:?}")))?
            }
        }
    };
    let inputs: Vec<(String, Value)> = if scenes.len() == 1 {
        vec![("image".into(), Value::Image(ImageRef::from(scenes.remove(0))))]
    } else {
        scenes
            .into_iter()
            .enumerate()
            .map(|(i, s)| (format!("image{}", i + 1), Value::Image(ImageRef::from(s))))
            .collect()
    };
    let backend = r.make_backend()?;
    let engine = Engine {
        registry: &registry,
        backend: backend.as_ref(),
        config: &r.engine,
    };
    let ep = engine.run(&spec, &a.question, &inputs, "ask", 1);
    let _ = write!(out, "{}", ep.render(None));
    if let Some(p) = &a.dump {
        std::fs::write(p, ep.to_json() + "\n").map_err(|e| fatal(format!("{}: {e}", p.display())))?;
    }
    if let Some(e) = &ep.error {
        let _ = writeln!(err, "{e}");
    }
    Ok(match ep.outcome {
        Outcome::Finished => EXIT_OK,
        Outcome::StepBudgetExceeded | Outcome::MalformedOutput => EXIT_BUDGET,
        Outcome::FatalError => EXIT_FATAL,
    })
}

fn run_eval(a: &EvalArgs, compare: bool, out: &mut dyn Write) -> Res<i32> {
    let r = resolve(&a.run)?;
    r.check_seed()?;
    let manifest = a
        .manifest
        .clone()
        .or(r.file.manifest.clone())
        .ok_or_else(|| usage("--manifest is required"))?;
    let world = World::load(&manifest).map_err(fatal)?;
    if world.items.is_empty() {
        return Err(usage(format!("{} has no items", manifest.display())));
    }
    let mut agents = if a.agents.is_empty() {
        r.file.agents.clone().unwrap_or_else(|| vec!["hammr".into()])
    } else {
        a.agents.clone()
    };
    agents.retain(|s| !s.trim().is_empty());
    if compare && agents.len() < 2 {
        return Err(usage("compare needs at least two agents"));
    }
    let backend = r.make_backend()?;
    let out_dir = a.out.clone().or(r.file.out.clone()).unwrap_or_else(|| PathBuf::from("out"));
    let suite = a.suite.clone().unwrap_or_else(|| {
        manifest
            .parent()
            .and_then(|p| p.file_name())
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| "suite".into())
    });
    let config = EvalConfig {
        suite,
        seed: r.seed.unwrap_or(0),
        tools: r.tools.clone(),
        engine: r.engine.clone(),
        parallel: a.parallel.or(r.file.parallel).unwrap_or(1),
        out_dir: Some(out_dir.clone()),
        ..EvalConfig::default()
    };
    let harness = Harness::new(Arc::new(world), r.library.clone(), backend.as_ref(), config).map_err(fatal)?;
    let run = harness.run(&agents).map_err(|e| match e {
        crate::eval::EvalError::UnknownAgent(_) => usage(e.to_string()),
        e => fatal(e),
    })?;
    let _ = write!(out, "{}", run.report.render(crate::eval::ReportFormat::Markdown));
    if compare {
        let _ = writeln!(out);
        let _ = write!(out, "{}", run.report.diff_table());
    }
    let _ = writeln!(
        out,
        "\n{} episodes ({} resumed); report written to {}",
        run.records.len(),
        run.resumed,
        out_dir.join("report.json").display()
    );
    Ok(EXIT_OK)
}

fn parse_types(s: &str) -> Res<Vec<QuestionType>> {
    if s == "all" {
        return Ok(QuestionType::ALL.to_vec());
    }
    s.split(',')
        .map(|t| QuestionType::parse(t.trim()).ok_or_else(|| usage(format!("unknown question type {t:?}"))))
        .collect()
}

fn cmd_gen(a: &GenArgs, out: &mut dyn Write) -> Res<i32> {
    let d = SceneConfig::default();
    let scene = SceneConfig {
        width: a.width.unwrap_or(d.width),
        height: a.height.unwrap_or(d.height),
        min_objects: a.min_objects.unwrap_or(d.min_objects),
        max_objects: a.max_objects.unwrap_or(d.max_objects),
        ..d
    };
    let config = SuiteConfig {
        seed: a.seed,
        per_type: a.count,
        types: parse_types(&a.types)?,
        scene,
        ..SuiteConfig::default()
    };
    let world = generate_suite(&config).map_err(fatal)?;
    let manifest = world.save(&a.out).map_err(fatal)?;
    let _ = writeln!(out, "wrote {} items to {}", world.items.len(), manifest.display());
    Ok(EXIT_OK)
}

/// Load a bare episode or an eval record.
pub fn load_episode(path: &Path) -> Result<Episode, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?;
    let parsed = if value.get("episode").is_some() {
        serde_json::from_value::<EpisodeRecord>(value).map(|r| r.episode)
    } else {
        serde_json::from_value::<Episode>(value)
    };
    parsed.map_err(|e| format!("{}: {e}", path.display()))
}

fn cmd_trace(a: &TraceArgs, out: &mut dyn Write) -> Res<i32> {
    let ep = load_episode(&a.path).map_err(fatal)?;
    let _ = write!(out, "{}", ep.render(a.depth));
    Ok(EXIT_OK)
}

/// Run the CLI with explicit arguments and streams; returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_BUDGET } else { EXIT_OK };
            let _ = if e.use_stderr() {
                write!(err, "{e}")
            } else {
                write!(out, "{e}")
            };
            return code;
        }
    };
    let result = match &cli.command {
        Command::Ask(a) => cmd_ask(a, out, err),
        Command::Eval(a) => run_eval(a, false, out),
        Command::Compare(a) => run_eval(a, true, out),
        Command::Gen(a) => cmd_gen(a, out),
        Command::Trace(a) => cmd_trace(a, out),
    };
    match result {
        Ok(code) => code,
        Err(Fail(code, msg)) => {
            let _ = writeln!(err, "error: {msg}");
            code
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn call(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let mut full = vec!["hammr"];
        full.extend_from_slice(args);
        let code = run(full, &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn gen_counts_and_is_byte_stable() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let pa = a.path().to_str().unwrap();
        let pb = b.path().to_str().unwrap();
        let (code, out, _) = call(&["gen", "--out", pa, "--types", "all", "--count", "2", "--seed", "4"]);
        assert_eq!(code, 0);
        assert!(out.contains("wrote 16 items"));
        call(&["gen", "--out", pb, "--types", "all", "--count", "2", "--seed", "4"]);
        for f in ["manifest.jsonl", "kb.json"] {
            assert_eq!(std::fs::read(a.path().join(f)).unwrap(), std::fs::read(b.path().join(f)).unwrap());
        }
    }

    #[test]
    fn gen_infeasible_config_fails() {
        let d = tempfile::tempdir().unwrap();
        let (code, _, err) = call(&["gen", "--out", d.path().to_str().unwrap(), "--types", "counting", "--count", "1", "--max-objects", "0"]);
        assert_ne!(code, 0);
        assert!(!err.is_empty());
    }

    #[test]
    fn eval_usage_errors() {
        let d = tempfile::tempdir().unwrap();
        let m = d.path().join("manifest.jsonl");
        std::fs::write(&m, "").unwrap();
        let (code, _, err) = call(&["eval", "--manifest", m.to_str().unwrap(), "--seed", "1"]);
        assert_eq!(code, EXIT_BUDGET, "{err}");
        assert!(err.contains("no items"));
        let (code, _, err) = call(&["eval", "--manifest", m.to_str().unwrap()]);
        assert_eq!(code, EXIT_BUDGET);
        assert!(err.contains("--seed"));
    }

    #[test]
    fn ask_exit_codes() {
        let d = tempfile::tempdir().unwrap();
        let pd = d.path().to_str().unwrap();
        call(&["gen", "--out", pd, "--types", "counting", "--count", "1", "--seed", "2"]);
        let manifest = std::fs::read_to_string(d.path().join("manifest.jsonl")).unwrap();
        let item: crate::world::QaItem = serde_json::from_str(manifest.lines().next().unwrap()).unwrap();
        let scene = d.path().join(&item.scenes[0]);
        let scene = scene.to_str().unwrap();
        let (code, out, _) = call(&["ask", "--question", &item.question, "--scene", scene, "--seed", "0"]);
        assert_eq!(code, 0, "{out}");
        assert!(out.contains(&format!("[Finish]: {}", item.gold[0])), "{out}");
        let (code, _, _) = call(&["ask", "--question", &item.question, "--scene", scene, "--seed", "0", "--max-steps", "1", "--agent", "ComplexCountingAgent"]);
        assert_eq!(code, EXIT_BUDGET);
        let (code, _, err) = call(&["ask", "--question", "q", "--scene", "/nonexistent/scene.json", "--seed", "0"]);
        assert_eq!(code, EXIT_FATAL);
        assert!(err.contains("nonexistent"));
    }

    #[test]
    fn trace_rejects_malformed_dumps() {
        let d = tempfile::tempdir().unwrap();
        let p = d.path().join("bad.json");
        std::fs::write(&p, "{\"agent\": 3}").unwrap();
        let (code, _, err) = call(&["trace", p.to_str().unwrap()]);
        assert_eq!(code, EXIT_FATAL);
        assert!(!err.is_empty());
    }
}
