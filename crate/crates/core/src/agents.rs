//! Declarative agent specs, the shipped library and the agent-as-tool adapter.

use std::collections::BTreeSet;
use std::path::Path;
use std::sync::Arc;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::actlang::parse_act_line;
use crate::engine::{Engine, DEFAULT_MAX_STEPS, DEFAULT_PROMPT_CHAR_BUDGET};
use crate::registry::{
    param, CallContext, Mode, ParamType, RegistryError, Signature, Tool, ToolError, ToolInfo,
    ToolRegistry,
};
use crate::trace::{Outcome, StepKind};
use crate::value::{Value, ValueTag};

pub const DISPATCHER: &str = "QuestionDispatcherAgent";
pub const NAIVE: &str = "NaiveGenericAgent";

/// Specialists in the order of their question types.
pub const SPECIALISTS: [&str; 8] = [
    "PointQALocalAgent",
    "PointQALookTwiceAgent",
    "SingleHopEncyclopedicAgent",
    "TwoHopEncyclopedicAgent",
    "TwoImageVQAAgent",
    "SpatialReasoningAgent",
    "ComplexCountingAgent",
    "OCRReasoningAgent",
];

fn default_inputs() -> Vec<String> {
    vec!["image".to_string()]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Example {
    pub question: String,
    #[serde(default = "default_inputs")]
    pub inputs: Vec<String>,
    pub transcript: Vec<String>,
}

fn default_steps() -> usize {
    DEFAULT_MAX_STEPS
}

fn default_budget() -> usize {
    DEFAULT_PROMPT_CHAR_BUDGET
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentSpec {
    pub name: String,
    /// One-line description used when the agent is offered as a tool.
    #[serde(default)]
    pub description: String,
    pub preamble: String,
    pub tools: Vec<String>,
    #[serde(default)]
    pub examples: Vec<Example>,
    #[serde(default = "default_steps")]
    pub max_steps: usize,
    #[serde(default = "default_budget")]
    pub prompt_char_budget: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AgentError {
    #[error("cannot parse agent spec {path}: {message}")]
    Parse { path: String, message: String },
    #[error("agent {agent} lists unknown tool {tool}")]
    UnknownToolInSpec { agent: String, tool: String },
    #[error("an example of {agent} calls {tool}, which is not in its tool list")]
    ExampleUsesDisallowedTool { agent: String, tool: String },
    #[error("agent {agent}: {message}")]
    Invalid { agent: String, message: String },
    #[error(transparent)]
    Registry(#[from] RegistryError),
}

impl AgentSpec {
    pub fn parse(text: &str, origin: &str) -> Result<AgentSpec, AgentError> {
        let spec: AgentSpec = serde_json::from_str(text).map_err(|e| AgentError::Parse {
            path: origin.to_string(),
            message: e.to_string(),
        })?;
        spec.lint()?;
        Ok(spec)
    }

    /// Checks that need no registry: step budget and example tool usage.
    pub fn lint(&self) -> Result<(), AgentError> {
        let invalid = |m: &str| AgentError::Invalid {
            agent: self.name.clone(),
            message: m.to_string(),
        };
        if self.max_steps == 0 {
            return Err(invalid("max_steps must be at least 1"));
        }
        if self.name.is_empty() {
            return Err(invalid("name is empty"));
        }
        for tool in self.example_tools() {
            if !self.tools.contains(&tool) {
                return Err(AgentError::ExampleUsesDisallowedTool {
                    agent: self.name.clone(),
                    tool,
                });
            }
        }
        Ok(())
    }

    /// Tools called by Act lines of the examples.
    pub fn example_tools(&self) -> Vec<String> {
        let mut seen = Vec::new();
        for ex in &self.examples {
            for line in &ex.transcript {
                if let Some((StepKind::Act, act)) = StepKind::parse_line(line) {
                    if let Ok(call) = parse_act_line(act.trim()) {
                        if !seen.contains(&call.tool) {
                            seen.push(call.tool);
                        }
                    }
                }
            }
        }
        seen
    }

    /// Rejects tools the registry does not know.
    pub fn check_tools(&self, registry: &ToolRegistry) -> Result<(), AgentError> {
        match self.tools.iter().find(|t| !registry.contains(t)) {
            Some(t) => Err(AgentError::UnknownToolInSpec {
                agent: self.name.clone(),
                tool: t.clone(),
            }),
            None => Ok(()),
        }
    }

    pub fn image_inputs(&self) -> usize {
        self.examples
            .first()
            .map_or(1, |e| e.inputs.iter().filter(|i| i.starts_with("image")).count().max(1))
    }
}

pub fn load_agent_spec(path: &Path, registry: &ToolRegistry) -> Result<AgentSpec, AgentError> {
    let text = std::fs::read_to_string(path).map_err(|e| AgentError::Parse {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    let spec = AgentSpec::parse(&text, &path.display().to_string())?;
    spec.check_tools(registry)?;
    Ok(spec)
}

/// Runs a nested episode when called.
pub struct AgentTool {
    info: ToolInfo,
    spec: Arc<AgentSpec>,
}

impl AgentTool {
    pub fn new(spec: Arc<AgentSpec>) -> Self {
        let mut params = vec![param("question", ParamType::Text), param("image", ParamType::Image)];
        let min_args = 2;
        if spec.image_inputs() > 1 {
            params.push(param("image2", ParamType::Image));
        }
        let description = if spec.description.is_empty() {
            format!("Runs the {} agent on a question and returns its answer.", spec.name)
        } else {
            spec.description.clone()
        };
        let signature = Signature {
            min_args,
            ..Signature::new(params, ValueTag::Text)
        };
        let info = ToolInfo {
            name: spec.name.clone(),
            description,
            inputs: "question + image".into(),
            returns: "answer".into(),
            backbone: "agent".into(),
            mode: Mode::Agent,
            signature,
        };
        Self { info, spec }
    }

    pub fn spec(&self) -> &AgentSpec {
        &self.spec
    }
}

impl Tool for AgentTool {
    fn info(&self) -> &ToolInfo {
        &self.info
    }

    fn call(&self, args: &[Value], ctx: &mut CallContext<'_>) -> Result<Value, ToolError> {
        let question = match &args[0] {
            Value::Text(s) | Value::Entity(s) => s.clone(),
            other => return Err(ToolError::new(format!("expected a question, got {}", other.tag()))),
        };
        if ctx.depth + 1 > ctx.config.max_depth {
            return Err(ToolError::new(format!(
                "agent nesting depth {} exceeded",
                ctx.config.max_depth
            )));
        }
        let images = &args[1..];
        let inputs: Vec<(String, Value)> = if images.len() == 1 {
            vec![("image".to_string(), images[0].clone())]
        } else {
            images
                .iter()
                .enumerate()
                .map(|(i, v)| (format!("image{}", i + 1), v.clone()))
                .collect()
        };
        let engine = Engine {
            registry: ctx.registry,
            backend: ctx.backend,
            config: ctx.config,
        };
        let id = format!("{}/{}", ctx.episode_id, ctx.call_index);
        let episode = engine.run(&self.spec, &question, &inputs, &id, ctx.depth + 1);
        let result = match (&episode.outcome, &episode.answer) {
            (Outcome::Finished, Some(a)) => Ok(Value::Text(a.clone())),
            (o, _) => Err(ToolError::new(format!(
                "{} ended with {}{}",
                self.spec.name,
                o.as_str(),
                episode.error.as_deref().map(|e| format!(": {e}")).unwrap_or_default()
            ))),
        };
        ctx.sub_episodes.push(episode);
        result
    }
}

/// Register `spec` as a tool; its own tools must already be registered.
pub fn register_agent_as_tool(spec: AgentSpec, registry: &mut ToolRegistry) -> Result<(), AgentError> {
    spec.check_tools(registry)?;
    let tools = spec.tools.clone();
    registry.register_agent(Arc::new(AgentTool::new(Arc::new(spec))), &tools)?;
    Ok(())
}

/// Union of the specialists' non-agent tools and all their examples.
pub fn build_naive_generic(specs: &[&AgentSpec], preamble: &str) -> AgentSpec {
    let agent_names: BTreeSet<&str> = specs.iter().map(|s| s.name.as_str()).collect();
    let mut tools: Vec<String> = Vec::new();
    for s in specs {
        for t in &s.tools {
            let is_agent = agent_names.contains(t.as_str()) || t.ends_with("Agent");
            if !is_agent && !tools.contains(t) {
                tools.push(t.clone());
            }
        }
    }
    AgentSpec {
        name: NAIVE.to_string(),
        description: "Answers any visual question with all tools in one prompt.".into(),
        preamble: preamble.to_string(),
        tools,
        examples: specs.iter().flat_map(|s| s.examples.iter().cloned()).collect(),
        max_steps: specs.iter().map(|s| s.max_steps).max().unwrap_or(DEFAULT_MAX_STEPS),
        prompt_char_budget: DEFAULT_PROMPT_CHAR_BUDGET,
    }
}

const SHIPPED: [(&str, &str); 9] = [
    ("PointQALocalAgent", include_str!("../agents/point_qa_local.json")),
    ("PointQALookTwiceAgent", include_str!("../agents/point_qa_look_twice.json")),
    ("SingleHopEncyclopedicAgent", include_str!("../agents/single_hop_encyclopedic.json")),
    ("TwoHopEncyclopedicAgent", include_str!("../agents/two_hop_encyclopedic.json")),
    ("TwoImageVQAAgent", include_str!("../agents/two_image_vqa.json")),
    ("SpatialReasoningAgent", include_str!("../agents/spatial_reasoning.json")),
    ("ComplexCountingAgent", include_str!("../agents/complex_counting.json")),
    ("OCRReasoningAgent", include_str!("../agents/ocr_reasoning.json")),
    ("QuestionDispatcherAgent", include_str!("../agents/question_dispatcher.json")),
];

pub const NAIVE_PREAMBLE: &str = include_str!("../agents/naive_preamble.txt");

/// All agent specs, immutable after load.
#[derive(Debug, Clone)]
pub struct AgentLibrary {
    pub specs: IndexMap<String, AgentSpec>,
}

impl AgentLibrary {
    pub fn shipped() -> Self {
        let specs = SHIPPED
            .iter()
            .map(|(name, text)| {
                let spec = AgentSpec::parse(text, name).expect("shipped agent specs parse");
                (spec.name.clone(), spec)
            })
            .collect();
        Self { specs }
    }

    /// Specs from a directory of `*.json` files, in file-name order.
    pub fn load_dir(dir: &Path) -> Result<Self, AgentError> {
        let io = |e: std::io::Error| AgentError::Parse {
            path: dir.display().to_string(),
            message: e.to_string(),
        };
        let mut paths: Vec<_> = std::fs::read_dir(dir)
            .map_err(io)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect();
        paths.sort();
        let mut specs = IndexMap::new();
        for p in paths {
            let text = std::fs::read_to_string(&p).map_err(io)?;
            let spec = AgentSpec::parse(&text, &p.display().to_string())?;
            specs.insert(spec.name.clone(), spec);
        }
        Ok(Self { specs })
    }

    pub fn get(&self, name: &str) -> Option<&AgentSpec> {
        self.specs.get(name)
    }

    pub fn specialists(&self) -> Vec<&AgentSpec> {
        SPECIALISTS.iter().filter_map(|n| self.get(n)).collect()
    }

    pub fn naive(&self) -> AgentSpec {
        build_naive_generic(&self.specialists(), NAIVE_PREAMBLE)
    }

    /// Caller → callee edges between agents.
    pub fn edges(&self) -> Vec<(String, String)> {
        let mut out = Vec::new();
        for s in self.specs.values() {
            for t in &s.tools {
                if self.specs.contains_key(t) {
                    out.push((s.name.clone(), t.clone()));
                }
            }
        }
        out
    }

    /// Register every agent, callees first. A leftover set means a cycle
    /// or a tool that is neither builtin nor another agent.
    pub fn register_all(&self, registry: &mut ToolRegistry) -> Result<(), AgentError> {
        let mut pending: Vec<&AgentSpec> = self.specs.values().collect();
        while !pending.is_empty() {
            let ready = pending
                .iter()
                .position(|s| s.tools.iter().all(|t| registry.contains(t)));
            match ready {
                Some(i) => {
                    let spec = pending.remove(i);
                    register_agent_as_tool(spec.clone(), registry)?;
                }
                None => {
                    let spec = pending[0];
                    let missing = spec.tools.iter().find(|t| !registry.contains(t)).unwrap();
                    if self.specs.contains_key(missing) {
                        return Err(RegistryError::CycleDetected(spec.name.clone()).into());
                    }
                    return Err(AgentError::UnknownToolInSpec {
                        agent: spec.name.clone(),
                        tool: missing.clone(),
                    });
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::build_prompt;
    use crate::registry::AllowedTools;
    use crate::tools::{builtin_registry, ToolConfig, BUILTIN_TOOLS};
    use crate::world::World;

    fn registry() -> ToolRegistry {
        let mut reg = builtin_registry(Arc::new(World::default()), &ToolConfig::default());
        AgentLibrary::shipped().register_all(&mut reg).unwrap();
        reg
    }

    fn set(items: &[&str]) -> BTreeSet<String> {
        items.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn allowlists_match_tool_table() {
        let lib = AgentLibrary::shipped();
        let rows: [(&str, &[&str]); 9] = [
            ("PointQALocalAgent", &["CropImage", "VQA", "DetectObject"]),
            ("PointQALookTwiceAgent", &["CropImage", "VQA", "Caption"]),
            ("SingleHopEncyclopedicAgent", &["GoogleLens", "WikipediaArticle", "AnswerWithContext"]),
            (
                "TwoHopEncyclopedicAgent",
                &["GoogleLens", "WikipediaArticle", "AnswerWithContext", "DecomposeQuestion", "SingleHopEncyclopedicAgent"],
            ),
            ("TwoImageVQAAgent", &["VQA"]),
            (
                "SpatialReasoningAgent",
                &["DetectObject", "CropImage", "ObjectInImage", "OCR", "BoundingBoxOverlap", "SpatialSelection"],
            ),
            ("ComplexCountingAgent", &["DetectObject", "CropImage", "ObjectInImage"]),
            ("OCRReasoningAgent", &["DetectObject", "CropImage", "OCR"]),
            ("QuestionDispatcherAgent", &SPECIALISTS),
        ];
        for (name, tools) in rows {
            assert_eq!(set(&lib.get(name).unwrap().tools.iter().map(String::as_str).collect::<Vec<_>>()), set(tools), "{name}");
        }
        assert_eq!(lib.specs.len(), 9);
    }

    #[test]
    fn prompt_tool_lines_are_the_allowlist() {
        let reg = registry();
        let lib = AgentLibrary::shipped();
        for spec in lib.specs.values() {
            let allowed = AllowedTools { registry: &reg, allowed: &spec.tools };
            let prompt = build_prompt(spec, &allowed, "q?", &["image".into()], &[]).unwrap();
            let tools_section = prompt.split("\n\nAvailable tools:\n").nth(1).unwrap();
            let names: Vec<&str> = tools_section
                .lines()
                .take_while(|l| l.starts_with("- "))
                .map(|l| l[2..].split('(').next().unwrap())
                .collect();
            assert_eq!(names, spec.tools.iter().map(String::as_str).collect::<Vec<_>>());
        }
    }

    #[test]
    fn naive_union_is_the_builtin_set() {
        let lib = AgentLibrary::shipped();
        let naive = lib.naive();
        assert_eq!(
            naive.tools.iter().cloned().collect::<BTreeSet<_>>(),
            set(&BUILTIN_TOOLS)
        );
        let total: usize = lib.specialists().iter().map(|s| s.examples.len()).sum();
        assert_eq!(naive.examples.len(), total);
        let one = lib.get("OCRReasoningAgent").unwrap();
        let single = build_naive_generic(&[one], "p");
        assert_eq!(single.tools, one.tools);
        assert_eq!(single.examples, one.examples);
    }

    #[test]
    fn specialist_prompts_are_shorter_than_naive() {
        let reg = registry();
        let lib = AgentLibrary::shipped();
        let naive = lib.naive();
        let len = |spec: &AgentSpec| {
            let allowed = AllowedTools { registry: &reg, allowed: &spec.tools };
            let mut s = spec.clone();
            s.prompt_char_budget = usize::MAX;
            build_prompt(&s, &allowed, "q?", &["image".into()], &[]).unwrap().len()
        };
        let n = len(&naive);
        for s in lib.specialists() {
            assert!(len(s) < n, "{}", s.name);
        }
    }

    #[test]
    fn load_errors() {
        let reg = registry();
        let dir = tempfile::tempdir().unwrap();
        let write = |name: &str, text: &str| {
            let p = dir.path().join(name);
            std::fs::write(&p, text).unwrap();
            p
        };
        let p = write("bad.json", "{ nope");
        assert!(matches!(load_agent_spec(&p, &reg), Err(AgentError::Parse { .. })));
        let p = write("f.json", r#"{"name": "X", "preamble": "p", "tools": ["DetectObject", "FilterObjects"]}"#);
        assert_eq!(
            load_agent_spec(&p, &reg),
            Err(AgentError::UnknownToolInSpec { agent: "X".into(), tool: "FilterObjects".into() })
        );
        let p = write(
            "e.json",
            r#"{"name": "Y", "preamble": "p", "tools": ["OCR"], "examples": [{"question": "q", "transcript": ["[Thought]: t", "[Act]: VQA('q', image)", "[Observe]: a", "[Finish]: a"]}]}"#,
        );
        assert_eq!(
            load_agent_spec(&p, &reg),
            Err(AgentError::ExampleUsesDisallowedTool { agent: "Y".into(), tool: "VQA".into() })
        );
        let sp = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("agents/spatial_reasoning.json");
        let spec = load_agent_spec(&sp, &reg).unwrap();
        assert_eq!(
            set(&spec.tools.iter().map(String::as_str).collect::<Vec<_>>()),
            set(&["DetectObject", "CropImage", "ObjectInImage", "OCR", "BoundingBoxOverlap", "SpatialSelection"])
        );
    }

    #[test]
    fn registration_errors() {
        let lib = AgentLibrary::shipped();
        let mut reg = registry();
        let again = lib.get("OCRReasoningAgent").unwrap().clone();
        assert!(matches!(
            register_agent_as_tool(again, &mut reg),
            Err(AgentError::Registry(RegistryError::NameCollision(_)))
        ));
        let mut base = builtin_registry(Arc::new(World::default()), &ToolConfig::default());
        let spec = |name: &str, tools: &[&str]| AgentSpec {
            name: name.into(),
            description: String::new(),
            preamble: "p".into(),
            tools: tools.iter().map(|s| s.to_string()).collect(),
            examples: vec![],
            max_steps: 3,
            prompt_char_budget: 1000,
        };
        let cyclic = AgentLibrary {
            specs: [spec("A", &["B"]), spec("B", &["A"])]
                .into_iter()
                .map(|s| (s.name.clone(), s))
                .collect(),
        };
        assert!(matches!(
            cyclic.register_all(&mut base),
            Err(AgentError::Registry(RegistryError::CycleDetected(_)))
        ));
        assert!(lib.edges().contains(&("TwoHopEncyclopedicAgent".into(), "SingleHopEncyclopedicAgent".into())));
    }

    #[test]
    fn shipped_examples_only_use_allowed_tools() {
        for spec in AgentLibrary::shipped().specs.values() {
            assert!(!spec.examples.is_empty() && spec.examples.len() <= 3, "{}", spec.name);
            spec.lint().unwrap();
            for ex in &spec.examples {
                let steps: Vec<crate::trace::TraceStep> = ex
                    .transcript
                    .iter()
                    .map(|l| {
                        let (k, t) = StepKind::parse_line(l).unwrap();
                        crate::trace::TraceStep::new(k, t.trim())
                    })
                    .collect();
                assert!(crate::trace::is_well_formed(&steps), "{}: {:?}", spec.name, ex.question);
            }
        }
    }

    #[test]
    fn two_image_agent_takes_two_images() {
        let reg = registry();
        let info = reg.get("TwoImageVQAAgent").unwrap().info().clone();
        assert_eq!(info.signature.params.len(), 3);
        assert_eq!(info.signature.min_args, 2);
        assert_eq!(reg.get("OCRReasoningAgent").unwrap().info().signature.params.len(), 2);
    }
}
