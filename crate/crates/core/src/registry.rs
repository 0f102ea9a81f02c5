//! Tool signatures and the name → handler registry.

use std::collections::HashMap;
use std::sync::Arc;

use indexmap::IndexMap;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::Backend;
use crate::engine::EngineConfig;
use crate::trace::Episode;
use crate::value::{Value, ValueTag};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamType {
    /// An image or a list of images (mapped over).
    Image,
    Text,
    /// Article or plain text.
    Context,
    Box,
    Boxes,
    BoxOrBoxes,
}

impl ParamType {
    pub fn accepts(self, tag: ValueTag) -> bool {
        use ValueTag as T;
        match self {
            ParamType::Image => matches!(tag, T::ImageRef | T::ImageList),
            ParamType::Text => matches!(tag, T::Text | T::Entity | T::Number),
            ParamType::Context => matches!(tag, T::Text | T::Entity | T::Article),
            ParamType::Box => tag == T::Box,
            ParamType::Boxes => matches!(tag, T::BoxList | T::Box),
            ParamType::BoxOrBoxes => matches!(tag, T::Box | T::BoxList),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ParamType::Image => "image",
            ParamType::Text => "text",
            ParamType::Context => "context",
            ParamType::Box => "box",
            ParamType::Boxes => "boxes",
            ParamType::BoxOrBoxes => "box or boxes",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Param {
    pub name: String,
    #[serde(rename = "type")]
    pub ty: ParamType,
}

pub fn param(name: &str, ty: ParamType) -> Param {
    Param {
        name: name.to_string(),
        ty,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Signature {
    pub params: Vec<Param>,
    /// Trailing parameters past this count are optional.
    pub min_args: usize,
    pub returns: ValueTag,
}

impl Signature {
    pub fn new(params: Vec<Param>, returns: ValueTag) -> Self {
        let min_args = params.len();
        Self {
            params,
            min_args,
            returns,
        }
    }

    pub fn max_args(&self) -> usize {
        self.params.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Oracle,
    LlmBacked,
    LiveHttp,
    Agent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolInfo {
    pub name: String,
    pub description: String,
    /// Input column of the tool table.
    pub inputs: String,
    /// Output column of the tool table.
    pub returns: String,
    pub backbone: String,
    pub mode: Mode,
    pub signature: Signature,
}

impl ToolInfo {
    /// The line shown in prompts.
    pub fn prompt_line(&self) -> String {
        let params = self
            .signature
            .params
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let opt = if i >= self.signature.min_args { "?" } else { "" };
                format!("{}{opt}: {}", p.name, p.ty.as_str())
            })
            .collect::<Vec<_>>()
            .join(", ");
        format!(
            "- {}({params}) -> {}: {}",
            self.name, self.returns, self.description
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{0}")]
pub struct ToolError(pub String);

impl ToolError {
    pub fn new(msg: impl Into<String>) -> Self {
        ToolError(msg.into())
    }
}

/// Everything a handler may need besides its arguments.
pub struct CallContext<'a> {
    pub registry: &'a ToolRegistry,
    pub backend: &'a dyn Backend,
    pub config: &'a EngineConfig,
    pub depth: usize,
    pub episode_id: &'a str,
    pub call_index: u32,
    /// Nested episodes produced by this call.
    pub sub_episodes: Vec<Episode>,
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= *b as u64;
        h = h.wrapping_mul(0x100_0000_01b3);
    }
    h
}

pub(crate) fn hash_str(s: &str) -> u64 {
    fnv1a(s.as_bytes())
}

pub(crate) fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Noise stream for one call: a function of (seed, episode id, call index) only.
pub fn noise_rng(seed: u64, episode_id: &str, call_index: u32) -> ChaCha8Rng {
    let s = splitmix(seed ^ splitmix(hash_str(episode_id) ^ splitmix(call_index as u64)));
    ChaCha8Rng::seed_from_u64(s)
}

impl CallContext<'_> {
    pub fn rng(&self) -> ChaCha8Rng {
        noise_rng(self.config.seed, self.episode_id, self.call_index)
    }
}

pub trait Tool: Send + Sync {
    fn info(&self) -> &ToolInfo;
    fn call(&self, args: &[Value], ctx: &mut CallContext<'_>) -> Result<Value, ToolError>;
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RegistryError {
    #[error("a tool named {0} is already registered")]
    NameCollision(String),
    #[error("registering {0} would create a cycle")]
    CycleDetected(String),
    #[error("tool {0} is not registered")]
    Unknown(String),
}

/// Read-only view used by the validator.
pub trait ToolLookup {
    fn lookup(&self, name: &str) -> Option<&ToolInfo>;
}

#[derive(Clone, Default)]
pub struct ToolRegistry {
    tools: IndexMap<String, Arc<dyn Tool>>,
    /// Agent tool → tools it may call.
    edges: HashMap<String, Vec<String>>,
}

impl std::fmt::Debug for ToolRegistry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_list().entries(self.tools.keys()).finish()
    }
}

impl ToolRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, tool: Arc<dyn Tool>) -> Result<(), RegistryError> {
        let name = tool.info().name.clone();
        if self.tools.contains_key(&name) {
            return Err(RegistryError::NameCollision(name));
        }
        self.tools.insert(name, tool);
        Ok(())
    }

    /// Register an agent tool whose episodes may call `callees`.
    pub fn register_agent(
        &mut self,
        tool: Arc<dyn Tool>,
        callees: &[String],
    ) -> Result<(), RegistryError> {
        let name = tool.info().name.clone();
        if self.tools.contains_key(&name) {
            return Err(RegistryError::NameCollision(name));
        }
        if callees.contains(&name) || callees.iter().any(|c| self.reaches(c, &name)) {
            return Err(RegistryError::CycleDetected(name));
        }
        self.edges.insert(name.clone(), callees.to_vec());
        self.tools.insert(name, tool);
        Ok(())
    }

    fn reaches(&self, from: &str, target: &str) -> bool {
        let mut stack = vec![from.to_string()];
        let mut seen = std::collections::HashSet::new();
        while let Some(n) = stack.pop() {
            if n == target {
                return true;
            }
            if seen.insert(n.clone()) {
                if let Some(next) = self.edges.get(&n) {
                    stack.extend(next.iter().cloned());
                }
            }
        }
        false
    }

    pub fn get(&self, name: &str) -> Option<&Arc<dyn Tool>> {
        self.tools.get(name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.tools.contains_key(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.tools.keys().map(String::as_str)
    }

    pub fn infos(&self) -> impl Iterator<Item = &ToolInfo> {
        self.tools.values().map(|t| t.info())
    }

    pub fn is_agent(&self, name: &str) -> bool {
        self.edges.contains_key(name)
    }

    /// JSON list of {name, description, params, returns, mode, ...}.
    pub fn dump(&self) -> serde_json::Value {
        serde_json::Value::Array(
            self.infos()
                .map(|i| {
                    serde_json::json!({
                        "name": i.name,
                        "description": i.description,
                        "inputs": i.inputs,
                        "params": i.signature.params,
                        "min_args": i.signature.min_args,
                        "returns": i.returns,
                        "return_tag": i.signature.returns,
                        "backbone": i.backbone,
                        "mode": i.mode,
                    })
                })
                .collect(),
        )
    }
}

impl ToolLookup for ToolRegistry {
    fn lookup(&self, name: &str) -> Option<&ToolInfo> {
        self.get(name).map(|t| t.info())
    }
}

/// A registry restricted to an agent's allowlist.
pub struct AllowedTools<'a> {
    pub registry: &'a ToolRegistry,
    pub allowed: &'a [String],
}

impl ToolLookup for AllowedTools<'_> {
    fn lookup(&self, name: &str) -> Option<&ToolInfo> {
        if self.allowed.iter().any(|a| a == name) {
            self.registry.lookup(name)
        } else {
            None
        }
    }
}
