//! Suites of generated items and their on-disk form.
//!
//! Layout: `manifest.jsonl` (one [`QaItem`] per line), `kb.json`, and
//! `scenes/{id}.json`. Scene references in items are relative to the
//! manifest's directory.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Serialize;

use super::kb::KnowledgeBase;
use super::questions::{generate_question, QaItem, QuestionConfig};
use super::scene::{generate_scene, Scene, SceneConfig};
use super::{QuestionType, WorldError};

#[derive(Debug, Clone)]
pub struct SuiteConfig {
    pub seed: u64,
    pub per_type: usize,
    pub types: Vec<QuestionType>,
    pub scene: SceneConfig,
    pub question: QuestionConfig,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            per_type: 50,
            types: QuestionType::ALL.to_vec(),
            scene: SceneConfig::default(),
            question: QuestionConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct World {
    pub items: Vec<QaItem>,
    pub scenes: HashMap<String, Arc<Scene>>,
    pub kb: KnowledgeBase,
    /// Two-hop question text → (first question, second question).
    pub decompositions: HashMap<String, (String, String)>,
}

fn mix(a: u64, b: u64) -> u64 {
    let mut z = a ^ b.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

const ATTEMPTS: u64 = 64;

pub fn generate_suite(config: &SuiteConfig) -> Result<World, WorldError> {
    let kb = KnowledgeBase::generate(config.seed);
    let mut world = World {
        kb,
        ..World::default()
    };
    for (t, qtype) in config.types.iter().enumerate() {
        let scene_config = SceneConfig {
            required: vec![*qtype],
            ..config.scene.clone()
        };
        for i in 0..config.per_type {
            let id = format!("{}-{i:03}", qtype.as_str());
            let base = mix(config.seed, ((t as u64) << 32) | i as u64);
            let mut last = WorldError::UnsupportedType(*qtype);
            let mut done = false;
            for attempt in 0..ATTEMPTS {
                let seed = mix(base, attempt);
                let scenes = (0..qtype.image_count() as u64)
                    .map(|k| generate_scene(mix(seed, k + 1), &scene_config, &world.kb))
                    .collect::<Result<Vec<_>, _>>()?;
                let refs: Vec<String> = scenes.iter().map(|s| format!("scenes/{}.json", s.id)).collect();
                let borrowed: Vec<&Scene> = scenes.iter().collect();
                match generate_question(&id, &borrowed, &refs, *qtype, seed, &world.kb, &config.question) {
                    Ok(item) => {
                        for (r, s) in refs.iter().zip(scenes) {
                            world.scenes.insert(r.clone(), Arc::new(s));
                        }
                        world.push(item);
                        done = true;
                        break;
                    }
                    Err(e) => last = e,
                }
            }
            if !done {
                return Err(last);
            }
        }
    }
    Ok(world)
}

fn io(path: &Path, e: impl std::fmt::Display) -> WorldError {
    WorldError::Io(format!("{}: {e}", path.display()))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), WorldError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| io(path, e))?;
    fs::write(path, text + "\n").map_err(|e| io(path, e))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, WorldError> {
    let text = fs::read_to_string(path).map_err(|e| io(path, e))?;
    serde_json::from_str(&text).map_err(|e| WorldError::Parse {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

impl World {
    pub fn push(&mut self, item: QaItem) {
        if let Some(d) = &item.metadata.decomposition {
            self.decompositions.insert(item.question.clone(), d.clone());
        }
        self.items.push(item);
    }

    pub fn scenes_for(&self, item: &QaItem) -> Option<Vec<Arc<Scene>>> {
        item.scenes.iter().map(|r| self.scenes.get(r).cloned()).collect()
    }

    /// Write the suite under `dir`; returns the manifest path.
    pub fn save(&self, dir: &Path) -> Result<PathBuf, WorldError> {
        fs::create_dir_all(dir.join("scenes")).map_err(|e| io(dir, e))?;
        // sorted for byte-stable output
        let scenes: BTreeMap<&String, &Arc<Scene>> = self.scenes.iter().collect();
        for (rel, scene) in scenes {
            write_json(&dir.join(rel), scene.as_ref())?;
        }
        write_json(&dir.join("kb.json"), &self.kb)?;
        let mut lines = String::new();
        for item in &self.items {
            lines.push_str(&serde_json::to_string(item).map_err(|e| io(dir, e))?);
            lines.push('\n');
        }
        let manifest = dir.join("manifest.jsonl");
        fs::write(&manifest, lines).map_err(|e| io(&manifest, e))?;
        Ok(manifest)
    }

    /// Load a manifest with its scenes and the `kb.json` beside it (an
    /// empty knowledge base if absent).
    pub fn load(manifest: &Path) -> Result<World, WorldError> {
        let dir = manifest.parent().unwrap_or(Path::new("."));
        let text = fs::read_to_string(manifest).map_err(|e| io(manifest, e))?;
        let kb_path = dir.join("kb.json");
        let kb = if kb_path.exists() {
            read_json(&kb_path)?
        } else {
            KnowledgeBase::default()
        };
        let mut world = World {
            kb,
            ..World::default()
        };
        for (n, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let item: QaItem = serde_json::from_str(line).map_err(|e| WorldError::Parse {
                path: format!("{}:{}", manifest.display(), n + 1),
                message: e.to_string(),
            })?;
            for r in &item.scenes {
                if !world.scenes.contains_key(r) {
                    let scene: Scene = read_json(&dir.join(r))?;
                    world.scenes.insert(r.clone(), Arc::new(scene));
                }
            }
            world.push(item);
        }
        Ok(world)
    }

    pub fn items_of(&self, qtype: QuestionType) -> impl Iterator<Item = &QaItem> {
        self.items.iter().filter(move |i| i.qtype == qtype)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::oracle_answer;

    fn small() -> SuiteConfig {
        SuiteConfig {
            seed: 9,
            per_type: 6,
            ..SuiteConfig::default()
        }
    }

    #[test]
    fn gold_agrees_with_oracle() {
        let world = generate_suite(&small()).unwrap();
        assert_eq!(world.items.len(), 48);
        for item in &world.items {
            let scenes = world.scenes_for(item).unwrap();
            let refs: Vec<&Scene> = scenes.iter().map(|s| s.as_ref()).collect();
            assert_eq!(item.primary_gold(), oracle_answer(item, &refs, &world.kb), "{}", item.id);
            assert_eq!(item.metric, item.qtype.metric());
        }
    }

    #[test]
    fn save_load_round_trip_is_byte_stable() {
        let world = generate_suite(&small()).unwrap();
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let ma = world.save(a.path()).unwrap();
        generate_suite(&small()).unwrap().save(b.path()).unwrap();
        let read = |d: &Path| fs::read(d.join("manifest.jsonl")).unwrap();
        assert_eq!(read(a.path()), read(b.path()));
        let loaded = World::load(&ma).unwrap();
        assert_eq!(loaded.items, world.items);
        assert_eq!(loaded.kb, world.kb);
        assert_eq!(loaded.decompositions, world.decompositions);
    }

    #[test]
    fn vqa_references_hold_gold() {
        let world = generate_suite(&small()).unwrap();
        for item in world.items_of(QuestionType::OcrReasoning) {
            assert_eq!(item.gold.len(), 10);
            let gold = item.primary_gold();
            assert!(item.gold.iter().filter(|g| *g == gold).count() >= 3);
        }
    }
}
