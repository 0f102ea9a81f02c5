//! A small synthetic encyclopedia with linked entities.

use indexmap::IndexMap;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::value::Article;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntityKind {
    Landmark,
    Person,
    City,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Entity {
    pub id: String,
    pub name: String,
    pub category: EntityKind,
    /// Object class for landmarks, empty otherwise.
    #[serde(default)]
    pub kind: String,
    pub article_text: String,
    pub facts: IndexMap<String, String>,
    #[serde(default)]
    pub links: IndexMap<String, String>,
}

impl Entity {
    pub fn article(&self) -> Article {
        Article {
            entity_id: self.id.clone(),
            title: self.name.clone(),
            text: self.article_text.clone(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct KnowledgeBase {
    pub entities: IndexMap<String, Entity>,
}

/// Lowercase and collapse whitespace.
pub fn normalize_entity_name(name: &str) -> String {
    name.split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase()
}

/// Question keywords that select a fact.
pub fn fact_keywords(key: &str) -> &'static [&'static str] {
    match key {
        "year_built" => &["year", "built", "constructed"],
        "designer" => &["designed", "designer", "architect"],
        "location" => &["city", "located", "where"],
        "dedicated" => &["dedicated", "consecrated"],
        "height" => &["tall", "height", "high"],
        "birth_year" => &["year", "born"],
        "birthplace" => &["city", "born", "birthplace"],
        "nationality" => &["nationality", "citizen"],
        "population" => &["population", "inhabitants", "people"],
        "country" => &["country", "nation"],
        "founded" => &["year", "founded", "established"],
        _ => &[],
    }
}

pub fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_ascii_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect()
}

/// Fact key with the highest keyword overlap; ties go to the earlier fact.
pub fn best_fact<'a>(question: &str, facts: impl IntoIterator<Item = &'a String>) -> Option<&'a str> {
    let tokens = tokenize(question);
    let mut best: Option<(&str, usize)> = None;
    for key in facts {
        let score = fact_keywords(key)
            .iter()
            .filter(|k| tokens.iter().any(|t| t == *k))
            .count();
        if score > 0 && best.is_none_or(|(_, s)| score > s) {
            best = Some((key.as_str(), score));
        }
    }
    best.map(|(k, _)| k)
}

const CITY_STEMS: &[&str] = &[
    "Velora", "Castamar", "Orinth", "Palvessa", "Miradel", "Tosca Verde", "Innsvald", "Karabel",
    "Lusendor", "Quellmont", "Sarvano", "Ebrington", "Nortessa", "Dunhollow",
];
const GIVEN: &[&str] = &[
    "Amadeo", "Beatriz", "Corin", "Delphine", "Emil", "Farida", "Gaspard", "Helena", "Isidro",
    "Josefa", "Konrad", "Lucia", "Matteo", "Noemi", "Osric", "Paloma",
];
const FAMILY: &[&str] = &[
    "Arvelo", "Brandt", "Castellan", "Duvane", "Estrada", "Fennimore", "Galvez", "Holmqvist",
    "Iturbe", "Jovanic", "Kessler", "Lorca", "Moravec", "Nilsen", "Orsini", "Prado",
];
const COUNTRIES: &[&str] = &["Spain", "Portugal", "Italy", "France", "Norway", "Chile", "Austria"];
const NATIONALITIES: &[&str] = &[
    "Spanish", "Portuguese", "Italian", "French", "Norwegian", "Chilean", "Austrian", "Dutch",
];
const MONTHS: &[&str] = &[
    "January", "February", "March", "April", "May", "June", "July", "August", "September",
    "October", "November", "December",
];
const LANDMARK_STEMS: &[&str] = &[
    "San Aurelio", "Greywater", "Saint Odile", "Harrowgate", "Monteluce", "Alder Point",
    "Kingsreach", "Villa Serra", "Eastbrook", "Rosenhall", "Marlow Bay", "Cielo Alto",
];

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}

impl KnowledgeBase {
    pub fn get(&self, id: &str) -> Option<&Entity> {
        self.entities.get(id)
    }

    pub fn lookup(&self, name: &str) -> Option<&Entity> {
        let key = normalize_entity_name(name);
        self.entities
            .values()
            .find(|e| normalize_entity_name(&e.name) == key)
    }

    pub fn landmarks(&self) -> Vec<&Entity> {
        self.entities
            .values()
            .filter(|e| e.category == EntityKind::Landmark)
            .collect()
    }

    fn insert(&mut self, e: Entity) {
        self.entities.insert(e.id.clone(), e);
    }

    /// Deterministic KB: cities, people and landmarks linked by designer and
    /// location facts, plus the fixed Bayombong Cathedral entry.
    pub fn generate(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6b62_6b62);
        let mut kb = KnowledgeBase::default();

        let mut city_ids = Vec::new();
        let mut stems = CITY_STEMS.to_vec();
        stems.shuffle(&mut rng);
        for stem in stems.iter().take(10) {
            let population = rng.gen_range(20..900) * 1000 + rng.gen_range(0..1000);
            let country = COUNTRIES.choose(&mut rng).unwrap();
            let founded = rng.gen_range(900..1700);
            let id = format!("city:{}", stem.to_lowercase().replace(' ', "_"));
            kb.insert(city(&id, stem, population, country, founded));
            city_ids.push(id);
        }
        kb.insert(city("city:bayombong", "Bayombong", 67_000, "Philippines", 1739));
        city_ids.push("city:bayombong".into());

        let mut person_ids = Vec::new();
        let mut used = std::collections::BTreeSet::new();
        while person_ids.len() < 14 {
            let name = format!(
                "{} {}",
                GIVEN.choose(&mut rng).unwrap(),
                FAMILY.choose(&mut rng).unwrap()
            );
            if !used.insert(name.clone()) {
                continue;
            }
            let birth_year = rng.gen_range(1600..1900);
            let nationality = NATIONALITIES.choose(&mut rng).unwrap();
            let birthplace_id = city_ids.choose(&mut rng).unwrap().clone();
            let birthplace = kb.entities[&birthplace_id].name.clone();
            let id = format!("person:{}", name.to_lowercase().replace(' ', "_"));
            let mut facts = IndexMap::new();
            facts.insert("birth_year".into(), birth_year.to_string());
            facts.insert("birthplace".into(), birthplace.clone());
            facts.insert("nationality".into(), nationality.to_string());
            let mut links = IndexMap::new();
            links.insert("birthplace".into(), birthplace_id);
            kb.insert(Entity {
                id: id.clone(),
                name: name.clone(),
                category: EntityKind::Person,
                kind: String::new(),
                article_text: format!(
                    "{name} was a {nationality} architect. {name} was born in {birthplace} in {birth_year}."
                ),
                facts,
                links,
            });
            person_ids.push(id);
        }

        let kinds = super::vocab::landmark_classes();
        let mut stems = LANDMARK_STEMS.to_vec();
        stems.shuffle(&mut rng);
        for (i, stem) in stems.iter().enumerate() {
            for kind in kinds.iter().skip(i % 2).step_by(2) {
                let designer = person_ids.choose(&mut rng).unwrap().clone();
                let location = city_ids.choose(&mut rng).unwrap().clone();
                let year = rng.gen_range(1500..1950);
                let date = format!(
                    "{} {}, {}",
                    MONTHS.choose(&mut rng).unwrap(),
                    rng.gen_range(1..=28),
                    year + rng.gen_range(0..5)
                );
                let height = format!("{} meters", rng.gen_range(8..160));
                let name = format!("{stem} {}", capitalize(kind));
                let id = format!("landmark:{}", name.to_lowercase().replace(' ', "_"));
                kb.insert(landmark(&kb, &id, &name, kind, &designer, &location, year, &date, &height));
            }
        }

        let designer = person_ids[0].clone();
        kb.insert(landmark(
            &kb,
            "landmark:bayombong_cathedral",
            "Bayombong Cathedral",
            "cathedral",
            &designer,
            "city:bayombong",
            1739,
            "September 8, 1739",
            "32 meters",
        ));
        kb
    }
}

fn city(id: &str, name: &str, population: u32, country: &str, founded: u32) -> Entity {
    let mut facts = IndexMap::new();
    facts.insert("population".into(), population.to_string());
    facts.insert("country".into(), country.to_string());
    facts.insert("founded".into(), founded.to_string());
    Entity {
        id: id.into(),
        name: name.into(),
        category: EntityKind::City,
        kind: String::new(),
        article_text: format!(
            "{name} is a city in {country}. It was founded in {founded}. It has a population of {population}."
        ),
        facts,
        links: IndexMap::new(),
    }
}

#[allow(clippy::too_many_arguments)]
fn landmark(
    kb: &KnowledgeBase,
    id: &str,
    name: &str,
    kind: &str,
    designer_id: &str,
    location_id: &str,
    year: u32,
    dedicated: &str,
    height: &str,
) -> Entity {
    let designer = kb.entities[designer_id].name.clone();
    let location = kb.entities[location_id].name.clone();
    let mut facts = IndexMap::new();
    facts.insert("year_built".into(), year.to_string());
    facts.insert("designer".into(), designer.clone());
    facts.insert("location".into(), location.clone());
    facts.insert("dedicated".into(), dedicated.to_string());
    facts.insert("height".into(), height.to_string());
    let mut links = IndexMap::new();
    links.insert("designer".into(), designer_id.to_string());
    links.insert("location".into(), location_id.to_string());
    Entity {
        id: id.into(),
        name: name.into(),
        category: EntityKind::Landmark,
        kind: kind.into(),
        article_text: format!(
            "{name} is a {kind} located in {location}. It was designed by {designer} and built in {year}. \
             The {kind} was dedicated on {dedicated}. It stands {height} tall."
        ),
        facts,
        links,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closure_and_links() {
        let kb = KnowledgeBase::generate(3);
        for e in kb.entities.values() {
            for answer in e.facts.values() {
                assert!(e.article_text.contains(answer.as_str()), "{} lacks {answer}", e.name);
            }
            for target in e.links.values() {
                assert!(kb.get(target).is_some());
            }
        }
        assert!(kb.landmarks().len() >= 25);
    }

    #[test]
    fn names_are_unique_after_normalization() {
        let kb = KnowledgeBase::generate(11);
        let names: std::collections::BTreeSet<_> =
            kb.entities.values().map(|e| normalize_entity_name(&e.name)).collect();
        assert_eq!(names.len(), kb.entities.len());
    }

    #[test]
    fn bayombong() {
        let kb = KnowledgeBase::generate(0);
        let e = kb.lookup("bayombong   CATHEDRAL").unwrap();
        assert!(e.article_text.contains("September 8, 1739"));
        assert_eq!(
            best_fact("When was this cathedral dedicated to st. dominic de guzman?", e.facts.keys()),
            Some("dedicated")
        );
    }

    #[test]
    fn keyword_overlap_selects_highest() {
        let facts: Vec<String> = ["birth_year", "birthplace", "nationality"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        assert_eq!(best_fact("in what year was X born?", &facts), Some("birth_year"));
        assert_eq!(best_fact("in what city was X born?", &facts), Some("birthplace"));
        assert_eq!(best_fact("what is the nationality of X?", &facts), Some("nationality"));
        assert_eq!(best_fact("what is the weather?", &facts), None);
    }
}
