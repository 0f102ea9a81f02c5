//! Closed vocabulary of the synthetic world.

pub struct ClassInfo {
    pub name: &'static str,
    pub plural: &'static str,
    pub synonyms: &'static [&'static str],
    /// Objects of this class may carry printed text.
    pub text_bearing: bool,
    /// Objects of this class stand for a knowledge-base entity.
    pub landmark: bool,
}

const fn class(name: &'static str, plural: &'static str) -> ClassInfo {
    ClassInfo {
        name,
        plural,
        synonyms: &[],
        text_bearing: false,
        landmark: false,
    }
}

const fn text_class(name: &'static str, plural: &'static str) -> ClassInfo {
    ClassInfo {
        text_bearing: true,
        ..class(name, plural)
    }
}

const fn landmark(name: &'static str, plural: &'static str) -> ClassInfo {
    ClassInfo {
        landmark: true,
        ..class(name, plural)
    }
}

pub const CLASSES: &[ClassInfo] = &[
    ClassInfo {
        synonyms: &["automobile"],
        ..class("car", "cars")
    },
    class("truck", "trucks"),
    class("bus", "buses"),
    ClassInfo {
        synonyms: &["bike"],
        ..class("bicycle", "bicycles")
    },
    class("cup", "cups"),
    class("plate", "plates"),
    class("chair", "chairs"),
    ClassInfo {
        synonyms: &["couch"],
        ..class("sofa", "sofas")
    },
    class("pillow", "pillows"),
    class("lamp", "lamps"),
    class("clock", "clocks"),
    class("book", "books"),
    class("dog", "dogs"),
    class("cat", "cats"),
    class("bird", "birds"),
    class("tree", "trees"),
    class("mug", "mugs"),
    class("laptop", "laptops"),
    ClassInfo {
        synonyms: &["cellphone"],
        ..class("phone", "phones")
    },
    class("vase", "vases"),
    class("bench", "benches"),
    class("umbrella", "umbrellas"),
    class("kite", "kites"),
    class("apple", "apples"),
    text_class("sign", "signs"),
    text_class("license plate", "license plates"),
    text_class("bottle", "bottles"),
    text_class("jersey", "jerseys"),
    text_class("storefront", "storefronts"),
    landmark("cathedral", "cathedrals"),
    landmark("tower", "towers"),
    landmark("bridge", "bridges"),
    landmark("statue", "statues"),
    landmark("museum", "museums"),
];

pub const COLORS: &[&str] = &[
    "red", "blue", "green", "yellow", "white", "black", "brown", "gray", "orange", "purple",
];

pub const ATTRIBUTES: &[(&str, &[&str])] = &[
    ("material", &["wood", "metal", "plastic", "glass", "stone", "fabric"]),
    ("size", &["small", "medium", "large"]),
    ("shape", &["round", "square", "oval", "rectangular"]),
    ("pattern", &["plain", "striped", "dotted", "checkered"]),
    ("condition", &["new", "old", "worn", "broken"]),
    ("texture", &["smooth", "rough", "soft"]),
    ("finish", &["matte", "glossy"]),
    ("age", &["modern", "vintage", "antique"]),
];

pub const SPATIAL_RELATIONS: &[&str] = &[
    "leftmost",
    "rightmost",
    "topmost",
    "bottommost",
    "largest",
    "smallest",
];

pub const ILLEGIBLE: &str = "cannot answer - the image quality is too poor";

pub fn class_info(name: &str) -> Option<&'static ClassInfo> {
    CLASSES.iter().find(|c| c.name == name)
}

/// Canonical class for a name, plural or synonym.
pub fn canonical_class(word: &str) -> Option<&'static str> {
    let word = word.trim();
    CLASSES
        .iter()
        .find(|c| c.name == word || c.plural == word || c.synonyms.contains(&word))
        .map(|c| c.name)
}

pub fn plural(class: &str) -> String {
    class_info(class).map_or_else(|| format!("{class}s"), |c| c.plural.to_string())
}

pub fn is_color(word: &str) -> bool {
    COLORS.contains(&word)
}

/// "a" or "an" for the following word.
pub fn article_for(word: &str) -> &'static str {
    match word.chars().next() {
        Some('a' | 'e' | 'i' | 'o' | 'u') => "an",
        _ => "a",
    }
}

/// Classes used as filler objects (no landmarks, no text-bearing classes).
pub fn filler_classes() -> Vec<&'static str> {
    CLASSES
        .iter()
        .filter(|c| !c.landmark && !c.text_bearing)
        .map(|c| c.name)
        .collect()
}

pub fn text_classes() -> Vec<&'static str> {
    CLASSES
        .iter()
        .filter(|c| c.text_bearing)
        .map(|c| c.name)
        .collect()
}

pub fn landmark_classes() -> Vec<&'static str> {
    CLASSES.iter().filter(|c| c.landmark).map(|c| c.name).collect()
}

/// Matches `class` against a query word (name, plural or synonym).
pub fn class_matches(class: &str, synonyms: &[String], query: &str) -> bool {
    let query = query.trim();
    class == query
        || synonyms.iter().any(|s| s == query)
        || canonical_class(query) == Some(class)
}
