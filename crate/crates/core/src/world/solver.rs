//! Ground-truth visual question answering over a single scene.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use regex::Regex;

use super::oracle::evaluate;
use super::questions::parse_question;
use super::scene::Scene;
use super::vocab::{self, COLORS};

fn free_forms() -> &'static [(Regex, &'static str)] {
    static CELL: OnceLock<Vec<(Regex, &'static str)>> = OnceLock::new();
    CELL.get_or_init(|| {
        let mut classes: Vec<&str> = vocab::CLASSES
            .iter()
            .flat_map(|c| std::iter::once(c.name).chain(c.synonyms.iter().copied()))
            .collect();
        classes.sort_by_key(|c| std::cmp::Reverse(c.len()));
        let class = classes.join("|");
        let color = COLORS.join("|");
        [
            (format!(r"^what colou?r is the (?P<class>{class})\?$"), "vq_color_of"),
            (
                format!(r"^is there an? (?P<color>{color}) (?P<class>{class})( in the image)?\?$"),
                "vq_is_there",
            ),
            (format!(r"^is there an? (?P<class>{class})( in the image)?\?$"), "vq_is_there_class"),
        ]
        .into_iter()
        .map(|(p, id)| (Regex::new(&p).unwrap(), id))
        .collect()
    })
}

/// Answer `question` from the scene alone, or `None` when the scene cannot
/// answer it (including encyclopedic questions).
pub fn answer_visual_question(scene: &Scene, question: &str) -> Option<String> {
    if let Some(parsed) = parse_question(question) {
        return evaluate(parsed.template.id, &parsed.params, &[scene], None);
    }
    let q = question.trim().to_lowercase();
    for (re, id) in free_forms() {
        if let Some(caps) = re.captures(&q) {
            let mut params = BTreeMap::new();
            for name in ["class", "color"] {
                if let Some(m) = caps.name(name) {
                    params.insert(name.to_string(), m.as_str().to_string());
                }
            }
            return evaluate(id, &params, &[scene], None);
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::value::Box2D;
    use crate::world::SceneObject;

    fn scene() -> Scene {
        let mut s = Scene::empty("t", 640, 480);
        s.objects.push(SceneObject::new(0, "car", "red", Box2D::new(0, 0, 40, 40)));
        s.objects.push(SceneObject::new(1, "car", "red", Box2D::new(300, 0, 40, 40)));
        s.objects.push(SceneObject::new(2, "cup", "blue", Box2D::new(0, 300, 40, 40)));
        s
    }

    #[test]
    fn free_form_questions() {
        let s = scene();
        assert_eq!(answer_visual_question(&s, "What color is the car?").as_deref(), Some("red"));
        assert_eq!(answer_visual_question(&s, "is there a blue cup?").as_deref(), Some("yes"));
        assert_eq!(answer_visual_question(&s, "is there an orange cup?").as_deref(), Some("no"));
        assert_eq!(answer_visual_question(&s, "is there an automobile?").as_deref(), Some("yes"));
    }

    #[test]
    fn counting_on_crop() {
        let s = scene();
        assert_eq!(answer_visual_question(&s, "how many cars are there?").as_deref(), Some("2"));
        let crop = s.crop(&Box2D::new(0, 0, 100, 100)).unwrap();
        assert_eq!(answer_visual_question(&crop, "how many cars are there?").as_deref(), Some("1"));
    }

    #[test]
    fn unanswerable() {
        let s = scene();
        assert_eq!(answer_visual_question(&s, "what color is this?"), None);
        assert_eq!(answer_visual_question(&s, "who designed this tower?"), None);
        assert_eq!(answer_visual_question(&s, "why?"), None);
    }
}
