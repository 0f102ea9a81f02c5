//! A stateless scripted orchestrator that plans from the prompt alone.
//!
//! It reads the available tools, the current question and the steps taken so
//! far out of the prompt, and emits the next step of a fixed plan for the
//! question's type. It is the "perfect tool user" used to check that agents,
//! tools and scoring fit together.

use std::sync::OnceLock;

use regex::Regex;

use super::{Backend, BackendError, Capabilities};
use crate::actlang::{render_call, Arg, ToolCall};
use crate::value::Box2D;
use crate::world::vocab::{self, ILLEGIBLE};
use crate::world::{parse_question, ParsedQuestion, QuestionType};

/// What the planner sees of a prompt.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PromptView {
    pub agent: String,
    pub tools: Vec<String>,
    pub question: String,
    pub inputs: Vec<String>,
    /// One entry per executed Act.
    pub observations: Vec<String>,
}

impl PromptView {
    pub fn parse(prompt: &str) -> PromptView {
        let agent = prompt
            .strip_prefix("You are ")
            .and_then(|r| r.split(|c: char| !c.is_alphanumeric()).next())
            .unwrap_or_default()
            .to_string();
        let mut tools = Vec::new();
        if let Some(section) = prompt.split("Available tools:\n").nth(1) {
            for line in section.lines() {
                let Some(rest) = line.strip_prefix("- ") else { break };
                if let Some(name) = rest.split('(').next() {
                    tools.push(name.to_string());
                }
            }
        }
        let mut view = PromptView {
            agent,
            tools,
            ..Default::default()
        };
        let Some(start) = prompt.rfind("[Question]: ") else {
            return view;
        };
        let tail = &prompt[start..];
        let mut current: Option<String> = None;
        for line in tail.lines() {
            if let Some(q) = line.strip_prefix("[Question]: ") {
                view.question = q.to_string();
            } else if let Some(i) = line.strip_prefix("[Inputs]: ") {
                view.inputs = i.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect();
            } else if let Some(o) = line.strip_prefix("[Observe]: ") {
                if let Some(prev) = current.take() {
                    view.observations.push(prev);
                }
                current = Some(o.to_string());
            } else if line.starts_with('[') {
                if let Some(prev) = current.take() {
                    view.observations.push(prev);
                }
            } else if let Some(prev) = current.as_mut() {
                prev.push('\n');
                prev.push_str(line);
            }
        }
        view.observations.extend(current);
        view
    }

    fn has(&self, tool: &str) -> bool {
        self.tools.iter().any(|t| t == tool)
    }

    fn image(&self, i: usize) -> String {
        self.inputs
            .get(i)
            .or(self.inputs.first())
            .cloned()
            .unwrap_or_else(|| "image".to_string())
    }
}

/// The planner's next move.
#[derive(Debug, Clone, PartialEq)]
pub enum Step {
    Act(String, ToolCall),
    Finish(String, String),
}

fn s(text: &str) -> Arg {
    Arg::Str(text.to_string())
}

fn v(name: &str) -> Arg {
    Arg::Var(name.to_string())
}

fn call(assign: Option<&str>, tool: &str, args: Vec<Arg>) -> ToolCall {
    ToolCall {
        assign: assign.map(str::to_string),
        tool: tool.to_string(),
        args,
    }
}

fn act(thought: &str, c: ToolCall) -> Step {
    Step::Act(thought.to_string(), c)
}

fn finish(thought: &str, answer: impl Into<String>) -> Step {
    Step::Finish(thought.to_string(), answer.into())
}

fn box_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"left:(-?\d+)/top:(-?\d+)/width:(\d+)/height:(\d+)").unwrap())
}

/// Boxes mentioned in an observation, in order.
pub fn parse_boxes(obs: &str) -> Vec<Box2D> {
    box_re()
        .captures_iter(obs)
        .map(|c| {
            let n = |i: usize| c[i].parse::<i64>().unwrap();
            Box2D::new(n(1), n(2), n(3), n(4))
        })
        .collect()
}

/// Items of a rendered text list `[a, b].`; a plain value is one item.
pub fn parse_list(obs: &str) -> Vec<String> {
    let t = obs.trim();
    match t.strip_prefix('[').and_then(|r| r.strip_suffix("].")) {
        Some("") => vec![],
        Some(body) => body.split(", ").map(str::to_string).collect(),
        None => vec![t.to_string()],
    }
}

fn box_arg(b: &Box2D) -> Arg {
    Arg::List([b.left, b.top, b.width, b.height].iter().map(|n| Arg::Num(*n as f64)).collect())
}

fn yes(b: bool) -> &'static str {
    if b {
        "yes"
    } else {
        "no"
    }
}

/// Plan the next step for `view`.
pub fn plan(view: &PromptView) -> Step {
    let obs = &view.observations;
    if let Some(last) = obs.last() {
        if last.starts_with("#ERROR#") {
            return finish("The last call failed, so I cannot answer.", "unknown");
        }
    }
    let Some(parsed) = parse_question(&view.question) else {
        return fallback(view);
    };
    let qtype = parsed.qtype();
    let specialist = qtype.specialist();
    if view.has(specialist) && view.agent != specialist {
        return dispatch(view, specialist);
    }
    match qtype {
        QuestionType::LocalPointing => local(view),
        QuestionType::LookTwice => look_twice(view, &parsed),
        QuestionType::SingleHop => single_hop(view),
        QuestionType::TwoHop => two_hop(view),
        QuestionType::TwoImage => two_image(view, &parsed),
        QuestionType::Spatial => spatial(view, &parsed),
        QuestionType::Counting => counting(view, &parsed),
        QuestionType::OcrReasoning => ocr(view, &parsed),
    }
}

fn fallback(view: &PromptView) -> Step {
    match view.observations.first() {
        None if view.has("VQA") => act(
            "I do not recognize this kind of question, so I ask VQA.",
            call(None, "VQA", vec![s(&view.question), v(&view.image(0))]),
        ),
        None => finish("I cannot answer this with my tools.", "unknown"),
        Some(o) => finish("VQA answered.", o.clone()),
    }
}

fn dispatch(view: &PromptView, specialist: &str) -> Step {
    match view.observations.first() {
        None => {
            let mut args = vec![s(&view.question)];
            args.extend(view.inputs.iter().map(|i| v(i)));
            if view.inputs.is_empty() {
                args.push(v("image"));
            }
            act(&format!("This question is for {specialist}."), call(None, specialist, args))
        }
        Some(o) => finish("The specialist answered.", o.clone()),
    }
}

fn local(view: &PromptView) -> Step {
    match view.observations.first() {
        None => act(
            "I ask VQA about the marked object.",
            call(None, "VQA", vec![s(&view.question), v(&view.image(0))]),
        ),
        Some(o) => finish("VQA answered.", o.clone()),
    }
}

fn look_twice(view: &PromptView, p: &ParsedQuestion) -> Step {
    let obs = &view.observations;
    let img = view.image(0);
    match obs.len() {
        0 => act(
            "I need to know what the marked object is.",
            call(None, "VQA", vec![s("what is this?"), v(&img)]),
        ),
        1 => {
            let class = obs[0].trim();
            if vocab::canonical_class(class).is_none() {
                return finish("I could not tell what the object is.", "unknown");
            }
            let plural = vocab::plural(class);
            let q = match p.template.id {
                "lt_count_color" => format!("how many {} {plural} are there?", p.param("color")),
                _ => format!("how many {plural} are there?"),
            };
            act("Now I look at the whole image.", call(None, "VQA", vec![s(&q), v(&img)]))
        }
        _ => {
            let answer = obs[1].trim();
            match p.template.id {
                "lt_more" | "lt_other" => {
                    let more = answer.parse::<i64>().map(|n| n > 1).unwrap_or(false);
                    finish("I compare the count with one.", yes(more))
                }
                _ => finish("That is the count.", answer),
            }
        }
    }
}

/// Encyclopedic lookup steps starting at `offset`; returns `None` once done.
fn lookup(view: &PromptView, offset: usize, question: &str, var: &str) -> Option<Step> {
    let obs = &view.observations[offset.min(view.observations.len())..];
    Some(match obs.len() {
        0 => act("I identify the landmark.", call(None, "GoogleLens", vec![v(&view.image(0))])),
        1 => act(
            "I read its article.",
            call(Some(var), "WikipediaArticle", vec![s(obs[0].trim())]),
        ),
        2 => act(
            "I answer from the article.",
            call(None, "AnswerWithContext", vec![s(question), v(var)]),
        ),
        _ => return None,
    })
}

fn single_hop(view: &PromptView) -> Step {
    lookup(view, 0, &view.question, "article")
        .unwrap_or_else(|| finish("The article has the answer.", view.observations[2].clone()))
}

fn two_hop(view: &PromptView) -> Step {
    let obs = &view.observations;
    if obs.is_empty() {
        return act(
            "This needs two steps, so I split the question.",
            call(None, "DecomposeQuestion", vec![s(&view.question)]),
        );
    }
    let parts = parse_list(&obs[0]);
    let [q1, q2] = parts.as_slice() else {
        return finish("The question did not split in two.", "unknown");
    };
    let (q1, q2) = (q1.to_string(), q2.to_string());
    // first hop: delegated (one step) or inline (three)
    let (first_answer, next) = if view.has("SingleHopEncyclopedicAgent") {
        if obs.len() == 1 {
            return act(
                "The first part is about the image.",
                call(None, "SingleHopEncyclopedicAgent", vec![s(&q1), v(&view.image(0))]),
            );
        }
        (obs[1].trim().to_string(), 2)
    } else {
        if let Some(step) = lookup(view, 1, &q1, "article") {
            return step;
        }
        (obs[3].trim().to_string(), 4)
    };
    let q2 = q2.replace(crate::world::ANSWER_SLOT, &first_answer);
    match obs.len() - next {
        0 => act(
            "Now I read about the first answer.",
            call(Some("article2"), "WikipediaArticle", vec![s(&first_answer)]),
        ),
        1 => act(
            "I answer the second part from that article.",
            call(None, "AnswerWithContext", vec![s(&q2), v("article2")]),
        ),
        _ => finish("That answers the question.", obs[next + 1].clone()),
    }
}

fn two_image(view: &PromptView, p: &ParsedQuestion) -> Step {
    let obs = &view.observations;
    let probe = |color: &str, class: &str| format!("is there {} {color} {class}?", vocab::article_for(color));
    let mut probes = vec![probe(p.param("color"), p.param("class"))];
    if p.template.id == "ti_one_other" {
        probes.push(probe(p.param("color2"), p.param("class2")));
    }
    let total = probes.len() * 2;
    if obs.len() < total {
        let (k, img) = (obs.len() / 2, obs.len() % 2);
        return act(
            &format!("I check image {} for the object.", img + 1),
            call(None, "VQA", vec![s(&probes[k]), v(&view.image(img))]),
        );
    }
    let h: Vec<bool> = obs.iter().map(|o| o.trim() == "yes").collect();
    let truth = match p.template.id {
        "ti_one_other" => (h[0] && h[3]) || (h[1] && h[2]),
        "ti_both" => h[0] && h[1],
        "ti_neither" => !h[0] && !h[1],
        "ti_exactly_one" => h[0] != h[1],
        _ => h[0] || h[1],
    };
    finish("I combine the answers for both images.", if truth { "true" } else { "false" })
}

fn spatial(view: &PromptView, p: &ParsedQuestion) -> Step {
    let obs = &view.observations;
    let img = view.image(0);
    if p.template.id == "sp_sign" {
        return match obs.len() {
            0 => act("I find the signs.", call(Some("signs"), "DetectObject", vec![v(&img), s("sign")])),
            1 if parse_boxes(&obs[0]).is_empty() => finish("There are no signs.", "unknown"),
            1 => act(
                "I select the sign the question asks about.",
                call(Some("sign"), "SpatialSelection", vec![v("signs"), s(p.param("rel"))]),
            ),
            2 => act("I crop the sign.", call(Some("crop"), "CropImage", vec![v(&img), v("sign")])),
            3 => act("I read the crop.", call(None, "OCR", vec![v("crop")])),
            _ => finish("That is the text on the sign.", obs[3].trim()),
        };
    }
    let (a, b) = (p.param("class"), p.param("class2"));
    match obs.len() {
        0 => act(&format!("I find the {a}."), call(None, "DetectObject", vec![v(&img), s(a)])),
        1 => act(&format!("I find the {b}."), call(None, "DetectObject", vec![v(&img), s(b)])),
        _ => {
            let (Some(ba), Some(bb)) = (parse_boxes(&obs[0]).first().copied(), parse_boxes(&obs[1]).first().copied())
            else {
                return finish("One of the objects is missing.", "unknown");
            };
            if p.template.id == "sp_overlap" {
                return match obs.len() {
                    2 => act(
                        "I score the overlap of the two boxes.",
                        call(None, "BoundingBoxOverlap", vec![box_arg(&ba), Arg::List(vec![box_arg(&bb)])]),
                    ),
                    _ => {
                        let score: f64 = obs[2].split(',').next().unwrap_or("0").trim().parse().unwrap_or(0.0);
                        finish("A positive overlap means they overlap.", yes(score > 0.0))
                    }
                };
            }
            let ((ax, ay), (bx, by)) = (ba.center2(), bb.center2());
            let answer = match p.template.id {
                "sp_left" => ax < bx,
                "sp_right" => ax > bx,
                "sp_above" => ay < by,
                _ => ay > by,
            };
            finish("I compare the box centers.", yes(answer))
        }
    }
}

fn counting(view: &PromptView, p: &ParsedQuestion) -> Step {
    let obs = &view.observations;
    let img = view.image(0);
    let class = p.param("class");
    if obs.is_empty() {
        return act(
            &format!("I detect every {class}."),
            call(Some("boxes"), "DetectObject", vec![v(&img), s(class)]),
        );
    }
    let n = parse_boxes(&obs[0]).len();
    if n == 0 {
        return finish("There are none.", "0");
    }
    if p.template.id == "cc_all" {
        return finish("I count the boxes.", n.to_string());
    }
    let colors: Vec<&str> = match p.template.id {
        "cc_or" => vec![p.param("color"), p.param("color2")],
        _ => vec![p.param("color")],
    };
    if obs.len() == 1 {
        return act("I crop each one.", call(Some("crops"), "CropImage", vec![v(&img), v("boxes")]));
    }
    let checks = obs.len() - 2;
    if checks < colors.len() {
        return act(
            "I check the condition on each crop.",
            call(None, "ObjectInImage", vec![s(&format!("{} {class}", colors[checks])), v("crops")]),
        );
    }
    let lists: Vec<Vec<bool>> = obs[2..].iter().map(|o| parse_list(o).iter().map(|x| x == "yes").collect()).collect();
    let hits = (0..lists[0].len())
        .filter(|&i| {
            let any = lists.iter().any(|l| l.get(i).copied().unwrap_or(false));
            if p.template.id == "cc_not_color" {
                !any
            } else {
                any
            }
        })
        .count();
    finish("I count the matching crops.", hits.to_string())
}

fn ocr(view: &PromptView, p: &ParsedQuestion) -> Step {
    let obs = &view.observations;
    let img = view.image(0);
    let class = crate::world::ocr_class(p.template.id).unwrap_or("sign");
    match obs.len() {
        0 => act(
            &format!("I find the {class}."),
            call(Some("boxes"), "DetectObject", vec![v(&img), s(class)]),
        ),
        1 if parse_boxes(&obs[0]).is_empty() => finish("There is nothing to read.", "unknown"),
        1 => act("I crop each one.", call(Some("crops"), "CropImage", vec![v(&img), v("boxes")])),
        2 => act("I read the crops.", call(None, "OCR", vec![v("crops")])),
        _ => {
            let text = parse_list(&obs[2]).into_iter().find(|t| !t.is_empty() && t != ILLEGIBLE);
            finish("I take the first readable text.", text.unwrap_or_else(|| "unknown".into()))
        }
    }
}

/// Render a step as a completion.
pub fn render_step(step: &Step) -> String {
    match step {
        Step::Act(t, c) => format!("{t}\n[Act]: {}", render_call(c)),
        Step::Finish(t, a) => format!("{t}\n[Finish]: {a}"),
    }
}

/// Plans every step from the prompt; safe to share across threads.
#[derive(Debug, Clone, Copy, Default)]
pub struct OraclePlanner;

impl Backend for OraclePlanner {
    fn capabilities(&self) -> Capabilities {
        Capabilities {
            max_input_chars: usize::MAX,
            max_output_chars: super::DEFAULT_MAX_OUTPUT_CHARS,
            supports_concurrent_calls: true,
        }
    }

    fn generate(&self, prompt: &str) -> Result<String, BackendError> {
        Ok(render_step(&plan(&PromptView::parse(prompt))))
    }
}
