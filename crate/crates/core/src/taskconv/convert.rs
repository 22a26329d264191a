use super::scheme::render;
use super::{
    assemble, EqaInstance, LocalSpan, PairInstance, Scheme, TaggingInstance, TaskInstance, TaskKind,
    UnifiedInput,
};
use crate::error::{Error, Result};
use crate::mrcgen::find_identical_spans;
use crate::wikicorpus::tokenize::char_span_to_tokens;
use crate::wikicorpus::TokenizerRegistry;

fn texts(tokens: Vec<crate::wikicorpus::Token>) -> Vec<String> {
    tokens.into_iter().map(|t| t.text).collect()
}

fn tag(mut input: UnifiedInput, source_id: &str, lang: &str, label: Option<&str>) -> UnifiedInput {
    input.source_id = source_id.to_string();
    input.lang = lang.to_string();
    input.label = label.map(String::from);
    input
}

/// The question is the query; every exact token-level occurrence of each
/// gold answer is a gold span. Character offsets, when given, are mapped
/// through the tokenizer instead.
pub fn convert_eqa(instance: &EqaInstance, tokenizers: &TokenizerRegistry) -> Result<UnifiedInput> {
    let tokenizer = tokenizers.get(&instance.lang);
    let query = texts(tokenizer.tokenize(&instance.question));
    let ctx_tokens = tokenizer.tokenize(&instance.context);
    let context: Vec<String> = ctx_tokens.iter().map(|t| t.text.clone()).collect();

    let mut spans = Vec::new();
    for (k, answer) in instance.answers.iter().enumerate() {
        let start = instance.answer_starts.as_ref().and_then(|v| v.get(k).copied());
        let found = match start {
            Some(s) => char_span_to_tokens(&ctx_tokens, s, s + answer.chars().count())
                .map(|(a, b)| vec![(a, b)])
                .unwrap_or_default(),
            None => {
                let surface = texts(tokenizer.tokenize(answer));
                find_identical_spans(&context, &surface)
            }
        };
        if found.is_empty() {
            return Err(Error::AnswerNotFound {
                answer: answer.clone(),
            });
        }
        spans.extend(found.into_iter().map(|(s, e)| LocalSpan::Context(s, e)));
    }
    let input = assemble(query, context, &spans)?;
    Ok(tag(input, &instance.id, &instance.lang, None))
}

/// One input per scheme label, in scheme order, each asking for the spans
/// of that label.
pub fn convert_tagging(instance: &TaggingInstance, scheme: &Scheme) -> Result<Vec<UnifiedInput>> {
    for (label, s, e) in &instance.spans {
        if scheme.label(label).is_none() {
            return Err(Error::UnknownLabel { label: label.clone() });
        }
        if s > e || *e >= instance.tokens.len() {
            return Err(Error::SpanOutOfBounds {
                start: *s,
                end: *e,
                len: instance.tokens.len(),
            });
        }
    }
    scheme
        .labels
        .iter()
        .map(|label| {
            let spans: Vec<LocalSpan> = instance
                .spans
                .iter()
                .filter(|(l, _, _)| *l == label.name)
                .map(|&(_, s, e)| LocalSpan::Context(s, e))
                .collect();
            let input = assemble(scheme.label_query(label), instance.tokens.clone(), &spans)?;
            Ok(tag(input, &instance.id, &instance.lang, Some(&label.name)))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairMode {
    /// One input per label; the gold label's input answers with `[CLS]`.
    Classification,
    /// Label plus one sentence as the query, the other sentence as the
    /// context. With `both_orders` the pair is emitted twice, swapped.
    Rationale { both_orders: bool },
}

impl std::str::FromStr for PairMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "classification" => Ok(PairMode::Classification),
            "rationale" => Ok(PairMode::Rationale { both_orders: true }),
            other => Err(Error::UnknownMode(other.to_string())),
        }
    }
}

fn split(s: &str) -> Vec<String> {
    s.split_whitespace().map(String::from).collect()
}

pub fn convert_pair(
    instance: &PairInstance,
    scheme: &Scheme,
    mode: PairMode,
    tokenizers: &TokenizerRegistry,
) -> Result<Vec<UnifiedInput>> {
    if let Some(label) = &instance.label {
        if scheme.label(label).is_none() {
            return Err(Error::UnknownLabel { label: label.clone() });
        }
    }
    let tokenizer = tokenizers.get(&instance.lang);
    let s1 = texts(tokenizer.tokenize(&instance.sentence1)).join(" ");
    let s2 = texts(tokenizer.tokenize(&instance.sentence2)).join(" ");
    match mode {
        PairMode::Classification => {
            let context = split(&render(
                &scheme.templates.context,
                &[("sentence1", &s1), ("sentence2", &s2)],
            ));
            scheme
                .labels
                .iter()
                .map(|label| {
                    let gold = if instance.label.as_deref() == Some(label.name.as_str()) {
                        vec![LocalSpan::Cls]
                    } else {
                        Vec::new()
                    };
                    let input = assemble(scheme.label_query(label), context.clone(), &gold)?;
                    Ok(tag(input, &instance.id, &instance.lang, Some(&label.name)))
                })
                .collect()
        }
        PairMode::Rationale { both_orders } => {
            let label = instance.label.as_deref().ok_or_else(|| {
                Error::Config(format!("pair {} needs a label for rationale mode", instance.id))
            })?;
            let mut orders = vec![(&s1, &s2)];
            if both_orders {
                orders.push((&s2, &s1));
            }
            orders
                .into_iter()
                .map(|(first, second)| {
                    let query = split(&render(
                        &scheme.templates.rationale_query,
                        &[("name", label), ("sentence1", first)],
                    ));
                    let input = assemble(query, split(second), &[])?;
                    Ok(tag(input, &instance.id, &instance.lang, Some(label)))
                })
                .collect()
        }
    }
}

/// Dispatches on the instance kind. `mode` only affects pair instances.
pub fn convert_task(
    instance: &TaskInstance,
    scheme: &Scheme,
    mode: PairMode,
    tokenizers: &TokenizerRegistry,
) -> Result<Vec<UnifiedInput>> {
    match (instance, scheme.task) {
        (TaskInstance::Eqa(x), TaskKind::Eqa) => Ok(vec![convert_eqa(x, tokenizers)?]),
        (TaskInstance::Tagging(x), TaskKind::Ner | TaskKind::Absa) => convert_tagging(x, scheme),
        (TaskInstance::Pair(x), TaskKind::Pair) => convert_pair(x, scheme, mode, tokenizers),
        (inst, kind) => Err(Error::Config(format!(
            "instance {} does not match a {kind:?} scheme",
            inst.id()
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn words(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    fn conll_sentence() -> TaggingInstance {
        TaggingInstance {
            id: "s1".into(),
            lang: "en".into(),
            tokens: words("Two goals in the last six minutes gave holders Japan an uninspiring 2-1 Asian Cup victory over Syria on Friday ."),
            spans: vec![
                ("LOC".into(), 9, 9),
                ("MISC".into(), 13, 14),
                ("LOC".into(), 17, 17),
            ],
        }
    }

    #[test]
    fn squad_row() {
        let inst = EqaInstance {
            id: "q".into(),
            lang: "en".into(),
            question: "Who lost to the Broncos in the divisional round?".into(),
            context: "The Broncos defeated the Pittsburgh Steelers in the divisional round, 23–16, by scoring 11 points in the final three minutes of the game.".into(),
            answers: vec!["Pittsburgh Steelers".into()],
            answer_starts: None,
        };
        let u = convert_eqa(&inst, &TokenizerRegistry::default()).unwrap();
        assert_eq!(u.gold, vec![(17, 18)]);
        let mut by_offset = inst.clone();
        by_offset.answer_starts = Some(vec![25]);
        assert_eq!(convert_eqa(&by_offset, &TokenizerRegistry::default()).unwrap().gold, vec![(17, 18)]);
    }

    #[test]
    fn eqa_repeated_and_missing_answers() {
        let mut inst = EqaInstance {
            id: "q".into(),
            lang: "en".into(),
            question: "Where?".into(),
            context: "Paris is big and Paris is old.".into(),
            answers: vec!["Paris".into()],
            answer_starts: None,
        };
        let reg = TokenizerRegistry::default();
        assert_eq!(convert_eqa(&inst, &reg).unwrap().gold.len(), 2);
        inst.answers = vec![];
        assert!(convert_eqa(&inst, &reg).unwrap().gold.is_empty());
        inst.answers = vec!["Lyon".into()];
        assert!(matches!(convert_eqa(&inst, &reg), Err(Error::AnswerNotFound { .. })));
    }

    #[test]
    fn conll_rows_one_input_per_label() {
        let inputs = convert_tagging(&conll_sentence(), &Scheme::conll()).unwrap();
        let labels: Vec<_> = inputs.iter().map(|u| u.label.clone().unwrap()).collect();
        assert_eq!(labels, ["ORG", "PER", "LOC", "MISC"]);
        assert!(inputs[0].gold.is_empty());
        assert!(inputs[1].gold.is_empty());
        let loc = &inputs[2];
        assert_eq!(loc.gold.len(), 2);
        assert_eq!(loc.span_tokens(loc.gold[0]), ["Japan"]);
        assert_eq!(loc.span_tokens(loc.gold[1]), ["Syria"]);
        let misc = &inputs[3];
        assert_eq!(misc.span_tokens(misc.gold[0]), ["Asian", "Cup"]);
    }

    #[test]
    fn absa_rows_match_published_indices() {
        let inst = TaggingInstance {
            id: "r".into(),
            lang: "en".into(),
            tokens: words("Nice ambience , but highly overrated place ."),
            spans: vec![("POS".into(), 1, 1), ("NEG".into(), 6, 6)],
        };
        let inputs = convert_tagging(&inst, &Scheme::absa()).unwrap();
        assert_eq!(inputs[0].gold, vec![(13, 13)]);
        assert_eq!(inputs[1].gold, vec![(18, 18)]);
        assert!(inputs[2].gold.is_empty());
    }

    #[test]
    fn tagging_errors_and_empty() {
        let mut inst = conll_sentence();
        inst.spans = vec![];
        let inputs = convert_tagging(&inst, &Scheme::conll()).unwrap();
        assert_eq!(inputs.len(), 4);
        assert!(inputs.iter().all(|u| u.gold.is_empty()));
        inst.spans = vec![("DATE".into(), 0, 0)];
        assert!(matches!(convert_tagging(&inst, &Scheme::conll()), Err(Error::UnknownLabel { .. })));
    }

    fn paws() -> PairInstance {
        PairInstance {
            id: "p".into(),
            lang: "en".into(),
            sentence1: "The Tabaci River is a tributary of the River Leurda in Romania.".into(),
            sentence2: "The Leurda River is a tributary of the River Tabaci in Romania.".into(),
            label: Some("Contradiction".into()),
        }
    }

    #[test]
    fn pair_classification_row() {
        let reg = TokenizerRegistry::default();
        let inputs = convert_pair(&paws(), &Scheme::pawsx(), PairMode::Classification, &reg).unwrap();
        assert_eq!(inputs.len(), 2);
        assert_eq!(inputs[0].gold, vec![(0, 0)]);
        assert!(inputs[1].gold.is_empty());
        assert_eq!(
            inputs[0].query.join(" "),
            "Contradiction . The hypothesis is a sentence with a contradictory meaning to the premise ."
        );
        assert_eq!(
            inputs[0].context.join(" "),
            "Hypothesis : The Tabaci River is a tributary of the River Leurda in Romania . Premise : The Leurda River is a tributary of the River Tabaci in Romania ."
        );
    }

    #[test]
    fn pair_inference_and_rationale() {
        let reg = TokenizerRegistry::default();
        let mut inst = paws();
        inst.label = None;
        let inputs = convert_pair(&inst, &Scheme::pawsx(), PairMode::Classification, &reg).unwrap();
        assert!(inputs.iter().all(|u| u.gold.is_empty()));
        let rat = convert_pair(&paws(), &Scheme::pawsx(), "rationale".parse().unwrap(), &reg).unwrap();
        assert_eq!(rat.len(), 2);
        assert_eq!(rat[0].query[0], "Contradiction");
        assert_eq!(rat[0].query[1], "The");
        assert_eq!(rat[0].context[1], "Leurda");
        assert_eq!(rat[1].context[1], "Tabaci");
        assert!(rat.iter().all(|u| u.gold.is_empty()));
        assert!(matches!("summarize".parse::<PairMode>(), Err(Error::UnknownMode(_))));
    }
}
