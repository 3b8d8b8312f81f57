//! Turn-structured dialog corpora.
//!
//! A dialog is an ordered list of turns, each an agent utterance optionally
//! followed by a user utterance. Only the final turn may omit the user side.
//! Corpora are stored one utterance per line as a flat JSON object.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::path::Path;

use indexmap::IndexMap;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Speaker {
    Agent,
    User,
}

impl Speaker {
    pub fn as_str(self) -> &'static str {
        match self {
            Speaker::Agent => "agent",
            Speaker::User => "user",
        }
    }
}

impl fmt::Display for Speaker {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Utterance {
    pub id: String,
    pub dialog_id: String,
    pub turn: u32,
    pub speaker: Speaker,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Turn {
    pub agent: Utterance,
    pub user: Option<Utterance>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dialog {
    pub id: String,
    pub turns: Vec<Turn>,
}

impl Dialog {
    /// Utterances in speaking order: A_1, U_1, A_2, U_2, ...
    pub fn utterances(&self) -> impl Iterator<Item = &Utterance> {
        self.turns
            .iter()
            .flat_map(|t| std::iter::once(&t.agent).chain(t.user.as_ref()))
    }
}

/// A validated collection of dialogs.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Corpus {
    dialogs: Vec<Dialog>,
}

/// One line of the corpus file.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Record {
    utterance_id: String,
    dialog_id: String,
    turn: u32,
    speaker: Speaker,
    text: String,
}

impl Corpus {
    /// Builds a corpus, checking every dialog and id invariant.
    pub fn new(dialogs: Vec<Dialog>) -> Result<Self> {
        let mut ids = HashSet::new();
        let mut dialog_ids = HashSet::new();
        for dialog in &dialogs {
            if !dialog_ids.insert(dialog.id.as_str()) {
                return Err(malformed(&dialog.id, "dialog id appears twice"));
            }
            if dialog.turns.is_empty() {
                return Err(malformed(&dialog.id, "no turns"));
            }
            let last = dialog.turns.len() - 1;
            let mut prev_turn = 0u32;
            for (t, turn) in dialog.turns.iter().enumerate() {
                if turn.agent.speaker != Speaker::Agent {
                    return Err(malformed(&dialog.id, "agent slot holds a user utterance"));
                }
                if turn.agent.turn <= prev_turn {
                    return Err(malformed(
                        &dialog.id,
                        "turn indices not strictly increasing",
                    ));
                }
                prev_turn = turn.agent.turn;
                match &turn.user {
                    Some(user) => {
                        if user.speaker != Speaker::User || user.turn != turn.agent.turn {
                            return Err(malformed(
                                &dialog.id,
                                format!("user slot of turn {} is inconsistent", turn.agent.turn),
                            ));
                        }
                    }
                    None if t != last => {
                        return Err(malformed(
                            &dialog.id,
                            format!(
                                "turn {} has no user utterance and is not final",
                                turn.agent.turn
                            ),
                        ));
                    }
                    None => {}
                }
                for u in std::iter::once(&turn.agent).chain(turn.user.as_ref()) {
                    if u.dialog_id != dialog.id {
                        return Err(malformed(
                            &dialog.id,
                            format!("utterance {:?} names another dialog", u.id),
                        ));
                    }
                    if !ids.insert(u.id.as_str()) {
                        return Err(Error::DuplicateId(u.id.clone()));
                    }
                }
            }
        }
        Ok(Corpus { dialogs })
    }

    pub fn dialogs(&self) -> &[Dialog] {
        &self.dialogs
    }

    pub fn is_empty(&self) -> bool {
        self.dialogs.is_empty()
    }

    pub fn num_utterances(&self) -> usize {
        self.dialogs
            .iter()
            .map(|d| d.turns.len() + d.turns.iter().filter(|t| t.user.is_some()).count())
            .sum()
    }

    /// All utterances, dialog by dialog, in speaking order.
    pub fn utterances(&self) -> impl Iterator<Item = &Utterance> {
        self.dialogs.iter().flat_map(Dialog::utterances)
    }

    pub fn index(&self) -> HashMap<&str, &Utterance> {
        self.utterances().map(|u| (u.id.as_str(), u)).collect()
    }

    /// Parses the line format. Rejects malformed lines with their 1-based number.
    pub fn from_jsonl(text: &str) -> Result<Self> {
        let mut order: Vec<String> = Vec::new();
        // dialog id -> turn -> (agent, user)
        type Slots = BTreeMap<u32, (Option<Utterance>, Option<Utterance>)>;
        let mut grouped: HashMap<String, Slots> = HashMap::new();
        let mut seen = HashSet::new();
        for (n, line) in text.lines().enumerate() {
            let line_no = n + 1;
            let rec: Record = serde_json::from_str(line).map_err(|e| Error::Parse {
                line: line_no,
                msg: e.to_string(),
            })?;
            if rec.turn == 0 {
                return Err(Error::Parse {
                    line: line_no,
                    msg: "turn must be a positive integer".into(),
                });
            }
            if rec.text.is_empty() {
                return Err(Error::Parse {
                    line: line_no,
                    msg: "empty text".into(),
                });
            }
            if !seen.insert(rec.utterance_id.clone()) {
                return Err(Error::DuplicateId(rec.utterance_id));
            }
            let turns = grouped.entry(rec.dialog_id.clone()).or_insert_with(|| {
                order.push(rec.dialog_id.clone());
                BTreeMap::new()
            });
            let slot = turns.entry(rec.turn).or_default();
            let utt = Utterance {
                id: rec.utterance_id,
                dialog_id: rec.dialog_id,
                turn: rec.turn,
                speaker: rec.speaker,
                text: rec.text,
            };
            let target = match utt.speaker {
                Speaker::Agent => &mut slot.0,
                Speaker::User => &mut slot.1,
            };
            if target.is_some() {
                return Err(Error::Parse {
                    line: line_no,
                    msg: format!(
                        "dialog {:?} has two {} utterances at turn {}",
                        utt.dialog_id, utt.speaker, utt.turn
                    ),
                });
            }
            *target = Some(utt);
        }
        if order.is_empty() {
            return Err(Error::EmptyCorpus);
        }

        let mut dialogs = Vec::with_capacity(order.len());
        for id in order {
            let turns = grouped.remove(&id).expect("grouped by id");
            let mut out = Vec::with_capacity(turns.len());
            for (turn_index, (agent, user)) in turns {
                let Some(agent) = agent else {
                    return Err(malformed(
                        &id,
                        format!("user utterance but no agent utterance at turn {turn_index}"),
                    ));
                };
                out.push(Turn { agent, user });
            }
            dialogs.push(Dialog { id, turns: out });
        }
        Corpus::new(dialogs)
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for u in self.utterances() {
            let rec = Record {
                utterance_id: u.id.clone(),
                dialog_id: u.dialog_id.clone(),
                turn: u.turn,
                speaker: u.speaker,
                text: u.text.clone(),
            };
            out.push_str(&serde_json::to_string(&rec).expect("record serializes"));
            out.push('\n');
        }
        out
    }
}

fn malformed(dialog: &str, msg: impl Into<String>) -> Error {
    Error::MalformedDialog {
        dialog: dialog.to_string(),
        msg: msg.into(),
    }
}

pub fn load_corpus(path: impl AsRef<Path>) -> Result<Corpus> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Corpus::from_jsonl(&text)
}

pub fn write_corpus(corpus: &Corpus, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, corpus.to_jsonl()).map_err(|e| Error::io(path, e))
}

/// Latent state and intent annotation for every utterance of a corpus.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GroundTruth {
    pub state_of: IndexMap<String, usize>,
    pub intent_of: IndexMap<String, String>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TruthRecord {
    utterance_id: String,
    state: usize,
    intent: String,
}

impl GroundTruth {
    pub fn num_states(&self) -> usize {
        self.state_of.values().max().map_or(0, |s| s + 1)
    }

    /// Keys must be exactly the corpus utterance ids.
    pub fn check_covers(&self, corpus: &Corpus) -> Result<()> {
        let mut count = 0;
        for u in corpus.utterances() {
            count += 1;
            if !self.state_of.contains_key(&u.id) || !self.intent_of.contains_key(&u.id) {
                return Err(Error::Missing {
                    what: "ground truth",
                    id: u.id.clone(),
                });
            }
        }
        if self.state_of.len() != count || self.intent_of.len() != count {
            return Err(invalid("ground truth names utterances outside the corpus"));
        }
        Ok(())
    }

    pub fn from_jsonl(text: &str) -> Result<Self> {
        let mut truth = GroundTruth::default();
        for (n, line) in text.lines().enumerate() {
            let rec: TruthRecord = serde_json::from_str(line).map_err(|e| Error::Parse {
                line: n + 1,
                msg: e.to_string(),
            })?;
            if truth.state_of.contains_key(&rec.utterance_id) {
                return Err(Error::DuplicateId(rec.utterance_id));
            }
            truth.state_of.insert(rec.utterance_id.clone(), rec.state);
            truth.intent_of.insert(rec.utterance_id, rec.intent);
        }
        Ok(truth)
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for (id, &state) in &self.state_of {
            let rec = TruthRecord {
                utterance_id: id.clone(),
                state,
                intent: self.intent_of.get(id).cloned().unwrap_or_default(),
            };
            out.push_str(&serde_json::to_string(&rec).expect("record serializes"));
            out.push('\n');
        }
        out
    }
}

pub fn load_truth(path: impl AsRef<Path>) -> Result<GroundTruth> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    GroundTruth::from_jsonl(&text)
}

pub fn write_truth(truth: &GroundTruth, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, truth.to_jsonl()).map_err(|e| Error::io(path, e))
}

/// Parameters of a templated finite-state dialog generator.
///
/// `transition_matrix` has one row per state and `num_states + 1` columns;
/// the last column is the probability of ending the dialog.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub transition_matrix: Vec<Vec<f64>>,
    pub templates_per_state: usize,
    pub slot_vocab_size: usize,
    pub num_dialogs: usize,
    pub seed: u64,
}

/// Words shared by every template of a state.
const STEM_WORDS: usize = 3;

impl SyntheticSpec {
    pub fn num_states(&self) -> usize {
        self.transition_matrix.len()
    }

    pub fn validate(&self) -> Result<()> {
        let s = self.num_states();
        if s == 0 {
            return Err(invalid("synthetic spec needs at least one state"));
        }
        if self.templates_per_state == 0 || self.slot_vocab_size == 0 || self.num_dialogs == 0 {
            return Err(invalid(
                "templates_per_state, slot_vocab_size and num_dialogs must be positive",
            ));
        }
        for (i, row) in self.transition_matrix.iter().enumerate() {
            if row.len() != s + 1 {
                return Err(invalid(format!(
                    "transition row {i} has {} columns, expected {}",
                    row.len(),
                    s + 1
                )));
            }
            if row.iter().any(|p| !p.is_finite() || *p < 0.0) {
                return Err(invalid(format!(
                    "transition row {i} has a negative or non-finite entry"
                )));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > 1e-9 {
                return Err(invalid(format!("transition row {i} sums to {sum}")));
            }
        }
        // Every state reachable from the start must be able to reach the end,
        // otherwise a walk can run forever.
        let mut reachable = vec![false; s];
        let mut stack = vec![0usize];
        reachable[0] = true;
        while let Some(i) = stack.pop() {
            for (j, &p) in self.transition_matrix[i][..s].iter().enumerate() {
                if p > 0.0 && !reachable[j] {
                    reachable[j] = true;
                    stack.push(j);
                }
            }
        }
        let mut ends = vec![false; s];
        let mut changed = true;
        while changed {
            changed = false;
            for i in 0..s {
                if ends[i] {
                    continue;
                }
                let row = &self.transition_matrix[i];
                if row[s] > 0.0 || (0..s).any(|j| row[j] > 0.0 && ends[j]) {
                    ends[i] = true;
                    changed = true;
                }
            }
        }
        if let Some(i) = (0..s).find(|&i| reachable[i] && !ends[i]) {
            return Err(invalid(format!(
                "state {i} cannot reach the end of a dialog"
            )));
        }
        Ok(())
    }
}

const CONSONANTS: &[u8] = b"bdfgklmnprstvz";
const VOWELS: &[u8] = b"aeiou";

/// Distinct pronounceable word for every id below 70^3.
fn pseudo_word(mut id: usize) -> String {
    let base = CONSONANTS.len() * VOWELS.len();
    let mut word = String::with_capacity(6);
    for _ in 0..3 {
        let syl = id % base;
        id /= base;
        word.push(CONSONANTS[syl / VOWELS.len()] as char);
        word.push(VOWELS[syl % VOWELS.len()] as char);
    }
    word
}

struct Lexicon {
    states: usize,
    templates: usize,
}

impl Lexicon {
    fn stem(&self, state: usize, j: usize) -> String {
        pseudo_word(state * STEM_WORDS + j)
    }

    fn template(&self, state: usize, speaker: Speaker, t: usize) -> String {
        let role = match speaker {
            Speaker::Agent => 0,
            Speaker::User => 1,
        };
        let base = self.states * STEM_WORDS;
        pseudo_word(base + (state * 2 + role) * self.templates + t)
    }

    fn filler(&self, i: usize) -> String {
        let base = self.states * STEM_WORDS + self.states * 2 * self.templates;
        pseudo_word(base + i)
    }
}

/// Samples dialogs by walking the state machine from state 0.
///
/// Each visited state emits one agent and one user utterance, both recorded
/// in the ground truth with that state as their state and intent.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<(Corpus, GroundTruth)> {
    spec.validate()?;
    let states = spec.num_states();
    let lex = Lexicon {
        states,
        templates: spec.templates_per_state,
    };
    let mut rng = rng::rng_from_seed(spec.seed);
    let mut truth = GroundTruth::default();
    let mut dialogs = Vec::with_capacity(spec.num_dialogs);

    let mut emit =
        |rng: &mut rng::StageRng, state: usize, speaker: Speaker, dialog_id: &str, turn: u32| {
            let t = rng.random_range(0..spec.templates_per_state);
            let f1 = rng.random_range(0..spec.slot_vocab_size);
            let f2 = rng.random_range(0..spec.slot_vocab_size);
            let mut words: Vec<String> = (0..STEM_WORDS).map(|j| lex.stem(state, j)).collect();
            words.push(lex.template(state, speaker, t));
            words.push(lex.filler(f1));
            words.push(lex.filler(f2));
            let suffix = match speaker {
                Speaker::Agent => 'a',
                Speaker::User => 'u',
            };
            let id = format!("{dialog_id}-t{turn:03}-{suffix}");
            truth.state_of.insert(id.clone(), state);
            truth.intent_of.insert(id.clone(), state.to_string());
            Utterance {
                id,
                dialog_id: dialog_id.to_string(),
                turn,
                speaker,
                text: words.join(" "),
            }
        };

    for d in 0..spec.num_dialogs {
        let dialog_id = format!("d{d:05}");
        let mut turns = Vec::new();
        let mut state = 0usize;
        loop {
            let turn = turns.len() as u32 + 1;
            let agent = emit(&mut rng, state, Speaker::Agent, &dialog_id, turn);
            let user = emit(&mut rng, state, Speaker::User, &dialog_id, turn);
            turns.push(Turn {
                agent,
                user: Some(user),
            });
            let next = sample_row(&mut rng, &spec.transition_matrix[state]);
            if next == states {
                break;
            }
            state = next;
        }
        dialogs.push(Dialog {
            id: dialog_id,
            turns,
        });
    }
    Ok((Corpus::new(dialogs)?, truth))
}

fn sample_row(rng: &mut rng::StageRng, row: &[f64]) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (j, &p) in row.iter().enumerate() {
        if p > 0.0 {
            last_positive = j;
            acc += p;
            if u < acc {
                return j;
            }
        }
    }
    last_positive
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(id: &str, dialog: &str, turn: u32, speaker: &str, text: &str) -> String {
        format!(
            r#"{{"utterance_id":"{id}","dialog_id":"{dialog}","turn":{turn},"speaker":"{speaker}","text":"{text}"}}"#
        )
    }

    #[test]
    fn minimal_corpus_loads() {
        let text = format!(
            "{}\n{}\n",
            line("u1", "d1", 1, "agent", "hello"),
            line("u2", "d1", 1, "user", "hi")
        );
        let corpus = Corpus::from_jsonl(&text).unwrap();
        assert_eq!(corpus.dialogs().len(), 1);
        assert_eq!(corpus.dialogs()[0].turns.len(), 1);
        assert_eq!(corpus.num_utterances(), 2);
    }

    #[test]
    fn empty_file_is_rejected() {
        assert!(matches!(Corpus::from_jsonl(""), Err(Error::EmptyCorpus)));
    }

    #[test]
    fn duplicate_id_is_named() {
        let l = line("u1", "d1", 1, "agent", "hello");
        let err = Corpus::from_jsonl(&format!("{l}\n{l}\n")).unwrap_err();
        assert!(matches!(&err, Error::DuplicateId(id) if id == "u1"));
        assert!(err.to_string().contains("u1"));
    }

    #[test]
    fn malformed_line_reports_number() {
        let text = format!("{}\nnot json\n", line("u1", "d1", 1, "agent", "hello"));
        match Corpus::from_jsonl(&text).unwrap_err() {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected {other}"),
        }
        let extra = r#"{"utterance_id":"u","dialog_id":"d","turn":1,"speaker":"agent","text":"x","more":1}"#;
        assert!(matches!(
            Corpus::from_jsonl(extra),
            Err(Error::Parse { line: 1, .. })
        ));
        let zero = line("u1", "d1", 0, "agent", "hello");
        assert!(matches!(
            Corpus::from_jsonl(&zero),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn user_without_agent_is_rejected() {
        let text = format!(
            "{}\n{}\n",
            line("u1", "d1", 1, "agent", "hello"),
            line("u2", "d1", 2, "user", "hi")
        );
        assert!(matches!(
            Corpus::from_jsonl(&text),
            Err(Error::MalformedDialog { .. })
        ));
    }

    #[test]
    fn missing_user_allowed_only_on_final_turn() {
        let ok = format!(
            "{}\n{}\n{}\n",
            line("a1", "d1", 1, "agent", "x"),
            line("u1", "d1", 1, "user", "y"),
            line("a2", "d1", 2, "agent", "z")
        );
        assert!(Corpus::from_jsonl(&ok).is_ok());
        let bad = format!(
            "{}\n{}\n{}\n",
            line("a1", "d1", 1, "agent", "x"),
            line("a2", "d1", 2, "agent", "z"),
            line("u2", "d1", 2, "user", "y")
        );
        assert!(Corpus::from_jsonl(&bad).is_err());
    }

    #[test]
    fn lines_out_of_order_are_grouped() {
        let text = format!(
            "{}\n{}\n{}\n{}\n",
            line("a2", "d1", 2, "agent", "x"),
            line("e1", "d2", 1, "agent", "y"),
            line("a1", "d1", 1, "agent", "z"),
            line("u1", "d1", 1, "user", "w")
        );
        let corpus = Corpus::from_jsonl(&text).unwrap();
        let ids: Vec<_> = corpus.utterances().map(|u| u.id.as_str()).collect();
        assert_eq!(ids, ["a1", "u1", "a2", "e1"]);
    }

    fn spec(matrix: Vec<Vec<f64>>, dialogs: usize) -> SyntheticSpec {
        SyntheticSpec {
            transition_matrix: matrix,
            templates_per_state: 3,
            slot_vocab_size: 10,
            num_dialogs: dialogs,
            seed: 11,
        }
    }

    #[test]
    fn single_state_machine() {
        let (corpus, truth) = generate_synthetic(&spec(vec![vec![0.5, 0.5]], 3)).unwrap();
        assert_eq!(corpus.dialogs().len(), 3);
        assert!(truth.state_of.values().all(|&s| s == 0));
        truth.check_covers(&corpus).unwrap();
    }

    #[test]
    fn generation_is_deterministic() {
        let s = spec(vec![vec![0.2, 0.5, 0.3], vec![0.3, 0.3, 0.4]], 20);
        let (a, ta) = generate_synthetic(&s).unwrap();
        let (b, tb) = generate_synthetic(&s).unwrap();
        assert_eq!(a.to_jsonl(), b.to_jsonl());
        assert_eq!(ta, tb);
    }

    #[test]
    fn deterministic_chain_visits_states_in_order() {
        let s = spec(vec![vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]], 10);
        let (corpus, truth) = generate_synthetic(&s).unwrap();
        for d in corpus.dialogs() {
            let states: Vec<usize> = d.utterances().map(|u| truth.state_of[&u.id]).collect();
            assert_eq!(states, [0, 0, 1, 1]);
        }
    }

    #[test]
    fn unreachable_end_is_rejected() {
        let s = spec(vec![vec![0.0, 1.0, 0.0], vec![1.0, 0.0, 0.0]], 1);
        assert!(generate_synthetic(&s).is_err());
        let s = spec(vec![vec![0.5, 0.4]], 1);
        assert!(generate_synthetic(&s).is_err());
    }

    #[test]
    fn states_have_disjoint_stems() {
        let s = spec(vec![vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]], 1);
        let (corpus, truth) = generate_synthetic(&s).unwrap();
        let words = |state: usize| -> HashSet<String> {
            corpus
                .utterances()
                .filter(|u| truth.state_of[&u.id] == state)
                .flat_map(|u| {
                    u.text
                        .split(' ')
                        .take(STEM_WORDS + 1)
                        .map(str::to_string)
                        .collect::<Vec<_>>()
                })
                .collect()
        };
        assert!(words(0).is_disjoint(&words(1)));
    }

    #[test]
    fn truth_round_trip() {
        let s = spec(vec![vec![0.3, 0.7]], 4);
        let (_, truth) = generate_synthetic(&s).unwrap();
        assert_eq!(GroundTruth::from_jsonl(&truth.to_jsonl()).unwrap(), truth);
    }
}
