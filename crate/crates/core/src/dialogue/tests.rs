use std::sync::{Arc, Mutex};

use super::*;
use crate::envs::{env_descriptors, make_env, Action, ActionSpace, CARTPOLE, PENDULUM};
use crate::policy::{PolicyConfig, PolicyNet};
use crate::reservoir::ReservoirModel;

/// Records requests and replays scripted answers, falling back to the mock.
struct Scripted {
    answers: Mutex<Vec<String>>,
    seen: Mutex<Vec<LlmRequest>>,
}

impl Scripted {
    fn new(answers: &[&str]) -> Self {
        Scripted { answers: Mutex::new(answers.iter().rev().map(|s| s.to_string()).collect()), seen: Mutex::new(Vec::new()) }
    }
}

impl LlmClient for Scripted {
    fn send(&self, request: &LlmRequest) -> Result<String, LlmError> {
        self.seen.lock().unwrap().push(request.clone());
        match self.answers.lock().unwrap().pop() {
            Some(a) => Ok(a),
            None => MockLlm::default().send(request),
        }
    }

    fn name(&self) -> String {
        "scripted".into()
    }
}

fn cartpole_agent(seed: u64) -> Agent {
    let policy = PolicyNet::new(Arc::new(ReservoirModel::identity(8)), 4, ActionSpace::Discrete { n: 2 }, PolicyConfig::default(), seed);
    Agent { info: AgentInfo { reservoir_id: "identity".into(), env_name: CARTPOLE.into(), seed, steps: 0, final_reward: None }, policy }
}

#[test]
fn mock_routes_the_paper_examples() {
    let llm = MockLlm::default();
    let envs = env_descriptors();
    assert_eq!(route_env(&llm, "Keep the pole balanced", &envs).unwrap(), CARTPOLE);
    assert_eq!(route_env(&llm, "Swing up and stabilize", &envs).unwrap(), PENDULUM);
    let only: Vec<_> = envs.iter().filter(|e| e.name == PENDULUM).cloned().collect();
    assert_eq!(route_env(&llm, "Keep the pole balanced", &only).unwrap(), PENDULUM);
}

#[test]
fn out_of_enum_answers_are_retried_once() {
    let envs = env_descriptors();
    let llm = Scripted::new(&["HalfCheetah-v4", "{\"env_name\": \"Acrobot-v1\"}"]);
    assert_eq!(route_env(&llm, "anything", &envs).unwrap(), "Acrobot-v1");
    let llm = Scripted::new(&["nope", "still nope"]);
    assert!(matches!(route_env(&llm, "anything", &envs), Err(DialogueError::Protocol { stage: Stage::Router, .. })));
}

#[test]
fn mock_goals_follow_the_prompt_examples() {
    let llm = MockLlm::default();
    assert_eq!(infer_goal(&llm, "Keep stable", CARTPOLE).unwrap(), "Keep the pole upright");
    assert_eq!(infer_goal(&llm, "Move fast", CARTPOLE).unwrap(), "Make the cart continuously move to left or right");
    assert_eq!(infer_goal(&llm, "Move fast", CARTPOLE).unwrap(), infer_goal(&llm, "Move fast", CARTPOLE).unwrap());
}

#[test]
fn designed_states_are_validated() {
    let llm = MockLlm::default();
    let s = design_state(&llm, "Move to left", CARTPOLE).unwrap();
    assert_eq!(s, vec![0.1, 0.0, -0.2, 0.0]);
    let mut env = make_env(CARTPOLE).unwrap();
    env.set_internal_state(&s).unwrap();
    assert_eq!(env.internal_state(), s);

    let llm = Scripted::new(&["{\"state\": [1, 2, 3]}", "{\"state\": [1, 2]}"]);
    assert!(matches!(design_state(&llm, "g", CARTPOLE), Err(DialogueError::Protocol { stage: Stage::StateDesign, .. })));
    let seen = llm.seen.lock().unwrap();
    assert!(seen[1].user.contains("rejected"));

    let llm = Scripted::new(&["```json\n{\"note\": \"x\", \"state\": [0.1, 0.0, -0.2, 0.0],\n}\n```"]);
    assert_eq!(design_state(&llm, "g", CARTPOLE).unwrap(), vec![0.1, 0.0, -0.2, 0.0]);
    let llm = Scripted::new(&["not json", "{\"state\": [0.0, 0.0, 0.0, 0.0]}"]);
    assert_eq!(design_state(&llm, "g", CARTPOLE).unwrap(), vec![0.0; 4]);
}

#[test]
fn delta_v_properties() {
    let agent = cartpole_agent(1);
    let s0 = reference_observation(4, 42);
    assert_eq!(delta_v(&agent.policy, &s0, 42).unwrap(), 0.0);
    let obs = [0.1, 0.2, 0.0, -0.1];
    assert_eq!(delta_v(&agent.policy, &obs, 7).unwrap(), delta_v(&agent.policy, &obs, 7).unwrap());
    let mut flat = agent.policy.clone();
    let last = flat.params.critic.last_mut().unwrap();
    last.weight.iter_mut().for_each(|w| *w = 0.0);
    last.bias = vec![0.0];
    assert_eq!(delta_v(&flat, &obs, 7).unwrap(), 0.0);
}

#[test]
fn reply_tone_tracks_delta_v() {
    let llm = MockLlm::default();
    let r = |dv: f64| compose_reply(&llm, CARTPOLE, &[0.0; 4], &Action::Discrete(0), dv).unwrap();
    assert!(r(4.47).contains(Tone::Hopeful.marker()));
    assert!(r(-6.07).contains(Tone::Uneasy.marker()));
    assert!(r(0.05).contains(Tone::Neutral.marker()));
    assert_eq!(reply_message(&[0.1, 0.0], &Action::Discrete(1), -3.234), "state: [0.1, 0.0]\naction: [1]\ndelta_v: -3.23");
}

#[test]
fn system_prompts_match_the_template_files() {
    let mut agents = AgentSet::new();
    agents.insert(cartpole_agent(0));
    let llm = Scripted::new(&[]);
    run_round("Keep the pole balanced", &agents, &llm, 3).unwrap();
    let seen = llm.seen.lock().unwrap();
    assert_eq!(seen.len(), 4);
    let desc = crate::envs::env_description(CARTPOLE).unwrap();
    let list = crate::envs::format_env_list(&env_descriptors());
    let expect = |path: &str, with_list: bool| {
        let raw = std::fs::read_to_string(format!("{}/assets/prompts/{path}", env!("CARGO_MANIFEST_DIR"))).unwrap();
        let filled =
            if with_list { raw.replace("{env_list}", &list) } else { raw.replace("{env_name}", CARTPOLE).replace("{env_desc}", desc) };
        filled.replace("{{", "{").replace("}}", "}")
    };
    assert_eq!(seen[0].system, expect("router.txt", true));
    assert_eq!(seen[1].system, expect("goal.txt", false));
    assert_eq!(seen[2].system, expect("state_design.txt", false));
    assert_eq!(seen[3].system, expect("reply.txt", false));
    assert!(matches!(&seen[0].schema, Some(OutputSchema::Enum { values, .. }) if values.len() == 4));
}

#[test]
fn rounds_are_deterministic_and_logged() {
    let mut agents = AgentSet::new();
    agents.insert(cartpole_agent(0));
    let llm = MockLlm::default();
    let a = run_round("Keep the pole balanced", &agents, &llm, 11).unwrap();
    let b = run_round("Keep the pole balanced", &agents, &llm, 11).unwrap();
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    assert_eq!(a.env_name, CARTPOLE);
    assert_eq!(a.designed_state.len(), 4);
    assert!(a.delta_v.is_finite() && !a.reply.is_empty());

    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("turns.jsonl");
    append_turn(&log, &a).unwrap();
    append_turn(&log, &b).unwrap();
    assert_eq!(read_turns(&log).unwrap(), vec![a.clone(), b]);

    let err = run_round("Swing up and stabilize", &agents, &llm, 11).unwrap_err();
    assert!(matches!(&err, DialogueError::NoAgent { env_name } if env_name == PENDULUM));
    assert!(err.to_string().contains(PENDULUM));
}

#[test]
fn http_request_carries_the_enum_schema() {
    let llm = HttpLlm::new("http://127.0.0.1:9/v1/", "m", None, std::time::Duration::from_millis(200));
    let req = LlmRequest {
        system: "s".into(),
        user: "u".into(),
        schema: Some(OutputSchema::Enum { field: "env_name".into(), values: vec!["A".into(), "B".into()] }),
    };
    let body = llm.request_body(&req);
    assert_eq!(body["messages"][0]["content"], "s");
    assert_eq!(body["response_format"]["json_schema"]["schema"]["properties"]["env_name"]["enum"][1], "B");
    assert!(matches!(llm.send(&req), Err(LlmError::Transport(_))));
}
